use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use super::load::data_lines;
use super::{normalize_lemma, GraphError, Pos, SemanticGraph, SynsetId};

/// Lexicon key: a normalized lemma with its part of speech.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LexKey {
    pub lemma: String,
    pub pos: Pos,
}

impl LexKey {
    pub fn new(lemma: impl Into<String>, pos: Pos) -> Self {
        LexKey {
            lemma: lemma.into(),
            pos,
        }
    }
}

impl fmt::Display for LexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.lemma, self.pos)
    }
}

/// Maps every `(lemma, pos)` of the graph to its senses in ranked order.
///
/// Index 1 of an entry is the presumed most frequent sense.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: BTreeMap<LexKey, Vec<SynsetId>>,
    skipped_ranking_lines: usize,
}

impl Lexicon {
    /// Collects all lexicalizations of the graph's synsets. Without a ranking
    /// file, senses are ordered as they appear in the synsets file.
    pub fn build(graph: &SemanticGraph, ranking: Option<&Path>) -> Result<Lexicon, GraphError> {
        let mut entries: BTreeMap<LexKey, Vec<SynsetId>> = BTreeMap::new();
        for s in graph.synsets() {
            for lemma in s.lemmas() {
                entries
                    .entry(LexKey::new(lemma.clone(), s.pos))
                    .or_default()
                    .push(s.id.clone());
            }
        }
        let mut lexicon = Lexicon {
            entries,
            skipped_ranking_lines: 0,
        };
        if let Some(path) = ranking {
            lexicon.apply_ranking(graph, path)?;
        }
        Ok(lexicon)
    }

    fn apply_ranking(&mut self, graph: &SemanticGraph, path: &Path) -> Result<(), GraphError> {
        for item in data_lines(path)? {
            let (line_no, line) = item?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(GraphError::Malformed {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: "expected `LEMMA<TAB>POS<TAB>ID1,ID2,...`".into(),
                });
            }
            let lemma = normalize_lemma(fields[0]);
            let Some(pos) = Pos::from_tag(fields[1].trim()) else {
                self.skip(path, line_no, format!("unknown POS `{}`", fields[1]));
                continue;
            };
            let key = LexKey::new(lemma, pos);
            let Some(current) = self.entries.get(&key) else {
                self.skip(path, line_no, format!("lemma {key} is not in the graph"));
                continue;
            };

            let mut ranked: Vec<SynsetId> = Vec::new();
            let mut seen = HashSet::new();
            let mut bad = None;
            for raw in fields[2].split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let ok = graph
                    .get(raw)
                    .is_some_and(|s| s.pos == pos && s.contains_lemma(&key.lemma));
                if !ok {
                    bad = Some(raw.to_string());
                    break;
                }
                if seen.insert(raw.to_string()) {
                    ranked.push(SynsetId::new(raw));
                }
            }
            if let Some(raw) = bad {
                self.skip(
                    path,
                    line_no,
                    format!("synset `{raw}` does not lexicalize {key}"),
                );
                continue;
            }
            // Senses the file leaves out keep their file order after the ranked ones.
            for id in current {
                if !seen.contains(id.as_str()) {
                    ranked.push(id.clone());
                }
            }
            self.entries.insert(key, ranked);
        }
        Ok(())
    }

    fn skip(&mut self, path: &Path, line: usize, reason: String) {
        log::warn!("{}:{line}: skipping ranking line: {reason}", path.display());
        self.skipped_ranking_lines += 1;
    }

    pub fn senses(&self, lemma: &str, pos: Pos) -> Option<&[SynsetId]> {
        // BTreeMap lookups need an owned key; entries are few enough per
        // lookup that the allocation does not matter.
        self.entries
            .get(&LexKey::new(lemma, pos))
            .map(Vec::as_slice)
    }

    pub fn get(&self, key: &LexKey) -> Option<&[SynsetId]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, lemma: &str, pos: Pos) -> bool {
        self.senses(lemma, pos).is_some()
    }

    /// 1-based position of `sense` in the ordering of `key`.
    pub fn sense_index(&self, key: &LexKey, sense: &SynsetId) -> Option<usize> {
        self.get(key)?
            .iter()
            .position(|s| s == sense)
            .map(|i| i + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LexKey, &[SynsetId])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ranking lines that were ignored with a warning.
    pub fn skipped_ranking_lines(&self) -> usize {
        self.skipped_ranking_lines
    }
}
