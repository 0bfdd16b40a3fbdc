//! Corpus-level statistics of an annotated corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::output::{parse_record, AnnotationRecord, FORMAT_TAG};
use super::PipelineError;
use crate::graph::{LexKey, Lexicon, SynsetId};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusStats {
    pub annotation_count: usize,
    /// Distinct `(lemma, pos)` pairs annotated.
    pub distinct_lemmas: usize,
    /// Distinct synsets assigned.
    pub distinct_senses: usize,
    pub avg_sentences_per_sense: f64,
    /// Mean confidence, in `[0, 1]`.
    pub avg_confidence: f64,
    /// Mean candidate-sense count over the annotated lemmas.
    pub avg_polysemy: f64,
}

impl CorpusStats {
    /// `key=value` lines, as written to the run report.
    pub fn to_kv(&self) -> String {
        format!(
            "annotation_count={}\ndistinct_lemmas={}\ndistinct_senses={}\n\
             avg_sentences_per_sense={}\navg_confidence={}\navg_polysemy={}\n",
            self.annotation_count,
            self.distinct_lemmas,
            self.distinct_senses,
            self.avg_sentences_per_sense,
            self.avg_confidence,
            self.avg_polysemy
        )
    }
}

/// One aligned row per statistic. Confidence is shown on both the `[0, 1]` and the
/// percent scale.
impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("Number of Annotations", self.annotation_count.to_string()),
            ("Distinct lemmas covered", self.distinct_lemmas.to_string()),
            ("Distinct senses covered", self.distinct_senses.to_string()),
            (
                "Average # of sentences per sense",
                format!("{:.2}", self.avg_sentences_per_sense),
            ),
            (
                "Average confidence score",
                format!(
                    "{:.4} ({:.2} x100)",
                    self.avg_confidence,
                    self.avg_confidence * 100.0
                ),
            ),
            ("Average Polisemy", format!("{:.2}", self.avg_polysemy)),
        ];
        for (name, value) in rows {
            writeln!(f, "{name:<34}{value}")?;
        }
        Ok(())
    }
}

/// Builds [`CorpusStats`] one record at a time.
#[derive(Debug)]
pub struct StatsAccumulator<'a> {
    lexicon: &'a Lexicon,
    count: usize,
    confidence_sum: f64,
    lemmas: BTreeMap<LexKey, usize>,
    senses: BTreeSet<SynsetId>,
}

impl<'a> StatsAccumulator<'a> {
    pub fn new(lexicon: &'a Lexicon) -> Self {
        StatsAccumulator {
            lexicon,
            count: 0,
            confidence_sum: 0.0,
            lemmas: BTreeMap::new(),
            senses: BTreeSet::new(),
        }
    }

    /// Fails when the record's `(lemma, pos)` or sense is not in the lexicon.
    pub fn add(&mut self, record: &AnnotationRecord) -> Result<(), String> {
        let key = LexKey::new(record.lemma.clone(), record.pos);
        let senses = self
            .lexicon
            .get(&key)
            .ok_or_else(|| format!("`{key}` is not in the lexicon"))?;
        if !senses.contains(&record.sense) {
            return Err(format!("`{}` is not a sense of `{key}`", record.sense));
        }
        let polysemy = senses.len();
        self.count += 1;
        self.confidence_sum += record.confidence;
        self.lemmas.entry(key).or_insert(polysemy);
        self.senses.insert(record.sense.clone());
        Ok(())
    }

    pub fn finish(&self) -> CorpusStats {
        let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
        CorpusStats {
            annotation_count: self.count,
            distinct_lemmas: self.lemmas.len(),
            distinct_senses: self.senses.len(),
            avg_sentences_per_sense: ratio(self.count as f64, self.senses.len()),
            avg_confidence: ratio(self.confidence_sum, self.count),
            avg_polysemy: ratio(self.lemmas.values().sum::<usize>() as f64, self.lemmas.len()),
        }
    }
}

/// Recomputes the statistics of an annotated corpus file.
pub fn compute_stats(path: &Path, lexicon: &Lexicon) -> Result<CorpusStats, PipelineError> {
    let io_err = |source| PipelineError::Io {
        stage: "stats",
        path: path.to_path_buf(),
        source,
    };
    let record_err = |line, reason| PipelineError::Record {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut acc = StatsAccumulator::new(lexicon);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line_no = i + 1;
        if line.starts_with('#') {
            if line.starts_with("#format=") && !line.starts_with(FORMAT_TAG) {
                return Err(record_err(line_no, "unsupported format version".into()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let record = parse_record(&line).map_err(|r| record_err(line_no, r))?;
        acc.add(&record).map_err(|r| record_err(line_no, r))?;
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::toy;

    fn lexicon() -> Lexicon {
        let g = toy(
            &[
                ("S1", "n", "match"),
                ("S2", "n", "match"),
                ("S3", "n", "match"),
                ("B1", "n", "bat"),
                ("B2", "n", "bat"),
            ],
            &[],
            true,
        );
        Lexicon::build(&g, None).unwrap()
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn four_annotations_over_two_senses() {
        let f = write(
            "#format=senseforge-tsv-v1\n\
             c.1\t0\tmatch\tn\tS1\t1.000000\t1.000000:S1\tx\n\
             c.2\t0\tmatch\tn\tS1\t1.000000\t1.000000:S1\tx\n\
             c.3\t1\tbat\tn\tB2\t0.500000\t0.750000:B2,0.250000:B1\ty\n\
             c.4\t1\tbat\tn\tB2\t0.500000\t0.750000:B2,0.250000:B1\ty\n",
        );
        let s = compute_stats(f.path(), &lexicon()).unwrap();
        assert_eq!(s.annotation_count, 4);
        assert_eq!(s.distinct_senses, 2);
        assert_eq!(s.distinct_lemmas, 2);
        assert_eq!(s.avg_sentences_per_sense, 2.0);
        assert_eq!(s.avg_confidence, 0.75);
        assert_eq!(s.avg_polysemy, 2.5);
    }

    #[test]
    fn empty_files_give_zeros() {
        let lex = lexicon();
        assert_eq!(compute_stats(write("").path(), &lex).unwrap(), CorpusStats::default());
        assert_eq!(
            compute_stats(write("#format=senseforge-tsv-v1\n").path(), &lex).unwrap(),
            CorpusStats::default()
        );
    }

    #[test]
    fn malformed_records_name_their_line() {
        let lex = lexicon();
        let f = write("#format=senseforge-tsv-v1\nc.1\t0\tmatch\tn\tS1\t1.0\t1.0:S1\tx\nbroken\n");
        match compute_stats(f.path(), &lex) {
            Err(PipelineError::Record { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let f = write("c.1\t0\tglove\tn\tS1\t1.0\t1.0:S1\tx\n");
        assert!(matches!(compute_stats(f.path(), &lex), Err(PipelineError::Record { line: 1, .. })));
        let f = write("#format=senseforge-tsv-v9\n");
        assert!(compute_stats(f.path(), &lex).is_err());
    }

    #[test]
    fn table_layout_shows_both_confidence_scales() {
        let s = CorpusStats {
            annotation_count: 4,
            distinct_lemmas: 2,
            distinct_senses: 2,
            avg_sentences_per_sense: 2.0,
            avg_confidence: 0.5674,
            avg_polysemy: 2.5,
        };
        let text = s.to_string();
        assert!(text.contains("Average confidence score          0.5674 (56.74 x100)"));
        assert!(text.contains("Number of Annotations             4"));
    }
}
