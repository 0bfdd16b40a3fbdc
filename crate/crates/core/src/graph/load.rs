use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{
    BuildError, GraphBuilder, GraphError, GraphLoadOptions, Pos, SemanticGraph, Synset, SynsetId,
};

/// Yields `(line_number, line)` for every non-blank, non-comment line.
pub(crate) fn data_lines(
    path: &Path,
) -> Result<impl Iterator<Item = Result<(usize, String), GraphError>> + '_, GraphError> {
    let file = File::open(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Err(source) => Some(Err(GraphError::Io {
                path: path.to_path_buf(),
                source,
            })),
            Ok(line) => {
                let trimmed = line.trim_end_matches(['\r', '\n']);
                if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                    None
                } else {
                    Some(Ok((i + 1, trimmed.to_string())))
                }
            }
        }))
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> GraphError {
    GraphError::Malformed {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(char::is_whitespace)
}

fn read_synsets(path: &Path, builder: &mut GraphBuilder) -> Result<(), GraphError> {
    for item in data_lines(path)? {
        let (line_no, line) = item?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(malformed(
                path,
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].trim();
        if !valid_id(id) {
            return Err(malformed(path, line_no, format!("invalid synset id `{id}`")));
        }
        let pos = Pos::from_tag(fields[1].trim()).ok_or_else(|| {
            malformed(
                path,
                line_no,
                format!("invalid POS `{}` (expected n, v, a or r)", fields[1]),
            )
        })?;
        let raw: Vec<&str> = fields[2].split('|').collect();
        if raw.iter().any(|l| l.trim().is_empty()) {
            return Err(malformed(path, line_no, "empty lemma"));
        }
        let synset = Synset::new(SynsetId::new(id), pos, raw)
            .ok_or_else(|| malformed(path, line_no, "no lemmas"))?;
        builder.add_synset(synset).map_err(|e| match e {
            BuildError::DuplicateSynset(id) => GraphError::DuplicateSynset {
                path: path.to_path_buf(),
                line: line_no,
                id,
            },
            other => malformed(path, line_no, other.to_string()),
        })?;
    }
    Ok(())
}

fn read_edges(path: &Path, builder: &mut GraphBuilder) -> Result<(), GraphError> {
    for item in data_lines(path)? {
        let (line_no, line) = item?;
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(malformed(
                path,
                line_no,
                "expected `SRC_ID<TAB>DST_ID`".to_string(),
            ));
        }
        builder
            .add_edge(fields[0], fields[1])
            .map_err(|e| match e {
                BuildError::UnknownSynset(id) => GraphError::UnknownSynset {
                    path: path.to_path_buf(),
                    line: line_no,
                    id,
                },
                other => malformed(path, line_no, other.to_string()),
            })?;
    }
    Ok(())
}

fn finish(builder: GraphBuilder, options: GraphLoadOptions) -> Result<SemanticGraph, GraphError> {
    builder.build(options).map_err(|e| match e {
        BuildError::Empty => GraphError::Empty,
        // Builder only reports emptiness at this point.
        other => unreachable!("{other}"),
    })
}

impl SemanticGraph {
    /// Loads and validates the synsets and edges files.
    pub fn load(
        synsets_path: &Path,
        edges_path: &Path,
        options: GraphLoadOptions,
    ) -> Result<SemanticGraph, GraphError> {
        let mut builder = GraphBuilder::new();
        read_synsets(synsets_path, &mut builder)?;
        read_edges(edges_path, &mut builder)?;
        let graph = finish(builder, options)?;
        log::info!(
            "loaded graph: {} synsets, {} directed edges",
            graph.len(),
            graph.edge_count()
        );
        Ok(graph)
    }

    /// Loads only the synsets file. Enough for lexicon construction and for
    /// scoring against a prebuilt profile store.
    pub fn load_synsets(synsets_path: &Path) -> Result<SemanticGraph, GraphError> {
        let mut builder = GraphBuilder::new();
        read_synsets(synsets_path, &mut builder)?;
        finish(builder, GraphLoadOptions { symmetrize: false })
    }
}
