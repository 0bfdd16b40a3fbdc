//! Annotated corpus TSV: one selected occurrence per line.

use std::fmt::Write as _;

use crate::graph::{Pos, SynsetId};
use crate::ranker::ScoredCandidate;

pub const FORMAT_TAG: &str = "#format=senseforge-tsv-v1";
pub const HEADER: &str = "#format=senseforge-tsv-v1\tsentence_id\ttarget_index\tlemma\tpos\tsense\tconfidence\ttop_senses\ttext";

/// Senses listed per record, most likely first.
pub const TOP_SENSES: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationRecord {
    pub sentence_id: String,
    pub target_index: usize,
    pub lemma: String,
    pub pos: Pos,
    pub sense: SynsetId,
    pub confidence: f64,
    pub top: Vec<(f64, SynsetId)>,
    pub text: String,
}

/// Formats one record, without the trailing newline.
pub fn format_candidate(c: &ScoredCandidate) -> String {
    let d = &c.distribution;
    let mut line = format!(
        "{}\t{}\t{}\t{}\t{}\t{:.6}\t",
        c.sentence_id,
        c.position,
        d.lemma(),
        d.pos(),
        d.best(),
        d.confidence()
    );
    for (i, (sense, p)) in d.probabilities().iter().take(TOP_SENSES).enumerate() {
        if i > 0 {
            line.push(',');
        }
        write!(line, "{p:.6}:{sense}").unwrap();
    }
    line.push('\t');
    line.push_str(&c.text);
    line
}

pub fn parse_record(line: &str) -> Result<AnnotationRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 tab-separated fields, found {}", fields.len()));
    }
    let nonempty = |i: usize, name: &str| {
        if fields[i].is_empty() {
            Err(format!("empty {name}"))
        } else {
            Ok(fields[i])
        }
    };
    let sentence_id = nonempty(0, "sentence id")?.to_string();
    let target_index = fields[1]
        .parse()
        .map_err(|_| format!("bad target index `{}`", fields[1]))?;
    let lemma = nonempty(2, "lemma")?.to_string();
    let pos = Pos::from_tag(fields[3]).ok_or_else(|| format!("bad pos `{}`", fields[3]))?;
    let sense = SynsetId::new(nonempty(4, "sense")?);
    let confidence = probability(fields[5]).ok_or_else(|| format!("bad confidence `{}`", fields[5]))?;
    let mut top = Vec::new();
    for item in nonempty(6, "sense list")?.split(',') {
        let (p, id) = item
            .split_once(':')
            .ok_or_else(|| format!("bad sense entry `{item}`"))?;
        let p = probability(p).ok_or_else(|| format!("bad probability in `{item}`"))?;
        if id.is_empty() {
            return Err(format!("bad sense entry `{item}`"));
        }
        top.push((p, SynsetId::new(id)));
    }
    if top[0].1 != sense {
        return Err(format!("sense `{sense}` is not the first listed sense"));
    }
    Ok(AnnotationRecord {
        sentence_id,
        target_index,
        lemma,
        pos,
        sense,
        confidence,
        top,
        text: fields[7].to_string(),
    })
}

fn probability(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|p| (0.0..=1.0).contains(p))
}
