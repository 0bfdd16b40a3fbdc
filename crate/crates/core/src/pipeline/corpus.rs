//! Raw corpus reading: one sentence per line, tokens `surface|lemma|pos`.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use crate::graph::{normalize_lemma, LexKey, Lexicon, Pos};
use crate::scorer::{Sentence, Token};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SkipReason {
    EmptyLine,
    MalformedToken { token: String, reason: &'static str },
}

impl SkipReason {
    pub fn label(&self) -> &'static str {
        match self {
            SkipReason::EmptyLine => "empty_line",
            SkipReason::MalformedToken { .. } => "malformed_token",
        }
    }
}

/// Splits `raw` at unescaped `|`. `\|` and `\\` stand for `|` and `\`.
fn split_fields(raw: &str) -> Vec<String> {
    let mut fields = vec![String::new()];
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(e @ ('|' | '\\')) => fields.last_mut().unwrap().push(e),
                Some(other) => {
                    let f = fields.last_mut().unwrap();
                    f.push('\\');
                    f.push(other);
                }
                None => fields.last_mut().unwrap().push('\\'),
            },
            '|' => fields.push(String::new()),
            c => fields.last_mut().unwrap().push(c),
        }
    }
    fields
}

pub fn parse_token(raw: &str) -> Result<Token, &'static str> {
    let mut fields = split_fields(raw);
    if fields.len() != 3 {
        return Err("expected surface|lemma|pos");
    }
    let tag = fields.pop().unwrap();
    let lemma = normalize_lemma(&fields.pop().unwrap());
    let surface = fields.pop().unwrap();
    if surface.is_empty() {
        return Err("empty surface");
    }
    if lemma.is_empty() {
        return Err("empty lemma");
    }
    let pos = match tag.as_str() {
        "x" => None,
        t => Some(Pos::from_tag(t).ok_or("pos must be one of n, v, a, r, x")?),
    };
    Ok(Token::new(surface, lemma, pos))
}

pub fn parse_sentence(id: String, line: &str) -> Result<Sentence, SkipReason> {
    let mut tokens = Vec::new();
    for raw in line.split_whitespace() {
        let token = parse_token(raw).map_err(|reason| SkipReason::MalformedToken {
            token: raw.to_string(),
            reason,
        })?;
        tokens.push(token);
    }
    if tokens.is_empty() {
        return Err(SkipReason::EmptyLine);
    }
    Ok(Sentence::new(id, tokens))
}

/// Line of the corpus after parsing.
#[derive(Clone, Debug, PartialEq)]
pub enum CorpusLine {
    Sentence(Sentence),
    Skipped { line: usize, reason: SkipReason },
}

/// Yields the corpus in file order. Sentence ids are `<file stem>.<line>`.
pub struct CorpusReader {
    stem: String,
    lines: io::Lines<BufReader<File>>,
    line: usize,
}

impl CorpusReader {
    pub fn open(path: &Path) -> io::Result<CorpusReader> {
        let stem = path
            .file_stem()
            .map_or_else(|| "corpus".into(), |s| s.to_string_lossy().into_owned());
        Ok(CorpusReader {
            stem,
            lines: BufReader::new(File::open(path)?).lines(),
            line: 0,
        })
    }

    pub fn line(&self) -> usize {
        self.line
    }
}

impl Iterator for CorpusReader {
    type Item = io::Result<CorpusLine>;

    fn next(&mut self) -> Option<Self::Item> {
        let text = match self.lines.next()? {
            Ok(t) => t,
            Err(e) => return Some(Err(e)),
        };
        self.line += 1;
        let id = format!("{}.{}", self.stem, self.line);
        Some(Ok(match parse_sentence(id, &text) {
            Ok(s) => CorpusLine::Sentence(s),
            Err(reason) => CorpusLine::Skipped {
                line: self.line,
                reason,
            },
        }))
    }
}

/// Positions of tokens whose `(lemma, pos)` is in the lexicon, optionally
/// restricted to one part of speech.
pub fn target_positions(sentence: &Sentence, lexicon: &Lexicon, pos: Option<Pos>) -> Vec<usize> {
    sentence
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| match t.pos {
            Some(p) => pos.is_none_or(|f| f == p) && lexicon.contains(&t.lemma, p),
            None => false,
        })
        .map(|(i, _)| i)
        .collect()
}

pub fn target_key(sentence: &Sentence, position: usize) -> Option<LexKey> {
    let t = &sentence.tokens[position];
    t.pos.map(|p| LexKey::new(t.lemma.clone(), p))
}
