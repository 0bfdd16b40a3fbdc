//! On-disk profile store.
//!
//! A store is a directory holding:
//! - `data.tsv`: one record per line, `SYNSET_ID<TAB>id1:p1 id2:p2 ...`, with
//!   probabilities in shortest round-trip decimal form;
//! - `index.tsv`: `SYNSET_ID<TAB>offset<TAB>length` per record, where
//!   `length` excludes the trailing newline;
//! - `meta.txt`: `key=value` lines with the profiling parameters.
//!
//! Records are appended and flushed before their index lines, so a store
//! interrupted mid-write is recovered by trusting the index prefix.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{LexicalProfile, PprParams};
use crate::graph::SynsetId;

pub const DATA_FILE: &str = "data.tsv";
pub const INDEX_FILE: &str = "index.tsv";
pub const META_FILE: &str = "meta.txt";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: corrupted record at offset {offset}: {reason}", path.display())]
    Corrupt {
        path: PathBuf,
        offset: u64,
        reason: String,
    },
    #[error("{}: store was built with {found}, requested {requested}", path.display())]
    ParamsMismatch {
        path: PathBuf,
        found: String,
        requested: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parameters a store was built with, plus free-form attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct StoreMeta {
    pub params: PprParams,
    /// Extra `key=value` pairs such as the synsets file the graph came from.
    pub attributes: BTreeMap<String, String>,
}

impl StoreMeta {
    pub fn new(params: PprParams) -> Self {
        StoreMeta {
            params,
            attributes: BTreeMap::new(),
        }
    }

    fn render(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        let _ = writeln!(out, "alpha={}", p.alpha);
        let _ = writeln!(out, "epsilon={}", p.epsilon);
        let _ = writeln!(out, "max_iters={}", p.max_iters);
        let _ = writeln!(out, "top_n={}", p.top_n);
        for (k, v) in &self.attributes {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    fn parse(path: &Path, text: &str) -> Result<StoreMeta, StoreError> {
        let mut params = PprParams::default();
        let mut attributes = BTreeMap::new();
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let body = line.trim_end();
            let corrupt = |reason: String| StoreError::Corrupt {
                path: path.to_path_buf(),
                offset,
                reason,
            };
            if !body.is_empty() {
                let (k, v) = body
                    .split_once('=')
                    .ok_or_else(|| corrupt("expected key=value".into()))?;
                let num = |what: &str| corrupt(format!("bad {what} `{v}`"));
                match k {
                    "alpha" => params.alpha = v.parse().map_err(|_| num(k))?,
                    "epsilon" => params.epsilon = v.parse().map_err(|_| num(k))?,
                    "max_iters" => params.max_iters = v.parse().map_err(|_| num(k))?,
                    "top_n" => params.top_n = v.parse().map_err(|_| num(k))?,
                    _ => {
                        attributes.insert(k.to_string(), v.to_string());
                    }
                }
            }
            offset += line.len() as u64;
        }
        Ok(StoreMeta { params, attributes })
    }

    fn read(dir: &Path) -> Result<Option<StoreMeta>, StoreError> {
        let path = dir.join(META_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => StoreMeta::parse(&path, &text).map(Some),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    offset: u64,
    len: u64,
}

/// Parses index lines, stopping at the first incomplete one. Returns the
/// entries in file order and the byte length of the valid prefix.
fn read_index(
    path: &Path,
    data_len: u64,
    lenient: bool,
) -> Result<(Vec<(SynsetId, Slot)>, u64), StoreError> {
    let text = match fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == io::ErrorKind::NotFound && lenient => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut entries = Vec::new();
    let mut pos = 0usize;
    let mut expected = 0u64;
    while pos < text.len() {
        let Some(nl) = text[pos..].iter().position(|&b| b == b'\n') else {
            if lenient {
                break;
            }
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                offset: pos as u64,
                reason: "truncated index line".into(),
            });
        };
        let line = &text[pos..pos + nl];
        let parsed = std::str::from_utf8(line).ok().and_then(|l| {
            let mut it = l.split('\t');
            let id = it.next()?;
            let offset: u64 = it.next()?.parse().ok()?;
            let len: u64 = it.next()?.parse().ok()?;
            if id.is_empty() || it.next().is_some() {
                return None;
            }
            Some((SynsetId::new(id), Slot { offset, len }))
        });
        let in_bounds = parsed
            .as_ref()
            .is_some_and(|(_, s)| s.offset == expected && s.offset + s.len < data_len);
        match parsed {
            Some(entry) if in_bounds => {
                expected = entry.1.offset + entry.1.len + 1;
                entries.push(entry);
            }
            _ if lenient => break,
            _ => {
                return Err(StoreError::Corrupt {
                    path: path.to_path_buf(),
                    offset: pos as u64,
                    reason: "malformed or out-of-range index line".into(),
                })
            }
        }
        pos += nl + 1;
    }
    Ok((entries, pos as u64))
}

/// Appends profile records to a store directory.
pub struct StoreWriter {
    dir: PathBuf,
    data: BufWriter<File>,
    index: File,
    pending_index: String,
    offset: u64,
    record: String,
}

impl StoreWriter {
    /// Creates (or truncates) a store. With `resume`, an existing store with
    /// identical parameters is reopened for appending instead, and the ids
    /// already stored are returned.
    pub fn open(
        dir: &Path,
        meta: &StoreMeta,
        resume: bool,
    ) -> Result<(StoreWriter, HashSet<SynsetId>), StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let data_path = dir.join(DATA_FILE);
        let index_path = dir.join(INDEX_FILE);
        let mut existing = HashSet::new();
        let mut offset = 0u64;

        let previous = if resume { StoreMeta::read(dir)? } else { None };
        if let Some(prev) = previous {
            if prev.params != meta.params {
                return Err(StoreError::ParamsMismatch {
                    path: dir.to_path_buf(),
                    found: format!("{:?}", prev.params),
                    requested: format!("{:?}", meta.params),
                });
            }
            let data_len = fs::metadata(&data_path).map(|m| m.len()).unwrap_or(0);
            let (entries, index_len) = read_index(&index_path, data_len, true)?;
            offset = entries.last().map_or(0, |(_, s)| s.offset + s.len + 1);
            existing.extend(entries.into_iter().map(|(id, _)| id));
            // Drop whatever an interrupted run left past the valid prefix.
            truncate_file(&index_path, index_len)?;
            truncate_file(&data_path, offset)?;
            log::info!(
                "resuming store {}: {} profiles already present",
                dir.display(),
                existing.len()
            );
        } else {
            File::create(&data_path).map_err(io_err(&data_path))?;
            File::create(&index_path).map_err(io_err(&index_path))?;
        }

        let meta_path = dir.join(META_FILE);
        fs::write(&meta_path, meta.render()).map_err(io_err(&meta_path))?;

        let data = OpenOptions::new()
            .append(true)
            .open(&data_path)
            .map_err(io_err(&data_path))?;
        let index = OpenOptions::new()
            .append(true)
            .open(&index_path)
            .map_err(io_err(&index_path))?;
        Ok((
            StoreWriter {
                dir: dir.to_path_buf(),
                data: BufWriter::with_capacity(1 << 20, data),
                index,
                pending_index: String::new(),
                offset,
                record: String::new(),
            },
            existing,
        ))
    }

    /// Buffers one record. Entries must already be in profile order.
    pub fn append<'a, I>(&mut self, source: &str, entries: I) -> Result<(), StoreError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        self.record.clear();
        self.record.push_str(source);
        self.record.push('\t');
        for (i, (id, p)) in entries.into_iter().enumerate() {
            if i > 0 {
                self.record.push(' ');
            }
            let _ = write!(self.record, "{id}:{p}");
        }
        let len = self.record.len() as u64;
        self.record.push('\n');
        let data_path = self.dir.join(DATA_FILE);
        self.data
            .write_all(self.record.as_bytes())
            .map_err(io_err(&data_path))?;
        let _ = writeln!(self.pending_index, "{source}\t{}\t{len}", self.offset);
        self.offset += len + 1;
        Ok(())
    }

    pub fn append_profile(&mut self, profile: &LexicalProfile) -> Result<(), StoreError> {
        self.append(
            profile.source().as_str(),
            profile.entries().iter().map(|(id, p)| (id.as_str(), *p)),
        )
    }

    /// Makes every appended record durable: data first, then its index lines.
    pub fn flush(&mut self) -> Result<(), StoreError> {
        let data_path = self.dir.join(DATA_FILE);
        self.data.flush().map_err(io_err(&data_path))?;
        if !self.pending_index.is_empty() {
            let index_path = self.dir.join(INDEX_FILE);
            self.index
                .write_all(self.pending_index.as_bytes())
                .map_err(io_err(&index_path))?;
            self.pending_index.clear();
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), StoreError> {
        self.flush()
    }
}

fn truncate_file(path: &Path, len: u64) -> Result<(), StoreError> {
    let f = OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(false)
        .open(path)
        .map_err(io_err(path))?;
    f.set_len(len).map_err(io_err(path))
}

/// Read side of a store. Lookups use positioned reads and are safe to issue
/// from many threads at once.
#[derive(Debug)]
pub struct ProfileStore {
    dir: PathBuf,
    data: File,
    slots: HashMap<SynsetId, Slot>,
    order: Vec<SynsetId>,
    meta: Option<StoreMeta>,
}

impl ProfileStore {
    pub fn open(dir: &Path) -> Result<ProfileStore, StoreError> {
        let data_path = dir.join(DATA_FILE);
        let data = File::open(&data_path).map_err(io_err(&data_path))?;
        let data_len = data.metadata().map_err(io_err(&data_path))?.len();
        let (entries, _) = read_index(&dir.join(INDEX_FILE), data_len, false)?;
        let mut slots = HashMap::with_capacity(entries.len());
        let mut order = Vec::with_capacity(entries.len());
        for (id, slot) in entries {
            order.push(id.clone());
            slots.insert(id, slot);
        }
        Ok(ProfileStore {
            dir: dir.to_path_buf(),
            data,
            slots,
            order,
            meta: StoreMeta::read(dir)?,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta(&self) -> Option<&StoreMeta> {
        self.meta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.slots.contains_key(id)
    }

    /// Stored sources in write order.
    pub fn ids(&self) -> &[SynsetId] {
        &self.order
    }

    /// Reads one profile; `Ok(None)` when the source was never stored.
    pub fn lookup(&self, id: &str) -> Result<Option<LexicalProfile>, StoreError> {
        let Some(slot) = self.slots.get(id) else {
            return Ok(None);
        };
        let data_path = self.dir.join(DATA_FILE);
        let mut buf = vec![0u8; slot.len as usize];
        self.data
            .read_exact_at(&mut buf, slot.offset)
            .map_err(io_err(&data_path))?;
        let corrupt = |reason: &str| StoreError::Corrupt {
            path: data_path.clone(),
            offset: slot.offset,
            reason: reason.to_string(),
        };
        let text = std::str::from_utf8(&buf).map_err(|_| corrupt("invalid UTF-8"))?;
        let (source, body) = text
            .split_once('\t')
            .ok_or_else(|| corrupt("missing tab"))?;
        if source != id {
            return Err(corrupt(&format!("record belongs to `{source}`, not `{id}`")));
        }
        let mut entries = Vec::new();
        for item in body.split(' ').filter(|s| !s.is_empty()) {
            // Ids may themselves contain ':'.
            let (sid, p) = item
                .rsplit_once(':')
                .ok_or_else(|| corrupt("entry without `:`"))?;
            let p: f64 = p.parse().map_err(|_| corrupt("bad probability"))?;
            if !(p > 0.0 && p <= 1.0) || sid.is_empty() {
                return Err(corrupt("probability out of range"));
            }
            entries.push((SynsetId::new(sid), p));
        }
        Ok(Some(LexicalProfile::from_sorted(SynsetId::new(source), entries)))
    }
}
