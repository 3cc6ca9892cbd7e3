//! Append-only ratings log.
//!
//! Each accepted rating is one JSON line, flushed to disk before the write
//! call returns. Compaction keeps the latest rating per (rater, target) and
//! swaps the file in by atomic rename.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use qgbench_core::agreement::{latest_per_pair, RatingRecord};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("ratings log {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("ratings log {path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

struct Inner {
    file: File,
    records: Vec<RatingRecord>,
}

pub struct RatingLog {
    path: PathBuf,
    inner: Mutex<Inner>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses every line of the log. A final line without a newline is a write
/// cut short by a crash; it is returned separately instead of failing.
fn parse_log(path: &Path, text: &str) -> Result<(Vec<RatingRecord>, Option<usize>), StoreError> {
    let mut records = Vec::new();
    let complete = match text.rfind('\n') {
        Some(i) => i + 1,
        None => 0,
    };
    for (idx, line) in text[..complete].lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    let tail = &text[complete..];
    if tail.trim().is_empty() {
        return Ok((records, None));
    }
    match serde_json::from_str::<RatingRecord>(tail) {
        Ok(record) => {
            records.push(record);
            Ok((records, None))
        }
        Err(_) => Ok((records, Some(complete))),
    }
}

/// Reads all ratings in a log file without opening it for writing.
pub fn replay(path: &Path) -> Result<Vec<RatingRecord>, StoreError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_log(path, &text)?.0)
}

fn sync_dir(path: &Path) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    File::open(dir)?.sync_all()
}

impl RatingLog {
    /// Opens or creates the log and replays it. A torn final line is cut
    /// off so later appends start on a clean line.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io_err(&path))?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io_err(&path))?;
        let (records, torn) = parse_log(&path, &text)?;
        if let Some(keep) = torn {
            tracing::warn!(path = %path.display(), "dropping incomplete final line");
            file.set_len(keep as u64).map_err(io_err(&path))?;
            file.sync_data().map_err(io_err(&path))?;
        } else if !text.is_empty() && !text.ends_with('\n') {
            file.write_all(b"\n").map_err(io_err(&path))?;
            file.sync_data().map_err(io_err(&path))?;
        }
        file.seek(SeekFrom::End(0)).map_err(io_err(&path))?;
        Ok(Self {
            path,
            inner: Mutex::new(Inner { file, records }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Appends one rating and flushes it to stable storage before
    /// returning.
    pub fn append(&self, record: &RatingRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(record).expect("rating serializes");
        line.push(b'\n');
        let mut inner = self.lock();
        inner.file.write_all(&line).map_err(io_err(&self.path))?;
        inner.file.sync_data().map_err(io_err(&self.path))?;
        inner.records.push(record.clone());
        Ok(())
    }

    /// Every accepted rating, in arrival order.
    pub fn snapshot(&self) -> Vec<RatingRecord> {
        self.lock().records.clone()
    }

    pub fn len(&self) -> usize {
        self.lock().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rewrites the log with only the latest rating per (rater, target).
    /// Returns the number of records kept.
    pub fn compact(&self) -> Result<usize, StoreError> {
        let mut inner = self.lock();
        let kept: Vec<RatingRecord> = latest_per_pair(&inner.records).into_iter().cloned().collect();
        let tmp = self.path.with_extension("ndjson.tmp");
        {
            let mut out = File::create(&tmp).map_err(io_err(&tmp))?;
            for r in &kept {
                serde_json::to_writer(&mut out, r).expect("rating serializes");
                out.write_all(b"\n").map_err(io_err(&tmp))?;
            }
            out.sync_all().map_err(io_err(&tmp))?;
        }
        std::fs::rename(&tmp, &self.path).map_err(io_err(&self.path))?;
        sync_dir(&self.path).map_err(io_err(&self.path))?;
        inner.file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(io_err(&self.path))?;
        inner.records = kept;
        Ok(inner.records.len())
    }
}

/// Counts complete lines in a log file.
pub fn count_lines(path: &Path) -> Result<usize, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut n = 0;
    for line in BufReader::new(file).lines() {
        if !line.map_err(io_err(path))?.trim().is_empty() {
            n += 1;
        }
    }
    Ok(n)
}
