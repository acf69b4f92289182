use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use triage_core::vitals::{ActionType, SeverityLevel};

use crate::ReviewError;

/// One accepted grade, as persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeEntry {
    pub reviewer_id: String,
    pub presentation_id: String,
    pub sample_id: String,
    pub presentation_index: u8,
    pub severity: SeverityLevel,
    pub action: Option<ActionType>,
    pub duration_secs: f64,
    pub accepted_at: DateTime<Utc>,
}

/// Append-only JSONL grade log. Each append is flushed and synced before it
/// returns.
#[derive(Debug)]
pub struct GradeLog {
    path: PathBuf,
    file: File,
}

impl GradeLog {
    /// Opens (creating if needed) the log and returns the entries already in
    /// it. A torn final line left by a crash mid-write is dropped and
    /// truncated away; a bad line anywhere else is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<GradeEntry>), ReviewError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = Vec::new();
        let mut good_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            let lines: Vec<String> =
                reader.split(b'\n').map(|l| l.map(|b| String::from_utf8_lossy(&b).into_owned())).collect::<Result<_, _>>()?;
            let n = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    good_len += line.len() as u64 + 1;
                    continue;
                }
                match serde_json::from_str::<GradeEntry>(line) {
                    Ok(e) => {
                        entries.push(e);
                        good_len += line.len() as u64 + 1;
                    }
                    Err(_) if i + 1 == n => break,
                    Err(e) => return Err(ReviewError::Corrupt(format!("{}:{}: {e}", path.display(), i + 1))),
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).read(true).open(&path)?;
        let len = file.metadata()?.len();
        if len > good_len {
            file.set_len(good_len)?;
        } else if len + 1 == good_len {
            // Last record is complete but unterminated.
            file.write_all(b"\n")?;
            file.sync_data()?;
        }
        Ok((Self { path, file }, entries))
    }

    pub fn append(&mut self, entry: &GradeEntry) -> Result<(), ReviewError> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
