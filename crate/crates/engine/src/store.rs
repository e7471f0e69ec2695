//! Append-only JSONL event log plus a snapshot directory.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::state::{LogRecord, OodaState, Phase, ReplayError};
use crate::EngineError;

pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug)]
pub struct RunStore {
    dir: PathBuf,
    writer: BufWriter<File>,
}

/// Parses log lines; the first malformed line is an error. With
/// `allow_torn_tail`, an unterminated final line is dropped instead.
pub fn parse_log(text: &str, allow_torn_tail: bool) -> Result<Vec<LogRecord>, ReplayError> {
    let torn = !text.is_empty() && !text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogRecord>(line) {
            Ok(r) => {
                let expected = out.last().map_or(1, |p: &LogRecord| p.seq + 1);
                if r.seq != expected {
                    return Err(ReplayError::Sequence { seq: r.seq, expected });
                }
                out.push(r)
            }
            Err(_) if allow_torn_tail && torn && i + 1 == lines.len() => break,
            Err(e) => {
                return Err(ReplayError::Corrupt {
                    line: i + 1,
                    msg: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, EngineError> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(parse_log(&text, false)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(EngineError::Io(format!("{}: {e}", path.display()))),
    }
}

/// Longest prefix that ends between ticks.
pub fn idle_prefix(records: &[LogRecord]) -> Result<usize, ReplayError> {
    let mut s = OodaState::default();
    let mut keep = 0;
    for (i, r) in records.iter().enumerate() {
        s.apply(r)?;
        if s.phase == Phase::Idle {
            keep = i + 1;
        }
    }
    Ok(keep)
}

fn io(path: &Path, e: std::io::Error) -> EngineError {
    EngineError::Io(format!("{}: {e}", path.display()))
}

impl RunStore {
    /// Opens `dir`, dropping a torn final line and any records of an
    /// unfinished tick. Returns the store and the retained records.
    pub fn open(dir: &Path) -> Result<(Self, Vec<LogRecord>), EngineError> {
        std::fs::create_dir_all(dir.join(SNAPSHOT_DIR)).map_err(|e| io(dir, e))?;
        let path = dir.join(LOG_FILE);
        let mut records = match std::fs::read_to_string(&path) {
            Ok(text) => parse_log(&text, true)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io(&path, e)),
        };
        let keep = idle_prefix(&records)?;
        records.truncate(keep);
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        let file = OpenOptions::new().append(true).open(&path).map_err(|e| io(&path, e))?;
        Ok((
            Self {
                dir: dir.to_path_buf(),
                writer: BufWriter::new(file),
            },
            records,
        ))
    }

    pub fn append(&mut self, rec: &LogRecord) -> Result<(), EngineError> {
        let line = serde_json::to_string(rec).expect("record serializes");
        let path = self.log_path();
        writeln!(self.writer, "{line}").map_err(|e| io(&path, e))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), EngineError> {
        let path = self.log_path();
        self.writer.flush().map_err(|e| io(&path, e))?;
        self.writer.get_ref().sync_data().map_err(|e| io(&path, e))
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join(LOG_FILE)
    }

    pub fn write_snapshot(&self, state: &OodaState) -> Result<PathBuf, EngineError> {
        let path = self.dir.join(SNAPSHOT_DIR).join(format!("state-{:08}.json", state.seq));
        let text = serde_json::to_string(state).expect("state serializes");
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        Ok(path)
    }

    /// Most recent snapshot by sequence number.
    pub fn latest_snapshot(dir: &Path) -> Result<Option<OodaState>, EngineError> {
        let snaps = dir.join(SNAPSHOT_DIR);
        let Ok(entries) = std::fs::read_dir(&snaps) else {
            return Ok(None);
        };
        let mut names: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        names.sort();
        match names.last() {
            None => Ok(None),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| io(p, e))?;
                serde_json::from_str(&text)
                    .map(Some)
                    .map_err(|e| EngineError::Io(format!("{}: {e}", p.display())))
            }
        }
    }
}
