//! Artifact writers: JSON, JSON-lines, and CSV, all deterministic
//! functions of (config, seeds). Wall-clock goes to stderr only, never
//! into artifacts, so a rerun with the same inputs is byte-identical.

use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, ReportError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(RunDir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, ReportError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn write_jsonl<T: Serialize>(
        &self,
        name: &str,
        rows: impl IntoIterator<Item = T>,
    ) -> Result<PathBuf, ReportError> {
        let path = self.path(name);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut writer = std::io::BufWriter::new(file);
        for row in rows {
            let line = serde_json::to_string(&row)?;
            writeln!(writer, "{line}").map_err(io_err(&path))?;
        }
        writer.flush().map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn write_csv<T: Serialize>(
        &self,
        name: &str,
        rows: impl IntoIterator<Item = T>,
    ) -> Result<PathBuf, ReportError> {
        let path = self.path(name);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut writer = csv::Writer::from_writer(file);
        for row in rows {
            writer.serialize(row).map_err(|e| ReportError::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e),
            })?;
        }
        writer.flush().map_err(io_err(&path))?;
        Ok(path)
    }
}

/// Run manifest: which command produced this directory, under which
/// config. The config echo makes every row reproducible.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub command: &'a str,
    pub config_hash: String,
    pub config: &'a C,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
    }

    #[test]
    fn writers_produce_stable_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(dir.path().join("run")).unwrap();
        run.write_csv("rows.csv", vec![Row { a: 1, b: 0.5 }, Row { a: 2, b: 1.5 }])
            .unwrap();
        run.write_jsonl("rows.jsonl", vec![Row { a: 1, b: 0.5 }])
            .unwrap();
        let csv1 = fs::read(run.path("rows.csv")).unwrap();
        run.write_csv("rows.csv", vec![Row { a: 1, b: 0.5 }, Row { a: 2, b: 1.5 }])
            .unwrap();
        let csv2 = fs::read(run.path("rows.csv")).unwrap();
        assert_eq!(csv1, csv2);
        let text = fs::read_to_string(run.path("rows.jsonl")).unwrap();
        assert_eq!(text, "{\"a\":1,\"b\":0.5}\n");
    }
}
