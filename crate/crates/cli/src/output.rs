//! Report emission. Every file is written to a temporary sibling and renamed
//! into place. Reports are deterministic; wall-clock times go to a sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Collects the files of one run so the manifest can list them.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
    started: f64,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new(), started: unix_now() })
    }

    /// Writes `name` atomically through `fill`.
    pub fn write_with<F>(&mut self, name: &str, fill: F) -> std::io::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        {
            let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
            fill(&mut w)?;
            w.flush()?;
            w.get_ref().sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> std::io::Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    pub fn write_jsonl<'a, I: IntoIterator<Item = &'a Value>>(&mut self, name: &str, rows: I) -> std::io::Result<()> {
        self.write_with(name, |w| {
            for r in rows {
                serde_json::to_writer(&mut *w, r)?;
                writeln!(w)?;
            }
            Ok(())
        })
    }

    /// Writes the manifest and the timestamp sidecar.
    pub fn finish(mut self, command: &str, exit_code: u8) -> std::io::Result<()> {
        let mut files = self.written.clone();
        files.sort();
        let manifest = json!({ "command": command, "version": VERSION, "exit_code": exit_code, "files": files });
        self.write_json("manifest.json", &manifest)?;
        let stamps = json!({ "started_unix": self.started, "finished_unix": unix_now() });
        self.write_json("timestamps.json", &stamps)
    }
}

/// The common head of every report.
pub fn envelope(command: &str, config: &RunConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(VERSION));
    m.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
    m
}
