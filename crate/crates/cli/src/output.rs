use std::path::{Path, PathBuf};
use std::time::Instant;

use asep2d_core::io::tag_manifest;
use serde_json::{json, Value};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, body: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, body).map_err(CliError::io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(CliError::io(path))
}

/// Collects the files of one run and writes them with a manifest.
pub struct Run {
    dir: PathBuf,
    started: Instant,
    files: Vec<(String, Vec<u8>)>,
    pub manifest: serde_json::Map<String, Value>,
}

impl Run {
    pub fn new(dir: PathBuf, command: &str) -> Self {
        let mut manifest = serde_json::Map::new();
        manifest.insert("command".into(), json!(command));
        manifest.insert(
            "versions".into(),
            json!({ "asep2d": env!("CARGO_PKG_VERSION"), "format": 1 }),
        );
        Run {
            dir,
            started: Instant::now(),
            files: Vec::new(),
            manifest,
        }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.manifest.insert(key.into(), value);
    }

    pub fn csv(&mut self, name: &str, body: &str) {
        self.files.push((name.into(), tag_manifest(body, MANIFEST).into_bytes()));
    }

    pub fn text(&mut self, name: &str, body: &str) {
        self.files.push((name.into(), body.as_bytes().to_vec()));
    }

    /// Writes every file, then the manifest last.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.dir).map_err(CliError::io(&self.dir))?;
        let names: Vec<&str> = self.files.iter().map(|(n, _)| n.as_str()).collect();
        self.manifest.insert("outputs".into(), json!(names));
        for (name, body) in &self.files {
            write_atomic(&self.dir.join(name), body)?;
        }
        self.manifest
            .insert("wall_time_seconds".into(), json!(self.started.elapsed().as_secs_f64()));
        let body = serde_json::to_string_pretty(&Value::Object(self.manifest)).expect("manifest serializes");
        let path = self.dir.join(MANIFEST);
        write_atomic(&path, format!("{body}\n").as_bytes())?;
        Ok(path)
    }
}
