//! Run manifests written next to every output file.

use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Resolved flag values, keyed by long flag name.
    pub params: Vec<(String, String)>,
    pub outputs: Vec<PathBuf>,
    pub duration: Duration,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!("command = {}\ntool_version = {}\n", self.command, env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.params {
            s.push_str(&format!("{k} = {v}\n"));
        }
        for o in &self.outputs {
            s.push_str(&format!("output = {}\n", o.display()));
        }
        s.push_str(&format!("duration_ms = {}\n", self.duration.as_millis()));
        s
    }

    /// Writes `<primary>.manifest` and returns its path.
    pub fn write_next_to(&self, primary: &Path) -> std::io::Result<PathBuf> {
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest");
        let path = PathBuf::from(name);
        std::fs::write(&path, self.to_text())?;
        Ok(path)
    }
}
