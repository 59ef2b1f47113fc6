//! Plain-text run manifests written next to every output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

/// `key value` lines; repeated keys (`task`, `output`) keep their order.
#[derive(Debug, Default)]
pub struct RunManifest {
    pub command: String,
    pub started: u64,
    pub finished: u64,
    pub fingerprint: Option<String>,
    pub config: String,
    pub tasks: Vec<(String, f64, usize)>,
    pub outputs: Vec<PathBuf>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

impl RunManifest {
    pub fn start(command: String, config: String) -> Self {
        Self { command, started: unix_now(), config, ..Self::default() }
    }

    /// Render with output paths relative to `base` and hashed from disk.
    pub fn render(&self, base: &Path) -> std::io::Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "mwion-manifest v1");
        let _ = writeln!(s, "version {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command {}", self.command);
        let _ = writeln!(s, "started_unix {}", self.started);
        let _ = writeln!(s, "finished_unix {}", self.finished);
        if let Some(f) = &self.fingerprint {
            let _ = writeln!(s, "fingerprint {f}");
        }
        for line in self.config.lines() {
            let _ = writeln!(s, "config {line}");
        }
        for (task, runtime, attempts) in &self.tasks {
            let _ = writeln!(s, "task {task} runtime_s={runtime:.3} attempts={attempts}");
        }
        for out in &self.outputs {
            let _ = writeln!(s, "output {} sha256={}", out.display(), sha256_file(&base.join(out))?);
        }
        Ok(s)
    }

    pub fn write(&mut self, path: &Path, base: &Path) -> std::io::Result<()> {
        self.finished = unix_now();
        fs::write(path, self.render(base)?)
    }
}
