//! Plain-text run manifests: config echo, artifact and platform
//! fingerprints, wall-clock time, and per-output checksums. Regenerating a
//! run's outputs from the echoed config on the same platform must reproduce
//! the recorded checksums.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::IoError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub artifact_version: String,
    pub platform: String,
    pub wall_clock_seconds: f64,
    /// Verbatim configuration echo.
    pub config_toml: String,
    /// (file name, sha256 hex) pairs in write order.
    pub checksums: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(config_toml: String) -> Self {
        RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            platform: format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH),
            wall_clock_seconds: 0.0,
            config_toml,
            checksums: Vec::new(),
        }
    }

    pub fn add_file(&mut self, dir: &Path, name: &str) -> Result<(), IoError> {
        let digest = checksum_file(&dir.join(name))?;
        self.checksums.push((name.to_string(), digest));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("artifact = spinflow {}\n", self.artifact_version));
        out.push_str(&format!("platform = {}\n", self.platform));
        out.push_str(&format!("wall_clock_seconds = {:.3}\n", self.wall_clock_seconds));
        out.push_str("\n[config]\n");
        for line in self.config_toml.lines() {
            out.push_str("  ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("\n[checksums]\n");
        for (name, digest) in &self.checksums {
            out.push_str(&format!("{name} = {digest}\n"));
        }
        out
    }

    /// Render without the wall-clock line; equal across reproducing runs.
    pub fn render_deterministic(&self) -> String {
        self.render()
            .lines()
            .filter(|l| !l.starts_with("wall_clock_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.render()).map_err(|e| IoError::file(path, e))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn checksum_file(path: &Path) -> Result<String, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::file(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_answer() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_renders_and_ignores_wall_clock_in_deterministic_form() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "hello\n").unwrap();

        let mut m1 = RunManifest::new("[domain]\ndims = 1\n".into());
        m1.wall_clock_seconds = 1.25;
        m1.add_file(dir.path(), "a.csv").unwrap();

        let mut m2 = m1.clone();
        m2.wall_clock_seconds = 99.0;

        assert_ne!(m1.render(), m2.render());
        assert_eq!(m1.render_deterministic(), m2.render_deterministic());
        assert!(m1.render().contains("a.csv = "));
        assert!(m1.render().contains("  dims = 1"));
    }
}
