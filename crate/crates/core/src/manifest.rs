//! Run manifests written next to every CLI output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::seed::sha256_hex;
use crate::GENERATOR_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Input path → SHA-256 of its bytes.
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
    /// Unix seconds.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            flags: BTreeMap::new(),
            seeds: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            tool_version: GENERATOR_VERSION.to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    pub fn flag(mut self, name: &str, value: impl ToString) -> Self {
        self.flags.insert(name.to_string(), value.to_string());
        self
    }

    pub fn seed(mut self, stage: &str, seed: u64) -> Self {
        self.seeds.insert(stage.to_string(), seed);
        self
    }

    /// Record the digest of an input file.
    pub fn input(mut self, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let p = path.as_ref();
        let bytes = std::fs::read(p)?;
        self.input_digests.insert(p.display().to_string(), sha256_hex(&bytes));
        Ok(self)
    }

    /// Digest of everything except the timestamp.
    pub fn digest(&self) -> String {
        let mut m = self.clone();
        m.timestamp = 0;
        sha256_hex(serde_json::to_string(&m).expect("plain struct serializes").as_bytes())
    }

    /// `dir/manifest.json` for a directory output, `<file>.manifest.json` otherwise.
    pub fn path_for(output: impl AsRef<Path>) -> PathBuf {
        let out = output.as_ref();
        if out.is_dir() {
            out.join("manifest.json")
        } else {
            let mut s = out.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
    }

    pub fn write_for(&self, output: impl AsRef<Path>) -> std::io::Result<PathBuf> {
        let path = Self::path_for(output);
        let mut text = serde_json::to_string_pretty(self).expect("plain struct serializes");
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_timestamp() {
        let a = RunManifest::new("gen").flag("n", 10).seed("master", 7);
        let mut b = a.clone();
        b.timestamp += 1000;
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), a.clone().flag("n", 11).digest());
    }

    #[test]
    fn placement_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("b.json");
        std::fs::write(&file, "{}").unwrap();
        let m = RunManifest::new("gen").input(&file).unwrap();
        assert_eq!(
            m.input_digests[&file.display().to_string()],
            "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"
        );
        let p = m.write_for(&file).unwrap();
        assert_eq!(p, dir.path().join("b.json.manifest.json"));
        assert_eq!(RunManifest::load(&p).unwrap(), m);
        assert_eq!(m.write_for(dir.path()).unwrap(), dir.path().join("manifest.json"));
    }
}
