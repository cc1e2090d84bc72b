//! Artifact emission: output directory, manifest and content-hash cache.

use bcaplab::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    /// Printed on stdout.
    pub summary: Value,
}

impl Artifacts {
    pub fn json(&mut self, name: &str, schema: &str, body: impl Serialize) {
        let mut v = serde_json::to_value(body).unwrap();
        if let Value::Object(m) = &mut v {
            m.insert("schema".into(), json!(schema));
        }
        let mut text = serde_json::to_string_pretty(&v).unwrap();
        text.push('\n');
        self.files.push((name.into(), text.into_bytes()));
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        self.files.push((name.into(), s.into_bytes()));
    }

    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }
}

pub fn coords(v: &[i32]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn io(e: std::io::Error, p: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
}

pub struct Run<'a> {
    pub subcommand: &'a str,
    pub config: Value,
    pub sources: &'a [u8],
    pub out: PathBuf,
    pub cache_dir: PathBuf,
    pub use_cache: bool,
    pub threads: usize,
}

impl Run<'_> {
    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        h.update(VERSION.as_bytes());
        h.update(self.subcommand.as_bytes());
        h.update(serde_json::to_vec(&self.config).unwrap());
        h.update(self.sources);
        hex::encode(h.finalize())
    }

    /// Artifacts of an identical earlier run, if cached.
    pub fn cached(&self) -> Option<Artifacts> {
        if !self.use_cache {
            return None;
        }
        let dir = self.cache_dir.join(self.key());
        let index: Vec<String> = serde_json::from_slice(&std::fs::read(dir.join("index.json")).ok()?).ok()?;
        let mut a = Artifacts::default();
        for name in index {
            a.raw(&name, std::fs::read(dir.join(&name)).ok()?);
        }
        a.summary = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).ok()?).ok()?;
        Some(a)
    }

    fn store(&self, a: &Artifacts) -> Result<()> {
        let dir = self.cache_dir.join(self.key());
        std::fs::create_dir_all(&dir).map_err(|e| io(e, &dir))?;
        for (name, bytes) in &a.files {
            std::fs::write(dir.join(name), bytes).map_err(|e| io(e, &dir))?;
        }
        let names: Vec<&String> = a.files.iter().map(|(n, _)| n).collect();
        std::fs::write(dir.join("summary.json"), serde_json::to_vec(&a.summary).unwrap()).map_err(|e| io(e, &dir))?;
        std::fs::write(dir.join("index.json"), serde_json::to_vec(&names).unwrap()).map_err(|e| io(e, &dir))
    }

    /// Writes the artifacts and the manifest; `runtime` is the only part that may differ between reruns.
    pub fn emit(&self, a: &Artifacts, cache_hit: bool) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| io(e, &self.out))?;
        let mut listed = Vec::new();
        for (name, bytes) in &a.files {
            let p = self.out.join(name);
            std::fs::write(&p, bytes).map_err(|e| io(e, &p))?;
            listed.push(json!({ "name": name, "sha256": hex::encode(Sha256::digest(bytes)) }));
        }
        if self.use_cache && !cache_hit {
            self.store(a)?;
        }
        let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let manifest = json!({
            "schema": "bcaplab.manifest/1",
            "subcommand": self.subcommand,
            "versions": { "bcaplab": VERSION, "bcaplab-cli": VERSION },
            "config": self.config,
            "cache": { "key": self.key(), "hit": cache_hit, "enabled": self.use_cache },
            "artifacts": listed,
            "runtime": { "timestamp_unix": stamp, "threads": self.threads },
        });
        let p = self.out.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).unwrap();
        text.push('\n');
        std::fs::write(&p, text).map_err(|e| io(e, &p))
    }
}
