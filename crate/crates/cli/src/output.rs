//! Output directory bookkeeping. Every file goes through [`Output`] so the
//! manifest lists all of them.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn register(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    /// CSV writer with the given header row.
    pub fn csv(&mut self, name: &str, header: &[String]) -> Result<csv::Writer<File>> {
        let path = self.register(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        Ok(w)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.register(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(f), value)?;
        Ok(())
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.register(name);
        std::fs::write(&path, data).with_context(|| format!("writing {}", path.display()))
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

/// Header helper: fixed names followed by `prefix0 .. prefix{k-1}`.
pub fn header(fixed: &[&str], prefix: &str, k: usize) -> Vec<String> {
    fixed
        .iter()
        .map(|s| s.to_string())
        .chain((0..k).map(|i| format!("{prefix}{i}")))
        .collect()
}

/// Shortest round-trip decimal form, so reruns give identical bytes.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub threads: usize,
    pub config: &'a toml::Table,
    pub outputs: Vec<String>,
}
