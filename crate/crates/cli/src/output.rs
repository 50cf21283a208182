use std::path::{Path, PathBuf};

use fracvar::io;
use fracvar::Result;
use serde::Serialize;

/// Output directory of one command run. Every file written through it is
/// listed in the summary.
pub struct Output {
    dir: PathBuf,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct Summary<'a, P, R> {
    operation: &'a str,
    parameters: &'a P,
    results: &'a R,
    artifacts: &'a [String],
}

impl Output {
    pub fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path of `name` inside the output directory, recorded as an artifact.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    pub fn table<R, S>(&mut self, name: &str, header: &[&str], rows: R) -> Result<()>
    where
        R: IntoIterator<Item = Vec<S>>,
        S: AsRef<str>,
    {
        let path = self.file(name);
        io::write_table(&path, header, rows)
    }

    /// Writes `summary.json` last so it lists every artifact.
    pub fn finish<P: Serialize, R: Serialize>(
        mut self,
        operation: &str,
        parameters: &P,
        results: &R,
    ) -> Result<PathBuf> {
        self.artifacts.sort();
        let path = self.dir.join("summary.json");
        io::write_json(
            &path,
            &Summary {
                operation,
                parameters,
                results,
                artifacts: &self.artifacts,
            },
        )?;
        Ok(path)
    }
}

pub fn num(v: f64) -> String {
    io::format_value(v)
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
