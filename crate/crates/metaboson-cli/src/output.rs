//! In-memory output files, CSV formatting and atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;

pub struct OutFile {
    pub name: String,
    pub description: String,
    pub contents: String,
}

/// CSV with `#` comment lines above a single header row.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(comments: &[String], columns: &[&str]) -> Self {
        let mut text = String::new();
        for c in comments {
            for line in c.lines() {
                writeln!(text, "# {line}").expect("string write");
            }
        }
        writeln!(text, "{}", columns.join(",")).expect("string write");
        Csv { text, columns: columns.len() }
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "CSV row width");
        let quoted: Vec<String> = fields.iter().map(|f| field(f)).collect();
        writeln!(self.text, "{}", quoted.join(",")).expect("string write");
    }

    pub fn finish(self) -> String {
        self.text
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Shortest round-trip representation, so equal values always print equally.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    file: &'a str,
    description: &'a str,
    generator: &'static str,
    cli_version: &'static str,
    library_version: &'static str,
    seed: u64,
    config: &'a RunConfig,
}

pub fn sidecar_name(name: &str) -> String {
    format!("{name}.meta.json")
}

fn sidecar(file: &OutFile, config: &RunConfig) -> String {
    let s = Sidecar {
        file: &file.name,
        description: &file.description,
        generator: "metaboson",
        cli_version: env!("CARGO_PKG_VERSION"),
        library_version: metaboson::VERSION,
        seed: config.seed,
        config,
    };
    let mut text = serde_json::to_string_pretty(&s).expect("sidecar serializes");
    text.push('\n');
    text
}

/// Writes every file and its sidecar into `dir`. All contents go to
/// temporary files first and are renamed into place only once every write
/// succeeded; on failure the temporaries are removed.
pub fn write_all(dir: &Path, files: &[OutFile], config: &RunConfig) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let pid = std::process::id();
    let result = (|| {
        for f in files {
            for (name, body) in [(f.name.clone(), f.contents.clone()), (sidecar_name(&f.name), sidecar(f, config))] {
                let tmp = dir.join(format!(".{name}.tmp-{pid}"));
                let dst = dir.join(&name);
                staged.push((tmp.clone(), dst));
                fs::write(&tmp, body)?;
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    let mut written = Vec::new();
    for (tmp, dst) in &staged {
        fs::rename(tmp, dst)?;
        written.push(dst.clone());
    }
    Ok(written)
}
