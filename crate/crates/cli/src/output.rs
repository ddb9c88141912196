//! Output files. Every file carries the tool version and the config digest, and nothing
//! time- or path-dependent, so equal configs give byte-identical files.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::params::{Format, Params};

pub const TOOL: &str = concat!("decdim ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of the command, its resolved parameters and the contents of the input files.
/// The output directory and config path are excluded.
pub fn config_digest(command: &str, params: &Params) -> anyhow::Result<String> {
    let file_hash = |p: &Option<std::path::PathBuf>| -> anyhow::Result<Option<String>> {
        p.as_ref()
            .map(|p| std::fs::read(p).map(|b| sha256_hex(&b)).with_context(|| format!("reading {}", p.display())))
            .transpose()
    };
    let doc = json!({
        "command": command,
        "params": params,
        "class_sha256": file_hash(&params.class)?,
        "input_sha256": file_hash(&params.input)?,
    });
    Ok(sha256_hex(serde_json::to_string(&doc)?.as_bytes()))
}

/// A command's result: a JSON document and a CSV table, plus optional extra CSV files.
pub struct Output {
    pub stem: String,
    pub json: Value,
    pub csv_header: String,
    pub csv_rows: Vec<String>,
    pub extra_csv: Vec<(String, String)>,
}

impl Output {
    pub fn new(stem: &str, json: impl Serialize, csv_header: &str) -> anyhow::Result<Self> {
        Ok(Self {
            stem: stem.into(),
            json: serde_json::to_value(json)?,
            csv_header: csv_header.into(),
            csv_rows: Vec::new(),
            extra_csv: Vec::new(),
        })
    }
}

fn csv_preamble(digest: &str) -> String {
    format!("# {TOOL} config={digest}\n")
}

/// Writes to `--out` (created if missing) or to standard output.
pub fn emit(out: &Output, params: &Params, command: &str, digest: &str) -> anyhow::Result<()> {
    let body = match params.format() {
        Format::Json => {
            let doc = json!({ "tool": TOOL, "command": command, "config_digest": digest, "result": out.json });
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = csv_preamble(digest);
            s.push_str(&out.csv_header);
            s.push('\n');
            for r in &out.csv_rows {
                s.push_str(r);
                s.push('\n');
            }
            s
        }
    };
    let ext = match params.format() {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    match &params.out {
        None => print!("{body}"),
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write(&dir.join(format!("{}.{ext}", out.stem)), &body)?;
            for (name, content) in &out.extra_csv {
                write(&dir.join(name), &format!("{}{content}", csv_preamble(digest)))?;
            }
        }
    }
    Ok(())
}

fn write(path: &Path, body: &str) -> anyhow::Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// Shortest round-trip form; empty for missing values.
pub fn fmt_num(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}
