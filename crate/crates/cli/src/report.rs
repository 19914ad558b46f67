//! Deterministic report emission: JSON envelope, CSV tables and SVG tick plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use extlab::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Twelve significant digits, the fixed text form used in every CSV cell.
pub fn fmt(x: f64) -> String {
    format!("{x:.11e}")
}

/// `x` rounded to twelve significant digits, for JSON numbers.
pub fn round(x: f64) -> Value {
    if !x.is_finite() {
        return Value::String(format!("{x}"));
    }
    let r: f64 = fmt(x).parse().expect("formatted float parses");
    json!(r)
}

pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone)]
pub struct Csv {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = line.iter().map(|c| escape(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Everything one command produces.
#[derive(Debug)]
pub struct Report {
    pub command: String,
    pub body: Map<String, Value>,
    pub tables: Vec<Csv>,
    pub svg: Option<(String, String)>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), body: Map::new(), tables: Vec::new(), svg: None }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.body.insert(key.to_string(), value);
    }

    pub fn to_json(&self, hash: &str, seed: u64, tolerance: Option<f64>) -> String {
        let mut v = Map::new();
        v.insert("tool".into(), json!("extlab"));
        v.insert("version".into(), json!(VERSION));
        v.insert("command".into(), json!(self.command));
        v.insert("config_hash".into(), json!(hash));
        v.insert("seed".into(), json!(seed));
        v.insert("tolerance".into(), tolerance.map_or(Value::Null, round));
        v.insert("tables".into(), json!(self.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>()));
        for (k, val) in &self.body {
            v.insert(k.clone(), val.clone());
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(v)).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.json`, the CSV tables and the plot into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path, json: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Validation(format!("cannot create {}: {e}", dir.display())))?;
        let mut files = vec![(dir.join("report.json"), json.to_string())];
        for t in &self.tables {
            files.push((dir.join(format!("{}.csv", t.name)), t.render()));
        }
        if let Some((name, svg)) = &self.svg {
            files.push((dir.join(name), svg.clone()));
        }
        let mut written = Vec::new();
        for (path, content) in files {
            std::fs::write(&path, content)
                .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Eigenvalue ticks for up to four spectra, one row each.
pub fn spectrum_svg(window: (f64, f64), rows: &[(String, Vec<(f64, usize)>)]) -> String {
    const W: f64 = 800.0;
    const LEFT: f64 = 110.0;
    const RIGHT: f64 = 20.0;
    const ROW: f64 = 50.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let h = 40.0 + ROW * rows.len() as f64 + 30.0;
    let span = (window.1 - window.0).max(f64::MIN_POSITIVE);
    let x = |v: f64| LEFT + (v - window.0) / span * (W - LEFT - RIGHT);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{h}" viewBox="0 0 {W} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="13" text-anchor="middle">eigenvalues in [{}, {}]</text>"#,
        W / 2.0,
        fmt(window.0),
        fmt(window.1)
    );
    for (i, (label, ticks)) in rows.iter().enumerate() {
        let y = 40.0 + ROW * i as f64 + ROW / 2.0;
        let color = colors[i % colors.len()];
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            LEFT - 10.0,
            y + 4.0,
            xml_escape(label)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999" stroke-width="1"/>"##,
            W - RIGHT
        );
        for &(v, mult) in ticks {
            let half = 8.0 * mult as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}" stroke-width="2"/>"#,
                x(v),
                y - half,
                y + half
            );
        }
    }
    let base = 40.0 + ROW * rows.len() as f64 + 15.0;
    for v in [window.0, 0.5 * (window.0 + window.1), window.1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{base:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{v:.3}</text>"#,
            x(v)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
