//! Deterministic result files: `%.17g` CSV with LF endings, JSON, and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// `printf("%.17g", x)`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&e) {
        let m = strip_zeros(mant);
        let sign = if e < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", e.abs())
    } else {
        strip_zeros(&format!("{:.*}", (16 - e) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV field.
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_g17(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub kind: String,
    pub description: String,
}

/// Writes files into one directory and remembers each for the manifest.
#[derive(Debug)]
pub struct OutputSink {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputSink {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputSink {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }

    fn put(&mut self, name: &str, kind: &str, description: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.entries.push(OutputEntry {
            path: name.to_string(),
            kind: kind.to_string(),
            description: description.to_string(),
        });
        Ok(())
    }

    pub fn csv(
        &mut self,
        name: &str,
        description: &str,
        header: &[&str],
        rows: &[Vec<Cell>],
    ) -> Result<()> {
        self.put(
            name,
            "csv",
            description,
            csv_string(header, rows).as_bytes(),
        )
    }

    pub fn json<T: Serialize>(&mut self, name: &str, description: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.put(name, "json", description, s.as_bytes())
    }

    pub fn svg(&mut self, name: &str, description: &str, svg: &str) -> Result<()> {
        self.put(name, "svg", description, svg.as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub category: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub status: String,
    pub exit_code: i32,
    pub wall_time_s: f64,
    pub threads: usize,
    pub config: C,
    pub outputs: Vec<OutputEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf() {
        let cases = [
            (1.0, "1"),
            (0.1, "0.10000000000000001"),
            (-2.5, "-2.5"),
            (1e-5, "1.0000000000000001e-05"),
            (123456.0, "123456"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (0.0001, "0.0001"),
            (std::f64::consts::PI, "3.1415926535897931"),
            (1.0 / 3.0, "0.33333333333333331"),
            (2.5e-300, "2.5e-300"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g17(x), want, "{x}");
        }
    }

    #[test]
    fn csv_layout() {
        let s = csv_string(
            &["a", "b"],
            &[
                vec![Cell::Num(0.5), Cell::Text("x,y".into())],
                vec![Cell::Empty, 3usize.into()],
            ],
        );
        assert_eq!(s, "a,b\n0.5,\"x,y\"\n,3\n");
    }
}
