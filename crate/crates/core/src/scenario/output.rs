use std::fs;
use std::io::Write;
use std::path::Path;

use super::ScenarioError;

/// 17 significant digits, so every `f64` round-trips exactly.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        // Normalizes -0.0 as well.
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

/// Writes `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ScenarioError> {
    let io = |e: std::io::Error| ScenarioError::Io { path: path.display().to_string(), source: e };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(tmp, path).map_err(io)
}

/// A column-oriented table with optional cells.
#[derive(Debug, Clone, Default)]
pub(crate) struct Table {
    headers: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn push(&mut self, header: impl Into<String>, values: Vec<Option<f64>>) {
        debug_assert!(self.columns.first().is_none_or(|c| c.len() == values.len()));
        self.headers.push(header.into());
        self.columns.push(values);
    }

    pub fn push_full(&mut self, header: impl Into<String>, values: Vec<f64>) {
        self.push(header, values.into_iter().map(Some).collect());
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| c[r].map(format_number).unwrap_or_default()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}
