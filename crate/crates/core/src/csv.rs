//! CSV output. Numbers use Rust's shortest round-trip formatting (always a
//! `.` decimal separator, never locale dependent); lines end with `\n`.

use std::fmt::Display;
use std::path::Path;

use crate::{Error, Result};

pub const BLER_HEADER: &str = "snr_db,bler,ci_halfwidth,scheme";
pub const MSE_HEADER: &str = "snr_db,mse,ci_halfwidth,scheme";
pub const VARIANCE_HEADER: &str = "sigma_l2,v,stage";
pub const SWEEP_HEADER: &str = "sigma_l2,bler_noisy,bler_perfect";

#[derive(Debug, Clone, PartialEq)]
pub struct BlerRow {
    pub snr_db: f64,
    pub bler: f64,
    pub ci_halfwidth: f64,
    pub scheme: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub snr_db: f64,
    pub mse: f64,
    pub ci_halfwidth: f64,
    pub scheme: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub sigma_l2: f64,
    pub v: f64,
    pub stage: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma_l2: f64,
    /// `NaN` when training at this point aborted.
    pub bler_noisy: f64,
    pub bler_perfect: f64,
}

/// A table with a fixed header.
pub trait CsvRow {
    const HEADER: &'static str;
    fn fields(&self) -> Vec<String>;
}

fn s(v: impl Display) -> String {
    v.to_string()
}

impl CsvRow for BlerRow {
    const HEADER: &'static str = BLER_HEADER;
    fn fields(&self) -> Vec<String> {
        vec![s(self.snr_db), s(self.bler), s(self.ci_halfwidth), self.scheme.clone()]
    }
}

impl CsvRow for MseRow {
    const HEADER: &'static str = MSE_HEADER;
    fn fields(&self) -> Vec<String> {
        vec![s(self.snr_db), s(self.mse), s(self.ci_halfwidth), self.scheme.clone()]
    }
}

impl CsvRow for VarianceRow {
    const HEADER: &'static str = VARIANCE_HEADER;
    fn fields(&self) -> Vec<String> {
        vec![s(self.sigma_l2), s(self.v), self.stage.clone()]
    }
}

impl CsvRow for SweepRow {
    const HEADER: &'static str = SWEEP_HEADER;
    fn fields(&self) -> Vec<String> {
        vec![s(self.sigma_l2), s(self.bler_noisy), s(self.bler_perfect)]
    }
}

/// Renders a header and rows. Fields must not contain commas or newlines.
pub fn render_table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        debug_assert!(r.iter().all(|f| !f.contains([',', '\n'])), "unescaped field in {r:?}");
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn render_csv<R: CsvRow>(rows: &[R]) -> String {
    render_table(R::HEADER, rows.iter().map(CsvRow::fields))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_csv<R: CsvRow>(rows: &[R], path: &Path) -> Result<()> {
    write_text(path, &render_csv(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_and_formatting() {
        let rows = [BlerRow {
            snr_db: -4.0,
            bler: 1.5e-3,
            ci_halfwidth: 2e-5,
            scheme: "qpsk".into(),
        }];
        assert_eq!(render_csv(&rows), "snr_db,bler,ci_halfwidth,scheme\n-4,0.0015,0.00002,qpsk\n");
        let v = [VarianceRow {
            sigma_l2: 0.1,
            v: 3.0,
            stage: "untrained".into(),
        }];
        assert_eq!(render_csv(&v), "sigma_l2,v,stage\n0.1,3,untrained\n");
        let m: [MseRow; 0] = [];
        assert_eq!(render_csv(&m), "snr_db,mse,ci_halfwidth,scheme\n");
        let w = [SweepRow {
            sigma_l2: 1.0,
            bler_noisy: f64::NAN,
            bler_perfect: 0.25,
        }];
        assert_eq!(render_csv(&w), "sigma_l2,bler_noisy,bler_perfect\n1,NaN,0.25\n");
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let rows: [VarianceRow; 0] = [];
        let e = emit_csv(&rows, Path::new("/proc/definitely/not/here.csv")).unwrap_err();
        assert!(matches!(e, Error::Io { .. }), "{e}");
    }
}
