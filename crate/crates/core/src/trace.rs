//! Per-run diagnostics and their CSV form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CSV_HEADER: &str = "k,comm_units,sim_time,mse,L_beta,M_beta,h_beta,grad_g_sq,nnpca_gap";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub comm_units: u64,
    pub sim_time: f64,
    pub mse: Option<f64>,
    pub l_beta: Option<f64>,
    pub m_beta: Option<f64>,
    pub h_beta: Option<f64>,
    pub grad_g_sq: Option<f64>,
    pub nnpca_gap: Option<f64>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_cell(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("bad CSV number {s:?}")))
}

impl TraceRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.k,
            self.comm_units,
            self.sim_time,
            cell(self.mse),
            cell(self.l_beta),
            cell(self.m_beta),
            cell(self.h_beta),
            cell(self.grad_g_sq),
            cell(self.nnpca_gap)
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Parse(format!(
                "expected 9 CSV fields, found {}",
                f.len()
            )));
        }
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad CSV integer {s:?}")))
        };
        Ok(TraceRow {
            k: int(f[0])? as usize,
            comm_units: int(f[1])?,
            sim_time: parse_cell(f[2])?.unwrap_or(0.0),
            mse: parse_cell(f[3])?,
            l_beta: parse_cell(f[4])?,
            m_beta: parse_cell(f[5])?,
            h_beta: parse_cell(f[6])?,
            grad_g_sq: parse_cell(f[7])?,
            nnpca_gap: parse_cell(f[8])?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MseTol,
    GradTol,
    MaxIters,
    MaxComm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub params: BTreeMap<String, String>,
    pub rows: Vec<TraceRow>,
    pub stop: StopReason,
    /// Walk-based methods only: steps until every agent was visited.
    pub cover_time: Option<usize>,
}

impl RunTrace {
    pub fn last(&self) -> &TraceRow {
        self.rows
            .last()
            .expect("a trace always holds the initial row")
    }

    pub fn iterations(&self) -> usize {
        self.last().k
    }

    pub fn comm_units(&self) -> u64 {
        self.last().comm_units
    }

    pub fn sim_time(&self) -> f64 {
        self.last().sim_time
    }

    /// Final relative error, or the final NN-PCA gap when no optimum is known.
    pub fn final_error(&self) -> Option<f64> {
        let r = self.last();
        r.mse.or(r.nnpca_gap)
    }

    /// First recorded row whose error is at most `tol`.
    pub fn first_below(&self, tol: f64) -> Option<&TraceRow> {
        self.rows
            .iter()
            .find(|r| r.mse.or(r.nnpca_gap).is_some_and(|e| e <= tol))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.to_csv_line());
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected CSV header {other:?}"))),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(TraceRow::from_csv_line)
        .collect()
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            TraceRow {
                k: 0,
                comm_units: 0,
                sim_time: 0.0,
                mse: Some(1.0),
                ..Default::default()
            },
            TraceRow {
                k: 10,
                comm_units: 10,
                sim_time: 9.87654321,
                mse: Some(1.25e-9),
                l_beta: Some(-3.5),
                m_beta: None,
                h_beta: Some(0.1 + 0.2),
                grad_g_sq: Some(4e-300),
                nnpca_gap: None,
            },
        ];
        let t = RunTrace {
            algorithm: "x".into(),
            params: BTreeMap::new(),
            rows: rows.clone(),
            stop: StopReason::MaxIters,
            cover_time: None,
        };
        let csv = t.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(parse_csv(&csv).unwrap(), rows);
        assert!(parse_csv("k,nope\n").is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, b"hello").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "hello");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
