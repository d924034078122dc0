//! CSV emission. Numbers are written with 12 significant digits in
//! scientific notation so identical inputs give identical bytes.
//!
//! Schemas:
//! - sweep: `param_value,framework,mean_ee,ci95,infeasible_frac,trials`
//! - convergence: `M,iteration,mean_ee,ci95`
//! - trace: `iteration,ee,phi,eta,rho_i,rho_j,rate_i,rate_j,feasible`

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::altopt::EETrace;
use crate::error::{Error, Result};
use crate::experiments::{ConvergenceTable, SweepResult};

/// 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

/// Anything that renders as a header plus string rows.
pub trait CsvTable {
    fn header(&self) -> Vec<&'static str>;
    fn records(&self) -> Result<Vec<Vec<String>>>;
}

impl CsvTable for SweepResult {
    fn header(&self) -> Vec<&'static str> {
        vec!["param_value", "framework", "mean_ee", "ci95", "infeasible_frac", "trials"]
    }

    fn records(&self) -> Result<Vec<Vec<String>>> {
        Ok(self
            .rows()?
            .into_iter()
            .map(|r| {
                vec![
                    fmt_num(r.param_value),
                    r.framework.name().to_string(),
                    fmt_num(r.stats.mean),
                    fmt_num(r.stats.ci95),
                    fmt_num(r.stats.infeasible_frac),
                    r.stats.trials.to_string(),
                ]
            })
            .collect())
    }
}

impl CsvTable for ConvergenceTable {
    fn header(&self) -> Vec<&'static str> {
        vec!["M", "iteration", "mean_ee", "ci95"]
    }

    fn records(&self) -> Result<Vec<Vec<String>>> {
        Ok(self
            .rows
            .iter()
            .map(|r| vec![r.elements.to_string(), r.iteration.to_string(), fmt_num(r.mean_ee), fmt_num(r.ci95)])
            .collect())
    }
}

impl CsvTable for EETrace {
    fn header(&self) -> Vec<&'static str> {
        vec!["iteration", "ee", "phi", "eta", "rho_i", "rho_j", "rate_i", "rate_j", "feasible"]
    }

    fn records(&self) -> Result<Vec<Vec<String>>> {
        Ok(self
            .records
            .iter()
            .map(|r| {
                vec![
                    r.iteration.to_string(),
                    fmt_num(r.ee),
                    fmt_num(r.phi),
                    fmt_num(r.eta),
                    fmt_num(r.rho_i),
                    fmt_num(r.rho_j),
                    fmt_num(r.rate_i),
                    fmt_num(r.rate_j),
                    r.feasible.to_string(),
                ]
            })
            .collect())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Renders `table` to CSV bytes.
pub fn to_csv_bytes<T: CsvTable + ?Sized>(table: &T) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let conv = |e: csv::Error| Error::Domain(format!("csv encoding: {e}"));
    w.write_record(table.header()).map_err(conv)?;
    for rec in table.records()? {
        w.write_record(&rec).map_err(conv)?;
    }
    w.into_inner().map_err(|e| Error::Domain(format!("csv encoding: {e}")))
}

/// Writes `table` to `path`, replacing any existing file.
pub fn emit_csv<T: CsvTable + ?Sized>(table: &T, path: &Path) -> Result<()> {
    let bytes = to_csv_bytes(table)?;
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(&bytes).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}
