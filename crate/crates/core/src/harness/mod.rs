//! Seeded Monte-Carlo experiments and their CSV output.
//!
//! Every random choice is keyed by the master seed and the (structure,
//! trial, algorithm) indices, and rows are collected in index order, so a
//! configuration always produces the same bytes regardless of thread count.

mod config;
mod experiments;
mod formulas;

pub use config::{
    DecoderKind, DesignKind, ExperimentConfig, InfectionSpec, LemmaSpec, RateSpec, StructureSpec,
    TraditionalSpec,
};
pub use experiments::{
    adaptive_table, g1g2_for_budget, nonadaptive_summary, nonadaptive_summary_table, nonadaptive_table,
    run_adaptive_experiment, run_formula_validation, run_nonadaptive_experiment, validation_table,
    AdaptiveRow, NonadaptiveRow, SummaryRow, ValidationRow,
};
pub use formulas::{AnalysisSpec, FormulaCall, Sweep};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex SHA-256, as written into the CSV comment line.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Header plus string cells, ready for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// CSV text preceded by a `#` comment line carrying the experiment name
    /// and configuration hash.
    pub fn to_csv(&self, experiment: &str, config_hash: &str) -> Result<String> {
        let mut out = format!("# experiment={experiment} config_sha256={config_hash}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
            w.write_record(&self.header).map_err(io)?;
            for r in &self.rows {
                w.write_record(r).map_err(io)?;
            }
            w.flush().map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        }
        String::from_utf8(out).map_err(|e| Error::InvalidParameter(format!("csv: {e}")))
    }
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub(crate) fn fmt_opt<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}
