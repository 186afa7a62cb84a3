//! CSV files and console tables.
//!
//! Every CSV starts with a header row. MSD columns carry a `_db` marker
//! unless `--linear` is given, in which case the marker is dropped and the
//! values are linear. Missing values are empty fields.
//!
//! | file | columns |
//! |------|---------|
//! | `trace_<label>.csv` | iteration, msd_db_sim, msd_db_theory, energy_cum |
//! | `summary.csv` | strategy, steady_msd_db, steady_msd_db_theory, convergence_rate, iterations_to_90, energy_to_90, energy_per_iter |
//! | `tradeoff.csv` | budget, steady_msd_db, convergence_rate, objective, broadcasts, energy_per_iter |
//! | `theory_<label>.csv` | iteration, msd_db_theory |
//! | `theory_summary.csv` | strategy, steady_msd_db, bound_bar_db, bound_a_db, bound_b_db, alpha, beta |
//! | `compare.csv` | budget, exact_objective, algorithm1_objective, lp_bound, diagonal_objective, algorithm1_gap, exact_nodes, exact_energy, algorithm1_energy |
//!
//! Convergence rates are in dB per iteration in both modes.

use std::fs::File;
use std::path::Path;

use mhdiff_core::trace::to_db;

use crate::Failure;

#[derive(Debug, Clone, Copy)]
pub struct Scale {
    pub linear: bool,
}

impl Scale {
    /// Column name with the dB marker inserted after `stem`.
    pub fn column(&self, stem: &str, suffix: &str) -> String {
        let db = if self.linear { "" } else { "_db" };
        format!("{stem}{db}{suffix}")
    }

    pub fn value(&self, x: f64) -> f64 {
        if self.linear {
            x
        } else {
            to_db(x)
        }
    }

    pub fn field(&self, x: Option<f64>) -> String {
        field(x.map(|v| self.value(v)))
    }
}

pub fn field(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub struct Table {
    writer: csv::Writer<File>,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[String]) -> Result<Self, Failure> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Table { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), Failure> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.writer.flush()?;
        Ok(())
    }
}

/// File-name-safe form of a strategy label.
pub fn slug(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Prints rows as aligned columns.
pub fn print_table(header: &[&str], rows: &[Vec<String>]) {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, f) in width.iter_mut().zip(r) {
            *w = (*w).max(f.len());
        }
    }
    let line = |fields: Vec<&str>| {
        let cells: Vec<String> = fields.iter().zip(&width).map(|(f, w)| format!("{f:>w$}")).collect();
        println!("{}", cells.join("  "));
    };
    line(header.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
}

/// Short display form for console tables.
pub fn short(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.4}"),
        Some(v) => v.to_string(),
        None => "-".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_names_follow_scale() {
        let db = Scale { linear: false };
        let lin = Scale { linear: true };
        assert_eq!(db.column("msd", "_sim"), "msd_db_sim");
        assert_eq!(lin.column("msd", "_sim"), "msd_sim");
        assert_eq!(db.field(Some(0.01)), "-20");
        assert_eq!(lin.field(None), "");
    }

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(slug("mATC h=2/fast"), "mATC_h_2_fast");
    }
}
