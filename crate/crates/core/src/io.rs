//! CSV snapshots, diagnostics and convergence tables, plus the TOML metadata
//! sidecar. Integers are written plainly and other numbers in shortest
//! round-trip exponent form, so parsing a file and writing it again
//! reproduces it byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::ConvergenceTable;
use crate::error::{Error, Result};
use crate::grid::{Grid1d, Grid2d};
use crate::monitor::StepDiagnostics;
use crate::solver1d::SystemState;
use crate::solver2d::State2d;

/// A parsed CSV file: header and numeric rows. Empty cells read as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

impl Table {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.map(number).unwrap_or_default()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|s| {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse::<f64>()
                            .map(Some)
                            .map_err(|e| Error::Config(format!("{}: bad number `{s}`: {e}", path.display())))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Table { header, rows })
    }
}

fn component_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}{k}"))
}

/// `x,u1,...,uN` at the cell centres.
pub fn snapshot_table_1d(grid: &Grid1d, state: &SystemState) -> Table {
    let n = state.n_components();
    let header = std::iter::once("x".to_string())
        .chain(component_columns("u", n))
        .collect();
    let rows = (0..grid.n_cells)
        .map(|i| {
            std::iter::once(Some(grid.center(i)))
                .chain(state.u.iter().map(|c| Some(c[i])))
                .collect()
        })
        .collect();
    Table { header, rows }
}

/// `x,y,u1,...,uN`, x varying fastest.
pub fn snapshot_table_2d(grid: &Grid2d, state: &State2d) -> Table {
    let n = state.n_components();
    let header = ["x", "y"]
        .into_iter()
        .map(str::to_string)
        .chain(component_columns("u", n))
        .collect();
    let mut rows = Vec::with_capacity(grid.n_cells());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = j * grid.nx + i;
            rows.push(
                [grid.center_x(i), grid.center_y(j)]
                    .into_iter()
                    .map(Some)
                    .chain(state.u.iter().map(|c| Some(c[idx])))
                    .collect(),
            );
        }
    }
    Table { header, rows }
}

/// One row per recorded step. Optional quantities are left empty when not
/// evaluated.
pub fn diagnostics_table(series: &[StepDiagnostics]) -> Table {
    let n = series.first().map_or(0, |d| d.l1_norm.len());
    let header = ["step", "t", "dt", "min_u"]
        .into_iter()
        .map(str::to_string)
        .chain(component_columns("l1_u", n))
        .chain(component_columns("linf_ubar", n))
        .chain(component_columns("tv_ubar", n))
        .chain(["entropy_residual", "conv_first_excess", "conv_second_excess"].map(str::to_string))
        .collect();
    let rows = series
        .iter()
        .map(|d| {
            let mut row = vec![Some(d.step as f64), Some(d.t), Some(d.dt), Some(d.min_value)];
            row.extend(d.l1_norm.iter().map(|v| Some(*v)));
            row.extend(d.linf_ubar.iter().map(|v| Some(*v)));
            row.extend(d.tv_ubar.iter().map(|v| Some(*v)));
            row.push(d.entropy_violation_max);
            row.push(d.convolution_bounds.map(|c| c.first));
            row.push(d.convolution_bounds.map(|c| c.second));
            row
        })
        .collect();
    Table { header, rows }
}

/// `dx,e,alpha` with the rate rounded to two decimals.
pub fn write_convergence_csv(table: &ConvergenceTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dx", "e", "alpha"])?;
    for row in &table.rows {
        let alpha = row.rate.map(|a| format!("{a:.2}")).unwrap_or_default();
        w.write_record([number(row.dx), number(row.error), alpha])?;
    }
    w.flush()?;
    Ok(())
}

/// Two whitespace-separated columns `dx e`, for log-log plotting.
pub fn write_convergence_dat(table: &ConvergenceTable, path: &Path) -> Result<()> {
    let mut text = String::from("# dx e\n");
    for row in &table.rows {
        text.push_str(&format!("{} {}\n", number(row.dx), number(row.error)));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Run description written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: String,
    pub dimension: usize,
    pub dx: f64,
    pub lambda: f64,
    pub theta: f64,
    pub flux: String,
    pub quadrature: String,
    pub t_final: f64,
    pub cells: Vec<usize>,
    pub snapshot_times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunMetadata {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// File name of the snapshot taken at `t`.
pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t}.csv")
}
