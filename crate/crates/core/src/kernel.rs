//! Interface-sampled kernel weights and the discrete convolution
//!
//! ```text
//! c^{j,k}_{i+1/2} = dx * sum_p mu^{j,k}(x_{i+1/2-p}) U^j_{p+1/2}
//! ```
//!
//! where `U_{p+1/2}` is a convex combination of the neighbouring cell values.
//!
//! Interface values are stored on arrays of length `n + 1`: entry `h` is the
//! left edge of cell `h`, so entry `i + 1` holds the `i + 1/2` interface.
//! Cell values outside the grid are zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::KernelSpec;

/// Convex combination used for the interface value `U_{p+1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// `U_p`
    Left,
    /// `U_{p+1}`
    Right,
    /// `(U_p + U_{p+1}) / 2`
    #[default]
    Mean,
}

impl QuadratureRule {
    #[inline]
    pub fn combine(self, left: f64, right: f64) -> f64 {
        match self {
            QuadratureRule::Left => left,
            QuadratureRule::Right => right,
            QuadratureRule::Mean => 0.5 * (left + right),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuadratureRule::Left => "left",
            QuadratureRule::Right => "right",
            QuadratureRule::Mean => "mean",
        }
    }
}

/// Kernel values `mu((q + 1/2) dx)` for the offsets `q` whose sample point
/// lies in the support, with zero weights trimmed from both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    pub dx: f64,
    pub offset_lo: i64,
    pub weights: Vec<f64>,
}

impl KernelWeights {
    pub fn build(spec: &KernelSpec, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::Config(format!("dx must be positive, got {dx}")));
        }
        let (lo, hi) = spec.support();
        let insufficient = || Error::InsufficientResolution { lo, hi, dx };
        let q_lo = (lo / dx - 0.5).ceil() as i64;
        let q_hi = (hi / dx - 0.5).floor() as i64;
        if q_lo > q_hi {
            return Err(insufficient());
        }
        let mut weights: Vec<f64> = (q_lo..=q_hi).map(|q| spec.eval((q as f64 + 0.5) * dx)).collect();
        let first = weights.iter().position(|w| *w != 0.0).ok_or_else(insufficient)?;
        let last = weights.iter().rposition(|w| *w != 0.0).unwrap();
        weights.truncate(last + 1);
        weights.drain(..first);
        Ok(KernelWeights {
            dx,
            offset_lo: q_lo + first as i64,
            weights,
        })
    }

    pub fn offset_hi(&self) -> i64 {
        self.offset_lo + self.weights.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn weight(&self, q: i64) -> f64 {
        let idx = q - self.offset_lo;
        if idx < 0 || idx >= self.weights.len() as i64 {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    /// `dx * sum_q weight[q]`; not renormalized to one.
    pub fn discrete_mass(&self) -> f64 {
        self.dx * self.weights.iter().sum::<f64>()
    }
}

/// Interface values `rule(U_{h-1}, U_h)` for `h = 0..=n`.
pub fn interface_values(field: &[f64], rule: QuadratureRule) -> Vec<f64> {
    let n = field.len();
    (0..=n)
        .map(|h| {
            let left = if h == 0 { 0.0 } else { field[h - 1] };
            let right = if h == n { 0.0 } else { field[h] };
            rule.combine(left, right)
        })
        .collect()
}

/// Discrete convolution of one component, sampled at the `n + 1` interfaces.
pub fn convolve(field: &[f64], weights: &KernelWeights, rule: QuadratureRule) -> Vec<f64> {
    let upp = interface_values(field, rule);
    convolve_interface_values(&upp, weights)
}

fn convolve_interface_values(upp: &[f64], weights: &KernelWeights) -> Vec<f64> {
    let m = upp.len() as i64;
    let q_lo = weights.offset_lo;
    let q_hi = weights.offset_hi();
    (0..m)
        .map(|h| {
            // source index s = h - q must lie in [0, m)
            let lo = q_lo.max(h - m + 1);
            let hi = q_hi.min(h);
            let mut acc = 0.0;
            for q in lo..=hi {
                acc += weights.weights[(q - q_lo) as usize] * upp[(h - q) as usize];
            }
            weights.dx * acc
        })
        .collect()
}

/// Kernel weights for every entry of an `N x N` kernel matrix, with equal
/// kernels sharing one weight table.
#[derive(Debug, Clone)]
pub struct KernelBank {
    pub groups: Vec<KernelWeights>,
    /// `index[j][k]` is the group of `mu^{j,k}`.
    pub index: Vec<Vec<usize>>,
    /// `max_{j,k} ||mu^{j,k}'||_inf` and `||mu^{j,k}''||_inf`.
    pub derivative_norms: (f64, f64),
}

impl KernelBank {
    pub fn build(matrix: &[Vec<KernelSpec>], dx: f64) -> Result<Self> {
        let mut specs: Vec<&KernelSpec> = Vec::new();
        let mut groups = Vec::new();
        let mut index = Vec::with_capacity(matrix.len());
        let mut d1 = 0.0f64;
        let mut d2 = 0.0f64;
        for row in matrix {
            let mut idx_row = Vec::with_capacity(row.len());
            for spec in row {
                let g = match specs.iter().position(|s| *s == spec) {
                    Some(g) => g,
                    None => {
                        groups.push(KernelWeights::build(spec, dx)?);
                        let (a, b) = spec.derivative_sup_norms();
                        d1 = d1.max(a);
                        d2 = d2.max(b);
                        specs.push(spec);
                        specs.len() - 1
                    }
                };
                idx_row.push(g);
            }
            index.push(idx_row);
        }
        Ok(KernelBank {
            groups,
            index,
            derivative_norms: (d1, d2),
        })
    }

    pub fn n_components(&self) -> usize {
        self.index.len()
    }

    /// Widest extent of any kernel footprint, in cells.
    pub fn max_footprint(&self) -> usize {
        self.groups
            .iter()
            .map(|w| (w.offset_hi().abs().max(w.offset_lo.abs()) + 1) as usize)
            .max()
            .unwrap_or(0)
    }

    /// Largest deviation of a discrete kernel mass from one.
    pub fn mass_deviation(&self) -> f64 {
        self.groups
            .iter()
            .map(|w| (w.discrete_mass() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// The rows `c^{k}_{h} = (c^{1,k}_h, ..., c^{N,k}_h)` at every interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionField {
    n_components: usize,
    n_interfaces: usize,
    /// `rows[k][h * N + j]`
    rows: Vec<Vec<f64>>,
}

impl ConvolutionField {
    pub fn zeros(n_components: usize, n_interfaces: usize) -> Self {
        ConvolutionField {
            n_components,
            n_interfaces,
            rows: vec![vec![0.0; n_components * n_interfaces]; n_components],
        }
    }

    /// Builds a field from `values[k][h][j]`.
    pub fn from_rows(values: &[Vec<Vec<f64>>]) -> Self {
        let n = values.len();
        let m = values.first().map_or(0, |v| v.len());
        let rows = values
            .iter()
            .map(|per_k| per_k.iter().flat_map(|r| r.iter().copied()).collect())
            .collect();
        ConvolutionField {
            n_components: n,
            n_interfaces: m,
            rows,
        }
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn n_interfaces(&self) -> usize {
        self.n_interfaces
    }

    /// The vector `c^k_h`.
    #[inline]
    pub fn row(&self, k: usize, h: usize) -> &[f64] {
        let n = self.n_components;
        &self.rows[k][h * n..(h + 1) * n]
    }

    #[inline]
    pub fn get(&self, k: usize, h: usize, j: usize) -> f64 {
        self.rows[k][h * self.n_components + j]
    }

    fn set_column(&mut self, k: usize, j: usize, values: &[f64]) {
        let n = self.n_components;
        for (h, v) in values.iter().enumerate() {
            self.rows[k][h * n + j] = *v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|v| v.is_finite()))
    }

    /// `max_{k,h} ||c^k_h||_1`
    pub fn max_row_norm(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.chunks(self.n_components.max(1)))
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Assembles `c[k][h][j] = convolve(U^j, mu^{j,k})` for all `k`.
pub fn convolution_matrix(fields: &[Vec<f64>], bank: &KernelBank, rule: QuadratureRule) -> Result<ConvolutionField> {
    let n = bank.n_components();
    if fields.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: fields.len(),
        });
    }
    let cells = fields.first().map_or(0, |f| f.len());
    if let Some(bad) = fields.iter().find(|f| f.len() != cells) {
        return Err(Error::DimensionMismatch {
            expected: cells,
            found: bad.len(),
        });
    }
    let mut out = ConvolutionField::zeros(n, cells + 1);
    for (j, field) in fields.iter().enumerate() {
        let upp = interface_values(field, rule);
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; bank.groups.len()];
        for k in 0..n {
            let g = bank.index[j][k];
            let values = cache[g].get_or_insert_with(|| convolve_interface_values(&upp, &bank.groups[g]));
            out.set_column(k, j, values);
        }
    }
    Ok(out)
}

/// `max_{k,h} ||c^k_{h} - c^k_{h-1}||_1 - K1 dx`; nonpositive when the
/// first-difference bound holds.
pub fn first_difference_bound_check(conv: &ConvolutionField, k1: f64, dx: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..conv.n_components() {
        for h in 1..conv.n_interfaces() {
            let d: f64 = conv
                .row(k, h)
                .iter()
                .zip(conv.row(k, h - 1))
                .map(|(a, b)| (a - b).abs())
                .sum();
            worst = worst.max(d);
        }
    }
    worst.max(0.0) - k1 * dx
}

/// `max_{k,h} ||c^k_{h+1} - 2 c^k_h + c^k_{h-1}||_1 - K2 dx^2`.
pub fn second_difference_bound_check(conv: &ConvolutionField, k2: f64, dx: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..conv.n_components() {
        for h in 1..conv.n_interfaces().saturating_sub(1) {
            let (l, c, r) = (conv.row(k, h - 1), conv.row(k, h), conv.row(k, h + 1));
            let d: f64 = (0..conv.n_components()).map(|j| (r[j] - 2.0 * c[j] + l[j]).abs()).sum();
            worst = worst.max(d);
        }
    }
    worst.max(0.0) - k2 * dx * dx
}

/// Slack allowed on the convolution difference bounds.
pub fn difference_bound_tolerance(k: f64, dx: f64) -> f64 {
    1e-10 * (1.0 + k * dx)
}
