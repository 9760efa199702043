//! Per-step diagnostics and runtime checks of the stability estimates.

use crate::error::{Error, MonitorItem, Result};
use crate::model::ModelSpec;

/// Allowed undershoot below zero.
pub const POSITIVITY_TOLERANCE: f64 = 1e-14;
/// Allowed relative drift of each component's mass.
pub const CONSERVATION_TOLERANCE: f64 = 1e-11;
/// Multiplicative slack on the exponential growth bounds.
pub const GROWTH_SLACK: f64 = 1e-9;
/// Allowed entropy residual.
pub const ENTROPY_TOLERANCE: f64 = 1e-12;

/// Outcome of the convolution difference bounds for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceBoundCheck {
    pub k1: f64,
    pub k2: f64,
    /// Excess of the largest first difference over `K1 dx`.
    pub first: f64,
    /// Excess of the largest second difference over `K2 dx^2`.
    pub second: f64,
    pub first_tolerance: f64,
    pub second_tolerance: f64,
}

impl DifferenceBoundCheck {
    pub fn passes(&self) -> bool {
        self.first <= self.first_tolerance && self.second <= self.second_tolerance
    }
}

/// Quantities recorded after each step (and once for the initial state).
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// Length of the step that produced this state (0 for the initial state).
    pub dt: f64,
    pub min_value: f64,
    pub l1_norm: Vec<f64>,
    pub linf_ubar: Vec<f64>,
    pub tv_ubar: Vec<f64>,
    pub l1_ubar: Vec<f64>,
    /// `dx * sum_i |U^{n+1}_i - U^n_i|` per component.
    pub time_variation: Vec<f64>,
    pub entropy_violation_max: Option<f64>,
    /// Difference bounds evaluated on the convolution of the previous state.
    pub convolution_bounds: Option<DifferenceBoundCheck>,
    /// Largest deviation of a discrete kernel mass from one.
    pub mass_deviation: f64,
    /// Largest `l1` norm of a convolution row used in the step.
    pub conv_max: f64,
}

/// Constants of the stability estimates for one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticBounds {
    pub k1: f64,
    pub k2: f64,
    /// `L-infinity` growth rate.
    pub k3: f64,
    /// BV growth rate.
    pub k4: f64,
    /// BV inhomogeneity.
    pub k5: f64,
    /// Largest observed `time_variation / dt`.
    pub k6: f64,
}

fn series_max(series: &[StepDiagnostics], pick: impl Fn(&StepDiagnostics) -> f64) -> f64 {
    series.iter().map(pick).fold(0.0, f64::max)
}

impl DiagnosticBounds {
    /// Constants for a one-dimensional run, with `derivative_norms` the sup
    /// norms of the first and second kernel derivatives.
    pub fn one_d(model: &ModelSpec, derivative_norms: (f64, f64), series: &[StepDiagnostics]) -> Self {
        let l1 = series_max(series, |d| d.l1_norm.iter().sum());
        let (d1, d2) = derivative_norms;
        let k1 = d1 * l1;
        let k2 = 2.0 * d2 * l1;
        let mut k3 = 0.0f64;
        let mut k5 = 0.0f64;
        for (k, c) in model.components.iter().enumerate() {
            let lip_f = c.flux.lipschitz();
            let vb = c.velocity_bounds;
            let s = c.sigma.sigma_sup();
            k3 = k3.max(k1 * s * lip_f * vb.lip);
            let ubar_inf = series_max(series, |d| d.linf_ubar[k]);
            let ubar_l1 = series_max(series, |d| d.l1_ubar[k]);
            let inhomogeneity = k1 * c.sigma.bv_seminorm() * lip_f * vb.lip * ubar_inf
                + lip_f * s * (vb.lip * k2 + 2.0 * vb.lip_grad * k1 * k1) * ubar_l1;
            k5 = k5.max(inhomogeneity);
        }
        DiagnosticBounds {
            k1,
            k2,
            k3,
            k4: k3,
            k5,
            k6: time_lipschitz(series),
        }
    }
}

/// Largest observed ratio `dx sum_i |U^{n+1}_i - U^n_i| / dt` over steps and components.
pub fn time_lipschitz(series: &[StepDiagnostics]) -> f64 {
    series
        .iter()
        .filter(|d| d.dt > 0.0)
        .flat_map(|d| d.time_variation.iter().map(move |v| v / d.dt))
        .fold(0.0, f64::max)
}

/// `exp(rate t) * base * (1 + slack)`, treating overflow as an unbounded allowance.
fn growth_bound(rate: f64, t: f64, base: f64) -> f64 {
    let e = (rate * t).exp();
    if !e.is_finite() {
        return f64::INFINITY;
    }
    e * base * (1.0 + GROWTH_SLACK)
}

/// Worst observed quantity per stability item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorReport {
    pub bounds: DiagnosticBounds,
    pub min_value: f64,
    /// Largest relative mass drift of any component.
    pub l1_drift: f64,
    /// Largest ratio of `||Ubar||_inf` to its bound (`<= 1` when item 3 holds).
    pub linf_ratio: f64,
    /// Largest ratio of `TV(Ubar)` to its bound, if checked.
    pub tv_ratio: Option<f64>,
}

fn violation(item: MonitorItem, step: usize, margin: f64) -> Error {
    Error::MonitorViolation { item, step, margin }
}

fn ratio(value: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        value / bound
    } else if value > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Checks positivity, mass conservation, the `L-infinity` bound and, when
/// `check_bv` is set, the BV bound at every recorded step.
pub fn check_stability(series: &[StepDiagnostics], bounds: &DiagnosticBounds, check_bv: bool) -> Result<MonitorReport> {
    let Some(first) = series.first() else {
        return Err(Error::Config("no diagnostics were recorded".into()));
    };
    let mut report = MonitorReport {
        bounds: *bounds,
        min_value: f64::INFINITY,
        l1_drift: 0.0,
        linf_ratio: 0.0,
        tv_ratio: check_bv.then_some(0.0),
    };
    for d in series {
        report.min_value = report.min_value.min(d.min_value);
        if d.min_value < -POSITIVITY_TOLERANCE {
            return Err(violation(MonitorItem::Positivity, d.step, d.min_value));
        }
        for k in 0..d.l1_norm.len() {
            let m0 = first.l1_norm[k];
            let drift = (d.l1_norm[k] - m0).abs();
            let allowed = CONSERVATION_TOLERANCE * m0.max(f64::MIN_POSITIVE);
            report.l1_drift = report.l1_drift.max(if m0 > 0.0 { drift / m0 } else { drift });
            if drift > allowed && drift > 0.0 {
                return Err(violation(MonitorItem::L1Conservation, d.step, drift - allowed));
            }
            let linf_bound = growth_bound(bounds.k3, d.t, first.linf_ubar[k]);
            let r = ratio(d.linf_ubar[k], linf_bound);
            report.linf_ratio = report.linf_ratio.max(r);
            if r > 1.0 {
                return Err(violation(MonitorItem::LinfBound, d.step, d.linf_ubar[k] - linf_bound));
            }
            if check_bv {
                let tv_bound = growth_bound(bounds.k4, d.t, first.tv_ubar[k] + bounds.k5 * d.t);
                let r = ratio(d.tv_ubar[k], tv_bound);
                report.tv_ratio = report.tv_ratio.map(|m| m.max(r));
                if r > 1.0 {
                    return Err(violation(MonitorItem::BvBound, d.step, d.tv_ubar[k] - tv_bound));
                }
            }
        }
    }
    Ok(report)
}

/// Largest recorded entropy residual; fails above `tolerance`.
pub fn check_entropy(series: &[StepDiagnostics], tolerance: f64) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for d in series {
        if let Some(r) = d.entropy_violation_max {
            worst = worst.max(r);
            if r > tolerance {
                return Err(violation(MonitorItem::EntropyInequality, d.step, r - tolerance));
            }
        }
    }
    Ok(worst)
}

/// Largest recorded excess over the convolution difference bounds, as
/// `(first, second)`; fails when a tolerance is exceeded.
pub fn check_convolution_bounds(series: &[StepDiagnostics]) -> Result<(f64, f64)> {
    let mut worst = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for d in series {
        if let Some(c) = d.convolution_bounds {
            worst = (worst.0.max(c.first), worst.1.max(c.second));
            if c.first > c.first_tolerance {
                return Err(violation(
                    MonitorItem::ConvolutionFirstDifference,
                    d.step,
                    c.first - c.first_tolerance,
                ));
            }
            if c.second > c.second_tolerance {
                return Err(violation(
                    MonitorItem::ConvolutionSecondDifference,
                    d.step,
                    c.second - c.second_tolerance,
                ));
            }
        }
    }
    Ok(worst)
}
