//! One-dimensional marching loop with zero-extension boundaries.

use log::warn;

use crate::error::{Error, Result};
use crate::flux::{crandall_majda_entropy_flux, max_stable_lambda, NumericalFlux, SchemeConfig};
use crate::grid::{Grid1d, InitialData};
use crate::kernel::{
    convolution_matrix, difference_bound_tolerance, first_difference_bound_check, second_difference_bound_check,
    ConvolutionField, KernelBank,
};
use crate::model::{Kernels, ModelSpec};
use crate::monitor::{DifferenceBoundCheck, StepDiagnostics};

/// Default tolerated fraction of the mass inside the boundary band.
pub const DEFAULT_SUPPORT_TOLERANCE: f64 = 1e-6;

/// Equispaced levels probed by the entropy check.
pub const DEFAULT_ENTROPY_ALPHAS: usize = 21;

/// Cell averages `u[k][i]` and the adapted variable `ubar[k][i] = sigma^k_i u[k][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub u: Vec<Vec<f64>>,
    pub ubar: Vec<Vec<f64>>,
    pub t: f64,
    pub step: usize,
}

impl SystemState {
    pub fn n_components(&self) -> usize {
        self.u.len()
    }

    pub fn n_cells(&self) -> usize {
        self.u.first().map_or(0, |c| c.len())
    }

    pub fn min_value(&self) -> f64 {
        self.u
            .iter()
            .flat_map(|c| c.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// `dx * sum_i |U^k_i|` per component.
    pub fn l1_norms(&self, dx: f64) -> Vec<f64> {
        self.u
            .iter()
            .map(|c| dx * c.iter().map(|v| v.abs()).sum::<f64>())
            .collect()
    }

    pub fn ubar_l1_norms(&self, dx: f64) -> Vec<f64> {
        self.ubar
            .iter()
            .map(|c| dx * c.iter().map(|v| v.abs()).sum::<f64>())
            .collect()
    }

    pub fn ubar_linf(&self) -> Vec<f64> {
        self.ubar
            .iter()
            .map(|c| c.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
            .collect()
    }

    /// Total variation of the zero-extended adapted variable.
    pub fn ubar_tv(&self) -> Vec<f64> {
        self.ubar.iter().map(|c| total_variation(c)).collect()
    }
}

pub(crate) fn total_variation(c: &[f64]) -> f64 {
    match (c.first(), c.last()) {
        (Some(a), Some(b)) => a.abs() + b.abs() + c.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>(),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t_final: f64,
    /// Times at which to keep a copy of the state; clipped to `[0, t_final]`.
    pub snapshot_times: Vec<f64>,
    /// Record per-step diagnostics.
    pub monitor: bool,
    /// Also evaluate the convolution difference bounds each step.
    pub convolution_bounds: bool,
    /// Number of levels for the entropy check, 0 to skip it.
    pub entropy_alphas: usize,
    /// Largest tolerated fraction of the mass within the boundary band.
    /// `None` uses [`DEFAULT_SUPPORT_TOLERANCE`] in one dimension and only
    /// warns in two.
    pub support_tolerance: Option<f64>,
}

impl RunOptions {
    pub fn new(t_final: f64) -> Self {
        RunOptions {
            t_final,
            snapshot_times: Vec::new(),
            monitor: false,
            convolution_bounds: false,
            entropy_alphas: 0,
            support_tolerance: None,
        }
    }

    pub fn monitored(t_final: f64) -> Self {
        RunOptions {
            monitor: true,
            ..RunOptions::new(t_final)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: SystemState,
    pub snapshots: Vec<SystemState>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Sequence of step lengths that reaches every stop in `stops` (sorted, the
/// last one being the final time) exactly, using `dt` except on the step
/// landing on a stop.
pub(crate) fn next_step(t: f64, dt: f64, target: f64) -> (f64, bool) {
    let remaining = target - t;
    if remaining <= dt * (1.0 + 1e-10) {
        (remaining, true)
    } else {
        (dt, false)
    }
}

pub(crate) fn stop_times(t_final: f64, snapshots: &[f64]) -> Vec<f64> {
    let mut stops: Vec<f64> = snapshots.iter().copied().filter(|s| *s > 0.0 && *s < t_final).collect();
    stops.push(t_final);
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops
}

pub struct Solver1d {
    model: ModelSpec,
    grid: Grid1d,
    scheme: SchemeConfig,
    lambda: f64,
    flux: NumericalFlux,
    sigma: Vec<Vec<f64>>,
    bank: KernelBank,
}

impl Solver1d {
    /// Solver at the largest stable mesh ratio for `model` and `scheme`.
    pub fn new(model: ModelSpec, grid: Grid1d, scheme: SchemeConfig) -> Result<Self> {
        model.validate()?;
        scheme.validate(&model)?;
        let lambda = max_stable_lambda(&model, &scheme)?;
        Solver1d::with_lambda(model, grid, scheme, lambda)
    }

    /// Solver with an explicit mesh ratio `dt / dx`.
    pub fn with_lambda(model: ModelSpec, grid: Grid1d, scheme: SchemeConfig, lambda: f64) -> Result<Self> {
        model.validate()?;
        scheme.validate(&model)?;
        if model.dimension() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: model.dimension(),
            });
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::DegenerateModel(format!("mesh ratio {lambda} is not positive")));
        }
        let bank = match &model.kernels {
            Kernels::OneD(m) => KernelBank::build(m, grid.dx())?,
            Kernels::TwoD { .. } => unreachable!("checked by dimension"),
        };
        let sigma = model
            .components
            .iter()
            .map(|c| grid.centers().iter().map(|&x| c.sigma.eval(x)).collect())
            .collect();
        let flux = NumericalFlux::new(&scheme, lambda);
        Ok(Solver1d {
            model,
            grid,
            scheme,
            lambda,
            flux,
            sigma,
            bank,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &Grid1d {
        &self.grid
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dt(&self) -> f64 {
        self.lambda * self.grid.dx()
    }

    pub fn sigma(&self) -> &[Vec<f64>] {
        &self.sigma
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    pub fn numerical_flux(&self) -> &NumericalFlux {
        &self.flux
    }

    /// Width of the boundary band in cells: one kernel footprint plus one.
    pub fn boundary_band(&self) -> usize {
        (self.bank.max_footprint() + 1).min(self.grid.n_cells.div_ceil(2))
    }

    /// Builds a state from cell averages.
    pub fn state_from_cells(&self, u: Vec<Vec<f64>>) -> Result<SystemState> {
        let n = self.model.n_components();
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.len(),
            });
        }
        for c in &u {
            if c.len() != self.grid.n_cells {
                return Err(Error::DimensionMismatch {
                    expected: self.grid.n_cells,
                    found: c.len(),
                });
            }
        }
        let ubar = self.adapted(&u);
        Ok(SystemState {
            u,
            ubar,
            t: 0.0,
            step: 0,
        })
    }

    fn adapted(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        u.iter()
            .zip(&self.sigma)
            .map(|(c, s)| c.iter().zip(s).map(|(v, s)| s * v).collect())
            .collect()
    }

    /// Cell averages of `data`; warns when the data reaches the boundary band.
    pub fn project(&self, data: &InitialData) -> Result<SystemState> {
        let n = self.model.n_components();
        if data.n_components() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: data.n_components(),
            });
        }
        if data.dimension() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: data.dimension(),
            });
        }
        let g = &self.grid;
        let u = (0..n)
            .map(|k| {
                (0..g.n_cells)
                    .map(|i| data.cell_average(k, g.interface(i), g.interface(i + 1)))
                    .collect()
            })
            .collect();
        let state = self.state_from_cells(u)?;
        let fraction = self.boundary_mass_fraction(&state);
        if fraction > 0.0 {
            warn!("{}", Error::SupportClipped { fraction });
        }
        Ok(state)
    }

    /// Fraction of the total mass lying in the boundary band.
    pub fn boundary_mass_fraction(&self, state: &SystemState) -> f64 {
        let band = self.boundary_band();
        let n = state.n_cells();
        let mut edge = 0.0;
        let mut total = 0.0;
        for c in &state.u {
            for (i, v) in c.iter().enumerate() {
                total += v.abs();
                if i < band || i + band >= n {
                    edge += v.abs();
                }
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }

    pub fn convolution(&self, state: &SystemState) -> Result<ConvolutionField> {
        convolution_matrix(&state.u, &self.bank, self.scheme.quadrature)
    }

    /// One full step of length `lambda * dx`.
    pub fn step(&self, state: &SystemState) -> Result<SystemState> {
        let conv = self.convolution(state)?;
        self.advance(state, &conv, self.dt())
    }

    /// One step of length `dt <= lambda * dx` using a precomputed convolution.
    pub fn advance(&self, state: &SystemState, conv: &ConvolutionField, dt: f64) -> Result<SystemState> {
        let n = self.grid.n_cells;
        let ratio = dt / self.grid.dx();
        let mut u = Vec::with_capacity(state.n_components());
        let mut fluxes = vec![0.0; n + 1];
        for (k, comp) in self.model.components.iter().enumerate() {
            let ub = &state.ubar[k];
            // zero flux through the outer interfaces
            fluxes[0] = 0.0;
            fluxes[n] = 0.0;
            for h in 1..n {
                let nu = comp.velocity.eval(conv.row(k, h));
                fluxes[h] = self.flux.eval(nu, ub[h - 1], ub[h], &comp.flux);
            }
            let mut next = Vec::with_capacity(n);
            for i in 0..n {
                let v = state.u[k][i] - ratio * (fluxes[i + 1] - fluxes[i]);
                if !v.is_finite() {
                    return Err(Error::NonFiniteState {
                        step: state.step + 1,
                        component: k,
                        cell: i,
                    });
                }
                next.push(v);
            }
            u.push(next);
        }
        let ubar = self.adapted(&u);
        Ok(SystemState {
            u,
            ubar,
            t: state.t + dt,
            step: state.step + 1,
        })
    }

    /// Largest entropy residual over cells and components for the level
    /// `alpha`; the discrete entropy inequality asserts it is `<= 0`.
    pub fn entropy_residual(&self, prev: &SystemState, next: &SystemState, alpha: f64, conv: &ConvolutionField) -> f64 {
        let n = self.grid.n_cells;
        let ratio = (next.t - prev.t) / self.grid.dx();
        let mut worst = f64::NEG_INFINITY;
        let mut g = vec![0.0; n + 1];
        let mut nu = vec![0.0; n + 1];
        for (k, comp) in self.model.components.iter().enumerate() {
            let s = &self.sigma[k];
            let u = &prev.u[k];
            // the outer interfaces carry the zero flux, so both the entropy
            // flux and the velocity jump term vanish there
            g[0] = 0.0;
            g[n] = 0.0;
            nu[0] = 0.0;
            nu[n] = 0.0;
            for h in 1..n {
                nu[h] = comp.velocity.eval(conv.row(k, h));
                g[h] =
                    crandall_majda_entropy_flux(&self.flux, &comp.flux, nu[h], s[h - 1], s[h], u[h - 1], u[h], alpha);
            }
            let fa = comp.flux.eval(alpha);
            for i in 0..n {
                let level = alpha / s[i];
                let d_next = next.u[k][i] - level;
                let r = d_next.abs() - (u[i] - level).abs()
                    + ratio * (g[i + 1] - g[i])
                    + ratio * signum0(d_next) * fa * (nu[i + 1] - nu[i]);
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Largest entropy residual over `n_alphas` equispaced levels in
    /// `[0, 1.2 max ubar]` of `prev`.
    pub fn entropy_residual_sweep(
        &self,
        prev: &SystemState,
        next: &SystemState,
        conv: &ConvolutionField,
        n_alphas: usize,
    ) -> f64 {
        let top = 1.2 * prev.ubar_linf().into_iter().fold(0.0, f64::max);
        alpha_levels(top, n_alphas)
            .map(|a| self.entropy_residual(prev, next, a, conv))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn difference_bound_check(&self, state: &SystemState, conv: &ConvolutionField) -> DifferenceBoundCheck {
        let dx = self.grid.dx();
        let l1: f64 = state.l1_norms(dx).iter().sum();
        let (d1, d2) = self.bank.derivative_norms;
        let k1 = d1 * l1;
        let k2 = 2.0 * d2 * l1;
        DifferenceBoundCheck {
            k1,
            k2,
            first: first_difference_bound_check(conv, k1, dx),
            second: second_difference_bound_check(conv, k2, dx),
            first_tolerance: difference_bound_tolerance(k1, dx),
            second_tolerance: difference_bound_tolerance(k2, dx),
        }
    }

    fn diagnostics(&self, state: &SystemState, dt: f64, prev: Option<&SystemState>) -> StepDiagnostics {
        let dx = self.grid.dx();
        let time_variation = match prev {
            Some(p) => {
                p.u.iter()
                    .zip(&state.u)
                    .map(|(a, b)| dx * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
                    .collect()
            }
            None => vec![0.0; state.n_components()],
        };
        StepDiagnostics {
            step: state.step,
            t: state.t,
            dt,
            min_value: state.min_value(),
            l1_norm: state.l1_norms(dx),
            linf_ubar: state.ubar_linf(),
            tv_ubar: state.ubar_tv(),
            l1_ubar: state.ubar_l1_norms(dx),
            time_variation,
            entropy_violation_max: None,
            convolution_bounds: None,
            mass_deviation: self.bank.mass_deviation(),
            conv_max: 0.0,
        }
    }

    /// Marches `initial` to `opts.t_final`, landing exactly on every
    /// snapshot time and on the final time.
    pub fn run(&self, initial: SystemState, opts: &RunOptions) -> Result<RunOutput> {
        if !(opts.t_final > 0.0) || !opts.t_final.is_finite() {
            return Err(Error::Config(format!(
                "final time must be positive, got {}",
                opts.t_final
            )));
        }
        let dt_full = self.dt();
        let stops = stop_times(opts.t_final, &opts.snapshot_times);
        let want_snapshot = |t: f64| {
            opts.snapshot_times
                .iter()
                .any(|s| (s - t).abs() <= 1e-12 * opts.t_final.max(1.0))
        };
        let mut snapshots = Vec::new();
        let mut diagnostics = Vec::new();
        let mut state = initial;
        if opts.snapshot_times.iter().any(|s| *s <= 0.0) {
            snapshots.push(state.clone());
        }
        if opts.monitor {
            diagnostics.push(self.diagnostics(&state, 0.0, None));
        }
        for &stop in &stops {
            loop {
                let (dt, lands) = next_step(state.t, dt_full, stop);
                let conv = self.convolution(&state)?;
                let mut next = self.advance(&state, &conv, dt)?;
                if lands {
                    next.t = stop;
                }
                if opts.monitor {
                    let mut d = self.diagnostics(&next, dt, Some(&state));
                    d.conv_max = conv.max_row_norm();
                    if opts.convolution_bounds {
                        d.convolution_bounds = Some(self.difference_bound_check(&state, &conv));
                    }
                    if opts.entropy_alphas > 0 {
                        d.entropy_violation_max =
                            Some(self.entropy_residual_sweep(&state, &next, &conv, opts.entropy_alphas));
                    }
                    diagnostics.push(d);
                }
                state = next;
                if lands {
                    break;
                }
            }
            if want_snapshot(stop) {
                snapshots.push(state.clone());
            }
        }
        let fraction = self.boundary_mass_fraction(&state);
        if fraction > opts.support_tolerance.unwrap_or(DEFAULT_SUPPORT_TOLERANCE) {
            return Err(Error::SupportClipped { fraction });
        }
        Ok(RunOutput {
            state,
            snapshots,
            diagnostics,
        })
    }
}

/// `n` equispaced levels on `[0, top]` (just `0` when `n == 1`).
pub fn alpha_levels(top: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |m| if n > 1 { top * m as f64 / (n - 1) as f64 } else { 0.0 })
}

#[inline]
fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
