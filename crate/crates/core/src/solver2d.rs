//! Two-dimensional unsplit five-point scheme for constant coefficients.

use log::warn;

use crate::error::{Error, Result};
use crate::fft::{direct_convolve, FftGrid, OffsetBox, SpectralKernel};
use crate::flux::{checked_lambda, directional_lambda, FluxFamily, NumericalFlux, SchemeConfig};
use crate::grid::{Grid2d, InitialData};
use crate::model::{KernelSpec2d, Kernels, ModelSpec};
use crate::monitor::{DiagnosticBounds, StepDiagnostics};
use crate::solver1d::{next_step, stop_times, RunOptions, DEFAULT_SUPPORT_TOLERANCE};

/// Kernels with more nonzero weights than this use the FFT path.
pub const FFT_THRESHOLD: usize = 400;

/// Sampling direction of a two-dimensional kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// At x-interface midpoints `(x_{i+1/2}, y_j)`.
    X,
    /// At y-interface midpoints `(x_i, y_{j+1/2})`.
    Y,
}

/// Kernel samples for one direction.
///
/// For the x direction `weight(a, b) = mu((a - 1/2) dx, b dx)`, so that the
/// value at interface `h` (left edge of cell `h`) of row `j` is
/// `dx^2 sum_{a,b} weight(a, b) U[h - a][j - b]`; the y direction swaps roles.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights2d {
    pub dx: f64,
    pub direction: Direction,
    pub samples: OffsetBox,
}

impl KernelWeights2d {
    pub fn build(spec: &KernelSpec2d, dx: f64, direction: Direction) -> Result<Self> {
        let r = spec.radius();
        if !(dx > 0.0) || dx > r / 2.0 {
            return Err(Error::InsufficientResolution { lo: -r, hi: r, dx });
        }
        // half-integer offsets along the sampling direction
        let half_lo = (0.5 - r / dx).floor() as i64;
        let half_hi = (0.5 + r / dx).ceil() as i64;
        let int_lo = (-r / dx).floor() as i64;
        let int_hi = (r / dx).ceil() as i64;
        let ((a_lo, a_hi), (b_lo, b_hi)) = match direction {
            Direction::X => ((half_lo, half_hi), (int_lo, int_hi)),
            Direction::Y => ((int_lo, int_hi), (half_lo, half_hi)),
        };
        let point = |a: i64, b: i64| match direction {
            Direction::X => ((a as f64 - 0.5) * dx, b as f64 * dx),
            Direction::Y => (a as f64 * dx, (b as f64 - 0.5) * dx),
        };
        // trim to the nonzero bounding box
        let mut lo = (i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN);
        for b in b_lo..=b_hi {
            for a in a_lo..=a_hi {
                let (x, y) = point(a, b);
                if spec.eval(x, y) != 0.0 {
                    lo = (lo.0.min(a), lo.1.min(b));
                    hi = (hi.0.max(a), hi.1.max(b));
                }
            }
        }
        if lo.0 > hi.0 {
            return Err(Error::InsufficientResolution { lo: -r, hi: r, dx });
        }
        let width = (hi.0 - lo.0 + 1) as usize;
        let height = (hi.1 - lo.1 + 1) as usize;
        let mut weights = Vec::with_capacity(width * height);
        for b in lo.1..=hi.1 {
            for a in lo.0..=hi.0 {
                let (x, y) = point(a, b);
                weights.push(spec.eval(x, y));
            }
        }
        Ok(KernelWeights2d {
            dx,
            direction,
            samples: OffsetBox {
                a_lo: lo.0,
                b_lo: lo.1,
                width,
                height,
                weights,
            },
        })
    }

    pub fn weight(&self, a: i64, b: i64) -> f64 {
        self.samples.get(a, b)
    }

    /// `dx^2 sum weights`
    pub fn discrete_mass(&self) -> f64 {
        self.dx * self.dx * self.samples.weights.iter().sum::<f64>()
    }

    /// Output shape `(nx_out, ny_out)` for a field of `nx x ny` cells.
    pub fn output_shape(&self, nx: usize, ny: usize) -> (usize, usize) {
        match self.direction {
            Direction::X => (nx + 1, ny),
            Direction::Y => (nx, ny + 1),
        }
    }
}

/// Convolution backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMethod {
    Direct,
    Fft,
    /// FFT when the largest footprint exceeds [`FFT_THRESHOLD`] weights.
    Auto,
}

/// Cell averages `u[k][j * nx + i]` on a [`Grid2d`].
#[derive(Debug, Clone, PartialEq)]
pub struct State2d {
    pub u: Vec<Vec<f64>>,
    pub t: f64,
    pub step: usize,
}

impl State2d {
    pub fn n_components(&self) -> usize {
        self.u.len()
    }

    pub fn min_value(&self) -> f64 {
        self.u
            .iter()
            .flat_map(|c| c.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn l1_norms(&self, dx: f64) -> Vec<f64> {
        self.u
            .iter()
            .map(|c| dx * dx * c.iter().map(|v| v.abs()).sum::<f64>())
            .collect()
    }

    pub fn linf(&self) -> Vec<f64> {
        self.u
            .iter()
            .map(|c| c.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
            .collect()
    }
}

/// Convolution values at the x- and y-interfaces:
/// `x[k][j]` is `mu^{j,k} * U^j` on the `(nx + 1) x ny` x-interface points and
/// `y[k][j]` the same on the `nx x (ny + 1)` y-interface points.
#[derive(Debug, Clone, PartialEq)]
pub struct Convolution2d {
    pub x: Vec<Vec<Vec<f64>>>,
    pub y: Vec<Vec<Vec<f64>>>,
}

impl Convolution2d {
    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(&self.y)
            .all(|per_k| per_k.iter().all(|v| v.iter().all(|c| c.is_finite())))
    }

    /// Largest `sum_j |c_j|` over components and interface points.
    pub fn max_row_norm(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .map(|per_k| {
                let points = per_k.first().map_or(0, Vec::len);
                (0..points)
                    .map(|p| per_k.iter().map(|v| v[p].abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

struct Bank2d {
    /// Distinct kernels, each with its x and y samples.
    groups: Vec<(KernelWeights2d, KernelWeights2d)>,
    /// `x_index[j][k]`, `y_index[j][k]`: group of each entry.
    x_index: Vec<Vec<usize>>,
    y_index: Vec<Vec<usize>>,
    /// `(||d_x mu||, ||d_y mu||)` maximized over entries.
    gradient_norms: (f64, f64),
}

impl Bank2d {
    fn build(x: &[Vec<KernelSpec2d>], y: &[Vec<KernelSpec2d>], dx: f64) -> Result<Self> {
        let mut specs: Vec<KernelSpec2d> = Vec::new();
        let mut groups = Vec::new();
        let mut gradient_norms = (0.0f64, 0.0f64);
        let mut index = |matrix: &[Vec<KernelSpec2d>]| -> Result<Vec<Vec<usize>>> {
            let mut out = Vec::with_capacity(matrix.len());
            for row in matrix {
                let mut r = Vec::with_capacity(row.len());
                for spec in row {
                    let g = match specs.iter().position(|s| s == spec) {
                        Some(g) => g,
                        None => {
                            groups.push((
                                KernelWeights2d::build(spec, dx, Direction::X)?,
                                KernelWeights2d::build(spec, dx, Direction::Y)?,
                            ));
                            let (gx, gy) = spec.gradient_sup_norms();
                            gradient_norms = (gradient_norms.0.max(gx), gradient_norms.1.max(gy));
                            specs.push(spec.clone());
                            specs.len() - 1
                        }
                    };
                    r.push(g);
                }
                out.push(r);
            }
            Ok(out)
        };
        let x_index = index(x)?;
        let y_index = index(y)?;
        Ok(Bank2d {
            groups,
            x_index,
            y_index,
            gradient_norms,
        })
    }

    fn max_nonzero(&self) -> usize {
        self.groups
            .iter()
            .map(|(a, b)| a.samples.nonzero().max(b.samples.nonzero()))
            .max()
            .unwrap_or(0)
    }

    fn max_reach(&self) -> usize {
        self.groups
            .iter()
            .flat_map(|(a, b)| [&a.samples, &b.samples])
            .map(|s| s.a_lo.abs().max(s.a_hi().abs()).max(s.b_lo.abs()).max(s.b_hi().abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    fn mass_deviation(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|(a, b)| [a.discrete_mass(), b.discrete_mass()])
            .map(|m| (m - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

struct Spectral {
    grid: FftGrid,
    /// Transforms of the x and y samples of each group.
    kernels: Vec<(SpectralKernel, SpectralKernel)>,
}

pub struct Solver2d {
    model: ModelSpec,
    grid: Grid2d,
    scheme: SchemeConfig,
    lambda: f64,
    flux: NumericalFlux,
    /// Constant coefficient of each component.
    sigma: Vec<f64>,
    bank: Bank2d,
    spectral: Option<Spectral>,
}

/// Mesh ratio for the unsplit scheme: half the one-dimensional bound over
/// both directions, times the safety fraction.
pub fn max_stable_lambda_2d(model: &ModelSpec, scheme: &SchemeConfig) -> Result<f64> {
    let mut lambda = f64::INFINITY;
    for c in &model.components {
        let s = c.sigma.sigma_sup();
        lambda = lambda.min(directional_lambda(scheme, s, c.flux.lipschitz(), c.velocity_bounds.sup));
        if let (Some(g), Some(b)) = (&c.flux_y, &c.velocity_y_bounds) {
            lambda = lambda.min(directional_lambda(scheme, s, g.lipschitz(), b.sup));
        }
    }
    checked_lambda(0.5 * lambda, scheme)
}

impl Solver2d {
    pub fn new(model: ModelSpec, grid: Grid2d, scheme: SchemeConfig) -> Result<Self> {
        Solver2d::with_method(model, grid, scheme, ConvolutionMethod::Auto)
    }

    pub fn with_method(
        model: ModelSpec,
        grid: Grid2d,
        scheme: SchemeConfig,
        method: ConvolutionMethod,
    ) -> Result<Self> {
        model.validate()?;
        scheme.validate(&model)?;
        let lambda = max_stable_lambda_2d(&model, &scheme)?;
        Solver2d::build(model, grid, scheme, lambda, method)
    }

    /// Solver with an explicit mesh ratio `dt / dx` (equal in both directions).
    pub fn with_lambda(
        model: ModelSpec,
        grid: Grid2d,
        scheme: SchemeConfig,
        lambda: f64,
        method: ConvolutionMethod,
    ) -> Result<Self> {
        model.validate()?;
        scheme.validate(&model)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::DegenerateModel(format!("mesh ratio {lambda} is not positive")));
        }
        Solver2d::build(model, grid, scheme, lambda, method)
    }

    fn build(
        model: ModelSpec,
        grid: Grid2d,
        scheme: SchemeConfig,
        lambda: f64,
        method: ConvolutionMethod,
    ) -> Result<Self> {
        let Kernels::TwoD { x, y } = &model.kernels else {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: model.dimension(),
            });
        };
        if scheme.flux == FluxFamily::LaxFriedrichs && !(2.0 * scheme.theta * model.sigma_sup() < 1.0) {
            // both directional viscosities draw on the same cell
            return Err(Error::Config(format!(
                "theta = {} too large for the five-point scheme, need theta < {}",
                scheme.theta,
                0.5 / model.sigma_sup()
            )));
        }
        let bank = Bank2d::build(x, y, grid.dx())?;
        let use_fft = match method {
            ConvolutionMethod::Direct => false,
            ConvolutionMethod::Fft => true,
            ConvolutionMethod::Auto => bank.max_nonzero() > FFT_THRESHOLD,
        };
        let spectral = use_fft.then(|| {
            let boxes: Vec<&OffsetBox> = bank.groups.iter().flat_map(|(a, b)| [&a.samples, &b.samples]).collect();
            let fft = FftGrid::new(grid.nx, grid.ny, &boxes);
            let scale = grid.dx() * grid.dx();
            let kernels = bank
                .groups
                .iter()
                .map(|(a, b)| (fft.kernel(&a.samples, scale), fft.kernel(&b.samples, scale)))
                .collect();
            Spectral { grid: fft, kernels }
        });
        let sigma = model.components.iter().map(|c| c.sigma.sigma_sup()).collect();
        let flux = NumericalFlux::new(&scheme, lambda);
        Ok(Solver2d {
            model,
            grid,
            scheme,
            lambda,
            flux,
            sigma,
            bank,
            spectral,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &Grid2d {
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

    pub fn uses_fft(&self) -> bool {
        self.spectral.is_some()
    }

    /// Largest deviation of a discrete kernel mass from one.
    pub fn mass_deviation(&self) -> f64 {
        self.bank.mass_deviation()
    }

    /// Kernel samples `(x, y)` of the entry `mu^{j,k}` used by the x sweep.
    pub fn kernel_weights(&self, j: usize, k: usize) -> (&KernelWeights2d, &KernelWeights2d) {
        (
            &self.bank.groups[self.bank.x_index[j][k]].0,
            &self.bank.groups[self.bank.y_index[j][k]].1,
        )
    }

    pub fn boundary_band(&self) -> usize {
        self.bank.max_reach() + 1
    }

    pub fn state_from_cells(&self, u: Vec<Vec<f64>>) -> Result<State2d> {
        let n = self.model.n_components();
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.len(),
            });
        }
        for c in &u {
            if c.len() != self.grid.n_cells() {
                return Err(Error::DimensionMismatch {
                    expected: self.grid.n_cells(),
                    found: c.len(),
                });
            }
        }
        Ok(State2d { u, t: 0.0, step: 0 })
    }

    pub fn project(&self, data: &InitialData) -> Result<State2d> {
        let n = self.model.n_components();
        if data.n_components() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: data.n_components(),
            });
        }
        let g = &self.grid;
        let dx = g.dx();
        let u = (0..n)
            .map(|k| {
                let mut c = Vec::with_capacity(g.n_cells());
                for j in 0..g.ny {
                    let ya = g.y_lo + j as f64 * dx;
                    for i in 0..g.nx {
                        let xa = g.x_lo + i as f64 * dx;
                        c.push(data.cell_average_2d(k, xa, xa + dx, ya, ya + dx));
                    }
                }
                c
            })
            .collect();
        let state = self.state_from_cells(u)?;
        let fraction = self.boundary_mass_fraction(&state);
        if fraction > 0.0 {
            warn!("{}", Error::SupportClipped { fraction });
        }
        Ok(state)
    }

    pub fn boundary_mass_fraction(&self, state: &State2d) -> f64 {
        let band = self.boundary_band();
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut edge = 0.0;
        let mut total = 0.0;
        for c in &state.u {
            for j in 0..ny {
                for i in 0..nx {
                    let v = c[j * nx + i].abs();
                    total += v;
                    if i < band || j < band || i + band >= nx || j + band >= ny {
                        edge += v;
                    }
                }
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }

    /// Interface convolutions of `state`.
    pub fn convolution(&self, state: &State2d) -> Convolution2d {
        let n = self.model.n_components();
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let scale = self.grid.dx() * self.grid.dx();
        // per (field j, group g, direction): cached output
        let mut cache_x: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; self.bank.groups.len()]; n];
        let mut cache_y = cache_x.clone();
        match &self.spectral {
            Some(sp) => {
                for pair in (0..n).collect::<Vec<_>>().chunks(2) {
                    let j0 = pair[0];
                    let j1 = pair.get(1).copied();
                    let spectrum = sp.grid.forward(&state.u[j0], j1.map(|j| state.u[j].as_slice()), nx, ny);
                    for g in 0..self.bank.groups.len() {
                        let used_x = pair.iter().any(|&j| self.bank.x_index[j].contains(&g));
                        let used_y = pair.iter().any(|&j| self.bank.y_index[j].contains(&g));
                        if used_x {
                            let (re, im) = sp.grid.apply(&spectrum, &sp.kernels[g].0, nx + 1, ny);
                            cache_x[j0][g] = Some(re);
                            if let Some(j1) = j1 {
                                cache_x[j1][g] = Some(im);
                            }
                        }
                        if used_y {
                            let (re, im) = sp.grid.apply(&spectrum, &sp.kernels[g].1, nx, ny + 1);
                            cache_y[j0][g] = Some(re);
                            if let Some(j1) = j1 {
                                cache_y[j1][g] = Some(im);
                            }
                        }
                    }
                }
            }
            None => {
                for j in 0..n {
                    for k in 0..n {
                        let gx = self.bank.x_index[j][k];
                        if cache_x[j][gx].is_none() {
                            let w = &self.bank.groups[gx].0.samples;
                            cache_x[j][gx] = Some(direct_convolve(&state.u[j], nx, ny, w, scale, nx + 1, ny));
                        }
                        let gy = self.bank.y_index[j][k];
                        if cache_y[j][gy].is_none() {
                            let w = &self.bank.groups[gy].1.samples;
                            cache_y[j][gy] = Some(direct_convolve(&state.u[j], nx, ny, w, scale, nx, ny + 1));
                        }
                    }
                }
            }
        }
        let take = |cache: &Vec<Vec<Option<Vec<f64>>>>, index: &Vec<Vec<usize>>| -> Vec<Vec<Vec<f64>>> {
            (0..n)
                .map(|k| {
                    (0..n)
                        .map(|j| cache[j][index[j][k]].clone().expect("convolution computed"))
                        .collect()
                })
                .collect()
        };
        Convolution2d {
            x: take(&cache_x, &self.bank.x_index),
            y: take(&cache_y, &self.bank.y_index),
        }
    }

    pub fn step(&self, state: &State2d) -> Result<State2d> {
        let conv = self.convolution(state);
        self.advance(state, &conv, self.dt())
    }

    /// One step of length `dt` using a precomputed convolution.
    pub fn advance(&self, state: &State2d, conv: &Convolution2d, dt: f64) -> Result<State2d> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let n = self.model.n_components();
        let ratio = dt / self.grid.dx();
        let mut out = Vec::with_capacity(n);
        let mut row = vec![0.0; n];
        for (k, comp) in self.model.components.iter().enumerate() {
            let s = self.sigma[k];
            let u = &state.u[k];
            let fy_local = comp.flux_y.as_ref().expect("validated two-dimensional model");
            let vel_y = comp.velocity_y.as_ref().expect("validated two-dimensional model");
            // x fluxes at (h, j), h = 0..=nx, zero on the boundary
            let mut fx = vec![0.0; (nx + 1) * ny];
            for j in 0..ny {
                for h in 1..nx {
                    let idx = j * (nx + 1) + h;
                    for (jj, r) in row.iter_mut().enumerate() {
                        *r = conv.x[k][jj][idx];
                    }
                    let nu = comp.velocity.eval(&row);
                    fx[idx] = self.flux.eval(nu, s * u[j * nx + h - 1], s * u[j * nx + h], &comp.flux);
                }
            }
            // y fluxes at (i, g), g = 0..=ny
            let mut fy = vec![0.0; nx * (ny + 1)];
            for g in 1..ny {
                for i in 0..nx {
                    let idx = g * nx + i;
                    for (jj, r) in row.iter_mut().enumerate() {
                        *r = conv.y[k][jj][idx];
                    }
                    let nu = vel_y.eval(&row);
                    fy[idx] = self.flux.eval(nu, s * u[(g - 1) * nx + i], s * u[g * nx + i], fy_local);
                }
            }
            let mut next = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let dfx = fx[j * (nx + 1) + i + 1] - fx[j * (nx + 1) + i];
                    let dfy = fy[(j + 1) * nx + i] - fy[j * nx + i];
                    let v = u[j * nx + i] - ratio * dfx - ratio * dfy;
                    if !v.is_finite() {
                        return Err(Error::NonFiniteState {
                            step: state.step + 1,
                            component: k,
                            cell: j * nx + i,
                        });
                    }
                    next.push(v);
                }
            }
            out.push(next);
        }
        Ok(State2d {
            u: out,
            t: state.t + dt,
            step: state.step + 1,
        })
    }

    fn diagnostics(&self, state: &State2d, dt: f64, prev: Option<&State2d>) -> StepDiagnostics {
        let dx = self.grid.dx();
        let n = state.n_components();
        let linf: Vec<f64> = state.linf().iter().zip(&self.sigma).map(|(v, s)| v * s).collect();
        let l1 = state.l1_norms(dx);
        let time_variation = match prev {
            Some(p) => {
                p.u.iter()
                    .zip(&state.u)
                    .map(|(a, b)| dx * dx * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
                    .collect()
            }
            None => vec![0.0; n],
        };
        StepDiagnostics {
            step: state.step,
            t: state.t,
            dt,
            min_value: state.min_value(),
            l1_ubar: l1.iter().zip(&self.sigma).map(|(v, s)| v * s).collect(),
            l1_norm: l1,
            linf_ubar: linf,
            tv_ubar: vec![0.0; n],
            time_variation,
            entropy_violation_max: None,
            convolution_bounds: None,
            mass_deviation: self.bank.mass_deviation(),
            conv_max: 0.0,
        }
    }

    /// Stability constants for the positivity, mass and `L-infinity` checks.
    pub fn diagnostic_bounds(&self, series: &[StepDiagnostics]) -> DiagnosticBounds {
        let l1 = series.iter().map(|d| d.l1_norm.iter().sum::<f64>()).fold(0.0, f64::max);
        let (gx, gy) = self.bank.gradient_norms;
        let k1 = (gx + gy) * l1;
        let mut k3 = 0.0f64;
        for c in &self.model.components {
            let s = c.sigma.sigma_sup();
            let mut rate = c.flux.lipschitz() * c.velocity_bounds.lip;
            if let (Some(g), Some(b)) = (&c.flux_y, &c.velocity_y_bounds) {
                rate += g.lipschitz() * b.lip;
            }
            k3 = k3.max(k1 * s * rate);
        }
        DiagnosticBounds {
            k1,
            k2: 0.0,
            k3,
            k4: 0.0,
            k5: 0.0,
            k6: crate::monitor::time_lipschitz(series),
        }
    }

    pub fn run(&self, initial: State2d, opts: &RunOptions) -> Result<Run2dOutput> {
        if !(opts.t_final >= 0.0) || !opts.t_final.is_finite() {
            return Err(Error::Config(format!(
                "final time must be nonnegative, got {}",
                opts.t_final
            )));
        }
        let mut snapshots = Vec::new();
        let mut diagnostics = Vec::new();
        let mut state = initial;
        if opts.snapshot_times.iter().any(|s| *s <= 0.0) {
            snapshots.push(state.clone());
        }
        if opts.monitor {
            diagnostics.push(self.diagnostics(&state, 0.0, None));
        }
        if opts.t_final == 0.0 {
            let boundary_fraction = self.boundary_mass_fraction(&state);
            return Ok(Run2dOutput {
                state,
                snapshots,
                diagnostics,
                boundary_fraction,
            });
        }
        let dt_full = self.dt();
        let want_snapshot = |t: f64| {
            opts.snapshot_times
                .iter()
                .any(|s| (s - t).abs() <= 1e-12 * opts.t_final.max(1.0))
        };
        for stop in stop_times(opts.t_final, &opts.snapshot_times) {
            loop {
                let (dt, lands) = next_step(state.t, dt_full, stop);
                let conv = self.convolution(&state);
                let mut next = self.advance(&state, &conv, dt)?;
                if lands {
                    next.t = stop;
                }
                if opts.monitor {
                    let mut d = self.diagnostics(&next, dt, Some(&state));
                    d.conv_max = conv.max_row_norm();
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
        let boundary_fraction = self.boundary_mass_fraction(&state);
        match opts.support_tolerance {
            Some(tol) if boundary_fraction > tol => {
                return Err(Error::SupportClipped {
                    fraction: boundary_fraction,
                })
            }
            None if boundary_fraction > DEFAULT_SUPPORT_TOLERANCE => {
                warn!(
                    "{}",
                    Error::SupportClipped {
                        fraction: boundary_fraction
                    }
                );
            }
            _ => {}
        }
        Ok(Run2dOutput {
            state,
            snapshots,
            diagnostics,
            boundary_fraction,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Run2dOutput {
    pub state: State2d,
    pub snapshots: Vec<State2d>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Fraction of the final mass within the boundary band.
    pub boundary_fraction: f64,
}
