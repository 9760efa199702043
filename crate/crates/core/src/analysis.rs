//! Grid-refinement errors and convergence rates.

use log::info;

use crate::error::{Error, Result};
use crate::flux::SchemeConfig;
use crate::grid::{Grid1d, Grid2d, InitialData};
use crate::model::{ExactSolution, ModelSpec};
use crate::solver1d::{RunOptions, Solver1d, SystemState};
use crate::solver2d::{Solver2d, State2d};

/// Proven lower bound on the rate for the discontinuous-coefficient 1D case.
pub const RATE_FLOOR_1D: f64 = 1.0 / 3.0;
/// Proven lower bound on the rate when the coefficient is constant.
pub const RATE_FLOOR_CONSTANT_COEFFICIENT: f64 = 0.5;

/// Integer refinement ratio between two cell counts.
fn refinement_ratio(coarse: usize, fine: usize) -> Result<usize> {
    if coarse == 0 || fine < coarse || !fine.is_multiple_of(coarse) {
        return Err(Error::GridMismatch(format!(
            "{fine} cells do not refine {coarse} cells"
        )));
    }
    Ok(fine / coarse)
}

/// `sum_k sum_fine |coarse - fine| * measure` with the coarse field replicated
/// onto the fine cells. Fields are stored row-major as `[k][j * nx + i]`.
pub fn refined_distance(
    coarse: &[Vec<f64>],
    coarse_shape: (usize, usize),
    fine: &[Vec<f64>],
    fine_shape: (usize, usize),
    fine_measure: f64,
) -> Result<f64> {
    if coarse.len() != fine.len() {
        return Err(Error::DimensionMismatch {
            expected: coarse.len(),
            found: fine.len(),
        });
    }
    let rx = refinement_ratio(coarse_shape.0, fine_shape.0)?;
    let ry = refinement_ratio(coarse_shape.1, fine_shape.1)?;
    if coarse_shape.1 > 1 && rx != ry {
        return Err(Error::GridMismatch(format!(
            "refinement ratios differ between axes ({rx} vs {ry})"
        )));
    }
    let mut total = 0.0;
    for (c, f) in coarse.iter().zip(fine) {
        if c.len() != coarse_shape.0 * coarse_shape.1 || f.len() != fine_shape.0 * fine_shape.1 {
            return Err(Error::GridMismatch("field length does not match its grid".into()));
        }
        for fj in 0..fine_shape.1 {
            let cj = fj / ry;
            for fi in 0..fine_shape.0 {
                let ci = fi / rx;
                total += (c[cj * coarse_shape.0 + ci] - f[fj * fine_shape.0 + fi]).abs();
            }
        }
    }
    Ok(total * fine_measure)
}

/// L1 distance between a coarse and a finer 1D state on the same interval.
pub fn l1_distance_refined(
    coarse: &SystemState,
    coarse_grid: &Grid1d,
    fine: &SystemState,
    fine_grid: &Grid1d,
) -> Result<f64> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    if !same(coarse_grid.x_left, fine_grid.x_left) || !same(coarse_grid.x_right, fine_grid.x_right) {
        return Err(Error::GridMismatch(format!(
            "intervals differ: [{}, {}] vs [{}, {}]",
            coarse_grid.x_left, coarse_grid.x_right, fine_grid.x_left, fine_grid.x_right
        )));
    }
    refined_distance(
        &coarse.u,
        (coarse_grid.n_cells, 1),
        &fine.u,
        (fine_grid.n_cells, 1),
        fine_grid.dx(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub error: f64,
    /// Rate against the next row; absent on the last row.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub model: String,
    pub flux: String,
    pub t_final: f64,
    pub theta: f64,
    pub levels: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Fills rates from consecutive rows with `log(e1/e2) / log(dx1/dx2)`.
    pub fn from_errors(model: &str, scheme: &SchemeConfig, t_final: f64, errors: &[(f64, f64)]) -> ConvergenceTable {
        let rows = errors
            .iter()
            .enumerate()
            .map(|(i, &(dx, error))| ConvergenceRow {
                dx,
                error,
                rate: errors.get(i + 1).map(|&(dx2, e2)| rate(dx, error, dx2, e2)),
            })
            .collect();
        ConvergenceTable {
            model: model.to_string(),
            flux: scheme.flux.name().to_string(),
            t_final,
            theta: scheme.theta,
            levels: errors.len(),
            rows,
        }
    }

    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// Fails unless every rate exceeds `floor + margin`.
    pub fn check_floor(&self, floor: f64, margin: f64) -> Result<()> {
        for (row, r) in self.rates().into_iter().enumerate() {
            if !(r > floor + margin) {
                return Err(Error::MonitorViolation {
                    item: crate::error::MonitorItem::ConvergenceFloor,
                    step: row,
                    margin: r - floor - margin,
                });
            }
        }
        Ok(())
    }
}

/// Observed order between `(dx1, e1)` and `(dx2, e2)`.
pub fn rate(dx1: f64, e1: f64, dx2: f64, e2: f64) -> f64 {
    (e1 / e2).ln() / (dx1 / dx2).ln()
}

/// Self-refinement study in 1D: runs at `base_dx / 2^l` for `l = 0..=levels`
/// and reports `e_dx = ||U_dx - U_{dx/2}||` for the first `levels` spacings.
pub fn convergence_study_1d(
    model: &ModelSpec,
    domain: (f64, f64),
    data: &InitialData,
    scheme: &SchemeConfig,
    base_dx: f64,
    levels: usize,
    t_final: f64,
) -> Result<ConvergenceTable> {
    let runs = run_levels(levels, |l| {
        let dx = base_dx / (1u64 << l) as f64;
        let grid = Grid1d::with_spacing(domain.0, domain.1, dx)?;
        let solver = Solver1d::new(model.clone(), grid, *scheme)?;
        let out = solver.run(solver.project(data)?, &RunOptions::new(t_final))?;
        Ok((grid, out.state))
    })?;
    let mut errors = Vec::with_capacity(levels);
    for pair in runs.windows(2) {
        let ((cg, cs), (fg, fs)) = (&pair[0], &pair[1]);
        let e = l1_distance_refined(cs, cg, fs, fg)?;
        info!("dx = {:e}: e = {:e}", cg.dx(), e);
        errors.push((cg.dx(), e));
    }
    Ok(ConvergenceTable::from_errors(&model.id, scheme, t_final, &errors))
}

/// Runs levels `0..=levels` on separate threads; results come back in order.
fn run_levels<T: Send>(levels: usize, run: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    if levels < 1 {
        return Err(Error::Config("a convergence study needs at least one level".into()));
    }
    let run = &run;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..=levels).map(|l| s.spawn(move || run(l))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("level run panicked"))
            .collect()
    })
}

/// L1 distance between a coarse and a finer 2D state on the same rectangle.
pub fn l1_distance_refined_2d(
    coarse: &State2d,
    coarse_grid: &Grid2d,
    fine: &State2d,
    fine_grid: &Grid2d,
) -> Result<f64> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    let (c, f) = (coarse_grid, fine_grid);
    if !same(c.x_lo, f.x_lo) || !same(c.x_hi, f.x_hi) || !same(c.y_lo, f.y_lo) || !same(c.y_hi, f.y_hi) {
        return Err(Error::GridMismatch("rectangles differ".into()));
    }
    let measure = f.dx() * f.dx();
    refined_distance(&coarse.u, (c.nx, c.ny), &fine.u, (f.nx, f.ny), measure)
}

/// Two-dimensional self-refinement study on `[lo, hi]^2`; see
/// [`convergence_study_1d`].
pub fn convergence_study_2d(
    model: &ModelSpec,
    domain: (f64, f64),
    data: &InitialData,
    scheme: &SchemeConfig,
    base_dx: f64,
    levels: usize,
    t_final: f64,
) -> Result<ConvergenceTable> {
    let runs = run_levels(levels, |l| {
        let dx = base_dx / (1u64 << l) as f64;
        let grid = Grid2d::with_spacing(domain.0, domain.1, domain.0, domain.1, dx)?;
        let solver = Solver2d::new(model.clone(), grid, *scheme)?;
        let out = solver.run(solver.project(data)?, &RunOptions::new(t_final))?;
        Ok((grid, out.state))
    })?;
    let mut errors = Vec::with_capacity(levels);
    for pair in runs.windows(2) {
        let ((cg, cs), (fg, fs)) = (&pair[0], &pair[1]);
        let e = l1_distance_refined_2d(cs, cg, fs, fg)?;
        info!("dx = {:e}: e = {:e}", cg.dx(), e);
        errors.push((cg.dx(), e));
    }
    Ok(ConvergenceTable::from_errors(&model.id, scheme, t_final, &errors))
}

/// Errors against the exact solution of `model` at each spacing in `dxs`.
pub fn rate_against_exact(
    model: &ModelSpec,
    domain: (f64, f64),
    data: &InitialData,
    scheme: &SchemeConfig,
    dxs: &[f64],
    t_final: f64,
) -> Result<ConvergenceTable> {
    let Some(ExactSolution::Translation { speed }) = model.exact else {
        return Err(Error::NoExactSolution(model.id.clone()));
    };
    let exact_data = data
        .translated(speed * t_final)
        .ok_or_else(|| Error::NoExactSolution(format!("{} with this initial data", model.id)))?;
    let mut errors = Vec::with_capacity(dxs.len());
    for &dx in dxs {
        let grid = Grid1d::with_spacing(domain.0, domain.1, dx)?;
        let solver = Solver1d::new(model.clone(), grid, *scheme)?;
        let out = solver.run(solver.project(data)?, &RunOptions::new(t_final))?;
        let exact = solver.project(&exact_data)?;
        let e = l1_distance_refined(&exact, &grid, &out.state, &grid)?;
        errors.push((dx, e));
    }
    Ok(ConvergenceTable::from_errors(&model.id, scheme, t_final, &errors))
}
