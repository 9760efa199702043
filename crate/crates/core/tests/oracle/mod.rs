//! Slow reference implementations. They share nothing with the solvers
//! beyond the model callbacks: no precomputed weights, no fused loops.
#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use nonlocal_fv::flux::{FluxFamily, SchemeConfig};
use nonlocal_fv::grid::{Grid1d, Grid2d};
use nonlocal_fv::kernel::QuadratureRule;
use nonlocal_fv::model::{ComponentSpec, KernelSpec, KernelSpec2d, Kernels, LocalFlux, ModelSpec};

fn combine(rule: QuadratureRule, left: f64, right: f64) -> f64 {
    match rule {
        QuadratureRule::Left => left,
        QuadratureRule::Right => right,
        QuadratureRule::Mean => (left + right) / 2.0,
    }
}

fn cell(field: &[f64], p: i64) -> f64 {
    if p < 0 || p >= field.len() as i64 {
        0.0
    } else {
        field[p as usize]
    }
}

/// `c_{i+1/2} = dx sum_p mu((i - p + 1/2) dx) rule(U_p, U_{p+1})` for the
/// interfaces `i + 1/2`, `i = -1, ..., n - 1`.
pub fn naive_convolve(field: &[f64], spec: &KernelSpec, dx: f64, rule: QuadratureRule) -> Vec<f64> {
    let n = field.len() as i64;
    let mut out = Vec::new();
    for i in -1..n {
        let mut acc = 0.0;
        for p in -1..n {
            let x = (i - p) as f64 * dx + dx / 2.0;
            acc += spec.eval(x) * combine(rule, cell(field, p), cell(field, p + 1));
        }
        out.push(dx * acc);
    }
    out
}

fn numerical_flux(scheme: &SchemeConfig, lambda: f64, nu: f64, b: f64, c: f64, f: &LocalFlux) -> f64 {
    match scheme.flux {
        FluxFamily::LaxFriedrichs => nu / 2.0 * (f.eval(b) + f.eval(c)) - scheme.theta / (2.0 * lambda) * (c - b),
        FluxFamily::Godunov => {
            if nu >= 0.0 {
                nu * f.eval(b)
            } else {
                nu * f.eval(c)
            }
        }
    }
}

/// One step of the marching formula with `dt / dx` given by `ratio` and the
/// viscosity taken at `lambda`.
pub fn naive_step(
    u: &[Vec<f64>],
    model: &ModelSpec,
    scheme: &SchemeConfig,
    grid: &Grid1d,
    lambda: f64,
    ratio: f64,
) -> Vec<Vec<f64>> {
    let Kernels::OneD(kernels) = &model.kernels else {
        panic!("one-dimensional model expected");
    };
    let n = grid.n_cells;
    let dx = grid.dx();
    let sigma = |comp: &ComponentSpec, i: usize| comp.sigma.eval(grid.x_left + (i as f64 + 0.5) * dx);
    let mut out = Vec::new();
    for (k, comp) in model.components.iter().enumerate() {
        let convs: Vec<Vec<f64>> = (0..u.len())
            .map(|j| naive_convolve(&u[j], &kernels[j][k], dx, scheme.quadrature))
            .collect();
        let flux_at = |h: usize| -> f64 {
            if h == 0 || h == n {
                return 0.0;
            }
            let row: Vec<f64> = convs.iter().map(|c| c[h]).collect();
            let nu = comp.velocity.eval(&row);
            let b = sigma(comp, h - 1) * u[k][h - 1];
            let c = sigma(comp, h) * u[k][h];
            numerical_flux(scheme, lambda, nu, b, c, &comp.flux)
        };
        let mut next = Vec::new();
        for i in 0..n {
            next.push(u[k][i] - ratio * (flux_at(i + 1) - flux_at(i)));
        }
        out.push(next);
    }
    out
}

/// Brute-force interface convolution: `dx^2 sum_{p,q} mu(x - x_p, y - y_q) U[p, q]`.
fn naive_point_convolution(field: &[f64], grid: &Grid2d, spec: &KernelSpec2d, x: f64, y: f64) -> f64 {
    let dx = grid.dx();
    let mut acc = 0.0;
    for q in 0..grid.ny {
        for p in 0..grid.nx {
            let xc = grid.x_lo + (p as f64 + 0.5) * dx;
            let yc = grid.y_lo + (q as f64 + 0.5) * dx;
            acc += spec.eval(x - xc, y - yc) * field[q * grid.nx + p];
        }
    }
    dx * dx * acc
}

/// One step of the five-point scheme with mesh ratio `lambda`.
pub fn naive_step_2d(
    u: &[Vec<f64>],
    model: &ModelSpec,
    scheme: &SchemeConfig,
    grid: &Grid2d,
    lambda: f64,
) -> Vec<Vec<f64>> {
    let Kernels::TwoD { x: kx, y: ky } = &model.kernels else {
        panic!("two-dimensional model expected");
    };
    let (nx, ny) = (grid.nx, grid.ny);
    let dx = grid.dx();
    let mut out = Vec::new();
    for (k, comp) in model.components.iter().enumerate() {
        let s = comp.sigma.eval(0.0);
        let g = comp.flux_y.as_ref().unwrap();
        let vel_y = comp.velocity_y.as_ref().unwrap();
        let flux_x = |h: usize, j: usize| -> f64 {
            if h == 0 || h == nx {
                return 0.0;
            }
            let (x, y) = (grid.x_lo + h as f64 * dx, grid.y_lo + (j as f64 + 0.5) * dx);
            let row: Vec<f64> = (0..u.len())
                .map(|jj| naive_point_convolution(&u[jj], grid, &kx[jj][k], x, y))
                .collect();
            let nu = comp.velocity.eval(&row);
            numerical_flux(
                scheme,
                lambda,
                nu,
                s * u[k][j * nx + h - 1],
                s * u[k][j * nx + h],
                &comp.flux,
            )
        };
        let flux_y = |i: usize, h: usize| -> f64 {
            if h == 0 || h == ny {
                return 0.0;
            }
            let (x, y) = (grid.x_lo + (i as f64 + 0.5) * dx, grid.y_lo + h as f64 * dx);
            let row: Vec<f64> = (0..u.len())
                .map(|jj| naive_point_convolution(&u[jj], grid, &ky[jj][k], x, y))
                .collect();
            let nu = vel_y.eval(&row);
            numerical_flux(scheme, lambda, nu, s * u[k][(h - 1) * nx + i], s * u[k][h * nx + i], g)
        };
        let mut next = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                next[j * nx + i] = u[k][j * nx + i]
                    - lambda * (flux_x(i + 1, j) - flux_x(i, j))
                    - lambda * (flux_y(i, j + 1) - flux_y(i, j));
            }
        }
        out.push(next);
    }
    out
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let m = panels + panels % 2;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Composite Simpson with `10^6` panels over the support.
pub fn fine_kernel_mass(spec: &KernelSpec) -> f64 {
    let (lo, hi) = spec.support();
    simpson(|x| spec.eval(x), lo, hi, 1_000_000)
}

/// Tensor Simpson rule over the bounding square of the disk.
pub fn fine_kernel_mass_2d(spec: &KernelSpec2d, panels: usize) -> f64 {
    let r = spec.radius();
    simpson(|y| simpson(|x| spec.eval(x, y), -r, r, panels), -r, r, panels)
}
