//! Helpers shared by the property and acceptance suites.
#![allow(dead_code)]

use nonlocal_fv::flux::NumericalFlux;
use nonlocal_fv::model::LocalFlux;

/// One cell of the marching formula with frozen interface velocities:
/// `H(u) = u_i - lambda [F(nu_r, s_i u_i, s_r u_r) - F(nu_l, s_l u_l, s_i u_i)]`.
pub fn update_map(flux: &NumericalFlux, f: &LocalFlux, lambda: f64, sigma: [f64; 3], nu: [f64; 2], u: [f64; 3]) -> f64 {
    let right = flux.eval(nu[1], sigma[1] * u[1], sigma[2] * u[2], f);
    let left = flux.eval(nu[0], sigma[0] * u[0], sigma[1] * u[1], f);
    u[1] - lambda * (right - left)
}

/// Forward-difference partials of [`update_map`] in its three cell values.
pub fn update_map_partials(
    flux: &NumericalFlux,
    f: &LocalFlux,
    lambda: f64,
    sigma: [f64; 3],
    nu: [f64; 2],
    u: [f64; 3],
) -> [f64; 3] {
    let h = 1e-6;
    let base = update_map(flux, f, lambda, sigma, nu, u);
    let mut out = [0.0; 3];
    for (m, d) in out.iter_mut().enumerate() {
        let mut v = u;
        v[m] += h;
        *d = (update_map(flux, f, lambda, sigma, nu, v) - base) / h;
    }
    out
}
