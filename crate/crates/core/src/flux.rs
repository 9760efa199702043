//! Interface numerical fluxes and the CFL mesh ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::QuadratureRule;
use crate::model::{LocalFlux, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluxFamily {
    #[serde(rename = "lf")]
    LaxFriedrichs,
    #[serde(rename = "godunov")]
    Godunov,
}

impl FluxFamily {
    pub fn name(self) -> &'static str {
        match self {
            FluxFamily::LaxFriedrichs => "lf",
            FluxFamily::Godunov => "godunov",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub flux: FluxFamily,
    pub theta: f64,
    /// Fraction of the admissible mesh ratio actually used.
    pub cfl_safety: f64,
    pub quadrature: QuadratureRule,
    /// Negates every numerical flux. Fault-injection hook for the entropy audit.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub debug_flux_sign_flip: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            flux: FluxFamily::LaxFriedrichs,
            theta: 1.0 / 3.0,
            cfl_safety: 1.0,
            quadrature: QuadratureRule::Mean,
            debug_flux_sign_flip: false,
        }
    }
}

impl SchemeConfig {
    pub fn godunov() -> Self {
        SchemeConfig {
            flux: FluxFamily::Godunov,
            ..Default::default()
        }
    }

    /// Checks `theta` against `(0, 2 / (3 max_k ||sigma^k||_inf))`, the safety
    /// fraction, and flux monotonicity for the Godunov family.
    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        match self.flux {
            FluxFamily::LaxFriedrichs => {
                let upper = 2.0 / (3.0 * model.sigma_sup());
                if !(self.theta > 0.0 && self.theta < upper) {
                    return Err(Error::Config(format!(
                        "theta = {} outside the admissible range (0, {upper})",
                        self.theta
                    )));
                }
            }
            FluxFamily::Godunov => {
                for (k, c) in model.components.iter().enumerate() {
                    for f in std::iter::once(&c.flux).chain(c.flux_y.as_ref()) {
                        if !f.is_nondecreasing() {
                            return Err(Error::UnsupportedFlux {
                                component: k + 1,
                                flux: f.name(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `(nu/2)(f(b) + f(c)) - theta/(2 lambda) (c - b)`
#[inline]
pub fn lf_interface_flux(nu: f64, ubar_left: f64, ubar_right: f64, f: &LocalFlux, theta: f64, lambda: f64) -> f64 {
    0.5 * nu * (f.eval(ubar_left) + f.eval(ubar_right)) - theta / (2.0 * lambda) * (ubar_right - ubar_left)
}

/// Upwind flux for a nondecreasing `f`, scaled by the signed velocity.
#[inline]
pub fn godunov_interface_flux(nu: f64, ubar_left: f64, ubar_right: f64, f: &LocalFlux) -> f64 {
    if nu >= 0.0 {
        nu * f.eval(ubar_left)
    } else {
        nu * f.eval(ubar_right)
    }
}

/// A numerical flux `F(nu, b, c)` with its parameters bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalFlux {
    pub family: FluxFamily,
    pub theta: f64,
    /// Mesh ratio entering the Lax–Friedrichs viscosity.
    pub lambda: f64,
    pub sign: f64,
}

impl NumericalFlux {
    pub fn new(scheme: &SchemeConfig, lambda: f64) -> Self {
        NumericalFlux {
            family: scheme.flux,
            theta: scheme.theta,
            lambda,
            sign: if scheme.debug_flux_sign_flip { -1.0 } else { 1.0 },
        }
    }

    #[inline]
    pub fn eval(&self, nu: f64, ubar_left: f64, ubar_right: f64, f: &LocalFlux) -> f64 {
        let v = match self.family {
            FluxFamily::LaxFriedrichs => lf_interface_flux(nu, ubar_left, ubar_right, f, self.theta, self.lambda),
            FluxFamily::Godunov => godunov_interface_flux(nu, ubar_left, ubar_right, f),
        };
        self.sign * v
    }
}

/// Crandall–Majda numerical entropy flux
///
/// ```text
/// G(p, q, alpha) = F(s_i (p v alpha/s_i), s_{i+1} (q v alpha/s_{i+1}))
///                - F(s_i (p ^ alpha/s_i), s_{i+1} (q ^ alpha/s_{i+1}))
/// ```
///
/// with `p, q` cell values (not adapted) and `s` the cell coefficients.
#[allow(clippy::too_many_arguments)]
pub fn crandall_majda_entropy_flux(
    flux: &NumericalFlux,
    f: &LocalFlux,
    nu: f64,
    sigma_left: f64,
    sigma_right: f64,
    p: f64,
    q: f64,
    alpha: f64,
) -> f64 {
    let kl = alpha / sigma_left;
    let kr = alpha / sigma_right;
    let upper = flux.eval(nu, sigma_left * p.max(kl), sigma_right * q.max(kr), f);
    let lower = flux.eval(nu, sigma_left * p.min(kl), sigma_right * q.min(kr), f);
    upper - lower
}

/// Largest mesh ratio `lambda = dt / dx` admitted by the CFL condition of
/// the chosen flux family, times `cfl_safety`.
///
/// Lax–Friedrichs:
/// `min_k min(1, 4 - 6 theta s_k, 6 theta s_k) / (1 + 6 s_k |f^k|_Lip ||nu^k||_inf)`;
/// Godunov: `1 / (6 max_k s_k |f^k|_Lip ||nu^k||_inf)`, capped at 1.
pub fn max_stable_lambda(model: &ModelSpec, scheme: &SchemeConfig) -> Result<f64> {
    let lambda = model
        .components
        .iter()
        .map(|c| directional_lambda(scheme, c.sigma.sigma_sup(), c.flux.lipschitz(), c.velocity_bounds.sup))
        .fold(f64::INFINITY, f64::min);
    checked_lambda(lambda, scheme)
}

/// The one-dimensional CFL bound for a single component and direction.
pub fn directional_lambda(scheme: &SchemeConfig, sigma_sup: f64, lip_f: f64, nu_sup: f64) -> f64 {
    match scheme.flux {
        FluxFamily::LaxFriedrichs => {
            let s = sigma_sup;
            let num = 1.0f64.min(4.0 - 6.0 * scheme.theta * s).min(6.0 * scheme.theta * s);
            num / (1.0 + 6.0 * s * lip_f * nu_sup)
        }
        FluxFamily::Godunov => {
            let m = sigma_sup * lip_f * nu_sup;
            if m == 0.0 {
                1.0
            } else {
                (1.0 / (6.0 * m)).min(1.0)
            }
        }
    }
}

pub(crate) fn checked_lambda(lambda: f64, scheme: &SchemeConfig) -> Result<f64> {
    // theta on the edge of its range leaves only rounding noise in the numerator
    if !(lambda > 1e-12) || !lambda.is_finite() {
        return Err(Error::DegenerateModel(format!(
            "CFL condition admits no positive mesh ratio (lambda = {lambda:e})"
        )));
    }
    Ok(lambda * scheme.cfl_safety)
}
