//! Problem definitions: local fluxes, nonlocal velocities, convolution
//! kernels and the discontinuous coefficient, plus the builtin models.
//!
//! A model is a coupled system of `N` equations
//!
//! ```text
//! d_t U^k + d_x( f^k(sigma^k(x) U^k) nu^k((mu * U)^k) ) = 0
//! ```
//!
//! where `(mu * U)^k` is the vector `(mu^{1,k} * U^1, ..., mu^{N,k} * U^N)`.
//! In two dimensions a second directional flux `g^k`, velocity `nu_bar^k`
//! and kernel matrix `mu_bar` enter through the `y` derivative, with
//! `sigma == 1`.
//!
//! Everything here is plain data; model functions are pure and cheap to
//! evaluate, so a [`ModelSpec`] can be cloned into solvers freely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Panels used by the composite Simpson rule that normalizes 1D kernels.
pub const NORMALIZATION_PANELS: usize = 200_000;
/// Panels per axis for the iterated rule that normalizes 2D kernels.
pub const NORMALIZATION_PANELS_2D: usize = 4_000;
/// Sample count for the sup norms of kernel derivatives.
pub const DERIVATIVE_SAMPLES: usize = 100_000;

/// Composite Simpson rule on `[a, b]` with an even number of panels.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(a + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even)
}

/// Local flux `f^k`, applied to the adapted variable `sigma * U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalFlux {
    Identity,
    Linear {
        slope: f64,
    },
    /// `u (1 - u)`, Lipschitz constant taken over `[0, 1]`. Not monotone.
    Logistic,
}

impl LocalFlux {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            LocalFlux::Identity => u,
            LocalFlux::Linear { slope } => slope * u,
            LocalFlux::Logistic => u * (1.0 - u),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            LocalFlux::Identity => 1.0,
            LocalFlux::Linear { slope } => slope.abs(),
            LocalFlux::Logistic => 1.0,
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        match self {
            LocalFlux::Identity => true,
            LocalFlux::Linear { slope } => *slope >= 0.0,
            LocalFlux::Logistic => false,
        }
    }

    pub fn name(&self) -> String {
        match self {
            LocalFlux::Identity => "identity".into(),
            LocalFlux::Linear { slope } => format!("linear({slope})"),
            LocalFlux::Logistic => "logistic".into(),
        }
    }
}

/// Nonlocal velocity `nu^k`, a function of the row of convolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Velocity {
    Constant {
        value: f64,
    },
    /// `(1 - |c|^2)^3`
    KeyfitzKranzer,
    /// `sin(|c|^2)`
    SinSquaredNorm,
    /// `cos(|c|^2)`
    CosSquaredNorm,
}

impl Velocity {
    #[inline]
    pub fn eval(&self, c: &[f64]) -> f64 {
        match self {
            Velocity::Constant { value } => *value,
            Velocity::KeyfitzKranzer => {
                let s = 1.0 - c.iter().map(|v| v * v).sum::<f64>();
                s * s * s
            }
            Velocity::SinSquaredNorm => c.iter().map(|v| v * v).sum::<f64>().sin(),
            Velocity::CosSquaredNorm => c.iter().map(|v| v * v).sum::<f64>().cos(),
        }
    }
}

/// Sup norm, Lipschitz constant and gradient Lipschitz constant of a
/// velocity over the invariant region documented by the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityBounds {
    pub sup: f64,
    pub lip: f64,
    pub lip_grad: f64,
}

/// Spatial coefficient `sigma^k`, evaluated at cell centres only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSpec {
    Constant {
        value: f64,
    },
    /// Staircase with plateaus `a_n / 3` on `[a_n, a_{n+1})`, `a_n = 3(1 - 0.8^n)`,
    /// accumulating at `x = 3`.
    Staircase,
    /// Right-continuous piecewise constant: `values[0]` left of `breaks[0]`,
    /// `values[i]` on `[breaks[i-1], breaks[i])`.
    Steps {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Left end point `a_n = 3 (1 - 0.8^n)` of the n-th staircase plateau.
#[inline]
pub fn staircase_point(n: i32) -> f64 {
    3.0 * (1.0 - 0.8f64.powi(n))
}

/// Right-continuous staircase coefficient with infinitely many jumps.
///
/// Plateaus start at `n = 1` so the value on `(a_1, a_2)` matches the
/// left branch `a_1 / 3` and the function stays monotone.
pub fn sigma_staircase_eval(x: f64) -> f64 {
    let a1 = staircase_point(1);
    if x < a1 {
        return a1 / 3.0;
    }
    if x >= 3.0 {
        return 1.0;
    }
    let mut n = 1;
    // a_n reaches 3.0 in floating point, so this terminates for x < 3.
    while staircase_point(n + 1) <= x {
        n += 1;
    }
    staircase_point(n) / 3.0
}

impl SigmaSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SigmaSpec::Constant { value } => *value,
            SigmaSpec::Staircase => sigma_staircase_eval(x),
            SigmaSpec::Steps { breaks, values } => {
                let idx = breaks.partition_point(|b| *b <= x);
                values[idx]
            }
        }
    }

    pub fn sigma_min(&self) -> f64 {
        match self {
            SigmaSpec::Constant { value } => *value,
            SigmaSpec::Staircase => staircase_point(1) / 3.0,
            SigmaSpec::Steps { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn sigma_sup(&self) -> f64 {
        match self {
            SigmaSpec::Constant { value } => *value,
            SigmaSpec::Staircase => 1.0,
            SigmaSpec::Steps { values, .. } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Total variation. Exact for every variant (the staircase is monotone).
    pub fn bv_seminorm(&self) -> f64 {
        match self {
            SigmaSpec::Constant { .. } => 0.0,
            SigmaSpec::Staircase => 1.0 - staircase_point(1) / 3.0,
            SigmaSpec::Steps { values, .. } => values.windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let SigmaSpec::Steps { breaks, values } = self {
            if values.len() != breaks.len() + 1 {
                return Err(Error::InvalidModel(format!(
                    "sigma steps need {} values for {} breaks, got {}",
                    breaks.len() + 1,
                    breaks.len(),
                    values.len()
                )));
            }
            if breaks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidModel("sigma breaks must be increasing".into()));
            }
        }
        let min = self.sigma_min();
        if !(min > 0.0) || !min.is_finite() || !self.sigma_sup().is_finite() {
            return Err(Error::InvalidModel(format!(
                "sigma must be bounded away from zero, found inf sigma = {min}"
            )));
        }
        Ok(())
    }
}

/// Unnormalized one-dimensional kernel profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelShape {
    /// Constant 1 on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// `(-x (width + x))^exponent` on `(-width, 0)`.
    PowerBump { width: f64, exponent: f64 },
    /// Piecewise linear hat, 0 at `lo` and `hi`, 1 at `peak`.
    Hat { lo: f64, peak: f64, hi: f64 },
}

impl KernelShape {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            KernelShape::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            KernelShape::PowerBump { width, exponent } => {
                if x > -width && x < 0.0 {
                    (-x * (width + x)).powf(exponent)
                } else {
                    0.0
                }
            }
            KernelShape::Hat { lo, peak, hi } => {
                if x <= lo || x >= hi {
                    0.0
                } else if x <= peak {
                    (x - lo) / (peak - lo)
                } else {
                    (hi - x) / (hi - peak)
                }
            }
        }
    }

    /// First and second derivatives away from kinks.
    fn derivatives(&self, x: f64) -> (f64, f64) {
        match *self {
            KernelShape::Uniform { .. } => (0.0, 0.0),
            KernelShape::PowerBump { width, exponent: p } => {
                if x > -width && x < 0.0 {
                    let g = -x * (width + x);
                    let dg = -width - 2.0 * x;
                    let d1 = p * g.powf(p - 1.0) * dg;
                    let d2 = p * (p - 1.0) * g.powf(p - 2.0) * dg * dg - 2.0 * p * g.powf(p - 1.0);
                    (d1, d2)
                } else {
                    (0.0, 0.0)
                }
            }
            KernelShape::Hat { lo, peak, hi } => {
                if x <= lo || x >= hi {
                    (0.0, 0.0)
                } else if x <= peak {
                    (1.0 / (peak - lo), 0.0)
                } else {
                    (-1.0 / (hi - peak), 0.0)
                }
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            KernelShape::Uniform { lo, hi } => (lo, hi),
            KernelShape::PowerBump { width, .. } => (-width, 0.0),
            KernelShape::Hat { lo, hi, .. } => (lo, hi),
        }
    }
}

/// A compactly supported kernel `mu(x) = scale * shape(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub shape: KernelShape,
    /// Normalization constant `L`.
    pub scale: f64,
}

impl KernelSpec {
    /// Kernel with `scale = 1`.
    pub fn raw(shape: KernelShape) -> Self {
        KernelSpec { shape, scale: 1.0 }
    }

    /// Kernel scaled to unit mass by composite Simpson quadrature.
    pub fn normalized(shape: KernelShape) -> Result<Self> {
        let raw = KernelSpec::raw(shape);
        let mass = raw.integral();
        if !(mass > 0.0) {
            return Err(Error::InvalidModel(format!("kernel {:?} has zero mass", raw.shape)));
        }
        Ok(KernelSpec {
            scale: 1.0 / mass,
            ..raw
        })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.scale * self.shape.eval(x)
    }

    pub fn support(&self) -> (f64, f64) {
        self.shape.support()
    }

    pub fn integral(&self) -> f64 {
        let (lo, hi) = self.support();
        simpson(|x| self.eval(x), lo, hi, NORMALIZATION_PANELS)
    }

    /// `(||mu'||_inf, ||mu''||_inf)` from dense sampling.
    pub fn derivative_sup_norms(&self) -> (f64, f64) {
        let (lo, hi) = self.support();
        let h = (hi - lo) / DERIVATIVE_SAMPLES as f64;
        let mut d1 = 0.0f64;
        let mut d2 = 0.0f64;
        for i in 0..=DERIVATIVE_SAMPLES {
            let (a, b) = self.shape.derivatives(lo + i as f64 * h);
            d1 = d1.max(a.abs());
            d2 = d2.max(b.abs());
        }
        (self.scale * d1, self.scale * d2)
    }
}

/// Unnormalized two-dimensional kernel profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelShape2d {
    /// `(eta^2 - x^2 - y^2)^3` on the disk of radius `eta`.
    RadialCubic { eta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec2d {
    pub shape: KernelShape2d,
    pub scale: f64,
}

impl KernelSpec2d {
    pub fn raw(shape: KernelShape2d) -> Self {
        KernelSpec2d { shape, scale: 1.0 }
    }

    pub fn normalized(shape: KernelShape2d) -> Result<Self> {
        let raw = KernelSpec2d::raw(shape);
        let mass = raw.integral();
        if !(mass > 0.0) {
            return Err(Error::InvalidModel(format!("kernel {:?} has zero mass", raw.shape)));
        }
        Ok(KernelSpec2d {
            scale: 1.0 / mass,
            ..raw
        })
    }

    pub fn radius(&self) -> f64 {
        match self.shape {
            KernelShape2d::RadialCubic { eta } => eta,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.shape {
            KernelShape2d::RadialCubic { eta } => {
                let s = eta * eta - x * x - y * y;
                if s > 0.0 {
                    self.scale * s * s * s
                } else {
                    0.0
                }
            }
        }
    }

    /// Iterated Simpson rule: over each horizontal chord of the disk, then
    /// across chords. Zero outside the disk.
    pub fn integral(&self) -> f64 {
        let r = self.radius();
        simpson(
            |y| {
                let half = (r * r - y * y).max(0.0).sqrt();
                if half == 0.0 {
                    0.0
                } else {
                    simpson(|x| self.eval(x, y), -half, half, NORMALIZATION_PANELS_2D / 2)
                }
            },
            -r,
            r,
            NORMALIZATION_PANELS_2D,
        )
    }

    /// `(||d_x mu||_inf, ||d_y mu||_inf)` sampled on a 400 x 400 grid.
    pub fn gradient_sup_norms(&self) -> (f64, f64) {
        let r = self.radius();
        let n = 400;
        let h = 2.0 * r / n as f64;
        let mut gx = 0.0f64;
        let mut gy = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                let x = -r + i as f64 * h;
                let y = -r + j as f64 * h;
                match self.shape {
                    KernelShape2d::RadialCubic { eta } => {
                        let s = eta * eta - x * x - y * y;
                        if s > 0.0 {
                            gx = gx.max((6.0 * x * s * s).abs());
                            gy = gy.max((6.0 * y * s * s).abs());
                        }
                    }
                }
            }
        }
        (self.scale * gx, self.scale * gy)
    }
}

/// Known closed-form solutions, used by the exact-solution rate harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactSolution {
    /// `U(t, x) = U_0(x - speed t)`.
    Translation { speed: f64 },
}

/// Data of one equation of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub flux: LocalFlux,
    pub velocity: Velocity,
    pub velocity_bounds: VelocityBounds,
    pub sigma: SigmaSpec,
    /// `g^k` (two dimensions only).
    pub flux_y: Option<LocalFlux>,
    /// `nu_bar^k` (two dimensions only).
    pub velocity_y: Option<Velocity>,
    pub velocity_y_bounds: Option<VelocityBounds>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernels {
    /// `mu^{j,k}`, indexed `[j][k]`.
    OneD(Vec<Vec<KernelSpec>>),
    /// `mu^{j,k}` for the x flux and `mu_bar^{j,k}` for the y flux.
    TwoD {
        x: Vec<Vec<KernelSpec2d>>,
        y: Vec<Vec<KernelSpec2d>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub id: String,
    pub components: Vec<ComponentSpec>,
    pub kernels: Kernels,
    pub exact: Option<ExactSolution>,
}

impl ModelSpec {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dimension(&self) -> usize {
        match self.kernels {
            Kernels::OneD(_) => 1,
            Kernels::TwoD { .. } => 2,
        }
    }

    pub fn sigma_sup(&self) -> f64 {
        self.components.iter().map(|c| c.sigma.sigma_sup()).fold(0.0, f64::max)
    }

    /// Checks the structural hypotheses: `f^k(0) = 0`, `inf sigma^k > 0`,
    /// finite nonnegative constants and a square kernel matrix.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_components();
        if n == 0 {
            return Err(Error::InvalidModel("model has no components".into()));
        }
        for (k, c) in self.components.iter().enumerate() {
            if c.flux.eval(0.0) != 0.0 {
                return Err(Error::InvalidModel(format!("f^{}(0) != 0", k + 1)));
            }
            c.sigma.validate()?;
            let mut bounds = vec![c.velocity_bounds];
            bounds.extend(c.velocity_y_bounds);
            for b in bounds {
                for v in [b.sup, b.lip, b.lip_grad] {
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "velocity constants of component {} must be finite and nonnegative",
                            k + 1
                        )));
                    }
                }
            }
        }
        let square = |rows: usize, cols: Vec<usize>| {
            if rows != n || cols.iter().any(|&c| c != n) {
                Err(Error::DimensionMismatch {
                    expected: n,
                    found: rows,
                })
            } else {
                Ok(())
            }
        };
        match &self.kernels {
            Kernels::OneD(m) => square(m.len(), m.iter().map(|r| r.len()).collect())?,
            Kernels::TwoD { x, y } => {
                square(x.len(), x.iter().map(|r| r.len()).collect())?;
                square(y.len(), y.iter().map(|r| r.len()).collect())?;
                for (k, c) in self.components.iter().enumerate() {
                    if c.flux_y.is_none() || c.velocity_y.is_none() || c.velocity_y_bounds.is_none() {
                        return Err(Error::InvalidModel(format!(
                            "two-dimensional component {} lacks y flux or velocity",
                            k + 1
                        )));
                    }
                    if c.flux_y.as_ref().map(|g| g.eval(0.0)) != Some(0.0) {
                        return Err(Error::InvalidModel(format!("g^{}(0) != 0", k + 1)));
                    }
                    if c.sigma.bv_seminorm() != 0.0 {
                        return Err(Error::InvalidModel(
                            "two-dimensional models require a constant sigma".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Kernel of the one-dimensional Keyfitz–Kranzer experiment:
/// `L (-x (0.125 + x))^{5/2}` on `(-0.125, 0)`.
pub fn kk1d_kernel() -> KernelSpec {
    KernelSpec::normalized(KernelShape::PowerBump {
        width: 0.125,
        exponent: 2.5,
    })
    .expect("builtin kernel has positive mass")
}

/// Nonlocal Keyfitz–Kranzer system with the staircase coefficient.
///
/// Convolutions of nonnegative data with this unit-mass kernel are
/// nonnegative; the velocity constants are taken over the invariant region
/// `{a, b >= 0, a^2 + b^2 <= 2}`, which contains every convolution value
/// reached from the builtin initial data (`|c| <= 1.04` at `t = 0`).
pub fn builtin_kk1d() -> ModelSpec {
    let mu = kk1d_kernel();
    let component = ComponentSpec {
        flux: LocalFlux::Identity,
        velocity: Velocity::KeyfitzKranzer,
        velocity_bounds: VelocityBounds {
            sup: 1.0,
            lip: 8.5,
            lip_grad: 64.0,
        },
        sigma: SigmaSpec::Staircase,
        flux_y: None,
        velocity_y: None,
        velocity_y_bounds: None,
    };
    ModelSpec {
        id: "kk1d".into(),
        components: vec![component.clone(), component],
        kernels: Kernels::OneD(vec![vec![mu.clone(), mu.clone()], vec![mu.clone(), mu]]),
        exact: None,
    }
}

pub const KK2D_DEFAULT_ETA: f64 = 0.4;

/// Two-dimensional nonlocal Keyfitz–Kranzer system with `sigma == 1`.
///
/// Velocity constants hold for nonnegative convolution values with
/// `|c| <= 2` (the preset run peaks at `|c| = 1.96`).
pub fn builtin_kk2d(eta: f64) -> Result<ModelSpec> {
    if !(eta > 0.0) {
        return Err(Error::InvalidModel(format!(
            "kernel radius must be positive, got {eta}"
        )));
    }
    let mu = KernelSpec2d::normalized(KernelShape2d::RadialCubic { eta })?;
    let bounds = VelocityBounds {
        sup: 1.0,
        lip: 4.0,
        lip_grad: 32.0,
    };
    let component = ComponentSpec {
        flux: LocalFlux::Identity,
        velocity: Velocity::SinSquaredNorm,
        velocity_bounds: bounds,
        sigma: SigmaSpec::Constant { value: 1.0 },
        flux_y: Some(LocalFlux::Identity),
        velocity_y: Some(Velocity::CosSquaredNorm),
        velocity_y_bounds: Some(bounds),
    };
    let matrix = vec![vec![mu.clone(), mu.clone()], vec![mu.clone(), mu]];
    Ok(ModelSpec {
        id: "kk2d".into(),
        components: vec![component.clone(), component],
        kernels: Kernels::TwoD {
            x: matrix.clone(),
            y: matrix,
        },
        exact: None,
    })
}

/// Scalar transport at unit speed: `N = 1`, `f = id`, `nu == 1`, `sigma == 1`.
pub fn builtin_linear_advection() -> ModelSpec {
    let mu =
        KernelSpec::normalized(KernelShape::Uniform { lo: -0.1, hi: 0.0 }).expect("uniform kernel has positive mass");
    ModelSpec {
        id: "linadv".into(),
        components: vec![ComponentSpec {
            flux: LocalFlux::Identity,
            velocity: Velocity::Constant { value: 1.0 },
            velocity_bounds: VelocityBounds {
                sup: 1.0,
                lip: 0.0,
                lip_grad: 0.0,
            },
            sigma: SigmaSpec::Constant { value: 1.0 },
            flux_y: None,
            velocity_y: None,
            velocity_y_bounds: None,
        }],
        kernels: Kernels::OneD(vec![vec![mu]]),
        exact: Some(ExactSolution::Translation { speed: 1.0 }),
    }
}

/// Looks up a builtin by its string id.
pub fn builtin(id: &str) -> Result<ModelSpec> {
    match id {
        "kk1d" => Ok(builtin_kk1d()),
        "kk2d" => builtin_kk2d(KK2D_DEFAULT_ETA),
        "linadv" => Ok(builtin_linear_advection()),
        other => Err(Error::Config(format!(
            "unknown model `{other}` (expected kk1d, kk2d or linadv)"
        ))),
    }
}
