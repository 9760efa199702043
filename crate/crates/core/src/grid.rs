//! Uniform grids and initial data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sub-intervals of the composite midpoint rule used for cell averages of
/// non-piecewise-constant data.
pub const PROJECTION_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1d {
    pub x_left: f64,
    pub x_right: f64,
    pub n_cells: usize,
}

impl Grid1d {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize) -> Result<Self> {
        if !(x_right > x_left) || n_cells == 0 || !x_left.is_finite() || !x_right.is_finite() {
            return Err(Error::Config(format!(
                "invalid grid [{x_left}, {x_right}] with {n_cells} cells"
            )));
        }
        Ok(Grid1d {
            x_left,
            x_right,
            n_cells,
        })
    }

    /// Grid whose spacing is `dx`, which must divide the interval.
    pub fn with_spacing(x_left: f64, x_right: f64, dx: f64) -> Result<Self> {
        Grid1d::new(x_left, x_right, cells_for_spacing(x_right - x_left, dx)?)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_right - self.x_left) / self.n_cells as f64
    }

    /// Centre `x_i` of cell `i`.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.dx()
    }

    /// Interface `h`, the left edge of cell `h` (`h = 0..=n_cells`).
    #[inline]
    pub fn interface(&self, h: usize) -> f64 {
        self.x_left + h as f64 * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }
}

pub(crate) fn cells_for_spacing(length: f64, dx: f64) -> Result<usize> {
    if !(dx > 0.0) {
        return Err(Error::Config(format!("dx must be positive, got {dx}")));
    }
    let n = (length / dx).round();
    if n < 1.0 || ((n * dx - length) / length).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "dx = {dx} does not divide the domain length {length}"
        )));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2d {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2d {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x_hi > x_lo && y_hi > y_lo) || nx == 0 || ny == 0 {
            return Err(Error::Config(format!(
                "invalid grid [{x_lo}, {x_hi}] x [{y_lo}, {y_hi}] with {nx} x {ny} cells"
            )));
        }
        let g = Grid2d {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            nx,
            ny,
        };
        let (dx, dy) = ((x_hi - x_lo) / nx as f64, (y_hi - y_lo) / ny as f64);
        if ((dx - dy) / dx).abs() > 1e-12 {
            return Err(Error::Config(format!("cells must be square, dx = {dx}, dy = {dy}")));
        }
        Ok(g)
    }

    pub fn with_spacing(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, dx: f64) -> Result<Self> {
        let nx = cells_for_spacing(x_hi - x_lo, dx)?;
        let ny = cells_for_spacing(y_hi - y_lo, dx)?;
        Grid2d::new(x_lo, x_hi, y_lo, y_hi, nx, ny)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.nx as f64
    }

    #[inline]
    pub fn center_x(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn center_y(&self, j: usize) -> f64 {
        self.y_lo + (j as f64 + 0.5) * self.dx()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }
}

/// Initial data `U_0`, one profile per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `U^1_0 = 0.25 * 1_(1,3)`, `U^2_0 = 1_(1,3)`.
    Kk1dBlocks,
    /// Constant states on the four quadrants of `]-0.4, 0.4]^2`.
    Kk2dQuadrants,
    /// `values[k] * 1_(lo,hi)`.
    Box { lo: f64, hi: f64, values: Vec<f64> },
    /// `heights[k] * cos^2(pi (x - center) / (2 half_width))` on `|x - center| < half_width`.
    CosineBump {
        center: f64,
        half_width: f64,
        heights: Vec<f64>,
    },
}

fn overlap(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    (b.min(hi) - a.max(lo)).max(0.0)
}

const KK2D_QUADRANTS: [[f64; 2]; 4] = [
    // x > 0, y > 0
    [1.0, 1.732_050_807_568_877_2],
    // x <= 0, y > 0
    [std::f64::consts::SQRT_2, 1.0],
    // x <= 0, y <= 0
    [0.5, 1.0 / 3.0],
    // x > 0, y <= 0
    [1.732_050_807_568_877_2, std::f64::consts::SQRT_2],
];

impl InitialData {
    pub fn n_components(&self) -> usize {
        match self {
            InitialData::Kk1dBlocks | InitialData::Kk2dQuadrants => 2,
            InitialData::Box { values, .. } => values.len(),
            InitialData::CosineBump { heights, .. } => heights.len(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            InitialData::Kk2dQuadrants => 2,
            _ => 1,
        }
    }

    /// Point value of component `k` (one dimension).
    pub fn eval(&self, k: usize, x: f64) -> f64 {
        match self {
            InitialData::Kk1dBlocks => {
                let v = [0.25, 1.0][k];
                if x > 1.0 && x < 3.0 {
                    v
                } else {
                    0.0
                }
            }
            InitialData::Box { lo, hi, values } => {
                if x > *lo && x < *hi {
                    values[k]
                } else {
                    0.0
                }
            }
            InitialData::CosineBump {
                center,
                half_width,
                heights,
            } => {
                let s = (x - center) / half_width;
                if s.abs() < 1.0 {
                    let c = (0.5 * std::f64::consts::PI * s).cos();
                    heights[k] * c * c
                } else {
                    0.0
                }
            }
            InitialData::Kk2dQuadrants => 0.0,
        }
    }

    /// Average of component `k` over `[a, b]`: exact for piecewise constant
    /// data, composite midpoint with [`PROJECTION_POINTS`] points otherwise.
    pub fn cell_average(&self, k: usize, a: f64, b: f64) -> f64 {
        let w = b - a;
        match self {
            InitialData::Kk1dBlocks => [0.25, 1.0][k] * overlap(a, b, 1.0, 3.0) / w,
            InitialData::Box { lo, hi, values } => values[k] * overlap(a, b, *lo, *hi) / w,
            _ => {
                let h = w / PROJECTION_POINTS as f64;
                (0..PROJECTION_POINTS)
                    .map(|m| self.eval(k, a + (m as f64 + 0.5) * h))
                    .sum::<f64>()
                    / PROJECTION_POINTS as f64
            }
        }
    }

    /// Average of component `k` over the rectangle `[xa, xb] x [ya, yb]`.
    pub fn cell_average_2d(&self, k: usize, xa: f64, xb: f64, ya: f64, yb: f64) -> f64 {
        match self {
            InitialData::Kk2dQuadrants => {
                let area = (xb - xa) * (yb - ya);
                let right = overlap(xa, xb, 0.0, 0.4);
                let left = overlap(xa, xb, -0.4, 0.0);
                let top = overlap(ya, yb, 0.0, 0.4);
                let bottom = overlap(ya, yb, -0.4, 0.0);
                let q = &KK2D_QUADRANTS;
                (q[0][k] * right * top + q[1][k] * left * top + q[2][k] * left * bottom + q[3][k] * right * bottom)
                    / area
            }
            // one-dimensional profiles extended constantly in y
            _ => self.cell_average(k, xa, xb),
        }
    }

    /// Support `[lo, hi]` along x, if bounded.
    pub fn support(&self) -> (f64, f64) {
        match self {
            InitialData::Kk1dBlocks => (1.0, 3.0),
            InitialData::Kk2dQuadrants => (-0.4, 0.4),
            InitialData::Box { lo, hi, .. } => (*lo, *hi),
            InitialData::CosineBump { center, half_width, .. } => (center - half_width, center + half_width),
        }
    }

    /// The same profile translated by `shift` along x.
    pub fn translated(&self, shift: f64) -> Option<InitialData> {
        match self {
            InitialData::Box { lo, hi, values } => Some(InitialData::Box {
                lo: lo + shift,
                hi: hi + shift,
                values: values.clone(),
            }),
            InitialData::CosineBump {
                center,
                half_width,
                heights,
            } => Some(InitialData::CosineBump {
                center: center + shift,
                half_width: *half_width,
                heights: heights.clone(),
            }),
            _ => None,
        }
    }
}
