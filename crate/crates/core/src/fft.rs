//! Zero-padded FFT convolution of two-dimensional fields.
//!
//! Two real fields are packed into the real and imaginary parts of one
//! complex array, so one forward transform and one inverse transform per
//! kernel convolve both at once.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Smallest `2^a 3^b >= n`.
pub fn fast_length(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p3 = 1usize;
    while p3 < best {
        let mut m = p3;
        while m < n {
            m *= 2;
        }
        best = best.min(m);
        p3 *= 3;
    }
    best
}

/// Kernel weights on an offset box, `weights[(b - b_lo) * width + (a - a_lo)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetBox {
    pub a_lo: i64,
    pub b_lo: i64,
    pub width: usize,
    pub height: usize,
    pub weights: Vec<f64>,
}

impl OffsetBox {
    pub fn a_hi(&self) -> i64 {
        self.a_lo + self.width as i64 - 1
    }

    pub fn b_hi(&self) -> i64 {
        self.b_lo + self.height as i64 - 1
    }

    #[inline]
    pub fn get(&self, a: i64, b: i64) -> f64 {
        if a < self.a_lo || b < self.b_lo || a > self.a_hi() || b > self.b_hi() {
            return 0.0;
        }
        self.weights[(b - self.b_lo) as usize * self.width + (a - self.a_lo) as usize]
    }

    pub fn nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

/// Transforms on a `px x py` periodic grid large enough to hold every
/// requested linear convolution without wrap-around.
pub struct FftGrid {
    px: usize,
    py: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftGrid")
            .field("px", &self.px)
            .field("py", &self.py)
            .finish()
    }
}

/// A kernel transformed onto an [`FftGrid`], including the output scaling.
#[derive(Debug, Clone)]
pub struct SpectralKernel {
    hat: Vec<Complex64>,
}

impl FftGrid {
    /// Grid for fields of `nx x ny` cells, outputs of up to `(nx + 1) x (ny + 1)`
    /// values, and the given kernels.
    pub fn new(nx: usize, ny: usize, kernels: &[&OffsetBox]) -> Self {
        let reach_x = kernels
            .iter()
            .map(|k| k.a_hi().max(-k.a_lo).max(0) as usize)
            .max()
            .unwrap_or(0);
        let reach_y = kernels
            .iter()
            .map(|k| k.b_hi().max(-k.b_lo).max(0) as usize)
            .max()
            .unwrap_or(0);
        let px = fast_length(nx + 1 + reach_x + 1);
        let py = fast_length(ny + 1 + reach_y + 1);
        let mut planner = FftPlanner::new();
        FftGrid {
            px,
            py,
            fwd_x: planner.plan_fft_forward(px),
            inv_x: planner.plan_fft_inverse(px),
            fwd_y: planner.plan_fft_forward(py),
            inv_y: planner.plan_fft_inverse(py),
        }
    }

    pub fn size(&self) -> (usize, usize) {
        (self.px, self.py)
    }

    /// Transform of `kernel`, with `scale` (and the inverse-transform
    /// normalization) folded in.
    pub fn kernel(&self, kernel: &OffsetBox, scale: f64) -> SpectralKernel {
        let (px, py) = (self.px as i64, self.py as i64);
        let mut data = vec![Complex64::new(0.0, 0.0); self.px * self.py];
        let norm = scale / (self.px * self.py) as f64;
        for b in kernel.b_lo..=kernel.b_hi() {
            for a in kernel.a_lo..=kernel.a_hi() {
                let w = kernel.get(a, b);
                if w != 0.0 {
                    let i = a.rem_euclid(px) as usize;
                    let j = b.rem_euclid(py) as usize;
                    data[j * self.px + i] += Complex64::new(w * norm, 0.0);
                }
            }
        }
        self.forward_rows(&mut data, self.py);
        self.columns(&mut data, &self.fwd_y);
        SpectralKernel { hat: data }
    }

    fn forward_rows(&self, data: &mut [Complex64], rows: usize) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fwd_x.get_inplace_scratch_len()];
        for row in data.chunks_exact_mut(self.px).take(rows) {
            self.fwd_x.process_with_scratch(row, &mut scratch);
        }
    }

    fn columns(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut col = vec![Complex64::new(0.0, 0.0); self.py];
        for i in 0..self.px {
            for (j, c) in col.iter_mut().enumerate() {
                *c = data[j * self.px + i];
            }
            plan.process_with_scratch(&mut col, &mut scratch);
            for (j, c) in col.iter().enumerate() {
                data[j * self.px + i] = *c;
            }
        }
    }

    /// Spectrum of `re + i im`, both row-major `nx x ny`.
    pub fn forward(&self, re: &[f64], im: Option<&[f64]>, nx: usize, ny: usize) -> Vec<Complex64> {
        let mut data = vec![Complex64::new(0.0, 0.0); self.px * self.py];
        for j in 0..ny {
            for i in 0..nx {
                let v = Complex64::new(re[j * nx + i], im.map_or(0.0, |m| m[j * nx + i]));
                data[j * self.px + i] = v;
            }
        }
        self.forward_rows(&mut data, ny);
        self.columns(&mut data, &self.fwd_y);
        data
    }

    /// Convolves a spectrum with a kernel and returns the real and imaginary
    /// parts of the first `out_nx x out_ny` outputs.
    pub fn apply(
        &self,
        spectrum: &[Complex64],
        kernel: &SpectralKernel,
        out_nx: usize,
        out_ny: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut data: Vec<Complex64> = spectrum.iter().zip(&kernel.hat).map(|(a, b)| a * b).collect();
        self.columns(&mut data, &self.inv_y);
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inv_x.get_inplace_scratch_len()];
        let mut re = Vec::with_capacity(out_nx * out_ny);
        let mut im = Vec::with_capacity(out_nx * out_ny);
        for row in data.chunks_exact_mut(self.px).take(out_ny) {
            self.inv_x.process_with_scratch(row, &mut scratch);
            for c in &row[..out_nx] {
                re.push(c.re);
                im.push(c.im);
            }
        }
        (re, im)
    }
}

/// `out[j * out_nx + i] = scale * sum_{a,b} w(a, b) field[(j - b) * nx + (i - a)]`
/// with the field zero outside `nx x ny`.
pub fn direct_convolve(
    field: &[f64],
    nx: usize,
    ny: usize,
    kernel: &OffsetBox,
    scale: f64,
    out_nx: usize,
    out_ny: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; out_nx * out_ny];
    for j in 0..out_ny as i64 {
        for i in 0..out_nx as i64 {
            let mut acc = 0.0;
            for b in kernel.b_lo..=kernel.b_hi() {
                let q = j - b;
                if q < 0 || q >= ny as i64 {
                    continue;
                }
                let row = &field[q as usize * nx..(q as usize + 1) * nx];
                let base = (b - kernel.b_lo) as usize * kernel.width;
                for (da, w) in kernel.weights[base..base + kernel.width].iter().enumerate() {
                    let p = i - (kernel.a_lo + da as i64);
                    if p >= 0 && p < nx as i64 && *w != 0.0 {
                        acc += w * row[p as usize];
                    }
                }
            }
            out[j as usize * out_nx + i as usize] = scale * acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fast_lengths() {
        assert_eq!(fast_length(1), 1);
        assert_eq!(fast_length(5), 6);
        assert_eq!(fast_length(7), 8);
        assert_eq!(fast_length(963), 972);
        assert_eq!(fast_length(1024), 1024);
        assert_eq!(fast_length(1025), 1152);
    }

    #[test]
    fn fft_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (nx, ny) = (23, 17);
        let kernel = OffsetBox {
            a_lo: -3,
            b_lo: -2,
            width: 7,
            height: 6,
            weights: (0..42).map(|_| rng.gen_range(0.0..1.0)).collect(),
        };
        let f1: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(0.0..2.0)).collect();
        let f2: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(0.0..2.0)).collect();
        let grid = FftGrid::new(nx, ny, &[&kernel]);
        let k = grid.kernel(&kernel, 0.25);
        let spec = grid.forward(&f1, Some(&f2), nx, ny);
        let (re, im) = grid.apply(&spec, &k, nx + 1, ny + 1);
        let d1 = direct_convolve(&f1, nx, ny, &kernel, 0.25, nx + 1, ny + 1);
        let d2 = direct_convolve(&f2, nx, ny, &kernel, 0.25, nx + 1, ny + 1);
        for (a, b) in re.iter().zip(&d1).chain(im.iter().zip(&d2)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn direct_sum_of_impulse_reproduces_kernel() {
        let kernel = OffsetBox {
            a_lo: 0,
            b_lo: -1,
            width: 2,
            height: 2,
            weights: vec![1.0, 2.0, 3.0, 4.0],
        };
        let mut f = vec![0.0; 25];
        f[2 * 5 + 2] = 1.0;
        let out = direct_convolve(&f, 5, 5, &kernel, 1.0, 5, 5);
        // impulse at (2, 2): out(2 + a, 2 + b) = w(a, b)
        assert_eq!(out[5 + 2], 1.0);
        assert_eq!(out[5 + 3], 2.0);
        assert_eq!(out[2 * 5 + 2], 3.0);
        assert_eq!(out[2 * 5 + 3], 4.0);
        assert_eq!(out.iter().sum::<f64>(), 10.0);
    }
}
