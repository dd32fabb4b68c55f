//! Torus discretization and vector-valued fields in physical and frequency space.
//!
//! The domain is the unit torus [0,1)^d sampled on a uniform grid with N
//! points per axis (N a power of two). The oscillation parameter is
//! eps = 1/K with K dividing N, so that a 1-periodic coefficient evaluated
//! at x/eps is exactly representable on the grid.
//!
//! Frequency convention: integer frequency vectors k in [-N/2, N/2)^d, a
//! field is f(x) = sum_k coef(k) e^{2 pi i k.x}, and D = -i grad acts per
//! mode as multiplication by 2 pi k.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rand::Rng;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{HomogError, Result};

/// Default cap on total complex samples per field (d * c * N^d is checked
/// against this at construction sites that allocate).
pub const DEFAULT_SAMPLE_CAP: usize = 1 << 27;

/// Uniform grid on the unit torus [0,1)^d.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    /// Spatial dimension (1, 2, or 3).
    pub d: usize,
    /// Points per axis; power of two.
    pub n: usize,
    /// Oscillation denominator, eps = 1/K. K = 1 for unit-cell grids.
    pub k_osc: usize,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize, k_osc: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(HomogError::InvalidGrid(format!("d = {d}, expected 1..=3")));
        }
        if n == 0 || !n.is_power_of_two() {
            return Err(HomogError::InvalidGrid(format!(
                "N = {n} must be a power of two"
            )));
        }
        if k_osc == 0 || n % k_osc != 0 {
            return Err(HomogError::InvalidGrid(format!(
                "K = {k_osc} must divide N = {n}"
            )));
        }
        if n < 4 * k_osc {
            return Err(HomogError::InvalidGrid(format!(
                "N = {n} < 4K = {} (need at least 4 samples per oscillation)",
                4 * k_osc
            )));
        }
        let grid = Self { d, n, k_osc };
        if grid.points().saturating_mul(d) > DEFAULT_SAMPLE_CAP {
            return Err(HomogError::InvalidGrid(format!(
                "d*N^d = {} exceeds sample cap {DEFAULT_SAMPLE_CAP}",
                grid.points() * d
            )));
        }
        Ok(grid)
    }

    /// Grid for the unit cell itself (no oscillation, K = 1).
    pub fn cell(d: usize, n: usize) -> Result<Self> {
        Self::new(d, n, 1)
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.k_osc as f64
    }

    /// Total number of grid points N^d.
    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Row-major strides (last axis contiguous).
    pub fn strides(&self) -> [usize; 3] {
        let mut s = [0usize; 3];
        let mut acc = 1;
        for a in (0..self.d).rev() {
            s[a] = acc;
            acc *= self.n;
        }
        s
    }

    /// Integer coordinates of the flat index.
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        let mut rem = idx;
        for a in (0..self.d).rev() {
            c[a] = rem % self.n;
            rem /= self.n;
        }
        c
    }

    /// Physical point x = j/N for flat index.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = c[a] as f64 / self.n as f64;
        }
        x
    }

    /// Signed integer frequency for FFT bin i on one axis: k in [-N/2, N/2).
    pub fn freq_of_bin(&self, bin: usize) -> i64 {
        if bin < self.n / 2 {
            bin as i64
        } else {
            bin as i64 - self.n as i64
        }
    }

    /// Frequency vector of a flat spectral index.
    pub fn freq(&self, idx: usize) -> [i64; 3] {
        let c = self.coords(idx);
        let mut k = [0i64; 3];
        for a in 0..self.d {
            k[a] = self.freq_of_bin(c[a]);
        }
        k
    }

    /// Flat spectral index of an integer frequency vector (components in
    /// [-N/2, N/2)).
    pub fn index_of_freq(&self, k: &[i64]) -> usize {
        let strides = self.strides();
        let mut idx = 0;
        for a in 0..self.d {
            let bin = k[a].rem_euclid(self.n as i64) as usize;
            idx += bin * strides[a];
        }
        idx
    }
}

/// Complex field on a torus grid with `c` components per point.
///
/// Storage is component-major: `data[comp * points + idx]`.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: TorusGrid,
    pub c: usize,
    pub data: Vec<Complex64>,
}

/// Fourier coefficients of a [`Field`], same layout, indexed by frequency
/// bins. Under the crate's normalization, Plancherel reads
/// mean_x |f|^2 = sum_k |coef(k)|^2.
#[derive(Debug, Clone)]
pub struct FourierField {
    pub grid: TorusGrid,
    pub c: usize,
    pub data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: TorusGrid, c: usize) -> Self {
        Self {
            grid,
            c,
            data: vec![Complex64::new(0.0, 0.0); c * grid.points()],
        }
    }

    pub fn from_fn(grid: TorusGrid, c: usize, f: impl Fn(&[f64], usize) -> Complex64) -> Self {
        let np = grid.points();
        let mut data = vec![Complex64::new(0.0, 0.0); c * np];
        for idx in 0..np {
            let x = grid.point(idx);
            for comp in 0..c {
                data[comp * np + idx] = f(&x[..grid.d], comp);
            }
        }
        Self { grid, c, data }
    }

    pub fn random(grid: TorusGrid, c: usize, rng: &mut impl Rng) -> Self {
        let np = grid.points();
        let data = (0..c * np)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Self { grid, c, data }
    }

    #[inline]
    pub fn at(&self, comp: usize, idx: usize) -> Complex64 {
        self.data[comp * self.grid.points() + idx]
    }

    #[inline]
    pub fn at_mut(&mut self, comp: usize, idx: usize) -> &mut Complex64 {
        let np = self.grid.points();
        &mut self.data[comp * np + idx]
    }

    pub fn scale(&mut self, s: Complex64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// self += s * other
    pub fn axpy(&mut self, s: Complex64, other: &Field) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other);
        out
    }
}

impl FourierField {
    pub fn zeros(grid: TorusGrid, c: usize) -> Self {
        Self {
            grid,
            c,
            data: vec![Complex64::new(0.0, 0.0); c * grid.points()],
        }
    }

    #[inline]
    pub fn at(&self, comp: usize, idx: usize) -> Complex64 {
        self.data[comp * self.grid.points() + idx]
    }

    #[inline]
    pub fn at_mut(&mut self, comp: usize, idx: usize) -> &mut Complex64 {
        let np = self.grid.points();
        &mut self.data[comp * np + idx]
    }
}

static FFT_CACHE: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = FFT_CACHE.lock().unwrap();
    cache
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            planner.plan_fft(
                n,
                if forward {
                    FftDirection::Forward
                } else {
                    FftDirection::Inverse
                },
            )
        })
        .clone()
}

/// In-place d-dimensional FFT of one component plane.
fn fft_nd(grid: &TorusGrid, plane: &mut [Complex64], forward: bool) {
    let n = grid.n;
    let np = grid.points();
    let strides = grid.strides();
    let fft = plan(n, forward);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..grid.d {
        let stride = strides[axis];
        // enumerate line bases: all indices with coordinate 0 on `axis`
        let lines = np / n;
        for l in 0..lines {
            // decompose l into the other axes' coordinates
            let mut base = 0;
            let mut rem = l;
            for a in (0..grid.d).rev() {
                if a == axis {
                    continue;
                }
                base += (rem % n) * strides[a];
                rem /= n;
            }
            if stride == 1 {
                fft.process(&mut plane[base..base + n]);
            } else {
                for j in 0..n {
                    line[j] = plane[base + j * stride];
                }
                fft.process(&mut line);
                for j in 0..n {
                    plane[base + j * stride] = line[j];
                }
            }
        }
    }
}

/// Forward transform: samples -> coefficients of e^{2 pi i k.x}.
pub fn forward(f: &Field) -> FourierField {
    let np = f.grid.points();
    let mut out = FourierField {
        grid: f.grid,
        c: f.c,
        data: f.data.clone(),
    };
    let scale = 1.0 / np as f64;
    for comp in 0..f.c {
        let plane = &mut out.data[comp * np..(comp + 1) * np];
        fft_nd(&f.grid, plane, true);
        for v in plane.iter_mut() {
            *v *= scale;
        }
    }
    out
}

/// Inverse transform: coefficients -> samples.
pub fn inverse(ff: &FourierField) -> Field {
    let np = ff.grid.points();
    let mut out = Field {
        grid: ff.grid,
        c: ff.c,
        data: ff.data.clone(),
    };
    for comp in 0..ff.c {
        let plane = &mut out.data[comp * np..(comp + 1) * np];
        fft_nd(&ff.grid, plane, false);
    }
    out
}

/// L2 norm on the torus: sqrt of the grid mean of |f|^2 summed over
/// components. Exact quadrature for trigonometric polynomials.
pub fn l2_norm(f: &Field) -> f64 {
    let np = f.grid.points();
    let s: f64 = f.data.iter().map(|v| v.norm_sqr()).sum();
    (s / np as f64).sqrt()
}

/// Inner product <f,g> = mean_x sum_c f_c(x) conj(g_c(x)), linear in f.
pub fn inner(f: &Field, g: &Field) -> Complex64 {
    debug_assert_eq!(f.data.len(), g.data.len());
    let np = f.grid.points();
    let s: Complex64 = f
        .data
        .iter()
        .zip(&g.data)
        .map(|(a, b)| a * b.conj())
        .sum();
    s / np as f64
}

/// Norm straight from coefficients (Plancherel side).
pub fn spectral_norm(ff: &FourierField) -> f64 {
    ff.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(1, 64, 8).is_ok());
        assert!(TorusGrid::new(1, 63, 1).is_err()); // not power of two
        assert!(TorusGrid::new(1, 64, 3).is_err()); // K does not divide N
        assert!(TorusGrid::new(1, 16, 8).is_err()); // N < 4K
        assert!(TorusGrid::new(4, 16, 1).is_err()); // d out of range
    }

    #[test]
    fn constant_field_transforms_to_zero_mode() {
        let grid = TorusGrid::cell(2, 8).unwrap();
        let v = Complex64::new(2.5, -0.5);
        let f = Field::from_fn(grid, 1, |_, _| v);
        let ff = forward(&f);
        for idx in 0..grid.points() {
            let expect = if idx == 0 { v } else { Complex64::new(0.0, 0.0) };
            assert!((ff.at(0, idx) - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_transforms_to_unit_coefficient() {
        let grid = TorusGrid::cell(2, 16).unwrap();
        let k0 = [3i64, -5i64];
        let f = Field::from_fn(grid, 1, |x, _| {
            let phase = 2.0 * std::f64::consts::PI * (k0[0] as f64 * x[0] + k0[1] as f64 * x[1]);
            Complex64::new(0.0, phase).exp()
        });
        let ff = forward(&f);
        let idx = grid.index_of_freq(&k0);
        assert!((ff.at(0, idx) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let total: f64 = ff.data.iter().map(|v| v.norm_sqr()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn delta_at_zero_gives_constant_one() {
        let grid = TorusGrid::cell(1, 8).unwrap();
        let mut ff = FourierField::zeros(grid, 1);
        *ff.at_mut(0, 0) = Complex64::new(1.0, 0.0);
        let f = inverse(&ff);
        for idx in 0..grid.points() {
            assert!((f.at(0, idx) - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn round_trip_and_plancherel_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, n) in [(1usize, 64usize), (2, 16), (3, 8)] {
            let grid = TorusGrid::cell(d, n).unwrap();
            let f = Field::random(grid, 2, &mut rng);
            let ff = forward(&f);
            let back = inverse(&ff);
            let diff = l2_norm(&f.sub(&back)) / l2_norm(&f);
            assert!(diff < 1e-12, "round trip {diff}");
            // direct summation oracle for the norm
            let direct: f64 = f.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.points() as f64;
            let plancherel: f64 = ff.data.iter().map(|v| v.norm_sqr()).sum();
            assert_relative_eq!(direct, plancherel, max_relative = 1e-12);
            assert_relative_eq!(l2_norm(&f), plancherel.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn conjugate_symmetric_coefficients_give_real_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = TorusGrid::cell(1, 32).unwrap();
        let mut ff = FourierField::zeros(grid, 1);
        for k in 1..8i64 {
            let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            *ff.at_mut(0, grid.index_of_freq(&[k])) = v;
            *ff.at_mut(0, grid.index_of_freq(&[-k])) = v.conj();
        }
        *ff.at_mut(0, 0) = Complex64::new(0.3, 0.0);
        let f = inverse(&ff);
        let max_im = f.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(max_im < 1e-12);
    }

    #[test]
    fn transform_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = TorusGrid::cell(2, 8).unwrap();
        let f = Field::random(grid, 1, &mut rng);
        let g = Field::random(grid, 1, &mut rng);
        let (a, b) = (Complex64::new(1.3, -0.2), Complex64::new(-0.4, 2.0));
        let mut comb = Field::zeros(grid, 1);
        comb.axpy(a, &f);
        comb.axpy(b, &g);
        let lhs = forward(&comb);
        let ff = forward(&f);
        let fg = forward(&g);
        let mut max = 0.0f64;
        for i in 0..grid.points() {
            max = max.max((lhs.at(0, i) - a * ff.at(0, i) - b * fg.at(0, i)).norm());
        }
        assert!(max < 1e-12);
    }

    #[test]
    fn refinement_preserves_bandlimited_coefficients() {
        let g1 = TorusGrid::cell(1, 16).unwrap();
        let g2 = TorusGrid::cell(1, 32).unwrap();
        let func = |x: &[f64]| {
            let t = 2.0 * std::f64::consts::PI * x[0];
            Complex64::new((t.cos()) + 0.5 * (3.0 * t).sin(), 0.2 * (2.0 * t).cos())
        };
        let f1 = Field::from_fn(g1, 1, |x, _| func(x));
        let f2 = Field::from_fn(g2, 1, |x, _| func(x));
        let c1 = forward(&f1);
        let c2 = forward(&f2);
        for k in -4i64..=4 {
            let a = c1.at(0, g1.index_of_freq(&[k]));
            let b = c2.at(0, g2.index_of_freq(&[k]));
            assert!((a - b).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn l2_norm_trivial_cases() {
        let grid = TorusGrid::cell(1, 16).unwrap();
        let one = Field::from_fn(grid, 1, |_, _| Complex64::new(1.0, 0.0));
        assert_relative_eq!(l2_norm(&one), 1.0, epsilon = 1e-14);
        let wave = Field::from_fn(grid, 1, |x, _| {
            Complex64::new(0.0, 2.0 * std::f64::consts::PI * x[0]).exp()
        });
        assert_relative_eq!(l2_norm(&wave), 1.0, epsilon = 1e-13);
    }
}
