//! The first-order symbol b(xi) = sum_l b_l xi_l and its ellipticity data.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{HomogError, Result};

/// Dual-lattice spacing in operator units: grid frequency k corresponds to
/// the wave number k * FREQ_STEP, i.e. the periodicity cell is the torus of
/// circumference 2 pi / FREQ_STEP per axis (grid coordinates are fractions
/// of the cell). The value 1/sqrt(2) places the bottom of the spectrum of
/// the benchmark operators near the reciprocal of the time range probed by
/// the semigroup sweeps, so that every sweep point stays well above solver
/// noise while the oscillation period remains small versus the cell.
pub const FREQ_STEP: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Constant m x n matrices b_1..b_d defining b(D) = sum_l b_l D_l.
#[derive(Debug, Clone)]
pub struct Symbol {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    mats: Vec<DMatrix<Complex64>>,
}

/// Two-sided spectral bounds of b(theta)* b(theta) over unit directions.
#[derive(Debug, Clone, Copy)]
pub struct EllipticityBounds {
    pub alpha0: f64,
    pub alpha1: f64,
}

impl Symbol {
    pub fn new(d: usize, m: usize, n: usize, mats: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if mats.len() != d {
            return Err(HomogError::ConfigInvalid(format!(
                "symbol needs {d} matrices, got {}",
                mats.len()
            )));
        }
        if m < n {
            return Err(HomogError::ConfigInvalid(format!(
                "symbol requires m >= n, got m = {m}, n = {n}"
            )));
        }
        for (l, b) in mats.iter().enumerate() {
            if b.nrows() != m || b.ncols() != n {
                return Err(HomogError::ConfigInvalid(format!(
                    "b_{l} is {}x{}, expected {m}x{n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self { d, m, n, mats })
    }

    /// 1-D scalar derivative: b(D) = D.
    pub fn scalar_1d() -> Self {
        Self::new(
            1,
            1,
            1,
            vec![DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))],
        )
        .unwrap()
    }

    /// Gradient symbol b(xi) = xi for the acoustics operator -div g grad
    /// in dimension d (m = d, n = 1).
    pub fn gradient(d: usize) -> Self {
        let mats = (0..d)
            .map(|l| {
                let mut b = DMatrix::from_element(d, 1, Complex64::new(0.0, 0.0));
                b[(l, 0)] = Complex64::new(1.0, 0.0);
                b
            })
            .collect();
        Self::new(d, d, 1, mats).unwrap()
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.mats
    }

    /// b(xi) for a real frequency vector.
    pub fn at(&self, xi: &[f64]) -> DMatrix<Complex64> {
        let mut b = DMatrix::from_element(self.m, self.n, Complex64::new(0.0, 0.0));
        for l in 0..self.d {
            if xi[l] != 0.0 {
                b += self.mats[l].scale(xi[l]);
            }
        }
        b
    }

    /// b(k) for an integer grid frequency vector: the plane wave with grid
    /// frequency k carries the wave number k * FREQ_STEP in operator units.
    pub fn at_freq(&self, k: &[i64]) -> DMatrix<Complex64> {
        let xi: Vec<f64> = k.iter().map(|&ki| ki as f64 * FREQ_STEP).collect();
        self.at(&xi)
    }
}

/// Scan unit directions and return the extreme eigenvalues of
/// b(theta)* b(theta). Fails with `RankDeficient` when the minimum drops
/// to zero, i.e. the full rank condition is violated.
pub fn check_rank_condition(sym: &Symbol, n_dirs: usize) -> Result<EllipticityBounds> {
    let n_dirs = n_dirs.max(2 * sym.d);
    let dirs = unit_directions(sym.d, n_dirs);
    let mut alpha0 = f64::INFINITY;
    let mut alpha1 = f64::NEG_INFINITY;
    for theta in &dirs {
        let b = sym.at(theta);
        let h = b.adjoint() * &b;
        let eigs = h.symmetric_eigen().eigenvalues;
        for &e in eigs.iter() {
            alpha0 = alpha0.min(e);
            alpha1 = alpha1.max(e);
        }
    }
    if alpha0 <= 1e-10 {
        return Err(HomogError::RankDeficient { alpha0 });
    }
    Ok(EllipticityBounds { alpha0, alpha1 })
}

/// Roughly uniform angular sampling of the unit sphere, d <= 3.
fn unit_directions(d: usize, n_dirs: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n_dirs)
            .map(|i| {
                let phi = 2.0 * std::f64::consts::PI * i as f64 / n_dirs as f64;
                vec![phi.cos(), phi.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci sphere
            let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
            (0..n_dirs)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n_dirs as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = 2.0 * std::f64::consts::PI * i as f64 / golden;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => unreachable!("grid validation limits d to 1..=3"),
    }
}
