//! Periodic m x m Hermitian positive definite coefficient fields on the
//! unit cell, with exact index-arithmetic sampling of g(x/eps) on
//! commensurate grids.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{HomogError, Result};
use crate::grid::TorusGrid;

/// g sampled at unit-cell resolution. Storage is point-major:
/// `data[idx * m * m + row * m + col]`.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub grid: TorusGrid,
    pub m: usize,
    pub data: Vec<Complex64>,
}

impl CoefficientField {
    pub fn from_fn(
        grid: TorusGrid,
        m: usize,
        f: impl Fn(&[f64]) -> DMatrix<Complex64>,
    ) -> Result<Self> {
        let np = grid.points();
        let mut data = vec![Complex64::new(0.0, 0.0); np * m * m];
        for idx in 0..np {
            let x = grid.point(idx);
            let mat = f(&x[..grid.d]);
            if mat.nrows() != m || mat.ncols() != m {
                return Err(HomogError::BadCoefficient(format!(
                    "coefficient sample is {}x{}, expected {m}x{m}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            for r in 0..m {
                for c in 0..m {
                    data[idx * m * m + r * m + c] = mat[(r, c)];
                }
            }
        }
        let out = Self { grid, m, data };
        out.validate()?;
        Ok(out)
    }

    /// g built from a finite Fourier series: g(x) = sum_j coef_j e^{2 pi i k_j . x}.
    pub fn from_fourier_table(
        grid: TorusGrid,
        m: usize,
        table: &[(Vec<i64>, DMatrix<Complex64>)],
    ) -> Result<Self> {
        for (k, _) in table {
            if k.len() != grid.d {
                return Err(HomogError::BadCoefficient(format!(
                    "fourier table frequency {:?} has wrong dimension, expected {}",
                    k, grid.d
                )));
            }
        }
        Self::from_fn(grid, m, |x| {
            let mut mat = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
            for (k, coef) in table {
                let phase: f64 = k
                    .iter()
                    .zip(x)
                    .map(|(&ki, &xi)| 2.0 * std::f64::consts::PI * ki as f64 * xi)
                    .sum();
                mat += coef * Complex64::new(0.0, phase).exp();
            }
            mat
        })
    }

    /// m x m matrix at a flat cell index.
    pub fn at(&self, idx: usize) -> DMatrix<Complex64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |r, c| self.data[idx * m * m + r * m + c])
    }

    /// Checks Hermitian symmetry at every sample and positivity of the
    /// eigenvalue range; returns (g_min, g_max).
    pub fn validate(&self) -> Result<(f64, f64)> {
        let np = self.grid.points();
        let m = self.m;
        let mut g_min = f64::INFINITY;
        let mut g_max = f64::NEG_INFINITY;
        for idx in 0..np {
            let mat = self.at(idx);
            let herm_gap = (&mat - mat.adjoint()).norm();
            if herm_gap > 1e-12 * (1.0 + mat.norm()) {
                return Err(HomogError::BadCoefficient(format!(
                    "sample {idx} not Hermitian (gap {herm_gap:.3e})"
                )));
            }
            let eigs = mat.symmetric_eigen().eigenvalues;
            for &e in eigs.iter() {
                g_min = g_min.min(e);
                g_max = g_max.max(e);
            }
        }
        let _ = m;
        if g_min <= 0.0 {
            return Err(HomogError::BadCoefficient(format!(
                "coefficient not positive definite (min eigenvalue {g_min:.3e})"
            )));
        }
        Ok((g_min, g_max))
    }

    /// Cell average of g.
    pub fn mean(&self) -> DMatrix<Complex64> {
        let np = self.grid.points();
        let m = self.m;
        let mut acc = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        for idx in 0..np {
            acc += self.at(idx);
        }
        acc.unscale(np as f64)
    }

    /// Samples g(x/eps) with eps = 1/K on a fine grid by pure index
    /// arithmetic (no interpolation). Requires K * N_cell to be a multiple
    /// of the fine grid's N so that every fine point lands on a stored cell
    /// sample.
    pub fn sample_scaled(&self, fine: &TorusGrid) -> Result<Vec<Complex64>> {
        let map = scaled_index_map(&self.grid, fine)?;
        let m2 = self.m * self.m;
        let mut out = vec![Complex64::new(0.0, 0.0); fine.points() * m2];
        for (fi, &ci) in map.iter().enumerate() {
            out[fi * m2..(fi + 1) * m2].copy_from_slice(&self.data[ci * m2..(ci + 1) * m2]);
        }
        Ok(out)
    }
}

/// For each fine-grid point x_j, the cell index of frac(K x_j).
///
/// Works whenever K * N_cell is a multiple of N; then the per-axis map is
/// j -> (j * q) mod N_cell with q = K * N_cell / N.
pub fn scaled_index_map(cell: &TorusGrid, fine: &TorusGrid) -> Result<Vec<usize>> {
    if cell.d != fine.d {
        return Err(HomogError::GridMismatch(format!(
            "cell d = {} vs fine d = {}",
            cell.d, fine.d
        )));
    }
    let k = fine.k_osc;
    let n = fine.n;
    let nc = cell.n;
    if (k * nc) % n != 0 {
        return Err(HomogError::GridMismatch(format!(
            "K * N_cell = {} not a multiple of N = {n}: oscillating samples \
             would need interpolation",
            k * nc
        )));
    }
    let q = k * nc / n;
    let cell_strides = cell.strides();
    let mut map = vec![0usize; fine.points()];
    for (fi, slot) in map.iter_mut().enumerate() {
        let coords = fine.coords(fi);
        let mut ci = 0;
        for a in 0..fine.d {
            ci += ((coords[a] * q) % nc) * cell_strides[a];
        }
        *slot = ci;
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cos1d(a: f64, n: usize) -> CoefficientField {
        let grid = TorusGrid::cell(1, n).unwrap();
        CoefficientField::from_fn(grid, 1, |x| {
            DMatrix::from_element(
                1,
                1,
                Complex64::new(a + (2.0 * std::f64::consts::PI * x[0]).cos(), 0.0),
            )
        })
        .unwrap()
    }

    #[test]
    fn validation_bounds_cos1d() {
        let g = cos1d(2.0, 64);
        let (lo, hi) = g.validate().unwrap();
        assert_relative_eq!(lo, 1.0, epsilon = 1e-10);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-10);
        assert_relative_eq!(g.mean()[(0, 0)].re, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn non_positive_coefficient_rejected() {
        let grid = TorusGrid::cell(1, 16).unwrap();
        let r = CoefficientField::from_fn(grid, 1, |x| {
            DMatrix::from_element(
                1,
                1,
                Complex64::new((2.0 * std::f64::consts::PI * x[0]).cos(), 0.0),
            )
        });
        assert!(matches!(r, Err(HomogError::BadCoefficient(_))));
    }

    #[test]
    fn non_hermitian_coefficient_rejected() {
        let grid = TorusGrid::cell(1, 8).unwrap();
        let r = CoefficientField::from_fn(grid, 2, |_| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(2.0, 0.0),
                    Complex64::new(0.5, 0.1),
                    Complex64::new(0.5, 0.1),
                    Complex64::new(2.0, 0.0),
                ],
            )
        });
        assert!(matches!(r, Err(HomogError::BadCoefficient(_))));
    }

    #[test]
    fn scaled_sampling_matches_direct_evaluation() {
        let g = cos1d(2.0, 16);
        let fine = TorusGrid::new(1, 64, 4).unwrap();
        let samples = g.sample_scaled(&fine).unwrap();
        for idx in 0..fine.points() {
            let x = fine.point(idx)[0];
            let expect = 2.0 + (2.0 * std::f64::consts::PI * 4.0 * x).cos();
            assert_relative_eq!(samples[idx].re, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn incommensurate_sampling_is_an_error() {
        let g = cos1d(2.0, 16);
        // K * N_cell = 1 * 16 is not a multiple of N = 64
        let fine = TorusGrid::new(1, 64, 1).unwrap();
        assert!(matches!(
            g.sample_scaled(&fine),
            Err(HomogError::GridMismatch(_))
        ));
    }

    #[test]
    fn fourier_table_matches_closure() {
        let grid = TorusGrid::cell(1, 32).unwrap();
        let half = DMatrix::from_element(1, 1, Complex64::new(0.5, 0.0));
        let table = vec![
            (
                vec![0i64],
                DMatrix::from_element(1, 1, Complex64::new(2.0, 0.0)),
            ),
            (vec![1i64], half.clone()),
            (vec![-1i64], half),
        ];
        let g = CoefficientField::from_fourier_table(grid, 1, &table).unwrap();
        for idx in 0..grid.points() {
            let x = grid.point(idx)[0];
            let expect = 2.0 + (2.0 * std::f64::consts::PI * x).cos();
            assert_relative_eq!(g.at(idx)[(0, 0)].re, expect, epsilon = 1e-12);
        }
    }
}
