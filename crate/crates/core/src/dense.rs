//! Dense materialization of black-box linear maps on small grids.
//!
//! Used by tests and cross-checks only: a map on c-component fields over
//! N^d points is turned into a (c N^d) x (c N^d) matrix by applying it to
//! the standard basis. The grid quadrature weight is uniform, so singular
//! values of the matrix coincide with L2 operator norms of the map.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{Field, TorusGrid};

/// Applies `map` to every standard basis field and stacks the images as
/// columns.
pub fn materialize(
    grid: TorusGrid,
    c_in: usize,
    c_out: usize,
    map: impl Fn(&Field) -> Result<Field>,
) -> Result<DMatrix<Complex64>> {
    let np = grid.points();
    let dim_in = c_in * np;
    let dim_out = c_out * np;
    let mut mat = DMatrix::from_element(dim_out, dim_in, Complex64::new(0.0, 0.0));
    for j in 0..dim_in {
        let mut e = Field::zeros(grid, c_in);
        e.data[j] = Complex64::new(1.0, 0.0);
        let img = map(&e)?;
        for i in 0..dim_out {
            mat[(i, j)] = img.data[i];
        }
    }
    Ok(mat)
}

/// Largest singular value of the materialized map.
pub fn spectral_norm(mat: &DMatrix<Complex64>) -> f64 {
    mat.clone().svd(false, false).singular_values[0]
}

/// Dense Hermitian matrix exponential e^{-t M}.
pub fn expm_hermitian(mat: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let sym = (mat + mat.adjoint()).unscale(2.0);
    let se = sym.symmetric_eigen();
    let n = mat.nrows();
    let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        let w = (-t * se.eigenvalues[j]).exp();
        let col = se.eigenvectors.column(j);
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] += Complex64::new(w, 0.0) * col[r] * col[c].conj();
            }
        }
    }
    out
}

/// Applies a dense matrix to a field (basis-compatible with
/// [`materialize`]).
pub fn apply_dense(grid: TorusGrid, c_out: usize, mat: &DMatrix<Complex64>, f: &Field) -> Field {
    let mut out = Field::zeros(grid, c_out);
    for i in 0..mat.nrows() {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..mat.ncols() {
            acc += mat[(i, j)] * f.data[j];
        }
        out.data[i] = acc;
    }
    out
}
