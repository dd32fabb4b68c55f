//! Periodic cell problem b(D)* g (b(D) Lambda + 1_m) = 0 and the effective
//! matrix g0 = int_cell g (b(D) Lambda + 1_m) dx.
//!
//! Columns of Lambda are solved independently by preconditioned conjugate
//! gradients on the mean-zero subspace; the preconditioner is the exact
//! per-mode inverse of the constant-coefficient operator built from the
//! cell average of g.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::coeff::CoefficientField;
use crate::error::{HomogError, Result};
use crate::grid::{forward, inner, inverse, l2_norm, Field, FourierField, TorusGrid};
use crate::operator::{apply_b_spectral, OperatorAeps};
use crate::symbol::Symbol;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Mean-zero periodic solution Lambda of the cell problem; column j is the
/// response to the constant right-hand side e_j.
#[derive(Debug, Clone)]
pub struct CorrectorField {
    pub grid: TorusGrid,
    pub n: usize,
    pub m: usize,
    /// m columns, each an n-component field on the cell grid.
    pub columns: Vec<Field>,
    /// Final relative residual per column.
    pub residuals: Vec<f64>,
}

/// The constant matrix g0 of the effective operator.
#[derive(Debug, Clone)]
pub struct EffectiveMatrix {
    pub g0: DMatrix<Complex64>,
}

impl CorrectorField {
    /// Lambda(x) as an n x m matrix at a cell index.
    pub fn at(&self, idx: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.m, |r, c| self.columns[c].at(r, idx))
    }

    /// Largest entrywise cell average (mean-zero certificate).
    pub fn max_mean(&self) -> f64 {
        let np = self.grid.points();
        let mut max = 0.0f64;
        for col in &self.columns {
            for comp in 0..self.n {
                let s: Complex64 = (0..np).map(|i| col.at(comp, i)).sum();
                max = max.max((s / np as f64).norm());
            }
        }
        max
    }

    /// Lambda(x/eps), n x m row-major per fine-grid point.
    pub fn sample_scaled(&self, fine: &TorusGrid) -> Result<Vec<Complex64>> {
        let map = crate::coeff::scaled_index_map(&self.grid, fine)?;
        let (n, m) = (self.n, self.m);
        let mut out = vec![Complex64::new(0.0, 0.0); fine.points() * n * m];
        for (fi, &ci) in map.iter().enumerate() {
            for r in 0..n {
                for c in 0..m {
                    out[fi * n * m + r * m + c] = self.columns[c].at(r, ci);
                }
            }
        }
        Ok(out)
    }

    /// L2 norm of Lambda over the cell (Frobenius over entries).
    pub fn l2_norm(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| l2_norm(c).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Exact inverse of the mean-coefficient operator on the mean-zero
/// subspace, used as the CG preconditioner.
struct MeanPreconditioner {
    grid: TorusGrid,
    n: usize,
    /// Per-mode n x n inverse of b(2 pi k)* g_mean b(2 pi k); zero block at
    /// k = 0.
    inv: Vec<Complex64>,
}

impl MeanPreconditioner {
    fn new(grid: TorusGrid, sym: &Symbol, g_mean: &DMatrix<Complex64>) -> Result<Self> {
        let n = sym.n;
        let np = grid.points();
        let mut inv = vec![Complex64::new(0.0, 0.0); np * n * n];
        for idx in 1..np {
            let b = sym.at_freq(&grid.freq(idx)[..grid.d]);
            let block = b.adjoint() * g_mean * &b;
            let binv = block.try_inverse().ok_or_else(|| HomogError::NotPositive {
                k: grid.freq(idx)[..grid.d].to_vec(),
                eig: 0.0,
            })?;
            for r in 0..n {
                for c in 0..n {
                    inv[idx * n * n + r * n + c] = binv[(r, c)];
                }
            }
        }
        Ok(Self { grid, n, inv })
    }

    fn apply(&self, f: &Field) -> Field {
        let n = self.n;
        let np = self.grid.points();
        let fh = forward(f);
        let mut out_h = FourierField::zeros(self.grid, n);
        for idx in 1..np {
            for r in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..n {
                    acc += self.inv[idx * n * n + r * n + c] * fh.data[c * np + idx];
                }
                out_h.data[r * np + idx] = acc;
            }
        }
        inverse(&out_h)
    }
}

/// Solves the cell problem for all m columns of Lambda.
pub fn solve_cell_problem(
    g: &CoefficientField,
    sym: &Symbol,
    tol: f64,
    max_iters: usize,
) -> Result<CorrectorField> {
    g.validate()?;
    let grid = g.grid;
    let op = OperatorAeps::new(grid, sym, g)?; // K = 1 on the cell grid
    let precond = MeanPreconditioner::new(grid, sym, &g.mean())?;

    let results: Vec<Result<(Field, f64)>> = (0..sym.m)
        .into_par_iter()
        .map(|j| {
            let rhs = cell_rhs(g, sym, j)?;
            pcg_mean_zero(&op, &precond, &rhs, tol, max_iters)
        })
        .collect();

    let mut columns = Vec::with_capacity(sym.m);
    let mut residuals = Vec::with_capacity(sym.m);
    for r in results {
        let (col, res) = r?;
        columns.push(col);
        residuals.push(res);
    }
    Ok(CorrectorField {
        grid,
        n: sym.n,
        m: sym.m,
        columns,
        residuals,
    })
}

/// rhs_j = -b(D)* (g e_j); automatically mean-zero since b(0) = 0.
fn cell_rhs(g: &CoefficientField, sym: &Symbol, j: usize) -> Result<Field> {
    let grid = g.grid;
    let np = grid.points();
    let m = sym.m;
    let mut gcol = Field::zeros(grid, m);
    for idx in 0..np {
        for r in 0..m {
            gcol.data[r * np + idx] = g.data[idx * m * m + r * m + j];
        }
    }
    let gh = forward(&gcol);
    let rh = crate::operator::apply_b_adjoint_spectral(sym, &gh);
    let mut rhs = inverse(&rh);
    rhs.scale(Complex64::new(-1.0, 0.0));
    Ok(rhs)
}

/// Preconditioned CG for the Hermitian non-negative cell operator on the
/// mean-zero subspace. Returns (solution, relative residual).
fn pcg_mean_zero(
    op: &OperatorAeps,
    precond: &MeanPreconditioner,
    rhs: &Field,
    tol: f64,
    max_iters: usize,
) -> Result<(Field, f64)> {
    let rhs_norm = l2_norm(rhs);
    let mut x = Field::zeros(rhs.grid, rhs.c);
    if rhs_norm == 0.0 {
        return Ok((x, 0.0));
    }
    let mut r = rhs.clone();
    let mut z = precond.apply(&r);
    let mut p = z.clone();
    let mut rz = inner(&r, &z).re;
    let mut rel = 1.0;
    for _ in 0..max_iters {
        let ap = op.apply(&p)?;
        let pap = inner(&ap, &p).re;
        if pap <= 0.0 {
            break;
        }
        let alpha = Complex64::new(rz / pap, 0.0);
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        rel = l2_norm(&r) / rhs_norm;
        if rel <= tol {
            return Ok((x, rel));
        }
        z = precond.apply(&r);
        let rz_new = inner(&r, &z).re;
        let beta = Complex64::new(rz_new / rz, 0.0);
        rz = rz_new;
        let mut p_new = z.clone();
        p_new.axpy(beta, &p);
        p = p_new;
    }
    Err(HomogError::NoConvergence {
        iters: max_iters,
        residual: rel,
    })
}

/// g0 = |cell|^{-1} int g(x) (b(D) Lambda(x) + 1_m) dx.
pub fn effective_matrix(
    lam: &CorrectorField,
    g: &CoefficientField,
    sym: &Symbol,
) -> Result<EffectiveMatrix> {
    let grid = g.grid;
    let np = grid.points();
    let m = sym.m;
    // b(D) lambda_j per column, in physical space
    let flux: Vec<Field> = lam
        .columns
        .iter()
        .map(|col| {
            let ch = forward(col);
            inverse(&apply_b_spectral(sym, &ch))
        })
        .collect();
    let mut g0 = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for j in 0..m {
        // column j of (b(D) Lambda + 1_m), then averaged g * column
        for idx in 0..np {
            for r in 0..m {
                let mut bcol = flux[j].at(r, idx);
                if r == j {
                    bcol += ONE;
                }
                for row in 0..m {
                    g0[(row, j)] += g.data[idx * m * m + row * m + r] * bcol;
                }
            }
        }
    }
    g0.unscale_mut(np as f64);

    let herm_gap = (&g0 - g0.adjoint()).norm();
    if herm_gap > 1e-10 * (1.0 + g0.norm()) {
        return Err(HomogError::BadCoefficient(format!(
            "effective matrix not Hermitian (gap {herm_gap:.3e})"
        )));
    }
    // positivity of the induced symbols M(k) at a spread of nonzero k
    let mut probes: Vec<Vec<i64>> = Vec::new();
    for a in 0..sym.d {
        for s in [1i64, -1, 3] {
            let mut k = vec![0i64; sym.d];
            k[a] = s;
            probes.push(k);
        }
    }
    if sym.d > 1 {
        probes.push(vec![1; sym.d]);
    }
    for k in &probes {
        let xi: Vec<f64> = k.iter().map(|&ki| ki as f64).collect();
        let b = sym.at(&xi);
        let mk = b.adjoint() * &g0 * &b;
        let eigs = ((&mk + mk.adjoint()).unscale(2.0)).symmetric_eigen().eigenvalues;
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(HomogError::NotPositive {
                k: k.clone(),
                eig: min,
            });
        }
    }
    Ok(EffectiveMatrix { g0 })
}
