//! Matrix-free application of A_eps = b(D)* g(x/eps) b(D) and of the
//! effective operator A0 = b(D)* g0 b(D).
//!
//! A_eps is applied pseudo-spectrally: transform, multiply per mode by
//! b(2 pi k), inverse transform, pointwise multiply by the oscillating
//! coefficient samples, transform, multiply by b(2 pi k)*, inverse
//! transform. A0 is diagonal per Fourier mode with n x n blocks
//! M(k) = b(2 pi k)* g0 b(2 pi k), so its resolvent and semigroup are
//! evaluated exactly from per-mode Hermitian eigendecompositions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::coeff::CoefficientField;
use crate::error::{HomogError, Result};
use crate::grid::{forward, inverse, Field, FourierField, TorusGrid};
use crate::symbol::Symbol;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Immutable handle for applying A_eps on a fixed grid.
pub struct OperatorAeps {
    pub grid: TorusGrid,
    pub sym: Symbol,
    /// g(x/eps), m x m row-major per grid point.
    g_scaled: Vec<Complex64>,
    /// Cell average of g, used by constant-coefficient preconditioners.
    g_mean: DMatrix<Complex64>,
    /// b(2 pi k), m x n row-major per mode.
    bk: Vec<Complex64>,
}

impl OperatorAeps {
    /// `grid.k_osc` carries the oscillation denominator K; `g` is stored at
    /// unit-cell resolution and gets sampled by index arithmetic.
    pub fn new(grid: TorusGrid, sym: &Symbol, g: &CoefficientField) -> Result<Self> {
        if g.m != sym.m {
            return Err(HomogError::ConfigInvalid(format!(
                "coefficient is {}x{} but symbol has m = {}",
                g.m, g.m, sym.m
            )));
        }
        if sym.d != grid.d {
            return Err(HomogError::GridMismatch(format!(
                "symbol d = {} vs grid d = {}",
                sym.d, grid.d
            )));
        }
        let g_scaled = g.sample_scaled(&grid)?;
        let bk = precompute_bk(&grid, sym);
        Ok(Self {
            grid,
            sym: sym.clone(),
            g_scaled,
            g_mean: g.mean(),
            bk,
        })
    }

    /// Cell average of the coefficient.
    pub fn g_mean(&self) -> &DMatrix<Complex64> {
        &self.g_mean
    }

    pub fn eps(&self) -> f64 {
        self.grid.eps()
    }

    /// A_eps u for an n-component field.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        check_field(&self.grid, self.sym.n, u)?;
        let (m, n) = (self.sym.m, self.sym.n);
        let np = self.grid.points();
        let uh = forward(u);
        // flux = b(D) u in frequency space
        let mut flux_h = FourierField::zeros(self.grid, m);
        for idx in 0..np {
            let b = &self.bk[idx * m * n..(idx + 1) * m * n];
            for r in 0..m {
                let mut acc = ZERO;
                for c in 0..n {
                    acc += b[r * n + c] * uh.data[c * np + idx];
                }
                flux_h.data[r * np + idx] = acc;
            }
        }
        let mut flux = inverse(&flux_h);
        // pointwise multiply by g(x/eps)
        let mut tmp = vec![ZERO; m];
        for idx in 0..np {
            let gm = &self.g_scaled[idx * m * m..(idx + 1) * m * m];
            for r in 0..m {
                let mut acc = ZERO;
                for c in 0..m {
                    acc += gm[r * m + c] * flux.data[c * np + idx];
                }
                tmp[r] = acc;
            }
            for r in 0..m {
                flux.data[r * np + idx] = tmp[r];
            }
        }
        let gh = forward(&flux);
        // b(D)* back to state space
        let mut out_h = FourierField::zeros(self.grid, n);
        for idx in 0..np {
            let b = &self.bk[idx * m * n..(idx + 1) * m * n];
            for c in 0..n {
                let mut acc = ZERO;
                for r in 0..m {
                    acc += b[r * n + c].conj() * gh.data[r * np + idx];
                }
                out_h.data[c * np + idx] = acc;
            }
        }
        Ok(inverse(&out_h))
    }
}

/// Constant-coefficient operator b(D)* g0 b(D), diagonal per mode.
pub struct EffectiveOperator {
    pub grid: TorusGrid,
    pub n: usize,
    /// M(k), n x n row-major per mode.
    mk: Vec<Complex64>,
    /// Per-mode eigenvalues of M(k) (non-negative reals).
    eigvals: Vec<f64>,
    /// Per-mode unitary eigenvector matrices, n x n row-major (columns are
    /// eigenvectors).
    eigvecs: Vec<Complex64>,
}

impl EffectiveOperator {
    pub fn new(grid: TorusGrid, sym: &Symbol, g0: &DMatrix<Complex64>) -> Result<Self> {
        if g0.nrows() != sym.m || g0.ncols() != sym.m {
            return Err(HomogError::ConfigInvalid(format!(
                "g0 is {}x{}, symbol has m = {}",
                g0.nrows(),
                g0.ncols(),
                sym.m
            )));
        }
        let n = sym.n;
        let np = grid.points();
        let mut mk = vec![ZERO; np * n * n];
        let mut eigvals = vec![0.0; np * n];
        let mut eigvecs = vec![ZERO; np * n * n];
        for idx in 0..np {
            let b = sym.at_freq(&grid.freq(idx)[..grid.d]);
            let mat = b.adjoint() * g0 * &b;
            // Hermitize against rounding before eigendecomposition.
            let mat = (&mat + mat.adjoint()).unscale(2.0);
            for r in 0..n {
                for c in 0..n {
                    mk[idx * n * n + r * n + c] = mat[(r, c)];
                }
            }
            let se = mat.symmetric_eigen();
            for j in 0..n {
                eigvals[idx * n + j] = se.eigenvalues[j];
                for r in 0..n {
                    eigvecs[idx * n * n + r * n + j] = se.eigenvectors[(r, j)];
                }
            }
        }
        Ok(Self {
            grid,
            n,
            mk,
            eigvals,
            eigvecs,
        })
    }

    /// The symbol block M(k) for a flat mode index.
    pub fn block(&self, idx: usize) -> DMatrix<Complex64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |r, c| self.mk[idx * n * n + r * n + c])
    }

    pub fn eigenvalues(&self, idx: usize) -> &[f64] {
        &self.eigvals[idx * self.n..(idx + 1) * self.n]
    }

    /// A0 u, exact per-mode multiplication by M(k).
    pub fn apply(&self, u: &Field) -> Result<Field> {
        check_field(&self.grid, self.n, u)?;
        let n = self.n;
        let np = self.grid.points();
        let uh = forward(u);
        let mut out_h = FourierField::zeros(self.grid, n);
        for idx in 0..np {
            for r in 0..n {
                let mut acc = ZERO;
                for c in 0..n {
                    acc += self.mk[idx * n * n + r * n + c] * uh.data[c * np + idx];
                }
                out_h.data[r * np + idx] = acc;
            }
        }
        Ok(inverse(&out_h))
    }

    /// Exact solve of (A0 - zeta) u = f via per-mode factorization.
    pub fn resolve(&self, zeta: Complex64, f: &Field) -> Result<Field> {
        check_field(&self.grid, self.n, f)?;
        let n = self.n;
        let np = self.grid.points();
        let fh = forward(f);
        let mut out_h = FourierField::zeros(self.grid, n);
        for idx in 0..np {
            let mut block = self.block(idx);
            for j in 0..n {
                block[(j, j)] -= zeta;
            }
            let rhs = nalgebra::DVector::from_fn(n, |r, _| fh.data[r * np + idx]);
            let sol = block.lu().solve(&rhs).ok_or_else(|| HomogError::SingularBlock {
                k: self.grid.freq(idx)[..self.grid.d].to_vec(),
            })?;
            for r in 0..n {
                out_h.data[r * np + idx] = sol[r];
            }
        }
        Ok(inverse(&out_h))
    }

    /// e^{-t A0} f via per-mode Hermitian eigendecomposition; t = 0 is the
    /// identity.
    pub fn expm(&self, t: f64, f: &Field) -> Result<Field> {
        check_field(&self.grid, self.n, f)?;
        if t == 0.0 {
            return Ok(f.clone());
        }
        let n = self.n;
        let np = self.grid.points();
        let fh = forward(f);
        let mut out_h = FourierField::zeros(self.grid, n);
        let mut proj = vec![ZERO; n];
        for idx in 0..np {
            let u = &self.eigvecs[idx * n * n..(idx + 1) * n * n];
            let lam = &self.eigvals[idx * n..(idx + 1) * n];
            // proj = e^{-t diag} U^H f
            for j in 0..n {
                let mut acc = ZERO;
                for r in 0..n {
                    acc += u[r * n + j].conj() * fh.data[r * np + idx];
                }
                proj[j] = acc * (-t * lam[j]).exp();
            }
            for r in 0..n {
                let mut acc = ZERO;
                for j in 0..n {
                    acc += u[r * n + j] * proj[j];
                }
                out_h.data[r * np + idx] = acc;
            }
        }
        Ok(inverse(&out_h))
    }
}

/// b(2 pi k) per mode, m x n row-major, flat over modes.
pub fn precompute_bk(grid: &TorusGrid, sym: &Symbol) -> Vec<Complex64> {
    let (m, n) = (sym.m, sym.n);
    let np = grid.points();
    let mut bk = vec![ZERO; np * m * n];
    for idx in 0..np {
        let b = sym.at_freq(&grid.freq(idx)[..grid.d]);
        for r in 0..m {
            for c in 0..n {
                bk[idx * m * n + r * n + c] = b[(r, c)];
            }
        }
    }
    bk
}

/// b(D) u: n components to m components, per-mode multiplication by
/// b(2 pi k).
pub fn apply_b(sym: &Symbol, u: &Field) -> Result<Field> {
    check_field(&u.grid.clone(), sym.n, u)?;
    let uh = forward(u);
    Ok(inverse(&apply_b_spectral(sym, &uh)))
}

/// Spectral-side b(D).
pub fn apply_b_spectral(sym: &Symbol, uh: &FourierField) -> FourierField {
    let (m, n) = (sym.m, sym.n);
    let grid = uh.grid;
    let np = grid.points();
    let mut out = FourierField::zeros(grid, m);
    for idx in 0..np {
        let b = sym.at_freq(&grid.freq(idx)[..grid.d]);
        for r in 0..m {
            let mut acc = ZERO;
            for c in 0..n {
                acc += b[(r, c)] * uh.data[c * np + idx];
            }
            out.data[r * np + idx] = acc;
        }
    }
    out
}

/// Spectral-side b(D)*: m components to n components.
pub fn apply_b_adjoint_spectral(sym: &Symbol, vh: &FourierField) -> FourierField {
    let (m, n) = (sym.m, sym.n);
    let grid = vh.grid;
    let np = grid.points();
    let mut out = FourierField::zeros(grid, n);
    for idx in 0..np {
        let b = sym.at_freq(&grid.freq(idx)[..grid.d]);
        for c in 0..n {
            let mut acc = ZERO;
            for r in 0..m {
                acc += b[(r, c)].conj() * vh.data[r * np + idx];
            }
            out.data[c * np + idx] = acc;
        }
    }
    out
}

fn check_field(grid: &TorusGrid, c: usize, f: &Field) -> Result<()> {
    if f.grid != *grid {
        return Err(HomogError::GridMismatch(format!(
            "field grid {:?} vs operator grid {:?}",
            f.grid, grid
        )));
    }
    if f.c != c {
        return Err(HomogError::GridMismatch(format!(
            "field has {} components, operator expects {c}",
            f.c
        )));
    }
    Ok(())
}
