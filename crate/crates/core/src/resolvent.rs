//! Resolvent solves (A_eps - zeta)^{-1} and (A0 - zeta)^{-1}, and the
//! sector weight c(phi).
//!
//! The variable-coefficient solve uses restarted GMRES, right-preconditioned
//! by the exact per-mode inverse of the constant-coefficient operator built
//! from the cell average of g. A_eps is Hermitian, so A_eps - zeta is
//! normal and the iteration is well behaved for any zeta off [0, inf).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{HomogError, Result};
use crate::grid::{forward, inner, inverse, l2_norm, Field, FourierField};
use crate::operator::OperatorAeps;

const PI: f64 = std::f64::consts::PI;

/// A spectral shift zeta off the positive real axis, with its principal
/// argument in (0, 2 pi) and sector weight.
#[derive(Debug, Clone, Copy)]
pub struct Shift {
    pub zeta: Complex64,
    pub phi: f64,
    pub c_phi: f64,
}

impl Shift {
    pub fn new(zeta: Complex64) -> Result<Self> {
        if zeta.im == 0.0 && zeta.re >= 0.0 {
            return Err(HomogError::InvalidAngle(if zeta.re == 0.0 {
                0.0
            } else {
                zeta.arg()
            }));
        }
        let mut phi = zeta.arg(); // (-pi, pi]
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        Ok(Self {
            zeta,
            phi,
            c_phi: c_of_phi(phi)?,
        })
    }

    pub fn from_polar(abs: f64, phi: f64) -> Result<Self> {
        let c_phi = c_of_phi(phi)?;
        Ok(Self {
            zeta: Complex64::from_polar(abs, phi),
            phi,
            c_phi,
        })
    }
}

/// Sector weight: |sin phi|^{-1} near the positive real axis, 1 on the
/// closed left half-sector [pi/2, 3 pi/2].
pub fn c_of_phi(phi: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < 2.0 * PI) {
        return Err(HomogError::InvalidAngle(phi));
    }
    Ok(if (PI / 2.0..=3.0 * PI / 2.0).contains(&phi) {
        1.0
    } else {
        1.0 / phi.sin().abs()
    })
}

/// Iteration count and final relative residual of an iterative solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Shifted solver handle: caches the per-mode preconditioner for one zeta.
pub struct ResolventSolver<'a> {
    op: &'a OperatorAeps,
    pub zeta: Complex64,
    /// Per-mode n x n inverse of (b* g_mean b - zeta), row-major.
    prec: Vec<Complex64>,
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl<'a> ResolventSolver<'a> {
    pub fn new(op: &'a OperatorAeps, shift: Shift, tol: f64, max_iters: usize) -> Result<Self> {
        let grid = op.grid;
        let n = op.sym.n;
        let np = grid.points();
        let g_mean = op.g_mean();
        let mut prec = vec![Complex64::new(0.0, 0.0); np * n * n];
        for idx in 0..np {
            let b = op.sym.at_freq(&grid.freq(idx)[..grid.d]);
            let mut block: DMatrix<Complex64> = b.adjoint() * g_mean * &b;
            for j in 0..n {
                block[(j, j)] -= shift.zeta;
            }
            let inv = block.try_inverse().ok_or_else(|| HomogError::SingularBlock {
                k: grid.freq(idx)[..grid.d].to_vec(),
            })?;
            for r in 0..n {
                for c in 0..n {
                    prec[idx * n * n + r * n + c] = inv[(r, c)];
                }
            }
        }
        Ok(Self {
            op,
            zeta: shift.zeta,
            prec,
            tol,
            max_iters,
            restart: 60,
        })
    }

    fn apply_prec(&self, f: &Field) -> Field {
        let n = self.op.sym.n;
        let np = self.op.grid.points();
        let fh = forward(f);
        let mut out_h = FourierField::zeros(self.op.grid, n);
        for idx in 0..np {
            for r in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..n {
                    acc += self.prec[idx * n * n + r * n + c] * fh.data[c * np + idx];
                }
                out_h.data[r * np + idx] = acc;
            }
        }
        inverse(&out_h)
    }

    fn apply_shifted(&self, u: &Field) -> Result<Field> {
        let mut au = self.op.apply(u)?;
        au.axpy(-self.zeta, u);
        Ok(au)
    }

    /// Solves (A_eps - zeta) u = f to relative residual `tol`.
    pub fn solve(&self, f: &Field) -> Result<(Field, SolveStats)> {
        // right preconditioning: (A - zeta) P v = f, u = P v
        let apply = |v: &Field| -> Result<Field> { self.apply_shifted(&self.apply_prec(v)) };
        let (v, stats) = gmres(apply, f, self.tol, self.restart, self.max_iters)?;
        Ok((self.apply_prec(&v), stats))
    }
}

/// Restarted GMRES with complex Givens rotations. Solves T x = f for the
/// black-box map `apply`, measuring the true relative residual.
pub fn gmres(
    apply: impl Fn(&Field) -> Result<Field>,
    f: &Field,
    tol: f64,
    restart: usize,
    max_iters: usize,
) -> Result<(Field, SolveStats)> {
    let f_norm = l2_norm(f);
    let mut x = Field::zeros(f.grid, f.c);
    if f_norm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let mut total_iters = 0usize;
    let mut rel = 1.0;
    while total_iters < max_iters {
        let ax = apply(&x)?;
        let r0 = f.sub(&ax);
        let beta = l2_norm(&r0);
        rel = beta / f_norm;
        if rel <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: total_iters,
                    residual: rel,
                },
            ));
        }
        // Arnoldi basis
        let mut basis: Vec<Field> = Vec::with_capacity(restart + 1);
        let mut v0 = r0;
        v0.scale(Complex64::new(1.0 / beta, 0.0));
        basis.push(v0);
        // Hessenberg columns after rotation, Givens (c, s), rotated rhs
        let mut h_cols: Vec<Vec<Complex64>> = Vec::with_capacity(restart);
        let mut givens: Vec<(Complex64, Complex64)> = Vec::with_capacity(restart);
        let mut g_vec = vec![Complex64::new(0.0, 0.0); restart + 1];
        g_vec[0] = Complex64::new(beta, 0.0);
        let mut inner_count = 0usize;
        for j in 0..restart {
            if total_iters + inner_count >= max_iters {
                break;
            }
            let mut w = apply(&basis[j])?;
            let mut h = vec![Complex64::new(0.0, 0.0); j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij = inner(&w, vi);
                h[i] = hij;
                w.axpy(-hij, vi);
            }
            let wn = l2_norm(&w);
            h[j + 1] = Complex64::new(wn, 0.0);
            // apply accumulated rotations
            for (i, &(c, s)) in givens.iter().enumerate() {
                let t0 = c.conj() * h[i] + s.conj() * h[i + 1];
                let t1 = -s * h[i] + c * h[i + 1];
                h[i] = t0;
                h[i + 1] = t1;
            }
            // new rotation zeroing h[j+1]
            let denom = (h[j].norm_sqr() + h[j + 1].norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 {
                (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (h[j] / denom, h[j + 1] / denom)
            };
            h[j] = Complex64::new(denom, 0.0);
            h[j + 1] = Complex64::new(0.0, 0.0);
            let t0 = c.conj() * g_vec[j] + s.conj() * g_vec[j + 1];
            let t1 = -s * g_vec[j] + c * g_vec[j + 1];
            g_vec[j] = t0;
            g_vec[j + 1] = t1;
            givens.push((c, s));
            h_cols.push(h);
            inner_count += 1;
            rel = g_vec[j + 1].norm() / f_norm;
            let breakdown = wn < 1e-14;
            if rel <= tol || breakdown || j + 1 == restart {
                break;
            }
            let mut vn = w;
            vn.scale(Complex64::new(1.0 / wn, 0.0));
            basis.push(vn);
        }
        // back substitution for y and update x
        let k = h_cols.len();
        if k == 0 {
            break;
        }
        let mut y = vec![Complex64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = g_vec[i];
            for l in (i + 1)..k {
                acc -= h_cols[l][i] * y[l];
            }
            y[i] = acc / h_cols[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            x.axpy(*yi, &basis[i]);
        }
        total_iters += inner_count;
        if rel <= tol {
            // confirm with the true residual on the outer loop
            let ax = apply(&x)?;
            rel = l2_norm(&f.sub(&ax)) / f_norm;
            if rel <= tol {
                return Ok((
                    x,
                    SolveStats {
                        iterations: total_iters,
                        residual: rel,
                    },
                ));
            }
        }
    }
    Err(HomogError::NoConvergence {
        iters: total_iters,
        residual: rel,
    })
}
