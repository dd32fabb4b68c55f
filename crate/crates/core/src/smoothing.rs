//! Steklov smoothing S_eps as an exact Fourier multiplier, and the
//! corrector operators K(eps; zeta) = [Lam^eps] S_eps b(D) (A0 - zeta)^{-1}
//! and its parabolic counterpart with e^{-t A0} in place of the resolvent.

use std::sync::Arc;

use num_complex::Complex64;

use crate::cell::CorrectorField;
use crate::error::Result;
use crate::grid::{forward, inverse, Field, FourierField, TorusGrid};
use crate::operator::{apply_b_adjoint_spectral, apply_b_spectral, EffectiveOperator};
use crate::symbol::Symbol;

const PI: f64 = std::f64::consts::PI;

/// Per-frequency multiplier of the cell average u(x) -> int_cell u(x - eps z) dz.
///
/// s(k) = prod_j e^{-i pi k_j eps} sinc(pi k_j eps); |s| <= 1 everywhere and
/// s vanishes whenever some k_j eps is a nonzero integer.
#[derive(Debug, Clone)]
pub struct SmoothingMultiplier {
    pub grid: TorusGrid,
    pub eps: f64,
    pub s: Vec<Complex64>,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

impl SmoothingMultiplier {
    /// Steklov multiplier with eps = 1/K taken from the grid.
    pub fn steklov(grid: TorusGrid) -> Self {
        let eps = grid.eps();
        let np = grid.points();
        let mut s = vec![Complex64::new(1.0, 0.0); np];
        for (idx, slot) in s.iter_mut().enumerate() {
            let k = grid.freq(idx);
            let mut acc = Complex64::new(1.0, 0.0);
            for a in 0..grid.d {
                let arg = PI * k[a] as f64 * eps;
                acc *= Complex64::new(0.0, -arg).exp() * sinc(arg);
            }
            *slot = acc;
        }
        Self { grid, eps, s }
    }

    /// Identity multiplier (smoothing switched off), valid for the real
    /// scalar symmetric case where Lambda is bounded.
    pub fn identity(grid: TorusGrid) -> Self {
        Self {
            grid,
            eps: grid.eps(),
            s: vec![Complex64::new(1.0, 0.0); grid.points()],
        }
    }

    pub fn apply_spectral(&self, ff: &mut FourierField) {
        let np = self.grid.points();
        for comp in 0..ff.c {
            for idx in 0..np {
                ff.data[comp * np + idx] *= self.s[idx];
            }
        }
    }

    pub fn apply_adjoint_spectral(&self, ff: &mut FourierField) {
        let np = self.grid.points();
        for comp in 0..ff.c {
            for idx in 0..np {
                ff.data[comp * np + idx] *= self.s[idx].conj();
            }
        }
    }

    /// S_eps f in physical space.
    pub fn apply(&self, f: &Field) -> Field {
        let mut fh = forward(f);
        self.apply_spectral(&mut fh);
        inverse(&fh)
    }
}

/// Bundled corrector state on an oscillation grid: Lambda(x/eps) samples,
/// the smoothing multiplier, and the effective operator.
pub struct Corrector {
    pub grid: TorusGrid,
    pub sym: Symbol,
    pub op0: Arc<EffectiveOperator>,
    pub sm: SmoothingMultiplier,
    /// Lambda(x/eps), n x m row-major per point.
    lam_scaled: Vec<Complex64>,
}

impl Corrector {
    pub fn new(
        lam: &CorrectorField,
        sym: &Symbol,
        op0: Arc<EffectiveOperator>,
        sm: SmoothingMultiplier,
    ) -> Result<Self> {
        let grid = sm.grid;
        let lam_scaled = lam.sample_scaled(&grid)?;
        Ok(Self {
            grid,
            sym: sym.clone(),
            op0,
            sm,
            lam_scaled,
        })
    }

    /// [Lam^eps] S_eps b(D) u for an n-component u.
    pub fn tail(&self, u: &Field) -> Field {
        let (n, m) = (self.sym.n, self.sym.m);
        let np = self.grid.points();
        let uh = forward(u);
        let mut vh = apply_b_spectral(&self.sym, &uh);
        self.sm.apply_spectral(&mut vh);
        let v = inverse(&vh);
        let mut out = Field::zeros(self.grid, n);
        for idx in 0..np {
            let lam = &self.lam_scaled[idx * n * m..(idx + 1) * n * m];
            for r in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..m {
                    acc += lam[r * m + c] * v.data[c * np + idx];
                }
                out.data[r * np + idx] = acc;
            }
        }
        out
    }

    /// Adjoint of [`tail`]: b(D)* S_eps* [Lam^eps]* h.
    pub fn tail_adjoint(&self, h: &Field) -> Field {
        let (n, m) = (self.sym.n, self.sym.m);
        let np = self.grid.points();
        let mut v = Field::zeros(self.grid, m);
        for idx in 0..np {
            let lam = &self.lam_scaled[idx * n * m..(idx + 1) * n * m];
            for c in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..n {
                    acc += lam[r * m + c].conj() * h.data[r * np + idx];
                }
                v.data[c * np + idx] = acc;
            }
        }
        let mut vh = forward(&v);
        self.sm.apply_adjoint_spectral(&mut vh);
        let wh = apply_b_adjoint_spectral(&self.sym, &vh);
        inverse(&wh)
    }

    /// K(eps; zeta) f = [Lam^eps] S_eps b(D) (A0 - zeta)^{-1} f.
    pub fn elliptic(&self, zeta: Complex64, f: &Field) -> Result<Field> {
        let u0 = self.op0.resolve(zeta, f)?;
        Ok(self.tail(&u0))
    }

    /// Adjoint of K(eps; zeta): resolvent at the conjugated shift applied
    /// after the tail adjoint.
    pub fn elliptic_adjoint(&self, zeta: Complex64, h: &Field) -> Result<Field> {
        let w = self.tail_adjoint(h);
        self.op0.resolve(zeta.conj(), &w)
    }

    /// Parabolic corrector [Lam^eps] S_eps b(D) e^{-t A0} f.
    pub fn parabolic(&self, t: f64, f: &Field) -> Result<Field> {
        let u0 = self.op0.expm(t, f)?;
        Ok(self.tail(&u0))
    }

    pub fn parabolic_adjoint(&self, t: f64, h: &Field) -> Result<Field> {
        let w = self.tail_adjoint(h);
        self.op0.expm(t, &w)
    }
}

/// Power-iteration estimate of || [f^eps] S_eps ||_{L2 -> L2} for a scalar
/// periodic factor stored on the unit cell. The smoothing makes this
/// bounded by the cell L2 norm of the factor.
pub fn multiplied_smoothing_bound(
    f_per: &Field,
    sm: &SmoothingMultiplier,
    seed: u64,
) -> Result<f64> {
    let map = crate::coeff::scaled_index_map(&f_per.grid, &sm.grid)?;
    let samples: Vec<Complex64> = map.iter().map(|&ci| f_per.at(0, ci)).collect();
    let grid = sm.grid;
    let sm_fwd = sm.clone();
    let sm_adj = sm.clone();
    let samples_adj = samples.clone();
    let op = crate::metrics::ErrorOperator::new(
        "multiplied smoothing",
        grid,
        1,
        1,
        move |f: &Field| {
            let mut out = sm_fwd.apply(f);
            for (v, s) in out.data.iter_mut().zip(&samples) {
                *v *= s;
            }
            Ok(out)
        },
        move |h: &Field| {
            let mut v = h.clone();
            for (x, s) in v.data.iter_mut().zip(&samples_adj) {
                *x *= s.conj();
            }
            let mut vh = forward(&v);
            sm_adj.apply_adjoint_spectral(&mut vh);
            Ok(inverse(&vh))
        },
    );
    let est = crate::metrics::op_norm(&op, seed, 1e-6, 500)?;
    Ok(est.value)
}
