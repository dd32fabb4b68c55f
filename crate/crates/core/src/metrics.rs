//! Operator-norm estimation for black-box error operators.
//!
//! All operators of interest here are differences such as
//! (A_eps - zeta)^{-1} - (A0 - zeta)^{-1} or e^{-tA_eps} - e^{-tA0},
//! optionally corrected and optionally composed with the gradient. They
//! are only available as forward/adjoint black boxes, so the largest
//! singular value is estimated by power iteration on adjoint∘forward.

use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{HomogError, Result};
use crate::grid::{forward, inner, inverse, l2_norm, Field, FourierField, TorusGrid};
use crate::resolvent::SolveStats;
use crate::symbol::FREQ_STEP;


type BoxedMap = Box<dyn Fn(&Field) -> Result<Field> + Send + Sync>;

/// A black-box linear map with its adjoint and a human-readable
/// descriptor of which estimate it instantiates.
pub struct ErrorOperator {
    pub descriptor: String,
    pub grid: TorusGrid,
    pub c_in: usize,
    pub c_out: usize,
    forward: BoxedMap,
    adjoint: BoxedMap,
}

impl ErrorOperator {
    pub fn new(
        descriptor: &str,
        grid: TorusGrid,
        c_in: usize,
        c_out: usize,
        forward: impl Fn(&Field) -> Result<Field> + Send + Sync + 'static,
        adjoint: impl Fn(&Field) -> Result<Field> + Send + Sync + 'static,
    ) -> Self {
        Self {
            descriptor: descriptor.to_string(),
            grid,
            c_in,
            c_out,
            forward: Box::new(forward),
            adjoint: Box::new(adjoint),
        }
    }

    pub fn forward(&self, f: &Field) -> Result<Field> {
        (self.forward)(f)
    }

    pub fn adjoint(&self, h: &Field) -> Result<Field> {
        (self.adjoint)(h)
    }

    /// <forward f, h> = <f, adjoint h> on a random pair.
    pub fn check_adjoint(&self, seed: u64, tol: f64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Field::random(self.grid, self.c_in, &mut rng);
        let h = Field::random(self.grid, self.c_out, &mut rng);
        let tf = self.forward(&f)?;
        let ah = self.adjoint(&h)?;
        let gap = (inner(&tf, &h) - inner(&f, &ah)).norm();
        let scale = (l2_norm(&f) * l2_norm(&h)).max(1e-300);
        let mag = (l2_norm(&tf) / l2_norm(&f).max(1e-300)).max(1.0);
        if gap > tol * scale * mag {
            return Err(HomogError::AdjointMismatch {
                gap: gap / scale,
                tol,
            });
        }
        Ok(())
    }
}

/// Power-iteration result: a lower-bound estimate of the largest singular
/// value, with convergence diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of `op` via power iteration on adjoint∘forward
/// from a seeded random start. Stops when the Rayleigh estimate's relative
/// change drops below `tol_rel`. Non-convergence returns the best estimate
/// with `converged = false` rather than an error.
pub fn op_norm(op: &ErrorOperator, seed: u64, tol_rel: f64, max_iters: usize) -> Result<NormEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Field::random(op.grid, op.c_in, &mut rng);
    let nv = l2_norm(&v);
    v.scale(Complex64::new(1.0 / nv, 0.0));
    let mut sigma = 0.0f64;
    for it in 0..max_iters {
        let w = op.forward(&v)?;
        let new_sigma = l2_norm(&w);
        if new_sigma == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: it + 1,
                converged: true,
            });
        }
        let rel = (new_sigma - sigma).abs() / new_sigma;
        sigma = new_sigma;
        if rel <= tol_rel && it > 0 {
            return Ok(NormEstimate {
                value: sigma,
                iterations: it + 1,
                converged: true,
            });
        }
        let mut next = op.adjoint(&w)?;
        let nn = l2_norm(&next);
        if nn == 0.0 {
            return Ok(NormEstimate {
                value: sigma,
                iterations: it + 1,
                converged: true,
            });
        }
        next.scale(Complex64::new(1.0 / nn, 0.0));
        v = next;
    }
    Ok(NormEstimate {
        value: sigma,
        iterations: max_iters,
        converged: false,
    })
}

/// Spectral gradient: stacks the d per-axis derivatives, multiplying mode
/// k component c by the wave number k_a * FREQ_STEP into slot a*c_in + c.
pub fn grad(f: &Field) -> Field {
    let grid = f.grid;
    let np = grid.points();
    let c = f.c;
    let fh = forward(f);
    let mut out_h = FourierField::zeros(grid, grid.d * c);
    for idx in 0..np {
        let k = grid.freq(idx);
        for a in 0..grid.d {
            let factor = k[a] as f64 * FREQ_STEP;
            for comp in 0..c {
                out_h.data[(a * c + comp) * np + idx] = factor * fh.data[comp * np + idx];
            }
        }
    }
    inverse(&out_h)
}

/// Adjoint of [`grad`]: contracts the axis slots back to c components.
pub fn grad_adjoint(v: &Field, c: usize) -> Field {
    let grid = v.grid;
    let np = grid.points();
    let vh = forward(v);
    let mut out_h = FourierField::zeros(grid, c);
    for idx in 0..np {
        let k = grid.freq(idx);
        for comp in 0..c {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..grid.d {
                acc += k[a] as f64 * FREQ_STEP * vh.data[(a * c + comp) * np + idx];
            }
            out_h.data[comp * np + idx] = acc;
        }
    }
    inverse(&out_h)
}

/// Composes the gradient after an error operator, for L2 -> L2 norms of
/// D(...) expressions.
pub fn grad_compose(op: ErrorOperator) -> ErrorOperator {
    let op = Arc::new(op);
    let fwd_op = op.clone();
    let adj_op = op.clone();
    let c_mid = op.c_out;
    ErrorOperator::new(
        &format!("D({})", op.descriptor),
        op.grid,
        op.c_in,
        op.grid.d * op.c_out,
        move |f| Ok(grad(&fwd_op.forward(f)?)),
        move |h| adj_op.adjoint(&grad_adjoint(h, c_mid)),
    )
}

/// Shared sink for solver diagnostics gathered inside operator closures.
#[derive(Default)]
pub struct DiagSink {
    inner: Mutex<(usize, f64)>,
}

impl DiagSink {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn record(&self, stats: SolveStats) {
        let mut g = self.inner.lock().unwrap();
        g.0 = g.0.max(stats.iterations);
        g.1 = g.1.max(stats.residual);
    }

    /// (max iterations, max residual) since the last take.
    pub fn take(&self) -> (usize, f64) {
        let mut g = self.inner.lock().unwrap();
        std::mem::take(&mut *g)
    }
}
