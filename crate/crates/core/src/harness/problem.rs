//! Coefficient presets and the assembled problem (g, Lambda, g0).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cell::{effective_matrix, solve_cell_problem, CorrectorField, EffectiveMatrix};
use crate::coeff::CoefficientField;
use crate::error::{HomogError, Result};
use crate::grid::TorusGrid;
use crate::symbol::{check_rank_condition, EllipticityBounds, Symbol};

use super::config::ExperimentConfig;

const PI: f64 = std::f64::consts::PI;

/// Everything eps-independent: coefficient, symbol, corrector, effective matrix.
pub struct Problem {
    pub preset: String,
    pub sym: Symbol,
    pub cell: TorusGrid,
    pub g: CoefficientField,
    pub bounds: EllipticityBounds,
    pub lam: CorrectorField,
    pub g0: EffectiveMatrix,
    /// Analytic/quadrature reference for g0 where the preset has one.
    pub g0_oracle: Option<DMatrix<Complex64>>,
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    cfg.validate()?;
    let d = cfg.dimension()?;
    let cell = TorusGrid::cell(d, cfg.grid.n_cell)?;
    let a = cfg.problem.a;
    let scalar = |v: f64| DMatrix::from_element(1, 1, Complex64::new(v, 0.0));
    let diag2 = |v: f64| {
        DMatrix::from_diagonal_element(2, 2, Complex64::new(v, 0.0))
    };

    let (sym, g, g0_oracle) = match cfg.problem.preset.as_str() {
        "constant" => (
            Symbol::scalar_1d(),
            CoefficientField::from_fn(cell, 1, |_| scalar(a))?,
            Some(scalar(a)),
        ),
        "cos1d" => (
            Symbol::scalar_1d(),
            CoefficientField::from_fn(cell, 1, |x| scalar(a + (2.0 * PI * x[0]).cos()))?,
            // harmonic mean of a + cos: 1 / integral dx/(a + cos 2 pi x) = sqrt(a^2 - 1)
            Some(scalar((a * a - 1.0).sqrt())),
        ),
        "layered2d" => {
            let gamma = move |x1: f64| a + (2.0 * PI * x1).cos();
            let (harm, arith) = layered_means(gamma);
            let mut oracle = diag2(0.0);
            oracle[(0, 0)] = Complex64::new(harm, 0.0);
            oracle[(1, 1)] = Complex64::new(arith, 0.0);
            (
                Symbol::gradient(2),
                CoefficientField::from_fn(cell, 2, |x| diag2(gamma(x[0])))?,
                Some(oracle),
            )
        }
        "checker2d-smooth" => (
            Symbol::gradient(2),
            CoefficientField::from_fn(cell, 2, |x| {
                diag2(a + (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos())
            })?,
            None,
        ),
        "fourier" => {
            let sym = if d == 1 {
                Symbol::scalar_1d()
            } else {
                Symbol::gradient(d)
            };
            let m = sym.m;
            let table: Vec<(Vec<i64>, DMatrix<Complex64>)> = cfg
                .problem
                .fourier
                .iter()
                .map(|t| {
                    (
                        t.k.clone(),
                        DMatrix::from_diagonal_element(m, m, Complex64::new(t.re, t.im)),
                    )
                })
                .collect();
            (sym, CoefficientField::from_fourier_table(cell, m, &table)?, None)
        }
        other => {
            return Err(HomogError::ConfigInvalid(format!(
                "problem.preset: unknown preset {other:?}"
            )))
        }
    };

    let bounds = check_rank_condition(&sym, 64)?;
    let lam = solve_cell_problem(&g, &sym, cfg.solver.cell_tol, cfg.solver.max_iters)?;
    let g0 = effective_matrix(&lam, &g, &sym)?;
    Ok(Problem {
        preset: cfg.problem.preset.clone(),
        sym,
        cell,
        g,
        bounds,
        lam,
        g0,
        g0_oracle,
    })
}

/// Harmonic and arithmetic means of a 1-D profile by composite Simpson
/// quadrature on [0, 1] — the classical layered-medium reference.
pub fn layered_means(gamma: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = 1 << 16;
    let h = 1.0 / n as f64;
    let (mut inv, mut avg) = (0.0f64, 0.0f64);
    for i in 0..n {
        let (x0, x1) = (i as f64 * h, (i as f64 + 1.0) * h);
        let xm = 0.5 * (x0 + x1);
        inv += h / 6.0 * (1.0 / gamma(x0) + 4.0 / gamma(xm) + 1.0 / gamma(x1));
        avg += h / 6.0 * (gamma(x0) + 4.0 * gamma(xm) + gamma(x1));
    }
    (1.0 / inv, avg)
}

impl Problem {
    /// Largest entrywise gap to the oracle, if the preset has one.
    pub fn oracle_gap(&self) -> Option<f64> {
        self.g0_oracle.as_ref().map(|oracle| {
            (&self.g0.g0 - oracle)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        })
    }
}
