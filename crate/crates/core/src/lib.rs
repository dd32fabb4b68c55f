//! Numerical laboratory for periodic homogenization of matrix elliptic
//! operators A_eps = b(D)* g(x/eps) b(D) on the unit torus.
//!
//! The crate builds the effective operator A0 = b(D)* g0 b(D) from the
//! periodic cell problem, solves shifted resolvent systems for both
//! operators, evaluates operator semigroups through a sectorial contour
//! quadrature, and measures operator-norm gaps between the oscillating
//! and effective pictures so their decay in eps, t, and zeta can be
//! fitted empirically.

pub mod cell;
pub mod coeff;
pub mod contour;
pub mod dense;
pub mod error;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod operator;
pub mod resolvent;
pub mod smoothing;
pub mod symbol;

pub use cell::{effective_matrix, solve_cell_problem, CorrectorField, EffectiveMatrix};
pub use coeff::CoefficientField;
pub use contour::{build_contour, expm_contour, frak_c, Contour};
pub use error::{HomogError, Result};
pub use grid::{forward, inner, inverse, l2_norm, Field, FourierField, TorusGrid};
pub use metrics::{op_norm, ErrorOperator};
pub use operator::{EffectiveOperator, OperatorAeps};
pub use resolvent::{c_of_phi, ResolventSolver, Shift, SolveStats};
pub use smoothing::SmoothingMultiplier;
pub use symbol::{check_rank_condition, EllipticityBounds, Symbol};
