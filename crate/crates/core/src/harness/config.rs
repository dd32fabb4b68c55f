//! Experiment configuration: TOML-backed, validated field by field.

use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// "constant", "cos1d", "layered2d", "checker2d-smooth", or "fourier".
    pub preset: String,
    /// Offset for the trigonometric presets (g stays positive for a > 1).
    #[serde(default = "default_a")]
    pub a: f64,
    /// Scalar Fourier series for the "fourier" preset: g = sum c_k e^{2 pi i k.x}.
    #[serde(default)]
    pub fourier: Vec<FourierTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Fine grid resolution N per axis (power of two).
    pub n: usize,
    /// Unit-cell resolution for the cell problem (power of two).
    #[serde(default = "default_n_cell")]
    pub n_cell: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Oscillation frequencies K, one per sweep point; eps = 1/K.
    pub eps_denominators: Vec<usize>,
    /// Times for the semigroup metrics.
    pub t_list: Vec<f64>,
    /// Shifts for the resolvent metrics, as (|zeta|, phi) pairs.
    pub zeta_list: Vec<(f64, f64)>,
    pub seed: u64,
    /// false replaces the smoothing multiplier with the identity.
    pub smoothing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps_denominators: vec![4, 8, 16, 32],
            t_list: vec![1.0],
            zeta_list: vec![(1.0, 3.0 * std::f64::consts::PI / 4.0)],
            seed: 1,
            smoothing: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub resolvent_tol: f64,
    pub cell_tol: f64,
    pub opnorm_tol: f64,
    pub opnorm_max_iters: usize,
    pub max_iters: usize,
    pub n_arc: usize,
    pub n_ray: usize,
    pub contour_tail_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            resolvent_tol: 1e-8,
            cell_tol: 1e-10,
            opnorm_tol: 1e-4,
            opnorm_max_iters: 200,
            max_iters: 2000,
            n_arc: 64,
            n_ray: 128,
            contour_tail_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    /// "csv" or "json".
    pub format: String,
    pub plot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".to_string(),
            format: "csv".to_string(),
            plot: false,
        }
    }
}

fn default_a() -> f64 {
    2.0
}

fn default_n_cell() -> usize {
    64
}

pub const PRESETS: [&str; 5] = [
    "constant",
    "cos1d",
    "layered2d",
    "checker2d-smooth",
    "fourier",
];

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg = Self::from_toml_lenient(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validating, for callers that apply overrides first.
    pub fn from_toml_lenient(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HomogError::ConfigInvalid(format!("parse: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Problem dimension implied by the preset.
    pub fn dimension(&self) -> Result<usize> {
        match self.problem.preset.as_str() {
            "constant" | "cos1d" => Ok(1),
            "layered2d" | "checker2d-smooth" => Ok(2),
            "fourier" => self
                .problem
                .fourier
                .first()
                .map(|t| t.k.len())
                .ok_or_else(|| {
                    HomogError::ConfigInvalid("problem.fourier: empty table".into())
                }),
            other => Err(HomogError::ConfigInvalid(format!(
                "problem.preset: unknown preset {other:?}, expected one of {PRESETS:?}"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |f: &str, msg: String| {
            Err(HomogError::ConfigInvalid(format!("{f}: {msg}")))
        };
        let d = self.dimension()?;
        if self.problem.preset == "fourier" {
            for term in &self.problem.fourier {
                if term.k.len() != d {
                    return err(
                        "problem.fourier",
                        format!("frequency {:?} has dimension != {d}", term.k),
                    );
                }
            }
        }
        match self.problem.preset.as_str() {
            "cos1d" | "layered2d" | "checker2d-smooth" if self.problem.a <= 1.0 => {
                return err("problem.a", format!("need a > 1, got {}", self.problem.a));
            }
            "constant" if self.problem.a <= 0.0 => {
                return err("problem.a", format!("need a > 0, got {}", self.problem.a));
            }
            _ => {}
        }
        if !self.grid.n.is_power_of_two() {
            return err("grid.n", format!("{} is not a power of two", self.grid.n));
        }
        if !self.grid.n_cell.is_power_of_two() {
            return err(
                "grid.n_cell",
                format!("{} is not a power of two", self.grid.n_cell),
            );
        }
        if self.sweep.eps_denominators.is_empty() {
            return err("sweep.eps_denominators", "empty".into());
        }
        for &q in &self.sweep.eps_denominators {
            if q == 0 || self.grid.n % q != 0 {
                return err(
                    "sweep.eps_denominators",
                    format!("K = {q} must divide N = {}", self.grid.n),
                );
            }
            if self.grid.n < 4 * q {
                return err(
                    "sweep.eps_denominators",
                    format!("K = {q} needs N >= 4K, got N = {}", self.grid.n),
                );
            }
            if (q * self.grid.n_cell) % self.grid.n != 0 {
                return err(
                    "sweep.eps_denominators",
                    format!(
                        "K*N_cell = {} must be a multiple of N = {} for exact cell sampling",
                        q * self.grid.n_cell,
                        self.grid.n
                    ),
                );
            }
        }
        for &t in &self.sweep.t_list {
            if !(t > 0.0 && t.is_finite()) {
                return err("sweep.t_list", format!("t = {t} must be positive"));
            }
        }
        for &(abs, phi) in &self.sweep.zeta_list {
            if !(abs > 0.0 && abs.is_finite()) {
                return err("sweep.zeta_list", format!("|zeta| = {abs} must be positive"));
            }
            if !(phi > 0.0 && phi < 2.0 * std::f64::consts::PI) {
                return err("sweep.zeta_list", format!("phi = {phi} outside (0, 2pi)"));
            }
        }
        for (f, v) in [
            ("solver.resolvent_tol", self.solver.resolvent_tol),
            ("solver.cell_tol", self.solver.cell_tol),
            ("solver.opnorm_tol", self.solver.opnorm_tol),
            ("solver.contour_tail_tol", self.solver.contour_tail_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return err(f, format!("tolerance {v} outside (0, 1)"));
            }
        }
        if self.solver.max_iters == 0 || self.solver.opnorm_max_iters == 0 {
            return err("solver.max_iters", "iteration caps must be positive".into());
        }
        if self.output.format != "csv" && self.output.format != "json" {
            return err(
                "output.format",
                format!("{:?}, expected \"csv\" or \"json\"", self.output.format),
            );
        }
        Ok(())
    }

    /// Short deterministic id derived from the fields that affect the
    /// numbers (everything except [output]).
    pub fn experiment_id(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        // FNV-1a over the canonical TOML form
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canonical.to_toml().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{}-{h:016x}", self.problem.preset)
    }
}
