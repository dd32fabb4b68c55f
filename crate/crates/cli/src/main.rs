//! Command-line front end: effective-matrix checks, cell solves, error
//! sweeps, contour verification, and reporting from recorded CSV runs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use homog_core::harness::{
    build_problem, constants_report, fit_rate, read_csv, run_sweep_with_problem,
    uniformity_check, write_csv, write_json, write_svg_plots, ExperimentConfig, Variable,
    ELLIPTIC_METRICS, PARABOLIC_METRICS,
};
use homog_core::{
    build_contour, expm_contour, l2_norm, EffectiveOperator, Field, Symbol, TorusGrid,
};

#[derive(Parser)]
#[command(name = "homog", version, about = "Homogenization error laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problem and print g0 next to the preset's reference
    Effective(Common),
    /// Solve the cell problem and dump the corrector Lambda as CSV
    Cell(Common),
    /// Sweep the three resolvent error metrics only
    ResolventError(Common),
    /// Sweep the three semigroup error metrics only
    SemigroupError(Common),
    /// Compare the contour exponential of A0 (g0 = 1) to the spectral one
    ContourCheck(Common),
    /// Run the sweep and print the fitted-constants report
    Constants(Common),
    /// Full pipeline: sweep, persist records, optional plots
    Sweep(Common),
    /// Fit rates and report from an existing records CSV
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config file; the flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Coefficient preset when no config file is given
    #[arg(long, default_value = "cos1d")]
    preset: String,
    /// Fine grid resolution N
    #[arg(long)]
    grid: Option<usize>,
    /// Oscillation frequencies K (eps = 1/K), comma separated
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<usize>>,
    /// Semigroup times, comma separated
    #[arg(long, value_delimiter = ',')]
    t_list: Option<Vec<f64>>,
    /// Resolvent shifts as |zeta|:phi pairs, comma separated
    #[arg(long, value_delimiter = ',')]
    zeta_list: Option<Vec<String>>,
    /// Resolvent solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the smoothing multiplier with the identity
    #[arg(long)]
    no_smoothing: bool,
    /// Records format: csv or json
    #[arg(long)]
    format: Option<String>,
    /// Emit SVG plots next to the records
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Records CSV produced by `sweep`
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot: bool,
}

type AnyError = Box<dyn std::error::Error>;

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> Result<(), AnyError> {
    match Cli::parse().command {
        Command::Effective(c) => effective(&c),
        Command::Cell(c) => cell(&c),
        Command::ResolventError(c) => sweep(&c, true, false),
        Command::SemigroupError(c) => sweep(&c, false, true),
        Command::ContourCheck(c) => contour_check(&c),
        Command::Constants(c) => constants(&c),
        Command::Sweep(c) => sweep(&c, true, true),
        Command::Report(r) => report(&r),
    }
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, AnyError> {
        let mut cfg = match &self.config {
            Some(path) => {
                ExperimentConfig::from_toml_lenient(&std::fs::read_to_string(path)?)?
            }
            None => {
                let n = self.grid.unwrap_or(64);
                ExperimentConfig::from_toml_lenient(&format!(
                    "[problem]\npreset = \"{}\"\n[grid]\nn = {n}\nn_cell = 64\n",
                    self.preset
                ))?
            }
        };
        if let Some(n) = self.grid {
            cfg.grid.n = n;
        }
        if let Some(eps) = &self.eps_list {
            cfg.sweep.eps_denominators = eps.clone();
        }
        if let Some(ts) = &self.t_list {
            cfg.sweep.t_list = ts.clone();
        }
        if let Some(zs) = &self.zeta_list {
            cfg.sweep.zeta_list = zs
                .iter()
                .map(|s| parse_shift(s))
                .collect::<Result<_, _>>()?;
        }
        if let Some(tol) = self.tol {
            cfg.solver.resolvent_tol = tol;
        }
        if let Some(seed) = self.seed {
            cfg.sweep.seed = seed;
        }
        if self.no_smoothing {
            cfg.sweep.smoothing = false;
        }
        if let Some(format) = &self.format {
            cfg.output.format = format.clone();
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.display().to_string();
        }
        if self.plot {
            cfg.output.plot = true;
        }
        if self.config.is_none() && self.eps_list.is_none() {
            // drop default K values the chosen grid cannot resolve
            let (n, n_cell) = (cfg.grid.n, cfg.grid.n_cell);
            cfg.sweep
                .eps_denominators
                .retain(|&q| n % q == 0 && n >= 4 * q && (q * n_cell) % n == 0);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_shift(s: &str) -> Result<(f64, f64), AnyError> {
    let (abs, phi) = s
        .split_once(':')
        .ok_or_else(|| format!("shift {s:?} is not |zeta|:phi"))?;
    Ok((abs.trim().parse()?, phi.trim().parse()?))
}

fn effective(c: &Common) -> Result<(), AnyError> {
    let cfg = c.config()?;
    let problem = build_problem(&cfg)?;
    println!("preset {}  N_cell {}", problem.preset, cfg.grid.n_cell);
    println!(
        "cell residuals: {:?}  max |mean Lambda|: {:.3e}",
        problem.lam.residuals,
        problem.lam.max_mean()
    );
    println!("g0 =");
    print_matrix(&problem.g0.g0);
    match (&problem.g0_oracle, problem.oracle_gap()) {
        (Some(oracle), Some(gap)) => {
            println!("reference =");
            print_matrix(oracle);
            println!("max entry gap = {gap:.3e}");
        }
        _ => println!("no analytic reference for this preset"),
    }
    Ok(())
}

fn print_matrix(mat: &nalgebra::DMatrix<Complex64>) {
    for r in 0..mat.nrows() {
        let row: Vec<String> = (0..mat.ncols())
            .map(|c| format!("{:+.10e}{:+.3e}i", mat[(r, c)].re, mat[(r, c)].im))
            .collect();
        println!("  [{}]", row.join(", "));
    }
}

fn cell(c: &Common) -> Result<(), AnyError> {
    let cfg = c.config()?;
    let problem = build_problem(&cfg)?;
    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("lambda.csv");
    let grid = problem.lam.grid;
    let mut text = String::from("index");
    for a in 0..grid.d {
        text.push_str(&format!(",x{a}"));
    }
    for j in 0..problem.lam.m {
        for comp in 0..problem.lam.n {
            text.push_str(&format!(",re_l{j}_{comp},im_l{j}_{comp}"));
        }
    }
    text.push('\n');
    for idx in 0..grid.points() {
        let x = grid.point(idx);
        text.push_str(&idx.to_string());
        for a in 0..grid.d {
            text.push_str(&format!(",{}", x[a]));
        }
        for col in &problem.lam.columns {
            for comp in 0..problem.lam.n {
                let v = col.at(comp, idx);
                text.push_str(&format!(",{},{}", v.re, v.im));
            }
        }
        text.push('\n');
    }
    std::fs::write(&path, text)?;
    println!(
        "wrote {} ({} samples, residuals {:?})",
        path.display(),
        grid.points(),
        problem.lam.residuals
    );
    Ok(())
}

fn contour_check(c: &Common) -> Result<(), AnyError> {
    let cfg = c.config()?;
    let times = if c.t_list.is_some() {
        cfg.sweep.t_list.clone()
    } else {
        vec![0.1, 1.0, 10.0]
    };
    let grid = TorusGrid::cell(1, 64)?;
    let op0 = EffectiveOperator::new(
        grid,
        &Symbol::scalar_1d(),
        &nalgebra::DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
    )?;
    let mut rng = rand_chacha_seed(cfg.sweep.seed);
    let f = Field::random(grid, 1, &mut rng);
    let nf = l2_norm(&f);
    println!("t, n_arc, n_ray, relative_gap");
    for &t in &times {
        let exact = op0.expm(t, &f)?;
        for level in 0..4 {
            let (na, nr) = (cfg.solver.n_arc << level, cfg.solver.n_ray << level);
            let contour = build_contour(t, na, nr, cfg.solver.contour_tail_tol)?;
            let out = expm_contour(|z, rhs| op0.resolve(z, rhs), &contour, &f)?;
            println!("{t}, {na}, {nr}, {:e}", l2_norm(&out.sub(&exact)) / nf);
        }
    }
    Ok(())
}

fn rand_chacha_seed(seed: u64) -> impl rand::Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn constants(c: &Common) -> Result<(), AnyError> {
    let cfg = c.config()?;
    let problem = build_problem(&cfg)?;
    let out = run_sweep_with_problem(&cfg, &problem)?;
    for failure in &out.failures {
        eprintln!("point failed: {failure}");
    }
    let report = constants_report(&out.records)?;
    print!("{report}");
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("constants.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn sweep(c: &Common, elliptic: bool, parabolic: bool) -> Result<(), AnyError> {
    let mut cfg = c.config()?;
    if !elliptic {
        cfg.sweep.zeta_list.clear();
    }
    if !parabolic {
        cfg.sweep.t_list.clear();
    }
    let problem = build_problem(&cfg)?;
    if let Some(gap) = problem.oracle_gap() {
        println!("g0 reference gap: {gap:.3e}");
    }
    let out = run_sweep_with_problem(&cfg, &problem)?;
    for failure in &out.failures {
        eprintln!("point failed: {failure}");
    }
    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir)?;
    let path = if cfg.output.format == "json" {
        let p = dir.join("records.json");
        write_json(&out.records, &p)?;
        p
    } else {
        let p = dir.join("records.csv");
        write_csv(&out.records, &p)?;
        p
    };
    println!("wrote {} ({} records)", path.display(), out.records.len());
    print_fits(&out.records);
    if cfg.output.plot {
        for name in write_svg_plots(&out.records, &dir)? {
            println!("wrote {}", dir.join(name).display());
        }
    }
    Ok(())
}

fn print_fits(records: &[homog_core::harness::ResultRecord]) {
    for metric in ELLIPTIC_METRICS.iter().chain(&PARABOLIC_METRICS) {
        if let Ok(fit) = fit_rate(records, metric, Variable::Eps) {
            println!(
                "{metric}: eps-slope {:.4} (residual {:.2e}, {} points)",
                fit.slope, fit.residual, fit.points
            );
        }
        if let Ok(u) = uniformity_check(records, metric, 1e-9) {
            if u.skipped {
                println!("{metric}: compensated values below noise, spread skipped");
            } else {
                println!(
                    "{metric}: compensated spread {:.4} (max {:.4e}, min {:.4e})",
                    u.ratio, u.max_compensated, u.min_compensated
                );
            }
        }
    }
}

fn report(r: &ReportArgs) -> Result<(), AnyError> {
    let records = read_csv(&r.input)?;
    println!("{} records from {}", records.len(), r.input.display());
    print_fits(&records);
    match constants_report(&records) {
        Ok(report) => print!("{report}"),
        Err(e) => println!("constants report unavailable: {e}"),
    }
    let dir = r
        .out
        .clone()
        .unwrap_or_else(|| parent_dir(&r.input));
    if r.plot {
        for name in write_svg_plots(&records, &dir)? {
            println!("wrote {}", dir.join(name).display());
        }
    }
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    let p = path.parent().unwrap_or_else(|| Path::new("."));
    if p.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        p.to_path_buf()
    }
}
