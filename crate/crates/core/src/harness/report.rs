//! Constants report, CSV/JSON persistence, and SVG plots.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::frak_c;
use crate::error::{HomogError, Result};

use super::sweep::{ResultRecord, ELLIPTIC_METRICS, PARABOLIC_METRICS};

/// Empirical stand-ins for the six estimate constants (max compensated
/// value per metric over the sweep), plus the chain relating the
/// parabolic ones to the elliptic ones through frak_c.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub frak_c_closed: f64,
    pub frak_c_quadrature: f64,
    /// res_diff, res_corrected_grad, res_corrected
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// semi_diff, semi_corrected_grad, semi_corrected
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c4_bound: f64,
    pub c5_bound: f64,
    pub c6_bound: f64,
    pub c4_ok: bool,
    pub c5_ok: bool,
    pub c6_ok: bool,
    /// All maxima under the noise floor; the chain checks are vacuous.
    pub below_noise: bool,
}

/// Slack multiplier on the constant-chain inequalities.
pub const CHAIN_SLACK: f64 = 1.10;
const NOISE_FLOOR: f64 = 1e-7;

fn max_compensated(records: &[ResultRecord], metric: &str) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for r in records.iter().filter(|r| r.metric == metric) {
        max = max.max(r.compensated);
    }
    if max == f64::NEG_INFINITY {
        return Err(HomogError::MissingMetrics(metric.to_string()));
    }
    Ok(max)
}

pub fn constants_report(records: &[ResultRecord]) -> Result<ConstantsReport> {
    let c1 = max_compensated(records, ELLIPTIC_METRICS[0])?;
    let c2 = max_compensated(records, ELLIPTIC_METRICS[1])?;
    let c3 = max_compensated(records, ELLIPTIC_METRICS[2])?;
    let c4 = max_compensated(records, PARABOLIC_METRICS[0])?;
    let c5 = max_compensated(records, PARABOLIC_METRICS[1])?;
    let c6 = max_compensated(records, PARABOLIC_METRICS[2])?;
    let (frak_c_closed, frak_c_quadrature) = frak_c();
    let c4_bound = 2.0f64.sqrt() * 2.0f64.max(frak_c_closed * c1) * CHAIN_SLACK;
    let c5_bound = frak_c_closed * c2 * CHAIN_SLACK;
    let c6_bound = frak_c_closed * c3 * CHAIN_SLACK;
    let below_noise = [c1, c2, c3, c4, c5, c6].iter().all(|&c| c < NOISE_FLOOR);
    Ok(ConstantsReport {
        frak_c_closed,
        frak_c_quadrature,
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
        c4_bound,
        c5_bound,
        c6_bound,
        c4_ok: below_noise || c4 <= c4_bound,
        c5_ok: below_noise || c5 <= c5_bound,
        c6_ok: below_noise || c6 <= c6_bound,
        below_noise,
    })
}

impl fmt::Display for ConstantsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "frak_c: closed form {:.6}, quadrature {:.6}",
            self.frak_c_closed, self.frak_c_quadrature
        )?;
        if self.below_noise {
            writeln!(f, "all fitted constants below noise floor {NOISE_FLOOR:e}")?;
        }
        for (name, metric, value) in [
            ("C1", ELLIPTIC_METRICS[0], self.c1),
            ("C2", ELLIPTIC_METRICS[1], self.c2),
            ("C3", ELLIPTIC_METRICS[2], self.c3),
        ] {
            writeln!(f, "{name} ({metric}): {value:.6e}")?;
        }
        for (name, metric, value, bound, ok) in [
            ("C4", PARABOLIC_METRICS[0], self.c4, self.c4_bound, self.c4_ok),
            ("C5", PARABOLIC_METRICS[1], self.c5, self.c5_bound, self.c5_ok),
            ("C6", PARABOLIC_METRICS[2], self.c6, self.c6_bound, self.c6_ok),
        ] {
            writeln!(
                f,
                "{name} ({metric}): {value:.6e} <= {bound:.6e} chain {}",
                if ok { "ok" } else { "VIOLATED" }
            )?;
        }
        Ok(())
    }
}

pub const CSV_COLUMNS: [&str; 21] = [
    "experiment_id",
    "preset",
    "d",
    "n",
    "m",
    "N",
    "K",
    "eps",
    "t",
    "zeta_re",
    "zeta_im",
    "phi",
    "c_phi",
    "metric",
    "value",
    "paper_factor",
    "compensated",
    "iters_max",
    "residual_max",
    "wall_ms",
    "seed",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn to_csv(records: &[ResultRecord]) -> String {
    let mut out = String::new();
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for r in records {
        let row = [
            r.experiment_id.clone(),
            r.preset.clone(),
            r.d.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.big_n.to_string(),
            r.k_osc.to_string(),
            format!("{}", r.eps),
            fmt_opt(r.t),
            fmt_opt(r.zeta_re),
            fmt_opt(r.zeta_im),
            fmt_opt(r.phi),
            fmt_opt(r.c_phi),
            r.metric.clone(),
            format!("{}", r.value),
            format!("{}", r.paper_factor),
            format!("{}", r.compensated),
            r.iters_max.to_string(),
            format!("{}", r.residual_max),
            format!("{}", r.wall_ms),
            r.seed.to_string(),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(records: &[ResultRecord], path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(records))?;
    Ok(())
}

pub fn write_json(records: &[ResultRecord], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(records)
        .map_err(|e| HomogError::ConfigInvalid(format!("json encode: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(s: &str, col: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| {
        HomogError::ConfigInvalid(format!("csv line {line}: bad {col} value {s:?}"))
    })
}

fn parse_opt(s: &str, col: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        Ok(Some(parse_field(s, col, line)?))
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| HomogError::ConfigInvalid("csv: empty file".into()))?
        .1;
    if header != CSV_COLUMNS.join(",") {
        return Err(HomogError::ConfigInvalid(format!(
            "csv: unexpected header {header:?}"
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != CSV_COLUMNS.len() {
            return Err(HomogError::ConfigInvalid(format!(
                "csv line {i}: {} fields, expected {}",
                f.len(),
                CSV_COLUMNS.len()
            )));
        }
        records.push(ResultRecord {
            experiment_id: f[0].to_string(),
            preset: f[1].to_string(),
            d: parse_field(f[2], "d", i)?,
            n: parse_field(f[3], "n", i)?,
            m: parse_field(f[4], "m", i)?,
            big_n: parse_field(f[5], "N", i)?,
            k_osc: parse_field(f[6], "K", i)?,
            eps: parse_field(f[7], "eps", i)?,
            t: parse_opt(f[8], "t", i)?,
            zeta_re: parse_opt(f[9], "zeta_re", i)?,
            zeta_im: parse_opt(f[10], "zeta_im", i)?,
            phi: parse_opt(f[11], "phi", i)?,
            c_phi: parse_opt(f[12], "c_phi", i)?,
            metric: f[13].to_string(),
            value: parse_field(f[14], "value", i)?,
            paper_factor: parse_field(f[15], "paper_factor", i)?,
            compensated: parse_field(f[16], "compensated", i)?,
            iters_max: parse_field(f[17], "iters_max", i)?,
            residual_max: parse_field(f[18], "residual_max", i)?,
            wall_ms: parse_field(f[19], "wall_ms", i)?,
            seed: parse_field(f[20], "seed", i)?,
        });
    }
    Ok(records)
}

const PLOT_COLORS: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

/// Log-log polyline plot of (x, y) series, one per metric.
fn svg_loglog(series: &[(String, Vec<(f64, f64)>)], x_label: &str, y_label: &str) -> String {
    let (w, h, margin) = (640.0, 480.0, 60.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, p)| p.iter())
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.log10(), y.log10()))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - y0) / (y1 - y0) * (h - 2.0 * margin);
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{by}\" text-anchor=\"middle\" font-size=\"14\">log10 {x_label}</text>\n\
         <text x=\"14\" y=\"{cy}\" text-anchor=\"middle\" font-size=\"14\" \
         transform=\"rotate(-90 14 {cy})\">log10 {y_label}</text>\n",
        m = margin,
        b = h - margin,
        r = w - margin,
        t = margin,
        cx = w / 2.0,
        by = h - 16.0,
        cy = h / 2.0,
    ));
    for (si, (name, points)) in series.iter().enumerate() {
        let color = PLOT_COLORS[si % PLOT_COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x.log10()), sy(y.log10())))
            .collect();
        if path.is_empty() {
            continue;
        }
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        for p in &path {
            let (px, py) = p.split_once(',').unwrap();
            svg.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"{color}\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" fill=\"{color}\">{name}</text>\n",
            w - margin - 170.0,
            margin + 18.0 * (si as f64 + 1.0),
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn series_by_metric(
    records: &[ResultRecord],
    x_of: impl Fn(&ResultRecord) -> Option<f64>,
    y_of: impl Fn(&ResultRecord) -> f64,
) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut metrics: Vec<String> = records.iter().map(|r| r.metric.clone()).collect();
    metrics.sort();
    metrics.dedup();
    metrics
        .into_iter()
        .map(|metric| {
            let mut pts: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.metric == metric)
                .filter_map(|r| x_of(r).map(|x| (x, y_of(r))))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (metric, pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect()
}

/// Writes error-vs-eps and compensated-vs-t plots; returns the file names
/// actually written.
pub fn write_svg_plots(records: &[ResultRecord], dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let eps_series = series_by_metric(records, |r| Some(r.eps), |r| r.value);
    if eps_series.iter().any(|(_, p)| p.len() > 1) {
        let path = dir.join("error_vs_eps.svg");
        std::fs::write(&path, svg_loglog(&eps_series, "eps", "operator norm"))?;
        written.push("error_vs_eps.svg".to_string());
    }
    let t_series = series_by_metric(records, |r| r.t, |r| r.compensated);
    if t_series.iter().any(|(_, p)| !p.is_empty()) {
        let path = dir.join("compensated_vs_t.svg");
        std::fs::write(&path, svg_loglog(&t_series, "t", "compensated value"))?;
        written.push("compensated_vs_t.svg".to_string());
    }
    Ok(written)
}
