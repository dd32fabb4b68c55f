//! End-to-end smoke tests driving the compiled binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn homog() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homog"))
}

fn run(args: &[&str]) -> Output {
    homog().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn effective_prints_reference_gap_for_cos1d() {
    let text = stdout(&run(&["effective", "--preset", "cos1d"]));
    assert!(text.contains("g0 ="), "{text}");
    assert!(text.contains("max entry gap"), "{text}");
    // g0 = sqrt(3) = 1.73...
    assert!(text.contains("+1.73"), "{text}");
}

#[test]
fn cell_dumps_lambda_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = stdout(&run(&["cell", "--preset", "cos1d", "--out", out]));
    assert!(text.contains("lambda.csv"), "{text}");
    let csv = std::fs::read_to_string(dir.path().join("lambda.csv")).unwrap();
    assert!(csv.starts_with("index,x0,re_l0_0,im_l0_0"));
    assert_eq!(csv.lines().count(), 65); // header + 64 cell samples
}

#[test]
fn contour_check_reports_tiny_gaps() {
    let text = stdout(&run(&["contour-check", "--t-list", "1.0"]));
    let gaps: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().trim().parse().unwrap())
        .collect();
    assert_eq!(gaps.len(), 4);
    assert!(gaps.last().unwrap() < &1e-8, "{text}");
}

#[test]
fn sweep_writes_records_and_report_reads_them_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = stdout(&run(&[
        "sweep",
        "--preset",
        "constant",
        "--grid",
        "32",
        "--eps-list",
        "4,8",
        "--t-list",
        "0.5",
        "--zeta-list",
        "1.0:2.356194490192345",
        "--seed",
        "5",
        "--out",
        out,
        "--plot",
    ]));
    assert!(text.contains("records.csv"), "{text}");
    let csv_path = dir.path().join("records.csv");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("experiment_id,preset,d,n,m,N,K,eps,t,"));
    assert_eq!(csv.lines().count(), 1 + 2 * 6);
    assert!(dir.path().join("error_vs_eps.svg").exists());

    let report = stdout(&run(&["report", csv_path.to_str().unwrap()]));
    assert!(report.contains("12 records"), "{report}");
    assert!(report.contains("frak_c"), "{report}");
}

#[test]
fn config_file_drives_the_run_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
        [problem]
        preset = "cos1d"
        [grid]
        n = 32
        n_cell = 32
        [sweep]
        eps_denominators = [4]
        t_list = []
        zeta_list = [[1.0, 2.356194490192345]]
        [solver]
        opnorm_tol = 1e-3
        opnorm_max_iters = 40
        "#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let text = stdout(&run(&[
        "resolvent-error",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]));
    assert!(text.contains("records.json"), "{text}");
    let json = std::fs::read_to_string(out.join("records.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 3); // one eps, three metrics
}

#[test]
fn invalid_config_fails_with_field_message() {
    let out = run(&["sweep", "--preset", "cos1d", "--grid", "32", "--eps-list", "3"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("eps_denominators"), "{err}");
}

#[test]
fn rerun_with_same_seed_is_byte_identical_up_to_wall_time() {
    let args = |dir: &str| {
        vec![
            "sweep".to_string(),
            "--preset".into(),
            "cos1d".into(),
            "--grid".into(),
            "32".into(),
            "--eps-list".into(),
            "4".into(),
            "--t-list".into(),
            "0.5".into(),
            "--zeta-list".into(),
            "1.0:2.356194490192345".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            dir.to_string(),
        ]
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    stdout(&homog().args(args(d1.path().to_str().unwrap())).output().unwrap());
    stdout(&homog().args(args(d2.path().to_str().unwrap())).output().unwrap());
    let strip = |p: PathBuf| -> String {
        // wall_ms (column 20) is the one timing-dependent field
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                if f.len() == 21 {
                    f[19] = "-";
                }
                f.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        strip(d1.path().join("records.csv")),
        strip(d2.path().join("records.csv"))
    );
}
