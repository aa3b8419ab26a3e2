use std::process::Command;

use geo_pid_cli::commands::{
    cmd_critical, cmd_gains, cmd_sim, cmd_sweep, CliError, Overrides, Range, SweepRanges,
};
use geo_pid_cli::config::{parse_config, SystemConfig};

fn builtin(name: &str) -> SystemConfig {
    SystemConfig::builtin(name).expect("builtin exists")
}

fn short(name: &str, t_end: f64) -> SystemConfig {
    let mut cfg = builtin(name);
    Overrides {
        t_end: Some(t_end),
        ..Default::default()
    }
    .apply(&mut cfg)
    .unwrap();
    cfg
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no key {key} in\n{text}"))
}

#[test]
fn sim_csv_schema() {
    let out = cmd_sim(&short("unicycle", 0.5), false).unwrap();
    let mut lines = out.csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x,y,theta,u1,u2,w1,w2,residual,W,f1,f2,f3"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 501);
    for r in &rows {
        let cells: Vec<f64> = r.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 13);
        assert!(cells[8] < 1e-10, "rolling residual {}", cells[8]);
    }
    assert!(out.svg.is_none());
}

#[test]
fn zero_gains_never_converge() {
    let mut cfg = short("unicycle", 2.0);
    Overrides {
        kp: Some(0.0),
        kd: Some(0.0),
        ki: Some(0.0),
        ..Default::default()
    }
    .apply(&mut cfg)
    .unwrap();
    let out = cmd_sim(&cfg, false).unwrap();
    let text = out.summary.to_text();
    assert_eq!(value(&text, "converged"), "false");
    assert!(out.summary.certificate.starts_with("FAIL"));
    // nothing moves, so W stays put
    let w: Vec<f64> = out
        .csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(9).unwrap().parse().unwrap())
        .collect();
    assert!(w.iter().all(|&x| x == w[0]));
}

#[test]
fn euclidean_sim_converges() {
    let out = cmd_sim(&builtin("euclidean"), true).unwrap();
    assert!(out.summary.converged);
    assert!(out.summary.w_monotone);
    assert!(out.svg.unwrap().contains("<polyline"));
}

#[test]
fn gains_verdicts() {
    let pass = cmd_gains(&builtin("unicycle"), false, None, None).unwrap();
    assert_eq!(value(&pass, "verdict"), "PASS");

    let mut weak = builtin("unicycle");
    weak.gains.kp = 1.0;
    let fail = cmd_gains(&weak, false, None, None).unwrap();
    assert_eq!(value(&fail, "verdict"), "FAIL");
    assert!(value(&fail, "violated").contains("kp > kp_bound"));

    match cmd_gains(&builtin("unicycle"), false, None, Some(0.0)) {
        Err(CliError::Geo(_)) => {}
        other => panic!("expected a parameter error, got {other:?}"),
    }
}

#[test]
fn gains_grid_reports_best_kappa() {
    let text = cmd_gains(&builtin("unicycle"), true, None, None).unwrap();
    let kappa: f64 = value(&text, "best_kappa").parse().unwrap();
    assert!(kappa > 0.0 && kappa < 2.0);
    // 50 table rows after the header
    let table = text.split("\n\n").nth(1).unwrap();
    assert_eq!(table.lines().count(), 51);
}

#[test]
fn critical_points() {
    let text = cmd_critical(&builtin("euclidean")).unwrap();
    assert_eq!(value(&text, "points"), "1");
    assert!(text.contains(",minimum,true"));

    let text = cmd_critical(&builtin("unicycle")).unwrap();
    let n: usize = value(&text, "points").parse().unwrap();
    assert!(n >= 1);
    assert!(text.lines().any(|l| l.ends_with(",true")));
}

#[test]
fn critical_on_empty_region_is_an_error() {
    let mut cfg = builtin("euclidean");
    cfg.region.upper = cfg.region.lower.clone();
    assert!(cmd_critical(&cfg).is_err());
}

#[test]
fn sweep_is_deterministic() {
    let cfg = short("euclidean", 1.0);
    let ranges = SweepRanges {
        kp: Some("1:3:3".parse().unwrap()),
        kd: Some("0.5:1.5:3".parse().unwrap()),
        ki: None,
    };
    let a = cmd_sweep(&cfg, &ranges).unwrap();
    let b = cmd_sweep(&cfg, &ranges).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 10);
    let kps: Vec<&str> = a
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(kps[0], kps[2]);
    assert_ne!(kps[2], kps[3]);
}

#[test]
fn range_parsing() {
    let r: Range = "0:1:5".parse().unwrap();
    assert_eq!(r.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!("2".parse::<Range>().unwrap().values(), vec![2.0]);
    assert!("1:2".parse::<Range>().is_err());
    assert!("1:2:0".parse::<Range>().is_err());
}

#[test]
fn overrides_reject_bad_steps() {
    let mut cfg = builtin("euclidean");
    let bad = Overrides {
        dt: Some(0.0),
        ..Default::default()
    };
    assert!(bad.apply(&mut cfg).is_err());
}

#[test]
fn custom_config_through_sim() {
    let text =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/polar.cfg"))
            .unwrap();
    let cfg = parse_config(&text).unwrap();
    let out = cmd_sim(&cfg, false).unwrap();
    assert!(out.summary.max_constraint_residual < 1e-8);
}

#[test]
fn binary_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_geo-pid"))
        .args(["sim", "unicycle", "--t-end", "0.2", "--svg", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    for f in ["trajectory.csv", "summary.txt", "trajectory.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }

    let bad = Command::new(env!("CARGO_BIN_EXE_geo-pid"))
        .args(["gains", "unicycle", "--mu", "0"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("mu"));

    let sweep = Command::new(env!("CARGO_BIN_EXE_geo-pid"))
        .args([
            "sweep",
            "euclidean",
            "--t-end",
            "0.5",
            "--kp-range",
            "1:2:2",
            "--kd",
            "1.5",
        ])
        .output()
        .unwrap();
    assert!(
        sweep.status.success(),
        "{}",
        String::from_utf8_lossy(&sweep.stderr)
    );
    let text = String::from_utf8(sweep.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("1.5000000000000000e0")));
}
