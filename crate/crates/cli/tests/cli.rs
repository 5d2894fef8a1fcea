use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use skewlab_cli::runner::{run, Status, Subcommand};
use skewlab_cli::{parse_config, ConfigError};

const SMALL: &str = r#"
[map]
matrix = [3, 1, 1, 1]

[bump]
radius = 0.3
amplitude = 2.0

[experiment]
name = "small"
seed = 3

[params]
lyapunov_iterations = 20000
lyapunov_starts = 2
center_samples = 20
center_orbit_length = 500
bundle_points = 5
rate_samples = 4
holonomy_grid = 3
su_targets = 3
leaf_length = 200.0
leaf_grid = 5
birkhoff_starts = 10
birkhoff_iterations = 20000
transitivity_grid = 5
transitivity_iterations = 200
cloud_size = 200
srb_points = 41
volume_samples = 200
"#;

fn skewlab(args: &[&str], config: &Path, out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_skewlab"));
    cmd.args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out);
    if let Some(t) = threads {
        cmd.env("SKEWLAB_THREADS", t);
    }
    cmd.output().unwrap()
}

fn with_thresholds(extra: &str) -> String {
    format!("{SMALL}\n[thresholds]\n{extra}\n")
}

#[test]
fn all_runs_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(
        &cfg,
        with_thresholds("coverage_min = 0.5\nsupath_reached_fraction_min = 1.0"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = skewlab(&["all"], &cfg, &out, None);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    for file in [
        "volume.csv",
        "lyapunov.csv",
        "center_exponent.csv",
        "splitting.csv",
        "rates.csv",
        "spread.csv",
        "holonomy.csv",
        "supath.csv",
        "supath_legs.csv",
        "minimality.csv",
        "birkhoff.csv",
        "transitivity.csv",
        "srb.csv",
    ] {
        assert!(out.join(file).exists(), "{file}");
        assert!(manifest.contains(&format!("file {file}")), "{file}");
    }
    assert!(manifest.contains("overall: PASS (exit 0)"));
    assert!(manifest.contains("experiment: small"));
    assert!(manifest.contains("params.depth"));
    let holonomy = fs::read_to_string(out.join("holonomy.csv")).unwrap();
    assert_eq!(holonomy.lines().next(), Some("t,s,holonomy"));
    assert_eq!(holonomy.lines().count(), 10);
}

#[test]
fn failed_threshold_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.cfg");
    fs::write(&cfg, with_thresholds("coverage_min = 1.5")).unwrap();
    let o = skewlab(&["transitivity"], &cfg, &dir.path().join("out"), None);
    assert_eq!(o.status.code(), Some(1));
    let manifest = fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("[transitivity] FAIL"));
    assert!(manifest.contains("coverage_min"));
}

#[test]
fn malformed_config_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(
        &cfg,
        "[map]\nmatrix = [3, 1, 1, 1]\n[params]\ndepth = = 4\n",
    )
    .unwrap();
    let o = skewlab(&["exponents"], &cfg, &dir.path().join("out"), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.cfg");
    fs::write(&cfg, "[map]\nmatrix = [3, 1, 1, 1]\n[params]\ndepht = 40\n").unwrap();
    let o = skewlab(&["exponents"], &cfg, &dir.path().join("out"), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.depht"));
}

#[test]
fn bad_thread_count_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let o = skewlab(
        &["volume-check"],
        &cfg,
        &dir.path().join("out"),
        Some("zero"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn circle_base_marks_torus_experiments_not_applicable() {
    let cfg = parse_config(
        "[map]\nmultiplier = 2\n[bump]\nradius = 0.3\n[params]\nbirkhoff_starts = 10\nbirkhoff_iterations = 5000\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run(Subcommand::Holonomy, &cfg, dir.path()).unwrap();
    assert_eq!(
        m.outcomes[0].status,
        Status::NotApplicable("expanding base".into())
    );
    assert_eq!(m.exit_code(), 0);
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("n/a: expanding base"));

    let m = run(Subcommand::Birkhoff, &cfg, dir.path()).unwrap();
    assert_eq!(m.outcomes[0].status, Status::Completed);
    let csv = fs::read_to_string(dir.path().join("birkhoff.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("start_x,start_theta,N,average"));
}

#[test]
fn product_map_metrics_are_degenerate() {
    let cfg = parse_config(&SMALL.replace("radius = 0.3\namplitude = 2.0\n", "")).unwrap();
    assert!(cfg.bump.is_none());
    let dir = tempfile::tempdir().unwrap();
    for (sub, metric) in [
        (Subcommand::Holonomy, "integrability_defect"),
        (Subcommand::Spread, "spread"),
        (Subcommand::Supath, "supath_reached_fraction"),
        (Subcommand::Srb, "srb_uniform_deviation"),
    ] {
        let m = run(sub, &cfg, dir.path()).unwrap();
        assert_eq!(m.outcomes[0].metric(metric), Some(0.0), "{metric}");
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = parse_config(SMALL).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for sub in [
        Subcommand::Exponents,
        Subcommand::Supath,
        Subcommand::Transitivity,
    ] {
        let ma = run(sub, &cfg, a.path()).unwrap();
        let mb = run(sub, &cfg, b.path()).unwrap();
        assert_eq!(ma.outcomes[0].metrics, mb.outcomes[0].metrics);
        for f in &ma.outcomes[0].files {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }
}

#[test]
fn validation_errors_name_keys() {
    for (text, key) in [
        ("[map]\nmatrix = [1, 1, 0, 1]\n", "map.matrix"),
        ("[map]\nmultiplier = 1\n", "map.multiplier"),
        (
            "[map]\nmatrix = [3, 1, 1, 1]\n[bump]\nradius = 0.7\n",
            "bump.radius",
        ),
        (
            "[map]\nmatrix = [3, 1, 1, 1]\n[thresholds]\nnonsense_max = 1\n",
            "thresholds.nonsense_max",
        ),
    ] {
        match parse_config(text) {
            Err(ConfigError::Validation { key: k, .. }) => assert_eq!(k, key, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}
