use std::fs;
use std::path::Path;

use nls_cli::config::{ExponentText, RadiiConfig, ZeroModeConfig};
use nls_cli::{
    available_series, config_from_manifest, emit_plotdata, load_config, parse_config, run_experiment, CliError,
    Mode, Preset,
};

fn with_dir(text: &str, dir: &Path) -> String {
    format!("{text}\n[output]\ndir = {:?}\n", dir.display().to_string())
}

#[test]
fn minimal_file_gets_documented_defaults() {
    let cfg = parse_config("[problem]\nmu = 1\npreset = \"power_law\"\n", "inline").unwrap();
    assert_eq!(cfg.problem.preset, Preset::PowerLaw);
    assert_eq!(cfg.mesh.h, Some(0.05));
    assert_eq!(cfg.mesh.k, Some(0.01));
    assert_eq!(cfg.mesh.half_width, Some(20.0));
    assert_eq!(cfg.mesh.horizon, Some(1.0));
    assert_eq!(cfg.formal.generators, vec![ExponentText::Int(-1)]);
    assert_eq!(cfg.formal.floor, Some(ExponentText::Int(22)));
    assert_eq!(cfg.profile.radii, RadiiConfig::Damped);
    assert_eq!(cfg.profile.zero_mode, ZeroModeConfig::Blend);
    assert_eq!(cfg.scheme.norm_pairs, vec![[3, 0], [3, 3]]);
    assert_eq!(cfg.interp.window_x, None);
    assert_eq!(cfg.verify.envelope_tol, 0.05);
    assert_eq!(cfg.verify.ladder.len(), 2);
}

#[test]
fn validation_is_idempotent() {
    let cfg = parse_config("[problem]\nmu = -1\npreset = \"plane_wave\"\n", "inline").unwrap();
    let again = parse_config(&cfg.to_toml(), "echo").unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn positive_leading_exponent_is_rejected() {
    for text in [
        "[problem]\nmu = 1\npreset = \"power_law\"\n[formal]\nbeta0 = 0.25\n",
        "[problem]\nmu = 1\npreset = \"custom\"\n[formal]\ngenerators = [\"1/4\"]\nfloor = 2\nplus = [{ exponent = \"1/4\", re = 1.0 }]\n",
        "[problem]\nmu = -1\npreset = \"custom\"\n[formal]\ngenerators = [0]\nfloor = 2\nplus = [{ exponent = 0.5, re = 1.0 }]\n",
    ] {
        let err = parse_config(text, "inline").unwrap_err();
        match &err {
            CliError::Field {
                source: nls_core::Error::PositiveLeadingExponent { .. },
                ..
            } => {}
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.to_string().contains("no formal solution exists"));
    }
}

#[test]
fn unknown_key_is_named() {
    let err = parse_config("[problem]\nmu = 1\npreset = \"zero\"\n[mesh]\nwidth = 3.0\n", "inline").unwrap_err();
    assert!(matches!(err, CliError::Parse { .. }));
    let msg = err.to_string();
    assert!(msg.contains("width") && msg.contains("line 5"), "{msg}");
}

#[test]
fn invalid_values_name_the_field() {
    let cases = [
        ("[problem]\nmu = 2\npreset = \"zero\"\n", "problem.mu"),
        ("[problem]\nmu = 1\npreset = \"zero\"\n[mesh]\nh = -0.1\n", "mesh.h"),
        ("[problem]\nmu = 1\npreset = \"zero\"\n[mesh]\nk = 0.5\n", "mesh.k"),
        ("[problem]\nmu = 1\npreset = \"zero\"\n[verify]\nenvelope_tol = 0.0\n", "verify.envelope_tol"),
        ("[problem]\nmu = -1\npreset = \"soliton\"\n", "problem.mu"),
        ("[problem]\nmu = 1\npreset = \"custom\"\n", "formal.generators"),
    ];
    for (text, field) in cases {
        let msg = parse_config(text, "inline").unwrap_err().to_string();
        assert!(msg.contains(field), "{field}: {msg}");
    }
    let msg = parse_config("[problem\nmu = 1\n", "broken.toml").unwrap_err().to_string();
    assert!(msg.contains("broken.toml") && msg.contains("line 1"), "{msg}");
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_config(Path::new("/nonexistent/config.toml")).unwrap_err();
    assert!(matches!(err, CliError::Io { .. }));
}

#[test]
fn zero_preset_solve_has_zero_ledgers_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("zero");
    let path = tmp.path().join("zero.toml");
    fs::write(&path, with_dir("[problem]\nmu = 1\npreset = \"zero\"\n[mesh]\nh = 0.1\nk = 0.05\nhalf_width = 5.0\nhorizon = 0.5\n", &dir)).unwrap();
    let cfg = load_config(&path).unwrap();
    let outcome = run_experiment(&cfg, Mode::Solve).unwrap();
    assert!(outcome.passed());
    assert_eq!(outcome.exit_code(), 0);

    let norms = fs::read_to_string(dir.join("norms.csv")).unwrap();
    let mut lines = norms.lines();
    assert_eq!(lines.next(), Some("t,norm_sh,schwartz_3_0,schwartz_3_3"));
    for line in lines {
        for v in line.split(',').skip(1) {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
    }

    let echoed = config_from_manifest(&dir.join("manifest.toml")).unwrap();
    assert_eq!(echoed, cfg);
    let manifest = fs::read_to_string(dir.join("manifest.toml")).unwrap();
    assert!(manifest.starts_with("schema_version = 1"));
}

#[test]
fn plane_wave_solve_records_rounding_level_correction() {
    let tmp = tempfile::tempdir().unwrap();
    let text = with_dir(
        "[problem]\nmu = -1\npreset = \"plane_wave\"\n[mesh]\nh = 0.1\nk = 1e-3\nhalf_width = 8.0\nhorizon = 0.5\n",
        tmp.path(),
    );
    let cfg = parse_config(&text, "inline").unwrap();
    let outcome = run_experiment(&cfg, Mode::Solve).unwrap();
    assert!(outcome.passed(), "{:?}", outcome.checks);
    assert!(outcome.checks.iter().any(|c| c.name == "correction" && c.passed));
    assert!(outcome.summary["max_norm_sh"] <= 1e-8);
    assert!(outcome.summary["reference_error"] <= 1e-8);
}

#[test]
fn soliton_converge_reports_first_order_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    let text = with_dir(
        "[problem]\nmu = 1\npreset = \"soliton\"\n[verify]\nladder = [[0.0125, 4e-3], [0.0125, 2e-3], [0.0125, 1e-3]]\n",
        tmp.path(),
    );
    let cfg = parse_config(&text, "inline").unwrap();
    let outcome = run_experiment(&cfg, Mode::Converge).unwrap();
    assert!(outcome.passed(), "{:?}", outcome.checks);
    let csv = fs::read_to_string(tmp.path().join("convergence.csv")).unwrap();
    assert!(csv.starts_with("h,k,error,ratio\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(tmp.path().join("plot/convergence.dat").exists());
}

#[test]
fn stage_failure_is_named_and_manifest_kept() {
    let tmp = tempfile::tempdir().unwrap();
    let text = with_dir("[problem]\nmu = 1\npreset = \"power_law\"\n[formal]\nfloor = 4\n", tmp.path());
    let cfg = parse_config(&text, "inline").unwrap();
    let err = run_experiment(&cfg, Mode::Converge).unwrap_err();
    assert!(matches!(err, CliError::Stage { stage: nls_cli::Stage::Verify, .. }));
    let manifest = fs::read_to_string(tmp.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"error\""));
    assert!(manifest.contains("failed_stage = \"verify\""));
}

#[test]
fn identical_runs_write_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "[problem]\nmu = 1\npreset = \"power_law\"\n[mesh]\nh = 0.1\nk = 0.02\nhalf_width = 10.0\nhorizon = 0.2\n[formal]\nfloor = 6\n";
    let mut dirs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let cfg = parse_config(&with_dir(base, &dir), "inline").unwrap();
        run_experiment(&cfg, Mode::Solve).unwrap();
        dirs.push(dir);
    }
    for file in ["norms.csv", "snapshots.csv", "residuals.csv", "series_plus.txt", "plot/norm_sh.dat"] {
        let a = fs::read(dirs[0].join(file)).unwrap();
        let b = fs::read(dirs[1].join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
    for file in ["norms.csv", "snapshots.csv", "residuals.csv"] {
        let text = fs::read_to_string(dirs[0].join(file)).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("t,"), "{file}: {header}");
    }
}

#[test]
fn plotdata_selectors() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "[problem]\nmu = 1\npreset = \"power_law\"\n[mesh]\nh = 0.1\nk = 0.02\nhalf_width = 10.0\nhorizon = 0.2\n[formal]\nfloor = 6\n[output]\nsnapshot_stride = 5\ndir = {:?}\n",
        tmp.path().display().to_string()
    );
    let cfg = parse_config(&text, "inline").unwrap();
    run_experiment(&cfg, Mode::Solve).unwrap();

    let norm = emit_plotdata(tmp.path(), "norm_sh").unwrap();
    let first = fs::read_to_string(&norm).unwrap();
    let cols: Vec<&str> = first.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(cols.len(), 2);

    let series = available_series(tmp.path()).unwrap();
    assert!(series.contains(&"snapshot:0.1".to_string()), "{series:?}");
    let snap = emit_plotdata(tmp.path(), "snapshot:0.1").unwrap();
    assert!(snap.ends_with("plot/snapshot_t0.100000.dat"));
    assert_eq!(fs::read_to_string(snap).unwrap().lines().count(), 201);

    match emit_plotdata(tmp.path(), "nonexistent") {
        Err(CliError::MissingSeries { available, .. }) => {
            assert!(available.contains(&"norm_sh".to_string()));
            assert!(available.contains(&"schwartz_3_3".to_string()));
        }
        other => panic!("unexpected {other:?}"),
    }
}
