use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qrouter_cli::{preset, run_steady, CliError, Scenario, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_PHYSICALITY, PRESETS};
use qrouter_core::FluxState;

const SHORT: &str = r#"
name = "short"

[params]
delta2 = 2e-3
omega_c = 0.03
eta1 = 1e-3
eta2 = 1e-3
eta3 = 1e-3

[pulse]
tau_p = 500.0

[flux]
alpha = 0.7071067811865476

[integrator]
samples = 600
"#;

fn qrouter(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrouter"))
        .args(args)
        .current_dir(dir)
        .env_remove("QROUTER_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn presets_load_and_round_trip() {
    for (name, _) in PRESETS {
        let s = preset(name).unwrap();
        assert_eq!(s.name, name);
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s, "{name}");
    }
}

#[test]
fn experimental_preset_converts_physical_units() {
    let (p, pulse) = preset("experimental").unwrap().resolved().unwrap();
    assert!((p.gamma_star - 181.0 / 3e8).abs() < 1e-18);
    assert!((pulse.tau_p - 30e-6 * 2.0 * std::f64::consts::PI * 3e8).abs() < 1e-6);
    assert_eq!((p.gamma1, p.gamma2), (0.1, 0.1));
    assert!((p.big_gamma2() - 2.1).abs() < 1e-12);
}

#[test]
fn sweep_parameter_must_exist() {
    let base = preset("fig4c").unwrap();
    match base.with_value("params.gamma_nope", 1.0) {
        Err(CliError::Config(m)) => assert!(m.contains("gamma_nope") && m.contains("gamma_star"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(base.with_value("solver.rtol", 1.0), Err(CliError::Config(_))));
    assert!(matches!(base.with_value("params", 1.0), Err(CliError::Config(_))));
}

#[test]
fn sweep_values_update_dependent_fields() {
    let base = preset("fig4c").unwrap();
    let s = base.with_value("flux.alpha", 0.6).unwrap();
    assert!((s.flux.beta_abs - 0.8).abs() < 1e-15);
    let s = base.with_value("params.gamma2", 0.5).unwrap();
    assert!((s.params.xi_2 - 1.0 / 2.5).abs() < 1e-15);
    let s = base.with_value("pulse.tau_p", 2e3).unwrap();
    assert_eq!(s.pulse.as_ref().unwrap().tau, 1.1e4);
    // a swept rate wins over the laboratory-unit entry for the same field
    let exp = preset("experimental").unwrap();
    let s = exp.with_value("params.gamma_star", 1e-4).unwrap();
    assert_eq!(s.resolved().unwrap().0.gamma_star, 1e-4);
    assert!(matches!(base.with_value("flux.alpha", 2.0), Err(CliError::Config(_))));
}

#[test]
fn config_errors_name_the_field() {
    let bad = SHORT.replace("omega_c", "omega_x");
    match Scenario::from_toml(&bad) {
        Err(CliError::Config(m)) => assert!(m.contains("omega_x"), "{m}"),
        other => panic!("{other:?}"),
    }
    let bad = SHORT.replace("tau_p = 500.0", "tau_p = -1.0");
    match Scenario::from_toml(&bad) {
        Err(CliError::Config(m)) => assert!(m.contains("tau_p"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn exit_codes_follow_error_class() {
    use qrouter_core::Error as E;
    assert_eq!(CliError::Config(String::new()).exit_code(), EXIT_CONFIG);
    assert_eq!(CliError::Run(E::PhysicalityViolation { time: 0.0, what: String::new() }).exit_code(), EXIT_PHYSICALITY);
    assert_eq!(CliError::Run(E::NegativeFlux { time: 0.0, value: -1.0 }).exit_code(), EXIT_PHYSICALITY);
    assert_eq!(CliError::Run(E::NonConvergence { time: 0.0, step: 0.0 }).exit_code(), EXIT_CONVERGENCE);
}

#[test]
fn fig3_windows() {
    let out = run_steady(&preset("fig3").unwrap()).unwrap();
    let width = 2.0 * 0.03f64.powi(2);
    for (state, center) in [(FluxState::G, 2e-3), (FluxState::E, -2e-3)] {
        let w = &out.scan.curve(state).unwrap().summary;
        assert!((w.center - center).abs() < 1e-5, "{w:?}");
        assert!((w.width.unwrap() - width).abs() < 0.2 * width, "{w:?}");
    }
}

#[test]
fn zero_shift_gives_one_shared_window() {
    let s = preset("fig3").unwrap().with_value("params.eta1", 0.0).unwrap();
    let s = s.with_value("params.eta2", 0.0).unwrap().with_value("params.eta3", 0.0).unwrap();
    let out = run_steady(&s).unwrap();
    for c in &out.scan.curves {
        assert!(c.summary.center.abs() < 1e-9, "{:?}", c.summary);
    }
}

#[test]
fn steady_respects_grid() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SHORT}\n[steady]\ndelta2_min = -1e-3\ndelta2_max = 3e-3\npoints = 37\n");
    let cfg = write(dir.path(), "grid.toml", &body);
    let o = qrouter(&["steady", "--config", &cfg, "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/short/windows.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "delta2,T_g,R_g,T_e,R_e");
    assert_eq!(lines.len(), 38);
    assert!(lines[1].starts_with("-0.001,"));
    assert!(dir.path().join("out/short/windows.gp").exists());
}

#[test]
fn dynamics_is_reproducible_and_closes_the_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.toml", SHORT);
    let mut analysis = Vec::new();
    for out in ["a", "b"] {
        let o = qrouter(&["dynamics", "--config", &cfg, "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        analysis.push(fs::read(dir.path().join(out).join("short/analysis.csv")).unwrap());
    }
    assert_eq!(analysis[0], analysis[1]);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/short/report.json")).unwrap()).unwrap();
    let r = &report["report"];
    let e_r = r["e_r"].as_f64().unwrap();
    let e_l = r["e_l"].as_f64().unwrap();
    assert!(r["diagnostics"]["ledger_error"].as_f64().unwrap() < 1e-4);
    assert!(e_r + e_l > 0.9 && e_r + e_l <= 1.0 + 1e-6);
    let h = &report["herald"];
    let p = h["psi_plus"]["probability"].as_f64().unwrap() + h["psi_minus"]["probability"].as_f64().unwrap();
    assert!((p - (e_r + e_l)).abs() < 1e-6);

    let ts = fs::read_to_string(dir.path().join("a/short/timeseries.csv")).unwrap();
    assert_eq!(ts.lines().count(), 601);
}

#[test]
fn json_format_and_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.toml", SHORT);
    let o = Command::new(env!("CARGO_BIN_EXE_qrouter"))
        .args(["dynamics", "--config", &cfg, "--format", "json", "--samples", "200"])
        .current_dir(dir.path())
        .env("QROUTER_OUT", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let ts: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("from-env/short/timeseries.json")).unwrap()).unwrap();
    assert_eq!(ts["times"].as_array().unwrap().len(), 200);
    assert!(!dir.path().join("from-env/short/timeseries.csv").exists());
}

#[test]
fn sweep_records_failed_rows_and_keeps_order() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SHORT}\n[sweep]\nparameter = \"flux.alpha\"\nvalues = [0.7071067811865476, 2.0, 1.0]\n");
    let cfg = write(dir.path(), "sweep.toml", &body);
    let o = qrouter(&["sweep", "--config", &cfg, "--out", "out", "--threads", "2", "--samples", "300"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(dir.path().join("out/short/sweep.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().get(1), Some("alpha"));
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), i);
    }
    assert!(rows[0][9].is_empty() && rows[2][9].is_empty());
    assert!(rows[1][2].is_empty() && rows[1][9].contains("beta_abs"), "{:?}", rows[1]);
    // a basis-state flux qubit leaves the photon unentangled
    let e_r: f64 = rows[2][2].parse().unwrap();
    let e_l: f64 = rows[2][3].parse().unwrap();
    let c: f64 = rows[2][6].parse().unwrap();
    assert!(c < 1e-6 && (e_r + e_l - 1.0).abs() < 1e-3);
}

#[test]
fn command_line_errors_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrouter(&["dynamics", "--config", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_CONFIG as i32));
    let cfg = write(dir.path(), "bad.toml", &SHORT.replace("alpha = 0.7071067811865476", "alpha = 0.5\nbeta_abs = 0.5"));
    let o = qrouter(&["dynamics", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_CONFIG as i32), "{}", stderr(&o));
    let cfg = write(dir.path(), "short.toml", SHORT);
    let o = qrouter(&["sweep", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_CONFIG as i32));
    assert!(stderr(&o).contains("[sweep]"));
}

#[test]
fn step_budget_exhaustion_is_a_convergence_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", &format!("{SHORT}max_steps = 20\n"));
    let o = qrouter(&["dynamics", "--config", &cfg, "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_CONVERGENCE as i32), "{}", stderr(&o));
}

#[test]
fn presets_list_names_every_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrouter(&["presets", "list"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for (name, _) in PRESETS {
        assert!(text.contains(name));
    }
}

#[test]
fn sweep_row_matches_single_run() {
    let body = format!("{SHORT}\n[sweep]\nparameter = \"params.gamma_star\"\nvalues = [0.0, 1e-3]\n");
    let s = Scenario::from_toml(&body).unwrap();
    let opts = s.evolve_options(Some(300), None);
    let sweep = qrouter_cli::run_sweep(&s, &opts).unwrap();
    let single = qrouter_cli::run_dynamics(&s, &opts).unwrap();
    let row = sweep.rows[0].result.as_ref().unwrap();
    let r = &single.analysis.report;
    assert_eq!((row.e_r, row.e_l, row.fidelity, row.concurrence), (r.e_r, r.e_l, r.fidelity_max, r.concurrence));
    let dephased = sweep.rows[1].result.as_ref().unwrap();
    assert!(dephased.concurrence < row.concurrence);
}
