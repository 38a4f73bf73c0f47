use std::fs;
use std::path::Path;

use landau_core::harness::{ExperimentConfig, ExperimentKind};
use landau_core::kinetic::{read_snapshots, SimMode};
use landau_core::{run_experiment, Error, InteractionSign, ScaleFactorModel};
use serde_json::Value;

fn config(kind: ExperimentKind, dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.out_dir = dir.to_path_buf();
    cfg
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn penrose_attractive_reports_root() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::Penrose, dir.path());
    cfg.sign = InteractionSign::Attractive;
    cfg.penrose.k_max = 4;
    let out = run_experiment(&cfg).unwrap();
    assert!(out.pass, "{}", out.summary);
    assert_eq!(out.summary["stable"], Value::Bool(false));
    assert!(out.summary["checks"]["real_root_error"].as_f64().unwrap() <= 1e-6);
    assert_eq!(header(&dir.path().join("penrose_trace.csv")), "k_abs,omega,abs_dielectric");
}

#[test]
fn resolvent_q0_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::Resolvent, dir.path());
    cfg.resolvent.table_dtau = 0.05;
    let out = run_experiment(&cfg).unwrap();
    assert!(out.pass, "{}", out.summary);
    assert!(out.summary["route_max_disagreement"].as_f64().unwrap() <= 1e-4);
    assert!(out.summary["C_fit"].as_f64().unwrap() > 0.0);
    assert!(out.summary["growth_rate_fit"].is_null());
    let csv = fs::read_to_string(dir.path().join("resolvent.csv")).unwrap();
    assert!(csv.starts_with("tau,tau_tilde,value\n"));
    assert_eq!(csv.lines().count(), 1 + 201 * 202 / 2);
}

#[test]
fn resolvent_attractive_growth() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::Resolvent, dir.path());
    cfg.sign = InteractionSign::Attractive;
    cfg.resolvent.table_dtau = 0.1;
    cfg.resolvent.dtau = 0.01;
    cfg.resolvent.route_tolerance = 1e-2;
    cfg.resolvent.oracle_tolerance = f64::INFINITY;
    let out = run_experiment(&cfg).unwrap();
    assert!(out.pass, "{}", out.summary);
    assert!(out.summary["growth_rate_fit"]["relative_error"].as_f64().unwrap() <= 0.02);
}

#[test]
fn lg_verify_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::LgVerify, dir.path());
    cfg.model = ScaleFactorModel::power_law(0.25, 1.0).unwrap();
    let out = run_experiment(&cfg).unwrap();
    assert!(out.pass, "{}", out.summary);
    assert_eq!(out.summary["violations"], 0);
    assert_eq!(header(&dir.path().join("lg_verify.csv")), "x,w_reference,w_lg,budget,defect");
}

#[test]
fn linear_decay_artifacts_and_determinism() {
    let run = |dir: &Path| {
        let mut cfg = config(ExperimentKind::LinearDecay, dir);
        cfg.sim.mode = SimMode::Linearized;
        cfg.sim.k_max = 1;
        cfg.sim.n_xi = 512;
        cfg.sim.xi_max = 14.0;
        cfg.sim.tau_end = 8.0;
        cfg.sim.dtau = 0.02;
        cfg.sim.out_every = 5;
        cfg.sim.snapshot_every = 4;
        cfg.sim.epsilon = 1.0;
        run_experiment(&cfg).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = run(a.path());
    run(b.path());
    assert!(out.pass, "{}", out.summary);
    assert!(out.summary["checks"]["volterra_max_relative_error"].as_f64().unwrap() <= 1e-2);
    assert!(out.summary["decay_fit_tau"]["c_hat"].as_f64().unwrap() > 0.0);
    for name in ["timeseries.csv", "diagnostics.csv", "h_infinity.csv", "snapshots.bin"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    assert_eq!(
        header(&a.path().join("timeseries.csv")),
        "tau,t,rho_re_-1,rho_im_-1,rho_re_0,rho_im_0,rho_re_1,rho_im_1,F_tilde,G_tilde,diag_bootstrap,diag_embedding,phys_density_norm"
    );
    assert_eq!(header(&a.path().join("diagnostics.csv")), "tau,z,F,G,F_over_sqrtG");
    let (snaps, xi) = read_snapshots(fs::File::open(a.path().join("snapshots.bin")).unwrap()).unwrap();
    assert_eq!(xi, 14.0);
    // 80 output rows plus the initial one, every 4th kept.
    assert_eq!(snaps.len(), 21);
    assert_eq!(snaps[0].n_nodes, 513);
    let echo: Value = serde_json::from_str(&fs::read_to_string(a.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["experiment"], "linear_decay");
}

#[test]
fn free_streaming_decay_is_flagged_non_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::LinearDecay, dir.path());
    cfg.sim.mode = SimMode::FreeStreaming;
    cfg.sim.tau_end = 8.0;
    cfg.sim.epsilon = 1.0;
    cfg.decay.window = Some([2.0, 6.0]);
    let out = run_experiment(&cfg).unwrap();
    assert!(out.pass, "{}", out.summary);
    assert_eq!(out.summary["decay_fit_tau"]["non_exponential"], Value::Bool(true));
    assert!(out.summary["checks"]["free_streaming_max_error"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn nonlinear_sim_small() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::NonlinearSim, dir.path());
    cfg.model = ScaleFactorModel::power_law(0.25, 1.0).unwrap();
    cfg.sim.k_max = 2;
    cfg.sim.n_xi = 256;
    cfg.sim.tau_end = 4.0;
    cfg.sim.dtau = 0.02;
    let out = run_experiment(&cfg).unwrap();
    assert!(out.pass, "{}", out.summary);
    assert_eq!(out.summary["mode"], "full_nonlinear");
    assert_eq!(out.summary["max_neutrality_defect"], 0.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::NonlinearSim, dir.path());
    cfg.sim.tau_end = 8.0;
    match run_experiment(&cfg) {
        Err(Error::Config(e)) => assert!(e.iter().any(|m| m.contains("xi_max")), "{e:?}"),
        other => panic!("{other:?}"),
    }
    let mut cfg = config(ExperimentKind::LinearDecay, dir.path());
    cfg.sim.mode = SimMode::FullNonlinear;
    assert!(run_experiment(&cfg).is_err());
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}
