//! Experiment orchestration: config ingestion, the five canonical experiments,
//! decay fits and the on-disk artifacts.
//!
//! Every experiment writes `config.json` (the parsed config echoed back), one
//! or more CSVs and a `summary.json` whose top-level `pass` reflects the
//! module checks of that experiment.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::equilibrium::{Equilibrium, InteractionSign, ModeKernel};
use crate::error::{domain, Error, Result};
use crate::fit::line_fit;
use crate::gevrey::{self, GevreyParams};
use crate::kinetic::{self, InitialData, RunOptions, SimConfig, SimMode, SimRecord};
use crate::liouville_green::{self, ComposedFactor, LGBasis, ReferenceMethod};
use crate::penrose::{self, ScanOptions};
use crate::volterra::{self, TauGrid};
use crate::ScaleFactorModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Penrose,
    Resolvent,
    LgVerify,
    LinearDecay,
    NonlinearSim,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Penrose => "penrose",
            ExperimentKind::Resolvent => "resolvent",
            ExperimentKind::LgVerify => "lg_verify",
            ExperimentKind::LinearDecay => "linear_decay",
            ExperimentKind::NonlinearSim => "nonlinear_sim",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenroseSettings {
    pub k_max: u32,
    pub n_scan: usize,
    pub omega_max: Option<f64>,
    /// Points per mode in `penrose_trace.csv`.
    pub trace_points: usize,
    /// Random λ samples for the closed-form check (Poisson only).
    pub closed_form_samples: usize,
}

impl Default for PenroseSettings {
    fn default() -> Self {
        PenroseSettings { k_max: 10, n_scan: 256, omega_max: None, trace_points: 201, closed_form_samples: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventSettings {
    pub k_abs: f64,
    pub tau_max: f64,
    /// Step of the full table written to `resolvent.csv`.
    pub table_dtau: f64,
    /// Step of the single-column route comparisons.
    pub dtau: f64,
    /// `τ̃` values whose columns are compared across routes.
    pub columns: Vec<f64>,
    pub growth_window: [f64; 2],
    pub route_tolerance: f64,
    pub oracle_tolerance: f64,
}

impl Default for ResolventSettings {
    fn default() -> Self {
        ResolventSettings {
            k_abs: 1.0,
            tau_max: 10.0,
            table_dtau: 0.02,
            dtau: 1e-3,
            columns: vec![0.0, 5.0],
            growth_window: [5.0, 15.0],
            route_tolerance: 1e-3,
            oracle_tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LgSettings {
    /// Multiplies `a(T(τ))`; the kinetic kernel carries `4π`.
    pub scale: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_nodes: usize,
    pub wronskian_tolerance: f64,
}

impl Default for LgSettings {
    fn default() -> Self {
        LgSettings { scale: 4.0 * PI, lo: 0.0, hi: 30.0, n_nodes: 601, wronskian_tolerance: 1e-8 }
    }
}

/// Kinetic run settings. The model, equilibrium, sign and dimension come from
/// the enclosing config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub k_max: u32,
    pub xi_max: f64,
    pub n_xi: usize,
    pub dtau: f64,
    pub tau_end: f64,
    /// `linear_decay` accepts `free_streaming` or `linearized`; `nonlinear_sim`
    /// always runs `full_nonlinear`.
    pub mode: SimMode,
    pub epsilon: f64,
    pub initial: InitialData,
    pub blowup_threshold: f64,
    pub out_every: usize,
    pub snapshot_every: usize,
    pub lambda_prime: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        let s = SimConfig::default();
        let o = RunOptions::default();
        SimSettings {
            k_max: s.k_max,
            xi_max: s.xi_max,
            n_xi: s.n_xi,
            dtau: s.dtau,
            tau_end: s.tau_end,
            mode: SimMode::Linearized,
            epsilon: s.epsilon,
            initial: s.initial,
            blowup_threshold: s.blowup_threshold,
            out_every: o.out_every,
            snapshot_every: o.snapshot_every,
            lambda_prime: o.lambda_prime,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefactorMode {
    None,
    /// Divide out `a(t)^{-dim}` before fitting.
    AMinusD,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayForm {
    /// Abscissa `⟨τ⟩^γ`.
    Bracket,
    /// Abscissa `τ^γ`.
    Plain,
    /// Abscissa `t^{γ(1-2q)}`.
    Time,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySettings {
    /// Defaults to the Gevrey γ.
    pub gamma: Option<f64>,
    pub prefactor_mode: PrefactorMode,
    /// τ-range; `None` drops the first `burn_in` fraction.
    pub window: Option<[f64; 2]>,
    pub burn_in: f64,
    /// Fit only local maxima of the magnitude when the window holds at least
    /// three of them.
    pub envelope: bool,
}

impl Default for DecaySettings {
    fn default() -> Self {
        DecaySettings { gamma: None, prefactor_mode: PrefactorMode::None, window: None, burn_in: 0.2, envelope: true }
    }
}

fn default_model() -> ScaleFactorModel {
    ScaleFactorModel::Constant { t0: 1.0 }
}

fn default_eq() -> Equilibrium {
    Equilibrium::Poisson { theta0: 1.0, dim: 1 }
}

fn default_sign() -> InteractionSign {
    InteractionSign::Repulsive
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_model")]
    pub model: ScaleFactorModel,
    #[serde(default = "default_eq")]
    pub eq: Equilibrium,
    #[serde(default = "default_sign")]
    pub sign: InteractionSign,
    #[serde(default)]
    pub gevrey: GevreyParams,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub penrose: PenroseSettings,
    #[serde(default)]
    pub resolvent: ResolventSettings,
    #[serde(default)]
    pub lg: LgSettings,
    #[serde(default)]
    pub decay: DecaySettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            model: default_model(),
            eq: default_eq(),
            sign: default_sign(),
            gevrey: GevreyParams::default(),
            sim: SimSettings::default(),
            penrose: PenroseSettings::default(),
            resolvent: ResolventSettings::default(),
            lg: LgSettings::default(),
            decay: DecaySettings::default(),
            seed: 0,
            out_dir: default_out(),
        }
    }

    /// Parses and validates; all problems are reported together.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        let mode = if self.experiment == ExperimentKind::NonlinearSim { SimMode::FullNonlinear } else { s.mode };
        SimConfig {
            dim: self.eq.dim(),
            k_max: s.k_max,
            xi_max: s.xi_max,
            n_xi: s.n_xi,
            dtau: s.dtau,
            tau_end: s.tau_end,
            mode,
            model: self.model,
            eq: self.eq,
            sign: self.sign,
            epsilon: s.epsilon,
            initial: s.initial.clone(),
            blowup_threshold: s.blowup_threshold,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            out_every: self.sim.out_every,
            snapshot_every: self.sim.snapshot_every,
            diagnostics: true,
            lambda_prime: self.sim.lambda_prime,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut absorb = |field: &str, r: Result<()>| match r {
            Ok(()) => {}
            Err(Error::Config(v)) => errs.extend(v.into_iter().map(|m| format!("{field}: {m}"))),
            Err(e) => errs.push(format!("{field}: {e}")),
        };
        absorb("eq", self.eq.validate());
        absorb("gevrey", self.gevrey.validate());
        match self.experiment {
            ExperimentKind::Penrose => {
                let p = &self.penrose;
                if p.k_max < 1 || p.n_scan < 64 || p.trace_points < 2 {
                    absorb("penrose", domain("need k_max >= 1, n_scan >= 64, trace_points >= 2"));
                }
            }
            ExperimentKind::Resolvent => {
                let r = &self.resolvent;
                if !(r.k_abs > 0.0 && r.tau_max > 0.0 && r.dtau > 0.0 && r.table_dtau > 0.0) {
                    absorb("resolvent", domain("k_abs, tau_max, dtau and table_dtau must be positive"));
                }
                if r.columns.iter().any(|c| !(*c >= 0.0 && *c < r.tau_max)) {
                    absorb("resolvent", domain("columns must lie in [0, tau_max)"));
                }
                if !(r.growth_window[0] < r.growth_window[1]) {
                    absorb("resolvent", domain("growth_window must be increasing"));
                }
            }
            ExperimentKind::LgVerify => {
                let l = &self.lg;
                if !(l.scale > 0.0 && l.lo >= 0.0 && l.lo < l.hi && l.hi.is_finite() && l.n_nodes >= 2) {
                    absorb("lg", domain("need scale > 0, 0 <= lo < hi < inf, n_nodes >= 2"));
                }
            }
            ExperimentKind::LinearDecay | ExperimentKind::NonlinearSim => {
                if self.experiment == ExperimentKind::LinearDecay && self.sim.mode == SimMode::FullNonlinear {
                    absorb("sim.mode", domain("linear_decay runs free_streaming or linearized"));
                }
                absorb("sim", self.sim_config().validate());
                if !(self.sim.lambda_prime > 0.0) {
                    absorb("sim.lambda_prime", domain("must be positive"));
                }
                if !(self.decay.burn_in >= 0.0 && self.decay.burn_in < 1.0) {
                    absorb("decay.burn_in", domain("must lie in [0, 1)"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Result of [`fit_decay`]: `ln(m / prefactor) ≈ c0_hat - c_hat x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub gamma_used: f64,
    pub c_hat: f64,
    pub c0_hat: f64,
    pub r2: f64,
    pub window: [f64; 2],
    pub prefactor_mode: PrefactorMode,
    pub form: DecayForm,
    pub n_points: usize,
    /// Whether the fit used local maxima only.
    pub envelope_used: bool,
    /// Set when `r2 < 0.999`: the series is not a stretched exponential in the
    /// chosen abscissa.
    pub non_exponential: bool,
}

/// Indices of strict local maxima (endpoints excluded).
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1)).filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1]).collect()
}

/// Least-squares decay fit of `(τ, magnitude)` samples.
///
/// `model` and `dim` are needed for [`DecayForm::Time`] and
/// [`PrefactorMode::AMinusD`]. With `envelope` only local maxima inside the
/// window are fitted.
#[allow(clippy::too_many_arguments)]
pub fn fit_decay(
    series: &[(f64, f64)],
    gamma: f64,
    prefactor_mode: PrefactorMode,
    form: DecayForm,
    window: Option<[f64; 2]>,
    burn_in: f64,
    envelope: bool,
    model: &ScaleFactorModel,
    dim: u32,
) -> Result<DecayFit> {
    if series.len() < 3 {
        return domain(format!("need at least 3 samples, got {}", series.len()));
    }
    if !(gamma > 0.0) {
        return domain(format!("gamma = {gamma} must be positive"));
    }
    let window = window.unwrap_or_else(|| {
        let (lo, hi) = (series[0].0, series[series.len() - 1].0);
        [lo + burn_in * (hi - lo), hi]
    });
    let inside = |p: &(f64, f64)| p.0 >= window[0] && p.0 <= window[1];
    let mut picked: Vec<(f64, f64)> = Vec::new();
    let mut envelope_used = false;
    if envelope {
        let mags: Vec<f64> = series.iter().map(|p| p.1).collect();
        picked = local_maxima(&mags).into_iter().map(|i| series[i]).filter(inside).collect();
        envelope_used = picked.len() >= 3;
    }
    if !envelope_used {
        // Monotone series have no interior maxima; fit every sample.
        picked = series.iter().copied().filter(inside).collect();
    }
    if picked.len() < 3 {
        return domain(format!("window [{}, {}] holds {} usable samples, need 3", window[0], window[1], picked.len()));
    }
    let mut xs = Vec::with_capacity(picked.len());
    let mut ys = Vec::with_capacity(picked.len());
    for &(tau, m) in &picked {
        if !(m > 0.0) {
            return domain(format!("magnitude {m} at tau = {tau} is not positive"));
        }
        let t = model.t_of_tau(tau)?;
        let x = match form {
            DecayForm::Bracket => (1.0 + tau * tau).sqrt().powf(gamma),
            DecayForm::Plain => tau.powf(gamma),
            DecayForm::Time => t.powf(gamma * (1.0 - 2.0 * model.q())),
        };
        let log_pref = match prefactor_mode {
            PrefactorMode::None => 0.0,
            PrefactorMode::AMinusD => -(dim as f64) * model.a_of_t(t).ln(),
        };
        xs.push(x);
        ys.push(m.ln() - log_pref);
    }
    let f = line_fit(&xs, &ys).ok_or_else(|| Error::Domain("degenerate abscissa in fit window".into()))?;
    Ok(DecayFit {
        gamma_used: gamma,
        c_hat: -f.slope,
        c0_hat: f.intercept,
        r2: f.r2,
        window,
        prefactor_mode,
        form,
        n_points: picked.len(),
        envelope_used,
        non_exponential: f.r2 < 0.999,
    })
}

/// Comma-separated table with a header row and `{:.16e}` floats.
#[derive(Default)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv { buf: String::new() };
        c.buf.push_str(&header.join(","));
        c.buf.push('\n');
        c
    }

    pub fn row(&mut self, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{v:.16e}");
        }
        self.buf.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.buf)?;
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// What an experiment produced; `summary` is also on disk as `summary.json`.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub pass: bool,
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

/// Runs the configured experiment and writes its artifacts into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut files = vec![dir.join("config.json")];
    write_json(&files[0], cfg)?;
    let mut summary = match cfg.experiment {
        ExperimentKind::Penrose => penrose_experiment(cfg, &dir, &mut files)?,
        ExperimentKind::Resolvent => resolvent_experiment(cfg, &dir, &mut files)?,
        ExperimentKind::LgVerify => lg_experiment(cfg, &dir, &mut files)?,
        ExperimentKind::LinearDecay | ExperimentKind::NonlinearSim => kinetic_experiment(cfg, &dir, &mut files)?,
    };
    let pass = summary["pass"].as_bool().unwrap_or(false);
    summary["experiment"] = json!(cfg.experiment.name());
    let path = dir.join("summary.json");
    write_json(&path, &summary)?;
    files.push(path);
    Ok(ExperimentOutcome { out_dir: dir, pass, summary, files })
}

fn penrose_experiment(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let p = &cfg.penrose;
    let opts = ScanOptions { n_scan: p.n_scan, omega_max: p.omega_max, ..ScanOptions::default() };
    let report = penrose::penrose_margin(&cfg.eq, cfg.sign, p.k_max, &opts)?;

    let mut csv = Csv::new(&["k_abs", "omega", "abs_dielectric"]);
    for &k in &report.k_range {
        for (w, v) in penrose::boundary_trace(&cfg.eq, cfg.sign, k, report.omega_max, p.trace_points)? {
            csv.row(&[k, w, v]);
        }
    }
    let path = dir.join("penrose_trace.csv");
    csv.write(&path)?;
    files.push(path);
    let path = dir.join("penrose_report.json");
    write_json(&path, &report)?;
    files.push(path);

    let mut checks = serde_json::Map::new();
    let mut pass = true;
    if let Equilibrium::Poisson { theta0, .. } = cfg.eq {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut worst: f64 = 0.0;
        for _ in 0..p.closed_form_samples {
            let lambda = Complex64::new(rng.gen_range(0.0..10.0), rng.gen_range(-20.0..20.0));
            let k = report.k_range[rng.gen_range(0..report.k_range.len())];
            let d = penrose::dielectric(&cfg.eq, cfg.sign, k, lambda)?;
            worst = worst.max((d - penrose::poisson_dielectric_closed_form(theta0, cfg.sign, k, lambda)).norm());
        }
        pass &= worst <= 1e-8;
        checks.insert("closed_form_max_error".into(), json!(worst));
        let threshold = 2.0 * PI.sqrt();
        if cfg.sign == InteractionSign::Attractive && theta0 * report.k_range[0] < threshold {
            let expected = threshold - theta0 * report.k_range[0];
            let err = report.real_root.map(|r| (r - expected).abs());
            pass &= !report.stable && err.is_some_and(|e| e <= 1e-6);
            checks.insert("expected_real_root".into(), json!(expected));
            checks.insert("real_root_error".into(), json!(err));
        }
    }
    if cfg.sign == InteractionSign::Repulsive {
        pass &= report.stable;
    }
    Ok(json!({
        "pass": pass,
        "stable": report.stable,
        "kappa": report.kappa,
        "argmin_lambda": report.argmin_lambda,
        "argmin_k": report.argmin_k,
        "real_root": report.real_root,
        "omega_max": report.omega_max,
        "checks": checks,
    }))
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn resolvent_experiment(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let r = &cfg.resolvent;
    let kernel = ModeKernel::standard(cfg.eq, cfg.model, cfg.sign, r.k_abs)?;

    let table_grid = TauGrid::with_step(r.tau_max, r.table_dtau)?;
    let table = volterra::resolvent_table(&kernel, &table_grid)?;
    let mut csv = Csv::new(&["tau", "tau_tilde", "value"]);
    for (t, tt, v) in table.entries() {
        csv.row(&[t, tt, v]);
    }
    let path = dir.join("resolvent.csv");
    csv.write(&path)?;
    files.push(path);

    let theta0 = match cfg.eq {
        Equilibrium::Poisson { theta0, .. } => Some(theta0),
        Equilibrium::Maxwellian { .. } => None,
    };
    let bound = theta0.map(|th| volterra::check_resolvent_bound(&table, &cfg.model, th, r.k_abs));

    // Column-wise route comparison on the fine grid.
    let grid = TauGrid::with_step(r.tau_max, r.dtau)?;
    let oracle_applies = matches!(cfg.model, ScaleFactorModel::Constant { .. }) && theta0.is_some() && cfg.sign == InteractionSign::Repulsive;
    let mut route: Option<f64> = None;
    let mut oracle: Option<f64> = None;
    let mut cols = Vec::new();
    for &tt in &r.columns {
        let j = ((tt / grid.step).round() as usize).min(grid.n);
        let marched = volterra::resolvent_column(&kernel, &grid, j)?;
        let scale = sup_abs(&marched).max(f64::MIN_POSITIVE);
        let ode = match volterra::resolvent_via_ode(&kernel, &grid, j) {
            Ok(v) => Some(v),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err(e),
        };
        let route_err = ode.as_ref().map(|o| sup_diff(&marched, o) / scale);
        let mut oracle_err = None;
        if oracle_applies {
            let exact: Vec<f64> = (j..=grid.n)
                .map(|i| volterra::closed_form_resolvent_q0(theta0.unwrap(), r.k_abs, grid.node(i) - grid.node(j)))
                .collect();
            let mut e = sup_diff(&marched, &exact);
            if let Some(o) = &ode {
                e = e.max(sup_diff(o, &exact));
            }
            oracle_err = Some(e);
            oracle = Some(oracle.unwrap_or(0.0f64).max(e));
        }
        if let Some(e) = route_err {
            route = Some(route.unwrap_or(0.0f64).max(e));
        }
        cols.push(json!({ "tau_tilde": grid.node(j), "route_disagreement": route_err, "oracle_error": oracle_err }));
    }
    // For q = 0 the oracle is a third route.
    let route_max = match (route, oracle) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };

    let mut growth = Value::Null;
    let mut growth_ok = true;
    if cfg.sign == InteractionSign::Attractive {
        let [lo, hi] = r.growth_window;
        let g = TauGrid::with_step(hi.max(r.tau_max), r.dtau.max(1e-2))?;
        let col = volterra::resolvent_column(&kernel, &g, 0)?;
        let fit = volterra::fit_growth_rate(&g.nodes(), &col, lo, hi);
        let expected = match (cfg.model, theta0) {
            (ScaleFactorModel::Constant { .. }, Some(th)) => Some(2.0 * PI.sqrt() - th * r.k_abs),
            _ => None,
        };
        let rel = match (fit, expected) {
            (Some(f), Some(e)) => Some((f.slope - e).abs() / e.abs()),
            _ => None,
        };
        if let Some(rel) = rel {
            growth_ok = rel <= 0.02;
        }
        growth = json!({
            "rate": fit.map(|f| f.slope),
            "r2": fit.map(|f| f.r2),
            "window": [lo, hi],
            "expected": expected,
            "relative_error": rel,
        });
    }

    let mut pass = growth_ok;
    if let Some(e) = route {
        pass &= e <= r.route_tolerance;
    }
    if let Some(e) = oracle {
        pass &= e <= r.oracle_tolerance;
    }
    if let Some(b) = &bound {
        pass &= b.c_linear_quadratic.is_finite();
    }
    Ok(json!({
        "pass": pass,
        "C_fit": bound.map(|b| b.c_linear_quadratic),
        "C_quadratic": bound.map(|b| b.c_quadratic),
        "C_argmax": bound.map(|b| [b.argmax.0, b.argmax.1]),
        "route_max_disagreement": route_max,
        "oracle_max_error": oracle,
        "growth_rate_fit": growth,
        "columns": cols,
        "table_points": table_grid.len(),
    }))
}

fn lg_experiment(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let l = &cfg.lg;
    let basis = LGBasis::new(ComposedFactor::new(cfg.model, l.scale), l.lo, l.hi)?;
    let nodes: Vec<f64> = (0..l.n_nodes).map(|i| l.lo + (l.hi - l.lo) * i as f64 / (l.n_nodes - 1) as f64).collect();
    let v = liouville_green::lg_verify(&basis, &nodes, ReferenceMethod::default())?;
    let mut csv = Csv::new(&["x", "w_reference", "w_lg", "budget", "defect"]);
    for r in &v.rows {
        csv.row(&[r.x, r.w_reference, r.w_lg, r.budget, r.defect]);
    }
    let path = dir.join("lg_verify.csv");
    csv.write(&path)?;
    files.push(path);
    let closed = match cfg.model {
        ScaleFactorModel::PowerLaw { .. } => Some(liouville_green::power_law_variation(&cfg.model, l.scale, l.lo)?),
        ScaleFactorModel::Constant { .. } => Some(0.0),
    };
    let pass = v.violations == 0 && v.wronskian_defect <= l.wronskian_tolerance;
    Ok(json!({
        "pass": pass,
        "violations": v.violations,
        "max_defect": v.max_defect,
        "final_variation": v.final_variation,
        "total_variation_closed_form": closed,
        "wronskian_defect": v.wronskian_defect,
        "envelope_constant": v.envelope_constant,
        "nodes": nodes.len(),
    }))
}

fn write_kinetic_csvs(cfg: &ExperimentConfig, sim: &SimConfig, rec: &SimRecord, dir: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    let kmax = sim.k_max as i64;
    let mut header: Vec<String> = vec!["tau".into(), "t".into()];
    for k in -kmax..=kmax {
        header.push(format!("rho_re_{k}"));
        header.push(format!("rho_im_{k}"));
    }
    for h in ["F_tilde", "G_tilde", "diag_bootstrap", "diag_embedding", "phys_density_norm"] {
        header.push(h.into());
    }
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut ts = Csv::new(&refs);
    let mut diag = Csv::new(&["tau", "z", "F", "G", "F_over_sqrtG"]);
    for r in &rec.rows {
        let mut row = vec![r.tau, r.t];
        for c in &r.rho {
            row.push(c.re);
            row.push(c.im);
        }
        row.extend([r.f_tilde, r.g_tilde, r.diag_bootstrap, r.diag_embedding, r.phys_density_norm]);
        ts.row(&row);
        diag.row(&[r.tau, gevrey::sliding_z(&cfg.gevrey, r.tau), r.f_tilde, r.g_tilde, r.diag_embedding]);
    }
    for (name, csv) in [("timeseries.csv", &ts), ("diagnostics.csv", &diag)] {
        let path = dir.join(name);
        csv.write(&path)?;
        files.push(path);
    }
    if !rec.snapshots.is_empty() {
        let path = dir.join("snapshots.bin");
        kinetic::save_snapshots(&path, &rec.snapshots, sim.xi_max)?;
        files.push(path);
    }
    Ok(())
}

/// `|ρ̂₁|` at the output row nearest to `tau`, if one lies within `tol`.
fn rho_at(rec: &SimRecord, tau: f64, tol: f64) -> Option<f64> {
    rec.rows
        .iter()
        .min_by(|a, b| (a.tau - tau).abs().total_cmp(&(b.tau - tau).abs()))
        .filter(|r| (r.tau - tau).abs() <= tol)
        .map(|r| r.rho1_abs)
}

fn kinetic_experiment(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let sim = cfg.sim_config();
    let rec = kinetic::run_simulation(&sim, &cfg.gevrey, &cfg.run_options())?;
    write_kinetic_csvs(cfg, &sim, &rec, dir, files)?;

    let h_inf = if rec.snapshots.len() >= 3 {
        let rep = kinetic::h_infinity_report(&rec.snapshots, &sim, &cfg.gevrey, cfg.sim.lambda_prime)?;
        let mut csv = Csv::new(&["tau", "distance"]);
        for &(t, d) in &rep.rows {
            csv.row(&[t, d]);
        }
        let path = dir.join("h_infinity.csv");
        csv.write(&path)?;
        files.push(path);
        json!({ "final_half_nonincreasing": rep.final_half_nonincreasing, "initial_distance": rep.rows.first().map(|r| r.1) })
    } else {
        Value::Null
    };

    let d = &cfg.decay;
    let gamma = d.gamma.unwrap_or(cfg.gevrey.gamma);
    let series: Vec<(f64, f64)> = rec.rows.iter().map(|r| (r.tau, r.rho1_abs)).collect();
    let fit_with = |form| {
        fit_decay(&series, gamma, d.prefactor_mode, form, d.window, d.burn_in, d.envelope, &cfg.model, sim.dim)
            .map(|f| serde_json::to_value(f).unwrap_or(Value::Null))
            .unwrap_or_else(|e| json!({ "error": e.to_string() }))
    };
    let fit_tau = fit_with(DecayForm::Bracket);
    let fit_t = fit_with(DecayForm::Time);

    let tol = 0.5 * sim.dtau * cfg.sim.out_every.max(1) as f64 + 1e-9;
    let conservation_ok = rec.max_neutrality <= 1e-12 && rec.max_reality <= 1e-10;
    let mut pass = conservation_ok;
    let mut checks = serde_json::Map::new();
    match sim.mode {
        SimMode::FreeStreaming => {
            let err = free_streaming_error(&sim, &rec)?;
            pass &= err <= 1e-6;
            checks.insert("free_streaming_max_error".into(), json!(err));
        }
        SimMode::Linearized => {
            let err = volterra_disagreement(&sim, &rec)?;
            pass &= err <= 1e-2;
            checks.insert("volterra_max_relative_error".into(), json!(err));
        }
        SimMode::FullNonlinear => {}
    }
    Ok(json!({
        "pass": pass,
        "mode": sim.mode,
        "tau_end": rec.final_state.tau,
        "rho1_abs_final": rec.rows.last().map(|r| r.rho1_abs),
        "rho1_abs_at_2": rho_at(&rec, 2.0, tol),
        "rho1_abs_at_10": rho_at(&rec, 10.0, tol),
        "max_neutrality_defect": rec.max_neutrality,
        "max_reality_defect": rec.max_reality,
        "edge_mode_amplitude": rec.edge_mode_amplitude,
        "decay_fit_tau": fit_tau,
        "decay_fit_t": fit_t,
        "h_infinity": h_inf,
        "snapshots": rec.snapshots.len(),
        "checks": checks,
    }))
}

fn initial_amplitude(sim: &SimConfig, k: i64, tau: f64) -> Result<Complex64> {
    let c = sim.initial.resolve()?.get(&k).copied().unwrap_or_default();
    let x = k as f64 * tau;
    Ok(c * (sim.epsilon * sim.epsilon * (-0.5 * x * x / (sim.initial.width * sim.initial.width)).exp()))
}

/// `max_{k,τ} |ρ̂_k(τ) - ĥ(0,k,kτ)|` for a free-streaming run.
pub fn free_streaming_error(sim: &SimConfig, rec: &SimRecord) -> Result<f64> {
    let kmax = sim.k_max as i64;
    let mut worst: f64 = 0.0;
    for r in &rec.rows {
        for k in -kmax..=kmax {
            if k == 0 {
                continue;
            }
            worst = worst.max((r.rho[(k + kmax) as usize] - initial_amplitude(sim, k, r.tau)?).norm());
        }
    }
    Ok(worst)
}

/// Sup-norm relative difference between linearized density modes and the
/// Volterra solution with source `ĥ(0,k,kτ)`, over the seeded modes `k > 0`.
/// Output rows must be evenly spaced.
pub fn volterra_disagreement(sim: &SimConfig, rec: &SimRecord) -> Result<f64> {
    let n = rec.rows.len() - 1;
    let tau_end = rec.rows[n].tau;
    let grid = TauGrid::new(tau_end, n)?;
    if rec.rows.iter().enumerate().any(|(i, r)| (r.tau - grid.node(i)).abs() > 1e-9 * tau_end.max(1.0)) {
        return Err(Error::GridMismatch("output rows are not evenly spaced".into()));
    }
    let kmax = sim.k_max as i64;
    let mut worst: f64 = 0.0;
    for k in 1..=kmax {
        let src: Vec<Complex64> = grid.nodes().iter().map(|&t| initial_amplitude(sim, k, t)).collect::<Result<_>>()?;
        if src.iter().all(|c| *c == Complex64::default()) {
            continue;
        }
        let kernel = ModeKernel::standard(sim.eq, sim.model, sim.sign, k as f64)?;
        let vol = volterra::solve_volterra_complex(&kernel, &src, &grid)?;
        let scale = vol.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let diff = rec.rows.iter().zip(&vol).fold(0.0f64, |m, (r, v)| m.max((r.rho[(k + kmax) as usize] - v).norm()));
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}
