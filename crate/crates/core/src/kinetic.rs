//! Spectral solver for the renormalised Vlasov–Poisson system in Fourier
//! variables, in one space dimension.
//!
//! The unknown is `ĥ(τ, k, ξ)` on modes `-K..=K` and a symmetric ξ grid with a
//! node at 0. With `c = 4π a(T(τ)) σ_F`, `σ_F = -ε_F`,
//!
//! `∂_τ ĥ(k,ξ) = -c (ξ-kτ)/k ρ̂_k μ̂(ξ-kτ) + c Σ_{l≠0} (ξ-kτ)/l ρ̂_l ĥ(k-l, ξ-lτ)`,
//!
//! with `ρ̂_k = ĥ(k, kτ)`. The k = 0 row has no linear term and its nonlinear
//! coefficient is `ξ/l`, so it evolves for ξ ≠ 0 but is frozen at the ξ = 0
//! node: `ĥ(τ,0,0)` stays exactly at its initial value 0.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{Equilibrium, InteractionSign};
use crate::error::{domain, Error, Result};
use crate::gevrey::{self, GevreyParams};
use crate::ScaleFactorModel;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    FreeStreaming,
    Linearized,
    FullNonlinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficient {
    pub k: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// `ĥ(0,k,ξ) = ε² c_k e^{-ξ²/(2w²)}`. Coefficients for `-k` default to the
/// conjugate of those for `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialData {
    pub coefficients: Vec<ModeCoefficient>,
    pub width: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData { coefficients: vec![ModeCoefficient { k: 1, re: 1.0, im: 0.0 }], width: 1.0 }
    }
}

impl InitialData {
    pub fn single_mode(k: i64) -> Self {
        InitialData { coefficients: vec![ModeCoefficient { k, re: 1.0, im: 0.0 }], width: 1.0 }
    }

    /// Full coefficient map including conjugate partners.
    pub fn resolve(&self) -> Result<BTreeMap<i64, Complex64>> {
        if !(self.width > 0.0) {
            return domain(format!("profile width {} must be positive", self.width));
        }
        let mut map: BTreeMap<i64, Complex64> = BTreeMap::new();
        for c in &self.coefficients {
            let v = Complex64::new(c.re, c.im);
            if c.k == 0 && v != ZERO {
                return domain("c_0 must vanish: the data would carry net charge");
            }
            if map.insert(c.k, v).is_some() {
                return domain(format!("mode {} given twice", c.k));
            }
        }
        for (&k, &v) in map.clone().iter() {
            match map.get(&-k) {
                Some(w) if (w - v.conj()).norm() > 1e-14 * v.norm().max(1.0) => {
                    return domain(format!("c_{} is not the conjugate of c_{k}: the data would not be real", -k));
                }
                Some(_) => {}
                None => {
                    map.insert(-k, v.conj());
                }
            }
        }
        map.retain(|_, v| *v != ZERO);
        Ok(map)
    }

    fn profile(&self, xi: f64) -> f64 {
        (-0.5 * xi * xi / (self.width * self.width)).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dim: u32,
    pub k_max: u32,
    pub xi_max: f64,
    /// Number of ξ intervals (even); the grid has `n_xi + 1` nodes.
    pub n_xi: usize,
    pub dtau: f64,
    pub tau_end: f64,
    pub mode: SimMode,
    pub model: ScaleFactorModel,
    pub eq: Equilibrium,
    pub sign: InteractionSign,
    pub epsilon: f64,
    pub initial: InitialData,
    /// `max |ĥ|` above which a run counts as blown up.
    pub blowup_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dim: 1,
            k_max: 2,
            xi_max: 14.0,
            n_xi: 1024,
            dtau: 0.01,
            tau_end: 4.0,
            mode: SimMode::FullNonlinear,
            model: ScaleFactorModel::Constant { t0: 1.0 },
            eq: Equilibrium::Poisson { theta0: 1.0, dim: 1 },
            sign: InteractionSign::Repulsive,
            epsilon: 1e-3,
            initial: InitialData::default(),
            blowup_threshold: 1e12,
        }
    }
}

impl SimConfig {
    /// Largest `|k|` whose row can become nonzero.
    pub fn active_k(&self) -> Result<u32> {
        if self.mode == SimMode::FullNonlinear {
            return Ok(self.k_max);
        }
        Ok(self.initial.resolve()?.keys().map(|k| k.unsigned_abs() as u32).max().unwrap_or(0))
    }

    /// Largest τ for which every shifted evaluation stays inside the window
    /// with the six-decay-length margin.
    pub fn tau_window(&self) -> Result<f64> {
        let k = self.active_k()?;
        let room = self.xi_max - 6.0 * self.eq.momentum_scale();
        Ok(if k == 0 { f64::INFINITY } else { room / k as f64 })
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.dim != 1 {
            errs.push(format!("dim = {} unsupported; the solver is one-dimensional", self.dim));
        }
        if self.eq.dim() != self.dim {
            errs.push(format!("equilibrium dimension {} differs from dim {}", self.eq.dim(), self.dim));
        }
        if let Err(e) = self.eq.validate() {
            errs.push(e.to_string());
        }
        if self.k_max < 1 {
            errs.push("k_max must be at least 1".into());
        }
        if self.n_xi < 64 || !self.n_xi.is_multiple_of(2) {
            errs.push(format!("n_xi = {} must be even and >= 64", self.n_xi));
        }
        if !(self.xi_max > 0.0) {
            errs.push(format!("xi_max = {} must be positive", self.xi_max));
        }
        if !(self.dtau > 0.0) {
            errs.push(format!("dtau = {} must be positive", self.dtau));
        }
        if !(self.tau_end > 0.0) {
            errs.push(format!("tau_end = {} must be positive", self.tau_end));
        }
        if !(self.epsilon > 0.0) {
            errs.push(format!("epsilon = {} must be positive", self.epsilon));
        }
        if !(self.blowup_threshold > 0.0) {
            errs.push("blowup_threshold must be positive".into());
        }
        match self.initial.resolve() {
            Err(e) => errs.push(e.to_string()),
            Ok(map) => {
                if let Some(k) = map.keys().find(|k| k.unsigned_abs() > self.k_max as u64) {
                    errs.push(format!("initial mode {k} exceeds k_max = {}", self.k_max));
                }
                if let Ok(k) = self.active_k() {
                    let need = k as f64 * self.tau_end + 6.0 * self.eq.momentum_scale();
                    if self.xi_max < need - 1e-12 {
                        errs.push(format!(
                            "xi_max = {} below K*tau_end + 6*scale = {need} (K = {k} active modes)",
                            self.xi_max
                        ));
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn grid(&self) -> XiGrid {
        XiGrid::new(self.xi_max, self.n_xi)
    }

    pub fn n_modes(&self) -> usize {
        2 * self.k_max as usize + 1
    }
}

/// Symmetric uniform grid `ξᵢ = (i - n/2) Δ`, `Δ = 2Ξ/n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiGrid {
    pub xi_max: f64,
    pub n: usize,
    pub step: f64,
}

impl XiGrid {
    pub fn new(xi_max: f64, n: usize) -> Self {
        XiGrid { xi_max, n, step: 2.0 * xi_max / n as f64 }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Four-point Lagrange weights for sampling at `ξᵢ + offset`, the same for
/// every node `i`.
#[derive(Clone, Copy, Debug)]
struct Shift {
    base: isize,
    w: [f64; 4],
}

impl Shift {
    fn new(grid: &XiGrid, offset: f64) -> Self {
        let u = offset / grid.step;
        let m = u.floor();
        let t = u - m;
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        Shift { base: m as isize, w }
    }

    /// Cubic interpolant of `row` at `ξᵢ + offset`; zero outside `[-Ξ, Ξ]`,
    /// with nodes beyond the grid read as zero.
    #[inline]
    fn sample(&self, row: &[Complex64], i: usize, frac_zero: bool) -> Complex64 {
        let n = row.len() as isize - 1;
        let p = i as isize + self.base;
        if p < 0 || p > n || (p == n && !frac_zero) {
            return ZERO;
        }
        let mut acc = ZERO;
        for (q, w) in self.w.iter().enumerate() {
            let j = p + q as isize - 1;
            if j >= 0 && j <= n {
                acc += row[j as usize] * *w;
            }
        }
        acc
    }

    fn frac_zero(&self) -> bool {
        self.w[1] == 1.0
    }
}

fn interpolate(grid: &XiGrid, row: &[Complex64], xi: f64) -> Complex64 {
    // Sample relative to the centre node.
    let s = Shift::new(grid, xi);
    s.sample(row, grid.n / 2, s.frac_zero())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub tau: f64,
    pub k_max: u32,
    pub n_nodes: usize,
    /// Row-major `(k, ξ)`, rows from `k = -K`.
    pub h: Vec<Complex64>,
}

impl SpectralState {
    pub fn row(&self, k: i64) -> &[Complex64] {
        let r = (k + self.k_max as i64) as usize;
        &self.h[r * self.n_nodes..(r + 1) * self.n_nodes]
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let k = self.k_max as i64;
        -k..=k
    }

    /// `|ĥ(τ,0,0)|`.
    pub fn neutrality_defect(&self) -> f64 {
        self.row(0)[self.n_nodes / 2].norm()
    }

    /// `max |ĥ(-k,-ξ) - conj ĥ(k,ξ)|`.
    pub fn reality_defect(&self) -> f64 {
        let n = self.n_nodes;
        let mut worst: f64 = 0.0;
        for k in self.modes() {
            let (a, b) = (self.row(k), self.row(-k));
            for i in 0..n {
                worst = worst.max((b[n - 1 - i] - a[i].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.h.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

pub fn init_state(cfg: &SimConfig) -> Result<SpectralState> {
    cfg.validate()?;
    let coefs = cfg.initial.resolve()?;
    let grid = cfg.grid();
    let n_nodes = grid.len();
    let eps2 = cfg.epsilon * cfg.epsilon;
    let mut h = vec![ZERO; cfg.n_modes() * n_nodes];
    for (&k, &c) in &coefs {
        let r = (k + cfg.k_max as i64) as usize;
        for i in 0..n_nodes {
            h[r * n_nodes + i] = c * (eps2 * cfg.initial.profile(grid.node(i)));
        }
    }
    Ok(SpectralState { tau: 0.0, k_max: cfg.k_max, n_nodes, h })
}

fn rho_from(h: &[Complex64], cfg: &SimConfig, grid: &XiGrid, tau: f64) -> Result<Vec<Complex64>> {
    let n_nodes = grid.len();
    let kmax = cfg.k_max as i64;
    (-kmax..=kmax)
        .map(|k| {
            if k == 0 {
                return Ok(ZERO);
            }
            let r = (k + kmax) as usize;
            let row = &h[r * n_nodes..(r + 1) * n_nodes];
            if row.iter().all(|v| *v == ZERO) {
                return Ok(ZERO);
            }
            let x = k as f64 * tau;
            if x.abs() > grid.xi_max * (1.0 + 1e-12) {
                return Err(Error::WindowViolation { point: x, xi_max: grid.xi_max, tau });
            }
            Ok(interpolate(grid, row, x))
        })
        .collect()
}

/// `ρ̂_k(τ) = ĥ(τ,k,kτ)` for `k = -K..=K`, `ρ̂₀ = 0`.
pub fn density_modes(state: &SpectralState, cfg: &SimConfig) -> Result<Vec<Complex64>> {
    rho_from(&state.h, cfg, &cfg.grid(), state.tau)
}

fn rhs_raw(h: &[Complex64], tau: f64, cfg: &SimConfig, grid: &XiGrid) -> Result<Vec<Complex64>> {
    let n_nodes = grid.len();
    let n_modes = cfg.n_modes();
    let mut out = vec![ZERO; h.len()];
    if cfg.mode == SimMode::FreeStreaming {
        return Ok(out);
    }
    if cfg.mode == SimMode::FullNonlinear {
        let limit = cfg.tau_window()?;
        if tau > limit * (1.0 + 1e-9) {
            let point = cfg.k_max as f64 * tau;
            return Err(Error::WindowViolation { point, xi_max: grid.xi_max, tau });
        }
    }
    let rho = rho_from(h, cfg, grid, tau)?;
    let a = cfg.model.a_at_tau(tau)?;
    let c = 4.0 * PI * a * -cfg.sign.eps_f();
    let kmax = cfg.k_max as i64;
    let shifts: Vec<Shift> = (-kmax..=kmax).map(|l| Shift::new(grid, -(l as f64) * tau)).collect();
    let eq = cfg.eq;
    let nonlinear = cfg.mode == SimMode::FullNonlinear;
    out.par_chunks_mut(n_nodes).enumerate().for_each(|(r, dst)| {
        let k = r as i64 - kmax;
        let kt = k as f64 * tau;
        if k != 0 {
            let rk = rho[r];
            if rk != ZERO {
                let kf = k as f64;
                for (i, d) in dst.iter_mut().enumerate() {
                    let x = grid.node(i) - kt;
                    *d -= rk * (c * x / kf * eq.mu_hat_radial(x));
                }
            }
        }
        if nonlinear {
            for l in -kmax..=kmax {
                let src = k - l;
                if l == 0 || src.abs() > kmax {
                    continue;
                }
                let rl = rho[(l + kmax) as usize];
                if rl == ZERO {
                    continue;
                }
                let sr = (src + kmax) as usize;
                let row = &h[sr * n_nodes..(sr + 1) * n_nodes];
                let sh = &shifts[(l + kmax) as usize];
                let fz = sh.frac_zero();
                let coef = rl * (c / l as f64);
                for (i, d) in dst.iter_mut().enumerate() {
                    let x = grid.node(i) - kt;
                    if x == 0.0 {
                        continue;
                    }
                    *d += coef * x * sh.sample(row, i, fz);
                }
            }
        }
    });
    debug_assert_eq!(out.len(), n_modes * n_nodes);
    Ok(out)
}

/// `∂_τ ĥ` at the given state and time.
pub fn rhs(state: &SpectralState, tau: f64, cfg: &SimConfig) -> Result<Vec<Complex64>> {
    rhs_raw(&state.h, tau, cfg, &cfg.grid())
}

fn axpy(y: &[Complex64], h: f64, k: &[Complex64]) -> Vec<Complex64> {
    y.par_iter().zip(k).map(|(a, b)| a + b * h).collect()
}

/// One classical RK4 step of size `cfg.dtau`.
pub fn step(state: &SpectralState, cfg: &SimConfig) -> Result<SpectralState> {
    let grid = cfg.grid();
    let (t, dt) = (state.tau, cfg.dtau);
    let y = &state.h;
    let k1 = rhs_raw(y, t, cfg, &grid)?;
    let k2 = rhs_raw(&axpy(y, 0.5 * dt, &k1), t + 0.5 * dt, cfg, &grid)?;
    let k3 = rhs_raw(&axpy(y, 0.5 * dt, &k2), t + 0.5 * dt, cfg, &grid)?;
    let k4 = rhs_raw(&axpy(y, dt, &k3), t + dt, cfg, &grid)?;
    let h: Vec<Complex64> = (0..y.len())
        .into_par_iter()
        .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
        .collect();
    let next = SpectralState { tau: t + dt, k_max: state.k_max, n_nodes: state.n_nodes, h };
    if !next.is_finite() {
        return Err(Error::BlowUp { tau: next.tau, detail: "non-finite values".into() });
    }
    let m = next.max_abs();
    if m > cfg.blowup_threshold {
        return Err(Error::BlowUp { tau: next.tau, detail: format!("max |h| = {m:e} above threshold") });
    }
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Output every this many steps (the final step is always output).
    pub out_every: usize,
    /// Keep a snapshot every this many outputs; 0 keeps none.
    pub snapshot_every: usize,
    pub diagnostics: bool,
    /// Radius for the physical density norm and the `h_∞` distance.
    pub lambda_prime: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { out_every: 10, snapshot_every: 10, diagnostics: true, lambda_prime: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeRow {
    pub tau: f64,
    pub t: f64,
    pub rho: Vec<Complex64>,
    pub rho1_abs: f64,
    pub f_tilde: f64,
    pub g_tilde: f64,
    pub diag_bootstrap: f64,
    pub diag_embedding: f64,
    pub phys_density_norm: f64,
    pub neutrality: f64,
    pub reality: f64,
}

#[derive(Clone, Debug)]
pub struct SimRecord {
    pub rows: Vec<TimeRow>,
    pub snapshots: Vec<SpectralState>,
    pub final_state: SpectralState,
    pub max_neutrality: f64,
    pub max_reality: f64,
    /// Largest `|ĥ|` seen on the outermost rows `k = ±K`.
    pub edge_mode_amplitude: f64,
}

fn g_rows(state: &SpectralState) -> Vec<(i64, &[Complex64])> {
    state.modes().map(|k| (k, state.row(k))).collect()
}

fn generator_g_state(p: &GevreyParams, dim: u32, state: &SpectralState, xi: &[f64], z: f64) -> Result<f64> {
    gevrey::generator_g(p, dim, &g_rows(state), xi, z)
}

fn generator_f_rho(p: &GevreyParams, rho: &[Complex64], kmax: i64, tau: f64, z: f64) -> f64 {
    let ks: Vec<[i64; 1]> = (-kmax..=kmax).map(|k| [k]).collect();
    gevrey::generator_f(p, ks.iter().zip(rho).map(|(k, r)| (&k[..], *r)), tau, z)
}

#[allow(clippy::too_many_arguments)]
fn make_row(
    cfg: &SimConfig,
    p: &GevreyParams,
    opts: &RunOptions,
    xi: &[f64],
    state: &SpectralState,
    prev: Option<&SpectralState>,
) -> Result<TimeRow> {
    let tau = state.tau;
    let rho = density_modes(state, cfg)?;
    let kmax = cfg.k_max as i64;
    let rho1_abs = rho[(1 + kmax) as usize].norm();
    let t = cfg.model.t_of_tau(tau)?;
    let a = cfg.model.a_at_tau(tau)?;
    let (mut f_tilde, mut g_tilde, mut diag_bootstrap, mut diag_embedding, mut phys) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    if opts.diagnostics {
        let z = gevrey::sliding_z(p, tau);
        f_tilde = generator_f_rho(p, &rho, kmax, tau, z);
        g_tilde = generator_g_state(p, cfg.dim, state, xi, z)?;
        diag_embedding = if g_tilde > 0.0 { f_tilde / g_tilde.sqrt() } else { f64::NAN };
        if let Some(prev) = prev {
            let dz = 1e-4;
            let g_prev = generator_g_state(p, cfg.dim, prev, xi, z)?;
            let dg_dtau = (g_tilde - g_prev) / (tau - prev.tau);
            let dg_dz = (generator_g_state(p, cfg.dim, state, xi, z + dz)? - generator_g_state(p, cfg.dim, state, xi, z - dz)?) / (2.0 * dz);
            let bracket = (1.0 + tau * tau).sqrt();
            let denom = a * f_tilde * g_tilde.sqrt() + a * bracket * f_tilde * dg_dz;
            diag_bootstrap = if denom > 0.0 { dg_dtau / denom } else { f64::NAN };
        }
        let ks: Vec<[i64; 1]> = (-kmax..=kmax).map(|k| [k]).collect();
        let norm = gevrey::gevrey_norm_torus(p, ks.iter().zip(&rho).map(|(k, r)| (&k[..], *r)), opts.lambda_prime);
        phys = cfg.model.a_of_t(t).powi(-(cfg.dim as i32)) * norm;
    }
    Ok(TimeRow {
        tau,
        t,
        rho,
        rho1_abs,
        f_tilde,
        g_tilde,
        diag_bootstrap,
        diag_embedding,
        phys_density_norm: phys,
        neutrality: state.neutrality_defect(),
        reality: state.reality_defect(),
    })
}

/// Steps from the initial data to `tau_end`, recording diagnostics at each
/// output step.
pub fn run_simulation(cfg: &SimConfig, gevrey_params: &GevreyParams, opts: &RunOptions) -> Result<SimRecord> {
    let mut state = init_state(cfg)?;
    let xi = cfg.grid().nodes();
    let n_steps = (cfg.tau_end / cfg.dtau).round().max(1.0) as usize;
    let every = opts.out_every.max(1);
    let mut rows = vec![make_row(cfg, gevrey_params, opts, &xi, &state, None)?];
    let mut snapshots = Vec::new();
    if opts.snapshot_every > 0 {
        snapshots.push(state.clone());
    }
    let kmax = cfg.k_max as i64;
    let edge = |s: &SpectralState| s.row(kmax).iter().chain(s.row(-kmax)).fold(0.0f64, |m, v| m.max(v.norm()));
    let mut edge_amp = edge(&state);
    let mut max_neutrality = state.neutrality_defect();
    let mut max_reality = state.reality_defect();
    for n in 1..=n_steps {
        let mut next = step(&state, cfg)?;
        next.tau = n as f64 * cfg.dtau;
        max_neutrality = max_neutrality.max(next.neutrality_defect());
        edge_amp = edge_amp.max(edge(&next));
        if n % every == 0 || n == n_steps {
            let row = make_row(cfg, gevrey_params, opts, &xi, &next, Some(&state))?;
            max_reality = max_reality.max(row.reality);
            rows.push(row);
            if opts.snapshot_every > 0 && (rows.len() - 1) % opts.snapshot_every == 0 || n == n_steps && opts.snapshot_every > 0 {
                snapshots.push(next.clone());
            }
        }
        state = next;
    }
    Ok(SimRecord { rows, snapshots, final_state: state, max_neutrality, max_reality, edge_mode_amplitude: edge_amp })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HInfinityReport {
    /// `(τ, √G[h(τ) - h_final](λ'))`.
    pub rows: Vec<(f64, f64)>,
    pub final_half_nonincreasing: bool,
}

/// Gevrey-λ' distances of stored snapshots to the last one, the proxy for `h_∞`.
pub fn h_infinity_report(
    snapshots: &[SpectralState],
    cfg: &SimConfig,
    gevrey_params: &GevreyParams,
    lambda_prime: f64,
) -> Result<HInfinityReport> {
    if snapshots.len() < 3 {
        return Err(Error::Insufficient(format!("need at least 3 snapshots, got {}", snapshots.len())));
    }
    let xi = cfg.grid().nodes();
    let last = snapshots.last().unwrap();
    let rows: Vec<(f64, f64)> = snapshots
        .par_iter()
        .map(|s| {
            let diff = SpectralState { h: s.h.iter().zip(&last.h).map(|(a, b)| a - b).collect(), ..s.clone() };
            Ok((s.tau, generator_g_state(gevrey_params, cfg.dim, &diff, &xi, lambda_prime)?.sqrt()))
        })
        .collect::<Result<_>>()?;
    let half = rows.len() / 2;
    let tail = &rows[half..];
    let final_half_nonincreasing = tail.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12) + 1e-300);
    Ok(HInfinityReport { rows, final_half_nonincreasing })
}

const SNAP_MAGIC: &[u8; 8] = b"ELSNAP01";
const SNAP_VERSION: u32 = 1;

/// Little-endian: magic `ELSNAP01`, u32 version, u32 snapshot count, u32 mode
/// count, u32 node count, f64 Ξ; then per snapshot an f64 τ followed by
/// `modes × nodes` pairs of f32 `(re, im)`, rows from `k = -K`.
pub fn write_snapshots<W: Write>(mut w: W, snapshots: &[SpectralState], xi_max: f64) -> Result<()> {
    let (n_modes, n_nodes) = match snapshots.first() {
        Some(s) => (2 * s.k_max as usize + 1, s.n_nodes),
        None => (0, 0),
    };
    w.write_all(SNAP_MAGIC)?;
    for v in [SNAP_VERSION, snapshots.len() as u32, n_modes as u32, n_nodes as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&xi_max.to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * n_modes * n_nodes);
    for s in snapshots {
        if s.h.len() != n_modes * n_nodes {
            return Err(Error::GridMismatch("snapshots differ in shape".into()));
        }
        w.write_all(&s.tau.to_le_bytes())?;
        buf.clear();
        for v in &s.h {
            buf.extend_from_slice(&(v.re as f32).to_le_bytes());
            buf.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn save_snapshots(path: &Path, snapshots: &[SpectralState], xi_max: f64) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshots(f, snapshots, xi_max)
}

/// Reads the layout of [`write_snapshots`]; returns the snapshots and Ξ.
pub fn read_snapshots<R: Read>(mut r: R) -> Result<(Vec<SpectralState>, f64)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAP_MAGIC {
        return domain("not a snapshot file");
    }
    let mut u = [0u8; 4];
    let mut read_u32 = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut u)?;
        Ok(u32::from_le_bytes(u))
    };
    let version = read_u32(&mut r)?;
    if version != SNAP_VERSION {
        return Err(Error::Unsupported(format!("snapshot version {version}")));
    }
    let (count, n_modes, n_nodes) = (read_u32(&mut r)? as usize, read_u32(&mut r)? as usize, read_u32(&mut r)? as usize);
    let mut f = [0u8; 8];
    r.read_exact(&mut f)?;
    let xi_max = f64::from_le_bytes(f);
    let k_max = (n_modes.saturating_sub(1) / 2) as u32;
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![0u8; 8 * n_modes * n_nodes];
    for _ in 0..count {
        r.read_exact(&mut f)?;
        let tau = f64::from_le_bytes(f);
        r.read_exact(&mut buf)?;
        let h = buf
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        out.push(SpectralState { tau, k_max, n_nodes, h });
    }
    Ok((out, xi_max))
}
