//! Dielectric function and Penrose stability margins.
//!
//! The margin `κ = inf_k inf_{Re λ ≥ 0} |D_k(λ)|` has no closed algorithm. The
//! symbol is analytic in the open right half-plane and tends to 1 at infinity,
//! so away from zeros its modulus is minimised on the imaginary axis; zeros
//! inside are located by an interior grid followed by Newton refinement.
//! The d = 4 condition is literally the classical one and is covered by
//! [`penrose_margin`] with a 4-dimensional equilibrium.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{Equilibrium, InteractionSign};
use crate::error::{domain, Result};
use crate::quad;

pub const DEFAULT_KAPPA_TOLERANCE: f64 = 1e-6;

/// `1 - c ∫_0^∞ e^{-λs} s m(ks) ds` with `m = μ̂` or `|μ̂|`.
#[derive(Clone, Copy, Debug)]
struct Symbol {
    eq: Equilibrium,
    k_abs: f64,
    coef: f64,
}

impl Symbol {
    fn decay_length(&self, lambda: Complex64) -> f64 {
        let rate = match self.eq {
            Equilibrium::Poisson { theta0, .. } => lambda.re + theta0 * self.k_abs,
            Equilibrium::Maxwellian { temperature, .. } => lambda.re + self.k_abs * temperature.sqrt(),
        };
        1.0 / rate.max(1e-3)
    }

    /// Analytic continuation of the radial transform, `m(z)` with `z = k s`.
    fn profile(&self, z: Complex64) -> Complex64 {
        match self.eq {
            Equilibrium::Poisson { theta0, .. } => (-theta0 * z).exp(),
            Equilibrium::Maxwellian { temperature, rho0, .. } => (-0.5 * temperature * z * z).exp() * rho0,
        }
    }

    fn moment(&self, lambda: Complex64, power: i32) -> Complex64 {
        let k = self.k_abs;
        let width = self.decay_length(lambda);
        // Far up the imaginary axis the real-line integrand oscillates too fast;
        // rotate s = r e^{iψ} into the sector where e^{-λs} decays. Both
        // profiles are entire and decay throughout that sector (the Gaussian
        // only for |ψ| < π/4).
        let rate = 1.0 / width;
        if lambda.im.abs() > 4.0 * rate {
            let angle = match self.eq {
                Equilibrium::Poisson { .. } => PI / 3.0,
                Equilibrium::Maxwellian { .. } => PI / 6.0,
            };
            let rot = Complex64::from_polar(1.0, -lambda.im.signum() * angle);
            let f = move |r: f64| {
                let s = rot * r;
                (-lambda * s).exp() * s.powi(power) * self.profile(k * s) * rot
            };
            let along = lambda.re * angle.cos() + lambda.im.abs() * angle.sin();
            return quad::integrate_to_infinity(f, 0.0, 1.0 / along, 1e-15, 1e-13).value;
        }
        let eq = self.eq;
        let f = move |s: f64| (-lambda * s).exp() * (s.powi(power) * eq.mu_hat_radial(k * s).abs());
        quad::integrate_to_infinity(f, 0.0, width, 1e-15, 1e-13).value
    }

    fn eval(&self, lambda: Complex64) -> Complex64 {
        Complex64::new(1.0, 0.0) - self.moment(lambda, 1) * self.coef
    }

    fn derivative(&self, lambda: Complex64) -> Complex64 {
        self.moment(lambda, 2) * self.coef
    }
}

fn check_args(k_abs: f64, lambda: Complex64) -> Result<()> {
    if !(k_abs > 0.0) {
        return domain("dielectric needs a nonzero mode");
    }
    if !(lambda.re >= 0.0) {
        return domain(format!("Re(lambda) = {} is negative", lambda.re));
    }
    Ok(())
}

/// `D_k(λ) = 1 - 4π ε_F ∫_0^∞ e^{-λs} s μ̂(ks) ds` by adaptive quadrature.
pub fn dielectric(eq: &Equilibrium, sign: InteractionSign, k_abs: f64, lambda: Complex64) -> Result<Complex64> {
    check_args(k_abs, lambda)?;
    // Both shipped transforms are nonnegative, so the |μ̂| moment is μ̂'s.
    Ok(Symbol { eq: *eq, k_abs, coef: 4.0 * PI * sign.eps_f() }.eval(lambda))
}

/// Closed form `1 - 4π ε_F / (λ + θ₀|k|)²` for the Poisson background.
pub fn poisson_dielectric_closed_form(theta0: f64, sign: InteractionSign, k_abs: f64, lambda: Complex64) -> Complex64 {
    let z = lambda + theta0 * k_abs;
    Complex64::new(1.0, 0.0) - 4.0 * PI * sign.eps_f() / (z * z)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenroseReport {
    pub kappa: f64,
    /// `[Re λ, Im λ]` of the minimiser.
    pub argmin_lambda: [f64; 2],
    pub argmin_k: f64,
    pub stable: bool,
    pub tolerance: f64,
    pub k_range: Vec<f64>,
    pub omega_max: f64,
    pub scan_resolution: f64,
    /// Largest positive real zero found, if any.
    pub real_root: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Imaginary-axis half-width; `None` picks `50 k_max / momentum_scale`.
    pub omega_max: Option<f64>,
    pub n_scan: usize,
    /// Interior grid: `Re λ ∈ (0, re_max]`, `|Im λ| ≤ im_max`.
    pub re_max: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
    pub tolerance: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            omega_max: None,
            n_scan: 256,
            re_max: 8.0,
            im_max: 8.0,
            n_re: 16,
            n_im: 33,
            tolerance: DEFAULT_KAPPA_TOLERANCE,
        }
    }
}

/// Distinct `|k|` over `Z^dim \ {0}` with `|k| ≤ k_max`.
pub fn lattice_norms(dim: u32, k_max: u32) -> Vec<f64> {
    let limit = (k_max as usize) * (k_max as usize);
    let mut reach = vec![false; limit + 1];
    reach[0] = true;
    for _ in 0..dim {
        let mut next = reach.clone();
        for n in 0..=limit {
            if !reach[n] {
                continue;
            }
            let mut j = 1;
            while n + j * j <= limit {
                next[n + j * j] = true;
                j += 1;
            }
        }
        reach = next;
    }
    (1..=limit).filter(|&n| reach[n]).map(|n| (n as f64).sqrt()).collect()
}

struct ModeScan {
    k_abs: f64,
    kappa: f64,
    argmin: Complex64,
    real_root: Option<f64>,
}

fn scan_mode(sym: Symbol, omega_max: f64, opts: &ScanOptions) -> ModeScan {
    let mut best = (f64::INFINITY, Complex64::new(0.0, 0.0));
    let consider = |lam: Complex64, v: f64, best: &mut (f64, Complex64)| {
        if v < best.0 {
            *best = (v, lam);
        }
    };

    // Imaginary axis.
    let n = opts.n_scan.max(2);
    let d_omega = 2.0 * omega_max / (n - 1) as f64;
    let axis: Vec<f64> = (0..n)
        .map(|j| {
            let lam = Complex64::new(0.0, -omega_max + d_omega * j as f64);
            sym.eval(lam).norm()
        })
        .collect();
    let j_min = (0..n).min_by(|&a, &b| axis[a].total_cmp(&axis[b])).unwrap();
    consider(Complex64::new(0.0, -omega_max + d_omega * j_min as f64), axis[j_min], &mut best);

    // Golden-section refinement of |D(iω)| around the best axis sample.
    {
        let mut lo = -omega_max + d_omega * (j_min.saturating_sub(1)) as f64;
        let mut hi = -omega_max + d_omega * ((j_min + 1).min(n - 1)) as f64;
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let f = |w: f64| sym.eval(Complex64::new(0.0, w)).norm();
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..60 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            }
        }
        consider(Complex64::new(0.0, x1), f1, &mut best);
        consider(Complex64::new(0.0, x2), f2, &mut best);
    }

    // Interior grid, then Newton from the best interior points.
    let mut interior = Vec::with_capacity(opts.n_re * opts.n_im);
    for i in 1..=opts.n_re {
        let re = opts.re_max * i as f64 / opts.n_re as f64;
        for j in 0..opts.n_im {
            let im = if opts.n_im == 1 { 0.0 } else { -opts.im_max + 2.0 * opts.im_max * j as f64 / (opts.n_im - 1) as f64 };
            let lam = Complex64::new(re, im);
            interior.push((sym.eval(lam).norm(), lam));
        }
    }
    interior.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &(v, lam) in interior.iter().take(4) {
        consider(lam, v, &mut best);
        let mut z = lam;
        for _ in 0..50 {
            let d = sym.eval(z);
            consider(z, d.norm(), &mut best);
            let dd = sym.derivative(z);
            if dd.norm() == 0.0 {
                break;
            }
            let next = z - d / dd;
            if !(next.re >= 0.0) || !next.re.is_finite() || (next - z).norm() < 1e-14 * z.norm().max(1.0) {
                if next.re >= 0.0 && next.re.is_finite() {
                    consider(next, sym.eval(next).norm(), &mut best);
                }
                break;
            }
            z = next;
        }
    }

    let real_root = real_axis_root(&sym, opts.re_max.max(4.0 * PI.sqrt()));
    if let Some(r) = real_root {
        consider(Complex64::new(r, 0.0), sym.eval(Complex64::new(r, 0.0)).norm(), &mut best);
    }
    ModeScan { k_abs: sym.k_abs, kappa: best.0, argmin: best.1, real_root }
}

/// Largest zero of the (real) symbol on `[0, re_max]`, by sign change and
/// bisection.
fn real_axis_root(sym: &Symbol, re_max: f64) -> Option<f64> {
    let f = |x: f64| sym.eval(Complex64::new(x, 0.0)).re;
    let n = 256;
    let xs: Vec<f64> = (0..=n).map(|i| re_max * i as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    for i in (0..n).rev() {
        if vals[i] == 0.0 {
            return Some(xs[i]);
        }
        if vals[i].signum() != vals[i + 1].signum() {
            let (mut lo, mut hi) = (xs[i], xs[i + 1]);
            let mut flo = vals[i];
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 || hi - lo < 1e-15 * hi.max(1.0) {
                    return Some(mid);
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
    }
    None
}

fn assemble(scans: Vec<ModeScan>, k_range: Vec<f64>, omega_max: f64, opts: &ScanOptions) -> PenroseReport {
    let best = scans.iter().min_by(|a, b| a.kappa.total_cmp(&b.kappa)).unwrap();
    let real_root = scans.iter().filter_map(|s| s.real_root).fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    PenroseReport {
        kappa: best.kappa,
        argmin_lambda: [best.argmin.re, best.argmin.im],
        argmin_k: best.k_abs,
        stable: best.kappa > opts.tolerance,
        tolerance: opts.tolerance,
        k_range,
        omega_max,
        scan_resolution: 2.0 * omega_max / (opts.n_scan.max(2) - 1) as f64,
        real_root,
    }
}

/// Stability margin over all lattice modes with `|k| ≤ k_max`.
pub fn penrose_margin(eq: &Equilibrium, sign: InteractionSign, k_max: u32, opts: &ScanOptions) -> Result<PenroseReport> {
    if k_max < 1 || opts.n_scan < 64 {
        return domain(format!("need k_max >= 1 and n_scan >= 64 (got {k_max}, {})", opts.n_scan));
    }
    let omega_max = opts.omega_max.unwrap_or(50.0 * k_max as f64 / eq.momentum_scale());
    let ks = lattice_norms(eq.dim(), k_max);
    let coef = 4.0 * PI * sign.eps_f();
    let scans: Vec<ModeScan> = ks
        .par_iter()
        .map(|&k_abs| scan_mode(Symbol { eq: *eq, k_abs, coef }, omega_max, opts))
        .collect();
    Ok(assemble(scans, ks, omega_max, opts))
}

/// Adapted condition for `d ≥ 5`: `1 - 4π a(t₀)^{-(d-4)} ∫ e^{-λs} s |μ̂(sk)| ds`.
pub fn adapted_margin_d5(eq: &Equilibrium, a_t0: f64, k_max: u32, opts: &ScanOptions) -> Result<PenroseReport> {
    let d = eq.dim();
    if d < 5 {
        return domain(format!("adapted condition needs d >= 5, got {d}"));
    }
    if !(a_t0 >= 1.0) {
        return domain(format!("a(t0) = {a_t0} must be >= 1"));
    }
    if k_max < 1 || opts.n_scan < 64 {
        return domain("need k_max >= 1 and n_scan >= 64");
    }
    let omega_max = opts.omega_max.unwrap_or(50.0 * k_max as f64 / eq.momentum_scale());
    let ks = lattice_norms(d, k_max);
    let coef = 4.0 * PI * a_t0.powi(-(d as i32 - 4));
    let scans: Vec<ModeScan> = ks
        .par_iter()
        .map(|&k_abs| scan_mode(Symbol { eq: *eq, k_abs, coef }, omega_max, opts))
        .collect();
    Ok(assemble(scans, ks, omega_max, opts))
}

/// `(ω, |D_k(iω)|)` on a uniform grid of `n` points over `[-ω_max, ω_max]`.
pub fn boundary_trace(eq: &Equilibrium, sign: InteractionSign, k_abs: f64, omega_max: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let n = n.max(2);
    (0..n)
        .into_par_iter()
        .map(|j| {
            let w = -omega_max + 2.0 * omega_max * j as f64 / (n - 1) as f64;
            Ok((w, dielectric(eq, sign, k_abs, Complex64::new(0.0, w))?.norm()))
        })
        .collect()
}

/// Critical torus size `√(4T/ρ₀)` for a gravitating Maxwellian.
pub fn jeans_length(temperature: f64, rho0: f64) -> Result<f64> {
    if !(temperature > 0.0) || !(rho0 > 0.0) {
        return domain(format!("temperature and density must be positive, got {temperature}, {rho0}"));
    }
    Ok((4.0 * temperature / rho0).sqrt())
}
