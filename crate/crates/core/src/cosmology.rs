//! Scale-factor models and the renormalized clock.
//!
//! For `a(t) = t^q` the renormalized time `τ(t) = ∫_{t0}^t a(s)^{-2} ds` and
//! its inverse `T(τ)` have closed forms; everything downstream works with the
//! composed factor `a(T(τ))`, here [`ScaleFactorModel::a_at_tau`].

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawModel {
    PowerLaw { q: f64, t0: f64 },
    Constant {
        #[serde(default = "unit")]
        t0: f64,
    },
}

fn unit() -> f64 {
    1.0
}

/// Expansion law of the background. `q` is restricted to `[0, 1/2]`: beyond
/// that τ has finite range and free transport cannot phase-mix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub enum ScaleFactorModel {
    PowerLaw { q: f64, t0: f64 },
    Constant { t0: f64 },
}

impl TryFrom<RawModel> for ScaleFactorModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        match raw {
            RawModel::PowerLaw { q, t0 } => ScaleFactorModel::power_law(q, t0),
            RawModel::Constant { t0 } => ScaleFactorModel::constant(t0),
        }
    }
}

impl From<ScaleFactorModel> for RawModel {
    fn from(m: ScaleFactorModel) -> Self {
        match m {
            ScaleFactorModel::PowerLaw { q, t0 } => RawModel::PowerLaw { q, t0 },
            ScaleFactorModel::Constant { t0 } => RawModel::Constant { t0 },
        }
    }
}

impl ScaleFactorModel {
    pub fn power_law(q: f64, t0: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return domain(format!("t0 must be positive, got {t0}"));
        }
        if !(0.0..=0.5).contains(&q) {
            return domain(format!("power-law exponent q = {q} outside [0, 1/2]"));
        }
        Ok(ScaleFactorModel::PowerLaw { q, t0 })
    }

    pub fn constant(t0: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return domain(format!("t0 must be positive, got {t0}"));
        }
        Ok(ScaleFactorModel::Constant { t0 })
    }

    pub fn t0(&self) -> f64 {
        match *self {
            ScaleFactorModel::PowerLaw { t0, .. } | ScaleFactorModel::Constant { t0 } => t0,
        }
    }

    /// Expansion exponent; 0 for the constant model.
    pub fn q(&self) -> f64 {
        match *self {
            ScaleFactorModel::PowerLaw { q, .. } => q,
            ScaleFactorModel::Constant { .. } => 0.0,
        }
    }

    /// Closed-form growth exponent `q/(1-2q)` of `a∘T`; `None` at `q = 1/2`
    /// where the growth is exponential.
    pub fn beta(&self) -> Option<f64> {
        let q = self.q();
        if q < 0.5 {
            Some(q / (1.0 - 2.0 * q))
        } else {
            None
        }
    }

    pub fn a_of_t(&self, t: f64) -> f64 {
        match *self {
            ScaleFactorModel::PowerLaw { q, .. } => t.powf(q),
            ScaleFactorModel::Constant { .. } => 1.0,
        }
    }

    pub fn tau_of_t(&self, t: f64) -> Result<f64> {
        let t0 = self.t0();
        if !(t >= t0) {
            return domain(format!("t = {t} precedes t0 = {t0}"));
        }
        Ok(match *self {
            ScaleFactorModel::Constant { .. } => t - t0,
            ScaleFactorModel::PowerLaw { q: 0.5, .. } => t.ln() - t0.ln(),
            ScaleFactorModel::PowerLaw { q, .. } => {
                let e = 1.0 - 2.0 * q;
                (t.powf(e) - t0.powf(e)) / e
            }
        })
    }

    /// Inverse clock `T(τ)`.
    pub fn t_of_tau(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) {
            return domain(format!("tau = {tau} is negative"));
        }
        Ok(match *self {
            ScaleFactorModel::Constant { t0 } => t0 + tau,
            ScaleFactorModel::PowerLaw { q: 0.5, t0 } => t0 * tau.exp(),
            ScaleFactorModel::PowerLaw { q, t0 } => {
                let e = 1.0 - 2.0 * q;
                (e * tau + t0.powf(e)).powf(1.0 / e)
            }
        })
    }

    /// The composed factor `a(T(τ))`.
    pub fn a_at_tau(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) {
            return domain(format!("tau = {tau} is negative"));
        }
        Ok(self.a_at_tau_unchecked(tau))
    }

    pub(crate) fn a_at_tau_unchecked(&self, tau: f64) -> f64 {
        self.a_at_tau_derivs(tau).0
    }

    /// `(a∘T, (a∘T)', (a∘T)'')` at τ, in closed form.
    pub fn a_at_tau_derivs(&self, tau: f64) -> (f64, f64, f64) {
        match *self {
            ScaleFactorModel::Constant { .. } => (1.0, 0.0, 0.0),
            ScaleFactorModel::PowerLaw { q: 0.0, .. } => (1.0, 0.0, 0.0),
            ScaleFactorModel::PowerLaw { q: 0.5, t0 } => {
                let a = t0.sqrt() * (0.5 * tau).exp();
                (a, 0.5 * a, 0.25 * a)
            }
            ScaleFactorModel::PowerLaw { q, t0 } => {
                let e = 1.0 - 2.0 * q;
                let p = q / e;
                let x = e * tau + t0.powf(e);
                let a = x.powf(p);
                (a, p * e * a / x, p * (p - 1.0) * e * e * a / (x * x))
            }
        }
    }

    /// `a^{-1/4} |(a^{-1/4})''|` for `a = scale·(a∘T)`, the integrand of the
    /// Liouville–Green variation.
    pub fn lg_integrand(&self, tau: f64, scale: f64) -> f64 {
        let (a, da, dda) = self.a_at_tau_derivs(tau);
        let (a, da, dda) = (scale * a, scale * da, scale * dda);
        let g = a.powf(-0.25);
        let g2 = -0.25 * a.powf(-1.25) * dda + (5.0 / 16.0) * a.powf(-2.25) * da * da;
        g * g2.abs()
    }

    pub fn expansion_law(&self) -> ExpansionLaw {
        ExpansionLaw { q: self.q(), t0: self.t0() }
    }
}

/// `a(t) = t^q` without the phase-mixing restriction on `q`; used for the
/// background-field bookkeeping, which is meaningful for any `q > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionLaw {
    pub q: f64,
    pub t0: f64,
}

impl ExpansionLaw {
    pub fn new(q: f64, t0: f64) -> Result<Self> {
        if !(t0 > 0.0) || !q.is_finite() || q < 0.0 {
            return domain(format!("invalid expansion law q = {q}, t0 = {t0}"));
        }
        Ok(ExpansionLaw { q, t0 })
    }

    pub fn a(&self, t: f64) -> f64 {
        t.powf(self.q)
    }

    pub fn a_ddot(&self, t: f64) -> f64 {
        self.q * (self.q - 1.0) * t.powf(self.q - 2.0)
    }
}

/// Background potential `φ_b(t)` that makes `a(t) = t^q` solve the
/// Friedman-like equation.
pub fn background_field(law: &ExpansionLaw, d: u32, eps_f: f64, t: f64) -> Result<f64> {
    if law.q == 0.0 {
        return Err(Error::Unsupported("background field needs q > 0 (term a^{2-2/q})".into()));
    }
    if !(t >= law.t0) {
        return domain(format!("t = {t} precedes t0 = {}", law.t0));
    }
    let a = law.a(t);
    let d = d as f64;
    let q = law.q;
    // a^{2-2/q}, not a^{-2/q}: only this exponent makes t^q solve the Friedman-type relation.
    Ok(-eps_f * (4.0 * std::f64::consts::PI / d) * a.powf(2.0 - d) - q * (q - 1.0) * a.powf(2.0 - 2.0 / q))
}

/// Largest residual of `ä + (4π/d) ε_F a^{1-d} + a^{-1} φ_b` over `t_grid`.
pub fn friedman_residual(law: &ExpansionLaw, d: u32, eps_f: f64, t_grid: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        let a = law.a(t);
        let phi = background_field(law, d, eps_f, t)?;
        let r = law.a_ddot(t) + (4.0 * std::f64::consts::PI / d as f64) * eps_f * a.powf(1.0 - d as f64) + phi / a;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub beta_fit: f64,
    pub beta_closed: Option<f64>,
    pub beta_rel_gap: Option<f64>,
    pub scale_bound_ok: bool,
    pub lg_integral: f64,
    pub lg_integral_finite: bool,
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Fits the growth exponent of `a∘T` against `⟨τ⟩` on a log-spaced grid over
/// `[√τ_max, τ_max]` and evaluates the Liouville–Green integral with a
/// power-law tail beyond `τ_max`.
pub fn check_admissibility(model: &ScaleFactorModel, tau_max: f64, n_grid: usize) -> Result<AdmissibilityReport> {
    if !(tau_max > 1.0) || n_grid < 16 {
        return domain(format!("need tau_max > 1 and n_grid >= 16 (got {tau_max}, {n_grid})"));
    }
    let lo = tau_max.sqrt().ln();
    let hi = tau_max.ln();
    let pts: Vec<(f64, f64)> = (0..n_grid)
        .map(|i| {
            let tau = (lo + (hi - lo) * i as f64 / (n_grid - 1) as f64).exp();
            (japanese(tau).ln(), model.a_at_tau_unchecked(tau).ln())
        })
        .collect();
    let beta_fit = least_squares_slope(&pts).max(0.0);

    let beta_closed = match model {
        ScaleFactorModel::Constant { .. } => Some(0.0),
        m => m.beta(),
    };
    let beta_rel_gap = beta_closed.map(|b| if b == 0.0 { beta_fit } else { (beta_fit - b).abs() / b });

    // Bounded by ⟨τ⟩^β iff the local log-log slope settles at or below β.
    let n = pts.len();
    let tail_slope = (pts[n - 1].1 - pts[n - 2].1) / (pts[n - 1].0 - pts[n - 2].0);
    let beta_used = beta_closed.unwrap_or(beta_fit);
    let scale_bound_ok = tail_slope.is_finite() && tail_slope <= beta_used + 0.01;

    let (lg_integral, lg_integral_finite) = lg_variation_with_tail(model, 1.0, tau_max);
    Ok(AdmissibilityReport { beta_fit, beta_closed, beta_rel_gap, scale_bound_ok, lg_integral, lg_integral_finite })
}

/// `∫_0^∞ a^{-1/4}|(a^{-1/4})''|` for `a = scale·(a∘T)`, integrated to
/// `tau_max` and extrapolated beyond it as a local power law.
pub fn lg_variation_with_tail(model: &ScaleFactorModel, scale: f64, tau_max: f64) -> (f64, bool) {
    let f = |t: f64| model.lg_integrand(t, scale);
    let body = quad::integrate(f, 0.0, tau_max, 1e-15, 1e-12).value;
    let f_end = f(tau_max);
    if f_end == 0.0 {
        return (body, body.is_finite());
    }
    let h = 1e-3 * tau_max;
    let slope = ((f(tau_max + h)).ln() - (f(tau_max - h)).ln()) / ((tau_max + h).ln() - (tau_max - h).ln());
    let p = -slope;
    if !(p > 1.0) {
        return (f64::INFINITY, false);
    }
    let tail = f_end * tau_max / (p - 1.0);
    let total = body + tail;
    (total, total.is_finite())
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
