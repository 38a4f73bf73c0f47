//! Background equilibria and the per-mode memory kernels built from them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cosmology::ScaleFactorModel;
use crate::error::{domain, Error, Result};

/// Radial background distribution. Only the Fourier transform enters the
/// linear theory; the real-space profile is needed for plotting and for the
/// quadrature consistency check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Equilibrium {
    /// `μ̂(ξ) = exp(-θ₀|ξ|)`.
    Poisson { theta0: f64, dim: u32 },
    /// `μ̂(ξ) = ρ₀ exp(-T|ξ|²/2)`.
    Maxwellian { temperature: f64, rho0: f64, dim: u32 },
}

impl Equilibrium {
    pub fn poisson(theta0: f64, dim: u32) -> Result<Self> {
        let eq = Equilibrium::Poisson { theta0, dim };
        eq.validate()?;
        Ok(eq)
    }

    pub fn maxwellian(temperature: f64, rho0: f64, dim: u32) -> Result<Self> {
        let eq = Equilibrium::Maxwellian { temperature, rho0, dim };
        eq.validate()?;
        Ok(eq)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Equilibrium::Poisson { theta0, dim } => {
                if !(theta0 > 0.0 && theta0.is_finite()) {
                    return domain(format!("theta0 must be positive, got {theta0}"));
                }
                if dim == 0 {
                    return domain("dimension must be at least 1");
                }
            }
            Equilibrium::Maxwellian { temperature, rho0, dim } => {
                if !(temperature > 0.0) || !(rho0 > 0.0) {
                    return domain(format!("temperature and rho0 must be positive, got {temperature}, {rho0}"));
                }
                if dim == 0 {
                    return domain("dimension must be at least 1");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> u32 {
        match *self {
            Equilibrium::Poisson { dim, .. } | Equilibrium::Maxwellian { dim, .. } => dim,
        }
    }

    /// Width of the background in velocity, used to size ξ-windows.
    pub fn momentum_scale(&self) -> f64 {
        match *self {
            Equilibrium::Poisson { theta0, .. } => 1.0 / theta0,
            Equilibrium::Maxwellian { temperature, .. } => temperature.sqrt(),
        }
    }

    /// `μ̂` as a function of `|ξ|`.
    #[inline]
    pub fn mu_hat_radial(&self, r: f64) -> f64 {
        match *self {
            Equilibrium::Poisson { theta0, .. } => (-theta0 * r.abs()).exp(),
            Equilibrium::Maxwellian { temperature, rho0, .. } => rho0 * (-0.5 * temperature * r * r).exp(),
        }
    }

    pub fn mu_hat(&self, xi: &[f64]) -> f64 {
        self.mu_hat_radial(norm(xi))
    }

    /// Real-space density. Poisson: the d=3 profile `θ₀/(π²(θ₀²+|v|²)²)` and
    /// the d=1 Cauchy density, both transforming to `exp(-θ₀|ξ|)`.
    pub fn mu_value(&self, v: &[f64]) -> Result<f64> {
        let r2: f64 = v.iter().map(|x| x * x).sum();
        match *self {
            Equilibrium::Poisson { theta0, dim } => {
                if v.len() != dim as usize {
                    return domain(format!("velocity has {} components, equilibrium is {dim}-dimensional", v.len()));
                }
                match dim {
                    1 => Ok(theta0 / (PI * (theta0 * theta0 + r2))),
                    3 => Ok(theta0 / (PI * PI * (theta0 * theta0 + r2).powi(2))),
                    _ => Err(Error::Unsupported(format!("no closed-form Poisson profile for d = {dim}"))),
                }
            }
            Equilibrium::Maxwellian { temperature, rho0, dim } => {
                if v.len() != dim as usize {
                    return domain(format!("velocity has {} components, equilibrium is {dim}-dimensional", v.len()));
                }
                let norm = (2.0 * PI * temperature).powf(dim as f64 / 2.0);
                Ok(rho0 * (-r2 / (2.0 * temperature)).exp() / norm)
            }
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sign of the interaction: `ε_F = -1` repulsive (electrostatic), `+1`
/// attractive (gravitational). Serialized as the integer `ε_F`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum InteractionSign {
    Repulsive,
    Attractive,
}

impl InteractionSign {
    pub fn eps_f(self) -> f64 {
        match self {
            InteractionSign::Repulsive => -1.0,
            InteractionSign::Attractive => 1.0,
        }
    }
}

impl TryFrom<i8> for InteractionSign {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(InteractionSign::Repulsive),
            1 => Ok(InteractionSign::Attractive),
            _ => domain(format!("interaction sign must be -1 or +1, got {v}")),
        }
    }
}

impl From<InteractionSign> for i8 {
    fn from(s: InteractionSign) -> i8 {
        s.eps_f() as i8
    }
}

/// `M̂_k(s) = s μ̂(ks)`.
pub fn kernel_m(eq: &Equilibrium, k_abs: f64, s: f64) -> Result<f64> {
    if !(k_abs > 0.0) {
        return domain("kernel needs a nonzero mode");
    }
    Ok(s * eq.mu_hat_radial(k_abs * s))
}

/// `K_k(τ, τ̃) = 4π ε_F M̂_k(τ-τ̃) a(T(τ̃))^p` for `τ ≥ τ̃`, zero otherwise.
pub fn kernel_k(
    eq: &Equilibrium,
    model: &ScaleFactorModel,
    sign: InteractionSign,
    k_abs: f64,
    tau: f64,
    tau_tilde: f64,
    dim_power: f64,
) -> Result<f64> {
    Ok(ModeKernel::new(*eq, *model, sign, k_abs, dim_power)?.eval(tau, tau_tilde))
}

/// A two-time kernel `K(τ, τ̃)`.
pub trait Kernel: Sync {
    fn eval(&self, tau: f64, tau_tilde: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64 + Sync> Kernel for F {
    fn eval(&self, tau: f64, tau_tilde: f64) -> f64 {
        self(tau, tau_tilde)
    }
}

/// The memory kernel of the density equation for a single spatial mode.
#[derive(Clone, Copy, Debug)]
pub struct ModeKernel {
    pub eq: Equilibrium,
    pub model: ScaleFactorModel,
    pub sign: InteractionSign,
    pub k_abs: f64,
    pub dim_power: f64,
}

impl ModeKernel {
    pub fn new(eq: Equilibrium, model: ScaleFactorModel, sign: InteractionSign, k_abs: f64, dim_power: f64) -> Result<Self> {
        if !(k_abs > 0.0) {
            return domain("kernel needs a nonzero mode");
        }
        Ok(ModeKernel { eq, model, sign, k_abs, dim_power })
    }

    /// The d = 3 kernel (`a(T(τ̃))^1`).
    pub fn standard(eq: Equilibrium, model: ScaleFactorModel, sign: InteractionSign, k_abs: f64) -> Result<Self> {
        Self::new(eq, model, sign, k_abs, 1.0)
    }
}

impl Kernel for ModeKernel {
    #[inline]
    fn eval(&self, tau: f64, tau_tilde: f64) -> f64 {
        let s = tau - tau_tilde;
        if s <= 0.0 || tau_tilde < 0.0 {
            return 0.0;
        }
        let a = self.model.a_at_tau_unchecked(tau_tilde);
        let a_p = if self.dim_power == 1.0 { a } else { a.powf(self.dim_power) };
        4.0 * PI * self.sign.eps_f() * s * self.eq.mu_hat_radial(self.k_abs * s) * a_p
    }
}
