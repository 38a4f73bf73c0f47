//! Gevrey multipliers, generator functions and the elementary inequalities
//! they rely on.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GevreyParams {
    pub gamma: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub delta: f64,
    pub theta0: f64,
}

impl Default for GevreyParams {
    fn default() -> Self {
        GevreyParams { gamma: 1.0, sigma: 5.0, alpha: 1.0, lambda0: 0.4, lambda1: 0.1, delta: 0.5, theta0: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoremAdmissibility {
    pub gamma_min: f64,
    pub sigma_min: f64,
    pub gamma_ok: bool,
    pub sigma_ok: bool,
}

impl GevreyParams {
    /// Every violated constraint, joined into one error.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            errs.push(format!("gamma = {} not in (0, 1]", self.gamma));
        }
        if !(self.sigma >= 0.0) {
            errs.push(format!("sigma = {} is negative", self.sigma));
        }
        if !(self.alpha > 1.0 / 3.0 && self.alpha <= 1.0) {
            errs.push(format!("alpha = {} not in (1/3, 1]", self.alpha));
        }
        if !(self.lambda0 > 0.0 && self.lambda0 <= 1.0) {
            errs.push(format!("lambda0 = {} not in (0, 1]", self.lambda0));
        }
        if !(self.lambda1 > 0.0 && self.lambda1 <= self.lambda0 / 4.0) {
            errs.push(format!("lambda1 = {} not in (0, lambda0/4]", self.lambda1));
        }
        if !(self.delta > 0.0) {
            errs.push(format!("delta = {} must be positive", self.delta));
        }
        if !(self.theta0 > 0.0) {
            errs.push(format!("theta0 = {} must be positive", self.theta0));
        }
        if self.gamma == 1.0 && !(self.lambda1 < self.theta0 / 2.0) {
            errs.push(format!("gamma = 1 needs lambda1 < theta0/2 (lambda1 = {}, theta0 = {})", self.lambda1, self.theta0));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// `γ > 1 - 2/(3+β+β')` and `σ > max{4, 2+β+β'}`.
    pub fn theorem_admissibility(&self, beta: f64, beta_prime: f64) -> TheoremAdmissibility {
        let gamma_min = 1.0 - 2.0 / (3.0 + beta + beta_prime);
        let sigma_min = (2.0 + beta + beta_prime).max(4.0);
        TheoremAdmissibility { gamma_min, sigma_min, gamma_ok: self.gamma > gamma_min, sigma_ok: self.sigma > sigma_min }
    }
}

/// `⟨k, ξ⟩ = (1 + |k|² + |ξ|²)^{1/2}`.
pub fn bracket(k: &[f64], xi: &[f64]) -> f64 {
    let s: f64 = k.iter().chain(xi).map(|x| x * x).sum();
    (1.0 + s).sqrt()
}

pub fn log_multiplier(p: &GevreyParams, z: f64, k: &[f64], xi: &[f64]) -> f64 {
    let b = bracket(k, xi);
    z * b.powf(p.gamma) + p.sigma * b.ln()
}

/// `A(z)_{k,ξ} = e^{z⟨k,ξ⟩^γ} ⟨k,ξ⟩^σ`.
pub fn multiplier_a(p: &GevreyParams, z: f64, k: &[f64], xi: &[f64]) -> f64 {
    log_multiplier(p, z, k, xi).exp()
}

/// `z(τ) = λ₁(1 + ⟨τ⟩^{-δ})`.
pub fn sliding_z(p: &GevreyParams, tau: f64) -> f64 {
    p.lambda1 * (1.0 + (1.0 + tau * tau).powf(-0.5 * p.delta))
}

fn as_f64(k: &[i64]) -> Vec<f64> {
    k.iter().map(|&x| x as f64).collect()
}

/// `sup_{k≠0} A(z)_{k,kτ} |k|^{-α} |ρ̂_k|` over the given modes; `k = 0` is
/// skipped.
pub fn generator_f<'a, I>(p: &GevreyParams, modes: I, tau: f64, z: f64) -> f64
where
    I: IntoIterator<Item = (&'a [i64], Complex64)>,
{
    let mut sup: f64 = 0.0;
    for (k, rho) in modes {
        let kf = as_f64(k);
        let norm = kf.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || rho.norm() == 0.0 {
            continue;
        }
        let kt: Vec<f64> = kf.iter().map(|x| x * tau).collect();
        sup = sup.max((log_multiplier(p, z, &kf, &kt) - p.alpha * norm.ln() + rho.norm().ln()).exp());
    }
    sup
}

/// `(Σ_k e^{2z⟨k⟩^γ}⟨k⟩^{2σ}|ρ̂_k|²)^{1/2}`.
pub fn gevrey_norm_torus<'a, I>(p: &GevreyParams, modes: I, z: f64) -> f64
where
    I: IntoIterator<Item = (&'a [i64], Complex64)>,
{
    modes
        .into_iter()
        .map(|(k, rho)| {
            let a = multiplier_a(p, z, &as_f64(k), &[]);
            (a * rho.norm()).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// First derivative with 4th-order stencils: centered inside, one-sided in the
/// two boundary cells on each end.
pub fn derivative4(f: &[Complex64], h: f64) -> Result<Vec<Complex64>> {
    let n = f.len();
    if n < 5 {
        return domain(format!("need at least 5 nodes for 4th-order differences, got {n}"));
    }
    let c = 1.0 / (12.0 * h);
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    d[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * c;
    d[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * c;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) * c;
    }
    d[n - 2] = (f[n - 1] * 3.0 + f[n - 2] * 10.0 - f[n - 3] * 18.0 + f[n - 4] * 6.0 - f[n - 5]) * c;
    d[n - 1] = (f[n - 1] * 25.0 - f[n - 2] * 48.0 + f[n - 3] * 36.0 - f[n - 4] * 16.0 + f[n - 5] * 3.0) * c;
    Ok(d)
}

/// `Σ_{j=0}^{d} Σ_k Σ_i A(z)²_{k,ξᵢ} |D^j ĥ(k, ξᵢ)|² Δξ` on a uniform 1-D ξ grid;
/// `d` is the simulation dimension and `D^j` repeated 4th-order differences.
pub fn generator_g(p: &GevreyParams, dim: u32, rows: &[(i64, &[Complex64])], xi: &[f64], z: f64) -> Result<f64> {
    if xi.len() < 5 {
        return domain(format!("need at least 5 xi nodes, got {}", xi.len()));
    }
    let h = xi[1] - xi[0];
    let mut total = 0.0;
    for &(k, row) in rows {
        if row.len() != xi.len() {
            return Err(Error::GridMismatch(format!("row of {} for {} xi nodes", row.len(), xi.len())));
        }
        let weights: Vec<f64> = xi.iter().map(|&x| (2.0 * log_multiplier(p, z, &[k as f64], &[x])).exp()).collect();
        let mut d = row.to_vec();
        for j in 0..=dim {
            if j > 0 {
                d = derivative4(&d, h)?;
            }
            total += weights.iter().zip(&d).map(|(w, v)| w * v.norm_sqr()).sum::<f64>() * h;
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    /// `exp` of the largest log-gap `ln lhs - ln rhs` (normalised by `max(1, |ln rhs|)` where the sides can be huge).
    pub worst_ratio: f64,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn tally(name: &str, samples: usize, mut log_ratio: impl FnMut() -> f64) -> InequalityReport {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let r = log_ratio();
        // Relative floating-point slack on the log scale.
        if r > 1e-12 {
            violations += 1;
        }
        worst = worst.max(r);
    }
    InequalityReport { name: name.into(), samples, violations, worst_ratio: worst.exp() }
}

fn random_lattice(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-50i64..=50) as f64).collect()
}

fn random_freq(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-100.0..=100.0)).collect()
}

fn add(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + sign * y).collect()
}

/// `⟨k+k', ξ+ξ'⟩^γ ≤ ⟨k,ξ⟩^γ + ⟨k',ξ'⟩^γ`.
pub fn check_triangle(samples: usize, seed: u64) -> InequalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tally("bracket_triangle", samples, || {
        let d = rng.gen_range(1..=3);
        let gamma = 1.0 - rng.gen::<f64>();
        let (k, kp, x, xp) = (random_lattice(&mut rng, d), random_lattice(&mut rng, d), random_freq(&mut rng, d), random_freq(&mut rng, d));
        let lhs = bracket(&add(&k, &kp, 1.0), &add(&x, &xp, 1.0)).powf(gamma);
        let rhs = bracket(&k, &x).powf(gamma) + bracket(&kp, &xp).powf(gamma);
        (lhs / rhs).ln()
    })
}

/// `⟨k,ξ⟩ / ⟨k',ξ'⟩ ≤ 2⟨k+k', ξ+ξ'⟩`.
pub fn check_ratio(samples: usize, seed: u64) -> InequalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tally("bracket_ratio", samples, || {
        let d = rng.gen_range(1..=3);
        let (k, kp, x, xp) = (random_lattice(&mut rng, d), random_lattice(&mut rng, d), random_freq(&mut rng, d), random_freq(&mut rng, d));
        bracket(&k, &x).ln() - bracket(&kp, &xp).ln() - (2.0 * bracket(&add(&k, &kp, 1.0), &add(&x, &xp, 1.0))).ln()
    })
}

/// `A(z)_{k,ξ} ≤ 2^σ A(z)_{k-k',ξ-ξ'} A(z)_{k',ξ'}`.
pub fn check_algebra(samples: usize, seed: u64) -> InequalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tally("multiplier_algebra", samples, || {
        let d = rng.gen_range(1..=3);
        let p = GevreyParams { gamma: 1.0 - rng.gen::<f64>(), sigma: rng.gen_range(0.0..10.0), ..GevreyParams::default() };
        let z = rng.gen_range(0.0..=1.0);
        let (k, kp, x, xp) = (random_lattice(&mut rng, d), random_lattice(&mut rng, d), random_freq(&mut rng, d), random_freq(&mut rng, d));
        let lhs = log_multiplier(&p, z, &k, &x);
        let rhs = p.sigma * 2f64.ln() + log_multiplier(&p, z, &add(&k, &kp, -1.0), &add(&x, &xp, -1.0)) + log_multiplier(&p, z, &kp, &xp);
        // Compare on a scale where absolute log error means relative error.
        (lhs - rhs) / rhs.abs().max(1.0)
    })
}

fn tool_samples(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    let mut pos = || 10.0 * (1.0 - rng.gen::<f64>());
    let (b1, b2, c) = (pos(), pos(), pos());
    (b1, b2, c, rng.gen_range(-100.0..=100.0))
}

/// `|y|^{b₁} e^{-c|y|^{b₂}} ≤ (b₁/c)^{b₁/b₂} e^{-b₁}`, as stated. The true
/// maximum is `(b₁/(c b₂))^{b₁/b₂} e^{-b₁/b₂}`, so this fails for `b₂ ≠ 1`
/// near the peak.
pub fn check_tool(samples: usize, seed: u64) -> InequalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tally("peak_bound", samples, || {
        let (b1, b2, c, y) = tool_samples(&mut rng);
        if y == 0.0 {
            return f64::NEG_INFINITY;
        }
        let lhs = b1 * y.abs().ln() - c * y.abs().powf(b2);
        let rhs = (b1 / b2) * (b1 / c).ln() - b1;
        (lhs - rhs) / rhs.abs().max(1.0)
    })
}

/// The sharp form `|y|^{b₁} e^{-c|y|^{b₂}} ≤ (b₁/(c b₂))^{b₁/b₂} e^{-b₁/b₂}`.
pub fn check_tool_sharp(samples: usize, seed: u64) -> InequalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tally("peak_bound_sharp", samples, || {
        let (b1, b2, c, y) = tool_samples(&mut rng);
        if y == 0.0 {
            return f64::NEG_INFINITY;
        }
        let lhs = b1 * y.abs().ln() - c * y.abs().powf(b2);
        let rhs = (b1 / b2) * (b1 / (c * b2)).ln() - b1 / b2;
        (lhs - rhs) / rhs.abs().max(1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn params(gamma: f64, sigma: f64, alpha: f64) -> GevreyParams {
        GevreyParams { gamma, sigma, alpha, ..GevreyParams::default() }
    }

    #[test]
    fn multiplier_examples() {
        assert_eq!(multiplier_a(&params(0.5, 0.0, 1.0), 0.0, &[3.0], &[2.0]), 1.0);
        assert!((multiplier_a(&params(1.0, 0.0, 1.0), 1.0, &[1.0], &[0.0]) - SQRT_2.exp()).abs() < 1e-12);
        assert!((multiplier_a(&params(1.0, 2.0, 1.0), 0.0, &[0.0], &[1.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sliding_examples() {
        let p = GevreyParams { lambda1: 0.1, delta: 0.5, ..GevreyParams::default() };
        assert!((sliding_z(&p, 0.0) - 0.2).abs() < 1e-15);
        assert!((sliding_z(&p, 1e12) - 0.1).abs() < 1e-6);
        let p = GevreyParams { lambda1: 0.1, delta: 1.0, ..GevreyParams::default() };
        assert!((sliding_z(&p, 3f64.sqrt()) - 0.15).abs() < 1e-15);
        assert!(sliding_z(&p, 2.0) < sliding_z(&p, 1.0));
    }

    #[test]
    fn generator_f_examples() {
        let p = params(1.0, 0.0, 0.7);
        let c = Complex64::new(0.3, -0.4);
        let one: &[i64] = &[1];
        let two: &[i64] = &[2];
        assert!((generator_f(&p, [(one, c)], 0.0, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(generator_f(&p, [(one, Complex64::new(0.0, 0.0))], 0.0, 0.0), 0.0);
        let p = params(1.0, 0.0, 1.0);
        let v = generator_f(&p, [(one, Complex64::new(1.0, 0.0)), (two, Complex64::new(1.0, 0.0))], 3.0, 0.0);
        assert!((v - 1.0).abs() < 1e-15);
        let zero: &[i64] = &[0];
        assert_eq!(generator_f(&p, [(zero, Complex64::new(5.0, 0.0))], 0.0, 0.0), 0.0);
    }

    #[test]
    fn torus_norm_examples() {
        let one: &[i64] = &[1];
        let p = params(1.0, 0.0, 1.0);
        assert_eq!(gevrey_norm_torus(&p, std::iter::empty(), 0.5), 0.0);
        assert!((gevrey_norm_torus(&p, [(one, Complex64::new(1.0, 0.0))], 0.0) - 1.0).abs() < 1e-15);
        assert!((gevrey_norm_torus(&p, [(one, Complex64::new(1.0, 0.0))], 1.0) - SQRT_2.exp()).abs() < 1e-12);
    }

    #[test]
    fn generator_g_delta_and_monotone() {
        let xi: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let mut row = vec![Complex64::new(0.0, 0.0); 41];
        row[20] = Complex64::new(3.0, 0.0);
        let p = params(1.0, 0.0, 1.0);
        let g0 = generator_g(&p, 0, &[(0, &row)], &xi, 0.0).unwrap();
        assert!((g0 - 9.0 * 0.1).abs() < 1e-12);
        // Brute force for j = 1: the centered stencil hits the delta at offsets ±1, ±2.
        let h: f64 = 0.1;
        let c = 3.0 / (12.0 * h);
        let brute = 9.0 * h + 2.0 * ((8.0 * c).powi(2) + c * c) * h;
        let g1 = generator_g(&p, 1, &[(0, &row)], &xi, 0.0).unwrap();
        assert!((g1 - brute).abs() < 1e-9 * brute, "{g1} {brute}");
        let zero = vec![Complex64::new(0.0, 0.0); 41];
        assert_eq!(generator_g(&p, 1, &[(1, &zero)], &xi, 0.3).unwrap(), 0.0);
        let smooth: Vec<Complex64> = xi.iter().map(|x| Complex64::new((-x * x).exp(), x.sin())).collect();
        let mut last = 0.0;
        for z in [0.0, 0.1, 0.2, 0.5] {
            let g = generator_g(&p, 1, &[(1, &smooth), (-1, &smooth)], &xi, z).unwrap();
            assert!(g >= last);
            last = g;
        }
        assert!(generator_g(&p, 1, &[(1, &smooth[..4])], &xi[..4], 0.0).is_err());
    }

    #[test]
    fn derivative_is_fourth_order() {
        let err = |n: usize| {
            let h = 2.0 / n as f64;
            let xs: Vec<f64> = (0..=n).map(|i| -1.0 + h * i as f64).collect();
            let f: Vec<Complex64> = xs.iter().map(|x| Complex64::new(x.sin(), 0.0)).collect();
            let d = derivative4(&f, h).unwrap();
            xs.iter().zip(&d).map(|(x, v)| (v.re - x.cos()).abs()).fold(0.0, f64::max)
        };
        let r = err(40) / err(80);
        assert!(r > 12.0, "{r}");
    }

    #[test]
    fn validation() {
        assert!(GevreyParams::default().validate().is_ok());
        let bad = GevreyParams { gamma: 1.0, lambda0: 1.0, lambda1: 0.25, theta0: 0.4, alpha: 0.2, ..GevreyParams::default() };
        match bad.validate() {
            Err(Error::Config(e)) => assert_eq!(e.len(), 2, "{e:?}"),
            other => panic!("{other:?}"),
        }
        let t = GevreyParams::default().theorem_admissibility(0.5, 0.75);
        assert!(t.gamma_ok && t.sigma_ok);
        assert!((t.sigma_min - 4.0).abs() < 1e-15);
    }

    #[test]
    fn inequality_suite() {
        for r in [check_triangle(2000, 1), check_ratio(2000, 2), check_algebra(2000, 3), check_tool_sharp(2000, 4)] {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn stated_peak_bound_fails_off_b2_equal_one() {
        // b₁ = 1, b₂ = 2, c = 1: the maximum e^{-1/2}/√2 ≈ 0.429 exceeds e^{-1}.
        let y = 0.5f64.sqrt();
        assert!(y * (-y * y).exp() > (-1.0f64).exp());
        assert!(check_tool(10_000, 5).violations > 0);
    }
}
