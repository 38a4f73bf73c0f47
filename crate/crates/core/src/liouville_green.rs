//! Liouville–Green approximation of `w'' + a w = 0` with its variation error
//! budget, a reference integrator and variation of parameters.
//!
//! The reference fundamental pair is matched to the approximations at the
//! left endpoint `b`: `w₁(b) = 0, w₁'(b) = a(b)^{1/4}` and
//! `w₂(b) = a(b)^{-1/4}, w₂'(b) = (a^{-1/4})'(b)`, which fixes `W = -1`.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::ode::{dopri5, rk4_step, Tolerance};
use crate::quad;
use crate::ScaleFactorModel;

/// A positive coefficient with two derivatives.
pub trait Coefficient: Sync {
    fn a(&self, x: f64) -> f64;

    /// `(a, a', a'')`; centered differences with relative step 1e-4 unless
    /// overridden.
    fn derivs(&self, x: f64) -> (f64, f64, f64) {
        let h = 1e-4 * x.abs().max(1.0);
        let (m, c, p) = (self.a(x - h), self.a(x), self.a(x + h));
        (c, (p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantCoefficient(pub f64);

impl Coefficient for ConstantCoefficient {
    fn a(&self, _x: f64) -> f64 {
        self.0
    }
    fn derivs(&self, _x: f64) -> (f64, f64, f64) {
        (self.0, 0.0, 0.0)
    }
}

/// `scale · (a∘T)(τ)^power`, differentiated in closed form.
#[derive(Clone, Copy, Debug)]
pub struct ComposedFactor {
    pub model: ScaleFactorModel,
    pub scale: f64,
    pub power: f64,
}

impl ComposedFactor {
    pub fn new(model: ScaleFactorModel, scale: f64) -> Self {
        ComposedFactor { model, scale, power: 1.0 }
    }
}

impl Coefficient for ComposedFactor {
    fn a(&self, x: f64) -> f64 {
        self.derivs(x).0
    }
    fn derivs(&self, x: f64) -> (f64, f64, f64) {
        let (a, da, dda) = self.model.a_at_tau_derivs(x);
        let p = self.power;
        let (b, db, ddb) = if p == 1.0 {
            (a, da, dda)
        } else {
            let ap = a.powf(p);
            (ap, p * ap / a * da, p * (p - 1.0) * ap / (a * a) * da * da + p * ap / a * dda)
        };
        (self.scale * b, self.scale * db, self.scale * ddb)
    }
}

/// Any positive closure; derivatives by finite differences.
pub struct FnCoefficient<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> Coefficient for FnCoefficient<F> {
    fn a(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

pub struct LGBasis<C> {
    pub coef: C,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LgBudget {
    pub variation: f64,
    pub bound: f64,
}

impl<C: Coefficient> LGBasis<C> {
    pub fn new(coef: C, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() {
            return domain(format!("interval [{lo}, {hi}] is empty"));
        }
        let basis = LGBasis { coef, lo, hi };
        let n = 64;
        for i in 0..=n {
            let x = if hi.is_finite() { lo + (hi - lo) * i as f64 / n as f64 } else { lo + i as f64 };
            let a = basis.coef.a(x);
            if !(a > 0.0) {
                return domain(format!("coefficient a({x}) = {a} is not positive"));
            }
        }
        Ok(basis)
    }

    fn check(&self, x: f64) -> Result<()> {
        if !(x >= self.lo && x <= self.hi) {
            return domain(format!("x = {x} outside [{}, {}]", self.lo, self.hi));
        }
        Ok(())
    }

    /// `ξ(x) = ∫_b^x a^{1/2}`.
    pub fn phase(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(quad::integrate(|y| self.coef.a(y).sqrt(), self.lo, x, 1e-14, 1e-13).value)
    }

    /// Phases at nondecreasing `nodes`, accumulated interval by interval.
    pub fn phases(&self, nodes: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(nodes.len());
        let mut acc = match nodes.first() {
            Some(&x) => self.phase(x)?,
            None => return Ok(out),
        };
        out.push(acc);
        for w in nodes.windows(2) {
            self.check(w[1])?;
            acc += quad::integrate(|y| self.coef.a(y).sqrt(), w[0], w[1], 1e-15, 1e-13).value;
            out.push(acc);
        }
        Ok(out)
    }

    /// Leading-order pair `(a^{-1/4} sin ξ, a^{-1/4} cos ξ)`.
    pub fn lg_fundamental(&self, x: f64) -> Result<(f64, f64)> {
        let xi = self.phase(x)?;
        let amp = self.coef.a(x).powf(-0.25);
        Ok((amp * xi.sin(), amp * xi.cos()))
    }

    /// `a^{-1/4} |(a^{-1/4})''|`.
    pub fn variation_integrand(&self, x: f64) -> f64 {
        let (a, da, dda) = self.coef.derivs(x);
        let g2 = -0.25 * a.powf(-1.25) * dda + (5.0 / 16.0) * a.powf(-2.25) * da * da;
        a.powf(-0.25) * g2.abs()
    }

    /// `V = ∫_b^x a^{-1/4}|(a^{-1/4})''|` and the bound `exp(V) - 1`.
    pub fn lg_error_budget(&self, x: f64) -> Result<LgBudget> {
        self.check(x)?;
        let v = quad::integrate(|y| self.variation_integrand(y), self.lo, x, 1e-16, 1e-12).value;
        Ok(LgBudget { variation: v, bound: v.exp_m1() })
    }

    /// Budgets at nondecreasing `nodes`, accumulated interval by interval.
    pub fn budgets(&self, nodes: &[f64]) -> Result<Vec<LgBudget>> {
        let mut out = Vec::with_capacity(nodes.len());
        let mut v = match nodes.first() {
            Some(&x) => self.lg_error_budget(x)?.variation,
            None => return Ok(out),
        };
        out.push(LgBudget { variation: v, bound: v.exp_m1() });
        for w in nodes.windows(2) {
            self.check(w[1])?;
            v += quad::integrate(|y| self.variation_integrand(y), w[0], w[1], 1e-17, 1e-12).value;
            out.push(LgBudget { variation: v, bound: v.exp_m1() });
        }
        Ok(out)
    }
}

/// Closed form of `∫_{τ̃}^∞ a^{-1/4}|(a^{-1/4})''|` for `a = scale·(a∘T)` with
/// `q < 1/2`: writing `X = (1-2q)τ + t₀^{1-2q}`, `β = q/(1-2q)`, it is
/// `scale^{-1/2} (β/4)(β/4+1)(1-2q) X(τ̃)^{-β/2-1} / (β/2+1)`.
pub fn power_law_variation(model: &ScaleFactorModel, scale: f64, tau_tilde: f64) -> Result<f64> {
    let Some(beta) = model.beta() else {
        return Err(Error::Unsupported("closed-form variation needs q < 1/2".into()));
    };
    if !(scale > 0.0) || !(tau_tilde >= 0.0) {
        return domain(format!("need scale > 0 and tau_tilde >= 0 (got {scale}, {tau_tilde})"));
    }
    let e = 1.0 - 2.0 * model.q();
    let x = e * tau_tilde + model.t0().powf(e);
    Ok(scale.powf(-0.5) * (beta / 4.0) * (beta / 4.0 + 1.0) * e * x.powf(-beta / 2.0 - 1.0) / (beta / 2.0 + 1.0))
}

#[derive(Clone, Copy, Debug)]
pub enum ReferenceMethod {
    Adaptive(Tolerance),
    /// Classical RK4 with `substeps` equal steps per grid interval.
    Rk4 { substeps: usize },
}

impl Default for ReferenceMethod {
    fn default() -> Self {
        ReferenceMethod::Adaptive(Tolerance { rtol: 1e-12, atol: 1e-13 })
    }
}

/// `u'' + a u = q` from `(u, u')(nodes[0]) = v0`; returns `(u, u')` at every
/// node.
pub fn reference_ivp<C: Coefficient, Q: Fn(f64) -> f64>(
    basis: &LGBasis<C>,
    q_source: Q,
    v0: [f64; 2],
    nodes: &[f64],
    method: ReferenceMethod,
) -> Result<Vec<[f64; 2]>> {
    for &x in nodes {
        basis.check(x)?;
    }
    if nodes.windows(2).any(|w| w[1] < w[0]) {
        return domain("nodes must be nondecreasing");
    }
    let rhs = |x: f64, y: &[f64; 2]| [y[1], q_source(x) - basis.coef.a(x) * y[0]];
    match method {
        ReferenceMethod::Adaptive(tol) => dopri5(rhs, nodes, v0, tol),
        ReferenceMethod::Rk4 { substeps } => {
            let m = substeps.max(1);
            let mut y = v0;
            let mut out = Vec::with_capacity(nodes.len());
            if nodes.is_empty() {
                return Ok(out);
            }
            out.push(y);
            for w in nodes.windows(2) {
                let h = (w[1] - w[0]) / m as f64;
                for s in 0..m {
                    y = rk4_step(&rhs, w[0] + s as f64 * h, &y, h);
                }
                out.push(y);
            }
            Ok(out)
        }
    }
}

/// Reference fundamental pair on `nodes` (first node = left endpoint), each
/// sample `(w, w')`.
#[derive(Clone, Debug)]
pub struct FundamentalPair {
    pub nodes: Vec<f64>,
    pub w1: Vec<[f64; 2]>,
    pub w2: Vec<[f64; 2]>,
}

impl FundamentalPair {
    pub fn wronskian_defect(&self) -> f64 {
        self.w1.iter().zip(&self.w2).map(|(a, b)| (a[0] * b[1] - b[0] * a[1] + 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn reference_pair<C: Coefficient>(basis: &LGBasis<C>, nodes: &[f64], method: ReferenceMethod) -> Result<FundamentalPair> {
    let Some(&b) = nodes.first() else {
        return domain("empty node set");
    };
    let (a, da, _) = basis.coef.derivs(b);
    let w1 = reference_ivp(basis, |_| 0.0, [0.0, a.powf(0.25)], nodes, method)?;
    let w2 = reference_ivp(basis, |_| 0.0, [a.powf(-0.25), -0.25 * a.powf(-1.25) * da], nodes, method)?;
    Ok(FundamentalPair { nodes: nodes.to_vec(), w1, w2 })
}

/// `max |w₁ w₂' - w₂ w₁' + 1|` over `nodes` for pairs given with derivatives.
pub fn wronskian_defect<F1, F2>(w1: F1, w2: F2, nodes: &[f64]) -> f64
where
    F1: Fn(f64) -> [f64; 2],
    F2: Fn(f64) -> [f64; 2],
{
    nodes
        .iter()
        .map(|&x| {
            let (a, b) = (w1(x), w2(x));
            (a[0] * b[1] - b[0] * a[1] + 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// `u(x) = -∫_b^x [w₁(y)w₂(x) - w₂(y)w₁(x)] q(y) dy` (a pair with `W = -1`),
/// with cumulative trapezoidal integrals over `nodes`.
pub fn inhomogeneous_vp<Q: Fn(f64) -> f64>(w1: &[f64], w2: &[f64], q_source: Q, nodes: &[f64]) -> Result<Vec<f64>> {
    if w1.len() != nodes.len() || w2.len() != nodes.len() {
        return Err(Error::GridMismatch(format!(
            "pair lengths {}, {} for {} nodes",
            w1.len(),
            w2.len(),
            nodes.len()
        )));
    }
    let q: Vec<f64> = nodes.iter().map(|&x| q_source(x)).collect();
    let (mut i1, mut i2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() {
        if i > 0 {
            let h = nodes[i] - nodes[i - 1];
            i1 += 0.5 * h * (w1[i - 1] * q[i - 1] + w1[i] * q[i]);
            i2 += 0.5 * h * (w2[i - 1] * q[i - 1] + w2[i] * q[i]);
        }
        out.push(w1[i] * i2 - w2[i] * i1);
    }
    Ok(out)
}

/// One node of the budget check: `defect = |a^{1/4} w_reference - sin ξ|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LgRow {
    pub x: f64,
    pub w_reference: f64,
    pub w_lg: f64,
    pub budget: f64,
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LgVerification {
    pub rows: Vec<LgRow>,
    /// Nodes where the defect exceeds the budget.
    pub violations: usize,
    pub max_defect: f64,
    pub final_variation: f64,
    pub wronskian_defect: f64,
    /// `max |w| a^{1/4}` over both reference solutions.
    pub envelope_constant: f64,
}

const REFERENCE_SLACK: f64 = 1e-9;

/// Compares the matched reference `w₁` with `a^{-1/4} sin ξ` at every node.
pub fn lg_verify<C: Coefficient>(basis: &LGBasis<C>, nodes: &[f64], method: ReferenceMethod) -> Result<LgVerification> {
    let pair = reference_pair(basis, nodes, method)?;
    let xi = basis.phases(nodes)?;
    let budgets = basis.budgets(nodes)?;
    let mut rows = Vec::with_capacity(nodes.len());
    let mut violations = 0;
    let mut max_defect: f64 = 0.0;
    let mut envelope: f64 = 0.0;
    for i in 0..nodes.len() {
        let quarter = basis.coef.a(nodes[i]).powf(0.25);
        let w = pair.w1[i][0];
        let defect = (quarter * w - xi[i].sin()).abs();
        // Allowance for the reference integrator's own error; where the budget
        // vanishes (constant a, left endpoint) the defect is pure solver error.
        if defect > budgets[i].bound + REFERENCE_SLACK {
            violations += 1;
        }
        max_defect = max_defect.max(defect);
        envelope = envelope.max(quarter * w.abs()).max(quarter * pair.w2[i][0].abs());
        rows.push(LgRow { x: nodes[i], w_reference: w, w_lg: xi[i].sin() / quarter, budget: budgets[i].bound, defect });
    }
    Ok(LgVerification {
        rows,
        violations,
        max_defect,
        final_variation: budgets.last().map_or(0.0, |b| b.variation),
        wronskian_defect: pair.wronskian_defect(),
        envelope_constant: envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    }

    fn q14() -> ScaleFactorModel {
        ScaleFactorModel::power_law(0.25, 1.0).unwrap()
    }

    #[test]
    fn constant_coefficient_is_exact() {
        let b = LGBasis::new(ConstantCoefficient(1.0), 0.0, 10.0).unwrap();
        let (s, c) = b.lg_fundamental(PI / 2.0).unwrap();
        assert!((s - 1.0).abs() < 1e-13 && c.abs() < 1e-13);
        let w = 3.0;
        let b = LGBasis::new(ConstantCoefficient(w * w), 0.0, 10.0).unwrap();
        let (s, c) = b.lg_fundamental(0.7).unwrap();
        assert!((s - (w * 0.7).sin() / w.sqrt()).abs() < 1e-13 && (c - (w * 0.7).cos() / w.sqrt()).abs() < 1e-13);
        assert_eq!(b.lg_error_budget(5.0).unwrap(), LgBudget { variation: 0.0, bound: 0.0 });
        assert!(b.lg_fundamental(11.0).is_err());
    }

    #[test]
    fn reference_examples() {
        let one = LGBasis::new(ConstantCoefficient(1.0), 0.0, 20.0).unwrap();
        let nodes = grid(0.0, 20.0, 200);
        let u = reference_ivp(&one, |_| 0.0, [0.0, 1.0], &nodes, ReferenceMethod::default()).unwrap();
        for (x, y) in nodes.iter().zip(&u) {
            assert!((y[0] - x.sin()).abs() < 1e-9);
        }
        let u = reference_ivp(&one, |_| 1.0, [0.0, 0.0], &[0.0, PI], ReferenceMethod::default()).unwrap();
        assert!((u[1][0] - 2.0).abs() < 1e-9);
        let four = LGBasis::new(ConstantCoefficient(4.0), 0.0, 1.0).unwrap();
        let u = reference_ivp(&four, |_| 0.0, [1.0, 0.0], &[0.0, PI / 4.0], ReferenceMethod::default()).unwrap();
        assert!(u[1][0].abs() < 1e-9);
    }

    #[test]
    fn rk4_reference_order() {
        let one = LGBasis::new(ConstantCoefficient(1.0), 0.0, 20.0).unwrap();
        let err = |n: usize| {
            let nodes = grid(0.0, 20.0, n);
            let u = reference_ivp(&one, |_| 0.0, [0.0, 1.0], &nodes, ReferenceMethod::Rk4 { substeps: 1 }).unwrap();
            nodes.iter().zip(&u).map(|(x, y)| (y[0] - x.sin()).abs()).fold(0.0, f64::max)
        };
        assert!(err(200) / err(400) >= 8.0);
    }

    #[test]
    fn wronskian_closed_forms() {
        let nodes = grid(0.0, 10.0, 100);
        let d = wronskian_defect(|x| [x.sin(), x.cos()], |x| [x.cos(), -x.sin()], &nodes);
        assert!(d <= 1e-12);
        let w: f64 = 2.5;
        let r = w.sqrt();
        let d = wronskian_defect(|x| [(w * x).sin() / r, r * (w * x).cos()], |x| [(w * x).cos() / r, -r * (w * x).sin()], &nodes);
        assert!(d <= 1e-10);
    }

    #[test]
    fn power_law_pair_and_budget() {
        let coef = ComposedFactor::new(q14(), 4.0 * PI);
        let b = LGBasis::new(coef, 0.0, 30.0).unwrap();
        let nodes = grid(0.0, 30.0, 600);
        let v = lg_verify(&b, &nodes, ReferenceMethod::default()).unwrap();
        assert_eq!(v.violations, 0, "max defect {}", v.max_defect);
        assert!(v.wronskian_defect <= 1e-8, "{}", v.wronskian_defect);
        assert!(v.max_defect > 0.0);
    }

    #[test]
    fn variation_closed_form() {
        let b = LGBasis::new(ComposedFactor::new(q14(), 1.0), 0.0, f64::INFINITY).unwrap();
        let v = power_law_variation(&q14(), 1.0, 0.0).unwrap();
        assert!((v - 9.0 / 160.0).abs() < 1e-15);
        let big = b.lg_error_budget(1e6).unwrap().variation;
        let tail = power_law_variation(&q14(), 1.0, 1e6).unwrap();
        assert!((big + tail - v).abs() < 1e-9, "{big} {tail}");
        let s = power_law_variation(&q14(), 4.0 * PI, 0.0).unwrap();
        assert!((s - v / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert!(b.lg_error_budget(0.0).unwrap().variation == 0.0);
        let fd = LGBasis::new(FnCoefficient(|x: f64| q14().a_at_tau(x).unwrap()), 1.0, 50.0).unwrap();
        let closed = LGBasis::new(ComposedFactor::new(q14(), 1.0), 1.0, 50.0).unwrap();
        let (x, y) = (fd.lg_error_budget(50.0).unwrap().variation, closed.lg_error_budget(50.0).unwrap().variation);
        assert!((x - y).abs() / y < 1e-5, "{x} {y}");
    }

    #[test]
    fn variation_of_parameters() {
        let nodes = grid(0.0, PI, 3142);
        let s: Vec<f64> = nodes.iter().map(|x| x.sin()).collect();
        let c: Vec<f64> = nodes.iter().map(|x| x.cos()).collect();
        let u = inhomogeneous_vp(&s, &c, |_| 1.0, &nodes).unwrap();
        assert!((u.last().unwrap() - 2.0).abs() < 1e-6);
        assert!(inhomogeneous_vp(&s, &c, |_| 0.0, &nodes).unwrap().iter().all(|v| *v == 0.0));
        assert!(inhomogeneous_vp(&s[1..], &c, |_| 0.0, &nodes).is_err());
    }

    #[test]
    fn vp_matches_reference_on_resolvent_oscillator() {
        let model = q14();
        let b = LGBasis::new(ComposedFactor::new(model, 4.0 * PI), 0.0, 10.0).unwrap();
        let nodes = grid(0.0, 10.0, 20000);
        let pair = reference_pair(&b, &nodes, ReferenceMethod::default()).unwrap();
        let a0 = model.a_at_tau(0.0).unwrap();
        let q = |x: f64| -16.0 * PI * PI * model.a_at_tau(x).unwrap() * a0 * x;
        let w1: Vec<f64> = pair.w1.iter().map(|w| w[0]).collect();
        let w2: Vec<f64> = pair.w2.iter().map(|w| w[0]).collect();
        let u = inhomogeneous_vp(&w1, &w2, q, &nodes).unwrap();
        let r = reference_ivp(&b, q, [0.0, 0.0], &nodes, ReferenceMethod::default()).unwrap();
        let scale = r.iter().fold(0.0f64, |m, y| m.max(y[0].abs()));
        let d = u.iter().zip(&r).fold(0.0f64, |m, (a, y)| m.max((a - y[0]).abs()));
        assert!(d / scale < 1e-6, "{} (scale {scale})", d / scale);
    }

    #[test]
    fn rejects_nonpositive_coefficient() {
        assert!(LGBasis::new(FnCoefficient(|x: f64| 1.0 - x), 0.0, 2.0).is_err());
    }
}
