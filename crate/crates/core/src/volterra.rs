//! Volterra equations of the second kind on a uniform τ grid.
//!
//! Everything marches the product-trapezoidal rule
//! `φᵢ = sᵢ + Δτ(½K(τᵢ,τ₀)φ₀ + Σ_{0<j<i} K(τᵢ,τⱼ)φⱼ + ½K(τᵢ,τᵢ)φᵢ)`,
//! which is second order for smooth kernels. A full resolvent table costs
//! O(n³); a single column costs O(n²).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{Equilibrium, Kernel, ModeKernel};
use crate::error::{domain, Error, Result};
use crate::fit::{line_fit, LineFit};
use crate::ode::rk4_step;
use crate::ScaleFactorModel;

/// Tables up to this size precompute the kernel matrix (n²/2 doubles).
const DENSE_KERNEL_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub tau_max: f64,
    pub n: usize,
    pub step: f64,
}

impl TauGrid {
    pub fn new(tau_max: f64, n: usize) -> Result<Self> {
        if !(tau_max > 0.0 && tau_max.is_finite()) || n == 0 {
            return domain(format!("grid needs tau_max > 0 and n >= 1 (got {tau_max}, {n})"));
        }
        Ok(TauGrid { tau_max, n, step: tau_max / n as f64 })
    }

    /// Grid with step as close to `step` as an integer interval count allows.
    pub fn with_step(tau_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return domain(format!("step must be positive, got {step}"));
        }
        Self::new(tau_max, (tau_max / step).round().max(1.0) as usize)
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Marches from node `j0`; `source[i - j0]` is the source at node `i` and the
/// result is indexed the same way.
fn march<K: FnMut(usize, usize) -> f64>(mut k_at: K, h: f64, j0: usize, n: usize, source: &[f64]) -> Result<Vec<f64>> {
    let mut phi = Vec::with_capacity(n + 1 - j0);
    phi.push(source[0]);
    for i in j0 + 1..=n {
        let mut acc = 0.5 * k_at(i, j0) * phi[0];
        for j in j0 + 1..i {
            acc += k_at(i, j) * phi[j - j0];
        }
        let denom = 1.0 - 0.5 * h * k_at(i, i);
        if denom.abs() < 1e-12 {
            return Err(Error::SingularStep { index: i, denominator: denom });
        }
        phi.push((source[i - j0] + h * acc) / denom);
    }
    Ok(phi)
}

pub fn solve_volterra<K: Kernel, S: Fn(f64) -> f64>(kernel: &K, source: S, grid: &TauGrid) -> Result<Vec<f64>> {
    let s: Vec<f64> = grid.nodes().into_iter().map(source).collect();
    solve_volterra_sampled(kernel, &s, grid)
}

pub fn solve_volterra_sampled<K: Kernel>(kernel: &K, source: &[f64], grid: &TauGrid) -> Result<Vec<f64>> {
    check_len(source.len(), grid)?;
    let h = grid.step;
    march(|i, j| kernel.eval(grid.node(i), grid.node(j)), h, 0, grid.n, source)
}

/// Real kernel, complex source: the two parts decouple.
pub fn solve_volterra_complex<K: Kernel>(kernel: &K, source: &[Complex64], grid: &TauGrid) -> Result<Vec<Complex64>> {
    let re: Vec<f64> = source.iter().map(|z| z.re).collect();
    let im: Vec<f64> = source.iter().map(|z| z.im).collect();
    let (re, im) = rayon::join(|| solve_volterra_sampled(kernel, &re, grid), || solve_volterra_sampled(kernel, &im, grid));
    Ok(re?.into_iter().zip(im?).map(|(a, b)| Complex64::new(a, b)).collect())
}

fn check_len(len: usize, grid: &TauGrid) -> Result<()> {
    if len != grid.len() {
        return Err(Error::GridMismatch(format!("{len} samples for a grid of {} nodes", grid.len())));
    }
    Ok(())
}

/// `R(τᵢ, τⱼ)` for `i = j..=n`.
pub fn resolvent_column<K: Kernel>(kernel: &K, grid: &TauGrid, j: usize) -> Result<Vec<f64>> {
    if j > grid.n {
        return domain(format!("column {j} outside grid of {} intervals", grid.n));
    }
    let tj = grid.node(j);
    let source: Vec<f64> = (j..=grid.n).map(|i| kernel.eval(grid.node(i), tj)).collect();
    march(|i, l| kernel.eval(grid.node(i), grid.node(l)), grid.step, j, grid.n, &source)
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

/// Lower-triangular samples `R[i][j] ≈ R(τᵢ, τⱼ)`, `i ≥ j`; zero above.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventTable {
    pub grid: TauGrid,
    values: Vec<f64>,
}

impl ResolventTable {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.values[tri(i, j)]
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (j..=self.grid.n).map(|i| self.get(i, j)).collect()
    }

    /// `(τ, τ̃, R)` for every stored entry, column-major.
    pub fn entries(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let g = self.grid;
        (0..=g.n).flat_map(move |j| (j..=g.n).map(move |i| (g.node(i), g.node(j), self.get(i, j))))
    }
}

/// All columns, computed in parallel.
pub fn resolvent_table<K: Kernel>(kernel: &K, grid: &TauGrid) -> Result<ResolventTable> {
    let n = grid.n;
    let dense: Option<Vec<f64>> = (n < DENSE_KERNEL_LIMIT).then(|| {
        (0..=n)
            .into_par_iter()
            .flat_map_iter(|i| (0..=i).map(move |j| kernel.eval(grid.node(i), grid.node(j))))
            .collect()
    });
    let columns: Vec<Vec<f64>> = (0..=n)
        .into_par_iter()
        .map(|j| match &dense {
            Some(k) => {
                let source: Vec<f64> = (j..=n).map(|i| k[tri(i, j)]).collect();
                march(|i, l| k[tri(i, l)], grid.step, j, n, &source)
            }
            None => resolvent_column(kernel, grid, j),
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; tri(n, n) + 1];
    for (j, col) in columns.iter().enumerate() {
        for (off, v) in col.iter().enumerate() {
            values[tri(j + off, j)] = *v;
        }
    }
    Ok(ResolventTable { grid: *grid, values })
}

/// `-2√π e^{-θ₀|k|s} sin(2√π s)`: the repulsive Poisson resolvent for `a ≡ 1`.
pub fn closed_form_resolvent_q0(theta0: f64, k_abs: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let w = 2.0 * PI.sqrt();
    -w * (-theta0 * k_abs * s).exp() * (w * s).sin()
}

/// Resolvent column `j` from the oscillator satisfied by
/// `u = e^{θ₀|k|s}(K - R)`, `s = τ - τ̃`:
/// `u'' - 4πε_F a^p u = -16π² a(τ)^p a(τ̃)^p s`, `u(τ̃) = u'(τ̃) = 0`,
/// integrated by RK4 at a quarter of the grid step.
pub fn resolvent_via_ode(kernel: &ModeKernel, grid: &TauGrid, j: usize) -> Result<Vec<f64>> {
    let theta0 = match kernel.eq {
        Equilibrium::Poisson { theta0, .. } => theta0,
        Equilibrium::Maxwellian { .. } => {
            return Err(Error::Unsupported("the oscillator route needs a Poisson background".into()))
        }
    };
    if j > grid.n {
        return domain(format!("column {j} outside grid of {} intervals", grid.n));
    }
    let model = kernel.model;
    let p = kernel.dim_power;
    let eps = kernel.sign.eps_f();
    let rate = theta0 * kernel.k_abs;
    let tt = grid.node(j);
    let a_p = |tau: f64| model.a_at_tau_unchecked(tau).powf(p);
    let a_tt = a_p(tt);
    let rhs = |tau: f64, y: &[f64; 2]| {
        let ap = a_p(tau);
        [y[1], 4.0 * PI * eps * ap * y[0] - 16.0 * PI * PI * ap * a_tt * (tau - tt)]
    };
    let sub = 4;
    let h = grid.step / sub as f64;
    let mut y = [0.0, 0.0];
    let mut out = Vec::with_capacity(grid.n + 1 - j);
    out.push(0.0);
    for i in j..grid.n {
        let t0 = grid.node(i);
        for m in 0..sub {
            y = rk4_step(&rhs, t0 + m as f64 * h, &y, h);
        }
        let tau = grid.node(i + 1);
        out.push(kernel.eval(tau, tt) - (-rate * (tau - tt)).exp() * y[0]);
    }
    Ok(out)
}

/// `φ(τᵢ) = s(τᵢ) + ∫₀^τᵢ R(τᵢ,τ̃) s(τ̃) dτ̃` by the trapezoidal rule, with the
/// resolvent given as a two-time function.
pub fn apply_resolvent_with<R: Kernel>(resolvent: &R, source: &[f64], grid: &TauGrid) -> Result<Vec<f64>> {
    check_len(source.len(), grid)?;
    apply(|i, j| resolvent.eval(grid.node(i), grid.node(j)), source, grid)
}

pub fn apply_resolvent(table: &ResolventTable, source: &[f64]) -> Result<Vec<f64>> {
    check_len(source.len(), &table.grid)?;
    apply(|i, j| table.get(i, j), source, &table.grid)
}

fn apply<R: Fn(usize, usize) -> f64 + Sync>(r: R, source: &[f64], grid: &TauGrid) -> Result<Vec<f64>> {
    let h = grid.step;
    Ok((0..=grid.n)
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return source[0];
            }
            let mut acc = 0.5 * (r(i, 0) * source[0] + r(i, i) * source[i]);
            for (j, &s) in source.iter().enumerate().take(i).skip(1) {
                acc += r(i, j) * s;
            }
            source[i] + h * acc
        })
        .collect())
}

/// Fitted constants of the resolvent envelope
/// `e^{-θ₀|k|s} a(T(τ̃)) a(T(τ))^{1/2}` times `s + s²` and times `s²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventBound {
    pub c_linear_quadratic: f64,
    /// Off-diagonal only; grows like `1/s` near the diagonal.
    pub c_quadratic: f64,
    /// `(τ, τ̃)` where the `s + s²` constant is attained.
    pub argmax: (f64, f64),
}

pub fn check_resolvent_bound(table: &ResolventTable, model: &ScaleFactorModel, theta0: f64, k_abs: f64) -> ResolventBound {
    let g = table.grid;
    let a: Vec<f64> = g.nodes().iter().map(|&t| model.a_at_tau_unchecked(t)).collect();
    let (lq, quad, argmax) = (0..=g.n)
        .into_par_iter()
        .map(|j| {
            let mut best = (0.0f64, 0.0f64, (g.node(j), g.node(j)));
            for i in j + 1..=g.n {
                let s = g.node(i) - g.node(j);
                let env = (-theta0 * k_abs * s).exp() * a[j] * a[i].sqrt();
                let r = table.get(i, j).abs();
                let c1 = r / ((s + s * s) * env);
                if c1 > best.0 {
                    best.0 = c1;
                    best.2 = (g.node(i), g.node(j));
                }
                best.1 = best.1.max(r / (s * s * env));
            }
            best
        })
        .reduce(|| (0.0, 0.0, (0.0, 0.0)), |x, y| if x.0 >= y.0 { (x.0, x.1.max(y.1), x.2) } else { (y.0, x.1.max(y.1), y.2) });
    ResolventBound { c_linear_quadratic: lq, c_quadratic: quad, argmax }
}

/// Solves the majorant equation `ũ = y + ∫K ũ` for a nonnegative kernel and
/// source. Any sampled `u ≤ y + ∫K u` then satisfies `u ≤ ũ` up to O(Δτ²).
pub fn comparison_bound<K: Kernel>(kernel_abs: &K, source_abs: &[f64], grid: &TauGrid) -> Result<Vec<f64>> {
    check_len(source_abs.len(), grid)?;
    if let Some((i, y)) = source_abs.iter().enumerate().find(|(_, y)| !(**y >= 0.0)) {
        return domain(format!("source sample {i} is {y}, expected >= 0"));
    }
    let mut negative = None;
    let out = march(
        |i, j| {
            let k = kernel_abs.eval(grid.node(i), grid.node(j));
            if !(k >= 0.0) && negative.is_none() {
                negative = Some((i, j, k));
            }
            k
        },
        grid.step,
        0,
        grid.n,
        source_abs,
    )?;
    if let Some((i, j, k)) = negative {
        return domain(format!("kernel sample ({i}, {j}) is {k}, expected >= 0"));
    }
    // A nonnegative resolvent means the solution dominates its source.
    if let Some(i) = (0..out.len()).find(|&i| out[i] < source_abs[i] * (1.0 - 1e-12)) {
        return domain(format!("majorant fell below its source at node {i}"));
    }
    Ok(out)
}

/// Exponential rate of `|values|` over `s ∈ [s_lo, s_hi]` by a line fit of
/// `ln|value|`; zero samples are skipped.
pub fn fit_growth_rate(s: &[f64], values: &[f64], s_lo: f64, s_hi: f64) -> Option<LineFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = s
        .iter()
        .zip(values)
        .filter(|(x, v)| **x >= s_lo && **x <= s_hi && **v != 0.0 && v.is_finite())
        .map(|(x, v)| (*x, v.abs().ln()))
        .unzip();
    line_fit(&xs, &ys)
}

/// For each column `τ̃`: `sup_s |R(τ̃ + s, τ̃)| e^{θ₁ s} ⟨τ̃⟩^{-β'}`.
pub fn damping_transfer_profile(table: &ResolventTable, theta1: f64, beta_prime: f64) -> Vec<(f64, f64)> {
    let g = table.grid;
    (0..=g.n)
        .map(|j| {
            let tt = g.node(j);
            let sup = (j..=g.n)
                .map(|i| table.get(i, j).abs() * (theta1 * (g.node(i) - tt)).exp())
                .fold(0.0, f64::max);
            (tt, sup * (1.0 + tt * tt).powf(-0.5 * beta_prime))
        })
        .collect()
}
