//! Explicit Runge–Kutta integrators for small first-order systems.

use crate::error::{Error, Result};

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(&[f64; N], f64)]) -> [f64; N] {
    let mut out = *y;
    for (k, c) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One classical fourth-order step.
pub fn rk4_step<const N: usize, F>(f: &F, x: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, &axpy(y, h, &[(&k1, 0.5)]));
    let k3 = f(x + 0.5 * h, &axpy(y, h, &[(&k2, 0.5)]));
    let k4 = f(x + h, &axpy(y, h, &[(&k3, 1.0)]));
    axpy(y, h, &[(&k1, 1.0 / 6.0), (&k2, 1.0 / 3.0), (&k3, 1.0 / 3.0), (&k4, 1.0 / 6.0)])
}

/// Fixed-step RK4 from `x0` over `n_steps` steps of size `h`; returns the
/// state at every step, including the initial one.
pub fn rk4_fixed<const N: usize, F>(f: F, x0: f64, y0: [f64; N], h: f64, n_steps: usize) -> Vec<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut y = y0;
    out.push(y);
    for i in 0..n_steps {
        y = rk4_step(&f, x0 + i as f64 * h, &y, h);
        out.push(y);
    }
    out
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-12, atol: 1e-12 }
    }
}

/// Adaptive Dormand–Prince integration reporting the state at each of
/// `nodes` (which must be nondecreasing, the first being the initial point).
pub fn dopri5<const N: usize, F>(f: F, nodes: &[f64], y0: [f64; N], tol: Tolerance) -> Result<Vec<[f64; N]>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    const MAX_ATTEMPTS: usize = 200_000;
    let mut out = Vec::with_capacity(nodes.len());
    if nodes.is_empty() {
        return Ok(out);
    }
    let mut x = nodes[0];
    let mut y = y0;
    out.push(y);
    let mut h = if nodes.len() > 1 { ((nodes[nodes.len() - 1] - x) * 1e-3).max(1e-6) } else { 1e-3 };
    let mut attempts = 0;
    let mut k1 = f(x, &y);
    for &target in &nodes[1..] {
        while x < target {
            attempts += 1;
            if attempts > MAX_ATTEMPTS || !h.is_finite() || h < 1e-14 * x.abs().max(1.0) {
                return Err(Error::StepControl { x, step: h, attempts });
            }
            let last = x + h >= target;
            let step = if last { target - x } else { h };
            let k2 = f(x + C2 * step, &axpy(&y, step, &[(&k1, A21)]));
            let k3 = f(x + C3 * step, &axpy(&y, step, &[(&k1, A31), (&k2, A32)]));
            let k4 = f(x + C4 * step, &axpy(&y, step, &[(&k1, A41), (&k2, A42), (&k3, A43)]));
            let k5 = f(x + C5 * step, &axpy(&y, step, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]));
            let k6 = f(
                x + step,
                &axpy(&y, step, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]),
            );
            let y_new = axpy(&y, step, &[(&k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
            let k7 = f(x + step, &y_new);
            let mut err: f64 = 0.0;
            for i in 0..N {
                let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() {
                return Err(Error::StepControl { x, step, attempts });
            }
            if err <= 1.0 {
                x = if last { target } else { x + step };
                y = y_new;
                k1 = k7;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // Only grow h from a full step; a clipped final step says nothing about it.
            if err > 1.0 || !last {
                h = step * factor;
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_fourth_order() {
        let f = |_x: f64, y: &[f64; 2]| [y[1], -y[0]];
        let err = |n: usize| {
            let h = std::f64::consts::PI / n as f64;
            let ys = rk4_fixed(f, 0.0, [0.0, 1.0], h, n);
            ys[n][0].abs()
        };
        let ratio = err(40) / err(80);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn dopri_sine() {
        let nodes: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
        let ys = dopri5(|_x, y: &[f64; 2]| [y[1], -y[0]], &nodes, [0.0, 1.0], Tolerance::default()).unwrap();
        for (x, y) in nodes.iter().zip(&ys) {
            assert!((y[0] - x.sin()).abs() < 1e-9);
        }
    }
}
