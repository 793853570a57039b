//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

/// Adaptive double-exponential quadrature over panels no wider than one unit,
/// split at the given interior points.
pub fn de(f: impl Fn(f64) -> f64, pts: &[f64]) -> f64 {
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let n = (b - a).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        for k in 0..n {
            let lo = a + h * k as f64;
            let hi = if k + 1 == n { b } else { lo + h };
            acc += quadrature::integrate(&f, lo, hi, 1e-15).integral;
        }
    }
    acc
}

/// Sorted breakpoints `lo = p_0 < ... < hi` from arbitrary interior candidates.
pub fn breaks(lo: f64, hi: f64, interior: &[f64]) -> Vec<f64> {
    let mut v = vec![lo, hi];
    v.extend(interior.iter().copied().filter(|&x| x > lo && x < hi));
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Composite 20-point Gauss-Legendre rule on `[pts[0], pts.last()]` with
/// panels no wider than `h` that never straddle a breakpoint.
pub struct Composite {
    rule: Vec<(f64, f64)>,
}

impl Composite {
    pub fn new() -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(20).unwrap());
        Composite { rule: gl.iter().map(|(x, w)| (*x, *w)).collect() }
    }

    pub fn nodes(&self, pts: &[f64], h: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let n = ((b - a) / h).ceil().max(1.0) as usize;
            let step = (b - a) / n as f64;
            for k in 0..n {
                let lo = a + step * k as f64;
                let half = 0.5 * step;
                for &(x, wt) in &self.rule {
                    out.push((lo + half * (x + 1.0), half * wt));
                }
            }
        }
        out
    }
}

/// Horizon `T` with `e^{-βT} <= 1e-13`.
pub fn horizon(beta: f64) -> f64 {
    30.0 / beta
}

/// Piecewise-constant input with the given breakpoints and values.
pub fn pwc_at(bp: &[f64], xi: &[f64], t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    for i in 0..xi.len() {
        if t >= bp[i] && t < bp[i + 1] {
            return xi[i];
        }
    }
    0.0
}

/// `|a - b| <= tol · max(|b|, floor)`.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(floor)
}

/// Direct convolution `y_t = Σ_k g_k u_{t-k}`.
pub fn convolve(g: &[f64], u: &[f64]) -> Vec<f64> {
    (0..u.len()).map(|t| (0..=t).map(|k| g.get(k).copied().unwrap_or(0.0) * u[t - k]).sum()).collect()
}

/// Classical fourth-order Runge-Kutta for `x' = A x + b u`, `y = c x + d u`,
/// with `u` constant on each step. Returns `y` at the requested times.
pub fn rk4(
    a: &[Vec<f64>],
    b: &[f64],
    c: &[f64],
    d: f64,
    u: impl Fn(f64) -> f64,
    times: &[f64],
    steps_per_unit: usize,
    breakpoints: &[f64],
) -> Vec<f64> {
    let n = b.len();
    let deriv = |x: &[f64], uv: f64| -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|j| a[i][j] * x[j]).sum::<f64>() + b[i] * uv).collect()
    };
    let mut x = vec![0.0; n];
    let mut t = 0.0;
    let mut out = Vec::new();
    for &target in times {
        let mut marks: Vec<f64> = breakpoints.iter().copied().filter(|&s| s > t && s < target).collect();
        marks.push(target);
        for m in marks {
            let span = m - t;
            if span <= 0.0 {
                continue;
            }
            let k = ((span * steps_per_unit as f64).ceil() as usize).max(1);
            let h = span / k as f64;
            let uv = u(0.5 * (t + m));
            for _ in 0..k {
                let k1 = deriv(&x, uv);
                let x2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
                let k2 = deriv(&x2, uv);
                let x3: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k2[i]).collect();
                let k3 = deriv(&x3, uv);
                let x4: Vec<f64> = (0..n).map(|i| x[i] + h * k3[i]).collect();
                let k4 = deriv(&x4, uv);
                for i in 0..n {
                    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            t = m;
        }
        out.push((0..n).map(|i| c[i] * x[i]).sum::<f64>() + d * u(target));
    }
    out
}

// --------------------------------------------------------- continuous oracles

fn k_ct(beta: f64, s: f64, t: f64) -> f64 {
    (-beta * s.max(t)).exp()
}

pub fn psi(t: f64, a: f64, b: f64, beta: f64) -> f64 {
    de(|s| k_ct(beta, t, s), &breaks(a, b, &[t]))
}

pub fn nu(x: f64, y: f64, beta: f64) -> f64 {
    let q = Composite::new();
    q.nodes(&breaks(0.0, x, &[y]), 0.5)
        .iter()
        .map(|&(t, w)| w * q.nodes(&breaks(0.0, y, &[t]), 0.5).iter().map(|&(s, v)| v * k_ct(beta, s, t)).sum::<f64>())
        .sum()
}

/// `∫ k(t,s) e^{-jωs} ds` as `(re, im)`.
pub fn phi_omega(omega: f64, t: f64, beta: f64) -> (f64, f64) {
    // scaled by e^{βt} so the absolute quadrature tolerance acts as a relative one
    let pts = breaks(0.0, t + horizon(beta), &[t]);
    let e = (-beta * t).exp();
    let re = de(|s| (-beta * (s.max(t) - t)).exp() * (omega * s).cos(), &pts);
    let im = de(|s| -(-beta * (s.max(t) - t)).exp() * (omega * s).sin(), &pts);
    (e * re, e * im)
}

/// `φ_ω(t)` by Gauss-Legendre, for use inside nested rules.
fn phi_omega_gl(q: &Composite, omega: f64, t: f64, beta: f64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for (s, w) in q.nodes(&breaks(0.0, horizon(beta), &[t]), 1.0) {
        let k = w * k_ct(beta, s, t);
        let (sn, cs) = (omega * s).sin_cos();
        re += k * cs;
        im -= k * sn;
    }
    (re, im)
}

/// `[[rr, ri], [ir, ii]]`: `⟨φ^a_{ω1}, φ^b_{ω2}⟩` by nested quadrature.
pub fn freq_pair(omega1: f64, omega2: f64, beta: f64) -> [[f64; 2]; 2] {
    let q = Composite::new();
    let mut out = [[0.0; 2]; 2];
    for (t, w) in q.nodes(&[0.0, horizon(beta)], 1.0) {
        let (gr, gi) = phi_omega_gl(&q, omega2, t, beta);
        let (sn, cs) = (omega1 * t).sin_cos();
        out[0][0] += w * cs * gr;
        out[0][1] += w * cs * gi;
        out[1][0] -= w * sn * gr;
        out[1][1] -= w * sn * gi;
    }
    out
}

/// `∫∫ k(s,t) e^{-jω(s−t)} ds dt`.
pub fn double_transform_diag(omega: f64, beta: f64) -> (f64, f64) {
    let q = Composite::new();
    let mut re = 0.0;
    let mut im = 0.0;
    for (t, w) in q.nodes(&[0.0, horizon(beta)], 1.0) {
        let (gr, gi) = phi_omega_gl(&q, omega, t, beta);
        let (sn, cs) = (omega * t).sin_cos();
        // e^{jωt} (gr + j gi)
        re += w * (cs * gr - sn * gi);
        im += w * (cs * gi + sn * gr);
    }
    (re, im)
}

/// `∫ φ_{ω,t} u(τ−t) dt` as `(re, im)`.
pub fn zu(bp: &[f64], xi: &[f64], omega: f64, tau: f64, beta: f64) -> (f64, f64) {
    let q = Composite::new();
    let jumps: Vec<f64> = bp.iter().map(|b| tau - b).collect();
    let mut re = 0.0;
    let mut im = 0.0;
    for (t, w) in q.nodes(&breaks(0.0, tau, &jumps), 0.5) {
        let u = pwc_at(bp, xi, tau - t);
        if u == 0.0 {
            continue;
        }
        let (gr, gi) = phi_omega_gl(&q, omega, t, beta);
        re += w * u * gr;
        im += w * u * gi;
    }
    (re, im)
}

/// `∫∫ u(τ1−t) k(t,s) u(τ2−s) ds dt`.
pub fn uu(bp: &[f64], xi: &[f64], tau1: f64, tau2: f64, beta: f64) -> f64 {
    let q = Composite::new();
    let j1: Vec<f64> = bp.iter().map(|b| tau1 - b).collect();
    let j2: Vec<f64> = bp.iter().map(|b| tau2 - b).collect();
    let mut outer = j1.clone();
    outer.extend(&j2);
    outer.push(tau2);
    let mut acc = 0.0;
    for (t, w) in q.nodes(&breaks(0.0, tau1, &outer), 0.5) {
        let u1 = pwc_at(bp, xi, tau1 - t);
        if u1 == 0.0 {
            continue;
        }
        let mut pts = j2.clone();
        pts.push(t);
        let inner: f64 = q
            .nodes(&breaks(0.0, tau2, &pts), 0.5)
            .iter()
            .map(|&(s, v)| v * k_ct(beta, s, t) * pwc_at(bp, xi, tau2 - s))
            .sum();
        acc += w * u1 * inner;
    }
    acc
}

/// Random piecewise-constant input with `n` segments on `[0, end]`.
pub fn random_pwc(r: &mut ChaCha8Rng, n: usize, end: f64) -> (Vec<f64>, Vec<f64>) {
    let mut bp: Vec<f64> = (0..n - 1).map(|_| uniform(r, 0.0, end)).collect();
    bp.push(0.0);
    bp.push(end);
    bp.sort_by(f64::total_cmp);
    let xi = (0..n).map(|_| uniform(r, -1.0, 1.0)).collect();
    (bp, xi)
}

// ----------------------------------------------------------- discrete oracles

pub fn k_dt(alpha: f64, s: usize, t: usize) -> f64 {
    alpha.powi(s.max(t) as i32)
}

/// Truncation index with `α^T · T < 1e-17`.
pub fn dt_horizon(alpha: f64) -> usize {
    let mut t = 1usize;
    while alpha.powi(t as i32) * (t as f64) / (1.0 - alpha).powi(2) > 1e-17 {
        t += 1;
    }
    t
}

pub fn dt_uu(u: &[f64], alpha: f64, tau1: usize, tau2: usize) -> f64 {
    let mut acc = 0.0;
    for t in 0..=tau1 {
        for s in 0..=tau2 {
            acc += u[tau1 - t] * k_dt(alpha, t, s) * u[tau2 - s];
        }
    }
    acc
}

pub fn dt_phi_u(u: &[f64], alpha: f64, tau: usize, t: usize) -> f64 {
    (0..=tau).map(|s| k_dt(alpha, t, s) * u[tau - s]).sum()
}

/// `Σ_t Σ_s u_{τ−t} k(t,s) e^{-jωs}`.
pub fn dt_freq_input(u: &[f64], alpha: f64, omega: f64, tau: usize) -> (f64, f64) {
    let big = dt_horizon(alpha) + tau;
    let mut re = 0.0;
    let mut im = 0.0;
    for t in 0..=tau {
        for s in 0..=big {
            let k = u[tau - t] * k_dt(alpha, t, s);
            re += k * (omega * s as f64).cos();
            im -= k * (omega * s as f64).sin();
        }
    }
    (re, im)
}

pub fn dt_freq_pair(omega1: f64, omega2: f64, alpha: f64) -> [[f64; 2]; 2] {
    let big = dt_horizon(alpha);
    let mut out = [[0.0; 2]; 2];
    for t in 0..=big {
        let (s1, c1) = (omega1 * t as f64).sin_cos();
        let mut gr = 0.0;
        let mut gi = 0.0;
        for s in 0..=big {
            let k = k_dt(alpha, t, s);
            gr += k * (omega2 * s as f64).cos();
            gi -= k * (omega2 * s as f64).sin();
        }
        out[0][0] += c1 * gr;
        out[0][1] += c1 * gi;
        out[1][0] -= s1 * gr;
        out[1][1] -= s1 * gi;
    }
    out
}
