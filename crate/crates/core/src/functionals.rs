//! Representers of the sampling, input and frequency functionals and their
//! inner products in the TC kernel's RKHS.
//!
//! Every representer and inner product is linear in the kernel scale γ. Complex
//! values are used internally; public inner products are real.
//!
//! Frequency-frequency products are computed from the double transform
//! `S(a, b) = ΣΣ k(t,s) e^{-jbs} e^{-jat}` (sums or integrals), with
//! `ζ_r(ω1,ω2) = [S(ω1,ω2) + S(ω1,-ω2)]/2` and
//! `ζ_i(ω1,ω2) = [S(ω1,ω2) - S(ω1,-ω2)]/(2j)`. Unlike the expanded ζ formulas,
//! this has no `1/ω2` cancellation near zero.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{pow_int, Axis, KernelSpec};
use crate::signals::{Dataset, DiscreteInput, Input, PiecewiseConstantInput};

/// Default absolute tolerance for truncated sums.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "at", rename_all = "kebab-case")]
pub enum BasisDescriptor {
    InputFunctional(f64),
    FreqReal(f64),
    FreqImag(f64),
}

impl BasisDescriptor {
    pub fn omega(&self) -> Option<f64> {
        match *self {
            BasisDescriptor::FreqReal(w) | BasisDescriptor::FreqImag(w) => Some(w),
            BasisDescriptor::InputFunctional(_) => None,
        }
    }
}

// ---------------------------------------------------------------- continuous

/// `∫_a^b e^{-β max(t,s)} ds`.
pub fn psi(t: f64, a: f64, b: f64, beta: f64) -> Result<f64> {
    if !(a <= b) || a < 0.0 || t < 0.0 {
        return Err(Error::Domain(format!("psi needs 0 <= a <= b and t >= 0, got t={t}, a={a}, b={b}")));
    }
    Ok(psi_raw(t, a, b, beta))
}

pub(crate) fn psi_raw(t: f64, a: f64, b: f64, beta: f64) -> f64 {
    let c = t.min(b).max(a);
    ((-beta * c).exp() - (-beta * b).exp()) / beta + (c - a) * (-beta * t).exp()
}

/// `∫_0^x ∫_0^y e^{-β max(s,t)} dt ds`.
pub fn nu(x: f64, y: f64, beta: f64) -> Result<f64> {
    if x < 0.0 || y < 0.0 {
        return Err(Error::Domain(format!("nu needs x, y >= 0, got ({x}, {y})")));
    }
    if x.is_infinite() && y.is_infinite() {
        return Ok(2.0 / (beta * beta));
    }
    let m = x.min(y);
    Ok((2.0 - 2.0 * (-beta * m).exp() - beta * m * ((-beta * x).exp() + (-beta * y).exp())) / (beta * beta))
}

/// `(1 - e^{-jθ}) / (jω)` with `θ = ω t`, free of cancellation for small θ.
fn one_minus_cis_over_jw(omega: f64, t: f64) -> C64 {
    let th = omega * t;
    let s = (0.5 * th).sin();
    C64::new(th.sin() / omega, -2.0 * s * s / omega)
}

/// `φ_{ω,t} = ∫ e^{-β max(t,s)} e^{-jωs} ds` (kernel scale 1).
pub fn phi_omega_ct(omega: f64, t: f64, beta: f64) -> C64 {
    let e = (-beta * t).exp();
    if omega == 0.0 {
        return C64::new(e * (t + 1.0 / beta), 0.0);
    }
    let cis = C64::from_polar(1.0, -omega * t);
    e * (one_minus_cis_over_jw(omega, t) + cis / C64::new(beta, omega))
}

/// Continuous double transform `S(a, b)` for kernel scale 1.
pub fn double_transform_ct(a: f64, b: f64, beta: f64) -> C64 {
    let c = C64::new(beta, a + b);
    (C64::new(beta, a).inv() + C64::new(beta, b).inv()) / c
}

/// `(ζ_r, ζ_i)` in the expanded form with the `ω2 = 0` branch.
pub fn zeta(omega1: f64, omega2: f64, beta: f64) -> (C64, C64) {
    let j = C64::i();
    if omega2 == 0.0 {
        let d = C64::new(beta, omega1);
        return (C64::new(2.0 * beta, omega1) / (beta * d * d), C64::new(0.0, 0.0));
    }
    let w2 = omega2;
    let t1 = ((w2 * w2 - j * w2 * beta) * C64::new(beta, omega1 + omega2)).inv();
    let t2 = ((w2 * w2 + j * w2 * beta) * C64::new(beta, omega1 - omega2)).inv();
    let zr = 0.5 * beta * (t1 + t2);
    let zi = beta / (2.0 * j) * (t1 - t2) - 1.0 / (w2 * C64::new(beta, omega1));
    (zr, zi)
}

/// `ζ` pair from the double transform.
fn zeta_from_s(z: C64, zp: C64) -> (C64, C64) {
    let zr = 0.5 * (z + zp);
    let zi = (z - zp) / C64::new(0.0, 2.0);
    (zr, zi)
}

/// `∫_0^x φ_{ω,t} dt` (kernel scale 1).
fn phi_omega_ct_integral(omega: f64, x: f64, beta: f64, ebx: f64) -> C64 {
    if omega == 0.0 {
        return C64::new((2.0 - (beta * x + 2.0) * ebx) / (beta * beta), 0.0);
    }
    let c = C64::new(beta, omega);
    let ecx = ebx * C64::from_polar(1.0, -omega * x);
    let e_beta = (1.0 - ebx) / beta;
    let e_c = (1.0 - ecx) / c;
    (e_beta - e_c) / C64::new(0.0, omega) + e_c / c
}

/// Nonzero jump terms `(c_i, s̄_i(τ), e^{-β s̄_i(τ)})` of `u(τ - ·)`.
fn ct_jump_terms(u: &PiecewiseConstantInput, tau: f64, beta: f64) -> Vec<(f64, f64, f64)> {
    let jumps = u.jumps();
    u.breakpoints()
        .iter()
        .zip(jumps)
        .filter_map(|(&s, c)| {
            let x = (tau - s).max(0.0);
            (x > 0.0 && c != 0.0).then(|| (c, x, (-beta * x).exp()))
        })
        .collect()
}

/// `z_u(ω, τ) = ∫ φ_{ω,t} u(τ - t) dt` (kernel scale 1).
pub fn zu_ct(input: &PiecewiseConstantInput, omega: f64, tau: f64, beta: f64) -> C64 {
    ct_jump_terms(input, tau, beta)
        .iter()
        .map(|&(c, x, e)| c * phi_omega_ct_integral(omega, x, beta, e))
        .sum()
}

fn uu_ct(terms1: &[(f64, f64, f64)], terms2: &[(f64, f64, f64)], beta: f64) -> f64 {
    let mut acc = 0.0;
    for &(c1, x1, e1) in terms1 {
        let mut row = 0.0;
        for &(c2, x2, e2) in terms2 {
            let (m, em) = if x1 <= x2 { (x1, e1) } else { (x2, e2) };
            row += c2 * (2.0 - 2.0 * em - beta * m * (e1 + e2));
        }
        acc += c1 * row;
    }
    acc / (beta * beta)
}

// ------------------------------------------------------------------ discrete

/// `Σ_{s≥0} α^max(t,s) e^{-jωs}` (kernel scale 1) in closed form. The tolerance
/// only matters for [`phi_omega_dt_truncated`]; the closed form is exact.
pub fn phi_omega_dt(omega: f64, t: u64, alpha: f64, _tol: f64) -> Result<C64> {
    check_alpha(alpha)?;
    Ok(phi_omega_dt_closed(omega, t, alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!("alpha must lie in [0,1), got {alpha}")))
    }
}

pub(crate) fn phi_omega_dt_closed(omega: f64, t: u64, alpha: f64) -> C64 {
    let tf = t as f64;
    let at = pow_int(alpha, tf);
    let head = if omega == 0.0 {
        C64::new(tf, 0.0)
    } else {
        // (1 - e^{-jωt}) / (1 - e^{-jω})
        let h = (0.5 * omega * tf).sin();
        let num = C64::new(2.0 * h * h, (omega * tf).sin());
        let h1 = (0.5 * omega).sin();
        let den = C64::new(2.0 * h1 * h1, omega.sin());
        num / den
    };
    let q = alpha * C64::from_polar(1.0, -omega);
    let tail = if at == 0.0 { C64::new(0.0, 0.0) } else { C64::from_polar(at, -omega * tf) / (1.0 - q) };
    at * head + tail
}

/// Smallest `T` with `Σ_{s>T} α^s (s + 1/(1-α)) <= tol`.
fn dt_horizon(alpha: f64, tol: f64, start: u64) -> u64 {
    if alpha == 0.0 {
        return start;
    }
    let om = 1.0 - alpha;
    let mut t = start;
    loop {
        let n = (t + 1) as f64;
        let a = pow_int(alpha, n);
        let tail = a * (n / om + alpha / (om * om) + 1.0 / (om * om));
        if tail <= tol {
            return t;
        }
        t += 1 + t / 8;
    }
}

/// `Σ_{s=0}^{T} α^max(t,s) e^{-jωs}` with the tail after `T` below `tol`.
pub fn phi_omega_dt_truncated(omega: f64, t: u64, alpha: f64, tol: f64) -> Result<C64> {
    check_alpha(alpha)?;
    let big_t = if alpha == 0.0 { t } else { t.max(((tol * (1.0 - alpha)).ln() / alpha.ln()).ceil().max(0.0) as u64) };
    let mut acc = C64::new(0.0, 0.0);
    for s in 0..=big_t {
        acc += pow_int(alpha, t.max(s) as f64) * C64::from_polar(1.0, -omega * s as f64);
    }
    Ok(acc)
}

/// Discrete double transform `S(a, b)` for kernel scale 1.
pub fn double_transform_dt(a: f64, b: f64, alpha: f64) -> C64 {
    let p = C64::from_polar(1.0, -b);
    let q = C64::from_polar(1.0, -a);
    let ap = alpha * p;
    let aq = alpha * q;
    (1.0 + aq / (1.0 - aq) + ap / (1.0 - ap)) / (1.0 - alpha * p * q)
}

/// Frequency-frequency products by truncated summation over `t` (kernel scale 1).
/// Returns `[[rr, ri], [ir, ii]]` with the first index for `ω1`.
pub fn freq_pair_dt_truncated(omega1: f64, omega2: f64, alpha: f64, tol: f64) -> Result<[[f64; 2]; 2]> {
    check_alpha(alpha)?;
    let horizon = dt_horizon(alpha, tol, 1);
    let mut z = C64::new(0.0, 0.0);
    let mut zp = C64::new(0.0, 0.0);
    for t in 0..=horizon {
        let phi = phi_omega_dt_closed(omega2, t, alpha);
        let q = C64::from_polar(1.0, -omega1 * t as f64);
        z += phi * q;
        zp += phi.conj() * q;
    }
    Ok(pair_from_s(z, zp))
}

fn pair_from_s(z: C64, zp: C64) -> [[f64; 2]; 2] {
    let (zr, zi) = zeta_from_s(z, zp);
    [[zr.re, zi.re], [zr.im, zi.im]]
}

/// `[[rr, ri], [ir, ii]]` inner products of the frequency representers at `ω1`, `ω2`.
pub fn freq_pair(spec: &KernelSpec, omega1: f64, omega2: f64) -> [[f64; 2]; 2] {
    let (z, zp) = match spec.axis() {
        Axis::Continuous => (
            double_transform_ct(omega1, omega2, spec.beta()),
            double_transform_ct(omega1, -omega2, spec.beta()),
        ),
        Axis::Discrete => (
            double_transform_dt(omega1, omega2, spec.alpha()),
            double_transform_dt(omega1, -omega2, spec.alpha()),
        ),
    };
    let g = spec.gamma();
    let mut out = pair_from_s(z, zp);
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= g;
        }
    }
    if omega2 == 0.0 {
        out[0][1] = 0.0;
        out[1][1] = 0.0;
    }
    if omega1 == 0.0 {
        out[1][0] = 0.0;
        out[1][1] = 0.0;
    }
    out
}

/// `(K v)_t` for `t < n_out` with `K = [α^max(t,s)]` and `v` supported on `0..v.len()`.
fn tc_apply(alpha: f64, v: &[f64], n_out: usize) -> Vec<f64> {
    let n = v.len();
    // suffix[t] = Σ_{s >= t} α^s v_s
    let mut suffix = vec![0.0; n + 1];
    for s in (0..n).rev() {
        suffix[s] = suffix[s + 1] + pow_int(alpha, s as f64) * v[s];
    }
    let mut out = Vec::with_capacity(n_out);
    let mut prefix = 0.0;
    for t in 0..n_out {
        if t < n {
            prefix += v[t];
        }
        let after = if t + 1 < n { suffix[t + 1] } else { 0.0 };
        out.push(pow_int(alpha, t as f64) * prefix + after);
    }
    out
}

/// `Σ_{s=0}^{τ} k(t,s) u_{τ-s}` for all `t < n_out` (kernel scale 1).
fn phi_u_dt_vec(u: &DiscreteInput, alpha: f64, tau: u64, n_out: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..=tau).map(|s| u.at(tau as i64 - s as i64)).collect();
    tc_apply(alpha, &v, n_out)
}

/// Discrete `T_u K T_uᵀ` block between sample times `taus1` and `taus2` (kernel scale 1).
fn uu_dt_block(u: &DiscreteInput, alpha: f64, taus1: &[u64], taus2: &[u64], symmetric: bool) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(taus1.len(), taus2.len());
    for (j, &t2) in taus2.iter().enumerate() {
        let n_out = taus1.iter().copied().max().unwrap_or(0) as usize + 1;
        let w = phi_u_dt_vec(u, alpha, t2, n_out);
        for (i, &t1) in taus1.iter().enumerate() {
            if symmetric && i > j {
                break;
            }
            let mut acc = 0.0;
            for t in 0..=t1 {
                acc += u.at(t1 as i64 - t as i64) * w[t as usize];
            }
            m[(i, j)] = acc;
        }
    }
    if symmetric {
        for j in 0..taus2.len() {
            for i in (j + 1)..taus1.len() {
                m[(i, j)] = m[(j, i)];
            }
        }
    }
    m
}

fn as_steps(taus: &[f64]) -> Result<Vec<u64>> {
    taus.iter()
        .map(|&t| {
            if t >= 0.0 && t.fract() == 0.0 {
                Ok(t as u64)
            } else {
                Err(Error::Domain(format!("discrete time {t} is not a nonnegative integer")))
            }
        })
        .collect()
}

// ------------------------------------------------------------- dispatching

/// `φ_{u,τ}(t)`.
pub fn phi_u_value(d: &Dataset, spec: &KernelSpec, tau: f64, t: f64) -> Result<f64> {
    d.sample_index(tau)?;
    phi_u_value_any(d.input(), spec, tau, t)
}

/// `φ_{u,τ}(t)` for an arbitrary `τ >= 0`.
pub fn phi_u_value_any(input: &Input, spec: &KernelSpec, tau: f64, t: f64) -> Result<f64> {
    check_axis(input.axis(), spec)?;
    if t < 0.0 || tau < 0.0 {
        return Err(Error::Domain(format!("times must be nonnegative, got tau={tau}, t={t}")));
    }
    let g = spec.gamma();
    match input {
        Input::Discrete(u) => {
            let tau = as_steps(&[tau])?[0];
            let t = as_steps(&[t])?[0];
            let mut acc = 0.0;
            for s in 0..=tau {
                acc += pow_int(spec.alpha(), t.max(s) as f64) * u.at(tau as i64 - s as i64);
            }
            Ok(g * acc)
        }
        Input::PiecewiseConstant(u) => {
            let beta = spec.beta();
            let bp = u.breakpoints();
            let mut acc = 0.0;
            for (i, &xi) in u.values().iter().enumerate() {
                let hi = (tau - bp[i]).max(0.0);
                let lo = (tau - bp[i + 1]).max(0.0);
                if hi > lo {
                    acc += xi * psi_raw(t, lo, hi, beta);
                }
            }
            Ok(g * acc)
        }
    }
}

/// `φ_ω(t) = φ^r_ω(t) + j φ^i_ω(t)` including the kernel scale.
pub fn phi_omega(spec: &KernelSpec, omega: f64, t: f64) -> Result<C64> {
    if t < 0.0 || omega < 0.0 {
        return Err(Error::Domain(format!("need t, omega >= 0, got t={t}, omega={omega}")));
    }
    let v = match spec.axis() {
        Axis::Continuous => phi_omega_ct(omega, t, spec.beta()),
        Axis::Discrete => phi_omega_dt_closed(omega, as_steps(&[t])?[0], spec.alpha()),
    };
    Ok(spec.gamma() * v)
}

fn check_axis(axis: Axis, spec: &KernelSpec) -> Result<()> {
    if axis == spec.axis() {
        Ok(())
    } else {
        Err(Error::Domain(format!("data axis {} does not match kernel axis {}", axis.name(), spec.axis().name())))
    }
}

/// `⟨φ^r_ω, φ_{u,τ}⟩ + j ⟨φ^i_ω, φ_{u,τ}⟩` including the kernel scale.
pub fn freq_input_product(input: &Input, spec: &KernelSpec, omega: f64, tau: f64) -> Result<C64> {
    check_axis(input.axis(), spec)?;
    let v = match input {
        Input::PiecewiseConstant(u) => zu_ct(u, omega, tau, spec.beta()),
        Input::Discrete(u) => {
            let tau = as_steps(&[tau])?[0];
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..=tau {
                let ut = u.at(tau as i64 - t as i64);
                if ut != 0.0 {
                    acc += ut * phi_omega_dt_closed(omega, t, spec.alpha());
                }
            }
            acc
        }
    };
    Ok(spec.gamma() * v)
}

/// `⟨φ_{u,τ1}, φ_{u,τ2}⟩`.
pub fn input_input_product(input: &Input, spec: &KernelSpec, tau1: f64, tau2: f64) -> Result<f64> {
    Ok(input_gram_block(input, spec, &[tau1], &[tau2])?[(0, 0)])
}

/// Block `[⟨φ_{u,a_i}, φ_{u,b_j}⟩]`.
pub fn input_gram_block(input: &Input, spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<DMatrix<f64>> {
    check_axis(input.axis(), spec)?;
    let symmetric = a == b;
    let mut m = match input {
        Input::Discrete(u) => uu_dt_block(u, spec.alpha(), &as_steps(a)?, &as_steps(b)?, symmetric),
        Input::PiecewiseConstant(u) => {
            let beta = spec.beta();
            let ta: Vec<_> = a.iter().map(|&t| ct_jump_terms(u, t, beta)).collect();
            let tb: Vec<_> = if symmetric { ta.clone() } else { b.iter().map(|&t| ct_jump_terms(u, t, beta)).collect() };
            let mut m = DMatrix::zeros(a.len(), b.len());
            for j in 0..b.len() {
                let rows = if symmetric { j + 1 } else { a.len() };
                for i in 0..rows {
                    m[(i, j)] = uu_ct(&ta[i], &tb[j], beta);
                }
            }
            if symmetric {
                m.fill_lower_triangle_with_upper_triangle();
            }
            m
        }
    };
    m *= spec.gamma();
    Ok(m)
}

/// Rows `ω_k`, columns `τ_i`: `⟨φ^r_{ω_k}, φ_{u,τ_i}⟩` and `⟨φ^i_{ω_k}, φ_{u,τ_i}⟩`.
pub fn freq_input_block(input: &Input, spec: &KernelSpec, omegas: &[f64], taus: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_axis(input.axis(), spec)?;
    let mut re = DMatrix::zeros(omegas.len(), taus.len());
    let mut im = DMatrix::zeros(omegas.len(), taus.len());
    let g = spec.gamma();
    match input {
        Input::Discrete(u) => {
            let steps = as_steps(taus)?;
            let n = steps.iter().copied().max().unwrap_or(0) as usize + 1;
            let uvals: Vec<f64> = (0..u.len().max(n)).map(|i| u.at(i as i64)).collect();
            let mut phi = vec![C64::new(0.0, 0.0); n];
            for (k, &w) in omegas.iter().enumerate() {
                for (t, p) in phi.iter_mut().enumerate() {
                    *p = phi_omega_dt_closed(w, t as u64, spec.alpha());
                }
                for (i, &tau) in steps.iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for t in 0..=tau as usize {
                        let ut = uvals[tau as usize - t];
                        if ut != 0.0 {
                            acc += ut * phi[t];
                        }
                    }
                    re[(k, i)] = g * acc.re;
                    im[(k, i)] = g * if w == 0.0 { 0.0 } else { acc.im };
                }
            }
        }
        Input::PiecewiseConstant(u) => {
            let beta = spec.beta();
            let terms: Vec<_> = taus.iter().map(|&t| ct_jump_terms(u, t, beta)).collect();
            for (k, &w) in omegas.iter().enumerate() {
                for (i, tt) in terms.iter().enumerate() {
                    let z: C64 = tt.iter().map(|&(c, x, e)| c * phi_omega_ct_integral(w, x, beta, e)).sum();
                    re[(k, i)] = g * z.re;
                    im[(k, i)] = g * if w == 0.0 { 0.0 } else { z.im };
                }
            }
        }
    }
    Ok((re, im))
}

/// `⟨φ_a, φ_b⟩`.
pub fn inner_product(d: &Dataset, spec: &KernelSpec, a: BasisDescriptor, b: BasisDescriptor, tol: f64) -> Result<f64> {
    use BasisDescriptor::*;
    check_axis(d.axis(), spec)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    for desc in [a, b] {
        match desc {
            InputFunctional(t) => {
                d.sample_index(t)?;
            }
            FreqReal(w) | FreqImag(w) => {
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::Domain(format!("frequency {w} out of range")));
                }
            }
        }
    }
    Ok(match (a, b) {
        (InputFunctional(t1), InputFunctional(t2)) => input_input_product(d.input(), spec, t1, t2)?,
        (FreqReal(w), InputFunctional(t)) | (InputFunctional(t), FreqReal(w)) => {
            freq_input_product(d.input(), spec, w, t)?.re
        }
        (FreqImag(w), InputFunctional(t)) | (InputFunctional(t), FreqImag(w)) => {
            if w == 0.0 {
                0.0
            } else {
                freq_input_product(d.input(), spec, w, t)?.im
            }
        }
        (x, y) => {
            let (w1, i1) = freq_parts(x);
            let (w2, i2) = freq_parts(y);
            freq_pair(spec, w1, w2)[i1][i2]
        }
    })
}

fn freq_parts(d: BasisDescriptor) -> (f64, usize) {
    match d {
        BasisDescriptor::FreqReal(w) => (w, 0),
        BasisDescriptor::FreqImag(w) => (w, 1),
        BasisDescriptor::InputFunctional(_) => unreachable!(),
    }
}

/// Gram matrix over an ordered descriptor list. Entries are symmetric bit for bit.
pub fn gram_matrix(d: &Dataset, spec: &KernelSpec, descriptors: &[BasisDescriptor]) -> Result<DMatrix<f64>> {
    check_axis(d.axis(), spec)?;
    let m = descriptors.len();
    let mut taus = Vec::new();
    let mut tau_pos = Vec::new();
    let mut freqs = Vec::new();
    let mut freq_pos = Vec::new();
    for (k, desc) in descriptors.iter().enumerate() {
        match *desc {
            BasisDescriptor::InputFunctional(t) => {
                taus.push(t);
                tau_pos.push(k);
            }
            BasisDescriptor::FreqReal(w) | BasisDescriptor::FreqImag(w) => {
                freqs.push((w, if matches!(desc, BasisDescriptor::FreqReal(_)) { 0 } else { 1 }));
                freq_pos.push(k);
            }
        }
    }
    let mut phi = DMatrix::zeros(m, m);
    let uu = input_gram_block(d.input(), spec, &taus, &taus)?;
    for (i, &pi) in tau_pos.iter().enumerate() {
        for (j, &pj) in tau_pos.iter().enumerate() {
            phi[(pi, pj)] = uu[(i, j)];
        }
    }
    let ws: Vec<f64> = freqs.iter().map(|f| f.0).collect();
    let (re, im) = freq_input_block(d.input(), spec, &ws, &taus)?;
    for (k, &(_, part)) in freqs.iter().enumerate() {
        let src = if part == 0 { &re } else { &im };
        for (i, &pi) in tau_pos.iter().enumerate() {
            phi[(freq_pos[k], pi)] = src[(k, i)];
            phi[(pi, freq_pos[k])] = src[(k, i)];
        }
    }
    for (k, &(w1, p1)) in freqs.iter().enumerate() {
        for (l, &(w2, p2)) in freqs.iter().enumerate().skip(k) {
            let v = freq_pair(spec, w1, w2)[p1][p2];
            phi[(freq_pos[k], freq_pos[l])] = v;
            phi[(freq_pos[l], freq_pos[k])] = v;
        }
    }
    Ok(phi)
}
