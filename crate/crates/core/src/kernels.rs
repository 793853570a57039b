//! The TC (tuned/correlated) stable kernel and its moments.
//!
//! Discrete time uses `k(s,t) = γ α^max(s,t)`, continuous time
//! `k(s,t) = γ exp(-β max(s,t))`. The two are tied by `α = exp(-β)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Discrete,
    Continuous,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Discrete => "discrete",
            Axis::Continuous => "continuous",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "discrete" | "dt" => Ok(Axis::Discrete),
            "continuous" | "ct" => Ok(Axis::Continuous),
            other => Err(Error::Config(format!("unknown axis '{other}'"))),
        }
    }
}

/// Kernel parameters. `alpha` and `beta` are kept consistent by the constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct KernelSpec {
    axis: Axis,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    axis: Axis,
    decay: f64,
    scale: f64,
}

impl TryFrom<KernelRepr> for KernelSpec {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        KernelSpec::new(r.axis, r.decay, r.scale)
    }
}

impl From<KernelSpec> for KernelRepr {
    fn from(k: KernelSpec) -> Self {
        KernelRepr { axis: k.axis, decay: k.decay(), scale: k.gamma }
    }
}

impl KernelSpec {
    /// Discrete TC kernel with `0 <= alpha < 1`.
    pub fn discrete(alpha: f64, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidKernel(format!("alpha must lie in [0,1), got {alpha}")));
        }
        check_gamma(gamma)?;
        Ok(KernelSpec { axis: Axis::Discrete, alpha, beta: -alpha.ln(), gamma })
    }

    /// Continuous TC kernel with `beta > 0`.
    pub fn continuous(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidKernel(format!("beta must be positive and finite, got {beta}")));
        }
        check_gamma(gamma)?;
        Ok(KernelSpec { axis: Axis::Continuous, alpha: (-beta).exp(), beta, gamma })
    }

    /// Discrete kernel given through `beta` (`alpha = exp(-beta)`).
    pub fn discrete_from_beta(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidKernel(format!("beta must be positive, got {beta}")));
        }
        Self::discrete((-beta).exp(), gamma)
    }

    /// `decay` is α for discrete axes and β for continuous ones.
    pub fn new(axis: Axis, decay: f64, gamma: f64) -> Result<Self> {
        match axis {
            Axis::Discrete => Self::discrete(decay, gamma),
            Axis::Continuous => Self::continuous(decay, gamma),
        }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// β; infinite for the discrete kernel with α = 0.
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn decay(&self) -> f64 {
        match self.axis {
            Axis::Discrete => self.alpha,
            Axis::Continuous => self.beta,
        }
    }

    pub fn with_decay(&self, decay: f64) -> Result<Self> {
        Self::new(self.axis, decay, self.gamma)
    }

    /// `exp(-β t)` or `α^t`, without the γ factor. Discrete `t` must be integral.
    pub(crate) fn decay_pow(&self, t: f64) -> f64 {
        match self.axis {
            Axis::Discrete => pow_int(self.alpha, t),
            Axis::Continuous => (-self.beta * t).exp(),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!("scale must be positive and finite, got {gamma}")))
    }
}

pub(crate) fn pow_int(a: f64, t: f64) -> f64 {
    if t <= i32::MAX as f64 {
        a.powi(t as i32)
    } else {
        a.powf(t)
    }
}

/// `k(s, t)`.
pub fn kernel_eval(spec: &KernelSpec, s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::Domain(format!("kernel times must be nonnegative, got ({s}, {t})")));
    }
    if spec.axis == Axis::Discrete && (s.fract() != 0.0 || t.fract() != 0.0) {
        return Err(Error::Domain(format!("discrete kernel needs integer times, got ({s}, {t})")));
    }
    Ok(spec.gamma * spec.decay_pow(s.max(t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    Analytic,
    TruncatedSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    pub mu0: f64,
    pub mu1: f64,
    pub method: MomentMethod,
}

/// Closed-form `μ_0` and `μ_1` of `k(t,t)^{1/2}`.
pub fn moments(spec: &KernelSpec) -> KernelMoments {
    KernelMoments {
        mu0: analytic_moment(spec, 0),
        mu1: analytic_moment(spec, 1),
        method: MomentMethod::Analytic,
    }
}

fn analytic_moment(spec: &KernelSpec, n: u32) -> f64 {
    let g = spec.gamma.sqrt();
    match spec.axis {
        Axis::Continuous => {
            let c = 2.0 / spec.beta;
            if n == 0 {
                g * c
            } else {
                g * c * c
            }
        }
        Axis::Discrete => {
            let r = spec.alpha.sqrt();
            if n == 0 {
                g / (1.0 - r)
            } else {
                g * r / ((1.0 - r) * (1.0 - r))
            }
        }
    }
}

/// `μ_n` for `n ∈ {0, 1}`, in closed form.
pub fn kernel_moments(spec: &KernelSpec, n: u32, tol: f64) -> Result<f64> {
    kernel_moments_with(spec, n, tol, MomentMethod::Analytic)
}

/// `μ_n` by the requested method. The truncated path keeps its absolute tail error below `tol`.
pub fn kernel_moments_with(spec: &KernelSpec, n: u32, tol: f64, method: MomentMethod) -> Result<f64> {
    if n > 1 {
        return Err(Error::Domain(format!("only moments 0 and 1 are defined, got {n}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if spec.axis == Axis::Discrete && spec.alpha >= 1.0 {
        return Err(Error::InvalidKernel("alpha >= 1 gives divergent moments".into()));
    }
    match method {
        MomentMethod::Analytic => Ok(analytic_moment(spec, n)),
        MomentMethod::TruncatedSum => Ok(truncated_moment(spec, n, tol)),
    }
}

fn truncated_moment(spec: &KernelSpec, n: u32, tol: f64) -> f64 {
    let g = spec.gamma.sqrt();
    let half = 0.5 * spec.beta;
    match spec.axis {
        Axis::Discrete => {
            if spec.alpha == 0.0 {
                return if n == 0 { g } else { 0.0 };
            }
            let r = spec.alpha.sqrt();
            // tail after T: r^{T+1}(T+1)^n / (1-r)^{n+1} bounds both n = 0 and n = 1.
            let mut sum = 0.0;
            let mut rt = 1.0;
            let mut t = 0u64;
            loop {
                sum += (t as f64).powi(n as i32) * rt;
                rt *= r;
                t += 1;
                let tail = g * rt * (t as f64).powi(n as i32) / (1.0 - r).powi(n as i32 + 1);
                if tail <= tol && (n == 0 || (t as f64) * (1.0 - r) > 1.0) {
                    break;
                }
            }
            g * sum
        }
        Axis::Continuous => {
            // horizon from ∫_T^∞ t^n e^{-βt/2} <= tol
            let mut t_end = ((2.0 / spec.beta) * (g / (tol * half)).ln()).max(1.0).ceil();
            let tail = |t: f64| {
                let e = (-half * t).exp();
                if n == 0 {
                    g * e / half
                } else {
                    g * e * (t / half + 1.0 / (half * half))
                }
            };
            while tail(t_end) > tol {
                t_end *= 1.5;
            }
            let f = |t: f64| g * t.powi(n as i32) * (-half * t).exp();
            crate::quad::integrate(f, 0.0, t_end, tol * 1e-2)
        }
    }
}

/// Upper bound on `μ_n`.
///
/// Continuous axis: `γ^{1/2} (2/β)^{n+1} n!`. That expression bounds the
/// integral of `t^n e^{-βt/2}` but not the corresponding sum, which exceeds
/// the integral by up to the peak value. The discrete bound therefore adds
/// `max_t t^n e^{-βt/2}`.
pub fn mu_bound(spec: &KernelSpec, n: u32) -> Result<f64> {
    let g = spec.gamma.sqrt();
    let beta = spec.beta;
    let integral = if beta.is_infinite() { 0.0 } else { g * (2.0 / beta).powi(n as i32 + 1) * factorial(n) };
    let out = match spec.axis {
        Axis::Continuous => integral,
        Axis::Discrete => {
            let peak = if n == 0 {
                g
            } else if beta.is_infinite() {
                0.0
            } else {
                g * (2.0 * n as f64 / (std::f64::consts::E * beta)).powi(n as i32)
            };
            integral + peak
        }
    };
    if !out.is_finite() {
        return Err(Error::InvalidKernel(format!("moment bound overflows for beta = {beta}")));
    }
    Ok(out)
}

/// The integral-form expression `γ^{1/2} (2/β)^{n+1} n!` on either axis.
pub fn mu_bound_integral(spec: &KernelSpec, n: u32) -> Result<f64> {
    if spec.beta.is_infinite() {
        return Ok(if n == 0 { spec.gamma.sqrt() } else { 0.0 });
    }
    let out = spec.gamma.sqrt() * (2.0 / spec.beta).powi(n as i32 + 1) * factorial(n);
    if !out.is_finite() {
        return Err(Error::InvalidKernel(format!("moment bound overflows for beta = {}", spec.beta)));
    }
    Ok(out)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}
