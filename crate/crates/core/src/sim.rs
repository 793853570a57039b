//! Reference LTI simulation, ground-truth impulse responses, test inputs and
//! output noise.
//!
//! Random numbers come from ChaCha8 (`rand_chacha` 0.9) seeded with
//! `seed_from_u64`; Gaussian draws use `rand_distr::StandardNormal`
//! (ziggurat). Both are fixed algorithms, so a seed gives the same data on
//! every platform.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Axis;
use crate::signals::{Dataset, DiscreteInput, Input, PiecewiseConstantInput};

/// Transfer function with coefficients in descending powers of `z` or `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTF {
    pub axis: Axis,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

fn trim(p: &[f64]) -> Vec<f64> {
    let k = p.iter().position(|&c| c != 0.0).unwrap_or(p.len());
    let out = p[k..].to_vec();
    if out.is_empty() {
        vec![0.0]
    } else {
        out
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, x) in a.iter().enumerate() {
        out[n - a.len() + i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[n - b.len() + i] += x;
    }
    out
}

/// Roots of a polynomial in descending powers.
pub fn poly_roots(p: &[f64]) -> Vec<C64> {
    let p = trim(p);
    let n = p.len() - 1;
    if n == 0 {
        return vec![];
    }
    let mut comp = DMatrix::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -p[j + 1] / p[0];
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

impl RationalTF {
    pub fn new(axis: Axis, num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let den = trim(&den);
        let num = trim(&num);
        if den == [0.0] {
            return Err(Error::Domain("denominator is identically zero".into()));
        }
        if num.len() > den.len() {
            return Err(Error::Domain("transfer function must be proper".into()));
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(RationalTF { axis, num, den })
    }

    /// Parallel connection `self + other`.
    pub fn add(&self, other: &RationalTF) -> Result<RationalTF> {
        if self.axis != other.axis {
            return Err(Error::Domain("cannot add transfer functions on different axes".into()));
        }
        let num = poly_add(&poly_mul(&self.num, &other.den), &poly_mul(&other.num, &self.den));
        RationalTF::new(self.axis, num, poly_mul(&self.den, &other.den))
    }

    pub fn poles(&self) -> Vec<C64> {
        poly_roots(&self.den)
    }

    pub fn zeros(&self) -> Vec<C64> {
        poly_roots(&self.num)
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| match self.axis {
            Axis::Discrete => p.norm() < 1.0,
            Axis::Continuous => p.re < 0.0,
        })
    }

    /// `G(e^{jω})` or `G(jω)`.
    pub fn freq_response(&self, omega: f64) -> C64 {
        let x = match self.axis {
            Axis::Discrete => C64::from_polar(1.0, omega),
            Axis::Continuous => C64::new(0.0, omega),
        };
        let ev = |p: &[f64]| p.iter().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c);
        ev(&self.num) / ev(&self.den)
    }

    /// Reciprocal `1/G`, which must itself be proper.
    pub fn inverse(&self) -> Result<RationalTF> {
        RationalTF::new(self.axis, self.den.clone(), self.num.clone())
    }

    /// `(b, a)` in powers of `z^{-1}` with `a[0] = 1`.
    fn difference_coeffs(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.den.len();
        let mut b = vec![0.0; n - self.num.len()];
        b.extend_from_slice(&self.num);
        let a0 = self.den[0];
        (b.iter().map(|v| v / a0).collect(), self.den.iter().map(|v| v / a0).collect())
    }

    /// Controllable canonical realization `(A, B, C, D)`.
    pub fn state_space(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
        let n = self.den.len() - 1;
        let a0 = self.den[0];
        let a: Vec<f64> = self.den.iter().map(|v| v / a0).collect();
        let mut b = vec![0.0; n + 1 - self.num.len()];
        b.extend(self.num.iter().map(|v| v / a0));
        let d = b[0];
        let mut am = DMatrix::zeros(n, n);
        for j in 0..n {
            am[(0, j)] = -a[j + 1];
        }
        for i in 1..n {
            am[(i, i - 1)] = 1.0;
        }
        let mut bv = DVector::zeros(n);
        if n > 0 {
            bv[0] = 1.0;
        }
        let cv = DVector::from_fn(n, |k, _| b[k + 1] - d * a[k + 1]);
        (am, bv, cv, d)
    }
}

/// Filters `u` (from rest) through a discrete transfer function.
pub fn filter(tf: &RationalTF, u: &[f64]) -> Vec<f64> {
    let (b, a) = tf.difference_coeffs();
    let mut y = vec![0.0; u.len()];
    for t in 0..u.len() {
        let mut acc = 0.0;
        for (k, bk) in b.iter().enumerate() {
            if k <= t {
                acc += bk * u[t - k];
            }
        }
        for (k, ak) in a.iter().enumerate().skip(1) {
            if k <= t {
                acc -= ak * y[t - k];
            }
        }
        y[t] = acc;
    }
    y
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with the [13/13] Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let theta13 = 5.371920351148152;
    let s = if norm1 > theta13 { (norm1 / theta13).log2().ceil() as i32 } else { 0 };
    let a = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = PADE13;
    let u_inner = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2) + b[7] * &a6 + b[5] * &a4 + b[3] * &a2 + b[1] * &id;
    let u = &a * u_inner;
    let v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2) + b[6] * &a6 + b[4] * &a4 + b[2] * &a2 + b[0] * &id;
    let mut r = (&v - &u).lu().solve(&(&v + &u)).expect("Padé denominator is nonsingular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Noise-free outputs at `times`. Unstable systems are still simulated.
pub fn simulate(tf: &RationalTF, input: &Input, times: &[f64]) -> Result<Vec<f64>> {
    if tf.axis != input.axis() {
        return Err(Error::Domain("input and system axes differ".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().map_or(false, |t| *t < 0.0) {
        return Err(Error::Domain("sample times must be nonnegative and increasing".into()));
    }
    match input {
        Input::Discrete(u) => {
            let steps: Vec<usize> = times
                .iter()
                .map(|&t| if t.fract() == 0.0 { Ok(t as usize) } else { Err(Error::Domain(format!("non-integer time {t}"))) })
                .collect::<Result<_>>()?;
            let n = steps.last().map_or(0, |t| t + 1);
            let uu: Vec<f64> = (0..n).map(|t| u.at(t as i64)).collect();
            let y = filter(tf, &uu);
            Ok(steps.iter().map(|&t| y[t]).collect())
        }
        Input::PiecewiseConstant(u) => Ok(simulate_ct(tf, u, times)),
    }
}

fn zoh_step(a: &DMatrix<f64>, b: &DVector<f64>, h: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    m.view_mut((0, n), (n, 1)).copy_from(&(b * h));
    let e = expm(&m);
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, 1)).column(0).into_owned())
}

fn simulate_ct(tf: &RationalTF, u: &PiecewiseConstantInput, times: &[f64]) -> Vec<f64> {
    let (a, b, c, d) = tf.state_space();
    let n = a.nrows();
    let mut events: Vec<f64> = u.breakpoints().iter().chain(times).copied().collect();
    events.sort_by(f64::total_cmp);
    events.dedup();
    let mut x = DVector::zeros(n);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut k = 0;
    for &ev in &events {
        if ev > now {
            let level = u.at(now);
            let (ad, bd) = zoh_step(&a, &b, ev - now);
            x = &ad * &x + &bd * level;
            now = ev;
        }
        while k < times.len() && times[k] == now {
            out.push(c.dot(&x) + d * u.at(now));
            k += 1;
        }
    }
    out
}

/// Impulse response samples. Discrete grids must be integer; the continuous
/// response omits the direct term `D δ(t)`.
pub fn impulse_response_of(tf: &RationalTF, grid: &[f64]) -> Result<Vec<f64>> {
    match tf.axis {
        Axis::Discrete => {
            let steps: Vec<usize> = grid
                .iter()
                .map(|&t| if t >= 0.0 && t.fract() == 0.0 { Ok(t as usize) } else { Err(Error::Domain(format!("bad discrete time {t}"))) })
                .collect::<Result<_>>()?;
            let n = steps.iter().copied().max().map_or(0, |t| t + 1);
            let mut imp = vec![0.0; n];
            if n > 0 {
                imp[0] = 1.0;
            }
            let h = filter(tf, &imp);
            Ok(steps.iter().map(|&t| h[t]).collect())
        }
        Axis::Continuous => {
            let (a, b, c, _) = tf.state_space();
            grid.iter()
                .map(|&t| {
                    if t < 0.0 {
                        return Err(Error::Domain(format!("negative time {t}")));
                    }
                    Ok(c.dot(&(expm(&(&a * t)) * &b)))
                })
                .collect()
        }
    }
}

/// Adds white Gaussian noise with variance `var(y) · 10^{-snr/10}`.
/// An infinite SNR returns `y` unchanged.
pub fn add_noise_snr(y: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::Domain("empty output vector".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(y.to_vec());
    }
    if !snr_db.is_finite() {
        return Err(Error::Domain(format!("invalid SNR {snr_db}")));
    }
    let var = variance(y);
    if var == 0.0 {
        return Err(Error::Domain("output variance is zero; SNR undefined".into()));
    }
    let sd = (var * 10f64.powf(-snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(y.iter().map(|v| v + sd * rng.sample::<f64, _>(StandardNormal)).collect())
}

pub fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// `n` i.i.d. standard normal samples.
pub fn white_gaussian_input(n: usize, seed: u64) -> Result<DiscreteInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DiscreteInput::new((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
}

/// Random ±1 pulse train on `[0, t_end)` with dwell times uniform on `[dwell_min, dwell_max]`.
pub fn random_switching_input(t_end: f64, dwell_min: f64, dwell_max: f64, seed: u64) -> Result<PiecewiseConstantInput> {
    if !(t_end > 0.0 && dwell_min > 0.0 && dwell_max >= dwell_min) {
        return Err(Error::Domain("need t_end > 0 and 0 < dwell_min <= dwell_max".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = vec![0.0];
    let mut xi = Vec::new();
    let mut level = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut now = 0.0;
    while now < t_end {
        let dwell = dwell_min + (dwell_max - dwell_min) * rng.random::<f64>();
        now = (now + dwell).min(t_end);
        xi.push(level);
        s.push(now);
        level = -level;
    }
    PiecewiseConstantInput::new(s, xi)
}

/// Built-in test systems.
pub fn example_system(name: &str) -> Result<RationalTF> {
    match name {
        "example1" => {
            let a = RationalTF::new(Axis::Discrete, vec![1.0], vec![2.0, -1.0])?;
            let b = RationalTF::new(Axis::Discrete, vec![0.03, -0.03], vec![1.0, 1.0, 0.9])?;
            a.add(&b)
        }
        // the constant 0.396 is read as the zeroth-order numerator coefficient
        "example3" => RationalTF::new(
            Axis::Continuous,
            vec![-2.0, -3.6, -2.095, -0.396],
            vec![0.461, 2.628, 4.389, 2.662, 0.519],
        ),
        other => Err(Error::Config(format!("unknown system '{other}'"))),
    }
}

/// Discrete experiment: white Gaussian input, `n` samples, noise at `snr_db`.
pub fn white_noise_experiment(tf: &RationalTF, n: usize, snr_db: f64, seed: u64) -> Result<Dataset> {
    if tf.axis != Axis::Discrete {
        return Err(Error::Domain("white-noise experiment needs a discrete system".into()));
    }
    let input = Input::Discrete(white_gaussian_input(n, seed)?);
    let times: Vec<f64> = (0..n).map(|t| t as f64).collect();
    let y0 = simulate(tf, &input, &times)?;
    let y = add_noise_snr(&y0, snr_db, seed.wrapping_add(0x5eed))?;
    Dataset::new(input, times, y)
}

/// Continuous experiment: `n` jittered samples `t_k = h k + U[0, h]` of the
/// response to a random ±1 switching input (dwell times `U[0.1, 0.8]`), noise at `snr_db`.
pub fn switching_experiment(tf: &RationalTF, n: usize, h: f64, snr_db: f64, seed: u64) -> Result<Dataset> {
    if tf.axis != Axis::Continuous {
        return Err(Error::Domain("switching experiment needs a continuous system".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("sample spacing must be positive, got {h}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x71e5));
    let times: Vec<f64> = (0..n).map(|k| h * k as f64 + h * rng.random::<f64>()).collect();
    let t_end = h * (n as f64 + 1.0);
    let input = Input::PiecewiseConstant(random_switching_input(t_end, 0.1, 0.8, seed)?);
    let y0 = simulate(tf, &input, &times)?;
    let y = add_noise_snr(&y0, snr_db, seed.wrapping_add(0x5eed))?;
    Dataset::new(input, times, y)
}

/// Built-in system 1 driven by white noise.
pub fn example1_dataset(n: usize, snr_db: f64, seed: u64) -> Result<Dataset> {
    white_noise_experiment(&example_system("example1")?, n, snr_db, seed)
}

/// Built-in system 3 under a switching input, sampled about every 0.04 s.
pub fn example3_dataset(n: usize, snr_db: f64, seed: u64) -> Result<Dataset> {
    switching_experiment(&example_system("example3")?, n, 0.04, snr_db, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_discrete_impulse() {
        let tf = RationalTF::new(Axis::Discrete, vec![1.0], vec![2.0, -1.0]).unwrap();
        let g = impulse_response_of(&tf, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn pure_delay() {
        let tf = RationalTF::new(Axis::Discrete, vec![1.0], vec![1.0, 0.0]).unwrap();
        let g = impulse_response_of(&tf, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn first_order_continuous() {
        let tf = RationalTF::new(Axis::Continuous, vec![1.0], vec![1.0, 1.0]).unwrap();
        let step = Input::PiecewiseConstant(PiecewiseConstantInput::new(vec![0.0, 5.0], vec![1.0]).unwrap());
        let y = simulate(&tf, &step, &[1.0]).unwrap();
        assert!((y[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-13);
        let g = impulse_response_of(&tf, &[0.0, 0.7]).unwrap();
        assert!((g[1] - (-0.7f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn expm_matches_known_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 30.0, -30.0, 0.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] - 30f64.cos()).abs() < 1e-12);
        assert!((e[(0, 1)] - 30f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn systems_are_stable() {
        assert!(example_system("example1").unwrap().is_stable());
        assert!(example_system("example3").unwrap().is_stable());
        assert!(!RationalTF::new(Axis::Discrete, vec![1.0], vec![1.0, -1.5]).unwrap().is_stable());
        assert!(example_system("nope").is_err());
    }

    #[test]
    fn noise_is_reproducible() {
        let y: Vec<f64> = (0..50).map(|t| (t as f64 * 0.3).sin()).collect();
        assert_eq!(add_noise_snr(&y, 10.0, 3).unwrap(), add_noise_snr(&y, 10.0, 3).unwrap());
        assert_ne!(add_noise_snr(&y, 10.0, 3).unwrap(), add_noise_snr(&y, 10.0, 4).unwrap());
        assert_eq!(add_noise_snr(&y, f64::INFINITY, 3).unwrap(), y);
        assert!(add_noise_snr(&[1.0, 1.0], 10.0, 0).is_err());
    }
}
