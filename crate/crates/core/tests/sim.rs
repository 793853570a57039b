mod common;

use freqid::kernels::Axis;
use freqid::signals::{DiscreteInput, Input, PiecewiseConstantInput};
use freqid::sim::*;
use proptest::prelude::*;

fn dt_tf() -> RationalTF {
    example_system("example1").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn discrete_simulation_is_linear(
        u1 in prop::collection::vec(-1.0f64..1.0, 60),
        u2 in prop::collection::vec(-1.0f64..1.0, 60),
        a in -3.0f64..3.0,
    ) {
        let tf = dt_tf();
        let t: Vec<f64> = (0..60).map(|k| k as f64).collect();
        let sim = |u: Vec<f64>| simulate(&tf, &Input::Discrete(DiscreteInput::new(u).unwrap()), &t).unwrap();
        let mix: Vec<f64> = u1.iter().zip(&u2).map(|(x, y)| a * x + y).collect();
        let (y1, y2, y) = (sim(u1), sim(u2), sim(mix));
        for k in 0..60 {
            prop_assert!((y[k] - (a * y1[k] + y2[k])).abs() < 1e-10);
        }
    }

    #[test]
    fn continuous_simulation_is_linear(seed in 0u64..1000, a in -3.0f64..3.0) {
        let tf = example_system("example3").unwrap();
        let u1 = random_switching_input(6.0, 0.1, 0.8, seed).unwrap();
        let u2 = random_switching_input(6.0, 0.1, 0.8, seed + 1).unwrap();
        // common refinement of both breakpoint sets
        let mut bp: Vec<f64> = u1.breakpoints().iter().chain(u2.breakpoints()).copied().collect();
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        let vals: Vec<f64> = bp.windows(2).map(|w| {
            let m = 0.5 * (w[0] + w[1]);
            a * u1.at(m) + u2.at(m)
        }).collect();
        let mix = PiecewiseConstantInput::new(bp, vals).unwrap();
        let t: Vec<f64> = (1..60).map(|k| k as f64 * 0.1).collect();
        let sim = |u: PiecewiseConstantInput| simulate(&tf, &Input::PiecewiseConstant(u), &t).unwrap();
        let (y1, y2, y) = (sim(u1), sim(u2), sim(mix));
        for k in 0..t.len() {
            prop_assert!((y[k] - (a * y1[k] + y2[k])).abs() < 1e-10 * (1.0 + y[k].abs()));
        }
    }
}

#[test]
fn discrete_simulation_is_convolution() {
    let tf = dt_tf();
    let n = 500;
    let mut r = common::rng(3);
    let u: Vec<f64> = (0..n).map(|_| common::uniform(&mut r, -1.0, 1.0)).collect();
    let t: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let g = impulse_response_of(&tf, &t).unwrap();
    let y = simulate(&tf, &Input::Discrete(DiscreteInput::new(u.clone()).unwrap()), &t).unwrap();
    let c = common::convolve(&g, &u);
    for k in 0..n {
        assert!((y[k] - c[k]).abs() < 1e-10, "t={k}: {} vs {}", y[k], c[k]);
    }
}

#[test]
fn continuous_simulation_matches_rk4() {
    let tf = example_system("example3").unwrap();
    let (a, b, c, d) = tf.state_space();
    let n = b.len();
    let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    let b: Vec<f64> = b.iter().copied().collect();
    let c: Vec<f64> = c.iter().copied().collect();
    let u = random_switching_input(10.0, 0.1, 0.8, 5).unwrap();
    let times: Vec<f64> = (1..=100).map(|k| k as f64 * 0.1 - 0.003).collect();
    let exact = simulate(&tf, &Input::PiecewiseConstant(u.clone()), &times).unwrap();
    let oracle = common::rk4(&a, &b, &c, d, |t| u.at(t), &times, 2000, u.breakpoints());
    for k in 0..times.len() {
        assert!((exact[k] - oracle[k]).abs() < 1e-7, "t={}: {} vs {}", times[k], exact[k], oracle[k]);
    }
}

#[test]
fn continuous_impulse_response_by_partial_fractions() {
    let tf = RationalTF::new(Axis::Continuous, vec![2.0], vec![1.0, 3.0, 2.0]).unwrap();
    let t: Vec<f64> = (1..40).map(|k| k as f64 * 0.1).collect();
    let g = impulse_response_of(&tf, &t).unwrap();
    for (k, &tk) in t.iter().enumerate() {
        // 2/((s+1)(s+2)) = 2/(s+1) - 2/(s+2)
        let want = 2.0 * (-tk).exp() - 2.0 * (-2.0 * tk).exp();
        assert!((g[k] - want).abs() < 1e-12);
    }
}

#[test]
fn frequency_response_of_first_order_system() {
    let tf = RationalTF::new(Axis::Discrete, vec![0.0, 0.5], vec![1.0, -0.5]).unwrap();
    for &w in &[0.0, 0.3, 3.0] {
        let z = num_complex::Complex64::from_polar(1.0, w);
        let want = 0.5 / (z - 0.5);
        assert!((tf.freq_response(w) - want).norm() < 1e-14);
    }
    let inv = RationalTF::new(Axis::Discrete, vec![1.0, 0.0], vec![1.0, -0.5]).unwrap().inverse().unwrap();
    assert!((inv.freq_response(1.0) * RationalTF::new(Axis::Discrete, vec![1.0, 0.0], vec![1.0, -0.5]).unwrap().freq_response(1.0) - 1.0).norm() < 1e-14);
}

#[test]
fn experiments_are_deterministic() {
    let a = example1_dataset(150, 14.5, 7).unwrap();
    let b = example1_dataset(150, 14.5, 7).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, example1_dataset(150, 14.5, 8).unwrap());
    let clean = example1_dataset(150, f64::INFINITY, 7).unwrap();
    let t: Vec<f64> = (0..150).map(|k| k as f64).collect();
    assert_eq!(clean.outputs(), simulate(&dt_tf(), clean.input(), &t).unwrap().as_slice());
    let c = example3_dataset(50, 20.0, 1).unwrap();
    assert_eq!(c, example3_dataset(50, 20.0, 1).unwrap());
    assert_eq!(c.n_d(), 50);
}

#[test]
fn noise_hits_the_requested_snr() {
    let y: Vec<f64> = (0..20_000).map(|k| (k as f64 * 0.01).sin()).collect();
    let noisy = add_noise_snr(&y, 10.0, 1).unwrap();
    let e: Vec<f64> = noisy.iter().zip(&y).map(|(a, b)| a - b).collect();
    let snr = 10.0 * (variance(&y) / variance(&e)).log10();
    assert!((snr - 10.0).abs() < 0.2, "{snr}");
    assert!(add_noise_snr(&[1.0, 1.0], 10.0, 1).is_err());
}

#[test]
fn unstable_and_improper_systems() {
    assert!(!RationalTF::new(Axis::Discrete, vec![1.0], vec![1.0, -1.5]).unwrap().is_stable());
    assert!(!RationalTF::new(Axis::Continuous, vec![1.0], vec![1.0, -0.1]).unwrap().is_stable());
    assert!(RationalTF::new(Axis::Continuous, vec![1.0, 0.0, 0.0], vec![1.0, 1.0]).is_err());
    assert!(example_system("nope").is_err());
}
