mod common;

use freqid::functionals::*;
use freqid::kernels::KernelSpec;
use freqid::signals::{Dataset, DiscreteInput, Input, PiecewiseConstantInput};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

use common::{breaks, close, de, dt_freq_input, dt_freq_pair, dt_horizon, dt_phi_u, dt_uu, horizon, random_pwc, rng, uniform};

fn ct_input(bp: &[f64], xi: &[f64]) -> Input {
    Input::PiecewiseConstant(PiecewiseConstantInput::new(bp.to_vec(), xi.to_vec()).unwrap())
}

#[test]
fn psi_and_nu_match_quadrature() {
    let mut r = rng(1);
    for _ in 0..20 {
        let beta = uniform(&mut r, 0.3, 3.0);
        let t = uniform(&mut r, 0.0, 8.0);
        let a = uniform(&mut r, 0.0, 6.0);
        let b = a + uniform(&mut r, 0.0, 3.0);
        let got = psi(t, a, b, beta).unwrap();
        let want = common::psi(t, a, b, beta);
        assert!(close(got, want, 1e-9, 1e-12), "psi({t},{a},{b},{beta}) = {got}, oracle {want}");
        let x = uniform(&mut r, 0.0, 8.0);
        let y = uniform(&mut r, 0.0, 8.0);
        let got = nu(x, y, beta).unwrap();
        let want = common::nu(x, y, beta);
        assert!(close(got, want, 1e-9, 1e-12), "nu({x},{y},{beta}) = {got}, oracle {want}");
    }
}

#[test]
fn frequency_representer_matches_quadrature() {
    let mut r = rng(2);
    for _ in 0..20 {
        let beta = uniform(&mut r, 0.3, 3.0);
        let w = uniform(&mut r, 0.0, 10.0);
        let t = uniform(&mut r, 0.0, 8.0);
        let got = phi_omega_ct(w, t, beta);
        let (re, im) = common::phi_omega(w, t, beta);
        let scale = re.hypot(im);
        assert!(close(got.re, re, 1e-8, scale) && close(got.im, im, 1e-8, scale), "{w} {t} {beta}: {got} vs ({re}, {im})");
    }
}

#[test]
fn frequency_pairs_match_nested_quadrature() {
    let mut r = rng(3);
    for case in 0..8 {
        let beta = uniform(&mut r, 0.3, 3.0);
        let w1 = if case == 0 { 0.0 } else { uniform(&mut r, 0.0, 10.0) };
        let w2 = if case == 1 { 0.0 } else { uniform(&mut r, 0.0, 10.0) };
        let spec = KernelSpec::continuous(beta, 1.0).unwrap();
        let got = freq_pair(&spec, w1, w2);
        let want = common::freq_pair(w1, w2, beta);
        let scale = want.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(got[i][j], want[i][j], 1e-7, scale), "({w1},{w2},{beta}) [{i}][{j}]: {} vs {}", got[i][j], want[i][j]);
            }
        }
    }
}

#[test]
fn input_products_match_nested_quadrature() {
    let mut r = rng(4);
    for _ in 0..8 {
        let beta = uniform(&mut r, 0.3, 3.0);
        let (bp, xi) = random_pwc(&mut r, 4, 6.0);
        let input = ct_input(&bp, &xi);
        let spec = KernelSpec::continuous(beta, 1.0).unwrap();
        let tau1 = uniform(&mut r, 0.0, 8.0);
        let tau2 = uniform(&mut r, 0.0, 8.0);
        let w = uniform(&mut r, 0.0, 10.0);

        let got = input_input_product(&input, &spec, tau1, tau2).unwrap();
        let want = common::uu(&bp, &xi, tau1, tau2, beta);
        assert!(close(got, want, 1e-7, 1e-6), "uu({tau1},{tau2},{beta}): {got} vs {want}");

        let got = freq_input_product(&input, &spec, w, tau1).unwrap();
        let (re, im) = common::zu(&bp, &xi, w, tau1, beta);
        let scale = re.hypot(im).max(1e-6);
        assert!(close(got.re, re, 1e-7, scale) && close(got.im, im, 1e-7, scale), "zu({w},{tau1}): {got} vs ({re},{im})");
    }
}

#[test]
fn gamma_scales_every_product() {
    let (bp, xi) = (vec![0.0, 1.0, 2.5], vec![1.0, -0.5]);
    let input = ct_input(&bp, &xi);
    let k1 = KernelSpec::continuous(0.8, 1.0).unwrap();
    let k3 = KernelSpec::continuous(0.8, 3.0).unwrap();
    let a = input_input_product(&input, &k1, 1.5, 3.0).unwrap();
    let b = input_input_product(&input, &k3, 1.5, 3.0).unwrap();
    assert!((b - 3.0 * a).abs() < 1e-14 * b.abs());
    let a = freq_input_product(&input, &k1, 2.0, 3.0).unwrap();
    let b = freq_input_product(&input, &k3, 2.0, 3.0).unwrap();
    assert!((b - 3.0 * a).norm() < 1e-14 * b.norm());
    let a = freq_pair(&k1, 0.5, 1.5);
    let b = freq_pair(&k3, 0.5, 1.5);
    for i in 0..2 {
        for j in 0..2 {
            assert!((b[i][j] - 3.0 * a[i][j]).abs() <= 1e-14 * b[i][j].abs().max(1e-300));
        }
    }
}

#[test]
fn discrete_products_match_brute_force_sums() {
    let mut r = rng(5);
    for _ in 0..10 {
        let alpha = uniform(&mut r, 0.1, 0.95);
        let n = 30;
        let u: Vec<f64> = (0..n).map(|_| uniform(&mut r, -1.0, 1.0)).collect();
        let input = Input::Discrete(DiscreteInput::new(u.clone()).unwrap());
        let spec = KernelSpec::discrete(alpha, 1.0).unwrap();
        let taus: Vec<f64> = (0..n).map(|t| t as f64).collect();
        let block = input_gram_block(&input, &spec, &taus, &taus).unwrap();
        for i in 0..n {
            for j in 0..n {
                let want = dt_uu(&u, alpha, i, j);
                assert!((block[(i, j)] - want).abs() <= 1e-12 * want.abs().max(1.0), "({i},{j}): {} vs {want}", block[(i, j)]);
            }
        }
        let w = uniform(&mut r, 0.0, std::f64::consts::PI);
        for tau in [0usize, 7, 29] {
            let got = freq_input_product(&input, &spec, w, tau as f64).unwrap();
            let (re, im) = dt_freq_input(&u, alpha, w, tau);
            let scale = re.hypot(im).max(1.0);
            assert!((got.re - re).abs() < 1e-10 * scale && (got.im - im).abs() < 1e-10 * scale);
        }
    }
}

#[test]
fn discrete_frequency_pairs_match_truncated_sums() {
    for &(w1, w2, a) in &[(0.0, 0.0, 0.5), (0.3, 1.2, 0.8), (3.0, 0.0, 0.9), (1.0, 1.0, 0.95), (0.1, 3.1, 0.3)] {
        let spec = KernelSpec::discrete(a, 1.0).unwrap();
        let got = freq_pair(&spec, w1, w2);
        let want = dt_freq_pair(w1, w2, a);
        let trunc = freq_pair_dt_truncated(w1, w2, a, DEFAULT_TOL).unwrap();
        let scale = want.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..2 {
            for j in 0..2 {
                assert!((got[i][j] - want[i][j]).abs() < 1e-10 * scale, "({w1},{w2},{a}) [{i}][{j}]: {} vs {}", got[i][j], want[i][j]);
                assert!((trunc[i][j] - want[i][j]).abs() < 1e-10 * scale);
            }
        }
    }
}

#[test]
fn discrete_reproducing_consistency() {
    // ⟨φ_ω, φ_{u,τ}⟩ equals the direct transform of the values φ_{u,τ}(t).
    let u = vec![0.4, -1.0, 0.7, 0.2, -0.3, 1.1];
    let d = Dataset::new(Input::Discrete(DiscreteInput::new(u.clone()).unwrap()), vec![0.0, 3.0, 5.0], vec![0.0; 3]).unwrap();
    let alpha = 0.7;
    let spec = KernelSpec::discrete(alpha, 2.0).unwrap();
    let big = dt_horizon(alpha) + 10;
    for &tau in &[3.0, 5.0] {
        for &w in &[0.0, 0.4, 2.0, std::f64::consts::PI] {
            let mut re = 0.0;
            let mut im = 0.0;
            for t in 0..=big {
                let v = phi_u_value(&d, &spec, tau, t as f64).unwrap();
                assert!((v - 2.0 * dt_phi_u(&u, alpha, tau as usize, t)).abs() < 1e-14);
                re += v * (w * t as f64).cos();
                im -= v * (w * t as f64).sin();
            }
            let a = inner_product(&d, &spec, BasisDescriptor::FreqReal(w), BasisDescriptor::InputFunctional(tau), DEFAULT_TOL).unwrap();
            let b = inner_product(&d, &spec, BasisDescriptor::FreqImag(w), BasisDescriptor::InputFunctional(tau), DEFAULT_TOL).unwrap();
            assert!((a - re).abs() < 1e-8 && (b - im).abs() < 1e-8, "tau {tau} w {w}: ({a},{b}) vs ({re},{im})");
        }
    }
}

#[test]
fn continuous_reproducing_consistency() {
    let (bp, xi) = (vec![0.0, 0.7, 1.9, 3.0], vec![1.0, -0.4, 0.8]);
    let d = Dataset::new(ct_input(&bp, &xi), vec![1.0, 2.5, 4.0], vec![0.0; 3]).unwrap();
    let beta = 1.3;
    let spec = KernelSpec::continuous(beta, 1.0).unwrap();
    for &tau in &[1.0, 4.0] {
        for &w in &[0.0, 0.9, 5.0] {
            let pts = breaks(0.0, horizon(beta), &[tau]);
            let f = |t: f64| phi_u_value(&d, &spec, tau, t).unwrap();
            let re = de(|t| f(t) * (w * t).cos(), &pts);
            let im = de(|t| -f(t) * (w * t).sin(), &pts);
            let a = inner_product(&d, &spec, BasisDescriptor::FreqReal(w), BasisDescriptor::InputFunctional(tau), DEFAULT_TOL).unwrap();
            let b = inner_product(&d, &spec, BasisDescriptor::FreqImag(w), BasisDescriptor::InputFunctional(tau), DEFAULT_TOL).unwrap();
            assert!((a - re).abs() < 1e-8 && (b - im).abs() < 1e-8, "tau {tau} w {w}: ({a},{b}) vs ({re},{im})");
        }
    }
}

#[test]
fn imaginary_parts_vanish_at_zero_frequency() {
    let (bp, xi) = (vec![0.0, 1.0, 2.0], vec![1.0, -1.0]);
    let d = Dataset::new(ct_input(&bp, &xi), vec![0.5, 1.5, 3.0], vec![0.0; 3]).unwrap();
    let spec = KernelSpec::continuous(0.9, 1.0).unwrap();
    let zero = BasisDescriptor::FreqImag(0.0);
    for other in [BasisDescriptor::InputFunctional(1.5), BasisDescriptor::FreqReal(2.0), BasisDescriptor::FreqImag(0.7), zero] {
        assert_eq!(inner_product(&d, &spec, zero, other, DEFAULT_TOL).unwrap(), 0.0);
        assert_eq!(inner_product(&d, &spec, other, zero, DEFAULT_TOL).unwrap(), 0.0);
    }
}

#[test]
fn inner_product_rejects_foreign_times() {
    let d = Dataset::new(Input::Discrete(DiscreteInput::new(vec![1.0, 2.0]).unwrap()), vec![0.0, 1.0], vec![0.0; 2]).unwrap();
    let spec = KernelSpec::discrete(0.5, 1.0).unwrap();
    let a = BasisDescriptor::InputFunctional(4.0);
    assert!(inner_product(&d, &spec, a, a, DEFAULT_TOL).is_err());
    let ct = KernelSpec::continuous(0.5, 1.0).unwrap();
    let b = BasisDescriptor::InputFunctional(1.0);
    assert!(inner_product(&d, &ct, b, b, DEFAULT_TOL).is_err());
}

fn descriptors(taus: &[f64], omegas: &[f64]) -> Vec<BasisDescriptor> {
    let mut v: Vec<BasisDescriptor> = taus.iter().map(|&t| BasisDescriptor::InputFunctional(t)).collect();
    for &w in omegas {
        v.push(BasisDescriptor::FreqReal(w));
        v.push(BasisDescriptor::FreqImag(w));
    }
    v
}

fn min_eig_ok(phi: &nalgebra::DMatrix<f64>) -> bool {
    let tr = phi.trace();
    let e = SymmetricEigen::new(phi.clone()).eigenvalues;
    e.min() >= -1e-8 * tr
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn discrete_gram_is_symmetric_psd(
        alpha in 0.05f64..0.97,
        u in prop::collection::vec(-2.0f64..2.0, 1..25),
        omegas in prop::collection::vec(0.0f64..std::f64::consts::PI, 0..6),
    ) {
        let n = u.len();
        let taus: Vec<f64> = (0..n).map(|t| t as f64).collect();
        let d = Dataset::new(Input::Discrete(DiscreteInput::new(u).unwrap()), taus.clone(), vec![0.0; n]).unwrap();
        let spec = KernelSpec::discrete(alpha, 1.0).unwrap();
        let phi = gram_matrix(&d, &spec, &descriptors(&taus, &omegas)).unwrap();
        prop_assert!(phi == phi.transpose());
        prop_assert!(min_eig_ok(&phi));
    }

    #[test]
    fn continuous_gram_is_symmetric_psd(
        beta in 0.2f64..4.0,
        seed in 0u64..1000,
        n_seg in 1usize..6,
        taus in prop::collection::btree_set(1u32..80, 1..12),
        omegas in prop::collection::vec(0.0f64..20.0, 0..5),
    ) {
        let mut r = rng(seed);
        let (bp, xi) = random_pwc(&mut r, n_seg, 5.0);
        let taus: Vec<f64> = taus.into_iter().map(|t| t as f64 * 0.1).collect();
        let n = taus.len();
        let d = Dataset::new(ct_input(&bp, &xi), taus.clone(), vec![0.0; n]).unwrap();
        let spec = KernelSpec::continuous(beta, 1.0).unwrap();
        let phi = gram_matrix(&d, &spec, &descriptors(&taus, &omegas)).unwrap();
        prop_assert!(phi == phi.transpose());
        let block = input_gram_block(d.input(), &spec, &taus, &taus).unwrap();
        for i in 0..n {
            for j in 0..n {
                let single = input_input_product(d.input(), &spec, taus[i], taus[j]).unwrap();
                let scale = (block[(i, i)] * block[(j, j)]).sqrt();
                prop_assert!((block[(i, j)] - single).abs() <= 1e-12 * scale + 1e-15, "{} vs {} scale {}", block[(i, j)], single, scale);
            }
        }
        prop_assert!(min_eig_ok(&phi));
    }
}
