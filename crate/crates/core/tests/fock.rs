use diodeq::fock::*;
use diodeq::{seeded_rng, Error};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

const TAU: f64 = std::f64::consts::TAU;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `1 − |⟨a|b⟩|` for normalised states; insensitive to global phase.
fn infidelity(a: &FockState, b: &FockState) -> f64 {
    1.0 - a.inner(b).unwrap().norm()
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

#[test]
fn ladder_identities() {
    let l = ladder_matrices(12).unwrap();
    let vac = FockState::vacuum(12);
    assert_eq!((&l.a * &vac.amplitudes).norm(), 0.0);
    let num = &l.ad * &l.a;
    for n in 0..12 {
        assert!((num[(n, n)].re - n as f64).abs() < 1e-14);
    }
    // [x, p] = 2i away from the truncation edge
    let comm = &l.x * &l.p - &l.p * &l.x;
    for r in 0..11 {
        for c in 0..11 {
            let want = if r == c { cx(0.0, 2.0) } else { cx(0.0, 0.0) };
            assert!((comm[(r, c)] - want).norm() < 1e-13);
        }
    }
    assert!(matches!(ladder_matrices(1), Err(Error::InvalidArgument(_))));
}

#[test]
fn coherent_amplitudes_closed_form() {
    let s = FockSpace::new(DEFAULT_CUTOFF).unwrap();
    let alpha = cx(0.5, 0.0);
    let st = s.apply_displacement(&s.vacuum(), alpha).unwrap();
    for n in 0..=10 {
        let want = (-alpha.norm_sqr() / 2.0).exp() * alpha.powu(n as u32) / factorial(n).sqrt();
        assert!((st.amplitudes[n] - want).norm() < 1e-10, "n = {n}");
    }
    // complex α, checked against the same expansion
    let alpha = cx(-0.4, 0.7);
    let st = s.apply_displacement(&s.vacuum(), alpha).unwrap();
    for n in 0..=10 {
        let want = (-alpha.norm_sqr() / 2.0).exp() * alpha.powu(n as u32) / factorial(n).sqrt();
        assert!((st.amplitudes[n] - want).norm() < 1e-10, "n = {n}");
    }
}

#[test]
fn squeezed_vacuum_variance() {
    // truncation at 18 levels shifts Var(x) by about 1e-5 for r = 0.5
    let s = FockSpace::new(30).unwrap();
    for r in [0.2, 0.5] {
        let st = s.apply_squeezing(&s.vacuum(), r, 0.0).unwrap();
        let v = s.variance(&st, Observable::X).unwrap();
        assert!((v - (-2.0 * r).exp()).abs() < 1e-6, "r = {r}: {v}");
        let vp = s.variance(&st, Observable::P).unwrap();
        assert!((vp - (2.0 * r).exp()).abs() < 1e-6);
    }
}

#[test]
fn expectation_examples() {
    let s = FockSpace::new(DEFAULT_CUTOFF).unwrap();
    let vac = s.vacuum();
    assert_eq!(s.expectation(&vac, Observable::X).unwrap(), 0.0);
    assert_eq!(s.expectation(&vac, Observable::Identity).unwrap(), 1.0);
    let st = s.apply_displacement(&vac, cx(0.5, 0.3)).unwrap();
    assert!((s.expectation(&st, Observable::X).unwrap() - 1.0).abs() < 1e-8);
    assert!((s.expectation(&st, Observable::P).unwrap() - 0.6).abs() < 1e-8);
    assert!((s.expectation(&st, Observable::N).unwrap() - 0.34).abs() < 1e-8);
}

#[test]
fn encoding_state_expectations() {
    let s = FockSpace::new(40).unwrap();
    let st = s.prepare_displaced_squeezed(cx(-1.0, 0.0), 0.8, 0.0).unwrap();
    assert!((s.expectation(&st, Observable::X).unwrap() + 2.0).abs() < 1e-6);
    assert!(s.expectation(&st, Observable::P).unwrap().abs() < 1e-12);
    let v = s.prepare_displaced_squeezed(cx(0.0, 0.0), 0.0, 0.0).unwrap();
    assert_eq!(v, s.vacuum());
}

#[test]
fn inverse_pairs() {
    // 1e-9 needs the intermediate leak far below the default tolerance
    let s = FockSpace::new(30).unwrap();
    let mut rng = seeded_rng(5);
    for _ in 0..20 {
        let start = s
            .prepare_displaced_squeezed(cx(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)), 0.1, 0.3)
            .unwrap();
        let a = cx(rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7));
        let r = rng.random_range(0.0..0.3);
        let th = rng.random_range(0.0..TAU);
        let phi = rng.random_range(-3.0..3.0);
        let k = rng.random_range(-1.0..1.0);
        let pairs: [(Gate, Gate); 4] = [
            (Gate::Displace { re: a.re, im: a.im }, Gate::Displace { re: -a.re, im: -a.im }),
            (Gate::Squeeze { r, theta: th }, Gate::Squeeze { r, theta: th + std::f64::consts::PI }),
            (Gate::Rotation { phi }, Gate::Rotation { phi: -phi }),
            (Gate::Kerr { kappa: k }, Gate::Kerr { kappa: -k }),
        ];
        for (g, inv) in pairs {
            let (mid, leak) = s.apply_with_leak(&start, &g).unwrap();
            assert!(leak < 1e-10);
            let (back, _) = s.apply_with_leak(&mid, &inv).unwrap();
            assert!(infidelity(&start, &back) < 1e-9, "{g:?}: {}", infidelity(&start, &back));
        }
    }
}

#[test]
fn diagonal_gates() {
    let s = FockSpace::new(DEFAULT_CUTOFF).unwrap();
    let st = s.prepare_displaced_squeezed(cx(0.6, -0.2), 0.2, 1.0).unwrap();
    let k = s.apply_kerr(&st, 0.77).unwrap();
    let r = s.apply_rotation(&st, 1.3).unwrap();
    for ((a, b), c) in st.photon_distribution().iter().zip(k.photon_distribution()).zip(r.photon_distribution()) {
        assert!((a - b).abs() < 1e-15 && (a - c).abs() < 1e-15);
    }
    let full = s.apply_rotation(&st, TAU).unwrap();
    assert!((&full.amplitudes - &st.amplitudes).norm() < 1e-12);
}

#[test]
fn leak_is_reported_and_enforced() {
    let s = FockSpace::new(6).unwrap();
    match s.apply_displacement(&s.vacuum(), cx(2.0, 0.0)) {
        Err(Error::Truncation { leak, tolerance }) => {
            assert!(leak > tolerance);
            // coherent tail beyond 6 levels
            let tail: f64 = 1.0 - (0..6).map(|n| (-4.0f64).exp() * 4f64.powi(n as i32) / factorial(n)).sum::<f64>();
            assert!((leak - tail).abs() < 1e-3 * tail);
        }
        other => panic!("expected truncation error, got {other:?}"),
    }
    let relaxed = FockSpace::new(6).unwrap().with_leak_tolerance(0.5);
    assert!(relaxed.apply_displacement(&relaxed.vacuum(), cx(2.0, 0.0)).is_ok());
}

#[test]
fn leak_monotone_in_parameters() {
    let s = FockSpace::new(DEFAULT_CUTOFF).unwrap();
    let mut prev = -1.0;
    for i in 0..=20 {
        let a = 0.15 * i as f64;
        let (_, leak) = s.apply_with_leak(&s.vacuum(), &Gate::Displace { re: a, im: 0.0 }).unwrap();
        // below ~1e-13 the leak is expm rounding noise
        assert!(leak >= prev - 1e-13, "|α| = {a}");
        prev = leak;
    }
    let mut prev = -1.0;
    for i in 0..=20 {
        let r = 0.075 * i as f64;
        let (_, leak) = s.apply_with_leak(&s.vacuum(), &Gate::Squeeze { r, theta: 0.0 }).unwrap();
        assert!(leak >= prev - 1e-13, "r = {r}");
        prev = leak;
    }
}

#[test]
fn cubic_gate_is_unitary_when_small() {
    let s = FockSpace::new(DEFAULT_CUTOFF).unwrap();
    let st = s.apply_displacement(&s.vacuum(), cx(0.3, 0.0)).unwrap();
    let (out, leak) = s.apply_with_leak(&st, &Gate::Cubic { gamma: 0.05 }).unwrap();
    assert!(leak.abs() < 1e-6);
    let (back, _) = s.apply_with_leak(&out, &Gate::Cubic { gamma: -0.05 }).unwrap();
    assert!(infidelity(&st, &back) < 1e-9);
}

#[test]
fn invalid_gate_parameters() {
    let s = FockSpace::new(8).unwrap();
    assert!(matches!(s.apply_squeezing(&s.vacuum(), -0.1, 0.0), Err(Error::Domain(_))));
    assert!(matches!(s.apply_rotation(&s.vacuum(), f64::NAN), Err(Error::Domain(_))));
    assert!(s.apply_rotation(&FockState::vacuum(5), 0.1).is_err());
}

#[test]
fn vacuum_wigner_normalised_and_positive() {
    let vac = FockState::vacuum(DEFAULT_CUTOFF);
    let g = grid(-6.0, 6.0, 0.1);
    let w = wigner(&vac, &g, &g);
    assert!((w.integral() - 1.0).abs() < 1e-3, "{}", w.integral());
    assert!(w.min() >= 0.0);
    let c = g.len() / 2;
    assert_eq!(w.max(), w.values[(c, c)]);
    assert!((w.x_variance() - 1.0).abs() < 1e-3);
    assert!((w.p_variance() - 1.0).abs() < 1e-3);
}

#[test]
fn squeezed_wigner_marginals() {
    let r: f64 = 0.8;
    let s = FockSpace::new(40).unwrap().with_leak_tolerance(1e-6);
    let st = s.apply_squeezing(&s.vacuum(), r, 0.0).unwrap();
    let xs = grid(-4.0, 4.0, 0.1);
    let ps = grid(-12.0, 12.0, 0.1);
    let w = wigner(&st, &xs, &ps);
    assert!((w.x_variance() - (-2.0 * r).exp()).abs() < 1e-3, "{}", w.x_variance());
    assert!((w.p_variance() / (2.0 * r).exp() - 1.0).abs() < 1e-3, "{}", w.p_variance());
}

#[test]
fn kerr_produces_negativity() {
    let s = FockSpace::new(DEFAULT_CUTOFF).unwrap();
    let coh = s.apply_displacement(&s.vacuum(), cx(1.0, 0.0)).unwrap();
    let g: Vec<f64> = (0..60).map(|i| -5.0 + 10.0 * i as f64 / 59.0).collect();
    assert!(wigner(&coh, &g, &g).min() > -1e-10);
    let k = s.apply_kerr(&coh, 1.0).unwrap();
    let w = wigner(&k, &g, &g);
    assert!(w.min() < -1e-3, "min {}", w.min());
}

#[test]
fn wigner_outputs() {
    let g = grid(-1.0, 1.0, 1.0);
    let w = wigner(&FockState::vacuum(4), &g, &g);
    let mut buf = Vec::new();
    write_wigner_csv(&w, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("x,p,W\n"));
    assert_eq!(text.lines().count(), 10);
    let svg = wigner_svg(&w, 4);
    assert_eq!(svg.matches("<rect").count(), 9);
}

#[test]
fn analytic_overlap_matches_fock() {
    let s = FockSpace::new(30).unwrap().with_leak_tolerance(1e-4);
    let mut rng = seeded_rng(12);
    let mut draw = || {
        let (m, ph) = (rng.random_range(0.0..1.0), rng.random_range(0.0..TAU));
        DisplacedSqueezedParams::new(Complex64::from_polar(m, ph), rng.random_range(0.0..0.8), rng.random_range(0.0..TAU))
    };
    for _ in 0..25 {
        let (a, b) = (draw(), draw());
        let sa = s.prepare_displaced_squeezed(a.alpha, a.r, a.theta).unwrap();
        let sb = s.prepare_displaced_squeezed(b.alpha, b.r, b.theta).unwrap();
        let fock = sa.inner(&sb).unwrap().norm_sqr();
        let analytic = overlap_analytic(&a, &b).unwrap().norm_sqr();
        assert!((fock - analytic).abs() < 1e-6, "{a:?} {b:?}: {fock} vs {analytic}");
    }
}

#[test]
fn overlap_special_cases() {
    let p = DisplacedSqueezedParams::new(cx(0.4, -0.2), 0.5, 0.7);
    assert!((overlap_analytic(&p, &p).unwrap().norm() - 1.0).abs() < 1e-12);
    assert!(kernel_distance(&p, &p).unwrap() < 1e-6);
    let (a, b) = (cx(0.9, 0.1), cx(-0.3, 0.5));
    let o = overlap_analytic(&DisplacedSqueezedParams::coherent(a), &DisplacedSqueezedParams::coherent(b)).unwrap();
    assert!((o.norm_sqr() - (-(a - b).norm_sqr()).exp()).abs() < 1e-14);
    let d = kernel_distance(&DisplacedSqueezedParams::coherent(a), &DisplacedSqueezedParams::coherent(b)).unwrap();
    assert!((d - (2.0 * (1.0 - (-(a - b).norm_sqr()).exp())).sqrt()).abs() < 1e-12);
    assert!(matches!(overlap_eq12(a, cx(1.0, 0.0), b, cx(0.0, 0.0)), Err(Error::Domain(_))));
}

#[test]
fn state_json_round_trip() {
    let s = FockSpace::new(6).unwrap();
    let st = s.apply_displacement(&s.vacuum(), cx(0.2, 0.1)).unwrap();
    let v = serde_json::to_value(&st).unwrap();
    assert_eq!(v["cutoff"], 6);
    let back: FockState = serde_json::from_value(v).unwrap();
    assert_eq!(back, st);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn norm_never_grows(re in -1.5f64..1.5, im in -1.5f64..1.5, r in 0.0f64..1.0, th in 0.0f64..TAU, k in -2.0f64..2.0) {
        let s = FockSpace::new(DEFAULT_CUTOFF).unwrap();
        let mut st = s.vacuum();
        for g in [Gate::Squeeze { r, theta: th }, Gate::Displace { re, im }, Gate::Kerr { kappa: k }, Gate::Rotation { phi: th }] {
            let (next, leak) = s.apply_with_leak(&st, &g).unwrap();
            prop_assert!(next.norm_sqr() <= 1.0 + 1e-9);
            prop_assert!(leak >= -1e-12);
            st = next;
        }
    }

    #[test]
    fn diagonal_gates_keep_distribution(re in -1.0f64..1.0, phi in -10.0f64..10.0, k in -3.0f64..3.0) {
        let s = FockSpace::new(DEFAULT_CUTOFF).unwrap();
        let st = s.apply_displacement(&s.vacuum(), cx(re, 0.3)).unwrap();
        let out = s.apply_kerr(&s.apply_rotation(&st, phi).unwrap(), k).unwrap();
        for (a, b) in st.photon_distribution().iter().zip(out.photon_distribution()) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn displacement_inverse(re in -1.0f64..1.0, im in -1.0f64..1.0) {
        prop_assume!(re * re + im * im <= 1.0);
        let s = FockSpace::new(DEFAULT_CUTOFF).unwrap();
        let st = s.apply_displacement(&s.vacuum(), cx(re, im)).unwrap();
        let back = s.apply_displacement(&st, cx(-re, -im)).unwrap();
        prop_assert!(infidelity(&s.vacuum(), &back) < 1e-9);
    }
}
