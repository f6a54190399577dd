use epsmc::eps::*;
use epsmc::Error;
use proptest::prelude::*;

fn binomial_se(p: f64, h: u64) -> f64 {
    (p * (1.0 - p) / h as f64).sqrt()
}

#[test]
fn swap_matrix_examples() {
    let m = swap_matrix(0.0, 0.3).unwrap();
    assert_eq!(m.entries(), [[1.0, 0.0], [0.0, 1.0]]);
    let m = swap_matrix(2.0, 0.5).unwrap();
    assert_eq!(m.entries(), [[0.0, 1.0], [1.0, 0.0]]);
    match swap_matrix(1.5, 0.9) {
        Err(Error::SwapConstraint(msg)) => assert!(msg.contains("gv"), "{msg}"),
        other => panic!("expected a constraint error, got {other:?}"),
    }
    match swap_matrix(1.5, 0.1) {
        Err(Error::SwapConstraint(msg)) => assert!(msg.contains("g(1-v)"), "{msg}"),
        other => panic!("expected a constraint error, got {other:?}"),
    }
    assert!(swap_matrix(2.1, 0.5).is_err());
    assert!(swap_matrix(1.0, -0.1).is_err());
}

#[test]
fn valid_intervals() {
    assert_eq!(valid_v_interval(0.5).unwrap(), Interval { lo: 0.0, hi: 1.0 });
    let i = valid_v_interval(2.0).unwrap();
    assert_eq!((i.lo, i.hi), (0.5, 0.5));
    let i = valid_v_interval(1.25).unwrap();
    assert!((i.lo - 0.2).abs() < 1e-15 && (i.hi - 0.8).abs() < 1e-15);
    assert!(valid_v_interval(-0.1).is_err());
    assert!(valid_v_interval(2.5).is_err());
}

#[test]
fn apply_examples() {
    let p = EpsPair::probability(0.7, 0.3).unwrap();
    let q = apply(&swap_matrix(2.0, 0.5).unwrap(), &p);
    assert_eq!((q.p0, q.p1), (0.3, 0.7));
    let q = apply(&swap_matrix(1.0, 0.5).unwrap(), &EpsPair::probability(0.9, 0.1).unwrap());
    assert!((q.p0 - 0.5).abs() < 1e-15 && (q.p1 - 0.5).abs() < 1e-15);
}

#[test]
fn product_with_identity_and_exchange() {
    let h = 100_000;
    let e = simulate_product(1.0, 0.3, 0.5, h, 11).unwrap();
    assert!(e.z_score(0.3).abs() < 4.0, "{e:?}");
    let e = simulate_product(-1.0, 0.3, 0.5, h, 12).unwrap();
    assert!(e.z_score(-0.3).abs() < 4.0, "{e:?}");
    assert_eq!(e.counts[0] + e.counts[1], h);
}

#[test]
fn chain_examples() {
    let spec = ChainSpec::new(vec![1.0, 1.0, 1.0], 0.4, 0.5).unwrap();
    assert!((spec.expected_excess() - 0.4).abs() < 1e-15);
    let spec = ChainSpec::new(vec![0.8, 0.0, -0.7], 0.4, 0.5).unwrap();
    assert!(spec.expected_excess().abs() < 1e-15);

    let spec = ChainSpec::new(vec![0.5, 0.5], 0.4, 0.5).unwrap();
    let h = 1_000_000;
    let e = simulate_chain(&spec, h, 3).unwrap();
    let p0 = spec.final_distribution().p0;
    let se = binomial_se(p0, h);
    assert!((e.value - 0.1).abs() < 3.0 * se, "{} vs 0.1 (se {se})", e.value);
}

#[test]
fn cancellation_examples() {
    let (k, w, v) = (0.6, 0.4, 0.5);
    let h = 1_000_000;
    let c = simulate_cancellation(k, w, v, h, 5).unwrap();
    assert!(c.total.z_score(0.0).abs() < 3.0, "{:?}", c.total);
    // branch state-0 counts: (s + v) H / 2 and (v - s) H / 2
    let s = k * w;
    for (count, p) in [(c.plus[0], (s + v) / 2.0), (c.minus[0], (v - s) / 2.0)] {
        let sd = (h as f64 * p * (1.0 - p)).sqrt();
        assert!((count as f64 - p * h as f64).abs() < 4.0 * sd, "{count} vs {}", p * h as f64);
    }
    assert_eq!(c.plus.iter().chain(&c.minus).sum::<u64>(), h);

    let c = simulate_cancellation(1.0, 0.5, 0.5, 10_000, 6).unwrap();
    assert!(c.total.z_score(0.0).abs() < 3.0);
}

#[test]
fn cancellation_has_zero_exact_expectation() {
    for &(k, w, v) in &[(0.6, 0.4, 0.5), (-0.3, 0.2, 0.45), (1.0, 0.5, 0.5), (0.0, -0.3, 0.6)] {
        let plus = ChainSpec::new(vec![k], w, v).unwrap().expected_excess();
        let minus = ChainSpec::new(vec![k], -w, v).unwrap().expected_excess();
        assert!((0.5 * plus + 0.5 * minus).abs() < 1e-12);
    }
}

#[test]
fn zero_histories_rejected() {
    let err = simulate_product(0.5, 0.1, 0.5, 0, 1).unwrap_err();
    assert!(err.to_string().contains("histories must be >= 1"));
}

#[test]
fn variance_grows_with_chain_length() {
    // binomial variance rises as the final distribution contracts toward V
    let k = 0.7;
    let h = 200_000;
    let mut prev = 0.0;
    for len in 1..=5 {
        let spec = ChainSpec::new(vec![k; len], 0.4, 0.5).unwrap();
        let mut se = 0.0;
        for seed in 0..4 {
            se += simulate_chain(&spec, h, seed).unwrap().std_error / 4.0;
        }
        assert!(se >= prev, "standard error fell at length {len}: {se} < {prev}");
        prev = se;
    }
}

fn valid_gv() -> impl Strategy<Value = (f64, f64)> {
    (0.0..=2.0f64, 0.0..=1.0f64).prop_map(|(g, t)| {
        let i = valid_v_interval(g).unwrap();
        (g, i.lo + t * (i.hi - i.lo))
    })
}

proptest! {
    #[test]
    fn columns_sum_to_one_and_reference_is_fixed((g, v) in valid_gv()) {
        let m = swap_matrix(g, v).unwrap();
        let e = m.entries();
        prop_assert_eq!(e[0][0] + e[1][0], 1.0);
        prop_assert_eq!(e[0][1] + e[1][1], 1.0);
        for x in e.iter().flatten() {
            prop_assert!((0.0..=1.0).contains(x));
        }
        let r = m.apply(&EpsPair::reference(v).unwrap());
        prop_assert!((r.p0 - v).abs() <= 1e-12 && (r.p1 - (1.0 - v)).abs() <= 1e-12);
    }

    #[test]
    fn excess_scales_by_k((g, v) in valid_gv(), t in 0.0..=1.0f64) {
        let p = EpsPair::probability(t, 1.0 - t).unwrap();
        let q = swap_matrix(g, v).unwrap().apply(&p);
        prop_assert!((q.excess(v) - (1.0 - g) * p.excess(v)).abs() <= 1e-12);
    }

    #[test]
    fn chain_expectation_is_product(ks in prop::collection::vec(-1.0..=1.0f64, 0..=6), w in -0.5..=0.5f64) {
        let spec = ChainSpec::new(ks.clone(), w, 0.5).unwrap();
        let product: f64 = ks.iter().product::<f64>() * w;
        prop_assert!((spec.expected_excess() - product).abs() <= 1e-12);
    }
}
