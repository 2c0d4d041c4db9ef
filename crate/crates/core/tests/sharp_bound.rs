//! The tilted Berry-Esseen lower bound against exact binomial tails.

use spherepack::sharp::{slb_bound, slb_bound_grouped, solve_eta, FiniteSupportRv};

/// `log P(Bin(n,p) >= k)`.
fn log_binomial_tail(n: usize, p: f64, k: usize) -> f64 {
    let mut lf = vec![0.0f64; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    let terms: Vec<f64> =
        (k..=n).map(|j| lf[n] - lf[j] - lf[n - j] + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[test]
fn condition_fails_at_desk_scale_for_bernoulli() {
    let rv = FiniteSupportRv::bernoulli(0.3).unwrap();
    for n in [100, 300, 1000, 2000, 100_000] {
        let r = slb_bound_grouped(&[(rv.clone(), n)], 0.5).unwrap();
        assert!(!r.condition_ok, "n = {n}");
        assert_eq!(r.bound, 0.0);
        // The formula itself still sits below the exact tail.
        assert!(r.log_formula <= log_binomial_tail(n, 0.3, n / 2));
    }
}

#[test]
fn sound_where_the_condition_holds() {
    let rv = FiniteSupportRv::bernoulli(0.3).unwrap();
    for n in [700_000usize, 1_000_000] {
        let r = slb_bound_grouped(&[(rv.clone(), n)], 0.5).unwrap();
        assert!(r.condition_ok, "m2 = {}, K = {}", r.m2n, r.kn);
        let exact = log_binomial_tail(n, 0.3, n / 2);
        assert!(r.bound > 0.0 || r.log_formula < -700.0);
        assert!(r.log_formula <= exact, "n = {n}: {} vs {exact}", r.log_formula);
    }
}

#[test]
fn non_identical_variables() {
    // n copies of Ber(0.2) plus n of Ber(0.4); exact tail by convolution.
    let a = FiniteSupportRv::bernoulli(0.2).unwrap();
    let b = FiniteSupportRv::bernoulli(0.4).unwrap();
    let n = 200;
    let q = 0.45;
    let r = slb_bound_grouped(&[(a.clone(), n), (b.clone(), n)], q).unwrap();
    let pmf = |p: f64| -> Vec<f64> {
        let mut v = vec![0.0f64; n + 1];
        v[0] = 1.0;
        for _ in 0..n {
            for j in (1..=n).rev() {
                v[j] = v[j] * (1.0 - p) + v[j - 1] * p;
            }
            v[0] *= 1.0 - p;
        }
        v
    };
    let (pa, pb) = (pmf(0.2), pmf(0.4));
    let k = (q * 2.0 * n as f64).ceil() as usize;
    let mut tail = 0.0;
    for (i, x) in pa.iter().enumerate() {
        for (j, y) in pb.iter().enumerate() {
            if i + j >= k {
                tail += x * y;
            }
        }
    }
    assert!(r.log_formula <= tail.ln());
    let eta = solve_eta(&[(a.clone(), n), (b.clone(), n)], q).unwrap();
    assert!((r.eta - eta).abs() < 1e-15);
    // Flat input gives the same answer.
    let mut flat = vec![a; n];
    flat.extend(vec![b; n]);
    let s = slb_bound(&flat, q).unwrap();
    assert!((s.log_formula - r.log_formula).abs() < 1e-9);
}
