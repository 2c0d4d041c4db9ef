//! The exact trade-off against brute-force enumeration of output strings.

mod common;

use rand::Rng;
use spherepack::np::{alpha_star, build_loglr_law, threshold_test_alpha_beta, LogLrLaw, ATOM_CAP};
use spherepack::saddle::saddle_point;
use spherepack::study::{bsc_n_star, exact_alpha_star};
use spherepack::{Channel, ChannelModel, Distribution};

fn log_sum_exp(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn random_letter(rng: &mut impl Rng, ny: usize) -> Distribution {
    let mut v: Vec<f64> = (0..ny).map(|_| rng.gen_range(0.05..1.0)).collect();
    if rng.gen_bool(0.5) {
        let y = rng.gen_range(0..ny);
        v[y] = 0.0;
    }
    Distribution::from_weights(v).unwrap()
}

fn grouped(letters: &[(Distribution, Distribution)]) -> Vec<(Distribution, Distribution, usize)> {
    letters.iter().map(|(a, b)| (a.clone(), b.clone(), 1)).collect()
}

#[test]
fn law_matches_enumeration_for_short_blocks() {
    let mut rng = common::rng(21);
    for case in 0..10 {
        let ny = 2 + case % 2;
        // Two channels on a binary input alphabet and a random codeword.
        let w: Vec<Distribution> = (0..2).map(|_| random_letter(&mut rng, ny)).collect();
        let v: Vec<Distribution> = (0..2).map(|_| random_letter(&mut rng, ny)).collect();
        for n in 1..=5 {
            let letters: Vec<(Distribution, Distribution)> = (0..n)
                .map(|_| {
                    let x = rng.gen_range(0..2);
                    (w[x].clone(), v[x].clone())
                })
                .collect();
            let law = match build_loglr_law(&grouped(&letters), ATOM_CAP) {
                Ok(l) => l,
                Err(e) => panic!("{e}"),
            };
            let (atoms, null_only, alt_only) = common::brute_law(&letters);
            assert_eq!(law.atoms().len(), atoms.len(), "case {case}, N = {n}");
            for (a, (t, p)) in law.atoms().iter().zip(&atoms) {
                assert!((a.t - t).abs() < 1e-12, "{} vs {t}", a.t);
                assert!((a.log_null.exp() - p).abs() < 1e-14 * p.max(1.0));
            }
            assert!((law.null_only() - null_only).abs() < 1e-14);
            assert!((law.alt_only() - alt_only).abs() < 1e-14);
        }
    }
}

#[test]
fn grouping_letters_does_not_change_the_law() {
    let mut rng = common::rng(4);
    let a = random_letter(&mut rng, 3);
    let b = random_letter(&mut rng, 3);
    let c = random_letter(&mut rng, 3);
    let flat = vec![(a.clone(), b.clone()), (c.clone(), b.clone()), (a.clone(), b.clone()), (a.clone(), b.clone())];
    let x = build_loglr_law(&grouped(&flat), ATOM_CAP).unwrap();
    let y = build_loglr_law(&[(a, b.clone(), 3), (c, b, 1)], ATOM_CAP).unwrap();
    assert_eq!(x.atoms().len(), y.atoms().len());
    for (p, q) in x.atoms().iter().zip(y.atoms()) {
        assert!((p.t - q.t).abs() < 1e-12 && (p.log_null - q.log_null).abs() < 1e-12);
    }
}

fn masses(law: &LogLrLaw) -> (f64, f64) {
    let null = log_sum_exp(law.atoms().iter().map(|a| a.log_null)).exp() + law.null_only();
    let alt = log_sum_exp(law.atoms().iter().map(|a| a.log_null + a.t)).exp() + law.alt_only();
    (null, alt)
}

#[test]
fn deep_convolutions_keep_both_masses() {
    let mut rng = common::rng(8);
    for _ in 0..5 {
        let letters: Vec<(Distribution, Distribution, usize)> =
            (0..3).map(|_| (random_letter(&mut rng, 3), random_letter(&mut rng, 3), rng.gen_range(5..15))).collect();
        let law = build_loglr_law(&letters, ATOM_CAP).unwrap();
        let (null, alt) = masses(&law);
        assert!((null - 1.0).abs() < 1e-10, "{null}");
        assert!((alt - 1.0).abs() < 1e-10, "{alt}");
    }
}

#[test]
fn atom_cap_is_enforced() {
    let mut rng = common::rng(8);
    let letters: Vec<(Distribution, Distribution, usize)> =
        (0..3).map(|_| (random_letter(&mut rng, 3), random_letter(&mut rng, 3), 40)).collect();
    assert!(matches!(build_loglr_law(&letters, 10_000), Err(spherepack::Error::AtomLimit { .. })));
}

#[test]
fn bsc_law_reproduces_the_binomial_formula() {
    let w = Channel::bsc(0.1).unwrap();
    let u = Distribution::uniform(2);
    for (n, rate) in [(10usize, 0.3), (20, 0.2), (20, 0.45), (64, 0.2)] {
        let (_, log_alpha) = bsc_n_star(0.1, n, rate);
        let (alpha, la) = exact_alpha_star(&w, &u, &[n, 0], rate).unwrap();
        assert!((la - log_alpha).abs() < 1e-10, "N = {n}: {la} vs {log_alpha}");
        assert!((alpha - log_alpha.exp()).abs() <= 1e-12 * alpha);
    }
}

#[test]
fn no_threshold_test_beats_alpha_star() {
    let mut rng = common::rng(13);
    let letters: Vec<(Distribution, Distribution, usize)> =
        (0..2).map(|_| (random_letter(&mut rng, 3), random_letter(&mut rng, 3), 6)).collect();
    let law = build_loglr_law(&letters, ATOM_CAP).unwrap();
    let atoms = law.atoms();
    for i in 0..50 {
        let r = 0.05 + 8.0 * i as f64 / 49.0;
        let best = alpha_star(&law, r);
        let mut acc_alt = 0.0;
        for k in 0..=atoms.len() {
            if k > 0 {
                acc_alt += (atoms[k - 1].log_null + atoms[k - 1].t).exp();
            }
            if acc_alt <= (-r).exp() {
                let alpha: f64 = atoms[k..].iter().map(|a| a.log_null.exp()).sum();
                assert!(alpha >= best.alpha * (1.0 - 1e-12) - 1e-300, "r = {r}, k = {k}");
            }
        }
        assert!(best.alpha_relaxed <= best.alpha && best.beta <= (-r).exp() * (1.0 + 1e-12));
    }
}

#[test]
fn relaxed_alpha_bounds_every_deterministic_test() {
    let mut rng = common::rng(17);
    for _ in 0..5 {
        let letters: Vec<(Distribution, Distribution)> =
            (0..3).map(|_| (random_letter(&mut rng, 2), random_letter(&mut rng, 2))).collect();
        let strings = common::enumerate(&letters);
        let law = build_loglr_law(&grouped(&letters), ATOM_CAP).unwrap();
        for r in [0.2, 0.7, 1.5] {
            let bound = alpha_star(&law, r).alpha_relaxed;
            for mask in 0u32..(1 << strings.len()) {
                let (mut alpha, mut beta) = (0.0, 0.0);
                for (i, s) in strings.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        beta += s.1;
                    } else {
                        alpha += s.0;
                    }
                }
                if beta <= (-r).exp() {
                    assert!(alpha >= bound - 1e-14, "r = {r}: {alpha} < {bound}");
                }
            }
        }
    }
}

#[test]
fn code_error_dominates_alpha_star() {
    // Any code with M >= e^(NR) messages has a message whose decision
    // region has Q-mass at most e^(-NR); its error is at least alpha*.
    let mut rng = common::rng(29);
    let model = ChannelModel::new(Channel::z_channel(0.3).unwrap()).unwrap();
    let w = model.channel();
    for _ in 0..8 {
        let n = rng.gen_range(2..=4);
        let rate = 0.2;
        let m = (n as f64 * rate).exp().ceil() as usize;
        let codebook: Vec<Vec<usize>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..2)).collect()).collect();
        let ys: Vec<Vec<usize>> = (0..1usize << n).map(|b| (0..n).map(|i| (b >> i) & 1).collect()).collect();
        // Random decoder.
        let region: Vec<usize> = ys.iter().map(|_| rng.gen_range(0..m)).collect();
        let q = saddle_point(&model, rate, &Distribution::uniform(2)).unwrap().q_star;
        let mut checked = 0;
        for (msg, x) in codebook.iter().enumerate() {
            let q_mass: f64 =
                ys.iter().zip(&region).filter(|(_, &d)| d == msg).map(|(y, _)| y.iter().map(|&v| q[v]).product::<f64>()).sum();
            if q_mass > (-(n as f64) * rate).exp() {
                continue;
            }
            checked += 1;
            let err: f64 = ys
                .iter()
                .zip(&region)
                .filter(|(_, &d)| d != msg)
                .map(|(y, _)| y.iter().zip(x).map(|(&yv, &xv)| w.get(xv, yv)).product::<f64>())
                .sum();
            let letters: Vec<(Distribution, Distribution, usize)> =
                x.iter().map(|&xv| (w.row(xv).clone(), q.clone(), 1)).collect();
            let law = build_loglr_law(&letters, ATOM_CAP).unwrap();
            let a = alpha_star(&law, n as f64 * rate);
            assert!(err >= a.alpha_relaxed - 1e-14, "{err} < {}", a.alpha_relaxed);
        }
        assert!(checked > 0);
    }
}

#[test]
fn threshold_test_matches_monte_carlo() {
    let model = ChannelModel::new(Channel::bsc(0.2).unwrap()).unwrap();
    let p = Distribution::uniform(2);
    let n = 30;
    let t = threshold_test_alpha_beta(&model, 0.1, &p, n, 0.1, false).unwrap();
    // W- is uniform here, so the log-ratio depends on the number of flips.
    let (a, b) = ((0.5f64 / 0.8).ln(), (0.5f64 / 0.2).ln());
    let cut = n as f64 * t.threshold;
    let mut rng = common::rng(99);
    let samples = 1_000_000;
    let (mut rej_w, mut acc_u) = (0usize, 0usize);
    for _ in 0..samples {
        let flips = (0..n).filter(|_| rng.gen_bool(0.2)).count() as f64;
        if flips * b + (n as f64 - flips) * a >= cut - 1e-9 {
            rej_w += 1;
        }
        let ones = (0..n).filter(|_| rng.gen_bool(0.5)).count() as f64;
        if ones * b + (n as f64 - ones) * a < cut - 1e-9 {
            acc_u += 1;
        }
    }
    for (hits, exact) in [(rej_w, t.alpha), (acc_u, t.beta)] {
        let est = hits as f64 / samples as f64;
        let se = (exact * (1.0 - exact) / samples as f64).sqrt();
        assert!((est - exact).abs() <= 3.0 * se + 1e-12, "{est} vs {exact} (se {se})");
    }
}

#[test]
fn threshold_test_needs_an_n_type() {
    let model = ChannelModel::new(Channel::bsc(0.2).unwrap()).unwrap();
    let p = Distribution::new(vec![0.3, 0.7]).unwrap();
    assert!(threshold_test_alpha_beta(&model, 0.1, &p, 25, 0.1, false).is_err());
    assert!(threshold_test_alpha_beta(&model, 0.1, &p, 25, 0.1, true).is_ok());
}
