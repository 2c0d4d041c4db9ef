//! Identities of the shifted channel and its exponential family on random
//! instances.

mod common;

use rand::Rng;
use spherepack::info::{conditional_kl, conditional_kl_to, mutual_information};
use spherepack::saddle::saddle_point;
use spherepack::shifted::ShiftedChannel;
use spherepack::{ChannelModel, ConditionalChannel, Distribution};

fn instances(seed: u64, count: usize) -> Vec<(ChannelModel, ShiftedChannel)> {
    let mut rng = common::rng(seed);
    (0..count)
        .map(|i| {
            let (nx, ny) = (2 + i % 2, 2 + (i / 2) % 3);
            let (model, p, lo, hi) = common::random_instance(&mut rng, nx, ny, 0.3);
            let rate = lo + rng.gen_range(0.2..0.8) * (hi - lo);
            let sc = ShiftedChannel::new(&model, rate, &p).unwrap();
            (model, sc)
        })
        .collect()
}

fn corpus(seed: u64, count: usize) -> Vec<ShiftedChannel> {
    instances(seed, count).into_iter().map(|x| x.1).collect()
}

#[test]
fn chain_rule_through_w_minus() {
    let mut rng = common::rng(40);
    for sc in corpus(1, 8) {
        let p = sc.composition();
        let q = &sc.saddle().q_star;
        let wm = sc.w_minus();
        // Random V dominated by W-.
        let rows: Vec<Distribution> = wm
            .rows()
            .iter()
            .map(|r| {
                let v: Vec<f64> = r.probs().iter().map(|&m| if m > 0.0 { rng.gen_range(0.05..1.0) } else { 0.0 }).collect();
                Distribution::from_weights(v).unwrap()
            })
            .collect();
        let v = ConditionalChannel::new(rows).unwrap();
        let lhs = conditional_kl_to(&v, q, p).unwrap();
        let rhs = conditional_kl(&v, wm, p).unwrap() + sc.d_wminus_qstar();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }
}

#[test]
fn positive_variance_on_the_whole_interval() {
    for sc in corpus(2, 10) {
        for i in 0..=100 {
            let l = i as f64 / 100.0;
            assert!(sc.cumulants(l).second > 1e-12, "lambda = {l}");
        }
    }
}

#[test]
fn cumulant_derivatives_match_differences() {
    let h = 1e-5;
    for sc in corpus(3, 8) {
        let c0 = sc.cumulants(0.0);
        assert!(c0.value.abs() < 1e-14);
        assert!((c0.first + sc.d_w_wminus()).abs() < 1e-12);
        assert!((sc.cumulants(1.0).first - sc.d_wminus_w()).abs() < 1e-12);
        for l in [0.3, 0.7] {
            let c = sc.cumulants(l);
            let (a, b) = (sc.cumulants(l - h), sc.cumulants(l + h));
            assert!(((b.value - a.value) / (2.0 * h) - c.first).abs() < 1e-6);
            assert!(((b.first - a.first) / (2.0 * h) - c.second).abs() < 1e-6);
            let r = sc.cumulants_reflected(1.0 - l);
            assert!((r.value - c.value).abs() < 1e-15 && (r.first + c.first).abs() < 1e-15);
            assert!((r.second - c.second).abs() < 1e-15);
        }
    }
}

#[test]
fn e0_agrees_with_the_family() {
    for sc in corpus(4, 8) {
        for s in [0.0, 0.1, 0.8, 3.0, 25.0] {
            let direct = sc.e0(s);
            let fam = -(1.0 + s) * sc.cumulants(s / (1.0 + s)).value;
            assert!((direct - fam).abs() < 1e-12 * (1.0 + direct.abs()), "s = {s}");
        }
        // e0(s)/s tends to -Lambda0(1) from one side, monotonically.
        let (a, b) = (sc.e0(1e3) / 1e3, sc.e0(1e4) / 1e4);
        let limit = -sc.cumulants(1.0).value;
        assert!((b - limit).abs() <= (a - limit).abs() + 1e-15);
    }
}

#[test]
fn shifted_rate_is_positive_and_below_the_gap() {
    for (model, sc) in instances(5, 12) {
        let i = mutual_information(sc.composition(), model.channel().matrix()).unwrap();
        assert!(sc.r() > 0.0);
        assert!(sc.r() < i - sc.d_wminus_qstar() + 1e-9);
    }
}

#[test]
fn tilde_esp_edges() {
    for sc in corpus(6, 8) {
        let d = sc.d_w_wminus();
        assert!(sc.tilde_esp(d).unwrap().value.abs() < 1e-14);
        // Approaches D(W-||W|P) from below as r -> 0, with unbounded slope.
        let (tiny, small) = (sc.tilde_esp(1e-9).unwrap().value, sc.tilde_esp(1e-6).unwrap().value);
        assert!(tiny <= sc.d_wminus_w() + 1e-12 && tiny >= small);
        assert!(sc.d_wminus_w() - tiny < 1e-4, "{tiny} vs {}", sc.d_wminus_w());
        assert!(sc.tilde_esp(0.0).is_err());
        // Interior: Lambda0'(eta) = e~ - r.
        let r = 0.5 * d;
        let t = sc.tilde_esp(r).unwrap();
        assert!(t.eta > 0.0 && t.eta < 1.0);
        assert!((sc.cumulants(t.eta).first - (t.value - r)).abs() < 1e-8);
    }
}

#[test]
fn slope_of_the_shifted_curve() {
    // d/dr e_SP(Q*,P,r) = -s*(r - D(W-||Q*|P)).
    let h = 1e-5;
    for sc in corpus(7, 6) {
        let d = sc.d_wminus_qstar();
        let r = d + 0.5 * sc.d_w_wminus();
        let fd = (sc.e_sp_qstar(r + h).unwrap() - sc.e_sp_qstar(r - h).unwrap()) / (2.0 * h);
        let s = sc.tilde_esp(r - d).unwrap().s_star;
        assert!((fd + s).abs() < 1e-5, "{fd} vs {}", -s);
    }
}

#[test]
fn degenerate_saddle_is_rejected() {
    let mut rng = common::rng(9);
    let (model, p, _, hi) = common::random_instance(&mut rng, 2, 3, 0.0);
    let sp = saddle_point(&model, hi * 0.999 + model.capacity() * 0.001, &p).unwrap();
    if sp.degenerate {
        assert!(ShiftedChannel::from_saddle(model.channel(), sp).is_err());
    }
}
