//! Structure of the refined bound: branches, bookkeeping identities and
//! soundness against the exact trade-off.

mod common;

use rand::Rng;
use spherepack::bound::{lagrange_identity_check, BoundAssembly, BoundConfig, Branch};
use spherepack::saddle::saddle_point;
use spherepack::study::bound_table;
use spherepack::{Channel, ChannelModel, Distribution};

fn bsc_assembly(rate: f64) -> (ChannelModel, BoundAssembly) {
    let model = ChannelModel::new(Channel::bsc(0.1).unwrap()).unwrap();
    let asm = BoundAssembly::new(&model, rate, &BoundConfig::default()).unwrap();
    (model, asm)
}

#[test]
fn trivial_branch_is_half_the_exponential() {
    let (_, asm) = bsc_assembly(0.2);
    // I(P;W) < R here, so E_SP(R,P) = 0.
    let p = Distribution::new(vec![0.99, 0.01]).unwrap();
    for n in [10usize, 100, 1000] {
        let rep = asm.refined_bound(n, 0.1, &p).unwrap();
        assert_eq!(rep.branch, Branch::Trivial);
        assert!(rep.n_conditions.is_empty());
        let expect = 0.5f64.ln() - n as f64 * asm.esp().value;
        assert!((rep.log_bound - expect).abs() < 1e-12 * expect.abs());
        assert_eq!(rep.prefactor, 0.5);
    }
}

#[test]
fn report_bookkeeping() {
    let (_, asm) = bsc_assembly(0.2);
    let u = Distribution::uniform(2);
    for n in [20usize, 100, 1000, 10_000, 1 << 20] {
        for zeta in [0.05, 0.1, 0.5] {
            let rep = asm.refined_bound(n, zeta, &u).unwrap();
            let nf = n as f64;
            assert!((rep.log_bound - (rep.prefactor.ln() - nf * rep.exponent)).abs() < 1e-9 * rep.log_bound.abs());
            assert_eq!(rep.bound, rep.log_bound.exp());
            let t = &rep.taylor_terms;
            assert!((t.zeroth + t.first + t.remainder - rep.exponent).abs() < 1e-10);
            let any_failed = rep.n_conditions.iter().any(|c| !c.ok);
            assert_eq!(rep.branch == Branch::InvalidN, any_failed);
            assert_eq!(rep.n_conditions.len(), 4);
        }
    }
}

#[test]
fn closed_form_scaling() {
    let (_, asm) = bsc_assembly(0.2);
    let e = asm.esp().value;
    for n in [50usize, 400, 5000] {
        let a = asm.theorem1_closed_form(n, 0.1);
        let b = asm.theorem1_closed_form(2 * n, 0.1);
        let expect = -(n as f64) * e - a.power * 2f64.ln();
        assert!((b.log_bound - a.log_bound - expect).abs() < 1e-9);
    }
    let p0 = asm.theorem1_closed_form(100, 1e-12).power;
    assert!((p0 - (1.0 + asm.esp().rho_star()) / 2.0).abs() < 1e-10);
}

#[test]
fn nu_stays_small_and_shrinks_toward_capacity() {
    let model = ChannelModel::new(Channel::bsc(0.1).unwrap()).unwrap();
    let c = model.capacity();
    let rates: Vec<f64> = [0.5, 0.8, 0.95].iter().map(|t| model.r_inf() + t * (c - model.r_inf())).collect();
    let nus: Vec<f64> = rates
        .iter()
        .map(|&r| spherepack::bound::select_nu(&model, r, &BoundConfig::default()).unwrap().nu)
        .collect();
    for &nu in &nus {
        assert!(nu > 0.0 && nu <= 0.5);
    }
    assert!(nus[2] < nus[1] && nus[1] < nus[0], "{nus:?}");
}

#[test]
fn lagrange_identity_on_random_instances() {
    let mut rng = common::rng(77);
    for i in 0..20 {
        let (nx, ny) = (2 + i % 2, 2 + i % 3);
        let (model, p, lo, hi) = common::random_instance(&mut rng, nx, ny, 0.3);
        let rate = lo + rng.gen_range(0.2..0.8) * (hi - lo);
        let chk = lagrange_identity_check(&model, rate, &p).unwrap();
        assert!(chk.gap <= 1e-6, "instance {i}: s* = {}, rho* = {}", chk.s_star, chk.rho_star);
    }
}

fn check_sound(model: &ChannelModel, rate: f64, p: &Distribution, ns: &[usize]) {
    let asm = BoundAssembly::new(model, rate, &BoundConfig::default()).unwrap();
    for (rep, row) in bound_table(&asm, model, ns, 0.1, p, 200).unwrap() {
        let lr = row.log_ratio.unwrap();
        assert!(lr >= 0.0, "N = {}: log alpha* = {:?}, log bound = {}", rep.n, row.log_alpha_star, rep.log_bound);
    }
}

#[test]
fn sound_against_exact_tradeoff() {
    let ns = [10usize, 25, 50, 100, 200];
    check_sound(&ChannelModel::new(Channel::bsc(0.1).unwrap()).unwrap(), 0.2, &Distribution::uniform(2), &ns);
    let z = ChannelModel::new(Channel::z_channel(0.3).unwrap()).unwrap();
    let rate = z.r_inf() + 0.5 * (z.capacity() - z.r_inf());
    check_sound(&z, rate, z.capacity_input(), &ns);
    let mut rng = common::rng(5);
    let (model, p, lo, hi) = common::random_instance(&mut rng, 2, 3, 0.0);
    // Ternary outputs: the law has O(N^4) atoms, so stay short.
    check_sound(&model, lo + 0.5 * (hi - lo), &p, &[10, 20, 40, 60]);
}

#[test]
fn log_bound_slope_approaches_the_exponent() {
    let (model, asm) = bsc_assembly(0.2);
    let u = Distribution::uniform(2);
    let e = saddle_point(&model, 0.2, &u).unwrap().value;
    let (n1, n2) = (20_000usize, 40_000usize);
    let a = asm.refined_bound(n1, 0.1, &u).unwrap().log_bound;
    let b = asm.refined_bound(n2, 0.1, &u).unwrap().log_bound;
    let slope = (b - a) / (n2 - n1) as f64;
    assert!((slope + e).abs() < 5e-3, "{slope} vs {}", -e);
}

#[test]
fn bsc_bound_below_exact_alpha_at_ten_thousand() {
    let (_, asm) = bsc_assembly(0.2);
    let n = 10_000;
    let rep = asm.refined_bound(n, 0.1, &Distribution::uniform(2)).unwrap();
    let (_, log_alpha) = spherepack::study::bsc_n_star(0.1, n, 0.2);
    assert!(rep.log_bound < log_alpha, "{} vs {log_alpha}", rep.log_bound);
}
