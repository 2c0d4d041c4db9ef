#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spherepack::{Channel, ChannelModel, Distribution};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random channel; with probability `zero_prob` an entry is zeroed (each
/// row keeps at least one positive entry).
pub fn random_channel(rng: &mut impl Rng, nx: usize, ny: usize, zero_prob: f64) -> Channel {
    let rows = (0..nx)
        .map(|_| {
            let mut r: Vec<f64> = (0..ny).map(|_| rng.gen_range(0.05..1.0)).collect();
            let keep = rng.gen_range(0..ny);
            for (y, v) in r.iter_mut().enumerate() {
                if y != keep && rng.gen_bool(zero_prob) {
                    *v = 0.0;
                }
            }
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Channel::from_rows(rows).unwrap()
}

pub fn random_composition(rng: &mut impl Rng, k: usize, floor: f64) -> Distribution {
    Distribution::from_weights((0..k).map(|_| rng.gen_range(floor..1.0)).collect()).unwrap()
}

/// A model and composition where the exponent is positive at every rate
/// in `[lo, hi]`, returned as that interval.
pub fn random_instance(rng: &mut impl Rng, nx: usize, ny: usize, zero_prob: f64) -> (ChannelModel, Distribution, f64, f64) {
    loop {
        let w = random_channel(rng, nx, ny, zero_prob);
        let Ok(model) = ChannelModel::new(w) else { continue };
        let p = random_composition(rng, nx, 0.1);
        let i = spherepack::info::mutual_information(&p, model.channel().matrix()).unwrap();
        let lo = model.r_inf();
        if i - lo > 0.05 {
            let hi = i.min(model.capacity());
            return (model, p, lo, hi);
        }
    }
}

/// Every output string of a product of per-position letter pairs, as
/// `(null prob, alt prob)`.
pub fn enumerate(letters: &[(Distribution, Distribution)]) -> Vec<(f64, f64)> {
    let mut out = vec![(1.0, 1.0)];
    for (a, b) in letters {
        out = out.iter().flat_map(|&(pa, pb)| (0..a.len()).map(move |y| (pa * a[y], pb * b[y]))).collect();
    }
    out
}

/// Brute-force law: strings on the common support grouped by log-ratio.
pub fn brute_law(letters: &[(Distribution, Distribution)]) -> (Vec<(f64, f64)>, f64, f64) {
    let strings = enumerate(letters);
    let mut common: Vec<(f64, f64)> =
        strings.iter().filter(|s| s.0 > 0.0 && s.1 > 0.0).map(|&(a, b)| ((b / a).ln(), a)).collect();
    common.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (t, p) in common {
        match atoms.last_mut() {
            Some(last) if (t - last.0).abs() < 1e-9 => last.1 += p,
            _ => atoms.push((t, p)),
        }
    }
    let null_only = strings.iter().filter(|s| s.0 > 0.0 && s.1 == 0.0).map(|s| s.0).sum();
    let alt_only = strings.iter().filter(|s| s.1 > 0.0 && s.0 == 0.0).map(|s| s.1).sum();
    (atoms, null_only, alt_only)
}
