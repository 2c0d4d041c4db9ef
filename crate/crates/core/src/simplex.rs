//! Grids on the probability simplex, N-type rounding and a local
//! coordinate-ascent refinement used by the composition searches.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::dist::Distribution;
use crate::error::{Error, Result};

/// All integer vectors of length `k` with entries summing to `n`.
pub fn compositions(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; k];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
    }
    if k > 0 {
        rec(0, n, &mut cur, &mut out);
    }
    out
}

/// Grid of resolution `1/res` on the simplex over `k` letters.
pub fn simplex_grid(k: usize, res: usize) -> Vec<Distribution> {
    compositions(k, res)
        .into_iter()
        .map(|c| Distribution::from_raw(c.iter().map(|&v| v as f64 / res as f64).collect()))
        .collect()
}

/// Rounds `p` to the nearest N-type by the largest-remainder rule.
pub fn round_to_type(p: &Distribution, n: usize) -> Vec<usize> {
    let scaled: Vec<f64> = p.probs().iter().map(|v| v * n as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|v| v.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in &order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Distribution of an N-type.
pub fn type_distribution(counts: &[usize]) -> Distribution {
    let n: usize = counts.iter().sum();
    Distribution::from_raw(counts.iter().map(|&c| c as f64 / n as f64).collect())
}

/// Options for maximizing a function over input compositions.
#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    /// Grid resolution (points at multiples of `1/resolution`).
    pub resolution: usize,
    /// Number of grid local maxima that get refined.
    pub starts: usize,
    /// Refinement stops once the step drops below this.
    pub min_step: f64,
}

impl GridOptions {
    /// 1/64 for up to four inputs, 1/16 for five or six. Larger input
    /// alphabets are refused.
    pub fn for_inputs(nx: usize) -> Result<Self> {
        let resolution = match nx {
            0 => return Err(Error::Config("empty input alphabet".into())),
            1..=4 => 64,
            5 | 6 => 16,
            _ => {
                return Err(Error::Config(format!(
                    "composition search over {nx} inputs is not supported (max 6)"
                )))
            }
        };
        Ok(Self { resolution, starts: 4, min_step: 1e-9 })
    }
}

/// A refined local maximizer.
#[derive(Debug, Clone)]
pub struct Maximizer {
    pub p: Distribution,
    pub value: f64,
}

/// Maximizes `f` over the simplex: evaluates the grid, refines the best
/// grid local maxima by coordinate ascent and returns every refined point
/// within `tie_tol` of the best value, best first.
pub fn maximize_over_simplex<F>(k: usize, opts: &GridOptions, tie_tol: f64, f: F) -> Result<Vec<Maximizer>>
where
    F: Fn(&Distribution) -> Result<f64> + Sync,
{
    let comps = compositions(k, opts.resolution);
    let values: Vec<f64> = comps
        .par_iter()
        .map(|c| f(&Distribution::from_raw(c.iter().map(|&v| v as f64 / opts.resolution as f64).collect())))
        .collect::<Result<_>>()?;
    let index: HashMap<&[usize], usize> = comps.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();

    let mut locals: Vec<usize> = (0..comps.len())
        .filter(|&i| {
            let c = &comps[i];
            let mut nb = c.clone();
            for a in 0..k {
                for b in 0..k {
                    if a == b || c[b] == 0 {
                        continue;
                    }
                    nb[a] += 1;
                    nb[b] -= 1;
                    let better = values[index[nb.as_slice()]] > values[i];
                    nb[a] -= 1;
                    nb[b] += 1;
                    if better {
                        return false;
                    }
                }
            }
            true
        })
        .collect();
    locals.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    locals.truncate(opts.starts.max(1));

    let mut refined: Vec<Maximizer> = locals
        .par_iter()
        .map(|&i| {
            let p0 = Distribution::from_raw(comps[i].iter().map(|&v| v as f64 / opts.resolution as f64).collect());
            refine(p0, values[i], 1.0 / opts.resolution as f64, opts.min_step, &f)
        })
        .collect::<Result<_>>()?;
    refined.sort_by(|a, b| b.value.total_cmp(&a.value));
    let best = refined[0].value;
    let mut out: Vec<Maximizer> = Vec::new();
    for m in refined {
        if m.value >= best - tie_tol && out.iter().all(|o| o.p.l1_distance(&m.p) > 1e-6) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Coordinate ascent moving mass between pairs of letters with a halving
/// step.
pub fn refine<F>(mut p: Distribution, mut value: f64, mut step: f64, min_step: f64, f: &F) -> Result<Maximizer>
where
    F: Fn(&Distribution) -> Result<f64>,
{
    let k = p.len();
    let mut evals = 0usize;
    while step >= min_step && evals < 200_000 {
        let mut improved = false;
        for a in 0..k {
            for b in 0..k {
                if a == b || p[b] <= 0.0 {
                    continue;
                }
                let mv = step.min(p[b]);
                let mut v = p.probs().to_vec();
                v[a] += mv;
                v[b] -= mv;
                if v[b] < 1e-15 {
                    v[b] = 0.0;
                }
                let cand = Distribution::from_weights(v)?;
                let fv = f(&cand)?;
                evals += 1;
                if fv > value {
                    p = cand;
                    value = fv;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Ok(Maximizer { p, value })
}
