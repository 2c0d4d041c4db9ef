//! Brute-force primal solver for
//!
//! ```text
//! min { D(V||W|P) : V << W,  sum_x P(x) D(V(.|x)||A_x) <= r }
//! ```
//!
//! It searches a grid of conditional distributions directly and never
//! touches the tilted families, so it serves as an independent check on
//! the dual routes in [`crate::shifted`]. Meant for small output alphabets
//! (up to three letters per row) and few inputs.

use crate::channel::Channel;
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::simplex::compositions;

/// Default grid resolution per row.
pub const DEFAULT_RESOLUTION: usize = 80;

struct Row {
    weight: f64,
    /// `log W(y|x)` and `log A_x(y)` on the support of `W(.|x)`.
    log_w: Vec<f64>,
    log_alt: Vec<f64>,
    /// Feasible fallback: `alt` restricted to the support of `W(.|x)`.
    target: Vec<f64>,
}

impl Row {
    fn div(v: &[f64], logs: &[f64]) -> f64 {
        v.iter().zip(logs).filter(|(a, _)| **a > 0.0).map(|(a, l)| a * (a.ln() - l)).sum()
    }

    fn f(&self, v: &[f64]) -> f64 {
        Self::div(v, &self.log_w)
    }

    fn g(&self, v: &[f64]) -> f64 {
        Self::div(v, &self.log_alt)
    }
}

/// Grid search followed by a projected pattern search. `alt` holds one
/// distribution per input letter.
pub fn constrained_divergence_grid(
    w: &Channel,
    alt: &[Distribution],
    p: &Distribution,
    r: f64,
    resolution: usize,
) -> Result<f64> {
    if alt.len() != w.input_size() {
        return Err(Error::AlphabetMismatch(alt.len(), w.input_size()));
    }
    let rows: Vec<Row> = p
        .support()
        .into_iter()
        .map(|x| {
            let support = w.row(x).support();
            let t: Vec<f64> = support.iter().map(|&y| alt[x][y]).collect();
            let s: f64 = t.iter().sum();
            Row {
                weight: p[x],
                target: t.iter().map(|v| v / s).collect(),
                log_w: support.iter().map(|&y| w.get(x, y).ln()).collect(),
                log_alt: support.iter().map(|&y| alt[x][y].ln()).collect(),
            }
        })
        .collect();
    if rows.iter().any(|row| row.log_alt.iter().any(|v| !v.is_finite())) {
        return Err(Error::domain("alternative does not dominate W on the support of P"));
    }

    let total_g = |vs: &[Vec<f64>]| rows.iter().zip(vs).map(|(row, v)| row.weight * row.g(v)).sum::<f64>();
    let total_f = |vs: &[Vec<f64>]| rows.iter().zip(vs).map(|(row, v)| row.weight * row.f(v)).sum::<f64>();

    let own: Vec<Vec<f64>> = rows.iter().map(|row| row.log_w.iter().map(|l| l.exp()).collect()).collect();
    if total_g(&own) <= r {
        return Ok(0.0);
    }
    let targets: Vec<Vec<f64>> = rows.iter().map(|row| row.target.clone()).collect();
    let g_target = total_g(&targets);
    if g_target > r {
        return Ok(f64::INFINITY);
    }
    if g_target == r {
        return Ok(total_f(&targets));
    }

    // Pull an infeasible point back toward the targets until it meets the
    // constraint.
    let project = |vs: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mix = |t: f64| -> Vec<Vec<f64>> {
            vs.iter().zip(&targets).map(|(v, tg)| v.iter().zip(tg).map(|(a, b)| (1.0 - t) * a + t * b).collect()).collect()
        };
        if total_g(vs) <= r {
            return vs.to_vec();
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if total_g(&mix(mid)) <= r {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        mix(hi)
    };

    // Grid stage: per-row Pareto fronts in (g, f), combined across rows.
    let mut front: Vec<(f64, f64, Vec<Vec<f64>>)> = vec![(0.0, 0.0, Vec::new())];
    for row in &rows {
        let mut pts: Vec<(f64, f64, Vec<f64>)> = compositions(row.log_w.len(), resolution)
            .into_iter()
            .map(|c| {
                let v: Vec<f64> = c.iter().map(|&k| k as f64 / resolution as f64).collect();
                (row.weight * row.g(&v), row.weight * row.f(&v), v)
            })
            .filter(|(g, f, _)| g.is_finite() && f.is_finite())
            .collect();
        pts = pareto(pts);
        let mut next = Vec::with_capacity(front.len() * pts.len());
        for (g0, f0, v0) in &front {
            for (g1, f1, v1) in &pts {
                let mut vs = v0.clone();
                vs.push(v1.clone());
                next.push((g0 + g1, f0 + f1, vs));
            }
        }
        front = pareto(next);
    }
    let start = front
        .into_iter()
        .filter(|(g, _, _)| *g <= r)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(_, _, v)| v)
        .unwrap_or(targets.clone());

    // Pattern search on the projected objective.
    let mut cur = project(&start);
    let mut best = total_f(&cur);
    let mut step = 1.0 / resolution as f64;
    let mut sweeps = 0usize;
    while step > 1e-11 {
        let mut improved = false;
        for i in 0..rows.len() {
            let k = rows[i].log_w.len();
            for a in 0..k {
                for b in 0..k {
                    if a == b || cur[i][b] <= 0.0 {
                        continue;
                    }
                    let mv = step.min(cur[i][b]);
                    let mut cand = cur.clone();
                    cand[i][a] += mv;
                    cand[i][b] -= mv;
                    let cand = project(&cand);
                    let fv = total_f(&cand);
                    if fv < best {
                        best = fv;
                        cur = cand;
                        improved = true;
                    }
                }
            }
        }
        // Sliding along a curved constraint can keep producing tiny gains
        // at a fixed step, so each step size gets a bounded number of sweeps.
        sweeps += 1;
        if !improved || sweeps >= 40 {
            step /= 2.0;
            sweeps = 0;
        }
    }
    Ok(best)
}

/// `e_SP(Q,P,r)` by the primal grid route at the default resolution.
pub fn e_sp_primal_grid(w: &Channel, q: &Distribution, p: &Distribution, r: f64) -> Result<f64> {
    let alt = vec![q.clone(); w.input_size()];
    constrained_divergence_grid(w, &alt, p, r, DEFAULT_RESOLUTION)
}

/// Keeps the points not dominated in both coordinates (smaller is better).
fn pareto<T>(mut pts: Vec<(f64, f64, T)>) -> Vec<(f64, f64, T)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = Vec::new();
    let mut best_f = f64::INFINITY;
    for p in pts {
        if p.1 < best_f {
            best_f = p.1;
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod test {
    use super::*;

    #[test]
    fn bsc_row_closed_form() {
        // One binary row: min D(v||w) s.t. D(v||u) <= r is attained on the
        // boundary with v = (d, 1-d), h(d) = log 2 - r.
        let w = Channel::bsc(0.1).unwrap();
        let p = Distribution::new(vec![1.0, 0.0]).unwrap();
        let u = Distribution::uniform(2);
        let r = 0.2;
        let got = e_sp_primal_grid(&w, &u, &p, r).unwrap();
        let h = |x: f64| -x * x.ln() - (1.0 - x) * (1.0 - x).ln();
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if h(m) < 2f64.ln() - r {
                lo = m
            } else {
                hi = m
            }
        }
        let d = 0.5 * (lo + hi);
        // v puts mass d on the crossover output.
        let expect = d * (d / 0.1).ln() + (1.0 - d) * ((1.0 - d) / 0.9).ln();
        assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
    }

    #[test]
    fn unconstrained_and_infeasible() {
        let w = Channel::z_channel(0.3).unwrap();
        let p = Distribution::uniform(2);
        let q = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(e_sp_primal_grid(&w, &q, &p, 10.0).unwrap(), 0.0);
        // Row 0 forces D >= log 2 / 2 against this Q.
        assert_eq!(e_sp_primal_grid(&w, &q, &p, 0.1).unwrap(), f64::INFINITY);
    }
}
