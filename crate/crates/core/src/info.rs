//! Divergences, mutual information, tilting, capacity and the zero-rate
//! threshold `R_inf`.

use crate::channel::{Channel, ConditionalChannel};
use crate::dist::{is_zero, log_sum_exp, Distribution};
use crate::error::{Error, Result};

/// `D(p||q)` in nats; `+inf` unless `p << q`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    let mut d = 0.0;
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        if is_zero(a) {
            continue;
        }
        if is_zero(b) {
            return Ok(f64::INFINITY);
        }
        d += a * (a.ln() - b.ln());
    }
    Ok(d.max(0.0))
}

/// `D(V||W|P) = sum_x P(x) D(V(.|x)||W(.|x))`. Rows outside `S(P)` are
/// skipped, so they never produce `inf * 0`.
pub fn conditional_kl(
    v: &impl AsRef<ConditionalChannel>,
    w: &impl AsRef<ConditionalChannel>,
    p: &Distribution,
) -> Result<f64> {
    let (v, w) = (v.as_ref(), w.as_ref());
    check_shapes(v, w, p)?;
    let mut d = 0.0;
    for x in p.support() {
        let dx = kl_divergence(v.row(x), w.row(x))?;
        if dx.is_infinite() {
            return Ok(f64::INFINITY);
        }
        d += p[x] * dx;
    }
    Ok(d)
}

/// `D(V||Q|P)` for a fixed output distribution `Q`.
pub fn conditional_kl_to(v: &impl AsRef<ConditionalChannel>, q: &Distribution, p: &Distribution) -> Result<f64> {
    let v = v.as_ref();
    if p.len() != v.input_size() {
        return Err(Error::AlphabetMismatch(p.len(), v.input_size()));
    }
    let mut d = 0.0;
    for x in p.support() {
        let dx = kl_divergence(v.row(x), q)?;
        if dx.is_infinite() {
            return Ok(f64::INFINITY);
        }
        d += p[x] * dx;
    }
    Ok(d)
}

fn check_shapes(v: &ConditionalChannel, w: &ConditionalChannel, p: &Distribution) -> Result<()> {
    if v.input_size() != w.input_size() {
        return Err(Error::AlphabetMismatch(v.input_size(), w.input_size()));
    }
    if v.output_size() != w.output_size() {
        return Err(Error::AlphabetMismatch(v.output_size(), w.output_size()));
    }
    if p.len() != v.input_size() {
        return Err(Error::AlphabetMismatch(p.len(), v.input_size()));
    }
    Ok(())
}

/// `I(P;V) = D(V||PV|P)`.
pub fn mutual_information(p: &Distribution, v: &impl AsRef<ConditionalChannel>) -> Result<f64> {
    let v = v.as_ref();
    let q = v.output_distribution(p)?;
    conditional_kl_to(v, &q, p)
}

/// Row proportional to `w^(1-lambda) q^lambda` on `S(w) ∩ S(q)`.
///
/// At `lambda = 0` this is `w` restricted to `S(q)`, which is the limit from
/// the right; callers that want `w` itself at zero must use `w`.
pub fn tilted_channel_row(w_row: &Distribution, q: &Distribution, lambda: f64) -> Result<Distribution> {
    if w_row.len() != q.len() {
        return Err(Error::AlphabetMismatch(w_row.len(), q.len()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("tilt parameter {lambda} outside [0, 1]")));
    }
    let logs: Vec<f64> = w_row
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&w, &qy)| {
            if is_zero(w) || is_zero(qy) {
                f64::NEG_INFINITY
            } else {
                (1.0 - lambda) * w.ln() + lambda * qy.ln()
            }
        })
        .collect();
    let z = log_sum_exp(logs.iter().copied());
    if z == f64::NEG_INFINITY {
        return Err(Error::domain("supports of row and tilting distribution are disjoint"));
    }
    Ok(Distribution::from_raw(logs.iter().map(|l| (l - z).exp()).collect()))
}

// ---------------------------------------------------------------------------
// Capacity

/// Result of the Blahut-Arimoto iteration.
#[derive(Debug, Clone)]
pub struct Capacity {
    /// `I(P;W)` at the returned input distribution.
    pub value: f64,
    /// `max_x D(W(.|x)||PW)`, an upper bound on the capacity.
    pub upper: f64,
    pub input: Distribution,
    pub iterations: usize,
}

/// Capacity in nats. Stops once the duality gap is at most 1e-9, the
/// input distribution moves by less than 1e-12 (relative), or after 1e5
/// iterations.
pub fn capacity(w: &Channel) -> Result<Capacity> {
    let nx = w.input_size();
    let mut p = Distribution::uniform(nx);
    let mut it = 0;
    loop {
        let q = w.matrix().output_distribution(&p)?;
        let d: Vec<f64> = (0..nx).map(|x| kl_divergence(w.row(x), &q)).collect::<Result<_>>()?;
        let lower: f64 = (0..nx).map(|x| p[x] * d[x]).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower <= 1e-9 || it >= 100_000 {
            return Ok(Capacity { value: lower, upper, input: p, iterations: it });
        }
        let dmax = upper;
        let next = Distribution::from_weights((0..nx).map(|x| p[x] * (d[x] - dmax).exp()).collect())?;
        let change = next.l1_distance(&p);
        p = next;
        it += 1;
        if change <= 1e-12 {
            let q = w.matrix().output_distribution(&p)?;
            let d: Vec<f64> = (0..nx).map(|x| kl_divergence(w.row(x), &q)).collect::<Result<_>>()?;
            let lower = (0..nx).map(|x| p[x] * d[x]).sum();
            let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            return Ok(Capacity { value: lower, upper, input: p, iterations: it });
        }
    }
}

// ---------------------------------------------------------------------------
// Zero-rate threshold

/// `R_inf = max_P min { I(P;V) : V(.|x) << W(.|x) on S(P) }`.
///
/// Minimizing over `V` first turns the inner problem into
/// `min_Q -sum_x P(x) log Q(S(W(.|x)))`, so by the minimax theorem
/// `R_inf = -log max_Q min_x Q(S(W(.|x)))`. The outer problem is a small
/// linear program over the support pattern of `W`, solved exactly here.
pub fn r_infinity(w: &Channel) -> Result<f64> {
    Ok(-support_game_value(w).0.ln())
}

/// Value `max_Q min_x Q(S_x)` of the support game and an optimal `Q`.
pub(crate) fn support_game_value(w: &Channel) -> (f64, Vec<f64>) {
    let nx = w.input_size();
    let ny = w.output_size();
    // maximize t  s.t.  t - sum_{y in S_x} Q_y <= 0,  sum_y Q_y <= 1.
    let mut a = Vec::with_capacity(nx + 1);
    for x in 0..nx {
        let mut row = vec![0.0; ny + 1];
        for y in 0..ny {
            if w.row(x).in_support(y) {
                row[y] = -1.0;
            }
        }
        row[ny] = 1.0;
        a.push(row);
    }
    let mut last = vec![1.0; ny + 1];
    last[ny] = 0.0;
    a.push(last);
    let mut b = vec![0.0; nx + 1];
    b[nx] = 1.0;
    let mut c = vec![0.0; ny + 1];
    c[ny] = 1.0;
    let (value, sol) = simplex_max(&a, &b, &c);
    (value, sol[..ny].to_vec())
}

/// Dense tableau simplex for `max c.x` s.t. `A x <= b`, `x >= 0`, `b >= 0`.
/// Bland's rule keeps it from cycling on the degenerate zero right-hand
/// sides that the support game produces.
fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> (f64, Vec<f64>) {
    const EPS: f64 = 1e-12;
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    while let Some(col) = (0..n + m).find(|&j| t[m][j] < -EPS) {
        let mut pivot: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][col] > EPS {
                let ratio = t[i][width - 1] / t[i][col];
                let better = match pivot {
                    None => true,
                    Some((r, best)) => ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[r]),
                };
                if better {
                    pivot = Some((i, ratio));
                }
            }
        }
        // The support game is bounded, so a pivot row always exists.
        let Some((row, _)) = pivot else { break };
        let pv = t[row][col];
        for v in t[row].iter_mut() {
            *v /= pv;
        }
        for i in 0..=m {
            if i != row && t[i][col] != 0.0 {
                let f = t[i][col];
                for j in 0..width {
                    t[i][j] -= f * t[row][j];
                }
            }
        }
        basis[row] = col;
    }
    let mut x = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][width - 1];
        }
    }
    (t[m][width - 1], x)
}
