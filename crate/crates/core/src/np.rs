//! Exact Neyman-Pearson trade-offs for product measures.
//!
//! A test between `Q = prod_i Q_i` (null) and `Qh = prod_i Qh_i` (alternative)
//! is summarized by the law of `t = log(dQh/dQ)` on the common support.
//! Strings outside the common support are handled separately: null-only
//! strings are always accepted as null (they cost nothing under the
//! alternative) and alternative-only strings are always rejected.

use serde::Serialize;

use crate::dist::{is_zero, log_sum_exp, Distribution};
use crate::error::{Error, Result};
use crate::model::ChannelModel;
use crate::shifted::ShiftedChannel;
use crate::simplex::{round_to_type, type_distribution};

/// Default cap on the number of atoms of a convolved law.
pub const ATOM_CAP: usize = 2_000_000;

/// One atom of the log-likelihood-ratio law: the value `t` and the log of
/// its null probability. Its alternative probability is `exp(log_null + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LlrAtom {
    pub t: f64,
    pub log_null: f64,
}

/// Law of `log(dQh/dQ)` under `Q` on the common support, plus the masses
/// off it.
#[derive(Debug, Clone, Serialize)]
pub struct LogLrLaw {
    atoms: Vec<LlrAtom>,
    /// Null mass of strings outside the support of the alternative.
    null_only: f64,
    /// Alternative mass of strings outside the support of the null.
    alt_only: f64,
    /// Bound on `|t|` summed letter by letter; sets the merge tolerance.
    scale: f64,
}

impl LogLrLaw {
    /// Atoms sorted by `t`.
    pub fn atoms(&self) -> &[LlrAtom] {
        &self.atoms
    }

    pub fn null_only(&self) -> f64 {
        self.null_only
    }

    pub fn alt_only(&self) -> f64 {
        self.alt_only
    }

    /// Two log-ratios closer than this are treated as equal.
    pub fn tolerance(&self) -> f64 {
        merge_tol(self.scale)
    }
}

/// Merge tolerance for a law whose atoms are sums of per-letter values of
/// total magnitude at most `scale`. Rounding in those sums is relative to
/// `scale`, not to the (possibly cancelled) result.
fn merge_tol(scale: f64) -> f64 {
    1e-12 * scale.max(1.0)
}

fn sort_and_merge(mut atoms: Vec<LlrAtom>, tol: f64) -> Vec<LlrAtom> {
    atoms.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut out: Vec<LlrAtom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if (a.t - last.t).abs() <= tol => {
                let m = last.log_null.max(a.log_null);
                last.log_null = m + ((last.log_null - m).exp() + (a.log_null - m).exp()).ln();
            }
            _ => out.push(a),
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Law of `n` i.i.d. copies of one letter pair, restricted to the common
/// support, by multinomial enumeration.
fn letter_power(null: &Distribution, alt: &Distribution, n: usize, cap: usize, tol: f64) -> Result<Vec<LlrAtom>> {
    let common: Vec<(f64, f64)> = (0..null.len())
        .filter(|&y| !is_zero(null[y]) && !is_zero(alt[y]))
        .map(|y| (alt[y].ln() - null[y].ln(), null[y].ln()))
        .collect();
    if common.is_empty() {
        return Ok(if n == 0 { vec![LlrAtom { t: 0.0, log_null: 0.0 }] } else { Vec::new() });
    }
    let k = common.len();
    let count = binomial(n + k - 1, k - 1);
    if count > cap as f64 {
        return Err(Error::AtomLimit { atoms: count as usize, cap });
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let atoms = crate::simplex::compositions(k, n)
        .into_iter()
        .map(|c| {
            let mut t = 0.0;
            let mut lp = ln_fact[n];
            for (j, &cj) in c.iter().enumerate() {
                t += cj as f64 * common[j].0;
                lp += cj as f64 * common[j].1 - ln_fact[cj];
            }
            LlrAtom { t, log_null: lp }
        })
        .collect();
    Ok(sort_and_merge(atoms, tol))
}

fn convolve(a: &[LlrAtom], b: &[LlrAtom], cap: usize, tol: f64) -> Result<Vec<LlrAtom>> {
    let pairs = a.len().saturating_mul(b.len());
    if pairs > cap.saturating_mul(64) {
        return Err(Error::AtomLimit { atoms: pairs, cap });
    }
    // Pairs are generated a block of rows at a time and merged into the
    // running result, so memory stays near the size of the merged law.
    let rows_per_block = (4 * cap / b.len().max(1)).max(1);
    let mut out: Vec<LlrAtom> = Vec::new();
    for block in a.chunks(rows_per_block) {
        let mut next = out;
        next.reserve(block.len() * b.len());
        for x in block {
            next.extend(b.iter().map(|y| LlrAtom { t: x.t + y.t, log_null: x.log_null + y.log_null }));
        }
        out = sort_and_merge(next, tol);
        if out.len() > cap {
            return Err(Error::AtomLimit { atoms: out.len(), cap });
        }
    }
    Ok(out)
}

/// Builds the law for the product of `(null, alt, multiplicity)` letters.
pub fn build_loglr_law(letters: &[(Distribution, Distribution, usize)], cap: usize) -> Result<LogLrLaw> {
    let mut atoms = vec![LlrAtom { t: 0.0, log_null: 0.0 }];
    let (mut log_null_common, mut log_alt_common) = (0.0, 0.0);
    let mut scale = 0.0;
    for (null, alt, n) in letters {
        if null.len() != alt.len() {
            return Err(Error::AlphabetMismatch(null.len(), alt.len()));
        }
        if *n == 0 {
            continue;
        }
        let common: Vec<usize> = (0..null.len()).filter(|&y| !is_zero(null[y]) && !is_zero(alt[y])).collect();
        log_null_common += *n as f64 * null.mass_of(common.iter().copied()).ln();
        log_alt_common += *n as f64 * alt.mass_of(common.iter().copied()).ln();
        scale += *n as f64 * common.iter().map(|&y| (alt[y].ln() - null[y].ln()).abs()).fold(0.0, f64::max);
        let power = letter_power(null, alt, *n, cap, merge_tol(scale))?;
        atoms = convolve(&atoms, &power, cap, merge_tol(scale))?;
    }
    Ok(LogLrLaw { atoms, null_only: -log_null_common.exp_m1(), alt_only: -log_alt_common.exp_m1(), scale })
}

/// A point on the deterministic trade-off curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    /// Null mass rejected.
    pub alpha: f64,
    pub log_alpha: f64,
    /// Alternative mass accepted.
    pub beta: f64,
    pub log_beta: f64,
    /// Largest accepted log-ratio (`-inf` when nothing is accepted).
    pub threshold: f64,
    /// `alpha` minus the null mass that a fractional share of the first
    /// rejected atom would buy with the unused budget. Any test whose
    /// accepted alternative mass is at most the budget, deterministic or
    /// not, has type-I error at least this.
    pub alpha_relaxed: f64,
}

/// `alpha*(r)`: smallest type-I error of a deterministic likelihood-ratio
/// threshold test whose type-II error is at most `e^(-r)`.
///
/// Atoms are accepted in increasing order of `t` while the accepted
/// alternative mass stays within budget.
pub fn alpha_star(law: &LogLrLaw, r: f64) -> TradeoffPoint {
    let atoms = &law.atoms;
    let log_budget = -r;
    let mut log_acc = f64::NEG_INFINITY;
    let mut k = 0;
    while k < atoms.len() {
        let la = atoms[k].log_null + atoms[k].t;
        let next = log_add(log_acc, la);
        if next > log_budget + 1e-14 * log_budget.abs().max(1.0) {
            break;
        }
        log_acc = next;
        k += 1;
    }
    let log_alpha = log_sum_exp(atoms[k..].iter().map(|a| a.log_null));
    let alpha = log_alpha.exp();
    let alpha_relaxed = match atoms.get(k) {
        Some(a) => {
            let spare = (log_budget.exp() - log_acc.exp()).max(0.0);
            (alpha - spare * (-a.t).exp()).max(0.0)
        }
        None => alpha,
    };
    TradeoffPoint {
        alpha,
        log_alpha,
        beta: log_acc.exp(),
        log_beta: log_acc,
        threshold: if k == 0 { f64::NEG_INFINITY } else { atoms[k - 1].t },
        alpha_relaxed,
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Error probabilities of the threshold test between `W` and `W-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdErrors {
    pub n: usize,
    /// `W(A^c)`.
    pub alpha: f64,
    pub log_alpha: f64,
    /// `W-(A)`.
    pub beta: f64,
    pub log_beta: f64,
    /// Per-letter threshold `e~(r_N) - r_N`.
    pub threshold: f64,
    /// `r_N = r(R,P) - (1/2 + zeta) log N / N`.
    pub r_n: f64,
}

/// The test `A^c = { (1/N) sum log(W-/W) >= e~(r_N) - r_N }` at blocklength
/// `N`. The composition is rounded to the nearest N-type when
/// `round_to_n_type` is set; otherwise it must already be one.
pub fn threshold_test_alpha_beta(
    model: &ChannelModel,
    rate: f64,
    p: &Distribution,
    n: usize,
    zeta: f64,
    round_to_n_type: bool,
) -> Result<ThresholdErrors> {
    if n < 2 {
        return Err(Error::domain("blocklength must be at least 2"));
    }
    let counts = round_to_type(p, n);
    let pn = type_distribution(&counts);
    if !round_to_n_type && pn.l1_distance(p) > 1e-9 {
        return Err(Error::domain(format!("composition is not a {n}-type")));
    }
    let sc = ShiftedChannel::new(model, rate, &pn)?;
    let eps = (0.5 + zeta) * (n as f64).ln() / n as f64;
    let r_n = sc.r() - eps;
    if r_n <= 0.0 {
        return Err(Error::domain(format!("r_N = {r_n} is not positive at N = {n}")));
    }
    let threshold = sc.tilde_esp(r_n)?.value - r_n;
    let w = model.channel();
    let letters: Vec<(Distribution, Distribution, usize)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(x, &c)| (w.row(x).clone(), sc.w_minus().row(x).clone(), c))
        .collect();
    let law = build_loglr_law(&letters, ATOM_CAP)?;
    let cut = n as f64 * threshold;
    let (mut rej, mut acc) = (Vec::new(), Vec::new());
    for a in law.atoms() {
        if a.t >= cut - law.tolerance() {
            rej.push(a.log_null);
        } else {
            acc.push(a.log_null + a.t);
        }
    }
    let log_alpha = log_sum_exp(rej.iter().copied());
    let log_beta = log_sum_exp(acc.iter().copied());
    Ok(ThresholdErrors { n, alpha: log_alpha.exp(), log_alpha, beta: log_beta.exp(), log_beta, threshold, r_n })
}
