//! Tables behind the command-line studies. Every function returns plain
//! rows in a fixed order; writing them out is left to the caller.

use rayon::prelude::*;
use serde::Serialize;

use crate::bound::{BoundAssembly, BoundConfig, BoundReport};
use crate::error::{Error, Result};
use crate::model::ChannelModel;
use crate::np::{alpha_star, build_loglr_law, ATOM_CAP};
use crate::oracle::e_sp_primal_grid;
use crate::saddle::{esp_of_r, saddle_at};
use crate::shifted::e_sp_fixed_q;
use crate::simplex::{maximize_over_simplex, round_to_type, type_distribution, GridOptions};
use crate::{Channel, Distribution};

/// First line of every CSV file.
pub const CSV_HEADER: &str = "# spherepack-csv v1";

/// Default largest blocklength compared against the exact trade-off.
pub const NP_CAP: usize = 200;

/// `ok` or `out-of-domain`.
fn status(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "out-of-domain"
    }
}

fn fmt_dist(p: &Distribution) -> String {
    p.probs().iter().map(|v| format!("{v:.10}")).collect::<Vec<_>>().join(";")
}

/// Checks that a grid is non-empty and strictly increasing.
pub fn check_grid<T: PartialOrd + Copy + std::fmt::Debug>(name: &str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::Config(format!("{name} grid {grid:?} is not strictly increasing")));
    }
    Ok(())
}

/// `k` rates evenly spaced strictly inside `(R_inf, C)`.
pub fn interior_rates(model: &ChannelModel, k: usize) -> Vec<f64> {
    let (lo, hi) = (model.r_inf(), model.capacity());
    (1..=k).map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64).collect()
}

// ---------------------------------------------------------------------------
// exponent

#[derive(Debug, Clone, Serialize)]
pub struct ExponentRow {
    #[serde(rename = "R")]
    pub rate: f64,
    pub status: &'static str,
    pub esp: f64,
    pub rho_star: f64,
    /// Maximizing compositions, `;` between letters and `|` between points.
    pub argmax_p: String,
}

pub fn exponent_table(model: &ChannelModel, rates: &[f64], grid: Option<GridOptions>) -> Result<Vec<ExponentRow>> {
    check_grid("R", rates)?;
    rates
        .par_iter()
        .map(|&rate| {
            if model.check_rate(rate).is_err() {
                return Ok(ExponentRow {
                    rate,
                    status: status(false),
                    esp: f64::NAN,
                    rho_star: f64::NAN,
                    argmax_p: String::new(),
                });
            }
            let e = esp_of_r(model, rate, grid)?;
            Ok(ExponentRow {
                rate,
                status: status(true),
                esp: e.value,
                rho_star: e.rho_star(),
                argmax_p: e.argmax.iter().map(|s| fmt_dist(&s.composition)).collect::<Vec<_>>().join("|"),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// bound

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub branch: &'static str,
    pub failed_conditions: String,
    pub exponent: f64,
    pub prefactor: f64,
    pub bound: f64,
    pub log_bound: f64,
    pub log_closed_form: f64,
    /// Exact deterministic `alpha*` at budget `e^(-NR)`; empty above the cap.
    pub alpha_star: Option<f64>,
    pub log_alpha_star: Option<f64>,
    /// `alpha* / bound`, and its logarithm.
    pub ratio: Option<f64>,
    pub log_ratio: Option<f64>,
}

/// Exact `alpha*_{W(.|x^N), Q}(NR)` for a codeword of type `counts`.
pub fn exact_alpha_star(w: &Channel, q: &Distribution, counts: &[usize], rate: f64) -> Result<(f64, f64)> {
    let n: usize = counts.iter().sum();
    let letters: Vec<(Distribution, Distribution, usize)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(x, &c)| (w.row(x).clone(), q.clone(), c))
        .collect();
    let law = build_loglr_law(&letters, ATOM_CAP)?;
    let t = alpha_star(&law, n as f64 * rate);
    Ok((t.alpha, t.log_alpha))
}

/// Bound reports at every `N`, rounded to `N`-types, with the exact
/// trade-off for `N <= np_cap`.
pub fn bound_table(
    asm: &BoundAssembly,
    model: &ChannelModel,
    ns: &[usize],
    zeta: f64,
    p: &Distribution,
    np_cap: usize,
) -> Result<Vec<(BoundReport, BoundRow)>> {
    check_grid("N", ns)?;
    if p.len() != model.channel().input_size() {
        return Err(Error::AlphabetMismatch(p.len(), model.channel().input_size()));
    }
    ns.par_iter()
        .map(|&n| {
            let counts = round_to_type(p, n);
            let pn = type_distribution(&counts);
            let rep = asm.refined_bound(n, zeta, &pn)?;
            let exact = if n <= np_cap {
                let q = saddle_at(model.channel(), asm.rate(), &pn)?.q_star;
                Some(exact_alpha_star(model.channel(), &q, &counts, asm.rate())?)
            } else {
                None
            };
            let log_ratio = exact.map(|(_, la)| la - rep.log_bound);
            let row = BoundRow {
                n,
                branch: rep.branch.as_str(),
                failed_conditions: rep.n_conditions.iter().filter(|c| !c.ok).map(|c| c.name).collect::<Vec<_>>().join(";"),
                exponent: rep.exponent,
                prefactor: rep.prefactor,
                bound: rep.bound,
                log_bound: rep.log_bound,
                log_closed_form: rep.log_theorem1_closed_form,
                alpha_star: exact.map(|e| e.0),
                log_alpha_star: exact.map(|e| e.1),
                ratio: log_ratio.map(f64::exp),
                log_ratio,
            };
            Ok((rep, row))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// BSC study

fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.ln() - (1.0 - x) * (1.0 - x).ln()
}

fn d2(a: f64, b: f64) -> f64 {
    let t = |x: f64, y: f64| if x <= 0.0 { 0.0 } else { x * (x / y).ln() };
    t(a, b) + t(1.0 - a, 1.0 - b)
}

/// Inverse of the binary entropy on `[0, 1/2]`.
fn h2_inv(v: f64) -> f64 {
    if v >= 2f64.ln() {
        return 0.5;
    }
    if v <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if h2(m) < v {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form sphere-packing exponent of BSC(p) at `0 <= r < log 2`.
pub fn bsc_esp(p: f64, r: f64) -> f64 {
    let d = h2_inv(2f64.ln() - r);
    if d <= p {
        0.0
    } else {
        d2(d, p)
    }
}

fn log_binomial_terms(n: usize, p: f64) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    (0..=n).map(|k| lf[n] - lf[k] - lf[n - k] + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).collect()
}

fn log_sum(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `n*`: the largest `k` with `sum_{j<=k} C(N,j) 2^-N <= e^(-NR)`, and the
/// exact `alpha* = P(Bin(N,p) > n*)` in log form.
pub fn bsc_n_star(p: f64, n: usize, rate: f64) -> (usize, f64) {
    let lq = log_binomial_terms(n, 0.5);
    let budget = -(n as f64) * rate;
    let mut acc = f64::NEG_INFINITY;
    let mut k_star = 0;
    for (k, &l) in lq.iter().enumerate() {
        let m = acc.max(l);
        let next = m + ((acc - m).exp() + (l - m).exp()).ln();
        if next > budget {
            break;
        }
        acc = next;
        k_star = k;
    }
    let lp = log_binomial_terms(n, p);
    (k_star, log_sum(&lp[k_star + 1..]))
}

#[derive(Debug, Clone, Serialize)]
pub struct BscRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_star: usize,
    pub n_star_over_n: f64,
    /// Upper bound on `n*/N` from the binomial-tail lower bound with
    /// `K1 = 1/sqrt(2)`.
    pub n_star_upper: f64,
    pub alpha_star: f64,
    pub log_alpha_star: f64,
    /// `exp(-N D(q_N||p)) / sqrt(2N)` with `q_N = n_star_upper + 1/N`.
    pub log_tail_bound: f64,
    pub tail_bound_ok: bool,
    pub esp: f64,
    /// `E_SP(R - log(sqrt N)/N)`.
    pub esp_shifted: f64,
    pub log_refined_bound: f64,
    pub refined_branch: &'static str,
    pub refined_ok: bool,
}

/// The BSC chain: exact `alpha*`, the sphere radius `n*`, a closed
/// binomial-tail lower bound and the refined bound, per blocklength.
pub fn bsc_study(p: f64, rate: f64, ns: &[usize], zeta: f64, cfg: &BoundConfig) -> Result<Vec<BscRow>> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::domain(format!("crossover {p} must lie in (0, 1/2)")));
    }
    check_grid("N", ns)?;
    let model = ChannelModel::new(Channel::bsc(p)?)?;
    model.check_rate(rate)?;
    let asm = BoundAssembly::new(&model, rate, cfg)?;
    let u = Distribution::uniform(2);
    let esp = bsc_esp(p, rate);
    ns.par_iter()
        .map(|&n| {
            let nf = n as f64;
            let (n_star, log_alpha) = bsc_n_star(p, n, rate);
            // P(Bin(N,1/2) <= k) >= exp(-N D(k/N||1/2)) / sqrt(2N), so
            // n*/N <= h^-1(log 2 - R + log(sqrt(2N))/N).
            let n_star_upper = h2_inv(2f64.ln() - rate + (2.0 * nf).sqrt().ln() / nf);
            let q_n = n_star_upper + 1.0 / nf;
            let log_tail_bound =
                if q_n > p && q_n < 1.0 { -nf * d2(q_n, p) - (2.0 * nf).sqrt().ln() } else { f64::NEG_INFINITY };
            let shifted = rate - nf.sqrt().ln() / nf;
            let rep = asm.refined_bound(n, zeta, &u)?;
            Ok(BscRow {
                n,
                n_star,
                n_star_over_n: n_star as f64 / nf,
                n_star_upper,
                alpha_star: log_alpha.exp(),
                log_alpha_star: log_alpha,
                log_tail_bound,
                tail_bound_ok: log_tail_bound <= log_alpha,
                esp,
                esp_shifted: if shifted > 0.0 { bsc_esp(p, shifted) } else { f64::NAN },
                log_refined_bound: rep.log_bound,
                refined_branch: rep.branch.as_str(),
                refined_ok: rep.log_bound <= log_alpha,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Fixed output distribution study

#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub channel: &'static str,
    pub param: f64,
    #[serde(rename = "R")]
    pub rate: f64,
    pub status: &'static str,
    pub esp: f64,
    pub p_star: String,
    /// The fixed output law `Q*_{R,P*_R}`.
    pub q_fixed: String,
    /// `max_P e_SP(Q_fixed, P, R)`; infinite when some composition makes
    /// the constraint infeasible.
    pub max_e: f64,
    pub gap: f64,
    pub gap_infinite: bool,
    /// Supremum over the compositions where `e_SP` is finite.
    pub max_e_finite: f64,
    pub gap_finite: f64,
    pub argmax_finite: String,
    /// Brute-force primal value at `argmax_finite`.
    pub grid_check: f64,
}

/// Gap between `E_SP(R)` and `max_P e_SP(Q,P,R)` with `Q = Q*_{R,P*_R}`
/// held fixed across compositions.
pub fn fixed_q_gap(
    channel: &'static str,
    param: f64,
    model: &ChannelModel,
    rate: f64,
    grid: Option<GridOptions>,
) -> Result<GapRow> {
    let nan = f64::NAN;
    if model.check_rate(rate).is_err() {
        return Ok(GapRow {
            channel,
            param,
            rate,
            status: status(false),
            esp: nan,
            p_star: String::new(),
            q_fixed: String::new(),
            max_e: nan,
            gap: nan,
            gap_infinite: false,
            max_e_finite: nan,
            gap_finite: nan,
            argmax_finite: String::new(),
            grid_check: nan,
        });
    }
    let w = model.channel();
    let grid = match grid {
        Some(g) => g,
        None => GridOptions::for_inputs(w.input_size())?,
    };
    let e = esp_of_r(model, rate, Some(grid))?;
    let q = e.best().q_star.clone();
    let f = |p: &Distribution| e_sp_fixed_q(w, &q, p, rate);
    let any_infinite = crate::simplex::simplex_grid(w.input_size(), grid.resolution)
        .par_iter()
        .map(|p| Ok(f(p)?.is_infinite()))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .any(|b| b);
    let best = maximize_over_simplex(w.input_size(), &grid, 0.0, |p| {
        let v = f(p)?;
        Ok(if v.is_finite() { v } else { f64::NEG_INFINITY })
    })?;
    let fin = &best[0];
    let max_e = if any_infinite { f64::INFINITY } else { fin.value.max(e.value) };
    Ok(GapRow {
        channel,
        param,
        rate,
        status: status(true),
        esp: e.value,
        p_star: fmt_dist(&e.best().composition),
        q_fixed: fmt_dist(&q),
        max_e,
        gap: max_e - e.value,
        gap_infinite: any_infinite,
        max_e_finite: fin.value,
        gap_finite: fin.value - e.value,
        argmax_finite: fmt_dist(&fin.p),
        grid_check: if w.output_size() <= 3 { e_sp_primal_grid(w, &q, &fin.p, rate)? } else { nan },
    })
}

/// Z-channel rows for every `(q, R)`, then BSC control rows at the same
/// rates. With no rates given, eight interior rates are used per channel.
pub fn zchannel_study(qs: &[f64], rates: Option<&[f64]>, control_p: f64) -> Result<Vec<GapRow>> {
    check_grid("q", qs)?;
    if let Some(r) = rates {
        check_grid("R", r)?;
    }
    let mut jobs: Vec<(&'static str, f64, ChannelModel)> = Vec::new();
    for &q in qs {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("Z-channel parameter {q} must lie in (0, 1)")));
        }
        jobs.push(("z", q, ChannelModel::new(Channel::z_channel(q)?)?));
    }
    jobs.push(("bsc", control_p, ChannelModel::new(Channel::bsc(control_p)?)?));
    let tasks: Vec<(&'static str, f64, &ChannelModel, f64)> = jobs
        .iter()
        .flat_map(|(name, param, m)| {
            let rs = match rates {
                Some(r) => r.to_vec(),
                None => interior_rates(m, 8),
            };
            rs.into_iter().map(move |r| (*name, *param, m, r))
        })
        .collect();
    tasks.par_iter().map(|&(name, param, m, r)| fixed_q_gap(name, param, m, r, None)).collect()
}
