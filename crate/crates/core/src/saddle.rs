//! The sphere-packing exponent at a fixed composition as a saddle point.
//!
//! With `Lambda_{Q,P}(l) = sum_x P(x) log sum_y W(y|x)^(1-l) Q(y)^l` and
//! `K(rho, Q) = -rho R - (1+rho) Lambda_{Q,P}(rho/(1+rho))`,
//!
//! ```text
//! E_SP(R,P) = max_{rho >= 0} min_Q K(rho, Q) = K(rho*, Q*).
//! ```
//!
//! For fixed `rho` the inner problem is a concave maximization of
//! `Lambda_{Q,P}` over `Q`. Its optimality condition is the fixed point
//! `Q(y) = sum_x P(x) W~(y|x)` where `W~` is the row tilted toward `Q`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channel::{Channel, ConditionalChannel};
use crate::dist::{is_zero, log_sum_exp, Distribution};
use crate::error::{Error, Result};
use crate::info::{conditional_kl, mutual_information, tilted_channel_row};
use crate::model::ChannelModel;
use crate::simplex::{maximize_over_simplex, GridOptions};

/// L1 tolerance on the fixed-point residual of the inner problem.
pub const INNER_TOL: f64 = 1e-12;
/// Iteration cap for the inner problem.
pub const INNER_MAX_ITER: usize = 100_000;
/// Residuals above this after the iteration cap are reported as failures.
pub const INNER_ACCEPT: f64 = 1e-10;
/// Exponents below this are treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-10;
/// Compositions within this of the maximal exponent join the argmax set.
pub const ARGMAX_TOL: f64 = 1e-8;

fn check_sizes(w: &Channel, q: &Distribution, p: &Distribution) -> Result<()> {
    if q.len() != w.output_size() {
        return Err(Error::AlphabetMismatch(q.len(), w.output_size()));
    }
    if p.len() != w.input_size() {
        return Err(Error::AlphabetMismatch(p.len(), w.input_size()));
    }
    Ok(())
}

fn row_log_partition(w_row: &Distribution, q: &Distribution, lambda: f64) -> f64 {
    log_sum_exp(
        w_row
            .probs()
            .iter()
            .zip(q.probs())
            .filter(|(&w, &qy)| !is_zero(w) && !is_zero(qy))
            .map(|(&w, &qy)| (1.0 - lambda) * w.ln() + lambda * qy.ln()),
    )
}

/// `Lambda_{Q,P}(lambda)`. Zero at `lambda = 0`; `-inf` when some row in
/// `S(P)` shares no output with `Q`.
pub fn lambda_qp(w: &Channel, q: &Distribution, p: &Distribution, lambda: f64) -> Result<f64> {
    check_sizes(w, q, p)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for x in p.support() {
        let z = row_log_partition(w.row(x), q, lambda);
        if z == f64::NEG_INFINITY {
            return Ok(z);
        }
        acc += p[x] * z;
    }
    Ok(acc)
}

/// `Lambda_{Q,P}` and its derivative in `lambda`, for `lambda > 0`.
pub(crate) fn lambda_and_slope(w: &Channel, q: &Distribution, p: &Distribution, lambda: f64) -> (f64, f64) {
    let mut val = 0.0;
    let mut der = 0.0;
    for x in p.support() {
        let terms: Vec<(f64, f64)> = w
            .row(x)
            .probs()
            .iter()
            .zip(q.probs())
            .filter(|(&wy, &qy)| !is_zero(wy) && !is_zero(qy))
            .map(|(&wy, &qy)| ((1.0 - lambda) * wy.ln() + lambda * qy.ln(), qy.ln() - wy.ln()))
            .collect();
        let z = log_sum_exp(terms.iter().map(|t| t.0));
        if z == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, f64::NAN);
        }
        val += p[x] * z;
        der += p[x] * terms.iter().map(|(a, l)| (a - z).exp() * l).sum::<f64>();
    }
    (val, der)
}

/// `K_{R,P}(rho, Q)`; `+inf` when `Lambda_{Q,P} = -inf` and `rho > 0`.
pub fn k_rp(w: &Channel, rho: f64, q: &Distribution, rate: f64, p: &Distribution) -> Result<f64> {
    if rho < 0.0 {
        return Err(Error::domain(format!("rho = {rho} is negative")));
    }
    if rho == 0.0 {
        check_sizes(w, q, p)?;
        return Ok(0.0);
    }
    let l = lambda_qp(w, q, p, rho / (1.0 + rho))?;
    if l == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(-rho * rate - (1.0 + rho) * l)
}

// ---------------------------------------------------------------------------
// Inner problem

/// Maximizer of `Lambda_{Q,P}(rho/(1+rho))` over `Q`.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub q: Distribution,
    /// `||Q - sum_x P(x) W~(.|x)||_1` at the returned `Q`.
    pub residual: f64,
    pub iterations: usize,
}

struct InnerProblem {
    lambda: f64,
    ny: usize,
    /// Output letters reachable from `S(P)`.
    outputs: Vec<usize>,
    /// Per input in `S(P)`: weight and `(position in outputs, log W)` pairs.
    rows: Vec<(f64, Vec<(usize, f64)>)>,
}

struct InnerEval {
    phi: f64,
    t: Vec<f64>,
    tilts: Vec<Vec<f64>>,
}

impl InnerProblem {
    fn new(w: &Channel, p: &Distribution, lambda: f64) -> Self {
        let ny = w.output_size();
        let support = p.support();
        let outputs: Vec<usize> =
            (0..ny).filter(|&y| support.iter().any(|&x| w.row(x).in_support(y))).collect();
        let pos = |y: usize| outputs.iter().position(|&o| o == y).expect("reachable output");
        let rows = support
            .iter()
            .map(|&x| {
                let entries = (0..ny).filter(|&y| w.row(x).in_support(y)).map(|y| (pos(y), w.get(x, y).ln())).collect();
                (p[x], entries)
            })
            .collect();
        Self { lambda, ny, outputs, rows }
    }

    fn eval(&self, q: &[f64]) -> InnerEval {
        let lq: Vec<f64> = q.iter().map(|v| v.ln()).collect();
        let mut t = vec![0.0; q.len()];
        let mut phi = 0.0;
        let mut tilts = Vec::with_capacity(self.rows.len());
        for (px, entries) in &self.rows {
            let a: Vec<f64> = entries.iter().map(|&(j, lw)| (1.0 - self.lambda) * lw + self.lambda * lq[j]).collect();
            let z = log_sum_exp(a.iter().copied());
            phi += px * z;
            let tilt: Vec<f64> = a.iter().map(|v| (v - z).exp()).collect();
            for (&(j, _), &v) in entries.iter().zip(&tilt) {
                t[j] += px * v;
            }
            tilts.push(tilt);
        }
        InnerEval { phi, t, tilts }
    }

    /// Newton direction for the constrained maximization, in the scaled
    /// coordinates `d = Q * e`.
    fn newton_direction(&self, q: &[f64], ev: &InnerEval) -> Option<Vec<f64>> {
        let n = q.len();
        let l = self.lambda;
        let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
        for ((px, entries), tilt) in self.rows.iter().zip(&ev.tilts) {
            for (a, &(ja, _)) in entries.iter().enumerate() {
                m[(ja, ja)] += px * (l - 1.0) * tilt[a];
                for (b, &(jb, _)) in entries.iter().enumerate() {
                    m[(ja, jb)] -= px * l * tilt[a] * tilt[b];
                }
            }
        }
        for j in 0..n {
            m[(j, n)] = q[j];
            m[(n, j)] = q[j];
        }
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for j in 0..n {
            rhs[j] = -ev.t[j];
        }
        let sol = m.lu().solve(&rhs)?;
        let e: Vec<f64> = (0..n).map(|j| sol[j]).collect();
        e.iter().all(|v| v.is_finite()).then_some(e)
    }

    fn solve(&self, init: Vec<f64>) -> Result<(Vec<f64>, f64, usize)> {
        let mut q = init;
        let mut it = 0;
        loop {
            let ev = self.eval(&q);
            let res: f64 = q.iter().zip(&ev.t).map(|(a, b)| (a - b).abs()).sum();
            if res <= INNER_TOL || it >= INNER_MAX_ITER {
                if res > INNER_ACCEPT {
                    return Err(Error::NonConvergence { what: "inner optimization over Q", residual: res });
                }
                return Ok((q, res, it));
            }
            it += 1;
            if it <= 10 {
                // Damped warm-up.
                q = q.iter().zip(&ev.t).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
                continue;
            }
            let mut accepted = false;
            if let Some(e) = self.newton_direction(&q, &ev) {
                let mut step = 1.0;
                for _ in 0..60 {
                    if e.iter().all(|v| 1.0 + step * v > 0.0) {
                        let cand: Vec<f64> = q.iter().zip(&e).map(|(a, v)| a * (1.0 + step * v)).collect();
                        let s: f64 = cand.iter().sum();
                        let cand: Vec<f64> = cand.iter().map(|v| v / s).collect();
                        let ec = self.eval(&cand);
                        let rc: f64 = cand.iter().zip(&ec.t).map(|(a, b)| (a - b).abs()).sum();
                        if ec.phi >= ev.phi - 1e-15 * (1.0 + ev.phi.abs()) && rc < res {
                            q = cand;
                            accepted = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
            }
            if !accepted {
                q = ev.t;
            }
        }
    }

    fn expand(&self, q: &[f64]) -> Distribution {
        let mut full = vec![0.0; self.ny];
        for (&y, &v) in self.outputs.iter().zip(q) {
            full[y] = v;
        }
        Distribution::from_raw(full)
    }
}

/// Solves the inner problem at `rho`, starting from the output
/// distribution `PW`.
pub fn inner_opt_q(w: &Channel, rho: f64, p: &Distribution) -> Result<InnerSolution> {
    inner_opt_q_from(w, rho, p, None)
}

/// As [`inner_opt_q`], optionally warm-started from `init`. A start that
/// misses part of the reachable outputs is ignored.
pub fn inner_opt_q_from(w: &Channel, rho: f64, p: &Distribution, init: Option<&Distribution>) -> Result<InnerSolution> {
    if p.len() != w.input_size() {
        return Err(Error::AlphabetMismatch(p.len(), w.input_size()));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("rho = {rho} must be finite and non-negative")));
    }
    let pw = w.matrix().output_distribution(p)?;
    if rho == 0.0 {
        return Ok(InnerSolution { q: pw, residual: 0.0, iterations: 0 });
    }
    let prob = InnerProblem::new(w, p, rho / (1.0 + rho));
    let start = match init {
        Some(q0) if q0.len() == prob.ny && prob.outputs.iter().all(|&y| q0[y] > 1e-300) => {
            let v: Vec<f64> = prob.outputs.iter().map(|&y| q0[y]).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        }
        _ => prob.outputs.iter().map(|&y| pw[y]).collect(),
    };
    let (q, residual, iterations) = prob.solve(start)?;
    Ok(InnerSolution { q: prob.expand(&q), residual, iterations })
}

// ---------------------------------------------------------------------------
// Outer problem

/// Saddle point `(rho*, Q*)` and the exponent `E_SP(R,P)` at one
/// composition.
#[derive(Debug, Clone, Serialize)]
pub struct SaddlePoint {
    pub rate: f64,
    pub composition: Distribution,
    pub rho_star: f64,
    pub q_star: Distribution,
    /// `E_SP(R,P)`.
    pub value: f64,
    pub residual: f64,
    /// Final bracket of the search over `rho`.
    pub bracket: (f64, f64),
    /// `E_SP(R,P) = 0`: the rate is at or above `I(P;W)`.
    pub degenerate: bool,
}

/// Computes the saddle point at `(R, P)` for `R` in `(R_inf, C)`.
pub fn saddle_point(model: &ChannelModel, rate: f64, p: &Distribution) -> Result<SaddlePoint> {
    model.check_rate(rate)?;
    saddle_at(model.channel(), rate, p)
}

/// Derivative of `rho -> min_Q K(rho, Q)` at an inner solution.
fn outer_slope(w: &Channel, rate: f64, p: &Distribution, rho: f64, q: &Distribution) -> f64 {
    let (l, dl) = lambda_and_slope(w, q, p, rho / (1.0 + rho));
    -rate - l - dl / (1.0 + rho)
}

/// Saddle point without the rate-domain check. The composition-level
/// exponent is finite whenever `R > R_inf(P)`.
pub(crate) fn saddle_at(w: &Channel, rate: f64, p: &Distribution) -> Result<SaddlePoint> {
    if p.len() != w.input_size() {
        return Err(Error::AlphabetMismatch(p.len(), w.input_size()));
    }
    let pw = w.matrix().output_distribution(p)?;
    let degenerate = |bracket| SaddlePoint {
        rate,
        composition: p.clone(),
        rho_star: 0.0,
        q_star: pw.clone(),
        value: 0.0,
        residual: 0.0,
        bracket,
        degenerate: true,
    };
    // The outer function is concave with slope I(P;W) - R at zero.
    if mutual_information(p, w.matrix())? <= rate {
        return Ok(degenerate((0.0, 0.0)));
    }
    let mut warm = pw.clone();
    let slope_at = |rho: f64, warm: &mut Distribution| -> Result<f64> {
        let s = inner_opt_q_from(w, rho, p, Some(warm))?;
        let d = outer_slope(w, rate, p, rho, &s.q);
        *warm = s.q;
        Ok(d)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while slope_at(hi, &mut warm)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 2f64.powi(50) {
            return Err(Error::domain(format!("exponent is unbounded at rate {rate}; rate is below R_inf(P)")));
        }
    }
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if slope_at(mid, &mut warm)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    let s = inner_opt_q_from(w, rho, p, Some(&warm))?;
    let value = k_rp(w, rho, &s.q, rate, p)?;
    if value < DEGENERATE_TOL {
        return Ok(degenerate((lo, hi)));
    }
    Ok(SaddlePoint {
        rate,
        composition: p.clone(),
        rho_star: rho,
        q_star: s.q,
        value,
        residual: s.residual,
        bracket: (lo, hi),
        degenerate: false,
    })
}

/// Tilted channel with rows `W~_{lambda, Q}` on `S(P)` and `W` elsewhere.
pub fn tilted_channel(w: &Channel, q: &Distribution, p: &Distribution, lambda: f64) -> Result<ConditionalChannel> {
    let rows = (0..w.input_size())
        .map(|x| if p.in_support(x) { tilted_channel_row(w.row(x), q, lambda) } else { Ok(w.row(x).clone()) })
        .collect::<Result<Vec<_>>>()?;
    ConditionalChannel::new(rows)
}

/// `E_SP(R,P)` by the primal route: walks the family `V_rho` of tilted
/// channels and locates, by bisection on `rho`, the member with
/// `I(P;V_rho) = R`. Returns `D(V_rho||W|P)` there.
pub fn esp_primal_oracle(model: &ChannelModel, rate: f64, p: &Distribution) -> Result<f64> {
    model.check_rate(rate)?;
    let w = model.channel();
    if mutual_information(p, w.matrix())? <= rate {
        return Ok(0.0);
    }
    let member = |rho: f64| -> Result<ConditionalChannel> {
        let s = inner_opt_q(w, rho, p)?;
        tilted_channel(w, &s.q, p, rho / (1.0 + rho))
    };
    let mut lo = 0.0;
    let mut hi = None;
    for k in 0..=56 {
        let rho = 2f64.powi(k) / 64.0;
        if mutual_information(p, &member(rho)?)? <= rate {
            hi = Some(rho);
            break;
        }
        lo = rho;
    }
    let Some(mut hi) = hi else {
        return Err(Error::domain(format!("no tilted channel reaches rate {rate}")));
    };
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mutual_information(p, &member(mid)?)? <= rate {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    conditional_kl(&member(hi)?, w, p)
}

// ---------------------------------------------------------------------------
// Maximization over compositions

/// `E_SP(R) = max_P E_SP(R,P)` with its (approximate) argmax set.
#[derive(Debug, Clone, Serialize)]
pub struct EspMaximum {
    pub rate: f64,
    pub value: f64,
    /// Saddle points at every composition within 1e-8 of the maximum,
    /// best first.
    pub argmax: Vec<SaddlePoint>,
}

impl EspMaximum {
    /// `rho*_R`: the largest `rho*` over the argmax set.
    pub fn rho_star(&self) -> f64 {
        self.argmax.iter().map(|s| s.rho_star).fold(0.0, f64::max)
    }

    pub fn best(&self) -> &SaddlePoint {
        &self.argmax[0]
    }
}

/// `E_SP(R)` by a simplex grid over compositions with local refinement.
pub fn esp_of_r(model: &ChannelModel, rate: f64, opts: Option<GridOptions>) -> Result<EspMaximum> {
    model.check_rate(rate)?;
    let w = model.channel();
    let opts = match opts {
        Some(o) => o,
        None => GridOptions::for_inputs(w.input_size())?,
    };
    let found = maximize_over_simplex(w.input_size(), &opts, ARGMAX_TOL, |p| Ok(saddle_at(w, rate, p)?.value))?;
    let argmax = found.iter().map(|m| saddle_at(w, rate, &m.p)).collect::<Result<Vec<_>>>()?;
    Ok(EspMaximum { rate, value: argmax[0].value, argmax })
}

/// `rho*_R = max { rho*_{R,P} : P in the argmax set }`.
pub fn rho_star_r(model: &ChannelModel, rate: f64) -> Result<f64> {
    Ok(esp_of_r(model, rate, None)?.rho_star())
}
