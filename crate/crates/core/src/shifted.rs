//! The shifted channel `W-` and the one-dimensional exponential family
//! generated by `log(W-/W)`.
//!
//! For `x` in `S(P)` the row `W-(.|x)` is `Q*` restricted to `S(W(.|x))`
//! and renormalized. Rows off `S(P)` are copies of `W`. The family
//!
//! ```text
//! Lambda0(l) = sum_x P(x) log sum_{y in S(W(.|x))} W(y|x)^(1-l) W-(y|x)^l
//! ```
//!
//! drives the shifted exponent
//! `e~(r) = max_{s >= 0} { -s r - (1+s) Lambda0(s/(1+s)) }`, which equals
//! `E_SP(R,P)` at `r = r(R,P) = R - D(W-||Q*|P)`.

use serde::Serialize;

use crate::channel::{Channel, ConditionalChannel};
use crate::dist::{is_zero, log_sum_exp, Distribution};
use crate::error::{Error, Result};
use crate::info::conditional_kl;
use crate::model::ChannelModel;
use crate::saddle::{saddle_point, SaddlePoint};

// ---------------------------------------------------------------------------
// Exponential families over rows

/// Cumulant-generating function of a per-row log-ratio and its
/// derivatives at one tilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cumulants {
    /// `Lambda(l)`.
    pub value: f64,
    /// `Lambda'(l)`: tilted mean of the log-ratio.
    pub first: f64,
    /// `Lambda''(l)`: tilted variance.
    pub second: f64,
    /// `P`-weighted tilted third absolute central moment.
    pub third_abs: f64,
}

#[derive(Debug, Clone)]
struct FamilyRow {
    weight: f64,
    log_w: Vec<f64>,
    ratio: Vec<f64>,
}

/// The family `l -> sum_x P(x) log sum_y W(y|x) exp(l * ratio_x(y))` where
/// `ratio_x = log(A_x / W(.|x))` on `S(W(.|x))`.
#[derive(Debug, Clone)]
pub(crate) struct RatioFamily {
    rows: Vec<FamilyRow>,
}

impl RatioFamily {
    /// `alt(x)` must dominate `W(.|x)` for every `x` in `S(P)`.
    pub(crate) fn new<'a>(w: &Channel, p: &Distribution, alt: impl Fn(usize) -> &'a Distribution) -> Result<Self> {
        let mut rows = Vec::new();
        for x in p.support() {
            let a = alt(x);
            let mut log_w = Vec::new();
            let mut ratio = Vec::new();
            for y in w.row(x).support() {
                if is_zero(a[y]) {
                    return Err(Error::domain(format!("alternative does not dominate row {x} of W")));
                }
                log_w.push(w.get(x, y).ln());
                ratio.push(a[y].ln() - w.get(x, y).ln());
            }
            rows.push(FamilyRow { weight: p[x], log_w, ratio });
        }
        Ok(Self { rows })
    }

    pub(crate) fn cumulants(&self, l: f64) -> Cumulants {
        let mut c = Cumulants { value: 0.0, first: 0.0, second: 0.0, third_abs: 0.0 };
        for row in &self.rows {
            let a: Vec<f64> = row.log_w.iter().zip(&row.ratio).map(|(lw, t)| lw + l * t).collect();
            let z = log_sum_exp(a.iter().copied());
            let probs: Vec<f64> = a.iter().map(|v| (v - z).exp()).collect();
            let m1: f64 = probs.iter().zip(&row.ratio).map(|(p, t)| p * t).sum();
            let (mut m2, mut m3) = (0.0, 0.0);
            for (p, t) in probs.iter().zip(&row.ratio) {
                let d = (t - m1).abs();
                m2 += p * d * d;
                m3 += p * d * d * d;
            }
            c.value += row.weight * z;
            c.first += row.weight * m1;
            c.second += row.weight * m2;
            c.third_abs += row.weight * m3;
        }
        c
    }

    /// Range of `Lambda'` over the real line, as `(inf, sup)`.
    fn slope_range(&self) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for row in &self.rows {
            lo += row.weight * row.ratio.iter().copied().fold(f64::INFINITY, f64::min);
            hi += row.weight * row.ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        (lo, hi)
    }

    /// `-sum_x P(x) log W(M_x|x)` where `M_x` are the atoms where the ratio
    /// is extreme; the conjugate at the ends of the slope range.
    fn extreme_mass_rate(&self, upper: bool) -> f64 {
        let mut acc = 0.0;
        for row in &self.rows {
            let ext = if upper {
                row.ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            } else {
                row.ratio.iter().copied().fold(f64::INFINITY, f64::min)
            };
            let mass = log_sum_exp(
                row.log_w.iter().zip(&row.ratio).filter(|(_, t)| (**t - ext).abs() <= 1e-12).map(|(lw, _)| *lw),
            );
            acc -= row.weight * mass;
        }
        acc
    }

    /// Solves `max_{s >= 0} { -s r - (1+s) Lambda(s/(1+s)) }`.
    ///
    /// With `h(l) = -Lambda(l) - (1-l) Lambda'(l)`, which decreases from
    /// `-Lambda'(0)` to `-Lambda(1)`, the maximizer is `s* = l/(1-l)` at
    /// `h(l) = r`.
    pub(crate) fn dual_exponent(&self, r: f64) -> Result<DualExponent> {
        if !r.is_finite() {
            return Err(Error::domain(format!("rate argument {r} is not finite")));
        }
        let h = |l: f64| {
            let c = self.cumulants(l);
            -c.value - (1.0 - l) * c.first
        };
        let h0 = h(0.0);
        if r >= h0 {
            return Ok(DualExponent { value: 0.0, s_star: 0.0, eta: 0.0 });
        }
        let h1 = h(1.0);
        if r < h1 {
            return Ok(DualExponent { value: f64::INFINITY, s_star: f64::INFINITY, eta: 1.0 });
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) > r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let eta = 0.5 * (lo + hi);
        if eta >= 1.0 {
            let c = self.cumulants(1.0);
            return Ok(DualExponent { value: c.first - c.value, s_star: f64::INFINITY, eta: 1.0 });
        }
        let s = eta / (1.0 - eta);
        let value = -s * r - (1.0 + s) * self.cumulants(eta).value;
        Ok(DualExponent { value, s_star: s, eta })
    }

    /// `sup_l { l z - Lambda(l) }` over the real line.
    pub(crate) fn conjugate(&self, z: f64) -> Conjugate {
        let (zmin, zmax) = self.slope_range();
        let slack = 1e-12 * (1.0 + z.abs());
        if z > zmax + slack || z < zmin - slack {
            return Conjugate::Infinite;
        }
        if zmax - zmin <= 1e-15 {
            // Degenerate family: Lambda is linear.
            return Conjugate::Boundary { value: 0.0 };
        }
        if z >= zmax - 1e-14 * (1.0 + z.abs()) {
            return Conjugate::Boundary { value: self.extreme_mass_rate(true) };
        }
        if z <= zmin + 1e-14 * (1.0 + z.abs()) {
            return Conjugate::Boundary { value: self.extreme_mass_rate(false) };
        }
        let slope = |l: f64| self.cumulants(l).first;
        let (mut lo, mut hi) = (-1.0f64, 2.0f64);
        while slope(lo) > z {
            lo *= 2.0;
            if lo < -1e8 {
                return Conjugate::Boundary { value: self.extreme_mass_rate(false) };
            }
        }
        while slope(hi) < z {
            hi *= 2.0;
            if hi > 1e8 {
                return Conjugate::Boundary { value: self.extreme_mass_rate(true) };
            }
        }
        // Bisect to machine precision.
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let l = 0.5 * (lo + hi);
        Conjugate::Interior { value: l * z - self.cumulants(l).value, lambda: l }
    }
}

/// Solution of a one-dimensional dual exponent problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualExponent {
    pub value: f64,
    /// Optimal `s`; `+inf` when the optimum sits at the edge `l = 1`.
    pub s_star: f64,
    /// `s*/(1+s*)`.
    pub eta: f64,
}

/// Value of a Fenchel-Legendre transform at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Conjugate {
    /// Attained at a finite tilt `lambda` with `Lambda'(lambda) = z`.
    Interior { value: f64, lambda: f64 },
    /// `z` is an end of the slope range; the supremum is a limit.
    Boundary { value: f64 },
    /// `z` is outside the closure of the slope range.
    Infinite,
}

impl Conjugate {
    pub fn value(&self) -> f64 {
        match *self {
            Conjugate::Interior { value, .. } | Conjugate::Boundary { value } => value,
            Conjugate::Infinite => f64::INFINITY,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Conjugate::Interior { lambda, .. } => Some(lambda),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Shifted channel

/// `W-` for a given `Q*`: rows in `S(P)` are `Q*` restricted to
/// `S(W(.|x))`; the others copy `W`.
pub fn w_minus(w: &Channel, q_star: &Distribution, p: &Distribution) -> Result<ConditionalChannel> {
    if q_star.len() != w.output_size() {
        return Err(Error::AlphabetMismatch(q_star.len(), w.output_size()));
    }
    let rows = (0..w.input_size())
        .map(|x| {
            if !p.in_support(x) {
                return Ok(w.row(x).clone());
            }
            let v: Vec<f64> =
                (0..w.output_size()).map(|y| if w.row(x).in_support(y) { q_star[y] } else { 0.0 }).collect();
            Distribution::from_weights(v)
                .map_err(|_| Error::domain(format!("Q* misses the support of row {x}")))
        })
        .collect::<Result<Vec<_>>>()?;
    ConditionalChannel::new(rows)
}

/// `D(W-||Q*|P) = -sum_x P(x) log Q*(S(W(.|x)))`.
pub fn d_wminus_qstar(w: &Channel, q_star: &Distribution, p: &Distribution) -> f64 {
    -p.support().iter().map(|&x| p[x] * q_star.mass_of(w.row(x).support()).ln()).sum::<f64>()
}

/// Everything derived from the saddle point at one `(R, P)`.
#[derive(Debug, Clone)]
pub struct ShiftedChannel {
    channel: Channel,
    saddle: SaddlePoint,
    w_minus: ConditionalChannel,
    d_wminus_qstar: f64,
    d_w_wminus: f64,
    d_wminus_w: f64,
    family: RatioFamily,
    qstar_family: RatioFamily,
}

/// `r(R,P) = R - D(W-||Q*|P)`.
pub fn r_of(model: &ChannelModel, rate: f64, p: &Distribution) -> Result<f64> {
    Ok(ShiftedChannel::new(model, rate, p)?.r())
}

impl ShiftedChannel {
    /// Needs `E_SP(R,P) > 0`.
    pub fn new(model: &ChannelModel, rate: f64, p: &Distribution) -> Result<Self> {
        Self::from_saddle(model.channel(), saddle_point(model, rate, p)?)
    }

    pub fn from_saddle(w: &Channel, saddle: SaddlePoint) -> Result<Self> {
        if saddle.degenerate {
            return Err(Error::domain(format!(
                "E_SP(R,P) = 0 at R = {}; the shifted channel needs a positive exponent",
                saddle.rate
            )));
        }
        let p = &saddle.composition;
        let wm = w_minus(w, &saddle.q_star, p)?;
        let d = d_wminus_qstar(w, &saddle.q_star, p);
        if saddle.rate - d <= 0.0 {
            return Err(Error::domain(format!("r(R,P) = {} is not positive", saddle.rate - d)));
        }
        let family = RatioFamily::new(w, p, |x| wm.row(x))?;
        let q = saddle.q_star.clone();
        let qstar_family = RatioFamily::new(w, p, |_| &q)?;
        let d_w_wminus = conditional_kl(w, &wm, p)?;
        let d_wminus_w = conditional_kl(&wm, w, p)?;
        Ok(Self {
            channel: w.clone(),
            w_minus: wm,
            d_wminus_qstar: d,
            d_w_wminus,
            d_wminus_w,
            family,
            qstar_family,
            saddle,
        })
    }

    pub fn saddle(&self) -> &SaddlePoint {
        &self.saddle
    }

    pub fn composition(&self) -> &Distribution {
        &self.saddle.composition
    }

    pub fn w_minus(&self) -> &ConditionalChannel {
        &self.w_minus
    }

    /// `D(W-||Q*|P)`.
    pub fn d_wminus_qstar(&self) -> f64 {
        self.d_wminus_qstar
    }

    /// `D(W||W-|P) = -Lambda0'(0)`.
    pub fn d_w_wminus(&self) -> f64 {
        self.d_w_wminus
    }

    /// `D(W-||W|P) = Lambda0'(1)`.
    pub fn d_wminus_w(&self) -> f64 {
        self.d_wminus_w
    }

    /// `r(R,P)`.
    pub fn r(&self) -> f64 {
        self.saddle.rate - self.d_wminus_qstar
    }

    /// `Lambda0` and its derivatives at `lambda` (any real value).
    pub fn cumulants(&self, lambda: f64) -> Cumulants {
        self.family.cumulants(lambda)
    }

    /// The reflected family `Lambda1(l) = Lambda0(1-l)`.
    pub fn cumulants_reflected(&self, lambda: f64) -> Cumulants {
        let c = self.family.cumulants(1.0 - lambda);
        Cumulants { value: c.value, first: -c.first, second: c.second, third_abs: c.third_abs }
    }

    /// `e0(s) = -(1+s) Lambda0(s/(1+s))`, evaluated from the channel
    /// entries directly rather than through the cumulant routine.
    pub fn e0(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let (a, b) = (1.0 / (1.0 + s), s / (1.0 + s));
        let p = &self.saddle.composition;
        let mut acc = 0.0;
        for x in p.support() {
            let z: f64 = self
                .channel
                .row(x)
                .support()
                .iter()
                .map(|&y| self.channel.get(x, y).powf(a) * self.w_minus.get(x, y).powf(b))
                .sum();
            acc += p[x] * z.ln();
        }
        -(1.0 + s) * acc
    }

    /// `e~_SP(R,P,r) = max_{s >= 0} { -s r + e0(s) }` for `r > 0`.
    pub fn tilde_esp(&self, r: f64) -> Result<DualExponent> {
        if r <= 0.0 {
            return Err(Error::domain(format!("shifted rate {r} must be positive")));
        }
        self.family.dual_exponent(r)
    }

    /// `Lambda0*(z)`.
    pub fn fenchel0(&self, z: f64) -> Conjugate {
        self.family.conjugate(z)
    }

    /// `Lambda1*(z) = z + Lambda0*(-z)`.
    pub fn fenchel1(&self, z: f64) -> Conjugate {
        match self.family.conjugate(-z) {
            Conjugate::Interior { value, lambda } => Conjugate::Interior { value: z + value, lambda: 1.0 - lambda },
            Conjugate::Boundary { value } => Conjugate::Boundary { value: z + value },
            Conjugate::Infinite => Conjugate::Infinite,
        }
    }

    /// `e_SP(Q*,P,r)` through the dual of its definition, working with
    /// `Q*` itself instead of `W-`.
    pub fn e_sp_qstar(&self, r: f64) -> Result<f64> {
        Ok(self.qstar_family.dual_exponent(r)?.value)
    }
}

/// `e_SP(Q,P,r) = min { D(V||W|P) : D(V||Q|P) <= r }` through its
/// one-dimensional dual. `Q` must dominate `W(.|x)` for `x` in `S(P)`.
/// Returns `+inf` when no `V << W` meets the constraint.
pub fn e_sp_fixed_q(w: &Channel, q: &Distribution, p: &Distribution, r: f64) -> Result<f64> {
    if q.len() != w.output_size() {
        return Err(Error::AlphabetMismatch(q.len(), w.output_size()));
    }
    if p.len() != w.input_size() {
        return Err(Error::AlphabetMismatch(p.len(), w.input_size()));
    }
    if r < 0.0 {
        return Err(Error::domain(format!("rate argument {r} is negative")));
    }
    Ok(RatioFamily::new(w, p, |_| q)?.dual_exponent(r)?.value)
}
