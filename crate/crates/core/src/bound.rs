//! Assembly of the refined sphere-packing lower bound
//!
//! ```text
//! P_e >= (K / sqrt(N)) exp(-N Lambda0*(e~(r_N) - r_N)),   r_N = r(R,P) - (1/2 + zeta) log N / N
//! ```
//!
//! for compositions with `E_SP(R,P) >= nu`, and `P_e >= e^(-N E_SP(R)) / 2`
//! for the others. The constants (`nu`, `K`, `K_max`, ...) are computed
//! numerically over a grid of compositions.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::info::conditional_kl_to;
use crate::model::ChannelModel;
use crate::saddle::{esp_of_r, saddle_at, EspMaximum};
use crate::sharp::BERRY_ESSEEN_C;
use crate::shifted::ShiftedChannel;
use crate::simplex::{round_to_type, simplex_grid, type_distribution, GridOptions};

/// Lower guard on the minimal tilted variance.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// Tunable parts of the assembly.
#[derive(Debug, Clone, Copy)]
pub struct BoundConfig {
    /// The constant `a` in `(1, 2)` used when choosing `nu`.
    pub a: f64,
    /// Composition grid; `None` picks the default for the input alphabet.
    pub grid: Option<GridOptions>,
    /// Points of the rate grid used for the slope bound `L`.
    pub slope_points: usize,
    /// Points of the tilt grid over `H`.
    pub lambda_points: usize,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { a: 1.5, grid: None, slope_points: 33, lambda_points: 65 }
    }
}

impl BoundConfig {
    fn grid_for(&self, nx: usize) -> Result<GridOptions> {
        match self.grid {
            Some(g) => Ok(g),
            None => GridOptions::for_inputs(nx),
        }
    }
}

/// The choice of `nu` and what it was computed from.
#[derive(Debug, Clone, Serialize)]
pub struct NuSelection {
    pub nu: f64,
    /// `(R - R_inf) / 2`.
    pub epsilon: f64,
    /// Bound on the slope of `E_SP` over `[R - epsilon, R]` (with a 25%
    /// margin on the finite differences).
    pub slope_bound: f64,
    pub esp: f64,
}

/// `nu = 0.9 min { a - 1, epsilon/2, E_SP(R)(2-a) / (a(2L+1)) }`.
pub fn select_nu(model: &ChannelModel, rate: f64, cfg: &BoundConfig) -> Result<NuSelection> {
    model.check_rate(rate)?;
    if !(cfg.a > 1.0 && cfg.a < 2.0) {
        return Err(Error::Config(format!("a = {} must lie in (1, 2)", cfg.a)));
    }
    if cfg.slope_points < 2 {
        return Err(Error::Config("slope grid needs at least two points".into()));
    }
    let grid = cfg.grid_for(model.channel().input_size())?;
    let epsilon = (rate - model.r_inf()) / 2.0;
    let m = cfg.slope_points - 1;
    let h = epsilon / m as f64;
    let values: Vec<f64> = (0..=m)
        .into_par_iter()
        .map(|i| Ok(esp_of_r(model, rate - epsilon + i as f64 * h, Some(grid))?.value))
        .collect::<Result<_>>()?;
    let slope = values.windows(2).map(|v| (v[1] - v[0]).abs() / h).fold(0.0, f64::max);
    let slope_bound = 1.25 * slope;
    let esp = values[m];
    let a = cfg.a;
    let nu = 0.9 * (a - 1.0).min(epsilon / 2.0).min(esp * (2.0 - a) / (a * (2.0 * slope_bound + 1.0)));
    Ok(NuSelection { nu, epsilon, slope_bound, esp })
}

/// Constants of the main branch, computed over the compositions `P` of the
/// grid with `E_SP(R,P) >= nu`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundConstants {
    pub nu: f64,
    /// `max D(W||Q*|P)`.
    pub upsilon: f64,
    /// Left end of `H = [h/(1+h), 1]`, `h = nu / (2 upsilon)`.
    pub h_lo: f64,
    /// `max m03 / Lambda0''` over `H` and the compositions.
    pub m_bar: f64,
    /// `max Lambda0''`.
    pub v_bar: f64,
    /// `min Lambda0''`, floored at 1e-10.
    pub v_low: f64,
    /// `2 c sqrt(2 pi) m_bar`.
    pub k_max: f64,
    /// `exp(-k_max) / (2 sqrt(2 pi v_bar))`.
    pub k: f64,
    /// `R - max D(W-||Q*|P)`.
    pub delta: f64,
    /// `max D(W-||W|P)`.
    pub f: f64,
    /// `F / (delta/2)`.
    pub s_tilde: f64,
    /// Number of grid compositions in the set.
    pub compositions: usize,
}

struct CompositionData {
    sc: ShiftedChannel,
    upsilon: f64,
}

/// Maximizes (or minimizes) `f` over `[lo, hi]` on a grid, then polishes
/// the best grid point by golden section inside its neighbouring cells.
fn extremum_on_interval(lo: f64, hi: f64, points: usize, maximize: bool, f: impl Fn(f64) -> f64) -> f64 {
    let sign = if maximize { 1.0 } else { -1.0 };
    let g = |x: f64| sign * f(x);
    let step = (hi - lo) / (points - 1) as f64;
    let (best_i, best_v) =
        (0..points).map(|i| (i, g(lo + i as f64 * step))).fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let (mut a, mut b) = (lo + best_i.saturating_sub(1) as f64 * step, (lo + (best_i + 1) as f64 * step).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = best_v;
    for _ in 0..60 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        let (gc, gd) = (g(c), g(d));
        best = best.max(gc).max(gd);
        if gc > gd {
            b = d;
        } else {
            a = c;
        }
    }
    sign * best
}

/// Computes [`BoundConstants`] for a given `nu`.
pub fn constants(model: &ChannelModel, rate: f64, nu: f64, cfg: &BoundConfig) -> Result<BoundConstants> {
    model.check_rate(rate)?;
    if nu.is_nan() || nu <= 0.0 {
        return Err(Error::domain(format!("nu = {nu} must be positive")));
    }
    let grid = cfg.grid_for(model.channel().input_size())?;
    let w = model.channel();
    let data: Vec<Option<CompositionData>> = simplex_grid(w.input_size(), grid.resolution)
        .into_par_iter()
        .map(|p| {
            let sp = saddle_at(w, rate, &p)?;
            if sp.degenerate || sp.value < nu {
                return Ok(None);
            }
            let upsilon = conditional_kl_to(w, &sp.q_star, &p)?;
            Ok(Some(CompositionData { sc: ShiftedChannel::from_saddle(w, sp)?, upsilon }))
        })
        .collect::<Result<_>>()?;
    let data: Vec<CompositionData> = data.into_iter().flatten().collect();
    if data.is_empty() {
        return Err(Error::domain(format!("no grid composition has E_SP(R,P) >= nu = {nu}")));
    }
    let upsilon = data.iter().map(|d| d.upsilon).fold(0.0, f64::max);
    let hh = nu / (2.0 * upsilon);
    let h_lo = hh / (1.0 + hh);
    let n = cfg.lambda_points.max(2);
    let per: Vec<(f64, f64, f64)> = data
        .par_iter()
        .map(|d| {
            let ratio = |l: f64| {
                let c = d.sc.cumulants(l);
                c.third_abs / c.second
            };
            let var = |l: f64| d.sc.cumulants(l).second;
            (
                extremum_on_interval(h_lo, 1.0, n, true, ratio),
                extremum_on_interval(h_lo, 1.0, n, true, var),
                extremum_on_interval(h_lo, 1.0, n, false, var),
            )
        })
        .collect();
    let m_bar = per.iter().map(|v| v.0).fold(0.0, f64::max);
    let v_bar = per.iter().map(|v| v.1).fold(0.0, f64::max);
    let v_low = per.iter().map(|v| v.2).fold(f64::INFINITY, f64::min).max(VARIANCE_FLOOR);
    let two_pi = 2.0 * std::f64::consts::PI;
    let k_max = 2.0 * BERRY_ESSEEN_C * two_pi.sqrt() * m_bar;
    let k = (-k_max).exp() / (2.0 * (two_pi * v_bar).sqrt());
    let delta = rate - data.iter().map(|d| d.sc.d_wminus_qstar()).fold(f64::NEG_INFINITY, f64::max);
    let f = data.iter().map(|d| d.sc.d_wminus_w()).fold(0.0, f64::max);
    Ok(BoundConstants {
        nu,
        upsilon,
        h_lo,
        m_bar,
        v_bar,
        v_low,
        k_max,
        k,
        delta,
        f,
        s_tilde: f / (delta / 2.0),
        compositions: data.len(),
    })
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    #[serde(rename = "main")]
    Main,
    #[serde(rename = "trivial-composition")]
    Trivial,
    /// Main-branch formula evaluated at a blocklength where some
    /// sufficient condition fails.
    #[serde(rename = "invalid-N")]
    InvalidN,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Main => "main",
            Branch::Trivial => "trivial-composition",
            Branch::InvalidN => "invalid-N",
        }
    }
}

/// One sufficient condition on the blocklength.
#[derive(Debug, Clone, Serialize)]
pub struct NCondition {
    pub name: &'static str,
    pub required: f64,
    pub actual: f64,
    pub ok: bool,
}

/// Expansion of the exponent around `r(R,P)`: `zeroth + first + remainder`
/// equals the reported exponent.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TaylorTerms {
    /// `E_SP(R,P)`.
    pub zeroth: f64,
    /// `rho*_{R,P} eps_N`.
    pub first: f64,
    pub remainder: f64,
    pub eps_n: f64,
    pub r_n: f64,
    pub rho_star: f64,
    /// Tilt `eta` at `r_N`.
    pub eta: f64,
    /// `exponent <= zeroth + (1+zeta) first`.
    pub first_order_ok: bool,
    /// `rho*_{R,P} <= rho*_R + zeta`.
    pub rho_within_zeta: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub rate: f64,
    pub zeta: f64,
    #[serde(rename = "P")]
    pub composition: Distribution,
    pub branch: Branch,
    pub exponent: f64,
    pub prefactor: f64,
    /// `prefactor * exp(-N exponent)`; may underflow to zero, see
    /// `log_bound`.
    pub bound: f64,
    pub log_bound: f64,
    pub theorem1_closed_form: f64,
    pub log_theorem1_closed_form: f64,
    pub n_conditions: Vec<NCondition>,
    pub taylor_terms: TaylorTerms,
}

/// Closed form `K exp(-N E_SP(R)) / N^((1 + (1+zeta) rho*_R)/2)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClosedForm {
    pub bound: f64,
    pub log_bound: f64,
    /// `(1 + (1+zeta) rho*_R) / 2`.
    pub power: f64,
}

/// `s*(R,P,r(R,P))` against `rho*_{R,P}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LagrangeCheck {
    pub s_star: f64,
    pub rho_star: f64,
    pub gap: f64,
}

/// Everything that depends only on the channel and the rate.
#[derive(Debug, Clone)]
pub struct BoundAssembly {
    model: ChannelModel,
    rate: f64,
    esp: EspMaximum,
    nu: NuSelection,
    constants: BoundConstants,
}

impl BoundAssembly {
    pub fn new(model: &ChannelModel, rate: f64, cfg: &BoundConfig) -> Result<Self> {
        let grid = cfg.grid_for(model.channel().input_size())?;
        let esp = esp_of_r(model, rate, Some(grid))?;
        if esp.value <= 0.0 {
            return Err(Error::domain(format!("E_SP({rate}) is zero")));
        }
        let nu = select_nu(model, rate, cfg)?;
        let constants = constants(model, rate, nu.nu, cfg)?;
        Ok(Self { model: model.clone(), rate, esp, nu, constants })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn esp(&self) -> &EspMaximum {
        &self.esp
    }

    pub fn nu(&self) -> &NuSelection {
        &self.nu
    }

    pub fn constants(&self) -> &BoundConstants {
        &self.constants
    }

    /// Lower bound on the error probability of any code of composition `p`
    /// at blocklength `n`.
    pub fn refined_bound(&self, n: usize, zeta: f64, p: &Distribution) -> Result<BoundReport> {
        if n < 2 {
            return Err(Error::domain("blocklength must be at least 2"));
        }
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(Error::domain(format!("zeta = {zeta} must be positive")));
        }
        let nf = n as f64;
        let closed = self.theorem1_closed_form(n, zeta);
        let sp = saddle_at(self.model.channel(), self.rate, p)?;
        let report = |branch, exponent: f64, prefactor: f64, log_bound: f64, n_conditions, taylor_terms| BoundReport {
            n,
            rate: self.rate,
            zeta,
            composition: p.clone(),
            branch,
            exponent,
            prefactor,
            bound: log_bound.exp(),
            log_bound,
            theorem1_closed_form: closed.bound,
            log_theorem1_closed_form: closed.log_bound,
            n_conditions,
            taylor_terms,
        };
        if sp.degenerate || sp.value < self.constants.nu {
            let exponent = self.esp.value;
            let tt = TaylorTerms { zeroth: sp.value, rho_star: sp.rho_star, ..Default::default() };
            return Ok(report(Branch::Trivial, exponent, 0.5, 0.5f64.ln() - nf * exponent, Vec::new(), tt));
        }
        let c = &self.constants;
        let sc = ShiftedChannel::from_saddle(self.model.channel(), sp)?;
        let eps_n = (0.5 + zeta) * nf.ln() / nf;
        let r_n = sc.r() - eps_n;
        let sqrt_req = (1.0 + (1.0 + c.k_max).powi(2)) / c.v_low.sqrt();
        let kz = c.k * nf.powf(zeta) / std::f64::consts::E;
        let n_conditions = vec![
            NCondition { name: "sqrt_n", required: sqrt_req, actual: nf.sqrt(), ok: nf.sqrt() >= sqrt_req },
            NCondition { name: "k_n_zeta", required: 1.0, actual: kz, ok: kz > 1.0 },
            NCondition { name: "eps_n", required: c.delta / 2.0, actual: eps_n, ok: eps_n <= c.delta / 2.0 },
            NCondition { name: "r_n_positive", required: 0.0, actual: r_n, ok: r_n > 0.0 },
        ];
        let branch = if n_conditions.iter().all(|c| c.ok) { Branch::Main } else { Branch::InvalidN };
        let prefactor = c.k / nf.sqrt();
        let rho = sc.saddle().rho_star;
        let zeroth = sc.saddle().value;
        let rho_within_zeta = rho <= self.esp.rho_star() + zeta + 1e-9;
        if r_n <= 0.0 {
            let tt = TaylorTerms { zeroth, eps_n, r_n, rho_star: rho, rho_within_zeta, ..Default::default() };
            return Ok(report(branch, f64::INFINITY, prefactor, f64::NEG_INFINITY, n_conditions, tt));
        }
        let t = sc.tilde_esp(r_n)?;
        let exponent = sc.fenchel0(t.value - r_n).value();
        let tt = TaylorTerms {
            zeroth,
            first: rho * eps_n,
            remainder: exponent - zeroth - rho * eps_n,
            eps_n,
            r_n,
            rho_star: rho,
            eta: t.eta,
            first_order_ok: exponent <= zeroth + (1.0 + zeta) * rho * eps_n,
            rho_within_zeta,
        };
        Ok(report(branch, exponent, prefactor, prefactor.ln() - nf * exponent, n_conditions, tt))
    }

    /// As [`Self::refined_bound`] after rounding `p` to the nearest `n`-type.
    pub fn refined_bound_at_type(&self, n: usize, zeta: f64, p: &Distribution) -> Result<BoundReport> {
        self.refined_bound(n, zeta, &type_distribution(&round_to_type(p, n)))
    }

    pub fn theorem1_closed_form(&self, n: usize, zeta: f64) -> ClosedForm {
        let nf = n as f64;
        let power = (1.0 + (1.0 + zeta) * self.esp.rho_star()) / 2.0;
        let log_bound = self.constants.k.ln() - nf * self.esp.value - power * nf.ln();
        ClosedForm { bound: log_bound.exp(), log_bound, power }
    }

    pub fn lagrange_identity_check(&self, p: &Distribution) -> Result<LagrangeCheck> {
        lagrange_identity_check(&self.model, self.rate, p)
    }
}

/// Compares `s*(R,P,r(R,P))` with `rho*_{R,P}`.
pub fn lagrange_identity_check(model: &ChannelModel, rate: f64, p: &Distribution) -> Result<LagrangeCheck> {
    let sc = ShiftedChannel::new(model, rate, p)?;
    let s_star = sc.tilde_esp(sc.r())?.s_star;
    let rho_star = sc.saddle().rho_star;
    Ok(LagrangeCheck { s_star, rho_star, gap: (s_star - rho_star).abs() })
}
