//! Variety-expansion economy with skilled/unskilled labor and R&D.
//!
//! All levels are carried in logs. The R&D share is solved for through
//! `ln(1 - tau)`, which is the only representation that keeps precision once
//! `tau` is within rounding distance of one on long unbalanced paths.

use serde::Serialize;
use thiserror::Error;

use crate::params::{validate_innovation, Exponents, InnovationParams, Regime, RegimePath, ValidationError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InnovationError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(&'static str),
    #[error("collapse date must be at least {min}, got {got}")]
    CollapseDate { min: usize, got: usize },
    #[error("evaluation date {t_star} must exceed every collapse date (max {max_t})")]
    EvaluationDate { t_star: usize, max_t: usize },
}

/// Upper cap on the stored R&D share.
pub const TAU_CAP: f64 = 1.0 - 1e-15;
/// `1 - tau` below which the share is reported as an effective corner at one.
pub const EFFECTIVE_ONE: f64 = 1e-12;
/// `|rho - 1|` below which output uses the Cobb-Douglas limit.
const COBB_DOUGLAS_BAND: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Corner {
    Interior,
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauSolution {
    pub tau: f64,
    pub one_minus_tau: f64,
    /// `ln(1 - tau)`: the authoritative value.
    pub ln_one_minus_tau: f64,
    pub corner: Corner,
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln` of the coefficient on `(1-tau)^rho` in the income ratio.
fn ln_wage_share(params: &InnovationParams, exps: Exponents, ln_n: f64) -> f64 {
    let coef = params.wage_share_coefficient();
    if coef == 0.0 {
        return f64::NEG_INFINITY;
    }
    let inner = (exps.phi - exps.psi) * ln_n + params.skilled.ln() - params.unskilled.ln();
    let rho_minus_one = params.rho - 1.0;
    // avoid 0 * inf when the exponent vanishes
    let scaled = if rho_minus_one == 0.0 { 0.0 } else { rho_minus_one * inner };
    coef.ln() + scaled
}

/// `ln f` at `ln(1-tau) = y`.
fn ln_income_ratio(params: &InnovationParams, ln_k: f64, y: f64) -> f64 {
    ln_add_exp(y, ln_k + params.rho * y)
}

/// Aggregate income of the young relative to the skilled wage bill:
/// `(1-tau) + K(n) (1-tau)^rho`.
pub fn income_ratio_f(tau: f64, n: f64, params: &InnovationParams, regime: Regime) -> f64 {
    if tau >= 1.0 {
        return 0.0;
    }
    let ln_k = ln_wage_share(params, params.exponents(regime), n.ln());
    ln_income_ratio(params, ln_k, (-tau).ln_1p()).exp()
}

/// R&D share clearing the asset market at variety mass `n`.
pub fn solve_tau(n: f64, params: &InnovationParams, regime: Regime) -> TauSolution {
    solve_tau_with(params, params.exponents(regime), n.ln())
}

fn solve_tau_with(params: &InnovationParams, exps: Exponents, ln_n: f64) -> TauSolution {
    let ln_k = ln_wage_share(params, exps, ln_n);
    let ln_target = -(params.a * params.skilled).ln();
    let ln_f0 = ln_add_exp(0.0, ln_k);
    if ln_f0 <= ln_target {
        return TauSolution {
            tau: 0.0,
            one_minus_tau: 1.0,
            ln_one_minus_tau: 0.0,
            corner: Corner::Zero,
        };
    }
    // f(y) <= (1+K) max(e^y, e^{rho y}) for y <= 0 gives the lower bracket;
    // f(y) >= e^y gives the upper one.
    let gap = ln_target - ln_f0;
    let mut lo = gap.min(gap / params.rho);
    let mut hi = ln_target.min(0.0);
    for _ in 0..4096 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_income_ratio(params, ln_k, mid) > ln_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    let u = y.exp();
    TauSolution {
        tau: (-y.exp_m1()).min(TAU_CAP),
        one_minus_tau: u,
        ln_one_minus_tau: y,
        corner: if u < EFFECTIVE_ONE { Corner::One } else { Corner::Interior },
    }
}

/// Log levels behind an [`InnoPathPoint`]; these stay finite where levels overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLevels {
    pub n: f64,
    pub one_minus_tau: f64,
    pub g_n: f64,
    pub y: f64,
    pub w_h: f64,
    pub w_l: f64,
    pub dividend: f64,
    pub price: f64,
}

/// One equilibrium date of the innovation economy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnoPathPoint {
    pub t: usize,
    pub regime: Regime,
    pub corner: Corner,
    /// Variety mass.
    pub n: f64,
    /// Share of skilled time spent on R&D.
    pub tau: f64,
    pub one_minus_tau: f64,
    /// `n_{t+1} / n_t`.
    pub g_n: f64,
    /// Consumption-good output.
    pub y: f64,
    /// Knowledge-good aggregate.
    pub x_agg: f64,
    /// Output of each intermediate variety.
    pub x_each: f64,
    /// Intermediate-good price.
    pub q: f64,
    /// Price of the knowledge-good aggregate.
    pub q_knowledge: f64,
    pub w_h: f64,
    pub w_l: f64,
    /// Per-variety dividend.
    pub dividend: f64,
    /// Per-variety stock price.
    pub price: f64,
    /// Normalized price `n P / w_H`.
    pub p: f64,
    /// Normalized dividend `n D / w_H`.
    pub d: f64,
    /// Gross expected return from `t` to `t+1`.
    pub r: f64,
    /// `Y + P (n_{t+1} - n_t)`.
    pub gdp: f64,
    pub m_h: f64,
    pub m_l: f64,
    /// `P / D = p / d`.
    pub price_div_ratio: f64,
    pub exponents: ExponentPair,
    pub logs: LogLevels,
}

/// Serializable copy of [`Exponents`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentPair {
    pub phi: f64,
    pub psi: f64,
}

impl From<Exponents> for ExponentPair {
    fn from(e: Exponents) -> Self {
        ExponentPair { phi: e.phi, psi: e.psi }
    }
}

impl From<ExponentPair> for Exponents {
    fn from(e: ExponentPair) -> Self {
        Exponents { phi: e.phi, psi: e.psi }
    }
}

fn ln_output(params: &InnovationParams, exps: Exponents, ln_n: f64, ln_u: f64) -> f64 {
    let unskilled = exps.psi * ln_n + params.unskilled.ln();
    let skilled = exps.phi * ln_n + ln_u + params.skilled.ln();
    let alpha = params.alpha;
    if (params.rho - 1.0).abs() < COBB_DOUGLAS_BAND {
        let a_part = if alpha == 0.0 { 0.0 } else { alpha * unskilled };
        return a_part + (1.0 - alpha) * skilled;
    }
    let s = 1.0 - params.rho;
    ln_add_exp(alpha.ln() + s * unskilled, (1.0 - alpha).ln() + s * skilled) / s
}

/// Everything at date `t` except the expected return.
fn static_point(params: &InnovationParams, t: usize, regime: Regime, exps: Exponents, ln_n: f64) -> InnoPathPoint {
    let sol = solve_tau_with(params, exps, ln_n);
    let (h, l, gamma) = (params.skilled, params.unskilled, params.gamma);
    let ln_u = sol.ln_one_minus_tau;
    let ln_h = h.ln();
    let ln_y = ln_output(params, exps, ln_n, ln_u);
    let ln_w_h = ((1.0 - params.alpha) * gamma).ln() + exps.phi * ln_n + params.rho * (ln_y - exps.phi * ln_n - ln_u - ln_h);
    let ln_w_l = params.alpha.ln() + exps.psi * ln_n + params.rho * (ln_y - exps.psi * ln_n - l.ln());
    let markup = (1.0 - gamma) / gamma;
    let ln_x_each = ln_u + ln_h - ln_n;
    let ln_dividend = markup.ln() + ln_w_h + ln_x_each;
    let rd = params.a * sol.tau * h;
    let ln_g = rd.ln_1p();

    let (ln_price, p) = match sol.corner {
        Corner::Zero => {
            // all income buys existing firms
            let ln_income = ln_add_exp(ln_w_h + ln_h, ln_w_l + l.ln());
            (ln_income - ln_n, h + (ln_w_l - ln_w_h).exp() * l)
        }
        _ => (ln_w_h - params.a.ln() - ln_n, 1.0 / params.a),
    };
    let d = markup * sol.one_minus_tau * h;
    let g = ln_g.exp();
    let variety_scale = (1.0 - gamma) / gamma * ln_n;
    let investment = if rd > 0.0 {
        (p.ln() + ln_w_h + rd.ln()).exp()
    } else {
        0.0
    };

    InnoPathPoint {
        t,
        regime,
        corner: sol.corner,
        n: ln_n.exp(),
        tau: sol.tau,
        one_minus_tau: sol.one_minus_tau,
        g_n: g,
        y: ln_y.exp(),
        x_agg: (variety_scale + ln_u + ln_h).exp(),
        x_each: ln_x_each.exp(),
        q: ln_w_h.exp() / gamma,
        q_knowledge: (ln_w_h - gamma.ln() - variety_scale).exp(),
        w_h: ln_w_h.exp(),
        w_l: ln_w_l.exp(),
        dividend: ln_dividend.exp(),
        price: ln_price.exp(),
        p,
        d,
        r: f64::NAN,
        gdp: ln_y.exp() + investment,
        m_h: (params.a * sol.tau + sol.one_minus_tau / p) / g,
        m_l: (ln_w_l - ln_w_h).exp() / (p * g),
        price_div_ratio: p / d,
        exponents: exps.into(),
        logs: LogLevels {
            n: ln_n,
            one_minus_tau: ln_u,
            g_n: ln_g,
            y: ln_y,
            w_h: ln_w_h,
            w_l: ln_w_l,
            dividend: ln_dividend,
            price: ln_price,
        },
    }
}

/// `(D_{t+1} + P_{t+1}) / P_t`.
fn gross_payoff(now: &InnoPathPoint, next: &InnoPathPoint) -> f64 {
    (ln_add_exp(next.logs.dividend, next.logs.price) - now.logs.price).exp()
}

/// Date-`t+1` states reachable from `point`. Both share the predetermined `n_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Continuations {
    /// Present only when `point` is unbalanced.
    pub unbalanced: Option<InnoPathPoint>,
    pub balanced: InnoPathPoint,
}

pub fn continuations(params: &InnovationParams, point: &InnoPathPoint) -> Continuations {
    let ln_next = point.logs.n + point.logs.g_n;
    let t = point.t + 1;
    let balanced = static_point(params, t, Regime::Balanced, params.exponents(Regime::Balanced), ln_next);
    let unbalanced = (point.regime == Regime::Unbalanced)
        .then(|| static_point(params, t, Regime::Unbalanced, params.exponents(Regime::Unbalanced), ln_next));
    Continuations { unbalanced, balanced }
}

fn with_return(params: &InnovationParams, mut point: InnoPathPoint) -> InnoPathPoint {
    let next = continuations(params, &point);
    let to_bg = gross_payoff(&point, &next.balanced);
    point.r = match &next.unbalanced {
        Some(ug) => params.pi * gross_payoff(&point, ug) + (1.0 - params.pi) * to_bg,
        None => to_bg,
    };
    point
}

/// Full equilibrium record at date `t` for a given variety mass (in logs).
pub fn equilibrium_point(params: &InnovationParams, t: usize, regime: Regime, ln_n: f64) -> InnoPathPoint {
    with_return(params, static_point(params, t, regime, params.exponents(regime), ln_n))
}

pub fn initial_point(params: &InnovationParams) -> InnoPathPoint {
    equilibrium_point(params, 0, Regime::Unbalanced, params.n0.ln())
}

/// Advances one date: `n` grows by `1 + a tau H` and the new regime's exponents apply.
pub fn step_economy(point: &InnoPathPoint, params: &InnovationParams, next_regime: Regime) -> InnoPathPoint {
    equilibrium_point(params, point.t + 1, next_regime, point.logs.n + point.logs.g_n)
}

/// Equilibrium path along a realized regime sequence, starting from `n0`.
pub fn simulate(params: &InnovationParams, path: &RegimePath) -> Vec<InnoPathPoint> {
    let mut out = Vec::with_capacity(path.t_max() + 1);
    let mut point = initial_point(params);
    for t in 0..=path.t_max() {
        if t > 0 {
            point = step_economy(&point, params, path.regime(t));
        }
        out.push(point.clone());
    }
    out
}

/// Deterministic path with one exponent pair in force forever. Returns are
/// computed from the single continuation.
pub fn simulate_fixed_exponents(params: &InnovationParams, phi: f64, psi: f64, steps: usize) -> Vec<InnoPathPoint> {
    let exps = Exponents { phi, psi };
    let regime = if phi == psi { Regime::Balanced } else { Regime::Unbalanced };
    let mut ln_n = params.n0.ln();
    let mut current = static_point(params, 0, regime, exps, ln_n);
    let mut out = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        ln_n += current.logs.g_n;
        let next = static_point(params, t + 1, regime, exps, ln_n);
        current.r = gross_payoff(&current, &next);
        out.push(std::mem::replace(&mut current, next));
    }
    out
}

/// Normalized no-arbitrage residual
/// `R_t p_t - sum_branch prob (d' + p') (n_t/n_{t+1}) (w_H'/w_H)`.
/// Pass `pi = 0` for a balanced date, where only the balanced branch applies.
pub fn no_arbitrage_residual(
    point: &InnoPathPoint,
    cont_unbalanced: &InnoPathPoint,
    cont_balanced: &InnoPathPoint,
    pi: f64,
) -> f64 {
    let branch = |next: &InnoPathPoint| {
        (next.d + next.p) * (point.logs.n - next.logs.n + next.logs.w_h - point.logs.w_h).exp()
    };
    let rhs = if pi == 0.0 {
        branch(cont_balanced)
    } else {
        pi * branch(cont_unbalanced) + (1.0 - pi) * branch(cont_balanced)
    };
    point.r * point.p - rhs
}

/// Balanced-growth solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BgpSolution {
    #[serde(rename = "tau_BG")]
    pub tau_bg: f64,
    #[serde(rename = "G_n_BG")]
    pub g_n_bg: f64,
    #[serde(rename = "d_BG")]
    pub d_bg: f64,
    #[serde(rename = "v_BG")]
    pub v_bg: f64,
    #[serde(rename = "R_BG")]
    pub r_bg: f64,
    pub corner: Corner,
}

pub fn bgp_solution(params: &InnovationParams) -> BgpSolution {
    let sol = solve_tau(params.n0, params, Regime::Balanced);
    let g = 1.0 + params.a * sol.tau * params.skilled;
    let d = (1.0 - params.gamma) / params.gamma * sol.one_minus_tau * params.skilled;
    let growth_factor = g.powf(params.phi_bg - 1.0);
    let p = 1.0 / params.a;
    let r = (d + p) / p * growth_factor;
    BgpSolution {
        tau_bg: sol.tau,
        g_n_bg: g,
        d_bg: d,
        v_bg: d / (r / growth_factor - 1.0),
        r_bg: r,
        corner: sol.corner,
    }
}

/// Residual of `R p = (d + p) G^{phi_BG - 1}` at `p = 1/a`.
pub fn bgp_residual(params: &InnovationParams, bgp: &BgpSolution) -> f64 {
    let p = 1.0 / params.a;
    bgp.r_bg * p - (bgp.d_bg + p) * bgp.g_n_bg.powf(params.phi_bg - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WageRatioLimit {
    Zero,
    Infinity,
    Finite,
}

/// Closed-form limits of a persistent unbalanced regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Asymptotics {
    #[serde(rename = "G_n_UG")]
    pub g_n_ug: f64,
    #[serde(rename = "R_UG")]
    pub r_ug: f64,
    /// Decay exponent of `1 - tau` per date, in units of `ln G_n_UG`.
    pub tau_gap_rate: f64,
    #[serde(rename = "Y_rate")]
    pub y_rate: f64,
    #[serde(rename = "wH_rate")]
    pub wh_rate: f64,
    /// Limit of the hypothetical balanced skilled wage over the unbalanced one.
    pub wage_ratio_limit: WageRatioLimit,
}

fn require_bubble_regime(params: &InnovationParams) -> Result<crate::params::InnovationReport, InnovationError> {
    let report = validate_innovation(params)?;
    if report.imbalance <= 0.0 {
        return Err(InnovationError::Hypothesis("(phi_UG - psi_UG)(rho - 1) > 0"));
    }
    if !report.interior_initial {
        return Err(InnovationError::Hypothesis("f(0, n0) > 1/(aH)"));
    }
    Ok(report)
}

pub fn asymptotics_ug(params: &InnovationParams) -> Result<Asymptotics, InnovationError> {
    require_bubble_regime(params)?;
    let g = 1.0 + params.a * params.skilled;
    let wage_ratio_limit = if params.psi_ug > params.phi_bg {
        WageRatioLimit::Zero
    } else if params.phi_bg > params.psi_ug {
        WageRatioLimit::Infinity
    } else {
        WageRatioLimit::Finite
    };
    Ok(Asymptotics {
        g_n_ug: g,
        r_ug: params.pi * g.powf(params.psi_ug - 1.0),
        tau_gap_rate: params.imbalance() / params.rho,
        y_rate: g.powf(params.psi_ug),
        wh_rate: g.powf(params.psi_ug),
        wage_ratio_limit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UzawaReport {
    pub balanced: bool,
    /// Growth factor of output in terms of variety growth, when balanced.
    #[serde(rename = "G_Y_formula")]
    pub g_y_formula: Option<String>,
}

/// A balanced path requires `(phi - psi)(rho - 1) = 0`.
pub fn uzawa_check(phi: f64, psi: f64, rho: f64) -> UzawaReport {
    let balanced = ((phi - psi) * (rho - 1.0)).abs() < 1e-15;
    let g_y_formula = if !balanced {
        None
    } else if phi == psi {
        Some(format!("G_Y = G_n^{phi}"))
    } else {
        Some(format!("G_Y = G_n^(alpha*{psi} + (1-alpha)*{phi})"))
    };
    UzawaReport { balanced, g_y_formula }
}

/// What happens around a collapse at date `T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseComparison {
    #[serde(rename = "T")]
    pub collapse: usize,
    /// `P_{T-1}^{UG} - P_T^{BG}`.
    pub price_drop: f64,
    /// `1 - P_T^{BG} / P_{T-1}^{UG}`.
    pub relative_price_drop: f64,
    /// `Y_{T-1}^{UG} - Y_T^{BG}`.
    pub output_drop: f64,
    /// `P_{T-1}/P_{T-2}`; absent when `T < 2`.
    pub price_growth_before: Option<f64>,
    /// `P_{T+1}/P_T`.
    pub price_growth_after: f64,
    pub output_growth_before: Option<f64>,
    pub output_growth_after: f64,
    /// GDP from `T` through the horizon.
    pub gdp_after: Vec<f64>,
    #[serde(skip)]
    pub path: Vec<InnoPathPoint>,
}

pub fn collapse_comparisons(
    params: &InnovationParams,
    collapse: usize,
    horizon: usize,
) -> Result<CollapseComparison, InnovationError> {
    if collapse < 1 {
        return Err(InnovationError::CollapseDate { min: 1, got: collapse });
    }
    let horizon = horizon.max(collapse + 1);
    let path = simulate(params, &RegimePath::collapsing_at(horizon, Some(collapse)));
    let ratio = |a: f64, b: f64| (a - b).exp();
    let (before, at, after) = (&path[collapse - 1], &path[collapse], &path[collapse + 1]);
    let prior = collapse.checked_sub(2).map(|i| &path[i]);
    Ok(CollapseComparison {
        collapse,
        price_drop: before.price - at.price,
        relative_price_drop: -(at.logs.price - before.logs.price).exp_m1(),
        output_drop: before.y - at.y,
        price_growth_before: prior.map(|p| ratio(before.logs.price, p.logs.price)),
        price_growth_after: ratio(after.logs.price, at.logs.price),
        output_growth_before: prior.map(|p| ratio(before.logs.y, p.logs.y)),
        output_growth_after: ratio(after.logs.y, at.logs.y),
        gdp_after: path[collapse..].iter().map(|p| p.gdp).collect(),
        path,
    })
}

/// Post-collapse GDP at a fixed date `t_star` for each collapse date.
pub fn prop3_gdp_monotonicity(
    params: &InnovationParams,
    collapse_dates: &[usize],
    t_star: usize,
) -> Result<Vec<(usize, f64)>, InnovationError> {
    let report = require_bubble_regime(params)?;
    if !report.stock_growth_dominates {
        return Err(InnovationError::Hypothesis("psi_UG > phi_BG"));
    }
    if !report.initial_variety_condition {
        return Err(InnovationError::Hypothesis("n0^((phi_UG - psi_UG)(rho - 1)) > 1"));
    }
    let max_t = collapse_dates.iter().copied().max().unwrap_or(0);
    if t_star <= max_t {
        return Err(InnovationError::EvaluationDate { t_star, max_t });
    }
    if let Some(&bad) = collapse_dates.iter().find(|&&t| t < 1) {
        return Err(InnovationError::CollapseDate { min: 1, got: bad });
    }
    Ok(collapse_dates
        .iter()
        .map(|&t| {
            let path = simulate(params, &RegimePath::collapsing_at(t_star, Some(t)));
            (t, path[t_star].gdp)
        })
        .collect())
}
