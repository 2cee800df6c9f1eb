//! Brute-force reference computations used to check the closed forms.
//!
//! The fundamental value at an unbalanced date is the sum over collapse
//! dates: a collapse at `t+k` has weight `pi^(k-1) (1-pi)`, after which the
//! asset is worth its balanced-path value. Each summand is evaluated from log
//! levels, so the enumeration shares no arithmetic with the model code.

use serde::Serialize;
use thiserror::Error;

use crate::innovation_model::{self, InnoPathPoint};
use crate::params::{InnovationParams, Regime, ToyParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("no certificate: dominating ratio {0} >= 1")]
    NoCertificate(f64),
    #[error("state at date {0} is not unbalanced")]
    NotUnbalanced(usize),
    #[error("invalid bracket: f({lo})={f_lo}, f({hi})={f_hi}")]
    BadBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
}

/// A truncated series together with a bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationCertificate {
    #[serde(rename = "horizon_N")]
    pub horizon_n: usize,
    pub partial_sum: f64,
    /// `last term * ratio / (1 - ratio)`.
    pub tail_bound: f64,
    pub dominating_ratio: f64,
}

/// Which economy to evaluate, with the date-`t` state.
#[derive(Debug, Clone, Copy)]
pub enum OracleModel<'a> {
    /// Land economy, unbalanced at date `t`. Values are in goods per unit of land.
    Toy { params: &'a ToyParams, t: usize },
    /// Innovation economy at `state`. Values are normalized by `n_t / w_H,t`.
    Innovation {
        params: &'a InnovationParams,
        state: &'a InnoPathPoint,
    },
}

/// Expected discounted dividends at an unbalanced date, summed over collapse
/// dates up to `max_n` steps ahead. Stops early once the tail bound is within
/// `tol`; pass `tol = 0` to always use `max_n` terms.
pub fn expected_discounted_dividends(
    model: OracleModel<'_>,
    max_n: usize,
    tol: f64,
) -> Result<TruncationCertificate, OracleError> {
    if max_n == 0 {
        return Err(OracleError::ZeroHorizon);
    }
    match model {
        OracleModel::Toy { params, t } => toy_series(params, t, max_n, tol),
        OracleModel::Innovation { params, state } => innovation_series(params, state, max_n, tol),
    }
}

fn ln_sum(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Accumulates `c_k` terms given in logs and reports the certificate.
struct Accumulator {
    /// Scale subtracted from every log term before exponentiating.
    ln_scale: f64,
    sum: f64,
    last: f64,
    ln_terms: Vec<f64>,
}

impl Accumulator {
    fn new(ln_scale: f64) -> Self {
        Accumulator {
            ln_scale,
            sum: 0.0,
            last: 0.0,
            ln_terms: Vec::new(),
        }
    }

    fn push(&mut self, ln_term: f64) {
        self.last = (ln_term - self.ln_scale).exp();
        self.sum += self.last;
        self.ln_terms.push(ln_term);
    }

    fn certificate(&self, ratio: f64) -> TruncationCertificate {
        TruncationCertificate {
            horizon_n: self.ln_terms.len(),
            partial_sum: self.sum,
            tail_bound: self.last * ratio / (1.0 - ratio),
            dominating_ratio: ratio,
        }
    }
}

fn toy_series(p: &ToyParams, t: usize, max_n: usize, tol: f64) -> Result<TruncationCertificate, OracleError> {
    // successive terms shrink at least as fast as max(G_d', G_d)/G_a because
    // R^UG >= pi G_a and payoffs grow no faster than the larger rent growth
    let ratio = p.g_d_prime.max(p.g_d) / p.g_a;
    if ratio >= 1.0 {
        return Err(OracleError::NoCertificate(ratio));
    }
    let ln_x = p.land.ln();
    let ln_price_ug = |s: usize| p.e0_ug.ln() + s as f64 * p.g_a.ln() - ln_x;
    let ln_price_bg = |s: usize| p.e0_bg.ln() + s as f64 * p.g_d.ln() - ln_x;
    let ln_rent_ug = |s: usize| p.d0_ug.ln() + s as f64 * p.g_d_prime.ln();
    let ln_rent_bg = |s: usize| p.d0_bg.ln() + s as f64 * p.g_d.ln();
    let (ln_pi, ln_not_pi) = (p.pi.ln(), (-p.pi).ln_1p());
    let ln_return_ug = |s: usize| {
        ln_sum(&[
            ln_pi + ln_rent_ug(s + 1),
            ln_pi + ln_price_ug(s + 1),
            ln_not_pi + ln_rent_bg(s + 1),
            ln_not_pi + ln_price_bg(s + 1),
        ]) - ln_price_ug(s)
    };
    let ln_return_bg = (p.g_d * (1.0 + p.land * p.d0_bg / p.e0_bg)).ln();
    // value of the balanced rent stream: D q/(1-q) with q = G_d / R^BG
    let q = p.g_d / ln_return_bg.exp();
    let ln_bg_multiple = (q / (1.0 - q)).ln();

    let mut acc = Accumulator::new(0.0);
    let mut ln_disc = 0.0;
    for k in 1..=max_n {
        let s = t + k;
        ln_disc -= ln_return_ug(s - 1);
        let ln_payoff = ln_sum(&[
            ln_pi + ln_rent_ug(s),
            ln_not_pi + ln_rent_bg(s),
            ln_not_pi + ln_rent_bg(s) + ln_bg_multiple,
        ]);
        acc.push((k - 1) as f64 * ln_pi + ln_disc + ln_payoff);
        if acc.certificate(ratio).tail_bound <= tol {
            break;
        }
    }
    Ok(acc.certificate(ratio))
}

fn innovation_series(
    params: &InnovationParams,
    state: &InnoPathPoint,
    max_n: usize,
    tol: f64,
) -> Result<TruncationCertificate, OracleError> {
    if state.regime != Regime::Unbalanced {
        return Err(OracleError::NotUnbalanced(state.t));
    }
    let bgp = innovation_model::bgp_solution(params);
    // per-step balanced dividend growth over the balanced return
    let q = bgp.g_n_bg.powf(params.phi_bg - 1.0) / bgp.r_bg;
    let ln_bg_multiple = (q / (1.0 - q)).ln();
    let (ln_pi, ln_not_pi) = (params.pi.ln(), (-params.pi).ln_1p());
    let ln_payoff = |pt: &InnoPathPoint| ln_sum(&[pt.logs.dividend, pt.logs.price]);

    // scale: n_t / w_H,t
    let mut acc = Accumulator::new(state.logs.w_h - state.logs.n);
    let mut ln_disc = 0.0;
    let mut current = state.clone();
    let window = 32usize;
    let floor = asymptotic_term_ratio(params);
    let ratio_of = |terms: &[f64]| empirical_ratio(terms, window).max(floor);
    for k in 1..=max_n {
        let next = innovation_model::continuations(params, &current);
        let ug = next.unbalanced.expect("unbalanced state has an unbalanced continuation");
        let bg = next.balanced;
        let ln_r = ln_sum(&[ln_pi + ln_payoff(&ug), ln_not_pi + ln_payoff(&bg)]) - current.logs.price;
        ln_disc -= ln_r;
        let ln_div = ln_sum(&[
            ln_pi + ug.logs.dividend,
            ln_not_pi + bg.logs.dividend,
            ln_not_pi + bg.logs.dividend + ln_bg_multiple,
        ]);
        acc.push((k - 1) as f64 * ln_pi + ln_disc + ln_div);
        if tol > 0.0 && k >= window {
            let ratio = ratio_of(&acc.ln_terms);
            if ratio < 1.0 && acc.certificate(ratio).tail_bound <= tol {
                break;
            }
        }
        current = ug;
    }
    let ratio = ratio_of(&acc.ln_terms);
    if ratio >= 1.0 {
        return Err(OracleError::NoCertificate(ratio));
    }
    Ok(acc.certificate(ratio))
}

/// Limit of the successive-term ratio on a persistent unbalanced path: the
/// unbalanced dividend term shrinks with `1 - tau`, the collapse term with the
/// wage-growth gap. Successive ratios approach it from below on the paths we
/// run, so it floors the empirical estimate. Zero when it does not apply.
fn asymptotic_term_ratio(params: &InnovationParams) -> f64 {
    let imbalance = params.imbalance();
    if imbalance <= 0.0 {
        return 0.0;
    }
    let g = 1.0 + params.a * params.skilled;
    g.powf(-imbalance / params.rho).max(g.powf(params.phi_bg - params.psi_ug))
}

/// Largest successive-term ratio over the trailing window.
fn empirical_ratio(ln_terms: &[f64], window: usize) -> f64 {
    let start = ln_terms.len().saturating_sub(window + 1);
    let tail = &ln_terms[start..];
    if tail.len() < 2 {
        return f64::INFINITY;
    }
    tail.windows(2)
        .map(|w| (w[1] - w[0]).exp())
        .fold(0.0, f64::max)
}

/// Normalized fundamental value at date `t` of a path that has stayed unbalanced since date 0.
pub fn innovation_fundamental_at(
    params: &InnovationParams,
    t: usize,
    max_n: usize,
    tol: f64,
) -> Result<(InnoPathPoint, TruncationCertificate), OracleError> {
    let mut pt = innovation_model::initial_point(params);
    for _ in 0..t {
        pt = innovation_model::step_economy(&pt, params, Regime::Unbalanced);
    }
    let cert = expected_discounted_dividends(
        OracleModel::Innovation {
            params,
            state: &pt,
        },
        max_n,
        tol,
    )?;
    Ok((pt, cert))
}

/// Plain bisection for a monotone `f` with a sign change on `[lo, hi]`.
/// Runs at most `ceil(log2((hi - lo)/tol))` halvings.
pub fn reference_bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, OracleError> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let unordered = !(lo <= hi);
    if unordered || f_lo * f_hi > 0.0 || f_lo.is_nan() || f_hi.is_nan() {
        return Err(OracleError::BadBracket { lo, hi, f_lo, f_hi });
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    let rising = f_hi > 0.0;
    let (mut a, mut b) = (lo, hi);
    let max_iter = ((hi - lo) / tol).log2().ceil().max(0.0) as usize;
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == rising {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}
