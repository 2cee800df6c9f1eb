//! Closed-form equilibrium of the two-period OLG land economy.
//!
//! Prices follow from market clearing (`P·X = e` in both regimes), expected
//! returns from the two-branch no-arbitrage condition, and fundamentals from
//! the expected discounted rent stream. Everything that can grow without
//! bound is evaluated as a ratio to the date-`t` land price, so long horizons
//! do not overflow even when the reported levels do.

use serde::Serialize;
use thiserror::Error;

use crate::params::{Regime, RegimePath, SecondAsset, ToyParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToyError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("tail bound {bound:e} exceeds tolerance {tol:e} at N={horizon}")]
    TailTooLarge { bound: f64, tol: f64, horizon: usize },
    #[error("no geometric tail certificate: growth ratio {0} >= 1")]
    NoCertificate(f64),
    #[error("decomposition requested for a {0} date through the unbalanced formula")]
    WrongRegime(Regime),
    #[error("params carry no second asset")]
    MissingSecondAsset,
    #[error("bubble split {0} outside [0,1]")]
    InfeasibleSplit(f64),
    #[error("level overflow on the extended horizon")]
    Overflow,
}

/// One equilibrium date of the land economy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyPathPoint {
    pub t: usize,
    pub regime: Regime,
    /// Endowment of the young.
    pub e: f64,
    /// Rent per unit of land.
    pub d: f64,
    /// Land price.
    pub p: f64,
    /// Gross expected return from `t` to `t+1`.
    pub r: f64,
    /// Aggregate consumption.
    pub c: f64,
    pub price_rent: f64,
    /// First balanced date: the return uses the same formula but the row is flagged.
    pub collapse_row: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_asset_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_asset_r: Option<f64>,
}

/// Price, fundamental and bubble at one date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BubbleDecomposition {
    pub t: usize,
    pub price: f64,
    /// Truncated fundamental value.
    pub fundamental: f64,
    /// Upper bound on the omitted part of the fundamental series.
    pub tail_bound: f64,
    /// `price - fundamental`.
    pub bubble: f64,
    pub horizon_n: usize,
}

/// `base * g^t`, switching to log space once the exponent leaves the safe range.
pub(crate) fn grow(base: f64, g: f64, t: f64) -> f64 {
    let ln = base.ln() + t * g.ln();
    if ln.abs() <= 300.0 {
        base * g.powf(t)
    } else {
        ln.exp()
    }
}

fn geometric_tail(c: f64, q: f64, first_power: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else if q >= 1.0 {
        f64::INFINITY
    } else {
        c * q.powf(first_power) / (1.0 - q)
    }
}

/// Ratios that drive the unbalanced-state pricing. `q_rent` and `q_bg` are
/// the rates at which rents and balanced-state values shrink relative to the
/// unbalanced land price.
#[derive(Debug, Clone, Copy)]
struct UgRatios {
    pi: f64,
    g_a: f64,
    g_d_prime: f64,
    g_d: f64,
    q_rent: f64,
    q_bg: f64,
    /// `D^UG_0 / P^UG_0`
    rent0: f64,
    /// `D^BG_0 / P^UG_0`
    bg_rent0: f64,
    /// `P^BG_0 / P^UG_0`
    bg_price0: f64,
}

impl UgRatios {
    fn new(p: &ToyParams) -> Self {
        UgRatios {
            pi: p.pi,
            g_a: p.g_a,
            g_d_prime: p.g_d_prime,
            g_d: p.g_d,
            q_rent: p.g_d_prime / p.g_a,
            q_bg: p.g_d / p.g_a,
            rent0: p.land * p.d0_ug / p.e0_ug,
            bg_rent0: p.land * p.d0_bg / p.e0_ug,
            bg_price0: p.e0_bg / p.e0_ug,
        }
    }

    fn pow(q: f64, s: f64) -> f64 {
        if q == 1.0 {
            1.0
        } else {
            (s * q.ln()).exp()
        }
    }

    /// `R^UG_t`, term by term from the two-branch no-arbitrage condition.
    fn ug_return(&self, t: usize) -> f64 {
        let t = t as f64;
        let (pi, qr, qb) = (self.pi, Self::pow(self.q_rent, t), Self::pow(self.q_bg, t));
        let rent_next = self.rent0 * self.g_d_prime * qr; // D^UG_{t+1} / P^UG_t
        let bg_rent_next = self.bg_rent0 * self.g_d * qb; // D^BG_{t+1} / P^UG_t
        let bg_price_next = self.bg_price0 * self.g_d * qb; // P^BG_{t+1} / P^UG_t
        pi * rent_next + (1.0 - pi) * bg_rent_next + pi * self.g_a + (1.0 - pi) * bg_price_next
    }

    /// Expected date-`s` payoff over `P^UG_s`, without the `pi^{n-1}` weight.
    fn payoff_ratio(&self, s: usize) -> f64 {
        let s = s as f64;
        self.pi * self.rent0 * Self::pow(self.q_rent, s)
            + (1.0 - self.pi) * (self.bg_rent0 + self.bg_price0) * Self::pow(self.q_bg, s)
    }

    /// Coefficients of `kappa_s = c1 q_rent^{s+1} + c2 q_bg^{s+1}` where
    /// `R^UG_s = pi G_a (1 + kappa_s)`.
    fn kappa_coefficients(&self) -> (f64, f64) {
        (
            self.rent0,
            (1.0 - self.pi) / self.pi * (self.bg_rent0 + self.bg_price0),
        )
    }

    fn kappa(&self, s: usize) -> f64 {
        let (c1, c2) = self.kappa_coefficients();
        let s1 = s as f64 + 1.0;
        c1 * Self::pow(self.q_rent, s1) + c2 * Self::pow(self.q_bg, s1)
    }

    /// `sum_{j >= from} kappa_j`, infinite when either component does not shrink.
    fn kappa_tail(&self, from: usize) -> f64 {
        let (c1, c2) = self.kappa_coefficients();
        let s1 = from as f64 + 1.0;
        geometric_tail(c1, self.q_rent, s1) + geometric_tail(c2, self.q_bg, s1)
    }

    fn dominating_ratio(&self) -> f64 {
        let (c1, c2) = self.kappa_coefficients();
        let r1 = if c1 > 0.0 { self.q_rent } else { 0.0 };
        let r2 = if c2 > 0.0 { self.q_bg } else { 0.0 };
        r1.max(r2)
    }
}

/// Return in the balanced state; constant because price and rent grow together.
pub fn balanced_return(p: &ToyParams) -> f64 {
    p.g_d * (p.land * p.d0_bg / p.e0_bg + 1.0)
}

/// Land price under `regime` at date `t` (`P·X = e` in both regimes).
pub fn land_price(p: &ToyParams, t: usize, regime: Regime) -> f64 {
    endowment(p, t, regime) / p.land
}

pub fn endowment(p: &ToyParams, t: usize, regime: Regime) -> f64 {
    match regime {
        Regime::Unbalanced => grow(p.e0_ug, p.g_a, t as f64),
        Regime::Balanced => grow(p.e0_bg, p.g_d, t as f64),
    }
}

pub fn rent(p: &ToyParams, t: usize, regime: Regime) -> f64 {
    match regime {
        Regime::Unbalanced => grow(p.d0_ug, p.g_d_prime, t as f64),
        Regime::Balanced => grow(p.d0_bg, p.g_d, t as f64),
    }
}

/// Equilibrium record at date `t` given the regime in force. Balanced levels
/// are those the economy would have had if it were balanced since date 0.
pub fn toy_point(p: &ToyParams, t: usize, regime: Regime) -> ToyPathPoint {
    let e = endowment(p, t, regime);
    let d = rent(p, t, regime);
    let price = e / p.land;
    let (r, price_rent) = match regime {
        Regime::Unbalanced => {
            let ratios = UgRatios::new(p);
            let pr = p.e0_ug / (p.land * p.d0_ug) * UgRatios::pow(p.g_a / p.g_d_prime, t as f64);
            (ratios.ug_return(t), pr)
        }
        Regime::Balanced => (balanced_return(p), p.e0_bg / (p.land * p.d0_bg)),
    };
    ToyPathPoint {
        t,
        regime,
        e,
        d,
        p: price,
        r,
        c: e + d * p.land,
        price_rent,
        collapse_row: false,
        second_asset_q: None,
        second_asset_r: None,
    }
}

/// Equilibrium path along a realized regime sequence.
pub fn toy_path(p: &ToyParams, path: &RegimePath) -> Vec<ToyPathPoint> {
    path.states()
        .iter()
        .enumerate()
        .map(|(t, &regime)| {
            let mut pt = toy_point(p, t, regime);
            pt.collapse_row = path.collapse_date() == Some(t);
            pt
        })
        .collect()
}

/// Partial sums of the unbalanced-state fundamental series at date `t`,
/// expressed relative to `P^UG_t`. Yields `(n, partial_sum, tail_bound)`.
struct UgSeries {
    ratios: UgRatios,
    t: usize,
    n: usize,
    disc: f64,
    sum: f64,
}

impl UgSeries {
    fn new(p: &ToyParams, t: usize) -> Self {
        let ratios = UgRatios::new(p);
        UgSeries {
            disc: ratios.g_a / ratios.ug_return(t),
            ratios,
            t,
            n: 0,
            sum: 0.0,
        }
    }

    /// Terminal term `pi^N P_{t+N} / prod R` over `P_t` for the current N.
    fn terminal(&self) -> f64 {
        self.ratios.pi * self.disc
    }
}

impl Iterator for UgSeries {
    type Item = (usize, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.n > 0 {
            let r = &self.ratios;
            self.disc *= r.pi * r.g_a / r.ug_return(self.t + self.n);
        }
        self.n += 1;
        self.sum += self.disc * self.ratios.payoff_ratio(self.t + self.n);
        let tail = self.terminal() * self.ratios.kappa_tail(self.t + self.n);
        Some((self.n, self.sum, tail))
    }
}

fn ug_decomposition(p: &ToyParams, t: usize, n: usize, sum: f64, tail: f64) -> BubbleDecomposition {
    let price = land_price(p, t, Regime::Unbalanced);
    let fundamental = price * sum;
    BubbleDecomposition {
        t,
        price,
        fundamental,
        tail_bound: price * tail,
        bubble: price - fundamental,
        horizon_n: n,
    }
}

/// N-term fundamental value of land at an unbalanced date.
pub fn fundamental_value_ug(p: &ToyParams, t: usize, n: usize) -> Result<BubbleDecomposition, ToyError> {
    if n == 0 {
        return Err(ToyError::ZeroHorizon);
    }
    let (n, sum, tail) = UgSeries::new(p, t).nth(n - 1).expect("infinite series");
    Ok(ug_decomposition(p, t, n, sum, tail))
}

/// N-term fundamental value of land at a balanced date (discounting at the constant balanced return).
pub fn fundamental_value_bg(p: &ToyParams, t: usize, n: usize) -> Result<BubbleDecomposition, ToyError> {
    if n == 0 {
        return Err(ToyError::ZeroHorizon);
    }
    let q = p.g_d / balanced_return(p);
    let d = rent(p, t, Regime::Balanced);
    let mut term = d;
    let mut sum = 0.0;
    for _ in 0..n {
        term *= q;
        sum += term;
    }
    let price = land_price(p, t, Regime::Balanced);
    // fundamental per unit of land; the rent stream belongs to one unit
    Ok(BubbleDecomposition {
        t,
        price,
        fundamental: sum,
        tail_bound: geometric_tail(d, q, n as f64 + 1.0),
        bubble: price - sum,
        horizon_n: n,
    })
}

pub fn decompose(p: &ToyParams, t: usize, regime: Regime, n: usize) -> Result<BubbleDecomposition, ToyError> {
    match regime {
        Regime::Unbalanced => fundamental_value_ug(p, t, n),
        Regime::Balanced => fundamental_value_bg(p, t, n),
    }
}

/// Smallest-N decomposition whose tail bound is within `tol`, searching up to `max_n` terms.
pub fn decompose_within(
    p: &ToyParams,
    t: usize,
    regime: Regime,
    tol: f64,
    max_n: usize,
) -> Result<BubbleDecomposition, ToyError> {
    match regime {
        Regime::Unbalanced => {
            let ratios = UgRatios::new(p);
            let q = ratios.dominating_ratio();
            if q >= 1.0 {
                return Err(ToyError::NoCertificate(q));
            }
            let mut last = None;
            for (n, sum, tail) in UgSeries::new(p, t).take(max_n.max(1)) {
                let d = ug_decomposition(p, t, n, sum, tail);
                if d.tail_bound <= tol {
                    return Ok(d);
                }
                last = Some(d);
            }
            let d = last.expect("at least one term");
            Err(ToyError::TailTooLarge {
                bound: d.tail_bound,
                tol,
                horizon: d.horizon_n,
            })
        }
        Regime::Balanced => {
            let q = p.g_d / balanced_return(p);
            let d0 = rent(p, t, Regime::Balanced);
            // smallest N with d0 q^{N+1}/(1-q) <= tol
            let need = if d0 * q / (1.0 - q) <= tol {
                1
            } else {
                ((tol * (1.0 - q) / d0).ln() / q.ln()).ceil().max(1.0) as usize
            };
            let d = fundamental_value_bg(p, t, need.min(max_n.max(1)))?;
            if d.tail_bound <= tol {
                Ok(d)
            } else {
                Err(ToyError::TailTooLarge {
                    bound: d.tail_bound,
                    tol,
                    horizon: d.horizon_n,
                })
            }
        }
    }
}

/// The discounted terminal term at horizon N and its limit as N grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminalTerm {
    pub horizon_n: usize,
    /// `pi^N P_{t+N} / prod_{j<N} R_{t+j}`
    pub term: f64,
    /// Limit of `term`: the bubble component.
    pub limit: f64,
}

/// Bubble component at an unbalanced date as the limit of the discounted terminal price.
///
/// Writing `R^UG_s = pi G_a (1 + kappa_s)` the terminal term equals
/// `P_t / prod_{j<N} (1 + kappa_{t+j})`, so the limit is an infinite product
/// that converges exactly when `kappa` is summable.
pub fn bubble_via_terminal(p: &ToyParams, t: usize, n: usize) -> Result<TerminalTerm, ToyError> {
    if n == 0 {
        return Err(ToyError::ZeroHorizon);
    }
    let series = {
        let mut s = UgSeries::new(p, t);
        s.nth(n - 1);
        s
    };
    let price = land_price(p, t, Regime::Unbalanced);
    Ok(TerminalTerm {
        horizon_n: n,
        term: price * series.terminal(),
        limit: price * bubble_fraction(p, t),
    })
}

/// `B_t / P_t = 1 / prod_{j>=0} (1 + kappa_{t+j})`.
pub fn bubble_fraction(p: &ToyParams, t: usize) -> f64 {
    let ratios = UgRatios::new(p);
    if !ratios.kappa_tail(t).is_finite() {
        return 0.0;
    }
    let mut log_prod = 0.0;
    let mut j = t;
    loop {
        log_prod += ratios.kappa(j).ln_1p();
        j += 1;
        let rest = ratios.kappa_tail(j);
        if rest < 1e-18 || j - t > 50_000_000 {
            break;
        }
    }
    (-log_prod).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitRatios {
    /// `lim V_t/D_t` along an unbalanced path.
    pub v_over_d_limit: f64,
    /// `P_t/D_t` grows without bound while unbalanced.
    pub p_over_d_diverges: bool,
    /// `lim R^UG_t = pi G_a`.
    pub r_ug_limit: f64,
}

pub fn limit_ratios(p: &ToyParams) -> LimitRatios {
    let r_ug = p.pi * p.g_a;
    let numerator = if p.g_d_prime > p.g_d {
        p.pi
    } else {
        // balanced-state rents and resale values keep a fixed weight relative to rents
        p.pi + (1.0 - p.pi) * (p.d0_bg / p.d0_ug + p.e0_bg / (p.land * p.d0_ug))
    };
    LimitRatios {
        v_over_d_limit: numerator * p.g_d_prime / (r_ug - p.pi * p.g_d_prime),
        p_over_d_diverges: p.g_a > p.g_d_prime,
        r_ug_limit: r_ug,
    }
}

/// The three growth conditions for a stochastic bubble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BubbleConditions {
    /// Unbalanced land price outgrows unbalanced rents.
    pub a: bool,
    /// Unbalanced land price outgrows balanced rents.
    pub b: bool,
    /// Unbalanced land price outgrows the balanced land price.
    pub c: bool,
    pub bubble_predicted: bool,
}

pub fn conditions_abc(p: &ToyParams) -> BubbleConditions {
    let a = p.g_a > p.g_d_prime;
    let b = p.g_a > p.g_d;
    let c = p.g_a > p.g_d;
    BubbleConditions {
        a,
        b,
        c,
        bubble_predicted: a && b && c,
    }
}

/// `P^UG_{T-1} - P^BG_T`: the fall in the land price when the collapse comes at `T`.
pub fn collapse_drop(p: &ToyParams, collapse: usize) -> f64 {
    assert!(collapse >= 1, "collapse date must be at least 1");
    land_price(p, collapse - 1, Regime::Unbalanced) - land_price(p, collapse, Regime::Balanced)
}

// ---------------------------------------------------------------------------
// Land plus a stock index
// ---------------------------------------------------------------------------

/// Equilibrium with land and a stock index. The young's savings buy both
/// assets, so their aggregate value equals the endowment; the aggregate bubble
/// is determinate but its division between the assets is not, and `split` is
/// the share carried by land.
///
/// Fundamentals are computed by backward recursion from an extended horizon
/// where the remaining discounted value is below `1e-18` of the price.
pub fn multi_asset_path(p: &ToyParams, path: &RegimePath, split: f64) -> Result<Vec<ToyPathPoint>, ToyError> {
    let sa: &SecondAsset = p.second_asset.as_ref().ok_or(ToyError::MissingSecondAsset)?;
    if !(0.0..=1.0).contains(&split) {
        return Err(ToyError::InfeasibleSplit(split));
    }
    let x = p.land;
    let s = sa.shares;
    let t_max = path.t_max();

    let ratios = [p.g_d_prime, sa.gr_ug, p.g_d, sa.gr_bg]
        .iter()
        .map(|g| g / p.g_a)
        .chain(std::iter::once(sa.gr_bg.max(p.g_d) / balanced_return(p)))
        .fold(0.0f64, f64::max);
    if ratios >= 1.0 {
        return Err(ToyError::NoCertificate(ratios));
    }
    let extra = ((1e-18f64).ln() / ratios.ln()).ceil().clamp(1.0, 200_000.0) as usize;
    let m = t_max + extra;

    let lvl = |base: f64, g: f64, k: usize| grow(base, g, k as f64);
    let w_ug = |k| lvl(p.e0_ug, p.g_a, k);
    let w_bg = |k| lvl(p.e0_bg, p.g_d, k);
    let land_ug = |k| x * lvl(p.d0_ug, p.g_d_prime, k);
    let land_bg = |k| x * lvl(p.d0_bg, p.g_d, k);
    let stock_ug = |k| s * lvl(sa.r0_ug, sa.gr_ug, k);
    let stock_bg = |k| s * lvl(sa.r0_bg, sa.gr_bg, k);

    let mut r_ug = vec![0.0; m];
    let mut r_bg = vec![0.0; m];
    let base = UgRatios::new(p);
    for k in 0..m {
        let kf = k as f64;
        // stock terms relative to the date-k aggregate value
        let stock_next_ug = s * sa.r0_ug * sa.gr_ug / p.e0_ug * UgRatios::pow(sa.gr_ug / p.g_a, kf);
        let stock_next_bg = s * sa.r0_bg * sa.gr_bg / p.e0_ug * UgRatios::pow(sa.gr_bg / p.g_a, kf);
        r_ug[k] = base.ug_return(k) + p.pi * stock_next_ug + (1.0 - p.pi) * stock_next_bg;
        let stock_bg_rel = s * sa.r0_bg * sa.gr_bg / p.e0_bg * UgRatios::pow(sa.gr_bg / p.g_d, kf);
        r_bg[k] = balanced_return(p) + stock_bg_rel;
    }

    // backward recursions for land and stock fundamentals in both regimes
    let mut vl_bg = vec![0.0; m + 1];
    let mut vs_bg = vec![0.0; m + 1];
    let mut vl_ug = vec![0.0; m + 1];
    let mut vs_ug = vec![0.0; m + 1];
    for k in (0..m).rev() {
        vl_bg[k] = (land_bg(k + 1) + vl_bg[k + 1]) / r_bg[k];
        vs_bg[k] = (stock_bg(k + 1) + vs_bg[k + 1]) / r_bg[k];
        vl_ug[k] = (p.pi * (land_ug(k + 1) + vl_ug[k + 1])
            + (1.0 - p.pi) * (land_bg(k + 1) + vl_bg[k + 1]))
            / r_ug[k];
        vs_ug[k] = (p.pi * (stock_ug(k + 1) + vs_ug[k + 1])
            + (1.0 - p.pi) * (stock_bg(k + 1) + vs_bg[k + 1]))
            / r_ug[k];
    }
    if vl_ug.iter().chain(&vs_ug).any(|v| !v.is_finite()) {
        return Err(ToyError::Overflow);
    }

    let stock_share = if s > 0.0 { 1.0 - split } else { 0.0 };
    let rows = path
        .states()
        .iter()
        .enumerate()
        .map(|(t, &regime)| {
            let (w, vl, vs, rent_x, div_s, r) = match regime {
                Regime::Unbalanced => (w_ug(t), vl_ug[t], vs_ug[t], land_ug(t), stock_ug(t), r_ug[t]),
                Regime::Balanced => (w_bg(t), vl_bg[t], vs_bg[t], land_bg(t), stock_bg(t), r_bg[t]),
            };
            let bubble = w - vl - vs;
            let stock_value = vs + stock_share * bubble;
            let land_value = w - stock_value;
            let e = w;
            let d = rent_x / x;
            let price = land_value / x;
            ToyPathPoint {
                t,
                regime,
                e,
                d,
                p: price,
                r,
                c: e + rent_x + div_s,
                price_rent: price / d,
                collapse_row: path.collapse_date() == Some(t),
                second_asset_q: (s > 0.0).then(|| stock_value / s),
                second_asset_r: Some(div_s / if s > 0.0 { s } else { 1.0 }),
            }
        })
        .collect();
    Ok(rows)
}
