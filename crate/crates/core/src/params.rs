//! Model primitives, the two-state regime process and parameter validation.

// `!(x > y)` is used on purpose so NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// State of the macroeconomy. `Balanced` is absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// Unbalanced growth (UG).
    #[serde(rename = "UG")]
    Unbalanced,
    /// Balanced growth (BG).
    #[serde(rename = "BG")]
    Balanced,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Unbalanced => "UG",
            Regime::Balanced => "BG",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A stock-index style second savings vehicle for the endowment economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondAsset {
    /// Shares outstanding.
    #[serde(rename = "S")]
    pub shares: f64,
    #[serde(rename = "r0_UG")]
    pub r0_ug: f64,
    #[serde(rename = "r0_BG")]
    pub r0_bg: f64,
    /// Gross per-share dividend growth while unbalanced.
    #[serde(rename = "Gr_UG")]
    pub gr_ug: f64,
    /// Gross per-share dividend growth once balanced.
    #[serde(rename = "Gr_BG")]
    pub gr_bg: f64,
}

/// Primitives of the overlapping-generations land economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyParams {
    /// Probability of staying unbalanced next period.
    pub pi: f64,
    /// Gross endowment growth while unbalanced.
    #[serde(rename = "G_a")]
    pub g_a: f64,
    /// Gross rent growth while unbalanced.
    #[serde(rename = "G_d_prime")]
    pub g_d_prime: f64,
    /// Gross rent and endowment growth once balanced.
    #[serde(rename = "G_d")]
    pub g_d: f64,
    /// Land supply.
    #[serde(rename = "X")]
    pub land: f64,
    #[serde(rename = "e0_UG")]
    pub e0_ug: f64,
    #[serde(rename = "e0_BG")]
    pub e0_bg: f64,
    #[serde(rename = "D0_UG")]
    pub d0_ug: f64,
    #[serde(rename = "D0_BG")]
    pub d0_bg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_asset: Option<SecondAsset>,
}

impl Default for ToyParams {
    /// Illustrative values; not a calibration.
    fn default() -> Self {
        ToyParams {
            pi: 0.9,
            g_a: 1.05,
            g_d_prime: 1.01,
            g_d: 1.0,
            land: 1.0,
            e0_ug: 1.0,
            e0_bg: 0.5,
            d0_ug: 0.1,
            d0_bg: 0.05,
            second_asset: None,
        }
    }
}

/// Primitives of the variety-expansion economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationParams {
    pub pi: f64,
    /// CES weight on effective unskilled labor.
    pub alpha: f64,
    /// Inverse elasticity of substitution.
    pub rho: f64,
    /// Intermediate-goods substitution parameter.
    pub gamma: f64,
    /// R&D productivity.
    pub a: f64,
    /// Skilled-labor mass.
    #[serde(rename = "H")]
    pub skilled: f64,
    /// Unskilled-labor mass.
    #[serde(rename = "L")]
    pub unskilled: f64,
    #[serde(rename = "phi_UG")]
    pub phi_ug: f64,
    #[serde(rename = "psi_UG")]
    pub psi_ug: f64,
    /// Spillover exponent on both factors once balanced.
    #[serde(rename = "phi_BG")]
    pub phi_bg: f64,
    /// Initial variety mass.
    pub n0: f64,
}

impl Default for InnovationParams {
    /// Illustrative bubble-regime values; not a calibration.
    fn default() -> Self {
        InnovationParams {
            pi: 0.9,
            alpha: 0.3,
            rho: 2.0,
            gamma: 0.5,
            a: 0.1,
            skilled: 10.0,
            unskilled: 10.0,
            phi_ug: 2.0,
            psi_ug: 1.1,
            phi_bg: 0.5,
            n0: 2.0,
        }
    }
}

/// Spillover exponents in force under one regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub phi: f64,
    pub psi: f64,
}

impl InnovationParams {
    pub fn exponents(&self, regime: Regime) -> Exponents {
        match regime {
            Regime::Unbalanced => Exponents {
                phi: self.phi_ug,
                psi: self.psi_ug,
            },
            Regime::Balanced => Exponents {
                phi: self.phi_bg,
                psi: self.phi_bg,
            },
        }
    }

    /// `(phi_UG - psi_UG)(rho - 1)`.
    pub fn imbalance(&self) -> f64 {
        (self.phi_ug - self.psi_ug) * (self.rho - 1.0)
    }

    /// `alpha / ((1 - alpha) gamma)`, the coefficient of the unskilled income share.
    pub(crate) fn wage_share_coefficient(&self) -> f64 {
        self.alpha / ((1.0 - self.alpha) * self.gamma)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// One failed parameter condition.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("0<pi<1 violated (pi={0})")]
    PiOutOfRange(f64),
    #[error("X>0 violated")]
    LandSupply,
    #[error("{0}>0 violated")]
    NonPositive(&'static str),
    #[error("G_a>1 violated")]
    GaNotAboveOne,
    #[error("G_a>G_d' violated")]
    GaNotAboveGdPrime,
    #[error("G_d'>=G_d violated")]
    GdPrimeBelowGd,
    #[error("e0_UG>e0_BG violated")]
    EndowmentOrder,
    #[error("D0_UG>D0_BG violated")]
    RentOrder,
    #[error("second asset S>=0 violated")]
    NegativeShares,
    #[error("second asset dividend growth {0}<G_a violated")]
    SecondAssetGrowth(&'static str),
    #[error("second asset Gr_BG below the balanced return violated")]
    SecondAssetBalancedGrowth,
}

/// The complete list of violations found by a validation pass.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameters: {}", join(.0))]
pub struct ValidationError(pub Vec<Violation>);

fn join(vs: &[Violation]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

fn positive(v: &mut Vec<Violation>, name: &'static str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        v.push(Violation::NonPositive(name));
    }
}

/// Checks every toy-economy assumption; returns the params unchanged when all hold.
pub fn validate_toy(params: &ToyParams) -> Result<&ToyParams, ValidationError> {
    let p = params;
    let mut v = Vec::new();
    if !(p.pi > 0.0 && p.pi < 1.0) {
        v.push(Violation::PiOutOfRange(p.pi));
    }
    if !(p.land > 0.0 && p.land.is_finite()) {
        v.push(Violation::LandSupply);
    }
    positive(&mut v, "e0_UG", p.e0_ug);
    positive(&mut v, "e0_BG", p.e0_bg);
    positive(&mut v, "D0_UG", p.d0_ug);
    positive(&mut v, "D0_BG", p.d0_bg);
    positive(&mut v, "G_d", p.g_d);
    if !(p.g_a > 1.0) {
        v.push(Violation::GaNotAboveOne);
    }
    if !(p.g_a > p.g_d_prime) {
        v.push(Violation::GaNotAboveGdPrime);
    }
    if !(p.g_d_prime >= p.g_d) {
        v.push(Violation::GdPrimeBelowGd);
    }
    if !(p.e0_ug > p.e0_bg) {
        v.push(Violation::EndowmentOrder);
    }
    if !(p.d0_ug > p.d0_bg) {
        v.push(Violation::RentOrder);
    }
    if let Some(s) = &p.second_asset {
        if !(s.shares >= 0.0) {
            v.push(Violation::NegativeShares);
        }
        positive(&mut v, "r0_UG", s.r0_ug);
        positive(&mut v, "r0_BG", s.r0_bg);
        positive(&mut v, "Gr_UG", s.gr_ug);
        positive(&mut v, "Gr_BG", s.gr_bg);
        if !(s.gr_ug < p.g_a) {
            v.push(Violation::SecondAssetGrowth("Gr_UG"));
        }
        if !(s.gr_bg < p.g_a) {
            v.push(Violation::SecondAssetGrowth("Gr_BG"));
        }
        // balanced-state fundamentals of the index converge only below the floor return
        let floor = p.g_d * (1.0 + p.land * p.d0_bg / p.e0_bg);
        if !(s.gr_bg < floor) {
            v.push(Violation::SecondAssetBalancedGrowth);
        }
    }
    if v.is_empty() {
        Ok(params)
    } else {
        Err(ValidationError(v))
    }
}

/// Sign class of `(phi_UG - psi_UG)(rho - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpilloverClass {
    BubbleRegime,
    KnifeEdge,
    Other,
}

/// Classification of an innovation parameter set against the bubble and growth hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnovationReport {
    pub imbalance: f64,
    pub class: SpilloverClass,
    /// `psi_UG > phi_BG`.
    pub stock_growth_dominates: bool,
    /// `1 + alpha/(1-alpha)/gamma (H/L)^(rho-1) > 1/(aH)`: interior balanced R&D share.
    pub interior_bg: bool,
    /// `f(0, n0) > 1/(aH)` under unbalanced exponents.
    pub interior_initial: bool,
    /// `n0^((phi_UG - psi_UG)(rho - 1)) > 1`.
    pub initial_variety_condition: bool,
}

impl InnovationReport {
    /// Hypotheses of the bubble-emergence result.
    pub fn bubble_hypotheses(&self) -> bool {
        self.class == SpilloverClass::BubbleRegime && self.stock_growth_dominates && self.interior_initial
    }

    /// Bubble hypotheses plus the initial-variety condition.
    pub fn growth_hypotheses(&self) -> bool {
        self.bubble_hypotheses() && self.initial_variety_condition
    }
}

/// Classifies an innovation parameter set. Only non-positive or out-of-range
/// primitives are rejected.
pub fn validate_innovation(params: &InnovationParams) -> Result<InnovationReport, ValidationError> {
    let p = params;
    let mut v = Vec::new();
    if !(p.pi > 0.0 && p.pi < 1.0) {
        v.push(Violation::PiOutOfRange(p.pi));
    }
    if !(p.alpha >= 0.0 && p.alpha < 1.0) {
        v.push(Violation::NonPositive("alpha in [0,1): alpha"));
    }
    if !(p.gamma > 0.0 && p.gamma < 1.0) {
        v.push(Violation::NonPositive("gamma in (0,1): gamma"));
    }
    positive(&mut v, "rho", p.rho);
    positive(&mut v, "a", p.a);
    positive(&mut v, "H", p.skilled);
    positive(&mut v, "L", p.unskilled);
    positive(&mut v, "phi_UG", p.phi_ug);
    positive(&mut v, "psi_UG", p.psi_ug);
    positive(&mut v, "phi_BG", p.phi_bg);
    positive(&mut v, "n0", p.n0);
    if !v.is_empty() {
        return Err(ValidationError(v));
    }

    let imbalance = p.imbalance();
    let class = if imbalance > 0.0 {
        SpilloverClass::BubbleRegime
    } else if imbalance == 0.0 {
        SpilloverClass::KnifeEdge
    } else {
        SpilloverClass::Other
    };
    let target = 1.0 / (p.a * p.skilled);
    let k = p.wage_share_coefficient();
    let interior_bg = 1.0 + k * (p.skilled / p.unskilled).powf(p.rho - 1.0) > target;
    let f0 = 1.0 + k * (p.n0.powf(p.phi_ug - p.psi_ug) * p.skilled / p.unskilled).powf(p.rho - 1.0);
    Ok(InnovationReport {
        imbalance,
        class,
        stock_growth_dominates: p.psi_ug > p.phi_bg,
        interior_bg,
        interior_initial: f0 > target,
        initial_variety_condition: p.n0.powf(imbalance) > 1.0,
    })
}

// ---------------------------------------------------------------------------
// Regime paths
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("regime path must start unbalanced")]
    StartsBalanced,
    #[error("balanced state is absorbing; unbalanced again at t={0}")]
    NotAbsorbing(usize),
    #[error("regime path is empty")]
    Empty,
}

/// A realized regime sequence on dates `0..=t_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegimePath {
    states: Vec<Regime>,
    collapse_date: Option<usize>,
}

impl RegimePath {
    pub fn from_states(states: Vec<Regime>) -> Result<Self, PathError> {
        match states.first() {
            None => return Err(PathError::Empty),
            Some(Regime::Balanced) => return Err(PathError::StartsBalanced),
            _ => {}
        }
        let collapse_date = states.iter().position(|&s| s == Regime::Balanced);
        if let Some(c) = collapse_date {
            if let Some(k) = states[c..].iter().position(|&s| s == Regime::Unbalanced) {
                return Err(PathError::NotAbsorbing(c + k));
            }
        }
        Ok(RegimePath {
            states,
            collapse_date,
        })
    }

    /// Unbalanced before `collapse`, balanced from `collapse` on (if it is within `0..=t_max`).
    pub fn collapsing_at(t_max: usize, collapse: Option<usize>) -> Self {
        let collapse = collapse.filter(|&c| c >= 1 && c <= t_max);
        let states = (0..=t_max)
            .map(|t| match collapse {
                Some(c) if t >= c => Regime::Balanced,
                _ => Regime::Unbalanced,
            })
            .collect();
        RegimePath {
            states,
            collapse_date: collapse,
        }
    }

    /// Deterministic mode: unbalanced throughout.
    pub fn all_unbalanced(t_max: usize) -> Self {
        Self::collapsing_at(t_max, None)
    }

    pub fn states(&self) -> &[Regime] {
        &self.states
    }

    /// First date in the balanced state, if any.
    pub fn collapse_date(&self) -> Option<usize> {
        self.collapse_date
    }

    pub fn t_max(&self) -> usize {
        self.states.len() - 1
    }

    pub fn regime(&self, t: usize) -> Regime {
        self.states[t]
    }
}

/// Generator for replication `replication` of base seed `seed`.
///
/// Each replication owns a ChaCha stream; draw `t` sits at a fixed word offset
/// inside it, so a path does not depend on how replications are scheduled.
pub(crate) fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Collapse date of one replication, or `None` if the economy is still unbalanced at `t_max`.
pub fn draw_collapse_date(pi: f64, t_max: usize, seed: u64, replication: u64) -> Option<usize> {
    let mut rng = replication_rng(seed, replication);
    (1..=t_max).find(|_| rng.random::<f64>() >= pi)
}

/// Draws replication 0 of the regime chain.
pub fn draw_regime_path(pi: f64, t_max: usize, seed: u64) -> RegimePath {
    draw_replication_path(pi, t_max, seed, 0)
}

pub fn draw_replication_path(pi: f64, t_max: usize, seed: u64, replication: u64) -> RegimePath {
    RegimePath::collapsing_at(t_max, draw_collapse_date(pi, t_max, seed, replication))
}
