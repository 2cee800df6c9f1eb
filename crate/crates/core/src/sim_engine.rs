//! Monte Carlo over collapse dates.
//!
//! A replication is fully described by its collapse date, and the path of
//! either economy depends on nothing else. So the engine draws all dates
//! (one counter-derived stream per replication), solves one path per distinct
//! date, and weights path values by how often each date occurred. Every
//! reduction is an integer sum or runs over dates in sorted order, so the
//! summary is identical for any thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::innovation_model;
use crate::params::{draw_collapse_date, InnovationParams, RegimePath, ToyParams};
use crate::toy_model;

/// Environment variable capping worker threads; `0` means one per core.
pub const THREADS_ENV: &str = "BUBBLELAB_THREADS";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("quantile level {0} outside [0,1]")]
    QuantileLevel(f64),
    #[error("invalid {var}: {value:?}")]
    ThreadEnv { var: &'static str, value: String },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Toy(#[from] toy_model::ToyError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Toy(ToyParams),
    Innovation(InnovationParams),
}

impl ModelConfig {
    pub fn pi(&self) -> f64 {
        match self {
            ModelConfig::Toy(p) => p.pi,
            ModelConfig::Innovation(p) => p.pi,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Toy(_) => "toy",
            ModelConfig::Innovation(_) => "innovation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub model: ModelConfig,
    /// Last simulated date.
    pub horizon: usize,
    pub replications: u64,
    pub seed: u64,
    /// Worker threads; `None` defers to the environment.
    pub threads: Option<usize>,
    /// Half-width of the event-time window around the collapse.
    pub event_window: usize,
    pub quantile_levels: Vec<f64>,
}

impl McConfig {
    pub fn new(model: ModelConfig, horizon: usize, replications: u64, seed: u64) -> Self {
        McConfig {
            model,
            horizon,
            replications,
            seed,
            threads: None,
            event_window: 10,
            quantile_levels: vec![0.05, 0.25, 0.5, 0.75, 0.95],
        }
    }
}

/// Mean and nearest-rank quantiles of one variable, per date.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    /// `quantiles[i][t]` at `quantile_levels[i]`.
    pub quantiles: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSet {
    #[serde(rename = "P")]
    pub price: SeriesStats,
    #[serde(rename = "Y")]
    pub output: SeriesStats,
    #[serde(rename = "GDP")]
    pub gdp: SeriesStats,
    pub price_dividend: SeriesStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventTimeStats {
    /// `t - T` for each column.
    pub offsets: Vec<i64>,
    /// Replications contributing at each offset.
    pub counts: Vec<u64>,
    pub series: SeriesSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub model: String,
    pub replications: u64,
    pub seed: u64,
    pub pi: f64,
    pub horizon: usize,
    /// Collapse date -> count, for replications that collapsed by the horizon.
    pub collapse_date_histogram: BTreeMap<usize, u64>,
    pub never_collapsed: u64,
    /// Mean and standard error of the collapse date among collapsed replications.
    pub collapse_date_mean: f64,
    pub collapse_date_stderr: f64,
    pub quantile_levels: Vec<f64>,
    /// Aligned by calendar date `0..=horizon`.
    pub calendar: SeriesSet,
    /// Aligned by `t - T` among collapsed replications.
    pub event_time: EventTimeStats,
}

/// Worker count from the environment: unset means automatic.
pub fn threads_from_env() -> Result<usize, SimError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| SimError::ThreadEnv {
            var: THREADS_ENV,
            value: v,
        }),
    }
}

/// Collapse date of every replication, in replication order.
pub fn collapse_dates(pi: f64, horizon: usize, replications: u64, seed: u64) -> Vec<Option<usize>> {
    (0..replications)
        .into_par_iter()
        .map(|rep| draw_collapse_date(pi, horizon, seed, rep))
        .collect()
}

/// The four tracked variables along one path.
#[derive(Debug, Clone)]
struct PathValues {
    price: Vec<f64>,
    output: Vec<f64>,
    gdp: Vec<f64>,
    price_dividend: Vec<f64>,
}

impl PathValues {
    fn get(&self, var: usize) -> &[f64] {
        match var {
            0 => &self.price,
            1 => &self.output,
            2 => &self.gdp,
            _ => &self.price_dividend,
        }
    }
}

fn path_values(model: &ModelConfig, horizon: usize, collapse: Option<usize>) -> PathValues {
    let path = RegimePath::collapsing_at(horizon, collapse);
    match model {
        // output of the land economy is endowment plus rent, all of it consumed
        ModelConfig::Toy(p) => {
            let rows = toy_model::toy_path(p, &path);
            PathValues {
                price: rows.iter().map(|r| r.p).collect(),
                output: rows.iter().map(|r| r.c).collect(),
                gdp: rows.iter().map(|r| r.c).collect(),
                price_dividend: rows.iter().map(|r| r.price_rent).collect(),
            }
        }
        ModelConfig::Innovation(p) => {
            let rows = innovation_model::simulate(p, &path);
            PathValues {
                price: rows.iter().map(|r| r.price).collect(),
                output: rows.iter().map(|r| r.y).collect(),
                gdp: rows.iter().map(|r| r.gdp).collect(),
                price_dividend: rows.iter().map(|r| r.price_div_ratio).collect(),
            }
        }
    }
}

/// Weighted mean with the first value as shift, so a column of identical
/// values reproduces that value exactly.
fn weighted_mean(values: &[(f64, u64)]) -> f64 {
    let Some(&(v0, _)) = values.first() else {
        return f64::NAN;
    };
    if values.iter().all(|&(v, _)| v == v0) {
        return v0;
    }
    let total: u64 = values.iter().map(|&(_, c)| c).sum();
    let shifted: f64 = values.iter().map(|&(v, c)| c as f64 * (v - v0)).sum();
    v0 + shifted / total as f64
}

/// Nearest-rank quantile: smallest value whose cumulative count reaches `ceil(q N)`.
fn weighted_quantile(sorted: &[(f64, u64)], total: u64, q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((q * total as f64).ceil() as u64).max(1);
    let mut seen = 0;
    for &(v, c) in sorted {
        seen += c;
        if seen >= rank {
            return v;
        }
    }
    sorted[sorted.len() - 1].0
}

fn column_stats(columns: Vec<Vec<(f64, u64)>>, levels: &[f64]) -> SeriesStats {
    let mean = columns.iter().map(|c| weighted_mean(c)).collect();
    let mut quantiles = vec![Vec::with_capacity(columns.len()); levels.len()];
    for mut col in columns {
        let total = col.iter().map(|&(_, c)| c).sum();
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, &q) in levels.iter().enumerate() {
            quantiles[i].push(weighted_quantile(&col, total, q));
        }
    }
    SeriesStats { mean, quantiles }
}

pub fn run_monte_carlo(config: &McConfig) -> Result<McSummary, SimError> {
    if config.replications == 0 {
        return Err(SimError::NoReplications);
    }
    if config.horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    if let Some(&q) = config.quantile_levels.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(SimError::QuantileLevel(q));
    }
    let threads = match config.threads {
        Some(n) => n,
        None => threads_from_env()?,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| summarize(config))
}

fn summarize(config: &McConfig) -> Result<McSummary, SimError> {
    let pi = config.model.pi();
    let horizon = config.horizon;
    let dates = collapse_dates(pi, horizon, config.replications, config.seed);

    let counts: BTreeMap<Option<usize>, u64> = dates
        .par_iter()
        .fold(BTreeMap::new, |mut m, d| {
            *m.entry(*d).or_insert(0u64) += 1;
            m
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });

    // None sorts first: the path that never collapses is the shift reference
    let distinct: Vec<(Option<usize>, u64)> = counts.iter().map(|(k, v)| (*k, *v)).collect();
    let paths: Vec<PathValues> = distinct
        .par_iter()
        .map(|(t, _)| path_values(&config.model, horizon, *t))
        .collect();

    let levels = &config.quantile_levels;
    let calendar_var = |var: usize| {
        let columns = (0..=horizon)
            .map(|t| {
                distinct
                    .iter()
                    .zip(&paths)
                    .map(|((_, c), pv)| (pv.get(var)[t], *c))
                    .collect()
            })
            .collect();
        column_stats(columns, levels)
    };

    let window = config.event_window as i64;
    let offsets: Vec<i64> = (-window..=window).collect();
    let event_column = |var: usize, k: i64| -> Vec<(f64, u64)> {
        distinct
            .iter()
            .zip(&paths)
            .filter_map(|((t, c), pv)| {
                let t = (*t)? as i64 + k;
                (0..=horizon as i64)
                    .contains(&t)
                    .then(|| (pv.get(var)[t as usize], *c))
            })
            .collect()
    };
    let event_var = |var: usize| column_stats(offsets.iter().map(|&k| event_column(var, k)).collect(), levels);
    let event_counts = offsets
        .iter()
        .map(|&k| event_column(0, k).iter().map(|&(_, c)| c).sum())
        .collect();

    let histogram: BTreeMap<usize, u64> = counts.iter().filter_map(|(k, v)| k.map(|k| (k, *v))).collect();
    let never = counts.get(&None).copied().unwrap_or(0);
    let collapsed: u64 = histogram.values().sum();
    let (mean, stderr) = if collapsed == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let n = collapsed as f64;
        let mean = histogram.iter().map(|(&t, &c)| t as f64 * c as f64).sum::<f64>() / n;
        let var = histogram
            .iter()
            .map(|(&t, &c)| c as f64 * (t as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    };

    Ok(McSummary {
        model: config.model.name().to_string(),
        replications: config.replications,
        seed: config.seed,
        pi,
        horizon,
        collapse_date_histogram: histogram,
        never_collapsed: never,
        collapse_date_mean: mean,
        collapse_date_stderr: stderr,
        quantile_levels: levels.clone(),
        calendar: SeriesSet {
            price: calendar_var(0),
            output: calendar_var(1),
            gdp: calendar_var(2),
            price_dividend: calendar_var(3),
        },
        event_time: EventTimeStats {
            offsets: offsets.clone(),
            counts: event_counts,
            series: SeriesSet {
                price: event_var(0),
                output: event_var(1),
                gdp: event_var(2),
                price_dividend: event_var(3),
            },
        },
    })
}
