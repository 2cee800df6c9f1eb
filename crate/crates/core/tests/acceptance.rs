//! Acceptance criteria. Runs as a plain binary (`harness = false`) and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.
//!
//!     cargo test -p bubblelab --test acceptance

use std::process::ExitCode;
use std::time::Instant;

use bubblelab::innovation_model::{self as inno, Corner};
use bubblelab::oracle;
use bubblelab::params::{draw_replication_path, Regime, RegimePath, SecondAsset};
use bubblelab::sim_engine::{run_monte_carlo, McConfig, ModelConfig};
use bubblelab::toy_model::{self as toy};
use bubblelab::{InnovationParams, ToyParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const NO_ARBITRAGE_TOL: f64 = 1e-12;
const VD_LIMIT_TOL: f64 = 1e-6;
const PD_GROWTH_FACTOR: f64 = 1e3;
const BUBBLE_LIMIT_TOL: f64 = 1e-8;
const DECOMPOSITION_TAIL_TOL: f64 = 1e-10;
const CONSUMPTION_TOL: f64 = 1e-12;
const AGGREGATE_TOL: f64 = 1e-10;
const BGP_VALUE_TOL: f64 = 1e-10;
const BGP_RESIDUAL_TOL: f64 = 1e-12;
const TAU_SLOPE_TOL: f64 = 1e-3;
const FUNDAMENTAL_SHARE: f64 = 1e-3;
const GROWTH_CONSTANT_TOL: f64 = 1e-10;
const GROWTH_VARIES_MIN: f64 = 1e-6;
const COLLAPSE_RATIO_TOL: f64 = 1e-3;
const CHI2_MIN_P: f64 = 1e-3;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Expected next-period payoff computed directly from level formulas.
fn toy_expected_payoff(p: &ToyParams, t: usize, regime: Regime) -> f64 {
    let t1 = (t + 1) as i32;
    let ug = p.d0_ug * p.g_d_prime.powi(t1) + p.e0_ug * p.g_a.powi(t1) / p.land;
    let bg = p.d0_bg * p.g_d.powi(t1) + p.e0_bg * p.g_d.powi(t1) / p.land;
    match regime {
        Regime::Unbalanced => p.pi * ug + (1.0 - p.pi) * bg,
        Regime::Balanced => bg,
    }
}

fn c1_toy_no_arbitrage() -> Outcome {
    let p = ToyParams::default();
    let mut worst: f64 = 0.0;
    for rep in 0..1000 {
        let path = draw_replication_path(p.pi, 200, 2024, rep);
        for row in toy::toy_path(&p, &path).iter().take(200) {
            let expected = toy_expected_payoff(&p, row.t, row.regime);
            worst = worst.max(rel(row.r * row.p, expected));
        }
    }
    check(
        worst < NO_ARBITRAGE_TOL,
        format!("max relative residual {worst:.2e} over 1000 paths"),
        format!("max relative residual {worst:.2e} >= {NO_ARBITRAGE_TOL:e}"),
    )
}

fn c2_toy_limits() -> Outcome {
    // fast-converging case with G_d' > G_d; the default growth rates need
    // thousands of dates before the balanced terms die out
    let p = ToyParams {
        pi: 0.5,
        g_a: 2.0,
        g_d_prime: 1.1,
        g_d: 1.0,
        ..ToyParams::default()
    };
    let limit = p.pi * p.g_d_prime / (p.pi * p.g_a - p.pi * p.g_d_prime);
    let rent = toy::rent(&p, 200, Regime::Unbalanced);
    let d = toy::decompose_within(&p, 200, Regime::Unbalanced, 1e-9 * rent, 1_000_000).map_err(|e| e.to_string())?;
    let vd = d.fundamental / rent;
    let pd0 = toy::toy_point(&p, 0, Regime::Unbalanced).price_rent;
    let pd200 = toy::toy_point(&p, 200, Regime::Unbalanced).price_rent;
    let lib = toy::limit_ratios(&p).v_over_d_limit;
    check(
        (vd - limit).abs() < VD_LIMIT_TOL && (lib - limit).abs() < 1e-14 && pd200 > PD_GROWTH_FACTOR * pd0,
        format!("V/D(200)={vd:.10} limit={limit:.10}; P/D grew x{:.2e}", pd200 / pd0),
        format!("V/D(200)={vd} limit={limit} library={lib}; P/D ratio {}", pd200 / pd0),
    )
}

fn c3_toy_decomposition() -> Outcome {
    let p = ToyParams::default();
    let d = toy::decompose_within(&p, 0, Regime::Unbalanced, DECOMPOSITION_TAIL_TOL, 10_000_000).map_err(|e| e.to_string())?;
    let b = toy::bubble_via_terminal(&p, 0, d.horizon_n).map_err(|e| e.to_string())?;
    let gap = (d.bubble - b.limit).abs();
    if gap >= BUBBLE_LIMIT_TOL {
        return Err(format!("P0-V0={} terminal limit={} gap {gap:e}", d.bubble, b.limit));
    }
    // positivity whenever (a)(b)(c) hold
    let mut checked = 0;
    for &g_a in &[1.02, 1.05, 1.2, 1.6] {
        for &g_dp in &[0.97, 1.0, 1.01] {
            for &g_d in &[0.95, 0.97] {
                let q = ToyParams {
                    g_a,
                    g_d_prime: g_dp,
                    g_d,
                    ..ToyParams::default()
                };
                if !toy::conditions_abc(&q).bubble_predicted {
                    continue;
                }
                let dq = toy::decompose_within(&q, 0, Regime::Unbalanced, DECOMPOSITION_TAIL_TOL, 10_000_000)
                    .map_err(|e| e.to_string())?;
                let lim = toy::bubble_via_terminal(&q, 0, 1).map_err(|e| e.to_string())?.limit;
                if !(dq.bubble > 0.0 && lim > 0.0) {
                    return Err(format!("no bubble at G_a={g_a} G_d'={g_dp} G_d={g_d}"));
                }
                checked += 1;
            }
        }
    }
    // balanced dates carry none
    let mut worst_bg: f64 = 0.0;
    for t in [1, 10, 50, 100] {
        let db = toy::decompose_within(&p, t, Regime::Balanced, DECOMPOSITION_TAIL_TOL, 10_000_000).map_err(|e| e.to_string())?;
        let excess = db.bubble.abs() - db.tail_bound;
        worst_bg = worst_bg.max(excess / db.price);
    }
    check(
        worst_bg <= 1e-14,
        format!("|P0-V0 - limit|={gap:.1e} at N={}; {checked} bubble cases positive; BG within tail", d.horizon_n),
        format!("balanced bubble exceeds tail bound by {worst_bg:e} of price"),
    )
}

fn c4_special_case_drop() -> Outcome {
    let p = ToyParams {
        g_d: 1.0,
        g_d_prime: 1.0,
        ..ToyParams::default()
    };
    let drops: Vec<f64> = (1..=30).map(|t| toy::collapse_drop(&p, t)).collect();
    check(
        drops.windows(2).all(|w| w[1] > w[0]),
        format!("drop rises from {:.4} (T=1) to {:.4} (T=30)", drops[0], drops[29]),
        "collapse drop not strictly increasing".into(),
    )
}

fn c5_multi_asset() -> Outcome {
    let base = ToyParams::default();
    let p = ToyParams {
        second_asset: Some(SecondAsset {
            shares: 1.0,
            r0_ug: base.d0_ug,
            r0_bg: base.d0_bg,
            gr_ug: base.g_d_prime,
            gr_bg: base.g_d,
        }),
        ..base.clone()
    };
    let path = RegimePath::collapsing_at(60, Some(35));
    let runs: Vec<_> = [0.0, 0.25, 0.5, 1.0]
        .iter()
        .map(|&s| toy::multi_asset_path(&p, &path, s))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut worst_c: f64 = 0.0;
    for run in &runs[1..] {
        for (a, b) in runs[0].iter().zip(run) {
            worst_c = worst_c.max(rel(b.c, a.c));
        }
    }
    let doubled = ToyParams {
        d0_ug: 2.0 * base.d0_ug,
        d0_bg: 2.0 * base.d0_bg,
        ..base
    };
    let single = toy::toy_path(&doubled, &path);
    let mut worst_agg: f64 = 0.0;
    for run in &runs {
        for (m, s) in run.iter().zip(&single) {
            let aggregate = m.p * p.land + m.second_asset_q.unwrap_or(0.0);
            worst_agg = worst_agg.max(rel(aggregate, s.p * doubled.land));
        }
    }
    check(
        worst_c < CONSUMPTION_TOL && worst_agg < AGGREGATE_TOL,
        format!("consumption spread {worst_c:.1e}; aggregate vs benchmark {worst_agg:.1e}"),
        format!("consumption spread {worst_c:e}; aggregate gap {worst_agg:e}"),
    )
}

fn c6_innovation_bgp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_v: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut cases = 0;
    while cases < 100 {
        let p = InnovationParams {
            alpha: rng.random_range(0.05..0.9),
            rho: rng.random_range(0.3..3.0),
            gamma: rng.random_range(0.1..0.9),
            a: rng.random_range(0.02..1.0),
            skilled: rng.random_range(1.0..20.0),
            unskilled: rng.random_range(1.0..20.0),
            phi_bg: rng.random_range(0.1..1.5),
            ..InnovationParams::default()
        };
        let bgp = inno::bgp_solution(&p);
        if bgp.corner != Corner::Interior {
            continue;
        }
        cases += 1;
        worst_v = worst_v.max(rel(bgp.v_bg, 1.0 / p.a));
        // returns measured on a simulated balanced path
        let path = inno::simulate(&p, &RegimePath::collapsing_at(4, Some(1)));
        for pt in &path[1..4] {
            let rhs = (pt.d + pt.p) * bgp.g_n_bg.powf(p.phi_bg - 1.0);
            worst_res = worst_res.max(rel(pt.r * pt.p, rhs));
        }
    }
    check(
        worst_v < BGP_VALUE_TOL && worst_res < BGP_RESIDUAL_TOL,
        format!("100 interior cases: max |v-1/a|/(1/a)={worst_v:.1e}, residual {worst_res:.1e}"),
        format!("v error {worst_v:e}, residual {worst_res:e}"),
    )
}

fn c7_rd_share_dynamics() -> Outcome {
    let p = InnovationParams::default();
    let report = bubblelab::validate_innovation(&p).map_err(|e| e.to_string())?;
    if !report.bubble_hypotheses() {
        return Err("default params miss the bubble hypotheses".into());
    }
    let ug = inno::simulate(&p, &RegimePath::all_unbalanced(301));
    // tau itself rounds to 1 long before t=300; its complement is the stored state
    let gap_decreasing = ug.windows(2).all(|w| w[1].logs.one_minus_tau < w[0].logs.one_minus_tau);
    let tau_monotone = ug.windows(2).all(|w| w[1].tau >= w[0].tau);
    let slope = ug[301].logs.one_minus_tau - ug[300].logs.one_minus_tau;
    let g_ug = 1.0 + p.a * p.skilled;
    let predicted = -p.imbalance() / p.rho * g_ug.ln();
    let collapse = 150;
    let path = inno::simulate(&p, &RegimePath::collapsing_at(300, Some(collapse)));
    let pd_rising = path[..collapse].windows(2).all(|w| w[1].price_div_ratio > w[0].price_div_ratio);
    let pd_flat = path[collapse..].windows(2).all(|w| w[1].price_div_ratio == w[0].price_div_ratio);
    check(
        gap_decreasing && tau_monotone && (slope - predicted).abs() < TAU_SLOPE_TOL && pd_rising && pd_flat,
        format!("ln(1-tau) slope at t=300 {slope:.6} vs {predicted:.6}; P/D rising then constant"),
        format!(
            "gap decreasing={gap_decreasing} tau monotone={tau_monotone} slope={slope} predicted={predicted} pd rising={pd_rising} flat={pd_flat}"
        ),
    )
}

fn c8_vanishing_fundamental() -> Outcome {
    let p = InnovationParams::default();
    let tol = 1e-12;
    let (pt, cert) = oracle::innovation_fundamental_at(&p, 100, 5000, tol).map_err(|e| e.to_string())?;
    let bound = FUNDAMENTAL_SHARE * pt.p;
    check(
        cert.partial_sum + cert.tail_bound < bound && cert.dominating_ratio < 1.0 && cert.tail_bound <= tol,
        format!(
            "v(100)={:.3e} (+tail {:.1e}) < {bound:.1e}; ratio {:.4}, N={}",
            cert.partial_sum, cert.tail_bound, cert.dominating_ratio, cert.horizon_n
        ),
        format!("certificate {cert:?} vs bound {bound}"),
    )
}

fn c9_variety_growth() -> Outcome {
    let p = InnovationParams::default();
    let report = bubblelab::validate_innovation(&p).map_err(|e| e.to_string())?;
    if !report.growth_hypotheses() {
        return Err("default params miss the growth hypotheses".into());
    }
    let bgp = inno::bgp_solution(&p);
    let collapse = 200;
    let path = inno::simulate(&p, &RegimePath::collapsing_at(collapse + 5, Some(collapse)));
    let ok = path[..collapse].iter().all(|pt| pt.g_n > bgp.g_n_bg && pt.tau > bgp.tau_bg);
    let min_gap = path[..collapse].iter().map(|pt| pt.g_n - bgp.g_n_bg).fold(f64::INFINITY, f64::min);
    check(
        ok,
        format!("min G_n,t - G_BG = {min_gap:.4} over t<{collapse}"),
        format!("growth not above balanced rate (min gap {min_gap})"),
    )
}

fn c10_gdp_vs_collapse_date() -> Outcome {
    let p = InnovationParams::default();
    let rows = inno::prop3_gdp_monotonicity(&p, &[2, 4, 8, 16, 32], 40).map_err(|e| e.to_string())?;
    let ok = rows.windows(2).all(|w| w[1].1 > w[0].1);
    let shown: Vec<String> = rows.iter().map(|(t, g)| format!("T={t}:{g:.4e}")).collect();
    check(ok, shown.join(" "), format!("not increasing: {}", shown.join(" ")))
}

fn c11_uzawa() -> Outcome {
    let grid: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64).collect();
    let rhos = [0.5, 1.0, 1.5, 2.0, 3.0];
    let mut mismatches = 0;
    for &phi in &grid {
        for &psi in &grid {
            for &rho in &rhos {
                let truth = phi == psi || rho == 1.0;
                if inno::uzawa_check(phi, psi, rho).balanced != truth {
                    mismatches += 1;
                }
            }
        }
    }
    let base = InnovationParams::default();
    let log_growth = |phi: f64, psi: f64, rho: f64| -> Vec<f64> {
        let p = InnovationParams { rho, ..base.clone() };
        let path = inno::simulate_fixed_exponents(&p, phi, psi, 50);
        path.windows(2).map(|w| w[1].logs.y - w[0].logs.y).collect()
    };
    let spread = |g: &[f64]| g[1..].iter().map(|x| (x - g[1]).abs()).fold(0.0, f64::max);
    let balanced = [(0.5, 0.5, 2.0), (1.2, 1.2, 0.5), (0.6, 0.4, 1.0), (1.8, 0.2, 1.0), (2.0, 2.0, 3.0)];
    let unbalanced = [(0.6, 0.4, 2.0), (0.4, 1.2, 0.5), (1.4, 0.6, 1.5), (2.0, 1.0, 3.0), (0.8, 0.2, 2.0)];
    let worst_flat = balanced.iter().map(|&(f, s, r)| spread(&log_growth(f, s, r))).fold(0.0, f64::max);
    let least_bent = unbalanced
        .iter()
        .map(|&(f, s, r)| spread(&log_growth(f, s, r)))
        .fold(f64::INFINITY, f64::min);
    check(
        mismatches == 0 && worst_flat < GROWTH_CONSTANT_TOL && least_bent > GROWTH_VARIES_MIN,
        format!("500-point grid exact; balanced spread {worst_flat:.1e}, unbalanced spread >= {least_bent:.1e}"),
        format!("mismatches={mismatches} balanced spread={worst_flat:e} unbalanced spread={least_bent:e}"),
    )
}

fn c12_collapse_asymptotics() -> Outcome {
    let p = InnovationParams::default();
    let c = inno::collapse_comparisons(&p, 200, 202).map_err(|e| e.to_string())?;
    let bgp = inno::bgp_solution(&p);
    let g_ug = 1.0 + p.a * p.skilled;
    let price_target = g_ug.powf(p.psi_ug - 1.0) / bgp.g_n_bg.powf(p.phi_bg - 1.0);
    let output_target = g_ug.powf(p.psi_ug) / bgp.g_n_bg.powf(p.phi_bg);
    let price_ratio = c.price_growth_before.unwrap() / c.price_growth_after;
    let output_ratio = c.output_growth_before.unwrap() / c.output_growth_after;
    let (ep, eo) = (rel(price_ratio, price_target), rel(output_ratio, output_target));
    check(
        ep < COLLAPSE_RATIO_TOL && eo < COLLAPSE_RATIO_TOL,
        format!("price ratio {price_ratio:.6} vs {price_target:.6}; output {output_ratio:.6} vs {output_target:.6}"),
        format!("price err {ep:e}, output err {eo:e}"),
    )
}

fn c13_monte_carlo() -> Outcome {
    let reps = 100_000u64;
    let pi: f64 = 0.9;
    let horizon = 200;
    let model = ModelConfig::Toy(ToyParams::default());
    let mut cfg = McConfig::new(model, horizon, reps, 13);
    cfg.threads = Some(1);
    let one = run_monte_carlo(&cfg).map_err(|e| e.to_string())?;
    cfg.threads = Some(4);
    let four = run_monte_carlo(&cfg).map_err(|e| e.to_string())?;
    cfg.threads = Some(0);
    let auto = run_monte_carlo(&cfg).map_err(|e| e.to_string())?;
    let identical = one == four && one == auto;

    // bins T=1..K-1 individually, the rest (including never) pooled
    let n = reps as f64;
    let prob = |t: usize| pi.powi(t as i32 - 1) * (1.0 - pi);
    let last = (1..).take_while(|&t| n * prob(t) >= 5.0).last().unwrap();
    let mut stat = 0.0;
    let mut pooled_obs = reps;
    let mut pooled_exp = n;
    for t in 1..last {
        let obs = one.collapse_date_histogram.get(&t).copied().unwrap_or(0);
        let exp = n * prob(t);
        stat += (obs as f64 - exp).powi(2) / exp;
        pooled_obs -= obs;
        pooled_exp -= exp;
    }
    stat += (pooled_obs as f64 - pooled_exp).powi(2) / pooled_exp;
    let df = (last - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
    let mean_ok = (one.collapse_date_mean - 1.0 / (1.0 - pi)).abs() < 3.0 * one.collapse_date_stderr;
    check(
        identical && p_value > CHI2_MIN_P && mean_ok,
        format!(
            "chi2={stat:.2} df={df} p={p_value:.3}; mean T={:.4}±{:.4}; 1/4/auto threads identical",
            one.collapse_date_mean, one.collapse_date_stderr
        ),
        format!("identical={identical} p={p_value} mean={} se={}", one.collapse_date_mean, one.collapse_date_stderr),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("toy no-arbitrage residual", c1_toy_no_arbitrage),
        ("toy limit ratios", c2_toy_limits),
        ("toy bubble decomposition", c3_toy_decomposition),
        ("constant-rent collapse drop", c4_special_case_drop),
        ("multi-asset bubble substitution", c5_multi_asset),
        ("innovation balanced growth path", c6_innovation_bgp),
        ("R&D share and price-dividend dynamics", c7_rd_share_dynamics),
        ("vanishing normalized fundamental", c8_vanishing_fundamental),
        ("variety growth above balanced rate", c9_variety_growth),
        ("post-collapse GDP rises with bubble length", c10_gdp_vs_collapse_date),
        ("balanced-growth knife edge", c11_uzawa),
        ("collapse growth asymptotics", c12_collapse_asymptotics),
        ("Monte Carlo collapse-date law", c13_monte_carlo),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
