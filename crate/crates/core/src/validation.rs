//! Consistency checks between the closed forms and the simulation oracles.
//!
//! The grid and the random configurations here are the ones the `validate`
//! command and the acceptance tests run; each check reports its worst
//! deviation so failures can be located.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::effective_capacity::{effective_capacity, QosParams};
use crate::error::Result;
use crate::mode_graph::{alpha_matrix, build_from_table, Combining, OutageTable, Strategy, StrategyConfig};
use crate::monte_carlo::{paired_outage, OutageEstimate, simulate_service_process_with, EcEstimator, SimPlan};
use crate::outage::{LinkParams, OutageQuery, RateThreshold, Scheme};
use crate::specfun::ContourSpec;

pub const GRID_SNR_DB: [f64; 4] = [0.0, 5.0, 10.0, 20.0];
pub const GRID_RATES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const GRID_MAX_COUNT: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed |closed − MC| in units of the MC standard error.
    pub se_multiple: f64,
    /// Outage points below this probability are not compared.
    pub outage_floor: f64,
    /// Allowed relative error of simulated effective capacity.
    pub ec_relative: f64,
    /// Numerical slack for the closed-form IR ≤ RR ordering.
    pub dominance_slack: f64,
    /// Re-estimate outage points beyond `se_multiple` on an independent
    /// stream before declaring them failed.
    pub confirm: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            se_multiple: 3.0,
            outage_floor: 1e-3,
            ec_relative: 0.02,
            dominance_slack: 1e-8,
            confirm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Number of compared points.
    pub points: usize,
    /// Worst normalised deviation (tolerance units depend on the check).
    pub worst: f64,
    pub detail: String,
}

/// Link pairs (first, second) used at one SNR: symmetric unit-variance links
/// and an asymmetric variant with a stronger, less faded second hop.
pub fn link_variants(snr_db: f64) -> Result<Vec<(LinkParams, LinkParams)>> {
    Ok(vec![
        (LinkParams::from_db(snr_db, 1.0)?, LinkParams::from_db(snr_db, 1.0)?),
        (LinkParams::from_db(snr_db, 2.0)?, LinkParams::from_db(snr_db + 6.0, 0.5)?),
    ])
}

/// The outage comparison grid, plus (RR, IR) index pairs of matching events.
pub fn outage_grid() -> Result<(Vec<OutageQuery>, Vec<(usize, usize)>)> {
    let mut queries = Vec::new();
    let mut pairs = Vec::new();
    for &db in &GRID_SNR_DB {
        for (first, second) in link_variants(db)? {
            for &r in &GRID_RATES {
                let rt = RateThreshold::new(r)?;
                let q = |scheme, k1, k2| OutageQuery { scheme, first, second, k1, k2, rt };
                queries.push(q(Scheme::Arq, 1, 0));
                for k in 1..=GRID_MAX_COUNT {
                    pairs.push((queries.len(), queries.len() + 1));
                    queries.push(q(Scheme::RrSource, k, 0));
                    queries.push(q(Scheme::IrSource, k, 0));
                }
                for l in 1..=GRID_MAX_COUNT {
                    for k2 in 1..=GRID_MAX_COUNT {
                        pairs.push((queries.len(), queries.len() + 1));
                        queries.push(q(Scheme::RrCombined, l, k2));
                        queries.push(q(Scheme::IrCombined, l, k2));
                    }
                }
            }
        }
    }
    Ok((queries, pairs))
}

/// |closed − MC| in units of the estimator's standard error at the closed-form
/// probability (the plug-in value degenerates to 0 when every sample is an
/// outage).
fn deviation(q: &OutageQuery, c: f64, m: &OutageEstimate) -> (f64, String) {
    let se = (c * (1.0 - c) / m.samples as f64).sqrt();
    let z = if se > 0.0 {
        (c - m.estimate).abs() / se
    } else if c == m.estimate {
        0.0
    } else {
        f64::INFINITY
    };
    (z, format!("{}: closed={c:.6e} mc={:.6e} se={se:.2e} ({z:.2}·SE)", describe(q), m.estimate))
}

/// Seed of the independent stream used to re-estimate flagged points.
pub fn confirmation_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

fn describe(q: &OutageQuery) -> String {
    format!(
        "{} snr={:.1}dB/{:.1}dB var={}/{} R={} k=({},{})",
        q.scheme.name(),
        q.first.snr_db(),
        q.second.snr_db(),
        q.first.fading_variance(),
        q.second.fading_variance(),
        q.rt.rate(),
        q.k1,
        q.k2
    )
}

/// Closed form vs shared-sample simulation on `queries`; returns the
/// agreement check and the IR ≤ RR dominance check over `pairs`.
pub fn compare_outages(
    queries: &[OutageQuery],
    pairs: &[(usize, usize)],
    plan: &SimPlan,
    tol: &Tolerances,
    contour: &ContourSpec,
) -> Result<(Check, Check)> {
    let closed: Vec<f64> = queries
        .par_iter()
        .map(|q| q.closed_form(contour))
        .collect::<Result<_>>()?;
    let (mc, violations) = paired_outage(queries, pairs, plan)?;

    let mut points = 0;
    let mut flagged = Vec::new();
    let mut worst = (0.0, String::new());
    for (i, ((q, &c), m)) in queries.iter().zip(&closed).zip(&mc).enumerate() {
        if c < tol.outage_floor {
            continue;
        }
        points += 1;
        let (z, line) = deviation(q, c, m);
        if z > tol.se_multiple {
            flagged.push(i);
        }
        if z > worst.0 {
            worst = (z, line);
        }
    }

    // A correct closed form still exceeds 3·SE at ~0.27% of points by chance;
    // flagged points are re-estimated on an independent stream and fail only
    // if they exceed again.
    let mut offenders = Vec::new();
    if tol.confirm && !flagged.is_empty() {
        let retry: Vec<OutageQuery> = flagged.iter().map(|&i| queries[i]).collect();
        let plan2 = SimPlan { seed: confirmation_seed(plan.seed), ..*plan };
        let (again, _) = paired_outage(&retry, &[], &plan2)?;
        for (&i, m) in flagged.iter().zip(&again) {
            let (z, line) = deviation(&queries[i], closed[i], m);
            if z > tol.se_multiple {
                offenders.push(format!("{line} [confirmed]"));
            }
        }
    } else {
        offenders = flagged.iter().map(|&i| deviation(&queries[i], closed[i], &mc[i]).1).collect();
    }
    let agreement = Check {
        name: "outage closed form vs simulation".into(),
        passed: offenders.is_empty(),
        points,
        worst: worst.0,
        detail: format!(
            "{} of {points} points beyond {}·SE (p ≥ {:e}) on first pass, {} after re-estimation; worst {}{}",
            flagged.len(),
            tol.se_multiple,
            tol.outage_floor,
            offenders.len(),
            worst.1,
            offenders.iter().map(|o| format!("\n    {o}")).collect::<String>()
        ),
    };

    let mut order_failures = 0;
    let mut order_worst = (f64::NEG_INFINITY, String::new());
    for &(rr, ir) in pairs {
        let excess = closed[ir] - closed[rr];
        if excess > tol.dominance_slack {
            order_failures += 1;
        }
        if excess > order_worst.0 {
            order_worst = (excess, describe(&queries[ir]));
        }
    }
    let total_violations: u64 = violations.iter().sum();
    let dominance = Check {
        name: "IR outage never above RR".into(),
        passed: order_failures == 0 && total_violations == 0,
        points: pairs.len(),
        worst: order_worst.0,
        detail: format!(
            "{order_failures} closed-form orderings violated (max Q_IR − Q_RR = {:.2e} at {}); \
             {total_violations} per-realisation violations over {} samples",
            order_worst.0, order_worst.1, plan.samples
        ),
    };
    Ok((agreement, dominance))
}

/// Full outage grid comparison.
pub fn check_outage_grid(plan: &SimPlan, tol: &Tolerances, contour: &ContourSpec) -> Result<(Check, Check)> {
    let (queries, pairs) = outage_grid()?;
    compare_outages(&queries, &pairs, plan, tol, contour)
}

/// Deterministic random Strategy II configurations with M, N ≤ 4, alternating
/// between repetition and incremental-redundancy combining.
pub fn random_ec_cases(seed: u64, count: usize) -> Result<Vec<(StrategyConfig, QosParams)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=4);
        let sd_db: f64 = rng.random_range(0.0..20.0);
        let rd_db: f64 = rng.random_range(0.0..20.0);
        let rate = GRID_RATES[rng.random_range(0..GRID_RATES.len())];
        let theta = [0.25, 0.5, 1.0, 2.0, 4.0][rng.random_range(0..5)];
        let cfg = StrategyConfig {
            strategy: Strategy::II,
            combining: if i % 2 == 0 { Combining::Rr } else { Combining::Ir },
            m,
            n,
            sd: LinkParams::from_db(sd_db, 1.0)?,
            sr: LinkParams::from_db(sd_db + 3.0, 1.0)?,
            rd: LinkParams::from_db(rd_db, 1.0)?,
            rt: RateThreshold::new(rate)?,
        };
        cases.push((cfg, QosParams::new(theta, rate)?));
    }
    Ok(cases)
}

/// Spectral-radius effective capacity vs the simulated service process.
pub fn compare_ec(
    cases: &[(StrategyConfig, QosParams)],
    plan: &SimPlan,
    estimator: EcEstimator,
    tol: &Tolerances,
    contour: &ContourSpec,
) -> Result<Check> {
    let mut failures = 0;
    let mut worst = (0.0, String::new());
    for (cfg, qos) in cases {
        let table = OutageTable::compute(cfg, contour)?;
        let graph = build_from_table(cfg, &table)?;
        let exact = effective_capacity(&alpha_matrix(&graph, qos)?, qos)?;
        let sim = simulate_service_process_with(&graph, qos, plan, estimator)?;
        let rel = if exact > 0.0 { (sim.ec - exact).abs() / exact } else { sim.ec.abs() };
        if rel > tol.ec_relative {
            failures += 1;
        }
        if rel >= worst.0 {
            worst = (
                rel,
                format!(
                    "({},{}) {} sd={:.1}dB rd={:.1}dB R={} θ={}: exact={exact:.6} sim={:.6}",
                    cfg.m,
                    cfg.n,
                    cfg.combining.name(),
                    cfg.sd.snr_db(),
                    cfg.rd.snr_db(),
                    qos.rate(),
                    qos.theta(),
                    sim.ec
                ),
            );
        }
    }
    Ok(Check {
        name: "effective capacity vs simulated service".into(),
        passed: failures == 0,
        points: cases.len(),
        worst: worst.0,
        detail: format!(
            "{failures} of {} cases beyond {:.1}% ; worst {:.3}% at {}",
            cases.len(),
            100.0 * tol.ec_relative,
            100.0 * worst.0,
            worst.1
        ),
    })
}

/// Checks for a single scenario: every outage-table entry against simulation
/// and the scenario's effective capacity against the simulated service.
pub fn check_scenario(
    cfg: &StrategyConfig,
    qos: &QosParams,
    plan: &SimPlan,
    tol: &Tolerances,
    contour: &ContourSpec,
) -> Result<Vec<Check>> {
    let mut queries = Vec::new();
    OutageTable::compute_with(cfg, |key| {
        queries.push(key.query());
        Ok(0.0)
    })?;
    let (agreement, _) = compare_outages(&queries, &[], plan, tol, contour)?;
    let ec = compare_ec(&[(*cfg, *qos)], plan, EcEstimator::Cloning, tol, contour)?;
    Ok(vec![agreement, ec])
}

/// Seed of the random effective-capacity configurations in the full suite.
pub const EC_CASE_SEED: u64 = 2024;
pub const EC_CASE_COUNT: usize = 20;

/// Outage grid, IR dominance and effective-capacity consistency.
pub fn full_suite(plan: &SimPlan, tol: &Tolerances, contour: &ContourSpec) -> Result<Vec<Check>> {
    let (agreement, dominance) = check_outage_grid(plan, tol, contour)?;
    let cases = random_ec_cases(EC_CASE_SEED, EC_CASE_COUNT)?;
    let ec = compare_ec(&cases, plan, EcEstimator::Cloning, tol, contour)?;
    Ok(vec![agreement, dominance, ec])
}
