//! Browser bindings for the demo page in `www/`.
//!
//! The exported functions are thin wrappers over plain Rust functions so the
//! same code paths are exercised by native tests.

use wasm_bindgen::prelude::*;

use harq_ec::effective_capacity::{ec_sweep, format_g15, QosParams, SweepAxis};
use harq_ec::mode_graph::{alpha_matrix_at, build_from_table, Combining, OutageTable, Strategy, StrategyConfig};
use harq_ec::outage::{LinkParams, OutageQuery, RateThreshold, Scheme};
use harq_ec::specfun::ContourSpec;

fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0) || !(stop >= start) || (stop - start) / step > 2_000.0 {
        return Err(format!("bad SNR range {start}..{stop} step {step}"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn combining(name: &str) -> Result<Combining, String> {
    match name {
        "rr" => Ok(Combining::Rr),
        "ir" => Ok(Combining::Ir),
        other => Err(format!("unknown combining {other:?}")),
    }
}

fn symmetric(strategy: Strategy, comb: Combining, m: u32, n: u32, snr_db: f64, rate: f64) -> Result<StrategyConfig, String> {
    let link = LinkParams::from_db(snr_db, 1.0).map_err(|e| e.to_string())?;
    Ok(StrategyConfig {
        strategy,
        combining: comb,
        m,
        n,
        sd: link,
        sr: link,
        rd: link,
        rt: RateThreshold::new(rate).map_err(|e| e.to_string())?,
    })
}

/// Closed-form outage over an SNR range (both hops at the same SNR, unit fading variance).
pub fn outage_values(scheme: &str, start: f64, stop: f64, step: f64, rate: f64, k1: u32, k2: u32) -> Result<Vec<f64>, String> {
    let scheme = Scheme::parse(scheme).ok_or_else(|| format!("unknown scheme {scheme:?}"))?;
    let rt = RateThreshold::new(rate).map_err(|e| e.to_string())?;
    let contour = ContourSpec::default();
    snr_grid(start, stop, step)?
        .into_iter()
        .map(|db| {
            let link = LinkParams::from_db(db, 1.0).map_err(|e| e.to_string())?;
            OutageQuery { scheme, first: link, second: link, k1, k2, rt }
                .closed_form(&contour)
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// Strategy I and Strategy II effective capacity over an SNR range, as
/// `[S1 values..., S2 values...]`.
#[allow(clippy::too_many_arguments)]
pub fn ec_values(
    comb: &str,
    m: u32,
    n: u32,
    rate: f64,
    theta: f64,
    start: f64,
    stop: f64,
    step: f64,
) -> Result<Vec<f64>, String> {
    let grid = snr_grid(start, stop, step)?;
    let qos = QosParams::new(theta, rate).map_err(|e| e.to_string())?;
    let contour = ContourSpec::default();
    let mut out = Vec::with_capacity(2 * grid.len());
    for cfg in [
        symmetric(Strategy::I, Combining::Rr, 1, 1, 0.0, rate)?,
        symmetric(Strategy::II, combining(comb)?, m, n, 0.0, rate)?,
    ] {
        let table = ec_sweep(&cfg, &qos, SweepAxis::SnrDb, &grid, &contour).map_err(|e| e.to_string())?;
        if let Some((x, why)) = table.failed.first() {
            return Err(format!("{x} dB: {why}"));
        }
        out.extend_from_slice(table.y_values());
    }
    Ok(out)
}

/// Companion matrix as CSV rows, numeric at `theta` or symbolic.
#[allow(clippy::too_many_arguments)]
pub fn matrix_text(
    strategy: u32,
    comb: &str,
    m: u32,
    n: u32,
    snr_db: f64,
    rate: f64,
    theta: f64,
    symbolic: bool,
) -> Result<String, String> {
    let strategy = match strategy {
        1 => Strategy::I,
        2 => Strategy::II,
        s => return Err(format!("strategy must be 1 or 2, got {s}")),
    };
    let cfg = symmetric(strategy, combining(comb)?, m, n, snr_db, rate)?;
    cfg.validate().map_err(|e| e.to_string())?;
    if m * (n + 1) > 64 {
        return Err("at most 64 modes in the demo".into());
    }
    let table = OutageTable::compute(&cfg, &ContourSpec::default()).map_err(|e| e.to_string())?;
    let graph = build_from_table(&cfg, &table).map_err(|e| e.to_string())?;
    if symbolic {
        return Ok(graph
            .symbolic_matrix()
            .iter()
            .map(|row| row.join("\t"))
            .collect::<Vec<_>>()
            .join("\n"));
    }
    let a = alpha_matrix_at(&graph, theta, rate);
    Ok(a.rows()
        .iter()
        .map(|row| row.iter().map(|v| format_g15(*v)).collect::<Vec<_>>().join("\t"))
        .collect::<Vec<_>>()
        .join("\n"))
}

#[wasm_bindgen]
pub fn outage_curve(scheme: &str, start: f64, stop: f64, step: f64, rate: f64, k1: u32, k2: u32) -> Result<Vec<f64>, JsError> {
    outage_values(scheme, start, stop, step, rate, k1, k2).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn ec_curves(comb: &str, m: u32, n: u32, rate: f64, theta: f64, start: f64, stop: f64, step: f64) -> Result<Vec<f64>, JsError> {
    ec_values(comb, m, n, rate, theta, start, stop, step).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn companion_matrix(
    strategy: u32,
    comb: &str,
    m: u32,
    n: u32,
    snr_db: f64,
    rate: f64,
    theta: f64,
    symbolic: bool,
) -> Result<String, JsError> {
    matrix_text(strategy, comb, m, n, snr_db, rate, theta, symbolic).map_err(|e| JsError::new(&e))
}
