//! Effective capacity from the spectral radius of the companion matrix, and
//! parameter sweeps producing [`CurveTable`]s.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::mode_graph::{alpha_matrix, build_from_table, CompanionMatrix, OutageKey, OutageTable, StrategyConfig};
use crate::outage::{LinkParams, RateThreshold};
use crate::specfun::ContourSpec;

const POWER_TOL: f64 = 1e-12;
/// Power iterations tried before falling back to bisection.
const PLAIN_ITER: usize = 2_000;
const BISECT_TOL: f64 = 1e-14;
const BISECT_MAX: usize = 400;
/// Largest λ₊ accepted as rounding noise above 1.
const RADIUS_SLACK: f64 = 1e-9;

/// QoS exponent θ and per-packet rate R.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosParams {
    theta: f64,
    rate: f64,
}

impl QosParams {
    pub fn new(theta: f64, rate: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(domain(format!("QoS exponent must be positive, got {theta}")));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(domain(format!("rate must be positive, got {rate}")));
        }
        Ok(QosParams { theta, rate })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Dominant eigenvalue modulus λ₊ of a nonnegative matrix.
///
/// Power iteration is stopped by the Collatz-Wielandt bracket
/// `min (Ax)ᵢ/xᵢ ≤ λ₊ ≤ max (Ax)ᵢ/xᵢ`, valid for any positive `x`. Chains
/// that are periodic or nearly decoupled (two modes that each almost always
/// stay put) make that iteration crawl; after a few thousand steps the
/// radius is instead bracketed by bisection, using that `λI − A` is a
/// nonsingular M-matrix — every pivot of unpivoted elimination positive —
/// exactly when `λ > λ₊`.
pub fn spectral_radius(a: &CompanionMatrix) -> Result<f64> {
    let n = a.size();
    if n == 1 {
        return Ok(a.get(0, 0));
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut lower = 0.0_f64;
    let mut upper = norm_bound(a);
    for _ in 0..PLAIN_ITER {
        a.apply(&x, &mut y);
        let norm: f64 = y.iter().sum();
        if norm == 0.0 {
            // Nilpotent: every eigenvalue is zero.
            return Ok(0.0);
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        let mut positive = true;
        for (yi, xi) in y.iter().zip(&x) {
            if *xi > 0.0 {
                let ratio = yi / xi;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            } else {
                positive = false;
            }
        }
        if positive {
            lower = lower.max(lo);
            upper = upper.min(hi);
            if hi - lo <= POWER_TOL * hi {
                return Ok(0.5 * (lo + hi));
            }
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    bisect_radius(a, lower, upper)
}

/// min(max row sum, max column sum) ≥ λ₊.
fn norm_bound(a: &CompanionMatrix) -> f64 {
    let rows = a.rows();
    let row_max = rows.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    let col_max = a.column_sums().into_iter().fold(0.0, f64::max);
    row_max.min(col_max)
}

/// True when `λI − A` is a nonsingular M-matrix, i.e. λ > λ₊.
fn above_radius(a: &CompanionMatrix, lambda: f64) -> bool {
    let n = a.size();
    let mut m: Vec<Vec<f64>> = a.rows();
    for (i, row) in m.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = -*v;
        }
        row[i] += lambda;
    }
    for k in 0..n {
        let pivot = m[k][k];
        if !(pivot > 0.0) {
            return false;
        }
        let (head, tail) = m.split_at_mut(k + 1);
        let pivot_row = &head[k];
        for row in tail.iter_mut() {
            let f = row[k] / pivot;
            if f != 0.0 {
                for j in k..n {
                    row[j] -= f * pivot_row[j];
                }
            }
        }
    }
    true
}

fn bisect_radius(a: &CompanionMatrix, lower: f64, upper: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lower.max(0.0), upper.max(lower));
    // Guard the bracket against rounding in the bounds themselves.
    while !above_radius(a, hi) {
        hi = hi * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        if !hi.is_finite() {
            return Err(Error::SpectralRadius { estimate: hi, iterations: PLAIN_ITER });
        }
    }
    if lo > 0.0 && above_radius(a, lo) {
        lo = 0.0;
    }
    for step in 0..BISECT_MAX {
        if hi - lo <= BISECT_TOL * hi || hi < f64::MIN_POSITIVE {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if above_radius(a, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if step + 1 == BISECT_MAX {
            break;
        }
    }
    Err(Error::SpectralRadius { estimate: 0.5 * (lo + hi), iterations: PLAIN_ITER + BISECT_MAX })
}

/// C_eff = -ln(λ₊)/θ, with λ₊ taken over the modes reachable from mode 1
/// (the chain starts there; unreachable modes never influence service).
pub fn effective_capacity(a: &CompanionMatrix, qos: &QosParams) -> Result<f64> {
    let lambda = spectral_radius(&a.reachable_from(0))?;
    if lambda > 1.0 + RADIUS_SLACK {
        return Err(Error::MalformedMatrix(lambda));
    }
    if !(lambda > 0.0) {
        return Err(domain("spectral radius is zero; the effective capacity is unbounded"));
    }
    let ec = -lambda.min(1.0).ln() / qos.theta();
    Ok(ec.clamp(0.0, qos.rate()))
}

/// Effective capacity of a configuration: outage table, graph, matrix, λ₊.
pub fn ec_for_config(cfg: &StrategyConfig, qos: &QosParams, contour: &ContourSpec) -> Result<f64> {
    let table = OutageTable::compute(cfg, contour)?;
    let graph = build_from_table(cfg, &table)?;
    effective_capacity(&alpha_matrix(&graph, qos)?, qos)
}

/// Parameter varied by [`ec_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Average SNR of every link, in dB (fading variances are kept).
    SnrDb,
    /// Packet rate R, used both for the outage thresholds and in e^{-θR}.
    Rate,
    /// QoS exponent θ.
    Theta,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Rate => "rate",
            SweepAxis::Theta => "theta",
        }
    }

    pub fn parse(name: &str) -> Option<SweepAxis> {
        [SweepAxis::SnrDb, SweepAxis::Rate, SweepAxis::Theta]
            .into_iter()
            .find(|a| a.name() == name)
    }

    /// Configuration and QoS with the swept field replaced by `x`.
    pub fn apply(&self, cfg: &StrategyConfig, qos: &QosParams, x: f64) -> Result<(StrategyConfig, QosParams)> {
        let mut cfg = *cfg;
        let mut qos = *qos;
        match self {
            SweepAxis::SnrDb => {
                cfg.sd = LinkParams::from_db(x, cfg.sd.fading_variance())?;
                cfg.sr = LinkParams::from_db(x, cfg.sr.fading_variance())?;
                cfg.rd = LinkParams::from_db(x, cfg.rd.fading_variance())?;
            }
            SweepAxis::Rate => {
                cfg.rt = RateThreshold::new(x)?;
                qos = QosParams::new(qos.theta(), x)?;
            }
            SweepAxis::Theta => qos = QosParams::new(x, qos.rate())?,
        }
        Ok((cfg, qos))
    }
}

/// Thread-safe memo of outage evaluations keyed by link, counts and rate.
#[derive(Default)]
pub struct OutageCache {
    map: Mutex<HashMap<(crate::mode_graph::OutageKind, [u64; 5], u32, u32), f64>>,
}

impl OutageCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(&self, key: &OutageKey, contour: &ContourSpec) -> Result<f64> {
        let k = key.cache_key();
        if let Some(v) = self.map.lock().expect("cache lock").get(&k) {
            return Ok(*v);
        }
        let v = key.evaluate(contour)?;
        self.map.lock().expect("cache lock").insert(k, v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Effective capacity along `grid`, evaluated in parallel and assembled in
/// grid order. Points that fail are listed in `CurveTable::failed`.
pub fn ec_sweep(
    cfg: &StrategyConfig,
    qos: &QosParams,
    axis: SweepAxis,
    grid: &[f64],
    contour: &ContourSpec,
) -> Result<CurveTable> {
    check_grid(grid)?;
    cfg.validate()?;
    let cache = OutageCache::new();
    let results: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&x| {
            let (cfg, qos) = axis.apply(cfg, qos, x)?;
            let table = OutageTable::compute_with(&cfg, |key| cache.get_or_compute(key, contour))?;
            let graph = build_from_table(&cfg, &table)?;
            effective_capacity(&alpha_matrix(&graph, &qos)?, &qos)
        })
        .collect();
    let mut table = CurveTable::new(axis.name(), &["ec"]);
    table.metadata = config_metadata(cfg, qos);
    table.metadata.push(("axis".into(), axis.name().into()));
    for (&x, r) in grid.iter().zip(results) {
        match r {
            Ok(v) => table.push(x, &[v])?,
            Err(e) => table.failed.push((x, e.to_string())),
        }
    }
    Ok(table)
}

/// Rejects empty or non-increasing grids.
pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::ConfigMismatch("sweep grid is empty".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::ConfigMismatch("sweep grid contains a non-finite value".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::ConfigMismatch("sweep grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Parameter snapshot for CSV headers.
pub fn config_metadata(cfg: &StrategyConfig, qos: &QosParams) -> Vec<(String, String)> {
    let mut m = vec![(
        "strategy".to_string(),
        match cfg.strategy {
            crate::mode_graph::Strategy::I => "I".to_string(),
            crate::mode_graph::Strategy::II => "II".to_string(),
        },
    )];
    if cfg.strategy == crate::mode_graph::Strategy::II {
        m.push(("combining".into(), cfg.combining.name().into()));
        m.push(("m".into(), cfg.m.to_string()));
        m.push(("n".into(), cfg.n.to_string()));
    }
    for (name, link) in [("sd", cfg.sd), ("sr", cfg.sr), ("rd", cfg.rd)] {
        m.push((format!("{name}_snr_db"), format_g15(link.snr_db())));
        m.push((format!("{name}_fading_variance"), format_g15(link.fading_variance())));
    }
    m.push(("rate".into(), format_g15(cfg.rt.rate())));
    m.push(("theta".into(), format_g15(qos.theta())));
    m
}

/// Formats like C's `%.15g`.
pub fn format_g15(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..15).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (14 - exp) as usize, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A sampled curve: strictly increasing x values and one or more named
/// value columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub x_name: String,
    pub x_values: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub metadata: Vec<(String, String)>,
    /// Grid points that could not be evaluated, with a diagnostic.
    pub failed: Vec<(f64, String)>,
}

impl CurveTable {
    pub fn new(x_name: &str, column_names: &[&str]) -> Self {
        CurveTable {
            x_name: x_name.into(),
            x_values: Vec::new(),
            columns: column_names.iter().map(|n| (n.to_string(), Vec::new())).collect(),
            metadata: Vec::new(),
            failed: Vec::new(),
        }
    }

    pub fn push(&mut self, x: f64, values: &[f64]) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(domain(format!(
                "row has {} values but the table has {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        if let Some(&last) = self.x_values.last() {
            if x <= last {
                return Err(domain(format!("x values must increase: {x} after {last}")));
            }
        }
        self.x_values.push(x);
        for ((_, col), v) in self.columns.iter_mut().zip(values) {
            col.push(*v);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_values.is_empty()
    }

    /// The first value column.
    pub fn y_values(&self) -> &[f64] {
        &self.columns[0].1
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# params:");
        for (k, v) in &self.metadata {
            let _ = write!(out, " {k}={v}");
        }
        out.push('\n');
        out.push_str(&self.x_name);
        for (name, _) in &self.columns {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, x) in self.x_values.iter().enumerate() {
            out.push_str(&format_g15(*x));
            for (_, col) in &self.columns {
                out.push(',');
                out.push_str(&format_g15(col[i]));
            }
            out.push('\n');
        }
        for (x, why) in &self.failed {
            let _ = writeln!(out, "# failed {}={}: {}", self.x_name, format_g15(*x), why.replace('\n', " "));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<CurveTable> {
        let bad = |line: usize, msg: &str| domain(format!("CSV line {line}: {msg}"));
        let mut metadata = Vec::new();
        let mut failed = Vec::new();
        let mut table: Option<CurveTable> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if let Some(rest) = line.strip_prefix("# params:") {
                for pair in rest.split_whitespace() {
                    let (k, v) = pair.split_once('=').ok_or_else(|| bad(lineno, "malformed parameter"))?;
                    metadata.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            if let Some(rest) = line.strip_prefix("# failed ") {
                let (lhs, why) = rest.split_once(": ").ok_or_else(|| bad(lineno, "malformed failure note"))?;
                let (_, x) = lhs.split_once('=').ok_or_else(|| bad(lineno, "malformed failure note"))?;
                let x = parse_number(x).ok_or_else(|| bad(lineno, "bad x in failure note"))?;
                failed.push((x, why.to_string()));
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            match table.as_mut() {
                None => {
                    if cells.len() < 2 {
                        return Err(bad(lineno, "header needs an x column and at least one value column"));
                    }
                    table = Some(CurveTable::new(cells[0], &cells[1..]));
                }
                Some(t) => {
                    let nums: Option<Vec<f64>> = cells.iter().map(|c| parse_number(c)).collect();
                    let nums = nums.ok_or_else(|| bad(lineno, "non-numeric cell"))?;
                    if nums.len() != t.columns.len() + 1 {
                        return Err(bad(lineno, "wrong number of cells"));
                    }
                    t.push(nums[0], &nums[1..]).map_err(|e| bad(lineno, &e.to_string()))?;
                }
            }
        }
        let mut table = table.ok_or_else(|| domain("CSV has no header row"))?;
        table.metadata = metadata;
        table.failed = failed;
        Ok(table)
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s.trim() {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_graph::{alpha_matrix_at, Combining, ModeGraph, Strategy};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[f64]]) -> CompanionMatrix {
        CompanionMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn eigen_oracle(a: &CompanionMatrix) -> f64 {
        let n = a.size();
        let m = DMatrix::from_fn(n, n, |r, c| a.get(r, c));
        m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn symmetric_cfg(strategy: Strategy, combining: Combining, m: u32, n: u32, db: f64, r: f64) -> StrategyConfig {
        let link = LinkParams::from_db(db, 1.0).unwrap();
        StrategyConfig {
            strategy,
            combining,
            m,
            n,
            sd: link,
            sr: link,
            rd: link,
            rt: RateThreshold::new(r).unwrap(),
        }
    }

    #[test]
    fn trivial_radii() {
        assert_eq!(spectral_radius(&matrix(&[&[0.5]])).unwrap(), 0.5);
        let swap = spectral_radius(&matrix(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((swap - 1.0).abs() < 1e-12);
        let cycle = matrix(&[&[0.0, 0.0, 2.0], &[2.0, 0.0, 0.0], &[0.0, 2.0, 0.0]]);
        assert!((spectral_radius(&cycle).unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(spectral_radius(&matrix(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap(), 0.0);
    }

    #[test]
    fn periodic_chains() {
        // Rotation with an unequal start: the plain iteration oscillates.
        let a = matrix(&[&[0.0, 0.0, 0.9], &[0.9, 0.0, 0.0], &[0.0, 0.9, 0.0]]);
        assert!((spectral_radius(&a).unwrap() - 0.9).abs() < 1e-10);
        let b = matrix(&[&[0.0, 0.3, 0.0], &[1.0, 0.0, 0.7], &[0.0, 0.7, 0.0]]);
        assert!((spectral_radius(&b).unwrap() - eigen_oracle(&b)).abs() < 1e-10);
    }

    #[test]
    fn nearly_decoupled_modes() {
        // Both modes almost always stay put; the eigenvalue gap is ~1e-7, far
        // beyond what power iteration resolves in its budget.
        let (p, q, r, t) = (1.0 - 3e-7, 2e-9, 5e-9, 1.0 - 4e-7);
        let a = matrix(&[&[p, q], &[r, t]]);
        let exact = 0.5 * (p + t) + (0.25 * (p - t).powi(2) + q * r).sqrt();
        assert!((spectral_radius(&a).unwrap() - exact).abs() <= 1e-13);
        // Reducible: the upper block is the larger one but the iterate
        // starts uniform.
        let b = matrix(&[&[0.999_999_9, 0.0, 0.0], &[0.5, 0.999_999_8, 0.0], &[0.0, 0.3, 0.2]]);
        assert!((spectral_radius(&b).unwrap() - 0.999_999_9).abs() <= 1e-13);
    }

    #[test]
    fn matches_dense_eigensolver_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..200 {
            let n = rng.random_range(2..12);
            let density = rng.random_range(0.2..1.0);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| if rng.random::<f64>() < density { rng.random::<f64>() } else { 0.0 })
                        .collect()
                })
                .collect();
            let a = CompanionMatrix::from_rows(&rows).unwrap();
            let dense = DMatrix::from_fn(n, n, |r, c| a.get(r, c));
            if dense.pow(n as u32).iter().all(|v| *v == 0.0) {
                // Nilpotent: the dense solver returns roundoff of order ε^{1/n}.
                assert_eq!(spectral_radius(&a).unwrap(), 0.0);
                continue;
            }
            let oracle = eigen_oracle(&a);
            match spectral_radius(&a) {
                Ok(v) => assert!((v - oracle).abs() <= 1e-10 * oracle + 1e-14, "trial {trial}: {v} vs {oracle}"),
                // Defective reducible cases converge too slowly; they must say so.
                Err(Error::SpectralRadius { estimate, .. }) => {
                    assert!((estimate - oracle).abs() <= 1e-3 * oracle, "trial {trial}")
                }
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn stochastic_mode_matrices_have_unit_radius() {
        for (m, n) in [(1, 1), (2, 3), (4, 4), (8, 8)] {
            for combining in [Combining::Rr, Combining::Ir] {
                let cfg = symmetric_cfg(Strategy::II, combining, m, n, 5.0, 2.0);
                let table = OutageTable::compute(&cfg, &ContourSpec::default()).unwrap();
                let g = build_from_table(&cfg, &table).unwrap();
                let a = alpha_matrix_at(&g, 0.0, 2.0);
                assert!((spectral_radius(&a).unwrap() - 1.0).abs() < 1e-10);
                let qos = QosParams::new(1.3, 2.0).unwrap();
                let a = alpha_matrix(&g, &qos).unwrap();
                assert!((spectral_radius(&a).unwrap() - eigen_oracle(&a)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn perfect_direct_link_delivers_every_slot() {
        let g = ModeGraph::strategy1(&OutageTable::Arq {
            sd: 0.0,
            sr: 0.4,
            rd: 0.2,
        })
        .unwrap();
        let qos = QosParams::new(0.7, 1.5).unwrap();
        let ec = effective_capacity(&alpha_matrix(&g, &qos).unwrap(), &qos).unwrap();
        assert!((ec - 1.5).abs() < 1e-12);
    }

    #[test]
    fn disabled_relay_reduces_to_scalar_block() {
        let (q, theta, r) = (0.35, 2.0, 1.0);
        let g = ModeGraph::strategy1(&OutageTable::Arq { sd: q, sr: 1.0, rd: 0.95 }).unwrap();
        let qos = QosParams::new(theta, r).unwrap();
        let ec = effective_capacity(&alpha_matrix(&g, &qos).unwrap(), &qos).unwrap();
        let expected = -(q + (1.0 - q) * (-theta * r).exp()).ln() / theta;
        assert!((ec - expected).abs() < 1e-12);
    }

    #[test]
    fn super_stochastic_matrix_is_rejected() {
        let qos = QosParams::new(1.0, 1.0).unwrap();
        let a = matrix(&[&[0.6, 0.5], &[0.5, 0.6]]);
        assert!(matches!(effective_capacity(&a, &qos), Err(Error::MalformedMatrix(_))));
        assert!(QosParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn sweep_is_monotone_and_ordered() {
        let cfg = symmetric_cfg(Strategy::II, Combining::Rr, 1, 1, 10.0, 1.0);
        let qos = QosParams::new(1.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=8).map(|i| 5.0 * i as f64).collect();
        let t = ec_sweep(&cfg, &qos, SweepAxis::SnrDb, &grid, &ContourSpec::default()).unwrap();
        assert_eq!(t.x_values, grid);
        assert!(t.y_values().windows(2).all(|w| w[1] >= w[0]));
        assert!(*t.y_values().last().unwrap() >= 0.99);

        let thetas = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
        let t = ec_sweep(&cfg, &qos, SweepAxis::Theta, &thetas, &ContourSpec::default()).unwrap();
        assert!(t.y_values().windows(2).all(|w| w[1] <= w[0]));

        let single = ec_sweep(&cfg, &qos, SweepAxis::Rate, &[2.0], &ContourSpec::default()).unwrap();
        assert_eq!(single.len(), 1);
        assert!(ec_sweep(&cfg, &qos, SweepAxis::Rate, &[], &ContourSpec::default()).is_err());
        assert!(ec_sweep(&cfg, &qos, SweepAxis::Rate, &[2.0, 1.0], &ContourSpec::default()).is_err());
    }

    #[test]
    fn sweep_records_failed_points() {
        let cfg = symmetric_cfg(Strategy::II, Combining::Ir, 2, 2, 10.0, 1.0);
        let qos = QosParams::new(1.0, 1.0).unwrap();
        let starved = ContourSpec {
            max_nodes: 16,
            ..ContourSpec::default()
        };
        let t = ec_sweep(&cfg, &qos, SweepAxis::SnrDb, &[0.0, 10.0], &starved).unwrap();
        assert_eq!(t.len(), 0);
        assert_eq!(t.failed.len(), 2);
        assert!(t.to_csv().contains("# failed snr_db=0: accuracy not reached"));
    }

    #[test]
    fn g15_formatting() {
        assert_eq!(format_g15(0.0), "0");
        assert_eq!(format_g15(1.0), "1");
        assert_eq!(format_g15(-2.5), "-2.5");
        assert_eq!(format_g15(0.1), "0.1");
        assert_eq!(format_g15(1.0 / 3.0), "0.333333333333333");
        assert_eq!(format_g15(1e-5), "1e-05");
        assert_eq!(format_g15(1.5e20), "1.5e+20");
        assert_eq!(format_g15(123456789012345.0), "123456789012345");
        assert_eq!(format_g15(1234567890123456.0), "1.23456789012346e+15");
        assert_eq!(format_g15(0.0001), "0.0001");
    }

    #[test]
    fn csv_round_trip() {
        let mut t = CurveTable::new("snr_db", &["closed_form", "mc_estimate"]);
        t.metadata = vec![("scheme".into(), "ir_source".into()), ("k1".into(), "2".into())];
        t.push(0.0, &[0.123456789012345678, 0.12]).unwrap();
        t.push(5.0, &[1.0 / 3.0, 3.3e-7]).unwrap();
        t.failed.push((7.5, "accuracy not reached".into()));
        let csv = t.to_csv();
        assert!(csv.starts_with("# params: scheme=ir_source k1=2\nsnr_db,closed_form,mc_estimate\n"));
        let back = CurveTable::from_csv(&csv).unwrap();
        assert_eq!(back.to_csv(), csv);
        for (a, b) in back.columns[0].1.iter().zip(&t.columns[0].1) {
            assert!((a - b).abs() <= 5e-15 * b.abs());
        }
        assert!(CurveTable::from_csv("x,y\n1,2\n1,3\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn ec_lies_between_zero_and_rate(
                strategy2 in any::<bool>(), ir in any::<bool>(),
                m in 1u32..5, n in 1u32..5,
                sd in 0.0..30.0_f64, sr in 0.0..30.0_f64, rd in 0.0..30.0_f64,
                r in 0.25..4.0_f64, theta in 0.05..8.0_f64,
            ) {
                let cfg = StrategyConfig {
                    strategy: if strategy2 { super::Strategy::II } else { super::Strategy::I },
                    combining: if ir { Combining::Ir } else { Combining::Rr },
                    m, n,
                    sd: LinkParams::from_db(sd, 1.0).unwrap(),
                    sr: LinkParams::from_db(sr, 1.0).unwrap(),
                    rd: LinkParams::from_db(rd, 1.0).unwrap(),
                    rt: RateThreshold::new(r).unwrap(),
                };
                let qos = QosParams::new(theta, r).unwrap();
                let ec = ec_for_config(&cfg, &qos, &ContourSpec::default()).unwrap();
                prop_assert!((0.0..=r).contains(&ec));
                let stricter = QosParams::new(theta * 2.0, r).unwrap();
                let ec2 = ec_for_config(&cfg, &stricter, &ContourSpec::default()).unwrap();
                prop_assert!(ec2 <= ec + 1e-12);
            }
        }
    }
}
