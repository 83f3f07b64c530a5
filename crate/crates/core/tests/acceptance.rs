//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! (written straight to stderr so it shows even when output is captured);
//! the test fails if any criterion fails.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use harq_ec::distributions::{
    sample_exponential, shifted_exp_product_cdf, two_erlang_sum_cdf, ErlangSpec, ShiftedExpGroup,
    ShiftedExpProductSpec,
};
use harq_ec::effective_capacity::{ec_sweep, effective_capacity, spectral_radius, QosParams, SweepAxis};
use harq_ec::mode_graph::{
    alpha_matrix, alpha_matrix_at, build_from_table, Combining, ModeGraph, OutageTable, Strategy, StrategyConfig,
};
use harq_ec::monte_carlo::{EcEstimator, SimPlan};
use harq_ec::outage::{
    arq_outage, ir_source_outage, rr_combined_outage, rr_source_outage, LinkParams, RateThreshold,
};
use harq_ec::specfun::ContourSpec;
use harq_ec::validation::{check_outage_grid, compare_ec, random_ec_cases, Tolerances, EC_CASE_COUNT, EC_CASE_SEED};

struct Verdict {
    passed: bool,
    summary: String,
}

fn report(id: u32, title: &str, started: Instant, v: &Verdict) {
    let _ = writeln!(
        std::io::stderr(),
        "[{}] criterion {id}: {title} — {} ({:.1}s)",
        if v.passed { "PASS" } else { "FAIL" },
        v.summary,
        started.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------- criterion 1

/// Matrices transcribed from the paper, rows = destination mode.
const EXAMPLE_1: &[&[&str]] = &[
    &[r"Q_{sd,1}Q_{sr,1} + P_{sd,1}e^{-\theta R}", r"Q_{srd,1;1} + P_{srd,1;1}e^{-\theta R}"],
    &[r"Q_{sd,1}P_{sr,1}", "0"],
];

const A_1_2: &[&[&str]] = &[
    &[
        r"Q_{sd,1}Q_{sr,1} + P_{sd,1}e^{-\theta R}",
        r"P_{srd,1;1}e^{-\theta R}",
        r"Q_{srd,1;2} + P_{srd,1;2}e^{-\theta R}",
    ],
    &[r"Q_{sd,1}P_{sr,1}", "0", "0"],
    &["0", r"Q_{srd,1;1}", "0"],
];

const A_2_1: &[&[&str]] = &[
    &[
        r"P_{sd,1}e^{-\theta R}",
        r"Q_{srd,1;1}+P_{srd,1;1}e^{-\theta R}",
        r"Q_{sd,2}Q_{sr,2}+P_{sd,2}e^{-\theta R}",
        r"Q_{srd,2;1}+P_{srd,2;1}e^{-\theta R}",
    ],
    &[r"Q_{sd,1}P_{sr,1}", "0", "0", "0"],
    &[r"Q_{sd,1}Q_{sr,1}", "0", "0", "0"],
    &["0", "0", r"Q_{sd,2}P_{sr,2}", "0"],
];

const A_2_2: &[&[&str]] = &[
    &[
        r"P_{sd,1}e^{-\theta R}",
        r"P_{srd,1;1}e^{-\theta R}",
        r"Q_{srd,1;2}+P_{srd,1;2}e^{-\theta R}",
        r"Q_{sd,2}Q_{sr,2}+P_{sd,2}e^{-\theta R}",
        r"P_{srd,2;1}e^{-\theta R}",
        r"Q_{srd,2;2}+P_{srd,2;2}e^{-\theta R}",
    ],
    &[r"Q_{sd,1}P_{sr,1}", "0", "0", "0", "0", "0"],
    &["0", r"Q_{srd,1;1}", "0", "0", "0", "0"],
    &[r"Q_{sd,1}Q_{sr,1}", "0", "0", "0", "0", "0"],
    &["0", "0", "0", r"Q_{sd,2}P_{sr,2}", "0", "0"],
    &["0", "0", "0", "0", r"Q_{srd,2;1}", "0"],
];

const CC_MAT1: &[&[&str]] = &[
    &[r"Q_{sd}Q_{sr}+P_{sd}e^{-\theta R}", r"P_{rd}e^{-\theta R}"],
    &[r"P_{sr}Q_{sd}", r"Q_{rd}"],
];

const PRIMES: [f64; 24] = [
    2., 3., 5., 7., 11., 13., 17., 19., 23., 29., 31., 37., 41., 43., 47., 53., 59., 61., 67., 71., 73., 79.,
    83., 89.,
];

/// Distinct sentinel outage probability per symbol key ("sd,1", "srd,2;1", "rd", ...).
fn sentinel(key: &str) -> f64 {
    let slot = match key {
        "sd" => 0,
        "sr" => 1,
        "rd" => 2,
        _ => {
            let (link, idx) = key.split_once(',').expect("indexed symbol");
            let nums: Vec<usize> = idx.split(';').map(|d| d.parse().unwrap()).collect();
            match (link, nums.as_slice()) {
                ("sd", [l]) => 2 + l,
                ("sr", [l]) => 6 + l,
                ("srd", [l, i]) => 10 + 3 * l + i,
                _ => panic!("unexpected symbol {key}"),
            }
        }
    };
    1.0 / PRIMES[slot]
}

fn sentinel_table(strategy: Strategy, m: usize, n: usize) -> OutageTable {
    match strategy {
        Strategy::I => OutageTable::Arq {
            sd: sentinel("sd"),
            sr: sentinel("sr"),
            rd: sentinel("rd"),
        },
        Strategy::II => OutageTable::Harq {
            sd: (1..=m).map(|l| sentinel(&format!("sd,{l}"))).collect(),
            sr: (1..=m).map(|l| sentinel(&format!("sr,{l}"))).collect(),
            srd: (1..=m)
                .map(|l| (1..=n).map(|i| sentinel(&format!("srd,{l};{i}"))).collect())
                .collect(),
        },
    }
}

/// Evaluates a LaTeX entry such as `Q_{sd,1}Q_{sr,1} + P_{sd,1}e^{-\theta R}`.
fn eval_entry(entry: &str, discount: f64) -> f64 {
    if entry.trim() == "0" {
        return 0.0;
    }
    entry
        .split('+')
        .map(|term| {
            let mut rest = term.trim();
            let mut value = 1.0;
            while !rest.is_empty() {
                if let Some(r) = rest.strip_prefix(r"e^{-\theta R}") {
                    value *= discount;
                    rest = r;
                    continue;
                }
                let kind = &rest[..1];
                let open = rest.find('{').unwrap();
                let close = rest.find('}').unwrap();
                let q = sentinel(&rest[open + 1..close]);
                value *= match kind {
                    "Q" => q,
                    "P" => 1.0 - q,
                    _ => panic!("unexpected token in {term}"),
                };
                rest = rest[close + 1..].trim_start();
            }
            value
        })
        .sum()
}

/// Canonical text form: spaces dropped, LaTeX θ, factor order within each
/// term sorted (the paper writes `P_{sr}Q_{sd}` in one place).
fn canonical(entry: &str) -> String {
    let cleaned = entry.replace(r"\theta R", "θR").replace(' ', "");
    cleaned
        .split('+')
        .map(|term| {
            let mut factors: Vec<String> = Vec::new();
            let mut rest = term;
            while !rest.is_empty() {
                let end = rest.find('}').map_or(rest.len(), |i| i + 1);
                factors.push(rest[..end].to_string());
                rest = &rest[end..];
            }
            factors.sort();
            factors.concat()
        })
        .collect::<Vec<_>>()
        .join("+")
}

fn criterion_1() -> Verdict {
    let cases: [(&str, Strategy, usize, usize, &[&[&str]]); 5] = [
        ("Example 1 (1,1)", Strategy::II, 1, 1, EXAMPLE_1),
        ("A_1_2", Strategy::II, 1, 2, A_1_2),
        ("A_2_1", Strategy::II, 2, 1, A_2_1),
        ("A_2_2", Strategy::II, 2, 2, A_2_2),
        ("CC_Mat1", Strategy::I, 1, 1, CC_MAT1),
    ];
    let (theta, rate) = (0.7, 1.3);
    let discount = (-theta * rate as f64).exp();
    let mut problems = Vec::new();
    for (name, strategy, m, n, paper) in cases {
        let table = sentinel_table(strategy, m, n);
        let graph = match strategy {
            Strategy::I => ModeGraph::strategy1(&table),
            Strategy::II => ModeGraph::strategy2(m as u32, n as u32, &table),
        }
        .unwrap();
        let symbolic = graph.symbolic_matrix();
        let numeric = alpha_matrix_at(&graph, theta, rate);
        if symbolic.len() != paper.len() {
            problems.push(format!("{name}: size {} vs {}", symbolic.len(), paper.len()));
            continue;
        }
        for (r, row) in paper.iter().enumerate() {
            for (c, entry) in row.iter().enumerate() {
                if canonical(&symbolic[r][c]) != canonical(entry) {
                    problems.push(format!("{name}[{r}][{c}]: {} vs {entry}", symbolic[r][c]));
                }
                let want = eval_entry(entry, discount);
                let got = numeric.get(r, c);
                if (got - want).abs() > 1e-15 {
                    problems.push(format!("{name}[{r}][{c}]: {got} vs {want}"));
                }
            }
        }
    }
    Verdict {
        passed: problems.is_empty(),
        summary: if problems.is_empty() {
            "Example 1, A_1_2, A_2_1, A_2_2 and CC_Mat1 match symbolically and under sentinel injection".into()
        } else {
            problems.join("; ")
        },
    }
}

// ---------------------------------------------------------------- criterion 3

/// P{Erlang(k, 1) ≤ x} as a Poisson tail.
fn erlang_oracle(k: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..k {
        term *= x / j as f64;
        sum += term;
    }
    1.0 - (-x).exp() * sum
}

fn criterion_3() -> Verdict {
    let contour = ContourSpec::default();
    let (mut rr, mut ir, mut erl) = (0.0_f64, 0.0_f64, 0.0_f64);
    for db in [-5.0, 0.0, 5.0, 10.0, 20.0, 30.0] {
        for var in [0.5, 1.0, 2.0] {
            let link = LinkParams::from_db(db, var).unwrap();
            for r in [0.5, 1.0, 2.0, 4.0] {
                let rt = RateThreshold::new(r).unwrap();
                let arq = arq_outage(link, rt);
                rr = rr.max((rr_source_outage(link, 1, rt).unwrap() - arq).abs());
                ir = ir.max((ir_source_outage(link, 1, rt, &contour).unwrap() - arq).abs());
                let x = rt.theta() / (link.snr() * var);
                for l in 1..=4 {
                    for k2 in 1..=4 {
                        let got = rr_combined_outage(link, link, l, k2, rt).unwrap();
                        erl = erl.max((got - erlang_oracle(l + k2, x)).abs());
                    }
                }
            }
        }
    }
    Verdict {
        passed: rr <= 1e-12 && ir <= 1e-8 && erl <= 1e-10,
        summary: format!("max |RR₁−ARQ| = {rr:.1e} (≤1e-12), |IR₁−ARQ| = {ir:.1e} (≤1e-8), |RR_comb−Erlang| = {erl:.1e} (≤1e-10)"),
    }
}

// ---------------------------------------------------------------- criterion 5

fn erlang_pdf(k: u32, mu: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return if k == 1 && t == 0.0 { mu } else { 0.0 };
    }
    let ln_fact: f64 = (1..k).map(|j| (j as f64).ln()).sum();
    (k as f64 * mu.ln() + (k as f64 - 1.0) * t.ln() - mu * t - ln_fact).exp()
}

/// ∫₀ᵗ f_a(s) F_b(t − s) ds by composite Simpson.
fn convolution_oracle(k1: u32, mu1: f64, k2: u32, mu2: f64, t: f64) -> f64 {
    let n = 40_000;
    let h = t / n as f64;
    (0..=n)
        .map(|i| {
            let s = i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * erlang_pdf(k1, mu1, s) * erlang_oracle(k2, mu2 * (t - s))
        })
        .sum::<f64>()
        * h
        / 3.0
}

fn criterion_5() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;

    let sets = [
        (1, 1.0, 1, 2.0, 1.5),
        (2, 0.5, 3, 1.7, 4.0),
        (4, 3.0, 2, 0.2, 10.0),
        (3, 1.0, 3, 1.000_000_1, 2.5),
        (1, 5.0, 4, 5.5, 0.8),
    ];
    let mut conv = 0.0_f64;
    for (k1, m1, k2, m2, t) in sets {
        let got = two_erlang_sum_cdf(ErlangSpec::new(k1, m1).unwrap(), ErlangSpec::new(k2, m2).unwrap(), t).unwrap();
        conv = conv.max((got - convolution_oracle(k1, m1, k2, m2, t)).abs());
    }
    ok &= conv <= 1e-6;
    notes.push(format!("two-Erlang vs convolution {conv:.1e}"));

    let group = |count, rate, shift| ShiftedExpGroup { count, rate, shift };
    let products = [
        (vec![group(1, 1.0, 1.0)], 3.0),
        (vec![group(3, 0.5, 1.0)], 20.0),
        (vec![group(2, 10.0, 1.0)], 1.5),
        (vec![group(2, 1.0, 1.0), group(3, 0.3, 1.0)], 60.0),
        (vec![group(1, 2.0, 1.0), group(2, 0.7, 1.0)], 8.0),
    ];
    let contour = ContourSpec::default();
    let samples = 10_000_000u64;
    let mut worst_z = 0.0_f64;
    let mut worst_abscissa = 0.0_f64;
    for (set, (groups, z)) in products.iter().enumerate() {
        let spec = ShiftedExpProductSpec::new(groups.clone()).unwrap();
        let closed = shifted_exp_product_cdf(&spec, *z, &contour).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0000 + set as u64);
        let mut hits = 0u64;
        for _ in 0..samples {
            let mut prod = 1.0;
            for g in groups {
                for _ in 0..g.count {
                    prod *= g.shift + sample_exponential(g.rate, &mut rng);
                }
            }
            hits += (prod <= *z) as u64;
        }
        let p = hits as f64 / samples as f64;
        let se = (closed * (1.0 - closed) / samples as f64).sqrt();
        worst_z = worst_z.max((closed - p).abs() / se);
        for c in [-0.9, -0.7, -0.3, -0.1] {
            let other = shifted_exp_product_cdf(&spec, *z, &contour.with_abscissa(c)).unwrap();
            worst_abscissa = worst_abscissa.max((other - closed).abs());
        }
    }
    ok &= worst_z <= 3.0 && worst_abscissa <= 1e-7;
    notes.push(format!("shifted-exp product vs 1e7-sample MC worst {worst_z:.2}·SE"));
    notes.push(format!("abscissa spread {worst_abscissa:.1e}"));
    Verdict {
        passed: ok,
        summary: notes.join(", "),
    }
}

// ---------------------------------------------------------------- criterion 7

fn config(strategy: Strategy, combining: Combining, m: u32, n: u32, db: f64, rate: f64) -> StrategyConfig {
    let link = LinkParams::from_db(db, 1.0).unwrap();
    StrategyConfig {
        strategy,
        combining,
        m,
        n,
        sd: link,
        sr: link,
        rd: link,
        rt: RateThreshold::new(rate).unwrap(),
    }
}

fn criterion_7() -> Verdict {
    let contour = ContourSpec::default();
    let thetas = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    let shapes = [
        (Strategy::I, Combining::Rr, 1, 1),
        (Strategy::II, Combining::Rr, 1, 1),
        (Strategy::II, Combining::Ir, 1, 1),
        (Strategy::II, Combining::Rr, 2, 3),
        (Strategy::II, Combining::Ir, 3, 2),
        (Strategy::II, Combining::Ir, 4, 4),
    ];
    let mut problems = Vec::new();
    let mut checked = 0;
    for &(strategy, combining, m, n) in &shapes {
        for db in [-10.0, 0.0, 10.0, 20.0, 40.0] {
            for rate in [0.5, 1.0, 4.0] {
                let cfg = config(strategy, combining, m, n, db, rate);
                let table = OutageTable::compute(&cfg, &contour).unwrap();
                let graph = build_from_table(&cfg, &table).unwrap();
                let sums = alpha_matrix_at(&graph, 0.0, rate).column_sums();
                if sums.iter().any(|s| (s - 1.0).abs() > 1e-10) {
                    problems.push(format!("{cfg:?}: θ=0 column sums {sums:?}"));
                }
                let mut previous = f64::INFINITY;
                for &theta in &thetas {
                    let qos = QosParams::new(theta, rate).unwrap();
                    let a = alpha_matrix(&graph, &qos).unwrap();
                    // The raw radius, before any clamping of the capacity.
                    let lambda = spectral_radius(&a.reachable_from(0)).unwrap();
                    let floor = (-theta * rate).exp();
                    if lambda > 1.0 + 1e-12 || lambda < floor * (1.0 - 1e-12) {
                        problems.push(format!("λ₊ = {lambda} outside [e^(-θR), 1] at {db} dB R={rate} θ={theta}"));
                    }
                    let ec = effective_capacity(&a, &qos).unwrap();
                    if ec > previous + 1e-10 {
                        problems.push(format!("EC increased in θ at {db} dB R={rate} θ={theta}"));
                    }
                    previous = ec;
                    checked += 1;
                }
            }
        }
    }
    let mut high = Vec::new();
    for &(strategy, combining, m, n) in &shapes[..3] {
        let cfg = config(strategy, combining, m, n, 40.0, 1.0);
        let qos = QosParams::new(1.0, 1.0).unwrap();
        let graph = build_from_table(&cfg, &OutageTable::compute(&cfg, &contour).unwrap()).unwrap();
        let ec = effective_capacity(&alpha_matrix(&graph, &qos).unwrap(), &qos).unwrap();
        if ec < 0.99 {
            problems.push(format!("EC at 40 dB = {ec} < 0.99R"));
        }
        high.push(ec);
    }
    Verdict {
        passed: problems.is_empty(),
        summary: if problems.is_empty() {
            format!(
                "{checked} points: λ₊ ∈ [e^(-θR), 1], EC nonincreasing in θ, θ=0 column-stochastic; EC(40 dB) = {}",
                high.iter().map(|e| format!("{e:.5}")).collect::<Vec<_>>().join("/")
            )
        } else {
            problems.into_iter().take(5).collect::<Vec<_>>().join("; ")
        },
    }
}

// ---------------------------------------------------------------- criterion 8

/// SNR (dB) where `curve` first reaches `level`, by linear interpolation.
fn crossing(grid: &[f64], curve: &[f64], level: f64) -> Option<f64> {
    (1..curve.len())
        .find(|&i| curve[i] >= level)
        .map(|i| grid[i - 1] + (level - curve[i - 1]) / (curve[i] - curve[i - 1]) * (grid[i] - grid[i - 1]))
}

fn criterion_8() -> Verdict {
    let contour = ContourSpec::default();
    let rate = 4.0;
    let grid: Vec<f64> = (0..=160).map(|i| i as f64 * 0.25).collect();
    let mut problems = Vec::new();
    let mut gaps: HashMap<(String, u32), Vec<f64>> = HashMap::new();
    let levels = [0.1 * rate, 0.25 * rate];
    for theta in [1.0, 4.0] {
        let qos = QosParams::new(theta, rate).unwrap();
        let curve = |strategy, combining| {
            let cfg = config(strategy, combining, 1, 1, 0.0, rate);
            let t = ec_sweep(&cfg, &qos, SweepAxis::SnrDb, &grid, &contour).unwrap();
            assert!(t.failed.is_empty(), "{:?}", t.failed);
            t.y_values().to_vec()
        };
        let s1 = curve(Strategy::I, Combining::Rr);
        for combining in [Combining::Rr, Combining::Ir] {
            let s2 = curve(Strategy::II, combining);
            // Radii are resolved to 1e-12 relative, so allow that much.
            if let Some(i) = (0..grid.len()).find(|&i| s2[i] < s1[i] - 1e-10) {
                problems.push(format!("θ={theta} {}: S2 < S1 at {} dB", combining.name(), grid[i]));
            }
            let entry = gaps.entry((combining.name().to_string(), theta as u32)).or_default();
            for &y in &levels {
                match (crossing(&grid, &s1, y), crossing(&grid, &s2, y)) {
                    (Some(a), Some(b)) => entry.push(a - b),
                    _ => problems.push(format!("θ={theta}: EC level {y} not reached on 0–40 dB")),
                }
            }
        }
    }
    let mut notes = Vec::new();
    for combining in ["rr", "ir"] {
        let g1 = &gaps[&(combining.to_string(), 1)];
        let g4 = &gaps[&(combining.to_string(), 4)];
        for (j, y) in levels.iter().enumerate() {
            if g4.get(j) <= g1.get(j) {
                problems.push(format!("{combining}: gap at EC={y} did not grow ({:?} → {:?})", g1.get(j), g4.get(j)));
            }
        }
        notes.push(format!(
            "{combining}: gap {} dB (θ=1) → {} dB (θ=4)",
            g1.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>().join("/"),
            g4.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>().join("/")
        ));
    }
    Verdict {
        passed: problems.is_empty(),
        summary: if problems.is_empty() {
            format!("S2 ≥ S1 on 0–40 dB at R=4; horizontal gap at EC = 0.1R/0.25R: {}", notes.join("; "))
        } else {
            problems.join("; ")
        },
    }
}

// ---------------------------------------------------------------- driver

#[test]
fn acceptance() {
    let plan = SimPlan::default();
    let tol = Tolerances::default();
    let contour = ContourSpec::default();
    let mut all = true;

    let t = Instant::now();
    let v = criterion_1();
    let fast = t.elapsed().as_secs_f64() < 1.0;
    let v = Verdict {
        passed: v.passed && fast,
        summary: if fast { v.summary } else { format!("{} (slower than 1 s)", v.summary) },
    };
    report(1, "matrix fidelity", t, &v);
    all &= v.passed;

    let t = Instant::now();
    let (agreement, dominance) = check_outage_grid(&plan, &tol, &contour).unwrap();
    let v2 = Verdict {
        passed: agreement.passed,
        summary: agreement.detail.clone(),
    };
    report(2, "outage closed form vs Monte Carlo", t, &v2);
    all &= v2.passed;

    let t = Instant::now();
    let v = criterion_3();
    report(3, "reduction identities", t, &v);
    all &= v.passed;

    let t = Instant::now();
    let v = Verdict {
        passed: dominance.passed,
        summary: dominance.detail.clone(),
    };
    report(4, "IR dominance", t, &v);
    all &= v.passed;

    let t = Instant::now();
    let v = criterion_5();
    report(5, "distribution oracles", t, &v);
    all &= v.passed;

    let t = Instant::now();
    let cases = random_ec_cases(EC_CASE_SEED, EC_CASE_COUNT).unwrap();
    let ec = compare_ec(&cases, &plan, EcEstimator::Cloning, &tol, &contour).unwrap();
    let v = Verdict {
        passed: ec.passed && cases.iter().any(|(c, _)| c.combining == Combining::Ir)
            && cases.iter().any(|(c, _)| c.combining == Combining::Rr),
        summary: ec.detail.clone(),
    };
    report(6, "effective capacity vs service-process simulation", t, &v);
    all &= v.passed;

    let t = Instant::now();
    let v = criterion_7();
    report(7, "structural EC properties", t, &v);
    all &= v.passed;

    let t = Instant::now();
    let v = criterion_8();
    report(8, "Strategy II over Strategy I ordering and gap growth", t, &v);
    all &= v.passed;

    assert!(all, "at least one acceptance criterion failed (see the lines above)");
}
