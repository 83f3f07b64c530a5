//! Communication-mode Markov chains of the two relaying strategies and their
//! θ-weighted companion matrices.
//!
//! Modes are numbered from 1 in labels, CSV output and symbolic rendering, and
//! from 0 in the Rust API (`Transition::from`, `CompanionMatrix::get`).

use std::fmt;

use crate::effective_capacity::QosParams;
use crate::error::{domain, Error, Result};
use crate::outage::{
    arq_outage, ir_combined_outage, ir_source_outage, rr_combined_outage, rr_source_outage, LinkParams,
    OutageQuery, RateThreshold, Scheme,
};
use crate::specfun::ContourSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Lossless ARQ at source and relay; two modes.
    I,
    /// Truncated HARQ: at most M source and N relay attempts per packet.
    II,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combining {
    Rr,
    Ir,
}

impl Combining {
    pub fn name(&self) -> &'static str {
        match self {
            Combining::Rr => "rr",
            Combining::Ir => "ir",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Ignored by Strategy I.
    pub combining: Combining,
    /// Source attempt budget; ignored by Strategy I.
    pub m: u32,
    /// Relay attempt budget; ignored by Strategy I.
    pub n: u32,
    pub sd: LinkParams,
    pub sr: LinkParams,
    pub rd: LinkParams,
    pub rt: RateThreshold,
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategy == Strategy::II && (self.m == 0 || self.n == 0) {
            return Err(Error::ConfigMismatch(format!(
                "Strategy II needs M >= 1 and N >= 1, got M={} N={}",
                self.m, self.n
            )));
        }
        Ok(())
    }

    pub fn mode_count(&self) -> usize {
        match self.strategy {
            Strategy::I => 2,
            Strategy::II => (self.m * (self.n + 1)) as usize,
        }
    }
}

/// Whether a decoding attempt failed (Q) or succeeded (P).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Fail,
    Success,
}

/// One outage-table quantity appearing in a transition probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    /// Destination decoding of source attempts; `attempts` is `None` for ARQ.
    Sd { attempts: Option<u32>, outcome: Outcome },
    /// Relay decoding of source attempts.
    Sr { attempts: Option<u32>, outcome: Outcome },
    /// Destination decoding of one relay transmission (ARQ).
    Rd { outcome: Outcome },
    /// Destination decoding after `source` source and `relay` relay attempts.
    Srd { source: u32, relay: u32, outcome: Outcome },
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = |o: &Outcome| if *o == Outcome::Fail { 'Q' } else { 'P' };
        match self {
            Symbol::Sd { attempts: None, outcome } => write!(f, "{}_{{sd}}", letter(outcome)),
            Symbol::Sd {
                attempts: Some(l),
                outcome,
            } => write!(f, "{}_{{sd,{l}}}", letter(outcome)),
            Symbol::Sr { attempts: None, outcome } => write!(f, "{}_{{sr}}", letter(outcome)),
            Symbol::Sr {
                attempts: Some(l),
                outcome,
            } => write!(f, "{}_{{sr,{l}}}", letter(outcome)),
            Symbol::Rd { outcome } => write!(f, "{}_{{rd}}", letter(outcome)),
            Symbol::Srd { source, relay, outcome } => write!(f, "{}_{{srd,{source};{relay}}}", letter(outcome)),
        }
    }
}

/// Outage probabilities feeding the transition probabilities. Success
/// probabilities are derived as 1 - Q.
#[derive(Debug, Clone, PartialEq)]
pub enum OutageTable {
    Arq { sd: f64, sr: f64, rd: f64 },
    /// `sd[l-1]`, `sr[l-1]` for l ≤ M and `srd[l-1][i-1]` for i ≤ N.
    Harq { sd: Vec<f64>, sr: Vec<f64>, srd: Vec<Vec<f64>> },
}

impl OutageTable {
    /// Computes every table entry, routing each outage evaluation through
    /// `eval` (which may cache).
    pub fn compute_with<F>(cfg: &StrategyConfig, mut eval: F) -> Result<OutageTable>
    where
        F: FnMut(&OutageKey) -> Result<f64>,
    {
        cfg.validate()?;
        match cfg.strategy {
            Strategy::I => Ok(OutageTable::Arq {
                sd: eval(&OutageKey::arq(cfg.sd, cfg.rt))?,
                sr: eval(&OutageKey::arq(cfg.sr, cfg.rt))?,
                rd: eval(&OutageKey::arq(cfg.rd, cfg.rt))?,
            }),
            Strategy::II => {
                let mut sd = Vec::with_capacity(cfg.m as usize);
                let mut sr = Vec::with_capacity(cfg.m as usize);
                let mut srd = Vec::with_capacity(cfg.m as usize);
                for l in 1..=cfg.m {
                    sd.push(eval(&OutageKey::source(cfg.combining, cfg.sd, l, cfg.rt))?);
                    sr.push(eval(&OutageKey::source(cfg.combining, cfg.sr, l, cfg.rt))?);
                    let mut row = Vec::with_capacity(cfg.n as usize);
                    for i in 1..=cfg.n {
                        row.push(eval(&OutageKey::combined(cfg.combining, cfg.sd, cfg.rd, l, i, cfg.rt))?);
                    }
                    srd.push(row);
                }
                Ok(OutageTable::Harq { sd, sr, srd })
            }
        }
    }

    pub fn compute(cfg: &StrategyConfig, contour: &ContourSpec) -> Result<OutageTable> {
        Self::compute_with(cfg, |key| key.evaluate(contour))
    }

    /// Q or P value of `symbol`; a domain error if the table has no such entry.
    pub fn value(&self, symbol: &Symbol) -> Result<f64> {
        let missing = || domain(format!("outage table has no entry for {symbol}"));
        let (q, outcome) = match (self, symbol) {
            (OutageTable::Arq { sd, .. }, Symbol::Sd { attempts: None, outcome }) => (*sd, outcome),
            (OutageTable::Arq { sr, .. }, Symbol::Sr { attempts: None, outcome }) => (*sr, outcome),
            (OutageTable::Arq { rd, .. }, Symbol::Rd { outcome }) => (*rd, outcome),
            (OutageTable::Harq { sd, .. }, Symbol::Sd { attempts: Some(l), outcome }) => {
                (*sd.get(index(*l)).ok_or_else(missing)?, outcome)
            }
            (OutageTable::Harq { sr, .. }, Symbol::Sr { attempts: Some(l), outcome }) => {
                (*sr.get(index(*l)).ok_or_else(missing)?, outcome)
            }
            (OutageTable::Harq { srd, .. }, Symbol::Srd { source, relay, outcome }) => {
                let row = srd.get(index(*source)).ok_or_else(missing)?;
                (*row.get(index(*relay)).ok_or_else(missing)?, outcome)
            }
            _ => return Err(missing()),
        };
        Ok(match outcome {
            Outcome::Fail => q,
            Outcome::Success => 1.0 - q,
        })
    }

    fn check(&self) -> Result<()> {
        let all: Vec<f64> = match self {
            OutageTable::Arq { sd, sr, rd } => vec![*sd, *sr, *rd],
            OutageTable::Harq { sd, sr, srd } => sd.iter().chain(sr).chain(srd.iter().flatten()).copied().collect(),
        };
        match all.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            Some(q) => Err(domain(format!("outage probability {q} outside [0, 1]"))),
            None => Ok(()),
        }
    }
}

fn index(one_based: u32) -> usize {
    (one_based as usize).wrapping_sub(1)
}

/// Identifies one outage evaluation independently of where it is used, so
/// sweeps can share results between table entries and grid points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageKey {
    pub kind: OutageKind,
    pub first: LinkParams,
    pub second: Option<LinkParams>,
    pub k1: u32,
    pub k2: u32,
    pub rt: RateThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutageKind {
    Arq,
    Source(Combining),
    Combined(Combining),
}

impl OutageKey {
    fn arq(link: LinkParams, rt: RateThreshold) -> Self {
        OutageKey {
            kind: OutageKind::Arq,
            first: link,
            second: None,
            k1: 1,
            k2: 0,
            rt,
        }
    }

    fn source(c: Combining, link: LinkParams, k: u32, rt: RateThreshold) -> Self {
        OutageKey {
            kind: OutageKind::Source(c),
            first: link,
            second: None,
            k1: k,
            k2: 0,
            rt,
        }
    }

    fn combined(c: Combining, sd: LinkParams, rd: LinkParams, l: u32, i: u32, rt: RateThreshold) -> Self {
        OutageKey {
            kind: OutageKind::Combined(c),
            first: sd,
            second: Some(rd),
            k1: l,
            k2: i,
            rt,
        }
    }

    pub fn evaluate(&self, contour: &ContourSpec) -> Result<f64> {
        let second = || self.second.ok_or_else(|| domain("combined outage needs a second link"));
        match self.kind {
            OutageKind::Arq => Ok(arq_outage(self.first, self.rt)),
            OutageKind::Source(Combining::Rr) => rr_source_outage(self.first, self.k1, self.rt),
            OutageKind::Source(Combining::Ir) => ir_source_outage(self.first, self.k1, self.rt, contour),
            OutageKind::Combined(Combining::Rr) => rr_combined_outage(self.first, second()?, self.k1, self.k2, self.rt),
            OutageKind::Combined(Combining::Ir) => {
                ir_combined_outage(self.first, second()?, self.k1, self.k2, self.rt, contour)
            }
        }
    }

    /// The same event as a scheme-tagged query (for simulation).
    pub fn query(&self) -> OutageQuery {
        let scheme = match self.kind {
            OutageKind::Arq => Scheme::Arq,
            OutageKind::Source(Combining::Rr) => Scheme::RrSource,
            OutageKind::Source(Combining::Ir) => Scheme::IrSource,
            OutageKind::Combined(Combining::Rr) => Scheme::RrCombined,
            OutageKind::Combined(Combining::Ir) => Scheme::IrCombined,
        };
        OutageQuery {
            scheme,
            first: self.first,
            second: self.second.unwrap_or(self.first),
            k1: self.k1,
            k2: self.k2,
            rt: self.rt,
        }
    }

    /// Bit-exact hashable form.
    pub fn cache_key(&self) -> (OutageKind, [u64; 5], u32, u32) {
        let (s2, v2) = self
            .second
            .map(|l| (l.snr().to_bits(), l.fading_variance().to_bits()))
            .unwrap_or((0, 0));
        (
            self.kind,
            [
                self.first.snr().to_bits(),
                self.first.fading_variance().to_bits(),
                s2,
                v2,
                self.rt.rate().to_bits(),
            ],
            self.k1,
            self.k2,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeLabel {
    /// The source transmits its `attempt`-th copy.
    Source { attempt: u32 },
    /// The relay transmits its `attempt`-th copy after decoding from
    /// `source_attempts` source transmissions. Strategy I uses attempt 1 for
    /// its single, repeating relay mode.
    Relay { source_attempts: u32, attempt: u32 },
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Source { attempt } => write!(f, "source#{attempt}"),
            ModeLabel::Relay {
                source_attempts,
                attempt,
            } => write!(f, "relay#{source_attempts}.{attempt}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    /// Symbols whose product is the transition probability.
    pub factors: Vec<Symbol>,
    pub probability: f64,
    /// Packets delivered to the destination (0 or 1).
    pub packets: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeGraph {
    strategy: Strategy,
    labels: Vec<ModeLabel>,
    transitions: Vec<Transition>,
    /// Rate the outage table was computed for, when known.
    rate: Option<f64>,
}

impl ModeGraph {
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn mode_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn rate(&self) -> Option<f64> {
        self.rate
    }

    /// Σ of outgoing probabilities for every mode.
    pub fn outgoing_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.mode_count()];
        for t in &self.transitions {
            sums[t.from] += t.probability;
        }
        sums
    }

    /// Two-mode chain of Strategy I from ARQ outage values.
    pub fn strategy1(table: &OutageTable) -> Result<ModeGraph> {
        if !matches!(table, OutageTable::Arq { .. }) {
            return Err(Error::ConfigMismatch("Strategy I needs an ARQ outage table".into()));
        }
        let sd = |outcome| Symbol::Sd { attempts: None, outcome };
        let sr = |outcome| Symbol::Sr { attempts: None, outcome };
        let rd = |outcome| Symbol::Rd { outcome };
        use Outcome::*;
        let mut b = Builder::new(table);
        b.add(0, 0, vec![sd(Fail), sr(Fail)], 0)?;
        b.add(0, 0, vec![sd(Success)], 1)?;
        b.add(0, 1, vec![sd(Fail), sr(Success)], 0)?;
        b.add(1, 0, vec![rd(Success)], 1)?;
        b.add(1, 1, vec![rd(Fail)], 0)?;
        Ok(ModeGraph {
            strategy: Strategy::I,
            labels: vec![
                ModeLabel::Source { attempt: 1 },
                ModeLabel::Relay {
                    source_attempts: 1,
                    attempt: 1,
                },
            ],
            transitions: b.transitions,
            rate: None,
        })
    }

    /// M(N+1)-mode chain of Strategy II. Source attempt l lives in mode
    /// s'_l = (l-1)(N+1) + 1, followed by its N relay modes.
    pub fn strategy2(m: u32, n: u32, table: &OutageTable) -> Result<ModeGraph> {
        if m == 0 || n == 0 {
            return Err(Error::ConfigMismatch(format!("need M, N >= 1, got M={m} N={n}")));
        }
        match table {
            OutageTable::Harq { sd, srd, .. } if sd.len() == m as usize && srd.iter().all(|r| r.len() == n as usize) => {}
            _ => {
                return Err(Error::ConfigMismatch(format!(
                    "outage table does not match Strategy II with M={m}, N={n}"
                )))
            }
        }
        use Outcome::*;
        let sd = |l, outcome| Symbol::Sd {
            attempts: Some(l),
            outcome,
        };
        let sr = |l, outcome| Symbol::Sr {
            attempts: Some(l),
            outcome,
        };
        let srd = |source, relay, outcome| Symbol::Srd { source, relay, outcome };
        let block = (n + 1) as usize;
        let source_mode = |l: u32| (l as usize - 1) * block;

        let mut labels = Vec::with_capacity(m as usize * block);
        let mut b = Builder::new(table);
        for l in 1..=m {
            labels.push(ModeLabel::Source { attempt: l });
            for i in 1..=n {
                labels.push(ModeLabel::Relay {
                    source_attempts: l,
                    attempt: i,
                });
            }
            let s = source_mode(l);
            let both_fail = if l < m { source_mode(l + 1) } else { 0 };
            b.add(s, both_fail, vec![sd(l, Fail), sr(l, Fail)], 0)?;
            b.add(s, 0, vec![sd(l, Success)], 1)?;
            b.add(s, s + 1, vec![sd(l, Fail), sr(l, Success)], 0)?;
            for i in 1..=n {
                let r = s + i as usize;
                let next = if i < n { r + 1 } else { 0 };
                b.add(r, next, vec![srd(l, i, Fail)], 0)?;
                b.add(r, 0, vec![srd(l, i, Success)], 1)?;
            }
        }
        Ok(ModeGraph {
            strategy: Strategy::II,
            labels,
            transitions: b.transitions,
            rate: None,
        })
    }

    /// Companion-matrix entries as text, `Q_{sd,1}Q_{sr,1} + P_{sd,1}e^{-θR}`
    /// style; row `s`, column `s̃` holds the transitions s̃ → s.
    pub fn symbolic_matrix(&self) -> Vec<Vec<String>> {
        let l = self.mode_count();
        let mut terms: Vec<Vec<Vec<(u32, String)>>> = vec![vec![Vec::new(); l]; l];
        for t in &self.transitions {
            let mut text: String = t.factors.iter().map(|s| s.to_string()).collect();
            if t.packets > 0 {
                text.push_str("e^{-θR}");
            }
            terms[t.to][t.from].push((t.packets, text));
        }
        terms
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|mut cell| {
                        if cell.is_empty() {
                            return "0".to_string();
                        }
                        cell.sort_by_key(|(v, _)| *v);
                        cell.into_iter().map(|(_, s)| s).collect::<Vec<_>>().join(" + ")
                    })
                    .collect()
            })
            .collect()
    }
}

struct Builder<'a> {
    table: &'a OutageTable,
    transitions: Vec<Transition>,
}

impl<'a> Builder<'a> {
    fn new(table: &'a OutageTable) -> Self {
        Builder {
            table,
            transitions: Vec::new(),
        }
    }

    fn add(&mut self, from: usize, to: usize, factors: Vec<Symbol>, packets: u32) -> Result<()> {
        let mut probability = 1.0;
        for s in &factors {
            probability *= self.table.value(s)?;
        }
        self.transitions.push(Transition {
            from,
            to,
            factors,
            probability,
            packets,
        });
        Ok(())
    }
}

/// Strategy I graph with ARQ outage values computed from the links.
pub fn build_strategy1(cfg: &StrategyConfig) -> Result<ModeGraph> {
    if cfg.strategy != Strategy::I {
        return Err(Error::ConfigMismatch("build_strategy1 called with a Strategy II config".into()));
    }
    let table = OutageTable::compute(cfg, &ContourSpec::default())?;
    build_from_table(cfg, &table)
}

/// Strategy II graph with HARQ outage values for the configured combining.
pub fn build_strategy2(cfg: &StrategyConfig, contour: &ContourSpec) -> Result<ModeGraph> {
    if cfg.strategy != Strategy::II {
        return Err(Error::ConfigMismatch("build_strategy2 called with a Strategy I config".into()));
    }
    let table = OutageTable::compute(cfg, contour)?;
    build_from_table(cfg, &table)
}

/// Either strategy from a precomputed table.
pub fn build_from_table(cfg: &StrategyConfig, table: &OutageTable) -> Result<ModeGraph> {
    table.check()?;
    let mut graph = match cfg.strategy {
        Strategy::I => ModeGraph::strategy1(table)?,
        Strategy::II => ModeGraph::strategy2(cfg.m, cfg.n, table)?,
    };
    graph.rate = Some(cfg.rt.rate());
    Ok(graph)
}

/// Column-oriented L×L matrix: entry (row s, column s̃) = α_{s̃ s}.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionMatrix {
    size: usize,
    /// Row-major.
    data: Vec<f64>,
}

impl CompanionMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if size == 0 || rows.iter().any(|r| r.len() != size) {
            return Err(domain("companion matrix must be square and nonempty"));
        }
        if rows.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(domain("companion matrix entries must be finite and nonnegative"));
        }
        Ok(CompanionMatrix {
            size,
            data: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.size).map(|r| r.to_vec()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.size)
            .map(|c| (0..self.size).map(|r| self.get(r, c)).sum())
            .collect()
    }

    /// y = A x
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.data[r * self.size..(r + 1) * self.size]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    /// Principal submatrix on the modes reachable from `start` along
    /// positive entries (column s̃ → row s).
    pub fn reachable_from(&self, start: usize) -> CompanionMatrix {
        let mut seen = vec![false; self.size];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(c) = stack.pop() {
            for r in 0..self.size {
                if !seen[r] && self.get(r, c) > 0.0 {
                    seen[r] = true;
                    stack.push(r);
                }
            }
        }
        let keep: Vec<usize> = (0..self.size).filter(|&i| seen[i]).collect();
        let data = keep
            .iter()
            .flat_map(|&r| keep.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        CompanionMatrix { size: keep.len(), data }
    }

    /// CSV: header `L=<n>`, then one comma-separated row per matrix row.
    pub fn to_csv(&self) -> String {
        let mut out = format!("L={}\n", self.size);
        for row in self.data.chunks(self.size) {
            let cells: Vec<String> = row.iter().map(|v| crate::effective_capacity::format_g15(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// α-weighted matrix at QoS exponent θ: entry (s, s̃) = Σ_v P_{v s̃ s} e^{-θ v R}.
pub fn alpha_matrix(graph: &ModeGraph, qos: &QosParams) -> Result<CompanionMatrix> {
    if let Some(rate) = graph.rate {
        if rate != qos.rate() {
            return Err(Error::ConfigMismatch(format!(
                "graph built for R={rate} but QoS rate is {}",
                qos.rate()
            )));
        }
    }
    Ok(alpha_matrix_at(graph, qos.theta(), qos.rate()))
}

/// As [`alpha_matrix`] but accepting θ = 0, where the result is the plain
/// column-stochastic transition matrix.
pub fn alpha_matrix_at(graph: &ModeGraph, theta: f64, rate: f64) -> CompanionMatrix {
    let size = graph.mode_count();
    let mut data = vec![0.0; size * size];
    let discount = (-theta * rate).exp();
    for t in &graph.transitions {
        data[t.to * size + t.from] += t.probability * discount.powi(t.packets as i32);
    }
    CompanionMatrix { size, data }
}
