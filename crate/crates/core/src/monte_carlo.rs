//! Simulation oracles: outage frequencies from sampled fading gains, and the
//! effective capacity of a simulated mode chain.
//!
//! Every random stream is a ChaCha8 generator seeded with the plan seed and
//! selected by a fixed chunk (or block) index, so results are bit-identical
//! for any number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::sample_exponential;
use crate::effective_capacity::QosParams;
use crate::error::{domain, Result};
use crate::mode_graph::ModeGraph;
use crate::outage::{LinkParams, OutageQuery, Scheme};

/// Samples per random stream in outage estimation.
const OUTAGE_CHUNK: usize = 8_192;
/// Resampling draws used for the block estimator's confidence interval.
const BOOTSTRAP_ROUNDS: usize = 400;
/// Stream ids at or above this value are reserved for auxiliary draws.
const AUX_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimPlan {
    pub seed: u64,
    /// Channel realisations per outage estimate.
    pub samples: usize,
    /// Independent blocks (or population size) for effective capacity.
    pub blocks: usize,
    /// Slots per block.
    pub block_length: usize,
}

impl Default for SimPlan {
    fn default() -> Self {
        SimPlan {
            seed: 0x5eed_2024,
            samples: 1_000_000,
            blocks: 10_000,
            block_length: 2_000,
        }
    }
}

impl SimPlan {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 10_000 {
            return Err(domain(format!("samples must be at least 1e4, got {}", self.samples)));
        }
        if self.blocks < 1_000 {
            return Err(domain(format!("blocks must be at least 1e3, got {}", self.blocks)));
        }
        if self.block_length < 100 {
            return Err(domain(format!("block length must be at least 100, got {}", self.block_length)));
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub estimate: f64,
    /// Binomial standard error sqrt(p(1-p)/n).
    pub std_error: f64,
    pub outages: u64,
    pub samples: u64,
}

impl OutageEstimate {
    fn from_counts(outages: u64, samples: u64) -> Self {
        let p = outages as f64 / samples as f64;
        OutageEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / samples as f64).sqrt(),
            outages,
            samples,
        }
    }
}

/// Empirical outage probability of one event.
pub fn estimate_outage(query: &OutageQuery, plan: &SimPlan) -> Result<OutageEstimate> {
    Ok(estimate_outage_batch(std::slice::from_ref(query), plan)?[0])
}

/// Outage estimates for many events on shared channel realisations.
///
/// Each realisation draws unit exponentials `E₁ⱼ` (first link) and `E₂ⱼ`
/// (second link); the received SNR of attempt j is `Γ δ² Eᵢⱼ`. Every event is
/// evaluated on the same draws, so each estimate is an ordinary Monte Carlo
/// estimate while comparisons between events are paired.
pub fn estimate_outage_batch(queries: &[OutageQuery], plan: &SimPlan) -> Result<Vec<OutageEstimate>> {
    Ok(paired_outage(queries, &[], plan)?.0)
}

/// Shared-sample estimates plus, for each `(a, b)` in `pairs`, the number of
/// realisations where event `b` occurs but event `a` does not.
pub fn paired_outage(
    queries: &[OutageQuery],
    pairs: &[(usize, usize)],
    plan: &SimPlan,
) -> Result<(Vec<OutageEstimate>, Vec<u64>)> {
    plan.validate()?;
    if pairs.iter().any(|&(a, b)| a >= queries.len() || b >= queries.len()) {
        return Err(domain("pair index out of range"));
    }
    let layout = Layout::new(queries)?;
    let chunks = plan.samples.div_ceil(OUTAGE_CHUNK);
    let counts: Vec<(Vec<u64>, Vec<u64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = OUTAGE_CHUNK.min(plan.samples - c * OUTAGE_CHUNK);
            layout.run_chunk(&mut stream(plan.seed, c as u64), n, pairs)
        })
        .collect();
    let mut outages = vec![0u64; queries.len()];
    let mut violations = vec![0u64; pairs.len()];
    for (o, v) in counts {
        outages.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        violations.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    let estimates = outages
        .into_iter()
        .map(|o| OutageEstimate::from_counts(o, plan.samples as u64))
        .collect();
    Ok((estimates, violations))
}

/// Precomputed bookkeeping for evaluating many events per realisation.
struct Layout {
    /// Distinct (draw set, mean SNR) pairs; the draw set is 0 for the first
    /// link and 1 for the second.
    slots: Vec<(usize, f64)>,
    depth: [usize; 2],
    events: Vec<Event>,
}

struct Event {
    scheme: Scheme,
    first: usize,
    second: Option<usize>,
    k1: usize,
    k2: usize,
    theta: f64,
    rate: f64,
}

impl Layout {
    fn new(queries: &[OutageQuery]) -> Result<Layout> {
        let mut slots: Vec<(usize, f64)> = Vec::new();
        let mut slot = |set: usize, link: &LinkParams| {
            let mean = link.snr() * link.fading_variance();
            match slots.iter().position(|&(s, m)| s == set && m == mean) {
                Some(i) => i,
                None => {
                    slots.push((set, mean));
                    slots.len() - 1
                }
            }
        };
        let mut depth = [0usize; 2];
        let mut events = Vec::with_capacity(queries.len());
        for q in queries {
            let k1 = if q.scheme == Scheme::Arq { 1 } else { q.k1 as usize };
            if k1 == 0 || (q.scheme.is_combined() && q.k2 == 0) {
                return Err(domain("attempt counts must be at least 1"));
            }
            depth[0] = depth[0].max(k1);
            let second = if q.scheme.is_combined() {
                depth[1] = depth[1].max(q.k2 as usize);
                Some(slot(1, &q.second))
            } else {
                None
            };
            events.push(Event {
                scheme: q.scheme,
                first: slot(0, &q.first),
                second,
                k1,
                k2: q.k2 as usize,
                theta: q.rt.theta(),
                rate: q.rt.rate(),
            });
        }
        Ok(Layout { slots, depth, events })
    }

    fn run_chunk<R: Rng>(&self, rng: &mut R, n: usize, pairs: &[(usize, usize)]) -> (Vec<u64>, Vec<u64>) {
        let width = self.depth[0].max(self.depth[1]);
        let mut draws = [vec![0.0; self.depth[0]], vec![0.0; self.depth[1]]];
        // Per slot: prefix sums of SNR and of log2(1 + SNR), index 0 = empty.
        let mut snr_sum = vec![vec![0.0; width + 1]; self.slots.len()];
        let mut info_sum = vec![vec![0.0; width + 1]; self.slots.len()];
        let mut hit = vec![false; self.events.len()];
        let mut outages = vec![0u64; self.events.len()];
        let mut violations = vec![0u64; pairs.len()];
        for _ in 0..n {
            for set in &mut draws {
                for d in set.iter_mut() {
                    *d = sample_exponential(1.0, rng);
                }
            }
            for (s, &(set, mean)) in self.slots.iter().enumerate() {
                for (j, e) in draws[set].iter().enumerate() {
                    let snr = mean * e;
                    snr_sum[s][j + 1] = snr_sum[s][j] + snr;
                    info_sum[s][j + 1] = info_sum[s][j] + snr.ln_1p();
                }
            }
            for (i, ev) in self.events.iter().enumerate() {
                let out = match ev.scheme {
                    Scheme::Arq | Scheme::RrSource => snr_sum[ev.first][ev.k1] <= ev.theta,
                    Scheme::IrSource => info_sum[ev.first][ev.k1] <= ev.rate * std::f64::consts::LN_2,
                    Scheme::RrCombined => {
                        let second = ev.second.expect("combined event has a second slot");
                        snr_sum[ev.first][ev.k1] + snr_sum[second][ev.k2] <= ev.theta
                    }
                    Scheme::IrCombined => {
                        let second = ev.second.expect("combined event has a second slot");
                        info_sum[ev.first][ev.k1] + info_sum[second][ev.k2] <= ev.rate * std::f64::consts::LN_2
                    }
                };
                hit[i] = out;
                outages[i] += out as u64;
            }
            for (p, &(a, b)) in pairs.iter().enumerate() {
                violations[p] += (hit[b] && !hit[a]) as u64;
            }
        }
        (outages, violations)
    }
}

/// Estimator of the service process's log-moment decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcEstimator {
    /// -(1/(θn)) ln((1/B) Σ_b e^{-θ S_b}) over B independent blocks of n slots.
    Block,
    /// Population dynamics: B copies of the chain advance in lockstep and are
    /// resampled each slot with weights e^{-θ v R}; the mean weight per slot
    /// estimates the decay of E e^{-θ S_n} without relying on rare blocks.
    Cloning,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcEstimate {
    pub ec: f64,
    /// Half-width of an approximate 95% confidence interval.
    pub ci_halfwidth: f64,
    /// Every block delivered the same amount, so the spread carries no
    /// information (the estimate itself is still exact for that chain).
    pub degenerate: bool,
}

/// Per-mode cumulative transition table for fast sampling.
struct Sampler {
    /// (cumulative probability, destination, packets) per mode.
    out: Vec<Vec<(f64, usize, u32)>>,
}

impl Sampler {
    fn new(graph: &ModeGraph) -> Sampler {
        let mut out = vec![Vec::new(); graph.mode_count()];
        for t in graph.transitions() {
            if t.probability > 0.0 {
                out[t.from].push((t.probability, t.to, t.packets));
            }
        }
        for edges in &mut out {
            let mut acc = 0.0;
            for e in edges.iter_mut() {
                acc += e.0;
                e.0 = acc;
            }
        }
        Sampler { out }
    }

    fn step<R: Rng>(&self, mode: usize, rng: &mut R) -> (usize, u32) {
        let edges = &self.out[mode];
        let total = edges.last().map(|e| e.0).unwrap_or(0.0);
        let u = rng.random::<f64>() * total;
        for &(cum, to, v) in edges {
            if u < cum {
                return (to, v);
            }
        }
        let &(_, to, v) = edges.last().expect("mode has an outgoing transition");
        (to, v)
    }
}

/// Plain block estimator, as in [`EcEstimator::Block`].
pub fn simulate_service_process(graph: &ModeGraph, qos: &QosParams, plan: &SimPlan) -> Result<EcEstimate> {
    simulate_service_process_with(graph, qos, plan, EcEstimator::Block)
}

pub fn simulate_service_process_with(
    graph: &ModeGraph,
    qos: &QosParams,
    plan: &SimPlan,
    estimator: EcEstimator,
) -> Result<EcEstimate> {
    plan.validate()?;
    let sums = graph.outgoing_sums();
    if let Some(s) = sums.iter().find(|s| (*s - 1.0).abs() > 1e-9) {
        return Err(domain(format!("mode graph is not stochastic (outgoing sum {s})")));
    }
    let sampler = Sampler::new(graph);
    match estimator {
        EcEstimator::Block => Ok(block_estimate(&sampler, qos, plan)),
        EcEstimator::Cloning => Ok(cloning_estimate(&sampler, qos, plan)),
    }
}

fn block_estimate(sampler: &Sampler, qos: &QosParams, plan: &SimPlan) -> EcEstimate {
    let n = plan.block_length;
    let delivered: Vec<u64> = (0..plan.blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(plan.seed, b as u64);
            let mut mode = 0;
            let mut packets = 0u64;
            for _ in 0..n {
                let (next, v) = sampler.step(mode, &mut rng);
                mode = next;
                packets += v as u64;
            }
            packets
        })
        .collect();
    let estimate = |idx: &mut dyn Iterator<Item = u64>| -> f64 {
        // log-mean-exp of -θ R S_b, shifted by the largest term.
        let scaled: Vec<f64> = idx.map(|s| -qos.theta() * qos.rate() * s as f64).collect();
        let top = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = scaled.iter().map(|x| (x - top).exp()).sum::<f64>() / scaled.len() as f64;
        -(top + mean.ln()) / (qos.theta() * n as f64)
    };
    let ec = estimate(&mut delivered.iter().copied());
    let degenerate = delivered.iter().all(|&s| s == delivered[0]);
    let mut rng = stream(plan.seed, AUX_STREAM);
    let mut boot: Vec<f64> = (0..BOOTSTRAP_ROUNDS)
        .map(|_| {
            let mut it = (0..delivered.len()).map(|_| delivered[rng.random_range(0..delivered.len())]);
            estimate(&mut it)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let lo = boot[(BOOTSTRAP_ROUNDS as f64 * 0.025) as usize];
    let hi = boot[(BOOTSTRAP_ROUNDS as f64 * 0.975) as usize - 1];
    EcEstimate {
        ec,
        ci_halfwidth: 0.5 * (hi - lo),
        degenerate,
    }
}

/// Clones advanced per chunk of this size share one random stream.
const CLONE_CHUNK: usize = 1_024;
/// Batches used for the time-averaged confidence interval.
const CLONE_BATCHES: usize = 20;

fn cloning_estimate(sampler: &Sampler, qos: &QosParams, plan: &SimPlan) -> EcEstimate {
    let population = plan.blocks;
    let steps = plan.block_length;
    // The first tenth of the run lets the population forget its start in mode 1.
    let warmup = steps / 10;
    let discount = (-qos.theta() * qos.rate()).exp();
    let chunks = population.div_ceil(CLONE_CHUNK);
    let mut rngs: Vec<ChaCha8Rng> = (0..chunks).map(|c| stream(plan.seed, c as u64)).collect();
    let mut resample_rng = stream(plan.seed, AUX_STREAM);
    let mut modes = vec![0usize; population];
    let mut next = vec![0usize; population];
    let mut weights = vec![0.0f64; population];
    let mut log_growth = Vec::with_capacity(steps - warmup);
    let mut all_equal = true;
    for t in 0..steps {
        modes
            .par_chunks(CLONE_CHUNK)
            .zip(next.par_chunks_mut(CLONE_CHUNK))
            .zip(weights.par_chunks_mut(CLONE_CHUNK))
            .zip(rngs.par_iter_mut())
            .for_each(|(((m, nx), w), rng)| {
                for i in 0..m.len() {
                    let (to, v) = sampler.step(m[i], rng);
                    nx[i] = to;
                    w[i] = if v == 0 { 1.0 } else { discount.powi(v as i32) };
                }
            });
        let total: f64 = weights.iter().sum();
        if t >= warmup {
            log_growth.push((total / population as f64).ln());
        }
        all_equal &= weights.iter().all(|w| *w == weights[0]);
        // Systematic resampling proportional to the weights.
        let spacing = total / population as f64;
        let mut u = resample_rng.random::<f64>() * spacing;
        let mut acc = 0.0;
        let mut j = 0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            while j < population && u < acc {
                modes[j] = next[i];
                j += 1;
                u += spacing;
            }
        }
        // Rounding can leave the last slots unfilled.
        while j < population {
            modes[j] = next[population - 1];
            j += 1;
        }
    }
    let mean = log_growth.iter().sum::<f64>() / log_growth.len() as f64;
    let ec = -mean / qos.theta();
    let batch = log_growth.len() / CLONE_BATCHES;
    let batch_means: Vec<f64> = log_growth
        .chunks(batch.max(1))
        .take(CLONE_BATCHES)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let k = batch_means.len() as f64;
    let bm = batch_means.iter().sum::<f64>() / k;
    let var = batch_means.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    EcEstimate {
        ec: ec.clamp(0.0, qos.rate()),
        ci_halfwidth: 1.96 * (var / k).sqrt() / qos.theta(),
        degenerate: all_equal,
    }
}
