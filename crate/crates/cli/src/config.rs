//! Scenario files: TOML with one table per concern.
//!
//! ```toml
//! [strategy]
//! kind = "II"          # "I" (plain ARQ) or "II" (truncated HARQ)
//! combining = "ir"     # "rr" | "ir"  (Strategy II only)
//! m = 2
//! n = 2
//!
//! [links]
//! symmetric = true
//! snr_db = 10.0
//! fading_variance = 1.0
//! # symmetric = false instead takes sd_snr_db, sd_fading_variance,
//! # sr_snr_db, ..., rd_fading_variance (variances default to 1).
//!
//! [qos]
//! rate = 1.0
//! theta = 1.0
//!
//! [sweep]
//! axis = "snr_db"      # "snr_db" | "rate" | "theta"
//! grid = [0.0, 5.0, 10.0]   # or start / stop / step
//!
//! [outage]
//! scheme = "ir_combined"
//! k1 = [1, 2, 3]
//! k2 = [1]
//! link = "sd"          # source-side link for the source schemes
//!
//! [sim]
//! seed = 1
//! samples = 1000000
//! blocks = 10000
//! block_length = 2000
//! estimator = "cloning" # or "block"
//!
//! [validate]
//! se_multiple = 3.0
//! ec_relative = 0.02
//! outage_floor = 1e-3
//! confirm = true
//!
//! [output]
//! path = "curve.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use harq_ec::effective_capacity::{QosParams, SweepAxis};
use harq_ec::mode_graph::{Combining, Strategy, StrategyConfig};
use harq_ec::monte_carlo::{EcEstimator, SimPlan};
use harq_ec::outage::{LinkParams, RateThreshold, Scheme};
use harq_ec::validation::Tolerances;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub strategy: Option<RawStrategy>,
    pub links: Option<RawLinks>,
    pub qos: Option<RawQos>,
    pub sweep: Option<RawSweep>,
    pub outage: Option<RawOutage>,
    pub sim: Option<RawSim>,
    pub validate: Option<RawValidate>,
    pub output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStrategy {
    pub kind: String,
    pub combining: Option<String>,
    pub m: Option<u32>,
    pub n: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLinks {
    #[serde(default)]
    pub symmetric: bool,
    pub snr_db: Option<f64>,
    pub fading_variance: Option<f64>,
    pub sd_snr_db: Option<f64>,
    pub sd_fading_variance: Option<f64>,
    pub sr_snr_db: Option<f64>,
    pub sr_fading_variance: Option<f64>,
    pub rd_snr_db: Option<f64>,
    pub rd_fading_variance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQos {
    pub rate: f64,
    pub theta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub axis: String,
    pub grid: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutage {
    pub scheme: String,
    #[serde(default = "one")]
    pub k1: Vec<u32>,
    #[serde(default = "one")]
    pub k2: Vec<u32>,
    pub link: Option<String>,
}

fn one() -> Vec<u32> {
    vec![1]
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSim {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub blocks: Option<usize>,
    pub block_length: Option<usize>,
    pub estimator: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawValidate {
    pub se_multiple: Option<f64>,
    pub ec_relative: Option<f64>,
    pub outage_floor: Option<f64>,
    pub confirm: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub path: PathBuf,
}

/// Parsed scenario. Sections stay optional until a command asks for them.
#[derive(Debug, Default)]
pub struct ScenarioConfig {
    raw: RawConfig,
}

pub struct OutageSpec {
    pub scheme: Scheme,
    pub k1: Vec<u32>,
    pub k2: Vec<u32>,
    pub use_sr: bool,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        Ok(ScenarioConfig { raw })
    }

    fn qos_section(&self) -> Result<&RawQos, ConfigError> {
        self.raw.qos.as_ref().ok_or_else(|| ConfigError("missing [qos] section".into()))
    }

    pub fn rate(&self) -> Result<f64, ConfigError> {
        Ok(self.qos_section()?.rate)
    }

    pub fn theta(&self) -> Result<f64, ConfigError> {
        self.qos_section()?
            .theta
            .ok_or_else(|| ConfigError("[qos].theta: required for this command".into()))
    }

    pub fn qos(&self) -> Result<QosParams, ConfigError> {
        QosParams::new(self.theta()?, self.rate()?).map_err(|e| ConfigError(format!("[qos]: {e}")))
    }

    /// (sd, sr, rd) links.
    pub fn links(&self) -> Result<[LinkParams; 3], ConfigError> {
        let l = self.raw.links.as_ref().ok_or_else(|| ConfigError("missing [links] section".into()))?;
        let per_link = [
            ("sd", l.sd_snr_db, l.sd_fading_variance),
            ("sr", l.sr_snr_db, l.sr_fading_variance),
            ("rd", l.rd_snr_db, l.rd_fading_variance),
        ];
        let make = |name: &str, db: f64, var: f64| {
            LinkParams::from_db(db, var).map_err(|e| ConfigError(format!("[links] {name}: {e}")))
        };
        if l.symmetric {
            if let Some((name, ..)) = per_link.iter().find(|(_, d, v)| d.is_some() || v.is_some()) {
                return err(format!("[links].{name}_*: per-link keys are not allowed when symmetric = true"));
            }
            let db = l.snr_db.ok_or_else(|| ConfigError("[links].snr_db: required when symmetric = true".into()))?;
            let link = make("all", db, l.fading_variance.unwrap_or(1.0))?;
            Ok([link; 3])
        } else {
            if l.snr_db.is_some() || l.fading_variance.is_some() {
                return err("[links].snr_db/fading_variance: only valid with symmetric = true");
            }
            let mut out = Vec::with_capacity(3);
            for (name, db, var) in per_link {
                let db = db.ok_or_else(|| ConfigError(format!("[links].{name}_snr_db: required")))?;
                out.push(make(name, db, var.unwrap_or(1.0))?);
            }
            Ok([out[0], out[1], out[2]])
        }
    }

    pub fn strategy(&self) -> Result<StrategyConfig, ConfigError> {
        let s = self.raw.strategy.as_ref().ok_or_else(|| ConfigError("missing [strategy] section".into()))?;
        let strategy = match s.kind.to_ascii_uppercase().as_str() {
            "I" | "1" => Strategy::I,
            "II" | "2" => Strategy::II,
            other => return err(format!("[strategy].kind: expected \"I\" or \"II\", got {other:?}")),
        };
        let combining = match s.combining.as_deref().unwrap_or("rr") {
            "rr" => Combining::Rr,
            "ir" => Combining::Ir,
            other => return err(format!("[strategy].combining: expected \"rr\" or \"ir\", got {other:?}")),
        };
        let [sd, sr, rd] = self.links()?;
        let rt = RateThreshold::new(self.rate()?).map_err(|e| ConfigError(format!("[qos].rate: {e}")))?;
        let cfg = StrategyConfig {
            strategy,
            combining,
            m: s.m.unwrap_or(1),
            n: s.n.unwrap_or(1),
            sd,
            sr,
            rd,
            rt,
        };
        cfg.validate().map_err(|e| ConfigError(format!("[strategy]: {e}")))?;
        Ok(cfg)
    }

    /// Sweep axis and grid; `None` when the file has no [sweep] section.
    pub fn sweep(&self) -> Result<Option<(SweepAxis, Vec<f64>)>, ConfigError> {
        let Some(s) = self.raw.sweep.as_ref() else {
            return Ok(None);
        };
        let axis = SweepAxis::parse(&s.axis)
            .ok_or_else(|| ConfigError(format!("[sweep].axis: unknown axis {:?}", s.axis)))?;
        let grid = match (&s.grid, s.start, s.stop, s.step) {
            (Some(g), None, None, None) => g.clone(),
            (None, Some(a), Some(b), Some(h)) => {
                if !(h > 0.0) || !(b >= a) {
                    return err("[sweep]: need step > 0 and stop ≥ start");
                }
                let count = ((b - a) / h + 1e-9).floor() as usize + 1;
                (0..count).map(|i| a + i as f64 * h).collect()
            }
            _ => return err("[sweep]: give either grid = [...] or start, stop and step"),
        };
        if grid.is_empty() {
            return err("[sweep].grid: grid is empty");
        }
        harq_ec::effective_capacity::check_grid(&grid).map_err(|e| ConfigError(format!("[sweep].grid: {e}")))?;
        Ok(Some((axis, grid)))
    }

    pub fn outage(&self) -> Result<OutageSpec, ConfigError> {
        let o = self.raw.outage.as_ref().ok_or_else(|| ConfigError("missing [outage] section".into()))?;
        let scheme = Scheme::parse(&o.scheme)
            .ok_or_else(|| ConfigError(format!("[outage].scheme: unknown scheme {:?}", o.scheme)))?;
        if o.k1.is_empty() || o.k1.contains(&0) || o.k2.is_empty() || o.k2.contains(&0) {
            return err("[outage].k1/k2: non-empty lists of counts ≥ 1 required");
        }
        let use_sr = match o.link.as_deref().unwrap_or("sd") {
            "sd" => false,
            "sr" if !scheme.is_combined() => true,
            other => return err(format!("[outage].link: {other:?} not valid for {}", scheme.name())),
        };
        Ok(OutageSpec {
            scheme,
            k1: if scheme == Scheme::Arq { vec![1] } else { o.k1.clone() },
            k2: if scheme.is_combined() { o.k2.clone() } else { vec![0] },
            use_sr,
        })
    }

    pub fn sim_plan(&self, seed: Option<u64>) -> Result<(SimPlan, EcEstimator), ConfigError> {
        let d = SimPlan::default();
        let empty = RawSim::default();
        let s = self.raw.sim.as_ref().unwrap_or(&empty);
        let plan = SimPlan {
            seed: seed.or(s.seed).unwrap_or(d.seed),
            samples: s.samples.unwrap_or(d.samples),
            blocks: s.blocks.unwrap_or(d.blocks),
            block_length: s.block_length.unwrap_or(d.block_length),
        };
        plan.validate().map_err(|e| ConfigError(format!("[sim]: {e}")))?;
        let estimator = match s.estimator.as_deref().unwrap_or("cloning") {
            "cloning" => EcEstimator::Cloning,
            "block" => EcEstimator::Block,
            other => return err(format!("[sim].estimator: expected \"cloning\" or \"block\", got {other:?}")),
        };
        Ok((plan, estimator))
    }

    pub fn tolerances(&self) -> Result<Tolerances, ConfigError> {
        let d = Tolerances::default();
        let empty = RawValidate::default();
        let v = self.raw.validate.as_ref().unwrap_or(&empty);
        let t = Tolerances {
            se_multiple: v.se_multiple.unwrap_or(d.se_multiple),
            ec_relative: v.ec_relative.unwrap_or(d.ec_relative),
            outage_floor: v.outage_floor.unwrap_or(d.outage_floor),
            confirm: v.confirm.unwrap_or(d.confirm),
            ..d
        };
        if [t.se_multiple, t.ec_relative, t.outage_floor].iter().any(|x| !(*x >= 0.0)) {
            return err("[validate]: tolerances must be nonnegative");
        }
        Ok(t)
    }

    pub fn output_path(&self) -> Option<&Path> {
        self.raw.output.as_ref().map(|o| o.path.as_path())
    }
}
