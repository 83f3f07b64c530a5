mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use harq_ec::effective_capacity::{ec_sweep, format_g15, CurveTable, SweepAxis};
use harq_ec::mode_graph::{alpha_matrix_at, build_from_table, OutageTable};
use harq_ec::monte_carlo::{estimate_outage_batch, simulate_service_process_with};
use harq_ec::outage::{OutageQuery, RateThreshold};
use harq_ec::specfun::ContourSpec;
use harq_ec::validation::{check_scenario, full_suite, Check};

use config::{ConfigError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "harq-ec", version, about = "Outage and effective capacity of truncated HARQ relaying")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Outage probability curves, one CSV per (k1, k2).
    Outage {
        #[arg(long)]
        config: PathBuf,
        /// Add Monte Carlo estimate and standard-error columns.
        #[arg(long)]
        mc: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Output stem; files are named <stem>_k1-<k1>[_k2-<k2>].csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective capacity along the configured sweep.
    Ec {
        #[arg(long)]
        config: PathBuf,
        /// Add simulated effective capacity and its confidence half-width.
        #[arg(long)]
        mc: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Companion matrix of the configured scenario.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        /// Overrides [qos].theta; 0 gives the plain transition matrix.
        #[arg(long)]
        theta: Option<f64>,
        /// Print entries as products of outage symbols instead of numbers.
        #[arg(long)]
        symbolic: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare closed forms against simulation.
    Validate {
        #[arg(long, required_unless_present = "suite")]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the JSON summary (default: stdout after the report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Full,
}

/// Failure classes with stable exit codes.
#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("validation failed")]
    Validation,
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<harq_ec::Error> for Failure {
    fn from(e: harq_ec::Error) -> Self {
        match e {
            harq_ec::Error::Domain(_) | harq_ec::Error::ConfigMismatch(_) => Failure::Config(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Numeric(format!("cannot write {}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn outage_file(stem: &Path, k1: u32, k2: u32) -> PathBuf {
    let base = stem.file_stem().and_then(|s| s.to_str()).unwrap_or("outage");
    let name = if k2 > 0 {
        format!("{base}_k1-{k1}_k2-{k2}.csv")
    } else {
        format!("{base}_k1-{k1}.csv")
    };
    stem.with_file_name(name)
}

fn cmd_outage(cfg: &ScenarioConfig, mc: bool, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let spec = cfg.outage()?;
    let [sd, sr, rd] = cfg.links()?;
    let rate = cfg.rate()?;
    let (axis, grid) = cfg
        .sweep()?
        .ok_or_else(|| Failure::Config("missing [sweep] section".into()))?;
    if axis == SweepAxis::Theta {
        return Err(Failure::Config("[sweep].axis: outage curves sweep snr_db or rate".into()));
    }
    let plan = if mc { Some(cfg.sim_plan(seed)?.0) } else { None };
    let stem = out
        .or_else(|| cfg.output_path().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("outage.csv"));
    let contour = ContourSpec::default();
    let first = if spec.use_sr { sr } else { sd };

    let point = |x: f64, k1: u32, k2: u32| -> Result<OutageQuery, Failure> {
        let (first, second, r) = match axis {
            SweepAxis::SnrDb => (
                harq_ec::outage::LinkParams::from_db(x, first.fading_variance())?,
                harq_ec::outage::LinkParams::from_db(x, rd.fading_variance())?,
                rate,
            ),
            _ => (first, rd, x),
        };
        Ok(OutageQuery {
            scheme: spec.scheme,
            first,
            second,
            k1,
            k2,
            rt: RateThreshold::new(r)?,
        })
    };

    for &k1 in &spec.k1 {
        for &k2 in &spec.k2 {
            let queries: Vec<OutageQuery> = grid.iter().map(|&x| point(x, k1, k2)).collect::<Result<_, _>>()?;
            let closed: Vec<_> = queries.par_iter().map(|q| q.closed_form(&contour)).collect();
            let estimates = match &plan {
                Some(p) => Some(estimate_outage_batch(&queries, p)?),
                None => None,
            };
            let columns: &[&str] = if mc {
                &["closed_form", "mc_estimate", "mc_stderr"]
            } else {
                &["closed_form"]
            };
            let mut table = CurveTable::new(axis.name(), columns);
            table.metadata = vec![
                ("scheme".into(), spec.scheme.name().into()),
                ("k1".into(), k1.to_string()),
                ("link".into(), if spec.use_sr { "sr" } else { "sd" }.into()),
                ("snr_db".into(), format_g15(first.snr_db())),
                ("fading_variance".into(), format_g15(first.fading_variance())),
                ("rate".into(), format_g15(rate)),
            ];
            if k2 > 0 {
                table.metadata.insert(2, ("k2".into(), k2.to_string()));
                table.metadata.push(("rd_snr_db".into(), format_g15(rd.snr_db())));
                table.metadata.push(("rd_fading_variance".into(), format_g15(rd.fading_variance())));
            }
            if let Some(p) = &plan {
                table.metadata.push(("seed".into(), p.seed.to_string()));
                table.metadata.push(("samples".into(), p.samples.to_string()));
            }
            let mut numeric_failure = None;
            for (i, (&x, c)) in grid.iter().zip(closed).enumerate() {
                match c {
                    Ok(v) => {
                        let mut row = vec![v];
                        if let Some(e) = &estimates {
                            row.extend([e[i].estimate, e[i].std_error]);
                        }
                        table.push(x, &row)?;
                    }
                    Err(e) => {
                        table.failed.push((x, e.to_string()));
                        numeric_failure.get_or_insert(e);
                    }
                }
            }
            let path = outage_file(&stem, k1, k2);
            write_file(&path, &table.to_csv())?;
            eprintln!("wrote {}", path.display());
            if let Some(e) = numeric_failure {
                return Err(Failure::Numeric(e.to_string()));
            }
        }
    }
    Ok(())
}

fn cmd_ec(cfg: &ScenarioConfig, mc: bool, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let scenario = cfg.strategy()?;
    let qos = cfg.qos()?;
    let (axis, grid) = cfg.sweep()?.unwrap_or((SweepAxis::Theta, vec![qos.theta()]));
    let contour = ContourSpec::default();
    let mut table = ec_sweep(&scenario, &qos, axis, &grid, &contour)?;
    if mc {
        let (plan, estimator) = cfg.sim_plan(seed)?;
        let sims = table
            .x_values
            .iter()
            .map(|&x| {
                let (c, q) = axis.apply(&scenario, &qos, x)?;
                let graph = build_from_table(&c, &OutageTable::compute(&c, &contour)?)?;
                simulate_service_process_with(&graph, &q, &plan, estimator)
            })
            .collect::<harq_ec::Result<Vec<_>>>()?;
        table.columns.push(("mc_ec".into(), sims.iter().map(|s| s.ec).collect()));
        table.columns.push(("mc_ci".into(), sims.iter().map(|s| s.ci_halfwidth).collect()));
        table.metadata.push(("seed".into(), plan.seed.to_string()));
        table.metadata.push(("estimator".into(), format!("{estimator:?}").to_lowercase()));
    }
    let out = out.or_else(|| cfg.output_path().map(Path::to_path_buf));
    emit(out.as_deref(), &table.to_csv())?;
    match table.failed.first() {
        Some((x, why)) => Err(Failure::Numeric(format!("{}={x}: {why}", axis.name()))),
        None => Ok(()),
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_matrix(cfg: &ScenarioConfig, theta: Option<f64>, symbolic: bool, out: Option<PathBuf>) -> Result<(), Failure> {
    let scenario = cfg.strategy()?;
    let contour = ContourSpec::default();
    let graph = build_from_table(&scenario, &OutageTable::compute(&scenario, &contour)?)?;
    let text = if symbolic {
        let labels: Vec<String> = graph.labels().iter().map(|l| l.to_string()).collect();
        let mut text = format!("# modes: {}\n", labels.join(" "));
        for row in graph.symbolic_matrix() {
            let cells: Vec<String> = row.iter().map(|c| csv_quote(c)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        text
    } else {
        let theta = match theta {
            Some(t) => t,
            None => cfg.theta()?,
        };
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Failure::Config(format!("theta must be finite and ≥ 0, got {theta}")));
        }
        let a = alpha_matrix_at(&graph, theta, cfg.rate()?);
        let mut text = a.to_csv();
        if theta == 0.0 {
            let sums: Vec<String> = a.column_sums().iter().map(|s| format_g15(*s)).collect();
            let _ = writeln!(text, "# column sums: {}", sums.join(","));
        }
        text
    };
    emit(out.or_else(|| cfg.output_path().map(Path::to_path_buf)).as_deref(), &text)
}

fn cmd_validate(
    config: Option<PathBuf>,
    suite: Option<Suite>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let cfg = match &config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let (plan, _) = cfg.sim_plan(seed)?;
    let tol = cfg.tolerances()?;
    let contour = ContourSpec::default();
    let (scope, checks): (&str, Vec<Check>) = match suite {
        Some(Suite::Full) => ("full", full_suite(&plan, &tol, &contour)?),
        None => ("scenario", check_scenario(&cfg.strategy()?, &cfg.qos()?, &plan, &tol, &contour)?),
    };
    for c in &checks {
        println!(
            "[{}] {} ({} points): {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.points,
            c.detail
        );
    }
    let passed = checks.iter().all(|c| c.passed);
    let summary = serde_json::json!({
        "suite": scope,
        "seed": plan.seed,
        "samples": plan.samples,
        "blocks": plan.blocks,
        "block_length": plan.block_length,
        "tolerances": {
            "se_multiple": tol.se_multiple,
            "ec_relative": tol.ec_relative,
            "outage_floor": tol.outage_floor,
            "confirm": tol.confirm,
        },
        "passed": passed,
        "checks": checks.iter().map(|c| serde_json::json!({
            "name": c.name,
            "passed": c.passed,
            "points": c.points,
            "worst": if c.worst.is_finite() { serde_json::json!(c.worst) } else { serde_json::json!(c.worst.to_string()) },
            "detail": c.detail,
        })).collect::<Vec<_>>(),
    });
    let json = serde_json::to_string_pretty(&summary).expect("summary serialises") + "\n";
    emit(out.as_deref(), &json)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("HARQ_EC_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("HARQ_EC_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot start {n} worker threads: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Outage { config, mc, seed, out } => cmd_outage(&ScenarioConfig::load(&config)?, mc, seed, out),
        Command::Ec { config, mc, seed, out } => cmd_ec(&ScenarioConfig::load(&config)?, mc, seed, out),
        Command::Matrix {
            config,
            theta,
            symbolic,
            out,
        } => cmd_matrix(&ScenarioConfig::load(&config)?, theta, symbolic, out),
        Command::Validate { config, suite, seed, out } => cmd_validate(config, suite, seed, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("harq-ec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
