use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use macp_core::harness::{generate_scenario, sweep, RateMode, ScenarioConfig, SweepAxis};
use macp_core::reduction::{
    macdp_decide, spp_decide, spp_to_macdp, DecisionInstance, MacdpOutcome, SppInstance,
    SppOutcome,
};
use macp_core::simulator::{simulate_with_trace, write_trace_csv};
use macp_core::{
    cost_bruteforce, cost_closed_form, cost_unicast, exact_optimal, greedy_macp,
    popularity_placement, simulate, CachingPolicy, Instance, SimConfig, SimMode, SolverReport,
};

#[derive(Parser)]
#[command(name = "macp", version, about = "Multicast-aware cache placement toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance from a scenario config.
    Generate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a caching policy for an instance.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Algorithm::Greedy)]
        algorithm: Algorithm,
        /// Write the full report (policy, objective, trace) here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the bare policy matrix here.
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// Expected cost per period of a policy.
    Evaluate {
        instance: PathBuf,
        policy: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::ClosedForm)]
        method: Method,
    },
    /// Monte Carlo estimate of the cost per period.
    Simulate {
        instance: PathBuf,
        policy: PathBuf,
        #[arg(long, default_value = "multicast")]
        mode: SimMode,
        #[arg(long, default_value_t = 100_000)]
        periods: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-period CSV trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Map a set packing instance to a threshold decision instance.
    Reduce {
        spp: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide a set packing instance (either side of the reduction) or a
    /// decision instance given with --decision.
    Decide {
        spp: Option<PathBuf>,
        #[arg(long, conflicts_with = "spp")]
        decision: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Procedure::Both)]
        procedure: Procedure,
    },
    /// Compare the three schemes along one scenario parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values; defaults to the standard grid.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 5)]
        replications: usize,
        #[arg(long, overrides_with = "analytic_only")]
        simulate: bool,
        #[arg(long, overrides_with = "simulate")]
        analytic_only: bool,
        /// Simulated periods per scheme and replication.
        #[arg(long, default_value_t = 10_000)]
        periods: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Greedy,
    Popularity,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    ClosedForm,
    Bruteforce,
    Unicast,
}

#[derive(Clone, Copy, ValueEnum)]
enum Procedure {
    Spp,
    Macdp,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum RateModeArg {
    PerScbsTotal,
    PerPair,
}

/// Scenario parameters; flags override values read from `--config`.
#[derive(Args)]
struct ScenarioArgs {
    /// ScenarioConfig JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    num_scbs: Option<usize>,
    #[arg(long)]
    num_files: Option<usize>,
    #[arg(long)]
    cache_size: Option<usize>,
    #[arg(long)]
    deadline: Option<f64>,
    #[arg(long)]
    zipf_shape: Option<f64>,
    #[arg(long)]
    rate_low: Option<f64>,
    #[arg(long)]
    rate_high: Option<f64>,
    #[arg(long)]
    cost_backhaul: Option<f64>,
    #[arg(long)]
    cost_mbs_tx: Option<f64>,
    #[arg(long)]
    cost_scbs: Option<f64>,
    #[arg(long, value_enum)]
    rate_mode: Option<RateModeArg>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg: ScenarioConfig = match &self.config {
            Some(path) => serde_json::from_str(&read(path)?)
                .with_context(|| format!("parsing scenario config {}", path.display()))?,
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(num_scbs, num_files, cache_size, deadline, zipf_shape, rate_low, rate_high);
        set!(cost_backhaul, cost_mbs_tx, cost_scbs, seed);
        if let Some(mode) = self.rate_mode {
            cfg.rate_mode = match mode {
                RateModeArg::PerScbsTotal => RateMode::PerScbsTotal,
                RateModeArg::PerPair => RateMode::PerPair,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::from_json(&read(path)?).with_context(|| format!("loading instance {}", path.display()))
}

fn load_policy(path: &Path) -> Result<CachingPolicy> {
    CachingPolicy::from_json(&read(path)?).with_context(|| format!("loading policy {}", path.display()))
}

/// Pretty JSON to `out`, or stdout.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().lock().write_all(text.as_bytes())?),
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    algorithm: &'static str,
    #[serde(flatten)]
    report: &'a SolverReport,
}

#[derive(Serialize)]
struct DecideOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    spp: Option<SppOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    macdp: Option<MacdpOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agree: Option<bool>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { scenario, out } => {
            let instance = generate_scenario(&scenario.resolve()?)?;
            emit(&instance, out.as_deref())
        }
        Command::Solve {
            instance,
            algorithm,
            out,
            policy_out,
        } => {
            let inst = load_instance(&instance)?;
            let (name, report) = match algorithm {
                Algorithm::Greedy => ("greedy", greedy_macp(&inst)),
                Algorithm::Exact => ("exact", exact_optimal(&inst)?),
                Algorithm::Popularity => {
                    let policy = popularity_placement(&inst);
                    let objective = cost_closed_form(&inst, &policy)?.total;
                    let report = SolverReport {
                        policy,
                        objective,
                        trace: Vec::new(),
                        evaluations: 0,
                    };
                    ("popularity", report)
                }
            };
            if let Some(path) = &policy_out {
                emit(&report.policy, Some(path))?;
            }
            emit(
                &SolveOutput {
                    algorithm: name,
                    report: &report,
                },
                out.as_deref(),
            )
        }
        Command::Evaluate {
            instance,
            policy,
            method,
        } => {
            let inst = load_instance(&instance)?;
            let pol = load_policy(&policy)?;
            let breakdown = match method {
                Method::ClosedForm => cost_closed_form(&inst, &pol)?,
                Method::Bruteforce => cost_bruteforce(&inst, &pol)?,
                Method::Unicast => cost_unicast(&inst, &pol)?,
            };
            emit(&breakdown, None)
        }
        Command::Simulate {
            instance,
            policy,
            mode,
            periods,
            seed,
            trace,
        } => {
            let inst = load_instance(&instance)?;
            let pol = load_policy(&policy)?;
            let config = SimConfig { periods, mode, seed };
            let report = match &trace {
                Some(path) => {
                    let (report, records) = simulate_with_trace(&inst, &pol, &config)?;
                    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    write_trace_csv(&records, io::BufWriter::new(file))?;
                    report
                }
                None => simulate(&inst, &pol, &config)?,
            };
            emit(&report, None)
        }
        Command::Reduce { spp, out } => {
            let instance = SppInstance::from_json(&read(&spp)?)?;
            emit(&spp_to_macdp(&instance)?, out.as_deref())
        }
        Command::Decide {
            spp,
            decision,
            procedure,
        } => {
            let output = match (spp, decision) {
                (_, Some(path)) => {
                    let d: DecisionInstance = serde_json::from_str(&read(&path)?)?;
                    DecideOutput {
                        spp: None,
                        macdp: Some(macdp_decide(&d)?),
                        agree: None,
                    }
                }
                (Some(path), None) => {
                    let instance = SppInstance::from_json(&read(&path)?)?;
                    let spp = match procedure {
                        Procedure::Spp | Procedure::Both => Some(spp_decide(&instance)?),
                        Procedure::Macdp => None,
                    };
                    let macdp = match procedure {
                        Procedure::Macdp | Procedure::Both => {
                            Some(macdp_decide(&spp_to_macdp(&instance)?)?)
                        }
                        Procedure::Spp => None,
                    };
                    let agree = match (&spp, &macdp) {
                        (Some(s), Some(m)) => Some(s.satisfiable == m.satisfiable),
                        _ => None,
                    };
                    DecideOutput { spp, macdp, agree }
                }
                (None, None) => bail!("decide needs an SPP instance path or --decision"),
            };
            emit(&output, None)
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            replications,
            simulate,
            analytic_only: _,
            periods,
            out,
        } => {
            let cfg = scenario.resolve()?;
            let values = values.unwrap_or_else(|| axis.default_values(&cfg));
            let result = sweep(&cfg, axis, &values, replications, simulate.then_some(periods))?;
            match &out {
                Some(path) => {
                    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    result.write_csv(io::BufWriter::new(file))?;
                }
                None => result.write_csv(io::stdout().lock())?,
            }
            let h = result.headline();
            eprintln!(
                "{axis}: max reduction of MAC-MT vs PAC-MT {:.1}% at {}, vs PAC-UT {:.1}% at {} (seed {}, {} replications)",
                100.0 * h.max_reduction_vs_pac_mt,
                h.at_value_vs_pac_mt,
                100.0 * h.max_reduction_vs_pac_ut,
                h.at_value_vs_pac_ut,
                h.seed,
                replications,
            );
            Ok(())
        }
    }
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
