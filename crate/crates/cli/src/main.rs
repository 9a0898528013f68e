use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use community_gt::bounds::{combinatorial_bound, counting_bound, probabilistic_bound, ProbabilisticBoundOptions};
use community_gt::harness::{self, AnalysisSpec, ExperimentConfig, StructureSpec};
use community_gt::lbp::{self, harden, lbp_decode, nc_lbp_decode, FactorGraph};
use community_gt::structure::RandomStructureParams;
use community_gt::{CommunityStructure, InfectionParamsII, InfectionState, TestDesign, TestOutcomes};

#[derive(Parser)]
#[command(name = "cgt", version, about = "Group testing over overlapping communities")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "CGT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a structure JSON built from the config's structure spec.
    GenStructure {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Structure index (random structures are keyed by it).
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Shortcut for a random structure with this many communities.
        #[arg(long, requires = "members")]
        communities: Option<usize>,
        /// Target population for `--communities`.
        #[arg(long)]
        members: Option<usize>,
    },
    /// Counting and structure-aware lower bounds, as JSON.
    Bounds {
        #[arg(long)]
        structure: PathBuf,
        /// Infection state; enables the combinatorial bound.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Model II parameters; enables the probabilistic bound.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        exact_max_component: usize,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Adaptive algorithms: tests to exact recovery.
    SimAdaptive(ExperimentArgs),
    /// Non-adaptive designs and decoders over the T grid.
    SimNonadaptive {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Emit best-alpha FN/FP rates per (T, design, decoder) instead of raw rows.
        #[arg(long)]
        summary: bool,
    },
    /// Belief propagation on given outcomes, as JSON posteriors.
    DecodeLbp {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        /// Community structure; without it the i.i.d. prior `--p-iid` is used.
        #[arg(long, requires = "params")]
        structure: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, required_unless_present = "structure")]
        p_iid: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        z: f64,
        #[arg(long, default_value_t = lbp::DEFAULT_ITERS)]
        iters: usize,
        #[arg(long, default_value_t = lbp::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a closed-form formula, optionally swept over one parameter.
    Analysis {
        spec: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Closed-form error rates against simulation.
    ValidateFormulas(ExperimentArgs),
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    structures: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<usize>>,
    /// Add a wall-time column (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Bad or inconsistent configuration; exits with status 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                ExperimentConfig::from_json(&text).map_err(config_err)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.structures {
            cfg.structures = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.z {
            cfg.z = v;
        }
        if let Some(v) = &self.thetas {
            cfg.thetas = v.clone();
        }
        if let Some(v) = &self.t_grid {
            cfg.t_grid = v.clone();
        }
        if let Some(v) = &self.alpha_grid {
            cfg.alpha_grid = v.clone();
        }
        if let Some(v) = &self.c_grid {
            cfg.c_grid = v.clone();
        }
        cfg.timing |= self.timing;
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(output: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    emit(output, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(config_err)?;
    }
    match cli.command {
        Command::GenStructure {
            exp,
            index,
            communities,
            members,
        } => {
            let mut cfg = exp.load()?;
            if let (Some(f), Some(n)) = (communities, members) {
                let p = RandomStructureParams::scaled(f, n, 0);
                cfg.structure = StructureSpec::Random {
                    target_communities: p.target_communities,
                    size_range: p.size_range,
                    max_degree: p.max_degree,
                    degree_distribution: p.degree_distribution,
                };
            }
            let s = cfg.build_structure(index)?;
            emit_json(cfg.output.as_deref(), &serde_json::to_value(&s)?)
        }
        Command::Bounds {
            structure,
            state,
            params,
            exact_max_component,
            mc_samples,
            seed,
            output,
        } => {
            let s: CommunityStructure = read_json(&structure)?;
            let mut out = serde_json::Map::new();
            if let Some(p) = state {
                let state: InfectionState = read_json(&p)?;
                out.insert(
                    "counting".into(),
                    serde_json::to_value(counting_bound(s.n(), state.num_infected())?)?,
                );
                out.insert("combinatorial".into(), serde_json::to_value(combinatorial_bound(&s, &state)?)?);
            }
            if let Some(p) = params {
                let params: InfectionParamsII = read_json(&p)?;
                let opts = ProbabilisticBoundOptions {
                    exact_max_component,
                    mc_samples,
                    seed,
                };
                out.insert(
                    "probabilistic".into(),
                    serde_json::to_value(probabilistic_bound(&s, &params, &opts)?)?,
                );
            }
            if out.is_empty() {
                return Err(config_err("bounds needs --state and/or --params"));
            }
            emit_json(output.as_deref(), &out.into())
        }
        Command::SimAdaptive(exp) => {
            let cfg = exp.load()?;
            let rows = harness::run_adaptive_experiment(&cfg)?;
            let csv = harness::adaptive_table(&cfg, &rows).to_csv("adaptive", &cfg.hash())?;
            emit(cfg.output.as_deref(), &csv)
        }
        Command::SimNonadaptive { exp, summary } => {
            let cfg = exp.load()?;
            let rows = harness::run_nonadaptive_experiment(&cfg)?;
            let csv = if summary {
                harness::nonadaptive_summary_table(&harness::nonadaptive_summary(&rows))
                    .to_csv("nonadaptive_summary", &cfg.hash())?
            } else {
                harness::nonadaptive_table(&cfg, &rows).to_csv("nonadaptive", &cfg.hash())?
            };
            emit(cfg.output.as_deref(), &csv)
        }
        Command::DecodeLbp {
            design,
            outcomes,
            structure,
            params,
            p_iid,
            z,
            iters,
            threshold,
            output,
        } => {
            let d: TestDesign = read_json(&design)?;
            let y: TestOutcomes = read_json(&outcomes)?;
            let value = match (structure, params) {
                (Some(sp), Some(pp)) => {
                    let s: CommunityStructure = read_json(&sp)?;
                    let params: InfectionParamsII = read_json(&pp)?;
                    let g = FactorGraph::new(&s, &d, &params, z)?;
                    let b = lbp_decode(&g, &y, iters)?;
                    let members = b.member_probs();
                    serde_json::json!({
                        "member_probs": members,
                        "community_probs": b.community_probs(),
                        "estimate": harden(&members, threshold),
                        "iterations": b.iterations,
                    })
                }
                _ => {
                    let p = p_iid.expect("clap requires --p-iid here");
                    let members = nc_lbp_decode(&d, &y, p, z, iters)?;
                    serde_json::json!({
                        "member_probs": members,
                        "estimate": harden(&members, threshold),
                        "iterations": iters,
                    })
                }
            };
            emit_json(output.as_deref(), &value)
        }
        Command::Analysis { spec, output } => {
            let text = fs::read_to_string(&spec).map_err(|e| config_err(format!("{}: {e}", spec.display())))?;
            let spec = AnalysisSpec::from_json(&text).map_err(config_err)?;
            let table = spec.run()?;
            let hash = harness::sha256_hex(text.as_bytes());
            emit(output.as_deref(), &table.to_csv("analysis", &hash)?)
        }
        Command::ValidateFormulas(exp) => {
            let cfg = exp.load()?;
            let rows = harness::run_formula_validation(&cfg)?;
            let csv = harness::validation_table(&rows).to_csv("formula_validation", &cfg.hash())?;
            emit(cfg.output.as_deref(), &csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
