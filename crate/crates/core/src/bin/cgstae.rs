use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cgstae::config::ExperimentConfig;
use cgstae::diagnosis::SearchMode;
use cgstae::harness::{
    model_gradcheck, read_json, run_ablations, write_json, write_synth_experiment, Experiment,
    SynthOptions,
};
use cgstae::{CgstaeError, Result};

#[derive(Parser)]
#[command(name = "cgstae", version, about = "Causal-graph autoencoder process monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// experiment TOML file
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Step 1: pre-train on correlation graphs
    Train(ConfigArg),
    /// Step 2: learn the causal graph with the model frozen
    LearnGraph(ConfigArg),
    /// Step 3: fine-tune the autoencoder on the causal graph
    Finetune(ConfigArg),
    /// Fit T2/SPE statistics and control limits on the training data
    Monitor(ConfigArg),
    /// Detection metrics on every test set
    Evaluate(ConfigArg),
    /// Root-cause subgraph for one test set
    Diagnose {
        #[command(flatten)]
        cfg: ConfigArg,
        /// test set name
        #[arg(long)]
        test: String,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Write a synthetic experiment (data, truth, prior, config)
    SynthGen {
        #[arg(long)]
        out: PathBuf,
        /// TOML with SynthOptions fields; flags below override it
        #[arg(long)]
        options: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        edges: Option<usize>,
        #[arg(long)]
        regimes: Option<usize>,
        #[arg(long)]
        fault_magnitude: Option<f64>,
    },
    /// Finite-difference check of the analytic gradients
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train, monitor and evaluate end to end; optionally every ablation
    Report {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        ablation: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Auto,
    Exact,
    Greedy,
}

impl From<ModeArg> for SearchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => SearchMode::Auto,
            ModeArg::Exact => SearchMode::Exact,
            ModeArg::Greedy => SearchMode::Greedy,
        }
    }
}

fn load(path: &Path) -> Result<Experiment> {
    let cfg = ExperimentConfig::load(path)?;
    if let Some(t) = cfg.run.threads {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(Experiment::new(cfg))
}

fn print<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let best = load(&c.config)?.stage_train()?;
            print(&serde_json::json!({ "stage": "train", "best_val": best }))
        }
        Command::LearnGraph(c) => print(&load(&c.config)?.stage_graph()?),
        Command::Finetune(c) => print(&load(&c.config)?.stage_finetune()?),
        Command::Monitor(c) => {
            let m = load(&c.config)?.stage_monitor()?;
            print(&serde_json::json!({
                "alpha_t2": m.alpha_t2,
                "alpha_spe": m.alpha_spe,
                "significance": m.significance,
            }))
        }
        Command::Evaluate(c) => print(&load(&c.config)?.stage_evaluate()?),
        Command::Diagnose {
            cfg,
            test,
            delta,
            mode,
        } => {
            let mut exp = load(&cfg.config)?;
            if let Some(d) = delta {
                exp.cfg.diagnosis.delta = d;
            }
            if let Some(m) = mode {
                exp.cfg.diagnosis.mode = m.into();
            }
            print(&exp.stage_diagnose(&test)?)
        }
        Command::SynthGen {
            out,
            options,
            seed,
            n,
            edges,
            regimes,
            fault_magnitude,
        } => {
            let mut opts = match options {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| {
                        CgstaeError::Config(format!("{}: {e}", p.display()))
                    })?;
                    toml::from_str(&text).map_err(|e| CgstaeError::Config(e.to_string()))?
                }
                None => SynthOptions::default(),
            };
            opts.seed = seed.unwrap_or(opts.seed);
            opts.n = n.unwrap_or(opts.n);
            opts.edges = edges.unwrap_or(opts.edges);
            opts.regimes = regimes.unwrap_or(opts.regimes);
            opts.fault_magnitude = fault_magnitude.unwrap_or(opts.fault_magnitude);
            let path = write_synth_experiment(&opts, &out)?;
            print(&serde_json::json!({ "config": path }))
        }
        Command::Gradcheck { seed } => {
            let r = model_gradcheck(seed)?;
            print(&serde_json::json!({
                "seed": seed,
                "pretrain_max_rel_error": r.pretrain.max_rel_error,
                "graph_logits_max_rel_error": r.graph_logits.max_rel_error,
                "max_rel_error": r.max_rel_error(),
            }))?;
            if r.max_rel_error() < 1e-4 {
                Ok(())
            } else {
                Err(CgstaeError::Numeric(format!(
                    "gradient check failed: max relative error {:e}",
                    r.max_rel_error()
                )))
            }
        }
        Command::Report { cfg, ablation } => {
            let exp = load(&cfg.config)?;
            if ablation {
                return print(&run_ablations(&exp.cfg)?);
            }
            let summary = exp.run_all()?;
            write_json(&exp.run.path("report.json"), &summary)?;
            let metrics: serde_json::Value = read_json(&exp.run.metrics())?;
            print(&serde_json::json!({ "summary": summary, "metrics": metrics }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(if matches!(e, CgstaeError::StageOrder { .. }) { 3 } else { 1 })
        }
    }
}
