// SPDX-License-Identifier: Apache-2.0
//! Command-line front end: evaluate single encodings, seed datasets, run the
//! generation loop and the search baselines, drive ablations, export Verilog
//! and re-emit reports from journals.
//!
//! Exit codes: 0 success, 2 configuration error, 3 evaluation/runtime error.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use encopt_core::baselines::{binary_switching_search, random_search, BsaConfig, OracleEval};
use encopt_core::design::export_verilog;
use encopt_core::encoding::Encoding;
use encopt_core::orchestrator::{
    ablation_csv, augmentation_on_off, report, run_loop, runner, seed_dataset, ssl_epochs_sweep,
    DatasetStore, DesignChoice, LoopConfig, LoopError, LoopReport, RecommenderKind, RoundStats,
    TargetMetric,
};
use encopt_core::qor::{evaluate, DesignKind, Flow, StimulusConfig};
use std::path::PathBuf;

const EXIT_CONFIG: i32 = 2;
const EXIT_EVAL: i32 = 3;

#[derive(Parser)]
#[command(name = "encopt", about = "Operand-encoding design space exploration", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlowArg {
    Esprs,
    Full,
}

impl From<FlowArg> for Flow {
    fn from(f: FlowArg) -> Flow {
        match f {
            FlowArg::Esprs => Flow::Esprs,
            FlowArg::Full => Flow::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Cpx,
    Nt,
    Swact,
}

impl From<TargetArg> for TargetMetric {
    fn from(t: TargetArg) -> TargetMetric {
        match t {
            TargetArg::Cpx => TargetMetric::Cpx,
            TargetArg::Nt => TargetMetric::Nt,
            TargetArg::Swact => TargetMetric::Swact,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RecommenderArg {
    Ni,
    Naive,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Random,
    Bsa,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblateArg {
    Ssl,
    Aug,
}

/// Where an encoding comes from on the command line.
#[derive(Args)]
struct EncodingSource {
    /// Built-in two's-complement reference encoding.
    #[arg(long, conflicts_with_all = ["sm", "encoding_file", "encoding_json"])]
    tc: bool,
    /// Built-in sign-magnitude reference encoding.
    #[arg(long, conflicts_with_all = ["encoding_file", "encoding_json"])]
    sm: bool,
    /// Path to a JSON file {"rows": ["0011", ...]}.
    #[arg(long, conflicts_with = "encoding_json")]
    encoding_file: Option<PathBuf>,
    /// Inline JSON {"rows": [...]}.
    #[arg(long)]
    encoding_json: Option<String>,
}

impl EncodingSource {
    fn resolve(&self) -> Result<Encoding> {
        if self.tc {
            return Ok(Encoding::two_complement());
        }
        if self.sm {
            return Ok(Encoding::sign_magnitude());
        }
        if let Some(path) = &self.encoding_file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            return serde_json::from_str(&text).context("parsing encoding JSON");
        }
        if let Some(json) = &self.encoding_json {
            return serde_json::from_str(json).context("parsing encoding JSON");
        }
        Err(anyhow!("no encoding given; use --tc, --sm, --encoding-file or --encoding-json"))
    }
}

/// Flag overrides applied on top of the config file (or the defaults).
#[derive(Args)]
struct LoopOverrides {
    /// TOML config file mirroring the loop configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    flow: Option<FlowArg>,
    #[arg(long)]
    target: Option<TargetArg>,
    /// Optimize the FSM design family with this spec seed (default: multiplier).
    #[arg(long)]
    fsm_seed: Option<u64>,
    #[arg(long)]
    initial_size: Option<usize>,
    #[arg(long)]
    per_round: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    recommender: Option<RecommenderArg>,
    #[arg(long)]
    naive_pool: Option<usize>,
    #[arg(long, conflicts_with = "no_ssl")]
    ssl: bool,
    #[arg(long)]
    no_ssl: bool,
    #[arg(long, conflicts_with = "no_augmentation")]
    augmentation: bool,
    #[arg(long)]
    no_augmentation: bool,
    #[arg(long)]
    ssl_epochs: Option<usize>,
    #[arg(long)]
    ssl_samples_per_epoch: Option<usize>,
    #[arg(long)]
    finetune_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    ssl_lr: Option<f64>,
    #[arg(long)]
    finetune_lr: Option<f64>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    inv_epochs: Option<usize>,
    #[arg(long)]
    inv_lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    ramp_epochs: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    keep_fraction: Option<f64>,
    #[arg(long)]
    init_noise_std: Option<f64>,
    /// Stimulus pairs per simulation (20000 = reference scale).
    #[arg(long)]
    stimuli: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    stim_seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl LoopOverrides {
    fn build(&self, seed: Option<u64>) -> Result<LoopConfig> {
        let mut cfg: LoopConfig = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).context("parsing config file")?
            }
            None => LoopConfig::default(),
        };
        if let Some(f) = self.flow {
            cfg.flow = f.into();
        }
        if let Some(t) = self.target {
            cfg.target = t.into();
        }
        if let Some(s) = self.fsm_seed {
            cfg.design = DesignChoice::Fsm { spec_seed: s };
        }
        if let Some(v) = self.initial_size {
            cfg.initial_size = v;
        }
        if let Some(v) = self.per_round {
            cfg.per_round = v;
        }
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(r) = self.recommender {
            cfg.recommender = match r {
                RecommenderArg::Ni => RecommenderKind::Inversion,
                RecommenderArg::Naive => RecommenderKind::Naive,
            };
        }
        if let Some(v) = self.naive_pool {
            cfg.naive_pool = v;
        }
        if self.ssl {
            cfg.ssl = true;
        }
        if self.no_ssl {
            cfg.ssl = false;
        }
        if self.augmentation {
            cfg.train.augmentation = true;
        }
        if self.no_augmentation {
            cfg.train.augmentation = false;
        }
        if let Some(v) = self.ssl_epochs {
            cfg.train.ssl_epochs = v;
        }
        if let Some(v) = self.ssl_samples_per_epoch {
            cfg.train.ssl_samples_per_epoch = v;
        }
        if let Some(v) = self.finetune_epochs {
            cfg.train.finetune_epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.ssl_lr {
            cfg.train.ssl_lr = v;
        }
        if let Some(v) = self.finetune_lr {
            cfg.train.finetune_lr = v;
        }
        if let Some(v) = self.validation_fraction {
            cfg.train.validation_fraction = v;
        }
        if let Some(v) = self.inv_epochs {
            cfg.inversion.epochs = v;
        }
        if let Some(v) = self.inv_lr {
            cfg.inversion.lr = v;
        }
        if let Some(v) = self.lambda {
            cfg.inversion.lambda = v;
        }
        if let Some(v) = self.ramp_epochs {
            cfg.inversion.ramp_epochs = v;
        }
        if let Some(v) = self.tau {
            cfg.inversion.tau = v;
        }
        if let Some(v) = self.keep_fraction {
            cfg.inversion.keep_fraction = v;
        }
        if let Some(v) = self.init_noise_std {
            cfg.inversion.init_noise_std = v;
        }
        if let Some(v) = self.stimuli {
            cfg.stimulus.n_pairs = v;
        }
        if let Some(v) = self.sigma {
            cfg.stimulus.sigma = v;
        }
        if let Some(v) = self.stim_seed {
            cfg.stimulus.seed = v;
        }
        if let Some(s) = seed {
            cfg.seed = s;
            cfg.train.seed = s;
            cfg.inversion.seed = s;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        cfg.validate().map_err(LoopError::Config)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one encoding and print its QoR record as JSON.
    Eval {
        #[command(flatten)]
        source: EncodingSource,
        #[arg(long, value_enum, default_value = "esprs")]
        flow: FlowArg,
        /// Evaluate the FSM design family with this spec seed.
        #[arg(long)]
        fsm_seed: Option<u64>,
        #[arg(long, default_value_t = 2000)]
        stimuli: usize,
        #[arg(long, default_value_t = 3.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        stim_seed: u64,
    },
    /// Generate and evaluate the initial random dataset.
    Seed {
        #[command(flatten)]
        overrides: LoopOverrides,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full generation loop.
    Loop {
        #[command(flatten)]
        overrides: LoopOverrides,
        /// Master seed (mandatory: loops must be reproducible).
        #[arg(long)]
        seed: u64,
    },
    /// Run a surrogate-free search baseline and write its trace CSV.
    Baseline {
        #[arg(value_enum)]
        method: BaselineArg,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "esprs")]
        flow: FlowArg,
        #[arg(long, value_enum, default_value = "cpx")]
        target: TargetArg,
        #[arg(long)]
        fsm_seed: Option<u64>,
        #[arg(long, default_value_t = 2000)]
        stimuli: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a controlled ablation experiment.
    Ablate {
        #[arg(value_enum)]
        mode: AblateArg,
        #[command(flatten)]
        overrides: LoopOverrides,
        /// Comma-separated seeds, one arm set per seed.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// Pretraining checkpoints for the ssl sweep.
        #[arg(long, value_delimiter = ',', default_value = "0,50,100,200")]
        checkpoints: Vec<usize>,
    },
    /// Export an encoding's design as case-statement Verilog.
    ExportVerilog {
        #[command(flatten)]
        source: EncodingSource,
        #[arg(long)]
        fsm_seed: Option<u64>,
        #[arg(long, default_value = "design")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit report files from an existing journal.
    Report {
        #[arg(long)]
        journal: PathBuf,
        #[arg(long, value_enum, default_value = "cpx")]
        target: TargetArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long)]
        fsm_seed: Option<u64>,
    },
}

fn design_choice(fsm_seed: Option<u64>) -> DesignChoice {
    match fsm_seed {
        Some(spec_seed) => DesignChoice::Fsm { spec_seed },
        None => DesignChoice::Multiplier,
    }
}

fn design_kind_of(fsm_seed: Option<u64>) -> DesignKind {
    runner::design_kind(&design_choice(fsm_seed))
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    };
    std::process::exit(code);
}

/// Configuration problems exit 2, runtime/evaluation problems exit 3.
fn classify(err: &anyhow::Error) -> i32 {
    if let Some(loop_err) = err.downcast_ref::<LoopError>() {
        return match loop_err {
            LoopError::Config(_) => EXIT_CONFIG,
            _ => EXIT_EVAL,
        };
    }
    let text = format!("{err:#}");
    if text.contains("parsing") || text.contains("config") || text.contains("no encoding") {
        EXIT_CONFIG
    } else {
        EXIT_EVAL
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval { source, flow, fsm_seed, stimuli, sigma, stim_seed } => {
            let e = source.resolve()?;
            let kind = design_kind_of(fsm_seed);
            let stim =
                StimulusConfig { n_pairs: stimuli, sigma, seed: stim_seed, ..Default::default() };
            let record = evaluate(&e, &kind, flow.into(), &stim, 0)?;
            println!("{}", serde_json::to_string_pretty(&record)?);
            Ok(())
        }
        Command::Seed { overrides, seed } => {
            let cfg = overrides.build(Some(seed))?;
            let store = seed_dataset(&cfg).map_err(anyhow::Error::from)?;
            let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("encopt-out"));
            std::fs::create_dir_all(&out)?;
            store.write_journal(&out.join("journal.jsonl"))?;
            eprintln!("seeded {} designs -> {}", store.len(), out.display());
            println!("{}", store.len());
            Ok(())
        }
        Command::Loop { overrides, seed } => {
            let cfg = overrides.build(Some(seed))?;
            let (store, loop_report) = match run_loop(&cfg) {
                Ok(ok) => ok,
                Err((partial, e)) => {
                    // Prior rounds stay on disk for inspection.
                    if let Some(dir) = &cfg.out_dir {
                        std::fs::create_dir_all(dir)?;
                        partial.write_journal(&dir.join("journal.jsonl"))?;
                    }
                    return Err(e.into());
                }
            };
            let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("encopt-out"));
            report::emit(&store, &loop_report, &cfg.design, cfg.target, &out, 5)?;
            println!("{}", serde_json::to_string_pretty(&loop_report)?);
            Ok(())
        }
        Command::Baseline { method, budget, seed, flow, target, fsm_seed, stimuli, out } => {
            if budget == 0 {
                return Err(LoopError::Config("budget must be at least 1".into()).into());
            }
            let target: TargetMetric = target.into();
            let flow: Flow = flow.into();
            if target != TargetMetric::Cpx && flow != Flow::Full {
                return Err(
                    LoopError::Config(format!("target {target:?} requires the full flow")).into()
                );
            }
            let eval = OracleEval {
                kind: design_kind_of(fsm_seed),
                flow,
                stimulus: StimulusConfig { n_pairs: stimuli, ..Default::default() },
                target,
            };
            let trace = match method {
                BaselineArg::Random => random_search(budget, &eval, seed),
                BaselineArg::Bsa => {
                    binary_switching_search(budget, &eval, seed, &BsaConfig::default())
                }
            };
            let csv = trace.to_csv();
            match out {
                Some(path) => std::fs::write(&path, csv)?,
                None => print!("{csv}"),
            }
            eprintln!("final running min: {}", trace.final_min());
            Ok(())
        }
        Command::Ablate { mode, overrides, seeds, checkpoints } => {
            let cfg = overrides.build(None)?;
            let report = match mode {
                AblateArg::Ssl => {
                    ssl_epochs_sweep(&cfg, &checkpoints, &seeds).map_err(anyhow::Error::from)?
                }
                AblateArg::Aug => augmentation_on_off(&cfg, &seeds).map_err(anyhow::Error::from)?,
            };
            let csv = ablation_csv(&report);
            match &cfg.out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join("ablation.csv"), csv)?;
                    eprintln!("ablation written to {}", dir.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::ExportVerilog { source, fsm_seed, name, out } => {
            let e = source.resolve()?;
            let kind = design_kind_of(fsm_seed);
            let table = kind.truth_table(&e).map_err(|err| anyhow!(err))?;
            let verilog = export_verilog(&table, &name);
            match out {
                Some(path) => std::fs::write(&path, verilog)?,
                None => print!("{verilog}"),
            }
            Ok(())
        }
        Command::Report { journal, target, out, top_k, fsm_seed } => {
            let store = DatasetStore::replay(&journal)?;
            if store.is_empty() {
                return Err(LoopError::Config("journal contains no records".into()).into());
            }
            let target: TargetMetric = target.into();
            let max_round = store.records().iter().map(|r| r.round).max().unwrap_or(0);
            let mut rounds = Vec::new();
            let mut best_so_far = f64::INFINITY;
            for round in 0..=max_round {
                if let Some((min, mean, count)) = store.round_stats(round, target) {
                    best_so_far = best_so_far.min(min);
                    rounds.push(RoundStats { round, count, min, mean, best_so_far });
                }
            }
            let best = store
                .best(target)
                .ok_or_else(|| LoopError::Config("no record carries the target metric".into()))?;
            let loop_report = LoopReport {
                best_encoding: best.encoding,
                best_metric: best.metric(target).unwrap(),
                store_hash: store.hash(),
                evaluations: store.len(),
                rounds,
            };
            report::emit(&store, &loop_report, &design_choice(fsm_seed), target, &out, top_k)?;
            eprintln!(
                "report -> {} (best {} = {})",
                out.display(),
                best.metric(target).unwrap(),
                best.encoding
            );
            Ok(())
        }
    }
}
