use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};
use ommirt::pipeline::{run, Command, GateMode, Method, ResultBundle, RunConfig};
use ommirt::Error;
use ommirt_core::{Dimensionality, OtherVariant};

#[derive(Parser)]
#[command(name = "ommirt", version, about = "Staged Bayesian IRT models of self- and other-assessment")]
struct Cli {
    /// Worker threads for chains and independent fits (default: all cores).
    #[arg(long, env = "OMMIRT_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit the staged hierarchy and write draws, diagnostics and summaries.
    Fit(Common),
    /// Simulate an experiment and write the response table and truth.
    Simulate(Common),
    /// Score models by baseline, held-out, next-round, WAIC and PSIS-LOO.
    Evaluate(Common),
    /// Produce the model-comparison tables per counterpart group.
    Compare(Common),
    /// Simulate, fit and compare estimates with the generating values.
    Recover(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum DimsArg {
    #[value(name = "1")]
    One,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
enum GateArg {
    Strict,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Baseline,
    Heldout,
    NextRound,
    Waic,
    Loo,
}

#[derive(Args)]
struct Common {
    /// Response table (CSV or TSV).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "multi")]
    dims: DimsArg,
    /// Other-assessment variants, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "undifferentiated,differentiated_by_ability,fully_differentiated")]
    variants: Vec<String>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    target_accept: Option<f64>,
    /// Final sets per participant held out.
    #[arg(long, default_value_t = 4)]
    rounds_heldout: usize,
    #[arg(long, value_enum, default_value = "strict")]
    gate: GateArg,
    /// Score the first round in the next-round evaluation (from the prior).
    #[arg(long)]
    include_first_round: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "baseline,heldout,next-round,waic,loo")]
    methods: Vec<MethodArg>,
    /// Keep only participants with (`yes`) or without (`no`) feedback.
    #[arg(long, value_parser = parse_yes_no)]
    feedback: Option<bool>,
    /// Simulated participants (simulate, recover).
    #[arg(long, default_value_t = 20)]
    participants: usize,
    /// Generating other-assessment variant (simulate, recover).
    #[arg(long, default_value = "differentiated_by_ability")]
    true_variant: String,
    /// Generating ability dimensionality (simulate, recover).
    #[arg(long, value_enum, default_value = "multi")]
    true_dims: DimsArg,
    /// Equicorrelation of generated abilities.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Mean generated δ per topic.
    #[arg(long, default_value_t = 0.8)]
    delta_mean: f64,
}

fn parse_yes_no(s: &str) -> Result<bool, String> {
    match s {
        "yes" | "true" | "1" => Ok(true),
        "no" | "false" | "0" => Ok(false),
        _ => Err(format!("expected yes or no, got `{s}`")),
    }
}

fn dims(d: DimsArg) -> Dimensionality {
    match d {
        DimsArg::One => Dimensionality::One,
        DimsArg::Multi => Dimensionality::Multi,
    }
}

fn config(c: Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::new(c.out, c.seed);
    cfg.input = c.input;
    cfg.dims = dims(c.dims);
    cfg.variants = c.variants.iter().map(|v| v.parse::<OtherVariant>()).collect::<Result<_, _>>()?;
    cfg.warmup = c.warmup;
    cfg.samples = c.samples;
    cfg.chains = c.chains;
    cfg.target_accept = c.target_accept;
    cfg.rounds_heldout = c.rounds_heldout;
    cfg.gate = match c.gate {
        GateArg::Strict => GateMode::Strict,
        GateArg::Off => GateMode::Off,
    };
    cfg.include_first_round = c.include_first_round;
    cfg.methods = c
        .methods
        .iter()
        .map(|m| match m {
            MethodArg::Baseline => Method::Baseline,
            MethodArg::Heldout => Method::Heldout,
            MethodArg::NextRound => Method::NextRound,
            MethodArg::Waic => Method::Waic,
            MethodArg::Loo => Method::Loo,
        })
        .collect();
    cfg.feedback = c.feedback;
    cfg.simulation.participants = c.participants;
    cfg.simulation.variant = c.true_variant.parse()?;
    cfg.simulation.truth_dims = dims(c.true_dims);
    cfg.simulation.rho = c.rho;
    cfg.simulation.delta_mean = c.delta_mean;
    Ok(cfg)
}

fn report(bundle: &ResultBundle) {
    for t in &bundle.tables {
        println!("{}", t.render());
    }
    for s in &bundle.scores {
        println!(
            "{:<11} {:<26} {:<7} n={:<6} total={:>10.2} per_obs={:>8.4}",
            s.method, s.model, s.group, s.n_obs, s.total, s.per_obs
        );
    }
    if let Some(r) = &bundle.recovery {
        println!("ability correlation   {:.3}", r.ability_correlation);
        if let Some(e) = r.max_correlation_error {
            println!("max correlation error {e:.3}");
        }
        println!("sigma                 {:.3} (true {:.3})", r.sigma_estimate, r.sigma_true);
        if let Some(e) = r.delta_mean_abs_error {
            println!("delta mean abs error  {e:.3}");
        }
        if let Some(v) = &r.selected_variant {
            println!("selected variant      {v} (true {})", r.true_variant.as_str());
        }
    }
    for n in &bundle.notes {
        println!("{n}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("{e}");
            return ExitCode::from(1);
        }
    }
    let (command, common) = match cli.command {
        Sub::Fit(c) => (Command::Fit, c),
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Evaluate(c) => (Command::Evaluate, c),
        Sub::Compare(c) => (Command::Compare, c),
        Sub::Recover(c) => (Command::Recover, c),
    };
    let result = config(common).and_then(|cfg| {
        let bundle = run(command, &cfg)?;
        report(&bundle);
        info!("results written to {}", cfg.out.display());
        if !bundle.converged {
            return Err(Error::NotConverged { failures: bundle.gate_failures() });
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
