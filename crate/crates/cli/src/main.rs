use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hybridsim::experiment::{analyze_cip, Experiment, ExperimentConfig};
use hybridsim::output;
use hybridsim::policies::PolicyKind;
use hybridsim::pricing::{split_grid, PricingConfig};
use hybridsim::sim::{write_event_log, RunOptions};
use hybridsim::trace::{gen_trace, load_trace, SpikeParams, TraceKind, TraceWorkload};
use hybridsim::traffic_monitor::estimate_series;

#[derive(Parser)]
#[command(name = "hybridsim", version, about = "Hybrid VM + FaaS provisioning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cost curves, cost-indifference points and hybrid split curves.
    AnalyzeCip(AnalyzeArgs),
    /// Generate a synthetic trace.
    GenTrace(GenArgs),
    /// Run one policy over a trace.
    Simulate(SimulateArgs),
    /// Run several policies over the same trace.
    Compare(CompareArgs),
    /// Run LIBRA for a list of phi values.
    SweepPhi(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Pricing TOML file.
    #[arg(long)]
    pricing: PathBuf,
    /// Experiment TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace file; overrides the config's [trace] table.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Divide every trace count by this factor.
    #[arg(long)]
    scale: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    pricing: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// VM type for the hybrid curve; defaults to the config's VM type.
    #[arg(long)]
    vm_type: Option<String>,
    #[arg(long, default_value_t = 40.0)]
    max_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// Rates at which to tabulate the hybrid split curve.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    hybrid_rate: Vec<f64>,
    /// Number of split intervals between 0 and 1.
    #[arg(long, default_value_t = 100)]
    grid: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GenArgs {
    /// Experiment TOML whose [trace.generate] table describes the trace.
    #[arg(long, conflicts_with = "kind")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["constant", "step", "diurnal", "bursty"])]
    kind: Option<String>,
    #[arg(long, default_value_t = 3600)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    rate: u64,
    #[arg(long, default_value_t = 2)]
    low: u64,
    #[arg(long, default_value_t = 40)]
    high: u64,
    #[arg(long)]
    switch_at: Option<usize>,
    #[arg(long, default_value_t = 50.0)]
    mean: f64,
    #[arg(long, default_value_t = 35.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 7200.0)]
    period: f64,
    #[arg(long, default_value_t = 0.04)]
    spike_prob: f64,
    #[arg(long, default_value_t = 1.0)]
    spike_height: f64,
    #[arg(long, default_value_t = 3)]
    spike_max_duration: u32,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    policy: PolicyKind,
    /// LIBRA phi; overrides the config.
    #[arg(long)]
    phi: Option<f64>,
    /// Write the per-event audit log (NDJSON) here.
    #[arg(long)]
    event_log: Option<PathBuf>,
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Policies to compare; all of them when absent.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<PolicyKind>,
    #[arg(long)]
    phi: Option<f64>,
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,4")]
    phi: Vec<f64>,
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Loads and validates every input before anything runs.
fn load_experiment(args: &ExperimentArgs, phi: Option<f64>) -> Result<Experiment> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(phi) = phi {
        cfg.libra.phi = phi;
    }
    let pricing = PricingConfig::load(&args.pricing)?;
    let trace = match &args.trace {
        Some(path) => load_trace(path, args.scale)?,
        None => {
            if let Some(section) = cfg.trace.as_mut() {
                if args.scale.is_some() {
                    section.scale = args.scale;
                }
            }
            match cfg.load_trace()? {
                Some(t) => t,
                None => bail!("no trace: pass --trace or add a [trace] table to the config"),
            }
        }
    };
    Ok(Experiment::new(trace, pricing, &cfg)?)
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let pricing = PricingConfig::load(&args.pricing)?;
    if !(args.step > 0.0 && args.max_rate > 0.0) {
        bail!("--step and --max-rate must be > 0");
    }
    let n = (args.max_rate / args.step).round() as usize;
    let rates: Vec<f64> = (0..=n).map(|i| i as f64 * args.step).collect();
    let vm = args.vm_type.as_deref().unwrap_or(&cfg.sim.vm_type);
    let analysis = analyze_cip(
        &pricing,
        &cfg.execution_model(),
        cfg.sim.request_mem,
        vm,
        &rates,
        &args.hybrid_rate,
        &split_grid(args.grid),
    )?;
    let text = match args.output.format {
        Format::Json => output::cost_curves_json(&analysis)?,
        Format::Csv => output::cost_curves_csv(&analysis),
    };
    emit(args.output.out.as_deref(), &text)
}

fn generate(args: &GenArgs) -> Result<()> {
    let trace: TraceWorkload = if let Some(path) = &args.config {
        let cfg = ExperimentConfig::load(path)?;
        let g = cfg
            .trace
            .and_then(|t| t.generate)
            .with_context(|| format!("{} has no [trace.generate] table", path.display()))?;
        gen_trace(g.kind, g.length, g.seed)?
    } else {
        let kind = match args.kind.as_deref() {
            Some("constant") => TraceKind::Constant { rate: args.rate },
            Some("step") => TraceKind::Step {
                low: args.low,
                high: args.high,
                switch_at: args.switch_at.unwrap_or(args.length / 2),
            },
            Some("diurnal") => TraceKind::Diurnal {
                mean: args.mean,
                amplitude: args.amplitude,
                period: args.period,
            },
            Some("bursty") => TraceKind::Bursty {
                mean: args.mean,
                amplitude: args.amplitude,
                period: args.period,
                spikes: SpikeParams {
                    probability: args.spike_prob,
                    height: args.spike_height,
                    max_duration: args.spike_max_duration,
                },
            },
            _ => bail!("pass --kind or --config"),
        };
        gen_trace(kind, args.length, args.seed)?
    };
    emit(args.out.as_deref(), &trace.to_lines())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let exp = load_experiment(&args.experiment, args.phi)?;
    let run = exp.run(
        args.policy,
        RunOptions {
            event_log: args.event_log.is_some(),
        },
    )?;
    if let (Some(path), Some(log)) = (&args.event_log, &run.event_log) {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_event_log(log, &mut w)?;
        w.flush()?;
    }
    let text = match args.output.format {
        Format::Json => {
            let estimates = if args.policy == PolicyKind::Libra {
                Some(estimate_series(&run.epoch_arrivals, &exp.monitor)?)
            } else {
                None
            };
            output::sim_report_json(&run.report, estimates.as_deref())?
        }
        Format::Csv => output::sim_report_csv(&run.report),
    };
    emit(args.output.out.as_deref(), &text)
}

fn compare(args: &CompareArgs) -> Result<()> {
    let exp = Arc::new(load_experiment(&args.experiment, args.phi)?);
    let kinds = if args.policy.is_empty() {
        PolicyKind::ALL.to_vec()
    } else {
        args.policy.clone()
    };
    let cmp = exp.compare(&kinds)?;
    let text = match args.output.format {
        Format::Json => output::comparison_json(&cmp)?,
        Format::Csv => output::comparison_csv(&cmp),
    };
    emit(args.output.out.as_deref(), &text)
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let exp = load_experiment(&args.experiment, None)?;
    let sweep = exp.sweep_phi(&args.phi)?;
    let text = match args.output.format {
        Format::Json => output::phi_sweep_json(&sweep)?,
        Format::Csv => output::phi_sweep_csv(&sweep),
    };
    emit(args.output.out.as_deref(), &text)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::AnalyzeCip(a) => analyze(a),
        Command::GenTrace(a) => generate(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::SweepPhi(a) => sweep(a),
    }
}
