use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use latmove_core::cli::{self, Subcommand as Cmd};
use latmove_core::config::{OutputFormat, Overrides, VariantChoice};

/// Lateral-movement risk analysis and roaming honeypot policy synthesis.
#[derive(Parser)]
#[command(name = "latmove", version, about)]
struct LatmoveCli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the network, policy and cost inputs satisfy every invariant.
    Validate(CommonArgs),
    /// Compute the vulnerability report (exact when the network is small
    /// enough, bounds always).
    Ltv(CommonArgs),
    /// Synthesize risky and/or conservative honeypot policies.
    Optimize(CommonArgs),
    /// Monte-Carlo estimate of the vulnerability.
    Simulate(CommonArgs),
    /// Closed-form bounds and exact trajectory under a fixed direct honey link.
    AnalyzeDirect(CommonArgs),
    /// Movement-deterrence bound and compromisability-threshold analysis.
    AnalyzeIndirect(CommonArgs),
    /// Estimate the service-link matrix from an authentication log.
    EstimateBeta(CommonArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Risky,
    Conservative,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonArgs {
    /// Self-contained run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Honeypot policy file; overrides the config.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Stage horizon.
    #[arg(long = "delta-k")]
    delta_k: Option<usize>,
    /// Monte-Carlo trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Which optimized policy to produce.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifact format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Stage-proxy window for beta estimation, in seconds.
    #[arg(long = "window-seconds")]
    window_seconds: Option<f64>,
    /// Skip the exact evaluator even when the network is small enough.
    #[arg(long = "bounds-only")]
    bounds_only: bool,
}

impl CommonArgs {
    fn into_parts(self) -> (PathBuf, Overrides) {
        let overrides = Overrides {
            policy: self.policy,
            delta_k: self.delta_k,
            trials: self.trials,
            seed: self.seed,
            variant: self.variant.map(|v| match v {
                VariantArg::Risky => VariantChoice::Risky,
                VariantArg::Conservative => VariantChoice::Conservative,
                VariantArg::Both => VariantChoice::Both,
            }),
            out: self.out,
            format: self.format.map(|f| match f {
                FormatArg::Json => OutputFormat::Json,
                FormatArg::Csv => OutputFormat::Csv,
            }),
            window_seconds: self.window_seconds,
            bounds_only: self.bounds_only,
        };
        (self.config, overrides)
    }
}

fn main() -> ExitCode {
    let parsed = LatmoveCli::parse();
    let (cmd, args) = match parsed.command {
        Command::Validate(a) => (Cmd::Validate, a),
        Command::Ltv(a) => (Cmd::Ltv, a),
        Command::Optimize(a) => (Cmd::Optimize, a),
        Command::Simulate(a) => (Cmd::Simulate, a),
        Command::AnalyzeDirect(a) => (Cmd::AnalyzeDirect, a),
        Command::AnalyzeIndirect(a) => (Cmd::AnalyzeIndirect, a),
        Command::EstimateBeta(a) => (Cmd::EstimateBeta, a),
    };
    let (config, overrides) = args.into_parts();
    ExitCode::from(cli::run(cmd, &config, &overrides) as u8)
}
