//! Subcommand dispatch shared by the `latmove` binary and tests.
//!
//! Exit codes: 0 success, 1 input/validation failure, 2 runtime error.
//! Warnings (clamped probabilities, cap fallbacks, non-convergence) go to
//! stderr; artifacts go to `--out` or stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::auth::{estimate_beta, read_auth_csv, AuthError};
use crate::config::{ConfigError, OutputFormat, Overrides, RunConfig, VariantChoice};
use crate::heuristics::{
    indirect_bound, pomd, toc_limit, verify_residue, HeuristicsError, TocLimit,
};
use crate::ltv::{vulnerability_report, LtvError};
use crate::matrix::SquareMatrix;
use crate::mc::{estimate_ltv, McError};
use crate::metrics::{CostTable, RawCostTable};
use crate::net_model::{validate_network, NetworkSpec, PolicyError, PolicyMatrix, RawNetwork, ValidationErrors};
use crate::policy_opt::{optimize, OptimizationTrace, OptimizeVariant, PolicyOptError};
use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Validate,
    Ltv,
    Optimize,
    Simulate,
    AnalyzeDirect,
    AnalyzeIndirect,
    EstimateBeta,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    ReadFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {detail}")]
    ParseFile { path: PathBuf, detail: String },
    #[error("network validation failed:\n{0}")]
    Network(#[from] ValidationErrors),
    #[error("policy validation failed: {0}")]
    Policy(#[from] PolicyError),
    #[error("config field `{field}` required for this subcommand: {hint}")]
    MissingField { field: &'static str, hint: String },
    #[error("unknown node id `{id}` in config field `{field}`")]
    UnknownNode { field: &'static str, id: String },
    #[error("auth log problem: {0}")]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Ltv(#[from] LtvError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Heuristics(#[from] HeuristicsError),
    #[error("optimization failed: {0}")]
    Opt(String),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::ReadFile { .. }
            | CliError::ParseFile { .. }
            | CliError::Network(_)
            | CliError::Policy(_)
            | CliError::MissingField { .. }
            | CliError::UnknownNode { .. }
            | CliError::Auth(_)
            | CliError::Opt(_) => 1,
            CliError::Ltv(_) | CliError::Mc(_) | CliError::Heuristics(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 2,
        }
    }
}

/// Loads config, runs the subcommand, prints errors, returns the exit code.
pub fn run(sub: Subcommand, config_path: &Path, overrides: &Overrides) -> i32 {
    let config = match RunConfig::load(config_path, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match dispatch(sub, &config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(sub: Subcommand, config: &RunConfig) -> Result<(), CliError> {
    match sub {
        Subcommand::Validate => cmd_validate(config),
        Subcommand::Ltv => cmd_ltv(config),
        Subcommand::Optimize => cmd_optimize(config),
        Subcommand::Simulate => cmd_simulate(config),
        Subcommand::AnalyzeDirect => cmd_analyze_direct(config),
        Subcommand::AnalyzeIndirect => cmd_analyze_indirect(config),
        Subcommand::EstimateBeta => cmd_estimate_beta(config),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::ReadFile {
        path: path.to_path_buf(),
        source,
    })
}

fn load_network(config: &RunConfig) -> Result<NetworkSpec, CliError> {
    let text = read_text(&config.network)?;
    let raw: RawNetwork = serde_json::from_str(&text).map_err(|e| CliError::ParseFile {
        path: config.network.clone(),
        detail: e.to_string(),
    })?;
    let (spec, warnings) = validate_network(&raw)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(spec)
}

/// Policy files hold either a bare `[[...]]` matrix or `{"gamma": [[...]]}`.
fn load_policy(config: &RunConfig, spec: &NetworkSpec) -> Result<Option<PolicyMatrix>, CliError> {
    let Some(path) = &config.policy else {
        return Ok(None);
    };
    let text = read_text(path)?;
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum PolicyFile {
        Bare(SquareMatrix),
        Tagged { gamma: SquareMatrix },
    }
    let parsed: PolicyFile = serde_json::from_str(&text).map_err(|e| CliError::ParseFile {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    let gamma = match parsed {
        PolicyFile::Bare(g) | PolicyFile::Tagged { gamma: g } => g,
    };
    Ok(Some(PolicyMatrix::new(spec, gamma)?))
}

/// Default analysis policy: the uniform feasible policy, or no honeypot at
/// all when the network admits none.
fn policy_or_default(config: &RunConfig, spec: &NetworkSpec) -> Result<PolicyMatrix, CliError> {
    match load_policy(config, spec)? {
        Some(p) => Ok(p),
        None => match PolicyMatrix::uniform(spec) {
            Ok(p) => Ok(p),
            Err(PolicyError::EmptyFeasibleSet) => {
                eprintln!("warning: no feasible honey link; using the no-honeypot policy");
                Ok(PolicyMatrix::zero(spec))
            }
            Err(e) => Err(e.into()),
        },
    }
}

fn load_costs(config: &RunConfig) -> Result<CostTable, CliError> {
    let Some(path) = &config.costs else {
        return Ok(CostTable::Zero);
    };
    let text = read_text(path)?;
    let raw: RawCostTable = serde_json::from_str(&text).map_err(|e| CliError::ParseFile {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    CostTable::from_raw(Some(raw)).map_err(|detail| CliError::ParseFile {
        path: path.clone(),
        detail,
    })
}

fn with_output<F>(out: Option<&Path>, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match out {
        Some(path) => {
            let mut file = fs::File::create(path)?;
            f(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

fn resolve_node(spec: &NetworkSpec, id: &str, field: &'static str) -> Result<usize, CliError> {
    spec.index_of(id).ok_or_else(|| CliError::UnknownNode {
        field,
        id: id.to_string(),
    })
}

fn cmd_validate(config: &RunConfig) -> Result<(), CliError> {
    let spec = load_network(config)?;
    let policy = load_policy(config, &spec)?;
    let costs = load_costs(config)?;
    with_output(config.out.as_deref(), |out| {
        writeln!(
            out,
            "network ok: {} nodes, dmz {:?}, target {}",
            spec.n(),
            spec.dmz()
                .iter()
                .map(|&i| spec.node_id(i))
                .collect::<Vec<_>>(),
            spec.node_id(spec.target()),
        )?;
        if let Some(p) = &policy {
            writeln!(out, "policy ok: total mass {}", p.total_mass())?;
        }
        if !matches!(costs, CostTable::Zero) {
            writeln!(out, "cost table ok")?;
        }
        Ok(())
    })
}

fn cmd_ltv(config: &RunConfig) -> Result<(), CliError> {
    let spec = load_network(config)?;
    let policy = policy_or_default(config, &spec)?;
    if spec.n() > crate::ltv::BOUNDS_NODE_CAP {
        return Err(CliError::Opt(format!(
            "{} nodes exceed the bound-recursion cap {}; use `simulate` for networks this large",
            spec.n(),
            crate::ltv::BOUNDS_NODE_CAP
        )));
    }
    let mut bounds_only = config.bounds_only;
    if !bounds_only && spec.n() > config.exact_cap {
        eprintln!(
            "warning: {} nodes exceed the exact-evaluation cap {}; emitting bounds only",
            spec.n(),
            config.exact_cap
        );
        bounds_only = true;
    }
    let report = vulnerability_report(&spec, &policy, config.delta_k, config.exact_cap, bounds_only)?;
    match config.format {
        OutputFormat::Json => {
            with_output(config.out.as_deref(), |out| {
                report::write_json(out, &report).map_err(Into::into)
            })
        }
        OutputFormat::Csv => with_output(config.out.as_deref(), |out| {
            report::write_vulnerability_csv(out, &report).map_err(Into::into)
        }),
    }
}

/// Serialized per-variant optimization result: final policy plus the trace
/// numbers (iterates are omitted from artifacts; the CSV trace carries the
/// same information).
#[derive(Serialize)]
struct OptimizeArtifact {
    variant: String,
    converged: bool,
    iterations_used: usize,
    objective_values: Vec<f64>,
    step_norms: Vec<f64>,
    policy: SquareMatrix,
}

fn run_variant(
    config: &RunConfig,
    spec: &NetworkSpec,
    costs: &CostTable,
    variant: OptimizeVariant,
) -> Result<(PolicyMatrix, OptimizationTrace), CliError> {
    let gamma_0 = load_policy(config, spec)?;
    match optimize(
        spec,
        &config.weights.to_weights(),
        costs,
        config.cor_weighting,
        config.delta_k,
        variant,
        config.epsilon,
        config.max_iter,
        gamma_0,
    ) {
        Ok(pair) => Ok(pair),
        Err(PolicyOptError::DidNotConverge {
            max_iter,
            last_step,
            policy,
            trace,
        }) => {
            eprintln!(
                "warning: {variant:?} optimization did not converge in {max_iter} iterations \
                 (last step {last_step:e}); emitting the final iterate"
            );
            Ok((policy, *trace))
        }
        Err(PolicyOptError::EmptyFeasibleSet) => {
            Err(CliError::Opt("no feasible honey link to optimize over".into()))
        }
        Err(PolicyOptError::Ltv(e)) => Err(e.into()),
        Err(PolicyOptError::Policy(e)) => Err(e.into()),
    }
}

fn variant_list(choice: VariantChoice) -> Vec<OptimizeVariant> {
    match choice {
        VariantChoice::Risky => vec![OptimizeVariant::Risky],
        VariantChoice::Conservative => vec![OptimizeVariant::Conservative],
        VariantChoice::Both => vec![OptimizeVariant::Risky, OptimizeVariant::Conservative],
    }
}

fn variant_name(v: OptimizeVariant) -> &'static str {
    match v {
        OptimizeVariant::Risky => "risky",
        OptimizeVariant::Conservative => "conservative",
    }
}

/// Derives `trace.risky.csv` from `trace.csv` when several variants share
/// one `--out`.
fn suffixed_path(path: &Path, suffix: &str) -> PathBuf {
    match path.extension() {
        Some(ext) => {
            let stem = path.with_extension("");
            PathBuf::from(format!(
                "{}.{}.{}",
                stem.display(),
                suffix,
                ext.to_string_lossy()
            ))
        }
        None => PathBuf::from(format!("{}.{}", path.display(), suffix)),
    }
}

fn cmd_optimize(config: &RunConfig) -> Result<(), CliError> {
    let spec = load_network(config)?;
    let costs = load_costs(config)?;
    let variants = variant_list(config.variant);
    let mut artifacts = Vec::new();
    for v in &variants {
        let (policy, trace) = run_variant(config, &spec, &costs, *v)?;
        artifacts.push((*v, policy, trace));
    }
    match config.format {
        OutputFormat::Json => {
            let payload: Vec<OptimizeArtifact> = artifacts
                .iter()
                .map(|(v, policy, trace)| OptimizeArtifact {
                    variant: variant_name(*v).to_string(),
                    converged: trace.converged,
                    iterations_used: trace.iterations_used,
                    objective_values: trace.objective_values.clone(),
                    step_norms: trace.step_norms.clone(),
                    policy: policy.matrix().clone(),
                })
                .collect();
            with_output(config.out.as_deref(), |out| {
                report::write_json(out, &payload).map_err(Into::into)
            })
        }
        OutputFormat::Csv => {
            for (v, policy, trace) in &artifacts {
                let trace_target = config.out.as_deref().map(|p| {
                    if variants.len() > 1 {
                        suffixed_path(p, variant_name(*v))
                    } else {
                        p.to_path_buf()
                    }
                });
                with_output(trace_target.as_deref(), |out| {
                    report::write_trace_csv(out, trace).map_err(Into::into)
                })?;
                if let Some(p) = &trace_target {
                    // the policy itself rides alongside the csv trace
                    let policy_path = suffixed_path(p, "policy").with_extension("json");
                    with_output(Some(&policy_path), |out| {
                        report::write_json(out, policy.matrix()).map_err(Into::into)
                    })?;
                } else {
                    eprintln!(
                        "warning: csv traces on stdout omit the {} policy matrix; \
                         pass --out or use --format json",
                        variant_name(*v)
                    );
                }
            }
            Ok(())
        }
    }
}

fn cmd_simulate(config: &RunConfig) -> Result<(), CliError> {
    let spec = load_network(config)?;
    let policy = policy_or_default(config, &spec)?;
    let estimate = estimate_ltv(
        &spec,
        &policy,
        config.delta_k,
        config.trials,
        config.seed,
        config.level,
    )?;
    match config.format {
        OutputFormat::Json => with_output(config.out.as_deref(), |out| {
            report::write_json(out, &estimate).map_err(Into::into)
        }),
        OutputFormat::Csv => with_output(config.out.as_deref(), |out| {
            report::write_estimate_csv(out, &estimate).map_err(Into::into)
        }),
    }
}

#[derive(Serialize)]
struct DirectArtifact {
    pomd: f64,
    report: crate::heuristics::ResidueReport,
}

fn cmd_analyze_direct(config: &RunConfig) -> Result<(), CliError> {
    let spec = load_network(config)?;
    let direct = config.direct.as_ref().ok_or(CliError::MissingField {
        field: "direct",
        hint: "expected {\"initial\": <node id>, \"honeypot\": <node id>}".into(),
    })?;
    let i = resolve_node(&spec, &direct.initial, "direct.initial")?;
    let w0 = resolve_node(&spec, &direct.honeypot, "direct.honeypot")?;
    let report = verify_residue(&spec, i, w0, direct.horizon_cap, config.exact_cap)?;
    let r = pomd(&spec, i)?;
    let beta_lambda = report.analysis.beta_lambda;
    let eq9: Vec<f64> = (0..=direct.horizon_cap)
        .map(|d| indirect_bound(r, beta_lambda, d))
        .collect();
    match config.format {
        OutputFormat::Json => with_output(config.out.as_deref(), |out| {
            report::write_json(out, &DirectArtifact { pomd: r, report }).map_err(Into::into)
        }),
        OutputFormat::Csv => {
            let rows = report::sweep_rows_from_residue(&report, &eq9);
            with_output(config.out.as_deref(), |out| {
                report::write_sweep_csv(out, &rows).map_err(Into::into)
            })
        }
    }
}

#[derive(Serialize)]
struct TocEntry {
    m: f64,
    n: f64,
    beta_lambda: f64,
    limit: f64,
    regime: crate::heuristics::Regime,
    bound_at_horizon: f64,
}

#[derive(Serialize)]
struct IndirectArtifact {
    initial: String,
    pomd: f64,
    beta_lambda: f64,
    exact_available: bool,
    exact: Vec<f64>,
    eq9_bound: Vec<f64>,
    toc: Vec<TocEntry>,
}

/// Uniform policy over feasible links avoiding source `i`; the default
/// stand-in for an indirect policy.
fn uniform_indirect(spec: &NetworkSpec, i: usize) -> PolicyMatrix {
    let pairs: Vec<(usize, usize)> = spec
        .feasible_pairs()
        .into_iter()
        .filter(|&(l, _)| l != i)
        .collect();
    if pairs.is_empty() {
        return PolicyMatrix::zero(spec);
    }
    let mut gamma = SquareMatrix::zeros(spec.n());
    let p = 1.0 / pairs.len() as f64;
    for (l, w) in pairs {
        gamma.set(l, w, p);
    }
    PolicyMatrix::new(spec, gamma).expect("uniform indirect is feasible")
}

fn cmd_analyze_indirect(config: &RunConfig) -> Result<(), CliError> {
    let spec = load_network(config)?;
    let defaults = crate::config::IndirectConfig {
        initial: None,
        m: vec![0.5, 1.0, 2.0],
        n: vec![0.5, 1.0, 2.0],
        delta_k_max: 100_000,
        horizon_cap: 10,
    };
    let params = config.indirect.as_ref().unwrap_or(&defaults);
    let i = match &params.initial {
        Some(id) => resolve_node(&spec, id, "indirect.initial")?,
        None => spec.dmz()[0],
    };
    let policy = match load_policy(config, &spec)? {
        Some(p) => {
            if !(0..spec.n()).all(|w| p.get(i, w) == 0.0) {
                eprintln!(
                    "warning: provided policy has honey links from node {}; \
                     this is not an indirect policy and the deterrence bound may not apply",
                    spec.node_id(i)
                );
            }
            p
        }
        None => uniform_indirect(&spec, i),
    };
    let r = pomd(&spec, i)?;
    let beta_lambda = spec.beta(i, spec.target()) * spec.lambda(i, spec.target());
    let exact_available = spec.n() <= config.exact_cap;
    let exact = if exact_available {
        crate::ltv::ltv_exact_single(&spec, &policy, params.horizon_cap, i, config.exact_cap)?
            .values
    } else {
        Vec::new()
    };
    let eq9: Vec<f64> = (0..=params.horizon_cap)
        .map(|d| indirect_bound(r, beta_lambda, d))
        .collect();
    let toc: Vec<TocEntry> = params
        .m
        .iter()
        .flat_map(|&m| params.n.iter().map(move |&n| (m, n)))
        .map(|(m, n)| {
            let TocLimit { limit, regime } = toc_limit(m, n, beta_lambda);
            let r_at = (1.0 - m * (params.delta_k_max as f64).powf(-n)).clamp(0.0, 1.0);
            TocEntry {
                m,
                n,
                beta_lambda,
                limit,
                regime,
                bound_at_horizon: indirect_bound(r_at, beta_lambda, params.delta_k_max),
            }
        })
        .collect();
    let artifact = IndirectArtifact {
        initial: spec.node_id(i).to_string(),
        pomd: r,
        beta_lambda,
        exact_available,
        exact: exact.clone(),
        eq9_bound: eq9.clone(),
        toc,
    };
    match config.format {
        OutputFormat::Json => with_output(config.out.as_deref(), |out| {
            report::write_json(out, &artifact).map_err(Into::into)
        }),
        OutputFormat::Csv => {
            let rows: Vec<report::SweepRow> = (0..=params.horizon_cap)
                .map(|d| report::SweepRow {
                    delta_k: d,
                    exact: exact.get(d).copied(),
                    eq9_bound: Some(eq9[d]),
                    t2_lower1: None,
                    t2_upper: None,
                    t2_lower2: None,
                })
                .collect();
            with_output(config.out.as_deref(), |out| {
                report::write_sweep_csv(out, &rows).map_err(Into::into)
            })
        }
    }
}

fn cmd_estimate_beta(config: &RunConfig) -> Result<(), CliError> {
    let spec = load_network(config)?;
    let log_path = config.auth_log.as_ref().ok_or(CliError::MissingField {
        field: "auth_log",
        hint: "path to a `time,source,destination` csv".into(),
    })?;
    let file = fs::File::open(log_path).map_err(|source| CliError::ReadFile {
        path: log_path.clone(),
        source,
    })?;
    let events = read_auth_csv(file)?;
    let order: Vec<String> = spec.nodes().iter().map(|n| n.id.clone()).collect();
    let map = order
        .iter()
        .enumerate()
        .map(|(k, id)| (id.clone(), k))
        .collect();
    let estimate = estimate_beta(&events, config.window_seconds, &map, &order)?;
    if estimate.skipped_unknown > 0 {
        eprintln!(
            "warning: skipped {} events with entities outside the node set",
            estimate.skipped_unknown
        );
    }
    // the estimate is a structured matrix artifact; always JSON
    with_output(config.out.as_deref(), |out| {
        report::write_json(out, &estimate).map_err(Into::into)
    })
}
