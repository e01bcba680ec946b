//! Structured result emission. All CSV output uses UTF-8, LF endings, a
//! header row, and `.` decimals; JSON is pretty-printed with stable field
//! order so identical runs yield identical bytes.

use std::io::Write;

use serde::Serialize;

use crate::heuristics::ResidueReport;
use crate::ltv::VulnerabilityReport;
use crate::mc::{EpisodeTrace, LtvEstimate};
use crate::policy_opt::OptimizationTrace;

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `delta_k, initial_node, exact, lower, upper`; one row per initial node
/// and horizon, plus an `aggregate` row per horizon.
pub fn write_vulnerability_csv<W: Write>(
    out: W,
    report: &VulnerabilityReport,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta_k", "initial_node", "exact", "lower", "upper"])?;
    for row in &report.trajectory {
        for e in &row.per_initial {
            w.write_record([
                row.delta_k.to_string(),
                e.node.clone(),
                fmt_opt(e.values.exact),
                e.values.lower.to_string(),
                e.values.upper.to_string(),
            ])?;
        }
        w.write_record([
            row.delta_k.to_string(),
            "aggregate".to_string(),
            fmt_opt(row.aggregate.exact),
            row.aggregate.lower.to_string(),
            row.aggregate.upper.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `iter, objective, step_norm`; the step norm of iteration `t` is the
/// distance from iterate `t-1`, so the first row's is empty.
pub fn write_trace_csv<W: Write>(out: W, trace: &OptimizationTrace) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "objective", "step_norm"])?;
    for (t, obj) in trace.objective_values.iter().enumerate() {
        let step = if t == 0 {
            String::new()
        } else {
            trace.step_norms[t - 1].to_string()
        };
        w.write_record([t.to_string(), obj.to_string(), step])?;
    }
    w.flush()?;
    Ok(())
}

/// One aggregate row (`initial_node` = `aggregate`) followed by per-initial
/// rows.
pub fn write_estimate_csv<W: Write>(out: W, est: &LtvEstimate) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "delta_k",
        "initial_node",
        "trials",
        "successes",
        "p_hat",
        "ci_lower",
        "ci_upper",
        "detection_rate",
        "mean_detection_stage",
    ])?;
    w.write_record([
        est.delta_k.to_string(),
        "aggregate".to_string(),
        est.trials.to_string(),
        est.successes.to_string(),
        est.p_hat.to_string(),
        est.ci_lower.to_string(),
        est.ci_upper.to_string(),
        est.detection_rate.to_string(),
        fmt_opt(est.mean_detection_stage),
    ])?;
    for e in &est.per_initial {
        w.write_record([
            est.delta_k.to_string(),
            e.node.clone(),
            e.trials.to_string(),
            e.successes.to_string(),
            e.p_hat.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Heuristic-analysis sweep: `delta_k, exact, eq9_bound, t2_lower1,
/// t2_upper, t2_lower2`. Rows for indirect analyses leave the direct-policy
/// columns empty.
pub struct SweepRow {
    pub delta_k: usize,
    pub exact: Option<f64>,
    pub eq9_bound: Option<f64>,
    pub t2_lower1: Option<f64>,
    pub t2_upper: Option<f64>,
    pub t2_lower2: Option<f64>,
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "delta_k",
        "exact",
        "eq9_bound",
        "t2_lower1",
        "t2_upper",
        "t2_lower2",
    ])?;
    for r in rows {
        w.write_record([
            r.delta_k.to_string(),
            fmt_opt(r.exact),
            fmt_opt(r.eq9_bound),
            fmt_opt(r.t2_lower1),
            fmt_opt(r.t2_upper),
            fmt_opt(r.t2_lower2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a direct-policy residue report in the sweep schema, with the
/// movement-deterrence bound alongside.
pub fn sweep_rows_from_residue(report: &ResidueReport, eq9: &[f64]) -> Vec<SweepRow> {
    report
        .rows
        .iter()
        .map(|r| SweepRow {
            delta_k: r.delta_k,
            exact: Some(r.exact),
            eq9_bound: eq9.get(r.delta_k).copied(),
            t2_lower1: Some(r.t2_lower1),
            t2_upper: Some(report.analysis.t2_upper),
            t2_lower2: Some(report.analysis.t2_lower2),
        })
        .collect()
}

/// `stage, links, honey_link, new_compromises, detected`; links and node
/// lists use `;`-separated `a->b` / index items.
pub fn write_episode_csv<W: Write>(out: W, trace: &EpisodeTrace) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "links", "honey_link", "new_compromises", "detected"])?;
    for s in &trace.stages {
        let links = s
            .realization
            .links()
            .map(|(a, b)| format!("{a}->{b}"))
            .collect::<Vec<_>>()
            .join(";");
        let honey = s
            .realization
            .honey_link
            .map(|(l, ww)| format!("{l}->{ww}"))
            .unwrap_or_default();
        let newly = s
            .new_compromises
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            s.stage.to_string(),
            links,
            honey,
            newly,
            s.detected.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
