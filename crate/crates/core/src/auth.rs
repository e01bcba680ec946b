//! Service-link probability estimation from authentication event logs.
//!
//! Raw logs carry no stage boundaries, so consecutive fixed-width time
//! windows stand in for stages: `beta[i][j]` is estimated as the fraction
//! of windows containing at least one `i -> j` event. The window spans the
//! full time range of the log, including events whose entities are not in
//! the node map (those still witness elapsed stages).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::SquareMatrix;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AuthEvent {
    pub time: f64,
    pub source: String,
    pub destination: String,
}

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("auth log contains no events")]
    EmptyLog,
    #[error("window length must be positive, got {0}")]
    NonPositiveWindow(f64),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub nodes: Vec<String>,
    pub window_seconds: f64,
    pub window_count: u64,
    pub beta: SquareMatrix,
    /// Distinct windows in which each directed pair fired at least once.
    pub support: Vec<Vec<u64>>,
    /// Events whose source or destination was not in the node map.
    pub skipped_unknown: u64,
    /// Events mapping to a self-loop after identity resolution.
    pub skipped_self: u64,
}

/// Reads a `time,source,destination` CSV (header required).
pub fn read_auth_csv<R: Read>(reader: R) -> Result<Vec<AuthEvent>, AuthError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut events = Vec::new();
    for record in rdr.deserialize() {
        events.push(record?);
    }
    Ok(events)
}

pub fn estimate_beta(
    events: &[AuthEvent],
    window_seconds: f64,
    node_map: &BTreeMap<String, usize>,
    node_order: &[String],
) -> Result<BetaEstimate, AuthError> {
    if window_seconds <= 0.0 {
        return Err(AuthError::NonPositiveWindow(window_seconds));
    }
    if events.is_empty() {
        return Err(AuthError::EmptyLog);
    }
    let n = node_order.len();
    let t0 = events.iter().map(|e| e.time).fold(f64::INFINITY, f64::min);
    let t1 = events
        .iter()
        .map(|e| e.time)
        .fold(f64::NEG_INFINITY, f64::max);
    let window_count = ((t1 - t0) / window_seconds).floor() as u64 + 1;

    let mut seen: BTreeSet<(usize, usize, u64)> = BTreeSet::new();
    let mut skipped_unknown = 0u64;
    let mut skipped_self = 0u64;
    for e in events {
        let (i, j) = match (node_map.get(&e.source), node_map.get(&e.destination)) {
            (Some(&i), Some(&j)) => (i, j),
            _ => {
                skipped_unknown += 1;
                continue;
            }
        };
        if i == j {
            skipped_self += 1;
            continue;
        }
        let window = ((e.time - t0) / window_seconds).floor() as u64;
        seen.insert((i, j, window.min(window_count - 1)));
    }

    let mut beta = SquareMatrix::zeros(n);
    let mut support = vec![vec![0u64; n]; n];
    for &(i, j, _) in &seen {
        support[i][j] += 1;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                beta.set(i, j, support[i][j] as f64 / window_count as f64);
            }
        }
    }
    Ok(BetaEstimate {
        nodes: node_order.to_vec(),
        window_seconds,
        window_count,
        beta,
        support,
        skipped_unknown,
        skipped_self,
    })
}
