//! Validated network description, honeypot policy representation and
//! stage-level stochastic primitives.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::SquareMatrix;
use crate::rng::RandomStream;

/// Values this far outside `[0,1]` are treated as serialization round-off
/// and clamped; anything worse is a validation error.
const CLAMP_EPS: f64 = 1e-12;
/// Tolerance for distribution normalization checks.
const NORM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    User,
    Host,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLabel {
    pub id: String,
    pub kind: NodeKind,
}

/// Wire format of a network description, prior to validation.
///
/// `dmz`, `reconfigurable`, `target` and the `rho` keys refer to node ids;
/// matrices are nested arrays in node order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawNetwork {
    pub nodes: Vec<NodeLabel>,
    pub dmz: Vec<String>,
    pub reconfigurable: Vec<String>,
    pub target: String,
    pub beta: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub rho: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("matrix `{name}` is not {n}x{n}: {detail}")]
    NonSquareMatrix {
        name: &'static str,
        n: usize,
        detail: String,
    },
    #[error("matrix `{name}` entry ({row},{col}) = {value} is outside [0,1]")]
    ProbabilityOutOfRange {
        name: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("matrix `{name}` has nonzero self-entry at node {index}")]
    NonzeroDiagonal { name: &'static str, index: usize },
    #[error("rho sums to {sum}, expected 1")]
    RhoNotNormalized { sum: f64 },
    #[error("rho assigns {value} to `{id}` which is not in the dmz")]
    RhoOutsideDmz { id: String, value: f64 },
    #[error("target node is inside the dmz")]
    TargetInDmz,
    #[error("dmz is empty")]
    EmptyDmz,
    #[error("unknown node id `{id}` in {field}")]
    UnknownNodeId { field: &'static str, id: String },
    #[error("duplicate node id `{id}`")]
    DuplicateNodeId { id: String },
}

/// All violations found in one pass, so a bad file is fixed in one edit.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<Violation>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} validation violation(s):", self.0.len())?;
        for v in &self.0 {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetModelError {
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("honeypot node {w} appears in the source or sink set")]
    HoneypotInSourceOrSinkSet { w: usize },
}

/// Immutable, validated description of the user-host network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSpec {
    nodes: Vec<NodeLabel>,
    dmz: Vec<usize>,
    reconfigurable: Vec<usize>,
    target: usize,
    beta: SquareMatrix,
    lambda: SquareMatrix,
    q: SquareMatrix,
    rho: Vec<f64>,
    #[serde(skip)]
    dmz_mask: Vec<bool>,
    #[serde(skip)]
    reconfigurable_mask: Vec<bool>,
}

impl NetworkSpec {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeLabel] {
        &self.nodes
    }

    pub fn node_id(&self, i: usize) -> &str {
        &self.nodes[i].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// DMZ indices in ascending order.
    pub fn dmz(&self) -> &[usize] {
        &self.dmz
    }

    pub fn reconfigurable(&self) -> &[usize] {
        &self.reconfigurable
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn is_dmz(&self, i: usize) -> bool {
        self.dmz_mask[i]
    }

    pub fn is_reconfigurable(&self, w: usize) -> bool {
        self.reconfigurable_mask[w]
    }

    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.beta.get(i, j)
    }

    pub fn lambda(&self, i: usize, j: usize) -> f64 {
        self.lambda.get(i, j)
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q.get(i, j)
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.rho[i]
    }

    pub fn beta_matrix(&self) -> &SquareMatrix {
        &self.beta
    }

    /// `(l, w)` pairs a policy may place mass on: `w` reconfigurable,
    /// `l != w`, and `l` not the target node.
    pub fn feasible_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for l in 0..self.n() {
            if l == self.target {
                continue;
            }
            for &w in &self.reconfigurable {
                if l != w {
                    pairs.push((l, w));
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }

    /// Probability that node `w` is idle at a stage: no service link touches
    /// it in either direction.
    pub fn idle_prob(&self, w: usize) -> f64 {
        let mut p = 1.0;
        for l in 0..self.n() {
            if l != w {
                p *= (1.0 - self.beta.get(l, w)) * (1.0 - self.beta.get(w, l));
            }
        }
        p
    }

    /// Idleness probability of `w` conditioned on the absence of the link
    /// `source -> w` (the source-side factor is dropped).
    pub fn idle_prob_excluding_source(&self, source: usize, w: usize) -> f64 {
        let mut p = 1.0;
        for l in 0..self.n() {
            if l != w && l != source {
                p *= 1.0 - self.beta.get(l, w);
            }
            if l != w {
                p *= 1.0 - self.beta.get(w, l);
            }
        }
        p
    }
}

/// Clamps near-misses into `[0,1]`, recording a warning; exact violations
/// land in `violations`.
fn check_probability(
    name: &'static str,
    row: usize,
    col: usize,
    value: f64,
    violations: &mut Vec<Violation>,
    warnings: &mut Vec<String>,
) -> f64 {
    if (0.0..=1.0).contains(&value) {
        return value;
    }
    if value > -CLAMP_EPS && value < 1.0 + CLAMP_EPS {
        let clamped = value.clamp(0.0, 1.0);
        warnings.push(format!(
            "{name}[{row}][{col}] = {value} clamped to {clamped}"
        ));
        return clamped;
    }
    violations.push(Violation::ProbabilityOutOfRange {
        name,
        row,
        col,
        value,
    });
    value
}

fn check_matrix(
    name: &'static str,
    rows: &[Vec<f64>],
    n: usize,
    force_zero_diagonal: bool,
    violations: &mut Vec<Violation>,
    warnings: &mut Vec<String>,
) -> SquareMatrix {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        let detail = if rows.len() != n {
            format!("{} rows", rows.len())
        } else {
            "ragged rows".to_string()
        };
        violations.push(Violation::NonSquareMatrix { name, n, detail });
        return SquareMatrix::zeros(n);
    }
    let mut m = SquareMatrix::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &raw) in row.iter().enumerate() {
            let mut value = check_probability(name, i, j, raw, violations, warnings);
            if i == j && value != 0.0 {
                if force_zero_diagonal {
                    value = 0.0;
                } else {
                    violations.push(Violation::NonzeroDiagonal { name, index: i });
                }
            }
            m.set(i, j, value);
        }
    }
    m
}

/// Checks every invariant of the raw description and builds a
/// [`NetworkSpec`]. All violations are reported together; clamp warnings
/// accompany a successful result.
pub fn validate_network(raw: &RawNetwork) -> Result<(NetworkSpec, Vec<String>), ValidationErrors> {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let n = raw.nodes.len();

    for (i, node) in raw.nodes.iter().enumerate() {
        if raw.nodes[..i].iter().any(|m| m.id == node.id) {
            violations.push(Violation::DuplicateNodeId {
                id: node.id.clone(),
            });
        }
    }

    let resolve = |field: &'static str, id: &str, violations: &mut Vec<Violation>| {
        match raw.nodes.iter().position(|m| m.id == id) {
            Some(i) => Some(i),
            None => {
                violations.push(Violation::UnknownNodeId {
                    field,
                    id: id.to_string(),
                });
                None
            }
        }
    };

    let mut dmz: Vec<usize> = raw
        .dmz
        .iter()
        .filter_map(|id| resolve("dmz", id, &mut violations))
        .collect();
    dmz.sort_unstable();
    dmz.dedup();

    let mut reconfigurable: Vec<usize> = raw
        .reconfigurable
        .iter()
        .filter_map(|id| resolve("reconfigurable", id, &mut violations))
        .collect();
    reconfigurable.sort_unstable();
    reconfigurable.dedup();

    let target = resolve("target", &raw.target, &mut violations);

    if raw.dmz.is_empty() {
        violations.push(Violation::EmptyDmz);
    }
    if let Some(t) = target {
        if dmz.contains(&t) {
            violations.push(Violation::TargetInDmz);
        }
    }

    let beta = check_matrix("beta", &raw.beta, n, false, &mut violations, &mut warnings);
    let lambda = check_matrix(
        "lambda",
        &raw.lambda,
        n,
        false,
        &mut violations,
        &mut warnings,
    );
    // Self-entries of q are never used (gamma has a zero diagonal); force
    // them to zero rather than rejecting.
    let q = check_matrix("q", &raw.q, n, true, &mut violations, &mut warnings);

    let mut rho = vec![0.0; n];
    let mut rho_sum = 0.0;
    for (id, &value) in &raw.rho {
        match raw.nodes.iter().position(|m| m.id == *id) {
            Some(i) => {
                let v = check_probability("rho", i, 0, value, &mut violations, &mut warnings);
                if !dmz.contains(&i) && v != 0.0 {
                    violations.push(Violation::RhoOutsideDmz {
                        id: id.clone(),
                        value: v,
                    });
                }
                rho[i] = v;
                rho_sum += v;
            }
            None => violations.push(Violation::UnknownNodeId {
                field: "rho",
                id: id.clone(),
            }),
        }
    }
    if !raw.dmz.is_empty() && (rho_sum - 1.0).abs() > NORM_EPS {
        violations.push(Violation::RhoNotNormalized { sum: rho_sum });
    }

    if !violations.is_empty() {
        return Err(ValidationErrors(violations));
    }

    let target = target.expect("target resolved when no violations");
    let mut dmz_mask = vec![false; n];
    for &i in &dmz {
        dmz_mask[i] = true;
    }
    let mut reconfigurable_mask = vec![false; n];
    for &w in &reconfigurable {
        reconfigurable_mask[w] = true;
    }

    Ok((
        NetworkSpec {
            nodes: raw.nodes.clone(),
            dmz,
            reconfigurable,
            target,
            beta,
            lambda,
            q,
            rho,
            dmz_mask,
            reconfigurable_mask,
        },
        warnings,
    ))
}

impl NetworkSpec {
    pub fn from_json_str(text: &str) -> Result<(Self, Vec<String>), String> {
        let raw: RawNetwork = serde_json::from_str(text).map_err(|e| e.to_string())?;
        validate_network(&raw).map_err(|e| e.to_string())
    }

    pub fn to_raw(&self) -> RawNetwork {
        RawNetwork {
            nodes: self.nodes.clone(),
            dmz: self.dmz.iter().map(|&i| self.nodes[i].id.clone()).collect(),
            reconfigurable: self
                .reconfigurable
                .iter()
                .map(|&i| self.nodes[i].id.clone())
                .collect(),
            target: self.nodes[self.target].id.clone(),
            beta: self.beta.to_rows(),
            lambda: self.lambda.to_rows(),
            q: self.q.to_rows(),
            rho: self
                .dmz
                .iter()
                .map(|&i| (self.nodes[i].id.clone(), self.rho[i]))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("gamma is {got}x{got}, expected {want}x{want}")]
    WrongSize { got: usize, want: usize },
    #[error("gamma[{row}][{col}] = {value} is outside [0,1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("gamma has nonzero self-link at node {index}")]
    SelfLink { index: usize },
    #[error("gamma[{row}][{col}] = {value} but honey links from the target node are forbidden")]
    SourceIsTarget { row: usize, col: usize, value: f64 },
    #[error("gamma[{row}][{col}] = {value} but node {col} is not reconfigurable")]
    SinkNotReconfigurable { row: usize, col: usize, value: f64 },
    #[error("gamma mass {sum} exceeds 1")]
    MassExceedsOne { sum: f64 },
    #[error("no feasible honey link exists for this network")]
    EmptyFeasibleSet,
}

/// Stationary honeypot policy: `gamma[l][w]` is the per-stage probability of
/// disguising the honey link `l -> w`.
///
/// The total mass may be less than one; the deficit is the probability of
/// deploying no honeypot that stage. The all-zero policy is the "no
/// honeypot" baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyMatrix {
    gamma: SquareMatrix,
}

impl PolicyMatrix {
    /// Validates `gamma` against the network's feasibility constraints.
    pub fn new(spec: &NetworkSpec, gamma: SquareMatrix) -> Result<Self, PolicyError> {
        let n = spec.n();
        if gamma.n() != n {
            return Err(PolicyError::WrongSize {
                got: gamma.n(),
                want: n,
            });
        }
        let mut cleaned = gamma;
        for l in 0..n {
            for w in 0..n {
                let value = cleaned.get(l, w);
                if !(0.0..=1.0).contains(&value) {
                    if value > -CLAMP_EPS && value < 1.0 + CLAMP_EPS {
                        cleaned.set(l, w, value.clamp(0.0, 1.0));
                    } else {
                        return Err(PolicyError::EntryOutOfRange {
                            row: l,
                            col: w,
                            value,
                        });
                    }
                }
                let value = cleaned.get(l, w);
                if value == 0.0 {
                    continue;
                }
                if l == w {
                    return Err(PolicyError::SelfLink { index: l });
                }
                if l == spec.target() {
                    return Err(PolicyError::SourceIsTarget {
                        row: l,
                        col: w,
                        value,
                    });
                }
                if !spec.is_reconfigurable(w) {
                    return Err(PolicyError::SinkNotReconfigurable {
                        row: l,
                        col: w,
                        value,
                    });
                }
            }
        }
        let sum = cleaned.sum();
        if sum > 1.0 + NORM_EPS {
            return Err(PolicyError::MassExceedsOne { sum });
        }
        Ok(Self { gamma: cleaned })
    }

    /// Uniform distribution over every feasible honey link.
    pub fn uniform(spec: &NetworkSpec) -> Result<Self, PolicyError> {
        let pairs = spec.feasible_pairs();
        if pairs.is_empty() {
            return Err(PolicyError::EmptyFeasibleSet);
        }
        let mut gamma = SquareMatrix::zeros(spec.n());
        let p = 1.0 / pairs.len() as f64;
        for (l, w) in pairs {
            gamma.set(l, w, p);
        }
        Ok(Self { gamma })
    }

    /// The no-honeypot policy.
    pub fn zero(spec: &NetworkSpec) -> Self {
        Self {
            gamma: SquareMatrix::zeros(spec.n()),
        }
    }

    /// Deterministic direct policy: always the honey link `source -> w0`.
    pub fn direct(spec: &NetworkSpec, source: usize, w0: usize) -> Result<Self, PolicyError> {
        let mut gamma = SquareMatrix::zeros(spec.n());
        gamma.set(source, w0, 1.0);
        Self::new(spec, gamma)
    }

    pub fn n(&self) -> usize {
        self.gamma.n()
    }

    #[inline]
    pub fn get(&self, l: usize, w: usize) -> f64 {
        self.gamma.get(l, w)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.gamma
    }

    pub fn total_mass(&self) -> f64 {
        self.gamma.sum()
    }

    /// True when the policy can never trap an attacker sitting at `i`:
    /// every honey link out of `i` is either never chosen or always
    /// identified.
    pub fn zero_poic_for(&self, spec: &NetworkSpec, i: usize) -> bool {
        (0..self.n()).all(|w| self.gamma.get(i, w) * (1.0 - spec.q(i, w)) == 0.0)
    }
}

/// One stage's realized randomness: which service links exist and where the
/// honey link points.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRealization {
    n: usize,
    service_links: Vec<bool>,
    pub honey_link: Option<(usize, usize)>,
    pub stage_index: u64,
}

impl StageRealization {
    pub fn empty(n: usize, stage_index: u64) -> Self {
        Self {
            n,
            service_links: vec![false; n * n],
            honey_link: None,
            stage_index,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_link(&self, i: usize, j: usize) -> bool {
        self.service_links[i * self.n + j]
    }

    fn set_link(&mut self, i: usize, j: usize) {
        self.service_links[i * self.n + j] = true;
    }

    /// Node `w` is idle when it is neither source nor sink of any realized
    /// service link.
    pub fn is_idle(&self, w: usize) -> Result<bool, NetModelError> {
        if w >= self.n {
            return Err(NetModelError::IndexOutOfRange {
                index: w,
                n: self.n,
            });
        }
        Ok((0..self.n).all(|j| !self.has_link(w, j) && !self.has_link(j, w)))
    }

    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.service_links
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(move |(k, _)| (k / n, k % n))
    }
}

/// Draws one stage: every service link independently Bernoulli(beta), the
/// honey link categorically from gamma, independent of the links.
pub fn sample_stage(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    links: &mut RandomStream,
    honey: &mut RandomStream,
    stage_index: u64,
) -> StageRealization {
    let n = spec.n();
    let mut stage = StageRealization::empty(n, stage_index);
    for i in 0..n {
        for j in 0..n {
            if i != j && links.bernoulli(spec.beta(i, j)) {
                stage.set_link(i, j);
            }
        }
    }
    stage.honey_link = honey
        .categorical_or_none(policy.matrix().iter().map(|(_, v)| v))
        .map(|flat| (flat / n, flat % n));
    stage
}

/// Probability that a honeypot at `w` sees no service link from any node in
/// `sources` and none to any node in `sinks`.
pub fn no_interference_prob(
    spec: &NetworkSpec,
    sources: &[usize],
    w: usize,
    sinks: &[usize],
) -> Result<f64, NetModelError> {
    if w >= spec.n() {
        return Err(NetModelError::IndexOutOfRange {
            index: w,
            n: spec.n(),
        });
    }
    if sources.contains(&w) || sinks.contains(&w) {
        return Err(NetModelError::HoneypotInSourceOrSinkSet { w });
    }
    let mut p = 1.0;
    for &l in sources {
        p *= 1.0 - spec.beta(l, w);
    }
    for &l in sinks {
        p *= 1.0 - spec.beta(w, l);
    }
    Ok(p)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::StreamPurpose;

    /// Five-node network in the shape of the running example: two users that
    /// can reach two ordinary hosts, hosts exchanging flows, and a segregated
    /// target host no user can access directly.
    pub(crate) fn five_node_raw() -> RawNetwork {
        let ids = ["U1", "U2", "H1", "H2", "H3"];
        let kinds = [
            NodeKind::User,
            NodeKind::User,
            NodeKind::Host,
            NodeKind::Host,
            NodeKind::Host,
        ];
        let mut beta = vec![vec![0.0; 5]; 5];
        // users reach H1/H2
        for u in 0..2 {
            beta[u][2] = 0.4;
            beta[u][3] = 0.3;
        }
        // host-host flows, including to/from the target H3
        beta[2][3] = 0.3;
        beta[3][2] = 0.2;
        beta[2][4] = 0.2;
        beta[4][3] = 0.1;
        beta[3][4] = 0.25;
        // users cannot access H3
        beta[0][4] = 0.0;
        beta[1][4] = 0.0;
        let lambda = vec![vec![0.5; 5]; 5]
            .into_iter()
            .enumerate()
            .map(|(i, mut row)| {
                row[i] = 0.0;
                row
            })
            .collect();
        let q = vec![vec![0.1; 5]; 5];
        RawNetwork {
            nodes: ids
                .iter()
                .zip(kinds)
                .map(|(id, kind)| NodeLabel {
                    id: id.to_string(),
                    kind,
                })
                .collect(),
            dmz: vec!["U1".into(), "U2".into()],
            reconfigurable: vec!["U1".into(), "U2".into(), "H1".into(), "H2".into()],
            target: "H3".into(),
            beta,
            lambda,
            q,
            rho: [("U1".to_string(), 0.6), ("U2".to_string(), 0.4)]
                .into_iter()
                .collect(),
        }
    }

    pub(crate) fn five_node_spec() -> NetworkSpec {
        validate_network(&five_node_raw()).unwrap().0
    }

    #[test]
    fn five_node_example_is_valid() {
        let (spec, warnings) = validate_network(&five_node_raw()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(spec.n(), 5);
        assert_eq!(spec.target(), 4);
        assert_eq!(spec.dmz(), &[0, 1]);
        assert_eq!(spec.beta(0, 4), 0.0);
        assert_eq!(spec.beta(1, 4), 0.0);
    }

    #[test]
    fn rho_sum_violation_is_reported_with_value() {
        let mut raw = five_node_raw();
        raw.rho.insert("U2".to_string(), 0.3);
        let err = validate_network(&raw).unwrap_err();
        assert!(err
            .0
            .iter()
            .any(|v| matches!(v, Violation::RhoNotNormalized { sum } if (sum - 0.9).abs() < 1e-12)));
    }

    #[test]
    fn target_in_dmz_is_rejected() {
        let mut raw = five_node_raw();
        raw.target = "U1".into();
        let err = validate_network(&raw).unwrap_err();
        assert!(err.0.contains(&Violation::TargetInDmz));
    }

    #[test]
    fn all_violations_are_enumerated_together() {
        let mut raw = five_node_raw();
        raw.target = "U1".into();
        raw.beta[2][3] = 1.5;
        raw.rho.insert("U2".to_string(), 0.1);
        let err = validate_network(&raw).unwrap_err();
        assert!(err.0.len() >= 3, "expected 3+ violations, got {err}");
    }

    #[test]
    fn near_miss_probabilities_clamp_with_warning() {
        let mut raw = five_node_raw();
        raw.beta[0][2] = 1.0 + 5e-13;
        raw.beta[1][2] = -5e-13;
        let (spec, warnings) = validate_network(&raw).unwrap();
        assert_eq!(warnings.len(), 2);
        assert_eq!(spec.beta(0, 2), 1.0);
        assert_eq!(spec.beta(1, 2), 0.0);
    }

    #[test]
    fn q_diagonal_is_forced_to_zero() {
        let mut raw = five_node_raw();
        raw.q[2][2] = 0.7;
        let (spec, _) = validate_network(&raw).unwrap();
        assert_eq!(spec.q(2, 2), 0.0);
    }

    #[test]
    fn policy_feasibility_is_enforced() {
        let spec = five_node_spec();
        let mut gamma = SquareMatrix::zeros(5);
        gamma.set(4, 2, 1.0); // source is the target node
        assert!(matches!(
            PolicyMatrix::new(&spec, gamma),
            Err(PolicyError::SourceIsTarget { .. })
        ));
        let mut gamma = SquareMatrix::zeros(5);
        gamma.set(0, 4, 1.0); // H3 is not reconfigurable
        assert!(matches!(
            PolicyMatrix::new(&spec, gamma),
            Err(PolicyError::SinkNotReconfigurable { .. })
        ));
        let mut gamma = SquareMatrix::zeros(5);
        gamma.set(0, 2, 0.7);
        gamma.set(1, 3, 0.7);
        assert!(matches!(
            PolicyMatrix::new(&spec, gamma),
            Err(PolicyError::MassExceedsOne { .. })
        ));
    }

    #[test]
    fn uniform_policy_covers_feasible_pairs_only() {
        let spec = five_node_spec();
        let policy = PolicyMatrix::uniform(&spec).unwrap();
        let m = policy.total_mass();
        assert!((m - 1.0).abs() < 1e-12);
        // 4 reconfigurable sinks, sources exclude the sink itself and H3
        let pairs = spec.feasible_pairs();
        assert_eq!(pairs.len(), 4 * 4 - 4);
        for (l, w) in pairs {
            assert!(policy.get(l, w) > 0.0);
            assert_ne!(l, w);
            assert_ne!(l, spec.target());
        }
        assert_eq!(policy.get(0, 4), 0.0);
    }

    #[test]
    fn sampling_is_bit_reproducible() {
        let spec = five_node_spec();
        let policy = PolicyMatrix::uniform(&spec).unwrap();
        let draw = |seed| {
            let mut links = RandomStream::new(seed, StreamPurpose::ServiceLinks, 2, 9);
            let mut honey = RandomStream::new(seed, StreamPurpose::HoneyLink, 2, 9);
            sample_stage(&spec, &policy, &mut links, &mut honey, 2)
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn zero_beta_never_links_and_deterministic_gamma_always_hits() {
        let mut raw = five_node_raw();
        raw.beta = vec![vec![0.0; 5]; 5];
        let (spec, _) = validate_network(&raw).unwrap();
        let mut gamma = SquareMatrix::zeros(5);
        gamma.set(1, 2, 1.0);
        let policy = PolicyMatrix::new(&spec, gamma).unwrap();
        for seed in 0..20 {
            let mut links = RandomStream::new(seed, StreamPurpose::ServiceLinks, 0, 0);
            let mut honey = RandomStream::new(seed, StreamPurpose::HoneyLink, 0, 0);
            let stage = sample_stage(&spec, &policy, &mut links, &mut honey, 0);
            assert_eq!(stage.links().count(), 0);
            assert_eq!(stage.honey_link, Some((1, 2)));
        }
    }

    #[test]
    fn empirical_link_frequency_matches_beta() {
        let spec = five_node_spec();
        let policy = PolicyMatrix::zero(&spec);
        let trials = 100_000;
        let mut hits = 0u32;
        for t in 0..trials {
            let mut links = RandomStream::new(7, StreamPurpose::ServiceLinks, 0, t as u64);
            let mut honey = RandomStream::new(7, StreamPurpose::HoneyLink, 0, t as u64);
            let stage = sample_stage(&spec, &policy, &mut links, &mut honey, 0);
            if stage.has_link(0, 2) {
                hits += 1;
            }
        }
        let freq = f64::from(hits) / f64::from(trials);
        assert!((freq - 0.4).abs() < 0.01, "freq = {freq}");
    }

    #[test]
    fn idleness_queries() {
        let mut stage = StageRealization::empty(3, 0);
        assert!(stage.is_idle(0).unwrap());
        stage.set_link(0, 1);
        assert!(!stage.is_idle(0).unwrap());
        assert!(!stage.is_idle(1).unwrap());
        assert!(stage.is_idle(2).unwrap());
        assert!(stage.is_idle(5).is_err());
    }

    #[test]
    fn no_interference_hand_example() {
        // v = {1}, v' = {3}, w = 2, beta[1][2] = 0.5, beta[2][3] = 0.25
        let mut raw = five_node_raw();
        raw.beta = vec![vec![0.0; 5]; 5];
        raw.beta[1][2] = 0.5;
        raw.beta[2][3] = 0.25;
        let (spec, _) = validate_network(&raw).unwrap();
        let p = no_interference_prob(&spec, &[1], 2, &[3]).unwrap();
        assert!((p - 0.375).abs() < 1e-15);
        // empty sets: always 1
        assert_eq!(no_interference_prob(&spec, &[], 2, &[]).unwrap(), 1.0);
        // w in the source set is rejected
        assert!(no_interference_prob(&spec, &[2], 2, &[]).is_err());
    }

    #[test]
    fn certain_interference_gives_zero() {
        let mut raw = five_node_raw();
        raw.beta[0][2] = 1.0;
        let (spec, _) = validate_network(&raw).unwrap();
        assert_eq!(no_interference_prob(&spec, &[0], 2, &[]).unwrap(), 0.0);
    }

    #[test]
    fn no_interference_shrinks_as_sets_grow() {
        let spec = five_node_spec();
        let base = no_interference_prob(&spec, &[0], 3, &[]).unwrap();
        let bigger = no_interference_prob(&spec, &[0, 1], 3, &[2]).unwrap();
        assert!(bigger <= base + 1e-15);
    }

    #[test]
    fn empirical_idleness_matches_product_formula() {
        let spec = five_node_spec();
        let policy = PolicyMatrix::zero(&spec);
        let w = 3;
        let others: Vec<usize> = (0..5).filter(|&x| x != w).collect();
        let expected = no_interference_prob(&spec, &others, w, &others).unwrap();
        let trials = 200_000;
        let mut idle = 0u32;
        for t in 0..trials {
            let mut links = RandomStream::new(11, StreamPurpose::ServiceLinks, 0, t as u64);
            let mut honey = RandomStream::new(11, StreamPurpose::HoneyLink, 0, t as u64);
            let stage = sample_stage(&spec, &policy, &mut links, &mut honey, 0);
            if stage.is_idle(w).unwrap() {
                idle += 1;
            }
        }
        let freq = f64::from(idle) / f64::from(trials);
        assert!((freq - expected).abs() < 0.01, "freq {freq} vs {expected}");
    }

    #[test]
    fn network_round_trips_through_raw() {
        let spec = five_node_spec();
        let raw = spec.to_raw();
        let (back, _) = validate_network(&raw).unwrap();
        assert_eq!(back, spec);
    }
}
