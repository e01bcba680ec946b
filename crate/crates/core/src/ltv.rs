//! Target vulnerability over a stage horizon, three ways: exact forward
//! propagation of the compromise-state distribution, and the max/capped-sum
//! recursions that bracket it from below and above.
//!
//! The exact evaluator is exponential in the node count and is capped; the
//! bracket recursions enumerate `3^(N-2)` partial-compromise classes per
//! node and horizon, which stays tractable at desk scale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net_model::{NetworkSpec, PolicyMatrix};
use crate::numeric::CompensatedSum;

/// Default node cap for the exact evaluator (`2^N` subset states).
pub const DEFAULT_EXACT_CAP: usize = 12;
/// Node cap for the bracket recursions (`3^(N-2)` terms per node/horizon).
pub const BOUNDS_NODE_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LtvError {
    #[error("sets v and u overlap")]
    OverlappingSets,
    #[error("node {node} may not appear in v or u (initial or target node)")]
    SetContainsIorJ0 { node: usize },
    #[error("initial node {i} is not in the dmz")]
    InitialNodeNotInDmz { i: usize },
    #[error("network has {n} nodes, exact evaluation is capped at {cap}")]
    NetworkTooLargeForExact { n: usize, cap: usize },
    #[error("network has {n} nodes, bound recursion is capped at {cap}")]
    NetworkTooLargeForBounds { n: usize, cap: usize },
    #[error("per-initial values missing dmz node {i}")]
    MissingInitialNode { i: usize },
}

/// Attack status after some number of stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Active,
    Detected,
    TargetCompromised,
}

/// Attacker foothold plus the absorbing markers. `compromised` always
/// contains the initial-intrusion node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompromiseState {
    pub compromised: Vec<usize>,
    pub status: Status,
}

/// Probability that an attacker starting at `i` is trapped before he can
/// move: the honey link points from `i` to an unidentified, idle honeypot.
fn capture_sum_base(spec: &NetworkSpec, policy: &PolicyMatrix, i: usize) -> f64 {
    let mut sum = 0.0;
    for w in 0..spec.n() {
        if w == i || w == spec.target() {
            continue;
        }
        let g = policy.get(i, w);
        if g > 0.0 {
            sum += g * (1.0 - spec.q(i, w)) * spec.idle_prob(w);
        }
    }
    sum
}

/// Capture weight of honeypot `w` against source `i`, conditioned on the
/// absence of the service link `i -> w` (used inside the partial-compromise
/// expansion, where that link is already known absent).
#[inline]
fn capture_term_cond(spec: &NetworkSpec, policy: &PolicyMatrix, i: usize, w: usize) -> f64 {
    let g = policy.get(i, w);
    if g == 0.0 {
        return 0.0;
    }
    g * (1.0 - spec.q(i, w)) * spec.idle_prob_excluding_source(i, w)
}

/// Probability that an initial intrusion at `i` compromises the target
/// within the intrusion stage itself (horizon 0).
pub fn imminent_vulnerability(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    i: usize,
) -> Result<f64, LtvError> {
    if !spec.is_dmz(i) {
        return Err(LtvError::InitialNodeNotInDmz { i });
    }
    Ok(imminent_vulnerability_any(spec, policy, i))
}

/// Horizon-0 value for an arbitrary foothold node (the recursions need it
/// for nodes outside the DMZ too).
fn imminent_vulnerability_any(spec: &NetworkSpec, policy: &PolicyMatrix, i: usize) -> f64 {
    let j0 = spec.target();
    let direct = spec.beta(i, j0) * spec.lambda(i, j0);
    if direct == 0.0 {
        return 0.0;
    }
    direct * (1.0 - capture_sum_base(spec, policy, i))
}

/// Probability that, in one stage, the attacker at `i` compromises exactly
/// the nodes in `v`, fails over existing links exactly on `u`, and sees no
/// link to the remaining nodes (the target link is not part of the
/// classification).
pub fn partial_compromise_prob(
    spec: &NetworkSpec,
    i: usize,
    v: &[usize],
    u: &[usize],
) -> Result<f64, LtvError> {
    let j0 = spec.target();
    for &h in v.iter().chain(u) {
        if h == i || h == j0 {
            return Err(LtvError::SetContainsIorJ0 { node: h });
        }
    }
    if v.iter().any(|h| u.contains(h)) {
        return Err(LtvError::OverlappingSets);
    }
    let mut p = 1.0;
    for h in 0..spec.n() {
        if h == i || h == j0 {
            continue;
        }
        let b = spec.beta(i, h);
        p *= if v.contains(&h) {
            b * spec.lambda(i, h)
        } else if u.contains(&h) {
            b * (1.0 - spec.lambda(i, h))
        } else {
            1.0 - b
        };
    }
    Ok(p)
}

/// Lower/upper recursion tables indexed by `[node][horizon]`; entries for
/// the target node itself are unused and stay zero.
#[derive(Debug, Clone)]
pub struct BoundTables {
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    pub delta_k: usize,
}

impl BoundTables {
    pub fn lower_at(&self, node: usize, horizon: usize) -> f64 {
        self.lower[node][horizon]
    }

    pub fn upper_at(&self, node: usize, horizon: usize) -> f64 {
        self.upper[node][horizon]
    }
}

/// Computes both bracket recursions for every node and horizon up to
/// `delta_k`. One enumeration pass per `(node, horizon)` feeds both tables.
pub fn bound_tables(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    delta_k: usize,
) -> Result<BoundTables, LtvError> {
    let n = spec.n();
    if n > BOUNDS_NODE_CAP {
        return Err(LtvError::NetworkTooLargeForBounds {
            n,
            cap: BOUNDS_NODE_CAP,
        });
    }
    let j0 = spec.target();
    let mut lower = vec![vec![0.0; delta_k + 1]; n];
    let mut upper = vec![vec![0.0; delta_k + 1]; n];
    for j in 0..n {
        if j == j0 {
            continue;
        }
        let base = imminent_vulnerability_any(spec, policy, j);
        lower[j][0] = base;
        upper[j][0] = base;
    }
    for d in 1..=delta_k {
        for j in 0..n {
            if j == j0 {
                continue;
            }
            let others: Vec<usize> = (0..n).filter(|&h| h != j && h != j0).collect();
            let mut acc_lower = CompensatedSum::new();
            let mut acc_upper = CompensatedSum::new();
            // The honeypot may sit at the target node; that entry is always
            // outside v and u, so its capture weight is unconditional within
            // the expansion.
            let capture_j0 = capture_term_cond(spec, policy, j, j0);
            expand_partial_compromises(
                spec,
                policy,
                j,
                &others,
                0,
                1.0,
                capture_j0,
                lower[j][d - 1],
                upper[j][d - 1],
                d - 1,
                &lower,
                &upper,
                &mut acc_lower,
                &mut acc_upper,
            );
            let damp = 1.0 - spec.beta(j, j0) * spec.lambda(j, j0);
            lower[j][d] = lower[j][0] + damp * acc_lower.value();
            upper[j][d] = upper[j][0] + damp * acc_upper.value();
        }
    }
    Ok(BoundTables {
        lower,
        upper,
        delta_k,
    })
}

/// Ternary expansion over the partial-compromise classes of each non-target
/// node: compromised (`v`), link-but-failed (`u`), or no link. Accumulates
/// both bracket terms at the leaves.
#[allow(clippy::too_many_arguments)]
fn expand_partial_compromises(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    j: usize,
    others: &[usize],
    idx: usize,
    f_prod: f64,
    capture_sum: f64,
    max_lower: f64,
    sum_upper: f64,
    prev_horizon: usize,
    lower: &[Vec<f64>],
    upper: &[Vec<f64>],
    acc_lower: &mut CompensatedSum,
    acc_upper: &mut CompensatedSum,
) {
    if f_prod == 0.0 {
        return;
    }
    if idx == others.len() {
        let no_capture = 1.0 - capture_sum;
        acc_lower.add(f_prod * no_capture * max_lower);
        acc_upper.add(f_prod * no_capture * sum_upper.min(1.0));
        return;
    }
    let h = others[idx];
    let b = spec.beta(j, h);
    let l = spec.lambda(j, h);
    // h compromised this stage
    expand_partial_compromises(
        spec,
        policy,
        j,
        others,
        idx + 1,
        f_prod * b * l,
        capture_sum,
        max_lower.max(lower[h][prev_horizon]),
        sum_upper + upper[h][prev_horizon],
        prev_horizon,
        lower,
        upper,
        acc_lower,
        acc_upper,
    );
    // link existed, compromise failed
    expand_partial_compromises(
        spec,
        policy,
        j,
        others,
        idx + 1,
        f_prod * b * (1.0 - l),
        capture_sum,
        max_lower,
        sum_upper,
        prev_horizon,
        lower,
        upper,
        acc_lower,
        acc_upper,
    );
    // no link: h stays eligible as a honeypot location
    expand_partial_compromises(
        spec,
        policy,
        j,
        others,
        idx + 1,
        f_prod * (1.0 - b),
        capture_sum + capture_term_cond(spec, policy, j, h),
        max_lower,
        sum_upper,
        prev_horizon,
        lower,
        upper,
        acc_lower,
        acc_upper,
    );
}

/// Lower-bound vulnerability per DMZ node at horizon `delta_k`, in
/// `spec.dmz()` order.
pub fn ltv_lower(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    delta_k: usize,
) -> Result<Vec<f64>, LtvError> {
    let tables = bound_tables(spec, policy, delta_k)?;
    Ok(spec
        .dmz()
        .iter()
        .map(|&i| tables.lower_at(i, delta_k))
        .collect())
}

/// Upper-bound vulnerability per DMZ node at horizon `delta_k`.
pub fn ltv_upper(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    delta_k: usize,
) -> Result<Vec<f64>, LtvError> {
    let tables = bound_tables(spec, policy, delta_k)?;
    Ok(spec
        .dmz()
        .iter()
        .map(|&i| tables.upper_at(i, delta_k))
        .collect())
}

/// Exact per-horizon vulnerability for one initial node, plus the final
/// distribution diagnostics.
#[derive(Debug, Clone)]
pub struct ExactTrajectory {
    /// `values[d]` = probability the target is compromised within horizon d.
    pub values: Vec<f64>,
    /// Probability the episode ends detected within the full horizon.
    pub detected: f64,
    /// Worst probability-conservation slack seen at any stage.
    pub mass_defect: f64,
}

/// Exact evaluation by forward propagation over compromised-set states.
///
/// Per stage and state, service-link and compromise randomness reduces to
/// independent per-sink compromise probabilities; the honey-link choice is
/// marginalized analytically, with the honeypot's sink handled jointly with
/// its idleness event.
pub fn ltv_exact_single(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    delta_k: usize,
    initial: usize,
    cap: usize,
) -> Result<ExactTrajectory, LtvError> {
    let n = spec.n();
    if n > cap || n > 30 {
        return Err(LtvError::NetworkTooLargeForExact { n, cap });
    }
    if !spec.is_dmz(initial) {
        return Err(LtvError::InitialNodeNotInDmz { i: initial });
    }
    let j0 = spec.target();
    let size = 1usize << n;
    let mut dist = vec![0.0f64; size];
    dist[1 << initial] = 1.0;
    let mut detected = 0.0f64;
    let mut target = 0.0f64;
    let mut values = Vec::with_capacity(delta_k + 1);
    let mut mass_defect = 0.0f64;

    let mut next = vec![0.0f64; size];
    for _stage in 0..=delta_k {
        next.iter_mut().for_each(|x| *x = 0.0);
        for mask in 0..size {
            let m = dist[mask];
            if m == 0.0 {
                continue;
            }
            step_state(
                spec,
                policy,
                mask,
                m,
                j0,
                &mut next,
                &mut detected,
                &mut target,
            );
        }
        std::mem::swap(&mut dist, &mut next);
        let active: f64 = dist.iter().sum();
        let defect = (active + detected + target - 1.0).abs();
        mass_defect = mass_defect.max(defect);
        debug_assert!(defect < 1e-9, "state distribution defect {defect}");
        values.push(target);
    }
    Ok(ExactTrajectory {
        values,
        detected,
        mass_defect,
    })
}

/// One-stage transition for a single compromised set (bitmask), weight `m`.
#[allow(clippy::too_many_arguments)]
fn step_state(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    mask: usize,
    m: f64,
    j0: usize,
    next: &mut [f64],
    detected: &mut f64,
    target: &mut f64,
) {
    let n = spec.n();
    let compromised: Vec<usize> = (0..n).filter(|&s| mask & (1 << s) != 0).collect();
    let sinks: Vec<usize> = (0..n).filter(|&t| mask & (1 << t) == 0).collect();

    // Per-sink compromise probability from the current foothold.
    let mut p_comp = vec![0.0f64; n];
    for &t in &sinks {
        let mut stay = 1.0;
        for &s in &compromised {
            stay *= 1.0 - spec.beta(s, t) * spec.lambda(s, t);
        }
        p_comp[t] = 1.0 - stay;
    }

    // Honey-link mass reaching each sink from a compromised source, and the
    // same mass discounted by the identification probability.
    let mut gamma_mass = vec![0.0f64; n];
    let mut capture_mass = vec![0.0f64; n];
    for &w in &sinks {
        let mut g_sum = 0.0;
        let mut c_sum = 0.0;
        for &l in &compromised {
            let g = policy.get(l, w);
            if g > 0.0 {
                g_sum += g;
                c_sum += g * (1.0 - spec.q(l, w));
            }
        }
        gamma_mass[w] = g_sum;
        capture_mass[w] = c_sum;
    }
    let reachable_mass: f64 = sinks.iter().map(|&w| gamma_mass[w]).sum();

    // Inert honey link (source uncompromised, sink already owned, or no
    // deployment at all): every sink follows its plain probability.
    let inert = 1.0 - reachable_mass;
    if inert > 0.0 {
        spread_plain(m * inert, mask, j0, &sinks, &p_comp, None, next, target);
    }

    // Reachable honeypot at w: joint atoms over {detected, w untouched,
    // w compromised}, then the remaining sinks independently.
    for &w in &sinks {
        let g_w = gamma_mass[w];
        if g_w == 0.0 {
            continue;
        }
        let idle = spec.idle_prob(w);
        let a_detect = idle * capture_mass[w];
        let a_comp = g_w * p_comp[w];
        let a_stay = g_w - a_detect - a_comp;
        *detected += m * a_detect;
        if w == j0 {
            *target += m * a_comp;
            if a_stay > 0.0 {
                spread_plain(m * a_stay, mask, j0, &sinks, &p_comp, Some(w), next, target);
            }
        } else {
            if a_stay > 0.0 {
                spread_plain(m * a_stay, mask, j0, &sinks, &p_comp, Some(w), next, target);
            }
            if a_comp > 0.0 {
                spread_plain(
                    m * a_comp,
                    mask | (1 << w),
                    j0,
                    &sinks,
                    &p_comp,
                    Some(w),
                    next,
                    target,
                );
            }
        }
    }
}

/// Distributes `weight` over the subsets of newly compromised sinks
/// (excluding `fixed`, whose outcome the caller already settled). Mass on
/// subsets containing the target is absorbed immediately.
#[allow(clippy::too_many_arguments)]
fn spread_plain(
    weight: f64,
    mask: usize,
    j0: usize,
    sinks: &[usize],
    p_comp: &[f64],
    fixed: Option<usize>,
    next: &mut [f64],
    target: &mut f64,
) {
    let free: Vec<usize> = sinks
        .iter()
        .copied()
        .filter(|&t| t != j0 && Some(t) != fixed)
        .collect();
    let (hit, rest) = if fixed == Some(j0) {
        (0.0, weight)
    } else {
        (weight * p_comp[j0], weight * (1.0 - p_comp[j0]))
    };
    *target += hit;
    if rest == 0.0 {
        return;
    }
    distribute(rest, mask, &free, 0, p_comp, next);
}

fn distribute(
    weight: f64,
    mask: usize,
    free: &[usize],
    idx: usize,
    p_comp: &[f64],
    next: &mut [f64],
) {
    if weight == 0.0 {
        return;
    }
    if idx == free.len() {
        next[mask] += weight;
        return;
    }
    let t = free[idx];
    let p = p_comp[t];
    distribute(weight * p, mask | (1 << t), free, idx + 1, p_comp, next);
    distribute(weight * (1.0 - p), mask, free, idx + 1, p_comp, next);
}

/// Exact vulnerability per DMZ node (in `spec.dmz()` order) for every
/// horizon up to `delta_k`.
pub fn ltv_exact(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    delta_k: usize,
    cap: usize,
) -> Result<Vec<ExactTrajectory>, LtvError> {
    spec.dmz()
        .iter()
        .map(|&i| ltv_exact_single(spec, policy, delta_k, i, cap))
        .collect()
}

/// Intrusion-distribution-weighted aggregate of per-initial values given as
/// `(node index, value)` pairs covering the DMZ.
pub fn aggregate_ltv(spec: &NetworkSpec, per_initial: &[(usize, f64)]) -> Result<f64, LtvError> {
    for &i in spec.dmz() {
        if !per_initial.iter().any(|&(j, _)| j == i) {
            return Err(LtvError::MissingInitialNode { i });
        }
    }
    Ok(per_initial
        .iter()
        .map(|&(i, v)| spec.rho(i) * v)
        .sum())
}

/// Exact / lower / upper values for one horizon; `exact` is absent beyond
/// the evaluator cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsTriple {
    pub exact: Option<f64>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialEntry {
    pub node: String,
    pub index: usize,
    #[serde(flatten)]
    pub values: BoundsTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub delta_k: usize,
    pub per_initial: Vec<InitialEntry>,
    pub aggregate: BoundsTriple,
}

/// Full vulnerability assessment: per-initial-node values at the requested
/// horizon plus the whole per-horizon trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityReport {
    pub delta_k: usize,
    pub exact_available: bool,
    pub exact_cap: usize,
    pub per_initial: Vec<InitialEntry>,
    pub aggregate: BoundsTriple,
    pub trajectory: Vec<TrajectoryRow>,
}

/// Computes bounds always and the exact trajectory when the network fits
/// under `cap` and `bounds_only` is not requested.
pub fn vulnerability_report(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    delta_k: usize,
    cap: usize,
    bounds_only: bool,
) -> Result<VulnerabilityReport, LtvError> {
    let tables = bound_tables(spec, policy, delta_k)?;
    let exact_available = !bounds_only && spec.n() <= cap;
    let exact = if exact_available {
        Some(ltv_exact(spec, policy, delta_k, cap)?)
    } else {
        None
    };
    let mut trajectory = Vec::with_capacity(delta_k + 1);
    for d in 0..=delta_k {
        let mut per_initial = Vec::new();
        for (k, &i) in spec.dmz().iter().enumerate() {
            per_initial.push(InitialEntry {
                node: spec.node_id(i).to_string(),
                index: i,
                values: BoundsTriple {
                    exact: exact.as_ref().map(|e| e[k].values[d]),
                    lower: tables.lower_at(i, d),
                    upper: tables.upper_at(i, d),
                },
            });
        }
        let agg = |f: &dyn Fn(&InitialEntry) -> f64| -> f64 {
            per_initial.iter().map(|e| spec.rho(e.index) * f(e)).sum()
        };
        let aggregate = BoundsTriple {
            exact: if exact_available {
                Some(agg(&|e| e.values.exact.unwrap()))
            } else {
                None
            },
            lower: agg(&|e| e.values.lower),
            upper: agg(&|e| e.values.upper),
        };
        trajectory.push(TrajectoryRow {
            delta_k: d,
            per_initial,
            aggregate,
        });
    }
    let last = trajectory.last().expect("horizon 0 always present");
    Ok(VulnerabilityReport {
        delta_k,
        exact_available,
        exact_cap: cap,
        per_initial: last.per_initial.clone(),
        aggregate: last.aggregate,
        trajectory,
    })
}

/// Outcome of a threshold check, noting which figure was compared (the
/// exact value when available, otherwise the upper bound).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityCheck {
    pub secure: bool,
    pub threshold: f64,
    pub compared_value: f64,
    pub compared_figure: String,
}

pub fn check_security_level(report: &VulnerabilityReport, t0: f64) -> SecurityCheck {
    let (value, figure) = match report.aggregate.exact {
        Some(e) => (e, "exact"),
        None => (report.aggregate.upper, "upper"),
    };
    SecurityCheck {
        secure: value <= t0,
        threshold: t0,
        compared_value: value,
        compared_figure: figure.to_string(),
    }
}
