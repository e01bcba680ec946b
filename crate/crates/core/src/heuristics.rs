//! Closed-form vulnerability analysis for the two heuristic policy
//! families: indirect policies (no honey link from the intrusion node) and
//! direct policies (a fixed honey link from the intrusion node).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltv::{ltv_exact_single, LtvError};
use crate::net_model::{NetworkSpec, PolicyMatrix, PolicyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeuristicsError {
    #[error("initial node {i} is not in the dmz")]
    InitialNodeNotInDmz { i: usize },
    #[error("honeypot node {w0} must differ from the initial and target nodes")]
    InvalidHoneypotNode { w0: usize },
    #[error(transparent)]
    Ltv(#[from] LtvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Probability of movement deterrence: in one stage the attacker at `i`
/// neither hits the target directly nor gains any other node.
///
/// The subset sum over failure classes collapses to a product of per-node
/// complements.
pub fn pomd(spec: &NetworkSpec, i: usize) -> Result<f64, HeuristicsError> {
    if !spec.is_dmz(i) {
        return Err(HeuristicsError::InitialNodeNotInDmz { i });
    }
    let j0 = spec.target();
    let mut stay = 1.0;
    for h in 0..spec.n() {
        if h != i && h != j0 {
            stay *= 1.0 - spec.beta(i, h) * spec.lambda(i, h);
        }
    }
    Ok((1.0 - spec.beta(i, j0) * spec.lambda(i, j0)) * stay)
}

/// Horizon-`delta_k` vulnerability upper bound under zero capture
/// probability: `1 - r^delta_k * (1 - beta_lambda)`.
pub fn indirect_bound(r: f64, beta_lambda: f64, delta_k: usize) -> f64 {
    assert!((0.0..=1.0).contains(&r), "r = {r} outside [0,1]");
    assert!(
        (0.0..=1.0).contains(&beta_lambda),
        "beta_lambda = {beta_lambda} outside [0,1]"
    );
    1.0 - r.powi(delta_k as i32) * (1.0 - beta_lambda)
}

/// Asymptotic regime of the deterrence schedule `r = 1 - m / delta_k^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `n = 1`: the bound converges to a constant between the direct-hit
    /// level and one.
    Critical,
    /// `n > 1`: deterrence grows fast enough that only the direct hit
    /// remains (secure regime; zero vulnerability when no direct link
    /// exists).
    Subcritical,
    /// `n < 1`: deterrence decays too slowly, the bound goes to one.
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TocLimit {
    pub limit: f64,
    pub regime: Regime,
}

/// Infinite-horizon limit of [`indirect_bound`] along `r = 1 - m *
/// delta_k^(-n)`. Orders within 1e-12 of one are classified as critical.
pub fn toc_limit(m: f64, n: f64, beta_lambda: f64) -> TocLimit {
    assert!(m > 0.0 && n > 0.0, "m and n must be positive");
    if (n - 1.0).abs() <= 1e-12 {
        TocLimit {
            limit: 1.0 - (-m).exp() * (1.0 - beta_lambda),
            regime: Regime::Critical,
        }
    } else if n > 1.0 {
        TocLimit {
            limit: beta_lambda,
            regime: Regime::Subcritical,
        }
    } else {
        TocLimit {
            limit: 1.0,
            regime: Regime::Supercritical,
        }
    }
}

/// Closed-form constants and bounds for the deterministic direct policy
/// `gamma[i][w0] = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectAnalysis {
    pub initial: usize,
    pub w0: usize,
    /// Direct-hit probability `beta[i][j0] * lambda[i][j0]`.
    pub beta_lambda: f64,
    /// Probability the honeypot is idle and unidentified: the capture
    /// weight of the fixed honey link.
    pub k1: f64,
    /// Mass of partial-compromise classes avoiding `w0`.
    pub k2: f64,
    /// Contraction factor of the one-dimensional recursion.
    pub r2: f64,
    pub t2_upper: f64,
    pub t2_lower2: f64,
    /// Infinite-horizon value of the accumulating lower bound.
    pub t2_lower1_limit: f64,
    /// `max(t2_lower1_limit, t2_lower2)`: the vulnerability floor as the
    /// horizon grows.
    pub residue: f64,
}

impl DirectAnalysis {
    /// Accumulating lower bound at a finite horizon.
    pub fn t2_lower1(&self, delta_k: usize) -> f64 {
        let a = self.beta_lambda * (1.0 - self.k1);
        if (1.0 - self.r2).abs() < 1e-15 {
            return a * (delta_k as f64 + 1.0);
        }
        a * (1.0 - self.r2.powi(delta_k as i32 + 1)) / (1.0 - self.r2)
    }
}

pub fn direct_analysis(
    spec: &NetworkSpec,
    i: usize,
    w0: usize,
) -> Result<DirectAnalysis, HeuristicsError> {
    if !spec.is_dmz(i) {
        return Err(HeuristicsError::InitialNodeNotInDmz { i });
    }
    let j0 = spec.target();
    if w0 == i || w0 == j0 || w0 >= spec.n() {
        return Err(HeuristicsError::InvalidHoneypotNode { w0 });
    }
    let beta_lambda = spec.beta(i, j0) * spec.lambda(i, j0);
    let k1 = spec.idle_prob(w0) * (1.0 - spec.q(i, w0));
    // Each node other than i, j0, w0 contributes total class mass one; w0
    // always falls in the no-link class.
    let mut k2 = 1.0 - spec.beta(i, w0);
    for h in 0..spec.n() {
        if h != i && h != j0 && h != w0 {
            let b = spec.beta(i, h);
            let l = spec.lambda(i, h);
            k2 *= b * l + b * (1.0 - l) + (1.0 - b);
        }
    }
    let shrink = k1 * k2 * (1.0 - spec.beta(i, w0));
    let r2 = (1.0 - beta_lambda) * (1.0 - shrink);
    let t2_upper = 1.0 - beta_lambda * k1 - (1.0 - beta_lambda) * shrink;
    let numer = beta_lambda * (1.0 - k1);
    let denom = (1.0 - beta_lambda) * shrink + beta_lambda;
    let t2_lower2 = if denom == 0.0 { 0.0 } else { numer / denom };
    let t2_lower1_limit = if r2 < 1.0 { numer / (1.0 - r2) } else { 0.0 };
    Ok(DirectAnalysis {
        initial: i,
        w0,
        beta_lambda,
        k1,
        k2,
        r2,
        t2_upper,
        t2_lower2,
        t2_lower1_limit,
        residue: t2_lower1_limit.max(t2_lower2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueRow {
    pub delta_k: usize,
    pub exact: f64,
    pub t2_lower1: f64,
    pub within_sandwich: bool,
}

/// Exact trajectory under the direct policy compared against the
/// closed-form bounds. Deviations are enumerated, not fatal: the bounds
/// come from the one-node recursion while `exact` follows the full
/// multi-node model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueReport {
    pub analysis: DirectAnalysis,
    pub rows: Vec<ResidueRow>,
    /// Horizons (>= 1) where the sandwich `t2_lower1 <= exact <= t2_upper`
    /// fails.
    pub sandwich_violations: Vec<usize>,
    /// Horizons where the value sat below `t2_lower2` but failed to
    /// strictly increase.
    pub increase_violations: Vec<usize>,
    pub strict_increase_ok: bool,
    pub sandwich_ok: bool,
    /// Final exact value minus the residue floor.
    pub gap_to_residue: f64,
}

pub fn verify_residue(
    spec: &NetworkSpec,
    i: usize,
    w0: usize,
    horizon_cap: usize,
    exact_cap: usize,
) -> Result<ResidueReport, HeuristicsError> {
    let analysis = direct_analysis(spec, i, w0)?;
    let policy = PolicyMatrix::direct(spec, i, w0)?;
    let trajectory = ltv_exact_single(spec, &policy, horizon_cap, i, exact_cap)?;
    let tol = 1e-12;
    let mut rows = Vec::with_capacity(horizon_cap + 1);
    let mut sandwich_violations = Vec::new();
    let mut increase_violations = Vec::new();
    for (d, &exact) in trajectory.values.iter().enumerate() {
        let lo = analysis.t2_lower1(d);
        let within = d == 0 || (exact >= lo - tol && exact <= analysis.t2_upper + tol);
        if d >= 1 && !within {
            sandwich_violations.push(d);
        }
        if d >= 1 {
            let prev = trajectory.values[d - 1];
            if prev < analysis.t2_lower2 - tol && exact <= prev + tol {
                increase_violations.push(d);
            }
        }
        rows.push(ResidueRow {
            delta_k: d,
            exact,
            t2_lower1: lo,
            within_sandwich: within,
        });
    }
    let final_exact = *trajectory.values.last().expect("nonempty");
    Ok(ResidueReport {
        analysis,
        sandwich_ok: sandwich_violations.is_empty(),
        strict_increase_ok: increase_violations.is_empty(),
        sandwich_violations,
        increase_violations,
        rows,
        gap_to_residue: final_exact - analysis.residue,
    })
}
