//! Policy quality metrics: probability of interference, stealthiness level
//! and cost of roaming.

use serde::{Deserialize, Serialize};

use crate::matrix::SquareMatrix;
use crate::net_model::{NetworkSpec, PolicyMatrix};

/// Cost of one honey-link change as a function of the two `(source,
/// honeypot)` pairs.
pub type LinkChangeCost = std::sync::Arc<dyn Fn((usize, usize), (usize, usize)) -> f64 + Send + Sync>;

/// Cost of swapping one honey link for another between stages.
///
/// The default location-only table charges `D[w1][w2]` for moving the
/// honeypot from `w1` to `w2` (with a zero diagonal, so keeping the location
/// is free regardless of the link source). The general four-index form is
/// available through [`CostTable::General`].
#[derive(Clone, Default)]
pub enum CostTable {
    #[default]
    Zero,
    Location(SquareMatrix),
    General(LinkChangeCost),
}

impl std::fmt::Debug for CostTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CostTable::Zero => write!(f, "CostTable::Zero"),
            CostTable::Location(d) => f.debug_tuple("CostTable::Location").field(d).finish(),
            CostTable::General(_) => write!(f, "CostTable::General(..)"),
        }
    }
}

/// Wire format: `{"type":"location","D":[[...]]}`; an absent table means
/// all-zero costs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RawCostTable {
    Location { d: SquareMatrix },
}

impl CostTable {
    pub fn from_raw(raw: Option<RawCostTable>) -> Result<Self, String> {
        match raw {
            None => Ok(CostTable::Zero),
            Some(RawCostTable::Location { d }) => {
                for ((i, j), v) in d.iter() {
                    if v < 0.0 {
                        return Err(format!("cost D[{i}][{j}] = {v} is negative"));
                    }
                    if i == j && v != 0.0 {
                        return Err(format!("cost D[{i}][{i}] = {v}, staying put must be free"));
                    }
                }
                Ok(CostTable::Location(d))
            }
        }
    }

    pub fn cost(&self, from: (usize, usize), to: (usize, usize)) -> f64 {
        match self {
            CostTable::Zero => 0.0,
            CostTable::Location(d) => d.get(from.1, to.1),
            CostTable::General(f) => f(from, to),
        }
    }
}

/// Whether the roaming cost weights each deployment by its interference
/// probability (as the defining double sum is written) or uses the plain
/// product of policy masses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorWeighting {
    #[default]
    Paper,
    Plain,
}

/// Probability that the stage's honey link lands on a non-idle node and has
/// to be abandoned.
pub fn probability_of_interference(spec: &NetworkSpec, policy: &PolicyMatrix) -> f64 {
    let n = spec.n();
    let mut total = 0.0;
    for w in 0..n {
        let interference = 1.0 - spec.idle_prob(w);
        if interference == 0.0 {
            continue;
        }
        let mass: f64 = (0..n).filter(|&h| h != w).map(|h| policy.get(h, w)).sum();
        total += interference * mass;
    }
    total
}

/// Shannon entropy of the policy in nats, with `0 ln 0 = 0`.
///
/// Higher is more random, hence stealthier; the optimizer subtracts this
/// term, so maximizing entropy and minimizing the objective agree.
pub fn stealthiness(policy: &PolicyMatrix) -> f64 {
    let mut h = 0.0;
    for (_, g) in policy.matrix().iter() {
        if g > 0.0 {
            h -= g * g.ln();
        }
    }
    h
}

/// Expected reconfiguration cost between two independent stage deployments.
pub fn cost_of_roaming(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    costs: &CostTable,
    weighting: CorWeighting,
) -> f64 {
    if matches!(costs, CostTable::Zero) {
        return 0.0;
    }
    let mut weighted: Vec<((usize, usize), f64)> = Vec::new();
    for ((h, w), g) in policy.matrix().iter() {
        if g == 0.0 || h == w {
            continue;
        }
        let weight = match weighting {
            CorWeighting::Paper => g * (1.0 - spec.idle_prob(w)),
            CorWeighting::Plain => g,
        };
        weighted.push(((h, w), weight));
    }
    let mut total = 0.0;
    for &(from, wf) in &weighted {
        if wf == 0.0 {
            continue;
        }
        for &(to, wt) in &weighted {
            total += wf * wt * costs.cost(from, to);
        }
    }
    total
}
