//! Iterative honeypot policy synthesis: evaluate the chosen vulnerability
//! bound at the current policy, freeze it into linear coefficients, solve
//! the entropy-regularized subproblem in closed form, repeat.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltv::{bound_tables, ltv_exact, BoundTables, LtvError, DEFAULT_EXACT_CAP};
use crate::matrix::SquareMatrix;
use crate::metrics::{cost_of_roaming, probability_of_interference, stealthiness, CorWeighting, CostTable};
use crate::net_model::{NetworkSpec, PolicyError, PolicyMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub alpha_poi: f64,
    pub alpha_sl: f64,
    pub alpha_cor: f64,
}

impl ObjectiveWeights {
    pub fn new(alpha_poi: f64, alpha_sl: f64, alpha_cor: f64) -> Self {
        assert!(
            alpha_poi >= 0.0 && alpha_sl >= 0.0 && alpha_cor >= 0.0,
            "weights must be nonnegative"
        );
        Self {
            alpha_poi,
            alpha_sl,
            alpha_cor,
        }
    }

    pub fn vulnerability_only() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

/// Which vulnerability figure the objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LtvVariant {
    Exact,
    Lower,
    Upper,
}

/// Which bound the optimizer minimizes: the risky policy works on the lower
/// bound, the conservative one on the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizeVariant {
    Risky,
    Conservative,
}

impl OptimizeVariant {
    fn ltv_variant(self) -> LtvVariant {
        match self {
            OptimizeVariant::Risky => LtvVariant::Lower,
            OptimizeVariant::Conservative => LtvVariant::Upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationTrace {
    pub iterates: Vec<PolicyMatrix>,
    /// True (non-linearized) objective at each iterate, so outer-loop
    /// non-monotonicity is visible.
    pub objective_values: Vec<f64>,
    /// Infinity-norm policy change per iteration; one entry fewer than
    /// iterates.
    pub step_norms: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, Error)]
pub enum PolicyOptError {
    #[error("no feasible honey link: cannot optimize")]
    EmptyFeasibleSet,
    #[error("did not converge within {max_iter} iterations (last step norm {last_step})")]
    DidNotConverge {
        max_iter: usize,
        last_step: f64,
        policy: PolicyMatrix,
        trace: Box<OptimizationTrace>,
    },
    #[error(transparent)]
    Ltv(#[from] LtvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

fn aggregate_from_tables(spec: &NetworkSpec, tables: &BoundTables, variant: LtvVariant) -> f64 {
    spec.dmz()
        .iter()
        .map(|&i| {
            spec.rho(i)
                * match variant {
                    LtvVariant::Lower => tables.lower_at(i, tables.delta_k),
                    LtvVariant::Upper => tables.upper_at(i, tables.delta_k),
                    LtvVariant::Exact => unreachable!("exact has no table"),
                }
        })
        .sum()
}

fn aggregate_ltv_value(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    delta_k: usize,
    variant: LtvVariant,
    exact_cap: usize,
) -> Result<f64, LtvError> {
    match variant {
        LtvVariant::Exact => {
            let trajectories = ltv_exact(spec, policy, delta_k, exact_cap)?;
            Ok(spec
                .dmz()
                .iter()
                .zip(&trajectories)
                .map(|(&i, t)| spec.rho(i) * t.values[delta_k])
                .sum())
        }
        _ => {
            let tables = bound_tables(spec, policy, delta_k)?;
            Ok(aggregate_from_tables(spec, &tables, variant))
        }
    }
}

/// Full objective: vulnerability figure plus interference cost, minus the
/// stealthiness entropy, plus the roaming cost.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    weights: &ObjectiveWeights,
    costs: &CostTable,
    cor_weighting: CorWeighting,
    delta_k: usize,
    variant: LtvVariant,
    exact_cap: usize,
) -> Result<f64, LtvError> {
    let g = aggregate_ltv_value(spec, policy, delta_k, variant, exact_cap)?;
    Ok(g + weights.alpha_poi * probability_of_interference(spec, policy)
        - weights.alpha_sl * stealthiness(policy)
        + weights.alpha_cor * cost_of_roaming(spec, policy, costs, cor_weighting))
}

/// Linear coefficients of the subproblem: the bound's capture sums with the
/// previous-horizon values frozen at `gamma_t`, the interference term as
/// written, and the roaming term with its first factor fixed at `gamma_t`.
#[allow(clippy::too_many_arguments)]
pub fn linearized_coefficients(
    spec: &NetworkSpec,
    gamma_t: &PolicyMatrix,
    weights: &ObjectiveWeights,
    costs: &CostTable,
    cor_weighting: CorWeighting,
    delta_k: usize,
    variant: OptimizeVariant,
) -> Result<SquareMatrix, LtvError> {
    let tables = if delta_k >= 1 {
        Some(bound_tables(spec, gamma_t, delta_k - 1)?)
    } else {
        None
    };
    Ok(linearized_coefficients_inner(
        spec,
        gamma_t,
        weights,
        costs,
        cor_weighting,
        delta_k,
        variant,
        tables.as_ref(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn linearized_coefficients_inner(
    spec: &NetworkSpec,
    gamma_t: &PolicyMatrix,
    weights: &ObjectiveWeights,
    costs: &CostTable,
    cor_weighting: CorWeighting,
    delta_k: usize,
    variant: OptimizeVariant,
    tables: Option<&BoundTables>,
) -> SquareMatrix {
    let n = spec.n();
    let j0 = spec.target();
    let mut c = SquareMatrix::zeros(n);

    if weights.alpha_poi > 0.0 {
        for w in 0..n {
            let interference = 1.0 - spec.idle_prob(w);
            if interference == 0.0 {
                continue;
            }
            for l in 0..n {
                if l != w {
                    c.set(l, w, c.get(l, w) + weights.alpha_poi * interference);
                }
            }
        }
    }

    if weights.alpha_cor > 0.0 && !matches!(costs, CostTable::Zero) {
        // previous deployment distribution, interference-weighted when the
        // metric is
        let mut prev: Vec<((usize, usize), f64)> = Vec::new();
        for ((h, w), g) in gamma_t.matrix().iter() {
            if g == 0.0 || h == w {
                continue;
            }
            let weight = match cor_weighting {
                CorWeighting::Paper => g * (1.0 - spec.idle_prob(w)),
                CorWeighting::Plain => g,
            };
            if weight > 0.0 {
                prev.push(((h, w), weight));
            }
        }
        for l in 0..n {
            for w in 0..n {
                if l == w {
                    continue;
                }
                let own = match cor_weighting {
                    CorWeighting::Paper => 1.0 - spec.idle_prob(w),
                    CorWeighting::Plain => 1.0,
                };
                if own == 0.0 {
                    continue;
                }
                let transfer: f64 = prev
                    .iter()
                    .map(|&(from, pw)| pw * costs.cost(from, (l, w)))
                    .sum();
                c.set(l, w, c.get(l, w) + weights.alpha_cor * own * transfer);
            }
        }
    }

    // Vulnerability surrogate: only rows of DMZ nodes carry weight.
    for &i in spec.dmz() {
        let rho = spec.rho(i);
        if rho == 0.0 {
            continue;
        }
        let direct = spec.beta(i, j0) * spec.lambda(i, j0);
        if direct > 0.0 {
            for w in 0..n {
                if w == i || w == j0 {
                    continue;
                }
                let slope = rho * direct * (1.0 - spec.q(i, w)) * spec.idle_prob(w);
                c.set(i, w, c.get(i, w) - slope);
            }
        }
        if delta_k >= 1 {
            let tables = tables.expect("tables computed for delta_k >= 1");
            let mut occupancy = vec![0.0f64; n];
            accumulate_eligible_mass(
                spec,
                i,
                variant,
                tables,
                delta_k - 1,
                &mut occupancy,
            );
            for w in 0..n {
                if w == i || occupancy[w] == 0.0 {
                    continue;
                }
                let slope = rho
                    * (1.0 - direct)
                    * (1.0 - spec.q(i, w))
                    * spec.idle_prob_excluding_source(i, w)
                    * occupancy[w];
                c.set(i, w, c.get(i, w) - slope);
            }
        }
    }
    c
}

/// For each node `w`, the mass `sum f_{v,u} * recursion-value` over the
/// partial-compromise classes in which `w` stays eligible as a honeypot
/// (no link from `i`, not newly compromised). The target node is eligible
/// in every class.
fn accumulate_eligible_mass(
    spec: &NetworkSpec,
    i: usize,
    variant: OptimizeVariant,
    tables: &BoundTables,
    prev_horizon: usize,
    occupancy: &mut [f64],
) {
    let j0 = spec.target();
    let others: Vec<usize> = (0..spec.n()).filter(|&h| h != i && h != j0).collect();
    let mut out_stack = Vec::with_capacity(others.len());
    recurse_eligible(
        spec,
        i,
        variant,
        tables,
        prev_horizon,
        &others,
        0,
        1.0,
        match variant {
            OptimizeVariant::Risky => tables.lower_at(i, prev_horizon),
            OptimizeVariant::Conservative => tables.upper_at(i, prev_horizon),
        },
        &mut out_stack,
        occupancy,
    );
}

#[allow(clippy::too_many_arguments)]
fn recurse_eligible(
    spec: &NetworkSpec,
    i: usize,
    variant: OptimizeVariant,
    tables: &BoundTables,
    prev_horizon: usize,
    others: &[usize],
    idx: usize,
    f_prod: f64,
    rec_value: f64,
    out_stack: &mut Vec<usize>,
    occupancy: &mut [f64],
) {
    if f_prod == 0.0 {
        return;
    }
    if idx == others.len() {
        let rec = match variant {
            OptimizeVariant::Risky => rec_value,
            OptimizeVariant::Conservative => rec_value.min(1.0),
        };
        let contribution = f_prod * rec;
        occupancy[spec.target()] += contribution;
        for &h in out_stack.iter() {
            occupancy[h] += contribution;
        }
        return;
    }
    let h = others[idx];
    let b = spec.beta(i, h);
    let l = spec.lambda(i, h);
    // compromised: recursion value absorbs h's previous-horizon figure
    let rec_v = match variant {
        OptimizeVariant::Risky => rec_value.max(tables.lower_at(h, prev_horizon)),
        OptimizeVariant::Conservative => rec_value + tables.upper_at(h, prev_horizon),
    };
    recurse_eligible(
        spec, i, variant, tables, prev_horizon, others, idx + 1, f_prod * b * l, rec_v, out_stack,
        occupancy,
    );
    // link existed but failed
    recurse_eligible(
        spec,
        i,
        variant,
        tables,
        prev_horizon,
        others,
        idx + 1,
        f_prod * b * (1.0 - l),
        rec_value,
        out_stack,
        occupancy,
    );
    // no link: h eligible
    out_stack.push(h);
    recurse_eligible(
        spec,
        i,
        variant,
        tables,
        prev_horizon,
        others,
        idx + 1,
        f_prod * (1.0 - b),
        rec_value,
        out_stack,
        occupancy,
    );
    out_stack.pop();
}

/// Closed-form minimizer of `sum(c * gamma) + alpha_sl * sum(gamma ln
/// gamma)` over the feasible simplex: a Gibbs distribution for positive
/// `alpha_sl`, the lexicographically first argmin for `alpha_sl = 0`.
pub fn gibbs_step(
    c: &SquareMatrix,
    alpha_sl: f64,
    feasible: &[(usize, usize)],
) -> Result<SquareMatrix, PolicyOptError> {
    if feasible.is_empty() {
        return Err(PolicyOptError::EmptyFeasibleSet);
    }
    let n = c.n();
    let mut gamma = SquareMatrix::zeros(n);
    if alpha_sl > 0.0 {
        // shift by the feasible minimum before exponentiating
        let min = feasible
            .iter()
            .map(|&(l, w)| c.get(l, w))
            .fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for &(l, w) in feasible {
            let e = (-(c.get(l, w) - min) / alpha_sl).exp();
            gamma.set(l, w, e);
            total += e;
        }
        for &(l, w) in feasible {
            gamma.set(l, w, gamma.get(l, w) / total);
        }
    } else {
        let mut best = feasible[0];
        for &(l, w) in &feasible[1..] {
            if c.get(l, w) < c.get(best.0, best.1) {
                best = (l, w);
            }
        }
        gamma.set(best.0, best.1, 1.0);
    }
    Ok(gamma)
}

/// Runs the iteration from `gamma_0` (uniform when absent) until the
/// infinity-norm step drops to `epsilon` or `max_iter` is exhausted.
/// Non-convergence is an error carrying the final iterate and full trace.
#[allow(clippy::too_many_arguments)]
pub fn optimize(
    spec: &NetworkSpec,
    weights: &ObjectiveWeights,
    costs: &CostTable,
    cor_weighting: CorWeighting,
    delta_k: usize,
    variant: OptimizeVariant,
    epsilon: f64,
    max_iter: usize,
    gamma_0: Option<PolicyMatrix>,
) -> Result<(PolicyMatrix, OptimizationTrace), PolicyOptError> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    assert!(max_iter >= 1, "max_iter must be at least 1");
    let feasible = spec.feasible_pairs();
    if feasible.is_empty() {
        return Err(PolicyOptError::EmptyFeasibleSet);
    }
    let mut current = match gamma_0 {
        Some(g) => g,
        None => PolicyMatrix::uniform(spec)?,
    };
    let ltv_variant = variant.ltv_variant();
    let true_objective = |policy: &PolicyMatrix| -> Result<f64, LtvError> {
        objective(
            spec,
            policy,
            weights,
            costs,
            cor_weighting,
            delta_k,
            ltv_variant,
            DEFAULT_EXACT_CAP,
        )
    };

    let mut iterates = vec![current.clone()];
    let mut objective_values = vec![true_objective(&current)?];
    let mut step_norms = Vec::new();

    for iteration in 1..=max_iter {
        let c = linearized_coefficients(
            spec,
            &current,
            weights,
            costs,
            cor_weighting,
            delta_k,
            variant,
        )?;
        let next_gamma = gibbs_step(&c, weights.alpha_sl, &feasible)?;
        let next = PolicyMatrix::new(spec, next_gamma)?;
        let step = next.matrix().max_abs_diff(current.matrix());
        current = next;
        iterates.push(current.clone());
        objective_values.push(true_objective(&current)?);
        step_norms.push(step);
        if step <= epsilon {
            let trace = OptimizationTrace {
                iterates,
                objective_values,
                step_norms,
                converged: true,
                iterations_used: iteration,
            };
            return Ok((current, trace));
        }
    }
    let last_step = *step_norms.last().expect("max_iter >= 1");
    let trace = OptimizationTrace {
        iterates,
        objective_values,
        step_norms,
        converged: false,
        iterations_used: max_iter,
    };
    Err(PolicyOptError::DidNotConverge {
        max_iter,
        last_step,
        policy: current,
        trace: Box::new(trace),
    })
}
