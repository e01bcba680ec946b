//! Shared helpers for unit tests: compact spec construction and seeded
//! random instances.

use crate::net_model::{validate_network, NetworkSpec, NodeKind, NodeLabel, RawNetwork};
use crate::rng::{RandomStream, StreamPurpose};

/// Builds a validated spec from index-based pieces. `rho` is given per DMZ
/// node in `dmz` order.
#[allow(clippy::too_many_arguments)]
pub(crate) fn spec_from_parts(
    n: usize,
    dmz: &[usize],
    reconfigurable: &[usize],
    target: usize,
    beta: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    rho: &[f64],
) -> NetworkSpec {
    let nodes: Vec<NodeLabel> = (0..n)
        .map(|i| NodeLabel {
            id: format!("n{i}"),
            kind: if i < n / 2 {
                NodeKind::User
            } else {
                NodeKind::Host
            },
        })
        .collect();
    let raw = RawNetwork {
        nodes: nodes.clone(),
        dmz: dmz.iter().map(|&i| nodes[i].id.clone()).collect(),
        reconfigurable: reconfigurable
            .iter()
            .map(|&i| nodes[i].id.clone())
            .collect(),
        target: nodes[target].id.clone(),
        beta,
        lambda,
        q,
        rho: dmz
            .iter()
            .zip(rho)
            .map(|(&i, &r)| (nodes[i].id.clone(), r))
            .collect(),
    };
    validate_network(&raw).expect("test spec must validate").0
}

pub(crate) fn zero_diag(mut m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    m
}

/// Seeded random instance: every off-diagonal probability drawn uniformly,
/// beta capped so products stay informative, single- or two-node DMZ.
pub(crate) fn random_spec(seed: u64, n: usize) -> NetworkSpec {
    let mut s = RandomStream::new(seed, StreamPurpose::InitialNode, 0, 0);
    let mut mat = |hi: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 0.0 } else { s.next_f64() * hi })
                    .collect()
            })
            .collect()
    };
    let beta = mat(0.6);
    let lambda = mat(1.0);
    let q = mat(1.0);
    let target = n - 1;
    let two_dmz = n >= 3 && s.bernoulli(0.5);
    let dmz: Vec<usize> = if two_dmz { vec![0, 1] } else { vec![0] };
    let rho: Vec<f64> = if two_dmz {
        let r = 0.2 + 0.6 * s.next_f64();
        vec![r, 1.0 - r]
    } else {
        vec![1.0]
    };
    let reconfigurable: Vec<usize> = (0..n).filter(|&w| w != target).collect();
    spec_from_parts(n, &dmz, &reconfigurable, target, beta, lambda, q, &rho)
}
