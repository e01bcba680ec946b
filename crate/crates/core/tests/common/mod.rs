//! Seeded instance generation shared by the integration suites.
#![allow(dead_code)] // each test target uses a different subset

use latmove_core::matrix::SquareMatrix;
use latmove_core::net_model::{
    validate_network, NetworkSpec, NodeKind, NodeLabel, PolicyMatrix, RawNetwork,
};
use latmove_core::rng::{RandomStream, StreamPurpose};

pub struct InstanceOptions {
    pub n: usize,
    /// Force a single-node DMZ (several analyses assume it).
    pub single_dmz: bool,
    /// Guarantee a usable direct link from the first DMZ node to the target.
    pub ensure_direct: bool,
}

pub fn random_instance(seed: u64, opts: &InstanceOptions) -> NetworkSpec {
    let n = opts.n;
    let mut s = RandomStream::new(seed, StreamPurpose::InitialNode, 7, 7);
    let mut matrix = |hi: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 0.0 } else { s.next_f64() * hi })
                    .collect()
            })
            .collect()
    };
    let mut beta = matrix(0.6);
    let mut lambda = matrix(1.0);
    let q = matrix(1.0);
    let target = n - 1;
    let dmz_len = if opts.single_dmz || n < 3 || s.bernoulli(0.5) {
        1
    } else {
        2
    };
    if opts.ensure_direct {
        beta[0][target] = 0.2 + 0.5 * s.next_f64();
        lambda[0][target] = 0.5 + 0.5 * s.next_f64();
    }
    let rho = if dmz_len == 1 {
        vec![1.0]
    } else {
        let r = 0.2 + 0.6 * s.next_f64();
        vec![r, 1.0 - r]
    };
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
        dmz: (0..dmz_len).map(|i| nodes[i].id.clone()).collect(),
        reconfigurable: (0..n)
            .filter(|&w| w != target)
            .map(|w| nodes[w].id.clone())
            .collect(),
        target: nodes[target].id.clone(),
        beta,
        lambda,
        q,
        rho: (0..dmz_len)
            .map(|i| (nodes[i].id.clone(), rho[i]))
            .collect(),
    };
    validate_network(&raw).expect("generated instance validates").0
}

/// Random point on the feasible simplex.
pub fn random_policy(spec: &NetworkSpec, seed: u64) -> PolicyMatrix {
    let pairs = spec.feasible_pairs();
    let mut s = RandomStream::new(seed, StreamPurpose::HoneyLink, 13, 13);
    let weights: Vec<f64> = pairs.iter().map(|_| s.next_f64() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut gamma = SquareMatrix::zeros(spec.n());
    for (&(l, w), &v) in pairs.iter().zip(&weights) {
        gamma.set(l, w, v / total);
    }
    PolicyMatrix::new(spec, gamma).expect("random policy is feasible")
}

/// Uniform policy over feasible links whose source is outside the DMZ, so
/// no DMZ attacker can ever be captured at his initial node.
pub fn zero_poic_policy(spec: &NetworkSpec) -> PolicyMatrix {
    let pairs: Vec<(usize, usize)> = spec
        .feasible_pairs()
        .into_iter()
        .filter(|&(l, _)| !spec.is_dmz(l))
        .collect();
    if pairs.is_empty() {
        return PolicyMatrix::zero(spec);
    }
    let mut gamma = SquareMatrix::zeros(spec.n());
    let p = 1.0 / pairs.len() as f64;
    for (l, w) in pairs {
        gamma.set(l, w, p);
    }
    PolicyMatrix::new(spec, gamma).expect("indirect policy is feasible")
}
