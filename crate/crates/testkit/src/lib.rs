//! Independent reference implementations used to cross-check the main
//! crate's algorithms in tests. Everything here favors obviousness over
//! speed: scalar loops, pairwise comparisons, brute-force enumeration.
//!
//! The forward oracle keeps the same per-target summation order as the main
//! crate (ascending source index), so piecewise-linear networks must match
//! it bit for bit; the rest of the plumbing is written from scratch.

use nnbisim::activation::ActivationKind;
use nnbisim::network::Network;
use nnbisim::partition::{is_finer, LayerPartition, NetPartition};
use rand::Rng;

/// Scalar forward pass with explicit index loops and a local activation
/// table. Panics on shape mismatch; oracle inputs are trusted.
pub fn oracle_eval(net: &Network, input: &[f64]) -> Vec<f64> {
    assert_eq!(input.len(), net.layer_size(0), "input width mismatch");
    let mut current = input.to_vec();
    for i in 1..=net.depth() {
        let src = net.layer_size(i - 1);
        let dst = net.layer_size(i);
        let mut next = Vec::with_capacity(dst);
        for t in 0..dst {
            let mut z = 0.0f64;
            for s in 0..src {
                z += net.weights(i).get(s, t) * current[s];
            }
            z += net.biases(i)[t];
            next.push(oracle_apply(net.activations(i)[t], z));
        }
        current = next;
    }
    current
}

fn oracle_apply(kind: ActivationKind, z: f64) -> f64 {
    match kind {
        ActivationKind::Relu => {
            if z > 0.0 {
                z
            } else {
                0.0
            }
        }
        ActivationKind::LeakyRelu { slope } => {
            if z < 0.0 {
                slope * z
            } else {
                z
            }
        }
        ActivationKind::Tanh => z.tanh(),
        ActivationKind::Sigmoid => {
            // Naive formula; fine for the moderate pre-activations tests use.
            1.0 / (1.0 + (-z).exp())
        }
        ActivationKind::Softplus => {
            if z > 30.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            }
        }
        ActivationKind::Arctan => z.atan(),
        ActivationKind::Softsign => z / (1.0 + z.abs()),
        ActivationKind::Identity => z,
    }
}

fn block_sum(net: &Network, i: usize, block: &[usize], target: usize) -> f64 {
    let mut sum = 0.0;
    for &s in block {
        sum += net.weights(i).get(s, target);
    }
    sum
}

/// Definition-chasing exact check: every same-block pair in every non-input
/// layer must share activation, bias, and per-previous-block weight sums.
/// All pairs are compared, not just pairs with a representative.
pub fn naive_is_bisimulation(net: &Network, p: &NetPartition) -> bool {
    naive_is_delta_bisimulation(net, p, 0.0)
}

/// Pairwise spread version: activations must still match exactly, while
/// bias and weight-sum gaps may reach `delta` (inclusive).
pub fn naive_is_delta_bisimulation(net: &Network, p: &NetPartition, delta: f64) -> bool {
    assert!(delta >= 0.0);
    for i in 1..=net.depth() {
        if !naive_layer_ok(net, i, p.layer(i - 1), p.layer(i), delta) {
            return false;
        }
    }
    true
}

fn naive_layer_ok(
    net: &Network,
    i: usize,
    prev: &LayerPartition,
    cur: &LayerPartition,
    delta: f64,
) -> bool {
    for block in cur.blocks() {
        for (pos, &u) in block.iter().enumerate() {
            for &v in &block[pos + 1..] {
                if net.activations(i)[u] != net.activations(i)[v] {
                    return false;
                }
                if (net.biases(i)[u] - net.biases(i)[v]).abs() > delta {
                    return false;
                }
                for prev_block in prev.blocks() {
                    let a = block_sum(net, i, prev_block, u);
                    let b = block_sum(net, i, prev_block, v);
                    if (a - b).abs() > delta {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// All set partitions of `0..n`, generated from restricted growth strings.
/// Counts follow the Bell numbers: 1, 1, 2, 5, 15, 52 for n = 0..=5.
pub fn enumerate_set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    grow(&mut rgs, 1, 1, &mut out);
    out
}

fn grow(rgs: &mut Vec<usize>, pos: usize, num_blocks: usize, out: &mut Vec<Vec<Vec<usize>>>) {
    if pos == rgs.len() {
        let mut blocks = vec![Vec::new(); num_blocks];
        for (node, &b) in rgs.iter().enumerate() {
            blocks[b].push(node);
        }
        out.push(blocks);
        return;
    }
    for b in 0..=num_blocks {
        rgs[pos] = b;
        grow(rgs, pos + 1, num_blocks.max(b + 1), out);
    }
}

/// Every exact bisimulation of the network, found by depth-first search
/// over per-layer set partitions with early rejection: a candidate for
/// layer `i` is checked against the chosen layer `i - 1` partition before
/// deeper layers are expanded. Exponential; keep layers at 5 nodes or less.
pub fn enumerate_all_bisimulations(net: &Network) -> Vec<NetPartition> {
    let per_layer: Vec<Vec<LayerPartition>> = (0..=net.depth())
        .map(|i| {
            enumerate_set_partitions(net.layer_size(i))
                .into_iter()
                .map(|blocks| LayerPartition::new(i, blocks).expect("generated blocks are valid"))
                .collect()
        })
        .collect();
    let mut found = Vec::new();
    let mut chosen: Vec<LayerPartition> = Vec::new();
    search(net, &per_layer, &mut chosen, &mut found);
    found
}

fn search(
    net: &Network,
    per_layer: &[Vec<LayerPartition>],
    chosen: &mut Vec<LayerPartition>,
    found: &mut Vec<NetPartition>,
) {
    let i = chosen.len();
    if i == per_layer.len() {
        found.push(NetPartition::new(chosen.clone()).expect("layers are consecutive"));
        return;
    }
    for cand in &per_layer[i] {
        if i > 0 && !naive_layer_ok(net, i, &chosen[i - 1], cand, 0.0) {
            continue;
        }
        chosen.push(cand.clone());
        search(net, per_layer, chosen, found);
        chosen.pop();
    }
}

/// The coarsest exact bisimulation, by exhaustive enumeration: the unique
/// one every other bisimulation refines. Panics if none of the enumerated
/// bisimulations is coarsest, which would falsify the join property the
/// splitting algorithm relies on.
pub fn coarsest_by_enumeration(net: &Network) -> NetPartition {
    let all = enumerate_all_bisimulations(net);
    assert!(!all.is_empty(), "the identity partition is always a bisimulation");
    'outer: for cand in &all {
        for other in &all {
            if !is_finer(other, cand).expect("enumerated partitions share the net's shape") {
                continue 'outer;
            }
        }
        return cand.clone();
    }
    panic!("no coarsest bisimulation found among {} candidates", all.len());
}

/// Uniform-ish random partition of `0..n` via a random growth string.
pub fn random_partition<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<usize>> {
    let mut num_blocks = 0usize;
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for node in 0..n {
        let b = rng.random_range(0..=num_blocks);
        if b == num_blocks {
            blocks.push(Vec::new());
            num_blocks += 1;
        }
        blocks[b].push(node);
    }
    blocks
}
