//! Coarsest-bisimulation minimization by iterated partition refinement.
//!
//! The algorithm:
//! 1. start from one block per layer;
//! 2. split every non-input layer by (activation, bias);
//! 3. while some block `S'` of layer `i` has members whose pre-sums w.r.t.
//!    some block `S` of layer `i - 1` differ, split `S'` by that pre-sum;
//! 4. quotient the network by the resulting partition.
//!
//! Splitting never crosses a violated condition off for good in one pass:
//! refining layer `i - 1` can invalidate layer `i` again, so the loop
//! rescans until no inconsistent pair remains. Each split strictly
//! increases the block count, which bounds the number of iterations by the
//! final node count; with the linear per-scan pass the total cost is
//! O(n_reduced * (edges + n log n)).
//!
//! The result is the coarsest bisimulation: every bisimulation of the
//! network refines it. With `preserve_io` set, input and output layers are
//! pinned to singletons instead (the common choice when the reduced network
//! must keep the original interface); the other layers are then minimized
//! relative to that constraint.

use crate::bisim::{check_bisimulation, presum_table, quotient};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::partition::{LayerPartition, NetPartition};

/// Options for [`minimize_with`].
#[derive(Debug, Clone, Default)]
pub struct MinimizeOptions {
    /// Keep input and output layers as singletons so the reduced network
    /// has the same interface as the original.
    pub preserve_io: bool,
    /// Order in which layers are rescanned for inconsistent pairs. Any
    /// schedule reaches the same final partition; this exists so tests can
    /// cross-check that confluence.
    pub schedule: Schedule,
}

/// Rescan order after a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Scan layers in ascending order, restarting from the lowest layer
    /// after every split. This is the deterministic default.
    #[default]
    LowestFirst,
    /// Scan layers in descending order.
    HighestFirst,
}

/// One refinement step. Replaying the steps in order from the
/// one-block-per-layer partition reproduces the final partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefinementStep {
    /// A layer was split by (activation, bias) keys.
    ActBiasSplit { layer: usize, block: Vec<usize>, result: Vec<Vec<usize>> },
    /// A block was split because its members' pre-sums w.r.t. a
    /// previous-layer block differ.
    PreSumSplit {
        layer: usize,
        block: Vec<usize>,
        prev_block: Vec<usize>,
        result: Vec<Vec<usize>>,
    },
    /// A layer was forced to singletons by the `preserve_io` option.
    IoSplit { layer: usize, block: Vec<usize>, result: Vec<Vec<usize>> },
}

impl RefinementStep {
    pub fn layer(&self) -> usize {
        match self {
            RefinementStep::ActBiasSplit { layer, .. }
            | RefinementStep::PreSumSplit { layer, .. }
            | RefinementStep::IoSplit { layer, .. } => *layer,
        }
    }
}

/// Audit log of a minimization run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementTrace {
    pub steps: Vec<RefinementStep>,
    pub final_partition: NetPartition,
}

impl RefinementTrace {
    /// Re-applies the recorded steps to the one-block-per-layer partition.
    /// Returns the reconstructed partition; it equals `final_partition`
    /// for traces produced by [`minimize_with`].
    pub fn replay(&self, layer_sizes: &[usize]) -> Result<NetPartition> {
        let mut layers: Vec<LayerPartition> = layer_sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| LayerPartition::single_block(i, n))
            .collect();
        for step in &self.steps {
            let (layer, block, result) = match step {
                RefinementStep::ActBiasSplit { layer, block, result }
                | RefinementStep::PreSumSplit { layer, block, result, .. }
                | RefinementStep::IoSplit { layer, block, result } => (*layer, block, result),
            };
            if layer >= layers.len() {
                return Err(Error::Index(format!("trace step addresses layer {layer}")));
            }
            let lp = &layers[layer];
            let idx = lp
                .blocks()
                .iter()
                .position(|b| b == block)
                .ok_or_else(|| {
                    Error::Contract(format!(
                        "trace step splits block {block:?} which is not present in layer {layer}"
                    ))
                })?;
            layers[layer] = lp.replace_block(idx, result.clone());
        }
        NetPartition::new(layers)
    }

    pub fn presum_splits(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, RefinementStep::PreSumSplit { .. }))
            .count()
    }

    pub fn act_bias_splits(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, RefinementStep::ActBiasSplit { .. }))
            .count()
    }
}

/// Result of a minimization run.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    /// The coarsest bisimulation (under the chosen options).
    pub partition: NetPartition,
    /// The quotient of the network by that partition.
    pub reduced: Network,
    pub trace: RefinementTrace,
}

/// Groups the nodes of layer `i` by identical (activation, bias).
///
/// Nodes are sorted by a total order on the keys and adjacent equal keys
/// are grouped, so exact float equality decides membership and the result
/// does not depend on node order. `i` must be a non-input layer.
pub fn split_act_bias(net: &Network, i: usize) -> Result<LayerPartition> {
    if i == 0 || i > net.depth() {
        return Err(Error::Index(format!(
            "layer {i} (splittable layers are 1..={})",
            net.depth()
        )));
    }
    let biases = net.biases(i);
    let activations = net.activations(i);
    let mut order: Vec<usize> = (0..net.layer_size(i)).collect();
    order.sort_unstable_by(|&a, &b| {
        let (ka, sa) = activations[a].sort_key();
        let (kb, sb) = activations[b].sort_key();
        ka.cmp(&kb)
            .then(sa.total_cmp(&sb))
            .then(biases[a].total_cmp(&biases[b]))
            .then(a.cmp(&b))
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &node in &order {
        let same = groups.last().is_some_and(|g| {
            let prev = g[0];
            activations[prev] == activations[node] && biases[prev] == biases[node]
        });
        if same {
            groups.last_mut().unwrap().push(node);
        } else {
            groups.push(vec![node]);
        }
    }
    LayerPartition::new(i, groups)
}

/// Splits one block of layer `i` by the exact pre-sum of its members w.r.t.
/// a block of layer `i - 1`. Returns the sub-blocks; a consistent block
/// comes back whole.
pub fn split_pre(net: &Network, i: usize, block: &[usize], prev_block: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut keyed: Vec<(f64, usize)> = block
        .iter()
        .map(|&node| Ok((net.pre_sum(i, prev_block, node)?, node)))
        .collect::<Result<_>>()?;
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_key = f64::NAN;
    for (key, node) in keyed {
        if groups.is_empty() || key != last_key {
            groups.push(vec![node]);
        } else {
            groups.last_mut().unwrap().push(node);
        }
        last_key = key;
    }
    Ok(groups)
}

/// A block whose members disagree on some pre-sum: `block` indexes into
/// layer `layer` of the partition, `prev_block` into layer `layer - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InconsistentPair {
    pub layer: usize,
    pub block: usize,
    pub prev_block: usize,
}

/// Finds the first pre-sum-inconsistent (block, previous block) pair in a
/// deterministic scan: layers ascending, blocks in canonical order,
/// previous blocks in canonical order. Returns `None` when every block is
/// consistent, i.e. the pre-sum refinement has stabilized.
pub fn find_inconsistent_pair(net: &Network, p: &NetPartition) -> Result<Option<InconsistentPair>> {
    p.validate_against(net)?;
    Ok(scan_for_pair(net, p, Schedule::LowestFirst))
}

fn scan_for_pair(net: &Network, p: &NetPartition, schedule: Schedule) -> Option<InconsistentPair> {
    let layers: Vec<usize> = match schedule {
        Schedule::LowestFirst => (1..=net.depth()).collect(),
        Schedule::HighestFirst => (1..=net.depth()).rev().collect(),
    };
    for i in layers {
        let prev = p.layer(i - 1);
        let cur = p.layer(i);
        let width = net.layer_size(i);
        let table = presum_table(net, i, prev);
        for (bi, block) in cur.blocks().iter().enumerate() {
            if block.len() < 2 {
                continue;
            }
            let first = block[0];
            for pb in 0..prev.num_blocks() {
                let reference = table[pb * width + first];
                if block[1..].iter().any(|&node| table[pb * width + node] != reference) {
                    return Some(InconsistentPair { layer: i, block: bi, prev_block: pb });
                }
            }
        }
    }
    None
}

/// Minimizes with default options: the unconstrained coarsest bisimulation.
pub fn minimize(net: &Network) -> MinimizeResult {
    minimize_with(net, &MinimizeOptions::default())
}

/// Minimizes under the given options. See the module docs for the
/// algorithm; the trace records every split in application order.
pub fn minimize_with(net: &Network, options: &MinimizeOptions) -> MinimizeResult {
    let k = net.depth();
    let mut steps: Vec<RefinementStep> = Vec::new();
    let mut layers: Vec<LayerPartition> = Vec::with_capacity(k + 1);

    for i in 0..=k {
        let n = net.layer_size(i);
        let io_pinned = options.preserve_io && (i == 0 || i == k);
        let lp = if i == 0 {
            if io_pinned {
                LayerPartition::singletons(0, n)
            } else {
                LayerPartition::single_block(0, n)
            }
        } else if io_pinned {
            LayerPartition::singletons(i, n)
        } else {
            split_act_bias(net, i).expect("layer index is in range")
        };
        if lp.num_blocks() > 1 {
            let whole: Vec<usize> = (0..n).collect();
            let result = lp.blocks().to_vec();
            steps.push(if io_pinned {
                RefinementStep::IoSplit { layer: i, block: whole, result }
            } else {
                RefinementStep::ActBiasSplit { layer: i, block: whole, result }
            });
        }
        layers.push(lp);
    }
    let mut partition = NetPartition::new(layers).expect("layers are indexed 0..=k");

    while let Some(pair) = scan_for_pair(net, &partition, options.schedule) {
        let block = partition.layer(pair.layer).block(pair.block).to_vec();
        let prev_block = partition.layer(pair.layer - 1).block(pair.prev_block).to_vec();
        let sub = split_pre(net, pair.layer, &block, &prev_block)
            .expect("blocks of a validated partition are in range");
        debug_assert!(sub.len() > 1, "an inconsistent block must split");
        let refined = partition.layer(pair.layer).replace_block(pair.block, sub.clone());
        partition = partition.replace_layer(refined);
        steps.push(RefinementStep::PreSumSplit {
            layer: pair.layer,
            block,
            prev_block,
            result: sub,
        });
    }

    let reduced = quotient(net, &partition)
        .expect("the refined partition is a bisimulation by construction");
    MinimizeResult {
        partition: partition.clone(),
        reduced,
        trace: RefinementTrace { steps, final_partition: partition },
    }
}

/// True when no two blocks of the same layer can be merged without breaking
/// the bisimulation property. The unconstrained [`minimize`] output always
/// satisfies this; interface-preserving runs may not (their pinned input or
/// output singletons can be mergeable).
///
/// Tries every same-layer block pair, so intended for small networks.
/// Errors when `p` is not a bisimulation in the first place.
pub fn maximality_check(net: &Network, p: &NetPartition) -> Result<bool> {
    let report = check_bisimulation(net, p)?;
    if !report.ok {
        return Err(Error::NotBisimulation(Box::new(report)));
    }
    for layer in 0..p.num_layers() {
        let lp = p.layer(layer);
        for b1 in 0..lp.num_blocks() {
            for b2 in (b1 + 1)..lp.num_blocks() {
                let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(lp.num_blocks() - 1);
                let mut merged: Vec<usize> = lp.block(b1).to_vec();
                merged.extend_from_slice(lp.block(b2));
                blocks.push(merged);
                for (bi, b) in lp.blocks().iter().enumerate() {
                    if bi != b1 && bi != b2 {
                        blocks.push(b.clone());
                    }
                }
                let candidate = p.replace_layer(
                    LayerPartition::new(layer, blocks).expect("merge of two blocks is a partition"),
                );
                if check_bisimulation(net, &candidate)?.ok {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
