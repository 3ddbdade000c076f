//! Exact bisimulation checking and quotient construction.
//!
//! A net partition is a bisimulation when, within every block of every
//! non-input layer, all nodes carry the same activation, the same bias, and
//! the same pre-sum with respect to every block of the previous layer.
//! Merging such nodes preserves the network's semantics exactly: the
//! quotient of the network by the partition computes the same function on
//! block-consistent inputs.
//!
//! The checker runs one pass over the edges per layer, accumulating
//! pre-sums into a dense per-(previous-block, node) table. Addends arrive
//! in ascending source order, so table entries equal [`Network::pre_sum`]
//! bit for bit and any witness re-evaluates to a genuine violation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{Layer, Matrix, Network, Valuation};
use crate::partition::{LayerPartition, NetPartition};

/// Which merge condition a witness violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Activation,
    Bias,
    PreSum,
}

/// First violation found by a deterministic scan: layers ascending, blocks
/// in canonical order, members ascending against the block's first node,
/// conditions in the order activation, bias, pre-sum per previous block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    /// Layer of the violating pair.
    pub layer: usize,
    pub condition: Condition,
    /// The previous-layer block whose pre-sums differ; `None` for
    /// activation and bias violations.
    pub prev_block: Option<Vec<usize>>,
    /// The violating node pair (positions within `layer`).
    pub nodes: (usize, usize),
    /// Absolute difference of the offending quantity (0 for activations).
    pub gap: f64,
}

impl std::fmt::Display for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let what = match self.condition {
            Condition::Activation => "activation",
            Condition::Bias => "bias",
            Condition::PreSum => "pre-sum",
        };
        write!(
            f,
            "layer {}, nodes {} and {}: {what} mismatch",
            self.layer, self.nodes.0, self.nodes.1
        )?;
        if let Some(prev) = &self.prev_block {
            write!(f, " w.r.t. previous block {prev:?}")?;
        }
        if self.condition != Condition::Activation {
            write!(f, ", gap {}", self.gap)?;
        }
        Ok(())
    }
}

/// Outcome of an exact bisimulation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisimReport {
    pub ok: bool,
    /// Present exactly when `ok` is false.
    pub witness: Option<Witness>,
}

/// Pre-sums of every node of layer `i` with respect to every block of the
/// previous layer's partition, laid out as `table[block * width + node]`.
/// Accumulation order matches `pre_sum`: sources ascending within a block.
pub(crate) fn presum_table(net: &Network, i: usize, prev: &LayerPartition) -> Vec<f64> {
    let w = net.weights(i);
    let width = w.cols();
    let mut table = vec![0.0f64; prev.num_blocks() * width];
    for s in 0..w.rows() {
        let b = prev.block_of(s);
        let row = w.row(s);
        let slot = &mut table[b * width..(b + 1) * width];
        for (t, acc) in slot.iter_mut().enumerate() {
            *acc += row[t];
        }
    }
    table
}

/// Checks whether `p` is an exact bisimulation of `net`. One edge pass per
/// layer; overall linear in the number of edges.
pub fn check_bisimulation(net: &Network, p: &NetPartition) -> Result<BisimReport> {
    p.validate_against(net)?;
    for i in 1..=net.depth() {
        let prev = p.layer(i - 1);
        let cur = p.layer(i);
        let width = net.layer_size(i);
        let table = presum_table(net, i, prev);
        let biases = net.biases(i);
        let activations = net.activations(i);
        for block in cur.blocks() {
            let first = block[0];
            for &node in &block[1..] {
                if activations[node] != activations[first] {
                    return Ok(BisimReport {
                        ok: false,
                        witness: Some(Witness {
                            layer: i,
                            condition: Condition::Activation,
                            prev_block: None,
                            nodes: (first, node),
                            gap: 0.0,
                        }),
                    });
                }
                if biases[node] != biases[first] {
                    return Ok(BisimReport {
                        ok: false,
                        witness: Some(Witness {
                            layer: i,
                            condition: Condition::Bias,
                            prev_block: None,
                            nodes: (first, node),
                            gap: (biases[first] - biases[node]).abs(),
                        }),
                    });
                }
                for b in 0..prev.num_blocks() {
                    let (a, c) = (table[b * width + first], table[b * width + node]);
                    if a != c {
                        return Ok(BisimReport {
                            ok: false,
                            witness: Some(Witness {
                                layer: i,
                                condition: Condition::PreSum,
                                prev_block: Some(prev.block(b).to_vec()),
                                nodes: (first, node),
                                gap: (a - c).abs(),
                            }),
                        });
                    }
                }
            }
        }
    }
    Ok(BisimReport { ok: true, witness: None })
}

/// Builds the quotient network: one node per block, weights given by the
/// pre-sum from each previous-layer block into the target block's first
/// (lowest-index) node. For an exact bisimulation the choice of node is
/// immaterial; using the first keeps the result canonical.
///
/// Errors with the checker's witness when `p` is not a bisimulation.
pub fn quotient(net: &Network, p: &NetPartition) -> Result<Network> {
    let report = check_bisimulation(net, p)?;
    if !report.ok {
        return Err(Error::NotBisimulation(Box::new(report)));
    }
    let sizes: Vec<usize> = p.layers().iter().map(LayerPartition::num_blocks).collect();
    let mut layers = Vec::with_capacity(net.depth());
    for i in 1..=net.depth() {
        let prev = p.layer(i - 1);
        let cur = p.layer(i);
        let mut data = Vec::with_capacity(prev.num_blocks() * cur.num_blocks());
        for src_block in prev.blocks() {
            for dst_block in cur.blocks() {
                data.push(net.pre_sum(i, src_block, dst_block[0])?);
            }
        }
        let weights = Matrix::new(prev.num_blocks(), cur.num_blocks(), data)?;
        let biases = cur.blocks().iter().map(|b| net.biases(i)[b[0]]).collect();
        let activations = cur.blocks().iter().map(|b| net.activations(i)[b[0]]).collect();
        layers.push(Layer { weights, biases, activations });
    }
    Network::new(sizes, layers)
}

/// Collapses a block-consistent valuation to one value per block.
pub fn abstract_valuation(v: &Valuation, p: &LayerPartition) -> Result<Valuation> {
    if v.layer() != p.layer() || v.len() != p.len() {
        return Err(Error::Contract(format!(
            "valuation (layer {}, {} nodes) does not match partition (layer {}, {} nodes)",
            v.layer(),
            v.len(),
            p.layer(),
            p.len()
        )));
    }
    for block in p.blocks() {
        let first = v.values()[block[0]];
        if let Some(&node) = block.iter().find(|&&n| v.values()[n] != first) {
            return Err(Error::Contract(format!(
                "valuation is not block-consistent: nodes {} and {} in layer {} differ",
                block[0],
                node,
                p.layer()
            )));
        }
    }
    let values = p.blocks().iter().map(|b| v.values()[b[0]]).collect();
    Ok(Valuation::new(p.layer(), values).expect("abstracted values stay finite"))
}

/// Expands a per-block valuation back to per-node form, every node taking
/// its block's value. Inverse of [`abstract_valuation`] on consistent input.
pub fn concretize_valuation(v: &Valuation, p: &LayerPartition) -> Result<Valuation> {
    if v.layer() != p.layer() || v.len() != p.num_blocks() {
        return Err(Error::Contract(format!(
            "valuation has {} entries, partition of layer {} has {} blocks",
            v.len(),
            p.layer(),
            p.num_blocks()
        )));
    }
    let values = (0..p.len()).map(|node| v.values()[p.block_of(node)]).collect();
    Ok(Valuation::new(p.layer(), values).expect("concretized values stay finite"))
}
