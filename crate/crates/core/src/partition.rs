//! Partitions of a network's nodes, one partition per layer.
//!
//! All partitions are kept in canonical form: block members ascending,
//! blocks ordered by smallest member. Operations that build partitions
//! return canonical ones, so structural equality is semantic equality.

use crate::error::{Error, Result};
use crate::network::{Network, Valuation};

/// A partition of the node positions `0..len` of a single layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPartition {
    layer: usize,
    blocks: Vec<Vec<usize>>,
    /// Node position -> index of its block in `blocks`.
    assignment: Vec<usize>,
}

impl LayerPartition {
    /// Canonicalizes and validates: blocks must be non-empty, disjoint, and
    /// together cover `0..n` exactly for some `n`.
    pub fn new(layer: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.iter().any(Vec::is_empty) {
            return Err(Error::Invalid(format!("layer {layer}: empty block")));
        }
        for block in &mut blocks {
            block.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut assignment = vec![usize::MAX; n];
        for (bi, block) in blocks.iter().enumerate() {
            for &node in block {
                if node >= n {
                    return Err(Error::Invalid(format!(
                        "layer {layer}: node {node} out of range for {n} partitioned nodes"
                    )));
                }
                if assignment[node] != usize::MAX {
                    return Err(Error::Invalid(format!(
                        "layer {layer}: node {node} appears in two blocks"
                    )));
                }
                assignment[node] = bi;
            }
        }
        // Sum-of-sizes == n and no duplicates already force full coverage.
        Ok(LayerPartition { layer, blocks, assignment })
    }

    /// The partition of `0..n` into singletons.
    pub fn singletons(layer: usize, n: usize) -> Self {
        let blocks: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let assignment = (0..n).collect();
        LayerPartition { layer, blocks, assignment }
    }

    /// The partition of `0..n` into one block.
    pub fn single_block(layer: usize, n: usize) -> Self {
        LayerPartition { layer, blocks: vec![(0..n).collect()], assignment: vec![0; n] }
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    /// Number of partitioned nodes.
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, idx: usize) -> &[usize] {
        &self.blocks[idx]
    }

    /// Block index of a node position.
    pub fn block_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Replaces the block at `idx` with the given sub-blocks (which must
    /// partition it) and re-canonicalizes.
    pub(crate) fn replace_block(&self, idx: usize, sub_blocks: Vec<Vec<usize>>) -> Self {
        let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(self.blocks.len() + sub_blocks.len());
        for (bi, block) in self.blocks.iter().enumerate() {
            if bi != idx {
                blocks.push(block.clone());
            }
        }
        blocks.extend(sub_blocks);
        LayerPartition::new(self.layer, blocks).expect("sub-blocks partition the removed block")
    }
}

/// A partition for every layer of a network, input layer included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetPartition {
    layers: Vec<LayerPartition>,
}

impl NetPartition {
    /// Validates that layer indices run 0, 1, 2, ... in order.
    pub fn new(layers: Vec<LayerPartition>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::Invalid(
                "a net partition covers at least the input and one more layer".to_string(),
            ));
        }
        for (expect, lp) in layers.iter().enumerate() {
            if lp.layer() != expect {
                return Err(Error::Invalid(format!(
                    "partition layers out of order: found layer {} at position {expect}",
                    lp.layer()
                )));
            }
        }
        Ok(NetPartition { layers })
    }

    /// Builds from nested block lists, outermost index = layer.
    pub fn from_blocks(blocks: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let layers = blocks
            .into_iter()
            .enumerate()
            .map(|(i, b)| LayerPartition::new(i, b))
            .collect::<Result<Vec<_>>>()?;
        NetPartition::new(layers)
    }

    /// Checks that the partition's layer count and widths match a network.
    pub fn validate_against(&self, net: &Network) -> Result<()> {
        if self.layers.len() != net.depth() + 1 {
            return Err(Error::Contract(format!(
                "partition covers {} layers, network has {}",
                self.layers.len(),
                net.depth() + 1
            )));
        }
        for (i, lp) in self.layers.iter().enumerate() {
            if lp.len() != net.layer_size(i) {
                return Err(Error::Contract(format!(
                    "layer {i}: partition covers {} nodes, network has {}",
                    lp.len(),
                    net.layer_size(i)
                )));
            }
        }
        Ok(())
    }

    /// Number of layers covered (network depth + 1).
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, i: usize) -> &LayerPartition {
        &self.layers[i]
    }

    pub fn layers(&self) -> &[LayerPartition] {
        &self.layers
    }

    /// Total block count across layers: the node count of the quotient.
    pub fn num_blocks(&self) -> usize {
        self.layers.iter().map(LayerPartition::num_blocks).sum()
    }

    /// Largest per-layer block count.
    pub fn max_blocks_per_layer(&self) -> usize {
        self.layers.iter().map(LayerPartition::num_blocks).max().unwrap_or(0)
    }

    pub(crate) fn replace_layer(&self, lp: LayerPartition) -> Self {
        let mut layers = self.layers.clone();
        let i = lp.layer();
        layers[i] = lp;
        NetPartition { layers }
    }
}

/// The all-singletons partition of a network: every node is its own block.
pub fn identity_partition(net: &Network) -> NetPartition {
    let layers = (0..=net.depth())
        .map(|i| LayerPartition::singletons(i, net.layer_size(i)))
        .collect();
    NetPartition { layers }
}

/// True when `p` refines `q`: every block of `p` sits inside some block of
/// `q`, layer by layer. Reflexive and transitive.
pub fn is_finer(p: &NetPartition, q: &NetPartition) -> Result<bool> {
    if p.num_layers() != q.num_layers() {
        return Err(Error::Contract(format!(
            "partitions cover {} and {} layers",
            p.num_layers(),
            q.num_layers()
        )));
    }
    for (lp, lq) in p.layers().iter().zip(q.layers()) {
        if lp.len() != lq.len() {
            return Err(Error::Contract(format!(
                "layer {}: partitions cover {} and {} nodes",
                lp.layer(),
                lp.len(),
                lq.len()
            )));
        }
        for block in lp.blocks() {
            let home = lq.block_of(block[0]);
            if block.iter().any(|&node| lq.block_of(node) != home) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// True when the valuation is constant on every block (exact equality).
pub fn is_consistent(v: &Valuation, p: &LayerPartition) -> bool {
    assert_eq!(v.layer(), p.layer(), "valuation and partition address different layers");
    assert_eq!(v.len(), p.len(), "valuation and partition cover different node counts");
    p.blocks().iter().all(|block| {
        let first = v.values()[block[0]];
        block.iter().all(|&node| v.values()[node] == first)
    })
}

/// True when within every block the value spread (max minus min) is at most
/// `eps`; equivalently, all pairwise gaps are at most `eps`.
pub fn is_eps_consistent(v: &Valuation, p: &LayerPartition, eps: f64) -> Result<bool> {
    if !(eps >= 0.0) {
        return Err(Error::Contract(format!("eps must be >= 0, got {eps}")));
    }
    assert_eq!(v.layer(), p.layer(), "valuation and partition address different layers");
    assert_eq!(v.len(), p.len(), "valuation and partition cover different node counts");
    Ok(p.blocks().iter().all(|block| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &node in block {
            let x = v.values()[node];
            lo = lo.min(x);
            hi = hi.max(x);
        }
        hi - lo <= eps
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind::Relu;

    fn small_net() -> Network {
        Network::from_parts(
            vec![2, 3],
            vec![vec![vec![1.0, 0.0, 2.0], vec![0.0, 1.0, 2.0]]],
            vec![vec![0.0, 0.0, 0.0]],
            vec![vec![Relu, Relu, Relu]],
        )
        .unwrap()
    }

    #[test]
    fn canonical_form_sorts_members_and_blocks() {
        let p = LayerPartition::new(1, vec![vec![4, 2], vec![3, 0, 1]]).unwrap();
        assert_eq!(p.blocks(), &[vec![0, 1, 3], vec![2, 4]]);
        assert_eq!(p.block_of(4), 1);
        assert_eq!(p.len(), 5);
    }

    #[test]
    fn canonicalization_is_input_order_insensitive() {
        let a = LayerPartition::new(0, vec![vec![1, 0], vec![2]]).unwrap();
        let b = LayerPartition::new(0, vec![vec![2], vec![0, 1]]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_overlap_gap_and_empty() {
        assert!(LayerPartition::new(0, vec![vec![0, 1], vec![1]]).is_err());
        assert!(LayerPartition::new(0, vec![vec![0], vec![2]]).is_err());
        assert!(LayerPartition::new(0, vec![vec![0], vec![]]).is_err());
    }

    #[test]
    fn identity_partition_is_all_singletons() {
        let net = small_net();
        let p = identity_partition(&net);
        assert_eq!(p.num_layers(), 2);
        assert_eq!(p.layer(0).blocks(), &[vec![0], vec![1]]);
        assert_eq!(p.layer(1).num_blocks(), 3);
        p.validate_against(&net).unwrap();
    }

    #[test]
    fn validate_against_catches_size_mismatch() {
        let net = small_net();
        let p = NetPartition::from_blocks(vec![vec![vec![0, 1]], vec![vec![0, 1]]]).unwrap();
        assert!(matches!(p.validate_against(&net), Err(Error::Contract(_))));
    }

    #[test]
    fn finer_ordering() {
        let fine =
            NetPartition::from_blocks(vec![vec![vec![0], vec![1]], vec![vec![0], vec![1], vec![2]]])
                .unwrap();
        let coarse =
            NetPartition::from_blocks(vec![vec![vec![0, 1]], vec![vec![0, 1], vec![2]]]).unwrap();
        assert!(is_finer(&fine, &coarse).unwrap());
        assert!(!is_finer(&coarse, &fine).unwrap());
        assert!(is_finer(&fine, &fine).unwrap());
        assert!(is_finer(&coarse, &coarse).unwrap());

        let other_shape =
            NetPartition::from_blocks(vec![vec![vec![0]], vec![vec![0, 1], vec![2]]]).unwrap();
        assert!(is_finer(&fine, &other_shape).is_err());
    }

    #[test]
    fn consistency_exact_and_with_tolerance() {
        let p = LayerPartition::new(1, vec![vec![0, 1], vec![2]]).unwrap();
        let same = Valuation::new(1, vec![2.0, 2.0, 7.0]).unwrap();
        assert!(is_consistent(&same, &p));
        let near = Valuation::new(1, vec![2.0, 2.25, 7.0]).unwrap();
        assert!(!is_consistent(&near, &p));
        assert!(is_eps_consistent(&near, &p, 0.25).unwrap());
        assert!(!is_eps_consistent(&near, &p, 0.2).unwrap());
        // eps = 0 coincides with exact consistency here.
        assert!(is_eps_consistent(&same, &p, 0.0).unwrap());
        assert!(!is_eps_consistent(&near, &p, 0.0).unwrap());
        assert!(is_eps_consistent(&near, &p, -0.1).is_err());
    }

    #[test]
    fn singleton_blocks_are_always_consistent() {
        let p = LayerPartition::singletons(0, 4);
        let v = Valuation::new(0, vec![1.0, -2.0, 3.5, 0.0]).unwrap();
        assert!(is_consistent(&v, &p));
        assert!(is_eps_consistent(&v, &p, 0.0).unwrap());
    }

    #[test]
    fn replace_block_keeps_canonical_form() {
        let p = LayerPartition::new(1, vec![vec![0, 1, 2], vec![3]]).unwrap();
        let q = p.replace_block(0, vec![vec![2], vec![0, 1]]);
        assert_eq!(q.blocks(), &[vec![0, 1], vec![2], vec![3]]);
    }
}
