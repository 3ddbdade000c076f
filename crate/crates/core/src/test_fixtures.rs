//! Hand-built fixtures shared by the crate's unit tests.
//!
//! `exact_twins`: a 2-3-3-1 relu network where the first two nodes of each
//! hidden layer are exactly mergeable (equal bias, activation and pre-sums
//! w.r.t. the partition of the layer before), while the third node differs.
//!
//! `delta_band`: a 1-3-1 relu network whose hidden nodes receive weights
//! 0.8, 1.0 and 1.2. No two hidden nodes are exactly mergeable; adjacent
//! ones are mergeable up to a spread of 0.2.

use crate::activation::ActivationKind::Relu;
use crate::network::Network;
use crate::partition::NetPartition;

pub(crate) fn exact_twins_net() -> Network {
    Network::from_parts(
        vec![2, 3, 3, 1],
        vec![
            vec![vec![1.0, 1.0, 2.0], vec![2.0, 2.0, 1.0]],
            vec![vec![1.0, 2.0, 1.0], vec![3.0, 2.0, 1.0], vec![1.0, 1.0, 2.0]],
            vec![vec![1.0], vec![1.0], vec![1.0]],
        ],
        vec![vec![0.0; 3], vec![0.0; 3], vec![0.0]],
        vec![vec![Relu; 3], vec![Relu; 3], vec![Relu]],
    )
    .expect("fixture is well-formed")
}

/// The intended merge: first two nodes of each hidden layer share a block.
pub(crate) fn exact_twins_partition() -> NetPartition {
    NetPartition::from_blocks(vec![
        vec![vec![0], vec![1]],
        vec![vec![0, 1], vec![2]],
        vec![vec![0, 1], vec![2]],
        vec![vec![0]],
    ])
    .expect("fixture partition is well-formed")
}

pub(crate) fn delta_band_net() -> Network {
    Network::from_parts(
        vec![1, 3, 1],
        vec![
            vec![vec![0.8, 1.0, 1.2]],
            vec![vec![1.0], vec![1.0], vec![1.0]],
        ],
        vec![vec![0.0; 3], vec![0.0]],
        vec![vec![Relu; 3], vec![Relu]],
    )
    .expect("fixture is well-formed")
}

/// Merges the two hidden nodes whose incoming weights differ by 0.2.
pub(crate) fn delta_band_pair_partition() -> NetPartition {
    NetPartition::from_blocks(vec![
        vec![vec![0]],
        vec![vec![0, 1], vec![2]],
        vec![vec![0]],
    ])
    .expect("fixture partition is well-formed")
}

/// Merges all three hidden nodes; the outer pair differs by 0.4.
pub(crate) fn delta_band_all_partition() -> NetPartition {
    NetPartition::from_blocks(vec![
        vec![vec![0]],
        vec![vec![0, 1, 2]],
        vec![vec![0]],
    ])
    .expect("fixture partition is well-formed")
}
