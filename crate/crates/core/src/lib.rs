//! Reduction of feedforward neural networks by merging nodes that the
//! network cannot tell apart.
//!
//! Two nodes in a layer are interchangeable when they use the same
//! activation, the same bias, and receive the same total weight from every
//! group of merged predecessor nodes. Grouping nodes along these lines and
//! collapsing each group to one node yields a smaller network with exactly
//! the same input-output function. The [`bisim`] module checks whether a
//! given grouping has this property and builds the collapsed network; the
//! [`minimize`](mod@minimize) module computes the coarsest such grouping by
//! iterated splitting.
//!
//! Relaxing equality to "within delta" gives approximate reductions: the
//! collapsed network is no longer exactly equivalent, but its output error
//! admits a certified bound computed from the layer norms. See [`approx`].
//!
//! Conventions used across the crate:
//!
//! * Nodes are addressed by (layer, position); layer 0 is the input.
//! * All floating-point comparisons in exact checks are plain `==` on
//!   `f64`; nothing is rounded or tolerance-matched behind the caller's
//!   back. Approximate checks compare spreads against the caller's delta
//!   with closed inequalities.
//! * Every sum over nodes runs in ascending node order, so equal inputs
//!   give bit-equal outputs on every platform.
//! * Fallible operations return [`error::Error`]; `Invalid` means bad data,
//!   `Contract` means arguments that do not belong together, `Index` means
//!   an out-of-range address. Refusals to build a quotient from a grouping
//!   that fails its check carry the full failure report.
//!
//! Random generation (in [`io`]) is deterministic per seed and
//! configuration, suitable for reproducible experiments.
//!
//! # Example
//!
//! The first two hidden nodes below share their bias, their activation and
//! their incoming weights, so minimization merges them and the reduced
//! network computes the same outputs:
//!
//! ```
//! use nnbisim::{
//!     check_bisimulation, minimize_with, ActivationKind, Layer, Matrix,
//!     MinimizeOptions, Network, Valuation,
//! };
//!
//! let net = Network::new(
//!     vec![2, 3, 1],
//!     vec![
//!         Layer::new(
//!             Matrix::from_rows(&[vec![1.0, 1.0, 0.5], vec![2.0, 2.0, -1.0]])?,
//!             vec![0.1, 0.1, 0.0],
//!             vec![ActivationKind::Relu; 3],
//!         ),
//!         Layer::new(
//!             Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]])?,
//!             vec![0.0],
//!             vec![ActivationKind::Relu],
//!         ),
//!     ],
//! )?;
//!
//! let options = MinimizeOptions { preserve_io: true, ..Default::default() };
//! let result = minimize_with(&net, &options);
//! assert!(check_bisimulation(&net, &result.partition)?.ok);
//! assert_eq!(result.reduced.layer_sizes(), &[2, 2, 1]);
//!
//! let v = Valuation::new(0, vec![0.5, -0.25])?;
//! assert_eq!(net.eval(&v)?.values(), result.reduced.eval(&v)?.values());
//! # Ok::<(), nnbisim::Error>(())
//! ```

pub mod activation;
pub mod approx;
pub mod bisim;
pub mod error;
pub mod io;
pub mod minimize;
pub mod network;
pub mod partition;

#[cfg(test)]
mod test_fixtures;

pub use activation::ActivationKind;
pub use approx::{
    check_delta_bisimulation, enumerate_delta_quotients, global_error_bound,
    global_error_bound_with, greedy_delta_partition, quotient_delta, BoundMode, BoundOptions,
    DeltaReport, ErrorBound, RepresentativePolicy,
};
pub use bisim::{
    abstract_valuation, check_bisimulation, concretize_valuation, quotient, BisimReport, Witness,
};
pub use error::{Error, Result};
pub use minimize::{minimize, minimize_with, maximality_check, MinimizeOptions, MinimizeResult};
pub use network::{
    network_lipschitz_bound, operator_inf_norm, weight_inf_norm, Layer, Matrix, Network, Valuation,
};
pub use partition::{
    identity_partition, is_consistent, is_eps_consistent, is_finer, LayerPartition, NetPartition,
};
