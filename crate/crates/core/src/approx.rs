//! Approximate reduction: bounded-deviation merges with certified error.
//!
//! The exact merge conditions of [`crate::bisim`] relax to a budget
//! `delta`: nodes sharing a block must still have identical activations,
//! but their biases and their pre-sums w.r.t. every previous-layer block
//! only need to agree within `delta`. Spreads (block maximum minus block
//! minimum) decide acceptance, so all pairwise gaps stay within the budget
//! and the boundary is inclusive.
//!
//! Merging such nodes changes the computed function. The payoff is a
//! certified bound: [`global_error_bound`] propagates the per-layer
//! deviation through the network and yields an `eps_final` such that every
//! output of the reduced network stays within `eps_final` of all the
//! original outputs it represents, for all inputs bounded by `v0_inf`.
//! The bound's derivation assumes the network does not attenuate below its
//! input scale (Lipschitz bound at least 1); it stays sound in the
//! per-layer-norms mode regardless.

use serde::Serialize;

use crate::bisim::{presum_table, Condition, Witness};
use crate::error::{Error, Result};
use crate::network::{
    network_lipschitz_bound, operator_inf_norm, weight_inf_norm, Layer, Matrix, Network, Valuation,
};
use crate::partition::{is_eps_consistent, LayerPartition, NetPartition};

/// Outcome of a delta-bisimulation check. The gap fields are computed over
/// the whole network even when a violation is found early, so `ok` holds
/// exactly when all activation tags match per block and both gaps are at
/// most `delta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    pub ok: bool,
    pub delta: f64,
    /// Largest within-block bias spread across all non-input layers.
    pub max_bias_gap: f64,
    /// Largest within-block pre-sum spread w.r.t. any previous-layer block.
    pub max_presum_gap: f64,
    /// First violation in scan order (layers, then blocks, then conditions).
    /// For spread violations the node pair is (argmin, argmax).
    pub witness: Option<Witness>,
}

/// Checks the relaxed merge conditions under budget `delta`.
pub fn check_delta_bisimulation(net: &Network, p: &NetPartition, delta: f64) -> Result<DeltaReport> {
    if !(delta >= 0.0) {
        return Err(Error::Contract(format!("delta must be >= 0, got {delta}")));
    }
    p.validate_against(net)?;
    let mut max_bias_gap = 0.0f64;
    let mut max_presum_gap = 0.0f64;
    let mut witness: Option<Witness> = None;
    let mut activations_ok = true;
    for i in 1..=net.depth() {
        let prev = p.layer(i - 1);
        let cur = p.layer(i);
        let width = net.layer_size(i);
        let table = presum_table(net, i, prev);
        let biases = net.biases(i);
        let activations = net.activations(i);
        for block in cur.blocks() {
            let first = block[0];
            if let Some(&node) =
                block[1..].iter().find(|&&n| activations[n] != activations[first])
            {
                activations_ok = false;
                witness.get_or_insert(Witness {
                    layer: i,
                    condition: Condition::Activation,
                    prev_block: None,
                    nodes: (first, node),
                    gap: 0.0,
                });
            }
            let (lo, hi) = spread(biases, block);
            let bias_gap = biases[hi] - biases[lo];
            max_bias_gap = max_bias_gap.max(bias_gap);
            if bias_gap > delta {
                witness.get_or_insert(Witness {
                    layer: i,
                    condition: Condition::Bias,
                    prev_block: None,
                    nodes: (lo, hi),
                    gap: bias_gap,
                });
            }
            for pb in 0..prev.num_blocks() {
                let row = &table[pb * width..(pb + 1) * width];
                let (lo, hi) = spread(row, block);
                let gap = row[hi] - row[lo];
                max_presum_gap = max_presum_gap.max(gap);
                if gap > delta {
                    witness.get_or_insert(Witness {
                        layer: i,
                        condition: Condition::PreSum,
                        prev_block: Some(prev.block(pb).to_vec()),
                        nodes: (lo, hi),
                        gap,
                    });
                }
            }
        }
    }
    let ok = activations_ok && max_bias_gap <= delta && max_presum_gap <= delta;
    debug_assert_eq!(ok, witness.is_none());
    Ok(DeltaReport { ok, delta, max_bias_gap, max_presum_gap, witness })
}

/// Indices of the block's minimum and maximum values; earliest member wins
/// ties, so the result is deterministic.
fn spread(values: &[f64], block: &[usize]) -> (usize, usize) {
    let mut lo = block[0];
    let mut hi = block[0];
    for &node in &block[1..] {
        if values[node] < values[lo] {
            lo = node;
        }
        if values[node] > values[hi] {
            hi = node;
        }
    }
    (lo, hi)
}

/// How to pick the member node a merged block inherits its weights and bias
/// from. Under an exact bisimulation every policy yields the same network;
/// under a delta-bisimulation they span the family of valid reductions.
#[derive(Debug, Clone, PartialEq)]
pub enum RepresentativePolicy {
    /// Lowest node index of each block decides weights and bias.
    MinIndex,
    /// Highest node index of each block decides weights and bias.
    MaxIndex,
    /// Each weight entry independently takes the smallest pre-sum over the
    /// block's members; the bias independently takes the smallest bias.
    PerValueMin,
    /// As `PerValueMin` with the largest values.
    PerValueMax,
    /// Caller-specified member per block, see [`ExplicitReps`].
    Explicit(ExplicitReps),
}

/// Explicit representative table: `per_layer[i][block]` is the member node
/// that block `block` of layer `i` inherits weights and bias from. Entry 0
/// (the input layer) is ignored and may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitReps {
    pub per_layer: Vec<Vec<usize>>,
}

impl RepresentativePolicy {
    /// The four index-based policies, the ones meaningful to sweep.
    pub fn named() -> [RepresentativePolicy; 4] {
        [
            RepresentativePolicy::MinIndex,
            RepresentativePolicy::MaxIndex,
            RepresentativePolicy::PerValueMin,
            RepresentativePolicy::PerValueMax,
        ]
    }
}

fn explicit_choice(reps: &ExplicitReps, p: &NetPartition, layer: usize, block: usize) -> Result<usize> {
    let per_layer = reps
        .per_layer
        .get(layer)
        .ok_or_else(|| Error::Contract(format!("explicit representatives missing layer {layer}")))?;
    let &node = per_layer.get(block).ok_or_else(|| {
        Error::Contract(format!(
            "explicit representatives missing block {block} of layer {layer}"
        ))
    })?;
    if !p.layer(layer).block(block).contains(&node) {
        return Err(Error::Contract(format!(
            "explicit representative {node} is not a member of block {block} in layer {layer}"
        )));
    }
    Ok(node)
}

/// Builds a reduced network from a delta-bisimulation, resolving each
/// block's weights and bias through the policy. Refuses (with the checking
/// report) when `p` is not a delta-bisimulation for `delta`.
pub fn quotient_delta(
    net: &Network,
    p: &NetPartition,
    delta: f64,
    policy: &RepresentativePolicy,
) -> Result<Network> {
    let report = check_delta_bisimulation(net, p, delta)?;
    if !report.ok {
        return Err(Error::NotDeltaBisimulation(Box::new(report)));
    }
    let sizes: Vec<usize> = p.layers().iter().map(LayerPartition::num_blocks).collect();
    let mut layers = Vec::with_capacity(net.depth());
    for i in 1..=net.depth() {
        let prev = p.layer(i - 1);
        let cur = p.layer(i);
        let mut biases = Vec::with_capacity(cur.num_blocks());
        let mut activations = Vec::with_capacity(cur.num_blocks());
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cur.num_blocks());
        for (bi, block) in cur.blocks().iter().enumerate() {
            // Activation tags agree across the block; take the first.
            activations.push(net.activations(i)[block[0]]);
            let fixed_member = match policy {
                RepresentativePolicy::MinIndex => Some(block[0]),
                RepresentativePolicy::MaxIndex => Some(*block.last().unwrap()),
                RepresentativePolicy::Explicit(reps) => {
                    Some(explicit_choice(reps, p, i, bi)?)
                }
                RepresentativePolicy::PerValueMin | RepresentativePolicy::PerValueMax => None,
            };
            let bias = match fixed_member {
                Some(node) => net.biases(i)[node],
                None => pick_value(
                    block.iter().map(|&n| net.biases(i)[n]),
                    matches!(policy, RepresentativePolicy::PerValueMax),
                ),
            };
            biases.push(bias);
            let mut column = Vec::with_capacity(prev.num_blocks());
            for src in prev.blocks() {
                let w = match fixed_member {
                    Some(node) => net.pre_sum(i, src, node)?,
                    None => {
                        let values = block
                            .iter()
                            .map(|&n| net.pre_sum(i, src, n))
                            .collect::<Result<Vec<_>>>()?;
                        pick_value(
                            values.into_iter(),
                            matches!(policy, RepresentativePolicy::PerValueMax),
                        )
                    }
                };
                column.push(w);
            }
            columns.push(column);
        }
        // Transpose the per-target columns into a row-major source matrix.
        let mut data = vec![0.0f64; prev.num_blocks() * cur.num_blocks()];
        for (t, column) in columns.iter().enumerate() {
            for (s, &w) in column.iter().enumerate() {
                data[s * cur.num_blocks() + t] = w;
            }
        }
        let weights = Matrix::new(prev.num_blocks(), cur.num_blocks(), data)?;
        layers.push(Layer { weights, biases, activations });
    }
    Network::new(sizes, layers)
}

/// First minimum or maximum of a non-empty value sequence; ties keep the
/// earliest element, matching the index-based policies on constant blocks.
fn pick_value(values: impl Iterator<Item = f64>, want_max: bool) -> f64 {
    let mut best = f64::NAN;
    for (idx, v) in values.enumerate() {
        if idx == 0 || (want_max && v > best) || (!want_max && v < best) {
            best = v;
        }
    }
    best
}

/// Enumerates every reduced network obtainable from `p` by independent
/// member choices (per weight entry and per bias), deduplicated bit for
/// bit. The combination count is capped; exceeding `cap` is an error.
/// Intended for small fixtures and tests.
pub fn enumerate_delta_quotients(
    net: &Network,
    p: &NetPartition,
    delta: f64,
    cap: usize,
) -> Result<Vec<Network>> {
    let report = check_delta_bisimulation(net, p, delta)?;
    if !report.ok {
        return Err(Error::NotDeltaBisimulation(Box::new(report)));
    }
    // Choice slots in a fixed order: per layer, per target block, first the
    // bias then one slot per source block. Each slot picks a block member.
    let mut radices: Vec<usize> = Vec::new();
    let mut combos: usize = 1;
    for i in 1..=net.depth() {
        let prev = p.layer(i - 1);
        for block in p.layer(i).blocks() {
            for _ in 0..=prev.num_blocks() {
                radices.push(block.len());
                combos = combos.saturating_mul(block.len());
                if combos > cap {
                    return Err(Error::Contract(format!(
                        "enumeration would exceed {cap} combinations"
                    )));
                }
            }
        }
    }
    let mut digits = vec![0usize; radices.len()];
    let mut seen: Vec<Vec<u64>> = Vec::new();
    let mut out: Vec<Network> = Vec::new();
    loop {
        let candidate = build_choice_quotient(net, p, &digits)?;
        let key: Vec<u64> = candidate
            .layers()
            .iter()
            .flat_map(|l| {
                l.weights
                    .data()
                    .iter()
                    .chain(l.biases.iter())
                    .map(|x| x.to_bits())
                    .collect::<Vec<_>>()
            })
            .collect();
        if !seen.contains(&key) {
            seen.push(key);
            out.push(candidate);
        }
        // Increment the mixed-radix counter.
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                return Ok(out);
            }
            digits[pos] += 1;
            if digits[pos] < radices[pos] {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

fn build_choice_quotient(net: &Network, p: &NetPartition, digits: &[usize]) -> Result<Network> {
    let sizes: Vec<usize> = p.layers().iter().map(LayerPartition::num_blocks).collect();
    let mut slot = 0usize;
    let mut layers = Vec::with_capacity(net.depth());
    for i in 1..=net.depth() {
        let prev = p.layer(i - 1);
        let cur = p.layer(i);
        let mut biases = Vec::with_capacity(cur.num_blocks());
        let mut activations = Vec::with_capacity(cur.num_blocks());
        let mut data = vec![0.0f64; prev.num_blocks() * cur.num_blocks()];
        for (t, block) in cur.blocks().iter().enumerate() {
            activations.push(net.activations(i)[block[0]]);
            biases.push(net.biases(i)[block[digits[slot]]]);
            slot += 1;
            for (s, src) in prev.blocks().iter().enumerate() {
                data[s * cur.num_blocks() + t] = net.pre_sum(i, src, block[digits[slot]])?;
                slot += 1;
            }
        }
        let weights = Matrix::new(prev.num_blocks(), cur.num_blocks(), data)?;
        layers.push(Layer { weights, biases, activations });
    }
    Network::new(sizes, layers)
}

/// Largest deviation between a per-block valuation and a per-node valuation
/// over all blocks and their members.
pub fn max_blockwise_gap(v_hat: &Valuation, v: &Valuation, p: &LayerPartition) -> f64 {
    assert_eq!(v_hat.len(), p.num_blocks(), "abstract valuation has one entry per block");
    assert_eq!(v.len(), p.len(), "valuation covers the partitioned layer");
    let mut worst = 0.0f64;
    for (bi, block) in p.blocks().iter().enumerate() {
        for &node in block {
            worst = worst.max((v_hat.values()[bi] - v.values()[node]).abs());
        }
    }
    worst
}

/// Whether `v_hat` stays within `eps` of `v` on every block member
/// (boundary inclusive). With `eps = 0` this recognizes exactly the
/// abstractions of block-consistent valuations.
pub fn eps_abstraction_contains(
    v_hat: &Valuation,
    v: &Valuation,
    p: &LayerPartition,
    eps: f64,
) -> bool {
    assert!(eps >= 0.0, "eps must be >= 0");
    max_blockwise_gap(v_hat, v, p) <= eps
}

/// Whether the valuation's within-block spreads stay within `2 * eps`: the
/// consistency a valuation retains one step after being within `eps` of
/// some per-block valuation.
pub fn two_eps_consistency(v: &Valuation, p: &LayerPartition, eps: f64) -> bool {
    assert!(eps >= 0.0, "eps must be >= 0");
    is_eps_consistent(v, p, 2.0 * eps).expect("2 * eps is non-negative")
}

/// One refinement step of the deviation bound: if the reduced network's
/// layer `i - 1` values stay within `eps` of the original's (block-wise),
/// its layer `i` values stay within the returned bound. `v_inf` must bound
/// the reduced network's layer `i - 1` value magnitudes.
pub fn one_step_error(
    net: &Network,
    p: &NetPartition,
    i: usize,
    eps: f64,
    delta: f64,
    v_inf: f64,
) -> Result<f64> {
    if i == 0 || i > net.depth() {
        return Err(Error::Index(format!(
            "layer {i} (bound steps exist for layers 1..={})",
            net.depth()
        )));
    }
    for (name, value) in [("eps", eps), ("delta", delta), ("v_inf", v_inf)] {
        if !(value >= 0.0) {
            return Err(Error::Contract(format!("{name} must be >= 0, got {value}")));
        }
    }
    p.validate_against(net)?;
    let max_l = net.activations(i).iter().fold(0.0f64, |m, a| m.max(a.lipschitz()));
    let a_i = max_l * net.layer_size(i - 1) as f64 * weight_inf_norm(net, i);
    let b_i = max_l * (p.layer(i - 1).num_blocks() as f64 * v_inf + 1.0) * delta;
    Ok(a_i * eps + b_i)
}

/// How the global bound derives its per-layer constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMode {
    /// One uniform (a, b) pair from network-wide maxima, with the value
    /// norm bounded by `lipschitz * v0_inf`. Simple and layer-independent,
    /// but meaningful only for networks whose Lipschitz bound is >= 1
    /// (otherwise early layers can exceed the assumed norm).
    #[default]
    Uniform,
    /// Layer-specific constants with value norms propagated through the
    /// layers (weight operator norms, bias magnitudes and activation
    /// offsets). Never looser than the premise requires; usually tighter.
    PerLayerNorms,
}

/// Options for [`global_error_bound_with`].
#[derive(Debug, Clone, Default)]
pub struct BoundOptions {
    pub mode: BoundMode,
    /// Substitute for the built-in network Lipschitz bound in uniform mode,
    /// for callers with a sharper (but still sound) estimate.
    pub lipschitz_override: Option<f64>,
}

/// Per-layer record of the bound recurrence: `eps_prime = a * eps_in + b`
/// for the layer's incoming deviation `eps_in`, then `eps = 2 * eps_prime`
/// feeds the next layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerBound {
    pub layer: usize,
    pub a: f64,
    pub b: f64,
    pub eps_prime: f64,
    pub eps: f64,
}

/// Certified deviation bound for a delta-reduction.
///
/// `eps_final` bounds the block-wise deviation between the reduced and the
/// original network at the output layer, for inputs with magnitude at most
/// `v0_inf` whose per-block spread is at most `eps0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBound {
    /// Uniform per-step gain (largest layer gain in per-layer mode).
    pub a: f64,
    /// Uniform per-step offset (largest layer offset in per-layer mode).
    pub b: f64,
    pub delta: f64,
    pub eps0: f64,
    pub v0_inf: f64,
    /// The network Lipschitz bound used for value norms in uniform mode.
    pub lipschitz: f64,
    pub per_layer: Vec<LayerBound>,
    pub eps_final: f64,
}

/// Global deviation bound with default options (uniform mode).
pub fn global_error_bound(
    net: &Network,
    p: &NetPartition,
    delta: f64,
    eps0: f64,
    v0_inf: f64,
) -> Result<ErrorBound> {
    global_error_bound_with(net, p, delta, eps0, v0_inf, &BoundOptions::default())
}

/// Global deviation bound. Requires `p` to be a delta-bisimulation of
/// `net` for `delta`; fails with the checking report otherwise.
pub fn global_error_bound_with(
    net: &Network,
    p: &NetPartition,
    delta: f64,
    eps0: f64,
    v0_inf: f64,
    options: &BoundOptions,
) -> Result<ErrorBound> {
    for (name, value) in [("delta", delta), ("eps0", eps0), ("v0_inf", v0_inf)] {
        if !(value >= 0.0) {
            return Err(Error::Contract(format!("{name} must be >= 0, got {value}")));
        }
    }
    if let Some(l) = options.lipschitz_override {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::Contract(format!(
                "lipschitz override must be finite and >= 0, got {l}"
            )));
        }
    }
    let report = check_delta_bisimulation(net, p, delta)?;
    if !report.ok {
        return Err(Error::NotDeltaBisimulation(Box::new(report)));
    }

    let k = net.depth();
    let lipschitz = options
        .lipschitz_override
        .unwrap_or_else(|| network_lipschitz_bound(net));

    // (a, b) per layer step.
    let constants: Vec<(f64, f64)> = match options.mode {
        BoundMode::Uniform => {
            let max_l = (1..=k)
                .flat_map(|i| net.activations(i).iter())
                .fold(0.0f64, |m, a| m.max(a.lipschitz()));
            let max_size = (0..=k).map(|i| net.layer_size(i)).max().unwrap() as f64;
            let max_weight = (1..=k).fold(0.0f64, |m, i| m.max(weight_inf_norm(net, i)));
            let max_blocks = (0..=k).map(|i| p.layer(i).num_blocks()).max().unwrap() as f64;
            let a = max_l * max_size * max_weight;
            let b = max_l * (max_blocks * lipschitz * v0_inf + 1.0) * delta;
            vec![(a, b); k]
        }
        BoundMode::PerLayerNorms => {
            let norms = layer_norm_bounds(net, v0_inf);
            (1..=k)
                .map(|i| {
                    let max_l =
                        net.activations(i).iter().fold(0.0f64, |m, a| m.max(a.lipschitz()));
                    let a = max_l * net.layer_size(i - 1) as f64 * weight_inf_norm(net, i);
                    let b = max_l
                        * (p.layer(i - 1).num_blocks() as f64 * norms[i - 1] + 1.0)
                        * delta;
                    (a, b)
                })
                .collect()
        }
    };

    let mut per_layer = Vec::with_capacity(k);
    let mut eps_in = eps0;
    let mut eps_prime = eps0;
    for (idx, &(a, b)) in constants.iter().enumerate() {
        eps_prime = a * eps_in + b;
        let eps = 2.0 * eps_prime;
        per_layer.push(LayerBound { layer: idx + 1, a, b, eps_prime, eps });
        eps_in = eps;
    }
    let (a, b) = constants
        .iter()
        .fold((0.0f64, 0.0f64), |(ma, mb), &(a, b)| (ma.max(a), mb.max(b)));
    Ok(ErrorBound {
        a,
        b,
        delta,
        eps0,
        v0_inf,
        lipschitz,
        per_layer,
        eps_final: eps_prime,
    })
}

/// Closed form of the uniform recurrence for `eps0 = 0`: the deviation
/// after `k` steps is `b * ((2a)^k - 1) / (2a - 1)`, or `k * b` when
/// `2a = 1`. Matches unrolling `eps' = a * eps_in + b`, `eps = 2 * eps'`.
pub fn uniform_bound_closed_form(a: f64, b: f64, k: usize) -> f64 {
    let two_a = 2.0 * a;
    if two_a == 1.0 {
        k as f64 * b
    } else {
        b * ((two_a).powi(k as i32) - 1.0) / (two_a - 1.0)
    }
}

/// Per-layer magnitude bounds `B_0..B_k` for both the original network's
/// values and any of its delta-reductions' values, on inputs bounded by
/// `v0_inf`: merging cannot increase a layer's weight operator norm or
/// bias magnitudes, so one propagation covers both.
pub fn layer_norm_bounds(net: &Network, v0_inf: f64) -> Vec<f64> {
    let mut bounds = Vec::with_capacity(net.depth() + 1);
    bounds.push(v0_inf);
    for i in 1..=net.depth() {
        let mut max_l = 0.0f64;
        let mut max_offset = 0.0f64;
        for a in net.activations(i) {
            max_l = max_l.max(a.lipschitz());
            max_offset = max_offset.max(a.apply(0.0).abs());
        }
        let max_bias = net.biases(i).iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let pre = operator_inf_norm(net, i) * bounds[i - 1] + max_bias;
        bounds.push(max_l * pre + max_offset);
    }
    bounds
}

/// Builds a delta-bisimulation greedily: nodes of each non-input layer are
/// scanned in ascending order and join the first block they fit (same
/// activation, bias spread and all pre-sum spreads within `delta` after
/// joining), else found a new block. Previous layers are fixed before the
/// next is scanned. The result always passes
/// [`check_delta_bisimulation`] at the same `delta`; it is a heuristic,
/// not the coarsest such partition.
pub fn greedy_delta_partition(net: &Network, delta: f64, preserve_io: bool) -> NetPartition {
    assert!(delta >= 0.0, "delta must be >= 0");
    let k = net.depth();
    let mut layers: Vec<LayerPartition> = Vec::with_capacity(k + 1);
    layers.push(if preserve_io {
        LayerPartition::singletons(0, net.layer_size(0))
    } else {
        LayerPartition::single_block(0, net.layer_size(0))
    });
    for i in 1..=k {
        let width = net.layer_size(i);
        if preserve_io && i == k {
            layers.push(LayerPartition::singletons(i, width));
            continue;
        }
        let prev = &layers[i - 1];
        let table = presum_table(net, i, prev);
        let nb = prev.num_blocks();
        let biases = net.biases(i);
        let activations = net.activations(i);
        struct Open {
            members: Vec<usize>,
            bias_lo: f64,
            bias_hi: f64,
            pre_lo: Vec<f64>,
            pre_hi: Vec<f64>,
        }
        let mut open: Vec<Open> = Vec::new();
        'nodes: for t in 0..width {
            let pres: Vec<f64> = (0..nb).map(|pb| table[pb * width + t]).collect();
            for block in open.iter_mut() {
                if activations[block.members[0]] != activations[t] {
                    continue;
                }
                if biases[t].max(block.bias_hi) - biases[t].min(block.bias_lo) > delta {
                    continue;
                }
                let fits = (0..nb).all(|pb| {
                    pres[pb].max(block.pre_hi[pb]) - pres[pb].min(block.pre_lo[pb]) <= delta
                });
                if !fits {
                    continue;
                }
                block.members.push(t);
                block.bias_lo = block.bias_lo.min(biases[t]);
                block.bias_hi = block.bias_hi.max(biases[t]);
                for pb in 0..nb {
                    block.pre_lo[pb] = block.pre_lo[pb].min(pres[pb]);
                    block.pre_hi[pb] = block.pre_hi[pb].max(pres[pb]);
                }
                continue 'nodes;
            }
            open.push(Open {
                members: vec![t],
                bias_lo: biases[t],
                bias_hi: biases[t],
                pre_lo: pres.clone(),
                pre_hi: pres,
            });
        }
        let blocks: Vec<Vec<usize>> = open.into_iter().map(|b| b.members).collect();
        layers.push(LayerPartition::new(i, blocks).expect("greedy blocks partition the layer"));
    }
    NetPartition::new(layers).expect("one partition per layer")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisim::{check_bisimulation, quotient};
    use crate::partition::identity_partition;
    use crate::test_fixtures::{
        delta_band_all_partition, delta_band_net, delta_band_pair_partition, exact_twins_net,
        exact_twins_partition,
    };

    #[test]
    fn adjacent_pair_passes_at_the_boundary() {
        let net = delta_band_net();
        let p = delta_band_pair_partition();
        let report = check_delta_bisimulation(&net, &p, 0.2).unwrap();
        assert!(report.ok, "witness: {:?}", report.witness);
        assert_eq!(report.max_bias_gap, 0.0);
        assert!((report.max_presum_gap - 0.2).abs() < 1e-15);
        // The same merge is not exact.
        assert!(!check_bisimulation(&net, &p).unwrap().ok);
    }

    #[test]
    fn merging_all_three_exceeds_the_budget() {
        let net = delta_band_net();
        let p = delta_band_all_partition();
        let report = check_delta_bisimulation(&net, &p, 0.2).unwrap();
        assert!(!report.ok);
        assert!((report.max_presum_gap - 0.4).abs() < 1e-15);
        let w = report.witness.unwrap();
        assert_eq!(w.condition, Condition::PreSum);
        assert_eq!(w.nodes, (0, 2));
        assert!((w.gap - 0.4).abs() < 1e-15);
        // A looser budget accepts it.
        assert!(check_delta_bisimulation(&net, &p, 0.4).unwrap().ok);
    }

    #[test]
    fn delta_zero_coincides_with_exact_checking() {
        let cases = [
            (exact_twins_net(), exact_twins_partition()),
            (delta_band_net(), delta_band_pair_partition()),
        ];
        for (net, p) in &cases {
            let exact = check_bisimulation(net, p).unwrap();
            let relaxed = check_delta_bisimulation(net, p, 0.0).unwrap();
            assert_eq!(exact.ok, relaxed.ok);
        }
    }

    #[test]
    fn negative_delta_is_rejected() {
        let net = delta_band_net();
        let p = identity_partition(&net);
        assert!(check_delta_bisimulation(&net, &p, -0.1).is_err());
    }

    #[test]
    fn policies_select_the_expected_band_edges() {
        let net = delta_band_net();
        let p = delta_band_pair_partition();
        let min = quotient_delta(&net, &p, 0.2, &RepresentativePolicy::MinIndex).unwrap();
        assert_eq!(min.weights(1).get(0, 0), 0.8);
        let max = quotient_delta(&net, &p, 0.2, &RepresentativePolicy::MaxIndex).unwrap();
        assert_eq!(max.weights(1).get(0, 0), 1.0);
        let pv_min = quotient_delta(&net, &p, 0.2, &RepresentativePolicy::PerValueMin).unwrap();
        assert_eq!(pv_min.weights(1).get(0, 0), 0.8);
        let pv_max = quotient_delta(&net, &p, 0.2, &RepresentativePolicy::PerValueMax).unwrap();
        assert_eq!(pv_max.weights(1).get(0, 0), 1.0);
        // The merged block's outgoing weight sums both members either way.
        assert_eq!(min.weights(2).get(0, 0), 2.0);
        assert_eq!(max.weights(2).get(0, 0), 2.0);

        let explicit = RepresentativePolicy::Explicit(ExplicitReps {
            per_layer: vec![vec![], vec![1, 2], vec![0]],
        });
        let q = quotient_delta(&net, &p, 0.2, &explicit).unwrap();
        assert_eq!(q.weights(1).get(0, 0), 1.0);
        assert_eq!(q.weights(1).get(0, 1), 1.2);

        let bad = RepresentativePolicy::Explicit(ExplicitReps {
            per_layer: vec![vec![], vec![2, 2], vec![0]],
        });
        assert!(matches!(
            quotient_delta(&net, &p, 0.2, &bad),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn quotient_delta_refuses_oversized_spreads() {
        let net = delta_band_net();
        let p = delta_band_all_partition();
        match quotient_delta(&net, &p, 0.2, &RepresentativePolicy::MinIndex) {
            Err(Error::NotDeltaBisimulation(report)) => assert!(!report.ok),
            other => panic!("expected NotDeltaBisimulation, got {other:?}"),
        }
    }

    #[test]
    fn exact_partitions_make_all_policies_agree_with_the_exact_quotient() {
        let net = exact_twins_net();
        let p = exact_twins_partition();
        let reference = quotient(&net, &p).unwrap();
        for policy in RepresentativePolicy::named() {
            let q = quotient_delta(&net, &p, 0.0, &policy).unwrap();
            assert_eq!(q, reference);
        }
    }

    #[test]
    fn enumeration_yields_exactly_the_distinct_member_choices() {
        let net = delta_band_net();
        let p = delta_band_pair_partition();
        let family = enumerate_delta_quotients(&net, &p, 0.2, 1000).unwrap();
        assert_eq!(family.len(), 2);
        let weights: Vec<f64> = family.iter().map(|n| n.weights(1).get(0, 0)).collect();
        assert_eq!(weights, vec![0.8, 1.0]);
        // Exact partitions collapse the family to a single network.
        let net = exact_twins_net();
        let p = exact_twins_partition();
        let family = enumerate_delta_quotients(&net, &p, 0.0, 100_000).unwrap();
        assert_eq!(family.len(), 1);
        assert_eq!(family[0], quotient(&net, &p).unwrap());
    }

    #[test]
    fn enumeration_respects_the_cap() {
        let net = exact_twins_net();
        let p = exact_twins_partition();
        assert!(matches!(
            enumerate_delta_quotients(&net, &p, 0.0, 3),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn abstraction_membership_boundaries() {
        // Dyadic values, so the 0.125 gaps below are exact.
        let p = LayerPartition::new(1, vec![vec![0, 1], vec![2]]).unwrap();
        let v = Valuation::new(1, vec![1.0, 1.25, 4.0]).unwrap();
        let v_hat = Valuation::new(1, vec![1.125, 4.0]).unwrap();
        assert!(eps_abstraction_contains(&v_hat, &v, &p, 0.125));
        assert!(!eps_abstraction_contains(&v_hat, &v, &p, 0.12));
        assert_eq!(max_blockwise_gap(&v_hat, &v, &p), 0.125);

        // eps = 0 admits only the exact abstraction of a consistent v.
        let consistent = Valuation::new(1, vec![1.125, 1.125, 4.0]).unwrap();
        assert!(eps_abstraction_contains(&v_hat, &consistent, &p, 0.0));
        assert!(!eps_abstraction_contains(&v_hat, &v, &p, 0.0));
    }

    #[test]
    fn two_eps_consistency_doubles_the_budget() {
        let p = LayerPartition::new(1, vec![vec![0, 1]]).unwrap();
        let v = Valuation::new(1, vec![1.0, 1.5]).unwrap();
        // Spread 0.5 = 2 * 0.25, all exact in binary.
        assert!(two_eps_consistency(&v, &p, 0.25));
        assert!(!two_eps_consistency(&v, &p, 0.249));
    }

    #[test]
    fn one_step_error_matches_hand_computation() {
        use crate::activation::ActivationKind::Relu;
        // 2 -> 2, weight magnitude 1.5, relu.
        let net = Network::from_parts(
            vec![2, 2],
            vec![vec![vec![1.5, 0.5], vec![0.5, 1.5]]],
            vec![vec![0.0, 0.0]],
            vec![vec![Relu, Relu]],
        )
        .unwrap();
        let p = identity_partition(&net);
        // Pure gain: a = 1 * 2 * 1.5 = 3, so eps 0.1 becomes 0.3.
        let e = one_step_error(&net, &p, 1, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(e, 0.30000000000000004);
        assert!((e - 0.3).abs() < 1e-15);
        // Pure offset: b = 1 * (2 * 1 + 1) * 0.2 = 0.6.
        let e = one_step_error(&net, &p, 1, 0.0, 0.2, 1.0).unwrap();
        assert!((e - 0.6).abs() < 1e-15);
        // Both zero budgets give zero.
        assert_eq!(one_step_error(&net, &p, 1, 0.0, 0.0, 1.0).unwrap(), 0.0);
        // Contract checks.
        assert!(one_step_error(&net, &p, 0, 0.0, 0.0, 1.0).is_err());
        assert!(one_step_error(&net, &p, 1, -0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn global_bound_zero_budgets_give_zero_exactly() {
        let net = exact_twins_net();
        let p = exact_twins_partition();
        let bound = global_error_bound(&net, &p, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(bound.eps_final, 0.0);
        assert!(bound.per_layer.iter().all(|l| l.eps_prime == 0.0 && l.eps == 0.0));
    }

    #[test]
    fn global_bound_recurrence_hand_unrolled() {
        let net = delta_band_net();
        let p = delta_band_pair_partition();
        let bound = global_error_bound(&net, &p, 0.2, 0.0, 1.0).unwrap();
        // Constants: max lipschitz 1, max layer size 3, max weight 1.2,
        // max blocks 2, network lipschitz bound max(1.2, 1.2 * 3) = 3.6.
        assert!((bound.a - 3.6).abs() < 1e-12);
        assert!((bound.b - 1.64).abs() < 1e-12);
        assert!((bound.lipschitz - 3.6).abs() < 1e-12);
        // eps'_1 = b, eps_1 = 2b, eps'_2 = a * 2b + b.
        assert!((bound.per_layer[0].eps_prime - 1.64).abs() < 1e-12);
        assert!((bound.per_layer[1].eps_prime - (3.6 * 3.28 + 1.64)).abs() < 1e-11);
        assert!((bound.eps_final - 13.448).abs() < 1e-11);
        // Consistency between the recurrence and the stored constants.
        let mut eps_in = bound.eps0;
        for step in &bound.per_layer {
            assert_eq!(step.eps_prime, step.a * eps_in + step.b);
            assert_eq!(step.eps, 2.0 * step.eps_prime);
            eps_in = step.eps;
        }
        assert_eq!(bound.eps_final, bound.per_layer.last().unwrap().eps_prime);
    }

    #[test]
    fn closed_form_matches_recurrence() {
        for (a, b, k) in [(3.6, 1.64, 2usize), (1.0, 0.1, 2), (0.25, 0.3, 4), (2.0, 0.01, 6)] {
            let mut eps_in = 0.0;
            let mut eps_prime = 0.0;
            for _ in 0..k {
                eps_prime = a * eps_in + b;
                eps_in = 2.0 * eps_prime;
            }
            let closed = uniform_bound_closed_form(a, b, k);
            let rel = (closed - eps_prime).abs() / eps_prime.abs().max(1e-300);
            assert!(rel < 1e-12, "a={a} b={b} k={k}: {closed} vs {eps_prime}");
        }
        // 2a = 1 branch: each step adds exactly b.
        assert_eq!(uniform_bound_closed_form(0.5, 0.3, 4), 1.2);
        let mut eps_in: f64 = 0.0;
        let mut eps_prime: f64 = 0.0;
        for _ in 0..4 {
            eps_prime = 0.5 * eps_in + 0.3;
            eps_in = 2.0 * eps_prime;
        }
        assert!((eps_prime - 1.2).abs() < 1e-12);
    }

    #[test]
    fn worked_recurrence_example() {
        // a = 1, b = 0.1, two layers: 0.1, then 1 * 0.2 + 0.1 = 0.3.
        assert!((uniform_bound_closed_form(1.0, 0.1, 2) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn global_bound_requires_a_delta_bisimulation() {
        let net = delta_band_net();
        let p = delta_band_all_partition();
        assert!(matches!(
            global_error_bound(&net, &p, 0.2, 0.0, 1.0),
            Err(Error::NotDeltaBisimulation(_))
        ));
        let p = delta_band_pair_partition();
        assert!(global_error_bound(&net, &p, -0.2, 0.0, 1.0).is_err());
        assert!(global_error_bound(&net, &p, 0.2, -1.0, 1.0).is_err());
    }

    #[test]
    fn per_layer_mode_is_sound_for_the_band_fixture() {
        let net = delta_band_net();
        let p = delta_band_pair_partition();
        let tight = global_error_bound_with(
            &net,
            &p,
            0.2,
            0.0,
            1.0,
            &BoundOptions { mode: BoundMode::PerLayerNorms, ..Default::default() },
        )
        .unwrap();
        let uniform = global_error_bound(&net, &p, 0.2, 0.0, 1.0).unwrap();
        assert!(tight.eps_final <= uniform.eps_final);
        assert!(tight.eps_final > 0.0);
    }

    #[test]
    fn norm_bounds_propagate_layer_by_layer() {
        let net = delta_band_net();
        let bounds = layer_norm_bounds(&net, 1.0);
        // Operator norms: layer 1 is 1.2 (largest single weight), layer 2
        // sums three unit weights.
        assert_eq!(bounds.len(), 3);
        assert_eq!(bounds[0], 1.0);
        assert_eq!(bounds[1], 1.2);
        assert!((bounds[2] - 3.6).abs() < 1e-12);
    }

    #[test]
    fn greedy_respects_the_budget_and_is_deterministic() {
        let net = delta_band_net();
        let p = greedy_delta_partition(&net, 0.2, true);
        assert_eq!(p.layer(1).blocks(), &[vec![0, 1], vec![2]]);
        assert!(check_delta_bisimulation(&net, &p, 0.2).unwrap().ok);

        // Zero budget merges only exact twins.
        let twins = exact_twins_net();
        let p0 = greedy_delta_partition(&twins, 0.0, true);
        assert_eq!(p0, exact_twins_partition());

        // A huge budget merges whole layers.
        let p_all = greedy_delta_partition(&net, 10.0, false);
        assert_eq!(p_all.layer(1).num_blocks(), 1);
        assert!(check_delta_bisimulation(&net, &p_all, 10.0).unwrap().ok);
    }

    #[test]
    fn greedy_keeps_activation_classes_apart() {
        use crate::activation::ActivationKind::{Relu, Tanh};
        let net = Network::from_parts(
            vec![1, 4],
            vec![vec![vec![1.0, 1.0, 1.0, 1.0]]],
            vec![vec![0.0; 4]],
            vec![vec![Relu, Tanh, Relu, Tanh]],
        )
        .unwrap();
        let p = greedy_delta_partition(&net, 100.0, false);
        assert_eq!(p.layer(1).blocks(), &[vec![0, 2], vec![1, 3]]);
    }
}
