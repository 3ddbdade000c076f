//! Document formats and seeded generators.
//!
//! Networks and partitions are exchanged as JSON documents (see
//! `docs/formats.md` in the repository for the schema). Serialization uses
//! shortest round-trip float notation, so `save` followed by `load` always
//! reproduces the same bits, and saving again produces byte-identical text.
//!
//! The generators build random networks as deterministic functions of their
//! configuration and seed. `generate_planted` additionally plants exactly
//! mergeable node groups (copying incoming weight columns); its delta
//! variant then perturbs the copies within a spread budget, producing
//! partitions that are delta-bisimulations but not exact ones.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::bisim::check_bisimulation;
use crate::error::{Error, Result};
use crate::network::{Layer, Matrix, Network};
use crate::partition::{LayerPartition, NetPartition};

/// Format version accepted and produced by this crate.
pub const FORMAT_VERSION: &str = "1";

/// Serialized network. `weights[i]` is row-major with one row per source
/// node of layer `i` feeding layer `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<LayerDocument>,
}

/// One non-input layer of a [`ModelDocument`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub activations: Vec<ActivationKind>,
}

/// Serialized net partition: per layer, a list of blocks of node indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub format_version: String,
    pub layer_sizes: Vec<usize>,
    pub blocks: Vec<Vec<Vec<usize>>>,
}

fn check_version(version: &str) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::Invalid(format!(
            "unsupported format_version {version:?}, expected {FORMAT_VERSION:?}"
        )));
    }
    Ok(())
}

/// Parses and validates a model document.
pub fn load_model(text: &str) -> Result<Network> {
    let doc: ModelDocument = serde_json::from_str(text)?;
    check_version(&doc.format_version)?;
    if doc.layers.len() + 1 != doc.layer_sizes.len() {
        return Err(Error::Invalid(format!(
            "{} layer sizes imply {} layers, document has {}",
            doc.layer_sizes.len(),
            doc.layer_sizes.len().saturating_sub(1),
            doc.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (idx, layer) in doc.layers.into_iter().enumerate() {
        let weights = Matrix::from_rows(&layer.weights)
            .map_err(|e| Error::Invalid(format!("layer {}: {e}", idx + 1)))?;
        layers.push(Layer { weights, biases: layer.biases, activations: layer.activations });
    }
    Network::new(doc.layer_sizes, layers)
}

/// Serializes a network, pretty-printed for diffability.
pub fn save_model(net: &Network) -> String {
    let layers = net
        .layers()
        .iter()
        .map(|l| LayerDocument {
            weights: l.weights.to_rows(),
            biases: l.biases.clone(),
            activations: l.activations.clone(),
        })
        .collect();
    let doc = ModelDocument {
        format_version: FORMAT_VERSION.to_string(),
        name: None,
        layer_sizes: net.layer_sizes().to_vec(),
        layers,
    };
    serde_json::to_string_pretty(&doc).expect("model documents always serialize")
}

/// Parses and validates a partition document. The declared layer sizes must
/// match what the blocks cover.
pub fn load_partition(text: &str) -> Result<NetPartition> {
    let doc: PartitionDocument = serde_json::from_str(text)?;
    check_version(&doc.format_version)?;
    if doc.blocks.len() != doc.layer_sizes.len() {
        return Err(Error::Invalid(format!(
            "document declares {} layers but lists blocks for {}",
            doc.layer_sizes.len(),
            doc.blocks.len()
        )));
    }
    let p = NetPartition::from_blocks(doc.blocks)?;
    for (i, (&declared, lp)) in doc.layer_sizes.iter().zip(p.layers()).enumerate() {
        if declared != lp.len() {
            return Err(Error::Invalid(format!(
                "layer {i}: declared size {declared}, blocks cover {}",
                lp.len()
            )));
        }
    }
    Ok(p)
}

/// Serializes a partition, pretty-printed.
pub fn save_partition(p: &NetPartition) -> String {
    let doc = PartitionDocument {
        format_version: FORMAT_VERSION.to_string(),
        layer_sizes: p.layers().iter().map(LayerPartition::len).collect(),
        blocks: p.layers().iter().map(|lp| lp.blocks().to_vec()).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("partition documents always serialize")
}

/// Which activations a generator assigns to nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum ActivationPool {
    /// Every node gets this activation.
    Fixed(ActivationKind),
    /// Nodes draw uniformly from the full set of supported kinds.
    Mixed,
    /// Nodes draw uniformly from the kinds that fix zero (everything except
    /// sigmoid and softplus). Networks built from these map the origin to
    /// the origin, which keeps value norms within the Lipschitz estimate.
    MixedZeroFixing,
}

/// Configuration for the random-network generators. The output is a
/// deterministic function of this value (including `seed`).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
    /// Weight magnitudes are drawn uniformly from this range, sign random.
    pub weight_range: (f64, f64),
    /// Biases are drawn uniformly from this interval.
    pub bias_range: (f64, f64),
    pub activations: ActivationPool,
    /// Snap weights and biases to multiples of this step (useful to make
    /// exact collisions likely in small search spaces).
    pub quantize: Option<f64>,
    /// Rescale any layer whose weight operator norm falls below this value
    /// so it reaches it. Keeps networks non-contracting, the regime where
    /// the uniform error bound's norm assumption holds.
    pub min_layer_gain: Option<f64>,
}

impl GeneratorConfig {
    /// Plain defaults: weights in (-1, 1), biases in (-0.5, 0.5), relu.
    pub fn new(layer_sizes: Vec<usize>, seed: u64) -> Self {
        GeneratorConfig {
            layer_sizes,
            seed,
            weight_range: (0.0, 1.0),
            bias_range: (-0.5, 0.5),
            activations: ActivationPool::Fixed(ActivationKind::Relu),
            quantize: None,
            min_layer_gain: None,
        }
    }
}

/// A group of nodes to make mergeable: `size` nodes of `layer`, allocated
/// from the lowest free positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwinGroup {
    pub layer: usize,
    pub size: usize,
}

fn draw_value(rng: &mut ChaCha8Rng, range: (f64, f64), signed: bool, quantize: Option<f64>) -> f64 {
    let (lo, hi) = range;
    let mut x = if hi > lo { rng.random_range(lo..hi) } else { lo };
    if signed && rng.random_bool(0.5) {
        x = -x;
    }
    if let Some(step) = quantize {
        x = (x / step).round() * step;
    }
    if x == 0.0 {
        x = 0.0; // normalize -0.0 away
    }
    x
}

fn pool_kind(rng: &mut ChaCha8Rng, pool: &ActivationPool) -> ActivationKind {
    use ActivationKind::*;
    match pool {
        ActivationPool::Fixed(kind) => *kind,
        ActivationPool::Mixed => {
            let all = [Relu, LeakyRelu { slope: 0.1 }, Tanh, Sigmoid, Softplus, Arctan, Softsign, Identity];
            all[rng.random_range(0..all.len())]
        }
        ActivationPool::MixedZeroFixing => {
            let zf = [Relu, LeakyRelu { slope: 0.1 }, Tanh, Arctan, Softsign, Identity];
            zf[rng.random_range(0..zf.len())]
        }
    }
}

/// Generates a random network from the configuration.
pub fn generate_random(cfg: &GeneratorConfig) -> Result<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    build_random(cfg, &mut rng)
}

fn build_random(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<Network> {
    if cfg.layer_sizes.len() < 2 {
        return Err(Error::Invalid("generator needs at least two layer sizes".to_string()));
    }
    let mut layers = Vec::with_capacity(cfg.layer_sizes.len() - 1);
    for w in cfg.layer_sizes.windows(2) {
        let (src, dst) = (w[0], w[1]);
        let mut data = Vec::with_capacity(src * dst);
        for _ in 0..src * dst {
            data.push(draw_value(rng, cfg.weight_range, true, cfg.quantize));
        }
        let biases = (0..dst)
            .map(|_| draw_value(rng, cfg.bias_range, false, cfg.quantize))
            .collect();
        let activations = (0..dst).map(|_| pool_kind(rng, &cfg.activations)).collect();
        layers.push(Layer { weights: Matrix::new(src, dst, data)?, biases, activations });
    }
    let mut net = Network::new(cfg.layer_sizes.clone(), layers)?;
    if let Some(gain) = cfg.min_layer_gain {
        for i in 1..=net.depth() {
            let op = crate::network::operator_inf_norm(&net, i);
            if op < gain && op > 0.0 {
                let scale = gain / op;
                for w in net.layers_mut()[i - 1].weights.data_mut() {
                    *w *= scale;
                }
            }
        }
    }
    Ok(net)
}

fn twin_partition(sizes: &[usize], twins: &[TwinGroup]) -> Result<NetPartition> {
    let mut blocks: Vec<Vec<Vec<usize>>> = Vec::with_capacity(sizes.len());
    for (layer, &n) in sizes.iter().enumerate() {
        let mut taken = 0usize;
        let mut layer_blocks: Vec<Vec<usize>> = Vec::new();
        for group in twins.iter().filter(|g| g.layer == layer) {
            if group.size < 2 {
                return Err(Error::Contract(format!(
                    "twin group in layer {layer} must have at least 2 nodes"
                )));
            }
            if taken + group.size > n {
                return Err(Error::Contract(format!(
                    "twin groups exceed the {n} nodes of layer {layer}"
                )));
            }
            layer_blocks.push((taken..taken + group.size).collect());
            taken += group.size;
        }
        for node in taken..n {
            layer_blocks.push(vec![node]);
        }
        blocks.push(layer_blocks);
    }
    NetPartition::from_blocks(blocks)
}

/// Random network with planted exact merges. Each twin group's nodes get
/// identical incoming weight columns, biases and activations (copied from
/// the group's first node); outgoing weights stay free. The returned
/// partition groups exactly the twins and always passes the exact check.
pub fn generate_planted(cfg: &GeneratorConfig, twins: &[TwinGroup]) -> Result<(Network, NetPartition)> {
    for group in twins {
        if group.layer == 0 || group.layer >= cfg.layer_sizes.len() {
            return Err(Error::Contract(format!(
                "twin groups must target layers 1..={}, got {}",
                cfg.layer_sizes.len() - 1,
                group.layer
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = build_random(cfg, &mut rng)?;
    let partition = twin_partition(&cfg.layer_sizes, twins)?;
    plant_copies(&mut net, &partition);
    Ok((net, partition))
}

fn plant_copies(net: &mut Network, partition: &NetPartition) {
    for i in 1..=net.depth() {
        let lp = partition.layer(i);
        let layer = &mut net.layers_mut()[i - 1];
        let cols = layer.weights.cols();
        for block in lp.blocks() {
            let first = block[0];
            for &node in &block[1..] {
                for row in 0..layer.weights.rows() {
                    let v = layer.weights.data()[row * cols + first];
                    layer.weights.data_mut()[row * cols + node] = v;
                }
                layer.biases[node] = layer.biases[first];
                layer.activations[node] = layer.activations[first];
            }
        }
    }
}

/// Random network with planted approximate merges: twins are planted as in
/// [`generate_planted`], then every copy's bias and incoming weights are
/// perturbed within budgets that keep each group's spreads at most `delta`.
/// For `delta > 0` the result is guaranteed to fail the exact check on the
/// returned partition while passing the delta check.
pub fn generate_planted_delta(
    cfg: &GeneratorConfig,
    twins: &[TwinGroup],
    delta: f64,
) -> Result<(Network, NetPartition)> {
    if !(delta >= 0.0) {
        return Err(Error::Contract(format!("delta must be >= 0, got {delta}")));
    }
    let (mut net, partition) = generate_planted(cfg, twins)?;
    if delta == 0.0 {
        return Ok((net, partition));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    for i in 1..=net.depth() {
        let lp = partition.layer(i).clone();
        let src = net.layer_size(i - 1);
        // Per-entry perturbations of at most delta / (2 * src) keep every
        // pre-sum within delta / 2 of the unperturbed column, so any two
        // group members stay within delta of each other; likewise biases.
        let weight_budget = delta / (2.0 * src as f64);
        let bias_budget = delta / 2.0;
        let layer = &mut net.layers_mut()[i - 1];
        let cols = layer.weights.cols();
        for block in lp.blocks() {
            for &node in &block[1..] {
                for row in 0..src {
                    let shift = rng.random_range(-weight_budget..weight_budget);
                    layer.weights.data_mut()[row * cols + node] += shift;
                }
                layer.biases[node] += rng.random_range(-bias_budget..bias_budget);
            }
        }
    }
    // The random shifts are almost surely nonzero, but make it a guarantee.
    if check_bisimulation(&net, &partition)?.ok {
        if let Some(group) = twins.first() {
            let first = partition.layer(group.layer).block_of(0);
            let node = partition.layer(group.layer).block(first)[1];
            net.layers_mut()[group.layer - 1].biases[node] += delta / 4.0;
        }
    }
    Ok((net, partition))
}
