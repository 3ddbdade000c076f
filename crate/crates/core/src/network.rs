//! Feedforward networks with per-node activations, and their semantics.
//!
//! A network with `k` layers maps a valuation of the input layer (layer 0)
//! through `k` affine-plus-activation steps. Node identity matters
//! throughout this crate: nodes are addressed as (layer, position), and
//! reductions merge positions within a layer.
//!
//! Numeric conventions, fixed so results are reproducible bit for bit:
//! * weights are dense row-major matrices, rows indexed by source node;
//! * every sum over source nodes runs in ascending node order;
//! * the bias is added after the weighted sum, then the activation applies.

use crate::activation::ActivationKind;
use crate::error::{Error, Result};

/// Dense row-major matrix. `rows` is the source-layer width, `cols` the
/// target-layer width.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Invalid(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds from per-source rows, checking that all rows are equally wide.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Invalid("ragged weight rows".to_string()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Row slice for a source node: its weights to every target node.
    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// One non-input layer: incoming weights plus per-node bias and activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) weights: Matrix,
    pub(crate) biases: Vec<f64>,
    pub(crate) activations: Vec<ActivationKind>,
}

impl Layer {
    /// Assembles a layer; shape checks happen in [`Network::new`].
    pub fn new(weights: Matrix, biases: Vec<f64>, activations: Vec<ActivationKind>) -> Self {
        Layer { weights, biases, activations }
    }
}

/// An immutable feedforward network. Constructed through [`Network::new`],
/// which validates all shape and finiteness invariants; afterwards the
/// structure cannot be broken, so references can be shared freely.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds and validates a network.
    ///
    /// `layer_sizes` has `k + 1` positive entries (input layer first).
    /// `layers[i]` feeds layer `i + 1`: its weight matrix must be
    /// `layer_sizes[i] x layer_sizes[i + 1]`, and biases and activations must
    /// have one entry per target node. All numbers must be finite.
    pub fn new(layer_sizes: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Invalid(
                "a network needs an input layer and at least one further layer".to_string(),
            ));
        }
        if layers.len() != layer_sizes.len() - 1 {
            return Err(Error::Invalid(format!(
                "{} layer sizes imply {} weight layers, got {}",
                layer_sizes.len(),
                layer_sizes.len() - 1,
                layers.len()
            )));
        }
        if let Some(pos) = layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::Invalid(format!("layer {pos} is empty")));
        }
        for (idx, layer) in layers.iter().enumerate() {
            let (src, dst) = (layer_sizes[idx], layer_sizes[idx + 1]);
            let i = idx + 1;
            if layer.weights.rows() != src || layer.weights.cols() != dst {
                return Err(Error::Invalid(format!(
                    "layer {i}: weight matrix is {}x{}, expected {src}x{dst}",
                    layer.weights.rows(),
                    layer.weights.cols()
                )));
            }
            if layer.biases.len() != dst {
                return Err(Error::Invalid(format!(
                    "layer {i}: {} biases for {dst} nodes",
                    layer.biases.len()
                )));
            }
            if layer.activations.len() != dst {
                return Err(Error::Invalid(format!(
                    "layer {i}: {} activations for {dst} nodes",
                    layer.activations.len()
                )));
            }
            if !layer.weights.data().iter().all(|w| w.is_finite()) {
                return Err(Error::Invalid(format!("layer {i}: non-finite weight")));
            }
            if !layer.biases.iter().all(|b| b.is_finite()) {
                return Err(Error::Invalid(format!("layer {i}: non-finite bias")));
            }
            if let Some(bad) = layer.activations.iter().find(|a| !a.validate()) {
                return Err(Error::Invalid(format!(
                    "layer {i}: invalid activation parameter in {bad}"
                )));
            }
        }
        Ok(Network { layer_sizes, layers })
    }

    /// Convenience constructor from plain nested vectors, one entry per
    /// non-input layer.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<Vec<f64>>>,
        biases: Vec<Vec<f64>>,
        activations: Vec<Vec<ActivationKind>>,
    ) -> Result<Self> {
        if weights.len() != biases.len() || weights.len() != activations.len() {
            return Err(Error::Invalid(
                "weights, biases and activations must have one entry per layer".to_string(),
            ));
        }
        let layers = weights
            .into_iter()
            .zip(biases)
            .zip(activations)
            .map(|((w, b), a)| {
                Ok(Layer { weights: Matrix::from_rows(&w)?, biases: b, activations: a })
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layer_sizes, layers)
    }

    /// Number of non-input layers.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Width of layer `i`, `0 <= i <= depth`.
    pub fn layer_size(&self, i: usize) -> usize {
        self.layer_sizes[i]
    }

    /// Total node count across all layers.
    pub fn num_nodes(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    /// Total edge count; dense layers contribute `|src| * |dst|` each.
    pub fn num_edges(&self) -> usize {
        self.layers.iter().map(|l| l.weights.rows() * l.weights.cols()).sum()
    }

    fn layer_checked(&self, i: usize) -> Result<&Layer> {
        if i == 0 || i > self.depth() {
            return Err(Error::Index(format!(
                "layer {i} (valid layers are 1..={})",
                self.depth()
            )));
        }
        Ok(&self.layers[i - 1])
    }

    /// Incoming weight matrix of layer `i`, `1 <= i <= depth`.
    pub fn weights(&self, i: usize) -> &Matrix {
        &self.layers[i - 1].weights
    }

    pub fn biases(&self, i: usize) -> &[f64] {
        &self.layers[i - 1].biases
    }

    pub fn activations(&self, i: usize) -> &[ActivationKind] {
        &self.layers[i - 1].activations
    }

    pub(crate) fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Sum of the weights from a set of layer-`i-1` nodes into one layer-`i`
    /// node. This is the quantity exact reduction keeps equal and
    /// approximate reduction keeps within a spread bound.
    ///
    /// Summation runs in the order the block lists its members; canonical
    /// blocks are ascending, which makes results bit-reproducible.
    pub fn pre_sum(&self, i: usize, block: &[usize], target: usize) -> Result<f64> {
        let layer = self.layer_checked(i)?;
        let (src, dst) = (layer.weights.rows(), layer.weights.cols());
        if target >= dst {
            return Err(Error::Index(format!(
                "target node {target} in layer {i} of width {dst}"
            )));
        }
        let mut sum = 0.0;
        for &s in block {
            if s >= src {
                return Err(Error::Index(format!(
                    "source node {s} in layer {} of width {src}",
                    i - 1
                )));
            }
            sum += layer.weights.get(s, target);
        }
        Ok(sum)
    }

    /// Applies layer `i` to a valuation of layer `i - 1`.
    pub fn eval_layer(&self, i: usize, v: &Valuation) -> Result<Valuation> {
        let layer = self.layer_checked(i)?;
        if v.layer() != i - 1 {
            return Err(Error::Contract(format!(
                "valuation is for layer {}, expected layer {}",
                v.layer(),
                i - 1
            )));
        }
        if v.values().len() != layer.weights.rows() {
            return Err(Error::Contract(format!(
                "valuation has {} entries, layer {} has {}",
                v.values().len(),
                i - 1,
                layer.weights.rows()
            )));
        }
        let dst = layer.weights.cols();
        let mut acc = vec![0.0f64; dst];
        // Source-major traversal: per target the addends still arrive in
        // ascending source order, matching pre_sum.
        for (s, &x) in v.values().iter().enumerate() {
            let row = layer.weights.row(s);
            for (t, a) in acc.iter_mut().enumerate() {
                *a += row[t] * x;
            }
        }
        let values = acc
            .iter()
            .enumerate()
            .map(|(t, &a)| layer.activations[t].apply(a + layer.biases[t]))
            .collect();
        Ok(Valuation::from_eval(i, values))
    }

    /// Full forward pass: layer 0 valuation in, layer `k` valuation out.
    pub fn eval(&self, input: &Valuation) -> Result<Valuation> {
        let mut v = input.clone();
        for i in 1..=self.depth() {
            v = self.eval_layer(i, &v)?;
        }
        Ok(v)
    }

    /// Forward pass keeping every intermediate valuation. Index `i` of the
    /// result is the layer-`i` valuation; index 0 is the input itself.
    pub fn eval_trace(&self, input: &Valuation) -> Result<Vec<Valuation>> {
        let mut trace = Vec::with_capacity(self.depth() + 1);
        trace.push(input.clone());
        for i in 1..=self.depth() {
            let next = self.eval_layer(i, trace.last().unwrap())?;
            trace.push(next);
        }
        Ok(trace)
    }
}

/// Largest absolute weight entry of layer `i`.
pub fn weight_inf_norm(net: &Network, i: usize) -> f64 {
    net.weights(i).data().iter().fold(0.0, |m, w| m.max(w.abs()))
}

/// Operator norm of the layer-`i` linear map on max-norm vectors: the
/// largest column sum of absolute weights (columns gather a target node's
/// incoming edges).
pub fn operator_inf_norm(net: &Network, i: usize) -> f64 {
    let w = net.weights(i);
    let mut worst = 0.0f64;
    for t in 0..w.cols() {
        let mut col = 0.0;
        for s in 0..w.rows() {
            col += w.get(s, t).abs();
        }
        worst = worst.max(col);
    }
    worst
}

/// Upper bound on the network's Lipschitz constant in the max norm, taken
/// as the largest over all prefixes of the product of per-layer gains
/// (activation Lipschitz bound times operator norm). Any sound bound can be
/// substituted for this one where a Lipschitz constant is a parameter.
pub fn network_lipschitz_bound(net: &Network) -> f64 {
    let mut best = 0.0f64;
    let mut product = 1.0f64;
    for i in 1..=net.depth() {
        let act_gain = net
            .activations(i)
            .iter()
            .fold(0.0f64, |m, a| m.max(a.lipschitz()));
        product *= act_gain * operator_inf_norm(net, i);
        best = best.max(product);
    }
    best
}

/// Values attached to every node of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    layer: usize,
    values: Vec<f64>,
}

impl Valuation {
    /// Validates that all entries are finite.
    pub fn new(layer: usize, values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!(
                "valuation entry {pos} is not finite"
            )));
        }
        Ok(Valuation { layer, values })
    }

    // Evaluation output; finite by construction from finite inputs, except
    // for astronomically scaled networks, which callers are trusted to avoid.
    pub(crate) fn from_eval(layer: usize, values: Vec<f64>) -> Self {
        Valuation { layer, values }
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest absolute entry.
    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}
