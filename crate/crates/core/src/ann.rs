//! Feed-forward network with sigmoid hidden layers, a linear (or sigmoid)
//! output layer and a constant bias input feeding a trainable bias weight in
//! the last column of every weight matrix.
//!
//! Weight updates follow the momentum rule
//! `ΔW(n) = α·ΔW(n-1) + η·source·local_gradient`, applied output layer first
//! and then hidden layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neuron counts per layer, bias units excluded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Topology(Vec<usize>);

impl Topology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidTopology(format!(
                "need at least 2 layers, got {}",
                layer_sizes.len()
            )));
        }
        if let Some(pos) = layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidTopology(format!("layer {pos} has zero neurons")));
        }
        Ok(Self(layer_sizes))
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn inputs(&self) -> usize {
        self.0[0]
    }

    pub fn outputs(&self) -> usize {
        self.0[self.0.len() - 1]
    }

    /// Number of weight matrices (layer transitions).
    pub fn transitions(&self) -> usize {
        self.0.len() - 1
    }
}

impl TryFrom<Vec<usize>> for Topology {
    type Error = Error;

    fn try_from(value: Vec<usize>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Topology> for Vec<usize> {
    fn from(t: Topology) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Linear,
}

impl ActivationKind {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => sigmoid(t),
            ActivationKind::Linear => t,
        }
    }

    /// Derivative expressed through the activation's output value.
    pub fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => out * (1.0 - out),
            ActivationKind::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Linear => "linear",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "linear" => Ok(ActivationKind::Linear),
            other => Err(Error::UnknownActivation(other.to_string())),
        }
    }
}

/// Logistic function `1 / (1 + e^-t)`.
///
/// Evaluated so that neither branch overflows: for large negative `t` the
/// result underflows towards 0 instead of producing `inf / inf`.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Row-major matrix; rows are destination neurons, the last column holds the
/// bias weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Shape("weight matrix must be non-empty".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::Shape(format!(
                "ragged weight matrix: row {i} has {} columns, expected {n_cols}",
                rows[i].len()
            )));
        }
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight matrix contains a non-finite value".into()));
        }
        Ok(Self { rows: n_rows, cols: n_cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    fn same_shape(&self, other: &WeightMatrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    topology: Topology,
    weights: Vec<WeightMatrix>,
    pub hidden_activation: ActivationKind,
    pub output_activation: ActivationKind,
    pub bias_input: f64,
}

impl Network {
    /// Builds a network, checking every matrix against the topology.
    pub fn new(
        topology: Topology,
        weights: Vec<WeightMatrix>,
        hidden_activation: ActivationKind,
        output_activation: ActivationKind,
        bias_input: f64,
    ) -> Result<Self> {
        if weights.len() != topology.transitions() {
            return Err(Error::Shape(format!(
                "topology {:?} needs {} weight matrices, got {}",
                topology.layer_sizes(),
                topology.transitions(),
                weights.len()
            )));
        }
        for (l, (w, pair)) in weights.iter().zip(topology.layer_sizes().windows(2)).enumerate() {
            let (rows, cols) = (pair[1], pair[0] + 1);
            if w.rows() != rows || w.cols() != cols {
                return Err(Error::Shape(format!(
                    "weight matrix {l} is {}x{}, expected {rows}x{cols}",
                    w.rows(),
                    w.cols()
                )));
            }
        }
        if !bias_input.is_finite() {
            return Err(Error::NonFinite("bias input".into()));
        }
        Ok(Self { topology, weights, hidden_activation, output_activation, bias_input })
    }

    /// All-zero network with sigmoid hidden layers, linear output and bias `+1`.
    pub fn zeros(topology: Topology) -> Self {
        let weights = topology
            .layer_sizes()
            .windows(2)
            .map(|p| WeightMatrix::zeros(p[1], p[0] + 1))
            .collect();
        Self {
            topology,
            weights,
            hidden_activation: ActivationKind::Sigmoid,
            output_activation: ActivationKind::Linear,
            bias_input: 1.0,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn weights(&self) -> &[WeightMatrix] {
        &self.weights
    }

    /// Mutable access to the matrices. Shapes are fixed; only values change.
    pub fn weights_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights.iter_mut().map(WeightMatrix::values_mut)
    }

    /// Total number of trainable weights, bias weights included.
    pub fn weight_count(&self) -> usize {
        self.weights.iter().map(|w| w.values.len()).sum()
    }

    pub fn activation_for(&self, transition: usize) -> ActivationKind {
        if transition + 1 == self.weights.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        forward(self, input)
    }
}

/// Everything computed during one forward pass.
///
/// `nets[l]` and `outs[l]` belong to layer `l + 1`; the last entry is the
/// output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub inputs: Vec<f64>,
    pub nets: Vec<Vec<f64>>,
    pub outs: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Pre-activation sums of the first hidden layer.
    pub fn hidden_net(&self) -> &[f64] {
        &self.nets[0]
    }

    pub fn hidden_out(&self) -> &[f64] {
        &self.outs[0]
    }

    pub fn output_net(&self) -> &[f64] {
        self.nets.last().expect("trace has at least one layer")
    }

    pub fn output_out(&self) -> &[f64] {
        self.outs.last().expect("trace has at least one layer")
    }

    /// Values feeding weight matrix `transition` (without the bias input).
    pub fn source_of(&self, transition: usize) -> &[f64] {
        if transition == 0 {
            &self.inputs
        } else {
            &self.outs[transition - 1]
        }
    }
}

/// `desired - actual`, one entry per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector(pub Vec<f64>);

impl ErrorVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

/// Previous-step weight changes, one matrix per layer transition.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaState {
    deltas: Vec<WeightMatrix>,
}

impl DeltaState {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            deltas: net.weights.iter().map(|w| WeightMatrix::zeros(w.rows, w.cols)).collect(),
        }
    }

    pub fn deltas(&self) -> &[WeightMatrix] {
        &self.deltas
    }

    pub fn reset(&mut self) {
        for d in &mut self.deltas {
            d.values.fill(0.0);
        }
    }

    fn check_against(&self, net: &Network) -> Result<()> {
        let ok = self.deltas.len() == net.weights.len()
            && self.deltas.iter().zip(&net.weights).all(|(d, w)| d.same_shape(w));
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("delta state does not match network shape".into()))
        }
    }
}

/// Order in which the output and hidden layers are updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// Output weights are updated first; hidden updates read the new values.
    #[default]
    SequentialPaper,
    /// Every change is computed from the pre-update weights.
    Simultaneous,
}

impl std::str::FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" | "sequential-paper" => Ok(UpdateMode::SequentialPaper),
            "simultaneous" => Ok(UpdateMode::Simultaneous),
            other => Err(Error::Config(format!("unknown update mode `{other}`"))),
        }
    }
}

/// Learning rate, momentum and update ordering for one back-propagation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub mode: UpdateMode,
}

/// Weighted sum of `inputs` plus `bias_input` times the trailing bias weight.
pub fn neuron_net_input(inputs: &[f64], weight_row: &[f64], bias_input: f64) -> Result<f64> {
    if weight_row.len() != inputs.len() + 1 {
        return Err(Error::Shape(format!(
            "weight row has {} entries for {} inputs (+1 bias)",
            weight_row.len(),
            inputs.len()
        )));
    }
    let (bias_w, w) = weight_row.split_last().expect("length checked above");
    let sum: f64 = inputs.iter().zip(w).map(|(x, w)| x * w).sum();
    Ok(sum + bias_input * bias_w)
}

pub fn forward(net: &Network, input: &[f64]) -> Result<ForwardTrace> {
    if input.len() != net.topology.inputs() {
        return Err(Error::Shape(format!(
            "input has {} values, network expects {}",
            input.len(),
            net.topology.inputs()
        )));
    }
    let mut nets = Vec::with_capacity(net.weights.len());
    let mut outs: Vec<Vec<f64>> = Vec::with_capacity(net.weights.len());
    for (l, w) in net.weights.iter().enumerate() {
        let act = net.activation_for(l);
        let source = if l == 0 { input } else { &outs[l - 1] };
        let layer_net = (0..w.rows)
            .map(|r| neuron_net_input(source, w.row(r), net.bias_input))
            .collect::<Result<Vec<_>>>()?;
        let layer_out = layer_net.iter().map(|&v| act.apply(v)).collect();
        nets.push(layer_net);
        outs.push(layer_out);
    }
    Ok(ForwardTrace { inputs: input.to_vec(), nets, outs })
}

pub fn output_errors(desired: &[f64], actual: &[f64]) -> Result<ErrorVector> {
    if desired.len() != actual.len() {
        return Err(Error::Shape(format!(
            "desired has {} values, actual has {}",
            desired.len(),
            actual.len()
        )));
    }
    Ok(ErrorVector(desired.iter().zip(actual).map(|(d, a)| d - a).collect()))
}

/// Half sum of squared errors.
pub fn loss(desired: &[f64], actual: &[f64]) -> Result<f64> {
    let e = output_errors(desired, actual)?;
    Ok(0.5 * e.0.iter().map(|v| v * v).sum::<f64>())
}

/// Local gradients of the output layer: `err[k] · f'(out[k])`.
fn output_local_gradients(net: &Network, trace: &ForwardTrace, err: &ErrorVector) -> Vec<f64> {
    let act = net.output_activation;
    err.0.iter().zip(trace.output_out()).map(|(e, &o)| e * act.derivative_from_output(o)).collect()
}

/// Local gradients of layer `transition`, given those of the layer above and
/// the weight matrix connecting them.
fn hidden_local_gradients(
    net: &Network,
    trace: &ForwardTrace,
    transition: usize,
    upper: &WeightMatrix,
    upper_gradients: &[f64],
) -> Vec<f64> {
    let act = net.activation_for(transition);
    trace.outs[transition]
        .iter()
        .enumerate()
        .map(|(j, &o)| {
            let back: f64 = upper_gradients.iter().enumerate().map(|(k, g)| g * upper.get(k, j)).sum();
            act.derivative_from_output(o) * back
        })
        .collect()
}

/// Computes `ΔW = α·ΔW_prev + η·source·gradient` for one matrix into `out`
/// without touching the network.
fn momentum_deltas(
    w: &WeightMatrix,
    prev: &WeightMatrix,
    source: &[f64],
    bias_input: f64,
    gradients: &[f64],
    cfg: &StepConfig,
) -> Result<WeightMatrix> {
    let mut out = WeightMatrix::zeros(w.rows, w.cols);
    for (i, g) in gradients.iter().enumerate() {
        for (j, &src) in source.iter().chain(std::iter::once(&bias_input)).enumerate() {
            let d = cfg.momentum * prev.get(i, j) + cfg.learning_rate * src * g;
            let updated = w.get(i, j) + d;
            if !d.is_finite() || !updated.is_finite() {
                return Err(Error::NonFinite(format!("weight update at ({i}, {j})")));
            }
            out.set(i, j, d);
        }
    }
    Ok(out)
}

fn apply(w: &mut WeightMatrix, deltas: &WeightMatrix, store: &mut WeightMatrix) {
    for ((v, d), s) in w.values.iter_mut().zip(&deltas.values).zip(&mut store.values) {
        *v += d;
        *s = *d;
    }
}

fn check_step_inputs(net: &Network, trace: &ForwardTrace, err: &ErrorVector, delta: &DeltaState) -> Result<()> {
    delta.check_against(net)?;
    if err.0.len() != net.topology.outputs() {
        return Err(Error::Shape(format!(
            "error vector has {} entries, network has {} outputs",
            err.0.len(),
            net.topology.outputs()
        )));
    }
    let shaped = trace.inputs.len() == net.topology.inputs()
        && trace.outs.len() == net.weights.len()
        && trace.outs.iter().zip(&net.weights).all(|(o, w)| o.len() == w.rows);
    if !shaped {
        return Err(Error::Shape("forward trace does not match network shape".into()));
    }
    Ok(())
}

/// Updates the last weight matrix in place (output neurons).
///
/// Each weight moves by `α·ΔW_prev + η·hidden_out[j]·err[i]·f'(out[i])`; the
/// bias column uses `bias_input` as its source value. `delta` receives the
/// new changes. On error the network and `delta` are untouched.
pub fn update_output_weights(
    net: &mut Network,
    trace: &ForwardTrace,
    err: &ErrorVector,
    learning_rate: f64,
    momentum: f64,
    delta: &mut DeltaState,
) -> Result<()> {
    check_step_inputs(net, trace, err, delta)?;
    let cfg = StepConfig { learning_rate, momentum, mode: UpdateMode::SequentialPaper };
    let top = net.weights.len() - 1;
    let gradients = output_local_gradients(net, trace, err);
    let d = momentum_deltas(
        &net.weights[top],
        &delta.deltas[top],
        trace.source_of(top),
        net.bias_input,
        &gradients,
        &cfg,
    )?;
    apply(&mut net.weights[top], &d, &mut delta.deltas[top]);
    Ok(())
}

/// Updates every hidden-layer matrix in place, top-down.
///
/// Local gradients are back-propagated through the weights currently stored
/// in `net`. Under [`UpdateMode::SequentialPaper`] each layer is applied
/// before the next lower layer reads it; under [`UpdateMode::Simultaneous`]
/// all changes are computed first and applied together. For a single hidden
/// layer the two modes coincide inside this function: the difference lies in
/// whether the caller has already updated the output layer.
pub fn update_hidden_weights(
    net: &mut Network,
    trace: &ForwardTrace,
    err: &ErrorVector,
    learning_rate: f64,
    momentum: f64,
    delta: &mut DeltaState,
    mode: UpdateMode,
) -> Result<()> {
    check_step_inputs(net, trace, err, delta)?;
    let cfg = StepConfig { learning_rate, momentum, mode };
    let top = net.weights.len() - 1;
    let mut upper_gradients = output_local_gradients(net, trace, err);

    match mode {
        UpdateMode::SequentialPaper => {
            // Work on copies so a non-finite failure leaves the inputs intact.
            let mut weights = net.weights.clone();
            let mut deltas = delta.deltas.clone();
            for l in (0..top).rev() {
                let gradients = hidden_local_gradients(net, trace, l, &weights[l + 1], &upper_gradients);
                let d = momentum_deltas(&weights[l], &deltas[l], trace.source_of(l), net.bias_input, &gradients, &cfg)?;
                apply(&mut weights[l], &d, &mut deltas[l]);
                upper_gradients = gradients;
            }
            net.weights = weights;
            delta.deltas = deltas;
        }
        UpdateMode::Simultaneous => {
            let mut pending = Vec::with_capacity(top);
            for l in (0..top).rev() {
                let gradients = hidden_local_gradients(net, trace, l, &net.weights[l + 1], &upper_gradients);
                let d = momentum_deltas(&net.weights[l], &delta.deltas[l], trace.source_of(l), net.bias_input, &gradients, &cfg)?;
                pending.push((l, d));
                upper_gradients = gradients;
            }
            for (l, d) in pending {
                apply(&mut net.weights[l], &d, &mut delta.deltas[l]);
            }
        }
    }
    Ok(())
}

/// Result of one back-propagation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub errors: ErrorVector,
    pub trace: ForwardTrace,
}

/// Forward pass, error, then output and hidden updates in the order the mode
/// prescribes. On error neither `net` nor `delta` is modified.
pub fn backprop_step(
    net: &mut Network,
    input: &[f64],
    desired: &[f64],
    cfg: &StepConfig,
    delta: &mut DeltaState,
) -> Result<StepOutcome> {
    let trace = forward(net, input)?;
    let errors = output_errors(desired, trace.output_out())?;

    let mut next = net.clone();
    let mut next_delta = delta.clone();
    match cfg.mode {
        UpdateMode::SequentialPaper => {
            update_output_weights(&mut next, &trace, &errors, cfg.learning_rate, cfg.momentum, &mut next_delta)?;
            update_hidden_weights(&mut next, &trace, &errors, cfg.learning_rate, cfg.momentum, &mut next_delta, cfg.mode)?;
        }
        UpdateMode::Simultaneous => {
            // Hidden first: it must read the output weights before they move.
            update_hidden_weights(&mut next, &trace, &errors, cfg.learning_rate, cfg.momentum, &mut next_delta, cfg.mode)?;
            update_output_weights(&mut next, &trace, &errors, cfg.learning_rate, cfg.momentum, &mut next_delta)?;
        }
    }
    *net = next;
    *delta = next_delta;
    Ok(StepOutcome { errors, trace })
}
