//! Epoch-driven training with the per-pattern skip rule, gradient checking
//! and random initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ann::{
    backprop_step, forward, output_errors, DeltaState, Network, StepConfig, Topology, UpdateMode, WeightMatrix,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub input: Vec<f64>,
    pub desired: Vec<f64>,
}

impl Pattern {
    pub fn new(input: Vec<f64>, desired: Vec<f64>) -> Self {
        Self { input, desired }
    }
}

/// Non-empty list of patterns sharing the same input and output widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    patterns: Vec<Pattern>,
}

impl Dataset {
    pub fn new(patterns: Vec<Pattern>) -> Result<Self> {
        let first = patterns.first().ok_or_else(|| Error::Shape("dataset is empty".into()))?;
        let (ni, no) = (first.input.len(), first.desired.len());
        if ni == 0 || no == 0 {
            return Err(Error::Shape("patterns need at least one input and one output".into()));
        }
        for (i, p) in patterns.iter().enumerate() {
            if p.input.len() != ni || p.desired.len() != no {
                return Err(Error::Shape(format!("pattern {i} has {}→{} values, expected {ni}→{no}", p.input.len(), p.desired.len())));
            }
            if p.input.iter().chain(&p.desired).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("pattern {i}")));
            }
        }
        Ok(Self { patterns })
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn input_width(&self) -> usize {
        self.patterns[0].input.len()
    }

    pub fn output_width(&self) -> usize {
        self.patterns[0].desired.len()
    }

    fn check_against(&self, net: &Network) -> Result<()> {
        let t = net.topology();
        if self.input_width() != t.inputs() || self.output_width() != t.outputs() {
            return Err(Error::Shape(format!(
                "dataset is {}→{}, network is {}→{}",
                self.input_width(),
                self.output_width(),
                t.inputs(),
                t.outputs()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub bias_input: f64,
    /// Largest tolerated absolute output error per pattern.
    pub error_threshold: f64,
    pub max_epochs: usize,
    pub mode: UpdateMode,
    /// Keep a weight snapshot in every epoch report.
    pub trace: bool,
    /// Seed for [`random_network`] when no initial weights are given.
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.25,
            momentum: 0.0,
            bias_input: 1.0,
            error_threshold: 0.01,
            max_epochs: 10_000,
            mode: UpdateMode::SequentialPaper,
            trace: false,
            seed: 42,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be finite and > 0");
        }
        if !(self.momentum.is_finite() && self.momentum >= 0.0) {
            return bad("momentum must be finite and >= 0");
        }
        if !self.bias_input.is_finite() {
            return bad("bias input must be finite");
        }
        if !(self.error_threshold.is_finite() && self.error_threshold > 0.0) {
            return bad("error threshold must be finite and > 0");
        }
        Ok(())
    }

    fn step(&self) -> StepConfig {
        StepConfig { learning_rate: self.learning_rate, momentum: self.momentum, mode: self.mode }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch_index: usize,
    /// Max-abs output error of each pattern, measured after the sweep.
    pub per_pattern_max_abs_error: Vec<f64>,
    pub epoch_max_abs_error: f64,
    pub weights_snapshot: Option<Vec<WeightMatrix>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingResult {
    pub final_network: Network,
    pub reports: Vec<EpochReport>,
    pub converged: bool,
    pub epochs_run: usize,
    /// Max-abs error over the dataset before the first epoch.
    pub initial_max_abs_error: f64,
}

impl TrainingResult {
    pub fn final_max_abs_error(&self) -> f64 {
        self.reports.last().map_or(self.initial_max_abs_error, |r| r.epoch_max_abs_error)
    }
}

/// Max-abs output error of every pattern under `net`.
pub fn pattern_errors(net: &Network, data: &Dataset) -> Result<Vec<f64>> {
    data.patterns()
        .iter()
        .map(|p| {
            let tr = forward(net, &p.input)?;
            Ok(output_errors(&p.desired, tr.output_out())?.max_abs())
        })
        .collect()
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, &v| m.max(v))
}

/// One sweep over `data` in order. A pattern whose max-abs error is already
/// within the threshold is skipped; otherwise one back-propagation step runs.
/// Errors are re-measured for every pattern once the sweep is done.
pub fn train_epoch(
    net: &mut Network,
    data: &Dataset,
    cfg: &TrainingConfig,
    delta: &mut DeltaState,
    epoch_index: usize,
) -> Result<EpochReport> {
    data.check_against(net)?;
    let step = cfg.step();
    for p in data.patterns() {
        let tr = forward(net, &p.input)?;
        if output_errors(&p.desired, tr.output_out())?.max_abs() > cfg.error_threshold {
            backprop_step(net, &p.input, &p.desired, &step, delta)?;
        }
    }
    let per_pattern = pattern_errors(net, data)?;
    Ok(EpochReport {
        epoch_index,
        epoch_max_abs_error: max_of(&per_pattern),
        per_pattern_max_abs_error: per_pattern,
        weights_snapshot: cfg.trace.then(|| net.weights().to_vec()),
    })
}

/// Repeats [`train_epoch`] until every pattern is within the threshold or
/// `max_epochs` sweeps have run. Running out of epochs is reported through
/// `converged`, not as an error.
///
/// `cfg.bias_input` overrides the network's own bias input.
pub fn train(net: &Network, data: &Dataset, cfg: &TrainingConfig) -> Result<TrainingResult> {
    train_with(net, data, cfg, |_| {})
}

/// Like [`train`], calling `on_epoch` after each sweep.
pub fn train_with(
    net: &Network,
    data: &Dataset,
    cfg: &TrainingConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainingResult> {
    cfg.validate()?;
    data.check_against(net)?;
    let mut net = net.clone();
    net.bias_input = cfg.bias_input;
    let mut delta = DeltaState::zeros_like(&net);

    let initial = max_of(&pattern_errors(&net, data)?);
    let mut converged = initial <= cfg.error_threshold;
    let mut reports = Vec::new();
    while !converged && reports.len() < cfg.max_epochs {
        let report = train_epoch(&mut net, data, cfg, &mut delta, reports.len())?;
        converged = report.epoch_max_abs_error <= cfg.error_threshold;
        on_epoch(&report);
        reports.push(report);
    }
    Ok(TrainingResult {
        final_network: net,
        epochs_run: reports.len(),
        reports,
        converged,
        initial_max_abs_error: initial,
    })
}

/// Network with every weight drawn uniformly from `[0, 1)`.
pub fn random_network(topology: Topology, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::zeros(topology);
    for values in net.weights_mut() {
        values.iter_mut().for_each(|v| *v = rng.gen::<f64>());
    }
    net
}

/// Position of a weight inside a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightIndex {
    pub matrix: usize,
    pub row: usize,
    pub col: usize,
}

impl std::fmt::Display for WeightIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "W{}[{}][{}]", self.matrix, self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub max_relative_deviation: f64,
    /// Weight where the deviation peaks.
    pub worst: WeightIndex,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

pub const DEFAULT_GRADIENT_STEP: f64 = 1e-5;

fn flat_index(net: &Network, mut flat: usize) -> WeightIndex {
    for (m, w) in net.weights().iter().enumerate() {
        let n = w.rows() * w.cols();
        if flat < n {
            return WeightIndex { matrix: m, row: flat / w.cols(), col: flat % w.cols() };
        }
        flat -= n;
    }
    unreachable!("flat index within weight count")
}

fn set_flat(net: &mut Network, mut flat: usize, value: f64) {
    for values in net.weights_mut() {
        if flat < values.len() {
            values[flat] = value;
            return;
        }
        flat -= values.len();
    }
}

/// Analytic update per weight with η = 1, α = 0 and simultaneous ordering,
/// i.e. `-∂L/∂w` for `L = ½Σ(desired - actual)²`.
pub fn analytic_gradient(net: &Network, pattern: &Pattern) -> Result<Vec<f64>> {
    let mut scratch = net.clone();
    let mut delta = DeltaState::zeros_like(net);
    let cfg = StepConfig { learning_rate: 1.0, momentum: 0.0, mode: UpdateMode::Simultaneous };
    backprop_step(&mut scratch, &pattern.input, &pattern.desired, &cfg, &mut delta)?;
    Ok(delta.deltas().iter().flat_map(|d| d.values().iter().copied()).collect())
}

fn numeric_component(net: &Network, pattern: &Pattern, base: &[f64], flat: usize, h: f64) -> Result<f64> {
    let mut probe = net.clone();
    let eval = |probe: &mut Network, v: f64| -> Result<f64> {
        set_flat(probe, flat, v);
        let tr = forward(probe, &pattern.input)?;
        let l = crate::ann::loss(&pattern.desired, tr.output_out())?;
        if l.is_finite() {
            Ok(l)
        } else {
            Err(Error::NonFinite("loss under perturbation".into()))
        }
    };
    let plus = eval(&mut probe, base[flat] + h)?;
    let minus = eval(&mut probe, base[flat] - h)?;
    Ok(-(plus - minus) / (2.0 * h))
}

/// Central-difference estimate of `-∂L/∂w` for every weight, one weight at a time.
pub fn numeric_gradient_sequential(net: &Network, pattern: &Pattern, h: f64) -> Result<Vec<f64>> {
    let base: Vec<f64> = net.weights().iter().flat_map(|w| w.values().iter().copied()).collect();
    (0..base.len()).map(|i| numeric_component(net, pattern, &base, i, h)).collect()
}

/// Same as [`numeric_gradient_sequential`], with the perturbations spread over
/// the rayon pool. Output order is by weight index.
#[cfg(feature = "parallel")]
pub fn numeric_gradient_parallel(net: &Network, pattern: &Pattern, h: f64) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let base: Vec<f64> = net.weights().iter().flat_map(|w| w.values().iter().copied()).collect();
    (0..base.len()).into_par_iter().map(|i| numeric_component(net, pattern, &base, i, h)).collect()
}

pub fn numeric_gradient(net: &Network, pattern: &Pattern, h: f64) -> Result<Vec<f64>> {
    #[cfg(feature = "parallel")]
    {
        numeric_gradient_parallel(net, pattern, h)
    }
    #[cfg(not(feature = "parallel"))]
    {
        numeric_gradient_sequential(net, pattern, h)
    }
}

/// Components where both gradients are this small count as exact agreement;
/// central differences leave round-off of roughly this size on a zero gradient.
pub const GRADIENT_ZERO_FLOOR: f64 = 1e-10;

fn compare(net: &Network, analytic: Vec<f64>, numeric: Vec<f64>) -> GradientReport {
    let mut worst = 0;
    let mut max_dev = 0.0;
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        if a.abs() <= GRADIENT_ZERO_FLOOR && n.abs() <= GRADIENT_ZERO_FLOOR {
            continue;
        }
        let denom = a.abs().max(n.abs()).max(1e-12);
        let dev = (a - n).abs() / denom;
        if dev > max_dev {
            max_dev = dev;
            worst = i;
        }
    }
    GradientReport { max_relative_deviation: max_dev, worst: flat_index(net, worst), analytic, numeric }
}

fn check_gradient_inputs(net: &Network, pattern: &Pattern, h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be > 0, got {h}")));
    }
    Dataset::new(vec![pattern.clone()])?.check_against(net)
}

/// Compares the analytic updates against central differences of the loss.
pub fn gradient_check_report(net: &Network, pattern: &Pattern, h: f64) -> Result<GradientReport> {
    check_gradient_inputs(net, pattern, h)?;
    let analytic = analytic_gradient(net, pattern)?;
    let numeric = numeric_gradient(net, pattern, h)?;
    Ok(compare(net, analytic, numeric))
}

/// Sequential variant of [`gradient_check_report`], independent of the
/// `parallel` feature.
pub fn gradient_check_report_sequential(net: &Network, pattern: &Pattern, h: f64) -> Result<GradientReport> {
    check_gradient_inputs(net, pattern, h)?;
    let analytic = analytic_gradient(net, pattern)?;
    let numeric = numeric_gradient_sequential(net, pattern, h)?;
    Ok(compare(net, analytic, numeric))
}

/// Maximum relative deviation between analytic and finite-difference
/// gradients, with the denominator guarded by `max(|a|, |n|, 1e-12)` and
/// components below [`GRADIENT_ZERO_FLOOR`] on both sides ignored.
pub fn gradient_check(net: &Network, pattern: &Pattern, h: f64) -> Result<f64> {
    gradient_check_report(net, pattern, h).map(|r| r.max_relative_deviation)
}

/// One seeded random trial: a network with weights in `[0, 1)`, inputs and
/// desired outputs drawn uniformly from `[-1, 1]`.
pub fn random_trial(topology: &Topology, seed: u64) -> (Network, Pattern) {
    let net = random_network(topology.clone(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let input = (0..topology.inputs()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let desired = (0..topology.outputs()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    (net, Pattern::new(input, desired))
}

/// Runs `trials` seeded gradient checks (seeds `seed, seed+1, ...`) and
/// returns the reports in trial order.
pub fn gradient_check_trials(topology: &Topology, seed: u64, trials: usize, h: f64) -> Result<Vec<GradientReport>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let (net, p) = random_trial(topology, seed.wrapping_add(t as u64));
                gradient_check_report_sequential(&net, &p, h)
            })
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        gradient_check_trials_sequential(topology, seed, trials, h)
    }
}

pub fn gradient_check_trials_sequential(
    topology: &Topology,
    seed: u64,
    trials: usize,
    h: f64,
) -> Result<Vec<GradientReport>> {
    (0..trials)
        .map(|t| {
            let (net, p) = random_trial(topology, seed.wrapping_add(t as u64));
            gradient_check_report_sequential(&net, &p, h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{avoidance_dataset, paper_dataset, paper_network};

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![]).is_err());
        let bad = vec![Pattern::new(vec![0.0, 0.0], vec![1.0, 1.0]), Pattern::new(vec![0.0], vec![1.0, 1.0])];
        assert!(matches!(Dataset::new(bad), Err(Error::Shape(_))));
    }

    #[test]
    fn config_validation() {
        let cfg = TrainingConfig { learning_rate: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainingConfig { error_threshold: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(TrainingConfig::default().validate().is_ok());
    }

    #[test]
    fn one_epoch_reproduces_worked_example() {
        let mut net = paper_network();
        let mut delta = DeltaState::zeros_like(&net);
        train_epoch(&mut net, &paper_dataset(), &TrainingConfig::default(), &mut delta, 0).unwrap();
        let out = &net.weights()[1];
        assert!((out.get(0, 0) - 0.13227).abs() < 5e-3);
        assert!((out.get(1, 0) - 0.83176).abs() < 5e-3);
        assert!((out.get(0, 1) - 0.05346).abs() < 5e-3);
        assert_eq!(net.weights()[0].get(0, 0), 0.17);
    }

    #[test]
    fn satisfied_dataset_is_untouched() {
        let net = paper_network();
        let out = net.forward(&[0.3, 0.6]).unwrap().output_out().to_vec();
        let data = Dataset::new(vec![Pattern::new(vec![0.3, 0.6], out)]).unwrap();
        let mut trained = net.clone();
        let mut delta = DeltaState::zeros_like(&net);
        let cfg = TrainingConfig { momentum: 0.9, ..Default::default() };
        let report = train_epoch(&mut trained, &data, &cfg, &mut delta, 0).unwrap();
        assert_eq!(trained, net);
        assert_eq!(report.epoch_max_abs_error, 0.0);
        let r = train(&net, &data, &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.epochs_run, 0);
    }

    #[test]
    fn zero_epochs_reports_initial_state() {
        let cfg = TrainingConfig { max_epochs: 0, ..Default::default() };
        let r = train(&paper_network(), &paper_dataset(), &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.epochs_run, 0);
        assert!(r.reports.is_empty());
        assert!((r.initial_max_abs_error - 0.751668).abs() < 1e-6);
    }

    #[test]
    fn mismatched_dataset_rejected() {
        let data = Dataset::new(vec![Pattern::new(vec![0.0, 0.0, 0.0], vec![1.0, 1.0])]).unwrap();
        assert!(matches!(train(&paper_network(), &data, &TrainingConfig::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn trace_keeps_snapshots() {
        let cfg = TrainingConfig { trace: true, max_epochs: 3, ..Default::default() };
        let r = train(&paper_network(), &avoidance_dataset(), &cfg).unwrap();
        assert_eq!(r.reports.len(), 3);
        assert!(r.reports.iter().all(|rep| rep.weights_snapshot.is_some()));
        assert_eq!(r.reports[2].weights_snapshot.as_deref(), Some(r.final_network.weights()));
    }

    #[test]
    fn random_network_is_seeded_and_in_unit_interval() {
        let t = Topology::new(vec![2, 3, 2]).unwrap();
        let a = random_network(t.clone(), 7);
        assert_eq!(a, random_network(t.clone(), 7));
        assert_ne!(a, random_network(t, 8));
        assert!(a.weights().iter().flat_map(|w| w.values()).all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn gradient_check_zero_error_pattern() {
        let net = paper_network();
        let out = net.forward(&[0.5, -0.5]).unwrap().output_out().to_vec();
        let dev = gradient_check(&net, &Pattern::new(vec![0.5, -0.5], out), 1e-5).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn gradient_check_rejects_bad_step() {
        let p = Pattern::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert!(gradient_check(&paper_network(), &p, 0.0).is_err());
    }

    #[test]
    fn weight_index_display() {
        let net = paper_network();
        assert_eq!(flat_index(&net, 0).to_string(), "W0[0][0]");
        assert_eq!(flat_index(&net, 9).to_string(), "W1[0][0]");
        assert_eq!(flat_index(&net, 16).to_string(), "W1[1][3]");
    }
}
