//! Replays the hand-worked 2-3-2 training step and checks every printed
//! value against the published figures.

use std::fmt::Write as _;

use crate::ann::{backprop_step, DeltaState, StepConfig, UpdateMode};
use crate::error::Result;
use crate::fixtures::{paper_network, PAPER_DESIRED, PAPER_INPUT, PAPER_LEARNING_RATE};

/// Absolute tolerance against the published values, which were rounded to
/// three digits before being propagated.
pub const GOLDEN_TOLERANCE: f64 = 5e-3;

/// Published values for the worked step: (label, value).
pub const GOLDEN: [(&str, f64); 16] = [
    ("Input of h0", 0.1),
    ("Output of h0", 0.524),
    ("Input of h1", 0.21),
    ("Output of h1", 0.552),
    ("Input of h2", 0.69),
    ("Output of h2", 0.665),
    ("Input of O0", 0.83),
    ("Output of O0", 0.83),
    ("Input of O1", 1.74995),
    ("Output of O1", 1.74995),
    ("Error for O0", 0.17),
    ("Error for O1", -0.74994),
    ("W00(out)", 0.13227),
    ("W10(out)", 0.83176),
    ("W01(out)", 0.05346),
    ("W00(hid)", 0.17),
];

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub text: String,
    /// Every golden value reproduced within [`GOLDEN_TOLERANCE`].
    pub all_match: bool,
    /// Computed values, labelled as in [`GOLDEN`] plus the remaining weights.
    pub values: Vec<(String, f64)>,
}

impl DemoReport {
    pub fn value(&self, label: &str) -> Option<f64> {
        self.values.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }
}

pub fn run_paper_demo(mode: UpdateMode) -> Result<DemoReport> {
    let mut net = paper_network();
    let mut delta = DeltaState::zeros_like(&net);
    let cfg = StepConfig { learning_rate: PAPER_LEARNING_RATE, momentum: 0.0, mode };
    let step = backprop_step(&mut net, &PAPER_INPUT, &PAPER_DESIRED, &cfg, &mut delta)?;
    let tr = &step.trace;

    let mut values: Vec<(String, f64)> = Vec::new();
    for (j, (n, o)) in tr.hidden_net().iter().zip(tr.hidden_out()).enumerate() {
        values.push((format!("Input of h{j}"), *n));
        values.push((format!("Output of h{j}"), *o));
    }
    for (k, (n, o)) in tr.output_net().iter().zip(tr.output_out()).enumerate() {
        values.push((format!("Input of O{k}"), *n));
        values.push((format!("Output of O{k}"), *o));
    }
    for (k, e) in step.errors.values().iter().enumerate() {
        values.push((format!("Error for O{k}"), *e));
    }
    for (suffix, w) in [("out", &net.weights()[1]), ("hid", &net.weights()[0])] {
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                values.push((format!("W{i}{j}({suffix})"), w.get(i, j)));
            }
        }
    }

    let mut text = String::new();
    let _ = writeln!(text, "Worked back-propagation step: input (0, 0), desired (1, 1), learning rate 0.25, bias +1");
    let _ = writeln!(text, "update mode: {}", match mode {
        UpdateMode::SequentialPaper => "sequential-paper",
        UpdateMode::Simultaneous => "simultaneous",
    });
    let mut section = "";
    for (label, v) in &values {
        let heading = if label.starts_with("Input") || label.starts_with("Output") {
            "Forward pass"
        } else if label.starts_with("Error") {
            "Errors"
        } else if label.ends_with("(out)") {
            "Output weights after update"
        } else {
            "Hidden weights after update"
        };
        if heading != section {
            let _ = writeln!(text, "-- {heading}");
            section = heading;
        }
        let _ = writeln!(text, "{label} = {v:.6}");
    }

    let mut all_match = true;
    let _ = writeln!(text, "-- Check against published values (tolerance {GOLDEN_TOLERANCE})");
    for (label, expected) in GOLDEN {
        let actual = values.iter().find(|(l, _)| l == label).map(|(_, v)| *v).unwrap_or(f64::NAN);
        let ok = (actual - expected).abs() <= GOLDEN_TOLERANCE;
        all_match &= ok;
        if ok {
            let _ = writeln!(text, "ok       {label}: expected {expected}, actual {actual:.6}");
        } else {
            let _ = writeln!(text, "MISMATCH {label}: expected {expected}, actual {actual:.6}");
        }
    }
    let _ = writeln!(text, "{}", if all_match { "all values match" } else { "values differ" });
    Ok(DemoReport { text, all_match, values })
}
