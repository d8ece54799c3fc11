//! Built-in networks, datasets and worlds: the 2-3-2 worked example, the
//! four-pattern avoidance dataset and the A→B obstacle scenario.

use crate::ann::{ActivationKind, Network, Topology, WeightMatrix};
use crate::sim::{Obstacle, World};
use crate::error::Result;
use crate::trainer::{train, Dataset, Pattern, TrainingConfig};

/// Input→hidden weights of the worked example; columns are x, y, bias.
pub const PAPER_HIDDEN_WEIGHTS: [[f64; 3]; 3] = [[0.17, 0.33, 0.1], [0.3, 0.71, 0.21], [0.15, 0.43, 0.69]];

/// Hidden→output weights; columns are h0, h1, h2, bias.
pub const PAPER_OUTPUT_WEIGHTS: [[f64; 4]; 2] = [[0.11, 0.03, 0.52, 0.41], [0.93, 0.14, 0.79, 0.66]];

pub const PAPER_INPUT: [f64; 2] = [0.0, 0.0];
pub const PAPER_DESIRED: [f64; 2] = [1.0, 1.0];
pub const PAPER_LEARNING_RATE: f64 = 0.25;

/// The 2-3-2 network with its hand-picked initial weights.
pub fn paper_network() -> Network {
    let hidden = WeightMatrix::from_rows(&PAPER_HIDDEN_WEIGHTS.map(|r| r.to_vec())).expect("static shape");
    let output = WeightMatrix::from_rows(&PAPER_OUTPUT_WEIGHTS.map(|r| r.to_vec())).expect("static shape");
    Network::new(
        Topology::new(vec![2, 3, 2]).expect("static topology"),
        vec![hidden, output],
        ActivationKind::Sigmoid,
        ActivationKind::Linear,
        1.0,
    )
    .expect("static network")
}

/// Single pattern (0,0) → (1,1).
pub fn paper_dataset() -> Dataset {
    Dataset::new(vec![Pattern::new(PAPER_INPUT.to_vec(), PAPER_DESIRED.to_vec())]).expect("static dataset")
}

/// Sensor readings (left, right) → wheel speeds (left, right), as fractions of
/// the top speed. Both sensors blocked means crawl while veering left, so a
/// head-on obstacle (equal readings) still produces a turn.
pub const AVOIDANCE_PATTERNS: [([f64; 2], [f64; 2]); 4] = [
    ([0.0, 0.0], [1.0, 1.0]),
    ([1.0, 0.0], [1.0, 0.2]),
    ([0.0, 1.0], [0.2, 1.0]),
    ([1.0, 1.0], [0.2, 0.6]),
];

/// Same content as `data/avoidance.csv`.
pub const AVOIDANCE_CSV: &str = include_str!("../data/avoidance.csv");

pub fn avoidance_dataset() -> Dataset {
    Dataset::new(AVOIDANCE_PATTERNS.iter().map(|(i, o)| Pattern::new(i.to_vec(), o.to_vec())).collect())
        .expect("static dataset")
}

/// Start (0,0), goal (11.73,0), one obstacle of radius 2 at (5.87,0).
pub fn paper_world() -> World {
    World::new(vec![Obstacle::new(5.87, 0.0, 2.0).expect("positive radius")], (0.0, 0.0), None, (11.73, 0.0))
}

pub const PAPER_SCENARIO_JSON: &str = include_str!("../data/paper_scenario.json");

/// Momentum used for the avoidance controller.
pub const AVOIDANCE_MOMENTUM: f64 = 0.9;

/// The worked-example network trained on [`avoidance_dataset`] with
/// η = 0.25, α = 0.9 and default thresholds.
pub fn trained_avoidance_network() -> Result<Network> {
    let cfg = TrainingConfig { momentum: AVOIDANCE_MOMENTUM, ..Default::default() };
    Ok(train(&paper_network(), &avoidance_dataset(), &cfg)?.final_network)
}
