//! Momentum back-propagation for small feed-forward networks, and a 2D rover
//! simulator in which a trained 2-3-2 network steers around obstacles
//! towards a goal.
//!
//! With the default `parallel` feature, gradient checks and batches of
//! simulations run on the rayon pool; training itself is always sequential
//! because each update depends on the previous one.

pub mod ann;
pub mod demo;
pub mod error;
pub mod fixtures;
pub mod persist;
pub mod sim;
pub mod trainer;

pub use ann::{
    backprop_step, forward, loss, neuron_net_input, output_errors, sigmoid, update_hidden_weights,
    update_output_weights, ActivationKind, DeltaState, ErrorVector, ForwardTrace, Network, StepConfig,
    StepOutcome, Topology, UpdateMode, WeightMatrix,
};
pub use error::{Error, Result};
pub use persist::{load_dataset, load_network, load_sim_config, load_world, save_network};
pub use sim::{
    check_collision, export_trajectory_csv, export_trajectory_svg, motor_from_network, sense, simulate,
    step_kinematics, MotorCommand, Obstacle, Outcome, Pose, SensorReading, SimConfig, Trajectory, World,
};
pub use trainer::{
    gradient_check, random_network, train, train_epoch, Dataset, EpochReport, Pattern, TrainingConfig,
    TrainingResult,
};
