//! File formats: network JSON, dataset CSV, scenario JSON and simulator
//! config JSON.
//!
//! Network file layout:
//!
//! ```json
//! {"topology":[2,3,2], "activations":["sigmoid","linear"], "bias_input":1.0,
//!  "weights":[[[w,w,b],[w,w,b],[w,w,b]], [[w,w,w,b],[w,w,w,b]]]}
//! ```
//!
//! One activation per weight matrix; every hidden entry must agree. Floats
//! are written in shortest round-trip form, so loading reproduces every bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ann::{ActivationKind, Network, Topology, WeightMatrix};
use crate::error::{Error, Result};
use crate::sim::{Obstacle, SimConfig, World};
use crate::trainer::{Dataset, Pattern};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    topology: Vec<usize>,
    activations: Vec<String>,
    bias_input: f64,
    weights: Vec<Vec<Vec<f64>>>,
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        let n = net.weights().len();
        Self {
            topology: net.topology().layer_sizes().to_vec(),
            activations: (0..n).map(|l| net.activation_for(l).name().to_string()).collect(),
            bias_input: net.bias_input,
            weights: net.weights().iter().map(WeightMatrix::to_rows).collect(),
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(f: NetworkFile) -> Result<Self> {
        let topology = Topology::new(f.topology)?;
        let acts = f.activations.iter().map(|a| ActivationKind::from_name(a)).collect::<Result<Vec<_>>>()?;
        if acts.len() != topology.transitions() {
            return Err(Error::Shape(format!(
                "{} activations for {} layer transitions",
                acts.len(),
                topology.transitions()
            )));
        }
        let (output, hidden) = acts.split_last().expect("at least one transition");
        let hidden_activation = hidden.first().copied().unwrap_or(ActivationKind::Sigmoid);
        if hidden.iter().any(|a| *a != hidden_activation) {
            return Err(Error::Config("all hidden layers must share one activation".into()));
        }
        let weights = f.weights.iter().map(|m| WeightMatrix::from_rows(m)).collect::<Result<Vec<_>>>()?;
        Network::new(topology, weights, hidden_activation, *output, f.bias_input)
    }
}

pub fn network_to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&NetworkFile::from(net)).expect("network serializes")
}

pub fn network_from_json(text: &str) -> Result<Network> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::malformed("<network json>", e))?;
    Network::try_from(file)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, network_to_json(net) + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    network_from_json(&text).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Malformed { reason, .. } => Error::malformed(path, reason),
        Error::Io { .. } => e,
        other => Error::malformed(path, other),
    }
}

/// Parses a dataset CSV whose header names `in0, in1, ...` then
/// `out0, out1, ...`.
pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::malformed("<dataset csv>", e))?.clone();
    let n_in = headers.iter().take_while(|h| h.starts_with("in")).count();
    let n_out = headers.len() - n_in;
    let well_named = headers.iter().take(n_in).enumerate().all(|(i, h)| h == format!("in{i}"))
        && headers.iter().skip(n_in).enumerate().all(|(i, h)| h == format!("out{i}"));
    if n_in == 0 || n_out == 0 || !well_named {
        return Err(Error::malformed(
            "<dataset csv>",
            format!("header must be in0..inN,out0..outM, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut patterns = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::malformed("<dataset csv>", e))?;
        let values = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::malformed("<dataset csv>", format!("row {}: {e}", line + 1)))?;
        let (input, desired) = values.split_at(n_in);
        patterns.push(Pattern::new(input.to_vec(), desired.to_vec()));
    }
    Dataset::new(patterns)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dataset_from_csv(&text).map_err(|e| with_path(e, path))
}

pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..data.input_width())
        .map(|i| format!("in{i}"))
        .chain((0..data.output_width()).map(|i| format!("out{i}")))
        .collect();
    w.write_record(&header).expect("in-memory write");
    for p in data.patterns() {
        w.write_record(p.input.iter().chain(&p.desired).map(f64::to_string)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleFile {
    c: [f64; 2],
    r: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    start: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heading: Option<f64>,
    goal: [f64; 2],
    #[serde(default)]
    obstacles: Vec<ObstacleFile>,
}

/// Parses `{"start":[x,y], "goal":[x,y], "obstacles":[{"c":[x,y],"r":r}]}`;
/// an optional `"heading"` overrides the default bearing-to-goal start heading.
pub fn world_from_json(text: &str) -> Result<World> {
    let f: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::malformed("<scenario json>", e))?;
    let obstacles = f.obstacles.iter().map(|o| Obstacle::new(o.c[0], o.c[1], o.r)).collect::<Result<Vec<_>>>()?;
    let world = World::new(obstacles, (f.start[0], f.start[1]), f.heading, (f.goal[0], f.goal[1]));
    Ok(world)
}

pub fn world_to_json(world: &World) -> String {
    let f = ScenarioFile {
        start: [world.start.x, world.start.y],
        heading: Some(world.start.heading),
        goal: [world.goal.0, world.goal.1],
        obstacles: world.obstacles.iter().map(|o| ObstacleFile { c: [o.cx, o.cy], r: o.radius }).collect(),
    };
    serde_json::to_string(&f).expect("scenario serializes")
}

pub fn load_world(path: impl AsRef<Path>) -> Result<World> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    world_from_json(&text).map_err(|e| with_path(e, path))
}

/// Simulator config JSON; missing fields take their defaults.
pub fn sim_config_from_json(text: &str) -> Result<SimConfig> {
    let cfg: SimConfig = serde_json::from_str(text).map_err(|e| Error::malformed("<config json>", e))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sim_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    sim_config_from_json(&text).map_err(|e| with_path(e, path))
}
