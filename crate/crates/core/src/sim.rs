//! Deterministic 2D rover world: two ray sensors, a network mapping readings
//! to wheel speeds, differential-drive kinematics with a goal-bearing turn
//! term, and circular obstacles.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ann::{forward, Network};
use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    // rem_euclid can return exactly 2π for tiny negative inputs
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: wrap_angle(heading) }
    }

    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        (p.0 - self.x).hypot(p.1 - self.y)
    }

    pub fn bearing_to(&self, p: (f64, f64)) -> f64 {
        (p.1 - self.y).atan2(p.0 - self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(cx: f64, cy: f64, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::World(format!("obstacle at ({cx}, {cy}) needs a finite positive radius, got {radius}")));
        }
        Ok(Self { cx, cy, radius })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub obstacles: Vec<Obstacle>,
    pub start: Pose,
    pub goal: (f64, f64),
}

impl World {
    /// Builds a world; without an explicit heading the rover starts facing
    /// the goal.
    pub fn new(obstacles: Vec<Obstacle>, start: (f64, f64), heading: Option<f64>, goal: (f64, f64)) -> Self {
        let heading = heading.unwrap_or_else(|| (goal.1 - start.1).atan2(goal.0 - start.0));
        Self { obstacles, start: Pose::new(start.0, start.1, heading), goal }
    }

    /// Start and goal must both lie outside every obstacle inflated by the
    /// rover radius.
    pub fn validate(&self, cfg: &SimConfig) -> Result<()> {
        let coords = [self.start.x, self.start.y, self.start.heading, self.goal.0, self.goal.1];
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::World("start and goal must be finite".into()));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let clearance = o.radius + cfg.rover_radius;
            if (self.start.x - o.cx).hypot(self.start.y - o.cy) < clearance {
                return Err(Error::World(format!("start lies inside obstacle {i}")));
            }
            if (self.goal.0 - o.cx).hypot(self.goal.1 - o.cy) < clearance {
                return Err(Error::World(format!("goal lies inside obstacle {i}")));
            }
        }
        Ok(())
    }
}

/// Normalized proximity per sensor: 1 touching, 0 clear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub left: f64,
    pub right: f64,
}

/// Wheel speeds in world units per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorCommand {
    pub v_left: f64,
    pub v_right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub wheelbase: f64,
    pub v_max: f64,
    pub k_goal: f64,
    pub sense_range: f64,
    /// Left sensor at `heading + .0`, right sensor at `heading - .1`.
    pub sensor_angles: (f64, f64),
    pub rover_radius: f64,
    pub goal_tolerance: f64,
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            wheelbase: 0.5,
            v_max: 1.0,
            k_goal: 1.0,
            sense_range: 3.0,
            sensor_angles: (PI / 4.0, PI / 4.0),
            rover_radius: 0.1,
            goal_tolerance: 0.25,
            max_steps: 2000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("wheelbase", self.wheelbase),
            ("v_max", self.v_max),
            ("sense_range", self.sense_range),
            ("rover_radius", self.rover_radius),
            ("goal_tolerance", self.goal_tolerance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.k_goal.is_finite() && self.k_goal >= 0.0) {
            return Err(Error::Config(format!("k_goal must be finite and >= 0, got {}", self.k_goal)));
        }
        if !self.sensor_angles.0.is_finite() || !self.sensor_angles.1.is_finite() {
            return Err(Error::Config("sensor angles must be finite".into()));
        }
        if self.dt * self.v_max > self.rover_radius {
            return Err(Error::Config(format!(
                "dt * v_max = {} must not exceed rover_radius = {}",
                self.dt * self.v_max,
                self.rover_radius
            )));
        }
        Ok(())
    }
}

/// Distance along a unit ray from `origin` to the first crossing of a circle,
/// 0 when the origin is inside, `None` when the ray misses.
fn ray_circle_distance(origin: (f64, f64), dir: (f64, f64), center: (f64, f64), radius: f64) -> Option<f64> {
    let oc = (center.0 - origin.0, center.1 - origin.1);
    let inside = oc.0 * oc.0 + oc.1 * oc.1 - radius * radius;
    if inside <= 0.0 {
        return Some(0.0);
    }
    let along = oc.0 * dir.0 + oc.1 * dir.1;
    if along <= 0.0 {
        return None;
    }
    let across = oc.0 * dir.1 - oc.1 * dir.0;
    let half_chord_sq = radius * radius - across * across;
    if half_chord_sq < 0.0 {
        return None;
    }
    Some(along - half_chord_sq.sqrt())
}

fn ray_reading(pose: &Pose, angle: f64, world: &World, cfg: &SimConfig) -> f64 {
    let dir = (angle.cos(), angle.sin());
    let nearest = world
        .obstacles
        .iter()
        .filter_map(|o| ray_circle_distance((pose.x, pose.y), dir, (o.cx, o.cy), o.radius + cfg.rover_radius))
        .fold(f64::INFINITY, f64::min);
    if nearest >= cfg.sense_range {
        0.0
    } else {
        (1.0 - nearest / cfg.sense_range).clamp(0.0, 1.0)
    }
}

pub fn sense(pose: &Pose, world: &World, cfg: &SimConfig) -> SensorReading {
    SensorReading {
        left: ray_reading(pose, pose.heading + cfg.sensor_angles.0, world, cfg),
        right: ray_reading(pose, pose.heading - cfg.sensor_angles.1, world, cfg),
    }
}

/// Feeds `(left, right)` through the network and scales the two outputs to
/// wheel speeds clamped to `[0, v_max]`.
pub fn motor_from_network(net: &Network, s: &SensorReading, cfg: &SimConfig) -> Result<MotorCommand> {
    let t = net.topology();
    if t.inputs() != 2 || t.outputs() != 2 {
        return Err(Error::Shape(format!(
            "controller needs a 2-input 2-output network, got {:?}",
            t.layer_sizes()
        )));
    }
    let out = forward(net, &[s.left, s.right])?;
    let o = out.output_out();
    Ok(clamp_command(o[0], o[1], cfg))
}

/// Scales raw network outputs by `v_max` and clamps them.
pub fn clamp_command(out_left: f64, out_right: f64, cfg: &SimConfig) -> MotorCommand {
    let scale = |o: f64| {
        let v = o * cfg.v_max;
        if v.is_nan() {
            0.0
        } else {
            v.clamp(0.0, cfg.v_max)
        }
    };
    MotorCommand { v_left: scale(out_left), v_right: scale(out_right) }
}

/// One Euler step: the heading turns by the goal-bearing term plus the wheel
/// differential, then the rover moves along the new heading.
pub fn step_kinematics(pose: &Pose, cmd: &MotorCommand, goal: (f64, f64), cfg: &SimConfig) -> Pose {
    let v = 0.5 * (cmd.v_left + cmd.v_right);
    let omega = cfg.k_goal * wrap_angle(pose.bearing_to(goal) - pose.heading)
        + (cmd.v_right - cmd.v_left) / cfg.wheelbase;
    let heading = wrap_angle(pose.heading + omega * cfg.dt);
    Pose { x: pose.x + v * cfg.dt * heading.cos(), y: pose.y + v * cfg.dt * heading.sin(), heading }
}

/// Strict: touching an inflated obstacle boundary is not a collision.
pub fn check_collision(pose: &Pose, world: &World, cfg: &SimConfig) -> bool {
    world
        .obstacles
        .iter()
        .any(|o| (pose.x - o.cx).hypot(pose.y - o.cy) < o.radius + cfg.rover_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ReachedGoal,
    Collision,
    Timeout,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::ReachedGoal => "ReachedGoal",
            Outcome::Collision => "Collision",
            Outcome::Timeout => "Timeout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub pose: Pose,
    pub reading: SensorReading,
    pub command: MotorCommand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn final_pose(&self) -> Pose {
        self.steps.last().expect("trajectory has at least one step").pose
    }

    pub fn max_abs_y(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.pose.y.abs()))
    }
}

/// Runs the sense → command → move loop from `world.start`.
///
/// Every visited pose is recorded with the reading and command computed
/// there, so a run holds at most `max_steps + 1` entries. The run stops at
/// the first pose within `goal_tolerance` of the goal, at the first colliding
/// pose, or after `max_steps` moves.
pub fn simulate(net: &Network, world: &World, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    world.validate(cfg)?;
    let mut pose = world.start;
    let mut steps = Vec::new();
    loop {
        let reading = sense(&pose, world, cfg);
        let command = motor_from_network(net, &reading, cfg)?;
        steps.push(Step { pose, reading, command });
        let outcome = if pose.distance_to(world.goal) <= cfg.goal_tolerance {
            Some(Outcome::ReachedGoal)
        } else if check_collision(&pose, world, cfg) {
            Some(Outcome::Collision)
        } else if steps.len() > cfg.max_steps {
            Some(Outcome::Timeout)
        } else {
            None
        };
        if let Some(outcome) = outcome {
            return Ok(Trajectory { steps, outcome });
        }
        pose = step_kinematics(&pose, &command, world.goal, cfg);
    }
}

/// Independent runs of the same network and config over several worlds,
/// spread across the rayon pool when the `parallel` feature is on.
pub fn simulate_many(net: &Network, worlds: &[World], cfg: &SimConfig) -> Result<Vec<Trajectory>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        worlds.par_iter().map(|w| simulate(net, w, cfg)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        simulate_many_sequential(net, worlds, cfg)
    }
}

pub fn simulate_many_sequential(net: &Network, worlds: &[World], cfg: &SimConfig) -> Result<Vec<Trajectory>> {
    worlds.iter().map(|w| simulate(net, w, cfg)).collect()
}

pub fn trajectory_to_csv(t: &Trajectory) -> String {
    let mut out = String::from("step,x,y,heading,sense_left,sense_right,v_left,v_right\n");
    for (i, s) in t.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            s.pose.x, s.pose.y, s.pose.heading, s.reading.left, s.reading.right, s.command.v_left, s.command.v_right
        );
    }
    out
}

/// SVG in world coordinates (y up): obstacles as circles, the goal as a
/// cross and the path as a single polyline, inside a viewBox padded by 10%.
pub fn trajectory_to_svg(t: &Trajectory, world: &World) -> String {
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |x: f64, y: f64| {
        min = (min.0.min(x), min.1.min(y));
        max = (max.0.max(x), max.1.max(y));
    };
    for s in &t.steps {
        grow(s.pose.x, s.pose.y);
    }
    for o in &world.obstacles {
        grow(o.cx - o.radius, o.cy - o.radius);
        grow(o.cx + o.radius, o.cy + o.radius);
    }
    grow(world.goal.0, world.goal.1);
    grow(world.start.x, world.start.y);

    let w = (max.0 - min.0).max(1e-6);
    let h = (max.1 - min.1).max(1e-6);
    let (px, py) = (0.1 * w, 0.1 * h);
    let stroke = 0.005 * w.max(h);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
        min.0 - px,
        -(max.1 + py),
        w + 2.0 * px,
        h + 2.0 * py,
        (800.0 * (h + 2.0 * py) / (w + 2.0 * px)).round().max(1.0)
    );
    svg.push_str("<g transform=\"scale(1,-1)\">\n");
    for o in &world.obstacles {
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{}" fill="#bbbbbb" stroke="#555555" stroke-width="{stroke}"/>"##,
            o.cx, o.cy, o.radius
        );
    }
    let arm = 0.02 * w.max(h);
    let (gx, gy) = world.goal;
    let _ = writeln!(
        svg,
        r##"<path d="M {} {} L {} {} M {} {} L {} {}" stroke="#cc0000" stroke-width="{stroke}"/>"##,
        gx - arm,
        gy - arm,
        gx + arm,
        gy + arm,
        gx - arm,
        gy + arm,
        gx + arm,
        gy - arm
    );
    let points: Vec<String> = t.steps.iter().map(|s| format!("{},{}", s.pose.x, s.pose.y)).collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#0044cc" stroke-width="{stroke}"/>"##,
        points.join(" ")
    );
    svg.push_str("</g>\n</svg>\n");
    svg
}

pub fn export_trajectory_csv(t: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if t.steps.is_empty() {
        return Err(Error::Config("cannot export an empty trajectory".into()));
    }
    fs::write(path, trajectory_to_csv(t)).map_err(|e| Error::io(path, e))
}

pub fn export_trajectory_svg(t: &Trajectory, world: &World, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if t.steps.is_empty() {
        return Err(Error::Config("cannot export an empty trajectory".into()));
    }
    fs::write(path, trajectory_to_svg(t, world)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::Topology;

    fn empty_world() -> World {
        World::new(vec![], (0.0, 0.0), None, (10.0, 0.0))
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
        let tiny = wrap_angle(-1e-300);
        assert!(tiny > -PI && tiny <= PI);
    }

    #[test]
    fn empty_world_reads_nothing() {
        let r = sense(&Pose::new(0.0, 0.0, 0.3), &empty_world(), &SimConfig::default());
        assert_eq!(r, SensorReading { left: 0.0, right: 0.0 });
    }

    #[test]
    fn reading_at_range_boundary_is_zero() {
        let cfg = SimConfig::default();
        // nearest inflated surface point on the left ray at exactly sense_range
        let d = cfg.sense_range + 0.5 + cfg.rover_radius;
        let a = PI / 4.0;
        let w = World::new(vec![Obstacle::new(d * a.cos(), d * a.sin(), 0.5).unwrap()], (0.0, 0.0), Some(0.0), (-10.0, 0.0));
        let r = sense(&Pose::new(0.0, 0.0, 0.0), &w, &cfg);
        assert_eq!(r.left, 0.0);
        assert_eq!(r.right, 0.0);
    }

    #[test]
    fn inside_inflated_obstacle_reads_one() {
        let cfg = SimConfig::default();
        let w = World::new(vec![Obstacle::new(0.5, 0.0, 0.45).unwrap()], (-5.0, 0.0), None, (-10.0, 0.0));
        let r = sense(&Pose::new(0.0, 0.0, 0.0), &w, &cfg);
        assert_eq!(r, SensorReading { left: 1.0, right: 1.0 });
    }

    #[test]
    fn clamp_examples() {
        let cfg = SimConfig::default();
        assert_eq!(clamp_command(1.5, -0.2, &cfg), MotorCommand { v_left: 1.0, v_right: 0.0 });
        let cfg2 = SimConfig { v_max: 0.5, dt: 0.1, ..Default::default() };
        assert_eq!(clamp_command(0.5, 0.5, &cfg2), MotorCommand { v_left: 0.25, v_right: 0.25 });
    }

    #[test]
    fn controller_topology_checked() {
        let net = Network::zeros(Topology::new(vec![3, 2]).unwrap());
        let r = motor_from_network(&net, &SensorReading { left: 0.0, right: 0.0 }, &SimConfig::default());
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn straight_line_step() {
        let cfg = SimConfig::default();
        let p = step_kinematics(&Pose::new(0.0, 0.0, 0.0), &MotorCommand { v_left: 0.8, v_right: 0.8 }, (10.0, 0.0), &cfg);
        assert_eq!(p.heading, 0.0);
        assert!((p.x - 0.08).abs() < 1e-15);
        assert_eq!(p.y, 0.0);
    }

    #[test]
    fn differential_turns_counter_clockwise() {
        let cfg = SimConfig { k_goal: 0.0, ..Default::default() };
        let p = step_kinematics(&Pose::new(0.0, 0.0, 0.0), &MotorCommand { v_left: 0.2, v_right: 0.6 }, (10.0, 0.0), &cfg);
        assert!(p.heading > 0.0);
    }

    #[test]
    fn quarter_turn_step_example() {
        let cfg = SimConfig::default();
        let p = step_kinematics(&Pose::new(0.0, 0.0, 0.0), &MotorCommand { v_left: 1.0, v_right: 1.0 }, (0.0, 10.0), &cfg);
        assert!((p.heading - 0.157080).abs() < 1e-6);
        assert!((p.x - 0.098769).abs() < 1e-6);
        assert!((p.y - 0.015643).abs() < 1e-6);
    }

    #[test]
    fn collision_boundary() {
        let cfg = SimConfig::default();
        let w = World::new(vec![Obstacle::new(3.0, 0.0, 1.0).unwrap()], (0.0, 0.0), None, (10.0, 0.0));
        assert!(check_collision(&Pose::new(3.0, 0.0, 0.0), &w, &cfg));
        assert!(!check_collision(&Pose::new(3.0, 0.0, 0.0), &empty_world(), &cfg));
        // exactly radius + rover_radius = 2.0 away
        let w2 = World::new(vec![Obstacle::new(0.0, 0.0, 1.5).unwrap()], (5.0, 0.0), None, (10.0, 0.0));
        let cfg2 = SimConfig { rover_radius: 0.5, dt: 0.1, v_max: 1.0, ..Default::default() };
        assert!(!check_collision(&Pose::new(0.0, 2.0, 0.0), &w2, &cfg2));
        assert!(check_collision(&Pose::new(0.0, 1.999, 0.0), &w2, &cfg2));
    }

    #[test]
    fn world_validation() {
        let cfg = SimConfig::default();
        let w = World::new(vec![Obstacle::new(0.0, 0.0, 1.0).unwrap()], (0.5, 0.0), None, (10.0, 0.0));
        assert!(w.validate(&cfg).is_err());
        let w = World::new(vec![Obstacle::new(10.0, 0.0, 1.0).unwrap()], (-5.0, 0.0), None, (10.0, 0.0));
        assert!(w.validate(&cfg).is_err());
        assert!(Obstacle::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig { dt: 0.2, ..Default::default() }.validate().is_err());
        assert!(SimConfig { wheelbase: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_network_times_out_in_place() {
        let net = Network::zeros(Topology::new(vec![2, 3, 2]).unwrap());
        let cfg = SimConfig { max_steps: 50, ..Default::default() };
        let world = World::new(vec![], (0.0, 0.0), Some(1.0), (5.0, 0.0));
        let t = simulate(&net, &world, &cfg).unwrap();
        assert_eq!(t.outcome, Outcome::Timeout);
        assert_eq!(t.steps.len(), 51);
        assert!(t.steps.iter().all(|s| s.pose.x == 0.0 && s.pose.y == 0.0));
        // heading is pulled towards the goal bearing
        assert!(t.final_pose().heading.abs() < 1.0);
    }

    #[test]
    fn csv_and_svg_shapes() {
        let net = Network::zeros(Topology::new(vec![2, 3, 2]).unwrap());
        let cfg = SimConfig { max_steps: 0, ..Default::default() };
        let t = simulate(&net, &empty_world(), &cfg).unwrap();
        assert_eq!(t.steps.len(), 1);
        let csv = trajectory_to_csv(&t);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("step,x,y,heading,sense_left,sense_right,v_left,v_right\n"));
        let svg = trajectory_to_svg(&t, &empty_world());
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
