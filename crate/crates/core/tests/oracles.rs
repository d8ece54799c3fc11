//! Implementation checked against independent straight-line oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rovernet::fixtures::{paper_network, trained_avoidance_network};
use rovernet::sim::{sense, Obstacle, Pose, SimConfig, World};
use rovernet::trainer::{random_network, train_epoch, Dataset, Pattern, TrainingConfig};
use rovernet::{backprop_step, DeltaState, Network, StepConfig, Topology, UpdateMode};

/// Plain nested-loop forward pass for a 2-3-2 sigmoid/linear network.
fn oracle_forward(w1: &[[f64; 3]; 3], w2: &[[f64; 4]; 2], x: [f64; 2]) -> ([f64; 3], [f64; 2]) {
    let mut h = [0.0; 3];
    for j in 0..3 {
        let s = x[0] * w1[j][0] + x[1] * w1[j][1] + 1.0 * w1[j][2];
        h[j] = 1.0 / (1.0 + (-s).exp());
    }
    let mut o = [0.0; 2];
    for k in 0..2 {
        o[k] = h[0] * w2[k][0] + h[1] * w2[k][1] + h[2] * w2[k][2] + 1.0 * w2[k][3];
    }
    (h, o)
}

fn split_232(net: &Network) -> ([[f64; 3]; 3], [[f64; 4]; 2]) {
    let mut w1 = [[0.0; 3]; 3];
    let mut w2 = [[0.0; 4]; 2];
    for (j, row) in w1.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            *v = net.weights()[0].get(j, i);
        }
    }
    for (k, row) in w2.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = net.weights()[1].get(k, j);
        }
    }
    (w1, w2)
}

fn topo(sizes: &[usize]) -> Topology {
    Topology::new(sizes.to_vec()).unwrap()
}

#[test]
fn forward_matches_hand_rolled_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..20 {
        let net = random_network(topo(&[2, 3, 2]), 1000 + trial);
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let (w1, w2) = split_232(&net);
        let (h, o) = oracle_forward(&w1, &w2, x);
        let tr = net.forward(&x).unwrap();
        for j in 0..3 {
            assert!((tr.hidden_out()[j] - h[j]).abs() < 1e-12);
        }
        for k in 0..2 {
            assert!((tr.output_out()[k] - o[k]).abs() < 1e-12);
        }
    }
}

fn fd_loss(net: &Network, x: &[f64], d: &[f64]) -> f64 {
    let out = net.forward(x).unwrap();
    out.output_out().iter().zip(d).map(|(o, d)| 0.5 * (d - o) * (d - o)).sum()
}

/// ΔW with η = 1, α = 0 in simultaneous mode against -∂L/∂W by central differences.
fn check_against_fd(sizes: &[usize], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = random_network(topo(sizes), seed);
    let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let d: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut stepped = net.clone();
    let mut delta = DeltaState::zeros_like(&net);
    let cfg = StepConfig { learning_rate: 1.0, momentum: 0.0, mode: UpdateMode::Simultaneous };
    backprop_step(&mut stepped, &x, &d, &cfg, &mut delta).unwrap();

    let h = 1e-5;
    for (m, dm) in delta.deltas().iter().enumerate() {
        for r in 0..dm.rows() {
            for c in 0..dm.cols() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                let base = net.weights()[m].get(r, c);
                plus.weights_mut().nth(m).unwrap()[r * dm.cols() + c] = base + h;
                minus.weights_mut().nth(m).unwrap()[r * dm.cols() + c] = base - h;
                let numeric = -(fd_loss(&plus, &x, &d) - fd_loss(&minus, &x, &d)) / (2.0 * h);
                let analytic = dm.get(r, c);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
                assert!(rel < 1e-6, "{sizes:?} seed {seed} W{m}[{r}][{c}]: analytic {analytic} numeric {numeric} rel {rel}");
            }
        }
    }
}

#[test]
fn hidden_update_is_negative_gradient() {
    for seed in 0..20 {
        check_against_fd(&[2, 3, 2], seed);
    }
}

#[test]
fn deeper_networks_pass_gradient_check() {
    for seed in 0..5 {
        check_against_fd(&[3, 4, 5, 2], 100 + seed);
        check_against_fd(&[2, 6, 3, 3, 1], 200 + seed);
    }
}

#[test]
fn second_step_carries_momentum() {
    // Hand-unrolled for the output bias weight W1[0][3] on pattern (0.4, -0.3) → (1, 0):
    //   Δ1 = η·e1·1, Δ2 = α·Δ1 + η·e2·1, where e_n is the error before step n.
    let (eta, alpha) = (0.25, 0.9);
    let x = [0.4, -0.3];
    let d = [1.0, 0.0];
    let mut net = paper_network();
    let mut delta = DeltaState::zeros_like(&net);
    let cfg = StepConfig { learning_rate: eta, momentum: alpha, mode: UpdateMode::SequentialPaper };

    let w0 = net.weights()[1].get(0, 3);
    let e1 = d[0] - net.forward(&x).unwrap().output_out()[0];
    backprop_step(&mut net, &x, &d, &cfg, &mut delta).unwrap();
    let d1 = eta * e1;
    assert!((net.weights()[1].get(0, 3) - (w0 + d1)).abs() < 1e-15);

    let e2 = d[0] - net.forward(&x).unwrap().output_out()[0];
    backprop_step(&mut net, &x, &d, &cfg, &mut delta).unwrap();
    let d2 = alpha * d1 + eta * e2;
    assert!((delta.deltas()[1].get(0, 3) - d2).abs() < 1e-15);
    assert!((net.weights()[1].get(0, 3) - (w0 + d1 + d2)).abs() < 1e-15);
}

#[test]
fn epoch_equals_composed_steps() {
    let data = Dataset::new(vec![
        Pattern::new(vec![0.2, 0.9], vec![1.0, 0.0]),
        Pattern::new(vec![-0.5, 0.1], vec![0.3, 0.7]),
    ])
    .unwrap();
    let cfg = TrainingConfig { momentum: 0.5, error_threshold: 1e-9, ..Default::default() };
    let mut by_epoch = paper_network();
    let mut de = DeltaState::zeros_like(&by_epoch);
    train_epoch(&mut by_epoch, &data, &cfg, &mut de, 0).unwrap();

    let mut manual = paper_network();
    let mut dm = DeltaState::zeros_like(&manual);
    let step = StepConfig { learning_rate: 0.25, momentum: 0.5, mode: UpdateMode::SequentialPaper };
    for p in data.patterns() {
        backprop_step(&mut manual, &p.input, &p.desired, &step, &mut dm).unwrap();
    }
    assert_eq!(by_epoch, manual);
    assert_eq!(de, dm);
}

/// Smallest t ≥ 0 with |o + t·u - c| = r, from the quadratic a t² + b t + c = 0.
fn quadratic_hit(o: (f64, f64), angle: f64, c: (f64, f64), r: f64) -> Option<f64> {
    let u = (angle.cos(), angle.sin());
    let f = (o.0 - c.0, o.1 - c.1);
    let a = u.0 * u.0 + u.1 * u.1;
    let b = 2.0 * (f.0 * u.0 + f.1 * u.1);
    let cc = f.0 * f.0 + f.1 * f.1 - r * r;
    if cc <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    (t >= 0.0).then_some(t)
}

fn oracle_reading(pose: Pose, angle: f64, world: &World, cfg: &SimConfig) -> f64 {
    let d = world
        .obstacles
        .iter()
        .filter_map(|o| quadratic_hit((pose.x, pose.y), angle, (o.cx, o.cy), o.radius + cfg.rover_radius))
        .fold(f64::INFINITY, f64::min);
    if d >= cfg.sense_range {
        0.0
    } else {
        1.0 - d / cfg.sense_range
    }
}

#[test]
fn sensor_matches_quadratic_oracle() {
    let cfg = SimConfig::default();
    let pose = Pose::new(0.0, 0.0, 0.0);
    let cases = [
        vec![Obstacle::new(2.0, 0.0, 0.5).unwrap()],
        vec![Obstacle::new(1.5, 1.4, 0.5).unwrap()],
        vec![Obstacle::new(1.5, -1.2, 0.4).unwrap(), Obstacle::new(1.0, 1.0, 0.3).unwrap()],
        vec![Obstacle::new(1.6, 1.6, 0.3).unwrap(), Obstacle::new(0.9, 1.0, 0.2).unwrap()],
        vec![Obstacle::new(1.2, -1.0, 0.05).unwrap()],
    ];
    let mut hits = 0;
    for obstacles in cases {
        let world = World::new(obstacles, (-9.0, -9.0), None, (9.0, -9.0));
        let r = sense(&pose, &world, &cfg);
        let l = oracle_reading(pose, cfg.sensor_angles.0, &world, &cfg);
        let rr = oracle_reading(pose, -cfg.sensor_angles.1, &world, &cfg);
        assert!((r.left - l).abs() < 1e-9, "left {} vs {}", r.left, l);
        assert!((r.right - rr).abs() < 1e-9, "right {} vs {}", r.right, rr);
        hits += usize::from(l > 0.0) + usize::from(rr > 0.0);
    }
    assert!(hits >= 4, "cases should exercise real intersections");
}

#[test]
fn trained_controller_turns_away_from_left_obstacle() {
    let net = trained_avoidance_network().unwrap();
    let cfg = SimConfig::default();
    let cmd = rovernet::motor_from_network(&net, &rovernet::SensorReading { left: 1.0, right: 0.0 }, &cfg).unwrap();
    assert!(cmd.v_left > cmd.v_right);
    let clear = rovernet::motor_from_network(&net, &rovernet::SensorReading { left: 0.0, right: 0.0 }, &cfg).unwrap();
    // trained to within the 0.01 threshold of full speed
    assert!(clear.v_left >= 0.99 * cfg.v_max);
    assert!(clear.v_right >= 0.99 * cfg.v_max);
}

fn arb_232() -> impl Strategy<Value = (Network, Vec<f64>, Vec<f64>)> {
    (any::<u64>(), prop::array::uniform2(-1.0f64..1.0), prop::array::uniform2(-2.0f64..2.0))
        .prop_map(|(seed, x, d)| (random_network(topo(&[2, 3, 2]), seed), x.to_vec(), d.to_vec()))
}

proptest! {
    #[test]
    fn sigmoid_bounded_and_symmetric(t in -700.0f64..700.0) {
        let s = rovernet::sigmoid(t);
        if t.abs() < 30.0 {
            prop_assert!(s > 0.0 && s < 1.0);
        } else {
            prop_assert!((0.0..=1.0).contains(&s));
        }
        prop_assert!((rovernet::sigmoid(-t) - (1.0 - s)).abs() < 1e-12);
    }

    #[test]
    fn momentum_free_updates_ignore_delta_state((net, x, d) in arb_232(), junk in -5.0f64..5.0) {
        let cfg = StepConfig { learning_rate: 0.3, momentum: 0.0, mode: UpdateMode::SequentialPaper };
        let mut a = net.clone();
        let mut da = DeltaState::zeros_like(&net);
        backprop_step(&mut a, &x, &d, &cfg, &mut da).unwrap();

        let mut b = net.clone();
        let mut seeded = net.clone();
        let mut db = DeltaState::zeros_like(&net);
        // fill the delta state with a junk step
        let junk_cfg = StepConfig { learning_rate: junk.abs() + 0.1, momentum: 0.0, mode: UpdateMode::Simultaneous };
        backprop_step(&mut seeded, &[junk, -junk], &[junk, junk], &junk_cfg, &mut db).unwrap();
        backprop_step(&mut b, &x, &d, &cfg, &mut db).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn zero_error_is_fixed_point((net, x, _d) in arb_232(), alpha in 0.0f64..0.99) {
        let desired = net.forward(&x).unwrap().output_out().to_vec();
        for mode in [UpdateMode::SequentialPaper, UpdateMode::Simultaneous] {
            let mut n = net.clone();
            let mut delta = DeltaState::zeros_like(&net);
            let cfg = StepConfig { learning_rate: 0.7, momentum: alpha, mode };
            backprop_step(&mut n, &x, &desired, &cfg, &mut delta).unwrap();
            prop_assert_eq!(&n, &net);
        }
    }

    #[test]
    fn forward_is_deterministic((net, x, _d) in arb_232()) {
        prop_assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }
}

#[test]
fn zero_input_mode_agreement_on_input_weights() {
    let step = |mode| {
        let mut n = paper_network();
        let mut d = DeltaState::zeros_like(&n);
        let cfg = StepConfig { learning_rate: 0.25, momentum: 0.0, mode };
        backprop_step(&mut n, &[0.0, 0.0], &[1.0, 1.0], &cfg, &mut d).unwrap();
        n
    };
    let a = step(UpdateMode::SequentialPaper);
    let b = step(UpdateMode::Simultaneous);
    assert_eq!(a.weights()[1], b.weights()[1]);
    for j in 0..3 {
        for i in 0..2 {
            assert_eq!(a.weights()[0].get(j, i), b.weights()[0].get(j, i));
        }
    }
}

#[test]
fn million_bounded_steps_stay_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut net = random_network(topo(&[2, 3, 2]), 5);
    let mut delta = DeltaState::zeros_like(&net);
    let steps = if cfg!(debug_assertions) { 200_000 } else { 1_000_000 };
    for _ in 0..steps {
        let eta = rng.gen_range(0.0..=1.0);
        let alpha = rng.gen_range(0.0..=0.99);
        let cfg = StepConfig { learning_rate: eta, momentum: alpha, mode: UpdateMode::SequentialPaper };
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let d = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        backprop_step(&mut net, &x, &d, &cfg, &mut delta).unwrap();
    }
    assert_eq!(net.weights()[0].rows(), 3);
    assert_eq!(net.weights()[1].cols(), 4);
    assert!(net.weights().iter().flat_map(|w| w.values()).all(|v| v.is_finite()));
}
