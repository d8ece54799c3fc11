//! `rovernet` command-line front-end.
//!
//! Exit codes: 0 success (converged / reached goal / all checks pass),
//! 1 bad input or failed check, 2 not converged or timed out, 3 collision.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rovernet::demo::run_paper_demo;
use rovernet::fixtures::{avoidance_dataset, paper_world, trained_avoidance_network};
use rovernet::sim::{Outcome, SimConfig};
use rovernet::trainer::{gradient_check_trials, random_network, train_with, DEFAULT_GRADIENT_STEP};
use rovernet::{
    export_trajectory_csv, export_trajectory_svg, load_dataset, load_network, load_sim_config, load_world,
    save_network, simulate, Topology, TrainingConfig, UpdateMode,
};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_TIMEOUT: u8 = 2;
const EXIT_COLLISION: u8 = 3;

#[derive(Parser)]
#[command(name = "rovernet", version, about = "Momentum back-propagation trainer and rover path-planning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay the worked 2-3-2 training step and check it against the published values
    DemoPaper {
        #[arg(long, default_value = "sequential-paper", value_parser = parse_mode)]
        mode: UpdateMode,
    },
    /// Train a network on a CSV dataset
    Train(TrainArgs),
    /// Compare analytic updates with central finite differences on random networks
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_GRADIENT_STEP)]
        h: f64,
    },
    /// Drive the rover through a scenario with a trained network
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// CSV with header in0,in1,...,out0,out1,... (default: built-in avoidance set)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Initial network JSON
    #[arg(long, conflicts_with = "seed")]
    weights: Option<PathBuf>,
    /// Seed for uniform [0,1) initial weights on an in-3-out network
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.25)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    momentum: f64,
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    epochs: usize,
    #[arg(long, default_value = "sequential-paper", value_parser = parse_mode)]
    mode: UpdateMode,
    /// Print `epoch,<n>,max_abs_error,<e>` after every epoch
    #[arg(long)]
    trace: bool,
    /// Where to write the trained network JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Trained network JSON (default: train the built-in avoidance controller)
    #[arg(long)]
    network: Option<PathBuf>,
    /// Scenario JSON (default: start (0,0), goal (11.73,0), obstacle r=2 at (5.87,0))
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Simulator config JSON; missing fields keep their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<UpdateMode, String> {
    s.parse::<UpdateMode>().map_err(|e| e.to_string())
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INPUT)
}

fn demo_paper(mode: UpdateMode) -> ExitCode {
    match run_paper_demo(mode) {
        Ok(report) => {
            print!("{}", report.text);
            if report.all_match {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INPUT)
            }
        }
        Err(e) => fail(e),
    }
}

fn cmd_train(args: TrainArgs) -> ExitCode {
    let data = match &args.dataset {
        Some(p) => match load_dataset(p) {
            Ok(d) => d,
            Err(e) => return fail(format_args!("--dataset: {e}")),
        },
        None => avoidance_dataset(),
    };
    let mut cfg = TrainingConfig {
        learning_rate: args.lr,
        momentum: args.momentum,
        error_threshold: args.threshold,
        max_epochs: args.epochs,
        mode: args.mode,
        trace: false,
        ..Default::default()
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let net = match &args.weights {
        Some(p) => match load_network(p) {
            Ok(n) => n,
            Err(e) => return fail(format_args!("--weights: {e}")),
        },
        None => {
            let topology = Topology::new(vec![data.input_width(), 3, data.output_width()]).expect("non-empty widths");
            random_network(topology, cfg.seed)
        }
    };
    cfg.bias_input = net.bias_input;
    if let Err(e) = cfg.validate() {
        return fail(format_args!("{e} (check --lr, --momentum, --threshold)"));
    }

    let trace = args.trace;
    let result = train_with(&net, &data, &cfg, |report| {
        if trace {
            println!("epoch,{},max_abs_error,{}", report.epoch_index + 1, report.epoch_max_abs_error);
        }
    });
    let result = match result {
        Ok(r) => r,
        Err(e) => return fail(format_args!("training failed: {e}")),
    };
    if let Some(out) = &args.out {
        if let Err(e) = save_network(&result.final_network, out) {
            return fail(format_args!("--out: {e}"));
        }
    }
    eprintln!(
        "{} after {} epochs, max abs error {}",
        if result.converged { "converged" } else { "not converged" },
        result.epochs_run,
        result.final_max_abs_error()
    );
    if result.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}

fn cmd_gradcheck(seed: u64, trials: usize, h: f64) -> ExitCode {
    if !(h.is_finite() && h > 0.0) {
        return fail(format_args!("--h must be > 0, got {h}"));
    }
    if trials == 0 {
        eprintln!("warning: --trials 0, nothing to check");
        println!("max relative deviation 0 over 0 trials");
        return ExitCode::SUCCESS;
    }
    let topology = Topology::new(vec![2, 3, 2]).expect("static topology");
    let reports = match gradient_check_trials(&topology, seed, trials, h) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let mut worst = 0.0f64;
    let mut failed = false;
    for (i, r) in reports.iter().enumerate() {
        worst = worst.max(r.max_relative_deviation);
        if r.max_relative_deviation >= 1e-6 {
            failed = true;
            eprintln!(
                "trial {i} (seed {}): deviation {:e} at {} (analytic vs numeric)",
                seed.wrapping_add(i as u64),
                r.max_relative_deviation,
                r.worst
            );
        }
    }
    println!("max relative deviation {worst:e} over {trials} trials (h = {h})");
    if failed {
        ExitCode::from(EXIT_INPUT)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_simulate(args: SimulateArgs) -> ExitCode {
    let net = match &args.network {
        Some(p) => load_network(p).map_err(|e| format!("--network: {e}")),
        None => trained_avoidance_network().map_err(|e| e.to_string()),
    };
    let net = match net {
        Ok(n) => n,
        Err(e) => return fail(e),
    };
    let world = match &args.scenario {
        Some(p) => match load_world(p) {
            Ok(w) => w,
            Err(e) => return fail(format_args!("--scenario: {e}")),
        },
        None => paper_world(),
    };
    let cfg = match &args.config {
        Some(p) => match load_sim_config(p) {
            Ok(c) => c,
            Err(e) => return fail(format_args!("--config: {e}")),
        },
        None => SimConfig::default(),
    };
    let traj = match simulate(&net, &world, &cfg) {
        Ok(t) => t,
        Err(e) => return fail(format_args!("simulation: {e}")),
    };
    if let Some(p) = &args.csv {
        if let Err(e) = export_trajectory_csv(&traj, p) {
            return fail(format_args!("--csv: {e}"));
        }
    }
    if let Some(p) = &args.svg {
        if let Err(e) = export_trajectory_svg(&traj, &world, p) {
            return fail(format_args!("--svg: {e}"));
        }
    }
    let f = traj.final_pose();
    println!("outcome: {}", traj.outcome);
    println!("steps: {}", traj.steps.len() - 1);
    println!("final pose: x={} y={} heading={}", f.x, f.y, f.heading);
    println!("max |y|: {}", traj.max_abs_y());
    match traj.outcome {
        Outcome::ReachedGoal => ExitCode::SUCCESS,
        Outcome::Timeout => ExitCode::from(EXIT_TIMEOUT),
        Outcome::Collision => ExitCode::from(EXIT_COLLISION),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::DemoPaper { mode } => demo_paper(mode),
        Command::Train(args) => cmd_train(args),
        Command::Gradcheck { seed, trials, h } => cmd_gradcheck(seed, trials, h),
        Command::Simulate(args) => cmd_simulate(args),
    }
}
