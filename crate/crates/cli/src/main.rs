//! `gridirl`: train, interpolate, evaluate and benchmark grid-world IRL models.

mod app;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Settings shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable, wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Shortcut for `--set seed=N`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Shortcut for `--set method=M` (2d, 3d, p2, p3, p2-conv, p3-conv).
    #[arg(long, global = true)]
    pub method: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a known reward.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn reward weights from demonstrations.
    Train {
        /// Trajectory CSV (`traj_id,t,x,y`).
        #[arg(long)]
        data: PathBuf,
        /// Where to write the learned weights.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch gradient norms and weights.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-epoch wall times (not reproducible across runs).
        #[arg(long)]
        timings: Option<PathBuf>,
        /// Write value, policy and visitation grids for the first demonstration here.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Split `data` by seed into `n_train` demonstrations and write the rest here.
        #[arg(long)]
        holdout: Option<PathBuf>,
    },
    /// Fill the gap rows (empty x,y) of each trajectory.
    Interpolate {
        /// Trajectory CSV with gap rows.
        #[arg(long)]
        input: PathBuf,
        /// Learned weights; not needed with `--linear`.
        #[arg(long, required_unless_present = "linear")]
        theta: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Straight-line fill instead of the learned model.
        #[arg(long)]
        linear: bool,
        /// Greedy or sampled rollouts.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Sampled attempts per gap.
        #[arg(long)]
        retries: Option<usize>,
        /// Distance exponent of the proposed variant.
        #[arg(long)]
        p: Option<f64>,
        /// Smoothing of the value field during planning.
        #[arg(long, value_enum)]
        conv: Option<Switch>,
        /// SVG with one polyline per completed trajectory.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Score filled trajectories against ground truth.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        /// Completed trajectories; repeat to compare several methods.
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        /// Row label per `--pred`, in the same order; defaults to the file stem.
        #[arg(long)]
        label: Vec<String>,
        /// The gapped input; locates each gap when scoring gap segments.
        #[arg(long)]
        gapped: Option<PathBuf>,
        /// Table of mean and standard deviation per method.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-trajectory scores, one column per method.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// SVG overlay of one trajectory.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Trajectory drawn by `--plot`; defaults to the first one.
        #[arg(long)]
        plot_id: Option<String>,
    },
    /// Time the planner variants.
    Bench {
        /// Comparison table.
        #[arg(long)]
        out: PathBuf,
        /// Per-map medians at both granularities.
        #[arg(long)]
        detail: Option<PathBuf>,
        /// Every timed repetition.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Square map sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "64")]
        sizes: Vec<usize>,
        /// Layer count of the time-augmented variant.
        #[arg(long, default_value_t = 16)]
        horizon: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        /// Demonstrations used to time one weight update; 0 skips it.
        #[arg(long, default_value_t = 3)]
        update_demos: usize,
        /// Variants, comma separated; defaults to all six.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Also train and score every variant on a synthetic dataset.
        #[arg(long)]
        mhd: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Det,
    Sto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Parser)]
#[command(name = "gridirl", version, about = "Grid-world maximum-entropy IRL for trajectory interpolation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let top = match Cli::try_parse() {
        Ok(t) => t,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match app::run(&top.common, &top.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
