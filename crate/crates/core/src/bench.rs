//! Wall-clock timing of the planner variants.
//!
//! Two granularities are reported for value iteration: one full backward
//! pass and one sweep. A layered pass always runs `horizon - 1` sweeps over
//! the whole volume, so the two can order the variants differently.

use std::time::Instant;

use crate::dataset::{feature_bank, synthesize, terrain, SynthConfig};
use crate::error::{Error, Result};
use crate::experiment::MethodScore;
use crate::grid::{GridSpec, State};
use crate::irl::{empirical_feature_mean, gradient, model_feature_expectation, update_theta, TrainConfig, TrainingSet};
use crate::method::{MethodKind, StateSpace};
use crate::planner::backward_pass_with_rewards;
use crate::reward::{FeatureBank, RewardTable, Theta};

/// The row every ratio is normalized to.
pub const REFERENCE: MethodKind = MethodKind::Proposed { p: 2.0, conv: false };

pub const TABLE_HEADER: [&str; 7] = ["method", "mhd_det", "mhd_sto", "vi_time", "vi_ratio", "update_time", "update_ratio"];

pub const DETAIL_HEADER: [&str; 10] = [
    "method",
    "size",
    "horizon",
    "pass_seconds",
    "sweeps",
    "sweep_seconds",
    "pass_ratio",
    "sweep_ratio",
    "update_seconds",
    "update_ratio",
];

pub const TRACE_HEADER: [&str; 6] = ["method", "size", "repetition", "pass_seconds", "sweeps", "sweep_seconds"];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Square map side lengths.
    pub sizes: Vec<usize>,
    /// Layer count of the time-augmented variant.
    pub horizon: usize,
    pub repetitions: usize,
    pub warmup: usize,
    pub variants: Vec<MethodKind>,
    /// Demonstrations used to time one θ update; 0 skips the update timing.
    pub update_demos: usize,
    pub theta: Theta,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![64],
            horizon: 16,
            repetitions: 5,
            warmup: 1,
            variants: MethodKind::TABLE.to_vec(),
            update_demos: 3,
            theta: SynthConfig::default_theta(),
            seed: 0,
        }
    }
}

/// Median timings of one variant on one map.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantTiming {
    pub kind: MethodKind,
    pub size: usize,
    pub horizon: Option<usize>,
    pub pass_seconds: f64,
    /// Median sweeps per pass.
    pub sweeps: usize,
    pub sweep_seconds: f64,
    pub update_seconds: Option<f64>,
    /// Every timed repetition: (pass seconds, sweeps).
    pub trace: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub timings: Vec<VariantTiming>,
    pub total_seconds: f64,
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no timings"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn median_usize(values: &[usize]) -> usize {
    let mut v = values.to_vec();
    v.sort_unstable();
    v[v.len() / 2]
}

fn time_passes(
    spec: &GridSpec,
    bank: &FeatureBank,
    theta: &Theta,
    kind: MethodKind,
    cfg: &BenchConfig,
) -> Result<Vec<(f64, usize)>> {
    let method = kind.method();
    let goal_cell = State::new(spec.width() / 2, spec.height() / 2);
    let features = bank.for_goal(spec, goal_cell)?;
    let (grid, goal) = match method.space {
        StateSpace::Planar => (spec.clone(), goal_cell),
        StateSpace::TimeAugmented { .. } => (spec.with_horizon(cfg.horizon)?, goal_cell.at_time(cfg.horizon - 1)),
    };
    // Rewards depend only on θ, so they are built once outside the timed region.
    let rewards = RewardTable::build(spec, theta, &features, method.planner.norm)?;
    let mut out = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.warmup + cfg.repetitions {
        let started = Instant::now();
        let art = backward_pass_with_rewards(&grid, goal, &rewards, &method.planner)?;
        let secs = started.elapsed().as_secs_f64();
        if rep >= cfg.warmup {
            out.push((secs, art.iterations_run));
        }
    }
    Ok(out)
}

/// Median wall time of one gradient evaluation plus θ update.
fn time_update(ts: &TrainingSet, theta: &Theta, kind: MethodKind, cfg: &BenchConfig) -> Result<f64> {
    let train = TrainConfig { method: kind.method(), ..Default::default() };
    let f_bar = empirical_feature_mean(ts, train.method.planner.norm)?;
    let mut secs = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.warmup + cfg.repetitions {
        let started = Instant::now();
        let model = model_feature_expectation(ts, theta, &train)?;
        let g: Vec<f64> = gradient(&f_bar, &model.features)?.iter().map(|g| -g).collect();
        std::hint::black_box(update_theta(theta, &g, train.learning_rate));
        if rep >= cfg.warmup {
            secs.push(started.elapsed().as_secs_f64());
        }
    }
    median(&secs)
}

/// Times every variant on every map size, one variant at a time.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.repetitions == 0 {
        return Err(Error::config("need at least one repetition"));
    }
    if cfg.horizon < 2 {
        return Err(Error::config("horizon must be at least 2"));
    }
    if cfg.sizes.is_empty() || cfg.variants.is_empty() {
        return Err(Error::EmptyInput("nothing to benchmark"));
    }
    let started = Instant::now();
    let mut timings = Vec::new();
    for &size in &cfg.sizes {
        let spec = GridSpec::unit(size, size)?;
        let bank = feature_bank(&spec, &[terrain(&spec, cfg.seed)], true)?;
        if cfg.theta.len() != bank.n_features() {
            return Err(Error::DimensionMismatch { expected: bank.n_features(), got: cfg.theta.len() });
        }
        let demos = if cfg.update_demos > 0 {
            let synth = SynthConfig { n_train: cfg.update_demos, n_test: 0, ..SynthConfig::for_grid(&spec, cfg.seed) };
            let data = synthesize(&spec, &synth)?;
            let bank = feature_bank(&spec, &[data.terrain], true)?;
            Some(TrainingSet::new(&spec, bank, data.train)?)
        } else {
            None
        };
        for &kind in &cfg.variants {
            let trace = time_passes(&spec, &bank, &cfg.theta, kind, cfg)?;
            let pass: Vec<f64> = trace.iter().map(|t| t.0).collect();
            let per_sweep: Vec<f64> = trace.iter().map(|t| t.0 / t.1.max(1) as f64).collect();
            let sweeps: Vec<usize> = trace.iter().map(|t| t.1).collect();
            let update_seconds = match &demos {
                Some(ts) => Some(time_update(ts, &cfg.theta, kind, cfg)?),
                None => None,
            };
            timings.push(VariantTiming {
                kind,
                size,
                horizon: matches!(kind.method().space, StateSpace::TimeAugmented { .. }).then_some(cfg.horizon),
                pass_seconds: median(&pass)?,
                sweeps: median_usize(&sweeps),
                sweep_seconds: median(&per_sweep)?,
                update_seconds,
                trace,
            });
        }
    }
    Ok(BenchResult { timings, total_seconds: started.elapsed().as_secs_f64() })
}

fn ratio(value: f64, reference: Option<f64>) -> Option<f64> {
    reference.filter(|r| *r > 0.0).map(|r| value / r)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

impl BenchResult {
    pub fn find(&self, kind: MethodKind, size: usize) -> Option<&VariantTiming> {
        self.timings.iter().find(|t| t.kind == kind && t.size == size)
    }

    /// Per-pass, per-sweep and update ratios against the reference row.
    pub fn ratios(&self, t: &VariantTiming) -> (Option<f64>, Option<f64>, Option<f64>) {
        let r = self.find(REFERENCE, t.size);
        (
            ratio(t.pass_seconds, r.map(|r| r.pass_seconds)),
            ratio(t.sweep_seconds, r.map(|r| r.sweep_seconds)),
            t.update_seconds.and_then(|u| ratio(u, r.and_then(|r| r.update_seconds))),
        )
    }

    /// One row per method for the largest map, led by the optional accuracy
    /// scores (the straight-line row has no timings).
    pub fn table_csv(&self, scores: &[MethodScore]) -> String {
        let size = self.timings.iter().map(|t| t.size).max().unwrap_or(0);
        let mut rows = Vec::new();
        for s in scores.iter().filter(|s| s.kind.is_none()) {
            rows.push(vec![s.label(), format!("{:.6}", s.det.mean), cell(s.sto.map(|x| x.mean)), String::new(), String::new(), String::new(), String::new()]);
        }
        for t in self.timings.iter().filter(|t| t.size == size) {
            let score = scores.iter().find(|s| s.kind == Some(t.kind));
            let (pass_ratio, _, update_ratio) = self.ratios(t);
            rows.push(vec![
                t.kind.label(),
                cell(score.map(|s| s.det.mean)),
                cell(score.and_then(|s| s.sto.map(|x| x.mean))),
                format!("{:.6}", t.pass_seconds),
                cell(pass_ratio),
                cell(t.update_seconds),
                cell(update_ratio),
            ]);
        }
        crate::io::format_table(&TABLE_HEADER, &rows)
    }

    pub fn detail_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .timings
            .iter()
            .map(|t| {
                let (p, s, u) = self.ratios(t);
                vec![
                    t.kind.label(),
                    t.size.to_string(),
                    t.horizon.map_or_else(String::new, |h| h.to_string()),
                    format!("{:.6}", t.pass_seconds),
                    t.sweeps.to_string(),
                    format!("{:.9}", t.sweep_seconds),
                    cell(p),
                    cell(s),
                    cell(t.update_seconds),
                    cell(u),
                ]
            })
            .collect();
        crate::io::format_table(&DETAIL_HEADER, &rows)
    }

    pub fn trace_csv(&self) -> String {
        let mut rows = Vec::new();
        for t in &self.timings {
            for (i, (secs, sweeps)) in t.trace.iter().enumerate() {
                rows.push(vec![
                    t.kind.label(),
                    t.size.to_string(),
                    i.to_string(),
                    format!("{secs:.6}"),
                    sweeps.to_string(),
                    format!("{:.9}", secs / (*sweeps).max(1) as f64),
                ]);
            }
        }
        crate::io::format_table(&TRACE_HEADER, &rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        BenchConfig { sizes: vec![12], horizon: 4, repetitions: 3, update_demos: 1, ..Default::default() }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn reference_ratio_is_one() {
        let r = run_benchmark(&small()).unwrap();
        let t = r.find(REFERENCE, 12).unwrap();
        let (p, s, u) = r.ratios(t);
        assert_eq!((p, s, u), (Some(1.0), Some(1.0), Some(1.0)));
        assert!(r.timings.iter().all(|t| t.pass_seconds > 0.0 && t.trace.len() == 3));
    }

    #[test]
    fn layered_pass_runs_horizon_minus_one_sweeps() {
        let cfg = BenchConfig { variants: vec![MethodKind::Baseline3d], update_demos: 0, ..small() };
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.timings[0].sweeps, 3);
        assert_eq!(r.timings[0].horizon, Some(4));
    }

    #[test]
    fn table_has_one_row_per_variant() {
        let cfg = BenchConfig { update_demos: 0, ..small() };
        let r = run_benchmark(&cfg).unwrap();
        let csv = r.table_csv(&[]);
        assert_eq!(csv.lines().next().unwrap(), TABLE_HEADER.join(","));
        assert_eq!(csv.lines().count(), 1 + MethodKind::TABLE.len());
        assert_eq!(r.trace_csv().lines().count(), 1 + 3 * MethodKind::TABLE.len());
    }

    #[test]
    fn zero_repetitions_rejected() {
        assert!(run_benchmark(&BenchConfig { repetitions: 0, ..small() }).is_err());
    }
}
