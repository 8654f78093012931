//! Maximum-entropy IRL: feature-count matching with a multiplicative
//! weight update.
//!
//! Feature counts run over every state of a path, terminal state included.
//! With an `L_p` modifier each non-terminal state's features are scaled by
//! `1 / dist_p` of the move leaving it, which is what the reward of that
//! move is linear in; without a modifier this is the plain state count.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, State};
use crate::method::{Arrival, Method, StateSpace};
use crate::planner::{backward_pass_with_rewards, make_policy, Policy, ValueArtifacts};
use crate::reward::{DistanceNorm, FeatureBank, FeatureMap, RewardTable, Theta};
use crate::visitation::forward_pass_with;

#[derive(Debug, Clone)]
pub struct TrainingSet {
    spec: GridSpec,
    features: FeatureBank,
    demos: Vec<Vec<State>>,
}

impl TrainingSet {
    pub fn new(spec: &GridSpec, features: FeatureBank, demos: Vec<Vec<State>>) -> Result<Self> {
        let spec = spec.planar();
        if demos.is_empty() {
            return Err(Error::EmptyInput("training set has no trajectories"));
        }
        features.base().check_grid(&spec)?;
        for (i, d) in demos.iter().enumerate() {
            validate_path(&spec, d).map_err(|e| e.in_trajectory(i.to_string()))?;
        }
        Ok(Self { spec, features, demos })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn features(&self) -> &FeatureBank {
        &self.features
    }

    pub fn demos(&self) -> &[Vec<State>] {
        &self.demos
    }

    pub fn n_features(&self) -> usize {
        self.features.n_features()
    }
}

pub(crate) fn validate_path(spec: &GridSpec, path: &[State]) -> Result<()> {
    if path.len() < 2 {
        return Err(Error::TooShort(format!("path has {} state(s), need at least 2", path.len())));
    }
    for s in path {
        if !spec.contains_cell(*s) {
            return Err(Error::StateOutOfBounds(s.to_string()));
        }
    }
    if let Some(w) = path.windows(2).find(|w| w[0].chebyshev(w[1]) > 1) {
        return Err(Error::NonAdjacentJump { cells: w[0].chebyshev(w[1]), limit: 1 });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub grad_tol: f64,
    pub method: Method,
    /// Planar forward passes run this many times the demonstration's length.
    pub forward_factor: usize,
    pub initial_theta: Option<Theta>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_epochs: 100,
            grad_tol: 1e-4,
            method: Method::default(),
            forward_factor: 2,
            initial_theta: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// θ used in each epoch.
    pub theta_history: Vec<Vec<f64>>,
    pub grad_norm_history: Vec<f64>,
    /// Mean wall time of one backward pass, per epoch.
    pub vi_seconds: Vec<f64>,
    /// Mean wall time of one sweep, per epoch.
    pub vi_sweep_seconds: Vec<f64>,
    /// Wall time of one full gradient evaluation, per epoch.
    pub update_seconds: Vec<f64>,
    /// Backward passes that hit their sweep cap, per epoch.
    pub not_converged: Vec<usize>,
    pub converged: bool,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.grad_norm_history.len()
    }
}

/// Feature counts of a single path (see the module docs).
pub fn path_feature_counts(path: &[State], features: &FeatureMap, norm: DistanceNorm) -> Vec<f64> {
    let mut counts = vec![0.0; features.n_features()];
    for (i, &s) in path.iter().enumerate() {
        let scale = match path.get(i + 1) {
            Some(&next) => norm.scale(s, next),
            None => 1.0,
        };
        for (c, f) in counts.iter_mut().zip(features.at(s)) {
            *c += scale * f;
        }
    }
    counts
}

/// Mean over demonstrations of their summed feature counts.
pub fn empirical_feature_mean(ts: &TrainingSet, norm: DistanceNorm) -> Result<Vec<f64>> {
    let mut total = vec![0.0; ts.n_features()];
    for d in &ts.demos {
        let goal = *d.last().expect("validated non-empty");
        let f = ts.features.for_goal(&ts.spec, goal)?;
        for (t, c) in total.iter_mut().zip(path_feature_counts(d, &f, norm)) {
            *t += c;
        }
    }
    let n = ts.demos.len() as f64;
    Ok(total.into_iter().map(|t| t / n).collect())
}

/// Model feature expectation together with the planning work it took.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelExpectation {
    pub features: Vec<f64>,
    pub vi_seconds: f64,
    pub sweeps: usize,
    pub backward_passes: usize,
    pub not_converged: usize,
}

/// Planner inputs for one demonstration: the grid it is solved on, its goal
/// state and the forward step budget.
pub(crate) fn demo_problem(spec: &GridSpec, path: &[State], space: StateSpace) -> Result<(GridSpec, State, usize)> {
    let goal = *path.last().expect("validated non-empty");
    match space {
        StateSpace::Planar => Ok((spec.planar(), goal, path.len())),
        StateSpace::TimeAugmented { horizon, arrival } => {
            let h = horizon.unwrap_or(path.len());
            match arrival {
                Arrival::Exact if path.len() != h => {
                    return Err(Error::config(format!(
                        "exact-arrival horizon {h} does not match a path of {} states",
                        path.len()
                    )))
                }
                Arrival::Within if path.len() > h => {
                    return Err(Error::config(format!("path of {} states exceeds horizon {h}", path.len())))
                }
                _ => {}
            }
            let spec3 = spec.with_horizon(h)?;
            let goal = match arrival {
                Arrival::Exact => goal.at_time(h - 1),
                Arrival::Within => goal,
            };
            Ok((spec3, goal, h))
        }
    }
}

/// Expected `1 / dist_p` of the move leaving each state under `policy`.
fn expected_scale(spec: &GridSpec, policy: &Policy, norm: DistanceNorm) -> Vec<f64> {
    let cells = spec.n_cells();
    (0..spec.n_states())
        .map(|idx| {
            let s = spec.cell_at(idx % cells);
            policy
                .row(idx)
                .iter()
                .zip(Action::ALL)
                .map(|(p, a)| p * norm.scale(s, spec.planar_successor(s, a)))
                .sum()
        })
        .collect()
}

struct DemoStats {
    counts: Vec<f64>,
    art_seconds: f64,
    sweeps: usize,
    converged: bool,
}

/// Plans toward one demonstration's goal and returns the policy with the artifacts.
pub fn plan_for_path(
    spec: &GridSpec,
    features: &FeatureMap,
    path: &[State],
    theta: &Theta,
    method: &Method,
) -> Result<(GridSpec, State, usize, ValueArtifacts, Policy)> {
    let (grid, goal, steps) = demo_problem(spec, path, method.space)?;
    let rewards = RewardTable::build(&grid.planar(), theta, features, method.planner.norm)?;
    let art = backward_pass_with_rewards(&grid, goal, &rewards, &method.planner)?;
    let policy = make_policy(&art, method.policy);
    Ok((grid, goal, steps, art, policy))
}

fn demo_expectation(ts: &TrainingSet, path: &[State], theta: &Theta, cfg: &TrainConfig) -> Result<DemoStats> {
    let start = path[0];
    let goal_cell = *path.last().expect("validated non-empty");
    let features = ts.features.for_goal(&ts.spec, goal_cell)?;
    let (grid, goal, steps, art, policy) = plan_for_path(&ts.spec, &features, path, theta, &cfg.method)?;
    let norm = cfg.method.planner.norm;
    let layered = grid.is_time_augmented();
    let steps = if layered { steps } else { steps * cfg.forward_factor.max(1) };
    let weighted = !matches!(norm, DistanceNorm::None);
    let field = forward_pass_with(&policy, &grid, start, goal, steps, weighted && layered)?;

    let cells = grid.n_cells();
    let mut occupancy = vec![0.0; cells];
    if weighted {
        let scale = expected_scale(&grid, &policy, norm);
        match &field.per_step {
            Some(steps) => {
                for (layer, step) in steps.iter().enumerate() {
                    for (s, m) in step.iter().enumerate() {
                        occupancy[s] += m * scale[layer * cells + s];
                    }
                }
            }
            None => {
                for (s, m) in field.d.iter().enumerate() {
                    occupancy[s] += m * scale[s];
                }
            }
        }
    } else {
        occupancy.copy_from_slice(&field.d);
    }

    let mut counts = vec![0.0; features.n_features()];
    for (s, m) in occupancy.iter().enumerate() {
        if *m != 0.0 {
            for (c, f) in counts.iter_mut().zip(features.cell(s)) {
                *c += m * f;
            }
        }
    }
    for (c, f) in counts.iter_mut().zip(features.at(goal_cell)) {
        *c += field.absorbed * f;
    }
    Ok(DemoStats { counts, art_seconds: art.seconds, sweeps: art.iterations_run, converged: art.converged })
}

/// Mean over demonstrations of the feature counts expected under the
/// current policy: one backward and one forward pass per demonstration.
pub fn model_feature_expectation(ts: &TrainingSet, theta: &Theta, cfg: &TrainConfig) -> Result<ModelExpectation> {
    if theta.len() != ts.n_features() {
        return Err(Error::DimensionMismatch { expected: ts.n_features(), got: theta.len() });
    }
    let stats: Vec<DemoStats> =
        ts.demos.par_iter().map(|d| demo_expectation(ts, d, theta, cfg)).collect::<Result<_>>()?;

    // Ordered reduction keeps the sum reproducible.
    let mut features = vec![0.0; ts.n_features()];
    let mut vi_seconds = 0.0;
    let mut sweeps = 0;
    let mut not_converged = 0;
    for s in &stats {
        features.iter_mut().zip(&s.counts).for_each(|(t, c)| *t += c);
        vi_seconds += s.art_seconds;
        sweeps += s.sweeps;
        not_converged += usize::from(!s.converged);
    }
    let n = stats.len() as f64;
    features.iter_mut().for_each(|t| *t /= n);
    Ok(ModelExpectation { features, vi_seconds, sweeps, backward_passes: stats.len(), not_converged })
}

/// `f_bar - f_model`: the log-likelihood gradient with respect to θ.
pub fn gradient(f_bar: &[f64], f_model: &[f64]) -> Result<Vec<f64>> {
    if f_bar.len() != f_model.len() {
        return Err(Error::DimensionMismatch { expected: f_bar.len(), got: f_model.len() });
    }
    Ok(f_bar.iter().zip(f_model).map(|(a, b)| a - b).collect())
}

/// Exponentiated update `θ_i · exp(λ g_i)`; signs are preserved.
///
/// The result is not validated: an overflowing step can produce infinite or
/// zero weights, which [`train`] reports as [`Error::NonFinite`].
pub fn update_theta(theta: &Theta, grad: &[f64], learning_rate: f64) -> Theta {
    Theta::unchecked(theta.weights().iter().zip(grad).map(|(w, g)| w * (learning_rate * g).exp()).collect())
}

/// Runs the update loop until `‖∇L‖∞ < grad_tol` or `max_epochs`.
///
/// Weights are negative, so the multiplicative step acts on their magnitudes:
/// the likelihood gradient with respect to `|θ|` is `-∇L`, and that is what
/// is fed to [`update_theta`].
pub fn train(ts: &TrainingSet, cfg: &TrainConfig) -> Result<(Theta, TrainReport)> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::config("learning rate must be positive"));
    }
    let mut theta = match &cfg.initial_theta {
        Some(t) if t.len() != ts.n_features() => {
            return Err(Error::DimensionMismatch { expected: ts.n_features(), got: t.len() })
        }
        Some(t) => t.clone(),
        None => Theta::initial(ts.n_features()),
    };
    let f_bar = empirical_feature_mean(ts, cfg.method.planner.norm)?;
    let mut report = TrainReport::default();

    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let model = model_feature_expectation(ts, &theta, cfg)?;
        let grad = gradient(&f_bar, &model.features)?;
        report.update_seconds.push(started.elapsed().as_secs_f64());
        report.vi_seconds.push(model.vi_seconds / model.backward_passes.max(1) as f64);
        report.vi_sweep_seconds.push(model.vi_seconds / model.sweeps.max(1) as f64);
        report.not_converged.push(model.not_converged);
        report.theta_history.push(theta.weights().to_vec());

        let norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        report.grad_norm_history.push(norm);
        if norm < cfg.grad_tol {
            report.converged = true;
            break;
        }
        let magnitude_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let next = update_theta(&theta, &magnitude_grad, cfg.learning_rate);
        if !next.is_valid() {
            return Err(Error::NonFinite { epoch });
        }
        theta = next;
    }
    Ok((theta, report))
}
