//! Path generation from planner output, and gap filling between two anchors.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, State};
use crate::method::{Arrival, Method, StateSpace};
use crate::planner::{backward_pass_with_rewards, make_policy, Policy, ValueArtifacts};
use crate::reward::{FeatureBank, FeatureMap, RewardTable, Theta};

/// How actions are picked during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    /// Greedy on `Q`, ties broken by action order. Stops if a state repeats.
    Deterministic,
    /// Samples the policy. Attempt `k` draws from stream `k` of `seed`.
    Stochastic { seed: u64, retries: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Visited states, start first. On a time-augmented grid they carry layers.
    pub states: Vec<State>,
    pub reached_goal: bool,
    /// Attempts made; 1 for deterministic rollouts.
    pub attempts: usize,
}

/// Planner output toward one goal, ready for rollouts.
#[derive(Debug, Clone)]
pub struct PlannedGoal {
    pub grid: GridSpec,
    pub goal: State,
    pub artifacts: ValueArtifacts,
    pub policy: Policy,
}

/// Plans toward `goal` for a path of `steps` moves.
///
/// On a time-augmented method the grid gets `steps + 1` layers, and with
/// exact arrival the goal sits on the last of them.
pub fn plan_to_goal(
    spec: &GridSpec,
    features: &FeatureMap,
    theta: &Theta,
    method: &Method,
    goal: State,
    steps: usize,
) -> Result<PlannedGoal> {
    let spec = spec.planar();
    let goal = goal.planar();
    let (grid, goal) = match method.space {
        StateSpace::Planar => (spec.clone(), goal),
        StateSpace::TimeAugmented { arrival, .. } => {
            let grid = spec.with_horizon(steps + 1)?;
            let goal = match arrival {
                Arrival::Exact => goal.at_time(steps),
                Arrival::Within => goal,
            };
            (grid, goal)
        }
    };
    let rewards = RewardTable::build(&spec, theta, features, method.planner.norm)?;
    let artifacts = backward_pass_with_rewards(&grid, goal, &rewards, &method.planner)?;
    let policy = make_policy(&artifacts, method.policy);
    Ok(PlannedGoal { grid, goal, artifacts, policy })
}

impl PlannedGoal {
    fn at_goal(&self, s: State) -> bool {
        match self.goal.z {
            Some(_) => s == self.goal,
            None => s.planar() == self.goal.planar(),
        }
    }

    fn greedy(&self, s: State) -> Action {
        let q = self.artifacts.q_row(self.grid.index(s));
        let mut best = 0;
        for a in 1..Action::COUNT {
            if q[a] > q[best] {
                best = a;
            }
        }
        Action::from_index(best)
    }

    fn sample(&self, s: State, rng: &mut ChaCha8Rng) -> Action {
        let row = self.policy.row(self.grid.index(s));
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (a, &p) in row.iter().enumerate() {
            if p > 0.0 {
                cum += p;
                last_positive = a;
                if u < cum {
                    return Action::from_index(a);
                }
            }
        }
        Action::from_index(last_positive)
    }

    /// Rolls out from the planar cell `start` for at most `max_steps` moves.
    pub fn rollout(&self, start: State, max_steps: usize, mode: RolloutMode) -> Result<Rollout> {
        if !self.grid.contains_cell(start) {
            return Err(Error::StateOutOfBounds(start.to_string()));
        }
        let start = if self.grid.is_time_augmented() { start.planar().at_time(0) } else { start.planar() };
        if max_steps < start.chebyshev(self.goal) {
            return Err(Error::config(format!(
                "step budget {max_steps} is below the distance {} to the goal",
                start.chebyshev(self.goal)
            )));
        }
        match mode {
            RolloutMode::Deterministic => Ok(self.rollout_greedy(start, max_steps)),
            RolloutMode::Stochastic { seed, retries } => {
                if self.grid.is_time_augmented() {
                    return Err(Error::config("stochastic rollouts need a planar grid"));
                }
                if retries == 0 {
                    return Err(Error::config("stochastic rollouts need at least one attempt"));
                }
                Ok(self.rollout_sampled(start, max_steps, seed, retries))
            }
        }
    }

    fn rollout_greedy(&self, start: State, max_steps: usize) -> Rollout {
        let mut states = vec![start];
        let mut seen = HashSet::from([start]);
        let mut s = start;
        let mut reached_goal = self.at_goal(s);
        while !reached_goal && states.len() <= max_steps {
            let next = match self.grid.successor(s, self.greedy(s)) {
                Ok(n) => n,
                Err(_) => break,
            };
            if !seen.insert(next) {
                break;
            }
            states.push(next);
            s = next;
            reached_goal = self.at_goal(s);
        }
        Rollout { states, reached_goal, attempts: 1 }
    }

    fn rollout_sampled(&self, start: State, max_steps: usize, seed: u64, retries: usize) -> Rollout {
        let mut best: Option<(usize, Vec<State>)> = None;
        for attempt in 0..retries {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(attempt as u64);
            let mut states = vec![start];
            let mut s = start;
            while !self.at_goal(s) && states.len() <= max_steps {
                s = self.grid.planar_successor(s, self.sample(s, &mut rng));
                states.push(s);
            }
            if self.at_goal(s) {
                return Rollout { states, reached_goal: true, attempts: attempt + 1 };
            }
            let miss = s.chebyshev(self.goal);
            if best.as_ref().is_none_or(|(m, _)| miss < *m) {
                best = Some((miss, states));
            }
        }
        let (_, states) = best.expect("at least one attempt");
        Rollout { states, reached_goal: false, attempts: retries }
    }
}

/// A path with `missing` unknown states between `before` and `after`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gap {
    pub before: Vec<State>,
    pub missing: usize,
    pub after: Vec<State>,
}

impl Gap {
    pub fn new(before: Vec<State>, missing: usize, after: Vec<State>) -> Result<Self> {
        if before.is_empty() || after.is_empty() {
            return Err(Error::EmptyInput("a gap needs an anchor on each side"));
        }
        Ok(Self { before, missing, after })
    }

    pub fn start(&self) -> State {
        *self.before.last().expect("checked non-empty")
    }

    pub fn end(&self) -> State {
        self.after[0]
    }

    /// Moves needed to cross the gap.
    pub fn steps(&self) -> usize {
        self.missing + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapSettings {
    pub mode: RolloutMode,
    /// Planar step budget as a multiple of the gap's move count.
    pub budget_factor: usize,
}

impl Default for GapSettings {
    fn default() -> Self {
        Self { mode: RolloutMode::Deterministic, budget_factor: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapFill {
    /// The whole path: `before`, the generated interior, `after`.
    pub path: Vec<State>,
    /// Generated states strictly between the anchors.
    pub interior: Vec<State>,
    pub reached_goal: bool,
    pub attempts: usize,
}

/// Fills a gap, keeping the best attempt even if the far anchor was not reached.
pub fn fill_gap(
    spec: &GridSpec,
    bank: &FeatureBank,
    theta: &Theta,
    method: &Method,
    gap: &Gap,
    settings: &GapSettings,
) -> Result<GapFill> {
    let (start, end) = (gap.start().planar(), gap.end().planar());
    for s in [start, end] {
        if !spec.contains_cell(s) {
            return Err(Error::StateOutOfBounds(s.to_string()));
        }
    }
    let join = |interior: Vec<State>, reached_goal, attempts| {
        let mut path: Vec<State> = gap.before.iter().map(|s| s.planar()).collect();
        path.extend(&interior);
        path.extend(gap.after.iter().map(|s| s.planar()));
        GapFill { path, interior, reached_goal, attempts }
    };
    if gap.missing == 0 && start.is_adjacent_or_same(end) {
        return Ok(join(Vec::new(), true, 0));
    }

    let features = bank.for_goal(spec, end)?;
    let steps = gap.steps();
    let planned = plan_to_goal(spec, &features, theta, method, end, steps)?;
    let budget = match method.space {
        StateSpace::Planar => (steps * settings.budget_factor.max(1)).max(start.chebyshev(end)),
        StateSpace::TimeAugmented { .. } if steps < start.chebyshev(end) => {
            return Err(Error::GapUnreachable { attempts: 0 })
        }
        StateSpace::TimeAugmented { .. } => steps,
    };
    let rollout = planned.rollout(start, budget, settings.mode)?;
    let mut interior: Vec<State> = rollout.states[1..].iter().map(|s| s.planar()).collect();
    if rollout.reached_goal {
        interior.pop();
    }
    Ok(join(interior, rollout.reached_goal, rollout.attempts))
}

/// Fills a gap, failing with [`Error::GapUnreachable`] if no attempt reached the far anchor.
pub fn interpolate_gap(
    spec: &GridSpec,
    bank: &FeatureBank,
    theta: &Theta,
    method: &Method,
    gap: &Gap,
    settings: &GapSettings,
) -> Result<Vec<State>> {
    let fill = fill_gap(spec, bank, theta, method, gap, settings)?;
    if fill.reached_goal {
        Ok(fill.path)
    } else {
        Err(Error::GapUnreachable { attempts: fill.attempts })
    }
}
