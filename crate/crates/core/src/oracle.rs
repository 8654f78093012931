//! Brute-force references for small problems: exhaustive enumeration of
//! action sequences, exact path likelihoods and feature expectations, and
//! policy-weighted visitation counts.
//!
//! Everything here is exponential in the horizon and meant for tests.

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, State};
use crate::irl::path_feature_counts;
use crate::method::Arrival;
use crate::planner::Policy;
use crate::reward::{DistanceNorm, FeatureMap, RewardTable, Theta};

/// Upper bound on `8^horizon` accepted by the enumerators.
pub const MAX_PATHS: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct EnumerationProblem {
    pub spec: GridSpec,
    /// Maximum number of moves.
    pub horizon: usize,
    pub start: State,
    pub goal: State,
    pub theta: Theta,
    pub features: FeatureMap,
    pub norm: DistanceNorm,
    /// `Within`: a path ends on its first visit to the goal.
    /// `Exact`: paths have exactly `horizon` moves and end on the goal.
    pub arrival: Arrival,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedPath {
    pub states: Vec<State>,
    pub actions: Vec<Action>,
    pub reward: f64,
    pub probability: f64,
}

fn guard(horizon: usize) -> Result<()> {
    let paths = 8u64.checked_pow(horizon as u32).unwrap_or(u64::MAX);
    if paths > MAX_PATHS {
        return Err(Error::TooLarge { paths, limit: MAX_PATHS });
    }
    Ok(())
}

/// Every goal-reaching action sequence from the start, with its cumulative
/// reward and its probability under `exp(reward)` normalized over the set.
pub fn enumerate_paths(p: &EnumerationProblem) -> Result<Vec<EnumeratedPath>> {
    guard(p.horizon)?;
    let spec = p.spec.planar();
    for s in [p.start, p.goal] {
        if !spec.contains_cell(s) {
            return Err(Error::StateOutOfBounds(s.to_string()));
        }
    }
    let rewards = RewardTable::build(&spec, &p.theta, &p.features, p.norm)?;
    let mut out = Vec::new();
    let mut states = vec![p.start.planar()];
    let mut actions = Vec::new();
    walk(p, &spec, &rewards, &mut states, &mut actions, 0.0, &mut out);

    let max = out.iter().map(|e| e.reward).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = out.iter().map(|e| (e.reward - max).exp()).sum();
    for e in &mut out {
        e.probability = (e.reward - max).exp() / z;
    }
    Ok(out)
}

fn walk(
    p: &EnumerationProblem,
    spec: &GridSpec,
    rewards: &RewardTable,
    states: &mut Vec<State>,
    actions: &mut Vec<Action>,
    reward: f64,
    out: &mut Vec<EnumeratedPath>,
) {
    let s = *states.last().expect("non-empty");
    let at_goal = s == p.goal.planar();
    let done = match p.arrival {
        Arrival::Within => at_goal,
        Arrival::Exact => actions.len() == p.horizon,
    };
    if done {
        if at_goal {
            out.push(EnumeratedPath { states: states.clone(), actions: actions.clone(), reward, probability: 0.0 });
        }
        return;
    }
    if actions.len() == p.horizon {
        return;
    }
    let cell = spec.cell_index(s);
    for a in Action::ALL {
        states.push(spec.planar_successor(s, a));
        actions.push(a);
        walk(p, spec, rewards, states, actions, reward + rewards.get(cell, a.index()), out);
        states.pop();
        actions.pop();
    }
}

/// `log Σ exp(R(ξ))` over the enumerated paths; `-inf` when none reach the goal.
pub fn log_partition(p: &EnumerationProblem) -> Result<f64> {
    let paths = enumerate_paths(p)?;
    let max = paths.iter().map(|e| e.reward).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(max);
    }
    Ok(max + paths.iter().map(|e| (e.reward - max).exp()).sum::<f64>().ln())
}

/// Probability of a state sequence: the summed probability of every action
/// sequence that produces it.
fn state_path_probability(paths: &[EnumeratedPath], demo: &[State]) -> f64 {
    paths.iter().filter(|e| e.states == demo).map(|e| e.probability).sum()
}

/// Mean log-probability of the demonstrations.
pub fn exact_log_likelihood(p: &EnumerationProblem, demos: &[Vec<State>]) -> Result<f64> {
    if demos.is_empty() {
        return Err(Error::EmptyInput("no demonstrations"));
    }
    let paths = enumerate_paths(p)?;
    let mut total = 0.0;
    for d in demos {
        let prob = state_path_probability(&paths, d);
        if prob <= 0.0 {
            return Err(Error::DemoInfeasible);
        }
        total += prob.ln();
    }
    Ok(total / demos.len() as f64)
}

/// Expected feature counts over the path distribution, terminal state included.
pub fn exact_feature_expectation(p: &EnumerationProblem) -> Result<Vec<f64>> {
    let paths = enumerate_paths(p)?;
    let mut out = vec![0.0; p.features.n_features()];
    for e in &paths {
        for (o, c) in out.iter_mut().zip(path_feature_counts(&e.states, &p.features, p.norm)) {
            *o += e.probability * c;
        }
    }
    Ok(out)
}

/// Visitation counts by enumerating every action sequence of `n_steps - 1`
/// moves and weighting it by the product of its policy probabilities.
///
/// A sequence stops at the goal (on the goal's layer if it carries one);
/// states visited before that count toward the total.
pub fn enumerate_visitation(
    policy: &Policy,
    spec: &GridSpec,
    start: State,
    goal: State,
    n_steps: usize,
) -> Result<(Vec<f64>, f64)> {
    if n_steps == 0 {
        return Err(Error::config("need at least one step"));
    }
    guard(n_steps - 1)?;
    let mut d = vec![0.0; spec.n_cells()];
    let mut absorbed = 0.0;
    let mut stack = vec![(start.planar(), 0usize, 1.0f64)];
    while let Some((s, layer, w)) = stack.pop() {
        let at_goal = s == goal.planar() && goal.z.is_none_or(|z| z == layer);
        if at_goal {
            absorbed += w;
            continue;
        }
        d[spec.cell_index(s)] += w;
        if layer + 1 == n_steps {
            continue;
        }
        let row_index = if spec.is_time_augmented() { layer * spec.n_cells() } else { 0 } + spec.cell_index(s);
        let row = policy.row(row_index);
        for a in Action::ALL {
            let pa = row[a.index()];
            if pa > 0.0 {
                stack.push((spec.planar().planar_successor(s, a), layer + 1, w * pa));
            }
        }
    }
    Ok((d, absorbed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(w: usize, h: usize, horizon: usize, start: State, goal: State) -> EnumerationProblem {
        let spec = GridSpec::unit(w, h).unwrap();
        EnumerationProblem {
            features: FeatureMap::constant(&spec),
            spec,
            horizon,
            start,
            goal,
            theta: Theta::new(vec![-1.0]).unwrap(),
            norm: DistanceNorm::None,
            arrival: Arrival::Within,
        }
    }

    #[test]
    fn corridor_has_one_path() {
        let p = problem(3, 1, 2, State::new(0, 0), State::new(2, 0));
        let paths = enumerate_paths(&p).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].probability, 1.0);
        assert_eq!(exact_log_likelihood(&p, &[paths[0].states.clone()]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_two_by_two_is_equiprobable() {
        // Equal-length paths under a uniform reward all share one total reward.
        let mut p = problem(2, 2, 2, State::new(0, 0), State::new(1, 1));
        p.arrival = Arrival::Exact;
        let paths = enumerate_paths(&p).unwrap();
        let first = paths[0].probability;
        assert!(paths.iter().all(|e| (e.probability - first).abs() < 1e-15));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = problem(3, 3, 4, State::new(0, 0), State::new(2, 1));
        let total: f64 = enumerate_paths(&p).unwrap().iter().map(|e| e.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_equiprobable_state_paths() {
        let mut p = problem(2, 2, 1, State::new(0, 0), State::new(1, 1));
        assert_eq!(enumerate_paths(&p).unwrap().len(), 1);
        // Mirror-image two-move paths are equally likely.
        p.horizon = 2;
        let a = vec![State::new(0, 0), State::new(1, 0), State::new(1, 1)];
        let b = vec![State::new(0, 0), State::new(0, 1), State::new(1, 1)];
        let la = exact_log_likelihood(&p, &[a]).unwrap();
        let lb = exact_log_likelihood(&p, &[b]).unwrap();
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn infeasible_demo() {
        let p = problem(3, 1, 2, State::new(0, 0), State::new(2, 0));
        let demo = vec![State::new(0, 0), State::new(1, 0)];
        assert!(matches!(exact_log_likelihood(&p, &[demo]), Err(Error::DemoInfeasible)));
    }

    #[test]
    fn guard_rejects_long_horizons() {
        let p = problem(3, 3, 7, State::new(0, 0), State::new(2, 2));
        assert!(matches!(enumerate_paths(&p), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn exact_arrival_counts_full_length_only() {
        let mut p = problem(3, 1, 3, State::new(0, 0), State::new(2, 0));
        p.arrival = Arrival::Exact;
        let paths = enumerate_paths(&p).unwrap();
        assert!(paths.iter().all(|e| e.actions.len() == 3 && *e.states.last().unwrap() == State::new(2, 0)));
        assert!(!paths.is_empty());
    }

    #[test]
    fn visitation_of_east_policy() {
        let spec = GridSpec::unit(4, 1).unwrap();
        let (d, absorbed) =
            enumerate_visitation(&Policy::constant(4, Action::E), &spec, State::new(0, 0), State::new(3, 0), 5).unwrap();
        assert_eq!(d, vec![1.0, 1.0, 1.0, 0.0]);
        assert_eq!(absorbed, 1.0);
    }
}
