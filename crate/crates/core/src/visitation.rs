//! Forward pass: expected state visitation under a policy.

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, State};
use crate::planner::Policy;

const A: usize = Action::COUNT;

#[derive(Debug, Clone, PartialEq)]
pub struct VisitationField {
    /// Summed visitation per planar cell; the goal cell is always zero.
    pub d: Vec<f64>,
    /// Per-step fields `D^(n)` (after goal absorption), when requested.
    pub per_step: Option<Vec<Vec<f64>>>,
    /// Mass absorbed at the goal within the step budget.
    pub absorbed: f64,
}

impl VisitationField {
    pub fn total(&self) -> f64 {
        self.d.iter().sum()
    }
}

/// Propagates unit mass from `start` for `n_steps` steps.
///
/// Step `n` (1-based) first removes the mass sitting on the goal, adds the
/// remainder to the total, then pushes it through the policy. On a
/// time-augmented grid step `n` uses the policy rows of layer `n - 1`; a goal
/// carrying a time index only absorbs at that layer.
pub fn forward_pass(policy: &Policy, spec: &GridSpec, start: State, goal: State, n_steps: usize) -> Result<VisitationField> {
    forward_pass_with(policy, spec, start, goal, n_steps, false)
}

pub fn forward_pass_with(
    policy: &Policy,
    spec: &GridSpec,
    start: State,
    goal: State,
    n_steps: usize,
    keep_steps: bool,
) -> Result<VisitationField> {
    for s in [start, goal] {
        if !spec.contains_cell(s) {
            return Err(Error::StateOutOfBounds(s.to_string()));
        }
    }
    if n_steps == 0 {
        return Err(Error::config("forward pass needs at least one step"));
    }
    if policy.n_states() != spec.n_states() {
        return Err(Error::DimensionMismatch { expected: spec.n_states(), got: policy.n_states() });
    }
    if let Some(h) = spec.horizon() {
        if n_steps > h {
            return Err(Error::HorizonExceeded { z: n_steps - 1, horizon: h });
        }
    }

    let cells = spec.n_cells();
    let succ = spec.successor_table();
    let g = spec.cell_index(goal);
    let absorbs_at = |layer: usize| match goal.z {
        Some(z) => spec.is_time_augmented() && z == layer,
        None => true,
    };
    let layer_offset = |layer: usize| if spec.is_time_augmented() { layer * cells } else { 0 };

    let mut cur = vec![0.0; cells];
    cur[spec.cell_index(start)] = 1.0;
    let mut d = vec![0.0; cells];
    let mut per_step = keep_steps.then(|| Vec::with_capacity(n_steps));
    let mut absorbed = 0.0;

    for n in 1..=n_steps {
        let layer = n - 1;
        if absorbs_at(layer) {
            absorbed += cur[g];
            cur[g] = 0.0;
        }
        d.iter_mut().zip(&cur).for_each(|(t, c)| *t += c);
        if let Some(steps) = per_step.as_mut() {
            steps.push(cur.clone());
        }
        if n == n_steps {
            break;
        }
        let offset = layer_offset(layer);
        let mut next = vec![0.0; cells];
        for s in 0..cells {
            let mass = cur[s];
            if mass == 0.0 {
                continue;
            }
            let row = policy.row(offset + s);
            for a in 0..A {
                next[succ[s * A + a]] += mass * row[a];
            }
        }
        cur = next;
    }

    Ok(VisitationField { d, per_step, absorbed })
}
