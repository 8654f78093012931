//! Backward pass: value iteration toward an absorbing goal, producing
//! action values `Q`, state values `V` and a stochastic policy.
//!
//! Planar grids iterate synchronous sweeps until the largest change of `V`
//! drops below the tolerance. Time-augmented grids run the same synchronous
//! sweep over the whole layered volume exactly `horizon - 1` times, after
//! which every layer holds its exact finite-horizon value.
//!
//! An optional Gaussian blur of `V` can be applied after every backup.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, State};
use crate::reward::{DistanceNorm, FeatureMap, RewardTable, Theta};

const A: usize = Action::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackupOperator {
    /// `log Σ_a exp Q(s, a)`.
    SoftmaxExact,
    /// `max_a Q + log(1 + exp(min_a Q - max_a Q))`.
    SoftmaxMaxMin,
    /// `max_a Q`.
    HardMax,
}

impl BackupOperator {
    pub fn apply(self, q: &[f64]) -> f64 {
        let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY || max.is_nan() {
            return max;
        }
        match self {
            BackupOperator::HardMax => max,
            BackupOperator::SoftmaxExact => {
                let sum: f64 = q.iter().map(|&x| (x - max).exp()).sum();
                max + sum.ln()
            }
            BackupOperator::SoftmaxMaxMin => {
                let min = q.iter().copied().fold(f64::INFINITY, f64::min);
                max + (min - max).exp().ln_1p()
            }
        }
    }
}

/// Normalized, reflection-symmetric Gaussian weights on a `(2r+1)^2` stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    radius: usize,
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(radius: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config("kernel sigma must be positive"));
        }
        let side = 2 * radius + 1;
        let r = radius as i64;
        let mut weights = Vec::with_capacity(side * side);
        for dy in -r..=r {
            for dx in -r..=r {
                weights.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { radius, sigma, weights })
    }

    /// Radius 0: the delta kernel.
    pub fn identity() -> Self {
        Self { radius: 0, sigma: 1.0, weights: vec![1.0] }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn weight(&self, dx: i64, dy: i64) -> f64 {
        let r = self.radius as i64;
        let side = 2 * r + 1;
        self.weights[((dy + r) * side + (dx + r)) as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Default for GaussianKernel {
    fn default() -> Self {
        Self::new(1, 1.0).expect("default kernel is valid")
    }
}

/// Symmetric (half-sample) reflection of an index into `0..n`.
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Blurs a planar value field with `kernel`.
///
/// Borders are reflect-padded. `-inf` cells carry no mass: the kernel is
/// renormalized over finite neighbours, and a neighbourhood with no finite
/// value stays `-inf`.
pub fn convolve_v(v: &[f64], width: usize, height: usize, kernel: &GaussianKernel) -> Vec<f64> {
    debug_assert_eq!(v.len(), width * height);
    let r = kernel.radius as i64;
    let (w, h) = (width as i64, height as i64);
    let mut out = vec![f64::NEG_INFINITY; v.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut mass = 0.0;
            for dy in -r..=r {
                let sy = reflect(y + dy, h);
                for dx in -r..=r {
                    let val = v[sy * width + reflect(x + dx, w)];
                    if val.is_finite() {
                        let k = kernel.weight(dx, dy);
                        acc += k * val;
                        mass += k;
                    }
                }
            }
            if mass > 0.0 {
                out[(y * w + x) as usize] = acc / mass;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub backup: BackupOperator,
    pub norm: DistanceNorm,
    pub kernel: Option<GaussianKernel>,
    /// Sweep cap for planar grids; `None` means `10 * (width + height)`.
    pub max_iters: Option<usize>,
    pub tol: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { backup: BackupOperator::HardMax, norm: DistanceNorm::None, kernel: None, max_iters: None, tol: 1e-6 }
    }
}

impl PlannerConfig {
    pub fn sweep_cap(&self, spec: &GridSpec) -> usize {
        self.max_iters.unwrap_or(10 * (spec.width() + spec.height()))
    }
}

/// Output of the backward pass, indexed by flat state index (see [`GridSpec::index`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueArtifacts {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Wall time of the whole pass, in seconds.
    pub seconds: f64,
}

impl ValueArtifacts {
    pub fn n_states(&self) -> usize {
        self.v.len()
    }

    pub fn q_row(&self, state: usize) -> &[f64] {
        &self.q[state * A..(state + 1) * A]
    }

    pub fn seconds_per_sweep(&self) -> f64 {
        self.seconds / self.iterations_run.max(1) as f64
    }
}

/// Plans toward `goal`.
///
/// In time-augmented mode a goal carrying a time index must be reached at
/// exactly that layer; a goal without one is absorbing at every layer.
pub fn backward_pass(
    spec: &GridSpec,
    goal: State,
    theta: &Theta,
    features: &FeatureMap,
    cfg: &PlannerConfig,
) -> Result<ValueArtifacts> {
    let rewards = RewardTable::build(spec, theta, features, cfg.norm)?;
    backward_pass_with_rewards(spec, goal, &rewards, cfg)
}

pub fn backward_pass_with_rewards(
    spec: &GridSpec,
    goal: State,
    rewards: &RewardTable,
    cfg: &PlannerConfig,
) -> Result<ValueArtifacts> {
    if !spec.contains_cell(goal) {
        return Err(Error::StateOutOfBounds(goal.to_string()));
    }
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(Error::config("tolerance must be positive"));
    }
    if rewards.as_slice().len() != spec.n_cells() * A {
        return Err(Error::DimensionMismatch { expected: spec.n_cells() * A, got: rewards.as_slice().len() });
    }
    match spec.horizon() {
        None => {
            if goal.z.is_some() {
                return Err(Error::StateOutOfBounds(goal.to_string()));
            }
            let cap = cfg.sweep_cap(spec);
            if cap == 0 {
                return Err(Error::config("max_iters must be at least 1"));
            }
            Ok(planar_pass(spec, goal, rewards, cfg, cap))
        }
        Some(h) => {
            if let Some(z) = goal.z {
                if z >= h {
                    return Err(Error::StateOutOfBounds(goal.to_string()));
                }
            }
            Ok(layered_pass(spec, goal, rewards, cfg, h))
        }
    }
}

/// Largest change between two value fields; a cell that changes finiteness
/// counts as an infinite change.
fn max_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter().zip(new).fold(0.0, |acc, (&a, &b)| {
        let d = if a.is_finite() && b.is_finite() {
            (a - b).abs()
        } else if a == b {
            0.0
        } else {
            f64::INFINITY
        };
        acc.max(d)
    })
}

fn planar_pass(spec: &GridSpec, goal: State, rewards: &RewardTable, cfg: &PlannerConfig, cap: usize) -> ValueArtifacts {
    let started = Instant::now();
    let n = spec.n_cells();
    let succ = spec.successor_table();
    let g = spec.cell_index(goal);
    let r = rewards.as_slice();

    let mut v = vec![f64::NEG_INFINITY; n];
    v[g] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; n];
    let mut q = vec![f64::NEG_INFINITY; n * A];
    let mut iterations_run = 0;
    let mut converged = false;

    while iterations_run < cap {
        iterations_run += 1;
        for s in 0..n {
            let row = &mut q[s * A..(s + 1) * A];
            for a in 0..A {
                row[a] = r[s * A + a] + v[succ[s * A + a]];
            }
            next[s] = cfg.backup.apply(row);
        }
        next[g] = 0.0;
        if let Some(kernel) = &cfg.kernel {
            next = convolve_v(&next, spec.width(), spec.height(), kernel);
            next[g] = 0.0;
        }
        let delta = max_change(&v, &next);
        std::mem::swap(&mut v, &mut next);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    ValueArtifacts { q, v, iterations_run, converged, seconds: started.elapsed().as_secs_f64() }
}

fn layered_pass(spec: &GridSpec, goal: State, rewards: &RewardTable, cfg: &PlannerConfig, h: usize) -> ValueArtifacts {
    let started = Instant::now();
    let cells = spec.n_cells();
    let n = cells * h;
    let succ = spec.successor_table();
    let g = spec.cell_index(goal);
    let r = rewards.as_slice();

    let pin = |v: &mut [f64]| match goal.z {
        Some(z) => v[z * cells + g] = 0.0,
        None => (0..h).for_each(|z| v[z * cells + g] = 0.0),
    };

    let mut v = vec![f64::NEG_INFINITY; n];
    pin(&mut v);
    let mut next = vec![f64::NEG_INFINITY; n];
    let mut q = vec![f64::NEG_INFINITY; n * A];

    let sweeps = h - 1;
    for _ in 0..sweeps {
        for z in 0..h {
            let base = z * cells;
            for s in 0..cells {
                let row = &mut q[(base + s) * A..(base + s + 1) * A];
                if z + 1 < h {
                    let ahead = &v[(z + 1) * cells..(z + 2) * cells];
                    for a in 0..A {
                        row[a] = r[s * A + a] + ahead[succ[s * A + a]];
                    }
                } else {
                    row.fill(f64::NEG_INFINITY);
                }
                next[base + s] = cfg.backup.apply(row);
            }
        }
        pin(&mut next);
        if let Some(kernel) = &cfg.kernel {
            for z in 0..h {
                let layer = &mut next[z * cells..(z + 1) * cells];
                let blurred = convolve_v(layer, spec.width(), spec.height(), kernel);
                layer.copy_from_slice(&blurred);
            }
            pin(&mut next);
        }
        std::mem::swap(&mut v, &mut next);
    }

    ValueArtifacts { q, v, iterations_run: sweeps, converged: true, seconds: started.elapsed().as_secs_f64() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyRule {
    /// `π(a|s) ∝ exp(Q(s, a) - V(s))`.
    QMinusV,
    /// `π(a|s) ∝ exp(Q(s, a))`.
    QOnly,
}

/// Row-stochastic action probabilities, indexed like [`ValueArtifacts`].
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: Vec<f64>,
}

impl Policy {
    /// Validates that every row is a probability distribution.
    pub fn from_rows(probs: Vec<f64>) -> Result<Self> {
        if !probs.len().is_multiple_of(A) || probs.is_empty() {
            return Err(Error::DimensionMismatch { expected: A, got: probs.len() });
        }
        for row in probs.chunks(A) {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::config("policy rows must be non-negative and sum to 1"));
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize) -> Self {
        Self { probs: vec![1.0 / A as f64; n_states * A] }
    }

    /// Every state takes `action` with probability one.
    pub fn constant(n_states: usize, action: Action) -> Self {
        let mut probs = vec![0.0; n_states * A];
        for s in 0..n_states {
            probs[s * A + action.index()] = 1.0;
        }
        Self { probs }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / A
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * A..(state + 1) * A]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Most probable action; ties go to the earliest action in [`Action::ALL`].
    pub fn argmax(&self, state: usize) -> Action {
        let row = self.row(state);
        let mut best = 0;
        for a in 1..A {
            if row[a] > row[best] {
                best = a;
            }
        }
        Action::from_index(best)
    }
}

/// Row-normalized exponentials of the selected logits.
///
/// Rows are stabilized by subtracting `max_a Q(s, a)`. Since `V(s)` is constant
/// within a row, both rules share that shift and yield the same distribution.
/// States with `V(s) = -inf` or no finite action value get a uniform row.
pub fn make_policy(artifacts: &ValueArtifacts, _rule: PolicyRule) -> Policy {
    let n = artifacts.n_states();
    let mut probs = vec![0.0; n * A];
    for s in 0..n {
        let q = artifacts.q_row(s);
        let out = &mut probs[s * A..(s + 1) * A];
        let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unreachable = artifacts.v[s] == f64::NEG_INFINITY || !max.is_finite();
        if unreachable {
            out.fill(1.0 / A as f64);
            continue;
        }
        // Under QMinusV the logit is Q - V; the per-row shift absorbs V exactly.
        let mut total = 0.0;
        for a in 0..A {
            out[a] = (q[a] - max).exp();
            total += out[a];
        }
        out.iter_mut().for_each(|p| *p /= total);
    }
    Policy { probs }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor() -> (GridSpec, FeatureMap) {
        let spec = GridSpec::unit(3, 1).unwrap();
        let f = FeatureMap::constant(&spec);
        (spec, f)
    }

    #[test]
    fn backups() {
        let q = [-1.0, -2.0, -3.0, f64::NEG_INFINITY, -1.0, -5.0, -1.0, -1.0];
        assert_eq!(BackupOperator::HardMax.apply(&q), -1.0);
        let exact: f64 = q.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((BackupOperator::SoftmaxExact.apply(&q) - exact).abs() < 1e-14);
        // min is -inf, so the correction vanishes.
        assert_eq!(BackupOperator::SoftmaxMaxMin.apply(&q), -1.0);
        let flat = [-2.0; 8];
        assert!((BackupOperator::SoftmaxMaxMin.apply(&flat) - (-2.0 + 2f64.ln())).abs() < 1e-15);
        assert_eq!(BackupOperator::SoftmaxExact.apply(&[f64::NEG_INFINITY; 8]), f64::NEG_INFINITY);
    }

    #[test]
    fn corridor_hard_max_shortest_path() {
        let (spec, f) = corridor();
        let cfg = PlannerConfig::default();
        let art = backward_pass(&spec, State::new(2, 0), &Theta::initial(1), &f, &cfg).unwrap();
        assert!(art.converged);
        assert_eq!(art.v, vec![-2.0, -1.0, 0.0]);
    }

    #[test]
    fn corridor_softmax_exact_fixed_point() {
        // With reward c = e^r per move, A has 1 move to B and 7 self-loops,
        // B has one move each to A and the goal plus 6 self-loops:
        //   a = c b + 7 c a,  b = c + c a + 6 c b.
        let (spec, _) = corridor();
        let r: f64 = -3.0;
        let c = r.exp();
        let b = c / ((1.0 - 6.0 * c) - c * c / (1.0 - 7.0 * c));
        let a = c * b / (1.0 - 7.0 * c);
        let f = FeatureMap::constant(&spec);
        let cfg = PlannerConfig { backup: BackupOperator::SoftmaxExact, tol: 1e-10, max_iters: Some(10_000), ..Default::default() };
        let art = backward_pass(&spec, State::new(2, 0), &Theta::new(vec![r]).unwrap(), &f, &cfg).unwrap();
        assert!(art.converged);
        assert!((art.v[0] - a.ln()).abs() < 1e-9);
        assert!((art.v[1] - b.ln()).abs() < 1e-9);
        assert_eq!(art.v[2], 0.0);
    }

    #[test]
    fn identity_kernel_is_bitwise_noop() {
        let spec = GridSpec::unit(7, 5).unwrap();
        let f = FeatureMap::from_channels(7, 5, &[(0..35).map(|i| ((i * 7) % 11) as f64).collect()]).unwrap();
        let f = f.with_extra_channels(&[vec![1.0; 35]]).unwrap();
        let theta = Theta::new(vec![-0.7, -1.3]).unwrap();
        for backup in [BackupOperator::HardMax, BackupOperator::SoftmaxMaxMin] {
            let plain = PlannerConfig { backup, norm: DistanceNorm::Lp(3.0), ..Default::default() };
            let delta = PlannerConfig { kernel: Some(GaussianKernel::identity()), ..plain.clone() };
            let a = backward_pass(&spec, State::new(3, 2), &theta, &f, &plain).unwrap();
            let b = backward_pass(&spec, State::new(3, 2), &theta, &f, &delta).unwrap();
            assert_eq!(a.v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.v.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            assert_eq!(a.iterations_run, b.iterations_run);
        }
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        for (r, s) in [(1, 1.0), (2, 0.7), (3, 2.5)] {
            let k = GaussianKernel::new(r, s).unwrap();
            assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let ri = r as i64;
            for dy in -ri..=ri {
                for dx in -ri..=ri {
                    assert_eq!(k.weight(dx, dy), k.weight(-dx, dy));
                    assert_eq!(k.weight(dx, dy), k.weight(dx, -dy));
                    assert_eq!(k.weight(dx, dy), k.weight(dy, dx));
                }
            }
        }
        assert!(GaussianKernel::new(1, 0.0).is_err());
    }

    #[test]
    fn convolution_of_constant_field() {
        let k = GaussianKernel::new(2, 1.3).unwrap();
        let v = vec![-4.25; 20];
        let out = convolve_v(&v, 5, 4, &k);
        assert!(out.iter().all(|x| (x + 4.25).abs() < 1e-12));
    }

    #[test]
    fn convolution_skips_negative_infinity() {
        let k = GaussianKernel::new(1, 1.0).unwrap();
        let mut v = vec![f64::NEG_INFINITY; 9];
        v[0] = -2.0;
        let out = convolve_v(&v, 3, 3, &k);
        // Every neighbourhood touching the only finite cell averages to it.
        assert_eq!(out[0], -2.0);
        assert_eq!(out[1], -2.0);
        assert_eq!(out[4], -2.0);
        assert_eq!(out[8], f64::NEG_INFINITY);
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
        assert_eq!(reflect(-3, 1), 0);
    }

    #[test]
    fn policy_examples() {
        let art = ValueArtifacts {
            q: [vec![-3.0; 8], {
                let mut r = vec![f64::NEG_INFINITY; 8];
                r[0] = 0.0;
                r
            }]
            .concat(),
            v: vec![-1.0, 0.0],
            iterations_run: 1,
            converged: true,
            seconds: 0.0,
        };
        let p = make_policy(&art, PolicyRule::QOnly);
        assert!(p.row(0).iter().all(|&x| (x - 0.125).abs() < 1e-15));
        assert_eq!(p.row(1), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p, make_policy(&art, PolicyRule::QMinusV));
    }

    #[test]
    fn unreachable_rows_are_uniform() {
        let art = ValueArtifacts {
            q: vec![f64::NEG_INFINITY; 8],
            v: vec![f64::NEG_INFINITY],
            iterations_run: 1,
            converged: true,
            seconds: 0.0,
        };
        let p = make_policy(&art, PolicyRule::QMinusV);
        assert!(p.row(0).iter().all(|&x| x == 0.125));
    }

    #[test]
    fn argmax_tie_break_order() {
        let p = Policy::from_rows(vec![0.0, 0.25, 0.25, 0.0, 0.25, 0.0, 0.25, 0.0]).unwrap();
        assert_eq!(p.argmax(0), Action::NE);
    }

    #[test]
    fn bad_inputs() {
        let (spec, f) = corridor();
        let th = Theta::initial(1);
        assert!(backward_pass(&spec, State::new(3, 0), &th, &f, &PlannerConfig::default()).is_err());
        let cfg = PlannerConfig { tol: 0.0, ..Default::default() };
        assert!(backward_pass(&spec, State::new(2, 0), &th, &f, &cfg).is_err());
        assert!(backward_pass(&spec, State::new(2, 0), &Theta::initial(2), &f, &PlannerConfig::default()).is_err());
    }

    #[test]
    fn not_converged_is_flagged() {
        let spec = GridSpec::unit(16, 16).unwrap();
        let f = FeatureMap::constant(&spec);
        let cfg = PlannerConfig { max_iters: Some(3), ..Default::default() };
        let art = backward_pass(&spec, State::new(0, 0), &Theta::initial(1), &f, &cfg).unwrap();
        assert!(!art.converged);
        assert_eq!(art.iterations_run, 3);
    }

    #[test]
    fn layered_goal_semantics() {
        // 1x3 corridor, 4 layers: exact arrival at layer 3 versus arrival by layer 3.
        let spec = GridSpec::unit(3, 1).unwrap().with_horizon(4).unwrap();
        let f = FeatureMap::constant(&spec.planar());
        let cfg = PlannerConfig::default();
        let th = Theta::initial(1);
        let exact = backward_pass(&spec, State::new(2, 0).at_time(3), &th, &f, &cfg).unwrap();
        let within = backward_pass(&spec, State::new(2, 0), &th, &f, &cfg).unwrap();
        assert_eq!(exact.iterations_run, 3);
        let start = spec.index(State::new(0, 0).at_time(0));
        // Reaching the goal takes two moves; exact arrival needs a third (wall bump).
        assert_eq!(within.v[start], -2.0);
        assert_eq!(exact.v[start], -3.0);
        // From layer 2 there is one move left: only the neighbour of the goal can arrive.
        assert_eq!(exact.v[spec.index(State::new(0, 0).at_time(2))], f64::NEG_INFINITY);
        assert_eq!(exact.v[spec.index(State::new(1, 0).at_time(2))], -1.0);
    }
}
