//! Linear reward model `r(s) = θ·f(s)` over per-cell features, and the
//! next-state dependent variant `r(s, s') = r(s) / dist_p(s, s')`.

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, State};

/// Per-cell feature vectors, every component in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    n_features: usize,
    // cell-major: values[cell * n_features + k]
    values: Vec<f64>,
}

impl FeatureMap {
    /// Builds a map from raw channels (each `width * height`, row-major),
    /// min-max scaling every channel into `[0, 1]`. A flat channel maps to zero.
    pub fn from_channels(width: usize, height: usize, channels: &[Vec<f64>]) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::EmptyInput("feature map needs at least one channel"));
        }
        let n_cells = width * height;
        let scaled: Vec<Vec<f64>> = channels
            .iter()
            .map(|c| {
                if c.len() != n_cells {
                    return Err(Error::DimensionMismatch { expected: n_cells, got: c.len() });
                }
                min_max_scale(c)
            })
            .collect::<Result<_>>()?;
        Ok(Self::interleave(width, height, &scaled))
    }

    /// Builds a map from channels that are already in `[0, 1]`, without rescaling.
    pub fn from_unit_channels(width: usize, height: usize, channels: &[Vec<f64>]) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::EmptyInput("feature map needs at least one channel"));
        }
        for c in channels {
            if c.len() != width * height {
                return Err(Error::DimensionMismatch { expected: width * height, got: c.len() });
            }
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::config("feature values must lie in [0, 1]"));
            }
        }
        Ok(Self::interleave(width, height, channels))
    }

    fn interleave(width: usize, height: usize, channels: &[Vec<f64>]) -> Self {
        let n_cells = width * height;
        let n_features = channels.len();
        let mut values = vec![0.0; n_cells * n_features];
        for (k, c) in channels.iter().enumerate() {
            for (cell, &v) in c.iter().enumerate() {
                values[cell * n_features + k] = v;
            }
        }
        Self { width, height, n_features, values }
    }

    pub fn constant(spec: &GridSpec) -> Self {
        Self::interleave(spec.width(), spec.height(), &[vec![1.0; spec.n_cells()]])
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    /// Feature vector of a planar cell (by row-major index).
    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.n_features..(cell + 1) * self.n_features]
    }

    pub fn at(&self, s: State) -> &[f64] {
        self.cell(s.y * self.width + s.x)
    }

    pub fn channel(&self, k: usize) -> Vec<f64> {
        (0..self.n_cells()).map(|c| self.values[c * self.n_features + k]).collect()
    }

    pub fn check_grid(&self, spec: &GridSpec) -> Result<()> {
        if self.width != spec.width() || self.height != spec.height() {
            return Err(Error::DimensionMismatch { expected: spec.n_cells(), got: self.n_cells() });
        }
        Ok(())
    }

    /// Appends channels (already in `[0, 1]`) after the existing ones.
    pub fn with_extra_channels(&self, extra: &[Vec<f64>]) -> Result<Self> {
        let mut channels: Vec<Vec<f64>> = (0..self.n_features).map(|k| self.channel(k)).collect();
        channels.extend(extra.iter().cloned());
        Self::from_unit_channels(self.width, self.height, &channels)
    }
}

fn min_max_scale(channel: &[f64]) -> Result<Vec<f64>> {
    if channel.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("feature channel contains non-finite values"));
    }
    let lo = channel.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = channel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(if span > 0.0 {
        channel.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; channel.len()]
    })
}

/// Euclidean distance of every cell to `goal`, divided by the grid diagonal.
pub fn goal_distance_channel(spec: &GridSpec, goal: State) -> Vec<f64> {
    let w = spec.width() as f64;
    let h = spec.height() as f64;
    let diag = ((w - 1.0).powi(2) + (h - 1.0).powi(2)).sqrt().max(1.0);
    (0..spec.n_cells())
        .map(|idx| {
            let s = spec.cell_at(idx);
            let dx = s.x as f64 - goal.x as f64;
            let dy = s.y as f64 - goal.y as f64;
            ((dx * dx + dy * dy).sqrt() / diag).min(1.0)
        })
        .collect()
}

/// Static feature channels plus an optional goal-dependent distance channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    base: FeatureMap,
    goal_distance: bool,
}

impl FeatureBank {
    pub fn new(base: FeatureMap, goal_distance: bool) -> Self {
        Self { base, goal_distance }
    }

    /// Constant channel plus normalized distance-to-goal.
    pub fn default_for(spec: &GridSpec) -> Self {
        Self::new(FeatureMap::constant(spec), true)
    }

    pub fn n_features(&self) -> usize {
        self.base.n_features() + usize::from(self.goal_distance)
    }

    pub fn base(&self) -> &FeatureMap {
        &self.base
    }

    pub fn has_goal_distance(&self) -> bool {
        self.goal_distance
    }

    pub fn for_goal(&self, spec: &GridSpec, goal: State) -> Result<FeatureMap> {
        self.base.check_grid(spec)?;
        if self.goal_distance {
            self.base.with_extra_channels(&[goal_distance_channel(spec, goal)])
        } else {
            Ok(self.base.clone())
        }
    }
}

/// Reward weights; every component finite and strictly negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta(Vec<f64>);

impl Theta {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput("theta needs at least one weight"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w < 0.0)) {
            return Err(Error::config("theta weights must be finite and strictly negative"));
        }
        Ok(Self(weights))
    }

    pub(crate) fn unchecked(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn is_valid(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|w| w.is_finite() && *w < 0.0)
    }

    /// The standard starting point: every weight `-1`.
    pub fn initial(n_features: usize) -> Self {
        Self(vec![-1.0; n_features.max(1)])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Selects the `L_p` modifier applied to transition rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceNorm {
    /// Plain state reward `r(s)`.
    None,
    /// `r(s) / dist_p(s, s')`, `p >= 1`.
    Lp(f64),
}

impl DistanceNorm {
    pub fn lp(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::config(format!("L_p norm needs finite p >= 1, got {p}")));
        }
        Ok(DistanceNorm::Lp(p))
    }

    /// Factor multiplying `r(s)` for the move `s -> s'`.
    pub fn scale(self, s: State, s_next: State) -> f64 {
        match self {
            DistanceNorm::None => 1.0,
            DistanceNorm::Lp(p) => 1.0 / dist_p(s, s_next, p),
        }
    }
}

pub fn state_reward(s: State, theta: &Theta, features: &FeatureMap) -> Result<f64> {
    if theta.len() != features.n_features() {
        return Err(Error::DimensionMismatch { expected: features.n_features(), got: theta.len() });
    }
    Ok(dot(theta.weights(), features.at(s)))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `L_p` distance between two planar cells; a self-transition counts as one axis step.
pub fn dist_p(s: State, s_next: State, p: f64) -> f64 {
    let dx = s.x.abs_diff(s_next.x) as f64;
    let dy = s.y.abs_diff(s_next.y) as f64;
    if dx == 0.0 && dy == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return dx + dy;
    }
    if p == 2.0 {
        return dx.hypot(dy);
    }
    (dx.powf(p) + dy.powf(p)).powf(1.0 / p)
}

pub fn transition_reward(
    s: State,
    s_next: State,
    theta: &Theta,
    features: &FeatureMap,
    norm: DistanceNorm,
) -> Result<f64> {
    Ok(state_reward(s, theta, features)? * norm.scale(s, s_next))
}

/// `r(s, successor(s, a))` for every planar cell and action, action-minor.
#[derive(Debug, Clone)]
pub struct RewardTable {
    rewards: Vec<f64>,
}

impl RewardTable {
    pub fn build(spec: &GridSpec, theta: &Theta, features: &FeatureMap, norm: DistanceNorm) -> Result<Self> {
        features.check_grid(spec)?;
        if theta.len() != features.n_features() {
            return Err(Error::DimensionMismatch { expected: features.n_features(), got: theta.len() });
        }
        let mut rewards = Vec::with_capacity(spec.n_cells() * Action::COUNT);
        for idx in 0..spec.n_cells() {
            let s = spec.cell_at(idx);
            let r = dot(theta.weights(), features.cell(idx));
            for a in Action::ALL {
                rewards.push(r * norm.scale(s, spec.planar_successor(s, a)));
            }
        }
        Ok(Self { rewards })
    }

    #[inline]
    pub fn get(&self, cell: usize, action: usize) -> f64 {
        self.rewards[cell * Action::COUNT + action]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rewards
    }
}
