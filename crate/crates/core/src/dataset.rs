//! Synthetic datasets, gap masking, projection of recorded trajectories onto
//! the grid, and the straight-line baseline.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::{plan_to_goal, Gap, RolloutMode};
use crate::grid::{project_trajectory, GridSpec, State};
use crate::io::{path_to_raw, RawTrajectory, Sample};
use crate::method::Method;
use crate::planner::{BackupOperator, PlannerConfig, PolicyRule};
use crate::reward::{FeatureBank, FeatureMap, Theta};

/// Constant channel, min-max scaled raster channels, and optionally the
/// distance-to-goal channel.
pub fn feature_bank(spec: &GridSpec, rasters: &[Vec<f64>], goal_distance: bool) -> Result<FeatureBank> {
    let constant = FeatureMap::constant(spec);
    let base = if rasters.is_empty() {
        constant
    } else {
        let scaled = FeatureMap::from_channels(spec.width(), spec.height(), rasters)?;
        let extra: Vec<Vec<f64>> = (0..scaled.n_features()).map(|k| scaled.channel(k)).collect();
        constant.with_extra_channels(&extra)?
    };
    Ok(FeatureBank::new(base, goal_distance))
}

/// A smooth random cost surface: a sum of Gaussian bumps.
pub fn terrain(spec: &GridSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (spec.width() as f64, spec.height() as f64);
    let n_bumps = (spec.n_cells() / 64).max(3);
    let bumps: Vec<(f64, f64, f64)> = (0..n_bumps)
        .map(|_| {
            let sigma = rng.gen_range(0.08..0.2) * w.max(h);
            (rng.gen_range(0.0..w), rng.gen_range(0.0..h), sigma)
        })
        .collect();
    (0..spec.n_cells())
        .map(|idx| {
            let s = spec.cell_at(idx);
            let (x, y) = (s.x as f64 + 0.5, s.y as f64 + 0.5);
            bumps.iter().map(|&(cx, cy, sg)| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sg * sg)).exp()).sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Weights over (constant, terrain, distance-to-goal).
    pub true_theta: Theta,
    /// Minimum Chebyshev distance between start and goal.
    pub min_distance: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// Weights of the built-in demonstrator.
    pub fn default_theta() -> Theta {
        Theta::new(vec![-2.2, -10.0, -0.5]).expect("valid constant")
    }

    pub fn for_grid(spec: &GridSpec, seed: u64) -> Self {
        Self {
            n_train: 43,
            n_test: 10,
            true_theta: Self::default_theta(),
            min_distance: (spec.width().max(spec.height()) / 2).max(2),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub terrain: Vec<f64>,
    pub train: Vec<Vec<State>>,
    pub test: Vec<Vec<State>>,
}

/// The behaviour model used to draw demonstrations: exact soft values and
/// the matching stochastic policy.
pub fn demonstrator() -> Method {
    Method {
        planner: PlannerConfig { backup: BackupOperator::SoftmaxExact, ..Default::default() },
        policy: PolicyRule::QMinusV,
        ..Default::default()
    }
}

fn collapse_repeats(path: &[State]) -> Vec<State> {
    let mut out: Vec<State> = Vec::with_capacity(path.len());
    for &s in path {
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}

/// Samples demonstrations from the demonstrator under `cfg.true_theta`
/// between random start and goal cells.
pub fn synthesize(spec: &GridSpec, cfg: &SynthConfig) -> Result<SynthDataset> {
    let spec = spec.planar();
    let min_distance = cfg.min_distance.min(spec.width().max(spec.height()) - 1);
    let terrain = terrain(&spec, cfg.seed);
    let bank = feature_bank(&spec, std::slice::from_ref(&terrain), true)?;
    if cfg.true_theta.len() != bank.n_features() {
        return Err(Error::DimensionMismatch { expected: bank.n_features(), got: cfg.true_theta.len() });
    }
    let method = demonstrator();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_da7a);
    let total = cfg.n_train + cfg.n_test;
    let mut paths = Vec::with_capacity(total);
    let mut tries = 0usize;
    while paths.len() < total {
        tries += 1;
        if tries > 50 * (total + 1) {
            return Err(Error::config("could not sample enough demonstrations on this grid"));
        }
        let cell = |rng: &mut ChaCha8Rng| State::new(rng.gen_range(0..spec.width()), rng.gen_range(0..spec.height()));
        let (start, goal) = (cell(&mut rng), cell(&mut rng));
        let dist = start.chebyshev(goal);
        if dist < min_distance {
            continue;
        }
        let features = bank.for_goal(&spec, goal)?;
        let planned = plan_to_goal(&spec, &features, &cfg.true_theta, &method, goal, dist)?;
        let mode = RolloutMode::Stochastic { seed: rng.gen(), retries: 20 };
        let r = planned.rollout(start, 4 * dist, mode)?;
        if !r.reached_goal {
            continue;
        }
        let path = collapse_repeats(&r.states);
        if path.len() >= 5 {
            paths.push(path);
        }
    }
    let test = paths.split_off(cfg.n_train);
    Ok(SynthDataset { terrain, train: paths, test })
}

pub fn paths_to_raw(spec: &GridSpec, prefix: &str, paths: &[Vec<State>]) -> Vec<RawTrajectory> {
    paths.iter().enumerate().map(|(i, p)| path_to_raw(spec, &format!("{prefix}{i}"), p)).collect()
}

/// A contiguous run of removed samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapMask {
    pub start: usize,
    pub len: usize,
}

/// Length of the gap cut from a trajectory of `n` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapLength {
    Fraction(f64),
    Fixed(usize),
}

impl GapLength {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            GapLength::Fraction(f) => (f * n as f64).round() as usize,
            GapLength::Fixed(k) => k,
        }
    }
}

/// Checks that a mask keeps both endpoints.
pub fn check_mask(n: usize, mask: GapMask) -> Result<()> {
    if mask.len > 0 && (mask.start == 0 || mask.start + mask.len >= n) {
        return Err(Error::TooShort(format!(
            "gap of {} at {} does not fit inside a trajectory of {n}",
            mask.len, mask.start
        )));
    }
    Ok(())
}

/// Blanks `mask` in a trajectory; the rows stay, with empty coordinates.
pub fn apply_mask(traj: &RawTrajectory, mask: GapMask) -> Result<RawTrajectory> {
    check_mask(traj.samples.len(), mask)?;
    let mut out = traj.clone();
    for s in &mut out.samples[mask.start..mask.start + mask.len] {
        s.point = None;
    }
    Ok(out)
}

/// Seeded placement of one interior gap in a trajectory of `n` samples;
/// `index` selects an independent random stream per trajectory.
pub fn place_mask(n: usize, length: GapLength, seed: u64, index: usize) -> Result<GapMask> {
    let len = length.resolve(n);
    if len == 0 {
        return Ok(GapMask { start: 1, len: 0 });
    }
    if len + 2 > n {
        return Err(Error::TooShort(format!("{n} samples cannot hold a gap of {len} between two anchors")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    Ok(GapMask { start: rng.gen_range(1..=n - 1 - len), len })
}

/// Cuts one seeded, interior gap from every trajectory.
pub fn mask_gaps(trajs: &[RawTrajectory], length: GapLength, seed: u64) -> Result<(Vec<RawTrajectory>, Vec<GapMask>)> {
    let mut masked = Vec::with_capacity(trajs.len());
    let mut masks = Vec::with_capacity(trajs.len());
    for (i, t) in trajs.iter().enumerate() {
        let mask = place_mask(t.samples.len(), length, seed, i).map_err(|e| e.in_trajectory(t.id.clone()))?;
        masked.push(apply_mask(t, mask)?);
        masks.push(mask);
    }
    Ok((masked, masks))
}

/// Projects a fully observed trajectory onto the grid.
pub fn project_raw(spec: &GridSpec, traj: &RawTrajectory) -> Result<Vec<State>> {
    if traj.has_gap() {
        return Err(Error::config("trajectory has gap rows")).map_err(|e| e.in_trajectory(traj.id.clone()));
    }
    let path = project_trajectory(&traj.points(), spec).map_err(|e| e.in_trajectory(traj.id.clone()))?;
    if path.len() < 2 {
        return Err(Error::TooShort(format!("projects to {} cell(s)", path.len()))).map_err(|e| e.in_trajectory(traj.id.clone()));
    }
    Ok(path)
}

/// A masked trajectory split around its gap, with the row positions needed
/// to write it back.
#[derive(Debug, Clone, PartialEq)]
pub struct GappedTrajectory {
    pub id: String,
    pub gap: Gap,
    pub mask: GapMask,
    pub samples: Vec<Sample>,
}

/// Finds the single gap of a masked trajectory and projects both sides.
pub fn split_gapped(spec: &GridSpec, traj: &RawTrajectory) -> Result<GappedTrajectory> {
    let wrap = |e: Error| e.in_trajectory(traj.id.clone());
    let missing: Vec<usize> = traj.samples.iter().enumerate().filter(|(_, s)| s.point.is_none()).map(|(i, _)| i).collect();
    let mask = match (missing.first(), missing.last()) {
        (Some(&a), Some(&b)) => {
            if b - a + 1 != missing.len() {
                return Err(wrap(Error::config("gap rows must be contiguous")));
            }
            GapMask { start: a, len: missing.len() }
        }
        _ => GapMask { start: traj.samples.len(), len: 0 },
    };
    check_mask(traj.samples.len(), mask).map_err(wrap)?;
    let pts = |range: std::ops::Range<usize>| -> Vec<(f64, f64)> {
        traj.samples[range].iter().filter_map(|s| s.point).collect()
    };
    let before_pts = pts(0..mask.start);
    let after_pts = pts(mask.start + mask.len..traj.samples.len());
    if before_pts.is_empty() {
        return Err(wrap(Error::TooShort("no observed samples".into())));
    }
    let before = project_trajectory(&before_pts, spec).map_err(wrap)?;
    let after = if after_pts.is_empty() { Vec::new() } else { project_trajectory(&after_pts, spec).map_err(wrap)? };
    let gap = if after.is_empty() {
        Gap { before, missing: 0, after: Vec::new() }
    } else {
        Gap::new(before, mask.len, after).map_err(wrap)?
    };
    Ok(GappedTrajectory { id: traj.id.clone(), gap, mask, samples: traj.samples.clone() })
}

impl GappedTrajectory {
    pub fn has_gap(&self) -> bool {
        self.mask.len > 0
    }

    /// Rebuilds trajectory rows from a completed grid path. Generated interior
    /// cells get `t` values spread over the gap's time span.
    pub fn completed_rows(&self, spec: &GridSpec, interior: &[State]) -> RawTrajectory {
        if !self.has_gap() {
            return RawTrajectory { id: self.id.clone(), samples: self.samples.clone() };
        }
        let before = &self.samples[..self.mask.start];
        let after = &self.samples[self.mask.start + self.mask.len..];
        let t0 = before.last().map_or(0, |s| s.t);
        let t1 = after.first().map_or(t0, |s| s.t);
        let m = interior.len() as i64;
        let mut samples: Vec<Sample> = before.to_vec();
        for (i, &s) in interior.iter().enumerate() {
            let t = t0 + (i as i64 + 1) * (t1 - t0) / (m + 1);
            samples.push(Sample { t, point: Some(spec.cell_center(s)) });
        }
        samples.extend_from_slice(after);
        RawTrajectory { id: self.id.clone(), samples }
    }
}

/// Evenly spaced interior points on the segment from `a` to `b`.
pub fn linear_interpolation(a: (f64, f64), b: (f64, f64), n_steps: usize) -> Vec<(f64, f64)> {
    let k = (n_steps + 1) as f64;
    (1..=n_steps)
        .map(|i| {
            let f = i as f64 / k;
            (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f)
        })
        .collect()
}

/// Deterministic train/test split: shuffles with `seed`, takes `n_train`.
pub fn split<T: Clone>(items: &[T], n_train: usize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if n_train > items.len() {
        return Err(Error::config(format!("cannot take {n_train} training items from {}", items.len())));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = order.split_at(n_train);
    Ok((a.iter().map(|&i| items[i].clone()).collect(), b.iter().map(|&i| items[i].clone()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(n: usize) -> RawTrajectory {
        let spec = GridSpec::unit(20, 1).unwrap();
        path_to_raw(&spec, "a", &(0..n).map(|x| State::new(x, 0)).collect::<Vec<_>>())
    }

    #[test]
    fn mask_of_four_at_three() {
        let m = apply_mask(&raw(10), GapMask { start: 3, len: 4 }).unwrap();
        assert_eq!(m.points().len(), 6);
        assert!(m.samples[0].point.is_some() && m.samples[9].point.is_some());
        assert_eq!(apply_mask(&raw(10), GapMask { start: 3, len: 0 }).unwrap(), raw(10));
        assert!(apply_mask(&raw(10), GapMask { start: 0, len: 2 }).is_err());
        assert!(apply_mask(&raw(10), GapMask { start: 7, len: 3 }).is_err());
    }

    #[test]
    fn seeded_masks_keep_endpoints() {
        let trajs: Vec<_> = (5..15).map(raw).collect();
        let (m1, k1) = mask_gaps(&trajs, GapLength::Fraction(0.3), 7).unwrap();
        let (m2, k2) = mask_gaps(&trajs, GapLength::Fraction(0.3), 7).unwrap();
        assert_eq!((m1.clone(), k1.clone()), (m2, k2));
        for (t, k) in m1.iter().zip(&k1) {
            assert!(k.start >= 1 && k.start + k.len < t.samples.len());
            assert!(t.samples[0].point.is_some() && t.samples.last().unwrap().point.is_some());
        }
        assert!(mask_gaps(&[raw(3)], GapLength::Fixed(2), 0).is_err());
    }

    #[test]
    fn linear_examples() {
        assert_eq!(linear_interpolation((0.0, 0.0), (4.0, 0.0), 3), vec![(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        assert_eq!(linear_interpolation((0.0, 0.0), (2.0, 2.0), 1), vec![(1.0, 1.0)]);
        assert_eq!(linear_interpolation((1.0, 1.0), (1.0, 1.0), 2), vec![(1.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn gapped_split_and_rebuild() {
        let spec = GridSpec::unit(20, 1).unwrap();
        let m = apply_mask(&raw(10), GapMask { start: 3, len: 4 }).unwrap();
        let g = split_gapped(&spec, &m).unwrap();
        assert_eq!(g.gap.before.len(), 3);
        assert_eq!(g.gap.after.len(), 3);
        assert_eq!(g.gap.missing, 4);
        let interior: Vec<State> = (3..7).map(|x| State::new(x, 0)).collect();
        assert_eq!(g.completed_rows(&spec, &interior), raw(10));
    }

    #[test]
    fn split_is_deterministic() {
        let items: Vec<usize> = (0..20).collect();
        let (a, b) = split(&items, 15, 3).unwrap();
        assert_eq!((a.clone(), b.clone()), split(&items, 15, 3).unwrap());
        assert_eq!(a.len() + b.len(), 20);
        assert!(split(&items, 21, 3).is_err());
    }

    #[test]
    fn synthesized_paths_are_adjacent() {
        let spec = GridSpec::unit(12, 12).unwrap();
        let cfg = SynthConfig { n_train: 4, n_test: 2, ..SynthConfig::for_grid(&spec, 5) };
        let d = synthesize(&spec, &cfg).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (4, 2));
        for p in d.train.iter().chain(&d.test) {
            assert!(p.windows(2).all(|w| w[0].chebyshev(w[1]) == 1));
        }
        assert_eq!(d, synthesize(&spec, &cfg).unwrap());
        let empty = SynthConfig { n_train: 0, ..cfg };
        assert!(synthesize(&spec, &empty).unwrap().train.is_empty());
    }
}
