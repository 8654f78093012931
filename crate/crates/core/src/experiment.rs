//! End-to-end comparison: train each method, fill masked gaps, score the
//! fills against the held-out ground truth.

use crate::dataset::{check_mask, linear_interpolation, place_mask, GapLength, GapMask};
use crate::error::{Error, Result};
use crate::generator::{fill_gap, Gap, GapSettings, RolloutMode};
use crate::grid::{GridSpec, State};
use crate::irl::{train, TrainConfig, TrainReport, TrainingSet};
use crate::method::MethodKind;
use crate::metrics::{modified_hausdorff, summarize, Summary};
use crate::reward::{FeatureBank, Theta};

/// Where distances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    /// Grid cells, cell centres at half-integers.
    Cells,
    /// The coordinate system of the input data.
    World,
}

/// What part of a trajectory is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// The gap and its two anchors.
    Gap,
    Whole,
}

pub fn to_points(spec: &GridSpec, states: &[State], units: Units) -> Vec<(f64, f64)> {
    states
        .iter()
        .map(|&s| {
            let c = spec.cell_center(s);
            match units {
                Units::World => c,
                Units::Cells => spec.to_cell_units(c),
            }
        })
        .collect()
}

/// A ground-truth path with one gap cut out of it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedPath {
    pub truth: Vec<State>,
    pub mask: GapMask,
}

impl MaskedPath {
    pub fn new(truth: Vec<State>, mask: GapMask) -> Result<Self> {
        check_mask(truth.len(), mask)?;
        if mask.len == 0 {
            return Err(Error::config("masked path needs a non-empty gap"));
        }
        Ok(Self { truth, mask })
    }

    pub fn gap(&self) -> Gap {
        let (a, b) = (self.mask.start, self.mask.start + self.mask.len);
        Gap { before: self.truth[..a].to_vec(), missing: self.mask.len, after: self.truth[b..].to_vec() }
    }

    /// Ground truth over the compared scope.
    pub fn truth_segment(&self, scope: Scope) -> &[State] {
        match scope {
            Scope::Gap => &self.truth[self.mask.start - 1..=self.mask.start + self.mask.len],
            Scope::Whole => &self.truth,
        }
    }

    /// Prediction over the compared scope, given the generated interior.
    pub fn predicted_segment(&self, interior: &[State], scope: Scope) -> Vec<State> {
        let gap = self.gap();
        let mut out = match scope {
            Scope::Gap => vec![gap.start()],
            Scope::Whole => gap.before.clone(),
        };
        out.extend_from_slice(interior);
        match scope {
            Scope::Gap => out.push(gap.end()),
            Scope::Whole => out.extend_from_slice(&gap.after),
        }
        out
    }

    /// Straight-line prediction over the compared scope, in the given units.
    pub fn linear_segment(&self, spec: &GridSpec, scope: Scope, units: Units) -> Vec<(f64, f64)> {
        let gap = self.gap();
        let ends = to_points(spec, &[gap.start(), gap.end()], units);
        let mid = linear_interpolation(ends[0], ends[1], self.mask.len);
        let mut out = match scope {
            Scope::Gap => vec![ends[0]],
            Scope::Whole => to_points(spec, &gap.before, units),
        };
        out.extend(mid);
        match scope {
            Scope::Gap => out.push(ends[1]),
            Scope::Whole => out.extend(to_points(spec, &gap.after, units)),
        }
        out
    }
}

/// Cuts one seeded gap from each path.
pub fn mask_paths(paths: &[Vec<State>], length: GapLength, seed: u64) -> Result<Vec<MaskedPath>> {
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| MaskedPath::new(p.clone(), place_mask(p.len(), length, seed, i)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSettings {
    pub train: TrainConfig,
    pub budget_factor: usize,
    pub retries: usize,
    pub seed: u64,
    pub units: Units,
    pub scope: Scope,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self { train: TrainConfig::default(), budget_factor: 1, retries: 50, seed: 0, units: Units::Cells, scope: Scope::Gap }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodScore {
    /// `None` for the straight-line baseline.
    pub kind: Option<MethodKind>,
    pub det: Summary,
    /// Not available for time-augmented methods or the straight line.
    pub sto: Option<Summary>,
    pub theta: Option<Theta>,
    pub report: Option<TrainReport>,
    /// Fills that did not reach the far anchor (deterministic, stochastic).
    pub unreached: (usize, usize),
}

impl MethodScore {
    pub fn label(&self) -> String {
        self.kind.map_or_else(|| "Linear".to_string(), |k| k.label())
    }
}

pub fn score_linear(spec: &GridSpec, tests: &[MaskedPath], units: Units, scope: Scope) -> Result<MethodScore> {
    let d: Vec<f64> = tests
        .iter()
        .map(|m| modified_hausdorff(&to_points(spec, m.truth_segment(scope), units), &m.linear_segment(spec, scope, units)))
        .collect::<Result<_>>()?;
    Ok(MethodScore { kind: None, det: summarize(&d)?, sto: None, theta: None, report: None, unreached: (0, 0) })
}

/// Trains `kind` on `train` and scores its gap fills on `tests`.
pub fn score_method(
    spec: &GridSpec,
    bank: &FeatureBank,
    train_paths: &[Vec<State>],
    tests: &[MaskedPath],
    kind: MethodKind,
    settings: &CompareSettings,
) -> Result<MethodScore> {
    let ts = TrainingSet::new(spec, bank.clone(), train_paths.to_vec())?;
    let cfg = TrainConfig { method: kind.method(), ..settings.train.clone() };
    let (theta, report) = train(&ts, &cfg)?;
    let with_sto = !matches!(kind, MethodKind::Baseline3d);
    let mut det = Vec::new();
    let mut sto = Vec::new();
    let mut unreached = (0, 0);
    for (i, m) in tests.iter().enumerate() {
        let truth = to_points(spec, m.truth_segment(settings.scope), settings.units);
        let modes = if with_sto {
            vec![
                RolloutMode::Deterministic,
                RolloutMode::Stochastic { seed: settings.seed.wrapping_add(i as u64), retries: settings.retries },
            ]
        } else {
            vec![RolloutMode::Deterministic]
        };
        for mode in modes {
            let gs = GapSettings { mode, budget_factor: settings.budget_factor };
            let fill = fill_gap(spec, bank, &theta, &cfg.method, &m.gap(), &gs)?;
            let pred = to_points(spec, &m.predicted_segment(&fill.interior, settings.scope), settings.units);
            let d = modified_hausdorff(&truth, &pred)?;
            let deterministic = mode == RolloutMode::Deterministic;
            if !fill.reached_goal {
                if deterministic {
                    unreached.0 += 1;
                } else {
                    unreached.1 += 1;
                }
            }
            if deterministic {
                det.push(d);
            } else {
                sto.push(d);
            }
        }
    }
    Ok(MethodScore {
        kind: Some(kind),
        det: summarize(&det)?,
        sto: if with_sto { Some(summarize(&sto)?) } else { None },
        theta: Some(theta),
        report: Some(report),
        unreached,
    })
}

/// The straight-line baseline followed by every requested method.
pub fn compare_methods(
    spec: &GridSpec,
    bank: &FeatureBank,
    train_paths: &[Vec<State>],
    tests: &[MaskedPath],
    kinds: &[MethodKind],
    settings: &CompareSettings,
) -> Result<Vec<MethodScore>> {
    let mut out = vec![score_linear(spec, tests, settings.units, settings.scope)?];
    for &k in kinds {
        out.push(score_method(spec, bank, train_paths, tests, k, settings)?);
    }
    Ok(out)
}
