//! Experiment settings from a flat `key = value` file.
//!
//! Every key is optional. Values given on the command line are merged on
//! top of the file before resolution, so flags win.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::dataset::GapLength;
use crate::error::{Error, Result};
use crate::experiment::{CompareSettings, Scope, Units};
use crate::generator::{GapSettings, RolloutMode};
use crate::grid::GridSpec;
use crate::irl::TrainConfig;
use crate::method::{Arrival, MethodKind, StateSpace};
use crate::planner::{BackupOperator, GaussianKernel, PolicyRule};
use crate::reward::DistanceNorm;

/// Every recognised key, in documentation order.
pub const KEYS: [&str; 34] = [
    "width",
    "height",
    "origin_x",
    "origin_y",
    "cell_size",
    "cell_width",
    "cell_height",
    "rasters",
    "goal_distance",
    "method",
    "backup",
    "policy",
    "norm_p",
    "conv",
    "kernel_radius",
    "kernel_sigma",
    "tol",
    "max_iters",
    "horizon",
    "arrival",
    "learning_rate",
    "max_epochs",
    "grad_tol",
    "forward_factor",
    "rollout",
    "retries",
    "budget_factor",
    "gap_fraction",
    "gap_length",
    "n_train",
    "n_test",
    "seed",
    "units",
    "scope",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    /// Feature rasters, one or more channels each.
    pub rasters: Vec<PathBuf>,
    pub goal_distance: bool,
    /// The named variant the method was derived from.
    pub kind: MethodKind,
    pub train: TrainConfig,
    pub rollout: RolloutKind,
    pub retries: usize,
    pub budget_factor: usize,
    pub gap: GapLength,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub units: Units,
    pub scope: Scope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutKind {
    Deterministic,
    Stochastic,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::resolve(&BTreeMap::new()).expect("defaults are valid")
    }
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.trim().parse().map_err(|_| Error::config(format!("{key}: cannot parse {v:?}"))),
    }
}

fn get_bool(map: &BTreeMap<String, String>, key: &str, default: bool) -> Result<bool> {
    match map.get(key).map(|v| v.trim().to_ascii_lowercase()) {
        None => Ok(default),
        Some(v) => match v.as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(Error::config(format!("{key}: expected a boolean, got {v:?}"))),
        },
    }
}

fn choice<T: Copy>(map: &BTreeMap<String, String>, key: &str, options: &[(&str, T)]) -> Result<Option<T>> {
    let Some(v) = map.get(key) else { return Ok(None) };
    let v = v.trim().to_ascii_lowercase();
    options.iter().find(|(name, _)| *name == v).map(|(_, t)| Some(*t)).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        Error::config(format!("{key}: expected one of {}, got {v:?}", names.join("|")))
    })
}

impl ExperimentConfig {
    /// Parses a config file's text.
    pub fn parse(text: &str) -> Result<Self> {
        Self::resolve(&crate::io::parse_key_values(text)?)
    }

    /// Builds a config from raw pairs; unknown keys are rejected.
    pub fn resolve(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::config(format!("unknown key {k:?}")));
        }
        // `cell_size` sets both sides; the per-axis keys win over it.
        let side = get(map, "cell_size", 1.0)?;
        let grid = GridSpec::new(
            (get(map, "origin_x", 0.0)?, get(map, "origin_y", 0.0)?),
            (get(map, "cell_width", side)?, get(map, "cell_height", side)?),
            get(map, "width", 32)?,
            get(map, "height", 32)?,
        )?;
        let rasters = map
            .get("rasters")
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect())
            .unwrap_or_default();

        let kind = match map.get("method") {
            None => MethodKind::Proposed { p: 2.0, conv: true },
            Some(v) => MethodKind::parse(v).ok_or_else(|| Error::config(format!("method: unknown variant {v:?}")))?,
        };
        let mut method = kind.method();
        if let Some(b) = choice(
            map,
            "backup",
            &[
                ("hard", BackupOperator::HardMax),
                ("softmax", BackupOperator::SoftmaxMaxMin),
                ("softmax-exact", BackupOperator::SoftmaxExact),
            ],
        )? {
            method.planner.backup = b;
        }
        if let Some(p) = choice(map, "policy", &[("q", PolicyRule::QOnly), ("q-v", PolicyRule::QMinusV)])? {
            method.policy = p;
        }
        if let Some(v) = map.get("norm_p") {
            method.planner.norm = match v.trim() {
                "none" => DistanceNorm::None,
                p => DistanceNorm::lp(p.parse().map_err(|_| Error::config(format!("norm_p: cannot parse {p:?}")))?)?,
            };
        }
        let conv = get_bool(map, "conv", method.planner.kernel.is_some())?;
        method.planner.kernel = if conv {
            let d = GaussianKernel::default();
            Some(GaussianKernel::new(get(map, "kernel_radius", d.radius())?, get(map, "kernel_sigma", d.sigma())?)?)
        } else {
            if map.contains_key("kernel_radius") || map.contains_key("kernel_sigma") {
                return Err(Error::config("kernel settings given but conv is off"));
            }
            None
        };
        method.planner.tol = get(map, "tol", method.planner.tol)?;
        if !(method.planner.tol > 0.0 && method.planner.tol.is_finite()) {
            return Err(Error::config("tol must be positive"));
        }
        if let Some(v) = map.get("max_iters") {
            let n: usize = v.trim().parse().map_err(|_| Error::config(format!("max_iters: cannot parse {v:?}")))?;
            if n == 0 {
                return Err(Error::config("max_iters must be at least 1"));
            }
            method.planner.max_iters = Some(n);
        }
        let arrival = choice(map, "arrival", &[("exact", Arrival::Exact), ("within", Arrival::Within)])?;
        let horizon = match map.get("horizon") {
            None => None,
            Some(v) => Some(v.trim().parse::<usize>().map_err(|_| Error::config(format!("horizon: cannot parse {v:?}")))?),
        };
        match &mut method.space {
            StateSpace::TimeAugmented { horizon: h, arrival: a } => {
                if let Some(n) = horizon {
                    if n < 2 {
                        return Err(Error::config("horizon must be at least 2"));
                    }
                    *h = Some(n);
                }
                if let Some(x) = arrival {
                    *a = x;
                }
            }
            StateSpace::Planar if horizon.is_some() || arrival.is_some() => {
                return Err(Error::config("horizon and arrival apply only to the time-augmented method"));
            }
            StateSpace::Planar => {}
        }

        let d = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: get(map, "learning_rate", d.learning_rate)?,
            max_epochs: get(map, "max_epochs", d.max_epochs)?,
            grad_tol: get(map, "grad_tol", d.grad_tol)?,
            forward_factor: get(map, "forward_factor", d.forward_factor)?,
            method,
            initial_theta: None,
        };
        if !(train.learning_rate > 0.0 && train.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if train.grad_tol.is_nan() || train.grad_tol < 0.0 {
            return Err(Error::config("grad_tol must be non-negative"));
        }
        if train.forward_factor == 0 {
            return Err(Error::config("forward_factor must be at least 1"));
        }

        let cs = CompareSettings::default();
        let rollout = choice(
            map,
            "rollout",
            &[("deterministic", RolloutKind::Deterministic), ("stochastic", RolloutKind::Stochastic)],
        )?
        .unwrap_or(RolloutKind::Stochastic);
        let layered = matches!(train.method.space, StateSpace::TimeAugmented { .. });
        if layered && rollout == RolloutKind::Stochastic && map.contains_key("rollout") {
            return Err(Error::config("stochastic rollouts need a planar method"));
        }
        let retries = get(map, "retries", cs.retries)?;
        let budget_factor = get(map, "budget_factor", cs.budget_factor)?;
        if retries == 0 || budget_factor == 0 {
            return Err(Error::config("retries and budget_factor must be at least 1"));
        }

        let gap = match (map.get("gap_fraction"), map.get("gap_length")) {
            (Some(_), Some(_)) => return Err(Error::config("give gap_fraction or gap_length, not both")),
            (None, Some(_)) => GapLength::Fixed(get(map, "gap_length", 0)?),
            _ => {
                let f: f64 = get(map, "gap_fraction", 0.3)?;
                if !(0.0..1.0).contains(&f) {
                    return Err(Error::config("gap_fraction must lie in [0, 1)"));
                }
                GapLength::Fraction(f)
            }
        };

        Ok(Self {
            grid,
            rasters,
            goal_distance: get_bool(map, "goal_distance", true)?,
            kind,
            train,
            rollout,
            retries,
            budget_factor,
            gap,
            n_train: get(map, "n_train", 43)?,
            n_test: get(map, "n_test", 10)?,
            seed: get(map, "seed", 0)?,
            units: choice(map, "units", &[("cells", Units::Cells), ("world", Units::World)])?.unwrap_or(Units::Cells),
            scope: choice(map, "scope", &[("gap", Scope::Gap), ("whole", Scope::Whole)])?.unwrap_or(Scope::Gap),
        })
    }

    /// Rollout mode for the `index`-th gap. Time-augmented methods always
    /// roll out deterministically.
    pub fn gap_settings(&self, index: usize) -> GapSettings {
        let planar = matches!(self.train.method.space, StateSpace::Planar);
        let mode = match self.rollout {
            RolloutKind::Stochastic if planar => {
                RolloutMode::Stochastic { seed: self.seed.wrapping_add(index as u64), retries: self.retries }
            }
            _ => RolloutMode::Deterministic,
        };
        GapSettings { mode, budget_factor: self.budget_factor }
    }

    pub fn compare_settings(&self) -> CompareSettings {
        CompareSettings {
            train: self.train.clone(),
            budget_factor: self.budget_factor,
            retries: self.retries,
            seed: self.seed,
            units: self.units,
            scope: self.scope,
        }
    }
}

/// Overlays `overrides` on `base`; later values win.
pub fn merge(mut base: BTreeMap<String, String>, overrides: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    for (k, v) in overrides {
        base.insert(k.clone(), v.clone());
    }
    base
}
