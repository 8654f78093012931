//! Named planner/policy combinations compared by the experiments.

use std::fmt;

use crate::planner::{BackupOperator, GaussianKernel, PlannerConfig, PolicyRule};
use crate::reward::DistanceNorm;

/// How goal arrival is constrained on a time-augmented grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arrival {
    /// The goal must be reached on the last layer.
    Exact,
    /// The goal is absorbing on every layer.
    Within,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSpace {
    Planar,
    /// Time layers; `horizon: None` uses each path's own length.
    TimeAugmented { horizon: Option<usize>, arrival: Arrival },
}

/// Everything needed to turn a reward into a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub planner: PlannerConfig,
    pub policy: PolicyRule,
    pub space: StateSpace,
}

impl Default for Method {
    fn default() -> Self {
        Self { planner: PlannerConfig::default(), policy: PolicyRule::QOnly, space: StateSpace::Planar }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodKind {
    Baseline2d,
    Baseline3d,
    Proposed { p: f64, conv: bool },
}

impl MethodKind {
    /// The variants reported in the comparison table, in row order.
    pub const TABLE: [MethodKind; 6] = [
        MethodKind::Baseline3d,
        MethodKind::Baseline2d,
        MethodKind::Proposed { p: 2.0, conv: false },
        MethodKind::Proposed { p: 3.0, conv: false },
        MethodKind::Proposed { p: 2.0, conv: true },
        MethodKind::Proposed { p: 3.0, conv: true },
    ];

    pub fn method(self) -> Method {
        match self {
            MethodKind::Baseline2d => Method {
                planner: PlannerConfig { backup: BackupOperator::SoftmaxMaxMin, ..Default::default() },
                policy: PolicyRule::QMinusV,
                space: StateSpace::Planar,
            },
            MethodKind::Baseline3d => Method {
                planner: PlannerConfig { backup: BackupOperator::SoftmaxMaxMin, ..Default::default() },
                policy: PolicyRule::QMinusV,
                space: StateSpace::TimeAugmented { horizon: None, arrival: Arrival::Exact },
            },
            MethodKind::Proposed { p, conv } => Method {
                planner: PlannerConfig {
                    backup: BackupOperator::HardMax,
                    norm: DistanceNorm::Lp(p),
                    kernel: conv.then(GaussianKernel::default),
                    ..Default::default()
                },
                policy: PolicyRule::QOnly,
                space: StateSpace::Planar,
            },
        }
    }

    pub fn label(self) -> String {
        self.to_string()
    }

    /// Parses labels such as `2d`, `3d`, `p2`, `p3-conv`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "2d" => return Some(MethodKind::Baseline2d),
            "3d" => return Some(MethodKind::Baseline3d),
            _ => {}
        }
        let rest = s.strip_prefix('p')?;
        let (p, conv) = match rest.strip_suffix("-conv") {
            Some(p) => (p, true),
            None => (rest, false),
        };
        let p: f64 = p.parse().ok()?;
        (p >= 1.0 && p.is_finite()).then_some(MethodKind::Proposed { p, conv })
    }

    /// Short machine-friendly name, the inverse of [`MethodKind::parse`].
    pub fn key(self) -> String {
        match self {
            MethodKind::Baseline2d => "2d".into(),
            MethodKind::Baseline3d => "3d".into(),
            MethodKind::Proposed { p, conv: false } => format!("p{p}"),
            MethodKind::Proposed { p, conv: true } => format!("p{p}-conv"),
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodKind::Baseline2d => write!(f, "2D"),
            MethodKind::Baseline3d => write!(f, "3D"),
            MethodKind::Proposed { p, conv: false } => write!(f, "p={p} w/o conv"),
            MethodKind::Proposed { p, conv: true } => write!(f, "p={p} w/ conv"),
        }
    }
}
