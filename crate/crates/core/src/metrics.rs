//! Path similarity metrics and summary statistics.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, State};

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn mean_nearest(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|&p| to.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min))
        .sum();
    total / from.len() as f64
}

/// Modified Hausdorff distance: the larger of the two mean nearest-neighbour
/// distances between the point sets.
pub fn modified_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("distance needs two non-empty point sets"));
    }
    Ok(mean_nearest(a, b).max(mean_nearest(b, a)))
}

/// Cell coordinates in grid units.
pub fn cell_points(states: &[State]) -> Vec<(f64, f64)> {
    states.iter().map(|s| (s.x as f64, s.y as f64)).collect()
}

/// Cell centres in world units.
pub fn world_points(spec: &GridSpec, states: &[State]) -> Vec<(f64, f64)> {
    states.iter().map(|&s| spec.cell_center(s)).collect()
}

/// Modified Hausdorff distance between two cell paths, in grid units.
pub fn path_distance(a: &[State], b: &[State]) -> Result<f64> {
    modified_hausdorff(&cell_points(a), &cell_points(b))
}

/// Index-aligned distances between ground-truth and predicted segments, summarized.
pub fn evaluate_interpolations(gt: &[Vec<(f64, f64)>], pred: &[Vec<(f64, f64)>]) -> Result<Summary> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch { left: gt.len(), right: pred.len() });
    }
    let d: Vec<f64> = gt.iter().zip(pred).map(|(a, b)| modified_hausdorff(a, b)).collect::<Result<_>>()?;
    summarize(&d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no values to summarize"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary { mean, std, n })
}
