//! Discretized state space: a planar grid of cells, optionally stacked into
//! time layers, with the 8-neighbour action set and deterministic transitions.
//!
//! Cells are indexed row-major (`y * width + x`); in time-augmented mode the
//! layer index is outermost (`(z * height + y) * width + x`). Actions that
//! would leave the grid self-transition.

use std::fmt;

use crate::error::{Error, Result};

/// Longest bridge (in cells, Chebyshev) that trajectory densification will
/// rasterize between two consecutive fixes.
pub const DEFAULT_MAX_BRIDGE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    origin: (f64, f64),
    cell_size: (f64, f64),
    width: usize,
    height: usize,
    horizon: Option<usize>,
}

impl GridSpec {
    pub fn new(origin: (f64, f64), cell_size: (f64, f64), width: usize, height: usize) -> Result<Self> {
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::config("grid origin must be finite"));
        }
        if !(cell_size.0 > 0.0 && cell_size.1 > 0.0 && cell_size.0.is_finite() && cell_size.1.is_finite()) {
            return Err(Error::config("cell_size must be positive and finite"));
        }
        // Corridors (width or height 1) are allowed as long as there are two cells.
        if width == 0 || height == 0 || width * height < 2 {
            return Err(Error::config(format!("grid {width}x{height} must hold at least two cells")));
        }
        if width.checked_mul(height).is_none() {
            return Err(Error::config("grid too large"));
        }
        Ok(Self { origin, cell_size, width, height, horizon: None })
    }

    /// Unit cells anchored at the origin; convenient for tests and synthetic maps.
    pub fn unit(width: usize, height: usize) -> Result<Self> {
        Self::new((0.0, 0.0), (1.0, 1.0), width, height)
    }

    /// Time-augmented copy of this grid with `horizon` layers (`z` in `0..horizon`).
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if self.n_cells().checked_mul(horizon).is_none() {
            return Err(Error::config("time-augmented grid too large"));
        }
        Ok(Self { horizon: Some(horizon), ..self.clone() })
    }

    /// The same grid without time layers.
    pub fn planar(&self) -> Self {
        Self { horizon: None, ..self.clone() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cell_size(&self) -> (f64, f64) {
        self.cell_size
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn is_time_augmented(&self) -> bool {
        self.horizon.is_some()
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn layers(&self) -> usize {
        self.horizon.unwrap_or(1)
    }

    pub fn n_states(&self) -> usize {
        self.n_cells() * self.layers()
    }

    pub fn contains(&self, s: State) -> bool {
        let planar_ok = s.x < self.width && s.y < self.height;
        match (self.horizon, s.z) {
            (Some(h), Some(z)) => planar_ok && z < h,
            (None, None) => planar_ok,
            _ => false,
        }
    }

    pub fn check(&self, s: State) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::StateOutOfBounds(s.to_string()))
        }
    }

    /// True when `s` names a planar cell of this grid, ignoring any time layer.
    pub fn contains_cell(&self, s: State) -> bool {
        s.x < self.width && s.y < self.height
    }

    pub fn cell_index(&self, s: State) -> usize {
        s.y * self.width + s.x
    }

    pub fn cell_at(&self, idx: usize) -> State {
        State::new(idx % self.width, idx / self.width)
    }

    /// Flat index over all states (cells times layers).
    pub fn index(&self, s: State) -> usize {
        s.z.unwrap_or(0) * self.n_cells() + self.cell_index(s)
    }

    pub fn state_at(&self, idx: usize) -> State {
        let cell = self.cell_at(idx % self.n_cells());
        match self.horizon {
            Some(_) => cell.at_time(idx / self.n_cells()),
            None => cell,
        }
    }

    pub fn discretize(&self, point: (f64, f64)) -> Result<State> {
        let (cx, cy) = self.to_cell_units(point);
        if !(cx.is_finite() && cy.is_finite())
            || cx < 0.0
            || cy < 0.0
            || cx >= self.width as f64
            || cy >= self.height as f64
        {
            return Err(Error::OutOfBounds { x: point.0, y: point.1 });
        }
        Ok(State::new(cx.floor() as usize, cy.floor() as usize))
    }

    /// Continuous coordinates expressed in cell units relative to the origin.
    pub fn to_cell_units(&self, point: (f64, f64)) -> (f64, f64) {
        ((point.0 - self.origin.0) / self.cell_size.0, (point.1 - self.origin.1) / self.cell_size.1)
    }

    pub fn cell_center(&self, s: State) -> (f64, f64) {
        (
            self.origin.0 + (s.x as f64 + 0.5) * self.cell_size.0,
            self.origin.1 + (s.y as f64 + 0.5) * self.cell_size.1,
        )
    }

    /// Planar move with wall clamping; never fails.
    pub fn planar_successor(&self, s: State, a: Action) -> State {
        let (dx, dy) = a.delta();
        let nx = s.x as i64 + dx;
        let ny = s.y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            s
        } else {
            State { x: nx as usize, y: ny as usize, z: s.z }
        }
    }

    pub fn successor(&self, s: State, a: Action) -> Result<State> {
        self.check(s)?;
        let next = self.planar_successor(s, a);
        match (self.horizon, s.z) {
            (Some(h), Some(z)) => {
                if z + 1 >= h {
                    Err(Error::HorizonExceeded { z, horizon: h })
                } else {
                    Ok(next.at_time(z + 1))
                }
            }
            _ => Ok(next),
        }
    }

    /// Planar successor cell index for every `(cell, action)` pair, action-minor.
    pub fn successor_table(&self) -> Vec<usize> {
        let mut table = Vec::with_capacity(self.n_cells() * Action::COUNT);
        for idx in 0..self.n_cells() {
            let s = self.cell_at(idx);
            for a in Action::ALL {
                table.push(self.cell_index(self.planar_successor(s, a)));
            }
        }
        table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub x: usize,
    pub y: usize,
    pub z: Option<usize>,
}

impl State {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y, z: None }
    }

    pub const fn at_time(self, z: usize) -> Self {
        Self { x: self.x, y: self.y, z: Some(z) }
    }

    pub const fn planar(self) -> Self {
        Self { x: self.x, y: self.y, z: None }
    }

    /// Chebyshev distance in the plane; time is ignored.
    pub fn chebyshev(self, other: State) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    pub fn is_adjacent_or_same(self, other: State) -> bool {
        self.chebyshev(other) <= 1
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.z {
            Some(z) => write!(f, "({}, {}, {})", self.x, self.y, z),
            None => write!(f, "({}, {})", self.x, self.y),
        }
    }
}

/// One of the eight compass moves; `y` grows northward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Action {
    pub const COUNT: usize = 8;

    /// Fixed order, also used for argmax tie-breaking.
    pub const ALL: [Action; 8] =
        [Action::N, Action::NE, Action::E, Action::SE, Action::S, Action::SW, Action::W, Action::NW];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::N => (0, 1),
            Action::NE => (1, 1),
            Action::E => (1, 0),
            Action::SE => (1, -1),
            Action::S => (0, -1),
            Action::SW => (-1, -1),
            Action::W => (-1, 0),
            Action::NW => (-1, 1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }

    pub fn is_diagonal(self) -> bool {
        let (dx, dy) = self.delta();
        dx != 0 && dy != 0
    }
}

/// Projects continuous fixes onto a unit-step grid path.
///
/// Consecutive fixes are bridged with a supercover line walk over half-open
/// cells, so a segment through an exact cell corner steps diagonally.
/// Consecutive duplicate states are collapsed.
pub fn project_trajectory(points: &[(f64, f64)], spec: &GridSpec) -> Result<Vec<State>> {
    project_trajectory_with(points, spec, DEFAULT_MAX_BRIDGE)
}

pub fn project_trajectory_with(points: &[(f64, f64)], spec: &GridSpec, max_bridge: usize) -> Result<Vec<State>> {
    let mut path: Vec<State> = Vec::with_capacity(points.len());
    let mut prev: Option<((f64, f64), State)> = None;
    for &p in points {
        let s = spec.discretize(p)?;
        match prev {
            None => path.push(s),
            Some((prev_p, prev_s)) => {
                let jump = prev_s.chebyshev(s);
                if jump > max_bridge {
                    return Err(Error::NonAdjacentJump { cells: jump, limit: max_bridge });
                }
                if jump > 1 {
                    let a = spec.to_cell_units(prev_p);
                    let b = spec.to_cell_units(p);
                    for (cx, cy) in supercover(a, b).into_iter().skip(1) {
                        let cell = State::new(
                            cx.clamp(0, spec.width() as i64 - 1) as usize,
                            cy.clamp(0, spec.height() as i64 - 1) as usize,
                        );
                        push_collapsed(&mut path, cell);
                    }
                }
                push_collapsed(&mut path, s);
            }
        }
        prev = Some((p, s));
    }
    debug_assert!(path.windows(2).all(|w| w[0].chebyshev(w[1]) == 1));
    Ok(path)
}

fn push_collapsed(path: &mut Vec<State>, s: State) {
    if path.last() != Some(&s) {
        path.push(s);
    }
}

/// Cells visited by the segment `a -> b` (cell units), in traversal order.
///
/// Cells are half-open `[i, i+1) x [j, j+1)`; crossing an exact corner moves
/// diagonally. The walk always ends on the cell containing `b`.
pub fn supercover(a: (f64, f64), b: (f64, f64)) -> Vec<(i64, i64)> {
    let mut cell = (a.0.floor() as i64, a.1.floor() as i64);
    let end = (b.0.floor() as i64, b.1.floor() as i64);
    let mut cells = vec![cell];
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let step_x: i64 = if dx > 0.0 { 1 } else if dx < 0.0 { -1 } else { 0 };
    let step_y: i64 = if dy > 0.0 { 1 } else if dy < 0.0 { -1 } else { 0 };

    // Parameter t at which the walk crosses the next vertical / horizontal grid line.
    let next_x = |cx: i64| -> f64 {
        match step_x {
            1 => ((cx + 1) as f64 - a.0) / dx,
            -1 => (cx as f64 - a.0) / dx,
            _ => f64::INFINITY,
        }
    };
    let next_y = |cy: i64| -> f64 {
        match step_y {
            1 => ((cy + 1) as f64 - a.1) / dy,
            -1 => (cy as f64 - a.1) / dy,
            _ => f64::INFINITY,
        }
    };

    let budget = (end.0 - cell.0).unsigned_abs() + (end.1 - cell.1).unsigned_abs() + 2;
    for _ in 0..budget {
        if cell == end {
            break;
        }
        let tx = next_x(cell.0);
        let ty = next_y(cell.1);
        if tx == ty {
            cell = (cell.0 + step_x, cell.1 + step_y);
        } else if tx < ty {
            cell.0 += step_x;
        } else {
            cell.1 += step_y;
        }
        // Floating-point drift can overshoot one axis; never walk past the end cell.
        if (end.0 - cell.0) * step_x < 0 {
            cell.0 = end.0;
        }
        if (end.1 - cell.1) * step_y < 0 {
            cell.1 = end.1;
        }
        cells.push(cell);
    }
    if *cells.last().unwrap() != end {
        cells.push(end);
    }
    cells
}
