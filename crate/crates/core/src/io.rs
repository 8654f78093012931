//! Text formats: trajectory CSV, feature rasters, key-value config, weight
//! files, and grid exports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, State};
use crate::planner::ValueArtifacts;
use crate::reward::Theta;

pub const TRAJECTORY_HEADER: [&str; 4] = ["traj_id", "t", "x", "y"];

/// One row of a trajectory file; `point` is `None` for a gap row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: i64,
    pub point: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTrajectory {
    pub id: String,
    pub samples: Vec<Sample>,
}

impl RawTrajectory {
    /// Observed points, skipping gap rows.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.samples.iter().filter_map(|s| s.point).collect()
    }

    pub fn has_gap(&self) -> bool {
        self.samples.iter().any(|s| s.point.is_none())
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn records(text: &str, has_headers: bool) -> impl Iterator<Item = Result<(usize, StringRecord)>> + '_ {
    ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .into_records()
        .map(|r| {
            r.map(|rec| (rec.position().map_or(0, |p| p.line() as usize), rec))
                .map_err(|e| Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string()))
        })
}

fn header(text: &str) -> Result<Vec<String>> {
    let mut rdr = ReaderBuilder::new().has_headers(true).trim(Trim::All).from_reader(text.as_bytes());
    let h = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    Ok(h.iter().map(str::to_string).collect())
}

fn field(rec: &StringRecord, i: usize, line: usize) -> Result<&str> {
    rec.get(i).ok_or_else(|| Error::parse(line, format!("missing column {}", i + 1)))
}

fn number(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::parse(line, format!("{what} is not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what} is not finite: {s:?}")));
    }
    Ok(v)
}

/// Parses `traj_id,t,x,y` rows. Rows with both `x` and `y` empty mark gaps.
/// Trajectories keep the order of their first row; `t` must not decrease
/// within a trajectory.
pub fn parse_trajectories(text: &str) -> Result<Vec<RawTrajectory>> {
    if text.trim().is_empty() {
        return Err(Error::parse(1, "missing header"));
    }
    let h = header(text)?;
    if h != TRAJECTORY_HEADER {
        return Err(Error::parse(1, format!("expected header {}, got {}", TRAJECTORY_HEADER.join(","), h.join(","))));
    }
    let mut out: Vec<RawTrajectory> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for r in records(text, true) {
        let (line, rec) = r?;
        if rec.len() != 4 {
            return Err(Error::parse(line, format!("expected 4 columns, got {}", rec.len())));
        }
        let id = field(&rec, 0, line)?;
        if id.is_empty() {
            return Err(Error::parse(line, "empty trajectory id"));
        }
        let t: i64 = field(&rec, 1, line)?
            .parse()
            .map_err(|_| Error::parse(line, format!("t is not an integer: {:?}", &rec[1])))?;
        let (xs, ys) = (field(&rec, 2, line)?, field(&rec, 3, line)?);
        let point = match (xs.is_empty(), ys.is_empty()) {
            (true, true) => None,
            (false, false) => Some((number(xs, line, "x")?, number(ys, line, "y")?)),
            _ => return Err(Error::parse(line, "x and y must both be set or both be empty")),
        };
        let slot = *index.entry(id.to_string()).or_insert_with(|| {
            out.push(RawTrajectory { id: id.to_string(), samples: Vec::new() });
            out.len() - 1
        });
        let traj = &mut out[slot];
        if traj.samples.last().is_some_and(|prev| prev.t > t) {
            return Err(Error::parse(line, format!("t decreases within trajectory {id}")));
        }
        traj.samples.push(Sample { t, point });
    }
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

pub fn format_trajectories(trajs: &[RawTrajectory]) -> String {
    let mut out = TRAJECTORY_HEADER.join(",");
    out.push('\n');
    for tr in trajs {
        for s in &tr.samples {
            let (x, y) = s.point.map_or((String::new(), String::new()), |(x, y)| (fmt_num(x), fmt_num(y)));
            out.push_str(&format!("{},{},{x},{y}\n", tr.id, s.t));
        }
    }
    out
}

/// Trajectory rows for a grid path, one cell centre per step.
pub fn path_to_raw(spec: &GridSpec, id: &str, path: &[State]) -> RawTrajectory {
    RawTrajectory {
        id: id.to_string(),
        samples: path
            .iter()
            .enumerate()
            .map(|(t, &s)| Sample { t: t as i64, point: Some(spec.cell_center(s)) })
            .collect(),
    }
}

/// Raw (unscaled) feature channels read from a raster file.
///
/// Two layouts are accepted: a headerless `height x width` matrix whose first
/// row is the northernmost (`y = height - 1`), or a flat table with header
/// `x,y,f1,...,fk` listing every cell once.
pub fn parse_raster(text: &str, width: usize, height: usize) -> Result<Vec<Vec<f64>>> {
    let first = text.lines().find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let Some(first) = first else {
        return Err(Error::parse(1, "empty raster"));
    };
    let mut cols = first.split(',').map(str::trim);
    if cols.next() == Some("x") && cols.next() == Some("y") {
        parse_flat_raster(text, width, height)
    } else {
        Ok(vec![parse_matrix_raster(text, width, height)?])
    }
}

fn parse_matrix_raster(text: &str, width: usize, height: usize) -> Result<Vec<f64>> {
    let mut values = vec![0.0; width * height];
    let mut rows = 0;
    for r in records(text, false) {
        let (line, rec) = r?;
        if rows == height {
            return Err(Error::parse(line, format!("more than {height} rows")));
        }
        if rec.len() != width {
            return Err(Error::parse(line, format!("expected {width} values, got {}", rec.len())));
        }
        let y = height - 1 - rows;
        for (x, v) in rec.iter().enumerate() {
            values[y * width + x] = number(v, line, "value")?;
        }
        rows += 1;
    }
    if rows != height {
        return Err(Error::DimensionMismatch { expected: height, got: rows });
    }
    Ok(values)
}

fn parse_flat_raster(text: &str, width: usize, height: usize) -> Result<Vec<Vec<f64>>> {
    let h = header(text)?;
    let k = h.len().saturating_sub(2);
    if k == 0 {
        return Err(Error::parse(1, "flat raster needs at least one channel column"));
    }
    let mut channels = vec![vec![0.0; width * height]; k];
    let mut seen = vec![false; width * height];
    for r in records(text, true) {
        let (line, rec) = r?;
        if rec.len() != k + 2 {
            return Err(Error::parse(line, format!("expected {} columns, got {}", k + 2, rec.len())));
        }
        let coord = |i: usize, what: &str, limit: usize| -> Result<usize> {
            let v: usize = rec[i].parse().map_err(|_| Error::parse(line, format!("{what} is not a cell index: {:?}", &rec[i])))?;
            if v >= limit {
                return Err(Error::parse(line, format!("{what} = {v} outside 0..{limit}")));
            }
            Ok(v)
        };
        let cell = coord(1, "y", height)? * width + coord(0, "x", width)?;
        if std::mem::replace(&mut seen[cell], true) {
            return Err(Error::parse(line, "cell listed twice"));
        }
        for (c, ch) in channels.iter_mut().enumerate() {
            ch[cell] = number(&rec[c + 2], line, "value")?;
        }
    }
    let listed = seen.iter().filter(|s| **s).count();
    if listed != width * height {
        return Err(Error::DimensionMismatch { expected: width * height, got: listed });
    }
    Ok(channels)
}

/// Flat `key = value` pairs; `#` starts a comment, duplicate keys are rejected.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::parse(i + 1, format!("expected key = value, got {line:?}")));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::parse(i + 1, "empty key"));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::parse(i + 1, format!("duplicate key {k:?}")));
        }
    }
    Ok(out)
}

/// One weight per line.
pub fn parse_theta(text: &str) -> Result<Theta> {
    let mut w = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        w.push(number(line, i + 1, "weight")?);
    }
    Theta::new(w)
}

pub fn format_theta(theta: &Theta) -> String {
    theta.weights().iter().map(|w| format!("{}\n", fmt_num(*w))).collect()
}

/// A per-cell field as a `height x width` matrix, northernmost row first.
pub fn format_grid(values: &[f64], width: usize, height: usize) -> String {
    let mut out = String::new();
    for y in (0..height).rev() {
        let row: Vec<String> = values[y * width..(y + 1) * width].iter().map(|v| fmt_num(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Grid files for the first layer of a backward pass: `value.csv` and one
/// `q_<action>.csv` per move.
pub fn value_grids(width: usize, height: usize, art: &ValueArtifacts) -> Vec<(String, String)> {
    let cells = width * height;
    let mut out = vec![("value.csv".to_string(), format_grid(&art.v[..cells], width, height))];
    for a in Action::ALL {
        let q: Vec<f64> = (0..cells).map(|c| art.q[c * Action::COUNT + a.index()]).collect();
        out.push((format!("q_{}.csv", format!("{a:?}").to_lowercase()), format_grid(&q, width, height)));
    }
    out
}

/// Writes a table with a header row; cells are written verbatim.
pub fn format_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_trajectories() {
        let text = "traj_id,t,x,y\na,0,0.5,0.5\na,1,1.5,0.5\nb,0,2,2\nb,3,,\nb,4,3,3\n";
        let t = parse_trajectories(text).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].points(), vec![(0.5, 0.5), (1.5, 0.5)]);
        assert!(t[1].has_gap());
        assert_eq!(parse_trajectories(&format_trajectories(&t)).unwrap(), t);
    }

    #[test]
    fn non_numeric_x_names_line() {
        let text = "traj_id,t,x,y\na,0,0,0\na,1,abc,0\n";
        match parse_trajectories(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trajectory_errors() {
        assert!(parse_trajectories("").is_err());
        assert!(parse_trajectories("id,t,x,y\n").is_err());
        assert!(parse_trajectories("traj_id,t,x,y\na,1,0,0\na,0,0,0\n").is_err());
        assert!(parse_trajectories("traj_id,t,x,y\na,0,1,\n").is_err());
        assert!(parse_trajectories("traj_id,t,x,y\na,0,inf,1\n").is_err());
        assert!(parse_trajectories("traj_id,t,x,y\na,0.5,1,1\n").is_err());
        assert!(parse_trajectories("traj_id,t,x,y\na,0,1\n").is_err());
    }

    #[test]
    fn matrix_raster_is_north_up() {
        let ch = parse_raster("1,2,3\n4,5,6\n", 3, 2).unwrap();
        assert_eq!(ch, vec![vec![4.0, 5.0, 6.0, 1.0, 2.0, 3.0]]);
        assert!(parse_raster("1,2\n4,5\n", 3, 2).is_err());
        assert!(parse_raster("1,2,3\n", 3, 2).is_err());
    }

    #[test]
    fn flat_raster() {
        let text = "x,y,a,b\n0,0,1,10\n1,0,2,20\n0,1,3,30\n1,1,4,40\n";
        let ch = parse_raster(text, 2, 2).unwrap();
        assert_eq!(ch, vec![vec![1.0, 2.0, 3.0, 4.0], vec![10.0, 20.0, 30.0, 40.0]]);
        assert!(parse_raster("x,y,a\n0,0,1\n0,0,2\n1,0,1\n1,1,1\n", 2, 2).is_err());
        assert!(parse_raster("x,y,a\n0,0,1\n", 2, 2).is_err());
        assert!(parse_raster("x,y,a\n5,0,1\n", 2, 2).is_err());
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# grid\nwidth = 8\nheight=4 # rows\n\n").unwrap();
        assert_eq!(kv["width"], "8");
        assert_eq!(kv["height"], "4");
        assert!(parse_key_values("width\n").is_err());
        assert!(parse_key_values("a=1\na=2\n").is_err());
    }

    #[test]
    fn theta_round_trip() {
        let t = Theta::new(vec![-0.25, -3.0]).unwrap();
        assert_eq!(parse_theta(&format_theta(&t)).unwrap(), t);
        assert!(parse_theta("0.5\n").is_err());
        assert!(parse_theta("").is_err());
    }

    #[test]
    fn grid_export_matches_raster_layout() {
        let v = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(parse_raster(&format_grid(&v, 3, 2), 3, 2).unwrap(), vec![v]);
    }
}
