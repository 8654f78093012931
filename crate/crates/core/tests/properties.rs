//! Randomised invariants of projection, smoothing and the text formats.

use std::collections::HashSet;

use gridirl::grid::{project_trajectory, supercover};
use gridirl::io::{format_grid, format_trajectories, parse_key_values, parse_raster, parse_theta, parse_trajectories, format_theta, RawTrajectory, Sample};
use gridirl::planner::{convolve_v, GaussianKernel};
use gridirl::{GridSpec, Theta};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -20.0..20.0f64
}

proptest! {
    #[test]
    fn supercover_contains_every_cell_the_segment_crosses(ax in coord(), ay in coord(), bx in coord(), by in coord()) {
        let cells = supercover((ax, ay), (bx, by));
        let set: HashSet<(i64, i64)> = cells.iter().copied().collect();
        // Dense midpoint sampling never lands on a grid corner in practice.
        let n = 4000;
        for k in 0..n {
            let t = (k as f64 + 0.5) / n as f64;
            let p = ((ax + t * (bx - ax)).floor() as i64, (ay + t * (by - ay)).floor() as i64);
            prop_assert!(set.contains(&p), "missed {p:?}");
        }
        prop_assert_eq!(cells[0], (ax.floor() as i64, ay.floor() as i64));
        prop_assert_eq!(*cells.last().unwrap(), (bx.floor() as i64, by.floor() as i64));
        for w in cells.windows(2) {
            let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            prop_assert!(dx.abs() <= 1 && dy.abs() <= 1 && (dx, dy) != (0, 0));
        }
        prop_assert_eq!(set.len(), cells.len());
    }

    #[test]
    fn projection_is_eight_connected(points in prop::collection::vec((0.0..12.0f64, 0.0..9.0f64), 1..30)) {
        let spec = GridSpec::new((0.0, 0.0), (1.0, 1.0), 12, 9).unwrap();
        let path = project_trajectory(&points, &spec).unwrap();
        prop_assert_eq!(path[0], spec.discretize(points[0]).unwrap());
        prop_assert_eq!(*path.last().unwrap(), spec.discretize(*points.last().unwrap()).unwrap());
        for w in path.windows(2) {
            prop_assert_eq!(w[0].chebyshev(w[1]), 1);
        }
    }

    #[test]
    fn convolution_matches_direct_sum_in_the_interior(
        w in 5usize..10,
        h in 5usize..10,
        seed in prop::collection::vec(-10.0..0.0f64, 100),
        sigma in 0.3..3.0f64,
    ) {
        let v: Vec<f64> = (0..w * h).map(|i| seed[i % seed.len()] - i as f64 * 0.01).collect();
        let kernel = GaussianKernel::new(1, sigma).unwrap();
        let out = convolve_v(&v, w, h, &kernel);
        let norm: f64 = (-1i64..=1).flat_map(|dy| (-1i64..=1).map(move |dx| (dx, dy)))
            .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp())
            .sum();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let mut direct = 0.0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let g = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp() / norm;
                        direct += g * v[((y as i64 + dy) as usize) * w + (x as i64 + dx) as usize];
                    }
                }
                prop_assert!((out[y * w + x] - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn convolution_keeps_constants_and_bounds(w in 2usize..9, h in 2usize..9, c in -50.0..0.0f64, r in 0usize..3) {
        let kernel = GaussianKernel::new(r, 1.0).unwrap();
        let out = convolve_v(&vec![c; w * h], w, h, &kernel);
        for o in &out {
            prop_assert!((o - c).abs() < 1e-9);
        }
        let ramp: Vec<f64> = (0..w * h).map(|i| c - i as f64).collect();
        let lo = ramp.iter().copied().fold(f64::INFINITY, f64::min);
        for o in convolve_v(&ramp, w, h, &kernel) {
            prop_assert!(o <= c + 1e-9 && o >= lo - 1e-9);
        }
    }

    #[test]
    fn matrix_raster_round_trips(w in 1usize..8, h in 1usize..8, vals in prop::collection::vec(-1e6..1e6f64, 64)) {
        let values: Vec<f64> = vals[..w * h].to_vec();
        let parsed = parse_raster(&format_grid(&values, w, h), w, h).unwrap();
        prop_assert_eq!(parsed, vec![values]);
    }

    #[test]
    fn flat_raster_round_trips(w in 1usize..6, h in 1usize..6, k in 1usize..4, vals in prop::collection::vec(-1e3..1e3f64, 108)) {
        let mut text = String::from("x,y");
        for c in 0..k {
            text.push_str(&format!(",f{c}"));
        }
        text.push('\n');
        // Rows in reverse order: the layout does not depend on listing order.
        for cell in (0..w * h).rev() {
            text.push_str(&format!("{},{}", cell % w, cell / w));
            for c in 0..k {
                text.push_str(&format!(",{}", vals[c * w * h + cell]));
            }
            text.push('\n');
        }
        let parsed = parse_raster(&text, w, h).unwrap();
        prop_assert_eq!(parsed.len(), k);
        for (c, ch) in parsed.iter().enumerate() {
            prop_assert_eq!(&ch[..], &vals[c * w * h..(c + 1) * w * h]);
        }
    }

    #[test]
    fn trajectories_round_trip(
        trajs in prop::collection::vec(
            ("[a-z][a-z0-9_]{0,6}", prop::collection::vec(prop::option::weighted(0.8, (-1e4..1e4f64, -1e4..1e4f64)), 1..12)),
            0..5,
        )
    ) {
        let mut seen = HashSet::new();
        let raws: Vec<RawTrajectory> = trajs
            .into_iter()
            .filter(|(id, _)| seen.insert(id.clone()))
            .map(|(id, pts)| RawTrajectory {
                id,
                samples: pts.into_iter().enumerate().map(|(t, point)| Sample { t: t as i64, point }).collect(),
            })
            .collect();
        let text = format_trajectories(&raws);
        prop_assert_eq!(parse_trajectories(&text).unwrap(), raws);
    }

    #[test]
    fn theta_round_trips(w in prop::collection::vec(-1e9..-1e-9f64, 1..8)) {
        let theta = Theta::new(w).unwrap();
        prop_assert_eq!(parse_theta(&format_theta(&theta)).unwrap(), theta);
    }

    #[test]
    fn key_values_round_trip(pairs in prop::collection::btree_map("[a-z_]{1,10}", "[A-Za-z0-9_.,/ -]{0,12}", 0..10)) {
        let text: String = pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let parsed = parse_key_values(&text).unwrap();
        let trimmed: std::collections::BTreeMap<String, String> =
            pairs.iter().map(|(k, v)| (k.clone(), v.trim().to_string())).collect();
        prop_assert_eq!(parsed, trimmed);
    }
}
