//! Dynamic-programming results checked against brute-force enumeration.

use gridirl::irl::{empirical_feature_mean, gradient, model_feature_expectation, TrainConfig, TrainingSet};
use gridirl::oracle::{enumerate_paths, enumerate_visitation, exact_feature_expectation, exact_log_likelihood, log_partition, EnumerationProblem};
use gridirl::planner::{backward_pass, make_policy, BackupOperator, PlannerConfig, Policy, PolicyRule};
use gridirl::visitation::forward_pass;
use gridirl::{Arrival, DistanceNorm, FeatureBank, FeatureMap, GridSpec, Method, State, StateSpace, Theta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_features(spec: &GridSpec, k: usize, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels: Vec<Vec<f64>> = (0..k).map(|_| (0..spec.n_cells()).map(|_| rng.gen()).collect()).collect();
    FeatureMap::from_channels(spec.width(), spec.height(), &channels).unwrap()
}

fn problem(spec: &GridSpec, features: &FeatureMap, theta: &Theta, start: State, goal: State, horizon: usize, norm: DistanceNorm) -> EnumerationProblem {
    EnumerationProblem {
        spec: spec.clone(),
        horizon,
        start,
        goal,
        theta: theta.clone(),
        features: features.clone(),
        norm,
        arrival: Arrival::Within,
    }
}

#[test]
fn soft_values_match_enumerated_log_partition() {
    let spec = GridSpec::unit(4, 4).unwrap();
    let features = random_features(&spec, 3, 1);
    let theta = Theta::new(vec![-0.4, -1.1, -0.7]).unwrap();
    let goal = State::new(2, 1);
    for norm in [DistanceNorm::None, DistanceNorm::Lp(2.0), DistanceNorm::Lp(3.0)] {
        let cfg = PlannerConfig { backup: BackupOperator::SoftmaxExact, norm, max_iters: Some(6), tol: 1e-300, ..Default::default() };
        let art = backward_pass(&spec, goal, &theta, &features, &cfg).unwrap();
        for idx in 0..spec.n_cells() {
            let s = spec.cell_at(idx);
            let expect = log_partition(&problem(&spec, &features, &theta, s, goal, 6, norm)).unwrap();
            assert!((art.v[idx] - expect).abs() < 1e-6, "{norm:?} {s}: {} vs {expect}", art.v[idx]);
        }
    }
}

#[test]
fn layered_exact_values_match_fixed_length_enumeration() {
    let spec = GridSpec::unit(3, 3).unwrap();
    let features = random_features(&spec, 2, 2);
    let theta = Theta::new(vec![-0.5, -0.9]).unwrap();
    let h = 5;
    let grid = spec.with_horizon(h).unwrap();
    let goal = State::new(2, 2);
    let cfg = PlannerConfig { backup: BackupOperator::SoftmaxExact, ..Default::default() };
    let art = backward_pass(&grid, goal.at_time(h - 1), &theta, &features, &cfg).unwrap();
    for idx in 0..spec.n_cells() {
        let s = spec.cell_at(idx);
        let mut p = problem(&spec, &features, &theta, s, goal, h - 1, DistanceNorm::None);
        p.arrival = Arrival::Exact;
        let expect = log_partition(&p).unwrap();
        let got = art.v[grid.index(s.at_time(0))];
        assert!((got - expect).abs() < 1e-9, "{s}: {got} vs {expect}");
    }
}

#[test]
fn visitation_matches_path_enumeration() {
    let spec = GridSpec::unit(3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let mut probs = Vec::new();
        for _ in 0..spec.n_cells() {
            let row: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = row.iter().sum();
            probs.extend(row.iter().map(|p| p / total));
        }
        let policy = Policy::from_rows(probs).unwrap();
        let start = State::new(rng.gen_range(0..3), rng.gen_range(0..3));
        let goal = State::new(rng.gen_range(0..3), rng.gen_range(0..3));
        let field = forward_pass(&policy, &spec, start, goal, 5).unwrap();
        let (d, absorbed) = enumerate_visitation(&policy, &spec, start, goal, 5).unwrap();
        for (a, b) in field.d.iter().zip(&d) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((field.absorbed - absorbed).abs() < 1e-10);
    }
}

#[test]
fn time_augmented_visitation_matches_enumeration() {
    let spec = GridSpec::unit(3, 3).unwrap();
    let grid = spec.with_horizon(5).unwrap();
    let features = random_features(&spec, 2, 4);
    let theta = Theta::new(vec![-0.3, -0.8]).unwrap();
    let goal = State::new(0, 2).at_time(4);
    let cfg = PlannerConfig { backup: BackupOperator::SoftmaxExact, ..Default::default() };
    let art = backward_pass(&grid, goal, &theta, &features, &cfg).unwrap();
    let policy = make_policy(&art, PolicyRule::QMinusV);
    let field = forward_pass(&policy, &grid, State::new(2, 0), goal, 5).unwrap();
    let (d, absorbed) = enumerate_visitation(&policy, &grid, State::new(2, 0), goal, 5).unwrap();
    for (a, b) in field.d.iter().zip(&d) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!((field.absorbed - absorbed).abs() < 1e-10);
    assert!((absorbed - 1.0).abs() < 1e-9);
}

fn demos_for(p: &EnumerationProblem, n: usize, seed: u64) -> Vec<Vec<State>> {
    let mut paths = enumerate_paths(p).unwrap();
    paths.retain(|e| e.states.windows(2).all(|w| w[0] != w[1]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| paths[rng.gen_range(0..paths.len())].states.clone()).collect()
}

fn gradient_setup(norm: DistanceNorm) -> (EnumerationProblem, Vec<Vec<State>>, TrainingSet, TrainConfig) {
    let spec = GridSpec::unit(4, 4).unwrap();
    let features = random_features(&spec, 3, 5);
    let theta = Theta::new(vec![-0.6, -0.9, -0.4]).unwrap();
    let p = problem(&spec, &features, &theta, State::new(0, 0), State::new(3, 2), 5, norm);
    let demos = demos_for(&p, 4, 6);
    let ts = TrainingSet::new(&spec, FeatureBank::new(features, false), demos.clone()).unwrap();
    let method = Method {
        planner: PlannerConfig { backup: BackupOperator::SoftmaxExact, norm, ..Default::default() },
        policy: PolicyRule::QMinusV,
        space: StateSpace::TimeAugmented { horizon: Some(6), arrival: Arrival::Within },
    };
    (p, demos, ts, TrainConfig { method, ..Default::default() })
}

#[test]
fn model_expectation_matches_enumeration() {
    for norm in [DistanceNorm::None, DistanceNorm::Lp(2.0)] {
        let (p, _, ts, cfg) = gradient_setup(norm);
        let exact = exact_feature_expectation(&p).unwrap();
        let model = model_feature_expectation(&ts, &p.theta, &cfg).unwrap();
        for (a, b) in model.features.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9, "{norm:?}: {:?} vs {exact:?}", model.features);
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for norm in [DistanceNorm::None, DistanceNorm::Lp(2.0), DistanceNorm::Lp(3.0)] {
        let (p, demos, ts, cfg) = gradient_setup(norm);
        let f_bar = empirical_feature_mean(&ts, norm).unwrap();
        let model = model_feature_expectation(&ts, &p.theta, &cfg).unwrap();
        let g = gradient(&f_bar, &model.features).unwrap();
        let h = 1e-5;
        for k in 0..3 {
            let shifted = |d: f64| {
                let mut w = p.theta.weights().to_vec();
                w[k] += d;
                let q = EnumerationProblem { theta: Theta::new(w).unwrap(), ..p.clone() };
                exact_log_likelihood(&q, &demos).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let rel = (g[k] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-4, "{norm:?} component {k}: analytic {} vs numeric {fd}", g[k]);
        }
    }
}
