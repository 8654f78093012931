use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gridirl::bench::{run_benchmark, BenchConfig};
use gridirl::config::{merge, ExperimentConfig};
use gridirl::dataset::{
    feature_bank, linear_interpolation, mask_gaps, paths_to_raw, project_raw, split, split_gapped, synthesize, SynthConfig,
};
use gridirl::experiment::{compare_methods, mask_paths, Scope, Units};
use gridirl::generator::fill_gap;
use gridirl::io::{
    format_grid, format_table, format_theta, format_trajectories, parse_key_values, parse_raster, parse_theta,
    parse_trajectories, read_text, value_grids, write_text, RawTrajectory,
};
use gridirl::irl::{plan_for_path, train, TrainingSet};
use gridirl::metrics::{modified_hausdorff, summarize};
use gridirl::plot::{render_svg, LabeledPath};
use gridirl::visitation::forward_pass;
use gridirl::{Error, FeatureBank, GridSpec, MethodKind, Result, Theta};

use crate::{Command, Common, Mode, Switch};

struct Loaded {
    cfg: ExperimentConfig,
    pairs: BTreeMap<String, String>,
    /// Directory relative raster paths are resolved against.
    base: PathBuf,
}

fn load(common: &Common, extra: &[(&str, String)]) -> Result<Loaded> {
    let (file, base) = match &common.config {
        Some(p) => (parse_key_values(&read_text(p)?)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (BTreeMap::new(), PathBuf::new()),
    };
    let mut flags = BTreeMap::new();
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        flags.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(s) = common.seed {
        flags.insert("seed".into(), s.to_string());
    }
    if let Some(m) = &common.method {
        flags.insert("method".into(), m.clone());
    }
    for (k, v) in extra {
        flags.insert(k.to_string(), v.clone());
    }
    let pairs = merge(file, &flags);
    let cfg = ExperimentConfig::resolve(&pairs)?;
    Ok(Loaded { cfg, pairs, base })
}

fn features(l: &Loaded) -> Result<FeatureBank> {
    let spec = &l.cfg.grid;
    let mut channels = Vec::new();
    for p in &l.cfg.rasters {
        let path = if p.is_relative() { l.base.join(p) } else { p.clone() };
        let text = read_text(&path)?;
        channels.extend(parse_raster(&text, spec.width(), spec.height())?);
    }
    feature_bank(spec, &channels, l.cfg.goal_distance)
}

fn read_trajectories(path: &Path) -> Result<Vec<RawTrajectory>> {
    parse_trajectories(&read_text(path)?)
}

pub fn run(common: &Common, command: &Command) -> Result<()> {
    match command {
        Command::Synth { out } => synth(&load(common, &[])?, out),
        Command::Train { data, out, report, timings, export, holdout } => {
            let l = load(common, &[])?;
            let theta = train_cmd(&l, data, out, report.as_deref(), timings.as_deref(), holdout.as_deref())?;
            if let Some(dir) = export {
                export_grids(&l, data, &theta, dir)?;
            }
            Ok(())
        }
        Command::Interpolate { input, theta, out, linear, mode, retries, p, conv, plot } => {
            let mut extra = Vec::new();
            if let Some(m) = mode {
                extra.push(("rollout", if *m == Mode::Sto { "stochastic" } else { "deterministic" }.to_string()));
            }
            if let Some(r) = retries {
                extra.push(("retries", r.to_string()));
            }
            let mut l = load(common, &extra)?;
            if p.is_some() || conv.is_some() {
                let (p0, c0) = match l.cfg.kind {
                    MethodKind::Proposed { p, conv } => (p, conv),
                    _ => (2.0, false),
                };
                let kind = MethodKind::Proposed { p: p.unwrap_or(p0), conv: conv.map_or(c0, |c| c == Switch::On) };
                extra.push(("method", kind.key()));
                l = load(common, &extra)?;
            }
            interpolate(&l, input, theta.as_deref(), out, *linear, plot.as_deref())
        }
        Command::Evaluate { truth, pred, label, gapped, out, scores, plot, plot_id } => {
            let l = load(common, &[])?;
            evaluate(&l, truth, pred, label, gapped.as_deref(), out.as_deref(), scores.as_deref(), plot.as_deref(), plot_id.as_deref())
        }
        Command::Bench { out, detail, trace, sizes, horizon, reps, warmup, update_demos, variants, mhd } => {
            let l = load(common, &[])?;
            let variants = if variants.is_empty() {
                MethodKind::TABLE.to_vec()
            } else {
                variants
                    .iter()
                    .map(|v| MethodKind::parse(v).ok_or_else(|| Error::config(format!("unknown variant {v:?}"))))
                    .collect::<Result<_>>()?
            };
            let bc = BenchConfig {
                sizes: sizes.clone(),
                horizon: *horizon,
                repetitions: *reps,
                warmup: *warmup,
                variants,
                update_demos: *update_demos,
                seed: l.cfg.seed,
                ..Default::default()
            };
            bench(&l, &bc, out, detail.as_deref(), trace.as_deref(), *mhd)
        }
    }
}

fn synth(l: &Loaded, out: &Path) -> Result<()> {
    let cfg = &l.cfg;
    let spec = &cfg.grid;
    let sc = SynthConfig { n_train: cfg.n_train, n_test: cfg.n_test, ..SynthConfig::for_grid(spec, cfg.seed) };
    let data = synthesize(spec, &sc)?;
    let train_raw = paths_to_raw(spec, "train", &data.train);
    let test_raw = paths_to_raw(spec, "test", &data.test);
    let (gapped, _) = mask_gaps(&test_raw, cfg.gap, cfg.seed)?;

    write_text(&out.join("terrain.csv"), &format_grid(&data.terrain, spec.width(), spec.height()))?;
    write_text(&out.join("train.csv"), &format_trajectories(&train_raw))?;
    write_text(&out.join("test.csv"), &format_trajectories(&test_raw))?;
    write_text(&out.join("test_gapped.csv"), &format_trajectories(&gapped))?;
    write_text(&out.join("theta_true.csv"), &format_theta(&sc.true_theta))?;

    let mut pairs = l.pairs.clone();
    pairs.insert("rasters".into(), "terrain.csv".into());
    pairs.insert("width".into(), spec.width().to_string());
    pairs.insert("height".into(), spec.height().to_string());
    let mut conf = String::from("# Experiment settings for this dataset.\n");
    for (k, v) in &pairs {
        conf.push_str(&format!("{k} = {v}\n"));
    }
    write_text(&out.join("experiment.conf"), &conf)?;
    println!("wrote {} training and {} test trajectories to {}", data.train.len(), data.test.len(), out.display());
    Ok(())
}

fn training_set(l: &Loaded, raws: &[RawTrajectory]) -> Result<TrainingSet> {
    let paths = raws.iter().map(|r| project_raw(&l.cfg.grid, r)).collect::<Result<Vec<_>>>()?;
    TrainingSet::new(&l.cfg.grid, features(l)?, paths)
}

fn train_cmd(
    l: &Loaded,
    data: &Path,
    out: &Path,
    report: Option<&Path>,
    timings: Option<&Path>,
    holdout: Option<&Path>,
) -> Result<Theta> {
    let mut raws = read_trajectories(data)?;
    if let Some(h) = holdout {
        let (tr, te) = split(&raws, l.cfg.n_train, l.cfg.seed)?;
        write_text(h, &format_trajectories(&te))?;
        raws = tr;
    }
    let ts = training_set(l, &raws)?;
    let (theta, rep) = train(&ts, &l.cfg.train)?;
    write_text(out, &format_theta(&theta))?;
    if let Some(r) = report {
        let mut header = vec!["epoch".to_string(), "grad_norm".to_string(), "not_converged".to_string()];
        header.extend((0..theta.len()).map(|k| format!("theta_{k}")));
        let rows: Vec<Vec<String>> = (0..rep.epochs())
            .map(|e| {
                let mut row = vec![e.to_string(), format!("{:.9e}", rep.grad_norm_history[e]), rep.not_converged[e].to_string()];
                row.extend(rep.theta_history[e].iter().map(|w| format!("{w:.9e}")));
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_text(r, &format_table(&header, &rows))?;
    }
    if let Some(t) = timings {
        let rows: Vec<Vec<String>> = (0..rep.epochs())
            .map(|e| {
                vec![
                    e.to_string(),
                    format!("{:.6}", rep.vi_seconds[e]),
                    format!("{:.9}", rep.vi_sweep_seconds[e]),
                    format!("{:.6}", rep.update_seconds[e]),
                ]
            })
            .collect();
        write_text(t, &format_table(&["epoch", "vi_seconds", "sweep_seconds", "update_seconds"], &rows))?;
    }
    eprintln!(
        "{} epochs, converged: {}, final gradient norm {:.3e}",
        rep.epochs(),
        rep.converged,
        rep.grad_norm_history.last().copied().unwrap_or(0.0)
    );
    print!("{}", format_theta(&theta));
    Ok(theta)
}

fn export_grids(l: &Loaded, data: &Path, theta: &Theta, dir: &Path) -> Result<()> {
    let raws = read_trajectories(data)?;
    let first = raws.first().ok_or(Error::EmptyInput("no demonstrations to export"))?;
    let ts = training_set(l, std::slice::from_ref(first))?;
    let path = &ts.demos()[0];
    let spec = &l.cfg.grid;
    let features = ts.features().for_goal(spec, *path.last().expect("non-empty"))?;
    let (grid, goal, steps, art, policy) = plan_for_path(spec, &features, path, theta, &l.cfg.train.method)?;
    let steps = if grid.is_time_augmented() { steps } else { steps * l.cfg.train.forward_factor };
    let field = forward_pass(&policy, &grid, path[0], goal, steps)?;
    for (name, text) in value_grids(spec.width(), spec.height(), &art) {
        write_text(&dir.join(name), &text)?;
    }
    write_text(&dir.join("visitation.csv"), &format_grid(&field.d, spec.width(), spec.height()))
}

/// Straight-line fill of a trajectory's gap rows, keeping their times.
fn linear_rows(spec: &GridSpec, traj: &RawTrajectory) -> Result<RawTrajectory> {
    let g = split_gapped(spec, traj)?;
    if !g.has_gap() {
        return Ok(traj.clone());
    }
    let (a, b) = (g.mask.start, g.mask.start + g.mask.len);
    let (Some(p0), Some(p1)) = (traj.samples[a - 1].point, traj.samples[b].point) else {
        unreachable!("anchors are observed")
    };
    let mut out = traj.clone();
    for (s, p) in out.samples[a..b].iter_mut().zip(linear_interpolation(p0, p1, g.mask.len)) {
        s.point = Some(p);
    }
    Ok(out)
}

fn interpolate(l: &Loaded, input: &Path, theta: Option<&Path>, out: &Path, linear: bool, plot: Option<&Path>) -> Result<()> {
    let spec = &l.cfg.grid;
    let trajs = read_trajectories(input)?;
    let mut filled = Vec::with_capacity(trajs.len());
    if linear {
        for t in &trajs {
            filled.push(linear_rows(spec, t)?);
        }
    } else {
        let theta = parse_theta(&read_text(theta.expect("required by the argument parser"))?)?;
        let bank = features(l)?;
        let method = &l.cfg.train.method;
        let mut unreached = 0;
        for (i, t) in trajs.iter().enumerate() {
            let g = split_gapped(spec, t)?;
            if !g.has_gap() {
                filled.push(t.clone());
                continue;
            }
            let fill = fill_gap(spec, &bank, &theta, method, &g.gap, &l.cfg.gap_settings(i))
                .map_err(|e| e.in_trajectory(t.id.clone()))?;
            if !fill.reached_goal {
                unreached += 1;
                eprintln!("warning: trajectory {}: fill stopped short of the far anchor", t.id);
            }
            filled.push(g.completed_rows(spec, &fill.interior));
        }
        if unreached > 0 {
            eprintln!("{unreached} of {} gaps were not closed", trajs.len());
        }
    }
    write_text(out, &format_trajectories(&filled))?;
    if let Some(svg) = plot {
        let label = if linear { "Linear".to_string() } else { l.cfg.kind.label() };
        let paths: Vec<LabeledPath> =
            filled.iter().map(|t| LabeledPath::new(format!("{} {label}", t.id), t.points())).collect();
        write_text(svg, &render_svg(&paths)?)?;
    }
    println!("filled {} trajectories", filled.len());
    Ok(())
}

/// Time span from the last observed sample before the gap to the first after it.
fn gap_span(traj: &RawTrajectory) -> Option<(i64, i64)> {
    let first = traj.samples.iter().position(|s| s.point.is_none())?;
    let last = traj.samples.iter().rposition(|s| s.point.is_none())?;
    Some((traj.samples.get(first.checked_sub(1)?)?.t, traj.samples.get(last + 1)?.t))
}

fn points_in(traj: &RawTrajectory, span: Option<(i64, i64)>, spec: &GridSpec, units: Units) -> Vec<(f64, f64)> {
    traj.samples
        .iter()
        .filter(|s| span.is_none_or(|(a, b)| s.t >= a && s.t <= b))
        .filter_map(|s| s.point)
        .map(|p| match units {
            Units::World => p,
            Units::Cells => spec.to_cell_units(p),
        })
        .collect()
}

fn find<'a>(set: &'a [RawTrajectory], id: &str, what: &str) -> Result<&'a RawTrajectory> {
    set.iter().find(|t| t.id == id).ok_or_else(|| Error::config(format!("{what} has no trajectory {id:?}")))
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    l: &Loaded,
    truth: &Path,
    preds: &[PathBuf],
    labels: &[String],
    gapped: Option<&Path>,
    out: Option<&Path>,
    scores_out: Option<&Path>,
    plot: Option<&Path>,
    plot_id: Option<&str>,
) -> Result<()> {
    if !labels.is_empty() && labels.len() != preds.len() {
        return Err(Error::config(format!("{} labels given for {} predictions", labels.len(), preds.len())));
    }
    let spec = &l.cfg.grid;
    let units = l.cfg.units;
    let truth = read_trajectories(truth)?;
    if truth.is_empty() {
        return Err(Error::EmptyInput("ground truth has no trajectories"));
    }
    let gapped = match gapped {
        Some(p) => Some(read_trajectories(p)?),
        None if l.cfg.scope == Scope::Gap => {
            return Err(Error::config("scoring gap segments needs --gapped (or set scope = whole)"))
        }
        None => None,
    };
    // Trajectories without a gap have nothing to score in gap scope.
    let mut spans = Vec::new();
    for t in &truth {
        let span = match (&gapped, l.cfg.scope) {
            (Some(g), Scope::Gap) => gap_span(find(g, &t.id, "gapped input")?).map(Some),
            _ => Some(None),
        };
        spans.push(span);
    }

    let mut methods = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        let label = labels.get(i).cloned().unwrap_or_else(|| {
            p.file_stem().map_or_else(|| format!("pred{i}"), |s| s.to_string_lossy().into_owned())
        });
        methods.push((label, read_trajectories(p)?));
    }

    let mut table = Vec::new();
    let mut per_traj: Vec<Vec<String>> = Vec::new();
    for (t, span) in truth.iter().zip(&spans) {
        if span.is_some() {
            per_traj.push(vec![t.id.clone()]);
        }
    }
    for (label, pred) in &methods {
        let mut d = Vec::new();
        for (t, span) in truth.iter().zip(&spans) {
            let Some(span) = span else { continue };
            let p = find(pred, &t.id, label)?;
            let score = modified_hausdorff(&points_in(t, *span, spec, units), &points_in(p, *span, spec, units))
                .map_err(|e| e.in_trajectory(t.id.clone()))?;
            per_traj[d.len()].push(format!("{score:.9}"));
            d.push(score);
        }
        let s = summarize(&d)?;
        println!("{label}: mhd mean {:.6} std {:.6} n {}", s.mean, s.std, s.n);
        table.push(vec![label.clone(), format!("{:.6}", s.mean), format!("{:.6}", s.std), s.n.to_string()]);
    }
    if let Some(o) = out {
        write_text(o, &format_table(&["method", "mhd_mean", "mhd_std", "n"], &table))?;
    }
    if let Some(o) = scores_out {
        let mut header = vec!["traj_id"];
        header.extend(methods.iter().map(|(l, _)| l.as_str()));
        write_text(o, &format_table(&header, &per_traj))?;
    }
    if let Some(svg) = plot {
        let id = plot_id.unwrap_or(&truth[0].id);
        let mut paths = vec![LabeledPath::new("gt", points_in(find(&truth, id, "ground truth")?, None, spec, Units::World))];
        for (label, pred) in &methods {
            paths.push(LabeledPath::new(label.clone(), points_in(find(pred, id, label)?, None, spec, Units::World)));
        }
        write_text(svg, &render_svg(&paths)?)?;
    }
    Ok(())
}

fn bench(l: &Loaded, bc: &BenchConfig, out: &Path, detail: Option<&Path>, trace: Option<&Path>, mhd: bool) -> Result<()> {
    let scores = if mhd {
        let cfg = &l.cfg;
        let spec = &cfg.grid;
        let sc = SynthConfig { n_train: cfg.n_train, n_test: cfg.n_test, ..SynthConfig::for_grid(spec, cfg.seed) };
        let data = synthesize(spec, &sc)?;
        let bank = feature_bank(spec, std::slice::from_ref(&data.terrain), true)?;
        let tests = mask_paths(&data.test, cfg.gap, cfg.seed)?;
        compare_methods(spec, &bank, &data.train, &tests, &bc.variants, &cfg.compare_settings())?
    } else {
        Vec::new()
    };
    let result = run_benchmark(bc)?;
    let table = result.table_csv(&scores);
    write_text(out, &table)?;
    if let Some(d) = detail {
        write_text(d, &result.detail_csv())?;
    }
    if let Some(t) = trace {
        write_text(t, &result.trace_csv())?;
    }
    print!("{table}");
    eprintln!("benchmark took {:.1} s", result.total_seconds);
    Ok(())
}
