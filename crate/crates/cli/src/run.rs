//! Runs an experiment config end to end and writes its outputs.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nonlocal_core::analysis::{decreasing_above_floor, oracle_fields, PairingRow};
use nonlocal_core::hj::{min_second_difference, regularization_constant, sandwich_fraction};
use nonlocal_core::{
    fit_rate, run_point, weak_star_pairing, ConvolutionRegularization, GapMeasurement, RateReport, RateStatus,
    StudySetup, SweepPoint, WeakStarProbe,
};

use crate::config::{DatumConfig, ExperimentConfig};
use crate::output::{binary_columns, csv_bytes, fmt_f64, sha256_hex, OutputDir, OutputFile};
use crate::plot::{gap_chart, Chart, Scale, Series, Style};
use crate::CliError;

/// Gaps at or below this count as zero (constant data and other trivial runs).
pub const ZERO_GAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub nonlocal_core: String,
    pub nonlocal_cli: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub fitted_slope: f64,
    pub slope_above_floor: Option<f64>,
    pub points_above_floor: usize,
    pub status: RateStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ks: Vec<f64>,
    pub sup_gaps: Vec<f64>,
    pub max_gap: f64,
    pub zero_gap: bool,
    pub rate: Option<RateSummary>,
    /// Why no rate was fitted, if it was not.
    pub rate_note: Option<String>,
    pub datum_range: (f64, f64),
    pub value_range: (f64, f64),
    pub max_range_excess: f64,
    /// Relative to the datum mass, boundary flux accounted for.
    pub max_conservation_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    /// SHA-256 of the normalized config (and the sampled datum file, if any).
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// The pipeline draws no random numbers.
    pub seeds: Option<Vec<u64>>,
    pub deterministic: bool,
    pub versions: Versions,
    pub workers: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub summary: RunSummary,
    pub checks: Vec<CheckResult>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::MissingOutput(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::MissingOutput(format!("{}: {e}", path.display())))
    }
}

/// Directory name for one k: zero-padded for integers so listings sort by k.
pub fn k_dir(k: f64) -> String {
    if k.fract() == 0.0 && k < 1e6 {
        format!("k_{:06}", k as u64)
    } else {
        format!("k_{k}")
    }
}

struct PointResult {
    measurement: GapMeasurement,
    datum_range: (f64, f64),
    value_range: (f64, f64),
    /// How far the trajectory leaves the datum's range (0 if it never does).
    range_excess: f64,
    conservation: f64,
    weak: Vec<PairingRow>,
    files: Vec<OutputFile>,
}

pub fn config_hash(config: &ExperimentConfig, base_dir: &Path) -> String {
    let mut bytes = config.to_toml().into_bytes();
    if let DatumConfig::Sampled { file } = &config.datum {
        if let Ok(extra) = std::fs::read(base_dir.join(file)) {
            bytes.extend_from_slice(&extra);
        }
    }
    sha256_hex(&bytes)
}

/// Resolves `output.dir` against the config's directory unless overridden.
pub fn output_root(config: &ExperimentConfig, base_dir: &Path, out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => base_dir.join(&config.output.dir),
    }
}

pub fn run_experiment(config: &ExperimentConfig, base_dir: &Path, out_dir: &Path) -> Result<RunManifest, CliError> {
    let issues = config.validate(base_dir);
    if !issues.is_empty() {
        return Err(CliError::Validation(issues));
    }
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let setup = config.to_setup(base_dir).map_err(|e| CliError::Validation(vec![e]))?;
    let workers = if config.output.workers == 0 { rayon::current_num_threads() } else { config.output.workers };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(anyhow::anyhow!("thread pool: {e}")))?;

    let results: Vec<PointResult> = pool.install(|| {
        config.k_sweep.par_iter().map(|&k| run_one(config, &setup, k, out_dir)).collect::<Result<_, _>>()
    })?;

    // Merge, single-threaded.
    let mut out = OutputDir::new(out_dir);
    let io = |e: anyhow::Error| CliError::Io(e);
    let measurements: Vec<GapMeasurement> = results.iter().map(|r| r.measurement).collect();
    let gaps: Vec<f64> = measurements.iter().map(|m| m.sup_gap).collect();
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let zero_gap = max_gap <= ZERO_GAP;
    out.write("gaps.csv", &gaps_csv(&measurements).map_err(io)?).map_err(io)?;

    let (report, rate_note) = if zero_gap {
        (None, Some("all gaps vanish; nothing to fit".to_string()))
    } else {
        match fit_rate(measurements.clone(), setup.q_max()) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    if let Some(r) = &report {
        out.write("rate_report.json", serde_json::to_string_pretty(r).map_err(|e| io(e.into()))?.as_bytes())
            .map_err(io)?;
        out.write("rate_report.txt", r.to_text().as_bytes()).map_err(io)?;
    }

    let weak_rows: Vec<(f64, &PairingRow)> =
        results.iter().flat_map(|r| r.weak.iter().map(move |w| (r.measurement.k, w))).collect();
    if config.output.weak_star {
        let sup: std::collections::HashMap<u64, f64> =
            measurements.iter().map(|m| (m.k.to_bits(), m.sup_gap)).collect();
        let rows = weak_rows.iter().map(|(k, w)| {
            let bound = config.grid.t_end * w.phi.derivative_l1() * sup[&k.to_bits()];
            vec![
                fmt_f64(*k),
                fmt_f64(w.phi.center),
                fmt_f64(w.phi.radius),
                fmt_f64(w.nonlocal),
                fmt_f64(w.oracle),
                fmt_f64(w.discrepancy),
                fmt_f64(bound),
            ]
        });
        let bytes =
            csv_bytes(&["k", "center", "radius", "nonlocal", "oracle", "discrepancy", "bound"], rows).map_err(io)?;
        out.write("weak_star.csv", &bytes).map_err(io)?;
    }

    let datum_range = results
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| (a.0.min(r.datum_range.0), a.1.max(r.datum_range.1)));
    let value_range = results
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| (a.0.min(r.value_range.0), a.1.max(r.value_range.1)));
    let summary = RunSummary {
        ks: config.k_sweep.clone(),
        sup_gaps: gaps.clone(),
        max_gap,
        zero_gap,
        rate: report.as_ref().map(|r| RateSummary {
            fitted_slope: r.fitted_slope,
            slope_above_floor: r.slope_above_floor,
            points_above_floor: r.points_above_floor,
            status: r.status,
        }),
        rate_note,
        datum_range,
        value_range,
        max_range_excess: results.iter().map(|r| r.range_excess).fold(0.0, f64::max),
        max_conservation_defect: results.iter().map(|r| r.conservation).fold(0.0, f64::max),
    };
    let checks = evaluate_checks(config, &summary, report.as_ref(), &measurements, &weak_rows);

    for r in results {
        out.absorb(r.files);
    }
    out.write("config.toml", config.to_toml().as_bytes()).map_err(io)?;
    if config.output.plots {
        for (rel, bytes) in render_plots(out_dir, &config.k_sweep).map_err(io)? {
            out.write(&rel, &bytes).map_err(io)?;
        }
    }

    let manifest = RunManifest {
        name: config.name.clone(),
        config_hash: config_hash(config, base_dir),
        config: config.clone(),
        seeds: None,
        deterministic: true,
        versions: Versions {
            nonlocal_core: nonlocal_core::VERSION.into(),
            nonlocal_cli: env!("CARGO_PKG_VERSION").into(),
        },
        workers,
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        summary,
        checks,
        outputs: out.into_files(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| io(e.into()))?;
    crate::output::write_atomic(&out_dir.join("manifest.json"), json.as_bytes()).map_err(io)?;
    if !manifest.passed() {
        return Err(CliError::Acceptance(Box::new(manifest)));
    }
    Ok(manifest)
}

fn run_one(config: &ExperimentConfig, setup: &StudySetup, k: f64, out_dir: &Path) -> Result<PointResult, CliError> {
    let p = run_point(setup, k).map_err(|e| CliError::Numerical(format!("k = {k}: {e}")))?;
    let numerical = |e: nonlocal_core::Error| CliError::Numerical(format!("k = {k}: {e}"));
    let io = |e: anyhow::Error| CliError::Io(e.context(format!("writing outputs for k = {k}")));
    let dir = k_dir(k);
    let mut out = OutputDir::new(out_dir);
    let datum = &p.trajectory.snapshots[0];
    let xs = p.grid.centers();

    if config.output.snapshots_csv || config.output.binary {
        let (t, x, q) = flatten(p.trajectory.snapshots.iter().map(|f| (f.time, f.values.as_slice())), &xs);
        if config.output.snapshots_csv {
            out.write(&format!("{dir}/snapshots.csv"), &txq_csv(&t, &x, &q).map_err(io)?).map_err(io)?;
        }
        if config.output.binary {
            out.write(&format!("{dir}/snapshots.bin"), &binary_columns(&[&t, &x, &q])).map_err(io)?;
        }
    }
    let need_oracle = config.output.weak_star || config.output.plots || config.output.snapshots_csv;
    let oracle = if need_oracle { Some(oracle_fields(&p.trajectory, &p.oracle).map_err(numerical)?) } else { None };
    if let (Some(fields), true) = (&oracle, config.output.snapshots_csv) {
        let (t, x, q) = flatten(fields.iter().map(|f| (f.time, f.values.as_slice())), &xs);
        out.write(&format!("{dir}/oracle.csv"), &txq_csv(&t, &x, &q).map_err(io)?).map_err(io)?;
    }
    if config.output.primitives {
        out.write(&format!("{dir}/primitive.csv"), &primitive_csv(&p).map_err(numerical)?.map_err(io)?).map_err(io)?;
    }
    if !config.output.regularization.is_empty() {
        out.write(
            &format!("{dir}/regularization.csv"),
            &regularization_csv(&p, &config.output.regularization, setup.q_max()).map_err(numerical)?.map_err(io)?,
        )
        .map_err(io)?;
    }
    let weak = match (&oracle, config.output.weak_star) {
        (Some(fields), true) => {
            weak_star_pairing(&p.trajectory, fields, &WeakStarProbe::default(), config.output.weak_star_margin)
                .map_err(numerical)?
        }
        _ => Vec::new(),
    };
    let value_range = p.trajectory.value_range();
    Ok(PointResult {
        measurement: p.measurement,
        datum_range: (datum.min(), datum.max()),
        value_range,
        range_excess: (datum.min() - value_range.0).max(value_range.1 - datum.max()).max(0.0),
        conservation: p.trajectory.conservation_defect() / datum.mass().abs().max(f64::MIN_POSITIVE),
        weak,
        files: out.into_files(),
    })
}

fn flatten<'a>(series: impl Iterator<Item = (f64, &'a [f64])>, xs: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut t, mut x, mut q) = (Vec::new(), Vec::new(), Vec::new());
    for (time, values) in series {
        for (xi, v) in xs.iter().zip(values) {
            t.push(time);
            x.push(*xi);
            q.push(*v);
        }
    }
    (t, x, q)
}

fn txq_csv(t: &[f64], x: &[f64], q: &[f64]) -> anyhow::Result<Vec<u8>> {
    csv_bytes(&["t", "x", "q"], (0..t.len()).map(|i| vec![fmt_f64(t[i]), fmt_f64(x[i]), fmt_f64(q[i])]))
}

fn gaps_csv(ms: &[GapMeasurement]) -> anyhow::Result<Vec<u8>> {
    csv_bytes(
        &["k", "dx", "sup_gap", "moments_sum", "c_z", "theorem_bound", "allowance", "bound_satisfied"],
        ms.iter().map(|m| {
            vec![
                fmt_f64(m.k),
                fmt_f64(m.dx),
                fmt_f64(m.sup_gap),
                fmt_f64(m.moments_sum),
                fmt_f64(m.c_z),
                fmt_f64(m.theorem_bound),
                fmt_f64(m.allowance),
                m.bound_satisfied.to_string(),
            ]
        }),
    )
}

fn primitive_csv(p: &SweepPoint) -> nonlocal_core::Result<anyhow::Result<Vec<u8>>> {
    let xs = p.grid.interfaces();
    let mut rows = Vec::new();
    for (q, &t) in p.primitive.q_values.iter().zip(&p.primitive.times) {
        let reference =
            if t > 0.0 { p.oracle.eval_many(t, &xs)? } else { xs.iter().map(|&x| p.oracle.datum().eval(x)).collect() };
        for i in 0..xs.len() {
            rows.push(vec![fmt_f64(t), fmt_f64(xs[i]), fmt_f64(q[i]), fmt_f64(reference[i])]);
        }
    }
    Ok(csv_bytes(&["t", "x", "Q", "Q_ref"], rows))
}

fn regularization_csv(p: &SweepPoint, eps_list: &[f64], q_max: f64) -> nonlocal_core::Result<anyhow::Result<Vec<u8>>> {
    let dx = p.grid.dx;
    let mut rows = Vec::new();
    for &eps in eps_list {
        for (q, &t) in p.primitive.q_values.iter().zip(&p.primitive.times) {
            let r = ConvolutionRegularization::new(q, dx, eps)?;
            let dist = r.u.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            rows.push(vec![
                fmt_f64(eps),
                fmt_f64(t),
                fmt_f64(dist),
                fmt_f64(regularization_constant(q_max) * eps),
                fmt_f64(min_second_difference(&r.u, dx)),
                fmt_f64(-1.0 / eps),
                fmt_f64(sandwich_fraction(&r.u, dx, &p.kernels, eps)),
            ]);
        }
    }
    Ok(csv_bytes(
        &[
            "epsilon",
            "t",
            "distance",
            "distance_bound",
            "min_second_difference",
            "semiconvexity_bound",
            "sandwich_fraction",
        ],
        rows,
    ))
}

fn evaluate_checks(
    config: &ExperimentConfig,
    summary: &RunSummary,
    report: Option<&RateReport>,
    ms: &[GapMeasurement],
    weak: &[(f64, &PairingRow)],
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let c = &config.checks;
    if let Some(max_slope) = c.max_slope {
        let (passed, detail) = match (summary.zero_gap, report) {
            (true, _) => (true, "gaps vanish".to_string()),
            (false, Some(r)) => {
                (r.fitted_slope <= max_slope, format!("fitted slope {:.6} vs {max_slope}", r.fitted_slope))
            }
            (false, None) => (false, format!("no rate fit: {}", summary.rate_note.clone().unwrap_or_default())),
        };
        out.push(CheckResult { name: "slope".into(), passed, detail });
    }
    if c.bounds {
        let bad: Vec<String> = ms.iter().filter(|m| !m.bound_satisfied).map(|m| format!("k={}", m.k)).collect();
        out.push(CheckResult {
            name: "bounds".into(),
            passed: bad.is_empty(),
            detail: if bad.is_empty() {
                "sup_gap <= bound + allowance for every k".into()
            } else {
                format!("violated at {}", bad.join(", "))
            },
        });
    }
    if c.decreasing {
        let passed = summary.zero_gap || summary.sup_gaps.windows(2).all(|w| w[1] < w[0]);
        out.push(CheckResult { name: "decreasing".into(), passed, detail: format!("sup gaps {:?}", summary.sup_gaps) });
    }
    if c.maximum_principle {
        let excess = summary.max_range_excess;
        out.push(CheckResult {
            name: "maximum_principle".into(),
            passed: excess <= 1e-12,
            detail: format!("largest excursion outside the datum range {excess:.3e}"),
        });
    }
    if c.weak_star {
        let sup: std::collections::HashMap<u64, f64> = ms.iter().map(|m| (m.k.to_bits(), m.sup_gap)).collect();
        let within = weak
            .iter()
            .all(|(k, w)| w.discrepancy <= config.grid.t_end * w.phi.derivative_l1() * sup[&k.to_bits()] + ZERO_GAP);
        let probe = WeakStarProbe::default();
        let decreasing = probe.functions.iter().all(|phi| {
            let seq: Vec<f64> = weak.iter().filter(|(_, w)| w.phi == *phi).map(|(_, w)| w.discrepancy).collect();
            decreasing_above_floor(&seq, ZERO_GAP)
        });
        out.push(CheckResult {
            name: "weak_star".into(),
            passed: within && decreasing,
            detail: format!("within bound: {within}, decreasing in k: {decreasing}"),
        });
    }
    out
}

/// Renders `gap_vs_k.svg` and, when snapshot CSVs exist, `snapshots.svg` for the largest k.
pub fn render_plots(run_dir: &Path, ks: &[f64]) -> anyhow::Result<Vec<(String, Vec<u8>)>> {
    let gaps_path = run_dir.join("gaps.csv");
    let mut rdr =
        csv::Reader::from_path(&gaps_path).with_context(|| format!("missing run output {}", gaps_path.display()))?;
    let (mut k, mut g, mut b) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> anyhow::Result<f64> { Ok(rec.get(i).context("short row in gaps.csv")?.parse()?) };
        k.push(num(0)?);
        g.push(num(2)?);
        b.push(num(5)? + num(6)?);
    }
    let mut out = vec![("gap_vs_k.svg".to_string(), gap_chart(&k, &g, &b).render().into_bytes())];

    if let Some(&k_last) = ks.last() {
        let dir = run_dir.join(k_dir(k_last));
        let snap = dir.join("snapshots.csv");
        if snap.exists() {
            let mut series = time_series(&snap, "q^k")?;
            let oracle = dir.join("oracle.csv");
            if oracle.exists() {
                if let Some(mut last) = time_series(&oracle, "entropy solution")?.pop() {
                    last.style = Style::Dashed;
                    series.push(last);
                }
            }
            let chart =
                Chart::new(&format!("density snapshots, k = {k_last}"), "x", "q", Scale::Linear, Scale::Linear, series);
            out.push(("snapshots.svg".to_string(), chart.render().into_bytes()));
        }
    }
    Ok(out)
}

const MAX_PLOT_POINTS: usize = 600;

/// Up to five evenly spaced snapshots from a `t,x,q` CSV, one series each.
fn time_series(path: &Path, label: &str) -> anyhow::Result<Vec<Series>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut by_time: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let t: f64 = rec.get(0).context("t")?.parse()?;
        let x: f64 = rec.get(1).context("x")?.parse()?;
        let q: f64 = rec.get(2).context("q")?.parse()?;
        match by_time.last_mut() {
            Some((tl, pts)) if *tl == t => pts.push((x, q)),
            _ => by_time.push((t, vec![(x, q)])),
        }
    }
    let n = by_time.len();
    let pick: Vec<usize> = if n <= 5 { (0..n).collect() } else { (0..5).map(|i| i * (n - 1) / 4).collect() };
    Ok(pick
        .into_iter()
        .map(|i| {
            let (t, pts) = &by_time[i];
            let stride = pts.len().div_ceil(MAX_PLOT_POINTS).max(1);
            let mut points: Vec<(f64, f64)> = pts.iter().step_by(stride).copied().collect();
            if let (Some(&last), Some(&kept)) = (pts.last(), points.last()) {
                if last != kept {
                    points.push(last);
                }
            }
            Series { label: format!("{label}, t = {}", (t * 1e4).round() / 1e4), points, style: Style::Line }
        })
        .collect())
}

/// Regenerates the plots of an existing run from its manifest.
pub fn emit_plots(manifest_path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let manifest = RunManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let plots = render_plots(dir, &manifest.config.k_sweep).map_err(|e| CliError::MissingOutput(format!("{e:#}")))?;
    let mut written = Vec::new();
    for (rel, bytes) in plots {
        let path = dir.join(&rel);
        crate::output::write_atomic(&path, &bytes).map_err(CliError::Io)?;
        written.push(path);
    }
    Ok(written)
}
