//! Acceptance criteria 1-10. Runs as a plain binary so every criterion prints its verdict.

use std::process::ExitCode;
use std::time::Instant;

use nonlocal_core::analysis::{decreasing_above_floor, least_squares, oracle_fields};
use nonlocal_core::hj::{min_second_difference, regularization_constant, sandwich_fraction};
use nonlocal_core::study::rate_report;
use nonlocal_core::*;

const SWEEP: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn bump() -> Datum {
    Datum::Bump { center: 0.0, radius: 0.5, height: 0.8 }
}

fn riemann(ql: f64, qr: f64) -> Datum {
    Datum::Riemann { q_left: ql, q_right: qr, x_jump: 0.0 }
}

fn burgers() -> FluxModel {
    FluxModel::builtin("burgers").unwrap()
}

fn rate_setup(datum: Datum) -> StudySetup {
    StudySetup::new(datum, burgers(), SplitSpec::Midpoint { kappa: None }, KernelShape::Box { width: 1.0 })
}

/// Value ranges of every trajectory produced by criteria 1 and 2, for criterion 3.
#[derive(Default)]
struct Ranges(Vec<(String, f64, f64, f64, f64)>);

impl Ranges {
    fn record(&mut self, label: String, traj: &Trajectory, bounds: (f64, f64)) {
        let (lo, hi) = traj.value_range();
        self.0.push((label, lo, hi, bounds.0, bounds.1));
    }
}

fn criterion_1(ranges: &mut Ranges) -> Verdict {
    let setup = rate_setup(bump());
    let points = run_sweep(&setup, &SWEEP).unwrap();
    for p in &points {
        ranges.record(format!("c1 k={}", p.k), &p.trajectory, (0.0, 0.8));
    }
    let report = rate_report(&setup, &points).unwrap();
    let dec = report.gaps_strictly_decreasing();
    let slope = report.slope_passes();
    let bound = report.all_bounds_satisfied();
    let gaps: Vec<String> = report.measurements.iter().map(|m| format!("{:.3e}", m.sup_gap)).collect();
    verdict(
        dec && slope && bound,
        format!("gaps [{}] decreasing={dec} slope={:.3} bounds={bound}", gaps.join(", "), report.fitted_slope),
    )
}

fn criterion_2(ranges: &mut Ranges) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, datum) in [("shock", riemann(1.0, 0.0)), ("rarefaction", riemann(0.0, 1.0))] {
        let mut setup = rate_setup(datum);
        setup.t_end = 1.0;
        let p = run_point(&setup, 128.0).unwrap();
        ranges.record(format!("c2 {name}"), &p.trajectory, (0.0, 1.0));
        let m = p.measurement;
        let within = m.bound_satisfied;
        ok &= within;
        detail.push(format!("{name}: gap {:.3e} <= {:.3e} {within}", m.sup_gap, m.theorem_bound + m.allowance));
        if name == "rarefaction" {
            let q = p.trajectory.last();
            let l1: f64 = (0..p.grid.n_cells)
                .filter(|&i| p.grid.center(i).abs() <= 1.5)
                .map(|i| {
                    let (a, b) = (p.grid.interface(i), p.grid.interface(i + 1));
                    // exact cell average of clamp(x, 0, 1) at t = 1
                    let prim = |x: f64| -> f64 {
                        if x <= 0.0 {
                            0.0
                        } else if x <= 1.0 {
                            0.5 * x * x
                        } else {
                            x - 0.5
                        }
                    };
                    let fan = (prim(b) - prim(a)) / p.grid.dx;
                    (q.values[i] - fan).abs() * p.grid.dx
                })
                .sum();
            let fan_ok = l1 <= 0.05;
            ok &= fan_ok;
            detail.push(format!("fan L1 {l1:.3e} <= 0.05 {fan_ok}"));
        }
    }
    verdict(ok, detail.join("; "))
}

struct MatrixRun {
    label: String,
    lo: f64,
    hi: f64,
    mass_rel: f64,
}

fn matrix_runs() -> (Vec<MatrixRun>, Vec<String>) {
    let g = Grid::covering(-2.0, 2.0, 1.0 / 256.0).unwrap();
    let datum = bump().cell_averages(g);
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for name in ["burgers", "lwr", "cubic"] {
        let flux = FluxModel::builtin(name).unwrap().with_range(0.0, 0.8).unwrap();
        for spec in [SplitSpec::EngquistOsher, SplitSpec::Midpoint { kappa: None }, SplitSpec::OneSided] {
            let split = match VelocitySplit::new(&flux, spec) {
                Ok(s) => s,
                Err(_) => {
                    skipped.push(format!("{name}/{spec:?}"));
                    continue;
                }
            };
            for shape in [KernelShape::Box { width: 1.0 }, KernelShape::Exponential { rate: 1.0 }] {
                let kernels = KernelPair::symmetric(shape, 16.0).unwrap();
                let opts = SolverOptions::new(0.5).with_uniform_outputs(0.5, 10).with_boundary(Boundary::Periodic);
                let solver = NonlocalSolver::new(g, kernels, split.clone(), opts).unwrap();
                let traj = solver.solve(&datum).unwrap();
                let (lo, hi) = traj.value_range();
                let m0 = datum.mass();
                let mass_rel = traj.snapshots.iter().map(|s| (s.mass() - m0).abs() / m0).fold(0.0, f64::max);
                runs.push(MatrixRun { label: format!("{name}/{spec:?}/{shape:?}"), lo, hi, mass_rel });
            }
        }
    }
    (runs, skipped)
}

fn criterion_3(ranges: &Ranges, runs: &[MatrixRun], skipped: &[String]) -> Verdict {
    let tol = 1e-12;
    let mut bad = Vec::new();
    for (label, lo, hi, qmin, qmax) in &ranges.0 {
        if *lo < qmin - tol || *hi > qmax + tol {
            bad.push(format!("{label} [{lo:e}, {hi}]"));
        }
    }
    for r in runs {
        if r.lo < -tol || r.hi > 0.8 + tol {
            bad.push(format!("{} [{:e}, {}]", r.label, r.lo, r.hi));
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "{} trajectories checked, {} matrix combos skipped as invalid ({}){}",
            ranges.0.len() + runs.len(),
            skipped.len(),
            skipped.join(", "),
            if bad.is_empty() { String::new() } else { format!("; violations: {}", bad.join(", ")) }
        ),
    )
}

fn criterion_4(runs: &[MatrixRun]) -> Verdict {
    let worst = runs.iter().map(|r| r.mass_rel).fold(0.0, f64::max);
    verdict(worst <= 1e-10, format!("max relative mass drift {worst:.3e} over {} periodic runs", runs.len()))
}

fn criterion_5() -> Verdict {
    let mut worst = 0.0f64;
    let mut combos = 0;
    for name in ["burgers", "lwr", "cubic"] {
        let flux = FluxModel::builtin(name).unwrap();
        for spec in [SplitSpec::EngquistOsher, SplitSpec::Midpoint { kappa: None }, SplitSpec::OneSided] {
            let Ok(split) = VelocitySplit::new(&flux, spec) else { continue };
            combos += 1;
            let (lo, hi) = flux.range();
            for i in 0..=100 {
                let s = lo + (hi - lo) * i as f64 / 100.0;
                worst = worst.max((s * split.eval(s, s) - flux.f(s)).abs());
            }
        }
    }
    verdict(worst <= 1e-8, format!("max |sV(s,s) - f(s)| = {worst:.3e} over {combos} combos"))
}

fn criterion_6() -> Verdict {
    let setup = rate_setup(bump());
    let p = run_point(&setup, 64.0).unwrap();
    let dx = p.grid.dx;
    let q_max = 0.8;
    let mut ok = true;
    let mut detail = Vec::new();
    for eps in [0.1, 0.05, 0.02] {
        let mut dist = 0.0f64;
        let mut semi = f64::INFINITY;
        let mut frac = 1.0f64;
        for q in &p.primitive.q_values {
            let r = ConvolutionRegularization::new(q, dx, eps).unwrap();
            dist = r.u.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(dist, f64::max);
            semi = semi.min(min_second_difference(&r.u, dx));
            frac = frac.min(sandwich_fraction(&r.u, dx, &p.kernels, eps));
        }
        let cn = regularization_constant(q_max);
        let pass = dist <= cn * eps && semi >= -1.0 / eps - 1e-6 && frac >= 0.999;
        ok &= pass;
        detail.push(format!(
            "eps={eps}: |U-Q|={dist:.3e}<={:.3e}, min D2U={semi:.3e}>={:.3e}, sandwich {:.4}",
            cn * eps,
            -1.0 / eps,
            frac
        ));
    }
    verdict(ok, detail.join("; "))
}

fn criterion_7() -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, datum) in [("shock", riemann(1.0, 0.0)), ("rarefaction", riemann(0.0, 1.0))] {
        let mut errs = Vec::new();
        let dxs = [1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0];
        for dx in dxs {
            let g = Grid::covering(-2.0, 2.0, dx).unwrap();
            let d = datum.cell_averages(g);
            let god = godunov_solve(&d, &burgers(), &GodunovOptions::new(1.0)).unwrap();
            let hl = ViscositySolutionEval::new(PrimitiveDatum::from_field(&d), &burgers()).unwrap();
            let exact = entropy_density_from_primitive(&hl, 1.0, &g).unwrap();
            errs.push(god.last().l1_distance(&exact).unwrap());
        }
        let lx: Vec<f64> = dxs.iter().map(|d| d.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let order = least_squares(&lx, &ly).0;
        let pass = errs.windows(2).all(|w| w[1] < w[0]) && order >= 0.5;
        ok &= pass;
        detail.push(format!("{name}: L1 [{:.3e}, {:.3e}, {:.3e}] order {order:.3}", errs[0], errs[1], errs[2]));
    }
    verdict(ok, detail.join("; "))
}

fn criterion_8() -> Verdict {
    let setup = rate_setup(riemann(1.0, 0.0));
    let points = run_sweep(&setup, &SWEEP).unwrap();
    let probe = WeakStarProbe::default();
    let mut table: Vec<Vec<f64>> = vec![Vec::new(); probe.functions.len()];
    let mut bound_ok = true;
    for p in &points {
        let oracle = oracle_fields(&p.trajectory, &p.oracle).unwrap();
        let rows = weak_star_pairing(&p.trajectory, &oracle, &probe, 1.0).unwrap();
        for (i, row) in rows.iter().enumerate() {
            table[i].push(row.discrepancy);
            // |int int (q^k - q) phi| = |int int (Q^k - Q) phi_x| <= T ||phi'||_{L1} sup_gap
            bound_ok &= row.discrepancy <= setup.t_end * row.phi.derivative_l1() * p.measurement.sup_gap + 1e-12;
        }
    }
    let decreasing = table.iter().all(|d| decreasing_above_floor(d, 1e-12));
    let summary: Vec<String> = probe
        .functions
        .iter()
        .zip(&table)
        .map(|(phi, d)| format!("({},{}): {:.2e}->{:.2e}", phi.center, phi.radius, d[0], d[d.len() - 1]))
        .collect();
    verdict(decreasing && bound_ok, format!("decreasing={decreasing} bounded={bound_ok} {}", summary.join(" ")))
}

fn criterion_9() -> Verdict {
    let g = Grid::covering(-3.0, 3.0, 1.0 / 1024.0).unwrap();
    let kernels = KernelPair::symmetric(KernelShape::Box { width: 1.0 }, 128.0).unwrap();
    let spec = SplitSpec::Midpoint { kappa: None };
    let datum = riemann(-0.5, 0.5).cell_averages(g);
    let opts = SolverOptions::new(0.5);
    let traj = solve_sign_unrestricted(&datum, kernels, &burgers(), spec, opts.clone()).unwrap();
    let hl = ViscositySolutionEval::new(PrimitiveDatum::from_field(&datum), &burgers()).unwrap();
    let exact = entropy_density_from_primitive(&hl, 0.5, &g).unwrap();
    let l1 = traj.last().l1_distance(&exact).unwrap();

    let nonneg = bump().cell_averages(g);
    let shifted = solve_sign_unrestricted(&nonneg, kernels, &burgers(), spec, opts.clone()).unwrap();
    let flux = burgers().with_range(0.0, nonneg.max()).unwrap();
    let plain = NonlocalSolver::new(g, kernels, VelocitySplit::new(&flux, spec).unwrap(), opts)
        .unwrap()
        .solve(&nonneg)
        .unwrap();
    let identical = shifted.snapshots == plain.snapshots;
    verdict(l1 <= 0.05 && identical, format!("L1 {l1:.3e} <= 0.05; zero-shift bit-identical={identical}"))
}

fn criterion_10() -> Verdict {
    let mut setup = StudySetup::new(
        bump(),
        FluxModel::builtin("lwr").unwrap(),
        SplitSpec::OneSided,
        KernelShape::Box { width: 1.0 },
    );
    setup.left = None;
    let points = run_sweep(&setup, &SWEEP).unwrap();
    let report = rate_report(&setup, &points).unwrap();
    let gaps: Vec<String> = report.measurements.iter().map(|m| format!("{:.3e}", m.sup_gap)).collect();
    verdict(report.slope_passes(), format!("gaps [{}] slope={:.3}", gaps.join(", "), report.fitted_slope))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(usize, Verdict)> = Vec::new();
    let mut ranges = Ranges::default();
    let mut report = |n: usize, v: Verdict| {
        println!("criterion {n:>2}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, v));
    };
    report(1, criterion_1(&mut ranges));
    report(2, criterion_2(&mut ranges));
    let (runs, skipped) = matrix_runs();
    report(3, criterion_3(&ranges, &runs, &skipped));
    report(4, criterion_4(&runs));
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9());
    report(10, criterion_10());
    let failed: Vec<usize> = results.iter().filter(|(_, v)| !v.pass).map(|(n, _)| *n).collect();
    println!("acceptance: {}/{} passed in {:.1?}", results.len() - failed.len(), results.len(), start.elapsed());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
