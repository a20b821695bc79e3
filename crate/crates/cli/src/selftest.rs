//! Quick invariant battery behind the `selftest` verb.

use nonlocal_core::hj::{inf_convolution, sup_convolution};
use nonlocal_core::{
    entropy_density_from_primitive, godunov_solve, run_point, Boundary, Datum, Field, FluxModel, GodunovOptions, Grid,
    KernelFamily, KernelPair, KernelShape, KernelSide, NonlocalSolver, PrimitiveDatum, SolverOptions, SplitSpec,
    StudySetup, VelocitySplit, ViscositySolutionEval,
};

use crate::run::CheckResult;

const FLUXES: [&str; 3] = ["burgers", "lwr", "cubic"];
const SPLITS: [SplitSpec; 3] = [SplitSpec::EngquistOsher, SplitSpec::Midpoint { kappa: None }, SplitSpec::OneSided];
const SHAPES: [KernelShape; 3] =
    [KernelShape::Exponential { rate: 1.0 }, KernelShape::Box { width: 1.0 }, KernelShape::Triangle { width: 1.0 }];

fn check(name: &str, r: Result<String, String>) -> CheckResult {
    match r {
        Ok(detail) => CheckResult { name: name.into(), passed: true, detail },
        Err(detail) => CheckResult { name: name.into(), passed: false, detail },
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn kernel_mass() -> Result<String, String> {
    let mut worst = 0.0f64;
    for shape in SHAPES {
        for side in [KernelSide::Left, KernelSide::Right] {
            for k in [1.0, 8.0, 64.0] {
                let kern = KernelFamily::new(side, shape).and_then(|f| f.scaled(k)).map_err(|e| e.to_string())?;
                let s: f64 = kern.interface_stencil(1.0 / 256.0).iter().sum();
                worst = worst.max((s - 1.0).abs()).max((kern.moments().total_mass - 1.0).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("mass error {worst:.3e}"))?;
    Ok(format!("max mass error {worst:.1e}"))
}

fn compatibility() -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut combos = 0;
    for name in FLUXES {
        let f = FluxModel::builtin(name).map_err(|e| e.to_string())?;
        for spec in SPLITS {
            let Ok(split) = VelocitySplit::new(&f, spec) else { continue };
            combos += 1;
            for i in 0..=100 {
                let s = i as f64 / 100.0;
                worst = worst.max((s * split.eval(s, s) - f.f(s)).abs());
            }
            ensure(split.is_monotone(40), || format!("{name}/{spec:?} is not monotone"))?;
        }
    }
    ensure(worst <= 1e-8, || format!("|sV(s,s) - f(s)| = {worst:.3e}"))?;
    Ok(format!("{combos} flux/split combinations, max defect {worst:.1e}"))
}

fn periodic_matrix() -> Result<String, String> {
    let g = Grid::covering(-2.0, 2.0, 1.0 / 64.0).map_err(|e| e.to_string())?;
    let datum = Datum::Bump { center: 0.0, radius: 0.5, height: 0.8 }.cell_averages(g);
    let (lo, hi) = (datum.min(), datum.max());
    let (mut runs, mut excess, mut drift) = (0, 0.0f64, 0.0f64);
    for name in FLUXES {
        let f = FluxModel::builtin(name).and_then(|f| f.with_range(0.0, hi)).map_err(|e| e.to_string())?;
        for spec in SPLITS {
            let Ok(split) = VelocitySplit::new(&f, spec) else { continue };
            for shape in [KernelShape::Box { width: 1.0 }, KernelShape::Exponential { rate: 1.0 }] {
                let kernels = KernelPair::symmetric(shape, 16.0).map_err(|e| e.to_string())?;
                let opts = SolverOptions::new(0.25).with_boundary(Boundary::Periodic);
                let traj = NonlocalSolver::new(g, kernels, split.clone(), opts)
                    .and_then(|s| s.solve(&datum))
                    .map_err(|e| format!("{name}/{spec:?}: {e}"))?;
                let (a, b) = traj.value_range();
                excess = excess.max(lo - a).max(b - hi);
                drift = drift.max(traj.conservation_defect() / datum.mass());
                runs += 1;
            }
        }
    }
    ensure(excess <= 1e-12, || format!("range excursion {excess:.3e}"))?;
    ensure(drift <= 1e-10, || format!("relative mass drift {drift:.3e}"))?;
    Ok(format!("{runs} periodic runs, range excursion {:.1e}, mass drift {drift:.1e}", excess.max(0.0)))
}

fn constant_datum() -> Result<String, String> {
    let mut s = StudySetup::new(
        Datum::Constant { value: 0.5 },
        FluxModel::builtin("burgers").map_err(|e| e.to_string())?,
        SplitSpec::Midpoint { kappa: None },
        KernelShape::Box { width: 1.0 },
    );
    s.domain = (-1.0, 1.0);
    s.t_end = 0.2;
    s.snapshots = 2;
    let p = run_point(&s, 16.0).map_err(|e| e.to_string())?;
    ensure(p.measurement.sup_gap <= 1e-12, || format!("gap {:.3e}", p.measurement.sup_gap))?;
    Ok(format!("gap {:.1e}", p.measurement.sup_gap))
}

fn godunov_vs_hopf_lax() -> Result<String, String> {
    let burgers = FluxModel::builtin("burgers").map_err(|e| e.to_string())?;
    let mut errs = Vec::new();
    for dx in [1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0] {
        let g = Grid::covering(-2.0, 2.0, dx).map_err(|e| e.to_string())?;
        let d = Datum::Riemann { q_left: 0.0, q_right: 1.0, x_jump: 0.0 }.cell_averages(g);
        let god = godunov_solve(&d, &burgers, &GodunovOptions::new(0.5)).map_err(|e| e.to_string())?;
        let hl = ViscositySolutionEval::new(PrimitiveDatum::from_field(&d), &burgers).map_err(|e| e.to_string())?;
        let exact = entropy_density_from_primitive(&hl, 0.5, &g).map_err(|e| e.to_string())?;
        errs.push(god.last().l1_distance(&exact).map_err(|e| e.to_string())?);
    }
    ensure(errs.windows(2).all(|w| w[1] < w[0]), || format!("L1 errors not decreasing: {errs:?}"))?;
    Ok(format!("rarefaction L1 {:.2e} -> {:.2e}", errs[0], errs[2]))
}

fn envelopes() -> Result<String, String> {
    let dx = 1.0 / 128.0;
    let q: Vec<f64> = (0..=256)
        .map(|i| {
            let x = i as f64 * dx - 1.0;
            0.3 * x + 0.1 * (7.0 * x).sin().abs()
        })
        .collect();
    let l = 1.0;
    for eps in [0.02, 0.1] {
        let p = sup_convolution(&q, dx, eps).map_err(|e| e.to_string())?;
        let m = inf_convolution(&q, dx, eps).map_err(|e| e.to_string())?;
        for i in 0..q.len() {
            ensure(m[i] <= q[i] && q[i] <= p[i], || format!("envelope ordering fails at node {i}"))?;
            ensure(p[i] - q[i] <= l * l * eps / 2.0 + 1e-13, || format!("sup-convolution too far at node {i}"))?;
        }
    }
    Ok("ordering and distance bounds hold".into())
}

fn semigroup() -> Result<String, String> {
    let burgers = FluxModel::builtin("burgers").map_err(|e| e.to_string())?;
    let g = Grid::covering(-2.0, 2.0, 1.0 / 64.0).map_err(|e| e.to_string())?;
    let d: Field = Datum::Riemann { q_left: 1.0, q_right: 0.0, x_jump: 0.0 }.cell_averages(g);
    let sol = ViscositySolutionEval::new(PrimitiveDatum::from_field(&d), &burgers).map_err(|e| e.to_string())?;
    let mid = sol.primitive_on(0.5, &g).map_err(|e| e.to_string())?;
    let restart = PrimitiveDatum::new(g.interfaces(), mid)
        .and_then(|p| ViscositySolutionEval::new(p, &burgers))
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..=60 {
        let x = -1.5 + 3.0 * i as f64 / 60.0;
        let a = restart.eval(0.3, x).map_err(|e| e.to_string())?;
        let b = sol.eval(0.8, x).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    ensure(worst <= 1e-8, || format!("semigroup defect {worst:.3e}"))?;
    Ok(format!("semigroup defect {worst:.1e}"))
}

pub fn run_selftest() -> Vec<CheckResult> {
    vec![
        check("kernel unit mass", kernel_mass()),
        check("compatibility and monotonicity", compatibility()),
        check("maximum principle and conservation", periodic_matrix()),
        check("constant datum", constant_datum()),
        check("godunov vs hopf-lax", godunov_vs_hopf_lax()),
        check("envelopes", envelopes()),
        check("hopf-lax semigroup", semigroup()),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn battery_passes() {
        for c in super::run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
