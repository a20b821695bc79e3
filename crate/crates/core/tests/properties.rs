use proptest::prelude::*;

use nonlocal_core::hj::{grid_lipschitz, inf_convolution, sup_convolution};
use nonlocal_core::*;

fn shape_strategy() -> impl Strategy<Value = KernelShape> {
    prop_oneof![
        (0.2f64..5.0).prop_map(|rate| KernelShape::Exponential { rate }),
        (0.2f64..3.0).prop_map(|width| KernelShape::Box { width }),
        (0.2f64..3.0).prop_map(|width| KernelShape::Triangle { width }),
    ]
}

fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n)
}

fn split_strategy() -> impl Strategy<Value = SplitSpec> {
    prop_oneof![Just(SplitSpec::EngquistOsher), Just(SplitSpec::Midpoint { kappa: None }), Just(SplitSpec::OneSided),]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stencils_have_unit_mass(shape in shape_strategy(), k in 1.0f64..64.0, dx in 0.001f64..0.1) {
        for side in [KernelSide::Left, KernelSide::Right] {
            let kern = KernelFamily::new(side, shape).unwrap().scaled(k).unwrap();
            let a: f64 = kern.interface_stencil(dx).iter().sum();
            let b: f64 = kern.center_stencil(dx).iter().sum();
            prop_assert!((a - 1.0).abs() <= 1e-12);
            prop_assert!((b - 1.0).abs() <= 1e-12);
            prop_assert!((kern.moments().total_mass - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn moments_are_ordered(shape in shape_strategy(), k in 0.5f64..100.0, x in 0.001f64..2.0, y in 0.001f64..2.0) {
        let kern = KernelFamily::new(KernelSide::Left, shape).unwrap().scaled(k).unwrap();
        let m = kern.moments();
        prop_assert!(m.truncated_first_moment >= 0.0);
        prop_assert!(m.truncated_first_moment <= m.total_mass + 1e-15);
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(kern.tail_mass(hi) <= kern.tail_mass(lo));
        let twice = KernelFamily::new(KernelSide::Left, shape).unwrap().scaled(2.0 * k).unwrap();
        prop_assert!(twice.tail_mass(x) <= kern.tail_mass(x));
    }

    #[test]
    fn custom_convex_flux_splits_are_compatible(c1 in -1.0f64..1.0, c2 in 0.0f64..2.0, spec in split_strategy()) {
        let flux = FluxModel::from_coefficients("custom", &[0.0, c1, c2]).unwrap();
        if let Ok(split) = VelocitySplit::new(&flux, spec) {
            for i in 0..=100 {
                let s = i as f64 / 100.0;
                prop_assert!((s * split.eval(s, s) - flux.f(s)).abs() <= 1e-8);
            }
            prop_assert!(split.is_monotone(20));
        }
    }

    #[test]
    fn larger_kappa_stays_monotone(extra in 0.0f64..3.0) {
        let flux = FluxModel::builtin("cubic").unwrap();
        let k0 = flux.vtilde_prime_sup();
        let split = VelocitySplit::new(&flux, SplitSpec::Midpoint { kappa: Some(k0 + extra) }).unwrap();
        prop_assert!(split.is_monotone(30));
    }

    #[test]
    fn shifted_flux_matches_difference_quotient(m in -2.0f64..2.0, s in 1e-4f64..2.0, neg in any::<bool>()) {
        let s = if neg { -s } else { s };
        for name in ["burgers", "lwr", "cubic"] {
            let base = FluxModel::builtin(name).unwrap();
            let sh = shift_model(&base, m).unwrap();
            prop_assert_eq!(sh.model.f(0.0), 0.0);
            let direct = (base.f(s + m) - base.f(m)) / s;
            prop_assert!((sh.vtilde_shift(s) - direct).abs() <= 1e-10);
        }
    }

    #[test]
    fn nonlocal_averages_bracket_the_field(values in field_strategy(96), k in 2.0f64..20.0, shape in shape_strategy()) {
        let g = Grid::new(-1.0, 1.0 / 48.0, 96).unwrap();
        let f = Field::new(g, values, 0.0).unwrap();
        let kernels = KernelPair::symmetric(shape, k).unwrap();
        for b in [Boundary::Periodic, Boundary::Outflow] {
            let (wm, wp) = nonlocal_averages(&f, &kernels, b);
            let (lo, hi) = (f.min(), f.max());
            for w in wm.iter().chain(&wp) {
                prop_assert!(*w >= lo - 1e-12 && *w <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn periodic_runs_conserve_mass_and_bounds(values in field_strategy(64), spec in split_strategy(), name in prop::sample::select(vec!["burgers", "lwr", "cubic"])) {
        let g = Grid::new(-1.0, 1.0 / 32.0, 64).unwrap();
        let datum = Field::new(g, values, 0.0).unwrap();
        let flux = FluxModel::builtin(name).unwrap().with_range(0.0, datum.max()).unwrap();
        let Ok(split) = VelocitySplit::new(&flux, spec) else { return Ok(()) };
        let kernels = KernelPair::symmetric(KernelShape::Triangle { width: 1.0 }, 4.0).unwrap();
        let opts = SolverOptions::new(0.25).with_boundary(Boundary::Periodic);
        let traj = NonlocalSolver::new(g, kernels, split, opts).unwrap().solve(&datum).unwrap();
        let (lo, hi) = traj.value_range();
        prop_assert!(lo >= -1e-12);
        prop_assert!(hi <= datum.max() + 1e-12);
        prop_assert!(traj.conservation_defect() <= 1e-10 * datum.mass().max(1e-300));
    }

    #[test]
    fn periodic_translation_equivariance(values in field_strategy(64), shift in 1isize..63) {
        let g = Grid::new(-1.0, 1.0 / 32.0, 64).unwrap();
        let datum = Field::new(g, values, 0.0).unwrap();
        let flux = FluxModel::builtin("lwr").unwrap().with_range(0.0, 1.0).unwrap();
        let split = VelocitySplit::new(&flux, SplitSpec::EngquistOsher).unwrap();
        let kernels = KernelPair::symmetric(KernelShape::Box { width: 1.0 }, 4.0).unwrap();
        let solver = NonlocalSolver::new(g, kernels, split, SolverOptions::new(0.1).with_boundary(Boundary::Periodic)).unwrap();
        let a = solver.solve(&datum).unwrap();
        let b = solver.solve(&datum.rotated(shift)).unwrap();
        prop_assert_eq!(a.last().rotated(shift).values, b.last().values.clone());
    }

    #[test]
    fn envelopes_bracket_and_preserve_lipschitz(values in field_strategy(80), eps in 0.01f64..0.5) {
        let dx = 1.0 / 40.0;
        let mut q = vec![0.0];
        for v in &values {
            q.push(q.last().unwrap() + v * dx);
        }
        let qmax = grid_lipschitz(&q, dx);
        let plus = sup_convolution(&q, dx, eps).unwrap();
        let minus = inf_convolution(&q, dx, eps).unwrap();
        for i in 0..q.len() {
            prop_assert!(plus[i] >= q[i] && plus[i] <= q[i] + qmax * qmax * eps / 2.0 + 1e-13);
            prop_assert!(minus[i] <= q[i] && minus[i] >= q[i] - qmax * qmax * eps / 2.0 - 1e-13);
        }
        prop_assert!(grid_lipschitz(&plus, dx) <= qmax + 1e-12);
        prop_assert!(grid_lipschitz(&minus, dx) <= qmax + 1e-12);
    }

    #[test]
    fn hopf_lax_is_lipschitz(values in field_strategy(40), pairs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 50), t in 0.05f64..1.0) {
        let g = Grid::new(-1.0, 0.05, 40).unwrap();
        let datum = Field::new(g, values, 0.0).unwrap();
        let sol = ViscositySolutionEval::new(PrimitiveDatum::from_field(&datum), &FluxModel::builtin("burgers").unwrap()).unwrap();
        let l = datum.max();
        for (a, b) in pairs {
            let d = (sol.eval(t, a).unwrap() - sol.eval(t, b).unwrap()).abs();
            prop_assert!(d <= l * (a - b).abs() + 1e-12);
        }
    }

    #[test]
    fn hopf_lax_cone_of_dependence(values in field_strategy(80), bump in 0.0f64..1.0, t in 0.05f64..0.5) {
        // modify the datum only on [1, 2]; Q(t, .) must not change on [a, b] = [-2, 1 - L t]
        let g = Grid::new(-2.0, 0.05, 80).unwrap();
        let flux = FluxModel::builtin("burgers").unwrap();
        let base = Field::new(g, values.clone(), 0.0).unwrap();
        let mut other = values;
        for (i, v) in other.iter_mut().enumerate() {
            if g.center(i) > 1.0 {
                *v = bump;
            }
        }
        let other = Field::new(g, other, 0.0).unwrap();
        let l = 1.0;
        let a = ViscositySolutionEval::new(PrimitiveDatum::from_field(&base), &flux).unwrap();
        let b = ViscositySolutionEval::new(PrimitiveDatum::from_field(&other), &flux).unwrap();
        for i in 0..=40 {
            let x = -2.0 + (3.0 - l * t - 1e-9) * i as f64 / 40.0;
            prop_assert!((a.eval(t, x).unwrap() - b.eval(t, x).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn monotone_datum_keeps_convex_primitive(mut values in field_strategy(60), t in 0.05f64..1.0) {
        values.sort_by(f64::total_cmp);
        let g = Grid::new(-1.5, 0.05, 60).unwrap();
        let datum = Field::new(g, values, 0.0).unwrap();
        let sol = ViscositySolutionEval::new(PrimitiveDatum::from_field(&datum), &FluxModel::builtin("burgers").unwrap()).unwrap();
        let xs: Vec<f64> = (0..=200).map(|i| -1.5 + 3.0 * i as f64 / 200.0).collect();
        let q = sol.eval_many(t, &xs).unwrap();
        for w in q.windows(3) {
            prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-10);
        }
    }

    #[test]
    fn rate_fit_is_scale_equivariant(c in 1e-3f64..1e3, p in 0.1f64..1.5) {
        let kernels = KernelPair::symmetric(KernelShape::Box { width: 1.0 }, 8.0).unwrap();
        let inputs = BoundInputs { q_max: 1.0, t_end: 1.0, grad_v: 1.0, v_max: 1.0 };
        let ms = |scale: f64| -> Vec<GapMeasurement> {
            [8.0, 16.0, 32.0, 64.0, 128.0]
                .iter()
                .map(|&k: &f64| GapMeasurement::new(k, 1e-4, scale * (1.0 + 0.1 * k.sin()) * k.powf(-p), &kernels, inputs))
                .collect()
        };
        let a = fit_rate(ms(1.0), 1.0).unwrap();
        let b = fit_rate(ms(c), 1.0).unwrap();
        prop_assert!((a.fitted_slope - b.fitted_slope).abs() <= 1e-12);
    }
}

#[test]
fn hopf_lax_semigroup_on_shock_datum() {
    // shock of Burgers with q0 = 1_{x<0} sits on the node x = 0.25 at t1 = 0.5
    let g = Grid::covering(-2.0, 2.0, 1.0 / 64.0).unwrap();
    let flux = FluxModel::builtin("burgers").unwrap();
    let datum = Datum::Riemann { q_left: 1.0, q_right: 0.0, x_jump: 0.0 }.cell_averages(g);
    let sol = ViscositySolutionEval::new(PrimitiveDatum::from_field(&datum), &flux).unwrap();
    let (t1, t2) = (0.5, 0.3);
    let mid = sol.primitive_on(t1, &g).unwrap();
    let restart = ViscositySolutionEval::new(PrimitiveDatum::new(g.interfaces(), mid).unwrap(), &flux).unwrap();
    for i in 0..=100 {
        let x = -1.5 + 3.0 * i as f64 / 100.0;
        let a = restart.eval(t2, x).unwrap();
        let b = sol.eval(t1 + t2, x).unwrap();
        assert!((a - b).abs() <= 1e-8, "x={x}: {a} vs {b}");
    }
}

#[test]
fn self_gap_is_zero_and_constant_datum_gap_vanishes() {
    let setup = StudySetup::new(
        Datum::Constant { value: 0.4 },
        FluxModel::builtin("burgers").unwrap(),
        SplitSpec::Midpoint { kappa: None },
        KernelShape::Box { width: 1.0 },
    );
    let mut setup = setup;
    setup.domain = (-2.0, 2.0);
    setup.t_end = 0.2;
    setup.snapshots = 4;
    for k in [8.0, 32.0] {
        let p = run_point(&setup, k).unwrap();
        assert!(p.measurement.sup_gap <= 1e-8, "k={k}: {}", p.measurement.sup_gap);
        assert_eq!(analysis::primitive_gap_between(&p.primitive, &p.primitive).unwrap(), 0.0);
        let oracle = analysis::oracle_fields(&p.trajectory, &p.oracle).unwrap();
        let rows = weak_star_pairing(&p.trajectory, &oracle, &WeakStarProbe::default(), 0.25).unwrap();
        assert!(rows.iter().all(|r| r.discrepancy <= 1e-8));
        let terms = nonlocal_term_convergence(
            &p.trajectory,
            &p.kernels,
            Boundary::Outflow,
            &oracle,
            &WeakStarProbe::default(),
            0.25,
        )
        .unwrap();
        for r in terms {
            assert!((r.w_minus - r.density).abs() <= 1e-12 && (r.w_plus - r.density).abs() <= 1e-12);
        }
    }
}

#[test]
fn pairing_with_disjoint_test_function_is_zero() {
    let g = Grid::covering(-3.0, 3.0, 1.0 / 64.0).unwrap();
    let flux = FluxModel::builtin("burgers").unwrap().with_range(0.0, 0.8).unwrap();
    let split = VelocitySplit::new(&flux, SplitSpec::Midpoint { kappa: None }).unwrap();
    let kernels = KernelPair::symmetric(KernelShape::Box { width: 1.0 }, 16.0).unwrap();
    let datum = Datum::Bump { center: -2.0, radius: 0.3, height: 0.8 }.cell_averages(g);
    let opts = SolverOptions::new(0.3).with_uniform_outputs(0.3, 3);
    let traj = NonlocalSolver::new(g, kernels, split, opts).unwrap().solve(&datum).unwrap();
    let sol = ViscositySolutionEval::new(PrimitiveDatum::from_field(&datum), &flux).unwrap();
    let oracle = analysis::oracle_fields(&traj, &sol).unwrap();
    let probe = WeakStarProbe { functions: vec![TestFunction { center: 1.0, radius: 0.5 }] };
    let rows = weak_star_pairing(&traj, &oracle, &probe, 0.5).unwrap();
    assert!(rows[0].nonlocal.abs() <= 1e-10 && rows[0].oracle.abs() <= 1e-10);
    let escaped = WeakStarProbe { functions: vec![TestFunction { center: 2.8, radius: 0.5 }] };
    assert!(matches!(weak_star_pairing(&traj, &oracle, &escaped, 0.0), Err(Error::SupportEscape { .. })));
}

#[test]
fn shock_sweep_gaps_strictly_decrease() {
    let setup = StudySetup::new(
        Datum::Riemann { q_left: 1.0, q_right: 0.0, x_jump: 0.0 },
        FluxModel::builtin("burgers").unwrap(),
        SplitSpec::Midpoint { kappa: None },
        KernelShape::Box { width: 1.0 },
    );
    let pts = run_sweep(&setup, &[8.0, 16.0, 32.0, 64.0, 128.0]).unwrap();
    let gaps: Vec<f64> = pts.iter().map(|p| p.measurement.sup_gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn riemann_jump_location_for_nonlocal_solver() {
    // (0.8, 0.2) Burgers shock travels at 0.5; compare to the Hopf-Lax density at t = 0.5
    let k = 64.0;
    let g = Grid::covering(-2.0, 2.0, 1.0 / (8.0 * k)).unwrap();
    let flux = FluxModel::builtin("burgers").unwrap().with_range(0.0, 0.8).unwrap();
    let split = VelocitySplit::new(&flux, SplitSpec::Midpoint { kappa: None }).unwrap();
    let kernels = KernelPair::symmetric(KernelShape::Box { width: 1.0 }, k).unwrap();
    let datum = Datum::Riemann { q_left: 0.8, q_right: 0.2, x_jump: 0.0 }.cell_averages(g);
    let traj = NonlocalSolver::new(g, kernels, split, SolverOptions::new(0.5)).unwrap().solve(&datum).unwrap();
    let sol = ViscositySolutionEval::new(PrimitiveDatum::from_field(&datum), &flux).unwrap();
    let exact = entropy_density_from_primitive(&sol, 0.5, &g).unwrap();
    let crossing = |v: &[f64]| (0..v.len()).find(|&i| v[i] < 0.5).map(|i| g.interface(i)).unwrap();
    let a = crossing(&traj.last().values);
    let b = crossing(&exact.values);
    assert!((b - 0.25).abs() <= 2.0 * g.dx);
    assert!((a - b).abs() <= 2.0 * g.dx + 1.0 / k.sqrt(), "{a} vs {b}");
}
