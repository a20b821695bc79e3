//! Shared fixtures for the criterion benches.

use nonlocal_core::{
    Datum, Field, FluxModel, Grid, KernelPair, KernelShape, NonlocalSolver, PrimitiveDatum, SolverOptions, SplitSpec,
    VelocitySplit, ViscositySolutionEval,
};

/// Burgers bump on `[-3, 3]` with `dx = 1/(8k)`, Box kernels at scale `k`.
pub fn bump_solver(k: f64, t_end: f64) -> (NonlocalSolver, Field) {
    let grid = Grid::covering(-3.0, 3.0, 1.0 / (8.0 * k)).expect("grid");
    let datum = Datum::Bump { center: 0.0, radius: 0.5, height: 0.8 }.cell_averages(grid);
    let flux = FluxModel::builtin("burgers").and_then(|f| f.with_range(0.0, 0.8)).expect("flux");
    let split = VelocitySplit::new(&flux, SplitSpec::Midpoint { kappa: None }).expect("split");
    let kernels = KernelPair::symmetric(KernelShape::Box { width: 1.0 }, k).expect("kernels");
    let solver = NonlocalSolver::new(grid, kernels, split, SolverOptions::new(t_end)).expect("solver");
    (solver, datum)
}

/// Hopf-Lax evaluator for the Burgers shock datum on a grid of `n` cells.
pub fn shock_oracle(n: usize) -> (ViscositySolutionEval, Vec<f64>) {
    let grid = Grid::new(-2.0, 4.0 / n as f64, n).expect("grid");
    let datum = Datum::Riemann { q_left: 1.0, q_right: 0.0, x_jump: 0.0 }.cell_averages(grid);
    let flux = FluxModel::builtin("burgers").expect("flux");
    let eval = ViscositySolutionEval::new(PrimitiveDatum::from_field(&datum), &flux).expect("oracle");
    (eval, grid.interfaces())
}

/// A Lipschitz, non-smooth primitive sampled on `n + 1` nodes.
pub fn rough_primitive(n: usize) -> (Vec<f64>, f64) {
    let dx = 2.0 / n as f64;
    let q = (0..=n)
        .map(|i| {
            let x = -1.0 + i as f64 * dx;
            0.4 * x + 0.2 * (9.0 * x).sin().abs()
        })
        .collect();
    (q, dx)
}
