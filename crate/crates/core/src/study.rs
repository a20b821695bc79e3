//! k-sweeps of the nonlocal solver against the local Hopf-Lax reference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_rate, primitive_gap, BoundInputs, GapMeasurement, RateReport};
use crate::error::{Error, Result};
use crate::flux::{shift_model, FluxModel, SplitSpec, VelocitySplit};
use crate::grid::{Boundary, Datum, Field, Grid};
use crate::hj::{build_primitive, AlphaRule, NonlocalPrimitive};
use crate::kernels::{KernelFamily, KernelPair, KernelShape, KernelSide, ScaledKernel};
use crate::local_ref::{PrimitiveDatum, ViscositySolutionEval};
use crate::nonlocal::{solve_sign_unrestricted, InterfaceVelocity, NonlocalSolver, SolverOptions, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySetup {
    pub datum: Datum,
    pub flux: FluxModel,
    pub split: SplitSpec,
    /// Shape of the left-looking kernel; `None` switches it off.
    pub left: Option<KernelShape>,
    pub right: Option<KernelShape>,
    /// Run on `q - inf q0` with the shifted flux (data may be negative).
    pub sign_unrestricted: bool,
    pub domain: (f64, f64),
    pub t_end: f64,
    /// Snapshots on `(0, T]` used for sup-in-time norms.
    pub snapshots: usize,
    /// Grid spacing is `min(dx_factor / k, dx_max)`.
    pub dx_factor: f64,
    pub dx_max: f64,
    pub cfl: f64,
    pub boundary: Boundary,
    pub interface_velocity: InterfaceVelocity,
    pub alpha_rule: AlphaRule,
}

impl StudySetup {
    pub fn new(datum: Datum, flux: FluxModel, split: SplitSpec, shape: KernelShape) -> Self {
        StudySetup {
            datum,
            flux,
            split,
            left: Some(shape),
            right: Some(shape),
            sign_unrestricted: false,
            domain: (-3.0, 3.0),
            t_end: 0.5,
            snapshots: 10,
            dx_factor: 0.125,
            dx_max: f64::INFINITY,
            cfl: 0.4,
            boundary: Boundary::Outflow,
            interface_velocity: InterfaceVelocity::CellMean,
            alpha_rule: AlphaRule::Ledger,
        }
    }

    pub fn dx_for(&self, k: f64) -> f64 {
        (self.dx_factor / k).min(self.dx_max)
    }

    /// Grid with an interface at `x = 0` and spacing `dx_for(k)` (rounded to fit the domain).
    pub fn grid_for(&self, k: f64) -> Result<Grid> {
        let (a, b) = self.domain;
        let dx = self.dx_for(k);
        let nl = (-a / dx).round() as usize;
        let nr = (b / dx).round() as usize;
        if a >= 0.0 || b <= 0.0 {
            return Err(Error::OriginNotOnGrid);
        }
        Grid::new(-(nl as f64) * dx, dx, nl + nr)
    }

    pub fn kernels_for(&self, k: f64) -> Result<KernelPair> {
        let build = |side, shape: Option<KernelShape>| -> Result<Option<ScaledKernel>> {
            shape.map(|s| KernelFamily::new(side, s)?.scaled(k)).transpose()
        };
        KernelPair::new(build(KernelSide::Left, self.left)?, build(KernelSide::Right, self.right)?)
    }

    /// Flux restricted to `[0, sup q0]` (or `[inf q0, sup q0]` in sign-unrestricted mode).
    pub fn admissible_flux(&self) -> Result<FluxModel> {
        let (lo, hi) = self.datum.bounds();
        if self.sign_unrestricted {
            return self.flux.clone().with_range(lo, hi);
        }
        if lo < 0.0 {
            return Err(Error::InvalidArgument("negative data need the sign-unrestricted solver".into()));
        }
        self.flux.clone().with_range(0.0, hi)
    }

    /// Split actually handed to the solver for a given datum field.
    pub fn velocity_split_for(&self, datum: &Field) -> Result<VelocitySplit> {
        if self.sign_unrestricted {
            let (m, top) = (datum.min(), datum.max());
            let base = self.flux.clone().with_range(m, top)?;
            let shifted = shift_model(&base, m)?.model.with_range(0.0, top - m)?;
            return VelocitySplit::new(&shifted, self.split);
        }
        self.velocity_split()
    }

    pub fn velocity_split(&self) -> Result<VelocitySplit> {
        VelocitySplit::new(&self.admissible_flux()?, self.split)
    }

    /// `sup |q0|`, the density bound entering the rate constants.
    pub fn q_max(&self) -> f64 {
        let (lo, hi) = self.datum.bounds();
        lo.abs().max(hi.abs())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions::new(self.t_end)
            .with_uniform_outputs(self.t_end, self.snapshots.max(1))
            .with_cfl(self.cfl)
            .with_boundary(self.boundary)
            .with_interface_velocity(self.interface_velocity)
    }
}

/// Everything produced for one `k`.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub k: f64,
    pub grid: Grid,
    pub kernels: KernelPair,
    pub trajectory: Trajectory,
    pub primitive: NonlocalPrimitive,
    pub oracle: ViscositySolutionEval,
    pub measurement: GapMeasurement,
}

pub fn run_point(setup: &StudySetup, k: f64) -> Result<SweepPoint> {
    let grid = setup.grid_for(k)?;
    let kernels = setup.kernels_for(k)?;
    let datum: Field = setup.datum.cell_averages(grid);
    let split = setup.velocity_split_for(&datum)?;
    let solver = NonlocalSolver::new(grid, kernels, split.clone(), setup.solver_options())?;
    let trajectory = if setup.sign_unrestricted {
        if setup.alpha_rule != AlphaRule::Ledger {
            return Err(Error::InvalidArgument("sign-unrestricted runs need the ledger alpha rule".into()));
        }
        solve_sign_unrestricted(&datum, kernels, &setup.flux, setup.split, setup.solver_options())?
    } else {
        solver.solve(&datum)?
    };
    let primitive = build_primitive(&trajectory, &kernels, &split, setup.boundary, setup.alpha_rule)?;
    let oracle = ViscositySolutionEval::new(PrimitiveDatum::from_field(&datum), &setup.flux)?;
    let gap = primitive_gap(&primitive, &oracle)?;
    let q_max = setup.q_max();
    let inputs = BoundInputs { q_max, t_end: setup.t_end, grad_v: split.gradient_bound(), v_max: solver.v_max() };
    let measurement = GapMeasurement::new(k, grid.dx, gap, &kernels, inputs);
    Ok(SweepPoint { k, grid, kernels, trajectory, primitive, oracle, measurement })
}

/// Runs the sweep in parallel; results come back in the order of `ks`.
pub fn run_sweep(setup: &StudySetup, ks: &[f64]) -> Result<Vec<SweepPoint>> {
    ks.par_iter().map(|&k| run_point(setup, k)).collect()
}

pub fn rate_report(setup: &StudySetup, points: &[SweepPoint]) -> Result<RateReport> {
    fit_rate(points.iter().map(|p| p.measurement).collect(), setup.q_max())
}
