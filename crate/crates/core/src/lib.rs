//! Two-sided nonlocal conservation laws, their local entropy limits and the
//! tooling to measure the singular-limit convergence rate.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod flux;
pub mod grid;
pub mod hj;
pub mod kernels;
pub mod local_ref;
pub mod nonlocal;
pub mod poly;
pub mod quadrature;
pub mod study;

pub use analysis::{
    fit_rate, nonlocal_term_convergence, primitive_gap, weak_star_pairing, BoundInputs, GapMeasurement, RateReport,
    RateStatus, TestFunction, WeakStarProbe,
};
pub use error::{Error, Result};
pub use flux::{shift_model, Convexity, FluxModel, ShiftedFluxModel, SplitSpec, VelocitySplit};
pub use grid::{Boundary, Datum, Field, Grid};
pub use hj::{
    build_primitive, inf_convolution, mollify, nonlocal_defect, sandwich_fraction, sup_convolution, AlphaRule,
    ConvolutionRegularization, DefectReport, DefectSide, NonlocalPrimitive,
};
pub use kernels::{
    KernelFamily, KernelMoments, KernelPair, KernelShape, KernelSide, KernelSpec, ScaledKernel, ShapeName,
};
pub use local_ref::{
    entropy_density_from_primitive, godunov_flux, godunov_solve, legendre_transform, Conjugate, GodunovOptions,
    PrimitiveDatum, ViscositySolutionEval,
};
pub use nonlocal::{
    interface_averages, nonlocal_averages, solve_sign_unrestricted, InterfaceVelocity, NonlocalSolver, SolverOptions,
    StepLedger, Trajectory,
};
pub use study::{run_point, run_sweep, StudySetup, SweepPoint};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
