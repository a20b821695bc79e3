//! Explicit upwind finite-volume solver for `q_t + (q V(W-[q], W+[q]))_x = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{shift_model, FluxModel, SplitSpec, VelocitySplit};
use crate::grid::{Boundary, Field, Grid};
use crate::kernels::KernelPair;

/// How the velocity at an interface is assembled from nonlocal averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceVelocity {
    /// `W-` and `W+` evaluated exactly at the interface point.
    InterfaceExact,
    /// Arithmetic mean of the two neighbouring cell-center averages.
    CellMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub cfl: f64,
    pub boundary: Boundary,
    pub interface_velocity: InterfaceVelocity,
    /// Snapshot times in `(0, t_end]`; the datum at `t = 0` is always recorded.
    pub output_times: Vec<f64>,
}

impl SolverOptions {
    pub fn new(t_end: f64) -> Self {
        SolverOptions {
            cfl: 0.4,
            boundary: Boundary::Outflow,
            interface_velocity: InterfaceVelocity::CellMean,
            output_times: vec![t_end],
        }
    }

    pub fn with_boundary(mut self, b: Boundary) -> Self {
        self.boundary = b;
        self
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn with_interface_velocity(mut self, v: InterfaceVelocity) -> Self {
        self.interface_velocity = v;
        self
    }

    /// `n` equispaced snapshots on `(0, t_end]`.
    pub fn with_uniform_outputs(mut self, t_end: f64, n: usize) -> Self {
        self.output_times = (1..=n).map(|i| t_end * i as f64 / n as f64).collect();
        self
    }

    pub fn t_end(&self) -> f64 {
        self.output_times.last().copied().unwrap_or(0.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if self.output_times.is_empty() {
            return Err(Error::InvalidArgument("no output times".into()));
        }
        let mut prev = 0.0;
        for &t in &self.output_times {
            if !(t.is_finite() && t > prev) {
                return Err(Error::InvalidArgument("output times must be positive and strictly increasing".into()));
            }
            prev = t;
        }
        Ok(())
    }
}

/// Solver output: snapshots plus the cumulative flux ledgers at the same times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Field>,
    /// `int_0^t F(s, 0) ds` through the interface at `x = 0` (`None` if the origin is not an interface).
    pub origin_flux: Option<Vec<f64>>,
    /// Net mass that entered through the two boundaries up to each snapshot.
    pub boundary_inflow: Vec<f64>,
    pub steps: usize,
}

impl Trajectory {
    pub fn grid(&self) -> Grid {
        self.snapshots[0].grid
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.time).collect()
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory holds at least the datum")
    }

    /// Largest `|mass(t) - mass(0) - inflow(t)|` over snapshots.
    pub fn conservation_defect(&self) -> f64 {
        let m0 = self.snapshots[0].mass();
        self.snapshots
            .iter()
            .zip(&self.boundary_inflow)
            .map(|(f, inflow)| (f.mass() - m0 - inflow).abs())
            .fold(0.0, f64::max)
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.snapshots.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f.min()), hi.max(f.max())))
    }
}

/// Per-step mass exchange.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepLedger {
    pub origin_flux: f64,
    pub inflow: f64,
}

/// Convolution weights for one kernel side; an inactive side is the identity stencil.
#[derive(Debug, Clone, PartialEq)]
struct Stencils {
    left_iface: Vec<f64>,
    right_iface: Vec<f64>,
    left_center: Vec<f64>,
    right_center: Vec<f64>,
}

impl Stencils {
    fn new(kernels: &KernelPair, dx: f64) -> Self {
        let id = || vec![1.0];
        Stencils {
            left_iface: kernels.left.map_or_else(id, |k| k.interface_stencil(dx)),
            right_iface: kernels.right.map_or_else(id, |k| k.interface_stencil(dx)),
            left_center: kernels.left.map_or_else(id, |k| k.center_stencil(dx)),
            right_center: kernels.right.map_or_else(id, |k| k.center_stencil(dx)),
        }
    }

    fn pad(&self) -> usize {
        [&self.left_iface, &self.right_iface, &self.left_center, &self.right_center]
            .iter()
            .map(|w| w.len())
            .max()
            .unwrap_or(1)
            + 2
    }
}

/// Cell values extended by `pad` ghost cells on each side.
struct Padded {
    data: Vec<f64>,
    pad: usize,
}

impl Padded {
    fn new(q: &[f64], pad: usize, boundary: Boundary) -> Self {
        let n = q.len() as isize;
        let data = (-(pad as isize)..n + pad as isize)
            .map(|i| match boundary {
                Boundary::Periodic => q[i.rem_euclid(n) as usize],
                Boundary::Outflow => q[i.clamp(0, n - 1) as usize],
            })
            .collect();
        Padded { data, pad }
    }

    #[inline]
    fn at(&self, i: isize) -> f64 {
        self.data[(i + self.pad as isize) as usize]
    }
}

#[inline]
fn dot_backward(p: &Padded, start: isize, w: &[f64]) -> f64 {
    w.iter().enumerate().map(|(m, &wm)| wm * p.at(start - m as isize)).sum()
}

#[inline]
fn dot_forward(p: &Padded, start: isize, w: &[f64]) -> f64 {
    w.iter().enumerate().map(|(m, &wm)| wm * p.at(start + m as isize)).sum()
}

/// `W-` and `W+` at the `n + 1` interfaces of a cell field; interface `j` separates cells `j-1`, `j`.
pub fn interface_averages(values: &[f64], dx: f64, kernels: &KernelPair, boundary: Boundary) -> (Vec<f64>, Vec<f64>) {
    let st = Stencils::new(kernels, dx);
    let p = Padded::new(values, st.pad(), boundary);
    let n = values.len() as isize;
    let wm = (0..=n).map(|j| dot_backward(&p, j - 1, &st.left_iface)).collect();
    let wp = (0..=n).map(|j| dot_forward(&p, j, &st.right_iface)).collect();
    (wm, wp)
}

/// `W-[q]` and `W+[q]` at cell centers, exact for piecewise-constant `q`.
pub fn nonlocal_averages(field: &Field, kernels: &KernelPair, boundary: Boundary) -> (Vec<f64>, Vec<f64>) {
    let st = Stencils::new(kernels, field.grid.dx);
    let p = Padded::new(&field.values, st.pad(), boundary);
    let n = field.values.len() as isize;
    let wm = (0..n).map(|i| dot_backward(&p, i, &st.left_center)).collect();
    let wp = (0..n).map(|i| dot_forward(&p, i, &st.right_center)).collect();
    (wm, wp)
}

#[derive(Debug, Clone)]
pub struct NonlocalSolver {
    grid: Grid,
    kernels: KernelPair,
    split: VelocitySplit,
    options: SolverOptions,
    stencils: Stencils,
    v_max: f64,
}

impl NonlocalSolver {
    pub fn new(grid: Grid, kernels: KernelPair, split: VelocitySplit, options: SolverOptions) -> Result<Self> {
        options.validate()?;
        let stencils = Stencils::new(&kernels, grid.dx);
        if options.boundary == Boundary::Periodic && stencils.pad() > grid.n_cells {
            return Err(Error::InvalidArgument("kernel support exceeds the periodic domain".into()));
        }
        let v_max = split.speed_bound();
        Ok(NonlocalSolver { grid, kernels, split, options, stencils, v_max })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn split(&self) -> &VelocitySplit {
        &self.split
    }

    pub fn kernels(&self) -> &KernelPair {
        &self.kernels
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// Sampled bound on `|V|` used for the time step.
    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn max_dt(&self) -> f64 {
        if self.v_max > 0.0 {
            self.options.cfl * self.grid.dx / self.v_max
        } else {
            f64::INFINITY
        }
    }

    /// Numerical fluxes at the `n + 1` interfaces.
    pub fn interface_fluxes(&self, q: &[f64]) -> Vec<f64> {
        let st = &self.stencils;
        let p = Padded::new(q, st.pad(), self.options.boundary);
        let n = q.len() as isize;
        let velocity = |j: isize| -> f64 {
            match self.options.interface_velocity {
                InterfaceVelocity::InterfaceExact => {
                    let a = dot_backward(&p, j - 1, &st.left_iface);
                    let b = dot_forward(&p, j, &st.right_iface);
                    self.split.eval(a, b)
                }
                InterfaceVelocity::CellMean => {
                    let a = 0.5 * (dot_backward(&p, j - 1, &st.left_center) + dot_backward(&p, j, &st.left_center));
                    let b = 0.5 * (dot_forward(&p, j - 1, &st.right_center) + dot_forward(&p, j, &st.right_center));
                    self.split.eval(a, b)
                }
            }
        };
        let mut fluxes: Vec<f64> = (0..=n)
            .map(|j| {
                let v = velocity(j);
                p.at(j - 1) * v.max(0.0) + p.at(j) * v.min(0.0)
            })
            .collect();
        if self.options.boundary == Boundary::Periodic {
            fluxes[q.len()] = fluxes[0];
        }
        fluxes
    }

    /// One forward Euler step in place. Rejects `dt` above the CFL limit.
    pub fn step(&self, q: &mut [f64], dt: f64) -> Result<StepLedger> {
        let max_dt = self.max_dt();
        if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, max_dt });
        }
        if q.len() != self.grid.n_cells {
            return Err(Error::GridMismatch(format!("{} values for {} cells", q.len(), self.grid.n_cells)));
        }
        let f = self.interface_fluxes(q);
        let lambda = dt / self.grid.dx;
        for (i, qi) in q.iter_mut().enumerate() {
            *qi -= lambda * (f[i + 1] - f[i]);
        }
        let n = q.len();
        Ok(StepLedger {
            origin_flux: self.grid.origin_interface().map_or(0.0, |j| dt * f[j]),
            inflow: match self.options.boundary {
                Boundary::Periodic => 0.0,
                Boundary::Outflow => dt * (f[0] - f[n]),
            },
        })
    }

    /// Evolves `datum` and records snapshots at the configured output times.
    pub fn solve(&self, datum: &Field) -> Result<Trajectory> {
        if datum.grid != self.grid {
            return Err(Error::GridMismatch("datum grid differs from solver grid".into()));
        }
        let (lo, hi) = self.split.flux().range();
        let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if datum.min() < lo - tol || datum.max() > hi + tol {
            return Err(Error::InvalidArgument(format!(
                "datum range [{}, {}] leaves the admissible range [{lo}, {hi}]",
                datum.min(),
                datum.max()
            )));
        }
        let track_origin = self.grid.origin_interface().is_some();
        let mut q = datum.values.clone();
        let mut t = datum.time;
        let mut origin = 0.0;
        let mut inflow = 0.0;
        let mut steps = 0usize;
        let mut snapshots = vec![Field { grid: self.grid, values: q.clone(), time: t }];
        let mut origin_series = vec![0.0];
        let mut inflow_series = vec![0.0];
        let max_dt = self.max_dt();
        for &t_out in &self.options.output_times {
            while t < t_out {
                let remaining = t_out - t;
                let dt = if remaining <= max_dt * (1.0 + 1e-12) { remaining } else { max_dt };
                let ledger = self.step(&mut q, dt.min(max_dt))?;
                origin += ledger.origin_flux;
                inflow += ledger.inflow;
                steps += 1;
                t = if dt >= remaining { t_out } else { t + dt };
                if let Some(cell) = q.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { time: t, cell });
                }
            }
            snapshots.push(Field { grid: self.grid, values: q.clone(), time: t_out });
            origin_series.push(origin);
            inflow_series.push(inflow);
        }
        Ok(Trajectory {
            snapshots,
            origin_flux: track_origin.then_some(origin_series),
            boundary_inflow: inflow_series,
            steps,
        })
    }
}

/// Solves for data of any sign by evolving `q - m` (with `m = min q0`) under the shifted flux.
pub fn solve_sign_unrestricted(
    datum: &Field,
    kernels: KernelPair,
    base: &FluxModel,
    split: SplitSpec,
    options: SolverOptions,
) -> Result<Trajectory> {
    let m = datum.min();
    let top = datum.max();
    let base = base.clone().with_range(m, top)?;
    let shifted = shift_model(&base, m)?;
    let model = shifted.model.with_range(0.0, top - m)?;
    let split = VelocitySplit::new(&model, split)?;
    let solver = NonlocalSolver::new(datum.grid, kernels, split, options)?;
    let mut shifted_datum = datum.clone();
    for v in &mut shifted_datum.values {
        *v -= m;
    }
    let mut traj = solver.solve(&shifted_datum)?;
    for snap in &mut traj.snapshots {
        for v in &mut snap.values {
            *v += m;
        }
    }
    // f(q) = f_shift(q - m) + f(m): the origin flux of q gains f(m) per unit time.
    let fm = base.f(m);
    if let Some(series) = traj.origin_flux.as_mut() {
        for (acc, t) in series.iter_mut().zip(traj.snapshots.iter().map(|s| s.time - datum.time)) {
            *acc += fm * t;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Datum;
    use crate::kernels::{KernelFamily, KernelShape, KernelSide};

    fn box_pair(k: f64) -> KernelPair {
        KernelPair::symmetric(KernelShape::Box { width: 1.0 }, k).unwrap()
    }

    fn split(name: &str, spec: SplitSpec, hi: f64) -> VelocitySplit {
        let f = FluxModel::builtin(name).unwrap().with_range(0.0, hi).unwrap();
        VelocitySplit::new(&f, spec).unwrap()
    }

    #[test]
    fn constant_field_averages_to_itself() {
        let g = Grid::covering(-1.0, 1.0, 0.01).unwrap();
        let f = Field::constant(g, 0.37);
        for kernels in [box_pair(3.0), KernelPair::symmetric(KernelShape::Exponential { rate: 1.0 }, 5.0).unwrap()] {
            for b in [Boundary::Periodic, Boundary::Outflow] {
                let (wm, wp) = nonlocal_averages(&f, &kernels, b);
                assert!(wm.iter().chain(&wp).all(|w| (w - 0.37).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn indicator_averages_at_x_equal_one() {
        let g = Grid::covering(-2.0, 3.0, 0.01).unwrap();
        let f = Field::from_fn(g, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 });
        let kernels = box_pair(1.0);
        let (wm, wp) = interface_averages(&f.values, g.dx, &kernels, Boundary::Outflow);
        let j = ((1.0 - g.x_left) / g.dx).round() as usize;
        // Riemann-sum oracle of int_0^1 gamma(1 - y) dy on 1e4 points
        let n = 10_000;
        let left = KernelFamily::new(KernelSide::Left, KernelShape::Box { width: 1.0 }).unwrap().scaled(1.0).unwrap();
        let oracle: f64 = (0..n)
            .map(|i| {
                let y = (i as f64 + 0.5) / n as f64;
                left.eval(1.0 - y)
            })
            .sum::<f64>()
            / n as f64;
        assert!((wm[j] - oracle).abs() < 1e-12);
        assert!((wm[j] - 1.0).abs() < 1e-12);
        assert_eq!(wp[j], 0.0);
    }

    #[test]
    fn constant_state_is_steady() {
        let g = Grid::covering(-1.0, 1.0, 0.01).unwrap();
        let s = split("lwr", SplitSpec::Midpoint { kappa: None }, 1.0);
        let opts = SolverOptions::new(0.2).with_boundary(Boundary::Outflow);
        let solver = NonlocalSolver::new(g, box_pair(8.0), s, opts).unwrap();
        let traj = solver.solve(&Field::constant(g, 0.3)).unwrap();
        assert!(traj.last().values.iter().all(|&v| v == 0.3));
        let zero = solver.solve(&Field::constant(g, 0.0)).unwrap();
        assert!(zero.last().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_step_conserves_mass() {
        let g = Grid::covering(-2.0, 2.0, 0.01).unwrap();
        let s = split("lwr", SplitSpec::OneSided, 1.0);
        let kernels = KernelPair::new(None, box_pair(4.0).right).unwrap();
        let opts = SolverOptions::new(1.0).with_boundary(Boundary::Periodic);
        let solver = NonlocalSolver::new(g, kernels, s, opts).unwrap();
        let mut q = Datum::Riemann { q_left: 1.0, q_right: 0.0, x_jump: 0.0 }.cell_averages(g).values;
        for v in q.iter_mut().take(50) {
            *v = 0.0;
        }
        let m0: f64 = q.iter().sum::<f64>() * g.dx;
        solver.step(&mut q, solver.max_dt()).unwrap();
        let m1: f64 = q.iter().sum::<f64>() * g.dx;
        assert!((m1 - m0).abs() <= 1e-12 * m0);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = Grid::covering(-1.0, 1.0, 0.01).unwrap();
        let solver = NonlocalSolver::new(
            g,
            box_pair(4.0),
            split("burgers", SplitSpec::Midpoint { kappa: None }, 1.0),
            SolverOptions::new(0.1),
        )
        .unwrap();
        let mut q = vec![0.5; g.n_cells];
        assert!(matches!(solver.step(&mut q, 2.0 * solver.max_dt()), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn maximum_principle_for_lwr_bump() {
        let g = Grid::covering(-2.0, 2.0, 1.0 / 256.0).unwrap();
        let datum = Datum::Bump { center: 0.0, radius: 0.5, height: 0.8 }.cell_averages(g);
        for spec in [SplitSpec::EngquistOsher, SplitSpec::Midpoint { kappa: None }, SplitSpec::OneSided] {
            for mode in [InterfaceVelocity::InterfaceExact, InterfaceVelocity::CellMean] {
                let opts = SolverOptions::new(0.3).with_uniform_outputs(0.3, 6).with_interface_velocity(mode);
                let solver = NonlocalSolver::new(g, box_pair(16.0), split("lwr", spec, 0.8), opts).unwrap();
                let (lo, hi) = solver.solve(&datum).unwrap().value_range();
                assert!(hi <= datum.max() + 1e-12, "{spec:?} {mode:?} {hi}");
                assert!(lo >= -1e-12);
            }
        }
    }

    #[test]
    fn translation_equivariance_on_periodic_grid() {
        let g = Grid::covering(-1.0, 1.0, 1.0 / 128.0).unwrap();
        let datum = Datum::Bump { center: 0.1, radius: 0.3, height: 0.7 }.cell_averages(g);
        let opts = SolverOptions::new(0.2).with_boundary(Boundary::Periodic);
        let solver =
            NonlocalSolver::new(g, box_pair(8.0), split("burgers", SplitSpec::EngquistOsher, 0.7), opts).unwrap();
        let a = solver.solve(&datum).unwrap();
        let b = solver.solve(&datum.rotated(1)).unwrap();
        assert_eq!(a.last().rotated(1).values, b.last().values);
    }

    #[test]
    fn sign_unrestricted_constant_and_zero_shift() {
        let g = Grid::covering(-1.0, 1.0, 1.0 / 64.0).unwrap();
        let burgers = FluxModel::builtin("burgers").unwrap();
        let spec = SplitSpec::Midpoint { kappa: None };
        let opts = SolverOptions::new(0.2);
        let neg =
            solve_sign_unrestricted(&Field::constant(g, -1.0), box_pair(8.0), &burgers, spec, opts.clone()).unwrap();
        assert!(neg.last().values.iter().all(|&v| v == -1.0));

        let datum = Datum::Bump { center: 0.0, radius: 0.4, height: 0.6 }.cell_averages(g);
        let shifted = solve_sign_unrestricted(&datum, box_pair(8.0), &burgers, spec, opts.clone()).unwrap();
        let plain = NonlocalSolver::new(g, box_pair(8.0), split("burgers", spec, datum.max()), opts)
            .unwrap()
            .solve(&datum)
            .unwrap();
        assert_eq!(shifted.snapshots, plain.snapshots);
    }
}
