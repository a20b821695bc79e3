//! Convergence measurements: primitive sup-gaps, rate fits and weak-star pairings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, Grid};
use crate::hj::NonlocalPrimitive;
use crate::kernels::KernelPair;
use crate::local_ref::ViscositySolutionEval;
use crate::nonlocal::{nonlocal_averages, Trajectory};

/// `C_z = 2 q_max (T (2 + q_max) ||grad V||)^{1/2}`.
pub fn rate_constant(q_max: f64, t_end: f64, grad_v: f64) -> f64 {
    2.0 * q_max * (t_end * (2.0 + q_max) * grad_v).sqrt()
}

/// `5 dx q_max (1 + T V_max)`: room for the O(dx) error of the scheme.
pub fn discretization_allowance(dx: f64, q_max: f64, t_end: f64, v_max: f64) -> f64 {
    5.0 * dx * q_max * (1.0 + t_end * v_max)
}

/// Constants that enter the bound of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub q_max: f64,
    pub t_end: f64,
    pub grad_v: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMeasurement {
    pub k: f64,
    pub dx: f64,
    pub sup_gap: f64,
    pub moments_sum: f64,
    pub c_z: f64,
    pub theorem_bound: f64,
    pub allowance: f64,
    pub bound_satisfied: bool,
    /// Whether `M-, M+ <= 1/q_max`, the smallness the theorem asks of the kernels.
    pub large_k: bool,
}

impl GapMeasurement {
    pub fn new(k: f64, dx: f64, sup_gap: f64, kernels: &KernelPair, c: BoundInputs) -> Self {
        let moments_sum = kernels.moments_sum();
        let c_z = rate_constant(c.q_max, c.t_end, c.grad_v);
        let theorem_bound = c_z * moments_sum.sqrt();
        let allowance = discretization_allowance(dx, c.q_max, c.t_end, c.v_max);
        let (mm, mp) = kernels.truncated_moments();
        let large_k = c.q_max <= 0.0 || mm.max(mp) <= 1.0 / c.q_max;
        GapMeasurement {
            k,
            dx,
            sup_gap,
            moments_sum,
            c_z,
            theorem_bound,
            allowance,
            bound_satisfied: sup_gap <= theorem_bound + allowance,
            large_k,
        }
    }
}

/// `sup |Q^k - Q|` over snapshots and interfaces against the Hopf-Lax primitive.
pub fn primitive_gap(nonlocal: &NonlocalPrimitive, oracle: &ViscositySolutionEval) -> Result<f64> {
    let xs = nonlocal.grid.interfaces();
    let mut gap = 0.0f64;
    for (row, &t) in nonlocal.q_values.iter().zip(&nonlocal.times) {
        let q = if t > 0.0 { oracle.eval_many(t, &xs)? } else { xs.iter().map(|&x| oracle.datum().eval(x)).collect() };
        gap = row.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(gap, f64::max);
    }
    Ok(gap)
}

/// `sup |Q^a - Q^b|` between two primitive series on the same grid and times.
pub fn primitive_gap_between(a: &NonlocalPrimitive, b: &NonlocalPrimitive) -> Result<f64> {
    if a.grid != b.grid || a.times.len() != b.times.len() {
        return Err(Error::GridMismatch("primitive series differ in grid or snapshot count".into()));
    }
    if a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > 1e-12) {
        return Err(Error::GridMismatch("snapshot times differ".into()));
    }
    Ok(a.q_values
        .iter()
        .zip(&b.q_values)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateStatus {
    Pass,
    Fail,
    /// Fewer than four gaps above the discretization floor.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub measurements: Vec<GapMeasurement>,
    /// Least-squares slope of `log sup_gap` against `log k` over all measurements.
    pub fitted_slope: f64,
    pub intercept: f64,
    /// Slope over the points with `sup_gap >= 10 dx q_max`, if there are at least four.
    pub slope_above_floor: Option<f64>,
    pub points_above_floor: usize,
    pub status: RateStatus,
    pub threshold: f64,
}

/// Passing threshold on the fitted slope.
pub const SLOPE_THRESHOLD: f64 = -0.45;

/// Least-squares line through `(x, y)`: returns `(slope, intercept)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits `log sup_gap ~ slope log k + c`.
pub fn fit_rate(measurements: Vec<GapMeasurement>, q_max: f64) -> Result<RateReport> {
    let mut ks: Vec<f64> = measurements.iter().map(|m| m.k).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    if ks.len() < 4 || ks[ks.len() - 1] < 10.0 * ks[0] {
        return Err(Error::Insufficient("rate fit needs at least four distinct k spanning a decade".into()));
    }
    if measurements.iter().any(|m| !(m.sup_gap > 0.0)) {
        return Err(Error::InvalidArgument("gaps must be positive to take logarithms".into()));
    }
    let lx: Vec<f64> = measurements.iter().map(|m| m.k.ln()).collect();
    let ly: Vec<f64> = measurements.iter().map(|m| m.sup_gap.ln()).collect();
    let (slope, intercept) = least_squares(&lx, &ly);
    let above: Vec<usize> =
        (0..measurements.len()).filter(|&i| measurements[i].sup_gap >= 10.0 * measurements[i].dx * q_max).collect();
    let slope_above_floor = (above.len() >= 4).then(|| {
        let x: Vec<f64> = above.iter().map(|&i| lx[i]).collect();
        let y: Vec<f64> = above.iter().map(|&i| ly[i]).collect();
        least_squares(&x, &y).0
    });
    let status = match slope_above_floor {
        None => RateStatus::Inconclusive,
        Some(s) if s <= SLOPE_THRESHOLD => RateStatus::Pass,
        Some(_) => RateStatus::Fail,
    };
    Ok(RateReport {
        points_above_floor: above.len(),
        measurements,
        fitted_slope: slope,
        intercept,
        slope_above_floor,
        status,
        threshold: SLOPE_THRESHOLD,
    })
}

impl RateReport {
    pub fn slope_passes(&self) -> bool {
        self.fitted_slope <= self.threshold
    }

    pub fn all_bounds_satisfied(&self) -> bool {
        self.measurements.iter().all(|m| m.bound_satisfied)
    }

    pub fn gaps_strictly_decreasing(&self) -> bool {
        self.measurements.windows(2).all(|w| w[1].sup_gap < w[0].sup_gap)
    }

    /// Aligned-column text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>8} {:>12} {:>14} {:>14} {:>14} {:>14} {:>6}",
            "k", "dx", "sup_gap", "M-+M+", "bound", "allowance", "ok"
        );
        for m in &self.measurements {
            let _ = writeln!(
                s,
                "{:>8} {:>12.4e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>6}",
                m.k, m.dx, m.sup_gap, m.moments_sum, m.theorem_bound, m.allowance, m.bound_satisfied
            );
        }
        let _ = writeln!(s, "fitted slope  {:.6} (threshold {})", self.fitted_slope, self.threshold);
        match self.slope_above_floor {
            Some(v) => {
                let _ = writeln!(s, "slope above floor  {v:.6} ({} points)", self.points_above_floor);
            }
            None => {
                let _ = writeln!(s, "slope above floor  n/a ({} points)", self.points_above_floor);
            }
        }
        let _ = writeln!(s, "status  {:?}", self.status);
        s
    }
}

/// `phi(x) = (1 - r^2)^3` with `r = (x - center) / radius` on `|r| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: f64,
    pub radius: f64,
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        let r = (x - self.center) / self.radius;
        if r.abs() >= 1.0 {
            0.0
        } else {
            let s = 1.0 - r * r;
            s * s * s
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let r = (x - self.center) / self.radius;
        if r.abs() >= 1.0 {
            0.0
        } else {
            let s = 1.0 - r * r;
            -6.0 * r * s * s / self.radius
        }
    }

    /// `int_{center - radius}^x phi`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let r = ((x - self.center) / self.radius).clamp(-1.0, 1.0);
        let g = |r: f64| r - r.powi(3) + 0.6 * r.powi(5) - r.powi(7) / 7.0;
        self.radius * (g(r) - g(-1.0))
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    /// `||phi'||_{L^1} = 2 max phi = 2`.
    pub fn derivative_l1(&self) -> f64 {
        2.0
    }

    pub fn l1(&self) -> f64 {
        32.0 * self.radius / 35.0
    }

    /// Exact `int phi` over cell `i` of `grid`.
    pub fn cell_integral(&self, grid: &Grid, i: usize) -> f64 {
        self.antiderivative(grid.interface(i + 1)) - self.antiderivative(grid.interface(i))
    }
}

/// The fixed battery: centers `{-0.5, 0, 0.5}` times radii `{0.25, 0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakStarProbe {
    pub functions: Vec<TestFunction>,
}

impl Default for WeakStarProbe {
    fn default() -> Self {
        let mut functions = Vec::new();
        for center in [-0.5, 0.0, 0.5] {
            for radius in [0.25, 0.5] {
                functions.push(TestFunction { center, radius });
            }
        }
        WeakStarProbe { functions }
    }
}

impl WeakStarProbe {
    /// Errors unless every support lies in the grid shrunk by `margin` on both sides.
    pub fn check_support(&self, grid: &Grid, margin: f64) -> Result<()> {
        let (lo, hi) = (grid.x_left + margin, grid.x_right() - margin);
        for phi in &self.functions {
            let (a, b) = phi.support();
            if a < lo || b > hi {
                return Err(Error::SupportEscape { lo: a, hi: b, min: lo, max: hi });
            }
        }
        Ok(())
    }
}

/// `int q phi dx` for a piecewise-constant field (exact).
pub fn space_pairing(values: &[f64], grid: &Grid, phi: &TestFunction) -> f64 {
    let (a, b) = phi.support();
    let i0 = grid.cell_of(a);
    let i1 = grid.cell_of(b);
    (i0..=i1).map(|i| values[i] * phi.cell_integral(grid, i)).sum()
}

/// Trapezoid rule in time over per-snapshot space pairings.
pub fn time_trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingRow {
    pub phi: TestFunction,
    pub nonlocal: f64,
    pub oracle: f64,
    pub discrepancy: f64,
}

fn pair_series(fields: &[&[f64]], times: &[f64], grid: &Grid, phi: &TestFunction) -> f64 {
    let per: Vec<f64> = fields.iter().map(|v| space_pairing(v, grid, phi)).collect();
    time_trapezoid(times, &per)
}

/// Oracle densities at the trajectory's snapshot times (datum at `t = 0`).
pub fn oracle_fields(traj: &Trajectory, oracle: &ViscositySolutionEval) -> Result<Vec<Field>> {
    let grid = traj.grid();
    traj.snapshots
        .iter()
        .map(|s| {
            if s.time > 0.0 {
                crate::local_ref::entropy_density_from_primitive(oracle, s.time, &grid)
            } else {
                Ok(s.clone())
            }
        })
        .collect()
}

/// `int int q^k phi` against `int int q phi` for each test function.
pub fn weak_star_pairing(
    traj: &Trajectory,
    oracle: &[Field],
    probe: &WeakStarProbe,
    margin: f64,
) -> Result<Vec<PairingRow>> {
    let grid = traj.grid();
    probe.check_support(&grid, margin)?;
    if oracle.len() != traj.snapshots.len() || oracle.iter().any(|f| f.grid != grid) {
        return Err(Error::GridMismatch("oracle fields do not match the trajectory".into()));
    }
    let times = traj.times();
    let nl: Vec<&[f64]> = traj.snapshots.iter().map(|f| f.values.as_slice()).collect();
    let or: Vec<&[f64]> = oracle.iter().map(|f| f.values.as_slice()).collect();
    Ok(probe
        .functions
        .iter()
        .map(|phi| {
            let a = pair_series(&nl, &times, &grid, phi);
            let b = pair_series(&or, &times, &grid, phi);
            PairingRow { phi: *phi, nonlocal: a, oracle: b, discrepancy: (a - b).abs() }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlocalTermRow {
    pub phi: TestFunction,
    pub w_minus: f64,
    pub w_plus: f64,
    pub density: f64,
    pub oracle: f64,
    pub discrepancy_minus: f64,
    pub discrepancy_plus: f64,
}

/// Pairings of `W-[q^k]`, `W+[q^k]` and `q^k` against the oracle pairing.
pub fn nonlocal_term_convergence(
    traj: &Trajectory,
    kernels: &KernelPair,
    boundary: Boundary,
    oracle: &[Field],
    probe: &WeakStarProbe,
    margin: f64,
) -> Result<Vec<NonlocalTermRow>> {
    let base = weak_star_pairing(traj, oracle, probe, margin)?;
    let grid = traj.grid();
    let times = traj.times();
    let (wm, wp): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        traj.snapshots.iter().map(|f| nonlocal_averages(f, kernels, boundary)).unzip();
    let wm_ref: Vec<&[f64]> = wm.iter().map(|v| v.as_slice()).collect();
    let wp_ref: Vec<&[f64]> = wp.iter().map(|v| v.as_slice()).collect();
    Ok(base
        .into_iter()
        .map(|row| {
            let m = pair_series(&wm_ref, &times, &grid, &row.phi);
            let p = pair_series(&wp_ref, &times, &grid, &row.phi);
            NonlocalTermRow {
                phi: row.phi,
                w_minus: m,
                w_plus: p,
                density: row.nonlocal,
                oracle: row.oracle,
                discrepancy_minus: (m - row.oracle).abs(),
                discrepancy_plus: (p - row.oracle).abs(),
            }
        })
        .collect())
}

/// Consecutive values decrease strictly, except pairs that both sit at or below `floor`.
pub fn decreasing_above_floor(values: &[f64], floor: f64) -> bool {
    values.windows(2).all(|w| w[1] < w[0] || (w[0] <= floor && w[1] <= floor))
}
