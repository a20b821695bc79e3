//! Primitives of nonlocal solutions, parabolic envelopes and the nonlocal Hamilton-Jacobi defect.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::VelocitySplit;
use crate::grid::{Boundary, Grid};
use crate::kernels::KernelPair;
use crate::nonlocal::{interface_averages, nonlocal_averages, Trajectory};

/// How `alpha(t) = int_0^t (q V)(s, 0) ds` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    /// The solver's cumulative numerical flux through the interface at `x = 0`.
    Ledger,
    /// Trapezoid rule over snapshots of `q V(W-, W+)` in the cell containing `x = 0`.
    Trapezoid,
}

/// `Q^k(t, x) = int_0^x q^k(t, y) dy - alpha(t)` at cell interfaces, one row per snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalPrimitive {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub q_values: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

impl NonlocalPrimitive {
    /// Differences of row `n`, i.e. the cell averages the primitive was built from.
    pub fn density(&self, n: usize) -> Vec<f64> {
        self.q_values[n].windows(2).map(|w| (w[1] - w[0]) / self.grid.dx).collect()
    }
}

/// Cumulative sums of cell averages anchored at the interface `origin`.
pub fn cumulative_from(values: &[f64], dx: f64, origin: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n + 1];
    for j in origin + 1..=n {
        out[j] = out[j - 1] + values[j - 1] * dx;
    }
    for j in (0..origin).rev() {
        out[j] = out[j + 1] - values[j] * dx;
    }
    out
}

pub fn build_primitive(
    traj: &Trajectory,
    kernels: &KernelPair,
    split: &VelocitySplit,
    boundary: Boundary,
    rule: AlphaRule,
) -> Result<NonlocalPrimitive> {
    let grid = traj.grid();
    if !(grid.x_left <= 0.0 && grid.x_right() >= 0.0) {
        return Err(Error::OriginNotOnGrid);
    }
    let origin = grid.origin_interface().ok_or(Error::OriginNotOnGrid)?;
    let times = traj.times();
    let alpha = match rule {
        AlphaRule::Ledger => traj.origin_flux.clone().ok_or(Error::OriginNotOnGrid)?,
        AlphaRule::Trapezoid => {
            let cell = grid.cell_of(0.0);
            let integrand: Vec<f64> = traj
                .snapshots
                .iter()
                .map(|f| {
                    let (wm, wp) = nonlocal_averages(f, kernels, boundary);
                    f.values[cell] * split.eval(wm[cell], wp[cell])
                })
                .collect();
            let mut acc = vec![0.0; times.len()];
            for n in 1..times.len() {
                acc[n] = acc[n - 1] + 0.5 * (times[n] - times[n - 1]) * (integrand[n] + integrand[n - 1]);
            }
            acc
        }
    };
    let q_values = traj
        .snapshots
        .iter()
        .zip(&alpha)
        .map(|(f, a)| cumulative_from(&f.values, grid.dx, origin).into_iter().map(|v| v - a).collect())
        .collect();
    Ok(NonlocalPrimitive { grid, times, q_values, alpha })
}

/// Lower envelope `D[p] = min_q (f[q] + c (p - q)^2)` (Felzenszwalb-Huttenlocher).
fn lower_envelope(f: &[f64], c: f64) -> Vec<f64> {
    let n = f.len();
    if n == 0 {
        return Vec::new();
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let key = |q: usize| f[q] + c * (q * q) as f64;
    for q in 1..n {
        // z[0] = -inf, so the loop stops at k = 0 at the latest
        let mut s = (key(q) - key(v[k])) / (2.0 * c * (q - v[k]) as f64);
        while s <= z[k] {
            k -= 1;
            s = (key(q) - key(v[k])) / (2.0 * c * (q - v[k]) as f64);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut out = vec![0.0; n];
    let mut k = 0usize;
    for (p, slot) in out.iter_mut().enumerate() {
        while z[k + 1] < p as f64 {
            k += 1;
        }
        let d = p as f64 - v[k] as f64;
        *slot = f[v[k]] + c * d * d;
    }
    out
}

/// `Q^eps_+(x_i) = max_j { Q(x_j) - (x_i - x_j)^2 / (2 eps) }` over grid nodes.
pub fn sup_convolution(q: &[f64], dx: f64, eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    let neg: Vec<f64> = q.iter().map(|v| -v).collect();
    Ok(lower_envelope(&neg, dx * dx / (2.0 * eps)).into_iter().map(|v| -v).collect())
}

/// `Q^eps_-(x_i) = min_j { Q(x_j) + (x_i - x_j)^2 / (2 eps) }` over grid nodes.
pub fn inf_convolution(q: &[f64], dx: f64, eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    Ok(lower_envelope(q, dx * dx / (2.0 * eps)))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")))
    }
}

/// Standard bump `exp(-1 / (1 - z^2))` on `|z| < 1`.
fn bump(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - z * z)).exp()
    }
}

/// Discrete unit-mass weights of the mollifier of radius `eps`, indexed `-r..=r`.
pub fn mollifier_weights(dx: f64, eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    if eps < 2.0 * dx {
        return Err(Error::InvalidArgument(format!("mollifier radius {eps} is below two cells ({})", 2.0 * dx)));
    }
    let r = (eps / dx).floor() as isize;
    let mut w: Vec<f64> = (-r..=r).map(|m| bump(m as f64 * dx / eps)).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

/// Convolution with the mollifier; values beyond the ends are extended linearly.
pub fn mollify(u: &[f64], dx: f64, eps: f64) -> Result<Vec<f64>> {
    let w = mollifier_weights(dx, eps)?;
    let n = u.len() as isize;
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two nodes".into()));
    }
    let r = (w.len() / 2) as isize;
    let (sl, sr) = (u[1] - u[0], u[n as usize - 1] - u[n as usize - 2]);
    let at = |i: isize| -> f64 {
        if i < 0 {
            u[0] + sl * i as f64
        } else if i >= n {
            u[n as usize - 1] + sr * (i - n + 1) as f64
        } else {
            u[i as usize]
        }
    };
    Ok((0..n).map(|i| w.iter().enumerate().map(|(m, &wm)| wm * at(i + m as isize - r)).sum()).collect())
}

/// `Q`, its envelopes `Q^eps_+-` and their mollifications `U^eps`, `L^eps` on one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionRegularization {
    pub epsilon: f64,
    pub q: Vec<f64>,
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub u: Vec<f64>,
    pub l: Vec<f64>,
}

impl ConvolutionRegularization {
    pub fn new(q: &[f64], dx: f64, eps: f64) -> Result<Self> {
        let q_plus = sup_convolution(q, dx, eps)?;
        let q_minus = inf_convolution(q, dx, eps)?;
        let u = mollify(&q_plus, dx, eps)?;
        let l = mollify(&q_minus, dx, eps)?;
        Ok(ConvolutionRegularization { epsilon: eps, q: q.to_vec(), q_plus, q_minus, u, l })
    }
}

/// `C_n = q_max + q_max^2 / 2`.
pub fn regularization_constant(q_max: f64) -> f64 {
    q_max + 0.5 * q_max * q_max
}

/// Largest grid slope `|Q(x_{i+1}) - Q(x_i)| / dx`.
pub fn grid_lipschitz(q: &[f64], dx: f64) -> f64 {
    q.windows(2).map(|w| ((w[1] - w[0]) / dx).abs()).fold(0.0, f64::max)
}

/// Smallest discrete second difference.
pub fn min_second_difference(u: &[f64], dx: f64) -> f64 {
    u.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]) / (dx * dx)).fold(f64::INFINITY, f64::min)
}

/// Nonlocal averages of the slope field of a nodal function: at node `i`, `W+` uses the slopes
/// to the right of `x_i` and `W-` those to the left.
pub fn slope_averages(u: &[f64], dx: f64, kernels: &KernelPair) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let slopes: Vec<f64> = u.windows(2).map(|w| (w[1] - w[0]) / dx).collect();
    let (wm, wp) = interface_averages(&slopes, dx, kernels, Boundary::Outflow);
    (slopes, wm, wp)
}

/// Fraction of interior nodes satisfying `W+ >= d_i - M+/eps` and `W- <= d_{i-1} + M-/eps`,
/// with `d_i` the forward and `d_{i-1}` the backward slope.
pub fn sandwich_fraction(u: &[f64], dx: f64, kernels: &KernelPair, eps: f64) -> f64 {
    let (mm, mp) = kernels.truncated_moments();
    let (d, wm, wp) = slope_averages(u, dx, kernels);
    let n = d.len();
    if n < 2 {
        return 1.0;
    }
    let tol = 1e-12;
    let ok = (1..n).filter(|&i| wp[i] >= d[i] - mp / eps - tol && wm[i] <= d[i - 1] + mm / eps + tol).count();
    ok as f64 / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectSide {
    /// `U^eps`: the defect should stay below `+bound`.
    Sub,
    /// `L^eps`: the defect should stay above `-bound`.
    Super,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    /// Times at which the defect was evaluated (interior snapshots).
    pub times: Vec<f64>,
    /// `U_t + V(W-[U_x], W+[U_x]) U_x` at interior nodes, one row per time.
    pub defect: Vec<Vec<f64>>,
    /// `C_e (M- + M+) / eps` with `C_e = q_max ||grad V||`.
    pub bound: f64,
    pub violation_fraction: f64,
}

/// Evaluates the nonlocal HJ residual of regularized snapshots `u[n]` at equispaced `times`.
#[allow(clippy::too_many_arguments)]
pub fn nonlocal_defect(
    times: &[f64],
    u: &[Vec<f64>],
    dx: f64,
    kernels: &KernelPair,
    split: &VelocitySplit,
    eps: f64,
    q_max: f64,
    side: DefectSide,
) -> Result<DefectReport> {
    if times.len() < 3 || u.len() != times.len() {
        return Err(Error::Insufficient("defect needs at least three regularized snapshots".into()));
    }
    let (mm, mp) = kernels.truncated_moments();
    if mm > eps || mp > eps {
        return Err(Error::InvalidArgument(format!(
            "truncated moments ({mm}, {mp}) exceed epsilon = {eps}; increase k"
        )));
    }
    let bound = q_max * split.gradient_bound() * (mm + mp) / eps;
    let mut rows = Vec::with_capacity(times.len() - 2);
    let mut bad = 0usize;
    let mut total = 0usize;
    for n in 1..times.len() - 1 {
        let dt = times[n + 1] - times[n - 1];
        let (d, wm, wp) = slope_averages(&u[n], dx, kernels);
        let row: Vec<f64> = (1..d.len())
            .map(|i| {
                let ut = (u[n + 1][i] - u[n - 1][i]) / dt;
                let ux = 0.5 * (d[i - 1] + d[i]);
                ut + split.eval(wm[i], wp[i]) * ux
            })
            .collect();
        for &v in &row {
            total += 1;
            let violated = match side {
                DefectSide::Sub => v > bound,
                DefectSide::Super => v < -bound,
            };
            bad += violated as usize;
        }
        rows.push(row);
    }
    Ok(DefectReport {
        times: times[1..times.len() - 1].to_vec(),
        defect: rows,
        bound,
        violation_fraction: bad as f64 / total.max(1) as f64,
    })
}
