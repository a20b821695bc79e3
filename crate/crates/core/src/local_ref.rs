//! Reference entropy solutions of `q_t + f(q)_x = 0`: a Godunov scheme for any flux and the
//! Hopf-Lax formula for the primitive `Q` when `f` is convex or concave.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::{sampled_sup, Convexity, FluxModel, SAFETY};
use crate::grid::{Boundary, Field, Grid};
use crate::nonlocal::Trajectory;
use crate::poly::{sign_changes, Poly};

/// Options for [`godunov_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct GodunovOptions {
    pub cfl: f64,
    pub boundary: Boundary,
    pub output_times: Vec<f64>,
}

impl GodunovOptions {
    pub fn new(t_end: f64) -> Self {
        GodunovOptions { cfl: 0.9, boundary: Boundary::Outflow, output_times: vec![t_end] }
    }

    pub fn with_boundary(mut self, b: Boundary) -> Self {
        self.boundary = b;
        self
    }
}

/// Exact Riemann-fan flux: min of `f` on `[ul, ur]` if `ul <= ur`, max on `[ur, ul]` otherwise.
pub fn godunov_flux(f: &FluxModel, critical: &[f64], ul: f64, ur: f64) -> f64 {
    let (lo, hi) = if ul <= ur { (ul, ur) } else { (ur, ul) };
    let inner = critical.iter().filter(|&&c| c > lo && c < hi).map(|&c| f.f(c));
    let mut vals = [f.f(ul), f.f(ur)].into_iter().chain(inner);
    let first = vals.next().unwrap();
    if ul <= ur {
        vals.fold(first, f64::min)
    } else {
        vals.fold(first, f64::max)
    }
}

/// First-order Godunov trajectory; `dt = cfl dx / sup|f'|` over the data range.
pub fn godunov_solve(datum: &Field, flux: &FluxModel, opts: &GodunovOptions) -> Result<Trajectory> {
    if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
        return Err(Error::InvalidArgument(format!("cfl must lie in (0, 1], got {}", opts.cfl)));
    }
    let (lo, hi) = (datum.min(), datum.max());
    let critical = flux.critical_points(lo - 1.0, hi + 1.0);
    let speed = SAFETY * sampled_sup(|s| flux.fprime(s).abs(), lo, hi, 2000);
    let grid = datum.grid;
    let n = grid.n_cells;
    let max_dt = if speed > 0.0 { opts.cfl * grid.dx / speed } else { f64::INFINITY };
    let origin = grid.origin_interface();
    let mut q = datum.values.clone();
    let mut t = datum.time;
    let mut snapshots = vec![datum.clone()];
    let (mut origin_acc, mut inflow) = (0.0, 0.0);
    let mut origin_series = vec![0.0];
    let mut inflow_series = vec![0.0];
    let mut steps = 0;
    let mut fl = vec![0.0; n + 1];
    let mut prev = datum.time;
    for &t_out in &opts.output_times {
        if !(t_out > prev) {
            return Err(Error::InvalidArgument("output times must be strictly increasing".into()));
        }
        prev = t_out;
        while t < t_out {
            let remaining = t_out - t;
            let dt = remaining.min(max_dt);
            for (j, slot) in fl.iter_mut().enumerate() {
                let (ul, ur) = match opts.boundary {
                    Boundary::Periodic => (q[(j + n - 1) % n], q[j % n]),
                    Boundary::Outflow => (q[j.saturating_sub(1)], q[j.min(n - 1)]),
                };
                *slot = godunov_flux(flux, &critical, ul, ur);
            }
            let lambda = dt / grid.dx;
            for i in 0..n {
                q[i] -= lambda * (fl[i + 1] - fl[i]);
            }
            if let Some(j) = origin {
                origin_acc += dt * fl[j];
            }
            if opts.boundary == Boundary::Outflow {
                inflow += dt * (fl[0] - fl[n]);
            }
            steps += 1;
            t = if dt >= remaining { t_out } else { t + dt };
            if let Some(cell) = q.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { time: t, cell });
            }
        }
        snapshots.push(Field { grid, values: q.clone(), time: t_out });
        origin_series.push(origin_acc);
        inflow_series.push(inflow);
    }
    Ok(Trajectory { snapshots, origin_flux: origin.map(|_| origin_series), boundary_inflow: inflow_series, steps })
}

/// Continuous piecewise-linear `Q0` with `Q0(0) = 0`, extended linearly past both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveDatum {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl PrimitiveDatum {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(Error::InvalidArgument("primitive needs matching breakpoints and values".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("breakpoints must increase strictly".into()));
        }
        Ok(PrimitiveDatum { breakpoints, values })
    }

    /// Exact cumulative sum of cell averages, normalized so that `Q0(0) = 0`.
    pub fn from_field(field: &Field) -> Self {
        let g = field.grid;
        let mut values = Vec::with_capacity(g.n_cells + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for &q in &field.values {
            acc += q * g.dx;
            values.push(acc);
        }
        let mut p = PrimitiveDatum { breakpoints: g.interfaces(), values };
        let offset = match g.origin_interface() {
            Some(j) => p.values[j],
            None => p.eval(0.0),
        };
        for v in &mut p.values {
            *v -= offset;
        }
        p
    }

    /// Slope of segment `j` (between breakpoints `j` and `j+1`).
    pub fn slope(&self, j: usize) -> f64 {
        (self.values[j + 1] - self.values[j]) / (self.breakpoints[j + 1] - self.breakpoints[j])
    }

    pub fn n_segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn slope_range(&self) -> (f64, f64) {
        (0..self.n_segments())
            .map(|j| self.slope(j))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)))
    }

    pub fn eval(&self, y: f64) -> f64 {
        let b = &self.breakpoints;
        let n = b.len();
        if y <= b[0] {
            return self.values[0] + self.slope(0) * (y - b[0]);
        }
        if y >= b[n - 1] {
            return self.values[n - 1] + self.slope(n - 2) * (y - b[n - 1]);
        }
        let j = b.partition_point(|&v| v <= y) - 1;
        self.values[j] + self.slope(j) * (y - b[j])
    }

    fn negated(&self) -> PrimitiveDatum {
        PrimitiveDatum { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(|v| -v).collect() }
    }
}

/// Convex conjugate `h*(p) = sup_{s in I} (p s - h(s))` of a polynomial `h` convex on `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjugate {
    h: Poly,
    hp: Poly,
    interval: (f64, f64),
}

impl Conjugate {
    /// `h` must be convex on `[lo, hi]`.
    pub fn new(h: Poly, lo: f64, hi: f64) -> Result<Self> {
        let hp = h.derivative();
        let hpp = hp.derivative();
        let n = 2000;
        for i in 0..=n {
            let s = lo + (hi - lo) * i as f64 / n as f64;
            if hpp.eval(s) < -1e-12 {
                return Err(Error::NotConvex);
            }
        }
        Ok(Conjugate { h, hp, interval: (lo, hi) })
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn h(&self, s: f64) -> f64 {
        self.h.eval(s)
    }

    pub fn hprime(&self, s: f64) -> f64 {
        self.hp.eval(s)
    }

    /// The maximizing `s`, i.e. `(h')^{-1}(p)` clamped to the interval.
    pub fn argmax(&self, p: f64) -> f64 {
        let (lo, hi) = self.interval;
        if p <= self.hp.eval(lo) {
            return lo;
        }
        if p >= self.hp.eval(hi) {
            return hi;
        }
        let c = self.hp.coeffs();
        let s = match self.hp.degree() {
            1 => (p - c[0]) / c[1],
            2 => {
                // c2 s^2 + c1 s + (c0 - p) = 0, root on the increasing branch
                let (a, b, cc) = (c[2], c[1], c[0] - p);
                let disc = (b * b - 4.0 * a * cc).max(0.0).sqrt();
                let q = -0.5 * (b + b.signum() * disc);
                let r1 = q / a;
                let r2 = if q != 0.0 { cc / q } else { r1 };
                if (lo..=hi).contains(&r1) && (self.hp.eval(r1) - p).abs() <= (self.hp.eval(r2) - p).abs() {
                    r1
                } else {
                    r2
                }
            }
            _ => self.bracketed_root(p),
        };
        s.clamp(lo, hi)
    }

    /// Dense scan of `h'` followed by bisection; `h'` is nondecreasing on the interval.
    fn bracketed_root(&self, p: f64) -> f64 {
        let (lo, hi) = self.interval;
        let n = 10_000;
        let h = (hi - lo) / n as f64;
        let i = (0..n).find(|&i| self.hp.eval(lo + h * (i + 1) as f64) >= p).unwrap_or(n - 1);
        let (mut a, mut b) = (lo + h * i as f64, lo + h * (i + 1) as f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.hp.eval(m) < p {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 1e-15 * (1.0 + m.abs()) {
                break;
            }
        }
        0.5 * (a + b)
    }

    pub fn eval(&self, p: f64) -> f64 {
        let s = self.argmax(p);
        p * s - self.h.eval(s)
    }
}

/// Legendre transform of a convex flux over its admissible range enlarged by one unit.
pub fn legendre_transform(flux: &FluxModel) -> Result<Conjugate> {
    if flux.convexity() != Convexity::Convex {
        return Err(Error::NotConvex);
    }
    let (lo, hi) = flux.range();
    let (a, b) = convex_window(flux.polynomial(), lo, hi);
    Conjugate::new(flux.polynomial().clone(), a, b)
}

/// `[lo - 1, hi + 1]` shrunk to the part on which `h'' >= 0` around `[lo, hi]`.
fn convex_window(h: &Poly, lo: f64, hi: f64) -> (f64, f64) {
    let hpp = h.derivative().derivative();
    let roots = sign_changes(&hpp, lo - 1.0, hi + 1.0, 4096, 1e-13);
    let a = roots.iter().copied().filter(|&r| r <= lo).fold(lo - 1.0, f64::max);
    let b = roots.iter().copied().filter(|&r| r >= hi).fold(hi + 1.0, f64::min);
    (a, b)
}

/// Hopf-Lax evaluator for `Q_t + f(Q_x) = 0` with piecewise-linear `Q0`.
///
/// A concave `f` is handled through `P = -Q`, which solves `P_t + h(P_x) = 0` with the convex
/// `h(p) = -f(-p)`.
#[derive(Debug, Clone)]
pub struct ViscositySolutionEval {
    datum: PrimitiveDatum,
    work: PrimitiveDatum,
    conj: Conjugate,
    reflected: bool,
    slope_range: (f64, f64),
    lipschitz: f64,
}

impl ViscositySolutionEval {
    pub fn new(datum: PrimitiveDatum, flux: &FluxModel) -> Result<Self> {
        let (qlo, qhi) = datum.slope_range();
        let (qlo, qhi) = (qlo.min(datum.slope(0)), qhi.max(datum.slope(datum.n_segments() - 1)));
        let flux = flux.clone().with_range(qlo, qhi)?;
        let (work, h, reflected) = match flux.convexity() {
            Convexity::Convex => (datum.clone(), flux.polynomial().clone(), false),
            Convexity::Concave => {
                let h = flux.polynomial().scale_argument(-1.0).scale(-1.0);
                (datum.negated(), h, true)
            }
            Convexity::Neither => return Err(Error::NotConvex),
        };
        let slope_range = work.slope_range();
        let (a, b) = convex_window(&h, slope_range.0, slope_range.1);
        let conj = Conjugate::new(h, a, b)?;
        let lipschitz = qlo.abs().max(qhi.abs());
        Ok(ViscositySolutionEval { datum, work, conj, reflected, slope_range, lipschitz })
    }

    pub fn datum(&self) -> &PrimitiveDatum {
        &self.datum
    }

    /// `sup |q0|`, the Lipschitz constant of `Q0` and of every `Q(t, .)`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(self.datum.eval(x));
        }
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        let v = self.minimize(t, x);
        Ok(if self.reflected { -v } else { v })
    }

    fn minimize(&self, t: f64, x: f64) -> f64 {
        let d = &self.work;
        let c = &self.conj;
        let b = &d.breakpoints;
        let n = b.len();
        let (smin, smax) = self.slope_range;
        let slack = 1e-9 * (1.0 + x.abs());
        let ylo = x - t * c.hprime(smax) - slack;
        let yhi = x - t * c.hprime(smin) + slack;
        let mut best = f64::INFINITY;
        let objective = |y: f64| d.eval(y) + t * c.eval((x - y) / t);
        best = best.min(objective(ylo)).min(objective(yhi));

        let first = b.partition_point(|&v| v < ylo);
        let last = b.partition_point(|&v| v <= yhi);
        for (&y, &v) in b[first..last].iter().zip(&d.values[first..last]) {
            best = best.min(v + t * c.eval((x - y) / t));
        }
        // segments touching the window, including the two unbounded extensions
        let seg_lo = first.saturating_sub(1);
        let seg_hi = last.min(n - 1);
        let mut stationary = |s: f64, y0: f64, q0: f64, lo: f64, hi: f64| {
            let y = x - t * c.hprime(s);
            if y >= lo && y <= hi {
                best = best.min(q0 + s * (x - y0) - t * c.h(s));
            }
        };
        for j in seg_lo..seg_hi {
            stationary(d.slope(j), b[j], d.values[j], b[j], b[j + 1]);
        }
        if first == 0 {
            stationary(d.slope(0), b[0], d.values[0], f64::NEG_INFINITY, b[0]);
        }
        if last == n {
            stationary(d.slope(n - 2), b[n - 1], d.values[n - 1], b[n - 1], f64::INFINITY);
        }
        best
    }

    /// `Q(t, x)` for many points, evaluated in parallel.
    pub fn eval_many(&self, t: f64, xs: &[f64]) -> Result<Vec<f64>> {
        xs.par_iter().map(|&x| self.eval(t, x)).collect()
    }

    /// `Q(t, .)` at the interfaces of `grid`.
    pub fn primitive_on(&self, t: f64, grid: &Grid) -> Result<Vec<f64>> {
        self.eval_many(t, &grid.interfaces())
    }
}

/// Exact cell averages `(Q(t, x_{i+1/2}) - Q(t, x_{i-1/2})) / dx` of the entropy solution.
pub fn entropy_density_from_primitive(sol: &ViscositySolutionEval, t: f64, grid: &Grid) -> Result<Field> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let q = sol.primitive_on(t, grid)?;
    let values = q.windows(2).map(|w| (w[1] - w[0]) / grid.dx).collect();
    Ok(Field { grid: *grid, values, time: t })
}
