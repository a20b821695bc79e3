//! Polynomial fluxes, the induced velocity `f(s)/s`, and two-argument velocity splittings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{sign_changes, Poly};
use crate::quadrature::simpson;

/// Relative safety factor applied to sampled bounds.
pub const SAFETY: f64 = 1.05;

const ROOT_TOL: f64 = 1e-12;
const ROOT_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convexity {
    Convex,
    Concave,
    Neither,
}

/// A flux `f` with `f(0) = 0`, represented as a polynomial so that `f(s)/s`
/// extends to a polynomial through `s = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxModel {
    pub name: String,
    flux: Poly,
    fprime: Poly,
    fsecond: Poly,
    vtilde: Poly,
    vtilde_prime: Poly,
    convexity: Convexity,
    range: (f64, f64),
}

impl FluxModel {
    /// Built-in fluxes: `burgers` (q^2/2), `lwr` (q(1-q)) and `cubic` (q^3/3).
    /// The admissible range defaults to `[0, 1]`.
    pub fn builtin(name: &str) -> Result<Self> {
        let coeffs = match name {
            "burgers" => vec![0.0, 0.0, 0.5],
            "lwr" => vec![0.0, 1.0, -1.0],
            "cubic" => vec![0.0, 0.0, 0.0, 1.0 / 3.0],
            other => return Err(Error::UnknownFlux(other.to_string())),
        };
        Self::from_poly(name, Poly::new(coeffs), (0.0, 1.0))
    }

    /// Custom polynomial flux `sum_i coeffs[i] s^i`; the constant term must vanish.
    pub fn from_coefficients(name: &str, coeffs: &[f64]) -> Result<Self> {
        if let Some(&c0) = coeffs.first() {
            if c0 != 0.0 {
                return Err(Error::NonzeroFluxConstant(c0));
            }
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("flux coefficients must be finite".into()));
        }
        Self::from_poly(name, Poly::new(coeffs.to_vec()), (0.0, 1.0))
    }

    fn from_poly(name: &str, flux: Poly, range: (f64, f64)) -> Result<Self> {
        let fprime = flux.derivative();
        let fsecond = fprime.derivative();
        let vtilde = flux.divide_by_s();
        let vtilde_prime = vtilde.derivative();
        let mut model = FluxModel {
            name: name.to_string(),
            flux,
            fprime,
            fsecond,
            vtilde,
            vtilde_prime,
            convexity: Convexity::Neither,
            range,
        };
        model = model.with_range(range.0, range.1)?;
        Ok(model)
    }

    /// Replaces the admissible range `[q_min, q_max]` and re-derives the convexity tag on it.
    pub fn with_range(mut self, q_min: f64, q_max: f64) -> Result<Self> {
        if !(q_min.is_finite() && q_max.is_finite() && q_min <= q_max) {
            return Err(Error::InvalidArgument(format!("admissible range [{q_min}, {q_max}] is not an interval")));
        }
        self.range = (q_min, q_max);
        self.convexity = classify(&self.fsecond, q_min, q_max);
        Ok(self)
    }

    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        self.flux.eval(s)
    }

    #[inline]
    pub fn fprime(&self, s: f64) -> f64 {
        self.fprime.eval(s)
    }

    pub fn fsecond(&self, s: f64) -> f64 {
        self.fsecond.eval(s)
    }

    /// `f(s)/s`, continued by `f'(0)` at the origin.
    #[inline]
    pub fn vtilde(&self, s: f64) -> f64 {
        self.vtilde.eval(s)
    }

    #[inline]
    pub fn vtilde_prime(&self, s: f64) -> f64 {
        self.vtilde_prime.eval(s)
    }

    pub fn convexity(&self) -> Convexity {
        self.convexity
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn polynomial(&self) -> &Poly {
        &self.flux
    }

    pub fn fprime_poly(&self) -> &Poly {
        &self.fprime
    }

    /// `L = sup |f'|` on the admissible range.
    pub fn lipschitz(&self) -> f64 {
        let (lo, hi) = self.range;
        sampled_sup(|s| self.fprime(s).abs(), lo, hi, 1000)
    }

    /// `sup |V~'|` on the admissible range.
    pub fn vtilde_prime_sup(&self) -> f64 {
        let (lo, hi) = self.range;
        sampled_sup(|s| self.vtilde_prime(s).abs(), lo, hi, 1000)
    }

    /// Critical points of `f` (roots of `f'`) inside `[lo, hi]`.
    pub fn critical_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        sign_changes(&self.fprime, lo, hi, ROOT_SAMPLES, ROOT_TOL)
    }
}

fn classify(fsecond: &Poly, lo: f64, hi: f64) -> Convexity {
    let n = 1000;
    let (mut nonneg, mut nonpos) = (true, true);
    for i in 0..=n {
        let s = if hi > lo { lo + (hi - lo) * i as f64 / n as f64 } else { lo };
        let v = fsecond.eval(s);
        if v < -1e-14 {
            nonneg = false;
        }
        if v > 1e-14 {
            nonpos = false;
        }
    }
    match (nonneg, nonpos) {
        (true, _) => Convexity::Convex,
        (false, true) => Convexity::Concave,
        _ => Convexity::Neither,
    }
}

/// Max of `g` over `n + 1` equispaced samples of `[lo, hi]`.
pub(crate) fn sampled_sup<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, n: usize) -> f64 {
    (0..=n).map(|i| if hi > lo { lo + (hi - lo) * i as f64 / n as f64 } else { lo }).map(g).fold(0.0, f64::max)
}

/// Flux for data shifted by a constant: `f_shift(s) = f(s + m) - f(m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedFluxModel {
    pub base: FluxModel,
    pub shift: f64,
    pub model: FluxModel,
}

impl ShiftedFluxModel {
    pub fn vtilde_shift(&self, s: f64) -> f64 {
        self.model.vtilde(s)
    }
}

/// Builds the flux of the shifted unknown `q - m`; its admissible range is translated by `-m`.
pub fn shift_model(base: &FluxModel, q0_essinf: f64) -> Result<ShiftedFluxModel> {
    if !q0_essinf.is_finite() {
        return Err(Error::InvalidArgument("shift must be finite".into()));
    }
    let m = q0_essinf;
    let shifted = base.polynomial().shifted(m);
    let mut coeffs = shifted.coeffs().to_vec();
    coeffs[0] = 0.0;
    let (lo, hi) = base.range();
    let model = FluxModel::from_poly(
        &format!("{}-shifted", base.name),
        Poly::new(coeffs),
        ((lo - m).max(0.0), (hi - m).max(0.0)),
    )?;
    Ok(ShiftedFluxModel { base: base.clone(), shift: m, model })
}

/// Configuration-level choice of splitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitSpec {
    EngquistOsher,
    Midpoint { kappa: Option<f64> },
    OneSided,
}

#[derive(Debug, Clone, PartialEq)]
enum Mode {
    EngquistOsher { roots: Vec<f64> },
    Midpoint { kappa: f64 },
    OneSided,
}

/// A velocity `V(a, b)` with `dV/da >= 0`, `dV/db <= 0` and `s V(s, s) = f(s)`.
/// `a` is the left-looking average, `b` the right-looking one.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySplit {
    flux: FluxModel,
    mode: Mode,
    spec: SplitSpec,
}

impl VelocitySplit {
    pub fn new(flux: &FluxModel, spec: SplitSpec) -> Result<Self> {
        let (lo, hi) = flux.range();
        let mode = match spec {
            SplitSpec::EngquistOsher => {
                let a = lo.min(0.0) - 1.0;
                let b = hi.max(0.0) + 1.0;
                let roots = sign_changes(&flux.vtilde_prime, a, b, ROOT_SAMPLES, ROOT_TOL);
                Mode::EngquistOsher { roots }
            }
            SplitSpec::Midpoint { kappa } => {
                let min_kappa = flux.vtilde_prime_sup();
                let kappa = match kappa {
                    None => min_kappa,
                    Some(k) if k.is_finite() && k >= min_kappa => k,
                    Some(k) => {
                        return Err(Error::InvalidSplit(format!(
                            "kappa = {k} is below sup|V~'| = {min_kappa} on the admissible range"
                        )))
                    }
                };
                Mode::Midpoint { kappa }
            }
            SplitSpec::OneSided => {
                let worst = (0..=1000)
                    .map(|i| lo + (hi - lo) * i as f64 / 1000.0)
                    .map(|s| flux.vtilde_prime(s))
                    .fold(f64::NEG_INFINITY, f64::max);
                if worst > 1e-14 {
                    return Err(Error::InvalidSplit(format!(
                        "one-sided split needs a nonincreasing f(s)/s, but its derivative reaches {worst} on [{lo}, {hi}]"
                    )));
                }
                Mode::OneSided
            }
        };
        Ok(VelocitySplit { flux: flux.clone(), mode, spec })
    }

    pub fn flux(&self) -> &FluxModel {
        &self.flux
    }

    pub fn spec(&self) -> SplitSpec {
        self.spec
    }

    pub fn kappa(&self) -> Option<f64> {
        match self.mode {
            Mode::Midpoint { kappa } => Some(kappa),
            _ => None,
        }
    }

    /// Whether `V` depends on its first (left-looking) argument.
    pub fn uses_left(&self) -> bool {
        !matches!(self.mode, Mode::OneSided)
    }

    #[inline]
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match &self.mode {
            Mode::EngquistOsher { roots } => {
                self.flux.vtilde(0.0) + self.signed_part(a, roots, true) + self.signed_part(b, roots, false)
            }
            Mode::Midpoint { kappa } => self.flux.vtilde(0.5 * (a + b)) + kappa * (a - b),
            Mode::OneSided => self.flux.vtilde(b),
        }
    }

    /// `int_0^x max(V~', 0)` (positive) or `int_0^x min(V~', 0)`. Between consecutive sign
    /// changes of `V~'` the integrand is `V~'` or zero, so each piece is a difference of `V~`.
    fn signed_part(&self, x: f64, roots: &[f64], positive: bool) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let (lo, hi, sign) = if x > 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
        let vt = &self.flux.vtilde;
        let vp = &self.flux.vtilde_prime;
        let mut total = 0.0;
        let mut u = lo;
        for &r in roots.iter().filter(|&&r| r > lo && r < hi).chain(std::iter::once(&hi)) {
            let slope = vp.eval(0.5 * (u + r));
            if (slope > 0.0) == positive && slope != 0.0 {
                total += vt.eval(r) - vt.eval(u);
            }
            u = r;
        }
        sign * total
    }

    /// Same integrals by composite Simpson with panels aligned at the sign changes of `V~'`.
    pub fn eval_simpson(&self, a: f64, b: f64, panels: usize) -> f64 {
        let Mode::EngquistOsher { roots } = &self.mode else {
            return self.eval(a, b);
        };
        let part = |x: f64, positive: bool| -> f64 {
            if x == 0.0 {
                return 0.0;
            }
            let (lo, hi, sign) = if x > 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
            let mut cuts = vec![lo];
            cuts.extend(roots.iter().copied().filter(|&r| r > lo && r < hi));
            cuts.push(hi);
            let vp = &self.flux.vtilde_prime;
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let n = (((w[1] - w[0]) / (hi - lo) * panels as f64).round() as usize).max(2);
                total += if positive {
                    simpson(|s| vp.eval(s).max(0.0), w[0], w[1], n)
                } else {
                    simpson(|s| vp.eval(s).min(0.0), w[0], w[1], n)
                };
            }
            sign * total
        };
        self.flux.vtilde(0.0) + part(a, true) + part(b, false)
    }

    fn sample_box(&self) -> (f64, f64) {
        let (lo, hi) = self.flux.range();
        if hi - lo < 1e-9 {
            (lo, lo + 1e-6)
        } else {
            (lo, hi)
        }
    }

    /// `(sup |dV/da|, sup |dV/db|)` from difference quotients on a 200 x 200 grid.
    pub fn partial_bounds(&self) -> (f64, f64) {
        let n = 200;
        let (lo, hi) = self.sample_box();
        let h = (hi - lo) / (n - 1) as f64;
        let node = |i: usize| lo + h * i as f64;
        let mut d1 = 0.0f64;
        let mut d2 = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let v = self.eval(node(i), node(j));
                if i + 1 < n {
                    d1 = d1.max(((self.eval(node(i + 1), node(j)) - v) / h).abs());
                }
                if j + 1 < n {
                    d2 = d2.max(((self.eval(node(i), node(j + 1)) - v) / h).abs());
                }
            }
        }
        (d1, d2)
    }

    /// Upper bound for `||grad V||_inf = max(sup|dV/da|, sup|dV/db|)` on the admissible square.
    pub fn gradient_bound(&self) -> f64 {
        let (d1, d2) = self.partial_bounds();
        SAFETY * d1.max(d2)
    }

    /// Upper bound for `sup |V|` on the admissible square.
    pub fn speed_bound(&self) -> f64 {
        let n = 200;
        let (lo, hi) = self.sample_box();
        let h = (hi - lo) / (n - 1) as f64;
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                m = m.max(self.eval(lo + h * i as f64, lo + h * j as f64).abs());
            }
        }
        SAFETY * m
    }

    /// Pairwise check of `dV/da >= 0` and `dV/db <= 0` on an `n x n` grid of the admissible square.
    pub fn is_monotone(&self, n: usize) -> bool {
        let (lo, hi) = self.sample_box();
        let node = |i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let tol = 1e-12;
        for i in 0..n {
            for j in 0..n {
                let v = self.eval(node(i), node(j));
                if i + 1 < n && self.eval(node(i + 1), node(j)) < v - tol {
                    return false;
                }
                if j + 1 < n && self.eval(node(i), node(j + 1)) > v + tol {
                    return false;
                }
            }
        }
        true
    }
}
