//! One-sided monotone kernels and their scaling family `k * gamma(k x)`.
//!
//! A kernel is described by the distance `d = |x|` from the origin on its
//! support side: the left-looking kernel lives on `x > 0`, the right-looking
//! kernel on `x < 0`. All shapes have unit mass and are nonincreasing in `d`,
//! so they are nonincreasing on `x > 0` (left) and nondecreasing on `x < 0`
//! (right).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail mass below which the exponential kernel is treated as exhausted.
pub const TAIL_CUTOFF: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSide {
    /// Averages over the upstream side, supported on `x > 0`.
    Left,
    /// Averages over the downstream side, supported on `x < 0`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum KernelShape {
    Exponential { rate: f64 },
    Box { width: f64 },
    Triangle { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelFamily {
    pub side: KernelSide,
    pub shape: KernelShape,
}

impl KernelFamily {
    pub fn new(side: KernelSide, shape: KernelShape) -> Result<Self> {
        let p = match shape {
            KernelShape::Exponential { rate } => rate,
            KernelShape::Box { width } | KernelShape::Triangle { width } => width,
        };
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidKernel(format!("shape parameter must be positive and finite, got {p}")));
        }
        Ok(KernelFamily { side, shape })
    }

    pub fn scaled(self, k: f64) -> Result<ScaledKernel> {
        ScaledKernel::new(self, k)
    }
}

/// Mass and moment summary of a scaled kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    pub total_mass: f64,
    pub truncated_first_moment: f64,
}

/// `gamma_k(x) = k * gamma(k x)` for a base family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledKernel {
    pub family: KernelFamily,
    pub k: f64,
}

impl ScaledKernel {
    pub fn new(family: KernelFamily, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidKernel(format!("scale k must be positive, got {k}")));
        }
        Ok(ScaledKernel { family, k })
    }

    pub fn side(&self) -> KernelSide {
        self.family.side
    }

    /// Distance from the origin measured into the support, or `None` on the wrong side.
    fn distance(&self, x: f64) -> Option<f64> {
        match self.family.side {
            KernelSide::Left if x > 0.0 => Some(x),
            KernelSide::Right if x < 0.0 => Some(-x),
            _ => None,
        }
    }

    /// Density as a function of distance `d > 0` into the support.
    pub fn density_at_distance(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return 0.0;
        }
        let k = self.k;
        match self.family.shape {
            KernelShape::Exponential { rate } => k * rate * (-rate * k * d).exp(),
            KernelShape::Box { width } => {
                if k * d < width {
                    k / width
                } else {
                    0.0
                }
            }
            KernelShape::Triangle { width } => {
                let u = k * d / width;
                if u < 1.0 {
                    2.0 * k / width * (1.0 - u)
                } else {
                    0.0
                }
            }
        }
    }

    /// Pointwise value `k * gamma(k x)`; zero off the support side.
    pub fn eval(&self, x: f64) -> f64 {
        self.distance(x).map_or(0.0, |d| self.density_at_distance(d))
    }

    /// Mass carried within distance `d` of the origin, in `[0, 1]`.
    pub fn cumulative(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return 0.0;
        }
        let k = self.k;
        let m = match self.family.shape {
            KernelShape::Exponential { rate } => -(-rate * k * d).exp_m1(),
            KernelShape::Box { width } => (k * d / width).min(1.0),
            KernelShape::Triangle { width } => {
                let u = (k * d / width).min(1.0);
                u * (2.0 - u)
            }
        };
        m.clamp(0.0, 1.0)
    }

    /// Integral of the kernel between the origin and `x`, clamped to `[0, 1]`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        self.distance(x).map_or(0.0, |d| self.cumulative(d))
    }

    /// Mass beyond distance `x > 0`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let k = self.k;
        match self.family.shape {
            KernelShape::Exponential { rate } => (-rate * k * x).exp(),
            KernelShape::Box { width } => (1.0 - k * x / width).max(0.0),
            KernelShape::Triangle { width } => {
                let r = (1.0 - k * x / width).max(0.0);
                r * r
            }
        }
    }

    /// `M = int_0^inf min(1, d) gamma_k(d) dd`, in closed form.
    pub fn truncated_first_moment(&self) -> f64 {
        let k = self.k;
        match self.family.shape {
            KernelShape::Exponential { rate } => {
                let mu = rate * k;
                -(-mu).exp_m1() / mu
            }
            KernelShape::Box { width } => {
                let a = width / k;
                if a <= 1.0 {
                    0.5 * a
                } else {
                    1.0 - 0.5 / a
                }
            }
            KernelShape::Triangle { width } => {
                let a = width / k;
                if a <= 1.0 {
                    a / 3.0
                } else {
                    let r = 1.0 - 1.0 / a;
                    a / 3.0 * (1.0 - r * r * r)
                }
            }
        }
    }

    pub fn moments(&self) -> KernelMoments {
        KernelMoments {
            total_mass: self.cumulative(f64::INFINITY),
            truncated_first_moment: self.truncated_first_moment(),
        }
    }

    /// Distance past which the kernel carries no mass (exponential: tail below [`TAIL_CUTOFF`]).
    pub fn effective_support(&self) -> f64 {
        match self.family.shape {
            KernelShape::Exponential { rate } => -TAIL_CUTOFF.ln() / (rate * self.k),
            KernelShape::Box { width } | KernelShape::Triangle { width } => width / self.k,
        }
    }

    /// Weights `w[m]` such that the average at an interface is `sum_m w[m] q[cell m steps away]`,
    /// where step 0 is the cell adjacent to the interface on the support side.
    pub fn interface_stencil(&self, dx: f64) -> Vec<f64> {
        let len = ((self.effective_support() / dx).ceil() as usize).max(1);
        let mut w: Vec<f64> =
            (0..len).map(|m| self.cumulative((m + 1) as f64 * dx) - self.cumulative(m as f64 * dx)).collect();
        fold_residual(&mut w);
        w
    }

    /// Weights for averages taken at cell centers; step 0 is the cell itself (half of it lies
    /// on the support side).
    pub fn center_stencil(&self, dx: f64) -> Vec<f64> {
        let len = ((self.effective_support() / dx + 0.5).ceil() as usize).max(1);
        let mut w: Vec<f64> = (0..len)
            .map(|m| {
                let hi = (m as f64 + 0.5) * dx;
                let lo = (m as f64 - 0.5).max(0.0) * dx;
                self.cumulative(hi) - self.cumulative(lo)
            })
            .collect();
        fold_residual(&mut w);
        w
    }
}

/// Puts the missing mass into the last weight so the stencil sums to one.
fn fold_residual(w: &mut [f64]) {
    let n = w.len();
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = (1.0 - head).max(0.0);
}

/// The two kernels of the model. `None` means the side is inactive, i.e. the
/// corresponding average degenerates to the local value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    pub left: Option<ScaledKernel>,
    pub right: Option<ScaledKernel>,
}

impl KernelPair {
    pub fn new(left: Option<ScaledKernel>, right: Option<ScaledKernel>) -> Result<Self> {
        if let Some(l) = left {
            if l.side() != KernelSide::Left {
                return Err(Error::InvalidKernel("left slot holds a right-sided kernel".into()));
            }
        }
        if let Some(r) = right {
            if r.side() != KernelSide::Right {
                return Err(Error::InvalidKernel("right slot holds a left-sided kernel".into()));
            }
        }
        Ok(KernelPair { left, right })
    }

    /// Same base shape on both sides at scale `k`.
    pub fn symmetric(shape: KernelShape, k: f64) -> Result<Self> {
        let l = KernelFamily::new(KernelSide::Left, shape)?.scaled(k)?;
        let r = KernelFamily::new(KernelSide::Right, shape)?.scaled(k)?;
        KernelPair::new(Some(l), Some(r))
    }

    /// `(M_minus, M_plus)`; an inactive side contributes zero.
    pub fn truncated_moments(&self) -> (f64, f64) {
        (self.left.map_or(0.0, |k| k.truncated_first_moment()), self.right.map_or(0.0, |k| k.truncated_first_moment()))
    }

    pub fn moments_sum(&self) -> f64 {
        let (m, p) = self.truncated_moments();
        m + p
    }

    /// Largest support distance over the active kernels.
    pub fn reach(&self) -> f64 {
        let l = self.left.map_or(0.0, |k| k.effective_support());
        let r = self.right.map_or(0.0, |k| k.effective_support());
        l.max(r)
    }
}

/// Config-level description `{side, shape, param, k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub side: KernelSide,
    pub shape: ShapeName,
    pub param: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Exponential,
    Box,
    Triangle,
}

impl ShapeName {
    pub fn with_param(self, param: f64) -> KernelShape {
        match self {
            ShapeName::Exponential => KernelShape::Exponential { rate: param },
            ShapeName::Box => KernelShape::Box { width: param },
            ShapeName::Triangle => KernelShape::Triangle { width: param },
        }
    }
}

impl KernelSpec {
    pub fn build(&self) -> Result<ScaledKernel> {
        KernelFamily::new(self.side, self.shape.with_param(self.param))?.scaled(self.k)
    }
}
