//! Uniform 1-D grids, cell-averaged fields and the initial data used by the experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Indices wrap; kernels see the periodic continuation.
    Periodic,
    /// Data are extended by the boundary cell value; mass may leave or enter.
    Outflow,
}

/// `n_cells` cells of width `dx` starting at `x_left`. Interface `j` sits at `x_left + j dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_left: f64,
    pub dx: f64,
    pub n_cells: usize,
}

impl Grid {
    pub fn new(x_left: f64, dx: f64, n_cells: usize) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
        }
        if n_cells == 0 || !x_left.is_finite() {
            return Err(Error::InvalidArgument("grid needs at least one cell".into()));
        }
        Ok(Grid { x_left, dx, n_cells })
    }

    /// Grid on `[a, b]` with cell width as close to `dx` as an integer cell count allows.
    pub fn covering(a: f64, b: f64, dx: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidArgument(format!("empty domain [{a}, {b}]")));
        }
        let n = ((b - a) / dx).round().max(1.0) as usize;
        Grid::new(a, (b - a) / n as f64, n)
    }

    pub fn x_right(&self) -> f64 {
        self.x_left + self.dx * self.n_cells as f64
    }

    pub fn length(&self) -> f64 {
        self.dx * self.n_cells as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn interface(&self, j: usize) -> f64 {
        self.x_left + j as f64 * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    pub fn interfaces(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|j| self.interface(j)).collect()
    }

    /// Index of the interface at `x = 0`, if the origin is a grid interface.
    pub fn origin_interface(&self) -> Option<usize> {
        let j = (-self.x_left / self.dx).round();
        if j < 0.0 || j > self.n_cells as f64 {
            return None;
        }
        let x = self.interface(j as usize);
        (x.abs() <= 1e-9 * self.dx).then_some(j as usize)
    }

    /// Cell containing `x` (clamped to the grid).
    pub fn cell_of(&self, x: f64) -> usize {
        let i = ((x - self.x_left) / self.dx).floor();
        i.clamp(0.0, (self.n_cells - 1) as f64) as usize
    }
}

/// Cell averages on a grid at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n_cells {
            return Err(Error::GridMismatch(format!("{} values for {} cells", values.len(), grid.n_cells)));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time, cell: i });
        }
        Ok(Field { grid, values, time })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field { grid, values: vec![c; grid.n_cells], time: 0.0 }
    }

    /// Cell averages of a smooth function by composite Gauss-Legendre quadrature.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Self {
        let values = (0..grid.n_cells)
            .map(|i| {
                let a = grid.interface(i);
                gauss_legendre(&f, a, a + grid.dx, 2) / grid.dx
            })
            .collect();
        Field { grid, values, time: 0.0 }
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn l1_distance(&self, other: &Field) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.grid.dx)
    }

    /// Translates values by whole cells with wrap-around.
    pub fn rotated(&self, cells: isize) -> Field {
        let n = self.values.len() as isize;
        let values = (0..n).map(|i| self.values[(i - cells).rem_euclid(n) as usize]).collect();
        Field { grid: self.grid, values, time: self.time }
    }
}

/// Initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Datum {
    Constant {
        value: f64,
    },
    /// `q_left` for `x < x_jump`, `q_right` otherwise.
    Riemann {
        q_left: f64,
        q_right: f64,
        x_jump: f64,
    },
    /// `height * exp(1 - 1/(1 - r^2))` with `r = (x - center)/radius`, zero for `|r| >= 1`.
    Bump {
        center: f64,
        radius: f64,
        height: f64,
    },
    /// Piecewise-linear through `(xs[i], values[i])`, constant beyond the end points.
    Sampled {
        xs: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Datum {
    pub fn sampled(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != values.len() {
            return Err(Error::InvalidArgument("sampled datum needs at least two (x, q) pairs".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "sampled datum abscissae must be strictly increasing and values finite".into(),
            ));
        }
        Ok(Datum::Sampled { xs, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Datum::Constant { value } => value,
            Datum::Riemann { q_left, q_right, x_jump } => {
                if x < x_jump {
                    q_left
                } else {
                    q_right
                }
            }
            Datum::Bump { center, radius, height } => {
                let r = (x - center) / radius;
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    height * (1.0 - 1.0 / (1.0 - r * r)).exp()
                }
            }
            Datum::Sampled { ref xs, ref values } => {
                let n = xs.len();
                if x <= xs[0] {
                    return values[0];
                }
                if x >= xs[n - 1] {
                    return values[n - 1];
                }
                let i = xs.partition_point(|&p| p <= x) - 1;
                let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// Antiderivative of a sampled datum from `xs[0]`.
    fn sampled_integral(xs: &[f64], values: &[f64], x: f64) -> f64 {
        let n = xs.len();
        if x <= xs[0] {
            return values[0] * (x - xs[0]);
        }
        let mut acc = 0.0;
        for i in 0..n - 1 {
            if x <= xs[i + 1] {
                let w = x - xs[i];
                let slope = (values[i + 1] - values[i]) / (xs[i + 1] - xs[i]);
                return acc + values[i] * w + 0.5 * slope * w * w;
            }
            acc += 0.5 * (values[i] + values[i + 1]) * (xs[i + 1] - xs[i]);
        }
        acc + values[n - 1] * (x - xs[n - 1])
    }

    /// Exact cell averages for piecewise-constant data, Gauss-Legendre for the bump.
    pub fn cell_averages(&self, grid: Grid) -> Field {
        match *self {
            Datum::Sampled { ref xs, ref values } => {
                let mut prev = Self::sampled_integral(xs, values, grid.interface(0));
                let values = (0..grid.n_cells)
                    .map(|i| {
                        let next = Self::sampled_integral(xs, values, grid.interface(i + 1));
                        let avg = (next - prev) / grid.dx;
                        prev = next;
                        avg
                    })
                    .collect();
                Field { grid, values, time: 0.0 }
            }
            Datum::Constant { value } => Field::constant(grid, value),
            Datum::Riemann { q_left, q_right, x_jump } => {
                let values = (0..grid.n_cells)
                    .map(|i| {
                        let a = grid.interface(i);
                        let b = a + grid.dx;
                        let frac = ((x_jump - a) / grid.dx).clamp(0.0, 1.0);
                        if x_jump <= a {
                            q_right
                        } else if x_jump >= b {
                            q_left
                        } else {
                            frac * q_left + (1.0 - frac) * q_right
                        }
                    })
                    .collect();
                Field { grid, values, time: 0.0 }
            }
            Datum::Bump { center, radius, .. } => {
                let values = (0..grid.n_cells)
                    .map(|i| {
                        let a = grid.interface(i).max(center - radius);
                        let b = (grid.interface(i) + grid.dx).min(center + radius);
                        if b <= a {
                            0.0
                        } else {
                            gauss_legendre(|x| self.eval(x), a, b, 4) / grid.dx
                        }
                    })
                    .collect();
                Field { grid, values, time: 0.0 }
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Datum::Constant { value } => (value, value),
            Datum::Riemann { q_left, q_right, .. } => (q_left.min(q_right), q_left.max(q_right)),
            Datum::Bump { height, .. } => (height.min(0.0), height.max(0.0)),
            Datum::Sampled { ref values, .. } => {
                values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
            }
        }
    }

    /// Interval outside which the datum is constant (`None` for constants).
    pub fn transition_zone(&self) -> Option<(f64, f64)> {
        match *self {
            Datum::Constant { .. } => None,
            Datum::Riemann { x_jump, .. } => Some((x_jump, x_jump)),
            Datum::Bump { center, radius, .. } => Some((center - radius, center + radius)),
            Datum::Sampled { ref xs, .. } => Some((xs[0], xs[xs.len() - 1])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_interface_detection() {
        let g = Grid::covering(-3.0, 3.0, 1.0 / 64.0).unwrap();
        let j = g.origin_interface().unwrap();
        assert!(g.interface(j).abs() < 1e-12);
        let shifted = Grid::new(-1.0 + 0.3 / 64.0, 1.0 / 64.0, 128).unwrap();
        assert!(shifted.origin_interface().is_none());
    }

    #[test]
    fn riemann_averages_are_exact() {
        let g = Grid::new(-1.0, 0.25, 8).unwrap();
        let d = Datum::Riemann { q_left: 1.0, q_right: 0.0, x_jump: 0.1 };
        let f = d.cell_averages(g);
        assert_eq!(f.values[4], 0.4);
        assert!((f.mass() - 1.1).abs() < 1e-14);
    }

    #[test]
    fn sampled_averages_integrate_the_interpolant() {
        let d = Datum::sampled(vec![-0.5, 0.0, 0.5], vec![0.0, 1.0, 0.0]).unwrap();
        let g = Grid::covering(-1.0, 1.0, 1.0 / 16.0).unwrap();
        let f = d.cell_averages(g);
        assert!((f.mass() - 0.5).abs() < 1e-14);
        assert_eq!(d.eval(0.25), 0.5);
        assert_eq!(d.eval(-3.0), 0.0);
        assert!(Datum::sampled(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn bump_mass_matches_fine_quadrature() {
        let d = Datum::Bump { center: 0.0, radius: 0.5, height: 0.8 };
        let g = Grid::covering(-1.0, 1.0, 1.0 / 64.0).unwrap();
        let fine = gauss_legendre(|x| d.eval(x), -0.5, 0.5, 4000);
        assert!((d.cell_averages(g).mass() - fine).abs() < 1e-10);
        assert!((d.eval(0.0) - 0.8).abs() < 1e-15);
    }
}
