//! Dense real polynomials in the monomial basis.

use serde::{Deserialize, Serialize};

/// `coeffs[i]` multiplies `s^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(vec![0.0]);
        }
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect())
    }

    /// Drops the constant term and divides by `s`: `(p(s) - p(0)) / s`.
    pub fn divide_by_s(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(vec![0.0]);
        }
        Poly::new(self.coeffs[1..].to_vec())
    }

    /// Coefficients of `s -> p(s + m)` (Taylor shift).
    pub fn shifted(&self, m: f64) -> Poly {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (j, &c) in self.coeffs.iter().enumerate() {
            let mut binom = 1.0;
            for (i, slot) in out.iter_mut().enumerate().take(j + 1) {
                if i > 0 {
                    binom = binom * (j + 1 - i) as f64 / i as f64;
                }
                *slot += c * binom * m.powi((j - i) as i32);
            }
        }
        Poly::new(out)
    }

    pub fn scale_argument(&self, a: f64) -> Poly {
        Poly::new(self.coeffs.iter().enumerate().map(|(i, &c)| c * a.powi(i as i32)).collect())
    }

    pub fn scale(&self, a: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * a).collect())
    }
}

/// Sign changes of `p` on `[lo, hi]`, located by dense sampling followed by bisection.
pub fn sign_changes(p: &Poly, lo: f64, hi: f64, samples: usize, tol: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    if p.degree() == 0 || hi <= lo {
        return roots;
    }
    let h = (hi - lo) / samples as f64;
    let mut a = lo;
    let mut fa = p.eval(a);
    for i in 1..=samples {
        let b = if i == samples { hi } else { lo + h * i as f64 };
        let fb = p.eval(b);
        if fa == 0.0 {
            if roots.last().is_none_or(|&r: &f64| (r - a).abs() > tol) {
                roots.push(a);
            }
        } else if fa * fb < 0.0 {
            roots.push(bisect(p, a, b, tol));
        }
        a = b;
        fa = fb;
    }
    roots
}

fn bisect(p: &Poly, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = p.eval(a);
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = p.eval(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}
