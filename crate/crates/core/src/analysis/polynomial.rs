//! Dense real polynomials and their roots.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{MfacError, Result};

/// Real polynomial stored by ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree after dropping exact-zero high-order coefficients; `None` for
    /// the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|&c| c != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    pub fn trimmed(&self) -> Self {
        match self.degree() {
            Some(d) => Self::new(self.coeffs[..=d].to_vec()),
            None => Self::new(Vec::new()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Polynomial) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::new(Vec::new());
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn add(&self, other: &Polynomial) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(0.0)
                        + other.coeffs.get(i).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// All complex roots, with multiplicity.
    ///
    /// Roots are the eigenvalues of the companion matrix of the monic
    /// polynomial, each refined by a few Newton steps against the original
    /// coefficients. Exact zero roots are split off first.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let degree = self
            .degree()
            .ok_or_else(|| MfacError::config("cannot take roots of the zero polynomial"))?;
        let zeros = self.coeffs.iter().position(|&c| c != 0.0).unwrap_or(0);
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
        let core = &self.coeffs[zeros..=degree];
        let n = core.len() - 1;
        if n == 0 {
            return Ok(roots);
        }
        let lead = core[n];
        if n == 1 {
            roots.push(Complex64::new(-core[0] / lead, 0.0));
            return Ok(roots);
        }
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -core[i] / lead;
        }
        let eigen = companion.complex_eigenvalues();
        let reduced = Polynomial::new(core.to_vec());
        let slope = reduced.derivative();
        roots.extend(eigen.iter().map(|&z| polish(&reduced, &slope, z)));
        Ok(roots)
    }

    /// Real roots: complex roots whose imaginary part is within
    /// `rel_tol·max(1, |z|)` of the axis, reported by their real part.
    pub fn real_roots(&self, rel_tol: f64) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = self
            .roots()?
            .into_iter()
            .filter(|z| z.im.abs() <= rel_tol * z.norm().max(1.0))
            .map(|z| z.re)
            .collect();
        out.sort_by(|a, b| a.total_cmp(b));
        Ok(out)
    }
}

fn polish(p: &Polynomial, dp: &Polynomial, mut z: Complex64) -> Complex64 {
    let mut best = p.eval_complex(z).norm();
    for _ in 0..4 {
        let d = dp.eval_complex(z);
        if d.norm() == 0.0 {
            break;
        }
        let candidate = z - p.eval_complex(z) / d;
        let r = p.eval_complex(candidate).norm();
        if !(r < best) {
            break;
        }
        best = r;
        z = candidate;
    }
    z
}
