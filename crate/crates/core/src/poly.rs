//! Dense polynomials with real coefficients and a simultaneous root finder.

use num_complex::Complex64;

use crate::error::EigenError;

/// Polynomial with real coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::new(vec![0.0]);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        Self::new((0..len).map(|i| get(&self.coeffs, i) - get(&other.coeffs, i)).collect())
    }

    /// Multiplies by the monomial `x`.
    pub fn shift_up(&self) -> Self {
        let mut c = Vec::with_capacity(self.coeffs.len() + 1);
        c.push(0.0);
        c.extend_from_slice(&self.coeffs);
        Self::new(c)
    }

    /// Value and derivative by Horner's scheme.
    fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Sum of `|c_k|·|z|^k`, the natural scale for residuals at `z`.
    fn magnitude_at(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    /// All complex roots by the Aberth–Ehrlich iteration followed by Newton polishing.
    pub fn roots(&self) -> Result<Vec<Complex64>, EigenError> {
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = *self.coeffs.last().unwrap();
        // Cauchy bound on root moduli.
        let radius = 1.0
            + self.coeffs[..n]
                .iter()
                .map(|c| (c / lead).abs())
                .fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4))
            .collect();

        let mut converged = false;
        for _ in 0..500 {
            let mut max_step = 0.0f64;
            for k in 0..n {
                let (p, dp) = self.eval_with_derivative(z[k]);
                if p == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let ratio = p / dp;
                let repulsion: Complex64 = (0..n)
                    .filter(|&j| j != k)
                    .map(|j| 1.0 / (z[k] - z[j]))
                    .sum();
                let step = ratio / (1.0 - ratio * repulsion);
                z[k] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
            }
            if max_step < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(EigenError::RootFindingFailure(format!(
                "Aberth iteration did not settle for degree {n}"
            )));
        }
        for root in z.iter_mut() {
            for _ in 0..3 {
                let (p, dp) = self.eval_with_derivative(*root);
                if dp.norm() == 0.0 {
                    break;
                }
                *root -= p / dp;
            }
            let residual = self.eval(*root).norm();
            if residual > 1e-10 * self.magnitude_at(*root) {
                return Err(EigenError::RootFindingFailure(format!(
                    "residual {residual:e} at root {root} exceeds polishing tolerance"
                )));
            }
        }
        Ok(z)
    }
}
