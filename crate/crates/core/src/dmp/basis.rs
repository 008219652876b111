use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Gaussian radial basis functions over the phase variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet<T> {
    pub centers: Vec<T>,
    pub widths: Vec<T>,
}

impl<T: Real> BasisSet<T> {
    /// Builds a basis from explicit centers and widths.
    pub fn new(centers: Vec<T>, widths: Vec<T>) -> Result<Self> {
        if centers.len() != widths.len() {
            return Err(invalid("centers and widths differ in length"));
        }
        if centers.is_empty() {
            return Err(invalid("empty basis"));
        }
        if widths.iter().any(|h| !(*h > T::zero())) {
            return Err(invalid("basis widths must be positive"));
        }
        Ok(Self { centers, widths })
    }

    /// `n` centers equally spaced in time over one time constant, i.e.
    /// log-spaced in phase: `c_i = exp(-alpha_s * i / (n - 1))`. Widths use
    /// overlap 1: `h_i = 1 / (c_{i+1} - c_i)^2`, the last one repeating its
    /// neighbour.
    pub fn log_spaced(n: usize, alpha_s: T) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("need at least 2 basis functions, got {n}")));
        }
        let last = T::lit((n - 1) as f64);
        let centers: Vec<T> = (0..n)
            .map(|i| (-alpha_s * T::lit(i as f64) / last).exp())
            .collect();
        let mut widths: Vec<T> = centers
            .windows(2)
            .map(|w| T::one() / (w[1] - w[0]).powi(2))
            .collect();
        widths.push(widths[n - 2]);
        Self::new(centers, widths)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Normalized activations at phase `s`; entries sum to one.
    pub fn activations(&self, s: T) -> Result<Vec<T>> {
        basis_activations(s, self)
    }
}

/// Normalized Gaussian activations `psi_i(s) / sum_j psi_j(s)`.
pub fn basis_activations<T: Real>(s: T, basis: &BasisSet<T>) -> Result<Vec<T>> {
    if basis.is_empty() {
        return Err(invalid("empty basis"));
    }
    if !(s > T::zero() && s <= T::one()) {
        return Err(invalid(format!("phase {s} outside (0, 1]")));
    }
    let raw: Vec<T> = basis
        .centers
        .iter()
        .zip(&basis.widths)
        .map(|(&c, &h)| (-h * (s - c) * (s - c)).exp())
        .collect();
    let total: T = raw.iter().copied().sum();
    if total > T::zero() {
        Ok(raw.into_iter().map(|r| r / total).collect())
    } else {
        // Every Gaussian underflowed: fall back to the nearest center.
        let nearest = basis
            .centers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (*a.1 - s)
                    .abs()
                    .partial_cmp(&(*b.1 - s).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut out = vec![T::zero(); basis.len()];
        out[nearest] = T::one();
        Ok(out)
    }
}
