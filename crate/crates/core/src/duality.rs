//! Primal/dual checks shared by every exact module.

use num_traits::{Signed, Zero};

use crate::error::{OtError, Result};
use crate::measure::{CostMatrix, DualPair, TransportPlan};
use crate::scalar::Scalar;

/// Exact `sum c[i,j] gamma[i,j]`.
pub fn transport_cost(gamma: &TransportPlan, c: &CostMatrix) -> Result<Scalar> {
    if (gamma.rows(), gamma.cols()) != (c.rows(), c.cols()) {
        return Err(OtError::DimensionMismatch {
            context: "plan vs cost",
            expected: c.rows() * c.cols(),
            found: gamma.rows() * gamma.cols(),
        });
    }
    Ok(gamma
        .entries()
        .iter()
        .zip(c.entries().iter())
        .fold(Scalar::zero(), |acc, (g, cij)| acc + g * cij))
}

/// True iff `phi[i] + psi[j] = c[i,j]` on every cell where the plan is positive.
pub fn is_complementary(gamma: &TransportPlan, dual: &DualPair, c: &CostMatrix) -> Result<bool> {
    Ok(first_complementarity_violation(gamma, dual, c)?.is_none())
}

pub(crate) fn first_complementarity_violation(
    gamma: &TransportPlan,
    dual: &DualPair,
    c: &CostMatrix,
) -> Result<Option<(usize, usize)>> {
    if (gamma.rows(), gamma.cols()) != (dual.phi.len(), dual.psi.len()) {
        return Err(OtError::DimensionMismatch {
            context: "plan vs potentials",
            expected: gamma.rows() * gamma.cols(),
            found: dual.phi.len() * dual.psi.len(),
        });
    }
    Ok(gamma
        .entries()
        .indexed_iter()
        .find(|((i, j), g)| g.is_positive() && &dual.phi[*i] + &dual.psi[*j] != *c.get(*i, *j))
        .map(|(ij, _)| ij))
}

/// `k^c[i] = min_j c[i,j] - k[j]`; the pair `(k^c, k)` is always dual feasible.
pub fn c_transform(k: &[Scalar], c: &CostMatrix) -> Result<Vec<Scalar>> {
    if k.len() != c.cols() {
        return Err(OtError::DimensionMismatch {
            context: "c-transform input",
            expected: c.cols(),
            found: k.len(),
        });
    }
    Ok(c
        .entries()
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(k)
                .map(|(cij, kj)| cij - kj)
                .min()
                .expect("cost matrix has at least one column")
        })
        .collect())
}

/// Floating point c-transform.
pub fn c_transform_f64(k: &[f64], c: &ndarray::Array2<f64>) -> Vec<f64> {
    c.rows()
        .into_iter()
        .map(|row| row.iter().zip(k).map(|(cij, kj)| cij - kj).fold(f64::INFINITY, f64::min))
        .collect()
}
