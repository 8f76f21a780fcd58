//! Exact discrete measures, cost matrices, couplings and dual potentials.

use ndarray::Array2;
use num_traits::{One, Signed, Zero};

use crate::error::{OtError, Result};
use crate::scalar::{self, Scalar};

/// A probability measure with finitely many atoms, all of positive weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteMeasure {
    labels: Vec<String>,
    weights: Vec<Scalar>,
}

impl DiscreteMeasure {
    /// Atoms are labelled `"1"`, `"2"`, ... in order.
    pub fn new(weights: Vec<Scalar>) -> Result<Self> {
        let labels = (1..=weights.len()).map(|i| i.to_string()).collect();
        Self::with_labels(labels, weights)
    }

    pub fn with_labels(labels: Vec<String>, weights: Vec<Scalar>) -> Result<Self> {
        if labels.len() != weights.len() {
            return Err(OtError::DimensionMismatch {
                context: "measure labels",
                expected: weights.len(),
                found: labels.len(),
            });
        }
        if weights.is_empty() {
            return Err(OtError::InvalidMeasure("measure has no atoms".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_positive()) {
            return Err(OtError::InvalidMeasure(format!(
                "weight of atom {} is {}, expected a positive value",
                labels[i], weights[i]
            )));
        }
        let total = scalar::sum(&weights);
        if total != Scalar::one() {
            return Err(OtError::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { labels, weights })
    }

    pub fn parse<S: AsRef<str>>(weights: &[S]) -> Result<Self> {
        let weights = weights
            .iter()
            .map(|w| scalar::parse(w.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![scalar::ratio(1, n as i64); n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[Scalar] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> &Scalar {
        &self.weights[atom]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Total weight of a set of atoms.
    pub fn mass_of(&self, atoms: &[usize]) -> Scalar {
        atoms.iter().map(|&a| &self.weights[a]).fold(Scalar::zero(), |acc, w| acc + w)
    }

    /// The measure restricted to `atoms` and renormalised to total mass one.
    pub fn restrict(&self, atoms: &[usize]) -> Result<Self> {
        let total = self.mass_of(atoms);
        let labels = atoms.iter().map(|&a| self.labels[a].clone()).collect();
        let weights = atoms.iter().map(|&a| &self.weights[a] / &total).collect();
        Self::with_labels(labels, weights)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.weights.iter().map(scalar::to_f64).collect()
    }
}

/// Nonnegative transport costs `c[i, j]` between atom `i` of the first measure
/// and atom `j` of the second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostMatrix {
    entries: Array2<Scalar>,
}

impl CostMatrix {
    pub fn new(entries: Array2<Scalar>) -> Result<Self> {
        if entries.is_empty() {
            return Err(OtError::InvalidCost("empty cost matrix".into()));
        }
        if let Some(((i, j), v)) = entries.indexed_iter().find(|(_, v)| v.is_negative()) {
            return Err(OtError::InvalidCost(format!("entry ({i}, {j}) is negative: {v}")));
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(OtError::DimensionMismatch {
                context: "cost matrix row",
                expected: n_cols,
                found: bad.len(),
            });
        }
        let flat: Vec<Scalar> = rows.into_iter().flatten().collect();
        let entries = Array2::from_shape_vec((n_rows, n_cols), flat)
            .map_err(|e| OtError::InvalidCost(e.to_string()))?;
        Self::new(entries)
    }

    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|v| scalar::parse(v.as_ref())).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut((usize, usize)) -> Scalar) -> Result<Self> {
        Self::new(Array2::from_shape_fn((rows, cols), f))
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.entries[[i, j]]
    }

    pub fn entries(&self) -> &Array2<Scalar> {
        &self.entries
    }

    /// Sub-matrix on the given rows and columns, in the given order.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        Self::from_fn(rows.len(), cols.len(), |(a, b)| self.entries[[rows[a], cols[b]]].clone())
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.entries.map(scalar::to_f64)
    }

    pub fn check_shape(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
        if self.rows() != mu.len() {
            return Err(OtError::DimensionMismatch {
                context: "cost rows vs first marginal",
                expected: mu.len(),
                found: self.rows(),
            });
        }
        if self.cols() != nu.len() {
            return Err(OtError::DimensionMismatch {
                context: "cost columns vs second marginal",
                expected: nu.len(),
                found: self.cols(),
            });
        }
        Ok(())
    }
}

/// A coupling of two discrete measures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportPlan {
    entries: Array2<Scalar>,
}

impl TransportPlan {
    /// Validates nonnegativity and both marginals exactly.
    pub fn new(entries: Array2<Scalar>, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Self> {
        if entries.dim() != (mu.len(), nu.len()) {
            return Err(OtError::DimensionMismatch {
                context: "plan shape",
                expected: mu.len() * nu.len(),
                found: entries.len(),
            });
        }
        if let Some(((i, j), v)) = entries.indexed_iter().find(|(_, v)| v.is_negative()) {
            return Err(OtError::InvalidPlan(format!("entry ({i}, {j}) is negative: {v}")));
        }
        for (i, row) in entries.rows().into_iter().enumerate() {
            let s = scalar::sum(row.iter());
            if &s != mu.weight(i) {
                return Err(OtError::InvalidPlan(format!(
                    "row {i} sums to {s}, expected {}",
                    mu.weight(i)
                )));
            }
        }
        for (j, col) in entries.columns().into_iter().enumerate() {
            let s = scalar::sum(col.iter());
            if &s != nu.weight(j) {
                return Err(OtError::InvalidPlan(format!(
                    "column {j} sums to {s}, expected {}",
                    nu.weight(j)
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Self> {
        let flat: Vec<Scalar> = rows.into_iter().flatten().collect();
        let entries = Array2::from_shape_vec((mu.len(), nu.len()), flat)
            .map_err(|e| OtError::InvalidPlan(e.to_string()))?;
        Self::new(entries, mu, nu)
    }

    /// Builds a plan from its nonzero cells.
    pub fn from_cells(
        cells: &[((usize, usize), Scalar)],
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
    ) -> Result<Self> {
        let mut entries = Array2::from_elem((mu.len(), nu.len()), Scalar::zero());
        for ((i, j), v) in cells {
            if *i >= mu.len() || *j >= nu.len() {
                return Err(OtError::InvalidPlan(format!("cell ({i}, {j}) out of range")));
            }
            entries[[*i, *j]] += v;
        }
        Self::new(entries, mu, nu)
    }

    /// Product coupling.
    pub fn independent(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let entries = Array2::from_shape_fn((mu.len(), nu.len()), |(i, j)| mu.weight(i) * nu.weight(j));
        Self { entries }
    }

    pub(crate) fn from_entries_unchecked(entries: Array2<Scalar>) -> Self {
        Self { entries }
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.entries[[i, j]]
    }

    pub fn entries(&self) -> &Array2<Scalar> {
        &self.entries
    }

    /// Cells carrying positive mass, in row-major order.
    pub fn support(&self) -> Vec<(usize, usize)> {
        self.entries
            .indexed_iter()
            .filter(|(_, v)| v.is_positive())
            .map(|(ij, _)| ij)
            .collect()
    }

    /// The plan restricted to a block, divided by its mass.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Self {
        let block = Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| {
            self.entries[[rows[a], cols[b]]].clone()
        });
        let mass = scalar::sum(block.iter());
        let entries = if mass.is_zero() { block } else { block.map(|v| v / &mass) };
        Self { entries }
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.entries.map(scalar::to_f64)
    }
}

/// Potentials `(phi, psi)` of the dual transport problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualPair {
    pub phi: Vec<Scalar>,
    pub psi: Vec<Scalar>,
}

impl DualPair {
    /// Checked constructor: the pair must satisfy `phi[i] + psi[j] <= c[i, j]`.
    pub fn new(phi: Vec<Scalar>, psi: Vec<Scalar>, c: &CostMatrix) -> Result<Self> {
        let pair = Self { phi, psi };
        pair.check_feasible(c)?;
        Ok(pair)
    }

    /// Unchecked constructor for candidate potentials.
    pub fn from_parts(phi: Vec<Scalar>, psi: Vec<Scalar>) -> Self {
        Self { phi, psi }
    }

    pub fn check_feasible(&self, c: &CostMatrix) -> Result<()> {
        if self.phi.len() != c.rows() {
            return Err(OtError::DimensionMismatch {
                context: "phi vs cost rows",
                expected: c.rows(),
                found: self.phi.len(),
            });
        }
        if self.psi.len() != c.cols() {
            return Err(OtError::DimensionMismatch {
                context: "psi vs cost columns",
                expected: c.cols(),
                found: self.psi.len(),
            });
        }
        for ((i, j), cij) in c.entries().indexed_iter() {
            if &self.phi[i] + &self.psi[j] > *cij {
                return Err(OtError::DualInfeasible { row: i, col: j });
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, c: &CostMatrix) -> bool {
        self.check_feasible(c).is_ok()
    }

    /// Dual objective `phi . mu + psi . nu`.
    pub fn value(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Scalar {
        scalar::dot(&self.phi, mu.weights()) + scalar::dot(&self.psi, nu.weights())
    }

    /// Adds `shift` to `phi` and subtracts it from `psi`.
    pub fn translated(&self, shift: &Scalar) -> Self {
        Self {
            phi: self.phi.iter().map(|v| v + shift).collect(),
            psi: self.psi.iter().map(|v| v - shift).collect(),
        }
    }

    /// Translation with `phi[anchor] = 0`.
    pub fn normalized(&self, anchor: usize) -> Self {
        let shift = -self.phi[anchor].clone();
        self.translated(&shift)
    }

    /// Cells where `phi[i] + psi[j] = c[i, j]`.
    pub fn tight_cells(&self, c: &CostMatrix) -> Vec<(usize, usize)> {
        c.entries()
            .indexed_iter()
            .filter(|((i, j), cij)| &self.phi[*i] + &self.psi[*j] == **cij)
            .map(|(ij, _)| ij)
            .collect()
    }

    pub fn to_f64(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.phi.iter().map(scalar::to_f64).collect(),
            self.psi.iter().map(scalar::to_f64).collect(),
        )
    }
}
