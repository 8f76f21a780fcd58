//! Transportation simplex in exact arithmetic.
//!
//! The basis is a spanning tree of the complete bipartite graph on rows and
//! columns (`n + m - 1` cells, degenerate zeros allowed). Entering and leaving
//! cells follow Bland's rule on the row-major cell order, which rules out
//! cycling on degenerate instances.

use std::collections::VecDeque;

use ndarray::Array2;
use num_traits::{Signed, Zero};

use crate::duality::transport_cost;
use crate::error::{OtError, Result};
use crate::measure::{CostMatrix, DiscreteMeasure, DualPair, TransportPlan};
use crate::scalar::Scalar;

/// An optimal basic solution together with the potentials of its basis.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub plan: TransportPlan,
    /// Dual optimizer read off the final basis, normalized so `phi[0] = 0`.
    pub dual: DualPair,
    pub cost: Scalar,
    /// The `n + m - 1` basic cells, in row-major order.
    pub basis: Vec<(usize, usize)>,
    pub pivots: usize,
}

/// Solves `min sum c[i,j] gamma[i,j]` over couplings of `mu` and `nu`.
pub fn solve(mu: &DiscreteMeasure, nu: &DiscreteMeasure, c: &CostMatrix) -> Result<TransportSolution> {
    c.check_shape(mu, nu)?;
    let mut tableau = Tableau::northwest_corner(mu, nu);
    let mut pivots = 0;
    loop {
        let (u, v) = tableau.potentials(c);
        let entering = c.entries().indexed_iter().find_map(|((i, j), cij)| {
            if tableau.basic[[i, j]] {
                return None;
            }
            let reduced = cij - &u[i] - &v[j];
            reduced.is_negative().then_some((i, j))
        });
        let Some(entering) = entering else {
            let dual = DualPair::from_parts(u, v);
            let plan = TransportPlan::from_entries_unchecked(tableau.flow);
            let cost = transport_cost(&plan, c)?;
            let mut basis: Vec<_> = tableau
                .basic
                .indexed_iter()
                .filter(|(_, b)| **b)
                .map(|(ij, _)| ij)
                .collect();
            basis.sort_unstable();
            return Ok(TransportSolution { plan, dual, cost, basis, pivots });
        };
        tableau.pivot(entering);
        pivots += 1;
    }
}

pub fn solve_primal(mu: &DiscreteMeasure, nu: &DiscreteMeasure, c: &CostMatrix) -> Result<TransportPlan> {
    Ok(solve(mu, nu, c)?.plan)
}

/// A dual optimizer with `phi[x0] = 0`.
pub fn solve_dual(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c: &CostMatrix,
    x0: usize,
) -> Result<DualPair> {
    if x0 >= mu.len() {
        return Err(OtError::UnknownAtom { index: x0, len: mu.len() });
    }
    Ok(solve(mu, nu, c)?.dual.normalized(x0))
}

/// Optimal value only.
pub fn optimal_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, c: &CostMatrix) -> Result<Scalar> {
    Ok(solve(mu, nu, c)?.cost)
}

struct Tableau {
    flow: Array2<Scalar>,
    basic: Array2<bool>,
}

impl Tableau {
    fn northwest_corner(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let (n, m) = (mu.len(), nu.len());
        let mut flow = Array2::from_elem((n, m), Scalar::zero());
        let mut basic = Array2::from_elem((n, m), false);
        let (mut i, mut j) = (0, 0);
        let mut supply = mu.weight(0).clone();
        let mut demand = nu.weight(0).clone();
        loop {
            let q = if supply < demand { supply.clone() } else { demand.clone() };
            flow[[i, j]] = q.clone();
            basic[[i, j]] = true;
            supply -= &q;
            demand -= &q;
            if i == n - 1 && j == m - 1 {
                break;
            }
            // On ties advance the row; the next cell in this column is a
            // degenerate basic zero, which keeps exactly n + m - 1 cells.
            if (supply.is_zero() && i < n - 1) || j == m - 1 {
                i += 1;
                supply = mu.weight(i).clone();
            } else {
                j += 1;
                demand = nu.weight(j).clone();
            }
        }
        Self { flow, basic }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let (n, m) = self.flow.dim();
        let mut adj = vec![Vec::new(); n + m];
        for ((i, j), b) in self.basic.indexed_iter() {
            if *b {
                adj[i].push(n + j);
                adj[n + j].push(i);
            }
        }
        adj
    }

    /// Solves `u[i] + v[j] = c[i, j]` on basic cells with `u[0] = 0`.
    fn potentials(&self, c: &CostMatrix) -> (Vec<Scalar>, Vec<Scalar>) {
        let (n, m) = self.flow.dim();
        let adj = self.adjacency();
        let mut value: Vec<Option<Scalar>> = vec![None; n + m];
        value[0] = Some(Scalar::zero());
        let mut queue = VecDeque::from([0]);
        while let Some(node) = queue.pop_front() {
            let known = value[node].clone().expect("visited node has a potential");
            for &next in &adj[node] {
                if value[next].is_some() {
                    continue;
                }
                let (i, j) = if node < n { (node, next - n) } else { (next, node - n) };
                value[next] = Some(c.get(i, j) - &known);
                queue.push_back(next);
            }
        }
        let mut value = value.into_iter().map(|v| v.expect("basis spans all rows and columns"));
        let u = value.by_ref().take(n).collect();
        let v = value.collect();
        (u, v)
    }

    /// Path of basic cells from row `row` to column `col` in the basis tree.
    fn tree_path(&self, row: usize, col: usize) -> Vec<(usize, usize)> {
        let (n, m) = self.flow.dim();
        let adj = self.adjacency();
        let mut parent = vec![usize::MAX; n + m];
        parent[row] = row;
        let mut queue = VecDeque::from([row]);
        while let Some(node) = queue.pop_front() {
            if node == n + col {
                break;
            }
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = n + col;
        while node != row {
            let prev = parent[node];
            path.push(if prev < n { (prev, node - n) } else { (node, prev - n) });
            node = prev;
        }
        path.reverse();
        path
    }

    fn pivot(&mut self, entering: (usize, usize)) {
        // Cycle: entering cell (+), then the tree path from its row to its
        // column, alternating -, +, -, ... and ending with a (-) cell.
        let path = self.tree_path(entering.0, entering.1);
        let losing: Vec<(usize, usize)> = path.iter().step_by(2).copied().collect();
        let theta = losing
            .iter()
            .map(|&(i, j)| &self.flow[[i, j]])
            .min()
            .expect("cycle has a decreasing cell")
            .clone();
        let leaving = losing
            .iter()
            .copied()
            .filter(|&(i, j)| self.flow[[i, j]] == theta)
            .min()
            .expect("minimum is attained");
        self.flow[entering] += &theta;
        for (k, &(i, j)) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.flow[[i, j]] -= &theta;
            } else {
                self.flow[[i, j]] += &theta;
            }
        }
        self.basic[entering] = true;
        self.basic[leaving] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::is_complementary;
    use crate::scalar::{int, ratio};

    fn one_by_one() -> (DiscreteMeasure, DiscreteMeasure, CostMatrix) {
        let mu = DiscreteMeasure::parse(&["1"]).unwrap();
        let nu = DiscreteMeasure::parse(&["1"]).unwrap();
        let c = CostMatrix::from_rows(vec![vec![int(7)]]).unwrap();
        (mu, nu, c)
    }

    #[test]
    fn single_atom_problem() {
        let (mu, nu, c) = one_by_one();
        let sol = solve(&mu, &nu, &c).unwrap();
        assert_eq!(sol.plan.get(0, 0), &int(1));
        assert_eq!(sol.cost, int(7));
        let dual = solve_dual(&mu, &nu, &c, 0).unwrap();
        assert_eq!(dual.phi, vec![int(0)]);
        assert_eq!(dual.psi, vec![int(7)]);
    }

    #[test]
    fn northwest_corner_has_spanning_basis_on_ties() {
        let mu = DiscreteMeasure::parse(&["1/2", "1/2"]).unwrap();
        let nu = DiscreteMeasure::parse(&["1/2", "1/2"]).unwrap();
        let t = Tableau::northwest_corner(&mu, &nu);
        assert_eq!(t.basic.iter().filter(|b| **b).count(), 3);
        assert_eq!(t.flow[[1, 0]], int(0));
    }

    #[test]
    fn anti_diagonal_optimum() {
        let mu = DiscreteMeasure::parse(&["1/2", "1/2"]).unwrap();
        let nu = DiscreteMeasure::parse(&["1/2", "1/2"]).unwrap();
        let c = CostMatrix::from_rows(vec![vec![int(1), int(0)], vec![int(0), int(1)]]).unwrap();
        let sol = solve(&mu, &nu, &c).unwrap();
        assert_eq!(sol.cost, int(0));
        assert_eq!(sol.plan.get(0, 1), &ratio(1, 2));
        assert!(sol.dual.is_feasible(&c));
        assert!(is_complementary(&sol.plan, &sol.dual, &c).unwrap());
        assert_eq!(sol.dual.value(&mu, &nu), sol.cost);
    }

    #[test]
    fn unknown_anchor_is_rejected() {
        let (mu, nu, c) = one_by_one();
        assert!(matches!(solve_dual(&mu, &nu, &c, 1), Err(OtError::UnknownAtom { .. })));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (mu, _, c) = one_by_one();
        let nu = DiscreteMeasure::parse(&["1/2", "1/2"]).unwrap();
        assert!(matches!(solve(&mu, &nu, &c), Err(OtError::DimensionMismatch { .. })));
    }
}
