//! The set of all dual optimizers, parameterized by per-component base duals
//! and interval constraints on component offsets.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::Rng;

use crate::error::{OtError, Result};
use crate::graph::{
    base_duals, connected_components, min_cross_slack, support_graph, Component, ComponentPartition,
    SupportGraph, UnionFind,
};
use crate::measure::{CostMatrix, DiscreteMeasure, DualPair, TransportPlan};
use crate::scalar::Scalar;

/// Upper bounds `alpha_n - alpha_m <= upper[n][m]` between component offsets.
#[derive(Debug, Clone)]
pub(crate) struct OffsetBounds {
    upper: Vec<Vec<Scalar>>,
}

impl OffsetBounds {
    pub(crate) fn from_components(c: &CostMatrix, partition: &ComponentPartition, duals: &[DualPair]) -> Self {
        let n = partition.len();
        let upper = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| if a == b { Scalar::zero() } else { min_cross_slack(c, partition, duals, a, b) })
                    .collect()
            })
            .collect();
        Self { upper }
    }

    /// Tightest implied bounds: `closure[n][m]` is the largest feasible
    /// value of `alpha_n - alpha_m`. `None` when the system is infeasible.
    pub(crate) fn closure(&self) -> Option<Vec<Vec<Scalar>>> {
        let mut d = self.upper.clone();
        let n = d.len();
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let via = &d[a][k] + &d[k][b];
                    if via < d[a][b] {
                        d[a][b] = via;
                    }
                }
            }
        }
        (0..n).all(|a| !d[a][a].is_negative()).then_some(d)
    }
}

/// Interval `lower <= alpha_n - alpha_m <= upper` for components `n < m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaConstraint {
    pub n: usize,
    pub m: usize,
    pub lower: Scalar,
    pub upper: Scalar,
}

impl AlphaConstraint {
    pub fn contains(&self, difference: &Scalar) -> bool {
        &self.lower <= difference && difference <= &self.upper
    }

    pub fn contains_strictly(&self, difference: &Scalar) -> bool {
        &self.lower < difference && difference < &self.upper
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    pub fn midpoint(&self) -> Scalar {
        (&self.lower + &self.upper) / Scalar::from_integer(BigInt::from(2))
    }
}

/// Every dual optimizer is `phi = phi_n + alpha_n + s`, `psi = psi_n - alpha_n - s`
/// on component `n`, where `alpha_0 = 0`, the offsets satisfy all
/// constraints, and `s` is a free global translation.
///
/// Component 0 always contains the anchor atom `x0`, and its base dual
/// vanishes there. Other components are anchored at their smallest `X` atom.
#[derive(Debug, Clone)]
pub struct DualPolytope {
    partition: ComponentPartition,
    base_duals: Vec<DualPair>,
    constraints: Vec<AlphaConstraint>,
    closure: Vec<Vec<Scalar>>,
    n_x: usize,
    n_y: usize,
    x0: usize,
}

/// Builds the full dual solution set from one primal optimizer.
pub fn characterize_duals(
    gamma: &TransportPlan,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c: &CostMatrix,
    x0: usize,
) -> Result<DualPolytope> {
    c.check_shape(mu, nu)?;
    if (gamma.rows(), gamma.cols()) != (c.rows(), c.cols()) {
        return Err(OtError::DimensionMismatch {
            context: "plan vs cost",
            expected: c.rows() * c.cols(),
            found: gamma.rows() * gamma.cols(),
        });
    }
    if x0 >= mu.len() {
        return Err(OtError::UnknownAtom { index: x0, len: mu.len() });
    }
    let g = support_graph(gamma);
    let partition = connected_components(&g).with_first_containing(x0);
    let anchors: Vec<usize> =
        partition.iter().enumerate().map(|(k, comp)| if k == 0 { x0 } else { comp.xs[0] }).collect();
    let duals = base_duals(c, &partition, &g, &anchors)?;
    let bounds = OffsetBounds::from_components(c, &partition, &duals);
    let closure = bounds
        .closure()
        .ok_or_else(|| OtError::NonOptimal("no offsets make the component duals feasible".into()))?;
    let n = partition.len();
    let constraints = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .map(|(a, b)| AlphaConstraint { n: a, m: b, lower: -&bounds.upper[b][a], upper: bounds.upper[a][b].clone() })
        .collect();
    Ok(DualPolytope { partition, base_duals: duals, constraints, closure, n_x: c.rows(), n_y: c.cols(), x0 })
}

impl DualPolytope {
    pub fn partition(&self) -> &ComponentPartition {
        &self.partition
    }

    pub fn base_duals(&self) -> &[DualPair] {
        &self.base_duals
    }

    pub fn constraints(&self) -> &[AlphaConstraint] {
        &self.constraints
    }

    pub fn constraint(&self, n: usize, m: usize) -> Option<&AlphaConstraint> {
        self.constraints.iter().find(|k| k.n == n && k.m == m)
    }

    pub fn num_components(&self) -> usize {
        self.partition.len()
    }

    pub fn anchor(&self) -> usize {
        self.x0
    }

    /// Largest feasible value of `alpha_n - alpha_m` over the whole polytope.
    pub fn max_difference(&self, n: usize, m: usize) -> &Scalar {
        &self.closure[n][m]
    }

    /// `alpha_n - alpha_m` takes the same value at every feasible point.
    pub fn is_forced(&self, n: usize, m: usize) -> bool {
        (&self.closure[n][m] + &self.closure[m][n]).is_zero()
    }

    /// Components of the union graph: classes of components whose offsets
    /// are rigidly tied to each other.
    pub fn merged_partition(&self) -> ComponentPartition {
        let n = self.num_components();
        let mut uf = UnionFind::new(n);
        for a in 0..n {
            for b in a + 1..n {
                if self.is_forced(a, b) {
                    uf.union(a, b);
                }
            }
        }
        let mut groups: Vec<(usize, Component)> = Vec::new();
        for (k, comp) in self.partition.iter().enumerate() {
            let root = uf.find(k);
            match groups.iter_mut().find(|(r, _)| *r == root) {
                Some((_, merged)) => {
                    merged.xs.extend(&comp.xs);
                    merged.ys.extend(&comp.ys);
                }
                None => groups.push((root, comp.clone())),
            }
        }
        let mut components: Vec<Component> = groups
            .into_iter()
            .map(|(_, mut comp)| {
                comp.xs.sort_unstable();
                comp.ys.sort_unstable();
                comp
            })
            .collect();
        components.sort_by_key(|comp| comp.xs[0]);
        ComponentPartition { components }
    }

    /// A feasible offset vector: every offset at its largest value relative
    /// to component 0.
    pub fn reference_alpha(&self) -> Vec<Scalar> {
        (0..self.num_components()).map(|k| self.closure[k][0].clone()).collect()
    }

    /// True iff the dual optimizer is unique up to translation.
    pub fn is_dual_unique(&self) -> bool {
        let n = self.num_components();
        (1..n).all(|m| self.is_forced(0, m))
    }

    fn difference(alpha: &[Scalar], n: usize, m: usize) -> Scalar {
        &alpha[n] - &alpha[m]
    }

    fn check_len(&self, alpha: &[Scalar]) -> Result<()> {
        if alpha.len() != self.num_components() {
            return Err(OtError::DimensionMismatch {
                context: "alpha vs components",
                expected: self.num_components(),
                found: alpha.len(),
            });
        }
        Ok(())
    }

    /// First constraint violated by `alpha`, if any.
    pub fn first_violation(&self, alpha: &[Scalar]) -> Option<(usize, usize)> {
        self.constraints
            .iter()
            .find(|k| !k.contains(&Self::difference(alpha, k.n, k.m)))
            .map(|k| (k.n, k.m))
    }

    pub fn contains(&self, alpha: &[Scalar]) -> bool {
        alpha.len() == self.num_components() && self.first_violation(alpha).is_none()
    }

    /// True iff every constraint holds strictly at `alpha`.
    pub fn strict_interior_test(&self, alpha: &[Scalar]) -> bool {
        alpha.len() == self.num_components()
            && self.constraints.iter().all(|k| k.contains_strictly(&Self::difference(alpha, k.n, k.m)))
    }

    /// The dual optimizer with offsets `alpha_n - alpha_0`, normalized so
    /// that `phi(x0) = 0`.
    pub fn assemble_dual(&self, alpha: &[Scalar]) -> Result<DualPair> {
        self.assemble_dual_shifted(alpha, &Scalar::zero())
    }

    /// Like [`DualPolytope::assemble_dual`], then translated by `shift`.
    pub fn assemble_dual_shifted(&self, alpha: &[Scalar], shift: &Scalar) -> Result<DualPair> {
        self.check_len(alpha)?;
        if let Some((n, m)) = self.first_violation(alpha) {
            return Err(OtError::AlphaViolation { n, m });
        }
        let mut phi = vec![Scalar::zero(); self.n_x];
        let mut psi = vec![Scalar::zero(); self.n_y];
        for (k, (comp, base)) in self.partition.iter().zip(&self.base_duals).enumerate() {
            let offset = &alpha[k] - &alpha[0] + shift;
            for (a, &x) in comp.xs.iter().enumerate() {
                phi[x] = &base.phi[a] + &offset;
            }
            for (b, &y) in comp.ys.iter().enumerate() {
                psi[y] = &base.psi[b] - &offset;
            }
        }
        Ok(DualPair::from_parts(phi, psi))
    }

    /// Offsets of a dual optimizer relative to the base duals, with
    /// `alpha_0 = 0`. Fails if `dual` is not of the parameterized form.
    pub fn recover_alpha(&self, dual: &DualPair) -> Result<Vec<Scalar>> {
        if dual.phi.len() != self.n_x || dual.psi.len() != self.n_y {
            return Err(OtError::DimensionMismatch {
                context: "dual vs problem",
                expected: self.n_x + self.n_y,
                found: dual.phi.len() + dual.psi.len(),
            });
        }
        let shift = dual.phi[self.x0].clone();
        let alpha: Vec<Scalar> = self
            .partition
            .iter()
            .zip(&self.base_duals)
            .map(|(comp, base)| &dual.phi[comp.xs[0]] - &base.phi[0] - &shift)
            .collect();
        let rebuilt = self.assemble_dual_shifted(&alpha, &shift).map_err(|_| {
            OtError::NonOptimal("dual offsets violate the component constraints".into())
        })?;
        if &rebuilt != dual {
            return Err(OtError::NonOptimal("dual is not a translate of the component base duals".into()));
        }
        Ok(alpha)
    }

    /// A random feasible offset vector with exact rational entries.
    ///
    /// Offsets are drawn one component at a time from the interval left open
    /// by the already chosen ones; because the bounds are closed under
    /// shortest paths that interval is never empty. Endpoints are hit with
    /// positive probability.
    pub fn sample_alpha<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Scalar> {
        const GRID: i64 = 64;
        let n = self.num_components();
        let mut alpha: Vec<Scalar> = Vec::with_capacity(n);
        alpha.push(Scalar::zero());
        for k in 1..n {
            let lo = (0..k).map(|j| &alpha[j] - &self.closure[j][k]).max().expect("k >= 1");
            let hi = (0..k).map(|j| &alpha[j] + &self.closure[k][j]).min().expect("k >= 1");
            debug_assert!(lo <= hi);
            let step = Scalar::new(BigInt::from(rng.gen_range(0..=GRID)), BigInt::from(GRID));
            alpha.push(&lo + (&hi - &lo) * step);
        }
        alpha
    }

    /// Vertices of the offset polytope (with `alpha_0 = 0`).
    ///
    /// Each vertex makes `N - 1` constraints active along a spanning tree of
    /// components. The enumeration is exhaustive and intended for small `N`.
    pub fn vertices(&self) -> Vec<Vec<Scalar>> {
        let n = self.num_components();
        if n == 1 {
            return vec![vec![Scalar::zero()]];
        }
        // (n, m, value): alpha_n - alpha_m = value
        let sides: Vec<(usize, usize, Scalar)> = self
            .constraints
            .iter()
            .flat_map(|k| [(k.n, k.m, k.lower.clone()), (k.n, k.m, k.upper.clone())])
            .collect();
        let mut found = BTreeSet::new();
        let mut chosen = Vec::with_capacity(n - 1);
        self.collect_vertices(&sides, 0, &mut chosen, &mut found);
        found.into_iter().collect()
    }

    fn collect_vertices(
        &self,
        sides: &[(usize, usize, Scalar)],
        start: usize,
        chosen: &mut Vec<usize>,
        found: &mut BTreeSet<Vec<Scalar>>,
    ) {
        let n = self.num_components();
        if chosen.len() == n - 1 {
            if let Some(alpha) = solve_tree(n, chosen.iter().map(|&i| &sides[i])) {
                if self.contains(&alpha) {
                    found.insert(alpha);
                }
            }
            return;
        }
        for i in start..sides.len() {
            chosen.push(i);
            self.collect_vertices(sides, i + 1, chosen, found);
            chosen.pop();
        }
    }
}

/// Solves `alpha_n - alpha_m = value` along a spanning tree with `alpha_0 = 0`.
fn solve_tree<'a>(n: usize, edges: impl Iterator<Item = &'a (usize, usize, Scalar)>) -> Option<Vec<Scalar>> {
    let edges: Vec<_> = edges.collect();
    let mut uf = UnionFind::new(n);
    if !edges.iter().all(|(a, b, _)| uf.union(*a, *b)) {
        return None;
    }
    let mut alpha: Vec<Option<Scalar>> = vec![None; n];
    alpha[0] = Some(Scalar::zero());
    let mut progress = true;
    while progress {
        progress = false;
        for (a, b, value) in &edges {
            match (&alpha[*a], &alpha[*b]) {
                (Some(va), None) => {
                    alpha[*b] = Some(va - value);
                    progress = true;
                }
                (None, Some(vb)) => {
                    alpha[*a] = Some(vb + value);
                    progress = true;
                }
                _ => {}
            }
        }
    }
    alpha.into_iter().collect()
}

/// True iff `candidate` is feasible and tight on every edge of the union graph.
pub fn is_dual_optimizer(candidate: &DualPair, c: &CostMatrix, union_g: &SupportGraph) -> bool {
    candidate.phi.len() == c.rows()
        && candidate.psi.len() == c.cols()
        && candidate.is_feasible(c)
        && union_g.edges().iter().all(|&(x, y)| &candidate.phi[x] + &candidate.psi[y] == *c.get(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};
    use crate::simplex::solve;
    use rand::SeedableRng;

    fn example_3_2() -> (DiscreteMeasure, DiscreteMeasure, CostMatrix, TransportPlan) {
        let mu = DiscreteMeasure::new(vec![ratio(3, 20), ratio(3, 20), ratio(1, 5), ratio(1, 2)]).unwrap();
        let nu =
            DiscreteMeasure::new(vec![ratio(1, 5), ratio(1, 10), ratio(1, 5), ratio(1, 4), ratio(1, 4)]).unwrap();
        let c = CostMatrix::from_fn(4, 5, |(i, j)| match (i + 1, j + 1) {
            (2, 1) | (3, 3) | (3, 4) => int(0),
            (1, 1) | (2, 2) | (4, 3) | (4, 4) | (4, 5) => int(1),
            (1, 2) => int(3),
            _ => int(2),
        })
        .unwrap();
        let gamma = TransportPlan::from_cells(
            &[
                ((0, 0), ratio(3, 20)),
                ((1, 0), ratio(1, 20)),
                ((1, 1), ratio(1, 10)),
                ((2, 2), ratio(1, 5)),
                ((3, 3), ratio(1, 4)),
                ((3, 4), ratio(1, 4)),
            ],
            &mu,
            &nu,
        )
        .unwrap();
        (mu, nu, c, gamma)
    }

    #[test]
    fn intervals_of_three_component_example() {
        let (mu, nu, c, gamma) = example_3_2();
        let p = characterize_duals(&gamma, &mu, &nu, &c, 0).unwrap();
        assert_eq!(p.num_components(), 3);
        let k = p.constraints();
        assert_eq!((k[0].lower.clone(), k[0].upper.clone()), (int(0), int(2)));
        assert_eq!((k[1].lower.clone(), k[1].upper.clone()), (int(0), int(1)));
        assert_eq!((k[2].lower.clone(), k[2].upper.clone()), (int(-1), int(-1)));
        assert!(!p.is_dual_unique());
        assert_eq!(p.merged_partition().len(), 2);
        let alpha = vec![int(0), int(-1), int(0)];
        assert!(!p.strict_interior_test(&alpha));
        let dual = p.assemble_dual(&alpha).unwrap();
        assert!(crate::duality::is_complementary(&gamma, &dual, &c).unwrap());
        assert_eq!(p.recover_alpha(&dual).unwrap(), alpha);
        assert!(matches!(p.assemble_dual(&[int(0), int(-3), int(0)]), Err(OtError::AlphaViolation { n: 0, m: 1 })));
    }

    #[test]
    fn sampled_offsets_are_feasible() {
        let (mu, nu, c, gamma) = example_3_2();
        let p = characterize_duals(&gamma, &mu, &nu, &c, 0).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let alpha = p.sample_alpha(&mut rng);
            assert!(p.contains(&alpha));
        }
    }

    #[test]
    fn vertices_of_segment() {
        let (mu, nu, c, gamma) = example_3_2();
        let p = characterize_duals(&gamma, &mu, &nu, &c, 0).unwrap();
        // alpha_2 - alpha_3 = -1 pins the polytope to a segment in alpha_2.
        let v = p.vertices();
        assert_eq!(v, vec![vec![int(0), int(-2), int(-1)], vec![int(0), int(-1), int(0)]]);
    }

    #[test]
    fn single_cell_problem_is_unique() {
        let mu = DiscreteMeasure::uniform(1).unwrap();
        let c = CostMatrix::from_rows(vec![vec![int(5)]]).unwrap();
        let sol = solve(&mu, &mu, &c).unwrap();
        let p = characterize_duals(&sol.plan, &mu, &mu, &c, 0).unwrap();
        assert!(p.is_dual_unique());
        assert!(p.strict_interior_test(&[int(0)]));
        assert_eq!(p.assemble_dual(&[int(0)]).unwrap(), DualPair::from_parts(vec![int(0)], vec![int(5)]));
    }
}
