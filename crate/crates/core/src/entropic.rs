//! Entropically regularized transport and the centroid dual optimizer.
//!
//! The regularized problem is `min <c, gamma> + eps * H(gamma)` with
//! `H(gamma) = sum gamma (ln gamma - 1)`. Its optimizer has the Gibbs form
//! `gamma = exp((phi + psi - c) / eps)`.

use std::collections::VecDeque;

use ndarray::Array2;
use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{OtError, Result};
use crate::graph::{
    base_duals, connected_components, min_cross_slack, union_graph, ComponentPartition, UnionFind,
};
use crate::measure::{CostMatrix, DiscreteMeasure, DualPair, TransportPlan};
use crate::polytope::characterize_duals;
use crate::scalar::Scalar;

/// `sum gamma (ln gamma - 1)`, with `0 ln 0 = 0`.
pub fn entropy(gamma: &Array2<f64>) -> f64 {
    gamma.iter().filter(|&&g| g > 0.0).map(|&g| g * (g.ln() - 1.0)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Atom of the first measure where `phi` is pinned to zero.
    pub anchor: usize,
}

impl SinkhornConfig {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, tol: 1e-9, max_iter: 100_000, anchor: 0 }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_anchor(mut self, anchor: usize) -> Self {
        self.anchor = anchor;
        self
    }

    fn validate(&self, n_x: usize) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(OtError::NumericalRange(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(OtError::NumericalRange(format!("tol must be positive, got {}", self.tol)));
        }
        if self.anchor >= n_x {
            return Err(OtError::UnknownAtom { index: self.anchor, len: n_x });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropicSolution {
    pub plan: Array2<f64>,
    /// `(phi + psi - c) / eps`; finite even where `plan` underflows to zero.
    pub log_plan: Array2<f64>,
    pub phi_eps: Vec<f64>,
    pub psi_eps: Vec<f64>,
    pub epsilon: f64,
    pub iterations: usize,
    /// Max-norm violation of both marginals.
    pub residual: f64,
    pub converged: bool,
}

impl EntropicSolution {
    pub fn transport_cost(&self, c: &Array2<f64>) -> f64 {
        (&self.plan * c).sum()
    }

    /// Regularized optimal value `<phi, mu> + <psi, nu> - eps`.
    pub fn value(&self, mu: &[f64], nu: &[f64]) -> f64 {
        dot(&self.phi_eps, mu) + dot(&self.psi_eps, nu) - self.epsilon
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.plan.sum_axis(ndarray::Axis(0)).to_vec()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + values.iter().map(|v| (v - hi).exp()).sum::<f64>().ln()
}

/// Marginal mass `mu(S_x) - nu(S_y)` of a vertex set; must return exactly
/// zero for balanced sets.
type Balance<'a> = dyn Fn(&[usize], &[usize]) -> f64 + 'a;

struct Scaling<'a> {
    mu: &'a [f64],
    nu: &'a [f64],
    c: &'a Array2<f64>,
    eps: f64,
    balance: &'a Balance<'a>,
}

impl Scaling<'_> {
    fn log_entry(&self, phi: &[f64], psi: &[f64], x: usize, y: usize) -> f64 {
        (phi[x] + psi[y] - self.c[(x, y)]) / self.eps
    }

    fn update_rows(&self, phi: &mut [f64], psi: &[f64]) {
        for (x, p) in phi.iter_mut().enumerate() {
            let lse = log_sum_exp((0..psi.len()).map(|y| (psi[y] - self.c[(x, y)]) / self.eps));
            *p = self.eps * (self.mu[x].ln() - lse);
        }
    }

    fn update_cols(&self, phi: &[f64], psi: &mut [f64]) {
        for (y, q) in psi.iter_mut().enumerate() {
            let lse = log_sum_exp((0..phi.len()).map(|x| (phi[x] - self.c[(x, y)]) / self.eps));
            *q = self.eps * (self.nu[y].ln() - lse);
        }
    }

    /// Exact maximization of the dual along the direction that raises `phi`
    /// on `xs` and lowers `psi` on `ys` by the same amount. Returns the shift.
    fn shift_block(&self, phi: &mut [f64], psi: &mut [f64], in_x: &[bool], in_y: &[bool], xs: &[usize], ys: &[usize]) -> f64 {
        let (n, m) = (phi.len(), psi.len());
        let log_out = log_sum_exp(
            xs.iter().flat_map(|&x| (0..m).filter(|&y| !in_y[y]).map(move |y| (x, y))).map(|(x, y)| self.log_entry(phi, psi, x, y)),
        );
        let log_in = log_sum_exp(
            ys.iter().flat_map(|&y| (0..n).filter(|&x| !in_x[x]).map(move |x| (x, y))).map(|(x, y)| self.log_entry(phi, psi, x, y)),
        );
        let b = (self.balance)(xs, ys);
        // Stationarity: b = A t - B / t with t = exp(shift / eps).
        let log_t = if b == 0.0 {
            if log_out == f64::NEG_INFINITY || log_in == f64::NEG_INFINITY {
                return 0.0;
            }
            0.5 * (log_in - log_out)
        } else {
            let log_b = b.abs().ln();
            let log_root = 0.5 * log_add_exp(2.0 * log_b, 4f64.ln() + log_out + log_in);
            if b > 0.0 {
                log_add_exp(log_b, log_root) - 2f64.ln() - log_out
            } else {
                2f64.ln() + log_in - log_add_exp(log_b, log_root)
            }
        };
        let shift = self.eps * log_t;
        if !shift.is_finite() {
            return 0.0;
        }
        for &x in xs {
            phi[x] += shift;
        }
        for &y in ys {
            psi[y] -= shift;
        }
        shift
    }

    /// Block-coordinate sweep over the merge hierarchy of the current plan.
    ///
    /// Cells are visited from heaviest to lightest; whenever a cell joins two
    /// vertex clusters, the smaller cluster is shifted to balance its mass
    /// exchange with everything else. Weakly linked clusters therefore settle
    /// their relative offsets in one pass, even when the linking mass is far
    /// below floating-point resolution of the marginals. Returns the largest
    /// shift applied to a cluster with more than one vertex.
    fn balance_sweep(&self, phi: &mut [f64], psi: &mut [f64]) -> f64 {
        let (n, m) = (phi.len(), psi.len());
        let mut cells: Vec<(f64, usize, usize)> =
            (0..n).flat_map(|x| (0..m).map(move |y| (x, y))).map(|(x, y)| (self.log_entry(phi, psi, x, y), x, y)).collect();
        cells.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut uf = UnionFind::new(n + m);
        let mut members: Vec<(Vec<usize>, Vec<usize>)> =
            (0..n + m).map(|v| if v < n { (vec![v], vec![]) } else { (vec![], vec![v - n]) }).collect();
        let mut in_x = vec![false; n];
        let mut in_y = vec![false; m];
        let mut largest: f64 = 0.0;
        for (_, x, y) in cells {
            let (ra, rb) = (uf.find(x), uf.find(n + y));
            if ra == rb {
                continue;
            }
            let size = |r: usize| members[r].0.len() + members[r].1.len();
            let small = if size(ra) <= size(rb) { ra } else { rb };
            let (xs, ys) = std::mem::take(&mut members[small]);
            xs.iter().for_each(|&i| in_x[i] = true);
            ys.iter().for_each(|&j| in_y[j] = true);
            let shift = self.shift_block(phi, psi, &in_x, &in_y, &xs, &ys);
            xs.iter().for_each(|&i| in_x[i] = false);
            ys.iter().for_each(|&j| in_y[j] = false);
            if xs.len() + ys.len() > 1 {
                largest = largest.max(shift.abs());
            }
            members[small] = (xs, ys);
            uf.union(ra, rb);
            let root = uf.find(ra);
            let other = if root == ra { rb } else { ra };
            let (xs, ys) = std::mem::take(&mut members[other]);
            members[root].0.extend(xs);
            members[root].1.extend(ys);
        }
        largest
    }

    fn residual(&self, log_plan: &Array2<f64>) -> f64 {
        let plan = log_plan.mapv(f64::exp);
        let rows = plan.sum_axis(ndarray::Axis(1));
        let cols = plan.sum_axis(ndarray::Axis(0));
        let r = rows.iter().zip(self.mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        cols.iter().zip(self.nu).map(|(a, b)| (a - b).abs()).fold(r, f64::max)
    }

    fn log_plan(&self, phi: &[f64], psi: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn(self.c.dim(), |(x, y)| self.log_entry(phi, psi, x, y))
    }

    fn run(&self, config: &SinkhornConfig, warm: Option<(&[f64], &[f64])>) -> Result<EntropicSolution> {
        let (n, m) = self.c.dim();
        let (mut phi, mut psi) = match warm {
            Some((p, q)) if p.len() == n && q.len() == m && p.iter().chain(q).all(|v| v.is_finite()) => {
                (p.to_vec(), q.to_vec())
            }
            _ => (vec![0.0; n], vec![0.0; m]),
        };
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        let mut converged = false;
        while iterations < config.max_iter.max(1) {
            iterations += 1;
            self.update_rows(&mut phi, &psi);
            self.update_cols(&phi, &mut psi);
            let shift = self.balance_sweep(&mut phi, &mut psi);
            if phi.iter().chain(&psi).any(|v| !v.is_finite()) {
                return Err(OtError::NumericalRange(format!(
                    "potentials left the floating-point range at epsilon = {}",
                    self.eps
                )));
            }
            residual = self.residual(&self.log_plan(&phi, &psi));
            if residual <= config.tol && shift <= config.tol {
                converged = true;
                break;
            }
        }
        let pin = phi[config.anchor];
        phi.iter_mut().for_each(|p| *p -= pin);
        psi.iter_mut().for_each(|q| *q += pin);
        let log_plan = self.log_plan(&phi, &psi);
        let solution = EntropicSolution {
            plan: log_plan.mapv(f64::exp),
            log_plan,
            phi_eps: phi,
            psi_eps: psi,
            epsilon: self.eps,
            iterations,
            residual,
            converged,
        };
        if converged {
            Ok(solution)
        } else {
            Err(OtError::SinkhornNotConverged(Box::new(solution)))
        }
    }
}

/// Entropic optimizer for exact rational data.
///
/// Subsets of atoms with exactly equal mass on both sides are recognized
/// exactly, which keeps the offsets between weakly coupled blocks accurate at
/// small `epsilon`.
pub fn sinkhorn(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c: &CostMatrix,
    config: &SinkhornConfig,
) -> Result<EntropicSolution> {
    c.check_shape(mu, nu)?;
    config.validate(mu.len())?;
    let balance = |xs: &[usize], ys: &[usize]| crate::scalar::to_f64(&(mu.mass_of(xs) - nu.mass_of(ys)));
    let (mu_f, nu_f, c_f) = (mu.to_f64(), nu.to_f64(), c.to_f64());
    Scaling { mu: &mu_f, nu: &nu_f, c: &c_f, eps: config.epsilon, balance: &balance }.run(config, None)
}

/// Entropic optimizer for floating-point data, optionally warm-started from
/// previous potentials.
///
/// Block masses within a few ulps of zero are treated as balanced.
pub fn sinkhorn_f64(
    mu: &[f64],
    nu: &[f64],
    c: &Array2<f64>,
    config: &SinkhornConfig,
    warm: Option<(&[f64], &[f64])>,
) -> Result<EntropicSolution> {
    let (n, m) = c.dim();
    if mu.len() != n || nu.len() != m {
        return Err(OtError::DimensionMismatch { context: "marginals vs cost", expected: n + m, found: mu.len() + nu.len() });
    }
    config.validate(n)?;
    for (name, w) in [("mu", mu), ("nu", nu)] {
        if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(OtError::BoundaryMeasure(format!("{name} has a non-positive entry")));
        }
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(OtError::InvalidCost("cost has a non-finite entry".into()));
    }
    let balance = |xs: &[usize], ys: &[usize]| {
        let a: f64 = xs.iter().map(|&i| mu[i]).sum();
        let b: f64 = ys.iter().map(|&j| nu[j]).sum();
        if (a - b).abs() <= 8.0 * f64::EPSILON * (a + b) {
            0.0
        } else {
            a - b
        }
    };
    Scaling { mu, nu, c, eps: config.epsilon, balance: &balance }.run(config, warm)
}

/// Spanning tree over components recording how the centroid offsets were
/// fixed: each edge carries the slack level at which its offset difference
/// became rigid and the value of that difference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentroidTree {
    pub num_vertices: usize,
    /// Tree edges `(n, m)` with `n < m`, in the order they were fixed.
    pub edges: Vec<(usize, usize)>,
    /// Max-min slack level at which each edge was fixed.
    pub levels: Vec<Scalar>,
    /// `alpha_n - alpha_m` on each edge.
    pub differences: Vec<Scalar>,
    /// Symmetric; `deltas[n][m] = (U[n][m] + U[m][n]) / 2`.
    pub deltas: Vec<Vec<Scalar>>,
    /// Antisymmetric; `l_values[n][m] = (U[n][m] - U[m][n]) / 2`.
    pub l_values: Vec<Vec<Scalar>>,
}

impl CentroidTree {
    pub fn is_spanning_tree(&self) -> bool {
        let mut uf = UnionFind::new(self.num_vertices);
        self.edges.len() + 1 == self.num_vertices.max(1) && self.edges.iter().all(|&(a, b)| uf.union(a, b))
    }

    /// Offsets with `alpha_0 = 0` and the recorded difference on every edge.
    pub fn offsets(&self) -> Vec<Scalar> {
        let n = self.num_vertices;
        let mut alpha: Vec<Option<Scalar>> = vec![None; n];
        if n == 0 {
            return Vec::new();
        }
        alpha[0] = Some(Scalar::zero());
        let mut queue = VecDeque::from([0]);
        while let Some(a) = queue.pop_front() {
            for (&(p, q), diff) in self.edges.iter().zip(&self.differences) {
                let (b, value) = match (p == a, q == a) {
                    (true, _) => (q, alpha[a].as_ref().expect("visited") - diff),
                    (_, true) => (p, alpha[a].as_ref().expect("visited") + diff),
                    _ => continue,
                };
                if alpha[b].is_none() {
                    alpha[b] = Some(value);
                    queue.push_back(b);
                }
            }
        }
        alpha.into_iter().map(|v| v.expect("tree spans every component")).collect()
    }
}

/// Difference constraints `alpha_a - alpha_b <= weight - t * [free]` between
/// component offsets. Fixed pairs carry both directions with no `t` term.
struct OffsetSystem {
    upper: Vec<Vec<Scalar>>,
    fixed: Vec<Vec<Option<Scalar>>>,
}

impl OffsetSystem {
    fn len(&self) -> usize {
        self.upper.len()
    }

    fn weight(&self, a: usize, b: usize, t: &Scalar) -> (Scalar, bool) {
        match &self.fixed[a][b] {
            Some(v) => (v.clone(), false),
            None => (&self.upper[a][b] - t, true),
        }
    }

    /// A cycle of negative total weight at level `t`, as a list of arcs.
    fn negative_cycle(&self, t: &Scalar) -> Option<Vec<(usize, usize)>> {
        let n = self.len();
        let mut dist = vec![Scalar::zero(); n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut last = None;
        for _ in 0..n {
            last = None;
            for a in 0..n {
                for b in (0..n).filter(|&b| b != a) {
                    let via = &dist[a] + self.weight(a, b, t).0;
                    if via < dist[b] {
                        dist[b] = via;
                        pred[b] = Some(a);
                        last = Some(b);
                    }
                }
            }
            last?;
        }
        let mut v = last?;
        for _ in 0..n {
            v = pred[v].expect("relaxed vertex has a predecessor");
        }
        let mut cycle = Vec::new();
        let mut u = v;
        loop {
            let p = pred[u].expect("on cycle");
            cycle.push((p, u));
            u = p;
            if u == v {
                break;
            }
        }
        Some(cycle)
    }

    /// Largest `t` keeping the system feasible, by Dinkelbach steps on the
    /// cycle ratio `sum weight / number of free arcs`.
    fn max_level(&self) -> Scalar {
        let two = Scalar::from_integer(BigInt::from(2));
        let n = self.len();
        let mut t = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.fixed[a][b].is_none())
            .map(|(a, b)| (&self.upper[a][b] + &self.upper[b][a]) / &two)
            .min()
            .expect("a free pair remains");
        while let Some(cycle) = self.negative_cycle(&t) {
            let zero = Scalar::zero();
            let (mut total, mut free) = (Scalar::zero(), 0i64);
            for &(a, b) in &cycle {
                let (w, is_free) = self.weight(a, b, &zero);
                total += w;
                free += i64::from(is_free);
            }
            t = total / Scalar::from_integer(BigInt::from(free));
        }
        t
    }

    fn closure(&self, t: &Scalar) -> Vec<Vec<Scalar>> {
        let n = self.len();
        let mut d: Vec<Vec<Scalar>> =
            (0..n).map(|a| (0..n).map(|b| if a == b { Scalar::zero() } else { self.weight(a, b, t).0 }).collect()).collect();
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
        d
    }
}

/// Tree of offset differences defining the centroid.
///
/// The entropic limit maximizes, level by level, the smallest slack of the
/// cells not yet tight: at each level the largest feasible common slack `t`
/// is found exactly, every pair whose difference is then rigid is fixed, and
/// the remaining pairs are raised again. Pairs are recorded in lexicographic
/// order within a level.
pub fn build_centroid_tree(partition: &ComponentPartition, duals: &[DualPair], c: &CostMatrix) -> CentroidTree {
    let n = partition.len();
    let two = Scalar::from_integer(BigInt::from(2));
    let upper: Vec<Vec<Scalar>> = (0..n)
        .map(|a| (0..n).map(|b| if a == b { Scalar::zero() } else { min_cross_slack(c, partition, duals, a, b) }).collect())
        .collect();
    let deltas: Vec<Vec<Scalar>> =
        (0..n).map(|a| (0..n).map(|b| (&upper[a][b] + &upper[b][a]) / &two).collect()).collect();
    let l_values: Vec<Vec<Scalar>> =
        (0..n).map(|a| (0..n).map(|b| (&upper[a][b] - &upper[b][a]) / &two).collect()).collect();

    let mut system = OffsetSystem { upper, fixed: vec![vec![None; n]; n] };
    let mut uf = UnionFind::new(n);
    let (mut edges, mut levels, mut differences) = (Vec::new(), Vec::new(), Vec::new());
    let mut level = Scalar::zero();
    loop {
        let d = system.closure(&level);
        let mut progress = false;
        for a in 0..n {
            for b in a + 1..n {
                if system.fixed[a][b].is_none() && (&d[a][b] + &d[b][a]).is_zero() {
                    system.fixed[a][b] = Some(d[a][b].clone());
                    system.fixed[b][a] = Some(d[b][a].clone());
                    progress = true;
                    if uf.union(a, b) {
                        edges.push((a, b));
                        levels.push(level.clone());
                        differences.push(d[a][b].clone());
                    }
                }
            }
        }
        if edges.len() + 1 >= n {
            break;
        }
        debug_assert!(progress || level.is_zero());
        level = system.max_level();
    }
    CentroidTree { num_vertices: n, edges, levels, differences, deltas, l_values }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidResult {
    pub dual: DualPair,
    /// Offsets per union-graph component, `alpha[0] = 0`.
    pub alpha: Vec<Scalar>,
    pub tree: CentroidTree,
    /// Union-graph components; the first contains the anchor.
    pub partition: ComponentPartition,
    pub base_duals: Vec<DualPair>,
}

/// The limit of the entropic dual optimizers as `epsilon -> 0`, normalized
/// so that `phi(x0) = 0`. Computed exactly over the components of the union
/// graph.
pub fn centroid(
    gamma: &TransportPlan,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c: &CostMatrix,
    x0: usize,
) -> Result<CentroidResult> {
    let polytope = characterize_duals(gamma, mu, nu, c, x0)?;
    let some_dual = polytope.assemble_dual(&polytope.reference_alpha())?;
    let g = union_graph(gamma, &some_dual, mu, nu, c)?;
    let partition = connected_components(&g).with_first_containing(x0);
    let anchors: Vec<usize> =
        partition.iter().enumerate().map(|(k, comp)| if k == 0 { x0 } else { comp.xs[0] }).collect();
    let duals = base_duals(c, &partition, &g, &anchors)?;
    let tree = build_centroid_tree(&partition, &duals, c);
    let alpha = tree.offsets();
    let mut phi = vec![Scalar::zero(); c.rows()];
    let mut psi = vec![Scalar::zero(); c.cols()];
    for ((comp, base), offset) in partition.iter().zip(&duals).zip(&alpha) {
        for (a, &x) in comp.xs.iter().enumerate() {
            phi[x] = &base.phi[a] + offset;
        }
        for (b, &y) in comp.ys.iter().enumerate() {
            psi[y] = &base.psi[b] - offset;
        }
    }
    let dual = DualPair::from_parts(phi, psi);
    if !crate::polytope::is_dual_optimizer(&dual, c, &g) {
        return Err(OtError::NonOptimal("centroid offsets do not give a dual optimizer".into()));
    }
    Ok(CentroidResult { dual, alpha, tree, partition, base_duals: duals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};

    #[test]
    fn entropy_of_simple_plans() {
        assert_eq!(entropy(&Array2::from_elem((1, 1), 1.0)), -1.0);
        let uniform = Array2::from_elem((2, 2), 0.25);
        assert!((entropy(&uniform) + 4f64.ln() + 1.0).abs() < 1e-15);
        let with_zero = ndarray::arr2(&[[0.5, 0.0], [0.0, 0.5]]);
        assert!((entropy(&with_zero) - (0.5f64.ln() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn one_point_problem() {
        let mu = DiscreteMeasure::uniform(1).unwrap();
        let c = CostMatrix::from_rows(vec![vec![int(3)]]).unwrap();
        let sol = sinkhorn(&mu, &mu, &c, &SinkhornConfig::new(0.1)).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!((sol.plan[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((sol.psi_eps[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_form_and_marginals() {
        let mu = DiscreteMeasure::new(vec![ratio(1, 3), ratio(2, 3)]).unwrap();
        let nu = DiscreteMeasure::new(vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)]).unwrap();
        let c = CostMatrix::from_rows(vec![vec![int(0), int(2), int(1)], vec![int(3), int(1), int(0)]]).unwrap();
        let cfg = SinkhornConfig::new(0.05);
        let sol = sinkhorn(&mu, &nu, &c, &cfg).unwrap();
        assert!(sol.residual <= cfg.tol);
        assert_eq!(sol.phi_eps[0], 0.0);
        let cf = c.to_f64();
        for ((x, y), &p) in sol.plan.indexed_iter() {
            let r = cfg.epsilon * p.ln() + cf[(x, y)] - sol.phi_eps[x] - sol.psi_eps[y];
            assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        let mu = DiscreteMeasure::uniform(2).unwrap();
        let c = CostMatrix::from_rows(vec![vec![int(0), int(1)], vec![int(1), int(0)]]).unwrap();
        assert!(sinkhorn(&mu, &mu, &c, &SinkhornConfig::new(0.0)).is_err());
        assert!(sinkhorn(&mu, &mu, &c, &SinkhornConfig::new(0.1).with_anchor(5)).is_err());
        assert!(matches!(
            sinkhorn_f64(&[0.5, 0.5], &[1.0, 0.0], &c.to_f64(), &SinkhornConfig::new(0.1), None),
            Err(OtError::BoundaryMeasure(_))
        ));
    }

    #[test]
    fn chained_constraints_share_the_slack() {
        // Pairwise midpoints would give alpha_0 - alpha_1 = -1 and
        // alpha_0 - alpha_2 = 3/2, breaking alpha_1 - alpha_2 <= 2.
        let w = vec![ratio(3, 7), ratio(1, 7), ratio(3, 7)];
        let mu = DiscreteMeasure::new(w).unwrap();
        let rows = [[0, 0, 3], [2, 0, 2], [0, 1, 0]];
        let c = CostMatrix::from_fn(3, 3, |(i, j)| int(rows[i][j])).unwrap();
        let gamma = TransportPlan::from_cells(
            &[((0, 0), ratio(3, 7)), ((1, 1), ratio(1, 7)), ((2, 2), ratio(3, 7))],
            &mu,
            &mu,
        )
        .unwrap();
        let res = centroid(&gamma, &mu, &mu, &c, 0).unwrap();
        assert_eq!(res.alpha, vec![int(0), ratio(2, 3), ratio(-2, 3)]);
        assert_eq!(res.tree.levels, vec![ratio(2, 3), ratio(2, 3)]);
        let sol = sinkhorn(&mu, &mu, &c, &SinkhornConfig::new(1e-3)).unwrap();
        let (phi, _) = res.dual.to_f64();
        let err = phi.iter().zip(&sol.phi_eps).map(|(a, b)| (a - (b - sol.phi_eps[0])).abs()).fold(0.0, f64::max);
        assert!(err < 1e-2, "distance {err}");
    }

    #[test]
    fn two_components_use_interval_midpoint() {
        // Identity plan on a 2x2 problem; the single offset interval is [-1, 3].
        let mu = DiscreteMeasure::uniform(2).unwrap();
        let c = CostMatrix::from_rows(vec![vec![int(0), int(3)], vec![int(1), int(0)]]).unwrap();
        let gamma = TransportPlan::from_rows(
            vec![vec![ratio(1, 2), int(0)], vec![int(0), ratio(1, 2)]],
            &mu,
            &mu,
        )
        .unwrap();
        let res = centroid(&gamma, &mu, &mu, &c, 0).unwrap();
        assert_eq!(res.tree.edges, vec![(0, 1)]);
        assert_eq!(res.tree.levels, vec![int(2)]);
        assert_eq!(res.alpha, vec![int(0), int(-1)]);
        let sol = sinkhorn(&mu, &mu, &c, &SinkhornConfig::new(1e-3)).unwrap();
        let (phi, psi) = res.dual.to_f64();
        let err = phi.iter().zip(&sol.phi_eps).chain(psi.iter().zip(&sol.psi_eps)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-2, "distance {err}");
    }
}
