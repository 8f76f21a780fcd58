//! Bipartite support graphs, their components, and the union graph of all
//! primal optimizers.

use std::collections::{BTreeSet, VecDeque};

use num_traits::{Signed, Zero};

use crate::duality::first_complementarity_violation;
use crate::error::{OtError, Result};
use crate::measure::{CostMatrix, DiscreteMeasure, DualPair, TransportPlan};
use crate::polytope::OffsetBounds;
use crate::scalar::Scalar;

/// A vertex of a bipartite support graph: an atom of the first (`X`) or the
/// second (`Y`) measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    X(usize),
    Y(usize),
}

/// Bipartite graph on `X ∪ Y` whose edges are cells `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportGraph {
    left: Vec<String>,
    right: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
}

impl SupportGraph {
    pub fn new(n_x: usize, n_y: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let left = (1..=n_x).map(|i| i.to_string()).collect();
        let right = (1..=n_y).map(|j| j.to_string()).collect();
        Self::with_labels(left, right, edges)
    }

    pub fn with_labels(
        left: Vec<String>,
        right: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        if let Some(&(i, j)) = edges.iter().find(|(i, j)| *i >= left.len() || *j >= right.len()) {
            return Err(OtError::InvalidPlan(format!("edge ({i}, {j}) is outside the vertex set")));
        }
        Ok(Self { left, right, edges })
    }

    pub fn n_x(&self) -> usize {
        self.left.len()
    }

    pub fn n_y(&self) -> usize {
        self.right.len()
    }

    pub fn left(&self) -> &[String] {
        &self.left
    }

    pub fn right(&self) -> &[String] {
        &self.right
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.edges.contains(&(x, y))
    }

    pub fn is_subgraph_of(&self, other: &SupportGraph) -> bool {
        self.edges.is_subset(&other.edges)
    }

    pub fn is_connected(&self) -> bool {
        connected_components(self).components.len() == 1
    }

    fn node(&self, v: Vertex) -> usize {
        match v {
            Vertex::X(i) => i,
            Vertex::Y(j) => self.n_x() + j,
        }
    }

    fn vertex(&self, node: usize) -> Vertex {
        if node < self.n_x() {
            Vertex::X(node)
        } else {
            Vertex::Y(node - self.n_x())
        }
    }

    fn contains_vertex(&self, v: Vertex) -> bool {
        match v {
            Vertex::X(i) => i < self.n_x(),
            Vertex::Y(j) => j < self.n_y(),
        }
    }

    /// Neighbour lists in increasing index order.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let n_x = self.n_x();
        let mut adj = vec![Vec::new(); n_x + self.n_y()];
        for &(i, j) in &self.edges {
            adj[i].push(n_x + j);
            adj[n_x + j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// Support graph of a coupling: an edge wherever the exact entry is positive.
pub fn support_graph(gamma: &TransportPlan) -> SupportGraph {
    SupportGraph::new(gamma.rows(), gamma.cols(), gamma.support()).expect("support lies inside the plan")
}

/// The atoms of one connected component, each list sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
}

impl Component {
    pub fn contains(&self, v: Vertex) -> bool {
        match v {
            Vertex::X(i) => self.xs.binary_search(&i).is_ok(),
            Vertex::Y(j) => self.ys.binary_search(&j).is_ok(),
        }
    }
}

/// Components of a support graph, ordered by their smallest `X` atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentPartition {
    pub components: Vec<Component>,
}

impl ComponentPartition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Component> {
        self.components.iter()
    }

    /// Component index of every `X` atom.
    pub fn x_owner(&self, n_x: usize) -> Vec<usize> {
        let mut owner = vec![usize::MAX; n_x];
        for (k, comp) in self.components.iter().enumerate() {
            for &i in &comp.xs {
                owner[i] = k;
            }
        }
        owner
    }

    /// Component index of every `Y` atom.
    pub fn y_owner(&self, n_y: usize) -> Vec<usize> {
        let mut owner = vec![usize::MAX; n_y];
        for (k, comp) in self.components.iter().enumerate() {
            for &j in &comp.ys {
                owner[j] = k;
            }
        }
        owner
    }

    pub fn component_of(&self, v: Vertex) -> Option<usize> {
        self.components.iter().position(|c| c.contains(v))
    }

    /// Moves the component containing `x0` to the front, keeping the relative
    /// order of the others.
    pub fn with_first_containing(mut self, x0: usize) -> Self {
        if let Some(k) = self.component_of(Vertex::X(x0)) {
            let comp = self.components.remove(k);
            self.components.insert(0, comp);
        }
        self
    }

    /// `mu(X_n) == nu(Y_n)` for every component.
    pub fn is_mass_balanced(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
        self.components.iter().all(|c| mu.mass_of(&c.xs) == nu.mass_of(&c.ys))
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

/// Vertex classes of an arbitrary undirected graph on `0..n`, each sorted, in
/// order of their smallest vertex.
pub fn components_of(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(n);
    for (a, b) in edges {
        uf.union(a, b);
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for v in 0..n {
        let root = uf.find(v);
        if slot[root] == usize::MAX {
            slot[root] = classes.len();
            classes.push(Vec::new());
        }
        classes[slot[root]].push(v);
    }
    classes
}

pub fn connected_components(g: &SupportGraph) -> ComponentPartition {
    let n_x = g.n_x();
    let edges = g.edges.iter().map(|&(i, j)| (i, n_x + j));
    let mut components: Vec<Component> = components_of(n_x + g.n_y(), edges)
        .into_iter()
        .map(|class| {
            let (xs, ys): (Vec<usize>, Vec<usize>) = class.into_iter().partition(|&v| v < n_x);
            Component { xs, ys: ys.into_iter().map(|v| v - n_x).collect() }
        })
        .collect();
    // Components without X atoms (isolated Y vertices) go last.
    components.sort_by_key(|c| (c.xs.first().copied().unwrap_or(usize::MAX), c.ys.first().copied()));
    ComponentPartition { components }
}

/// Breadth-first ordering from `root`: every prefix induces a connected
/// subgraph.
pub fn connected_ordering(g: &SupportGraph, root: Vertex) -> Result<Vec<Vertex>> {
    if !g.contains_vertex(root) {
        return Err(OtError::Disconnected(format!("{root:?} is not a vertex of the graph")));
    }
    let order = bfs(g, root, |_| true);
    let total = g.n_x() + g.n_y();
    if order.len() < total {
        return Err(OtError::Disconnected(format!(
            "only {} of {total} vertices are reachable from {root:?}",
            order.len()
        )));
    }
    Ok(order)
}

fn bfs(g: &SupportGraph, root: Vertex, keep: impl Fn(Vertex) -> bool) -> Vec<Vertex> {
    let adj = g.adjacency();
    let mut seen = vec![false; adj.len()];
    let start = g.node(root);
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut order = Vec::new();
    while let Some(node) = queue.pop_front() {
        order.push(g.vertex(node));
        for &next in &adj[node] {
            if !seen[next] && keep(g.vertex(next)) {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    order
}

/// The unique dual optimizer of the problem restricted to a connected
/// component, normalized so that `phi(anchor) = 0`.
///
/// Potentials are propagated along a breadth-first ordering using
/// `phi(x) + psi(y) = c(x, y)` on edges. The result is local: `phi[a]` belongs
/// to `component.xs[a]` and `psi[b]` to `component.ys[b]`.
pub fn component_dual(
    c: &CostMatrix,
    component: &Component,
    g: &SupportGraph,
    anchor: usize,
) -> Result<DualPair> {
    if !component.contains(Vertex::X(anchor)) {
        return Err(OtError::UnknownAtom { index: anchor, len: component.xs.len() });
    }
    let order = bfs(g, Vertex::X(anchor), |v| component.contains(v));
    if order.len() != component.xs.len() + component.ys.len() {
        return Err(OtError::Disconnected(format!(
            "component of X atom {anchor} has {} vertices, {} reachable",
            component.xs.len() + component.ys.len(),
            order.len()
        )));
    }
    let mut phi: Vec<Option<Scalar>> = vec![None; c.rows()];
    let mut psi: Vec<Option<Scalar>> = vec![None; c.cols()];
    phi[anchor] = Some(Scalar::zero());
    for v in order {
        match v {
            Vertex::X(i) => {
                let value = phi[i].clone().expect("ordering reaches X atoms through a known Y");
                for &(_, j) in g.edges.range((i, 0)..(i + 1, 0)) {
                    psi[j].get_or_insert_with(|| c.get(i, j) - &value);
                }
            }
            Vertex::Y(j) => {
                let value = psi[j].clone().expect("ordering reaches Y atoms through a known X");
                for &i in &component.xs {
                    if g.contains(i, j) {
                        phi[i].get_or_insert_with(|| c.get(i, j) - &value);
                    }
                }
            }
        }
    }
    let local = DualPair::from_parts(
        component.xs.iter().map(|&i| phi[i].clone().expect("reached")).collect(),
        component.ys.iter().map(|&j| psi[j].clone().expect("reached")).collect(),
    );
    // Every edge must be tight; a violated edge means the support carries a
    // cost-improving cycle.
    for (a, &i) in component.xs.iter().enumerate() {
        for (b, &j) in component.ys.iter().enumerate() {
            if g.contains(i, j) && &local.phi[a] + &local.psi[b] != *c.get(i, j) {
                return Err(OtError::NonOptimal(format!(
                    "support edge ({i}, {j}) is not tight for the propagated potentials"
                )));
            }
        }
    }
    Ok(local)
}

/// Base duals of every component. Component `k` is anchored at `anchors[k]`.
pub(crate) fn base_duals(
    c: &CostMatrix,
    partition: &ComponentPartition,
    g: &SupportGraph,
    anchors: &[usize],
) -> Result<Vec<DualPair>> {
    partition
        .iter()
        .zip(anchors)
        .map(|(comp, &anchor)| component_dual(c, comp, g, anchor))
        .collect()
}

/// `c(x, y) - phi_n(x) - psi_m(y)` for `x` in component `n`, `y` in component `m`.
pub(crate) fn cross_slack(
    c: &CostMatrix,
    partition: &ComponentPartition,
    duals: &[DualPair],
    (n, a): (usize, usize),
    (m, b): (usize, usize),
) -> Scalar {
    let x = partition.components[n].xs[a];
    let y = partition.components[m].ys[b];
    c.get(x, y) - &duals[n].phi[a] - &duals[m].psi[b]
}

/// `min_{x in X_n, y in Y_m} c(x, y) - phi_n(x) - psi_m(y)`.
pub(crate) fn min_cross_slack(
    c: &CostMatrix,
    partition: &ComponentPartition,
    duals: &[DualPair],
    n: usize,
    m: usize,
) -> Scalar {
    let (cn, cm) = (&partition.components[n], &partition.components[m]);
    assert!(!cn.xs.is_empty() && !cm.ys.is_empty(), "components of a coupling support are nonempty");
    (0..cn.xs.len())
        .flat_map(|a| (0..cm.ys.len()).map(move |b| (a, b)))
        .map(|(a, b)| cross_slack(c, partition, duals, (n, a), (m, b)))
        .min()
        .expect("nonempty block")
}

/// The graph `G` whose edges are the union of the supports of all primal
/// optimizers, computed from one primal optimizer and one dual optimizer.
///
/// Within a component of the support of `gamma` an edge of `G` is exactly a
/// tight cell of the component's unique dual. A cell joining components `n`
/// and `m` is an edge iff the offset difference `alpha_n - alpha_m` is forced
/// to one value over the whole dual solution set and that value equals the
/// cell's slack. Forced differences are read off the shortest-path closure of
/// the offset constraints, which also captures differences forced through
/// chains of three or more components.
pub fn union_graph(
    gamma: &TransportPlan,
    dual: &DualPair,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c: &CostMatrix,
) -> Result<SupportGraph> {
    c.check_shape(mu, nu)?;
    dual.check_feasible(c)?;
    if let Some((row, col)) = first_complementarity_violation(gamma, dual, c)? {
        return Err(OtError::NotComplementary { row, col });
    }
    let g_gamma = support_graph(gamma);
    let partition = connected_components(&g_gamma);
    let anchors: Vec<usize> = partition.iter().map(|comp| comp.xs[0]).collect();
    let duals = base_duals(c, &partition, &g_gamma, &anchors)?;
    let bounds = OffsetBounds::from_components(c, &partition, &duals);
    let closure = bounds
        .closure()
        .ok_or_else(|| OtError::NonOptimal("offset constraints are infeasible".into()))?;

    let mut edges = BTreeSet::new();
    for (n, cn) in partition.iter().enumerate() {
        for (m, cm) in partition.iter().enumerate() {
            let forced = n == m || (&closure[n][m] + &closure[m][n]).is_zero();
            if !forced {
                continue;
            }
            for a in 0..cn.xs.len() {
                for b in 0..cm.ys.len() {
                    let slack = cross_slack(c, &partition, &duals, (n, a), (m, b));
                    if slack == closure[n][m] {
                        edges.insert((cn.xs[a], cm.ys[b]));
                    }
                }
            }
        }
    }
    debug_assert!(edges.iter().all(|&(i, j)| !(c.get(i, j) - &dual.phi[i] - &dual.psi[j]).is_negative()));
    SupportGraph::with_labels(mu.labels().to_vec(), nu.labels().to_vec(), edges)
}
