//! Shared fixtures, random instance generators and brute-force oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

use ndarray::Array2;
use num_traits::{Signed, Zero};
use otduals::game::{AdmissibleCosts, Congestion, GameSpec, Objective};
use otduals::graph::UnionFind;
use otduals::scalar::{int, ratio, sum};
use otduals::{CostMatrix, DiscreteMeasure, DualPair, Scalar, TransportPlan};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Instance {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub c: CostMatrix,
}

fn cost_from(rows: usize, cols: usize, f: impl Fn(usize, usize) -> i64) -> CostMatrix {
    CostMatrix::from_fn(rows, cols, |(i, j)| int(f(i + 1, j + 1))).unwrap()
}

/// Three-by-four instance whose union graph is connected although the
/// support of the printed plan is not.
pub fn connected_unique() -> (Instance, TransportPlan) {
    let f = [(1, 1), (1, 2), (2, 1), (2, 2), (2, 3), (3, 2), (3, 3), (3, 4)];
    let mu = DiscreteMeasure::new(vec![ratio(1, 4), ratio(1, 4), ratio(1, 2)]).unwrap();
    let nu = DiscreteMeasure::new(vec![ratio(1, 10), ratio(2, 5), ratio(1, 5), ratio(3, 10)]).unwrap();
    let c = cost_from(3, 4, |i, j| if f.contains(&(i, j)) { 0 } else { 1 });
    let gamma = TransportPlan::from_cells(
        &[
            ((0, 0), ratio(1, 10)),
            ((0, 1), ratio(3, 20)),
            ((1, 1), ratio(1, 4)),
            ((2, 2), ratio(1, 5)),
            ((2, 3), ratio(3, 10)),
        ],
        &mu,
        &nu,
    )
    .unwrap();
    (Instance { mu, nu, c }, gamma)
}

pub fn connected_unique_edges() -> BTreeSet<(usize, usize)> {
    [(1, 1), (1, 2), (2, 1), (2, 2), (2, 3), (3, 2), (3, 3), (3, 4)].iter().map(|&(i, j)| (i - 1, j - 1)).collect()
}

/// Four-by-five instance with three support components; `shifted` raises
/// two cross costs so that no offset difference is forced.
pub fn three_components(shifted: bool) -> (Instance, TransportPlan) {
    let mu = DiscreteMeasure::new(vec![ratio(3, 20), ratio(3, 20), ratio(1, 5), ratio(1, 2)]).unwrap();
    let nu = DiscreteMeasure::new(vec![ratio(1, 5), ratio(1, 10), ratio(1, 5), ratio(1, 4), ratio(1, 4)]).unwrap();
    let c = cost_from(4, 5, |i, j| {
        let base = match (i, j) {
            (2, 1) | (3, 3) | (3, 4) => 0,
            (1, 1) | (2, 2) | (4, 3) | (4, 4) | (4, 5) => 1,
            (1, 2) => 3,
            _ => 2,
        };
        let bump = match (shifted, i, j) {
            (true, 3, 4) => 2,
            (true, 4, 3) => 1,
            _ => 0,
        };
        base + bump
    });
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
    (Instance { mu, nu, c }, gamma)
}

/// Identity plan on a 3-cycle of zero-cost cells: every pairwise offset
/// interval has positive width, yet the dual is unique.
pub fn chained_cycle() -> (Instance, TransportPlan) {
    let mu = DiscreteMeasure::uniform(3).unwrap();
    let c = cost_from(3, 3, |i, j| if i == j || j == i % 3 + 1 { 0 } else { 1 });
    let third = ratio(1, 3);
    let gamma = TransportPlan::from_cells(
        &[((0, 0), third.clone()), ((1, 1), third.clone()), ((2, 2), third)],
        &mu,
        &mu,
    )
    .unwrap();
    (Instance { mu: mu.clone(), nu: mu, c }, gamma)
}

pub const REFERENCE_NU: [f64; 8] = [0.0030, 0.3115, 0.0030, 0.0030, 0.2423, 0.2082, 0.2261, 0.0030];
pub const REFERENCE_K: [f64; 8] = [-2.0357, 1.8393, -2.1003, -1.1610, 1.7543, 1.7793, 1.8393, -1.9153];
pub const GAME_MU: [f64; 2] = [0.3, 0.7];

pub fn congestion_game() -> GameSpec {
    let c = ndarray::arr2(&[[5., 4., 3., 2., 1., 1., 2., 3.], [5., 1., 5., 5., 1., 1., 1., 5.]]);
    let g = [2.0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.02, 0.0, 0.0, 0.0];
    GameSpec::new(
        c,
        Congestion::Power { exponent: 2.0, coefficient: 1.0 },
        GameSpec::toeplitz(&g, 8).unwrap(),
        AdmissibleCosts::All,
        Objective::SumOfSquares,
    )
    .unwrap()
}

fn positive_parts<R: Rng>(rng: &mut R, total: i64, parts: usize) -> Vec<i64> {
    // Stars and bars with every part at least one.
    let mut cuts: Vec<i64> = (1..total).collect();
    let mut chosen = Vec::new();
    for _ in 0..parts - 1 {
        let k = rng.gen_range(0..cuts.len());
        chosen.push(cuts.swap_remove(k));
    }
    chosen.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in chosen {
        out.push(c - prev);
        prev = c;
    }
    out.push(total - prev);
    out
}

pub fn normalized(weights: &[i64]) -> DiscreteMeasure {
    let total: i64 = weights.iter().sum();
    DiscreteMeasure::new(weights.iter().map(|&w| ratio(w, total)).collect()).unwrap()
}

/// Instance from integer weights (normalized) and row-major costs.
pub fn instance_from(mu: &[i64], nu: &[i64], costs: &[i64]) -> Instance {
    let m = nu.len();
    let c = CostMatrix::from_fn(mu.len(), m, |(i, j)| int(costs[i * m + j])).unwrap();
    Instance { mu: normalized(mu), nu: normalized(nu), c }
}

/// Generic instance with small integer weights and costs.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> Instance {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let mu: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=9)).collect();
    let nu: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=9)).collect();
    let c = CostMatrix::from_fn(n, m, |_| int(rng.gen_range(0..=9))).unwrap();
    Instance { mu: normalized(&mu), nu: normalized(&nu), c }
}

/// Instance whose atoms split into blocks of exactly equal mass on both
/// sides, with cheap costs inside blocks. Such instances typically have
/// disconnected optimal supports and non-unique duals.
pub fn degenerate_instance<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> Instance {
    let n = rng.gen_range(2..=max_n);
    let m = rng.gen_range(2..=max_m);
    let blocks = rng.gen_range(2..=n.min(m));
    let assign = |rng: &mut R, len: usize| -> Vec<usize> {
        let mut owner: Vec<usize> = (0..len).map(|i| if i < blocks { i } else { rng.gen_range(0..blocks) }).collect();
        for i in (1..owner.len()).rev() {
            let j = rng.gen_range(0..=i);
            owner.swap(i, j);
        }
        owner
    };
    let x_block = assign(rng, n);
    let y_block = assign(rng, m);
    let mut mu = vec![0i64; n];
    let mut nu = vec![0i64; m];
    for b in 0..blocks {
        let xs: Vec<usize> = (0..n).filter(|&i| x_block[i] == b).collect();
        let ys: Vec<usize> = (0..m).filter(|&j| y_block[j] == b).collect();
        let total = rng.gen_range(xs.len().max(ys.len()) as i64..=12);
        for (i, w) in xs.iter().zip(positive_parts(rng, total, xs.len())) {
            mu[*i] = w;
        }
        for (j, w) in ys.iter().zip(positive_parts(rng, total, ys.len())) {
            nu[*j] = w;
        }
    }
    let inside = rng.gen_range(0..=2);
    let c = CostMatrix::from_fn(n, m, |(i, j)| {
        if x_block[i] == y_block[j] {
            int(rng.gen_range(0..=inside))
        } else {
            int(rng.gen_range(inside..=inside + 3))
        }
    })
    .unwrap();
    Instance { mu: normalized(&mu), nu: normalized(&nu), c }
}

/// Random positive rational probability vector of length `len`.
pub fn random_simplex_point<R: Rng>(rng: &mut R, len: usize) -> DiscreteMeasure {
    let w: Vec<i64> = (0..len).map(|_| rng.gen_range(1..=20)).collect();
    normalized(&w)
}

fn cells(n: usize, m: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect()
}

fn for_each_spanning_tree(n: usize, m: usize, mut visit: impl FnMut(&[(usize, usize)])) {
    let all = cells(n, m);
    let k = n + m - 1;
    let mut chosen = Vec::with_capacity(k);
    fn rec(
        all: &[(usize, usize)],
        start: usize,
        k: usize,
        n: usize,
        chosen: &mut Vec<(usize, usize)>,
        visit: &mut dyn FnMut(&[(usize, usize)]),
    ) {
        if chosen.len() == k {
            let mut uf = UnionFind::new(n + all.iter().map(|c| c.1).max().unwrap_or(0) + 1);
            if chosen.iter().all(|&(i, j)| uf.union(i, n + j)) {
                visit(chosen);
            }
            return;
        }
        for idx in start..all.len() {
            chosen.push(all[idx]);
            rec(all, idx + 1, k, n, chosen, visit);
            chosen.pop();
        }
    }
    rec(&all, 0, k, n, &mut chosen, &mut visit);
}

/// Flows on a spanning tree of cells meeting the marginals (leaf peeling).
fn tree_flows(tree: &[(usize, usize)], mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Array2<Scalar> {
    let (n, m) = (mu.len(), nu.len());
    let mut flow = Array2::from_elem((n, m), Scalar::zero());
    let mut left: Vec<(usize, usize)> = tree.to_vec();
    let mut row_rest: Vec<Scalar> = mu.weights().to_vec();
    let mut col_rest: Vec<Scalar> = nu.weights().to_vec();
    while let Some(pos) = (0..left.len()).find(|&p| {
        let (i, j) = left[p];
        left.iter().filter(|c| c.0 == i).count() == 1 || left.iter().filter(|c| c.1 == j).count() == 1
    }) {
        let (i, j) = left.swap_remove(pos);
        let row_leaf = left.iter().all(|c| c.0 != i);
        let value = if row_leaf { row_rest[i].clone() } else { col_rest[j].clone() };
        row_rest[i] -= &value;
        col_rest[j] -= &value;
        flow[(i, j)] = value;
    }
    flow
}

/// Vertices of the transportation polytope minimizing cost.
pub fn optimal_vertices(inst: &Instance) -> (Scalar, Vec<Array2<Scalar>>) {
    let (n, m) = (inst.mu.len(), inst.nu.len());
    let mut best: Option<Scalar> = None;
    let mut vertices: Vec<Array2<Scalar>> = Vec::new();
    for_each_spanning_tree(n, m, |tree| {
        let flow = tree_flows(tree, &inst.mu, &inst.nu);
        if flow.iter().any(|v| v.is_negative()) {
            return;
        }
        let cost = sum(flow.indexed_iter().map(|((i, j), v)| v * inst.c.get(i, j)).collect::<Vec<_>>().iter());
        match &best {
            Some(b) if cost > *b => {}
            Some(b) if cost == *b => {
                if !vertices.contains(&flow) {
                    vertices.push(flow);
                }
            }
            _ => {
                best = Some(cost);
                vertices = vec![flow];
            }
        }
    });
    (best.expect("transportation polytope is nonempty"), vertices)
}

pub fn union_of_supports(vertices: &[Array2<Scalar>]) -> BTreeSet<(usize, usize)> {
    vertices
        .iter()
        .flat_map(|v| v.indexed_iter().filter(|(_, x)| x.is_positive()).map(|(ij, _)| ij).collect::<Vec<_>>())
        .collect()
}

/// Dual-optimal basic solutions with `phi(x0) = 0`: potentials tight on a
/// spanning tree of cells, feasible, and attaining the optimal value.
pub fn optimal_dual_vertices(inst: &Instance, x0: usize, optimum: &Scalar) -> BTreeSet<(Vec<Scalar>, Vec<Scalar>)> {
    let (n, m) = (inst.mu.len(), inst.nu.len());
    let mut out = BTreeSet::new();
    for_each_spanning_tree(n, m, |tree| {
        let mut phi: Vec<Option<Scalar>> = vec![None; n];
        let mut psi: Vec<Option<Scalar>> = vec![None; m];
        phi[x0] = Some(Scalar::zero());
        let mut progress = true;
        while progress {
            progress = false;
            for &(i, j) in tree {
                match (&phi[i], &psi[j]) {
                    (Some(a), None) => {
                        psi[j] = Some(inst.c.get(i, j) - a);
                        progress = true;
                    }
                    (None, Some(b)) => {
                        phi[i] = Some(inst.c.get(i, j) - b);
                        progress = true;
                    }
                    _ => {}
                }
            }
        }
        let phi: Vec<Scalar> = phi.into_iter().map(Option::unwrap).collect();
        let psi: Vec<Scalar> = psi.into_iter().map(Option::unwrap).collect();
        let dual = DualPair::from_parts(phi.clone(), psi.clone());
        if dual.is_feasible(&inst.c) && dual.value(&inst.mu, &inst.nu) == *optimum {
            out.insert((phi, psi));
        }
    });
    out
}

/// Minimum of `sum g (ln g - 1)` over couplings supported on `support`,
/// by iterative proportional fitting of the indicator kernel.
pub fn min_entropy_coupling(mu: &[f64], nu: &[f64], support: &BTreeSet<(usize, usize)>) -> Array2<f64> {
    let (n, m) = (mu.len(), nu.len());
    let mut g = Array2::from_shape_fn((n, m), |ij| if support.contains(&ij) { 1.0 } else { 0.0 });
    for _ in 0..200_000 {
        for i in 0..n {
            let s: f64 = g.row(i).sum();
            g.row_mut(i).mapv_inplace(|v| v * mu[i] / s);
        }
        for j in 0..m {
            let s: f64 = g.column(j).sum();
            g.column_mut(j).mapv_inplace(|v| v * nu[j] / s);
        }
        let err = (0..n).map(|i| (g.row(i).sum() - mu[i]).abs()).fold(0.0, f64::max);
        if err < 1e-14 {
            break;
        }
    }
    g
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

pub fn dual_distance(exact: &DualPair, phi: &[f64], psi: &[f64]) -> f64 {
    let (p, q) = exact.to_f64();
    max_abs_diff(&p, phi).max(max_abs_diff(&q, psi))
}
