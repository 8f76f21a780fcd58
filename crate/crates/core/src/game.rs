//! Population games over a finite action set: agent costs, the energy
//! functional, best responses, and equilibria with and without a principal
//! who sets per-action costs `k`.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entropic::{sinkhorn_f64, EntropicSolution, SinkhornConfig};
use crate::error::{OtError, Result};
use crate::measure::{CostMatrix, DiscreteMeasure};
use crate::polytope::characterize_duals;
use crate::scalar::{self, Scalar};
use crate::simplex::solve;

/// Congestion terms `f_j`, each nondecreasing on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Congestion {
    None,
    /// `f_j(x) = coefficient * x^exponent` for every action.
    Power {
        exponent: f64,
        #[serde(default = "one")]
        coefficient: f64,
    },
    /// Piecewise-linear interpolation of `values[j]` on `grid` (one row
    /// shared by all actions, or one row per action).
    Table { grid: Vec<f64>, values: Vec<Vec<f64>> },
}

fn one() -> f64 {
    1.0
}

impl Congestion {
    fn row<'a>(values: &'a [Vec<f64>], j: usize) -> &'a [f64] {
        if values.len() == 1 {
            &values[0]
        } else {
            &values[j]
        }
    }

    pub fn value(&self, j: usize, x: f64) -> f64 {
        match self {
            Congestion::None => 0.0,
            Congestion::Power { exponent, coefficient } => coefficient * x.powf(*exponent),
            Congestion::Table { grid, values } => {
                let row = Self::row(values, j);
                let k = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1);
                let t = (x - grid[k - 1]) / (grid[k] - grid[k - 1]);
                row[k - 1] + t * (row[k] - row[k - 1])
            }
        }
    }

    /// `F_j(x) = int_0^x f_j`.
    pub fn antiderivative(&self, j: usize, x: f64) -> f64 {
        match self {
            Congestion::None => 0.0,
            Congestion::Power { exponent, coefficient } => coefficient * x.powf(exponent + 1.0) / (exponent + 1.0),
            Congestion::Table { grid, .. } => {
                // Trapezoids are exact for piecewise-linear integrands.
                let mut total = 0.0;
                let mut a = 0.0;
                let knots = grid.iter().copied().filter(|&g| g > 0.0 && g < x).chain(std::iter::once(x));
                for b in knots {
                    total += 0.5 * (b - a) * (self.value(j, a) + self.value(j, b));
                    a = b;
                }
                total
            }
        }
    }

    fn validate(&self, n_y: usize) -> Result<()> {
        match self {
            Congestion::None => Ok(()),
            Congestion::Power { exponent, coefficient } => {
                if !(exponent.is_finite() && *exponent > 0.0 && coefficient.is_finite() && *coefficient >= 0.0) {
                    return Err(OtError::InvalidGame("power congestion needs exponent > 0 and coefficient >= 0".into()));
                }
                Ok(())
            }
            Congestion::Table { grid, values } => {
                let ok_grid = grid.len() >= 2
                    && grid.first() == Some(&0.0)
                    && grid.last() == Some(&1.0)
                    && grid.windows(2).all(|w| w[0] < w[1]);
                if !ok_grid {
                    return Err(OtError::InvalidGame("table grid must increase strictly from 0 to 1".into()));
                }
                if !(values.len() == 1 || values.len() == n_y) || values.iter().any(|r| r.len() != grid.len()) {
                    return Err(OtError::InvalidGame("table values must have one row (or one per action) of grid length".into()));
                }
                if values.iter().any(|r| r.windows(2).any(|w| w[0] > w[1]) || r.iter().any(|v| !v.is_finite())) {
                    return Err(OtError::InvalidGame("table congestion must be finite and nondecreasing".into()));
                }
                Ok(())
            }
        }
    }
}

/// The principal's admissible cost vectors `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdmissibleCosts {
    #[default]
    All,
    Nonnegative,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Coordinates with `Some(v)` are fixed to `v`; the rest are free.
    Slice { fixed: Vec<Option<f64>> },
}

impl AdmissibleCosts {
    pub fn contains(&self, k: &[f64], tol: f64) -> bool {
        match self {
            AdmissibleCosts::All => true,
            AdmissibleCosts::Nonnegative => k.iter().all(|&v| v >= -tol),
            AdmissibleCosts::Box { lower, upper } => {
                k.iter().zip(lower.iter().zip(upper)).all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol)
            }
            AdmissibleCosts::Slice { fixed } => {
                k.iter().zip(fixed).all(|(&v, f)| f.map_or(true, |target| (v - target).abs() <= tol))
            }
        }
    }

    /// Adds the constant of smallest magnitude that moves `k` into `K`.
    ///
    /// Agents' choices are unchanged by a common shift of all action costs,
    /// so this keeps `k` in the same equilibrium class.
    pub fn translate_into(&self, k: &[f64]) -> Result<Vec<f64>> {
        let shift = match self {
            AdmissibleCosts::All => 0.0,
            AdmissibleCosts::Nonnegative => (-k.iter().copied().fold(f64::INFINITY, f64::min)).max(0.0),
            AdmissibleCosts::Box { lower, upper } => {
                let lo = k.iter().zip(lower).map(|(v, l)| l - v).fold(f64::NEG_INFINITY, f64::max);
                let hi = k.iter().zip(upper).map(|(v, u)| u - v).fold(f64::INFINITY, f64::min);
                if lo > hi {
                    return Err(OtError::NoAdmissibleCost(format!(
                        "no common shift fits the box (needs at least {lo}, at most {hi})"
                    )));
                }
                0f64.clamp(lo, hi)
            }
            AdmissibleCosts::Slice { fixed } => {
                let shifts: Vec<f64> =
                    k.iter().zip(fixed).filter_map(|(&v, f)| f.map(|target| target - v)).collect();
                let first = shifts.first().copied().unwrap_or(0.0);
                if shifts.iter().any(|s| (s - first).abs() > 1e-9 * (1.0 + first.abs())) {
                    return Err(OtError::NoAdmissibleCost(
                        "fixed coordinates disagree on the required shift".into(),
                    ));
                }
                first
            }
        };
        let mut out: Vec<f64> = k.iter().map(|v| v + shift).collect();
        if let AdmissibleCosts::Slice { fixed } = self {
            for (v, f) in out.iter_mut().zip(fixed) {
                if let Some(target) = f {
                    *v = *target;
                }
            }
        }
        Ok(out)
    }

    fn validate(&self, n_y: usize) -> Result<()> {
        let ok = match self {
            AdmissibleCosts::All | AdmissibleCosts::Nonnegative => true,
            AdmissibleCosts::Box { lower, upper } => {
                lower.len() == n_y && upper.len() == n_y && lower.iter().zip(upper).all(|(l, u)| l <= u)
            }
            AdmissibleCosts::Slice { fixed } => fixed.len() == n_y,
        };
        if ok {
            Ok(())
        } else {
            Err(OtError::InvalidGame("admissible cost description does not match the action count".into()))
        }
    }
}

/// The principal's objective `G(nu, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Objective {
    /// `sum nu_j^2`.
    #[default]
    SumOfSquares,
    /// `sum (nu_j - target_j)^2`.
    Distance { target: Vec<f64> },
    /// `penalty * sum nu_j^2 - sum k_j nu_j`; depends on `k`.
    Revenue { penalty: f64 },
}

impl Objective {
    pub fn value(&self, nu: &[f64], k: &[f64]) -> f64 {
        match self {
            Objective::SumOfSquares => nu.iter().map(|v| v * v).sum(),
            Objective::Distance { target } => nu.iter().zip(target).map(|(v, t)| (v - t) * (v - t)).sum(),
            Objective::Revenue { penalty } => {
                penalty * nu.iter().map(|v| v * v).sum::<f64>() - nu.iter().zip(k).map(|(v, c)| v * c).sum::<f64>()
            }
        }
    }

    pub fn is_k_independent(&self) -> bool {
        !matches!(self, Objective::Revenue { .. })
    }

    /// Minimizer over the probability simplex, for `k`-independent objectives.
    fn simplex_minimizer(&self, n_y: usize) -> Option<Vec<f64>> {
        match self {
            Objective::SumOfSquares => Some(vec![1.0 / n_y as f64; n_y]),
            Objective::Distance { target } => Some(project_simplex(target, 1.0)),
            Objective::Revenue { .. } => None,
        }
    }
}

/// Everything that defines the game apart from the type distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    cost: Array2<f64>,
    congestion: Congestion,
    interaction: Array2<f64>,
    admissible: AdmissibleCosts,
    objective: Objective,
}

impl GameSpec {
    pub fn new(
        cost: Array2<f64>,
        congestion: Congestion,
        interaction: Array2<f64>,
        admissible: AdmissibleCosts,
        objective: Objective,
    ) -> Result<Self> {
        let n_y = cost.ncols();
        if cost.is_empty() || cost.iter().any(|v| !v.is_finite()) {
            return Err(OtError::InvalidGame("cost must be nonempty and finite".into()));
        }
        if interaction.dim() != (n_y, n_y) {
            return Err(OtError::DimensionMismatch {
                context: "interaction vs actions",
                expected: n_y * n_y,
                found: interaction.len(),
            });
        }
        if interaction.iter().any(|v| !v.is_finite()) || interaction != interaction.t() {
            return Err(OtError::InvalidGame("interaction matrix must be finite and symmetric".into()));
        }
        congestion.validate(n_y)?;
        for j in 0..n_y {
            let grid: Vec<f64> = (0..=100).map(|s| congestion.value(j, s as f64 / 100.0)).collect();
            if grid.windows(2).any(|w| w[1] < w[0]) {
                return Err(OtError::InvalidGame(format!("congestion of action {j} decreases")));
            }
        }
        admissible.validate(n_y)?;
        let ok_objective = match &objective {
            Objective::Distance { target } => target.len() == n_y,
            _ => true,
        };
        if !ok_objective {
            return Err(OtError::InvalidGame("objective target has the wrong length".into()));
        }
        Ok(Self { cost, congestion, interaction, admissible, objective })
    }

    /// Interaction `theta[a][j] = g(|a - j|)`.
    pub fn toeplitz(g: &[f64], n_y: usize) -> Result<Array2<f64>> {
        if g.len() < n_y {
            return Err(OtError::InvalidGame(format!("interaction needs {n_y} lags, got {}", g.len())));
        }
        Ok(Array2::from_shape_fn((n_y, n_y), |(a, j)| g[a.abs_diff(j)]))
    }

    pub fn n_x(&self) -> usize {
        self.cost.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.cost.ncols()
    }

    pub fn cost(&self) -> &Array2<f64> {
        &self.cost
    }

    pub fn interaction(&self) -> &Array2<f64> {
        &self.interaction
    }

    pub fn congestion(&self) -> &Congestion {
        &self.congestion
    }

    pub fn admissible(&self) -> &AdmissibleCosts {
        &self.admissible
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.n_x() {
            return Err(OtError::DimensionMismatch { context: "mu vs types", expected: self.n_x(), found: mu.len() });
        }
        let total: f64 = mu.iter().sum();
        if mu.iter().any(|v| !(v.is_finite() && *v > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(OtError::InvalidMeasure(format!("type distribution must be positive and sum to 1 (sum {total})")));
        }
        Ok(())
    }

    fn check_actions(&self, v: &[f64], what: &'static str) -> Result<()> {
        if v.len() != self.n_y() {
            return Err(OtError::DimensionMismatch { context: what, expected: self.n_y(), found: v.len() });
        }
        Ok(())
    }
}

/// `C[i][j] = c[i][j] + k[j] + f_j(nu[j]) + sum_a theta[a][j] nu[a]`.
pub fn agent_cost(spec: &GameSpec, nu: &[f64], k: &[f64]) -> Array2<f64> {
    let social = spec.interaction.t().dot(&ndarray::ArrayView1::from(nu));
    Array2::from_shape_fn(spec.cost.dim(), |(i, j)| spec.cost[(i, j)] + k[j] + spec.congestion.value(j, nu[j]) + social[j])
}

/// `sum F_j(nu_j) + nu^T theta nu / 2`.
pub fn energy(spec: &GameSpec, nu: &[f64]) -> f64 {
    let v = ndarray::ArrayView1::from(nu);
    let congestion: f64 = nu.iter().enumerate().map(|(j, &x)| spec.congestion.antiderivative(j, x)).sum();
    congestion + 0.5 * v.dot(&spec.interaction.dot(&v))
}

pub fn energy_gradient(spec: &GameSpec, nu: &[f64]) -> Vec<f64> {
    let social = spec.interaction.dot(&ndarray::ArrayView1::from(nu));
    nu.iter().enumerate().map(|(j, &x)| spec.congestion.value(j, x) + social[j]).collect()
}

/// Euclidean projection onto `{u >= 0, sum u = radius}`.
pub fn project_simplex(y: &[f64], radius: f64) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - radius) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// `max |nu - P(nu - g)|` with `P` the projection onto the simplex
/// truncated at `floor`. Zero exactly at first-order optimal points.
pub fn stationarity_residual(nu: &[f64], gradient: &[f64], floor: f64) -> f64 {
    let radius = 1.0 - floor * nu.len() as f64;
    let shifted: Vec<f64> = nu.iter().zip(gradient).map(|(v, g)| v - g - floor).collect();
    let projected = project_simplex(&shifted, radius);
    nu.iter().zip(&projected).map(|(v, p)| (v - p - floor).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseConfig {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound on every action's mass; zero gives the full simplex.
    pub floor: f64,
}

impl Default for BestResponseConfig {
    fn default() -> Self {
        Self { epsilon: 1e-2, tol: 1e-8, max_iter: 20_000, floor: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub nu: Vec<f64>,
    pub entropic: EntropicSolution,
    /// Regularized variational objective at `nu`.
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Row-normalizes `exp(logits + lambda / kappa)` to `mu` while keeping every
/// column sum at least `floor`, by block coordinate ascent on the dual
/// (row potentials, column multipliers `lambda >= 0`). Returns the log plan
/// and `lambda`.
fn project_rows(logits: &Array2<f64>, mu: &[f64], floor: f64, kappa: f64) -> Result<(Array2<f64>, Vec<f64>)> {
    let (n, m) = logits.dim();
    let mut lambda = vec![0.0; m];
    let mut log_plan = logits.clone();
    for _ in 0..100_000 {
        for i in 0..n {
            let row: Vec<f64> = (0..m).map(|j| logits[(i, j)] + lambda[j] / kappa).collect();
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = hi + row.iter().map(|v| (v - hi).exp()).sum::<f64>().ln();
            for j in 0..m {
                log_plan[(i, j)] = row[j] - lse + mu[i].ln();
            }
        }
        if floor == 0.0 {
            return Ok((log_plan, lambda));
        }
        let mut violation: f64 = 0.0;
        for j in 0..m {
            let col: f64 = (0..n).map(|i| log_plan[(i, j)].exp()).sum();
            let gap = if lambda[j] > 0.0 { (col - floor).abs() } else { (floor - col).max(0.0) };
            violation = violation.max(gap / floor);
            lambda[j] = (lambda[j] + kappa * (floor.ln() - col.ln())).max(0.0);
        }
        if violation <= 1e-13 {
            return Ok((log_plan, lambda));
        }
    }
    Err(OtError::NotConverged { iterations: 100_000, residual: f64::NAN })
}

/// `KL(p' | p)` for plans of equal mass given by their logs, written as
/// `sum p h(d)` with `h(d) = d expm1(d) - (expm1(d) - d)` to avoid
/// cancellation when the plans are close.
fn kl_between(log_new: &Array2<f64>, log_old: &Array2<f64>) -> f64 {
    log_new
        .iter()
        .zip(log_old)
        .map(|(a, b)| {
            let d = a - b;
            let e = d.exp_m1();
            b.exp() * (d * e - (e - d))
        })
        .sum()
}

fn column_sums(log_plan: &Array2<f64>) -> Vec<f64> {
    log_plan.mapv(f64::exp).sum_axis(ndarray::Axis(0)).to_vec()
}

/// Logits of the proximal step: `(ln gamma / eta - c - k - g) / kappa` with
/// `kappa = eps + 1 / eta`; `eta = inf` gives the full step.
fn step_logits(spec: &GameSpec, log_plan: &Array2<f64>, k: &[f64], g: &[f64], eps: f64, inv_eta: f64) -> Array2<f64> {
    let kappa = eps + inv_eta;
    Array2::from_shape_fn(log_plan.dim(), |(i, j)| {
        (inv_eta * log_plan[(i, j)] - spec.cost[(i, j)] - k[j] - g[j]) / kappa
    })
}

/// Minimizes `OT_eps(mu, nu) + k . nu + E(nu)` over action distributions.
///
/// The transport term is written as a minimum over couplings with first
/// marginal `mu`, so the problem becomes `<c + k, gamma> + eps H(gamma) +
/// E(second marginal)` over such couplings. This is solved by proximal
/// gradient steps in the KL geometry, which handle the entropy exactly; the
/// energy is linearized with a backtracked step. Working on couplings keeps
/// the problem well conditioned where `OT_eps` is nearly kinked in `nu`
/// (types and actions splitting into blocks of equal mass).
///
/// Stops when the full step moves the log plan by at most `tol / eps` in
/// max norm. The reported `residual` is that movement in cost units.
pub fn best_response(spec: &GameSpec, mu: &[f64], k: &[f64], config: &BestResponseConfig) -> Result<BestResponse> {
    spec.check_mu(mu)?;
    spec.check_actions(k, "k vs actions")?;
    let n = spec.n_y();
    let (eps, floor) = (config.epsilon, config.floor);
    if !(eps.is_finite() && eps > 0.0) {
        return Err(OtError::NumericalRange(format!("epsilon must be positive, got {eps}")));
    }
    if !(floor >= 0.0 && floor * (n as f64) < 1.0) {
        return Err(OtError::InvalidGame(format!("floor {floor} leaves no feasible action distribution")));
    }
    let bregman_bound = |nu: &[f64], next: &[f64]| -> f64 {
        // Upper bound on the Bregman gap of E: exact for the quadratic part,
        // and by convexity for the congestion part.
        let delta: Vec<f64> = next.iter().zip(nu).map(|(a, b)| a - b).collect();
        let d = ndarray::ArrayView1::from(&delta);
        let congestion: f64 = (0..n)
            .map(|j| (spec.congestion.value(j, next[j]) - spec.congestion.value(j, nu[j])) * delta[j])
            .sum();
        congestion + 0.5 * d.dot(&spec.interaction.dot(&d))
    };

    let (mut log_plan, _) = project_rows(&Array2::zeros(spec.cost.dim()), mu, floor, 1.0)?;
    let mut nu = column_sums(&log_plan);
    let mut inv_eta = 1.0;
    let mut iterations = 0;
    let residual = loop {
        let g = energy_gradient(spec, &nu);
        let (full, _) = project_rows(&step_logits(spec, &log_plan, k, &g, eps, 0.0), mu, floor, eps)?;
        let residual = eps * full.iter().zip(&log_plan).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual <= config.tol {
            break residual;
        }
        if iterations >= config.max_iter {
            return Err(OtError::NotConverged { iterations, residual });
        }
        iterations += 1;
        loop {
            let (trial, _) = project_rows(&step_logits(spec, &log_plan, k, &g, eps, inv_eta), mu, floor, eps + inv_eta)?;
            let trial_nu = column_sums(&trial);
            if bregman_bound(&nu, &trial_nu) <= inv_eta * kl_between(&trial, &log_plan) {
                log_plan = trial;
                nu = trial_nu;
                inv_eta /= 1.5;
                break;
            }
            inv_eta *= 2.0;
            if inv_eta > 1e14 {
                return Err(OtError::NotConverged { iterations, residual });
            }
        }
    };

    let sinkhorn = SinkhornConfig::new(eps).with_tol(1e-12);
    let entropic = sinkhorn_f64(mu, &nu, &spec.cost, &sinkhorn, None)?;
    let value = entropic.value(mu, &nu) + nu.iter().zip(k).map(|(v, c)| v * c).sum::<f64>() + energy(spec, &nu);
    Ok(BestResponse { nu, entropic, value, iterations, residual })
}

/// An element of the (entropically smoothed) subdifferential of
/// `nu -> OT(mu, nu, c)`: the second entropic potential, with `phi(0) = 0`.
pub fn ot_subdifferential_element(mu: &[f64], nu: &[f64], c: &Array2<f64>, epsilon: f64) -> Result<Vec<f64>> {
    if nu.iter().any(|&v| v <= 0.0) {
        return Err(OtError::BoundaryMeasure(
            "nu lies on the boundary of the simplex, where the subdifferential may be empty".into(),
        ));
    }
    Ok(sinkhorn_f64(mu, nu, c, &SinkhornConfig::new(epsilon), None)?.psi_eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Cne,
    Scne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub plan: Array2<f64>,
    pub action_dist: Vec<f64>,
    pub costs: Vec<f64>,
    pub value: f64,
    pub kind: EquilibriumKind,
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Produced by a heuristic search rather than a certified construction.
    pub experimental: bool,
}

/// Equilibrium of the agents' game for fixed action costs `k`.
pub fn solve_cne(spec: &GameSpec, mu: &[f64], k: &[f64], config: &BestResponseConfig) -> Result<Equilibrium> {
    let br = best_response(spec, mu, k, config)?;
    let value = spec.objective.value(&br.nu, k);
    Ok(Equilibrium {
        action_dist: br.entropic.column_sums(),
        plan: br.entropic.plan,
        costs: k.to_vec(),
        value,
        kind: EquilibriumKind::Cne,
        epsilon: config.epsilon,
        iterations: br.iterations,
        residual: br.residual,
        experimental: false,
    })
}

/// Principal's equilibrium when the objective ignores `k`: minimize `G` over
/// the simplex, then pick `k = -psi_eps - grad E` and shift it into `K`.
pub fn solve_scne_k_independent(spec: &GameSpec, mu: &[f64], epsilon: f64) -> Result<Equilibrium> {
    spec.check_mu(mu)?;
    let nu = spec.objective.simplex_minimizer(spec.n_y()).ok_or_else(|| {
        OtError::InvalidGame("objective depends on k; use the search-based solver".into())
    })?;
    if nu.iter().any(|&v| v <= 1e-12) {
        return Err(OtError::BoundaryMeasure("the objective is minimized on the boundary of the simplex".into()));
    }
    let sol = sinkhorn_f64(mu, &nu, &spec.cost, &SinkhornConfig::new(epsilon), None)?;
    let grad_e = energy_gradient(spec, &nu);
    let raw: Vec<f64> = sol.psi_eps.iter().zip(&grad_e).map(|(p, g)| -p - g).collect();
    let costs = spec.admissible.translate_into(&raw)?;
    let value = spec.objective.value(&nu, &costs);
    Ok(Equilibrium {
        action_dist: sol.column_sums(),
        plan: sol.plan,
        costs,
        value,
        kind: EquilibriumKind::Scne,
        epsilon,
        iterations: sol.iterations,
        residual: sol.residual,
        experimental: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CneCheck {
    pub epsilon: f64,
    pub tol: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CneReport {
    /// Max deviation of the plan's row sums from `mu`.
    pub marginal_error: f64,
    /// Transport cost of the plan minus the optimal cost for its marginals.
    pub ot_gap: f64,
    /// Projected-gradient residual of the variational problem.
    pub variational_residual: f64,
    pub is_cne: bool,
}

fn exact_measure(weights: &[Scalar]) -> Result<(DiscreteMeasure, Vec<usize>)> {
    let keep: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > Scalar::from_integer(0.into())).collect();
    let total = scalar::sum(keep.iter().map(|&i| &weights[i]));
    let w = keep.iter().map(|&i| &weights[i] / &total).collect();
    Ok((DiscreteMeasure::new(w)?, keep))
}

/// Checks whether `plan` is an equilibrium for costs `k`: its marginal
/// matches `mu`, it is optimal for its own marginals (exact LP on the
/// floating entries), and its action distribution solves the variational
/// problem to within `tol`.
pub fn check_cne(spec: &GameSpec, mu: &[f64], plan: &Array2<f64>, k: &[f64], check: &CneCheck) -> Result<CneReport> {
    spec.check_mu(mu)?;
    spec.check_actions(k, "k vs actions")?;
    if plan.dim() != spec.cost.dim() || plan.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(OtError::InvalidPlan("plan must be nonnegative with the cost's shape".into()));
    }
    let rows = plan.sum_axis(ndarray::Axis(1));
    let marginal_error = rows.iter().zip(mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let nu: Vec<f64> = plan.sum_axis(ndarray::Axis(0)).to_vec();

    let exact = plan.iter().map(|&v| scalar::from_f64(v)).collect::<Result<Vec<_>>>()?;
    let exact = Array2::from_shape_vec(plan.dim(), exact).expect("same shape");
    let row_mass: Vec<Scalar> = exact.rows().into_iter().map(|r| scalar::sum(r.iter())).collect();
    let col_mass: Vec<Scalar> = exact.columns().into_iter().map(|c| scalar::sum(c.iter())).collect();
    let total = scalar::sum(row_mass.iter());
    let (mu_e, xs) = exact_measure(&row_mass)?;
    let (nu_e, ys) = exact_measure(&col_mass)?;
    let c_exact = CostMatrix::from_fn(xs.len(), ys.len(), |(a, b)| {
        scalar::from_f64(spec.cost[(xs[a], ys[b])]).expect("finite cost")
    })?;
    let plan_cost = scalar::sum(
        exact.indexed_iter().map(|((i, j), v)| v * scalar::from_f64(spec.cost[(i, j)]).expect("finite")).collect::<Vec<_>>().iter(),
    ) / &total;
    let optimum = solve(&mu_e, &nu_e, &c_exact)?.cost;
    let ot_gap = scalar::to_f64(&(plan_cost - optimum));

    let variational_residual = if nu.iter().all(|&v| v > 0.0) {
        let psi = ot_subdifferential_element(mu, &nu, &spec.cost, check.epsilon)?;
        let grad_e = energy_gradient(spec, &nu);
        let g: Vec<f64> = (0..nu.len()).map(|j| psi[j] + k[j] + grad_e[j]).collect();
        stationarity_residual(&nu, &g, check.floor)
    } else {
        f64::INFINITY
    };
    let is_cne = marginal_error <= check.tol && ot_gap <= check.tol && variational_residual <= check.tol;
    Ok(CneReport { marginal_error, ot_gap, variational_residual, is_cne })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Random action distributions tried besides the uniform one.
    pub samples: usize,
    /// Random dual offsets tried per distribution, besides polytope vertices.
    pub alpha_samples: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { samples: 64, alpha_samples: 16 }
    }
}

fn rational_vector(values: &[f64], denominator: i64) -> Result<Vec<Scalar>> {
    let mut out: Vec<Scalar> =
        values.iter().map(|v| scalar::ratio((v * denominator as f64).round().max(1.0) as i64, denominator)).collect();
    let total = scalar::sum(out.iter());
    out.iter_mut().for_each(|v| *v = &*v / &total);
    Ok(out)
}

/// Experimental search for a principal's equilibrium with a `k`-dependent
/// objective.
///
/// For candidate action distributions `nu`, every exact subgradient
/// `psi` of `OT(mu, ., c)` at `nu` yields costs `k = -psi - grad E(nu)` for
/// which `nu` is a best response. Subgradients are taken from the vertices
/// and random points of the exact dual solution set, so non-entropic choices
/// of `k` are also explored. The best pair found is returned.
pub fn search_scne<R: Rng + ?Sized>(spec: &GameSpec, mu: &[f64], config: &SearchConfig, rng: &mut R) -> Result<Equilibrium> {
    spec.check_mu(mu)?;
    let n = spec.n_y();
    let mu_exact = DiscreteMeasure::new(
        mu.iter().map(|v| scalar::parse(&v.to_string())).collect::<Result<Vec<_>>>().map(|w| {
            let total = scalar::sum(w.iter());
            w.iter().map(|x| x / &total).collect()
        })?,
    )?;
    let c_exact = CostMatrix::from_fn(spec.n_x(), n, |(i, j)| scalar::parse(&spec.cost[(i, j)].to_string()).expect("finite"))?;
    let mut candidates = vec![vec![1.0 / n as f64; n]];
    for _ in 0..config.samples {
        let draws: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = draws.iter().sum();
        candidates.push(draws.iter().map(|d| d / s).collect());
    }
    let mut best: Option<Equilibrium> = None;
    for nu in candidates {
        let nu_exact = DiscreteMeasure::new(rational_vector(&nu, 1_000_000)?)?;
        let nu_f = nu_exact.to_f64();
        let sol = solve(&mu_exact, &nu_exact, &c_exact)?;
        let polytope = characterize_duals(&sol.plan, &mu_exact, &nu_exact, &c_exact, 0)?;
        let mut alphas = if polytope.num_components() <= 5 { polytope.vertices() } else { Vec::new() };
        alphas.extend((0..config.alpha_samples).map(|_| polytope.sample_alpha(rng)));
        let grad_e = energy_gradient(spec, &nu_f);
        for alpha in alphas {
            let dual = polytope.assemble_dual(&alpha)?;
            let raw: Vec<f64> = dual.psi.iter().zip(&grad_e).map(|(p, g)| -scalar::to_f64(p) - g).collect();
            let Ok(costs) = spec.admissible.translate_into(&raw) else { continue };
            let value = spec.objective.value(&nu_f, &costs);
            if best.as_ref().map_or(true, |b| value < b.value) {
                best = Some(Equilibrium {
                    plan: sol.plan.to_f64(),
                    action_dist: nu_f.clone(),
                    costs,
                    value,
                    kind: EquilibriumKind::Scne,
                    epsilon: 0.0,
                    iterations: sol.pivots,
                    residual: 0.0,
                    experimental: true,
                });
            }
        }
    }
    best.ok_or_else(|| OtError::NoAdmissibleCost("no candidate cost vector lies in K".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(cost: Array2<f64>, congestion: Congestion, theta: Array2<f64>) -> GameSpec {
        GameSpec::new(cost, congestion, theta, AdmissibleCosts::All, Objective::SumOfSquares).unwrap()
    }

    #[test]
    fn agent_cost_reduces_to_c() {
        let c = ndarray::arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let spec = plain(c.clone(), Congestion::None, Array2::zeros((2, 2)));
        assert_eq!(agent_cost(&spec, &[0.5, 0.5], &[0.0, 0.0]), c);
        let shifted = agent_cost(&spec, &[0.5, 0.5], &[2.0, 2.0]);
        assert_eq!(shifted, c + 2.0);
    }

    #[test]
    fn power_energy_closed_form() {
        let spec = plain(Array2::zeros((1, 8)), Congestion::Power { exponent: 2.0, coefficient: 1.0 }, Array2::zeros((8, 8)));
        let nu = vec![0.125; 8];
        assert!((energy(&spec, &nu) - 8.0 * 0.125f64.powi(3) / 3.0).abs() < 1e-15);
        assert!(energy_gradient(&spec, &nu).iter().all(|g| (g - 0.015625).abs() < 1e-15));
    }

    #[test]
    fn table_congestion_integrates_exactly() {
        let cong = Congestion::Table { grid: vec![0.0, 0.5, 1.0], values: vec![vec![0.0, 1.0, 1.0]] };
        assert!((cong.value(0, 0.25) - 0.5).abs() < 1e-15);
        assert!((cong.antiderivative(0, 1.0) - 0.75).abs() < 1e-15);
        assert!((cong.antiderivative(0, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_interaction_and_decreasing_congestion() {
        let theta = ndarray::arr2(&[[1.0, 0.5], [0.0, 1.0]]);
        assert!(GameSpec::new(Array2::zeros((1, 2)), Congestion::None, theta, AdmissibleCosts::All, Objective::SumOfSquares).is_err());
        let cong = Congestion::Table { grid: vec![0.0, 1.0], values: vec![vec![1.0, 0.0]] };
        assert!(GameSpec::new(Array2::zeros((1, 2)), cong, Array2::zeros((2, 2)), AdmissibleCosts::All, Objective::SumOfSquares).is_err());
    }

    #[test]
    fn projection_onto_simplex() {
        assert_eq!(project_simplex(&[0.2, 0.8], 1.0), vec![0.2, 0.8]);
        assert_eq!(project_simplex(&[2.0, 0.0], 1.0), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5], 1.0);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn symmetric_game_has_uniform_response() {
        let spec = plain(Array2::zeros((2, 3)), Congestion::Power { exponent: 2.0, coefficient: 1.0 }, Array2::zeros((3, 3)));
        let br = best_response(&spec, &[0.5, 0.5], &[0.0; 3], &BestResponseConfig::default()).unwrap();
        assert!(br.nu.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn admissible_translation() {
        let k = [-1.0, 2.0];
        assert_eq!(AdmissibleCosts::Nonnegative.translate_into(&k).unwrap(), vec![0.0, 3.0]);
        let slice = AdmissibleCosts::Slice { fixed: vec![Some(1.0), None] };
        assert_eq!(slice.translate_into(&k).unwrap(), vec![1.0, 4.0]);
        let tight = AdmissibleCosts::Box { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] };
        assert!(matches!(tight.translate_into(&k), Err(OtError::NoAdmissibleCost(_))));
    }

    #[test]
    fn boundary_nu_has_no_smoothed_subgradient() {
        let c = Array2::zeros((1, 2));
        assert!(matches!(ot_subdifferential_element(&[1.0], &[1.0, 0.0], &c, 0.1), Err(OtError::BoundaryMeasure(_))));
    }
}
