//! JSON schemas for problem and game files, and for every report the
//! command-line tool emits. Exact values travel as `"p/q"` strings, floats are
//! rounded to 12 significant digits.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::entropic::{CentroidResult, EntropicSolution};
use crate::error::{OtError, Result};
use crate::game::{AdmissibleCosts, Congestion, Equilibrium, EquilibriumKind, GameSpec, Objective};
use crate::graph::{ComponentPartition, SupportGraph};
use crate::measure::{CostMatrix, DiscreteMeasure, DualPair, TransportPlan};
use crate::polytope::DualPolytope;
use crate::scalar::{self, Scalar};
use crate::simplex::TransportSolution;

/// A number given either as a JSON number or as a string such as `"3/20"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exact {
    Number(serde_json::Number),
    Text(String),
}

impl Exact {
    pub fn to_scalar(&self) -> Result<Scalar> {
        match self {
            Exact::Number(n) => scalar::parse(&n.to_string()),
            Exact::Text(s) => scalar::parse(s),
        }
    }
}

fn scalars(values: &[Exact]) -> Result<Vec<Scalar>> {
    values.iter().map(Exact::to_scalar).collect()
}

fn strings(values: &[Scalar]) -> Vec<String> {
    values.iter().map(scalar::format).collect()
}

/// Rounds to 12 significant digits so float output is stable across runs.
pub fn round12(value: f64) -> f64 {
    if !value.is_finite() || value == 0.0 {
        return value;
    }
    format!("{value:.11e}").parse().unwrap_or(value)
}

fn round_all(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| round12(v)).collect()
}

fn round_rows(table: &Array2<f64>) -> Vec<Vec<f64>> {
    table.rows().into_iter().map(|r| r.iter().map(|&v| round12(v)).collect()).collect()
}

/// Transport problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub mu: Vec<Exact>,
    pub nu: Vec<Exact>,
    pub cost: Vec<Vec<Exact>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_labels: Option<Vec<String>>,
    /// Optional primal optimizer; solved for when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Vec<Vec<Exact>>>,
}

/// Validated transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub cost: CostMatrix,
    pub plan: Option<TransportPlan>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_problem(self) -> Result<Problem> {
        let measure = |weights: &[Exact], labels: Option<Vec<String>>| -> Result<DiscreteMeasure> {
            let w = scalars(weights)?;
            match labels {
                Some(l) => DiscreteMeasure::with_labels(l, w),
                None => DiscreteMeasure::new(w),
            }
        };
        let mu = measure(&self.mu, self.mu_labels)?;
        let nu = measure(&self.nu, self.nu_labels)?;
        let cost = CostMatrix::from_rows(self.cost.iter().map(|r| scalars(r)).collect::<Result<_>>()?)?;
        cost.check_shape(&mu, &nu)?;
        let plan = match self.plan {
            Some(rows) => Some(TransportPlan::from_rows(
                rows.iter().map(|r| scalars(r)).collect::<Result<_>>()?,
                &mu,
                &nu,
            )?),
            None => None,
        };
        Ok(Problem { mu, nu, cost, plan })
    }
}

/// Pairwise interaction between actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Interaction {
    #[default]
    None,
    /// `theta[a][j] = g[|a - j|]`.
    Toeplitz { g: Vec<f64> },
    Matrix { theta: Vec<Vec<f64>> },
}

/// Game file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub mu: Vec<f64>,
    pub cost: Vec<Vec<f64>>,
    #[serde(default = "no_congestion")]
    pub congestion: Congestion,
    #[serde(default)]
    pub interaction: Interaction,
    #[serde(rename = "K", default)]
    pub admissible: AdmissibleCosts,
    #[serde(default)]
    pub objective: Objective,
    /// Action costs for the game without a principal; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Minimum mass per action in best responses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

fn no_congestion() -> Congestion {
    Congestion::None
}

fn table(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(OtError::InvalidGame(format!("{what} must be a nonempty rectangular table")));
    }
    Ok(Array2::from_shape_fn((n, m), |(i, j)| rows[i][j]))
}

impl GameFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn spec(&self) -> Result<GameSpec> {
        let cost = table(&self.cost, "cost")?;
        let n_y = cost.ncols();
        let theta = match &self.interaction {
            Interaction::None => Array2::zeros((n_y, n_y)),
            Interaction::Toeplitz { g } => GameSpec::toeplitz(g, n_y)?,
            Interaction::Matrix { theta } => table(theta, "interaction")?,
        };
        GameSpec::new(cost, self.congestion.clone(), theta, self.admissible.clone(), self.objective.clone())
    }

    pub fn costs(&self) -> Vec<f64> {
        self.k.clone().unwrap_or_else(|| vec![0.0; self.cost.first().map_or(0, Vec::len)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub phi: Vec<String>,
    pub psi: Vec<String>,
}

impl DualReport {
    pub fn new(dual: &DualPair) -> Self {
        Self { phi: strings(&dual.phi), psi: strings(&dual.psi) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub cost: String,
    pub plan: Vec<Vec<String>>,
    pub dual: DualReport,
    pub pivots: usize,
}

impl SolveReport {
    pub fn new(solution: &TransportSolution) -> Self {
        Self {
            cost: scalar::format(&solution.cost),
            plan: solution.plan.entries().rows().into_iter().map(|r| r.iter().map(scalar::format).collect()).collect(),
            dual: DualReport::new(&solution.dual),
            pivots: solution.pivots,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub xs: Vec<String>,
    pub ys: Vec<String>,
}

fn components(partition: &ComponentPartition, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<ComponentReport> {
    partition
        .iter()
        .map(|c| ComponentReport {
            xs: c.xs.iter().map(|&i| mu.labels()[i].clone()).collect(),
            ys: c.ys.iter().map(|&j| nu.labels()[j].clone()).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub edges: Vec<(String, String)>,
    pub components: Vec<ComponentReport>,
}

impl GraphReport {
    pub fn new(g: &SupportGraph, partition: &ComponentPartition, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        Self {
            edges: g.edges().iter().map(|&(i, j)| (mu.labels()[i].clone(), nu.labels()[j].clone())).collect(),
            components: components(partition, mu, nu),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseDualReport {
    pub xs: Vec<String>,
    pub ys: Vec<String>,
    pub phi: Vec<String>,
    pub psi: Vec<String>,
}

/// One interval `lower <= alpha_n - alpha_m <= upper`; components are
/// numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub n: usize,
    pub m: usize,
    pub lower: String,
    pub upper: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeReport {
    pub unique: bool,
    pub num_components: usize,
    pub base_duals: Vec<BaseDualReport>,
    pub constraints: Vec<ConstraintReport>,
    pub union_graph: GraphReport,
}

impl PolytopeReport {
    pub fn new(
        polytope: &DualPolytope,
        union_g: &SupportGraph,
        union_partition: &ComponentPartition,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
    ) -> Self {
        let base_duals = components(polytope.partition(), mu, nu)
            .into_iter()
            .zip(polytope.base_duals())
            .map(|(c, d)| BaseDualReport { xs: c.xs, ys: c.ys, phi: strings(&d.phi), psi: strings(&d.psi) })
            .collect();
        let constraints = polytope
            .constraints()
            .iter()
            .map(|k| ConstraintReport {
                n: k.n + 1,
                m: k.m + 1,
                lower: scalar::format(&k.lower),
                upper: scalar::format(&k.upper),
            })
            .collect();
        Self {
            unique: polytope.is_dual_unique(),
            num_components: polytope.num_components(),
            base_duals,
            constraints,
            union_graph: GraphReport::new(union_g, union_partition, mu, nu),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    /// Edges between components numbered from 1, in insertion order.
    pub edges: Vec<(usize, usize)>,
    pub levels: Vec<String>,
    pub differences: Vec<String>,
    pub deltas: Vec<Vec<String>>,
    pub l_values: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidReport {
    pub dual: DualReport,
    pub alpha: Vec<String>,
    pub components: Vec<ComponentReport>,
    pub tree: TreeReport,
}

impl CentroidReport {
    pub fn new(result: &CentroidResult, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let t = &result.tree;
        Self {
            dual: DualReport::new(&result.dual),
            alpha: strings(&result.alpha),
            components: components(&result.partition, mu, nu),
            tree: TreeReport {
                edges: t.edges.iter().map(|&(a, b)| (a + 1, b + 1)).collect(),
                levels: strings(&t.levels),
                differences: strings(&t.differences),
                deltas: t.deltas.iter().map(|r| strings(r)).collect(),
                l_values: t.l_values.iter().map(|r| strings(r)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornReport {
    pub epsilon: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub plan: Vec<Vec<f64>>,
}

impl SinkhornReport {
    pub fn new(sol: &EntropicSolution) -> Self {
        Self {
            epsilon: sol.epsilon,
            phi: round_all(&sol.phi_eps),
            psi: round_all(&sol.psi_eps),
            iterations: sol.iterations,
            residual: round12(sol.residual),
            converged: sol.converged,
            plan: round_rows(&sol.plan),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub kind: EquilibriumKind,
    pub plan: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
    pub k: Vec<f64>,
    pub value: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
    pub experimental: bool,
}

impl EquilibriumReport {
    pub fn new(eq: &Equilibrium) -> Self {
        Self {
            kind: eq.kind,
            plan: round_rows(&eq.plan),
            nu: round_all(&eq.action_dist),
            k: round_all(&eq.costs),
            value: round12(eq.value),
            epsilon: eq.epsilon,
            iterations: eq.iterations,
            residual: round12(eq.residual),
            experimental: eq.experimental,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Error object printed by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: String,
    pub check: String,
    pub message: String,
}

impl ErrorReport {
    pub fn new(err: &OtError) -> Self {
        let check = match err {
            OtError::DimensionMismatch { context, .. } => context.to_string(),
            OtError::InvalidMeasure(_) => "measure".into(),
            OtError::InvalidCost(_) => "cost".into(),
            OtError::InvalidPlan(_) => "plan".into(),
            OtError::Parse(_) | OtError::Schema(_) => "schema".into(),
            OtError::UnknownAtom { .. } => "anchor".into(),
            OtError::DualInfeasible { .. } => "dual feasibility".into(),
            OtError::NotComplementary { .. } => "complementarity".into(),
            OtError::Disconnected(_) => "connectivity".into(),
            OtError::NonOptimal(_) => "optimality".into(),
            OtError::AlphaViolation { .. } => "offset constraints".into(),
            OtError::SinkhornNotConverged(_) | OtError::NotConverged { .. } => "convergence".into(),
            OtError::NumericalRange(_) => "numerical range".into(),
            OtError::BoundaryMeasure(_) => "interior".into(),
            OtError::NoAdmissibleCost(_) => "admissible costs".into(),
            OtError::InvalidGame(_) => "game".into(),
        };
        Self { error: error_kind(err).into(), check, message: err.to_string() }
    }
}

/// Coarse error class: `schema`, `instance` or `convergence`.
pub fn error_kind(err: &OtError) -> &'static str {
    match err {
        OtError::Parse(_) | OtError::Schema(_) => "schema",
        OtError::SinkhornNotConverged(_) | OtError::NotConverged { .. } => "convergence",
        _ => "instance",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_accepts_numbers_and_fractions() {
        let text = r#"{"mu": ["1/2", 0.5], "nu": [1], "cost": [[0], ["3/4"]]}"#;
        let p = ProblemFile::from_json(text).unwrap().into_problem().unwrap();
        assert_eq!(p.mu.weights()[1], scalar::ratio(1, 2));
        assert_eq!(*p.cost.get(1, 0), scalar::ratio(3, 4));
    }

    #[test]
    fn unknown_fields_are_schema_errors() {
        let err = ProblemFile::from_json(r#"{"mu": [1], "nu": [1], "cost": [[0]], "extra": 1}"#).unwrap_err();
        assert!(matches!(err, OtError::Schema(_)));
        assert_eq!(error_kind(&err), "schema");
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
    }

    #[test]
    fn game_file_defaults() {
        let g = GameFile::from_json(r#"{"mu": [1.0], "cost": [[0.0, 1.0]]}"#).unwrap();
        assert_eq!(g.admissible, AdmissibleCosts::All);
        assert_eq!(g.objective, Objective::SumOfSquares);
        assert_eq!(g.costs(), vec![0.0, 0.0]);
        assert!(g.spec().is_ok());
    }
}
