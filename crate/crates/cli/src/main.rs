//! `otduals`: batch front end over JSON problem and game files.

mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otduals::game::{self, BestResponseConfig, SearchConfig};
use otduals::io::{
    error_kind, CentroidReport, EquilibriumReport, ErrorReport, GameFile, PolytopeReport, Problem, ProblemFile,
    SinkhornReport, SolveReport,
};
use otduals::{
    centroid, characterize_duals, connected_components, sinkhorn, solve, union_graph, OtError, SinkhornConfig,
    TransportPlan,
};
use rand::SeedableRng;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "otduals", version, about = "Exact discrete optimal transport duals and equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Entropic regularization strength.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Convergence tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// 1-based atom of the first measure where potentials are pinned to zero.
    #[arg(long, global = true, default_value_t = 1)]
    anchor: usize,
    /// Seed for randomized checks and searches.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal plan, one dual optimizer and the optimal value.
    Solve { input: PathBuf },
    /// The set of all dual optimizers and the union graph.
    Duals { input: PathBuf },
    /// The small-temperature limit of the entropic dual optimizers.
    Centroid { input: PathBuf },
    /// Entropically regularized plan and potentials.
    Sinkhorn { input: PathBuf },
    /// Equilibrium of a game for fixed action costs.
    Cne { input: PathBuf },
    /// Equilibrium of a game with a cost-setting principal.
    Scne { input: PathBuf },
    /// Property checks on one problem instance.
    Validate { input: PathBuf },
}

/// Failure with the exit status it maps to.
struct Failure {
    status: u8,
    report: ErrorReport,
}

impl From<OtError> for Failure {
    fn from(err: OtError) -> Self {
        let status = match error_kind(&err) {
            "schema" => 1,
            "convergence" => 3,
            _ => 2,
        };
        Self { status, report: ErrorReport::new(&err) }
    }
}

fn usage(check: &str, message: String) -> Failure {
    Failure { status: 1, report: ErrorReport { error: "schema".into(), check: check.into(), message } }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage("input", format!("{}: {e}", path.display())))
}

fn positive(value: Option<f64>, name: &str, default: f64) -> Result<f64, Failure> {
    match value {
        Some(v) if !(v.is_finite() && v > 0.0) => Err(usage(name, format!("--{name} must be positive, got {v}"))),
        Some(v) => Ok(v),
        None => Ok(default),
    }
}

struct Context {
    epsilon: Option<f64>,
    tol: Option<f64>,
    anchor: usize,
    seed: u64,
}

impl Context {
    fn anchor(&self, problem: &Problem) -> Result<usize, Failure> {
        if self.anchor == 0 || self.anchor > problem.mu.len() {
            return Err(usage("anchor", format!("--anchor must be in 1..={}", problem.mu.len())));
        }
        Ok(self.anchor - 1)
    }
}

fn load_problem(path: &PathBuf) -> Result<Problem, Failure> {
    Ok(ProblemFile::from_json(&read(path)?)?.into_problem()?)
}

fn optimal_plan(problem: &Problem) -> Result<TransportPlan, Failure> {
    Ok(match &problem.plan {
        Some(plan) => plan.clone(),
        None => solve(&problem.mu, &problem.nu, &problem.cost)?.plan,
    })
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let ctx = Context {
        epsilon: cli.epsilon.map(|e| positive(Some(e), "epsilon", 0.0)).transpose()?,
        tol: cli.tol.map(|t| positive(Some(t), "tol", 0.0)).transpose()?,
        anchor: cli.anchor,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Solve { input } => {
            let p = load_problem(input)?;
            let x0 = ctx.anchor(&p)?;
            let mut sol = solve(&p.mu, &p.nu, &p.cost)?;
            sol.dual = sol.dual.normalized(x0);
            Ok(json(&SolveReport::new(&sol)))
        }
        Command::Duals { input } => {
            let p = load_problem(input)?;
            let x0 = ctx.anchor(&p)?;
            let plan = optimal_plan(&p)?;
            let polytope = characterize_duals(&plan, &p.mu, &p.nu, &p.cost, x0)?;
            let dual = polytope.assemble_dual(&polytope.reference_alpha())?;
            let g = union_graph(&plan, &dual, &p.mu, &p.nu, &p.cost)?;
            let parts = connected_components(&g);
            Ok(json(&PolytopeReport::new(&polytope, &g, &parts, &p.mu, &p.nu)))
        }
        Command::Centroid { input } => {
            let p = load_problem(input)?;
            let x0 = ctx.anchor(&p)?;
            let plan = optimal_plan(&p)?;
            let result = centroid(&plan, &p.mu, &p.nu, &p.cost, x0)?;
            Ok(json(&CentroidReport::new(&result, &p.mu, &p.nu)))
        }
        Command::Sinkhorn { input } => {
            let p = load_problem(input)?;
            let x0 = ctx.anchor(&p)?;
            let mut config = SinkhornConfig::new(ctx.epsilon.unwrap_or(1e-2)).with_anchor(x0);
            if let Some(tol) = ctx.tol {
                config = config.with_tol(tol);
            }
            let sol = sinkhorn(&p.mu, &p.nu, &p.cost, &config)?;
            Ok(json(&SinkhornReport::new(&sol)))
        }
        Command::Cne { input } => {
            let file = GameFile::from_json(&read(input)?)?;
            let spec = file.spec()?;
            let mut config = BestResponseConfig::default();
            config.epsilon = ctx.epsilon.or(file.epsilon).unwrap_or(config.epsilon);
            config.tol = ctx.tol.unwrap_or(config.tol);
            config.floor = file.floor.unwrap_or(0.0);
            let eq = game::solve_cne(&spec, &file.mu, &file.costs(), &config)?;
            Ok(json(&EquilibriumReport::new(&eq)))
        }
        Command::Scne { input } => {
            let file = GameFile::from_json(&read(input)?)?;
            let spec = file.spec()?;
            let epsilon = ctx.epsilon.or(file.epsilon).unwrap_or(1e-2);
            let eq = if spec.objective().is_k_independent() {
                game::solve_scne_k_independent(&spec, &file.mu, epsilon)?
            } else {
                let mut rng = rand::rngs::StdRng::seed_from_u64(ctx.seed);
                game::search_scne(&spec, &file.mu, &SearchConfig::default(), &mut rng)?
            };
            Ok(json(&EquilibriumReport::new(&eq)))
        }
        Command::Validate { input } => {
            let p = load_problem(input)?;
            let x0 = ctx.anchor(&p)?;
            let report = validate::run(&p, x0, ctx.epsilon.unwrap_or(1e-1), ctx.seed)?;
            let passed = report.passed;
            let text = json(&report);
            if passed {
                Ok(text)
            } else {
                Err(Failure {
                    status: 2,
                    report: ErrorReport {
                        error: "instance".into(),
                        check: report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect::<Vec<_>>().join(", "),
                        message: text,
                    },
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let status = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(status);
        }
    };
    let result = run(&cli).and_then(|text| match &cli.output {
        Some(path) => std::fs::write(path, &text).map_err(|e| usage("output", format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            println!("{}", json(&failure.report).trim_end());
            ExitCode::from(failure.status)
        }
    }
}
