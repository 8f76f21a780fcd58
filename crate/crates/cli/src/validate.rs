//! Property checks on a single problem instance.

use otduals::io::{CheckResult, ValidationReport};
use otduals::{
    centroid, characterize_duals, connected_components, is_complementary, is_dual_optimizer, sinkhorn, solve,
    union_graph, OtError, SinkhornConfig,
};
use rand::SeedableRng;

use otduals::io::Problem;

const SAMPLES: usize = 32;

fn check(name: &str, passed: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult { name: name.into(), passed, detail: detail.into() }
}

pub fn run(p: &Problem, x0: usize, epsilon: f64, seed: u64) -> Result<ValidationReport, OtError> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let sol = solve(&p.mu, &p.nu, &p.cost)?;
    let gap = &sol.cost - sol.dual.value(&p.mu, &p.nu);
    checks.push(check("zero duality gap", gap == otduals::scalar::int(0), format!("primal minus dual = {gap}")));
    checks.push(check(
        "complementarity",
        sol.dual.is_feasible(&p.cost) && is_complementary(&sol.plan, &sol.dual, &p.cost)?,
        "simplex plan and dual",
    ));

    let plan = p.plan.clone().unwrap_or_else(|| sol.plan.clone());
    let polytope = characterize_duals(&plan, &p.mu, &p.nu, &p.cost, x0)?;
    let reference = polytope.assemble_dual(&polytope.reference_alpha())?;
    let g = union_graph(&plan, &reference, &p.mu, &p.nu, &p.cost)?;

    let mut round_trip = true;
    let mut tight_set = true;
    for _ in 0..SAMPLES {
        let alpha = polytope.sample_alpha(&mut rng);
        let dual = polytope.assemble_dual(&alpha)?;
        round_trip &= is_dual_optimizer(&dual, &p.cost, &g) && polytope.recover_alpha(&dual)? == alpha;
        if polytope.strict_interior_test(&alpha) {
            tight_set &= dual.tight_cells(&p.cost).into_iter().eq(g.edges().iter().copied());
        }
    }
    checks.push(check("sampled offsets give dual optimizers", round_trip, format!("{SAMPLES} samples")));
    checks.push(check("interior offsets are tight exactly on the union graph", tight_set, format!("{SAMPLES} samples")));

    let lp_alpha = polytope.recover_alpha(&sol.dual.normalized(x0));
    checks.push(check(
        "simplex dual has feasible offsets",
        lp_alpha.as_ref().is_ok_and(|a| polytope.contains(a)),
        "offsets read off the simplex dual",
    ));
    let connected = connected_components(&g).len() == 1;
    checks.push(check(
        "uniqueness iff union graph connected",
        polytope.is_dual_unique() == connected,
        format!("unique = {}, connected = {connected}", polytope.is_dual_unique()),
    ));

    let cen = centroid(&plan, &p.mu, &p.nu, &p.cost, x0)?;
    let cen_alpha = polytope.recover_alpha(&cen.dual);
    checks.push(check(
        "centroid is a dual optimizer",
        is_dual_optimizer(&cen.dual, &p.cost, &g) && cen_alpha.is_ok() && cen.tree.is_spanning_tree(),
        "exact check against the union graph",
    ));

    let config = SinkhornConfig::new(epsilon).with_anchor(x0);
    let ent = sinkhorn(&p.mu, &p.nu, &p.cost, &config)?;
    let c = p.cost.to_f64();
    let gibbs = ent
        .log_plan
        .indexed_iter()
        .map(|((x, y), l)| (epsilon * l + c[(x, y)] - ent.phi_eps[x] - ent.psi_eps[y]).abs())
        .fold(0.0, f64::max);
    checks.push(check(
        "entropic plan has Gibbs form",
        ent.residual <= config.tol && gibbs <= 1e-9,
        format!("marginal residual {:e}, Gibbs residual {gibbs:e}", ent.residual),
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { seed, passed, checks })
}
