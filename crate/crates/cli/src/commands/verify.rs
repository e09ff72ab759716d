use awd_core::bicausal::{adapted_wasserstein_lp, check_metric_axioms};
use awd_core::decompose::ConstantsLedger;
use awd_core::hedging::{
    avar, optimal_avar_hedge, project_strategy, utility_maximize, verify_avar_lipschitz, verify_contraction,
    verify_shi, verify_whi, wealth_distribution, BoundReport, Claim, Strategy, UtilitySpec,
};
use awd_core::models::random::{
    random_claim, random_prefix_strategy, random_schedule, random_tree, rng, SeededRng, TreeShape,
};
use awd_core::models::{
    contraction_cex, figure1, random_walk_tree, remark51, remark53, BinomialLattice, Quantization, VolatilitySchedule,
};
use awd_core::scenario::ScenarioTree;
use awd_core::transport::wasserstein_paths;
use rand::Rng;
use serde_json::json;

use crate::args::{OutputArgs, SweepArgs, VerifyCommand};
use crate::error::{CliError, CliResult};
use crate::input;
use crate::output::{num, Report, Table};
use crate::plot::{line_plot, Series};
use crate::sweep;

const METRIC_TOL: f64 = 1e-7;
const SCALING_TOL: f64 = 1e-9;
const CEX_TOL: f64 = 1e-9;

/// The outcome of a check: a report plus, when violated, the failure to
/// exit with after the report has been written.
pub struct Verdict {
    pub report: Report,
    pub failure: Option<CliError>,
}

fn verdict(report: Report, ok: bool, what: &str) -> Verdict {
    let failure = (!ok).then(|| CliError::Assertion(format!("{what} violated")));
    Verdict { report, failure }
}

pub fn run(cmd: &VerifyCommand, out: &OutputArgs) -> CliResult<Verdict> {
    match cmd {
        VerifyCommand::Whi { sweep, k, m } => bounds("whi", sweep, |tp, tq, r| {
            let claim = random_claim(r, tp.horizon(), 2)?;
            let h = random_strategy(r, tp, *k)?;
            Ok(verify_whi(tp, tq, &h, &claim, *m, *k)?.report)
        }),
        VerifyCommand::Shi { sweep, k, m } => bounds("shi", sweep, |tp, tq, r| {
            let claim = random_claim(r, tp.horizon(), 2)?;
            let h = random_prefix_strategy(r, tp.horizon(), *k);
            Ok(verify_shi(tp, tq, &h, &claim, *m, *k)?)
        }),
        VerifyCommand::Avar { sweep, k, alpha } => bounds("avar", sweep, |tp, tq, r| {
            let claim = random_claim(r, tp.horizon(), 2)?;
            Ok(verify_avar_lipschitz(tp, tq, &claim, *k, *alpha)?)
        }),
        VerifyCommand::Contraction { sweep, k, p } => bounds("contraction", sweep, |tp, tq, r| {
            let claim = random_claim(r, tp.horizon(), 2)?;
            let h = random_strategy(r, tp, *k)?;
            Ok(verify_contraction(tp, tq, &h, &claim, *k, *p)?.report)
        }),
        VerifyCommand::Metric { p, instances, seed, trees } => metric(*p, *instances, *seed, trees),
        VerifyCommand::Scaling { steps, schedules, seed } => scaling(steps, *schedules, *seed),
        VerifyCommand::Gbm { sigma1, sigma2, horizon, steps } => gbm(*sigma1, *sigma2, *horizon, steps, out),
        VerifyCommand::Counterexamples { n, eps, k } => counterexamples(*n, *eps, *k),
    }
}

fn random_strategy(r: &mut impl Rng, tree: &ScenarioTree, k: f64) -> CliResult<Strategy> {
    Ok(Strategy::from_fn(tree, k, |_| r.gen_range(-k..=k))?)
}

fn shape(horizon: usize) -> TreeShape {
    TreeShape {
        horizon,
        max_children: 3,
        spread: 1.0,
        martingale: false,
    }
}

/// Runs one bound per instance, on the given pair of trees or on fresh
/// random pairs, drawing claims and strategies from the instance seed.
fn bounds<F>(kind: &str, args: &SweepArgs, check: F) -> CliResult<Verdict>
where
    F: Fn(&ScenarioTree, &ScenarioTree, &mut SeededRng) -> CliResult<BoundReport> + Sync,
{
    let fixed = match args.trees.as_slice() {
        [] => None,
        [a, b] => Some((input::tree(a)?, input::tree(b)?)),
        _ => return Err(CliError::Input("give two tree files or none".into())),
    };
    if fixed.is_none() && args.horizon == 0 {
        return Err(CliError::Input("--horizon must be at least 1".into()));
    }
    let reports = sweep::run(args.instances, args.seed, |_, s| {
        let mut r = rng(s);
        match &fixed {
            Some((tp, tq)) => check(tp, tq, &mut r),
            None => {
                let tp = random_tree(&mut r, shape(args.horizon));
                let tq = random_tree(&mut r, shape(args.horizon));
                check(&tp, &tq, &mut r)
            }
        }
    })?;
    let violations = reports.iter().filter(|b| !b.holds).count();
    let min_slack = reports.iter().map(|b| b.slack).fold(f64::INFINITY, f64::min);
    let mut table = Table::new(&["instance", "lhs", "rhs", "slack", "holds"]);
    for (i, b) in reports.iter().enumerate() {
        table.push(vec![i.to_string(), num(b.lhs), num(b.rhs), num(b.slack), b.holds.to_string()]);
    }
    let report = Report::new(
        json!({
            "check": kind,
            "instances": reports.len(),
            "seed": args.seed,
            "violations": violations,
            "min_slack": if reports.is_empty() { None } else { Some(min_slack) },
            "constants": ConstantsLedger::default(),
            "reports": reports,
        }),
        table,
    )?;
    Ok(verdict(report, violations == 0, kind))
}

fn metric(p: f64, instances: usize, seed: u64, files: &[std::path::PathBuf]) -> CliResult<Verdict> {
    let reports = if files.is_empty() {
        sweep::run(instances, seed, |i, s| {
            let mut r = rng(s);
            let s = TreeShape {
                horizon: r.gen_range(1..=3),
                max_children: 4,
                ..shape(1)
            };
            let mut trees: Vec<ScenarioTree> = (0..3).map(|_| random_tree(&mut r, s)).collect();
            // Every fifth triple repeats a tree under new node ids.
            if i % 5 == 0 {
                trees[2] = trees[0].renumbered();
            }
            Ok(check_metric_axioms(&trees, p)?)
        })?
    } else {
        let trees = files.iter().map(|f| input::tree(f)).collect::<CliResult<Vec<_>>>()?;
        vec![check_metric_axioms(&trees, p)?]
    };
    let symmetry_gap = reports.iter().map(|m| m.symmetry_gap).fold(0.0, f64::max);
    let triangle_slack = reports.iter().map(|m| m.triangle_slack).fold(f64::INFINITY, f64::min);
    let identity_failures: usize = reports.iter().map(|m| m.identity_failures.len()).sum();
    let mut table = Table::new(&["instance", "symmetry_gap", "identity_failures", "triangle_slack"]);
    for (i, m) in reports.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            num(m.symmetry_gap),
            m.identity_failures.len().to_string(),
            num(m.triangle_slack),
        ]);
    }
    let distances: Vec<_> = reports.iter().map(|m| &m.distances).collect();
    let ok = reports.iter().all(|m| m.holds(METRIC_TOL));
    let report = Report::new(
        json!({
            "check": "metric",
            "p": p,
            "instances": reports.len(),
            "tolerance": METRIC_TOL,
            "symmetry_gap": symmetry_gap,
            "identity_failures": identity_failures,
            "triangle_slack": triangle_slack,
            "distances": distances,
        }),
        table,
    )?;
    Ok(verdict(report, ok, "metric axioms"))
}

/// `AW_2` between binomial walks with schedules `σ, σ̂` is `(Σ (σ_n − σ̂_n)² / N)^{1/2}`.
fn scaling(steps: &[usize], schedules: usize, seed: u64) -> CliResult<Verdict> {
    let jobs: Vec<(usize, usize)> = steps.iter().flat_map(|&n| (0..schedules).map(move |j| (n, j))).collect();
    if steps.contains(&0) {
        return Err(CliError::Input("--N values must be positive".into()));
    }
    let rows = sweep::run(jobs.len(), seed, |i, s| {
        let n = jobs[i].0;
        let mut r = rng(s);
        let s1 = random_schedule(&mut r, n, 2.0);
        let s2 = random_schedule(&mut r, n, 2.0);
        let formula = (s1.iter().zip(&s2).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt();
        let walk = |s: Vec<f64>| random_walk_tree(n, &VolatilitySchedule::piecewise(s), Quantization::Binomial);
        let aw2 = adapted_wasserstein_lp(&walk(s1)?, &walk(s2)?, 2.0)?.value;
        Ok((aw2, formula))
    })?;
    let mut table = Table::new(&["N", "schedule", "aw2", "formula", "abs_err"]);
    let mut worst: f64 = 0.0;
    for (&(n, j), &(aw2, formula)) in jobs.iter().zip(&rows) {
        worst = worst.max((aw2 - formula).abs());
        table.push(vec![n.to_string(), j.to_string(), num(aw2), num(formula), num((aw2 - formula).abs())]);
    }
    let report = Report::new(
        json!({
            "check": "scaling",
            "steps": steps,
            "schedules": schedules,
            "seed": seed,
            "max_abs_err": worst,
            "tolerance": SCALING_TOL,
            "cases": rows.iter().zip(&jobs).map(|(&(aw2, formula), &(n, _))| json!({
                "N": n, "aw2": aw2, "formula": formula
            })).collect::<Vec<_>>(),
        }),
        table,
    )?;
    Ok(verdict(report, worst <= SCALING_TOL, "volatility-gap formula"))
}

fn gbm(sigma1: f64, sigma2: f64, horizon: f64, steps: &[usize], out: &OutputArgs) -> CliResult<Verdict> {
    let target = (sigma1 * sigma1 * horizon).exp() - 2.0 * (sigma1 * sigma2 * horizon).exp()
        + (sigma2 * sigma2 * horizon).exp();
    let mut table = Table::new(&["N", "sync_cost", "lattice_closed_form", "limit", "rel_err"]);
    let mut cases = Vec::new();
    let mut errors = Vec::new();
    for &n in steps {
        let a = BinomialLattice::gbm(n, sigma1, horizon)?;
        let b = BinomialLattice::gbm(n, sigma2, horizon)?;
        let sync = a.synchronous_cost_squared(&b)?;
        let closed = a.gbm_synchronous_closed_form(&b)?;
        let rel = (sync - target).abs() / target.abs();
        errors.push(rel);
        table.push(vec![n.to_string(), num(sync), num(closed), num(target), num(rel)]);
        cases.push(json!({ "N": n, "sync_cost": sync, "lattice_closed_form": closed, "rel_err": rel }));
    }
    if let Some(path) = &out.plot {
        let series = Series {
            label: "relative error".into(),
            points: steps.iter().zip(&errors).map(|(&n, &e)| (n as f64, e)).collect(),
        };
        std::fs::write(path, line_plot("Synchronous AW_2^2 against its limit", "N", "relative error", &[series]))?;
    }
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let report = Report::new(
        json!({
            "check": "gbm",
            "sigma1": sigma1,
            "sigma2": sigma2,
            "T": horizon,
            "limit": target,
            "errors_decreasing": decreasing,
            "cases": cases,
        }),
        table,
    )?;
    Ok(verdict(report, decreasing, "decreasing lattice error"))
}

fn counterexamples(n: usize, eps: f64, k: f64) -> CliResult<Verdict> {
    let mut table = Table::new(&["model", "quantity", "value"]);
    let mut row = |m: &str, q: &str, v: f64| table.push(vec![m.into(), q.into(), num(v)]);
    let w1 = |a: &ScenarioTree, b: &ScenarioTree| -> CliResult<f64> {
        Ok(wasserstein_paths(&a.to_path_law()?, &b.to_path_law()?, 1.0)?.value)
    };

    let (fp, fq) = figure1(1.0 / n.max(1) as f64);
    let f_w1 = w1(&fp, &fq)?;
    let f_aw1 = adapted_wasserstein_lp(&fp, &fq, 1.0)?.value;
    row("figure1", "w1", f_w1);
    row("figure1", "aw1", f_aw1);

    let (pn, p) = remark51(n)?;
    let r_w1 = w1(&pn, &p)?;
    let u = UtilitySpec::CappedLinear { cap: 5.0 };
    let sup_n = utility_maximize(&pn, &Claim::zero(), k, &u)?.value;
    let sup = utility_maximize(&p, &Claim::zero(), k, &u)?.value;
    let gap = (sup_n - sup).abs();
    // Every reachable wealth sits below the cap, so the gap is the drift gain.
    let derived = k * (0.5 - 1.0 / n as f64);
    let claimed = 0.9 * (u.eval(k) - u.eval(0.0));
    let r51_ok = gap <= derived + CEX_TOL;
    row("remark51", "w1", r_w1);
    row("remark51", "utility_gap", gap);
    row("remark51", "derived_gap", derived);
    row("remark51", "claimed_gap", claimed);

    let (pe, p0) = contraction_cex(eps)?;
    let d = adapted_wasserstein_lp(&pe, &p0, 2.0)?;
    let h = Strategy::from_fn(&pe, 1.0, |u| if u == pe.root() { 0.0 } else { pe.value(u).signum() })?;
    let g = project_strategy(&h, &pe, &d.coupling, &p0)?;
    let g_max = g.positions.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let cex_ok = (d.value - eps * 2f64.sqrt()).abs() <= CEX_TOL && g_max <= CEX_TOL;
    row("contraction_cex", "aw2", d.value);
    row("contraction_cex", "max_projected_position", g_max);

    let (p53, _) = remark53(eps)?;
    let alpha = 0.5;
    let bounded = optimal_avar_hedge(&p53, &Claim::zero(), k, alpha)?.value;
    let mut unbounded = Vec::new();
    for size in [1.0, 10.0, 100.0, 1000.0] {
        let s = Strategy::from_fn(&p53, size, |_| -size)?;
        unbounded.push(avar(&wealth_distribution(&p53, &s, None, 0.0)?, alpha)?);
    }
    let r53_ok = bounded.is_finite() && unbounded.windows(2).all(|w| w[1] < w[0]);
    row("remark53", "bounded_avar", bounded);
    for (i, v) in unbounded.iter().enumerate() {
        row("remark53", &format!("avar_position_1e{i}"), *v);
    }

    let report = Report::new(
        json!({
            "check": "counterexamples",
            "n": n,
            "eps": eps,
            "k": k,
            "figure1": { "w1": f_w1, "aw1": f_aw1 },
            "remark51": {
                "w1": r_w1, "utility_gap": gap, "derived_gap": derived,
                "claimed_gap": claimed, "claimed_gap_reached": gap >= claimed,
            },
            "contraction_cex": { "aw2": d.value, "expected_aw2": eps * 2f64.sqrt(), "max_projected_position": g_max },
            "remark53": { "alpha": alpha, "bounded_avar": bounded, "unbounded_avar": unbounded },
        }),
        table,
    )?;
    Ok(verdict(report, r51_ok && cex_ok && r53_ok, "counterexample checks"))
}
