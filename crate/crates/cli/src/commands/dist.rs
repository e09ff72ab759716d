use awd_core::bicausal::{
    adapted_wasserstein_dp, adapted_wasserstein_lp, adapted_wasserstein_lp_with, synchronous_distance, LpOptions,
    StageCost,
};
use awd_core::decompose::seminorm;
use awd_core::hedging::{conditional_gain_defect, project_strategy, Strategy};
use awd_core::transport::{wasserstein, wasserstein_paths, weak_ot, Backend, WeakMethod};
use serde_json::json;

use crate::args::{BackendArg, DistArgs, Method, PairP, ProjectArgs, SeminormArgs, WassArgs};
use crate::commands::strategy_json;
use crate::error::CliResult;
use crate::input;
use crate::output::{num, Report, Table};

pub fn dist(args: &DistArgs) -> CliResult<Report> {
    let tp = input::tree(&args.first)?;
    let tq = input::tree(&args.second)?;
    let d = match args.method {
        Method::Lp => {
            let backend = match args.backend {
                BackendArg::Auto => Backend::Auto,
                BackendArg::Dense => Backend::Dense,
                BackendArg::Sparse => Backend::Sparse,
            };
            adapted_wasserstein_lp_with(&tp, &tq, args.p, LpOptions { backend, ..Default::default() })?
        }
        Method::Dp => adapted_wasserstein_dp(&tp, &tq, &StageCost::Adapted { p: args.p })?,
        Method::Sync => synchronous_distance(&tp, &tq, args.p)?,
    };
    if let Some(path) = &args.coupling {
        std::fs::write(path, d.coupling.to_csv(&tp, &tq))?;
    }
    let check = d.coupling.check(&tp, &tq);
    let method = format!("{:?}", args.method).to_lowercase();
    Report::scalars(json!({
        "p": args.p,
        "method": method,
        "value": d.value,
        "cost": d.cost,
        "leaves_p": d.coupling.leaves_p.len(),
        "leaves_q": d.coupling.leaves_q.len(),
        "bicausality_defect": check.worst(),
    }))
}

pub fn wass(args: &WassArgs) -> CliResult<Report> {
    let tp = input::tree(&args.first)?;
    let tq = input::tree(&args.second)?;
    let t = if args.terminal {
        wasserstein(&input::terminal_law(&tp)?, &input::terminal_law(&tq)?, args.p)?
    } else {
        wasserstein_paths(&tp.to_path_law()?, &tq.to_path_law()?, args.p)?
    };
    Report::scalars(json!({
        "p": args.p,
        "terminal": args.terminal,
        "value": t.value,
        "cost": t.cost,
    }))
}

pub fn weak(args: &PairP) -> CliResult<Report> {
    let mu = input::distribution(&args.first)?;
    let nu = input::distribution(&args.second)?;
    let w = weak_ot(&mu, &nu, args.p)?;
    Report::scalars(json!({
        "p": args.p,
        "value": w.value,
        "cost": w.cost,
        "method": match w.method {
            WeakMethod::Lp => "lp",
            WeakMethod::FrankWolfe => "frank_wolfe",
            WeakMethod::Exhaustive => "exhaustive",
        },
        "iterations": w.iterations,
        "gap": w.gap,
    }))
}

pub fn seminorm_cmd(args: &SeminormArgs) -> CliResult<Report> {
    let t = input::tree(&args.tree)?;
    Report::scalars(json!({ "p": args.p, "value": seminorm(&t, args.p)? }))
}

pub fn project(args: &ProjectArgs) -> CliResult<Report> {
    let tp = input::tree(&args.first)?;
    let tq = input::tree(&args.second)?;
    let h = Strategy::from_json(&tp, &std::fs::read_to_string(&args.strategy)?)?;
    let d = adapted_wasserstein_lp(&tp, &tq, args.p)?;
    let g = project_strategy(&h, &tp, &d.coupling, &tq)?;
    let defect = conditional_gain_defect(&h, &g, &tp, &d.coupling, &tq)?;
    let mut table = Table::new(&["node", "position"]);
    for u in tq.preorder().into_iter().filter(|&u| !tq.is_leaf(u)) {
        table.push(vec![tq.node_name(u), num(g.positions[u])]);
    }
    Report::new(
        json!({
            "p": args.p,
            "distance": d.value,
            "conditional_gain_defect": defect,
            "projected": strategy_json(&g, &tq)?,
        }),
        table,
    )
}
