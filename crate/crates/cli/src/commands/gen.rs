use awd_core::models::{counterexample_suite, drift_diffusion_tree, gbm_tree, random_walk_tree, Quantization, VolatilitySchedule};
use awd_core::scenario::ScenarioTree;
use serde_json::json;

use crate::args::{Format, GenCommand, OutputArgs, QuantArg};
use crate::error::{CliError, CliResult};
use crate::output::{self, num, Report, Table};

pub fn run(cmd: &GenCommand, out: &OutputArgs) -> CliResult<()> {
    let tree = match cmd {
        GenCommand::Walk { steps, sigma, quant, points } => {
            let schedule = match sigma.as_slice() {
                [s] => VolatilitySchedule::constant(*s),
                many if many.len() == *steps => VolatilitySchedule::piecewise(many.to_vec()),
                many => {
                    return Err(CliError::Input(format!(
                        "--sigma has {} values for {steps} steps",
                        many.len()
                    )))
                }
            };
            let q = match quant {
                QuantArg::Binomial => Quantization::Binomial,
                QuantArg::GaussHermite => Quantization::GaussHermite(*points),
            };
            random_walk_tree(*steps, &schedule, q)?
        }
        GenCommand::Gbm { steps, sigma, horizon } => gbm_tree(*steps, *sigma, *horizon)?,
        GenCommand::Diffusion { steps, sigma, mu } => {
            let mu = *mu;
            drift_diffusion_tree(*steps, &VolatilitySchedule::constant(*sigma).with_drift(move |_, _| mu))?
        }
        GenCommand::Counterexamples { n, eps, dir } => {
            std::fs::create_dir_all(dir)?;
            let mut table = Table::new(&["name", "p", "q"]);
            let mut files = Vec::new();
            for pair in counterexample_suite(*n, *eps)? {
                let p = dir.join(format!("{}_p.json", pair.name));
                let q = dir.join(format!("{}_q.json", pair.name));
                pair.p.save(&p)?;
                pair.q.save(&q)?;
                let (p, q) = (p.display().to_string(), q.display().to_string());
                table.push(vec![pair.name.clone(), p.clone(), q.clone()]);
                files.push(json!({ "name": pair.name, "p": p, "q": q }));
            }
            return output::emit(out, &Report::new(json!({ "pairs": files }), table)?);
        }
    };
    write_tree(&tree, out)
}

fn write_tree(tree: &ScenarioTree, out: &OutputArgs) -> CliResult<()> {
    match out.format {
        Format::Json => {
            let mut text = tree.to_json()?;
            text.push('\n');
            output::write(out, text.as_bytes())
        }
        Format::Csv => {
            let law = tree.to_path_law()?;
            let mut header: Vec<String> = (0..=tree.horizon()).map(|t| format!("x{t}")).collect();
            header.push("prob".into());
            let mut table = Table {
                header,
                rows: Vec::new(),
            };
            for p in &law.paths {
                let mut row: Vec<String> = p.values.iter().map(|&v| num(v)).collect();
                row.push(num(p.prob));
                table.push(row);
            }
            output::emit(out, &Report { json: json!(null), table })
        }
    }
}
