use std::fs;

use rayon::prelude::*;

use mhdiff_core::datamodel::{build_blocks, BlockMatrices};
use mhdiff_core::engine::{self, RunOptions, StrategyConfig, StrategyKind};
use mhdiff_core::io::write_plan;
use mhdiff_core::msd::{self, MsdBounds};
use mhdiff_core::optimizer::{verify_feasible, Budgets, Method, NeighborSelection, Plan, Variant};
use mhdiff_core::scenario::Experiment;
use mhdiff_core::trace::MsdTrace;
use mhdiff_core::weights::balancing_weights;

use crate::output::{field, print_table, short, slug, Scale, Table};
use crate::{Common, Failure};

const THEORY_TOL: f64 = 1e-12;

/// Loads the scenario with the command-line overrides applied. A single
/// `--budgets` value replaces the planning network budget unless the command
/// sweeps over the list.
fn load(c: &Common, sweeps: bool) -> Result<Experiment, Failure> {
    let network_budget = match (&c.budgets, sweeps) {
        (Some(b), false) if b.len() == 1 => Some(b[0]),
        (Some(_), false) => return Err(Failure::config("--budgets takes a single value for this command")),
        _ => None,
    };
    if let Some(b) = network_budget {
        if !(b >= 0.0) {
            return Err(Failure::config(format!("budgets must be nonnegative, got {b}")));
        }
    }
    let exp = Experiment::load_with(&c.config, |f| {
        if let Some(s) = c.seed {
            f.seed = s;
        }
        if let Some(r) = c.runs {
            f.runs = r;
        }
        if let Some(i) = c.iters {
            f.iters = i;
        }
        if let Some(b) = network_budget {
            f.planning.network_budget = Some(b);
        }
    })?;
    fs::create_dir_all(&c.out_dir).map_err(|e| Failure::config(format!("{}: {e}", c.out_dir.display())))?;
    Ok(exp)
}

fn variant_method(c: &Common, exp: &Experiment) -> (Variant, Method) {
    (c.variant.unwrap_or_else(|| exp.variant()), c.method.unwrap_or_else(|| exp.method()))
}

/// `--budgets`, else the scenario sweep, else `fallback`.
fn budget_list(c: &Common, exp: &Experiment, fallback: Option<f64>) -> Result<Vec<f64>, Failure> {
    let mut list = match &c.budgets {
        Some(b) => b.clone(),
        None => exp.sweep(),
    };
    if list.is_empty() {
        list.extend(fallback);
    }
    if list.is_empty() {
        return Err(Failure::config("no budgets: pass --budgets or add a [sweep] table"));
    }
    if let Some(b) = list.iter().find(|b| !(**b >= 0.0)) {
        return Err(Failure::config(format!("budgets must be nonnegative, got {b}")));
    }
    list.sort_by(f64::total_cmp);
    list.dedup();
    Ok(list)
}

fn report_balance(exp: &Experiment) {
    println!("alpha = {}  beta = {}", exp.balance.alpha, exp.balance.beta);
}

struct Theory {
    trace: MsdTrace,
    steady: f64,
    bounds: MsdBounds,
}

fn theory_for(
    exp: &Experiment,
    blocks: &BlockMatrices,
    cfg: &StrategyConfig,
    iters: usize,
) -> Result<Option<Theory>, Failure> {
    let Some(a) = engine::static_weights(&exp.model, &exp.net, cfg)? else {
        return Ok(None);
    };
    let dynamics = msd::build_dynamics(&a, blocks, &exp.model.w_true)?;
    let steady = msd::steady_state_msd(&dynamics, THEORY_TOL)?;
    let trace = msd::transient_msd(&dynamics, iters)?;
    Ok(Some(Theory { trace, steady, bounds: msd::msd_bounds(&dynamics, blocks) }))
}

fn plan_steady(exp: &Experiment, blocks: &BlockMatrices, sel: &NeighborSelection) -> Result<f64, Failure> {
    let a = balancing_weights(&sel.consults, &exp.gammas())?;
    let dynamics = msd::build_dynamics(&a, blocks, &exp.model.w_true)?;
    Ok(msd::steady_state_msd(&dynamics, THEORY_TOL)?)
}

fn checked_plan(exp: &Experiment, variant: Variant, method: Method, budgets: &Budgets) -> Result<Plan, Failure> {
    let plan = exp.plan(variant, method, budgets)?;
    let report = verify_feasible(&plan.selection, &exp.net, budgets, variant);
    if !report.is_feasible() {
        return Err(Failure::infeasible(format!("{method} plan violates {}", report.violations.join("; "))));
    }
    Ok(plan)
}

pub fn simulate(c: &Common) -> Result<(), Failure> {
    let exp = load(c, false)?;
    let scale = Scale { linear: c.linear };
    let opts = exp.run_options()?;
    let blocks = build_blocks(&exp.model);
    report_balance(&exp);
    let header: Vec<String> = vec![
        "strategy".into(),
        scale.column("steady_msd", ""),
        scale.column("steady_msd", "_theory"),
        "convergence_rate".into(),
        "iterations_to_90".into(),
        "energy_to_90".into(),
        "energy_per_iter".into(),
    ];
    let mut summary = Table::create(&c.out_dir, "summary.csv", &header)?;
    let mut console = Vec::new();
    for (label, cfg) in exp.strategies()? {
        let sim = engine::run_detailed(&exp.model, &exp.net, &cfg, &opts)?;
        // the closed forms describe an unchanging scenario
        let theory = if opts.events.is_empty() { theory_for(&exp, &blocks, &cfg, opts.iters)? } else { None };
        let mut trace = Table::create(
            &c.out_dir,
            &format!("trace_{}.csv", slug(&label)),
            &["iteration".into(), scale.column("msd", "_sim"), scale.column("msd", "_theory"), "energy_cum".into()],
        )?;
        for (i, e) in sim.trace.cumulative_energy().into_iter().enumerate() {
            trace.row(&[
                i.to_string(),
                scale.field(Some(sim.trace.msd[i])),
                scale.field(theory.as_ref().map(|t| t.trace.msd[i])),
                e.to_string(),
            ])?;
        }
        trace.finish()?;
        let t = &sim.trace;
        let steady = t.steady_state();
        let rate = t.convergence_rate().ok();
        let energy_per_iter = t.energy.iter().sum::<f64>() / t.len() as f64;
        let row = vec![
            label.clone(),
            scale.field(Some(steady)),
            scale.field(theory.as_ref().map(|t| t.steady)),
            field(rate),
            t.iterations_to_90().ok().map(|x| x.to_string()).unwrap_or_default(),
            field(t.energy_to_90().ok()),
            energy_per_iter.to_string(),
        ];
        summary.row(&row)?;
        console.push(vec![
            label,
            short(Some(scale.value(steady))),
            short(theory.as_ref().map(|t| scale.value(t.steady))),
            short(rate),
            short(t.energy_to_90().ok()),
            short(Some(energy_per_iter)),
        ]);
    }
    summary.finish()?;
    let (steady_col, theory_col) = (scale.column("steady_msd", ""), scale.column("steady_msd", "_theory"));
    print_table(
        &["strategy", &steady_col, &theory_col, "rate_db_per_iter", "energy_to_90", "energy_per_iter"],
        &console,
    );
    Ok(())
}

pub fn optimize(c: &Common) -> Result<(), Failure> {
    let exp = load(c, false)?;
    let (variant, method) = variant_method(c, &exp);
    let budgets = exp.budgets();
    let plan = checked_plan(&exp, variant, method, &budgets)?;
    let name = format!("plan_{variant}_{method}.toml");
    let path = c.out_dir.join(&name);
    fs::write(&path, write_plan(&plan)).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let sel = &plan.selection;
    let steady = plan_steady(&exp, &build_blocks(&exp.model), sel)?;
    let scale = Scale { linear: c.linear };
    report_balance(&exp);
    println!("variant {variant}, method {method}, network budget {}", budgets.network);
    println!("objective {}", sel.objective);
    println!("lp bound {}", plan.lp_bound);
    if method == Method::Exact {
        println!("nodes explored {}", plan.nodes_explored);
    }
    println!("broadcasts per iteration {}, energy per iteration {}", sel.broadcasts(), sel.total_cost);
    println!("{} {}", scale.column("steady_msd", "_theory"), scale.value(steady));
    println!("wrote {}", path.display());
    Ok(())
}

pub fn tradeoff(c: &Common) -> Result<(), Failure> {
    let exp = load(c, true)?;
    let (variant, method) = variant_method(c, &exp);
    let list = budget_list(c, &exp, None)?;
    let blocks = build_blocks(&exp.model);
    let base = exp.budgets();
    let planned = list
        .par_iter()
        .map(|&b| {
            let budgets = Budgets { local: base.local.clone(), network: b };
            let plan = checked_plan(&exp, variant, method, &budgets)?;
            let steady = plan_steady(&exp, &blocks, &plan.selection)?;
            Ok((b, plan, steady))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let scale = Scale { linear: c.linear };
    let opts = RunOptions::new(exp.file.iters, exp.file.runs, exp.file.seed);
    let mut out = Table::create(
        &c.out_dir,
        "tradeoff.csv",
        &[
            "budget".into(),
            scale.column("steady_msd", ""),
            "convergence_rate".into(),
            "objective".into(),
            "broadcasts".into(),
            "energy_per_iter".into(),
        ],
    )?;
    let mut console = Vec::new();
    for (b, plan, steady) in planned {
        let sel = plan.selection;
        let cfg = StrategyConfig::new(StrategyKind::Matc).with_balance(exp.balance).with_plan(sel.clone());
        let rate = engine::run(&exp.model, &exp.net, &cfg, &opts)?.convergence_rate().ok();
        out.row(&[
            b.to_string(),
            scale.field(Some(steady)),
            field(rate),
            sel.objective.to_string(),
            sel.broadcasts().to_string(),
            sel.total_cost.to_string(),
        ])?;
        console.push(vec![
            b.to_string(),
            short(Some(scale.value(steady))),
            short(rate),
            short(Some(sel.objective)),
            sel.broadcasts().to_string(),
        ]);
    }
    out.finish()?;
    let steady_col = scale.column("steady_msd", "");
    print_table(&["budget", &steady_col, "rate_db_per_iter", "objective", "broadcasts"], &console);
    Ok(())
}

pub fn theory(c: &Common) -> Result<(), Failure> {
    let exp = load(c, false)?;
    let scale = Scale { linear: c.linear };
    let blocks = build_blocks(&exp.model);
    let iters = exp.file.iters;
    report_balance(&exp);
    let mut summary = Table::create(
        &c.out_dir,
        "theory_summary.csv",
        &[
            "strategy".into(),
            scale.column("steady_msd", ""),
            scale.column("bound_bar", ""),
            scale.column("bound_a", ""),
            scale.column("bound_b", ""),
            "alpha".into(),
            "beta".into(),
        ],
    )?;
    let mut console = Vec::new();
    for (label, cfg) in exp.strategies()? {
        let Some(th) = theory_for(&exp, &blocks, &cfg, iters)? else {
            log::info!("strategy {label} has no closed-form curve; skipped");
            continue;
        };
        let mut trace = Table::create(
            &c.out_dir,
            &format!("theory_{}.csv", slug(&label)),
            &["iteration".into(), scale.column("msd", "_theory")],
        )?;
        for (i, &x) in th.trace.msd.iter().enumerate() {
            trace.row(&[i.to_string(), scale.field(Some(x))])?;
        }
        trace.finish()?;
        let b = th.bounds;
        summary.row(&[
            label.clone(),
            scale.field(Some(th.steady)),
            scale.field(Some(b.msd_bar)),
            scale.field(Some(b.msd_a)),
            scale.field(Some(b.msd_b)),
            exp.balance.alpha.to_string(),
            exp.balance.beta.to_string(),
        ])?;
        console.push(vec![
            label,
            short(Some(scale.value(th.steady))),
            short(Some(scale.value(b.msd_bar))),
            short(Some(scale.value(b.msd_a))),
            short(Some(scale.value(b.msd_b))),
        ]);
    }
    summary.finish()?;
    let cols = ["steady_msd", "bound_bar", "bound_a", "bound_b"].map(|s| scale.column(s, ""));
    print_table(&["strategy", &cols[0], &cols[1], &cols[2], &cols[3]], &console);
    Ok(())
}

pub fn compare(c: &Common) -> Result<(), Failure> {
    let exp = load(c, true)?;
    let variant = c.variant.unwrap_or_else(|| exp.variant());
    let base = exp.budgets();
    let list = budget_list(c, &exp, Some(base.network))?;
    let gammas = exp.gammas();
    let diagonal = NeighborSelection::non_cooperative(&exp.net, &gammas).objective;
    let rows = list
        .par_iter()
        .map(|&b| {
            let budgets = Budgets { local: base.local.clone(), network: b };
            let exact = checked_plan(&exp, variant, Method::Exact, &budgets)?;
            let rounded = checked_plan(&exp, variant, Method::Algorithm1, &budgets)?;
            Ok((b, exact, rounded))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let mut out = Table::create(
        &c.out_dir,
        "compare.csv",
        &[
            "budget",
            "exact_objective",
            "algorithm1_objective",
            "lp_bound",
            "diagonal_objective",
            "algorithm1_gap",
            "exact_nodes",
            "exact_energy",
            "algorithm1_energy",
        ]
        .map(String::from),
    )?;
    let mut console = Vec::new();
    for (b, exact, rounded) in rows {
        let (e, r) = (&exact.selection, &rounded.selection);
        let gap = r.objective / e.objective - 1.0;
        out.row(&[
            b.to_string(),
            e.objective.to_string(),
            r.objective.to_string(),
            exact.lp_bound.to_string(),
            diagonal.to_string(),
            gap.to_string(),
            exact.nodes_explored.to_string(),
            e.total_cost.to_string(),
            r.total_cost.to_string(),
        ])?;
        console.push(vec![
            b.to_string(),
            short(Some(e.objective)),
            short(Some(r.objective)),
            short(Some(exact.lp_bound)),
            short(Some(gap)),
            exact.nodes_explored.to_string(),
        ]);
    }
    out.finish()?;
    println!("variant {variant}, diagonal objective {diagonal}");
    print_table(&["budget", "exact", "algorithm1", "lp_bound", "gap", "nodes"], &console);
    Ok(())
}
