use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use simon_learn::optimize::{
    genetic_search, gradient_descent, simon_point, GaConfig, GdConfig, GeneticSearch, Trajectory,
};
use simon_learn::postprocess::train_table;
use simon_learn::{
    BitString, CircuitLayout, CostReport, GateFamily, LookupTable, Pipeline, PostProcessor,
    TrainingSet,
};

use crate::config::{OptimizerChoice, TABLE_SEED_SALT};
use crate::output::{out_dir, write_csv, write_json, Meta};
use crate::{CliError, LayoutChoice, RunConfig};

/// Secrets whose success probabilities differ by less than this count as equal.
pub const GENERALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Generalization {
    pub per_secret: BTreeMap<BitString, f64>,
    pub spread: f64,
    pub equal_within_tol: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalParams {
    pub params: Vec<f64>,
    pub cost: f64,
    pub grad_norm: f64,
    pub converged: bool,
    /// Cost of the all-`pi/4` point on the same pipeline, for restricted gates.
    pub simon_point_cost: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub layout: CircuitLayout,
    pub trajectory: Trajectory,
    pub result: FinalParams,
    pub report: CostReport,
    pub generalization: Generalization,
    pub table: Option<LookupTable>,
}

fn random_init(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// Hill-climbs the table at fixed circuit parameters.
fn improve_table(
    pipeline: &Pipeline,
    table: &LookupTable,
    params: &[f64],
    steps: usize,
    seed: u64,
) -> LookupTable {
    let mut probe = pipeline.clone();
    let cost = |t: &LookupTable| match probe.set_post(&PostProcessor::Table(t.clone())) {
        Ok(()) => probe.total(params).unwrap_or(f64::NAN),
        Err(_) => f64::NAN,
    };
    train_table(table, cost, steps, seed).0
}

fn run_gd(
    cfg: &RunConfig,
    pipeline: &mut Pipeline,
    post: &mut PostProcessor,
    gd: &GdConfig,
) -> Result<Trajectory, CliError> {
    let dim = pipeline.num_params();
    let init = match &cfg.init {
        Some(v) if v.len() != dim => {
            return Err(CliError::Usage(format!(
                "init has {} values, layout needs {dim}",
                v.len()
            )))
        }
        Some(v) => v.clone(),
        None => random_init(dim, cfg.seed),
    };
    let traj = gradient_descent(&pipeline.objective(), &init, gd)?;
    if let PostProcessor::Table(t) = post {
        *t = improve_table(
            pipeline,
            t,
            &traj.last().params,
            cfg.table_steps,
            cfg.seed ^ TABLE_SEED_SALT,
        );
        pipeline.set_post(post)?;
    }
    Ok(traj)
}

fn run_ga(
    cfg: &RunConfig,
    pipeline: &mut Pipeline,
    post: &mut PostProcessor,
    ga: &GaConfig,
) -> Result<Trajectory, CliError> {
    let dim = pipeline.num_params();
    if !matches!(post, PostProcessor::Table(_)) {
        return Ok(genetic_search(&pipeline.objective(), dim, ga)?.trajectory());
    }
    if ga.generations == 0 {
        return Err(CliError::Usage(
            "genetic search needs at least one generation".into(),
        ));
    }
    // One generation, then table swaps at the best-ever parameters, repeated.
    let mut search = GeneticSearch::new(dim, ga.clone())?;
    for g in 0..ga.generations {
        search.step(&pipeline.objective())?;
        let best = search.best().expect("a generation has run").params.clone();
        if let PostProcessor::Table(t) = post {
            let seed = (cfg.seed ^ TABLE_SEED_SALT).wrapping_add(g as u64);
            *t = improve_table(pipeline, t, &best, cfg.table_steps, seed);
        }
        pipeline.set_post(post)?;
        search.rescore(&pipeline.objective())?;
    }
    Ok(search.finish()?.trajectory())
}

fn generalization(
    cfg: &RunConfig,
    layout: &CircuitLayout,
    post: &PostProcessor,
    params: &[f64],
) -> Result<Generalization, CliError> {
    let all = TrainingSet::canonical(
        cfg.n,
        cfg.j(),
        &TrainingSet::all_secrets(cfg.n),
        cfg.oracles_per_secret,
        cfg.seed,
    )?;
    let per_secret = Pipeline::new(layout.clone(), all, post)?.success_by_secret(params)?;
    let max = per_secret
        .values()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = per_secret.values().copied().fold(f64::INFINITY, f64::min);
    let spread = max - min;
    Ok(Generalization {
        per_secret,
        spread,
        equal_within_tol: spread <= GENERALIZATION_TOL,
    })
}

/// Trains the configured layout and writes the trajectory, final parameters,
/// cost report, generalization report and (for table post-processing) the table.
pub fn cmd_train(cfg: &RunConfig, w: &mut dyn Write) -> Result<TrainSummary, CliError> {
    let default_layout = if cfg.n >= 3 {
        LayoutChoice::Fig6
    } else {
        LayoutChoice::Fig4
    };
    let layout = cfg.layout_with_default(default_layout)?;
    let training = cfg.training_set(&cfg.secrets())?;
    let mut post = cfg.initial_post()?;
    let mut pipeline = Pipeline::new(layout.clone(), training, &post)?;

    let trajectory = match cfg.optimizer_for(&layout) {
        OptimizerChoice::Gd(gd) => run_gd(cfg, &mut pipeline, &mut post, &gd)?,
        OptimizerChoice::Ga(ga) => run_ga(cfg, &mut pipeline, &mut post, &ga)?,
    };
    let last = trajectory.last().clone();
    let report = pipeline.report(&last.params)?;
    if !report.total.is_finite() {
        return Err(CliError::Numerical(format!(
            "final cost is {}",
            report.total
        )));
    }
    let simon_point_cost = match cfg.gate_family {
        GateFamily::Restricted => Some(pipeline.total(&simon_point(pipeline.num_params()))?),
        _ => None,
    };
    let result = FinalParams {
        params: last.params.clone(),
        cost: report.total,
        grad_norm: last.grad_norm,
        converged: trajectory.converged,
        simon_point_cost,
    };
    let generalization = generalization(cfg, &layout, &post, &last.params)?;
    let table = match &post {
        PostProcessor::Table(t) => Some(t.clone()),
        PostProcessor::Gf2 => None,
    };

    let dir = out_dir(cfg)?;
    let meta = Meta::new("train", cfg, &layout.name);
    write_csv(&dir, "trajectory.csv", &meta, &trajectory.to_csv())?;
    write_json(&dir, "params.json", &meta, &result)?;
    write_json(&dir, "cost_report.json", &meta, &report)?;
    write_json(&dir, "generalization.json", &meta, &generalization)?;
    if let Some(t) = &table {
        write_json(
            &dir,
            "table.json",
            &meta,
            &serde_json::json!({ "table": t }),
        )?;
    }

    write!(
        w,
        "train {}: final cost {} after {} points",
        layout.name,
        result.cost,
        trajectory.points.len()
    )?;
    if let Some(c) = simon_point_cost {
        write!(w, " (simon point {c})")?;
    }
    writeln!(w)?;
    writeln!(
        w,
        "generalization spread {} equal_within_tol={}",
        generalization.spread, generalization.equal_within_tol
    )?;
    Ok(TrainSummary {
        layout,
        trajectory,
        result,
        report,
        generalization,
        table,
    })
}
