//! Finite-difference gradient descent, gradient-assisted genetic search and
//! two-parameter cost landscapes.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Pipeline;

/// Gradient norm below which a trajectory counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Which parameters wrap modulo `2 pi` after an update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Periodicity {
    #[default]
    All,
    None,
    Mask(Vec<bool>),
}

impl Periodicity {
    fn wraps(&self, i: usize) -> bool {
        match self {
            Periodicity::All => true,
            Periodicity::None => false,
            Periodicity::Mask(m) => m.get(i).copied().unwrap_or(true),
        }
    }

    fn wrap(&self, params: &mut [f64]) {
        for (i, p) in params.iter_mut().enumerate() {
            if self.wraps(i) {
                *p = p.rem_euclid(TAU);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    /// Step size, `> 0` (zero allowed as a no-op).
    pub eta: f64,
    pub steps: usize,
    /// Central-difference half step.
    pub fd_epsilon: f64,
    pub periodicity: Periodicity,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            steps: 100,
            fd_epsilon: 1e-5,
            periodicity: Periodicity::All,
        }
    }
}

impl GdConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::usage(format!(
                "step size {} must be a finite non-negative number",
                self.eta
            )));
        }
        if self.fd_epsilon.is_nan() || self.fd_epsilon <= 0.0 {
            return Err(Error::usage("finite-difference step must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub params: Vec<f64>,
    pub cost: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub converged: bool,
    pub final_gradient_norm: f64,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory is never empty")
    }

    /// `step,cost,grad_norm,p0,p1,...`, one row per point.
    pub fn to_csv(&self) -> String {
        let dim = self.points.first().map_or(0, |p| p.params.len());
        let mut out = String::from("step,cost,grad_norm");
        for i in 0..dim {
            let _ = write!(out, ",p{i}");
        }
        out.push('\n');
        for (step, p) in self.points.iter().enumerate() {
            let _ = write!(out, "{step},{},{}", p.cost, p.grad_norm);
            for v in &p.params {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Component `i` is `(C(p + eps e_i) - C(p - eps e_i)) / (2 eps)`.
pub fn finite_diff_gradient<F>(cost: &F, params: &[f64], eps: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            probe[i] = params[i] + eps;
            let plus = cost(&probe);
            probe[i] = params[i] - eps;
            let minus = cost(&probe);
            probe[i] = params[i];
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_finite(cost: f64, grad: &[f64], params: &[f64]) -> Result<()> {
    if !cost.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite cost or gradient at params {params:?} (cost {cost})"
        )));
    }
    Ok(())
}

/// `steps` updates `p <- p - eta * grad C(p)`, recording every point
/// including the start.
pub fn gradient_descent<F>(cost: &F, init: &[f64], cfg: &GdConfig) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    cfg.validate()?;
    let mut params = init.to_vec();
    let mut c = cost(&params);
    let mut grad = finite_diff_gradient(cost, &params, cfg.fd_epsilon);
    check_finite(c, &grad, &params)?;
    let mut points = Vec::with_capacity(cfg.steps + 1);
    points.push(TrajectoryPoint {
        params: params.clone(),
        cost: c,
        grad_norm: norm(&grad),
    });
    for _ in 0..cfg.steps {
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= cfg.eta * g;
        }
        cfg.periodicity.wrap(&mut params);
        c = cost(&params);
        grad = finite_diff_gradient(cost, &params, cfg.fd_epsilon);
        check_finite(c, &grad, &params)?;
        points.push(TrajectoryPoint {
            params: params.clone(),
            cost: c,
            grad_norm: norm(&grad),
        });
    }
    let final_gradient_norm = norm(&grad);
    Ok(Trajectory {
        points,
        converged: final_gradient_norm < CONVERGENCE_TOL,
        final_gradient_norm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub elites: usize,
    /// Gradient-descent steps each agent takes per generation.
    pub generation_gd_steps: usize,
    pub mutation_prob: f64,
    /// Standard deviation of the Gaussian kick, radians.
    pub mutation_sigma: f64,
    pub generations: usize,
    pub seed: u64,
    /// Descent step size. Must stay below `2 / lambda_max` of the cost Hessian
    /// at the minimum; for the three-qubit layouts that bound is about 0.061.
    pub eta: f64,
    pub fd_epsilon: f64,
    pub periodicity: Periodicity,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 32,
            elites: 4,
            generation_gd_steps: 20,
            mutation_prob: 0.3,
            mutation_sigma: 0.1,
            generations: 25,
            seed: 0,
            eta: 0.05,
            fd_epsilon: 1e-5,
            periodicity: Periodicity::All,
        }
    }
}

impl GaConfig {
    fn validate(&self) -> Result<()> {
        if self.elites < 1 || self.elites > self.population {
            return Err(Error::usage(format!(
                "elites must satisfy 1 <= elites <= population ({} vs {})",
                self.elites, self.population
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::usage("mutation probability must lie in [0, 1]"));
        }
        if self.mutation_sigma.is_nan() || self.mutation_sigma < 0.0 {
            return Err(Error::usage("mutation sigma must be non-negative"));
        }
        self.gd().validate()
    }

    fn gd(&self) -> GdConfig {
        GdConfig {
            eta: self.eta,
            steps: self.generation_gd_steps,
            fd_epsilon: self.fd_epsilon,
            periodicity: self.periodicity.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Cost of every agent after this generation's descent, by agent index.
    pub costs: Vec<f64>,
    pub generation_best: f64,
    pub best_ever_cost: f64,
    pub best_ever_params: Vec<f64>,
    pub best_ever_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaOutcome {
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub best_grad_norm: f64,
    pub history: Vec<GenerationRecord>,
}

impl GaOutcome {
    /// Best-ever agent per generation as a trajectory.
    pub fn trajectory(&self) -> Trajectory {
        let points = self
            .history
            .iter()
            .map(|r| TrajectoryPoint {
                params: r.best_ever_params.clone(),
                cost: r.best_ever_cost,
                grad_norm: r.best_ever_grad_norm,
            })
            .collect();
        Trajectory {
            points,
            converged: self.best_grad_norm < CONVERGENCE_TOL,
            final_gradient_norm: self.best_grad_norm,
        }
    }
}

fn agent_rng(seed: u64, generation: usize, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | agent as u64);
    rng
}

/// Population state of a running genetic search.
///
/// Generation `g` runs descent on every agent, records the best, and keeps
/// the `elites` lowest-cost agents (ties to the lower index). Generation
/// `g + 1` starts by refilling the population with cyclic copies of those
/// elites; copies beyond the first `elites` are mutated.
#[derive(Clone, Debug)]
pub struct GeneticSearch {
    cfg: GaConfig,
    population: Vec<Vec<f64>>,
    elites: Vec<Vec<f64>>,
    generation: usize,
    best: Option<TrajectoryPoint>,
    history: Vec<GenerationRecord>,
}

impl GeneticSearch {
    pub fn new(dim: usize, cfg: GaConfig) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("parameter dimension must be at least 1"));
        }
        cfg.validate()?;
        let population = (0..cfg.population)
            .map(|a| {
                let mut rng = agent_rng(cfg.seed, 0, a);
                (0..dim).map(|_| rng.random_range(0.0..TAU)).collect()
            })
            .collect();
        Ok(Self {
            cfg,
            population,
            elites: Vec::new(),
            generation: 0,
            best: None,
            history: Vec::new(),
        })
    }

    pub fn population(&self) -> &[Vec<f64>] {
        &self.population
    }

    pub fn history(&self) -> &[GenerationRecord] {
        &self.history
    }

    pub fn best(&self) -> Option<&TrajectoryPoint> {
        self.best.as_ref()
    }

    fn repopulate(&mut self) {
        let cfg = &self.cfg;
        let kick = Normal::new(0.0, cfg.mutation_sigma).expect("sigma validated");
        let generation = self.generation;
        self.population = (0..cfg.population)
            .map(|a| {
                let mut agent = self.elites[a % self.elites.len()].clone();
                if a >= self.elites.len() {
                    let mut rng = agent_rng(cfg.seed, generation, a);
                    for p in agent.iter_mut() {
                        if rng.random::<f64>() < cfg.mutation_prob {
                            *p += kick.sample(&mut rng);
                        }
                    }
                    cfg.periodicity.wrap(&mut agent);
                }
                agent
            })
            .collect();
    }

    /// Runs one generation against `cost`.
    pub fn step<F>(&mut self, cost: &F) -> Result<&GenerationRecord>
    where
        F: Fn(&[f64]) -> f64 + Sync + ?Sized,
    {
        if self.generation > 0 {
            self.repopulate();
        }
        let gd = self.cfg.gd();
        let finals: Vec<TrajectoryPoint> = self
            .population
            .par_iter()
            .map(|agent| gradient_descent(cost, agent, &gd).map(|t| t.last().clone()))
            .collect::<Result<_>>()?;

        let mut order: Vec<usize> = (0..finals.len()).collect();
        order.sort_by(|&a, &b| finals[a].cost.total_cmp(&finals[b].cost).then(a.cmp(&b)));
        let leader = &finals[order[0]];
        if self.best.as_ref().is_none_or(|b| leader.cost < b.cost) {
            self.best = Some(leader.clone());
        }
        self.elites = order[..self.cfg.elites]
            .iter()
            .map(|&i| finals[i].params.clone())
            .collect();
        self.population = finals.iter().map(|p| p.params.clone()).collect();

        let best = self.best.as_ref().expect("set above");
        self.history.push(GenerationRecord {
            generation: self.generation,
            costs: finals.iter().map(|p| p.cost).collect(),
            generation_best: leader.cost,
            best_ever_cost: best.cost,
            best_ever_params: best.params.clone(),
            best_ever_grad_norm: best.grad_norm,
        });
        self.generation += 1;
        Ok(self.history.last().expect("just pushed"))
    }

    /// Re-scores the best-ever agent and the elites after the objective has
    /// changed (joint training swaps the post-processor between generations).
    pub fn rescore<F>(&mut self, cost: &F) -> Result<()>
    where
        F: Fn(&[f64]) -> f64 + ?Sized,
    {
        if let Some(best) = self.best.as_mut() {
            best.cost = cost(&best.params);
            best.grad_norm = norm(&finite_diff_gradient(
                cost,
                &best.params,
                self.cfg.fd_epsilon,
            ));
            if !best.cost.is_finite() {
                return Err(Error::Numerical("non-finite cost while re-scoring".into()));
            }
        }
        let mut scored: Vec<(f64, usize)> = self
            .population
            .iter()
            .enumerate()
            .map(|(i, p)| (cost(p), i))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some(&(c, i)) = scored.first() {
            if self.best.as_ref().is_some_and(|b| c < b.cost) {
                let params = self.population[i].clone();
                let grad_norm = norm(&finite_diff_gradient(cost, &params, self.cfg.fd_epsilon));
                self.best = Some(TrajectoryPoint {
                    params,
                    cost: c,
                    grad_norm,
                });
            }
        }
        self.elites = scored[..self.cfg.elites]
            .iter()
            .map(|&(_, i)| self.population[i].clone())
            .collect();
        Ok(())
    }

    pub fn finish(self) -> Result<GaOutcome> {
        let best = self
            .best
            .ok_or_else(|| Error::usage("genetic search ran no generations"))?;
        Ok(GaOutcome {
            best: best.params,
            best_cost: best.cost,
            best_grad_norm: best.grad_norm,
            history: self.history,
        })
    }
}

/// Gradient-assisted genetic search: random agents, a few descent steps
/// each, keep the elites, refill with mutated copies, repeat.
pub fn genetic_search<F>(cost: &F, dim: usize, cfg: &GaConfig) -> Result<GaOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    if cfg.generations == 0 {
        return Err(Error::usage("genetic search needs at least one generation"));
    }
    let mut search = GeneticSearch::new(dim, cfg.clone())?;
    for _ in 0..cfg.generations {
        search.step(cost)?;
    }
    search.finish()
}

/// Sample points `lo + k (hi - lo) / resolution` on each axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub theta1: (f64, f64),
    pub theta2: (f64, f64),
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            theta1: (0.0, PI),
            theta2: (0.0, PI),
            resolution: 64,
        }
    }
}

impl GridSpec {
    fn axis(range: (f64, f64), res: usize) -> Vec<f64> {
        (0..res)
            .map(|k| range.0 + k as f64 * (range.1 - range.0) / res as f64)
            .collect()
    }

    /// Index of the cell `[lo + k h, lo + (k + 1) h)` holding `x`, if any.
    fn cell_of(range: (f64, f64), res: usize, x: f64) -> Option<usize> {
        let h = (range.1 - range.0) / res as f64;
        if h <= 0.0 {
            return (x == range.0).then_some(0);
        }
        let k = ((x - range.0) / h + 1e-9).floor();
        (k >= 0.0 && (k as usize) < res).then_some(k as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Landscape {
    pub grid: GridSpec,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    /// Row-major: `costs[i * theta2.len() + j]` is the cost at `(theta1[i], theta2[j])`.
    pub costs: Vec<f64>,
}

impl Landscape {
    pub fn cost_at(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.theta2.len() + j]
    }

    pub fn min_cost(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// First cell in row-major order within `tol` of the minimum.
    pub fn argmin(&self, tol: f64) -> (usize, usize) {
        let min = self.min_cost();
        let k = self
            .costs
            .iter()
            .position(|&c| c <= min + tol)
            .expect("non-empty grid");
        (k / self.theta2.len(), k % self.theta2.len())
    }

    pub fn cell_containing(&self, t1: f64, t2: f64) -> Option<(usize, usize)> {
        let r = self.grid.resolution;
        Some((
            GridSpec::cell_of(self.grid.theta1, r, t1)?,
            GridSpec::cell_of(self.grid.theta2, r, t2)?,
        ))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta1,theta2,cost\n");
        for (i, t1) in self.theta1.iter().enumerate() {
            for (j, t2) in self.theta2.iter().enumerate() {
                let _ = writeln!(out, "{t1},{t2},{}", self.cost_at(i, j));
            }
        }
        out
    }
}

/// Evaluates a two-parameter cost on every grid cell.
pub fn scan_grid<F>(cost: &F, grid: &GridSpec) -> Result<Landscape>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    if grid.resolution == 0 {
        return Err(Error::usage("grid resolution must be at least 1"));
    }
    let theta1 = GridSpec::axis(grid.theta1, grid.resolution);
    let theta2 = GridSpec::axis(grid.theta2, grid.resolution);
    let costs: Vec<f64> = theta1
        .par_iter()
        .flat_map_iter(|&a| theta2.iter().map(move |&b| cost(&[a, b])))
        .collect();
    if let Some(bad) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite cost at grid cell {bad}"
        )));
    }
    Ok(Landscape {
        grid: grid.clone(),
        theta1,
        theta2,
        costs,
    })
}

/// Cost landscape of a two-parameter layout under a fixed post-processor.
pub fn landscape_scan(pipeline: &Pipeline, grid: &GridSpec) -> Result<Landscape> {
    if pipeline.num_params() != 2 {
        return Err(Error::usage(format!(
            "landscape needs a layout with exactly 2 parameters, {} has {}",
            pipeline.layout().name,
            pipeline.num_params()
        )));
    }
    scan_grid(&pipeline.objective(), grid)
}

/// The all-Hadamard point for restricted gates.
pub fn simon_point(num_params: usize) -> Vec<f64> {
    vec![FRAC_PI_4; num_params]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::BitString;
    use crate::pipeline::{OraclesPerSecret, TrainingSet};
    use crate::postprocess::PostProcessor;
    use crate::simulator::{CircuitLayout, GateFamily};

    fn quadratic(p: &[f64]) -> f64 {
        p.iter().map(|x| x * x).sum()
    }

    fn fig5_all_secrets() -> Pipeline {
        let layout = CircuitLayout::fig5(2, GateFamily::Restricted).unwrap();
        let ts = TrainingSet::canonical(
            2,
            2,
            &TrainingSet::all_secrets(2),
            OraclesPerSecret::Count(1),
            0,
        )
        .unwrap();
        Pipeline::new(layout, ts, &PostProcessor::Gf2).unwrap()
    }

    #[test]
    fn gradient_of_quadratic() {
        let g = finite_diff_gradient(&quadratic, &[1.0, -2.0], 1e-5);
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] + 4.0).abs() < 1e-6);
        let flat = finite_diff_gradient(&|_: &[f64]| 3.0, &[0.3, 0.4, 0.5], 1e-5);
        assert_eq!(flat, vec![0.0; 3]);
    }

    #[test]
    fn gradient_of_random_quadratic_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..50 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let f = |p: &[f64]| p.iter().zip(&a).map(|(x, c)| c * x * x + x).sum::<f64>();
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = finite_diff_gradient(&f, &p, 1e-5);
            for i in 0..3 {
                assert!((g[i] - (2.0 * a[i] * p[i] + 1.0)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn simon_point_is_stationary() {
        let pipe = fig5_all_secrets();
        let g = finite_diff_gradient(&pipe.objective(), &[FRAC_PI_4, FRAC_PI_4], 1e-5);
        assert!(norm(&g) < 1e-6, "gradient {g:?}");
    }

    #[test]
    fn descent_on_quadratic_bowl() {
        let cfg = GdConfig {
            eta: 0.1,
            steps: 200,
            ..Default::default()
        };
        let t = gradient_descent(&quadratic, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(t.points.len(), 201);
        assert!(t.last().cost < 1e-8);
        assert!(t.converged);
    }

    #[test]
    fn zero_step_size_is_a_no_op() {
        let cfg = GdConfig {
            eta: 0.0,
            steps: 5,
            ..Default::default()
        };
        let t = gradient_descent(&quadratic, &[1.0, 2.0], &cfg).unwrap();
        assert!(t
            .points
            .iter()
            .all(|p| p.params == vec![1.0, 2.0] && p.cost == 5.0));
        let t = gradient_descent(
            &quadratic,
            &[1.0, 2.0],
            &GdConfig {
                steps: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.points[0].cost, 5.0);
    }

    #[test]
    fn one_step_equals_explicit_update() {
        let pipe = fig5_all_secrets();
        let cost = pipe.objective();
        let cfg = GdConfig {
            eta: 0.05,
            steps: 1,
            ..Default::default()
        };
        let p = [1.1, 2.3];
        let g = finite_diff_gradient(&cost, &p, cfg.fd_epsilon);
        let t = gradient_descent(&cost, &p, &cfg).unwrap();
        let expect: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a - cfg.eta * b).collect();
        assert_eq!(t.points[1].params, expect);
    }

    #[test]
    fn non_finite_cost_aborts() {
        let err =
            gradient_descent(&|_: &[f64]| f64::NAN, &[0.0], &GdConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn small_steps_do_not_increase_cost() {
        let layout = CircuitLayout::fig4(2, GateFamily::Restricted).unwrap();
        let ts = TrainingSet::canonical(
            2,
            2,
            &TrainingSet::all_secrets(2),
            OraclesPerSecret::Count(1),
            0,
        )
        .unwrap();
        let pipe = Pipeline::new(layout, ts, &PostProcessor::Gf2).unwrap();
        let cost = pipe.objective();
        let cfg = GdConfig {
            eta: 0.01,
            steps: 1,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..TAU)).collect();
            let t = gradient_descent(&cost, &p, &cfg).unwrap();
            assert!(t.points[1].cost <= t.points[0].cost + 1e-8);
        }
    }

    #[test]
    fn descent_near_simon_point_returns_to_it() {
        let pipe = fig5_all_secrets();
        let cost = pipe.objective();
        let simon = cost(&[FRAC_PI_4, FRAC_PI_4]);
        let cfg = GdConfig {
            eta: 0.1,
            steps: 300,
            ..Default::default()
        };
        let t = gradient_descent(&cost, &[FRAC_PI_4 + 0.1, FRAC_PI_4 - 0.1], &cfg).unwrap();
        assert!(
            (t.last().cost - simon).abs() < 1e-6,
            "{} vs {simon}",
            t.last().cost
        );
    }

    #[test]
    fn genetic_search_is_elitist_and_deterministic() {
        let pipe = fig5_all_secrets();
        let cost = pipe.objective();
        let cfg = GaConfig {
            population: 8,
            elites: 2,
            generations: 4,
            generation_gd_steps: 5,
            seed: 3,
            ..Default::default()
        };
        let a = genetic_search(&cost, 2, &cfg).unwrap();
        let b = genetic_search(&cost, 2, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert!(a
            .history
            .windows(2)
            .all(|w| w[1].best_ever_cost <= w[0].best_ever_cost));
        assert_eq!(a.best_cost, a.history.last().unwrap().best_ever_cost);
    }

    #[test]
    fn all_elite_unmutated_search_is_independent_descent() {
        let pipe = fig5_all_secrets();
        let cost = pipe.objective();
        let cfg = GaConfig {
            population: 6,
            elites: 6,
            generations: 3,
            generation_gd_steps: 4,
            mutation_sigma: 0.0,
            mutation_prob: 1.0,
            seed: 9,
            ..Default::default()
        };
        let mut search = GeneticSearch::new(2, cfg.clone()).unwrap();
        let init = search.population().to_vec();
        for _ in 0..cfg.generations {
            search.step(&cost).unwrap();
        }
        let mut ga: Vec<Vec<f64>> = search.population().to_vec();
        let gd = GdConfig {
            eta: cfg.eta,
            steps: cfg.generation_gd_steps,
            fd_epsilon: cfg.fd_epsilon,
            ..Default::default()
        };
        let mut independent: Vec<Vec<f64>> = init
            .iter()
            .map(|p| {
                let mut x = p.clone();
                for _ in 0..cfg.generations {
                    x = gradient_descent(&cost, &x, &gd)
                        .unwrap()
                        .last()
                        .params
                        .clone();
                }
                x
            })
            .collect();
        let key = |v: &Vec<f64>| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
        ga.sort_by_key(key);
        independent.sort_by_key(key);
        assert_eq!(ga, independent);
    }

    #[test]
    fn ga_config_validation() {
        let cfg = GaConfig {
            elites: 0,
            ..Default::default()
        };
        assert!(GeneticSearch::new(2, cfg).is_err());
        let cfg = GaConfig {
            elites: 40,
            ..Default::default()
        };
        assert!(GeneticSearch::new(2, cfg).is_err());
        assert!(GeneticSearch::new(0, GaConfig::default()).is_err());
    }

    #[test]
    fn landscape_minimum_and_periodicity() {
        let pipe = fig5_all_secrets();
        let grid = GridSpec {
            resolution: 16,
            ..Default::default()
        };
        let land = landscape_scan(&pipe, &grid).unwrap();
        let simon = pipe.total(&[FRAC_PI_4, FRAC_PI_4]).unwrap();
        assert_eq!(land.argmin(1e-12), (4, 4));
        assert_eq!(land.cell_containing(FRAC_PI_4, FRAC_PI_4), Some((4, 4)));
        assert!(land.costs.iter().all(|&c| c >= simon - 1e-9));

        let cost = pipe.objective();
        let shifted = GridSpec {
            theta1: (PI, TAU),
            ..grid.clone()
        };
        let land2 = scan_grid(&cost, &shifted).unwrap();
        for (a, b) in land.costs.iter().zip(&land2.costs) {
            assert!((a - b).abs() < 1e-9);
        }
        let shifted = GridSpec {
            theta2: (PI, TAU),
            ..grid
        };
        let land3 = scan_grid(&cost, &shifted).unwrap();
        for (a, b) in land.costs.iter().zip(&land3.costs) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_cell_landscape() {
        let pipe = fig5_all_secrets();
        let grid = GridSpec {
            theta1: (FRAC_PI_4, PI),
            theta2: (FRAC_PI_4, PI),
            resolution: 1,
        };
        let land = landscape_scan(&pipe, &grid).unwrap();
        assert_eq!(
            land.costs,
            vec![pipe.total(&[FRAC_PI_4, FRAC_PI_4]).unwrap()]
        );
        assert!(land.to_csv().starts_with("theta1,theta2,cost\n"));
    }

    #[test]
    fn landscape_rejects_wrong_arity() {
        let layout = CircuitLayout::fig4(2, GateFamily::Restricted).unwrap();
        let ts = TrainingSet::canonical(
            2,
            2,
            &[BitString::parse("11").unwrap()],
            OraclesPerSecret::Count(1),
            0,
        )
        .unwrap();
        let pipe = Pipeline::new(layout, ts, &PostProcessor::Gf2).unwrap();
        assert!(matches!(
            landscape_scan(&pipe, &GridSpec::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn trajectory_csv_header() {
        let t = gradient_descent(
            &quadratic,
            &[1.0, 1.0],
            &GdConfig {
                steps: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("step,cost,grad_norm,p0,p1\n0,2,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
