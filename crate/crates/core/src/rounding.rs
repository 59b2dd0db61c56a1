//! Randomized depth-first rounding of relaxed flows into paths.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conic::ConicSolver;
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::graph::{evaluate_path, FlowSolution, GcsProblem, PathEvaluation, VertexId, FLOW_FLOOR};

/// Paths are evaluated in groups of this size; results do not depend on it.
const BATCH: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct RoundingConfig {
    /// Stop after this many distinct paths.
    pub max_paths: usize,
    /// Stop after this many samples.
    pub max_trials: usize,
    pub seed: u64,
    /// Early stop once `|cost - C_relax| <= tol (1 + |C_relax|)`.
    pub tolerance: f64,
    /// Edges with less flow are ignored while sampling.
    pub flow_floor: f64,
}

impl Default for RoundingConfig {
    fn default() -> Self {
        Self {
            max_paths: 10,
            max_trials: 100,
            seed: 0,
            tolerance: 1e-6,
            flow_floor: FLOW_FLOOR,
        }
    }
}

impl RoundingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_paths == 0 || self.max_paths > self.max_trials {
            return Err(Error::InvalidArgument(format!(
                "need 0 < N <= M, got N = {}, M = {}",
                self.max_paths, self.max_trials
            )));
        }
        if !(self.tolerance >= 0.0) || !(self.flow_floor >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub path: Vec<VertexId>,
    /// `+∞` for infeasible paths.
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundingReport {
    pub best_path: Option<Vec<VertexId>>,
    /// Vertex values along `best_path`.
    pub best_values: Option<Vec<Vec<f64>>>,
    pub rounded_cost: f64,
    pub relaxed_cost: f64,
    /// `(C_round - C_relax) / C_relax`.
    pub gap: f64,
    /// Evaluated candidates in sampling order.
    pub candidates: Vec<Candidate>,
    pub trials: usize,
    pub early_stop: bool,
    pub seed: u64,
}

/// `(rounded - relaxed) / relaxed`, with `+∞` when the ratio is undefined
/// and zero when both costs vanish.
pub fn relative_gap(rounded: f64, relaxed: f64) -> f64 {
    const ZERO: f64 = 1e-9;
    if !rounded.is_finite() {
        return f64::INFINITY;
    }
    if relaxed.abs() <= ZERO {
        return if rounded.abs() <= ZERO { 0.0 } else { f64::INFINITY };
    }
    if relaxed < 0.0 {
        return f64::INFINITY;
    }
    (rounded - relaxed) / relaxed
}

/// Walks from the source, taking each unvisited out-edge with probability
/// proportional to its flow and backtracking at dead ends.
pub fn sample_path<R: Rng + ?Sized>(
    problem: &GcsProblem,
    flows: &FlowSolution,
    rng: &mut R,
    flow_floor: f64,
) -> Result<Vec<VertexId>> {
    let mut visited = vec![false; problem.vertices().len()];
    let mut path = vec![problem.source()];
    visited[problem.source()] = true;
    let mut options = Vec::new();
    while let Some(&u) = path.last() {
        if u == problem.target() {
            return Ok(path);
        }
        options.clear();
        options.extend(problem.out_edges(u).iter().filter_map(|&e| {
            let head = problem.edges()[e].head;
            let phi = flows.phi[e];
            (phi > flow_floor && !visited[head]).then_some((head, phi))
        }));
        if options.is_empty() {
            // dead ends stay visited
            path.pop();
            continue;
        }
        let total: f64 = options.iter().map(|o| o.1).sum();
        let mut pick = rng.random::<f64>() * total;
        let mut next = options[options.len() - 1].0;
        for &(head, phi) in &options {
            if pick < phi {
                next = head;
                break;
            }
            pick -= phi;
        }
        visited[next] = true;
        path.push(next);
    }
    let source_flow: f64 = problem.out_edges(problem.source()).iter().map(|&e| flows.phi[e]).sum();
    Err(Error::NoFeasiblePath(if source_flow <= flow_floor {
        format!("relaxation sends no flow out of the source (flow floor {flow_floor:e})")
    } else {
        format!("edges above the flow floor {flow_floor:e} do not connect source and target")
    }))
}

/// Samples up to `max_paths` distinct paths in at most `max_trials` draws.
pub fn sample_distinct_paths(
    problem: &GcsProblem,
    flows: &FlowSolution,
    config: &RoundingConfig,
) -> Result<(Vec<Vec<VertexId>>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut seen = BTreeSet::new();
    let mut paths = Vec::new();
    let mut trials = 0;
    while trials < config.max_trials && paths.len() < config.max_paths {
        trials += 1;
        let p = sample_path(problem, flows, &mut rng, config.flow_floor)?;
        if seen.insert(p.clone()) {
            paths.push(p);
        }
    }
    Ok((paths, trials))
}

/// Samples candidate paths, evaluates them and keeps the cheapest.
pub fn round(
    problem: &GcsProblem,
    flows: &FlowSolution,
    config: &RoundingConfig,
    solver: &dyn ConicSolver,
) -> Result<RoundingReport> {
    config.validate()?;
    let (paths, trials) = sample_distinct_paths(problem, flows, config)?;
    let relaxed = flows.cost;
    let mut candidates = Vec::new();
    let mut best: Option<(usize, PathEvaluation)> = None;
    let mut early_stop = false;
    'batches: for chunk in paths.chunks(BATCH) {
        let evals = par_map(chunk, |p| evaluate_path(problem, p, solver));
        for (p, ev) in chunk.iter().zip(evals) {
            let ev = match ev {
                Ok(ev) => ev,
                Err(Error::Solver { .. }) => PathEvaluation {
                    cost: f64::INFINITY,
                    values: None,
                },
                Err(e) => return Err(e),
            };
            candidates.push(Candidate {
                path: p.clone(),
                cost: ev.cost,
            });
            let hit = ev.is_feasible() && (ev.cost - relaxed).abs() <= config.tolerance * (1.0 + relaxed.abs());
            if ev.is_feasible() && best.as_ref().map_or(true, |(_, b)| ev.cost < b.cost) {
                best = Some((candidates.len() - 1, ev));
            }
            if hit {
                early_stop = true;
                break 'batches;
            }
        }
    }
    let (best_path, best_values, rounded_cost) = match best {
        Some((i, ev)) => (Some(candidates[i].path.clone()), ev.values, ev.cost),
        None => (None, None, f64::INFINITY),
    };
    Ok(RoundingReport {
        best_path,
        best_values,
        rounded_cost,
        relaxed_cost: relaxed,
        gap: relative_gap(rounded_cost, relaxed),
        candidates,
        trials,
        early_stop,
        seed: config.seed,
    })
}
