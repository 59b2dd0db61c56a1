//! Per-instance run records and their summary.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use gcs_core::conic::ConicSolver;
use gcs_core::exec::Clock;
use gcs_core::graph::{brute_force_optimum, brute_force_optimum_bounded, solve_relaxation, GcsProblem, RelaxationOptions};
use gcs_core::planner::{path_lower_bound, plan_timed, PhaseTimings, PlanOptions, PlanResult, PlanningProblem};
use gcs_core::preprocess::{count_two_cycles, edge_redundancy_filter};
use gcs_core::rounding::{relative_gap, round, RoundingConfig, RoundingReport};
use gcs_core::Error;

use crate::formats::{finite, ReportJson};

/// Wall-clock seconds since construction.
#[derive(Clone, Copy, Debug)]
pub struct StdClock(Instant);

impl StdClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for StdClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for StdClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Pipeline switches shared by `plan`, `spp` and `bench`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Toggles {
    pub preprocess: bool,
    pub two_cycle: bool,
    pub seed: u64,
    /// Distinct paths to evaluate.
    pub rounding_n: usize,
    /// Sampling trials.
    pub rounding_m: usize,
    pub tol: f64,
}

impl Default for Toggles {
    fn default() -> Self {
        let r = RoundingConfig::default();
        Self {
            preprocess: true,
            two_cycle: true,
            seed: r.seed,
            rounding_n: r.max_paths,
            rounding_m: r.max_trials,
            tol: r.tolerance,
        }
    }
}

impl Toggles {
    pub fn rounding(&self) -> RoundingConfig {
        RoundingConfig {
            max_paths: self.rounding_n,
            max_trials: self.rounding_m,
            seed: self.seed,
            tolerance: self.tol,
            ..RoundingConfig::default()
        }
    }

    pub fn plan_options(&self) -> PlanOptions {
        PlanOptions {
            rounding: self.rounding(),
            preprocess: self.preprocess,
            two_cycle: self.two_cycle,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingsJson {
    pub graph: f64,
    pub preprocess: f64,
    pub relaxation: f64,
    pub rounding: f64,
    pub reconstruction: f64,
    pub total: f64,
}

impl From<&PhaseTimings> for TimingsJson {
    fn from(t: &PhaseTimings) -> Self {
        Self {
            graph: t.graph,
            preprocess: t.preprocess,
            relaxation: t.relaxation,
            rounding: t.rounding,
            reconstruction: t.reconstruction,
            total: t.total(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Infeasible,
    Error,
}

/// Errors that mean "no solution exists" rather than "something broke".
pub fn is_infeasibility(e: &Error) -> bool {
    matches!(
        e,
        Error::GraphDisconnected(_) | Error::RelaxationInfeasible | Error::AllRoundedInfeasible | Error::NoFeasiblePath(_)
    )
}

/// One benchmark or planning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub status: Status,
    pub error: Option<String>,
    pub toggles: Toggles,
    pub timings: TimingsJson,
    pub c_relax: Option<f64>,
    pub c_round: Option<f64>,
    pub delta_relax: Option<f64>,
    pub c_opt: Option<f64>,
    pub delta_opt: Option<f64>,
    pub oracle_error: Option<String>,
    /// Graph vertices of the selected path.
    pub path: Vec<usize>,
    pub edges: usize,
    pub removed_edges: usize,
    pub two_cycle_pairs: usize,
}

impl RunRecord {
    fn new(instance: &str, toggles: &Toggles) -> Self {
        Self {
            instance: instance.to_string(),
            status: Status::Ok,
            error: None,
            toggles: toggles.clone(),
            timings: TimingsJson::default(),
            c_relax: None,
            c_round: None,
            delta_relax: None,
            c_opt: None,
            delta_opt: None,
            oracle_error: None,
            path: Vec::new(),
            edges: 0,
            removed_edges: 0,
            two_cycle_pairs: 0,
        }
    }

    /// Record of an instance that could not be set up.
    pub fn failed(instance: &str, toggles: &Toggles, e: &Error) -> Self {
        let mut rec = Self::new(instance, toggles);
        rec.fail(e);
        rec
    }

    fn fail(&mut self, e: &Error) {
        self.status = if is_infeasibility(e) { Status::Infeasible } else { Status::Error };
        self.error = Some(e.to_string());
    }

    fn fill(&mut self, report: &RoundingReport) {
        self.c_relax = finite(report.relaxed_cost);
        self.c_round = finite(report.rounded_cost);
        self.delta_relax = finite(report.gap);
        self.path = report.best_path.clone().unwrap_or_default();
    }

    fn oracle(&mut self, outcome: gcs_core::Result<f64>) {
        match outcome {
            Ok(c) => {
                self.c_opt = finite(c);
                self.delta_opt = self.c_round.and_then(|r| finite(relative_gap(r, c)));
            }
            Err(e) => self.oracle_error = Some(e.to_string()),
        }
    }
}

/// Plans one instance; the result is kept for callers that write the
/// trajectory.
pub fn run_plan(
    instance: &str,
    problem: &PlanningProblem,
    toggles: &Toggles,
    oracle_limit: Option<usize>,
    solver: &dyn ConicSolver,
) -> (RunRecord, Option<PlanResult>) {
    let mut rec = RunRecord::new(instance, toggles);
    let clock = StdClock::new();
    let result = match plan_timed(problem, &toggles.plan_options(), solver, &clock) {
        Ok(r) => r,
        Err(e) => {
            rec.timings.total = clock.now();
            rec.fail(&e);
            return (rec, None);
        }
    };
    rec.timings = (&result.timings).into();
    rec.fill(&result.report);
    rec.edges = result.graph.problem.edges().len();
    rec.removed_edges = result.preprocess.removed_count();
    rec.two_cycle_pairs = result.preprocess.two_cycle_pairs;
    if let Some(limit) = oracle_limit {
        let bound = |p: &[usize]| path_lower_bound(&result.graph, problem, p);
        rec.oracle(brute_force_optimum_bounded(&result.graph.problem, limit, solver, bound).map(|b| b.cost));
    }
    (rec, Some(result))
}

/// Solves a bare graph problem: optional pruning, relaxation, rounding.
pub fn run_gcs(
    instance: &str,
    problem: &GcsProblem,
    toggles: &Toggles,
    oracle_limit: Option<usize>,
    solver: &dyn ConicSolver,
) -> (RunRecord, Option<RoundingReport>) {
    let mut rec = RunRecord::new(instance, toggles);
    let clock = StdClock::new();
    let mut mark = 0.0;
    let mut lap = |slot: &mut f64| {
        let now = clock.now();
        *slot = now - mark;
        mark = now;
    };
    let mut timings = PhaseTimings::default();
    let outcome = (|| {
        if !problem.has_path() {
            return Err(Error::GraphDisconnected("no path from source to target".into()));
        }
        let graph = if toggles.preprocess {
            let (pruned, report) = edge_redundancy_filter(problem, solver)?;
            rec.removed_edges = report.removed_count();
            pruned
        } else {
            problem.clone()
        };
        lap(&mut timings.preprocess);
        rec.edges = graph.edges().len();
        let opts = RelaxationOptions {
            two_cycle: toggles.two_cycle,
        };
        let flows = solve_relaxation(&graph, &opts, solver)?;
        if toggles.two_cycle {
            rec.two_cycle_pairs = count_two_cycles(&graph);
        }
        lap(&mut timings.relaxation);
        let report = round(&graph, &flows, &toggles.rounding(), solver)?;
        lap(&mut timings.rounding);
        if report.best_path.is_none() {
            return Err(Error::AllRoundedInfeasible);
        }
        Ok(report)
    })();
    rec.timings = (&timings).into();
    match outcome {
        Ok(report) => {
            rec.fill(&report);
            if let Some(limit) = oracle_limit {
                rec.oracle(brute_force_optimum(problem, limit, solver).map(|b| b.cost));
            }
            (rec, Some(report))
        }
        Err(e) => {
            rec.fail(&e);
            (rec, None)
        }
    }
}

/// Upper edges of the gap histogram bins; the last bin is open.
pub const HISTOGRAM_EDGES: [f64; 5] = [1e-6, 1e-4, 1e-3, 1e-2, 1e-1];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub count: usize,
    pub min: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub max: f64,
    pub mean: f64,
    pub histogram: Vec<Bin>,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl GapStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mut histogram = Vec::new();
        let mut lo = None;
        for &hi in HISTOGRAM_EDGES.iter() {
            histogram.push(Bin {
                lo,
                hi: Some(hi),
                count: v.iter().filter(|&&x| lo.map_or(true, |l| x >= l) && x < hi).count(),
            });
            lo = Some(hi);
        }
        histogram.push(Bin {
            lo,
            hi: None,
            count: v.iter().filter(|&&x| x >= lo.unwrap()).count(),
        });
        Some(Self {
            count: v.len(),
            min: v[0],
            p50: percentile(&v, 50.0),
            p90: percentile(&v, 90.0),
            p95: percentile(&v, 95.0),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
            histogram,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub instances: usize,
    pub ok: usize,
    pub infeasible: usize,
    pub errors: usize,
    /// Runs with `C_relax > C_round` beyond 1e-6 relative.
    pub sandwich_violations: usize,
    pub delta_relax: Option<GapStats>,
    pub delta_opt: Option<GapStats>,
    pub median_time: Option<f64>,
    pub mean_time: Option<f64>,
}

impl Summary {
    pub fn of(records: &[RunRecord]) -> Self {
        let count = |s: Status| records.iter().filter(|r| r.status == s).count();
        let ok: Vec<&RunRecord> = records.iter().filter(|r| r.status == Status::Ok).collect();
        let relax: Vec<f64> = ok.iter().filter_map(|r| r.delta_relax).collect();
        let opt: Vec<f64> = ok.iter().filter_map(|r| r.delta_opt).collect();
        let mut times: Vec<f64> = ok.iter().map(|r| r.timings.total).collect();
        times.sort_by(f64::total_cmp);
        let sandwich_violations = ok
            .iter()
            .filter(|r| match (r.c_relax, r.c_round) {
                (Some(lo), Some(hi)) => lo > hi + 1e-6 * hi.abs().max(1.0),
                _ => false,
            })
            .count();
        Self {
            instances: records.len(),
            ok: ok.len(),
            infeasible: count(Status::Infeasible),
            errors: count(Status::Error),
            sandwich_violations,
            delta_relax: GapStats::of(&relax),
            delta_opt: GapStats::of(&opt),
            median_time: (!times.is_empty()).then(|| percentile(&times, 50.0)),
            mean_time: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        }
    }
}

/// Serialized rounding report, stable across runs with equal seeds.
pub fn report_json(report: &RoundingReport) -> String {
    serde_json::to_string(&ReportJson::from(report)).expect("report serializes")
}
