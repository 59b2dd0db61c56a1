//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails. Pass criterion numbers as arguments to
//! run a subset.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gcs_cli::bench::{report_json, Toggles};
use gcs_cli::formats::{BuildingJson, MazeJson, PreprocessJson, TrajectoryJson};
use gcs_core::backend::AutoSolver;
use gcs_core::bezier::{bernstein, BezierCurve, MAX_DEGREE};
use gcs_core::conic::{AffineExpr, ConicProgram, ConicSolver, SolveStatus};
use gcs_core::environments::{
    fixture_2d, fixture_2d_min_time, fixture_2d_smooth, generate_building, generate_maze, random_gcs, two_route_fixture,
    unique_path_fixture, RANDOM_GCS_PATH_LIMIT, UNIQUE_PATH,
};
use gcs_core::graph::{
    brute_force_optimum, brute_force_optimum_bounded, solve_relaxation, GcsProblem, RelaxationOptions,
};
use gcs_core::planner::{build_graph, path_lower_bound, plan, PlanResult, PlanningProblem};
use gcs_core::preprocess::edge_redundancy_filter;
use gcs_core::rounding::{round, sample_distinct_paths, RoundingConfig};

const SOLVER: AutoSolver = AutoSolver;

/// Oracle path cap for planner graphs.
const PLAN_PATH_LIMIT: usize = 200_000;

/// `a <= b` up to `rel` relative to `b`.
fn le_rel(a: f64, b: f64, rel: f64) -> bool {
    a <= b + rel * b.abs().max(1e-9)
}

fn close_rel(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-9)
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Planned instances collected for the transcription checks.
#[derive(Default)]
struct Corpus {
    runs: Vec<(String, PlanningProblem, PlanResult)>,
}

impl Corpus {
    fn plan(&mut self, name: &str, problem: PlanningProblem) -> Result<&PlanResult, String> {
        let r = plan(&problem, &Toggles::default().plan_options(), &SOLVER).map_err(|e| format!("{name}: {e}"))?;
        self.runs.push((name.to_string(), problem, r));
        Ok(&self.runs.last().unwrap().2)
    }
}

fn sandwich(_: &mut Corpus) -> Verdict {
    let mut failures = Vec::new();
    for seed in 0..100 {
        let g = random_gcs(seed);
        let flows = match solve_relaxation(&g, &RelaxationOptions::default(), &SOLVER) {
            Ok(f) => f,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let report = round(&g, &flows, &RoundingConfig::default(), &SOLVER).expect("rounding runs");
        let opt = brute_force_optimum(&g, RANDOM_GCS_PATH_LIMIT, &SOLVER).expect("oracle runs").cost;
        let (relax, rounded) = (flows.cost, report.rounded_cost);
        if !(le_rel(relax, opt, 1e-6) && le_rel(opt, rounded, 1e-6)) {
            failures.push(format!("seed {seed}: relax {relax} opt {opt} round {rounded}"));
        }
    }
    verdict(failures.is_empty(), format!("100 random graphs, {} violations {failures:?}", failures.len()))
}

fn maze_tightness(corpus: &mut Corpus) -> Verdict {
    let mut tight = 0;
    let mut mismatches = Vec::new();
    let mut worst_gap: f64 = 0.0;
    for seed in 0..20 {
        let maze = generate_maze(15, 15, 10, seed).expect("maze");
        let problem = maze.problem();
        let r = match corpus.plan(&format!("maze15-s{seed}"), problem.clone()) {
            Ok(r) => r,
            Err(e) => {
                mismatches.push(e);
                continue;
            }
        };
        let gap = r.report.gap;
        worst_gap = worst_gap.max(gap);
        if gap <= 1e-4 {
            tight += 1;
        }
        let bound = |p: &[usize]| path_lower_bound(&r.graph, &problem, p);
        match brute_force_optimum_bounded(&r.graph.problem, PLAN_PATH_LIMIT, &SOLVER, bound) {
            Ok(opt) if close_rel(r.report.rounded_cost, opt.cost, 1e-5) => {}
            Ok(opt) => mismatches.push(format!("seed {seed}: round {} opt {}", r.report.rounded_cost, opt.cost)),
            Err(e) => mismatches.push(format!("seed {seed}: oracle {e}")),
        }
    }
    verdict(
        tight >= 18 && mismatches.is_empty(),
        format!("{tight}/20 with relaxation gap <= 1e-4 (worst {worst_gap:.2e}), oracle mismatches {mismatches:?}"),
    )
}

fn rounding_quality(corpus: &mut Corpus) -> Verdict {
    let mut good = 0;
    let mut notes = Vec::new();
    for seed in 0..25 {
        let g = random_gcs(1000 + seed);
        let flows = solve_relaxation(&g, &RelaxationOptions::default(), &SOLVER).expect("relaxation");
        let report = round(&g, &flows, &RoundingConfig::default(), &SOLVER).expect("rounding");
        let opt = brute_force_optimum(&g, RANDOM_GCS_PATH_LIMIT, &SOLVER).expect("oracle").cost;
        if le_rel(report.rounded_cost, opt, 1e-2) {
            good += 1;
        } else {
            notes.push(format!("graph {}: {:.3e}", 1000 + seed, report.rounded_cost / opt - 1.0));
        }
    }
    for seed in 0..25 {
        let problem = generate_maze(5, 5, 6, 500 + seed).expect("maze").problem();
        let r = match corpus.plan(&format!("maze5-s{}", 500 + seed), problem.clone()) {
            Ok(r) => r,
            Err(e) => {
                notes.push(e);
                continue;
            }
        };
        let bound = |p: &[usize]| path_lower_bound(&r.graph, &problem, p);
        let opt = brute_force_optimum_bounded(&r.graph.problem, PLAN_PATH_LIMIT, &SOLVER, bound).expect("oracle");
        if le_rel(r.report.rounded_cost, opt.cost, 1e-2) {
            good += 1;
        } else {
            notes.push(format!("maze {}: {:.3e}", 500 + seed, r.report.rounded_cost / opt.cost - 1.0));
        }
    }
    verdict(good >= 45, format!("{good}/50 within 1% of the optimum {notes:?}"))
}

fn random_curve(rng: &mut ChaCha8Rng) -> BezierCurve {
    let d = rng.random_range(1..=8);
    let n = rng.random_range(1..=3);
    let pts = (0..=d).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    BezierCurve::new(pts).expect("curve")
}

/// LP feasibility of `x ∈ conv(points)`.
fn in_hull(points: &[Vec<f64>], x: &[f64]) -> bool {
    let mut prog = ConicProgram::new();
    let base = prog.add_vars(points.len());
    let mut sum = AffineExpr::constant(-1.0);
    for k in 0..points.len() {
        sum.add_term(base + k, 1.0);
        prog.add_ge(AffineExpr::term(base + k, 1.0)).unwrap();
    }
    prog.add_eq(sum).unwrap();
    for j in 0..x.len() {
        let mut e = AffineExpr::constant(-x[j]);
        for (k, p) in points.iter().enumerate() {
            e.add_term(base + k, p[j]);
        }
        prog.add_eq(e).unwrap();
    }
    SOLVER.solve(&prog).status == SolveStatus::Optimal
}

fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let inner: f64 = (1..n).map(|i| f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(0.0) + f(1.0) + inner) * h / 3.0
}

fn bezier_suite(_: &mut Corpus) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut fails: Vec<String> = Vec::new();
    let mut worst_fd: f64 = 0.0;
    let mut worst_elev: f64 = 0.0;
    let mut worst_unity: f64 = 0.0;
    for _ in 0..200 {
        let c = random_curve(&mut rng);
        let pts = c.control_points();
        let (a, b) = (c.evaluate(0.0), c.evaluate(1.0));
        let apart = |u: &[f64], v: &[f64]| u.iter().zip(v).any(|(x, y)| (x - y).abs() > 1e-12);
        if apart(&a, &pts[0]) || apart(&b, pts.last().unwrap()) {
            fails.push("endpoint".into());
        }
        let dc = c.derivative();
        let h = 1e-5;
        for i in 1..50 {
            let s = i as f64 / 50.0;
            let (hi, lo) = (c.evaluate((s + h).min(1.0)), c.evaluate((s - h).max(0.0)));
            let width = (s + h).min(1.0) - (s - h).max(0.0);
            for (j, v) in dc.evaluate(s).iter().enumerate() {
                worst_fd = worst_fd.max((v - (hi[j] - lo[j]) / width).abs());
            }
        }
        let up = c.elevate_degree(c.degree() + rng.random_range(1..=4)).expect("elevation");
        for i in 0..=50 {
            let s = i as f64 / 50.0;
            for (x, y) in c.evaluate(s).iter().zip(up.evaluate(s)) {
                worst_elev = worst_elev.max((x - y).abs());
            }
        }
    }
    for d in 0..=MAX_DEGREE {
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            let total: f64 = (0..=d).map(|k| bernstein(k, d, s).unwrap()).sum();
            worst_unity = worst_unity.max((total - 1.0).abs());
        }
    }
    let mut hull_fail = 0;
    for _ in 0..10 {
        let c = random_curve(&mut rng);
        for i in 0..50 {
            if !in_hull(c.control_points(), &c.evaluate(i as f64 / 49.0)) {
                hull_fail += 1;
            }
        }
    }
    let mut bound_fail = 0;
    for trial in 0..200 {
        let c = random_curve(&mut rng);
        let n = c.dim();
        let centre: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f = move |x: &[f64]| -> f64 {
            let dist2: f64 = x.iter().zip(&centre).map(|(a, b)| (a - b) * (a - b)).sum();
            match trial % 4 {
                0 => dist2.sqrt(),
                1 => dist2,
                2 => x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().exp(),
                _ => x.iter().map(|a| a.abs()).fold(0.0, f64::max),
            }
        };
        let quad = simpson(|s| f(&c.evaluate(s)), 2000);
        if c.convex_integral_bound(&f) < quad - 1e-9 {
            bound_fail += 1;
        }
    }
    let pass = fails.is_empty()
        && worst_fd <= 1e-6
        && worst_elev <= 1e-12
        && worst_unity <= 1e-12
        && hull_fail == 0
        && bound_fail == 0;
    verdict(
        pass,
        format!(
            "endpoint failures {}, derivative err {worst_fd:.1e}, elevation err {worst_elev:.1e}, \
             unity err {worst_unity:.1e}, hull misses {hull_fail}/500, integral bound misses {bound_fail}/200",
            fails.len()
        ),
    )
}

fn transcription(corpus: &mut Corpus) -> Verdict {
    let extra: Vec<(&str, PlanningProblem)> = vec![
        ("fixture-min-length", fixture_2d()),
        ("fixture-min-time", fixture_2d_min_time()),
        ("fixture-smooth", fixture_2d_smooth(0.1)),
        ("building-0", generate_building(0).problem()),
        ("building-1", generate_building(1).problem()),
        ("building-2", generate_building(2).problem()),
    ];
    let mut failures = Vec::new();
    for (name, p) in extra {
        if let Err(e) = corpus.plan(name, p) {
            failures.push(e);
        }
    }
    for (name, problem, r) in &corpus.runs {
        if let Err(e) = r.trajectory.validate(problem) {
            failures.push(format!("{name}: {e}"));
        }
        let path = r.report.best_path.as_ref().unwrap();
        let values = r.report.best_values.as_ref().unwrap();
        let sum = r.graph.problem.path_length(path, values).expect("path in graph");
        if !close_rel(sum, r.report.rounded_cost, 1e-6) {
            failures.push(format!("{name}: edge sum {sum} vs cost {}", r.report.rounded_cost));
        }
        let t = r.trajectory.duration();
        if t < problem.spec.t_min - 1e-6 || t > problem.spec.t_max + 1e-6 {
            failures.push(format!("{name}: duration {t}"));
        }
    }
    verdict(
        failures.is_empty(),
        format!("{} planned trajectories checked, failures {failures:?}", corpus.runs.len()),
    )
}

fn velocity(corpus: &mut Corpus) -> Verdict {
    let r = match corpus.plan("two-route", two_route_fixture()) {
        Ok(r) => r,
        Err(e) => return verdict(false, e),
    };
    let mut diag_speed: f64 = 0.0;
    let mut worst_component: f64 = 0.0;
    for seg in r.trajectory.segments() {
        let (rd, hd) = (seg.r.derivative(), seg.h.derivative());
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            let v: Vec<f64> = rd.evaluate(s).iter().map(|x| x / hd.evaluate(s)[0]).collect();
            worst_component = v.iter().map(|x| x.abs()).fold(worst_component, f64::max);
            if seg.region == 2 {
                diag_speed = diag_speed.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
            }
        }
    }
    verdict(
        diag_speed >= 1.35 && worst_component <= 1.0 + 1e-6,
        format!(
            "route {:?}, diagonal speed {diag_speed:.4}, largest component {worst_component:.7}",
            r.regions()
        ),
    )
}

fn preprocessing(_: &mut Corpus) -> Verdict {
    let mut failures = Vec::new();
    let mut removed = 0;
    for seed in 0..50 {
        let g = random_gcs(2000 + seed);
        let (pruned, report) = edge_redundancy_filter(&g, &SOLVER).expect("filter");
        removed += report.removed_count();
        let a = brute_force_optimum(&g, RANDOM_GCS_PATH_LIMIT, &SOLVER).expect("oracle").cost;
        match brute_force_optimum(&pruned, RANDOM_GCS_PATH_LIMIT, &SOLVER) {
            Ok(b) if close_rel(b.cost, a, 1e-8) => {}
            Ok(b) => failures.push(format!("graph {}: {a} became {}", 2000 + seed, b.cost)),
            Err(e) => failures.push(format!("graph {}: {e}", 2000 + seed)),
        }
    }
    let fixture = unique_path_fixture();
    let (pruned, _) = edge_redundancy_filter(&fixture, &SOLVER).expect("filter");
    let kept: Vec<(usize, usize)> = pruned.edges().iter().map(|e| (e.tail, e.head)).collect();
    let mut expected: Vec<(usize, usize)> = UNIQUE_PATH.windows(2).map(|w| (w[0], w[1])).collect();
    let mut kept_sorted = kept.clone();
    kept_sorted.sort();
    expected.sort();
    if kept_sorted != expected {
        failures.push(format!("unique-path fixture kept {kept:?}"));
    }

    let mut cycle_instances: Vec<(String, GcsProblem)> =
        (0..30).map(|s| (format!("graph {}", 3000 + s), random_gcs(3000 + s))).collect();
    for s in 0..10 {
        let problem = generate_maze(4, 4, 4, 700 + s).expect("maze").problem();
        let g = build_graph(&problem, &SOLVER).expect("graph").problem;
        cycle_instances.push((format!("maze {}", 700 + s), g));
    }
    let mut with_cycles = 0;
    for (name, g) in &cycle_instances {
        let off = solve_relaxation(g, &RelaxationOptions { two_cycle: false }, &SOLVER).expect("relaxation").cost;
        let on = solve_relaxation(g, &RelaxationOptions { two_cycle: true }, &SOLVER).expect("relaxation").cost;
        let opt = brute_force_optimum(g, PLAN_PATH_LIMIT, &SOLVER).expect("oracle").cost;
        if gcs_core::preprocess::count_two_cycles(g) > 0 {
            with_cycles += 1;
        }
        if !le_rel(off, on, 1e-6) || !le_rel(on, opt, 1e-6) {
            failures.push(format!("{name}: without {off} with {on} opt {opt}"));
        }
    }
    verdict(
        failures.is_empty() && with_cycles > 0,
        format!(
            "50 filtered graphs ({removed} edges removed), unique-path fixture pruned to its path, \
             {} two-cycle comparisons ({with_cycles} with reciprocal edges), failures {failures:?}",
            cycle_instances.len()
        ),
    )
}

fn plan_fingerprint(problem: &PlanningProblem) -> String {
    let r = plan(problem, &Toggles::default().plan_options(), &SOLVER).expect("plan");
    let pre = serde_json::to_string(&PreprocessJson::from(&r.preprocess)).unwrap();
    let traj = serde_json::to_string(&TrajectoryJson::from(&r.trajectory)).unwrap();
    format!("{}\n{pre}\n{traj}", report_json(&r.report))
}

fn determinism(_: &mut Corpus) -> Verdict {
    let mut failures = Vec::new();
    for seed in 0..5 {
        let a = serde_json::to_string(&MazeJson::from(&generate_maze(15, 15, 10, seed).unwrap())).unwrap();
        let b = serde_json::to_string(&MazeJson::from(&generate_maze(15, 15, 10, seed).unwrap())).unwrap();
        if a != b {
            failures.push(format!("maze {seed}"));
        }
        let a = serde_json::to_string(&BuildingJson::from(&generate_building(seed))).unwrap();
        let b = serde_json::to_string(&BuildingJson::from(&generate_building(seed))).unwrap();
        if a != b {
            failures.push(format!("building {seed}"));
        }
    }
    let g = random_gcs(7);
    let flows = solve_relaxation(&g, &RelaxationOptions::default(), &SOLVER).unwrap();
    let config = RoundingConfig {
        seed: 11,
        ..RoundingConfig::default()
    };
    let sample = || serde_json::to_string(&sample_distinct_paths(&g, &flows, &config).unwrap()).unwrap();
    if sample() != sample() {
        failures.push("sampled paths".into());
    }
    for (name, p) in [
        ("fixture", fixture_2d()),
        ("maze", generate_maze(8, 8, 5, 3).unwrap().problem()),
    ] {
        if plan_fingerprint(&p) != plan_fingerprint(&p) {
            failures.push(format!("{name} reports"));
        }
    }
    verdict(failures.is_empty(), format!("mismatches {failures:?}"))
}

type Criterion = fn(&mut Corpus) -> Verdict;

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    // Transcription checks run last so they see every planned instance.
    let criteria: [(usize, &str, Criterion); 8] = [
        (1, "sandwich bound", sandwich),
        (2, "maze relaxation tightness", maze_tightness),
        (3, "rounding quality", rounding_quality),
        (4, "Bezier properties", bezier_suite),
        (6, "velocity semantics", velocity),
        (7, "preprocessing soundness", preprocessing),
        (8, "determinism", determinism),
        (5, "transcription soundness", transcription),
    ];
    let mut corpus = Corpus::default();
    let mut lines = Vec::new();
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = check(&mut corpus);
        let line = format!(
            "criterion {id} ({name}): {} in {:.1}s: {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
        println!("{line}");
        lines.push((id, v.pass, line));
    }
    lines.sort_by_key(|l| l.0);
    println!("\nacceptance summary");
    for (_, _, line) in &lines {
        println!("  {}", line.split(": ").take(2).collect::<Vec<_>>().join(": "));
    }
    if lines.iter().any(|l| !l.1) {
        std::process::exit(1);
    }
}
