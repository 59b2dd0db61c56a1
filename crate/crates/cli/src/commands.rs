//! Subcommands. Each returns a process exit code: 0 on success, 2 when the
//! instance is infeasible, 1 on any other error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use gcs_core::backend::AutoSolver;
use gcs_core::environments::{
    fixture_2d, fixture_2d_min_time, fixture_2d_smooth, generate_building, generate_maze, random_gcs, two_route_fixture,
    unique_path_fixture, RANDOM_GCS_PATH_LIMIT,
};
use gcs_core::graph::GcsProblem;
use gcs_core::planner::{PlanningProblem, Trajectory};

use crate::bench::{run_gcs, run_plan, RunRecord, Status, Summary, Toggles};
use crate::formats::{BuildingJson, GcsJson, MazeJson, PreprocessJson, ProblemJson, ReportJson, TrajectoryJson};
use crate::render::render_svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

/// Default cap on simple paths enumerated by the oracle.
pub const DEFAULT_PATH_LIMIT: usize = 5000;

/// Trajectory planning in graphs of convex sets.
#[derive(Debug, Parser)]
#[command(name = "gcs", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a trajectory for a problem file.
    Plan(PlanArgs),
    /// Solve a bare graph-of-convex-sets shortest path file.
    Spp(SppArgs),
    /// Run a generator over a range of seeds and summarize the gaps.
    Bench(BenchArgs),
    /// Write a generated instance.
    Generate(GenerateArgs),
    /// Draw a 2D problem and optionally a trajectory as SVG.
    Render(RenderArgs),
}

#[derive(Clone, Debug, Args)]
pub struct PipelineArgs {
    /// Skip the edge redundancy filter.
    #[arg(long)]
    pub no_preprocess: bool,
    /// Leave out the two-cycle constraints.
    #[arg(long)]
    pub no_two_cycle: bool,
    /// Seed for path sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Distinct rounded paths to evaluate.
    #[arg(long, default_value_t = 10)]
    pub rounding_n: usize,
    /// Maximum sampling trials.
    #[arg(long, default_value_t = 100)]
    pub rounding_m: usize,
    /// Stop rounding once a path is within this relative gap of the relaxation.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Also enumerate simple paths for the true optimum.
    #[arg(long)]
    pub oracle: bool,
    /// Refuse the oracle when the graph has more simple paths than this.
    #[arg(long, default_value_t = DEFAULT_PATH_LIMIT)]
    pub path_limit: usize,
}

impl PipelineArgs {
    pub fn toggles(&self) -> Toggles {
        Toggles {
            preprocess: !self.no_preprocess,
            two_cycle: !self.no_two_cycle,
            seed: self.seed,
            rounding_n: self.rounding_n,
            rounding_m: self.rounding_m,
            tol: self.tol,
        }
    }

    fn oracle_limit(&self) -> Option<usize> {
        self.oracle.then_some(self.path_limit)
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Problem JSON.
    pub problem: PathBuf,
    /// Trajectory output; omitted means no trajectory file.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Run record output; defaults to stdout.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Rounding and preprocessing report output.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct SppArgs {
    /// Graph JSON.
    pub graph: PathBuf,
    /// Run record output; defaults to stdout.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Rounding report output.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchGenerator {
    Maze,
    Building,
    RandomGcs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub generator: BenchGenerator,
    /// Number of instances.
    #[arg(long, default_value_t = 10)]
    pub count: u64,
    /// Seed of the first instance; instance i uses first_seed + i.
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    /// Maze width in cells.
    #[arg(long, default_value_t = 8)]
    pub width: usize,
    /// Maze height in cells.
    #[arg(long, default_value_t = 8)]
    pub height: usize,
    /// Walls removed after maze generation.
    #[arg(long, default_value_t = 5)]
    pub removed: usize,
    /// Records as JSON lines; defaults to stdout.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Summary JSON; defaults to stderr.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FixtureVariant {
    MinLength,
    MinTime,
    Smooth,
}

#[derive(Debug, Subcommand)]
pub enum Generator {
    /// Random depth-first maze with extra walls removed.
    Maze {
        #[arg(long, default_value_t = 15)]
        width: usize,
        #[arg(long, default_value_t = 15)]
        height: usize,
        #[arg(long, default_value_t = 10)]
        removed: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the maze as text to stderr.
        #[arg(long)]
        ascii: bool,
    },
    /// Random 5x5 building with rooms, trees and openings.
    Building {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The 2D obstacle fixture.
    Fixture2d {
        #[arg(long, value_enum, default_value_t = FixtureVariant::MinLength)]
        variant: FixtureVariant,
        /// Regularization weight of the smooth variant.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Fixture with a diagonal corridor and an axis-aligned detour.
    TwoRoute,
    /// Random graph of convex sets (graph JSON).
    RandomGcs {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Graph with exactly one source-target path (graph JSON).
    UniquePath,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(subcommand)]
    pub generator: Generator,
    /// Problem or graph JSON output; defaults to stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Full maze or building description output.
    #[arg(long, global = true)]
    pub instance: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Problem JSON.
    pub problem: PathBuf,
    /// Trajectory JSON to overlay.
    #[arg(short, long)]
    pub trajectory: Option<PathBuf>,
    /// SVG output; defaults to stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

type CmdResult<T = ()> = std::result::Result<T, Failure>;

fn error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_ERROR,
        message: message.into(),
    }
}

fn core_error(e: gcs_core::Error) -> Failure {
    Failure {
        code: if crate::bench::is_infeasibility(&e) {
            EXIT_INFEASIBLE
        } else {
            EXIT_ERROR
        },
        message: e.to_string(),
    }
}

/// Reads JSON, reporting the file and the offending field on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = fs::read_to_string(path).map_err(|e| error(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        error(format!("{}: at `{at}`: {}", path.display(), e.inner()))
    })
}

pub fn load_problem(path: &Path) -> CmdResult<PlanningProblem> {
    let json: ProblemJson = read_json(path)?;
    PlanningProblem::try_from(json).map_err(|e| error(format!("{}: {e}", path.display())))
}

pub fn load_trajectory(path: &Path) -> CmdResult<Trajectory> {
    let json: TrajectoryJson = read_json(path)?;
    Trajectory::try_from(json).map_err(|e| error(format!("{}: {e}", path.display())))
}

pub fn load_graph(path: &Path) -> CmdResult<GcsProblem> {
    let json: GcsJson = read_json(path)?;
    GcsProblem::try_from(json).map_err(|e| error(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| error(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| error(e.to_string()))
        }
    }
}

fn record_result(rec: &RunRecord) -> CmdResult {
    match rec.status {
        Status::Ok => Ok(()),
        Status::Infeasible => Err(Failure {
            code: EXIT_INFEASIBLE,
            message: rec.error.clone().unwrap_or_default(),
        }),
        Status::Error => Err(error(rec.error.clone().unwrap_or_default())),
    }
}

pub fn cmd_plan(args: &PlanArgs) -> CmdResult {
    let problem = load_problem(&args.problem)?;
    let toggles = args.pipeline.toggles();
    let name = args.problem.display().to_string();
    let (rec, result) = run_plan(&name, &problem, &toggles, args.pipeline.oracle_limit(), &AutoSolver);
    emit(args.record.as_deref(), &to_json(&rec))?;
    if let Some(result) = result {
        result.trajectory.validate(&problem).map_err(core_error)?;
        if let Some(out) = &args.output {
            emit(Some(out), &to_json(&TrajectoryJson::from(&result.trajectory)))?;
        }
        if let Some(out) = &args.report {
            let report = serde_json::json!({
                "rounding": ReportJson::from(&result.report),
                "preprocess": PreprocessJson::from(&result.preprocess),
            });
            emit(Some(out), &to_json(&report))?;
        }
    }
    record_result(&rec)
}

pub fn cmd_spp(args: &SppArgs) -> CmdResult {
    let graph = load_graph(&args.graph)?;
    let toggles = args.pipeline.toggles();
    let name = args.graph.display().to_string();
    let (rec, report) = run_gcs(&name, &graph, &toggles, args.pipeline.oracle_limit(), &AutoSolver);
    emit(args.record.as_deref(), &to_json(&rec))?;
    if let (Some(out), Some(report)) = (&args.report, &report) {
        emit(Some(out), &to_json(&ReportJson::from(report)))?;
    }
    record_result(&rec)
}

/// Runs every seeded instance in order. Failing instances are recorded and
/// the run continues.
pub fn bench_records(args: &BenchArgs) -> Vec<RunRecord> {
    let toggles = args.pipeline.toggles();
    let oracle = args.pipeline.oracle_limit();
    (args.first_seed..args.first_seed + args.count)
        .map(|seed| match args.generator {
            BenchGenerator::Maze => {
                let name = format!("maze-{}x{}-r{}-s{seed}", args.width, args.height, args.removed);
                match generate_maze(args.width, args.height, args.removed, seed) {
                    Ok(m) => run_plan(&name, &m.problem(), &toggles, oracle, &AutoSolver).0,
                    Err(e) => RunRecord::failed(&name, &toggles, &e),
                }
            }
            BenchGenerator::Building => {
                let name = format!("building-s{seed}");
                run_plan(&name, &generate_building(seed).problem(), &toggles, oracle, &AutoSolver).0
            }
            BenchGenerator::RandomGcs => {
                let name = format!("random-gcs-s{seed}");
                let limit = oracle.map(|l| l.max(RANDOM_GCS_PATH_LIMIT));
                run_gcs(&name, &random_gcs(seed), &toggles, limit, &AutoSolver).0
            }
        })
        .collect()
}

pub fn cmd_bench(args: &BenchArgs) -> CmdResult {
    let mut lines = String::new();
    let mut records = Vec::new();
    for rec in bench_records(args) {
        lines.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        lines.push('\n');
        records.push(rec);
    }
    emit(args.records.as_deref(), &lines)?;
    let summary = to_json(&Summary::of(&records));
    match &args.summary {
        Some(p) => emit(Some(p), &summary),
        None => {
            eprint!("{summary}");
            Ok(())
        }
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> CmdResult {
    let out = args.output.as_deref();
    let problem = match &args.generator {
        Generator::Maze {
            width,
            height,
            removed,
            seed,
            ascii,
        } => {
            let m = generate_maze(*width, *height, *removed, *seed).map_err(core_error)?;
            if *ascii {
                eprint!("{}", m.ascii());
            }
            if let Some(p) = &args.instance {
                emit(Some(p), &to_json(&MazeJson::from(&m)))?;
            }
            m.problem()
        }
        Generator::Building { seed } => {
            let b = generate_building(*seed);
            if let Some(p) = &args.instance {
                emit(Some(p), &to_json(&BuildingJson::from(&b)))?;
            }
            b.problem()
        }
        Generator::Fixture2d { variant, eps } => match variant {
            FixtureVariant::MinLength => fixture_2d(),
            FixtureVariant::MinTime => fixture_2d_min_time(),
            FixtureVariant::Smooth => fixture_2d_smooth(*eps),
        },
        Generator::TwoRoute => two_route_fixture(),
        Generator::RandomGcs { seed } => return emit(out, &to_json(&GcsJson::from(&random_gcs(*seed)))),
        Generator::UniquePath => return emit(out, &to_json(&GcsJson::from(&unique_path_fixture()))),
    };
    emit(out, &to_json(&ProblemJson::from(&problem)))
}

pub fn cmd_render(args: &RenderArgs) -> CmdResult {
    let problem = load_problem(&args.problem)?;
    let trajectory = args.trajectory.as_deref().map(load_trajectory).transpose()?;
    let svg = render_svg(&problem, trajectory.as_ref()).map_err(core_error)?;
    emit(args.output.as_deref(), &svg)
}

/// Dispatches and prints failures to stderr.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Spp(a) => cmd_spp(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Render(a) => cmd_render(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
