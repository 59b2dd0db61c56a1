//! JSON file formats. Non-finite numbers are written as `null`.

use serde::{Deserialize, Serialize};

use gcs_core::bezier::BezierCurve;
use gcs_core::conic::AffineExpr;
use gcs_core::environments::{BuildingInstance, MazeInstance, WallKind};
use gcs_core::geometry::{Aabb, ConvexSet};
use gcs_core::graph::{Edge, EdgeConstraint, EdgeLength, GcsProblem, Vertex};
use gcs_core::planner::{BoundaryVelocity, PlanningProblem, PlanningSpec, Segment, Trajectory};
use gcs_core::preprocess::PreprocessReport;
use gcs_core::rounding::RoundingReport;
use gcs_core::{Error, Result};

/// `Some(x)` for finite `x`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxJson {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl From<&Aabb> for BoxJson {
    fn from(b: &Aabb) -> Self {
        Self {
            lo: b.lo.clone(),
            hi: b.hi.clone(),
        }
    }
}

impl From<BoxJson> for Aabb {
    fn from(b: BoxJson) -> Self {
        Aabb { lo: b.lo, hi: b.hi }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SetJson {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Point {
        x: Vec<f64>,
    },
    Hpolytope {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<BoxJson>,
    },
}

impl From<&ConvexSet> for SetJson {
    fn from(s: &ConvexSet) -> Self {
        match s {
            ConvexSet::Box(b) => SetJson::Box {
                lo: b.lo.clone(),
                hi: b.hi.clone(),
            },
            ConvexSet::Point(x) => SetJson::Point { x: x.clone() },
            ConvexSet::HPolytope(_) => {
                let h = s.halfspaces();
                SetJson::Hpolytope {
                    a: (0..h.rows()).map(|i| h.row(i).to_vec()).collect(),
                    b: h.b.clone(),
                    bounds: s.bounds().as_ref().map(BoxJson::from),
                }
            }
        }
    }
}

impl TryFrom<SetJson> for ConvexSet {
    type Error = Error;

    fn try_from(s: SetJson) -> Result<Self> {
        match s {
            SetJson::Box { lo, hi } => ConvexSet::boxed(lo, hi),
            SetJson::Point { x } => ConvexSet::point(x),
            SetJson::Hpolytope { a, b, bounds: None } => ConvexSet::hpolytope(a, b),
            SetJson::Hpolytope { a, b, bounds: Some(bx) } => ConvexSet::hpolytope_with_bounds(a, b, bx.into()),
        }
    }
}

fn default_b() -> f64 {
    1.0
}

fn default_degree() -> usize {
    1
}

fn default_t_min() -> f64 {
    1e-3
}

fn default_hdot_min() -> f64 {
    gcs_core::planner::DEFAULT_HDOT_MIN
}

fn default_reg_order() -> usize {
    2
}

/// Planning parameters. Omitted fields take minimum-length defaults; an
/// omitted velocity set is the unit box and an omitted `t_max` is 1000.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecJson {
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub eta: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_degree: Option<usize>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub velocity_set: Option<SetJson>,
    #[serde(rename = "Tmin", default = "default_t_min")]
    pub t_min: f64,
    #[serde(rename = "Tmax", default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub q0: Vec<f64>,
    #[serde(rename = "qT")]
    pub qt: Vec<f64>,
    #[serde(default)]
    pub qdot0: VelocityJson,
    #[serde(rename = "qdotT", default)]
    pub qdott: VelocityJson,
    #[serde(default)]
    pub zero_derivatives: Vec<usize>,
    #[serde(default = "default_hdot_min")]
    pub hdot_min: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "default_reg_order")]
    pub reg_order: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeTag {
    Free,
}

/// A fixed boundary velocity or the string `"free"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VelocityJson {
    Free(FreeTag),
    Fixed(Vec<f64>),
}

impl Default for VelocityJson {
    fn default() -> Self {
        VelocityJson::Free(FreeTag::Free)
    }
}

fn velocity_json(v: &BoundaryVelocity) -> VelocityJson {
    match v {
        BoundaryVelocity::Free => VelocityJson::default(),
        BoundaryVelocity::Fixed(x) => VelocityJson::Fixed(x.clone()),
    }
}

fn velocity_from(v: VelocityJson) -> BoundaryVelocity {
    match v {
        VelocityJson::Free(_) => BoundaryVelocity::Free,
        VelocityJson::Fixed(x) => BoundaryVelocity::Fixed(x),
    }
}

impl From<&PlanningSpec> for SpecJson {
    fn from(s: &PlanningSpec) -> Self {
        Self {
            a: s.a,
            b: s.b,
            c: s.c,
            eta: s.eta,
            degree: s.degree,
            time_degree: s.time_degree,
            velocity_set: Some((&s.velocity_set).into()),
            t_min: s.t_min,
            t_max: Some(s.t_max),
            q0: s.q0.clone(),
            qt: s.qt.clone(),
            qdot0: velocity_json(&s.qdot0),
            qdott: velocity_json(&s.qdott),
            zero_derivatives: s.zero_derivatives.clone(),
            hdot_min: s.hdot_min,
            eps: s.eps,
            reg_order: s.reg_order,
        }
    }
}

impl TryFrom<SpecJson> for PlanningSpec {
    type Error = Error;

    fn try_from(s: SpecJson) -> Result<Self> {
        let n = s.q0.len();
        let velocity_set = match s.velocity_set {
            Some(v) => v.try_into()?,
            None => ConvexSet::boxed(vec![-1.0; n], vec![1.0; n])?,
        };
        Ok(PlanningSpec {
            a: s.a,
            b: s.b,
            c: s.c,
            eta: s.eta,
            degree: s.degree,
            time_degree: s.time_degree,
            velocity_set,
            t_min: s.t_min,
            t_max: s.t_max.unwrap_or(1000.0),
            q0: s.q0,
            qt: s.qt,
            qdot0: velocity_from(s.qdot0),
            qdott: velocity_from(s.qdott),
            zero_derivatives: s.zero_derivatives,
            hdot_min: s.hdot_min,
            eps: s.eps,
            reg_order: s.reg_order,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemJson {
    pub regions: Vec<SetJson>,
    pub spec: SpecJson,
}

impl From<&PlanningProblem> for ProblemJson {
    fn from(p: &PlanningProblem) -> Self {
        Self {
            regions: p.regions.iter().map(SetJson::from).collect(),
            spec: (&p.spec).into(),
        }
    }
}

impl TryFrom<ProblemJson> for PlanningProblem {
    type Error = Error;

    fn try_from(p: ProblemJson) -> Result<Self> {
        Ok(PlanningProblem {
            regions: p.regions.into_iter().map(ConvexSet::try_from).collect::<Result<_>>()?,
            spec: p.spec.try_into()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveJson {
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub region: usize,
    /// Position curve.
    pub r: CurveJson,
    /// Time scaling, one-dimensional points.
    pub h: CurveJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub duration: f64,
    pub segments: Vec<SegmentJson>,
}

impl From<&Trajectory> for TrajectoryJson {
    fn from(t: &Trajectory) -> Self {
        Self {
            duration: t.duration(),
            segments: t
                .segments()
                .iter()
                .map(|s| SegmentJson {
                    region: s.region,
                    r: CurveJson {
                        points: s.r.control_points().to_vec(),
                    },
                    h: CurveJson {
                        points: s.h.control_points().to_vec(),
                    },
                })
                .collect(),
        }
    }
}

impl TryFrom<TrajectoryJson> for Trajectory {
    type Error = Error;

    fn try_from(t: TrajectoryJson) -> Result<Self> {
        let segments = t
            .segments
            .into_iter()
            .map(|s| {
                Ok(Segment {
                    region: s.region,
                    r: BezierCurve::new(s.r.points)?,
                    h: BezierCurve::new(s.h.points)?,
                })
            })
            .collect::<Result<_>>()?;
        Trajectory::new(segments)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExprJson {
    pub terms: Vec<(usize, f64)>,
    #[serde(default)]
    pub constant: f64,
}

impl From<&AffineExpr> for ExprJson {
    fn from(e: &AffineExpr) -> Self {
        Self {
            terms: e.terms.clone(),
            constant: e.constant,
        }
    }
}

impl From<ExprJson> for AffineExpr {
    fn from(e: ExprJson) -> Self {
        let mut out = AffineExpr::constant(e.constant);
        for (i, c) in e.terms {
            out.add_term(i, c);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadTermJson {
    pub u: Vec<ExprJson>,
    pub w: ExprJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedJson {
    pub weight: f64,
    pub length: LengthJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LengthJson {
    Zero,
    Affine { expr: ExprJson },
    L2Sum { blocks: Vec<Vec<ExprJson>> },
    QuadOverLinSum { terms: Vec<QuadTermJson> },
    WeightedSum { parts: Vec<WeightedJson> },
}

fn exprs(v: &[AffineExpr]) -> Vec<ExprJson> {
    v.iter().map(ExprJson::from).collect()
}

fn unexprs(v: Vec<ExprJson>) -> Vec<AffineExpr> {
    v.into_iter().map(AffineExpr::from).collect()
}

impl From<&EdgeLength> for LengthJson {
    fn from(l: &EdgeLength) -> Self {
        match l {
            EdgeLength::Zero => LengthJson::Zero,
            EdgeLength::Affine(e) => LengthJson::Affine { expr: e.into() },
            EdgeLength::L2Sum(blocks) => LengthJson::L2Sum {
                blocks: blocks.iter().map(|b| exprs(b)).collect(),
            },
            EdgeLength::QuadOverLinSum(terms) => LengthJson::QuadOverLinSum {
                terms: terms
                    .iter()
                    .map(|(u, w)| QuadTermJson {
                        u: exprs(u),
                        w: w.into(),
                    })
                    .collect(),
            },
            EdgeLength::WeightedSum(parts) => LengthJson::WeightedSum {
                parts: parts
                    .iter()
                    .map(|(w, l)| WeightedJson {
                        weight: *w,
                        length: l.into(),
                    })
                    .collect(),
            },
        }
    }
}

impl From<LengthJson> for EdgeLength {
    fn from(l: LengthJson) -> Self {
        match l {
            LengthJson::Zero => EdgeLength::Zero,
            LengthJson::Affine { expr } => EdgeLength::Affine(expr.into()),
            LengthJson::L2Sum { blocks } => EdgeLength::L2Sum(blocks.into_iter().map(unexprs).collect()),
            LengthJson::QuadOverLinSum { terms } => {
                EdgeLength::QuadOverLinSum(terms.into_iter().map(|t| (unexprs(t.u), t.w.into())).collect())
            }
            LengthJson::WeightedSum { parts } => {
                EdgeLength::WeightedSum(parts.into_iter().map(|p| (p.weight, p.length.into())).collect())
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintJson {
    #[serde(default)]
    pub equalities: Vec<ExprJson>,
    #[serde(default)]
    pub inequalities: Vec<ExprJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexJson {
    pub label: String,
    pub set: Option<SetJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub tail: usize,
    pub head: usize,
    pub length: LengthJson,
    #[serde(default)]
    pub constraint: ConstraintJson,
}

/// A graph of convex sets, replayable through the `spp` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcsJson {
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<EdgeJson>,
    pub source: usize,
    pub target: usize,
}

impl From<&GcsProblem> for GcsJson {
    fn from(p: &GcsProblem) -> Self {
        Self {
            vertices: p
                .vertices()
                .iter()
                .map(|v| VertexJson {
                    label: v.label.clone(),
                    set: v.set.as_ref().map(SetJson::from),
                })
                .collect(),
            edges: p
                .edges()
                .iter()
                .map(|e| EdgeJson {
                    tail: e.tail,
                    head: e.head,
                    length: (&e.length).into(),
                    constraint: ConstraintJson {
                        equalities: exprs(&e.constraint.equalities),
                        inequalities: exprs(&e.constraint.inequalities),
                    },
                })
                .collect(),
            source: p.source(),
            target: p.target(),
        }
    }
}

impl TryFrom<GcsJson> for GcsProblem {
    type Error = Error;

    fn try_from(g: GcsJson) -> Result<Self> {
        let vertices = g
            .vertices
            .into_iter()
            .map(|v| {
                Ok(Vertex {
                    label: v.label,
                    set: v.set.map(ConvexSet::try_from).transpose()?,
                })
            })
            .collect::<Result<_>>()?;
        let edges = g
            .edges
            .into_iter()
            .map(|e| Edge {
                tail: e.tail,
                head: e.head,
                length: e.length.into(),
                constraint: EdgeConstraint {
                    equalities: unexprs(e.constraint.equalities),
                    inequalities: unexprs(e.constraint.inequalities),
                },
            })
            .collect();
        GcsProblem::new(vertices, edges, g.source, g.target)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateJson {
    pub path: Vec<usize>,
    pub cost: Option<f64>,
}

/// Deterministic part of a rounding run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub best_path: Option<Vec<usize>>,
    pub relaxed_cost: Option<f64>,
    pub rounded_cost: Option<f64>,
    pub gap: Option<f64>,
    pub candidates: Vec<CandidateJson>,
    pub trials: usize,
    pub early_stop: bool,
    pub seed: u64,
}

impl From<&RoundingReport> for ReportJson {
    fn from(r: &RoundingReport) -> Self {
        Self {
            best_path: r.best_path.clone(),
            relaxed_cost: finite(r.relaxed_cost),
            rounded_cost: finite(r.rounded_cost),
            gap: finite(r.gap),
            candidates: r
                .candidates
                .iter()
                .map(|c| CandidateJson {
                    path: c.path.clone(),
                    cost: finite(c.cost),
                })
                .collect(),
            trials: r.trials,
            early_stop: r.early_stop,
            seed: r.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovedEdgeJson {
    pub edge: usize,
    pub tail: usize,
    pub head: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessJson {
    pub edges_tested: usize,
    pub removed: Vec<RemovedEdgeJson>,
    pub two_cycle_pairs: usize,
}

impl From<&PreprocessReport> for PreprocessJson {
    fn from(p: &PreprocessReport) -> Self {
        Self {
            edges_tested: p.tests.len(),
            removed: p
                .removed()
                .map(|t| RemovedEdgeJson {
                    edge: t.edge,
                    tail: t.tail,
                    head: t.head,
                    reason: PreprocessReport::reason(t),
                })
                .collect(),
            two_cycle_pairs: p.two_cycle_pairs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazeJson {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Row-major, `east[y * width + x]`.
    pub east: Vec<bool>,
    pub north: Vec<bool>,
    /// Removed walls as `[x, y, "east" | "north"]`.
    pub removed: Vec<(usize, usize, String)>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub problem: ProblemJson,
}

impl From<&MazeInstance> for MazeJson {
    fn from(m: &MazeInstance) -> Self {
        Self {
            width: m.width,
            height: m.height,
            seed: m.seed,
            east: m.east.clone(),
            north: m.north.clone(),
            removed: m
                .removed
                .iter()
                .map(|w| (w.x, w.y, format!("{:?}", w.side).to_lowercase()))
                .collect(),
            start: m.start,
            goal: m.goal,
            problem: (&m.problem()).into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingWallJson {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingJson {
    pub seed: u64,
    /// Row-major cell occupancy.
    pub cells: Vec<String>,
    pub walls: Vec<BuildingWallJson>,
    pub trees: Vec<BoxJson>,
    pub free_boxes: Vec<BoxJson>,
    pub solids: Vec<BoxJson>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub problem: ProblemJson,
}

impl From<&BuildingInstance> for BuildingJson {
    fn from(b: &BuildingInstance) -> Self {
        let boxes = |v: &[Aabb]| v.iter().map(BoxJson::from).collect();
        Self {
            seed: b.seed,
            cells: b.cells.iter().map(|c| format!("{c:?}").to_lowercase()).collect(),
            walls: b
                .walls
                .iter()
                .map(|w| BuildingWallJson {
                    a: w.a,
                    b: w.b,
                    kind: match w.kind {
                        WallKind::Outer(k) => format!("outer:{k:?}"),
                        WallKind::Divider(k) => format!("divider:{k:?}"),
                    },
                })
                .collect(),
            trees: boxes(&b.trees),
            free_boxes: boxes(&b.free_boxes),
            solids: boxes(&b.solids),
            start: b.start,
            goal: b.goal,
            problem: (&b.problem()).into(),
        }
    }
}

/// Reads `null` as `+∞`.
pub fn cost_or_inf(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gcs_core::environments::{fixture_2d_smooth, random_gcs, unique_path_fixture};

    #[test]
    fn problem_round_trip() {
        let p = fixture_2d_smooth(0.1);
        let json = serde_json::to_string(&ProblemJson::from(&p)).unwrap();
        let back: PlanningProblem = serde_json::from_str::<ProblemJson>(&json).unwrap().try_into().unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn gcs_round_trip() {
        for p in [random_gcs(3), unique_path_fixture()] {
            let json = serde_json::to_string(&GcsJson::from(&p)).unwrap();
            let back: GcsProblem = serde_json::from_str::<GcsJson>(&json).unwrap().try_into().unwrap();
            assert_eq!(GcsJson::from(&back), GcsJson::from(&p));
        }
    }

    #[test]
    fn minimal_spec_takes_defaults() {
        let p: ProblemJson = serde_json::from_str(
            r#"{"regions":[{"type":"box","lo":[0,0],"hi":[1,1]}],"spec":{"q0":[0.1,0.1],"qT":[0.9,0.9]}}"#,
        )
        .unwrap();
        let p: PlanningProblem = p.try_into().unwrap();
        assert_eq!(p.spec.b, 1.0);
        assert_eq!(p.spec.degree, 1);
        assert_eq!(p.spec.velocity_set, ConvexSet::boxed(vec![-1.0; 2], vec![1.0; 2]).unwrap());
    }

    #[test]
    fn infinite_costs_become_null() {
        let c = CandidateJson {
            path: vec![0, 1],
            cost: finite(f64::INFINITY),
        };
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"path":[0,1],"cost":null}"#);
        assert_eq!(cost_or_inf(None), f64::INFINITY);
    }
}
