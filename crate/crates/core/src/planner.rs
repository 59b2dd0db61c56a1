//! Trajectory planning through a union of convex safe regions.
//!
//! Each region contributes a vertex whose variables are the control points
//! of a position curve `r` and a time-scaling curve `h`; the chosen path
//! strings these segments into a trajectory `q(t) = r(h⁻¹(t))`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bezier::{derivative_matrix, BezierCurve};
use crate::conic::{AffineExpr, ConicSolver};
use crate::error::{Error, Result};
use crate::exec::Clock;
use crate::geometry::{intersects, Aabb, ConvexSet, MEMBERSHIP_TOL};
use crate::graph::{
    solve_relaxation, EdgeConstraint, EdgeLength, GcsBuilder, GcsProblem, RelaxationOptions, VertexId,
};
use crate::preprocess::{edge_redundancy_filter, PreprocessReport};
use crate::rounding::{round, RoundingConfig, RoundingReport};

pub const DEFAULT_HDOT_MIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryVelocity {
    Free,
    Fixed(Vec<f64>),
}

impl BoundaryVelocity {
    fn fixed(&self) -> Option<&[f64]> {
        match self {
            BoundaryVelocity::Free => None,
            BoundaryVelocity::Fixed(v) => Some(v),
        }
    }
}

/// Costs, smoothness and boundary data of a planning query.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanningSpec {
    /// Weight on duration.
    pub a: f64,
    /// Weight on path length.
    pub b: f64,
    /// Weight on energy.
    pub c: f64,
    /// Continuity order at junctions.
    pub eta: usize,
    /// Degree of the position curves.
    pub degree: usize,
    /// Degree of the time scaling, if different; both are raised to the
    /// larger one.
    pub time_degree: Option<usize>,
    /// Admissible velocities.
    pub velocity_set: ConvexSet,
    pub t_min: f64,
    pub t_max: f64,
    pub q0: Vec<f64>,
    pub qt: Vec<f64>,
    pub qdot0: BoundaryVelocity,
    pub qdott: BoundaryVelocity,
    /// Derivative orders `l >= 2` that vanish at both ends.
    pub zero_derivatives: Vec<usize>,
    pub hdot_min: f64,
    /// Weight of the higher-derivative regularizer.
    pub eps: f64,
    /// Highest derivative order the regularizer penalizes.
    pub reg_order: usize,
}

impl PlanningSpec {
    /// Minimum-length defaults: `b = 1`, `d = 1`, `η = 0`, free velocities.
    pub fn new(q0: Vec<f64>, qt: Vec<f64>, velocity_set: ConvexSet, t_max: f64) -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            c: 0.0,
            eta: 0,
            degree: 1,
            time_degree: None,
            velocity_set,
            t_min: 1e-3,
            t_max,
            q0,
            qt,
            qdot0: BoundaryVelocity::Free,
            qdott: BoundaryVelocity::Free,
            zero_derivatives: Vec::new(),
            hdot_min: DEFAULT_HDOT_MIN,
            eps: 0.0,
            reg_order: 2,
        }
    }

    pub fn dim(&self) -> usize {
        self.q0.len()
    }

    /// Shared degree of `r` and `h` after elevation.
    pub fn effective_degree(&self) -> usize {
        self.degree.max(self.time_degree.unwrap_or(0))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let d = self.effective_degree();
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if n == 0 {
            return bad("configurations need at least one coordinate");
        }
        let lens = [Some(self.qt.len()), self.qdot0.fixed().map(<[f64]>::len), self.qdott.fixed().map(<[f64]>::len)];
        if let Some(found) = lens.into_iter().flatten().find(|&l| l != n) {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
        if self.velocity_set.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.velocity_set.dim(),
            });
        }
        if [self.a, self.b, self.c, self.eps].iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return bad("cost weights must be finite and nonnegative");
        }
        if d < self.eta + 1 {
            return Err(Error::InvalidArgument(format!(
                "degree {d} must be at least eta + 1 = {}",
                self.eta + 1
            )));
        }
        if d > crate::bezier::MAX_DEGREE {
            return bad("degree too large");
        }
        if !(self.t_min > 0.0) || !(self.t_max >= self.t_min) || !self.t_max.is_finite() {
            return bad("need 0 < Tmin <= Tmax < inf");
        }
        if !(self.hdot_min >= 0.0) {
            return bad("hdot_min must be nonnegative");
        }
        if self.c > 0.0 && self.hdot_min <= 0.0 {
            return bad("the energy term needs hdot_min > 0");
        }
        if self.eps > 0.0 && (self.reg_order < 2 || self.reg_order > d) {
            return Err(Error::InvalidArgument(format!(
                "regularizer order {} must lie in [2, {d}]",
                self.reg_order
            )));
        }
        for &l in &self.zero_derivatives {
            if l < 2 || l > d {
                return Err(Error::InvalidArgument(format!("zero-derivative order {l} must lie in [2, {d}]")));
            }
            if self.qdot0.fixed().is_none() || self.qdott.fixed().is_none() {
                return bad("zero higher derivatives need fixed boundary velocities");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanningProblem {
    pub regions: Vec<ConvexSet>,
    pub spec: PlanningSpec,
}

/// Index map of a region vertex: `(r_0, ..., r_d, h_0, ..., h_d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub d: usize,
}

impl Layout {
    pub fn of(spec: &PlanningSpec) -> Self {
        Self {
            n: spec.dim(),
            d: spec.effective_degree(),
        }
    }

    pub fn dim(&self) -> usize {
        (self.d + 1) * (self.n + 1)
    }

    pub fn r(&self, k: usize, j: usize) -> usize {
        k * self.n + j
    }

    pub fn h(&self, k: usize) -> usize {
        (self.d + 1) * self.n + k
    }

    /// Control point `k` of the `l`-th derivative of coordinate `j` of `r`
    /// (`j == n` selects `h`), offset by `base`.
    fn derivative(&self, l: usize, k: usize, j: usize, base: usize) -> AffineExpr {
        let m = derivative_matrix(self.d, l).expect("order checked by validate");
        let mut e = AffineExpr::zero();
        for (i, &c) in m[k].iter().enumerate() {
            if c != 0.0 {
                let idx = if j == self.n { self.h(i) } else { self.r(i, j) };
                e.add_term(base + idx, c);
            }
        }
        e
    }

    /// Splits vertex values into the two curves.
    pub fn curves(&self, x: &[f64]) -> Result<(BezierCurve, BezierCurve)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let r = (0..=self.d).map(|k| x[self.r(k, 0)..self.r(k, 0) + self.n].to_vec()).collect();
        let h = (0..=self.d).map(|k| vec![x[self.h(k)]]).collect();
        Ok((BezierCurve::new(r)?, BezierCurve::new(h)?))
    }
}

/// The set of admissible control points for one region.
pub fn vertex_set(region: &ConvexSet, spec: &PlanningSpec) -> Result<ConvexSet> {
    let lay = Layout::of(spec);
    let (n, d) = (lay.n, lay.d);
    if region.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: region.dim() });
    }
    let bounds = region.bounds().ok_or(Error::Unbounded)?;
    let q = region.halfspaces();
    let vel = spec.velocity_set.halfspaces();
    let df = d as f64;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for k in 0..=d {
        for i in 0..q.rows() {
            let mut row = vec![0.0; lay.dim()];
            for j in 0..n {
                row[lay.r(k, j)] = q.row(i)[j];
            }
            rows.push(row);
            rhs.push(q.b[i]);
        }
    }
    for k in 0..d {
        // d (h_{k+1} - h_k) >= hdot_min
        let mut row = vec![0.0; lay.dim()];
        row[lay.h(k)] = df;
        row[lay.h(k + 1)] = -df;
        rows.push(row);
        rhs.push(-spec.hdot_min);
        // A_D d (r_{k+1} - r_k) <= b_D d (h_{k+1} - h_k)
        for i in 0..vel.rows() {
            let mut row = vec![0.0; lay.dim()];
            for j in 0..n {
                row[lay.r(k + 1, j)] += df * vel.row(i)[j];
                row[lay.r(k, j)] -= df * vel.row(i)[j];
            }
            row[lay.h(k + 1)] -= df * vel.b[i];
            row[lay.h(k)] += df * vel.b[i];
            rows.push(row);
            rhs.push(0.0);
        }
    }
    let mut row = vec![0.0; lay.dim()];
    row[lay.h(0)] = -1.0;
    rows.push(row);
    rhs.push(0.0);
    let mut row = vec![0.0; lay.dim()];
    row[lay.h(d)] = 1.0;
    rows.push(row);
    rhs.push(spec.t_max);

    let mut lo = Vec::with_capacity(lay.dim());
    let mut hi = Vec::with_capacity(lay.dim());
    for _ in 0..=d {
        lo.extend_from_slice(&bounds.lo);
        hi.extend_from_slice(&bounds.hi);
    }
    lo.extend(core::iter::repeat(0.0).take(d + 1));
    hi.extend(core::iter::repeat(spec.t_max).take(d + 1));
    ConvexSet::hpolytope_with_bounds(rows, rhs, Aabb { lo, hi })
}

/// Which kind of edge a constraint or length is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    FromSource,
    ToTarget,
    Between,
}

/// `r^{(l)}_k - h^{(l)}_k v = 0` for each coordinate.
fn scaled_derivative_rows(lay: &Layout, l: usize, k: usize, v: &[f64], base: usize) -> Vec<AffineExpr> {
    (0..lay.n)
        .map(|j| {
            let mut e = lay.derivative(l, k, j, base);
            e.add_expr(&lay.derivative(l, k, lay.n, base), -v[j]);
            e
        })
        .collect()
}

/// Boundary conditions and junction continuity.
pub fn edge_constraints(kind: EdgeKind, spec: &PlanningSpec) -> Result<EdgeConstraint> {
    spec.validate()?;
    let lay = Layout::of(spec);
    let (n, d) = (lay.n, lay.d);
    let mut c = EdgeConstraint::none();
    match kind {
        EdgeKind::FromSource => {
            for j in 0..n {
                c.equalities.push(AffineExpr::term(lay.r(0, j), 1.0) - AffineExpr::constant(spec.q0[j]));
            }
            c.equalities.push(AffineExpr::term(lay.h(0), 1.0));
            if let Some(v) = spec.qdot0.fixed() {
                c.equalities.extend(scaled_derivative_rows(&lay, 1, 0, v, 0));
                for &l in &spec.zero_derivatives {
                    c.equalities.extend(scaled_derivative_rows(&lay, l, 0, v, 0));
                }
            }
        }
        EdgeKind::ToTarget => {
            for j in 0..n {
                c.equalities.push(AffineExpr::term(lay.r(d, j), 1.0) - AffineExpr::constant(spec.qt[j]));
            }
            c.inequalities.push(AffineExpr::constant(spec.t_min) - AffineExpr::term(lay.h(d), 1.0));
            c.inequalities.push(AffineExpr::term(lay.h(d), 1.0) - AffineExpr::constant(spec.t_max));
            if let Some(v) = spec.qdott.fixed() {
                c.equalities.extend(scaled_derivative_rows(&lay, 1, d - 1, v, 0));
                for &l in &spec.zero_derivatives {
                    c.equalities.extend(scaled_derivative_rows(&lay, l, d - l, v, 0));
                }
            }
        }
        EdgeKind::Between => {
            let head = lay.dim();
            for l in 0..=spec.eta {
                for j in 0..=n {
                    c.equalities
                        .push(lay.derivative(l, d - l, j, 0) - lay.derivative(l, 0, j, head));
                }
            }
        }
    }
    Ok(c)
}

/// Higher-derivative penalty on the tail segment.
pub fn regularizer_terms(spec: &PlanningSpec) -> Result<EdgeLength> {
    spec.validate()?;
    if spec.eps == 0.0 {
        return Ok(EdgeLength::Zero);
    }
    let lay = Layout::of(spec);
    let d = lay.d;
    let mut parts = Vec::new();
    for l in 2..=spec.reg_order {
        let terms = (0..=d - l)
            .map(|k| {
                let u = (0..=lay.n).map(|j| lay.derivative(l, k, j, 0)).collect();
                (u, AffineExpr::constant(1.0))
            })
            .collect();
        parts.push((spec.eps / (d - l + 1) as f64, EdgeLength::QuadOverLinSum(terms)));
    }
    Ok(EdgeLength::WeightedSum(parts))
}

/// Cost of the tail segment of an edge; edges out of the source are free.
pub fn edge_length(kind: EdgeKind, spec: &PlanningSpec) -> Result<EdgeLength> {
    spec.validate()?;
    if kind == EdgeKind::FromSource {
        return Ok(EdgeLength::Zero);
    }
    let lay = Layout::of(spec);
    let (n, d) = (lay.n, lay.d);
    let diff = |k: usize| -> Vec<AffineExpr> {
        (0..n)
            .map(|j| AffineExpr::term(lay.r(k + 1, j), 1.0).with_term(lay.r(k, j), -1.0))
            .collect()
    };
    let mut parts = Vec::new();
    if spec.a > 0.0 {
        parts.push((
            spec.a,
            EdgeLength::Affine(AffineExpr::term(lay.h(d), 1.0).with_term(lay.h(0), -1.0)),
        ));
    }
    if spec.b > 0.0 {
        parts.push((spec.b, EdgeLength::L2Sum((0..d).map(diff).collect())));
    }
    if spec.c > 0.0 {
        let terms = (0..d)
            .map(|k| (diff(k), AffineExpr::term(lay.h(k + 1), 1.0).with_term(lay.h(k), -1.0)))
            .collect();
        parts.push((spec.c, EdgeLength::QuadOverLinSum(terms)));
    }
    if spec.eps > 0.0 {
        parts.push((1.0, regularizer_terms(spec)?));
    }
    Ok(match parts.len() {
        0 => EdgeLength::Zero,
        _ => EdgeLength::WeightedSum(parts),
    })
}

/// The graph built from a planning problem. Region `i` is vertex `i`; the
/// source and target follow the regions.
#[derive(Clone, Debug)]
pub struct PlanGraph {
    pub problem: GcsProblem,
    pub num_regions: usize,
}

impl PlanGraph {
    pub fn source(&self) -> VertexId {
        self.num_regions
    }

    pub fn target(&self) -> VertexId {
        self.num_regions + 1
    }
}

pub fn build_graph(problem: &PlanningProblem, solver: &dyn ConicSolver) -> Result<PlanGraph> {
    let spec = &problem.spec;
    spec.validate()?;
    let r = problem.regions.len();
    for q in &problem.regions {
        if q.dim() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), found: q.dim() });
        }
        if q.bounds().is_none() {
            return Err(Error::Unbounded);
        }
    }
    let starts: Vec<usize> = (0..r).filter_map(|i| problem.regions[i].contains(&spec.q0).ok()?.then_some(i)).collect();
    let goals: Vec<usize> = (0..r).filter_map(|i| problem.regions[i].contains(&spec.qt).ok()?.then_some(i)).collect();
    if starts.is_empty() {
        return Err(Error::InvalidProblem(format!("no safe region contains the start q0 = {:?}", spec.q0)));
    }
    if goals.is_empty() {
        return Err(Error::InvalidProblem(format!("no safe region contains the goal qT = {:?}", spec.qt)));
    }
    let mut g = GcsBuilder::new();
    for (i, q) in problem.regions.iter().enumerate() {
        g.add_vertex(format!("{i}"), Some(vertex_set(q, spec)?));
    }
    let s = g.add_vertex("source", None);
    let t = g.add_vertex("target", None);
    let between_c = edge_constraints(EdgeKind::Between, spec)?;
    let between_l = edge_length(EdgeKind::Between, spec)?;
    for &i in &starts {
        g.add_edge(s, i, edge_length(EdgeKind::FromSource, spec)?, edge_constraints(EdgeKind::FromSource, spec)?);
    }
    for i in 0..r {
        for j in i + 1..r {
            if intersects(&problem.regions[i], &problem.regions[j], solver)? {
                g.add_edge(i, j, between_l.clone(), between_c.clone());
                g.add_edge(j, i, between_l.clone(), between_c.clone());
            }
        }
    }
    let to_target_c = edge_constraints(EdgeKind::ToTarget, spec)?;
    let to_target_l = edge_length(EdgeKind::ToTarget, spec)?;
    for &i in &goals {
        g.add_edge(i, t, to_target_l.clone(), to_target_c.clone());
    }
    g.set_source(s).set_target(t);
    Ok(PlanGraph {
        problem: g.build()?,
        num_regions: r,
    })
}

/// One piece of a trajectory: shape `r` and time scaling `h` over `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub region: usize,
    pub r: BezierCurve,
    pub h: BezierCurve,
}

/// Piecewise Bézier trajectory; segment `ν` covers path coordinates
/// `[ν, ν + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    segments: Vec<Segment>,
}

impl Trajectory {
    /// Rejects empty input and time scalings that are not increasing.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidTrajectory("no segments".into()));
        }
        for (nu, s) in segments.iter().enumerate() {
            if s.h.dim() != 1 {
                return Err(Error::InvalidTrajectory(format!("segment {nu}: time scaling is not scalar")));
            }
            if s.h.derivative().control_points().iter().any(|p| !(p[0] > 0.0)) {
                return Err(Error::InvalidTrajectory(format!("segment {nu}: time scaling is not increasing")));
            }
            if s.r.dim() != segments[0].r.dim() {
                return Err(Error::InvalidTrajectory(format!("segment {nu}: dimension changes")));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn regions(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.region).collect()
    }

    pub fn start_time(&self) -> f64 {
        self.segments[0].h.control_points()[0][0]
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().unwrap().h.control_points().last().unwrap()[0]
    }

    pub fn dim(&self) -> usize {
        self.segments[0].r.dim()
    }

    /// `r(s)` for a global path coordinate `s ∈ [0, S]`.
    pub fn path_point(&self, s: f64) -> Vec<f64> {
        let (nu, local) = self.locate_s(s);
        self.segments[nu].r.evaluate(local)
    }

    fn locate_s(&self, s: f64) -> (usize, f64) {
        let last = self.segments.len() - 1;
        let nu = (s.max(0.0) as usize).min(last);
        (nu, (s - nu as f64).clamp(0.0, 1.0))
    }

    /// Segment and local coordinate with `h_ν(s) = t`.
    fn locate_t(&self, t: f64) -> (usize, f64) {
        let nu = self
            .segments
            .iter()
            .position(|seg| t <= seg.h.control_points().last().unwrap()[0])
            .unwrap_or(self.segments.len() - 1);
        let h = &self.segments[nu].h;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let target = t.clamp(h.control_points()[0][0], h.control_points().last().unwrap()[0]);
        let mut s = 0.5;
        for _ in 0..200 {
            s = 0.5 * (lo + hi);
            let v = h.evaluate(s)[0];
            if (v - target).abs() <= 1e-10 {
                break;
            }
            if v < target {
                lo = s;
            } else {
                hi = s;
            }
        }
        (nu, s)
    }

    /// `q(t) = r(h⁻¹(t))`.
    pub fn position(&self, t: f64) -> Vec<f64> {
        let (nu, s) = self.locate_t(t);
        self.segments[nu].r.evaluate(s)
    }

    /// `q̇(t) = ṙ(s) / ḣ(s)`.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let (nu, s) = self.locate_t(t);
        let seg = &self.segments[nu];
        let hd = seg.h.derivative().evaluate(s)[0];
        seg.r.derivative().evaluate(s).into_iter().map(|v| v / hd).collect()
    }

    /// Largest mismatch of the first `eta` derivatives of `r` and `h` across
    /// junctions.
    pub fn continuity_error(&self, eta: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.segments.windows(2) {
            let (mut ra, mut rb, mut ha, mut hb) = (w[0].r.clone(), w[1].r.clone(), w[0].h.clone(), w[1].h.clone());
            for _ in 0..=eta {
                let pairs = [
                    (ra.control_points().last().unwrap(), &rb.control_points()[0]),
                    (ha.control_points().last().unwrap(), &hb.control_points()[0]),
                ];
                for (x, y) in pairs {
                    for (p, q) in x.iter().zip(y) {
                        worst = worst.max((p - q).abs());
                    }
                }
                ra = ra.derivative();
                rb = rb.derivative();
                ha = ha.derivative();
                hb = hb.derivative();
            }
        }
        worst
    }

    /// Checks containment, continuity, time scaling, boundary conditions
    /// and duration against the problem that produced the trajectory.
    pub fn validate(&self, problem: &PlanningProblem) -> Result<()> {
        let spec = &problem.spec;
        let fail = |m: alloc::string::String| Err(Error::InvalidTrajectory(m));
        for (nu, seg) in self.segments.iter().enumerate() {
            let q = problem
                .regions
                .get(seg.region)
                .ok_or_else(|| Error::InvalidTrajectory(format!("segment {nu}: unknown region {}", seg.region)))?;
            for p in seg.r.control_points() {
                if !q.contains_with_tol(p, MEMBERSHIP_TOL)? {
                    return fail(format!("segment {nu}: control point {p:?} leaves region {}", seg.region));
                }
            }
            for hd in seg.h.derivative().control_points() {
                if hd[0] < spec.hdot_min - 1e-9 {
                    return fail(format!("segment {nu}: time derivative {} below {}", hd[0], spec.hdot_min));
                }
            }
            let vel = spec.velocity_set.halfspaces();
            let rd = seg.r.derivative();
            let hd = seg.h.derivative();
            for (rp, hp) in rd.control_points().iter().zip(hd.control_points()) {
                for i in 0..vel.rows() {
                    if crate::math::dot(vel.row(i), rp) > vel.b[i] * hp[0] + 1e-6 {
                        return fail(format!("segment {nu}: velocity control point outside the scaled set"));
                    }
                }
            }
        }
        let err = self.continuity_error(spec.eta);
        if err > 1e-6 {
            return fail(format!("junction mismatch {err:e}"));
        }
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-6);
        let first = &self.segments[0];
        let last = self.segments.last().unwrap();
        if !close(&first.r.control_points()[0], &spec.q0) || self.start_time().abs() > 1e-6 {
            return fail("trajectory does not start at q0 at time 0".into());
        }
        if !close(last.r.control_points().last().unwrap(), &spec.qt) {
            return fail("trajectory does not end at qT".into());
        }
        let end_velocity = |seg: &Segment, at_end: bool| -> Vec<f64> {
            let rd = seg.r.derivative();
            let hd = seg.h.derivative();
            let i = if at_end { rd.degree() } else { 0 };
            rd.control_points()[i].iter().map(|v| v / hd.control_points()[i][0]).collect()
        };
        if let Some(v) = spec.qdot0.fixed() {
            if !close(&end_velocity(first, false), v) {
                return fail("initial velocity mismatch".into());
            }
        }
        if let Some(v) = spec.qdott.fixed() {
            if !close(&end_velocity(last, true), v) {
                return fail("final velocity mismatch".into());
            }
        }
        let t = self.duration();
        if t < spec.t_min - 1e-6 || t > spec.t_max + 1e-6 {
            return fail(format!("duration {t} outside [{}, {}]", spec.t_min, spec.t_max));
        }
        Ok(())
    }
}

/// Builds the trajectory for a source-target path of the plan graph.
pub fn reconstruct(graph: &PlanGraph, path: &[VertexId], values: &[Vec<f64>], spec: &PlanningSpec) -> Result<Trajectory> {
    if path.len() != values.len() || path.len() < 3 {
        return Err(Error::InvalidPath("path must visit at least one region and carry values".into()));
    }
    let lay = Layout::of(spec);
    let mut segments = Vec::with_capacity(path.len() - 2);
    for (&v, x) in path[1..path.len() - 1].iter().zip(&values[1..values.len() - 1]) {
        if v >= graph.num_regions {
            return Err(Error::InvalidPath(format!("vertex {v} is not a region")));
        }
        let (r, h) = lay.curves(x)?;
        segments.push(Segment { region: v, r, h });
    }
    Trajectory::new(segments)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanOptions {
    pub rounding: RoundingConfig,
    pub preprocess: bool,
    pub two_cycle: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            rounding: RoundingConfig::default(),
            preprocess: true,
            two_cycle: true,
        }
    }
}

/// Seconds spent in each phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub graph: f64,
    pub preprocess: f64,
    pub relaxation: f64,
    pub rounding: f64,
    pub reconstruction: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.graph + self.preprocess + self.relaxation + self.rounding + self.reconstruction
    }
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub report: RoundingReport,
    pub preprocess: PreprocessReport,
    pub graph: PlanGraph,
    pub timings: PhaseTimings,
}

impl PlanResult {
    /// Regions visited by the selected path.
    pub fn regions(&self) -> Vec<usize> {
        self.trajectory.regions()
    }
}

pub fn plan(problem: &PlanningProblem, options: &PlanOptions, solver: &dyn ConicSolver) -> Result<PlanResult> {
    plan_timed(problem, options, solver, &crate::exec::NoClock)
}

/// [`plan`] with per-phase timings read from `clock`.
pub fn plan_timed(
    problem: &PlanningProblem,
    options: &PlanOptions,
    solver: &dyn ConicSolver,
    clock: &dyn Clock,
) -> Result<PlanResult> {
    let mut timings = PhaseTimings::default();
    let mut mark = clock.now();
    let mut lap = |slot: &mut f64| {
        let now = clock.now();
        *slot = (now - mark).max(0.0);
        mark = now;
    };
    let full = build_graph(problem, solver)?;
    lap(&mut timings.graph);
    if !full.problem.has_path() {
        return Err(Error::GraphDisconnected(
            "the safe regions do not connect q0 to qT".into(),
        ));
    }
    let (graph, mut pre) = if options.preprocess {
        let (pruned, report) = edge_redundancy_filter(&full.problem, solver)?;
        (
            PlanGraph {
                problem: pruned,
                num_regions: full.num_regions,
            },
            report,
        )
    } else {
        (full, PreprocessReport::default())
    };
    lap(&mut timings.preprocess);
    let relax_opts = RelaxationOptions {
        two_cycle: options.two_cycle,
    };
    let flows = solve_relaxation(&graph.problem, &relax_opts, solver)?;
    if options.two_cycle {
        pre.two_cycle_pairs = crate::preprocess::count_two_cycles(&graph.problem);
    }
    lap(&mut timings.relaxation);
    let report = round(&graph.problem, &flows, &options.rounding, solver)?;
    lap(&mut timings.rounding);
    let (Some(path), Some(values)) = (&report.best_path, &report.best_values) else {
        return Err(Error::AllRoundedInfeasible);
    };
    let trajectory = reconstruct(&graph, path, values, &problem.spec)?;
    lap(&mut timings.reconstruction);
    Ok(PlanResult {
        trajectory,
        report,
        preprocess: pre,
        graph,
        timings,
    })
}

fn box_distance(a: &Aabb, b: &Aabb) -> f64 {
    let gaps: Vec<f64> = (0..a.dim())
        .map(|j| (b.lo[j] - a.hi[j]).max(a.lo[j] - b.hi[j]).max(0.0))
        .collect();
    crate::math::norm2(&gaps)
}

/// Cheap lower bound on the cost of a graph path. The trajectory passes
/// through the bounding box of every visited region in order, so its
/// length is at least the longest chain of box-to-box distances from `q0`
/// through any ordered subsequence of boxes to `qT`. Its duration is at
/// least `Tmin`.
pub fn path_lower_bound(graph: &PlanGraph, problem: &PlanningProblem, path: &[VertexId]) -> f64 {
    let spec = &problem.spec;
    let point = |q: &[f64]| Aabb {
        lo: q.to_vec(),
        hi: q.to_vec(),
    };
    let mut boxes = vec![point(&spec.q0)];
    boxes.extend(
        path.iter()
            .filter(|&&v| v < graph.num_regions)
            .filter_map(|&v| problem.regions[v].bounds()),
    );
    boxes.push(point(&spec.qt));
    // longest chain ending at each box
    let mut chain = vec![0.0f64; boxes.len()];
    for k in 1..boxes.len() {
        chain[k] = (0..k)
            .map(|j| chain[j] + box_distance(&boxes[j], &boxes[k]))
            .fold(0.0, f64::max);
    }
    spec.b * chain[boxes.len() - 1] + spec.a * spec.t_min
}

#[cfg(all(test, feature = "std"))]
mod tests {
    use super::*;
    use crate::backend::AutoSolver;
    use crate::graph::{brute_force_optimum, brute_force_optimum_bounded, evaluate_path, simple_paths};

    fn unit_speed() -> ConvexSet {
        ConvexSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
    }

    fn single_region(spec: PlanningSpec) -> PlanningProblem {
        PlanningProblem {
            regions: vec![ConvexSet::boxed(vec![0.0, 0.0], vec![4.0, 2.0]).unwrap()],
            spec,
        }
    }

    #[test]
    fn vertex_dimension_and_linearity() {
        let spec = PlanningSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], unit_speed(), 10.0);
        let q = ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let x = vertex_set(&q, &spec).unwrap();
        assert_eq!(x.dim(), 2 * 3);
        assert_eq!(spec.hdot_min, 1e-6);
    }

    #[test]
    fn continuity_equalities_count() {
        let mut spec = PlanningSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], unit_speed(), 10.0);
        spec.degree = 3;
        spec.eta = 1;
        assert_eq!(edge_constraints(EdgeKind::Between, &spec).unwrap().equalities.len(), 2 * 3);
        spec.eta = 0;
        assert_eq!(edge_constraints(EdgeKind::Between, &spec).unwrap().equalities.len(), 3);
        spec.eta = 3;
        assert!(edge_constraints(EdgeKind::Between, &spec).is_err());
    }

    #[test]
    fn zero_boundary_velocity_pins_first_difference() {
        let mut spec = PlanningSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], unit_speed(), 10.0);
        spec.degree = 2;
        spec.qdot0 = BoundaryVelocity::Fixed(vec![0.0, 0.0]);
        let c = edge_constraints(EdgeKind::FromSource, &spec).unwrap();
        let lay = Layout::of(&spec);
        // r_1 - r_0 == 0 regardless of h
        let mut x = vec![0.0; lay.dim()];
        x[lay.h(1)] = 5.0;
        x[lay.h(2)] = 7.0;
        assert!(c.is_satisfied(&x, 1e-12));
        x[lay.r(1, 0)] = 0.1;
        assert!(!c.is_satisfied(&x, 1e-12));
    }

    #[test]
    fn affine_time_cost_is_linear() {
        let mut spec = PlanningSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], unit_speed(), 10.0);
        spec.a = 1.0;
        spec.b = 0.0;
        let l = edge_length(EdgeKind::Between, &spec).unwrap();
        assert!(!l.needs_cones());
        let lay = Layout::of(&spec);
        let mut x = vec![0.0; 2 * lay.dim()];
        x[lay.h(0)] = 1.0;
        x[lay.h(1)] = 3.5;
        assert_eq!(l.evaluate(&x), 2.5);
        assert_eq!(edge_length(EdgeKind::FromSource, &spec).unwrap(), EdgeLength::Zero);
    }

    #[test]
    fn collinear_length_bound_is_tight() {
        let mut spec = PlanningSpec::new(vec![0.0, 0.0], vec![3.0, 4.0], unit_speed(), 10.0);
        spec.degree = 3;
        let l = edge_length(EdgeKind::ToTarget, &spec).unwrap();
        let lay = Layout::of(&spec);
        let mut x = vec![0.0; lay.dim()];
        for k in 0..=3 {
            x[lay.r(k, 0)] = k as f64;
            x[lay.r(k, 1)] = 4.0 * k as f64 / 3.0;
            x[lay.h(k)] = k as f64;
        }
        assert!((l.evaluate(&x) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn constant_velocity_has_no_regularizer_cost() {
        let mut spec = PlanningSpec::new(vec![0.0, 0.0], vec![3.0, 4.0], unit_speed(), 10.0);
        spec.degree = 4;
        spec.b = 0.0;
        spec.eps = 1.0;
        spec.reg_order = 3;
        let l = regularizer_terms(&spec).unwrap();
        let lay = Layout::of(&spec);
        let mut x = vec![0.0; lay.dim()];
        for k in 0..=4 {
            x[lay.r(k, 0)] = 0.5 * k as f64;
            x[lay.r(k, 1)] = -(k as f64);
            x[lay.h(k)] = 2.0 * k as f64;
        }
        assert!(l.evaluate(&x).abs() < 1e-12);
        spec.eps = 0.0;
        assert_eq!(regularizer_terms(&spec).unwrap(), EdgeLength::Zero);
        spec.eps = 1.0;
        spec.reg_order = 5;
        assert!(regularizer_terms(&spec).is_err());
    }

    #[test]
    fn single_region_plan_is_one_segment() {
        let mut spec = PlanningSpec::new(vec![0.5, 0.5], vec![3.5, 1.5], unit_speed(), 20.0);
        spec.a = 1.0;
        spec.b = 0.0;
        spec.t_min = 1.0;
        let p = single_region(spec);
        let res = plan(&p, &PlanOptions::default(), &AutoSolver).unwrap();
        assert_eq!(res.trajectory.segments().len(), 1);
        res.trajectory.validate(&p).unwrap();
        // |Δx| = 3 at unit speed per axis
        assert!((res.trajectory.duration() - 3.0).abs() < 1e-5, "{}", res.trajectory.duration());
        assert!(res.report.gap.abs() < 1e-6);
    }

    #[test]
    fn affine_time_scaling_samples_straight_line() {
        let mut spec = PlanningSpec::new(vec![0.5, 0.5], vec![3.5, 1.5], unit_speed(), 20.0);
        spec.t_min = 4.0;
        spec.a = 1.0;
        spec.b = 0.0;
        let p = single_region(spec);
        let res = plan(&p, &PlanOptions::default(), &AutoSolver).unwrap();
        let traj = &res.trajectory;
        let t_end = traj.duration();
        assert!((t_end - 4.0).abs() < 1e-6);
        for i in 0..=10 {
            let t = t_end * i as f64 / 10.0;
            let q = traj.position(t);
            let want = [0.5 + 3.0 * t / t_end, 0.5 + 1.0 * t / t_end];
            assert!((q[0] - want[0]).abs() < 1e-5 && (q[1] - want[1]).abs() < 1e-5, "{q:?} {want:?}");
        }
    }

    #[test]
    fn endpoints_outside_regions_are_named() {
        let spec = PlanningSpec::new(vec![9.0, 9.0], vec![1.0, 1.0], unit_speed(), 10.0);
        let err = build_graph(&single_region(spec), &AutoSolver).unwrap_err();
        assert!(matches!(err, Error::InvalidProblem(ref m) if m.contains("q0")));
        let spec = PlanningSpec::new(vec![1.0, 1.0], vec![9.0, 9.0], unit_speed(), 10.0);
        let err = build_graph(&single_region(spec), &AutoSolver).unwrap_err();
        assert!(matches!(err, Error::InvalidProblem(ref m) if m.contains("qT")));
    }

    #[test]
    fn disjoint_regions_disconnect() {
        let spec = PlanningSpec::new(vec![0.5, 0.5], vec![5.5, 0.5], unit_speed(), 10.0);
        let p = PlanningProblem {
            regions: vec![
                ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
                ConvexSet::boxed(vec![5.0, 0.0], vec![6.0, 1.0]).unwrap(),
            ],
            spec,
        };
        assert!(matches!(plan(&p, &PlanOptions::default(), &AutoSolver), Err(Error::GraphDisconnected(_))));
    }

    #[test]
    fn energy_term_matches_recomputation() {
        let mut spec = PlanningSpec::new(vec![0.5, 0.5], vec![3.5, 1.5], unit_speed(), 20.0);
        spec.b = 0.0;
        spec.c = 1.0;
        spec.a = 1.0;
        spec.degree = 3;
        spec.eta = 1;
        spec.qdot0 = BoundaryVelocity::Fixed(vec![0.0, 0.0]);
        spec.qdott = BoundaryVelocity::Fixed(vec![0.0, 0.0]);
        let p = single_region(spec);
        let res = plan(&p, &PlanOptions::default(), &AutoSolver).unwrap();
        res.trajectory.validate(&p).unwrap();
        let path = res.report.best_path.clone().unwrap();
        let values = res.report.best_values.clone().unwrap();
        let direct = res.graph.problem.path_length(&path, &values).unwrap();
        assert!((direct - res.report.rounded_cost).abs() <= 1e-6 * (1.0 + direct.abs()));
        let again = evaluate_path(&res.graph.problem, &path, &AutoSolver).unwrap();
        assert!((again.cost - res.report.rounded_cost).abs() < 1e-9);
    }

    #[test]
    fn path_bound_is_valid_and_prunes_exactly() {
        for seed in 0..4 {
            let m = crate::environments::generate_maze(4, 4, 3, seed).unwrap();
            let p = m.problem();
            let g = build_graph(&p, &AutoSolver).unwrap();
            for path in simple_paths(&g.problem, 10_000).unwrap().iter().take(40) {
                let ev = evaluate_path(&g.problem, path, &AutoSolver).unwrap();
                assert!(path_lower_bound(&g, &p, path) <= ev.cost + 1e-7);
            }
            let full = brute_force_optimum(&g.problem, 10_000, &AutoSolver).unwrap();
            let fast = brute_force_optimum_bounded(&g.problem, 10_000, &AutoSolver, |q| path_lower_bound(&g, &p, q)).unwrap();
            assert!((full.cost - fast.cost).abs() <= 1e-7 * full.cost);
            assert!(fast.paths_evaluated <= full.paths_evaluated);
        }
    }
}
