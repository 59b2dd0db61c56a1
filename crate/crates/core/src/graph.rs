//! Graphs of convex sets: the shortest-path problem, its convex relaxation,
//! fixed-path evaluation and an enumeration oracle.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::conic::{AffineExpr, ConicProgram, ConicSolver, SolveStatus};
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::geometry::{ConvexSet, HomogenizedSet};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Flow below which a vertex or edge counts as unused.
pub const FLOW_FLOOR: f64 = 1e-6;

/// Convex, nonnegative edge length over the local variables `(x_u, x_v)`
/// of an edge `(u, v)`: index `j < dim(u)` is `x_u[j]`, the rest are `x_v`.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeLength {
    Zero,
    Affine(AffineExpr),
    /// `Σ ‖u_k‖₂`
    L2Sum(Vec<Vec<AffineExpr>>),
    /// `Σ ‖u_k‖₂² / w_k`
    QuadOverLinSum(Vec<(Vec<AffineExpr>, AffineExpr)>),
    WeightedSum(Vec<(f64, EdgeLength)>),
}

impl EdgeLength {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            EdgeLength::Zero => 0.0,
            EdgeLength::Affine(e) => e.eval(x),
            EdgeLength::L2Sum(blocks) => blocks
                .iter()
                .map(|b| crate::math::norm2(&b.iter().map(|e| e.eval(x)).collect::<Vec<_>>()))
                .sum(),
            EdgeLength::QuadOverLinSum(terms) => terms
                .iter()
                .map(|(u, w)| {
                    let num: f64 = u.iter().map(|e| e.eval(x)).map(|v| v * v).sum();
                    let den = w.eval(x);
                    if den > 0.0 {
                        num / den
                    } else if num == 0.0 && den == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .sum(),
            EdgeLength::WeightedSum(parts) => parts
                .iter()
                .filter(|(w, _)| *w != 0.0)
                .map(|(w, l)| w * l.evaluate(x))
                .sum(),
        }
    }

    /// True if lowering this length adds cone blocks.
    pub fn needs_cones(&self) -> bool {
        match self {
            EdgeLength::Zero | EdgeLength::Affine(_) => false,
            EdgeLength::L2Sum(b) => !b.is_empty(),
            EdgeLength::QuadOverLinSum(t) => !t.is_empty(),
            EdgeLength::WeightedSum(parts) => parts.iter().any(|(w, l)| *w != 0.0 && l.needs_cones()),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let check = |e: &AffineExpr| match e.max_index() {
            Some(j) if j >= n => Err(Error::InvalidProblem(format!(
                "edge length references local index {j} but the edge has {n} variables"
            ))),
            _ if !e.constant.is_finite() || e.terms.iter().any(|(_, c)| !c.is_finite()) => {
                Err(Error::InvalidProblem("non-finite coefficient in edge length".into()))
            }
            _ => Ok(()),
        };
        match self {
            EdgeLength::Zero => Ok(()),
            EdgeLength::Affine(e) => check(e),
            EdgeLength::L2Sum(blocks) => blocks.iter().flatten().try_for_each(check),
            EdgeLength::QuadOverLinSum(terms) => terms.iter().try_for_each(|(u, w)| {
                u.iter().try_for_each(check)?;
                check(w)
            }),
            EdgeLength::WeightedSum(parts) => parts.iter().try_for_each(|(w, l)| {
                if !(*w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidProblem(format!("edge length weight {w} is not a nonnegative number")));
                }
                l.validate(n)
            }),
        }
    }

    /// Emits the perspective of the length, scaled by `phi`, and returns
    /// the objective contribution.
    pub fn lower(&self, prog: &mut ConicProgram, local: &[AffineExpr], phi: &AffineExpr) -> Result<AffineExpr> {
        Ok(match self {
            EdgeLength::Zero => AffineExpr::zero(),
            EdgeLength::Affine(e) => homogenize(e, local, phi),
            EdgeLength::L2Sum(blocks) => {
                let mut total = AffineExpr::zero();
                for b in blocks {
                    let u = b.iter().map(|e| homogenize(e, local, phi)).collect();
                    total.add_term(prog.add_epigraph_l2(u)?.0, 1.0);
                }
                total
            }
            EdgeLength::QuadOverLinSum(terms) => {
                let mut total = AffineExpr::zero();
                for (u, w) in terms {
                    let u = u.iter().map(|e| homogenize(e, local, phi)).collect();
                    let t = prog.add_quad_over_lin(u, homogenize(w, local, phi))?;
                    total.add_term(t.0, 1.0);
                }
                total
            }
            EdgeLength::WeightedSum(parts) => {
                let mut total = AffineExpr::zero();
                for (w, l) in parts {
                    if *w != 0.0 {
                        let e = l.lower(prog, local, phi)?;
                        total.add_expr(&e, *w);
                    }
                }
                total
            }
        })
    }
}

/// Substitutes local variables and scales the constant by `phi`.
pub fn homogenize(e: &AffineExpr, local: &[AffineExpr], phi: &AffineExpr) -> AffineExpr {
    let mut out = phi.scaled(e.constant);
    for &(j, c) in &e.terms {
        out.add_expr(&local[j], c);
    }
    out
}

/// Linear constraints over `(x_u, x_v)`: each equality is `expr == 0`,
/// each inequality `expr <= 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeConstraint {
    pub equalities: Vec<AffineExpr>,
    pub inequalities: Vec<AffineExpr>,
}

impl EdgeConstraint {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.equalities.is_empty() && self.inequalities.is_empty()
    }

    pub fn is_satisfied(&self, x: &[f64], tol: f64) -> bool {
        self.equalities.iter().all(|e| e.eval(x).abs() <= tol)
            && self.inequalities.iter().all(|e| e.eval(x) <= tol)
    }

    fn validate(&self, n: usize) -> Result<()> {
        for e in self.equalities.iter().chain(&self.inequalities) {
            if let Some(j) = e.max_index() {
                if j >= n {
                    return Err(Error::DimensionMismatch { expected: n, found: j + 1 });
                }
            }
        }
        Ok(())
    }

    fn lower(&self, prog: &mut ConicProgram, local: &[AffineExpr], phi: &AffineExpr) -> Result<()> {
        for e in &self.equalities {
            prog.add_eq(homogenize(e, local, phi))?;
        }
        for e in &self.inequalities {
            prog.add_le(homogenize(e, local, phi))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub label: String,
    /// `None` is the empty set: a vertex without continuous variables.
    pub set: Option<ConvexSet>,
}

impl Vertex {
    pub fn dim(&self) -> usize {
        self.set.as_ref().map_or(0, ConvexSet::dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub tail: VertexId,
    pub head: VertexId,
    pub length: EdgeLength,
    pub constraint: EdgeConstraint,
}

/// A validated shortest-path problem in a graph of convex sets.
#[derive(Clone, Debug, PartialEq)]
pub struct GcsProblem {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    source: VertexId,
    target: VertexId,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    edge_index: BTreeMap<(VertexId, VertexId), EdgeId>,
    homogenized: Vec<Option<HomogenizedSet>>,
}

#[derive(Clone, Debug, Default)]
pub struct GcsBuilder {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    source: Option<VertexId>,
    target: Option<VertexId>,
}

impl GcsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, label: impl Into<String>, set: Option<ConvexSet>) -> VertexId {
        self.vertices.push(Vertex {
            label: label.into(),
            set,
        });
        self.vertices.len() - 1
    }

    pub fn add_edge(&mut self, tail: VertexId, head: VertexId, length: EdgeLength, constraint: EdgeConstraint) -> EdgeId {
        self.edges.push(Edge {
            tail,
            head,
            length,
            constraint,
        });
        self.edges.len() - 1
    }

    pub fn set_source(&mut self, v: VertexId) -> &mut Self {
        self.source = Some(v);
        self
    }

    pub fn set_target(&mut self, v: VertexId) -> &mut Self {
        self.target = Some(v);
        self
    }

    pub fn build(self) -> Result<GcsProblem> {
        let source = self.source.ok_or_else(|| Error::InvalidProblem("source not set".into()))?;
        let target = self.target.ok_or_else(|| Error::InvalidProblem("target not set".into()))?;
        GcsProblem::new(self.vertices, self.edges, source, target)
    }
}

impl GcsProblem {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>, source: VertexId, target: VertexId) -> Result<Self> {
        let nv = vertices.len();
        if source >= nv || target >= nv {
            return Err(Error::InvalidProblem("source or target is not a vertex".into()));
        }
        if source == target {
            return Err(Error::InvalidProblem("source and target coincide".into()));
        }
        let mut homogenized = Vec::with_capacity(nv);
        for v in &vertices {
            homogenized.push(match &v.set {
                Some(s) => Some(s.scale_set().map_err(|e| match e {
                    Error::Unbounded => Error::InvalidProblem(format!("vertex {} has an unbounded set", v.label)),
                    e => e,
                })?),
                None => None,
            });
        }
        let mut out_edges = vec![Vec::new(); nv];
        let mut in_edges = vec![Vec::new(); nv];
        let mut edge_index = BTreeMap::new();
        for (id, e) in edges.iter().enumerate() {
            if e.tail >= nv || e.head >= nv {
                return Err(Error::InvalidProblem(format!("edge {id} references a missing vertex")));
            }
            if e.tail == e.head {
                return Err(Error::InvalidProblem(format!("edge {id} is a self-loop")));
            }
            if e.head == source {
                return Err(Error::InvalidProblem(format!("edge {id} enters the source")));
            }
            if e.tail == target {
                return Err(Error::InvalidProblem(format!("edge {id} leaves the target")));
            }
            if edge_index.insert((e.tail, e.head), id).is_some() {
                return Err(Error::InvalidProblem(format!(
                    "parallel edges between {} and {}",
                    e.tail, e.head
                )));
            }
            let n = vertices[e.tail].dim() + vertices[e.head].dim();
            e.length.validate(n)?;
            e.constraint.validate(n)?;
            out_edges[e.tail].push(id);
            in_edges[e.head].push(id);
        }
        Ok(Self {
            vertices,
            edges,
            source,
            target,
            out_edges,
            in_edges,
            edge_index,
            homogenized,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn source(&self) -> VertexId {
        self.source
    }

    pub fn target(&self) -> VertexId {
        self.target
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.in_edges[v]
    }

    pub fn find_edge(&self, tail: VertexId, head: VertexId) -> Option<EdgeId> {
        self.edge_index.get(&(tail, head)).copied()
    }

    /// Same vertices, with the edges for which `keep` is false dropped.
    /// Edge ids are renumbered in order.
    pub fn retain_edges(&self, mut keep: impl FnMut(EdgeId, &Edge) -> bool) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(id, e)| keep(*id, e))
            .map(|(_, e)| e.clone())
            .collect();
        Self::new(self.vertices.clone(), edges, self.source, self.target)
    }

    /// Vertices from which the target can be reached.
    pub fn reaches_target(&self) -> Vec<bool> {
        let mut seen = vec![false; self.vertices.len()];
        seen[self.target] = true;
        let mut queue = VecDeque::from([self.target]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.in_edges[v] {
                let u = self.edges[e].tail;
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    pub fn has_path(&self) -> bool {
        self.reaches_target()[self.source]
    }

    /// Checks that `path` is a simple source-target walk along edges and
    /// returns its edge ids.
    pub fn path_edges(&self, path: &[VertexId]) -> Result<Vec<EdgeId>> {
        if path.first() != Some(&self.source) || path.last() != Some(&self.target) {
            return Err(Error::InvalidPath("path must run from source to target".into()));
        }
        let mut seen = vec![false; self.vertices.len()];
        for &v in path {
            if v >= self.vertices.len() {
                return Err(Error::InvalidPath(format!("vertex {v} does not exist")));
            }
            if core::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidPath(format!("vertex {v} repeats")));
            }
        }
        path.windows(2)
            .map(|w| {
                self.find_edge(w[0], w[1])
                    .ok_or_else(|| Error::InvalidPath(format!("no edge from {} to {}", w[0], w[1])))
            })
            .collect()
    }

    /// Sum of edge lengths along `path` at the given vertex values.
    pub fn path_length(&self, path: &[VertexId], values: &[Vec<f64>]) -> Result<f64> {
        let edges = self.path_edges(path)?;
        Ok(edges
            .iter()
            .zip(values.windows(2))
            .map(|(&e, w)| {
                let local: Vec<f64> = w[0].iter().chain(&w[1]).copied().collect();
                self.edges[e].length.evaluate(&local)
            })
            .sum())
    }
}

/// Options for [`build_relaxation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RelaxationOptions {
    pub two_cycle: bool,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self { two_cycle: true }
    }
}

/// A relaxation program with the variable layout needed to decode it.
#[derive(Clone, Debug)]
pub struct Relaxation {
    pub program: ConicProgram,
    /// Index of `φ_e`.
    pub phi: Vec<usize>,
    /// First index of the tail lift `y_e`.
    pub y: Vec<usize>,
    /// First index of the head lift `z_e`.
    pub z: Vec<usize>,
    pub two_cycle_pairs: usize,
}

impl Relaxation {
    pub fn phi_expr(&self, e: EdgeId) -> AffineExpr {
        AffineExpr::term(self.phi[e], 1.0)
    }

    pub fn y_exprs(&self, problem: &GcsProblem, e: EdgeId) -> Vec<AffineExpr> {
        let n = problem.vertices[problem.edges[e].tail].dim();
        (0..n).map(|k| AffineExpr::term(self.y[e] + k, 1.0)).collect()
    }

    pub fn z_exprs(&self, problem: &GcsProblem, e: EdgeId) -> Vec<AffineExpr> {
        let n = problem.vertices[problem.edges[e].head].dim();
        (0..n).map(|k| AffineExpr::term(self.z[e] + k, 1.0)).collect()
    }

    /// Flow through `v`: incoming flow, or outgoing flow at the source.
    pub fn vertex_flow_expr(&self, problem: &GcsProblem, v: VertexId) -> AffineExpr {
        let edges = if v == problem.source {
            &problem.out_edges[v]
        } else {
            &problem.in_edges[v]
        };
        let mut out = AffineExpr::zero();
        for &e in edges {
            out.add_term(self.phi[e], 1.0);
        }
        out
    }

    /// `Σ_in z_e` (or `Σ_out y_e` at the source).
    pub fn vertex_lift_exprs(&self, problem: &GcsProblem, v: VertexId) -> Vec<AffineExpr> {
        let n = problem.vertices[v].dim();
        let mut out = vec![AffineExpr::zero(); n];
        if v == problem.source {
            for &e in &problem.out_edges[v] {
                for (k, o) in out.iter_mut().enumerate() {
                    o.add_term(self.y[e] + k, 1.0);
                }
            }
        } else {
            for &e in &problem.in_edges[v] {
                for (k, o) in out.iter_mut().enumerate() {
                    o.add_term(self.z[e] + k, 1.0);
                }
            }
        }
        out
    }

    pub fn decode(&self, problem: &GcsProblem, x: &[f64], cost: f64) -> FlowSolution {
        let phi: Vec<f64> = self.phi.iter().map(|&i| x[i]).collect();
        let y: Vec<Vec<f64>> = (0..problem.edges.len())
            .map(|e| self.y_exprs(problem, e).iter().map(|v| v.eval(x)).collect())
            .collect();
        let z: Vec<Vec<f64>> = (0..problem.edges.len())
            .map(|e| self.z_exprs(problem, e).iter().map(|v| v.eval(x)).collect())
            .collect();
        let vertex_values = (0..problem.vertices.len())
            .map(|v| {
                let flow = self.vertex_flow_expr(problem, v).eval(x);
                (flow > FLOW_FLOOR).then(|| {
                    self.vertex_lift_exprs(problem, v)
                        .iter()
                        .map(|e| e.eval(x) / flow)
                        .collect()
                })
            })
            .collect();
        FlowSolution {
            phi,
            y,
            z,
            vertex_values,
            cost,
        }
    }
}

/// Builds the convex relaxation of the shortest-path problem.
pub fn build_relaxation(problem: &GcsProblem, options: &RelaxationOptions) -> Result<Relaxation> {
    let mut prog = ConicProgram::new();
    let ne = problem.edges.len();
    let mut phi = Vec::with_capacity(ne);
    let mut y = Vec::with_capacity(ne);
    let mut z = Vec::with_capacity(ne);
    for e in &problem.edges {
        phi.push(prog.add_var().0);
        y.push(prog.add_vars(problem.vertices[e.tail].dim()));
        z.push(prog.add_vars(problem.vertices[e.head].dim()));
    }
    let mut relax = Relaxation {
        program: prog,
        phi,
        y,
        z,
        two_cycle_pairs: 0,
    };
    let mut objective = AffineExpr::zero();
    for (id, e) in problem.edges.iter().enumerate() {
        let prog = &mut relax.program;
        let p = AffineExpr::term(relax.phi[id], 1.0);
        prog.add_ge(p.clone())?;
        prog.add_le(p.clone() - AffineExpr::constant(1.0))?;
        let ys: Vec<AffineExpr> = (0..problem.vertices[e.tail].dim())
            .map(|k| AffineExpr::term(relax.y[id] + k, 1.0))
            .collect();
        let zs: Vec<AffineExpr> = (0..problem.vertices[e.head].dim())
            .map(|k| AffineExpr::term(relax.z[id] + k, 1.0))
            .collect();
        if let Some(h) = &problem.homogenized[e.tail] {
            for row in h.rows_as_exprs(&ys, &p) {
                prog.add_le(row)?;
            }
        }
        if let Some(h) = &problem.homogenized[e.head] {
            for row in h.rows_as_exprs(&zs, &p) {
                prog.add_le(row)?;
            }
        }
        let local: Vec<AffineExpr> = ys.into_iter().chain(zs).collect();
        e.constraint.lower(prog, &local, &p)?;
        let cost = e.length.lower(prog, &local, &p)?;
        objective.add_expr(&cost, 1.0);
    }

    for v in 0..problem.vertices.len() {
        let mut inflow = AffineExpr::zero();
        for &e in &problem.in_edges[v] {
            inflow.add_term(relax.phi[e], 1.0);
        }
        let mut outflow = AffineExpr::zero();
        for &e in &problem.out_edges[v] {
            outflow.add_term(relax.phi[e], 1.0);
        }
        let prog = &mut relax.program;
        if v == problem.source {
            prog.add_eq(outflow - AffineExpr::constant(1.0))?;
        } else if v == problem.target {
            prog.add_eq(inflow - AffineExpr::constant(1.0))?;
        } else {
            prog.add_eq(inflow.clone() - outflow)?;
            prog.add_le(inflow - AffineExpr::constant(1.0))?;
            for k in 0..problem.vertices[v].dim() {
                let mut bal = AffineExpr::zero();
                for &e in &problem.in_edges[v] {
                    bal.add_term(relax.z[e] + k, 1.0);
                }
                for &e in &problem.out_edges[v] {
                    bal.add_term(relax.y[e] + k, -1.0);
                }
                prog.add_eq(bal)?;
            }
        }
    }
    relax.program.set_objective(objective)?;
    if options.two_cycle {
        relax.two_cycle_pairs = crate::preprocess::add_two_cycle_constraints(&mut relax, problem)?;
    }
    Ok(relax)
}

/// Relaxed flows and vertex values.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSolution {
    pub phi: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// Flow-weighted vertex values; `None` where the vertex carries no flow.
    pub vertex_values: Vec<Option<Vec<f64>>>,
    pub cost: f64,
}

impl FlowSolution {
    pub fn vertex_flow(&self, problem: &GcsProblem, v: VertexId) -> f64 {
        let edges = if v == problem.source {
            problem.out_edges(v)
        } else {
            problem.in_edges(v)
        };
        edges.iter().map(|&e| self.phi[e]).sum()
    }

    /// Largest violation of flow bounds, conservation and degree limits.
    pub fn max_flow_violation(&self, problem: &GcsProblem) -> f64 {
        let mut worst: f64 = 0.0;
        for &p in &self.phi {
            worst = worst.max(-p).max(p - 1.0);
        }
        for v in 0..problem.vertices().len() {
            let inflow: f64 = problem.in_edges(v).iter().map(|&e| self.phi[e]).sum();
            let outflow: f64 = problem.out_edges(v).iter().map(|&e| self.phi[e]).sum();
            if v == problem.source() {
                worst = worst.max((outflow - 1.0).abs());
            } else if v == problem.target() {
                worst = worst.max((inflow - 1.0).abs());
            } else {
                worst = worst.max((inflow - outflow).abs()).max(inflow - 1.0);
            }
        }
        worst
    }
}

/// Solves the relaxation and decodes it.
pub fn solve_relaxation(
    problem: &GcsProblem,
    options: &RelaxationOptions,
    solver: &dyn ConicSolver,
) -> Result<FlowSolution> {
    if !problem.has_path() {
        return Err(Error::GraphDisconnected("no edge path from source to target".into()));
    }
    let relax = build_relaxation(problem, options)?;
    let r = solver.solve(&relax.program);
    match r.status {
        SolveStatus::Optimal => {
            let x = r.primal.unwrap_or_default();
            Ok(relax.decode(problem, &x, r.objective))
        }
        SolveStatus::Infeasible => Err(Error::RelaxationInfeasible),
        status => Err(Error::Solver {
            status,
            diagnostics: r.diagnostics,
        }),
    }
}

/// Optimal cost and vertex values of a fixed path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEvaluation {
    /// `+∞` when the path admits no feasible vertex values.
    pub cost: f64,
    /// Vertex values in path order, when feasible.
    pub values: Option<Vec<Vec<f64>>>,
}

impl PathEvaluation {
    pub fn is_feasible(&self) -> bool {
        self.values.is_some()
    }
}

/// The convex program for a fixed path and the first variable index of
/// each path vertex.
pub fn path_program(problem: &GcsProblem, path: &[VertexId]) -> Result<(ConicProgram, Vec<usize>)> {
    let edges = problem.path_edges(path)?;
    let mut prog = ConicProgram::new();
    let one = AffineExpr::constant(1.0);
    let starts: Vec<usize> = path.iter().map(|&v| prog.add_vars(problem.vertices[v].dim())).collect();
    let exprs = |i: usize| -> Vec<AffineExpr> {
        (0..problem.vertices[path[i]].dim())
            .map(|k| AffineExpr::term(starts[i] + k, 1.0))
            .collect()
    };
    for (i, &v) in path.iter().enumerate() {
        if let Some(h) = &problem.homogenized[v] {
            for row in h.rows_as_exprs(&exprs(i), &one) {
                prog.add_le(row)?;
            }
        }
    }
    let mut objective = AffineExpr::zero();
    for (i, &e) in edges.iter().enumerate() {
        let local: Vec<AffineExpr> = exprs(i).into_iter().chain(exprs(i + 1)).collect();
        let edge = &problem.edges[e];
        edge.constraint.lower(&mut prog, &local, &one)?;
        let cost = edge.length.lower(&mut prog, &local, &one)?;
        objective.add_expr(&cost, 1.0);
    }
    prog.set_objective(objective)?;
    Ok((prog, starts))
}

/// Minimizes the total length along a fixed simple path.
pub fn evaluate_path(problem: &GcsProblem, path: &[VertexId], solver: &dyn ConicSolver) -> Result<PathEvaluation> {
    let (prog, starts) = path_program(problem, path)?;
    let r = solver.solve(&prog);
    match r.status {
        SolveStatus::Optimal => {
            let x = r.primal.unwrap_or_default();
            let values = path
                .iter()
                .zip(&starts)
                .map(|(&v, &s)| x[s..s + problem.vertices[v].dim()].to_vec())
                .collect();
            Ok(PathEvaluation {
                cost: r.objective,
                values: Some(values),
            })
        }
        SolveStatus::Infeasible => Ok(PathEvaluation {
            cost: f64::INFINITY,
            values: None,
        }),
        status => Err(Error::Solver {
            status,
            diagnostics: format!("fixed-path program: {}", r.diagnostics),
        }),
    }
}

/// All simple source-target paths, in depth-first order. Fails once more
/// than `limit` paths exist.
pub fn simple_paths(problem: &GcsProblem, limit: usize) -> Result<Vec<Vec<VertexId>>> {
    let nv = problem.vertices.len();
    let mut paths = Vec::new();
    let mut visited = vec![false; nv];
    let mut path = vec![problem.source];
    visited[problem.source] = true;
    // stack of (vertex, next out-edge position)
    let mut stack: Vec<(VertexId, usize)> = vec![(problem.source, 0)];
    while let Some(top) = stack.last_mut() {
        let (v, pos) = *top;
        if v == problem.target {
            paths.push(path.clone());
            if paths.len() > limit {
                return Err(Error::PathLimitExceeded { limit });
            }
            stack.pop();
            path.pop();
            visited[v] = false;
            continue;
        }
        if pos == 0 && !target_reachable_avoiding(problem, v, &visited) {
            stack.pop();
            path.pop();
            visited[v] = false;
            continue;
        }
        if let Some(&e) = problem.out_edges[v].get(pos) {
            top.1 += 1;
            let w = problem.edges[e].head;
            if !visited[w] {
                visited[w] = true;
                path.push(w);
                stack.push((w, 0));
            }
        } else {
            stack.pop();
            path.pop();
            visited[v] = false;
        }
    }
    Ok(paths)
}

fn target_reachable_avoiding(problem: &GcsProblem, from: VertexId, visited: &[bool]) -> bool {
    let mut seen = visited.to_vec();
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for &e in &problem.out_edges[v] {
            let w = problem.edges[e].head;
            if w == problem.target {
                return true;
            }
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    false
}

/// Global optimum by enumerating and evaluating every simple path.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceResult {
    pub cost: f64,
    pub path: Vec<VertexId>,
    pub values: Vec<Vec<f64>>,
    /// Simple paths enumerated.
    pub paths_total: usize,
    /// Paths whose fixed-path program was solved.
    pub paths_evaluated: usize,
}

pub fn brute_force_optimum(problem: &GcsProblem, path_limit: usize, solver: &dyn ConicSolver) -> Result<BruteForceResult> {
    brute_force_optimum_bounded(problem, path_limit, solver, |_| 0.0)
}

/// Paths evaluated between two pruning checks.
const ORACLE_BATCH: usize = 8;

/// [`brute_force_optimum`] that skips paths whose `lower_bound` is no
/// better than the best cost found so far. Paths are evaluated in order of
/// increasing bound; the result is exact whenever `lower_bound` never
/// exceeds the true path cost.
pub fn brute_force_optimum_bounded(
    problem: &GcsProblem,
    path_limit: usize,
    solver: &dyn ConicSolver,
    lower_bound: impl Fn(&[VertexId]) -> f64,
) -> Result<BruteForceResult> {
    let paths = simple_paths(problem, path_limit)?;
    if paths.is_empty() {
        return Err(Error::GraphDisconnected("no simple path from source to target".into()));
    }
    let bounds: Vec<f64> = paths.iter().map(|p| lower_bound(p)).collect();
    let mut order: Vec<usize> = (0..paths.len()).collect();
    order.sort_by(|&a, &b| bounds[a].total_cmp(&bounds[b]));
    let mut best: Option<(usize, PathEvaluation)> = None;
    let mut evaluated = 0;
    for batch in order.chunks(ORACLE_BATCH) {
        let incumbent = best.as_ref().map_or(f64::INFINITY, |(_, b)| b.cost);
        let batch: Vec<usize> = batch.iter().copied().filter(|&i| bounds[i] < incumbent).collect();
        if batch.is_empty() {
            break;
        }
        evaluated += batch.len();
        let evals = par_map(&batch, |&i| evaluate_path(problem, &paths[i], solver));
        for (&i, ev) in batch.iter().zip(evals) {
            let ev = ev?;
            if ev.is_feasible() && best.as_ref().map_or(true, |(_, b)| ev.cost < b.cost) {
                best = Some((i, ev));
            }
        }
    }
    let (i, ev) = best.ok_or_else(|| Error::NoFeasiblePath(format!("all {} simple paths are infeasible", paths.len())))?;
    Ok(BruteForceResult {
        cost: ev.cost,
        values: ev.values.unwrap_or_default(),
        path: paths[i].clone(),
        paths_total: paths.len(),
        paths_evaluated: evaluated,
    })
}
