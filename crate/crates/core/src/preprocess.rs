//! Relaxation tightening for reciprocal edge pairs and removal of edges
//! that cannot lie on any simple source-target path.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::conic::{AffineExpr, ConicProgram, ConicSolver, SolveStatus};
use crate::error::Result;
use crate::exec::par_map;
use crate::graph::{EdgeId, GcsProblem, Relaxation, VertexId};

/// Adds, for every pair `e = (i, j)`, `f = (j, i)`, the constraints
/// `φ_e + φ_f <= φ_i`, `φ_e + φ_f <= φ_j` and their lifted counterparts
/// `(Σ_in(i) z - y_e - z_f) ∈ (φ_i - φ_e - φ_f) X_i` (and the same at `j`).
/// Returns the number of pairs.
pub fn add_two_cycle_constraints(relax: &mut Relaxation, problem: &GcsProblem) -> Result<usize> {
    let mut pairs = 0;
    for (e, edge) in problem.edges().iter().enumerate() {
        let Some(f) = problem.find_edge(edge.head, edge.tail) else {
            continue;
        };
        if f < e {
            continue;
        }
        pairs += 1;
        let both = relax.phi_expr(e) + relax.phi_expr(f);
        for (v, out_lift, in_lift) in [(edge.tail, e, f), (edge.head, f, e)] {
            let flow = relax.vertex_flow_expr(problem, v);
            let slack = flow - both.clone();
            relax.program.add_ge(slack.clone())?;
            let Some(set) = problem.vertices()[v].set.as_ref() else {
                continue;
            };
            let h = set.scale_set()?;
            let ys = relax.y_exprs(problem, out_lift);
            let zs = relax.z_exprs(problem, in_lift);
            let x: Vec<AffineExpr> = relax
                .vertex_lift_exprs(problem, v)
                .into_iter()
                .zip(ys.into_iter().zip(zs))
                .map(|(s, (y, z))| s - y - z)
                .collect();
            for row in h.rows_as_exprs(&x, &slack) {
                relax.program.add_le(row)?;
            }
        }
    }
    Ok(pairs)
}

/// Number of reciprocal edge pairs.
pub fn count_two_cycles(problem: &GcsProblem) -> usize {
    problem
        .edges()
        .iter()
        .enumerate()
        .filter(|(e, edge)| problem.find_edge(edge.head, edge.tail).is_some_and(|f| f > *e))
        .count()
}

/// How the redundancy test for an edge was settled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// Two vertex-disjoint paths exist, an integral point of the program.
    DisjointPaths,
    /// A vertex every path of both commodities must cross, or a commodity
    /// with no path at all; the program is infeasible.
    SharedCutVertex,
    /// The multiflow program was solved.
    Lp,
}

/// Outcome of the redundancy test for one edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeTest {
    pub edge: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
    pub status: SolveStatus,
    pub decision: Decision,
    pub removed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreprocessReport {
    /// One entry per edge of the input problem, in edge order.
    pub tests: Vec<EdgeTest>,
    pub two_cycle_pairs: usize,
}

impl PreprocessReport {
    pub fn removed(&self) -> impl Iterator<Item = &EdgeTest> {
        self.tests.iter().filter(|t| t.removed)
    }

    pub fn removed_count(&self) -> usize {
        self.removed().count()
    }

    pub fn reason(test: &EdgeTest) -> String {
        if test.removed {
            format!(
                "no vertex-disjoint flows from source to {} and from {} to target",
                test.tail, test.head
            )
        } else {
            format!("kept ({:?})", test.status)
        }
    }
}

/// The fractional two-commodity flow program certifying that edge
/// `(u, v)` may lie on a simple path. Infeasible means it never does.
pub fn multiflow_program(problem: &GcsProblem, edge: EdgeId) -> Result<ConicProgram> {
    let nv = problem.vertices().len();
    let e = &problem.edges()[edge];
    let (u, v) = (e.tail, e.head);
    let reverse = problem.find_edge(v, u);
    let arcs: Vec<EdgeId> = (0..problem.edges().len())
        .filter(|&g| g != edge && Some(g) != reverse)
        .collect();
    let mut prog = ConicProgram::new();
    // per commodity: one internal arc per vertex, then one per kept edge
    let width = nv + arcs.len();
    let base = [prog.add_vars(width), prog.add_vars(width)];
    for &b in &base {
        for k in 0..width {
            prog.add_ge(AffineExpr::term(b + k, 1.0))?;
        }
    }
    for w in 0..nv {
        prog.add_le(
            AffineExpr::term(base[0] + w, 1.0)
                .with_term(base[1] + w, 1.0)
                + AffineExpr::constant(-1.0),
        )?;
    }
    let ends = [
        (problem.source(), u), // σ_in -> u_out
        (v, problem.target()), // v_in -> τ_out
    ];
    for (c, &(from, to)) in ends.iter().enumerate() {
        let b = base[c];
        // node balance: inflow - outflow + supply = 0, nodes w_in then w_out
        let mut bal_in: Vec<AffineExpr> = (0..nv).map(|w| AffineExpr::term(b + w, -1.0)).collect();
        let mut bal_out: Vec<AffineExpr> = (0..nv).map(|w| AffineExpr::term(b + w, 1.0)).collect();
        for (k, &g) in arcs.iter().enumerate() {
            let arc = &problem.edges()[g];
            bal_out[arc.tail].add_term(b + nv + k, -1.0);
            bal_in[arc.head].add_term(b + nv + k, 1.0);
        }
        bal_in[from].constant += 1.0;
        bal_out[to].constant -= 1.0;
        for row in bal_in.into_iter().chain(bal_out) {
            prog.add_eq(row)?;
        }
    }
    Ok(prog)
}

/// Breadth-first path from `from` to `to` over edges other than `skip`,
/// avoiding `blocked` vertices. Returns the vertex sequence.
fn bfs_path(
    problem: &GcsProblem,
    from: VertexId,
    to: VertexId,
    skip: [Option<EdgeId>; 2],
    blocked: &[bool],
) -> Option<Vec<VertexId>> {
    if blocked[from] || blocked[to] {
        return None;
    }
    let mut parent = vec![usize::MAX; problem.vertices().len()];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(w) = queue.pop_front() {
        if w == to {
            let mut path = vec![to];
            let mut x = to;
            while x != from {
                x = parent[x];
                path.push(x);
            }
            path.reverse();
            return Some(path);
        }
        for &g in problem.out_edges(w) {
            let h = problem.edges()[g].head;
            if skip.contains(&Some(g)) || blocked[h] || parent[h] != usize::MAX {
                continue;
            }
            parent[h] = w;
            queue.push_back(h);
        }
    }
    None
}

/// Vertices on every `from`-`to` path, or `None` without any path.
fn cut_vertices(problem: &GcsProblem, from: VertexId, to: VertexId, skip: [Option<EdgeId>; 2]) -> Option<Vec<VertexId>> {
    let mut blocked = vec![false; problem.vertices().len()];
    let path = bfs_path(problem, from, to, skip, &blocked)?;
    if from == to {
        return Some(path);
    }
    let mut cuts = vec![from, to];
    for &w in &path[1..path.len() - 1] {
        blocked[w] = true;
        if bfs_path(problem, from, to, skip, &blocked).is_none() {
            cuts.push(w);
        }
        blocked[w] = false;
    }
    Some(cuts)
}

/// Max-flow, capped at 2, from `{σ, v}` to `{u, τ}` with unit vertex
/// capacities: the two commodities merged into one.
fn merged_flow_value(problem: &GcsProblem, u: VertexId, v: VertexId, skip: [Option<EdgeId>; 2]) -> usize {
    let nv = problem.vertices().len();
    let (src, snk) = (2 * nv, 2 * nv + 1);
    // arcs stored in pairs, arc ^ 1 is the reverse
    let mut head = Vec::new();
    let mut cap = Vec::new();
    let mut adj = vec![Vec::new(); 2 * nv + 2];
    let mut arc = |a: usize, b: usize| {
        adj[a].push(head.len());
        head.push(b);
        cap.push(1u8);
        adj[b].push(head.len());
        head.push(a);
        cap.push(0u8);
    };
    for w in 0..nv {
        arc(2 * w, 2 * w + 1);
    }
    for (g, edge) in problem.edges().iter().enumerate() {
        if !skip.contains(&Some(g)) {
            arc(2 * edge.tail + 1, 2 * edge.head);
        }
    }
    arc(src, 2 * problem.source());
    arc(src, 2 * v);
    arc(2 * u + 1, snk);
    arc(2 * problem.target() + 1, snk);
    let mut flow = 0;
    while flow < 2 {
        let mut via = vec![usize::MAX; 2 * nv + 2];
        let mut queue = VecDeque::from([src]);
        while let Some(a) = queue.pop_front() {
            for &k in &adj[a] {
                let b = head[k];
                if cap[k] > 0 && b != src && via[b] == usize::MAX {
                    via[b] = k;
                    queue.push_back(b);
                }
            }
        }
        if via[snk] == usize::MAX {
            break;
        }
        let mut b = snk;
        while b != src {
            let k = via[b];
            cap[k] -= 1;
            cap[k ^ 1] += 1;
            b = head[k ^ 1];
        }
        flow += 1;
    }
    flow
}

/// Settles the multiflow test without an LP when a certificate is cheap:
/// `Some(true)` for two vertex-disjoint paths, `Some(false)` for a vertex
/// both commodities must cross at full flow.
fn combinatorial_test(problem: &GcsProblem, edge: EdgeId) -> Option<bool> {
    let e = &problem.edges()[edge];
    let (u, v) = (e.tail, e.head);
    let skip = [Some(edge), problem.find_edge(v, u)];
    let (s, t) = (problem.source(), problem.target());
    let nv = problem.vertices().len();
    for first in [0, 1] {
        let ends = [(s, u, v), (v, t, u)];
        let (a, b, avoid) = ends[first];
        let mut blocked = vec![false; nv];
        blocked[avoid] = true;
        let Some(p) = bfs_path(problem, a, b, skip, &blocked) else {
            continue;
        };
        let mut blocked = vec![false; nv];
        for &w in &p {
            blocked[w] = true;
        }
        let (c, d, _) = ends[1 - first];
        if bfs_path(problem, c, d, skip, &blocked).is_some() {
            return Some(true);
        }
    }
    let (Some(c1), Some(c2)) = (cut_vertices(problem, s, u, skip), cut_vertices(problem, v, t, skip)) else {
        return Some(false);
    };
    if c1.iter().any(|w| c2.contains(w)) || merged_flow_value(problem, u, v, skip) < 2 {
        return Some(false);
    }
    None
}

/// Drops every edge whose multiflow program is infeasible. Solver failures
/// keep the edge. Edges with a combinatorial certificate of feasibility or
/// infeasibility skip the LP.
pub fn edge_redundancy_filter(problem: &GcsProblem, solver: &dyn ConicSolver) -> Result<(GcsProblem, PreprocessReport)> {
    let ids: Vec<EdgeId> = (0..problem.edges().len()).collect();
    let outcomes = par_map(&ids, |&e| -> Result<(SolveStatus, Decision)> {
        Ok(match combinatorial_test(problem, e) {
            Some(true) => (SolveStatus::Optimal, Decision::DisjointPaths),
            Some(false) => (SolveStatus::Infeasible, Decision::SharedCutVertex),
            None => (solver.solve(&multiflow_program(problem, e)?).status, Decision::Lp),
        })
    });
    let mut tests = Vec::with_capacity(ids.len());
    for (e, outcome) in ids.into_iter().zip(outcomes) {
        let (status, decision) = outcome?;
        let edge = &problem.edges()[e];
        tests.push(EdgeTest {
            edge: e,
            tail: edge.tail,
            head: edge.head,
            status,
            decision,
            removed: status == SolveStatus::Infeasible,
        });
    }
    let keep: Vec<bool> = tests.iter().map(|t| !t.removed).collect();
    let pruned = problem.retain_edges(|id, _| keep[id])?;
    Ok((
        pruned,
        PreprocessReport {
            tests,
            two_cycle_pairs: 0,
        },
    ))
}
