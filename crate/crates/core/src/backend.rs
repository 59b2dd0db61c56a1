//! Bundled solver backends: clarabel for cone programs and minilp as the
//! LP fast path. [`AutoSolver`] dispatches between them.

use std::format;
use std::string::{String, ToString};
use std::vec::Vec;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::conic::{AffineExpr, ConicProgram, ConicSolver, SolveResult, SolveStatus, SolverSettings};

/// Interior-point backend for programs with or without cones.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClarabelSolver;

/// Simplex backend; refuses programs with cone blocks.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimplexSolver;

/// Uses [`SimplexSolver`] for LPs with at most [`SIMPLEX_MAX_VARS`]
/// variables and [`ClarabelSolver`] otherwise.
#[derive(Clone, Copy, Debug, Default)]
pub struct AutoSolver;

/// Above this size the interior-point method is faster on our LPs.
pub const SIMPLEX_MAX_VARS: usize = 400;

impl ConicSolver for AutoSolver {
    fn solve_with(&self, prog: &ConicProgram, settings: &SolverSettings) -> SolveResult {
        if prog.is_lp() && prog.num_vars() <= SIMPLEX_MAX_VARS {
            SimplexSolver.solve_with(prog, settings)
        } else {
            ClarabelSolver.solve_with(prog, settings)
        }
    }
}

/// Programs without variables or rows need no backend.
fn solve_degenerate(prog: &ConicProgram) -> Option<SolveResult> {
    if prog.num_vars() == 0 {
        let x = Vec::new();
        return Some(if prog.max_violation(&x) <= 1e-9 {
            SolveResult::optimal(prog, x, String::from("empty program"))
        } else {
            SolveResult::failed(SolveStatus::Infeasible, String::from("constant constraints violated"))
        });
    }
    let rows = prog.equalities().len()
        + prog.inequalities().len()
        + prog.second_order_cones().len()
        + prog.rotated_cones().len();
    if rows == 0 {
        return Some(if prog.objective().is_constant() {
            SolveResult::optimal(prog, std::vec![0.0; prog.num_vars()], String::from("unconstrained"))
        } else {
            SolveResult::failed(SolveStatus::Unbounded, String::from("unconstrained linear objective"))
        });
    }
    None
}

impl ConicSolver for ClarabelSolver {
    fn solve_with(&self, prog: &ConicProgram, settings: &SolverSettings) -> SolveResult {
        if let Some(r) = solve_degenerate(prog) {
            return r;
        }
        let prog = prog.lower_rotated_cones();
        let n = prog.num_vars();

        // Rows of A x + s = b with s in the cone product.
        let mut rows_i = Vec::new();
        let mut cols_j = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut push_row = |e: &AffineExpr, sign: f64, b: &mut Vec<f64>| {
            let r = b.len();
            for &(j, c) in &e.terms {
                rows_i.push(r);
                cols_j.push(j);
                vals.push(sign * c);
            }
            b.push(-sign * e.constant);
        };
        // expr == 0  ->  a x + s = -c, s in {0}
        for e in prog.equalities() {
            push_row(e, 1.0, &mut b);
        }
        if !prog.equalities().is_empty() {
            cones.push(SupportedConeT::ZeroConeT(prog.equalities().len()));
        }
        // expr <= 0  ->  s = -c - a x >= 0
        for e in prog.inequalities() {
            push_row(e, 1.0, &mut b);
        }
        if !prog.inequalities().is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(prog.inequalities().len()));
        }
        // (t, u) in SOC  ->  s = (t(x), u(x)) = b - A x
        for c in prog.second_order_cones() {
            push_row(&c.t, -1.0, &mut b);
            for e in &c.u {
                push_row(e, -1.0, &mut b);
            }
            cones.push(SupportedConeT::SecondOrderConeT(1 + c.u.len()));
        }
        let m = b.len();
        let a = CscMatrix::new_from_triplets(m, n, rows_i, cols_j, vals);
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut q = std::vec![0.0; n];
        for &(j, c) in &prog.objective().terms {
            q[j] += c;
        }

        let cfg = match DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(settings.feasibility_tol)
            .tol_gap_rel(settings.gap_rel_tol)
            .tol_gap_abs(settings.gap_rel_tol)
            .max_iter(settings.max_iter)
            .build()
        {
            Ok(s) => s,
            Err(e) => return SolveResult::failed(SolveStatus::NumericalFailure, e.to_string()),
        };
        let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, cfg) {
            Ok(s) => s,
            Err(e) => return SolveResult::failed(SolveStatus::NumericalFailure, format!("{e}")),
        };
        solver.solve();
        let sol = &solver.solution;
        let diag = format!(
            "clarabel {:?} after {} iterations (r_prim {:.2e}, r_dual {:.2e}, primal {:.9}, dual {:.9})",
            sol.status, sol.iterations, sol.r_prim, sol.r_dual, sol.obj_val, sol.obj_val_dual
        );
        match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {
                SolveResult::optimal(&prog, sol.x.clone(), diag)
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveResult::failed(SolveStatus::Infeasible, diag)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveResult::failed(SolveStatus::Unbounded, diag)
            }
            _ => SolveResult::failed(SolveStatus::NumericalFailure, diag),
        }
    }
}

impl ConicSolver for SimplexSolver {
    fn solve_with(&self, prog: &ConicProgram, _settings: &SolverSettings) -> SolveResult {
        use minilp::{ComparisonOp, OptimizationDirection, Problem};

        if !prog.is_lp() {
            return SolveResult::failed(
                SolveStatus::NumericalFailure,
                String::from("simplex backend cannot handle cone blocks"),
            );
        }
        if let Some(r) = solve_degenerate(prog) {
            return r;
        }
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let mut obj = std::vec![0.0; prog.num_vars()];
        for &(j, c) in &prog.objective().terms {
            obj[j] += c;
        }
        let vars: Vec<_> = obj
            .iter()
            .map(|&c| lp.add_var(c, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        let mut add = |e: &AffineExpr, op: ComparisonOp| {
            if e.terms.is_empty() {
                return Ok::<(), String>(());
            }
            let terms: Vec<_> = e.terms.iter().map(|&(j, c)| (vars[j], c)).collect();
            lp.add_constraint(terms.as_slice(), op, -e.constant);
            Ok(())
        };
        // Constant rows never reach minilp; check them directly.
        for e in prog.equalities() {
            if e.terms.is_empty() && e.constant.abs() > 1e-12 {
                return SolveResult::failed(SolveStatus::Infeasible, String::from("constant equality violated"));
            }
            let _ = add(e, ComparisonOp::Eq);
        }
        for e in prog.inequalities() {
            if e.terms.is_empty() && e.constant > 1e-12 {
                return SolveResult::failed(SolveStatus::Infeasible, String::from("constant inequality violated"));
            }
            let _ = add(e, ComparisonOp::Le);
        }
        match lp.solve() {
            Ok(sol) => {
                let x: Vec<f64> = vars.iter().map(|v| *sol.var_value(*v)).collect();
                // minilp folds single-variable rows into bounds and may then
                // report an infinite value instead of an unbounded status.
                if x.iter().any(|v| !v.is_finite()) || !sol.objective().is_finite() {
                    return SolveResult::failed(SolveStatus::Unbounded, String::from("minilp: infinite optimum"));
                }
                let viol = prog.max_violation(&x);
                if viol > 1e-6 {
                    return SolveResult::failed(
                        SolveStatus::NumericalFailure,
                        format!("minilp: solution violates constraints by {viol:e}"),
                    );
                }
                SolveResult::optimal(prog, x, String::from("minilp optimal"))
            }
            Err(minilp::Error::Infeasible) => {
                SolveResult::failed(SolveStatus::Infeasible, String::from("minilp: infeasible"))
            }
            Err(minilp::Error::Unbounded) => {
                SolveResult::failed(SolveStatus::Unbounded, String::from("minilp: unbounded"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::Var;
    use std::vec;

    fn x_at_least_3() -> ConicProgram {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.add_le(AffineExpr::constant(3.0) - AffineExpr::var(x)).unwrap();
        p.add_objective(AffineExpr::var(x)).unwrap();
        p
    }

    #[test]
    fn lp_min_x_with_lower_bound() {
        for s in [&AutoSolver as &dyn ConicSolver, &ClarabelSolver, &SimplexSolver] {
            let r = s.solve(&x_at_least_3());
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!((r.objective - 3.0).abs() < 1e-7, "{}", r.objective);
        }
    }

    #[test]
    fn infeasible_lp() {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.add_le(AffineExpr::var(x)).unwrap();
        p.add_le(AffineExpr::constant(1.0) - AffineExpr::var(x)).unwrap();
        for s in [&ClarabelSolver as &dyn ConicSolver, &SimplexSolver] {
            let r = s.solve(&p);
            assert_eq!(r.status, SolveStatus::Infeasible);
            assert!(r.primal.is_none());
        }
    }

    #[test]
    fn unbounded_lp() {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.add_le(AffineExpr::var(x)).unwrap();
        p.add_objective(AffineExpr::var(x)).unwrap();
        assert_eq!(SimplexSolver.solve(&p).status, SolveStatus::Unbounded);
        assert_eq!(ClarabelSolver.solve(&p).status, SolveStatus::Unbounded);
    }

    #[test]
    fn socp_norm_of_three_four() {
        let mut p = ConicProgram::new();
        let t = p.add_epigraph_l2(vec![AffineExpr::constant(3.0), AffineExpr::constant(4.0)]).unwrap();
        p.add_objective(AffineExpr::var(t)).unwrap();
        let r = AutoSolver.solve(&p);
        assert!((r.objective - 5.0).abs() < 1e-7);
        assert_eq!(SimplexSolver.solve(&p).status, SolveStatus::NumericalFailure);
    }

    #[test]
    fn zero_vector_epigraph() {
        let mut p = ConicProgram::new();
        let t = p.add_epigraph_l2(vec![AffineExpr::zero(), AffineExpr::zero()]).unwrap();
        p.add_objective(AffineExpr::var(t)).unwrap();
        let x = AutoSolver.solve(&p).into_primal().unwrap();
        assert!(x[t.0].abs() < 1e-7);
    }

    #[test]
    fn sum_of_epigraphs_is_sum_of_norms() {
        let mut p = ConicProgram::new();
        let a = p.add_epigraph_l2(vec![AffineExpr::constant(3.0), AffineExpr::constant(4.0)]).unwrap();
        let b = p.add_epigraph_l2(vec![AffineExpr::constant(1.0), AffineExpr::constant(1.0)]).unwrap();
        p.add_objective(AffineExpr::var(a) + AffineExpr::var(b)).unwrap();
        let r = AutoSolver.solve(&p);
        assert!((r.objective - (5.0 + 2f64.sqrt())).abs() < 1e-7);
    }

    fn quad_over_lin_min(u: &[f64], w: f64) -> f64 {
        let mut p = ConicProgram::new();
        let t = p
            .add_quad_over_lin(u.iter().map(|&c| AffineExpr::constant(c)).collect(), AffineExpr::constant(w))
            .unwrap();
        p.add_objective(AffineExpr::var(t)).unwrap();
        AutoSolver.solve(&p).objective
    }

    #[test]
    fn quad_over_lin_examples() {
        assert!((quad_over_lin_min(&[1.0, 1.0], 2.0) - 1.0).abs() < 1e-7);
        assert!(quad_over_lin_min(&[0.0, 0.0], 3.0).abs() < 1e-7);
        // (alpha u, alpha w) scales the minimum by alpha
        let base = quad_over_lin_min(&[0.7, -1.3], 0.9);
        let scaled = quad_over_lin_min(&[2.1, -3.9], 2.7);
        assert!((scaled - 3.0 * base).abs() < 1e-6 * (1.0 + base));
    }

    #[test]
    fn quad_over_lin_with_negative_denominator_is_infeasible() {
        let mut p = ConicProgram::new();
        let t = p
            .add_quad_over_lin(vec![AffineExpr::constant(1.0)], AffineExpr::constant(-1.0))
            .unwrap();
        p.add_objective(AffineExpr::var(t)).unwrap();
        assert_eq!(AutoSolver.solve(&p).status, SolveStatus::Infeasible);
    }

    #[test]
    fn solution_satisfies_constraints() {
        // min x0 + 2 x1 s.t. ||(x0 - 1, x1 - 2)|| <= 1, x0 + x1 = 2.5
        let mut p = ConicProgram::new();
        let f = p.add_vars(2);
        p.add_soc(
            AffineExpr::constant(1.0),
            vec![
                AffineExpr::term(f, 1.0).with_term(f, 0.0) - AffineExpr::constant(1.0),
                AffineExpr::term(f + 1, 1.0) - AffineExpr::constant(2.0),
            ],
        )
        .unwrap();
        p.add_eq(AffineExpr::term(f, 1.0).with_term(f + 1, 1.0) - AffineExpr::constant(2.5))
            .unwrap();
        p.add_objective(AffineExpr::var(Var(f)) + AffineExpr::term(f + 1, 2.0)).unwrap();
        let x = ClarabelSolver.solve(&p).into_primal().unwrap();
        assert!(p.max_violation(&x) <= 1e-6);
    }
}
