//! Conic program builder and the solver boundary.
//!
//! Programs are stated over a flat vector of scalar variables. Constraints are
//! affine expressions with the convention `expr == 0` or `expr <= 0`, plus
//! second-order cones `||u||_2 <= t` and rotated cones `||u||_2^2 <= 2 v w`
//! with `v, w >= 0`. The objective is an affine functional that is minimized.
//!
//! Backends implement [`ConicSolver`]; see the `backend` module (behind the
//! `std` feature) for the bundled ones.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::math;

/// Index of a scalar decision variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub usize);

/// Sparse affine expression `sum_i c_i x_i + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: Var) -> Self {
        Self::term(v.0, 1.0)
    }

    pub fn term(index: usize, coeff: f64) -> Self {
        Self {
            terms: alloc::vec![(index, coeff)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, index: usize, coeff: f64) -> &mut Self {
        if coeff != 0.0 {
            self.terms.push((index, coeff));
        }
        self
    }

    pub fn with_term(mut self, index: usize, coeff: f64) -> Self {
        self.add_term(index, coeff);
        self
    }

    pub fn add_expr(&mut self, other: &AffineExpr, scale: f64) -> &mut Self {
        for &(i, c) in &other.terms {
            self.add_term(i, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = Self::zero();
        out.add_expr(self, s);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    /// Merges repeated indices, drops zero coefficients and sorts by index.
    pub fn normalized(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        Self {
            terms: merged,
            constant: self.constant,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }

    fn fmt_into(&self, out: &mut String) {
        let e = self.normalized();
        for (i, c) in &e.terms {
            let _ = write!(out, "{:+e}*x{} ", c, i);
        }
        let _ = write!(out, "{:+e}", e.constant);
    }
}

impl From<Var> for AffineExpr {
    fn from(v: Var) -> Self {
        AffineExpr::var(v)
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        self.add_expr(&rhs, 1.0);
        self
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(mut self, rhs: AffineExpr) -> AffineExpr {
        self.add_expr(&rhs, -1.0);
        self
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(self, rhs: f64) -> AffineExpr {
        self.scaled(rhs)
    }
}

/// `||u||_2 <= t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderCone {
    pub t: AffineExpr,
    pub u: Vec<AffineExpr>,
}

/// `||u||_2^2 <= 2 v w`, `v >= 0`, `w >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotatedCone {
    pub v: AffineExpr,
    pub w: AffineExpr,
    pub u: Vec<AffineExpr>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProgram {
    num_vars: usize,
    equalities: Vec<AffineExpr>,
    inequalities: Vec<AffineExpr>,
    second_order: Vec<SecondOrderCone>,
    rotated: Vec<RotatedCone>,
    objective: AffineExpr,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars - 1)
    }

    /// Adds `n` consecutive variables and returns the index of the first.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += n;
        first
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn equalities(&self) -> &[AffineExpr] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[AffineExpr] {
        &self.inequalities
    }

    pub fn second_order_cones(&self) -> &[SecondOrderCone] {
        &self.second_order
    }

    pub fn rotated_cones(&self) -> &[RotatedCone] {
        &self.rotated
    }

    pub fn objective(&self) -> &AffineExpr {
        &self.objective
    }

    fn check_expr(&self, e: &AffineExpr) -> Result<()> {
        match e.max_index() {
            Some(i) if i >= self.num_vars => Err(Error::DimensionMismatch {
                expected: self.num_vars,
                found: i + 1,
            }),
            _ => Ok(()),
        }
    }

    /// `expr == 0`.
    pub fn add_eq(&mut self, expr: AffineExpr) -> Result<()> {
        self.check_expr(&expr)?;
        self.equalities.push(expr.normalized());
        Ok(())
    }

    /// `expr <= 0`.
    pub fn add_le(&mut self, expr: AffineExpr) -> Result<()> {
        self.check_expr(&expr)?;
        self.inequalities.push(expr.normalized());
        Ok(())
    }

    /// `expr >= 0`.
    pub fn add_ge(&mut self, expr: AffineExpr) -> Result<()> {
        self.add_le(-expr)
    }

    pub fn add_soc(&mut self, t: AffineExpr, u: Vec<AffineExpr>) -> Result<()> {
        self.check_expr(&t)?;
        for e in &u {
            self.check_expr(e)?;
        }
        self.second_order.push(SecondOrderCone {
            t: t.normalized(),
            u: u.iter().map(AffineExpr::normalized).collect(),
        });
        Ok(())
    }

    pub fn add_rsoc(&mut self, v: AffineExpr, w: AffineExpr, u: Vec<AffineExpr>) -> Result<()> {
        self.check_expr(&v)?;
        self.check_expr(&w)?;
        for e in &u {
            self.check_expr(e)?;
        }
        self.rotated.push(RotatedCone {
            v: v.normalized(),
            w: w.normalized(),
            u: u.iter().map(AffineExpr::normalized).collect(),
        });
        Ok(())
    }

    /// New variable `t` with `||u||_2 <= t`.
    pub fn add_epigraph_l2(&mut self, u: Vec<AffineExpr>) -> Result<Var> {
        for e in &u {
            self.check_expr(e)?;
        }
        let t = self.add_var();
        self.add_soc(AffineExpr::var(t), u)?;
        Ok(t)
    }

    /// New variable `t` with `||u||_2^2 <= t w`, so the smallest feasible `t`
    /// is `||u||^2 / w` whenever `w > 0`.
    pub fn add_quad_over_lin(&mut self, u: Vec<AffineExpr>, w: AffineExpr) -> Result<Var> {
        for e in &u {
            self.check_expr(e)?;
        }
        self.check_expr(&w)?;
        let t = self.add_var();
        self.add_rsoc(AffineExpr::term(t.0, 0.5), w, u)?;
        Ok(t)
    }

    pub fn add_objective(&mut self, expr: AffineExpr) -> Result<()> {
        self.check_expr(&expr)?;
        self.objective.add_expr(&expr, 1.0);
        self.objective = self.objective.normalized();
        Ok(())
    }

    pub fn set_objective(&mut self, expr: AffineExpr) -> Result<()> {
        self.check_expr(&expr)?;
        self.objective = expr.normalized();
        Ok(())
    }

    /// True when the program has no cone blocks.
    pub fn is_lp(&self) -> bool {
        self.second_order.is_empty() && self.rotated.is_empty()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest absolute constraint violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for e in &self.equalities {
            worst = worst.max(math::abs(e.eval(x)));
        }
        for e in &self.inequalities {
            worst = worst.max(e.eval(x));
        }
        for c in &self.second_order {
            let u: Vec<f64> = c.u.iter().map(|e| e.eval(x)).collect();
            worst = worst.max(math::norm2(&u) - c.t.eval(x));
        }
        for c in &self.rotated {
            let u: Vec<f64> = c.u.iter().map(|e| e.eval(x)).collect();
            let (v, w) = (c.v.eval(x), c.w.eval(x));
            // Compare in norm units so the check scales like the SOC one.
            let lowered = math::norm2(&[v - w, core::f64::consts::SQRT_2 * math::norm2(&u)]);
            worst = worst.max(lowered - (v + w)).max(-v).max(-w);
        }
        worst
    }

    /// Rewrites every rotated cone as a standard second-order cone using
    /// `||u||^2 <= 2 v w  <=>  ||(v - w, sqrt(2) u)|| <= v + w`.
    pub fn lower_rotated_cones(&self) -> ConicProgram {
        let mut out = self.clone();
        out.rotated.clear();
        for c in &self.rotated {
            let mut u = Vec::with_capacity(c.u.len() + 1);
            u.push((c.v.clone() - c.w.clone()).normalized());
            u.extend(
                c.u.iter()
                    .map(|e| e.scaled(core::f64::consts::SQRT_2).normalized()),
            );
            out.second_order.push(SecondOrderCone {
                t: (c.v.clone() + c.w.clone()).normalized(),
                u,
            });
        }
        out
    }

    /// Plain-text canonical form, stable across runs, for diffing.
    pub fn dump(&self) -> String {
        let mut out = format!("vars {}\nmin ", self.num_vars);
        self.objective.fmt_into(&mut out);
        out.push('\n');
        for e in &self.equalities {
            out.push_str("eq ");
            e.fmt_into(&mut out);
            out.push('\n');
        }
        for e in &self.inequalities {
            out.push_str("le ");
            e.fmt_into(&mut out);
            out.push('\n');
        }
        for c in &self.second_order {
            out.push_str("soc t=");
            c.t.fmt_into(&mut out);
            for e in &c.u {
                out.push_str(" | ");
                e.fmt_into(&mut out);
            }
            out.push('\n');
        }
        for c in &self.rotated {
            out.push_str("rsoc v=");
            c.v.fmt_into(&mut out);
            out.push_str(" w=");
            c.w.fmt_into(&mut out);
            for e in &c.u {
                out.push_str(" | ");
                e.fmt_into(&mut out);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Outcome of a solve. `primal` is present iff `status == Optimal`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub primal: Option<Vec<f64>>,
    pub objective: f64,
    pub diagnostics: String,
}

impl SolveResult {
    pub fn optimal(prog: &ConicProgram, x: Vec<f64>, diagnostics: String) -> Self {
        Self {
            status: SolveStatus::Optimal,
            objective: prog.objective_value(&x),
            primal: Some(x),
            diagnostics,
        }
    }

    pub fn failed(status: SolveStatus, diagnostics: String) -> Self {
        debug_assert!(status != SolveStatus::Optimal);
        let objective = match status {
            SolveStatus::Infeasible => f64::INFINITY,
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self {
            status,
            primal: None,
            objective,
            diagnostics,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Primal values, or an error carrying the backend diagnostics.
    pub fn into_primal(self) -> Result<Vec<f64>> {
        match self.primal {
            Some(x) if self.status == SolveStatus::Optimal => Ok(x),
            _ => Err(Error::Solver {
                status: self.status,
                diagnostics: self.diagnostics,
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub feasibility_tol: f64,
    pub gap_rel_tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-8,
            gap_rel_tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// A conic solver backend. Implementations must be safe to call from
/// several threads on distinct programs.
pub trait ConicSolver: Sync {
    fn solve_with(&self, prog: &ConicProgram, settings: &SolverSettings) -> SolveResult;

    fn solve(&self, prog: &ConicProgram) -> SolveResult {
        self.solve_with(prog, &SolverSettings::default())
    }
}

impl<S: ConicSolver + ?Sized> ConicSolver for &S {
    fn solve_with(&self, prog: &ConicProgram, settings: &SolverSettings) -> SolveResult {
        (**self).solve_with(prog, settings)
    }
}
