//! Convex sets: H-polytopes, boxes and points, with the membership,
//! intersection and homogenization queries used to build the graph.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::conic::{AffineExpr, ConicProgram, ConicSolver, SolveStatus};
use crate::error::{Error, Result};

/// Absolute slack used by membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-7;

/// Axis-aligned bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l).max(0.0)).product()
    }

    /// Volume of the intersection with `other`; zero when they only touch.
    pub fn overlap_volume(&self, other: &Aabb) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((l1, h1), (l2, h2))| (h1.min(*h2) - l1.max(*l2)).max(0.0))
            .product()
    }
}

/// Halfspace representation `A x <= b`, `A` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpaces {
    pub dim: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl HalfSpaces {
    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest value of `a_i x - b_i` over the rows.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        (0..self.rows())
            .map(|i| crate::math::dot(self.row(i), x) - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HPolytope {
    halfspaces: HalfSpaces,
    bounds: Option<Aabb>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConvexSet {
    HPolytope(HPolytope),
    Box(Aabb),
    Point(Vec<f64>),
}

impl ConvexSet {
    /// `{x : A x <= b}` with `A` given as rows. Needs at least one row.
    pub fn hpolytope(rows: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || dim == 0 {
            return Err(Error::InvalidSet("H-polytope needs at least one row and one column".into()));
        }
        if rows.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: b.len(),
            });
        }
        let mut a = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            a.extend_from_slice(r);
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSet("non-finite coefficient".into()));
        }
        let halfspaces = HalfSpaces { dim, a, b };
        let bounds = axis_aligned_bounds(&halfspaces);
        Ok(ConvexSet::HPolytope(HPolytope { halfspaces, bounds }))
    }

    /// H-polytope with caller-supplied bounding box (not verified).
    pub fn hpolytope_with_bounds(rows: Vec<Vec<f64>>, b: Vec<f64>, bounds: Aabb) -> Result<Self> {
        let mut set = Self::hpolytope(rows, b)?;
        if bounds.dim() != set.dim() {
            return Err(Error::DimensionMismatch {
                expected: set.dim(),
                found: bounds.dim(),
            });
        }
        if let ConvexSet::HPolytope(p) = &mut set {
            p.bounds = Some(bounds);
        }
        Ok(set)
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::InvalidSet("box of dimension zero".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidSet("box needs finite lo <= hi".into()));
        }
        Ok(ConvexSet::Box(Aabb { lo, hi }))
    }

    pub fn point(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSet("point needs finite coordinates".into()));
        }
        Ok(ConvexSet::Point(x))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::HPolytope(p) => p.halfspaces.dim,
            ConvexSet::Box(b) => b.dim(),
            ConvexSet::Point(x) => x.len(),
        }
    }

    /// Bounding box if known. Boxes and points always have one.
    pub fn bounds(&self) -> Option<Aabb> {
        match self {
            ConvexSet::HPolytope(p) => p.bounds.clone(),
            ConvexSet::Box(b) => Some(b.clone()),
            ConvexSet::Point(x) => Some(Aabb {
                lo: x.clone(),
                hi: x.clone(),
            }),
        }
    }

    /// Canonical `A x <= b` form.
    pub fn halfspaces(&self) -> HalfSpaces {
        match self {
            ConvexSet::HPolytope(p) => p.halfspaces.clone(),
            ConvexSet::Box(b) => box_halfspaces(&b.lo, &b.hi),
            ConvexSet::Point(x) => box_halfspaces(x, x),
        }
    }

    /// Fills in the bounding box of an H-polytope by solving `2n` support LPs.
    pub fn with_derived_bounds(self, solver: &dyn ConicSolver) -> Result<Self> {
        match self {
            ConvexSet::HPolytope(HPolytope { halfspaces, bounds: None }) => {
                let bounds = support_bounds(&halfspaces, solver)?;
                Ok(ConvexSet::HPolytope(HPolytope {
                    halfspaces,
                    bounds: Some(bounds),
                }))
            }
            other => Ok(other),
        }
    }

    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        self.contains_with_tol(point, MEMBERSHIP_TOL)
    }

    pub fn contains_with_tol(&self, point: &[f64], tol: f64) -> Result<bool> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: point.len(),
            });
        }
        Ok(match self {
            ConvexSet::HPolytope(p) => p.halfspaces.max_residual(point) <= tol,
            ConvexSet::Box(b) => point
                .iter()
                .zip(b.lo.iter().zip(&b.hi))
                .all(|(x, (l, h))| *x >= l - tol && *x <= h + tol),
            ConvexSet::Point(c) => point.iter().zip(c).all(|(x, c)| (x - c).abs() <= tol),
        })
    }

    /// Homogenized membership block `A x - b phi <= 0`, plus explicit
    /// bounding-box rows `lo phi <= x <= hi phi` for H-polytopes so that
    /// `phi = 0` pins `x` to the origin.
    pub fn scale_set(&self) -> Result<HomogenizedSet> {
        let bounds = self.bounds().ok_or(Error::Unbounded)?;
        let mut hs = self.halfspaces();
        if let ConvexSet::HPolytope(_) = self {
            let extra = box_halfspaces(&bounds.lo, &bounds.hi);
            hs.a.extend_from_slice(&extra.a);
            hs.b.extend_from_slice(&extra.b);
        }
        Ok(HomogenizedSet { halfspaces: hs })
    }
}

/// Rows `a_i x - b_i phi <= 0` in the variables `(x, phi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogenizedSet {
    pub halfspaces: HalfSpaces,
}

impl HomogenizedSet {
    pub fn dim(&self) -> usize {
        self.halfspaces.dim
    }

    pub fn is_satisfied(&self, x: &[f64], phi: f64, tol: f64) -> bool {
        let hs = &self.halfspaces;
        (0..hs.rows()).all(|i| crate::math::dot(hs.row(i), x) - hs.b[i] * phi <= tol)
    }

    /// The rows as program expressions `a_i x - b_i phi` (each `<= 0`), with
    /// `x` given as expressions and `phi` as an expression.
    pub fn rows_as_exprs(&self, x: &[AffineExpr], phi: &AffineExpr) -> Vec<AffineExpr> {
        let hs = &self.halfspaces;
        (0..hs.rows())
            .map(|i| {
                let mut e = phi.scaled(-hs.b[i]);
                for (j, &c) in hs.row(i).iter().enumerate() {
                    if c != 0.0 {
                        e.add_expr(&x[j], c);
                    }
                }
                e
            })
            .collect()
    }
}

fn box_halfspaces(lo: &[f64], hi: &[f64]) -> HalfSpaces {
    let n = lo.len();
    let mut a = vec![0.0; 2 * n * n];
    let mut b = vec![0.0; 2 * n];
    for i in 0..n {
        a[(2 * i) * n + i] = 1.0;
        b[2 * i] = hi[i];
        a[(2 * i + 1) * n + i] = -1.0;
        b[2 * i + 1] = -lo[i];
    }
    HalfSpaces { dim: n, a, b }
}

/// Bounds read off rows that constrain a single coordinate.
fn axis_aligned_bounds(hs: &HalfSpaces) -> Option<Aabb> {
    let n = hs.dim;
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    for i in 0..hs.rows() {
        let row = hs.row(i);
        let mut nz = row.iter().enumerate().filter(|(_, c)| **c != 0.0);
        if let (Some((j, &c)), None) = (nz.next(), nz.next()) {
            let v = hs.b[i] / c;
            if c > 0.0 {
                hi[j] = hi[j].min(v);
            } else {
                lo[j] = lo[j].max(v);
            }
        }
    }
    if lo.iter().chain(&hi).all(|v| v.is_finite()) {
        Some(Aabb { lo, hi })
    } else {
        None
    }
}

fn support_bounds(hs: &HalfSpaces, solver: &dyn ConicSolver) -> Result<Aabb> {
    let n = hs.dim;
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut prog = ConicProgram::new();
            let first = prog.add_vars(n);
            add_membership(&mut prog, hs, first)?;
            prog.add_objective(AffineExpr::term(first + j, -sign))?;
            let r = solver.solve(&prog);
            match r.status {
                SolveStatus::Optimal => {
                    let v = r.primal.as_ref().map(|x| x[first + j]).unwrap_or(0.0);
                    if sign > 0.0 {
                        hi[j] = v;
                    } else {
                        lo[j] = v;
                    }
                }
                SolveStatus::Unbounded => return Err(Error::Unbounded),
                SolveStatus::Infeasible => {
                    return Err(Error::InvalidSet("H-polytope is empty".into()))
                }
                SolveStatus::NumericalFailure => {
                    return Err(Error::Solver {
                        status: r.status,
                        diagnostics: r.diagnostics,
                    })
                }
            }
        }
    }
    Ok(Aabb { lo, hi })
}

fn add_membership(prog: &mut ConicProgram, hs: &HalfSpaces, first: usize) -> Result<()> {
    for i in 0..hs.rows() {
        let mut e = AffineExpr::constant(-hs.b[i]);
        for (j, &c) in hs.row(i).iter().enumerate() {
            e.add_term(first + j, c);
        }
        prog.add_le(e)?;
    }
    Ok(())
}

/// Whether two sets share a point (touching counts). Boxes and points are
/// decided in closed form; anything else through an LP feasibility problem.
pub fn intersects(a: &ConvexSet, b: &ConvexSet, solver: &dyn ConicSolver) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    match (a, b) {
        (ConvexSet::HPolytope(_), _) | (_, ConvexSet::HPolytope(_)) => {
            intersects_by_lp(a, b, solver)
        }
        (ConvexSet::Point(p), other) | (other, ConvexSet::Point(p)) => other.contains(p),
        (ConvexSet::Box(x), ConvexSet::Box(y)) => Ok(x
            .lo
            .iter()
            .zip(&x.hi)
            .zip(y.lo.iter().zip(&y.hi))
            .all(|((l1, h1), (l2, h2))| l1.max(*l2) <= h1.min(*h2) + MEMBERSHIP_TOL)),
    }
}

/// LP route of [`intersects`], usable for any pair of sets.
pub fn intersects_by_lp(a: &ConvexSet, b: &ConvexSet, solver: &dyn ConicSolver) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let mut prog = ConicProgram::new();
    let first = prog.add_vars(a.dim());
    add_membership(&mut prog, &a.halfspaces(), first)?;
    add_membership(&mut prog, &b.halfspaces(), first)?;
    let r = solver.solve(&prog);
    match r.status {
        SolveStatus::Optimal => Ok(true),
        SolveStatus::Infeasible => Ok(false),
        status => Err(Error::Solver {
            status,
            diagnostics: format!("intersection LP: {}", r.diagnostics),
        }),
    }
}

#[cfg(all(test, feature = "std"))]
mod tests {
    use super::*;
    use crate::backend::{AutoSolver, SimplexSolver};
    use proptest::prelude::*;

    fn unit_box() -> ConvexSet {
        ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn contains_examples() {
        let b = unit_box();
        assert!(b.contains(&[0.5, 0.5]).unwrap());
        assert!(!b.contains(&[1.0 + 2.0 * MEMBERSHIP_TOL, 0.5]).unwrap());
        assert!(matches!(
            b.contains(&[0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn intersects_examples() {
        let s = AutoSolver;
        let a = unit_box();
        let b = ConvexSet::boxed(vec![0.5, 0.5], vec![1.5, 1.5]).unwrap();
        let c = ConvexSet::boxed(vec![2.0, 2.0], vec![3.0, 3.0]).unwrap();
        let face = ConvexSet::boxed(vec![1.0, 0.0], vec![2.0, 1.0]).unwrap();
        assert!(intersects(&a, &b, &s).unwrap());
        assert!(!intersects(&a, &c, &s).unwrap());
        assert!(intersects(&a, &face, &s).unwrap());
        // the LP oracle agrees on all three
        assert!(intersects_by_lp(&a, &b, &SimplexSolver).unwrap());
        assert!(!intersects_by_lp(&a, &c, &SimplexSolver).unwrap());
        assert!(intersects_by_lp(&a, &face, &SimplexSolver).unwrap());
    }

    #[test]
    fn triangle_needs_support_lps_for_bounds() {
        // x >= 0, y >= 0, x + y <= 1
        let t = ConvexSet::hpolytope(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap();
        assert!(t.bounds().is_none());
        assert_eq!(t.scale_set().unwrap_err(), Error::Unbounded);
        let t = t.with_derived_bounds(&AutoSolver).unwrap();
        let bb = t.bounds().unwrap();
        for (v, want) in bb.lo.iter().chain(&bb.hi).zip([0.0, 0.0, 1.0, 1.0]) {
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn unbounded_halfplane_is_reported() {
        let h = ConvexSet::hpolytope(vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
        assert_eq!(h.with_derived_bounds(&AutoSolver).unwrap_err(), Error::Unbounded);
    }

    #[test]
    fn scale_set_examples() {
        let b = unit_box().scale_set().unwrap();
        assert!(b.is_satisfied(&[0.3, 0.9], 1.0, 0.0));
        assert!(!b.is_satisfied(&[1.3, 0.9], 1.0, 1e-9));
        assert!(b.is_satisfied(&[0.0, 0.0], 0.0, 0.0));
        assert!(!b.is_satisfied(&[1e-3, 0.0], 0.0, 1e-9));
        let one_two = ConvexSet::boxed(vec![1.0], vec![2.0]).unwrap().scale_set().unwrap();
        for (x, inside) in [(0.5, true), (1.0, true), (0.49, false), (1.01, false)] {
            assert_eq!(one_two.is_satisfied(&[x], 0.5, 1e-12), inside, "x = {x}");
        }
    }

    fn arb_polytope() -> impl Strategy<Value = ConvexSet> {
        // a box cut by one random halfspace through its center
        (
            prop::collection::vec(-2.0..2.0f64, 2),
            prop::collection::vec(0.2..2.0f64, 2),
            prop::collection::vec(-1.0..1.0f64, 2),
        )
            .prop_map(|(c, w, n)| {
                let rows = vec![
                    vec![1.0, 0.0],
                    vec![-1.0, 0.0],
                    vec![0.0, 1.0],
                    vec![0.0, -1.0],
                    n.clone(),
                ];
                let b = vec![
                    c[0] + w[0],
                    -(c[0] - w[0]),
                    c[1] + w[1],
                    -(c[1] - w[1]),
                    n[0] * c[0] + n[1] * c[1] + 0.1,
                ];
                ConvexSet::hpolytope(rows, b).unwrap()
            })
    }

    proptest! {
        #[test]
        fn contains_matches_halfspace_evaluation(set in arb_polytope(), p in prop::collection::vec(-4.0..4.0f64, 2)) {
            let hs = set.halfspaces();
            let direct = (0..hs.rows()).all(|i| crate::math::dot(hs.row(i), &p) <= hs.b[i] + MEMBERSHIP_TOL);
            prop_assert_eq!(set.contains(&p).unwrap(), direct);
            // scale_set at phi = 1 is plain membership
            prop_assert_eq!(set.scale_set().unwrap().is_satisfied(&p, 1.0, MEMBERSHIP_TOL), direct);
        }

        #[test]
        fn intersects_is_symmetric(a in arb_polytope(), b in arb_polytope()) {
            let s = AutoSolver;
            prop_assert_eq!(intersects(&a, &b, &s).unwrap(), intersects(&b, &a, &s).unwrap());
        }

        #[test]
        fn homogenized_set_is_positively_homogeneous(set in arb_polytope(), p in prop::collection::vec(-4.0..4.0f64, 2), f1 in 0.05..1.0f64, f2 in 0.05..3.0f64) {
            let h = set.scale_set().unwrap();
            let x1: Vec<f64> = p.iter().map(|v| v * f1).collect();
            if h.is_satisfied(&x1, f1, 0.0) {
                let x2: Vec<f64> = x1.iter().map(|v| v * f2 / f1).collect();
                prop_assert!(h.is_satisfied(&x2, f2, 1e-9));
            }
        }

        #[test]
        fn box_fast_path_agrees_with_lp(l1 in prop::collection::vec(-2.0..2.0f64, 2), w1 in prop::collection::vec(0.0..2.0f64, 2),
                                        l2 in prop::collection::vec(-2.0..2.0f64, 2), w2 in prop::collection::vec(0.0..2.0f64, 2)) {
            let a = ConvexSet::boxed(l1.clone(), l1.iter().zip(&w1).map(|(l, w)| l + w).collect()).unwrap();
            let b = ConvexSet::boxed(l2.clone(), l2.iter().zip(&w2).map(|(l, w)| l + w).collect()).unwrap();
            prop_assert_eq!(intersects(&a, &b, &AutoSolver).unwrap(), intersects_by_lp(&a, &b, &SimplexSolver).unwrap());
        }
    }
}
