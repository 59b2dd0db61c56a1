//! Bernstein polynomials and Bézier curves on the unit interval.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Highest supported degree; binomials stay exact in `f64` well past this.
pub const MAX_DEGREE: usize = 30;

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    crate::math::round(c)
}

/// `β_k^d(s) = C(d,k) s^k (1-s)^(d-k)`.
pub fn bernstein(k: usize, d: usize, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(alloc::format!("parameter {s} outside [0, 1]")));
    }
    if d > MAX_DEGREE {
        return Err(Error::InvalidArgument(alloc::format!("degree {d} exceeds {MAX_DEGREE}")));
    }
    if k > d {
        return Err(Error::InvalidArgument(alloc::format!("index {k} exceeds degree {d}")));
    }
    Ok(binomial(d, k) * crate::math::powi(s, k as i32) * crate::math::powi(1.0 - s, (d - k) as i32))
}

/// A Bézier curve with control points of equal dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct BezierCurve {
    points: Vec<Vec<f64>>,
}

impl BezierCurve {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("curve needs at least one control point".into()))?;
        if points.len() - 1 > MAX_DEGREE {
            return Err(Error::InvalidArgument(alloc::format!(
                "degree {} exceeds {MAX_DEGREE}",
                points.len() - 1
            )));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        Ok(Self { points })
    }

    /// Scalar curve from coefficients.
    pub fn scalar(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|c| vec![*c]).collect())
    }

    pub fn degree(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn control_points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// `Σ_k β_k^d(s) γ_k`.
    pub fn evaluate(&self, s: f64) -> Vec<f64> {
        let d = self.degree();
        let mut out = vec![0.0; self.dim()];
        for (k, p) in self.points.iter().enumerate() {
            let w = binomial(d, k) * crate::math::powi(s, k as i32) * crate::math::powi(1.0 - s, (d - k) as i32);
            for (o, v) in out.iter_mut().zip(p) {
                *o += w * v;
            }
        }
        out
    }

    /// Evaluation by repeated linear interpolation.
    pub fn de_casteljau(&self, s: f64) -> Vec<f64> {
        let mut pts = self.points.clone();
        for r in 1..pts.len() {
            for k in 0..pts.len() - r {
                let (left, right) = pts.split_at_mut(k + 1);
                for (a, b) in left[k].iter_mut().zip(&right[0]) {
                    *a = (1.0 - s) * *a + s * b;
                }
            }
        }
        pts.swap_remove(0)
    }

    /// Derivative curve of degree `d - 1`; a constant has the zero curve
    /// as derivative.
    pub fn derivative(&self) -> Self {
        let d = self.degree();
        if d == 0 {
            return Self {
                points: vec![vec![0.0; self.dim()]],
            };
        }
        let points = self
            .points
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| d as f64 * (b - a)).collect())
            .collect();
        Self { points }
    }

    /// Same curve written with degree `target >= d`.
    pub fn elevate_degree(&self, target: usize) -> Result<Self> {
        if target < self.degree() {
            return Err(Error::InvalidArgument(alloc::format!(
                "cannot lower degree {} to {target}",
                self.degree()
            )));
        }
        let mut c = self.clone();
        while c.degree() < target {
            c = c.elevate_once()?;
        }
        Ok(c)
    }

    fn elevate_once(&self) -> Result<Self> {
        let d = self.degree();
        if d + 1 > MAX_DEGREE {
            return Err(Error::InvalidArgument(alloc::format!("degree {} exceeds {MAX_DEGREE}", d + 1)));
        }
        let n = d + 1;
        let mut points = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let a = k as f64 / n as f64;
            let p: Vec<f64> = (0..self.dim())
                .map(|j| {
                    let lo = if k > 0 { self.points[k - 1][j] } else { 0.0 };
                    let hi = if k <= d { self.points[k][j] } else { 0.0 };
                    a * lo + (1.0 - a) * hi
                })
                .collect();
            points.push(p);
        }
        Ok(Self { points })
    }

    /// Upper bound on `∫_0^1 f(γ(s)) ds` for convex `f`:
    /// `(1/(d+1)) Σ_k f(γ_k)`.
    pub fn convex_integral_bound(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let sum: f64 = self.points.iter().map(|p| f(p)).sum();
        sum / (self.degree() + 1) as f64
    }
}

/// Row-major `(d-l+1) x (d+1)` matrix `M` with `γ^{(l)} = M γ`, applied to
/// each coordinate of the control points.
pub fn derivative_matrix(d: usize, l: usize) -> Result<Vec<Vec<f64>>> {
    if l > d {
        return Err(Error::InvalidArgument(alloc::format!("derivative order {l} exceeds degree {d}")));
    }
    let mut m: Vec<Vec<f64>> = (0..=d)
        .map(|i| {
            let mut r = vec![0.0; d + 1];
            r[i] = 1.0;
            r
        })
        .collect();
    for step in 0..l {
        let deg = d - step;
        m = (0..deg)
            .map(|k| m[k + 1].iter().zip(&m[k]).map(|(b, a)| deg as f64 * (b - a)).collect())
            .collect();
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bernstein_small_cases() {
        assert_eq!(bernstein(1, 2, 0.5).unwrap(), 0.5);
        assert_eq!(bernstein(0, 3, 0.0).unwrap(), 1.0);
        assert_eq!(bernstein(3, 3, 1.0).unwrap(), 1.0);
        assert!(bernstein(3, 2, 0.5).is_err());
        assert!(bernstein(0, 31, 0.5).is_err());
        assert!(bernstein(0, 2, 1.5).is_err());
    }

    #[test]
    fn binomials_exact_up_to_cap() {
        // Pascal's rule as oracle
        let mut row = vec![1.0f64];
        for n in 1..=MAX_DEGREE {
            let mut next = vec![1.0; n + 1];
            for k in 1..n {
                next[k] = row[k - 1] + row[k];
            }
            row = next;
            for (k, want) in row.iter().enumerate() {
                assert_eq!(binomial(n, k), *want, "C({n},{k})");
            }
        }
    }

    #[test]
    fn derivative_of_quadratic() {
        let c = BezierCurve::scalar(&[0.0, 1.0, 0.0]).unwrap();
        let dc = c.derivative();
        assert_eq!(dc.control_points(), &[vec![2.0], vec![-2.0]]);
        let dd = dc.derivative();
        assert_eq!(dd.control_points(), &[vec![-4.0]]);
        assert_eq!(dd.derivative().control_points(), &[vec![0.0]]);
    }

    #[test]
    fn derivative_matrix_matches_repeated_differencing() {
        let c = BezierCurve::scalar(&[1.0, -2.0, 0.5, 3.0, 4.0]).unwrap();
        for l in 0..=4 {
            let m = derivative_matrix(4, l).unwrap();
            let mut want = c.clone();
            for _ in 0..l {
                want = want.derivative();
            }
            for (row, w) in m.iter().zip(want.control_points()) {
                let got: f64 = row.iter().zip(c.control_points()).map(|(a, p)| a * p[0]).sum();
                assert!((got - w[0]).abs() < 1e-12);
            }
        }
        assert!(derivative_matrix(2, 3).is_err());
    }

    #[test]
    fn integral_bound_of_square() {
        // γ(s) = s, f = x²: exact integral 1/3, bound 1/2
        let c = BezierCurve::scalar(&[0.0, 1.0]).unwrap();
        let b = c.convex_integral_bound(|p| p[0] * p[0]);
        assert_eq!(b, 0.5);
    }

    fn arb_curve() -> impl Strategy<Value = BezierCurve> {
        (0usize..8, 1usize..4).prop_flat_map(|(d, n)| {
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), d + 1)
                .prop_map(|p| BezierCurve::new(p).unwrap())
        })
    }

    proptest! {
        #[test]
        fn partition_of_unity(d in 0usize..=MAX_DEGREE, s in 0.0..=1.0f64) {
            let total: f64 = (0..=d).map(|k| bernstein(k, d, s).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for k in 0..=d {
                prop_assert!(bernstein(k, d, s).unwrap() >= 0.0);
            }
        }

        #[test]
        fn evaluate_matches_de_casteljau(c in arb_curve(), s in 0.0..=1.0f64) {
            for (a, b) in c.evaluate(s).iter().zip(c.de_casteljau(s)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn endpoints_interpolate(c in arb_curve()) {
            prop_assert_eq!(&c.evaluate(0.0), &c.control_points()[0]);
            prop_assert_eq!(&c.evaluate(1.0), c.control_points().last().unwrap());
        }

        #[test]
        fn inside_control_hull_box(c in arb_curve(), s in 0.0..=1.0f64) {
            let v = c.evaluate(s);
            for j in 0..c.dim() {
                let lo = c.control_points().iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
                let hi = c.control_points().iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v[j] >= lo - 1e-9 && v[j] <= hi + 1e-9);
            }
        }

        #[test]
        fn derivative_matches_finite_difference(c in arb_curve(), s in 0.05..0.95f64) {
            let h = 1e-6;
            let dc = c.derivative().evaluate(s);
            let (a, b) = (c.evaluate(s + h), c.evaluate(s - h));
            for j in 0..c.dim() {
                let fd = (a[j] - b[j]) / (2.0 * h);
                prop_assert!((dc[j] - fd).abs() < 1e-4 * (1.0 + fd.abs()));
            }
        }

        #[test]
        fn elevation_preserves_curve(c in arb_curve(), extra in 0usize..4, s in 0.0..=1.0f64) {
            let e = c.elevate_degree(c.degree() + extra).unwrap();
            prop_assert_eq!(e.degree(), c.degree() + extra);
            for (a, b) in c.evaluate(s).iter().zip(e.evaluate(s)) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn integral_bound_dominates_quadrature(c in arb_curve()) {
            let f = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>();
            // composite Simpson with 200 panels
            let n = 200;
            let mut q = 0.0;
            for i in 0..=n {
                let s = i as f64 / n as f64;
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                q += w * f(&c.evaluate(s));
            }
            q /= 3.0 * n as f64;
            prop_assert!(c.convex_integral_bound(f) >= q - 1e-6 * (1.0 + q));
        }
    }
}
