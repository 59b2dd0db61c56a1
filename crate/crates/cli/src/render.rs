//! SVG 1.1 rendering of 2D instances.

use std::fmt::Write;

use gcs_core::geometry::ConvexSet;
use gcs_core::planner::{PlanningProblem, Trajectory};
use gcs_core::{Error, Result};

/// Samples drawn per trajectory segment.
pub const SAMPLES_PER_SEGMENT: usize = 128;

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 20.0;
/// Half-width of the square clipped against unbounded polytopes.
const FAR: f64 = 1e3;

type Polygon = Vec<[f64; 2]>;

/// Sutherland-Hodgman clip of `poly` against `a · p <= b`.
fn clip(poly: &Polygon, a: &[f64], b: f64) -> Polygon {
    let side = |p: &[f64; 2]| a[0] * p[0] + a[1] * p[1] - b;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sp, sq) = (side(&p), side(&q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Vertices of a 2D polytope in boundary order.
pub fn polygon(set: &ConvexSet) -> Polygon {
    let (lo, hi) = match set.bounds() {
        Some(b) => ([b.lo[0], b.lo[1]], [b.hi[0], b.hi[1]]),
        None => ([-FAR, -FAR], [FAR, FAR]),
    };
    let mut poly = vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let h = set.halfspaces();
    for i in 0..h.rows() {
        poly = clip(&poly, h.row(i), h.b[i]);
    }
    poly
}

struct View {
    lo: [f64; 2],
    scale: f64,
    height: f64,
}

impl View {
    fn fit(points: impl Iterator<Item = [f64; 2]>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for j in 0..2 {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        let scale = (CANVAS - 2.0 * MARGIN) / span;
        Self {
            lo,
            scale,
            height: (hi[1] - lo[1]) * scale + 2.0 * MARGIN,
        }
    }

    fn width(&self, hi_x: f64) -> f64 {
        (hi_x - self.lo[0]) * self.scale + 2.0 * MARGIN
    }

    /// World to canvas; the y axis points up in the world.
    fn map(&self, p: &[f64]) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.lo[0]) * self.scale,
            self.height - MARGIN - (p[1] - self.lo[1]) * self.scale,
        )
    }
}

/// Regions as rects or polygons, the trajectory as one polyline and its
/// control points as circles.
pub fn render_svg(problem: &PlanningProblem, trajectory: Option<&Trajectory>) -> Result<String> {
    if problem.spec.dim() != 2 || problem.regions.iter().any(|r| r.dim() != 2) {
        return Err(Error::InvalidArgument(format!(
            "render supports 2D instances only, got dimension {}",
            problem.spec.dim()
        )));
    }
    if let Some(t) = trajectory {
        if t.dim() != 2 {
            return Err(Error::InvalidArgument("render supports 2D trajectories only".into()));
        }
    }
    let polys: Vec<Polygon> = problem.regions.iter().map(polygon).collect();
    let mut extent: Vec<[f64; 2]> = polys.iter().flatten().copied().collect();
    extent.push([problem.spec.q0[0], problem.spec.q0[1]]);
    extent.push([problem.spec.qt[0], problem.spec.qt[1]]);
    let curve: Vec<Vec<f64>> = trajectory
        .map(|t| {
            let n = SAMPLES_PER_SEGMENT;
            let segments = t.segments().len();
            (0..=segments * n).map(|i| t.path_point(i as f64 / n as f64)).collect()
        })
        .unwrap_or_default();
    extent.extend(curve.iter().map(|p| [p[0], p[1]]));
    let view = View::fit(extent.iter().copied());
    let hi_x = extent.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);

    let mut svg = String::new();
    let w = view.width(hi_x);
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#,
        h = view.height
    );
    let _ = writeln!(svg, r##"<g class="regions" fill="#cde6f7" fill-opacity="0.6" stroke="#5a8fb8" stroke-width="1">"##);
    for (set, poly) in problem.regions.iter().zip(&polys) {
        match set {
            ConvexSet::Box(b) => {
                let (x0, y1) = view.map(&b.lo);
                let (x1, y0) = view.map(&b.hi);
                let _ = writeln!(
                    svg,
                    r#"<rect x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}"/>"#,
                    x1 - x0,
                    y1 - y0
                );
            }
            _ if poly.len() >= 3 => {
                let pts: Vec<String> = poly
                    .iter()
                    .map(|p| {
                        let (x, y) = view.map(p);
                        format!("{x:.3},{y:.3}")
                    })
                    .collect();
                let _ = writeln!(svg, r#"<polygon points="{}"/>"#, pts.join(" "));
            }
            _ => {}
        }
    }
    let _ = writeln!(svg, "</g>");
    if let Some(t) = trajectory {
        let pts: Vec<String> = curve
            .iter()
            .map(|p| {
                let (x, y) = view.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline class="trajectory" fill="none" stroke="#c0392b" stroke-width="2" points="{}"/>"##,
            pts.join(" ")
        );
        let _ = writeln!(svg, r##"<g class="control-points" fill="#2c3e50">"##);
        for seg in t.segments() {
            for p in seg.r.control_points() {
                let (x, y) = view.map(p);
                let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2.5"/>"#);
            }
        }
        let _ = writeln!(svg, "</g>");
    }
    for (q, colour) in [(&problem.spec.q0, "#27ae60"), (&problem.spec.qt, "#8e44ad")] {
        let (x, y) = view.map(q);
        let _ = writeln!(svg, r#"<circle class="endpoint" cx="{x:.3}" cy="{y:.3}" r="5" fill="{colour}"/>"#);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gcs_core::environments::fixture_2d;

    #[test]
    fn clipping_a_square_by_a_diagonal_leaves_a_triangle() {
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tri = clip(&sq, &[1.0, 1.0], 1.0);
        assert_eq!(tri.len(), 3);
        let area: f64 = (0..tri.len())
            .map(|i| {
                let (p, q) = (tri[i], tri[(i + 1) % tri.len()]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
            / 2.0;
        assert!((area.abs() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fixture_regions_render_as_polygons() {
        let svg = render_svg(&fixture_2d(), None).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 4);
    }

    #[test]
    fn three_dimensional_instances_are_refused() {
        let p = gcs_core::environments::generate_building(0).problem();
        let err = render_svg(&p, None).unwrap_err();
        assert!(err.to_string().contains("2D"));
    }
}
