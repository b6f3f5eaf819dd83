//! Closed-form boundaries of the symmetrized behavior sets in the `(X, Y)`
//! slice and membership tests against them.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{check_overlap, make_preparation, slice_coords, symmetrize_t, Behavior};

/// Samples per analytic arc when building hulls.
pub const ARC_SAMPLES: usize = 4096;
/// Points within this distance of a region count as inside.
pub const CONTAINMENT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointSource {
    Ellipse,
    VertexSegment,
    P3Curve,
    Trivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub source: PointSource,
}

impl BoundaryPoint {
    fn new(x: f64, y: f64, source: PointSource) -> Self {
        Self { x, y, source }
    }

    fn origin() -> Self {
        Self::new(0.0, 0.0, PointSource::Trivial)
    }
}

fn cross(o: &BoundaryPoint, a: &BoundaryPoint, b: &BoundaryPoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise hull with collinear points dropped (Andrew's monotone chain).
fn convex_hull(mut pts: Vec<BoundaryPoint>) -> Vec<BoundaryPoint> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (a.x - b.x).abs() < 1e-15 && (a.y - b.y).abs() < 1e-15);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<BoundaryPoint> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &BoundaryPoint>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 1e-18
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn point_segment_distance(px: f64, py: f64, a: &BoundaryPoint, b: &BoundaryPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((px - a.x) * dx + (py - a.y) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.x + t * dx, a.y + t * dy);
    ((px - qx).powi(2) + (py - qy).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Polygon,
    /// Hull collapsed to a point or a segment.
    Degenerate,
}

/// Convex polygon in the slice, stored as a counter-clockwise vertex list.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRegion2D {
    vertices: Vec<BoundaryPoint>,
    shape: Shape,
    tol: f64,
}

impl ConvexRegion2D {
    pub fn from_points(points: Vec<BoundaryPoint>) -> Self {
        let hull = convex_hull(points);
        let shape = if hull.len() >= 3 { Shape::Polygon } else { Shape::Degenerate };
        Self { vertices: hull, shape, tol: CONTAINMENT_TOL }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn vertices(&self) -> &[BoundaryPoint] {
        &self.vertices
    }

    pub fn is_degenerate(&self) -> bool {
        self.shape == Shape::Degenerate
    }

    /// Distance to the boundary, negative inside.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let v = &self.vertices;
        match self.shape {
            Shape::Degenerate => match v.len() {
                0 => f64::INFINITY,
                1 => ((x - v[0].x).powi(2) + (y - v[0].y).powi(2)).sqrt(),
                _ => point_segment_distance(x, y, &v[0], &v[1]),
            },
            Shape::Polygon => {
                let p = BoundaryPoint::new(x, y, PointSource::Trivial);
                let n = v.len();
                let mut outside = false;
                let mut dist = f64::INFINITY;
                for i in 0..n {
                    let (a, b) = (&v[i], &v[(i + 1) % n]);
                    if cross(a, b, &p) < 0.0 {
                        outside = true;
                    }
                    dist = dist.min(point_segment_distance(x, y, a, b));
                }
                if outside {
                    dist
                } else {
                    -dist
                }
            }
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.signed_distance(x, y) <= self.tol
    }

    /// True when every turn of the closed polyline has the same orientation.
    pub fn is_convex(&self) -> bool {
        is_convex_polyline(&self.vertices)
    }

    /// Polyline as CSV with header `X,Y,source`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.vertices {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a polyline written by [`write_csv`](Self::write_csv), rejecting
    /// non-convex input.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let pts = r.deserialize().collect::<std::result::Result<Vec<BoundaryPoint>, _>>()?;
        if !is_convex_polyline(&pts) {
            return Err(Error::Parse("polyline is not convex".into()));
        }
        let shape = if pts.len() >= 3 { Shape::Polygon } else { Shape::Degenerate };
        Ok(Self { vertices: pts, shape, tol: CONTAINMENT_TOL })
    }
}

fn is_convex_polyline(v: &[BoundaryPoint]) -> bool {
    if v.len() < 3 {
        return true;
    }
    let n = v.len();
    let turns: Vec<f64> = (0..n).map(|i| cross(&v[i], &v[(i + 1) % n], &v[(i + 2) % n])).collect();
    turns.iter().all(|&c| c >= -1e-15) || turns.iter().all(|&c| c <= 1e-15)
}

/// Slice point of the two-outcome strategy `{0, K₁, 𝕀−K₁}` whose projector
/// has Bloch vector `u = (sin α, 0, cos α)`.
pub fn p2_ellipse_point(delta: f64, alpha: f64) -> Result<BoundaryPoint> {
    check_overlap(delta)?;
    if delta == 0.0 || delta == 1.0 {
        return Err(Error::Degenerate(format!(
            "the ellipse degenerates at overlap {delta}; use p2_region"
        )));
    }
    let prep = make_preparation(delta)?;
    let u = [alpha.sin(), 0.0, alpha.cos()];
    let dot = |n: [f64; 3]| n[0] * u[0] + n[1] * u[1] + n[2] * u[2];
    Ok(BoundaryPoint::new(
        0.25 * (1.0 + dot(prep.bloch(1))),
        0.25 * (1.0 + dot(prep.bloch(0))),
        PointSource::Ellipse,
    ))
}

/// `4(X+Y−½)²/δ² + 4(X−Y)²/(1−δ²)`, equal to 1 on the ellipse.
pub fn ellipse_form(delta: f64, x: f64, y: f64) -> f64 {
    4.0 * (x + y - 0.5).powi(2) / (delta * delta) + 4.0 * (x - y).powi(2) / (1.0 - delta * delta)
}

/// Endpoints of the `X + Y = 1` edge, ordered by increasing `X`.
pub fn p2_vertices(delta: f64) -> Result<(BoundaryPoint, BoundaryPoint)> {
    check_overlap(delta)?;
    let r = (1.0 - delta * delta).sqrt();
    Ok((
        BoundaryPoint::new(0.5 * (1.0 - r), 0.5 * (1.0 + r), PointSource::VertexSegment),
        BoundaryPoint::new(0.5 * (1.0 + r), 0.5 * (1.0 - r), PointSource::VertexSegment),
    ))
}

fn full_triangle() -> ConvexRegion2D {
    ConvexRegion2D::from_points(vec![
        BoundaryPoint::origin(),
        BoundaryPoint::new(1.0, 0.0, PointSource::VertexSegment),
        BoundaryPoint::new(0.0, 1.0, PointSource::VertexSegment),
    ])
}

fn trivial_segment() -> ConvexRegion2D {
    ConvexRegion2D::from_points(vec![
        BoundaryPoint::origin(),
        BoundaryPoint::new(0.5, 0.5, PointSource::Trivial),
    ])
}

/// Symmetrized two-outcome set in the slice.
pub fn p2_region(delta: f64) -> Result<ConvexRegion2D> {
    check_overlap(delta)?;
    if delta == 0.0 {
        return Ok(full_triangle());
    }
    if delta == 1.0 {
        return Ok(trivial_segment());
    }
    let (v0, v1) = p2_vertices(delta)?;
    let mut pts = vec![BoundaryPoint::origin(), v0, v1];
    for k in 0..ARC_SAMPLES {
        pts.push(p2_ellipse_point(delta, 2.0 * PI * k as f64 / ARC_SAMPLES as f64)?);
    }
    Ok(ConvexRegion2D::from_points(pts))
}

/// Slice point of the symmetric three-outcome family at angle `phi`.
pub fn p3_curve_point(delta: f64, phi: f64) -> Result<BoundaryPoint> {
    check_overlap(delta)?;
    if !(-FRAC_PI_2 - 1e-12..=FRAC_PI_2 + 1e-12).contains(&phi) {
        return Err(Error::Domain(format!("angle {phi} outside [-pi/2, pi/2]")));
    }
    let two_theta = 2.0 * make_preparation(delta)?.theta();
    let denom = 2.0 * (1.0 + phi.cos());
    Ok(BoundaryPoint::new(
        (1.0 - (phi - two_theta).cos()) / denom,
        (1.0 - (phi + two_theta).cos()) / denom,
        PointSource::P3Curve,
    ))
}

/// Symmetrized three-outcome set in the slice.
pub fn p3_region(delta: f64) -> Result<ConvexRegion2D> {
    check_overlap(delta)?;
    if delta == 1.0 {
        return Ok(trivial_segment());
    }
    let mut pts = vec![BoundaryPoint::origin()];
    for k in 0..=ARC_SAMPLES {
        let phi = -FRAC_PI_2 + PI * k as f64 / ARC_SAMPLES as f64;
        pts.push(p3_curve_point(delta, phi)?);
    }
    Ok(ConvexRegion2D::from_points(pts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SliceVerdict {
    #[serde(rename = "GENUINE_3_OUTCOME")]
    Genuine3Outcome,
    NotCertified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceCertificate {
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub verdict: SliceVerdict,
    /// Signed distance to the two-outcome region (positive outside).
    pub distance_p2: f64,
    /// The point is outside even the three-outcome region, so the overlap
    /// promise or the qubit model does not hold.
    pub not_in_p3: bool,
}

/// Test the symmetrized behavior against the two-outcome region.
pub fn certify_genuine3_slice(b: &Behavior, delta: f64) -> Result<SliceCertificate> {
    let s = slice_coords(&symmetrize_t(b));
    let p2 = p2_region(delta)?;
    let d2 = p2.signed_distance(s.x, s.y);
    let genuine = d2 > CONTAINMENT_TOL;
    let not_in_p3 = genuine && !p3_region(delta)?.contains(s.x, s.y);
    Ok(SliceCertificate {
        x: s.x,
        y: s.y,
        verdict: if genuine { SliceVerdict::Genuine3Outcome } else { SliceVerdict::NotCertified },
        distance_p2: d2,
        not_in_p3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipse_examples() {
        let d: f64 = 0.6;
        let top = p2_ellipse_point(d, 0.0).unwrap();
        assert!((top.x - 0.4).abs() < 1e-15 && (top.y - 0.4).abs() < 1e-15);
        let side = p2_ellipse_point(d, FRAC_PI_2).unwrap();
        assert!((side.x - 0.05).abs() < 1e-12 && (side.y - 0.45).abs() < 1e-12);
        for k in 0..100 {
            let p = p2_ellipse_point(d, 0.0628 * k as f64).unwrap();
            assert!((ellipse_form(d, p.x, p.y) - 1.0).abs() < 1e-12);
        }
        assert!(matches!(p2_ellipse_point(0.0, 0.1), Err(Error::Degenerate(_))));
        assert!(matches!(p2_ellipse_point(1.0, 0.1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn vertex_examples() {
        let (a, b) = p2_vertices(1.0).unwrap();
        assert_eq!((a.x, a.y, b.x, b.y), (0.5, 0.5, 0.5, 0.5));
        let (a, b) = p2_vertices(0.0).unwrap();
        assert_eq!((a.x, a.y, b.x, b.y), (0.0, 1.0, 1.0, 0.0));
        let (a, b) = p2_vertices(0.6).unwrap();
        assert!((a.x - 0.1).abs() < 1e-15 && (a.y - 0.9).abs() < 1e-15);
        assert!((b.x - 0.9).abs() < 1e-15 && (b.y - 0.1).abs() < 1e-15);
    }

    #[test]
    fn curve_examples() {
        let d = 0.7;
        let two_theta = f64::acos(d);
        let usd = p3_curve_point(d, -two_theta).unwrap();
        assert!((usd.x - 0.3).abs() < 1e-12 && usd.y.abs() < 1e-12);
        let mid = p3_curve_point(d, 0.0).unwrap();
        assert!((mid.x - 0.075).abs() < 1e-12 && (mid.y - 0.075).abs() < 1e-12);
        let mirror = p3_curve_point(d, two_theta).unwrap();
        assert!(mirror.x.abs() < 1e-12 && (mirror.y - 0.3).abs() < 1e-12);
        assert!(p3_curve_point(d, 2.0).is_err());
    }

    #[test]
    fn region_examples() {
        let seg = p2_region(1.0).unwrap();
        assert!(seg.is_degenerate());
        assert!(seg.contains(0.25, 0.25));
        assert!(!seg.contains(0.3, 0.2));
        let tri = p2_region(0.0).unwrap();
        assert_eq!(tri.vertices().len(), 3);
        assert!(tri.contains(1.0, 0.0) && tri.contains(0.2, 0.3));
        let r = p2_region(0.7).unwrap();
        assert!(r.is_convex());
        assert!(r.contains(0.42, 0.42));
        assert!(!r.contains(0.55, 0.05));
        assert!(p3_region(0.7).unwrap().contains(0.3, 0.0));
        assert!(!r.contains(0.3, 0.0));
    }

    #[test]
    fn slice_certificate_for_usd() {
        let c = certify_genuine3_slice(&Behavior::usd(0.7).unwrap(), 0.7).unwrap();
        assert_eq!(c.verdict, SliceVerdict::Genuine3Outcome);
        assert!(!c.not_in_p3);
        let u = certify_genuine3_slice(&Behavior::uniform(), 0.0).unwrap();
        assert_eq!(u.verdict, SliceVerdict::NotCertified);
    }

    #[test]
    fn csv_round_trip_and_rejection() {
        let r = p2_region(0.7).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("X,Y,source\n"));
        let back = ConvexRegion2D::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.vertices().len(), r.vertices().len());
        let bad = "X,Y,source\n0,0,trivial\n1,0,trivial\n0.2,0.2,trivial\n0,1,trivial\n";
        assert!(ConvexRegion2D::read_csv(bad.as_bytes()).is_err());
    }
}
