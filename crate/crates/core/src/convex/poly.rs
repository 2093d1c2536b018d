//! Small polytopes in dimension 1 and 2, stored as ordered vertex lists.
//!
//! A polytope is a point, a segment, or a convex polygon with vertices in
//! counterclockwise order. Intersections are computed by collecting candidate
//! vertices (mutual containment plus edge crossings) and re-hulling, which is
//! robust for the degenerate point/segment cases that show up constantly when
//! intersecting subdifferentials.

use alloc::vec::Vec;

use crate::Point;

/// Vertex identification tolerance shared by the polytope predicates.
pub const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Polytope {
    /// Ambient dimension (1 or 2).
    pub dim: usize,
    /// Extreme points. Empty for the empty set, one point, two segment
    /// endpoints, or a counterclockwise polygon.
    pub vertices: Vec<Point>,
}

fn dist(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    libm::sqrt(dx * dx + dy * dy)
}

fn cross(o: &Point, a: &Point, b: &Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl Polytope {
    pub fn empty(dim: usize) -> Self {
        Polytope { dim, vertices: Vec::new() }
    }

    pub fn point(dim: usize, p: Point) -> Self {
        Polytope { dim, vertices: alloc::vec![p] }
    }

    /// Convex hull of an arbitrary point set.
    pub fn from_points(dim: usize, points: &[Point]) -> Self {
        assert!(dim == 1 || dim == 2, "only d in {{1,2}} supported");
        if points.is_empty() {
            return Self::empty(dim);
        }
        if dim == 1 {
            let mut lo = points[0][0];
            let mut hi = points[0][0];
            for p in points {
                lo = lo.min(p[0]);
                hi = hi.max(p[0]);
            }
            if hi - lo <= GEOM_TOL {
                return Self::point(1, [0.5 * (lo + hi), 0.0]);
            }
            return Polytope { dim: 1, vertices: alloc::vec![[lo, 0.0], [hi, 0.0]] };
        }
        hull2d(points)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Dimension of the affine hull (0 for a point, 1 for a segment, 2 for a
    /// polygon); -1 is represented as None for the empty set.
    pub fn affine_dim(&self) -> Option<usize> {
        match self.vertices.len() {
            0 => None,
            1 => Some(0),
            2 => Some(1),
            _ => Some(2),
        }
    }

    pub fn barycenter(&self) -> Option<Point> {
        if self.vertices.is_empty() {
            return None;
        }
        let n = self.vertices.len() as f64;
        let mut c = [0.0, 0.0];
        for v in &self.vertices {
            c[0] += v[0];
            c[1] += v[1];
        }
        Some([c[0] / n, c[1] / n])
    }

    /// Membership test with tolerance `tol` (absolute, in coordinate units).
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        match self.vertices.len() {
            0 => false,
            1 => {
                if self.dim == 1 {
                    (p[0] - self.vertices[0][0]).abs() <= tol
                } else {
                    dist(p, &self.vertices[0]) <= tol
                }
            }
            2 => point_segment_dist(p, &self.vertices[0], &self.vertices[1]) <= tol,
            n => {
                for i in 0..n {
                    let a = &self.vertices[i];
                    let b = &self.vertices[(i + 1) % n];
                    let e = dist(a, b).max(1e-30);
                    if cross(a, b, p) < -tol * e {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// True when `p` lies in the relative interior of the polytope, with
    /// boundary band `tol`.
    pub fn contains_in_relative_interior(&self, p: &Point, tol: f64) -> bool {
        match self.vertices.len() {
            0 => false,
            1 => self.contains(p, tol),
            2 => {
                let (a, b) = (&self.vertices[0], &self.vertices[1]);
                if point_segment_dist(p, a, b) > tol {
                    return false;
                }
                dist(p, a) > tol && dist(p, b) > tol
            }
            n => {
                for i in 0..n {
                    let a = &self.vertices[i];
                    let b = &self.vertices[(i + 1) % n];
                    let e = dist(a, b).max(1e-30);
                    if cross(a, b, p) <= tol * e {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Every vertex of `self` lies in `other` (the polytope containment test
    /// used by the lemma checks).
    pub fn subset_of(&self, other: &Polytope, tol: f64) -> bool {
        self.vertices.iter().all(|v| other.contains(v, tol))
    }

    pub fn approx_eq(&self, other: &Polytope, tol: f64) -> bool {
        self.subset_of(other, tol) && other.subset_of(self, tol)
    }

    /// Intersection of two convex polytopes.
    ///
    /// Candidates: vertices of either operand contained in the other, plus all
    /// pairwise edge intersection points; the result is their hull.
    pub fn intersect(&self, other: &Polytope, tol: f64) -> Polytope {
        assert_eq!(self.dim, other.dim);
        if self.is_empty() || other.is_empty() {
            return Polytope::empty(self.dim);
        }
        let mut candidates: Vec<Point> = Vec::new();
        for v in &self.vertices {
            if other.contains(v, tol) {
                candidates.push(*v);
            }
        }
        for v in &other.vertices {
            if self.contains(v, tol) {
                candidates.push(*v);
            }
        }
        if self.dim == 2 {
            for (a, b) in edges(&self.vertices) {
                for (c, d) in edges(&other.vertices) {
                    if let Some(p) = segment_intersection(&a, &b, &c, &d) {
                        if self.contains(&p, tol) && other.contains(&p, tol) {
                            candidates.push(p);
                        }
                    }
                }
            }
        }
        Polytope::from_points(self.dim, &candidates)
    }
}

fn edges(vertices: &[Point]) -> Vec<(Point, Point)> {
    match vertices.len() {
        0 | 1 => Vec::new(),
        2 => alloc::vec![(vertices[0], vertices[1])],
        n => (0..n).map(|i| (vertices[i], vertices[(i + 1) % n])).collect(),
    }
}

fn point_segment_dist(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 <= 1e-30 {
        return dist(p, a);
    }
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    dist(p, &q)
}

/// Proper intersection point of segments [a,b] and [c,d], if the supporting
/// lines are not parallel. Containment is re-checked by the caller.
fn segment_intersection(a: &Point, b: &Point, c: &Point, d: &Point) -> Option<Point> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    let scale = (r[0].abs() + r[1].abs()) * (s[0].abs() + s[1].abs());
    if denom.abs() <= 1e-14 * scale.max(1e-30) {
        return None;
    }
    let qp = [c[0] - a[0], c[1] - a[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / denom;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / denom;
    let slack = 1e-9;
    if !(-slack..=1.0 + slack).contains(&t) || !(-slack..=1.0 + slack).contains(&u) {
        return None;
    }
    Some([a[0] + t * r[0], a[1] + t * r[1]])
}

/// Monotone-chain hull returning extreme points in counterclockwise order.
/// Collinear configurations collapse to a segment, coincident points to a
/// single point.
fn hull2d(points: &[Point]) -> Polytope {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    pts.dedup_by(|a, b| dist(a, b) <= GEOM_TOL);
    if pts.len() == 1 {
        return Polytope { dim: 2, vertices: pts };
    }
    // Area tolerance relative to the data spread.
    let mut spread = 0.0f64;
    for p in &pts {
        for q in &pts {
            spread = spread.max(dist(p, q));
        }
    }
    let area_tol = GEOM_TOL * spread.max(1e-30);
    let turn = |o: &Point, a: &Point, b: &Point| cross(o, a, b);

    let mut lower: Vec<Point> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= area_tol * spread
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= area_tol * spread
        {
            upper.pop();
        }
        upper.push(*p);
    }
    let mut hull = lower;
    hull.pop();
    upper.pop();
    hull.extend(upper);
    if hull.len() == 2 && dist(&hull[0], &hull[1]) <= GEOM_TOL {
        hull.pop();
    }
    Polytope { dim: 2, vertices: hull }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_point() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let p = Polytope::from_points(2, &pts);
        assert_eq!(p.vertices.len(), 4);
        assert!(p.contains(&[0.5, 0.5], 1e-9));
        assert!(p.contains_in_relative_interior(&[0.5, 0.5], 1e-9));
        assert!(!p.contains_in_relative_interior(&[1.0, 0.5], 1e-9));
        assert!(!p.contains(&[1.1, 0.5], 1e-9));
    }

    #[test]
    fn collinear_points_collapse_to_segment() {
        let pts = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]];
        let p = Polytope::from_points(2, &pts);
        assert_eq!(p.affine_dim(), Some(1));
        assert!(p.contains(&[0.25, 0.25], 1e-9));
        assert!(!p.contains(&[0.25, 0.3], 1e-9));
    }

    #[test]
    fn interval_hull_in_d1() {
        let pts = [[0.3, 0.0], [-1.0, 0.0], [0.7, 0.0]];
        let p = Polytope::from_points(1, &pts);
        assert_eq!(p.vertices, alloc::vec![[-1.0, 0.0], [0.7, 0.0]]);
    }

    #[test]
    fn intersect_squares() {
        let a = Polytope::from_points(2, &[[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
        let b = Polytope::from_points(2, &[[1.0, 1.0], [3.0, 1.0], [3.0, 3.0], [1.0, 3.0]]);
        let c = a.intersect(&b, 1e-9);
        let expect = Polytope::from_points(2, &[[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]);
        assert!(c.approx_eq(&expect, 1e-9));
    }

    #[test]
    fn intersect_polygon_with_segment() {
        let a = Polytope::from_points(2, &[[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
        let s = Polytope { dim: 2, vertices: alloc::vec![[-1.0, 1.0], [5.0, 1.0]] };
        let c = a.intersect(&s, 1e-9);
        let expect = Polytope { dim: 2, vertices: alloc::vec![[0.0, 1.0], [2.0, 1.0]] };
        assert!(c.approx_eq(&expect, 1e-9));
    }

    #[test]
    fn intersect_disjoint_is_empty() {
        let a = Polytope::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let b = Polytope::from_points(2, &[[5.0, 5.0], [6.0, 5.0], [5.0, 6.0]]);
        assert!(a.intersect(&b, 1e-9).is_empty());
    }
}
