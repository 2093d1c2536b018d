//! Piecewise-linear convex functions built as lower convex hulls of sampled
//! data. The hull is stored as a set of supporting affine pieces, so the hull
//! function is the pointwise max of the pieces.

use alloc::vec::Vec;

use crate::convex::poly::GEOM_TOL;
use crate::Point;

/// One sampled evaluation of a convex function.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplePoint {
    pub point: Point,
    pub value: f64,
}

impl SamplePoint {
    pub fn new(point: Point, value: f64) -> Self {
        SamplePoint { point, value }
    }
}

/// A supporting affine piece `x -> <slope, x> + intercept`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HullPiece {
    pub slope: Point,
    pub intercept: f64,
}

impl HullPiece {
    pub fn eval(&self, x: &Point) -> f64 {
        self.slope[0] * x[0] + self.slope[1] * x[1] + self.intercept
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundingBox {
    pub lo: Point,
    pub hi: Point,
}

impl BoundingBox {
    pub fn contains(&self, dim: usize, p: &Point, tol: f64) -> bool {
        (0..dim).all(|i| p[i] >= self.lo[i] - tol && p[i] <= self.hi[i] + tol)
    }

    fn from_points(dim: usize, pts: &[Point]) -> Self {
        let mut lo = [f64::INFINITY, f64::INFINITY];
        let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in pts {
            for i in 0..dim {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        for i in dim..2 {
            lo[i] = 0.0;
            hi[i] = 0.0;
        }
        BoundingBox { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexError {
    /// Input points are affinely dependent; no full-dimensional lower hull.
    Degenerate,
    /// Evaluation point lies outside the declared bounding box.
    OutOfDomain,
    /// A polytope passed as a flat is not actually a flat of the function.
    NotAFlat,
    /// Fewer than d+1 samples.
    TooFewSamples,
}

impl core::fmt::Display for ConvexError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ConvexError::Degenerate => write!(f, "samples are affinely dependent"),
            ConvexError::OutOfDomain => write!(f, "point outside the bounding box"),
            ConvexError::NotAFlat => write!(f, "polytope is not a flat of the function"),
            ConvexError::TooFewSamples => write!(f, "need at least d+1 samples"),
        }
    }
}

/// A sampled convex function together with its lower convex hull.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PLConvexFunction {
    pub dim: usize,
    pub samples: Vec<SamplePoint>,
    pub hull: Vec<HullPiece>,
    #[cfg_attr(feature = "serde", serde(rename = "box"))]
    pub bbox: BoundingBox,
    /// Set when a Fenchel transform clipped part of the slope range.
    #[cfg_attr(feature = "serde", serde(default))]
    pub truncated: bool,
}

/// Slope-space tie tolerance used when collecting active pieces and exposed
/// faces.
pub const ACTIVE_TOL: f64 = 1e-9;

/// Lower convex hull of sampled data.
pub fn convexify(samples: &[SamplePoint], dim: usize) -> Result<PLConvexFunction, ConvexError> {
    assert!(dim == 1 || dim == 2);
    if samples.len() < dim + 1 {
        return Err(ConvexError::TooFewSamples);
    }
    let hull = match dim {
        1 => lower_hull_1d(samples)?,
        _ => lower_hull_2d(samples)?,
    };
    let pts: Vec<Point> = samples.iter().map(|s| s.point).collect();
    Ok(PLConvexFunction {
        dim,
        samples: samples.to_vec(),
        hull,
        bbox: BoundingBox::from_points(dim, &pts),
        truncated: false,
    })
}

impl PLConvexFunction {
    /// Hull evaluation: max of the supporting pieces.
    pub fn eval(&self, x: &Point) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for p in &self.hull {
            best = best.max(p.eval(x));
        }
        best
    }

    /// Samples lying on the hull (within `tol` of their hull evaluation).
    pub fn hull_vertices(&self, tol: f64) -> Vec<SamplePoint> {
        self.samples
            .iter()
            .filter(|s| s.value <= self.eval(&s.point) + tol)
            .cloned()
            .collect()
    }

    /// Pieces active at `x` within the standard tie window.
    pub fn active_pieces(&self, x: &Point) -> Vec<&HullPiece> {
        let v = self.eval(x);
        let scale = 1.0 + v.abs();
        self.hull.iter().filter(|p| p.eval(x) >= v - ACTIVE_TOL * scale).collect()
    }
}

fn lower_hull_1d(samples: &[SamplePoint]) -> Result<Vec<HullPiece>, ConvexError> {
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.point[0], s.value)).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    // Coincident abscissas keep the lowest value.
    let mut dedup: Vec<(f64, f64)> = Vec::new();
    for (x, v) in pts {
        match dedup.last() {
            Some(&(lx, _)) if (x - lx).abs() <= GEOM_TOL => {}
            _ => dedup.push((x, v)),
        }
    }
    if dedup.len() < 2 {
        return Err(ConvexError::Degenerate);
    }
    // Monotone lower chain in the (x, value) plane.
    let mut chain: Vec<(f64, f64)> = Vec::new();
    for p in dedup {
        while chain.len() >= 2 {
            let a = chain[chain.len() - 2];
            let b = chain[chain.len() - 1];
            let turn = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if turn <= 0.0 {
                chain.pop();
            } else {
                break;
            }
        }
        chain.push(p);
    }
    let mut pieces = Vec::with_capacity(chain.len() - 1);
    for w in chain.windows(2) {
        let (x0, v0) = w[0];
        let (x1, v1) = w[1];
        let slope = (v1 - v0) / (x1 - x0);
        pieces.push(HullPiece { slope: [slope, 0.0], intercept: v0 - slope * x0 });
    }
    Ok(pieces)
}

fn lower_hull_2d(samples: &[SamplePoint]) -> Result<Vec<HullPiece>, ConvexError> {
    let n = samples.len();
    let mut scale_v = 0.0f64;
    let mut scale_x = 0.0f64;
    for s in samples {
        scale_v = scale_v.max(s.value.abs());
        scale_x = scale_x.max(s.point[0].abs()).max(s.point[1].abs());
    }
    let support_tol = ACTIVE_TOL * (1.0 + scale_v + scale_x);
    let mut pieces: Vec<HullPiece> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let (a, b, c) = (&samples[i], &samples[j], &samples[k]);
                let ux = b.point[0] - a.point[0];
                let uy = b.point[1] - a.point[1];
                let vx = c.point[0] - a.point[0];
                let vy = c.point[1] - a.point[1];
                let det = ux * vy - uy * vx;
                if det.abs() <= 1e-12 * (1.0 + scale_x * scale_x) {
                    continue;
                }
                let du = b.value - a.value;
                let dv = c.value - a.value;
                let gx = (du * vy - dv * uy) / det;
                let gy = (ux * dv - vx * du) / det;
                let intercept = a.value - gx * a.point[0] - gy * a.point[1];
                let mut supporting = true;
                for s in samples {
                    if s.value < gx * s.point[0] + gy * s.point[1] + intercept - support_tol {
                        supporting = false;
                        break;
                    }
                }
                if supporting {
                    let piece = HullPiece { slope: [gx, gy], intercept };
                    let dup = pieces.iter().any(|p| {
                        (p.slope[0] - gx).abs() <= 1e-9
                            && (p.slope[1] - gy).abs() <= 1e-9
                            && (p.intercept - intercept).abs() <= 1e-9 * (1.0 + scale_v)
                    });
                    if !dup {
                        pieces.push(piece);
                    }
                }
            }
        }
    }
    if pieces.is_empty() {
        return Err(ConvexError::Degenerate);
    }
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64, v: f64) -> SamplePoint {
        SamplePoint::new([x, 0.0], v)
    }

    fn s2(x: f64, y: f64, v: f64) -> SamplePoint {
        SamplePoint::new([x, y], v)
    }

    #[test]
    fn abs_value_hull() {
        let f = convexify(&[s(-1.0, 1.0), s(0.0, 0.0), s(1.0, 1.0)], 1).unwrap();
        assert_eq!(f.hull.len(), 2);
        let mut slopes: Vec<f64> = f.hull.iter().map(|p| p.slope[0]).collect();
        slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(slopes, alloc::vec![-1.0, 1.0]);
        assert_eq!(f.hull_vertices(1e-12).len(), 3);
    }

    #[test]
    fn dominated_middle_point() {
        let f = convexify(&[s(-1.0, 0.0), s(0.0, 1.0), s(1.0, 0.0)], 1).unwrap();
        assert_eq!(f.hull.len(), 1);
        assert_eq!(f.hull[0].slope[0], 0.0);
        assert_eq!(f.hull[0].intercept, 0.0);
        // (0,1) is strictly above the hull.
        assert_eq!(f.hull_vertices(1e-12).len(), 2);
        assert!(f.eval(&[0.0, 0.0]) < 1.0);
    }

    #[test]
    fn degenerate_input_rejected() {
        let r = convexify(&[s(1.0, 0.0), s(1.0, 2.0), s(1.0, 3.0)], 1);
        assert_eq!(r, Err(ConvexError::Degenerate));
        let r2 = convexify(
            &[s2(0.0, 0.0, 0.0), s2(1.0, 1.0, 0.5), s2(2.0, 2.0, 1.0)],
            2,
        );
        assert_eq!(r2, Err(ConvexError::Degenerate));
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(convexify(&[s(0.0, 0.0)], 1), Err(ConvexError::TooFewSamples));
    }

    #[test]
    fn max_norm_2d() {
        // max(0, |x|_inf - 1) sampled on a 5x5 grid over [-2,2]^2.
        let mut samples = Vec::new();
        for i in -2..=2 {
            for j in -2..=2 {
                let (x, y) = (i as f64, j as f64);
                let v = (x.abs().max(y.abs()) - 1.0).max(0.0);
                samples.push(s2(x, y, v));
            }
        }
        let f = convexify(&samples, 2).unwrap();
        assert!((f.eval(&[0.0, 0.0]) - 0.0).abs() < 1e-12);
        assert!((f.eval(&[2.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((f.eval(&[1.5, 1.5]) - 0.5).abs() < 1e-12);
        // Every sample sits on or above the hull.
        for sp in &f.samples {
            assert!(sp.value >= f.eval(&sp.point) - 1e-12);
        }
    }
}
