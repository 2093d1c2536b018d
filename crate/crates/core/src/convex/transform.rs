//! Fenchel transforms, subdifferentials, exposed faces, flats and radial
//! flats of PL convex functions.

use alloc::vec::Vec;

use crate::convex::function::{
    convexify, BoundingBox, ConvexError, PLConvexFunction, SamplePoint, ACTIVE_TOL,
};
use crate::convex::poly::Polytope;
use crate::Point;

/// Maximal interval of the half-line `{t h : t >= 0}` around `t = 1` on which
/// the function is affine.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadialFlatInterval {
    pub direction: Point,
    pub t_min: f64,
    pub t_max: f64,
}

/// Discrete Fenchel conjugate, sampled on a dual grid and convexified.
///
/// The dual sample set always includes the slopes of the hull pieces of `f`
/// (when they fall inside `dual_box`), so that the double transform
/// reproduces hull-vertex values exactly. Slopes outside the box set the
/// `truncated` flag on the result.
pub fn fenchel_transform(
    f: &PLConvexFunction,
    dual_box: BoundingBox,
    dual_step: f64,
) -> Result<PLConvexFunction, ConvexError> {
    assert!(dual_step > 0.0);
    let verts = f.hull_vertices(ACTIVE_TOL);
    // Exact hull slopes first: under tolerance dedup they win over nearby
    // grid points, and near-identical recovered slopes collapse instead of
    // seeding ill-conditioned hull triples downstream.
    let mut dual_points: Vec<Point> = Vec::new();
    let mut truncated = false;
    for p in &f.hull {
        if dual_box.contains(f.dim, &p.slope, 1e-12) {
            dual_points.push(p.slope);
        } else {
            truncated = true;
        }
    }
    if f.dim == 2 {
        cell_points(f, &verts, &dual_box, &mut dual_points);
    }
    let steps = |lo: f64, hi: f64| -> Vec<f64> {
        let n = libm::ceil((hi - lo) / dual_step - 1e-12) as usize;
        (0..=n).map(|i| (lo + i as f64 * dual_step).min(hi)).collect()
    };
    let xs = steps(dual_box.lo[0], dual_box.hi[0]);
    if f.dim == 1 {
        for x in &xs {
            dual_points.push([*x, 0.0]);
        }
    } else {
        let ys = steps(dual_box.lo[1], dual_box.hi[1]);
        for x in &xs {
            for y in &ys {
                dual_points.push([*x, *y]);
            }
        }
    }
    let mut scale = 0.0f64;
    for y in &dual_points {
        scale = scale.max(y[0].abs()).max(y[1].abs());
    }
    let merge_tol = 1e-9 * (1.0 + scale);
    let mut kept: Vec<Point> = Vec::with_capacity(dual_points.len());
    for y in dual_points {
        let dup = kept
            .iter()
            .any(|k| (k[0] - y[0]).abs() <= merge_tol && (k[1] - y[1]).abs() <= merge_tol);
        if !dup {
            kept.push(y);
        }
    }
    let dual_points = kept;
    let conj = |y: &Point| -> f64 {
        let mut best = f64::NEG_INFINITY;
        for v in &verts {
            best = best.max(y[0] * v.point[0] + y[1] * v.point[1] - v.value);
        }
        best
    };
    let samples: Vec<SamplePoint> =
        dual_points.iter().map(|y| SamplePoint::new(*y, conj(y))).collect();
    let mut g = convexify(&samples, f.dim)?;
    g.bbox = dual_box;
    g.truncated = truncated;
    Ok(g)
}

/// Extra dual samples inside each hull vertex's subdifferential cell.
///
/// A vertex reappears as a facet slope of the conjugate only when its cell
/// carries three noncollinear samples; domain-boundary vertices touch just
/// two facets, so their cells would otherwise stay empty and the double
/// transform would miss them. The centroid of the active-piece slopes lies
/// in the cell, and pushing it along any normal-cone direction of the
/// domain hull at the vertex stays in the cell for every step length.
fn cell_points(
    f: &PLConvexFunction,
    verts: &[SamplePoint],
    dual_box: &BoundingBox,
    dual_points: &mut Vec<Point>,
) {
    use core::f64::consts::{FRAC_PI_2, PI};
    let count = verts.len() as f64;
    let mut center: Point = [0.0, 0.0];
    for v in verts {
        center[0] += v.point[0] / count;
        center[1] += v.point[1] / count;
    }
    for v in verts {
        let active = f.active_pieces(&v.point);
        let slopes: Vec<Point> = active.iter().map(|p| p.slope).collect();
        let noncollinear = slopes.len() >= 3 && {
            let (a, b) = (&slopes[0], &slopes[1]);
            slopes.iter().any(|c| {
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                det.abs() > 1e-9
            })
        };
        if slopes.is_empty() || noncollinear {
            continue;
        }
        let n = slopes.len() as f64;
        let mut m: Point = [0.0, 0.0];
        for s in &slopes {
            m[0] += s[0] / n;
            m[1] += s[1] / n;
        }
        // Normal-cone arc of the domain hull at the vertex, as an angular
        // interval around the outward direction from the vertex centroid.
        let out = [v.point[0] - center[0], v.point[1] - center[1]];
        if out[0].abs() + out[1].abs() < 1e-12 {
            continue;
        }
        let reference = libm::atan2(out[1], out[0]);
        let mut lo = reference - FRAC_PI_2;
        let mut hi = reference + FRAC_PI_2;
        for w in verts {
            let a = [v.point[0] - w.point[0], v.point[1] - w.point[1]];
            if a[0].abs() + a[1].abs() < 1e-12 {
                continue;
            }
            let mut theta = libm::atan2(a[1], a[0]);
            while theta < reference - PI {
                theta += 2.0 * PI;
            }
            while theta > reference + PI {
                theta -= 2.0 * PI;
            }
            lo = lo.max(theta - FRAC_PI_2);
            hi = hi.min(theta + FRAC_PI_2);
        }
        if hi - lo < 1e-9 {
            continue;
        }
        for frac in [0.3, 0.7] {
            let angle = lo + frac * (hi - lo);
            let d = [libm::cos(angle), libm::sin(angle)];
            for t in [0.35, 0.7] {
                let y = [m[0] + t * d[0], m[1] + t * d[1]];
                if dual_box.contains(2, &y, 1e-12) {
                    dual_points.push(y);
                }
            }
        }
    }
}

/// Subdifferential of the hull of `f` at `x`: the convex hull of the slopes
/// of the pieces active at `x`.
pub fn subdifferential(f: &PLConvexFunction, x: &Point) -> Result<Polytope, ConvexError> {
    if !f.bbox.contains(f.dim, x, 1e-9) {
        return Err(ConvexError::OutOfDomain);
    }
    let slopes: Vec<Point> = f.active_pieces(x).iter().map(|p| p.slope).collect();
    Ok(Polytope::from_points(f.dim, &slopes))
}

/// Face of the hull exposed by the slope `y`: the hull vertices maximizing
/// `<y, x> - f(x)`, as a polytope.
pub fn face_of_slope(f: &PLConvexFunction, y: &Point) -> Polytope {
    let verts = f.hull_vertices(ACTIVE_TOL);
    let mut best = f64::NEG_INFINITY;
    let mut scale = 1.0f64;
    for v in &verts {
        let s = y[0] * v.point[0] + y[1] * v.point[1] - v.value;
        best = best.max(s);
        scale = scale.max(s.abs());
    }
    let tol = ACTIVE_TOL * scale;
    let pts: Vec<Point> = verts
        .iter()
        .filter(|v| y[0] * v.point[0] + y[1] * v.point[1] - v.value >= best - tol)
        .map(|v| v.point)
        .collect();
    Polytope::from_points(f.dim, &pts)
}

/// `F(F)`: the intersection of the subdifferentials over the vertices of a
/// flat. `g_dual` is the conjugate, used to cross-check Fenchel equality on
/// the result.
pub fn flat_f(
    f: &PLConvexFunction,
    g_dual: &PLConvexFunction,
    flat: &Polytope,
    tol: f64,
) -> Result<Polytope, ConvexError> {
    if flat.is_empty() {
        return Err(ConvexError::NotAFlat);
    }
    if flat.vertices.len() >= 2 {
        let (a, b) = (flat.vertices[0], flat.vertices[flat.vertices.len() - 1]);
        if !is_affine_on(f, &a, &b, tol)? {
            return Err(ConvexError::NotAFlat);
        }
    }
    let mut result: Option<Polytope> = None;
    for v in &flat.vertices {
        let sd = subdifferential(f, v)?;
        result = Some(match result {
            None => sd,
            Some(acc) => acc.intersect(&sd, 1e-9),
        });
    }
    let result = result.unwrap();
    // Fenchel equality must hold between every flat vertex and every point of
    // the intersection, up to the caller tolerance.
    for y in &result.vertices {
        for x in &flat.vertices {
            let lhs = f.eval(x) + g_dual.eval(y);
            let rhs = x[0] * y[0] + x[1] * y[1];
            if (lhs - rhs).abs() > tol + 1e-6 {
                return Err(ConvexError::NotAFlat);
            }
        }
    }
    Ok(result)
}

/// The largest flat of the hull containing `x0` in its relative interior:
/// the face exposed by a relative-interior point of the subdifferential at
/// `x0`.
pub fn maximal_flat_through(f: &PLConvexFunction, x0: &Point) -> Result<Polytope, ConvexError> {
    let sd = subdifferential(f, x0)?;
    let y = sd.barycenter().ok_or(ConvexError::Degenerate)?;
    Ok(face_of_slope(f, &y))
}

/// True iff the hull deviates from the chord between `a` and `b` by at most
/// `tol` on sampled interior points.
pub fn is_affine_on(
    f: &PLConvexFunction,
    a: &Point,
    b: &Point,
    tol: f64,
) -> Result<bool, ConvexError> {
    if !f.bbox.contains(f.dim, a, 1e-9) || !f.bbox.contains(f.dim, b, 1e-9) {
        return Err(ConvexError::OutOfDomain);
    }
    let fa = f.eval(a);
    let fb = f.eval(b);
    const M: usize = 64;
    for i in 0..=M {
        let t = i as f64 / M as f64;
        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let chord = fa + t * (fb - fa);
        if (f.eval(&x) - chord).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Scan the half-line through `h` for the maximal affine interval containing
/// `t = 1`, on a grid of pitch `t_step`, with affineness tolerance `tol`.
pub fn radial_flat(
    f: &PLConvexFunction,
    h: &Point,
    t_step: f64,
    tol: f64,
) -> Result<RadialFlatInterval, ConvexError> {
    assert!(h[0] != 0.0 || h[1] != 0.0, "direction must be nonzero");
    assert!(t_step > 0.0);
    if !f.bbox.contains(f.dim, h, 1e-9) {
        return Err(ConvexError::OutOfDomain);
    }
    let in_box = |t: f64| {
        t >= -1e-12 && f.bbox.contains(f.dim, &[t * h[0], t * h[1]], 1e-9)
    };
    let chord_ok = |t0: f64, t1: f64| -> bool {
        let a = [t0 * h[0], t0 * h[1]];
        let b = [t1 * h[0], t1 * h[1]];
        is_affine_on(f, &a, &b, tol).unwrap_or(false)
    };
    let mut t_min = 1.0f64;
    let mut t_max = 1.0f64;
    loop {
        let mut grew = false;
        let cand = t_max + t_step;
        if in_box(cand) && chord_ok(t_min, cand) {
            t_max = cand;
            grew = true;
        }
        let cand = (t_min - t_step).max(0.0);
        if cand < t_min && in_box(cand) && chord_ok(cand, t_max) {
            t_min = cand;
            grew = true;
        }
        if !grew {
            break;
        }
    }
    Ok(RadialFlatInterval { direction: *h, t_min, t_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::function::{convexify, SamplePoint};

    fn s(x: f64, v: f64) -> SamplePoint {
        SamplePoint::new([x, 0.0], v)
    }

    fn pl_quadratic_1d(lo: f64, hi: f64, step: f64) -> PLConvexFunction {
        let n = ((hi - lo) / step).round() as usize;
        let samples: Vec<SamplePoint> = (0..=n)
            .map(|i| {
                let x = lo + i as f64 * step;
                s(x, 0.5 * x * x)
            })
            .collect();
        convexify(&samples, 1).unwrap()
    }

    fn abs_fn() -> PLConvexFunction {
        convexify(&[s(-1.0, 1.0), s(0.0, 0.0), s(1.0, 1.0)], 1).unwrap()
    }

    #[test]
    fn conjugate_of_half_square() {
        let f = pl_quadratic_1d(-2.0, 2.0, 0.1);
        let g = fenchel_transform(
            &f,
            BoundingBox { lo: [-2.0, 0.0], hi: [2.0, 0.0] },
            0.1,
        )
        .unwrap();
        let mut y = -1.9;
        while y <= 1.9 {
            assert!(
                (g.eval(&[y, 0.0]) - 0.5 * y * y).abs() < 5e-3,
                "conjugate off at y={y}"
            );
            y += 0.05;
        }
    }

    #[test]
    fn conjugate_of_abs_is_zero_on_slope_range() {
        let f = abs_fn();
        let g = fenchel_transform(
            &f,
            BoundingBox { lo: [-1.0, 0.0], hi: [1.0, 0.0] },
            0.25,
        )
        .unwrap();
        let mut y = -1.0;
        while y <= 1.0 {
            assert!(g.eval(&[y, 0.0]).abs() < 1e-12);
            y += 0.125;
        }
        assert!(!g.truncated);
        // Smaller dual box than the slope range trips the flag.
        let gt = fenchel_transform(
            &f,
            BoundingBox { lo: [-0.5, 0.0], hi: [0.5, 0.0] },
            0.25,
        )
        .unwrap();
        assert!(gt.truncated);
    }

    #[test]
    fn double_transform_reproduces_hull_vertices() {
        let f = pl_quadratic_1d(-2.0, 2.0, 0.25);
        let dual = BoundingBox { lo: [-3.0, 0.0], hi: [3.0, 0.0] };
        let g = fenchel_transform(&f, dual, 0.2).unwrap();
        let ff = fenchel_transform(&g, f.bbox, 0.2).unwrap();
        for v in f.hull_vertices(1e-12) {
            assert!(
                (ff.eval(&v.point) - v.value).abs() <= 1e-12,
                "biconjugation off at {:?}",
                v.point
            );
        }
    }

    #[test]
    fn dual_samples_cover_vertex_cells_2d() {
        // Boundary vertices touch only two facets; without the cell samples
        // their subdifferential cells stay empty and the biconjugate misses
        // them. The conjugate of the sampled conjugate must be exact at
        // every hull vertex.
        let mut samples = Vec::new();
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                let (x, y) = (0.5 * i as f64, 0.5 * j as f64);
                let v = x.max(y).max(0.0) + 0.3 * (x * x + y * y);
                samples.push(SamplePoint::new([x, y], v));
            }
        }
        let f = convexify(&samples, 2).unwrap();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &f.hull {
            for a in 0..2 {
                lo[a] = lo[a].min(p.slope[a] - 1.0);
                hi[a] = hi[a].max(p.slope[a] + 1.0);
            }
        }
        let g = fenchel_transform(&f, BoundingBox { lo, hi }, 0.5).unwrap();
        for v in f.hull_vertices(1e-12) {
            let back = g
                .samples
                .iter()
                .map(|s| v.point[0] * s.point[0] + v.point[1] * s.point[1] - s.value)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                (back - v.value).abs() <= 1e-12,
                "biconjugation off at {:?}",
                v.point
            );
        }
    }

    #[test]
    fn subdifferential_of_abs_at_kink() {
        let f = abs_fn();
        let sd = subdifferential(&f, &[0.0, 0.0]).unwrap();
        let expect = Polytope { dim: 1, vertices: alloc::vec![[-1.0, 0.0], [1.0, 0.0]] };
        assert!(sd.approx_eq(&expect, 1e-9));
        assert_eq!(
            subdifferential(&f, &[5.0, 0.0]),
            Err(ConvexError::OutOfDomain)
        );
    }

    #[test]
    fn subdifferential_of_pl_quadratic_at_sample() {
        let f = pl_quadratic_1d(-2.0, 2.0, 0.1);
        let sd = subdifferential(&f, &[1.0, 0.0]).unwrap();
        assert_eq!(sd.vertices.len(), 2);
        assert!((sd.vertices[0][0] - 0.95).abs() < 1e-9);
        assert!((sd.vertices[1][0] - 1.05).abs() < 1e-9);
    }

    #[test]
    fn subdifferential_of_max_plane_at_origin() {
        // f(x) = max(x1, x2, 0) on [-1,1]^2.
        let mut samples = Vec::new();
        for i in -2..=2 {
            for j in -2..=2 {
                let (x, y) = (0.5 * i as f64, 0.5 * j as f64);
                samples.push(SamplePoint::new([x, y], x.max(y).max(0.0)));
            }
        }
        let f = convexify(&samples, 2).unwrap();
        let sd = subdifferential(&f, &[0.0, 0.0]).unwrap();
        let expect = Polytope::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(sd.approx_eq(&expect, 1e-9));
    }

    fn trough() -> PLConvexFunction {
        // max(0, |x|-1) sampled on [-2,2].
        let samples: Vec<SamplePoint> = (-8..=8)
            .map(|i| {
                let x = 0.25 * i as f64;
                s(x, (x.abs() - 1.0).max(0.0))
            })
            .collect();
        convexify(&samples, 1).unwrap()
    }

    #[test]
    fn faces_of_trough() {
        let f = trough();
        let face0 = face_of_slope(&f, &[0.0, 0.0]);
        let expect = Polytope { dim: 1, vertices: alloc::vec![[-1.0, 0.0], [1.0, 0.0]] };
        assert!(face0.approx_eq(&expect, 1e-9));

        let abs = abs_fn();
        let f0 = face_of_slope(&abs, &[0.0, 0.0]);
        assert!(f0.approx_eq(&Polytope::point(1, [0.0, 0.0]), 1e-9));
        // Slope 1 exposes the whole right piece [0, 1].
        let f1 = face_of_slope(&abs, &[1.0, 0.0]);
        let expect = Polytope { dim: 1, vertices: alloc::vec![[0.0, 0.0], [1.0, 0.0]] };
        assert!(f1.approx_eq(&expect, 1e-9));
    }

    #[test]
    fn flat_f_of_trough() {
        let f = trough();
        let g = fenchel_transform(
            &f,
            BoundingBox { lo: [-1.5, 0.0], hi: [1.5, 0.0] },
            0.25,
        )
        .unwrap();
        let flat = Polytope { dim: 1, vertices: alloc::vec![[-1.0, 0.0], [1.0, 0.0]] };
        let ff = flat_f(&f, &g, &flat, 1e-9).unwrap();
        assert!(ff.approx_eq(&Polytope::point(1, [0.0, 0.0]), 1e-9));
        // Equals the subdifferential at an interior point.
        let sd = subdifferential(&f, &[0.5, 0.0]).unwrap();
        assert!(ff.approx_eq(&sd, 1e-9));
        // A boundary singleton has a strictly larger F-set.
        let single = Polytope::point(1, [1.0, 0.0]);
        let fs = flat_f(&f, &g, &single, 1e-9).unwrap();
        let expect = Polytope { dim: 1, vertices: alloc::vec![[0.0, 0.0], [1.0, 0.0]] };
        assert!(fs.approx_eq(&expect, 1e-9));
        assert!(ff.subset_of(&fs, 1e-9) && !fs.subset_of(&ff, 1e-9));
        // A segment the function kinks across is rejected.
        let bad = Polytope { dim: 1, vertices: alloc::vec![[0.0, 0.0], [1.5, 0.0]] };
        assert_eq!(flat_f(&f, &g, &bad, 1e-9), Err(ConvexError::NotAFlat));
    }

    #[test]
    fn maximal_flat_cases() {
        let q = pl_quadratic_1d(-2.0, 2.0, 0.1);
        let m = maximal_flat_through(&q, &[0.0, 0.0]).unwrap();
        assert!(m.approx_eq(&Polytope::point(1, [0.0, 0.0]), 1e-9));

        let f = trough();
        let m = maximal_flat_through(&f, &[0.5, 0.0]).unwrap();
        let expect = Polytope { dim: 1, vertices: alloc::vec![[-1.0, 0.0], [1.0, 0.0]] };
        assert!(m.approx_eq(&expect, 1e-9));
    }

    #[test]
    fn maximal_flat_square_2d() {
        // max(0, |x|_inf - 1): the flat through the origin is [-1,1]^2.
        let mut samples = Vec::new();
        for i in -4..=4 {
            for j in -4..=4 {
                let (x, y) = (0.5 * i as f64, 0.5 * j as f64);
                samples.push(SamplePoint::new([x, y], (x.abs().max(y.abs()) - 1.0).max(0.0)));
            }
        }
        let f = convexify(&samples, 2).unwrap();
        let m = maximal_flat_through(&f, &[0.0, 0.0]).unwrap();
        let expect =
            Polytope::from_points(2, &[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]);
        assert!(m.approx_eq(&expect, 1e-9));
    }

    #[test]
    fn is_affine_on_cases() {
        let f = abs_fn();
        assert!(is_affine_on(&f, &[0.2, 0.0], &[0.8, 0.0], 1e-9).unwrap());
        assert!(!is_affine_on(&f, &[-0.5, 0.0], &[0.5, 0.0], 1e-9).unwrap());
        let q = pl_quadratic_1d(-2.0, 2.0, 0.1);
        assert!(is_affine_on(&q, &[0.0, 0.0], &[0.1, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn radial_flat_disk_and_strict() {
        // PL approximation of max(0, |x|_2 - 1).
        let mut samples = Vec::new();
        for i in -8..=8 {
            for j in -8..=8 {
                let (x, y) = (0.25 * i as f64, 0.25 * j as f64);
                let r = libm::sqrt(x * x + y * y);
                samples.push(SamplePoint::new([x, y], (r - 1.0).max(0.0)));
            }
        }
        let f = convexify(&samples, 2).unwrap();
        let rf = radial_flat(&f, &[0.5, 0.0], 0.1, 1e-9).unwrap();
        assert!(rf.t_min <= 0.1 + 1e-12);
        assert!((rf.t_max - 2.0).abs() <= 0.1 + 1e-12);

        // The PL interpolant of a strictly convex function is still affine on
        // each hull piece, so "degenerate" means within the sample pitch.
        let q = pl_quadratic_1d(-2.0, 2.0, 0.1);
        let rq = radial_flat(&q, &[1.0, 0.0], 0.05, 1e-9).unwrap();
        assert!(rq.t_max - rq.t_min <= 0.2 + 1e-12);
        assert!(rq.t_min <= 1.0 && rq.t_max >= 1.0);
    }
}
