//! Exact convex analysis for piecewise-linear convex functions on bounded
//! grids in dimension 1 and 2: lower hulls, Fenchel transforms,
//! subdifferentials, exposed faces, flats and radial flats.

mod function;
mod poly;
mod transform;

pub use function::{
    convexify, BoundingBox, ConvexError, HullPiece, PLConvexFunction, SamplePoint, ACTIVE_TOL,
};
pub use poly::{Polytope, GEOM_TOL};
pub use transform::{
    face_of_slope, fenchel_transform, flat_f, is_affine_on, maximal_flat_through, radial_flat,
    subdifferential, RadialFlatInterval,
};
