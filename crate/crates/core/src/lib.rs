//! Numerical weak-KAM / Aubry-Mather toolkit: convex analysis for effective
//! Hamiltonians and Lagrangians, Tonelli Lagrangians on the torus, discrete
//! Lax-Oleinik iteration, Peierls barriers, and minimizing measures via
//! occupation-measure linear programming.
//!
//! This crate is `no_std` (with `alloc`); all IO, file formats and the CLI
//! live in the companion `amlab` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod action;
pub mod convex;
pub mod lagrangian;
pub mod lp;
pub mod mather;

/// Points, velocities, homology and cohomology vectors all live in at most
/// two dimensions; the active dimension is carried by the owning object.
pub type Point = [f64; 2];

/// Dot product restricted to the first `dim` coordinates.
#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Euclidean norm.
#[inline]
pub fn norm(a: &Point) -> f64 {
    libm::sqrt(a[0] * a[0] + a[1] * a[1])
}
