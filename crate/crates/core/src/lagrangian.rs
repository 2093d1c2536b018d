//! Tonelli Lagrangians on the torus from a closed catalog (mechanical,
//! Mane, quadratic), closed one-forms, and Tonelli validity checks.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{dot, norm, Point};

const TWO_PI: f64 = core::f64::consts::TAU;
const PI: f64 = core::f64::consts::PI;

/// One closed-form term of a 1-periodic scalar field.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FieldTerm {
    Constant(f64),
    /// `coef * cos(2 pi <k, x>)`
    Cos { coef: f64, k: [i32; 2] },
    /// `coef * sin(2 pi <k, x>)`
    Sin { coef: f64, k: [i32; 2] },
    /// `coef * sin^2(pi x_axis)`
    SinSqPi { coef: f64, axis: usize },
}

/// A 1-periodic scalar field given as a finite term list.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalarField {
    pub terms: Vec<FieldTerm>,
}

impl ScalarField {
    pub fn zero() -> Self {
        ScalarField { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        ScalarField { terms: alloc::vec![FieldTerm::Constant(c)] }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            v += match t {
                FieldTerm::Constant(c) => *c,
                FieldTerm::Cos { coef, k } => {
                    coef * libm::cos(TWO_PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]))
                }
                FieldTerm::Sin { coef, k } => {
                    coef * libm::sin(TWO_PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]))
                }
                FieldTerm::SinSqPi { coef, axis } => {
                    let s = libm::sin(PI * x[*axis]);
                    coef * s * s
                }
            };
        }
        v
    }

    pub fn gradient(&self, x: &Point) -> Point {
        let mut g = [0.0, 0.0];
        for t in &self.terms {
            match t {
                FieldTerm::Constant(_) => {}
                FieldTerm::Cos { coef, k } => {
                    let phase = TWO_PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
                    let d = -coef * TWO_PI * libm::sin(phase);
                    g[0] += d * k[0] as f64;
                    g[1] += d * k[1] as f64;
                }
                FieldTerm::Sin { coef, k } => {
                    let phase = TWO_PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
                    let d = coef * TWO_PI * libm::cos(phase);
                    g[0] += d * k[0] as f64;
                    g[1] += d * k[1] as f64;
                }
                FieldTerm::SinSqPi { coef, axis } => {
                    // d/dx sin^2(pi x) = pi sin(2 pi x)
                    g[*axis] += coef * PI * libm::sin(TWO_PI * x[*axis]);
                }
            }
        }
        g
    }

    /// Crude upper bound for |field| used by the velocity-cap heuristic.
    pub fn sup_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                FieldTerm::Constant(c) => c.abs(),
                FieldTerm::Cos { coef, .. } | FieldTerm::Sin { coef, .. } => coef.abs(),
                FieldTerm::SinSqPi { coef, .. } => coef.abs(),
            })
            .sum()
    }
}

/// A 1-periodic vector field with one scalar field per component.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VectorField {
    pub components: Vec<ScalarField>,
}

impl VectorField {
    pub fn eval(&self, x: &Point) -> Point {
        let mut v = [0.0, 0.0];
        for (i, c) in self.components.iter().enumerate() {
            v[i] = c.eval(x);
        }
        v
    }

    pub fn sup_bound(&self) -> f64 {
        let per: Vec<f64> = self.components.iter().map(|c| c.sup_bound()).collect();
        norm(&[per.first().copied().unwrap_or(0.0), per.get(1).copied().unwrap_or(0.0)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LagrangianError {
    /// Quadratic matrix is not symmetric positive definite.
    NotPositiveDefinite,
    BadDimension,
}

impl core::fmt::Display for LagrangianError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LagrangianError::NotPositiveDefinite => {
                write!(f, "kinetic matrix must be symmetric positive definite")
            }
            LagrangianError::BadDimension => write!(f, "dimension must be 1 or 2"),
        }
    }
}

/// A Tonelli Lagrangian on the torus from the closed catalog.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LagrangianKind {
    /// `L = 1/2 |v|^2 + V(x)` (the potential enters with a plus sign; the
    /// minimizing-measure conventions expect L bounded below).
    Mechanical { potential: ScalarField },
    /// `L = 1/2 |v - X(x)|^2 + potential(x)`.
    Mane { field: VectorField, potential: Option<ScalarField> },
    /// `L = 1/2 <G v, v>` with constant positive definite G.
    Quadratic { g: [[f64; 2]; 2] },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LagrangianSpec {
    pub dim: usize,
    pub kind: LagrangianKind,
}

impl LagrangianSpec {
    pub fn new(dim: usize, kind: LagrangianKind) -> Result<Self, LagrangianError> {
        if dim != 1 && dim != 2 {
            return Err(LagrangianError::BadDimension);
        }
        if let LagrangianKind::Quadratic { g } = &kind {
            let sym = (g[0][1] - g[1][0]).abs() <= 1e-12;
            let pd = if dim == 1 {
                g[0][0] > 0.0
            } else {
                g[0][0] > 0.0 && g[0][0] * g[1][1] - g[0][1] * g[1][0] > 0.0
            };
            if !sym || !pd {
                return Err(LagrangianError::NotPositiveDefinite);
            }
        }
        Ok(LagrangianSpec { dim, kind })
    }

    /// Evaluate `L(x, v)`.
    pub fn eval(&self, x: &Point, v: &Point) -> f64 {
        match &self.kind {
            LagrangianKind::Mechanical { potential } => 0.5 * dot(v, v) + potential.eval(x),
            LagrangianKind::Mane { field, potential } => {
                let w = field.eval(x);
                let d = [v[0] - w[0], v[1] - w[1]];
                0.5 * dot(&d, &d) + potential.as_ref().map_or(0.0, |p| p.eval(x))
            }
            LagrangianKind::Quadratic { g } => {
                0.5 * (g[0][0] * v[0] * v[0]
                    + (g[0][1] + g[1][0]) * v[0] * v[1]
                    + g[1][1] * v[1] * v[1])
            }
        }
    }

    /// Heuristic velocity cap: three times the fastest speed the catalog
    /// dynamics can realize at critical energy.
    pub fn default_velocity_cap(&self) -> f64 {
        let base = match &self.kind {
            LagrangianKind::Mechanical { potential } => {
                libm::sqrt(2.0 * potential.sup_bound())
            }
            LagrangianKind::Mane { field, potential } => {
                field.sup_bound()
                    + potential.as_ref().map_or(0.0, |p| libm::sqrt(2.0 * p.sup_bound()))
            }
            LagrangianKind::Quadratic { .. } => 0.0,
        };
        3.0 * (1.0 + base)
    }
}

/// A closed one-form `c . dx + df` on the torus; its class is `c`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OneFormSpec {
    pub class: Point,
    pub exact: ScalarField,
}

impl OneFormSpec {
    pub fn constant(class: Point) -> Self {
        OneFormSpec { class, exact: ScalarField::zero() }
    }

    pub fn zero() -> Self {
        Self::constant([0.0, 0.0])
    }

    /// Pairing of the one-form with a tangent vector at `x`.
    pub fn eval(&self, x: &Point, v: &Point) -> f64 {
        let g = self.exact.gradient(x);
        dot(&self.class, v) + dot(&g, v)
    }
}

/// Tonelli validity report over sampled positions and velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct TonelliReport {
    /// Smallest eigenvalue of the second finite-difference matrix in v over
    /// the sample set.
    pub min_hessian_eigenvalue: f64,
    /// min of L(x,v)/|v| on the outer velocity shell.
    pub superlinearity_ratio: f64,
    pub passed: bool,
    /// Offending (x, v) pairs when the check fails.
    pub violations: Vec<(Point, Point, String)>,
}

/// Sample the fiber Hessian by central finite differences and the
/// superlinearity proxy on the outer shell of the velocity grid.
pub fn tonelli_check(
    spec: &LagrangianSpec,
    x_grid: &[Point],
    v_grid: &[Point],
    superlinearity_threshold: f64,
) -> TonelliReport {
    assert!(!x_grid.is_empty() && !v_grid.is_empty());
    let h = 1e-4;
    let mut min_eig = f64::INFINITY;
    let mut violations = Vec::new();
    let mut max_speed = 0.0f64;
    for v in v_grid {
        max_speed = max_speed.max(norm(v));
    }
    for x in x_grid {
        for v in v_grid {
            let eig = {
                let f = |dv: Point| spec.eval(x, &[v[0] + dv[0], v[1] + dv[1]]);
                let f0 = f([0.0, 0.0]);
                let dxx = (f([h, 0.0]) - 2.0 * f0 + f([-h, 0.0])) / (h * h);
                if spec.dim == 1 {
                    dxx
                } else {
                    let dyy = (f([0.0, h]) - 2.0 * f0 + f([0.0, -h])) / (h * h);
                    let dxy = (f([h, h]) - f([h, -h]) - f([-h, h]) + f([-h, -h])) / (4.0 * h * h);
                    let tr = dxx + dyy;
                    let det = dxx * dyy - dxy * dxy;
                    0.5 * (tr - libm::sqrt((tr * tr - 4.0 * det).max(0.0)))
                }
            };
            if eig < min_eig {
                min_eig = eig;
            }
            if eig <= 0.0 {
                violations.push((*x, *v, String::from("fiber Hessian not positive definite")));
            }
        }
    }
    let mut super_ratio = f64::INFINITY;
    for x in x_grid {
        for v in v_grid {
            let s = norm(v);
            if s >= max_speed - 1e-9 && s > 0.0 {
                let r = spec.eval(x, v) / s;
                if r < super_ratio {
                    super_ratio = r;
                }
                if r < superlinearity_threshold {
                    violations.push((*x, *v, String::from("superlinearity proxy below threshold")));
                }
            }
        }
    }
    TonelliReport {
        min_hessian_eigenvalue: min_eig,
        superlinearity_ratio: super_ratio,
        passed: violations.is_empty(),
        violations,
    }
}

/// Named catalog presets.
pub struct Catalog;

impl Catalog {
    /// d=1 mechanical pendulum, `V = 1 - cos(2 pi x)`.
    pub fn pendulum() -> LagrangianSpec {
        let potential = ScalarField {
            terms: alloc::vec![
                FieldTerm::Constant(1.0),
                FieldTerm::Cos { coef: -1.0, k: [1, 0] },
            ],
        };
        LagrangianSpec::new(1, LagrangianKind::Mechanical { potential }).unwrap()
    }

    /// d=2 flat metric, `L = 1/2 |v|^2`.
    pub fn flat2() -> LagrangianSpec {
        LagrangianSpec::new(2, LagrangianKind::Quadratic { g: [[1.0, 0.0], [0.0, 1.0]] })
            .unwrap()
    }

    /// Mane shear flow, `X = (1 + cos(2 pi x2)/2, 0)`.
    pub fn mane_shear() -> LagrangianSpec {
        let x1 = ScalarField {
            terms: alloc::vec![
                FieldTerm::Constant(1.0),
                FieldTerm::Cos { coef: 0.5, k: [0, 1] },
            ],
        };
        let field = VectorField { components: alloc::vec![x1, ScalarField::zero()] };
        LagrangianSpec::new(2, LagrangianKind::Mane { field, potential: None }).unwrap()
    }

    /// Shear flow with a pinning potential `eps (1 - cos(2 pi x2))` that
    /// selects the circle x2 = 0.
    pub fn mane_shear_pinned(eps: f64) -> LagrangianSpec {
        let shear = Self::mane_shear();
        let potential = ScalarField {
            terms: alloc::vec![
                FieldTerm::Constant(eps),
                FieldTerm::Cos { coef: -eps, k: [0, 1] },
            ],
        };
        match shear.kind {
            LagrangianKind::Mane { field, .. } => {
                LagrangianSpec::new(2, LagrangianKind::Mane { field, potential: Some(potential) })
                    .unwrap()
            }
            _ => unreachable!(),
        }
    }

    /// Field with a single zero at the origin whose orbits are all homoclinic
    /// to it: `X = (sin^2(pi x1), sin^2(pi x2))`.
    pub fn mane_homoclinic() -> LagrangianSpec {
        let field = VectorField {
            components: alloc::vec![
                ScalarField { terms: alloc::vec![FieldTerm::SinSqPi { coef: 1.0, axis: 0 }] },
                ScalarField { terms: alloc::vec![FieldTerm::SinSqPi { coef: 1.0, axis: 1 }] },
            ],
        };
        LagrangianSpec::new(2, LagrangianKind::Mane { field, potential: None }).unwrap()
    }

    pub fn by_name(name: &str) -> Option<LagrangianSpec> {
        match name {
            "pendulum" => Some(Self::pendulum()),
            "flat2" => Some(Self::flat2()),
            "mane_shear" => Some(Self::mane_shear()),
            "mane_homoclinic" => Some(Self::mane_homoclinic()),
            _ => {
                // mane_shear_pinned(<eps>)
                let name = name.strip_prefix("mane_shear_pinned(")?;
                let eps: f64 = name.strip_suffix(')')?.parse().ok()?;
                Some(Self::mane_shear_pinned(eps))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_catalog_values() {
        assert_eq!(Catalog::flat2().eval(&[0.3, 0.7], &[1.0, 0.0]), 0.5);
        let mane = LagrangianSpec::new(
            2,
            LagrangianKind::Mane {
                field: VectorField {
                    components: alloc::vec![ScalarField::constant(1.0), ScalarField::zero()],
                },
                potential: None,
            },
        )
        .unwrap();
        assert_eq!(mane.eval(&[0.2, 0.9], &[1.0, 0.0]), 0.0);
        let p = Catalog::pendulum();
        assert!((p.eval(&[0.5, 0.0], &[0.0, 0.0]) - 2.0).abs() < 1e-12);
        assert!(p.eval(&[0.0, 0.0], &[0.0, 0.0]).abs() < 1e-12);
    }

    #[test]
    fn catalog_fields() {
        let hom = Catalog::mane_homoclinic();
        if let LagrangianKind::Mane { field, .. } = &hom.kind {
            let z = field.eval(&[0.0, 0.0]);
            assert!(norm(&z) < 1e-15);
            let m = field.eval(&[0.5, 0.5]);
            assert!((m[0] - 1.0).abs() < 1e-12 && (m[1] - 1.0).abs() < 1e-12);
        } else {
            panic!("wrong kind");
        }
        let shear = Catalog::mane_shear();
        if let LagrangianKind::Mane { field, .. } = &shear.kind {
            let v = field.eval(&[0.0, 0.0]);
            assert!((v[0] - 1.5).abs() < 1e-12 && v[1].abs() < 1e-12);
        } else {
            panic!("wrong kind");
        }
    }

    #[test]
    fn oneform_values() {
        let w = OneFormSpec::constant([1.0, 0.0]);
        assert!((w.eval(&[0.4, 0.1], &[0.1, 0.0]) - 0.1).abs() < 1e-15);
        assert_eq!(OneFormSpec::zero().eval(&[0.3, 0.3], &[2.0, 1.0]), 0.0);
        // c=(1,0) with exact part sin(2 pi x1)/(2 pi): gradient is cos(2 pi x1).
        let w = OneFormSpec {
            class: [1.0, 0.0],
            exact: ScalarField {
                terms: alloc::vec![FieldTerm::Sin {
                    coef: 1.0 / TWO_PI,
                    k: [1, 0],
                }],
            },
        };
        assert!((w.eval(&[0.0, 0.0], &[1.0, 0.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oneform_loop_integral_sees_only_the_class() {
        // Discrete loop of class e1 with an oscillating exact part.
        let w = OneFormSpec {
            class: [1.0, 0.0],
            exact: ScalarField {
                terms: alloc::vec![FieldTerm::Sin { coef: 0.3, k: [2, 0] }],
            },
        };
        let n = 400;
        let dt = 1.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let x = [i as f64 * dt, 0.0];
            let v = [1.0, 0.0];
            total += w.eval(&x, &v) * dt;
        }
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn periodicity() {
        for spec in [Catalog::pendulum(), Catalog::mane_shear(), Catalog::mane_homoclinic()] {
            let x = [0.37, 0.82];
            let v = [0.6, -0.4];
            let shifted = [x[0] + 1.0, x[1] - 1.0];
            assert!((spec.eval(&x, &v) - spec.eval(&shifted, &v)).abs() < 1e-12);
        }
    }

    #[test]
    fn mane_nonnegative_and_zero_on_field() {
        let spec = Catalog::mane_shear();
        if let LagrangianKind::Mane { field, .. } = &spec.kind {
            for i in 0..10 {
                for j in 0..10 {
                    let x = [i as f64 / 10.0, j as f64 / 10.0];
                    assert!(spec.eval(&x, &field.eval(&x)).abs() < 1e-15);
                    assert!(spec.eval(&x, &[0.3, -0.7]) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn homoclinic_zero_is_isolated_on_grid() {
        let spec = Catalog::mane_homoclinic();
        if let LagrangianKind::Mane { field, .. } = &spec.kind {
            let n = 32;
            for i in 0..n {
                for j in 0..n {
                    let x = [i as f64 / n as f64, j as f64 / n as f64];
                    let v = field.eval(&x);
                    if i == 0 && j == 0 {
                        assert!(norm(&v) < 1e-15);
                    } else {
                        assert!(norm(&v) > 1e-6, "unexpected zero at {x:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn tonelli_check_passes_for_catalog() {
        let xg: Vec<Point> = (0..8).map(|i| [i as f64 / 8.0, 0.0]).collect();
        let vg: Vec<Point> = (-4..=4).map(|i| [i as f64 * 0.5, 0.0]).collect();
        let rep = tonelli_check(&Catalog::pendulum(), &xg, &vg, -2.0);
        assert!(rep.passed, "{:?}", rep.violations.first());
        assert!((rep.min_hessian_eigenvalue - 1.0).abs() < 1e-3);
    }

    #[test]
    fn indefinite_quadratic_rejected_at_construction() {
        let r = LagrangianSpec::new(2, LagrangianKind::Quadratic { g: [[1.0, 0.0], [0.0, -1.0]] });
        assert_eq!(r, Err(LagrangianError::NotPositiveDefinite));
    }

    #[test]
    fn preset_lookup() {
        assert!(Catalog::by_name("pendulum").is_some());
        assert!(Catalog::by_name("mane_shear_pinned(0.1)").is_some());
        assert!(Catalog::by_name("nope").is_none());
    }
}
