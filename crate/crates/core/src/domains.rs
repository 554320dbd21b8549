//! Model domains with closed-form distance functions, and sampled test
//! submanifolds.
//!
//! Distances are measured to the boundary and are positive inside. Hessians
//! and shape operators are expressed in an orthonormal frame aligned with the
//! coordinate axes: for the space-form ball the coordinates are geodesic
//! normal coordinates about the center, for the horoball they are
//! upper-half-space coordinates with the frame `x_m * d/dx_i`.
//!
//! Horoball convention: hyperbolic space of curvature `-1` in the upper
//! half-space model, the horoball `{x_m > 1}` centered at the point at
//! infinity, distance `r = ln x_m`. Its boundary horosphere has all principal
//! curvatures `+1` with respect to the inward normal `d/dr`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modelspace::{cot_c, ModelCurvature};
use crate::ode::{integrate, OdeOptions, StepAction};
use crate::spectral::{complement_basis, p_minus, SymmetricForm};

/// Model domain kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    /// `{|x| < rho}` in Euclidean space.
    EuclideanBall { rho: f64 },
    /// Geodesic ball of radius `rho` in the space form of curvature `-c`.
    SpaceFormBall { c: f64, rho: f64 },
    /// `R^s x B_rho`, the ball taken in the space form of curvature `-c_fiber`.
    Cylinder { s: usize, rho: f64, c_fiber: f64 },
    /// `{<x, v> > |x| cos(theta)}` with unit axis `v`.
    EuclideanCone { axis: Vec<f64>, theta: f64 },
    /// `{x_m > 1}` in the upper half-space model of hyperbolic space.
    Horoball,
    /// `{|x_m| < width / 2}`.
    Slab { width: f64 },
    /// `{|x''|^2 - c_ds |x'|^2 < 0}` with `x = (x', x'') in R^s x R^(m-s)`.
    DsConeRegion { s: usize, c_ds: f64 },
}

/// A model domain in an ambient space of dimension `ambient_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub ambient_dim: usize,
}

/// Distance to the boundary with its gradient and Hessian.
#[derive(Debug, Clone)]
pub struct DistanceData {
    pub r: f64,
    pub grad: DVector<f64>,
    pub hess: SymmetricForm,
}

/// Points closer than this to a singular set of the distance are refused.
const SINGULAR_TOL: f64 = 1e-9;
/// Relative tolerance for a point to count as a boundary point.
const BOUNDARY_TOL: f64 = 1e-8;

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::param(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn unit(m: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(m);
    e[i] = 1.0;
    e
}

impl DomainSpec {
    pub fn new(kind: DomainKind, ambient_dim: usize) -> Result<Self> {
        let m = ambient_dim;
        if m < 2 {
            return Err(Error::param("ambient_dim", "must be at least 2"));
        }
        match &kind {
            DomainKind::EuclideanBall { rho } => positive("rho", *rho)?,
            DomainKind::SpaceFormBall { c, rho } => {
                positive("rho", *rho)?;
                ModelCurvature::new(*c)?;
                if *c < 0.0 && *rho >= PI / (-c).sqrt() {
                    return Err(Error::param("rho", "must be below the conjugate radius"));
                }
            }
            DomainKind::Cylinder { s, rho, c_fiber } => {
                positive("rho", *rho)?;
                ModelCurvature::new(*c_fiber)?;
                if *s < 1 || *s + 2 > m {
                    return Err(Error::param("s", format!("need 1 <= s <= m - 2, got {s}")));
                }
                if *c_fiber < 0.0 && *rho >= PI / (-c_fiber).sqrt() {
                    return Err(Error::param("rho", "must be below the conjugate radius"));
                }
            }
            DomainKind::EuclideanCone { axis, theta } => {
                if axis.len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        got: axis.len(),
                    });
                }
                let n = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
                if (n - 1.0).abs() > 1e-10 {
                    return Err(Error::param("axis", "must be a unit vector"));
                }
                if !(*theta > 0.0 && *theta < PI / 2.0) {
                    return Err(Error::param("theta", "must lie in (0, pi/2)"));
                }
            }
            DomainKind::Horoball => {}
            DomainKind::Slab { width } => positive("width", *width)?,
            DomainKind::DsConeRegion { s, c_ds } => {
                positive("c_ds", *c_ds)?;
                if *s < 1 || *s >= m {
                    return Err(Error::param("s", format!("need 1 <= s < m, got {s}")));
                }
            }
        }
        Ok(DomainSpec { kind, ambient_dim })
    }

    /// The constant `c` for which the ambient satisfies the lower bound.
    pub fn model_curvature(&self) -> ModelCurvature {
        let c = match &self.kind {
            DomainKind::SpaceFormBall { c, .. } => *c,
            DomainKind::Cylinder { c_fiber, .. } => c_fiber.max(0.0),
            DomainKind::Horoball => 1.0,
            _ => 0.0,
        };
        ModelCurvature::new(c).expect("validated on construction")
    }

    /// Whether coordinates are Euclidean, so that finite differences of the
    /// coordinate distance reproduce the Hessian.
    pub fn is_euclidean(&self) -> bool {
        match &self.kind {
            DomainKind::EuclideanBall { .. }
            | DomainKind::EuclideanCone { .. }
            | DomainKind::Slab { .. }
            | DomainKind::DsConeRegion { .. } => true,
            DomainKind::SpaceFormBall { c, .. } => *c == 0.0,
            DomainKind::Cylinder { c_fiber, .. } => *c_fiber == 0.0,
            DomainKind::Horoball => false,
        }
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("x", "must be finite"));
        }
        Ok(())
    }

    /// Distance to the boundary (positive inside) without derivatives.
    pub fn signed_distance(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_point(x)?;
        let m = self.ambient_dim;
        Ok(match &self.kind {
            DomainKind::EuclideanBall { rho } | DomainKind::SpaceFormBall { rho, .. } => {
                rho - x.norm()
            }
            DomainKind::Cylinder { s, rho, .. } => rho - x.rows(*s, m - s).norm(),
            DomainKind::EuclideanCone { axis, theta } => {
                let v = DVector::from_column_slice(axis);
                let a = x.dot(&v);
                let rho_ax = (x - &v * a).norm();
                a * theta.sin() - rho_ax * theta.cos()
            }
            DomainKind::Horoball => {
                if x[m - 1] <= 0.0 {
                    return Err(Error::OutsideDomain("x_m must be positive".into()));
                }
                x[m - 1].ln()
            }
            DomainKind::Slab { width } => 0.5 * width - x[m - 1].abs(),
            DomainKind::DsConeRegion { .. } => {
                return Err(Error::NoClosedForm(
                    "distance to the boundary of the cone region".into(),
                ))
            }
        })
    }

    /// Distance along the canonical inward ray beyond which the closed forms
    /// are not used.
    pub fn reach(&self) -> f64 {
        match &self.kind {
            DomainKind::EuclideanBall { rho }
            | DomainKind::SpaceFormBall { rho, .. }
            | DomainKind::Cylinder { rho, .. } => *rho,
            DomainKind::EuclideanCone { theta, .. } => theta.tan(),
            DomainKind::Horoball => f64::INFINITY,
            DomainKind::Slab { width } => 0.5 * width,
            DomainKind::DsConeRegion { .. } => 0.0,
        }
    }

    /// Point at distance `r` along the canonical inward normal ray.
    pub fn inward_ray(&self, r: f64) -> Result<DVector<f64>> {
        let m = self.ambient_dim;
        if !(r >= 0.0) || r >= self.reach() {
            return Err(Error::OutsideDomain(format!(
                "r = {r} outside [0, {})",
                self.reach()
            )));
        }
        Ok(match &self.kind {
            DomainKind::EuclideanBall { rho } | DomainKind::SpaceFormBall { rho, .. } => {
                unit(m, 0) * (rho - r)
            }
            DomainKind::Cylinder { s, rho, .. } => unit(m, *s) * (rho - r),
            DomainKind::EuclideanCone { axis, theta } => {
                let v = DVector::from_column_slice(axis);
                let w = complement_basis(&v).column(0).into_owned();
                let y = &v * theta.cos() + &w * theta.sin();
                let n = &v * theta.sin() - &w * theta.cos();
                y + n * r
            }
            DomainKind::Horoball => unit(m, m - 1) * r.exp(),
            DomainKind::Slab { width } => unit(m, m - 1) * (0.5 * width - r),
            DomainKind::DsConeRegion { .. } => unreachable!("reach is zero"),
        })
    }

    /// Closed-form distance, gradient and Hessian at an interior point.
    pub fn distance_hessian(&self, x: &DVector<f64>) -> Result<DistanceData> {
        self.check_point(x)?;
        let m = self.ambient_dim;
        let r = self.signed_distance(x)?;
        if r < -BOUNDARY_TOL * x.norm().max(1.0) {
            return Err(Error::OutsideDomain(format!("distance {r} < 0")));
        }
        let ball = |c: f64, d: f64, dir: DVector<f64>, proj: DMatrix<f64>| -> Result<DistanceData> {
            if d < SINGULAR_TOL {
                return Err(Error::OutsideDomain("center of the ball".into()));
            }
            let k = cot_c(c, d);
            let hess = (proj - &dir * dir.transpose()) * (-k);
            Ok(DistanceData {
                r,
                grad: -dir,
                hess: SymmetricForm::new(hess)?,
            })
        };
        match &self.kind {
            DomainKind::EuclideanBall { .. } => {
                let d = x.norm();
                ball(0.0, d, x / d.max(f64::MIN_POSITIVE), DMatrix::identity(m, m))
            }
            DomainKind::SpaceFormBall { c, .. } => {
                let d = x.norm();
                ball(*c, d, x / d.max(f64::MIN_POSITIVE), DMatrix::identity(m, m))
            }
            DomainKind::Cylinder { s, c_fiber, .. } => {
                let mut xf = x.clone();
                xf.rows_mut(0, *s).fill(0.0);
                let d = xf.norm();
                let mut proj = DMatrix::identity(m, m);
                for i in 0..*s {
                    proj[(i, i)] = 0.0;
                }
                ball(*c_fiber, d, xf / d.max(f64::MIN_POSITIVE), proj)
            }
            DomainKind::EuclideanCone { axis, theta } => {
                let v = DVector::from_column_slice(axis);
                let a = x.dot(&v);
                let px = x - &v * a;
                let rho_ax = px.norm();
                if rho_ax < SINGULAR_TOL * x.norm().max(1.0) {
                    return Err(Error::OutsideDomain("point on the cone axis".into()));
                }
                let rhat = px / rho_ax;
                let p = DMatrix::identity(m, m) - &v * v.transpose();
                let hess = (p - &rhat * rhat.transpose()) * (-theta.cos() / rho_ax);
                Ok(DistanceData {
                    r,
                    grad: &v * theta.sin() - rhat * theta.cos(),
                    hess: SymmetricForm::new(hess)?,
                })
            }
            DomainKind::Horoball => {
                let e = unit(m, m - 1);
                let hess = -(DMatrix::identity(m, m) - &e * e.transpose());
                Ok(DistanceData {
                    r,
                    grad: e,
                    hess: SymmetricForm::new(hess)?,
                })
            }
            DomainKind::Slab { width } => {
                if r >= 0.5 * width * (1.0 - SINGULAR_TOL) {
                    return Err(Error::OutsideDomain("mid-plane of the slab".into()));
                }
                Ok(DistanceData {
                    r,
                    grad: unit(m, m - 1) * (-x[m - 1].signum()),
                    hess: SymmetricForm::zeros(m),
                })
            }
            DomainKind::DsConeRegion { .. } => unreachable!("signed_distance errors first"),
        }
    }

    /// Second fundamental form of the boundary at `y` with respect to the
    /// inward normal, in an orthonormal basis of the tangent space.
    pub fn boundary_shape_operator(&self, y: &DVector<f64>) -> Result<SymmetricForm> {
        self.check_point(y)?;
        if let DomainKind::DsConeRegion { s, c_ds } = &self.kind {
            let f = ds_cone_function(self.ambient_dim, *s, *c_ds, y)?;
            let g = f.grad.norm();
            if f.u.abs() > BOUNDARY_TOL * y.norm_squared().max(1.0) || g < SINGULAR_TOL {
                return Err(Error::OutsideDomain("not a regular boundary point".into()));
            }
            let e = complement_basis(&(&f.grad / g));
            return f.hess.restrict(&e).map(|h| h.scale(1.0 / g));
        }
        let r = self.signed_distance(y)?;
        if r.abs() > BOUNDARY_TOL * y.norm().max(1.0) {
            return Err(Error::OutsideDomain(format!(
                "point at distance {r} from the boundary"
            )));
        }
        let dd = self.distance_hessian(y)?;
        let e = complement_basis(&dd.grad);
        dd.hess.restrict(&e).map(|h| h.scale(-1.0))
    }

    /// Infimum over the boundary of `p_minus(II, ell)`.
    pub fn boundary_p_minus_inf(&self, ell: usize) -> Result<f64> {
        let m = self.ambient_dim;
        if ell == 0 || ell >= m {
            return Err(Error::param("ell", format!("must lie in 1..{m}")));
        }
        match &self.kind {
            DomainKind::EuclideanBall { rho } => Ok(1.0 / rho),
            DomainKind::SpaceFormBall { c, rho } => Ok(cot_c(*c, *rho)),
            DomainKind::Cylinder { s, rho, c_fiber } => {
                if ell <= *s {
                    Ok(0.0)
                } else {
                    cylinder_min_mean_curvature(ell, *s, *c_fiber, *rho)
                }
            }
            // eigenvalues cot(theta)/|y| decay along the boundary
            DomainKind::EuclideanCone { .. } => Ok(0.0),
            DomainKind::Horoball => Ok(1.0),
            DomainKind::Slab { .. } => Ok(0.0),
            DomainKind::DsConeRegion { .. } => Err(Error::NoClosedForm(
                "boundary infimum of the cone region".into(),
            )),
        }
    }

    /// Largest entry of `|H - H_fd|` with `H_fd` from central differences of
    /// the coordinate distance. Only meaningful in Euclidean coordinates.
    pub fn fd_hessian_defect(&self, x: &DVector<f64>, step: f64) -> Result<f64> {
        if !self.is_euclidean() {
            return Err(Error::param(
                "domain",
                "finite-difference audit needs Euclidean coordinates",
            ));
        }
        positive("step", step)?;
        let m = self.ambient_dim;
        let dd = self.distance_hessian(x)?;
        let f = |p: &DVector<f64>| self.signed_distance(p);
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let (ei, ej) = (unit(m, i) * step, unit(m, j) * step);
                let v = (f(&(x + &ei + &ej))? - f(&(x + &ei - &ej))? - f(&(x - &ei + &ej))?
                    + f(&(x - &ei - &ej))?)
                    / (4.0 * step * step);
                worst = worst.max((v - dd.hess.matrix()[(i, j)]).abs());
            }
        }
        Ok(worst)
    }
}

/// `u = |x''|^2 - c_ds |x'|^2` with derivatives.
#[derive(Debug, Clone)]
pub struct DsCone {
    pub u: f64,
    pub grad: DVector<f64>,
    pub hess: SymmetricForm,
}

pub fn ds_cone_function(m: usize, s: usize, c_ds: f64, x: &DVector<f64>) -> Result<DsCone> {
    if s < 1 || s >= m {
        return Err(Error::param("s", format!("need 1 <= s < m, got {s}")));
    }
    positive("c_ds", c_ds)?;
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    let mut u = 0.0;
    let mut grad = DVector::zeros(m);
    let mut diag = vec![0.0; m];
    for i in 0..m {
        let w = if i < s { -c_ds } else { 1.0 };
        u += w * x[i] * x[i];
        grad[i] = 2.0 * w * x[i];
        diag[i] = 2.0 * w;
    }
    Ok(DsCone {
        u,
        grad,
        hess: SymmetricForm::from_diagonal(&diag),
    })
}

/// Largest `c_ds` with `p_minus(hess u, ell) >= 0`, by bisection to `tol`.
pub fn ds_cone_threshold(m: usize, s: usize, ell: usize, tol: f64) -> Result<f64> {
    if !(s < ell && ell <= m) {
        return Err(Error::param("ell", format!("need s < ell <= m, got s={s} ell={ell} m={m}")));
    }
    let x = DVector::zeros(m);
    let sign = |c: f64| -> Result<bool> {
        let f = ds_cone_function(m, s, c, &x)?;
        Ok(p_minus(&f.hess, ell)? >= 0.0)
    };
    let (mut lo, mut hi) = (tol.min(1e-12), 1.0);
    while sign(hi)? {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::param("ell", "no sign change found"));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if sign(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `((ell - s) / ell) cn_c(r) / sn_c(r)`.
pub fn cylinder_min_mean_curvature(ell: usize, s: usize, c: f64, r: f64) -> Result<f64> {
    if ell <= s {
        return Err(Error::param("ell", format!("must exceed s = {s}")));
    }
    positive("r", r)?;
    ModelCurvature::new(c)?;
    if c < 0.0 && r >= PI / (2.0 * (-c).sqrt()) {
        return Err(Error::param("r", "must be below pi / (2 sqrt(-c))"));
    }
    Ok((ell - s) as f64 / ell as f64 * cot_c(c, r))
}

/// Graph function for [`SampleKind::Graph`].
pub type GraphFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Test submanifolds.
#[derive(Clone)]
pub enum SampleKind {
    /// Flat disk of the given radius in `R^3`; the outer ring is flagged as
    /// boundary when `with_boundary` is set.
    Plane { radius: f64, with_boundary: bool },
    /// Round sphere of radius `rho` in `R^3`.
    RoundSphere { rho: f64 },
    /// Catenoid in `R^3` with neck radius `a`, truncated at `|x| ~ extent`.
    Catenoid2d { a: f64, extent: f64 },
    /// Rotational minimal hypersurface in `R^4` with neck radius `a`.
    Catenoid3d { a: f64, extent: f64 },
    /// Graph of `f` over the square `[-half_width, half_width]^ell` in `R^(ell+1)`.
    Graph {
        ell: usize,
        half_width: f64,
        f: GraphFn,
    },
}

impl std::fmt::Debug for SampleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleKind::Plane { radius, with_boundary } => f
                .debug_struct("Plane")
                .field("radius", radius)
                .field("with_boundary", with_boundary)
                .finish(),
            SampleKind::RoundSphere { rho } => f.debug_struct("RoundSphere").field("rho", rho).finish(),
            SampleKind::Catenoid2d { a, extent } => f
                .debug_struct("Catenoid2d")
                .field("a", a)
                .field("extent", extent)
                .finish(),
            SampleKind::Catenoid3d { a, extent } => f
                .debug_struct("Catenoid3d")
                .field("a", a)
                .field("extent", extent)
                .finish(),
            SampleKind::Graph { ell, half_width, .. } => f
                .debug_struct("Graph")
                .field("ell", ell)
                .field("half_width", half_width)
                .finish_non_exhaustive(),
        }
    }
}

/// Weighted points with tangent frames approximating the area measure.
#[derive(Debug, Clone)]
pub struct SubmanifoldSample {
    pub ell: usize,
    pub ambient_dim: usize,
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    /// `ambient_dim x ell` orthonormal frames.
    pub frames: Vec<DMatrix<f64>>,
    pub boundary: Vec<bool>,
    /// Normalized mean curvature vector per point, when known.
    pub mean_curvature: Option<Vec<DVector<f64>>>,
}

impl SubmanifoldSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest `|H|` over the sample, if mean curvature is attached.
    pub fn max_mean_curvature(&self) -> Option<f64> {
        self.mean_curvature
            .as_ref()
            .map(|h| h.iter().map(|v| v.norm()).fold(0.0, f64::max))
    }
}

fn check_resolution(resolution: usize, min: usize, max: usize) -> Result<()> {
    if resolution < min || resolution > max {
        return Err(Error::param(
            "resolution",
            format!("must lie in {min}..={max}, got {resolution}"),
        ));
    }
    Ok(())
}

/// Samples a test submanifold. The meaning of `resolution` is per kind:
/// rings for the plane, total points for the sphere, profile cells for the
/// catenoids and grid cells per side for graphs.
pub fn sample_submanifold(kind: &SampleKind, resolution: usize) -> Result<SubmanifoldSample> {
    match kind {
        SampleKind::Plane { radius, with_boundary } => {
            positive("radius", *radius)?;
            check_resolution(resolution, 2, 20_000)?;
            Ok(sample_plane(*radius, *with_boundary, resolution))
        }
        SampleKind::RoundSphere { rho } => {
            positive("rho", *rho)?;
            check_resolution(resolution, 32, 20_000_000)?;
            Ok(sample_sphere(*rho, resolution))
        }
        SampleKind::Catenoid2d { a, extent } => {
            positive("a", *a)?;
            positive("extent", *extent)?;
            if *extent <= 2.0 * a {
                return Err(Error::param("extent", "must exceed twice the neck radius"));
            }
            check_resolution(resolution, 8, 100_000)?;
            Ok(sample_catenoid2d(*a, *extent, resolution))
        }
        SampleKind::Catenoid3d { a, extent } => {
            positive("a", *a)?;
            positive("extent", *extent)?;
            if *extent <= 2.0 * a {
                return Err(Error::param("extent", "must exceed twice the neck radius"));
            }
            check_resolution(resolution, 8, 10_000)?;
            sample_catenoid3d(*a, *extent, resolution)
        }
        SampleKind::Graph { ell, half_width, f } => {
            positive("half_width", *half_width)?;
            if *ell < 1 || *ell > 3 {
                return Err(Error::param("ell", "graphs of dimension 1..=3 are supported"));
            }
            check_resolution(resolution, 2, if *ell == 3 { 200 } else { 2000 })?;
            Ok(sample_graph(*ell, *half_width, f.as_ref(), resolution))
        }
    }
}

fn sample_plane(radius: f64, with_boundary: bool, rings: usize) -> SubmanifoldSample {
    let dr = radius / rings as f64;
    let mut s = empty_sample(2, 3);
    let frame = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    for k in 0..rings {
        let rc = (k as f64 + 0.5) * dr;
        let n = ((2.0 * PI * rc / dr).round() as usize).max(6);
        let area = PI * ((rc + 0.5 * dr).powi(2) - (rc - 0.5 * dr).powi(2));
        let offset = if k % 2 == 0 { 0.0 } else { 0.5 };
        for j in 0..n {
            let phi = 2.0 * PI * (j as f64 + offset) / n as f64;
            s.points.push(DVector::from_vec(vec![rc * phi.cos(), rc * phi.sin(), 0.0]));
            s.weights.push(area / n as f64);
            s.frames.push(frame.clone());
            s.boundary.push(with_boundary && k + 1 == rings);
        }
    }
    s.mean_curvature = Some(vec![DVector::zeros(3); s.points.len()]);
    s
}

fn empty_sample(ell: usize, m: usize) -> SubmanifoldSample {
    SubmanifoldSample {
        ell,
        ambient_dim: m,
        points: Vec::new(),
        weights: Vec::new(),
        frames: Vec::new(),
        boundary: Vec::new(),
        mean_curvature: None,
    }
}

fn sample_sphere(rho: f64, n_points: usize) -> SubmanifoldSample {
    let n_lat = ((n_points as f64 / 2.0).sqrt().round() as usize).max(4);
    let n_lon = 2 * n_lat;
    let dth = PI / n_lat as f64;
    let dph = 2.0 * PI / n_lon as f64;
    let mut s = empty_sample(2, 3);
    let mut h = Vec::with_capacity(n_lat * n_lon);
    for i in 0..n_lat {
        let (t0, t1) = (i as f64 * dth, (i + 1) as f64 * dth);
        let th = 0.5 * (t0 + t1);
        let area = rho * rho * (t0.cos() - t1.cos()) * dph;
        for j in 0..n_lon {
            let ph = (j as f64 + 0.5) * dph;
            let x = DVector::from_vec(vec![
                rho * th.sin() * ph.cos(),
                rho * th.sin() * ph.sin(),
                rho * th.cos(),
            ]);
            let e_th = [th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin()];
            let e_ph = [-ph.sin(), ph.cos(), 0.0];
            s.frames.push(DMatrix::from_column_slice(
                3,
                2,
                &[e_th[0], e_th[1], e_th[2], e_ph[0], e_ph[1], e_ph[2]],
            ));
            h.push(&x * (-1.0 / (rho * rho)));
            s.points.push(x);
            s.weights.push(area);
            s.boundary.push(false);
        }
    }
    s.mean_curvature = Some(h);
    s
}

/// Fibonacci points on the unit 2-sphere.
fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Profile curve `s -> (rho, z, phi)` of a rotational hypersurface, with the
/// tangent angle `phi`, sampled with central-difference neighbors.
struct Profile {
    s: Vec<f64>,
    rho: Vec<f64>,
    z: Vec<f64>,
    phi: Vec<f64>,
    /// Profile curvature estimated from the positions at `s +- h`.
    kappa_fd: Vec<f64>,
}

const PROFILE_FD_STEP: f64 = 1e-3;

/// Curvature of a plane curve from three equally spaced samples by
/// arclength, signed with respect to the normal `(-sin phi, cos phi)`.
fn fd_curvature(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64), h: f64, phi: f64) -> f64 {
    let ddr = (p2.0 - 2.0 * p1.0 + p0.0) / (h * h);
    let ddz = (p2.1 - 2.0 * p1.1 + p0.1) / (h * h);
    -phi.sin() * ddr + phi.cos() * ddz
}

fn catenoid2d_profile(a: f64, s_nodes: &[f64]) -> Profile {
    let pos = |s: f64| ((a * a + s * s).sqrt(), a * (s / a).asinh());
    let h = PROFILE_FD_STEP;
    let mut p = Profile {
        s: Vec::new(),
        rho: Vec::new(),
        z: Vec::new(),
        phi: Vec::new(),
        kappa_fd: Vec::new(),
    };
    for &s in s_nodes {
        let (rho, z) = pos(s);
        // tangent (s, a) / rho
        let phi = a.atan2(s);
        p.kappa_fd.push(fd_curvature(pos(s - h), (rho, z), pos(s + h), h, phi));
        p.s.push(s);
        p.rho.push(rho);
        p.z.push(z);
        p.phi.push(phi);
    }
    p
}

/// Integrates `rho' = cos phi, z' = sin phi, phi' = -k sin(phi) / rho` from
/// the neck `(a, 0, pi/2)`, for the minimal hypersurface of revolution with
/// `k` rotational directions, at the positive nodes `s_nodes`.
fn rotational_profile(a: f64, k: f64, s_nodes: &[f64]) -> Result<Profile> {
    let h = PROFILE_FD_STEP;
    let mut eval: Vec<f64> = Vec::with_capacity(3 * s_nodes.len());
    for &s in s_nodes {
        eval.extend_from_slice(&[s - h, s, s + h]);
    }
    let s_end = *eval.last().unwrap_or(&1.0);
    let opts = OdeOptions {
        rtol: 1e-12,
        atol: 1e-13,
        ..Default::default()
    };
    let sol = integrate(
        |_, y, dy| {
            dy[0] = y[2].cos();
            dy[1] = y[2].sin();
            dy[2] = -k * y[2].sin() / y[0];
        },
        0.0,
        &[a, 0.0, PI / 2.0],
        s_end,
        &opts,
        &eval,
        |_, _| StepAction::Continue,
    )?;
    // sol.y[0] is the initial state; then triples per node
    let mut p = Profile {
        s: Vec::new(),
        rho: Vec::new(),
        z: Vec::new(),
        phi: Vec::new(),
        kappa_fd: Vec::new(),
    };
    for (i, &s) in s_nodes.iter().enumerate() {
        let y0 = &sol.y[1 + 3 * i];
        let y1 = &sol.y[2 + 3 * i];
        let y2 = &sol.y[3 + 3 * i];
        p.kappa_fd
            .push(fd_curvature((y0[0], y0[1]), (y1[0], y1[1]), (y2[0], y2[1]), h, y1[2]));
        p.s.push(s);
        p.rho.push(y1[0]);
        p.z.push(y1[1]);
        p.phi.push(y1[2]);
    }
    Ok(p)
}

fn sample_catenoid2d(a: f64, extent: f64, cells: usize) -> SubmanifoldSample {
    // arclength at which rho reaches `extent`
    let s_max = (extent * extent - a * a).sqrt();
    let ds = 2.0 * s_max / cells as f64;
    let nodes: Vec<f64> = (0..cells).map(|i| -s_max + (i as f64 + 0.5) * ds).collect();
    let prof = catenoid2d_profile(a, &nodes);
    let mut out = empty_sample(2, 3);
    let mut hv = Vec::new();
    for i in 0..nodes.len() {
        let (rho, z, phi) = (prof.rho[i], prof.z[i], prof.phi[i]);
        let n_ring = ((2.0 * PI * rho / ds).round() as usize).max(8);
        let w = ds * 2.0 * PI * rho / n_ring as f64;
        // normalized mean curvature from the discrete profile curvature and
        // the rotational curvature sin(phi) / rho
        let hm = 0.5 * (prof.kappa_fd[i] + phi.sin() / rho);
        let offset = if i % 2 == 0 { 0.0 } else { 0.5 };
        for j in 0..n_ring {
            let th = 2.0 * PI * (j as f64 + offset) / n_ring as f64;
            let (c, s) = (th.cos(), th.sin());
            out.points.push(DVector::from_vec(vec![rho * c, rho * s, z]));
            let t = [phi.cos() * c, phi.cos() * s, phi.sin()];
            out.frames.push(DMatrix::from_column_slice(3, 2, &[t[0], t[1], t[2], -s, c, 0.0]));
            out.weights.push(w);
            out.boundary.push(false);
            hv.push(DVector::from_vec(vec![-phi.sin() * c, -phi.sin() * s, phi.cos()]) * hm);
        }
    }
    out.mean_curvature = Some(hv);
    out
}

/// Profile shells per point spacing in [`sample_catenoid3d`].
const SHELLS_PER_SPACING: usize = 16;

fn sample_catenoid3d(a: f64, extent: f64, cells: usize) -> Result<SubmanifoldSample> {
    // Points are spread with spacing `h = extent / half` but the profile is
    // cut into shells `SHELLS_PER_SPACING` times thinner, so that the mass of
    // concentric balls is resolved finely without more points.
    // rho(s) <= a + s, and rho(s) >= s - C for a bounded C; integrate until
    // rho reaches the extent by extending the nodes if necessary
    let half = cells.div_ceil(2);
    let shells = half * SHELLS_PER_SPACING;
    let mut s_max = extent;
    let mut prof;
    loop {
        let ds = s_max / shells as f64;
        let nodes: Vec<f64> = (0..shells).map(|i| (i as f64 + 0.5) * ds).collect();
        prof = rotational_profile(a, 2.0, &nodes)?;
        let last_rho = *prof.rho.last().unwrap_or(&0.0);
        if last_rho + 0.5 * ds >= extent {
            break;
        }
        s_max += extent - last_rho;
    }
    let ds = s_max / shells as f64;
    let h = ds * SHELLS_PER_SPACING as f64;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut out = empty_sample(3, 4);
    let mut hv = Vec::new();
    for i in 0..prof.s.len() {
        let (rho, z, phi) = (prof.rho[i], prof.z[i], prof.phi[i]);
        let area = 4.0 * PI * rho * rho;
        let n_sph = ((area * ds / (h * h * h)).round() as usize).max(6);
        let w = ds * area / n_sph as f64;
        let hm = (prof.kappa_fd[i] + 2.0 * phi.sin() / rho) / 3.0;
        // rotate successive shells about the x3 axis
        let (rc, rs) = ((golden * i as f64).cos(), (golden * i as f64).sin());
        for om in fibonacci_sphere(n_sph) {
            let om = [rc * om[0] - rs * om[1], rs * om[0] + rc * om[1], om[2]];
            let omv = DVector::from_column_slice(&om);
            let tb = complement_basis(&omv);
            for sign in [1.0, -1.0] {
                // reflection z -> -z maps the profile angle phi to -phi
                let x = DVector::from_vec(vec![rho * om[0], rho * om[1], rho * om[2], sign * z]);
                let t = [phi.cos() * om[0], phi.cos() * om[1], phi.cos() * om[2], sign * phi.sin()];
                let f = DMatrix::from_column_slice(
                    4,
                    3,
                    &[
                        t[0], t[1], t[2], t[3],
                        tb[(0, 0)], tb[(1, 0)], tb[(2, 0)], 0.0,
                        tb[(0, 1)], tb[(1, 1)], tb[(2, 1)], 0.0,
                    ],
                );
                let n = DVector::from_vec(vec![
                    -phi.sin() * om[0],
                    -phi.sin() * om[1],
                    -phi.sin() * om[2],
                    sign * phi.cos(),
                ]);
                out.points.push(x);
                out.frames.push(f);
                out.weights.push(w);
                out.boundary.push(false);
                hv.push(n * hm);
            }
        }
    }
    out.mean_curvature = Some(hv);
    Ok(out)
}

fn sample_graph(ell: usize, half_width: f64, f: &(dyn Fn(&[f64]) -> f64 + Send + Sync), n: usize) -> SubmanifoldSample {
    let m = ell + 1;
    let dx = 2.0 * half_width / n as f64;
    let cell = dx.powi(ell as i32);
    let h = 1e-5 * half_width.max(1.0);
    let mut out = empty_sample(ell, m);
    let total = n.pow(ell as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut u = vec![0.0; ell];
        let mut on_edge = false;
        for ui in u.iter_mut() {
            let k = rem % n;
            rem /= n;
            on_edge |= k == 0 || k + 1 == n;
            *ui = -half_width + (k as f64 + 0.5) * dx;
        }
        let fu = f(&u);
        let mut grad = vec![0.0; ell];
        for i in 0..ell {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += h;
            um[i] -= h;
            grad[i] = (f(&up) - f(&um)) / (2.0 * h);
        }
        let mut x = DVector::zeros(m);
        x.rows_mut(0, ell).copy_from_slice(&u);
        x[ell] = fu;
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(ell);
        let mut jac = DMatrix::zeros(m, ell);
        for i in 0..ell {
            jac[(i, i)] = 1.0;
            jac[(ell, i)] = grad[i];
        }
        for i in 0..ell {
            let mut v = jac.column(i).into_owned();
            for c in &cols {
                v -= c * c.dot(&v);
            }
            cols.push(v.normalize());
        }
        let area = (jac.transpose() * &jac).determinant().sqrt();
        out.points.push(x);
        out.frames.push(DMatrix::from_columns(&cols));
        out.weights.push(cell * area);
        out.boundary.push(on_edge);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelspace::riccati_closed_form;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn sorted_eigs(a: &SymmetricForm) -> Vec<f64> {
        a.eigenvalues()
    }

    #[test]
    fn ball_shape_operator_and_hessian() {
        let d = DomainSpec::new(DomainKind::EuclideanBall { rho: 2.0 }, 3).unwrap();
        let ii = d.boundary_shape_operator(&v(&[0.0, 2.0, 0.0])).unwrap();
        assert!((ii.matrix() - DMatrix::identity(2, 2) * 0.5).norm() < 1e-14);
        let dd = d.distance_hessian(&v(&[1.0, 0.0, 0.0])).unwrap();
        assert!((dd.r - 1.0).abs() < 1e-15);
        let e = sorted_eigs(&dd.hess);
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] + 1.0).abs() < 1e-14 && e[2].abs() < 1e-14);
        assert!(d.boundary_shape_operator(&v(&[0.0, 1.0, 0.0])).is_err());
        assert!(d.distance_hessian(&v(&[3.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn cylinder_shape_operator() {
        let rho = 1.5;
        let d = DomainSpec::new(DomainKind::Cylinder { s: 1, rho, c_fiber: 0.0 }, 4).unwrap();
        let ii = d.boundary_shape_operator(&v(&[3.0, 0.0, rho, 0.0])).unwrap();
        let e = sorted_eigs(&ii);
        assert!(e[0].abs() < 1e-14);
        assert!((e[1] - 1.0 / rho).abs() < 1e-14 && (e[2] - 1.0 / rho).abs() < 1e-14);
    }

    #[test]
    fn cone_shape_operator() {
        let theta: f64 = 0.6;
        let d = DomainSpec::new(
            DomainKind::EuclideanCone { axis: vec![0.0, 0.0, 0.0, 1.0], theta },
            4,
        )
        .unwrap();
        let ny = 2.5;
        let y = v(&[ny * theta.sin(), 0.0, 0.0, ny * theta.cos()]);
        let e = sorted_eigs(&d.boundary_shape_operator(&y).unwrap());
        assert!(e[0].abs() < 1e-13);
        for ev in &e[1..] {
            assert!((ev - 1.0 / theta.tan() / ny).abs() < 1e-13);
        }
    }

    #[test]
    fn horoball_and_slab() {
        let d = DomainSpec::new(DomainKind::Horoball, 3).unwrap();
        let ii = d.boundary_shape_operator(&v(&[0.3, -1.0, 1.0])).unwrap();
        assert!((ii.matrix() - DMatrix::identity(2, 2)).norm() < 1e-14);
        let s = DomainSpec::new(DomainKind::Slab { width: 4.0 }, 3).unwrap();
        let dd = s.distance_hessian(&v(&[5.0, 1.0, 0.5])).unwrap();
        assert_eq!(dd.hess.matrix().norm(), 0.0);
        assert!((dd.r - 1.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_in_kernel_and_fd_audit() {
        let domains = [
            (DomainSpec::new(DomainKind::EuclideanBall { rho: 2.0 }, 3).unwrap(), v(&[0.4, -0.7, 0.5])),
            (
                DomainSpec::new(DomainKind::Cylinder { s: 2, rho: 1.0, c_fiber: 0.0 }, 4).unwrap(),
                v(&[3.0, -1.0, 0.3, 0.4]),
            ),
            (
                DomainSpec::new(
                    DomainKind::EuclideanCone { axis: vec![0.0, 0.0, 1.0], theta: 0.7 },
                    3,
                )
                .unwrap(),
                v(&[0.3, 0.2, 2.0]),
            ),
            (DomainSpec::new(DomainKind::Slab { width: 3.0 }, 3).unwrap(), v(&[1.0, 2.0, 0.4])),
        ];
        for (d, x) in &domains {
            let dd = d.distance_hessian(x).unwrap();
            assert!((dd.hess.matrix() * &dd.grad).norm() < 1e-10);
            assert!(d.fd_hessian_defect(x, 1e-4).unwrap() < 1e-5);
        }
        let h = DomainSpec::new(DomainKind::Horoball, 3).unwrap();
        assert!(h.fd_hessian_defect(&v(&[0.0, 0.0, 2.0]), 1e-4).is_err());
    }

    #[test]
    fn ball_hessian_saturates_comparison() {
        for (c, rho) in [(0.0, 2.0), (1.0, 1.0), (-1.0, 1.2), (0.5, 3.0)] {
            let d = DomainSpec::new(DomainKind::SpaceFormBall { c, rho }, 4).unwrap();
            let lam = d.boundary_p_minus_inf(2).unwrap();
            for r in [0.1, 0.5, 0.9 * rho] {
                let x = d.inward_ray(r).unwrap();
                let dd = d.distance_hessian(&x).unwrap();
                let e = complement_basis(&dd.grad);
                let pm = p_minus(&dd.hess.restrict(&e).unwrap(), 2).unwrap();
                let f = riccati_closed_form(-lam, ModelCurvature::new(c).unwrap(), r).unwrap();
                assert!((pm - f).abs() < 1e-10 * f.abs().max(1.0), "c={c} r={r}");
            }
        }
    }

    #[test]
    fn ds_cone_examples() {
        let f = ds_cone_function(4, 1, 1.0, &DVector::zeros(4)).unwrap();
        assert_eq!(f.u, 0.0);
        assert_eq!(f.grad.norm(), 0.0);
        assert!(p_minus(&f.hess, 2).unwrap().abs() < 1e-15);
        let t = ds_cone_threshold(4, 1, 2, 1e-12).unwrap();
        assert!((t - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ds_cone_boundary_shape_operator() {
        let d = DomainSpec::new(DomainKind::DsConeRegion { s: 1, c_ds: 1.0 }, 3).unwrap();
        let y = v(&[1.0, 0.6, 0.8]);
        let ii = d.boundary_shape_operator(&y).unwrap();
        assert_eq!(ii.dim(), 2);
        assert!(matches!(d.distance_hessian(&y), Err(Error::NoClosedForm(_))));
    }

    #[test]
    fn cylinder_bound_examples() {
        assert!((cylinder_min_mean_curvature(2, 1, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let v = cylinder_min_mean_curvature(3, 1, 1.0, 1.0).unwrap();
        assert!((v - 2.0 / 3.0 / 1f64.tanh()).abs() < 1e-12);
        assert!((v - 0.875_357).abs() < 1e-6);
        assert!(cylinder_min_mean_curvature(1, 1, 0.0, 1.0).is_err());
        assert!(cylinder_min_mean_curvature(2, 1, -1.0, 2.0).is_err());
    }

    #[test]
    fn sphere_area() {
        let s = sample_submanifold(&SampleKind::RoundSphere { rho: 1.0 }, 10_000).unwrap();
        assert!((s.total_weight() - 4.0 * PI).abs() < 1e-10);
        for f in &s.frames {
            assert!((f.transpose() * f - DMatrix::identity(2, 2)).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_area_exact() {
        let s = sample_submanifold(&SampleKind::Plane { radius: 3.0, with_boundary: true }, 30).unwrap();
        assert!((s.total_weight() - 9.0 * PI).abs() < 1e-10);
        assert!(s.boundary.iter().any(|b| *b));
    }

    #[test]
    fn catenoids_are_nearly_minimal() {
        let c2 = sample_submanifold(&SampleKind::Catenoid2d { a: 1.0, extent: 20.0 }, 200).unwrap();
        assert!(c2.max_mean_curvature().unwrap() < 5e-2);
        let c3 = sample_submanifold(&SampleKind::Catenoid3d { a: 1.0, extent: 10.0 }, 40).unwrap();
        assert!(c3.max_mean_curvature().unwrap() < 5e-2);
        let zmax = c3.points.iter().map(|p| p[3].abs()).fold(0.0, f64::max);
        assert!(zmax < 1.32, "{zmax}");
        for f in c3.frames.iter().take(500) {
            assert!((f.transpose() * f - DMatrix::identity(3, 3)).norm() < 1e-8);
        }
    }

    #[test]
    fn graph_of_plane_has_flat_area() {
        let g = SampleKind::Graph {
            ell: 2,
            half_width: 1.0,
            f: Arc::new(|u: &[f64]| 0.5 * u[0] - 0.25 * u[1]),
        };
        let s = sample_submanifold(&g, 20).unwrap();
        let exact = 4.0 * (1.0f64 + 0.25 + 0.0625).sqrt();
        assert!((s.total_weight() - exact).abs() < 1e-8);
    }
}
