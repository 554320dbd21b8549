//! Discrete varifolds: weighted points carrying one tangent `l`-plane each.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domains::SubmanifoldSample;
use crate::error::{Error, Result};

/// Frames must be orthonormal to this tolerance.
pub const FRAME_TOL: f64 = 1e-8;

/// Weighted `(point, plane)` atoms with a boundary support mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteVarifold {
    ell: usize,
    ambient_dim: usize,
    points: Vec<DVector<f64>>,
    weights: Vec<f64>,
    frames: Vec<DMatrix<f64>>,
    boundary: Vec<bool>,
    rectifiable: bool,
}

impl DiscreteVarifold {
    pub fn new(
        ell: usize,
        ambient_dim: usize,
        points: Vec<DVector<f64>>,
        weights: Vec<f64>,
        frames: Vec<DMatrix<f64>>,
        boundary: Vec<bool>,
    ) -> Result<Self> {
        if ell == 0 || ell >= ambient_dim {
            return Err(Error::param(
                "ell",
                format!("need 1 <= ell < m = {ambient_dim}, got {ell}"),
            ));
        }
        let n = points.len();
        for len in [weights.len(), frames.len(), boundary.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        for (i, ((p, w), f)) in points.iter().zip(&weights).zip(&frames).enumerate() {
            if p.len() != ambient_dim || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("points", format!("point {i} is malformed")));
            }
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::param("weights", format!("weight {i} must be positive")));
            }
            if f.nrows() != ambient_dim || f.ncols() != ell {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim * ell,
                    got: f.nrows() * f.ncols(),
                });
            }
            let defect = (f.transpose() * f - DMatrix::<f64>::identity(ell, ell)).amax();
            if defect > FRAME_TOL {
                return Err(Error::NotOrthonormal(format!("frame {i}: defect {defect:e}")));
            }
        }
        Ok(DiscreteVarifold {
            ell,
            ambient_dim,
            points,
            weights,
            frames,
            boundary,
            rectifiable: true,
        })
    }

    pub fn from_sample(s: &SubmanifoldSample) -> Result<Self> {
        DiscreteVarifold::new(
            s.ell,
            s.ambient_dim,
            s.points.clone(),
            s.weights.clone(),
            s.frames.clone(),
            s.boundary.clone(),
        )
    }

    /// Radially symmetric synthetic varifold along the first axis with
    /// prescribed cumulative masses: `mass(B_r) = masses[k]` for
    /// `radii[k] < r <= radii[k + 1]`.
    pub fn synthetic_radial(ell: usize, ambient_dim: usize, radii: &[f64], masses: &[f64]) -> Result<Self> {
        if radii.len() != masses.len() || radii.is_empty() {
            return Err(Error::param("masses", "need one mass per radius"));
        }
        let frame = DMatrix::from_fn(ambient_dim, ell, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut prev = 0.0;
        for (r, m) in radii.iter().zip(masses) {
            let w = m - prev;
            if !(w > 0.0) {
                return Err(Error::param("masses", "must be strictly increasing and positive"));
            }
            let mut p = DVector::zeros(ambient_dim);
            p[0] = *r;
            points.push(p);
            weights.push(w);
            prev = *m;
        }
        let n = points.len();
        DiscreteVarifold::new(ell, ambient_dim, points, weights, vec![frame; n], vec![false; n])
    }

    pub fn with_rectifiable(mut self, flag: bool) -> Self {
        self.rectifiable = flag;
        self
    }

    pub fn ell(&self) -> usize {
        self.ell
    }
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn frames(&self) -> &[DMatrix<f64>] {
        &self.frames
    }
    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }
    pub fn is_rectifiable(&self) -> bool {
        self.rectifiable
    }

    /// Total mass.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let m = self.ambient_dim;
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for p in &self.points {
            for i in 0..m {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// Default finite-difference step `1e-5 * bbox diagonal`.
    pub fn default_fd_step(&self) -> f64 {
        1e-5 * self.bbox_diagonal().max(1e-300)
    }

    /// Rescales points by `lambda` and weights by `lambda^ell`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        let f = lambda.powi(self.ell as i32);
        DiscreteVarifold::new(
            self.ell,
            self.ambient_dim,
            self.points.iter().map(|p| p * lambda).collect(),
            self.weights.iter().map(|w| w * f).collect(),
            self.frames.clone(),
            self.boundary.clone(),
        )
    }
}

pub type FieldFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Vector field vanishing outside `B(center, support_radius)`.
#[derive(Clone)]
pub struct TestField {
    pub center: DVector<f64>,
    pub support_radius: f64,
    z: FieldFn,
}

impl std::fmt::Debug for TestField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestField")
            .field("center", &self.center)
            .field("support_radius", &self.support_radius)
            .finish_non_exhaustive()
    }
}

/// `exp(1 - 1 / (1 - s^2))` for `s < 1`, zero otherwise.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl TestField {
    /// Wraps `z`, which the caller guarantees vanishes outside the ball.
    pub fn new(
        center: DVector<f64>,
        support_radius: f64,
        z: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(support_radius > 0.0) {
            return Err(Error::param("support_radius", "must be positive"));
        }
        Ok(TestField {
            center,
            support_radius,
            z: Arc::new(z),
        })
    }

    /// `f(x) * bump(|x - center| / radius)`.
    pub fn smooth_bump(
        center: DVector<f64>,
        radius: f64,
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        let c = center.clone();
        TestField::new(center, radius, move |x| f(x) * bump((x - &c).norm() / radius))
    }

    /// Affine field `(A x + b) * bump` with entries uniform in `[-1, 1]`.
    pub fn random_affine<R: Rng>(rng: &mut R, center: DVector<f64>, radius: f64) -> Result<Self> {
        let m = center.len();
        let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        TestField::smooth_bump(center, radius, move |x| &a * x + &b)
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        if (x - &self.center).norm() >= self.support_radius {
            return DVector::zeros(x.len());
        }
        (self.z)(x)
    }

    /// Linear combination `a Z1 + b Z2` supported on the union of supports.
    pub fn combine(a: f64, z1: &TestField, b: f64, z2: &TestField) -> Result<Self> {
        let d = (&z1.center - &z2.center).norm();
        let radius = (z1.support_radius).max(d + z2.support_radius);
        let (f1, f2) = (z1.clone(), z2.clone());
        TestField::new(z1.center.clone(), radius, move |x| f1.eval(x) * a + f2.eval(x) * b)
    }
}

/// Tangential divergence of `z` at `p` over the orthonormal frame.
pub fn tangential_divergence(z: &TestField, p: &DVector<f64>, frame: &DMatrix<f64>, h: f64) -> f64 {
    let mut div = 0.0;
    for e in frame.column_iter() {
        let e = e.into_owned();
        let zp = z.eval(&(p + &e * h));
        let zm = z.eval(&(p - &e * h));
        div += (zp - zm).dot(&e) / (2.0 * h);
    }
    div
}

/// `delta V(Z) = sum_i w_i div_{W_i} Z(p_i)` by central differences.
///
/// Per-point terms are evaluated in parallel and summed in index order.
pub fn first_variation(v: &DiscreteVarifold, z: &TestField, fd_step: f64) -> Result<f64> {
    if !(fd_step > 0.0) || !fd_step.is_finite() {
        return Err(Error::param("fd_step", format!("must be positive, got {fd_step}")));
    }
    if z.center.len() != v.ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: v.ambient_dim,
            got: z.center.len(),
        });
    }
    let reach = z.support_radius + fd_step;
    let terms: Vec<f64> = (0..v.len())
        .into_par_iter()
        .map(|i| {
            let p = &v.points[i];
            if (p - &z.center).norm() >= reach {
                0.0
            } else {
                v.weights[i] * tangential_divergence(z, p, &v.frames[i], fd_step)
            }
        })
        .collect();
    Ok(terms.iter().sum())
}

/// `sum_i w_i <H(p_i), Z(p_i)>` for a given mean curvature vector field.
pub fn mean_curvature_pairing(v: &DiscreteVarifold, h: &[DVector<f64>], z: &TestField) -> Result<f64> {
    if h.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            got: h.len(),
        });
    }
    let terms: Vec<f64> = (0..v.len())
        .into_par_iter()
        .map(|i| v.weights[i] * h[i].dot(&z.eval(&v.points[i])))
        .collect();
    Ok(terms.iter().sum())
}

/// `sum_i w_i |Z(p_i)|`.
pub fn field_mass(v: &DiscreteVarifold, z: &TestField) -> f64 {
    let terms: Vec<f64> = (0..v.len())
        .into_par_iter()
        .map(|i| v.weights[i] * z.eval(&v.points[i]).norm())
        .collect();
    terms.iter().sum()
}

/// Largest nearest-neighbour distance from a boundary point to the rest of
/// the cloud; zero without boundary.
pub fn boundary_ring(v: &DiscreteVarifold) -> f64 {
    let idx: Vec<usize> = (0..v.len()).filter(|&i| v.boundary[i]).collect();
    idx.par_iter()
        .map(|&i| {
            (0..v.len())
                .filter(|&j| j != i)
                .map(|j| (&v.points[i] - &v.points[j]).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|d| d.is_finite())
        .reduce(|| 0.0, f64::max)
}

/// Errors if the support of `z` comes within one ring of a boundary point.
pub fn check_off_boundary(v: &DiscreteVarifold, z: &TestField, ring: f64) -> Result<()> {
    for (i, p) in v.points.iter().enumerate() {
        if v.boundary[i] && (p - &z.center).norm() < z.support_radius + ring {
            return Err(Error::FieldTouchesBoundary { index: i });
        }
    }
    Ok(())
}

/// Outcome of [`check_mean_curvature_bound`].
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheckReport {
    pub h: f64,
    /// `delta V(Z) + l h sum_i w_i |Z(p_i)|` per field.
    pub values: Vec<f64>,
    pub min: f64,
    pub mass: f64,
}

impl BoundCheckReport {
    /// `min >= -tol * mass`.
    pub fn consistent(&self, tol: f64) -> bool {
        self.min >= -tol * self.mass
    }
}

/// Evaluates `delta V(Z) + l h int |Z|` over a family of fields.
pub fn check_mean_curvature_bound(
    v: &DiscreteVarifold,
    h: f64,
    fields: &[TestField],
    fd_step: f64,
) -> Result<BoundCheckReport> {
    if !(h >= 0.0) {
        return Err(Error::param("h", "must be >= 0"));
    }
    if fields.is_empty() {
        return Err(Error::param("fields", "need at least one field"));
    }
    let ring = boundary_ring(v);
    for z in fields {
        check_off_boundary(v, z, ring)?;
    }
    let ell = v.ell as f64;
    let mut values = Vec::with_capacity(fields.len());
    for z in fields {
        values.push(first_variation(v, z, fd_step)? + ell * h * field_mass(v, z));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BoundCheckReport {
        h,
        values,
        min,
        mass: v.mass(),
    })
}

/// `mass(B_r(center))` for each radius, counting points with `|p - c| < r`.
pub fn mass_in_balls(v: &DiscreteVarifold, radii: &[f64], center: &DVector<f64>) -> Result<Vec<f64>> {
    if radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("radii", "must be sorted ascending"));
    }
    if center.len() != v.ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: v.ambient_dim,
            got: center.len(),
        });
    }
    let mut pairs: Vec<(f64, f64)> = v
        .points
        .iter()
        .zip(&v.weights)
        .map(|(p, w)| ((p - center).norm(), *w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut prefix = Vec::with_capacity(pairs.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for (_, w) in &pairs {
        acc += w;
        prefix.push(acc);
    }
    Ok(radii
        .iter()
        .map(|r| prefix[pairs.partition_point(|(d, _)| d < r)])
        .collect())
}

/// Verdict of an extrapolated diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub value: bool,
    /// In `[0, 1]`; distance of the fitted quantity from the threshold in
    /// units of its uncertainty, squashed.
    pub confidence: f64,
    pub method: &'static str,
}

/// Outcome of [`growth_diagnostics`].
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    /// Slope of `log mass` against `log r`.
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub d0_estimate: f64,
    /// Trapezoid estimate of `int r dr / mass(B_r)` over the radii.
    pub partial_integral: f64,
    /// Power-law tail beyond the last radius; infinite when divergent.
    pub tail_integral: f64,
    pub parabolic: Verdict,
    /// Slope of `log log mass` against `log r`.
    pub log_mass_exponent: f64,
    pub stochastically_complete: Verdict,
}

/// Margin on fitted exponents before a verdict flips.
pub const EXPONENT_MARGIN: f64 = 0.1;

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum();
    let stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, icpt, stderr)
}

fn confidence(distance: f64, stderr: f64) -> f64 {
    1.0 - (-distance.abs() / stderr.max(0.05)).exp()
}

/// `liminf log mass / r^(2 - sigma - alpha)` estimated as a minimum over the
/// upper half of the radii (with `log r` in place of the power when
/// `alpha = 2 - sigma`).
pub fn d0_estimate(radii: &[f64], masses: &[f64], sigma: f64, alpha: f64) -> Result<f64> {
    let p = 2.0 - sigma - alpha;
    if p < -1e-12 {
        return Err(Error::param("alpha", "must not exceed 2 - sigma"));
    }
    let start = radii.len() / 2;
    let mut best = f64::INFINITY;
    for (r, m) in radii.iter().zip(masses).skip(start) {
        if *m <= 0.0 {
            continue;
        }
        let den = if p.abs() <= 1e-12 { r.ln() } else { r.powf(p) };
        if den > 0.0 {
            best = best.min(m.ln() / den);
        }
    }
    if !best.is_finite() {
        return Err(Error::EmptyRegion("no usable radius in the upper half".into()));
    }
    Ok(best)
}

/// Growth exponent, `d0` and the parabolicity and stochastic-completeness
/// verdicts from masses of concentric balls.
pub fn growth_diagnostics(
    v: &DiscreteVarifold,
    sigma: f64,
    alpha: f64,
    radii: &[f64],
    center: &DVector<f64>,
) -> Result<GrowthReport> {
    if !(0.0..=2.0).contains(&sigma) {
        return Err(Error::param("sigma", "must lie in [0, 2]"));
    }
    if radii.len() < 3 || radii[0] <= 0.0 {
        return Err(Error::param("radii", "need at least three positive radii"));
    }
    if radii[radii.len() - 1] < (10.0 - 1e-9) * radii[0] {
        return Err(Error::param("radii", "must span at least one decade"));
    }
    let masses = mass_in_balls(v, radii, center)?;
    growth_from_masses(radii, &masses, sigma, alpha)
}

/// As [`growth_diagnostics`] for a precomputed mass profile.
pub fn growth_from_masses(radii: &[f64], masses: &[f64], sigma: f64, alpha: f64) -> Result<GrowthReport> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(masses)
        .filter(|(_, m)| **m > 0.0)
        .map(|(r, m)| (r.ln(), m.ln()))
        .unzip();
    if lx.len() < 2 {
        return Err(Error::EmptyRegion("fewer than two balls carry mass".into()));
    }
    let (k, _, k_err) = fit_line(&lx, &ly);
    let d0 = d0_estimate(radii, masses, sigma, alpha)?;

    let mut partial = 0.0;
    for i in 1..radii.len() {
        let (r0, r1) = (radii[i - 1], radii[i]);
        let (m0, m1) = (masses[i - 1], masses[i]);
        if m0 > 0.0 && m1 > 0.0 {
            partial += 0.5 * (r1 - r0) * (r0 / m0 + r1 / m1);
        }
    }
    let r_last = radii[radii.len() - 1];
    let m_last = masses[masses.len() - 1];
    let tail = if k <= 2.0 {
        f64::INFINITY
    } else {
        // int_R^inf r (r/R)^(-k) / M dr
        r_last * r_last / (m_last * (k - 2.0))
    };
    let parabolic = Verdict {
        value: k <= 2.0 + EXPONENT_MARGIN,
        confidence: confidence(k - 2.0 - EXPONENT_MARGIN, k_err),
        method: "power-law extrapolation of int r dr / mass(B_r)",
    };

    let (llx, lly): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(masses)
        .filter(|(_, m)| **m > 1.0 + 1e-9)
        .map(|(r, m)| (r.ln(), m.ln().ln()))
        .unzip();
    let (p, p_err) = if llx.len() >= 2 {
        let (p, _, e) = fit_line(&llx, &lly);
        (p, e)
    } else {
        (0.0, f64::INFINITY)
    };
    let stochastically_complete = Verdict {
        value: p <= 2.0 + EXPONENT_MARGIN,
        confidence: if p_err.is_finite() {
            confidence(p - 2.0 - EXPONENT_MARGIN, p_err)
        } else {
            0.0
        },
        method: "power-law fit of log mass(B_r) against r^2",
    };
    Ok(GrowthReport {
        radii: radii.to_vec(),
        masses: masses.to_vec(),
        exponent: k,
        exponent_stderr: k_err,
        d0_estimate: d0,
        partial_integral: partial,
        tail_integral: tail,
        parabolic,
        log_mass_exponent: p,
        stochastically_complete,
    })
}
