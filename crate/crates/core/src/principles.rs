//! Maximum principles at infinity on varifolds: the constant table, the test
//! fields of the divergence argument, sampled audits of the hypotheses and
//! conclusions, distance bounds, and a Barta-type spectrum floor.
//!
//! Every audit is a necessary-condition check on finite samples. A
//! `Consistent` verdict does not prove anything about the continuum object.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::BarrierCertificate;
use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::spectral::{p_minus, SymmetricForm};
use crate::varifold::{DiscreteVarifold, TestField, Verdict};

/// Tolerance for `alpha = 2 - sigma` and `alpha = 2 (1 - sigma)`.
const BRANCH_TOL: f64 = 1e-12;

/// Growth exponents `(sigma, alpha)` and the volume constant `d0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub sigma: f64,
    pub alpha: f64,
    pub d0: f64,
}

/// Which test-field family applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldCase {
    /// `sigma > 0`, `eta < 0`.
    I,
    /// `sigma = 0`.
    Ii,
    /// `sigma > 0`, `eta >= 0`, `alpha < 2 - sigma`.
    Iii,
    /// `alpha = 2 - sigma`.
    Iv,
    /// `-psi^2 lambda(u) e^u grad u`.
    Parabolic,
}

impl GrowthParams {
    pub fn new(sigma: f64, alpha: f64, d0: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&sigma) {
            return Err(Error::param("sigma", format!("must lie in [0, 2], got {sigma}")));
        }
        if !alpha.is_finite() || alpha > 2.0 - sigma + BRANCH_TOL {
            return Err(Error::param("alpha", format!("must be <= 2 - sigma, got {alpha}")));
        }
        if !(d0 >= 0.0) || !d0.is_finite() {
            return Err(Error::param("d0", format!("must be finite and >= 0, got {d0}")));
        }
        Ok(GrowthParams { sigma, alpha, d0 })
    }

    /// `eta = alpha + 2 (sigma - 1)`.
    pub fn eta(&self) -> f64 {
        self.alpha + 2.0 * (self.sigma - 1.0)
    }

    /// `2 - sigma - alpha`.
    pub fn gap(&self) -> f64 {
        2.0 - self.sigma - self.alpha
    }

    pub fn is_critical(&self) -> bool {
        self.gap().abs() <= BRANCH_TOL
    }

    pub fn case(&self) -> FieldCase {
        if self.is_critical() {
            FieldCase::Iv
        } else if self.sigma == 0.0 {
            FieldCase::Ii
        } else if self.eta() < 0.0 {
            FieldCase::I
        } else {
            FieldCase::Iii
        }
    }
}

/// The constant `C(sigma, alpha, d0)` bounding `K` by `C / l * max(u_hat, 0)`.
pub fn constant_c(sigma: f64, alpha: f64, d0: f64, i_positive: bool) -> Result<f64> {
    let gp = GrowthParams::new(sigma, alpha, d0)?;
    if !i_positive {
        return Ok(0.0);
    }
    let gap = gp.gap();
    Ok(if gp.is_critical() {
        if sigma + d0 >= 2.0 {
            sigma * (sigma + d0 - 2.0)
        } else {
            0.0
        }
    } else if sigma == 0.0 {
        0.0
    } else if alpha < 2.0 * (1.0 - sigma) {
        d0 * gap * gap
    } else {
        d0 * sigma * gap
    })
}

/// Value with gradient and, when available, Hessian.
#[derive(Debug, Clone)]
pub struct Jet {
    pub u: f64,
    pub grad: DVector<f64>,
    pub hess: Option<SymmetricForm>,
}

pub type JetFn = Arc<dyn Fn(&DVector<f64>) -> Result<Jet> + Send + Sync>;

/// Smooth function on the ambient space.
#[derive(Clone)]
pub struct ScalarField {
    f: JetFn,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ScalarField")
    }
}

impl ScalarField {
    pub fn new(f: impl Fn(&DVector<f64>) -> Result<Jet> + Send + Sync + 'static) -> Self {
        ScalarField { f: Arc::new(f) }
    }

    pub fn constant(m: usize, c: f64) -> Self {
        ScalarField::new(move |_| {
            Ok(Jet {
                u: c,
                grad: DVector::zeros(m),
                hess: Some(SymmetricForm::zeros(m)),
            })
        })
    }

    /// `<a, x> + b`.
    pub fn affine(a: DVector<f64>, b: f64) -> Self {
        let m = a.len();
        ScalarField::new(move |x| {
            Ok(Jet {
                u: a.dot(x) + b,
                grad: a.clone(),
                hess: Some(SymmetricForm::zeros(m)),
            })
        })
    }

    /// `exp(-C2 r)` on the collar `r < R`, extended by the constant
    /// `exp(-C2 R)` beyond it.
    pub fn from_barrier(cert: BarrierCertificate, domain: DomainSpec) -> Self {
        let m = domain.ambient_dim;
        // constant beyond the collar or the reach, whichever is nearer
        let r_cap = cert.params.r.min(domain.reach());
        ScalarField::new(move |x| {
            let r = domain.signed_distance(x)?;
            if r >= r_cap {
                return Ok(Jet {
                    u: cert.eta(r_cap),
                    grad: DVector::zeros(m),
                    hess: Some(SymmetricForm::zeros(m)),
                });
            }
            let dd = domain.distance_hessian(x)?;
            let u = cert.eta(dd.r);
            let hess = crate::barrier::barrier_hessian(&cert, &dd.grad, &dd.hess, dd.r)?;
            Ok(Jet {
                u,
                grad: &dd.grad * (-cert.c2 * u),
                hess: Some(hess),
            })
        })
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<Jet> {
        (self.f)(x)
    }

    /// Analytic Hessian if supplied, otherwise central differences of the
    /// gradient. The flag reports which.
    pub fn hessian(&self, x: &DVector<f64>, jet: &Jet, step: f64) -> Result<(SymmetricForm, bool)> {
        if let Some(h) = &jet.hess {
            return Ok((h.clone(), true));
        }
        let m = x.len();
        let mut h = DMatrix::zeros(m, m);
        for j in 0..m {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let d = (self.eval(&xp)?.grad - self.eval(&xm)?.grad) / (2.0 * step);
            h.set_column(j, &d);
        }
        Ok((SymmetricForm::new(h)?, false))
    }
}

/// `(psi, psi')` of the radial cut-off: `1` on `[0, theta R]`, `0` beyond `R`,
/// quadratic taper in between with `|psi'| <= 2 / ((1 - theta) R)`.
pub fn cutoff_psi(theta: f64, big_r: f64, s: f64) -> (f64, f64) {
    let w = (1.0 - theta) * big_r;
    let t = (s - theta * big_r) / w;
    if t <= 0.0 {
        (1.0, 0.0)
    } else if t >= 1.0 {
        (0.0, 0.0)
    } else if t <= 0.5 {
        (1.0 - 2.0 * t * t, -4.0 * t / w)
    } else {
        (2.0 * (1.0 - t) * (1.0 - t), -4.0 * (1.0 - t) / w)
    }
}

/// `(lambda, lambda')`: cubic smoothstep from `0` at `gamma + eps / 2` to `1`
/// at `gamma + eps`.
pub fn ramp_lambda(gamma: f64, eps: f64, u: f64) -> (f64, f64) {
    let half = 0.5 * eps;
    let s = (u - gamma - half) / half;
    if s <= 0.0 {
        (0.0, 0.0)
    } else if s >= 1.0 {
        (1.0, 0.0)
    } else {
        (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s) / half)
    }
}

/// Parameters of a test field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFieldSpec {
    pub case: FieldCase,
    pub growth: GrowthParams,
    pub q: f64,
    pub beta: f64,
    pub b: f64,
    pub gamma_level: f64,
    pub theta: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub eps: f64,
}

impl TestFieldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.case != FieldCase::Parabolic {
            if self.case != self.growth.case() {
                return Err(Error::param(
                    "case",
                    format!("growth parameters select {:?}", self.growth.case()),
                ));
            }
            if !(self.b > 0.0 && self.beta > self.b) {
                return Err(Error::param("beta", "need beta > b > 0"));
            }
            if !(self.q > 0.0) {
                return Err(Error::param("q", "must be positive"));
            }
        }
        if !(self.theta > 0.5 && self.theta < 1.0) {
            return Err(Error::param("theta", "must lie in (1/2, 1)"));
        }
        if !(self.big_r > 0.0) {
            return Err(Error::param("R", "must be positive"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::param("eps", "must be positive"));
        }
        Ok(())
    }

    /// The exponent `q` of the case for a given `K` and `tau in (0, 1)`.
    pub fn q_for(case: FieldCase, gp: &GrowthParams, ell: usize, k: f64, tau: f64, beta: f64, b: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::param("tau", "must lie in (0, 1)"));
        }
        if !(k > 0.0) {
            return Err(Error::param("K", "must be positive"));
        }
        let lk = ell as f64 * k;
        let (s, gap) = (gp.sigma, gp.gap());
        Ok(match case {
            FieldCase::I | FieldCase::Ii => tau * 4.0 * lk / (beta * beta * gap * gap),
            FieldCase::Iii => tau * 4.0 * lk * (beta - b).powf(gp.eta() / s) / (beta * beta * s * gap),
            FieldCase::Iv => tau * 4.0 * (beta - b) * lk / (beta * beta * s * s),
            FieldCase::Parabolic => return Err(Error::param("case", "no exponent q")),
        })
    }

    /// `F(v, r)`; `None` for the parabolic field.
    pub fn f(&self, v: f64, r: f64) -> Option<f64> {
        let eta = self.growth.eta();
        let s = self.growth.sigma;
        match self.case {
            FieldCase::I | FieldCase::Ii => Some((-self.q * v * (1.0 + r).powf(-eta)).exp()),
            FieldCase::Iii => Some((-self.q * v.powf((s - eta) / s)).exp()),
            FieldCase::Iv => Some(v.powf(-self.q)),
            FieldCase::Parabolic => None,
        }
    }
}

/// `Z = -psi^2 lambda(u) F(v, r) grad u` with `v = beta (1 + r)^sigma - u`
/// and `r = |x - center|`, or the parabolic variant.
///
/// `samples` are checked for `v >= (beta - b)(1 + r)^sigma` on the level set.
pub fn build_test_field(
    spec: &TestFieldSpec,
    u: &ScalarField,
    center: &DVector<f64>,
    samples: &[DVector<f64>],
) -> Result<TestField> {
    spec.validate()?;
    let sigma = spec.growth.sigma;
    if spec.case != FieldCase::Parabolic {
        for (i, x) in samples.iter().enumerate() {
            let r = (x - center).norm();
            if r >= spec.big_r {
                continue;
            }
            let uu = u.eval(x)?.u;
            if uu <= spec.gamma_level {
                continue;
            }
            let scale = (1.0 + r).powf(sigma);
            let v = spec.beta * scale - uu;
            if v < (spec.beta - spec.b) * scale {
                return Err(Error::Hypothesis(format!(
                    "v = {v} below (beta - b)(1 + r)^sigma at sample {i}"
                )));
            }
        }
    }
    let spec = *spec;
    let u = u.clone();
    let c = center.clone();
    TestField::new(center.clone(), spec.big_r, move |x| {
        let r = (x - &c).norm();
        let (psi, _) = cutoff_psi(spec.theta, spec.big_r, r);
        let jet = match u.eval(x) {
            Ok(j) => j,
            Err(_) => return DVector::from_element(x.len(), f64::NAN),
        };
        if psi == 0.0 || jet.u <= spec.gamma_level {
            return DVector::zeros(x.len());
        }
        let (lam, _) = ramp_lambda(spec.gamma_level, spec.eps, jet.u);
        let weight = match spec.f(spec.beta * (1.0 + r).powf(sigma) - jet.u, r) {
            Some(f) => f,
            None => jet.u.exp(),
        };
        jet.grad * (-psi * psi * lam * weight)
    })
}

/// Consistency of sampled data with a maximum principle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrincipleVerdict {
    Consistent,
    Violated,
}

/// Knobs of [`audit_max_principle`].
#[derive(Debug, Clone)]
pub struct AuditOptions {
    /// Origin of `r`.
    pub center: DVector<f64>,
    /// `I > i_threshold * mass(level set)` counts as positive.
    pub i_threshold: f64,
    pub tol: f64,
    pub fd_step: f64,
}

impl AuditOptions {
    pub fn new(m: usize) -> Self {
        AuditOptions {
            center: DVector::zeros(m),
            i_threshold: 1e-10,
            tol: 1e-9,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PrincipleReport {
    /// Sampled `min [1 + r]^alpha (p_minus(Hess u, l) - h |grad u|)` on `{u > gamma}`.
    pub k_estimate: f64,
    pub c_value: f64,
    /// `C / l * max(u_hat, 0)`.
    pub bound_rhs: f64,
    pub verdict: PrincipleVerdict,
    /// `bound_rhs + tol - k_estimate`.
    pub margin: f64,
    pub u_hat: f64,
    pub i_integral: f64,
    pub i_positive: bool,
    /// `I` within a factor 10 of the threshold.
    pub i_borderline: bool,
    pub level_points: usize,
    pub level_mass: f64,
    pub argmin: usize,
    pub growth: GrowthParams,
    pub h: f64,
    pub gamma: f64,
    pub tol: f64,
    pub hessian_source: &'static str,
    /// The ambient Hessian is used; no second fundamental form correction.
    pub hessian_restriction: &'static str,
}

/// Samples the hypothesis side of the weak maximum principle.
pub fn audit_max_principle(
    v: &DiscreteVarifold,
    u: &ScalarField,
    h: f64,
    gp: &GrowthParams,
    gamma: f64,
    opts: &AuditOptions,
) -> Result<PrincipleReport> {
    if !(h >= 0.0) {
        return Err(Error::param("h", "must be >= 0"));
    }
    let gp = GrowthParams::new(gp.sigma, gp.alpha, gp.d0)?;
    let ell = v.ell();
    let jets: Vec<Jet> = v
        .points()
        .par_iter()
        .map(|x| u.eval(x))
        .collect::<Result<_>>()?;
    let level: Vec<usize> = (0..v.len()).filter(|&i| jets[i].u > gamma).collect();
    if level.is_empty() {
        return Err(Error::EmptyRegion(format!("no sample with u > {gamma}")));
    }
    if let Some(&i) = level.iter().find(|&&i| v.boundary()[i]) {
        return Err(Error::Hypothesis(format!(
            "boundary point {i} lies in the level set"
        )));
    }
    let terms: Vec<(f64, f64, bool)> = level
        .par_iter()
        .map(|&i| {
            let x = &v.points()[i];
            let r = (x - &opts.center).norm();
            let (hess, analytic) = u.hessian(x, &jets[i], opts.fd_step)?;
            let k = (1.0 + r).powf(gp.alpha) * (p_minus(&hess, ell)? - h * jets[i].grad.norm());
            let tangential = v.frames()[i].transpose() * &jets[i].grad;
            Ok((k, v.weights()[i] * tangential.norm_squared(), analytic))
        })
        .collect::<Result<_>>()?;
    let (mut k_estimate, mut argmin) = (f64::INFINITY, level[0]);
    for (&i, t) in level.iter().zip(&terms) {
        if t.0 < k_estimate {
            k_estimate = t.0;
            argmin = i;
        }
    }
    let i_integral: f64 = terms.iter().map(|t| t.1).sum();
    let analytic = terms.iter().all(|t| t.2);
    let level_mass: f64 = level.iter().map(|&i| v.weights()[i]).sum();

    // limsup u / (1 + r)^sigma over the outer half of the support
    let mut radii: Vec<(f64, usize)> = v
        .points()
        .iter()
        .enumerate()
        .map(|(i, x)| ((x - &opts.center).norm(), i))
        .collect();
    radii.sort_by(|a, b| a.0.total_cmp(&b.0));
    let u_hat = radii[radii.len() / 2..]
        .iter()
        .map(|(r, i)| jets[*i].u / (1.0 + r).powf(gp.sigma))
        .fold(f64::NEG_INFINITY, f64::max);

    let threshold = opts.i_threshold * level_mass;
    let i_positive = i_integral > threshold;
    let i_borderline = i_integral > 0.1 * threshold && i_integral < 10.0 * threshold;
    let c_value = constant_c(gp.sigma, gp.alpha, gp.d0, i_positive)?;
    let bound_rhs = c_value / ell as f64 * u_hat.max(0.0);
    let margin = bound_rhs + opts.tol - k_estimate;
    Ok(PrincipleReport {
        k_estimate,
        c_value,
        bound_rhs,
        verdict: if margin >= 0.0 {
            PrincipleVerdict::Consistent
        } else {
            PrincipleVerdict::Violated
        },
        margin,
        u_hat,
        i_integral,
        i_positive,
        i_borderline,
        level_points: level.len(),
        level_mass,
        argmin,
        growth: gp,
        h,
        gamma,
        tol: opts.tol,
        hessian_source: if analytic { "analytic" } else { "finite-difference" },
        hessian_restriction: "ambient",
    })
}

/// Which alternative of the enclosure bound applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnclosureCase {
    /// `Lambda_ell^2 >= c`.
    A,
    /// `Lambda_ell^2 < c`.
    B,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnclosureBound {
    pub case: EnclosureCase,
    /// Lower bound on the distance from the support to the boundary.
    pub bound: f64,
    /// Set when no boundaryless varifold can lie in the domain.
    pub nonexistence: bool,
}

/// Lower bound on `dist(spt V, boundary)` from the boundary data.
pub fn enclosure_bounds(lambda_ell: f64, h_norm: f64, c: f64, dist_boundary_sigma: f64) -> Result<EnclosureBound> {
    if !lambda_ell.is_finite() || !h_norm.is_finite() || !c.is_finite() {
        return Err(Error::param("lambda_ell", "inputs must be finite"));
    }
    if !(h_norm >= 0.0) {
        return Err(Error::param("H", "must be >= 0"));
    }
    if !(dist_boundary_sigma >= 0.0) {
        return Err(Error::param("dist_boundary", "must be >= 0"));
    }
    if h_norm >= lambda_ell {
        return Err(Error::Hypothesis(format!(
            "|H| = {h_norm} must be below lambda_ell = {lambda_ell}"
        )));
    }
    if lambda_ell * lambda_ell >= c {
        return Ok(EnclosureBound {
            case: EnclosureCase::A,
            bound: dist_boundary_sigma,
            nonexistence: dist_boundary_sigma == f64::INFINITY,
        });
    }
    Ok(EnclosureBound {
        case: EnclosureCase::B,
        bound: ((lambda_ell - h_norm) / c).min(dist_boundary_sigma),
        nonexistence: false,
    })
}

/// Knobs of [`audit_parabolic`].
#[derive(Debug, Clone)]
pub struct ParabolicOptions {
    /// Neighbours per point in the connectivity graph.
    pub k: usize,
    /// Per-component weighted variance of `u` regarded as constant.
    pub var_tol: f64,
    pub fd_step: f64,
    /// Failure points listed in the report.
    pub max_listed: usize,
}

impl Default for ParabolicOptions {
    fn default() -> Self {
        ParabolicOptions {
            k: 8,
            var_tol: 1e-8,
            fd_step: 1e-5,
            max_listed: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FailurePoint {
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Component {
    pub size: usize,
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicReport {
    pub hypothesis_holds: bool,
    pub hypothesis_failures: usize,
    pub conclusion_holds: bool,
    /// Passes when the conclusion holds or the hypothesis fails.
    pub passed: bool,
    pub components: Vec<Component>,
    /// Worst samples: hypothesis failures if any, otherwise the largest
    /// deviations from the component mean.
    pub localized: Vec<FailurePoint>,
    pub level_points: usize,
}

/// `k` nearest neighbours of every point by a sweep along the coordinate of
/// largest spread, pruned once the coordinate gap exceeds the current `k`-th
/// distance.
fn knn(points: &[&DVector<f64>], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let m = points[0].len();
    let axis = (0..m)
        .max_by(|&a, &b| {
            let spread = |c: usize| {
                let (lo, hi) = points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p[c]), h.max(p[c])));
                hi - lo
            };
            spread(a).total_cmp(&spread(b))
        })
        .unwrap_or(0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let kk = k.min(n - 1);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let x = points[i];
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(kk + 1);
            let worst = |b: &Vec<(f64, usize)>| if b.len() < kk { f64::INFINITY } else { b[b.len() - 1].0 };
            let consider = |j: usize, best: &mut Vec<(f64, usize)>| {
                let d = (x - points[j]).norm_squared();
                if best.len() < kk || d < best[best.len() - 1].0 {
                    let pos = best.partition_point(|e| e.0 <= d);
                    best.insert(pos, (d, j));
                    best.truncate(kk);
                }
            };
            let (mut lo, mut hi) = (rank[i], rank[i] + 1);
            loop {
                let gap_lo = (lo > 0).then(|| (x[axis] - points[order[lo - 1]][axis]).powi(2));
                let gap_hi = (hi < n).then(|| (points[order[hi]][axis] - x[axis]).powi(2));
                let w = worst(&best);
                match (gap_lo.filter(|g| *g <= w), gap_hi.filter(|g| *g <= w)) {
                    (None, None) => break,
                    (Some(a), Some(b)) if a <= b => {
                        lo -= 1;
                        consider(order[lo], &mut best);
                    }
                    (Some(_), None) => {
                        lo -= 1;
                        consider(order[lo], &mut best);
                    }
                    _ => {
                        consider(order[hi], &mut best);
                        hi += 1;
                    }
                }
            }
            best.into_iter().map(|e| e.1).collect()
        })
        .collect()
}

fn knn_components(points: &[&DVector<f64>], k: usize) -> Vec<usize> {
    let neighbours = knn(points, k);
    let mut uf = UnionFind::<usize>::new(points.len());
    for (i, nb) in neighbours.iter().enumerate() {
        for &j in nb {
            uf.union(i, j);
        }
    }
    uf.into_labeling()
}

/// Checks `p_minus(Hess u_eps, l) - h |grad u_eps| >= -eps` on the level set of
/// each `u_eps`, then whether the last `u` is constant on each connected
/// component of `{u > gamma}`.
pub fn audit_parabolic(
    v: &DiscreteVarifold,
    u_sequence: &[(ScalarField, f64)],
    h: f64,
    gamma: f64,
    parabolic: &Verdict,
    opts: &ParabolicOptions,
) -> Result<ParabolicReport> {
    if !v.is_rectifiable() {
        return Err(Error::Hypothesis("varifold is not flagged rectifiable".into()));
    }
    if !parabolic.value {
        return Err(Error::Hypothesis("growth diagnostics do not indicate parabolicity".into()));
    }
    if u_sequence.is_empty() {
        return Err(Error::param("u_sequence", "need at least one field"));
    }
    if opts.k == 0 {
        return Err(Error::param("k", "must be positive"));
    }
    let ell = v.ell();
    let mut failures = Vec::new();
    for (u, eps) in u_sequence {
        let vals: Vec<Option<f64>> = v
            .points()
            .par_iter()
            .map(|x| {
                let jet = u.eval(x)?;
                if jet.u <= gamma {
                    return Ok(None);
                }
                let (hess, _) = u.hessian(x, &jet, opts.fd_step)?;
                Ok(Some(p_minus(&hess, ell)? - h * jet.grad.norm()))
            })
            .collect::<Result<_>>()?;
        for (i, val) in vals.iter().enumerate() {
            if let Some(val) = val {
                if *val < -eps {
                    failures.push(FailurePoint {
                        index: i,
                        point: v.points()[i].iter().copied().collect(),
                        value: *val,
                        eps: *eps,
                    });
                }
            }
        }
    }
    let u = &u_sequence[u_sequence.len() - 1].0;
    let values: Vec<f64> = v
        .points()
        .par_iter()
        .map(|x| u.eval(x).map(|j| j.u))
        .collect::<Result<_>>()?;
    let level: Vec<usize> = (0..v.len()).filter(|&i| values[i] > gamma).collect();
    if level.is_empty() {
        return Err(Error::EmptyRegion(format!("no sample with u > {gamma}")));
    }
    let pts: Vec<&DVector<f64>> = level.iter().map(|&i| &v.points()[i]).collect();
    let labels = knn_components(&pts, opts.k);
    let mut roots: Vec<usize> = labels.clone();
    roots.sort_unstable();
    roots.dedup();
    let mut components = Vec::new();
    let mut deviations: Vec<(f64, usize)> = Vec::new();
    for root in &roots {
        let members: Vec<usize> = (0..level.len()).filter(|&a| labels[a] == *root).collect();
        let mass: f64 = members.iter().map(|&a| v.weights()[level[a]]).sum();
        let mean = members
            .iter()
            .map(|&a| v.weights()[level[a]] * values[level[a]])
            .sum::<f64>()
            / mass;
        let variance = members
            .iter()
            .map(|&a| v.weights()[level[a]] * (values[level[a]] - mean).powi(2))
            .sum::<f64>()
            / mass;
        for &a in &members {
            deviations.push(((values[level[a]] - mean).abs(), level[a]));
        }
        components.push(Component {
            size: members.len(),
            mass,
            mean,
            variance,
        });
    }
    let hypothesis_holds = failures.is_empty();
    let conclusion_holds = components.iter().all(|c| c.variance < opts.var_tol);
    let localized = if !hypothesis_holds {
        failures.sort_by(|a, b| a.value.total_cmp(&b.value));
        failures.iter().take(opts.max_listed).cloned().collect()
    } else if !conclusion_holds {
        deviations.sort_by(|a, b| b.0.total_cmp(&a.0));
        deviations
            .iter()
            .take(opts.max_listed)
            .map(|(d, i)| FailurePoint {
                index: *i,
                point: v.points()[*i].iter().copied().collect(),
                value: *d,
                eps: 0.0,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ParabolicReport {
        hypothesis_holds,
        hypothesis_failures: failures.len(),
        conclusion_holds,
        passed: conclusion_holds || !hypothesis_holds,
        components,
        localized,
        level_points: level.len(),
    })
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature.
pub fn integrate_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RigoliSetti {
    /// `int (s - r0) / M(s) ds`.
    pub lhs: f64,
    /// `2 int ds / M'(s)`.
    pub rhs: f64,
    pub margin: f64,
}

/// Both sides of `int_{r0}^{r1} (s - r0) / M ds <= 2 int_{r0}^{r1} ds / M'`
/// for an increasing mass profile `M`.
pub fn rigoli_setti_margin(
    mass: &dyn Fn(f64) -> f64,
    dmass: &dyn Fn(f64) -> f64,
    r0: f64,
    r1: f64,
    tol: f64,
) -> Result<RigoliSetti> {
    if !(r0 > 0.0 && r1 > r0) {
        return Err(Error::param("r1", "need 0 < r0 < r1"));
    }
    if !(mass(r0) > 0.0) {
        return Err(Error::param("mass", "must be positive at r0"));
    }
    let lhs = integrate_simpson(&|s| (s - r0) / mass(s), r0, r1, tol);
    let rhs = 2.0 * integrate_simpson(&|s| 1.0 / dmass(s), r0, r1, tol);
    Ok(RigoliSetti {
        lhs,
        rhs,
        margin: rhs - lhs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BartaReport {
    /// Discrete `min (-Delta (u* - u)) / (u* - u)` over the region.
    pub discrete_inf: f64,
    pub argmin: usize,
    /// `l delta_bar / (6 eps)`.
    pub floor: f64,
    pub region_size: usize,
    /// `(vertex, quotient)` over the region.
    pub quotients: Vec<(usize, f64)>,
    pub slack: f64,
    pub passed: bool,
}

/// Relative discretization slack of [`barta_bound`].
pub const BARTA_SLACK: f64 = 0.05;

/// Barta quotient of `u* - u` on the exterior region
/// `{u* - u <= 3 eps}` (interior vertices only) against the floor
/// `l delta_bar / (6 eps)`.
pub fn barta_bound(
    mesh: &TriMesh,
    u_eps: &[f64],
    u_eps_star: f64,
    delta_bar: f64,
    ell: usize,
    eps: f64,
) -> Result<BartaReport> {
    if ell != 2 {
        return Err(Error::param("ell", "triangle meshes carry l = 2 only"));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive"));
    }
    if !(delta_bar >= 0.0) {
        return Err(Error::param("delta_bar", "must be >= 0"));
    }
    if let Some(i) = u_eps.iter().position(|&x| !(x < u_eps_star)) {
        return Err(Error::Hypothesis(format!("u >= u* at vertex {i}")));
    }
    let lap = mesh.cotan_laplacian()?;
    let du = lap.apply(u_eps)?;
    let quotients: Vec<(usize, f64)> = (0..u_eps.len())
        .filter(|&i| !lap.boundary[i] && u_eps_star - u_eps[i] <= 3.0 * eps)
        .map(|i| (i, du[i] / (u_eps_star - u_eps[i])))
        .collect();
    if quotients.is_empty() {
        return Err(Error::EmptyRegion("exterior region has no interior vertex".into()));
    }
    let (argmin, discrete_inf) = quotients
        .iter()
        .copied()
        .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let floor = ell as f64 * delta_bar / (6.0 * eps);
    Ok(BartaReport {
        discrete_inf,
        argmin,
        floor,
        region_size: quotients.len(),
        quotients,
        slack: BARTA_SLACK,
        passed: discrete_inf >= floor * (1.0 - BARTA_SLACK),
    })
}

/// Shipped Barta example: annulus `{BARTA_INNER <= r <= cap}` of a polar cap
/// of the unit sphere, meshed rotationally, with
/// `u = 1 - exp(-r)`, `u* = u(cap) + 2 eps` and
/// `delta_bar = min Delta u = exp(-cap) (cot(cap) - 1)` (with `l = 2`).
#[derive(Debug, Clone)]
pub struct BartaExample {
    pub mesh: TriMesh,
    pub u: Vec<f64>,
    /// Geodesic distance to the pole per vertex.
    pub r: Vec<f64>,
    pub u_star: f64,
    pub delta_bar: f64,
}

/// Default mesh of [`BartaExample`]: rings, vertices per ring, radii.
pub const BARTA_RINGS: usize = 81;
pub const BARTA_PER_RING: usize = 400;
pub const BARTA_INNER: f64 = 0.2;
pub const BARTA_CAP: f64 = 0.6;

/// `Delta (1 - exp(-r)) = exp(-r) (cot r - 1)` on the unit sphere.
pub fn cap_laplacian(r: f64) -> f64 {
    (-r).exp() * (1.0 / r.tan() - 1.0)
}

impl BartaExample {
    pub fn new(rings: usize, per_ring: usize, cap: f64, eps: f64) -> Result<Self> {
        if !(cap > BARTA_INNER && cap < std::f64::consts::FRAC_PI_4) {
            return Err(Error::param("cap", "need inner radius < cap < pi/4 so that Delta u > 0"));
        }
        let mesh = TriMesh::polar_annulus(BARTA_INNER, cap, rings, per_ring)?;
        let r: Vec<f64> = mesh.vertices.iter().map(|x| x[2].clamp(-1.0, 1.0).acos()).collect();
        let u: Vec<f64> = r.iter().map(|r| 1.0 - (-r).exp()).collect();
        Ok(BartaExample {
            u_star: 1.0 - (-cap).exp() + 2.0 * eps,
            delta_bar: cap_laplacian(cap),
            mesh,
            u,
            r,
        })
    }

    pub fn run(&self, eps: f64) -> Result<BartaReport> {
        barta_bound(&self.mesh, &self.u, self.u_star, self.delta_bar, 2, eps)
    }
}
