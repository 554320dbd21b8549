//! Exponential barriers `u = exp(-C2 r)` of the distance to the boundary of
//! an `l`-convex domain, with explicit constants.

use serde::{Deserialize, Serialize};

use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::modelspace::ModelCurvature;
use crate::spectral::{p_minus, SymmetricForm};

/// Inputs of the barrier construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub c: ModelCurvature,
    pub ell: usize,
    /// Lower bound for `p_minus(II, ell - 1)` on the boundary.
    pub lambda_ell_minus_1: f64,
    /// Lower bound for `p_minus(II, ell)` on the boundary.
    pub lambda_ell: f64,
    /// Mean curvature bound.
    pub h: f64,
    /// Width of the collar.
    #[serde(rename = "R")]
    pub r: f64,
}

impl BarrierParams {
    /// Parameters with both boundary constants read off a model domain.
    pub fn for_domain(domain: &DomainSpec, ell: usize, h: f64, r: f64) -> Result<Self> {
        if ell < 2 {
            return Err(Error::param("ell", "must be at least 2"));
        }
        Ok(BarrierParams {
            c: domain.model_curvature(),
            ell,
            lambda_ell_minus_1: domain.boundary_p_minus_inf(ell - 1)?,
            lambda_ell: domain.boundary_p_minus_inf(ell)?,
            h,
            r,
        })
    }
}

/// Sign of `Lambda_ell^2 - c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    A1,
    A2,
    B,
}

/// Constants of the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierCertificate {
    pub params: BarrierParams,
    pub case_tag: CaseTag,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub delta: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub delta_bar: f64,
}

impl BarrierCertificate {
    /// `eta(t) = exp(-C2 t)`.
    pub fn eta(&self, t: f64) -> f64 {
        (-self.c2 * t).exp()
    }

    /// Whether the certificate is strict (`h < Lambda_ell`).
    pub fn is_strict(&self) -> bool {
        self.delta_bar > 0.0
    }
}

/// Relative tolerance used to classify `Lambda_ell^2 = c`.
const CASE_TOL: f64 = 1e-12;

fn finite(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::param(name, format!("must be finite, got {v}")));
    }
    Ok(())
}

/// Builds the certificate, validating the hypotheses.
pub fn build_barrier(p: &BarrierParams) -> Result<BarrierCertificate> {
    finite("lambda_ell_minus_1", p.lambda_ell_minus_1)?;
    finite("lambda_ell", p.lambda_ell)?;
    finite("h", p.h)?;
    finite("R", p.r)?;
    if p.ell < 2 {
        return Err(Error::param("ell", "must be at least 2"));
    }
    if p.lambda_ell < 0.0 {
        return Err(Error::param("lambda_ell", "must be >= 0"));
    }
    if p.h < 0.0 {
        return Err(Error::param("h", "must be >= 0"));
    }
    if p.h > p.lambda_ell {
        return Err(Error::param(
            "h",
            format!("must not exceed lambda_ell = {}", p.lambda_ell),
        ));
    }
    if !(p.r > 0.0) {
        return Err(Error::param("R", "must be positive"));
    }
    let c = p.c.value();
    let ell = p.ell as f64;
    let lam = p.lambda_ell;
    let gap = lam * lam - c;
    let case_tag = if gap.abs() <= CASE_TOL * c.abs().max(1.0) {
        CaseTag::A2
    } else if gap > 0.0 {
        CaseTag::A1
    } else {
        CaseTag::B
    };
    let strict = p.h < lam;
    if case_tag == CaseTag::B {
        if !strict {
            return Err(Error::param("h", "must be below lambda_ell when lambda_ell^2 < c"));
        }
        let r_max = (lam - p.h) / c;
        if p.r >= r_max {
            return Err(Error::param(
                "R",
                format!("must be below (lambda_ell - h) / c = {r_max}"),
            ));
        }
    }
    let c1 = ell * p.h + (ell - 1.0) * (1.0 - p.lambda_ell_minus_1).max(p.c.sqrt_pos());
    let delta = if !strict {
        0.0
    } else if case_tag == CaseTag::B {
        ell * (lam - p.h - c * p.r) / 2.0
    } else {
        ell * (lam - p.h) / 2.0
    };
    let c2 = c1 + delta;
    let delta_bar = c2 * (-c2 * p.r).exp() * delta / ell;
    Ok(BarrierCertificate {
        params: *p,
        case_tag,
        c1,
        delta,
        c2,
        delta_bar,
    })
}

/// `(u, |grad u|)` at distance `r` from the boundary.
pub fn eval_barrier(cert: &BarrierCertificate, r: f64) -> Result<(f64, f64)> {
    if !(r >= 0.0 && r <= cert.params.r) {
        return Err(Error::OutsideDomain(format!(
            "r = {r} outside [0, {}]",
            cert.params.r
        )));
    }
    let u = cert.eta(r);
    Ok((u, cert.c2 * u))
}

/// Hessian of `u = eta(r)` from the distance data: `eta'' dr dr + eta' Hess r`.
pub fn barrier_hessian(
    cert: &BarrierCertificate,
    grad_r: &nalgebra::DVector<f64>,
    hess_r: &SymmetricForm,
    r: f64,
) -> Result<SymmetricForm> {
    let u = cert.eta(r);
    let c2 = cert.c2;
    let m = grad_r * grad_r.transpose() * (c2 * c2 * u) - hess_r.matrix() * (c2 * u);
    SymmetricForm::new(m)
}

/// Outcome of [`certify_on_model`].
#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub samples: usize,
    pub r_max: f64,
    /// Minimum over the grid of `p_minus(Hess u, l) - h |grad u|`.
    pub min_lhs: f64,
    /// `min_lhs - delta_bar` (strict case) or `min_lhs` (degenerate case).
    pub margin: f64,
    pub target: f64,
    pub strict: bool,
    pub passed: bool,
    pub slack: f64,
    /// Set when the certificate is degenerate.
    pub note: Option<String>,
}

/// Default number of grid points in [`certify_on_model`].
pub const CERTIFY_SAMPLES: usize = 200;
/// Default slack in [`certify_on_model`].
pub const CERTIFY_SLACK: f64 = 1e-9;

/// Evaluates `p_minus(Hess u, l) - h |grad u|` along the canonical inward ray
/// of a model domain on a uniform grid of `r` in `(0, min(R, reach))`.
pub fn certify_on_model(
    cert: &BarrierCertificate,
    domain: &DomainSpec,
    samples: usize,
    slack: f64,
) -> Result<CertifyReport> {
    if samples == 0 {
        return Err(Error::param("samples", "must be positive"));
    }
    let r_max = cert.params.r.min(domain.reach());
    if !(r_max > 0.0) {
        return Err(Error::NoClosedForm(
            "domain has no closed-form distance Hessian".into(),
        ));
    }
    let ell = cert.params.ell;
    if ell >= domain.ambient_dim {
        return Err(Error::param("ell", "must be below the ambient dimension"));
    }
    let mut min_lhs = f64::INFINITY;
    for i in 0..samples {
        let r = r_max * (i as f64 + 0.5) / samples as f64;
        let x = domain.inward_ray(r)?;
        let dd = domain.distance_hessian(&x)?;
        let hu = barrier_hessian(cert, &dd.grad, &dd.hess, dd.r)?;
        let (_, grad_norm) = eval_barrier(cert, dd.r)?;
        let lhs = p_minus(&hu, ell)? - cert.params.h * grad_norm;
        min_lhs = min_lhs.min(lhs);
    }
    let strict = cert.is_strict();
    let target = if strict { cert.delta_bar } else { 0.0 };
    let margin = min_lhs - target;
    Ok(CertifyReport {
        samples,
        r_max,
        min_lhs,
        margin,
        target,
        strict,
        passed: margin >= -slack,
        slack,
        note: (!strict).then(|| "no strict certificate: h = lambda_ell gives delta_bar = 0".into()),
    })
}
