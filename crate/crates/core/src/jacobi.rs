//! Matrix Riccati and Jacobi tensors along a unit-speed geodesic leaving a
//! hypersurface orthogonally.
//!
//! With `R(t)` the curvature operator on the normal bundle of the geodesic,
//! the shape operator of the parallel hypersurfaces solves
//! `B' + B^2 + R = 0` with `B(0) = -II`, and the Jacobi tensor `J` with
//! `J'' + R J = 0`, `J(0) = I`, `J'(0) = B(0)` satisfies `B = J' J^{-1}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modelspace::{riccati_closed_form, ModelCurvature};
use crate::ode::{integrate, integrate_to, OdeOptions, StepAction};
use crate::spectral::{p_minus, p_plus, trace_over_subspace, columns, SymmetricForm};

pub type CurvatureFn = Arc<dyn Fn(f64) -> SymmetricForm + Send + Sync>;

/// Curvature operator `t -> R(t)` on the `dim`-dimensional normal space.
#[derive(Clone)]
pub struct CurvatureProfile {
    dim: usize,
    r_of_t: CurvatureFn,
    horizon: f64,
}

impl std::fmt::Debug for CurvatureProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CurvatureProfile")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl CurvatureProfile {
    pub fn new(
        dim: usize,
        horizon: f64,
        r_of_t: impl Fn(f64) -> SymmetricForm + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::param("horizon", "must be positive and finite"));
        }
        let r0 = r_of_t(0.0);
        if r0.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r0.dim(),
            });
        }
        Ok(CurvatureProfile {
            dim,
            r_of_t: Arc::new(r_of_t),
            horizon,
        })
    }

    /// Time-independent profile.
    pub fn constant(r: SymmetricForm, horizon: f64) -> Result<Self> {
        let dim = r.dim();
        CurvatureProfile::new(dim, horizon, move |_| r.clone())
    }

    /// Model profile `R = -c I` of the space form with `Ric = -c`.
    pub fn model(dim: usize, c: ModelCurvature, horizon: f64) -> Result<Self> {
        CurvatureProfile::constant(SymmetricForm::scaled_identity(dim, -c.value()), horizon)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eval(&self, t: f64) -> Result<SymmetricForm> {
        let r = (self.r_of_t)(t);
        if r.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: r.dim(),
            });
        }
        Ok(r)
    }

    fn check_end(&self, t_end: f64) -> Result<()> {
        if !(t_end > 0.0) || t_end > self.horizon * (1.0 + 1e-12) {
            return Err(Error::param(
                "T",
                format!("must lie in (0, {}], got {t_end}", self.horizon),
            ));
        }
        Ok(())
    }
}

/// Samples of the Riccati solution.
#[derive(Debug, Clone)]
pub struct RiccatiTrajectory {
    pub times: Vec<f64>,
    pub b: Vec<SymmetricForm>,
    /// First time at which the spectral norm exceeded `1 / tol`.
    pub blowup_time: Option<f64>,
}

impl RiccatiTrajectory {
    /// Largest spectral norm over the samples. An empirical two-sided bound on
    /// the distance Hessian along this geodesic, not a uniform constant.
    pub fn max_norm(&self) -> f64 {
        self.b.iter().map(SymmetricForm::norm).fold(0.0, f64::max)
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::param("tol", format!("must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

fn mat(dim: usize, y: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(dim, dim, y)
}

fn symmetrize_in_place(dim: usize, y: &mut [f64]) {
    for i in 0..dim {
        for j in (i + 1)..dim {
            let a = 0.5 * (y[i + j * dim] + y[j + i * dim]);
            y[i + j * dim] = a;
            y[j + i * dim] = a;
        }
    }
}

fn spectral_norm_exceeds(dim: usize, y: &[f64], threshold: f64) -> bool {
    let frob = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob <= threshold {
        return false;
    }
    if y.iter().any(|v| !v.is_finite()) {
        return true;
    }
    let m = mat(dim, y);
    m.symmetric_eigenvalues().iter().any(|v| v.abs() > threshold)
}

fn riccati_options(tol: f64, t_end: f64) -> OdeOptions {
    OdeOptions {
        rtol: tol,
        atol: tol,
        h_max: t_end / 64.0,
        ..Default::default()
    }
}

/// Integrates `B' = -B^2 - R(t)` on `[0, T]`, recording every accepted step.
pub fn integrate_riccati(
    profile: &CurvatureProfile,
    b0: &SymmetricForm,
    t_end: f64,
    tol: f64,
) -> Result<RiccatiTrajectory> {
    integrate_riccati_grid(profile, b0, t_end, tol, &[])
}

/// As [`integrate_riccati`], recording only `t = 0` and the given sample times.
pub fn integrate_riccati_grid(
    profile: &CurvatureProfile,
    b0: &SymmetricForm,
    t_end: f64,
    tol: f64,
    times: &[f64],
) -> Result<RiccatiTrajectory> {
    check_tol(tol)?;
    profile.check_end(t_end)?;
    let d = profile.dim;
    if b0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: b0.dim(),
        });
    }
    let threshold = 1.0 / tol;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let b = mat(d, y);
        let r = (profile.r_of_t)(t);
        let out = -(&b * &b) - r.matrix();
        dy.copy_from_slice(out.as_slice());
    };
    let sol = integrate(
        rhs,
        0.0,
        b0.matrix().as_slice(),
        t_end,
        &riccati_options(tol, t_end),
        times,
        |_, y| {
            symmetrize_in_place(d, y);
            if spectral_norm_exceeds(d, y, threshold) {
                StepAction::Stop
            } else {
                StepAction::Continue
            }
        },
    )?;
    let mut out_t = Vec::with_capacity(sol.t.len());
    let mut out_b = Vec::with_capacity(sol.t.len());
    for (t, y) in sol.t.iter().zip(&sol.y) {
        if sol.stopped_at == Some(*t) {
            break;
        }
        out_t.push(*t);
        out_b.push(SymmetricForm::new(mat(d, y))?);
    }
    Ok(RiccatiTrajectory {
        times: out_t,
        b: out_b,
        blowup_time: sol.stopped_at,
    })
}

/// Samples of the Jacobi tensor and its derivative.
#[derive(Debug, Clone)]
pub struct JacobiTrajectory {
    pub times: Vec<f64>,
    pub j: Vec<DMatrix<f64>>,
    pub j_prime: Vec<DMatrix<f64>>,
    /// First time at which `J` becomes singular.
    pub first_focal: Option<f64>,
}

impl JacobiTrajectory {
    /// Largest `|J'^T J - J^T J'|` (Frobenius) along the samples.
    pub fn lagrange_defect(&self) -> f64 {
        self.j
            .iter()
            .zip(&self.j_prime)
            .map(|(j, jp)| (jp.transpose() * j - j.transpose() * jp).norm())
            .fold(0.0, f64::max)
    }
}

/// Smallest singular value below which a local minimum counts as focal.
pub const FOCAL_SIGMA_TOL: f64 = 1e-6;
const FOCAL_TIME_TOL: f64 = 1e-8;

fn jacobi_rhs<'a>(profile: &'a CurvatureProfile) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    let d = profile.dim;
    move |t, y, dy| {
        let n = d * d;
        dy[..n].copy_from_slice(&y[n..]);
        let j = mat(d, &y[..n]);
        let r = (profile.r_of_t)(t);
        let out = -(r.matrix() * j);
        dy[n..].copy_from_slice(out.as_slice());
    }
}

fn split_state(d: usize, y: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    (mat(d, &y[..d * d]), mat(d, &y[d * d..]))
}

fn sigma_min(j: &DMatrix<f64>) -> f64 {
    j.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Integrates `J'' + R J = 0`, `J(0) = I`, `J'(0) = Jprime0` on `[0, T]`.
///
/// A focal time is reported at a sign change of `det J` (refined by
/// bisection) or at a local minimum of the smallest singular value of `J`
/// below [`FOCAL_SIGMA_TOL`] (refined by golden-section search); the second
/// test catches zeros of even multiplicity.
pub fn integrate_jacobi(
    profile: &CurvatureProfile,
    j_prime0: &SymmetricForm,
    t_end: f64,
    tol: f64,
) -> Result<JacobiTrajectory> {
    check_tol(tol)?;
    profile.check_end(t_end)?;
    let d = profile.dim;
    if j_prime0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: j_prime0.dim(),
        });
    }
    let mut y0 = DMatrix::<f64>::identity(d, d).as_slice().to_vec();
    y0.extend_from_slice(j_prime0.matrix().as_slice());
    let opts = OdeOptions {
        rtol: tol,
        atol: tol,
        h_max: t_end / 256.0,
        ..Default::default()
    };
    let sol = integrate(jacobi_rhs(profile), 0.0, &y0, t_end, &opts, &[], |_, _| {
        StepAction::Continue
    })?;
    let mut times = Vec::with_capacity(sol.t.len());
    let mut js = Vec::with_capacity(sol.t.len());
    let mut jps = Vec::with_capacity(sol.t.len());
    for (t, y) in sol.t.iter().zip(&sol.y) {
        let (j, jp) = split_state(d, y);
        times.push(*t);
        js.push(j);
        jps.push(jp);
    }
    let first_focal = locate_focal(profile, &sol.t, &sol.y, &opts)?;
    Ok(JacobiTrajectory {
        times,
        j: js,
        j_prime: jps,
        first_focal,
    })
}

fn locate_focal(
    profile: &CurvatureProfile,
    ts: &[f64],
    ys: &[Vec<f64>],
    opts: &OdeOptions,
) -> Result<Option<f64>> {
    let d = profile.dim;
    let n = d * d;
    let dets: Vec<f64> = ys.iter().map(|y| mat(d, &y[..n]).determinant()).collect();
    let sig: Vec<f64> = ys.iter().map(|y| sigma_min(&mat(d, &y[..n]))).collect();
    let advance = |k: usize, t: f64| -> Result<Vec<f64>> {
        if t <= ts[k] {
            return Ok(ys[k].clone());
        }
        integrate_to(jacobi_rhs(profile), ts[k], &ys[k], t, opts)
    };
    for k in 1..ts.len() {
        if dets[k] == 0.0 {
            return Ok(Some(ts[k]));
        }
        if dets[k].signum() != dets[k - 1].signum() {
            let (mut a, mut b) = (ts[k - 1], ts[k]);
            let s0 = dets[k - 1].signum();
            while b - a > FOCAL_TIME_TOL {
                let mid = 0.5 * (a + b);
                let y = advance(k - 1, mid)?;
                if mat(d, &y[..n]).determinant().signum() == s0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        if k >= 2 && sig[k - 1] < sig[k - 2] && sig[k - 1] <= sig[k] {
            let (mut a, mut b) = (ts[k - 2], ts[k]);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let eval = |t: f64| -> Result<f64> {
                let y = advance(k - 2, t)?;
                Ok(sigma_min(&mat(d, &y[..n])))
            };
            let mut x1 = b - g * (b - a);
            let mut x2 = a + g * (b - a);
            let mut f1 = eval(x1)?;
            let mut f2 = eval(x2)?;
            while b - a > FOCAL_TIME_TOL {
                if f1 < f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = eval(x1)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = eval(x2)?;
                }
            }
            let t_min = 0.5 * (a + b);
            if eval(t_min)? <= FOCAL_SIGMA_TOL {
                return Ok(Some(t_min));
            }
        }
    }
    Ok(None)
}

/// `J(t)` and `J'(t)` at a single time.
pub fn jacobi_at(
    profile: &CurvatureProfile,
    j_prime0: &SymmetricForm,
    t: f64,
    tol: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_tol(tol)?;
    profile.check_end(t)?;
    let d = profile.dim;
    let mut y0 = DMatrix::<f64>::identity(d, d).as_slice().to_vec();
    y0.extend_from_slice(j_prime0.matrix().as_slice());
    let y = integrate_to(jacobi_rhs(profile), 0.0, &y0, t, &OdeOptions::with_tol(tol))?;
    Ok(split_state(d, &y))
}

/// First focal time of the Jacobi tensor with `J'(0) = B0`, together with a
/// unit vector spanning (approximately) the kernel of `J` there.
pub fn focal_kernel(
    profile: &CurvatureProfile,
    b0: &SymmetricForm,
    tol: f64,
) -> Result<Option<(f64, DVector<f64>)>> {
    let traj = integrate_jacobi(profile, b0, profile.horizon, tol)?;
    let Some(tf) = traj.first_focal else {
        return Ok(None);
    };
    let (j, _) = jacobi_at(profile, b0, tf, tol)?;
    let svd = j.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Integrator {
        t: tf,
        reason: "singular value decomposition failed".into(),
    })?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let v = vt.row(imin).transpose().normalize();
    Ok(Some((tf, v)))
}

/// Bent second fundamental form `II - eps I`.
pub fn epsilon_bend(ii: &SymmetricForm, eps: f64) -> Result<SymmetricForm> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", format!("must be finite and >= 0, got {eps}")));
    }
    Ok(ii.shift(-eps))
}

/// Second variation of energy evaluated along the damped field
/// `Vbar(t) = J_eps(t) v exp(-eps t)` by two routes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondVariation {
    /// `<B0 v, v> + int (|Vbar'|^2 - <R Vbar, Vbar>)`.
    pub index_form: f64,
    /// `-eps + eps^2 int |Vbar|^2`.
    pub closed_form: f64,
    /// `|J_eps(T) v|`.
    pub kernel_residual: f64,
    /// `sup |Vbar|` over the quadrature nodes.
    pub sup_field: f64,
}

/// Relative tolerance on `|J_eps(T) v|` for `v` to count as a kernel vector.
pub const KERNEL_TOL: f64 = 1e-6;

/// Evaluates the second variation for the bent initial condition
/// `B_eps(0) = B0 + eps I`, where `v` must lie in the kernel of `J_eps(T)`.
pub fn second_variation(
    profile: &CurvatureProfile,
    b0: &SymmetricForm,
    eps: f64,
    t_end: f64,
    v: &DVector<f64>,
) -> Result<SecondVariation> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", "must be finite and >= 0"));
    }
    profile.check_end(t_end)?;
    let d = profile.dim;
    if b0.dim() != d || v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if b0.dim() != d { b0.dim() } else { v.len() },
        });
    }
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::param("v", "must be a unit vector"));
    }
    let b_eps = b0.shift(eps);
    // state: V, V', int_a, int_b
    let mut y0 = v.as_slice().to_vec();
    y0.extend_from_slice((b_eps.matrix() * v).as_slice());
    y0.extend_from_slice(&[0.0, 0.0]);
    let mut sup_field = 1.0f64;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let vv = DVector::from_column_slice(&y[..d]);
        let vp = DVector::from_column_slice(&y[d..2 * d]);
        let r = (profile.r_of_t)(t);
        let rv = r.matrix() * &vv;
        dy[..d].copy_from_slice(vp.as_slice());
        for i in 0..d {
            dy[d + i] = -rv[i];
        }
        let w = (-2.0 * eps * t).exp();
        let damped = &vp - &vv * eps;
        dy[2 * d] = w * (damped.norm_squared() - vv.dot(&rv));
        dy[2 * d + 1] = w * vv.norm_squared();
    };
    let opts = OdeOptions {
        rtol: 1e-12,
        atol: 1e-13,
        h_max: t_end / 256.0,
        ..Default::default()
    };
    let sol = integrate(rhs, 0.0, &y0, t_end, &opts, &[], |t, y| {
        let n = y[..d].iter().map(|a| a * a).sum::<f64>().sqrt();
        sup_field = sup_field.max(n * (-eps * t).exp());
        StepAction::Continue
    })?;
    let (_, y) = sol.last().ok_or_else(|| Error::Integrator {
        t: 0.0,
        reason: "empty solution".into(),
    })?;
    let kernel_residual = y[..d].iter().map(|a| a * a).sum::<f64>().sqrt();
    if kernel_residual > KERNEL_TOL {
        return Err(Error::Hypothesis(format!(
            "v is not in the kernel of J_eps(T): |J_eps(T) v| = {kernel_residual:e}"
        )));
    }
    Ok(SecondVariation {
        index_form: b0.quadratic(v) + y[2 * d],
        closed_form: -eps + eps * eps * y[2 * d + 1],
        kernel_residual,
        sup_field,
    })
}

/// Outcome of [`verify_comparison`].
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub samples: usize,
    pub frames_per_sample: usize,
    /// Largest `(1/l) Tr_W B(t) - f(-Lambda, c, t)` over all tested frames.
    pub max_violation: f64,
    /// Largest `|p_plus(B(t), l) - f| / max(1, |f|)` with `f = f(-Lambda, c, t)`;
    /// zero in the model case.
    pub max_gap_extremal: f64,
    /// Number of samples where the violation exceeded the slack.
    pub violations: usize,
    pub slack: f64,
    pub blowup_time: Option<f64>,
    pub model_domain_end: f64,
    pub t_checked: f64,
}

/// Options for [`verify_comparison`].
#[derive(Debug, Clone, Copy)]
pub struct ComparisonOptions {
    pub samples: usize,
    pub random_frames: usize,
    pub seed: u64,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        ComparisonOptions {
            samples: 101,
            random_frames: 4,
            seed: 0x5eed,
        }
    }
}

/// Audits `(1/l) Tr_W B(t) <= f(-Lambda, c, t)` along the Riccati solution
/// with `B(0) = -II`, over the extremal and random `l`-frames.
///
/// The extremal frame for an upper bound is the span of the eigenvectors of
/// the `l` largest eigenvalues of `B(t)`; the frame of the `l` smallest ones
/// is tested as well.
#[allow(clippy::too_many_arguments)]
pub fn verify_comparison(
    profile: &CurvatureProfile,
    ii: &SymmetricForm,
    lambda_ell: f64,
    c: ModelCurvature,
    ell: usize,
    t_end: f64,
    tol: f64,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport> {
    use crate::modelspace::RiccatiState;
    use rand::Rng;

    check_tol(tol)?;
    profile.check_end(t_end)?;
    if opts.samples < 2 {
        return Err(Error::param("samples", "need at least 2"));
    }
    let d = profile.dim;
    let pm_ii = p_minus(ii, ell)?;
    if pm_ii < lambda_ell - 1e-12 {
        return Err(Error::Hypothesis(format!(
            "p_minus(II, {ell}) = {pm_ii} < Lambda = {lambda_ell}"
        )));
    }
    let model = RiccatiState::new(-lambda_ell, c, t_end)?;
    let t_max = model.domain_end.min(t_end);
    let times: Vec<f64> = (1..opts.samples)
        .map(|i| t_max * i as f64 / (opts.samples - 1) as f64)
        .collect();
    for &t in std::iter::once(&0.0).chain(&times) {
        let pm = p_minus(&profile.eval(t)?, ell)?;
        if pm < -c.value() - 1e-12 {
            return Err(Error::Hypothesis(format!(
                "p_minus(R({t}), {ell}) = {pm} < -c = {}",
                -c.value()
            )));
        }
    }
    let traj = integrate_riccati_grid(profile, &ii.scale(-1.0), t_max, tol, &times)?;
    let slack = 10.0 * tol;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut max_violation = f64::NEG_INFINITY;
    let mut max_gap = 0.0f64;
    let mut violations = 0;
    let mut t_checked = 0.0;
    let mut samples = 0;
    for (t, b) in traj.times.iter().zip(&traj.b) {
        let f = match riccati_closed_form(-lambda_ell, c, *t) {
            Ok(f) => f,
            Err(Error::BlowUp { .. }) => break,
            Err(e) => return Err(e),
        };
        let (_, vecs) = b.eigen();
        let mut frames: Vec<Vec<DVector<f64>>> = vec![
            columns(&vecs.columns(d - ell, ell).into_owned()),
            columns(&vecs.columns(0, ell).into_owned()),
        ];
        for _ in 0..opts.random_frames {
            let raw = DMatrix::from_fn(d, ell, |_, _| rng.gen_range(-1.0..1.0));
            frames.push(columns(&raw.qr().q()));
        }
        let scale = f.abs().max(1.0);
        let mut worst = f64::NEG_INFINITY;
        for w in &frames {
            let val = trace_over_subspace(b, w)? / ell as f64;
            worst = worst.max(val - f);
        }
        if worst > slack * scale {
            violations += 1;
        }
        max_violation = max_violation.max(worst);
        max_gap = max_gap.max((p_plus(b, ell)? - f).abs() / scale);
        t_checked = *t;
        samples += 1;
    }
    Ok(ComparisonReport {
        samples,
        frames_per_sample: 2 + opts.random_frames,
        max_violation,
        max_gap_extremal: max_gap,
        violations,
        slack,
        blowup_time: traj.blowup_time,
        model_domain_end: model.domain_end,
        t_checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn mc(c: f64) -> ModelCurvature {
        ModelCurvature::new(c).unwrap()
    }

    #[test]
    fn flat_zero_is_stationary() {
        let p = CurvatureProfile::constant(SymmetricForm::zeros(3), 2.0).unwrap();
        let tr = integrate_riccati(&p, &SymmetricForm::zeros(3), 2.0, 1e-8).unwrap();
        assert!(tr.blowup_time.is_none());
        assert!(tr.b.iter().all(|b| b.matrix().norm() == 0.0));
    }

    #[test]
    fn max_norm_of_hyperbolic_model() {
        let p = CurvatureProfile::model(2, mc(1.0), 2.0).unwrap();
        let tr = integrate_riccati(&p, &SymmetricForm::scaled_identity(2, 3.0), 2.0, 1e-9).unwrap();
        // B(t) = coth(t + atanh(1/3)) I decreases from 3 towards 1
        assert!((tr.max_norm() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn flat_blowup_matches_scalar() {
        let p = CurvatureProfile::constant(SymmetricForm::zeros(2), 2.0).unwrap();
        let b0 = SymmetricForm::scaled_identity(2, -1.0);
        let tr = integrate_riccati(&p, &b0, 2.0, 1e-8).unwrap();
        let tb = tr.blowup_time.unwrap();
        assert!(tb < 1.0 && tb > 1.0 - 1e-6, "{tb}");
        for (t, b) in tr.times.iter().zip(&tr.b) {
            let exact = riccati_closed_form(-1.0, mc(0.0), *t).unwrap();
            assert!(b.matrix()[(0, 1)].abs() < 1e-12);
            // the reciprocal -(1 - t) is linear and carries no blow-up amplification
            let err = (1.0 / b.matrix()[(0, 0)] - 1.0 / exact).abs();
            assert!(err <= 1e-7, "t={t} err={err}");
        }
    }

    #[test]
    fn hyperbolic_model_matches_scalar() {
        let p = CurvatureProfile::model(3, mc(1.0), 3.0).unwrap();
        let b0 = SymmetricForm::scaled_identity(3, -1.0);
        let times: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
        let tr = integrate_riccati_grid(&p, &b0, 3.0, 1e-11, &times).unwrap();
        for (t, b) in tr.times.iter().zip(&tr.b) {
            let exact = riccati_closed_form(-1.0, mc(1.0), *t).unwrap();
            assert!((b.matrix() - DMatrix::identity(3, 3) * exact).norm() < 1e-9);
        }
    }

    #[test]
    fn flat_jacobi_linear() {
        let p = CurvatureProfile::constant(SymmetricForm::zeros(2), 3.0).unwrap();
        let tr = integrate_jacobi(&p, &SymmetricForm::scaled_identity(2, 0.5), 3.0, 1e-10).unwrap();
        assert!(tr.first_focal.is_none());
        for (t, j) in tr.times.iter().zip(&tr.j) {
            assert!((j - DMatrix::identity(2, 2) * (1.0 + 0.5 * t)).norm() < 1e-9);
        }
    }

    #[test]
    fn sphere_focal_even_and_odd_dimension() {
        for dim in [1, 2, 3, 4] {
            let p = CurvatureProfile::constant(SymmetricForm::identity(dim), 3.0).unwrap();
            let tr = integrate_jacobi(&p, &SymmetricForm::zeros(dim), 3.0, 1e-10).unwrap();
            let tf = tr.first_focal.unwrap();
            assert!((tf - FRAC_PI_2).abs() < 1e-4, "dim {dim}: {tf}");
            assert!(tr.lagrange_defect() < 1e-9);
        }
    }

    #[test]
    fn bending_delays_focal_time() {
        let p = CurvatureProfile::constant(SymmetricForm::identity(2), 3.0).unwrap();
        let mut prev = 0.0;
        for eps in [0.0, 0.1, 0.2] {
            let b = SymmetricForm::scaled_identity(2, eps);
            let tf = integrate_jacobi(&p, &b, 3.0, 1e-10).unwrap().first_focal.unwrap();
            // J = cos t + eps sin t vanishes at pi/2 + atan(eps)
            assert!((tf - (FRAC_PI_2 + eps.atan())).abs() < 1e-6);
            assert!(tf > prev);
            prev = tf;
        }
    }

    #[test]
    fn epsilon_bend_examples() {
        let ii = SymmetricForm::identity(3);
        assert_eq!(epsilon_bend(&ii, 0.0).unwrap(), ii);
        let b = epsilon_bend(&ii, 0.25).unwrap();
        assert!((b.matrix() - DMatrix::identity(3, 3) * 0.75).norm() < 1e-15);
        assert!(epsilon_bend(&ii, -0.1).is_err());
    }

    #[test]
    fn second_variation_routes_agree_on_sphere() {
        let p = CurvatureProfile::constant(SymmetricForm::identity(2), 3.0).unwrap();
        let b0 = SymmetricForm::zeros(2);
        for eps in [0.0, 0.05, 0.2] {
            let (tf, v) = focal_kernel(&p, &b0.shift(eps), 1e-11).unwrap().unwrap();
            let sv = second_variation(&p, &b0, eps, tf, &v).unwrap();
            assert!((sv.index_form - sv.closed_form).abs() < 1e-6, "{sv:?}");
            if eps == 0.0 {
                assert!(sv.index_form.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn second_variation_rejects_non_kernel() {
        let p = CurvatureProfile::constant(SymmetricForm::identity(2), 3.0).unwrap();
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let r = second_variation(&p, &SymmetricForm::zeros(2), 0.0, 1.0, &v);
        assert!(matches!(r, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn comparison_saturated_in_model() {
        for (c, lam) in [(1.0, 0.5), (0.0, 0.5), (-1.0, 0.2), (1.0, 2.0)] {
            let p = CurvatureProfile::model(3, mc(c), 1.0).unwrap();
            let ii = SymmetricForm::scaled_identity(3, lam);
            let rep =
                verify_comparison(&p, &ii, lam, mc(c), 2, 1.0, 1e-11, &Default::default()).unwrap();
            assert_eq!(rep.violations, 0, "{rep:?}");
            assert!(rep.max_gap_extremal < 1e-8, "{rep:?}");
        }
    }

    #[test]
    fn comparison_rejects_bad_hypotheses() {
        let p = CurvatureProfile::model(3, mc(1.0), 1.0).unwrap();
        let ii = SymmetricForm::scaled_identity(3, 0.5);
        let r = verify_comparison(&p, &ii, 0.6, mc(1.0), 2, 1.0, 1e-8, &Default::default());
        assert!(matches!(r, Err(Error::Hypothesis(_))));
        let r = verify_comparison(&p, &ii, 0.5, mc(0.5), 2, 1.0, 1e-8, &Default::default());
        assert!(matches!(r, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn riccati_equals_jprime_jinv() {
        let p = CurvatureProfile::new(2, 1.0, |t| {
            SymmetricForm::from_row_slice(2, &[0.3 + t, 0.2, 0.2, -0.5]).unwrap()
        })
        .unwrap();
        let b0 = SymmetricForm::from_row_slice(2, &[0.1, -0.3, -0.3, 0.4]).unwrap();
        let tol = 1e-10;
        let tr = integrate_riccati_grid(&p, &b0, 1.0, tol, &[0.25, 0.5, 1.0]).unwrap();
        for (t, b) in tr.times.iter().zip(&tr.b).skip(1) {
            let (j, jp) = jacobi_at(&p, &b0, *t, tol).unwrap();
            let via = jp * j.try_inverse().unwrap();
            assert!((via - b.matrix()).norm() < 10.0 * tol * 10.0);
        }
    }
}
