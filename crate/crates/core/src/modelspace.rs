//! Model-space Jacobi functions and the scalar Riccati comparison solution.
//!
//! For a curvature parameter `c`, `sn_c` solves `x'' - c x = 0` with
//! `x(0) = 0, x'(0) = 1` and `cn_c = sn_c'`. The comparison function
//!
//! ```text
//! f(tau, t) = (tau cn_c(t) + c sn_c(t)) / (cn_c(t) + tau sn_c(t))
//! ```
//!
//! is the solution of `theta' + theta^2 - c = 0` with `theta(0) = tau`, and is
//! valid as long as the denominator stays positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `|c| t^2` the power series branch is used.
const SERIES_THRESHOLD: f64 = 1e-8;

/// Relative cutoff on the Riccati denominator.
pub const DENOMINATOR_TOL: f64 = 1e-10;

/// Curvature parameter `c` of the lower bound `Ric >= -c`.
///
/// `c > 0` is the hyperbolic-like model, `c < 0` the spherical one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCurvature(f64);

impl ModelCurvature {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::param("c", format!("must be finite, got {c}")));
        }
        Ok(ModelCurvature(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `sqrt(max(c, 0))`.
    pub fn sqrt_pos(self) -> f64 {
        self.0.max(0.0).sqrt()
    }

    pub fn sn(self, t: f64) -> f64 {
        sn(self.0, t)
    }

    pub fn cn(self, t: f64) -> f64 {
        cn(self.0, t)
    }
}

impl TryFrom<f64> for ModelCurvature {
    type Error = Error;
    fn try_from(c: f64) -> Result<Self> {
        ModelCurvature::new(c)
    }
}

/// `sn_c(t)`, continuous in `c` across zero.
pub fn sn(c: f64, t: f64) -> f64 {
    let x = c * t * t;
    if x.abs() < SERIES_THRESHOLD {
        // t (1 + x/6 + x^2/120)
        t * (1.0 + x / 6.0 * (1.0 + x / 20.0))
    } else if c > 0.0 {
        let k = c.sqrt();
        (k * t).sinh() / k
    } else {
        let k = (-c).sqrt();
        (k * t).sin() / k
    }
}

/// `cn_c(t) = sn_c'(t)`.
pub fn cn(c: f64, t: f64) -> f64 {
    let x = c * t * t;
    if x.abs() < SERIES_THRESHOLD {
        // 1 + x/2 + x^2/24
        1.0 + x / 2.0 * (1.0 + x / 12.0)
    } else if c > 0.0 {
        (c.sqrt() * t).cosh()
    } else {
        ((-c).sqrt() * t).cos()
    }
}

/// `cn_c(t) / sn_c(t)`, the principal curvature of a geodesic sphere of radius
/// `t` in the model space of curvature `-c`.
pub fn cot_c(c: f64, t: f64) -> f64 {
    cn(c, t) / sn(c, t)
}

/// Denominator `cn + tau sn` rescaled to be free of cancellation, with its
/// magnitude scale and the rescaling factor `cn + tau sn = den * factor`.
///
/// For `c > 0` with `k = sqrt(c)`,
/// `cn + tau sn = exp(kt) / (2k) * ((k + tau) + (k - tau) exp(-2kt))`.
fn denominator(tau0: f64, c: f64, t: f64) -> (f64, f64, f64) {
    let x = c * t * t;
    if c > 0.0 && x.abs() >= SERIES_THRESHOLD {
        let k = c.sqrt();
        let e = (-2.0 * k * t).exp();
        let den = (k + tau0) + (k - tau0) * e;
        let scale = (k + tau0).abs() + (k - tau0).abs() * e;
        (den, scale, (k * t).exp() / (2.0 * k))
    } else {
        let (s, k) = (sn(c, t), cn(c, t));
        (k + tau0 * s, (k.abs() + (tau0 * s).abs()).max(1.0), 1.0)
    }
}

fn check_denominator(tau0: f64, c: f64, t: f64) -> Result<(f64, f64)> {
    let (den, scale, factor) = denominator(tau0, c, t);
    if den <= DENOMINATOR_TOL * scale {
        return Err(Error::BlowUp {
            t,
            denominator: den * factor,
        });
    }
    Ok((den, factor))
}

/// Closed-form comparison solution `f(tau0, t)`.
pub fn riccati_closed_form(tau0: f64, c: ModelCurvature, t: f64) -> Result<f64> {
    let c = c.value();
    let (den, factor) = check_denominator(tau0, c, t)?;
    if factor != 1.0 {
        let k = c.sqrt();
        let e = (-2.0 * k * t).exp();
        return Ok(k * ((tau0 + k) + (tau0 - k) * e) / den);
    }
    Ok((tau0 * cn(c, t) + c * sn(c, t)) / den)
}

/// Partial derivatives `(f_tau, f_t)` of the comparison solution.
///
/// `f_tau = (cn^2 - c sn^2) / D^2 = 1 / D^2` and `f_t = (c - tau^2) / D^2`.
pub fn riccati_partials(tau0: f64, c: ModelCurvature, t: f64) -> Result<(f64, f64)> {
    let c = c.value();
    let (den, factor) = check_denominator(tau0, c, t)?;
    let d = den * factor;
    let d2 = d * d;
    Ok((1.0 / d2, (c - tau0 * tau0) / d2))
}

/// Initial slope together with the extent of its comparison solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiState {
    pub tau0: f64,
    pub c: ModelCurvature,
    /// Largest `t` (capped at the horizon) on which `cn_c + tau0 sn_c > 0`.
    pub domain_end: f64,
}

impl RiccatiState {
    /// Locates the first zero of the denominator on `[0, horizon]` by a
    /// sign scan followed by bisection. Returns `horizon` if there is none.
    pub fn new(tau0: f64, c: ModelCurvature, horizon: f64) -> Result<Self> {
        if !tau0.is_finite() {
            return Err(Error::param("tau0", "must be finite"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
        }
        let cv = c.value();
        let den = |t: f64| denominator(tau0, cv, t).0;
        let mut step = horizon / 2048.0;
        if cv < 0.0 {
            step = step.min(std::f64::consts::PI / (-cv).sqrt() / 16.0);
        }
        if tau0 < 0.0 {
            // the flat-space zero 1/|tau0| bounds the scale of the first zero
            step = step.min(0.125 / tau0.abs());
        }
        let mut lo = 0.0;
        let mut domain_end = horizon;
        while lo < horizon {
            let hi = (lo + step).min(horizon);
            if den(hi) <= 0.0 {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if den(mid) > 0.0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                    if b - a <= f64::EPSILON * b.max(1.0) {
                        break;
                    }
                }
                domain_end = a;
                break;
            }
            lo = hi;
        }
        Ok(RiccatiState { tau0, c, domain_end })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t > self.domain_end {
            return Err(Error::OutsideDomain(format!(
                "t = {t} outside [0, {}]",
                self.domain_end
            )));
        }
        riccati_closed_form(self.tau0, self.c, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mc(c: f64) -> ModelCurvature {
        ModelCurvature::new(c).unwrap()
    }

    #[test]
    fn sn_branches() {
        assert_eq!(sn(0.0, 3.0), 3.0);
        assert!((sn(1.0, 1.0) - 1.0f64.sinh()).abs() < 1e-15);
        assert!((sn(1.0, 1.0) - 1.175_201_2).abs() < 1e-7);
        assert!((sn(-1.0, 1.0) - 1.0f64.sin()).abs() < 1e-15);
        for c in [-3.0, -1e-9, 0.0, 1e-9, 2.0] {
            assert_eq!(cn(c, 0.0), 1.0);
            assert_eq!(sn(c, 0.0), 0.0);
        }
    }

    #[test]
    fn continuity_at_zero_curvature() {
        for t in [0.1, 1.0, 2.5, 5.0] {
            for c in [1e-8, -1e-8] {
                assert!((sn(c, t) - sn(0.0, t)).abs() < 1e-6);
                assert!((cn(c, t) - cn(0.0, t)).abs() < 1e-6);
            }
        }
        // the two branches agree where they meet
        let t = 1.0;
        let c: f64 = 1.0001e-8;
        let k = c.sqrt();
        assert!(((k * t).sinh() / k - sn(c, t)).abs() < 1e-15);
    }

    #[test]
    fn wronskian_scaled_by_term_magnitude() {
        // Absolute agreement is limited by cancellation between cn^2 and c sn^2;
        // relative to their magnitude the identity holds to a few ulps.
        for i in 0..=80 {
            let c = -4.0 + 0.1 * i as f64;
            for j in 0..=50 {
                let t = 0.1 * j as f64;
                let (s, k) = (sn(c, t), cn(c, t));
                let w = k * k - c * s * s;
                let scale = (k * k + c.abs() * s * s).max(1.0);
                assert!((w - 1.0).abs() <= 1e-13 * scale, "c={c} t={t} w={w}");
            }
        }
    }

    #[test]
    fn riccati_at_origin_and_flat_case() {
        for tau in [-2.0, -0.3, 0.0, 1.5] {
            for c in [-1.0, 0.0, 0.7] {
                assert_eq!(riccati_closed_form(tau, mc(c), 0.0).unwrap(), tau);
            }
        }
        let v = riccati_closed_form(-1.0, mc(0.0), 0.5).unwrap();
        assert!((v + 2.0).abs() < 1e-14);
    }

    #[test]
    fn partials() {
        let (_, ft) = riccati_partials(0.0, mc(0.0), 0.7).unwrap();
        assert_eq!(ft, 0.0);
        let (_, ft) = riccati_partials(-1.0, mc(1.0), 0.0).unwrap();
        assert_eq!(ft, 0.0);
        let (ftau, _) = riccati_partials(-1.0, mc(0.0), 0.5).unwrap();
        assert!((ftau - 4.0).abs() < 1e-12);
    }

    #[test]
    fn blowup_detected() {
        // flat case tau = -1 blows up at t = 1
        assert!(matches!(
            riccati_closed_form(-1.0, mc(0.0), 1.0),
            Err(Error::BlowUp { .. })
        ));
        let st = RiccatiState::new(-1.0, mc(0.0), 5.0).unwrap();
        assert!((st.domain_end - 1.0).abs() < 1e-12);
        assert!(st.eval(1.5).is_err());
        // tau^2 <= c with c > 0 never blows up
        let st = RiccatiState::new(-1.0, mc(1.0), 20.0).unwrap();
        assert_eq!(st.domain_end, 20.0);
        // spherical case: cos t + tau sin t vanishes at atan(-1/tau) for tau < 0,
        // and at pi/2 for tau = 0
        let st = RiccatiState::new(0.0, mc(-1.0), 10.0).unwrap();
        assert!((st.domain_end - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(ModelCurvature::new(f64::NAN).is_err());
        assert!(RiccatiState::new(f64::INFINITY, mc(0.0), 1.0).is_err());
        assert!(RiccatiState::new(0.0, mc(0.0), 0.0).is_err());
    }
}
