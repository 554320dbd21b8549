//! Adaptive Dormand-Prince 5(4) integrator for `y' = f(t, y)` on flat state
//! vectors, with a per-step hook that may project the state or stop.

use crate::error::{Error, Result};

/// Step-size control options.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the tolerances when `None`.
    pub h0: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h0: None,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }
}

/// Returned by the step hook.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    Stop,
}

/// Accepted samples of an integration.
#[derive(Debug, Clone, Default)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// Time at which the hook stopped the integration.
    pub stopped_at: Option<f64>,
    pub steps: usize,
    pub rejected: usize,
}

impl OdeSolution {
    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.t.last().map(|&t| (t, self.y.last().unwrap().as_slice()))
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates from `t0` to `t1 > t0`.
///
/// With an empty `t_eval` every accepted step is recorded; otherwise steps are
/// clipped so that each requested time is hit exactly and only those times
/// (plus `t0`) are recorded. The hook runs after every accepted step and may
/// modify the state in place.
pub fn integrate<F, H>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
    t_eval: &[f64],
    mut hook: H,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    H: FnMut(f64, &mut [f64]) -> StepAction,
{
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::param("t1", format!("need finite t0 < t1, got [{t0}, {t1}]")));
    }
    if !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(Error::param("tol", "tolerances must be positive"));
    }
    if t_eval.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("t_eval", "must be sorted ascending"));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut sol = OdeSolution::default();
    sol.t.push(t0);
    sol.y.push(y.clone());
    let mut targets = t_eval.iter().copied().filter(|&s| s > t0 && s <= t1).peekable();

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    f(t, &y, &mut k1);
    let span = t1 - t0;
    let mut h = opts.h0.unwrap_or_else(|| {
        let d0 = rms_scaled(&y, &y, opts);
        let d1 = rms_scaled(&k1, &y, opts);
        let guess = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        guess.min(span)
    });
    h = h.min(opts.h_max).max(opts.h_min);

    while t < t1 {
        if sol.steps + sol.rejected >= opts.max_steps {
            return Err(Error::Integrator {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let mut stop_at = t1;
        if let Some(&s) = targets.peek() {
            stop_at = s;
        }
        let mut h_step = h;
        let mut clipped = false;
        if t + h_step >= stop_at {
            h_step = stop_at - t;
            clipped = true;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h_step * A21 * k1[i];
        }
        f(t + C2 * h_step, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h_step * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h_step, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h_step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h_step, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h_step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h_step, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + h_step * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h_step, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i]
                + h_step * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f(t + h_step, &ynew, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = h_step
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = if n == 0 { 0.0 } else { (err / n as f64).sqrt() };
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            sol.rejected += 1;
            h = h_step * 0.1;
            if h < opts.h_min {
                return Err(Error::Integrator {
                    t,
                    reason: "non-finite state".into(),
                });
            }
            continue;
        }

        if err <= 1.0 {
            t = if clipped { stop_at } else { t + h_step };
            std::mem::swap(&mut y, &mut ynew);
            sol.steps += 1;
            let action = hook(t, &mut y);
            // FSAL is invalid if the hook projected the state
            f(t, &y, &mut k1);
            let hit_target = clipped && targets.peek().is_some_and(|&s| s == stop_at);
            if hit_target {
                targets.next();
            }
            if t_eval.is_empty() || hit_target {
                sol.t.push(t);
                sol.y.push(y.clone());
            }
            if action == StepAction::Stop {
                if !(t_eval.is_empty() || hit_target) {
                    sol.t.push(t);
                    sol.y.push(y.clone());
                }
                sol.stopped_at = Some(t);
                return Ok(sol);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // keep the unclipped step size when the clip was only for output
            h = (h.max(h_step) * fac).min(opts.h_max);
        } else {
            sol.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h = h_step * fac;
            if h < opts.h_min {
                return Err(Error::Integrator {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
        }
    }
    Ok(sol)
}

fn rms_scaled(v: &[f64], y: &[f64], opts: &OdeOptions) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let sc = opts.atol + opts.rtol * b.abs();
            (a / sc) * (a / sc)
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

/// Integrates without a hook and returns the state at `t1`.
pub fn integrate_to<F>(f: F, t0: f64, y0: &[f64], t1: f64, opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let sol = integrate(f, t0, y0, t1, opts, &[t1], |_, _| StepAction::Continue)?;
    Ok(sol.y.last().cloned().unwrap_or_default())
}
