//! Dormand–Prince 5(4) with FSAL and PI step-size control for small complex
//! linear systems.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            initial_step: 1e-3,
        }
    }
}

impl IntegratorConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_step: f64, initial_step: f64) -> Result<Self> {
        let c = IntegratorConfig {
            rel_tol,
            abs_tol,
            max_step,
            initial_step,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let min_rel = 100.0 * f64::EPSILON;
        if !(self.rel_tol >= min_rel && self.rel_tol.is_finite()) {
            return Err(Error::invalid("rel_tol", format!("must be >= {min_rel:e}")));
        }
        for (name, v) in [
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("initial_step", self.initial_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Same config with both tolerances multiplied by `f`.
    pub fn scaled_tolerances(&self, f: f64) -> Self {
        IntegratorConfig {
            rel_tol: self.rel_tol * f,
            abs_tol: self.abs_tol * f,
            ..*self
        }
    }
}

/// Right-hand side y' = f(t, y) plus the hooks the driver needs.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[Complex64; N]) -> Result<[Complex64; N]>;

    /// Per-component error scale. The default measures the absolute part
    /// against the state norm, which suits linear equations whose solution
    /// may grow or decay by many orders of magnitude.
    fn error_scale(&self, y: &[Complex64; N], y_new: &[Complex64; N], cfg: &IntegratorConfig) -> [f64; N] {
        let norm = state_norm(y).max(state_norm(y_new));
        std::array::from_fn(|i| cfg.abs_tol * norm + cfg.rel_tol * y[i].norm().max(y_new[i].norm()))
    }

    /// Called after each accepted step. May rescale `y` in place and returns
    /// the natural log of the factor that was divided out (0 if untouched).
    fn rescale(&self, _y: &mut [Complex64; N]) -> f64 {
        0.0
    }
}

pub fn state_norm<const N: usize>(y: &[Complex64; N]) -> f64 {
    y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
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
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const ALPHA: f64 = 0.7 / 5.0;
const BETA: f64 = 0.4 / 5.0;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

fn combine<const N: usize>(y: &[Complex64; N], h: f64, terms: &[(f64, &[Complex64; N])]) -> [Complex64; N] {
    std::array::from_fn(|i| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, k) in terms {
            acc += *w * k[i];
        }
        y[i] + h * acc
    })
}

/// Integrates from `t0` to `t_end`.
///
/// `outputs` must be sorted and inside `[t0, t_end]`; steps are clipped to
/// land on each of them and `observe(t, y, log_scale, is_output)` is called
/// there. With `record_internal` every accepted step is observed as well.
/// The true solution is `y·exp(log_scale)`.
#[allow(clippy::too_many_arguments)]
pub fn integrate<const N: usize, S, F>(
    sys: &S,
    t0: f64,
    y0: [Complex64; N],
    t_end: f64,
    outputs: &[f64],
    cfg: &IntegratorConfig,
    record_internal: bool,
    mut observe: F,
) -> Result<StepStats>
where
    S: OdeSystem<N>,
    F: FnMut(f64, &[Complex64; N], f64, bool),
{
    cfg.validate()?;
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut log_scale = sys.rescale(&mut y);
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        observe(t0, &y, log_scale, true);
        next_out += 1;
    }
    if t_end <= t0 {
        return Ok(stats);
    }

    let mut k1 = sys.rhs(t, &y)?;
    let mut h = cfg.initial_step.min(cfg.max_step);
    let mut err_prev: f64 = 1.0;
    let span = (t_end - t0).abs().max(1.0);

    while t < t_end {
        let target = if next_out < outputs.len() {
            outputs[next_out].min(t_end)
        } else {
            t_end
        };
        let mut step = h.min(cfg.max_step);
        let mut hits_target = false;
        if t + step >= target || target - (t + step) < 1e-12 * span {
            step = target - t;
            hits_target = true;
        }
        if step < 1e-14 * span {
            return Err(Error::StepSizeUnderflow { t, step });
        }

        let k2 = sys.rhs(t + C2 * step, &combine(&y, step, &[(A21, &k1)]))?;
        let k3 = sys.rhs(t + C3 * step, &combine(&y, step, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = sys.rhs(t + C4 * step, &combine(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = sys.rhs(
            t + C5 * step,
            &combine(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = sys.rhs(
            t + step,
            &combine(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let y_new = combine(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let t_new = if hits_target { target } else { t + step };
        let k7 = sys.rhs(t_new, &y_new)?;

        let err_vec: [Complex64; N] = std::array::from_fn(|i| {
            step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let sc = sys.error_scale(&y, &y_new, cfg);
        let err = (err_vec
            .iter()
            .zip(sc.iter())
            .map(|(e, s)| (e.norm() / s).powi(2))
            .sum::<f64>()
            / N as f64)
            .sqrt();

        if !err.is_finite() {
            if y_new.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) && step < 1e-10 * span {
                return Err(Error::NonFinite { t });
            }
            stats.rejected += 1;
            h = step * MIN_FACTOR;
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = t_new;
            y = y_new;
            k1 = k7;
            let removed = sys.rescale(&mut y);
            if removed != 0.0 {
                log_scale += removed;
                k1 = sys.rhs(t, &y)?;
            }
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-ALPHA) * err_prev.powf(BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            err_prev = err.max(1e-4);
            // a step shortened to hit an output says nothing about the natural size
            h = if hits_target { h.max(step) } else { step * factor };
            if hits_target && next_out < outputs.len() {
                while next_out < outputs.len() && outputs[next_out] <= t {
                    observe(t, &y, log_scale, true);
                    next_out += 1;
                }
            } else if record_internal {
                observe(t, &y, log_scale, false);
            }
        } else {
            stats.rejected += 1;
            h = step * (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
        }
    }
    Ok(stats)
}
