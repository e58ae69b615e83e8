//! Time-dependent Schrödinger equation i·ċ = H(t)·c along a control path,
//! integrated either in the bare basis or in the tracked adiabatic frame.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour::{ControlPath, PathInfo};
use crate::error::{Error, Result};
use crate::integrator::{integrate, state_norm, IntegratorConfig, OdeSystem, StepStats};
use crate::model::{build_hamiltonian, c_product, SystemParams};
use crate::tracking::{model_na_coupling, track_branches, AdiabaticFrame};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Stored norms are kept inside [NORM_SQ_LOW, NORM_SQ_HIGH]; the factor
/// divided out goes into the log scale.
pub const NORM_SQ_LOW: f64 = 1e-150;
pub const NORM_SQ_HIGH: f64 = 1e150;

/// Default number of tracked frames used by the adiabatic propagator.
pub const TRACKING_SAMPLES: usize = 4096;

/// Amplitudes on bare state |1⟩ (lower level plus one photon) and |2⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub c1: Complex64,
    pub c2: Complex64,
}

impl StateVector {
    pub fn new(c1: Complex64, c2: Complex64) -> Result<Self> {
        let s = StateVector { c1, c2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.c1.re, self.c1.im, self.c2.re, self.c2.im]
            .iter()
            .any(|x| !x.is_finite())
        {
            return Err(Error::invalid("initial", "amplitudes must be finite"));
        }
        if self.norm_sq() == 0.0 {
            return Err(Error::invalid("initial", "state must not be zero"));
        }
        Ok(())
    }

    pub fn bare(index: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        if index == 0 {
            StateVector { c1: one, c2: ZERO }
        } else {
            StateVector { c1: ZERO, c2: one }
        }
    }

    pub fn from_array(a: [Complex64; 2]) -> Self {
        StateVector { c1: a[0], c2: a[1] }
    }

    pub fn as_array(&self) -> [Complex64; 2] {
        [self.c1, self.c2]
    }

    pub fn norm_sq(&self) -> f64 {
        self.c1.norm_sqr() + self.c2.norm_sqr()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sq().sqrt();
        StateVector {
            c1: self.c1 / n,
            c2: self.c2 / n,
        }
    }
}

/// Output sampling: `intervals + 1` uniform records on [0, T], optionally
/// interleaved with every accepted integrator step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputGrid {
    pub intervals: usize,
    pub internal_steps: bool,
}

impl Default for OutputGrid {
    fn default() -> Self {
        OutputGrid {
            intervals: 512,
            internal_steps: false,
        }
    }
}

impl OutputGrid {
    pub fn times(&self, duration: f64) -> Vec<f64> {
        let n = self.intervals.max(1);
        let mut v: Vec<f64> = (0..n).map(|k| duration * k as f64 / n as f64).collect();
        v.push(duration);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Adiabatic,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "adiabatic" => Ok(Method::Adiabatic),
            _ => Err(Error::invalid(
                "method",
                format!("expected direct or adiabatic, got {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub method: Method,
    pub params: SystemParams,
    pub path: PathInfo,
    pub config: IntegratorConfig,
    pub initial: StateVector,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Adiabatic runs only: tracked labels at T are exchanged w.r.t. t = 0.
    pub branches_swapped: Option<bool>,
}

/// Sampled solution. The physical state at `times[k]` is
/// `states[k]·exp(log_scale[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub norms_sq: Vec<f64>,
    pub log_scale: Vec<f64>,
    /// Adiabatic-frame coefficients a±, on the same log scale as `states`.
    pub adiabatic_coeffs: Option<Vec<[Complex64; 2]>>,
    /// Whether tracked slot 0 holds the eigen-solver's "−" root at each time.
    pub branch_labels: Option<Vec<bool>>,
    pub meta: TrajectoryMeta,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory has at least one record")
    }

    /// ln of the physical |c|² at record `k`.
    pub fn log_norm_sq(&self, k: usize) -> f64 {
        self.norms_sq[k].ln() + 2.0 * self.log_scale[k]
    }

    fn push(&mut self, t: f64, c: [Complex64; 2], log_scale: f64) {
        let s = StateVector::from_array(c);
        self.times.push(t);
        self.norms_sq.push(s.norm_sq());
        self.states.push(s);
        self.log_scale.push(log_scale);
    }
}

fn rescale_into_band(y: &mut [Complex64], norm_sq: f64) -> f64 {
    if norm_sq > 0.0 && norm_sq.is_finite() && !(NORM_SQ_LOW..=NORM_SQ_HIGH).contains(&norm_sq) {
        let n = norm_sq.sqrt();
        for c in y.iter_mut() {
            *c /= n;
        }
        n.ln()
    } else {
        0.0
    }
}

struct BareSystem<'a, P> {
    params: &'a SystemParams,
    path: &'a P,
}

impl<P: ControlPath> OdeSystem<2> for BareSystem<'_, P> {
    fn rhs(&self, t: f64, y: &[Complex64; 2]) -> Result<[Complex64; 2]> {
        let h = build_hamiltonian(self.params, self.path.point(t));
        let hy = h.apply(y);
        Ok([-I * hy[0], -I * hy[1]])
    }

    fn rescale(&self, y: &mut [Complex64; 2]) -> f64 {
        let n = y[0].norm_sqr() + y[1].norm_sqr();
        rescale_into_band(y, n)
    }
}

fn check_inputs<P: ControlPath>(
    params: &SystemParams,
    path: &P,
    initial: &StateVector,
    config: &IntegratorConfig,
) -> Result<()> {
    params.validate()?;
    initial.validate()?;
    config.validate()?;
    if let PathInfo::Loop(l) = path.info() {
        l.validate()?;
    }
    let d = path.duration();
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid("duration_T", "must be > 0"));
    }
    Ok(())
}

fn empty_record<P: ControlPath>(
    method: Method,
    params: &SystemParams,
    path: &P,
    initial: &StateVector,
    config: &IntegratorConfig,
) -> TrajectoryRecord {
    TrajectoryRecord {
        times: Vec::new(),
        states: Vec::new(),
        norms_sq: Vec::new(),
        log_scale: Vec::new(),
        adiabatic_coeffs: None,
        branch_labels: None,
        meta: TrajectoryMeta {
            method,
            params: *params,
            path: path.info(),
            config: *config,
            initial: *initial,
            accepted_steps: 0,
            rejected_steps: 0,
            branches_swapped: None,
        },
    }
}

fn record_stats(rec: &mut TrajectoryRecord, stats: StepStats) {
    rec.meta.accepted_steps = stats.accepted;
    rec.meta.rejected_steps = stats.rejected;
}

pub fn propagate_direct<P: ControlPath>(
    params: &SystemParams,
    path: &P,
    initial: &StateVector,
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    propagate_direct_with(params, path, initial, config, &OutputGrid::default())
}

/// Integrates i·ċ = H(t)·c in the bare basis.
pub fn propagate_direct_with<P: ControlPath>(
    params: &SystemParams,
    path: &P,
    initial: &StateVector,
    config: &IntegratorConfig,
    grid: &OutputGrid,
) -> Result<TrajectoryRecord> {
    check_inputs(params, path, initial, config)?;
    let sys = BareSystem { params, path };
    let mut rec = empty_record(Method::Direct, params, path, initial, config);
    let outputs = grid.times(path.duration());
    let stats = integrate(
        &sys,
        0.0,
        initial.as_array(),
        path.duration(),
        &outputs,
        config,
        grid.internal_steps,
        |t, y, ls, _| rec.push(t, *y, ls),
    )?;
    record_stats(&mut rec, stats);
    Ok(rec)
}

/// State y = [a₊, a₋, Φ₊, Φ₋] with c = Σ a_b·v_b·e^{−iΦ_b} and Φ̇_b = E_b.
struct AdiabaticSystem<'a, P> {
    params: &'a SystemParams,
    path: &'a P,
    frame: &'a AdiabaticFrame,
}

impl<P: ControlPath> OdeSystem<4> for AdiabaticSystem<'_, P> {
    fn rhs(&self, t: f64, y: &[Complex64; 4]) -> Result<[Complex64; 4]> {
        let f = self.frame.frame_at(self.path, t)?;
        let q = self.path.point(t);
        let (v_pm, v_mp) = model_na_coupling(self.params, (q.omega, q.eps0), self.path.velocity(t), &f)?;
        let dphi = y[2] - y[3];
        let (a_p, a_m) = if v_pm == ZERO && v_mp == ZERO {
            (ZERO, ZERO)
        } else {
            (-v_pm * y[1] * (I * dphi).exp(), -v_mp * y[0] * (-I * dphi).exp())
        };
        Ok([a_p, a_m, f.e_plus, f.e_minus])
    }

    fn error_scale(&self, y: &[Complex64; 4], y_new: &[Complex64; 4], cfg: &IntegratorConfig) -> [f64; 4] {
        // Amplitude errors are weighed by what they contribute to c, i.e.
        // against |a_b·e^{−iΦ_b}|; phase errors are absolute.
        let weight = |v: &[Complex64; 4], b: usize| v[2 + b].im.exp();
        let contrib =
            |v: &[Complex64; 4]| ((v[0].norm() * weight(v, 0)).powi(2) + (v[1].norm() * weight(v, 1)).powi(2)).sqrt();
        let total = contrib(y).max(contrib(y_new));
        let amp = |b: usize| {
            let w = weight(y, b).max(f64::MIN_POSITIVE);
            cfg.abs_tol * total / w + cfg.rel_tol * y[b].norm().max(y_new[b].norm())
        };
        let phase = cfg.rel_tol + cfg.abs_tol;
        [amp(0), amp(1), phase, phase]
    }

    fn rescale(&self, y: &mut [Complex64; 4]) -> f64 {
        let n = y[0].norm_sqr() + y[1].norm_sqr();
        rescale_into_band(&mut y[..2], n)
    }
}

pub fn propagate_adiabatic<P: ControlPath>(
    params: &SystemParams,
    path: &P,
    initial: &StateVector,
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    propagate_adiabatic_with(params, path, initial, config, &OutputGrid::default(), TRACKING_SAMPLES)
}

/// Integrates the coupled adiabatic-frame equations
/// `ȧ₊ = −𝒱₊₋·a₋·e^{i(Φ₊−Φ₋)}`, `ȧ₋ = −𝒱₋₊·a₊·e^{−i(Φ₊−Φ₋)}` over
/// branches tracked with `tracking_samples` frames, and rebuilds bare
/// amplitudes at each output time.
pub fn propagate_adiabatic_with<P: ControlPath>(
    params: &SystemParams,
    path: &P,
    initial: &StateVector,
    config: &IntegratorConfig,
    grid: &OutputGrid,
    tracking_samples: usize,
) -> Result<TrajectoryRecord> {
    check_inputs(params, path, initial, config)?;
    let frame = track_branches(params, path, tracking_samples)?;
    let sys = AdiabaticSystem {
        params,
        path,
        frame: &frame,
    };
    let f0 = frame.frames[0];
    let c0 = initial.as_array();
    let y0 = [c_product(&f0.v_plus, &c0), c_product(&f0.v_minus, &c0), ZERO, ZERO];

    let mut rec = empty_record(Method::Adiabatic, params, path, initial, config);
    let mut coeffs = Vec::new();
    let mut labels = Vec::new();
    let mut failure = None;
    let outputs = grid.times(path.duration());
    let stats = integrate(
        &sys,
        0.0,
        y0,
        path.duration(),
        &outputs,
        config,
        grid.internal_steps,
        |t, y, ls, _| {
            if failure.is_some() {
                return;
            }
            let f = match frame.frame_at(path, t) {
                Ok(f) => f,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            // log-magnitude of each term a_b·e^{−iΦ_b}, shifted by the common
            // scale so the rebuilt state stays representable
            let logs: Vec<f64> = (0..2)
                .map(|b| {
                    if y[b] == ZERO {
                        f64::NEG_INFINITY
                    } else {
                        y[b].norm().ln() + y[2 + b].im
                    }
                })
                .collect();
            let m = logs[0].max(logs[1]);
            let mut c = [ZERO; 2];
            let mut a = [ZERO; 2];
            for b in 0..2 {
                if y[b] == ZERO {
                    continue;
                }
                let factor = Complex64::from_polar((y[2 + b].im - m).exp(), -y[2 + b].re);
                let v = f.vector(b);
                c[0] += y[b] * factor * v[0];
                c[1] += y[b] * factor * v[1];
                a[b] = y[b] * (-m).exp();
            }
            rec.push(t, c, ls + m);
            coeffs.push(a);
            labels.push(f.e_plus != crate::model::eigenvalues(&build_hamiltonian(params, path.point(t))).0);
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    record_stats(&mut rec, stats);
    rec.adiabatic_coeffs = Some(coeffs);
    rec.branch_labels = Some(labels);
    rec.meta.branches_swapped = Some(frame.swapped);
    if rec.states.iter().any(|s| state_norm(&s.as_array()) == 0.0) {
        let k = rec.states.iter().position(|s| s.norm_sq() == 0.0).unwrap_or(0);
        return Err(Error::ZeroNorm { t: rec.times[k] });
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{Direction, LoopSpec, StaticField};
    use crate::model::FieldPoint;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn static_zero_field_decay() {
        let p = SystemParams::reference();
        let s = StaticField::new(FieldPoint::new(1.0, 0.0).unwrap(), 5.0).unwrap();
        let rec = propagate_direct(&p, &s, &StateVector::bare(0), &IntegratorConfig::default()).unwrap();
        assert_eq!(rec.len(), 513);
        assert_abs_diff_eq!(rec.log_norm_sq(512).exp(), (-1.0f64).exp(), epsilon = 1e-10);
        assert_eq!(*rec.times.last().unwrap(), 5.0);
    }

    #[test]
    fn resonant_rabi_flop() {
        let p = SystemParams {
            gamma1: 0.0,
            gamma2: 0.0,
            ..SystemParams::reference()
        };
        let g = 0.1;
        let t = std::f64::consts::PI / (2.0 * g);
        let s = StaticField::new(FieldPoint::new(1.0, 2.0 * g).unwrap(), t).unwrap();
        let cfg = IntegratorConfig::new(1e-12, 1e-14, 1.0, 1e-3).unwrap();
        let rec = propagate_direct(&p, &s, &StateVector::bare(0), &cfg).unwrap();
        let f = rec.final_state();
        assert_abs_diff_eq!(f.c2.norm_sqr(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn adiabatic_static_field_keeps_coefficients() {
        let p = SystemParams::reference();
        let s = StaticField::new(FieldPoint::new(1.0, 0.4).unwrap(), 8.0).unwrap();
        let init = StateVector::new(c(0.6, 0.1), c(-0.3, 0.7)).unwrap();
        let cfg = IntegratorConfig::default();
        let ad = propagate_adiabatic_with(&p, &s, &init, &cfg, &OutputGrid::default(), 64).unwrap();
        let dir = propagate_direct(&p, &s, &init, &cfg).unwrap();
        let a = ad.adiabatic_coeffs.as_ref().unwrap();
        for k in [0, 100, 512] {
            let scale = ad.log_scale[k] - ad.log_scale[0];
            for (now, start) in a[k].iter().zip(&a[0]) {
                let now = now * scale.exp();
                assert!((now - start).norm() < 1e-12 * start.norm().max(1.0));
            }
        }
        let x = ad.final_state();
        let y = dir.final_state();
        let sx = ad.log_scale[512].exp();
        let sy = dir.log_scale[512].exp();
        assert!((x.c1 * sx - y.c1 * sy).norm() < 1e-9);
        assert!((x.c2 * sx - y.c2 * sy).norm() < 1e-9);
    }

    #[test]
    fn adiabatic_matches_direct_on_short_loop() {
        let p = SystemParams::reference();
        let l = LoopSpec::new(FieldPoint::new(1.0, 0.3).unwrap(), 0.1, 0.08, Direction::Cw, 30.0, 0.4).unwrap();
        let init = StateVector::new(c(0.8, 0.0), c(0.0, 0.6)).unwrap();
        let cfg = IntegratorConfig::default();
        let ad = propagate_adiabatic(&p, &l, &init, &cfg).unwrap();
        let dir = propagate_direct(&p, &l, &init, &cfg).unwrap();
        for k in [128, 256, 512] {
            let x = ad.states[k];
            let y = dir.states[k];
            let r = (ad.log_scale[k] - dir.log_scale[k]).exp();
            let err = ((x.c1 * r - y.c1).norm_sqr() + (x.c2 * r - y.c2).norm_sqr()).sqrt();
            assert!(err < 1e-7 * y.norm_sq().sqrt(), "k={k} err={err}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = SystemParams::reference();
        let s = StaticField::new(FieldPoint::new(1.0, 0.0).unwrap(), 1.0).unwrap();
        let zero = StateVector { c1: ZERO, c2: ZERO };
        let e = propagate_direct(&p, &s, &zero, &IntegratorConfig::default()).unwrap_err();
        assert!(e.to_string().contains("initial"));
    }

    #[test]
    fn adiabatic_refuses_ep_on_contour() {
        let p = SystemParams::reference();
        let l = LoopSpec::new(
            FieldPoint::new(0.95, 0.2).unwrap(),
            0.05,
            0.05,
            Direction::Ccw,
            10.0,
            0.0,
        )
        .unwrap();
        let e = propagate_adiabatic(&p, &l, &StateVector::bare(0), &IntegratorConfig::default()).unwrap_err();
        assert_eq!(e.kind(), "EPOnContour");
    }
}
