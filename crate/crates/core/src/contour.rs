//! Closed elliptical loops in the (ω, ε₀) plane.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, discriminant, locate_ep, EpLocation, FieldPoint, SystemParams};

/// |Δ| below which a contour sample counts as sitting on the EP.
pub const EP_CONTOUR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Cw,
    Ccw,
}

impl Direction {
    /// +1 for counter-clockwise, −1 for clockwise.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Ccw => 1.0,
            Direction::Cw => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Cw => Direction::Ccw,
            Direction::Ccw => Direction::Cw,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Cw => "cw",
            Direction::Ccw => "ccw",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Cw => "CW",
            Direction::Ccw => "CCW",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cw" => Ok(Direction::Cw),
            "ccw" => Ok(Direction::Ccw),
            _ => Err(Error::invalid(
                "direction",
                format!("expected \"cw\" or \"ccw\", got {s:?}"),
            )),
        }
    }
}

/// Anything that drives the Hamiltonian through the (ω, ε₀) plane over
/// `[0, duration]`. Callers keep `t` in range.
pub trait ControlPath: Sync {
    fn duration(&self) -> f64;
    fn point(&self, t: f64) -> FieldPoint;
    fn velocity(&self, t: f64) -> (f64, f64);
    fn info(&self) -> PathInfo;
}

/// Serializable description of a [`ControlPath`], kept with trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PathInfo {
    Loop(LoopSpec),
    Static(StaticField),
}

/// Ellipse θ(t) = start_phase ± 2πt/T traversed once at uniform angular speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub center: FieldPoint,
    pub semi_axis_omega: f64,
    pub semi_axis_eps: f64,
    pub direction: Direction,
    pub duration: f64,
    pub start_phase: f64,
}

impl LoopSpec {
    pub fn new(
        center: FieldPoint,
        semi_axis_omega: f64,
        semi_axis_eps: f64,
        direction: Direction,
        duration: f64,
        start_phase: f64,
    ) -> Result<Self> {
        let l = LoopSpec {
            center,
            semi_axis_omega,
            semi_axis_eps,
            direction,
            duration,
            start_phase,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.omega.is_finite() {
            return Err(Error::invalid("center_omega", "must be finite"));
        }
        if !(self.center.eps0 >= 0.0 && self.center.eps0.is_finite()) {
            return Err(Error::invalid("center_eps0", "must be finite and >= 0"));
        }
        if !(self.semi_axis_omega > 0.0 && self.semi_axis_omega.is_finite()) {
            return Err(Error::invalid("semi_axis_omega", "must be > 0"));
        }
        if !(self.semi_axis_eps > 0.0 && self.semi_axis_eps.is_finite()) {
            return Err(Error::invalid("semi_axis_eps", "must be > 0"));
        }
        if self.center.eps0 < self.semi_axis_eps {
            return Err(Error::invalid(
                "semi_axis_eps",
                format!(
                    "loop would reach negative field amplitude (center_eps0 {} < semi_axis_eps {})",
                    self.center.eps0, self.semi_axis_eps
                ),
            ));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration_T", "must be > 0"));
        }
        if !self.start_phase.is_finite() {
            return Err(Error::invalid("start_phase", "must be finite"));
        }
        Ok(())
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        LoopSpec { direction, ..*self }
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        LoopSpec { duration, ..*self }
    }

    /// Both semi-axes multiplied by `s` about the same center.
    pub fn scaled(&self, s: f64) -> Self {
        LoopSpec {
            semi_axis_omega: self.semi_axis_omega * s,
            semi_axis_eps: self.semi_axis_eps * s,
            ..*self
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.duration {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t,
                duration: self.duration,
            })
        }
    }

    /// Angle on the ellipse at time `t`. The fractional period wraps so that
    /// t = T lands on exactly the starting angle.
    pub fn angle(&self, t: f64) -> f64 {
        let frac = (t / self.duration).fract();
        self.start_phase + self.direction.sign() * TAU * frac
    }

    pub fn field_at(&self, t: f64) -> Result<FieldPoint> {
        self.check_time(t)?;
        Ok(self.point(t))
    }

    pub fn field_velocity(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        Ok(ControlPath::velocity(self, t))
    }

    /// Signed proximity of `ep` to the contour: positive inside, zero on it.
    pub fn rho(&self, ep: &EpLocation) -> f64 {
        let x = (ep.field.omega - self.center.omega) / self.semi_axis_omega;
        let y = (ep.field.eps0 - self.center.eps0) / self.semi_axis_eps;
        (1.0 - x.hypot(y)) * self.semi_axis_omega.min(self.semi_axis_eps)
    }

    pub fn contains_ep(&self, params: &SystemParams) -> Result<bool> {
        Ok(self.rho(&locate_ep(params)?) > 0.0)
    }

    /// Net number of turns of Δ(t) about the origin over one period.
    ///
    /// With the reference parameters Δ ≈ 0.4(Δε₀ + iΔω) near the EP, so a
    /// counter-clockwise loop in (ω, ε₀) winds Δ clockwise: CCW gives −1,
    /// CW gives +1.
    pub fn winding_number(&self, params: &SystemParams, n_samples: usize) -> Result<i32> {
        if n_samples < 64 {
            return Err(Error::invalid(
                "n_samples",
                format!("need at least 64, got {n_samples}"),
            ));
        }
        let mut total = 0.0;
        let mut prev_arg = None;
        for k in 0..=n_samples {
            let t = self.duration * k as f64 / n_samples as f64;
            let d = discriminant(&build_hamiltonian(params, self.point(t)));
            if d.norm() < EP_CONTOUR_TOL {
                return Err(Error::EpOnContour {
                    t,
                    discriminant: d.norm(),
                });
            }
            let arg = d.arg();
            if let Some(p) = prev_arg {
                let mut jump: f64 = arg - p;
                if jump > PI {
                    jump -= TAU;
                } else if jump < -PI {
                    jump += TAU;
                }
                if jump.abs() > FRAC_PI_2 {
                    return Err(Error::Undersampled { t, jump: jump.abs() });
                }
                total += jump;
            }
            prev_arg = Some(arg);
        }
        Ok((total / TAU).round() as i32)
    }
}

impl ControlPath for LoopSpec {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn point(&self, t: f64) -> FieldPoint {
        let th = self.angle(t);
        FieldPoint {
            omega: self.center.omega + self.semi_axis_omega * th.cos(),
            eps0: self.center.eps0 + self.semi_axis_eps * th.sin(),
        }
    }

    fn velocity(&self, t: f64) -> (f64, f64) {
        let th = self.angle(t);
        let rate = self.direction.sign() * TAU / self.duration;
        (
            -self.semi_axis_omega * th.sin() * rate,
            self.semi_axis_eps * th.cos() * rate,
        )
    }

    fn info(&self) -> PathInfo {
        PathInfo::Loop(*self)
    }
}

/// Fixed field held for `duration`; the zero-size limit of a loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticField {
    pub field: FieldPoint,
    pub duration: f64,
}

impl StaticField {
    pub fn new(field: FieldPoint, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("duration_T", "must be > 0"));
        }
        Ok(StaticField { field, duration })
    }
}

impl ControlPath for StaticField {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn point(&self, _t: f64) -> FieldPoint {
        self.field
    }

    fn velocity(&self, _t: f64) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn info(&self) -> PathInfo {
        PathInfo::Static(*self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lp(co: f64, ce: f64, a: f64, b: f64, dir: Direction, t: f64, phase: f64) -> LoopSpec {
        LoopSpec::new(FieldPoint::new(co, ce).unwrap(), a, b, dir, t, phase).unwrap()
    }

    #[test]
    fn start_and_closure() {
        let l = lp(1.0, 0.2, 0.05, 0.04, Direction::Ccw, 10.0, 0.0);
        let p0 = l.field_at(0.0).unwrap();
        assert_eq!(p0, FieldPoint { omega: 1.05, eps0: 0.2 });
        assert_eq!(l.field_at(10.0).unwrap(), p0);
        let l = lp(1.0, 0.2, 0.05, 0.04, Direction::Cw, 7.3, 1.234);
        assert_eq!(l.field_at(7.3).unwrap(), l.field_at(0.0).unwrap());
    }

    #[test]
    fn cw_quarter_matches_ccw_three_quarters() {
        let ccw = lp(1.0, 0.2, 0.05, 0.04, Direction::Ccw, 8.0, 0.3);
        let cw = ccw.with_direction(Direction::Cw);
        let a = cw.field_at(2.0).unwrap();
        let b = ccw.field_at(6.0).unwrap();
        assert_abs_diff_eq!(a.omega, b.omega, epsilon = 1e-15);
        assert_abs_diff_eq!(a.eps0, b.eps0, epsilon = 1e-15);
    }

    #[test]
    fn velocity_examples() {
        let l = lp(1.0, 0.2, 0.05, 0.04, Direction::Ccw, 10.0, 0.0);
        let (vo, ve) = l.field_velocity(0.0).unwrap();
        assert_abs_diff_eq!(vo, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ve, TAU * 0.04 / 10.0, epsilon = 1e-15);

        let slow = l.with_duration(20.0);
        let (so, se) = slow.field_velocity(5.0).unwrap();
        let (fo, fe) = l.field_velocity(2.5).unwrap();
        assert_abs_diff_eq!(so, fo / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(se, fe / 2.0, epsilon = 1e-15);

        // same contour point: CW at T/4 and CCW at 3T/4
        let cw = l.with_direction(Direction::Cw);
        let (a, b) = cw.field_velocity(2.5).unwrap();
        let (c, d) = l.field_velocity(7.5).unwrap();
        assert_abs_diff_eq!(a, -c, epsilon = 1e-15);
        assert_abs_diff_eq!(b, -d, epsilon = 1e-15);
    }

    #[test]
    fn velocity_is_derivative_of_position() {
        let l = lp(1.0, 0.3, 0.07, 0.05, Direction::Cw, 13.0, 0.7);
        for k in 1..20 {
            let t = 13.0 * k as f64 / 20.0;
            let h = 1e-5;
            let p = l.field_at(t + h).unwrap();
            let m = l.field_at(t - h).unwrap();
            let (vo, ve) = l.field_velocity(t).unwrap();
            assert_abs_diff_eq!((p.omega - m.omega) / (2.0 * h), vo, epsilon = 1e-8);
            assert_abs_diff_eq!((p.eps0 - m.eps0) / (2.0 * h), ve, epsilon = 1e-8);
        }
    }

    #[test]
    fn out_of_range_time() {
        let l = lp(1.0, 0.2, 0.05, 0.05, Direction::Ccw, 10.0, 0.0);
        assert_eq!(l.field_at(-0.1).unwrap_err().kind(), "TimeOutOfRange");
        assert_eq!(l.field_velocity(10.5).unwrap_err().kind(), "TimeOutOfRange");
    }

    #[test]
    fn rejects_invalid_geometry() {
        let c = FieldPoint::new(1.0, 0.03).unwrap();
        let e = LoopSpec::new(c, 0.05, 0.05, Direction::Cw, 1.0, 0.0).unwrap_err();
        assert!(e.to_string().contains("semi_axis_eps"));
        let c = FieldPoint::new(1.0, 0.3).unwrap();
        assert!(LoopSpec::new(c, 0.0, 0.05, Direction::Cw, 1.0, 0.0).is_err());
        assert!(LoopSpec::new(c, 0.05, 0.05, Direction::Cw, 0.0, 0.0).is_err());
    }

    #[test]
    fn rho_examples() {
        let ep = locate_ep(&SystemParams::reference()).unwrap();
        let l = lp(1.0, 0.2, 0.05, 0.05, Direction::Ccw, 1.0, 0.0);
        assert_abs_diff_eq!(l.rho(&ep), 0.05, epsilon = 1e-15);
        let l = lp(1.05, 0.2, 0.05, 0.05, Direction::Ccw, 1.0, 0.0);
        assert_abs_diff_eq!(l.rho(&ep), 0.0, epsilon = 1e-15);
        let l = lp(1.15, 0.2, 0.05, 0.05, Direction::Ccw, 1.0, 0.0);
        assert_abs_diff_eq!(l.rho(&ep), -0.1, epsilon = 1e-14);
    }

    #[test]
    fn winding_examples() {
        let p = SystemParams::reference();
        let enc = lp(1.0, 0.2, 0.05, 0.05, Direction::Ccw, 1.0, 0.0);
        assert_eq!(enc.winding_number(&p, 1024).unwrap(), -1);
        assert_eq!(enc.with_direction(Direction::Cw).winding_number(&p, 1024).unwrap(), 1);
        let out = lp(1.0, 0.5, 0.05, 0.05, Direction::Ccw, 1.0, 0.0);
        assert_eq!(out.winding_number(&p, 1024).unwrap(), 0);
        assert!(enc.contains_ep(&p).unwrap());
        assert!(!out.contains_ep(&p).unwrap());
    }

    #[test]
    fn winding_errors() {
        let p = SystemParams::reference();
        // EP sits exactly at the start point
        let touch = lp(0.95, 0.2, 0.05, 0.05, Direction::Ccw, 1.0, 0.0);
        assert_eq!(touch.winding_number(&p, 1024).unwrap_err().kind(), "EPOnContour");
        let enc = lp(1.0, 0.2, 0.05, 0.05, Direction::Ccw, 1.0, 0.0);
        assert_eq!(enc.winding_number(&p, 32).unwrap_err().kind(), "InvalidParameter");
        // a loop grazing the EP turns Δ quickly; coarse sampling must notice
        let off = lp(1.0501, 0.2, 0.05, 0.05, Direction::Ccw, 1.0, PI + PI / 64.0);
        assert_eq!(off.winding_number(&p, 64).unwrap_err().kind(), "Undersampled");
    }

    #[test]
    fn static_field_path() {
        let s = StaticField::new(FieldPoint::new(1.0, 0.0).unwrap(), 5.0).unwrap();
        assert_eq!(s.velocity(2.0), (0.0, 0.0));
        assert_eq!(s.point(3.0), FieldPoint { omega: 1.0, eps0: 0.0 });
    }
}
