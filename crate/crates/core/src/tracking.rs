//! Continuous eigenvalue branches along a control path, non-adiabatic
//! couplings and phase integrals.

use num_complex::Complex64;

use crate::contour::{ControlPath, EP_CONTOUR_TOL};
use crate::error::{Error, Result};
use crate::model::{
    branch_root, build_hamiltonian, c_product, discriminant, eigenframe, hamiltonian_at, EigenFrame, HamiltonianMatrix,
    SystemParams, Vec2,
};

/// Guard handed to [`eigenframe`] so that it refuses exactly where a contour
/// sample would count as touching the EP.
pub(crate) fn frame_tol() -> f64 {
    EP_CONTOUR_TOL.sqrt()
}

fn frame_on_path(params: &SystemParams, field: crate::model::FieldPoint, t: f64) -> Result<EigenFrame> {
    eigenframe(&build_hamiltonian(params, field), frame_tol()).map_err(|e| match e {
        Error::EpProximity { discriminant } => Error::EpOnContour { t, discriminant },
        other => other,
    })
}

/// Eigenframes sampled uniformly over `[0, T]` with slot 0 following one
/// branch continuously and slot 1 the other.
#[derive(Debug, Clone)]
pub struct AdiabaticFrame {
    pub times: Vec<f64>,
    pub frames: Vec<EigenFrame>,
    /// Whether slot 0 at each sample holds what the fresh eigen-solve calls
    /// the "−" root.
    pub relabeled: Vec<bool>,
    /// Slot 0 ends on the branch that slot 1 started on.
    pub swapped: bool,
    params: SystemParams,
}

pub fn track_branches<P: ControlPath>(params: &SystemParams, path: &P, n_samples: usize) -> Result<AdiabaticFrame> {
    if n_samples < 2 {
        return Err(Error::invalid("n_samples", "need at least 2 samples"));
    }
    let duration = path.duration();
    let mut times = Vec::with_capacity(n_samples + 1);
    let mut frames: Vec<EigenFrame> = Vec::with_capacity(n_samples + 1);
    let mut relabeled = Vec::with_capacity(n_samples + 1);
    for k in 0..=n_samples {
        let t = duration * k as f64 / n_samples as f64;
        let fresh = frame_on_path(params, path.point(t), t)?;
        let frame = match frames.last() {
            None => fresh,
            Some(prev) => fresh.aligned_to(prev, t)?,
        };
        relabeled.push(frame.e_plus != fresh.e_plus);
        times.push(t);
        frames.push(frame);
    }
    let first = frames[0];
    let last = frames[n_samples];
    let swapped = (last.e_plus - first.e_minus).norm() < (last.e_plus - first.e_plus).norm();
    Ok(AdiabaticFrame {
        times,
        frames,
        relabeled,
        swapped,
        params: *params,
    })
}

impl AdiabaticFrame {
    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    fn nearest_index(&self, t: f64) -> usize {
        let n = self.frames.len() - 1;
        let k = (t / self.duration() * n as f64).round();
        (k.max(0.0) as usize).min(n)
    }

    /// Nearest tracked sample to `t`.
    pub fn nearest(&self, t: f64) -> &EigenFrame {
        &self.frames[self.nearest_index(t)]
    }

    /// Eigenframe at an arbitrary time with slots and signs continued from
    /// the nearest tracked sample.
    pub fn frame_at<P: ControlPath>(&self, path: &P, t: f64) -> Result<EigenFrame> {
        let fresh = frame_on_path(&self.params, path.point(t), t)?;
        fresh.aligned_to(self.nearest(t), t)
    }

    /// Tracked E_slot0 − E_slot1 at `t`; only an eigenvalue solve, no vectors.
    pub fn delta_e<P: ControlPath>(&self, path: &P, t: f64) -> Complex64 {
        let h = build_hamiltonian(&self.params, path.point(t));
        let r = branch_root(discriminant(&h));
        let near = self.nearest(t);
        let guide = near.e_plus - near.e_minus;
        if (r - guide).norm() <= (r + guide).norm() {
            r
        } else {
            -r
        }
    }

    /// Tracked eigenvalue of `slot` at `t`.
    pub fn energy<P: ControlPath>(&self, path: &P, t: f64, slot: usize) -> Complex64 {
        let h = build_hamiltonian(&self.params, path.point(t));
        let half = 0.5 * self.delta_e(path, t);
        let mid = 0.5 * h.trace();
        if slot == 0 {
            mid + half
        } else {
            mid - half
        }
    }
}

/// Composite Simpson rule on `[0, t]` with `intervals` (rounded up to even).
pub fn simpson<F: Fn(f64) -> Complex64>(f: F, t: f64, intervals: usize) -> Complex64 {
    let n = (intervals.max(2) + 1) & !1;
    let h = t / n as f64;
    let mut acc = f(0.0) + f(t);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(h * k as f64);
    }
    acc * (h / 3.0)
}

fn quadrature_intervals(frame: &AdiabaticFrame, t: f64) -> usize {
    let full = (2 * (frame.len() - 1)).max(2048);
    ((full as f64 * t / frame.duration()).ceil() as usize).max(2)
}

/// ∫₀ᵗ ΔE dt over the tracked branches, ΔE = E_slot0 − E_slot1. Its
/// imaginary part is −∫ΔΓ dt with Γ = −Im E.
pub fn accumulated_phase<P: ControlPath>(frame: &AdiabaticFrame, path: &P, t: f64) -> Result<Complex64> {
    let duration = path.duration();
    if !(t >= 0.0 && t <= duration) {
        return Err(Error::TimeOutOfRange { t, duration });
    }
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(simpson(|s| frame.delta_e(path, s), t, quadrature_intervals(frame, t)))
}

/// Loop average of the decay rate Γ = −Im E of one tracked slot.
pub fn average_decay_rate<P: ControlPath>(frame: &AdiabaticFrame, path: &P, slot: usize) -> f64 {
    let duration = path.duration();
    let integral = simpson(
        |s| Complex64::new(-frame.energy(path, s, slot).im, 0.0),
        duration,
        quadrature_intervals(frame, duration),
    );
    integral.re / duration
}

/// The two exponential factors e^{+i∫ΔE dt} and e^{−i∫ΔE dt} that weight
/// the non-adiabatic coupling in each direction. Their moduli are
/// e^{±∫ΔΓ dt}, so one is exponentially amplified and the other suppressed.
pub fn coupling_factors(phase: Complex64) -> (Complex64, Complex64) {
    let i = Complex64::new(0.0, 1.0);
    ((i * phase).exp(), (-i * phase).exp())
}

fn derivative_step(q: (f64, f64)) -> f64 {
    1e-6 * q.0.abs().max(q.1.abs()).max(1.0)
}

fn scaled_diff(a: &Vec2, b: &Vec2, w: f64) -> Vec2 {
    [(a[0] - b[0]) * w, (a[1] - b[1]) * w]
}

/// Non-adiabatic couplings (𝒱₊₋, 𝒱₋₊) = (v₊·q̇·∇v₋, v₋·q̇·∇v₊) at parameter
/// point `q` moving with `velocity`.
///
/// `hamiltonian` maps (q₁, q₂) to the matrix. `reference` is the frame at
/// `q` in the gauge the caller is propagating in; the parameter derivative is
/// a central difference with step 1e−6·max(|q₁|, |q₂|, 1), with the displaced
/// frames aligned to `reference`.
pub fn na_coupling<H>(
    hamiltonian: H,
    q: (f64, f64),
    velocity: (f64, f64),
    reference: &EigenFrame,
) -> Result<(Complex64, Complex64)>
where
    H: Fn(f64, f64) -> HamiltonianMatrix,
{
    let zero = Complex64::new(0.0, 0.0);
    if velocity == (0.0, 0.0) {
        return Ok((zero, zero));
    }
    let h = derivative_step(q);
    let tol = frame_tol();
    let mut dv_plus = [zero; 2];
    let mut dv_minus = [zero; 2];
    for (axis, rate) in [(0usize, velocity.0), (1usize, velocity.1)] {
        if rate == 0.0 {
            continue;
        }
        let shift = |s: f64| if axis == 0 { (q.0 + s, q.1) } else { (q.0, q.1 + s) };
        let (pq1, pq2) = shift(h);
        let (mq1, mq2) = shift(-h);
        let fp = eigenframe(&hamiltonian(pq1, pq2), tol)?.aligned_to(reference, 0.0)?;
        let fm = eigenframe(&hamiltonian(mq1, mq2), tol)?.aligned_to(reference, 0.0)?;
        let w = rate / (2.0 * h);
        let dp = scaled_diff(&fp.v_plus, &fm.v_plus, w);
        let dm = scaled_diff(&fp.v_minus, &fm.v_minus, w);
        for i in 0..2 {
            dv_plus[i] += dp[i];
            dv_minus[i] += dm[i];
        }
    }
    Ok((
        c_product(&reference.v_plus, &dv_minus),
        c_product(&reference.v_minus, &dv_plus),
    ))
}

/// [`na_coupling`] for the model Hamiltonian with q = (ω, ε₀).
pub fn model_na_coupling(
    params: &SystemParams,
    q: (f64, f64),
    velocity: (f64, f64),
    reference: &EigenFrame,
) -> Result<(Complex64, Complex64)> {
    na_coupling(|a, b| hamiltonian_at(params, a, b), q, velocity, reference)
}
