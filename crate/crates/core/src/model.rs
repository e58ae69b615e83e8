//! The driven two-resonance Hamiltonian, its spectrum and its exceptional point.
//!
//! Units are dimensionless with ħ = 1. Bare state |1⟩ is the lower level
//! dressed by one photon, |2⟩ the upper level:
//!
//! ```text
//! H = [ E₁ + ω − iΓ₁      ε₀·d₁₂/2 ]
//!     [ ε₀·d₁₂/2          E₂ − iΓ₂ ]
//! ```
//!
//! which is the gain/loss form `diag(+iΔΓ/2, −iΔΓ/2) − i(Γ₁+Γ₂)/2·I` written out.
//! The matrix is complex-symmetric, so left and right eigenvectors coincide
//! under the unconjugated c-product.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [Complex64; 2];

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Physical constants of the two-resonance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub e1: f64,
    pub e2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub d12: Complex64,
}

impl SystemParams {
    pub fn new(e1: f64, e2: f64, gamma1: f64, gamma2: f64, d12: Complex64) -> Result<Self> {
        let p = SystemParams {
            e1,
            e2,
            gamma1,
            gamma2,
            d12,
        };
        p.validate()?;
        Ok(p)
    }

    /// Reference parameter set used throughout the tests and examples:
    /// E₁ = 0, E₂ = 1, Γ₁ = 0.1, Γ₂ = 0.3, d₁₂ = 1. These are model-scale
    /// stand-ins, not molecular data. The EP sits at (ω, ε₀) = (1, 0.2).
    pub fn reference() -> Self {
        SystemParams {
            e1: 0.0,
            e2: 1.0,
            gamma1: 0.1,
            gamma2: 0.3,
            d12: Complex64::new(1.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e1", self.e1), ("e2", self.e2)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        for (name, v) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    name,
                    format!("decay rate must be finite and >= 0, got {v}"),
                ));
            }
        }
        if !(self.d12.re.is_finite() && self.d12.im.is_finite()) {
            return Err(Error::invalid("d12", "must be finite"));
        }
        Ok(())
    }

    /// Gain/loss contrast Γ₂ − Γ₁.
    pub fn delta_gamma(&self) -> f64 {
        self.gamma2 - self.gamma1
    }

    pub fn hamiltonian(&self, field: FieldPoint) -> HamiltonianMatrix {
        build_hamiltonian(self, field)
    }
}

/// One point (ω, ε₀) of the drive-parameter plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub omega: f64,
    pub eps0: f64,
}

impl FieldPoint {
    pub fn new(omega: f64, eps0: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::invalid("omega", "must be finite"));
        }
        if !(eps0 >= 0.0 && eps0.is_finite()) {
            return Err(Error::invalid(
                "eps0",
                format!("field amplitude must be >= 0, got {eps0}"),
            ));
        }
        Ok(FieldPoint { omega, eps0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianMatrix {
    pub h11: Complex64,
    pub h12: Complex64,
    pub h21: Complex64,
    pub h22: Complex64,
}

impl HamiltonianMatrix {
    pub fn new(h11: Complex64, h12: Complex64, h21: Complex64, h22: Complex64) -> Self {
        HamiltonianMatrix { h11, h12, h21, h22 }
    }

    pub fn symmetric(h11: Complex64, coupling: Complex64, h22: Complex64) -> Self {
        HamiltonianMatrix::new(h11, coupling, coupling, h22)
    }

    pub fn trace(&self) -> Complex64 {
        self.h11 + self.h22
    }

    pub fn apply(&self, v: &Vec2) -> Vec2 {
        [self.h11 * v[0] + self.h12 * v[1], self.h21 * v[0] + self.h22 * v[1]]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (self.h11.norm_sqr() + self.h12.norm_sqr() + self.h21.norm_sqr() + self.h22.norm_sqr()).sqrt()
    }
}

pub fn build_hamiltonian(params: &SystemParams, field: FieldPoint) -> HamiltonianMatrix {
    hamiltonian_at(params, field.omega, field.eps0)
}

/// Same as [`build_hamiltonian`] without the ε₀ ≥ 0 check; finite-difference
/// stencils evaluate the matrix slightly off the physical half-plane.
pub(crate) fn hamiltonian_at(params: &SystemParams, omega: f64, eps0: f64) -> HamiltonianMatrix {
    let h11 = Complex64::new(params.e1 + omega, -params.gamma1);
    let h22 = Complex64::new(params.e2, -params.gamma2);
    let coupling = params.d12 * (0.5 * eps0);
    HamiltonianMatrix::symmetric(h11, coupling, h22)
}

/// Δ = (h11 − h22)² + 4·h12·h21. The eigenvalues coalesce where Δ = 0.
pub fn discriminant(h: &HamiltonianMatrix) -> Complex64 {
    let d = h.h11 - h.h22;
    d * d + 4.0 * h.h12 * h.h21
}

/// Square root of Δ on the "+" branch: non-negative real part, ties broken
/// toward non-negative imaginary part.
pub fn branch_root(delta: Complex64) -> Complex64 {
    let r = delta.sqrt();
    if r.re < 0.0 || (r.re == 0.0 && r.im < 0.0) {
        -r
    } else {
        r
    }
}

/// (E₊, E₋) = ((h11 + h22) ± √Δ)/2 with the branch convention of [`branch_root`].
pub fn eigenvalues(h: &HamiltonianMatrix) -> (Complex64, Complex64) {
    let half_trace = 0.5 * h.trace();
    let half_root = 0.5 * branch_root(discriminant(h));
    (half_trace + half_root, half_trace - half_root)
}

/// Bilinear product u₁v₁ + u₂v₂, no conjugation.
pub fn c_product(u: &Vec2, v: &Vec2) -> Complex64 {
    u[0] * v[0] + u[1] * v[1]
}

pub(crate) fn hermitian_norm(v: &Vec2) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// Phase convention recorded on an [`EigenFrame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gauge {
    /// c-normalized, sign chosen so the largest-magnitude component has a
    /// positive real part (positive imaginary part if the real part is zero).
    LargestComponent,
    /// Slots and signs aligned by overlap with a neighbouring frame.
    Continuous,
}

/// Instantaneous eigen-decomposition with c-normalized eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFrame {
    pub e_plus: Complex64,
    pub e_minus: Complex64,
    pub v_plus: Vec2,
    pub v_minus: Vec2,
    /// c_product(u, u) of the unit (Hermitian-normalized) eigenvector; tends
    /// to zero at the EP where the eigenvector becomes self-orthogonal.
    pub cnorm_plus: Complex64,
    pub cnorm_minus: Complex64,
    pub gauge: Gauge,
}

impl EigenFrame {
    pub fn energy(&self, slot: usize) -> Complex64 {
        if slot == 0 {
            self.e_plus
        } else {
            self.e_minus
        }
    }

    pub fn vector(&self, slot: usize) -> &Vec2 {
        if slot == 0 {
            &self.v_plus
        } else {
            &self.v_minus
        }
    }

    /// Eigenvector rescaled to unit Hermitian norm.
    pub fn unit_vector(&self, slot: usize) -> Vec2 {
        let v = self.vector(slot);
        let n = hermitian_norm(v);
        [v[0] / n, v[1] / n]
    }

    /// Relabels and re-signs this frame so that each slot continues the
    /// corresponding slot of `reference`, judged by c-product overlap.
    ///
    /// Fails with `AmbiguousTracking` when the same-slot and cross-slot
    /// overlaps are within 10% of each other. `t` only labels the error.
    pub fn aligned_to(&self, reference: &EigenFrame, t: f64) -> Result<EigenFrame> {
        let same = c_product(&reference.v_plus, &self.v_plus).norm();
        let cross = c_product(&reference.v_plus, &self.v_minus).norm();
        if (same - cross).abs() < 0.1 * same.max(cross) {
            return Err(Error::AmbiguousTracking { t, same, cross });
        }
        let mut out = if same >= cross {
            *self
        } else {
            EigenFrame {
                e_plus: self.e_minus,
                e_minus: self.e_plus,
                v_plus: self.v_minus,
                v_minus: self.v_plus,
                cnorm_plus: self.cnorm_minus,
                cnorm_minus: self.cnorm_plus,
                gauge: self.gauge,
            }
        };
        if c_product(&reference.v_plus, &out.v_plus).re < 0.0 {
            out.v_plus = [-out.v_plus[0], -out.v_plus[1]];
        }
        if c_product(&reference.v_minus, &out.v_minus).re < 0.0 {
            out.v_minus = [-out.v_minus[0], -out.v_minus[1]];
        }
        out.gauge = Gauge::Continuous;
        Ok(out)
    }
}

fn raw_eigenvector(h: &HamiltonianMatrix, lambda: Complex64) -> Vec2 {
    let a = [h.h12, lambda - h.h11];
    let b = [lambda - h.h22, h.h21];
    if hermitian_norm(&a) >= hermitian_norm(&b) {
        a
    } else {
        b
    }
}

fn fix_sign(v: Vec2) -> Vec2 {
    let lead = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
    if lead.re < 0.0 || (lead.re == 0.0 && lead.im < 0.0) {
        [-v[0], -v[1]]
    } else {
        v
    }
}

fn normalized_pair(h: &HamiltonianMatrix, lambda: Complex64) -> (Vec2, Complex64) {
    let raw = raw_eigenvector(h, lambda);
    let n = hermitian_norm(&raw);
    let unit = [raw[0] / n, raw[1] / n];
    let cnorm = c_product(&unit, &unit);
    let s = cnorm.sqrt();
    (fix_sign([unit[0] / s, unit[1] / s]), cnorm)
}

/// Right eigenvectors c-normalized to `c_product(v, v) = 1`.
///
/// Refuses with `EpProximity` when |Δ| ≤ tol², where the self-orthogonal
/// eigenvector makes the normalization singular.
pub fn eigenframe(h: &HamiltonianMatrix, tol: f64) -> Result<EigenFrame> {
    let delta = discriminant(h);
    if delta.norm() <= tol * tol {
        return Err(Error::EpProximity {
            discriminant: delta.norm(),
        });
    }
    let (e_plus, e_minus) = eigenvalues(h);
    let (v_plus, cnorm_plus) = normalized_pair(h, e_plus);
    let (v_minus, cnorm_minus) = normalized_pair(h, e_minus);
    Ok(EigenFrame {
        e_plus,
        e_minus,
        v_plus,
        v_minus,
        cnorm_plus,
        cnorm_minus,
        gauge: Gauge::LargestComponent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpLocation {
    pub field: FieldPoint,
    pub residual: f64,
}

/// Closed-form exceptional point: ε₀ = ΔΓ/Re[d₁₂], ω = E₂ − E₁ − Im[d₁₂]·ε₀.
pub fn locate_ep(params: &SystemParams) -> Result<EpLocation> {
    params.validate()?;
    if params.d12.re == 0.0 {
        return Err(Error::NoFiniteEp);
    }
    let eps0 = params.delta_gamma() / params.d12.re;
    if eps0 < 0.0 {
        return Err(Error::NegativeAmplitude { eps0 });
    }
    let omega = params.e2 - params.e1 - params.d12.im * eps0;
    let field = FieldPoint { omega, eps0 };
    let residual = discriminant(&build_hamiltonian(params, field)).norm();
    Ok(EpLocation { field, residual })
}

/// Residual of the two coalescence conditions
/// `Re[h11 − h22] = ∓2 Im√(h12 h21)` and `Im[h11 − h22] = ±2 Re√(h12 h21)`,
/// minimized over the two sign pairings. Zero exactly at an EP.
///
/// Both pairings together factor the discriminant, so the two residuals
/// multiply to |Δ|.
pub fn verify_ep(params: &SystemParams, field: FieldPoint) -> f64 {
    let (upper, lower) = coalescence_residuals(&build_hamiltonian(params, field));
    upper.min(lower)
}

pub(crate) fn coalescence_residuals(h: &HamiltonianMatrix) -> (f64, f64) {
    let diff = h.h11 - h.h22;
    let s = (h.h12 * h.h21).sqrt();
    // Upper signs: Re diff = −2 Im s, Im diff = +2 Re s, i.e. diff = 2i·s.
    let upper = diff - 2.0 * I * s;
    let lower = diff + 2.0 * I * s;
    (upper.norm(), lower.norm())
}
