//! Two-resonance non-Hermitian model driven around an exceptional point.
//!
//! The Hamiltonian lives in [`model`], loops and their winding in
//! [`contour`], branch tracking and non-adiabatic couplings in [`tracking`],
//! time propagation in [`propagator`] and observables in [`analysis`].

pub mod analysis;
pub mod contour;
pub mod error;
pub mod integrator;
pub mod io;
pub mod model;
pub mod propagator;
pub mod tracking;

pub use num_complex;

pub use analysis::{
    asymmetry_criterion, final_state_report, project_in, project_normalized, survival_fraction, sweep, table1,
    AsymmetryReport, Basis, BasisState, InitialSpec, ProjectionSeries, SweepCell, SweepResult, SweepSpec, Table1,
};
pub use contour::{ControlPath, Direction, LoopSpec, PathInfo, StaticField};
pub use error::{Error, Result};
pub use integrator::IntegratorConfig;
pub use model::{
    build_hamiltonian, c_product, discriminant, eigenframe, eigenvalues, locate_ep, verify_ep, EigenFrame, EpLocation,
    FieldPoint, HamiltonianMatrix, SystemParams,
};
pub use propagator::{propagate_adiabatic, propagate_direct, Method, OutputGrid, StateVector, TrajectoryRecord};
pub use tracking::{accumulated_phase, average_decay_rate, na_coupling, track_branches, AdiabaticFrame};
