//! Observables computed from trajectories: normalized projections, final-state
//! dominance, survival, the four-run direction/initial-state table and
//! (duration, amplitude) sweeps.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{ControlPath, Direction, LoopSpec, PathInfo};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::model::{eigenframe, locate_ep, SystemParams, Vec2};
use crate::propagator::{propagate_direct, StateVector, TrajectoryRecord};
use crate::tracking::{frame_tol, track_branches};

/// Ratios above this are reported as the cap.
pub const RATIO_CAP: f64 = 1e12;
/// Default dominance threshold: the winner must outweigh the loser 1000:1.
pub const DEFAULT_RATIO_MIN: f64 = 1000.0;

/// Basis in which populations are read off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// Bare states |1⟩, |2⟩.
    Bare,
    /// Eigenvectors of H at the starting point of the path: state one is the
    /// "+" root, state two the "−" root. Equals the bare basis (up to order)
    /// for paths that start at zero field.
    #[serde(rename = "loop-start")]
    LoopStart,
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bare" => Ok(Basis::Bare),
            "loop-start" => Ok(Basis::LoopStart),
            _ => Err(Error::invalid(
                "basis",
                format!("expected bare or loop-start, got {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisState {
    One,
    Two,
}

impl BasisState {
    pub fn other(self) -> Self {
        match self {
            BasisState::One => BasisState::Two,
            BasisState::Two => BasisState::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            BasisState::One => 0,
            BasisState::Two => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BasisState::One => "state1",
            BasisState::Two => "state2",
        }
    }
}

impl std::fmt::Display for BasisState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// The two basis vectors (unit Hermitian norm) of `basis` for a trajectory
/// that starts at `path`.
pub fn basis_vectors(params: &SystemParams, path: &PathInfo, basis: Basis) -> Result<[Vec2; 2]> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    match basis {
        Basis::Bare => Ok([[one, zero], [zero, one]]),
        Basis::LoopStart => {
            let start = match path {
                PathInfo::Loop(l) => l.point(0.0),
                PathInfo::Static(s) => s.field,
            };
            let f = eigenframe(&params.hamiltonian(start), frame_tol())?;
            Ok([f.unit_vector(0), f.unit_vector(1)])
        }
    }
}

/// Expansion coefficients of `c` on the (generally non-orthogonal) pair `u`.
fn expand(u: &[Vec2; 2], c: &Vec2) -> (Complex64, Complex64) {
    let det = u[0][0] * u[1][1] - u[1][0] * u[0][1];
    let x1 = (c[0] * u[1][1] - c[1] * u[1][0]) / det;
    let x2 = (u[0][0] * c[1] - u[0][1] * c[0]) / det;
    (x1, x2)
}

/// Normalized populations (W₁, W₂) from squared weights. The smaller one is
/// computed directly so that tiny populations keep full relative precision.
fn normalized_pair(p1: f64, p2: f64) -> (f64, f64) {
    let total = p1 + p2;
    if p1 <= p2 {
        let w1 = p1 / total;
        (w1, 1.0 - w1)
    } else {
        let w2 = p2 / total;
        (1.0 - w2, w2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSeries {
    pub basis: Basis,
    pub times: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

/// Bare-basis populations W_ν(t) = |c_ν|²/(|c₁|² + |c₂|²).
pub fn project_normalized(traj: &TrajectoryRecord) -> Result<ProjectionSeries> {
    project_in(traj, Basis::Bare)
}

pub fn project_in(traj: &TrajectoryRecord, basis: Basis) -> Result<ProjectionSeries> {
    if traj.is_empty() {
        return Err(Error::Precondition("trajectory is empty".into()));
    }
    let u = basis_vectors(&traj.meta.params, &traj.meta.path, basis)?;
    let mut out = ProjectionSeries {
        basis,
        times: traj.times.clone(),
        w1: Vec::with_capacity(traj.len()),
        w2: Vec::with_capacity(traj.len()),
    };
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let (p1, p2) = populations(&u, s);
        if p1 + p2 == 0.0 {
            return Err(Error::ZeroNorm { t: *t });
        }
        let (w1, w2) = normalized_pair(p1, p2);
        out.w1.push(w1);
        out.w2.push(w2);
    }
    Ok(out)
}

fn populations(u: &[Vec2; 2], s: &StateVector) -> (f64, f64) {
    let (x1, x2) = expand(u, &s.as_array());
    (x1.norm_sqr(), x2.norm_sqr())
}

/// Population of the true (unrescaled) state at the end relative to the start.
pub fn survival_fraction(traj: &TrajectoryRecord) -> f64 {
    let last = traj.len() - 1;
    (traj.log_norm_sq(last) - traj.log_norm_sq(0)).exp()
}

/// Final-time dominance in one basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    pub basis: Basis,
    /// None only for an exact tie.
    pub dominant: Option<BasisState>,
    /// max(W₁, W₂)/min(W₁, W₂), capped at [`RATIO_CAP`].
    pub ratio: f64,
    pub w1: f64,
    pub w2: f64,
    pub survival: f64,
    pub direction: Option<Direction>,
    pub initial_label: String,
}

impl AsymmetryReport {
    pub fn from_populations(
        w1: f64,
        w2: f64,
        basis: Basis,
        survival: f64,
        direction: Option<Direction>,
        initial_label: impl Into<String>,
    ) -> Self {
        let (hi, lo) = if w1 >= w2 { (w1, w2) } else { (w2, w1) };
        let ratio = if lo == 0.0 || hi / lo > RATIO_CAP {
            RATIO_CAP
        } else {
            hi / lo
        };
        let dominant = if w1 > w2 {
            Some(BasisState::One)
        } else if w2 > w1 {
            Some(BasisState::Two)
        } else {
            None
        };
        AsymmetryReport {
            basis,
            dominant,
            ratio,
            w1,
            w2,
            survival,
            direction,
            initial_label: initial_label.into(),
        }
    }

    pub fn dominant_label(&self) -> &'static str {
        self.dominant.map_or("none", BasisState::label)
    }
}

pub fn final_state_report(traj: &TrajectoryRecord, basis: Basis, initial_label: &str) -> Result<AsymmetryReport> {
    let p = project_in(traj, basis)?;
    let k = traj.len() - 1;
    let direction = match traj.meta.path {
        PathInfo::Loop(l) => Some(l.direction),
        PathInfo::Static(_) => None,
    };
    Ok(AsymmetryReport::from_populations(
        p.w1[k],
        p.w2[k],
        basis,
        survival_fraction(traj),
        direction,
        initial_label,
    ))
}

pub fn asymmetry_criterion(report: &AsymmetryReport, threshold: f64) -> bool {
    report.ratio >= threshold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub direction: Direction,
    pub initial: BasisState,
    /// Initial label carried through the tracked eigenvalue exchange.
    pub adiabatic_final: BasisState,
    pub exact_final: Option<BasisState>,
    pub ratio: f64,
    pub survival: f64,
    pub swapped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub basis: Basis,
    pub rows: Vec<Table1Row>,
}

impl Table1 {
    /// Rows where the exact outcome differs from the adiabatic prediction.
    pub fn disagreements(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.exact_final != Some(r.adiabatic_final))
            .count()
    }

    pub fn render(&self) -> String {
        let mut lines = vec![format!(
            "{:<9}  {:<7}  {:<15}  {:<11}  {:>10}  {:>10}",
            "direction", "initial", "final-adiabatic", "final-exact", "ratio", "survival"
        )];
        for r in &self.rows {
            lines.push(format!(
                "{:<9}  {:<7}  {:<15}  {:<11}  {:>10.3e}  {:>10.3e}",
                r.direction.to_string(),
                r.initial.label(),
                r.adiabatic_final.label(),
                r.exact_final.map_or("none", BasisState::label),
                r.ratio,
                r.survival
            ));
        }
        lines.join("\n") + "\n"
    }
}

/// Runs both directions from both basis states and compares the exact final
/// state with the adiabatic prediction (the initial label, flipped if the
/// tracked branches exchange).
pub fn table1(params: &SystemParams, lp: &LoopSpec, config: &IntegratorConfig, basis: Basis) -> Result<Table1> {
    lp.validate()?;
    if !lp.contains_ep(params)? {
        return Err(Error::Precondition(
            "loop does not enclose the exceptional point (rho <= 0)".into(),
        ));
    }
    let u = basis_vectors(params, &PathInfo::Loop(*lp), basis)?;
    let mut rows = Vec::with_capacity(4);
    for direction in [Direction::Cw, Direction::Ccw] {
        let l = lp.with_direction(direction);
        let swapped = track_branches(params, &l, crate::propagator::TRACKING_SAMPLES)?.swapped;
        for initial in [BasisState::One, BasisState::Two] {
            let init = StateVector::from_array(u[initial.index()]);
            let traj = propagate_direct(params, &l, &init, config)?;
            let rep = final_state_report(&traj, basis, initial.label())?;
            rows.push(Table1Row {
                direction,
                initial,
                adiabatic_final: if swapped { initial.other() } else { initial },
                exact_final: rep.dominant,
                ratio: rep.ratio,
                survival: rep.survival,
                swapped,
            });
        }
    }
    Ok(Table1 { basis, rows })
}

/// Initial condition for sweep cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    /// (u₁ + e^{iφ}u₂), normalized, in the sweep's basis.
    EqualSuperposition {
        phase: f64,
    },
    Explicit {
        state: StateVector,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::EqualSuperposition { phase: 0.0 }
    }
}

impl InitialSpec {
    pub fn state(&self, u: &[Vec2; 2]) -> StateVector {
        match *self {
            InitialSpec::Explicit { state } => state,
            InitialSpec::EqualSuperposition { phase } => {
                let e = Complex64::from_polar(1.0, phase);
                StateVector::from_array([u[0][0] + e * u[1][0], u[0][1] + e * u[1][1]]).normalized()
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitialSpec::EqualSuperposition { phase } => format!("equal(phase={phase})"),
            InitialSpec::Explicit { state } => {
                format!("({}{:+}i, {}{:+}i)", state.c1.re, state.c1.im, state.c2.re, state.c2.im)
            }
        }
    }
}

/// Grid over (duration, amplitude scale). Cell (i, j) uses
/// `template.scaled(amp_scales[j]).with_duration(durations[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub durations: Vec<f64>,
    pub amp_scales: Vec<f64>,
    pub template: LoopSpec,
    pub initial: InitialSpec,
    pub basis: Basis,
    pub ratio_min: f64,
    pub survival_levels: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.durations.is_empty() || self.amp_scales.is_empty() {
            return Err(Error::invalid(
                "grid",
                "needs at least one duration and one amplitude scale",
            ));
        }
        if self.durations.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::invalid("durations", "must all be > 0"));
        }
        if self.amp_scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("amp_scales", "must all be > 0"));
        }
        if self.ratio_min.is_nan() || self.ratio_min <= 0.0 {
            return Err(Error::invalid("ratio_min", "must be > 0"));
        }
        if self.survival_levels.is_empty() || self.survival_levels.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::invalid("survival_levels", "need at least one positive level"));
        }
        self.template.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub i: usize,
    pub j: usize,
    pub duration: f64,
    pub amp_scale: f64,
    pub rho: f64,
    pub report: Option<AsymmetryReport>,
    /// Error kind and message when the cell could not be computed.
    pub error: Option<(String, String)>,
    pub pass_ratio: bool,
    /// Survival at or above the smallest requested level.
    pub pass_survival: bool,
    /// Survival at or above each requested level, in order.
    pub survival_passes: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, i: usize, j: usize) -> &SweepCell {
        &self.cells[i * self.spec.amp_scales.len() + j]
    }

    /// (passing cells, passing cells with rho > 0).
    pub fn ratio_pass_counts(&self) -> (usize, usize) {
        let pass: Vec<&SweepCell> = self.cells.iter().filter(|c| c.pass_ratio).collect();
        (pass.len(), pass.iter().filter(|c| c.rho > 0.0).count())
    }

    /// Whether survival strictly decreases with duration in every column.
    pub fn survival_monotone_in_duration(&self) -> bool {
        let rows = self.spec.durations.len();
        (0..self.spec.amp_scales.len()).all(|j| {
            (1..rows).all(|i| match (&self.cell(i - 1, j).report, &self.cell(i, j).report) {
                (Some(a), Some(b)) => b.survival < a.survival,
                _ => true,
            })
        })
    }

    pub fn all_failed(&self) -> bool {
        self.cells.iter().all(|c| c.error.is_some())
    }
}

fn run_cell(
    spec: &SweepSpec,
    params: &SystemParams,
    config: &IntegratorConfig,
    ep: &crate::model::EpLocation,
    i: usize,
    j: usize,
) -> SweepCell {
    let duration = spec.durations[i];
    let amp_scale = spec.amp_scales[j];
    let lp = spec.template.scaled(amp_scale).with_duration(duration);
    let mut cell = SweepCell {
        i,
        j,
        duration,
        amp_scale,
        rho: lp.rho(ep),
        report: None,
        error: None,
        pass_ratio: false,
        pass_survival: false,
        survival_passes: vec![false; spec.survival_levels.len()],
    };
    let outcome = lp.validate().and_then(|_| {
        let u = basis_vectors(params, &PathInfo::Loop(lp), spec.basis)?;
        let init = spec.initial.state(&u);
        let traj = propagate_direct(params, &lp, &init, config)?;
        final_state_report(&traj, spec.basis, &spec.initial.label())
    });
    match outcome {
        Ok(rep) => {
            cell.pass_ratio = asymmetry_criterion(&rep, spec.ratio_min);
            cell.survival_passes = spec.survival_levels.iter().map(|&l| rep.survival >= l).collect();
            let smallest = spec.survival_levels.iter().cloned().fold(f64::INFINITY, f64::min);
            cell.pass_survival = rep.survival >= smallest;
            cell.report = Some(rep);
        }
        Err(e) => cell.error = Some((e.kind().to_string(), e.to_string())),
    }
    cell
}

/// Evaluates every cell on a pool of `jobs` worker threads. Rows (fixed
/// duration) are finished in order and handed to `on_row` as they complete.
pub fn sweep<F>(
    spec: &SweepSpec,
    params: &SystemParams,
    config: &IntegratorConfig,
    jobs: usize,
    mut on_row: F,
) -> Result<SweepResult>
where
    F: FnMut(&[SweepCell]),
{
    spec.validate()?;
    params.validate()?;
    config.validate()?;
    let ep = locate_ep(params)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    let mut cells = Vec::with_capacity(spec.durations.len() * spec.amp_scales.len());
    for i in 0..spec.durations.len() {
        let row: Vec<SweepCell> = pool.install(|| {
            (0..spec.amp_scales.len())
                .into_par_iter()
                .map(|j| run_cell(spec, params, config, &ep, i, j))
                .collect()
        });
        on_row(&row);
        cells.extend(row);
    }
    Ok(SweepResult {
        spec: spec.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::StaticField;
    use crate::model::FieldPoint;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn static_traj(state: StateVector) -> TrajectoryRecord {
        let p = SystemParams::reference();
        let s = StaticField::new(FieldPoint::new(1.0, 0.0).unwrap(), 5.0).unwrap();
        propagate_direct(&p, &s, &state, &IntegratorConfig::default()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let p = project_normalized(&static_traj(StateVector::bare(0))).unwrap();
        assert_eq!((p.w1[0], p.w2[0]), (1.0, 0.0));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let p = project_normalized(&static_traj(StateVector::new(c(r, 0.0), c(r, 0.0)).unwrap())).unwrap();
        assert_abs_diff_eq!(p.w1[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.w2[0], 0.5, epsilon = 1e-15);
        for k in 0..p.times.len() {
            assert!((p.w1[k] + p.w2[k] - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn report_arithmetic() {
        let r = AsymmetryReport::from_populations(0.999, 0.001, Basis::Bare, 1.0, None, "x");
        assert_eq!(r.dominant, Some(BasisState::One));
        assert_abs_diff_eq!(r.ratio, 999.0, epsilon = 1e-9);
        assert!(!asymmetry_criterion(&r, DEFAULT_RATIO_MIN));
        let r = AsymmetryReport::from_populations(0.5, 0.5, Basis::Bare, 1.0, None, "x");
        assert_eq!(r.dominant, None);
        assert_eq!(r.ratio, 1.0);
        let r = AsymmetryReport::from_populations(1.0, 0.0, Basis::Bare, 1.0, None, "x");
        assert_eq!(r.ratio, RATIO_CAP);
        let r = AsymmetryReport::from_populations(1500.0 / 1501.0, 1.0 / 1501.0, Basis::Bare, 1.0, None, "x");
        assert!(asymmetry_criterion(&r, 1000.0));
    }

    #[test]
    fn survival_static_field() {
        let t = static_traj(StateVector::bare(0));
        assert_abs_diff_eq!(survival_fraction(&t), (-1.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn loop_start_basis_at_zero_field_is_bare() {
        let p = SystemParams::reference();
        let s = StaticField::new(FieldPoint::new(1.0, 0.0).unwrap(), 1.0).unwrap();
        let u = basis_vectors(&p, &PathInfo::Static(s), Basis::LoopStart).unwrap();
        // "+" root has the larger real part... both are 1 here, so ties go to
        // the larger imaginary part, i.e. the narrower state |1⟩
        assert_abs_diff_eq!(u[0][0].norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u[1][1].norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn expansion_reconstructs_state() {
        let u = [[c(0.8, 0.1), c(0.2, -0.5)], [c(-0.3, 0.0), c(0.9, 0.2)]];
        let s = [c(0.4, -0.7), c(1.1, 0.3)];
        let (x1, x2) = expand(&u, &s);
        for k in 0..2 {
            assert!((x1 * u[0][k] + x2 * u[1][k] - s[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn table1_needs_encircling_loop() {
        let p = SystemParams::reference();
        let l = LoopSpec::new(FieldPoint::new(1.0, 0.5).unwrap(), 0.05, 0.05, Direction::Cw, 10.0, 0.0).unwrap();
        let e = table1(&p, &l, &IntegratorConfig::default(), Basis::LoopStart).unwrap_err();
        assert_eq!(e.kind(), "Precondition");
    }

    #[test]
    fn sweep_records_cell_errors_and_continues() {
        let p = SystemParams::reference();
        let template = LoopSpec::new(FieldPoint::new(1.0, 0.3).unwrap(), 0.1, 0.1, Direction::Ccw, 1.0, 0.0).unwrap();
        let spec = SweepSpec {
            durations: vec![5.0, 10.0],
            amp_scales: vec![1.0, 4.0],
            template,
            initial: InitialSpec::default(),
            basis: Basis::Bare,
            ratio_min: 1000.0,
            survival_levels: vec![0.1],
        };
        let mut rows = 0;
        let r = sweep(&spec, &p, &IntegratorConfig::default(), 2, |row| {
            assert_eq!(row.len(), 2);
            rows += 1;
        })
        .unwrap();
        assert_eq!(rows, 2);
        assert_eq!(r.cells.len(), 4);
        // scale 4 would push ε₀ negative
        assert_eq!(r.cell(0, 1).error.as_ref().unwrap().0, "InvalidParameter");
        assert!(r.cell(0, 0).report.is_some());
        assert!(r.survival_monotone_in_duration());
        assert!(!r.all_failed());
    }
}
