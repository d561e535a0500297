//! Output-probability profiles `P(ε)` over the sinusoidal readout family,
//! width extraction and `Δa` scans.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::time::Instant;

use crate::analytic::{
    decay_rate, effective_width_linear, packet_scale, readout_response, renormalized_frequency,
};
use crate::ansatz::{default_steps, drift_envelope, DriftEnvelope};
use crate::error::{Error, Result};
use crate::evolver::{overlap, Amplitude, EvolutionConfig, Frame, Propagator};
use crate::model::{ground_state, make_readout, MeasurementSetup, PhysicalSystem, SpatialGrid};

/// Symmetric, sorted, uniformly spaced readout amplitudes with an exact zero
/// at the centre.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGrid {
    values: Vec<f64>,
    step: f64,
}

impl EpsilonGrid {
    pub fn new(half_width: f64, count: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid("epsilon_half_width", format!("must be > 0, got {half_width}")));
        }
        if count < 3 || count.is_multiple_of(2) {
            return Err(Error::invalid("epsilon_points", format!("must be odd and >= 3, got {count}")));
        }
        let half = (count - 1) / 2;
        let step = half_width / half as f64;
        let values = (0..count)
            .map(|i| (i as f64 - half as f64) * step)
            .collect();
        Ok(Self { values, step })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn count(&self) -> usize {
        self.values.len()
    }
    pub fn half_width(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
    pub fn centre_index(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    /// Composite Simpson weights (the count is odd, so the panels pair up).
    pub fn simpson_weights(&self) -> Vec<f64> {
        let n = self.values.len();
        (0..n)
            .map(|i| {
                let c = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * self.step / 3.0
            })
            .collect()
    }
}

/// Which coordinate frame the planner may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMode {
    /// Laboratory or following frame, whichever leaves the smaller phase
    /// gradient on the grid for the linear packet.
    Auto,
    Lab,
}

/// Space-time resolution and ε-grid policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    /// Ceiling on `ω·dt`.
    pub omega_dt: f64,
    /// Grid points per packet length `sqrt(ħ/m Re ω_r)`.
    pub points_per_length: f64,
    /// Cap on `k·dx` for the largest expected phase gradient.
    pub max_k_dx: f64,
    /// Cap on `|ω_r|·dt`.
    pub max_wr_dt: f64,
    /// Divides the planned `dx` and `dt`.
    pub refine: f64,
    /// Largest tolerated excess amplification (in e-folds) of lattice modes
    /// that the Cayley step damps more weakly than the physical state.
    pub stiffness_budget: f64,
    pub dx: Option<f64>,
    pub half_width: Option<f64>,
    pub num_steps: Option<usize>,
    pub frame: FrameMode,
    pub epsilon_points: usize,
    pub epsilon_half_width: Option<f64>,
    pub tail_ratio: f64,
    pub leak_tolerance: f64,
    /// Evaluate only `ε ≥ 0` and mirror, using `I(−ε) = I(ε)` for the even
    /// ground state on a symmetric grid.
    pub use_parity: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            omega_dt: 0.01,
            points_per_length: 8.0,
            max_k_dx: 0.15,
            max_wr_dt: 0.02,
            refine: 1.0,
            stiffness_budget: 20.0,
            dx: None,
            half_width: None,
            num_steps: None,
            frame: FrameMode::Auto,
            epsilon_points: 129,
            epsilon_half_width: None,
            tail_ratio: 1e-6,
            leak_tolerance: crate::evolver::LEAK_TOLERANCE,
            use_parity: true,
        }
    }
}

/// Grid and time stepping for one readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionPlan {
    pub grid: SpatialGrid,
    pub config: EvolutionConfig,
}

/// ε-independent part of a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanBasis {
    frame: Frame,
    drift: DriftEnvelope,
    packet: f64,
    decay: f64,
    omega_r: f64,
}

impl Numerics {
    pub fn with_refine(&self, factor: f64) -> Self {
        Self {
            refine: factor,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be > 0, got {v}")))
            }
        };
        pos("omega_dt", self.omega_dt)?;
        pos("points_per_length", self.points_per_length)?;
        pos("max_k_dx", self.max_k_dx)?;
        pos("max_wr_dt", self.max_wr_dt)?;
        pos("refine", self.refine)?;
        pos("stiffness_budget", self.stiffness_budget)?;
        pos("tail_ratio", self.tail_ratio)?;
        pos("leak_tolerance", self.leak_tolerance)?;
        if let Some(v) = self.dx {
            pos("dx", v)?;
        }
        if let Some(v) = self.half_width {
            pos("half_width", v)?;
        }
        if let Some(v) = self.epsilon_half_width {
            pos("epsilon_half_width", v)?;
        }
        if self.num_steps == Some(0) {
            return Err(Error::invalid("num_steps", "must be >= 1"));
        }
        if self.epsilon_points < 3 || self.epsilon_points.is_multiple_of(2) {
            return Err(Error::invalid(
                "epsilon_points",
                format!("must be odd and >= 3, got {}", self.epsilon_points),
            ));
        }
        Ok(())
    }

    pub fn basis(&self, system: &PhysicalSystem, setup: &MeasurementSetup) -> PlanBasis {
        let still = DriftEnvelope {
            position: 0.0,
            wavenumber: 0.0,
            wavenumber_rms: 0.0,
        };
        let (frame, drift) = if !setup.is_measuring() {
            (Frame::Lab, still)
        } else {
            let steps = default_steps(system, setup);
            let lab = drift_envelope(system, setup, &Frame::Lab, steps);
            let follow = Frame::Following {
                gain: readout_response(system, setup).in_phase,
            };
            match self.frame {
                FrameMode::Lab => (Frame::Lab, lab),
                FrameMode::Auto => {
                    let moving = drift_envelope(system, setup, &follow, steps);
                    if moving.wavenumber_rms < lab.wavenumber_rms {
                        (follow, moving)
                    } else {
                        (Frame::Lab, lab)
                    }
                }
            }
        };
        PlanBasis {
            frame,
            drift,
            packet: packet_scale(system, setup),
            decay: decay_rate(system, setup),
            omega_r: renormalized_frequency(system, setup).omega_r.norm(),
        }
    }

    pub fn frame(&self, system: &PhysicalSystem, setup: &MeasurementSetup) -> Frame {
        self.basis(system, setup).frame
    }

    /// Plans the evolution for readout amplitude `epsilon`.
    pub fn plan_with(
        &self,
        basis: &PlanBasis,
        system: &PhysicalSystem,
        setup: &MeasurementSetup,
        epsilon: f64,
    ) -> Result<EvolutionPlan> {
        let (m, hbar) = (system.mass(), system.hbar());
        let qs = system.quantum_scale();
        let eps = epsilon.abs();
        let quartic = !system.is_linear();
        let margin = if quartic { 1.5 } else { 1.2 };

        let excursion = margin * eps * basis.drift.position;
        let half_width = self
            .half_width
            .unwrap_or((if quartic { 9.0 } else { 7.0 }) * qs + excursion);

        let k = eps * basis.drift.wavenumber_rms;
        let dx = match self.dx {
            Some(dx) => dx,
            None => {
                let by_packet = basis.packet / self.points_per_length;
                let by_phase = if k > 0.0 { self.max_k_dx / k } else { f64::INFINITY };
                by_packet.min(by_phase) / self.refine
            }
        };
        // the quartic force only shortens the step: the packet stays locked
        // to the readout, while kinetic energy is bounded by the quartic
        // energy released over the reach
        let mut k_time = k;
        if quartic {
            let gain = basis.frame.gain();
            let reach = eps * (gain.abs() + basis.drift.position) + 3.0 * basis.packet;
            k_time += (0.5 * m * system.beta()).sqrt() * reach * reach / hbar;
        }
        let grid = SpatialGrid::with_spacing(dx, half_width)?;

        let tau = setup.tau();
        let num_steps = match self.num_steps {
            Some(n) => n,
            None => {
                let mut dt = (self.omega_dt / system.omega()).min(self.max_wr_dt / basis.omega_r);
                if k_time > 0.0 {
                    dt = dt.min(self.max_wr_dt * 2.0 * m / (hbar * k_time * k_time));
                }
                dt /= self.refine;
                let gamma_tau = basis.decay * tau;
                if gamma_tau > self.stiffness_budget {
                    let q = self.stiffness_budget / gamma_tau;
                    let r_max = (q / (1.0 - q)).sqrt();
                    dt = dt.min(r_max * m * dx * dx / hbar);
                }
                (tau / dt).ceil().max(1.0) as usize
            }
        };
        let limit = self.omega_dt.max(crate::evolver::MAX_OMEGA_DT);
        let config = EvolutionConfig::with_limit(num_steps, system, setup, limit)?
            .with_frame(basis.frame)
            .with_leak_tolerance(self.leak_tolerance);
        Ok(EvolutionPlan { grid, config })
    }

    pub fn plan(
        &self,
        system: &PhysicalSystem,
        setup: &MeasurementSetup,
        epsilon: f64,
    ) -> Result<EvolutionPlan> {
        self.plan_with(&self.basis(system, setup), system, setup, epsilon)
    }
}

/// Amplitude and monitoring data for one readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResult {
    pub amplitude: Amplitude,
    pub leak_max: f64,
    pub plan: EvolutionPlan,
}

/// `I(ε) = ⟨φ₀|ψ_ε(τ)⟩` with `φ₀` the harmonic ground state.
pub fn amplitude_at(
    epsilon: f64,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    numerics: &Numerics,
    basis: &PlanBasis,
) -> Result<PointResult> {
    let run = || -> Result<PointResult> {
        let plan = numerics.plan_with(basis, system, setup, epsilon)?;
        let phi = ground_state(&plan.grid, system)?;
        let readout = make_readout(epsilon, setup);
        let mut prop = Propagator::new(system, setup, &readout, plan.config, plan.grid);
        let (psi, stats) = prop.evolve(&phi)?;
        Ok(PointResult {
            amplitude: overlap(&phi, &psi)?,
            leak_max: stats.leak_max,
            plan,
        })
    };
    run().map_err(|e| e.at_epsilon(epsilon))
}

/// Amplitudes over the grid, in grid order.
pub fn amplitude_profile(
    eps_grid: &EpsilonGrid,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    numerics: &Numerics,
) -> Result<Vec<PointResult>> {
    let basis = numerics.basis(system, setup);
    let eps = eps_grid.values();
    let c = eps_grid.centre_index();
    let todo: &[f64] = if numerics.use_parity { &eps[c..] } else { eps };
    let points: Vec<PointResult> = todo
        .par_iter()
        .map(|&e| amplitude_at(e, system, setup, numerics, &basis))
        .collect::<Result<_>>()?;
    if !numerics.use_parity {
        return Ok(points);
    }
    let mut out: Vec<PointResult> = points[1..].iter().rev().copied().collect();
    out.extend_from_slice(&points);
    Ok(out)
}

/// `|I|²` normalised to unit Simpson integral, evaluated in the log domain.
pub fn probability_profile(amplitudes: &[Amplitude], eps_grid: &EpsilonGrid) -> Result<Vec<f64>> {
    if amplitudes.len() != eps_grid.count() {
        return Err(Error::invalid("amplitudes", "length differs from the epsilon grid"));
    }
    let logs: Vec<f64> = amplitudes.iter().map(|a| 2.0 * a.ln_modulus()).collect();
    if logs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::invalid("amplitudes", "non-finite amplitude"));
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::DegenerateProfile);
    }
    let rel: Vec<f64> = logs.iter().map(|v| (v - top).exp()).collect();
    let q: f64 = rel
        .iter()
        .zip(eps_grid.simpson_weights())
        .map(|(p, w)| p * w)
        .sum();
    if !(q > 0.0) {
        return Err(Error::DegenerateProfile);
    }
    Ok(rel.into_iter().map(|p| p / q).collect())
}

/// `1 / (√π P(0))` for a normalised profile.
pub fn equivalent_width(profile: &[f64], eps_grid: &EpsilonGrid) -> Result<f64> {
    let p0 = profile[eps_grid.centre_index()];
    if !(p0 > 0.0) {
        return Err(Error::ZeroPeak);
    }
    Ok(1.0 / (PI.sqrt() * p0))
}

/// Least-squares fit of `ln P = ln P(0) − ε²/w²` over points with
/// `P/P(0) > 1e-3`.
pub fn gaussian_fit_width(profile: &[f64], eps_grid: &EpsilonGrid) -> Result<f64> {
    let p0 = profile[eps_grid.centre_index()];
    if !(p0 > 0.0) {
        return Err(Error::ZeroPeak);
    }
    let pts: Vec<(f64, f64)> = eps_grid
        .values()
        .iter()
        .zip(profile)
        .filter(|(_, &p)| p / p0 > 1e-3)
        .map(|(&e, &p)| (e * e, p.ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let den = n * sxx - sx * sx;
    if pts.len() < 2 || !(den > 0.0) {
        return Err(Error::FitDiverged(format!(
            "{} usable points; need at least two distinct |epsilon|",
            pts.len()
        )));
    }
    let slope = (n * sxy - sx * sy) / den;
    if !(slope < 0.0) || !slope.is_finite() {
        return Err(Error::FitDiverged(format!("slope {slope} is not negative")));
    }
    Ok((-slope).powf(-0.5))
}

/// Monitoring data collected over a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub leak_max: f64,
    /// Smallest `ln |I|` on the grid.
    pub ln_amplitude_floor: f64,
    /// `P(ε_max) / P(0)`.
    pub tail_ratio: f64,
    pub dx_min: f64,
    pub dx_max: f64,
    pub half_width_max: f64,
    pub num_steps_max: usize,
    pub frame: Frame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub epsilon_grid: EpsilonGrid,
    pub amplitudes: Vec<Amplitude>,
    pub profile: Vec<f64>,
    pub width_equivalent: f64,
    pub width_gauss_fit: Result<f64>,
    pub diagnostics: Diagnostics,
    pub doublings: u32,
}

impl SweepResult {
    /// Amplitudes as plain complex numbers (may underflow to zero).
    pub fn amplitude_values(&self) -> Vec<Complex64> {
        self.amplitudes.iter().map(|a| a.value()).collect()
    }
}

/// Largest number of ε-range doublings before giving up on the tail criterion.
pub const MAX_DOUBLINGS: u32 = 6;

/// Initial ε half-width: six times the linear-theory width, or an explicit
/// override.
pub fn initial_epsilon_half_width(
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    numerics: &Numerics,
) -> Result<f64> {
    if let Some(w) = numerics.epsilon_half_width {
        return Ok(w);
    }
    let lin = PhysicalSystem::new(system.mass(), system.omega(), 0.0, system.hbar())?;
    Ok(6.0 * effective_width_linear(&lin, setup)?)
}

/// Smallest `|ε|` from a probe ladder at which `P/P(0)` falls below the tail
/// target. Used to shrink the ε range for the quartic oscillator, whose
/// profile is narrower than the linear estimate.
fn probe_half_width(
    start: f64,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    numerics: &Numerics,
    basis: &PlanBasis,
) -> Result<f64> {
    let target = 0.1 * numerics.tail_ratio;
    let centre = amplitude_at(0.0, system, setup, numerics, basis)?.amplitude.ln_modulus();
    const RUNGS: usize = 12;
    for i in 1..=RUNGS {
        let e = start * i as f64 / RUNGS as f64;
        let a = amplitude_at(e, system, setup, numerics, basis)?.amplitude.ln_modulus();
        if 2.0 * (a - centre) < target.ln() {
            return Ok(e);
        }
    }
    Ok(start)
}

/// Full pipeline for one `Δa`: auto-sized ε grid, amplitudes, normalised
/// profile and both width estimates.
pub fn sweep(system: &PhysicalSystem, setup: &MeasurementSetup, numerics: &Numerics) -> Result<SweepResult> {
    numerics.validate()?;
    let basis = numerics.basis(system, setup);
    let mut half = initial_epsilon_half_width(system, setup, numerics)?;
    if !system.is_linear() && numerics.epsilon_half_width.is_none() {
        half = probe_half_width(half, system, setup, numerics, &basis)?;
    }
    let mut doublings = 0;
    loop {
        let grid = EpsilonGrid::new(half, numerics.epsilon_points)?;
        // one spacing for every ε: the lattice shifts ln|I| by an amount that
        // depends on dx but hardly on ε, so it cancels in P/P(0)
        let common = Numerics {
            dx: Some(numerics.plan_with(&basis, system, setup, half)?.grid.dx()),
            ..numerics.clone()
        };
        let points = amplitude_profile(&grid, system, setup, &common)?;
        let amplitudes: Vec<Amplitude> = points.iter().map(|p| p.amplitude).collect();
        let profile = probability_profile(&amplitudes, &grid)?;
        let c = grid.centre_index();
        let tail = profile[0].max(profile[grid.count() - 1]) / profile[c];
        if tail > numerics.tail_ratio
            && numerics.epsilon_half_width.is_none()
            && doublings < MAX_DOUBLINGS
        {
            half *= 2.0;
            doublings += 1;
            continue;
        }
        let diagnostics = Diagnostics {
            leak_max: points.iter().map(|p| p.leak_max).fold(0.0, f64::max),
            ln_amplitude_floor: amplitudes
                .iter()
                .map(|a| a.ln_modulus())
                .fold(f64::INFINITY, f64::min),
            tail_ratio: tail,
            dx_min: points.iter().map(|p| p.plan.grid.dx()).fold(f64::INFINITY, f64::min),
            dx_max: points.iter().map(|p| p.plan.grid.dx()).fold(0.0, f64::max),
            half_width_max: points.iter().map(|p| p.plan.grid.x_max()).fold(0.0, f64::max),
            num_steps_max: points.iter().map(|p| p.plan.config.num_steps()).max().unwrap_or(0),
            frame: basis.frame,
        };
        return Ok(SweepResult {
            width_equivalent: equivalent_width(&profile, &grid)?,
            width_gauss_fit: gaussian_fit_width(&profile, &grid),
            epsilon_grid: grid,
            amplitudes,
            profile,
            diagnostics,
            doublings,
        });
    }
}

/// One row of a `Δa` scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub delta_a: f64,
    pub result: Result<SweepResult>,
    pub seconds: f64,
}

/// Independent sweeps over `delta_a`, gathered in input order. A failing row
/// is recorded and the scan continues.
pub fn scan_delta_a(
    delta_a: &[f64],
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    numerics: &Numerics,
) -> Result<Vec<ScanRow>> {
    if delta_a.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::invalid("delta_a", "all values must be positive"));
    }
    if delta_a.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("delta_a", "list must be sorted ascending"));
    }
    Ok(delta_a
        .par_iter()
        .map(|&da| {
            let start = Instant::now();
            let result = setup
                .with_delta_a(da)
                .and_then(|s| sweep(system, &s, numerics));
            ScanRow {
                delta_a: da,
                result,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect())
}
