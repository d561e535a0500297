//! Physical constants, measurement setup, readout family, spatial grid and
//! the complex effective potential of the monitored oscillator.
//!
//! Everything here is immutable after construction.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Boundary amplitude (relative to the peak) above which a grid is rejected
/// for holding the harmonic ground state.
pub const GROUND_STATE_EDGE_LIMIT: f64 = 1e-10;

/// Oscillator constants: `L = m/2 ẋ² − m ω²/2 x² − β/4 x⁴`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalSystem {
    mass: f64,
    omega: f64,
    beta: f64,
    hbar: f64,
}

impl PhysicalSystem {
    pub fn new(mass: f64, omega: f64, beta: f64, hbar: f64) -> Result<Self> {
        positive_finite("mass", mass)?;
        positive_finite("omega", omega)?;
        positive_finite("hbar", hbar)?;
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid("beta", format!("must be finite and >= 0, got {beta}")));
        }
        Ok(Self {
            mass,
            omega,
            beta,
            hbar,
        })
    }

    /// `ħ = m = ω = 1`, linear oscillator.
    pub fn natural() -> Self {
        Self {
            mass: 1.0,
            omega: 1.0,
            beta: 0.0,
            hbar: 1.0,
        }
    }

    /// Builds the system from the dimensionless quartic strength
    /// `β̃ = β ħ / (m² ω³)`.
    pub fn with_beta_tilde(mass: f64, omega: f64, hbar: f64, beta_tilde: f64) -> Result<Self> {
        if !(beta_tilde.is_finite() && beta_tilde >= 0.0) {
            return Err(Error::invalid(
                "beta_tilde",
                format!("must be finite and >= 0, got {beta_tilde}"),
            ));
        }
        let probe = Self::new(mass, omega, 0.0, hbar)?;
        Self::new(mass, omega, probe.beta_from_tilde(beta_tilde), hbar)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn is_linear(&self) -> bool {
        self.beta == 0.0
    }

    pub fn beta_tilde(&self) -> f64 {
        self.beta * self.hbar / (self.mass * self.mass * self.omega.powi(3))
    }

    fn beta_from_tilde(&self, beta_tilde: f64) -> f64 {
        beta_tilde * self.mass * self.mass * self.omega.powi(3) / self.hbar
    }

    /// Ground-state length `sqrt(ħ / m ω)`.
    pub fn quantum_scale(&self) -> f64 {
        (self.hbar / (self.mass * self.omega)).sqrt()
    }

    /// Real part of the potential, `m ω² x²/2 + β x⁴/4`.
    pub fn real_potential(&self, x: f64) -> f64 {
        let x2 = x * x;
        0.5 * self.mass * self.omega * self.omega * x2 + 0.25 * self.beta * x2 * x2
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.mass, self.omega, beta, self.hbar)
    }
}

impl Default for PhysicalSystem {
    fn default() -> Self {
        Self::natural()
    }
}

/// Measurement window, instrumental error and readout mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSetup {
    tau: f64,
    delta_a: f64,
    mode_index: u32,
}

impl MeasurementSetup {
    /// `delta_a = f64::INFINITY` switches the measurement off.
    pub fn new(tau: f64, delta_a: f64, mode_index: u32) -> Result<Self> {
        positive_finite("tau", tau)?;
        if !(delta_a > 0.0) {
            return Err(Error::invalid(
                "delta_a",
                format!("must be > 0 (or +inf), got {delta_a}"),
            ));
        }
        if mode_index == 0 {
            return Err(Error::invalid(
                "mode_index",
                "must be a positive integer; n = 0 is the null readout",
            ));
        }
        Ok(Self {
            tau,
            delta_a,
            mode_index,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn delta_a(&self) -> f64 {
        self.delta_a
    }
    pub fn mode_index(&self) -> u32 {
        self.mode_index
    }

    pub fn with_delta_a(&self, delta_a: f64) -> Result<Self> {
        Self::new(self.tau, delta_a, self.mode_index)
    }

    pub fn is_measuring(&self) -> bool {
        self.delta_a.is_finite()
    }

    /// `Ω_n = n π / τ`.
    pub fn mode_frequency(&self) -> f64 {
        f64::from(self.mode_index) * PI / self.tau
    }

    /// Strength `ħ / (τ Δa²)` of the imaginary potential (energy per length²).
    /// Exactly zero when the measurement is off.
    pub fn coupling(&self, hbar: f64) -> f64 {
        if self.is_measuring() {
            hbar / (self.tau * self.delta_a * self.delta_a)
        } else {
            0.0
        }
    }
}

/// `a(t) = ε sin(Ω_n t)`, `0 ≤ t ≤ τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutWaveform {
    epsilon: f64,
    setup: MeasurementSetup,
}

pub fn make_readout(epsilon: f64, setup: &MeasurementSetup) -> ReadoutWaveform {
    ReadoutWaveform {
        epsilon,
        setup: *setup,
    }
}

impl ReadoutWaveform {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn setup(&self) -> &MeasurementSetup {
        &self.setup
    }

    /// Phase `Ω_n t / π`, so that the endpoints land on exact integers.
    fn half_turns(&self, t: f64) -> f64 {
        f64::from(self.setup.mode_index) * (t / self.setup.tau)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.epsilon * sin_pi(self.half_turns(t))
    }

    pub fn velocity_at(&self, t: f64) -> f64 {
        self.epsilon * self.setup.mode_frequency() * cos_pi(self.half_turns(t))
    }

    pub fn acceleration_at(&self, t: f64) -> f64 {
        let w = self.setup.mode_frequency();
        -self.epsilon * w * w * sin_pi(self.half_turns(t))
    }
}

/// `sin(π x)` with exact zeros at integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    (PI * r).sin()
}

/// `cos(π x)` with exact ±1 at integers.
pub(crate) fn cos_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 {
        return 1.0;
    }
    if r == 1.0 {
        return -1.0;
    }
    (PI * r).cos()
}

/// `V_eff = m ω² x²/2 + β x⁴/4 − i ħ/(τ Δa²) (x − a(t))²`.
pub fn effective_potential(
    x: f64,
    t: f64,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    readout: &ReadoutWaveform,
) -> Complex64 {
    let re = system.real_potential(x);
    let k = setup.coupling(system.hbar());
    if k == 0.0 {
        return Complex64::new(re, 0.0);
    }
    let d = x - readout.value_at(t);
    Complex64::new(re, -k * d * d)
}

/// Uniform grid on `[x_min, x_max]`; symmetric grids place `x = 0` exactly at
/// the centre sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    num_points: usize,
    dx: f64,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, num_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < 0.0 && x_max > 0.0) {
            return Err(Error::invalid(
                "grid",
                format!("need x_min < 0 < x_max, got [{x_min}, {x_max}]"),
            ));
        }
        if num_points < 3 || num_points.is_multiple_of(2) {
            return Err(Error::invalid(
                "num_points",
                format!("must be odd and >= 3, got {num_points}"),
            ));
        }
        let dx = (x_max - x_min) / (num_points - 1) as f64;
        let centre = -x_min / dx;
        if (centre - centre.round()).abs() > 0.5 {
            return Err(Error::invalid("grid", "x = 0 is not within half a spacing"));
        }
        Ok(Self {
            x_min,
            x_max,
            num_points,
            dx,
        })
    }

    pub fn symmetric(half_width: f64, num_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, num_points)
    }

    /// Symmetric grid with exactly the spacing `dx`, wide enough to cover
    /// `[-min_half_width, min_half_width]`.
    pub fn with_spacing(dx: f64, min_half_width: f64) -> Result<Self> {
        positive_finite("dx", dx)?;
        positive_finite("half_width", min_half_width)?;
        let half = (min_half_width / dx).ceil().max(1.0) as usize;
        let num_points = 2 * half + 1;
        let half_width = half as f64 * dx;
        Ok(Self {
            x_min: -half_width,
            x_max: half_width,
            num_points,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn num_points(&self) -> usize {
        self.num_points
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn is_symmetric(&self) -> bool {
        self.x_min == -self.x_max
    }

    pub fn x(&self, j: usize) -> f64 {
        if self.is_symmetric() {
            let c = (self.num_points - 1) / 2;
            (j as f64 - c as f64) * self.dx
        } else {
            self.x_min + j as f64 * self.dx
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.num_points).map(|j| self.x(j)).collect()
    }

    /// Trapezoid weight of sample `j`.
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.num_points {
            0.5 * self.dx
        } else {
            self.dx
        }
    }
}

/// Complex samples on a grid. The physical amplitude is
/// `exp(log_scale) * values`; the scale keeps strongly decayed states
/// representable.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: SpatialGrid,
    values: Vec<Complex64>,
    log_scale: f64,
}

impl WaveFunction {
    pub fn new(grid: SpatialGrid, mut values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(Error::GridMismatch);
        }
        let n = values.len();
        values[0] = Complex64::new(0.0, 0.0);
        values[n - 1] = Complex64::new(0.0, 0.0);
        Ok(Self {
            grid,
            values,
            log_scale: 0.0,
        })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.num_points()).map(|j| f(grid.x(j))).collect();
        Self::new(grid, values).expect("length matches grid")
    }

    pub(crate) fn from_parts(grid: SpatialGrid, values: Vec<Complex64>, log_scale: f64) -> Self {
        debug_assert_eq!(values.len(), grid.num_points());
        Self {
            grid,
            values,
            log_scale,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Samples without the scale factor.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Physical sample `j` (may underflow to zero for strongly decayed states).
    pub fn value(&self, j: usize) -> Complex64 {
        self.values[j] * self.log_scale.exp()
    }

    /// Trapezoid `Σ |v_j|² dx` of the stored samples, scale excluded.
    pub fn raw_norm_sq(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| self.grid.weight(j) * v.norm_sqr())
            .sum()
    }

    pub fn log_norm_sq(&self) -> f64 {
        self.raw_norm_sq().ln() + 2.0 * self.log_scale
    }

    /// Physical squared norm (trapezoid).
    pub fn norm_sq(&self) -> f64 {
        self.log_norm_sq().exp()
    }

    /// Moves the magnitude into `log_scale` so that the stored samples have
    /// unit norm. The physical state is unchanged.
    pub fn rescale(&mut self) {
        let n2 = self.raw_norm_sq();
        if n2 > 0.0 && n2.is_finite() {
            let inv = n2.sqrt().recip();
            for v in &mut self.values {
                *v *= inv;
            }
            self.log_scale += 0.5 * n2.ln();
        }
    }

    /// Spatial reflection `x → −x` (symmetric grids only).
    pub fn reflected(&self) -> Self {
        assert!(self.grid.is_symmetric(), "reflection needs a symmetric grid");
        let mut values = self.values.clone();
        values.reverse();
        Self::from_parts(self.grid, values, self.log_scale)
    }
}

/// Harmonic ground state `(mω/πħ)^{1/4} exp(−mω x²/2ħ)` on `grid`.
pub fn ground_state(grid: &SpatialGrid, system: &PhysicalSystem) -> Result<WaveFunction> {
    let alpha = system.mass() * system.omega() / system.hbar();
    let edge = grid.x_min().abs().max(grid.x_max());
    let ratio = (-0.5 * alpha * edge * edge).exp();
    if ratio > GROUND_STATE_EDGE_LIMIT {
        return Err(Error::GridTooNarrow {
            ratio,
            limit: GROUND_STATE_EDGE_LIMIT,
        });
    }
    let norm = (alpha / PI).powf(0.25);
    Ok(WaveFunction::from_fn(*grid, |x| {
        Complex64::new(norm * (-0.5 * alpha * x * x).exp(), 0.0)
    }))
}

fn positive_finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
    }
}
