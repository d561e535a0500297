//! Exact Gaussian propagation for the measured linear oscillator.
//!
//! With `β = 0` the state stays of the form `exp(−A x² + B x + C)` and the
//! effective Schrödinger equation reduces to
//!
//! ```text
//! A' = −2iħA²/m + i m ω²/(2ħ) + κ/ħ
//! B' = −2iħAB/m + 2κ a(t)/ħ
//! C' = (iħ/2m)(B² − 2A) − κ a(t)²/ħ
//! ```
//!
//! with `κ = ħ/(τ Δa²)`, integrated here by classical RK4.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::evolver::Frame;
use crate::model::{MeasurementSetup, PhysicalSystem, ReadoutWaveform};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coefficients of `ψ = exp(−A x² + B x + C)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl GaussianState {
    /// Harmonic ground state.
    pub fn ground(system: &PhysicalSystem) -> Self {
        let alpha = system.mass() * system.omega() / system.hbar();
        Self {
            a: Complex64::new(0.5 * alpha, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.25 * (alpha / PI).ln(), 0.0),
        }
    }

    /// Centre of `|ψ|²`.
    pub fn centre(&self) -> f64 {
        self.b.re / (2.0 * self.a.re)
    }

    /// Phase gradient at the centre.
    pub fn wavenumber(&self) -> f64 {
        self.b.im - 2.0 * self.a.im * self.centre()
    }

    fn axpy(&self, h: f64, d: &Self) -> Self {
        Self {
            a: self.a + d.a * h,
            b: self.b + d.b * h,
            c: self.c + d.c * h,
        }
    }
}

struct Rhs {
    m: f64,
    hbar: f64,
    w2: f64,
    k: f64,
}

impl Rhs {
    fn eval(&self, s: &GaussianState, a: f64) -> GaussianState {
        let (m, hbar, k) = (self.m, self.hbar, self.k);
        GaussianState {
            a: -2.0 * I * hbar * s.a * s.a / m + I * m * self.w2 / (2.0 * hbar) + k / hbar,
            b: -2.0 * I * hbar * s.a * s.b / m + 2.0 * k * a / hbar,
            c: I * hbar / (2.0 * m) * (s.b * s.b - 2.0 * s.a) - k * a * a / hbar,
        }
    }
}

/// Step count that keeps RK4 well inside its stability region.
pub fn default_steps(system: &PhysicalSystem, setup: &MeasurementSetup) -> usize {
    let wr = crate::analytic::renormalized_frequency(system, setup).omega_r;
    let rate = wr.norm().max(setup.mode_frequency()).max(system.omega());
    ((setup.tau() * rate * 40.0).ceil() as usize).max(2000)
}

/// Integrates from the ground state over `[0, τ]`, calling `observe(t, state)`
/// at every step boundary including both ends.
pub fn propagate_with(
    system: &PhysicalSystem,
    readout: &ReadoutWaveform,
    steps: usize,
    mut observe: impl FnMut(f64, &GaussianState),
) -> GaussianState {
    let setup = readout.setup();
    let rhs = Rhs {
        m: system.mass(),
        hbar: system.hbar(),
        w2: system.omega() * system.omega(),
        k: setup.coupling(system.hbar()),
    };
    let steps = steps.max(1);
    let h = setup.tau() / steps as f64;
    let mut s = GaussianState::ground(system);
    observe(0.0, &s);
    for i in 0..steps {
        let t = setup.tau() * (i as f64 / steps as f64);
        let a0 = readout.value_at(t);
        let am = readout.value_at(t + 0.5 * h);
        let a1 = readout.value_at(t + h);
        let k1 = rhs.eval(&s, a0);
        let k2 = rhs.eval(&s.axpy(0.5 * h, &k1), am);
        let k3 = rhs.eval(&s.axpy(0.5 * h, &k2), am);
        let k4 = rhs.eval(&s.axpy(h, &k3), a1);
        s = GaussianState {
            a: s.a + (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a) * (h / 6.0),
            b: s.b + (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b) * (h / 6.0),
            c: s.c + (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c) * (h / 6.0),
        };
        observe(t + h, &s);
    }
    s
}

pub fn propagate(system: &PhysicalSystem, readout: &ReadoutWaveform, steps: usize) -> GaussianState {
    propagate_with(system, readout, steps, |_, _| {})
}

/// `ln ⟨φ₀|ψ(τ)⟩` for the ground state `φ₀`.
pub fn ln_amplitude(system: &PhysicalSystem, readout: &ReadoutWaveform, steps: usize) -> Complex64 {
    let end = propagate(system, readout, steps);
    let g = GaussianState::ground(system);
    let s = g.a + end.a;
    g.c + end.c + 0.5 * (PI / s).ln() + end.b * end.b / (4.0 * s)
}

/// Deviation of the packet centre and phase gradient from the position and
/// boost of `frame`, per unit readout amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEnvelope {
    /// Largest position offset.
    pub position: f64,
    /// Largest wavenumber offset.
    pub wavenumber: f64,
    /// Root-mean-square wavenumber offset over `[0, τ]`.
    pub wavenumber_rms: f64,
}

pub fn drift_envelope(
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    frame: &Frame,
    steps: usize,
) -> DriftEnvelope {
    let readout = crate::model::make_readout(1.0, setup);
    let km = system.mass() / system.hbar();
    let mut env = DriftEnvelope {
        position: 0.0,
        wavenumber: 0.0,
        wavenumber_rms: 0.0,
    };
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    propagate_with(system, &readout, steps, |t, s| {
        let dx = s.centre() - frame.offset(&readout, t);
        let dk = s.wavenumber() - km * frame.velocity(&readout, t);
        env.position = env.position.max(dx.abs());
        env.wavenumber = env.wavenumber.max(dk.abs());
        sum_sq += dk * dk;
        count += 1;
    });
    env.wavenumber_rms = (sum_sq / count as f64).sqrt();
    env
}
