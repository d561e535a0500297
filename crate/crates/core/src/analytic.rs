//! Closed-form results for the continuously monitored linear oscillator.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{MeasurementSetup, PhysicalSystem};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `ω_r² = ω² − 2iħ/(mτΔa²)` and its principal root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexFrequency {
    pub omega_r_squared: Complex64,
    pub omega_r: Complex64,
}

pub fn renormalized_frequency(system: &PhysicalSystem, setup: &MeasurementSetup) -> ComplexFrequency {
    let w = system.omega();
    let k = setup.coupling(system.hbar()) / system.mass();
    let omega_r_squared = Complex64::new(w * w, -2.0 * k);
    let omega_r = if k == 0.0 {
        Complex64::new(w, 0.0)
    } else {
        omega_r_squared.sqrt()
    };
    ComplexFrequency {
        omega_r_squared,
        omega_r,
    }
}

/// `cot z + s csc z` for `s = ±1`, evaluated through `e^{∓iz}` so that large
/// `|Im z|` cannot overflow.
fn cot_plus_csc(z: Complex64, s: f64) -> Complex64 {
    if z.im <= 0.0 {
        let e = (-I * z).exp();
        I * (1.0 + s * e) / (1.0 - s * e)
    } else {
        let e = (I * z).exp();
        -I * (1.0 + s * e) / (1.0 - s * e)
    }
}

/// `Δa_eff⁻²` of the Gaussian output distribution.
pub fn inverse_variance_linear(system: &PhysicalSystem, setup: &MeasurementSetup) -> f64 {
    if !setup.is_measuring() {
        return 0.0;
    }
    let (m, w, hbar) = (system.mass(), system.omega(), system.hbar());
    let tau = setup.tau();
    let da2 = setup.delta_a() * setup.delta_a();
    let om = setup.mode_frequency();
    let fr = renormalized_frequency(system, setup);
    let detuning = om * om - fr.omega_r_squared;
    let sign = if setup.mode_index().is_multiple_of(2) { 1.0 } else { -1.0 };

    let first = (1.0 - 2.0 * I * hbar / (m * tau * da2 * detuning)) / (2.0 * da2);
    let trig = cot_plus_csc(fr.omega_r * tau, sign);
    let second = 4.0 * hbar * om * om / (m * w * tau * tau * da2 * da2 * detuning * detuning)
        / (1.0 - I * fr.omega_r / w * trig);
    2.0 * (first - second).re
}

/// Width of the output distribution for the linear oscillator.
pub fn effective_width_linear(system: &PhysicalSystem, setup: &MeasurementSetup) -> Result<f64> {
    if !setup.is_measuring() {
        return Ok(f64::INFINITY);
    }
    let v = inverse_variance_linear(system, setup);
    if !(v > 0.0) {
        return Err(Error::NonPositiveVariance { value: v });
    }
    Ok(v.powf(-0.5))
}

/// Small-`Δa` asymptote.
pub fn quantum_limit(system: &PhysicalSystem, setup: &MeasurementSetup) -> f64 {
    let (m, w, hbar) = (system.mass(), system.omega(), system.hbar());
    let tau = setup.tau();
    let da = setup.delta_a();
    let om2 = setup.mode_frequency().powi(2);
    let a = (m / hbar).powf(1.5) * tau.sqrt() * om2 * da;
    let b = (m * tau / (2.0 * hbar)).powi(2) * (om2 - w * w).powi(2) * da * da;
    (a + b).powf(-0.5)
}

/// Large-`Δa` asymptote: the instrumental error itself.
pub fn classical_limit(setup: &MeasurementSetup) -> f64 {
    setup.delta_a()
}

/// Instrumental error at which the classical and quantum asymptotes meet.
pub fn crossover(system: &PhysicalSystem, setup: &MeasurementSetup) -> Result<f64> {
    // Δa² / Δa_q² is increasing in Δa; bisect it against 1 in log space.
    let excess = |ln_da: f64| -> Result<f64> {
        let s = setup.with_delta_a(ln_da.exp())?;
        let q = quantum_limit(system, &s);
        Ok((s.delta_a() / q).ln())
    };
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    if excess(lo)? > 0.0 || excess(hi)? < 0.0 {
        return Err(Error::invalid("delta_a", "no crossover in [e^-60, e^60]"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Normalised Gaussian output density of width [`effective_width_linear`].
pub fn gaussian_profile_linear(
    epsilon: f64,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
) -> Result<f64> {
    let w = effective_width_linear(system, setup)?;
    Ok((-(epsilon / w).powi(2)).exp() / (PI.sqrt() * w))
}

/// Steady-state drift of the measured packet centre per unit readout
/// amplitude: the centre follows `ε (in_phase · sin Ω t + quadrature · cos Ω t)`
/// once transients have died out. Transients relax at `−Im ω_r`, so the
/// result describes the motion within `[0, τ]` only when that rate times `τ`
/// is large.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutResponse {
    pub in_phase: f64,
    pub quadrature: f64,
}

impl ReadoutResponse {
    /// Peak drift per unit readout amplitude of a frame with `gain` relative
    /// to the packet centre.
    pub fn residual(&self, gain: f64) -> f64 {
        (self.in_phase - gain).hypot(self.quadrature)
    }
}

pub fn readout_response(system: &PhysicalSystem, setup: &MeasurementSetup) -> ReadoutResponse {
    let k = setup.coupling(system.hbar()) / system.mass();
    if k == 0.0 {
        return ReadoutResponse {
            in_phase: 0.0,
            quadrature: 0.0,
        };
    }
    let wr = renormalized_frequency(system, setup).omega_r;
    let om = setup.mode_frequency();
    let minus = (wr - om).inv();
    let plus = (wr + om).inv();
    ReadoutResponse {
        in_phase: k * (minus.im + plus.im) / wr.re,
        quadrature: k * (minus.re - plus.re) / wr.re,
    }
}

/// Length scale of the measured steady-state packet, `sqrt(ħ / m Re ω_r)`.
pub fn packet_scale(system: &PhysicalSystem, setup: &MeasurementSetup) -> f64 {
    let wr = renormalized_frequency(system, setup).omega_r;
    (system.hbar() / (system.mass() * wr.re)).sqrt()
}

/// Amplitude decay rate `−Im ω_r / 2` of the measured ground mode.
pub fn decay_rate(system: &PhysicalSystem, setup: &MeasurementSetup) -> f64 {
    -0.5 * renormalized_frequency(system, setup).omega_r.im
}
