//! Cayley (Crank–Nicolson) integration of `iħ ∂ψ/∂t = H_eff ψ` with the
//! complex measurement potential, and the transition amplitude
//! `I = ⟨φ₂|ψ(τ)⟩`.
//!
//! The grid may be attached to a frame `x = y + x_f(t)` with
//! `x_f(t) = g·a(t)`. The state is then carried as
//! `ψ(x, t) = exp(i m ẋ_f (x − x_f)/ħ + iθ(t)) χ(x − x_f, t)` and `χ` obeys
//! the same equation with potential `V_eff(y + x_f, t) + m ẍ_f y`, where
//! `ħθ' = m ẋ_f²/2`. Because `a(0) = a(τ) = 0` the frame coincides with the
//! laboratory at both ends, so only the boost phases are applied there.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    effective_potential, MeasurementSetup, PhysicalSystem, ReadoutWaveform, SpatialGrid,
    WaveFunction,
};
use crate::tridiag::{solve_constant_offdiag, ThomasScratch};

/// Default ceiling on `ω·dt`.
pub const MAX_OMEGA_DT: f64 = 0.05;
/// Relative norm growth tolerated in a single step.
pub const GROWTH_TOLERANCE: f64 = 1e-9;
/// Fraction of the norm allowed in the outer 5% of the grid.
pub const LEAK_TOLERANCE: f64 = 1e-8;
/// Squared sample magnitude, relative to the squared norm, below which tail
/// samples are set to zero.
const FLUSH_BELOW: f64 = 1e-240;
/// Fraction of the half-width (at each end) watched for boundary leaks.
pub const LEAK_BAND: f64 = 0.05;

/// Coordinate frame of the evolution grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    Lab,
    /// Origin rides at `gain · a(t)` with the matching Galilean boost.
    Following { gain: f64 },
}

impl Frame {
    pub fn gain(&self) -> f64 {
        match *self {
            Frame::Lab => 0.0,
            Frame::Following { gain } => gain,
        }
    }

    pub fn offset(&self, readout: &ReadoutWaveform, t: f64) -> f64 {
        self.gain() * readout.value_at(t)
    }

    pub fn velocity(&self, readout: &ReadoutWaveform, t: f64) -> f64 {
        self.gain() * readout.velocity_at(t)
    }

    pub fn acceleration(&self, readout: &ReadoutWaveform, t: f64) -> f64 {
        self.gain() * readout.acceleration_at(t)
    }

    /// `θ(τ) = (m/2ħ) ∫₀^τ ẋ_f² dt`, exact over whole half-periods.
    fn accumulated_phase(&self, system: &PhysicalSystem, readout: &ReadoutWaveform) -> f64 {
        let setup = readout.setup();
        let v = self.gain() * readout.epsilon() * setup.mode_frequency();
        system.mass() * v * v * setup.tau() / (4.0 * system.hbar())
    }
}

/// Time discretisation of one evolution over `[0, τ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    num_steps: usize,
    tau: f64,
    frame: Frame,
    leak_tolerance: f64,
}

impl EvolutionConfig {
    pub fn new(num_steps: usize, system: &PhysicalSystem, setup: &MeasurementSetup) -> Result<Self> {
        Self::with_limit(num_steps, system, setup, MAX_OMEGA_DT)
    }

    /// As [`EvolutionConfig::new`] with a custom ceiling on `ω·dt`.
    pub fn with_limit(
        num_steps: usize,
        system: &PhysicalSystem,
        setup: &MeasurementSetup,
        max_omega_dt: f64,
    ) -> Result<Self> {
        if num_steps == 0 {
            return Err(Error::invalid("num_steps", "must be >= 1"));
        }
        let dt = setup.tau() / num_steps as f64;
        if dt * system.omega() > max_omega_dt {
            return Err(Error::invalid(
                "num_steps",
                format!(
                    "omega*dt = {:.4} exceeds {max_omega_dt}",
                    dt * system.omega()
                ),
            ));
        }
        Ok(Self {
            num_steps,
            tau: setup.tau(),
            frame: Frame::Lab,
            leak_tolerance: LEAK_TOLERANCE,
        })
    }

    /// Smallest step count with `ω·dt ≤ omega_dt`.
    pub fn from_omega_dt(
        omega_dt: f64,
        system: &PhysicalSystem,
        setup: &MeasurementSetup,
    ) -> Result<Self> {
        if !(omega_dt > 0.0 && omega_dt.is_finite()) {
            return Err(Error::invalid("omega_dt", format!("must be > 0, got {omega_dt}")));
        }
        let n = (setup.tau() * system.omega() / omega_dt).ceil().max(1.0) as usize;
        Self::with_limit(n, system, setup, omega_dt.max(MAX_OMEGA_DT))
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_leak_tolerance(mut self, tol: f64) -> Self {
        self.leak_tolerance = tol;
        self
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }
    pub fn dt(&self) -> f64 {
        self.tau / self.num_steps as f64
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn frame(&self) -> Frame {
        self.frame
    }
    pub fn leak_tolerance(&self) -> f64 {
        self.leak_tolerance
    }

    /// Start time of step `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.tau * (k as f64 / self.num_steps as f64)
    }
}

/// Transition amplitude `mantissa · exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitude {
    mantissa: Complex64,
    log_scale: f64,
}

impl Amplitude {
    pub fn new(mantissa: Complex64, log_scale: f64) -> Self {
        Self {
            mantissa,
            log_scale,
        }
    }

    /// The complex amplitude; underflows to zero below ~1e-308.
    pub fn value(&self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn ln_modulus(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    pub fn modulus(&self) -> f64 {
        self.ln_modulus().exp()
    }

    pub fn phase(&self) -> f64 {
        self.mantissa.arg()
    }
}

/// Per-evolution monitoring data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveStats {
    pub leak_max: f64,
    pub log_norm_sq: f64,
}

/// Time stepper bound to one readout and one grid.
pub struct Propagator<'a> {
    system: &'a PhysicalSystem,
    setup: &'a MeasurementSetup,
    readout: &'a ReadoutWaveform,
    config: EvolutionConfig,
    grid: SpatialGrid,
    y: Vec<f64>,
    diag: Vec<Complex64>,
    rhs: Vec<Complex64>,
    scratch: ThomasScratch,
    flush_level: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(
        system: &'a PhysicalSystem,
        setup: &'a MeasurementSetup,
        readout: &'a ReadoutWaveform,
        config: EvolutionConfig,
        grid: SpatialGrid,
    ) -> Self {
        let n = grid.num_points();
        Self {
            system,
            setup,
            readout,
            config,
            grid,
            y: grid.points(),
            diag: vec![Complex64::default(); n.saturating_sub(2)],
            rhs: vec![Complex64::default(); n.saturating_sub(2)],
            scratch: ThomasScratch::default(),
            flush_level: 0.0,
        }
    }

    /// Potential felt by the frame-coordinate state at grid point `j`.
    pub fn frame_potential(&self, j: usize, t: f64) -> Complex64 {
        let frame = self.config.frame;
        let y = self.y[j];
        let x = y + frame.offset(self.readout, t);
        effective_potential(x, t, self.system, self.setup, self.readout)
            + self.inertial_force(t) * y
    }

    /// `m ẍ_f`.
    fn inertial_force(&self, t: f64) -> f64 {
        self.system.mass() * self.config.frame.acceleration(self.readout, t)
    }

    /// Kinetic stencil: `(diagonal, off-diagonal)` of `−ħ²/2m ∂²`.
    pub fn kinetic_stencil(&self) -> (f64, f64) {
        let h2m = self.system.hbar() * self.system.hbar() / self.system.mass();
        let dx2 = self.grid.dx() * self.grid.dx();
        (h2m / dx2, -0.5 * h2m / dx2)
    }

    /// One Cayley step from `t` to `t + dt` with the potential sampled at
    /// `t + dt/2`. Endpoint samples stay zero.
    pub fn step_values(&mut self, values: &mut [Complex64], t: f64) {
        let n = self.grid.num_points();
        debug_assert_eq!(values.len(), n);
        if n < 3 {
            return;
        }
        let dt = self.config.dt();
        let tm = t + 0.5 * dt;
        let h = 0.5 * dt / self.system.hbar();
        let (d_kin, off_kin) = self.kinetic_stencil();

        let shift = self.config.frame.offset(self.readout, tm);
        let inertial = self.inertial_force(tm);
        let a = self.readout.value_at(tm);
        let k = self.setup.coupling(self.system.hbar());
        let off = Complex64::new(0.0, h * off_kin);

        // (1 + i h H) ψ' = (1 − i h H) ψ
        let rows = self.diag.iter_mut().zip(self.rhs.iter_mut());
        for ((j, (diag, rhs)), &y) in rows.enumerate().map(|(i, r)| (i + 1, r)).zip(&self.y[1..n - 1]) {
            let x = y + shift;
            let d = x - a;
            let re = d_kin + self.system.real_potential(x) + inertial * y;
            let im = -k * d * d;
            *diag = Complex64::new(1.0 - h * im, h * re);
            let centre = values[j];
            let sides = values[j - 1] + values[j + 1];
            *rhs = Complex64::new(1.0 + h * im, -h * re) * centre - off * sides;
        }
        solve_constant_offdiag(&self.diag, off, off, &mut self.rhs, &mut self.scratch);
        let level = self.flush_level;
        for (v, &r) in values[1..n - 1].iter_mut().zip(&self.rhs) {
            // far tails would otherwise sink into the subnormal range
            *v = if r.re.abs().max(r.im.abs()) < level {
                Complex64::default()
            } else {
                r
            };
        }
        values[0] = Complex64::default();
        values[n - 1] = Complex64::default();
    }

    fn boost(&self, values: &mut [Complex64], velocity: f64, phase: f64) {
        if velocity == 0.0 && phase == 0.0 {
            return;
        }
        let k = self.system.mass() * velocity / self.system.hbar();
        for (v, &y) in values.iter_mut().zip(&self.y) {
            *v *= Complex64::from_polar(1.0, k * y + phase);
        }
    }

    /// Full evolution from `t = 0` to `t = τ`.
    pub fn evolve(&mut self, phi1: &WaveFunction) -> Result<(WaveFunction, EvolveStats)> {
        if phi1.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let frame = self.config.frame;
        let mut psi = phi1.clone();
        let v0 = frame.velocity(self.readout, 0.0);
        self.boost(psi.values_mut(), -v0, 0.0);
        psi.rescale();

        let n = self.grid.num_points();
        let band = ((n - 1) / 2) as f64 * LEAK_BAND;
        let band = (band.ceil().max(1.0) as usize).min(n / 2);
        let dx = self.grid.dx();
        let mut leak_max: f64 = 0.0;
        let mut values = psi.values().to_vec();
        let mut log_scale = psi.log_scale();
        let mut prev = psi.raw_norm_sq();

        for k in 0..self.config.num_steps {
            let t = self.config.time(k);
            self.flush_level = (FLUSH_BELOW * prev / dx).sqrt();
            self.step_values(&mut values, t);
            // endpoints are zero, so the trapezoid sum is a plain sum
            let outer = dx * (sum_sq(&values[..band]) + sum_sq(&values[n - band..]));
            let total = outer + dx * sum_sq(&values[band..n - band]);
            if total > prev * (1.0 + GROWTH_TOLERANCE) {
                return Err(Error::NumericalInstability {
                    step: k,
                    growth: total / prev - 1.0,
                });
            }
            if !(total > 0.0) {
                // state annihilated to the last bit; nothing left to track
                break;
            }
            let leak = outer / total;
            leak_max = leak_max.max(leak);
            if leak > self.config.leak_tolerance {
                return Err(Error::BoundaryLeak {
                    step: k,
                    fraction: leak,
                    limit: self.config.leak_tolerance,
                });
            }
            let inv = total.sqrt().recip();
            for v in &mut values {
                *v *= inv;
            }
            log_scale += 0.5 * total.ln();
            prev = 1.0;
        }
        self.flush_level = 0.0;

        let tau = self.config.tau();
        let theta = frame.accumulated_phase(self.system, self.readout);
        self.boost(&mut values, frame.velocity(self.readout, tau), theta);
        let out = WaveFunction::from_parts(self.grid, values, log_scale);
        let stats = EvolveStats {
            leak_max,
            log_norm_sq: out.log_norm_sq(),
        };
        Ok((out, stats))
    }
}

fn sum_sq(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm_sqr()).sum()
}

/// One Cayley step of `psi` starting at time `t`.
pub fn step(
    psi: &WaveFunction,
    t: f64,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    readout: &ReadoutWaveform,
    config: &EvolutionConfig,
) -> Result<WaveFunction> {
    if t + config.dt() > setup.tau() + 1e-12 {
        return Err(Error::invalid(
            "t",
            format!("step from {t} overruns tau = {}", setup.tau()),
        ));
    }
    let mut prop = Propagator::new(system, setup, readout, *config, *psi.grid());
    let mut values = psi.values().to_vec();
    let before = psi.raw_norm_sq();
    prop.step_values(&mut values, t);
    let out = WaveFunction::from_parts(*psi.grid(), values, psi.log_scale());
    let after = out.raw_norm_sq();
    if after > before * (1.0 + GROWTH_TOLERANCE) {
        return Err(Error::NumericalInstability {
            step: 0,
            growth: after / before - 1.0,
        });
    }
    Ok(out)
}

/// `ψ(τ)` for initial state `phi1` under the readout.
pub fn evolve(
    phi1: &WaveFunction,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    readout: &ReadoutWaveform,
    config: &EvolutionConfig,
) -> Result<WaveFunction> {
    evolve_with_stats(phi1, system, setup, readout, config).map(|(psi, _)| psi)
}

pub fn evolve_with_stats(
    phi1: &WaveFunction,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    readout: &ReadoutWaveform,
    config: &EvolutionConfig,
) -> Result<(WaveFunction, EvolveStats)> {
    Propagator::new(system, setup, readout, *config, *phi1.grid()).evolve(phi1)
}

/// Trapezoid inner product `Σ' conj(φ₂) ψ dx`.
pub fn overlap(phi2: &WaveFunction, psi: &WaveFunction) -> Result<Amplitude> {
    if phi2.grid() != psi.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = psi.grid();
    let sum: Complex64 = phi2
        .values()
        .iter()
        .zip(psi.values())
        .enumerate()
        .map(|(j, (a, b))| a.conj() * b * grid.weight(j))
        .sum();
    Ok(Amplitude::new(sum, phi2.log_scale() + psi.log_scale()))
}
