//! Slow reference propagators for checking the evolver.
//!
//! [`expm_evolve`] applies `exp(−i H dt/ħ)` with a dense matrix exponential
//! for each piecewise-constant (midpoint) Hamiltonian. [`path_sum_kernel`]
//! sums the restricted path integral over every path of a tiny space-time
//! lattice.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::evolver::Frame;
use crate::model::{
    effective_potential, MeasurementSetup, PhysicalSystem, ReadoutWaveform, SpatialGrid,
    WaveFunction,
};

/// Largest grid accepted by [`expm_evolve`].
pub const MAX_DENSE_POINTS: usize = 256;
/// Largest lattice accepted by [`path_sum_kernel`].
pub const MAX_PATH_SLICES: usize = 4;
pub const MAX_PATH_POINTS: usize = 21;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense `H_eff` on the interior points of a grid: three-point kinetic
/// stencil plus the sampled potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHamiltonian {
    pub matrix: DMatrix<Complex64>,
}

impl DenseHamiltonian {
    /// `potential(x)` is sampled at the interior points.
    pub fn build(
        grid: &SpatialGrid,
        system: &PhysicalSystem,
        potential: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let n = grid.num_points();
        if n > MAX_DENSE_POINTS {
            return Err(Error::SizeGuard {
                size: n,
                limit: MAX_DENSE_POINTS,
            });
        }
        let m = n - 2;
        let c = system.hbar() * system.hbar() / (2.0 * system.mass() * grid.dx() * grid.dx());
        let matrix = DMatrix::from_fn(m, m, |r, s| {
            if r == s {
                Complex64::new(2.0 * c, 0.0) + potential(grid.x(r + 1))
            } else if r.abs_diff(s) == 1 {
                Complex64::new(-c, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok(Self { matrix })
    }

    /// `exp(−i H dt/ħ)`.
    pub fn propagator(&self, dt: f64, hbar: f64) -> DMatrix<Complex64> {
        (&self.matrix * Complex64::new(0.0, -dt / hbar)).exp()
    }
}

/// Laboratory-frame evolution with `num_steps` exact exponentials of the
/// midpoint Hamiltonian.
pub fn expm_evolve(
    phi1: &WaveFunction,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    readout: &ReadoutWaveform,
    num_steps: usize,
) -> Result<WaveFunction> {
    expm_evolve_in(phi1, system, setup, readout, num_steps, Frame::Lab)
}

/// As [`expm_evolve`], with the grid carried by `frame`: the state is
/// boosted into the frame at `t = 0`, evolved under the frame Hamiltonian
/// (shifted potential plus inertial force) and boosted back at `t = τ`.
pub fn expm_evolve_in(
    phi1: &WaveFunction,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    readout: &ReadoutWaveform,
    num_steps: usize,
    frame: Frame,
) -> Result<WaveFunction> {
    let grid = *phi1.grid();
    let n = grid.num_points();
    if n > MAX_DENSE_POINTS {
        return Err(Error::SizeGuard {
            size: n,
            limit: MAX_DENSE_POINTS,
        });
    }
    if num_steps == 0 {
        return Err(Error::invalid("num_steps", "must be at least 1"));
    }
    let hbar = system.hbar();
    let m = system.mass();
    let tau = setup.tau();
    let dt = tau / num_steps as f64;

    let scale = phi1.log_scale().exp();
    let v0 = frame.velocity(readout, 0.0);
    let mut psi = nalgebra::DVector::from_fn(n - 2, |r, _| {
        let y = grid.x(r + 1);
        phi1.values()[r + 1] * scale * (-I * (m * v0 * y / hbar)).exp()
    });

    for k in 0..num_steps {
        let tm = (k as f64 + 0.5) * dt;
        let shift = frame.offset(readout, tm);
        let force = m * frame.acceleration(readout, tm);
        let h = DenseHamiltonian::build(&grid, system, |y| {
            effective_potential(y + shift, tm, system, setup, readout) + force * y
        })?;
        psi = h.propagator(dt, hbar) * psi;
    }

    let v1 = frame.velocity(readout, tau);
    let theta = boost_phase(system, readout, &frame);
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..n - 2 {
        let y = grid.x(r + 1);
        values[r + 1] = psi[r] * (I * (m * v1 * y / hbar + theta)).exp();
    }
    WaveFunction::new(grid, values)
}

/// `(1/ħ)∫ m ẋ_f²/2 dt` by composite Simpson quadrature.
fn boost_phase(system: &PhysicalSystem, readout: &ReadoutWaveform, frame: &Frame) -> f64 {
    let intervals = 4096;
    let tau = readout.setup().tau();
    let h = tau / intervals as f64;
    let f = |t: f64| {
        let v = frame.velocity(readout, t);
        0.5 * system.mass() * v * v / system.hbar()
    };
    let mut sum = f(0.0) + f(tau);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    sum * h / 3.0
}

/// Space-time lattice for the explicit path sum: `num_slices` time slices
/// over `[0, τ]` and the points of `grid`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLattice {
    grid: SpatialGrid,
    num_slices: usize,
}

impl PathLattice {
    pub fn new(grid: SpatialGrid, num_slices: usize) -> Result<Self> {
        if num_slices == 0 {
            return Err(Error::invalid("num_slices", "must be at least 1"));
        }
        if num_slices > MAX_PATH_SLICES {
            return Err(Error::SizeGuard {
                size: num_slices,
                limit: MAX_PATH_SLICES,
            });
        }
        if grid.num_points() > MAX_PATH_POINTS {
            return Err(Error::SizeGuard {
                size: grid.num_points(),
                limit: MAX_PATH_POINTS,
            });
        }
        Ok(Self { grid, num_slices })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }
}

struct Slices<'a> {
    system: &'a PhysicalSystem,
    setup: &'a MeasurementSetup,
    readout: &'a ReadoutWaveform,
    dt: f64,
    norm: Complex64,
}

impl Slices<'_> {
    fn new<'a>(
        system: &'a PhysicalSystem,
        setup: &'a MeasurementSetup,
        readout: &'a ReadoutWaveform,
        lattice: &PathLattice,
    ) -> Slices<'a> {
        let dt = setup.tau() / lattice.num_slices as f64;
        let norm = (Complex64::new(system.mass(), 0.0)
            / (2.0 * PI * I * system.hbar() * dt))
            .sqrt();
        Slices {
            system,
            setup,
            readout,
            dt,
            norm,
        }
    }

    /// Short-time factor for `x0 → x1` in slice `k`, with the potential and
    /// the measurement weight evaluated at the midpoint `x̄`.
    fn factor(&self, k: usize, x0: f64, x1: f64) -> Complex64 {
        let (m, hbar, dt) = (self.system.mass(), self.system.hbar(), self.dt);
        let tm = (k as f64 + 0.5) * dt;
        let xbar = 0.5 * (x0 + x1);
        let dx = x1 - x0;
        let action = m * dx * dx / (2.0 * dt) - self.system.real_potential(xbar) * dt;
        let d = xbar - self.readout.value_at(tm);
        let weight = if self.setup.is_measuring() {
            -dt * d * d / (self.setup.tau() * self.setup.delta_a().powi(2))
        } else {
            0.0
        };
        self.norm * Complex64::new(weight, action / hbar).exp()
    }
}

/// Visits every lattice path from `start` to `end` with its amplitude.
fn for_each_path(
    start: usize,
    end: usize,
    lattice: &PathLattice,
    slices: &Slices,
    mut visit: impl FnMut(&[usize], Complex64),
) -> Result<()> {
    let n = lattice.grid.num_points();
    if start >= n || end >= n {
        return Err(Error::invalid("index", format!("lattice has {n} points")));
    }
    let dx = lattice.grid.dx();
    let inner = lattice.num_slices - 1;
    let mut path = vec![start; lattice.num_slices + 1];
    path[lattice.num_slices] = end;
    let total = n.pow(inner as u32);
    for code in 0..total {
        let mut c = code;
        for p in path.iter_mut().skip(1).take(inner) {
            *p = c % n;
            c /= n;
        }
        let mut amp = Complex64::new(dx.powi(inner as i32), 0.0);
        for k in 0..lattice.num_slices {
            amp *= slices.factor(k, lattice.grid.x(path[k]), lattice.grid.x(path[k + 1]));
        }
        visit(&path, amp);
    }
    Ok(())
}

/// `K(x_end, τ; x_start, 0)` as the explicit sum over all lattice paths.
pub fn path_sum_kernel(
    start: usize,
    end: usize,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    readout: &ReadoutWaveform,
    lattice: &PathLattice,
) -> Result<Complex64> {
    let slices = Slices::new(system, setup, readout, lattice);
    let mut sum = Complex64::new(0.0, 0.0);
    for_each_path(start, end, lattice, &slices, |_, amp| sum += amp)?;
    Ok(sum)
}

/// Share of the total path weight `Σ|amplitude|` carried by paths whose
/// midpoints leave `|x̄ − a(t)| ≤ half_width` in some slice.
pub fn off_corridor_fraction(
    start: usize,
    end: usize,
    system: &PhysicalSystem,
    setup: &MeasurementSetup,
    readout: &ReadoutWaveform,
    lattice: &PathLattice,
    half_width: f64,
) -> Result<f64> {
    let slices = Slices::new(system, setup, readout, lattice);
    let grid = lattice.grid;
    let (mut off, mut total) = (0.0, 0.0);
    for_each_path(start, end, lattice, &slices, |path, amp| {
        let w = amp.norm();
        total += w;
        let outside = path.windows(2).enumerate().any(|(k, p)| {
            let tm = (k as f64 + 0.5) * slices.dt;
            let xbar = 0.5 * (grid.x(p[0]) + grid.x(p[1]));
            (xbar - readout.value_at(tm)).abs() > half_width
        });
        if outside {
            off += w;
        }
    })?;
    Ok(off / total)
}
