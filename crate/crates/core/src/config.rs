//! Run configuration: a TOML document with `[system]`, `[measurement]`,
//! `[numerics]` and `[output]` tables plus a top-level `parallelism`.
//!
//! ```toml
//! parallelism = 1
//!
//! [system]
//! mass = 1.0
//! omega = 1.0
//! hbar = 1.0
//! beta_tilde = 0.0      # or `beta`
//!
//! [measurement]
//! tau = 3.141592653589793
//! mode_index = 1
//! delta_a = { from = 1e-2, to = 1e2, points_per_decade = 11 }
//!
//! [numerics]
//! omega_dt = 0.01
//!
//! [output]
//! directory = "out"
//! plots = true
//! ```
//!
//! `delta_a` is either an explicit list or a log range given by
//! `points_per_decade` (counting both ends of a decade) or a total `count`.

use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{MeasurementSetup, PhysicalSystem};
use crate::sweep::{FrameMode, Numerics};

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    parallelism: Option<usize>,
    #[serde(default)]
    system: RawSystem,
    measurement: RawMeasurement,
    #[serde(default)]
    numerics: RawNumerics,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    mass: Option<f64>,
    omega: Option<f64>,
    hbar: Option<f64>,
    beta: Option<f64>,
    beta_tilde: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMeasurement {
    tau: Option<f64>,
    mode_index: Option<i64>,
    delta_a: Option<RawDeltaA>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawDeltaA {
    List(Vec<f64>),
    Range(RawRange),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    from: f64,
    to: f64,
    points_per_decade: Option<f64>,
    count: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    omega_dt: Option<f64>,
    points_per_length: Option<f64>,
    max_k_dx: Option<f64>,
    max_wr_dt: Option<f64>,
    refine: Option<f64>,
    stiffness_budget: Option<f64>,
    dx: Option<f64>,
    half_width: Option<f64>,
    num_steps: Option<usize>,
    frame: Option<String>,
    epsilon_points: Option<usize>,
    epsilon_half_width: Option<f64>,
    tail_ratio: Option<f64>,
    leak_tolerance: Option<f64>,
    use_parity: Option<bool>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    plots: Option<bool>,
    profiles: Option<RawProfiles>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawProfiles {
    Keyword(String),
    Rows(Vec<usize>),
}

/// Which scan rows get a `profile-<i>.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProfileSelection {
    All,
    None,
    Rows(Vec<usize>),
}

impl ProfileSelection {
    pub fn includes(&self, row: usize) -> bool {
        match self {
            ProfileSelection::All => true,
            ProfileSelection::None => false,
            ProfileSelection::Rows(r) => r.contains(&row),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub directory: PathBuf,
    pub plots: bool,
    pub profiles: ProfileSelection,
}

/// Validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: PhysicalSystem,
    /// Setup for the first `Δa`; rows substitute their own value.
    pub setup: MeasurementSetup,
    /// Sorted, positive.
    pub delta_a: Vec<f64>,
    pub numerics: Numerics,
    pub output: OutputOptions,
    pub parallelism: usize,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        parse_config(&text)
    }

    /// `key = value` lines describing every resolved setting.
    pub fn echo(&self) -> Vec<(String, String)> {
        let s = &self.system;
        let n = &self.numerics;
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), fmt_num);
        vec![
            ("parallelism".into(), self.parallelism.to_string()),
            ("system.mass".into(), fmt_num(s.mass())),
            ("system.omega".into(), fmt_num(s.omega())),
            ("system.hbar".into(), fmt_num(s.hbar())),
            ("system.beta".into(), fmt_num(s.beta())),
            ("system.beta_tilde".into(), fmt_num(s.beta_tilde())),
            ("measurement.tau".into(), fmt_num(self.setup.tau())),
            ("measurement.mode_index".into(), self.setup.mode_index().to_string()),
            (
                "measurement.delta_a".into(),
                self.delta_a.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(" "),
            ),
            ("numerics.omega_dt".into(), fmt_num(n.omega_dt)),
            ("numerics.points_per_length".into(), fmt_num(n.points_per_length)),
            ("numerics.max_k_dx".into(), fmt_num(n.max_k_dx)),
            ("numerics.max_wr_dt".into(), fmt_num(n.max_wr_dt)),
            ("numerics.refine".into(), fmt_num(n.refine)),
            ("numerics.stiffness_budget".into(), fmt_num(n.stiffness_budget)),
            ("numerics.dx".into(), opt(n.dx)),
            ("numerics.half_width".into(), opt(n.half_width)),
            (
                "numerics.num_steps".into(),
                n.num_steps.map_or("auto".to_string(), |v| v.to_string()),
            ),
            (
                "numerics.frame".into(),
                match n.frame {
                    FrameMode::Auto => "auto",
                    FrameMode::Lab => "lab",
                }
                .into(),
            ),
            ("numerics.epsilon_points".into(), n.epsilon_points.to_string()),
            ("numerics.epsilon_half_width".into(), opt(n.epsilon_half_width)),
            ("numerics.tail_ratio".into(), fmt_num(n.tail_ratio)),
            ("numerics.leak_tolerance".into(), fmt_num(n.leak_tolerance)),
            ("numerics.use_parity".into(), n.use_parity.to_string()),
            ("output.plots".into(), self.output.plots.to_string()),
            (
                "output.profiles".into(),
                match &self.output.profiles {
                    ProfileSelection::All => "all".to_string(),
                    ProfileSelection::None => "none".to_string(),
                    ProfileSelection::Rows(r) => r
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                },
            ),
        ]
    }
}

/// Shortest round-trip representation.
fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    resolve(raw)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn resolve(raw: RawConfig) -> Result<RunConfig> {
    let s = raw.system;
    let mass = s.mass.unwrap_or(1.0);
    let omega = s.omega.unwrap_or(1.0);
    let hbar = s.hbar.unwrap_or(1.0);
    let system = match (s.beta, s.beta_tilde) {
        (Some(_), Some(_)) => {
            return Err(Error::invalid("beta", "give either beta or beta_tilde, not both"))
        }
        (_, Some(bt)) => PhysicalSystem::with_beta_tilde(mass, omega, hbar, bt)?,
        (b, None) => PhysicalSystem::new(mass, omega, b.unwrap_or(0.0), hbar)?,
    };

    let m = raw.measurement;
    let tau = m.tau.ok_or_else(|| Error::invalid("tau", "is required"))?;
    let mode = m.mode_index.unwrap_or(1);
    if mode < 1 || mode > u32::MAX as i64 {
        return Err(Error::invalid("mode_index", format!("must be a positive integer, got {mode}")));
    }
    let delta_a = match m.delta_a {
        None => return Err(Error::invalid("delta_a", "is required")),
        Some(RawDeltaA::List(v)) => v,
        Some(RawDeltaA::Range(r)) => expand_range(&r)?,
    };
    if delta_a.is_empty() {
        return Err(Error::invalid("delta_a", "list is empty"));
    }
    if let Some(bad) = delta_a.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::invalid("delta_a", format!("values must be positive, got {bad}")));
    }
    if delta_a.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("delta_a", "values must be strictly ascending"));
    }
    let setup = MeasurementSetup::new(tau, delta_a[0], mode as u32)?;

    let numerics = resolve_numerics(raw.numerics)?;

    let o = raw.output;
    let profiles = match o.profiles {
        None => ProfileSelection::All,
        Some(RawProfiles::Keyword(k)) => match k.as_str() {
            "all" => ProfileSelection::All,
            "none" => ProfileSelection::None,
            _ => {
                return Err(Error::invalid(
                    "profiles",
                    format!("expected \"all\", \"none\" or a list of rows, got {k:?}"),
                ))
            }
        },
        Some(RawProfiles::Rows(r)) => {
            if let Some(bad) = r.iter().find(|&&i| i >= delta_a.len()) {
                return Err(Error::invalid(
                    "profiles",
                    format!("row {bad} out of range (0..{})", delta_a.len()),
                ));
            }
            ProfileSelection::Rows(r)
        }
    };
    let output = OutputOptions {
        directory: o.directory.unwrap_or_else(|| PathBuf::from("out")),
        plots: o.plots.unwrap_or(false),
        profiles,
    };

    let parallelism = raw.parallelism.unwrap_or(1);
    if parallelism == 0 {
        return Err(Error::invalid("parallelism", "must be at least 1"));
    }
    Ok(RunConfig {
        system,
        setup,
        delta_a,
        numerics,
        output,
        parallelism,
    })
}

fn resolve_numerics(r: RawNumerics) -> Result<Numerics> {
    let d = Numerics::default();
    let frame = match r.frame.as_deref() {
        None | Some("auto") => FrameMode::Auto,
        Some("lab") => FrameMode::Lab,
        Some(other) => {
            return Err(Error::invalid(
                "frame",
                format!("expected \"auto\" or \"lab\", got {other:?}"),
            ))
        }
    };
    let n = Numerics {
        omega_dt: r.omega_dt.unwrap_or(d.omega_dt),
        points_per_length: r.points_per_length.unwrap_or(d.points_per_length),
        max_k_dx: r.max_k_dx.unwrap_or(d.max_k_dx),
        max_wr_dt: r.max_wr_dt.unwrap_or(d.max_wr_dt),
        refine: r.refine.unwrap_or(d.refine),
        stiffness_budget: r.stiffness_budget.unwrap_or(d.stiffness_budget),
        dx: r.dx,
        half_width: r.half_width,
        num_steps: r.num_steps,
        frame,
        epsilon_points: r.epsilon_points.unwrap_or(d.epsilon_points),
        epsilon_half_width: r.epsilon_half_width,
        tail_ratio: r.tail_ratio.unwrap_or(d.tail_ratio),
        leak_tolerance: r.leak_tolerance.unwrap_or(d.leak_tolerance),
        use_parity: r.use_parity.unwrap_or(d.use_parity),
    };
    n.validate()?;
    Ok(n)
}

/// Log-spaced values from `from` to `to` inclusive.
fn expand_range(r: &RawRange) -> Result<Vec<f64>> {
    if !(r.from > 0.0 && r.from.is_finite()) {
        return Err(Error::invalid("delta_a", format!("range start must be positive, got {}", r.from)));
    }
    if !(r.to > r.from && r.to.is_finite()) {
        return Err(Error::invalid("delta_a", format!("range end must exceed start, got {}", r.to)));
    }
    let (lo, hi) = (r.from.log10(), r.to.log10());
    let intervals = match (r.points_per_decade, r.count) {
        (Some(_), Some(_)) => {
            return Err(Error::invalid("delta_a", "give points_per_decade or count, not both"))
        }
        (None, None) => {
            return Err(Error::invalid("delta_a", "range needs points_per_decade or count"))
        }
        (Some(p), None) => {
            if !(p >= 2.0 && p.is_finite()) {
                return Err(Error::invalid("delta_a", format!("points_per_decade must be >= 2, got {p}")));
            }
            (((hi - lo) * (p - 1.0)).round() as usize).max(1)
        }
        (None, Some(c)) => {
            if c < 2 {
                return Err(Error::invalid("delta_a", format!("count must be >= 2, got {c}")));
            }
            c - 1
        }
    };
    let mut v: Vec<f64> = (0..=intervals)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / intervals as f64))
        .collect();
    v[0] = r.from;
    v[intervals] = r.to;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[measurement]\ntau = 3.0\ndelta_a = [0.5, 1.0]\n";

    #[test]
    fn empty_numerics_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.numerics, Numerics::default());
        assert_eq!(c.numerics.epsilon_points, 129);
        assert_eq!(c.numerics.omega_dt, 0.01);
        assert_eq!(c.system, PhysicalSystem::natural());
        assert_eq!(c.parallelism, 1);
        assert_eq!(c.output.profiles, ProfileSelection::All);
        assert_eq!(c.delta_a, vec![0.5, 1.0]);
    }

    #[test]
    fn log_range_per_decade() {
        let text = "[measurement]\ntau = 1.0\ndelta_a = { from = 1e-3, to = 1e2, points_per_decade = 11 }\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.delta_a.len(), 51);
        assert_eq!(c.delta_a[0], 1e-3);
        assert_eq!(c.delta_a[50], 1e2);
        assert!((c.delta_a[10] / 1e-2 - 1.0).abs() < 1e-12);
        assert!(c.delta_a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn log_range_count() {
        let text = "[measurement]\ntau = 1.0\n[measurement.delta_a]\nfrom = 0.01\nto = 100.0\ncount = 15\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.delta_a.len(), 15);
        assert!((c.delta_a[7] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_mass_names_field() {
        let text = format!("[system]\nmass = -1.0\n{MINIMAL}");
        match parse_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "mass"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_has_position() {
        let text = "[measurement]\ntau = 1.0\ndelta_a = [1.0\n";
        match parse_config(text) {
            Err(Error::Parse { line, .. }) => assert!(line >= 3, "line {line}"),
            other => panic!("{other:?}"),
        }
        match parse_config("[system]\nmas = 1.0\n") {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!((line, column), (2, 1));
                assert!(message.contains("mas"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invariants_checked() {
        let bad = [
            ("[measurement]\ntau = 1.0\ndelta_a = [1.0, 0.5]\n", "delta_a"),
            ("[measurement]\ntau = 1.0\ndelta_a = [-1.0]\n", "delta_a"),
            ("[measurement]\ntau = 0.0\ndelta_a = [1.0]\n", "tau"),
            ("[measurement]\ntau = 1.0\nmode_index = 0\ndelta_a = [1.0]\n", "mode_index"),
            ("parallelism = 0\n[measurement]\ntau = 1.0\ndelta_a = [1.0]\n", "parallelism"),
            ("[measurement]\ntau = 1.0\ndelta_a = [1.0]\n[numerics]\nepsilon_points = 10\n", "epsilon_points"),
            ("[measurement]\ntau = 1.0\ndelta_a = [1.0]\n[numerics]\nframe = \"x\"\n", "frame"),
            ("[system]\nbeta = 1.0\nbeta_tilde = 1.0\n[measurement]\ntau = 1.0\ndelta_a = [1.0]\n", "beta"),
        ];
        for (text, want) in bad {
            match parse_config(text) {
                Err(Error::Validation { field, .. }) => assert_eq!(field, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn beta_tilde_converts() {
        let text = "[system]\nmass = 2.0\nomega = 0.5\nbeta_tilde = 1.0\n[measurement]\ntau = 1.0\ndelta_a = [1.0]\n";
        let c = parse_config(text).unwrap();
        // β = β̃ m² ω³ / ħ
        assert!((c.system.beta() - 4.0 * 0.125).abs() < 1e-15);
    }

    #[test]
    fn echo_is_stable() {
        let c = parse_config(MINIMAL).unwrap();
        let e = c.echo();
        assert!(e.iter().any(|(k, v)| k == "measurement.delta_a" && v == "5e-1 1e0"));
        assert_eq!(e, parse_config(MINIMAL).unwrap().echo());
    }
}
