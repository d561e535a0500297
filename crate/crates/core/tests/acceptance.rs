//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use qmon::analytic::{effective_width_linear, quantum_limit};
use qmon::evolver::{evolve, step, EvolutionConfig, Frame};
use qmon::model::{ground_state, make_readout, MeasurementSetup, PhysicalSystem, SpatialGrid, WaveFunction};
use qmon::oracle::{expm_evolve_in, off_corridor_fraction, path_sum_kernel, PathLattice};
use qmon::sweep::{scan_delta_a, Numerics, ScanRow};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// `count` log-spaced values on `[lo, hi]`, endpoints exact.
fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let mut v: Vec<f64> = (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect();
    v[0] = lo;
    v[count - 1] = hi;
    v
}

fn setup(da: f64, n: u32) -> MeasurementSetup {
    MeasurementSetup::new(PI, da, n).unwrap()
}

/// Width per row, `None` for a failed row.
fn widths(rows: &[ScanRow]) -> Vec<Option<f64>> {
    rows.iter()
        .map(|r| r.result.as_ref().ok().map(|s| s.width_equivalent))
        .collect()
}

fn scan(system: &PhysicalSystem, n: u32, das: &[f64], numerics: &Numerics) -> Vec<ScanRow> {
    let t = Instant::now();
    let rows = scan_delta_a(das, system, &setup(das[0], n), numerics).unwrap();
    for r in &rows {
        if let Err(e) = &r.result {
            println!("    row delta_a={:.4e} n={n} failed: {e}", r.delta_a);
        }
    }
    println!(
        "    scan n={n} beta={:.1e} refine={} rows={} in {:.0} s",
        system.beta(),
        numerics.refine,
        das.len(),
        t.elapsed().as_secs_f64()
    );
    rows
}

/// Largest `|width / linear − 1|` over rows; failed rows count as infinite.
fn worst_linear_error(rows: &[ScanRow], n: u32) -> f64 {
    let sys = PhysicalSystem::natural();
    rows.iter()
        .zip(widths(rows))
        .map(|(r, w)| match w {
            Some(w) => {
                let lin = effective_width_linear(&sys, &setup(r.delta_a, n)).unwrap();
                (w / lin - 1.0).abs()
            }
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

fn l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn physical(psi: &WaveFunction) -> Vec<Complex64> {
    (0..psi.values().len()).map(|j| psi.value(j)).collect()
}

/// Relative residual after the best complex rescaling of `b` onto `a`.
fn residual_up_to_scale(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ab: Complex64 = b.iter().zip(a).map(|(x, y)| x.conj() * y).sum();
    let bb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    let c = ab / bb;
    let scaled: Vec<Complex64> = b.iter().map(|x| x * c).collect();
    l2(a, &scaled) / a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn in_order_band(p: f64) -> bool {
    (1.8..=2.2).contains(&p)
}

/// Linear scans shared between criteria, computed on first use.
struct LinearScans {
    das: Vec<f64>,
    default: OnceLock<Vec<(u32, Vec<ScanRow>)>>,
    refined: OnceLock<Vec<(u32, Vec<ScanRow>)>>,
    deep: OnceLock<Vec<ScanRow>>,
}

impl LinearScans {
    fn new() -> Self {
        Self {
            das: log_space(1e-2, 1e2, 15),
            default: OnceLock::new(),
            refined: OnceLock::new(),
            deep: OnceLock::new(),
        }
    }

    fn default(&self) -> &[(u32, Vec<ScanRow>)] {
        self.default.get_or_init(|| {
            let sys = PhysicalSystem::natural();
            [1, 2].iter().map(|&n| (n, scan(&sys, n, &self.das, &Numerics::default()))).collect()
        })
    }

    fn refined(&self) -> &[(u32, Vec<ScanRow>)] {
        self.refined.get_or_init(|| {
            let sys = PhysicalSystem::natural();
            let numerics = Numerics {
                epsilon_points: 33,
                ..Numerics::default().with_refine(4.0)
            };
            [1, 2].iter().map(|&n| (n, scan(&sys, n, &self.das, &numerics))).collect()
        })
    }

    /// Resonant rows on `[1e-3, 1e-2]`.
    fn deep(&self) -> &[ScanRow] {
        self.deep.get_or_init(|| {
            let numerics = Numerics {
                epsilon_points: 33,
                ..Numerics::default()
            };
            scan(&PhysicalSystem::natural(), 1, &log_space(1e-3, 1e-2, 3), &numerics)
        })
    }
}

fn criterion_1(s: &LinearScans) -> Outcome {
    let d: f64 = s.default().iter().map(|(n, r)| worst_linear_error(r, *n)).fold(0.0, f64::max);
    let r: f64 = s.refined().iter().map(|(n, r)| worst_linear_error(r, *n)).fold(0.0, f64::max);
    outcome(
        d <= 5e-3 && r <= 1e-3,
        format!("max rel. error default {d:.2e} (<= 5e-3), refined x4 {r:.2e} (<= 1e-3)"),
    )
}

fn criterion_2(s: &LinearScans) -> Outcome {
    let sys = PhysicalSystem::natural();
    let da = 100.0;
    let mut worst: f64 = 0.0;
    let mut cases = Vec::new();
    for (n, rows) in s.default() {
        let last = rows.last().unwrap();
        assert_eq!(last.delta_a, da);
        let w = widths(std::slice::from_ref(last))[0].unwrap_or(f64::INFINITY);
        worst = worst.max((w / da - 1.0).abs());
        cases.push(format!("n={n}"));
    }
    for n in [3u32, 4] {
        let rows = scan(&sys, n, &[da], &Numerics::default());
        let w = widths(&rows)[0].unwrap_or(f64::INFINITY);
        worst = worst.max((w / da - 1.0).abs());
        cases.push(format!("n={n}"));
    }
    outcome(
        worst < 1e-2,
        format!("max |width/delta_a - 1| = {worst:.2e} at delta_a = 100 ({})", cases.join(", ")),
    )
}

fn criterion_3(s: &LinearScans) -> Outcome {
    let sys = PhysicalSystem::natural();
    let rows: Vec<(f64, Option<f64>)> = s
        .deep()
        .iter()
        .zip(widths(s.deep()))
        .map(|(r, w)| (r.delta_a, w))
        .collect();
    if rows.iter().any(|(_, w)| w.is_none()) {
        return outcome(false, "a row in [1e-3, 1e-2] failed");
    }
    let xs: Vec<f64> = rows.iter().map(|(d, _)| d.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, w)| w.unwrap().ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let dev = rows
        .iter()
        .map(|&(d, w)| (w.unwrap() / quantum_limit(&sys, &setup(d, 1)) - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        (slope + 0.5).abs() <= 0.05 && dev <= 0.02,
        format!("slope {slope:.4} (-0.5 +- 0.05), max deviation from quantum limit {dev:.2e} (<= 2e-2) over {} rows", rows.len()),
    )
}

fn resonant_widths(s: &LinearScans) -> Vec<Option<f64>> {
    let mut all = Vec::new();
    for (n, rows) in s.default().iter().chain(s.refined()) {
        if *n == 1 {
            all.extend(widths(rows));
        }
    }
    all.extend(widths(s.deep()));
    all
}

fn criterion_4(s: &LinearScans) -> Outcome {
    let ws = resonant_widths(s);
    if ws.iter().any(|w| w.is_none()) {
        return outcome(false, "a resonant row failed");
    }
    let min = ws.iter().map(|w| w.unwrap()).fold(f64::INFINITY, f64::min);
    let floor = 1.0 - 1e-3;
    outcome(min >= floor, format!("min width {min:.6} over {} resonant rows (>= {floor})", ws.len()))
}

fn criterion_5(s: &LinearScans) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    let all = s
        .default()
        .iter()
        .chain(s.refined())
        .flat_map(|(_, r)| r.iter())
        .chain(s.deep());
    for row in all {
        count += 1;
        let ratio = match &row.result {
            Ok(r) => r.width_equivalent / row.delta_a,
            Err(_) => f64::NEG_INFINITY,
        };
        worst = worst.min(ratio);
    }
    outcome(
        worst >= 1.0 - 5e-3,
        format!("min width/delta_a {worst:.6} over {count} rows (>= 0.995)"),
    )
}

/// Largest `w / w_ref − 1` over paired rows and the `Δa` where it occurs;
/// a failed row counts as infinite.
fn max_excess(rows: &[ScanRow], reference: &[Option<f64>]) -> (f64, f64) {
    rows.iter()
        .zip(widths(rows))
        .zip(reference)
        .map(|((r, w), l)| match (w, l) {
            (Some(w), Some(l)) => (w / l - 1.0, r.delta_a),
            _ => (f64::INFINITY, r.delta_a),
        })
        .fold((f64::NEG_INFINITY, f64::NAN), |a, b| if b.0 > a.0 { b } else { a })
}

fn criterion_6(s: &LinearScans) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let small: Vec<f64> = s.das.iter().copied().filter(|&d| d <= 1.0 + 1e-12).collect();
    for (n, linear_rows) in s.default() {
        let lin = widths(linear_rows);
        for bt in [0.1, 1.0] {
            let sys = PhysicalSystem::with_beta_tilde(1.0, 1.0, 1.0, bt).unwrap();
            let rows = scan(&sys, *n, &small, &Numerics::default());
            let (excess, at) = max_excess(&rows, &lin);
            ok &= excess <= 0.0;
            notes.push(format!("n={n} beta~={bt}: max w/w0-1 {excess:+.2e} at delta_a={at:.3e}"));
        }
        let sys = PhysicalSystem::with_beta_tilde(1.0, 1.0, 1.0, 1e-4).unwrap();
        let rows = scan(&sys, *n, &s.das, &Numerics::default());
        let err = widths(&rows)
            .iter()
            .zip(&lin)
            .map(|(w, l)| match (w, l) {
                (Some(w), Some(l)) => (w / l - 1.0).abs(),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max);
        ok &= err <= 5e-3;
        notes.push(format!("n={n} beta~=1e-4: max |w/w0-1| {err:.2e}"));
    }
    outcome(ok, notes.join("; "))
}

fn criterion_7() -> Outcome {
    let sys = PhysicalSystem::natural();
    let quartic = PhysicalSystem::with_beta_tilde(1.0, 1.0, 1.0, 0.5).unwrap();
    let mut notes = Vec::new();
    let mut ok = true;

    // (a) real potentials keep the norm step by step
    let free = MeasurementSetup::new(2.0, f64::INFINITY, 1).unwrap();
    let grid = SpatialGrid::symmetric(8.0, 321).unwrap();
    let mut worst_a: f64 = 0.0;
    for system in [&sys, &quartic] {
        let r = make_readout(1.0, &free);
        let cfg = EvolutionConfig::new(200, system, &free).unwrap();
        let mut psi = WaveFunction::from_fn(grid, |x| {
            Complex64::from_polar((-(x - 1.0).powi(2)).exp(), 0.7 * x)
        });
        for k in 0..cfg.num_steps() {
            let next = step(&psi, cfg.time(k), system, &free, &r, &cfg).unwrap();
            worst_a = worst_a.max((next.norm_sq() / psi.norm_sq() - 1.0).abs());
            psi = next;
        }
    }
    ok &= worst_a <= 1e-10;
    notes.push(format!("(a) max per-step norm change {worst_a:.1e}"));

    // (b) finite delta_a: the norm decreases at every step
    let meas = MeasurementSetup::new(2.0, 0.8, 1).unwrap();
    let r = make_readout(0.6, &meas);
    let cfg = EvolutionConfig::new(200, &sys, &meas).unwrap();
    let mut psi = ground_state(&grid, &sys).unwrap();
    let mut monotone = true;
    for k in 0..cfg.num_steps() {
        let next = step(&psi, cfg.time(k), &sys, &meas, &r, &cfg).unwrap();
        monotone &= next.norm_sq() < psi.norm_sq();
        psi = next;
    }
    ok &= monotone;
    notes.push(format!("(b) monotone decay {monotone}"));

    // (c) convergence orders against 4x refined references
    let meas = MeasurementSetup::new(1.0, 0.7, 1).unwrap();
    let r = make_readout(0.5, &meas);
    let half = 8.0;
    let run = |points: usize, steps: usize| {
        let g = SpatialGrid::symmetric(half, points).unwrap();
        let phi = ground_state(&g, &sys).unwrap();
        let cfg = EvolutionConfig::new(steps, &sys, &meas).unwrap();
        physical(&evolve(&phi, &sys, &meas, &r, &cfg).unwrap())
    };
    let g_pts = 321;
    let t: Vec<_> = [40, 80, 160, 320].iter().map(|&nt| run(g_pts, nt)).collect();
    let order_t = (l2(&t[0], &t[2]) / l2(&t[1], &t[3])).log2();
    let sub = |v: &[Complex64], stride: usize| -> Vec<Complex64> { v.iter().step_by(stride).copied().collect() };
    let x: Vec<_> = [81usize, 161, 321, 641].iter().map(|&np| run(np, 400)).collect();
    let e1 = l2(&x[0], &sub(&x[2], 4));
    let e2 = l2(&sub(&x[1], 2), &sub(&x[3], 8));
    let order_x = (e1 / e2).log2();
    ok &= in_order_band(order_t) && in_order_band(order_x);
    notes.push(format!("(c) orders dt {order_t:.3}, dx {order_x:.3}"));

    // (d) Cayley against exact exponentials of the same lattice operator
    let meas = MeasurementSetup::new(PI, 0.6, 1).unwrap();
    let r = make_readout(0.8, &meas);
    let g = SpatialGrid::symmetric(8.0, 129).unwrap();
    let phi = ground_state(&g, &sys).unwrap();
    for frame in [Frame::Lab, Frame::Following { gain: 1.0 }] {
        let errs: Vec<f64> = [80usize, 160, 320]
            .iter()
            .map(|&nt| {
                let cfg = EvolutionConfig::new(nt, &sys, &meas).unwrap().with_frame(frame);
                let a = physical(&evolve(&phi, &sys, &meas, &r, &cfg).unwrap());
                let b = physical(&expm_evolve_in(&phi, &sys, &meas, &r, nt, frame).unwrap());
                l2(&a, &b) / b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
            })
            .collect();
        let p1 = (errs[0] / errs[1]).log2();
        let p2 = (errs[1] / errs[2]).log2();
        ok &= in_order_band(p1) && in_order_band(p2);
        let name = match frame {
            Frame::Lab => "lab",
            Frame::Following { .. } => "following",
        };
        notes.push(format!("(d) {name} orders {p1:.3}, {p2:.3}"));
    }
    outcome(ok, notes.join("; "))
}

fn criterion_8() -> Outcome {
    let sys = PhysicalSystem::natural();
    let meas = MeasurementSetup::new(0.2, 0.4, 1).unwrap();
    let r = make_readout(0.2, &meas);
    let sigma: f64 = 0.4;
    let mut errs = Vec::new();
    for (nt, nx) in [(2usize, 11usize), (3, 15), (4, 21)] {
        let g = SpatialGrid::symmetric(1.0, nx).unwrap();
        let lat = PathLattice::new(g, nt).unwrap();
        let start = WaveFunction::from_fn(g, |x| Complex64::new((-x * x / (2.0 * sigma * sigma)).exp(), 0.0));
        let cfg = EvolutionConfig::with_limit(nt, &sys, &meas, 1.0)
            .unwrap()
            .with_frame(Frame::Lab)
            .with_leak_tolerance(1.0);
        let cn = physical(&evolve(&start, &sys, &meas, &r, &cfg).unwrap());
        let path: Vec<Complex64> = (0..nx)
            .map(|e| {
                if e == 0 || e == nx - 1 {
                    return Complex64::new(0.0, 0.0);
                }
                (0..nx)
                    .map(|s| path_sum_kernel(s, e, &sys, &meas, &r, &lat).unwrap() * start.value(s) * g.dx())
                    .sum()
            })
            .collect();
        errs.push(residual_up_to_scale(&cn, &path));
    }
    let shrinking = errs.windows(2).all(|w| w[1] < w[0]);

    let g = SpatialGrid::symmetric(1.0, 15).unwrap();
    let lat = PathLattice::new(g, 3).unwrap();
    let mut fractions = Vec::new();
    for da in [1.0, 0.5, 0.25] {
        let s = MeasurementSetup::new(0.5, da, 1).unwrap();
        let a = make_readout(0.3, &s);
        fractions.push(off_corridor_fraction(7, 7, &sys, &s, &a, &lat, 0.3).unwrap());
    }
    let concentrating = fractions.windows(2).all(|w| w[1] < w[0]);
    outcome(
        shrinking && concentrating,
        format!(
            "discrepancy {:?} under (Nt, Nx) = (2, 11), (3, 15), (4, 21); off-corridor fraction {:?} for delta_a = 1, 0.5, 0.25",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            fractions.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn criterion_9() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_qmon");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "[measurement]\ntau = 3.141592653589793\nmode_index = 1\n\
         delta_a = { from = 0.1, to = 1000.0, count = 5 }\n\
         [output]\nprofiles = [0, 4]\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .args(["run", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--plots"])
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(false, format!("run exited with {}", status.status));
        }
        outputs.push(out);
    }
    let files = ["scan.csv", "profile-0.csv", "profile-4.csv", "analytic.csv", "scan.svg"];
    let identical = files
        .iter()
        .all(|f| read(&outputs[0].join(f)) == read(&outputs[1].join(f)));

    let analytic = Command::new(bin)
        .args(["analytic", config.to_str().unwrap()])
        .output()
        .unwrap();
    let analytic = String::from_utf8(analytic.stdout).unwrap();
    let scan = read(&outputs[0].join("scan.csv"));
    let mut consistent = analytic.lines().count() == scan.lines().count();
    let mut worst: f64 = 0.0;
    for (a, s) in analytic.lines().zip(scan.lines()).skip(1) {
        let a: Vec<&str> = a.split(',').collect();
        let s: Vec<&str> = s.split(',').collect();
        // delta_a, analytic_linear, classical_limit, quantum_limit
        consistent &= a[0] == s[0] && a[1] == s[3] && a[2] == s[4] && a[3] == s[5];
        consistent &= s[8] == "ok";
        let sim: f64 = s[1].parse().unwrap();
        let lin: f64 = a[1].parse().unwrap();
        let gap = (sim / lin - 1.0).abs();
        worst = worst.max(if gap.is_nan() { f64::INFINITY } else { gap });
    }
    consistent &= worst <= 5e-3;
    outcome(
        identical && consistent,
        format!("byte-identical outputs {identical}; analytic columns match, max rel. gap to simulation {worst:.2e}"),
    )
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let started = Instant::now();
    // optional criterion numbers on the command line select a subset
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let scans = LinearScans::new();
    let criteria: [(&str, Criterion<'_>); 9] = [
        ("analytic agreement", Box::new(|| criterion_1(&scans))),
        ("classical limit", Box::new(|| criterion_2(&scans))),
        ("quantum scaling law", Box::new(|| criterion_3(&scans))),
        ("resonance floor", Box::new(|| criterion_4(&scans))),
        ("interpolation bound", Box::new(|| criterion_5(&scans))),
        ("nonlinear effect", Box::new(|| criterion_6(&scans))),
        ("evolver certification", Box::new(criterion_7)),
        ("path-integral equivalence", Box::new(criterion_8)),
        ("reporting determinism", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    let mut lines = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        let line = format!("criterion {} {verdict}: {name}: {}", i + 1, o.detail);
        println!("{line}  [{:.0} s]", t.elapsed().as_secs_f64());
        lines.push(line);
    }
    println!();
    for l in &lines {
        println!("{l}");
    }
    println!("acceptance finished in {:.0} s", started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
