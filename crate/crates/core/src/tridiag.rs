//! Forward elimination / back substitution for complex tridiagonal systems
//! with constant off-diagonals.

use num_complex::Complex64;

/// Reusable scratch for [`solve_constant_offdiag`].
#[derive(Debug, Default, Clone)]
pub struct ThomasScratch {
    gamma: Vec<Complex64>,
}

/// Solves `lower·x[i-1] + diag[i]·x[i] + upper·x[i+1] = rhs[i]` in place
/// (`rhs` becomes `x`). No pivoting: the systems built by the evolver are
/// diagonally dominant in modulus.
///
/// Elimination runs from both ends towards the middle row, so the two
/// recurrences are independent and overlap in the pipeline.
pub fn solve_constant_offdiag(
    diag: &[Complex64],
    lower: Complex64,
    upper: Complex64,
    rhs: &mut [Complex64],
    scratch: &mut ThomasScratch,
) {
    let n = diag.len();
    assert_eq!(rhs.len(), n, "rhs length must match diagonal");
    if n < 4 {
        return solve_one_way(diag, lower, upper, rhs, scratch);
    }
    scratch.gamma.resize(n, Complex64::new(0.0, 0.0));
    let g = &mut scratch.gamma[..];
    let mid = (n - 1) / 2;
    let last = n - 1;

    // rows above mid: x[i] = rhs[i] - g[i]·x[i+1]
    // rows below mid: x[i] = rhs[i] - g[i]·x[i-1]
    let inv = recip(diag[0]);
    g[0] = upper * inv;
    rhs[0] *= inv;
    let inv = recip(diag[last]);
    g[last] = lower * inv;
    rhs[last] *= inv;
    for k in 1..mid {
        let i = k;
        let j = last - k;
        let inv_i = recip(diag[i] - lower * g[i - 1]);
        let inv_j = recip(diag[j] - upper * g[j + 1]);
        g[i] = upper * inv_i;
        g[j] = lower * inv_j;
        rhs[i] = (rhs[i] - lower * rhs[i - 1]) * inv_i;
        rhs[j] = (rhs[j] - upper * rhs[j + 1]) * inv_j;
    }
    if last - mid > mid {
        // even n: one extra row below
        let j = mid + 1;
        let inv = recip(diag[j] - upper * g[j + 1]);
        g[j] = lower * inv;
        rhs[j] = (rhs[j] - upper * rhs[j + 1]) * inv;
    }
    let den = diag[mid] - lower * g[mid - 1] - upper * g[mid + 1];
    rhs[mid] = (rhs[mid] - lower * rhs[mid - 1] - upper * rhs[mid + 1]) * recip(den);

    for k in 1..=mid {
        let i = mid - k;
        let j = mid + k;
        let up = rhs[i + 1];
        let down = rhs[j - 1];
        rhs[i] -= g[i] * up;
        rhs[j] -= g[j] * down;
    }
    if last - mid > mid {
        rhs[last] -= g[last] * rhs[last - 1];
    }
}

fn solve_one_way(
    diag: &[Complex64],
    lower: Complex64,
    upper: Complex64,
    rhs: &mut [Complex64],
    scratch: &mut ThomasScratch,
) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    scratch.gamma.resize(n, Complex64::new(0.0, 0.0));
    let gamma = &mut scratch.gamma;

    let mut inv = recip(diag[0]);
    gamma[0] = upper * inv;
    rhs[0] *= inv;
    for i in 1..n {
        inv = recip(diag[i] - lower * gamma[i - 1]);
        gamma[i] = upper * inv;
        rhs[i] = (rhs[i] - lower * rhs[i - 1]) * inv;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= gamma[i] * next;
    }
}

#[inline(always)]
fn recip(z: Complex64) -> Complex64 {
    let s = 1.0 / z.norm_sqr();
    Complex64::new(z.re * s, -z.im * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn apply(diag: &[Complex64], lower: Complex64, upper: Complex64, x: &[Complex64]) -> Vec<Complex64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower * x[i - 1];
                }
                if i + 1 < n {
                    s += upper * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn identity_system() {
        let diag = vec![Complex64::new(1.0, 0.0); 5];
        let mut rhs: Vec<_> = (0..5).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let expect = rhs.clone();
        let zero = Complex64::new(0.0, 0.0);
        solve_constant_offdiag(&diag, zero, zero, &mut rhs, &mut ThomasScratch::default());
        assert_eq!(rhs, expect);
    }

    proptest! {
        #[test]
        fn residual_is_small(
            n in 1usize..60,
            seed in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 60),
            lo in (-0.4f64..0.4, -0.4f64..0.4),
            up in (-0.4f64..0.4, -0.4f64..0.4),
        ) {
            let lower = Complex64::new(lo.0, lo.1);
            let upper = Complex64::new(up.0, up.1);
            let diag: Vec<_> = seed[..n].iter().map(|&(a, b, _)| Complex64::new(1.0 + a.abs(), b)).collect();
            let x: Vec<_> = seed[..n].iter().map(|&(a, _, c)| Complex64::new(c, a)).collect();
            let mut rhs = apply(&diag, lower, upper, &x);
            solve_constant_offdiag(&diag, lower, upper, &mut rhs, &mut ThomasScratch::default());
            for (got, want) in rhs.iter().zip(&x) {
                prop_assert!((got - want).norm() < 1e-12);
            }
        }
    }
}
