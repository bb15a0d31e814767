//! Small numerical utilities shared across modules: quadrature, interpolation,
//! dense solves, finite differences, and deterministic parallel reductions.

use crate::error::{NumericalError, Result};

/// Composite Simpson rule on a uniform grid. `f.len()` must be odd (an even
/// number of intervals); `h` is the grid spacing.
pub fn simpson_uniform(f: &[f64], h: f64) -> f64 {
    assert!(f.len() >= 3 && f.len() % 2 == 1, "need an even interval count");
    let mut s4 = 0.0;
    let mut s2 = 0.0;
    for (i, &v) in f.iter().enumerate().take(f.len() - 1).skip(1) {
        if i % 2 == 1 {
            s4 += v;
        } else {
            s2 += v;
        }
    }
    (f[0] + f[f.len() - 1] + 4.0 * s4 + 2.0 * s2) * h / 3.0
}

/// Cubic Hermite interpolation of a sampled function with known derivatives.
/// `x` must lie inside the uniform grid `[x0, x0 + (n-1)*dx]`.
pub fn hermite_uniform(x0: f64, dx: f64, u: &[f64], du: &[f64], x: f64) -> f64 {
    let n = u.len();
    debug_assert_eq!(n, du.len());
    let t = ((x - x0) / dx).clamp(0.0, (n - 1) as f64);
    let i = (t.floor() as usize).min(n - 2);
    let s = t - i as f64;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * u[i] + h10 * dx * du[i] + h01 * u[i + 1] + h11 * dx * du[i + 1]
}

/// Derivative of the cubic Hermite interpolant at `x`.
pub fn hermite_uniform_deriv(x0: f64, dx: f64, u: &[f64], du: &[f64], x: f64) -> f64 {
    let n = u.len();
    let t = ((x - x0) / dx).clamp(0.0, (n - 1) as f64);
    let i = (t.floor() as usize).min(n - 2);
    let s = t - i as f64;
    let s2 = s * s;
    let dh00 = (6.0 * s2 - 6.0 * s) / dx;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / dx;
    let dh11 = 3.0 * s2 - 2.0 * s;
    dh00 * u[i] + dh10 * du[i] + dh01 * u[i + 1] + dh11 * du[i + 1]
}

/// Solve a small dense system in place by LU with partial pivoting.
/// `a` is row-major `n x n`; `b` is overwritten with the solution.
pub fn solve_dense(a: &mut [f64], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-300 {
            return Err(NumericalError::SingularSystem(best).into());
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = b[row];
        for j in row + 1..n {
            s -= a[row * n + j] * b[j];
        }
        b[row] = s / a[row * n + row];
    }
    Ok(())
}

/// Five-point central difference for a scalar function of one coordinate.
pub fn central_diff_5<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Chunk size for deterministic parallel reductions. Partial sums are computed
/// per fixed-size chunk and combined in index order, so the result is
/// bit-identical for any thread count.
const REDUCE_CHUNK: usize = 8192;

/// Dot product with deterministic parallel reduction.
pub fn par_dot(a: &[f64], b: &[f64]) -> f64 {
    use rayon::prelude::*;
    debug_assert_eq!(a.len(), b.len());
    if a.len() < 4 * REDUCE_CHUNK {
        return dot(a, b);
    }
    let partials: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(ca, cb)| dot(ca, cb))
        .collect();
    partials.iter().sum()
}

/// `y += a·x` elementwise, parallel over chunks (no reduction, so trivially
/// deterministic).
pub fn par_axpy(a: f64, x: &[f64], y: &mut [f64]) {
    use rayon::prelude::*;
    debug_assert_eq!(x.len(), y.len());
    if x.len() < 4 * REDUCE_CHUNK {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
        return;
    }
    y.par_chunks_mut(REDUCE_CHUNK)
        .zip(x.par_chunks(REDUCE_CHUNK))
        .for_each(|(cy, cx)| {
            for (yi, xi) in cy.iter_mut().zip(cx) {
                *yi += a * xi;
            }
        });
}

/// Max-abs norm with deterministic parallel reduction (max is order-free).
pub fn par_norm_inf(a: &[f64]) -> f64 {
    use rayon::prelude::*;
    if a.len() < 4 * REDUCE_CHUNK {
        return a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    a.par_chunks(REDUCE_CHUNK)
        .map(|c| c.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let n = 101;
        let h = 1.0 / (n as f64 - 1.0);
        let f: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 * h;
                x * x * x - 2.0 * x + 1.0
            })
            .collect();
        assert!((simpson_uniform(&f, h) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let n = 11;
        let dx = 0.1;
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * dx).powi(3)).collect();
        let du: Vec<f64> = (0..n).map(|i| 3.0 * (i as f64 * dx).powi(2)).collect();
        for &x in &[0.05, 0.314, 0.77, 0.999] {
            assert!((hermite_uniform(0.0, dx, &u, &du, x) - x.powi(3)).abs() < 1e-14);
            assert!((hermite_uniform_deriv(0.0, dx, &u, &du, x) - 3.0 * x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_solve_roundtrip() {
        let a0 = [4.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.5, -1.0, 2.0];
        let x_true = [1.0, -2.0, 3.0];
        let mut b = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i] += a0[i * 3 + j] * x_true[j];
            }
        }
        let mut a = a0;
        solve_dense(&mut a, &mut b).unwrap();
        for i in 0..3 {
            assert!((b[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn par_dot_matches_serial_and_is_deterministic() {
        let a: Vec<f64> = (0..100_000).map(|i| ((i * 2654435761_usize) % 1000) as f64 * 1e-3).collect();
        let b: Vec<f64> = (0..100_000).map(|i| ((i * 40503_usize) % 977) as f64 * 1e-3).collect();
        let d1 = par_dot(&a, &b);
        let d2 = par_dot(&a, &b);
        assert_eq!(d1.to_bits(), d2.to_bits());
        assert!((d1 - dot(&a, &b)).abs() <= 1e-9 * dot(&a, &b).abs());
    }
}
