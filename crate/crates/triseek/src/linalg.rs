//! Small dense linear algebra used throughout the crate.
//!
//! Planar work runs on closed-form 2x2 routines (no iteration). Eigenvalues
//! of the larger symmetric matrices assembled by the certification layer are
//! computed by an in-crate Householder tridiagonalization followed by QL
//! sweeps with implicit shifts, in the style of the classic EISPACK
//! `tred1`/`tql1` pair. No external eigen solver is on the implementation
//! path.

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// z-component of the cross product of two planar vectors.
pub fn cross2(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Eigenvalues (min, max) of a symmetric 2x2 matrix, closed form.
pub fn sym_eig2(m: &Mat2) -> (f64, f64) {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let disc = f64::hypot(0.5 * (m[(0, 0)] - m[(1, 1)]), m[(0, 1)]);
    (mean - disc, mean + disc)
}

/// Spectral norm of a symmetric 2x2 matrix (largest |eigenvalue|).
pub fn sym_norm2(m: &Mat2) -> f64 {
    let (lo, hi) = sym_eig2(m);
    lo.abs().max(hi.abs())
}

/// Spectral norm of a general 2x2 matrix, from the eigenvalues of M^T M.
///
/// With t = sum of squared entries and d = det M, the larger eigenvalue of
/// M^T M is (t + sqrt(t^2 - 4 d^2)) / 2; no iterative solver is involved.
pub fn spectral_norm2(m: &Mat2) -> f64 {
    let t = m.iter().map(|v| v * v).sum::<f64>();
    let d = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (t * t - 4.0 * d * d).max(0.0).sqrt();
    (0.5 * (t + disc)).sqrt()
}

/// Maximum absolute entry difference from symmetry, used by debug checks.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

const QL_MAX_ITER: usize = 50;

fn fsign(a: f64, b: f64) -> f64 {
    if b >= 0.0 { a.abs() } else { -a.abs() }
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// eigenvalues-only variant: returns the diagonal `d` and subdiagonal `e`
/// (with `e[0] = 0`). The input buffer is consumed as workspace.
fn tridiagonalize(a: &mut DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                let g = -fsign(h.sqrt(), f);
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                let mut ff = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    ff += e[j] * a[(i, j)];
                }
                let hh = ff / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    for i in 0..n {
        d[i] = a[(i, i)];
    }
    e[0] = 0.0;
    (d, e)
}

/// QL iteration with implicit shifts on a symmetric tridiagonal matrix.
/// Off-diagonals are declared negligible relative to machine precision,
/// which is well inside the 1e-12 accuracy this crate requires.
fn ql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(Error::NonConvergence {
                    what: "symmetric QL eigenvalue iteration",
                    iterations: QL_MAX_ITER,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = f64::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + fsign(r, g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f64::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Deflate: an off-diagonal vanished mid-sweep.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, ascending.
///
/// Errors if the matrix is empty, non-square, or materially asymmetric.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::InvalidArgument {
            arg: "m",
            reason: format!("expected nonempty square matrix, got {}x{}", n, m.ncols()),
        });
    }
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if asymmetry(m) > 1e-9 * scale.max(1.0) {
        return Err(Error::InvalidArgument {
            arg: "m",
            reason: "matrix is not symmetric".to_string(),
        });
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let mut work = m.clone();
    let (mut d, mut e) = tridiagonalize(&mut work);
    ql_implicit(&mut d, &mut e)?;
    d.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    Ok(d)
}
