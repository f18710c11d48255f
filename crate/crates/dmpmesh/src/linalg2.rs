//! Closed-form helpers for symmetric 2x2 matrices.
//!
//! Eigen-decompositions, matrix functions (sqrt, log, exp) and SPD checks for
//! the symmetric 2x2 tensors used everywhere in this crate. Closed forms are
//! deterministic and avoid iterative eigensolvers.

use crate::{Error, Mat2, Result, Vec2};

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    // discriminant of the characteristic polynomial, guarded against
    // cancellation to a tiny negative value
    let d = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - d, 0.5 * tr + d)
}

/// Eigen-decomposition m = R diag(lo, hi) R^T with R orthogonal.
pub fn sym_eigen(m: &Mat2) -> ((f64, f64), Mat2) {
    let (lo, hi) = sym_eigenvalues(m);
    let a = m[(0, 0)];
    let b = m[(0, 1)];
    let c = m[(1, 1)];
    // eigenvector for `hi`; pick the arithmetically stable expression
    let v = if b.abs() > 1e-300 {
        Vec2::new(b, hi - a)
    } else if a >= c {
        Vec2::new(1.0, 0.0)
    } else {
        Vec2::new(0.0, 1.0)
    };
    let n = v.norm();
    let v = if n > 0.0 { v / n } else { Vec2::new(1.0, 0.0) };
    // rotation whose second column is the `hi` eigenvector
    let r = Mat2::new(-v.y, v.x, v.x, v.y);
    ((lo, hi), r)
}

/// Checks symmetry (relative 1e-12) and positive definiteness.
pub fn check_spd(m: &Mat2) -> Result<()> {
    let scale = m.amax().max(1e-300);
    if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-12 * scale {
        return Err(Error::NotSpd {
            lo: m[(0, 1)],
            hi: m[(1, 0)],
        });
    }
    let (lo, hi) = sym_eigenvalues(&sym_part(m));
    if lo <= 0.0 {
        return Err(Error::NotSpd { lo, hi });
    }
    Ok(())
}

pub fn sym_part(m: &Mat2) -> Mat2 {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Mat2::new(m[(0, 0)], off, off, m[(1, 1)])
}

fn sym_map(m: &Mat2, f: impl Fn(f64) -> f64) -> Mat2 {
    let ((lo, hi), r) = sym_eigen(m);
    r * Mat2::new(f(lo), 0.0, 0.0, f(hi)) * r.transpose()
}

/// Principal square root of an SPD matrix.
pub fn sym_sqrt(m: &Mat2) -> Mat2 {
    sym_map(m, f64::sqrt)
}

/// Inverse square root of an SPD matrix.
pub fn sym_inv_sqrt(m: &Mat2) -> Mat2 {
    sym_map(m, |x| 1.0 / x.sqrt())
}

/// Matrix logarithm of an SPD matrix.
pub fn sym_log(m: &Mat2) -> Mat2 {
    sym_map(m, f64::ln)
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_exp(m: &Mat2) -> Mat2 {
    sym_map(m, f64::exp)
}

/// Inverse of a 2x2 matrix; error if the determinant underflows.
pub fn inv2(m: &Mat2) -> Result<Mat2> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if det.abs() < 1e-300 {
        return Err(Error::Validation(format!(
            "2x2 matrix is singular (det = {det:.3e})"
        )));
    }
    Ok(Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}
