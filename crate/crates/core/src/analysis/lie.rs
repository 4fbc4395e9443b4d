//! Closed-form logarithms for the matrix groups of the reduced flow.
//!
//! Every monodromy has the affine shape `[[R, t], [0, 1]]` with `R`
//! orthogonal of size `m + 1`. The logarithm of `R` is taken on the
//! principal branch (rotation angle below `π`), the translation part through
//! the inverse of `∑ Ωᵏ/(k+1)!`.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::model::GroupTag;

/// Rotations closer than this to a half turn are rejected.
pub const BRANCH_MARGIN: f64 = 1e-6;

/// `[a]×`, the skew matrix with `[a]× b = a × b`.
pub fn skew3(a: &[f64; 3]) -> Matrix3<f64> {
    Matrix3::new(0.0, -a[2], a[1], a[2], 0.0, -a[0], -a[1], a[0], 0.0)
}

/// Principal logarithm of a 3×3 rotation; returns the skew generator and the
/// rotation angle.
pub fn log_so3(r: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let w = [0.5 * (r[(2, 1)] - r[(1, 2)]), 0.5 * (r[(0, 2)] - r[(2, 0)]), 0.5 * (r[(1, 0)] - r[(0, 1)])];
    let sin = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let cos = 0.5 * (r[(0, 0)] + r[(1, 1)] + r[(2, 2)] - 1.0);
    let angle = sin.atan2(cos);
    if angle >= std::f64::consts::PI - BRANCH_MARGIN {
        return Err(Error::Branch { angle });
    }
    // θ / sin θ, with its Taylor series near zero.
    let factor = if angle < 1e-6 { 1.0 + angle * angle / 6.0 } else { angle / sin };
    let s = skew3(&[w[0] * factor, w[1] * factor, w[2] * factor]);
    Ok((DMatrix::from_iterator(3, 3, s.iter().copied()), angle))
}

/// Principal logarithm of a 2×2 rotation; returns the signed angle.
pub fn log_so2(r: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let angle = r[(1, 0)].atan2(r[(0, 0)]);
    if angle.abs() >= std::f64::consts::PI - BRANCH_MARGIN {
        return Err(Error::Branch { angle });
    }
    Ok((DMatrix::from_row_slice(2, 2, &[0.0, -angle, angle, 0.0]), angle))
}

/// `∑ₖ Ωᵏ/(k+1)!`, the map taking the translation part of a generator to the
/// translation part of its exponential.
fn left_jacobian(omega: &DMatrix<f64>) -> DMatrix<f64> {
    let n = omega.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..60 {
        term = &term * omega / (k as f64 + 1.0);
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    sum
}

/// Logarithm of an affine monodromy in the group named by `tag`.
///
/// Returns the generator and the rotation angle (zero for groups without
/// rotations).
pub fn log_affine(phi: &DMatrix<f64>, tag: GroupTag) -> Result<(DMatrix<f64>, f64)> {
    let n = phi.nrows();
    if n < 2 || phi.ncols() != n {
        return Err(Error::InvalidArgument(format!("monodromy must be square of size ≥ 2, got {}×{}", n, phi.ncols())));
    }
    let last_row_ok = (0..n).all(|j| (phi[(n - 1, j)] - if j == n - 1 { 1.0 } else { 0.0 }).abs() <= 1e-8);
    if !last_row_ok {
        return Err(Error::InvalidArgument("monodromy is not affine: last row differs from (0, …, 0, 1)".into()));
    }
    let k = n - 1;
    let rot = phi.view((0, 0), (k, k)).into_owned();
    let trans = phi.view((0, k), (k, 1)).into_owned();

    let (omega, angle) = match (tag, k) {
        (GroupTag::Trivial | GroupTag::R, 1) => (DMatrix::zeros(1, 1), 0.0),
        (GroupTag::SO2, 2) => log_so2(&rot)?,
        (GroupTag::SO3, 3) => log_so3(&rot)?,
        (GroupTag::SE, 2) => log_so2(&rot)?,
        (GroupTag::SE, 3) => log_so3(&rot)?,
        _ => {
            return Err(Error::InvalidArgument(format!("a {n}×{n} monodromy does not belong to group {tag}")));
        }
    };
    let u = match tag {
        GroupTag::SO2 | GroupTag::SO3 | GroupTag::Trivial => DVector::zeros(k),
        GroupTag::R => trans.column(0).into_owned(),
        GroupTag::SE => left_jacobian(&omega).lu().solve(&trans.column(0).into_owned()).ok_or(Error::SingularStep)?,
    };
    let mut log = DMatrix::zeros(n, n);
    log.view_mut((0, 0), (k, k)).copy_from(&omega);
    log.view_mut((0, k), (k, 1)).copy_from(&u);
    Ok((log, angle))
}

/// Matrix exponential.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().exp()
}
