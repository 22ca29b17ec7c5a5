//! Small dense linear-algebra helpers on top of nalgebra.

use crate::{CMat, CVec, Error, Result, C64};

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Kronecker product of two column vectors.
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    CVec::from_fn(a.len() * b.len(), |i, _| a[i / b.len()] * b[i % b.len()])
}

/// Khatri-Rao (column-wise Kronecker) product `a ⋄ b`.
pub fn khatri_rao(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "khatri-rao needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let br = b.nrows();
    Ok(CMat::from_fn(a.nrows() * br, a.ncols(), |i, j| {
        a[(i / br, j)] * b[(i % br, j)]
    }))
}

/// Column-major vectorisation.
pub fn vectorize(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// `m · diag(d)`.
pub fn scale_columns(m: &CMat, d: &CVec) -> CMat {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= d[j];
    }
    out
}

/// `diag(d) · m`.
pub fn scale_rows(d: &CVec, m: &CMat) -> CMat {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

/// Squared Frobenius norm.
pub fn frob2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Relative Frobenius error `‖a − b‖ / ‖b‖` (absolute when `b` is zero).
pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    let diff = frob2(&(a - b)).sqrt();
    let base = frob2(b).sqrt();
    if base == 0.0 {
        diff
    } else {
        diff / base
    }
}

/// True when every entry has modulus one within `tol`.
pub fn is_unit_modulus(m: &CMat, tol: f64) -> bool {
    m.iter().all(|z| (z.norm() - 1.0).abs() <= tol)
}

/// Ratio of extreme singular values; infinite for rank-deficient input.
pub fn condition_number(m: &CMat) -> f64 {
    let s = m.singular_values();
    let max = s.iter().cloned().fold(0.0_f64, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
