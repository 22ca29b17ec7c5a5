use crate::{CMat, CVec, Error, Result, C64};

/// Output of [`omp`].
#[derive(Debug, Clone)]
pub struct SparseSolution {
    /// Selected dictionary columns in selection order.
    pub support: Vec<usize>,
    pub coefficients: CVec,
    pub residual_norm: f64,
    /// Residual norm after each iteration, starting with `‖y‖`.
    pub residual_history: Vec<f64>,
    /// Set when an ill-conditioned support forced a regularized solve.
    pub regularized: bool,
}

impl SparseSolution {
    /// Dense length-`d` coefficient vector.
    pub fn dense(&self, d: usize) -> CVec {
        let mut x = CVec::zeros(d);
        for (i, &s) in self.support.iter().enumerate() {
            x[s] = self.coefficients[i];
        }
        x
    }
}

// Gram condition number above which the support solve is regularized.
const GRAM_COND_LIMIT: f64 = 1e12;

fn support_solve(a_s: &CMat, y: &CVec) -> (CVec, bool) {
    let svd = a_s.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin > 0.0 && (smax / smin).powi(2) < GRAM_COND_LIMIT {
        let x = svd
            .solve(y, 0.0)
            .expect("SVD computed with both singular-vector sets");
        return (x, false);
    }
    let m = a_s.ncols();
    let mut gram = a_s.adjoint() * a_s;
    let lambda = 1e-10 * gram.trace().re / m as f64;
    for i in 0..m {
        gram[(i, i)] += C64::new(lambda.max(f64::MIN_POSITIVE), 0.0);
    }
    let rhs = a_s.adjoint() * y;
    let x = gram.lu().solve(&rhs).unwrap_or_else(|| CVec::zeros(m));
    (x, true)
}

/// Orthogonal matching pursuit with `s` iterations.
///
/// Each step picks the column maximizing `|aᴴr|/‖a‖` (lowest index on ties)
/// and refits all coefficients by least squares on the support.
pub fn omp(a: &CMat, y: &CVec, s: usize) -> Result<SparseSolution> {
    let (n, d) = a.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "dictionary has {n} rows, observation has {}",
            y.len()
        )));
    }
    if s == 0 || s > n.min(d) {
        return Err(Error::InvalidDimension(format!(
            "sparsity {s} must lie in 1..={}",
            n.min(d)
        )));
    }
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut support: Vec<usize> = Vec::with_capacity(s);
    let mut coef = CVec::zeros(0);
    let mut residual = y.clone();
    let mut history = vec![y.norm()];
    let mut regularized = false;

    for _ in 0..s {
        let corr = a.ad_mul(&residual);
        let mut best = None;
        let mut best_score = -1.0;
        for j in 0..d {
            if support.contains(&j) || norms[j] == 0.0 {
                continue;
            }
            let score = corr[j].norm() / norms[j];
            if score > best_score {
                best_score = score;
                best = Some(j);
            }
        }
        let Some(j) = best else {
            return Err(Error::InvalidDimension(
                "dictionary has too few nonzero columns".into(),
            ));
        };
        support.push(j);
        let a_s = a.select_columns(&support);
        let (x, reg) = support_solve(&a_s, y);
        regularized |= reg;
        residual = y - &a_s * &x;
        coef = x;
        history.push(residual.norm());
    }
    Ok(SparseSolution {
        support,
        coefficients: coef,
        residual_norm: residual.norm(),
        residual_history: history,
        regularized,
    })
}

/// Least-squares solution `(AᴴA)⁻¹AᴴY` computed through the SVD.
///
/// Fails with [`Error::Singular`] when `A` is numerically rank deficient.
pub fn ls_pinv(a: &CMat, y: &CMat) -> Result<CMat> {
    let (n, m) = a.shape();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A has {n} rows, Y has {}",
            y.nrows()
        )));
    }
    if m == 0 || n < m {
        return Err(Error::InvalidDimension(format!(
            "least squares needs a tall matrix, got {n}x{m}"
        )));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let tol = n.max(m) as f64 * f64::EPSILON * smax;
    if smin <= tol {
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        return Err(Error::Singular { condition });
    }
    Ok(svd
        .solve(y, 0.0)
        .expect("SVD computed with both singular-vector sets"))
}
