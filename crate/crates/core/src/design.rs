//! Combiners and RIS phase matrices.
//!
//! `W_A = [Âᴴ; 0]` keeps the projected noise white at `σ²/N_bs` per path,
//! and `E_A = Â_RIS,r` turns the sub-stage-II LS into a matched filter. Both
//! are compared against i.i.d. unit-modulus baselines.
//!
//! `W_A` pads with zero rows, which an analog phase-shifter network cannot
//! realize; only its first `L` rows satisfy the unit-modulus constraint.

use rand::Rng;

use crate::geometry::dft_matrix;
use crate::linalg::is_unit_modulus;
use crate::rng::{stream, unit_phase, TAG_DESIGN};
use crate::solvers::ls_pinv;
use crate::{CMat, Error, Result};

/// Rows `(d−1)·N_rf .. d·N_rf` of the `N_bs`-point DFT matrix (1-based `d`).
pub fn dft_block_combiner(d: usize, n_rf: usize, n_bs: usize) -> Result<CMat> {
    if n_rf == 0 || !n_bs.is_multiple_of(n_rf) {
        return Err(Error::InvalidDimension(format!(
            "n_bs = {n_bs} is not a multiple of n_rf = {n_rf}"
        )));
    }
    let blocks = n_bs / n_rf;
    if d == 0 || d > blocks {
        return Err(Error::IndexOutOfRange { index: d, max: blocks });
    }
    Ok(dft_matrix(n_bs)?.rows((d - 1) * n_rf, n_rf).into_owned())
}

/// `W_A = [Âᴴ; 0]` with `N_rf − L` zero rows.
pub fn optimized_combiner(a_hat: &CMat, n_rf: usize) -> Result<CMat> {
    let (n_bs, l) = a_hat.shape();
    if n_rf < l {
        return Err(Error::InvalidDimension(format!(
            "{n_rf} RF chains cannot host {l} steering rows"
        )));
    }
    let mut w = CMat::zeros(n_rf, n_bs);
    w.rows_mut(0, l).copy_from(&a_hat.adjoint());
    Ok(w)
}

/// `E_A = Â_RIS,r`; rejects entries off the unit circle.
pub fn optimized_ris_matrix(a_ris_r: &CMat) -> Result<CMat> {
    if !is_unit_modulus(a_ris_r, 1e-9) {
        return Err(Error::Feasibility("cascaded AoD matrix is not unit modulus".into()));
    }
    Ok(a_ris_r.clone())
}

/// I.i.d. entries `exp(i2πa)`, `a ~ U(0, 1)`, from the given generator.
pub fn random_unit_modulus_with<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| unit_phase(rng))
}

/// [`random_unit_modulus_with`] on a stream derived from `seed`.
pub fn random_unit_modulus(rows: usize, cols: usize, seed: u64) -> CMat {
    let mut rng = stream(seed, &[TAG_DESIGN]);
    random_unit_modulus_with(&mut rng, rows, cols)
}

/// `T = (W·Â)†·W`, the map from raw BS noise to projected per-path noise.
pub fn noise_projection_gain(w: &CMat, a_hat: &CMat) -> Result<CMat> {
    if w.ncols() != a_hat.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "W has {} columns, Â has {} rows",
            w.ncols(),
            a_hat.nrows()
        )));
    }
    ls_pinv(&(w * a_hat), w)
}

/// Per-path noise amplification: squared row norms of `T`.
pub fn noise_amplification(w: &CMat, a_hat: &CMat) -> Result<Vec<f64>> {
    let t = noise_projection_gain(w, a_hat)?;
    Ok(t.row_iter().map(|r| r.norm_squared()).collect())
}

/// The two sides of the sufficient condition `W·Wᴴ ⪰ λ_max·I_L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    /// Largest squared singular value of `W·Â`.
    pub lambda_max: f64,
    /// Smallest eigenvalue of the leading `L×L` block of `W·Wᴴ`.
    pub min_eig: f64,
}

impl ConditionCheck {
    pub fn holds(&self) -> bool {
        self.min_eig >= self.lambda_max * (1.0 - 1e-12)
    }
}

/// Evaluates the amplification condition for `W` and `Â`, reading `I_L` as
/// the leading `L×L` principal block of `W·Wᴴ`.
pub fn amplification_condition(w: &CMat, a_hat: &CMat) -> Result<ConditionCheck> {
    let l = a_hat.ncols();
    if w.nrows() < l {
        return Err(Error::InvalidDimension(format!(
            "W has {} rows, fewer than L = {l}",
            w.nrows()
        )));
    }
    let wa = w * a_hat;
    let lambda_max = wa
        .singular_values()
        .iter()
        .map(|s| s * s)
        .fold(0.0, f64::max);
    let lead = (w * w.adjoint()).view((0, 0), (l, l)).into_owned();
    let min_eig = lead
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(ConditionCheck { lambda_max, min_eig })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{grid_frequency, ula_matrix, upa_matrix};
    use crate::linalg::c;
    use crate::rng::complex_normal;
    use crate::C64;

    #[test]
    fn dft_blocks() {
        let u = dft_matrix(4).unwrap();
        let w = dft_block_combiner(2, 2, 4).unwrap();
        assert_eq!(w, u.rows(2, 2).into_owned());
        let mut stacked = CMat::zeros(8, 8);
        for d in 1..=4 {
            stacked.rows_mut((d - 1) * 2, 2).copy_from(&dft_block_combiner(d, 2, 8).unwrap());
        }
        assert_eq!(stacked, dft_matrix(8).unwrap());
        assert!(matches!(dft_block_combiner(0, 2, 4), Err(Error::IndexOutOfRange { .. })));
        assert!(dft_block_combiner(3, 2, 4).is_err());
    }

    #[test]
    fn uncompression_recovers_input() {
        let n = 8;
        let u = dft_matrix(n).unwrap();
        let mut rng = stream(1, &[]);
        let x = crate::CVec::from_fn(n, |_, _| complex_normal(&mut rng, 1.0));
        let back = u.adjoint() * (&u * &x) / c(n as f64, 0.0);
        assert!((back - x).norm() < 1e-12);
    }

    #[test]
    fn combiner_on_grid() {
        let a = ula_matrix(8, &[grid_frequency(1, 8), grid_frequency(5, 8)]).unwrap();
        let w = optimized_combiner(&a, 4).unwrap();
        let wa = &w * &a;
        let mut want = CMat::zeros(4, 2);
        want[(0, 0)] = c(8.0, 0.0);
        want[(1, 1)] = c(8.0, 0.0);
        assert!((wa - want).norm() < 1e-12);
        assert!(is_unit_modulus(&w.rows(0, 2).into_owned(), 1e-12));
        assert!(optimized_combiner(&a, 1).is_err());
    }

    #[test]
    fn combiner_off_grid_coherence_bounded_by_dirichlet_kernel() {
        let n = 16;
        let (x1, x2) = (0.0123, 0.2071);
        let a = ula_matrix(n, &[x1, x2]).unwrap();
        let g = a.adjoint() * &a / c(n as f64, 0.0);
        let delta = x2 - x1;
        let pi = std::f64::consts::PI;
        let kernel = ((pi * n as f64 * delta).sin() / (n as f64 * (pi * delta).sin())).abs();
        assert!((g[(0, 1)].norm() - kernel).abs() < 1e-12);
    }

    #[test]
    fn ris_matrix_on_grid() {
        let ang = [(grid_frequency(0, 4), grid_frequency(1, 4)), (grid_frequency(2, 4), grid_frequency(3, 4))];
        let a = upa_matrix(4, 4, &ang).unwrap();
        let e = optimized_ris_matrix(&a).unwrap();
        let g = e.adjoint() * &e;
        assert!((g - CMat::identity(2, 2) * c(16.0, 0.0)).norm() < 1e-12);
        let mut bad = a.clone();
        bad[(0, 0)] = c(0.5, 0.0);
        assert!(matches!(optimized_ris_matrix(&bad), Err(Error::Feasibility(_))));
    }

    #[test]
    fn ris_matrix_noise_reduction_sampled() {
        let ang = [(grid_frequency(0, 4), grid_frequency(1, 4)), (grid_frequency(2, 4), grid_frequency(3, 4))];
        let e = upa_matrix(4, 4, &ang).unwrap();
        let map = ls_pinv(&(e.adjoint() * &e), &e.adjoint()).unwrap();
        let mut rng = stream(3, &[]);
        let draws = 10_000;
        let mut acc = [0.0; 2];
        for _ in 0..draws {
            let n = crate::CVec::from_fn(16, |_, _| complex_normal(&mut rng, 1.0));
            let z = &map * n;
            acc[0] += z[0].norm_sqr();
            acc[1] += z[1].norm_sqr();
        }
        for a in acc {
            assert!((a / draws as f64 * 16.0 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn random_unit_modulus_properties() {
        let a = random_unit_modulus(3, 4, 9);
        assert!(is_unit_modulus(&a, 1e-12));
        assert_eq!(a, random_unit_modulus(3, 4, 9));
        let big = random_unit_modulus(1, 100_000, 10);
        let mean: C64 = big.iter().sum::<C64>() / 100_000.0;
        assert!(mean.norm() < 0.02);
    }

    #[test]
    fn projection_gain_under_w_a() {
        let n = 16;
        let a = ula_matrix(n, &[grid_frequency(2, n), grid_frequency(9, n)]).unwrap();
        let w = optimized_combiner(&a, 4).unwrap();
        let t = noise_projection_gain(&w, &a).unwrap();
        let gram = &t * t.adjoint();
        assert!((gram - CMat::identity(2, 2) * c(1.0 / n as f64, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn projection_gain_rank_one() {
        let n = 8;
        let a = ula_matrix(n, &[0.137]).unwrap();
        let w = a.adjoint();
        let amp = noise_amplification(&w, &a).unwrap();
        assert!((amp[0] - 1.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_when_condition_holds() {
        // W = [ε·Âᴴ/N; 0] + B with B·Â = 0 and B·Bᴴ = b·I; then λ_max = ε²
        // and each amplification equals 1/N + b/ε².
        let n = 16;
        let l = 2;
        let n_rf = 4;
        let a = ula_matrix(n, &[grid_frequency(3, n), grid_frequency(11, n)]).unwrap();
        let u = dft_matrix(n).unwrap() / c((n as f64).sqrt(), 0.0);
        // DFT rows 3 and 11 span Âᴴ; pick four other orthonormal rows
        let others: Vec<usize> = (0..n).filter(|&r| r != 3 && r != 11).take(n_rf).collect();
        for (eps, b) in [(2.0f64, 4.0f64), (1.0, 1.5), (3.0, 20.0)] {
            let mut w = CMat::zeros(n_rf, n);
            w.rows_mut(0, l).copy_from(&(a.adjoint() * c(eps / n as f64, 0.0)));
            for (i, &r) in others.iter().enumerate() {
                let row = u.row(r) * c(b.sqrt(), 0.0);
                let cur = w.row(i) + row;
                w.set_row(i, &cur);
            }
            let chk = amplification_condition(&w, &a).unwrap();
            assert!((chk.lambda_max - eps * eps).abs() < 1e-9);
            assert!(chk.holds(), "{chk:?}");
            for amp in noise_amplification(&w, &a).unwrap() {
                assert!((amp - (1.0 / n as f64 + b / (eps * eps))).abs() < 1e-9);
                assert!(amp >= 1.0);
            }
        }
    }
}
