use super::{
    aod_phases, stack, CascadedEstimate, CommonAoAEstimate, EquivalentCommonChannel,
    EstimatorConfig, TypicalUserDecomposition, UserDiagnostics,
};
use crate::geometry::{upa_matrix, upa_steering, wrap_frequency};
use crate::linalg::condition_number;
use crate::solvers::{line_search_aod, ls_pinv, omp, snl_ls_rotation};
use crate::{CMat, CVec, Error, Result, C64};

/// `(1/√p)·[(W·Â)†·Y]ᴴ`: one column per BS path.
pub fn project_onto_aoa(y: &CMat, w: &CMat, a_hat: &CMat, p: f64) -> Result<CMat> {
    let x = ls_pinv(&(w * a_hat), y)?;
    Ok(x.adjoint() / C64::new(p.sqrt(), 0.0))
}

/// Index (0-based) of the column with the largest energy; ties go low.
pub fn select_typical_path(p: &CMat) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, col) in p.column_iter().enumerate() {
        let e = col.norm_squared();
        if best.is_none_or(|(_, b)| e > b) {
            best = Some((i, e));
        }
    }
    best.map(|b| b.0)
        .ok_or_else(|| Error::InvalidDimension("no paths to choose from".into()))
}

/// Mean of frequencies, each wrapped to within half a period of the first.
fn circular_mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let first = xs.clone().next().unwrap_or(0.0);
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + first + wrap_frequency(x - first), n + 1));
    wrap_frequency(sum / n.max(1) as f64)
}

/// `ĥ^C = a_M(offset) ∘ conj(ĥ_RIS,r) / conj(1ᵀβ̂_RIS,r,1)`, the first user's
/// vector in the common-channel parameterization.
pub(crate) fn typical_h_c(
    decomp: &TypicalUserDecomposition,
    common: &EquivalentCommonChannel,
    beta: &CVec,
) -> CVec {
    let (m1, m2) = decomp.dims;
    let shift = upa_steering(m1, m2, common.offset.0, common.offset.1).expect("valid RIS dimensions");
    let s = decomp.beta_r1.sum().conj();
    (&decomp.a_ris_r * beta).map(|z| z.conj()).component_mul(&shift) / s
}

/// Sub-stage I of Stage II: the first user's first subchannel from one
/// frame, the typical-path decomposition, and the equivalent common channel.
pub fn stage2_substage1(
    y11: &CMat,
    w: &CMat,
    e: &CMat,
    aoa: &CommonAoAEstimate,
    sparsity: usize,
    power: f64,
    est: &EstimatorConfig,
) -> Result<(CMat, TypicalUserDecomposition, EquivalentCommonChannel)> {
    let dict = &est.dictionary;
    let (m1, m2) = est.dims;
    let p = project_onto_aoa(y11, w, &aoa.a_hat, power)?;
    let l_paths = p.ncols();
    let r = select_typical_path(&p)?;

    let sensing = e.adjoint() * &dict.full;
    let p_r = p.column(r).into_owned();
    let sol = omp(&sensing, &p_r, sparsity)?;
    let a_ris_r = dict.columns(&sol.support);
    let beta_r1 = sol.coefficients.clone();
    let h_ref = &a_ris_r * &beta_r1;
    if h_ref.norm() == 0.0 {
        return Err(Error::Detection("typical path carries no recovered energy".into()));
    }

    let mut rotations = vec![(0.0, 0.0); l_paths];
    let mut gains = vec![C64::new(1.0, 0.0); l_paths];
    for l in (0..l_paths).filter(|&l| l != r) {
        let rot = snl_ls_rotation(&h_ref, e, &p.column(l).into_owned(), (m1, m2), est.rotation_grid)?;
        if rot.degenerate {
            return Err(Error::Detection(format!("path {} has no energy", l + 1)));
        }
        rotations[l] = (rot.dv, rot.dw);
        gains[l] = rot.x;
    }
    let atom_angles: Vec<(f64, f64)> = sol.support.iter().map(|&i| dict.angles(i)).collect();
    let decomp = TypicalUserDecomposition {
        dims: (m1, m2),
        r,
        support: sol.support.clone(),
        atom_angles,
        a_ris_r,
        beta_r1,
        rotations,
        gains,
        omp_residual: sol.residual_norm,
        regularized: sol.regularized,
    };

    let h_ris: Vec<CVec> = (0..l_paths).map(|l| decomp.h_ris(l, &decomp.beta_r1)).collect();
    let g11 = &aoa.a_hat * CMat::from_columns(&h_ris).adjoint();

    let centroid = (
        circular_mean(decomp.atom_angles.iter().map(|a| a.0)),
        circular_mean(decomp.atom_angles.iter().map(|a| a.1)),
    );
    let offset = dict.snap(centroid.0, centroid.1);
    let s = decomp.beta_r1.sum();
    let lambda_c = CVec::from_iterator(l_paths, decomp.gains.iter().map(|x| (s * x).conj()));
    let ang: Vec<(f64, f64)> = decomp
        .rotations
        .iter()
        .map(|&(dv, dw)| (offset.0 + dv, offset.1 + dw))
        .collect();
    let common = EquivalentCommonChannel {
        lambda_c,
        a_m_c: upa_matrix(m1, m2, &ang)?,
        offset,
    };
    Ok((g11, decomp, common))
}

/// Sub-stage II of Stage II: per-antenna gains on `Â_RIS,r`, AoDs from the
/// gain ratios, and the full cascaded channel of the first user.
///
/// `frames[i]` is the block received while antenna `i + 2` transmits under
/// RIS matrix `e`.
#[allow(clippy::too_many_arguments)]
pub fn stage2_substage2(
    frames: &[CMat],
    w: &CMat,
    e: &CMat,
    aoa: &CommonAoAEstimate,
    decomp: &TypicalUserDecomposition,
    common: &EquivalentCommonChannel,
    q: usize,
    power: f64,
    est: &EstimatorConfig,
) -> Result<CascadedEstimate> {
    let j = decomp.beta_r1.len();
    let l_paths = decomp.gains.len();
    let mut diag = UserDiagnostics {
        omp_residual: decomp.omp_residual,
        regularized: decomp.regularized,
        cond_projection: condition_number(&(w * &aoa.a_hat)),
        ..Default::default()
    };

    let xi_hat = if frames.is_empty() {
        vec![0.0; j]
    } else {
        let ls = e.adjoint() * &decomp.a_ris_r;
        diag.cond_ls = Some(condition_number(&ls));
        let mut betas = Vec::with_capacity(frames.len());
        for (i, y) in frames.iter().enumerate() {
            let p = project_onto_aoa(y, w, &aoa.a_hat, power).map_err(|err| err.at(2, 1, i + 2))?;
            let p_r = CMat::from_columns(&[p.column(decomp.r)]);
            let b = ls_pinv(&ls, &p_r).map_err(|err| err.at(2, 1, i + 2))?;
            betas.push(b.column(0).into_owned());
        }
        let b1 = &decomp.beta_r1;
        let floor = est.ratio_floor * b1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let strongest = (0..j)
            .max_by(|&a, &b| b1[a].norm().total_cmp(&b1[b].norm()).then(b.cmp(&a)))
            .expect("nonempty support");
        let mut xi = vec![0.0; j];
        let mut guarded = Vec::new();
        for jj in 0..j {
            if b1[jj].norm() < floor {
                guarded.push(jj);
                continue;
            }
            let mut etas = vec![C64::new(1.0, 0.0)];
            etas.extend(betas.iter().map(|b| b[jj] / b1[jj]));
            xi[jj] = line_search_aod(&etas, est.aod_grid).map_err(|err| err.at(2, 1, 2))?;
        }
        for &g in &guarded {
            xi[g] = xi[strongest];
        }
        diag.guarded_paths = guarded;
        xi
    };

    let mut blocks = Vec::with_capacity(q);
    let mut h_c = Vec::with_capacity(q);
    for qq in 0..q {
        // Ω_q = diag(exp(−i2π(q−1)ξ̂)) acting on β̂_RIS,r,1
        let beta = decomp
            .beta_r1
            .component_mul(&aod_phases(&xi_hat, qq).map(|z| z.conj()));
        let cols: Vec<CVec> = (0..l_paths).map(|l| decomp.h_ris(l, &beta)).collect();
        blocks.push(&aoa.a_hat * CMat::from_columns(&cols).adjoint());
        h_c.push(typical_h_c(decomp, common, &beta));
    }
    Ok(CascadedEstimate {
        user: 0,
        g_hat: stack(&blocks),
        xi_hat,
        h_c,
        diagnostics: diag,
    })
}
