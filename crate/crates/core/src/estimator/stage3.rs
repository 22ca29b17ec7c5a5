use super::{
    aod_phases, stack, CascadedEstimate, CommonAoAEstimate, EquivalentCommonChannel,
    EstimatorConfig, UserDiagnostics,
};
use crate::linalg::{condition_number, khatri_rao, vectorize};
use crate::solvers::{line_search_aod, ls_pinv, omp};
use crate::{CMat, CVec, Result, C64};

/// `Ỹ = (1/√p)·(W·Â)†·Y`, `L × τ`.
fn whiten(y: &CMat, w: &CMat, a_hat: &CMat, p: f64) -> Result<CMat> {
    Ok(ls_pinv(&(w * a_hat), y)? / C64::new(p.sqrt(), 0.0))
}

/// Stage III for one user.
///
/// `frames[0]` is the sub-stage-I block under `e1`; `frames[1..]` come from
/// antennas 2, 3, … under `e2`. The user index `user` is 0-based and only
/// used to tag errors.
#[allow(clippy::too_many_arguments)]
pub fn stage3_user(
    frames: &[CMat],
    w: &CMat,
    e1: &CMat,
    e2: &CMat,
    aoa: &CommonAoAEstimate,
    common: Option<&EquivalentCommonChannel>,
    user: usize,
    sparsity: usize,
    q: usize,
    power: f64,
    est: &EstimatorConfig,
) -> Result<CascadedEstimate> {
    let common = common.ok_or(crate::Error::MissingCommonChannel(user + 1))?;
    let tag = |i: usize| move |err: crate::Error| err.at(3, user + 1, i + 1);
    let first = frames
        .first()
        .ok_or_else(|| crate::Error::InsufficientSamples("Stage III needs a first frame".into()))?;
    let x = common.x();
    let dict = &est.dictionary;

    let y1 = whiten(first, w, &aoa.a_hat, power).map_err(tag(0))?;
    let r_k = khatri_rao(&e1.transpose(), &x)? * &dict.full;
    let sol = omp(&r_k, &vectorize(&y1), sparsity).map_err(tag(0))?;
    let a_c = dict.columns(&sol.support);
    let beta1 = sol.coefficients.clone();

    let mut diag = UserDiagnostics {
        omp_residual: sol.residual_norm,
        regularized: sol.regularized,
        cond_projection: condition_number(&(w * &aoa.a_hat)),
        ..Default::default()
    };

    let j = beta1.len();
    let xi_hat = if frames.len() < 2 {
        vec![0.0; j]
    } else {
        let pi = khatri_rao(&e2.transpose(), &x)? * &a_c;
        diag.cond_ls = Some(condition_number(&pi));
        let mut betas = Vec::with_capacity(frames.len() - 1);
        for (i, y) in frames.iter().enumerate().skip(1) {
            let yt = whiten(y, w, &aoa.a_hat, power).map_err(tag(i))?;
            let b = ls_pinv(&pi, &CMat::from_columns(&[vectorize(&yt)])).map_err(tag(i))?;
            betas.push(b.column(0).into_owned());
        }
        let floor = est.ratio_floor * beta1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let strongest = (0..j)
            .max_by(|&a, &b| beta1[a].norm().total_cmp(&beta1[b].norm()).then(b.cmp(&a)))
            .expect("nonempty support");
        let mut xi = vec![0.0; j];
        let mut guarded = Vec::new();
        for jj in 0..j {
            if beta1[jj].norm() < floor {
                guarded.push(jj);
                continue;
            }
            // ratios here follow exp(+i2π(i−1)ξ); the search expects the
            // conjugate convention
            let mut etas = vec![C64::new(1.0, 0.0)];
            etas.extend(betas.iter().map(|b| (b[jj] / beta1[jj]).conj()));
            xi[jj] = line_search_aod(&etas, est.aod_grid).map_err(tag(1))?;
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
        let beta: CVec = beta1.component_mul(&aod_phases(&xi_hat, qq));
        let h = &a_c * beta;
        blocks.push(common.subchannel(&aoa.a_hat, &h));
        h_c.push(h);
    }
    Ok(CascadedEstimate {
        user,
        g_hat: stack(&blocks),
        xi_hat,
        h_c,
        diagnostics: diag,
    })
}
