//! Genie-aided reference: every angle is taken from the true channel and
//! only the complex gains are fitted, jointly over all frames by least
//! squares. It bounds what the angle-estimation stages can achieve.

use super::pipeline::{stage3_frames, TrialDesign};
use super::stage2::project_onto_aoa;
use super::{
    aod_phases, stack, CascadedEstimate, CommonAoAEstimate, EquivalentCommonChannel,
    PipelineOutput, UserDiagnostics,
};
use crate::channel::{ChannelRealization, SystemConfig};
use crate::design::{optimized_combiner, optimized_ris_matrix};
use crate::geometry::{ula_matrix, upa_matrix};
use crate::linalg::{condition_number, khatri_rao, scale_columns, vectorize};
use crate::protocol::{run_frames, run_stage3, Frame, MeasurementSet, PilotSchedule};
use crate::rng::{derive_seed, TAG_NOISE};
use crate::solvers::ls_pinv;
use crate::{CMat, CVec, Result, C64};

fn stacked_ls(blocks: &[CMat], obs: &[CVec]) -> Result<CVec> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    let mut a = CMat::zeros(rows, cols);
    let mut y = CMat::zeros(rows, 1);
    let mut at = 0;
    for (b, o) in blocks.iter().zip(obs) {
        a.rows_mut(at, b.nrows()).copy_from(b);
        y.rows_mut(at, b.nrows()).copy_from(o);
        at += b.nrows();
    }
    Ok(ls_pinv(&a, &y)?.column(0).into_owned())
}

/// Oracle counterpart of [`super::run_three_stage`]; Stage I is skipped.
pub fn run_oracle(
    chan: &ChannelRealization,
    cfg: &SystemConfig,
    schedule: &PilotSchedule,
    sigma2: f64,
    seed: u64,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    schedule.validate(cfg)?;
    let (m1, m2) = (cfg.m1, cfg.m2);
    let design = TrialDesign::draw(cfg, schedule, seed);
    let noise = derive_seed(seed, &[TAG_NOISE]);
    let paths = &chan.ris_bs;
    let l_paths = paths.len();

    let psi: Vec<f64> = paths.iter().map(|p| p.psi).collect();
    let a_n = ula_matrix(cfg.n_bs, &psi)?;
    let aoa = CommonAoAEstimate {
        psi_hat: psi,
        a_hat: a_n.clone(),
    };
    let w = optimized_combiner(&a_n, cfg.n_rf)?;
    let r = (0..l_paths)
        .max_by(|&a, &b| paths[a].alpha.norm().total_cmp(&paths[b].alpha.norm()).then(b.cmp(&a)))
        .expect("at least one path");

    // Stage II
    let u1 = &chan.users[0];
    let xi1: Vec<f64> = u1.iter().map(|p| p.xi).collect();
    let a_ris = |l: usize| -> Result<CMat> {
        let ang: Vec<(f64, f64)> = u1
            .iter()
            .map(|p| (paths[l].upsilon - p.theta, paths[l].omega - p.varphi))
            .collect();
        upa_matrix(m1, m2, &ang)
    };
    let e_a = optimized_ris_matrix(&a_ris(r)?)?;
    let mut frames = vec![Frame {
        antenna: 0,
        w: w.clone(),
        e: design.e11.clone(),
    }];
    frames.extend((1..=schedule.v1).map(|antenna| Frame {
        antenna,
        w: w.clone(),
        e: e_a.clone(),
    }));
    let ys = run_frames(chan, cfg, 2, 0, 0, &frames, sigma2, noise)?;
    let projected: Vec<CMat> = ys
        .iter()
        .map(|y| project_onto_aoa(y, &w, &a_n, cfg.power[0]))
        .collect::<Result<_>>()
        .map_err(|e| e.at(2, 1, 1))?;

    let mut g = Vec::with_capacity(l_paths);
    let mut a_ris_l = Vec::with_capacity(l_paths);
    for l in 0..l_paths {
        let a_l = a_ris(l)?;
        let blocks: Vec<CMat> = frames
            .iter()
            .map(|f| {
                let omega = aod_phases(&xi1, f.antenna).map(|z| z.conj());
                f.e.adjoint() * scale_columns(&a_l, &omega)
            })
            .collect();
        let obs: Vec<CVec> = projected.iter().map(|p| p.column(l).into_owned()).collect();
        g.push(stacked_ls(&blocks, &obs).map_err(|e| e.at(2, 1, 1))?);
        a_ris_l.push(a_l);
    }
    let mut blocks = Vec::with_capacity(cfg.q[0]);
    for q in 0..cfg.q[0] {
        let omega = aod_phases(&xi1, q).map(|z| z.conj());
        let cols: Vec<CVec> = (0..l_paths)
            .map(|l| &a_ris_l[l] * g[l].component_mul(&omega))
            .collect();
        blocks.push(&a_n * CMat::from_columns(&cols).adjoint());
    }
    let j1 = u1.len() as f64;
    let offset = (
        paths[r].upsilon - u1.iter().map(|p| p.theta).sum::<f64>() / j1,
        paths[r].omega - u1.iter().map(|p| p.varphi).sum::<f64>() / j1,
    );
    let ang: Vec<(f64, f64)> = paths
        .iter()
        .map(|p| (offset.0 + p.upsilon - paths[r].upsilon, offset.1 + p.omega - paths[r].omega))
        .collect();
    let common = EquivalentCommonChannel {
        lambda_c: CVec::from_iterator(l_paths, g.iter().map(|gl| gl.sum().conj())),
        a_m_c: upa_matrix(m1, m2, &ang)?,
        offset,
    };
    let user1 = CascadedEstimate {
        user: 0,
        g_hat: stack(&blocks),
        xi_hat: xi1,
        h_c: Vec::new(),
        diagnostics: UserDiagnostics {
            cond_projection: condition_number(&(&w * &a_n)),
            ..Default::default()
        },
    };

    // Stage III
    let x = common.x();
    let mut users = vec![user1];
    let stage2 = ys;
    let mut stage3 = Vec::with_capacity(cfg.k() - 1);
    for k in 1..cfg.k() {
        let uk = &chan.users[k];
        let xi: Vec<f64> = uk.iter().map(|p| p.xi).collect();
        let ang: Vec<(f64, f64)> = uk
            .iter()
            .map(|p| {
                (
                    p.theta + offset.0 - paths[r].upsilon,
                    p.varphi + offset.1 - paths[r].omega,
                )
            })
            .collect();
        let a_c = upa_matrix(m1, m2, &ang)?;
        let frames = stage3_frames(schedule, &design, &w, k);
        let ys = run_stage3(chan, cfg, k, &frames, sigma2, noise)?;
        stage3.push(ys.clone());
        let scale = C64::new(cfg.power[k].sqrt(), 0.0);
        let mut blocks_ls = Vec::with_capacity(frames.len());
        let mut obs = Vec::with_capacity(frames.len());
        for (f, y) in frames.iter().zip(&ys) {
            let yt = ls_pinv(&(&w * &a_n), y).map_err(|e| e.at(3, k + 1, 1))? / scale;
            let phase = aod_phases(&xi, f.antenna);
            blocks_ls.push(khatri_rao(&f.e.transpose(), &x)? * scale_columns(&a_c, &phase));
            obs.push(vectorize(&yt));
        }
        let beta = stacked_ls(&blocks_ls, &obs).map_err(|e| e.at(3, k + 1, 1))?;
        let mut blocks = Vec::with_capacity(cfg.q[k]);
        let mut h_c = Vec::with_capacity(cfg.q[k]);
        for q in 0..cfg.q[k] {
            let h = &a_c * beta.component_mul(&aod_phases(&xi, q));
            blocks.push(common.subchannel(&a_n, &h));
            h_c.push(h);
        }
        users.push(CascadedEstimate {
            user: k,
            g_hat: stack(&blocks),
            xi_hat: xi,
            h_c,
            diagnostics: UserDiagnostics::default(),
        });
    }
    Ok(PipelineOutput {
        aoa,
        decomposition: None,
        common,
        users,
        overhead: schedule.total_slots() - schedule.stage1_slots(),
        measurements: MeasurementSet {
            stage1: CMat::zeros(0, 0),
            stage2,
            stage3,
            sigma2,
        },
    })
}
