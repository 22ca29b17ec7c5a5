use std::fmt;
use std::str::FromStr;

use super::{
    stage3_user, CascadedEstimate, CommonAoAEstimate, EquivalentCommonChannel, EstimatorConfig,
    TypicalUserDecomposition,
};
use crate::channel::{ChannelRealization, SystemConfig};
use crate::design::{optimized_combiner, optimized_ris_matrix, random_unit_modulus_with};
use crate::protocol::{run_frames, run_stage1, run_stage3, Frame, MeasurementSet, PilotSchedule};
use crate::rng::{derive_seed, stream, TAG_DESIGN, TAG_NOISE};
use crate::{CMat, Error, Result};

use super::{estimate_common_aoa, stage2_substage1, stage2_substage2};

/// Estimator variants compared by the harness.
///
/// `Proposed`, `OptimizedW` and `OptimizedE` all run the same algorithm
/// (`W_A` and `E_A`); they exist as separate labels for the sweeps that
/// contrast them with the random baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Proposed,
    Oracle,
    RandomW,
    OptimizedW,
    RandomE,
    OptimizedE,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Proposed,
        Method::Oracle,
        Method::RandomW,
        Method::OptimizedW,
        Method::RandomE,
        Method::OptimizedE,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Oracle => "oracle",
            Method::RandomW => "random_w",
            Method::OptimizedW => "optimized_w",
            Method::RandomE => "random_e",
            Method::OptimizedE => "optimized_e",
        }
    }

    fn random_w(self) -> bool {
        self == Method::RandomW
    }

    fn random_e(self) -> bool {
        self == Method::RandomE
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Random RIS matrices and the baseline combiner of one trial. All methods
/// of a trial share them, so comparisons between methods are paired.
#[derive(Debug, Clone)]
pub struct TrialDesign {
    pub e0: CMat,
    pub e11: CMat,
    /// Baseline for sub-stage II of Stage II.
    pub e12_random: CMat,
    /// Baseline combiner for Stages II and III.
    pub w_random: CMat,
    /// Stage-III sub-stage-I matrices of users 2..K.
    pub e_k1: Vec<CMat>,
    /// Stage-III sub-stage-II matrices of users 2..K.
    pub e_k2: Vec<CMat>,
}

impl TrialDesign {
    pub fn draw(cfg: &SystemConfig, schedule: &PilotSchedule, seed: u64) -> Self {
        let mut rng = stream(seed, &[TAG_DESIGN]);
        let m = cfg.m();
        let e0 = random_unit_modulus_with(&mut rng, m, schedule.v0);
        let e11 = random_unit_modulus_with(&mut rng, m, schedule.tau_11);
        let e12_random = random_unit_modulus_with(&mut rng, m, schedule.tau_12);
        let w_random = random_unit_modulus_with(&mut rng, cfg.n_rf, cfg.n_bs);
        let mut e_k1 = Vec::new();
        let mut e_k2 = Vec::new();
        for u in &schedule.stage3 {
            e_k1.push(random_unit_modulus_with(&mut rng, m, u.tau_1));
            e_k2.push(random_unit_modulus_with(&mut rng, m, u.tau_2));
        }
        TrialDesign {
            e0,
            e11,
            e12_random,
            w_random,
            e_k1,
            e_k2,
        }
    }
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub aoa: CommonAoAEstimate,
    /// Absent for the oracle, which never decomposes the first user.
    pub decomposition: Option<TypicalUserDecomposition>,
    pub common: EquivalentCommonChannel,
    pub users: Vec<CascadedEstimate>,
    /// Pilot slots consumed.
    pub overhead: usize,
    /// Every received block the estimate was computed from.
    pub measurements: MeasurementSet,
}

impl PipelineOutput {
    pub fn g_hat(&self) -> Vec<CMat> {
        self.users.iter().map(|u| u.g_hat.clone()).collect()
    }
}

pub(crate) fn stage3_frames(
    schedule: &PilotSchedule,
    design: &TrialDesign,
    w: &CMat,
    k: usize,
) -> Vec<Frame> {
    let s = schedule.stage3[k - 1];
    let mut frames = vec![Frame {
        antenna: 0,
        w: w.clone(),
        e: design.e_k1[k - 1].clone(),
    }];
    frames.extend((1..=s.v).map(|antenna| Frame {
        antenna,
        w: w.clone(),
        e: design.e_k2[k - 1].clone(),
    }));
    frames
}

/// Simulates every pilot frame of one trial and runs the estimator.
///
/// Channel-independent randomness (RIS matrices, baseline combiner) comes
/// from `seed` with the design tag, noise from `seed` with the noise tag,
/// so two methods run with the same seed see identical designs and noise.
pub fn run_three_stage(
    chan: &ChannelRealization,
    cfg: &SystemConfig,
    schedule: &PilotSchedule,
    sigma2: f64,
    seed: u64,
    method: Method,
) -> Result<PipelineOutput> {
    if method == Method::Oracle {
        return super::run_oracle(chan, cfg, schedule, sigma2, seed);
    }
    cfg.validate()?;
    schedule.validate(cfg)?;
    let est = EstimatorConfig::new(cfg)?;
    let design = TrialDesign::draw(cfg, schedule, seed);
    let noise = derive_seed(seed, &[TAG_NOISE]);

    let y0 = run_stage1(chan, cfg, schedule, &design.e0, sigma2, noise)?;
    let aoa = estimate_common_aoa(&y0, cfg.l).map_err(|e| e.at(1, 0, 1))?;

    let w = if method.random_w() {
        design.w_random.clone()
    } else {
        optimized_combiner(&aoa.a_hat, cfg.n_rf)?
    };

    let first = Frame {
        antenna: 0,
        w: w.clone(),
        e: design.e11.clone(),
    };
    let y11 = run_frames(chan, cfg, 2, 0, 0, &[first], sigma2, noise)?.remove(0);
    let mut stage2 = vec![y11.clone()];
    let (_, decomp, common) =
        stage2_substage1(&y11, &w, &design.e11, &aoa, cfg.j[0], cfg.power[0], &est)
            .map_err(|e| e.at(2, 1, 1))?;

    let e12 = if method.random_e() {
        design.e12_random.clone()
    } else {
        optimized_ris_matrix(&decomp.a_ris_r)?
    };
    let later: Vec<Frame> = (1..=schedule.v1)
        .map(|antenna| Frame {
            antenna,
            w: w.clone(),
            e: e12.clone(),
        })
        .collect();
    let ys = run_frames(chan, cfg, 2, 0, 1, &later, sigma2, noise)?;
    stage2.extend(ys.iter().cloned());
    let user1 = stage2_substage2(
        &ys,
        &w,
        &e12,
        &aoa,
        &decomp,
        &common,
        cfg.q[0],
        cfg.power[0],
        &est,
    )
    .map_err(|e| match e {
        Error::Stage { .. } => e,
        other => other.at(2, 1, 2),
    })?;

    let mut users = vec![user1];
    let mut stage3 = Vec::with_capacity(cfg.k() - 1);
    for k in 1..cfg.k() {
        let frames = stage3_frames(schedule, &design, &w, k);
        let ys = run_stage3(chan, cfg, k, &frames, sigma2, noise)?;
        stage3.push(ys.clone());
        let est_k = stage3_user(
            &ys,
            &w,
            &design.e_k1[k - 1],
            &design.e_k2[k - 1],
            &aoa,
            Some(&common),
            k,
            cfg.j[k],
            cfg.q[k],
            cfg.power[k],
            &est,
        )
        .map_err(|e| match e {
            Error::Stage { .. } => e,
            other => other.at(3, k + 1, 1),
        })?;
        users.push(est_k);
    }

    Ok(PipelineOutput {
        aoa,
        decomposition: Some(decomp),
        common,
        users,
        overhead: schedule.total_slots(),
        measurements: MeasurementSet {
            stage1: y0,
            stage2,
            stage3,
            sigma2,
        },
    })
}
