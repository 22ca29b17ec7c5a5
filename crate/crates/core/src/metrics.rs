//! NMSE, SNR-to-noise mapping and pilot-overhead budgets.

use crate::channel::SystemConfig;
use crate::linalg::frob2;
use crate::protocol::PilotSchedule;
use crate::{CMat, Error, Result};

/// `Σ_k‖Ĝ_k − G_k‖² / Σ_k‖G_k‖²`.
pub fn nmse(estimates: &[CMat], truth: &[CMat]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates for {} channels",
            estimates.len(),
            truth.len()
        )));
    }
    let mut err = 0.0;
    let mut energy = 0.0;
    for (k, (e, t)) in estimates.iter().zip(truth).enumerate() {
        if e.shape() != t.shape() {
            return Err(Error::DimensionMismatch(format!(
                "user {}: estimate is {:?}, channel is {:?}",
                k + 1,
                e.shape(),
                t.shape()
            )));
        }
        err += frob2(&(e - t));
        energy += frob2(t);
    }
    if energy == 0.0 {
        return Err(Error::UndefinedMetric("reference channels carry no energy".into()));
    }
    Ok(err / energy)
}

/// Noise variance at which the reference link SNR
/// `10·log₁₀(10⁻⁶·d_br^−2.2·d_ru^−2.8·p/σ²)` equals `snr_db`.
/// `+∞` maps to zero noise.
pub fn noise_variance_from_snr(snr_db: f64, p: f64, d_br: f64, d_ru: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    1e-6 * d_br.powf(-2.2) * d_ru.powf(-2.8) * p * 10f64.powf(-snr_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Hybrid,
    FullyDigital,
}

/// Slot counts per stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverheadReport {
    pub stage1: usize,
    pub stage2: usize,
    pub stage3: usize,
    pub total: usize,
}

impl OverheadReport {
    /// Counts of an explicit schedule.
    pub fn from_schedule(s: &PilotSchedule) -> Self {
        OverheadReport {
            stage1: s.stage1_slots(),
            stage2: s.stage2_slots(),
            stage3: s.stage3_slots(),
            total: s.total_slots(),
        }
    }
}

/// Minimum overhead with CS constant `c`:
/// `D + ⌈cJ ln M⌉ + J + (K−1)(⌈cJ ln M / L⌉ + ⌈J/L⌉)`, without the leading
/// `D` for a fully digital array. Uses the first user's `J` for all users.
pub fn min_pilot_overhead(cfg: &SystemConfig, arch: Architecture, c: f64) -> OverheadReport {
    let j = cfg.j[0];
    let ln_m = (cfg.m() as f64).ln();
    let stage1 = match arch {
        Architecture::Hybrid => cfg.d_slots(),
        Architecture::FullyDigital => 0,
    };
    let stage2 = (c * j as f64 * ln_m).ceil() as usize + j;
    let per_user = (c * j as f64 * ln_m / cfg.l as f64).ceil() as usize + j.div_ceil(cfg.l);
    let stage3 = (cfg.k() - 1) * per_user;
    OverheadReport {
        stage1,
        stage2,
        stage3,
        total: stage1 + stage2 + stage3,
    }
}
