//! The three-stage cascaded channel estimator.
//!
//! Stage I recovers the BS angles of arrival shared by all users. Stage II
//! estimates the first user's cascaded channel and, from it, an equivalent
//! common RIS-BS channel. Stage III reuses that common channel so each
//! remaining user only has to resolve its own sparse RIS response.

mod oracle;
mod pipeline;
mod stage1;
mod stage2;
mod stage3;

pub use oracle::run_oracle;
pub use pipeline::{run_three_stage, Method, PipelineOutput, TrialDesign};
pub use stage1::estimate_common_aoa;
pub use stage2::{project_onto_aoa, select_typical_path, stage2_substage1, stage2_substage2};
pub use stage3::stage3_user;

use crate::channel::SystemConfig;
use crate::geometry::{upa_steering, RisDictionary};
use crate::linalg::scale_columns;
use crate::{CMat, CVec, Result, C64};

/// Tunables shared by all stages.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub dims: (usize, usize),
    pub dictionary: RisDictionary,
    /// Coarse lattice of the rotation search.
    pub rotation_grid: (usize, usize),
    /// Coarse points of the AoD line search.
    pub aod_grid: usize,
    /// Paths whose first-frame gain is below this fraction of the largest
    /// one inherit the AoD of the strongest path.
    pub ratio_floor: f64,
}

impl EstimatorConfig {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        let dictionary = RisDictionary::new(cfg.dictionary())?;
        let q_max = cfg.q.iter().copied().max().unwrap_or(1);
        Ok(EstimatorConfig {
            dims: (cfg.m1, cfg.m2),
            dictionary,
            rotation_grid: (4 * cfg.m1, 4 * cfg.m2),
            aod_grid: 4 * q_max.max(16),
            ratio_floor: 1e-3,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CommonAoAEstimate {
    /// Ascending BS spatial frequencies.
    pub psi_hat: Vec<f64>,
    /// `N_bs × L` steering matrix of `psi_hat`.
    pub a_hat: CMat,
}

/// First-user cascaded structure relative to the typical path `r`.
#[derive(Debug, Clone)]
pub struct TypicalUserDecomposition {
    /// RIS array dimensions `(M₁, M₂)`.
    pub dims: (usize, usize),
    pub r: usize,
    /// Dictionary columns recovered for path `r`.
    pub support: Vec<usize>,
    /// `(υ_r − θ_j, ω_r − φ_j)` of the recovered atoms.
    pub atom_angles: Vec<(f64, f64)>,
    /// `Â_RIS,r`, `M × J`.
    pub a_ris_r: CMat,
    /// `β̂_RIS,r,1`.
    pub beta_r1: CVec,
    /// `(Δυ_l, Δω_l)` per path; zero for `r`.
    pub rotations: Vec<(f64, f64)>,
    /// `x_l` per path; one for `r`.
    pub gains: Vec<C64>,
    pub omp_residual: f64,
    pub regularized: bool,
}

impl TypicalUserDecomposition {
    /// `ĥ_RIS,l = diag(a_M(Δυ_l, Δω_l))·Â_RIS,r·β·x_l` for a given `β`.
    pub fn h_ris(&self, l: usize, beta: &CVec) -> CVec {
        let (dv, dw) = self.rotations[l];
        let rot = upa_steering(self.dims.0, self.dims.1, dv, dw).expect("valid RIS dimensions");
        (&self.a_ris_r * beta).component_mul(&rot) * self.gains[l]
    }
}

/// Re-parameterized common channel `Â_N·Λ^C·(A_M^C)ᴴ`.
#[derive(Debug, Clone)]
pub struct EquivalentCommonChannel {
    /// Diagonal of `Λ^C`.
    pub lambda_c: CVec,
    /// `A_M^C`, `M × L`.
    pub a_m_c: CMat,
    /// Grid-snapped centroid of the recovered cascaded angles, standing in
    /// for `υ_r − θ^C` and `ω_r − φ^C`.
    pub offset: (f64, f64),
}

impl EquivalentCommonChannel {
    /// `Λ^C·(A_M^C)ᴴ`, `L × M`.
    pub fn x(&self) -> CMat {
        scale_columns(&self.a_m_c, &self.lambda_c.map(|z| z.conj())).adjoint()
    }

    /// `Â_N·Λ^C·(A_M^C)ᴴ·diag(h)`.
    pub fn subchannel(&self, a_hat: &CMat, h: &CVec) -> CMat {
        scale_columns(&(a_hat * self.x()), h)
    }
}

#[derive(Debug, Clone, Default)]
pub struct UserDiagnostics {
    pub omp_residual: f64,
    pub regularized: bool,
    /// Condition number of `W·Â`.
    pub cond_projection: f64,
    /// Condition number of the sub-stage-II LS matrix, when that sub-stage ran.
    pub cond_ls: Option<f64>,
    /// Paths that inherited the strongest path's AoD.
    pub guarded_paths: Vec<usize>,
}

/// Estimate of one user's cascaded channel.
#[derive(Debug, Clone)]
pub struct CascadedEstimate {
    pub user: usize,
    /// `Ĝ_k`, `(Q_k·N_bs) × M`.
    pub g_hat: CMat,
    /// AoD estimates of the user's paths, in support order.
    pub xi_hat: Vec<f64>,
    /// `ĥ^C_{k,q}` for every antenna.
    pub h_c: Vec<CVec>,
    pub diagnostics: UserDiagnostics,
}

impl CascadedEstimate {
    /// Row block `q` (0-based) of `Ĝ_k`.
    pub fn subchannel(&self, n_bs: usize, q: usize) -> CMat {
        self.g_hat.rows(q * n_bs, n_bs).into_owned()
    }
}

/// Stacks subchannels `Ĝ_{k,1}, …, Ĝ_{k,Q}` vertically.
pub(crate) fn stack(blocks: &[CMat]) -> CMat {
    let (n, m) = blocks[0].shape();
    let mut g = CMat::zeros(n * blocks.len(), m);
    for (q, b) in blocks.iter().enumerate() {
        g.rows_mut(q * n, n).copy_from(b);
    }
    g
}

/// `exp(+i2π·q·ξ_j)` per path: the AoD phase of antenna `q` (0-based).
pub(crate) fn aod_phases(xi: &[f64], q: usize) -> CVec {
    CVec::from_iterator(
        xi.len(),
        xi.iter().map(|&x| crate::geometry::cis_neg(-(q as f64) * x)),
    )
}
