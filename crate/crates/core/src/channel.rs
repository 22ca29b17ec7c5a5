//! Ground-truth channel realizations.
//!
//! `H_br = A_N Λ A_Mᴴ` (RIS to BS), `H_k = A_{M,k} B_k A_{Q_k}ᴴ` (user k to
//! RIS) and the cascaded channel `G_k = H_kᵀ ⋄ H_br`, whose q-th row block is
//! the subchannel `H_br·diag(h_{k,q})`.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{frequency_distance, grid_frequency, ula_matrix, upa_matrix};
use crate::linalg::{khatri_rao, scale_columns};
use crate::rng::{complex_normal, stream, TAG_CHANNEL};
use crate::{CMat, CVec, Error, Result, C64};

/// Array sizes, path counts, powers and link distances.
///
/// Per-user quantities are stored as vectors of length `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_bs: usize,
    pub n_rf: usize,
    pub m1: usize,
    pub m2: usize,
    pub q: Vec<usize>,
    pub q_rf: Vec<usize>,
    pub l: usize,
    pub j: Vec<usize>,
    /// Linear transmit power per user.
    pub power: Vec<f64>,
    pub d_br: f64,
    pub d_ru: f64,
    /// Dictionary oversampling factor along each RIS axis.
    pub oversample: usize,
}

impl SystemConfig {
    /// Same antenna count, RF chains, path count and power for every user.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        n_bs: usize,
        n_rf: usize,
        m1: usize,
        m2: usize,
        q: usize,
        q_rf: usize,
        k: usize,
        l: usize,
        j: usize,
    ) -> Self {
        SystemConfig {
            n_bs,
            n_rf,
            m1,
            m2,
            q: vec![q; k],
            q_rf: vec![q_rf; k],
            l,
            j: vec![j; k],
            power: vec![1.0; k],
            d_br: 80.0,
            d_ru: 40.0,
            oversample: 2,
        }
    }

    /// The desk-scale reference system.
    pub fn desk() -> Self {
        Self::uniform(32, 8, 8, 8, 8, 2, 2, 2, 2)
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.m1 * self.m2
    }

    /// Stage-I slots per frame, `N_bs / N_rf`.
    /// `N_bs / N_rf`, or 0 when there are no RF chains.
    pub fn d_slots(&self) -> usize {
        self.n_bs.checked_div(self.n_rf).unwrap_or(0)
    }

    pub fn dictionary(&self) -> crate::geometry::DictionaryConfig {
        crate::geometry::DictionaryConfig::oversampled(self.m1, self.m2, self.oversample)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let bad = |msg: String| Err(Error::Config(msg));
        if k == 0 {
            return bad("at least one user is required".into());
        }
        if self.q_rf.len() != k || self.j.len() != k || self.power.len() != k {
            return bad(format!(
                "per-user lists must all have length {k} (q_rf {}, j {}, power {})",
                self.q_rf.len(),
                self.j.len(),
                self.power.len()
            ));
        }
        if self.n_bs == 0 || self.n_rf == 0 || self.m1 == 0 || self.m2 == 0 || self.l == 0 {
            return bad("array sizes and path counts must be positive".into());
        }
        if self.n_rf < self.l {
            return bad(format!("n_rf = {} must be at least L = {}", self.n_rf, self.l));
        }
        if self.n_rf > self.n_bs || !self.n_bs.is_multiple_of(self.n_rf) {
            return bad(format!(
                "n_bs = {} must be a multiple of n_rf = {}",
                self.n_bs, self.n_rf
            ));
        }
        if self.l > self.m() || self.l > self.n_bs {
            return bad(format!("L = {} exceeds the array sizes", self.l));
        }
        if self.oversample == 0 {
            return bad("dictionary oversampling must be at least 1".into());
        }
        for u in 0..k {
            if self.q[u] == 0 || self.q_rf[u] == 0 || self.j[u] == 0 {
                return bad(format!("user {}: counts must be positive", u + 1));
            }
            if self.j[u] > self.m() {
                return bad(format!("user {}: J = {} exceeds M", u + 1, self.j[u]));
            }
            if !(self.power[u].is_finite() && self.power[u] > 0.0) {
                return bad(format!("user {}: power must be positive", u + 1));
            }
        }
        if !(self.d_br > 0.0 && self.d_ru > 0.0) {
            return bad("link distances must be positive".into());
        }
        Ok(())
    }

    /// Variance of the RIS-BS path gains, `10⁻³·d_br^−2.2`.
    pub fn alpha_variance(&self) -> f64 {
        1e-3 * self.d_br.powf(-2.2)
    }

    /// Variance of the user-RIS path gains, `10⁻³·d_ru^−2.8`.
    pub fn beta_variance(&self) -> f64 {
        1e-3 * self.d_ru.powf(-2.8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisBsPath {
    pub psi: f64,
    pub upsilon: f64,
    pub omega: f64,
    pub alpha: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRisPath {
    pub theta: f64,
    pub varphi: f64,
    pub xi: f64,
    pub beta: C64,
}

pub type RisBsPathSet = Vec<RisBsPath>;
pub type UserRisPathSet = Vec<UserRisPath>;

/// A full channel draw: the path parameters and the matrices built from them.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub ris_bs: RisBsPathSet,
    pub users: Vec<UserRisPathSet>,
    pub h_br: CMat,
    pub h_users: Vec<CMat>,
    pub g: Vec<CMat>,
}

impl ChannelRealization {
    pub fn from_paths(
        cfg: &SystemConfig,
        ris_bs: RisBsPathSet,
        users: Vec<UserRisPathSet>,
    ) -> Result<Self> {
        if users.len() != cfg.k() {
            return Err(Error::DimensionMismatch(format!(
                "{} user path sets for K = {}",
                users.len(),
                cfg.k()
            )));
        }
        let h_br = assemble_ris_bs(&ris_bs, cfg)?;
        let mut h_users = Vec::with_capacity(users.len());
        let mut g = Vec::with_capacity(users.len());
        for (k, paths) in users.iter().enumerate() {
            let h = assemble_user_ris(paths, cfg, k)?;
            g.push(cascaded_full(&h_br, &h)?);
            h_users.push(h);
        }
        Ok(ChannelRealization {
            ris_bs,
            users,
            h_br,
            h_users,
            g,
        })
    }

    /// Column `q` (0-based) of `H_k`.
    pub fn h(&self, k: usize, q: usize) -> CVec {
        self.h_users[k].column(q).into_owned()
    }

    /// `G_{k,q}` for 0-based `k`, `q`.
    pub fn subchannel(&self, k: usize, q: usize) -> Result<CMat> {
        cascaded_subchannel(&self.h_br, &self.h_users[k], q + 1)
    }

    /// `A_N`, `Λ` diagonal and `A_M` of the RIS-BS link.
    pub fn ris_bs_factors(&self, cfg: &SystemConfig) -> Result<(CMat, CVec, CMat)> {
        ris_bs_factors(&self.ris_bs, cfg)
    }
}

fn ris_bs_factors(paths: &RisBsPathSet, cfg: &SystemConfig) -> Result<(CMat, CVec, CMat)> {
    let psi: Vec<f64> = paths.iter().map(|p| p.psi).collect();
    let ang: Vec<(f64, f64)> = paths.iter().map(|p| (p.upsilon, p.omega)).collect();
    let a_n = ula_matrix(cfg.n_bs, &psi)?;
    let a_m = upa_matrix(cfg.m1, cfg.m2, &ang)?;
    let lam = CVec::from_iterator(paths.len(), paths.iter().map(|p| p.alpha));
    Ok((a_n, lam, a_m))
}

/// `H_br = A_N·Λ·A_Mᴴ`.
pub fn assemble_ris_bs(paths: &RisBsPathSet, cfg: &SystemConfig) -> Result<CMat> {
    if paths.is_empty() {
        return Err(Error::DimensionMismatch("RIS-BS link without paths".into()));
    }
    let (a_n, lam, a_m) = ris_bs_factors(paths, cfg)?;
    Ok(scale_columns(&a_n, &lam) * a_m.adjoint())
}

/// `H_k = A_{M,k}·B_k·A_{Q_k}ᴴ` for 0-based user `k`.
pub fn assemble_user_ris(paths: &UserRisPathSet, cfg: &SystemConfig, k: usize) -> Result<CMat> {
    if k >= cfg.k() {
        return Err(Error::IndexOutOfRange {
            index: k + 1,
            max: cfg.k(),
        });
    }
    if paths.is_empty() {
        return Err(Error::DimensionMismatch(format!("user {} without paths", k + 1)));
    }
    let ang: Vec<(f64, f64)> = paths.iter().map(|p| (p.theta, p.varphi)).collect();
    let xi: Vec<f64> = paths.iter().map(|p| p.xi).collect();
    let a_m = upa_matrix(cfg.m1, cfg.m2, &ang)?;
    let a_q = ula_matrix(cfg.q[k], &xi)?;
    let b = CVec::from_iterator(paths.len(), paths.iter().map(|p| p.beta));
    Ok(scale_columns(&a_m, &b) * a_q.adjoint())
}

/// `H_br·diag(h_{k,q})` for 1-based antenna index `q`.
pub fn cascaded_subchannel(h_br: &CMat, h_k: &CMat, q: usize) -> Result<CMat> {
    if q == 0 || q > h_k.ncols() {
        return Err(Error::IndexOutOfRange {
            index: q,
            max: h_k.ncols(),
        });
    }
    if h_k.nrows() != h_br.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "H_br has {} columns, H_k has {} rows",
            h_br.ncols(),
            h_k.nrows()
        )));
    }
    Ok(scale_columns(h_br, &h_k.column(q - 1).into_owned()))
}

/// `H_kᵀ ⋄ H_br`: the subchannels stacked vertically.
pub fn cascaded_full(h_br: &CMat, h_k: &CMat) -> Result<CMat> {
    if h_k.nrows() != h_br.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "H_br has {} columns, H_k has {} rows",
            h_br.ncols(),
            h_k.nrows()
        )));
    }
    khatri_rao(&h_k.transpose(), h_br)
}

fn uniform_frequency(rng: &mut ChaCha8Rng, grid: Option<usize>) -> f64 {
    match grid {
        Some(d) => grid_frequency(rng.random_range(0..d), d),
        None => rng.random::<f64>() - 0.5,
    }
}

const MAX_REJECTIONS: usize = 10_000;

/// Draws `count` frequency pairs whose pairwise Chebyshev distance, measured
/// in units of `1/m1` and `1/m2`, is at least one. Falls back to accepting
/// the draw if the array is too small to honour the separation.
fn separated_pairs(
    rng: &mut ChaCha8Rng,
    count: usize,
    m: (usize, usize),
    grid: Option<(usize, usize)>,
) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(count);
    while out.len() < count {
        let mut cand = (0.0, 0.0);
        for _ in 0..MAX_REJECTIONS {
            cand = (
                uniform_frequency(rng, grid.map(|g| g.0)),
                uniform_frequency(rng, grid.map(|g| g.1)),
            );
            let ok = out.iter().all(|&(y, z)| {
                let dy = frequency_distance(y, cand.0) * m.0 as f64;
                let dz = frequency_distance(z, cand.1) * m.1 as f64;
                dy.max(dz) >= 1.0 - 1e-9
            });
            if ok {
                break;
            }
        }
        out.push(cand);
    }
    out
}

fn separated_frequencies(
    rng: &mut ChaCha8Rng,
    count: usize,
    n: usize,
    grid: Option<usize>,
) -> Vec<f64> {
    separated_pairs(rng, count, (n, 1), grid.map(|g| (g, 1)))
        .into_iter()
        .map(|p| p.0)
        .collect()
}

fn nonvanishing_gain(rng: &mut ChaCha8Rng, var: f64) -> C64 {
    loop {
        let g = complex_normal(rng, var);
        if g.norm() >= 1e-6 * var.sqrt() {
            return g;
        }
    }
}

/// Draws a realization from `(cfg, seed)`.
///
/// Frequencies are uniform on `[−1/2, 1/2)`. With `on_grid`, BS angles sit
/// on the `1/N_bs` DFT grid and RIS angles on the dictionary grid; user AoDs
/// stay continuous. BS angles are separated by at least one DFT bin and RIS
/// angle pairs by at least one beamwidth.
pub fn sample_channel(cfg: &SystemConfig, seed: u64, on_grid: bool) -> Result<ChannelRealization> {
    cfg.validate()?;
    let mut rng = stream(seed, &[TAG_CHANNEL]);
    let dict = cfg.dictionary();
    let ris_grid = on_grid.then_some((dict.d1, dict.d2));
    let bs_grid = on_grid.then_some(cfg.n_bs);

    let psi = separated_frequencies(&mut rng, cfg.l, cfg.n_bs, bs_grid);
    let ris = separated_pairs(&mut rng, cfg.l, (cfg.m1, cfg.m2), ris_grid);
    let ris_bs: RisBsPathSet = psi
        .iter()
        .zip(&ris)
        .map(|(&psi, &(upsilon, omega))| RisBsPath {
            psi,
            upsilon,
            omega,
            alpha: nonvanishing_gain(&mut rng, cfg.alpha_variance()),
        })
        .collect();

    let mut users = Vec::with_capacity(cfg.k());
    for k in 0..cfg.k() {
        let ang = separated_pairs(&mut rng, cfg.j[k], (cfg.m1, cfg.m2), ris_grid);
        let paths: UserRisPathSet = ang
            .into_iter()
            .map(|(theta, varphi)| UserRisPath {
                theta,
                varphi,
                xi: rng.random::<f64>() - 0.5,
                beta: nonvanishing_gain(&mut rng, cfg.beta_variance()),
            })
            .collect();
        users.push(paths);
    }
    ChannelRealization::from_paths(cfg, ris_bs, users)
}

pub(crate) fn fmt_c(z: C64) -> String {
    format!("{},{}", z.re, z.im)
}

/// Serializes the path parameters as `key = value` lines.
pub fn dump_paths(chan: &ChannelRealization) -> String {
    let mut s = String::new();
    for (l, p) in chan.ris_bs.iter().enumerate() {
        let _ = writeln!(s, "ris_bs.{l}.psi = {}", p.psi);
        let _ = writeln!(s, "ris_bs.{l}.upsilon = {}", p.upsilon);
        let _ = writeln!(s, "ris_bs.{l}.omega = {}", p.omega);
        let _ = writeln!(s, "ris_bs.{l}.alpha = {}", fmt_c(p.alpha));
    }
    for (k, paths) in chan.users.iter().enumerate() {
        for (j, p) in paths.iter().enumerate() {
            let _ = writeln!(s, "user.{k}.{j}.theta = {}", p.theta);
            let _ = writeln!(s, "user.{k}.{j}.varphi = {}", p.varphi);
            let _ = writeln!(s, "user.{k}.{j}.xi = {}", p.xi);
            let _ = writeln!(s, "user.{k}.{j}.beta = {}", fmt_c(p.beta));
        }
    }
    s
}

pub(crate) fn parse_f(v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number {v:?}")))
}

pub(crate) fn parse_c(v: &str) -> Result<C64> {
    let (re, im) = v
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("bad complex {v:?}")))?;
    Ok(C64::new(parse_f(re)?, parse_f(im)?))
}

pub(crate) fn parse_idx(v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Parse(format!("bad index {v:?}")))
}

fn slot<T: Default + Clone>(v: &mut Vec<T>, i: usize) -> &mut T {
    if v.len() <= i {
        v.resize(i + 1, T::default());
    }
    &mut v[i]
}

impl Default for RisBsPath {
    fn default() -> Self {
        RisBsPath {
            psi: 0.0,
            upsilon: 0.0,
            omega: 0.0,
            alpha: C64::new(0.0, 0.0),
        }
    }
}

impl Default for UserRisPath {
    fn default() -> Self {
        UserRisPath {
            theta: 0.0,
            varphi: 0.0,
            xi: 0.0,
            beta: C64::new(0.0, 0.0),
        }
    }
}

/// Inverse of [`dump_paths`]; rebuilds the matrices with `cfg`.
pub fn parse_paths(text: &str, cfg: &SystemConfig) -> Result<ChannelRealization> {
    let mut ris_bs: RisBsPathSet = Vec::new();
    let mut users: Vec<UserRisPathSet> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
        let parts: Vec<&str> = key.trim().split('.').collect();
        match parts.as_slice() {
            ["ris_bs", l, field] => {
                let p = slot(&mut ris_bs, parse_idx(l)?);
                match *field {
                    "psi" => p.psi = parse_f(val)?,
                    "upsilon" => p.upsilon = parse_f(val)?,
                    "omega" => p.omega = parse_f(val)?,
                    "alpha" => p.alpha = parse_c(val)?,
                    _ => return Err(Error::Parse(format!("line {}: unknown key", n + 1))),
                }
            }
            ["user", k, j, field] => {
                let u = slot(&mut users, parse_idx(k)?);
                let p = slot(u, parse_idx(j)?);
                match *field {
                    "theta" => p.theta = parse_f(val)?,
                    "varphi" => p.varphi = parse_f(val)?,
                    "xi" => p.xi = parse_f(val)?,
                    "beta" => p.beta = parse_c(val)?,
                    _ => return Err(Error::Parse(format!("line {}: unknown key", n + 1))),
                }
            }
            _ => return Err(Error::Parse(format!("line {}: unknown key {key:?}", n + 1))),
        }
    }
    ChannelRealization::from_paths(cfg, ris_bs, users)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ula_steering, upa_steering};
    use crate::linalg::{c, kron_vec, rel_err, vectorize};
    use proptest::prelude::*;

    fn small_cfg() -> SystemConfig {
        SystemConfig::uniform(4, 2, 2, 3, 3, 1, 2, 2, 2)
    }

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, cc: usize) -> CMat {
        CMat::from_fn(r, cc, |_, _| complex_normal(rng, 1.0))
    }

    #[test]
    fn determinism() {
        let cfg = SystemConfig::desk();
        let a = sample_channel(&cfg, 9, false).unwrap();
        let b = sample_channel(&cfg, 9, false).unwrap();
        assert_eq!(a.ris_bs, b.ris_bs);
        assert_eq!(a.users, b.users);
        assert_eq!(a.g[1], b.g[1]);
    }

    #[test]
    fn alpha_variance_monte_carlo() {
        let cfg = SystemConfig::desk();
        let var = cfg.alpha_variance();
        let mut rng = stream(5, &[]);
        let n = 100_000;
        let s: f64 = (0..n).map(|_| nonvanishing_gain(&mut rng, var).norm_sqr()).sum();
        let est = s / n as f64;
        assert!((est / (1e-3 * 80f64.powf(-2.2)) - 1.0).abs() < 0.05, "{est}");
    }

    #[test]
    fn on_grid_membership_and_separation() {
        let mut cfg = SystemConfig::uniform(8, 4, 4, 4, 2, 1, 1, 4, 3);
        cfg.oversample = 2;
        for seed in 0..20 {
            let ch = sample_channel(&cfg, seed, true).unwrap();
            for p in &ch.ris_bs {
                let t = p.psi * 8.0;
                assert!((t - t.round()).abs() < 1e-12 && (-4.0..=3.0).contains(&t.round()));
                assert!(((p.upsilon * 8.0) - (p.upsilon * 8.0).round()).abs() < 1e-12);
            }
            for a in 0..4 {
                for b in 0..a {
                    let d = frequency_distance(ch.ris_bs[a].psi, ch.ris_bs[b].psi);
                    assert!(d >= 1.0 / 8.0 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_path_all_ones() {
        let cfg = SystemConfig::uniform(3, 1, 2, 2, 2, 1, 1, 1, 1);
        let paths = vec![RisBsPath { alpha: c(1.0, 0.0), ..Default::default() }];
        let h = assemble_ris_bs(&paths, &cfg).unwrap();
        assert!(h.iter().all(|z| (*z - c(1.0, 0.0)).norm() < 1e-14));
        assert_eq!(h.rank(1e-9), 1);
        let up = vec![UserRisPath { beta: c(1.0, 0.0), ..Default::default() }];
        let hk = assemble_user_ris(&up, &cfg, 0).unwrap();
        assert_eq!(hk.shape(), (4, 2));
        assert!(hk.iter().all(|z| (*z - c(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn rank_one_for_single_random_path() {
        let cfg = SystemConfig::uniform(8, 1, 3, 2, 2, 1, 1, 1, 1);
        let paths = vec![RisBsPath { psi: 0.13, upsilon: -0.3, omega: 0.41, alpha: c(0.2, -1.0) }];
        assert_eq!(assemble_ris_bs(&paths, &cfg).unwrap().rank(1e-9), 1);
    }

    #[test]
    fn factored_forms_match_summed_outer_products() {
        let cfg = small_cfg();
        let ch = sample_channel(&cfg, 3, false).unwrap();
        let mut sum = CMat::zeros(cfg.n_bs, cfg.m());
        for p in &ch.ris_bs {
            let a = ula_steering(cfg.n_bs, p.psi).unwrap();
            let b = upa_steering(cfg.m1, cfg.m2, p.upsilon, p.omega).unwrap();
            sum += a * b.adjoint() * p.alpha;
        }
        assert!(rel_err(&ch.h_br, &sum) < 1e-12);

        let mut sum = CMat::zeros(cfg.m(), cfg.q[0]);
        for p in &ch.users[0] {
            let a = upa_steering(cfg.m1, cfg.m2, p.theta, p.varphi).unwrap();
            let b = ula_steering(cfg.q[0], p.xi).unwrap();
            sum += a * b.adjoint() * p.beta;
        }
        assert!(rel_err(&ch.h_users[0], &sum) < 1e-12);

        // column q = A_M·diag(β)·conj(row q of A_Q)
        let ang: Vec<(f64, f64)> = ch.users[0].iter().map(|p| (p.theta, p.varphi)).collect();
        let xi: Vec<f64> = ch.users[0].iter().map(|p| p.xi).collect();
        let a_m = upa_matrix(cfg.m1, cfg.m2, &ang).unwrap();
        let a_q = ula_matrix(cfg.q[0], &xi).unwrap();
        for q in 0..cfg.q[0] {
            let w = CVec::from_fn(xi.len(), |j, _| ch.users[0][j].beta * a_q[(q, j)].conj());
            assert!((&a_m * w - ch.h(0, q)).norm() < 1e-12 * ch.h(0, q).norm());
        }
    }

    #[test]
    fn subchannel_cases() {
        let mut rng = stream(1, &[]);
        let h_br = rand_mat(&mut rng, 2, 3);
        let ones = CMat::from_element(3, 2, c(1.0, 0.0));
        assert_eq!(cascaded_subchannel(&h_br, &ones, 1).unwrap(), h_br);
        let zeros = CMat::zeros(3, 2);
        assert_eq!(cascaded_subchannel(&h_br, &zeros, 2).unwrap(), CMat::zeros(2, 3));
        let h_k = rand_mat(&mut rng, 3, 2);
        let g = cascaded_subchannel(&h_br, &h_k, 2).unwrap();
        for n in 0..2 {
            for m in 0..3 {
                assert!((g[(n, m)] - h_br[(n, m)] * h_k[(m, 1)]).norm() < 1e-15);
            }
        }
        assert!(matches!(
            cascaded_subchannel(&h_br, &h_k, 3),
            Err(Error::IndexOutOfRange { index: 3, max: 2 })
        ));
        assert!(cascaded_subchannel(&h_br, &h_k, 0).is_err());
    }

    #[test]
    fn full_stack_blocks() {
        let mut rng = stream(2, &[]);
        let h_br = rand_mat(&mut rng, 2, 3);
        let h1 = rand_mat(&mut rng, 3, 1);
        assert_eq!(cascaded_full(&h_br, &h1).unwrap(), cascaded_subchannel(&h_br, &h1, 1).unwrap());
        let h_k = rand_mat(&mut rng, 3, 2);
        let g = cascaded_full(&h_br, &h_k).unwrap();
        for q in 1..=2 {
            let blk = g.rows((q - 1) * 2, 2).into_owned();
            assert_eq!(blk, cascaded_subchannel(&h_br, &h_k, q).unwrap());
        }
        assert!(cascaded_full(&h_br, &rand_mat(&mut rng, 2, 2)).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let cfg = small_cfg();
        let ch = sample_channel(&cfg, 11, false).unwrap();
        let text = dump_paths(&ch);
        let back = parse_paths(&text, &cfg).unwrap();
        assert_eq!(back.ris_bs, ch.ris_bs);
        assert_eq!(back.users, ch.users);
        assert_eq!(back.h_br, ch.h_br);
        assert!(parse_paths("ris_bs.0.foo = 1", &cfg).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = SystemConfig::desk();
        cfg.n_rf = 1;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = SystemConfig::desk();
        cfg.n_rf = 6;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::desk();
        cfg.j.pop();
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn khatri_rao_matches_columnwise_kronecker(
            seed in any::<u64>(), n in 1usize..=4, m in 1usize..=6, q in 1usize..=3
        ) {
            let mut rng = stream(seed, &[]);
            let h_br = rand_mat(&mut rng, n, m);
            let h_k = rand_mat(&mut rng, m, q);
            let g = cascaded_full(&h_br, &h_k).unwrap();
            let mut brute = CMat::zeros(q * n, m);
            for col in 0..m {
                let a = CVec::from_fn(q, |i, _| h_k[(col, i)]);
                let b = h_br.column(col).into_owned();
                brute.set_column(col, &kron_vec(&a, &b));
            }
            prop_assert!(rel_err(&g, &brute) < 1e-12);
        }

        #[test]
        fn vec_identity(seed in any::<u64>(), a in 1usize..4, b in 1usize..5, cc in 1usize..4) {
            let mut rng = stream(seed, &[]);
            let x = rand_mat(&mut rng, a, b);
            let y = rand_mat(&mut rng, b, cc);
            let h = CVec::from_fn(b, |_, _| complex_normal(&mut rng, 1.0));
            let lhs = vectorize(&(scale_columns(&x, &h) * &y));
            let rhs = khatri_rao(&y.transpose(), &x).unwrap() * h;
            prop_assert!((lhs - &rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }

        #[test]
        fn reconstruction_closure(seed in any::<u64>()) {
            let cfg = small_cfg();
            let ch = sample_channel(&cfg, seed, false).unwrap();
            let again = ChannelRealization::from_paths(&cfg, ch.ris_bs.clone(), ch.users.clone()).unwrap();
            prop_assert_eq!(again.h_br, ch.h_br);
            prop_assert_eq!(&again.g[0], &ch.g[0]);
        }
    }
}
