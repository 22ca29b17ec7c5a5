//! Uplink pilot forward model.
//!
//! Every slot follows `y = W·(Σ_k √p_k·H_br·diag(e)·h_{k,q}) + W·n` with
//! all-ones pilots and `n ~ CN(0, σ²·I)` drawn fresh per slot. Stage I
//! cycles through the DFT-block combiners with all users on antenna 1;
//! Stages II and III are single-user frames with one active antenna each.

use rand::Rng;

use crate::channel::{ChannelRealization, SystemConfig};
use crate::design::dft_block_combiner;
use crate::geometry::dft_matrix;
use crate::rng::{complex_normal, stream, TAG_NOISE};
use crate::{CMat, CVec, Error, Result, C64};

/// Slot budget for one user in Stage III.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserSchedule {
    pub tau_1: usize,
    pub v: usize,
    pub tau_2: usize,
}

/// Frame and slot counts for the whole protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotSchedule {
    pub v0: usize,
    pub d_slots: usize,
    pub tau_11: usize,
    pub v1: usize,
    pub tau_12: usize,
    /// Users 2..K in order.
    pub stage3: Vec<UserSchedule>,
}

impl PilotSchedule {
    /// Budget derived from measurement constant `c`:
    /// `τ₁₁ = ⌈cJ ln M⌉`, `τ₁₂ = J`, `τ_k1 = ⌈cJ ln M / L⌉`, `τ_k2 = ⌈J/L⌉`.
    /// `v` frames per user are clamped to `Q − 1`.
    pub fn from_constant(cfg: &SystemConfig, c: f64, v0: usize, v: usize) -> Self {
        let ln_m = (cfg.m() as f64).ln();
        let l = cfg.l as f64;
        let j1 = cfg.j[0] as f64;
        PilotSchedule {
            v0,
            d_slots: cfg.d_slots(),
            tau_11: ((c * j1 * ln_m).ceil() as usize).max(cfg.j[0]),
            v1: v.min(cfg.q[0].saturating_sub(1)),
            tau_12: cfg.j[0],
            stage3: (1..cfg.k())
                .map(|k| {
                    let j = cfg.j[k] as f64;
                    UserSchedule {
                        tau_1: ((c * j * ln_m / l).ceil() as usize).max(1),
                        v: v.min(cfg.q[k].saturating_sub(1)),
                        tau_2: (j / l).ceil() as usize,
                    }
                })
                .collect(),
        }
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.v0 == 0 {
            return bad("Stage I needs at least one frame".into());
        }
        if self.d_slots != cfg.d_slots() {
            return bad(format!(
                "Stage I needs {} slots per frame, schedule has {}",
                cfg.d_slots(),
                self.d_slots
            ));
        }
        if self.tau_11 < cfg.j[0] {
            return bad(format!("tau_11 = {} is below J = {}", self.tau_11, cfg.j[0]));
        }
        if self.v1 > 0 && self.tau_12 < cfg.j[0] {
            return bad(format!("tau_12 = {} is below J = {}", self.tau_12, cfg.j[0]));
        }
        if 1 + self.v1 > cfg.q[0] {
            return bad(format!("1 + V_1 = {} exceeds Q_1 = {}", 1 + self.v1, cfg.q[0]));
        }
        if self.stage3.len() + 1 != cfg.k() {
            return bad(format!(
                "{} Stage-III entries for K = {}",
                self.stage3.len(),
                cfg.k()
            ));
        }
        for (i, u) in self.stage3.iter().enumerate() {
            let k = i + 1;
            let min2 = cfg.j[k].div_ceil(cfg.l);
            if u.tau_1 == 0 {
                return bad(format!("user {}: tau_1 must be positive", k + 1));
            }
            if u.v > 0 && u.tau_2 < min2 {
                return bad(format!("user {}: tau_2 = {} is below ceil(J/L) = {min2}", k + 1, u.tau_2));
            }
            if 1 + u.v > cfg.q[k] {
                return bad(format!("user {}: 1 + V = {} exceeds Q = {}", k + 1, 1 + u.v, cfg.q[k]));
            }
        }
        Ok(())
    }

    pub fn stage1_slots(&self) -> usize {
        self.v0 * self.d_slots
    }

    pub fn stage2_slots(&self) -> usize {
        self.tau_11 + self.v1 * self.tau_12
    }

    pub fn stage3_slots(&self) -> usize {
        self.stage3.iter().map(|u| u.tau_1 + u.v * u.tau_2).sum()
    }

    /// `V₀·D + τ₁₁ + V₁·τ₁₂ + Σ_k (τ_k1 + V_k·τ_k2)`.
    pub fn total_slots(&self) -> usize {
        self.stage1_slots() + self.stage2_slots() + self.stage3_slots()
    }
}

/// One Stage-II/III frame: a combiner, a RIS matrix with one column per slot
/// and the transmitting antenna (0-based).
#[derive(Debug, Clone)]
pub struct Frame {
    pub antenna: usize,
    pub w: CMat,
    pub e: CMat,
}

/// Received pilot blocks of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// Uncompressed Stage-I block, `N_bs × V₀` (empty when Stage I was skipped).
    pub stage1: CMat,
    /// First user's frames.
    pub stage2: Vec<CMat>,
    /// Frames of users `2..K`.
    pub stage3: Vec<Vec<CMat>>,
    pub sigma2: f64,
}

fn dump_block(s: &mut String, key: &str, m: &CMat) {
    use std::fmt::Write;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let _ = writeln!(s, "{key}.{r}.{c} = {}", crate::channel::fmt_c(m[(r, c)]));
        }
    }
}

fn put(entries: &mut Vec<(usize, usize, C64)>, r: &str, c: &str, v: &str) -> Result<()> {
    use crate::channel::{parse_c, parse_idx};
    entries.push((parse_idx(r)?, parse_idx(c)?, parse_c(v)?));
    Ok(())
}

fn assemble(entries: &[(usize, usize, C64)]) -> Result<CMat> {
    let rows = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let cols = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if entries.len() != rows * cols {
        return Err(Error::Parse(format!(
            "block has {} entries, expected {rows}×{cols}",
            entries.len()
        )));
    }
    let mut m = CMat::zeros(rows, cols);
    for &(r, c, v) in entries {
        m[(r, c)] = v;
    }
    Ok(m)
}

fn frame_slot(v: &mut Vec<Vec<(usize, usize, C64)>>, i: usize) -> &mut Vec<(usize, usize, C64)> {
    if v.len() <= i {
        v.resize(i + 1, Vec::new());
    }
    &mut v[i]
}

impl MeasurementSet {
    /// `key = value` text in the channel-dump format, one matrix entry per line.
    pub fn dump(&self) -> String {
        let mut s = format!("sigma2 = {}\n", self.sigma2);
        dump_block(&mut s, "stage1", &self.stage1);
        for (i, y) in self.stage2.iter().enumerate() {
            dump_block(&mut s, &format!("stage2.{i}"), y);
        }
        for (k, frames) in self.stage3.iter().enumerate() {
            for (i, y) in frames.iter().enumerate() {
                dump_block(&mut s, &format!("stage3.{k}.{i}"), y);
            }
        }
        s
    }

    /// Inverse of [`MeasurementSet::dump`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut sigma2 = None;
        let mut s1 = Vec::new();
        let mut s2: Vec<Vec<(usize, usize, C64)>> = Vec::new();
        let mut s3: Vec<Vec<Vec<(usize, usize, C64)>>> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: unknown key", n + 1));
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            let parts: Vec<&str> = key.trim().split('.').collect();
            match parts.as_slice() {
                ["sigma2"] => sigma2 = Some(crate::channel::parse_f(val)?),
                ["stage1", r, c] => put(&mut s1, r, c, val)?,
                ["stage2", i, r, c] => {
                    let i = crate::channel::parse_idx(i)?;
                    put(frame_slot(&mut s2, i), r, c, val)?
                }
                ["stage3", k, i, r, c] => {
                    let k = crate::channel::parse_idx(k)?;
                    let i = crate::channel::parse_idx(i)?;
                    if s3.len() <= k {
                        s3.resize(k + 1, Vec::new());
                    }
                    put(frame_slot(&mut s3[k], i), r, c, val)?
                }
                _ => return Err(bad()),
            }
        }
        Ok(MeasurementSet {
            stage1: assemble(&s1)?,
            stage2: s2.iter().map(|e| assemble(e)).collect::<Result<_>>()?,
            stage3: s3
                .iter()
                .map(|u| u.iter().map(|e| assemble(e)).collect::<Result<_>>())
                .collect::<Result<_>>()?,
            sigma2: sigma2.ok_or_else(|| Error::Parse("missing sigma2".into()))?,
        })
    }

    /// Checks block shapes against the schedule. An empty Stage-I block is
    /// accepted (the oracle skips that stage).
    pub fn validate(&self, cfg: &SystemConfig, schedule: &PilotSchedule) -> Result<()> {
        let mismatch = |what: String| Err(Error::DimensionMismatch(what));
        if !self.stage1.is_empty() && self.stage1.shape() != (cfg.n_bs, schedule.v0) {
            return mismatch(format!("Stage I block is {:?}", self.stage1.shape()));
        }
        let mut want = vec![schedule.tau_11];
        want.extend(std::iter::repeat_n(schedule.tau_12, schedule.v1));
        if self.stage2.len() != want.len() {
            return mismatch(format!("{} Stage II frames, expected {}", self.stage2.len(), want.len()));
        }
        for (y, t) in self.stage2.iter().zip(&want) {
            if y.shape() != (cfg.n_rf, *t) {
                return mismatch(format!("Stage II frame is {:?}", y.shape()));
            }
        }
        if self.stage3.len() != schedule.stage3.len() {
            return mismatch(format!("{} Stage III users", self.stage3.len()));
        }
        for (frames, u) in self.stage3.iter().zip(&schedule.stage3) {
            let mut want = vec![u.tau_1];
            want.extend(std::iter::repeat_n(u.tau_2, u.v));
            if frames.len() != want.len()
                || frames.iter().zip(&want).any(|(y, t)| y.shape() != (cfg.n_rf, *t))
            {
                return mismatch("Stage III frame shapes differ from the schedule".into());
            }
        }
        Ok(())
    }
}

/// Precoder that drives only `antenna` (1-based) with power `p`.
pub fn single_antenna_precoder(q: usize, q_rf: usize, p: f64, antenna: usize) -> Result<CMat> {
    if antenna == 0 || antenna > q {
        return Err(Error::IndexOutOfRange { index: antenna, max: q });
    }
    if q_rf == 0 {
        return Err(Error::InvalidDimension("precoder without RF chains".into()));
    }
    let mut f = CMat::zeros(q, q_rf);
    f.row_mut(antenna - 1)
        .fill(C64::new(p.sqrt() / q_rf as f64, 0.0));
    Ok(f)
}

/// Noise stream for `(stage, user, frame)` under a trial's noise seed.
pub fn noise_stream(seed: u64, stage: u64, user: usize, frame: usize) -> rand_chacha::ChaCha8Rng {
    stream(seed, &[TAG_NOISE, stage, user as u64, frame as u64])
}

fn noise_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma2: f64) -> CVec {
    if sigma2 == 0.0 {
        return CVec::zeros(n);
    }
    CVec::from_fn(n, |_, _| complex_normal(rng, sigma2))
}

/// One slot with users `users[i]` transmitting from antennas `antennas[i]`
/// (0-based) at powers `powers[i]`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_slot<R: Rng + ?Sized>(
    chan: &ChannelRealization,
    users: &[usize],
    w: &CMat,
    e: &CVec,
    antennas: &[usize],
    powers: &[f64],
    sigma2: f64,
    rng: &mut R,
) -> Result<CVec> {
    let (n_bs, m) = chan.h_br.shape();
    if w.ncols() != n_bs || e.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "W is {}x{}, e has {} entries for a {n_bs}x{m} channel",
            w.nrows(),
            w.ncols(),
            e.len()
        )));
    }
    if antennas.len() != users.len() || powers.len() != users.len() {
        return Err(Error::DimensionMismatch("per-user slot arguments differ in length".into()));
    }
    let mut ris = CVec::zeros(m);
    for ((&k, &q), &p) in users.iter().zip(antennas).zip(powers) {
        if k >= chan.h_users.len() {
            return Err(Error::IndexOutOfRange { index: k + 1, max: chan.h_users.len() });
        }
        if q >= chan.h_users[k].ncols() {
            return Err(Error::IndexOutOfRange { index: q + 1, max: chan.h_users[k].ncols() });
        }
        ris += chan.h_users[k].column(q).component_mul(e) * C64::new(p.sqrt(), 0.0);
    }
    let rx = &chan.h_br * ris + noise_vec(rng, n_bs, sigma2);
    Ok(w * rx)
}

/// A single-user frame: one slot per column of `frame.e`.
pub fn simulate_frame<R: Rng + ?Sized>(
    chan: &ChannelRealization,
    user: usize,
    frame: &Frame,
    power: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<CMat> {
    let (n_bs, m) = chan.h_br.shape();
    if user >= chan.h_users.len() {
        return Err(Error::IndexOutOfRange { index: user + 1, max: chan.h_users.len() });
    }
    let h = &chan.h_users[user];
    if frame.antenna >= h.ncols() {
        return Err(Error::IndexOutOfRange { index: frame.antenna + 1, max: h.ncols() });
    }
    if frame.w.ncols() != n_bs || frame.e.nrows() != m {
        return Err(Error::DimensionMismatch(format!(
            "frame W is {}x{}, E is {}x{} for a {n_bs}x{m} channel",
            frame.w.nrows(),
            frame.w.ncols(),
            frame.e.nrows(),
            frame.e.ncols()
        )));
    }
    // H_br·diag(h_q)·E
    let mut he = frame.e.clone();
    for (i, mut row) in he.row_iter_mut().enumerate() {
        row *= h[(i, frame.antenna)];
    }
    let mut rx = &chan.h_br * he * C64::new(power.sqrt(), 0.0);
    for mut col in rx.column_iter_mut() {
        col += noise_vec(rng, n_bs, sigma2);
    }
    Ok(&frame.w * rx)
}

/// Stage I: `V₀` frames of `D` slots, all users on antenna 1, RIS vector
/// `e0[:, i]` held fixed within frame `i`. Returns the uncompressed
/// `N_bs × V₀` block `(1/N_bs)·Ūᴴ·y_i`.
pub fn run_stage1(
    chan: &ChannelRealization,
    cfg: &SystemConfig,
    schedule: &PilotSchedule,
    e0: &CMat,
    sigma2: f64,
    seed: u64,
) -> Result<CMat> {
    if !cfg.n_bs.is_multiple_of(cfg.n_rf) {
        return Err(Error::Config(format!(
            "n_bs = {} is not a multiple of n_rf = {}",
            cfg.n_bs, cfg.n_rf
        )));
    }
    if e0.ncols() != schedule.v0 || schedule.v0 == 0 {
        return Err(Error::DimensionMismatch(format!(
            "Stage I has {} frames but E0 has {} columns",
            schedule.v0,
            e0.ncols()
        )));
    }
    let d_slots = cfg.d_slots();
    let combiners: Vec<CMat> = (1..=d_slots)
        .map(|d| dft_block_combiner(d, cfg.n_rf, cfg.n_bs))
        .collect::<Result<_>>()?;
    let u_h = dft_matrix(cfg.n_bs)?.adjoint() / C64::new(cfg.n_bs as f64, 0.0);
    let users: Vec<usize> = (0..cfg.k()).collect();
    let antennas = vec![0; cfg.k()];
    let mut out = CMat::zeros(cfg.n_bs, schedule.v0);
    for i in 0..schedule.v0 {
        let e = e0.column(i).into_owned();
        let mut rng = noise_stream(seed, 1, 0, i);
        let mut y = CVec::zeros(cfg.n_bs);
        for (d, w) in combiners.iter().enumerate() {
            let slot = simulate_slot(chan, &users, w, &e, &antennas, &cfg.power, sigma2, &mut rng)?;
            y.rows_mut(d * cfg.n_rf, cfg.n_rf).copy_from(&slot);
        }
        out.set_column(i, &(&u_h * y));
    }
    Ok(out)
}

/// Simulates `frames` of one user; frame `i` is the `(first + i)`-th frame of
/// the stage and draws noise from the matching stream.
#[allow(clippy::too_many_arguments)]
pub fn run_frames(
    chan: &ChannelRealization,
    cfg: &SystemConfig,
    stage: u64,
    user: usize,
    first: usize,
    frames: &[Frame],
    sigma2: f64,
    seed: u64,
) -> Result<Vec<CMat>> {
    if user >= cfg.k() {
        return Err(Error::IndexOutOfRange { index: user + 1, max: cfg.k() });
    }
    if first + frames.len() > cfg.q[user] {
        return Err(Error::Config(format!(
            "{} frames for user {} with {} antennas",
            first + frames.len(),
            user + 1,
            cfg.q[user]
        )));
    }
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut rng = noise_stream(seed, stage, user, first + i);
            simulate_frame(chan, user, f, cfg.power[user], sigma2, &mut rng)
        })
        .collect()
}

/// Stage II frames of user 1 (index 0).
pub fn run_stage2(
    chan: &ChannelRealization,
    cfg: &SystemConfig,
    frames: &[Frame],
    sigma2: f64,
    seed: u64,
) -> Result<Vec<CMat>> {
    run_frames(chan, cfg, 2, 0, 0, frames, sigma2, seed)
}

/// Stage III frames of user `user` (0-based, at least 1).
pub fn run_stage3(
    chan: &ChannelRealization,
    cfg: &SystemConfig,
    user: usize,
    frames: &[Frame],
    sigma2: f64,
    seed: u64,
) -> Result<Vec<CMat>> {
    if user == 0 {
        return Err(Error::IndexOutOfRange { index: 1, max: cfg.k() });
    }
    run_frames(chan, cfg, 3, user, 0, frames, sigma2, seed)
}

/// Frames of a sub-stage-II sweep: antennas `1..=count` (0-based `first..`)
/// sharing one combiner and RIS matrix.
pub fn frames_for_antennas(first: usize, count: usize, w: &CMat, e: &CMat) -> Vec<Frame> {
    (first..first + count)
        .map(|antenna| Frame {
            antenna,
            w: w.clone(),
            e: e.clone(),
        })
        .collect()
}
