//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # desk-scale SNR sweep
//! system.n_bs = 32
//! system.q = 8          # scalar broadcasts to every user
//! system.j = 2, 3       # or one value per user
//! sweep.axis = snr_db
//! sweep.values = -10, 0, 10, 20
//! experiment.methods = proposed, oracle
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::channel::SystemConfig;
use crate::estimator::Method;
use crate::protocol::PilotSchedule;
use crate::{Error, Result};

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", no + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {k}", no + 1)));
        }
    }
    Ok(out)
}

/// The swept parameter and its values.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    SnrDb(Vec<f64>),
    /// Antenna count of every user.
    Q(Vec<usize>),
    NRf(Vec<usize>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::SnrDb(_) => "snr_db",
            Sweep::Q(_) => "q",
            Sweep::NRf(_) => "n_rf",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::SnrDb(v) => v.len(),
            Sweep::Q(v) => v.len(),
            Sweep::NRf(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        match self {
            Sweep::SnrDb(v) => v[i],
            Sweep::Q(v) => v[i] as f64,
            Sweep::NRf(v) => v[i] as f64,
        }
    }
}

/// Pilot budget knobs. Unset `tau_*` fields fall back to the values
/// implied by the measurement constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOverrides {
    pub measurement_constant: f64,
    pub v0: usize,
    /// Frames after the first one, per user (clamped to `Q − 1`).
    pub v: usize,
    pub tau_11: Option<usize>,
    pub tau_12: Option<usize>,
    pub tau_k1: Option<usize>,
    pub tau_k2: Option<usize>,
}

impl Default for ScheduleOverrides {
    fn default() -> Self {
        ScheduleOverrides {
            measurement_constant: 1.0,
            v0: 2,
            v: 3,
            tau_11: None,
            tau_12: None,
            tau_k1: None,
            tau_k2: None,
        }
    }
}

impl ScheduleOverrides {
    pub fn schedule(&self, cfg: &SystemConfig) -> PilotSchedule {
        let mut s = PilotSchedule::from_constant(cfg, self.measurement_constant, self.v0, self.v);
        if let Some(t) = self.tau_11 {
            s.tau_11 = t;
        }
        if let Some(t) = self.tau_12 {
            s.tau_12 = t;
        }
        for u in &mut s.stage3 {
            if let Some(t) = self.tau_k1 {
                u.tau_1 = t;
            }
            if let Some(t) = self.tau_k2 {
                u.tau_2 = t;
            }
        }
        s
    }
}

/// A complete Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub schedule: ScheduleOverrides,
    pub sweep: Sweep,
    /// SNR used when the sweep axis is not SNR. `inf` means noiseless.
    pub snr_db: f64,
    pub on_grid: bool,
    pub trials: usize,
    /// Index of the first trial; lets a long run be split into chunks.
    pub first_trial: u64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub output: Option<PathBuf>,
}

/// One resolved sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub system: SystemConfig,
    pub schedule: PilotSchedule,
    pub snr_db: f64,
}

impl ExperimentSpec {
    /// Desk-scale SNR sweep of the proposed estimator against the oracle,
    /// with measurement constant 2.
    pub fn desk() -> Self {
        ExperimentSpec {
            system: SystemConfig::desk(),
            schedule: ScheduleOverrides {
                measurement_constant: 2.0,
                ..ScheduleOverrides::default()
            },
            sweep: Sweep::SnrDb(vec![-10.0, 0.0, 10.0, 20.0]),
            snr_db: f64::INFINITY,
            on_grid: true,
            trials: 200,
            first_trial: 0,
            seed: 1,
            methods: vec![Method::Proposed, Method::Oracle],
            output: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        text.parse()
    }

    pub fn point(&self, i: usize) -> Result<SweepPoint> {
        let mut system = self.system.clone();
        let mut snr_db = self.snr_db;
        match &self.sweep {
            Sweep::SnrDb(v) => snr_db = v[i],
            Sweep::Q(v) => system.q = vec![v[i]; system.k()],
            Sweep::NRf(v) => system.n_rf = v[i],
        }
        let schedule = self.schedule.schedule(&system);
        Ok(SweepPoint {
            value: self.sweep.value(i),
            system,
            schedule,
            snr_db,
        })
    }

    /// Checks every sweep point before anything runs.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep.is_empty() {
            return Err(Error::Config("sweep has no values".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if !(self.schedule.measurement_constant > 0.0) {
            return Err(Error::Config("measurement constant must be positive".into()));
        }
        for i in 0..self.sweep.len() {
            let p = self.point(i)?;
            let ctx = |e: Error| Error::Config(format!("{} = {}: {e}", self.sweep.name(), p.value));
            p.system.validate().map_err(ctx)?;
            p.schedule.validate(&p.system).map_err(ctx)?;
            if p.snr_db.is_nan() || p.snr_db == f64::NEG_INFINITY {
                return Err(ctx(Error::Config("SNR must be a number or inf".into())));
            }
        }
        Ok(())
    }
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| parse_one(key, x)).collect()
}

/// Scalar broadcasts to `k` users; a list must have exactly `k` entries.
fn per_user<T: std::str::FromStr + Clone>(key: &str, v: &str, k: usize) -> Result<Vec<T>> {
    let vals: Vec<T> = parse_list(key, v)?;
    match vals.len() {
        1 => Ok(vec![vals[0].clone(); k]),
        n if n == k => Ok(vals),
        n => Err(Error::Config(format!("{key}: {n} values for {k} users"))),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

impl std::str::FromStr for ExperimentSpec {
    type Err = Error;

    /// Missing keys keep the values of [`ExperimentSpec::desk`]; unknown
    /// keys are rejected.
    fn from_str(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let mut spec = ExperimentSpec::desk();
        let k: usize = match kv.get("system.k") {
            Some(v) => parse_one("system.k", v)?,
            None => spec.system.k(),
        };
        if k == 0 {
            return Err(Error::Config("system.k must be at least 1".into()));
        }
        let sys = &mut spec.system;
        sys.q = vec![sys.q[0]; k];
        sys.q_rf = vec![sys.q_rf[0]; k];
        sys.j = vec![sys.j[0]; k];
        sys.power = vec![sys.power[0]; k];
        let mut axis: Option<String> = None;
        let mut values: Option<String> = None;

        for (key, v) in &kv {
            let key = key.as_str();
            let v = v.as_str();
            let sys = &mut spec.system;
            let sch = &mut spec.schedule;
            match key {
                "system.k" => {}
                "system.n_bs" => sys.n_bs = parse_one(key, v)?,
                "system.n_rf" => sys.n_rf = parse_one(key, v)?,
                "system.m1" => sys.m1 = parse_one(key, v)?,
                "system.m2" => sys.m2 = parse_one(key, v)?,
                "system.l" => sys.l = parse_one(key, v)?,
                "system.q" => sys.q = per_user(key, v, k)?,
                "system.q_rf" => sys.q_rf = per_user(key, v, k)?,
                "system.j" => sys.j = per_user(key, v, k)?,
                "system.power" => sys.power = per_user(key, v, k)?,
                "system.d_br" => sys.d_br = parse_one(key, v)?,
                "system.d_ru" => sys.d_ru = parse_one(key, v)?,
                "system.oversample" => sys.oversample = parse_one(key, v)?,
                "channel.on_grid" => spec.on_grid = parse_bool(key, v)?,
                "schedule.measurement_constant" => sch.measurement_constant = parse_one(key, v)?,
                "schedule.v0" => sch.v0 = parse_one(key, v)?,
                "schedule.v" => sch.v = parse_one(key, v)?,
                "schedule.tau_11" => sch.tau_11 = Some(parse_one(key, v)?),
                "schedule.tau_12" => sch.tau_12 = Some(parse_one(key, v)?),
                "schedule.tau_k1" => sch.tau_k1 = Some(parse_one(key, v)?),
                "schedule.tau_k2" => sch.tau_k2 = Some(parse_one(key, v)?),
                "experiment.trials" => spec.trials = parse_one(key, v)?,
                "experiment.first_trial" => spec.first_trial = parse_one(key, v)?,
                "experiment.seed" => spec.seed = parse_one(key, v)?,
                "experiment.snr_db" => spec.snr_db = parse_one(key, v)?,
                "experiment.methods" => spec.methods = parse_list(key, v)?,
                "experiment.output" => spec.output = Some(PathBuf::from(v)),
                "sweep.axis" => axis = Some(v.to_string()),
                "sweep.values" => values = Some(v.to_string()),
                _ => return Err(Error::Config(format!("unknown key {key}"))),
            }
        }

        let axis = axis.unwrap_or_else(|| "snr_db".into());
        if let Some(values) = values {
            spec.sweep = match axis.as_str() {
                "snr_db" => Sweep::SnrDb(parse_list("sweep.values", &values)?),
                "q" => Sweep::Q(parse_list("sweep.values", &values)?),
                "n_rf" => Sweep::NRf(parse_list("sweep.values", &values)?),
                other => return Err(Error::Config(format!("unknown sweep axis {other:?}"))),
            };
        } else if axis != "snr_db" {
            return Err(Error::Config(format!("sweep.axis = {axis} needs sweep.values")));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let kv = parse_key_values("# header\n\nsystem.n_bs = 16 # inline\n  a.b=c \n").unwrap();
        assert_eq!(kv.len(), 2);
        assert_eq!(kv["system.n_bs"], "16");
        assert_eq!(kv["a.b"], "c");
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let e = parse_key_values("a = 1\nnonsense\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(parse_key_values("a = 1\na = 2").is_err());
        assert!(parse_key_values("a =").is_err());
    }

    #[test]
    fn empty_text_gives_desk_defaults() {
        let spec: ExperimentSpec = "".parse().unwrap();
        assert_eq!(spec, ExperimentSpec::desk());
        spec.validate().unwrap();
    }

    #[test]
    fn scalars_broadcast_and_lists_are_per_user() {
        let spec: ExperimentSpec = "system.k = 3\nsystem.q = 4\nsystem.j = 1, 2, 2\n"
            .parse()
            .unwrap();
        assert_eq!(spec.system.q, vec![4, 4, 4]);
        assert_eq!(spec.system.j, vec![1, 2, 2]);
        assert_eq!(spec.system.power.len(), 3);
        assert!("system.k = 3\nsystem.j = 1, 2".parse::<ExperimentSpec>().is_err());
    }

    #[test]
    fn sweep_axes() {
        let spec: ExperimentSpec = "sweep.axis = q\nsweep.values = 4, 16\nexperiment.snr_db = inf"
            .parse()
            .unwrap();
        assert_eq!(spec.sweep, Sweep::Q(vec![4, 16]));
        let p = spec.point(1).unwrap();
        assert_eq!(p.system.q, vec![16, 16]);
        assert_eq!(p.snr_db, f64::INFINITY);
        assert!("sweep.axis = q".parse::<ExperimentSpec>().is_err());
        assert!("sweep.axis = m\nsweep.values = 1".parse::<ExperimentSpec>().is_err());
    }

    #[test]
    fn unknown_keys_and_methods_rejected() {
        assert!("system.nbs = 4".parse::<ExperimentSpec>().is_err());
        assert!("experiment.methods = proposed, magic".parse::<ExperimentSpec>().is_err());
        let spec: ExperimentSpec = "experiment.methods = oracle, random_e".parse().unwrap();
        assert_eq!(spec.methods, vec![Method::Oracle, Method::RandomE]);
    }

    #[test]
    fn validation_catches_inconsistent_points() {
        let mut spec = ExperimentSpec::desk();
        spec.sweep = Sweep::NRf(vec![8, 5]);
        let e = spec.validate().unwrap_err();
        assert!(e.to_string().contains("n_rf = 5"), "{e}");
        spec.sweep = Sweep::NRf(vec![8]);
        spec.trials = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn schedule_overrides_apply() {
        let o = ScheduleOverrides {
            tau_k2: Some(3),
            tau_11: Some(20),
            ..Default::default()
        };
        let s = o.schedule(&SystemConfig::desk());
        assert_eq!(s.tau_11, 20);
        assert_eq!(s.stage3[0].tau_2, 3);
    }
}
