//! Monte-Carlo experiment runner and CSV output.

pub mod config;
pub mod diagnostics;
pub mod selftest;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

pub use config::{parse_key_values, ExperimentSpec, ScheduleOverrides, Sweep, SweepPoint};
pub use diagnostics::diagnostics_record;
pub use selftest::{selftest, SelftestCase};

use crate::channel::{sample_channel, ChannelRealization};
use crate::estimator::{run_three_stage, Method};
use crate::metrics::{nmse, noise_variance_from_snr};
use crate::protocol::PilotSchedule;
use crate::rng::{derive_seed, TAG_CHANNEL, TAG_NOISE};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "method",
    "sweep_name",
    "sweep_value",
    "trials",
    "failures",
    "nmse_mean",
    "nmse_median",
    "nmse_p10",
    "nmse_p90",
    "pilot_overhead",
];

/// Aggregate of one (method, sweep value) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub sweep_name: String,
    pub sweep_value: f64,
    pub trials: usize,
    /// Trials whose estimator returned an error; excluded from the NMSE columns.
    pub failures: usize,
    pub nmse_mean: f64,
    pub nmse_median: f64,
    pub nmse_p10: f64,
    pub nmse_p90: f64,
    pub pilot_overhead: usize,
}

impl ResultRow {
    /// Aggregates per-trial outcomes; `None` marks a failed trial.
    pub fn aggregate(
        method: Method,
        sweep_name: &str,
        sweep_value: f64,
        outcomes: &[Option<f64>],
        pilot_overhead: usize,
    ) -> Self {
        let mut ok: Vec<f64> = outcomes.iter().flatten().copied().collect();
        ok.sort_by(f64::total_cmp);
        let mean = if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().sum::<f64>() / ok.len() as f64
        };
        ResultRow {
            method,
            sweep_name: sweep_name.to_string(),
            sweep_value,
            trials: outcomes.len(),
            failures: outcomes.len() - ok.len(),
            nmse_mean: mean,
            nmse_median: percentile(&ok, 0.5),
            nmse_p10: percentile(&ok, 0.1),
            nmse_p90: percentile(&ok, 0.9),
            pilot_overhead,
        }
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }
}

/// Linearly interpolated percentile of sorted data (`p` in `[0, 1]`).
/// NaN for empty input.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let t = pos - lo as f64;
            sorted[lo] + t * (sorted[hi] - sorted[lo])
        }
    }
}

/// Pilot slots a method consumes under `schedule`. The oracle knows the
/// common AoAs and skips Stage I.
pub fn method_overhead(method: Method, schedule: &PilotSchedule) -> usize {
    match method {
        Method::Oracle => schedule.total_slots() - schedule.stage1_slots(),
        _ => schedule.total_slots(),
    }
}

/// Channel, noise variance and estimator seed of one trial.
///
/// The channel depends only on the master seed and trial index; designs and
/// noise additionally on the sweep index. All methods share them.
pub fn trial_inputs(
    spec: &ExperimentSpec,
    point_index: usize,
    point: &SweepPoint,
    trial: u64,
) -> Result<(ChannelRealization, f64, u64)> {
    let chan_seed = derive_seed(spec.seed, &[TAG_CHANNEL, trial]);
    let run_seed = derive_seed(spec.seed, &[TAG_NOISE, point_index as u64, trial]);
    let sys = &point.system;
    let sigma2 = noise_variance_from_snr(point.snr_db, sys.power[0], sys.d_br, sys.d_ru);
    let chan = sample_channel(sys, chan_seed, spec.on_grid)?;
    Ok((chan, sigma2, run_seed))
}

/// Per-trial NMSE of every method at one sweep point (`None` on failure).
pub fn run_trial(
    spec: &ExperimentSpec,
    point_index: usize,
    point: &SweepPoint,
    trial: u64,
) -> Vec<Option<f64>> {
    let Ok((chan, sigma2, seed)) = trial_inputs(spec, point_index, point, trial) else {
        return vec![None; spec.methods.len()];
    };
    spec.methods
        .iter()
        .map(|&m| {
            run_three_stage(&chan, &point.system, &point.schedule, sigma2, seed, m)
                .and_then(|out| nmse(&out.g_hat(), &chan.g))
                .ok()
                .filter(|e| e.is_finite())
        })
        .collect()
}

/// Runs every (sweep point, trial) pair in parallel and reduces in
/// (method, sweep, trial) order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let points: Vec<SweepPoint> = (0..spec.sweep.len())
        .map(|i| spec.point(i))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..spec.trials as u64).map(move |t| (p, spec.first_trial + t)))
        .collect();
    let outcomes: Vec<Vec<Option<f64>>> = jobs
        .par_iter()
        .map(|&(p, t)| run_trial(spec, p, &points[p], t))
        .collect();

    let mut rows = Vec::new();
    for (mi, &method) in spec.methods.iter().enumerate() {
        for (p, point) in points.iter().enumerate() {
            let cell: Vec<Option<f64>> = outcomes[p * spec.trials..(p + 1) * spec.trials]
                .iter()
                .map(|o| o[mi])
                .collect();
            rows.push(ResultRow::aggregate(
                method,
                spec.sweep.name(),
                point.value,
                &cell,
                method_overhead(method, &point.schedule),
            ));
        }
    }
    Ok(rows)
}

fn io_err(path: &Path, e: impl ToString) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Serializes rows as CSV text (LF line endings, shortest round-trip floats).
pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.sweep_name.clone(),
            r.sweep_value.to_string(),
            r.trials.to_string(),
            r.failures.to_string(),
            r.nmse_mean.to_string(),
            r.nmse_median.to_string(),
            r.nmse_p10.to_string(),
            r.nmse_p90.to_string(),
            r.pilot_overhead.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(csv_string(rows).as_bytes())
        .map_err(|e| io_err(path, e))
}

pub fn parse_csv_str(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<f64> {
            field(j)
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad {} {:?}", i + 1, CSV_HEADER[j], field(j))))
        };
        let int = |j: usize| -> Result<usize> {
            field(j)
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad {} {:?}", i + 1, CSV_HEADER[j], field(j))))
        };
        rows.push(ResultRow {
            method: field(0).parse().map_err(|e: Error| Error::Parse(e.to_string()))?,
            sweep_name: field(1).to_string(),
            sweep_value: num(2)?,
            trials: int(3)?,
            failures: int(4)?,
            nmse_mean: num(5)?,
            nmse_median: num(6)?,
            nmse_p10: num(7)?,
            nmse_p90: num(8)?,
            pilot_overhead: int(9)?,
        });
    }
    Ok(rows)
}

pub fn parse_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(method: Method, v: f64, outcomes: &[Option<f64>]) -> ResultRow {
        ResultRow::aggregate(method, "snr_db", v, outcomes, 17)
    }

    /// Bit-level comparison so NaN cells compare equal.
    fn same(a: &ResultRow, b: &ResultRow) -> bool {
        let f = |r: &ResultRow| {
            [r.sweep_value, r.nmse_mean, r.nmse_median, r.nmse_p10, r.nmse_p90].map(f64::to_bits)
        };
        a.method == b.method
            && a.sweep_name == b.sweep_name
            && a.trials == b.trials
            && a.failures == b.failures
            && a.pilot_overhead == b.pilot_overhead
            && f(a) == f(b)
    }

    #[test]
    fn percentile_examples() {
        let d = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&d, 0.5), 3.0);
        assert_eq!(percentile(&d, 0.1), 1.4);
        assert!((percentile(&d, 0.9) - 4.6).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 0.9), 7.0);
        assert!(percentile(&[], 0.5).is_nan());
    }

    #[test]
    fn failures_are_excluded() {
        let r = row(Method::Proposed, 0.0, &[Some(1.0), None, Some(3.0)]);
        assert_eq!((r.trials, r.failures), (3, 1));
        assert_eq!(r.nmse_mean, 2.0);
        let all_failed = row(Method::Proposed, 0.0, &[None, None]);
        assert_eq!(all_failed.failures, 2);
        assert!(all_failed.nmse_median.is_nan());
    }

    #[test]
    fn empty_rows_give_header_only() {
        assert_eq!(csv_string(&[]), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn one_row_gives_two_lines() {
        let s = csv_string(&[row(Method::Oracle, -10.0, &[Some(0.25)])]);
        assert_eq!(s.lines().count(), 2);
        assert!(!s.contains('\r'));
        assert_eq!(s.lines().nth(1).unwrap(), "oracle,snr_db,-10,1,0,0.25,0.25,0.25,0.25,17");
    }

    #[test]
    fn all_failed_row_round_trips() {
        let r = row(Method::RandomE, 20.0, &[None]);
        let back = parse_csv_str(&csv_string(std::slice::from_ref(&r))).unwrap();
        assert!(same(&r, &back[0]));
    }

    #[test]
    fn file_round_trip_and_io_context() {
        let dir = std::env::temp_dir().join(format!("chanest-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rows.csv");
        let rows = vec![row(Method::Proposed, 0.0, &[Some(1e-3), Some(2e-3)])];
        emit_csv(&rows, &path).unwrap();
        assert_eq!(parse_csv(&path).unwrap(), rows);
        std::fs::remove_dir_all(&dir).unwrap();
        let missing = dir.join("nope").join("x.csv");
        let e = emit_csv(&rows, &missing).unwrap_err();
        assert!(e.to_string().contains("x.csv"), "{e}");
    }

    #[test]
    fn bad_header_rejected() {
        assert!(parse_csv_str("a,b\n1,2\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            vals in proptest::collection::vec(
                (0usize..6, -50.0f64..50.0, proptest::collection::vec(
                    proptest::option::of(1e-20f64..1e3), 1..8)),
                0..6),
        ) {
            let rows: Vec<ResultRow> = vals
                .iter()
                .map(|(m, v, o)| row(Method::ALL[*m], *v, o))
                .collect();
            let back = parse_csv_str(&csv_string(&rows)).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in rows.iter().zip(&back) {
                prop_assert!(same(a, b), "{:?} vs {:?}", a, b);
            }
        }

        #[test]
        fn percentiles_are_ordered(
            o in proptest::collection::vec(proptest::option::of(0.0f64..10.0), 1..40),
        ) {
            let r = row(Method::Proposed, 0.0, &o);
            prop_assert_eq!(r.failures + o.iter().flatten().count(), r.trials);
            if r.failures < r.trials {
                prop_assert!(r.nmse_p10 <= r.nmse_median && r.nmse_median <= r.nmse_p90);
            }
        }
    }
}
