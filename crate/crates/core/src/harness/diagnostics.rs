//! Plain-text per-trial diagnostics.

use std::fmt::Write;

use crate::channel::ChannelRealization;
use crate::estimator::PipelineOutput;
use crate::geometry::frequency_distance;

/// `key = value` lines describing one pipeline run. When the true channel is
/// given, each AoD estimate is paired with the nearest true AoD of its user.
pub fn diagnostics_record(out: &PipelineOutput, truth: Option<&ChannelRealization>) -> String {
    let mut s = String::new();
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    let _ = writeln!(s, "psi_hat = {}", list(&out.aoa.psi_hat));
    if let Some(d) = &out.decomposition {
        let _ = writeln!(s, "typical_path = {}", d.r + 1);
        let _ = writeln!(
            s,
            "typical_support = {}",
            d.support.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        );
    }
    let _ = writeln!(s, "pilot_overhead = {}", out.overhead);
    for u in &out.users {
        let k = u.user + 1;
        let d = &u.diagnostics;
        let _ = writeln!(s, "user.{k}.omp_residual = {}", d.omp_residual);
        let _ = writeln!(s, "user.{k}.regularized = {}", d.regularized);
        let _ = writeln!(s, "user.{k}.cond_projection = {}", d.cond_projection);
        if let Some(c) = d.cond_ls {
            let _ = writeln!(s, "user.{k}.cond_ls = {c}");
        }
        if !d.guarded_paths.is_empty() {
            let g: Vec<String> = d.guarded_paths.iter().map(|p| (p + 1).to_string()).collect();
            let _ = writeln!(s, "user.{k}.guarded_paths = {}", g.join(", "));
        }
        let _ = writeln!(s, "user.{k}.xi_hat = {}", list(&u.xi_hat));
        if let Some(ch) = truth {
            let errs: Vec<f64> = u
                .xi_hat
                .iter()
                .map(|&x| {
                    ch.users[u.user]
                        .iter()
                        .map(|p| frequency_distance(x, p.xi))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let _ = writeln!(s, "user.{k}.xi_error = {}", list(&errs));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, SystemConfig};
    use crate::estimator::{run_three_stage, Method};
    use crate::protocol::PilotSchedule;

    #[test]
    fn record_lists_every_user() {
        let cfg = SystemConfig::desk();
        let sched = PilotSchedule::from_constant(&cfg, 2.0, 2, 3);
        let ch = sample_channel(&cfg, 3, true).unwrap();
        let out = run_three_stage(&ch, &cfg, &sched, 0.0, 3, Method::Proposed).unwrap();
        let rec = diagnostics_record(&out, Some(&ch));
        assert!(rec.contains("typical_path = "));
        for k in 1..=2 {
            let line = rec
                .lines()
                .find(|l| l.starts_with(&format!("user.{k}.xi_error")))
                .unwrap();
            for e in line.split('=').nth(1).unwrap().split(',') {
                assert!(e.trim().parse::<f64>().unwrap() < 1e-4, "{line}");
            }
        }
    }
}
