//! Quick noiseless checks run by `chanest selftest`.

use super::{run_trial, ExperimentSpec, Sweep};
use crate::channel::{cascaded_full, cascaded_subchannel, sample_channel, SystemConfig};
use crate::estimator::Method;
use crate::linalg::rel_err;
use crate::metrics::{min_pilot_overhead, Architecture};

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestCase {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn case(name: &str, passed: bool, detail: String) -> SelftestCase {
    SelftestCase {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Noiseless on-grid desk trials of the oracle and the full pipeline, plus
/// structural checks of the channel model and overhead budget.
pub fn selftest() -> Vec<SelftestCase> {
    let mut out = Vec::new();
    let cfg = SystemConfig::desk();

    let structure = sample_channel(&cfg, 11, false).and_then(|ch| {
        let full = cascaded_full(&ch.h_br, &ch.h_users[0])?;
        let mut worst: f64 = 0.0;
        for q in 1..=cfg.q[0] {
            let sub = cascaded_subchannel(&ch.h_br, &ch.h_users[0], q)?;
            let rows = full.rows((q - 1) * cfg.n_bs, cfg.n_bs).into_owned();
            worst = worst.max(rel_err(&rows, &sub));
        }
        Ok(worst)
    });
    out.push(match structure {
        Ok(e) => case("khatri_rao_blocks", e < 1e-12, format!("max relative error {e:e}")),
        Err(e) => case("khatri_rao_blocks", false, e.to_string()),
    });

    let hyb = min_pilot_overhead(&cfg, Architecture::Hybrid, 1.0);
    let dig = min_pilot_overhead(&cfg, Architecture::FullyDigital, 1.0);
    out.push(case(
        "overhead_hybrid_minus_digital",
        hyb.total - dig.total == cfg.d_slots(),
        format!("hybrid {} digital {} D {}", hyb.total, dig.total, cfg.d_slots()),
    ));

    let mut spec = ExperimentSpec::desk();
    spec.sweep = Sweep::SnrDb(vec![f64::INFINITY]);
    spec.methods = vec![Method::Oracle, Method::Proposed];
    let point = spec.point(0).expect("desk point");
    for trial in 0..3u64 {
        let res = run_trial(&spec, 0, &point, trial);
        for (m, r) in spec.methods.iter().zip(res) {
            let name = format!("noiseless_{}_trial_{trial}", m.name());
            out.push(match r {
                Some(e) => case(&name, e < 1e-5, format!("nmse {e:e}")),
                None => case(&name, false, "estimation failed".into()),
            });
        }
    }
    out
}
