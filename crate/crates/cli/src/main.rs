use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chanest_core::estimator::{run_three_stage, Method};
use chanest_core::harness::{
    csv_string, diagnostics_record, emit_csv, run_experiment, selftest, trial_inputs, ExperimentSpec,
    Sweep,
};
use chanest_core::metrics::{min_pilot_overhead, nmse, Architecture, OverheadReport};

const EXIT_CONFIG: u8 = 1;
const EXIT_FAIL_RATE: u8 = 2;

#[derive(Parser)]
#[command(name = "chanest", version, about = "Cascaded channel estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated SNR values in dB; replaces the sweep.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Output CSV path; stdout when neither this nor the config sets one.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 2 if any row fails more often than this.
        #[arg(long, default_value_t = 0.5)]
        max_fail_rate: f64,
    },
    /// Print the pilot-overhead budget of a configuration.
    Overhead {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in noiseless checks.
    Selftest,
    /// Print the diagnostics record of one trial at the first sweep point.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long, default_value = "proposed")]
        method: String,
        /// Also write the received pilot blocks to this file.
        #[arg(long)]
        measurements: Option<PathBuf>,
    },
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn print_report(label: &str, r: &OverheadReport) {
    println!(
        "{label:<28} stage1 {:>5}  stage2 {:>5}  stage3 {:>5}  total {:>6}",
        r.stage1, r.stage2, r.stage3, r.total
    );
}

fn diagnose(
    spec: &ExperimentSpec,
    trial: u64,
    method: Method,
    measurements: Option<&PathBuf>,
) -> chanest_core::Result<String> {
    let point = spec.point(0)?;
    let (chan, sigma2, seed) = trial_inputs(spec, 0, &point, trial)?;
    let out = run_three_stage(&chan, &point.system, &point.schedule, sigma2, seed, method)?;
    let g = out.g_hat();
    let err = nmse(&g, &chan.g)?;
    if let Some(path) = measurements {
        std::fs::write(path, out.measurements.dump()).map_err(|e| chanest_core::Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(format!(
        "{} = {}\ntrial = {trial}\nmethod = {method}\nnmse = {err}\n{}",
        spec.sweep.name(),
        point.value,
        diagnostics_record(&out, Some(&chan))
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            snr,
            trials,
            seed,
            methods,
            out,
            max_fail_rate,
        } => {
            let mut spec = match ExperimentSpec::from_file(&config) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            if let Some(snr) = snr {
                spec.sweep = Sweep::SnrDb(snr);
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(ms) = methods {
                match ms.iter().map(|m| m.parse::<Method>()).collect() {
                    Ok(ms) => spec.methods = ms,
                    Err(e) => return config_error(e),
                }
            }
            if let Some(o) = out {
                spec.output = Some(o);
            }
            if let Err(e) = spec.validate() {
                return config_error(e);
            }
            let rows = match run_experiment(&spec) {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            match &spec.output {
                Some(path) => {
                    if let Err(e) = emit_csv(&rows, path) {
                        eprintln!("error: {e}");
                        return ExitCode::FAILURE;
                    }
                }
                None => print!("{}", csv_string(&rows)),
            }
            let worst = rows.iter().map(|r| r.failure_rate()).fold(0.0, f64::max);
            if worst > max_fail_rate {
                eprintln!("error: failure rate {worst} exceeds {max_fail_rate}");
                return ExitCode::from(EXIT_FAIL_RATE);
            }
            ExitCode::SUCCESS
        }
        Command::Overhead { config } => {
            let spec = match ExperimentSpec::from_file(&config) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            if let Err(e) = spec.validate() {
                return config_error(e);
            }
            let c = spec.schedule.measurement_constant;
            for i in 0..spec.sweep.len() {
                let p = match spec.point(i) {
                    Ok(p) => p,
                    Err(e) => return config_error(e),
                };
                println!("{} = {}", spec.sweep.name(), p.value);
                print_report(
                    &format!("minimum hybrid (c = {c})"),
                    &min_pilot_overhead(&p.system, Architecture::Hybrid, c),
                );
                print_report(
                    &format!("minimum digital (c = {c})"),
                    &min_pilot_overhead(&p.system, Architecture::FullyDigital, c),
                );
                print_report("schedule", &OverheadReport::from_schedule(&p.schedule));
            }
            ExitCode::SUCCESS
        }
        Command::Diagnose {
            config,
            trial,
            method,
            measurements,
        } => {
            let spec = match ExperimentSpec::from_file(&config) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            let method: Method = match method.parse() {
                Ok(m) => m,
                Err(e) => return config_error(e),
            };
            if let Err(e) = spec.validate() {
                return config_error(e);
            }
            match diagnose(&spec, trial, method, measurements.as_ref()) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Selftest => {
            let cases = selftest();
            let mut ok = true;
            for c in &cases {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
