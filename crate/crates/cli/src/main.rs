mod output;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use pilotwave::check::run_checks;
use pilotwave::config::{to_config_string, RawConfig};
use pilotwave::experiments::{reversal_experiment, run_scenario, ExperimentKind, RunError, ScenarioConfig, Snapshot};
use pilotwave::monitors::MonitorRecord;
use pilotwave::Error;

use output::{gnuplot_script, monitors_csv, num, snapshot_csv, snapshot_name, Manifest, OutputDir};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "pilotwave", version, about = "Nonlinear pilot-wave relaxation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `alpha` or any config key.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Run the built-in oracle suite.
    Check {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file; the standard scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
}

/// A failure that maps to an exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn io(e: std::io::Error) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: format!("i/o error: {e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common } => load(&common).and_then(|raw| run_to_dir(&raw, &common.out).map(|_| ())),
        Command::Sweep { common, param, values } => sweep(&common, &param, &values),
        Command::Check { seed } => check(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn config_message(path: &Path, e: &Error) -> String {
    match e {
        Error::Config { line: 0, message } => format!("command-line override: {message}"),
        Error::Config { line, message } => format!("{}:{line}: {message}", path.display()),
        other => format!("{}: {other}", path.display()),
    }
}

/// Reads the config file and applies command-line overrides.
fn load(common: &Common) -> Result<RawConfig, Failure> {
    let path = common.config.clone().unwrap_or_else(|| PathBuf::from("<standard>"));
    let mut raw = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            RawConfig::parse(&text).map_err(|e| Failure::config(config_message(&path, &e)))?
        }
        None => RawConfig::default(),
    };
    let overrides = [
        ("ensemble.seed", common.seed.map(|v| v.to_string())),
        ("time.steps", common.steps.map(|v| v.to_string())),
        ("time.dt", common.dt.map(|v| format!("{v:?}"))),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            raw.set(key, v).map_err(|e| Failure::config(config_message(&path, &e)))?;
        }
    }
    raw.resolve().map_err(|e| Failure::config(config_message(&path, &e)))?;
    Ok(raw)
}

/// Headline numbers of one run, for sweep summaries.
struct RunSummary {
    status: &'static str,
    h_q_initial: f64,
    h_q_final: f64,
    retrace_l2_error: Option<f64>,
}

fn write_snapshots(dir: &mut OutputDir, snapshots: &[Snapshot]) -> std::io::Result<Option<String>> {
    let mut last = None;
    for s in snapshots {
        let name = format!("snapshots/{}", snapshot_name(s));
        dir.write(&name, &snapshot_csv(s))?;
        last = Some(name);
    }
    Ok(last)
}

fn h_ends(records: &[MonitorRecord]) -> (f64, f64) {
    (
        records.first().map_or(f64::NAN, |r| r.h_q),
        records.last().map_or(f64::NAN, |r| r.h_q),
    )
}

/// Runs the resolved scenario and writes every output into `out`.
fn run_to_dir(raw: &RawConfig, out: &Path) -> Result<RunSummary, Failure> {
    let cfg = raw.resolve().map_err(|e| Failure::config(e.to_string()))?;
    let echo = to_config_string(&cfg);
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let mut dir = OutputDir::create(out).map_err(Failure::io)?;
    dir.write("resolved.cfg", &echo).map_err(Failure::io)?;

    let (summary, diagnostic) = match cfg.kind {
        ExperimentKind::Reversal => write_reversal(&cfg, &mut dir),
        _ => write_scenario(&cfg, &mut dir),
    }
    .map_err(Failure::io)?;

    let finished = chrono::Utc::now();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: summary.status.to_string(),
        diagnostic: diagnostic.clone(),
        seed: cfg.seed,
        started: started.to_rfc3339(),
        finished: finished.to_rfc3339(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        config: echo,
        files: Vec::new(),
    };
    dir.finish(manifest).map_err(Failure::io)?;
    match diagnostic {
        None => Ok(summary),
        Some(message) if summary.status == "aborted" => Err(Failure {
            code: EXIT_ABORT,
            message: format!("{message} (partial output in {})", out.display()),
        }),
        Some(message) => Err(Failure::config(message)),
    }
}

type Written = std::io::Result<(RunSummary, Option<String>)>;

fn classify(e: &RunError) -> &'static str {
    match e {
        RunError::Invalid(_) => "invalid",
        RunError::Aborted { .. } => "aborted",
    }
}

fn write_scenario(cfg: &ScenarioConfig, dir: &mut OutputDir) -> Written {
    let (output, failure) = match run_scenario(cfg) {
        Ok(o) => (Some(o), None),
        Err(RunError::Aborted {
            error,
            partial,
            snapshot,
        }) => {
            let mut partial = *partial;
            partial.snapshots.extend(snapshot);
            (Some(partial), Some(("aborted", error.to_string())))
        }
        Err(e) => (None, Some((classify(&e), e.to_string()))),
    };
    let Some(output) = output else {
        let (status, message) = failure.expect("a missing output carries its failure");
        let summary = RunSummary {
            status,
            h_q_initial: f64::NAN,
            h_q_final: f64::NAN,
            retrace_l2_error: None,
        };
        return Ok((summary, Some(message)));
    };
    dir.write("monitors.csv", &monitors_csv(&output.records, &cfg.grid))?;
    let last = write_snapshots(dir, &output.snapshots)?;
    dir.write("plot.gp", &gnuplot_script(&["monitors.csv"], last.as_deref()))?;
    let (h_q_initial, h_q_final) = h_ends(&output.records);
    let (status, diagnostic) = match failure {
        Some((s, m)) => (s, Some(m)),
        None => ("ok", None),
    };
    Ok((
        RunSummary {
            status,
            h_q_initial,
            h_q_final,
            retrace_l2_error: None,
        },
        diagnostic,
    ))
}

fn write_reversal(cfg: &ScenarioConfig, dir: &mut OutputDir) -> Written {
    match reversal_experiment(cfg, cfg.t_reverse) {
        Ok(report) => {
            dir.write("monitors.csv", &monitors_csv(&report.forward_records, &cfg.grid))?;
            dir.write("monitors_backward.csv", &monitors_csv(&report.backward_records, &cfg.grid))?;
            dir.write(
                "reversal.csv",
                &format!(
                    "retrace_l2_error,retrace_rho_error\n{},{}\n",
                    num(report.retrace_l2_error),
                    num(report.retrace_rho_error)
                ),
            )?;
            dir.write("plot.gp", &gnuplot_script(&["monitors.csv", "monitors_backward.csv"], None))?;
            let (h_q_initial, _) = h_ends(&report.forward_records);
            let (_, h_q_final) = h_ends(&report.backward_records);
            Ok((
                RunSummary {
                    status: "ok",
                    h_q_initial,
                    h_q_final,
                    retrace_l2_error: Some(report.retrace_l2_error),
                },
                None,
            ))
        }
        Err(RunError::Aborted {
            error,
            partial,
            snapshot,
        }) => {
            dir.write("monitors.csv", &monitors_csv(&partial.records, &cfg.grid))?;
            write_snapshots(dir, snapshot.as_slice())?;
            let (h_q_initial, h_q_final) = h_ends(&partial.records);
            Ok((
                RunSummary {
                    status: "aborted",
                    h_q_initial,
                    h_q_final,
                    retrace_l2_error: None,
                },
                Some(error.to_string()),
            ))
        }
        Err(e) => Ok((
            RunSummary {
                status: classify(&e),
                h_q_initial: f64::NAN,
                h_q_final: f64::NAN,
                retrace_l2_error: None,
            },
            Some(e.to_string()),
        )),
    }
}

fn sweep(common: &Common, param: &str, values: &[String]) -> Result<(), Failure> {
    let key = match param {
        "alpha" => "physics.alpha",
        other => other,
    };
    let base = load(common)?;
    let mut table = String::from("param,value,status,h_q_initial,h_q_final,retrace_l2_error\n");
    let mut worst: Option<Failure> = None;
    for value in values {
        let mut raw = base.clone();
        raw.set(key, value.clone())
            .map_err(|e| Failure::config(format!("--param {param}: {e}")))?;
        raw.resolve()
            .map_err(|e| Failure::config(format!("--param {param} = {value}: {e}")))?;
        let sub = common.out.join(format!("{}_{value}", param.replace('.', "_")));
        let (status, h0, h1, retrace) = match run_to_dir(&raw, &sub) {
            Ok(s) => (s.status, s.h_q_initial, s.h_q_final, s.retrace_l2_error),
            Err(f) => {
                eprintln!("{param} = {value}: {}", f.message);
                let status = if f.code == EXIT_ABORT { "aborted" } else { "failed" };
                if worst.as_ref().is_none_or(|w| f.code > w.code) {
                    worst = Some(f);
                }
                (status, f64::NAN, f64::NAN, None)
            }
        };
        let _ = writeln!(
            table,
            "{key},{value},{status},{},{},{}",
            num(h0),
            num(h1),
            retrace.map(num).unwrap_or_default()
        );
    }
    fs::create_dir_all(&common.out).map_err(Failure::io)?;
    fs::write(common.out.join("sweep.csv"), table).map_err(Failure::io)?;
    worst.map_or(Ok(()), Err)
}

fn check(seed: u64) -> Result<(), Failure> {
    let outcomes = run_checks(seed).map_err(|e| Failure {
        code: EXIT_FAILURE,
        message: e.to_string(),
    })?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed == 0 {
        println!("all {} oracle checks passed", outcomes.len());
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_FAILURE,
            message: format!("{failed} of {} oracle checks failed", outcomes.len()),
        })
    }
}
