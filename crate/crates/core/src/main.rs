use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use calogero_dual::config::ScenarioConfig;
use calogero_dual::pipeline::{run, Command, Outcome, Preset, RunError};
use calogero_dual::Error;

/// Dual Calogero particle/soliton simulations.
#[derive(Parser, Debug)]
#[command(name = "calogero", version)]
struct Cli {
    /// Scenario file (TOML). Repeat to run several scenarios.
    #[arg(long = "config", value_name = "PATH", global = true)]
    configs: Vec<PathBuf>,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out", global = true)]
    out: PathBuf,

    /// Scenarios run concurrently.
    #[arg(long, value_name = "N", default_value_t = 1, global = true)]
    jobs: usize,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check the functional identities for all kernel families.
    Verify,
    /// Relax particles onto the reality constraint and report soliton velocities.
    Init,
    /// Initialize, then integrate the dual and Newtonian equations.
    Evolve,
    /// Initialize, then write density, velocity and u+ fields.
    Hydro,
    /// Run a reference scenario: fig1-one-soliton or fig1-two-soliton.
    Preset { name: String },
}

struct Job {
    label: String,
    config: std::result::Result<ScenarioConfig, Error>,
    out: PathBuf,
}

fn load(path: &Path) -> std::result::Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidSpec(format!("cannot read {}: {e}", path.display()))
    })?;
    ScenarioConfig::from_toml_str(&text).map_err(|e| {
        let msg = match e {
            Error::InvalidSpec(m) => m,
            other => other.to_string(),
        };
        Error::InvalidSpec(format!("{}: {msg}", path.display()))
    })
}

fn jobs(cli: &Cli) -> Vec<Job> {
    if cli.configs.is_empty() {
        return vec![Job {
            label: "default".into(),
            config: Ok(ScenarioConfig::default()),
            out: cli.out.clone(),
        }];
    }
    let single = cli.configs.len() == 1;
    cli.configs
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("scenario{i}"));
            Job {
                label: path.display().to_string(),
                config: load(path),
                // several scenarios get one subdirectory each, prefixed to stay unique
                out: if single {
                    cli.out.clone()
                } else {
                    cli.out.join(format!("{:02}_{stem}", i + 1))
                },
            }
        })
        .collect()
}

fn execute(cmd: Command, job: &Job) -> std::result::Result<Outcome, RunError> {
    match &job.config {
        Ok(cfg) => run(cmd, cfg, &job.out),
        Err(e) => Err(RunError::Model(e.clone())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are configuration errors; help and version are not errors
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let cmd = match &cli.command {
        Cmd::Verify => Command::Verify,
        Cmd::Init => Command::Init,
        Cmd::Evolve => Command::Evolve,
        Cmd::Hydro => Command::Hydro,
        Cmd::Preset { name } => match name.parse::<Preset>() {
            Ok(p) => Command::Preset(p),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
        },
    };
    if matches!(cmd, Command::Preset(_)) && !cli.configs.is_empty() {
        eprintln!("note: presets fix their own parameters; --config is ignored");
    }
    let jobs = if matches!(cmd, Command::Preset(_)) {
        vec![Job {
            label: "preset".into(),
            config: Ok(ScenarioConfig::default()),
            out: cli.out.clone(),
        }]
    } else {
        jobs(&cli)
    };

    let results: Vec<Mutex<Option<std::result::Result<Outcome, RunError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..cli.jobs.clamp(1, jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = execute(cmd, &jobs[i]);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });

    // reports are printed in input order regardless of scheduling
    let mut code = 0;
    let many = jobs.len() > 1;
    for (job, slot) in jobs.iter().zip(results) {
        let result = slot.into_inner().unwrap().expect("every job ran");
        if many {
            println!("== {}", job.label);
        }
        match result {
            Ok(outcome) => {
                println!("{}", outcome.report);
                if !outcome.passed {
                    code = code.max(1);
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code as u8)
}
