use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use teleswap::metrics::{build_report, read_log, run_batch, write_log};
use teleswap::operators::{calibrate, CalibrationError, CalibrationTargets, OperatorParams, Skill};
use teleswap::protocol::{serve, ChannelConfig, ServerConfig, DEFAULT_TCP_PORT, DEFAULT_WS_PORT};
use teleswap::{SimConfig, Task};

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_FOUND: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "teleswap", version, about = "Teleoperated instrument exchange simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve sessions over TCP (JSON lines) and WebSocket.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, default_value_t = DEFAULT_TCP_PORT)]
        tcp_port: u16,
        #[arg(long, default_value_t = DEFAULT_WS_PORT)]
        ws_port: u16,
        #[arg(long, default_value_t = 0.0)]
        latency_ms: f64,
        #[arg(long, default_value_t = 0.0)]
        jitter_ms: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulator TOML config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Append a trial record per finished session to this JSON-lines file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run a headless batch with a scripted operator.
    Run {
        #[arg(long, default_value = "cycle")]
        task: Task,
        #[arg(long, default_value = "expert")]
        operator: Skill,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON-lines output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Operator TOML replacing the built-in profile.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Turn a JSON-lines log into CSV tables and a text summary.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit operator profiles to target cycle times.
    Calibrate {
        /// Targets TOML; built-in targets when omitted.
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the calibration report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl std::fmt::Display) -> Failure {
    Failure { code, message: message.to_string() }
}

fn load_sim(path: Option<&Path>) -> Result<SimConfig, Failure> {
    match path {
        None => Ok(SimConfig::default()),
        Some(p) => SimConfig::load(p).map_err(|e| match e {
            teleswap::config::ConfigError::Io { .. } => fail(EXIT_IO, e),
            other => fail(EXIT_USAGE, other),
        }),
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Serve { bind, tcp_port, ws_port, latency_ms, jitter_ms, seed, config, log } => {
            let sim = load_sim(config.as_deref())?;
            let channel = ChannelConfig::with_latency(latency_ms, jitter_ms, seed);
            channel.validate().map_err(|e| fail(EXIT_USAGE, e))?;
            let cfg = ServerConfig {
                tcp_addr: SocketAddr::new(bind, tcp_port),
                ws_addr: Some(SocketAddr::new(bind, ws_port)),
                channel,
                sim,
                log_path: log,
            };
            let rt = tokio::runtime::Runtime::new().map_err(|e| fail(EXIT_IO, e))?;
            rt.block_on(serve(cfg)).map_err(|e| fail(EXIT_IO, e))
        }
        Command::Run { task, operator, trials, seed, out, config, params } => {
            if trials == 0 {
                return Err(fail(EXIT_USAGE, "--trials must be at least 1"));
            }
            let sim = load_sim(config.as_deref())?;
            let params = match params {
                Some(p) => OperatorParams::load(&p).map_err(|e| match e {
                    teleswap::operators::OperatorError::Io { .. } => fail(EXIT_IO, e),
                    other => fail(EXIT_USAGE, other),
                })?,
                None => OperatorParams::for_skill(operator),
            };
            let (records, summary) = run_batch(&sim, task, &params, trials, seed).map_err(|e| fail(EXIT_IO, e))?;
            write_log(&out, &records).map_err(|e| fail(EXIT_IO, format!("{}: {e}", out.display())))?;
            print!("{} {} x{}: success {:.1}%", params.label, task, summary.n_total, summary.p_success);
            if let Some(t) = summary.task_time {
                print!(", mean {:.2} s", t.mean_s);
            }
            println!();
            Ok(())
        }
        Command::Report { input, out } => {
            let log = read_log(&input).map_err(|e| fail(EXIT_IO, format!("{}: {e}", input.display())))?;
            for err in &log.errors {
                eprintln!("warning: {}: {err}", input.display());
            }
            if log.records.is_empty() {
                return Err(fail(EXIT_USAGE, format!("{}: no trial records", input.display())));
            }
            let bundle = build_report(&log.records).map_err(|e| fail(EXIT_IO, e))?;
            bundle.write_to(&out).map_err(|e| fail(EXIT_IO, format!("{}: {e}", out.display())))?;
            print!("{}", bundle.files["summary.txt"]);
            Ok(())
        }
        Command::Calibrate { targets, config, out } => {
            let sim = load_sim(config.as_deref())?;
            let targets = match targets {
                Some(p) => CalibrationTargets::load(&p).map_err(|e| match e {
                    teleswap::operators::OperatorError::Io { .. } => fail(EXIT_IO, e),
                    other => fail(EXIT_USAGE, other),
                })?,
                None => CalibrationTargets::default(),
            };
            let cal = calibrate(&targets, &sim).map_err(|e| match e {
                CalibrationError::NotFound { .. } => fail(EXIT_NOT_FOUND, e),
                CalibrationError::NoTrials => fail(EXIT_USAGE, e),
                CalibrationError::Metrics(_) => fail(EXIT_IO, e),
            })?;
            let text = cal.to_toml_string();
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| fail(EXIT_IO, format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
            eprintln!(
                "expert {:.2} s (target {}), novice {:.2} s (target {})",
                cal.expert_mean_s, targets.expert_cycle_s, cal.novice_mean_s, targets.novice_cycle_s
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
