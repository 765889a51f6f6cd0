use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bicopter_client::{Client, ClientError};
use bicopter_core::control::Axis;
use bicopter_core::harness::api::{
    execute_run, execute_tune, preset_list, RunRequest, RunResponse, TuneRequest,
};
use bicopter_core::harness::scenario::{preset, Scenario};
use bicopter_core::harness::session::DEFAULT_DECIMATION;
use bicopter_core::tuning::{
    cltf_step_response, simulate_step_response, DesiredCharacteristic, DoubleIntegratorPlant,
};
use bicopter_server::{Pacing, SessionConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bicopter",
    version,
    about = "Bicopter software-in-the-loop simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file or named preset to completion.
    Run {
        /// Path to a scenario JSON file, or a preset name.
        scenario: String,
        /// Write per-tick telemetry CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the RMSE report JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        remote: Remote,
    },
    /// Compute PD gains that place the closed-loop poles of one axis.
    Tune {
        #[arg(long)]
        axis: Axis,
        /// Damping ratio of the desired response (with --wn).
        #[arg(long, requires = "wn", conflicts_with = "char")]
        zeta: Option<f64>,
        /// Natural frequency in rad/s (with --zeta).
        #[arg(long, requires = "zeta")]
        wn: Option<f64>,
        /// Characteristic polynomial s² + C1·s + C0 given as `C1 C0`.
        #[arg(long = "char", num_args = 2, value_names = ["C1", "C0"], allow_negative_numbers = true)]
        char: Option<Vec<f64>>,
        /// Write the unit-step response (closed-form and RK4) as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Length of the exported step response in seconds.
        #[arg(long, default_value_t = 0.1)]
        duration: f64,
        /// Sample period of the exported step response in seconds.
        #[arg(long, default_value_t = 0.0028)]
        dt: f64,
        #[command(flatten)]
        remote: Remote,
    },
    /// List the built-in scenario presets.
    Presets {
        #[command(flatten)]
        remote: Remote,
    },
    /// Serve the HTTP API with a live session over WebSocket.
    Serve {
        /// Scenario file or preset driving the live session.
        #[arg(default_value = "testbed-8kn")]
        scenario: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Step as fast as possible instead of in real time.
        #[arg(long)]
        fast: bool,
        /// Telemetry frame every N ticks.
        #[arg(long, default_value_t = DEFAULT_DECIMATION, value_parser = clap::value_parser!(u32).range(1..))]
        decimation: u32,
    },
}

#[derive(Args)]
struct Remote {
    /// Send the request to a running server instead of computing locally.
    #[arg(long, value_name = "URL")]
    server: Option<String>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    const OTHER: u8 = 1;
    const CONFIG: u8 = 2;
    const DIVERGED: u8 = 3;

    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<bicopter_core::Error> for Failure {
    fn from(e: bicopter_core::Error) -> Self {
        let code = if e.is_config_error() {
            Self::CONFIG
        } else {
            Self::OTHER
        };
        Self::new(code, e.to_string())
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let code = if e.is_bad_request() {
            Self::CONFIG
        } else {
            Self::OTHER
        };
        Self::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(Failure::OTHER, format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Failure::OTHER);
        }
    };
    match rt.block_on(dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

async fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run {
            scenario,
            out,
            report,
            remote,
        } => run(&scenario, out, report, remote).await,
        Cmd::Tune {
            axis,
            zeta,
            wn,
            char,
            out,
            duration,
            dt,
            remote,
        } => {
            let characteristic = match (zeta, wn, char) {
                (Some(zeta), Some(omega_n), None) => {
                    DesiredCharacteristic::Damping { zeta, omega_n }
                }
                (None, None, Some(c)) => DesiredCharacteristic::Coefficients { c1: c[0], c0: c[1] },
                _ => {
                    return Err(Failure::new(
                        Failure::CONFIG,
                        "give either --zeta and --wn, or --char C1 C0",
                    ))
                }
            };
            tune(
                TuneRequest {
                    axis,
                    characteristic,
                    params: None,
                },
                out,
                duration,
                dt,
                remote,
            )
            .await
        }
        Cmd::Presets { remote } => {
            let list = match remote.server {
                Some(url) => Client::new(url).presets().await?,
                None => preset_list(),
            };
            for p in list {
                println!("{:<14} {}", p.name, p.description);
            }
            Ok(())
        }
        Cmd::Serve {
            scenario,
            port,
            host,
            fast,
            decimation,
        } => {
            let scenario = load_scenario(&scenario)?;
            let pacing = if fast { Pacing::Fast } else { Pacing::Realtime };
            serve(
                scenario,
                &host,
                port,
                SessionConfig {
                    pacing,
                    decimation,
                    ..SessionConfig::default()
                },
            )
            .await
        }
    }
}

/// An existing file wins over a preset of the same name.
fn load_scenario(arg: &str) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(Scenario::load(path)?);
    }
    preset(arg).map_err(|_| {
        Failure::new(
            Failure::CONFIG,
            format!("`{arg}` is neither a scenario file nor a preset name"),
        )
    })
}

async fn run(
    arg: &str,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
    remote: Remote,
) -> Result<(), Failure> {
    let scenario = load_scenario(arg)?;
    let req = RunRequest {
        scenario: Some(scenario),
        preset: None,
    };
    let resp: RunResponse = match remote.server {
        Some(url) => Client::new(url).run(&req).await?,
        None => tokio::task::spawn_blocking(move || execute_run(&req))
            .await
            .map_err(|e| Failure::new(Failure::OTHER, e.to_string()))??,
    };

    if let Some(path) = &out {
        std::fs::write(path, &resp.csv).map_err(|e| io_failure(path, e))?;
    }
    if let Some(r) = &resp.report {
        println!(
            "rmse_deg roll={:.4} pitch={:.4} yaw={:.4} samples={}",
            r.rmse_deg.roll, r.rmse_deg.pitch, r.rmse_deg.yaw, r.samples
        );
        if let Some(path) = &report {
            let text = serde_json::to_string_pretty(r)
                .map_err(|e| Failure::new(Failure::OTHER, e.to_string()))?;
            std::fs::write(path, text + "\n").map_err(|e| io_failure(path, e))?;
        }
    }
    match resp.diverged_at {
        Some(tick) => Err(Failure::new(
            Failure::DIVERGED,
            format!(
                "diverged at tick {tick}; {} ticks of telemetry kept",
                resp.ticks
            ),
        )),
        None => {
            println!("ticks={}", resp.ticks);
            Ok(())
        }
    }
}

async fn tune(
    req: TuneRequest,
    out: Option<PathBuf>,
    duration: f64,
    dt: f64,
    remote: Remote,
) -> Result<(), Failure> {
    let result = match remote.server {
        Some(url) => Client::new(url).tune(&req).await?,
        None => execute_tune(&req)?,
    };
    println!("{result}");

    if let Some(path) = out {
        let plant = DoubleIntegratorPlant::new(result.plant_gain)?;
        let exact = cltf_step_response(&plant, result.kp, result.kd, duration, dt)?;
        let rk4 = simulate_step_response(&plant, result.kp, result.kd, duration, dt)?;
        let mut text = String::from("t,cltf,rk4\n");
        for ((t, y), (_, x)) in exact.iter().zip(&rk4) {
            text.push_str(&format!("{t:.6},{y:.6},{x:.6}\n"));
        }
        std::fs::write(&path, text).map_err(|e| io_failure(&path, e))?;
    }
    Ok(())
}

async fn serve(
    scenario: Scenario,
    host: &str,
    port: u16,
    config: SessionConfig,
) -> Result<(), Failure> {
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .try_init();
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Failure::new(Failure::CONFIG, format!("bad address {host}:{port}: {e}")))?;
    let session = bicopter_server::spawn_session(scenario, config)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Failure::new(Failure::OTHER, format!("bind {addr}: {e}")))?;
    let local = listener
        .local_addr()
        .map_err(|e| Failure::new(Failure::OTHER, e.to_string()))?;
    println!("listening on http://{local}");
    let _ = std::io::stdout().flush();
    bicopter_server::serve(listener, Some(session))
        .await
        .map_err(|e| Failure::new(Failure::OTHER, e.to_string()))
}
