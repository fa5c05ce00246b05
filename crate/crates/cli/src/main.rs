use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use tunneltwin::gateway::{default_port, serve_plc, PlcPeer};
use tunneltwin::gts::{parse_gts, Controller, DEFAULT_ITERATION_CAP};
use tunneltwin::harness::trace::{first_difference, to_csv_string};
use tunneltwin::harness::ws::{manifest_frame, serve, LiveOptions, WsHub};
use tunneltwin::harness::{seed_from_env, ExitStatus, PlcBinding, RunConfig, RunOutcome, Runner, Scenario};
use tunneltwin::plant::WorldConfig;
use tunneltwin::bus::{Direction, NamingRule};
use tunneltwin::policy::{codegen, ManifestOptions, PolicyManifest};

#[derive(Parser)]
#[command(name = "tunneltwin", version, about = "Road-tunnel digital twin and soft PLC")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the gateway policy from the PLC variable lists.
    Codegen(CodegenArgs),
    /// Serve a controller as a soft PLC over TCP.
    Plc(PlcArgs),
    /// Run a scenario against the plant.
    Run(RunArgs),
    /// Re-run the scenario that produced a trace and compare byte for byte.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Args)]
struct CodegenArgs {
    /// INPUTS global variable list.
    #[arg(long)]
    inputs: PathBuf,
    /// STATE structure.
    #[arg(long)]
    state: PathBuf,
    /// Policy document to write; a `.digest` sidecar goes next to it.
    #[arg(long, short)]
    out: PathBuf,
    /// Also generate operator buttons.
    #[arg(long)]
    gui_buttons: bool,
    #[arg(long, default_value = "INPUTS.{{IO_NAME}}")]
    in_template: String,
    #[arg(long, default_value = "MAIN.state0.{{IO_NAME}}")]
    out_template: String,
}

#[derive(Args)]
struct PlcArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    /// Defaults to TUNNELTWIN_PORT, else 8510.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Scan period in seconds.
    #[arg(long, default_value_t = 0.02)]
    period: f64,
    #[arg(long, default_value_t = DEFAULT_ITERATION_CAP)]
    cap: usize,
    /// Exit after this many sessions.
    #[arg(long)]
    sessions: Option<usize>,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct RunArgs {
    /// World config (TOML); defaults apply without it.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Controller spec for the in-process PLC.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Throttle to wall clock.
    #[serde(skip)]
    #[arg(long)]
    realtime: bool,
    #[serde(skip)]
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Serve the operator WebSocket API on this port.
    #[serde(skip)]
    #[arg(long)]
    ws_port: Option<u16>,
    /// Remote PLC address; the port defaults to TUNNELTWIN_PORT, else 8510.
    #[arg(long)]
    plc: Option<String>,
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Scan period of the in-process PLC in seconds; one tick by default.
    #[arg(long)]
    period: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ITERATION_CAP)]
    cap: usize,
    /// Seed actually used, filled in for replay.
    #[arg(skip)]
    seed: Option<u64>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_policy(path: &Path) -> Result<PolicyManifest> {
    PolicyManifest::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_controller(path: &Path, policy: Option<&PolicyManifest>, cap: usize) -> Result<Controller> {
    let spec = parse_gts(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let outputs: Option<Vec<String>> = policy.map(|p| {
        p.defs()
            .into_iter()
            .filter(|d| d.direction == Direction::Output)
            .map(|d| d.name)
            .collect()
    });
    Ok(Controller::new(spec, outputs.as_deref()).with_cap(cap))
}

fn sidecar_path(trace: &Path) -> PathBuf {
    let mut p = trace.as_os_str().to_owned();
    p.push(".run.json");
    PathBuf::from(p)
}

fn build(args: &RunArgs) -> Result<RunConfig> {
    let world = match &args.world {
        Some(p) => WorldConfig::from_toml(&read(p)?).with_context(|| format!("loading {}", p.display()))?,
        None => WorldConfig::default(),
    };
    let scenario = match &args.scenario {
        Some(p) => Scenario::parse(&read(p)?).with_context(|| format!("loading {}", p.display()))?,
        None => Scenario::default(),
    };
    let policy = args.policy.as_deref().map(load_policy).transpose()?;
    let plc = match (&args.plc, &args.spec) {
        (Some(_), Some(_)) => bail!("--plc and --spec are exclusive"),
        (Some(addr), None) => {
            let Some(policy) = policy else {
                bail!("--plc needs --policy");
            };
            let addr = if addr.contains(':') {
                addr.clone()
            } else {
                format!("{addr}:{}", default_port())
            };
            PlcBinding::Tcp { addr, policy }
        }
        (None, Some(spec)) => PlcBinding::Inproc {
            controller: load_controller(spec, policy.as_ref(), args.cap)?,
            policy,
            period: args.period,
        },
        (None, None) => PlcBinding::None,
    };
    let mut cfg = RunConfig::new(world, scenario, plc);
    cfg.duration = args.duration;
    cfg.seed_override = args.seed.or_else(seed_from_env);
    Ok(cfg)
}

fn report(outcome: &RunOutcome) {
    for v in &outcome.verdicts {
        let tag = if v.pass { "pass" } else { "FAIL" };
        println!(
            "{tag} line {}: {} == {} at t={:.3}",
            v.line, v.signal, v.expected as u8, v.time
        );
    }
    if let Some(f) = outcome.first_failure() {
        println!("first failure at t={:.3} (line {})", f.time, f.line);
    }
    if let Some(l) = &outcome.livelock {
        println!("livelock: scan hit the cap of {} iterations on edge {}", l.cap, l.description);
    }
    println!(
        "{} ticks, {:.3} s simulated, {} trace rows",
        outcome.ticks,
        outcome.sim_time,
        outcome.trace.len()
    );
}

fn run(mut args: RunArgs) -> Result<ExitStatus> {
    let cfg = build(&args)?;
    args.seed = Some(cfg.seed_override.or(cfg.scenario.seed).unwrap_or(cfg.world.seed));
    let bounded = cfg.duration.is_some() || cfg.scenario.duration.is_some() || args.ws_port.is_none();
    let mut runner = Runner::new(cfg)?;
    if let Some(port) = args.ws_port {
        let hub = WsHub::bind(("127.0.0.1", port), manifest_frame(&runner.bus().defs()))?;
        log::info!("operator API on ws://{}", hub.local_addr());
        serve(
            &mut runner,
            &hub,
            LiveOptions {
                realtime: args.realtime,
                bounded,
            },
        )?;
    } else if args.realtime {
        let start = std::time::Instant::now();
        while !runner.is_finished() {
            runner.step()?;
            let due = std::time::Duration::from_secs_f64(runner.sim_time());
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    }
    let outcome = if args.ws_port.is_some() || args.realtime {
        runner.finish()
    } else {
        runner.run()?
    };
    report(&outcome);
    if let Some(path) = &args.trace {
        fs::write(path, to_csv_string(&outcome.trace)).with_context(|| format!("writing {}", path.display()))?;
        for p in [&mut args.world, &mut args.spec, &mut args.scenario, &mut args.policy].into_iter().flatten() {
            if let Ok(abs) = fs::canonicalize(&*p) {
                *p = abs;
            }
        }
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&args)?)?;
    }
    Ok(outcome.status)
}

fn replay(trace: &Path) -> Result<ExitStatus> {
    let recorded = read(trace)?;
    let args: RunArgs = serde_json::from_str(&read(&sidecar_path(trace))?)
        .with_context(|| format!("reading the run record next to {}", trace.display()))?;
    let outcome = Runner::new(build(&args)?)?.run()?;
    let fresh = to_csv_string(&outcome.trace);
    match first_difference(&recorded, &fresh) {
        None => {
            println!("identical: {} rows", outcome.trace.len());
            Ok(outcome.status)
        }
        Some((line, was, now)) => {
            println!("trace differs at line {line}:\n  recorded: {was}\n  replayed: {now}");
            Ok(ExitStatus::ExpectFailed)
        }
    }
}

fn run_codegen(a: &CodegenArgs) -> Result<()> {
    let inputs = read(&a.inputs)?;
    let state = read(&a.state)?;
    let (manifest, rep) = codegen(
        &inputs,
        &state,
        ManifestOptions {
            with_gui_buttons: a.gui_buttons,
        },
    )?;
    let policy = PolicyManifest::from_manifest(
        &manifest,
        &NamingRule::new(&a.in_template)?,
        &NamingRule::new(&a.out_template)?,
    );
    fs::write(&a.out, policy.emit())?;
    let mut side = a.out.as_os_str().to_owned();
    side.push(".digest");
    fs::write(PathBuf::from(side), policy.sidecar())?;
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(())
}

fn run_plc(a: &PlcArgs) -> Result<ExitStatus> {
    let policy = load_policy(&a.policy)?;
    let controller = load_controller(&a.spec, Some(&policy), a.cap)?;
    let peer = PlcPeer::new(policy, Some(controller), a.period)?;
    let port = a.port.unwrap_or_else(default_port);
    let listener = TcpListener::bind((a.host.as_str(), port))?;
    log::info!("soft PLC listening on {}", listener.local_addr()?);
    let (peer, results) = serve_plc(listener, peer, a.sessions);
    if let Some(l) = peer.livelock() {
        println!("livelock: scan hit the cap of {} iterations on edge {}", l.cap, l.description);
        return Ok(ExitStatus::Livelock);
    }
    if let Some(Err(e)) = results.into_iter().last() {
        return Err(e.into());
    }
    Ok(ExitStatus::Pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Codegen(a) => run_codegen(&a).map(|_| ExitStatus::Pass),
        Cmd::Plc(a) => run_plc(&a),
        Cmd::Run(a) => run(a),
        Cmd::Replay { trace } => replay(&trace),
    };
    match result {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ExitStatus::ConfigError.code() as u8)
        }
    }
}
