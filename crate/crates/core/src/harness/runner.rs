//! Tick loop tying the plant, the PLC link and a scenario together.

use std::collections::BTreeMap;
use std::sync::mpsc::Receiver;

use thiserror::Error;

use super::scenario::{Command, Scenario, ScenarioError, TimedCommand};
use super::trace::TraceRow;
use crate::bus::{BusError, ChangeEvent, SignalBus, SignalId, SignalKind};
use crate::gateway::{
    controller_policy, Endpoint, GatewayError, InprocLink, PlcLink, PlcPeer, Role, TcpLink,
};
use crate::gts::{Controller, GtsError, LivelockInfo};
use crate::plant::{World, WorldCommand, WorldConfig, WorldError};
use crate::policy::PolicyManifest;

/// Operator button pulse length.
pub const PRESS_SECONDS: f64 = 0.05;
/// Sim-time between reconnect attempts after losing the PLC.
const RECONNECT_SECONDS: f64 = 1.0;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Gts(#[from] GtsError),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("`{0}` matches several signals: {1}")]
    AmbiguousSignal(String, String),
    #[error("`{0}` is not a button")]
    NotAButton(String),
    #[error("no lane {0}.{1}")]
    UnknownLane(u8, u8),
}

/// Stable process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    ExpectFailed = 1,
    Livelock = 2,
    ConfigError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

pub enum PlcBinding {
    None,
    /// Controller in this process. Without a policy, one is derived from
    /// the controller; without a period, one plant tick is used.
    Inproc {
        controller: Controller,
        policy: Option<PolicyManifest>,
        period: Option<f64>,
    },
    Tcp {
        addr: String,
        policy: PolicyManifest,
    },
}

pub struct RunConfig {
    pub world: WorldConfig,
    pub scenario: Scenario,
    pub plc: PlcBinding,
    /// Overrides the scenario's duration.
    pub duration: Option<f64>,
    /// Seed from the environment, highest precedence.
    pub seed_override: Option<u64>,
}

impl RunConfig {
    pub fn new(world: WorldConfig, scenario: Scenario, plc: PlcBinding) -> Self {
        RunConfig {
            world,
            scenario,
            plc,
            duration: None,
            seed_override: None,
        }
    }
}

/// `TUNNELTWIN_SEED`, then the scenario, then the world config.
pub fn resolve_seed(env: Option<&str>, scenario: Option<u64>, config: u64) -> u64 {
    env.and_then(|s| s.trim().parse().ok())
        .or(scenario)
        .unwrap_or(config)
}

pub fn seed_from_env() -> Option<u64> {
    std::env::var("TUNNELTWIN_SEED").ok()?.trim().parse().ok()
}

/// Finds a signal by full name or by a unique `_`-separated suffix.
pub fn resolve_signal(bus: &SignalBus, name: &str) -> Result<String, HarnessError> {
    if bus.contains(name) {
        return Ok(name.to_string());
    }
    let suffix = format!("_{name}");
    let hits: Vec<String> = bus
        .defs()
        .into_iter()
        .map(|d| d.name)
        .filter(|n| n.ends_with(&suffix))
        .collect();
    match hits.len() {
        0 => Err(HarnessError::UnknownSignal(name.to_string())),
        1 => Ok(hits.into_iter().next().unwrap()),
        _ => Err(HarnessError::AmbiguousSignal(name.to_string(), hits.join(", "))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub line: usize,
    pub signal: String,
    pub expected: bool,
    pub pass: bool,
    /// When the expectation was met, or when its window closed.
    pub time: f64,
}

#[derive(Debug, Clone)]
struct PendingExpect {
    line: usize,
    signal: String,
    id: SignalId,
    expected: bool,
    deadline: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Vec<TraceRow>,
    pub verdicts: Vec<Verdict>,
    pub livelock: Option<LivelockInfo>,
    pub status: ExitStatus,
    pub sim_time: f64,
    pub ticks: u64,
}

impl RunOutcome {
    pub fn first_failure(&self) -> Option<&Verdict> {
        self.verdicts
            .iter()
            .filter(|v| !v.pass)
            .min_by(|a, b| a.time.total_cmp(&b.time))
    }
}

pub struct Runner {
    world: World,
    link: Option<Box<dyn PlcLink + Send>>,
    changes: Receiver<ChangeEvent>,
    trace: Vec<TraceRow>,
    events: Vec<TimedCommand>,
    next_event: usize,
    releases: Vec<(u64, SignalId)>,
    pending: Vec<PendingExpect>,
    verdicts: Vec<Verdict>,
    livelock: Option<LivelockInfo>,
    reconnect_tick: Option<u64>,
    end_tick: u64,
}

impl Runner {
    pub fn new(cfg: RunConfig) -> Result<Self, HarnessError> {
        let mut world_cfg = cfg.world;
        world_cfg.seed = cfg
            .seed_override
            .or(cfg.scenario.seed)
            .unwrap_or(world_cfg.seed);
        let bus = SignalBus::new();
        let changes = bus.subscribe();
        let world = World::new(world_cfg, bus.clone())?;
        let rate = world.cfg.tick_rate as f64;
        let duration = cfg
            .duration
            .or(cfg.scenario.duration)
            .unwrap_or_else(|| cfg.scenario.natural_end() + 1.0);
        let end_tick = ((duration * rate) - TIME_EPS).ceil().max(1.0) as u64;
        let mut link: Option<Box<dyn PlcLink + Send>> = match cfg.plc {
            PlcBinding::None => None,
            PlcBinding::Inproc {
                controller,
                policy,
                period,
            } => {
                let policy = policy.unwrap_or_else(|| controller_policy(&controller));
                let sim = Endpoint::new(Role::Sim, policy.clone(), bus.clone())?;
                let plc = PlcPeer::new(policy, Some(controller), period.unwrap_or(1.0 / rate))?;
                Some(Box::new(InprocLink::new(sim, plc)))
            }
            PlcBinding::Tcp { addr, policy } => {
                let sim = Endpoint::new(Role::Sim, policy, bus.clone())?;
                Some(Box::new(TcpLink::new(addr, sim)))
            }
        };
        if let Some(l) = link.as_mut() {
            l.connect(0)?;
        }
        let mut runner = Runner {
            world,
            link,
            changes,
            trace: Vec::new(),
            events: cfg.scenario.events,
            next_event: 0,
            releases: Vec::new(),
            pending: Vec::new(),
            verdicts: Vec::new(),
            livelock: None,
            reconnect_tick: None,
            end_tick,
        };
        runner.collect_trace();
        Ok(runner)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn bus(&self) -> &SignalBus {
        self.world.bus()
    }

    pub fn sim_time(&self) -> f64 {
        self.world.sim_time()
    }

    pub fn end_tick(&self) -> u64 {
        self.end_tick
    }

    pub fn is_finished(&self) -> bool {
        self.world.tick_count() >= self.end_tick || self.livelock.is_some()
    }

    pub fn livelock(&self) -> Option<&LivelockInfo> {
        self.livelock.as_ref()
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn plc_connected(&self) -> bool {
        self.link.as_ref().is_some_and(|l| l.is_connected())
    }

    fn rate(&self) -> f64 {
        self.world.cfg.tick_rate as f64
    }

    /// Ticks a press stays true: 0.05 s rounded up to whole ticks.
    pub fn press_ticks(&self) -> u64 {
        ((PRESS_SECONDS * self.rate()) - TIME_EPS).ceil().max(1.0) as u64
    }

    /// Runs one command at the current tick boundary.
    pub fn execute(&mut self, cmd: &Command, line: usize) -> Result<(), HarnessError> {
        let now = self.sim_time();
        match cmd {
            Command::Press(name) => {
                let name = resolve_signal(self.bus(), name)?;
                let def = self.bus().def(&name).expect("resolved");
                if def.kind != SignalKind::Button {
                    return Err(HarnessError::NotAButton(name));
                }
                let id = self.bus().id(&name).expect("resolved");
                self.bus().write_id(id, true, now);
                let until = self.world.tick_count() + self.press_ticks();
                self.releases.retain(|(_, r)| *r != id);
                self.releases.push((until, id));
            }
            Command::Expect { signal, value, within } => {
                let name = resolve_signal(self.bus(), signal)?;
                let id = self.bus().id(&name).expect("resolved");
                self.pending.push(PendingExpect {
                    line,
                    signal: name,
                    id,
                    expected: *value,
                    deadline: now + within,
                });
                self.check_expects();
            }
            Command::Spawn { kind, tube, index } => {
                let lane = self
                    .world
                    .lane_index(*tube, *index)
                    .ok_or(HarnessError::UnknownLane(*tube, *index))?;
                self.world.apply(&WorldCommand::Spawn { kind: *kind, lane })?;
            }
            Command::SetSmoke { tube, level } => self.world.apply(&WorldCommand::SetSmoke {
                tube: *tube,
                level: *level,
            })?,
            Command::Traffic(on) => self.world.apply(&WorldCommand::SetTraffic(*on))?,
            Command::FillCellar { cellar, inflow } => self.world.apply(&WorldCommand::FillCellar {
                cellar: cellar.clone(),
                inflow: *inflow,
            })?,
            Command::SetLightIntensity(i) => self.world.apply(&WorldCommand::SetLightIntensity(*i))?,
            Command::Toggle(target) => self.world.apply(&WorldCommand::Toggle(target.clone()))?,
            Command::DeleteTraffic => self.world.apply(&WorldCommand::DeleteTraffic)?,
        }
        self.collect_trace();
        Ok(())
    }

    fn check_expects(&mut self) {
        let now = self.sim_time();
        let bus = self.world.bus().clone();
        let mut still = Vec::new();
        for e in self.pending.drain(..) {
            if bus.read_id(e.id) == e.expected {
                self.verdicts.push(Verdict {
                    line: e.line,
                    signal: e.signal,
                    expected: e.expected,
                    pass: true,
                    time: now,
                });
            } else if now > e.deadline + TIME_EPS {
                log::warn!("expect at line {} failed: {} never became {}", e.line, e.signal, e.expected as u8);
                self.verdicts.push(Verdict {
                    line: e.line,
                    signal: e.signal,
                    expected: e.expected,
                    pass: false,
                    time: now,
                });
            } else {
                still.push(e);
            }
        }
        self.pending = still;
    }

    fn collect_trace(&mut self) {
        while let Ok(ev) = self.changes.try_recv() {
            self.trace.push(TraceRow {
                time: ev.time,
                signal: ev.name.to_string(),
                value: ev.value,
            });
        }
    }

    fn release_pulses(&mut self) {
        let tick = self.world.tick_count();
        let now = self.sim_time();
        let bus = self.world.bus().clone();
        self.releases.retain(|(until, id)| {
            if *until <= tick {
                bus.write_id(*id, false, now);
                false
            } else {
                true
            }
        });
    }

    /// Advances one tick: due releases and scenario commands, the plant
    /// step, the PLC exchange, then expectation checks.
    pub fn step(&mut self) -> Result<(), HarnessError> {
        self.release_pulses();
        let now = self.sim_time();
        while let Some(ev) = self.events.get(self.next_event) {
            if ev.at > now + TIME_EPS {
                break;
            }
            let ev = ev.clone();
            self.next_event += 1;
            self.execute(&ev.command, ev.line)?;
        }
        self.world.step();
        self.sync_plc()?;
        self.check_expects();
        self.collect_trace();
        Ok(())
    }

    fn sync_plc(&mut self) -> Result<(), HarnessError> {
        let tick = self.world.tick_count();
        let t_us = (tick as f64 * 1e6 / self.rate()).round() as u64;
        let reconnect_every = (RECONNECT_SECONDS * self.rate()).ceil() as u64;
        let Some(link) = self.link.as_mut() else {
            return Ok(());
        };
        let result = if link.is_connected() {
            link.sync(t_us)
        } else if self.reconnect_tick.is_some_and(|t| tick >= t) {
            log::info!("reconnecting to the PLC at t={:.3}", t_us as f64 * 1e-6);
            link.connect(t_us)
        } else {
            return Ok(());
        };
        match result {
            Ok(()) => self.reconnect_tick = None,
            Err(e @ GatewayError::PolicyMismatch(_)) => return Err(e.into()),
            Err(e) => {
                if self.reconnect_tick.is_none() {
                    log::warn!("PLC link down ({e}); actuators held at their last values");
                }
                self.reconnect_tick = Some(tick + reconnect_every);
            }
        }
        if let Some(info) = link.livelock() {
            self.livelock = Some(info);
        }
        Ok(())
    }

    /// Drops the PLC connection as if the network failed; the runner tries
    /// to reconnect a second of sim time later.
    pub fn disconnect_plc(&mut self) {
        if let Some(l) = self.link.as_mut() {
            l.disconnect();
            let every = (RECONNECT_SECONDS * self.world.cfg.tick_rate as f64).ceil() as u64;
            self.reconnect_tick = Some(self.world.tick_count() + every);
        }
    }

    pub fn link_stats(&self) -> Option<crate::gateway::LinkStats> {
        self.link.as_ref().map(|l| l.stats())
    }

    /// Runs to the end of the scenario.
    pub fn run(mut self) -> Result<RunOutcome, HarnessError> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(mut self) -> RunOutcome {
        self.collect_trace();
        let now = self.sim_time();
        for e in self.pending.drain(..) {
            self.verdicts.push(Verdict {
                line: e.line,
                signal: e.signal,
                expected: e.expected,
                pass: false,
                time: now,
            });
        }
        let status = if self.livelock.is_some() {
            ExitStatus::Livelock
        } else if self.verdicts.iter().any(|v| !v.pass) {
            ExitStatus::ExpectFailed
        } else {
            ExitStatus::Pass
        };
        RunOutcome {
            trace: self.trace,
            verdicts: self.verdicts,
            livelock: self.livelock,
            status,
            sim_time: now,
            ticks: self.world.tick_count(),
        }
    }

    /// Current value of every signal, by name.
    pub fn image(&self) -> BTreeMap<String, bool> {
        self.bus().snapshot()
    }
}
