//! Couples the plant's signal bus to a soft PLC, either in-process or over
//! TCP. Both bindings drive the same sans-IO [`Endpoint`] state machine, so
//! they produce the same message sequence; only the transport differs.
//!
//! The simulation side drives time: after each plant tick it sends its
//! pending sensor flips followed by `PING <t_us>`. The PLC side applies the
//! flips, runs every scan due up to `t_us`, answers with its output flips
//! and `PONG <t_us>`.

pub mod tcp;
pub mod wire;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::mpsc::Receiver;

use thiserror::Error;

use crate::bus::{BusError, ChangeEvent, Direction, NamingRule, SignalBus, SignalId};
use crate::gts::{Controller, GtsError, LivelockInfo, PlcRuntime};
use crate::policy::{sha256_hex, PolicyManifest, PolicySignal, SignalManifest};
pub use tcp::{default_port, serve_plc, TcpLink, DEFAULT_PORT, QUEUE_CAPACITY};
pub use wire::{Message, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("{0}")]
    PolicyMismatch(PolicyDiff),
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Plc(#[from] GtsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sim,
    Plc,
}

impl Role {
    /// Direction of the signals this side is allowed to send.
    pub fn sends(self) -> Direction {
        match self {
            Role::Sim => Direction::Input,
            Role::Plc => Direction::Output,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Sim => "sim",
            Role::Plc => "plc",
        })
    }
}

impl FromStr for Role {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "sim" => Ok(Role::Sim),
            "plc" => Ok(Role::Plc),
            _ => Err(()),
        }
    }
}

/// Names that differ between the local and the remote policy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicyDiff {
    pub local: Option<Role>,
    pub only_local: Vec<String>,
    pub only_remote: Vec<String>,
    /// Same name, different direction or address.
    pub changed: Vec<String>,
}

impl PolicyDiff {
    pub fn between(local: &[PolicySignal], remote: &[PolicySignal]) -> Self {
        let l: BTreeMap<&str, &PolicySignal> = local.iter().map(|s| (s.name.as_str(), s)).collect();
        let r: BTreeMap<&str, &PolicySignal> = remote.iter().map(|s| (s.name.as_str(), s)).collect();
        let mut diff = PolicyDiff::default();
        for (name, s) in &l {
            match r.get(name) {
                None => diff.only_local.push(name.to_string()),
                Some(o) if o != s => diff.changed.push(name.to_string()),
                Some(_) => {}
            }
        }
        diff.only_remote = r.keys().filter(|n| !l.contains_key(*n)).map(|n| n.to_string()).collect();
        diff
    }

    pub fn is_empty(&self) -> bool {
        self.only_local.is_empty() && self.only_remote.is_empty() && self.changed.is_empty()
    }

    /// Every differing signal name.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.only_local
            .iter()
            .chain(&self.only_remote)
            .chain(&self.changed)
            .map(String::as_str)
    }
}

impl fmt::Display for PolicyDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (here, there) = match self.local {
            Some(Role::Sim) => ("sim", "plc"),
            Some(Role::Plc) => ("plc", "sim"),
            None => ("local", "remote"),
        };
        write!(f, "policy mismatch")?;
        if self.is_empty() {
            return write!(f, ": same signals but different order");
        }
        for (label, names) in [
            (format!("only in {here}"), &self.only_local),
            (format!("only in {there}"), &self.only_remote),
            ("different address or direction".to_string(), &self.changed),
        ] {
            if !names.is_empty() {
                write!(f, "; {label}: {}", names.join(", "))?;
            }
        }
        Ok(())
    }
}

/// Policy covering a controller's inputs and published outputs under the
/// default naming rules.
pub fn controller_policy(controller: &Controller) -> PolicyManifest {
    use crate::bus::{SignalDef, SignalKind};
    let mut entries: Vec<SignalDef> = controller
        .output_names()
        .map(|n| SignalDef::from_name(n, SignalKind::Actuator))
        .collect();
    entries.extend(controller.input_names().iter().map(|n| {
        let kind = if n.contains("button") {
            SignalKind::Button
        } else {
            SignalKind::Sensor
        };
        SignalDef::from_name(n.clone(), kind)
    }));
    let names: Vec<&str> = entries.iter().map(|d| d.name.as_str()).collect();
    let manifest = SignalManifest {
        source_digest: sha256_hex(&[names.join("\n").as_bytes()]),
        entries,
    };
    PolicyManifest::from_manifest(&manifest, &NamingRule::inputs_default(), &NamingRule::outputs_default())
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    AwaitHello,
    AwaitPolicy,
    ReadingPolicy { digest: String, count: usize, lines: Vec<PolicySignal> },
    Ready,
}

/// Flip counters for the no-loss audit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub writes_sent: u64,
    pub writes_received: u64,
    pub handshakes: u64,
}

/// Sans-IO protocol state for one side of a link.
pub struct Endpoint {
    role: Role,
    policy: PolicyManifest,
    bus: SignalBus,
    changes: Receiver<ChangeEvent>,
    /// Policy signals this side sends.
    own: Vec<(String, SignalId)>,
    /// Policy signals the peer may write.
    peer: HashMap<String, SignalId>,
    phase: Phase,
    sent_seq: u64,
    recv_seq: u64,
    stats: LinkStats,
}

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Endpoint")
            .field("role", &self.role)
            .field("phase", &self.phase)
            .field("stats", &self.stats)
            .finish()
    }
}

/// What the driver has to act on after a received message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Received {
    Nothing,
    /// Handshake completed; send these resync writes.
    Ready(Vec<Message>),
    Ping(u64),
    Pong(u64),
}

impl Endpoint {
    /// Registers any policy signal missing from `bus`.
    pub fn new(role: Role, policy: PolicyManifest, bus: SignalBus) -> Result<Self, GatewayError> {
        for s in &policy.signals {
            if !bus.contains(&s.name) {
                bus.register(s.to_def())?;
            }
        }
        let id = |s: &PolicySignal| bus.id(&s.name).expect("registered above");
        let own = policy
            .signals
            .iter()
            .filter(|s| s.direction == role.sends())
            .map(|s| (s.name.clone(), id(s)))
            .collect();
        let peer = policy
            .signals
            .iter()
            .filter(|s| s.direction != role.sends())
            .map(|s| (s.name.clone(), id(s)))
            .collect();
        let changes = bus.subscribe();
        Ok(Endpoint {
            role,
            policy,
            bus,
            changes,
            own,
            peer,
            phase: Phase::AwaitHello,
            sent_seq: 0,
            recv_seq: 0,
            stats: LinkStats::default(),
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn bus(&self) -> &SignalBus {
        &self.bus
    }

    pub fn policy(&self) -> &PolicyManifest {
        &self.policy
    }

    pub fn is_ready(&self) -> bool {
        self.phase == Phase::Ready
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    /// Starts a fresh session and returns the opening records.
    pub fn greeting(&mut self) -> Vec<Message> {
        self.phase = Phase::AwaitHello;
        self.sent_seq = 0;
        self.recv_seq = 0;
        // a full image follows the handshake, so older flips are moot
        while self.changes.try_recv().is_ok() {}
        let mut out = vec![
            Message::Hello {
                role: self.role,
                version: PROTOCOL_VERSION,
            },
            Message::Policy {
                digest: self.policy.signal_digest(),
                count: self.policy.signals.len(),
            },
        ];
        out.extend(self.policy.signals.iter().map(|s| Message::Signal {
            direction: s.direction,
            name: s.name.clone(),
            address: s.address.clone(),
        }));
        out.push(Message::EndPolicy);
        out
    }

    fn write_msg(&mut self, name: &str, value: bool) -> Message {
        self.sent_seq += 1;
        self.stats.writes_sent += 1;
        Message::Write {
            seq: self.sent_seq,
            name: name.to_string(),
            value,
        }
    }

    /// Pending local flips of this side's policy signals as WRITE records.
    /// Nothing is produced before the handshake completes.
    pub fn drain(&mut self) -> Vec<Message> {
        let mut out = Vec::new();
        while let Ok(ev) = self.changes.try_recv() {
            if self.phase == Phase::Ready && self.own.iter().any(|(_, id)| *id == ev.id) {
                out.push(self.write_msg(&ev.name, ev.value));
            }
        }
        out
    }

    fn protocol<T>(&self, why: String) -> Result<T, GatewayError> {
        Err(GatewayError::Protocol(why))
    }

    /// Handles one record. WRITEs are applied to the bus at time `now`.
    pub fn receive(&mut self, msg: Message, now: f64) -> Result<Received, GatewayError> {
        let phase = std::mem::replace(&mut self.phase, Phase::AwaitHello);
        match (phase, msg) {
            (Phase::AwaitHello, Message::Hello { role, version }) => {
                if role == self.role {
                    return self.protocol(format!("peer claims the same role `{role}`"));
                }
                if version != PROTOCOL_VERSION {
                    return self.protocol(format!("unsupported protocol version {version}"));
                }
                self.phase = Phase::AwaitPolicy;
                Ok(Received::Nothing)
            }
            (Phase::AwaitPolicy, Message::Policy { digest, count }) => {
                self.phase = Phase::ReadingPolicy {
                    digest,
                    count,
                    lines: Vec::new(),
                };
                Ok(Received::Nothing)
            }
            (
                Phase::ReadingPolicy {
                    digest,
                    count,
                    mut lines,
                },
                Message::Signal {
                    direction,
                    name,
                    address,
                },
            ) => {
                if lines.len() == count {
                    return self.protocol(format!("more than the announced {count} policy lines"));
                }
                lines.push(PolicySignal {
                    name,
                    direction,
                    address,
                });
                self.phase = Phase::ReadingPolicy { digest, count, lines };
                Ok(Received::Nothing)
            }
            (Phase::ReadingPolicy { digest, count, lines }, Message::EndPolicy) => {
                if lines.len() != count {
                    return self.protocol(format!("announced {count} policy lines, got {}", lines.len()));
                }
                let remote = PolicyManifest {
                    version: 1,
                    signals: lines,
                    source_digest: String::new(),
                };
                if remote.signal_digest() != digest {
                    return self.protocol("policy digest does not match its lines".into());
                }
                if digest != self.policy.signal_digest() {
                    let mut diff = PolicyDiff::between(&self.policy.signals, &remote.signals);
                    diff.local = Some(self.role);
                    return Err(GatewayError::PolicyMismatch(diff));
                }
                self.phase = Phase::Ready;
                self.stats.handshakes += 1;
                let image: Vec<(String, bool)> = self
                    .own
                    .iter()
                    .map(|(n, id)| (n.clone(), self.bus.read_id(*id)))
                    .collect();
                while self.changes.try_recv().is_ok() {}
                let writes = image.into_iter().map(|(n, v)| self.write_msg(&n, v)).collect();
                Ok(Received::Ready(writes))
            }
            (Phase::Ready, Message::Write { seq, name, value }) => {
                self.phase = Phase::Ready;
                if seq != self.recv_seq + 1 {
                    return self.protocol(format!("expected seq {}, got {seq}", self.recv_seq + 1));
                }
                let Some(id) = self.peer.get(&name).copied() else {
                    return self.protocol(format!("peer may not write `{name}`"));
                };
                self.recv_seq = seq;
                self.stats.writes_received += 1;
                self.bus.write_id(id, value, now);
                Ok(Received::Nothing)
            }
            (Phase::Ready, Message::Ping(n)) => {
                self.phase = Phase::Ready;
                Ok(Received::Ping(n))
            }
            (Phase::Ready, Message::Pong(n)) => {
                self.phase = Phase::Ready;
                Ok(Received::Pong(n))
            }
            (phase, msg) => {
                let why = format!("unexpected `{msg}` in phase {phase:?}");
                self.phase = phase;
                self.protocol(why)
            }
        }
    }
}

/// PLC side of a link: an endpoint plus the runtime it advances on PING.
#[derive(Debug)]
pub struct PlcPeer {
    pub endpoint: Endpoint,
    pub runtime: Option<PlcRuntime>,
}

impl PlcPeer {
    /// Builds the PLC bus from the policy and binds `controller` to it.
    pub fn new(policy: PolicyManifest, controller: Option<Controller>, period: f64) -> Result<Self, GatewayError> {
        let bus = SignalBus::new();
        let endpoint = Endpoint::new(Role::Plc, policy, bus.clone())?;
        let runtime = controller
            .map(|c| PlcRuntime::new(c, bus, period))
            .transpose()?;
        Ok(PlcPeer { endpoint, runtime })
    }

    fn now(&self) -> f64 {
        self.runtime.as_ref().map_or(0.0, |r| r.now_us() as f64 * 1e-6)
    }

    pub fn greeting(&mut self) -> Vec<Message> {
        self.endpoint.greeting()
    }

    /// Handles one record and returns the records to send back.
    pub fn on_message(&mut self, msg: Message) -> Result<Vec<Message>, GatewayError> {
        let now = self.now();
        match self.endpoint.receive(msg, now)? {
            Received::Nothing => Ok(Vec::new()),
            Received::Ready(writes) => Ok(writes),
            Received::Ping(t_us) => {
                if let Some(rt) = self.runtime.as_mut() {
                    rt.advance_to(t_us)?;
                }
                let mut out = self.endpoint.drain();
                out.push(Message::Pong(t_us));
                Ok(out)
            }
            Received::Pong(_) => Err(GatewayError::Protocol("unsolicited PONG".into())),
        }
    }

    pub fn livelock(&self) -> Option<&LivelockInfo> {
        self.runtime.as_ref().and_then(|r| r.halted())
    }
}

/// Simulation-side view of a PLC connection.
pub trait PlcLink {
    /// (Re)runs the handshake and full-image resync at sim time `t_us`.
    fn connect(&mut self, t_us: u64) -> Result<(), GatewayError>;
    /// Sends pending flips, lets the PLC catch up to `t_us` and applies its
    /// answers before returning.
    fn sync(&mut self, t_us: u64) -> Result<(), GatewayError>;
    fn is_connected(&self) -> bool;
    /// Closes the transport, keeping the plant's actuator values.
    fn disconnect(&mut self) {}
    /// Livelock reported by a PLC running in this process.
    fn livelock(&self) -> Option<LivelockInfo> {
        None
    }
    fn stats(&self) -> LinkStats;
}

/// Both endpoints in one process, exchanging records through a direct call.
#[derive(Debug)]
pub struct InprocLink {
    sim: Endpoint,
    plc: PlcPeer,
    /// Every record in order, when recording is on.
    pub transcript: Option<Vec<String>>,
}

impl InprocLink {
    pub fn new(sim: Endpoint, plc: PlcPeer) -> Self {
        InprocLink {
            sim,
            plc,
            transcript: None,
        }
    }

    pub fn plc(&self) -> &PlcPeer {
        &self.plc
    }

    pub fn plc_mut(&mut self) -> &mut PlcPeer {
        &mut self.plc
    }

    fn log(&mut self, from: Role, msgs: &[Message]) {
        if let Some(t) = self.transcript.as_mut() {
            t.extend(msgs.iter().map(|m| format!("{from}> {m}")));
        }
    }

    /// Delivers `to_plc`, then feeds the replies to the sim side until the
    /// PONG for `t_us` (if any) arrives.
    fn exchange(&mut self, to_plc: Vec<Message>, t_us: u64) -> Result<(), GatewayError> {
        self.log(Role::Sim, &to_plc);
        let mut replies = Vec::new();
        for m in to_plc {
            replies.extend(self.plc.on_message(m)?);
        }
        self.log(Role::Plc, &replies);
        let now = t_us as f64 * 1e-6;
        let mut follow_up = Vec::new();
        for m in replies {
            if let Received::Ready(w) = self.sim.receive(m, now)? {
                follow_up.extend(w);
            }
        }
        if !follow_up.is_empty() {
            self.exchange(follow_up, t_us)?;
        }
        Ok(())
    }
}

impl PlcLink for InprocLink {
    fn connect(&mut self, t_us: u64) -> Result<(), GatewayError> {
        let plc_hello = self.plc.greeting();
        let sim_hello = self.sim.greeting();
        self.log(Role::Plc, &plc_hello);
        let now = t_us as f64 * 1e-6;
        let mut sim_resync = Vec::new();
        for m in plc_hello {
            if let Received::Ready(w) = self.sim.receive(m, now)? {
                sim_resync = w;
            }
        }
        let mut first = sim_hello;
        first.extend(sim_resync);
        self.exchange(first, t_us)?;
        self.sync(t_us)
    }

    fn sync(&mut self, t_us: u64) -> Result<(), GatewayError> {
        let mut msgs = self.sim.drain();
        msgs.push(Message::Ping(t_us));
        self.exchange(msgs, t_us)
    }

    fn is_connected(&self) -> bool {
        self.sim.is_ready()
    }

    fn livelock(&self) -> Option<LivelockInfo> {
        self.plc.livelock().cloned()
    }

    fn stats(&self) -> LinkStats {
        self.sim.stats()
    }
}
