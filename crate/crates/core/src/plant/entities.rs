//! Controlled tunnel entities. Each one owns an [`Io`] binding its actuator
//! and sensor short names to bus handles; the world reads the actuators,
//! calls `apply`, and publishes whatever the entity senses.

use std::collections::BTreeMap;

use serde::Serialize;

use super::barrier::{Barrier, BarrierActuators, BarrierSensors};
use super::config::CellarParams;
use super::levels::{one_hot_apply, Cellar};
use crate::bus::{BusError, Direction, SignalBus, SignalDef, SignalId, SignalKind};

/// PLC name of an entity signal, e.g.
/// `dvar_M_M_HW_TrafficTube_1_BoomBarrier_1_a_open`.
pub fn signal_name(direction: Direction, prefix: &str, short: &str) -> String {
    let tag = match direction {
        Direction::Input => "ivar",
        Direction::Output => "dvar",
    };
    format!("{tag}_M_M_HW_{prefix}_{short}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Io {
    pub path: String,
    #[serde(skip)]
    pub act_names: Vec<String>,
    #[serde(skip)]
    pub sens_names: Vec<String>,
    #[serde(skip)]
    acts: Vec<SignalId>,
    #[serde(skip)]
    sens: Vec<SignalId>,
}

impl Io {
    pub fn read(&self, bus: &SignalBus) -> Vec<bool> {
        self.acts.iter().map(|id| bus.read_id(*id)).collect()
    }

    pub fn publish(&self, values: &[bool], out: &mut Vec<(SignalId, bool)>) {
        debug_assert_eq!(values.len(), self.sens.len(), "{}", self.path);
        out.extend(self.sens.iter().copied().zip(values.iter().copied()));
    }

    pub fn sensor_ids(&self) -> &[SignalId] {
        &self.sens
    }
}

/// Creates entity bindings, registering every signal the bus lacks.
pub struct Registrar<'a> {
    pub bus: &'a SignalBus,
    pub prefixes: &'a BTreeMap<String, String>,
}

impl Registrar<'_> {
    pub fn prefix(&self, path: &str) -> String {
        self.prefixes
            .get(path)
            .cloned()
            .unwrap_or_else(|| path.replace('/', "_"))
    }

    pub fn io<A: AsRef<str>, S: AsRef<str>>(&self, path: &str, acts: &[A], sens: &[S]) -> Result<Io, BusError> {
        let prefix = self.prefix(path);
        let bind = |short: &str, direction, kind| -> Result<SignalId, BusError> {
            let name = signal_name(direction, &prefix, short);
            match self.bus.id(&name) {
                Some(id) => Ok(id),
                None => self.bus.register(SignalDef::from_name(name, kind)),
            }
        };
        let acts_ids = acts
            .iter()
            .map(|a| bind(a.as_ref(), Direction::Output, SignalKind::Actuator))
            .collect::<Result<_, _>>()?;
        let sens_ids = sens
            .iter()
            .map(|s| bind(s.as_ref(), Direction::Input, SignalKind::Sensor))
            .collect::<Result<_, _>>()?;
        Ok(Io {
            path: path.to_string(),
            act_names: acts.iter().map(|a| a.as_ref().to_string()).collect(),
            sens_names: sens.iter().map(|s| s.as_ref().to_string()).collect(),
            acts: acts_ids,
            sens: sens_ids,
        })
    }
}

pub fn level_names(prefix: &str) -> Vec<String> {
    (0..9).map(|i| format!("{prefix}{i}")).collect()
}

pub fn one_hot(level: u8) -> Vec<bool> {
    (0..9).map(|i| i == level).collect()
}

/// Exactly-one actuator set selecting a discrete state. `hold` names the
/// actuator that means "leave the state as it is".
#[derive(Debug, Clone, Serialize)]
pub struct Selector {
    pub io: Io,
    pub state: String,
    #[serde(skip)]
    current: usize,
    #[serde(skip)]
    hold: Option<usize>,
    pub warning: bool,
}

impl Selector {
    pub fn new(io: Io, initial: usize, hold: Option<usize>) -> Self {
        Selector {
            state: io.act_names[initial].clone(),
            io,
            current: initial,
            hold,
            warning: false,
        }
    }

    pub fn is(&self, short: &str) -> bool {
        self.state == short
    }

    /// Returns true when the state changed.
    pub fn apply(&mut self, acts: &[bool]) -> bool {
        let trues: Vec<usize> = (0..acts.len()).filter(|i| acts[*i]).collect();
        self.warning = trues.len() > 1;
        match trues.as_slice() {
            [i] if Some(*i) != self.hold && *i != self.current => {
                self.current = *i;
                self.state = self.io.act_names[*i].clone();
                true
            }
            _ => false,
        }
    }
}

/// Single on/off actuator without a sensor.
#[derive(Debug, Clone, Serialize)]
pub struct Switch {
    pub io: Io,
    pub on: bool,
}

impl Switch {
    pub fn apply(&mut self, acts: &[bool]) {
        self.on = acts[0];
    }
}

/// Nine one-hot actuators selecting a level 0..=8.
#[derive(Debug, Clone, Serialize)]
pub struct LevelBank {
    pub io: Io,
    pub level: u8,
    pub warning: bool,
}

impl LevelBank {
    pub fn apply(&mut self, acts: &[bool]) {
        let (level, warning) = one_hot_apply(acts, self.level);
        self.level = level;
        self.warning = warning;
    }
}

/// Sensor-only entity; the world fills in `values`.
#[derive(Debug, Clone, Serialize)]
pub struct Sensors {
    pub io: Io,
    pub values: Vec<bool>,
}

impl Sensors {
    pub fn new(io: Io) -> Self {
        let n = io.sens_names.len();
        Sensors {
            io,
            values: vec![false; n],
        }
    }

    pub fn get(&self, short: &str) -> bool {
        self.io
            .sens_names
            .iter()
            .position(|s| s == short)
            .map(|i| self.values[i])
            .unwrap_or(false)
    }
}

/// Operator-toggled elements such as doors and cabinet equipment. Sensor i
/// mirrors item i; with `paired`, sensor n+i carries the complement.
#[derive(Debug, Clone, Serialize)]
pub struct ToggleSet {
    pub io: Io,
    pub items: Vec<String>,
    pub values: Vec<bool>,
    #[serde(skip)]
    paired: bool,
}

impl ToggleSet {
    pub fn new(io: Io, items: &[&str], paired: bool) -> Self {
        ToggleSet {
            io,
            items: items.iter().map(|s| s.to_string()).collect(),
            values: vec![false; items.len()],
            paired,
        }
    }

    /// Flips `item`, or the first item when none is named.
    pub fn toggle(&mut self, item: Option<&str>) -> Option<bool> {
        let i = match item {
            None => 0,
            Some(name) => self.items.iter().position(|x| x == name)?,
        };
        self.values[i] = !self.values[i];
        Some(self.values[i])
    }

    pub fn sense(&self) -> Vec<bool> {
        let mut out = self.values.clone();
        if self.paired {
            out.extend(self.values.iter().map(|v| !v));
        }
        out
    }
}

pub const BARRIER_ACTUATORS: [&str; 4] = ["a_noChoice", "a_open", "a_stop", "a_close"];
pub const BARRIER_SENSORS: [&str; 7] = [
    "s_opened",
    "s_opening",
    "s_stopped",
    "s_closing",
    "s_closed",
    "s_obst_on",
    "s_obst_off",
];

#[derive(Debug, Clone, Serialize)]
pub struct BarrierUnit {
    pub io: Io,
    pub barrier: Barrier,
    /// Position along the lane, m.
    pub position: f64,
    pub obstacle: bool,
}

impl BarrierUnit {
    pub fn apply(&mut self, acts: &[bool], dt: f64) {
        let a = BarrierActuators {
            no_choice: acts[0],
            open: acts[1],
            stop: acts[2],
            close: acts[3],
        };
        self.barrier.tick(a, dt);
    }

    pub fn sensors(&self) -> BarrierSensors {
        self.barrier.sensors(self.obstacle)
    }

    pub fn sense(&self) -> Vec<bool> {
        let s = self.sensors();
        let mut v = s.motion().to_vec();
        if self.io.sens_names.len() == BARRIER_SENSORS.len() {
            v.extend([s.obst_on, s.obst_off]);
        }
        v
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellarUnit {
    pub io: Io,
    pub cellar: Cellar,
}

impl CellarUnit {
    pub fn sensor_names(p: &CellarParams) -> Vec<String> {
        p.thresholds
            .keys()
            .flat_map(|k| [format!("s_{k}_on"), format!("s_{k}_off")])
            .collect()
    }

    pub fn sense(&self) -> Vec<bool> {
        self.cellar.sensors().flat_map(|(_, on)| [on, !on]).collect()
    }
}

/// Public-address system. A recorded message plays for a fixed duration;
/// `s_recordingStopped` is false while it plays.
#[derive(Debug, Clone, Serialize)]
pub struct Broadcast {
    pub mode: Selector,
    /// Seconds since the current message started.
    pub playing: Option<f64>,
}

impl Broadcast {
    pub fn sense(&self, duration: f64) -> Vec<bool> {
        vec![!matches!(self.playing, Some(t) if t < duration - 1e-9)]
    }
}

/// Broadcast synchronisation watchdog.
#[derive(Debug, Clone, Serialize)]
pub struct BroadcastSync {
    pub io: Io,
    /// None while switched off.
    pub timer: Option<f64>,
    #[serde(skip)]
    last_reset: bool,
}

impl BroadcastSync {
    pub fn new(io: Io) -> Self {
        BroadcastSync {
            io,
            timer: Some(0.0),
            last_reset: false,
        }
    }

    pub fn apply(&mut self, acts: &[bool], dt: f64) {
        let (off, reset) = (acts[0], acts[1]);
        let rising = reset && !self.last_reset;
        self.last_reset = reset;
        if off {
            self.timer = None;
            return;
        }
        let t = if rising { 0.0 } else { self.timer.unwrap_or(0.0) };
        self.timer = Some(t + dt);
    }

    pub fn sense(&self, t_sync: f64) -> Vec<bool> {
        // tolerate the rounding of summed tick lengths
        vec![matches!(self.timer, Some(t) if t >= t_sync - 1e-9)]
    }
}
