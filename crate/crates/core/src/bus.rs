//! In-memory registry of named Boolean PLC points.
//!
//! Every point is a [`SignalLatch`] with change-only semantics: writing the
//! value a latch already holds is a no-op, a flip bumps the sequence counter
//! and emits one [`ChangeEvent`] to every subscriber, in write order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::mpsc;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Placeholder substituted by [`NamingRule`].
pub const IO_NAME_PLACEHOLDER: &str = "{{IO_NAME}}";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("signal `{0}` is already registered")]
    DuplicateName(String),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("naming rule `{template}` must contain {{{{IO_NAME}}}} exactly once (found {count})")]
    BadTemplate { template: String, count: usize },
    #[error("signal `{name}`: {reason}")]
    InvalidDefinition { name: String, reason: &'static str },
}

/// Direction as seen from the PLC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Input,
    Output,
}

impl Direction {
    pub fn wire_tag(self) -> &'static str {
        match self {
            Direction::Input => "IN",
            Direction::Output => "OUT",
        }
    }

    pub fn from_wire_tag(tag: &str) -> Option<Self> {
        match tag {
            "IN" => Some(Direction::Input),
            "OUT" => Some(Direction::Output),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Sensor,
    Actuator,
    Button,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignalDef {
    pub name: String,
    pub direction: Direction,
    pub group: String,
    pub kind: SignalKind,
}

impl SignalDef {
    /// Builds a definition whose direction follows the `ivar`/`dvar` prefix
    /// and whose group is derived from the name.
    pub fn from_name(name: impl Into<String>, kind: SignalKind) -> Self {
        let name = name.into();
        let direction = match kind {
            SignalKind::Actuator => Direction::Output,
            SignalKind::Sensor | SignalKind::Button => Direction::Input,
        };
        let group = group_of(&name);
        SignalDef {
            name,
            direction,
            group,
            kind,
        }
    }

    pub fn validate(&self) -> Result<(), BusError> {
        let bad = |reason| {
            Err(BusError::InvalidDefinition {
                name: self.name.clone(),
                reason,
            })
        };
        if self.name.is_empty() || self.name.chars().any(char::is_whitespace) {
            return bad("names must be non-empty and contain no whitespace");
        }
        match (self.direction, self.kind) {
            (Direction::Input, SignalKind::Sensor | SignalKind::Button) => {
                if !self.name.starts_with("ivar") {
                    return bad("input names must start with `ivar`");
                }
            }
            (Direction::Output, SignalKind::Actuator) => {
                if !self.name.starts_with("dvar") {
                    return bad("output names must start with `dvar`");
                }
            }
            _ => return bad("direction does not match kind"),
        }
        Ok(())
    }

    /// Name relative to the group, e.g. `a_open`.
    pub fn short_name(&self) -> &str {
        short_name_of(&self.name)
    }
}

/// Strips the `ivar_`/`dvar_` prefix and the `M_M_`/`HW_` path markers.
fn strip_markers(name: &str) -> &str {
    let mut rest = name;
    for prefix in ["ivar_", "dvar_"] {
        if let Some(r) = rest.strip_prefix(prefix) {
            rest = r;
            break;
        }
    }
    while let Some(r) = rest.strip_prefix("M_") {
        rest = r;
    }
    rest.strip_prefix("HW_").unwrap_or(rest)
}

/// Byte offset of the short name inside `stripped`: the last `s_`/`a_`
/// token, else a `button` token, else the whole string.
fn split_point(stripped: &str) -> Option<usize> {
    let last_io = ["_s_", "_a_"]
        .iter()
        .filter_map(|tok| stripped.rfind(tok))
        .max()
        .map(|i| i + 1);
    if last_io.is_some() {
        return last_io;
    }
    if stripped.starts_with("s_") || stripped.starts_with("a_") {
        return Some(0);
    }
    stripped.rfind("_button").map(|i| i + 1)
}

pub fn short_name_of(name: &str) -> &str {
    let stripped = strip_markers(name);
    match split_point(stripped) {
        Some(i) => &stripped[i..],
        None => stripped,
    }
}

/// Entity path of a PLC name: `dvar_M_M_HW_TrafficTube_1_BoomBarrier_2_a_open`
/// belongs to `TrafficTube_1/BoomBarrier_2`.
pub fn group_of(name: &str) -> String {
    let stripped = strip_markers(name);
    let prefix = match split_point(stripped) {
        Some(0) | None => return String::new(),
        Some(i) => &stripped[..i - 1],
    };
    let mut segments: Vec<String> = Vec::new();
    for token in prefix.split('_').filter(|t| !t.is_empty()) {
        let numeric = token.chars().all(|c| c.is_ascii_digit());
        match segments.last_mut() {
            Some(last) if numeric => {
                last.push('_');
                last.push_str(token);
            }
            _ => segments.push(token.to_string()),
        }
    }
    segments.join("/")
}

/// Address template such as `MAIN.state0.{{IO_NAME}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamingRule {
    template: String,
}

impl NamingRule {
    pub fn new(template: impl Into<String>) -> Result<Self, BusError> {
        let template = template.into();
        let count = template.matches(IO_NAME_PLACEHOLDER).count();
        if count != 1 {
            return Err(BusError::BadTemplate { template, count });
        }
        Ok(NamingRule { template })
    }

    pub fn outputs_default() -> Self {
        NamingRule {
            template: "MAIN.state0.{{IO_NAME}}".into(),
        }
    }

    pub fn inputs_default() -> Self {
        NamingRule {
            template: "INPUTS.{{IO_NAME}}".into(),
        }
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn resolve(&self, name: &str) -> String {
        self.template.replacen(IO_NAME_PLACEHOLDER, name, 1)
    }
}

/// Substitutes `name` into `template`, validating the template first.
pub fn resolve_address(name: &str, template: &str) -> Result<String, BusError> {
    Ok(NamingRule::new(template)?.resolve(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignalLatch {
    pub value: bool,
    /// Simulation time of the last flip, seconds.
    pub last_changed: f64,
    pub seq: u64,
}

impl SignalLatch {
    /// Returns true iff the stored value flipped.
    pub fn set(&mut self, value: bool, t: f64) -> bool {
        if self.value == value {
            return false;
        }
        self.value = value;
        self.last_changed = t;
        self.seq += 1;
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEvent {
    pub id: SignalId,
    pub name: Arc<str>,
    pub value: bool,
    pub time: f64,
    pub seq: u64,
}

struct Entry {
    def: SignalDef,
    name: Arc<str>,
    latch: SignalLatch,
}

#[derive(Default)]
struct Inner {
    entries: Vec<Entry>,
    by_name: HashMap<String, SignalId>,
    subscribers: Vec<mpsc::Sender<ChangeEvent>>,
}

/// Thread-safe signal registry. Cloning shares the same registry.
#[derive(Clone, Default)]
pub struct SignalBus {
    inner: Arc<Mutex<Inner>>,
}

impl fmt::Debug for SignalBus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignalBus")
            .field("signals", &self.len())
            .finish()
    }
}

impl SignalBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_defs<'a>(defs: impl IntoIterator<Item = &'a SignalDef>) -> Result<Self, BusError> {
        let bus = Self::new();
        for def in defs {
            bus.register(def.clone())?;
        }
        Ok(bus)
    }

    pub fn register(&self, def: SignalDef) -> Result<SignalId, BusError> {
        def.validate()?;
        let mut inner = self.inner.lock();
        if inner.by_name.contains_key(&def.name) {
            return Err(BusError::DuplicateName(def.name));
        }
        let id = SignalId(inner.entries.len() as u32);
        inner.by_name.insert(def.name.clone(), id);
        let name: Arc<str> = Arc::from(def.name.as_str());
        inner.entries.push(Entry {
            def,
            name,
            latch: SignalLatch::default(),
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self, name: &str) -> Option<SignalId> {
        self.inner.lock().by_name.get(name).copied()
    }

    pub fn def(&self, name: &str) -> Option<SignalDef> {
        let inner = self.inner.lock();
        let id = inner.by_name.get(name)?;
        Some(inner.entries[id.0 as usize].def.clone())
    }

    pub fn defs(&self) -> Vec<SignalDef> {
        self.inner
            .lock()
            .entries
            .iter()
            .map(|e| e.def.clone())
            .collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.inner.lock().by_name.contains_key(name)
    }

    /// Receives every subsequent flip, in write order.
    pub fn subscribe(&self) -> mpsc::Receiver<ChangeEvent> {
        let (tx, rx) = mpsc::channel();
        self.inner.lock().subscribers.push(tx);
        rx
    }

    pub fn write(&self, name: &str, value: bool, t: f64) -> Result<bool, BusError> {
        let mut inner = self.inner.lock();
        let id = *inner
            .by_name
            .get(name)
            .ok_or_else(|| BusError::UnknownSignal(name.to_string()))?;
        Ok(write_locked(&mut inner, id, value, t))
    }

    pub fn write_id(&self, id: SignalId, value: bool, t: f64) -> bool {
        let mut inner = self.inner.lock();
        write_locked(&mut inner, id, value, t)
    }

    /// Applies a batch of writes under one lock.
    pub fn write_batch(&self, writes: &[(SignalId, bool)], t: f64) -> usize {
        let mut inner = self.inner.lock();
        writes
            .iter()
            .filter(|(id, v)| write_locked(&mut inner, *id, *v, t))
            .count()
    }

    pub fn read(&self, name: &str) -> Result<bool, BusError> {
        let inner = self.inner.lock();
        let id = inner
            .by_name
            .get(name)
            .ok_or_else(|| BusError::UnknownSignal(name.to_string()))?;
        Ok(inner.entries[id.0 as usize].latch.value)
    }

    pub fn read_id(&self, id: SignalId) -> bool {
        self.inner.lock().entries[id.0 as usize].latch.value
    }

    pub fn latch(&self, name: &str) -> Result<SignalLatch, BusError> {
        let inner = self.inner.lock();
        let id = inner
            .by_name
            .get(name)
            .ok_or_else(|| BusError::UnknownSignal(name.to_string()))?;
        Ok(inner.entries[id.0 as usize].latch)
    }

    /// Number of true actuators in `group` whose short name starts with `a`.
    pub fn count_true_actuators(&self, group: &str) -> Result<usize, BusError> {
        let inner = self.inner.lock();
        let mut seen = false;
        let mut count = 0;
        for entry in inner.entries.iter().filter(|e| e.def.group == group) {
            seen = true;
            if entry.def.direction == Direction::Output
                && entry.def.short_name().starts_with('a')
                && entry.latch.value
            {
                count += 1;
            }
        }
        if !seen {
            return Err(BusError::UnknownGroup(group.to_string()));
        }
        Ok(count)
    }

    /// Point-in-time copy of every value, ordered by name.
    pub fn snapshot(&self) -> BTreeMap<String, bool> {
        self.inner
            .lock()
            .entries
            .iter()
            .map(|e| (e.def.name.clone(), e.latch.value))
            .collect()
    }
}

fn write_locked(inner: &mut Inner, id: SignalId, value: bool, t: f64) -> bool {
    let entry = &mut inner.entries[id.0 as usize];
    if !entry.latch.set(value, t) {
        return false;
    }
    let event = ChangeEvent {
        id,
        name: entry.name.clone(),
        value,
        time: t,
        seq: entry.latch.seq,
    };
    inner.subscribers.retain(|tx| tx.send(event.clone()).is_ok());
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const OPENED: &str = "ivar_M_M_HW_TrafficTube_1_BoomBarrier_1_s_opened";

    fn sensor(name: &str) -> SignalDef {
        SignalDef::from_name(name, SignalKind::Sensor)
    }

    fn actuator(name: &str) -> SignalDef {
        SignalDef::from_name(name, SignalKind::Actuator)
    }

    #[test]
    fn register_then_read_false() {
        let bus = SignalBus::new();
        bus.register(sensor(OPENED)).unwrap();
        assert!(!bus.read(OPENED).unwrap());
        assert_eq!(bus.latch(OPENED).unwrap().seq, 0);
    }

    #[test]
    fn duplicate_name_rejected() {
        let bus = SignalBus::new();
        bus.register(sensor(OPENED)).unwrap();
        assert_eq!(
            bus.register(sensor(OPENED)),
            Err(BusError::DuplicateName(OPENED.into()))
        );
    }

    #[test]
    fn register_many() {
        let bus = SignalBus::new();
        for i in 0..520 {
            bus.register(sensor(&format!("ivar_M_M_HW_Bulk_{i}_s_x"))).unwrap();
        }
        assert_eq!(bus.len(), 520);
        assert_eq!(bus.snapshot().values().filter(|v| !**v).count(), 520);
    }

    #[test]
    fn direction_prefix_mismatch_rejected() {
        let def = SignalDef {
            name: "ivar_X_a_open".into(),
            direction: Direction::Output,
            group: String::new(),
            kind: SignalKind::Actuator,
        };
        assert!(matches!(
            SignalBus::new().register(def),
            Err(BusError::InvalidDefinition { .. })
        ));
    }

    #[test]
    fn idempotent_write_emits_nothing() {
        let bus = SignalBus::new();
        bus.register(sensor(OPENED)).unwrap();
        let rx = bus.subscribe();
        assert!(!bus.write(OPENED, false, 0.0).unwrap());
        assert!(rx.try_recv().is_err());
        assert!(bus.write(OPENED, true, 0.5).unwrap());
        assert!(!bus.write(OPENED, true, 0.6).unwrap());
        let events: Vec<_> = rx.try_iter().collect();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].seq, 1);
        let latch = bus.latch(OPENED).unwrap();
        assert_eq!(latch.last_changed, 0.5);
    }

    #[test]
    fn alternating_writes_count_flips() {
        let bus = SignalBus::new();
        bus.register(sensor(OPENED)).unwrap();
        let mut expected = 0u64;
        let mut reference = false;
        for i in 0..1000 {
            let v = i % 2 == 0;
            if v != reference {
                expected += 1;
                reference = v;
            }
            bus.write(OPENED, v, i as f64).unwrap();
        }
        assert_eq!(expected, 1000);
        assert_eq!(bus.latch(OPENED).unwrap().seq, expected);
    }

    #[test]
    fn unknown_signal() {
        let bus = SignalBus::new();
        assert_eq!(
            bus.write("ivar_nope", true, 0.0),
            Err(BusError::UnknownSignal("ivar_nope".into()))
        );
    }

    #[test]
    fn resolve_examples() {
        assert_eq!(
            resolve_address("dvar_X", "MAIN.state0.{{IO_NAME}}").unwrap(),
            "MAIN.state0.dvar_X"
        );
        assert_eq!(
            resolve_address("ivar_Y", "INPUTS.{{IO_NAME}}").unwrap(),
            "INPUTS.ivar_Y"
        );
        assert_eq!(resolve_address("a", "{{IO_NAME}}").unwrap(), "a");
        assert!(matches!(
            resolve_address("a", "MAIN.state0"),
            Err(BusError::BadTemplate { count: 0, .. })
        ));
        assert!(matches!(
            resolve_address("a", "{{IO_NAME}}.{{IO_NAME}}"),
            Err(BusError::BadTemplate { count: 2, .. })
        ));
    }

    #[test]
    fn groups_follow_entity_path() {
        assert_eq!(
            group_of("dvar_M_M_HW_TrafficTube_1_BoomBarrier_2_a_open"),
            "TrafficTube_1/BoomBarrier_2"
        );
        assert_eq!(group_of(OPENED), "TrafficTube_1/BoomBarrier_1");
        assert_eq!(short_name_of(OPENED), "s_opened");
        assert_eq!(
            short_name_of("ivar_M_M_HW_TrafficTube_1_BoomBarrier_1_s_obst_on"),
            "s_obst_on"
        );
        assert_eq!(
            group_of("ivar_M_M_HW_OtherSystems_PumpingCellarClean_s_maxStart_on"),
            "OtherSystems/PumpingCellarClean"
        );
        assert_eq!(group_of("ivar_M_M_HW_GUI_button_close_tube1"), "GUI");
        assert_eq!(group_of("dvar_M_M_HW_Boombarrier_a_open"), "Boombarrier");
    }

    fn barrier_bus() -> SignalBus {
        let bus = SignalBus::new();
        let base = "dvar_M_M_HW_TrafficTube_1_BoomBarrier_1_";
        for a in ["a_noChoice", "a_open", "a_stop", "a_close"] {
            bus.register(actuator(&format!("{base}{a}"))).unwrap();
        }
        bus.register(sensor(OPENED)).unwrap();
        bus
    }

    #[test]
    fn count_true_actuators_examples() {
        let bus = barrier_bus();
        let g = "TrafficTube_1/BoomBarrier_1";
        assert_eq!(bus.count_true_actuators(g).unwrap(), 0);
        bus.write("dvar_M_M_HW_TrafficTube_1_BoomBarrier_1_a_open", true, 0.0)
            .unwrap();
        bus.write(OPENED, true, 0.0).unwrap();
        assert_eq!(bus.count_true_actuators(g).unwrap(), 1);
        bus.write("dvar_M_M_HW_TrafficTube_1_BoomBarrier_1_a_close", true, 0.0)
            .unwrap();
        assert_eq!(bus.count_true_actuators(g).unwrap(), 2);
        assert_eq!(
            bus.count_true_actuators("Nope"),
            Err(BusError::UnknownGroup("Nope".into()))
        );
    }

    #[test]
    fn snapshot_is_sorted_and_pure() {
        let bus = barrier_bus();
        let a = bus.snapshot();
        assert!(a.values().all(|v| !v));
        assert_eq!(a, bus.snapshot());
        bus.write(OPENED, true, 1.0).unwrap();
        assert!(bus.snapshot()[OPENED]);
        let names: Vec<_> = bus.snapshot().into_keys().collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    proptest! {
        #[test]
        fn flips_match_reference_model(writes in proptest::collection::vec((0usize..4, any::<bool>()), 0..300)) {
            let names: Vec<String> = (0..4).map(|i| format!("ivar_M_M_HW_P_{i}_s_x")).collect();
            let bus = SignalBus::new();
            for n in &names {
                bus.register(sensor(n)).unwrap();
            }
            let rx = bus.subscribe();
            let mut model = [false; 4];
            let mut flips = [0u64; 4];
            for (k, (i, v)) in writes.iter().enumerate() {
                let changed = bus.write(&names[*i], *v, k as f64).unwrap();
                prop_assert_eq!(changed, model[*i] != *v);
                if changed {
                    flips[*i] += 1;
                    model[*i] = *v;
                }
            }
            let events: Vec<_> = rx.try_iter().collect();
            prop_assert_eq!(events.len() as u64, flips.iter().sum::<u64>());
            for (i, n) in names.iter().enumerate() {
                prop_assert_eq!(bus.latch(n).unwrap().seq, flips[i]);
            }
            // replaying the event log into a fresh bus reproduces the snapshot
            let replay = SignalBus::new();
            for n in &names {
                replay.register(sensor(n)).unwrap();
            }
            for e in &events {
                replay.write(&e.name, e.value, e.time).unwrap();
            }
            prop_assert_eq!(replay.snapshot(), bus.snapshot());
        }

        #[test]
        fn resolve_is_injective(a in "[a-z_]{1,12}", b in "[a-z_]{1,12}") {
            let rule = NamingRule::outputs_default();
            prop_assume!(a != b);
            prop_assert_ne!(rule.resolve(&a), rule.resolve(&b));
        }
    }
}
