use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use serde::Serialize;

use super::{CmpOp, EdgeId, Expr, GtsError, GtsSpec, Update};
use crate::bus::{Direction, SignalBus, SignalId};

pub const DEFAULT_ITERATION_CAP: usize = 10_000;

/// Timer value kept with Neumaier compensation so that a thousand 10 ms
/// steps read exactly 10 s.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Timer {
    sum: f64,
    comp: f64,
}

impl Timer {
    fn value(self) -> f64 {
        self.sum + self.comp
    }

    fn set(&mut self, v: f64) {
        self.sum = v;
        self.comp = 0.0;
    }

    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtsState {
    pub locations: Vec<usize>,
    pub discs: Vec<bool>,
    timers: Vec<Timer>,
    pub scan_count: u64,
}

impl GtsState {
    pub fn initial(spec: &GtsSpec) -> Self {
        GtsState {
            locations: spec.automata.iter().map(|a| a.initial).collect(),
            discs: spec.discs.iter().map(|d| d.initial).collect(),
            timers: spec
                .timers
                .iter()
                .map(|t| Timer {
                    sum: t.initial,
                    comp: 0.0,
                })
                .collect(),
            scan_count: 0,
        }
    }

    pub fn timer(&self, i: usize) -> f64 {
        self.timers[i].value()
    }

    pub fn location_name<'s>(&self, spec: &'s GtsSpec, automaton: usize) -> &'s str {
        &spec.automata[automaton].locations[self.locations[automaton]]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LivelockInfo {
    pub edge: usize,
    pub description: String,
    pub cap: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScanReport {
    pub scan: u64,
    pub iterations: usize,
    pub edges_fired: Vec<usize>,
    pub outputs_changed: Vec<(String, bool)>,
    pub livelock: Option<LivelockInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub state: GtsState,
    pub outputs: BTreeMap<String, bool>,
    pub report: ScanReport,
}

/// A parsed spec bound to the set of discrete Booleans it publishes.
#[derive(Debug, Clone)]
pub struct Controller {
    spec: Arc<GtsSpec>,
    outputs: Vec<(usize, String)>,
    inputs: Vec<String>,
    /// Automata that take part in each event.
    participants: Vec<Vec<usize>>,
    cap: usize,
}

struct Env<'a> {
    state: &'a GtsState,
    inputs: &'a [bool],
}

impl Env<'_> {
    fn bool(&self, e: &Expr) -> bool {
        match e {
            Expr::Bool(b) => *b,
            Expr::Disc(d) => self.state.discs[*d],
            Expr::Input(i) => self.inputs[*i],
            Expr::Loc(a, l) => self.state.locations[*a] == *l,
            Expr::Not(x) => !self.bool(x),
            Expr::And(x, y) => self.bool(x) && self.bool(y),
            Expr::Or(x, y) => self.bool(x) || self.bool(y),
            Expr::Cmp(op, x, y) => {
                if is_real(x) {
                    let (a, b) = (self.real(x), self.real(y));
                    match op {
                        CmpOp::Eq => a == b,
                        CmpOp::Ne => a != b,
                        CmpOp::Ge => a >= b,
                        CmpOp::Le => a <= b,
                        CmpOp::Gt => a > b,
                        CmpOp::Lt => a < b,
                    }
                } else {
                    let (a, b) = (self.bool(x), self.bool(y));
                    match op {
                        CmpOp::Eq => a == b,
                        _ => a != b,
                    }
                }
            }
            Expr::Real(_) | Expr::Timer(_) => unreachable!("type-checked at parse time"),
        }
    }

    fn real(&self, e: &Expr) -> f64 {
        match e {
            Expr::Real(r) => *r,
            Expr::Timer(t) => self.state.timers[*t].value(),
            _ => unreachable!("type-checked at parse time"),
        }
    }
}

fn is_real(e: &Expr) -> bool {
    matches!(e, Expr::Real(_) | Expr::Timer(_))
}

impl Controller {
    /// `outputs` selects the published discrete Booleans by PLC name; `None`
    /// publishes those of the hardware-mapping automata.
    pub fn new(spec: GtsSpec, outputs: Option<&[String]>) -> Self {
        let wanted: HashSet<String> = match outputs {
            Some(names) => names.iter().cloned().collect(),
            None => spec.default_outputs().into_iter().collect(),
        };
        let outputs = (0..spec.discs.len())
            .map(|d| (d, spec.disc_plc_name(d)))
            .filter(|(_, n)| wanted.contains(n))
            .collect();
        let mut participants = vec![Vec::new(); spec.events.len()];
        for e in &spec.edges {
            if let Some(ev) = e.event {
                if !participants[ev].contains(&e.owner) {
                    participants[ev].push(e.owner);
                }
            }
        }
        Controller {
            inputs: spec.input_names(),
            spec: Arc::new(spec),
            outputs,
            participants,
            cap: DEFAULT_ITERATION_CAP,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn spec(&self) -> &GtsSpec {
        &self.spec
    }

    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|(_, n)| n.as_str())
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn initial_state(&self) -> GtsState {
        GtsState::initial(&self.spec)
    }

    pub fn outputs_of(&self, state: &GtsState) -> BTreeMap<String, bool> {
        self.outputs
            .iter()
            .map(|(d, n)| (n.clone(), state.discs[*d]))
            .collect()
    }

    /// One scan with inputs given by PLC name.
    pub fn scan(
        &self,
        state: &GtsState,
        inputs: &BTreeMap<String, bool>,
        dt: f64,
    ) -> Result<ScanResult, GtsError> {
        let image = self
            .inputs
            .iter()
            .map(|n| inputs.get(n).copied().ok_or_else(|| GtsError::InputMissing(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut next = state.clone();
        let report = self.scan_in_place(&mut next, &image, dt)?;
        Ok(ScanResult {
            outputs: self.outputs_of(&next),
            state: next,
            report,
        })
    }

    fn enabled(&self, edge: usize, env: &Env) -> bool {
        let e = &self.spec.edges[edge];
        env.state.locations[e.owner] == e.location && env.bool(&e.guard)
    }

    /// First enabled edge of `automaton` labeled `event`.
    fn partner(&self, automaton: usize, event: usize, env: &Env) -> Option<usize> {
        (0..self.spec.edges.len()).find(|&i| {
            let e = &self.spec.edges[i];
            e.owner == automaton && e.event == Some(event) && self.enabled(i, env)
        })
    }

    fn firing_set(&self, env: &Env) -> Option<Vec<usize>> {
        'edges: for i in 0..self.spec.edges.len() {
            if !self.enabled(i, env) {
                continue;
            }
            let e = &self.spec.edges[i];
            let Some(ev) = e.event else {
                return Some(vec![i]);
            };
            let mut set = vec![i];
            for &p in &self.participants[ev] {
                if p == e.owner {
                    continue;
                }
                match self.partner(p, ev, env) {
                    Some(j) => set.push(j),
                    None => continue 'edges,
                }
            }
            return Some(set);
        }
        None
    }

    fn fire(&self, set: &[usize], state: &mut GtsState, inputs: &[bool]) {
        // right-hand sides see the pre-state
        let mut disc_writes = Vec::new();
        let mut timer_writes = Vec::new();
        {
            let env = Env { state, inputs };
            for &i in set {
                for u in &self.spec.edges[i].updates {
                    match u {
                        Update::Disc(d, x) => disc_writes.push((*d, env.bool(x))),
                        Update::Timer(t, x) => timer_writes.push((*t, env.real(x))),
                    }
                }
            }
        }
        for (d, v) in disc_writes {
            state.discs[d] = v;
        }
        for (t, v) in timer_writes {
            state.timers[t].set(v.max(0.0));
        }
        for &i in set {
            let e = &self.spec.edges[i];
            if let Some(l) = e.goto {
                state.locations[e.owner] = l;
            }
        }
    }

    pub(crate) fn scan_in_place(
        &self,
        state: &mut GtsState,
        inputs: &[bool],
        dt: f64,
    ) -> Result<ScanReport, GtsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GtsError::BadPeriod(dt));
        }
        let before: Vec<bool> = self.outputs.iter().map(|(d, _)| state.discs[*d]).collect();
        for t in &mut state.timers {
            t.add(dt);
        }
        state.scan_count += 1;
        let mut report = ScanReport {
            scan: state.scan_count,
            ..Default::default()
        };
        loop {
            let set = {
                let env = Env {
                    state,
                    inputs,
                };
                self.firing_set(&env)
            };
            let Some(set) = set else { break };
            self.fire(&set, state, inputs);
            report.iterations += 1;
            report.edges_fired.extend(&set);
            if report.iterations >= self.cap {
                report.livelock = Some(LivelockInfo {
                    edge: set[0],
                    description: self.spec.describe_edge(EdgeId(set[0])),
                    cap: self.cap,
                });
                break;
            }
        }
        for ((d, name), old) in self.outputs.iter().zip(before) {
            if state.discs[*d] != old {
                report.outputs_changed.push((name.clone(), state.discs[*d]));
            }
        }
        Ok(report)
    }

    /// Runs `scans` cycles of `period` seconds, asking `inputs` for the
    /// image before each one. Stops early on livelock.
    pub fn run_cyclic(
        &self,
        period: f64,
        scans: u64,
        mut inputs: impl FnMut(u64, &BTreeMap<String, bool>) -> BTreeMap<String, bool>,
    ) -> Result<Vec<ScanReport>, GtsError> {
        let mut state = self.initial_state();
        let mut reports = Vec::new();
        for k in 0..scans {
            let image = inputs(k, &self.outputs_of(&state));
            let r = self.scan(&state, &image, period)?;
            state = r.state;
            let stop = r.report.livelock.is_some();
            reports.push(r.report);
            if stop {
                break;
            }
        }
        Ok(reports)
    }
}

/// A controller scanning against a signal bus at a fixed cycle period.
/// Scan `k` (from 1) happens at `k * period`.
#[derive(Debug)]
pub struct PlcRuntime {
    controller: Controller,
    state: GtsState,
    bus: SignalBus,
    inputs: Vec<SignalId>,
    outputs: Vec<(usize, SignalId)>,
    image: Vec<bool>,
    period_us: u64,
    scans: u64,
    published: bool,
    halted: Option<LivelockInfo>,
}

impl PlcRuntime {
    /// Outputs absent from the bus are not published; inputs must all be
    /// present.
    pub fn new(controller: Controller, bus: SignalBus, period: f64) -> Result<Self, GtsError> {
        let period_us = (period * 1e6).round();
        if !(period_us >= 1.0 && period_us.is_finite()) {
            return Err(GtsError::BadPeriod(period));
        }
        let inputs = controller
            .input_names()
            .iter()
            .map(|n| bus.id(n).ok_or_else(|| GtsError::InputMissing(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let outputs = controller
            .outputs
            .iter()
            .filter_map(|(d, n)| {
                let def = bus.def(n)?;
                (def.direction == Direction::Output).then(|| (*d, bus.id(n).unwrap()))
            })
            .collect();
        let state = controller.initial_state();
        Ok(PlcRuntime {
            image: vec![false; inputs.len()],
            controller,
            state,
            bus,
            inputs,
            outputs,
            period_us: period_us as u64,
            scans: 0,
            published: false,
            halted: None,
        })
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn state(&self) -> &GtsState {
        &self.state
    }

    pub fn halted(&self) -> Option<&LivelockInfo> {
        self.halted.as_ref()
    }

    pub fn period_us(&self) -> u64 {
        self.period_us
    }

    /// Simulation time of the last scan, microseconds.
    pub fn now_us(&self) -> u64 {
        self.scans * self.period_us
    }

    /// One scan: latch inputs from the bus, evaluate, publish changed outputs.
    pub fn cycle(&mut self) -> Result<ScanReport, GtsError> {
        if let Some(info) = &self.halted {
            return Ok(ScanReport {
                scan: self.state.scan_count,
                livelock: Some(info.clone()),
                ..Default::default()
            });
        }
        for (slot, id) in self.image.iter_mut().zip(&self.inputs) {
            *slot = self.bus.read_id(*id);
        }
        let dt = self.period_us as f64 * 1e-6;
        let report = self.controller.scan_in_place(&mut self.state, &self.image, dt)?;
        self.scans += 1;
        let t = self.now_us() as f64 * 1e-6;
        let writes: Vec<(SignalId, bool)> = self
            .outputs
            .iter()
            .map(|(d, id)| (*id, self.state.discs[*d]))
            .collect();
        if !self.published || !report.outputs_changed.is_empty() {
            self.bus.write_batch(&writes, t);
            self.published = true;
        }
        if let Some(info) = &report.livelock {
            log::error!("controller livelocked on scan {}: {}", report.scan, info.description);
            self.halted = Some(info.clone());
        }
        Ok(report)
    }

    /// Runs every scan due at or before `t_us`.
    pub fn advance_to(&mut self, t_us: u64) -> Result<Vec<ScanReport>, GtsError> {
        let mut reports = Vec::new();
        while self.halted.is_none() && (self.scans + 1) * self.period_us <= t_us {
            reports.push(self.cycle()?);
        }
        if self.halted.is_some() {
            // time still advances so lockstep peers stay in sync
            self.scans = self.scans.max(t_us / self.period_us);
        }
        Ok(reports)
    }
}
