//! Fixed-timestep tunnel plant: four one-dimensional lanes with vehicles,
//! plus every controlled entity of both traffic tubes, the central corridor
//! and the auxiliary systems.

pub mod barrier;
pub mod config;
pub mod entities;
pub mod levels;
pub mod vehicle;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bus::{BusError, SignalBus, SignalId};
pub use barrier::{Barrier, BarrierActuators, BarrierSensors};
pub use config::{ConfigError, WorldConfig};
use entities::*;
pub use levels::{level_from_intensity, one_hot_apply, Cellar};
pub use vehicle::{is_clear, Spawner, Vehicle, VehicleKind, VehicleParams};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("no lane {0}")]
    UnknownLane(String),
    #[error("no tube {0}")]
    UnknownTube(u8),
    #[error("no toggleable element `{0}`")]
    UnknownToggle(String),
    #[error("no cellar `{0}`")]
    UnknownCellar(String),
    #[error("smoke level {0} outside 0..=8")]
    BadSmoke(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Lane {
    pub tube: u8,
    /// 0 is the right lane, 1 the left lane.
    pub index: u8,
}

impl Lane {
    pub fn label(&self) -> String {
        format!("{}.{}", self.tube, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantEvent {
    pub time: f64,
    pub channel: String,
    pub kind: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpawnRecord {
    pub tick: u64,
    pub lane: usize,
    pub id: u64,
    pub kind: VehicleKind,
    /// False for scenario-scripted vehicles.
    pub random: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tube {
    pub number: u8,
    pub barriers: [BarrierUnit; 2],
    pub traffic_lights: [Selector; 2],
    pub j32: Selector,
    pub height_detection: Sensors,
    pub lights: LevelBank,
    pub light_sensor: Sensors,
    pub smoke_detector: Sensors,
    /// 0..=1
    pub smoke: f64,
    pub sos: Sensors,
    pub control: Sensors,
    pub ventilation: LevelBank,
    pub ventilation_direction: Selector,
    pub aid_cabinet_a: ToggleSet,
    pub aid_cabinet_c: ToggleSet,
    pub emergency_exit: ToggleSet,
    pub contour_lighting: Selector,
    pub sound_beacon: Selector,
}

impl Tube {
    fn new(number: u8, cfg: &WorldConfig, reg: &Registrar) -> Result<Self, BusError> {
        let p = |name: &str| format!("TrafficTube_{number}/{name}");
        let none: &[&str] = &[];
        let b = &cfg.barrier;
        let barrier = |i: usize, pos: f64| -> Result<BarrierUnit, BusError> {
            let zone = (pos - b.obstacle_half_width, pos + b.obstacle_half_width);
            Ok(BarrierUnit {
                io: reg.io(&p(&format!("BoomBarrier_{i}")), &BARRIER_ACTUATORS, &BARRIER_SENSORS)?,
                barrier: Barrier::new(b.rot_vel, b.sensor_offset, Some(zone), true),
                position: pos,
                obstacle: false,
            })
        };
        let light = |i: usize| -> Result<Selector, BusError> {
            let io = reg.io(
                &p(&format!("TrafficLight_{i}")),
                &["a_noChoice", "a_off", "a_green", "a_flashing", "a_red"],
                none,
            )?;
            Ok(Selector::new(io, 1, Some(0)))
        };
        let on_off = |name: &str| -> Result<Selector, BusError> {
            Ok(Selector::new(reg.io(&p(name), &["a_on", "a_off"], none)?, 1, None))
        };
        let bank = |name: &str| -> Result<LevelBank, BusError> {
            Ok(LevelBank {
                io: reg.io(&p(name), &level_names("a_state"), none)?,
                level: 0,
                warning: false,
            })
        };
        let sensors = |name: &str, sens: &[String]| -> Result<Sensors, BusError> {
            Ok(Sensors::new(reg.io(&p(name), none, sens)?))
        };
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let toggles = |name: &str, items: &[&str], sens: &[&str]| -> Result<ToggleSet, BusError> {
            Ok(ToggleSet::new(reg.io(&p(name), none, sens)?, items, false))
        };
        let l = &cfg.layout;
        Ok(Tube {
            number,
            barriers: [barrier(1, l.barrier_1)?, barrier(2, l.barrier_2)?],
            traffic_lights: [light(1)?, light(2)?],
            j32: on_off("J32Sign")?,
            height_detection: sensors("HeightDetection", &owned(&["s_detected"]))?,
            lights: bank("Lights")?,
            light_sensor: sensors("LightSensor", &level_names("s_level"))?,
            smoke_detector: sensors("SmokeDetector", &level_names("s_level"))?,
            smoke: 0.0,
            sos: sensors("SOS", &owned(&["s_speeding", "s_wrongWay", "s_stationary"]))?,
            control: sensors(
                "TrafficTubeControl",
                &owned(&[
                    "s_bothTL_off",
                    "s_bothTL_flashing",
                    "s_bothTL_red",
                    "s_bothBB_opened",
                    "s_bothBB_opening",
                    "s_bothBB_stopped",
                    "s_bothBB_closing",
                    "s_bothBB_closed",
                ]),
            )?,
            ventilation: bank("Ventilation")?,
            ventilation_direction: Selector::new(
                reg.io(&p("VentilationDirection"), &["a_forward", "a_reverse"], none)?,
                0,
                None,
            ),
            aid_cabinet_a: toggles(
                "AidCabinet_A",
                &["door", "telephone", "extinguisher", "fireHose"],
                &["s_door_open", "s_telephone_on", "s_extinguisher_on", "s_fireHose_on"],
            )?,
            aid_cabinet_c: toggles(
                "AidCabinet_C",
                &["door", "telephone", "handExtinguisher"],
                &["s_door_open", "s_telephone_on", "s_handExtinguisher_on"],
            )?,
            emergency_exit: toggles("EmergencyExit", &["door"], &["s_open"])?,
            contour_lighting: on_off("ContourLighting")?,
            sound_beacon: on_off("SoundBeacon")?,
        })
    }

    /// Signed fan speed, rpm.
    pub fn ventilation_rpm(&self, per_level: f64) -> f64 {
        let sign = if self.ventilation_direction.is("a_reverse") { -1.0 } else { 1.0 };
        self.ventilation.level as f64 * per_level * sign
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Corridor {
    pub broadcast: Broadcast,
    pub escape_route: Selector,
    pub lighting: Switch,
    pub main_door: ToggleSet,
    pub overpressure: Selector,
}

#[derive(Debug, Clone, Serialize)]
pub struct OtherSystems {
    pub broadcast_sync: BroadcastSync,
    pub emergency_passage: BarrierUnit,
    pub fire_extinguishing: CellarUnit,
    pub pumping_cellar_clean: CellarUnit,
    pub pumping_cellar_dirty: CellarUnit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorldCommand {
    SetTraffic(bool),
    Spawn { kind: VehicleKind, lane: usize },
    /// Smoke level 0..=8 in a tube.
    SetSmoke { tube: u8, level: f64 },
    FillCellar { cellar: String, inflow: f64 },
    SetLightIntensity(f64),
    /// `Entity/Path[/item]`
    Toggle(String),
    DeleteTraffic,
}

/// Serializable view for UIs and golden files.
#[derive(Debug, Clone, Serialize)]
pub struct WorldSnapshot<'a> {
    pub time: f64,
    pub tick: u64,
    pub lanes: &'a [Lane],
    pub vehicles: &'a [Vehicle],
    pub tubes: &'a [Tube],
    pub corridor: &'a Corridor,
    pub other: &'a OtherSystems,
    pub outside_intensity: f64,
    pub events: &'a [PlantEvent],
    pub warnings: BTreeMap<String, bool>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub cfg: WorldConfig,
    tick: u64,
    pub lanes: Vec<Lane>,
    pub vehicles: Vec<Vehicle>,
    pub spawners: Vec<Spawner>,
    pub tubes: Vec<Tube>,
    pub corridor: Corridor,
    pub other: OtherSystems,
    pub outside_intensity: f64,
    pub event_log: Vec<PlantEvent>,
    pub spawn_log: Vec<SpawnRecord>,
    rng: ChaCha8Rng,
    next_id: u64,
    bus: SignalBus,
}

impl World {
    /// Builds the plant, registers its signals on `bus` (keeping any that
    /// are already there) and publishes the initial sensor image.
    pub fn new(cfg: WorldConfig, bus: SignalBus) -> Result<Self, WorldError> {
        cfg.validate()?;
        let reg = Registrar {
            bus: &bus,
            prefixes: &cfg.signal_prefix,
        };
        let none: &[&str] = &[];
        let tubes = vec![Tube::new(1, &cfg, &reg)?, Tube::new(2, &cfg, &reg)?];
        let corridor = Corridor {
            broadcast: Broadcast {
                mode: Selector::new(
                    reg.io(
                        "CentralCorridor/Broadcast",
                        &["a_broadcast_off", "a_broadcast_live", "a_broadcast_message"],
                        &["s_recordingStopped"],
                    )?,
                    0,
                    None,
                ),
                playing: None,
            },
            escape_route: Selector::new(
                reg.io("CentralCorridor/EscapeRoute", &["a_off", "a_ascending", "a_descending"], none)?,
                0,
                None,
            ),
            lighting: Switch {
                io: reg.io("CentralCorridor/Lighting", &["a_on"], none)?,
                on: false,
            },
            main_door: ToggleSet::new(
                reg.io("CentralCorridor/MainDoor", none, &["s_open", "s_closed"])?,
                &["door"],
                true,
            ),
            overpressure: Selector::new(
                reg.io("CentralCorridor/Overpressure", &["a_off", "a_left", "a_right"], none)?,
                0,
                None,
            ),
        };
        let c = &cfg.cellars;
        let cellar = |path: &str, p: &config::CellarParams| -> Result<CellarUnit, BusError> {
            Ok(CellarUnit {
                io: reg.io(path, &["a_pump_on"], &CellarUnit::sensor_names(p))?,
                cellar: Cellar::new(p),
            })
        };
        let other = OtherSystems {
            broadcast_sync: BroadcastSync::new(reg.io(
                "OtherSystems/BroadcastSync",
                &["a_off", "a_reset"],
                &["s_timerGB_timeout"],
            )?),
            emergency_passage: BarrierUnit {
                io: reg.io("OtherSystems/EmergencyPassage", &BARRIER_ACTUATORS, &BARRIER_SENSORS[..5])?,
                barrier: Barrier::new(cfg.barrier.rot_vel, cfg.barrier.sensor_offset, None, false),
                position: 0.0,
                obstacle: false,
            },
            fire_extinguishing: cellar("OtherSystems/FireExtinguishing", &c.fire)?,
            pumping_cellar_clean: cellar("OtherSystems/PumpingCellarClean", &c.clean)?,
            pumping_cellar_dirty: cellar("OtherSystems/PumpingCellarDirty", &c.dirty)?,
        };

        let lanes: Vec<Lane> = (1..=2)
            .flat_map(|tube| (0..2).map(move |index| Lane { tube, index }))
            .collect();
        let spawners = lanes
            .iter()
            .enumerate()
            .map(|(i, lane)| {
                let mix = if lane.index == 0 {
                    cfg.traffic.mix_right.clone()
                } else {
                    cfg.traffic.mix_left.clone()
                };
                Spawner::new(i, cfg.layout.spawner, mix, &cfg.traffic, cfg.tick_rate)
            })
            .collect();

        let mut world = World {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            outside_intensity: cfg.levels.outside_intensity,
            cfg,
            tick: 0,
            lanes,
            vehicles: Vec::new(),
            spawners,
            tubes,
            corridor,
            other,
            event_log: Vec::new(),
            spawn_log: Vec::new(),
            next_id: 1,
            bus,
        };
        world.sense_vehicles();
        world.publish();
        Ok(world)
    }

    pub fn bus(&self) -> &SignalBus {
        &self.bus
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn sim_time(&self) -> f64 {
        self.tick as f64 / self.cfg.tick_rate as f64
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt()
    }

    /// Advances one tick: spawners, vehicles, entities, sensor publication.
    pub fn step(&mut self) {
        let dt = self.dt();
        self.step_spawners();
        self.step_vehicles(dt);
        self.step_entities(dt);
        self.tick += 1;
        self.sense_vehicles();
        self.publish();
    }

    fn step_spawners(&mut self) {
        for i in 0..self.spawners.len() {
            let pos = self.spawners[i].position;
            let nearest = self
                .vehicles
                .iter()
                .filter(|v| v.lane == i)
                .map(|v| v.body())
                .filter(|&(_, hi)| hi >= pos)
                .map(|(lo, _)| lo - pos)
                .min_by(f64::total_cmp);
            if let Some(kind) = self.spawners[i].tick(nearest, &mut self.rng) {
                let id = self.add_vehicle(kind, i, true);
                self.spawners[i].last_spawned = Some(id);
            }
        }
    }

    fn add_vehicle(&mut self, kind: VehicleKind, lane: usize, random: bool) -> u64 {
        let params = match self.cfg.vehicles.get(&kind) {
            Some(o) => kind.default_params().with_override(o),
            None => kind.default_params(),
        };
        let l = &self.cfg.layout;
        let (s, dir) = match kind {
            VehicleKind::Stationary => (l.stationary_spawn, 1),
            VehicleKind::WrongWay => (l.destroyer, -1),
            _ => (l.spawner, 1),
        };
        let id = self.next_id;
        self.next_id += 1;
        self.vehicles.push(Vehicle::new(id, kind, lane, s, dir, params));
        self.spawn_log.push(SpawnRecord {
            tick: self.tick,
            lane,
            id,
            kind,
            random,
        });
        id
    }

    /// Active stop points of a lane for vehicles driving in `dir`.
    pub fn stop_points(&self, lane: usize, dir: i8) -> Vec<f64> {
        let l = self.lanes[lane];
        let tube = &self.tubes[l.tube as usize - 1];
        let off = self.cfg.barrier.stop_offset;
        let mut stops: Vec<f64> = tube
            .barriers
            .iter()
            .filter(|b| !b.barrier.is_opened())
            .map(|b| b.position - dir as f64 * off)
            .collect();
        if dir > 0 && tube.traffic_lights[l.index as usize].is("a_red") {
            stops.push(self.cfg.layout.stop_line);
        }
        stops
    }

    fn step_vehicles(&mut self, dt: f64) {
        let bodies: Vec<Vec<(u64, f64, f64)>> = (0..self.lanes.len())
            .map(|lane| {
                self.vehicles
                    .iter()
                    .filter(|v| v.lane == lane)
                    .map(|v| {
                        let (lo, hi) = v.body();
                        (v.id, lo, hi)
                    })
                    .collect()
            })
            .collect();
        let stops: Vec<[Vec<f64>; 2]> = (0..self.lanes.len())
            .map(|lane| [self.stop_points(lane, 1), self.stop_points(lane, -1)])
            .collect();
        // every decision is taken on the pre-step positions
        let clear: Vec<bool> = self
            .vehicles
            .iter()
            .map(|v| {
                let st = &stops[v.lane][if v.dir >= 0 { 0 } else { 1 }];
                is_clear(v, &bodies[v.lane], st)
            })
            .collect();
        for (v, c) in self.vehicles.iter_mut().zip(clear) {
            v.integrate(c, dt);
        }
        let end = self.cfg.layout.destroyer;
        self.vehicles
            .retain(|v| if v.dir >= 0 { v.s < end } else { v.s > 0.0 });
    }

    fn read(&self, io: &Io) -> Vec<bool> {
        io.read(&self.bus)
    }

    fn step_entities(&mut self, dt: f64) {
        let now = (self.tick + 1) as f64 / self.cfg.tick_rate as f64;
        let mut events = Vec::new();
        for ti in 0..self.tubes.len() {
            let acts: Vec<Vec<bool>> = {
                let t = &self.tubes[ti];
                let mut ios: Vec<&Io> = vec![&t.barriers[0].io, &t.barriers[1].io];
                ios.extend([&t.traffic_lights[0].io, &t.traffic_lights[1].io]);
                ios.extend([
                    &t.j32.io,
                    &t.lights.io,
                    &t.ventilation.io,
                    &t.ventilation_direction.io,
                    &t.contour_lighting.io,
                    &t.sound_beacon.io,
                ]);
                ios.into_iter().map(|io| self.read(io)).collect()
            };
            let t = &mut self.tubes[ti];
            t.barriers[0].apply(&acts[0], dt);
            t.barriers[1].apply(&acts[1], dt);
            t.traffic_lights[0].apply(&acts[2]);
            t.traffic_lights[1].apply(&acts[3]);
            t.j32.apply(&acts[4]);
            t.lights.apply(&acts[5]);
            t.ventilation.apply(&acts[6]);
            t.ventilation_direction.apply(&acts[7]);
            t.contour_lighting.apply(&acts[8]);
            if t.sound_beacon.apply(&acts[9]) {
                events.push((t.sound_beacon.io.path.clone(), t.sound_beacon.state.clone()));
            }
        }

        let acts = self.read(&self.corridor.broadcast.mode.io);
        let bc = &mut self.corridor.broadcast;
        if bc.mode.apply(&acts) {
            events.push((bc.mode.io.path.clone(), bc.mode.state.clone()));
            bc.playing = bc.mode.is("a_broadcast_message").then_some(0.0);
        } else if let Some(t) = bc.playing.as_mut() {
            *t += dt;
        }
        let acts = self.read(&self.corridor.escape_route.io);
        self.corridor.escape_route.apply(&acts);
        let acts = self.read(&self.corridor.overpressure.io);
        self.corridor.overpressure.apply(&acts);
        let acts = self.read(&self.corridor.lighting.io);
        self.corridor.lighting.apply(&acts);

        let o = &self.other;
        let acts = [
            o.broadcast_sync.io.read(&self.bus),
            o.emergency_passage.io.read(&self.bus),
            o.fire_extinguishing.io.read(&self.bus),
            o.pumping_cellar_clean.io.read(&self.bus),
            o.pumping_cellar_dirty.io.read(&self.bus),
        ];
        let o = &mut self.other;
        o.broadcast_sync.apply(&acts[0], dt);
        o.emergency_passage.apply(&acts[1], dt);
        o.fire_extinguishing.cellar.tick(acts[2][0], dt);
        o.pumping_cellar_clean.cellar.tick(acts[3][0], dt);
        o.pumping_cellar_dirty.cellar.tick(acts[4][0], dt);

        for (channel, kind) in events {
            log::info!("{now:.6} {channel}: {kind}");
            self.event_log.push(PlantEvent {
                time: now,
                channel,
                kind: kind.trim_start_matches("a_").to_string(),
            });
        }
    }

    /// Recomputes every vehicle-dependent sensor from current positions.
    fn sense_vehicles(&mut self) {
        let beam = self.cfg.layout.beam;
        let beam_height = self.cfg.misc.beam_height;
        for t in self.tubes.iter_mut() {
            let in_tube: Vec<&Vehicle> = self
                .vehicles
                .iter()
                .filter(|v| self.lanes[v.lane].tube == t.number)
                .collect();
            for b in t.barriers.iter_mut() {
                let (lo, hi) = b.barrier.obstacle_zone.expect("boom barriers watch traffic");
                b.obstacle = in_tube.iter().any(|v| v.overlaps(lo, hi));
            }
            t.height_detection.values[0] = in_tube
                .iter()
                .any(|v| v.params.height > beam_height && v.overlaps(beam, beam));
            let has = |k: VehicleKind| in_tube.iter().any(|v| v.kind == k && v.alive);
            t.sos.values = vec![
                has(VehicleKind::Speeding),
                has(VehicleKind::WrongWay),
                has(VehicleKind::Stationary),
            ];
        }
    }

    fn sensor_writes(&mut self) -> Vec<(SignalId, bool)> {
        let lv = self.cfg.levels.clone();
        let outside = level_from_intensity(self.outside_intensity, lv.light_i_min, lv.light_i_max);
        let mut out = Vec::new();
        for t in self.tubes.iter_mut() {
            for b in &t.barriers {
                b.io.publish(&b.sense(), &mut out);
            }
            t.height_detection.io.publish(&t.height_detection.values, &mut out);
            t.light_sensor.values = one_hot(outside);
            t.light_sensor.io.publish(&t.light_sensor.values, &mut out);
            t.smoke_detector.values = one_hot(level_from_intensity(t.smoke, 0.0, 1.0));
            t.smoke_detector.io.publish(&t.smoke_detector.values, &mut out);
            t.sos.io.publish(&t.sos.values, &mut out);
            let tl = |s: &str| t.traffic_lights.iter().all(|l| l.is(s));
            let bb: Vec<[bool; 5]> = t.barriers.iter().map(|b| b.sensors().motion()).collect();
            let mut control = vec![tl("a_off"), tl("a_flashing"), tl("a_red")];
            control.extend((0..5).map(|k| bb[0][k] && bb[1][k]));
            t.control.values = control;
            t.control.io.publish(&t.control.values, &mut out);
            for toggles in [&t.aid_cabinet_a, &t.aid_cabinet_c, &t.emergency_exit] {
                toggles.io.publish(&toggles.sense(), &mut out);
            }
        }
        let c = &self.corridor;
        c.broadcast
            .mode
            .io
            .publish(&c.broadcast.sense(self.cfg.misc.message_duration), &mut out);
        c.main_door.io.publish(&c.main_door.sense(), &mut out);
        let o = &self.other;
        o.broadcast_sync
            .io
            .publish(&o.broadcast_sync.sense(self.cfg.misc.t_sync), &mut out);
        o.emergency_passage
            .io
            .publish(&o.emergency_passage.sense(), &mut out);
        for c in [&o.fire_extinguishing, &o.pumping_cellar_clean, &o.pumping_cellar_dirty] {
            c.io.publish(&c.sense(), &mut out);
        }
        out
    }

    fn publish(&mut self) {
        let writes = self.sensor_writes();
        self.bus.write_batch(&writes, self.sim_time());
    }

    /// Applies an operator or scenario command; the effect is visible from
    /// the next published image on.
    pub fn apply(&mut self, cmd: &WorldCommand) -> Result<(), WorldError> {
        match cmd {
            WorldCommand::SetTraffic(on) => {
                for sp in &mut self.spawners {
                    sp.set_enabled(*on);
                }
            }
            WorldCommand::Spawn { kind, lane } => {
                if *lane >= self.lanes.len() {
                    return Err(WorldError::UnknownLane(lane.to_string()));
                }
                self.add_vehicle(*kind, *lane, false);
            }
            WorldCommand::SetSmoke { tube, level } => {
                if !(0.0..=8.0).contains(level) {
                    return Err(WorldError::BadSmoke(*level));
                }
                self.tube_mut(*tube)?.smoke = level / 8.0;
            }
            WorldCommand::FillCellar { cellar, inflow } => {
                let o = &mut self.other;
                let unit = match cellar.as_str() {
                    "clean" => &mut o.pumping_cellar_clean,
                    "dirty" => &mut o.pumping_cellar_dirty,
                    "fire" => &mut o.fire_extinguishing,
                    _ => return Err(WorldError::UnknownCellar(cellar.clone())),
                };
                unit.cellar.inflow = *inflow;
            }
            WorldCommand::SetLightIntensity(i) => self.outside_intensity = *i,
            WorldCommand::Toggle(target) => self.toggle(target)?,
            WorldCommand::DeleteTraffic => {
                self.vehicles.clear();
                for sp in &mut self.spawners {
                    sp.last_spawned = None;
                }
            }
        }
        self.sense_vehicles();
        self.publish();
        Ok(())
    }

    fn tube_mut(&mut self, tube: u8) -> Result<&mut Tube, WorldError> {
        self.tubes
            .iter_mut()
            .find(|t| t.number == tube)
            .ok_or(WorldError::UnknownTube(tube))
    }

    fn toggle(&mut self, target: &str) -> Result<(), WorldError> {
        let unknown = || WorldError::UnknownToggle(target.to_string());
        let mut sets: Vec<&mut ToggleSet> = vec![&mut self.corridor.main_door];
        for t in self.tubes.iter_mut() {
            sets.extend([&mut t.aid_cabinet_a, &mut t.aid_cabinet_c, &mut t.emergency_exit]);
        }
        for set in sets {
            let item = if target == set.io.path {
                None
            } else if let Some(rest) = target.strip_prefix(set.io.path.as_str()).and_then(|r| r.strip_prefix('/')) {
                Some(rest)
            } else {
                continue;
            };
            return set.toggle(item).map(|_| ()).ok_or_else(unknown);
        }
        Err(unknown())
    }

    /// Warning flags of every exactly-one entity, keyed by entity path.
    pub fn warnings(&self) -> BTreeMap<String, bool> {
        let mut w = BTreeMap::new();
        for t in &self.tubes {
            for b in &t.barriers {
                w.insert(b.io.path.clone(), b.barrier.warning);
            }
            for s in t.traffic_lights.iter().chain([
                &t.j32,
                &t.ventilation_direction,
                &t.contour_lighting,
                &t.sound_beacon,
            ]) {
                w.insert(s.io.path.clone(), s.warning);
            }
            for l in [&t.lights, &t.ventilation] {
                w.insert(l.io.path.clone(), l.warning);
            }
        }
        let c = &self.corridor;
        for s in [&c.broadcast.mode, &c.escape_route, &c.overpressure] {
            w.insert(s.io.path.clone(), s.warning);
        }
        let p = &self.other.emergency_passage;
        w.insert(p.io.path.clone(), p.barrier.warning);
        w
    }

    pub fn snapshot(&self) -> WorldSnapshot<'_> {
        let tail = self.event_log.len().saturating_sub(20);
        WorldSnapshot {
            time: self.sim_time(),
            tick: self.tick,
            lanes: &self.lanes,
            vehicles: &self.vehicles,
            tubes: &self.tubes,
            corridor: &self.corridor,
            other: &self.other,
            outside_intensity: self.outside_intensity,
            events: &self.event_log[tail..],
            warnings: self.warnings(),
        }
    }

    /// Lane index for `tube` (1 or 2) and lane `index` (0 or 1).
    pub fn lane_index(&self, tube: u8, index: u8) -> Option<usize> {
        self.lanes.iter().position(|l| l.tube == tube && l.index == index)
    }
}
