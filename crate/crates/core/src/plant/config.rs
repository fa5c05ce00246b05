//! World configuration. Every field has a default, so an empty file is a
//! valid config; see `docs/world-config.md` for the schema.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::vehicle::VehicleKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub seed: u64,
    pub tick_rate: u32,
    pub layout: LayoutConfig,
    pub traffic: TrafficConfig,
    pub vehicles: BTreeMap<VehicleKind, VehicleOverride>,
    pub barrier: BarrierConfig,
    pub levels: LevelConfig,
    pub cellars: CellarConfig,
    pub misc: MiscConfig,
    /// Entity path → signal prefix, e.g. `"TrafficTube_1/BoomBarrier_1" = "Boombarrier"`.
    pub signal_prefix: BTreeMap<String, String>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 1,
            tick_rate: 50,
            layout: LayoutConfig::default(),
            traffic: TrafficConfig::default(),
            vehicles: BTreeMap::new(),
            barrier: BarrierConfig::default(),
            levels: LevelConfig::default(),
            cellars: CellarConfig::default(),
            misc: MiscConfig::default(),
            signal_prefix: BTreeMap::new(),
        }
    }
}

/// Positions along a lane in meters, in driving direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub lane_length: f64,
    pub tunnel_start: f64,
    pub tunnel_end: f64,
    pub spawner: f64,
    pub barrier_1: f64,
    pub barrier_2: f64,
    pub beam: f64,
    pub stop_line: f64,
    pub destroyer: f64,
    pub stationary_spawn: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            lane_length: 1000.0,
            tunnel_start: 300.0,
            tunnel_end: 700.0,
            spawner: 0.0,
            barrier_1: 150.0,
            barrier_2: 170.0,
            beam: 200.0,
            stop_line: 280.0,
            destroyer: 1000.0,
            stationary_spawn: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub enabled: bool,
    pub t_inter_min: f64,
    pub t_inter_max: f64,
    pub min_spawn_dist: f64,
    /// Mix for lane index 0 (right lane, more trucks).
    pub mix_right: Vec<VehicleKind>,
    /// Mix for lane index 1 (left lane, more cars).
    pub mix_left: Vec<VehicleKind>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        use VehicleKind::*;
        TrafficConfig {
            enabled: false,
            t_inter_min: 3.0,
            t_inter_max: 8.0,
            min_spawn_dist: 30.0,
            mix_right: vec![Car, SmallTruck, LowTruck, LowTruck],
            mix_left: vec![Car, Car, Car, SmallTruck],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleOverride {
    pub max_speed: Option<f64>,
    pub acc: Option<f64>,
    pub dec: Option<f64>,
    pub length: Option<f64>,
    pub height: Option<f64>,
    pub sense_range: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    /// deg/s
    pub rot_vel: f64,
    /// deg
    pub sensor_offset: f64,
    /// Half length of the obstacle detection zone around the barrier, m.
    pub obstacle_half_width: f64,
    /// Distance upstream of the barrier where vehicles stop, m.
    pub stop_offset: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig {
            rot_vel: 9.0,
            sensor_offset: 1.0,
            obstacle_half_width: 2.5,
            stop_offset: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelConfig {
    pub light_i_min: f64,
    pub light_i_max: f64,
    /// Outside light intensity at start.
    pub outside_intensity: f64,
    /// Intensity per tunnel light level.
    pub light_factor: f64,
    /// RPM per ventilation level.
    pub ventilation_rpm_per_level: f64,
}

impl Default for LevelConfig {
    fn default() -> Self {
        LevelConfig {
            light_i_min: 0.0,
            light_i_max: 10_000.0,
            outside_intensity: 0.0,
            light_factor: 100.0,
            ventilation_rpm_per_level: 150.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellarParams {
    pub h_max: f64,
    pub pump_rate: f64,
    pub initial_level: f64,
    /// Threshold name → height, m.
    pub thresholds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellarConfig {
    pub clean: CellarParams,
    pub dirty: CellarParams,
    pub fire: CellarParams,
}

fn thresholds(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl Default for CellarConfig {
    fn default() -> Self {
        CellarConfig {
            clean: CellarParams {
                h_max: 3.0,
                pump_rate: 0.05,
                initial_level: 0.0,
                thresholds: thresholds(&[
                    ("low", 0.3),
                    ("start", 1.0),
                    ("maxStart", 1.5),
                    ("lowHigh", 2.0),
                    ("highHigh", 2.5),
                ]),
            },
            dirty: CellarParams {
                h_max: 3.0,
                pump_rate: 0.05,
                initial_level: 0.0,
                thresholds: thresholds(&[("low", 0.3)]),
            },
            fire: CellarParams {
                h_max: 3.0,
                pump_rate: 0.05,
                initial_level: 0.0,
                thresholds: thresholds(&[("low", 0.5), ("high", 2.5)]),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiscConfig {
    /// Broadcast-sync timeout, s.
    pub t_sync: f64,
    /// Length of a recorded broadcast message, s.
    pub message_duration: f64,
    /// Height of the height-detection beam above the road, m.
    pub beam_height: f64,
}

impl Default for MiscConfig {
    fn default() -> Self {
        MiscConfig {
            t_sync: 30.0,
            message_duration: 10.0,
            beam_height: 4.1,
        }
    }
}

impl WorldConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: WorldConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.tick_rate == 0 {
            return bad("tick_rate must be positive".into());
        }
        let l = &self.layout;
        let fixtures = [
            ("spawner", l.spawner),
            ("barrier_1", l.barrier_1),
            ("barrier_2", l.barrier_2),
            ("beam", l.beam),
            ("stop_line", l.stop_line),
            ("destroyer", l.destroyer),
        ];
        for w in fixtures.windows(2) {
            if w[0].1 >= w[1].1 {
                return bad(format!("layout: {} must lie before {}", w[0].0, w[1].0));
            }
        }
        for (name, pos) in fixtures.iter().chain([&("stationary_spawn", l.stationary_spawn)]) {
            if !(0.0..=l.lane_length).contains(pos) {
                return bad(format!("layout: {name} outside the lane"));
            }
        }
        let t = &self.traffic;
        if !(t.t_inter_min > 0.0 && t.t_inter_min <= t.t_inter_max) {
            return bad("traffic: need 0 < t_inter_min <= t_inter_max".into());
        }
        if (t.t_inter_min * self.tick_rate as f64).ceil() > (t.t_inter_max * self.tick_rate as f64).floor() {
            return bad("traffic: spawn interval range is narrower than one tick".into());
        }
        if t.mix_left.is_empty() || t.mix_right.is_empty() {
            return bad("traffic: vehicle mixes must not be empty".into());
        }
        if self.barrier.sensor_offset <= 0.0 || self.barrier.rot_vel <= 0.0 {
            return bad("barrier: sensor_offset and rot_vel must be positive".into());
        }
        if self.levels.light_i_min >= self.levels.light_i_max {
            return bad("levels: light_i_min must be below light_i_max".into());
        }
        for (name, c) in [("clean", &self.cellars.clean), ("dirty", &self.cellars.dirty), ("fire", &self.cellars.fire)] {
            let mut hs: Vec<f64> = c.thresholds.values().copied().collect();
            hs.sort_by(f64::total_cmp);
            if hs.windows(2).any(|w| w[0] >= w[1]) || hs.iter().any(|h| !(0.0..=c.h_max).contains(h)) {
                return bad(format!("cellars.{name}: thresholds must be distinct and within [0, h_max]"));
            }
            if !(0.0..=c.h_max).contains(&c.initial_level) {
                return bad(format!("cellars.{name}: initial_level outside [0, h_max]"));
            }
        }
        Ok(())
    }
}
