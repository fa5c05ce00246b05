use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{TrafficConfig, VehicleOverride};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Car,
    SmallTruck,
    LowTruck,
    HighTruck,
    Speeding,
    Stationary,
    #[serde(rename = "wrongway")]
    WrongWay,
}

impl VehicleKind {
    pub const ALL: [VehicleKind; 7] = [
        VehicleKind::Car,
        VehicleKind::SmallTruck,
        VehicleKind::LowTruck,
        VehicleKind::HighTruck,
        VehicleKind::Speeding,
        VehicleKind::Stationary,
        VehicleKind::WrongWay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleKind::Car => "car",
            VehicleKind::SmallTruck => "small_truck",
            VehicleKind::LowTruck => "low_truck",
            VehicleKind::HighTruck => "high_truck",
            VehicleKind::Speeding => "speeding",
            VehicleKind::Stationary => "stationary",
            VehicleKind::WrongWay => "wrongway",
        }
    }

    /// Built-in parameters; speeds in km/h, rates in km/h/s, sizes in m.
    pub fn default_params(self) -> VehicleParams {
        let p = |max_speed, length, height, sense_range| VehicleParams {
            max_speed,
            acc: 10.0,
            dec: 40.0,
            length,
            height,
            sense_range,
        };
        match self {
            VehicleKind::Car => p(100.0, 4.2, 1.4, 40.0),
            VehicleKind::SmallTruck => p(90.0, 6.6, 3.25, 40.0),
            VehicleKind::LowTruck => p(80.0, 6.6, 3.65, 40.0),
            VehicleKind::HighTruck => p(80.0, 16.6, 4.65, 40.0),
            VehicleKind::Speeding => p(160.0, 4.2, 1.4, 100.0),
            VehicleKind::Stationary => p(0.0, 4.2, 1.4, 40.0),
            VehicleKind::WrongWay => p(100.0, 4.2, 1.4, 80.0),
        }
    }
}

impl fmt::Display for VehicleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VehicleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown vehicle kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VehicleParams {
    pub max_speed: f64,
    pub acc: f64,
    pub dec: f64,
    pub length: f64,
    pub height: f64,
    pub sense_range: f64,
}

impl VehicleParams {
    pub fn with_override(mut self, o: &VehicleOverride) -> Self {
        self.max_speed = o.max_speed.unwrap_or(self.max_speed);
        self.acc = o.acc.unwrap_or(self.acc);
        self.dec = o.dec.unwrap_or(self.dec);
        self.length = o.length.unwrap_or(self.length);
        self.height = o.height.unwrap_or(self.height);
        self.sense_range = o.sense_range.unwrap_or(self.sense_range);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vehicle {
    pub id: u64,
    pub kind: VehicleKind,
    /// Index into the world's lanes.
    pub lane: usize,
    /// Front-bumper position, m.
    pub s: f64,
    /// km/h, never negative.
    pub speed: f64,
    /// +1 with traffic, -1 for wrong-way drivers.
    pub dir: i8,
    pub params: VehicleParams,
    pub alive: bool,
    #[serde(skip)]
    pub driving: bool,
}

impl Vehicle {
    pub fn new(id: u64, kind: VehicleKind, lane: usize, s: f64, dir: i8, params: VehicleParams) -> Self {
        Vehicle {
            id,
            kind,
            lane,
            s,
            // start with half the maximum speed
            speed: params.max_speed / 2.0,
            dir,
            params,
            alive: true,
            driving: true,
        }
    }

    /// Occupied interval `[lo, hi]` along the lane.
    pub fn body(&self) -> (f64, f64) {
        if self.dir >= 0 {
            (self.s - self.params.length, self.s)
        } else {
            (self.s, self.s + self.params.length)
        }
    }

    /// Interval watched by the proximity sensor, excluding the own front.
    pub fn sense_zone(&self) -> (f64, f64) {
        if self.dir >= 0 {
            (self.s, self.s + self.params.sense_range)
        } else {
            (self.s - self.params.sense_range, self.s)
        }
    }

    pub fn overlaps(&self, lo: f64, hi: f64) -> bool {
        let (a, b) = self.body();
        a <= hi && lo <= b
    }

    /// Applies one kinematic step; `driving` was decided beforehand.
    pub fn integrate(&mut self, driving: bool, dt: f64) {
        self.driving = driving;
        if driving {
            self.speed = (self.speed + self.params.acc * dt).min(self.params.max_speed);
        } else {
            self.speed = (self.speed - self.params.dec * dt).max(0.0);
        }
        self.s += self.dir as f64 * self.speed / 3.6 * dt;
    }
}

/// Decides whether `v` may keep driving given the other bodies in its lane
/// (`(id, lo, hi)`) and the active stop points it must not pass.
pub fn is_clear(v: &Vehicle, others: &[(u64, f64, f64)], stops: &[f64]) -> bool {
    let r = v.params.sense_range;
    let body_ahead = |&(id, a, b): &(u64, f64, f64)| {
        id != v.id
            && if v.dir >= 0 {
                b > v.s && a <= v.s + r
            } else {
                a < v.s && b >= v.s - r
            }
    };
    let (lo, hi) = if v.dir >= 0 { (v.s, v.s + r) } else { (v.s - r, v.s) };
    !others.iter().any(body_ahead) && !stops.iter().any(|&p| lo <= p && p <= hi)
}

/// Random-traffic source at the start of a lane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spawner {
    pub lane: usize,
    pub position: f64,
    pub mix: Vec<VehicleKind>,
    /// Interval bounds in ticks.
    pub min_ticks: u64,
    pub max_ticks: u64,
    pub min_spawn_dist: f64,
    /// Ticks left until the next spawn attempt.
    pub timer: i64,
    pub enabled: bool,
    pub last_spawned: Option<u64>,
}

impl Spawner {
    pub fn new(lane: usize, position: f64, mix: Vec<VehicleKind>, cfg: &TrafficConfig, rate: u32) -> Self {
        let rate = rate as f64;
        Spawner {
            lane,
            position,
            mix,
            min_ticks: (cfg.t_inter_min * rate).ceil() as u64,
            max_ticks: (cfg.t_inter_max * rate).floor() as u64,
            min_spawn_dist: cfg.min_spawn_dist,
            timer: 0,
            enabled: cfg.enabled,
            last_spawned: None,
        }
    }

    pub fn set_enabled(&mut self, on: bool) {
        self.enabled = on;
        if !on {
            self.timer = 0;
            self.last_spawned = None;
        }
    }

    /// One tick. `nearest_rear` is the distance from the spawner to the
    /// closest body edge ahead of it in the lane (None when the lane is
    /// empty near the spawner). Returns the kind to spawn.
    pub fn tick(&mut self, nearest_rear: Option<f64>, rng: &mut impl Rng) -> Option<VehicleKind> {
        if !self.enabled {
            return None;
        }
        if self.timer > 0 {
            self.timer -= 1;
        }
        if self.timer > 0 {
            return None;
        }
        if let Some(d) = nearest_rear {
            if d <= self.min_spawn_dist {
                return None;
            }
        }
        self.timer = rng.gen_range(self.min_ticks..=self.max_ticks) as i64;
        let kind = self.mix[rng.gen_range(0..self.mix.len())];
        Some(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn car(s: f64, speed: f64) -> Vehicle {
        let mut v = Vehicle::new(1, VehicleKind::Car, 0, s, 1, VehicleKind::Car.default_params());
        v.speed = speed;
        v
    }

    #[test]
    fn starts_at_half_speed() {
        let v = Vehicle::new(1, VehicleKind::HighTruck, 0, 0.0, 1, VehicleKind::HighTruck.default_params());
        assert_eq!(v.speed, 40.0);
        assert_eq!(v.body(), (-16.6, 0.0));
    }

    #[test]
    fn blocked_vehicle_stops_after_v_over_dec() {
        // 100 km/h at 20 km/h/s: 5.0 s, i.e. 250 ticks at 50 Hz
        let mut v = car(0.0, 100.0);
        v.params.dec = 20.0;
        let mut ticks = 0;
        while v.speed > 0.0 {
            v.integrate(false, 0.02);
            ticks += 1;
            assert!(v.speed >= 0.0);
        }
        assert!((ticks as f64 * 0.02 - 5.0).abs() <= 0.02 + 1e-9, "{ticks}");
    }

    #[test]
    fn saturates_at_max_speed() {
        let mut v = car(0.0, 100.0);
        for _ in 0..100 {
            v.integrate(true, 0.02);
        }
        assert_eq!(v.speed, 100.0);
    }

    #[test]
    fn clear_ignores_bodies_behind() {
        let v = car(100.0, 50.0);
        assert!(is_clear(&v, &[(2, 80.0, 90.0)], &[]));
        assert!(!is_clear(&v, &[(2, 120.0, 124.2)], &[]));
        assert!(is_clear(&v, &[(2, 141.0, 150.0)], &[]));
        assert!(!is_clear(&v, &[], &[130.0]));
        assert!(is_clear(&v, &[], &[99.0]));
    }

    #[test]
    fn spawner_gate_blocks_close_vehicles() {
        let cfg = TrafficConfig {
            enabled: true,
            min_spawn_dist: 50.0,
            ..Default::default()
        };
        let mut sp = Spawner::new(0, 0.0, vec![VehicleKind::Car], &cfg, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sp.tick(Some(30.0), &mut rng), None);
        assert_eq!(sp.tick(Some(51.0), &mut rng), Some(VehicleKind::Car));
    }
}
