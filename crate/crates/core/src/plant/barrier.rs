//! Rotating boom: constant angular rate towards the commanded end stop.

use serde::Serialize;

pub const OPEN_ROTATION: f64 = 90.0;
pub const CLOSED_ROTATION: f64 = 0.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BarrierActuators {
    pub no_choice: bool,
    pub open: bool,
    pub stop: bool,
    pub close: bool,
}

impl BarrierActuators {
    pub fn count(&self) -> usize {
        [self.no_choice, self.open, self.stop, self.close]
            .iter()
            .filter(|b| **b)
            .count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BarrierSensors {
    pub opened: bool,
    pub opening: bool,
    pub stopped: bool,
    pub closing: bool,
    pub closed: bool,
    pub obst_on: bool,
    pub obst_off: bool,
}

impl BarrierSensors {
    pub fn motion(&self) -> [bool; 5] {
        [self.opened, self.opening, self.stopped, self.closing, self.closed]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Barrier {
    pub theta: f64,
    pub rot_vel: f64,
    pub direction: i8,
    pub sensor_offset: f64,
    /// Obstacle detection zone along the lane, m. None for barriers that
    /// do not watch traffic.
    pub obstacle_zone: Option<(f64, f64)>,
    pub default_open: bool,
    pub warning: bool,
}

impl Barrier {
    pub fn new(rot_vel: f64, sensor_offset: f64, obstacle_zone: Option<(f64, f64)>, default_open: bool) -> Self {
        Barrier {
            theta: if default_open { OPEN_ROTATION } else { CLOSED_ROTATION },
            rot_vel,
            direction: 0,
            sensor_offset,
            obstacle_zone,
            default_open,
            warning: false,
        }
    }

    /// Applies the actuator image and integrates one step. More than one
    /// true actuator raises the warning and stops the motor.
    pub fn tick(&mut self, acts: BarrierActuators, dt: f64) {
        self.warning = acts.count() > 1;
        if self.warning {
            self.direction = 0;
        } else if acts.no_choice {
            // keep whatever the motor was doing
        } else if acts.open {
            self.direction = 1;
        } else if acts.close {
            self.direction = -1;
        } else {
            self.direction = 0;
        }
        self.theta = (self.theta + self.direction as f64 * self.rot_vel * dt)
            .clamp(CLOSED_ROTATION, OPEN_ROTATION);
    }

    pub fn is_opened(&self) -> bool {
        (OPEN_ROTATION - self.theta).abs() < self.sensor_offset
    }

    /// Motion sensors form a partition: exactly one of the five is true.
    pub fn sensors(&self, obstacle: bool) -> BarrierSensors {
        let opened = self.is_opened();
        let closed = !opened && (self.theta - CLOSED_ROTATION).abs() < self.sensor_offset;
        let moving = !opened && !closed;
        BarrierSensors {
            opened,
            closed,
            opening: moving && self.direction == 1,
            closing: moving && self.direction == -1,
            stopped: moving && self.direction == 0,
            obst_on: obstacle,
            obst_off: !obstacle,
        }
    }
}
