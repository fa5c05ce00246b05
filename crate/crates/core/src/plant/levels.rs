//! Level quantisation, one-hot actuator decoding and water cellars.

use std::collections::BTreeMap;

use serde::Serialize;

use super::config::CellarParams;

pub const MAX_LEVEL: u8 = 8;

/// Maps an intensity onto 0..=8, rounding half away from zero.
pub fn level_from_intensity(i: f64, i_min: f64, i_max: f64) -> u8 {
    let x = (i - i_min) / (i_max - i_min) * MAX_LEVEL as f64;
    // f64::round already rounds half away from zero
    x.round().clamp(0.0, MAX_LEVEL as f64) as u8
}

/// Decodes nine one-hot actuators. No true input keeps `previous`; several
/// take the lowest index and report a warning.
pub fn one_hot_apply(acts: &[bool], previous: u8) -> (u8, bool) {
    let mut trues = acts.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i);
    match (trues.next(), trues.next()) {
        (None, _) => (previous, false),
        (Some(i), None) => (i as u8, false),
        (Some(i), Some(_)) => (i as u8, true),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cellar {
    pub h: f64,
    pub h_max: f64,
    /// m/s, set by scenario commands.
    pub inflow: f64,
    pub pump_rate: f64,
    pub pump_on: bool,
    pub thresholds: BTreeMap<String, f64>,
}

impl Cellar {
    pub fn new(p: &CellarParams) -> Self {
        Cellar {
            h: p.initial_level,
            h_max: p.h_max,
            inflow: 0.0,
            pump_rate: p.pump_rate,
            pump_on: false,
            thresholds: p.thresholds.clone(),
        }
    }

    pub fn tick(&mut self, pump_on: bool, dt: f64) {
        self.pump_on = pump_on;
        let out = if pump_on { self.pump_rate } else { 0.0 };
        self.h = (self.h + (self.inflow - out) * dt).clamp(0.0, self.h_max);
    }

    /// `(threshold name, reached)` in name order.
    pub fn sensors(&self) -> impl Iterator<Item = (&str, bool)> + '_ {
        self.thresholds.iter().map(|(k, x)| (k.as_str(), self.h >= *x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::config::CellarConfig;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(level_from_intensity(0.0, 0.0, 10_000.0), 0);
        assert_eq!(level_from_intensity(10_000.0, 0.0, 10_000.0), 8);
        assert_eq!(level_from_intensity(0.5, 0.0, 1.0), 4);
        assert_eq!(level_from_intensity(-3.0, 0.0, 1.0), 0);
        assert_eq!(level_from_intensity(7.0, 0.0, 1.0), 8);
        // 1/16 sits exactly on a half step
        assert_eq!(level_from_intensity(0.0625, 0.0, 1.0), 1);
    }

    #[test]
    fn one_hot_rules() {
        let mut a = [false; 9];
        a[3] = true;
        assert_eq!(one_hot_apply(&a, 0), (3, false));
        let mut a = [false; 9];
        a[2] = true;
        a[5] = true;
        assert_eq!(one_hot_apply(&a, 0), (2, true));
        assert_eq!(one_hot_apply(&[false; 9], 6), (6, false));
    }

    #[test]
    fn pump_clamps_at_empty() {
        let mut c = Cellar::new(&CellarConfig::default().clean);
        c.tick(true, 0.02);
        assert_eq!(c.h, 0.0);
    }

    #[test]
    fn max_start_threshold() {
        let mut c = Cellar::new(&CellarConfig::default().clean);
        c.h = 1.6;
        let s: BTreeMap<_, _> = c.sensors().collect();
        assert!(s["maxStart"]);
        assert!(!s["lowHigh"]);
    }

    #[test]
    fn drains_in_h_over_net_rate() {
        let mut c = Cellar::new(&CellarConfig::default().clean);
        c.h = 1.0;
        c.inflow = 0.02;
        let mut ticks = 0;
        while c.h > 0.0 {
            c.tick(true, 0.02);
            ticks += 1;
        }
        let t = ticks as f64 * 0.02;
        assert!((t - 1.0 / 0.03).abs() <= 0.02 + 1e-9, "{t}");
    }

    proptest! {
        #[test]
        fn level_is_monotone(a in -2.0f64..3.0, b in -2.0f64..3.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(level_from_intensity(lo, 0.0, 1.0) <= level_from_intensity(hi, 0.0, 1.0));
            prop_assert!(level_from_intensity(hi, 0.0, 1.0) <= 8);
        }

        #[test]
        fn cellar_stays_in_range(steps in proptest::collection::vec((0.0f64..0.2, any::<bool>()), 1..300)) {
            let mut c = Cellar::new(&CellarConfig::default().fire);
            for (inflow, pump) in steps {
                c.inflow = inflow;
                c.tick(pump, 0.1);
                prop_assert!(c.h >= 0.0 && c.h <= c.h_max);
            }
        }

        #[test]
        fn one_hot_warning_iff_several(bits in 0u16..512, prev in 0u8..9) {
            let acts: Vec<bool> = (0..9).map(|i| bits & (1 << i) != 0).collect();
            let (lvl, warn) = one_hot_apply(&acts, prev);
            prop_assert_eq!(warn, bits.count_ones() > 1);
            if bits == 0 {
                prop_assert_eq!(lvl, prev);
            } else {
                prop_assert_eq!(lvl as u32, bits.trailing_zeros());
            }
        }
    }
}
