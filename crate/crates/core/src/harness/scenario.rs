//! Scenario scripts. One directive per line, `#` starts a comment:
//!
//! ```text
//! seed 42
//! duration 120
//! at 1.0 traffic on
//! at 5 spawn high_truck 1.0
//! at 5 expect ivar_M_M_HW_TrafficTube_1_HeightDetection_s_detected == 1 within 30
//! ```
//!
//! Lanes are written `<tube>.<index>` with index 0 for the right lane.

use std::fmt;

use thiserror::Error;

use crate::plant::VehicleKind;

#[derive(Debug, Error, PartialEq)]
#[error("scenario line {line}: {msg}")]
pub struct ScenarioError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Press(String),
    /// Smoke level 0..=8.
    SetSmoke { tube: u8, level: f64 },
    Traffic(bool),
    Spawn { kind: VehicleKind, tube: u8, index: u8 },
    FillCellar { cellar: String, inflow: f64 },
    SetLightIntensity(f64),
    Toggle(String),
    DeleteTraffic,
    Expect { signal: String, value: bool, within: f64 },
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Press(s) => write!(f, "press {s}"),
            Command::SetSmoke { tube, level } => write!(f, "set_smoke {tube} {level}"),
            Command::Traffic(on) => write!(f, "traffic {}", if *on { "on" } else { "off" }),
            Command::Spawn { kind, tube, index } => write!(f, "spawn {kind} {tube}.{index}"),
            Command::FillCellar { cellar, inflow } => write!(f, "fill_cellar {cellar} {inflow}"),
            Command::SetLightIntensity(i) => write!(f, "set_light_intensity {i}"),
            Command::Toggle(t) => write!(f, "toggle {t}"),
            Command::DeleteTraffic => f.write_str("delete_traffic"),
            Command::Expect { signal, value, within } => {
                write!(f, "expect {signal} == {} within {within}", *value as u8)
            }
        }
    }
}

impl Command {
    /// Parses a command without the leading `at <t>`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let words: Vec<&str> = text.split_whitespace().collect();
        let num = |s: &str| -> Result<f64, String> {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{s}` is not a number"))
        };
        let cmd = match words[..] {
            ["press", signal] => Command::Press(signal.to_string()),
            ["set_smoke", tube, level] => {
                let level = num(level)?;
                if !(0.0..=8.0).contains(&level) {
                    return Err(format!("smoke level {level} outside 0..=8"));
                }
                Command::SetSmoke {
                    tube: tube.parse().map_err(|_| format!("bad tube `{tube}`"))?,
                    level,
                }
            }
            ["traffic", "on"] => Command::Traffic(true),
            ["traffic", "off"] => Command::Traffic(false),
            ["spawn", kind, lane] => {
                let (tube, index) = lane
                    .split_once('.')
                    .and_then(|(t, i)| Some((t.parse().ok()?, i.parse().ok()?)))
                    .ok_or_else(|| format!("lane must look like `1.0`, got `{lane}`"))?;
                Command::Spawn {
                    kind: kind.parse()?,
                    tube,
                    index,
                }
            }
            ["fill_cellar", cellar, inflow] => Command::FillCellar {
                cellar: cellar.to_string(),
                inflow: num(inflow)?,
            },
            ["set_light_intensity", i] => Command::SetLightIntensity(num(i)?),
            ["toggle", target] => Command::Toggle(target.to_string()),
            ["delete_traffic"] => Command::DeleteTraffic,
            ["expect", signal, "==", value, "within", within] => {
                let within = num(within)?;
                if within <= 0.0 {
                    return Err("expect window must be positive".into());
                }
                Command::Expect {
                    signal: signal.to_string(),
                    value: match value {
                        "0" => false,
                        "1" => true,
                        _ => return Err(format!("expected value must be 0 or 1, got `{value}`")),
                    },
                    within,
                }
            }
            [] => return Err("empty command".into()),
            _ => return Err(format!("unrecognised command `{text}`")),
        };
        Ok(cmd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedCommand {
    pub at: f64,
    pub line: usize,
    pub command: Command,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    /// Sorted by time; equal times keep file order.
    pub events: Vec<TimedCommand>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut sc = Scenario::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| ScenarioError { line, msg };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (head, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
            let rest = rest.trim();
            match head {
                "seed" => sc.seed = Some(rest.parse().map_err(|_| err(format!("bad seed `{rest}`")))?),
                "duration" => {
                    let d: f64 = rest.parse().map_err(|_| err(format!("bad duration `{rest}`")))?;
                    if !(d > 0.0 && d.is_finite()) {
                        return Err(err("duration must be positive".into()));
                    }
                    sc.duration = Some(d);
                }
                "at" => {
                    let (t, cmd) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| err("expected `at <seconds> <command>`".into()))?;
                    let at: f64 = t.parse().map_err(|_| err(format!("bad time `{t}`")))?;
                    if !(at >= 0.0 && at.is_finite()) {
                        return Err(err("times must be non-negative".into()));
                    }
                    let command = Command::parse(cmd).map_err(err)?;
                    sc.events.push(TimedCommand { at, line, command });
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        sc.events.sort_by(|a, b| a.at.total_cmp(&b.at));
        Ok(sc)
    }

    /// Time by which every command has run and every expect window closed.
    pub fn natural_end(&self) -> f64 {
        self.events
            .iter()
            .map(|e| match e.command {
                Command::Expect { within, .. } => e.at + within,
                _ => e.at,
            })
            .fold(0.0, f64::max)
    }
}
