//! Line protocol v1. One record per `\n`-terminated UTF-8 line, fields
//! separated by a single space.

use std::fmt;

use crate::bus::Direction;

use super::{GatewayError, Role};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello { role: Role, version: u32 },
    Policy { digest: String, count: usize },
    Signal { direction: Direction, name: String, address: String },
    EndPolicy,
    Write { seq: u64, name: String, value: bool },
    Ping(u64),
    Pong(u64),
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Hello { role, version } => write!(f, "HELLO {role} {version}"),
            Message::Policy { digest, count } => write!(f, "POLICY {digest} {count}"),
            Message::Signal {
                direction,
                name,
                address,
            } => write!(f, "{} {name} {address}", direction.wire_tag()),
            Message::EndPolicy => f.write_str("ENDPOLICY"),
            Message::Write { seq, name, value } => write!(f, "WRITE {seq} {name} {}", *value as u8),
            Message::Ping(n) => write!(f, "PING {n}"),
            Message::Pong(n) => write!(f, "PONG {n}"),
        }
    }
}

impl Message {
    pub fn parse(line: &str) -> Result<Self, GatewayError> {
        let bad = |why: &str| GatewayError::Protocol(format!("{why}: `{line}`"));
        let fields: Vec<&str> = line.split(' ').collect();
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad("bad number"));
        let msg = match fields[..] {
            ["HELLO", role, version] => Message::Hello {
                role: role.parse().map_err(|_| bad("unknown role"))?,
                version: version.parse().map_err(|_| bad("bad version"))?,
            },
            ["POLICY", digest, count] if !digest.is_empty() => Message::Policy {
                digest: digest.to_string(),
                count: num(count)? as usize,
            },
            [dir @ ("IN" | "OUT"), name, address] if !name.is_empty() => Message::Signal {
                direction: Direction::from_wire_tag(dir).expect("matched tag"),
                name: name.to_string(),
                address: address.to_string(),
            },
            ["ENDPOLICY"] => Message::EndPolicy,
            ["WRITE", seq, name, value] if !name.is_empty() => Message::Write {
                seq: num(seq)?,
                name: name.to_string(),
                value: match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("value must be 0 or 1")),
                },
            },
            ["PING", n] => Message::Ping(num(n)?),
            ["PONG", n] => Message::Pong(num(n)?),
            _ => return Err(bad("unrecognised record")),
        };
        Ok(msg)
    }
}
