//! Soft PLC for flat guarded-transition controllers.
//!
//! A controller is a list of automata. Each automaton declares discrete
//! Booleans (its outputs), input Booleans (read-only, supplied per scan),
//! continuous timers with derivative 1, and events. Edges sit in locations
//! and carry an optional event, a guard, assignments and a target location.
//!
//! ```text
//! automaton BoomBarrier:
//!   cont t der 1;
//!   uncontrollable u_closed, u_opened;
//!   location closing:
//!     initial;
//!     edge u_closed when t >= 10 do t := 0.0 goto opening;
//!   location opening:
//!     edge u_opened when t >= 10 do t := 0.0 goto closing;
//! end
//! ```
//!
//! See `docs/gts-grammar.md` for the full grammar.

mod exec;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use exec::{Controller, GtsState, LivelockInfo, PlcRuntime, ScanReport, ScanResult, DEFAULT_ITERATION_CAP};
pub use lexer::Pos;
pub use parser::parse_gts;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GtsError {
    #[error("{line}:{col}: syntax error: {msg}")]
    SyntaxError { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared identifier `{name}`")]
    UndeclaredIdentifier { name: String, line: usize, col: usize },
    #[error("{line}:{col}: `{name}` is an input and cannot be assigned")]
    AssignToInput { name: String, line: usize, col: usize },
    #[error("{line}:{col}: `{name}` is declared by another automaton and cannot be assigned here")]
    ForeignAssignment { name: String, line: usize, col: usize },
    #[error("{line}:{col}: type error: {msg}")]
    TypeError { line: usize, col: usize, msg: String },
    #[error("input `{0}` is missing from the input image")]
    InputMissing(String),
    #[error("scan period must be positive, got {0}")]
    BadPeriod(f64),
}

impl GtsError {
    pub(crate) fn syntax(pos: Pos, msg: impl Into<String>) -> Self {
        GtsError::SyntaxError {
            line: pos.line,
            col: pos.col,
            msg: msg.into(),
        }
    }

    pub(crate) fn undeclared(pos: Pos, name: impl Into<String>) -> Self {
        GtsError::UndeclaredIdentifier {
            name: name.into(),
            line: pos.line,
            col: pos.col,
        }
    }

    pub(crate) fn type_error(pos: Pos, msg: impl Into<String>) -> Self {
        GtsError::TypeError {
            line: pos.line,
            col: pos.col,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    pub name: String,
    pub locations: Vec<String>,
    pub initial: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDecl {
    pub owner: usize,
    pub name: String,
    pub controllable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscDecl {
    pub owner: usize,
    pub name: String,
    pub initial: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDecl {
    pub owner: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimerDecl {
    pub owner: usize,
    pub name: String,
    pub initial: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Bool(bool),
    Real(f64),
    Disc(usize),
    Input(usize),
    Timer(usize),
    /// True while automaton `.0` is in location `.1`.
    Loc(usize, usize),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Update {
    Disc(usize, Expr),
    Timer(usize, Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub owner: usize,
    pub location: usize,
    pub event: Option<usize>,
    pub guard: Expr,
    pub updates: Vec<Update>,
    pub goto: Option<usize>,
    pub pos: Pos,
}

/// A resolved controller; edges are kept in global declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct GtsSpec {
    pub automata: Vec<Automaton>,
    pub events: Vec<EventDecl>,
    pub discs: Vec<DiscDecl>,
    pub inputs: Vec<InputDecl>,
    pub timers: Vec<TimerDecl>,
    pub edges: Vec<Edge>,
}

/// `dvar_M_M_HW_Boombarrier_a_open` for `a_open` in `HW_Boombarrier`.
pub fn plc_name(prefix: &str, automaton: &str, var: &str) -> String {
    format!("{prefix}_M_M_{}_{var}", automaton.replace('.', "_"))
}

impl GtsSpec {
    pub fn event_name(&self, ev: usize) -> String {
        let e = &self.events[ev];
        format!("{}.{}", self.automata[e.owner].name, e.name)
    }

    pub fn disc_plc_name(&self, d: usize) -> String {
        let v = &self.discs[d];
        plc_name("dvar", &self.automata[v.owner].name, &v.name)
    }

    pub fn input_plc_name(&self, i: usize) -> String {
        let v = &self.inputs[i];
        plc_name("ivar", &self.automata[v.owner].name, &v.name)
    }

    /// Outputs of the hardware-mapping automata (names starting with `HW`).
    pub fn default_outputs(&self) -> Vec<String> {
        (0..self.discs.len())
            .filter(|&d| self.automata[self.discs[d].owner].name.starts_with("HW"))
            .map(|d| self.disc_plc_name(d))
            .collect()
    }

    pub fn input_names(&self) -> Vec<String> {
        (0..self.inputs.len()).map(|i| self.input_plc_name(i)).collect()
    }

    pub fn describe_edge(&self, id: EdgeId) -> String {
        let e = &self.edges[id.0];
        let aut = &self.automata[e.owner];
        let label = match e.event {
            Some(ev) => self.event_name(ev),
            None => "tau".to_string(),
        };
        format!("{} edge {} at line {} ({label})", aut.name, id.0, e.pos.line)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}
