//! Signal manifests and the line-oriented policy document both ends of the
//! gateway agree on.
//!
//! Document layout (UTF-8, `\n` line ends):
//!
//! ```text
//! tunneltwin-policy v1
//! digest <sha256 of the source files>
//! OUT\t<name>\t<address>
//! IN\t<name>\t<address>
//! ```
//!
//! Outputs come first, then inputs, each in source order.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bus::{BusError, Direction, NamingRule, SignalDef, SignalKind};
use crate::varlist::{classify, parse_varlist, Classification, ParseDiagnostics, SourceFile, VariableRecord};

pub const POLICY_HEADER: &str = "tunneltwin-policy v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("variable `{0}` is declared more than once")]
    DuplicateVariable(String),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("policy line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalManifest {
    pub entries: Vec<SignalDef>,
    pub source_digest: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ManifestStats {
    pub actuators: usize,
    pub sensors: usize,
    pub buttons: usize,
    pub skipped: usize,
    /// Button records left out because GUI generation was off.
    pub buttons_omitted: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ManifestOptions {
    pub with_gui_buttons: bool,
}

impl SignalManifest {
    pub fn empty() -> Self {
        SignalManifest {
            entries: Vec::new(),
            source_digest: sha256_hex(&[]),
        }
    }

    pub fn outputs(&self) -> impl Iterator<Item = &SignalDef> {
        self.entries.iter().filter(|d| d.direction == Direction::Output)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &SignalDef> {
        self.entries.iter().filter(|d| d.direction == Direction::Input)
    }

    pub fn in_group<'a>(&'a self, group: &'a str) -> impl Iterator<Item = &'a SignalDef> {
        self.entries.iter().filter(move |d| d.group == group)
    }
}

fn signal_def_for(rec: &VariableRecord, class: Classification) -> Option<SignalDef> {
    let kind = match class {
        Classification::Actuator => SignalKind::Actuator,
        Classification::Sensor => SignalKind::Sensor,
        // GUI feedback outputs are PLC outputs; on the bus they are actuators
        // of the operator panel.
        Classification::Button if rec.var_name.starts_with("dvar") => SignalKind::Actuator,
        Classification::Button => SignalKind::Button,
        Classification::Skip => return None,
    };
    Some(SignalDef::from_name(rec.var_name.clone(), kind))
}

/// Builds the manifest from both record lists. Outputs (STATE file) come
/// first, then inputs, each in file order.
pub fn generate_manifest(
    records: &[VariableRecord],
    source_digest: String,
    opts: ManifestOptions,
) -> Result<(SignalManifest, ManifestStats), PolicyError> {
    let mut stats = ManifestStats::default();
    let mut seen = HashSet::new();
    let mut outputs = Vec::new();
    let mut inputs = Vec::new();
    for rec in records {
        let class = classify(rec);
        match class {
            Classification::Skip => {
                stats.skipped += 1;
                continue;
            }
            Classification::Button if !opts.with_gui_buttons => {
                stats.buttons_omitted += 1;
                continue;
            }
            Classification::Actuator => stats.actuators += 1,
            Classification::Sensor => stats.sensors += 1,
            Classification::Button => stats.buttons += 1,
        }
        if !seen.insert(rec.var_name.clone()) {
            return Err(PolicyError::DuplicateVariable(rec.var_name.clone()));
        }
        let Some(def) = signal_def_for(rec, class) else {
            continue;
        };
        match def.direction {
            Direction::Output => outputs.push(def),
            Direction::Input => inputs.push(def),
        }
    }
    outputs.extend(inputs);
    Ok((
        SignalManifest {
            entries: outputs,
            source_digest,
        },
        stats,
    ))
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CodegenReport {
    pub inputs: ParseDiagnostics,
    pub state: ParseDiagnostics,
    pub manifest: ManifestStats,
}

/// Parses both pane copies and generates the manifest in one go.
pub fn codegen(
    inputs_text: &str,
    state_text: &str,
    opts: ManifestOptions,
) -> Result<(SignalManifest, CodegenReport), PolicyError> {
    let (state_records, state_diag) = parse_varlist(state_text, SourceFile::StateFile);
    let (input_records, input_diag) = parse_varlist(inputs_text, SourceFile::InputsFile);
    let mut all = state_records;
    all.extend(input_records);
    let digest = sha256_hex(&[inputs_text.as_bytes(), state_text.as_bytes()]);
    let (manifest, stats) = generate_manifest(&all, digest, opts)?;
    Ok((
        manifest,
        CodegenReport {
            inputs: input_diag,
            state: state_diag,
            manifest: stats,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PolicySignal {
    pub name: String,
    pub direction: Direction,
    pub address: String,
}

impl PolicySignal {
    pub fn kind(&self) -> SignalKind {
        match self.direction {
            Direction::Output => SignalKind::Actuator,
            Direction::Input if self.name.contains("button") => SignalKind::Button,
            Direction::Input => SignalKind::Sensor,
        }
    }

    pub fn to_def(&self) -> SignalDef {
        SignalDef::from_name(self.name.clone(), self.kind())
    }
}

/// The signal/address catalog exchanged during the gateway handshake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyManifest {
    pub version: u32,
    pub signals: Vec<PolicySignal>,
    /// Digest of the files the policy was generated from.
    pub source_digest: String,
}

impl PolicyManifest {
    pub fn from_manifest(
        manifest: &SignalManifest,
        in_rule: &NamingRule,
        out_rule: &NamingRule,
    ) -> Self {
        let signals = manifest
            .outputs()
            .chain(manifest.inputs())
            .map(|def| PolicySignal {
                name: def.name.clone(),
                direction: def.direction,
                address: match def.direction {
                    Direction::Input => in_rule.resolve(&def.name),
                    Direction::Output => out_rule.resolve(&def.name),
                },
            })
            .collect();
        PolicyManifest {
            version: 1,
            signals,
            source_digest: manifest.source_digest.clone(),
        }
    }

    /// Digest over the signal lines only; this is what the handshake compares.
    pub fn signal_digest(&self) -> String {
        let mut canon = String::new();
        for s in &self.signals {
            let _ = writeln!(canon, "{}\t{}\t{}", s.direction.wire_tag(), s.name, s.address);
        }
        sha256_hex(&[canon.as_bytes()])
    }

    pub fn names(&self) -> BTreeSet<&str> {
        self.signals.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn defs(&self) -> Vec<SignalDef> {
        self.signals.iter().map(PolicySignal::to_def).collect()
    }

    pub fn get(&self, name: &str) -> Option<&PolicySignal> {
        self.signals.iter().find(|s| s.name == name)
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        out.push_str(POLICY_HEADER);
        out.push('\n');
        let _ = writeln!(out, "digest {}", self.source_digest);
        for s in &self.signals {
            let _ = writeln!(out, "{}\t{}\t{}", s.direction.wire_tag(), s.name, s.address);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let malformed = |line: usize, reason: &str| PolicyError::Malformed {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, POLICY_HEADER)) => {}
            _ => return Err(malformed(1, "missing `tunneltwin-policy v1` header")),
        }
        let source_digest = match lines.next() {
            Some((_, l)) if l.starts_with("digest ") => l["digest ".len()..].to_string(),
            _ => return Err(malformed(2, "missing digest line")),
        };
        let mut signals = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            let [dir, name, address] = fields[..] else {
                return Err(malformed(n, "expected `<dir>\\t<name>\\t<address>`"));
            };
            let direction = Direction::from_wire_tag(dir)
                .ok_or_else(|| malformed(n, "direction must be IN or OUT"))?;
            if name.is_empty() || name.contains(' ') {
                return Err(malformed(n, "signal names must be non-empty without spaces"));
            }
            if !seen.insert(name.to_string()) {
                return Err(PolicyError::DuplicateVariable(name.to_string()));
            }
            signals.push(PolicySignal {
                name: name.to_string(),
                direction,
                address: address.to_string(),
            });
        }
        Ok(PolicyManifest {
            version: 1,
            signals,
            source_digest,
        })
    }

    /// Sidecar content: the source digest plus a digest of the document.
    pub fn sidecar(&self) -> String {
        let doc = self.emit();
        format!(
            "source {}\npolicy {}\n",
            self.source_digest,
            sha256_hex(&[doc.as_bytes()])
        )
    }

    /// True when the policy was not generated from these exact sources.
    pub fn is_stale(&self, inputs_text: &str, state_text: &str) -> bool {
        self.source_digest != sha256_hex(&[inputs_text.as_bytes(), state_text.as_bytes()])
    }
}

pub fn emit_policy(
    manifest: &SignalManifest,
    in_template: &str,
    out_template: &str,
) -> Result<String, PolicyError> {
    let in_rule = NamingRule::new(in_template)?;
    let out_rule = NamingRule::new(out_template)?;
    Ok(PolicyManifest::from_manifest(manifest, &in_rule, &out_rule).emit())
}
