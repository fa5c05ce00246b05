//! Parsing of the two PLC variable-list panes (the `INPUTS` global variable
//! list and the `STATE` structure) and classification of their entries.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeclaredType {
    Bool,
    EnumE,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceFile {
    InputsFile,
    StateFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableRecord {
    pub raw_line: String,
    pub var_name: String,
    pub declared_type: DeclaredType,
    pub source: SourceFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Classification {
    Actuator,
    Sensor,
    Button,
    Skip,
}

/// Per-file line tally reported by the code generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostics {
    pub lines: usize,
    pub blank: usize,
    pub structural: usize,
    /// Lines with no identifier in first position (`...`, comments, junk).
    pub unrecognized: usize,
    pub records: usize,
}

const STRUCTURAL: &[&str] = &[
    "VAR_GLOBAL",
    "END_VAR",
    "STRUCT",
    "END_STRUCT",
    "TYPE",
    "END_TYPE",
];

fn is_identifier(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// First whitespace-delimited word with any `:`/`;` suffix removed.
fn first_word(line: &str) -> &str {
    let word = line.split_whitespace().next().unwrap_or("");
    let end = word.find([':', ';']).unwrap_or(word.len());
    &word[..end]
}

pub fn declared_type_of(line: &str) -> DeclaredType {
    if line.contains("enum_E") {
        DeclaredType::EnumE
    } else if line.contains("BOOL") {
        DeclaredType::Bool
    } else {
        DeclaredType::Other
    }
}

pub fn parse_varlist(text: &str, source: SourceFile) -> (Vec<VariableRecord>, ParseDiagnostics) {
    let mut diag = ParseDiagnostics::default();
    let mut records = Vec::new();
    for raw in text.lines() {
        diag.lines += 1;
        let line = raw.trim();
        if line.is_empty() {
            diag.blank += 1;
            continue;
        }
        let word = first_word(line);
        if STRUCTURAL.contains(&word) {
            diag.structural += 1;
            continue;
        }
        if !is_identifier(word) {
            diag.unrecognized += 1;
            continue;
        }
        records.push(VariableRecord {
            raw_line: raw.trim_end_matches('\r').to_string(),
            var_name: word.to_string(),
            declared_type: declared_type_of(line),
            source,
        });
    }
    diag.records = records.len();
    (records, diag)
}

/// Inverse of [`parse_varlist`] for the record lines themselves.
pub fn print_varlist(records: &[VariableRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.raw_line);
        out.push('\n');
    }
    out
}

pub fn classify(rec: &VariableRecord) -> Classification {
    let name = rec.var_name.as_str();
    let is_bool = rec.declared_type == DeclaredType::Bool;
    if name.starts_with("dvar") {
        if is_bool && name.contains("GUI") {
            return Classification::Button;
        }
        if is_bool && rec.raw_line.contains("_HW_") {
            return Classification::Actuator;
        }
        return Classification::Skip;
    }
    if name.starts_with("ivar") {
        if name.contains("button") {
            return Classification::Button;
        }
        return Classification::Sensor;
    }
    Classification::Skip
}
