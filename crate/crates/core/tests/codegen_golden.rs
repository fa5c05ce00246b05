use std::path::PathBuf;

use tunneltwin::bus::{Direction, NamingRule, SignalKind};
use tunneltwin::policy::{codegen, sha256_hex, ManifestOptions, PolicyManifest};
use tunneltwin::varlist::{parse_varlist, print_varlist, SourceFile};

fn fixture(rel: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", rel].iter().collect();
    std::fs::read_to_string(p).unwrap()
}

fn generate(with_gui_buttons: bool) -> PolicyManifest {
    let (m, _) = codegen(
        &fixture("varlists/inputs.gvl.txt"),
        &fixture("varlists/state.struct.txt"),
        ManifestOptions { with_gui_buttons },
    )
    .unwrap();
    PolicyManifest::from_manifest(&m, &NamingRule::inputs_default(), &NamingRule::outputs_default())
}

#[test]
fn boom_barrier_block_is_four_actuators_and_seven_sensors() {
    let (m, report) = codegen(
        &fixture("varlists/inputs.gvl.txt"),
        &fixture("varlists/state.struct.txt"),
        ManifestOptions::default(),
    )
    .unwrap();
    let group: Vec<_> = m.in_group("TrafficTube_1/BoomBarrier_1").collect();
    let count = |k: SignalKind| group.iter().filter(|d| d.kind == k).count();
    assert_eq!(count(SignalKind::Actuator), 4);
    assert_eq!(count(SignalKind::Sensor), 7);
    assert_eq!(group.len(), 11);
    assert!(group
        .iter()
        .all(|d| (d.kind == SignalKind::Actuator) == (d.direction == Direction::Output)));
    // every enum_E line is dropped
    let state = fixture("varlists/state.struct.txt");
    let enum_names: Vec<&str> = state
        .lines()
        .filter(|l| l.contains("enum_E"))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(enum_names.len(), 9);
    for n in enum_names {
        assert!(m.entries.iter().all(|d| d.name != n), "{n} leaked into the manifest");
    }
    assert_eq!(report.manifest.skipped, 9);
    assert_eq!(report.manifest.buttons_omitted, 2);
}

#[test]
fn every_hw_bool_appears_once() {
    let m = generate(true);
    let state = fixture("varlists/state.struct.txt");
    for line in state.lines().filter(|l| l.contains("_HW_") && l.contains("BOOL")) {
        let name = line.split_whitespace().next().unwrap();
        assert_eq!(m.signals.iter().filter(|s| s.name == name).count(), 1, "{name}");
    }
}

#[test]
fn matches_the_golden_policy() {
    let golden = fixture("policy/tube_close.policy");
    let doc = generate(true).emit();
    assert_eq!(doc, golden);
    let side = fixture("policy/tube_close.policy.digest");
    assert_eq!(generate(true).sidecar(), side);
    assert!(side.contains(&sha256_hex(&[golden.as_bytes()])));
}

#[test]
fn policy_round_trip_is_byte_identical() {
    let golden = fixture("policy/tube_close.policy");
    let parsed = PolicyManifest::parse(&golden).unwrap();
    assert_eq!(parsed.emit(), golden);
    assert!(!parsed.is_stale(&fixture("varlists/inputs.gvl.txt"), &fixture("varlists/state.struct.txt")));
    assert!(parsed.is_stale(&fixture("varlists/inputs.gvl.txt"), ""));
}

#[test]
fn varlists_print_back() {
    for (file, src) in [
        ("varlists/inputs.gvl.txt", SourceFile::InputsFile),
        ("varlists/state.struct.txt", SourceFile::StateFile),
    ] {
        let text = fixture(file);
        let (recs, diag) = parse_varlist(&text, src);
        assert_eq!(diag.unrecognized, 1, "the `...` line");
        let printed = print_varlist(&recs);
        let (again, _) = parse_varlist(&printed, src);
        assert_eq!(recs, again);
    }
}

#[test]
fn addresses_follow_the_naming_rules() {
    let p = generate(true);
    let open = p.get("dvar_M_M_HW_TrafficTube_1_BoomBarrier_1_a_open").unwrap();
    assert_eq!(open.address, "MAIN.state0.dvar_M_M_HW_TrafficTube_1_BoomBarrier_1_a_open");
    let opened = p.get("ivar_M_M_HW_TrafficTube_1_BoomBarrier_1_s_opened").unwrap();
    assert_eq!(opened.address, "INPUTS.ivar_M_M_HW_TrafficTube_1_BoomBarrier_1_s_opened");
}
