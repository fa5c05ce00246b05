use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{connect, Message, WebSocket};
use tunneltwin::gts::{parse_gts, Controller};
use tunneltwin::harness::ws::{manifest_frame, serve, LiveOptions, WsHub};
use tunneltwin::harness::{PlcBinding, RunConfig, RunOutcome, Runner, Scenario, TraceRow};
use tunneltwin::plant::WorldConfig;
use tunneltwin::policy::PolicyManifest;

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn fixture(rel: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", rel].iter().collect();
    std::fs::read_to_string(p).unwrap()
}

/// Serves a tube-close world in real time for `seconds` of sim time.
fn start(seconds: f64) -> (SocketAddr, thread::JoinHandle<RunOutcome>) {
    let cfg = RunConfig::new(
        WorldConfig::default(),
        Scenario::parse(&format!("duration {seconds}")).unwrap(),
        PlcBinding::Inproc {
            controller: Controller::new(parse_gts(&fixture("tube_close.gts")).unwrap(), None),
            policy: Some(PolicyManifest::parse(&fixture("policy/tube_close.policy")).unwrap()),
            period: None,
        },
    );
    let mut runner = Runner::new(cfg).unwrap();
    let hub = WsHub::bind("127.0.0.1:0", manifest_frame(&runner.bus().defs())).unwrap();
    let addr = hub.local_addr();
    let h = thread::spawn(move || {
        serve(
            &mut runner,
            &hub,
            LiveOptions {
                realtime: true,
                bounded: true,
            },
        )
        .unwrap();
        runner.finish()
    });
    (addr, h)
}

fn client(addr: SocketAddr) -> Client {
    let (ws, _) = connect(format!("ws://{addr}")).unwrap();
    if let MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    }
    ws
}

fn next(ws: &mut Client) -> Value {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            _ => continue,
        }
    }
}

fn send(ws: &mut Client, v: Value) {
    ws.send(Message::Text(v.to_string())).unwrap();
}

/// Reads frames until one of type `kind` arrives.
fn until(ws: &mut Client, kind: &str) -> Value {
    loop {
        let f = next(ws);
        if f["type"] == kind {
            return f;
        }
    }
}

fn rows<'a>(trace: &'a [TraceRow], signal: &str) -> Vec<&'a TraceRow> {
    trace.iter().filter(|r| r.signal == signal).collect()
}

#[test]
fn manifest_then_state() {
    let (addr, h) = start(1.0);
    let mut ws = client(addr);
    let m = next(&mut ws);
    assert_eq!(m["type"], "manifest");
    let signals = m["signals"].as_array().unwrap();
    assert!(signals
        .iter()
        .any(|s| s["name"] == "ivar_M_M_HW_GUI_button_close_tube1" && s["kind"] == "button"));
    let s = until(&mut ws, "state");
    assert!(s["world"]["tubes"].as_array().unwrap().len() == 2);
    assert!(s["signals"]["dvar_M_M_HW_TrafficTube_1_TrafficLight_1_a_off"].is_boolean());
    drop(ws);
    h.join().unwrap();
}

#[test]
fn press_is_acked_and_pulses_three_ticks() {
    let (addr, h) = start(2.0);
    let mut ws = client(addr);
    until(&mut ws, "state");
    let button = "ivar_M_M_HW_GUI_button_close_tube1";
    send(&mut ws, json!({"type": "press", "id": 7, "signal": button}));
    let ack = until(&mut ws, "ack");
    assert_eq!(ack["id"], 7);
    let at = ack["sim_time"].as_f64().unwrap();
    drop(ws);
    let out = h.join().unwrap();
    let r = rows(&out.trace, button);
    assert_eq!(r.len(), 2, "{r:?}");
    assert!(r[0].value && (r[0].time - at).abs() < 1e-9);
    assert!(!r[1].value && ((r[1].time - at) * 50.0 - 3.0).abs() < 1e-6);
    // the controller saw it: lights went red
    let red = rows(&out.trace, "dvar_M_M_HW_TrafficTube_1_TrafficLight_1_a_red");
    assert!(red.first().is_some_and(|r| r.value && r.time - at <= 0.2));
}

#[test]
fn toggle_opens_the_emergency_exit() {
    let (addr, h) = start(1.0);
    let mut ws = client(addr);
    until(&mut ws, "state");
    send(&mut ws, json!({"type": "toggle", "id": 1, "target": "TrafficTube_2/EmergencyExit"}));
    until(&mut ws, "ack");
    let s = loop {
        let s = until(&mut ws, "state");
        if s["signals"]["ivar_M_M_HW_TrafficTube_2_EmergencyExit_s_open"] == true {
            break s;
        }
    };
    assert!(s["time"].as_f64().unwrap() > 0.0);
    drop(ws);
    h.join().unwrap();
}

#[test]
fn malformed_requests_get_error_frames_and_the_session_survives() {
    let (addr, h) = start(1.5);
    let mut ws = client(addr);
    until(&mut ws, "state");
    ws.send(Message::Text("{not json".into())).unwrap();
    let e = until(&mut ws, "error");
    assert!(e["message"].as_str().unwrap().contains("malformed"));
    send(&mut ws, json!({"type": "command", "id": 2, "command": "set_smoke 9 4"}));
    let e = until(&mut ws, "error");
    assert_eq!(e["id"], 2);
    send(&mut ws, json!({"type": "press", "id": 3, "signal": "TrafficTube_1_HeightDetection_s_detected"}));
    let e = until(&mut ws, "error");
    assert!(e["message"].as_str().unwrap().contains("not a button"));
    send(&mut ws, json!({"type": "command", "id": 4, "command": "set_smoke 1 4"}));
    assert_eq!(until(&mut ws, "ack")["id"], 4);
    drop(ws);
    h.join().unwrap();
}

#[test]
fn two_clients_see_the_same_stream() {
    let (addr, h) = start(1.5);
    let mut a = client(addr);
    let mut b = client(addr);
    until(&mut a, "state");
    until(&mut b, "state");
    let collect = |ws: &mut Client| {
        let mut frames = Vec::new();
        let t0 = Instant::now();
        while t0.elapsed() < Duration::from_millis(600) {
            let f = until(ws, "state");
            frames.push((f["tick"].as_u64().unwrap(), f.to_string()));
        }
        frames
    };
    let fa = collect(&mut a);
    let fb = collect(&mut b);
    let mut common = 0;
    for (tick, frame) in &fa {
        if let Some((_, other)) = fb.iter().find(|(t, _)| t == tick) {
            assert_eq!(frame, other, "tick {tick}");
            common += 1;
        }
    }
    assert!(common >= 5, "only {common} shared frames");
    // at most 20 Hz of sim time
    for w in fa.windows(2) {
        assert!(w[1].0 - w[0].0 >= 3, "{} -> {}", w[0].0, w[1].0);
    }
    drop((a, b));
    h.join().unwrap();
}
