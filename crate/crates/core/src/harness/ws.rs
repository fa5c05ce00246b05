//! WebSocket state and command API for operator front ends.
//!
//! Server frames (JSON text):
//! - `{"type":"manifest","signals":[...]}` once on connect
//! - `{"type":"state","time":..,"tick":..,"world":{..},"signals":{..}}` at most 20 Hz of sim time
//! - `{"type":"ack","id":..,"sim_time":..}` for each accepted request
//! - `{"type":"error","id":..,"message":".."}` for rejected ones
//!
//! Client frames:
//! - `{"type":"press","id":1,"signal":"ivar_..._button"}`
//! - `{"type":"toggle","id":2,"target":"TrafficTube_1/EmergencyExit"}`
//! - `{"type":"command","id":3,"command":"set_smoke 1 4"}` using scenario syntax
//!
//! Requests are queued and applied at the next tick boundary, so the tick
//! loop stays the only writer of plant state.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tungstenite::{Message as WsMessage, WebSocket};

use super::runner::{HarnessError, Runner};
use super::scenario::Command;
use crate::bus::SignalDef;

/// Minimum sim time between two state frames.
pub const STATE_INTERVAL: f64 = 0.05;
const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Press {
        #[serde(default)]
        id: u64,
        signal: String,
    },
    Toggle {
        #[serde(default)]
        id: u64,
        target: String,
    },
    Command {
        #[serde(default)]
        id: u64,
        command: String,
    },
}

impl Request {
    pub fn id(&self) -> u64 {
        match self {
            Request::Press { id, .. } | Request::Toggle { id, .. } | Request::Command { id, .. } => *id,
        }
    }

    pub fn to_command(&self) -> Result<Command, String> {
        match self {
            Request::Press { signal, .. } => Ok(Command::Press(signal.clone())),
            Request::Toggle { target, .. } => Ok(Command::Toggle(target.clone())),
            Request::Command { command, .. } => Command::parse(command),
        }
    }
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    name: &'a str,
    kind: crate::bus::SignalKind,
    direction: crate::bus::Direction,
    group: &'a str,
}

pub fn manifest_frame(defs: &[SignalDef]) -> String {
    let signals: Vec<ManifestEntry> = defs
        .iter()
        .map(|d| ManifestEntry {
            name: &d.name,
            kind: d.kind,
            direction: d.direction,
            group: &d.group,
        })
        .collect();
    json!({"type": "manifest", "signals": signals}).to_string()
}

pub fn state_frame(runner: &Runner) -> String {
    let signals: BTreeMap<String, bool> = runner.image();
    json!({
        "type": "state",
        "time": runner.sim_time(),
        "tick": runner.world().tick_count(),
        "world": runner.world().snapshot(),
        "signals": signals,
    })
    .to_string()
}

type ClientId = u64;

struct Shared {
    clients: Mutex<BTreeMap<ClientId, Sender<String>>>,
    manifest: String,
    last_state: Mutex<Option<String>>,
    stop: AtomicBool,
}

/// Accepts WebSocket clients on a background thread and funnels their
/// requests into one queue.
pub struct WsHub {
    addr: SocketAddr,
    shared: Arc<Shared>,
    requests: Receiver<(ClientId, Request)>,
    rejects: Receiver<(ClientId, String)>,
}

impl WsHub {
    pub fn bind(addr: impl ToSocketAddrs, manifest: String) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            clients: Mutex::new(BTreeMap::new()),
            manifest,
            last_state: Mutex::new(None),
            stop: AtomicBool::new(false),
        });
        let (req_tx, requests) = mpsc::channel();
        let (rej_tx, rejects) = mpsc::channel();
        let s = shared.clone();
        thread::spawn(move || accept_loop(listener, s, req_tx, rej_tx));
        Ok(WsHub {
            addr,
            shared,
            requests,
            rejects,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn client_count(&self) -> usize {
        self.shared.clients.lock().len()
    }

    /// Sends the same frame to every client and keeps it for late joiners.
    pub fn broadcast(&self, frame: String) {
        self.shared
            .clients
            .lock()
            .retain(|_, tx| tx.send(frame.clone()).is_ok());
        *self.shared.last_state.lock() = Some(frame);
    }

    fn reply(&self, client: ClientId, frame: String) {
        if let Some(tx) = self.shared.clients.lock().get(&client) {
            let _ = tx.send(frame);
        }
    }

    /// Applies every queued request at the current tick boundary and
    /// answers each with an ack or an error frame.
    pub fn apply_pending(&self, runner: &mut Runner) -> usize {
        while let Ok((client, msg)) = self.rejects.try_recv() {
            self.reply(client, json!({"type": "error", "id": null, "message": msg}).to_string());
        }
        let mut applied = 0;
        while let Ok((client, req)) = self.requests.try_recv() {
            let id = req.id();
            let at = runner.sim_time();
            let result = req.to_command().map_err(|e| e.to_string()).and_then(|cmd| {
                runner
                    .execute(&cmd, 0)
                    .map_err(|e: HarnessError| e.to_string())
            });
            let frame = match result {
                Ok(()) => {
                    applied += 1;
                    json!({"type": "ack", "id": id, "sim_time": at})
                }
                Err(message) => json!({"type": "error", "id": id, "message": message}),
            };
            self.reply(client, frame.to_string());
        }
        applied
    }
}

impl Drop for WsHub {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
    }
}

fn accept_loop(
    listener: TcpListener,
    shared: Arc<Shared>,
    requests: Sender<(ClientId, Request)>,
    rejects: Sender<(ClientId, String)>,
) {
    let next = AtomicU64::new(1);
    while !shared.stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next.fetch_add(1, Ordering::Relaxed);
                let (s, rq, rj) = (shared.clone(), requests.clone(), rejects.clone());
                thread::spawn(move || {
                    if let Err(e) = serve_client(stream, id, s, rq, rj) {
                        log::debug!("ws client {peer} left: {e}");
                    }
                });
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::error!("ws accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn serve_client(
    stream: TcpStream,
    id: ClientId,
    shared: Arc<Shared>,
    requests: Sender<(ClientId, Request)>,
    rejects: Sender<(ClientId, String)>,
) -> Result<(), tungstenite::Error> {
    stream.set_nonblocking(false)?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let (tx, outgoing) = mpsc::channel();
    ws.send(WsMessage::Text(shared.manifest.clone()))?;
    if let Some(state) = shared.last_state.lock().clone() {
        ws.send(WsMessage::Text(state))?;
    }
    shared.clients.lock().insert(id, tx);
    let result = client_loop(&mut ws, id, &shared, &requests, &rejects, &outgoing);
    shared.clients.lock().remove(&id);
    result
}

fn client_loop(
    ws: &mut WebSocket<TcpStream>,
    id: ClientId,
    shared: &Shared,
    requests: &Sender<(ClientId, Request)>,
    rejects: &Sender<(ClientId, String)>,
    outgoing: &Receiver<String>,
) -> Result<(), tungstenite::Error> {
    loop {
        if shared.stop.load(Ordering::Relaxed) {
            let _ = ws.close(None);
            return Ok(());
        }
        match ws.read() {
            Ok(WsMessage::Text(text)) => match serde_json::from_str::<Request>(&text) {
                Ok(req) => {
                    let _ = requests.send((id, req));
                }
                Err(e) => {
                    let _ = rejects.send((id, format!("malformed request: {e}")));
                }
            },
            Ok(WsMessage::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) => return Err(e),
        }
        let mut sent = false;
        while let Ok(frame) = outgoing.try_recv() {
            ws.write(WsMessage::Text(frame))?;
            sent = true;
        }
        if sent {
            ws.flush()?;
        }
    }
}

/// Options for [`serve`].
#[derive(Debug, Clone, Copy)]
pub struct LiveOptions {
    /// Throttle to wall clock.
    pub realtime: bool,
    /// Stop at the runner's end tick; otherwise run until the process ends.
    pub bounded: bool,
}

/// Drives `runner` while serving clients through `hub`.
pub fn serve(runner: &mut Runner, hub: &WsHub, opts: LiveOptions) -> Result<(), HarnessError> {
    let rate = runner.world().cfg.tick_rate as f64;
    let every = ((STATE_INTERVAL * rate - 1e-9).ceil() as u64).max(1);
    let start = Instant::now();
    let t0 = runner.sim_time();
    hub.broadcast(state_frame(runner));
    while runner.livelock().is_none() && !(opts.bounded && runner.is_finished()) {
        hub.apply_pending(runner);
        runner.step()?;
        if runner.world().tick_count().is_multiple_of(every) {
            hub.broadcast(state_frame(runner));
        }
        if opts.realtime {
            let due = Duration::from_secs_f64((runner.sim_time() - t0).max(0.0));
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                thread::sleep(wait);
            }
        }
    }
    hub.apply_pending(runner);
    hub.broadcast(state_frame(runner));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requests_parse() {
        let r: Request = serde_json::from_str(r#"{"type":"press","id":4,"signal":"x_button"}"#).unwrap();
        assert_eq!(r.id(), 4);
        assert_eq!(r.to_command().unwrap(), Command::Press("x_button".into()));
        let r: Request = serde_json::from_str(r#"{"type":"command","command":"traffic on"}"#).unwrap();
        assert_eq!(r.to_command().unwrap(), Command::Traffic(true));
        let r: Request = serde_json::from_str(r#"{"type":"command","command":"fly"}"#).unwrap();
        assert!(r.to_command().is_err());
        assert!(serde_json::from_str::<Request>(r#"{"type":"jump"}"#).is_err());
    }
}
