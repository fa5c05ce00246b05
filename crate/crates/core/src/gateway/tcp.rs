//! TCP transport for the line protocol.

use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, SyncSender, TrySendError};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::{Endpoint, GatewayError, LinkStats, Message, PlcLink, PlcPeer, Received};

pub const DEFAULT_PORT: u16 = 8510;
/// Records that may wait for the socket before the link counts as lost.
pub const QUEUE_CAPACITY: usize = 8192;
const READ_TIMEOUT: Duration = Duration::from_secs(30);
const WRITE_TIMEOUT: Duration = Duration::from_secs(5);

/// `TUNNELTWIN_PORT`, else 8510.
pub fn default_port() -> u16 {
    std::env::var("TUNNELTWIN_PORT")
        .ok()
        .and_then(|p| p.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

fn lost(why: impl std::fmt::Display) -> GatewayError {
    GatewayError::ConnectionLost(why.to_string())
}

/// One socket: a blocking line reader plus a writer thread fed through a
/// bounded queue, so senders never block on the network.
struct Conn {
    reader: BufReader<TcpStream>,
    tx: Option<SyncSender<String>>,
    writer: Option<JoinHandle<()>>,
    stream: TcpStream,
}

impl Conn {
    fn new(stream: TcpStream, capacity: usize) -> Result<Self, GatewayError> {
        stream.set_nodelay(true).map_err(lost)?;
        stream.set_read_timeout(Some(READ_TIMEOUT)).map_err(lost)?;
        stream.set_write_timeout(Some(WRITE_TIMEOUT)).map_err(lost)?;
        let (tx, rx) = mpsc::sync_channel(capacity);
        let out = stream.try_clone().map_err(lost)?;
        let writer = thread::spawn(move || write_loop(out, rx));
        Ok(Conn {
            reader: BufReader::new(stream.try_clone().map_err(lost)?),
            tx: Some(tx),
            writer: Some(writer),
            stream,
        })
    }

    fn send(&self, msgs: impl IntoIterator<Item = Message>) -> Result<(), GatewayError> {
        let tx = self.tx.as_ref().expect("open until dropped");
        for m in msgs {
            match tx.try_send(m.to_string()) {
                Ok(()) => {}
                Err(TrySendError::Full(_)) => return Err(lost("outbound queue overflow")),
                Err(TrySendError::Disconnected(_)) => return Err(lost("writer closed")),
            }
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, GatewayError> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(lost("peer closed the connection")),
            Ok(_) => Message::parse(line.strip_suffix('\n').unwrap_or(&line)),
            Err(e) => Err(lost(e)),
        }
    }
}

impl Drop for Conn {
    /// Lets the writer flush what is queued, so a peer that is told why the
    /// session ends (a policy mismatch, say) gets to read it.
    fn drop(&mut self) {
        self.tx = None;
        if let Some(w) = self.writer.take() {
            let _ = w.join();
        }
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}

fn write_loop(stream: TcpStream, rx: Receiver<String>) {
    let mut w = std::io::BufWriter::new(stream);
    while let Ok(first) = rx.recv() {
        let mut line = first;
        loop {
            if w.write_all(line.as_bytes()).and_then(|_| w.write_all(b"\n")).is_err() {
                return;
            }
            match rx.try_recv() {
                Ok(next) => line = next,
                Err(_) => break,
            }
        }
        if w.flush().is_err() {
            return;
        }
    }
}

/// Simulation side of a TCP link. Reconnects on demand via [`PlcLink::connect`].
pub struct TcpLink {
    addr: String,
    sim: Endpoint,
    conn: Option<Conn>,
    capacity: usize,
}

impl std::fmt::Debug for TcpLink {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TcpLink")
            .field("addr", &self.addr)
            .field("connected", &self.conn.is_some())
            .finish()
    }
}

impl TcpLink {
    pub fn new(addr: impl Into<String>, sim: Endpoint) -> Self {
        TcpLink {
            addr: addr.into(),
            sim,
            conn: None,
            capacity: QUEUE_CAPACITY,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.sim
    }

    fn guarded<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, GatewayError>) -> Result<T, GatewayError> {
        let r = f(self);
        if r.is_err() {
            self.conn = None;
        }
        r
    }
}

impl PlcLink for TcpLink {
    fn connect(&mut self, t_us: u64) -> Result<(), GatewayError> {
        self.conn = None;
        self.guarded(|this| {
            let addrs: Vec<_> = this.addr.to_socket_addrs().map_err(lost)?.collect();
            let stream = TcpStream::connect(&addrs[..]).map_err(lost)?;
            let mut conn = Conn::new(stream, this.capacity)?;
            conn.send(this.sim.greeting())?;
            let now = t_us as f64 * 1e-6;
            while !this.sim.is_ready() {
                if let Received::Ready(w) = this.sim.receive(conn.recv()?, now)? {
                    conn.send(w)?;
                }
            }
            this.conn = Some(conn);
            Ok(())
        })?;
        self.sync(t_us)
    }

    fn sync(&mut self, t_us: u64) -> Result<(), GatewayError> {
        self.guarded(|this| {
            let conn = this.conn.as_mut().ok_or_else(|| lost("not connected"))?;
            let mut msgs = this.sim.drain();
            msgs.push(Message::Ping(t_us));
            conn.send(msgs)?;
            let now = t_us as f64 * 1e-6;
            loop {
                match this.sim.receive(conn.recv()?, now)? {
                    Received::Pong(n) if n == t_us => return Ok(()),
                    Received::Pong(n) => {
                        return Err(GatewayError::Protocol(format!("PONG {n} while waiting for {t_us}")))
                    }
                    Received::Ping(_) => return Err(GatewayError::Protocol("PING from the PLC side".into())),
                    Received::Nothing | Received::Ready(_) => {}
                }
            }
        })
    }

    fn is_connected(&self) -> bool {
        self.conn.is_some() && self.sim.is_ready()
    }

    fn disconnect(&mut self) {
        self.conn = None;
    }

    fn stats(&self) -> LinkStats {
        self.sim.stats()
    }
}

/// Serves one session on `stream` until the peer leaves or misbehaves.
pub fn serve_session(stream: TcpStream, peer: &mut PlcPeer) -> Result<(), GatewayError> {
    let mut conn = Conn::new(stream, QUEUE_CAPACITY)?;
    conn.send(peer.greeting())?;
    loop {
        let msg = match conn.recv() {
            Err(GatewayError::ConnectionLost(_)) if peer.endpoint.is_ready() => return Ok(()),
            r => r?,
        };
        conn.send(peer.on_message(msg)?)?;
    }
}

/// Accepts sim connections one after another, keeping the PLC state across
/// sessions. Stops after `sessions` sessions when given.
pub fn serve_plc(
    listener: TcpListener,
    mut peer: PlcPeer,
    sessions: Option<usize>,
) -> (PlcPeer, Vec<Result<(), GatewayError>>) {
    let mut results = Vec::new();
    for stream in listener.incoming() {
        let r = match stream {
            Ok(s) => serve_session(s, &mut peer),
            Err(e) => Err(lost(e)),
        };
        match &r {
            Ok(()) => log::info!("sim disconnected; outputs held"),
            Err(e) => log::error!("session ended: {e}"),
        }
        results.push(r);
        if sessions.is_some_and(|n| results.len() >= n) {
            break;
        }
    }
    (peer, results)
}
