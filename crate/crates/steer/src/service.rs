//! Serves a live packing over WebSocket.
//!
//! The solver runs on its own thread and owns the [`Packer`]. Each client
//! gets a thread that forwards decoded commands (steering commands go into
//! the packer's steering queue, which is drained in the next global section)
//! and relays throttled snapshots back.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};
use twa_packing::{PackError, PackStatus, Packer, SteerHandle};

use crate::frame::{decode, encode, Command, Frame, Snapshot};

pub const DEFAULT_PORT: u16 = 7870;

#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    /// 0 picks a free port.
    pub port: u16,
    pub snapshot_every: u64,
    /// Minimum spacing between broadcast snapshots.
    pub min_spacing: Duration,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            port: DEFAULT_PORT,
            snapshot_every: 1,
            min_spacing: Duration::from_millis(33),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn snapshot(packer: &Packer, converged: bool) -> Snapshot {
    let inst = packer.instance();
    Snapshot {
        iteration: packer.iteration(),
        circles: packer
            .positions()
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p[0], p[1]))
            .collect(),
        radius: inst.radius,
        density: inst.density(),
        max_overlap: packer.pair_stats().overlap,
        converged,
    }
}

enum Control {
    Pause,
    Resume,
    /// New steering input; the solver should iterate again.
    Wake,
}

type Clients = Arc<Mutex<Vec<Sender<Arc<str>>>>>;

struct Shared {
    stop: AtomicBool,
    iteration: AtomicU64,
    settled: AtomicBool,
    paused: AtomicBool,
    latest: Mutex<Arc<str>>,
    clients: Clients,
}

/// Called with every iteration status, on the solver thread.
pub type StatusSink = Box<dyn FnMut(&PackStatus) + Send>;

/// A running service. Dropping it without [`Service::shutdown`] leaves the
/// threads running until the process exits.
pub struct Service {
    addr: SocketAddr,
    shared: Arc<Shared>,
    solver: JoinHandle<(Packer, Option<PackError>)>,
    acceptor: JoinHandle<()>,
}

impl Service {
    pub fn start(packer: Packer, config: &ServeConfig) -> Result<Service, ServeError> {
        Self::start_with(packer, config, Box::new(|_| {}))
    }

    pub fn start_with(packer: Packer, config: &ServeConfig, sink: StatusSink) -> Result<Service, ServeError> {
        let listener = TcpListener::bind(("127.0.0.1", config.port)).map_err(|e| match e.kind() {
            io::ErrorKind::AddrInUse => ServeError::PortInUse(config.port),
            _ => ServeError::Io(e),
        })?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let first = encode(&Frame::Snapshot(snapshot(&packer, false))).expect("snapshot encodes");
        let shared = Arc::new(Shared {
            stop: AtomicBool::new(false),
            iteration: AtomicU64::new(packer.iteration()),
            settled: AtomicBool::new(false),
            paused: AtomicBool::new(false),
            latest: Mutex::new(first.into()),
            clients: Arc::new(Mutex::new(Vec::new())),
        });
        let (control_tx, control_rx) = mpsc::channel();
        let steer = packer.steer();
        let solver = {
            let shared = shared.clone();
            let config = config.clone();
            thread::spawn(move || solve_loop(packer, &config, &shared, control_rx, sink))
        };
        let acceptor = {
            let shared = shared.clone();
            thread::spawn(move || accept_loop(listener, shared, control_tx, steer))
        };
        Ok(Service {
            addr,
            shared,
            solver,
            acceptor,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Last completed iteration.
    pub fn iteration(&self) -> u64 {
        self.shared.iteration.load(Ordering::SeqCst)
    }

    /// Converged (or stopped by an error) with no steering input since.
    pub fn is_settled(&self) -> bool {
        self.shared.settled.load(Ordering::SeqCst)
    }

    pub fn is_paused(&self) -> bool {
        self.shared.paused.load(Ordering::SeqCst)
    }

    /// Blocks until the run settles or `timeout` passes; returns whether it settled.
    pub fn wait_settled(&self, timeout: Duration) -> bool {
        let end = Instant::now() + timeout;
        while Instant::now() < end {
            if self.is_settled() {
                return true;
            }
            thread::sleep(Duration::from_millis(2));
        }
        self.is_settled()
    }

    /// Stops every thread and hands back the packer with the error that
    /// ended the run, if any.
    /// The most recent snapshot broadcast to clients.
    pub fn latest_snapshot(&self) -> Snapshot {
        let text = self.shared.latest.lock().expect("latest lock").clone();
        match decode(&text) {
            Ok(Frame::Snapshot(s)) => s,
            _ => unreachable!("only snapshots are stored as latest"),
        }
    }

    pub fn shutdown(self) -> (Packer, Option<PackError>) {
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = self.acceptor.join();
        self.solver.join().expect("solver thread panicked")
    }
}

fn broadcast(shared: &Shared, frame: Arc<str>) {
    *shared.latest.lock().expect("latest lock") = frame.clone();
    shared
        .clients
        .lock()
        .expect("clients lock")
        .retain(|tx| tx.send(frame.clone()).is_ok());
}

fn solve_loop(
    mut packer: Packer,
    config: &ServeConfig,
    shared: &Shared,
    control: Receiver<Control>,
    mut sink: StatusSink,
) -> (Packer, Option<PackError>) {
    let mut paused = false;
    let mut settled = false;
    let mut failure = None;
    let mut last_sent: Option<Instant> = None;
    let max_iterations = packer.engine().config().max_iterations;
    let publish = |packer: &Packer, converged: bool| {
        let text = encode(&Frame::Snapshot(snapshot(packer, converged))).expect("snapshot encodes");
        broadcast(shared, text.into());
    };
    while !shared.stop.load(Ordering::SeqCst) {
        let next = if paused || settled {
            match control.recv_timeout(Duration::from_millis(20)) {
                Ok(c) => Some(c),
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) => None,
            }
        } else {
            control.try_recv().ok()
        };
        if let Some(c) = next {
            match c {
                Control::Pause => paused = true,
                Control::Resume => paused = false,
                Control::Wake => settled = failure.is_some(),
            }
            shared.paused.store(paused, Ordering::SeqCst);
            shared.settled.store(settled, Ordering::SeqCst);
            continue;
        }
        if paused || settled {
            // control channel closed: nothing can wake us
            thread::sleep(Duration::from_millis(20));
            continue;
        }
        match packer.step() {
            Ok(status) => {
                sink(&status);
                shared.iteration.store(status.iteration, Ordering::SeqCst);
                let finished = status.converged || status.iteration >= max_iterations;
                let due = status.iteration % config.snapshot_every.max(1) == 0
                    && last_sent.is_none_or(|t| t.elapsed() >= config.min_spacing);
                if due || finished {
                    publish(&packer, status.converged);
                    last_sent = Some(Instant::now());
                }
                if finished {
                    settled = true;
                    shared.settled.store(true, Ordering::SeqCst);
                }
            }
            Err(e) => {
                let text = encode(&Frame::Error { message: e.to_string() }).expect("error encodes");
                broadcast(shared, text.into());
                failure = Some(e);
                settled = true;
                shared.settled.store(true, Ordering::SeqCst);
            }
        }
    }
    (packer, failure)
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, control: Sender<Control>, steer: SteerHandle) {
    let mut clients = Vec::new();
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let shared = shared.clone();
                let control = control.clone();
                let steer = steer.clone();
                clients.push(thread::spawn(move || {
                    let _ = serve_client(stream, &shared, &control, &steer);
                }));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(Duration::from_millis(5)),
        }
    }
    for c in clients {
        let _ = c.join();
    }
}

// tungstenite's error type is large; it is only ever propagated to end a session
#[allow(clippy::result_large_err)]
fn send_frame(ws: &mut WebSocket<TcpStream>, frame: &Frame) -> tungstenite::Result<()> {
    ws.send(Message::Text(encode(frame).expect("frame encodes")))
}

#[allow(clippy::result_large_err)]
fn handle_text(
    text: &str,
    ws: &mut WebSocket<TcpStream>,
    control: &Sender<Control>,
    steer: &SteerHandle,
) -> tungstenite::Result<()> {
    let reply = |message: String| Frame::Error { message };
    match decode(text) {
        Err(e) => send_frame(ws, &reply(e.to_string())),
        Ok(Frame::Command(cmd)) => {
            let result = match &cmd {
                Command::Pause => control.send(Control::Pause).map_err(|e| e.to_string()),
                Command::Resume => control.send(Control::Resume).map_err(|e| e.to_string()),
                other => {
                    let sc = other.to_steer().expect("steering command");
                    steer
                        .send(sc)
                        .map_err(|e| e.to_string())
                        .and_then(|_| control.send(Control::Wake).map_err(|e| e.to_string()))
                }
            };
            match result {
                Ok(()) => Ok(()),
                Err(message) => send_frame(ws, &reply(message)),
            }
        }
        Ok(_) => send_frame(ws, &reply("clients may only send command frames".into())),
    }
}

#[allow(clippy::result_large_err)]
fn serve_client(
    stream: TcpStream,
    shared: &Shared,
    control: &Sender<Control>,
    steer: &SteerHandle,
) -> tungstenite::Result<()> {
    stream.set_nonblocking(false)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_mut().set_read_timeout(Some(Duration::from_millis(5)))?;

    // register before reading the latest snapshot so no broadcast is missed
    let (tx, rx) = mpsc::channel::<Arc<str>>();
    shared.clients.lock().expect("clients lock").push(tx);
    let first = shared.latest.lock().expect("latest lock").clone();
    ws.send(Message::Text(first.to_string()))?;

    while !shared.stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => handle_text(&text, &mut ws, control, steer)?,
            Ok(Message::Binary(_)) => send_frame(
                &mut ws,
                &Frame::Error {
                    message: "binary frames are not supported".into(),
                },
            )?,
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
        // only the newest pending snapshot is worth sending
        if let Some(frame) = rx.try_iter().last() {
            ws.send(Message::Text(frame.to_string()))?;
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}
