//! WebSocket gateway for a single trainer connection.
//!
//! An acceptor thread hands the first client to a connection thread, which
//! forwards queued server messages and turns client messages into
//! [`GatewayEvent`]s. Feedback is stamped on receipt against the session
//! origin; whatever clock the browser has is never consulted.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{info, warn};
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::http::StatusCode;
use tungstenite::{Message, WebSocket};

use super::protocol::{ClientMessage, ControlAction, InputMode, ServerMessage};
use crate::error::Result;
use crate::grounding::{FeedbackSample, FeedbackSource};

const POLL: Duration = Duration::from_millis(5);

#[derive(Clone, Debug, PartialEq)]
pub enum GatewayEvent {
    Connected,
    Disconnected,
    Feedback(FeedbackSample),
    Control {
        action: ControlAction,
        mode: Option<InputMode>,
    },
}

struct Shared {
    origin: Instant,
    connected: AtomicBool,
    shutdown: AtomicBool,
    malformed: AtomicU64,
    outbox: Mutex<Option<Sender<String>>>,
}

pub struct Gateway {
    addr: SocketAddr,
    shared: Arc<Shared>,
    events: Receiver<GatewayEvent>,
    acceptor: Option<JoinHandle<()>>,
}

impl Gateway {
    /// Binds the listener and starts accepting. Port 0 picks a free port.
    pub fn bind<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        Gateway::bind_with_origin(addr, Instant::now())
    }

    pub fn bind_with_origin<A: ToSocketAddrs>(addr: A, origin: Instant) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            origin,
            connected: AtomicBool::new(false),
            shutdown: AtomicBool::new(false),
            malformed: AtomicU64::new(0),
            outbox: Mutex::new(None),
        });
        let (tx, events) = mpsc::channel();
        let acceptor = {
            let shared = shared.clone();
            thread::spawn(move || accept_loop(listener, shared, tx))
        };
        info!("gateway listening on {addr}");
        Ok(Gateway {
            addr,
            shared,
            events,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Time zero of the session clock used to stamp feedback.
    pub fn origin(&self) -> Instant {
        self.shared.origin
    }

    pub fn is_connected(&self) -> bool {
        self.shared.connected.load(Ordering::SeqCst)
    }

    /// Client messages dropped as malformed so far.
    pub fn malformed_count(&self) -> u64 {
        self.shared.malformed.load(Ordering::SeqCst)
    }

    /// Queues a message for the connected client; `false` when nobody is
    /// connected (the message is dropped).
    pub fn send(&self, msg: &ServerMessage) -> bool {
        let outbox = self.shared.outbox.lock().expect("outbox lock");
        outbox
            .as_ref()
            .is_some_and(|tx| tx.send(msg.encode()).is_ok())
    }

    pub fn try_event(&self) -> Option<GatewayEvent> {
        self.events.try_recv().ok()
    }

    pub fn wait_event(&self, timeout: Duration) -> Option<GatewayEvent> {
        match self.events.recv_timeout(timeout) {
            Ok(e) => Some(e),
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => None,
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, events: Sender<GatewayEvent>) {
    let mut workers = Vec::new();
    while !shared.shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                if stream.set_nonblocking(false).is_err() {
                    continue;
                }
                if shared.connected.swap(true, Ordering::SeqCst) {
                    info!("refusing second trainer connection from {peer}");
                    thread::spawn(move || refuse(stream));
                    continue;
                }
                let shared = shared.clone();
                let events = events.clone();
                workers.push(thread::spawn(move || {
                    serve_client(stream, &shared, &events);
                    shared.connected.store(false, Ordering::SeqCst);
                    *shared.outbox.lock().expect("outbox lock") = None;
                    let _ = events.send(GatewayEvent::Disconnected);
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("gateway accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
    for w in workers {
        let _ = w.join();
    }
}

fn refuse(stream: TcpStream) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(2)));
    let _ = tungstenite::accept_hdr(stream, |_: &Request, _: Response| -> std::result::Result<Response, ErrorResponse> {
        let mut resp = ErrorResponse::new(Some("a trainer is already connected".into()));
        *resp.status_mut() = StatusCode::CONFLICT;
        Err(resp)
    });
}

fn serve_client(stream: TcpStream, shared: &Shared, events: &Sender<GatewayEvent>) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            warn!("websocket handshake failed: {e}");
            return;
        }
    };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let (tx, rx) = mpsc::channel::<String>();
    *shared.outbox.lock().expect("outbox lock") = Some(tx);
    let _ = events.send(GatewayEvent::Connected);
    while !shared.shutdown.load(Ordering::SeqCst) {
        if flush_outgoing(&mut ws, &rx).is_err() {
            return;
        }
        match ws.read() {
            Ok(Message::Text(text)) => handle_text(&text, shared, events),
            Ok(Message::Close(_)) => return,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
    }
    // deliver what the session queued before it shut down
    let _ = flush_outgoing(&mut ws, &rx);
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn flush_outgoing(ws: &mut WebSocket<TcpStream>, rx: &Receiver<String>) -> tungstenite::Result<()> {
    let mut sent = false;
    while let Ok(text) = rx.try_recv() {
        ws.write(Message::Text(text))?;
        sent = true;
    }
    if sent {
        ws.flush()?;
    }
    Ok(())
}

fn handle_text(text: &str, shared: &Shared, events: &Sender<GatewayEvent>) {
    let event = match ClientMessage::decode(text) {
        Ok(ClientMessage::Feedback { value }) => {
            let t = shared.origin.elapsed().as_secs_f64();
            GatewayEvent::Feedback(FeedbackSample::new(t, value, FeedbackSource::Human))
        }
        Ok(ClientMessage::Control { action, mode }) => GatewayEvent::Control { action, mode },
        Err(e) => {
            shared.malformed.fetch_add(1, Ordering::SeqCst);
            warn!("dropping client message: {e}");
            return;
        }
    };
    let _ = events.send(event);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn connect(addr: SocketAddr) -> WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>> {
        tungstenite::connect(format!("ws://{addr}")).unwrap().0
    }

    fn next(g: &Gateway) -> GatewayEvent {
        g.wait_event(Duration::from_secs(5)).expect("event")
    }

    #[test]
    fn feedback_is_clamped_and_stamped() {
        let g = Gateway::bind("127.0.0.1:0").unwrap();
        let mut c = connect(g.local_addr());
        assert_eq!(next(&g), GatewayEvent::Connected);
        let before = g.origin().elapsed().as_secs_f64();
        c.send(Message::Text(ClientMessage::Feedback { value: 1.6 }.encode())).unwrap();
        match next(&g) {
            GatewayEvent::Feedback(s) => {
                assert_eq!(s.value, 1.0);
                assert_eq!(s.source, FeedbackSource::Human);
                assert!(s.t_wall >= before);
            }
            other => panic!("unexpected {other:?}"),
        }
        c.send(Message::Text("garbage".into())).unwrap();
        c.send(Message::Text(r#"{"version":"guide/1","type":"control","action":"pause"}"#.into())).unwrap();
        assert_eq!(
            next(&g),
            GatewayEvent::Control {
                action: ControlAction::Pause,
                mode: None
            }
        );
        assert_eq!(g.malformed_count(), 1);
    }

    #[test]
    fn second_connection_is_refused_and_frames_flow() {
        let g = Gateway::bind("127.0.0.1:0").unwrap();
        let mut first = connect(g.local_addr());
        assert_eq!(next(&g), GatewayEvent::Connected);
        let second = tungstenite::connect(format!("ws://{}", g.local_addr()));
        assert!(second.is_err());
        let msg = ServerMessage::Stats {
            episode_return: 1.0,
            success_rate: 0.0,
        };
        assert!(g.send(&msg));
        match first.read().unwrap() {
            Message::Text(t) => assert_eq!(ServerMessage::decode(&t).unwrap(), msg),
            other => panic!("unexpected {other:?}"),
        }
        first.close(None).unwrap();
        while !matches!(first.read(), Err(_)) {}
        assert_eq!(next(&g), GatewayEvent::Disconnected);
        assert!(!g.send(&msg));
    }
}
