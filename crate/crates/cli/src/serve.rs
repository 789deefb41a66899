//! WebSocket front end for a live session.
//!
//! One control task owns the [`Session`] and ticks it at the control rate.
//! Connection tasks decode frames and forward them over a queue; hand frames
//! are coalesced per hand and stamped with the sim time of the tick that
//! consumes them. Snapshots and scene events fan out on a broadcast channel.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use hapbot::config::Config;
use hapbot::session::{decode_client, encode_server, ClientMessage, ProtocolError, ServerMessage, Session, MAX_FRAME_BYTES};
use hapbot::tracking::HandFrame;
use log::{debug, info, warn};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::protocol::WebSocketConfig;
use tokio_tungstenite::tungstenite::Message;

use crate::{load_config, ServeArgs};

/// Hard ceiling on inbound frames; anything between this and
/// [`MAX_FRAME_BYTES`] gets an error reply before the close.
const TRANSPORT_LIMIT: usize = 1 << 20;

enum Inbound {
    Connect { id: u64, reply: mpsc::UnboundedSender<String> },
    Disconnect { id: u64 },
    Message { id: u64, msg: ClientMessage },
}

/// A running server; dropping it without [`ServerHandle::shutdown`] leaves it running.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: oneshot::Sender<()>,
    control: JoinHandle<()>,
    accept: JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(self) {
        let _ = self.stop.send(());
        let _ = self.control.await;
        self.accept.abort();
    }
}

/// Binds `addr` and starts serving `config` on the current tokio runtime.
pub async fn start(config: Config, addr: &str) -> Result<ServerHandle, String> {
    let session = Session::new(config).map_err(|e| e.to_string())?;
    let listener = TcpListener::bind(addr).await.map_err(|e| format!("bind {addr}: {e}"))?;
    let local = listener.local_addr().map_err(|e| e.to_string())?;
    let (in_tx, in_rx) = mpsc::unbounded_channel();
    let (out_tx, _) = broadcast::channel::<Arc<String>>(256);
    let (stop_tx, stop_rx) = oneshot::channel();
    let control = tokio::spawn(control_loop(session, in_rx, out_tx.clone(), stop_rx));
    let accept = tokio::spawn(accept_loop(listener, in_tx, out_tx));
    info!("listening on ws://{local}");
    Ok(ServerHandle {
        addr: local,
        stop: stop_tx,
        control,
        accept,
    })
}

pub fn run(args: &ServeArgs) -> Result<(), String> {
    let config = load_config(args.config.as_deref())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let server = start(config, &format!("{}:{}", args.host, args.port)).await?;
        eprintln!("hapbot serving on ws://{}", server.addr);
        tokio::signal::ctrl_c().await.map_err(|e| e.to_string())?;
        server.shutdown().await;
        Ok(())
    })
}

async fn control_loop(
    mut session: Session,
    mut inbound: mpsc::UnboundedReceiver<Inbound>,
    outbound: broadcast::Sender<Arc<String>>,
    mut stop: oneshot::Receiver<()>,
) {
    let dt = session.dt();
    let snapshot_hz = session.config().rates.snapshot_hz;
    let mut interval = tokio::time::interval(Duration::from_secs_f64(dt));
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut clients: HashMap<u64, mpsc::UnboundedSender<String>> = HashMap::new();
    let mut pending: [Option<HandFrame>; 2] = [None, None];
    let mut last_slot: i64 = -1;
    let broadcast_msg = |msg: &ServerMessage| {
        let _ = outbound.send(Arc::new(encode_server(msg)));
    };
    loop {
        tokio::select! {
            _ = &mut stop => break,
            Some(ev) = inbound.recv() => match ev {
                Inbound::Connect { id, reply } => {
                    let _ = reply.send(encode_server(&ServerMessage::Snapshot(session.snapshot())));
                    clients.insert(id, reply);
                }
                Inbound::Disconnect { id } => {
                    clients.remove(&id);
                }
                Inbound::Message { id, msg } => {
                    if let ClientMessage::Hand(frame) = msg {
                        if !frame.t.is_finite() || (frame.tracked && !frame.pos.is_finite()) {
                            reply(&clients, id, "malformed: non-finite hand frame");
                        } else {
                            pending[frame.hand.index()] = Some(frame);
                        }
                        continue;
                    }
                    let reset = matches!(msg, ClientMessage::Reset { .. });
                    let out = session.apply(msg);
                    if reset {
                        pending = [None, None];
                        last_slot = -1;
                    }
                    for r in out.replies {
                        if let Some(tx) = clients.get(&id) {
                            let _ = tx.send(encode_server(&r));
                        }
                    }
                }
            },
            _ = interval.tick() => {
                let now = session.time();
                for slot in &mut pending {
                    if let Some(mut frame) = slot.take() {
                        frame.t = now;
                        if let Err(e) = session.push_frame(frame) {
                            debug!("dropped live frame: {e}");
                        }
                    }
                }
                session.tick();
                for e in session.drain_events() {
                    broadcast_msg(&ServerMessage::Event(e));
                }
                let slot = (session.time() * snapshot_hz + 1e-9).floor() as i64;
                if slot != last_slot {
                    last_slot = slot;
                    broadcast_msg(&ServerMessage::Snapshot(session.snapshot()));
                }
            }
        }
    }
}

fn reply(clients: &HashMap<u64, mpsc::UnboundedSender<String>>, id: u64, reason: &str) {
    if let Some(tx) = clients.get(&id) {
        let _ = tx.send(encode_server(&ServerMessage::Error { reason: reason.into() }));
    }
}

async fn accept_loop(listener: TcpListener, inbound: mpsc::UnboundedSender<Inbound>, outbound: broadcast::Sender<Arc<String>>) {
    let mut next_id = 0u64;
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        next_id += 1;
        debug!("connection {next_id} from {peer}");
        tokio::spawn(connection(stream, next_id, inbound.clone(), outbound.subscribe()));
    }
}

fn error_text(reason: impl ToString) -> Message {
    Message::text(encode_server(&ServerMessage::Error {
        reason: reason.to_string(),
    }))
}

async fn connection(
    stream: TcpStream,
    id: u64,
    inbound: mpsc::UnboundedSender<Inbound>,
    mut outbound: broadcast::Receiver<Arc<String>>,
) {
    let ws_config = WebSocketConfig::default()
        .max_message_size(Some(TRANSPORT_LIMIT))
        .max_frame_size(Some(TRANSPORT_LIMIT));
    let ws = match tokio_tungstenite::accept_async_with_config(stream, Some(ws_config)).await {
        Ok(ws) => ws,
        Err(e) => {
            debug!("handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let (reply_tx, mut replies) = mpsc::unbounded_channel();
    if inbound.send(Inbound::Connect { id, reply: reply_tx }).is_err() {
        return;
    }
    loop {
        tokio::select! {
            incoming = source.next() => {
                let bytes = match incoming {
                    Some(Ok(Message::Text(t))) => t.as_bytes().to_vec(),
                    Some(Ok(Message::Binary(b))) => {
                        if b.len() > MAX_FRAME_BYTES {
                            let _ = sink.send(error_text(ProtocolError::Oversized(b.len()))).await;
                            break;
                        }
                        let _ = sink.send(error_text("malformed: binary frames are not supported")).await;
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | None => break,
                    Some(Ok(_)) => continue,
                    Some(Err(e)) => {
                        debug!("connection {id}: {e}");
                        break;
                    }
                };
                match decode_client(&bytes) {
                    Ok(msg) => {
                        if inbound.send(Inbound::Message { id, msg }).is_err() {
                            break;
                        }
                    }
                    Err(e @ ProtocolError::Oversized(_)) => {
                        let _ = sink.send(error_text(e)).await;
                        break;
                    }
                    Err(e) => {
                        if sink.send(error_text(e)).await.is_err() {
                            break;
                        }
                    }
                }
            }
            Some(text) = replies.recv() => {
                if sink.send(Message::text(text)).await.is_err() {
                    break;
                }
            }
            msg = outbound.recv() => match msg {
                Ok(text) => {
                    if sink.send(Message::text(text.as_str())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => debug!("connection {id} skipped {n} messages"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    let _ = sink.close().await;
    let _ = inbound.send(Inbound::Disconnect { id });
}
