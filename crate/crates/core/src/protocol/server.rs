use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use log::{debug, info, warn};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, Mutex};
use tokio::time::{Instant, MissedTickBehavior};
use tokio_tungstenite::tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tokio_tungstenite::tungstenite::http::StatusCode;
use tokio_tungstenite::tungstenite::Message;

use super::codec::{decode_line, encode_line, FrameDecoder, FrameError};
use super::{ChannelConfig, ErrorFrame, Frame, Hello, SessionLink, StateUpdate};
use crate::config::SimConfig;
use crate::metrics::{append_log, TrialRecord};
use crate::session::Session;

pub const DEFAULT_TCP_PORT: u16 = 7431;
pub const DEFAULT_WS_PORT: u16 = 7432;
pub const WS_PATH: &str = "/session";

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub tcp_addr: SocketAddr,
    /// WebSocket bridge; `None` disables it.
    pub ws_addr: Option<SocketAddr>,
    pub channel: ChannelConfig,
    pub sim: SimConfig,
    /// Append one trial record per finished session.
    pub log_path: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            tcp_addr: SocketAddr::from(([127, 0, 0, 1], DEFAULT_TCP_PORT)),
            ws_addr: Some(SocketAddr::from(([127, 0, 0, 1], DEFAULT_WS_PORT))),
            channel: ChannelConfig::default(),
            sim: SimConfig::default(),
            log_path: None,
        }
    }
}

struct Shared {
    cfg: ServerConfig,
    log_lock: Mutex<()>,
}

pub struct Server {
    tcp: TcpListener,
    ws: Option<TcpListener>,
    shared: Arc<Shared>,
}

/// Bind both listeners and serve until the process exits.
pub async fn serve(cfg: ServerConfig) -> std::io::Result<()> {
    Server::bind(cfg).await?.run().await
}

impl Server {
    pub async fn bind(cfg: ServerConfig) -> std::io::Result<Self> {
        cfg.channel
            .validate()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
        let tcp = TcpListener::bind(cfg.tcp_addr).await?;
        let ws = match cfg.ws_addr {
            Some(addr) => Some(TcpListener::bind(addr).await?),
            None => None,
        };
        Ok(Server { tcp, ws, shared: Arc::new(Shared { cfg, log_lock: Mutex::new(()) }) })
    }

    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp.local_addr().expect("bound listener")
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws.as_ref().map(|l| l.local_addr().expect("bound listener"))
    }

    pub async fn run(self) -> std::io::Result<()> {
        info!("teleop server on tcp {} ws {:?}", self.tcp_addr(), self.ws_addr());
        let Server { tcp, ws, shared } = self;
        if let Some(ws) = ws {
            let shared = shared.clone();
            tokio::spawn(async move {
                loop {
                    match ws.accept().await {
                        Ok((stream, peer)) => {
                            tokio::spawn(handle_ws(stream, peer, shared.clone()));
                        }
                        Err(e) => warn!("ws accept: {e}"),
                    }
                }
            });
        }
        loop {
            let (stream, peer) = tcp.accept().await?;
            tokio::spawn(handle_tcp(stream, peer, shared.clone()));
        }
    }
}

type Inbound = Result<Frame, FrameError>;

async fn handle_tcp(stream: TcpStream, peer: SocketAddr, shared: Arc<Shared>) {
    let _ = stream.set_nodelay(true);
    let (mut rd, mut wr) = stream.into_split();
    let (in_tx, in_rx) = mpsc::unbounded_channel();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();

    let reader = tokio::spawn(async move {
        let mut dec = FrameDecoder::new();
        let mut buf = vec![0u8; 8192];
        loop {
            match rd.read(&mut buf).await {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    for f in dec.push(&buf[..n]) {
                        if in_tx.send(f).is_err() {
                            return;
                        }
                    }
                }
            }
        }
    });
    let writer = tokio::spawn(async move {
        while let Some(mut line) = out_rx.recv().await {
            line.push('\n');
            if wr.write_all(line.as_bytes()).await.is_err() {
                break;
            }
        }
        let _ = wr.shutdown().await;
    });

    debug!("tcp session from {peer}");
    run_session(in_rx, out_tx, &shared).await;
    let _ = writer.await;
    reader.abort();
}

async fn handle_ws(stream: TcpStream, peer: SocketAddr, shared: Arc<Shared>) {
    let _ = stream.set_nodelay(true);
    let check_path = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        if req.uri().path() == WS_PATH {
            Ok(resp)
        } else {
            let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
            *err.status_mut() = StatusCode::NOT_FOUND;
            Err(err)
        }
    };
    let ws = match tokio_tungstenite::accept_hdr_async(stream, check_path).await {
        Ok(ws) => ws,
        Err(e) => {
            debug!("ws handshake from {peer} failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let (in_tx, in_rx) = mpsc::unbounded_channel();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();

    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = source.next().await {
            let text = match msg {
                Message::Text(t) => t.to_string(),
                Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
                Message::Close(_) => break,
                _ => continue,
            };
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                if in_tx.send(decode_line(line)).is_err() {
                    return;
                }
            }
        }
    });
    let writer = tokio::spawn(async move {
        while let Some(line) = out_rx.recv().await {
            if sink.send(Message::text(line)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    debug!("ws session from {peer}");
    run_session(in_rx, out_tx, &shared).await;
    let _ = writer.await;
    reader.abort();
}

fn send(out: &mpsc::UnboundedSender<String>, frame: Frame) {
    match encode_line(&frame) {
        Ok(line) => {
            let _ = out.send(line);
        }
        Err(e) => warn!("dropping unencodable frame: {e}"),
    }
}

fn send_err(out: &mpsc::UnboundedSender<String>, code: &str, message: impl Into<String>) {
    send(out, Frame::Err(ErrorFrame::new(code, message)));
}

fn send_states(out: &mpsc::UnboundedSender<String>, states: Vec<StateUpdate>) {
    for s in states {
        send(out, Frame::State(s));
    }
}

/// One logical loop per session: handshake, then commands in, one step per
/// tick, state updates out. Returns when the peer disconnects or violates
/// the protocol.
async fn run_session(
    mut inbound: mpsc::UnboundedReceiver<Inbound>,
    out: mpsc::UnboundedSender<String>,
    shared: &Shared,
) {
    let hello = loop {
        match inbound.recv().await {
            None => return,
            Some(Ok(Frame::Hello(h))) => break h,
            Some(Ok(_)) => {
                send_err(&out, "expected_hello", "first frame must be hello");
                return;
            }
            Some(Err(e)) => send_err(&out, "malformed", e.to_string()),
        }
    };

    let sim = &shared.cfg.sim;
    let session = match Session::new(sim, hello.task) {
        Ok(s) => s,
        Err(e) => {
            send_err(&out, "session_setup", e.to_string());
            return;
        }
    };
    let session_id = uuid::Uuid::new_v4().simple().to_string();
    let channel = ChannelConfig { seed: shared.cfg.channel.seed ^ hello.seed, ..shared.cfg.channel };
    let mut link = SessionLink::new(session, channel);
    send(
        &out,
        Frame::Hello(Hello {
            task: hello.task,
            seed: hello.seed,
            session_id: Some(session_id.clone()),
            dt_s: Some(sim.scene.dt_s),
        }),
    );
    send(&out, Frame::State(link.session().snapshot()));
    info!("session {session_id} started: task {} seed {}", hello.task, hello.seed);

    let start = Instant::now();
    let now_ms = || start.elapsed().as_secs_f64() * 1000.0;
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(sim.scene.dt_s));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut expected_seq = 1u64;

    loop {
        tokio::select! {
            msg = inbound.recv() => match msg {
                None => break,
                Some(Err(e)) => send_err(&out, "malformed", e.to_string()),
                Some(Ok(Frame::Cmd(cmd))) => {
                    if cmd.session_id != session_id {
                        send_err(&out, "bad_session", format!("unknown session token `{}`", cmd.session_id));
                        break;
                    }
                    if cmd.seq != expected_seq {
                        send_err(&out, "seq_gap", format!("expected seq {expected_seq}, got {}", cmd.seq));
                        break;
                    }
                    if !cmd.is_finite() {
                        send_err(&out, "bad_command", "non-finite command field");
                        break;
                    }
                    expected_seq += 1;
                    link.submit(now_ms(), cmd);
                }
                Some(Ok(_)) => {
                    send_err(&out, "unexpected_frame", "only cmd frames are accepted after hello");
                    break;
                }
            },
            _ = ticker.tick() => {
                let now = now_ms();
                if let Err(e) = link.tick(now) {
                    send_err(&out, "bad_command", e.to_string());
                    break;
                }
                send_states(&out, link.drain_ready(now));
            }
        }
    }

    // teardown: everything in flight plus one final snapshot
    send_states(&out, link.drain_all());
    send(&out, Frame::State(link.session().snapshot()));
    drop(out);

    let session = link.into_session();
    info!("session {session_id} closed at tick {}", session.scene().tick);
    if let Some(path) = &shared.cfg.log_path {
        let mut record = TrialRecord::from_session(&session, 1, "remote", hello.seed);
        record.session_id = Some(session_id);
        let _guard = shared.log_lock.lock().await;
        if let Err(e) = append_log(path, &record) {
            warn!("writing session log: {e}");
        }
    }
}
