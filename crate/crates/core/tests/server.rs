use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;

use teleswap::fsm::{ExchangePhase, Task};
use teleswap::metrics::read_log;
use teleswap::protocol::{
    encode_line, ChannelConfig, Frame, Hello, PoseCommand, Server, ServerConfig, StateUpdate, TcpClient,
};
use teleswap::scene::PoseDelta;
use teleswap::SimConfig;

async fn start(channel: ChannelConfig, log_path: Option<PathBuf>) -> (SocketAddr, SocketAddr) {
    let cfg = ServerConfig {
        tcp_addr: "127.0.0.1:0".parse().unwrap(),
        ws_addr: Some("127.0.0.1:0".parse().unwrap()),
        channel,
        sim: SimConfig::default(),
        log_path,
    };
    let server = Server::bind(cfg).await.unwrap();
    let addrs = (server.tcp_addr(), server.ws_addr().unwrap());
    tokio::spawn(server.run());
    addrs
}

async fn state_with_seq(client: &mut TcpClient, seq: u64) -> StateUpdate {
    loop {
        match client.next_frame().await.unwrap() {
            Some(Ok(Frame::State(s))) if s.seq >= seq => return s,
            Some(Ok(Frame::Err(e))) => panic!("server error {}: {}", e.code, e.message),
            Some(_) => continue,
            None => panic!("connection closed before seq {seq}"),
        }
    }
}

async fn error_code(client: &mut TcpClient) -> String {
    loop {
        match client.next_frame().await.unwrap() {
            Some(Ok(Frame::Err(e))) => return e.code,
            Some(_) => continue,
            None => panic!("closed without an error frame"),
        }
    }
}

fn timeout<F: std::future::Future>(f: F) -> tokio::time::Timeout<F> {
    tokio::time::timeout(Duration::from_secs(10), f)
}

#[tokio::test]
async fn zero_delta_command_echoes_unchanged_pose() {
    let (tcp, _) = start(ChannelConfig::default(), None).await;
    let (mut c, hello) = TcpClient::connect(tcp, Task::Attach, 1).await.unwrap();
    assert!(hello.session_id.is_some());
    assert_eq!(hello.dt_s, Some(0.01));
    let home = SimConfig::default().scene.home;
    let seq = c.send_command(PoseCommand::zero(0)).await.unwrap();
    let s = timeout(state_with_seq(&mut c, seq)).await.unwrap();
    assert_eq!(s.seq, 1);
    assert_eq!(s.arm_tip, home);
    assert_eq!(s.phase, ExchangePhase::AttachIdle);
    assert!(s.events_since_last.iter().all(|e| e.kind != teleswap::fsm::EventKind::ClockStarted));
}

#[tokio::test]
async fn movement_is_applied_in_order() {
    let (tcp, _) = start(ChannelConfig::default(), None).await;
    let (mut c, _) = TcpClient::connect(tcp, Task::Attach, 2).await.unwrap();
    for _ in 0..5 {
        let cmd = PoseCommand { delta: PoseDelta { x: 2.0, ..Default::default() }, ..PoseCommand::zero(0) };
        c.send_command(cmd).await.unwrap();
    }
    let s = timeout(state_with_seq(&mut c, 5)).await.unwrap();
    assert_eq!(s.seq, 5);
    assert!((s.arm_tip.x - (-400.0 + 10.0)).abs() < 1e-9);
    assert_eq!(s.phase, ExchangePhase::Aligning);
}

#[tokio::test]
async fn sequence_gap_is_rejected() {
    let (tcp, _) = start(ChannelConfig::default(), None).await;
    let (mut c, hello) = TcpClient::connect(tcp, Task::Attach, 3).await.unwrap();
    let cmd = PoseCommand { seq: 2, session_id: hello.session_id.unwrap(), ..PoseCommand::zero(2) };
    c.send(&Frame::Cmd(cmd)).await.unwrap();
    assert_eq!(timeout(error_code(&mut c)).await.unwrap(), "seq_gap");
}

#[tokio::test]
async fn foreign_session_token_is_rejected() {
    let (tcp, _) = start(ChannelConfig::default(), None).await;
    let (mut c, _) = TcpClient::connect(tcp, Task::Attach, 4).await.unwrap();
    let cmd = PoseCommand { seq: 1, session_id: "not-mine".into(), ..PoseCommand::zero(1) };
    c.send(&Frame::Cmd(cmd)).await.unwrap();
    assert_eq!(timeout(error_code(&mut c)).await.unwrap(), "bad_session");
}

#[tokio::test]
async fn first_frame_must_be_hello() {
    let (tcp, _) = start(ChannelConfig::default(), None).await;
    let mut stream = TcpStream::connect(tcp).await.unwrap();
    let line = encode_line(&Frame::Cmd(PoseCommand::zero(1))).unwrap();
    stream.write_all(format!("{line}\n").as_bytes()).await.unwrap();
    let mut reader = BufReader::new(stream);
    let mut reply = String::new();
    timeout(reader.read_line(&mut reply)).await.unwrap().unwrap();
    assert!(reply.contains("\"type\":\"err\""), "{reply}");
    assert!(reply.contains("expected_hello"), "{reply}");
}

#[tokio::test]
async fn concurrent_sessions_are_isolated() {
    let (tcp, _) = start(ChannelConfig::default(), None).await;
    let (mut a, ha) = TcpClient::connect(tcp, Task::Attach, 5).await.unwrap();
    let (mut b, hb) = TcpClient::connect(tcp, Task::Detach, 6).await.unwrap();
    assert_ne!(ha.session_id, hb.session_id);
    for _ in 0..3 {
        let cmd = PoseCommand { delta: PoseDelta { y: 1.0, ..Default::default() }, ..PoseCommand::zero(0) };
        a.send_command(cmd).await.unwrap();
    }
    b.send_command(PoseCommand::zero(0)).await.unwrap();
    let sa = timeout(state_with_seq(&mut a, 3)).await.unwrap();
    let sb = timeout(state_with_seq(&mut b, 1)).await.unwrap();
    assert!((sa.arm_tip.y - 3.0).abs() < 1e-9);
    assert_eq!(sb.arm_tip.y, 0.0);
    assert_eq!(sa.task, Task::Attach);
    assert_eq!(sb.task, Task::Detach);
    assert_eq!(sb.phase, ExchangePhase::Carrying);
}

#[tokio::test]
async fn injected_latency_delays_the_round_trip() {
    let (tcp, _) = start(ChannelConfig::with_latency(50.0, 0.0, 0), None).await;
    let (mut c, _) = TcpClient::connect(tcp, Task::Attach, 7).await.unwrap();
    let sent = Instant::now();
    let seq = c.send_command(PoseCommand::zero(0)).await.unwrap();
    timeout(state_with_seq(&mut c, seq)).await.unwrap();
    let rtt = sent.elapsed();
    // wall-clock scheduling adds slack on top of the two injected legs
    assert!(rtt >= Duration::from_millis(95), "{rtt:?}");
    assert!(rtt < Duration::from_millis(250), "{rtt:?}");
}

#[tokio::test]
async fn finished_session_is_logged() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("sessions.jsonl");
    let (tcp, _) = start(ChannelConfig::default(), Some(log.clone())).await;
    let (mut c, hello) = TcpClient::connect(tcp, Task::Attach, 8).await.unwrap();
    let cmd = PoseCommand { delta: PoseDelta { x: 1.0, ..Default::default() }, ..PoseCommand::zero(0) };
    let seq = c.send_command(cmd).await.unwrap();
    timeout(state_with_seq(&mut c, seq)).await.unwrap();
    c.finish().await.unwrap();
    while timeout(c.next_frame()).await.unwrap().unwrap().is_some() {}
    // the record is appended right after the socket closes
    let deadline = Instant::now() + Duration::from_secs(5);
    let contents = loop {
        if let Ok(l) = read_log(&log) {
            if !l.records.is_empty() {
                break l;
            }
        }
        assert!(Instant::now() < deadline, "no log record");
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    assert!(contents.errors.is_empty());
    let r = &contents.records[0];
    assert_eq!(r.session_id, hello.session_id);
    assert_eq!(r.task, Task::Attach);
    assert_eq!(r.seed, 8);
}

#[tokio::test]
async fn websocket_bridge_speaks_the_same_frames() {
    let (_, ws) = start(ChannelConfig::default(), None).await;
    let (mut sock, _) = tokio_tungstenite::connect_async(format!("ws://{ws}/session")).await.unwrap();
    let hello = Frame::Hello(Hello { task: Task::FullCycle, seed: 9, session_id: None, dt_s: None });
    sock.send(Message::text(encode_line(&hello).unwrap())).await.unwrap();
    let mut session_id = None;
    let mut got_state = false;
    while session_id.is_none() || !got_state {
        let msg = timeout(sock.next()).await.unwrap().unwrap().unwrap();
        let text = msg.into_text().unwrap();
        match teleswap::protocol::decode_line(text.as_str()).unwrap() {
            Frame::Hello(h) => session_id = h.session_id,
            Frame::State(s) => {
                assert_eq!(s.task, Task::FullCycle);
                got_state = true;
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    let cmd = PoseCommand { seq: 1, session_id: session_id.unwrap(), ..PoseCommand::zero(1) };
    sock.send(Message::text(encode_line(&Frame::Cmd(cmd)).unwrap())).await.unwrap();
    loop {
        let text = timeout(sock.next()).await.unwrap().unwrap().unwrap().into_text().unwrap();
        if let Frame::State(s) = teleswap::protocol::decode_line(text.as_str()).unwrap() {
            if s.seq == 1 {
                break;
            }
        }
    }
}

#[tokio::test]
async fn websocket_other_paths_are_refused() {
    let (_, ws) = start(ChannelConfig::default(), None).await;
    assert!(tokio_tungstenite::connect_async(format!("ws://{ws}/elsewhere")).await.is_err());
}
