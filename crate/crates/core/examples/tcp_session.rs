//! Start the server on ephemeral ports and drive one attach session over TCP
//! with the built-in client.
//!
//! ```text
//! cargo run --example tcp_session
//! ```

use teleswap::protocol::{ChannelConfig, Frame, PoseCommand, Server, ServerConfig, TcpClient};
use teleswap::scene::PoseDelta;
use teleswap::{SimConfig, Task};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let cfg = ServerConfig {
        tcp_addr: "127.0.0.1:0".parse().unwrap(),
        ws_addr: Some("127.0.0.1:0".parse().unwrap()),
        channel: ChannelConfig::with_latency(20.0, 5.0, 3),
        sim: SimConfig::default(),
        log_path: None,
    };
    let server = Server::bind(cfg).await?;
    let tcp = server.tcp_addr();
    println!("tcp {tcp}, websocket ws://{}/session", server.ws_addr().unwrap());
    tokio::spawn(server.run());

    let (mut client, hello) = TcpClient::connect(tcp, Task::Attach, 1).await?;
    println!("session {} at dt {:?} s", hello.session_id.unwrap_or_default(), hello.dt_s);
    let mut last = 0;
    for _ in 0..20 {
        let cmd = PoseCommand { delta: PoseDelta { x: 5.0, ..Default::default() }, ..PoseCommand::zero(0) };
        last = client.send_command(cmd).await?;
    }
    while let Some(frame) = client.next_frame().await? {
        if let Ok(Frame::State(s)) = frame {
            if s.seq == last {
                println!("seq {} phase {:?} tip x {:.1} mm", s.seq, s.phase, s.arm_tip.x);
                break;
            }
        }
    }
    client.finish().await
}
