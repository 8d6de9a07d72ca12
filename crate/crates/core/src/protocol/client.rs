use std::net::SocketAddr;

use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;

use super::codec::{decode_line, encode, FrameError};
use super::{Frame, Hello, PoseCommand};
use crate::fsm::Task;

/// Minimal master-side TCP client: handshake, numbered commands, frame reads.
pub struct TcpClient {
    reader: BufReader<OwnedReadHalf>,
    writer: OwnedWriteHalf,
    session_id: String,
    next_seq: u64,
}

impl TcpClient {
    /// Connect and complete the hello handshake. Returns the client and the
    /// server's hello reply.
    pub async fn connect(addr: SocketAddr, task: Task, seed: u64) -> std::io::Result<(Self, Hello)> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        let (rd, writer) = stream.into_split();
        let mut client = TcpClient { reader: BufReader::new(rd), writer, session_id: String::new(), next_seq: 1 };
        client.send(&Frame::Hello(Hello { task, seed, session_id: None, dt_s: None })).await?;
        loop {
            match client.next_frame().await? {
                Some(Ok(Frame::Hello(h))) => {
                    client.session_id = h.session_id.clone().unwrap_or_default();
                    return Ok((client, h));
                }
                Some(Ok(Frame::Err(e))) => {
                    return Err(std::io::Error::other(format!("{}: {}", e.code, e.message)));
                }
                Some(_) => continue,
                None => return Err(std::io::ErrorKind::UnexpectedEof.into()),
            }
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub async fn send(&mut self, frame: &Frame) -> std::io::Result<()> {
        let bytes = encode(frame).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
        self.writer.write_all(&bytes).await
    }

    /// Stamp `cmd` with this session's token and the next sequence number, then send it.
    pub async fn send_command(&mut self, mut cmd: PoseCommand) -> std::io::Result<u64> {
        cmd.seq = self.next_seq;
        cmd.session_id = self.session_id.clone();
        self.send(&Frame::Cmd(cmd)).await?;
        self.next_seq += 1;
        Ok(self.next_seq - 1)
    }

    /// Next frame from the server, or `None` once the connection is closed.
    pub async fn next_frame(&mut self) -> std::io::Result<Option<Result<Frame, FrameError>>> {
        let mut line = String::new();
        loop {
            line.clear();
            if self.reader.read_line(&mut line).await? == 0 {
                return Ok(None);
            }
            let trimmed = line.trim_end_matches(['\n', '\r']);
            if !trimmed.trim().is_empty() {
                return Ok(Some(decode_line(trimmed)));
            }
        }
    }

    /// Half-close the write side; the server flushes a final update and closes.
    pub async fn finish(&mut self) -> std::io::Result<()> {
        self.writer.shutdown().await
    }
}
