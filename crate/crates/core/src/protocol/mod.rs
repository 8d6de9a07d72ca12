//! Master-slave teleoperation channel: JSON-lines frames over TCP or
//! WebSocket, with seeded latency injection in both directions.

mod client;
mod codec;
mod latency;
mod link;
mod message;
mod server;

pub use client::TcpClient;
pub use codec::{decode, decode_line, encode, encode_line, EncodeError, FrameDecoder, FrameError};
pub use latency::{inject_latency, ChannelConfig, ChannelConfigError, Delivery, LatencyInjector};
pub use link::SessionLink;
pub use message::{ErrorFrame, Frame, Hello, PoseCommand, StateUpdate};
pub use server::{serve, Server, ServerConfig, DEFAULT_TCP_PORT, DEFAULT_WS_PORT, WS_PATH};
