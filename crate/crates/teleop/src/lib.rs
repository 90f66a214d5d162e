//! Teleoperation for metasim environments: the text command protocol, a
//! rate-limited session that turns end-effector intents into joint actions,
//! a WebSocket server that records sessions as RVT1 trajectories, and a
//! keyboard driver.

pub mod client;
pub mod keyboard;
pub mod protocol;
pub mod server;
pub mod session;

pub use client::{ClientError, TeleopClient};
pub use keyboard::{keys_from_bytes, Key, KeyboardDriver};
pub use protocol::{
    decode_command, decode_frame, decode_server_message, decode_state, encode_command,
    encode_state, ClientFrame, ProtocolError, SeqGate, ServerMessage, StateFrame, TeleopCommand,
};
pub use server::{bind, resolve_port, serve, ServerError, ServerOptions, DEFAULT_PORT, PORT_ENV};
pub use session::{
    Applied, CommandQueue, SessionError, SessionOptions, SessionState, TeleopSession, MAX_RATE,
};
