//! Minimal WebSocket client for scripted sessions and the keyboard driver.

use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use crate::protocol::{
    decode_server_message, encode_command, ProtocolError, ServerMessage, TeleopCommand,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("websocket: {0}")]
    Ws(#[from] tokio_tungstenite::tungstenite::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("server refused the connection: {0}")]
    Refused(String),
}

pub struct TeleopClient {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    pub token: String,
}

impl TeleopClient {
    /// Connects to `ws://addr/teleop`, resuming `token` when given, and
    /// waits for the session greeting.
    pub async fn connect(addr: &str, token: Option<&str>) -> Result<Self, ClientError> {
        let url = match token {
            Some(t) => format!("ws://{addr}/teleop?session={t}"),
            None => format!("ws://{addr}/teleop"),
        };
        let (mut ws, _) = tokio_tungstenite::connect_async(url).await?;
        loop {
            match ws.next().await {
                Some(Ok(Message::Text(t))) => match decode_server_message(&t)? {
                    ServerMessage::Session(token) => return Ok(Self { ws, token }),
                    ServerMessage::Err { message, .. } => {
                        return Err(ClientError::Refused(message))
                    }
                    _ => continue,
                },
                Some(Ok(_)) => continue,
                Some(Err(e)) => return Err(e.into()),
                None => return Err(ClientError::Refused("connection closed".into())),
            }
        }
    }

    pub async fn send(&mut self, cmd: &TeleopCommand) -> Result<(), ClientError> {
        self.send_raw(&encode_command(cmd)).await
    }

    pub async fn send_raw(&mut self, text: &str) -> Result<(), ClientError> {
        self.ws.send(Message::Text(text.to_string().into())).await?;
        Ok(())
    }

    /// Next server message; `None` once the server closed the socket.
    pub async fn recv(&mut self) -> Result<Option<ServerMessage>, ClientError> {
        while let Some(m) = self.ws.next().await {
            match m? {
                Message::Text(t) => return Ok(Some(decode_server_message(&t)?)),
                Message::Close(_) => return Ok(None),
                _ => continue,
            }
        }
        Ok(None)
    }

    /// Asks the server to end the session and collects every remaining
    /// message up to and including `CLOSED`.
    pub async fn close(mut self) -> Result<Vec<ServerMessage>, ClientError> {
        self.send_raw("CLOSE").await?;
        let mut out = Vec::new();
        while let Some(m) = self.recv().await? {
            let end = matches!(m, ServerMessage::Closed(_));
            out.push(m);
            if end {
                break;
            }
        }
        Ok(out)
    }

    /// Drops the connection without closing the session.
    pub async fn disconnect(mut self) {
        let _ = self.ws.close(None).await;
    }
}
