//! Line-oriented text frames exchanged over the `/teleop` WebSocket.
//!
//! Client to server: `CMD <seq> <t_ms> <tx> <ty> <tz> <oriflag> <qw> <qx> <qy> <qz> <grip>`
//! plus `CLOSE`. Server to client: a `STATE <seq_echo> <t_ms>` line followed
//! by `E` (entity pose) and `D` (robot joint) lines; `SESSION <token>` on
//! connect, `ERR` and `WARN` lines for rejected frames and IK fallbacks.

use metasim::math::{quat_normalized, quat_to_wxyz, Pose, Quat, Vec3};
use metasim::state::EnvState;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("seq {seq} is not after {last}")]
    DuplicateOrStale { seq: u64, last: u64 },
    #[error("orientation is not a unit quaternion (norm {0})")]
    NonUnitQuaternion(f64),
}

/// One operator command. `translate` holds per-axis intents; on the wire
/// each is -1, 0 or +1, coalesced commands may carry sums.
#[derive(Clone, Debug, PartialEq)]
pub struct TeleopCommand {
    pub seq: u64,
    pub t_ms: u64,
    pub translate: [f64; 3],
    pub orientation_enabled: bool,
    /// (w, x, y, z) as sent; meaningful only when enabled.
    pub orientation: [f64; 4],
    pub gripper_toggle: bool,
}

impl TeleopCommand {
    pub fn new(seq: u64, t_ms: u64, translate: [f64; 3]) -> Self {
        Self {
            seq,
            t_ms,
            translate,
            orientation_enabled: false,
            orientation: [1.0, 0.0, 0.0, 0.0],
            gripper_toggle: false,
        }
    }

    pub fn with_orientation(mut self, q: &Quat) -> Self {
        self.orientation_enabled = true;
        self.orientation = quat_to_wxyz(q);
        self
    }

    pub fn with_toggle(mut self) -> Self {
        self.gripper_toggle = true;
        self
    }

    pub fn quat(&self) -> Option<Quat> {
        let [w, x, y, z] = self.orientation;
        quat_normalized(w, x, y, z)
    }
}

/// Strictly increasing sequence filter.
#[derive(Clone, Debug, Default)]
pub struct SeqGate {
    last: Option<u64>,
}

impl SeqGate {
    pub fn admit(&mut self, seq: u64) -> Result<(), ProtocolError> {
        if let Some(last) = self.last {
            if seq <= last {
                return Err(ProtocolError::DuplicateOrStale { seq, last });
            }
        }
        self.last = Some(seq);
        Ok(())
    }

    pub fn last(&self) -> Option<u64> {
        self.last
    }
}

/// Client frames.
#[derive(Clone, Debug, PartialEq)]
pub enum ClientFrame {
    Cmd(TeleopCommand),
    Close,
}

fn field<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T, ProtocolError> {
    let t = tok.ok_or_else(|| ProtocolError::Malformed(format!("missing {what}")))?;
    t.parse()
        .map_err(|_| ProtocolError::Malformed(format!("bad {what} `{t}`")))
}

fn flag(tok: Option<&str>, what: &str) -> Result<bool, ProtocolError> {
    match tok {
        Some("0") => Ok(false),
        Some("1") => Ok(true),
        Some(t) => Err(ProtocolError::Malformed(format!(
            "{what} must be 0 or 1, got `{t}`"
        ))),
        None => Err(ProtocolError::Malformed(format!("missing {what}"))),
    }
}

pub fn decode_frame(text: &str) -> Result<ClientFrame, ProtocolError> {
    let text = text.trim();
    if text == "CLOSE" {
        return Ok(ClientFrame::Close);
    }
    decode_command(text).map(ClientFrame::Cmd)
}

pub fn decode_command(text: &str) -> Result<TeleopCommand, ProtocolError> {
    let mut it = text.split_ascii_whitespace();
    if it.next() != Some("CMD") {
        return Err(ProtocolError::Malformed("expected CMD".into()));
    }
    let seq = field(it.next(), "seq")?;
    let t_ms = field(it.next(), "t_ms")?;
    let mut translate = [0.0; 3];
    for (axis, t) in translate.iter_mut().enumerate() {
        let v: i8 = field(it.next(), "translate")?;
        if !(-1..=1).contains(&v) {
            return Err(ProtocolError::Malformed(format!(
                "translate[{axis}] = {v} outside -1..1"
            )));
        }
        *t = v as f64;
    }
    let orientation_enabled = flag(it.next(), "oriflag")?;
    let mut orientation = [0.0; 4];
    for q in &mut orientation {
        *q = field::<f64>(it.next(), "quaternion")?;
        if !q.is_finite() {
            return Err(ProtocolError::Malformed("non-finite quaternion".into()));
        }
    }
    let gripper_toggle = flag(it.next(), "grip")?;
    if it.next().is_some() {
        return Err(ProtocolError::Malformed("trailing fields".into()));
    }
    if orientation_enabled {
        let n = orientation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-3 {
            return Err(ProtocolError::NonUnitQuaternion(n));
        }
    }
    Ok(TeleopCommand {
        seq,
        t_ms,
        translate,
        orientation_enabled,
        orientation,
        gripper_toggle,
    })
}

/// Wire form of a command. Intents are clamped to -1..1.
pub fn encode_command(c: &TeleopCommand) -> String {
    let t = c.translate.map(|v| v.clamp(-1.0, 1.0).round() as i8);
    let [w, x, y, z] = c.orientation;
    format!(
        "CMD {} {} {} {} {} {} {w} {x} {y} {z} {}",
        c.seq, c.t_ms, t[0], t[1], t[2], c.orientation_enabled as u8, c.gripper_toggle as u8
    )
}

/// `STATE` frame: every entity's pose, then the joint positions of each
/// listed robot.
pub fn encode_state(state: &EnvState, seq_echo: u64, t_ms: u64, robots: &[String]) -> String {
    use std::fmt::Write;
    let mut s = format!("STATE {seq_echo} {t_ms}\n");
    for (name, e) in state {
        if let (Some(p), Some(r)) = (e.pos, e.rot) {
            let [w, x, y, z] = quat_to_wxyz(&r);
            let _ = writeln!(s, "E {name} {} {} {} {w} {x} {y} {z}", p.x, p.y, p.z);
        }
    }
    for r in robots {
        if let Some(q) = state.get(r).and_then(|e| e.dof_pos.as_ref()) {
            let _ = write!(s, "D {r}");
            for v in q {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
    }
    s
}

/// Parsed `STATE` frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateFrame {
    pub seq_echo: u64,
    pub t_ms: u64,
    pub entities: Vec<(String, Pose)>,
    pub dofs: Vec<(String, Vec<f64>)>,
}

pub fn decode_state(text: &str) -> Result<StateFrame, ProtocolError> {
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    let mut it = head.split_ascii_whitespace();
    if it.next() != Some("STATE") {
        return Err(ProtocolError::Malformed("expected STATE".into()));
    }
    let mut out = StateFrame {
        seq_echo: field(it.next(), "seq")?,
        t_ms: field(it.next(), "t_ms")?,
        ..Default::default()
    };
    for line in lines {
        let mut it = line.split_ascii_whitespace();
        match it.next() {
            Some("E") => {
                let name: String = field(it.next(), "name")?;
                let v: Vec<f64> = it
                    .map(|t| field(Some(t), "number"))
                    .collect::<Result<_, _>>()?;
                if v.len() != 7 {
                    return Err(ProtocolError::Malformed(format!(
                        "E line for {name} has {} numbers",
                        v.len()
                    )));
                }
                let rot = quat_normalized(v[3], v[4], v[5], v[6])
                    .ok_or(ProtocolError::NonUnitQuaternion(0.0))?;
                out.entities
                    .push((name, Pose::new(Vec3::new(v[0], v[1], v[2]), rot)));
            }
            Some("D") => {
                let name: String = field(it.next(), "name")?;
                let q = it
                    .map(|t| field(Some(t), "number"))
                    .collect::<Result<_, _>>()?;
                out.dofs.push((name, q));
            }
            None => {}
            Some(other) => return Err(ProtocolError::Malformed(format!("unknown line `{other}`"))),
        }
    }
    Ok(out)
}

/// Any frame the server sends.
#[derive(Clone, Debug, PartialEq)]
pub enum ServerMessage {
    Session(String),
    State(StateFrame),
    Err {
        seq: Option<u64>,
        message: String,
    },
    Warn {
        seq: u64,
        message: String,
    },
    /// Session finished after applying this many commands.
    Closed(usize),
}

pub fn encode_error(seq: Option<u64>, message: &str) -> String {
    match seq {
        Some(s) => format!("ERR {s} {message}"),
        None => format!("ERR - {message}"),
    }
}

pub fn decode_server_message(text: &str) -> Result<ServerMessage, ProtocolError> {
    let (head, rest) = text.split_once(' ').unwrap_or((text, ""));
    let head = head.trim();
    match head {
        "STATE" => decode_state(text).map(ServerMessage::State),
        "SESSION" => Ok(ServerMessage::Session(rest.trim().to_string())),
        "CLOSED" => field(Some(rest.trim()), "count").map(ServerMessage::Closed),
        "ERR" | "WARN" => {
            let (seq, message) = rest.split_once(' ').unwrap_or((rest, ""));
            let message = message.to_string();
            if head == "WARN" {
                Ok(ServerMessage::Warn {
                    seq: field(Some(seq), "seq")?,
                    message,
                })
            } else {
                let seq = if seq == "-" {
                    None
                } else {
                    Some(field(Some(seq), "seq")?)
                };
                Ok(ServerMessage::Err { seq, message })
            }
        }
        other => Err(ProtocolError::Malformed(format!(
            "unknown server frame `{other}`"
        ))),
    }
}
