//! Keyboard control emitting the same command stream as the web client.
//!
//! Arrows and e/d translate (UP +X, DOWN -X, LEFT +Y, RIGHT -Y, e +Z,
//! d -Z); q/w, a/s and z/x roll, pitch and yaw the held attitude by a fixed
//! increment; g toggles the gripper.

use metasim::math::{quat_from_rpy, Quat};

use crate::protocol::TeleopCommand;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Key {
    Up,
    Down,
    Left,
    Right,
    Char(char),
}

/// Decodes raw terminal input: ANSI arrow escapes and plain characters.
pub fn keys_from_bytes(bytes: &[u8]) -> Vec<Key> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == 0x1b && i + 2 < bytes.len() && (bytes[i + 1] == b'[' || bytes[i + 1] == b'O')
        {
            let k = match bytes[i + 2] {
                b'A' => Some(Key::Up),
                b'B' => Some(Key::Down),
                b'C' => Some(Key::Right),
                b'D' => Some(Key::Left),
                _ => None,
            };
            out.extend(k);
            i += 3;
            continue;
        }
        let c = bytes[i] as char;
        if c.is_ascii_graphic() {
            out.push(Key::Char(c));
        }
        i += 1;
    }
    out
}

/// Turns sets of pressed keys into commands with increasing seq.
#[derive(Clone, Debug)]
pub struct KeyboardDriver {
    seq: u64,
    /// Rotation per press, radians.
    pub rot_step: f64,
    attitude: Quat,
    rotated: bool,
}

impl KeyboardDriver {
    /// `attitude` is the end-effector orientation the increments start from.
    pub fn new(attitude: Quat) -> Self {
        Self {
            seq: 0,
            rot_step: 0.05,
            attitude,
            rotated: false,
        }
    }

    pub fn attitude(&self) -> &Quat {
        &self.attitude
    }

    /// Command for the keys held during one tick. Keys outside the layout
    /// are ignored. Orientation is sent once any rotation key has been used.
    pub fn command(&mut self, keys: &[Key], t_ms: u64) -> TeleopCommand {
        self.seq += 1;
        let mut t = [0.0; 3];
        let (mut roll, mut pitch, mut yaw) = (0.0, 0.0, 0.0);
        let mut toggle = false;
        for k in keys {
            match k {
                Key::Up => t[0] += 1.0,
                Key::Down => t[0] -= 1.0,
                Key::Left => t[1] += 1.0,
                Key::Right => t[1] -= 1.0,
                Key::Char('e') => t[2] += 1.0,
                Key::Char('d') => t[2] -= 1.0,
                Key::Char('q') => roll += self.rot_step,
                Key::Char('w') => roll -= self.rot_step,
                Key::Char('a') => pitch += self.rot_step,
                Key::Char('s') => pitch -= self.rot_step,
                Key::Char('z') => yaw += self.rot_step,
                Key::Char('x') => yaw -= self.rot_step,
                Key::Char('g') => toggle = !toggle,
                Key::Char(_) => {}
            }
        }
        let t = t.map(|v: f64| v.clamp(-1.0, 1.0));
        if roll != 0.0 || pitch != 0.0 || yaw != 0.0 {
            // Increments are about world axes.
            self.attitude = quat_from_rpy(roll, pitch, yaw) * self.attitude;
            self.rotated = true;
        }
        let mut c = TeleopCommand::new(self.seq, t_ms, t);
        if self.rotated {
            c = c.with_orientation(&self.attitude);
        }
        c.gripper_toggle = toggle;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let mut d = KeyboardDriver::new(Quat::identity());
        let c = |d: &mut KeyboardDriver, k: &[Key]| d.command(k, 0).translate;
        assert_eq!(c(&mut d, &[Key::Up]), [1.0, 0.0, 0.0]);
        assert_eq!(c(&mut d, &[Key::Down]), [-1.0, 0.0, 0.0]);
        assert_eq!(c(&mut d, &[Key::Left]), [0.0, 1.0, 0.0]);
        assert_eq!(c(&mut d, &[Key::Right]), [0.0, -1.0, 0.0]);
        assert_eq!(c(&mut d, &[Key::Char('e')]), [0.0, 0.0, 1.0]);
        assert_eq!(c(&mut d, &[Key::Char('d')]), [0.0, 0.0, -1.0]);
        assert_eq!(c(&mut d, &[Key::Up, Key::Char('e')]), [1.0, 0.0, 1.0]);
        assert_eq!(c(&mut d, &[Key::Up, Key::Down]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn rotation_keys_compose_and_cancel() {
        let mut d = KeyboardDriver::new(Quat::identity());
        let a = d.command(&[], 0);
        assert!(!a.orientation_enabled);
        let b = d.command(&[Key::Char('z')], 20);
        assert!(b.orientation_enabled);
        let (_, _, yaw) = metasim::math::quat_to_rpy(&b.quat().unwrap());
        assert!((yaw - 0.05).abs() < 1e-12);
        let c = d.command(&[Key::Char('x')], 40);
        assert!(metasim::math::geodesic_angle(&c.quat().unwrap(), &Quat::identity()) < 1e-12);
        assert!(c.seq > b.seq && b.seq > a.seq);
    }

    #[test]
    fn terminal_bytes() {
        assert_eq!(
            keys_from_bytes(b"\x1b[A\x1b[Dge\n"),
            vec![Key::Up, Key::Left, Key::Char('g'), Key::Char('e')]
        );
    }
}
