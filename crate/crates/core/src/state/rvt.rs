//! RVT1 binary trajectory container. Layout is documented in `docs/rvt1.md`.

use std::collections::BTreeMap;

use super::{Action, EntityState, EnvState, StateError, Trajectory};
use crate::math::{quat_to_wxyz, quat_wxyz, Vec3};

const MAGIC: &[u8; 4] = b"RVT1";
pub const RVT_MAJOR: u16 = 1;
pub const RVT_MINOR: u16 = 0;

const SEC_HEADER: u8 = 1;
const SEC_INIT: u8 = 2;
const SEC_ACTIONS: u8 = 3;
const SEC_STATES: u8 = 4;

const HAS_POS: u8 = 1 << 0;
const HAS_ROT: u8 = 1 << 1;
const HAS_LIN_VEL: u8 = 1 << 2;
const HAS_ANG_VEL: u8 = 1 << 3;
const HAS_DOF_POS: u8 = 1 << 4;
const HAS_DOF_VEL: u8 = 1 << 5;
const HAS_DOF_TARGET: u8 = 1 << 6;

pub fn serialize_trajectory(t: &Trajectory) -> Result<Vec<u8>, StateError> {
    t.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&RVT_MAJOR.to_le_bytes());
    out.extend_from_slice(&RVT_MINOR.to_le_bytes());

    let mut w = Writer::default();
    w.str(&t.scenario_name);
    w.u8(match t.success {
        None => 0,
        Some(false) => 1,
        Some(true) => 2,
    });
    w.u32(t.extras.len());
    for (k, v) in &t.extras {
        w.str(k);
        w.str(v);
    }
    section(&mut out, SEC_HEADER, w.0);

    let mut w = Writer::default();
    w.env(&t.init_state);
    section(&mut out, SEC_INIT, w.0);

    let mut w = Writer::default();
    w.u32(t.actions.len());
    for a in &t.actions {
        w.u32(a.targets.len());
        for (robot, q) in &a.targets {
            w.str(robot);
            w.f64s(q);
        }
    }
    section(&mut out, SEC_ACTIONS, w.0);

    if let Some(states) = &t.states {
        let mut w = Writer::default();
        w.u32(states.len());
        for s in states {
            w.env(s);
        }
        section(&mut out, SEC_STATES, w.0);
    }

    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn section(out: &mut Vec<u8>, tag: u8, payload: Vec<u8>) {
    out.push(tag);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
}

pub fn deserialize_trajectory(bytes: &[u8]) -> Result<Trajectory, StateError> {
    if bytes.len() < 8 {
        return if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            Err(StateError::BadMagic)
        } else {
            Err(StateError::TruncatedStream("missing preamble".into()))
        };
    }
    if &bytes[..4] != MAGIC {
        return Err(StateError::BadMagic);
    }
    let major = u16::from_le_bytes([bytes[4], bytes[5]]);
    let minor = u16::from_le_bytes([bytes[6], bytes[7]]);
    if major != RVT_MAJOR {
        return Err(StateError::VersionMismatch { major, minor });
    }
    if bytes.len() < 12 {
        return Err(StateError::TruncatedStream("missing checksum".into()));
    }
    let body_end = bytes.len() - 4;

    let mut header = None;
    let mut init = None;
    let mut actions = None;
    let mut states = None;
    let mut pos = 8;
    while pos < body_end {
        if body_end - pos < 5 {
            return Err(StateError::TruncatedStream(format!(
                "section header at byte {pos}"
            )));
        }
        let tag = bytes[pos];
        let len = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().unwrap()) as usize;
        pos += 5;
        if len > body_end - pos {
            return Err(StateError::TruncatedStream(format!(
                "section {tag} declares {len} bytes, {} remain",
                body_end - pos
            )));
        }
        let payload = &bytes[pos..pos + len];
        pos += len;
        let mut r = Reader {
            buf: payload,
            pos: 0,
        };
        match tag {
            SEC_HEADER => {
                let name = r.str()?;
                let success = match r.u8()? {
                    0 => None,
                    1 => Some(false),
                    2 => Some(true),
                    x => return Err(StateError::InvalidTrajectory(format!("success flag {x}"))),
                };
                let n = r.u32()?;
                let mut extras = BTreeMap::new();
                for _ in 0..n {
                    let k = r.str()?;
                    extras.insert(k, r.str()?);
                }
                header = Some((name, success, extras));
            }
            SEC_INIT => init = Some(r.env()?),
            SEC_ACTIONS => {
                let n = r.u32()?;
                let mut v = Vec::with_capacity(n.min(1 << 16));
                for _ in 0..n {
                    let m = r.u32()?;
                    let mut targets = BTreeMap::new();
                    for _ in 0..m {
                        let robot = r.str()?;
                        targets.insert(robot, r.f64s()?);
                    }
                    v.push(Action { targets });
                }
                actions = Some(v);
            }
            SEC_STATES => {
                let n = r.u32()?;
                let mut v = Vec::with_capacity(n.min(1 << 16));
                for _ in 0..n {
                    v.push(r.env()?);
                }
                states = Some(v);
            }
            // Sections added by later minor versions are skipped.
            _ => continue,
        }
        if r.pos != payload.len() {
            return Err(StateError::TruncatedStream(format!(
                "section {tag} has {} unread bytes",
                payload.len() - r.pos
            )));
        }
    }

    let stored = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(StateError::ChecksumFailure { stored, computed });
    }

    let missing = |s: &str| StateError::TruncatedStream(format!("missing {s} section"));
    let (scenario_name, success, extras) = header.ok_or_else(|| missing("header"))?;
    let t = Trajectory {
        scenario_name,
        init_state: init.ok_or_else(|| missing("init_state"))?,
        actions: actions.ok_or_else(|| missing("actions"))?,
        states,
        success,
        extras,
    };
    t.validate()?;
    Ok(t)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("count fits in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn vec3(&mut self, v: &Vec3) {
        for x in v.iter() {
            self.f64(*x);
        }
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u32(v.len());
        for x in v {
            self.f64(*x);
        }
    }
    fn env(&mut self, env: &EnvState) {
        self.u32(env.len());
        for (name, e) in env {
            self.str(name);
            let mut mask = 0;
            for (bit, has) in [
                (HAS_POS, e.pos.is_some()),
                (HAS_ROT, e.rot.is_some()),
                (HAS_LIN_VEL, e.lin_vel.is_some()),
                (HAS_ANG_VEL, e.ang_vel.is_some()),
                (HAS_DOF_POS, e.dof_pos.is_some()),
                (HAS_DOF_VEL, e.dof_vel.is_some()),
                (HAS_DOF_TARGET, e.dof_target.is_some()),
            ] {
                if has {
                    mask |= bit;
                }
            }
            self.u8(mask);
            if let Some(v) = &e.pos {
                self.vec3(v);
            }
            if let Some(q) = &e.rot {
                for x in quat_to_wxyz(q) {
                    self.f64(x);
                }
            }
            if let Some(v) = &e.lin_vel {
                self.vec3(v);
            }
            if let Some(v) = &e.ang_vel {
                self.vec3(v);
            }
            for v in [&e.dof_pos, &e.dof_vel, &e.dof_target]
                .into_iter()
                .flatten()
            {
                self.f64s(v);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], StateError> {
        if self.buf.len() - self.pos < n {
            return Err(StateError::TruncatedStream(format!(
                "needed {n} bytes at offset {} of a {}-byte section",
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, StateError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize, StateError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn f64(&mut self) -> Result<f64, StateError> {
        Ok(f64::from_bits(u64::from_le_bytes(
            self.take(8)?.try_into().unwrap(),
        )))
    }
    fn str(&mut self) -> Result<String, StateError> {
        let n = self.u32()?;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec())
            .map_err(|_| StateError::InvalidTrajectory("string is not UTF-8".into()))
    }
    fn vec3(&mut self) -> Result<Vec3, StateError> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn f64s(&mut self) -> Result<Vec<f64>, StateError> {
        let n = self.u32()?;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(StateError::TruncatedStream(format!(
                "vector of {n} floats overruns section"
            )));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn env(&mut self) -> Result<EnvState, StateError> {
        let n = self.u32()?;
        let mut env = EnvState::new();
        for _ in 0..n {
            let name = self.str()?;
            let mask = self.u8()?;
            if mask & 0x80 != 0 {
                return Err(StateError::InvalidTrajectory(format!(
                    "unknown field bits {mask:#04x}"
                )));
            }
            let mut e = EntityState::default();
            if mask & HAS_POS != 0 {
                e.pos = Some(self.vec3()?);
            }
            if mask & HAS_ROT != 0 {
                let (w, x, y, z) = (self.f64()?, self.f64()?, self.f64()?, self.f64()?);
                e.rot = Some(quat_wxyz(w, x, y, z));
            }
            if mask & HAS_LIN_VEL != 0 {
                e.lin_vel = Some(self.vec3()?);
            }
            if mask & HAS_ANG_VEL != 0 {
                e.ang_vel = Some(self.vec3()?);
            }
            if mask & HAS_DOF_POS != 0 {
                e.dof_pos = Some(self.f64s()?);
            }
            if mask & HAS_DOF_VEL != 0 {
                e.dof_vel = Some(self.f64s()?);
            }
            if mask & HAS_DOF_TARGET != 0 {
                e.dof_target = Some(self.f64s()?);
            }
            if env.insert(name.clone(), e).is_some() {
                return Err(StateError::InvalidTrajectory(format!(
                    "entity `{name}` repeated"
                )));
            }
        }
        Ok(env)
    }
}
