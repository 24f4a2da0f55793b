//! Datagram layout.
//!
//! ```text
//! header (18 B): "VHAP" | version u8 | kind u8 | seq u32 LE | timestamp_us u64 LE
//! Pose   (1): position 3×f64, orientation quaternion w,x,y,z 4×f64   (56 B)
//! Wrench (2): force 3×f64, torque 3×f64                              (48 B)
//! Config (3): count u16, then count × [key_len u16, key bytes, f64]
//! Status (4): state u8, measured rate f64 (Hz)                        (9 B)
//! ```
//!
//! All multi-byte values are little-endian; floats are IEEE-754 binary64.

use nalgebra::{Quaternion, UnitQuaternion};

use super::ProtocolError;
use crate::geometry::{RigidPose, Vec3};
use crate::vps::Wrench;

pub const MAGIC: [u8; 4] = *b"VHAP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;
pub const MAX_DATAGRAM: usize = 1400;
pub const POSE_DATAGRAM_LEN: usize = HEADER_LEN + 56;
pub const WRENCH_DATAGRAM_LEN: usize = HEADER_LEN + 48;
pub const STATUS_DATAGRAM_LEN: usize = HEADER_LEN + 9;

/// Allowed deviation of the pose quaternion norm from 1 when encoding.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PacketKind {
    Pose = 1,
    Wrench = 2,
    Config = 3,
    Status = 4,
}

impl PacketKind {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Self::Pose),
            2 => Some(Self::Wrench),
            3 => Some(Self::Config),
            4 => Some(Self::Status),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketHeader {
    pub kind: PacketKind,
    pub seq: u32,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Packet {
    Pose {
        position: [f64; 3],
        /// `w, x, y, z`
        orientation: [f64; 4],
    },
    Wrench {
        force: [f64; 3],
        torque: [f64; 3],
    },
    Config(Vec<(String, f64)>),
    Status {
        state: u8,
        rate_hz: f64,
    },
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Pose { .. } => PacketKind::Pose,
            Packet::Wrench { .. } => PacketKind::Wrench,
            Packet::Config(_) => PacketKind::Config,
            Packet::Status { .. } => PacketKind::Status,
        }
    }

    pub fn from_pose(pose: &RigidPose) -> Self {
        let p = pose.position();
        let q = pose.quaternion();
        Packet::Pose {
            position: [p.x, p.y, p.z],
            orientation: [q.w, q.i, q.j, q.k],
        }
    }

    pub fn from_wrench(w: &Wrench) -> Self {
        Packet::Wrench {
            force: [w.force.x, w.force.y, w.force.z],
            torque: [w.torque.x, w.torque.y, w.torque.z],
        }
    }

    pub fn to_pose(&self) -> Option<RigidPose> {
        match self {
            Packet::Pose {
                position,
                orientation: [w, x, y, z],
            } => {
                let q = UnitQuaternion::from_quaternion(Quaternion::new(*w, *x, *y, *z));
                Some(RigidPose::from_quaternion(Vec3::from(*position), q))
            }
            _ => None,
        }
    }

    /// Wrench with its reference point at the origin.
    pub fn to_wrench(&self) -> Option<Wrench> {
        match self {
            Packet::Wrench { force, torque } => Some(Wrench::new(Vec3::from(*force), Vec3::from(*torque))),
            _ => None,
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + match self {
                Packet::Pose { .. } => 56,
                Packet::Wrench { .. } => 48,
                Packet::Config(entries) => 2 + entries.iter().map(|(k, _)| 2 + k.len() + 8).sum::<usize>(),
                Packet::Status { .. } => 9,
            }
    }
}

pub fn encode(packet: &Packet, seq: u32, timestamp_us: u64) -> Result<Vec<u8>, ProtocolError> {
    let mut out = Vec::with_capacity(packet.encoded_len().min(MAX_DATAGRAM));
    encode_into(&mut out, packet, seq, timestamp_us)?;
    Ok(out)
}

/// Encodes into `out` (cleared first), reusing its allocation.
pub fn encode_into(out: &mut Vec<u8>, packet: &Packet, seq: u32, timestamp_us: u64) -> Result<(), ProtocolError> {
    let len = packet.encoded_len();
    if len > MAX_DATAGRAM {
        return Err(ProtocolError::Oversize { len });
    }
    out.clear();
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(packet.kind() as u8);
    out.extend_from_slice(&seq.to_le_bytes());
    out.extend_from_slice(&timestamp_us.to_le_bytes());
    let put = |out: &mut Vec<u8>, values: &[f64]| {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    match packet {
        Packet::Pose { position, orientation } => {
            let norm = orientation.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !((norm - 1.0).abs() <= QUATERNION_NORM_TOLERANCE) {
                out.clear();
                return Err(ProtocolError::NonUnitQuaternion { norm });
            }
            put(out, position);
            put(out, orientation);
        }
        Packet::Wrench { force, torque } => {
            put(out, force);
            put(out, torque);
        }
        Packet::Config(entries) => {
            // Length already bounded by MAX_DATAGRAM, so counts fit in u16.
            out.extend_from_slice(&(entries.len() as u16).to_le_bytes());
            for (key, value) in entries {
                out.extend_from_slice(&(key.len() as u16).to_le_bytes());
                out.extend_from_slice(key.as_bytes());
                out.extend_from_slice(&value.to_le_bytes());
            }
        }
        Packet::Status { state, rate_hz } => {
            out.push(*state);
            out.extend_from_slice(&rate_hz.to_le_bytes());
        }
    }
    debug_assert_eq!(out.len(), len);
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(ProtocolError::Truncated {
                needed: self.pos + n,
                got: self.buf.len(),
            })?;
        let bytes = &self.buf[self.pos..end];
        self.pos = end;
        Ok(bytes)
    }

    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ProtocolError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s<const N: usize>(&mut self) -> Result<[f64; N], ProtocolError> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.f64()?;
        }
        Ok(out)
    }
}

pub fn decode(bytes: &[u8]) -> Result<(PacketHeader, Packet), ProtocolError> {
    if bytes.len() > MAX_DATAGRAM {
        return Err(ProtocolError::Oversize { len: bytes.len() });
    }
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(ProtocolError::BadMagic(magic));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(ProtocolError::UnknownVersion(version));
    }
    let kind_byte = r.u8()?;
    let kind = PacketKind::from_byte(kind_byte).ok_or(ProtocolError::UnknownKind(kind_byte))?;
    let seq = r.u32()?;
    let timestamp_us = r.u64()?;
    let packet = match kind {
        PacketKind::Pose => Packet::Pose {
            position: r.f64s()?,
            orientation: r.f64s()?,
        },
        PacketKind::Wrench => Packet::Wrench {
            force: r.f64s()?,
            torque: r.f64s()?,
        },
        PacketKind::Config => {
            let count = r.u16()?;
            let mut entries = Vec::with_capacity(count.min(128) as usize);
            for _ in 0..count {
                let len = r.u16()? as usize;
                let key = std::str::from_utf8(r.take(len)?)
                    .map_err(|_| ProtocolError::InvalidKey)?
                    .to_owned();
                entries.push((key, r.f64()?));
            }
            Packet::Config(entries)
        }
        PacketKind::Status => Packet::Status {
            state: r.u8()?,
            rate_hz: r.f64()?,
        },
    };
    if r.pos != bytes.len() {
        return Err(ProtocolError::TrailingBytes {
            expected: r.pos,
            got: bytes.len(),
        });
    }
    Ok((
        PacketHeader {
            kind,
            seq,
            timestamp_us,
        },
        packet,
    ))
}
