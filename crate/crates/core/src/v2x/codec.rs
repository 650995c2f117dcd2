//! Bit-exact little-endian wire format for the two message kinds.
//!
//! Common header (110 B):
//!
//! | field    | type       | bytes |
//! |----------|------------|-------|
//! | magic    | `[u8; 4]`  | 4     |
//! | version  | `u8`       | 1     |
//! | agent_id | `u8`       | 1     |
//! | t_i      | `f64`      | 8     |
//! | pose     | `12 x f64` | 96    |
//!
//! The pose is the row-major 3x4 matrix `[R | t]`.
//!
//! Detection messages (`"V2XD"`) continue with `span: f32`, `count: u16`
//! and `count` entries of 45 B each:
//! `x, y, z, w, l, h, yaw, score: f32`, `class: u8`, `flow: 3 x f32`.
//!
//! Early messages (`"V2XE"`) continue with `count: u32` and `count` points of
//! 20 B each: `x, y, z, intensity, time_lag: f32`.
//!
//! Single-precision fields are rounded on encode, so a message round-trips
//! exactly when those fields already hold `f32`-representable values.

use thiserror::Error;

use crate::geometry::{BoundingBox, LidarPoint, Pose, Vec3};
use crate::v2x::message::{DetectionEntry, DetectionMessage, EarlyMessage};

pub const DETECTION_MAGIC: [u8; 4] = *b"V2XD";
pub const EARLY_MAGIC: [u8; 4] = *b"V2XE";
pub const VERSION: u8 = 1;

/// Magic, version, agent id, timestamp and pose.
pub const COMMON_HEADER_BYTES: usize = 4 + 1 + 1 + 8 + 12 * 8;
pub const DETECTION_HEADER_BYTES: usize = COMMON_HEADER_BYTES + 4 + 2;
pub const DETECTION_ENTRY_BYTES: usize = 8 * 4 + 1 + 3 * 4;
pub const EARLY_HEADER_BYTES: usize = COMMON_HEADER_BYTES + 4;
pub const EARLY_POINT_BYTES: usize = 5 * 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("too many entries for the count field: {count} > {max}")]
    TooManyEntries { count: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("truncated: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
}

/// Encoded size of a detection message with `entries` boxes.
pub const fn detection_size(entries: usize) -> usize {
    DETECTION_HEADER_BYTES + entries * DETECTION_ENTRY_BYTES
}

/// Encoded size of an early message with `points` points.
pub const fn early_size(points: usize) -> usize {
    EARLY_HEADER_BYTES + points * EARLY_POINT_BYTES
}

fn put_f32(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&(v as f32).to_le_bytes());
}

fn put_header(buf: &mut Vec<u8>, magic: [u8; 4], agent_id: u8, t_i: f64, pose: &Pose) {
    buf.extend_from_slice(&magic);
    buf.push(VERSION);
    buf.push(agent_id);
    buf.extend_from_slice(&t_i.to_le_bytes());
    for row in 0..3 {
        for col in 0..3 {
            buf.extend_from_slice(&pose.rotation[(row, col)].to_le_bytes());
        }
        buf.extend_from_slice(&pose.translation[row].to_le_bytes());
    }
}

pub fn encode_detection(msg: &DetectionMessage) -> Result<Vec<u8>, EncodeError> {
    let count = msg.entries.len();
    if count > u16::MAX as usize {
        return Err(EncodeError::TooManyEntries {
            count,
            max: u16::MAX as usize,
        });
    }
    let mut buf = Vec::with_capacity(detection_size(count));
    put_header(&mut buf, DETECTION_MAGIC, msg.agent_id, msg.t_i, &msg.pose);
    put_f32(&mut buf, msg.span);
    buf.extend_from_slice(&(count as u16).to_le_bytes());
    for e in &msg.entries {
        let b = &e.bbox;
        for v in [
            b.center.x, b.center.y, b.center.z, b.size.x, b.size.y, b.size.z, b.yaw, b.score,
        ] {
            put_f32(&mut buf, v);
        }
        buf.push(b.class_id);
        for v in e.flow.iter() {
            put_f32(&mut buf, *v);
        }
    }
    debug_assert_eq!(buf.len(), detection_size(count));
    Ok(buf)
}

pub fn encode_early(msg: &EarlyMessage) -> Result<Vec<u8>, EncodeError> {
    let count = msg.points.len();
    if count > u32::MAX as usize {
        return Err(EncodeError::TooManyEntries {
            count,
            max: u32::MAX as usize,
        });
    }
    let mut buf = Vec::with_capacity(early_size(count));
    put_header(&mut buf, EARLY_MAGIC, msg.agent_id, msg.t_i, &msg.pose);
    buf.extend_from_slice(&(count as u32).to_le_bytes());
    for p in &msg.points {
        for v in [p.position.x, p.position.y, p.position.z, p.intensity, p.time_lag] {
            put_f32(&mut buf, v);
        }
    }
    debug_assert_eq!(buf.len(), early_size(count));
    Ok(buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let available = self.buf.len() - self.pos;
        if available < n {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f64, DecodeError> {
        Ok(f32::from_le_bytes(self.array()?) as f64)
    }

    fn finish(self) -> Result<(), DecodeError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            extra => Err(DecodeError::TrailingBytes(extra)),
        }
    }

    fn header(&mut self, magic: [u8; 4]) -> Result<(u8, f64, Pose), DecodeError> {
        let found = self.array::<4>()?;
        if found != magic {
            return Err(DecodeError::BadMagic { found });
        }
        let version = self.u8()?;
        if version != VERSION {
            return Err(DecodeError::BadVersion(version));
        }
        let agent_id = self.u8()?;
        let t_i = self.f64()?;
        let mut pose = Pose::identity();
        for row in 0..3 {
            for col in 0..3 {
                pose.rotation[(row, col)] = self.f64()?;
            }
            pose.translation[row] = self.f64()?;
        }
        Ok((agent_id, t_i, pose))
    }
}

pub fn decode_detection(bytes: &[u8]) -> Result<DetectionMessage, DecodeError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let (agent_id, t_i, pose) = r.header(DETECTION_MAGIC)?;
    let span = r.f32()?;
    let count = u16::from_le_bytes(r.array()?) as usize;
    let mut entries = Vec::with_capacity(count.min(bytes.len() / DETECTION_ENTRY_BYTES));
    for _ in 0..count {
        let mut v = [0.0; 8];
        for slot in &mut v {
            *slot = r.f32()?;
        }
        let class_id = r.u8()?;
        let flow = Vec3::new(r.f32()?, r.f32()?, r.f32()?);
        entries.push(DetectionEntry {
            bbox: BoundingBox {
                center: Vec3::new(v[0], v[1], v[2]),
                size: Vec3::new(v[3], v[4], v[5]),
                yaw: v[6],
                score: v[7],
                class_id,
            },
            flow,
        });
    }
    r.finish()?;
    Ok(DetectionMessage {
        agent_id,
        t_i,
        pose,
        span,
        entries,
    })
}

pub fn decode_early(bytes: &[u8]) -> Result<EarlyMessage, DecodeError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let (agent_id, t_i, pose) = r.header(EARLY_MAGIC)?;
    let count = u32::from_le_bytes(r.array()?) as usize;
    let mut points = Vec::with_capacity(count.min(bytes.len() / EARLY_POINT_BYTES));
    for _ in 0..count {
        let position = Vec3::new(r.f32()?, r.f32()?, r.f32()?);
        let intensity = r.f32()?;
        let time_lag = r.f32()?;
        points.push(LidarPoint {
            position,
            intensity,
            time_lag,
        });
    }
    r.finish()?;
    Ok(EarlyMessage {
        agent_id,
        t_i,
        pose,
        points,
    })
}

/// Classic 16-bytes-per-row hex dump with an ASCII gutter.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::new();
    for (row, chunk) in bytes.chunks(16).enumerate() {
        let hex: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
        let ascii: String = chunk
            .iter()
            .map(|b| if b.is_ascii_graphic() { *b as char } else { '.' })
            .collect();
        out.push_str(&format!("{:08x}  {:<47}  |{}|\n", row * 16, hex.join(" "), ascii));
    }
    out
}
