//! Binary snapshot of a sketch state.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "TWMS" | version u32 | scalar bits u8 | n u64 | k u32 | dim u32
//! scheme tag u8 | scheme parameter f64 | seed u64 | t_now f64 | t_prev f64
//! events applied u64 | node limit u64 (0 = none)
//! H^(0..k): hop-major, each n x dim row-major, as f64
//! CAWN only: degree n x f64, degree stamp n x f64
//! CRC-64/XZ of everything above, u64
//! ```
//!
//! `f32` values widen to `f64` exactly, so a restore reproduces the state
//! bitwise.

use crc::{Crc, CRC_64_XZ};

use crate::rng::GaussianFeatures;
use crate::scalar::Real;
use crate::scheme::ScoreScheme;

use super::{SketchError, SketchState};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"TWMS";
pub const SNAPSHOT_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 1 + 8 + 4 + 4 + 1 + 8 + 8 + 8 + 8 + 8 + 8;
const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], SketchError> {
        let end = self.pos + N;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| corrupt("truncated"))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice has length N"))
    }

    fn u8(&mut self) -> Result<u8, SketchError> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, SketchError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64, SketchError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, SketchError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

fn corrupt(msg: &str) -> SketchError {
    SketchError::CorruptSnapshot(msg.to_string())
}

impl<T: Real> SketchState<T> {
    pub fn snapshot(&self) -> Vec<u8> {
        let (n, block, d) = (self.capacity, self.block_len(), self.dim);
        let cawn = self.scheme.is_cawn();
        let body = (self.k + 1) * n * d + if cawn { 2 * n } else { 0 };
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * body + 8);
        out.extend_from_slice(&SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.push(T::BITS);
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(d as u32).to_le_bytes());
        out.push(self.scheme.tag());
        out.extend_from_slice(&self.scheme.parameter().to_le_bytes());
        out.extend_from_slice(&self.features.seed().to_le_bytes());
        out.extend_from_slice(&self.t_now.to_le_bytes());
        out.extend_from_slice(&self.t_prev.to_le_bytes());
        out.extend_from_slice(&self.events_applied.to_le_bytes());
        out.extend_from_slice(&(self.max_nodes.unwrap_or(0) as u64).to_le_bytes());
        for hop in 0..=self.k {
            for node in 0..n {
                for x in &self.data[node * block + hop * d..][..d] {
                    out.extend_from_slice(&x.as_f64().to_le_bytes());
                }
            }
        }
        if cawn {
            for x in &self.degree {
                out.extend_from_slice(&x.as_f64().to_le_bytes());
            }
            for x in &self.degree_stamp {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = CHECKSUM.checksum(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn restore(bytes: &[u8]) -> Result<Self, SketchError> {
        if bytes.len() < HEADER_LEN + 8 {
            return Err(corrupt("shorter than the header"));
        }
        if bytes[..4] != SNAPSHOT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(SketchError::VersionMismatch { found: version, expected: SNAPSHOT_VERSION });
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if CHECKSUM.checksum(payload) != stored {
            return Err(corrupt("checksum mismatch"));
        }

        let bits = r.u8()?;
        if bits != T::BITS {
            return Err(SketchError::ScalarMismatch { found: bits, expected: T::BITS });
        }
        let n = usize::try_from(r.u64()?).map_err(|_| corrupt("node count"))?;
        let k = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let tag = r.u8()?;
        let parameter = r.f64()?;
        let scheme = ScoreScheme::from_tag(tag, parameter).ok_or_else(|| corrupt("unknown scheme"))?;
        scheme.validate().map_err(|e| SketchError::CorruptSnapshot(e.0))?;
        let seed = r.u64()?;
        let t_now = r.f64()?;
        let t_prev = r.f64()?;
        let events_applied = r.u64()?;
        let max_nodes = match r.u64()? {
            0 => None,
            m => Some(usize::try_from(m).map_err(|_| corrupt("node limit"))?),
        };
        if k == 0 || dim == 0 {
            return Err(corrupt("zero k or dim"));
        }
        let cawn = scheme.is_cawn();
        let values = (k + 1)
            .checked_mul(n)
            .and_then(|x| x.checked_mul(dim))
            .and_then(|x| x.checked_add(if cawn { 2 * n } else { 0 }))
            .ok_or_else(|| corrupt("dimensions overflow"))?;
        if payload.len() != HEADER_LEN + 8 * values {
            return Err(corrupt("length does not match header"));
        }

        let block = (k + 1) * dim;
        let mut data = Vec::with_capacity(n * block);
        super::advise_huge_pages(&mut data);
        data.resize(n * block, T::zero());
        for hop in 0..=k {
            for node in 0..n {
                for x in &mut data[node * block + hop * dim..][..dim] {
                    *x = T::lit(r.f64()?);
                }
            }
        }
        let (mut degree, mut degree_stamp) = (Vec::new(), Vec::new());
        if cawn {
            degree.reserve_exact(n);
            degree_stamp.reserve_exact(n);
            for _ in 0..n {
                degree.push(T::lit(r.f64()?));
            }
            for _ in 0..n {
                degree_stamp.push(r.f64()?);
            }
        }
        Ok(Self {
            k,
            dim,
            scheme,
            features: GaussianFeatures::new(seed),
            capacity: n,
            max_nodes,
            data,
            t_now,
            t_prev,
            events_applied,
            degree,
            degree_stamp,
        })
    }
}
