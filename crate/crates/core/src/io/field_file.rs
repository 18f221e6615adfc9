//! `FLIMCF1` raster files.
//!
//! ```text
//! offset  size  field
//!      0     8  magic "FLIMCF1\0"
//!      8     4  width           u32 LE
//!     12     4  height          u32 LE
//!     16     4  planes          u32 LE (1 scalar, 2 complex: re then im)
//!     20     4  pixel_pitch_nm  f32 LE
//!     24     4  frequency_mhz   f32 LE
//!     28     -  payload         planes x height x width f32 LE, row-major
//! ```

use std::path::Path;

use super::atomic_write;
use crate::error::{Error, Result};
use crate::field::{ComplexField, Plane};
use crate::phasor::ModulationSpec;

pub const MAGIC: &[u8; 8] = b"FLIMCF1\0";
pub const HEADER_LEN: usize = 28;

/// A single real plane with acquisition metadata (PSFs, intensity images).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub plane: Plane,
    pub pixel_pitch_nm: f64,
    pub modulation: ModulationSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Scalar(ScalarField),
    Complex(ComplexField),
}

impl FieldData {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            FieldData::Scalar(s) => s.plane.dims(),
            FieldData::Complex(c) => (c.width(), c.height()),
        }
    }

    pub fn into_complex(self) -> Result<ComplexField> {
        match self {
            FieldData::Complex(c) => Ok(c),
            FieldData::Scalar(_) => Err(Error::Domain(
                "expected a complex (2-plane) field, found a scalar field".into(),
            )),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            FieldData::Scalar(s) => Ok(s),
            FieldData::Complex(_) => Err(Error::Domain(
                "expected a scalar (1-plane) field, found a complex field".into(),
            )),
        }
    }
}

fn to_f32(v: f64, what: &str) -> Result<f32> {
    let f = v as f32;
    if !f.is_finite() {
        return Err(Error::Domain(format!("{what} value {v} is not representable as f32")));
    }
    Ok(f)
}

pub fn encode_field(data: &FieldData) -> Result<Vec<u8>> {
    let (planes, pitch, modulation): (Vec<&Plane>, f64, ModulationSpec) = match data {
        FieldData::Scalar(s) => (vec![&s.plane], s.pixel_pitch_nm, s.modulation),
        FieldData::Complex(c) => (vec![c.re(), c.im()], c.pixel_pitch_nm, c.modulation),
    };
    let (w, h) = planes[0].dims();
    let dim = |n: usize| u32::try_from(n).map_err(|_| Error::Domain(format!("dimension {n} exceeds u32")));
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * planes.len() * w * h);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&dim(w)?.to_le_bytes());
    out.extend_from_slice(&dim(h)?.to_le_bytes());
    out.extend_from_slice(&(planes.len() as u32).to_le_bytes());
    out.extend_from_slice(&to_f32(pitch, "pixel pitch")?.to_le_bytes());
    out.extend_from_slice(&to_f32(modulation.frequency_mhz(), "frequency")?.to_le_bytes());
    for p in planes {
        for v in p.data() {
            out.extend_from_slice(&to_f32(*v, "payload")?.to_le_bytes());
        }
    }
    Ok(out)
}

fn parse_err<T>(offset: usize, reason: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset: offset as u64,
        reason: reason.into(),
    })
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn f32_at(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode_field(bytes: &[u8]) -> Result<FieldData> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return parse_err(0, "bad magic, expected \"FLIMCF1\\0\"");
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            offset: bytes.len() as u64,
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let width = u32_at(bytes, 8) as usize;
    let height = u32_at(bytes, 12) as usize;
    let planes = u32_at(bytes, 16) as usize;
    let pitch = f32_at(bytes, 20);
    let freq = f32_at(bytes, 24);
    if width == 0 {
        return parse_err(8, "width is zero");
    }
    if height == 0 {
        return parse_err(12, "height is zero");
    }
    if planes != 1 && planes != 2 {
        return parse_err(16, format!("plane count must be 1 or 2, found {planes}"));
    }
    if !(pitch.is_finite() && pitch > 0.0) {
        return parse_err(20, format!("pixel pitch must be positive and finite, found {pitch}"));
    }
    if !(freq.is_finite() && freq > 0.0) {
        return parse_err(24, format!("frequency must be positive and finite, found {freq}"));
    }
    let expected = (4 * planes as u64)
        .checked_mul(width as u64)
        .and_then(|v| v.checked_mul(height as u64))
        .ok_or_else(|| Error::Parse {
            offset: 8,
            reason: "dimensions overflow".into(),
        })?;
    let actual = (bytes.len() - HEADER_LEN) as u64;
    if actual < expected {
        return Err(Error::Truncated {
            offset: HEADER_LEN as u64,
            expected,
            actual,
        });
    }
    if actual > expected {
        return parse_err(
            HEADER_LEN + expected as usize,
            format!("{} trailing bytes after payload", actual - expected),
        );
    }
    let modulation = ModulationSpec::new(freq as f64)?;
    let n = width * height;
    let read_plane = |index: usize| -> Result<Plane> {
        let start = HEADER_LEN + 4 * n * index;
        let mut data = Vec::with_capacity(n);
        for j in 0..n {
            let at = start + 4 * j;
            let v = f32_at(bytes, at);
            if !v.is_finite() {
                return parse_err(at, format!("non-finite payload value {v}"));
            }
            data.push(v as f64);
        }
        Plane::new(width, height, data)
    };
    if planes == 1 {
        Ok(FieldData::Scalar(ScalarField {
            plane: read_plane(0)?,
            pixel_pitch_nm: pitch as f64,
            modulation,
        }))
    } else {
        let re = read_plane(0)?;
        let im = read_plane(1)?;
        Ok(FieldData::Complex(ComplexField::new(re, im, pitch as f64, modulation)?))
    }
}

pub fn read_field(path: &Path) -> Result<FieldData> {
    decode_field(&std::fs::read(path)?)
}

pub fn write_field(path: &Path, data: &FieldData) -> Result<()> {
    atomic_write(path, &encode_field(data)?)
}
