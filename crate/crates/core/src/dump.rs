//! Binary field dumps and their JSON sidecars.
//!
//! Layout: magic `MCG1`, `u32` points per axis, `f64` half-width, then the
//! physical cube samples as little-endian `f64` in x-fastest order (all of
//! component 0, then 1, then 2 for vector fields).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GeometrySign, GridSpec, ScalarField, VectorField};

pub const MAGIC: &[u8; 4] = b"MCG1";
pub const HEADER_LEN: usize = 16;

/// Upper bound on points per axis accepted by the decoder.
pub const MAX_POINTS: u32 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Scalar,
    Vector,
}

impl FieldKind {
    pub fn components(self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => 3,
        }
    }
}

/// A decoded dump: physical-cube samples only.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDump {
    pub points: usize,
    pub extent: f64,
    pub kind: FieldKind,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub quantity: String,
    pub sign: Option<GeometrySign>,
    pub kind: FieldKind,
    pub points: usize,
    pub extent: f64,
}

impl FieldMeta {
    pub fn parse(text: &str) -> Result<Self> {
        let meta: FieldMeta = serde_json::from_str(text)?;
        if meta.points == 0 || meta.points > MAX_POINTS as usize {
            return Err(Error::Dump(format!("points {} out of range", meta.points)));
        }
        if !(meta.extent.is_finite() && meta.extent > 0.0) {
            return Err(Error::Dump("extent must be positive".into()));
        }
        Ok(meta)
    }
}

pub fn encode(points: usize, extent: f64, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(points as u32).to_le_bytes());
    out.extend_from_slice(&extent.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<RawDump> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Dump(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let extent = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if n == 0 || n > MAX_POINTS {
        return Err(Error::Dump(format!("points per axis {n} out of range")));
    }
    if !(extent.is_finite() && extent > 0.0) {
        return Err(Error::Dump(format!("extent {extent} is not positive")));
    }
    let cube = (n as usize).pow(3);
    let body = &bytes[HEADER_LEN..];
    if body.len() % 8 != 0 {
        return Err(Error::Dump("payload is not a whole number of f64 values".into()));
    }
    let count = body.len() / 8;
    let kind = if count == cube {
        FieldKind::Scalar
    } else if Some(count) == cube.checked_mul(3) {
        FieldKind::Vector
    } else {
        return Err(Error::Dump(format!("{count} samples fit neither {cube} nor {}", 3 * cube)));
    };
    let mut values = Vec::with_capacity(count);
    for chunk in body.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::Dump(format!("non-finite sample at index {}", values.len())));
        }
        values.push(v);
    }
    Ok(RawDump { points: n as usize, extent, kind, values })
}

fn physical(spec: &GridSpec, data: &[f64]) -> Vec<f64> {
    spec.physical_nodes().iter().map(|&i| data[i]).collect()
}

pub fn encode_scalar(f: &ScalarField) -> Vec<u8> {
    let s = f.spec();
    encode(s.points(), s.extent(), &physical(s, f.values()))
}

pub fn encode_vector(f: &VectorField) -> Vec<u8> {
    let s = f.spec();
    let mut values = Vec::with_capacity(3 * s.points().pow(3));
    for c in 0..3 {
        values.extend(physical(s, f.component(c)));
    }
    encode(s.points(), s.extent(), &values)
}

fn check_grid(raw: &RawDump, spec: &GridSpec, kind: FieldKind) -> Result<()> {
    if raw.kind != kind {
        return Err(Error::Dump(format!("expected a {kind:?} dump, found {:?}", raw.kind)));
    }
    if raw.points != spec.points() || raw.extent != spec.extent() {
        return Err(Error::Dump(format!(
            "dump grid {}^3 on [-{}, {}] does not match {}^3 on [-{}, {}]",
            raw.points,
            raw.extent,
            raw.extent,
            spec.points(),
            spec.extent(),
            spec.extent()
        )));
    }
    Ok(())
}

fn embed(spec: &GridSpec, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; spec.len()];
    for (&i, &v) in spec.physical_nodes().iter().zip(values) {
        out[i] = v;
    }
    out
}

/// Decode a scalar dump onto `spec`, zero outside the physical cube.
pub fn scalar_from_bytes(bytes: &[u8], spec: GridSpec) -> Result<ScalarField> {
    let raw = decode(bytes)?;
    check_grid(&raw, &spec, FieldKind::Scalar)?;
    ScalarField::from_values(spec, embed(&spec, &raw.values))
}

pub fn vector_from_bytes(bytes: &[u8], spec: GridSpec) -> Result<VectorField> {
    let raw = decode(bytes)?;
    check_grid(&raw, &spec, FieldKind::Vector)?;
    let cube = spec.points().pow(3);
    let comps = [0, 1, 2].map(|c| embed(&spec, &raw.values[c * cube..(c + 1) * cube]));
    VectorField::from_components(spec, comps)
}

pub fn read_scalar(path: &Path, spec: GridSpec) -> Result<ScalarField> {
    scalar_from_bytes(&fs::read(path)?, spec)
}

pub fn read_vector(path: &Path, spec: GridSpec) -> Result<VectorField> {
    vector_from_bytes(&fs::read(path)?, spec)
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

fn write_meta(path: &Path, meta: &FieldMeta) -> Result<()> {
    fs::write(sidecar(path), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

pub fn write_scalar(path: &Path, f: &ScalarField, quantity: &str, sign: Option<GeometrySign>) -> Result<()> {
    fs::write(path, encode_scalar(f))?;
    let s = f.spec();
    let meta = FieldMeta {
        quantity: quantity.into(),
        sign,
        kind: FieldKind::Scalar,
        points: s.points(),
        extent: s.extent(),
    };
    write_meta(path, &meta)
}

pub fn write_vector(path: &Path, f: &VectorField, quantity: &str, sign: Option<GeometrySign>) -> Result<()> {
    fs::write(path, encode_vector(f))?;
    let s = f.spec();
    let meta = FieldMeta {
        quantity: quantity.into(),
        sign,
        kind: FieldKind::Vector,
        points: s.points(),
        extent: s.extent(),
    };
    write_meta(path, &meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_scalar, sample_vector};

    fn spec() -> GridSpec {
        GridSpec::new(2.0, 8, 2).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode(8, 2.5, &[1.0; 512]);
        assert_eq!(&bytes[..4], b"MCG1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2.5);
        assert_eq!(bytes.len(), 16 + 8 * 512);
    }

    #[test]
    fn scalar_round_trip() {
        let s = spec();
        let f = sample_scalar(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp(), s).unwrap();
        let g = scalar_from_bytes(&encode_scalar(&f), s).unwrap();
        for i in s.physical_nodes() {
            assert_eq!(f.values()[i].to_bits(), g.values()[i].to_bits());
        }
        assert_eq!(encode_scalar(&g), encode_scalar(&f));
    }

    #[test]
    fn vector_round_trip() {
        let s = spec();
        let f = sample_vector(|x| [x[0], -x[1] * x[2], 0.25], s).unwrap();
        let bytes = encode_vector(&f);
        assert_eq!(decode(&bytes).unwrap().kind, FieldKind::Vector);
        let g = vector_from_bytes(&bytes, s).unwrap();
        assert_eq!(encode_vector(&g), bytes);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(decode(b"MCG1").is_err());
        assert!(decode(&encode(8, 1.0, &[0.0; 100])).is_err());
        assert!(decode(&encode(0, 1.0, &[])).is_err());
        assert!(decode(&encode(2, -1.0, &[0.0; 8])).is_err());
        assert!(decode(&encode(2, 1.0, &[f64::NAN; 8])).is_err());
        let mut bad = encode(2, 1.0, &[0.0; 8]);
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        bad = encode(2, 1.0, &[0.0; 8]);
        bad.push(0);
        assert!(decode(&bad).is_err());
        assert!(decode(&encode(MAX_POINTS as usize + 1, 1.0, &[])).is_err());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let bytes = encode(8, 3.0, &[0.0; 512]);
        assert!(scalar_from_bytes(&bytes, spec()).is_err());
        assert!(vector_from_bytes(&encode(8, 2.0, &[0.0; 512]), spec()).is_err());
    }

    #[test]
    fn meta_parsing() {
        let text = r#"{"quantity":"u","sign":"minkowskian","kind":"scalar","points":8,"extent":2.0}"#;
        let m = FieldMeta::parse(text).unwrap();
        assert_eq!(m.sign, Some(GeometrySign::Minkowskian));
        assert!(FieldMeta::parse(r#"{"quantity":"u"}"#).is_err());
        assert!(FieldMeta::parse(&text.replace("8,", "0,")).is_err());
        assert!(FieldMeta::parse(&text.replace("}", r#","extra":1}"#)).is_err());
    }
}
