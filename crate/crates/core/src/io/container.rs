//! Single-file array container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "MRFCSARR"
//! 8       4     format version (u32, currently 1)
//! 12      8     header length in bytes (u64)
//! 20      H     UTF-8 JSON header
//! 20+H    P     payload, row-major
//! ```
//!
//! The header carries `dtype` (`"f32"` or `"c64"`, the latter stored as
//! interleaved real/imaginary `f32`), `shape`, `endianness` (always
//! `"little"`), `role`, `units`, `digest` (`"sha256:<hex>"` of the
//! payload) and a free-form `manifest` object.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MRFCSARR";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    C64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::C64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayHeader {
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub endianness: String,
    pub role: String,
    pub units: String,
    pub digest: String,
    pub manifest: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(ArrayD<f32>),
    C64(ArrayD<Complex32>),
}

impl ArrayData {
    pub fn from_real<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> Self {
        ArrayData::F32(a.mapv(|v| v as f32).into_dyn())
    }

    pub fn from_complex<D: ndarray::Dimension>(a: &ndarray::Array<Complex64, D>) -> Self {
        ArrayData::C64(a.mapv(|v| Complex32::new(v.re as f32, v.im as f32)).into_dyn())
    }

    pub fn dtype(&self) -> DType {
        match self {
            ArrayData::F32(_) => DType::F32,
            ArrayData::C64(_) => DType::C64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            ArrayData::F32(a) => a.shape(),
            ArrayData::C64(a) => a.shape(),
        }
    }

    pub fn to_real(&self) -> Result<ArrayD<f64>> {
        match self {
            ArrayData::F32(a) => Ok(a.mapv(f64::from)),
            ArrayData::C64(_) => Err(Error::Format("expected real (f32) data, found c64".into())),
        }
    }

    pub fn to_complex(&self) -> Result<ArrayD<Complex64>> {
        match self {
            ArrayData::C64(a) => Ok(a.mapv(|v| Complex64::new(v.re.into(), v.im.into()))),
            ArrayData::F32(_) => Err(Error::Format("expected complex (c64) data, found f32".into())),
        }
    }

    /// Row-major little-endian payload bytes.
    pub fn payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.shape().iter().product::<usize>() * self.dtype().size());
        match self {
            ArrayData::F32(a) => a.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            ArrayData::C64(a) => a.iter().for_each(|v| {
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }),
        }
        out
    }

    fn from_payload(dtype: DType, shape: &[usize], bytes: &[u8]) -> Result<Self> {
        let f = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")));
        let shape = IxDyn(shape);
        let bad = |e: ndarray::ShapeError| Error::Format(e.to_string());
        Ok(match dtype {
            DType::F32 => ArrayData::F32(ArrayD::from_shape_vec(shape, f.collect()).map_err(bad)?),
            DType::C64 => {
                let v: Vec<f32> = f.collect();
                let c = v.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect();
                ArrayData::C64(ArrayD::from_shape_vec(shape, c).map_err(bad)?)
            }
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: ArrayHeader,
    pub data: ArrayData,
}

impl Container {
    pub fn new(data: ArrayData, role: &str, units: &str, manifest: serde_json::Value) -> Self {
        let header = ArrayHeader {
            dtype: data.dtype(),
            shape: data.shape().to_vec(),
            endianness: "little".into(),
            role: role.into(),
            units: units.into(),
            digest: format!("sha256:{}", sha256_hex(&data.payload())),
            manifest,
        };
        Container { header, data }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let payload = self.data.payload();
        let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::Format(m.to_string());
        if bytes.len() < PREAMBLE || &bytes[..8] != MAGIC {
            return Err(fmt("missing magic bytes"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[PREAMBLE..];
        if hlen > body.len() {
            return Err(fmt("header length exceeds file size"));
        }
        let header: ArrayHeader = serde_json::from_slice(&body[..hlen])?;
        if header.endianness != "little" {
            return Err(Error::Format(format!("unsupported endianness '{}'", header.endianness)));
        }
        let payload = &body[hlen..];
        let expected = header
            .shape
            .iter()
            .try_fold(header.dtype.size(), |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| fmt("shape overflows"))?;
        if payload.len() != expected {
            return Err(Error::Format(format!("payload is {} bytes, shape implies {expected}", payload.len())));
        }
        let digest = format!("sha256:{}", sha256_hex(payload));
        if digest != header.digest {
            return Err(Error::Format(format!("digest mismatch: header {}, payload {digest}", header.digest)));
        }
        let data = ArrayData::from_payload(header.dtype, &header.shape, payload)?;
        Ok(Container { header, data })
    }

    /// Writes to a temporary file beside `path`, then renames it into place.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| with_path(e, path))?;
        Container::from_bytes(&bytes)
    }

    /// The manifest entry `key`, deserialized.
    pub fn manifest_field<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self.header.manifest.get(key).ok_or_else(|| Error::Format(format!("manifest has no '{key}' entry")))?;
        Ok(serde_json::from_value(v.clone())?)
    }

    pub fn expect_role(&self, role: &str) -> Result<()> {
        if self.header.role == role {
            Ok(())
        } else {
            Err(Error::Format(format!("expected a '{role}' container, found '{}'", self.header.role)))
        }
    }
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| with_path(e, dir))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(with_path(e, path));
    }
    Ok(())
}
