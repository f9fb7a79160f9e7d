//! TensorFile: one line of JSON header `{"dtype":"f32le","shape":[..],"name":..}`
//! terminated by `\n`, then the row-major payload as little-endian `f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io, CliError, Result};

pub const DTYPE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorHeader {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(CliError::Data {
                path: name.clone().into(),
                msg: format!(
                    "shape {shape:?} holds {expected} values, got {}",
                    data.len()
                ),
            });
        }
        Ok(Self { name, shape, data })
    }

    /// Rows of a matrix built from equally long `f64` rows, narrowed to `f32`.
    pub fn from_rows(name: &str, rows: &[&[f64]]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(CliError::data(name, "rows differ in length"));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| v as f32))
            .collect();
        Self::new(name, vec![rows.len(), width], data)
    }

    /// Rows widened back to `f64`; requires a 2-d shape.
    pub fn rows(&self) -> Result<Vec<Vec<f64>>> {
        let [n, width] = self.shape[..] else {
            return Err(CliError::data(
                &self.name,
                format!("expected a 2-d tensor, got shape {:?}", self.shape),
            ));
        };
        if width == 0 {
            return Ok(vec![Vec::new(); n]);
        }
        Ok(self
            .data
            .chunks(width)
            .map(|c| c.iter().map(|&v| f64::from(v)).collect())
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = TensorHeader {
            dtype: DTYPE.into(),
            shape: self.shape.clone(),
            name: self.name.clone(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serialises");
        out.push(b'\n');
        out.reserve(4 * self.data.len());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| CliError::data(path, "missing tensor header line"))?;
        let header: TensorHeader = serde_json::from_slice(&bytes[..split])
            .map_err(|e| CliError::data(path, format!("bad tensor header: {e}")))?;
        if header.dtype != DTYPE {
            return Err(CliError::data(
                path,
                format!("unsupported dtype '{}'", header.dtype),
            ));
        }
        let count = header
            .shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|c| c.checked_mul(4).map(|b| (c, b)));
        let payload = &bytes[split + 1..];
        let Some((count, len)) = count.filter(|&(_, b)| b == payload.len()) else {
            return Err(CliError::data(
                path,
                format!(
                    "payload is {} bytes, shape {:?} needs 4 per value",
                    payload.len(),
                    header.shape
                ),
            ));
        };
        let mut data = Vec::with_capacity(count);
        for c in payload[..len].chunks_exact(4) {
            data.push(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        }
        Ok(Self {
            name: header.name,
            shape: header.shape,
            data,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io(path))?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_header_line_then_le_floats() {
        let t = TensorFile::new("x", vec![2], vec![1.0, -2.5]).unwrap();
        let b = t.to_bytes();
        let head = br#"{"dtype":"f32le","shape":[2],"name":"x"}"#;
        assert_eq!(&b[..head.len()], head);
        assert_eq!(b[head.len()], b'\n');
        assert_eq!(&b[head.len() + 1..], [0, 0, 128, 63, 0, 0, 32, 192]);
    }

    #[test]
    fn payload_length_is_checked() {
        let mut b = TensorFile::new("x", vec![3], vec![0.0; 3])
            .unwrap()
            .to_bytes();
        b.pop();
        assert!(TensorFile::from_bytes(&b, Path::new("x")).is_err());
        assert!(TensorFile::new("x", vec![2, 2], vec![0.0; 3]).is_err());
        assert!(TensorFile::from_bytes(b"{}", Path::new("x")).is_err());
    }

    #[test]
    fn special_values_round_trip_bit_exactly() {
        let data = vec![
            f32::MIN_POSITIVE,
            -0.0,
            f32::MAX,
            1e-45,
            f32::NAN,
            f32::INFINITY,
        ];
        let t = TensorFile::new("s", vec![2, 3], data).unwrap();
        let back = TensorFile::from_bytes(&t.to_bytes(), Path::new("s")).unwrap();
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.data), bits(&t.data));
        assert_eq!(back.shape, t.shape);
    }
}
