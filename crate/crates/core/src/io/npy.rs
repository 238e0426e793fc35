//! Minimal NPY reader/writer for C-ordered little-endian `f4` and `u1` arrays.

use crate::error::{Error, Result};

pub(crate) const MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::U8 => "|u1",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }

    fn parse(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(Dtype::F32),
            "|u1" | "<u1" | "u1" | "|b1" => Ok(Dtype::U8),
            other => Err(Error::Format(format!("unsupported npy dtype {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    /// Raw little-endian element bytes.
    pub data: Vec<u8>,
}

fn header_value<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    let pos = header
        .find(&format!("'{key}'"))
        .or_else(|| header.find(&format!("\"{key}\"")))
        .ok_or_else(|| Error::Format(format!("npy header lacks {key:?}")))?;
    let rest = &header[pos + key.len() + 2..];
    let colon = rest
        .find(':')
        .ok_or_else(|| Error::Format(format!("npy header: no value for {key:?}")))?;
    Ok(rest[colon + 1..].trim_start())
}

fn parse_header(header: &str) -> Result<(Dtype, bool, Vec<usize>)> {
    let descr_raw = header_value(header, "descr")?;
    let quote = descr_raw
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| Error::Format("npy descr is not a string".into()))?;
    let descr_end = descr_raw[1..]
        .find(quote)
        .ok_or_else(|| Error::Format("unterminated npy descr".into()))?;
    let dtype = Dtype::parse(&descr_raw[1..1 + descr_end])?;

    let fortran_raw = header_value(header, "fortran_order")?;
    let fortran = if fortran_raw.starts_with("True") {
        true
    } else if fortran_raw.starts_with("False") {
        false
    } else {
        return Err(Error::Format("bad fortran_order in npy header".into()));
    };

    let shape_raw = header_value(header, "shape")?;
    if !shape_raw.starts_with('(') {
        return Err(Error::Format("npy shape is not a tuple".into()));
    }
    let close = shape_raw
        .find(')')
        .ok_or_else(|| Error::Format("unterminated npy shape".into()))?;
    let shape = shape_raw[1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("bad npy shape entry {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dtype, fortran, shape))
}

pub fn decode(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("not an npy file (bad magic)".into()));
    }
    let major = bytes[6];
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("truncated npy header".into()));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        v => {
            return Err(Error::Format(format!(
                "unsupported npy version {v}.{}",
                bytes[7]
            )))
        }
    };
    let end = start + header_len;
    if bytes.len() < end {
        return Err(Error::Format("truncated npy header".into()));
    }
    let header = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| Error::Format("npy header is not text".into()))?;
    let (dtype, fortran, shape) = parse_header(header)?;
    if fortran {
        return Err(Error::Format(
            "fortran-ordered npy arrays are not supported".into(),
        ));
    }
    let count: usize = shape.iter().product();
    let need = count * dtype.size();
    let payload = &bytes[end..];
    if payload.len() != need {
        return Err(Error::Format(format!(
            "npy payload has {} bytes, shape {:?} needs {need}",
            payload.len(),
            shape
        )));
    }
    Ok(NpyArray {
        dtype,
        shape,
        data: payload.to_vec(),
    })
}

pub fn encode(array: &NpyArray) -> Vec<u8> {
    let shape = match array.shape.len() {
        1 => format!("({},)", array.shape[0]),
        _ => format!(
            "({})",
            array
                .shape
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        array.dtype.descr(),
        shape
    );
    // pad so that magic + version + length + header is a multiple of 64
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let mut out = Vec::with_capacity(10 + header.len() + array.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&array.data);
    out
}

pub fn f32_payload(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn f32_values(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}
