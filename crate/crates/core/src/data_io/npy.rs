//! Minimal NPY v1.0 codec for 2-D little-endian arrays.
//!
//! Reads `<f4`/`<f8` and little-endian or byte-sized integer dtypes (integers
//! are accepted only when every value is exactly representable as `f64`).
//! Fortran order, big-endian data, other versions and other dimensionalities
//! are rejected.

use nalgebra::DMatrix;

use super::DataError;

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Header length (magic + version + len + dict) is padded to this multiple.
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
    I1,
    I2,
    I4,
    I8,
    U1,
    U2,
    U4,
    U8,
}

impl Dtype {
    fn parse(descr: &str) -> Result<Self, DataError> {
        let unsupported = || DataError::UnsupportedDtype(descr.to_string());
        let (order, code) = descr.split_at(descr.len().min(1));
        let dtype = match code {
            "f4" => Dtype::F4,
            "f8" => Dtype::F8,
            "i1" => Dtype::I1,
            "i2" => Dtype::I2,
            "i4" => Dtype::I4,
            "i8" => Dtype::I8,
            "u1" => Dtype::U1,
            "u2" => Dtype::U2,
            "u4" => Dtype::U4,
            "u8" => Dtype::U8,
            _ => return Err(unsupported()),
        };
        match order {
            "<" => Ok(dtype),
            "|" if dtype.size() == 1 => Ok(dtype),
            _ => Err(unsupported()),
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::I1 | Dtype::U1 => 1,
            Dtype::I2 | Dtype::U2 => 2,
            Dtype::F4 | Dtype::I4 | Dtype::U4 => 4,
            Dtype::F8 | Dtype::I8 | Dtype::U8 => 8,
        }
    }

    fn decode(self, bytes: &[u8], index: usize) -> Result<f64, DataError> {
        let b = |n: usize| -> [u8; 8] {
            let mut buf = [0u8; 8];
            buf[..n].copy_from_slice(&bytes[..n]);
            buf
        };
        const EXACT: u64 = 1 << 53;
        let lossy = |value: String| DataError::LossyInteger { index, value };
        Ok(match self {
            Dtype::F4 => f32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            Dtype::F8 => f64::from_le_bytes(bytes.try_into().unwrap()),
            Dtype::I1 => bytes[0] as i8 as f64,
            Dtype::U1 => bytes[0] as f64,
            Dtype::I2 => i16::from_le_bytes(bytes.try_into().unwrap()) as f64,
            Dtype::U2 => u16::from_le_bytes(bytes.try_into().unwrap()) as f64,
            Dtype::I4 => i32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            Dtype::U4 => u32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            Dtype::I8 => {
                let v = i64::from_le_bytes(b(8));
                if v.unsigned_abs() > EXACT {
                    return Err(lossy(v.to_string()));
                }
                v as f64
            }
            Dtype::U8 => {
                let v = u64::from_le_bytes(b(8));
                if v > EXACT {
                    return Err(lossy(v.to_string()));
                }
                v as f64
            }
        })
    }
}

#[derive(Debug, PartialEq)]
struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Parses the Python-literal header dict, e.g.
/// `{'descr': '<f8', 'fortran_order': False, 'shape': (3, 4), }`.
fn parse_header_dict(text: &str) -> Result<Header, DataError> {
    let bad = |msg: &str| DataError::MalformedHeader(format!("{msg} in {text:?}"));
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| bad("header is not a dict"))?;

    let mut descr = None;
    let mut fortran_order = None;
    let mut shape = None;
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let (key, after_key) = take_quoted(rest).ok_or_else(|| bad("expected quoted key"))?;
        let after_colon = after_key
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| bad("expected ':'"))?
            .trim_start();
        let after_value = match key {
            "descr" => {
                let (v, r) = take_quoted(after_colon).ok_or_else(|| bad("descr must be a string"))?;
                descr = Some(v.to_string());
                r
            }
            "fortran_order" => {
                if let Some(r) = after_colon.strip_prefix("False") {
                    fortran_order = Some(false);
                    r
                } else if let Some(r) = after_colon.strip_prefix("True") {
                    fortran_order = Some(true);
                    r
                } else {
                    return Err(bad("fortran_order must be True or False"));
                }
            }
            "shape" => {
                let inner = after_colon
                    .strip_prefix('(')
                    .ok_or_else(|| bad("shape must be a tuple"))?;
                let close = inner.find(')').ok_or_else(|| bad("unterminated shape"))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim_end_matches('L').parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("shape entries must be non-negative integers"))?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(bad(&format!("unexpected key {other:?}"))),
        };
        rest = after_value.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }

    Ok(Header {
        descr: descr.ok_or_else(|| bad("missing descr"))?,
        fortran_order: fortran_order.ok_or_else(|| bad("missing fortran_order"))?,
        shape: shape.ok_or_else(|| bad("missing shape"))?,
    })
}

fn take_quoted(s: &str) -> Option<(&str, &str)> {
    let quote = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let inner = &s[1..];
    let end = inner.find(quote)?;
    Some((&inner[..end], &inner[end + 1..]))
}

/// Decodes an NPY byte buffer into an `N x D` matrix.
pub fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>, DataError> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(DataError::MalformedHeader("missing \\x93NUMPY magic".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    if (major, minor) != (1, 0) {
        return Err(DataError::MalformedHeader(format!(
            "unsupported version {major}.{minor}, only 1.0 is read"
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_start = 10 + header_len;
    if bytes.len() < data_start {
        return Err(DataError::MalformedHeader("truncated header".into()));
    }
    let text = std::str::from_utf8(&bytes[10..data_start])
        .map_err(|_| DataError::MalformedHeader("header is not ASCII".into()))?;
    let header = parse_header_dict(text)?;

    if header.shape.len() != 2 {
        return Err(DataError::DimensionError {
            ndim: header.shape.len(),
        });
    }
    if header.fortran_order {
        return Err(DataError::MalformedHeader(
            "fortran_order arrays are not supported".into(),
        ));
    }
    let dtype = Dtype::parse(&header.descr)?;
    let (rows, cols) = (header.shape[0], header.shape[1]);
    let payload = &bytes[data_start..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(dtype.size()))
        .ok_or_else(|| DataError::MalformedHeader("shape overflows".into()))?;
    if payload.len() != expected {
        return Err(DataError::MalformedHeader(format!(
            "payload holds {} bytes, shape ({rows}, {cols}) of {} needs {expected}",
            payload.len(),
            header.descr
        )));
    }

    let values = payload
        .chunks_exact(dtype.size())
        .enumerate()
        .map(|(i, chunk)| dtype.decode(chunk, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Encodes a matrix as `<f8`, C order, NPY v1.0.
pub fn encode_matrix(matrix: &DMatrix<f64>) -> Vec<u8> {
    let (rows, cols) = matrix.shape();
    let mut dict = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
    // magic(6) + version(2) + len(2) + dict + '\n'
    let unpadded = 10 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(10 + dict.len() + rows * cols * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    for r in 0..rows {
        for c in 0..cols {
            out.extend_from_slice(&matrix[(r, c)].to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Builds an NPY buffer with an arbitrary header, for malformed-input tests.
    pub(crate) fn raw_npy(dict: &str, payload: &[u8]) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        let text = format!("{dict}\n");
        out.extend_from_slice(&(text.len() as u16).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(payload);
        out
    }

    fn f8_payload(values: &[f64]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn decodes_2x3_f8() {
        let buf = raw_npy(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }",
            &f8_payload(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        );
        let m = decode_matrix(&buf).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    }

    #[test]
    fn decodes_f4_and_integers() {
        let f4: Vec<u8> = [1.5f32, -2.0].iter().flat_map(|v| v.to_le_bytes()).collect();
        let buf = raw_npy("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 1)}", &f4);
        assert_eq!(decode_matrix(&buf).unwrap()[(1, 0)], -2.0);

        let i4: Vec<u8> = [7i32, -9].iter().flat_map(|v| v.to_le_bytes()).collect();
        let buf = raw_npy("{'descr': '<i4', 'fortran_order': False, 'shape': (1, 2)}", &i4);
        assert_eq!(decode_matrix(&buf).unwrap()[(0, 1)], -9.0);

        let buf = raw_npy("{'descr': '|u1', 'fortran_order': False, 'shape': (1, 2)}", &[3, 250]);
        assert_eq!(decode_matrix(&buf).unwrap()[(0, 1)], 250.0);
    }

    #[test]
    fn rejects_lossy_i8() {
        let big = ((1i64 << 53) + 1).to_le_bytes();
        let buf = raw_npy("{'descr': '<i8', 'fortran_order': False, 'shape': (1, 1)}", &big);
        assert!(matches!(decode_matrix(&buf), Err(DataError::LossyInteger { index: 0, .. })));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            decode_matrix(b"\x93NUMPX\x01\x00\x00\x00"),
            Err(DataError::MalformedHeader(_))
        ));
        let one_d = raw_npy(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (3,), }",
            &f8_payload(&[1.0, 2.0, 3.0]),
        );
        assert!(matches!(decode_matrix(&one_d), Err(DataError::DimensionError { ndim: 1 })));
        let big_endian = raw_npy(
            "{'descr': '>f8', 'fortran_order': False, 'shape': (1, 1), }",
            &f8_payload(&[1.0]),
        );
        assert!(matches!(decode_matrix(&big_endian), Err(DataError::UnsupportedDtype(_))));
        let fortran = raw_npy(
            "{'descr': '<f8', 'fortran_order': True, 'shape': (1, 1), }",
            &f8_payload(&[1.0]),
        );
        assert!(matches!(decode_matrix(&fortran), Err(DataError::MalformedHeader(_))));
        let short = raw_npy(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }",
            &f8_payload(&[1.0]),
        );
        assert!(matches!(decode_matrix(&short), Err(DataError::MalformedHeader(_))));
        let mut v2 = raw_npy("{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1), }", &[]);
        v2[6] = 2;
        assert!(matches!(decode_matrix(&v2), Err(DataError::MalformedHeader(_))));
    }

    #[test]
    fn encoded_header_is_aligned_and_parseable() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 3.25, 1e-300]);
        let buf = encode_matrix(&m);
        let header_len = u16::from_le_bytes([buf[8], buf[9]]) as usize;
        assert_eq!((10 + header_len) % ALIGN, 0);
        assert_eq!(buf[10 + header_len - 1], b'\n');
        assert_eq!(decode_matrix(&buf).unwrap(), m);
    }
}
