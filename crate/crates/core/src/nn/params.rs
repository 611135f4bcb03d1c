//! Versioned weight file.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "P2AWGHT\n"
//! version    u32
//! config     u32 length + UTF-8 "key=value" lines
//! count      u32
//! arrays     count × { u16 name length, name, u32 rows, u32 cols, rows·cols × f64 }
//! checksum   u64 FNV-1a over every preceding byte
//! ```

use super::Tensor2;
use crate::error::{Error, Result};

pub const WEIGHT_FILE_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"P2AWGHT\n";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightFile {
    /// Configuration echo, in insertion order.
    pub config: Vec<(String, String)>,
    pub arrays: Vec<(String, Tensor2)>,
}

impl WeightFile {
    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn array(&self, name: &str) -> Option<&Tensor2> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn write_weight_file(file: &WeightFile) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&WEIGHT_FILE_VERSION.to_le_bytes());
    let mut config = String::new();
    for (k, v) in &file.config {
        config.push_str(k);
        config.push('=');
        config.push_str(v);
        config.push('\n');
    }
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    out.extend_from_slice(&(file.arrays.len() as u32).to_le_bytes());
    for (name, t) in &file.arrays {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn utf8(&mut self, n: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(n)?).map_err(|_| Error::Format("invalid UTF-8".into()))
    }
}

pub fn read_weight_file(bytes: &[u8]) -> Result<WeightFile> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("not a weight file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != WEIGHT_FILE_VERSION {
        return Err(Error::Version {
            expected: WEIGHT_FILE_VERSION,
            found: version,
        });
    }
    if bytes.len() < 20 {
        return Err(Error::Format("truncated".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if fnv1a(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(Error::Format("checksum mismatch (corrupt file)".into()));
    }

    let mut r = Reader { buf: body, pos: 12 };
    let config_len = r.u32()? as usize;
    let config_text = r.utf8(config_len)?;
    let config = config_text
        .lines()
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Format(format!("bad config line `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = r.u32()? as usize;
    let mut arrays = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = r.utf8(name_len)?.to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format(format!("array `{name}` too large")))?;
        if n.saturating_mul(8) > body.len() {
            return Err(Error::Format(format!("array `{name}` truncated")));
        }
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        arrays.push((name, Tensor2::from_vec(rows, cols, data)?));
    }
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes after arrays".into()));
    }
    Ok(WeightFile { config, arrays })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightFile {
        WeightFile {
            config: vec![("hidden".into(), "4".into()), ("sensors".into(), "TT,TB".into())],
            arrays: vec![
                ("a".into(), Tensor2::from_vec(2, 2, vec![0.1, -2.5e-300, f64::MAX, 3.0]).unwrap()),
                ("b.c".into(), Tensor2::zeros(1, 3)),
            ],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = sample();
        let bytes = write_weight_file(&f);
        let back = read_weight_file(&bytes).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.config_value("hidden"), Some("4"));
        for ((_, a), (_, b)) in f.arrays.iter().zip(&back.arrays) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn corruption_and_version_are_reported() {
        let mut bytes = write_weight_file(&sample());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        assert!(matches!(read_weight_file(&bytes), Err(Error::Format(_))));

        let mut bytes = write_weight_file(&sample());
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        match read_weight_file(&bytes) {
            Err(Error::Version { expected, found }) => assert_eq!((expected, found), (1, 7)),
            other => panic!("{other:?}"),
        }
        assert!(read_weight_file(b"hello").is_err());
        let bytes = write_weight_file(&sample());
        assert!(read_weight_file(&bytes[..bytes.len() - 3]).is_err());
    }
}
