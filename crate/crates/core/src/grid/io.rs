//! Binary field snapshots (`.pff`): magic `PFF1`, little-endian `u32`
//! width and height, `f64` dx, then the samples row-major.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ScalarField;

const PFF_MAGIC: &[u8; 4] = b"PFF1";

pub(crate) fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], w: usize, h: usize, dx: f64) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&dx.to_le_bytes());
}

/// Cursor over a little-endian byte payload.
pub(crate) struct FieldReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> FieldReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn values(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("size overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn read_header(r: &mut FieldReader<'_>, magic: &[u8; 4]) -> Result<(usize, usize, f64)> {
    let m = r.take(4)?;
    if m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(m),
            String::from_utf8_lossy(magic)
        )));
    }
    let w = r.u32()? as usize;
    let h = r.u32()? as usize;
    let dx = r.f64()?;
    Ok((w, h, dx))
}

pub fn encode_pff(field: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * field.len());
    write_header(
        &mut out,
        PFF_MAGIC,
        field.width(),
        field.height(),
        field.dx(),
    );
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_pff(bytes: &[u8]) -> Result<ScalarField> {
    let mut r = FieldReader::new(bytes);
    let (w, h, dx) = read_header(&mut r, PFF_MAGIC)?;
    let values = r.values(w * h)?;
    r.finish()?;
    ScalarField::new(w, h, dx, values)
}

pub fn write_pff(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    fs::write(path, encode_pff(field))?;
    Ok(())
}

pub fn read_pff(path: impl AsRef<Path>) -> Result<ScalarField> {
    decode_pff(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let f = ScalarField::from_fn(4, 5, 0.5, |i, j| (i * 10 + j) as f64).unwrap();
        let bytes = encode_pff(&f);
        assert_eq!(&bytes[..4], b"PFF1");
        assert_eq!(&bytes[4..8], &4u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &5u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &0.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 8 * 20);
        assert_eq!(&bytes[20 + 8..28 + 8], &10.0f64.to_le_bytes());
        assert_eq!(decode_pff(&bytes).unwrap(), f);
    }

    #[test]
    fn rejects_truncated_and_trailing() {
        let f = ScalarField::filled(4, 4, 1.0, 1.0).unwrap();
        let bytes = encode_pff(&f);
        assert!(decode_pff(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(decode_pff(&longer).is_err());
        let mut bad = bytes;
        bad[3] = b'2';
        assert!(decode_pff(&bad).is_err());
    }
}
