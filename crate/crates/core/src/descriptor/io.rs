//! Descriptor files: a TSV text form and a little-endian binary form.
//! Layouts are documented in `docs/formats.md`.

use std::io::Write;

use super::{FeatureKind, FeatureVector};
use crate::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"STVD";
pub const BINARY_VERSION: u32 = 1;

/// A descriptor together with the interest point it was computed at.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorRecord {
    pub clip_id: String,
    pub x: usize,
    pub y: usize,
    pub t: usize,
    pub sigma2: f64,
    pub tau2: f64,
    pub feature: FeatureVector,
}

/// One line per record: clip id, x, y, t, σ², τ², kind name, values.
/// Floats use the shortest representation that parses back to the same bits.
pub fn format_descriptors_tsv(records: &[DescriptorRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.clip_id,
            r.x,
            r.y,
            r.t,
            r.sigma2,
            r.tau2,
            r.feature.kind()
        ));
        for v in r.feature.values() {
            out.push('\t');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn parse_descriptors_tsv(text: &str) -> Result<Vec<DescriptorRecord>> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad =
            |msg: String| Error::malformed("descriptor tsv", format!("line {}: {msg}", i + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 7 {
            return Err(bad(format!(
                "expected at least 7 fields, got {}",
                fields.len()
            )));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
        let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let kind: FeatureKind = fields[6].parse().map_err(|e: Error| bad(e.to_string()))?;
        let values = fields[7..]
            .iter()
            .map(|s| float(s))
            .collect::<Result<Vec<_>>>()?;
        let feature = FeatureVector::new(kind, values).map_err(|e| bad(e.to_string()))?;
        records.push(DescriptorRecord {
            clip_id: fields[0].to_string(),
            x: int(fields[1])?,
            y: int(fields[2])?,
            t: int(fields[3])?,
            sigma2: float(fields[4])?,
            tau2: float(fields[5])?,
            feature,
        });
    }
    Ok(records)
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("{what} {v} does not fit in u32")))
}

/// Header `STVD` + u32 version, then per record: u32 id length, id bytes
/// (UTF-8), u32 x, y, t, f64 σ², τ², u8 kind code, u32 n, n × f64.
pub fn write_descriptors_binary(mut w: impl Write, records: &[DescriptorRecord]) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    for r in records {
        let id = r.clip_id.as_bytes();
        w.write_all(&to_u32(id.len(), "clip id length")?.to_le_bytes())?;
        w.write_all(id)?;
        for c in [r.x, r.y, r.t] {
            w.write_all(&to_u32(c, "coordinate")?.to_le_bytes())?;
        }
        w.write_all(&r.sigma2.to_le_bytes())?;
        w.write_all(&r.tau2.to_le_bytes())?;
        w.write_all(&[r.feature.kind().code()])?;
        let values = r.feature.values();
        w.write_all(&to_u32(values.len(), "descriptor length")?.to_le_bytes())?;
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Little-endian cursor over a byte slice.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Reader {
            bytes,
            pos: 0,
            what,
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::malformed(
                self.what,
                format!("truncated at byte {} (needed {n} more)", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let pos = self.pos;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::malformed(self.what, format!("invalid UTF-8 at byte {pos}")))
    }

    pub(crate) fn header(&mut self, magic: &[u8; 4], version: u32) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::malformed(self.what, "bad magic"));
        }
        let v = self.u32()?;
        if v != version {
            return Err(Error::malformed(
                self.what,
                format!("unsupported version {v}"),
            ));
        }
        Ok(())
    }
}

pub fn read_descriptors_binary(bytes: &[u8]) -> Result<Vec<DescriptorRecord>> {
    let mut r = Reader::new(bytes, "descriptor file");
    r.header(BINARY_MAGIC, BINARY_VERSION)?;
    let mut records = Vec::new();
    while !r.at_end() {
        let clip_id = r.string()?;
        let x = r.u32()? as usize;
        let y = r.u32()? as usize;
        let t = r.u32()? as usize;
        let sigma2 = r.f64()?;
        let tau2 = r.f64()?;
        let kind = FeatureKind::from_code(r.u8()?)?;
        let n = r.u32()? as usize;
        if n != kind.len() {
            return Err(Error::malformed(
                "descriptor file",
                format!("{kind} record with {n} values"),
            ));
        }
        let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        records.push(DescriptorRecord {
            clip_id,
            x,
            y,
            t,
            sigma2,
            tau2,
            feature: FeatureVector::new(kind, values)?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<DescriptorRecord> {
        let values: Vec<f64> = (0..36).map(|i| (i as f64 + 0.1) / 700.0).collect();
        vec![
            DescriptorRecord {
                clip_id: "walk/a b".into(),
                x: 3,
                y: 4,
                t: 5,
                sigma2: 4.0,
                tau2: 2.0,
                feature: FeatureVector::new(FeatureKind::Hue, values).unwrap(),
            },
            DescriptorRecord {
                clip_id: "ü".into(),
                x: 0,
                y: 0,
                t: 0,
                sigma2: 32.0,
                tau2: 0.1 + 0.2,
                feature: FeatureVector::new(FeatureKind::HogHof, vec![1.0 / 3.0; 162]).unwrap(),
            },
        ]
    }

    #[test]
    fn tsv_round_trip_is_exact() {
        let recs = sample();
        let text = format_descriptors_tsv(&recs);
        assert_eq!(parse_descriptors_tsv(&text).unwrap(), recs);
        assert!(text.starts_with("walk/a b\t3\t4\t5\t4\t2\thue\t"));
    }

    #[test]
    fn binary_round_trip_and_layout() {
        let recs = sample();
        let mut buf = Vec::new();
        write_descriptors_binary(&mut buf, &recs).unwrap();
        assert_eq!(&buf[..4], b"STVD");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &8u32.to_le_bytes());
        let first = 4 + 8 + 12 + 16 + 1 + 4 + 36 * 8;
        let second = 4 + 2 + 12 + 16 + 1 + 4 + 162 * 8;
        assert_eq!(buf.len(), 8 + first + second);
        assert_eq!(read_descriptors_binary(&buf).unwrap(), recs);
    }

    #[test]
    fn malformed_inputs() {
        let mut buf = Vec::new();
        write_descriptors_binary(&mut buf, &sample()).unwrap();
        assert!(read_descriptors_binary(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_descriptors_binary(&bad).is_err());
        assert!(parse_descriptors_tsv("a\t1\t2\t3\t4\t2\thue\t0.5\n").is_err());
        assert!(parse_descriptors_tsv("a\t1\t2\n").is_err());
        assert!(read_descriptors_binary(b"STVD\x01\0\0\0")
            .unwrap()
            .is_empty());
    }
}
