//! Flat binary container for named grid fields.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"VRNF"      version u16     record count u32
//! record: name_len u16, name utf-8,
//!         provenance tag u8 (0 synthetic, 1 solver, 2 derived), provenance value u64,
//!         axis count u8, per axis { kind u8, origin f64, extent f64, len u64 },
//!         sample count u64, samples f64 ...
//! trailer: CRC-32 of every preceding byte, u32
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::grid::{Axis, AxisKind, GridField, Provenance};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VRNF";
const VERSION: u16 = 1;

pub fn encode(records: &[(&str, &GridField)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (name, field) in records {
        let name = name.as_bytes();
        if name.len() > u16::MAX as usize {
            return Err(Error::Container("record name too long".into()));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        let (tag, value) = match field.provenance() {
            Provenance::Synthetic { seed } => (0u8, seed),
            Provenance::Solver { step } => (1u8, step),
            Provenance::Derived => (2u8, 0),
        };
        out.push(tag);
        out.extend_from_slice(&value.to_le_bytes());
        out.push(field.axes().len() as u8);
        for a in field.axes() {
            out.push(a.kind.code());
            out.extend_from_slice(&a.origin.to_le_bytes());
            out.extend_from_slice(&a.extent.to_le_bytes());
            out.extend_from_slice(&(a.len as u64).to_le_bytes());
        }
        out.extend_from_slice(&(field.len() as u64).to_le_bytes());
        for v in field.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Container("truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, GridField)>> {
    if bytes.len() < 14 {
        return Err(Error::Container("file too short".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let nlen = r.u16()? as usize;
        let name = String::from_utf8(r.take(nlen)?.to_vec()).map_err(|_| Error::Container("record name is not utf-8".into()))?;
        let tag = r.u8()?;
        let value = r.u64()?;
        let provenance = match tag {
            0 => Provenance::Synthetic { seed: value },
            1 => Provenance::Solver { step: value },
            2 => Provenance::Derived,
            t => return Err(Error::Container(format!("unknown provenance tag {t}"))),
        };
        let naxes = r.u8()? as usize;
        let mut axes = Vec::with_capacity(naxes);
        for _ in 0..naxes {
            let code = r.u8()?;
            let kind = AxisKind::from_code(code).ok_or_else(|| Error::Container(format!("unknown axis code {code}")))?;
            let origin = r.f64()?;
            let extent = r.f64()?;
            let len = r.u64()? as usize;
            axes.push(Axis::new(kind, origin, extent, len)?);
        }
        let n = r.u64()? as usize;
        let expected: usize = axes.iter().map(|a| a.len).product();
        if n != expected {
            return Err(Error::Container(format!("record `{name}`: {n} samples for {expected} grid points")));
        }
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Container("sample count overflow".into()))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, GridField::new(axes, data)?.with_provenance(provenance)));
    }
    if r.pos != body.len() {
        return Err(Error::Container("trailing bytes after last record".into()));
    }
    Ok(out)
}

/// Writes via a temporary sibling and rename, so readers never see a partial file.
pub fn save(path: &Path, records: &[(&str, &GridField)]) -> Result<()> {
    let bytes = encode(records)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<(String, GridField)>> {
    decode(&fs::read(path)?)
}
