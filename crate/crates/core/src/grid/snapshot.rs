//! Binary field snapshots and CSV export.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic    4 bytes  "CFX1"
//! dim      u32
//! sizes    3 x u64   array extent per axis (1 for unused axes)
//! spacings 3 x f64
//! time     f64
//! name     u32 length + UTF-8 bytes
//! role     u32 length + UTF-8 bytes
//! values   f64 x prod(sizes), x fastest
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CFX1";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dim: u32,
    pub sizes: [u64; 3],
    pub spacings: [f64; 3],
    pub time: f64,
    pub name: String,
    pub role: String,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let count: u64 = self.sizes.iter().product();
        if count as usize != self.values.len() {
            return Err(Error::SizeMismatch { expected: count as usize, got: self.values.len() });
        }
        w.write_all(MAGIC)?;
        w.write_all(&self.dim.to_le_bytes())?;
        for s in self.sizes {
            w.write_all(&s.to_le_bytes())?;
        }
        for h in self.spacings {
            w.write_all(&h.to_le_bytes())?;
        }
        w.write_all(&self.time.to_le_bytes())?;
        for text in [&self.name, &self.role] {
            w.write_all(&(text.len() as u32).to_le_bytes())?;
            w.write_all(text.as_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Snapshot> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Config("not a CFX1 snapshot".into()));
        }
        let dim = read_u32(r)?;
        let mut sizes = [0u64; 3];
        for s in &mut sizes {
            *s = read_u64(r)?;
        }
        let mut spacings = [0.0; 3];
        for h in &mut spacings {
            *h = read_f64(r)?;
        }
        let time = read_f64(r)?;
        let name = read_string(r)?;
        let role = read_string(r)?;
        let count: u64 = sizes.iter().product();
        let values = (0..count).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        Ok(Snapshot { dim, sizes, spacings, time, name, role, values })
    }

    /// `i,j[,k],value` rows with a header line.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let three = self.dim == 3;
        writeln!(w, "{}", if three { "i,j,k,value" } else { "i,j,value" })?;
        let [sx, sy, sz] = self.sizes.map(|s| s as usize);
        for k in 0..sz {
            for j in 0..sy {
                for i in 0..sx {
                    let v = self.values[i + sx * (j + sy * k)];
                    if three {
                        writeln!(w, "{i},{j},{k},{v:.16e}")?;
                    } else {
                        writeln!(w, "{i},{j},{v:.16e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| Error::Config(format!("snapshot text is not UTF-8: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        Snapshot {
            dim: 2,
            sizes: [3, 2, 1],
            spacings: [0.5, 0.25, 1.0],
            time: 0.125,
            name: "n".into(),
            role: "cell density".into(),
            values: vec![1.0, -2.5, 3.0, 0.1, f64::MIN_POSITIVE, 7.0],
        }
    }

    #[test]
    fn header_layout_is_fixed() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CFX1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 3);
        let header = 4 + 4 + 24 + 24 + 8 + 4 + 1 + 4 + 12;
        assert_eq!(buf.len(), header + 6 * 8);
        assert_eq!(f64::from_le_bytes(buf[header..header + 8].try_into().unwrap()), 1.0);
        let back = Snapshot::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "i,j,value");
        assert_eq!(lines.len(), 7);
        assert!(lines[2].starts_with("1,0,-2.5"));
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"XXXX0000".to_vec();
        assert!(Snapshot::read_from(&mut buf.as_slice()).is_err());
    }
}
