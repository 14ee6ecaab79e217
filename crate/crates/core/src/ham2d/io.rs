//! Binary storage of complex-structure fields.
//!
//! Layout (little endian): magic "JFLD", N as u32, domain tag as u32 (0 torus, 1 disk),
//! a reserved u32, then x and y as row-major f64 arrays of N^2 values each.
//! Disk fields end with the radius as f64.

use std::io::{Read, Write};
use std::path::Path;

use super::grid::{Domain, JField, SurfaceGrid};
use crate::error::{QmError, Result};

const MAGIC: &[u8; 4] = b"JFLD";

fn io_err(e: std::io::Error) -> QmError {
    QmError::Invalid(format!("field io: {e}"))
}

pub fn write_jfield<W: Write>(mut w: W, j: &JField) -> Result<()> {
    let g = j.grid;
    let tag: u32 = match g.domain {
        Domain::Torus => 0,
        Domain::Disk { .. } => 1,
    };
    let mut buf = Vec::with_capacity(24 + 16 * g.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(g.n as u32).to_le_bytes());
    buf.extend_from_slice(&tag.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for v in j.x.iter().chain(&j.y) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Domain::Disk { radius } = g.domain {
        buf.extend_from_slice(&radius.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

pub fn read_jfield<R: Read>(mut r: R) -> Result<JField> {
    let mut buf = vec![];
    r.read_to_end(&mut buf).map_err(io_err)?;
    if buf.len() < 16 || &buf[..4] != MAGIC {
        return Err(QmError::Invalid("not a field file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
    let n = word(4) as usize;
    let tag = word(8);
    let count = n.checked_mul(n).ok_or_else(|| QmError::Invalid("grid size overflows".into()))?;
    let trailer = match tag {
        0 => 0,
        1 => 8,
        _ => return Err(QmError::Invalid(format!("unknown domain tag {tag}"))),
    };
    if buf.len() != 16 + 16 * count + trailer {
        return Err(QmError::Invalid(format!("field file has {} bytes, expected {}", buf.len(), 16 + 16 * count + trailer)));
    }
    let f = |i: usize| f64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
    let x: Vec<f64> = (0..count).map(|k| f(16 + 8 * k)).collect();
    let y: Vec<f64> = (0..count).map(|k| f(16 + 8 * (count + k))).collect();
    let domain = if tag == 0 { Domain::Torus } else { Domain::Disk { radius: f(16 + 16 * count) } };
    JField::new(SurfaceGrid::new(domain, n)?, x, y)
}

pub fn save_jfield(path: &Path, j: &JField) -> Result<()> {
    let mut buf = vec![];
    write_jfield(&mut buf, j)?;
    std::fs::write(path, buf).map_err(io_err)
}

pub fn load_jfield(path: &Path) -> Result<JField> {
    read_jfield(std::fs::File::open(path).map_err(io_err)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ham2d::grid::random_jfield;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bitwise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for g in [SurfaceGrid::torus(16).unwrap(), SurfaceGrid::disk(16, 0.75).unwrap()] {
            let j = random_jfield(&mut rng, g, 3, 2, 0.2);
            let mut buf = vec![];
            write_jfield(&mut buf, &j).unwrap();
            let back = read_jfield(&buf[..]).unwrap();
            assert_eq!(back, j);
            buf.pop();
            assert!(read_jfield(&buf[..]).is_err());
        }
        assert!(read_jfield(&b"JFLX\0\0\0\0\0\0\0\0\0\0\0\0"[..]).is_err());
    }
}
