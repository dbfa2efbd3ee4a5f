//! Binary field snapshots.
//!
//! Layout (all little-endian): the magic `KSF1`, `nx` and `ny` as `u64`, `lx` and
//! `ly` as `f64`, then `nx * ny` `f64` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{KsfError, Result};
use crate::grid::{Grid2D, ScalarField};

pub const MAGIC: &[u8; 4] = b"KSF1";

pub fn encode(field: &ScalarField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(4 + 32 + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.nx() as u64).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u64).to_le_bytes());
    out.extend_from_slice(&g.lx().to_le_bytes());
    out.extend_from_slice(&g.ly().to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take<const N: usize>(bytes: &[u8], pos: &mut usize) -> Result<[u8; N]> {
    let end = *pos + N;
    let chunk = bytes
        .get(*pos..end)
        .ok_or_else(|| KsfError::Snapshot(format!("truncated at byte {}", *pos)))?;
    *pos = end;
    Ok(chunk.try_into().expect("slice length checked"))
}

pub fn decode(bytes: &[u8]) -> Result<ScalarField> {
    let mut pos = 0;
    let magic: [u8; 4] = take(bytes, &mut pos)?;
    if &magic != MAGIC {
        return Err(KsfError::Snapshot(format!("bad magic {magic:?}")));
    }
    let nx = u64::from_le_bytes(take(bytes, &mut pos)?);
    let ny = u64::from_le_bytes(take(bytes, &mut pos)?);
    let lx = f64::from_le_bytes(take(bytes, &mut pos)?);
    let ly = f64::from_le_bytes(take(bytes, &mut pos)?);
    let nx = usize::try_from(nx).map_err(|_| KsfError::Snapshot(format!("nx {nx} too large")))?;
    let ny = usize::try_from(ny).map_err(|_| KsfError::Snapshot(format!("ny {ny} too large")))?;
    let grid = Grid2D::new(nx, ny, lx, ly)?;
    let expected = pos + 8 * grid.len();
    if bytes.len() != expected {
        return Err(KsfError::Snapshot(format!(
            "expected {expected} bytes for a {nx}x{ny} field, got {}",
            bytes.len()
        )));
    }
    let values = bytes[pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks_exact(8)")))
        .collect();
    ScalarField::from_values(grid, values)
}

pub fn write(path: &Path, field: &ScalarField) -> Result<()> {
    let file = File::create(path).map_err(|e| KsfError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode(field))
        .and_then(|_| w.flush())
        .map_err(|e| KsfError::io(path, e))
}

pub fn read(path: &Path) -> Result<ScalarField> {
    let file = File::open(path).map_err(|e| KsfError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| KsfError::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = Grid2D::new(4, 5, 1.0, 2.5).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x - y);
        let b = encode(&f);
        assert_eq!(&b[..4], b"KSF1");
        assert_eq!(u64::from_le_bytes(b[4..12].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(b[12..20].try_into().unwrap()), 5);
        assert_eq!(f64::from_le_bytes(b[20..28].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(b[28..36].try_into().unwrap()), 2.5);
        assert_eq!(b.len(), 36 + 8 * 20);
        // first value is cell (0, 0)
        assert_eq!(f64::from_le_bytes(b[36..44].try_into().unwrap()), f.at(0, 0));
        assert_eq!(f64::from_le_bytes(b[44..52].try_into().unwrap()), f.at(1, 0));
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode(b"KSF2").is_err());
        let g = Grid2D::unit_square(4).unwrap();
        let mut b = encode(&ScalarField::zeros(g));
        b.pop();
        assert!(decode(&b).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.ksf");
        let g = Grid2D::new(6, 4, 2.0, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (x * y).sin());
        write(&path, &f).unwrap();
        assert_eq!(read(&path).unwrap(), f);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(nx in 4usize..10, ny in 4usize..10, seed in any::<u64>()) {
            let g = Grid2D::new(nx, ny, 1.0, 3.0).unwrap();
            let mut s = seed;
            let f = ScalarField::from_fn(g, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f64::from_bits(s >> 2)
            });
            let back = decode(&encode(&f)).unwrap();
            prop_assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
