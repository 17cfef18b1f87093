//! Binary layout: `d`, the `d` mode sizes and the `d+1` ranks as little-endian u64,
//! followed by every core's entries in row-major order as little-endian f64.

use std::io::{Read, Write};
use std::path::Path;

use super::{Core, TensorTrain};
use crate::error::{Error, Result};

impl TensorTrain {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for n in self.mode_sizes() {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for r in self.ranks() {
            w.write_all(&(r as u64).to_le_bytes())?;
        }
        for core in self.cores() {
            for v in core.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<TensorTrain> {
        let d = read_u64(&mut r)? as usize;
        if d == 0 || d > 1 << 16 {
            return Err(Error::Parse(format!("implausible dimension {d}")));
        }
        let modes = (0..d).map(|_| read_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let ranks = (0..=d).map(|_| read_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let len = ranks[k]
                .checked_mul(modes[k])
                .and_then(|v| v.checked_mul(ranks[k + 1]))
                .ok_or_else(|| Error::Parse("core size overflow".into()))?;
            let mut data = Vec::with_capacity(len);
            let mut buf = [0u8; 8];
            for _ in 0..len {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            cores.push(Core::new(ranks[k], modes[k], ranks[k + 1], data)?);
        }
        TensorTrain::from_cores(cores)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TensorTrain> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_bytes() {
        let a = TensorTrain::rank_one(&[vec![1.0, -2.5], vec![0.5, 3.0, 1e-300]]);
        let b = a.add(&a.scale(0.5)).unwrap();
        let mut buf = Vec::new();
        b.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 * (1 + 2 + 3) + 8 * b.storage());
        assert_eq!(&buf[..8], &2u64.to_le_bytes());
        let c = TensorTrain::read_from(&buf[..]).unwrap();
        assert_eq!(b, c);
    }

    #[test]
    fn truncated_input_is_an_error() {
        let a = TensorTrain::ones(&[3, 3]);
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(TensorTrain::read_from(&buf[..]).is_err());
    }
}
