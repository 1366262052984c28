//! Binary tensor container.
//!
//! Layout: the six bytes `DTNSR1`, a version byte, a `u8` rank, one
//! little-endian `u64` per dimension, then the row-major payload as
//! little-endian `f32`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub const MAGIC: &[u8; 6] = b"DTNSR1";
pub const VERSION: u8 = 1;

pub fn encode(t: &DenseTensor) -> Result<Vec<u8>> {
    let ndim = u8::try_from(t.ndim())
        .map_err(|_| Error::Format(format!("rank {} exceeds 255", t.ndim())))?;
    let mut out = Vec::with_capacity(8 + 8 * t.ndim() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(ndim);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.len() < 8 || &bytes[..6] != MAGIC {
        return Err(Error::Format("bad magic: not a DTNSR1 tensor file".into()));
    }
    if bytes[6] != VERSION {
        return Err(Error::Format(format!("unsupported tensor file version {}", bytes[6])));
    }
    let ndim = bytes[7] as usize;
    let header = 8 + 8 * ndim;
    if bytes.len() < header {
        return Err(Error::Format(format!(
            "truncated header: expected {header} bytes, found {}",
            bytes.len()
        )));
    }
    let mut shape = Vec::with_capacity(ndim);
    let mut count: usize = 1;
    for k in 0..ndim {
        let raw = u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().expect("8 bytes"));
        let d = usize::try_from(raw).map_err(|_| Error::Format(format!("dimension {raw} overflows")))?;
        count = count
            .checked_mul(d)
            .filter(|c| c.checked_mul(4).is_some())
            .ok_or_else(|| Error::Format(format!("dimensions overflow at axis {k} ({raw})")))?;
        shape.push(d);
    }
    let expected = header + 4 * count;
    if bytes.len() != expected {
        let what = if bytes.len() < expected { "truncated payload" } else { "trailing bytes" };
        return Err(Error::Format(format!(
            "{what}: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    DenseTensor::new(shape, data)
}

pub fn write_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(t)?)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};
    use proptest::prelude::*;

    fn random(shape: &[usize], seed: u64) -> DenseTensor {
        let mut g = rng::stream(seed, Stream::Phantom, 20);
        DenseTensor::from_fn(shape, |_| rng::normal(&mut g))
    }

    fn to_f32(t: &DenseTensor) -> DenseTensor {
        t.map(|v| v as f32 as f64)
    }

    #[test]
    fn round_trip_through_file() {
        let t = random(&[3, 4, 5], 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.dtn");
        write_tensor(&p, &t).unwrap();
        assert_eq!(read_tensor(&p).unwrap(), to_f32(&t));
    }

    #[test]
    fn truncation_names_byte_counts() {
        let bytes = encode(&random(&[2, 3], 2)).unwrap();
        let err = decode(&bytes[..bytes.len() - 3]).unwrap_err().to_string();
        assert!(err.contains("expected 48") && err.contains("found 45"), "{err}");
    }

    #[test]
    fn bad_magic_and_overflow() {
        let mut bytes = encode(&random(&[2], 3)).unwrap();
        bytes[0] = b'X';
        assert!(decode(&bytes).unwrap_err().to_string().contains("magic"));

        let mut huge = MAGIC.to_vec();
        huge.extend([VERSION, 2]);
        huge.extend(u64::MAX.to_le_bytes());
        huge.extend(4u64.to_le_bytes());
        assert!(decode(&huge).unwrap_err().to_string().contains("overflow"));
    }

    proptest! {
        #[test]
        fn f32_values_round_trip_exactly(vals in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            let t = to_f32(&DenseTensor::new(vec![vals.len()], vals).unwrap());
            prop_assert_eq!(decode(&encode(&t).unwrap()).unwrap(), t);
        }
    }
}
