//! The `SPFV` container.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                        |
//! |--------|------|------------------------------|
//! | 0      | 4    | magic `SPFV`                 |
//! | 4      | 4    | u32 version (= 1)            |
//! | 8      | 16   | u32 T, Z, Y, X               |
//! | 24     | 4    | u32 dtype code (1=u8, 2=u16) |
//! | 28     | ..   | T·Z·Y·X voxels, t, z, y, x   |
//!
//! The z scale is not stored; readers get [`DEFAULT_Z_SCALE`](super::DEFAULT_Z_SCALE).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Dims, Dtype, Volume4D, Voxels};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SPFV";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

pub fn write_volume(v: &Volume4D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_volume_to(v, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_volume_to<W: Write>(v: &Volume4D, w: &mut W) -> std::io::Result<()> {
    let d = v.dims();
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    let fields = [
        FORMAT_VERSION,
        d.t as u32,
        d.z as u32,
        d.y as u32,
        d.x as u32,
        v.dtype().code(),
    ];
    for (i, f) in fields.iter().enumerate() {
        header[4 + 4 * i..8 + 4 * i].copy_from_slice(&f.to_le_bytes());
    }
    w.write_all(&header)?;
    match v.voxels() {
        Voxels::U8(data) => w.write_all(data)?,
        Voxels::U16(data) => {
            let mut buf = Vec::with_capacity(1 << 16);
            for chunk in data.chunks(1 << 15) {
                buf.clear();
                buf.extend(chunk.iter().flat_map(|s| s.to_le_bytes()));
                w.write_all(&buf)?;
            }
        }
    }
    Ok(())
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume4D> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_volume_from(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_volume_from<R: Read>(mut r: R) -> Result<Volume4D> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_up_to(&mut r, &mut header)?;
    if got >= 4 && header[0..4] != MAGIC {
        return Err(Error::BadMagic {
            found: [header[0], header[1], header[2], header[3]],
        });
    }
    if got < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            actual: got as u64,
        });
    }
    let field = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = field(0);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let dims = Dims::new(
        field(1) as usize,
        field(2) as usize,
        field(3) as usize,
        field(4) as usize,
    );
    let dtype = Dtype::from_code(field(5))?;
    let expected = dims.len() as u64 * dtype.bytes_per_voxel() as u64;

    let mut payload = Vec::with_capacity(expected as usize);
    r.by_ref()
        .take(expected)
        .read_to_end(&mut payload)
        .map_err(|e| Error::io("<reader>", e))?;
    if (payload.len() as u64) < expected {
        return Err(Error::Truncated {
            expected,
            actual: payload.len() as u64,
        });
    }
    let voxels = match dtype {
        Dtype::U8 => Voxels::U8(payload),
        Dtype::U16 => Voxels::U16(
            payload
                .chunks_exact(2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]))
                .collect(),
        ),
    };
    Volume4D::new(dims, voxels)
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io("<reader>", e)),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(v: &Volume4D) -> Vec<u8> {
        let mut buf = Vec::new();
        write_volume_to(v, &mut buf).unwrap();
        buf
    }

    #[test]
    fn header_layout_is_exact() {
        let v = Volume4D::new(Dims::new(1, 1, 1, 2), Voxels::U16(vec![0x0102, 0xA0B0])).unwrap();
        let bytes = encode(&v);
        assert_eq!(
            bytes,
            [
                b'S', b'P', b'F', b'V', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 0,
                0, 0, 0x02, 0x01, 0xB0, 0xA0
            ]
        );
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&Volume4D::zeros(Dims::new(1, 1, 1, 1), Dtype::U8).unwrap());
        bytes[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            read_volume_from(&bytes[..]),
            Err(Error::BadMagic { found }) if &found == b"XXXX"
        ));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = encode(&Volume4D::zeros(Dims::new(1, 1, 1, 1), Dtype::U8).unwrap());
        bytes[4] = 2;
        assert!(matches!(
            read_volume_from(&bytes[..]),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn truncated_payload_reports_counts() {
        // Header declares 100 u8 voxels, payload holds 50.
        let v = Volume4D::zeros(Dims::new(1, 1, 10, 10), Dtype::U8).unwrap();
        let bytes = encode(&v);
        let cut = &bytes[..HEADER_LEN + 50];
        match read_volume_from(cut) {
            Err(Error::Truncated { expected, actual }) => {
                assert_eq!(expected, 100);
                assert_eq!(actual, 50);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.spfv");
        let v = Volume4D::new(Dims::new(2, 1, 2, 2), Voxels::U8(vec![1, 2, 3, 4, 5, 6, 7, 8])).unwrap();
        write_volume(&v, &path).unwrap();
        assert_eq!(read_volume(&path).unwrap(), v);
    }

    fn arb_volume() -> impl Strategy<Value = Volume4D> {
        (1usize..3, 1usize..4, 1usize..5, 1usize..6, any::<bool>()).prop_flat_map(|(t, z, y, x, wide)| {
            let n = t * z * y * x;
            let dims = Dims::new(t, z, y, x);
            if wide {
                prop::collection::vec(any::<u16>(), n)
                    .prop_map(move |d| Volume4D::new(dims, Voxels::U16(d)).unwrap())
                    .boxed()
            } else {
                prop::collection::vec(any::<u8>(), n)
                    .prop_map(move |d| Volume4D::new(dims, Voxels::U8(d)).unwrap())
                    .boxed()
            }
        })
    }

    proptest! {
        #[test]
        fn roundtrip_is_identity(v in arb_volume()) {
            let back = read_volume_from(&encode(&v)[..]).unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
