//! Self-describing binary dataset container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"PFDSET\r\n"
//! 8       2     major version (u16 LE)
//! 10      2     minor version (u16 LE)
//! 12      4     byte-order marker 0x0A0B0C0D (u32 LE)
//! 16      8     header length H (u64 LE)
//! 24      H     header, UTF-8 JSON (see `DatasetHeader`)
//! 24+H    8     CRC-64/ECMA-182 of bytes [0, 24+H) (u64 LE)
//! then per instance, in header order:
//!         8·3·T·nx·ny   f64 LE payload, channel-major: c, eta1, eta2,
//!                       each as T frames of nx·ny values in row-major order
//!         8             CRC-64/ECMA-182 of the payload (u64 LE)
//! ```
//!
//! Nothing may follow the last instance checksum. Readers accept any minor
//! version of a supported major version and ignore unknown header keys.

use std::fs;
use std::path::Path;

use crc::{Crc, CRC_64_ECMA_182};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Instance, InstanceMeta};
use crate::error::{Error, FormatError, Result};
use crate::evolution::{Channel, SimParams, SpatialForm, Trajectory};
use crate::grid::GridSpec;

pub const MAGIC: [u8; 8] = *b"PFDSET\r\n";
pub const VERSION_MAJOR: u16 = 1;
pub const VERSION_MINOR: u16 = 0;
pub const BYTE_ORDER_MARKER: u32 = 0x0A0B_0C0D;
const PREAMBLE_LEN: usize = 24;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_ECMA_182);

pub fn crc64(bytes: &[u8]) -> u64 {
    CRC64.checksum(bytes)
}

/// Metadata block shared by the binary container and the NPY export manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub grid: GridSpec,
    pub frames: usize,
    /// Spacing between saved frames.
    pub dt: f64,
    pub t0: f64,
    pub spatial_form: SpatialForm,
    pub params: SimParams,
    pub channels: Vec<String>,
    pub instances: Vec<InstanceMeta>,
}

impl DatasetHeader {
    pub fn of(dataset: &Dataset) -> Self {
        Self {
            grid: GridSpec::from(dataset.grid().as_ref()),
            frames: dataset.frames(),
            dt: dataset.dt(),
            t0: dataset.start_time(),
            spatial_form: dataset.spatial_form(),
            params: dataset.params().clone(),
            channels: Channel::ALL.iter().map(|c| c.name().to_string()).collect(),
            instances: dataset.metas(),
        }
    }

    pub(crate) fn check(&self) -> std::result::Result<(), FormatError> {
        let expect: Vec<String> = Channel::ALL.iter().map(|c| c.name().to_string()).collect();
        if self.channels != expect {
            return Err(FormatError::Inconsistent(format!(
                "channels {:?}, expected {expect:?}",
                self.channels
            )));
        }
        if self.spatial_form != self.params.ch_spatial_form {
            return Err(FormatError::Inconsistent(format!(
                "spatial_form {} disagrees with params.ch_spatial_form {}",
                self.spatial_form, self.params.ch_spatial_form
            )));
        }
        if self.instances.is_empty() {
            return Err(FormatError::Inconsistent("no instances".into()));
        }
        if self.frames < 2 {
            return Err(FormatError::Inconsistent(format!("{} frames", self.frames)));
        }
        Ok(())
    }

    /// Values per instance (all channels).
    pub(crate) fn instance_values(&self) -> std::result::Result<usize, FormatError> {
        3usize
            .checked_mul(self.frames)
            .and_then(|v| v.checked_mul(self.grid.nx))
            .and_then(|v| v.checked_mul(self.grid.ny))
            .filter(|v| v.checked_mul(8).is_some())
            .ok_or_else(|| FormatError::Inconsistent("instance size overflows".into()))
    }

    /// Rebuilds one instance from its three `(T, nx, ny)` channel stacks.
    pub(crate) fn instance(&self, meta: InstanceMeta, stacks: [Array3<f64>; 3]) -> Result<Instance> {
        let grid = self.grid.build()?;
        let trajectory = Trajectory::from_stacks(grid, stacks, self.t0, self.dt, self.params.clone())?;
        Ok(Instance { meta, trajectory })
    }
}

pub fn to_bytes(dataset: &Dataset) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&DatasetHeader::of(dataset))
        .map_err(|e| Error::invalid(format!("cannot serialize header: {e}")))?;
    let per_instance = 8 * (3 * dataset.frames() * dataset.grid().len() + 1);
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len() + 8 + dataset.len() * per_instance);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION_MAJOR.to_le_bytes());
    out.extend_from_slice(&VERSION_MINOR.to_le_bytes());
    out.extend_from_slice(&BYTE_ORDER_MARKER.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&crc64(&out).to_le_bytes());
    for inst in dataset.instances() {
        let start = out.len();
        for ch in Channel::ALL {
            for frame in inst.trajectory.frames() {
                for v in frame.channel(ch).values().iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let crc = crc64(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| FormatError::Truncated(what.to_string()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> std::result::Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> std::result::Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Decodes and validates the preamble and header; returns the header and the
/// offset of the first payload byte.
pub fn read_header(bytes: &[u8]) -> Result<(DatasetHeader, usize)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8, "magic")? != MAGIC {
        return Err(FormatError::BadMagic.into());
    }
    let major = cur.u16("version")?;
    let minor = cur.u16("version")?;
    if major != VERSION_MAJOR {
        return Err(FormatError::UnsupportedVersion {
            found_major: major,
            found_minor: minor,
            supported_major: VERSION_MAJOR,
        }
        .into());
    }
    let marker = cur.u32("byte-order marker")?;
    if marker != BYTE_ORDER_MARKER {
        return Err(FormatError::ByteOrder(marker).into());
    }
    let header_len = usize::try_from(cur.u64("header length")?)
        .map_err(|_| FormatError::Truncated("header".into()))?;
    let header_bytes = cur.take(header_len, "header")?;
    let covered = cur.pos;
    let stored = cur.u64("header checksum")?;
    let computed = crc64(&bytes[..covered]);
    if stored != computed {
        return Err(FormatError::HeaderChecksum { stored, computed }.into());
    }
    let header: DatasetHeader =
        serde_json::from_slice(header_bytes).map_err(|e| FormatError::Header(e.to_string()))?;
    header.check()?;
    Ok((header, cur.pos))
}

pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let (header, start) = read_header(bytes)?;
    let values = header.instance_values()?;
    let (t, nx, ny) = (header.frames, header.grid.nx, header.grid.ny);
    let mut cur = Cursor { bytes, pos: start };
    // verify every checksum before decoding anything
    let mut payloads = Vec::with_capacity(header.instances.len());
    for (index, meta) in header.instances.iter().enumerate() {
        let what = format!("instance {index} (c0 = {}, seed = {})", meta.c0, meta.seed);
        let payload = cur.take(values * 8, &what)?;
        let stored = cur.u64(&what)?;
        if crc64(payload) != stored {
            return Err(FormatError::InstanceChecksum {
                index,
                c0: meta.c0,
                seed: meta.seed,
            }
            .into());
        }
        payloads.push(payload);
    }
    if cur.pos != bytes.len() {
        return Err(FormatError::Inconsistent(format!(
            "{} trailing bytes after the last instance",
            bytes.len() - cur.pos
        ))
        .into());
    }
    let instances = header
        .instances
        .iter()
        .zip(payloads)
        .map(|(&meta, payload)| {
            let mut floats = payload
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
            let stacks = [0, 1, 2].map(|_| {
                Array3::from_shape_simple_fn((t, nx, ny), || floats.next().expect("sized payload"))
            });
            header.instance(meta, stacks)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(instances)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(dataset)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{run_sweep, SweepPlan, SweepSpec};
    use crate::grid::Grid2D;
    use std::sync::Arc;

    fn small() -> Dataset {
        let spec = SweepSpec {
            supersaturations: vec![0.2, 0.23],
            seeds: vec![494, 7410],
            cross: true,
        };
        let plan = SweepPlan {
            frames: 3,
            substeps: 1,
            noise_amp: 0.01,
        };
        run_sweep(&spec, &SimParams::default(), Arc::new(Grid2D::unit_square(8).unwrap()), &plan).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let ds = small();
        let bytes = to_bytes(&ds).unwrap();
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(to_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn payload_corruption_names_instance() {
        let ds = small();
        let mut bytes = to_bytes(&ds).unwrap();
        let (_, start) = read_header(&bytes).unwrap();
        let per = 8 * (3 * 3 * 64 + 1);
        bytes[start + 2 * per + 17] ^= 0x40;
        match from_bytes(&bytes) {
            Err(Error::Format(FormatError::InstanceChecksum { index, c0, seed })) => {
                assert_eq!(index, 2);
                assert_eq!((c0, seed), (0.23, 494));
            }
            other => panic!("{:?}", other.map(|d| d.len())),
        }
    }

    #[test]
    fn major_version_bump_rejected() {
        let mut bytes = to_bytes(&small()).unwrap();
        bytes[8] = 2;
        assert!(matches!(
            from_bytes(&bytes),
            Err(Error::Format(FormatError::UnsupportedVersion { found_major: 2, .. }))
        ));
    }

    #[test]
    fn distinct_failures_are_distinguished() {
        let bytes = to_bytes(&small()).unwrap();
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(from_bytes(&magic), Err(Error::Format(FormatError::BadMagic))));
        let mut order = bytes.clone();
        order[12..16].copy_from_slice(&BYTE_ORDER_MARKER.to_be_bytes());
        assert!(matches!(from_bytes(&order), Err(Error::Format(FormatError::ByteOrder(_)))));
        let mut header = bytes.clone();
        header[30] ^= 1;
        assert!(matches!(
            from_bytes(&header),
            Err(Error::Format(FormatError::HeaderChecksum { .. }))
        ));
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Format(FormatError::Truncated(_)))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            from_bytes(&long),
            Err(Error::Format(FormatError::Inconsistent(_)))
        ));
    }

    #[test]
    fn newer_minor_version_is_read() {
        let mut bytes = to_bytes(&small()).unwrap();
        bytes[10] = 3;
        let h = bytes.len();
        let (_, start) = read_header(&to_bytes(&small()).unwrap()).unwrap();
        let crc = crc64(&bytes[..start - 8]);
        bytes[start - 8..start].copy_from_slice(&crc.to_le_bytes());
        assert_eq!(bytes.len(), h);
        assert_eq!(from_bytes(&bytes).unwrap(), small());
    }

    #[test]
    fn crc_reference_value() {
        // CRC-64/ECMA-182 check value
        assert_eq!(crc64(b"123456789"), 0x6C40_DF5F_0B49_7347);
    }
}
