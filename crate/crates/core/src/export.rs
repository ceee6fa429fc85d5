//! NPY directory export for tools that do not read the binary container.
//!
//! ```text
//! <dir>/manifest.json            header fields plus `instance_dirs`
//! <dir>/instance_000/c.npy       (T, nx, ny) float64, C order
//! <dir>/instance_000/eta1.npy
//! <dir>/instance_000/eta2.npy
//! ...
//! ```
//!
//! The reader also accepts float32 arrays so predictions written in single
//! precision can be scored directly.

use std::fs;
use std::path::Path;

use ndarray::Array3;
use ndarray_npy::{read_npy, write_npy};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, FormatError, Result};
use crate::evolution::Channel;
use crate::format::DatasetHeader;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const EXPORT_FORMAT: &str = "thetaprime-npy";
pub const EXPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub header: DatasetHeader,
    /// Directory of each instance relative to the manifest, in header order.
    pub instance_dirs: Vec<String>,
}

pub fn instance_dir_name(index: usize) -> String {
    format!("instance_{index:03}")
}

pub fn export_npy(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut dirs = Vec::with_capacity(dataset.len());
    for (i, inst) in dataset.instances().iter().enumerate() {
        let name = instance_dir_name(i);
        let sub = dir.join(&name);
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for ch in Channel::ALL {
            let path = sub.join(format!("{}.npy", ch.name()));
            write_npy(&path, &inst.trajectory.channel_stack(ch))
                .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        }
        dirs.push(name);
    }
    let manifest = ExportManifest {
        format: EXPORT_FORMAT.into(),
        version: EXPORT_VERSION,
        header: DatasetHeader::of(dataset),
        instance_dirs: dirs,
    };
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::invalid(format!("cannot serialize manifest: {e}")))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn read_channel(path: &Path) -> Result<Array3<f64>> {
    match read_npy::<_, Array3<f64>>(path) {
        Ok(a) => Ok(a),
        Err(first) => read_npy::<_, Array3<f32>>(path)
            .map(|a| a.mapv(f64::from))
            .map_err(|_| FormatError::Header(format!("{}: {first}", path.display())).into()),
    }
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<ExportManifest> {
    let path = dir.as_ref().join(MANIFEST_NAME);
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let m: ExportManifest =
        serde_json::from_slice(&text).map_err(|e| FormatError::Header(format!("{}: {e}", path.display())))?;
    if m.format != EXPORT_FORMAT || m.version != EXPORT_VERSION {
        return Err(FormatError::Header(format!(
            "expected {EXPORT_FORMAT} v{EXPORT_VERSION}, found {} v{}",
            m.format, m.version
        ))
        .into());
    }
    m.header.check()?;
    if m.instance_dirs.len() != m.header.instances.len() {
        return Err(FormatError::Inconsistent(format!(
            "{} instance directories for {} instances",
            m.instance_dirs.len(),
            m.header.instances.len()
        ))
        .into());
    }
    Ok(m)
}

pub fn read_export(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let m = read_manifest(dir)?;
    let h = &m.header;
    let shape = (h.frames, h.grid.nx, h.grid.ny);
    let instances = h
        .instances
        .iter()
        .zip(&m.instance_dirs)
        .map(|(&meta, sub)| {
            let mut stacks = Vec::with_capacity(3);
            for ch in Channel::ALL {
                let path = dir.join(sub).join(format!("{}.npy", ch.name()));
                let a = read_channel(&path)?;
                if a.dim() != shape {
                    return Err(FormatError::Inconsistent(format!(
                        "{} has shape {:?}, manifest says {shape:?}",
                        path.display(),
                        a.dim()
                    ))
                    .into());
                }
                stacks.push(a);
            }
            let stacks: [Array3<f64>; 3] = stacks.try_into().expect("three channels");
            h.instance(meta, stacks)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(instances)
}
