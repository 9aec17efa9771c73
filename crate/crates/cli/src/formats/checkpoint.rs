//! Checkpoints: a JSON manifest next to a raw float buffer.
//!
//! The manifest names the network configuration, the layer shapes with
//! their byte offsets, the optimizer step, and a SHA-256 digest of the
//! buffer. The buffer holds every parameter as little-endian f32 in the
//! canonical flat order (per layer kernels then bias, head last), followed
//! by the Adam first moments and then the second moments, each the same
//! length as the parameters. Digest verification makes silent corruption
//! impossible; round-trips are bit-exact because f32 bits pass through
//! untouched in both directions.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subpix_core::net::{NetworkWeights, RefineConfig};
use subpix_core::tensor::AdamState;

use crate::error::CliError;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerEntry {
    /// (out_channels, in_channels, 3, 3)
    kernel: [usize; 4],
    kernel_offset: u64,
    bias: usize,
    bias_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HeadEntry {
    len: usize,
    offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MomentsEntry {
    len: usize,
    m_offset: u64,
    v_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    refine: RefineConfig,
    /// Completed optimizer steps at save time.
    step: u64,
    param_count: usize,
    layers: Vec<LayerEntry>,
    head: Option<HeadEntry>,
    moments: MomentsEntry,
    /// Buffer file name, resolved relative to the manifest's directory.
    data_file: String,
    data_bytes: u64,
    sha256: String,
}

/// The buffer lives next to the manifest under the same stem. A manifest
/// `run.ckpt.json` gets `run.ckpt.bin`.
fn buffer_name(manifest_path: &Path) -> Result<String, CliError> {
    let stem = manifest_path
        .file_stem()
        .ok_or_else(|| CliError::usage(format!("{}: not a file path", manifest_path.display())))?;
    Ok(format!("{}.bin", stem.to_string_lossy()))
}

fn le_bytes(values: &[f32], out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn from_le_bytes(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn layer_table(weights: &NetworkWeights<f32>) -> (Vec<LayerEntry>, Option<HeadEntry>) {
    let mut offset = 0u64;
    let mut layers = Vec::with_capacity(weights.layers.len());
    for l in &weights.layers {
        let kernel_offset = offset;
        offset += (l.kernels.len() * 4) as u64;
        let bias_offset = offset;
        offset += (l.bias.len() * 4) as u64;
        layers.push(LayerEntry {
            kernel: [l.out_c, l.in_c, 3, 3],
            kernel_offset,
            bias: l.bias.len(),
            bias_offset,
        });
    }
    let head = weights.head.as_ref().map(|h| HeadEntry {
        len: h.len(),
        offset,
    });
    (layers, head)
}

/// Writes the manifest at `path` and the parameter buffer next to it.
pub fn save(
    path: &Path,
    refine: &RefineConfig,
    weights: &NetworkWeights<f32>,
    adam: &AdamState<f32>,
) -> Result<(), CliError> {
    refine.validate().map_err(CliError::usage)?;
    let mut flat = Vec::with_capacity(weights.param_count());
    weights.flatten_into(&mut flat);
    if adam.m.len() != flat.len() || adam.v.len() != flat.len() {
        return Err(CliError::runtime(
            "optimizer moments do not match the parameter count",
        ));
    }

    let mut buffer = Vec::with_capacity(flat.len() * 12);
    le_bytes(&flat, &mut buffer);
    let m_offset = buffer.len() as u64;
    le_bytes(&adam.m, &mut buffer);
    let v_offset = buffer.len() as u64;
    le_bytes(&adam.v, &mut buffer);

    let (layers, head) = layer_table(weights);
    let data_file = buffer_name(path)?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        refine: refine.clone(),
        step: adam.step,
        param_count: flat.len(),
        layers,
        head,
        moments: MomentsEntry {
            len: flat.len(),
            m_offset,
            v_offset,
        },
        data_file: data_file.clone(),
        data_bytes: buffer.len() as u64,
        sha256: format!("{:x}", Sha256::digest(&buffer)),
    };

    let dir = path.parent().unwrap_or_else(|| Path::new(""));
    fs::write(dir.join(&data_file), &buffer).map_err(|e| CliError::io(path, e))?;
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::runtime(format!("serializing manifest: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Reads a checkpoint back. The digest is verified before anything is
/// decoded, so a corrupt buffer can never masquerade as a network.
pub fn load(path: &Path) -> Result<(RefineConfig, NetworkWeights<f32>, AdamState<f32>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        CliError::runtime(format!("{}: corrupt manifest: {e}", path.display()))
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CliError::runtime(format!(
            "{}: unsupported checkpoint format {}",
            path.display(),
            manifest.format_version
        )));
    }
    manifest.refine.validate().map_err(|e| {
        CliError::runtime(format!(
            "{}: manifest carries an invalid network configuration: {e}",
            path.display()
        ))
    })?;

    let buffer_path: PathBuf = path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&manifest.data_file);
    let buffer = fs::read(&buffer_path).map_err(|e| CliError::io(&buffer_path, e))?;
    if buffer.len() as u64 != manifest.data_bytes
        || buffer.len() != manifest.param_count * 12
    {
        return Err(CliError::runtime(format!(
            "{}: parameter buffer is {} bytes, manifest expects {}",
            buffer_path.display(),
            buffer.len(),
            manifest.data_bytes
        )));
    }
    let digest = format!("{:x}", Sha256::digest(&buffer));
    if digest != manifest.sha256 {
        return Err(CliError::runtime(format!(
            "{}: checksum mismatch, checkpoint is corrupt",
            buffer_path.display()
        )));
    }

    let n = manifest.param_count;
    let params = from_le_bytes(&buffer[..n * 4]);
    let m = from_le_bytes(&buffer[n * 4..n * 8]);
    let v = from_le_bytes(&buffer[n * 8..]);

    let mut weights = NetworkWeights::<f32>::init(&manifest.refine, 0)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    if weights.param_count() != n {
        return Err(CliError::runtime(format!(
            "{}: manifest claims {} parameters, the configuration implies {}",
            path.display(),
            n,
            weights.param_count()
        )));
    }
    weights
        .assign_from_flat(&params)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;

    let mut adam = AdamState::<f32>::new(n);
    adam.m = m;
    adam.v = v;
    adam.step = manifest.step;
    Ok((manifest.refine, weights, adam))
}
