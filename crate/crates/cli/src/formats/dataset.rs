//! Dataset records: one JSON object per line, one line per correspondence.
//!
//! The line layout is flat on purpose. Patches and scores are row-major
//! float arrays, matrices are row-major 9-vectors, intrinsics are spelled
//! out as scalars. Nothing in a record needs the generator to be read back,
//! so datasets produced elsewhere work too, as long as they satisfy the
//! same shape rules. Floats serialize in shortest round-trip decimal form,
//! which `serde_json` guarantees, so write, read, write is byte-stable.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use subpix_core::geometry::{CameraIntrinsics, EssentialMatrix, PixelPoint, RelativePose};
use subpix_core::synth::TwoViewSample;

use crate::error::CliError;

type Matrix3 = nalgebra::Matrix3<f64>;
type Vector3 = nalgebra::Vector3<f64>;

/// Serialized form of one correspondence. Field names and meanings are the
/// interchange contract; field order here fixes the key order in every
/// emitted line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub sample_id: u64,
    /// Image patch around the view-1 keypoint, row-major, empty when the
    /// window would cross the image border (the match then passes through
    /// refinement untouched).
    pub patch1: Vec<f64>,
    pub patch2: Vec<f64>,
    /// Detector score patches, same layout and same border convention.
    pub score1: Vec<f64>,
    pub score2: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub true1: [f64; 2],
    pub true2: [f64; 2],
    pub quantized1: [f64; 2],
    pub quantized2: [f64; 2],
    pub fx1: f64,
    pub fy1: f64,
    pub cx1: f64,
    pub cy1: f64,
    pub fx2: f64,
    pub fy2: f64,
    pub cx2: f64,
    pub cy2: f64,
    #[serde(rename = "E")]
    pub e: [f64; 9],
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
    pub is_outlier: bool,
}

fn row_major(m: &Matrix3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = m[(r, c)];
        }
    }
    out
}

fn from_row_major(v: &[f64; 9]) -> Matrix3 {
    Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8])
}

impl DatasetRecord {
    pub fn from_sample(s: &TwoViewSample) -> Self {
        Self {
            sample_id: s.sample_id,
            patch1: s.image1.clone(),
            patch2: s.image2.clone(),
            score1: s.score1.clone(),
            score2: s.score2.clone(),
            d1: s.d1.clone(),
            d2: s.d2.clone(),
            true1: [s.true1.x, s.true1.y],
            true2: [s.true2.x, s.true2.y],
            quantized1: [s.quantized1.x, s.quantized1.y],
            quantized2: [s.quantized2.x, s.quantized2.y],
            fx1: s.k1.fx,
            fy1: s.k1.fy,
            cx1: s.k1.cx,
            cy1: s.k1.cy,
            fx2: s.k2.fx,
            fy2: s.k2.fy,
            cx2: s.k2.cx,
            cy2: s.k2.cy,
            e: row_major(s.gt_e.matrix()),
            r: row_major(&s.gt_pose.rotation),
            t: [
                s.gt_pose.translation.x,
                s.gt_pose.translation.y,
                s.gt_pose.translation.z,
            ],
            is_outlier: s.is_outlier,
        }
    }

    /// Rebuilds the in-memory sample, checking the shape rules: patch
    /// buffers all empty (a border-skipped match) or all square with one
    /// odd side, matching descriptor lengths, valid intrinsics, a proper
    /// rotation with unit translation.
    pub fn to_sample(&self) -> Result<TwoViewSample, String> {
        let patch_side = patch_side(&self.patch1, &self.patch2, &self.score1, &self.score2)?;
        if self.d1.len() != self.d2.len() {
            return Err(format!(
                "descriptor lengths differ ({} vs {})",
                self.d1.len(),
                self.d2.len()
            ));
        }
        let k1 = CameraIntrinsics::new(self.fx1, self.fy1, self.cx1, self.cy1)
            .map_err(|e| format!("view-1 intrinsics: {e}"))?;
        let k2 = CameraIntrinsics::new(self.fx2, self.fy2, self.cx2, self.cy2)
            .map_err(|e| format!("view-2 intrinsics: {e}"))?;
        let gt_pose = RelativePose::new(
            from_row_major(&self.r),
            Vector3::new(self.t[0], self.t[1], self.t[2]),
        )
        .map_err(|e| format!("pose: {e}"))?;
        let gt_e = EssentialMatrix::from_matrix_unchecked(from_row_major(&self.e));
        Ok(TwoViewSample {
            sample_id: self.sample_id,
            patch_side,
            image1: self.patch1.clone(),
            score1: self.score1.clone(),
            image2: self.patch2.clone(),
            score2: self.score2.clone(),
            d1: self.d1.clone(),
            d2: self.d2.clone(),
            true1: PixelPoint::new(self.true1[0], self.true1[1]),
            true2: PixelPoint::new(self.true2[0], self.true2[1]),
            quantized1: PixelPoint::new(self.quantized1[0], self.quantized1[1]),
            quantized2: PixelPoint::new(self.quantized2[0], self.quantized2[1]),
            k1,
            k2,
            gt_pose,
            gt_e,
            is_outlier: self.is_outlier,
        })
    }
}

/// Side length shared by all four patch buffers, 0 for a border-skipped
/// record with empty buffers.
fn patch_side(p1: &[f64], p2: &[f64], s1: &[f64], s2: &[f64]) -> Result<usize, String> {
    let n = p1.len();
    if p2.len() != n || s1.len() != n || s2.len() != n {
        return Err("patch and score buffers disagree in length".into());
    }
    if n == 0 {
        return Ok(0);
    }
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n || side % 2 == 0 {
        return Err(format!("patch length {n} is not an odd square"));
    }
    Ok(side)
}

/// Streams a dataset file into memory. Line numbers in errors are 1-based.
pub fn read(path: &Path) -> Result<Vec<TwoViewSample>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(&line).map_err(|e| {
            CliError::runtime(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        let sample = record.to_sample().map_err(|e| {
            CliError::runtime(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Writes records produced by an iterator, hashing the bytes as they go
/// out. Returns the hex digest of the whole file.
pub fn write(
    path: &Path,
    records: impl Iterator<Item = Result<DatasetRecord, CliError>>,
) -> Result<String, CliError> {
    use sha2::{Digest, Sha256};
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut hasher = Sha256::new();
    for record in records {
        let mut line = serde_json::to_string(&record?)
            .map_err(|e| CliError::runtime(format!("serializing record: {e}")))?;
        line.push('\n');
        hasher.update(line.as_bytes());
        out.write_all(line.as_bytes())
            .map_err(|e| CliError::io(path, e))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))?;
    Ok(format!("{:x}", hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use subpix_core::synth::{SampleGenerator, SceneConfig};

    fn tiny_scene() -> SceneConfig {
        SceneConfig {
            num_points: 4,
            descriptor_dim: 8,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn record_round_trips_through_json() {
        let gen = SampleGenerator::new(tiny_scene()).unwrap();
        let sample = gen.generate(3).unwrap();
        let record = DatasetRecord::from_sample(&sample);
        let line = serde_json::to_string(&record).unwrap();
        let back: DatasetRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, record);
        let rebuilt = back.to_sample().unwrap();
        assert_eq!(rebuilt.quantized1, sample.quantized1);
        assert_eq!(rebuilt.gt_e.matrix(), sample.gt_e.matrix());
        assert_eq!(rebuilt.patch_side, sample.patch_side);
    }

    #[test]
    fn matrices_serialize_row_major() {
        let m = Matrix3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0);
        assert_eq!(row_major(&m), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(from_row_major(&row_major(&m)), m);
    }

    #[test]
    fn empty_buffers_mean_border_skip() {
        let gen = SampleGenerator::new(tiny_scene()).unwrap();
        let mut record = DatasetRecord::from_sample(&gen.generate(0).unwrap());
        record.patch1 = Vec::new();
        record.patch2 = Vec::new();
        record.score1 = Vec::new();
        record.score2 = Vec::new();
        let sample = record.to_sample().unwrap();
        assert_eq!(sample.patch_side, 0);
        assert!(sample.image1.is_empty());
    }

    #[test]
    fn ragged_buffers_are_rejected() {
        let gen = SampleGenerator::new(tiny_scene()).unwrap();
        let mut record = DatasetRecord::from_sample(&gen.generate(0).unwrap());
        record.score2.pop();
        assert!(record.to_sample().is_err());
        record.score2 = Vec::new();
        assert!(record.to_sample().is_err());
    }
}
