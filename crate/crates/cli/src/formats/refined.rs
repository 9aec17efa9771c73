//! Refined-match records: the per-correspondence output of running a
//! checkpoint over a dataset. JSON lines, same float conventions as the
//! dataset format. `skipped` marks matches that passed through unrefined
//! because their patch buffers were empty; their deltas are zero and the
//! refined points equal the detections.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use subpix_core::net::RefinedMatch;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinedRecord {
    pub sample_id: u64,
    pub delta1: [f64; 2],
    pub delta2: [f64; 2],
    pub p1_refined: [f64; 2],
    pub p2_refined: [f64; 2],
    pub skipped: bool,
}

impl RefinedRecord {
    pub fn new(sample_id: u64, m: &RefinedMatch, skipped: bool) -> Self {
        Self {
            sample_id,
            delta1: m.delta1,
            delta2: m.delta2,
            p1_refined: [m.p1_refined.x, m.p1_refined.y],
            p2_refined: [m.p2_refined.x, m.p2_refined.y],
            skipped,
        }
    }
}

pub fn read(path: &Path) -> Result<Vec<RefinedRecord>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let record: RefinedRecord = serde_json::from_str(&line).map_err(|e| {
            CliError::runtime(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write(path: &Path, records: &[RefinedRecord]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| CliError::runtime(format!("serializing refined match: {e}")))?;
        out.write_all(line.as_bytes())
            .map_err(|e| CliError::io(path, e))?;
        out.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}
