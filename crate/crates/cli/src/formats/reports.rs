//! Report writers: the training log, the pose-metrics table, and the offset
//! histograms. All CSV, all floats in Rust's shortest round-trip decimal
//! form, so identical runs write identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use subpix_core::train::BatchStats;

use crate::error::CliError;

pub const TRAIN_LOG_HEADER: &str = "step,loss,inlier_frac,mean_epi_px_refined,mean_epi_px_unrefined";
pub const METRICS_HEADER: &str = "pair_id,pose_err_deg,inlier_ratio,n_inliers";
pub const SUMMARY_HEADER: &str = "auc5,auc10,auc20,mean,median,mean_inlier_ratio";

/// Training log, written incrementally so a crashed run still leaves the
/// rows it earned.
pub struct TrainLog {
    out: BufWriter<File>,
}

impl TrainLog {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{TRAIN_LOG_HEADER}").map_err(|e| CliError::io(path, e))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, path: &Path, step: u64, stats: &BatchStats) -> Result<(), CliError> {
        writeln!(
            self.out,
            "{step},{},{},{},{}",
            stats.loss, stats.inlier_frac, stats.mean_epi_px_refined, stats.mean_epi_px_unrefined
        )
        .map_err(|e| CliError::io(path, e))
    }

    pub fn finish(mut self, path: &Path) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(path, e))
    }
}

/// One evaluated image pair, repeat-averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub pair_id: u64,
    pub pose_err_deg: f64,
    pub inlier_ratio: f64,
    pub n_inliers: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub auc5: f64,
    pub auc10: f64,
    pub auc20: f64,
    pub mean: f64,
    pub median: f64,
    pub mean_inlier_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<PairRow>,
    pub summary: EvalSummary,
}

impl MetricsReport {
    /// Per-pair rows, then the summary block: its own header line followed
    /// by one line of values.
    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| CliError::io(path, e);
        writeln!(out, "{METRICS_HEADER}").map_err(io)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                r.pair_id, r.pose_err_deg, r.inlier_ratio, r.n_inliers
            )
            .map_err(io)?;
        }
        let s = &self.summary;
        writeln!(out, "{SUMMARY_HEADER}").map_err(io)?;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.auc5, s.auc10, s.auc20, s.mean, s.median, s.mean_inlier_ratio
        )
        .map_err(io)?;
        out.flush().map_err(io)
    }

    /// One-line rendering for the terminal. AUC values are printed in
    /// points (x100) because that is how they read in the literature.
    pub fn human_line(&self, label: &str) -> String {
        let s = &self.summary;
        format!(
            "{label:<10} auc5 {:6.2}  auc10 {:6.2}  auc20 {:6.2}  mean {:8.3} deg  median {:8.3} deg  inlier ratio {:.3}",
            s.auc5 * 100.0,
            s.auc10 * 100.0,
            s.auc20 * 100.0,
            s.mean,
            s.median,
            s.mean_inlier_ratio
        )
    }
}

/// One histogram row covering `[lo, hi)`; the final length row is closed on
/// the right because it ends at the geometric maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

pub const LENGTH_BIN_WIDTH: f64 = 0.25;
pub const LENGTH_RANGE_END: f64 = 5.0;
pub const ORIENTATION_BIN_DEG: f64 = 15.0;

/// Length histogram over offset vectors: 0.25 px bins across [0, 5], plus
/// one overflow row for the diagonal tail. Components are bounded by 5 px
/// each, so lengths reach at most 5 * sqrt(2).
pub fn offset_length_histogram(offsets: &[[f64; 2]]) -> Vec<HistogramBin> {
    let regular = (LENGTH_RANGE_END / LENGTH_BIN_WIDTH) as usize;
    let max_len = LENGTH_RANGE_END * 2.0f64.sqrt();
    let mut bins: Vec<HistogramBin> = (0..regular)
        .map(|k| HistogramBin {
            lo: k as f64 * LENGTH_BIN_WIDTH,
            hi: (k + 1) as f64 * LENGTH_BIN_WIDTH,
            count: 0,
        })
        .collect();
    bins.push(HistogramBin {
        lo: LENGTH_RANGE_END,
        hi: max_len,
        count: 0,
    });
    for d in offsets {
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let idx = if len >= LENGTH_RANGE_END {
            regular
        } else {
            (len / LENGTH_BIN_WIDTH) as usize
        };
        bins[idx].count += 1;
    }
    bins
}

/// Orientation histogram: 15 degree bins across [0, 360). Zero-length
/// offsets carry no direction and are left out; callers report how many.
pub fn offset_orientation_histogram(offsets: &[[f64; 2]]) -> (Vec<HistogramBin>, u64) {
    let n = (360.0 / ORIENTATION_BIN_DEG) as usize;
    let mut bins: Vec<HistogramBin> = (0..n)
        .map(|k| HistogramBin {
            lo: k as f64 * ORIENTATION_BIN_DEG,
            hi: (k + 1) as f64 * ORIENTATION_BIN_DEG,
            count: 0,
        })
        .collect();
    let mut zero_length = 0u64;
    for d in offsets {
        if d[0] == 0.0 && d[1] == 0.0 {
            zero_length += 1;
            continue;
        }
        let mut angle = d[1].atan2(d[0]).to_degrees();
        if angle < 0.0 {
            angle += 360.0;
        }
        let idx = ((angle / ORIENTATION_BIN_DEG) as usize).min(n - 1);
        bins[idx].count += 1;
    }
    (bins, zero_length)
}

/// Histogram CSV: `#` comment lines describing conventions, then a header,
/// then one row per bin.
pub fn write_histogram_csv(
    path: &Path,
    comments: &[&str],
    columns: &str,
    bins: &[HistogramBin],
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    writeln!(out, "{columns}").map_err(io)?;
    for b in bins {
        writeln!(out, "{},{},{}", b.lo, b.hi, b.count).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_bins_conserve_every_offset() {
        let offsets = vec![[0.0, 0.0], [0.1, 0.2], [3.0, 2.0], [5.0, 5.0], [4.9, 0.0]];
        let bins = offset_length_histogram(&offsets);
        assert_eq!(bins.len(), 21);
        let total: u64 = bins.iter().map(|b| b.count).sum();
        assert_eq!(total, offsets.len() as u64);
        assert_eq!(bins[0].count, 2);
        assert_eq!(bins.last().unwrap().count, 1);
    }

    #[test]
    fn zero_offsets_fill_the_first_length_bin_only() {
        let offsets = vec![[0.0, 0.0]; 7];
        let bins = offset_length_histogram(&offsets);
        assert_eq!(bins[0].count, 7);
        assert!(bins[1..].iter().all(|b| b.count == 0));
    }

    #[test]
    fn orientation_excludes_zero_length_and_places_east_at_zero() {
        let offsets = vec![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, -1.0]];
        let (bins, zero) = offset_orientation_histogram(&offsets);
        assert_eq!(zero, 1);
        assert_eq!(bins.len(), 24);
        assert_eq!(bins[0].count, 1);
        assert_eq!(bins[12].count, 1);
        assert_eq!(bins[18].count, 1);
        let total: u64 = bins.iter().map(|b| b.count).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn boundary_lengths_round_into_the_upper_bin() {
        let bins = offset_length_histogram(&[[0.25, 0.0]]);
        assert_eq!(bins[0].count, 0);
        assert_eq!(bins[1].count, 1);
    }
}
