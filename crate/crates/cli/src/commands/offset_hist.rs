//! `offset-hist`: length and orientation histograms over refined offsets.
//!
//! Each non-skipped match contributes both of its offset vectors, one per
//! view; the histograms describe how far and in which direction refined
//! keypoints moved. Skipped matches never ran the network and are left
//! out entirely.

use std::path::PathBuf;

use clap::Args;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::formats::refined;
use crate::formats::reports::{
    offset_length_histogram, offset_orientation_histogram, write_histogram_csv,
};

#[derive(Debug, Args)]
pub struct OffsetHistArgs {
    /// Refined matches from `refine` (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub refined: PathBuf,
    /// Output CSV for the length histogram.
    #[arg(long, value_name = "FILE")]
    pub out_length: PathBuf,
    /// Output CSV for the orientation histogram.
    #[arg(long, value_name = "FILE")]
    pub out_orientation: PathBuf,
}

pub fn run(cfg: RunConfig, args: &OffsetHistArgs) -> Result<(), CliError> {
    cfg.validate()?;
    cfg.echo();
    let records = refined::read(&args.refined)?;
    let offsets: Vec<[f64; 2]> = records
        .iter()
        .filter(|r| !r.skipped)
        .flat_map(|r| [r.delta1, r.delta2])
        .collect();
    if offsets.is_empty() {
        return Err(CliError::runtime(format!(
            "{}: no refined offsets to histogram",
            args.refined.display()
        )));
    }

    let length = offset_length_histogram(&offsets);
    write_histogram_csv(
        &args.out_length,
        &[
            "offset length histogram, 0.25 px bins over [0, 5]",
            "final row collects the diagonal tail [5, 5*sqrt(2)]; components are bounded by 5 px",
            "one entry per refined keypoint offset, two per non-skipped match",
        ],
        "lo_px,hi_px,count",
        &length,
    )?;

    let (orientation, zero_length) = offset_orientation_histogram(&offsets);
    write_histogram_csv(
        &args.out_orientation,
        &[
            "offset orientation histogram, 15 degree bins over [0, 360)",
            "zero-length offsets have no orientation and are excluded",
            "one entry per refined keypoint offset, two per non-skipped match",
        ],
        "lo_deg,hi_deg,count",
        &orientation,
    )?;

    println!(
        "histogrammed {} offsets ({} zero-length excluded from orientation)",
        offsets.len(),
        zero_length
    );
    Ok(())
}
