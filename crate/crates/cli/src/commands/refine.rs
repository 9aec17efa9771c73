//! `refine`: run a checkpoint over a dataset and write the refined matches.
//!
//! The checkpoint's embedded network configuration governs the pass; the
//! `[refine]` section of the run configuration plays no part here, which
//! keeps a checkpoint usable without reconstructing the file it was
//! trained from.

use std::path::PathBuf;

use clap::Args;
use subpix_core::train::refine_sample;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::formats::refined::RefinedRecord;
use crate::formats::{checkpoint, dataset, refined};

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Trained checkpoint manifest.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Dataset to refine (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Output refined-matches path (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn run(cfg: RunConfig, args: &RefineArgs) -> Result<(), CliError> {
    cfg.validate()?;
    cfg.echo();
    let (refine, weights, _) = checkpoint::load(&args.checkpoint)?;
    let data = dataset::read(&args.dataset)?;

    let mut records = Vec::with_capacity(data.len());
    let mut skipped = 0u64;
    for s in &data {
        if !s.image1.is_empty() && s.patch_side != refine.input_patch {
            return Err(CliError::usage(format!(
                "sample {}: dataset patches are {side}x{side} pixels but the checkpoint expects {want}x{want}",
                s.sample_id,
                side = s.patch_side,
                want = refine.input_patch
            )));
        }
        if refine.variant.uses_descriptors() && s.d1.len() != refine.descriptor_dim {
            return Err(CliError::usage(format!(
                "sample {}: dataset descriptors have dimension {} but the checkpoint expects {}",
                s.sample_id,
                s.d1.len(),
                refine.descriptor_dim
            )));
        }
        let (m, skip) = refine_sample::<f32>(&weights, &refine, s).map_err(CliError::usage)?;
        skipped += skip as u64;
        records.push(RefinedRecord::new(s.sample_id, &m, skip));
    }
    refined::write(&args.out, &records)?;
    println!(
        "refined {} matches ({} skipped at borders)",
        records.len(),
        skipped
    );
    Ok(())
}
