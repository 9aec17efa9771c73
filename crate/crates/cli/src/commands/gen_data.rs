//! `gen-data`: materialize a synthetic correspondence dataset.

use std::path::PathBuf;

use clap::Args;
use subpix_core::synth::SampleGenerator;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::formats::dataset::{self, DatasetRecord};

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output dataset path (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Number of correspondence records to generate.
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    /// Scene seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of records generated as mismatches, in [0, 1).
    #[arg(long)]
    pub outlier_fraction: Option<f64>,
    /// Matches per image pair; records are grouped in runs of this size.
    #[arg(long)]
    pub num_points: Option<usize>,
    /// Descriptor vector length.
    #[arg(long)]
    pub descriptor_dim: Option<usize>,
}

pub fn run(mut cfg: RunConfig, args: &GenDataArgs) -> Result<(), CliError> {
    if let Some(seed) = args.seed {
        cfg.scene.seed = seed;
    }
    if let Some(f) = args.outlier_fraction {
        cfg.scene.outlier_fraction = f;
    }
    if let Some(n) = args.num_points {
        cfg.scene.num_points = n;
    }
    if let Some(d) = args.descriptor_dim {
        cfg.scene.descriptor_dim = d;
    }
    cfg.validate()?;
    cfg.echo();

    let gen = SampleGenerator::new(cfg.scene.clone()).map_err(CliError::usage)?;
    let digest = dataset::write(
        &args.out,
        (0..args.n).map(|id| {
            let sample = gen
                .generate(id)
                .map_err(|e| CliError::runtime(format!("sample {id}: {e}")))?;
            Ok(DatasetRecord::from_sample(&sample))
        }),
    )?;
    println!("records {}  sha256 {digest}", args.n);
    Ok(())
}
