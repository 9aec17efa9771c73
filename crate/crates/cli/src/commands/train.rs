//! `train`: run the optimization loop over a dataset file, producing a
//! checkpoint and a CSV log.
//!
//! Training state is f32, like the checkpoint format. Resume is bit-exact:
//! a run resumed at step s walks the same shuffled batch schedule an
//! uninterrupted run would, because the schedule is a pure function of the
//! seed and the completed-step counter stored in the checkpoint.

use std::path::{Path, PathBuf};

use clap::Args;
use subpix_core::net::{NetworkWeights, Variant};
use subpix_core::tensor::AdamState;
use subpix_core::train::{TrainError, Trainer};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::formats::reports::TrainLog;
use crate::formats::{checkpoint, dataset};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Final checkpoint path. Cadence checkpoints insert the step count
    /// before the extension.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Training log CSV path.
    #[arg(long, value_name = "FILE")]
    pub log: PathBuf,
    /// Optimization steps.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Training seed (weight initialization and batch shuffling).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Network variant: full, cnn-dg, cnn-only, or sam-only.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    /// Continue from a saved checkpoint instead of initializing.
    #[arg(long, value_name = "FILE")]
    pub resume: Option<PathBuf>,
}

/// Accepts the dashed spelling flags use and the underscored spelling the
/// config file uses.
pub fn parse_variant(s: &str) -> Result<Variant, String> {
    match s.replace('_', "-").as_str() {
        "full" => Ok(Variant::Full),
        "cnn-dg" => Ok(Variant::CnnDg),
        "cnn-only" => Ok(Variant::CnnOnly),
        "sam-only" => Ok(Variant::SamOnly),
        _ => Err(format!(
            "unknown variant '{s}', expected full, cnn-dg, cnn-only, or sam-only"
        )),
    }
}

/// Inserts a tag before the path's extension: `ck.json` tagged `step100`
/// becomes `ck.step100.json`.
fn tagged_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

/// Dataset incompatibilities and configuration problems are usage errors;
/// anything that breaks mid-run is a runtime failure.
fn classify(e: TrainError) -> CliError {
    match &e {
        TrainError::Config(_) | TrainError::BadSample { .. } | TrainError::Net(_) => {
            CliError::usage(e)
        }
        _ => CliError::runtime(e),
    }
}

pub fn run(mut cfg: RunConfig, args: &TrainArgs) -> Result<(), CliError> {
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(lr) = args.lr {
        cfg.train.lr = lr;
    }
    if let Some(variant) = args.variant {
        cfg.refine.variant = variant;
    }
    cfg.validate()?;
    cfg.echo();
    let train_cfg = cfg.train.with_refine(cfg.refine.clone());
    let refine = &train_cfg.refine;

    // The parameterless variant has nothing to optimize. Write the state it
    // always has, plus an empty log, so downstream commands find their
    // inputs in the usual places.
    if !refine.variant.has_network() {
        eprintln!(
            "variant {} has no trainable parameters; skipping training and writing the empty state",
            refine.variant.name()
        );
        let weights = NetworkWeights::<f32>::init(refine, train_cfg.seed).map_err(CliError::usage)?;
        checkpoint::save(&args.checkpoint, refine, &weights, &AdamState::new(0))?;
        TrainLog::create(&args.log)?.finish(&args.log)?;
        println!("checkpoint {}", args.checkpoint.display());
        return Ok(());
    }

    // Zero steps short-circuits before the trainer, which insists on a
    // positive step count: the requested artifact is the initial (or
    // resumed) state itself.
    if train_cfg.steps == 0 {
        let (weights, adam) = match &args.resume {
            Some(path) => {
                let (ck_refine, weights, adam) = checkpoint::load(path)?;
                check_refine_matches(&ck_refine, refine)?;
                (weights, adam)
            }
            None => {
                let weights =
                    NetworkWeights::<f32>::init(refine, train_cfg.seed).map_err(CliError::usage)?;
                let adam = AdamState::new(weights.param_count());
                (weights, adam)
            }
        };
        checkpoint::save(&args.checkpoint, refine, &weights, &adam)?;
        TrainLog::create(&args.log)?.finish(&args.log)?;
        println!("checkpoint {}", args.checkpoint.display());
        return Ok(());
    }

    let data = dataset::read(&args.dataset)?;
    if data.is_empty() {
        return Err(CliError::runtime(format!(
            "{}: dataset is empty",
            args.dataset.display()
        )));
    }

    let mut trainer: Trainer<f32> = match &args.resume {
        Some(path) => {
            let (ck_refine, weights, adam) = checkpoint::load(path)?;
            check_refine_matches(&ck_refine, refine)?;
            Trainer::from_state(train_cfg.clone(), weights, adam).map_err(classify)?
        }
        None => Trainer::new(train_cfg.clone()).map_err(classify)?,
    };

    let steps = train_cfg.steps;
    let mut log = TrainLog::create(&args.log)?;
    while trainer.completed_steps() < steps {
        let stats = match trainer.run_step(&data) {
            Ok(stats) => stats,
            Err(TrainError::NonFiniteLoss { step }) => {
                // Abort happens before the update, so the trainer still
                // holds the last finite state. Snapshot it for inspection.
                let diag = tagged_path(&args.checkpoint, "diag");
                checkpoint::save(&diag, refine, trainer.weights(), trainer.adam_state())?;
                log.finish(&args.log)?;
                return Err(CliError::runtime(format!(
                    "loss became non-finite at step {step}; last finite state saved to {}",
                    diag.display()
                )));
            }
            Err(e) => return Err(classify(e)),
        };
        let step = trainer.completed_steps();
        if stats.excluded > 0 {
            eprintln!(
                "step {step}: excluded {} matches with degenerate epipolar denominators",
                stats.excluded
            );
        }
        if step % train_cfg.log_every == 0 || step == steps {
            log.row(&args.log, step, &stats)?;
        }
        if step % train_cfg.checkpoint_every == 0 && step != steps {
            let path = tagged_path(&args.checkpoint, &format!("step{step}"));
            checkpoint::save(&path, refine, trainer.weights(), trainer.adam_state())?;
        }
    }
    checkpoint::save(&args.checkpoint, refine, trainer.weights(), trainer.adam_state())?;
    log.finish(&args.log)?;
    println!(
        "trained to step {steps}; checkpoint {}",
        args.checkpoint.display()
    );
    Ok(())
}

fn check_refine_matches(from_checkpoint: &subpix_core::net::RefineConfig, run: &subpix_core::net::RefineConfig) -> Result<(), CliError> {
    if from_checkpoint != run {
        return Err(CliError::usage(
            "checkpoint network configuration does not match this run; \
             pass the [refine] settings the checkpoint was trained with",
        ));
    }
    Ok(())
}
