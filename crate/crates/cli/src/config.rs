//! Declarative run configuration. One TOML document with a section per
//! subsystem, every field defaulted, command-line flags layered on top.
//! After merging, the canonical form is echoed to stderr so any run can be
//! reproduced from its own transcript: feed the echoed document back with
//! `--config` and the same inputs give the same outputs.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use subpix_core::estimator::RansacConfig;
use subpix_core::net::RefineConfig;
use subpix_core::synth::SceneConfig;
use subpix_core::train::TrainConfig;

use crate::error::CliError;

/// Training-loop settings as they appear in the `[train]` section. The core
/// trainer config embeds the network description; here the network lives in
/// its own `[refine]` section instead, so the loop fields are mirrored
/// rather than the whole struct. [`TrainSection::with_refine`] marries the
/// two back together at execution time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub t_px: f64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub log_every: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            steps: t.steps,
            batch_size: t.batch_size,
            lr: t.lr,
            t_px: t.t_px,
            seed: t.seed,
            checkpoint_every: t.checkpoint_every,
            log_every: t.log_every,
        }
    }
}

impl TrainSection {
    pub fn with_refine(&self, refine: RefineConfig) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            lr: self.lr,
            t_px: self.t_px,
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
            log_every: self.log_every,
            refine,
        }
    }
}

/// Evaluation settings. Estimation is deterministic, so repeats only differ
/// through their derived seeds; the default of 3 averages over that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub repeats: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { repeats: 3 }
    }
}

/// The whole run configuration. Each command reads the sections it needs
/// and ignores the rest, so one file can drive a full generate, train,
/// refine, evaluate sequence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub refine: RefineConfig,
    pub train: TrainSection,
    pub ransac: RansacConfig,
    pub eval: EvalSection,
}

impl RunConfig {
    /// Defaults when no file is given, otherwise the parsed file. Parse
    /// problems are usage errors: the run never started.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    /// Cross-checks every section after flag overrides have been applied.
    pub fn validate(&self) -> Result<(), CliError> {
        self.scene.validate().map_err(CliError::usage)?;
        self.refine.validate().map_err(CliError::usage)?;
        self.ransac.validate().map_err(CliError::usage)?;
        if self.eval.repeats == 0 {
            return Err(CliError::usage("eval.repeats must be at least 1"));
        }
        // The train section is validated through the composite it actually
        // runs as. steps == 0 is legal here; the train command handles it
        // without entering the optimization loop.
        if self.train.steps > 0 {
            self.train
                .with_refine(self.refine.clone())
                .validate()
                .map_err(CliError::usage)?;
        }
        Ok(())
    }

    /// The canonical serialized form. Parsing this reproduces `self`
    /// exactly; a round-trip test pins that.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// Writes the canonical form to stderr, fenced by comment markers so it
    /// can be extracted from a transcript. The markers are TOML comments;
    /// the fenced block parses as-is.
    pub fn echo(&self) {
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "# run configuration");
        let _ = err.write_all(self.to_canonical_toml().as_bytes());
        let _ = writeln!(err, "# end configuration");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.scene.seed = 99;
        cfg.scene.outlier_fraction = 0.25;
        cfg.refine.descriptor_dim = 8;
        cfg.refine.channels = [4, 4, 6, 6, 8];
        cfg.train.steps = 17;
        cfg.ransac.iterations = 123;
        cfg.eval.repeats = 5;
        let text = cfg.to_canonical_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn defaults_need_no_file() {
        let cfg = RunConfig::load(None).unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("[scene]\nnum_pts = 3\n").unwrap_err();
        assert!(err.to_string().contains("num_pts"));
    }

    #[test]
    fn zero_steps_pass_validation() {
        let mut cfg = RunConfig::default();
        cfg.train.steps = 0;
        cfg.validate().unwrap();
    }
}
