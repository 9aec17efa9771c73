//! The optimization loop.
//!
//! A training step assembles a batch from seeded shuffled epochs, refines
//! every match with the current weights, evaluates the clamped epipolar loss
//! on the refined keypoints, backpropagates through the displacement alone
//! (patches and descriptors are constants), and applies one Adam update. The
//! whole loop is a pure function of the config and the dataset: two runs
//! produce bit-identical weights, and a resumed run continues exactly where
//! the interrupted one left off.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec::Vec;

use rand::Rng;

use crate::geometry::{
    epipolar_error, epipolar_loss_grad, mean_focal, normalized_threshold, GeometryError,
};
use crate::net::{
    apply_offsets, backward, forward, NetError, NetworkGrads, NetworkWeights, PatchPair,
    RefineConfig, RefinedMatch,
};
use crate::rng::{stream_rng, Stream};
use crate::synth::TwoViewSample;
use crate::tensor::{adam_step, AdamConfig, AdamState, Tensor, TensorError};
use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("train config: {0}")]
    Config(&'static str),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("sample {sample_id}: {reason}")]
    BadSample { sample_id: u64, reason: &'static str },
    #[error("every match in the batch had a degenerate epipolar denominator")]
    AllExcluded,
    #[error("loss became non-finite at step {step}; aborting before the update")]
    NonFiniteLoss { step: u64 },
    #[error("network: {0}")]
    Net(#[from] NetError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("tensor: {0}")]
    Tensor(#[from] TensorError),
}

/// Optimization settings. `refine` describes the network being trained;
/// everything else is the loop itself.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    /// Adam learning rate; the other Adam constants stay at their defaults.
    pub lr: f64,
    /// Inlier threshold in pixels, converted per pair to normalized image
    /// space by dividing by the mean of the four focal lengths.
    pub t_px: f64,
    /// Seeds weight initialization and batch shuffling.
    pub seed: u64,
    pub checkpoint_every: u64,
    pub log_every: u64,
    pub refine: RefineConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            batch_size: 8,
            lr: 1e-4,
            t_px: 1.5,
            seed: 7,
            checkpoint_every: 1000,
            log_every: 100,
            refine: RefineConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.steps == 0 {
            return Err(TrainError::Config("steps must be positive"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive"));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(TrainError::Config("lr must be finite and non-negative"));
        }
        if !self.t_px.is_finite() || self.t_px <= 0.0 {
            return Err(TrainError::Config("t_px must be positive"));
        }
        if self.checkpoint_every == 0 || self.log_every == 0 {
            return Err(TrainError::Config("cadences must be positive"));
        }
        self.refine.validate()?;
        Ok(())
    }
}

/// Per-step accounting. Pixel metrics use the raw (unclamped) epipolar
/// distance scaled by the pair's mean focal length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    /// Mean clamped epipolar loss over non-excluded matches.
    pub loss: f64,
    /// Share of non-excluded matches whose distance fell below the threshold.
    pub inlier_frac: f64,
    pub mean_epi_px_refined: f64,
    pub mean_epi_px_unrefined: f64,
    /// Matches dropped for a degenerate epipolar denominator. Never silent:
    /// callers surface this count whenever it is nonzero.
    pub excluded: usize,
    /// Matches refined as identity because the patch window was unavailable.
    pub skipped: usize,
}

/// The shuffled visit order for one pass over the dataset.
fn epoch_permutation(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, Stream::Shuffle, epoch);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i as u64) as usize;
        perm.swap(i, j);
    }
    perm
}

/// Dataset indices making up the batch for `step`. Batches walk shuffled
/// epochs back to back, so every sample is visited once per epoch and a batch
/// crossing an epoch boundary takes its tail from the next permutation.
pub fn batch_indices(seed: u64, step: u64, batch_size: usize, n: usize) -> Vec<usize> {
    assert!(n > 0 && batch_size > 0);
    let mut out = Vec::with_capacity(batch_size);
    let mut cursor = step * batch_size as u64;
    while out.len() < batch_size {
        let epoch = cursor / n as u64;
        let offset = (cursor % n as u64) as usize;
        let perm = epoch_permutation(seed, epoch, n);
        let take = (batch_size - out.len()).min(n - offset);
        out.extend_from_slice(&perm[offset..offset + take]);
        cursor += take as u64;
    }
    out
}

/// Packs a record's buffers into network inputs. Patches convert to the
/// network scalar type; keypoints stay f64 end to end.
fn sample_to_pair<T: Real>(
    s: &TwoViewSample,
    cfg: &RefineConfig,
) -> Result<PatchPair<T>, TrainError> {
    let side = s.patch_side;
    if side != cfg.input_patch {
        return Err(TrainError::BadSample {
            sample_id: s.sample_id,
            reason: "patch side does not match the network input size",
        });
    }
    let n = side * side;
    let build = |img: &[f64], score: &[f64]| -> Result<Tensor<T>, TrainError> {
        if img.len() != n || (cfg.use_score_channel && score.len() != n) {
            return Err(TrainError::BadSample {
                sample_id: s.sample_id,
                reason: "patch buffer length does not match its side",
            });
        }
        let mut data = Vec::with_capacity(cfg.in_channels() * n);
        data.extend(img.iter().map(|v| T::from_f64(*v)));
        if cfg.use_score_channel {
            data.extend(score.iter().map(|v| T::from_f64(*v)));
        }
        Ok(Tensor::from_vec(cfg.in_channels(), side, side, data))
    };
    Ok(PatchPair {
        patch1: build(&s.image1, &s.score1)?,
        patch2: build(&s.image2, &s.score2)?,
        d1: s.d1.iter().map(|v| T::from_f64(*v)).collect(),
        d2: s.d2.iter().map(|v| T::from_f64(*v)).collect(),
        center1: s.quantized1,
        center2: s.quantized2,
    })
}

/// Refines one record with the given weights: forward pass plus offset
/// application, or an identity pass-through when the record carries no patch
/// buffers (border skip). The flag reports whether the record was skipped.
pub fn refine_sample<T: Real>(
    weights: &NetworkWeights<T>,
    refine: &RefineConfig,
    s: &TwoViewSample,
) -> Result<(RefinedMatch, bool), TrainError> {
    if s.image1.is_empty() || s.image2.is_empty() {
        return Ok((RefinedMatch::unrefined(s.quantized1, s.quantized2), true));
    }
    let pair = sample_to_pair::<T>(s, refine)?;
    let (refinement, _) = forward(weights, &pair, refine)?;
    Ok((
        apply_offsets(&pair, refinement.delta1, refinement.delta2),
        false,
    ))
}

/// Loss and weight gradients for one batch.
///
/// Every match contributes its clamped loss to the mean. Gradient flows only
/// through matches in the quadratic branch that actually ran the network;
/// truncated matches have a constant loss, and border-skipped matches (empty
/// patch buffers) are refined as identity. Matches with a degenerate
/// epipolar denominator are excluded from all sums and counted in
/// `BatchStats::excluded`.
pub fn batch_loss<T: Real>(
    weights: &NetworkWeights<T>,
    batch: &[&TwoViewSample],
    cfg: &TrainConfig,
) -> Result<(BatchStats, NetworkGrads<T>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut grads = NetworkGrads::zeros_like(weights);
    let mut loss_sum = 0.0;
    let mut epi_refined_sum = 0.0;
    let mut epi_unrefined_sum = 0.0;
    let mut inliers = 0usize;
    let mut excluded = 0usize;
    let mut skipped = 0usize;

    for s in batch {
        let t_prime = normalized_threshold(cfg.t_px, &s.k1, &s.k2)?;
        let focal = mean_focal(&s.k1, &s.k2);

        let border_skip = s.image1.is_empty() || s.image2.is_empty();
        let (refined1, refined2, run) = if border_skip {
            (s.quantized1, s.quantized2, None)
        } else {
            let pair = sample_to_pair::<T>(s, &cfg.refine)?;
            let (refinement, cache) = forward(weights, &pair, &cfg.refine)?;
            let refined = apply_offsets(&pair, refinement.delta1, refinement.delta2);
            (refined.p1_refined, refined.p2_refined, Some(cache))
        };

        let n1 = s.k1.normalize(refined1)?;
        let n2 = s.k2.normalize(refined2)?;
        let q1 = s.k1.normalize(s.quantized1)?;
        let q2 = s.k2.normalize(s.quantized2)?;

        // Evaluate everything before accumulating anything, so a degenerate
        // match is excluded atomically rather than half-counted.
        let term = epipolar_loss_grad(&n1, &n2, &s.gt_e, t_prime);
        let refined_err = epipolar_error(&n1, &n2, &s.gt_e);
        let unrefined_err = epipolar_error(&q1, &q2, &s.gt_e);
        let (term, refined_err, unrefined_err) = match (term, refined_err, unrefined_err) {
            (Ok(t), Ok(r), Ok(u)) => (t, r, u),
            (Err(GeometryError::DegenerateEpipolar), _, _)
            | (_, Err(GeometryError::DegenerateEpipolar), _)
            | (_, _, Err(GeometryError::DegenerateEpipolar)) => {
                excluded += 1;
                continue;
            }
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return Err(e.into()),
        };

        loss_sum += term.loss;
        epi_refined_sum += refined_err.sqrt() * focal;
        epi_unrefined_sum += unrefined_err.sqrt() * focal;
        if !term.truncated {
            inliers += 1;
        }
        if border_skip {
            skipped += 1;
        }

        if let (Some(cache), false) = (run, term.truncated) {
            // Chain rule through normalization: n = (p - c) / f, so a
            // normalized-space gradient scales by the inverse focal.
            let g1 = [
                T::from_f64(term.grad_n1[0] / s.k1.fx),
                T::from_f64(term.grad_n1[1] / s.k1.fy),
            ];
            let g2 = [
                T::from_f64(term.grad_n2[0] / s.k2.fx),
                T::from_f64(term.grad_n2[1] / s.k2.fy),
            ];
            let g = backward(weights, &cfg.refine, &cache, g1, g2)?;
            grads.accumulate(&g);
        }
    }

    let included = batch.len() - excluded;
    if included == 0 {
        return Err(TrainError::AllExcluded);
    }
    let scale = 1.0 / included as f64;
    grads.scale(T::from_f64(scale));

    let stats = BatchStats {
        loss: loss_sum * scale,
        inlier_frac: inliers as f64 * scale,
        mean_epi_px_refined: epi_refined_sum * scale,
        mean_epi_px_unrefined: epi_unrefined_sum * scale,
        excluded,
        skipped,
    };
    Ok((stats, grads))
}

/// Trainer state: weights plus Adam moments. The completed step count lives
/// in the Adam state, so resuming from a checkpoint restores the exact
/// position in the batch schedule.
#[derive(Debug, Clone)]
pub struct Trainer<T: Real> {
    cfg: TrainConfig,
    adam_cfg: AdamConfig,
    weights: NetworkWeights<T>,
    adam: AdamState<T>,
}

impl<T: Real> Trainer<T> {
    /// Fresh trainer: seeded weight initialization, zeroed moments.
    pub fn new(cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let weights = NetworkWeights::init(&cfg.refine, cfg.seed)?;
        let adam = AdamState::new(weights.param_count());
        Ok(Self {
            adam_cfg: AdamConfig {
                lr: cfg.lr,
                ..AdamConfig::default()
            },
            cfg,
            weights,
            adam,
        })
    }

    /// Resumes from checkpointed state.
    pub fn from_state(
        cfg: TrainConfig,
        weights: NetworkWeights<T>,
        adam: AdamState<T>,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        let expected = NetworkWeights::<T>::init(&cfg.refine, 0)?.param_count();
        if weights.param_count() != expected {
            return Err(TrainError::Config(
                "checkpoint parameters do not match the network configuration",
            ));
        }
        if adam.m.len() != expected || adam.v.len() != expected {
            return Err(TrainError::Config(
                "optimizer moments do not match the network configuration",
            ));
        }
        Ok(Self {
            adam_cfg: AdamConfig {
                lr: cfg.lr,
                ..AdamConfig::default()
            },
            cfg,
            weights,
            adam,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &NetworkWeights<T> {
        &self.weights
    }

    pub fn adam_state(&self) -> &AdamState<T> {
        &self.adam
    }

    pub fn completed_steps(&self) -> u64 {
        self.adam.step
    }

    /// Runs one optimization step and reports its statistics. A non-finite
    /// loss aborts before touching the weights, so the state remains the
    /// last good one for diagnosis.
    pub fn run_step(&mut self, dataset: &[TwoViewSample]) -> Result<BatchStats, TrainError> {
        if dataset.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let step = self.adam.step;
        let indices = batch_indices(self.cfg.seed, step, self.cfg.batch_size, dataset.len());
        let batch: Vec<&TwoViewSample> = indices.iter().map(|i| &dataset[*i]).collect();
        let (stats, grads) = batch_loss(&self.weights, &batch, &self.cfg)?;
        if !stats.loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { step });
        }

        let mut flat_params = Vec::with_capacity(self.weights.param_count());
        self.weights.flatten_into(&mut flat_params);
        let mut flat_grads = Vec::with_capacity(flat_params.len());
        grads.flatten_into(&mut flat_grads);
        adam_step(&mut flat_params, &flat_grads, &mut self.adam, &self.adam_cfg)?;
        self.weights.assign_from_flat(&flat_params)?;
        Ok(stats)
    }

    /// Steps until `cfg.steps` is reached, invoking `after_step` with the
    /// number of completed steps after each update. The callback handles
    /// logging and checkpointing; returning an error stops the run.
    pub fn run<F>(&mut self, dataset: &[TwoViewSample], mut after_step: F) -> Result<(), TrainError>
    where
        F: FnMut(u64, &BatchStats, &Trainer<T>) -> Result<(), TrainError>,
    {
        while self.adam.step < self.cfg.steps {
            let stats = self.run_step(dataset)?;
            after_step(self.adam.step, &stats, self)?;
        }
        Ok(())
    }
}
