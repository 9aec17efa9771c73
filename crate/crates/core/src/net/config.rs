//! Refinement network configuration and its consistency rules.

use super::NetError;

/// Which scoring pathway produces the maps fed to the soft argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Variant {
    /// Features dotted with the mean of the two matched descriptors.
    Full,
    /// Features dotted with the view's own descriptor (no guidance from the
    /// other view).
    CnnDg,
    /// Features collapsed by a learned projection; descriptors unused.
    CnnOnly,
    /// No network at all: soft argmax straight on the detector score patch.
    SamOnly,
}

impl Variant {
    /// SamOnly carries no trainable parameters.
    pub fn has_network(self) -> bool {
        !matches!(self, Variant::SamOnly)
    }

    pub fn uses_descriptors(self) -> bool {
        matches!(self, Variant::Full | Variant::CnnDg)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::CnnDg => "cnn_dg",
            Variant::CnnOnly => "cnn_only",
            Variant::SamOnly => "sam_only",
        }
    }
}

/// Network and refinement geometry settings.
///
/// The spatial plan is rigid: three valid-padding convolutions shave the
/// patch from `input_patch` down to `output_map` (11 to 5 by default), and
/// `sigma` must be exactly the ratio of the two half-widths so a map-cell
/// displacement scales back to patch pixels. `validate` enforces all of it
/// up front; everything downstream assumes a validated config.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct RefineConfig {
    pub input_patch: usize,
    pub output_map: usize,
    pub sigma: f64,
    /// Output channels of the five layers; the middle pattern must pair up
    /// (c0 == c1, c2 == c3) because same padding is applied exactly where
    /// input and output channel counts agree.
    pub channels: [usize; 5],
    pub descriptor_dim: usize,
    pub use_score_channel: bool,
    pub variant: Variant,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            input_patch: 11,
            output_map: 5,
            sigma: 2.5,
            channels: [16, 16, 64, 64, 32],
            descriptor_dim: 32,
            use_score_channel: true,
            variant: Variant::Full,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_patch % 2 == 0 || self.output_map % 2 == 0 || self.output_map == 0 {
            return Err(NetError::Config("patch and map sides must be odd"));
        }
        if self.input_patch != self.output_map + 6 {
            return Err(NetError::Config(
                "three valid 3x3 layers need input_patch == output_map + 6",
            ));
        }
        let expected_sigma = (self.input_patch / 2) as f64 / (self.output_map / 2) as f64;
        if (self.sigma - expected_sigma).abs() > 1e-12 {
            return Err(NetError::Config(
                "sigma must equal floor(input/2) / floor(map/2)",
            ));
        }
        if self.channels.iter().any(|&c| c == 0) {
            return Err(NetError::Config("channel counts must be positive"));
        }
        if self.channels[0] != self.channels[1] || self.channels[2] != self.channels[3] {
            return Err(NetError::Config(
                "channel plan must pair up: same padding sits on the equal-channel layers",
            ));
        }
        if self.channels[4] != self.descriptor_dim {
            return Err(NetError::Config(
                "final channel count must equal the descriptor dimension",
            ));
        }
        if self.variant == Variant::SamOnly && !self.use_score_channel {
            return Err(NetError::Config(
                "sam_only needs the detector score channel",
            ));
        }
        Ok(())
    }

    /// Input channels: grayscale plus the optional detector score plane.
    pub fn in_channels(&self) -> usize {
        1 + usize::from(self.use_score_channel)
    }

    /// Half-width of the extraction window.
    pub fn patch_half(&self) -> usize {
        self.input_patch / 2
    }

    /// Displacement bound in pixels: sigma times the map half-width.
    pub fn delta_bound(&self) -> f64 {
        self.sigma * (self.output_map / 2) as f64
    }

    /// The sam_only pathway reads the raw score patch, whose half-width
    /// already spans the window, so its scale factor is 1 by the same
    /// half-width-ratio rule that yields 2.5 for the network map.
    pub fn sam_only_sigma(&self) -> f64 {
        1.0
    }
}
