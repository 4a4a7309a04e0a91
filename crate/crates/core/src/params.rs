//! Film grain characteristics parameter set.
//!
//! One `FilmGrainParams` is what a single SEI message carries: the grain
//! model selector, per-component intensity intervals, and the scaling shift
//! shared by all scaling values.

/// SEI payload type for film grain characteristics.
pub const FGC_PAYLOAD_TYPE: u32 = 19;

/// Frequency-filtering grain model (the only model synthesized here).
pub const MODEL_ID_FREQUENCY_FILTERING: u8 = 0;

/// Additive blending.
pub const BLENDING_MODE_ADDITIVE: u8 = 0;

/// Number of model values per interval: scaling value plus two cutoffs.
pub const MODEL_VALUES_PER_INTERVAL: usize = 3;

/// One luma (or chroma) range with its grain scaling and cutoff pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntensityInterval {
    pub lower_bound: u8,
    pub upper_bound: u8,
    /// comp_model_value[c][i][0]
    pub scaling_value: i32,
    /// comp_model_value[c][i][1]
    pub h_cutoff: i32,
    /// comp_model_value[c][i][2]
    pub v_cutoff: i32,
}

/// Complete parameter set carried by one film grain characteristics message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilmGrainParams {
    pub cancel_flag: bool,
    pub model_id: u8,
    pub blending_mode_id: u8,
    pub log2_scale_factor: u8,
    pub comp_model_present: [bool; 3],
    /// Intervals per component; empty for absent components.
    pub intervals: [Vec<IntensityInterval>; 3],
    pub persistence_flag: bool,
}

impl FilmGrainParams {
    /// A message that cancels grain synthesis for the current frame.
    pub fn cancelled() -> Self {
        FilmGrainParams {
            cancel_flag: true,
            model_id: MODEL_ID_FREQUENCY_FILTERING,
            blending_mode_id: BLENDING_MODE_ADDITIVE,
            log2_scale_factor: 0,
            comp_model_present: [false; 3],
            intervals: [Vec::new(), Vec::new(), Vec::new()],
            persistence_flag: false,
        }
    }

    /// True when synthesis would leave the frame untouched.
    pub fn is_cancelled(&self) -> bool {
        self.cancel_flag
    }
}

impl Default for FilmGrainParams {
    fn default() -> Self {
        FilmGrainParams::cancelled()
    }
}
