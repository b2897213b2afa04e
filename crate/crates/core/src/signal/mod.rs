//! EEG preprocessing: band-pass, decimation to 32 Hz, int16 rescaling,
//! segmentation with consensus labels, zero-voltage exclusion and class
//! balancing.

pub mod filter;
pub mod preprocess;
pub mod segmentation;

pub use filter::{design_cheby2_bandpass, design_from, Biquad, FilterDesign, IirFilter};
pub use preprocess::{filter_and_decimate, preprocess, rescale_to_int16, TARGET_RATE_HZ};
pub use segmentation::{
    balance_indices, balance_training_set, cut_segments, segment_recording, validate_tracks, window_label, zero_voltage_excluded,
};
