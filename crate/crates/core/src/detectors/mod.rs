//! Local detectors.
//!
//! [`FeatureDetector`] extracts hand features per channel, pools them with
//! channel attention and applies a logistic head. [`SyntheticAnnotator`]
//! emits probabilities with known sensitivity and specificity and is used to
//! validate the fusion schemes.

pub mod attention;
pub mod feature_detector;
pub mod features;
pub mod synthetic;

use crate::coredata::Segment;
use crate::error::Result;

pub use attention::{attention_forward, attention_grad, attention_pool, AttentionGrads, AttentionParams};
pub use feature_detector::{
    train_feature_detector, train_on_features, FeatureDetector, ModelFile, TrainConfig, TrainedDetector,
};
pub use features::{extract_features, FeatureExtractor, Standardizer, FEATURE_NAMES, N_FEATURES};
pub use synthetic::{synthetic_predict, SyntheticAnnotator};

/// A local seizure detector mapping a segment to a probability in [0, 1].
pub trait DetectorModel: Send + Sync {
    fn detector_id(&self) -> &str;
    fn predict(&self, segment: &Segment) -> Result<f64>;
}
