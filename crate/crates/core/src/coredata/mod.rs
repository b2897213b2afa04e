//! Shared domain types and file formats.

pub mod io;
mod prediction;
mod recording;
mod segment;
mod timeline;

pub use io::{load_recording, read_annotations, read_predictions, write_annotations, write_predictions, write_recording};
pub use prediction::{LabelMatrix, PredictionMatrix, LABEL_THRESHOLD};
pub use recording::{AnnotationTrack, Recording};
pub use segment::{
    parse_segment_id, segment_count, segment_id, Segment, SegmentLabel, SegmentSet, SEGMENT_DURATION_S,
    SEGMENT_RATE_HZ, SEGMENT_SAMPLES, SEGMENT_STEP_S,
};
pub use timeline::{EventTimeline, Interval};
