//! Part-aware point prompts for promptable segmenters.
//!
//! Reference foreground features are clustered into parts, each part mean is
//! matched against the target feature grid by cosine similarity, and the best
//! matching cells become positive point prompts. Candidate part counts are
//! compared by the Wasserstein distance between the reference foreground and
//! the foreground each candidate mask selects on the target.

pub mod cluster;
pub mod distance;
pub mod error;
pub mod eval;
pub mod feature;
pub mod io;
mod par;
pub mod prompt;
pub mod retrieval;
pub mod seed;
pub mod segmenter;

pub use cluster::{cluster_parts, PartSet};
pub use distance::{DistanceResult, Measure, MeasureSpec};
pub use error::{Error, Result};
pub use feature::{
    grid_to_pixel, l2_normalize, masked_select, pixel_to_grid, BinaryMask, FeatureMap, FeatureSet,
    GridPoint, PixelPoint, Polarity,
};
pub use prompt::{synthesize_prompts, NegMode, Prompt, PromptSet, SimilarityStack};
pub use retrieval::{retrieve_optimal, RetrievalConfig, RetrievalOutcome};
pub use seed::RngSeed;
pub use segmenter::{MockSegmenter, Segmenter};
