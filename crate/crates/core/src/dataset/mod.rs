//! Asset splits, dataset manifests and batch generation.

mod assets;
mod kinds;
mod manifest;
mod split;
mod writer;

pub use assets::{BackgroundPool, ChipMeta, ChipPool};
pub use kinds::{scene_id, KindFactory, KindRegistry, SceneSource};
pub use manifest::{BackgroundSource, ChipSource, DatasetManifest, Side, SplitConfig, SyntheticBackgrounds};
pub use split::{make_split, SplitSpec, MAX_SPLIT_RETRIES};
pub use writer::{
    content_hash, generate_dataset, generate_from, stream_scenes, write_scenes, DatasetSummary,
    GenerateOptions, Progress, SceneStream, ANNOTATIONS_FILE, ECHO_FILE, PROGRESS_EVERY,
};
