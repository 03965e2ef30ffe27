//! Batch file protocol between the pipeline and face-model backends.

mod backend;
mod bundle;
pub mod mock;
mod run;
mod types;

pub use backend::{BackendError, InferenceBackend, ManifestEntry, SidecarBackend};
pub use bundle::{
    decode_embeddings, encode_embeddings, Bundle, BundleMeta, DETECTIONS_FILE, EMBEDDINGS_FILE, EMBEDDING_INDEX_FILE,
    ETHNICITY_FILE, META_FILE,
};
pub use mock::{IdentityPlan, ImagePlan, MockBackend, PlantedFace};
pub use run::{read_manifest, run_inference, InferenceOptions, InferenceOutcome, ShardFailure, DEFAULT_SHARD_SIZE, FAILURES_FILE};
pub use types::*;
