//! File formats: WAV audio, visual feature files, checkpoints, run
//! configuration and corpus manifests. Binary layouts are little-endian.

mod bytes;
mod checkpoint;
mod features;
mod manifest;
mod runconfig;
mod wav;

pub use checkpoint::{load_bank, save_bank, Checkpoint, BANK_PREFIX, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, META_PREFIX};
pub(crate) use checkpoint::load_named;
pub use features::{FeatureFile, FEATURE_MAGIC, FEATURE_VERSION};
pub use manifest::{read_manifest, write_manifest, ManifestRecord};
pub use runconfig::RunConfig;
pub use wav::{wav_read, wav_write};
