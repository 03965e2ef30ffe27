//! Poster deduplication by difference hash and grayscale filtering of actor pictures.

mod dedup;
mod dhash;
mod grayscale;

pub use dedup::{dedup_posters, DedupCluster, DedupOutcome, HashedPoster, DEFAULT_DEDUP_THRESHOLD};
pub use dhash::{compute_dhash, dhash_file, hamming, luma_grid, DHash, HASH_HEIGHT, HASH_WIDTH};
pub use grayscale::{channel_mse, is_grayscale, is_grayscale_file, DEFAULT_GRAYSCALE_TOLERANCE};

use std::path::Path;

use crate::error::{Error, Result};

/// Decode an image file, mapping failures to an error that carries the path.
pub fn open_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Decode {
            path: path.to_path_buf(),
            source,
        },
    })
}
