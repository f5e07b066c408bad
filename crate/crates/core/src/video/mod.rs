//! Frame loading, clip sampling, resizing and tubelet tokenization.

mod frames;
mod image;
mod posenc;
mod tokens;

use std::path::Path;

pub use frames::{resize, resize_image, sample_frames, sample_indices, Augmentation, FrameStack};
pub use image::{frame_file_name, read_video_dir, Image};
pub use posenc::{axis_split, positional_encoding};
pub use tokens::{detokenize, tubelet_tokenize, Coord, GridDims, TokenGrid, TOKEN_DIM};

use crate::error::Result;

/// Frames per clip.
pub const NUM_FRAMES: usize = 16;
/// Spatial patch edge in pixels.
pub const PATCH: usize = 16;
/// Frames spanned by one tubelet.
pub const TUBELET: usize = 2;

/// Load a frame directory and turn it into tokens at `res x res`.
///
/// Videos shorter than [`NUM_FRAMES`] are rejected with [`crate::Error::Data`].
pub fn ingest_dir(dir: &Path, res: usize) -> Result<TokenGrid> {
    let frames = read_video_dir(dir)?;
    let id = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let stack = sample_frames(&frames, &id)?;
    tubelet_tokenize(&resize(&stack, res)?)
}
