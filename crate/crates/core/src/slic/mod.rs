//! SLIC superpixels for click-to-select annotation.

mod connectivity;
mod map;
mod segment;

pub use connectivity::enforce_connectivity;
pub use map::{boundaries, SuperpixelMap};
pub use segment::{slic_segment, DEFAULT_MAX_ITER};
