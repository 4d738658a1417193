//! Periodic scalar fields, finite-difference kernels and run-length masks.

mod field;
mod io;
mod mask;

pub use field::{compensated_sum, ScalarField, MIN_SIDE};
pub use io::{decode_pff, encode_pff, read_pff, write_pff};
pub use mask::{Mask, Run};

pub(crate) use field::{laplacian_into, wrap_next};
pub(crate) use io::{read_header, write_header, FieldReader};
