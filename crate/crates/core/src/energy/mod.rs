//! Free-energy functional of the void model and its variational derivatives.

mod bulk;
mod functional;
mod params;

pub use bulk::{bulk_partials, BulkPartials};
pub use functional::{total_free_energy, variational_derivatives, ChemicalPotentials};
pub use params::{ModelParams, Param, ParamBounds, DEFAULT_BOUNDED, N_PARAMS};

pub(crate) use bulk::{bulk_curvature_bounds, bulk_hessian};
