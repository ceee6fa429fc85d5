//! Free-energy model: bulk chemical energy, gradient energy and
//! microelastic energy.

pub mod bulk;
pub mod elastic;
mod energy;

pub use bulk::{bulk_f, df_dc, df_deta, BulkCoeffs, Variant};
pub use elastic::{elastic_driving_force, elastic_kernel, ElasticKernel, ElasticModel, Tensor2, Tensor4};
pub use energy::{total_energy, EnergyBreakdown, EnergyEvaluator};
