//! Phase-field simulation of θ′ precipitate growth in Al-Cu and the
//! physics residuals used to train operator-learning surrogates on it.

pub mod backend;
pub mod dataset;
pub mod energetics;
pub mod error;
pub mod evolution;
pub mod export;
pub mod fdm;
pub mod format;
pub mod grid;
pub mod residuals;
pub mod spectral;

pub use backend::{time_deriv, time_deriv_stack, BackendKind, DerivBackend, SpatialOps};
pub use dataset::{run_sweep, split, Dataset, Instance, InstanceMeta, SweepPlan, SweepSpec};
pub use error::{Error, FormatError, Result};
pub use evolution::{
    make_initial, simulate, step, Channel, FieldSet, Mobility, SimParams, SpatialForm, Stepper, Trajectory,
};
pub use export::{export_npy, read_export};
pub use fdm::fdm_deriv;
pub use format::{read_dataset, write_dataset};
pub use grid::{Axis, Grid2D, GridSpec, ScalarField2D};
pub use residuals::{
    ac_residual, ch_residual, compare_backends, data_loss, total_loss, total_loss_with_form, LossComponents,
    LossReport, LossWeights, Residual,
};
pub use spectral::{spectral_deriv, Spectral};
