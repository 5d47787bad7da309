//! Ground-truth generation: discretization, linear solve, intensity
//! sampling and dataset containers.

mod assemble;
pub mod container;
mod dataset;
pub(crate) mod sampling;
mod solver;

pub use assemble::{assemble, BoundaryFace, CsrMatrix, Discretization, LinearSystem};
pub use dataset::{
    generate_dataset, read_manifest, read_set, set_file_name, write_dataset, Dataset,
    DatasetManifest, DatasetPlan, Sample, SamplingInfo, SetEntry, DATASET_FORMAT_VERSION,
    MANIFEST_FILE,
};
pub use sampling::{sample_powers, sample_seed, zero_count, SetTag};
pub use solver::{
    conjugate_gradient, solve_field, BandCholesky, CgStats, FieldSolver, SolverConfig,
    SolverMethod,
};

pub use crate::field::TemperatureField;
