//! Random recursive laminations of the disk and their label branching processes.
//!
//! * [`geometry`] throws uniform inscribed `k`-gons into the disk and records the
//!   genealogy of the fragments they cut, each labelled by its number of ends.
//! * [`branching`] is the abstract label process on the `k`-ary tree: exact
//!   kernels, composition sampling, rays and pruned good-path enumeration.
//! * [`spectral`] analyses the killed kernels: Perron vectors, quasi-stationary
//!   laws, survival asymptotics, certificates and sub/supercritical verdicts.
//! * [`estimators`] runs seeded, parallel, bitwise-reproducible Monte Carlo.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branching;
pub mod estimators;
pub mod geometry;
pub mod numeric;
pub mod rng;
pub mod spectral;

pub use branching::{
    count_good_paths, kernel_prob, kernel_prob_f64, sample_children, simulate_ray, GoodPathCount,
    GoodPathCounter, Label, LabelKernel, Prob, RayPath,
};
pub use estimators::{
    cross_validate_geometry, estimate_good_paths, estimate_mean_good_paths, estimate_nonempty_prob, Estimate,
    GeometryValidation, GoodPathEstimates, McConfig,
};
pub use geometry::{
    polygons_disjoint, run_construction, Arc, CirclePoint, Fragment, FragmentId, GeometryError, Lamination,
    Split, SplitOutcome,
};
pub use rng::Seed;
pub use spectral::{ClassificationReport, EigenTriple, KilledKernel, SpectralError, Verdict};
