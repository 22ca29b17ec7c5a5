//! Numerical kernels: greedy sparse recovery, least squares, and the two
//! angle searches used by the estimator.

mod omp;
mod search;

pub use omp::{ls_pinv, omp, SparseSolution};
pub use search::{
    line_search_aod, maximize_periodic_1d, maximize_periodic_2d, refine_local_1d, snl_ls_objective,
    snl_ls_rotation, Rotation,
};
