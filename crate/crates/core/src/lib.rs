//! Numerical experiments on the equidistribution of zeros of random CR
//! functions on weighted spheres and of random Bergman functions on the unit
//! ball.

pub mod bergman;
pub mod crspace;
pub mod currents;
pub mod fiber;
pub mod geometry;
pub mod harness;
pub mod numeric;
pub mod poly;
pub mod sampling;
pub mod szego;

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("search failed: {0}")]
    SearchFailed(String),
    #[error("nonconvergence: {0}")]
    NonConvergence(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
}

/// Order-preserving map, parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
