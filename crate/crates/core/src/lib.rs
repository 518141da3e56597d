//! Choosing a K-subset of candidate camera mounts for landmark SLAM.
//!
//! The design score of a subset is the smallest eigenvalue of the pose
//! information left after marginalizing the landmarks out of the Fisher
//! information matrix. Subsets are chosen greedily and certified against the
//! Boolean relaxation of the problem, solved by Frank-Wolfe.

pub mod baselines;
pub mod eigen;
pub mod error;
pub mod experiment;
pub mod fisher;
pub mod geometry;
pub mod objective;
pub mod rng;
pub mod scenario;
pub mod slam_eval;
pub mod solvers;

pub use error::{Error, Result};
