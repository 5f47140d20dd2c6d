//! Linear opinion dynamics on switching signed digraphs.
//!
//! The flow `x' = -L(t) x` runs over a piecewise-constant schedule of signed
//! graphs. The crate computes its transition matrix `Phi`, splits it into
//! the cooperative and antagonistic parts `Phi_even` and `Phi_odd` through a
//! 2n-node nonnegative lift, and classifies the long-run behaviour as
//! bipartite consensus or stability from the graph structure and
//! numerically. [`verify`] binds each identity and convergence result to a
//! randomized check, and [`cli`] is the command-line front end.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dynamics;
pub mod graph;
pub mod json;
pub mod matrix;
mod scalar;
pub mod switching;
pub mod transition;
pub mod verify;

pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Digraph64 = graph::SignedDigraph<f64>;
pub type Digraph32 = graph::SignedDigraph<f32>;
pub type Library64 = switching::GraphLibrary<f64>;
pub type Library32 = switching::GraphLibrary<f32>;
pub type Signal64 = switching::SwitchingSignal<f64>;
pub type Signal32 = switching::SwitchingSignal<f32>;
pub type Bundle64 = transition::TransitionBundle<f64>;
pub type Bundle32 = transition::TransitionBundle<f32>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type Trajectory32 = dynamics::Trajectory<f32>;
pub type Report64 = dynamics::ConvergenceReport<f64>;
pub type Report32 = dynamics::ConvergenceReport<f32>;
