//! Hyperbolic fillings of finite metric spaces.
//!
//! Build the leveled filling graph of a finite metric space, measure its
//! hyperbolicity and Busemann structure, uniformize it with the density
//! `e^{-eps h}` and compare the result against the closed-form estimates the
//! construction promises. A small half-plane oracle checks the continuous
//! model case.

pub mod filling;
pub mod graph;
pub mod halfplane;
pub mod hyperbolic;
pub mod metric;
pub mod uniform;
pub mod verify;


pub use filling::{FillingGraph, FillingParams, IntersectionMode};
pub use graph::LeveledGraph;
pub use metric::{FiniteMetricSpace, ScaleStats};
pub use uniform::EpsilonWeighting;

pub use verify::{ComparisonReport, RunConfig};
