//! Fair splittings of continuous functions on `[0,1]`, equal-length loop
//! splitting by translations, and inscribed parallelograms / rectangles in
//! closed curves, each re-checked by an independent verification oracle.
//!
//! The central operation is [`splitter::solve_split`]: given `m` continuous
//! features and a part count `r`, it finds `(r-1) * m` cut points and a
//! labeling of the resulting intervals into `r` parts so every part receives
//! the same total increment of every feature. The geometry front ends reduce
//! curve questions to such splits; the verify module re-derives every claimed
//! property from raw evaluations only.

pub mod curve;
pub mod error;
pub mod feature;
pub mod geometry;
pub mod splitter;

pub use crate::curve::Curve;
pub use crate::error::{Error, Result};
pub use crate::feature::{FeatureFunction, Table};
pub use crate::geometry::{
    find_balanced_rectangle, find_parallelogram, find_rectangle, is_rectangle, reassemble,
    split_loop, split_loop_colored, InscribedQuadrilateral, LoopSplit,
};
pub use crate::splitter::{
    canonicalize_alternating, compose_splittings, enumerate_partitions, residual,
    solve_alternating_4, solve_colored, solve_split, ColorConstraint, ResidualReport,
    SolveOptions, SplitConfiguration, SplitProblem, SplitSolution,
};
