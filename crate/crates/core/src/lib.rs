//! Compiler from topological-native circuits to defect braid geometries.

pub mod circuit;
pub mod semantics;
pub mod geometry;
pub mod topology;
pub mod compiler;
pub mod optimizer;
pub mod resources;
pub mod scene;
pub mod obj;
pub mod cli;
