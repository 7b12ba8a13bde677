//! Adaptive least-squares finite element methods for the Poisson model problem.

pub mod adaptivity;
pub mod benchmarks;
pub mod estimators;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod runner;
