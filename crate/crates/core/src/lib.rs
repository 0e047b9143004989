//! Model-driven design-space exploration for GPU stencil computations.
//!
//! The crate evaluates analytical cost models (execution time, shared-memory
//! footprint, energy, silicon area) for tiled stencil programs, tunes tile
//! sizes against them, and searches accelerator configurations for
//! Pareto-optimal area/performance trade-offs.

pub mod area;
pub mod bottleneck;
pub mod codesign;
pub mod config;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod memory;
pub mod model;
pub mod report;
pub mod time;
pub mod tuner;

pub use bottleneck::{BottleneckReport, Resource};
pub use codesign::{ArchGridSpec, DesignPoint, ParetoSet};
pub use error::{Error, Result};
pub use geometry::{TileId, WavefrontSchedule};
pub use model::{
    ArchConfig, AreaCoeffs, CalibrationSet, StencilKernel, Strategy, TileConfig, WorkloadSuite,
};
pub use tuner::{Objective, TileGridSpec, TuneResult};
