//! Shared-memory footprint, global traffic per tile, and the feasibility
//! predicate that bounds the tuning space.
//!
//! A tile loads its halo-extended slab once and keeps it resident for all
//! `t_t` steps; only the owned interior is written back.

use serde::Serialize;

use crate::model::{ArchConfig, StencilKernel, Strategy, TileConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConstraint {
    None,
    /// One tile exceeds half of the SM's shared memory.
    HalfCapacity,
    /// `k` resident tiles exceed the SM's shared memory.
    KCapacity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FootprintReport {
    pub bytes_per_tile: u64,
    pub bytes_with_k: u64,
    pub traffic_bytes_per_tile: u64,
    pub feasible: bool,
    pub binding_constraint: BindingConstraint,
}

/// Width of the leading-dimension slab, halo included.
fn leading_slab(kernel: &StencilKernel, tile: &TileConfig) -> u64 {
    let halo = 2 * kernel.stencil_order;
    match tile.strategy {
        Strategy::HexHybrid => tile.t_s1 + tile.t_t + halo,
        Strategy::RectWavefront => tile.t_s1 + halo,
    }
}

fn leading_interior(tile: &TileConfig) -> u64 {
    match tile.strategy {
        Strategy::HexHybrid => tile.t_s1 + tile.t_t,
        Strategy::RectWavefront => tile.t_s1,
    }
}

fn inner_cells(tile: &TileConfig, halo: u64) -> u64 {
    (tile.t_s2 + halo) * tile.t_s3.map_or(1, |t3| t3 + halo)
}

/// Cells of the halo-extended input slab.
pub fn input_slab_cells(kernel: &StencilKernel, tile: &TileConfig) -> u64 {
    leading_slab(kernel, tile) * inner_cells(tile, 2 * kernel.stencil_order)
}

/// Cells of the written-back interior.
pub fn output_slab_cells(tile: &TileConfig) -> u64 {
    leading_interior(tile) * inner_cells(tile, 0)
}

/// Shared-memory bytes one tile keeps resident.
pub fn footprint(kernel: &StencilKernel, tile: &TileConfig) -> u64 {
    kernel.live_buffers * kernel.bytes_per_element * input_slab_cells(kernel, tile)
}

/// Global-memory bytes read and written by one tile.
pub fn tile_traffic(kernel: &StencilKernel, tile: &TileConfig) -> u64 {
    kernel.bytes_per_element * (input_slab_cells(kernel, tile) + output_slab_cells(tile))
}

pub fn feasible(kernel: &StencilKernel, arch: &ArchConfig, tile: &TileConfig) -> FootprintReport {
    let bytes_per_tile = footprint(kernel, tile);
    let bytes_with_k = tile.k * bytes_per_tile;
    // Compared as 2·fp <= m_sm so odd capacities need no rounding.
    let binding_constraint = if 2 * bytes_per_tile > arch.m_sm {
        BindingConstraint::HalfCapacity
    } else if bytes_with_k > arch.m_sm {
        BindingConstraint::KCapacity
    } else {
        BindingConstraint::None
    };
    FootprintReport {
        bytes_per_tile,
        bytes_with_k,
        traffic_bytes_per_tile: tile_traffic(kernel, tile),
        feasible: binding_constraint == BindingConstraint::None,
        binding_constraint,
    }
}
