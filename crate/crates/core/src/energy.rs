//! Linear energy model on top of the time model.
//!
//! Dynamic energy is charged per operation and per byte moved (global and
//! shared); static energy is `P_static · T_alg`. All results in nanojoules.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{schedule, WavefrontSchedule};
use crate::memory::tile_traffic;
use crate::model::{ArchConfig, CalibrationSet, StencilKernel, TileConfig};
use crate::time::{t_alg, TimeBreakdown};

const PJ_PER_NJ: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub e_dynamic_compute: f64,
    pub e_dynamic_memory: f64,
    pub e_static: f64,
    pub e_total: f64,
    /// Energy-delay product in nJ·ns.
    pub edp: f64,
}

pub fn energy(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile: &TileConfig,
) -> Result<EnergyBreakdown> {
    let time = t_alg(kernel, arch, calib, tile)?;
    let sched = schedule(kernel, tile)?;
    Ok(energy_from(kernel, calib, tile, &sched, &time))
}

/// Energy for an already evaluated schedule and time breakdown.
pub fn energy_from(
    kernel: &StencilKernel,
    calib: &CalibrationSet,
    tile: &TileConfig,
    sched: &WavefrontSchedule,
    time: &TimeBreakdown,
) -> EnergyBreakdown {
    let tiles = sched.tile_count() as f64;
    let e_dynamic_compute =
        sched.total_points_enumerated as f64 * kernel.ops_per_point as f64 * calib.e_op_pj
            / PJ_PER_NJ;
    let global = tiles * tile_traffic(kernel, tile) as f64 * calib.e_glob_pj_per_byte;
    // One shared-memory access per iteration point.
    let shared =
        tiles * sched.tile_volume as f64 * kernel.bytes_per_element as f64 * calib.e_sh_pj_per_byte;
    let e_dynamic_memory = (global + shared) / PJ_PER_NJ;
    // W · ns = nJ
    let e_static = calib.p_static_w * time.t_alg;
    let e_total = e_dynamic_compute + e_dynamic_memory + e_static;
    EnergyBreakdown {
        e_dynamic_compute,
        e_dynamic_memory,
        e_static,
        e_total,
        edp: e_total * time.t_alg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::fixtures::*;

    #[test]
    fn op_energy_without_padding() {
        // r = 0 rectangles that divide the grid exactly enumerate 512 points.
        let kernel = StencilKernel {
            stencil_order: 0,
            ..toy_kernel()
        };
        let tile = TileConfig::rect(4, 2, 8, 1);
        assert_eq!(
            schedule(&kernel, &tile).unwrap().total_points_enumerated,
            512
        );
        let calib = CalibrationSet {
            e_op_pj: 10.0,
            ..toy_calib(100.0)
        };
        let e = energy(&kernel, &toy_arch(2), &calib, &tile).unwrap();
        assert!((e.e_total - 5.12).abs() < 1e-12);
        assert_eq!(e.e_dynamic_memory, 0.0);
    }

    #[test]
    fn zero_model() {
        let e = energy(&toy_kernel(), &toy_arch(2), &toy_calib(100.0), &toy_tile()).unwrap();
        assert_eq!(e.e_total, 0.0);
        assert_eq!(e.edp, 0.0);
    }

    #[test]
    fn static_energy_follows_time() {
        let calib = CalibrationSet {
            p_static_w: 1.0,
            ..toy_calib(100.0)
        };
        let e = energy(&toy_kernel(), &toy_arch(2), &calib, &toy_tile()).unwrap();
        assert_eq!(e.e_static, 420.0);
        assert_eq!(e.edp, 420.0 * 420.0);
    }

    #[test]
    fn memory_terms() {
        let calib = CalibrationSet {
            e_glob_pj_per_byte: 1.0,
            e_sh_pj_per_byte: 2.0,
            ..toy_calib(0.0)
        };
        let e = energy(&toy_kernel(), &toy_arch(2), &calib, &toy_tile()).unwrap();
        // 12 tiles · 512 B · 1 pJ + 12 tiles · 80 points · 4 B · 2 pJ
        assert!((e.e_dynamic_memory - (12.0 * 512.0 + 12.0 * 80.0 * 8.0) / 1000.0).abs() < 1e-12);
    }
}
