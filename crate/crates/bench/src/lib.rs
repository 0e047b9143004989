//! Workloads shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stencil_dse::codesign::DesignPoint;
use stencil_dse::model::KIB;
use stencil_dse::tuner::{ParamRange, TileGridSpec};
use stencil_dse::{ArchConfig, CalibrationSet, StencilKernel, Strategy};

pub fn jacobi2d() -> StencilKernel {
    StencilKernel {
        name: "jacobi2d".into(),
        sizes: vec![4096, 4096],
        time_steps: 512,
        stencil_order: 1,
        ops_per_point: 5,
        bytes_per_element: 4,
        live_buffers: 2,
    }
}

pub fn maxwell_like() -> ArchConfig {
    ArchConfig {
        n_sm: 16,
        n_v: 128,
        m_sm: 96 * KIB,
        bw_global: 224.0,
        l2_bytes: 2048 * KIB,
        mem_ctrl_count: 4,
    }
}

pub fn calibration() -> CalibrationSet {
    CalibrationSet {
        e_op_pj: 20.0,
        e_glob_pj_per_byte: 150.0,
        e_sh_pj_per_byte: 10.0,
        p_static_w: 60.0,
        ..CalibrationSet::timing(3.0, 1500.0)
    }
}

/// 320-point grid over the usual 2D extents.
pub fn grid_2d(strategy: Strategy) -> TileGridSpec {
    TileGridSpec {
        strategy,
        t_s1: ParamRange::values([8, 16, 32, 64, 128]),
        t_t: ParamRange::values([4, 8, 16, 32]),
        t_s2: ParamRange::values([32, 64, 128, 256]),
        t_s3: None,
        k: ParamRange::values([1, 2, 3, 4]),
    }
}

/// Random design points with integer-valued coordinates, so ties occur.
pub fn random_points(n: usize, seed: u64) -> Vec<DesignPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| DesignPoint {
            arch: ArchConfig {
                n_sm: i as u64 + 1,
                ..maxwell_like()
            },
            area: rng.gen_range(100..600) as f64,
            per_kernel: Vec::new(),
            weighted_gflops: rng.gen_range(0..5000) as f64,
        })
        .collect()
}
