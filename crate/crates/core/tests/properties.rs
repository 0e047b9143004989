use proptest::prelude::*;

use stencil_dse::area::area;
use stencil_dse::codesign::{pareto, DesignPoint};
use stencil_dse::config::{
    arch_from_str, arch_to_json, calibration_from_str, calibration_to_json, kernel_from_str,
    kernel_to_json,
};
use stencil_dse::energy::energy;
use stencil_dse::geometry::{check_legality, schedule, tile_point_counts};
use stencil_dse::memory::feasible;
use stencil_dse::model::KIB;
use stencil_dse::time::t_alg;
use stencil_dse::tuner::{enumerate_tiles, evaluate, tune, Objective, ParamRange, TileGridSpec};
use stencil_dse::{
    ArchConfig, AreaCoeffs, CalibrationSet, StencilKernel, Strategy as Scheme, TileConfig,
};

fn strategy() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::HexHybrid), Just(Scheme::RectWavefront)]
}

fn small_case() -> impl Strategy<Value = (StencilKernel, TileConfig)> {
    (
        strategy(),
        3u64..60,
        3u64..20,
        1u64..12,
        1u64..=2,
        1u64..10,
        1u64..6,
        1u64..5,
    )
        .prop_map(|(s, s1, s2, t, r, t_s1, t_s2, half)| {
            let kernel = StencilKernel {
                name: "prop".into(),
                sizes: vec![s1, s2],
                time_steps: t,
                stencil_order: r,
                ops_per_point: 3,
                bytes_per_element: 4,
                live_buffers: 2,
            };
            let tile = TileConfig {
                strategy: s,
                t_s1,
                t_s2,
                t_s3: None,
                t_t: 2 * half,
                k: 1,
            };
            (kernel, tile)
        })
}

fn arch() -> impl Strategy<Value = ArchConfig> {
    (
        1u64..64,
        1u64..16,
        1u64..16,
        1.0f64..2000.0,
        0u64..8,
        1u64..12,
    )
        .prop_map(|(n_sm, warps, m, bw, l2, mc)| ArchConfig {
            n_sm,
            n_v: 32 * warps,
            m_sm: 16 * KIB * m,
            bw_global: bw,
            l2_bytes: 512 * KIB * l2,
            mem_ctrl_count: mc,
        })
}

fn coeffs() -> impl Strategy<Value = AreaCoeffs> {
    prop::array::uniform6(0.0f64..10.0).prop_map(|mut a| {
        a[0] += 0.1;
        AreaCoeffs::from_array(a)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_point_lands_in_one_tile((kernel, tile) in small_case()) {
        let counts = tile_point_counts(&kernel, &tile).unwrap();
        let sched = schedule(&kernel, &tile).unwrap();
        prop_assert_eq!(counts.values().sum::<u64>(), kernel.iteration_points());
        prop_assert!(counts.values().all(|&n| n <= sched.tile_volume));
        prop_assert!(sched.total_points_enumerated >= kernel.iteration_points());
    }

    #[test]
    fn tiling_respects_dependences((kernel, tile) in small_case()) {
        // The slopes of both strategies are sized for r = 1.
        prop_assume!(kernel.stencil_order == 1);
        let report = check_legality(&kernel, &tile).unwrap();
        prop_assert_eq!(report.violation_count, 0, "{:?}", report.violations.first());
    }

    #[test]
    fn area_is_linear_in_coefficients(a in arch(), c1 in coeffs(), c2 in coeffs()) {
        let sum = AreaCoeffs::from_array(std::array::from_fn(|i| c1.to_array()[i] + c2.to_array()[i]));
        let lhs = area(&a, &sum);
        let rhs = area(&a, &c1) + area(&a, &c2);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs);
    }

    #[test]
    fn configs_round_trip(a in arch(), c_iter in 0.1f64..20.0, t_sync in 0.0f64..1e4, c in coeffs()) {
        prop_assert_eq!(arch_from_str(&arch_to_json(&a)).unwrap(), a);
        let calib = CalibrationSet { area_coeffs: c, e_op_pj: 3.5, ..CalibrationSet::timing(c_iter, t_sync) };
        prop_assert_eq!(calibration_from_str(&calibration_to_json(&calib)).unwrap(), calib);
        let kernel = StencilKernel {
            name: "rt".into(),
            sizes: vec![64, 32, 16],
            time_steps: 9,
            stencil_order: 2,
            ops_per_point: 7,
            bytes_per_element: 8,
            live_buffers: 3,
        };
        prop_assert_eq!(kernel_from_str(&kernel_to_json(&kernel)).unwrap(), kernel);
    }

    #[test]
    fn energy_grows_with_its_coefficients(
        (kernel, tile) in small_case(),
        a in arch(),
        e in prop::array::uniform4(0.0f64..50.0),
        bump in 0.01f64..10.0,
        which in 0usize..4,
    ) {
        prop_assume!(feasible(&kernel, &a, &tile).feasible);
        let base = CalibrationSet {
            e_op_pj: e[0],
            e_glob_pj_per_byte: e[1],
            e_sh_pj_per_byte: e[2],
            p_static_w: e[3],
            ..CalibrationSet::timing(1.0, 100.0)
        };
        let mut more = base.clone();
        match which {
            0 => more.e_op_pj += bump,
            1 => more.e_glob_pj_per_byte += bump,
            2 => more.e_sh_pj_per_byte += bump,
            _ => more.p_static_w += bump,
        }
        let e0 = energy(&kernel, &a, &base, &tile).unwrap();
        let e1 = energy(&kernel, &a, &more, &tile).unwrap();
        prop_assert!(e1.e_total >= e0.e_total);
        // Energy terms never change the time.
        prop_assert_eq!(t_alg(&kernel, &a, &base, &tile).unwrap(), t_alg(&kernel, &a, &more, &tile).unwrap());
    }

    #[test]
    fn pareto_is_idempotent_and_non_dominated(raw in prop::collection::vec((1u32..50, 0u32..50), 1..120)) {
        let points: Vec<DesignPoint> = raw
            .iter()
            .enumerate()
            .map(|(i, &(a, g))| DesignPoint {
                arch: ArchConfig {
                    n_sm: i as u64 + 1,
                    n_v: 32,
                    m_sm: 48 * KIB,
                    bw_global: 100.0,
                    l2_bytes: 0,
                    mem_ctrl_count: 1,
                },
                area: a as f64,
                per_kernel: Vec::new(),
                weighted_gflops: g as f64,
            })
            .collect();
        let front = pareto(&points);
        prop_assert_eq!(&pareto(&front.points), &front);
        for p in &front.points {
            prop_assert!(!points.iter().any(|q| q.dominates(p)));
        }
        for q in &points {
            prop_assert!(front.points.iter().any(|p| p.dominates(q) || (p.area == q.area && p.weighted_gflops == q.weighted_gflops)));
        }
    }
}

#[test]
fn tuned_best_beats_every_feasible_tile() {
    let kernel = StencilKernel {
        name: "grid".into(),
        sizes: vec![512, 256],
        time_steps: 64,
        stencil_order: 1,
        ops_per_point: 5,
        bytes_per_element: 4,
        live_buffers: 2,
    };
    let arch = ArchConfig {
        n_sm: 6,
        n_v: 64,
        m_sm: 16 * KIB,
        bw_global: 50.0,
        l2_bytes: 0,
        mem_ctrl_count: 1,
    };
    let calib = CalibrationSet {
        e_op_pj: 10.0,
        e_glob_pj_per_byte: 100.0,
        p_static_w: 30.0,
        ..CalibrationSet::timing(2.0, 800.0)
    };
    for strategy in [Scheme::HexHybrid, Scheme::RectWavefront] {
        let grid = TileGridSpec {
            strategy,
            t_s1: ParamRange::values([2, 4, 8, 16, 32]),
            t_t: ParamRange::values([2, 4, 8, 16]),
            t_s2: ParamRange::values([32, 64, 128]),
            t_s3: None,
            k: ParamRange::values([1, 2, 3]),
        };
        for objective in [Objective::Time, Objective::Energy, Objective::Edp] {
            let best = tune(&kernel, &arch, &calib, &grid, objective).unwrap().best;
            for tile in enumerate_tiles(&kernel, &arch, &grid).unwrap() {
                let e = evaluate(&kernel, &arch, &calib, &tile, objective).unwrap();
                assert!(
                    best.objective_value <= e.objective_value,
                    "{tile:?} beats {:?}",
                    best.tile
                );
            }
        }
    }
}
