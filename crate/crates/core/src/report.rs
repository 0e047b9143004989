//! Plot-ready CSV tables for tuning and codesign results.
//!
//! Floats are written with Rust's shortest round-trip formatting so that
//! identical inputs give byte-identical files.

use crate::codesign::{resource_allocation, DesignPoint};
use crate::error::{Error, Result};
use crate::model::{AreaCoeffs, TileConfig, KIB};
use crate::tuner::Evaluation;

fn write_rows(header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Domain(format!("csv: {e}"));
    w.write_record(&header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Domain(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Domain(e.to_string()))
}

fn tile_cells(tile: Option<&TileConfig>) -> [String; 6] {
    match tile {
        Some(t) => [
            t.strategy.name().to_string(),
            t.t_s1.to_string(),
            t.t_t.to_string(),
            t.t_s2.to_string(),
            t.t_s3.map_or(String::new(), |v| v.to_string()),
            t.k.to_string(),
        ],
        None => Default::default(),
    }
}

const TILE_FIELDS: [&str; 6] = ["strategy", "t_s1", "t_t", "t_s2", "t_s3", "k"];

/// One row per design point; per-kernel best-tile columns follow the suite
/// order of the first point.
pub fn design_points_csv(points: &[DesignPoint]) -> Result<String> {
    let mut header: Vec<String> = [
        "area_mm2",
        "weighted_gflops",
        "n_sm",
        "n_v",
        "m_sm_kib",
        "l2_kib",
        "mem_ctrl_count",
        "bw_global_gb_s",
    ]
    .map(String::from)
    .to_vec();
    if let Some(first) = points.first() {
        for k in &first.per_kernel {
            for f in TILE_FIELDS.iter().chain(&["gflops"]) {
                header.push(format!("{}_{f}", k.kernel));
            }
        }
    }
    let rows = points.iter().map(|p| {
        let mut row = vec![
            p.area.to_string(),
            p.weighted_gflops.to_string(),
            p.arch.n_sm.to_string(),
            p.arch.n_v.to_string(),
            (p.arch.m_sm / KIB).to_string(),
            (p.arch.l2_bytes / KIB).to_string(),
            p.arch.mem_ctrl_count.to_string(),
            p.arch.bw_global.to_string(),
        ];
        for k in &p.per_kernel {
            row.extend(tile_cells(k.tile.as_ref()));
            row.push(k.gflops.to_string());
        }
        row
    });
    write_rows(header, rows)
}

pub fn resource_allocation_csv(points: &[DesignPoint], coeffs: &AreaCoeffs) -> Result<String> {
    let header = [
        "area_mm2",
        "n_sm",
        "n_v",
        "m_sm_kib",
        "l2_kib",
        "frac_memory",
        "frac_vector",
        "frac_other",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let r = resource_allocation(&p.arch, coeffs)?;
        rows.push(vec![
            p.area.to_string(),
            p.arch.n_sm.to_string(),
            p.arch.n_v.to_string(),
            (p.arch.m_sm / KIB).to_string(),
            (p.arch.l2_bytes / KIB).to_string(),
            r.frac_memory.to_string(),
            r.frac_vector.to_string(),
            r.frac_other.to_string(),
        ]);
    }
    write_rows(header, rows)
}

/// Ranked tuning candidates.
pub fn top_k_csv(evals: &[Evaluation]) -> Result<String> {
    let mut header = vec!["rank".to_string()];
    header.extend(TILE_FIELDS.map(String::from));
    header.extend(
        [
            "objective_value",
            "t_alg_ns",
            "e_total_nj",
            "edp",
            "gflops",
            "compute_bound",
        ]
        .map(String::from),
    );
    let rows = evals.iter().enumerate().map(|(i, e)| {
        let mut row = vec![(i + 1).to_string()];
        row.extend(tile_cells(Some(&e.tile)));
        row.extend([
            e.objective_value.to_string(),
            e.time.t_alg.to_string(),
            e.energy.e_total.to_string(),
            e.energy.edp.to_string(),
            e.time.gflops.to_string(),
            e.time.compute_bound.to_string(),
        ]);
        row
    });
    write_rows(header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codesign::KernelResult;
    use crate::time::fixtures::*;

    #[test]
    fn design_point_row() {
        let p = DesignPoint {
            arch: toy_arch(2),
            area: 12.5,
            per_kernel: vec![
                KernelResult {
                    kernel: "a".into(),
                    weight: 0.5,
                    tile: Some(toy_tile()),
                    gflops: 3.0,
                },
                KernelResult {
                    kernel: "b".into(),
                    weight: 0.5,
                    tile: None,
                    gflops: 0.0,
                },
            ],
            weighted_gflops: 1.5,
        };
        let csv = design_points_csv(&[p]).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().ends_with("b_t_s3,b_k,b_gflops"));
        assert_eq!(
            lines.next().unwrap(),
            "12.5,1.5,2,4,96,0,1,inf,hex_hybrid,4,2,8,,1,3,,,,,,,0"
        );
    }
}
