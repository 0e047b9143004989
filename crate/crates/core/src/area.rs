//! Block-additive silicon-area model and its least-squares calibration.
//!
//! ```text
//! area = a_fixed + n_SM · (a_sm_fixed + a_lane·n_V + a_shmem·M_SM[KiB])
//!        + a_l2·L2[KiB] + a_mc·n_MC
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{load_arch, read_json};
use crate::error::{Error, Result};
use crate::model::{ArchConfig, AreaCoeffs};

/// Multipliers of each coefficient in the area sum, in [`AreaCoeffs::NAMES`] order.
pub fn features(arch: &ArchConfig) -> [f64; 6] {
    let n_sm = arch.n_sm as f64;
    [
        1.0,
        n_sm,
        n_sm * arch.n_v as f64,
        n_sm * arch.m_sm_kib(),
        arch.l2_kib(),
        arch.mem_ctrl_count as f64,
    ]
}

pub fn area(arch: &ArchConfig, coeffs: &AreaCoeffs) -> f64 {
    let n_sm = arch.n_sm as f64;
    coeffs.a_fixed
        + n_sm
            * (coeffs.a_sm_fixed
                + coeffs.a_lane * arch.n_v as f64
                + coeffs.a_shmem_kib * arch.m_sm_kib())
        + coeffs.a_l2_kib * arch.l2_kib()
        + coeffs.a_mc * arch.mem_ctrl_count as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaAnchor {
    pub arch: ArchConfig,
    pub area_mm2: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AnchorFileEntry {
    arch: std::path::PathBuf,
    area_mm2: f64,
}

/// Reads `[{arch: path, area_mm2}]`; arch paths are relative to the anchor file.
pub fn load_anchors(path: impl AsRef<Path>) -> Result<Vec<AreaAnchor>> {
    let path = path.as_ref();
    let entries: Vec<AnchorFileEntry> = read_json(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    entries
        .into_iter()
        .map(|e| {
            if !(e.area_mm2 > 0.0 && e.area_mm2.is_finite()) {
                return Err(Error::validation("area_mm2", "must be positive"));
            }
            Ok(AreaAnchor {
                arch: load_arch(base.join(&e.arch))?,
                area_mm2: e.area_mm2,
            })
        })
        .collect()
}

/// Fits the `free` coefficients to the anchors by least squares, holding the
/// rest at their values in `fixed`.
pub fn calibrate(anchors: &[AreaAnchor], free: &[&str], fixed: &AreaCoeffs) -> Result<AreaCoeffs> {
    let mut columns = Vec::with_capacity(free.len());
    for name in free {
        let idx = AreaCoeffs::index_of(name)
            .ok_or_else(|| Error::validation("free", format!("unknown coefficient `{name}`")))?;
        if columns.contains(&idx) {
            return Err(Error::validation("free", format!("`{name}` listed twice")));
        }
        columns.push(idx);
    }
    if columns.is_empty() {
        return Err(Error::validation(
            "free",
            "at least one coefficient must be free",
        ));
    }
    if anchors.len() < columns.len() {
        return Err(Error::Rank(format!(
            "{} anchors cannot determine {} coefficients",
            anchors.len(),
            columns.len()
        )));
    }

    let held = fixed.to_array();
    let rows = anchors.len();
    let mut a = DMatrix::<f64>::zeros(rows, columns.len());
    let mut b = DVector::<f64>::zeros(rows);
    for (i, anchor) in anchors.iter().enumerate() {
        let f = features(&anchor.arch);
        let mut rhs = anchor.area_mm2;
        for j in 0..6 {
            match columns.iter().position(|&c| c == j) {
                Some(col) => a[(i, col)] = f[j],
                None => rhs -= held[j] * f[j],
            }
        }
        b[i] = rhs;
    }

    // Column scaling keeps the rank test meaningful when features differ by
    // orders of magnitude (1 vs. n_SM·n_V).
    let scale: Vec<f64> = (0..columns.len()).map(|j| a.column(j).norm()).collect();
    if let Some(j) = scale.iter().position(|&s| s == 0.0) {
        return Err(Error::Rank(format!(
            "coefficient `{}` has no support in the anchors",
            AreaCoeffs::NAMES[columns[j]]
        )));
    }
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).unscale_mut(*s);
    }
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    let tol = 1e-10 * max_sv * rows.max(columns.len()) as f64;
    if min_sv <= tol {
        return Err(Error::Rank(format!(
            "anchor features are linearly dependent (singular values {min_sv:e}..{max_sv:e})"
        )));
    }
    let x = svd.solve(&b, tol).map_err(|e| Error::Rank(e.to_string()))?;

    let mut out = held;
    for (j, &idx) in columns.iter().enumerate() {
        let v = x[j] / scale[j];
        if v < 0.0 {
            return Err(Error::NegativeCoeff {
                name: AreaCoeffs::NAMES[idx].to_string(),
                value: v,
            });
        }
        out[idx] = v;
    }
    Ok(AreaCoeffs::from_array(out))
}
