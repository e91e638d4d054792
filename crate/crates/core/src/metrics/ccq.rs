use std::collections::HashSet;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcqScores {
    pub correctness: f64,
    pub completeness: f64,
    pub quality: f64,
}

/// Integer offsets strictly closer than `tolerance`.
fn offsets(tolerance: f64) -> Vec<[i64; 3]> {
    let r = tolerance.ceil() as i64;
    let t2 = tolerance * tolerance;
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if ((dx * dx + dy * dy + dz * dz) as f64) < t2 {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Number of voxels in `from` with some voxel of `to` closer than `tolerance`.
pub fn matched_count(from: &[[i64; 3]], to: &[[i64; 3]], tolerance: f64) -> usize {
    let targets: HashSet<[i64; 3]> = to.iter().copied().collect();
    let offs = offsets(tolerance);
    from.iter()
        .filter(|p| {
            offs.iter()
                .any(|o| targets.contains(&[p[0] + o[0], p[1] + o[1], p[2] + o[2]]))
        })
        .count()
}

/// Correctness, completeness and quality of centerline voxel sets.
///
/// A voxel is matched when a voxel of the other set lies strictly closer than
/// `tolerance`. Empty prediction scores 0 unless the ground truth is empty too.
pub fn ccq(pred: &[[i64; 3]], gt: &[[i64; 3]], tolerance: f64) -> CcqScores {
    if pred.is_empty() {
        let v = if gt.is_empty() { 1.0 } else { 0.0 };
        return CcqScores {
            correctness: v,
            completeness: v,
            quality: v,
        };
    }
    let tp = matched_count(pred, gt, tolerance);
    let fp = pred.len() - tp;
    let matched_gt = matched_count(gt, pred, tolerance);
    let fn_ = gt.len() - matched_gt;
    let completeness = if gt.is_empty() {
        1.0
    } else {
        matched_gt as f64 / gt.len() as f64
    };
    CcqScores {
        correctness: tp as f64 / pred.len() as f64,
        completeness,
        quality: tp as f64 / (tp + fp + fn_) as f64,
    }
}
