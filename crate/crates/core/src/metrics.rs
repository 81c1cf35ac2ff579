//! Prediction quality: Chamfer distance, aligned l2 error and cumulative
//! matching accuracy.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chamfer::chamfer_distance;
use crate::geometry::PointCloud;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaCurve {
    pub thresholds: Vec<Real>,
    pub accuracies: Vec<Real>,
}

impl CmaCurve {
    /// Accuracy at the first threshold `>= delta` (within 1e-12).
    pub fn accuracy_at(&self, delta: Real) -> Option<Real> {
        self.thresholds
            .iter()
            .position(|&t| t >= delta - 1e-12)
            .map(|i| self.accuracies[i])
    }
}

/// Thresholds `0.00, 0.01, …, 0.20`.
pub fn default_thresholds() -> Vec<Real> {
    (0..=20).map(|i| i as Real / 100.0).collect()
}

pub fn eval_chamfer(pred: &PointCloud, gt: &PointCloud) -> Result<Real> {
    Ok(chamfer_distance(pred, gt)?.value)
}

fn aligned_errors(pred: &PointCloud, gt: &PointCloud) -> Result<Vec<Real>> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "aligned metrics need equal sizes, got {} and {}",
            pred.len(),
            gt.len()
        )));
    }
    pred.require_non_empty("aligned metric")?;
    Ok(pred
        .points
        .iter()
        .zip(&gt.points)
        .map(|(&a, &b)| a.distance(b))
        .collect())
}

/// Mean Euclidean distance between index-aligned points.
pub fn correspondence_l2(pred: &PointCloud, gt: &PointCloud) -> Result<Real> {
    let e = aligned_errors(pred, gt)?;
    Ok(e.iter().sum::<Real>() / e.len() as Real)
}

/// Fraction of aligned points within each threshold (inclusive).
pub fn cumulative_matching_accuracy(
    pred: &PointCloud,
    gt: &PointCloud,
    thresholds: &[Real],
) -> Result<CmaCurve> {
    if thresholds.iter().any(|&t| !(t >= 0.0)) || thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("CMA thresholds must be non-negative and ascending"));
    }
    let e = aligned_errors(pred, gt)?;
    let n = e.len() as Real;
    let accuracies = thresholds
        .iter()
        .map(|&t| e.iter().filter(|&&d| d <= t).count() as Real / n)
        .collect();
    Ok(CmaCurve {
        thresholds: thresholds.to_vec(),
        accuracies,
    })
}

/// Writes `delta,accuracy` rows.
pub fn write_cma_csv(path: &Path, curve: &CmaCurve) -> Result<()> {
    let mut s = String::from("delta,accuracy\n");
    for (t, a) in curve.thresholds.iter().zip(&curve.accuracies) {
        s.push_str(&format!("{t:.17e},{a:.17e}\n"));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}
