//! Proposal-candidate grid, offset application and confidence thresholding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{LabeledPoint, PredictedPoint};

/// Anchors per receptive-field cell used by default (a 2x2 sub-grid).
pub const DEFAULT_PER_CELL: (usize, usize) = (2, 2);

/// Feature-map geometry: `feature_height x feature_width` cells of
/// `stride x stride` pixels, each holding a `k_rows x k_cols` anchor sub-grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub feature_height: usize,
    pub feature_width: usize,
    pub stride: usize,
    pub per_cell: (usize, usize),
}

impl GridSpec {
    pub fn new(
        feature_height: usize,
        feature_width: usize,
        stride: usize,
        per_cell: (usize, usize),
    ) -> Result<Self> {
        let spec = Self {
            feature_height,
            feature_width,
            stride,
            per_cell,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_height == 0
            || self.feature_width == 0
            || self.stride == 0
            || self.per_cell.0 == 0
            || self.per_cell.1 == 0
        {
            return Err(Error::InvalidConfig(format!(
                "grid dimensions must all be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Total anchor count M.
    pub fn num_anchors(&self) -> usize {
        self.feature_height * self.feature_width * self.per_cell.0 * self.per_cell.1
    }

    /// Patch extent in pixels as `(width, height)`.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.feature_width * self.stride) as f64,
            (self.feature_height * self.stride) as f64,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub positions: Vec<(f64, f64)>,
    pub spec: GridSpec,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Places anchors at the sub-cell centers of every receptive-field cell.
///
/// Order is row-major over feature cells, then row-major within each cell.
pub fn make_grid(spec: GridSpec) -> AnchorSet {
    let (k_rows, k_cols) = spec.per_cell;
    let s = spec.stride as f64;
    let step_x = s / k_cols as f64;
    let step_y = s / k_rows as f64;
    let mut positions = Vec::with_capacity(spec.num_anchors());
    for cy in 0..spec.feature_height {
        for cx in 0..spec.feature_width {
            let (ox, oy) = (cx as f64 * s, cy as f64 * s);
            for a in 0..k_rows {
                for b in 0..k_cols {
                    positions.push((
                        ox + (b as f64 + 0.5) * step_x,
                        oy + (a as f64 + 0.5) * step_y,
                    ));
                }
            }
        }
    }
    AnchorSet { positions, spec }
}

/// Moves each anchor by its regressed offset and attaches its confidences.
/// Positions are not clamped to the patch.
pub fn apply_offsets(
    anchors: &AnchorSet,
    offsets: &[(f64, f64)],
    confidences: &[Vec<f64>],
) -> Result<Vec<PredictedPoint>> {
    let m = anchors.len();
    if offsets.len() != m {
        return Err(Error::LengthMismatch {
            what: "offsets",
            expected: m,
            actual: offsets.len(),
        });
    }
    if confidences.len() != m {
        return Err(Error::LengthMismatch {
            what: "confidences",
            expected: m,
            actual: confidences.len(),
        });
    }
    Ok(anchors
        .positions
        .iter()
        .zip(offsets)
        .zip(confidences)
        .map(|((&(x, y), &(dx, dy)), conf)| PredictedPoint::new(x + dx, y + dy, conf.clone()))
        .collect())
}

/// Keeps points whose argmax class is foreground and whose confidence for
/// that class strictly exceeds the class threshold.
///
/// `thresholds[t - 1]` applies to class `t`. Argmax ties resolve to the
/// lower index, so background wins a tie with any foreground class.
pub fn threshold_predictions(
    points: &[PredictedPoint],
    thresholds: &[f64],
) -> Result<Vec<(LabeledPoint, f64)>> {
    let mut out = Vec::new();
    for p in points {
        if p.num_classes() != thresholds.len() {
            return Err(Error::LengthMismatch {
                what: "thresholds",
                expected: p.num_classes(),
                actual: thresholds.len(),
            });
        }
        let (best, conf) = p
            .confidences
            .iter()
            .copied()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, c)| {
                if c > acc.1 {
                    (i, c)
                } else {
                    acc
                }
            });
        if best == 0 || conf <= thresholds[best - 1] {
            continue;
        }
        out.push((LabeledPoint::new(p.x, p.y, best as u32), conf));
    }
    Ok(out)
}
