use serde::{Deserialize, Serialize};

/// Ground-truth (or thresholded) point: a pixel location with a class label.
///
/// Class ids start at 1; 0 is reserved for background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: f64,
    pub y: f64,
    pub class_id: u32,
}

impl LabeledPoint {
    pub fn new(x: f64, y: f64, class_id: u32) -> Self {
        Self { x, y, class_id }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Raw model output: a location and a confidence per class.
///
/// `confidences[0]` is the background class, `confidences[t]` class `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedPoint {
    pub x: f64,
    pub y: f64,
    pub confidences: Vec<f64>,
}

impl PredictedPoint {
    pub fn new(x: f64, y: f64, confidences: Vec<f64>) -> Self {
        Self { x, y, confidences }
    }

    /// Number of foreground classes.
    pub fn num_classes(&self) -> usize {
        self.confidences.len().saturating_sub(1)
    }

    pub fn background(&self) -> f64 {
        self.confidences[0]
    }

    pub fn confidence(&self, class_id: u32) -> Option<f64> {
        self.confidences.get(class_id as usize).copied()
    }
}

#[inline]
pub(crate) fn euclidean(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    (ax - bx).hypot(ay - by)
}
