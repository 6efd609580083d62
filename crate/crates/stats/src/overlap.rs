//! Interval-box overlap ratios and predictor selection.

use crate::predictive::Box2;

/// Area of intersection over area of union of two axis-aligned boxes;
/// 0 when disjoint, 1 only for identical boxes.
pub fn overlap_ratio_boxes(a: &Box2, b: &Box2) -> f64 {
    let ix = (a.x.hi.min(b.x.hi) - a.x.lo.max(b.x.lo)).max(0.0);
    let iy = (a.y.hi.min(b.y.hi) - a.y.lo.max(b.y.lo)).max(0.0);
    let intersection = ix * iy;
    let union = a.area() + b.area() - intersection;
    if union <= 0.0 {
        // both boxes degenerate; identical points still overlap fully
        return if a == b { 1.0 } else { 0.0 };
    }
    intersection / union
}

/// Landmarks (1-based) whose ratio lies strictly below the threshold,
/// ascending.
pub fn select_predictor(ratios: &[f64], threshold: f64) -> Vec<usize> {
    ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| **r < threshold)
        .map(|(i, _)| i + 1)
        .collect()
}
