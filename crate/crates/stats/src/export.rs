//! Report and plot-data writers.

use crate::detect::{CellSummary, DataSource, DetectionReport};
use crate::error::StatsError;
use std::fs;
use std::path::Path;

/// Serializes a report to pretty JSON (stable field order, trailing newline).
pub fn report_json(report: &DetectionReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report_json(path: impl AsRef<Path>, report: &DetectionReport) -> Result<(), StatsError> {
    let path = path.as_ref();
    fs::write(path, report_json(report)).map_err(|e| StatsError::io(path, e))
}

/// Writes the HDR contour polygons of the momentum cells as
/// `landmark,group,x,y` rows (vertices in traversal order).
pub fn write_contours_csv(path: impl AsRef<Path>, cells: &[CellSummary]) -> Result<(), StatsError> {
    let path = path.as_ref();
    let mut out = String::from("landmark,group,x,y\n");
    for cell in cells {
        if cell.source != DataSource::Momentum {
            continue;
        }
        if let Some(contour) = &cell.summary.contour {
            for v in contour {
                out.push_str(&format!("{},{},{},{}\n", cell.landmark, cell.group, v[0], v[1]));
            }
        }
    }
    fs::write(path, out).map_err(|e| StatsError::io(path, e))
}

/// Writes the predictive-sample scatter of the momentum cells as
/// `landmark,group,x,y` rows.
pub fn write_scatter_csv(path: impl AsRef<Path>, cells: &[CellSummary]) -> Result<(), StatsError> {
    let path = path.as_ref();
    let mut out = String::from("landmark,group,x,y\n");
    for cell in cells {
        if cell.source != DataSource::Momentum {
            continue;
        }
        for d in &cell.summary.draws {
            out.push_str(&format!("{},{},{},{}\n", cell.landmark, cell.group, d[0], d[1]));
        }
    }
    fs::write(path, out).map_err(|e| StatsError::io(path, e))
}
