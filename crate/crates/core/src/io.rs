//! Dataset ingestion, serialization, and synthetic shape generation.
//!
//! Template files are plain CSV with the exact schema
//! `template_id,landmark_id,x,y` (UTF-8, LF line endings, 1-based landmark
//! ids, 17 significant digits). A *group* is a JSON manifest naming its role
//! and the template files it contains.

use crate::error::CoreError;
use crate::geodesic::LandmarkTemplate;
use crate::seed;
use crate::Vec2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

pub const TEMPLATE_CSV_HEADER: &str = "template_id,landmark_id,x,y";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupRole {
    Control,
    Case,
    Unlabeled,
}

impl fmt::Display for GroupRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupRole::Control => write!(f, "control"),
            GroupRole::Case => write!(f, "case"),
            GroupRole::Unlabeled => write!(f, "unlabeled"),
        }
    }
}

/// Describes one group of landmark templates on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupManifest {
    pub name: String,
    pub role: GroupRole,
    /// Landmark count shared by every referenced template.
    pub landmarks: usize,
    /// Template CSV paths, relative to the manifest file.
    pub templates: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landmark_names: Option<Vec<String>>,
}

/// Formats a coordinate with 17 significant digits (lossless for f64).
fn fmt_coord(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes templates to a CSV file with the exact column schema. Template ids
/// come from the labels (or a positional fallback) and are suffixed
/// deterministically when they collide, since the id is the template's
/// identity within a file.
pub fn write_templates_csv(
    path: impl AsRef<Path>,
    templates: &[LandmarkTemplate],
) -> Result<(), CoreError> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(TEMPLATE_CSV_HEADER);
    out.push('\n');
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (t_idx, template) in templates.iter().enumerate() {
        let base_id = template
            .label()
            .map(str::to_owned)
            .unwrap_or_else(|| format!("t{:03}", t_idx + 1));
        let count = seen.entry(base_id.clone()).or_insert(0);
        *count += 1;
        let id = if *count == 1 {
            base_id
        } else {
            format!("{base_id}_{count}")
        };
        for (l_idx, p) in template.points().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                id,
                l_idx + 1,
                fmt_coord(p.x),
                fmt_coord(p.y)
            ));
        }
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| CoreError::io(path, e))?;
        }
    }
    fs::write(path, out).map_err(|e| CoreError::io(path, e))
}

/// Writes named 2-vector sets (e.g. momentum fields) with the same column
/// schema as templates.
pub fn write_vector_sets_csv(
    path: impl AsRef<Path>,
    sets: &[(String, Vec<Vec2>)],
) -> Result<(), CoreError> {
    let templates = sets
        .iter()
        .map(|(id, vectors)| LandmarkTemplate::with_label(vectors.clone(), id.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    write_templates_csv(path, &templates)
}

/// Reads templates from a CSV file; templates appear in file order and
/// landmark rows are sorted by landmark id.
pub fn read_templates_csv(path: impl AsRef<Path>) -> Result<Vec<LandmarkTemplate>, CoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let mut lines = text.lines().enumerate();

    match lines.next() {
        Some((_, header)) if header.trim_end() == TEMPLATE_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(CoreError::ingest(
                path,
                Some(1),
                format!("expected header '{TEMPLATE_CSV_HEADER}', got '{header}'"),
            ))
        }
        None => return Err(CoreError::ingest(path, Some(1), "empty file")),
    }

    // template id → rows (landmark_id, point), keeping first-seen file order
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<(usize, Vec2)>> = BTreeMap::new();

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CoreError::ingest(
                path,
                Some(line_no),
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let template_id = fields[0].trim().to_owned();
        let landmark_id: usize = fields[1].trim().parse().map_err(|_| {
            CoreError::ingest(
                path,
                Some(line_no),
                format!("invalid landmark_id '{}'", fields[1]),
            )
        })?;
        if landmark_id == 0 {
            return Err(CoreError::ingest(
                path,
                Some(line_no),
                "landmark_id is 1-based",
            ));
        }
        let parse = |s: &str, what: &str| -> Result<f64, CoreError> {
            let v: f64 = s.trim().parse().map_err(|_| {
                CoreError::ingest(path, Some(line_no), format!("invalid {what} '{s}'"))
            })?;
            if !v.is_finite() {
                return Err(CoreError::ingest(
                    path,
                    Some(line_no),
                    format!("non-finite {what} '{s}'"),
                ));
            }
            Ok(v)
        };
        let x = parse(fields[2], "x coordinate")?;
        let y = parse(fields[3], "y coordinate")?;
        if !rows.contains_key(&template_id) {
            order.push(template_id.clone());
        }
        rows.entry(template_id)
            .or_default()
            .push((landmark_id, Vec2::new(x, y)));
    }

    let mut templates = Vec::with_capacity(order.len());
    for id in order {
        let mut entries = rows.remove(&id).expect("id recorded on insert");
        entries.sort_by_key(|(lid, _)| *lid);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(CoreError::ingest(
                    path,
                    None,
                    format!("template '{id}' repeats landmark_id {}", w[0].0),
                ));
            }
        }
        let points: Vec<Vec2> = entries.into_iter().map(|(_, p)| p).collect();
        templates.push(LandmarkTemplate::with_label(points, id)?);
    }
    if templates.is_empty() {
        return Err(CoreError::ingest(path, None, "file contains no landmark rows"));
    }
    Ok(templates)
}

/// Reads a group manifest and its referenced templates (manifest order).
pub fn read_group(
    manifest_path: impl AsRef<Path>,
) -> Result<(GroupManifest, Vec<LandmarkTemplate>), CoreError> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| CoreError::io(manifest_path, e))?;
    let manifest: GroupManifest = serde_json::from_str(&text)
        .map_err(|e| CoreError::ingest(manifest_path, None, format!("invalid manifest: {e}")))?;
    if let Some(names) = &manifest.landmark_names {
        if names.len() != manifest.landmarks {
            return Err(CoreError::ingest(
                manifest_path,
                None,
                format!(
                    "landmark_names has {} entries for {} landmarks",
                    names.len(),
                    manifest.landmarks
                ),
            ));
        }
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new(""));
    let mut templates = Vec::new();
    for rel in &manifest.templates {
        let file = base.join(rel);
        for template in read_templates_csv(&file)? {
            if template.len() != manifest.landmarks {
                return Err(CoreError::ingest(
                    &file,
                    None,
                    format!(
                        "template '{}' has {} landmarks, manifest declares {}",
                        template.label().unwrap_or("?"),
                        template.len(),
                        manifest.landmarks
                    ),
                ));
            }
            templates.push(template);
        }
    }
    if templates.is_empty() {
        return Err(CoreError::ingest(
            manifest_path,
            None,
            "manifest references no templates",
        ));
    }
    Ok((manifest, templates))
}

/// Writes a group: one CSV with all templates next to the manifest, plus the
/// manifest itself. Returns the written manifest.
pub fn write_group(
    manifest_path: impl AsRef<Path>,
    name: &str,
    role: GroupRole,
    templates: &[LandmarkTemplate],
    landmark_names: Option<Vec<String>>,
) -> Result<GroupManifest, CoreError> {
    let manifest_path = manifest_path.as_ref();
    if templates.is_empty() {
        return Err(CoreError::InvalidArgument(
            "cannot write an empty group".into(),
        ));
    }
    let landmarks = templates[0].len();
    for t in templates {
        if t.len() != landmarks {
            return Err(CoreError::ShapeMismatch {
                context: "write_group",
                expected: landmarks,
                got: t.len(),
            });
        }
    }
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("group");
    let csv_name = format!("{stem}_templates.csv");
    let base = manifest_path.parent().unwrap_or_else(|| Path::new(""));
    write_templates_csv(base.join(&csv_name), templates)?;

    let manifest = GroupManifest {
        name: name.to_owned(),
        role,
        landmarks,
        templates: vec![csv_name],
        landmark_names,
    };
    let mut json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CoreError::ingest(manifest_path, None, format!("manifest encode: {e}")))?;
    json.push('\n');
    fs::write(manifest_path, json).map_err(|e| CoreError::io(manifest_path, e))?;
    Ok(manifest)
}

/// Ellipse `x²/a² + y²/b² = 1` sampled at equal parameter angles.
pub fn synth_ellipse(a_axis: f64, b_axis: f64, n_landmarks: usize) -> LandmarkTemplate {
    let pts = (0..n_landmarks)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / n_landmarks as f64;
            Vec2::new(a_axis * th.cos(), b_axis * th.sin())
        })
        .collect();
    LandmarkTemplate::new(pts).expect("ellipse points are finite")
}

/// Heart-shaped curve sampled at equal parameter angles:
/// `x = (13cosθ − 5cos2θ − 2cos3θ − cos4θ)/5`, `y = 16sin³θ/5`.
pub fn synth_heart(n_landmarks: usize) -> LandmarkTemplate {
    let pts = (0..n_landmarks)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / n_landmarks as f64;
            let x = (13.0 * th.cos()
                - 5.0 * (2.0 * th).cos()
                - 2.0 * (3.0 * th).cos()
                - (4.0 * th).cos())
                / 5.0;
            let y = 16.0 * th.sin().powi(3) / 5.0;
            Vec2::new(x, y)
        })
        .collect();
    LandmarkTemplate::new(pts).expect("heart points are finite")
}

/// Synthetic group for the outlier experiments: `round(α·m)` identical
/// heart-curve outliers appended to ellipses whose axes are Gaussian draws
/// `(a, b) ~ N(axis_mean, axis_sd²)`, truncated below at 0.1.
pub fn synth_group(
    alpha: f64,
    m: usize,
    n_landmarks: usize,
    axis_mean: (f64, f64),
    axis_sd: f64,
    seed: u64,
) -> Result<Vec<LandmarkTemplate>, CoreError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CoreError::InvalidArgument(format!(
            "outlier fraction must lie in [0,1], got {alpha}"
        )));
    }
    if m == 0 || n_landmarks == 0 {
        return Err(CoreError::InvalidArgument(
            "group size and landmark count must be >= 1".into(),
        ));
    }
    let outliers = (alpha * m as f64).round() as usize;
    let mut rng = seed::stream(seed, &[0x5f3759df]);
    let mut group = Vec::with_capacity(m);
    for i in 0..m - outliers {
        let za: f64 = rng.sample(StandardNormal);
        let zb: f64 = rng.sample(StandardNormal);
        let a = (axis_mean.0 + axis_sd * za).max(0.1);
        let b = (axis_mean.1 + axis_sd * zb).max(0.1);
        let mut t = synth_ellipse(a, b, n_landmarks);
        t.set_label(format!("ellipse_{:03}", i + 1));
        group.push(t);
    }
    for i in 0..outliers {
        let mut t = synth_heart(n_landmarks);
        t.set_label(format!("heart_{:03}", i + 1));
        group.push(t);
    }
    Ok(group)
}

/// Default axis distribution of the outlier experiment:
/// mean `(4, 2)`, per-axis variance `0.2`.
pub const DEFAULT_AXIS_MEAN: (f64, f64) = (4.0, 2.0);

pub fn default_axis_sd() -> f64 {
    0.2f64.sqrt()
}

/// Control/case pair for planted-truth detection tests: both groups are a
/// circular base shape with i.i.d. Gaussian landmark noise of scale `sigma`;
/// the case group's `planted` landmark (0-based) is additionally displaced by
/// `shift_sigmas · sigma` along x.
pub fn synth_planted_pair(
    members: usize,
    n_landmarks: usize,
    sigma: f64,
    shift_sigmas: f64,
    planted: usize,
    seed_value: u64,
) -> Result<(Vec<LandmarkTemplate>, Vec<LandmarkTemplate>), CoreError> {
    if members == 0 || n_landmarks == 0 {
        return Err(CoreError::InvalidArgument(
            "group size and landmark count must be >= 1".into(),
        ));
    }
    if planted >= n_landmarks {
        return Err(CoreError::InvalidArgument(format!(
            "planted landmark {planted} out of range for {n_landmarks} landmarks"
        )));
    }
    let base: Vec<Vec2> = (0..n_landmarks)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / n_landmarks as f64;
            Vec2::new(3.0 * th.cos(), 3.0 * th.sin())
        })
        .collect();
    let make_group = |group_tag: u64, shift: f64, name: &str| -> Vec<LandmarkTemplate> {
        (0..members)
            .map(|i| {
                let mut rng = seed::stream(seed_value, &[0x91a7ed, group_tag, i as u64]);
                let pts = base
                    .iter()
                    .enumerate()
                    .map(|(j, p)| {
                        let mut q = p
                            + Vec2::new(
                                sigma * rng.sample::<f64, _>(StandardNormal),
                                sigma * rng.sample::<f64, _>(StandardNormal),
                            );
                        if j == planted {
                            q.x += shift;
                        }
                        q
                    })
                    .collect();
                LandmarkTemplate::with_label(pts, format!("{name}_{:03}", i + 1))
                    .expect("finite noisy landmarks")
            })
            .collect()
    };
    let controls = make_group(1, 0.0, "control");
    let cases = make_group(2, shift_sigmas * sigma, "case");
    Ok((controls, cases))
}
