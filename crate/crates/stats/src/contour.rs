//! Highest-density-region contours of a predictive sample.
//!
//! The sample density is estimated on a grid, the iso-level enclosing the
//! requested probability mass is found by sorting grid cells by density, and
//! the iso-line is traced with marching squares. Segment endpoints are keyed
//! by the grid edge they sit on, so loops chain exactly.

use crate::error::StatsError;
use crate::kde::{kde_grid, GridDensity, KdeOptions};
use std::collections::HashMap;

/// Iso-density level enclosing `level` of the estimated probability mass.
pub fn hdr_threshold(grid: &GridDensity, level: f64) -> f64 {
    let mut densities = grid.values.clone();
    densities.sort_by(|a, b| b.partial_cmp(a).expect("finite densities"));
    let cell = grid.cell_area();
    let target = level * grid.total_mass();
    let mut acc = 0.0;
    for d in &densities {
        acc += d * cell;
        if acc >= target {
            return *d;
        }
    }
    *densities.last().unwrap_or(&0.0)
}

/// Extracts the 95% (or other level) highest-density-region contour of a
/// sample as a closed polygon. When the iso-line splits into several loops,
/// the largest-area loop is returned.
pub fn hpd_contour(
    samples: &[[f64; 2]],
    level: f64,
    opts: &KdeOptions,
) -> Result<Vec<[f64; 2]>, StatsError> {
    if samples.len() < 100 {
        return Err(StatsError::TooFewDraws {
            got: samples.len(),
            need: 100,
        });
    }
    if !(0.0 < level && level < 1.0) {
        return Err(StatsError::InvalidOption(format!(
            "contour level must lie in (0,1), got {level}"
        )));
    }
    let grid = kde_grid(samples, opts)?;
    let threshold = hdr_threshold(&grid, level);
    let loops = trace_iso_lines(&grid, threshold);
    loops
        .into_iter()
        .max_by(|a, b| {
            polygon_area(a)
                .abs()
                .partial_cmp(&polygon_area(b).abs())
                .expect("finite area")
        })
        .ok_or_else(|| StatsError::InvalidOption("iso-level produced no contour".into()))
}

/// Shoelace area of a closed polygon (vertices without a repeated endpoint).
pub fn polygon_area(polygon: &[[f64; 2]]) -> f64 {
    let n = polygon.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += polygon[i][0] * polygon[j][1] - polygon[j][0] * polygon[i][1];
    }
    0.5 * acc
}

/// A point on a grid edge: `(node_index, axis)` with `axis` 0 for the edge to
/// `ix+1` and 1 for the edge to `iy+1`.
type EdgeId = (usize, u8);

fn interpolate(grid: &GridDensity, threshold: f64, edge: EdgeId) -> [f64; 2] {
    let (node, axis) = edge;
    let ix = node % grid.nx;
    let iy = node / grid.nx;
    let v0 = grid.value(ix, iy);
    let (x0, y0) = (grid.x_at(ix), grid.y_at(iy));
    if axis == 0 {
        let v1 = grid.value(ix + 1, iy);
        let t = if (v1 - v0).abs() < f64::MIN_POSITIVE {
            0.5
        } else {
            ((threshold - v0) / (v1 - v0)).clamp(0.0, 1.0)
        };
        [x0 + t * grid.dx, y0]
    } else {
        let v1 = grid.value(ix, iy + 1);
        let t = if (v1 - v0).abs() < f64::MIN_POSITIVE {
            0.5
        } else {
            ((threshold - v0) / (v1 - v0)).clamp(0.0, 1.0)
        };
        [x0, y0 + t * grid.dy]
    }
}

/// Marching squares: returns all closed iso-loops at the threshold.
fn trace_iso_lines(grid: &GridDensity, threshold: f64) -> Vec<Vec<[f64; 2]>> {
    let nx = grid.nx;
    let ny = grid.ny;
    // adjacency between edge ids, one segment per (cell, case)
    let mut links: HashMap<EdgeId, Vec<EdgeId>> = HashMap::new();
    let mut add = |a: EdgeId, b: EdgeId| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };

    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let node = iy * nx + ix;
            let inside = |v: f64| v >= threshold;
            let c0 = inside(grid.value(ix, iy)); // bottom-left
            let c1 = inside(grid.value(ix + 1, iy)); // bottom-right
            let c2 = inside(grid.value(ix + 1, iy + 1)); // top-right
            let c3 = inside(grid.value(ix, iy + 1)); // top-left

            let bottom: EdgeId = (node, 0);
            let right: EdgeId = (node + 1, 1);
            let top: EdgeId = (node + nx, 0);
            let left: EdgeId = (node, 1);

            let case = (c0 as u8) | (c1 as u8) << 1 | (c2 as u8) << 2 | (c3 as u8) << 3;
            match case {
                0 | 15 => {}
                1 | 14 => add(left, bottom),
                2 | 13 => add(bottom, right),
                3 | 12 => add(left, right),
                4 | 11 => add(right, top),
                6 | 9 => add(bottom, top),
                7 | 8 => add(top, left),
                5 | 10 => {
                    // saddle: resolve by the cell-center average
                    let center = 0.25
                        * (grid.value(ix, iy)
                            + grid.value(ix + 1, iy)
                            + grid.value(ix + 1, iy + 1)
                            + grid.value(ix, iy + 1));
                    let center_inside = center >= threshold;
                    if (case == 5) == center_inside {
                        add(left, bottom);
                        add(right, top);
                    } else {
                        add(bottom, right);
                        add(top, left);
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    // walk the adjacency into closed loops
    let mut visited: HashMap<EdgeId, bool> = HashMap::new();
    let mut loops = Vec::new();
    let mut edges: Vec<EdgeId> = links.keys().cloned().collect();
    edges.sort_unstable();
    for start in edges {
        if *visited.get(&start).unwrap_or(&false) {
            continue;
        }
        let mut polygon = Vec::new();
        let mut prev: Option<EdgeId> = None;
        let mut current = start;
        loop {
            visited.insert(current, true);
            polygon.push(interpolate(grid, threshold, current));
            let neighbors = &links[&current];
            let next = neighbors
                .iter()
                .find(|e| Some(**e) != prev && !*visited.get(*e).unwrap_or(&false));
            match next {
                Some(&n) => {
                    prev = Some(current);
                    current = n;
                }
                None => break,
            }
        }
        if polygon.len() >= 3 {
            loops.push(polygon);
        }
    }
    loops
}

#[cfg(test)]
mod tests {
    use super::*;
    use momenta_core::seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn standard_normal_sample(n: usize, seed_value: u64) -> Vec<[f64; 2]> {
        let mut rng = seed::stream(seed_value, &[0x993]);
        (0..n)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect()
    }

    #[test]
    fn gaussian_contour_radius_matches_chi_square() {
        // the 95% HDR of a standard bivariate normal is a circle of radius
        // sqrt(5.9915) ≈ 2.4477
        let samples = standard_normal_sample(100_000, 41);
        let polygon = hpd_contour(&samples, 0.95, &KdeOptions::default()).unwrap();
        assert!(polygon.len() > 20);
        let expected = 2.4477f64;
        for v in &polygon {
            let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!(
                (r - expected).abs() / expected < 0.05,
                "vertex radius {r} deviates from {expected}"
            );
        }
    }

    #[test]
    fn contour_translates_with_the_sample() {
        let samples = standard_normal_sample(50_000, 42);
        let shifted: Vec<[f64; 2]> = samples.iter().map(|s| [s[0] + 3.0, s[1] - 2.0]).collect();
        let a = hpd_contour(&samples, 0.95, &KdeOptions::default()).unwrap();
        let b = hpd_contour(&shifted, 0.95, &KdeOptions::default()).unwrap();
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.iter().zip(&b) {
            assert!((pa[0] + 3.0 - pb[0]).abs() < 1e-9);
            assert!((pa[1] - 2.0 - pb[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn contour_area_is_stable_across_bandwidths() {
        let samples = standard_normal_sample(100_000, 43);
        let a = hpd_contour(
            &samples,
            0.95,
            &KdeOptions {
                bandwidth_scale: 0.9,
                ..Default::default()
            },
        )
        .unwrap();
        let b = hpd_contour(
            &samples,
            0.95,
            &KdeOptions {
                bandwidth_scale: 1.1,
                ..Default::default()
            },
        )
        .unwrap();
        let ra = polygon_area(&a).abs();
        let rb = polygon_area(&b).abs();
        assert!(
            (ra - rb).abs() / ra < 0.03,
            "areas {ra} vs {rb} differ beyond 3%"
        );
    }

    #[test]
    fn too_few_draws_is_an_error() {
        let samples = standard_normal_sample(99, 44);
        assert!(matches!(
            hpd_contour(&samples, 0.95, &KdeOptions::default()),
            Err(StatsError::TooFewDraws { .. })
        ));
    }
}
