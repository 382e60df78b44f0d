//! Exact hypervolume for maximization problems.
//!
//! Slicing recursion: sort by the last objective, and for each slab between
//! consecutive levels add the (d-1)-dimensional volume of the points that reach
//! that level. Two objectives use a direct sweep. Cost is `O(n^(d-1) log n)`,
//! which is fine for the front sizes produced here.

use crate::HypervolumeError;

/// Hypervolume of `points` relative to `reference`.
///
/// Every point must weakly dominate the reference (`p_j >= r_j` for all `j`);
/// otherwise [`HypervolumeError::NotDominating`] names the first offender.
pub fn hypervolume<F: AsRef<[f64]>>(points: &[F], reference: &[f64]) -> Result<f64, HypervolumeError> {
    let d = reference.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != d {
            return Err(HypervolumeError::Dimension { index, expected: d, found: p.len() });
        }
        if p.iter().zip(reference).any(|(x, r)| !(x >= r)) {
            return Err(HypervolumeError::NotDominating { index });
        }
        // shift so the reference is the origin
        pts.push(p.iter().zip(reference).map(|(x, r)| x - r).collect());
    }
    if d == 0 || pts.is_empty() {
        return Ok(0.0);
    }
    Ok(volume(&mut pts, d))
}

/// Hypervolume of the points that dominate `reference`; the rest are skipped.
pub fn hypervolume_dominating<F: AsRef<[f64]>>(points: &[F], reference: &[f64]) -> f64 {
    let kept: Vec<&[f64]> = points
        .iter()
        .map(AsRef::as_ref)
        .filter(|p| p.len() == reference.len() && p.iter().zip(reference).all(|(x, r)| x >= r))
        .collect();
    hypervolume(&kept, reference).unwrap_or(0.0)
}

// Points are non-negative and the reference is the origin. Only the first `d`
// coordinates are considered.
fn volume(pts: &mut [Vec<f64>], d: usize) -> f64 {
    match d {
        1 => pts.iter().map(|p| p[0]).fold(0.0, f64::max),
        2 => {
            pts.sort_by(|a, b| b[1].total_cmp(&a[1]));
            let mut area = 0.0;
            let mut best_x = 0.0f64;
            for (i, p) in pts.iter().enumerate() {
                best_x = best_x.max(p[0]);
                let next_y = pts.get(i + 1).map_or(0.0, |q| q[1]);
                area += best_x * (p[1] - next_y);
            }
            area
        }
        _ => {
            let k = d - 1;
            pts.sort_by(|a, b| b[k].total_cmp(&a[k]));
            let mut total = 0.0;
            for i in 0..pts.len() {
                let next = pts.get(i + 1).map_or(0.0, |q| q[k]);
                let height = pts[i][k] - next;
                if height > 0.0 {
                    let mut slab: Vec<Vec<f64>> = pts[..=i].to_vec();
                    total += height * volume(&mut slab, k);
                }
            }
            total
        }
    }
}
