use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::frame::ProjectionFrame;
use super::TourError;

/// Fraction of observations an automatic slice keeps.
pub const AUTO_SLICE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceThickness {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceResult {
    pub distances: Vec<f64>,
    pub in_slice: Vec<bool>,
    pub h: f64,
}

/// Distances of the mean-centred observations from the span of `frame`,
/// and the observations closer than `h`.
///
/// The automatic thickness keeps the closest fifth of the observations and
/// every observation tied with the last one kept.
pub fn slice_mask(coords: &DMatrix<f64>, frame: &ProjectionFrame, h: SliceThickness) -> Result<SliceResult, TourError> {
    let (n, p) = coords.shape();
    if p != frame.p() {
        return Err(TourError::DimensionMismatch {
            expected: frame.p(),
            found: p,
        });
    }
    if n == 0 {
        return Err(TourError::NoObservations);
    }
    if coords.iter().any(|x| !x.is_finite()) {
        return Err(TourError::NonFinite);
    }
    let mean = coords.row_mean();
    let b = frame.basis();
    let distances: Vec<f64> = (0..n)
        .map(|i| {
            let r = (coords.row(i) - &mean).transpose();
            let resid = &r - b * (b.transpose() * &r);
            resid.norm()
        })
        .collect();
    let h = match h {
        SliceThickness::Fixed(h) if h > 0.0 && h.is_finite() => h,
        SliceThickness::Fixed(h) => return Err(TourError::InvalidThickness(h)),
        SliceThickness::Auto => auto_thickness(&distances),
    };
    let in_slice = distances.iter().map(|&d| d < h).collect();
    Ok(SliceResult { distances, in_slice, h })
}

fn auto_thickness(distances: &[f64]) -> f64 {
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = ((AUTO_SLICE_FRACTION * sorted.len() as f64).ceil() as usize).max(1);
    let kept = sorted[m - 1];
    match sorted[m..].iter().find(|&&d| d > kept) {
        Some(&next) => 0.5 * (kept + next),
        None if kept > 0.0 => 2.0 * kept,
        None => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn in_plane_point_has_zero_distance() {
        let coords = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, -2.0, 0.0, 0.0, 0.0, 0.0]);
        let r = slice_mask(&coords, &ProjectionFrame::axes(3, 2).unwrap(), SliceThickness::Fixed(0.1)).unwrap();
        assert_eq!(r.distances, vec![0.0; 3]);
        assert!(r.in_slice.iter().all(|&b| b));
    }

    #[test]
    fn off_plane_point_excluded() {
        let coords = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, -1.0]);
        let r = slice_mask(&coords, &ProjectionFrame::axes(3, 2).unwrap(), SliceThickness::Fixed(0.5)).unwrap();
        assert_abs_diff_eq!(r.distances[0], 1.0);
        assert_eq!(r.in_slice, vec![false, false]);
    }

    #[test]
    fn auto_keeps_a_fifth() {
        let coords = DMatrix::from_fn(100, 3, |i, j| if j == 2 { (i * 37 % 100) as f64 } else { i as f64 });
        let r = slice_mask(&coords, &ProjectionFrame::axes(3, 2).unwrap(), SliceThickness::Auto).unwrap();
        assert_eq!(r.in_slice.iter().filter(|&&b| b).count(), 20);
        for (d, &inside) in r.distances.iter().zip(&r.in_slice) {
            assert_eq!(inside, *d < r.h);
        }
    }

    #[test]
    fn auto_includes_ties() {
        let coords = DMatrix::from_fn(10, 2, |i, j| if j == 1 { if i < 5 { 1.0 } else { -1.0 } } else { 0.0 });
        let r = slice_mask(&coords, &ProjectionFrame::axes(2, 1).unwrap(), SliceThickness::Auto).unwrap();
        assert!(r.in_slice.iter().all(|&b| b));
    }

    #[test]
    fn bad_thickness() {
        let coords = DMatrix::zeros(2, 2);
        let f = ProjectionFrame::axes(2, 1).unwrap();
        assert!(slice_mask(&coords, &f, SliceThickness::Fixed(0.0)).is_err());
        assert!(slice_mask(&DMatrix::zeros(2, 3), &f, SliceThickness::Auto).is_err());
    }
}
