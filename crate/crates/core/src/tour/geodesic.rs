//! Geodesic interpolation between frame spans.

use nalgebra::DMatrix;

use super::frame::{orthonormalize, ProjectionFrame};
use super::TourError;

/// Default angular step between emitted frames, in radians.
pub const DEFAULT_STEP: f64 = 0.05;

/// Angles below this are treated as zero; their rotation plane is noise.
const TINY_ANGLE: f64 = 1e-10;

/// The geodesic from the span of one frame to the span of another.
///
/// With `F'G = U S V'`, the aligned start `F U` rotates towards `G V` along
/// the principal angles `acos(S)`; frames are rotated back by `U'` so the
/// path starts exactly at `F`.
#[derive(Debug, Clone)]
pub struct Geodesic {
    start: ProjectionFrame,
    from_aligned: DMatrix<f64>,
    ortho: DMatrix<f64>,
    angles: Vec<f64>,
    rotate_back: DMatrix<f64>,
}

impl Geodesic {
    pub fn new(f: &ProjectionFrame, g: &ProjectionFrame) -> Result<Self, TourError> {
        if f.p() != g.p() || f.d() != g.d() {
            return Err(TourError::ShapeMismatch {
                expected: (f.p(), f.d()),
                found: (g.p(), g.d()),
            });
        }
        let cross = f.basis().transpose() * g.basis();
        let svd = cross.svd(true, true);
        let u = svd.u.expect("left singular vectors");
        let v = svd.v_t.expect("right singular vectors").transpose();
        let from_aligned = f.basis() * &u;
        let to_aligned = g.basis() * &v;
        let d = f.d();
        let p = f.p();
        // sin from the residual norm keeps small angles accurate
        let resid: Vec<_> = (0..d)
            .map(|i| to_aligned.column(i) - from_aligned.column(i) * svd.singular_values[i])
            .collect();
        let raw: Vec<f64> = (0..d)
            .map(|i| resid[i].norm().atan2(svd.singular_values[i]))
            .collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
        let mut ortho = DMatrix::zeros(p, d);
        let mut angles = vec![0.0; d];
        let mut done: Vec<usize> = Vec::with_capacity(d);
        for &i in &order {
            if raw[i] < TINY_ANGLE {
                continue;
            }
            let mut col = &resid[i] / resid[i].norm();
            for _ in 0..2 {
                for j in 0..d {
                    let a = from_aligned.column(j).dot(&col);
                    col.axpy(-a, &from_aligned.column(j), 1.0);
                }
                for &j in &done {
                    let a = ortho.column(j).dot(&col);
                    col.axpy(-a, &ortho.column(j), 1.0);
                }
            }
            let norm = col.norm();
            if norm > 0.5 {
                ortho.set_column(i, &(col / norm));
                angles[i] = raw[i];
                done.push(i);
            }
        }
        Ok(Self {
            start: f.clone(),
            from_aligned,
            ortho,
            angles,
            rotate_back: u.transpose(),
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Geodesic length `sqrt(sum theta_i^2)`.
    pub fn distance(&self) -> f64 {
        self.angles.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Frame at fraction `t` of the way; `t = 0` is the start frame.
    pub fn at(&self, t: f64) -> ProjectionFrame {
        if t == 0.0 {
            return self.start.clone();
        }
        let d = self.angles.len();
        let mut m = DMatrix::zeros(self.from_aligned.nrows(), d);
        for i in 0..d {
            let a = t * self.angles[i];
            let col = self.from_aligned.column(i) * a.cos() + self.ortho.column(i) * a.sin();
            m.set_column(i, &col);
        }
        let m = m * &self.rotate_back;
        orthonormalize(&m).expect("geodesic frames have full rank")
    }
}

/// Principal angles between the spans of two frames, ascending.
pub fn principal_angles(f: &ProjectionFrame, g: &ProjectionFrame) -> Vec<f64> {
    let cross = f.basis().transpose() * g.basis();
    let outside = g.basis() - f.basis() * &cross;
    let mut cos: Vec<f64> = cross.singular_values().iter().copied().collect();
    let mut sin: Vec<f64> = outside.singular_values().iter().copied().collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    sin.sort_by(f64::total_cmp);
    cos.iter().zip(&sin).map(|(c, s)| s.atan2(*c)).collect()
}

/// Grassmann distance `sqrt(sum theta_i^2)` between frame spans.
pub fn frame_distance(f: &ProjectionFrame, g: &ProjectionFrame) -> f64 {
    principal_angles(f, g).iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Frames from `f` to the span of `g`, spaced at most `step` apart. The
/// first frame is `f`; identical spans give just `f`.
pub fn geodesic_interpolate(f: &ProjectionFrame, g: &ProjectionFrame, step: f64) -> Result<Vec<ProjectionFrame>, TourError> {
    if step.is_nan() || step <= 0.0 {
        return Err(TourError::InvalidStep(step));
    }
    let geo = Geodesic::new(f, g)?;
    let dist = geo.distance();
    if dist < 1e-12 {
        return Ok(vec![f.clone()]);
    }
    let steps = (dist / step).ceil() as usize;
    Ok((0..=steps).map(|i| geo.at(i as f64 / steps as f64)).collect())
}

/// The frame reached by following the geodesic from `f` all the way to the
/// span of `g`: it spans `g` and is oriented consistently with `f`.
pub fn align_to(f: &ProjectionFrame, g: &ProjectionFrame) -> Result<ProjectionFrame, TourError> {
    Ok(Geodesic::new(f, g)?.at(1.0))
}

/// Interpolates consecutive frames of a chain, pinning every segment's end
/// to the next frame of the chain.
pub fn interpolate_chain(frames: &[ProjectionFrame], step: f64) -> Result<Vec<ProjectionFrame>, TourError> {
    let mut out = Vec::new();
    let Some(first) = frames.first() else {
        return Ok(out);
    };
    out.push(first.clone());
    for w in frames.windows(2) {
        let seg = geodesic_interpolate(&w[0], &w[1], step)?;
        if seg.len() > 1 {
            out.extend(seg[1..seg.len() - 1].iter().cloned());
            out.push(w[1].clone());
        }
    }
    Ok(out)
}
