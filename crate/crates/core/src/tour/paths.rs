use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{orthonormalize, random_frame, ProjectionFrame};
use super::geodesic::{align_to, interpolate_chain, Geodesic, DEFAULT_STEP};
use super::index::{Grouping, ScatterMatrices, TourIndex};
use super::{TourError, MAX_PROJECTION_DIM};
use crate::control::JobControl;

pub const DEFAULT_N_BASES: usize = 20;
pub const DEFAULT_MAX_ITER: usize = 500;
/// Starting half-angle of the guided tour's search neighbourhood.
pub const GUIDED_INITIAL_ANGLE: f64 = std::f64::consts::FRAC_PI_4;
/// Factor applied to the search angle after each rejected proposal.
pub const GUIDED_COOLING: f64 = 0.95;
/// Consecutive rejections after which the search angle is reset.
pub const GUIDED_RESTART_AFTER: usize = 30;
/// Hard cap on guided-tour proposals, as a multiple of `max_iter`.
const GUIDED_TOTAL_FACTOR: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TourKind {
    Grand,
    Guided,
    Radial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TourPath {
    pub kind: TourKind,
    pub seed: u64,
    pub step: f64,
    pub base_frames: Vec<ProjectionFrame>,
    pub interpolated: Vec<ProjectionFrame>,
    /// Index value of each base frame (guided tours).
    pub index_trace: Option<Vec<f64>>,
    pub index: Option<TourIndex>,
    /// 1-based variable removed by a radial tour.
    pub variable: Option<usize>,
}

impl TourPath {
    pub fn len(&self) -> usize {
        self.interpolated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interpolated.is_empty()
    }

    pub fn p(&self) -> usize {
        self.base_frames[0].p()
    }

    pub fn d(&self) -> usize {
        self.base_frames[0].d()
    }

    pub fn last_frame(&self) -> &ProjectionFrame {
        self.interpolated.last().expect("paths are never empty")
    }

    pub fn to_document(&self, inline_frames: bool) -> TourPathDocument {
        TourPathDocument {
            kind: self.kind,
            seed: self.seed,
            step: self.step,
            p: self.p(),
            d: self.d(),
            index: self.index,
            variable: self.variable,
            base_frames: self.base_frames.iter().map(ProjectionFrame::rows).collect(),
            index_trace: self.index_trace.clone(),
            interpolated: inline_frames.then(|| self.interpolated.iter().map(ProjectionFrame::rows).collect()),
        }
    }

    /// Rebuilds a path, recomputing the interpolation from the base frames.
    pub fn from_document(doc: &TourPathDocument) -> Result<Self, TourError> {
        if !(doc.step > 0.0) {
            return Err(TourError::InvalidStep(doc.step));
        }
        let base_frames = doc
            .base_frames
            .iter()
            .map(|rows| ProjectionFrame::from_rows(rows))
            .collect::<Result<Vec<_>, _>>()?;
        if base_frames.is_empty() {
            return Err(TourError::InvalidDocument("no base frames".into()));
        }
        if base_frames.iter().any(|f| f.p() != doc.p || f.d() != doc.d) {
            return Err(TourError::InvalidDocument("base frame shape differs from p x d".into()));
        }
        if let Some(trace) = &doc.index_trace {
            if trace.len() != base_frames.len() {
                return Err(TourError::InvalidDocument("index trace length differs from base frames".into()));
            }
        }
        let interpolated = match doc.kind {
            TourKind::Radial => {
                if base_frames.len() != 3 {
                    return Err(TourError::InvalidDocument("radial tours have three base frames".into()));
                }
                round_trip(&base_frames[0], &base_frames[1], doc.step)?
            }
            _ => interpolate_chain(&base_frames, doc.step)?,
        };
        if let Some(inlined) = &doc.interpolated {
            let matches = inlined.len() == interpolated.len()
                && inlined.iter().zip(&interpolated).all(|(rows, f)| {
                    rows.iter()
                        .flatten()
                        .zip(f.rows().iter().flatten())
                        .all(|(a, b)| (a - b).abs() < 1e-9)
                });
            if !matches {
                return Err(TourError::InvalidDocument("inlined frames do not match the base frames".into()));
            }
        }
        Ok(Self {
            kind: doc.kind,
            seed: doc.seed,
            step: doc.step,
            base_frames,
            interpolated,
            index_trace: doc.index_trace.clone(),
            index: doc.index,
            variable: doc.variable,
        })
    }
}

/// Serialised form of a [`TourPath`]. Frames are `p` rows of `d` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TourPathDocument {
    pub kind: TourKind,
    pub seed: u64,
    pub step: f64,
    pub p: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<TourIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<usize>,
    pub base_frames: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_trace: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolated: Option<Vec<Vec<Vec<f64>>>>,
}

fn check_dims(p: usize, d: usize) -> Result<(), TourError> {
    if d == 0 || d >= p || d > MAX_PROJECTION_DIM {
        return Err(TourError::InvalidDimension { p, d });
    }
    Ok(())
}

/// Random walk through `n_bases` uniformly drawn frames.
pub fn grand_tour(p: usize, d: usize, n_bases: usize, seed: u64) -> Result<TourPath, TourError> {
    check_dims(p, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base_frames: Vec<ProjectionFrame> = Vec::with_capacity(n_bases.max(1));
    for _ in 0..n_bases.max(1) {
        let target = random_frame(p, d, &mut rng)?;
        let frame = match base_frames.last() {
            Some(prev) => align_to(prev, &target)?,
            None => target,
        };
        base_frames.push(frame);
    }
    let interpolated = interpolate_chain(&base_frames, DEFAULT_STEP)?;
    Ok(TourPath {
        kind: TourKind::Grand,
        seed,
        step: DEFAULT_STEP,
        base_frames,
        interpolated,
        index_trace: None,
        index: None,
        variable: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidedOptions {
    pub index: TourIndex,
    pub d: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Starting frame; drawn at random from the seed when absent.
    pub start: Option<ProjectionFrame>,
}

impl GuidedOptions {
    pub fn new(index: TourIndex, d: usize, seed: u64) -> Self {
        Self {
            index,
            d,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            start: None,
        }
    }
}

/// Stochastic hill climb on a projection pursuit index.
///
/// Each proposal moves from the current frame towards a random frame by at
/// most the current search angle and is accepted only when it raises the
/// index. The search angle cools on every rejection and is reset after a
/// run of rejections. The climb stops after `max_iter` proposals in a row
/// without improvement.
pub fn guided_tour(
    coords: &DMatrix<f64>,
    groups: &Grouping,
    opts: &GuidedOptions,
    control: Option<&JobControl>,
) -> Result<TourPath, TourError> {
    let p = coords.ncols();
    check_dims(p, opts.d)?;
    opts.index.validate()?;
    if !opts.index.supports_dim(opts.d) {
        return Err(TourError::InvalidDimension { p, d: opts.d });
    }
    let scatter = ScatterMatrices::new(coords, groups)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut current = match &opts.start {
        Some(f) if f.p() == p && f.d() == opts.d => f.clone(),
        Some(f) => {
            return Err(TourError::ShapeMismatch {
                expected: (p, opts.d),
                found: (f.p(), f.d()),
            })
        }
        None => random_frame(p, opts.d, &mut rng)?,
    };
    let mut value = scatter.project(&current).evaluate(opts.index).value;
    let mut base_frames = vec![current.clone()];
    let mut trace = vec![value];

    let max_iter = opts.max_iter.max(1);
    let cap = GUIDED_TOTAL_FACTOR * max_iter;
    let mut alpha = GUIDED_INITIAL_ANGLE;
    let mut stale = 0;
    let mut rejections = 0;
    let mut total = 0;
    while stale < max_iter && total < cap {
        if let Some(c) = control {
            if c.is_cancelled() {
                return Err(TourError::Cancelled);
            }
            c.set_progress(total as f64 / cap as f64);
        }
        total += 1;
        let target = random_frame(p, opts.d, &mut rng)?;
        let geo = Geodesic::new(&current, &target)?;
        let dist = geo.distance();
        let candidate = if dist < 1e-12 { target } else { geo.at((alpha / dist).min(1.0)) };
        let v = scatter.project(&candidate).evaluate(opts.index).value;
        if v > value {
            value = v;
            current = candidate;
            base_frames.push(current.clone());
            trace.push(value);
            stale = 0;
            rejections = 0;
        } else {
            stale += 1;
            rejections += 1;
            alpha *= GUIDED_COOLING;
            if rejections >= GUIDED_RESTART_AFTER {
                alpha = GUIDED_INITIAL_ANGLE;
                rejections = 0;
            }
        }
    }
    if let Some(c) = control {
        c.set_progress(1.0);
    }
    let interpolated = interpolate_chain(&base_frames, DEFAULT_STEP)?;
    Ok(TourPath {
        kind: TourKind::Guided,
        seed: opts.seed,
        step: DEFAULT_STEP,
        base_frames,
        interpolated,
        index_trace: Some(trace),
        index: Some(opts.index),
        variable: None,
    })
}

/// `start` with row `v` zeroed, completed to an orthonormal frame using the
/// coordinate axes other than `v` where the zeroed columns lost rank.
fn remove_variable(start: &ProjectionFrame, v: usize) -> Result<ProjectionFrame, TourError> {
    let (p, d) = (start.p(), start.d());
    if p < d + 1 {
        return Err(TourError::RankDeficient);
    }
    let mut m = start.basis().clone();
    m.row_mut(v).fill(0.0);
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut c = m.column(j).clone_owned();
        for _ in 0..2 {
            for q in &cols {
                let a = q.dot(&c);
                c.axpy(-a, q, 1.0);
            }
        }
        let norm = c.norm();
        if norm > 1e-8 {
            cols.push(c / norm);
            continue;
        }
        // replace with the coordinate axis that is furthest from the span so far
        let mut best: Option<(f64, nalgebra::DVector<f64>)> = None;
        for k in (0..p).filter(|&k| k != v) {
            let mut e = nalgebra::DVector::zeros(p);
            e[k] = 1.0;
            for _ in 0..2 {
                for q in &cols {
                    let a = q.dot(&e);
                    e.axpy(-a, q, 1.0);
                }
            }
            let r = e.norm();
            if best.as_ref().is_none_or(|(b, _)| r > *b + 1e-12) {
                best = Some((r, e));
            }
        }
        match best {
            Some((r, e)) if r > 1e-8 => cols.push(e / r),
            _ => return Err(TourError::RankDeficient),
        }
    }
    let basis = DMatrix::from_columns(&cols);
    orthonormalize(&basis)
}

fn round_trip(start: &ProjectionFrame, mid: &ProjectionFrame, step: f64) -> Result<Vec<ProjectionFrame>, TourError> {
    let forward = interpolate_chain(&[start.clone(), mid.clone()], step)?;
    let mut frames = forward.clone();
    frames.extend(forward.iter().rev().skip(1).cloned());
    Ok(frames)
}

/// Rotates variable `variable` (1-based) out of the projection and back.
/// The middle frame of the path has an exactly zero row for that variable.
pub fn radial_tour(start: &ProjectionFrame, variable: usize) -> Result<TourPath, TourError> {
    let p = start.p();
    if variable == 0 || variable > p {
        return Err(TourError::InvalidVariable { variable, p });
    }
    let mid = remove_variable(start, variable - 1)?;
    let interpolated = round_trip(start, &mid, DEFAULT_STEP)?;
    Ok(TourPath {
        kind: TourKind::Radial,
        seed: 0,
        step: DEFAULT_STEP,
        base_frames: vec![start.clone(), mid, start.clone()],
        interpolated,
        index_trace: None,
        index: None,
        variable: Some(variable),
    })
}

/// Frame at 1-based `position` of the interpolated path.
pub fn hold_frame(path: &TourPath, position: usize) -> Result<ProjectionFrame, TourError> {
    if position == 0 || position > path.interpolated.len() {
        return Err(TourError::PositionOutOfRange {
            position,
            len: path.interpolated.len(),
        });
    }
    Ok(path.interpolated[position - 1].clone())
}
