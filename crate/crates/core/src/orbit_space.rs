//! Finite stand-ins for points of the inverse limit: preorbits, orbit
//! segments, the metric `d(x, y) = sum d(x_i, y_i) / 2^|i|` and the shift.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base::{BaseMap, BumpFunction};
use crate::error::OrbitError;
use crate::point::BasePoint;
use crate::skew::{FiberedPoint, RotationExtension};
use crate::stats::SeriesValue;

/// Branch ties closer than this are treated as ambiguous when shadowing.
pub const SHADOW_AMBIGUITY: f64 = 1e-9;

/// Default preorbit depth.
pub const DEFAULT_DEPTH: usize = 60;

/// An open Euclidean disk in the base.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region<P> {
    pub center: P,
    pub radius: f64,
}

impl<P: BasePoint> Region<P> {
    pub fn contains(&self, p: &P) -> bool {
        p.euclidean_distance(&self.center) < self.radius
    }

    pub fn support_of(bump: &BumpFunction<P>) -> Self {
        Region {
            center: bump.center(),
            radius: bump.radius(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PreorbitPolicy<P> {
    UniformRandom {
        seed: u64,
    },
    FixedItinerary(Vec<usize>),
    /// First branch at step 1, then the first canonical branch outside the
    /// region at every deeper step.
    StayOutside(Region<P>),
}

/// `x_0 = anchor` and `x_{-1}, ..., x_{-N}` with `F(x_{-k}) = x_{-k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Preorbit<P> {
    anchor: FiberedPoint<P>,
    branches: Vec<usize>,
    points: Vec<FiberedPoint<P>>,
}

impl<P: BasePoint> Preorbit<P> {
    pub(crate) fn from_parts(
        anchor: FiberedPoint<P>,
        branches: Vec<usize>,
        points: Vec<FiberedPoint<P>>,
    ) -> Self {
        debug_assert_eq!(branches.len(), points.len());
        Preorbit {
            anchor,
            branches,
            points,
        }
    }

    pub fn anchor(&self) -> &FiberedPoint<P> {
        &self.anchor
    }

    pub fn depth(&self) -> usize {
        self.points.len()
    }

    pub fn branches(&self) -> &[usize] {
        &self.branches
    }

    /// `x_{-1}, ..., x_{-N}`.
    pub fn points(&self) -> &[FiberedPoint<P>] {
        &self.points
    }

    /// `x_{-k}`, with `k = 0` the anchor.
    pub fn point(&self, k: usize) -> &FiberedPoint<P> {
        if k == 0 {
            &self.anchor
        } else {
            &self.points[k - 1]
        }
    }

    pub fn itinerary(&self) -> String {
        if self.branches.iter().all(|&b| b < 10) {
            self.branches
                .iter()
                .map(|b| char::from(b'0' + *b as u8))
                .collect()
        } else {
            self.branches
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join("-")
        }
    }

    pub fn truncated(&self, depth: usize) -> Self {
        let d = depth.min(self.depth());
        Preorbit {
            anchor: self.anchor,
            branches: self.branches[..d].to_vec(),
            points: self.points[..d].to_vec(),
        }
    }

    /// Largest distance between `F(x_{-k})` and `x_{-k+1}`.
    pub fn residual<B: BaseMap<Point = P>>(&self, f: &RotationExtension<B>) -> f64 {
        (1..=self.depth())
            .map(|k| f.apply(self.point(k)).distance(self.point(k - 1)))
            .fold(0.0, f64::max)
    }

    /// The preorbit of `F(anchor)` obtained by prepending the anchor.
    pub fn image<B: BaseMap<Point = P>>(&self, f: &RotationExtension<B>) -> Self {
        let anchor = f.apply(&self.anchor);
        let branch = branch_index(f, &anchor, &self.anchor);
        let mut branches = Vec::with_capacity(self.depth() + 1);
        branches.push(branch);
        branches.extend_from_slice(&self.branches);
        let mut points = Vec::with_capacity(self.depth() + 1);
        points.push(self.anchor);
        points.extend_from_slice(&self.points);
        Preorbit {
            anchor,
            branches,
            points,
        }
    }
}

/// Index of the preimage of `image` nearest to `pre` in canonical order.
fn branch_index<B: BaseMap>(
    f: &RotationExtension<B>,
    image: &FiberedPoint<B::Point>,
    pre: &FiberedPoint<B::Point>,
) -> usize {
    f.base_map()
        .preimages(&image.base)
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distance(&pre.base).total_cmp(&b.1.distance(&pre.base)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub fn sample_preorbit<B: BaseMap>(
    f: &RotationExtension<B>,
    anchor: &FiberedPoint<B::Point>,
    depth: usize,
    policy: &PreorbitPolicy<B::Point>,
) -> Result<Preorbit<B::Point>, OrbitError> {
    if depth == 0 {
        return Err(OrbitError::InvalidDepth);
    }
    let degree = f.degree();
    if let PreorbitPolicy::FixedItinerary(it) = policy {
        if it.len() < depth {
            return Err(OrbitError::ItineraryTooShort {
                len: it.len(),
                depth,
            });
        }
    }
    let mut rng = match policy {
        PreorbitPolicy::UniformRandom { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };
    let mut branches = Vec::with_capacity(depth);
    let mut points = Vec::with_capacity(depth);
    let mut current = *anchor;
    for step in 1..=depth {
        let candidates = f.preimages(&current);
        let index = match policy {
            PreorbitPolicy::UniformRandom { .. } => rng.as_mut().unwrap().gen_range(0..degree),
            PreorbitPolicy::FixedItinerary(it) => {
                let i = it[step - 1];
                if i >= degree {
                    return Err(OrbitError::InvalidBranch {
                        step,
                        index: i,
                        degree,
                    });
                }
                i
            }
            PreorbitPolicy::StayOutside(region) => {
                if step == 1 {
                    0
                } else {
                    candidates
                        .iter()
                        .position(|c| !region.contains(&c.base))
                        .ok_or(OrbitError::PolicyInfeasible { step })?
                }
            }
        };
        current = candidates[index];
        branches.push(index);
        points.push(current);
    }
    Ok(Preorbit {
        anchor: *anchor,
        branches,
        points,
    })
}

/// Continues `reference` to the preorbit of the base point `anchor.base + d`,
/// with `d` given in eigen-coordinates: at depth `k` the displacement is
/// `d / lambda^k`, added to the reference point before rounding. The branch
/// at each step is the preimage nearest to the reference point.
pub(crate) fn shadow_with_displacement<B: BaseMap>(
    f: &RotationExtension<B>,
    reference: &Preorbit<B::Point>,
    anchor_theta: u64,
    eigen_displacement: &<B::Point as BasePoint>::Vector,
) -> Result<Preorbit<B::Point>, OrbitError> {
    let map = f.base_map();
    let lambda = map.eigenvalues();
    let start_base = reference
        .anchor
        .base
        .translate(&map.combine_eigen(eigen_displacement));
    let anchor = FiberedPoint::from_raw(start_base, anchor_theta);
    let mut c = *eigen_displacement;
    let mut current = anchor;
    let mut branches = Vec::with_capacity(reference.depth());
    let mut points = Vec::with_capacity(reference.depth());
    for k in 1..=reference.depth() {
        for (ci, li) in c.as_mut().iter_mut().zip(lambda.as_ref()) {
            *ci /= li;
        }
        let target = reference.point(k).base;
        let predicted = target.translate(&map.combine_eigen(&c));
        let candidates = map.preimages(&current.base);
        let mut order: Vec<(usize, f64)> = candidates
            .iter()
            .enumerate()
            .map(|(i, q)| (i, q.distance(&target)))
            .collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1));
        if order.len() > 1 && order[1].1 - order[0].1 < SHADOW_AMBIGUITY {
            return Err(OrbitError::ShadowBreakdown {
                step: k,
                reason: "two branches are equidistant from the reference point".into(),
            });
        }
        let chosen = order[0].0;
        let drift = candidates[chosen].distance(&predicted);
        if drift > SHADOW_AMBIGUITY {
            return Err(OrbitError::ShadowBreakdown {
                step: k,
                reason: format!("nearest branch misses the linear continuation by {drift:e}"),
            });
        }
        let theta_step = -f.phi(&predicted);
        current = FiberedPoint::from_raw(predicted, current.theta_raw()).rotated(theta_step);
        branches.push(chosen);
        points.push(current);
    }
    Ok(Preorbit {
        anchor,
        branches,
        points,
    })
}

/// The preorbit of `q` that stays closest to `reference` at every depth.
pub fn shadow_preorbit<B: BaseMap>(
    f: &RotationExtension<B>,
    reference: &Preorbit<B::Point>,
    q: &FiberedPoint<B::Point>,
) -> Result<Preorbit<B::Point>, OrbitError> {
    let map = f.base_map();
    let limit = map.branch_separation() / 4.0;
    let dist = q.base.distance(&reference.anchor.base);
    if dist >= limit {
        return Err(OrbitError::ShadowBreakdown {
            step: 0,
            reason: format!("query point is {dist} from the anchor, beyond {limit}"),
        });
    }
    let offset = q.base.offset_from(&reference.anchor.base);
    let mut shadow = shadow_with_displacement(f, reference, q.theta_raw(), &map.to_eigen(&offset))?;
    // keep the query point itself as the anchor rather than its re-rounded copy
    shadow.anchor = *q;
    Ok(shadow)
}

/// Forward points `x_0, ..., x_M` plus an optional preorbit of `x_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSegment<P> {
    forward: Vec<FiberedPoint<P>>,
    preorbit: Option<Preorbit<P>>,
}

impl<P: BasePoint> OrbitSegment<P> {
    /// Exact forward orbit of length `len` from the preorbit's anchor.
    pub fn from_preorbit<B: BaseMap<Point = P>>(
        f: &RotationExtension<B>,
        preorbit: Preorbit<P>,
        len: usize,
    ) -> Self {
        let mut forward = Vec::with_capacity(len + 1);
        let mut p = preorbit.anchor;
        forward.push(p);
        for _ in 0..len {
            p = f.apply(&p);
            forward.push(p);
        }
        OrbitSegment {
            forward,
            preorbit: Some(preorbit),
        }
    }

    pub fn forward_only<B: BaseMap<Point = P>>(
        f: &RotationExtension<B>,
        start: FiberedPoint<P>,
        len: usize,
    ) -> Self {
        let mut s = Self::from_preorbit(f, Preorbit::from_parts(start, vec![], vec![]), len);
        s.preorbit = None;
        s
    }

    /// The constant sequence at a point fixed by `F` (not checked).
    pub fn constant(p: FiberedPoint<P>, back: usize, forward: usize) -> Self {
        OrbitSegment {
            forward: vec![p; forward + 1],
            preorbit: Some(Preorbit::from_parts(p, vec![0; back], vec![p; back])),
        }
    }

    pub fn forward(&self) -> &[FiberedPoint<P>] {
        &self.forward
    }

    pub fn preorbit(&self) -> Option<&Preorbit<P>> {
        self.preorbit.as_ref()
    }

    pub fn backward_len(&self) -> usize {
        self.preorbit.as_ref().map_or(0, |p| p.depth())
    }

    pub fn forward_len(&self) -> usize {
        self.forward.len() - 1
    }

    /// `x_i` for `i` in `-backward_len ..= forward_len`.
    pub fn get(&self, i: isize) -> Option<&FiberedPoint<P>> {
        if i >= 0 {
            self.forward.get(i as usize)
        } else {
            let k = i.unsigned_abs();
            self.preorbit
                .as_ref()
                .filter(|p| k <= p.depth())
                .map(|p| p.point(k))
        }
    }

    /// Index-zero projection.
    pub fn project(&self) -> &FiberedPoint<P> {
        &self.forward[0]
    }
}

/// Diameter of `M x S^1` in the sup metric.
const PRODUCT_DIAMETER: f64 = 0.5;

/// `sum_{|i| <= n} d(a_i, b_i) / 2^|i|` with tail bound `diam * 2^{1-n}`.
pub fn inverse_limit_distance<P: BasePoint>(
    a: &OrbitSegment<P>,
    b: &OrbitSegment<P>,
    n: usize,
) -> Result<SeriesValue, OrbitError> {
    let covers = |s: &OrbitSegment<P>| s.backward_len() >= n && s.forward_len() >= n;
    if !covers(a) || !covers(b) {
        return Err(OrbitError::SegmentTooShort { needed: n });
    }
    let n = n as isize;
    let mut value = 0.0;
    for i in -n..=n {
        let d = a.get(i).unwrap().distance(b.get(i).unwrap());
        value += d / 2f64.powi(i.abs() as i32);
    }
    Ok(SeriesValue {
        value,
        tail_bound: PRODUCT_DIAMETER * 2f64.powi(1 - n as i32),
    })
}

/// The shift `(x_n) -> (x_{n+1})`; the old `x_0` becomes `x_{-1}`.
pub fn shift<B: BaseMap>(
    f: &RotationExtension<B>,
    segment: &OrbitSegment<B::Point>,
) -> Option<OrbitSegment<B::Point>> {
    if segment.forward.len() < 2 {
        return None;
    }
    let old = segment.forward[0];
    let anchor = segment.forward[1];
    let mut branches = vec![branch_index(f, &anchor, &old)];
    let mut points = vec![old];
    if let Some(p) = &segment.preorbit {
        branches.extend_from_slice(&p.branches);
        points.extend_from_slice(&p.points);
    }
    Some(OrbitSegment {
        forward: segment.forward[1..].to_vec(),
        preorbit: Some(Preorbit {
            anchor,
            branches,
            points,
        }),
    })
}

/// Inverse of [`shift`] when the segment has a preorbit.
pub fn unshift<P: BasePoint>(segment: &OrbitSegment<P>) -> Option<OrbitSegment<P>> {
    let pre = segment.preorbit.as_ref().filter(|p| p.depth() > 0)?;
    let mut forward = Vec::with_capacity(segment.forward.len() + 1);
    forward.push(pre.points[0]);
    forward.extend_from_slice(&segment.forward);
    let rest = Preorbit {
        anchor: pre.points[0],
        branches: pre.branches[1..].to_vec(),
        points: pre.points[1..].to_vec(),
    };
    Some(OrbitSegment {
        forward,
        preorbit: if rest.depth() > 0 { Some(rest) } else { None },
    })
}

/// One row per realized point: `preorbit, depth, itinerary, k, coords..., theta`.
pub fn write_preorbits_csv<P: BasePoint, W: Write>(
    w: &mut W,
    preorbits: &[Preorbit<P>],
) -> io::Result<()> {
    write!(w, "preorbit,depth,itinerary,k")?;
    for name in P::COORD_NAMES {
        write!(w, ",{name}")?;
    }
    writeln!(w, ",theta")?;
    for (i, pre) in preorbits.iter().enumerate() {
        let itinerary = pre.itinerary();
        for k in 0..=pre.depth() {
            let p = pre.point(k);
            write!(w, "{i},{},{itinerary},{k}", pre.depth())?;
            for c in p.base.coords().as_ref() {
                write!(w, ",{c:.17e}")?;
            }
            writeln!(w, ",{:.17e}", p.theta())?;
        }
    }
    Ok(())
}
