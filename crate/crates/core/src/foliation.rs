//! Stable and unstable leaves of toral rotation extensions as graphs of
//! fiber-offset series over the base eigenlines, su-quadrilateral holonomy,
//! su-paths and leaf density.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::base::BaseMap;
use crate::error::{LeafError, OrbitError};
use crate::orbit_space::{
    sample_preorbit, shadow_with_displacement, Preorbit, PreorbitPolicy, Region, DEFAULT_DEPTH,
};
use crate::point::{circle_difference, circle_distance, BasePoint, TorusPoint2};
use crate::skew::{FiberedPoint, ToralExtension, TorusFiberedPoint};
use crate::stats::SeriesValue;

/// Charts are parameterized on `|t| < CHART_HALF_WIDTH`.
pub const CHART_HALF_WIDTH: f64 = 0.5;
/// Longest leg piece used when paths and leaf samples are built.
pub const MAX_LEG: f64 = 0.45;
/// Tolerance for endpoint checks of su-paths.
pub const LEG_TOLERANCE: f64 = 1e-9;
const SHOOTING_ROUNDS: usize = 64;
const SHOOTING_SCALES: usize = 16;
const DEFAULT_FALLBACK_SEED: u64 = 0x5eed;

fn check_leg(t: f64) -> Result<(), LeafError> {
    if t.is_finite() && t.abs() < CHART_HALF_WIDTH {
        Ok(())
    } else {
        Err(LeafError::LegTooLong { t })
    }
}

fn scaled(v: [f64; 2], t: f64) -> [f64; 2] {
    [v[0] * t, v[1] * t]
}

/// Local stable leaf through `anchor`, the graph of
/// `t -> (anchor.base + t v_s, anchor.theta + S(t))` with
/// `S(t) = sum_{n >= 0} phi(f^n b) - phi(f^n b + t a_s^n v_s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StableLeafChart {
    anchor: TorusFiberedPoint,
    orbit: Vec<TorusPoint2>,
}

impl StableLeafChart {
    pub fn new(f: &ToralExtension, anchor: TorusFiberedPoint, depth: usize) -> Self {
        let mut orbit = Vec::with_capacity(depth);
        let mut p = anchor.base;
        for _ in 0..depth {
            orbit.push(p);
            p = f.base_map().apply(&p);
        }
        StableLeafChart { anchor, orbit }
    }

    pub fn anchor(&self) -> &TorusFiberedPoint {
        &self.anchor
    }

    pub fn depth(&self) -> usize {
        self.orbit.len()
    }

    pub fn offset(&self, f: &ToralExtension, t: f64) -> Result<SeriesValue, LeafError> {
        check_leg(t)?;
        let e = f.base_map().eigen();
        let mut value = 0.0;
        let mut scale = t;
        for p in &self.orbit {
            if scale == 0.0 {
                break;
            }
            value += f.phi(p) - f.phi_displaced(p, &scaled(e.v_s, scale));
            scale *= e.a_s;
        }
        let a = e.a_s.abs();
        Ok(SeriesValue {
            value,
            tail_bound: f.phi_lipschitz() * t.abs() * a.powi(self.depth() as i32) / (1.0 - a),
        })
    }

    pub fn base_at(&self, f: &ToralExtension, t: f64) -> TorusPoint2 {
        self.anchor
            .base
            .translate(&scaled(f.base_map().eigen().v_s, t))
    }

    pub fn point(&self, f: &ToralExtension, t: f64) -> Result<TorusFiberedPoint, LeafError> {
        let s = self.offset(f, t)?;
        Ok(FiberedPoint::from_raw(self.base_at(f, t), self.anchor.theta_raw()).rotated(s.value))
    }

    /// Chart parameter of a base point on the stable line.
    pub fn parameter_of(&self, f: &ToralExtension, base: &TorusPoint2) -> Result<f64, LeafError> {
        line_parameter(f, &self.anchor.base, base, 0, "stable")
    }
}

/// Local unstable leaf of the inverse-limit point given by `preorbit`:
/// `U(t) = sum_{k >= 1} phi(x_{-k} + t a_u^{-k} v_u) - phi(x_{-k})`, with the
/// displaced preorbit re-derived by branch-consistent shadowing.
#[derive(Clone, Debug, PartialEq)]
pub struct UnstableLeafChart {
    preorbit: Preorbit<TorusPoint2>,
}

impl UnstableLeafChart {
    pub fn new(preorbit: Preorbit<TorusPoint2>) -> Self {
        UnstableLeafChart { preorbit }
    }

    pub fn anchor(&self) -> &TorusFiberedPoint {
        self.preorbit.anchor()
    }

    pub fn preorbit(&self) -> &Preorbit<TorusPoint2> {
        &self.preorbit
    }

    pub fn depth(&self) -> usize {
        self.preorbit.depth()
    }

    /// The shadowed preorbit of the chart point at parameter `t`.
    pub fn shadow(&self, f: &ToralExtension, t: f64) -> Result<Preorbit<TorusPoint2>, LeafError> {
        check_leg(t)?;
        Ok(shadow_with_displacement(
            f,
            &self.preorbit,
            self.anchor().theta_raw(),
            &[0.0, t],
        )?)
    }

    pub fn offset(&self, f: &ToralExtension, t: f64) -> Result<SeriesValue, LeafError> {
        check_leg(t)?;
        let e = f.base_map().eigen();
        let a = e.a_u.abs();
        let tail_bound = f.phi_lipschitz() * t.abs() * a.powi(-(self.depth() as i32)) / (a - 1.0);
        if t == 0.0 {
            return Ok(SeriesValue {
                value: 0.0,
                tail_bound,
            });
        }
        let shadow = self.shadow(f, t)?;
        let value = (1..=self.depth())
            .map(|k| f.phi(&shadow.point(k).base) - f.phi(&self.preorbit.point(k).base))
            .sum();
        Ok(SeriesValue { value, tail_bound })
    }

    pub fn base_at(&self, f: &ToralExtension, t: f64) -> TorusPoint2 {
        self.anchor()
            .base
            .translate(&scaled(f.base_map().eigen().v_u, t))
    }

    pub fn point(&self, f: &ToralExtension, t: f64) -> Result<TorusFiberedPoint, LeafError> {
        let u = self.offset(f, t)?;
        Ok(FiberedPoint::from_raw(self.base_at(f, t), self.anchor().theta_raw()).rotated(u.value))
    }

    pub fn parameter_of(&self, f: &ToralExtension, base: &TorusPoint2) -> Result<f64, LeafError> {
        line_parameter(f, &self.anchor().base, base, 1, "unstable")
    }
}

fn line_parameter(
    f: &ToralExtension,
    anchor: &TorusPoint2,
    base: &TorusPoint2,
    axis: usize,
    leaf: &'static str,
) -> Result<f64, LeafError> {
    let c = f.base_map().to_eigen(&base.offset_from(anchor));
    let residual = c[1 - axis].abs();
    if residual > LEG_TOLERANCE {
        return Err(LeafError::OffLeaf { leaf, residual });
    }
    Ok(c[axis])
}

/// Fiber offset carrying `x` to the point of its stable leaf over `base`.
pub fn stable_fiber_offset(
    f: &ToralExtension,
    x: &TorusFiberedPoint,
    base: &TorusPoint2,
    depth: usize,
) -> Result<SeriesValue, LeafError> {
    let chart = StableLeafChart::new(f, *x, depth);
    let t = chart.parameter_of(f, base)?;
    chart.offset(f, t)
}

/// Fiber offset carrying the anchor of `pre` to the point of its unstable
/// leaf over `base`, using the first `depth` preimages.
pub fn unstable_fiber_offset(
    f: &ToralExtension,
    pre: &Preorbit<TorusPoint2>,
    base: &TorusPoint2,
    depth: usize,
) -> Result<SeriesValue, LeafError> {
    let chart = UnstableLeafChart::new(pre.truncated(depth.min(pre.depth())));
    let t = chart.parameter_of(f, base)?;
    chart.offset(f, t)
}

/// How preorbits for u-legs are chosen: `preferred` where it is feasible,
/// otherwise uniformly random branches from `fallback_seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct LegPolicy {
    pub preferred: PreorbitPolicy<TorusPoint2>,
    pub fallback_seed: u64,
}

impl LegPolicy {
    /// Stay outside the bump support, or uniform branches for the product map.
    pub fn default_for(f: &ToralExtension) -> Self {
        let preferred = match f.bump() {
            Some(b) => PreorbitPolicy::StayOutside(Region::support_of(b)),
            None => PreorbitPolicy::UniformRandom {
                seed: DEFAULT_FALLBACK_SEED,
            },
        };
        LegPolicy {
            preferred,
            fallback_seed: DEFAULT_FALLBACK_SEED,
        }
    }

    pub fn preorbit(
        &self,
        f: &ToralExtension,
        anchor: &TorusFiberedPoint,
        depth: usize,
    ) -> Result<Preorbit<TorusPoint2>, OrbitError> {
        match sample_preorbit(f, anchor, depth, &self.preferred) {
            Err(OrbitError::PolicyInfeasible { .. }) => sample_preorbit(
                f,
                anchor,
                depth,
                &PreorbitPolicy::UniformRandom {
                    seed: self.fallback_seed,
                },
            ),
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// u-leg(+t), s-leg(+s), u-leg(-t), s-leg(-s).
    UnstableFirst,
    /// s-leg(+s), u-leg(+t), s-leg(-s), u-leg(-t).
    StableFirst,
}

/// An su-quadrilateral on the leaf grid based at `origin`: the rectangle
/// `[u0, u0 + t] x [sigma0, sigma0 + s]` in eigen-coordinates around
/// `origin.base`. Stable edges lie on columns `origin.base + u v_u`; unstable
/// edges lie on rows `origin.base + sigma v_s`, each row using the preorbit
/// chosen by `policy` at its base point. Quadrilaterals sharing an origin
/// share edges, which makes holonomy additive under subdivision.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadrilateralSpec {
    pub origin: TorusFiberedPoint,
    pub u0: f64,
    pub sigma0: f64,
    pub t: f64,
    pub s: f64,
    pub policy: LegPolicy,
    pub orientation: Orientation,
    pub depth: usize,
}

impl QuadrilateralSpec {
    pub fn new(f: &ToralExtension, corner: TorusFiberedPoint, t: f64, s: f64) -> Self {
        QuadrilateralSpec {
            origin: corner,
            u0: 0.0,
            sigma0: 0.0,
            t,
            s,
            policy: LegPolicy::default_for(f),
            orientation: Orientation::UnstableFirst,
            depth: DEFAULT_DEPTH,
        }
    }

    pub fn with_offset(mut self, u0: f64, sigma0: f64) -> Self {
        self.u0 = u0;
        self.sigma0 = sigma0;
        self
    }

    pub fn with_policy(mut self, policy: LegPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn reversed(mut self) -> Self {
        self.orientation = match self.orientation {
            Orientation::UnstableFirst => Orientation::StableFirst,
            Orientation::StableFirst => Orientation::UnstableFirst,
        };
        self
    }
}

struct LeafGrid<'a> {
    f: &'a ToralExtension,
    origin: TorusFiberedPoint,
    policy: &'a LegPolicy,
    depth: usize,
}

impl LeafGrid<'_> {
    fn column(&self, u: f64) -> TorusFiberedPoint {
        let b = self
            .origin
            .base
            .translate(&scaled(self.f.base_map().eigen().v_u, u));
        FiberedPoint::from_raw(b, self.origin.theta_raw())
    }

    fn row(&self, sigma: f64) -> TorusFiberedPoint {
        let b = self
            .origin
            .base
            .translate(&scaled(self.f.base_map().eigen().v_s, sigma));
        FiberedPoint::from_raw(b, self.origin.theta_raw())
    }

    fn stable_chart(&self, u: f64) -> StableLeafChart {
        StableLeafChart::new(self.f, self.column(u), self.depth)
    }

    fn unstable_chart(&self, sigma: f64) -> Result<UnstableLeafChart, LeafError> {
        Ok(UnstableLeafChart::new(self.policy.preorbit(
            self.f,
            &self.row(sigma),
            self.depth,
        )?))
    }
}

fn edge(a: SeriesValue, b: SeriesValue) -> SeriesValue {
    SeriesValue {
        value: b.value - a.value,
        tail_bound: a.tail_bound + b.tail_bound,
    }
}

fn s_edge(
    f: &ToralExtension,
    chart: &StableLeafChart,
    from: f64,
    to: f64,
) -> Result<SeriesValue, LeafError> {
    Ok(edge(chart.offset(f, from)?, chart.offset(f, to)?))
}

fn u_edge(
    f: &ToralExtension,
    chart: &UnstableLeafChart,
    from: f64,
    to: f64,
) -> Result<SeriesValue, LeafError> {
    Ok(edge(chart.offset(f, from)?, chart.offset(f, to)?))
}

/// Net fiber displacement, in turns, after traversing the quadrilateral.
pub fn quadrilateral_holonomy(
    f: &ToralExtension,
    q: &QuadrilateralSpec,
) -> Result<SeriesValue, LeafError> {
    let (u1, u2) = (q.u0, q.u0 + q.t);
    let (s1, s2) = (q.sigma0, q.sigma0 + q.s);
    for v in [u1, u2, s1, s2] {
        check_leg(v)?;
    }
    let grid = LeafGrid {
        f,
        origin: q.origin,
        policy: &q.policy,
        depth: q.depth,
    };
    let bottom = u_edge(f, &grid.unstable_chart(s1)?, u1, u2)?;
    let right = s_edge(f, &grid.stable_chart(u2), s1, s2)?;
    let top = u_edge(f, &grid.unstable_chart(s2)?, u1, u2)?;
    let left = s_edge(f, &grid.stable_chart(u1), s1, s2)?;
    let tail_bound = bottom.tail_bound + right.tail_bound + top.tail_bound + left.tail_bound;
    let value = match q.orientation {
        Orientation::UnstableFirst => (bottom.value + right.value) + (-top.value - left.value),
        Orientation::StableFirst => -((bottom.value + right.value) + (-top.value - left.value)),
    };
    Ok(SeriesValue { value, tail_bound })
}

/// Holonomies of `corner`-based quadrilaterals over the grid `ts x ss`, rows
/// in `ts`-major order.
pub fn holonomy_surface(
    f: &ToralExtension,
    corner: &TorusFiberedPoint,
    ts: &[f64],
    ss: &[f64],
) -> Result<Vec<(f64, f64, f64)>, LeafError> {
    let cells: Vec<(f64, f64)> = ts
        .iter()
        .flat_map(|t| ss.iter().map(move |s| (*t, *s)))
        .collect();
    cells
        .par_iter()
        .map(|&(t, s)| {
            quadrilateral_holonomy(f, &QuadrilateralSpec::new(f, *corner, t, s))
                .map(|h| (t, s, h.value))
        })
        .collect()
}

/// `max |holonomy|` over quadrilaterals at `x` with the given `(t, s)`.
pub fn integrability_defect(
    f: &ToralExtension,
    x: &TorusFiberedPoint,
    scales: &[(f64, f64)],
) -> Result<f64, LeafError> {
    scales
        .par_iter()
        .map(|&(t, s)| {
            quadrilateral_holonomy(f, &QuadrilateralSpec::new(f, *x, t, s)).map(|h| h.value.abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Clone, Debug, PartialEq)]
pub enum LegChart {
    Stable(StableLeafChart),
    Unstable(UnstableLeafChart),
}

impl LegChart {
    fn offset(&self, f: &ToralExtension, t: f64) -> Result<SeriesValue, LeafError> {
        match self {
            LegChart::Stable(c) => c.offset(f, t),
            LegChart::Unstable(c) => c.offset(f, t),
        }
    }

    fn base_at(&self, f: &ToralExtension, t: f64) -> TorusPoint2 {
        match self {
            LegChart::Stable(c) => c.base_at(f, t),
            LegChart::Unstable(c) => c.base_at(f, t),
        }
    }
}

/// A piece of leaf traversed from chart parameter `from` to `to`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuLeg {
    pub chart: LegChart,
    pub from: f64,
    pub to: f64,
    pub start: TorusFiberedPoint,
    pub end: TorusFiberedPoint,
}

impl SuLeg {
    fn traverse(
        f: &ToralExtension,
        chart: LegChart,
        from: f64,
        to: f64,
        start: TorusFiberedPoint,
    ) -> Result<SuLeg, LeafError> {
        let delta = edge(chart.offset(f, from)?, chart.offset(f, to)?).value;
        let end = FiberedPoint::from_raw(chart.base_at(f, to), start.theta_raw()).rotated(delta);
        Ok(SuLeg {
            chart,
            from,
            to,
            start,
            end,
        })
    }

    pub fn is_stable(&self) -> bool {
        matches!(self.chart, LegChart::Stable(_))
    }

    pub fn kind(&self) -> char {
        if self.is_stable() {
            's'
        } else {
            'u'
        }
    }

    /// Largest discrepancy between the recorded endpoints and a fresh
    /// evaluation of the leg's series.
    pub fn residual(&self, f: &ToralExtension) -> Result<f64, LeafError> {
        let delta = edge(
            self.chart.offset(f, self.from)?,
            self.chart.offset(f, self.to)?,
        )
        .value;
        let base = self
            .start
            .base
            .distance(&self.chart.base_at(f, self.from))
            .max(self.end.base.distance(&self.chart.base_at(f, self.to)));
        let fiber = circle_distance(self.end.theta_offset_from(&self.start), delta);
        Ok(base.max(fiber))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuPath {
    pub start: TorusFiberedPoint,
    pub legs: Vec<SuLeg>,
}

impl SuPath {
    pub fn empty(start: TorusFiberedPoint) -> Self {
        SuPath {
            start,
            legs: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn end(&self) -> TorusFiberedPoint {
        self.legs.last().map_or(self.start, |l| l.end)
    }

    /// `z_0, ..., z_n`.
    pub fn endpoints(&self) -> Vec<TorusFiberedPoint> {
        std::iter::once(self.start)
            .chain(self.legs.iter().map(|l| l.end))
            .collect()
    }

    /// Re-evaluates every leg and checks that consecutive legs join; returns
    /// the largest residual, or `OffLeaf` if it exceeds [`LEG_TOLERANCE`].
    pub fn verify(&self, f: &ToralExtension) -> Result<f64, LeafError> {
        let mut worst: f64 = 0.0;
        let mut previous = self.start;
        for leg in &self.legs {
            let joint = leg.start.distance(&previous);
            if joint > LEG_TOLERANCE {
                return Err(LeafError::OffLeaf {
                    leaf: "path joint",
                    residual: joint,
                });
            }
            let r = leg.residual(f)?;
            if r > LEG_TOLERANCE {
                return Err(LeafError::OffLeaf {
                    leaf: if leg.is_stable() {
                        "stable"
                    } else {
                        "unstable"
                    },
                    residual: r,
                });
            }
            worst = worst.max(joint).max(r);
            previous = leg.end;
        }
        Ok(worst)
    }
}

struct PathBuilder<'a> {
    f: &'a ToralExtension,
    policy: &'a LegPolicy,
    depth: usize,
    path: SuPath,
}

impl PathBuilder<'_> {
    fn current(&self) -> TorusFiberedPoint {
        self.path.end()
    }

    /// Moves along the unstable (`stable == false`) or stable line by `len`,
    /// in pieces of at most [`MAX_LEG`], each on a fresh chart.
    fn straight(&mut self, stable: bool, len: f64) -> Result<(), LeafError> {
        let pieces = (len.abs() / MAX_LEG).ceil() as usize;
        for _ in 0..pieces {
            let piece = len / pieces as f64;
            let here = self.current();
            let chart = if stable {
                LegChart::Stable(StableLeafChart::new(self.f, here, self.depth))
            } else {
                LegChart::Unstable(UnstableLeafChart::new(
                    self.policy.preorbit(self.f, &here, self.depth)?,
                ))
            };
            let leg = SuLeg::traverse(self.f, chart, 0.0, piece, here)?;
            self.path.legs.push(leg);
        }
        Ok(())
    }

    /// Appends the four legs of the quadrilateral `[0, t] x [0, s]` based at
    /// the current point.
    fn push_loop(&mut self, t: f64, s: f64) -> Result<(), LeafError> {
        let grid = LeafGrid {
            f: self.f,
            origin: self.current(),
            policy: self.policy,
            depth: self.depth,
        };
        let legs = [
            (LegChart::Unstable(grid.unstable_chart(0.0)?), 0.0, t),
            (LegChart::Stable(grid.stable_chart(t)), 0.0, s),
            (LegChart::Unstable(grid.unstable_chart(s)?), t, 0.0),
            (LegChart::Stable(grid.stable_chart(0.0)), s, 0.0),
        ];
        for (chart, from, to) in legs {
            let leg = SuLeg::traverse(self.f, chart, from, to, self.current())?;
            self.path.legs.push(leg);
        }
        Ok(())
    }

    fn holonomy(&self, t: f64, s: f64) -> Result<f64, LeafError> {
        let q = QuadrilateralSpec {
            origin: self.current(),
            u0: 0.0,
            sigma0: 0.0,
            t,
            s,
            policy: self.policy.clone(),
            orientation: Orientation::UnstableFirst,
            depth: self.depth,
        };
        Ok(quadrilateral_holonomy(self.f, &q)?.value)
    }
}

const LOOP_SHAPES: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

/// Finds `lambda` in `(0, 1]` with `holonomy(lambda * shape) = target`,
/// bracketing over [`SHOOTING_SCALES`] scales and bisecting.
fn shoot(
    b: &PathBuilder,
    shape: (f64, f64),
    target: f64,
    tol: f64,
) -> Result<Option<f64>, LeafError> {
    let h = |lambda: f64| b.holonomy(lambda * shape.0 * MAX_LEG, lambda * shape.1 * MAX_LEG);
    let (mut lo, mut g_lo) = (0.0, -target);
    for i in 1..=SHOOTING_SCALES {
        let hi = i as f64 / SHOOTING_SCALES as f64;
        let g_hi = h(hi)? - target;
        if g_lo.signum() != g_hi.signum() || g_hi.abs() < tol {
            let mut hi = hi;
            let mut g_hi_v = g_hi;
            for _ in 0..60 {
                if g_hi_v.abs() < tol * 1e-3 || hi - lo < 1e-15 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let g_mid = h(mid)? - target;
                if g_mid.signum() == g_lo.signum() {
                    lo = mid;
                    g_lo = g_mid;
                } else {
                    hi = mid;
                    g_hi_v = g_mid;
                }
            }
            return Ok(Some(hi));
        }
        lo = hi;
        g_lo = g_hi;
    }
    Ok(None)
}

/// An su-path from `from` to `to` (fiber error below `tol`) with the default
/// leg policy and depth.
pub fn build_su_path(
    f: &ToralExtension,
    from: &TorusFiberedPoint,
    to: &TorusFiberedPoint,
    tol: f64,
) -> Result<SuPath, LeafError> {
    build_su_path_with(f, from, to, tol, &LegPolicy::default_for(f), DEFAULT_DEPTH)
}

pub fn build_su_path_with(
    f: &ToralExtension,
    from: &TorusFiberedPoint,
    to: &TorusFiberedPoint,
    tol: f64,
    policy: &LegPolicy,
    depth: usize,
) -> Result<SuPath, LeafError> {
    if from == to {
        return Ok(SuPath::empty(*from));
    }
    let mut b = PathBuilder {
        f,
        policy,
        depth,
        path: SuPath::empty(*from),
    };
    let c = f.base_map().to_eigen(&to.base.offset_from(&from.base));
    b.straight(false, c[1])?;
    b.straight(true, c[0])?;

    let error = |b: &PathBuilder| circle_difference(to.theta(), b.current().theta());
    let mut e = error(&b);
    if e.abs() < tol {
        return Ok(b.path);
    }
    let probe = LOOP_SHAPES
        .iter()
        .map(|&(a, s)| b.holonomy(a * MAX_LEG, s * MAX_LEG).map(f64::abs))
        .try_fold(0.0f64, |m, h| h.map(|h| m.max(h)))?;
    if probe < 1e-12 {
        return Err(LeafError::NotAccessibleNumerically { achieved: e.abs() });
    }
    for _ in 0..SHOOTING_ROUNDS {
        let mut solved = None;
        for &shape in &LOOP_SHAPES {
            if let Some(lambda) = shoot(&b, shape, e, tol)? {
                solved = Some((shape, lambda));
                break;
            }
        }
        let (t, s) = match solved {
            Some((shape, lambda)) => (lambda * shape.0 * MAX_LEG, lambda * shape.1 * MAX_LEG),
            None => {
                // no single loop reaches the error: take the largest step towards it
                let mut best = (0.0, (0.0, 0.0));
                for &shape in &LOOP_SHAPES {
                    for i in 1..=SHOOTING_SCALES {
                        let lambda = i as f64 / SHOOTING_SCALES as f64;
                        let (t, s) = (lambda * shape.0 * MAX_LEG, lambda * shape.1 * MAX_LEG);
                        let h = b.holonomy(t, s)?;
                        if h.signum() == e.signum() && h.abs() > best.0 {
                            best = (h.abs(), (t, s));
                        }
                    }
                }
                if best.0 == 0.0 {
                    return Err(LeafError::NotAccessibleNumerically { achieved: e.abs() });
                }
                best.1
            }
        };
        b.push_loop(t, s)?;
        e = error(&b);
        if e.abs() < tol {
            return Ok(b.path);
        }
    }
    Err(LeafError::NotAccessibleNumerically { achieved: e.abs() })
}

/// Points of the stable leaf through `x` up to base arc length `arc_length`,
/// spaced at most `0.25 / grid` apart in each coordinate. Charts are
/// re-anchored before the parameter reaches [`MAX_LEG`].
pub fn stable_leaf_samples(
    f: &ToralExtension,
    x: &TorusFiberedPoint,
    arc_length: f64,
    grid: usize,
) -> Vec<[f64; 3]> {
    let h = 0.25 / grid.max(1) as f64;
    let coords = |p: &TorusFiberedPoint| [p.base.x(), p.base.y(), p.theta()];
    let mut samples = vec![coords(x)];
    let mut chart = StableLeafChart::new(f, *x, DEFAULT_DEPTH);
    let mut t = 0.0;
    let mut last_offset = 0.0;
    let mut travelled = 0.0;
    while travelled < arc_length {
        let mut step = h.min(arc_length - travelled);
        if t + step > MAX_LEG {
            let here = chart
                .point(f, t)
                .expect("chart parameter stays below the half width");
            chart = StableLeafChart::new(f, here, DEFAULT_DEPTH);
            t = 0.0;
            last_offset = 0.0;
        }
        let mut offset = chart.offset(f, t + step).expect("within chart").value;
        while (offset - last_offset).abs() > h && step > h * 1e-3 {
            step *= 0.5;
            offset = chart.offset(f, t + step).expect("within chart").value;
        }
        t += step;
        travelled += step;
        last_offset = offset;
        let p =
            FiberedPoint::from_raw(chart.base_at(f, t), chart.anchor().theta_raw()).rotated(offset);
        samples.push(coords(&p));
    }
    samples
}

fn torus3_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3)
        .map(|i| circle_distance(a[i], b[i]))
        .fold(0.0, f64::max)
}

/// `max` over the centers of a `grid^3` partition of `T^3` of the sup
/// distance to the nearest sample.
pub fn covering_radius(samples: &[[f64; 3]], grid: usize) -> f64 {
    if samples.is_empty() {
        return 0.5;
    }
    let bins = 2 * grid.max(1);
    let width = 1.0 / bins as f64;
    let bin_of = |v: f64| ((v * bins as f64).floor() as isize).rem_euclid(bins as isize) as usize;
    let index = |i: usize, j: usize, k: usize| (i * bins + j) * bins + k;
    let mut table: Vec<Vec<[f64; 3]>> = vec![Vec::new(); bins * bins * bins];
    for p in samples {
        table[index(bin_of(p[0]), bin_of(p[1]), bin_of(p[2]))].push(*p);
    }
    let g = grid.max(1);
    (0..g * g * g)
        .into_par_iter()
        .map(|cell| {
            let c = [
                ((cell / (g * g)) as f64 + 0.5) / g as f64,
                ((cell / g % g) as f64 + 0.5) / g as f64,
                ((cell % g) as f64 + 0.5) / g as f64,
            ];
            let home = [
                bin_of(c[0]) as isize,
                bin_of(c[1]) as isize,
                bin_of(c[2]) as isize,
            ];
            let mut best = f64::INFINITY;
            for r in 0..=(bins as isize / 2) {
                for di in -r..=r {
                    for dj in -r..=r {
                        for dk in -r..=r {
                            if di.abs().max(dj.abs()).max(dk.abs()) != r {
                                continue;
                            }
                            let w = |h: isize, d: isize| (h + d).rem_euclid(bins as isize) as usize;
                            for p in &table[index(w(home[0], di), w(home[1], dj), w(home[2], dk))] {
                                best = best.min(torus3_distance(p, &c));
                            }
                        }
                    }
                }
                if best <= r as f64 * width {
                    break;
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Covering radius of the stable leaf through `x` sampled to arc length
/// `arc_length`, on a `grid^3` partition.
pub fn leaf_density_radius(
    f: &ToralExtension,
    x: &TorusFiberedPoint,
    arc_length: f64,
    grid: usize,
) -> f64 {
    covering_radius(&stable_leaf_samples(f, x, arc_length, grid), grid)
}

pub fn write_holonomy_csv<W: Write>(w: &mut W, rows: &[(f64, f64, f64)]) -> io::Result<()> {
    writeln!(w, "t,s,holonomy")?;
    for (t, s, h) in rows {
        writeln!(w, "{t:.17e},{s:.17e},{h:.17e}")?;
    }
    Ok(())
}

pub fn write_su_paths_csv<W: Write>(w: &mut W, paths: &[SuPath]) -> io::Result<()> {
    writeln!(
        w,
        "path,leg,kind,from,to,start_x,start_y,start_theta,end_x,end_y,end_theta,itinerary"
    )?;
    for (p, path) in paths.iter().enumerate() {
        for (i, leg) in path.legs.iter().enumerate() {
            let itinerary = match &leg.chart {
                LegChart::Unstable(c) => c.preorbit().itinerary(),
                LegChart::Stable(_) => String::new(),
            };
            writeln!(
                w,
                "{p},{i},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{itinerary}",
                leg.kind(),
                leg.from,
                leg.to,
                leg.start.base.x(),
                leg.start.base.y(),
                leg.start.theta(),
                leg.end.base.x(),
                leg.end.base.y(),
                leg.end.theta()
            )?;
        }
    }
    Ok(())
}
