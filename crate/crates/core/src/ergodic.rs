//! Birkhoff averages, box-coverage transitivity, leafwise SRB densities and
//! the volume-preservation certificate.

use std::f64::consts::TAU;
use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::base::BaseMap;
use crate::error::LeafError;
use crate::foliation::UnstableLeafChart;
use crate::orbit_space::Preorbit;
use crate::point::{fixed_to_f64, BasePoint, TorusPoint2};
use crate::skew::{FiberedPoint, RotationExtension, ToralExtension};
use crate::stats::{std_dev, stream_rng, SeriesValue};

/// Test functions on `M x S^1` with known space averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observable {
    Constant,
    CosFiber,
    SinFiber,
    CosBase,
    CosBaseFiber,
}

impl Observable {
    pub const CATALOG: [Observable; 5] = [
        Observable::Constant,
        Observable::CosFiber,
        Observable::SinFiber,
        Observable::CosBase,
        Observable::CosBaseFiber,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::Constant => "one",
            Observable::CosFiber => "cos_theta",
            Observable::SinFiber => "sin_theta",
            Observable::CosBase => "cos_x",
            Observable::CosBaseFiber => "cos_x_plus_theta",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::CATALOG.into_iter().find(|o| o.name() == name)
    }

    pub fn eval<P: BasePoint>(&self, p: &FiberedPoint<P>) -> f64 {
        let x = || p.base.coords().as_ref()[0];
        match self {
            Observable::Constant => 1.0,
            Observable::CosFiber => (TAU * p.theta()).cos(),
            Observable::SinFiber => (TAU * p.theta()).sin(),
            Observable::CosBase => (TAU * x()).cos(),
            Observable::CosBaseFiber => (TAU * (x() + p.theta())).cos(),
        }
    }

    /// Integral against Haar measure on `M x S^1`.
    pub fn space_average(&self) -> f64 {
        match self {
            Observable::Constant => 1.0,
            _ => 0.0,
        }
    }
}

/// `(1/N) sum_{j<N} psi(F^j(start))` along a dithered orbit.
pub fn birkhoff_average<B: BaseMap>(
    f: &RotationExtension<B>,
    psi: Observable,
    start: &FiberedPoint<B::Point>,
    n: usize,
) -> f64 {
    // running mean: exact when the observable is constant along the orbit
    let mut mean = 0.0;
    let mut p = *start;
    for j in 0..n {
        mean += (psi.eval(&p) - mean) / (j + 1) as f64;
        p = f.apply_dithered(&p);
    }
    mean
}

#[derive(Clone, Debug, PartialEq)]
pub struct BirkhoffReport<P> {
    pub observable: Observable,
    pub starts: Vec<FiberedPoint<P>>,
    pub averages: Vec<f64>,
    pub mean: f64,
    pub dispersion: f64,
    pub iterations: usize,
    pub seed: u64,
}

/// Time averages from `starts` uniformly sampled points; the dispersion is
/// their sample standard deviation.
pub fn birkhoff_dispersion<B: BaseMap>(
    f: &RotationExtension<B>,
    psi: Observable,
    starts: usize,
    n: usize,
    seed: u64,
) -> BirkhoffReport<B::Point> {
    let pts: Vec<FiberedPoint<B::Point>> = (0..starts)
        .map(|i| FiberedPoint::uniform(&mut stream_rng(seed, i as u64)))
        .collect();
    let averages: Vec<f64> = pts
        .par_iter()
        .map(|x| birkhoff_average(f, psi, x, n))
        .collect();
    let mean = averages.iter().sum::<f64>() / averages.len().max(1) as f64;
    BirkhoffReport {
        observable: psi,
        starts: pts,
        dispersion: std_dev(&averages),
        averages,
        mean,
        iterations: n,
        seed,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitivityReport {
    pub grid: usize,
    pub iterations: usize,
    pub radius: f64,
    pub cloud_size: usize,
    pub fraction: f64,
    first_visit: Vec<u32>,
}

impl TransitivityReport {
    pub fn boxes(&self) -> usize {
        self.first_visit.len()
    }

    /// Fraction of boxes visited within the first `n` iterations.
    pub fn fraction_at(&self, n: usize) -> f64 {
        let n = n.min(self.iterations) as u32;
        self.first_visit.iter().filter(|t| **t <= n).count() as f64 / self.boxes() as f64
    }

    /// `(n, fraction_at(n))` at `points` evenly spaced checkpoints including 0 and N.
    pub fn curve(&self, points: usize) -> Vec<(usize, f64)> {
        let k = points.max(2) - 1;
        let mut out: Vec<(usize, f64)> = (0..=k)
            .map(|i| i * self.iterations / k)
            .map(|n| (n, self.fraction_at(n)))
            .collect();
        out.dedup_by_key(|r| r.0);
        out
    }
}

fn box_index<P: BasePoint>(p: &FiberedPoint<P>, grid: usize) -> usize {
    let cell = |v: f64| ((v * grid as f64) as usize).min(grid - 1);
    let mut idx = cell(p.theta());
    for c in p.base.coords().as_ref() {
        idx = idx * grid + cell(*c);
    }
    idx
}

/// Iterates a uniform cloud in the sup ball `B_radius(center)` and records
/// which of the `grid^(dim)` boxes are visited within `n` steps.
pub fn box_transitivity<B: BaseMap>(
    f: &RotationExtension<B>,
    center: &FiberedPoint<B::Point>,
    radius: f64,
    grid: usize,
    n: usize,
    cloud_size: usize,
    seed: u64,
) -> TransitivityReport {
    let grid = grid.max(2);
    let boxes = grid.pow(f.dim() as u32);
    let first_visit = (0..cloud_size)
        .into_par_iter()
        .fold(
            || vec![u32::MAX; boxes],
            |mut seen, i| {
                let mut rng = stream_rng(seed, i as u64);
                let mut p = ball_point(center, radius, &mut rng);
                for step in 0..=n {
                    let b = box_index(&p, grid);
                    seen[b] = seen[b].min(step as u32);
                    p = f.apply_dithered(&p);
                }
                seen
            },
        )
        .reduce(
            || vec![u32::MAX; boxes],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = (*x).min(y);
                }
                a
            },
        );
    let mut report = TransitivityReport {
        grid,
        iterations: n,
        radius,
        cloud_size,
        fraction: 0.0,
        first_visit,
    };
    report.fraction = report.fraction_at(n);
    report
}

fn ball_point<P: BasePoint>(
    center: &FiberedPoint<P>,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> FiberedPoint<P> {
    let mut d = P::Vector::default();
    for c in d.as_mut() {
        *c = rng.gen_range(-radius..radius);
    }
    let theta = rng.gen_range(-radius..radius);
    FiberedPoint::from_raw(center.base.translate(&d), center.theta_raw()).rotated(theta)
}

/// Number of grid cells of width `1 / grid` on the circle meeting the open
/// interval `(c - r, c + r)`.
pub fn cells_meeting_interval(c: f64, r: f64, grid: usize) -> usize {
    if 2.0 * r >= 1.0 {
        return grid;
    }
    let g = grid as f64;
    let lo = ((c - r) * g).floor();
    let hi = ((c + r) * g).ceil();
    ((hi - lo) as usize).min(grid)
}

/// Boxes of the `grid^(D+1)` partition meeting the sup ball `B_r(center)`.
pub fn boxes_meeting_ball<P: BasePoint>(center: &FiberedPoint<P>, r: f64, grid: usize) -> usize {
    center
        .base
        .coords()
        .as_ref()
        .iter()
        .map(|c| cells_meeting_interval(*c, r, grid))
        .product::<usize>()
        * cells_meeting_interval(center.theta(), r, grid)
}

/// Largest coverage possible when the fiber coordinate never leaves the
/// slab `|theta - center.theta| < r`.
pub fn slab_bound<P: BasePoint>(center: &FiberedPoint<P>, r: f64, grid: usize) -> f64 {
    cells_meeting_interval(center.theta(), r, grid) as f64 / grid as f64
}

/// `J^u` at the preorbit points `x_{-1}, ..., x_{-k}`, from one forward sweep
/// of the unstable seed starting at the deepest point.
fn unstable_jacobians(f: &ToralExtension, pre: &Preorbit<TorusPoint2>, k: usize) -> Vec<f64> {
    let e = f.base_map().eigen();
    let mut w = nalgebra::Vector3::new(e.v_u[0], e.v_u[1], 0.0);
    let mut out = vec![0.0; k];
    for j in (1..=pre.depth()).rev() {
        let image = f.derivative(&pre.point(j).base).0 * w;
        let n = image.norm();
        if j <= k {
            out[j - 1] = n;
        }
        w = image / n;
    }
    out
}

/// Truncated `prod_{k=1}^{K} J^u(x_{-k}) / J^u(y_{-k})` with a bound on the
/// omitted factors.
pub fn srb_delta_u(
    f: &ToralExtension,
    x: &Preorbit<TorusPoint2>,
    y: &Preorbit<TorusPoint2>,
    k: usize,
) -> Result<SeriesValue, LeafError> {
    let depth = x.depth().min(y.depth());
    if k == 0 || k > depth {
        return Err(crate::error::OrbitError::InvalidDepth.into());
    }
    let jx = unstable_jacobians(f, x, k);
    let jy = unstable_jacobians(f, y, k);
    let log: f64 = jx.iter().zip(&jy).map(|(a, b)| (a / b).ln()).sum();
    let value = log.exp();
    let a_u = f.base_map().eigen().a_u;
    let gap = y.anchor().base.distance(&x.anchor().base);
    // 2 |D^2 phi| bounds the leafwise Lipschitz constant of log J^u
    let lip = 2.0 * f.bump().map_or(0.0, |b| b.hessian_bound());
    let tail = lip * 2.0 * gap * a_u.powi(-(k as i32)) / (a_u - 1.0);
    Ok(SeriesValue {
        value,
        tail_bound: value * tail.exp_m1(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrbLeafDensity {
    /// Chart parameters along the unstable line.
    pub t: Vec<f64>,
    pub delta_u: Vec<f64>,
    pub normalization: f64,
    pub rho: Vec<f64>,
    pub truncation: usize,
}

impl SrbLeafDensity {
    /// Trapezoid rule for `rho` on the parameter grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.t, &self.rho)
    }

    /// `max |rho * length - 1|`: the relative deviation from the uniform density.
    pub fn uniform_deviation(&self) -> f64 {
        let len = self.t.last().unwrap_or(&0.0) - self.t.first().unwrap_or(&0.0);
        self.rho
            .iter()
            .map(|r| (r * len - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// Preimages kept for the unstable-direction sweep beyond the truncation of
/// the Jacobian product.
const SRB_SWEEP_MARGIN: usize = 20;

/// Leafwise SRB density on the unstable segment `|t| <= half_length` of the
/// chart over `anchor`, with respect to the chart parameter.
pub fn srb_density(
    f: &ToralExtension,
    anchor: &Preorbit<TorusPoint2>,
    half_length: f64,
    quad_points: usize,
) -> Result<SrbLeafDensity, LeafError> {
    let chart = UnstableLeafChart::new(anchor.clone());
    let k = anchor.depth().saturating_sub(SRB_SWEEP_MARGIN).max(1);
    let n = quad_points.max(2);
    let t: Vec<f64> = (0..n)
        .map(|i| -half_length + 2.0 * half_length * i as f64 / (n - 1) as f64)
        .collect();
    let delta_u = t
        .par_iter()
        .map(|&ti| {
            let shadow = chart.shadow(f, ti)?;
            srb_delta_u(f, anchor, &shadow, k).map(|d| d.value)
        })
        .collect::<Result<Vec<f64>, LeafError>>()?;
    let normalization = trapezoid(&t, &delta_u);
    let rho = delta_u.iter().map(|d| d / normalization).collect();
    Ok(SrbLeafDensity {
        t,
        delta_u,
        normalization,
        rho,
        truncation: k,
    })
}

/// Maps whose preimage Jacobian sum `sum_{F(q) = p} 1 / |det dF(q)|` can be
/// evaluated; it is identically 1 exactly when volume is preserved.
pub trait JacobianSum: Sync {
    type Point: Send;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Self::Point;
    fn jacobian_sum(&self, p: &Self::Point) -> f64;
}

impl<B: BaseMap> JacobianSum for RotationExtension<B> {
    type Point = FiberedPoint<B::Point>;

    fn sample(&self, rng: &mut ChaCha8Rng) -> Self::Point {
        FiberedPoint::uniform(rng)
    }

    fn jacobian_sum(&self, p: &Self::Point) -> f64 {
        self.jacobian_sum_check(p)
    }
}

pub const VOLUME_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeCertificate {
    pub passed: bool,
    pub max_deviation: f64,
    pub samples: usize,
}

pub fn volume_preservation_certificate<M: JacobianSum>(
    map: &M,
    samples: usize,
    seed: u64,
) -> VolumeCertificate {
    let max_deviation = (0..samples)
        .into_par_iter()
        .map(|i| (map.jacobian_sum(&map.sample(&mut stream_rng(seed, i as u64))) - 1.0).abs())
        .reduce(|| 0.0, f64::max);
    VolumeCertificate {
        passed: max_deviation < VOLUME_TOLERANCE,
        max_deviation,
        samples,
    }
}

pub fn write_birkhoff_csv<P: BasePoint, W: Write>(
    w: &mut W,
    report: &BirkhoffReport<P>,
) -> io::Result<()> {
    for name in P::COORD_NAMES {
        write!(w, "start_{name},")?;
    }
    writeln!(w, "start_theta,N,average")?;
    for (p, a) in report.starts.iter().zip(&report.averages) {
        for c in p.base.coords().as_ref() {
            write!(w, "{c:.17e},")?;
        }
        writeln!(
            w,
            "{:.17e},{},{a:.17e}",
            fixed_to_f64(p.theta_raw()),
            report.iterations
        )?;
    }
    Ok(())
}

pub fn write_transitivity_csv<W: Write>(w: &mut W, curve: &[(usize, f64)]) -> io::Result<()> {
    writeln!(w, "N,fraction")?;
    for (n, frac) in curve {
        writeln!(w, "{n},{frac:.17e}")?;
    }
    Ok(())
}

pub fn write_srb_csv<W: Write>(w: &mut W, d: &SrbLeafDensity) -> io::Result<()> {
    writeln!(w, "t,delta_u,rho")?;
    for ((t, du), r) in d.t.iter().zip(&d.delta_u).zip(&d.rho) {
        writeln!(w, "{t:.17e},{du:.17e},{r:.17e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{ExpandingCircleMap, LinearToralEndomorphism};
    use crate::foliation::LegPolicy;
    use crate::point::CirclePoint;
    use crate::skew::CircleExtension;

    fn example() -> ToralExtension {
        ToralExtension::standard_example()
    }

    fn product() -> ToralExtension {
        ToralExtension::product(LinearToralEndomorphism::standard_example())
    }

    #[test]
    fn observables() {
        let p = FiberedPoint::new(TorusPoint2::new(0.25, 0.0), 0.5);
        assert_eq!(Observable::Constant.eval(&p), 1.0);
        assert!((Observable::CosFiber.eval(&p) + 1.0).abs() < 1e-15);
        assert!(Observable::CosBase.eval(&p).abs() < 1e-15);
        for o in Observable::CATALOG {
            assert_eq!(Observable::from_name(o.name()), Some(o));
        }
        assert_eq!(Observable::from_name("nope"), None);
    }

    #[test]
    fn constant_and_product_averages_are_exact() {
        let f = example();
        let x = FiberedPoint::new(TorusPoint2::new(0.3, 0.1), 0.37);
        for n in [1, 7, 1000] {
            assert_eq!(birkhoff_average(&f, Observable::Constant, &x, n), 1.0);
            let c = Observable::CosFiber.eval(&x);
            assert_eq!(birkhoff_average(&product(), Observable::CosFiber, &x, n), c);
        }
        let r = birkhoff_dispersion(&f, Observable::Constant, 5, 100, 1);
        assert_eq!(r.dispersion, 0.0);
    }

    #[test]
    fn dispersion_contrast() {
        let p = birkhoff_dispersion(&product(), Observable::CosFiber, 100, 200, 9);
        assert!(p.dispersion > 0.5);
        let m = birkhoff_dispersion(&example(), Observable::CosFiber, 20, 100_000, 9);
        assert!(m.dispersion < 0.05, "{}", m.dispersion);
        assert!(m.averages.iter().all(|a| a.abs() <= 1.0));
    }

    #[test]
    fn dispersion_is_invariant_under_relabeling() {
        let r = birkhoff_dispersion(&example(), Observable::SinFiber, 6, 500, 2);
        let mut rev = r.averages.clone();
        rev.reverse();
        assert!((std_dev(&rev) - r.dispersion).abs() < 1e-15);
    }

    #[test]
    fn transitivity_at_time_zero_is_geometric() {
        let f = example();
        let center = FiberedPoint::new(TorusPoint2::new(0.525, 0.525), 0.525);
        let r = box_transitivity(&f, &center, 0.05, 20, 0, 1000, 3);
        assert_eq!(boxes_meeting_ball(&center, 0.05, 20), 27);
        assert_eq!(r.fraction, 27.0 / 8000.0);
    }

    #[test]
    fn transitivity_monotone_and_product_slab() {
        let f = example();
        let center = FiberedPoint::new(TorusPoint2::new(0.2, 0.6), 0.3);
        let r = box_transitivity(&f, &center, 0.05, 10, 200, 50, 1);
        let curve = r.curve(11);
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
        let bigger = box_transitivity(&f, &center, 0.05, 10, 200, 80, 1);
        assert!(bigger.fraction >= r.fraction);

        let c = FiberedPoint::new(TorusPoint2::new(0.2, 0.6), 0.525);
        let p = box_transitivity(&product(), &c, 0.05, 20, 2000, 200, 1);
        assert!(p.fraction <= slab_bound(&c, 0.05, 20));
        assert_eq!(slab_bound(&c, 0.05, 20), 0.15);
    }

    #[test]
    fn transitivity_on_circle_base() {
        let f = CircleExtension::with_default_bump(ExpandingCircleMap::doubling()).unwrap();
        let r = box_transitivity(
            &f,
            &FiberedPoint::new(CirclePoint::new(0.3), 0.1),
            0.02,
            10,
            300,
            100,
            1,
        );
        assert_eq!(r.boxes(), 100);
        assert!(r.fraction > 0.9);
    }

    fn leaf_setup(f: &ToralExtension) -> (Preorbit<TorusPoint2>, UnstableLeafChart) {
        let pre = LegPolicy::default_for(f)
            .preorbit(f, &FiberedPoint::origin(), 60)
            .unwrap();
        (pre.clone(), UnstableLeafChart::new(pre))
    }

    #[test]
    fn delta_u_identity_and_cocycle() {
        let f = example();
        let (pre, chart) = leaf_setup(&f);
        assert_eq!(srb_delta_u(&f, &pre, &pre, 40).unwrap().value, 1.0);
        let y = chart.shadow(&f, 0.1).unwrap();
        let z = chart.shadow(&f, -0.2).unwrap();
        let xy = srb_delta_u(&f, &pre, &y, 40).unwrap().value;
        let yz = srb_delta_u(&f, &y, &z, 40).unwrap().value;
        let xz = srb_delta_u(&f, &pre, &z, 40).unwrap().value;
        assert!((xy * yz - xz).abs() < 1e-8);
        assert!(xy > 0.0 && yz > 0.0);
        assert_ne!(xy, 1.0);
        assert!(matches!(
            srb_delta_u(&f, &pre, &y, 61),
            Err(LeafError::Orbit(_))
        ));
    }

    #[test]
    fn delta_u_product_is_one() {
        let f = product();
        let (pre, chart) = leaf_setup(&f);
        let y = chart.shadow(&f, 0.3).unwrap();
        assert_eq!(srb_delta_u(&f, &pre, &y, 40).unwrap().value, 1.0);
    }

    #[test]
    fn density_normalization() {
        let f = example();
        let (pre, _) = leaf_setup(&f);
        let d = srb_density(&f, &pre, 0.3, 121).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-8);
        assert!(d.rho.iter().all(|r| *r > 0.0));
        assert!(d.uniform_deviation() > 1e-4);
        let p = product();
        let (pre, _) = leaf_setup(&p);
        let u = srb_density(&p, &pre, 0.3, 121).unwrap();
        assert!(u.rho.iter().all(|r| *r == u.rho[0]));
        assert!((u.rho[0] - 1.0 / 0.6).abs() < 1e-12);
    }

    /// `x -> A x + delta beta(x) v` on the base, identity on the fiber: a
    /// degree-2 map that does not preserve volume.
    struct BaseBumped {
        inner: ToralExtension,
        delta: f64,
    }

    impl BaseBumped {
        fn bump(&self) -> &crate::base::BumpFunction<TorusPoint2> {
            self.inner.bump().unwrap()
        }

        fn apply(&self, q: &TorusPoint2) -> TorusPoint2 {
            let v = self.bump().direction();
            let b = self.delta * self.bump().eval(q);
            self.inner
                .base_map()
                .apply(q)
                .translate(&[b * v[0], b * v[1]])
        }

        fn det(&self, q: &TorusPoint2) -> f64 {
            let v = self.bump().direction();
            let g = self.bump().grad(q);
            let a = self.inner.base_map().derivative();
            let m = [
                a[0] + self.delta * v[0] * g[0],
                a[1] + self.delta * v[0] * g[1],
                a[2] + self.delta * v[1] * g[0],
                a[3] + self.delta * v[1] * g[1],
            ];
            m[0] * m[3] - m[1] * m[2]
        }
    }

    impl JacobianSum for BaseBumped {
        type Point = TorusPoint2;

        fn sample(&self, rng: &mut ChaCha8Rng) -> TorusPoint2 {
            TorusPoint2::uniform(rng)
        }

        fn jacobian_sum(&self, p: &TorusPoint2) -> f64 {
            // Newton from the unperturbed preimages
            self.inner
                .base_map()
                .preimages(p)
                .into_iter()
                .map(|mut q| {
                    for _ in 0..50 {
                        let r = p.offset_from(&self.apply(&q));
                        let inv = self.inner.base_map().to_eigen(&r);
                        let e = self.inner.base_map().eigen();
                        let step = self
                            .inner
                            .base_map()
                            .combine_eigen(&[inv[0] / e.a_s, inv[1] / e.a_u]);
                        q = q.translate(&step);
                    }
                    1.0 / self.det(&q).abs()
                })
                .sum()
        }
    }

    #[test]
    fn volume_certificates() {
        let f = example();
        let c = volume_preservation_certificate(&f, 500, 1);
        assert!(c.passed);
        assert_eq!(c.max_deviation, 0.0);
        let d = CircleExtension::with_default_bump(ExpandingCircleMap::doubling()).unwrap();
        assert!(volume_preservation_certificate(&d, 500, 1).passed);
        let bad = BaseBumped {
            inner: example(),
            delta: 0.1,
        };
        let cert = volume_preservation_certificate(&bad, 500, 1);
        assert!(!cert.passed, "{cert:?}");
    }

    #[test]
    fn csv_schemas() {
        let r = birkhoff_dispersion(&example(), Observable::CosFiber, 3, 10, 1);
        let mut out = Vec::new();
        write_birkhoff_csv(&mut out, &r).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("start_x,start_y,start_theta,N,average\n"));
        let c = birkhoff_dispersion(
            &CircleExtension::with_default_bump(ExpandingCircleMap::doubling()).unwrap(),
            Observable::CosFiber,
            2,
            10,
            1,
        );
        let mut out = Vec::new();
        write_birkhoff_csv(&mut out, &c).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("start_x,start_theta,N,average\n"));
        let mut out = Vec::new();
        write_transitivity_csv(&mut out, &[(0, 0.1), (5, 0.2)]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "N,fraction\n0,1.00000000000000006e-1\n5,2.00000000000000011e-1\n"
        );
    }
}
