//! Invariant directions, Lyapunov exponents and the center-exponent integral.
//!
//! `E^s` comes from the inverse cocycle along the forward orbit, `E^u` from
//! the forward cocycle along a preorbit, `E^c` from the intersection of the
//! center-stable and center-unstable planes.

use std::io::{self, Write};

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;

use crate::base::BaseMap;
use crate::error::BundleError;
use crate::orbit_space::{sample_preorbit, Preorbit, PreorbitPolicy};
use crate::point::{BasePoint, TorusPoint2};
use crate::skew::{
    FiberedPoint, RotationExtension, TangentCocycle, ToralExtension, TorusFiberedPoint,
};
use crate::stats::{batch_means, stream_rng, MeanEstimate, BATCHES};

/// Seeds closer than this to the complementary plane are rejected.
pub const SEED_DEGENERACY: f64 = 1e-12;
const MAX_RESEEDS: usize = 3;
const QR_WARMUP: usize = 100;
/// Extra orbit length used to converge the backward sweep of
/// [`mean_center_exponent`] before averaging starts.
const SWEEP_TAIL: usize = 64;

/// A line through the origin of `R^3`, stored as a unit representative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction3(Vector3<f64>);

impl Direction3 {
    pub fn new(v: Vector3<f64>) -> Option<Self> {
        let n = v.norm();
        (n.is_finite() && n > 0.0).then(|| Direction3(v / n))
    }

    pub fn fiber() -> Self {
        Direction3(Vector3::z())
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    /// Angle between the lines, in `[0, pi/2]`.
    pub fn angle(&self, other: &Direction3) -> f64 {
        line_angle(&self.0, &other.0)
    }
}

fn line_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b).abs())
}

/// A direction together with its convergence residual (angle between the
/// estimates from `n` and `n - 1` steps) or, for `E^c`, its invariance defect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionEstimate {
    pub direction: Direction3,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplittingEstimate {
    pub at: TorusFiberedPoint,
    pub e_s: Direction3,
    pub e_c: Direction3,
    pub e_u: Direction3,
    /// Invariance defects `angle(dF e(p), e(F p))` for s, c, u.
    pub residuals: [f64; 3],
}

/// Empirical constants with `|dF^m e_s| <= C nu^m`, `gamma1^m <= |dF^m e_c| <= gamma2^m`
/// and `|dF^m e_u| >= mu^m / C` over the sampled points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimates {
    pub nu: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub mu: f64,
    pub c: f64,
}

impl RateEstimates {
    pub fn certifies_partial_hyperbolicity(&self) -> bool {
        0.0 < self.nu
            && self.nu < self.gamma1
            && self.gamma1 <= self.gamma2
            && self.gamma2 < self.mu
            && self.nu < 1.0
            && self.mu > 1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSpectrum {
    /// Ascending.
    pub exponents: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovTriple {
    pub lambda_s: f64,
    pub lambda_c: f64,
    pub lambda_u: f64,
    pub std_errors: [f64; 3],
    pub iterations: usize,
}

impl LyapunovTriple {
    pub fn sum(&self) -> f64 {
        self.lambda_s + self.lambda_c + self.lambda_u
    }
}

fn lift(v: [f64; 2], t: f64) -> Vector3<f64> {
    Vector3::new(v[0], v[1], t)
}

fn generic_seeds() -> [Vector3<f64>; 3] {
    [
        Vector3::new(0.48, -0.62, 0.62).normalize(),
        Vector3::new(-0.31, 0.77, 0.56).normalize(),
        Vector3::new(0.83, 0.21, -0.52).normalize(),
    ]
}

/// First candidate not lying in the plane with unit normal `normal`; the
/// first entry plus at most three re-seeds are tried.
pub fn choose_seed(
    candidates: &[Vector3<f64>],
    normal: &Vector3<f64>,
) -> Result<Vector3<f64>, BundleError> {
    let tried = candidates.len().min(MAX_RESEEDS + 1);
    candidates[..tried]
        .iter()
        .find(|c| c.normalize().dot(normal).abs() >= SEED_DEGENERACY)
        .copied()
        .ok_or(BundleError::DegenerateSeed { attempts: tried })
}

fn orthonormalize(a: Vector3<f64>, b: Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let q1 = a / a.norm();
    let w = b - q1 * q1.dot(&b);
    (q1, w / w.norm())
}

fn exact_base_orbit(f: &ToralExtension, x: &TorusPoint2, n: usize) -> Vec<TorusPoint2> {
    let mut out = Vec::with_capacity(n + 1);
    let mut p = *x;
    out.push(p);
    for _ in 0..n {
        p = f.base_map().apply(&p);
        out.push(p);
    }
    out
}

fn d_at(f: &ToralExtension, p: &TorusPoint2) -> Matrix3<f64> {
    f.derivative(p).0
}

fn d_inv_at(f: &ToralExtension, p: &TorusPoint2) -> Matrix3<f64> {
    f.derivative(p).inverse()
}

fn pull_back(
    f: &ToralExtension,
    orbit: &[TorusPoint2],
    m: usize,
    seed: Vector3<f64>,
) -> Vector3<f64> {
    let mut w = seed;
    for k in (0..m).rev() {
        w = d_inv_at(f, &orbit[k]) * w;
        w /= w.norm();
    }
    w
}

fn push_forward(
    f: &ToralExtension,
    pre: &Preorbit<TorusPoint2>,
    m: usize,
    seed: Vector3<f64>,
) -> Vector3<f64> {
    let mut w = seed;
    for k in (1..=m).rev() {
        w = d_at(f, &pre.point(k).base) * w;
        w /= w.norm();
    }
    w
}

/// `E^s(x)`: a seed at `F^n(x)` pulled back by the inverse derivative cocycle.
pub fn estimate_stable_direction(
    f: &ToralExtension,
    x: &TorusFiberedPoint,
    n: usize,
) -> Result<DirectionEstimate, BundleError> {
    if n == 0 {
        return Err(BundleError::TooFewInputs { needed: 1, got: 0 });
    }
    let orbit = exact_base_orbit(f, &x.base, n);
    let e = f.base_map().eigen();
    // E^cu at F^n(x), to reject seeds lying in it
    let (mut q1, mut q2) = (Vector3::z(), lift(e.v_u, 0.0));
    for p in &orbit[..n] {
        let d = d_at(f, p);
        (q1, q2) = orthonormalize(d * q1, d * q2);
    }
    let mut candidates = vec![lift(e.v_s, 0.0)];
    candidates.extend(generic_seeds());
    let seed = choose_seed(&candidates, &q1.cross(&q2))?;
    let full = pull_back(f, &orbit, n, seed);
    let shorter = pull_back(f, &orbit, n - 1, seed);
    Ok(DirectionEstimate {
        direction: Direction3(full),
        residual: line_angle(&full, &shorter),
    })
}

/// `E^u` at the anchor of `pre`: a seed at `x_{-n}` pushed forward.
pub fn estimate_unstable_direction(
    f: &ToralExtension,
    pre: &Preorbit<TorusPoint2>,
    n: usize,
) -> Result<DirectionEstimate, BundleError> {
    if n == 0 {
        return Err(BundleError::TooFewInputs { needed: 1, got: 0 });
    }
    if n > pre.depth() {
        return Err(BundleError::DepthExceeded {
            requested: n,
            depth: pre.depth(),
        });
    }
    let e = f.base_map().eigen();
    // E^cs at x_{-n}
    let (mut q1, mut q2) = (Vector3::z(), lift(e.v_s, 0.0));
    for k in 1..=n {
        let d = d_inv_at(f, &pre.point(k).base);
        (q1, q2) = orthonormalize(d * q1, d * q2);
    }
    let mut candidates = vec![lift(e.v_u, 0.0)];
    candidates.extend(generic_seeds());
    let seed = choose_seed(&candidates, &q1.cross(&q2))?;
    let full = push_forward(f, pre, n, seed);
    let shorter = push_forward(f, pre, n - 1, seed);
    Ok(DirectionEstimate {
        direction: Direction3(full),
        residual: line_angle(&full, &shorter),
    })
}

fn center_at(f: &ToralExtension, pre: &Preorbit<TorusPoint2>, n: usize) -> Vector3<f64> {
    let e = f.base_map().eigen();
    let orbit = exact_base_orbit(f, &pre.anchor().base, n);
    let (mut s1, mut s2) = (Vector3::z(), lift(e.v_s, 0.0));
    for k in (0..n).rev() {
        let d = d_inv_at(f, &orbit[k]);
        (s1, s2) = orthonormalize(d * s1, d * s2);
    }
    let (mut u1, mut u2) = (Vector3::z(), lift(e.v_u, 0.0));
    for k in (1..=n).rev() {
        let d = d_at(f, &pre.point(k).base);
        (u1, u2) = orthonormalize(d * u1, d * u2);
    }
    let c = s1.cross(&s2).cross(&u1.cross(&u2));
    c / c.norm()
}

/// `E^c = E^cs ∩ E^cu` at the anchor of `pre`; the residual is the
/// invariance defect against the estimate at `F(x)`.
pub fn estimate_center_direction(
    f: &ToralExtension,
    x: &TorusFiberedPoint,
    pre: &Preorbit<TorusPoint2>,
    n: usize,
) -> Result<DirectionEstimate, BundleError> {
    if n == 0 {
        return Err(BundleError::TooFewInputs { needed: 1, got: 0 });
    }
    if n > pre.depth() {
        return Err(BundleError::DepthExceeded {
            requested: n,
            depth: pre.depth(),
        });
    }
    if pre.anchor().base != x.base {
        return Err(BundleError::MismatchedAnchors);
    }
    let here = center_at(f, pre, n);
    let there = center_at(f, &pre.image(f), n);
    Ok(DirectionEstimate {
        direction: Direction3(here),
        residual: line_angle(&(d_at(f, &x.base) * here), &there),
    })
}

/// All three directions at `x` plus their invariance defects.
pub fn estimate_splitting(
    f: &ToralExtension,
    pre: &Preorbit<TorusPoint2>,
    n: usize,
) -> Result<SplittingEstimate, BundleError> {
    let x = *pre.anchor();
    let image = pre.image(f);
    let fx = *image.anchor();
    let d = d_at(f, &x.base);
    let defect = |a: &Direction3, b: &Direction3| line_angle(&(d * a.0), &b.0);

    let s0 = estimate_stable_direction(f, &x, n)?.direction;
    let s1 = estimate_stable_direction(f, &fx, n)?.direction;
    let c0 = estimate_center_direction(f, &x, pre, n)?.direction;
    let c1 = estimate_center_direction(f, &fx, &image, n)?.direction;
    let u0 = estimate_unstable_direction(f, pre, n)?.direction;
    let u1 = estimate_unstable_direction(f, &image, n)?.direction;
    Ok(SplittingEstimate {
        at: x,
        e_s: s0,
        e_c: c0,
        e_u: u0,
        residuals: [defect(&s0, &s1), defect(&c0, &c1), defect(&u0, &u1)],
    })
}

/// Modified Gram-Schmidt on the columns of a column-major `d x d` matrix,
/// storing the diagonal of `R` in `r`.
fn orthonormalize_columns(q: &mut [f64], d: usize, r: &mut [f64]) {
    for j in 0..d {
        for k in 0..j {
            let (head, tail) = q.split_at_mut(j * d);
            let qk = &head[k * d..(k + 1) * d];
            let v = &mut tail[..d];
            let p: f64 = qk.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            for (vi, ki) in v.iter_mut().zip(qk) {
                *vi -= p * ki;
            }
        }
        let v = &mut q[j * d..(j + 1) * d];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        r[j] = n;
        for vi in v.iter_mut() {
            *vi /= n;
        }
    }
}

/// `out = J q` for row-major `J` and column-major `q`, `out` column-major.
fn multiply(jac: &[f64], q: &[f64], d: usize, out: &mut [f64]) {
    for c in 0..d {
        for i in 0..d {
            out[c * d + i] = (0..d).map(|k| jac[i * d + k] * q[c * d + k]).sum();
        }
    }
}

/// Lyapunov exponents by the QR method. An exactly invariant axis, if the
/// cocycle has one, is placed first in the frame so its exponent carries no
/// transient.
pub fn lyapunov_spectrum<C: TangentCocycle>(
    c: &C,
    start: &C::State,
    n: usize,
    seed: u64,
) -> LyapunovSpectrum {
    let d = c.dim();
    let mut rng = stream_rng(seed, 0);
    let mut q = vec![0.0; d * d];
    let mut first_random = 0;
    if let Some(axis) = c.invariant_axis() {
        q[axis] = 1.0;
        first_random = 1;
    }
    for v in &mut q[first_random * d..] {
        *v = rng.gen::<f64>() - 0.5;
    }
    let mut r = vec![0.0; d];
    orthonormalize_columns(&mut q, d, &mut r);

    let mut jac = vec![0.0; d * d];
    let mut state = *start;
    let mut advance = |state: &C::State, q: &mut Vec<f64>, r: &mut Vec<f64>| {
        let mut m = vec![0.0; d * d];
        c.jacobian(state, &mut jac);
        multiply(&jac, q, d, &mut m);
        orthonormalize_columns(&mut m, d, r);
        *q = m;
    };
    for _ in 0..QR_WARMUP {
        advance(&state, &mut q, &mut r);
        state = c.step(&state);
    }
    let batch_len = (n / BATCHES).max(1);
    let batches = (n / batch_len).min(BATCHES);
    let mut total = vec![0.0; d];
    let mut batch_sums = vec![vec![0.0; batches]; d];
    for t in 0..n {
        advance(&state, &mut q, &mut r);
        let b = t / batch_len;
        for i in 0..d {
            let l = r[i].ln();
            total[i] += l;
            if b < batches {
                batch_sums[i][b] += l;
            }
        }
        state = c.step(&state);
    }
    let mut pairs: Vec<(f64, f64)> = (0..d)
        .map(|i| {
            let means: Vec<f64> = batch_sums[i].iter().map(|s| s / batch_len as f64).collect();
            (total[i] / n as f64, batch_means(&means, batches).std_error)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    LyapunovSpectrum {
        exponents: pairs.iter().map(|p| p.0).collect(),
        std_errors: pairs.iter().map(|p| p.1).collect(),
        iterations: n,
    }
}

pub fn lyapunov_exponents(
    f: &ToralExtension,
    x: &TorusFiberedPoint,
    n: usize,
    seed: u64,
) -> LyapunovTriple {
    let s = lyapunov_spectrum(f, x, n, seed);
    LyapunovTriple {
        lambda_s: s.exponents[0],
        lambda_c: s.exponents[1],
        lambda_u: s.exponents[2],
        std_errors: [s.std_errors[0], s.std_errors[1], s.std_errors[2]],
        iterations: n,
    }
}

/// Exponents from `starts` uniformly sampled points, in index order.
pub fn lyapunov_ensemble(
    f: &ToralExtension,
    starts: usize,
    n: usize,
    seed: u64,
) -> Vec<(TorusFiberedPoint, LyapunovTriple)> {
    (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let x = FiberedPoint::uniform(&mut rng);
            (x, lyapunov_exponents(f, &x, n, rng.gen()))
        })
        .collect()
}

/// Largest pairwise angle between unstable directions over preorbits
/// sharing one anchor.
pub fn unstable_direction_spread(
    f: &ToralExtension,
    preorbits: &[Preorbit<TorusPoint2>],
    n: usize,
) -> Result<f64, BundleError> {
    if preorbits.len() < 2 {
        return Err(BundleError::TooFewInputs {
            needed: 2,
            got: preorbits.len(),
        });
    }
    let anchor = preorbits[0].anchor();
    if preorbits.iter().any(|p| p.anchor() != anchor) {
        return Err(BundleError::MismatchedAnchors);
    }
    let dirs = preorbits
        .iter()
        .map(|p| estimate_unstable_direction(f, p, n).map(|e| e.direction))
        .collect::<Result<Vec<_>, _>>()?;
    let mut spread: f64 = 0.0;
    for i in 0..dirs.len() {
        for j in 0..i {
            spread = spread.max(dirs[i].angle(&dirs[j]));
        }
    }
    Ok(spread)
}

fn solve_base<B: BaseMap>(f: &RotationExtension<B>, w: &[f64]) -> [f64; 2] {
    let a = f.base_map().derivative();
    match B::Point::DIM {
        1 => [w[0] / a[0], 0.0],
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            [
                (a[3] * w[0] - a[1] * w[1]) / det,
                (a[0] * w[1] - a[2] * w[0]) / det,
            ]
        }
        d => unreachable!("base dimension {d} is not supported"),
    }
}

/// `dF(p)^{-1} w` for `w` in `R^{D+1}` (padded to length 3).
fn inverse_derivative_apply<B: BaseMap>(
    f: &RotationExtension<B>,
    p: &B::Point,
    w: &[f64; 3],
) -> [f64; 3] {
    let d = B::Point::DIM;
    let y = solve_base(f, &w[..d]);
    let g = f.phi_grad(p);
    let mut out = [0.0; 3];
    out[..d].copy_from_slice(&y[..d]);
    out[d] = w[d]
        - g.as_ref()
            .iter()
            .zip(&y[..d])
            .map(|(a, b)| a * b)
            .sum::<f64>();
    out
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalized(a: [f64; 3]) -> [f64; 3] {
    let n = dot3(&a, &a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Per-orbit value of `(1/N) sum (log J^cs - log J^s)` along a dithered orbit,
/// from one backward sweep carrying an `E^cs` frame and an `E^s` vector.
fn center_exponent_along<B: BaseMap>(
    f: &RotationExtension<B>,
    x: &FiberedPoint<B::Point>,
    n: usize,
) -> f64 {
    let d = B::Point::DIM;
    let orbit = f.orbit(x, n + SWEEP_TAIL);
    let map = f.base_map();
    let stable = map
        .eigenvalues()
        .as_ref()
        .iter()
        .position(|l| l.abs() < 1.0);
    let mut fiber = [0.0; 3];
    fiber[d] = 1.0;
    let mut e_s = stable.map(|i| {
        let mut c = <B::Point as BasePoint>::Vector::default();
        c.as_mut()[i] = 1.0;
        let v = map.combine_eigen(&c);
        let mut out = [0.0; 3];
        out[..d].copy_from_slice(v.as_ref());
        normalized(out)
    });
    let mut frame_second = e_s;
    let (mut log_cs, mut log_s) = (0.0, 0.0);
    for k in (0..n + SWEEP_TAIL).rev() {
        let p = &orbit[k].base;
        let w1 = inverse_derivative_apply(f, p, &fiber);
        let vol = match frame_second {
            Some(q2) => {
                let w2 = inverse_derivative_apply(f, p, &q2);
                let (a, b, c) = (dot3(&w1, &w1), dot3(&w2, &w2), dot3(&w1, &w2));
                let area = (a * b - c * c).max(0.0).sqrt();
                // re-orthonormalize against the (invariant) fiber axis
                let q1 = normalized(w1);
                let p12 = dot3(&q1, &w2);
                frame_second = Some(normalized([
                    w2[0] - p12 * q1[0],
                    w2[1] - p12 * q1[1],
                    w2[2] - p12 * q1[2],
                ]));
                area
            }
            None => dot3(&w1, &w1).sqrt(),
        };
        let s_norm = e_s.map(|v| {
            let w = inverse_derivative_apply(f, p, &v);
            let nrm = dot3(&w, &w).sqrt();
            e_s = Some([w[0] / nrm, w[1] / nrm, w[2] / nrm]);
            nrm
        });
        if k < n {
            log_cs -= vol.ln();
            if let Some(sn) = s_norm {
                log_s -= sn.ln();
            }
        }
    }
    (log_cs - log_s) / n as f64
}

/// Monte-Carlo value of `∫ log J^cs dm - ∫ log J^s dm`, the mean center
/// exponent.
pub fn mean_center_exponent<B: BaseMap>(
    f: &RotationExtension<B>,
    sample_size: usize,
    orbit_length: usize,
    seed: u64,
) -> MeanEstimate {
    let values: Vec<f64> = (0..sample_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let x = FiberedPoint::uniform(&mut rng);
            center_exponent_along(f, &x, orbit_length.max(1))
        })
        .collect();
    batch_means(&values, BATCHES)
}

/// Largest `|jacobian_sum_check - 1|` over `samples` random points.
pub fn max_jacobian_deviation<B: BaseMap>(
    f: &RotationExtension<B>,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = stream_rng(seed, u64::MAX);
    (0..samples)
        .map(|_| (f.jacobian_sum_check(&FiberedPoint::uniform(&mut rng)) - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Average over sampled orbits of the sum of positive Lyapunov exponents.
pub fn pesin_entropy_estimate<B: BaseMap>(
    f: &RotationExtension<B>,
    sample_size: usize,
    orbit_length: usize,
    seed: u64,
) -> Result<MeanEstimate, BundleError> {
    let deviation = max_jacobian_deviation(f, 64, seed);
    if deviation >= 1e-9 {
        return Err(BundleError::NotVolumePreserving { deviation });
    }
    let values: Vec<f64> = (0..sample_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let x = FiberedPoint::uniform(&mut rng);
            let s = lyapunov_spectrum(f, &x, orbit_length, rng.gen());
            s.exponents.iter().filter(|l| **l > 0.0).sum()
        })
        .collect();
    Ok(batch_means(&values, BATCHES))
}

/// Per-sample log growth along `E^s`, `E^c` and `E^u` for `m = 1..=horizon`.
type GrowthLogs = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Fits the constants of the partial hyperbolicity definition over
/// `samples` random points and horizons `1..=horizon`.
pub fn rate_estimates(
    f: &ToralExtension,
    samples: usize,
    horizon: usize,
    depth: usize,
    seed: u64,
) -> Result<RateEstimates, BundleError> {
    if samples == 0 || horizon == 0 {
        return Err(BundleError::TooFewInputs { needed: 1, got: 0 });
    }
    let rows = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<GrowthLogs, BundleError> {
            let mut rng = stream_rng(seed, i as u64);
            let x = FiberedPoint::uniform(&mut rng);
            let pre = sample_preorbit(
                f,
                &x,
                depth,
                &PreorbitPolicy::UniformRandom { seed: rng.gen() },
            )?;
            let orbit = exact_base_orbit(f, &x.base, horizon);
            // |dF^m e_s(x)| = 1 / |dF^{-m} e_s(F^m x)|
            let mut log_s = Vec::with_capacity(horizon);
            for m in 1..=horizon {
                let fm = FiberedPoint::from_raw(orbit[m], 0);
                let es = estimate_stable_direction(f, &fm, depth)?.direction.0;
                let mut w = es;
                for k in (0..m).rev() {
                    w = d_inv_at(f, &orbit[k]) * w;
                }
                log_s.push(-w.norm().ln());
            }
            let mut w = estimate_unstable_direction(f, &pre, depth)?.direction.0;
            let mut log_u = Vec::with_capacity(horizon);
            let mut acc = 0.0;
            let mut c = Vector3::z();
            let mut log_c = Vec::with_capacity(horizon);
            for p in &orbit[..horizon] {
                let d = d_at(f, p);
                w = d * w;
                acc += w.norm().ln();
                w /= w.norm();
                log_u.push(acc);
                c = d * c;
                log_c.push(c.norm().ln());
            }
            Ok((log_s, log_c, log_u))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let h = horizon as f64;
    let nu = rows
        .iter()
        .map(|r| (r.0[horizon - 1] / h).exp())
        .fold(0.0, f64::max);
    let mu = rows
        .iter()
        .map(|r| (r.2[horizon - 1] / h).exp())
        .fold(f64::INFINITY, f64::min);
    let gamma1 = rows
        .iter()
        .flat_map(|r| {
            r.1.iter()
                .enumerate()
                .map(|(m, l)| (l / (m + 1) as f64).exp())
        })
        .fold(f64::INFINITY, f64::min);
    let gamma2 = rows
        .iter()
        .flat_map(|r| {
            r.1.iter()
                .enumerate()
                .map(|(m, l)| (l / (m + 1) as f64).exp())
        })
        .fold(0.0, f64::max);
    let mut c: f64 = 1.0;
    for r in &rows {
        for m in 0..horizon {
            let k = (m + 1) as f64;
            c = c.max((r.0[m] - k * nu.ln()).exp());
            c = c.max((k * mu.ln() - r.2[m]).exp());
        }
    }
    Ok(RateEstimates {
        nu,
        gamma1,
        gamma2,
        mu,
        c,
    })
}

pub fn write_splitting_csv<W: Write>(w: &mut W, rows: &[SplittingEstimate]) -> io::Result<()> {
    writeln!(
        w,
        "x,y,theta,es_x,es_y,es_theta,ec_x,ec_y,ec_theta,eu_x,eu_y,eu_theta,defect_s,defect_c,defect_u"
    )?;
    for r in rows {
        write!(
            w,
            "{:.17e},{:.17e},{:.17e}",
            r.at.base.x(),
            r.at.base.y(),
            r.at.theta()
        )?;
        for d in [&r.e_s, &r.e_c, &r.e_u] {
            let v = d.vector();
            write!(w, ",{:.17e},{:.17e},{:.17e}", v[0], v[1], v[2])?;
        }
        writeln!(
            w,
            ",{:.6e},{:.6e},{:.6e}",
            r.residuals[0], r.residuals[1], r.residuals[2]
        )?;
    }
    Ok(())
}

pub fn write_lyapunov_csv<W: Write>(
    w: &mut W,
    rows: &[(TorusFiberedPoint, LyapunovTriple)],
) -> io::Result<()> {
    writeln!(
        w,
        "x,y,theta,iterations,lambda_s,lambda_c,lambda_u,se_s,se_c,se_u,sum"
    )?;
    for (p, t) in rows {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.6e},{:.6e},{:.6e},{:.17e}",
            p.base.x(),
            p.base.y(),
            p.theta(),
            t.iterations,
            t.lambda_s,
            t.lambda_c,
            t.lambda_u,
            t.std_errors[0],
            t.std_errors[1],
            t.std_errors[2],
            t.sum()
        )?;
    }
    Ok(())
}
