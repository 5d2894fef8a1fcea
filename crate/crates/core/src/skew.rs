//! Rotation extensions `F(x, theta) = (f(x), theta + phi(x))`.

use nalgebra::Matrix3;
use rand::Rng;

use crate::base::{BaseMap, BumpFunction, ExpandingCircleMap, LinearToralEndomorphism};
use crate::error::MapError;
use crate::point::{
    fixed_from_f64, fixed_to_f64, wrapped_difference, BasePoint, CirclePoint, TorusPoint2,
};

/// A point `(x, theta)` of `M x S^1`. The angle is measured in turns and
/// stored in the same fixed point as base coordinates, so rotations by
/// dyadic angles are exact.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FiberedPoint<P> {
    pub base: P,
    theta: u64,
}

impl<P: BasePoint> FiberedPoint<P> {
    pub fn new(base: P, theta: f64) -> Self {
        FiberedPoint {
            base,
            theta: fixed_from_f64(theta),
        }
    }

    pub fn from_raw(base: P, theta: u64) -> Self {
        FiberedPoint { base, theta }
    }

    pub fn theta(&self) -> f64 {
        fixed_to_f64(self.theta)
    }

    pub fn theta_raw(&self) -> u64 {
        self.theta
    }

    /// The same base point with the angle advanced by `alpha` turns.
    pub fn rotated(&self, alpha: f64) -> Self {
        FiberedPoint {
            base: self.base,
            theta: self.theta.wrapping_add(fixed_from_f64(alpha)),
        }
    }

    /// Signed angle difference `self - other` in `[-0.5, 0.5)`.
    pub fn theta_offset_from(&self, other: &Self) -> f64 {
        wrapped_difference(self.theta, other.theta)
    }

    /// Sup of the base distance and the circle distance of the angles.
    pub fn distance(&self, other: &Self) -> f64 {
        self.base
            .distance(&other.base)
            .max(self.theta_offset_from(other).abs())
    }

    pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let base = P::uniform(rng);
        FiberedPoint::from_raw(base, rng.gen())
    }
}

impl<P: std::fmt::Debug> std::fmt::Debug for FiberedPoint<P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:?}, {})", self.base, fixed_to_f64(self.theta))
    }
}

impl FiberedPoint<TorusPoint2> {
    pub fn origin() -> Self {
        FiberedPoint {
            base: TorusPoint2::ORIGIN,
            theta: 0,
        }
    }
}

pub type TorusFiberedPoint = FiberedPoint<TorusPoint2>;
pub type CircleFiberedPoint = FiberedPoint<CirclePoint>;

/// The vertical rotation `G_alpha(x, theta) = (x, theta + alpha)`.
pub fn vertical_rotate<P: BasePoint>(alpha: f64, p: &FiberedPoint<P>) -> FiberedPoint<P> {
    p.rotated(alpha)
}

#[derive(Clone, Debug)]
pub struct RotationExtension<B: BaseMap> {
    base: B,
    bump: Option<BumpFunction<B::Point>>,
}

pub type ToralExtension = RotationExtension<LinearToralEndomorphism>;
pub type CircleExtension = RotationExtension<ExpandingCircleMap>;

impl<B: BaseMap> RotationExtension<B> {
    pub fn new(base: B, bump: Option<BumpFunction<B::Point>>) -> Self {
        RotationExtension { base, bump }
    }

    /// `f x id`.
    pub fn product(base: B) -> Self {
        RotationExtension { base, bump: None }
    }

    /// Bump of radius 0.3 and amplitude 2 at the origin, pointing along the
    /// unstable direction of the base.
    pub fn with_default_bump(base: B) -> Result<Self, MapError> {
        let bump = BumpFunction::new(
            B::Point::from_coords(Default::default()),
            DEFAULT_BUMP_RADIUS,
            DEFAULT_BUMP_AMPLITUDE,
            base.unstable_direction(),
        )?;
        Ok(RotationExtension::new(base, Some(bump)))
    }

    pub fn base_map(&self) -> &B {
        &self.base
    }

    pub fn bump(&self) -> Option<&BumpFunction<B::Point>> {
        self.bump.as_ref()
    }

    pub fn is_product(&self) -> bool {
        self.bump.is_none()
    }

    pub fn degree(&self) -> usize {
        self.base.degree()
    }

    /// Dimension of `M x S^1`.
    pub fn dim(&self) -> usize {
        B::Point::DIM + 1
    }

    pub fn phi(&self, p: &B::Point) -> f64 {
        self.bump.as_ref().map_or(0.0, |b| b.eval(p))
    }

    pub fn phi_displaced(&self, p: &B::Point, delta: &<B::Point as BasePoint>::Vector) -> f64 {
        self.bump
            .as_ref()
            .map_or(0.0, |b| b.eval_displaced(p, delta))
    }

    pub fn phi_grad(&self, p: &B::Point) -> <B::Point as BasePoint>::Vector {
        self.bump
            .as_ref()
            .map_or_else(Default::default, |b| b.grad(p))
    }

    /// Lipschitz constant of `phi`.
    pub fn phi_lipschitz(&self) -> f64 {
        self.bump.as_ref().map_or(0.0, |b| b.gradient_bound())
    }

    pub fn apply(&self, p: &FiberedPoint<B::Point>) -> FiberedPoint<B::Point> {
        FiberedPoint::from_raw(self.base.apply(&p.base), p.theta).rotated(self.phi(&p.base))
    }

    /// Same as [`apply`](Self::apply) with the base step dithered; used for
    /// long orbits.
    pub fn apply_dithered(&self, p: &FiberedPoint<B::Point>) -> FiberedPoint<B::Point> {
        FiberedPoint::from_raw(self.base.apply_dithered(&p.base), p.theta)
            .rotated(self.phi(&p.base))
    }

    /// `(q, theta - phi(q))` for every base preimage `q`, in canonical order.
    pub fn preimages(&self, p: &FiberedPoint<B::Point>) -> Vec<FiberedPoint<B::Point>> {
        self.base
            .preimages(&p.base)
            .into_iter()
            .map(|q| FiberedPoint::from_raw(q, p.theta).rotated(-self.phi(&q)))
            .collect()
    }

    /// Row-major `(D+1) x (D+1)` derivative `[[Df, 0], [grad phi, 1]]`.
    pub fn derivative_into(&self, p: &B::Point, out: &mut [f64]) {
        let d = B::Point::DIM;
        let n = d + 1;
        let df = self.base.derivative();
        for i in 0..d {
            out[i * n..i * n + d].copy_from_slice(&df[i * d..(i + 1) * d]);
            out[i * n + d] = 0.0;
        }
        let g = self.phi_grad(p);
        out[d * n..d * n + d].copy_from_slice(g.as_ref());
        out[d * n + d] = 1.0;
    }

    pub fn derivative_determinant(&self, p: &B::Point) -> f64 {
        let n = self.dim();
        let mut m = vec![0.0; n * n];
        self.derivative_into(p, &mut m);
        determinant(n, &mut m)
    }

    /// `sum over preimages q of 1 / |det dF(q)|`; equals 1 exactly when `F`
    /// preserves volume.
    pub fn jacobian_sum_check(&self, p: &FiberedPoint<B::Point>) -> f64 {
        self.base
            .preimages(&p.base)
            .iter()
            .map(|q| 1.0 / self.derivative_determinant(q).abs())
            .sum()
    }

    /// Dithered orbit `x_0, ..., x_len`.
    pub fn orbit(&self, start: &FiberedPoint<B::Point>, len: usize) -> Vec<FiberedPoint<B::Point>> {
        let mut out = Vec::with_capacity(len + 1);
        let mut p = *start;
        out.push(p);
        for _ in 0..len {
            p = self.apply_dithered(&p);
            out.push(p);
        }
        out
    }
}

const DEFAULT_BUMP_RADIUS: f64 = 0.3;
const DEFAULT_BUMP_AMPLITUDE: f64 = 2.0;

impl ToralExtension {
    /// `A = (3,1;1,1)` with the default bump.
    pub fn standard_example() -> Self {
        Self::with_default_bump(LinearToralEndomorphism::standard_example())
            .expect("default bump is valid")
    }

    pub fn derivative(&self, p: &TorusPoint2) -> DerivativeMatrix3 {
        let mut m = [0.0; 9];
        self.derivative_into(p, &mut m);
        DerivativeMatrix3(Matrix3::from_row_slice(&m))
    }
}

/// The 3x3 derivative of a rotation extension over `T^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeMatrix3(pub Matrix3<f64>);

impl DerivativeMatrix3 {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Inverse via the block structure `[[A, 0], [g, 1]]^{-1} = [[A^{-1}, 0], [-g A^{-1}, 1]]`.
    pub fn inverse(&self) -> Matrix3<f64> {
        let m = &self.0;
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let ai = [
            [m[(1, 1)] / det, -m[(0, 1)] / det],
            [-m[(1, 0)] / det, m[(0, 0)] / det],
        ];
        let g = [m[(2, 0)], m[(2, 1)]];
        Matrix3::new(
            ai[0][0],
            ai[0][1],
            0.0,
            ai[1][0],
            ai[1][1],
            0.0,
            -(g[0] * ai[0][0] + g[1] * ai[1][0]),
            -(g[0] * ai[0][1] + g[1] * ai[1][1]),
            1.0,
        )
    }
}

/// Determinant of a small row-major matrix: cofactor expansion up to 3x3,
/// partial-pivot elimination beyond. The matrix may be overwritten.
pub fn determinant(n: usize, m: &mut [f64]) -> f64 {
    match n {
        0 => return 1.0,
        1 => return m[0],
        2 => return m[0] * m[3] - m[1] * m[2],
        3 => {
            return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => {}
    }
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&a, &b| m[a * n + c].abs().total_cmp(&m[b * n + c].abs()))
            .unwrap();
        if m[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..n {
                m.swap(piv * n + k, c * n + k);
            }
            det = -det;
        }
        let p = m[c * n + c];
        det *= p;
        for r in c + 1..n {
            let f = m[r * n + c] / p;
            if f != 0.0 {
                for k in c..n {
                    m[r * n + k] -= f * m[c * n + k];
                }
            }
        }
    }
    det
}

/// A linear cocycle over a dynamical system, as consumed by the QR
/// Lyapunov routine.
pub trait TangentCocycle: Sync {
    type State: Copy + Send + Sync;

    fn dim(&self) -> usize;
    fn step(&self, s: &Self::State) -> Self::State;
    /// Row-major `dim x dim` matrix at `s`.
    fn jacobian(&self, s: &Self::State, out: &mut [f64]);
    /// A coordinate axis mapped to itself with unit stretch at every point.
    fn invariant_axis(&self) -> Option<usize> {
        None
    }
}

impl<B: BaseMap> TangentCocycle for RotationExtension<B> {
    type State = FiberedPoint<B::Point>;

    fn dim(&self) -> usize {
        B::Point::DIM + 1
    }

    fn step(&self, s: &Self::State) -> Self::State {
        self.apply_dithered(s)
    }

    fn jacobian(&self, s: &Self::State, out: &mut [f64]) {
        self.derivative_into(&s.base, out)
    }

    fn invariant_axis(&self) -> Option<usize> {
        Some(B::Point::DIM)
    }
}
