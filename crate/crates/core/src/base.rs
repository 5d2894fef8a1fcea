//! Base endomorphisms and the localized bump cocycle.

use std::fmt::Debug;

use crate::error::MapError;
use crate::point::{dot, euclidean_norm, BasePoint, CirclePoint, TorusPoint2};

const TWO_64: i128 = 1 << 64;

/// A linear expanding or hyperbolic endomorphism of a flat torus.
///
/// The derivative is constant, which is what makes leaf charts along
/// eigenlines exact.
pub trait BaseMap: Clone + Debug + Send + Sync {
    type Point: BasePoint;

    fn apply(&self, p: &Self::Point) -> Self::Point;

    /// `apply` followed by a refresh of the lowest fixed-point bits, seeded by
    /// the input. Exact binary orbits of a non-invertible integer map collapse
    /// onto rational points; long orbits use this variant instead.
    fn apply_dithered(&self, p: &Self::Point) -> Self::Point {
        self.apply(p).dithered(p.fingerprint())
    }

    /// All preimages, sorted lexicographically on base coordinates.
    fn preimages(&self, p: &Self::Point) -> Vec<Self::Point>;

    fn degree(&self) -> usize;

    /// Signed determinant of the (constant) derivative.
    fn determinant(&self) -> f64;

    /// Row-major derivative matrix, `DIM x DIM`.
    fn derivative(&self) -> &[f64];

    /// Eigenvalues ordered by modulus (stable first, for toral maps).
    fn eigenvalues(&self) -> <Self::Point as BasePoint>::Vector;

    /// Coordinates of `v` in the eigenbasis.
    fn to_eigen(
        &self,
        v: &<Self::Point as BasePoint>::Vector,
    ) -> <Self::Point as BasePoint>::Vector;

    fn combine_eigen(
        &self,
        c: &<Self::Point as BasePoint>::Vector,
    ) -> <Self::Point as BasePoint>::Vector;

    /// Lower bound on the sup distance between two preimages of one point.
    fn branch_separation(&self) -> f64;

    /// Unit direction used for the bump when none is configured.
    fn unstable_direction(&self) -> <Self::Point as BasePoint>::Vector;

    /// True when every direction is expanded (no stable bundle).
    fn is_expanding(&self) -> bool;
}

/// Eigenvalues and unit eigenvectors of a hyperbolic 2x2 integer matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenData {
    pub a_s: f64,
    pub a_u: f64,
    pub v_s: [f64; 2],
    pub v_u: [f64; 2],
}

impl EigenData {
    pub fn residuals(&self, m: &[[i64; 2]; 2]) -> [f64; 2] {
        let res = |a: f64, v: [f64; 2]| {
            let av = [
                m[0][0] as f64 * v[0] + m[0][1] as f64 * v[1],
                m[1][0] as f64 * v[0] + m[1][1] as f64 * v[1],
            ];
            euclidean_norm(&[av[0] - a * v[0], av[1] - a * v[1]])
        };
        [res(self.a_s, self.v_s), res(self.a_u, self.v_u)]
    }
}

fn eigenvector(m: &[[i64; 2]; 2], lambda: f64) -> [f64; 2] {
    let (a, b, c, d) = (
        m[0][0] as f64,
        m[0][1] as f64,
        m[1][0] as f64,
        m[1][1] as f64,
    );
    // pick the better-conditioned row of (A - lambda I)
    let r1 = [b, lambda - a];
    let r2 = [lambda - d, c];
    let mut v = if euclidean_norm(&r1) >= euclidean_norm(&r2) {
        r1
    } else {
        r2
    };
    let n = euclidean_norm(&v);
    v[0] /= n;
    v[1] /= n;
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    v
}

pub fn eigen_data(m: &[[i64; 2]; 2]) -> Result<EigenData, MapError> {
    let tr = (m[0][0] + m[1][1]) as f64;
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) as f64;
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        return Err(MapError::NotHyperbolic("complex eigenvalues".into()));
    }
    let root = disc.sqrt();
    let big = if tr >= 0.0 {
        (tr + root) / 2.0
    } else {
        (tr - root) / 2.0
    };
    if big == 0.0 {
        return Err(MapError::NotHyperbolic("zero matrix spectrum".into()));
    }
    let small = det / big;
    let (a_s, a_u) = if small.abs() <= big.abs() {
        (small, big)
    } else {
        (big, small)
    };
    for a in [a_s, a_u] {
        if (a.abs() - 1.0).abs() <= 1e-9 {
            return Err(MapError::NotHyperbolic(format!(
                "eigenvalue {a} has modulus 1"
            )));
        }
    }
    if a_s.abs() > 1.0 || a_u.abs() < 1.0 {
        return Err(MapError::NotHyperbolic(format!(
            "eigenvalues {a_s} and {a_u} do not straddle the unit circle"
        )));
    }
    Ok(EigenData {
        a_s,
        a_u,
        v_s: eigenvector(m, a_s),
        v_u: eigenvector(m, a_u),
    })
}

/// `x -> M x mod Z^2` for an integer matrix with real eigenvalues `|a_s| < 1 < |a_u|`.
#[derive(Clone, Debug)]
pub struct LinearToralEndomorphism {
    entries: [[i64; 2]; 2],
    det: i64,
    eigen: EigenData,
    derivative: [f64; 4],
    // inverse of the eigenvector matrix [v_s v_u]
    eigen_inverse: [[f64; 2]; 2],
    coset_reps: Vec<[i64; 2]>,
    separation: f64,
}

impl LinearToralEndomorphism {
    pub fn new(entries: [[i64; 2]; 2]) -> Result<Self, MapError> {
        let det = entries[0][0] * entries[1][1] - entries[0][1] * entries[1][0];
        if det == 0 {
            return Err(MapError::NotHyperbolic("singular matrix".into()));
        }
        let eigen = eigen_data(&entries)?;
        let (vs, vu) = (eigen.v_s, eigen.v_u);
        let e_det = vs[0] * vu[1] - vu[0] * vs[1];
        let eigen_inverse = [
            [vu[1] / e_det, -vu[0] / e_det],
            [-vs[1] / e_det, vs[0] / e_det],
        ];

        // one integer vector per class of Z^2 / M Z^2
        let d = det.abs();
        let adj = adjugate(&entries);
        let mut seen: Vec<[i64; 2]> = Vec::new();
        let mut coset_reps = Vec::new();
        'outer: for i in 0..d {
            for j in 0..d {
                let r = [
                    ((adj[0][0] * i + adj[0][1] * j) * det.signum()).rem_euclid(d),
                    ((adj[1][0] * i + adj[1][1] * j) * det.signum()).rem_euclid(d),
                ];
                if !seen.contains(&r) {
                    seen.push(r);
                    coset_reps.push([i, j]);
                    if coset_reps.len() == d as usize {
                        break 'outer;
                    }
                }
            }
        }
        assert_eq!(
            coset_reps.len(),
            d as usize,
            "lattice index must equal |det|"
        );

        let mut separation: f64 = 0.5;
        for a in 0..seen.len() {
            for b in 0..a {
                let diff = [
                    circle_gap((seen[a][0] - seen[b][0]) as f64 / d as f64),
                    circle_gap((seen[a][1] - seen[b][1]) as f64 / d as f64),
                ];
                separation = separation.min(diff[0].max(diff[1]));
            }
        }

        Ok(LinearToralEndomorphism {
            entries,
            det,
            eigen,
            derivative: [
                entries[0][0] as f64,
                entries[0][1] as f64,
                entries[1][0] as f64,
                entries[1][1] as f64,
            ],
            eigen_inverse,
            coset_reps,
            separation,
        })
    }

    /// The matrix `(3,1;1,1)`.
    pub fn standard_example() -> Self {
        Self::new([[3, 1], [1, 1]]).expect("(3,1;1,1) is hyperbolic")
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.entries
    }

    pub fn eigen(&self) -> &EigenData {
        &self.eigen
    }

    pub fn det(&self) -> i64 {
        self.det
    }
}

fn adjugate(m: &[[i64; 2]; 2]) -> [[i64; 2]; 2] {
    [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]
}

fn circle_gap(v: f64) -> f64 {
    let r = v - v.floor();
    r.min(1.0 - r)
}

/// `round(n / d)` with ties away from zero, for `d > 0`.
fn div_round(n: i128, d: i128) -> i128 {
    (2 * n + d).div_euclid(2 * d)
}

fn wrap_fixed(v: i128) -> u64 {
    v.rem_euclid(TWO_64) as u64
}

impl BaseMap for LinearToralEndomorphism {
    type Point = TorusPoint2;

    fn apply(&self, p: &TorusPoint2) -> TorusPoint2 {
        let [x, y] = p.raw();
        let m = &self.entries;
        let row = |a: i64, b: i64| {
            (a as u64)
                .wrapping_mul(x)
                .wrapping_add((b as u64).wrapping_mul(y))
        };
        TorusPoint2::from_raw(row(m[0][0], m[0][1]), row(m[1][0], m[1][1]))
    }

    fn preimages(&self, p: &TorusPoint2) -> Vec<TorusPoint2> {
        let [x, y] = p.raw();
        let adj = adjugate(&self.entries);
        let (sgn, d) = (self.det.signum() as i128, self.det.abs() as i128);
        let mut out: Vec<TorusPoint2> = self
            .coset_reps
            .iter()
            .map(|k| {
                let px = x as i128 + k[0] as i128 * TWO_64;
                let py = y as i128 + k[1] as i128 * TWO_64;
                let nx = sgn * (adj[0][0] as i128 * px + adj[0][1] as i128 * py);
                let ny = sgn * (adj[1][0] as i128 * px + adj[1][1] as i128 * py);
                TorusPoint2::from_raw(wrap_fixed(div_round(nx, d)), wrap_fixed(div_round(ny, d)))
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn degree(&self) -> usize {
        self.det.unsigned_abs() as usize
    }

    fn determinant(&self) -> f64 {
        self.det as f64
    }

    fn derivative(&self) -> &[f64] {
        &self.derivative
    }

    fn eigenvalues(&self) -> [f64; 2] {
        [self.eigen.a_s, self.eigen.a_u]
    }

    fn to_eigen(&self, v: &[f64; 2]) -> [f64; 2] {
        let m = &self.eigen_inverse;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    fn combine_eigen(&self, c: &[f64; 2]) -> [f64; 2] {
        let (vs, vu) = (self.eigen.v_s, self.eigen.v_u);
        [c[0] * vs[0] + c[1] * vu[0], c[0] * vs[1] + c[1] * vu[1]]
    }

    fn branch_separation(&self) -> f64 {
        self.separation
    }

    fn unstable_direction(&self) -> [f64; 2] {
        self.eigen.v_u
    }

    fn is_expanding(&self) -> bool {
        false
    }
}

/// `x -> k x mod 1` on the circle.
#[derive(Clone, Debug)]
pub struct ExpandingCircleMap {
    multiplier: i64,
    derivative: [f64; 1],
}

impl ExpandingCircleMap {
    pub fn new(multiplier: i64) -> Result<Self, MapError> {
        if multiplier.abs() < 2 {
            return Err(MapError::NotExpanding(multiplier));
        }
        Ok(ExpandingCircleMap {
            multiplier,
            derivative: [multiplier as f64],
        })
    }

    pub fn doubling() -> Self {
        Self::new(2).expect("2 is expanding")
    }

    pub fn multiplier(&self) -> i64 {
        self.multiplier
    }
}

impl BaseMap for ExpandingCircleMap {
    type Point = CirclePoint;

    fn apply(&self, p: &CirclePoint) -> CirclePoint {
        CirclePoint::from_raw((self.multiplier as u64).wrapping_mul(p.raw()))
    }

    fn preimages(&self, p: &CirclePoint) -> Vec<CirclePoint> {
        let k = self.multiplier as i128;
        let (sgn, d) = (k.signum(), k.abs());
        let mut out: Vec<CirclePoint> = (0..d)
            .map(|j| {
                let n = sgn * (p.raw() as i128 + j * TWO_64);
                CirclePoint::from_raw(wrap_fixed(div_round(n, d)))
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn degree(&self) -> usize {
        self.multiplier.unsigned_abs() as usize
    }

    fn determinant(&self) -> f64 {
        self.multiplier as f64
    }

    fn derivative(&self) -> &[f64] {
        &self.derivative
    }

    fn eigenvalues(&self) -> [f64; 1] {
        [self.multiplier as f64]
    }

    fn to_eigen(&self, v: &[f64; 1]) -> [f64; 1] {
        *v
    }

    fn combine_eigen(&self, c: &[f64; 1]) -> [f64; 1] {
        *c
    }

    fn branch_separation(&self) -> f64 {
        1.0 / self.multiplier.unsigned_abs() as f64
    }

    fn unstable_direction(&self) -> [f64; 1] {
        [1.0]
    }

    fn is_expanding(&self) -> bool {
        true
    }
}

// sup over s in [0,1) of beta(s) sqrt(s), of beta(s)(1 + 2s/(1-s)^2), and of
// 4|beta''(s)| s^{3/2} + 6|beta'(s)| s^{1/2}, rounded up
const PROFILE_VALUE_BOUND: f64 = 0.359;
const PROFILE_GRADIENT_BOUND: f64 = 1.905;
const PROFILE_HESSIAN_BOUND: f64 = 22.28;

/// The bump profile `beta(t) = exp(1 - 1/(1-t))` on `[0, 1)`, zero beyond.
pub fn profile(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t)).exp()
    }
}

/// `phi(q) = eps * beta(|d|^2 / r^2) * (d . v)` with `d` the wrapped offset of
/// `q` from the center.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpFunction<P: BasePoint> {
    center: P,
    radius: f64,
    amplitude: f64,
    direction: P::Vector,
    gradient_bound: f64,
}

impl<P: BasePoint> BumpFunction<P> {
    pub fn new(
        center: P,
        radius: f64,
        amplitude: f64,
        direction: P::Vector,
    ) -> Result<Self, MapError> {
        if !(radius > 0.0 && radius < 0.5) {
            return Err(MapError::InvalidBump(format!(
                "radius {radius} must lie in (0, 0.5)"
            )));
        }
        if !amplitude.is_finite() {
            return Err(MapError::InvalidBump("amplitude must be finite".into()));
        }
        let n = euclidean_norm(direction.as_ref());
        if !(n.is_finite() && n > 0.0) {
            return Err(MapError::InvalidBump(
                "direction must be a nonzero vector".into(),
            ));
        }
        let mut direction = direction;
        for c in direction.as_mut() {
            *c /= n;
        }
        Ok(BumpFunction {
            center,
            radius,
            amplitude,
            direction,
            gradient_bound: amplitude.abs() * PROFILE_GRADIENT_BOUND,
        })
    }

    pub fn center(&self) -> P {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn direction(&self) -> P::Vector {
        self.direction
    }

    /// Bound on `sup |phi|`.
    pub fn value_bound(&self) -> f64 {
        self.amplitude.abs() * self.radius * PROFILE_VALUE_BOUND
    }

    /// Bound on `sup |grad phi|`, i.e. a Lipschitz constant for `phi`.
    pub fn gradient_bound(&self) -> f64 {
        self.gradient_bound
    }

    /// Bound on the operator norm of the Hessian of `phi`.
    pub fn hessian_bound(&self) -> f64 {
        self.amplitude.abs() * PROFILE_HESSIAN_BOUND / self.radius
    }

    /// `max(sup |phi|, sup |grad phi|)`.
    pub fn c1_bound(&self) -> f64 {
        self.value_bound().max(self.gradient_bound)
    }

    pub fn contains(&self, p: &P) -> bool {
        let d = p.offset_from(&self.center);
        dot(d.as_ref(), d.as_ref()) < self.radius * self.radius
    }

    pub fn eval(&self, p: &P) -> f64 {
        self.eval_offset(p.offset_from(&self.center).as_ref())
    }

    /// `phi(p + delta)`, with the displacement added before wrapping so that
    /// tiny leaf displacements are not lost to fixed-point rounding.
    pub fn eval_displaced(&self, p: &P, delta: &P::Vector) -> f64 {
        let mut d = p.offset_from(&self.center);
        for (c, e) in d.as_mut().iter_mut().zip(delta.as_ref()) {
            *c = wrap_half(*c + e);
        }
        self.eval_offset(d.as_ref())
    }

    fn eval_offset(&self, d: &[f64]) -> f64 {
        let s = dot(d, d) / (self.radius * self.radius);
        if s >= 1.0 {
            return 0.0;
        }
        self.amplitude * profile(s) * dot(d, self.direction.as_ref())
    }

    pub fn grad(&self, p: &P) -> P::Vector {
        let d = p.offset_from(&self.center);
        let mut g = P::Vector::default();
        let r2 = self.radius * self.radius;
        let s = dot(d.as_ref(), d.as_ref()) / r2;
        if s >= 1.0 {
            return g;
        }
        let b = profile(s);
        let db = -b / ((1.0 - s) * (1.0 - s));
        let dv = dot(d.as_ref(), self.direction.as_ref());
        for ((gi, di), vi) in g
            .as_mut()
            .iter_mut()
            .zip(d.as_ref())
            .zip(self.direction.as_ref())
        {
            *gi = self.amplitude * (b * vi + db * 2.0 * di / r2 * dv);
        }
        g
    }
}

fn wrap_half(v: f64) -> f64 {
    v - (v + 0.5).floor()
}
