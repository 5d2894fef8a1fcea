//! Points on flat tori stored as 64-bit fixed-point fractions.
//!
//! A coordinate `u` represents the real number `u / 2^64` in `[0, 1)`. Integer
//! matrices then act exactly through wrapping arithmetic, wrapped differences
//! between nearby points are exact, and the lexicographic order used to name
//! preimage branches is a plain integer comparison.

use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;

const SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64
const INV_SCALE: f64 = 1.0 / SCALE;

/// Number of low bits refreshed by [`BasePoint::dithered`].
pub const DITHER_BITS: u32 = 8;

/// Reduces a real number mod 1 and rounds it onto the 2^-64 grid.
pub fn fixed_from_f64(v: f64) -> u64 {
    let r = v - v.floor();
    let s = (r * SCALE).round();
    if s >= SCALE || s.is_nan() {
        0
    } else {
        s as u64
    }
}

/// The real number in `[0, 1)` closest to the fixed-point fraction `u / 2^64`.
pub fn fixed_to_f64(u: u64) -> f64 {
    let v = u as f64 * INV_SCALE;
    // rounding to 53 bits can land on 1.0, which is the same point as 0
    if v >= 1.0 {
        0.0
    } else {
        v
    }
}

/// Exact signed difference `a - b`, taken in the representative `[-0.5, 0.5)`.
pub fn wrapped_difference(a: u64, b: u64) -> f64 {
    (a.wrapping_sub(b) as i64) as f64 * INV_SCALE
}

/// Reduces an angle (in turns) into `[0, 1)`.
pub fn reduce_turns(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed circle difference `a - b` in `[-0.5, 0.5)`.
pub fn circle_difference(a: f64, b: f64) -> f64 {
    let d = reduce_turns(a - b);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Distance on the unit circle `R/Z`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    circle_difference(a, b).abs()
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn refresh_low_bits(coord: u64, noise: u64) -> u64 {
    let mask = (1u64 << DITHER_BITS) - 1;
    (coord & !mask) | (noise & mask)
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A point of a flat torus `R^d / Z^d`.
pub trait BasePoint: Copy + Eq + Ord + Hash + Debug + Send + Sync + 'static {
    const DIM: usize;
    const COORD_NAMES: &'static [&'static str];
    /// Real tangent vectors (displacements on the universal cover).
    type Vector: Copy + Debug + Default + PartialEq + AsRef<[f64]> + AsMut<[f64]> + Send + Sync;

    fn from_coords(v: Self::Vector) -> Self;
    fn coords(&self) -> Self::Vector;
    /// Exact wrapped displacement `self - origin`, each component in `[-0.5, 0.5)`.
    fn offset_from(&self, origin: &Self) -> Self::Vector;
    /// `self + d` reduced onto the torus.
    fn translate(&self, d: &Self::Vector) -> Self;
    /// Hash of the raw fixed-point bits.
    fn fingerprint(&self) -> u64;
    /// Replaces the lowest [`DITHER_BITS`] of every coordinate with bits of `noise`.
    fn dithered(&self, noise: u64) -> Self;
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Flat-torus distance: the sup over coordinates of the circle distance.
    fn distance(&self, other: &Self) -> f64 {
        sup_norm(self.offset_from(other).as_ref())
    }

    /// Euclidean length of the shortest displacement between the points.
    fn euclidean_distance(&self, other: &Self) -> f64 {
        euclidean_norm(self.offset_from(other).as_ref())
    }
}

/// A point of `T^2 = R^2 / Z^2`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TorusPoint2 {
    raw: [u64; 2],
}

impl TorusPoint2 {
    pub const ORIGIN: TorusPoint2 = TorusPoint2 { raw: [0, 0] };

    pub fn new(x: f64, y: f64) -> Self {
        TorusPoint2 {
            raw: [fixed_from_f64(x), fixed_from_f64(y)],
        }
    }

    pub const fn from_raw(x: u64, y: u64) -> Self {
        TorusPoint2 { raw: [x, y] }
    }

    pub fn raw(&self) -> [u64; 2] {
        self.raw
    }

    pub fn x(&self) -> f64 {
        fixed_to_f64(self.raw[0])
    }

    pub fn y(&self) -> f64 {
        fixed_to_f64(self.raw[1])
    }
}

impl Debug for TorusPoint2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x(), self.y())
    }
}

impl BasePoint for TorusPoint2 {
    const DIM: usize = 2;
    const COORD_NAMES: &'static [&'static str] = &["x", "y"];
    type Vector = [f64; 2];

    fn from_coords(v: [f64; 2]) -> Self {
        TorusPoint2::new(v[0], v[1])
    }

    fn coords(&self) -> [f64; 2] {
        [self.x(), self.y()]
    }

    fn offset_from(&self, origin: &Self) -> [f64; 2] {
        [
            wrapped_difference(self.raw[0], origin.raw[0]),
            wrapped_difference(self.raw[1], origin.raw[1]),
        ]
    }

    fn translate(&self, d: &[f64; 2]) -> Self {
        TorusPoint2 {
            raw: [
                self.raw[0].wrapping_add(fixed_from_f64(d[0])),
                self.raw[1].wrapping_add(fixed_from_f64(d[1])),
            ],
        }
    }

    fn fingerprint(&self) -> u64 {
        splitmix64(self.raw[0] ^ self.raw[1].rotate_left(29))
    }

    fn dithered(&self, noise: u64) -> Self {
        TorusPoint2 {
            raw: [
                refresh_low_bits(self.raw[0], noise),
                refresh_low_bits(self.raw[1], noise >> 32),
            ],
        }
    }

    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        TorusPoint2 {
            raw: [rng.gen(), rng.gen()],
        }
    }
}

/// A point of the circle `S^1 = R / Z`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CirclePoint {
    raw: [u64; 1],
}

impl CirclePoint {
    pub fn new(x: f64) -> Self {
        CirclePoint {
            raw: [fixed_from_f64(x)],
        }
    }

    pub const fn from_raw(x: u64) -> Self {
        CirclePoint { raw: [x] }
    }

    pub fn raw(&self) -> u64 {
        self.raw[0]
    }

    pub fn x(&self) -> f64 {
        fixed_to_f64(self.raw[0])
    }
}

impl Debug for CirclePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({})", self.x())
    }
}

impl BasePoint for CirclePoint {
    const DIM: usize = 1;
    const COORD_NAMES: &'static [&'static str] = &["x"];
    type Vector = [f64; 1];

    fn from_coords(v: [f64; 1]) -> Self {
        CirclePoint::new(v[0])
    }

    fn coords(&self) -> [f64; 1] {
        [self.x()]
    }

    fn offset_from(&self, origin: &Self) -> [f64; 1] {
        [wrapped_difference(self.raw[0], origin.raw[0])]
    }

    fn translate(&self, d: &[f64; 1]) -> Self {
        CirclePoint {
            raw: [self.raw[0].wrapping_add(fixed_from_f64(d[0]))],
        }
    }

    fn fingerprint(&self) -> u64 {
        splitmix64(self.raw[0])
    }

    fn dithered(&self, noise: u64) -> Self {
        CirclePoint {
            raw: [refresh_low_bits(self.raw[0], noise)],
        }
    }

    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        CirclePoint { raw: [rng.gen()] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coordinates_reduce_into_unit_interval() {
        let p = TorusPoint2::new(1.25, -0.25);
        assert_eq!(p.x(), 0.25);
        assert_eq!(p.y(), 0.75);
        assert_eq!(TorusPoint2::new(1.0, -1.0), TorusPoint2::ORIGIN);
        assert_eq!(TorusPoint2::new(-1e-30, 0.0).x(), 0.0);
    }

    #[test]
    fn distance_uses_nearest_translate() {
        let a = TorusPoint2::new(0.05, 0.5);
        let b = TorusPoint2::new(0.95, 0.5);
        assert!((a.distance(&b) - 0.1).abs() < 1e-15);
        assert_eq!(a.offset_from(&a), [0.0, 0.0]);
    }

    #[test]
    fn circle_helpers() {
        assert!((circle_distance(0.95, 0.05) - 0.1).abs() < 1e-15);
        assert!((circle_difference(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert_eq!(reduce_turns(-0.25), 0.75);
    }

    proptest! {
        #[test]
        fn translate_then_offset_recovers_small_displacements(
            x in 0.0f64..1.0, y in 0.0f64..1.0, dx in -0.49f64..0.49, dy in -0.49f64..0.49
        ) {
            let p = TorusPoint2::new(x, y);
            let q = p.translate(&[dx, dy]);
            let d = q.offset_from(&p);
            prop_assert!((d[0] - dx).abs() < 1e-15 && (d[1] - dy).abs() < 1e-15);
            prop_assert!(q.x() < 1.0 && q.y() < 1.0);
        }

        #[test]
        fn distance_is_symmetric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>(), d in any::<u64>()) {
            let p = TorusPoint2::from_raw(a, b);
            let q = TorusPoint2::from_raw(c, d);
            prop_assert!(p.distance(&q) <= 0.5);
            prop_assert_eq!(p.distance(&q), q.distance(&p));
        }
    }
}
