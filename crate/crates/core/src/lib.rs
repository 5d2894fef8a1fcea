//! Rotation extensions of hyperbolic and expanding endomorphisms: exact base
//! dynamics, preorbits, invariant bundles, leaf charts and ergodic
//! diagnostics.

pub mod base;
pub mod bundles;
pub mod ergodic;
pub mod error;
pub mod foliation;
pub mod orbit_space;
pub mod point;
pub mod skew;
pub mod stats;

pub use base::{
    eigen_data, BaseMap, BumpFunction, EigenData, ExpandingCircleMap, LinearToralEndomorphism,
};
pub use bundles::{
    estimate_center_direction, estimate_splitting, estimate_stable_direction,
    estimate_unstable_direction, lyapunov_exponents, lyapunov_spectrum, mean_center_exponent,
    pesin_entropy_estimate, rate_estimates, unstable_direction_spread, Direction3,
    DirectionEstimate, LyapunovSpectrum, LyapunovTriple, RateEstimates, SplittingEstimate,
};
pub use ergodic::{
    birkhoff_average, birkhoff_dispersion, box_transitivity, srb_delta_u, srb_density,
    volume_preservation_certificate, BirkhoffReport, JacobianSum, Observable, SrbLeafDensity,
    TransitivityReport, VolumeCertificate,
};
pub use error::{BundleError, LeafError, MapError, OrbitError};
pub use foliation::{
    build_su_path, integrability_defect, leaf_density_radius, quadrilateral_holonomy,
    stable_fiber_offset, unstable_fiber_offset, LegPolicy, Orientation, QuadrilateralSpec,
    StableLeafChart, SuLeg, SuPath, UnstableLeafChart,
};
pub use orbit_space::{
    inverse_limit_distance, sample_preorbit, shadow_preorbit, shift, unshift, OrbitSegment,
    Preorbit, PreorbitPolicy, Region,
};
pub use point::{BasePoint, CirclePoint, TorusPoint2};
pub use skew::{
    vertical_rotate, CircleExtension, CircleFiberedPoint, DerivativeMatrix3, FiberedPoint,
    RotationExtension, TangentCocycle, ToralExtension, TorusFiberedPoint,
};
pub use stats::{MeanEstimate, SeriesValue};
