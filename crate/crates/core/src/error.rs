use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("matrix is not hyperbolic: {0}")]
    NotHyperbolic(String),
    #[error("circle map multiplier {0} is not expanding (|k| must be at least 2)")]
    NotExpanding(i64),
    #[error("invalid bump function: {0}")]
    InvalidBump(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error("preorbit depth must be at least 1")]
    InvalidDepth,
    #[error("itinerary entry {index} at step {step} exceeds degree {degree}")]
    InvalidBranch {
        step: usize,
        index: usize,
        degree: usize,
    },
    #[error("itinerary of length {len} is shorter than depth {depth}")]
    ItineraryTooShort { len: usize, depth: usize },
    #[error("no preimage outside the region at step {step}")]
    PolicyInfeasible { step: usize },
    #[error("shadowing broke down at step {step}: {reason}")]
    ShadowBreakdown { step: usize, reason: String },
    #[error("segment does not cover indices -{needed}..{needed}")]
    SegmentTooShort { needed: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BundleError {
    #[error("every seed vector was degenerate after {attempts} attempts")]
    DegenerateSeed { attempts: usize },
    #[error("requested {requested} steps but the preorbit has depth {depth}")]
    DepthExceeded { requested: usize, depth: usize },
    #[error("need at least {needed}, got {got}")]
    TooFewInputs { needed: usize, got: usize },
    #[error("preorbits are not anchored at the same point")]
    MismatchedAnchors,
    #[error("map is not volume preserving (max deviation {deviation:e})")]
    NotVolumePreserving { deviation: f64 },
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeafError {
    #[error("leg parameter {t} leaves the chart (|t| must stay below 0.5)")]
    LegTooLong { t: f64 },
    #[error(
        "point is not on the {leaf} line through the anchor (off-line component {residual:e})"
    )]
    OffLeaf { leaf: &'static str, residual: f64 },
    #[error("fiber error {achieved:e} could not be reduced below tolerance")]
    NotAccessibleNumerically { achieved: f64 },
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}
