//! Numerical laboratory for unstable-manifold linearization, Bowen-ball
//! distortion and dominated unstable splittings on hyperbolic toy systems.

pub mod bowen;
pub mod charts;
pub mod error;
pub mod holonomy;
pub mod linalg;
pub mod linearization;
pub mod rng;
pub mod scalar;
pub mod splitting;
pub mod systems;

pub use error::{LabError, Result};
pub use num_traits::{Float, FloatConst};
pub use scalar::{Dd, Real};

/// Double-precision instantiations.
pub mod f64s {
    pub type Mat = crate::linalg::Mat<f64>;
    pub type Subspace = crate::linalg::Subspace<f64>;
    pub type OrbitWindow = crate::charts::OrbitWindow<f64>;
    pub type UnstableChart = crate::charts::UnstableChart<f64>;
    pub type LambdaIndex = crate::charts::LambdaIndex<f64>;
    pub type LambdaSample = crate::systems::LambdaSample<f64>;
    pub type BowenCandidates = crate::bowen::BowenCandidates<f64>;
    pub type BowenSample = crate::bowen::BowenSample<f64>;
    pub type SplittingEstimate = crate::splitting::SplittingEstimate<f64>;
    pub type PrimeNormContext = crate::splitting::PrimeNormContext<f64>;
    pub type HolonomyMap = crate::holonomy::HolonomyMap<f64>;
    pub type PCat = crate::systems::PCat<f64>;
    pub type Prod4 = crate::systems::Prod4<f64>;
    pub type Solenoid = crate::systems::Solenoid<f64>;
}
