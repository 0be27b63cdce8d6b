//! Time-analytic flows of uniform density patches under the aggregation equation.
//!
//! The crate computes the time-Taylor coefficients of the Lagrangian flow map through
//! a recurrence of Riesz transforms of piecewise-Hölder fields, evaluates the
//! principal-value integrals by a near/far decomposition with an explicit boundary
//! term, tracks a majorant ledger that certifies a convergence radius, and
//! cross-checks everything against a direct Lagrangian solver and exact ball flows.

pub mod error;
pub mod evolution;
pub mod field;
pub mod geometry;
pub mod kernels;
pub mod majorant;
pub mod mesh;
pub mod oracle;
pub mod quadrature;
pub mod series;
pub mod singular;

pub use error::{Error, Result};

pub use geometry::{BoundaryCurve, GeometryRadii, Patch, PatchSpec, RegionTag};
pub use kernels::{KernelConvention, KernelId};
pub use evolution::{FlowSample, ScenarioState};
pub use field::{Part, ThreePartField};
pub use majorant::MajorantLedger;
pub use series::{CoefficientLevel, SeriesConfig, SeriesEngine, SeriesSolution};


/// Internal point type; only the first `n` coordinates are meaningful.
pub type Vec3 = [f64; 3];

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

pub(crate) fn to_vec3(x: &[f64]) -> Vec3 {
    let mut p = [0.0; 3];
    for (dst, src) in p.iter_mut().zip(x) {
        *dst = *src;
    }
    p
}

#[inline]
pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn axpy(a: &Vec3, t: f64, d: &Vec3) -> Vec3 {
    [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]]
}

#[inline]
pub(crate) fn dist(a: &Vec3, b: &Vec3) -> f64 {
    norm(&sub(a, b))
}
