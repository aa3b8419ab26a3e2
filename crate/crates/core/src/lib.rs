//! Geometric PID control of nonholonomically constrained mechanical systems
//! on product groups `ℝᵃ × (S¹)ᵇ`.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases fix the precision.

pub mod constraint;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod morse;
pub mod ode;
pub mod scalar;
pub mod systems;

pub use constraint::{
    constraint_force, constraint_residual, nabla_projector, projectors, ConstraintFrame,
    DistributionField, ProjectorSet,
};
pub use controller::{
    certify_geometric, euclidean_design, euclidean_simulate, feedforward_fr, pid_force,
    EuclideanDesign, EuclideanTrajectory, GainCertificate, Gains, LyapunovCoeffs, Verdict,
};
pub use dynamics::{
    closed_loop_rhs, integral_error_rate, integrate, lyapunov_w, reduced_accel, ClosedLoopState,
    MechanicalSystem, StateDerivative, Trajectory,
};
pub use error::{GeoError, Result};
pub use geometry::{
    christoffel, covariant_accel, group_compose, group_inverse, inner, tracking_error, ChartPoint,
    ChristoffelTensor, CotangentCoord, MetricField, TangentCoord, Topology,
};
pub use morse::{
    d_hessian, estimate_lambda_mu, find_d_critical, projected_dv, CriticalPoint, CriticalSearch,
    HessianSignature, LambdaMu, MorseSpec, SamplingRegion,
};
pub use scalar::Scalar;

pub type ChartPointF64 = ChartPoint<f64>;
pub type ChartPointF32 = ChartPoint<f32>;
pub type TangentCoordF64 = TangentCoord<f64>;
pub type TangentCoordF32 = TangentCoord<f32>;
pub type CotangentCoordF64 = CotangentCoord<f64>;
pub type CotangentCoordF32 = CotangentCoord<f32>;
pub type MetricFieldF64 = MetricField<f64>;
pub type MetricFieldF32 = MetricField<f32>;
pub type DistributionFieldF64 = DistributionField<f64>;
pub type DistributionFieldF32 = DistributionField<f32>;
pub type MorseSpecF64 = MorseSpec<f64>;
pub type MorseSpecF32 = MorseSpec<f32>;
pub type MechanicalSystemF64 = MechanicalSystem<f64>;
pub type MechanicalSystemF32 = MechanicalSystem<f32>;
pub type ClosedLoopStateF64 = ClosedLoopState<f64>;
pub type ClosedLoopStateF32 = ClosedLoopState<f32>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type TrajectoryF32 = Trajectory<f32>;
pub type GainsF64 = Gains<f64>;
pub type GainsF32 = Gains<f32>;
pub type GainCertificateF64 = GainCertificate<f64>;
pub type EuclideanDesignF64 = EuclideanDesign<f64>;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
