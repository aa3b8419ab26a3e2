//! Built-in mechanical systems with closed-form fields.
//!
//! * `unicycle`: the planar rolling robot on `ℝ² × S¹` with `ẋ sinθ − ẏ cosθ = 0`.
//! * `circle_particle`: a point mass in the plane whose velocity is kept tangent
//!   to the circle through its current position.
//! * `euclidean`: the unconstrained unit-mass double integrator on `ℝⁿ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constraint::DistributionField;
use crate::controller::Gains;
use crate::dynamics::MechanicalSystem;
use crate::geometry::{ChartPoint, MetricField, Topology};
use crate::morse::{MorseSpec, SamplingRegion};
use crate::scalar::{lit, Scalar};

/// Reference gains for the unicycle.
pub const UNICYCLE_GAINS: (f64, f64, f64) = (20.0, 2.0, 0.5);
/// Reference initial configuration `(x, y, θ)`, at rest.
pub const UNICYCLE_INITIAL: [f64; 3] = [1.0, -0.1, 0.6];
/// Published Morse bounds for the unicycle function (reported alongside sampled ones).
pub const UNICYCLE_LAMBDA: f64 = 4.0;
pub const UNICYCLE_MU: f64 = 1.0;

/// Default sampling box: linear axes on `[-2, 2]`, angles on `[0, 2π)`.
pub const DEFAULT_REGION_HALF_WIDTH: f64 = 2.0;
pub const DEFAULT_REGION_SAMPLES: usize = 21;
/// Default tolerance on `‖P_D* dV‖` for accepting a critical point.
pub const DEFAULT_CRITICAL_TOL: f64 = 1e-9;

pub fn default_region<T: Scalar>(topology: Arc<[Topology]>) -> SamplingRegion<T> {
    SamplingRegion::centered(
        topology,
        lit(DEFAULT_REGION_HALF_WIDTH),
        DEFAULT_REGION_SAMPLES,
    )
    .expect("non-empty box")
}

pub fn unicycle_topology() -> Arc<[Topology]> {
    Arc::from(vec![Topology::Linear, Topology::Linear, Topology::Angular])
}

pub fn euclidean_topology(dim: usize) -> Arc<[Topology]> {
    Arc::from(vec![Topology::Linear; dim])
}

pub fn unicycle_gains<T: Scalar>() -> Gains<T> {
    let (kp, kd, ki) = UNICYCLE_GAINS;
    Gains::new(lit(kp), lit(kd), lit(ki))
}

/// Identity metric and the rolling distribution with basis
/// `[e_θ, (cosθ, sinθ, 0)]`, so reduced velocities are `(θ̇, v)`.
pub fn unicycle_geometry<T: Scalar>() -> (MetricField<T>, DistributionField<T>) {
    let metric = MetricField::identity(3);
    let dist = DistributionField::new(3, 2, |g: &ChartPoint<T>| {
        let (s, c) = g.get(2).sin_cos();
        let (z, o) = (T::zero(), T::one());
        DMatrix::from_row_slice(3, 2, &[z, c, z, s, o, z])
    })
    .with_basis_derivative(|g: &ChartPoint<T>, x: &DVector<T>| {
        let (s, c) = g.get(2).sin_cos();
        let w = x[2];
        let z = T::zero();
        DMatrix::from_row_slice(3, 2, &[z, -s * w, z, c * w, z, z])
    });
    (metric, dist)
}

pub fn unicycle<T: Scalar>() -> MechanicalSystem<T> {
    let (metric, dist) = unicycle_geometry();
    MechanicalSystem::new("unicycle", unicycle_topology(), metric, dist)
        .expect("unicycle is well formed")
}

/// `V = ½(x² + y²) + (1 − cosθ)` with `dV = (x, y, sinθ)`.
pub fn unicycle_morse<T: Scalar>() -> MorseSpec<T> {
    MorseSpec::new(
        |g: &ChartPoint<T>| {
            let (x, y) = (g.get(0), g.get(1));
            (x * x + y * y) * lit(0.5) + T::one() - g.get(2).cos()
        },
        ChartPoint::identity(unicycle_topology()),
    )
    .with_differential(|g: &ChartPoint<T>| {
        DVector::from_vec(vec![g.get(0), g.get(1), g.get(2).sin()])
    })
}

pub fn unicycle_initial<T: Scalar>() -> ChartPoint<T> {
    let c: Vec<T> = UNICYCLE_INITIAL.iter().map(|&v| lit(v)).collect();
    ChartPoint::from_slice(&c, unicycle_topology()).expect("three coordinates")
}

/// Point mass `m` in the plane, velocity tangent to circles about the origin:
/// basis `(−y, x)`, so the reduced velocity is the angular rate `θ̇`.
pub fn circle_particle<T: Scalar>(mass: T) -> MechanicalSystem<T> {
    let metric = MetricField::constant(DMatrix::identity(2, 2) * mass);
    let dist = DistributionField::new(2, 1, |g: &ChartPoint<T>| {
        DMatrix::from_row_slice(2, 1, &[-g.get(1), g.get(0)])
    })
    .with_basis_derivative(|_, x: &DVector<T>| DMatrix::from_row_slice(2, 1, &[-x[1], x[0]]));
    MechanicalSystem::new("circle-particle", euclidean_topology(2), metric, dist)
        .expect("circle particle is well formed")
}

/// `V = ½‖p − (r, 0)‖²`, a Morse function for the circle particle with its
/// minimum at angle zero on the circle of radius `r`.
pub fn circle_particle_morse<T: Scalar>(radius: T) -> MorseSpec<T> {
    let target = ChartPoint::from_slice(&[radius, T::zero()], euclidean_topology(2))
        .expect("two coordinates");
    euclidean_morse(target)
}

/// Unconstrained unit-mass system on `ℝⁿ`.
pub fn euclidean<T: Scalar>(dim: usize) -> MechanicalSystem<T> {
    MechanicalSystem::new(
        "euclidean",
        euclidean_topology(dim),
        MetricField::identity(dim),
        DistributionField::full(dim),
    )
    .expect("euclidean system is well formed")
}

/// `V = ½‖x − x_d‖²` with `dV = x − x_d`.
pub fn euclidean_morse<T: Scalar>(target: ChartPoint<T>) -> MorseSpec<T> {
    let t1 = target.coords().clone();
    let t2 = t1.clone();
    MorseSpec::new(
        move |g: &ChartPoint<T>| (g.coords() - &t1).norm_squared() * lit(0.5),
        target,
    )
    .with_differential(move |g: &ChartPoint<T>| g.coords() - &t2)
}
