//! Constrained equations of motion in reduced coordinates and the PID closed loop.
//!
//! Velocities are carried as coefficients in the distribution basis:
//! `ζ = B(g)u` and `ζ_I = B(g)w`. Any such velocity lies in `D` exactly, so the
//! constraint cannot drift. Projecting Newton's equation onto `D*` gives
//!
//! ```text
//! (Bᵀ𝕀B) u̇ = Bᵀγ − Bᵀ𝕀 [Γ(ζ, ζ) + (D_ζB) u]
//! ```
//!
//! and the integral error obeys the same form with `dV` as the forcing term.

pub mod full_space;

use std::sync::Arc;

use nalgebra::DVector;

use crate::constraint::{ConstraintFrame, DistributionField};
use crate::controller::{Gains, LyapunovCoeffs};
use crate::error::{GeoError, Result};
use crate::geometry::{
    christoffel, ChartPoint, ChristoffelTensor, CotangentCoord, MetricField, Topology,
    DEFAULT_FD_STEP,
};
use crate::morse::MorseSpec;
use crate::ode::{rk4_step, time_grid};
use crate::scalar::{lit, to_f64, Scalar};

/// Threshold on `‖P_D* dV‖ + ‖u‖ + ‖w‖` for declaring convergence.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-2;
/// How long (simulated seconds) the threshold must hold.
pub const CONVERGENCE_HOLD: f64 = 1.0;

/// A constrained mechanical system: chart topology, metric and distribution.
#[derive(Debug, Clone)]
pub struct MechanicalSystem<T: Scalar> {
    pub name: String,
    pub topology: Arc<[Topology]>,
    pub metric: MetricField<T>,
    pub dist: DistributionField<T>,
    abelian: bool,
}

impl<T: Scalar> MechanicalSystem<T> {
    pub fn new(
        name: impl Into<String>,
        topology: Arc<[Topology]>,
        metric: MetricField<T>,
        dist: DistributionField<T>,
    ) -> Result<Self> {
        let n = topology.len();
        for found in [metric.dim(), dist.dim()] {
            if found != n {
                return Err(GeoError::DimensionMismatch { expected: n, found });
            }
        }
        if dist.rank() == 0 || dist.rank() > n {
            return Err(GeoError::DegenerateConstraint(format!(
                "rank {} for dimension {}",
                dist.rank(),
                n
            )));
        }
        Ok(Self {
            name: name.into(),
            topology,
            metric,
            dist,
            abelian: true,
        })
    }

    /// Marks the group as non-abelian; operations that rely on `Ad = Id`
    /// then refuse to run.
    pub fn declare_non_abelian(mut self) -> Self {
        self.abelian = false;
        self
    }

    pub fn is_abelian(&self) -> bool {
        self.abelian
    }

    pub fn dim(&self) -> usize {
        self.topology.len()
    }

    pub fn rank(&self) -> usize {
        self.dist.rank()
    }

    pub fn frame(&self, g: &ChartPoint<T>) -> Result<ConstraintFrame<T>> {
        ConstraintFrame::at(&self.metric, &self.dist, g)
    }

    pub fn point(&self, coords: &[T]) -> Result<ChartPoint<T>> {
        ChartPoint::from_slice(coords, self.topology.clone())
    }

    pub(crate) fn christoffel_at(&self, g: &ChartPoint<T>) -> Result<ChristoffelTensor<T>> {
        christoffel(&self.metric, g, lit(DEFAULT_FD_STEP))
    }
}

/// Closed-loop state `(g, ζ_E, ζ_I)` in reduced coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopState<T: Scalar> {
    pub g: ChartPoint<T>,
    /// `ζ_E = B(g) u`
    pub u: DVector<T>,
    /// `ζ_I = B(g) w`
    pub w: DVector<T>,
}

impl<T: Scalar> ClosedLoopState<T> {
    pub fn new(g: ChartPoint<T>, u: DVector<T>, w: DVector<T>) -> Self {
        Self { g, u, w }
    }

    pub fn at_rest(g: ChartPoint<T>, rank: usize) -> Self {
        Self::new(g, DVector::zeros(rank), DVector::zeros(rank))
    }

    /// Full-space error velocity `ζ_E = B u`.
    pub fn zeta(&self, sys: &MechanicalSystem<T>) -> DVector<T> {
        sys.dist.basis(&self.g) * &self.u
    }

    /// Full-space integral error `ζ_I = B w`.
    pub fn zeta_i(&self, sys: &MechanicalSystem<T>) -> DVector<T> {
        sys.dist.basis(&self.g) * &self.w
    }

    fn pack(&self) -> DVector<T> {
        let (n, k) = (self.g.dim(), self.u.len());
        let mut y = DVector::zeros(n + 2 * k);
        y.rows_mut(0, n).copy_from(self.g.coords());
        y.rows_mut(n, k).copy_from(&self.u);
        y.rows_mut(n + k, k).copy_from(&self.w);
        y
    }

    fn unpack(y: &DVector<T>, topology: &Arc<[Topology]>, k: usize) -> Result<Self> {
        let n = topology.len();
        Ok(Self {
            g: ChartPoint::new(y.rows(0, n).into_owned(), topology.clone())?,
            u: y.rows(n, k).into_owned(),
            w: y.rows(n + k, k).into_owned(),
        })
    }
}

/// Time derivative of a [`ClosedLoopState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative<T: Scalar> {
    pub g_dot: DVector<T>,
    pub u_dot: DVector<T>,
    pub w_dot: DVector<T>,
}

impl<T: Scalar> StateDerivative<T> {
    fn pack(&self) -> DVector<T> {
        let (n, k) = (self.g_dot.len(), self.u_dot.len());
        let mut y = DVector::zeros(n + 2 * k);
        y.rows_mut(0, n).copy_from(&self.g_dot);
        y.rows_mut(n, k).copy_from(&self.u_dot);
        y.rows_mut(n + k, k).copy_from(&self.w_dot);
        y
    }

    pub fn norm(&self) -> T {
        self.pack().norm()
    }
}

fn check_reduced<T: Scalar>(sys: &MechanicalSystem<T>, v: &DVector<T>) -> Result<()> {
    if v.len() != sys.rank() {
        return Err(GeoError::DimensionMismatch {
            expected: sys.rank(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `Bᵀ𝕀[Γ(a, b) + (D_a B) c]`, the velocity-dependent part shared by both
/// reduced equations.
fn reduced_bias<T: Scalar>(
    sys: &MechanicalSystem<T>,
    frame: &ConstraintFrame<T>,
    gamma: &ChristoffelTensor<T>,
    g: &ChartPoint<T>,
    a: &DVector<T>,
    b: &DVector<T>,
    c: &DVector<T>,
) -> DVector<T> {
    let mut bias = sys.dist.basis_derivative(g, a) * c;
    if !gamma.is_zero() {
        bias += gamma.contract(a, b);
    }
    frame.basis.transpose() * (&frame.metric * bias)
}

/// Reduced acceleration `u̇` under the applied covector `γ`.
pub fn reduced_accel<T: Scalar>(
    sys: &MechanicalSystem<T>,
    g: &ChartPoint<T>,
    u: &DVector<T>,
    gamma_applied: &CotangentCoord<T>,
) -> Result<DVector<T>> {
    check_reduced(sys, u)?;
    let frame = sys.frame(g)?;
    let chr = sys.christoffel_at(g)?;
    let zeta = &frame.basis * u;
    let bias = reduced_bias(sys, &frame, &chr, g, &zeta, &zeta, u);
    Ok(&frame.gram_inv * (frame.basis.transpose() * &gamma_applied.0 - bias))
}

/// Reduced integral-error rate `ẇ`.
///
/// The full equation is `𝕀∇_{ζ_E}ζ_I = P_D* dV − (∇_{ζ_E}P_D*⊥)𝕀ζ_I`. Its
/// second term lies in `D*⊥` whenever `𝕀ζ_I ∈ D*`, so it drops out of the `D*`
/// component, and the `D*⊥` component is satisfied identically by `ζ_I = Bw`.
pub fn integral_error_rate<T: Scalar>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    g: &ChartPoint<T>,
    u: &DVector<T>,
    w: &DVector<T>,
) -> Result<DVector<T>> {
    check_reduced(sys, u)?;
    check_reduced(sys, w)?;
    let frame = sys.frame(g)?;
    let chr = sys.christoffel_at(g)?;
    Ok(integral_rate_in(sys, morse, &frame, &chr, g, u, w))
}

fn integral_rate_in<T: Scalar>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    frame: &ConstraintFrame<T>,
    chr: &ChristoffelTensor<T>,
    g: &ChartPoint<T>,
    u: &DVector<T>,
    w: &DVector<T>,
) -> DVector<T> {
    let zeta_e = &frame.basis * u;
    let zeta_i = &frame.basis * w;
    let bias = reduced_bias(sys, frame, chr, g, &zeta_e, &zeta_i, w);
    let dv = morse.differential(g).0;
    &frame.gram_inv * (frame.basis.transpose() * dv - bias)
}

/// Right-hand side `(ġ, u̇, ẇ)` of the regulated closed loop.
pub fn closed_loop_rhs<T: Scalar>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    gains: &Gains<T>,
    state: &ClosedLoopState<T>,
) -> Result<StateDerivative<T>> {
    check_reduced(sys, &state.u)?;
    check_reduced(sys, &state.w)?;
    let g = &state.g;
    let frame = sys.frame(g)?;
    let chr = sys.christoffel_at(g)?;
    let zeta = &frame.basis * &state.u;

    let force = crate::controller::pid_force_in(&frame, morse, gains, state);
    let bias = reduced_bias(sys, &frame, &chr, g, &zeta, &zeta, &state.u);
    let u_dot = &frame.gram_inv * (frame.basis.transpose() * force - bias);
    let w_dot = integral_rate_in(sys, morse, &frame, &chr, g, &state.u, &state.w);
    Ok(StateDerivative {
        g_dot: zeta,
        u_dot,
        w_dot,
    })
}

/// The Lyapunov function
/// `W = k_p V + ½⟨ζ_E,ζ_E⟩ + (γ/2)⟨ζ_I,ζ_I⟩ + α⟨P_D grad V, ζ_E⟩ + β⟨ζ_I, ζ_E⟩ + σ⟨ζ_I, P_D grad V⟩`.
///
/// In reduced coordinates `⟨P_D grad V, Bu⟩ = dVᵀBu`, so `𝕀` is never inverted.
pub fn lyapunov_w<T: Scalar>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    gains: &Gains<T>,
    coeffs: &LyapunovCoeffs<T>,
    state: &ClosedLoopState<T>,
) -> Result<T> {
    let frame = sys.frame(&state.g)?;
    Ok(lyapunov_in(&frame, morse, gains, coeffs, state))
}

fn lyapunov_in<T: Scalar>(
    frame: &ConstraintFrame<T>,
    morse: &MorseSpec<T>,
    gains: &Gains<T>,
    coeffs: &LyapunovCoeffs<T>,
    state: &ClosedLoopState<T>,
) -> T {
    let half: T = lit(0.5);
    let (u, w) = (&state.u, &state.w);
    let grad_red = frame.basis.transpose() * morse.differential(&state.g).0;
    let gu = &frame.gram * u;
    gains.kp * morse.value(&state.g)
        + half * u.dot(&gu)
        + half * coeffs.gamma * w.dot(&(&frame.gram * w))
        + coeffs.alpha * grad_red.dot(u)
        + coeffs.beta * w.dot(&gu)
        + coeffs.sigma * grad_red.dot(w)
}

/// Per-sample diagnostics recorded along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics<T: Scalar> {
    /// `‖P_D⊥ ζ‖`, the chart residual of the velocity constraint.
    pub constraint_residual: T,
    /// `‖P_D*⊥ 𝕀ζ_I‖`
    pub integral_residual: T,
    pub lyapunov: T,
    pub projected_gradient_norm: T,
    /// The applied PID covector.
    pub force: DVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    pub times: Vec<T>,
    pub states: Vec<ClosedLoopState<T>>,
    pub diagnostics: Vec<StepDiagnostics<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &ClosedLoopState<T> {
        self.states
            .last()
            .expect("trajectory has an initial sample")
    }

    pub fn max_constraint_residual(&self) -> T {
        self.diagnostics
            .iter()
            .fold(T::zero(), |m, d| m.max(d.constraint_residual))
    }

    pub fn max_integral_residual(&self) -> T {
        self.diagnostics
            .iter()
            .fold(T::zero(), |m, d| m.max(d.integral_residual))
    }

    /// Largest single-step increase of `W` (negative if strictly decreasing).
    pub fn max_lyapunov_increase(&self) -> T {
        self.diagnostics
            .windows(2)
            .map(|w| w[1].lyapunov - w[0].lyapunov)
            .fold(T::min_value().unwrap_or(-T::one()), |m, d| m.max(d))
    }

    pub fn lyapunov_non_increasing(&self, slack: T) -> bool {
        self.diagnostics
            .windows(2)
            .all(|w| w[1].lyapunov - w[0].lyapunov <= slack)
    }

    /// Convergence measure `‖P_D* dV‖ + ‖u‖ + ‖w‖` at sample `i`.
    pub fn convergence_measure(&self, i: usize) -> T {
        self.diagnostics[i].projected_gradient_norm
            + self.states[i].u.norm()
            + self.states[i].w.norm()
    }

    /// Start of the final interval, lasting at least `hold` seconds and
    /// reaching the end of the trajectory, on which the convergence measure
    /// stays below `threshold`.
    pub fn convergence_time_with(&self, threshold: T, hold: T) -> Option<T> {
        let mut start = None;
        for i in 0..self.len() {
            if self.convergence_measure(i) < threshold {
                start.get_or_insert(self.times[i]);
            } else {
                start = None;
            }
        }
        let t_end = *self.times.last()?;
        start.filter(|&s| t_end - s >= hold)
    }

    pub fn convergence_time(&self) -> Option<T> {
        self.convergence_time_with(lit(CONVERGENCE_THRESHOLD), lit(CONVERGENCE_HOLD))
    }
}

fn diagnostics_at<T: Scalar>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    gains: &Gains<T>,
    coeffs: &LyapunovCoeffs<T>,
    state: &ClosedLoopState<T>,
) -> Result<StepDiagnostics<T>> {
    let frame = sys.frame(&state.g)?;
    let p = frame.projectors();
    let zeta = &frame.basis * &state.u;
    let zeta_i = &frame.basis * &state.w;
    Ok(StepDiagnostics {
        constraint_residual: (&p.p_d_perp * zeta).norm(),
        integral_residual: (&p.p_dstar_perp * (&frame.metric * zeta_i)).norm(),
        lyapunov: lyapunov_in(&frame, morse, gains, coeffs, state),
        projected_gradient_norm: (&p.p_dstar * morse.differential(&state.g).0).norm(),
        force: crate::controller::pid_force_in(&frame, morse, gains, state),
    })
}

/// Fixed-step RK4 integration of the closed loop over `[0, t_end]`.
pub fn integrate<T: Scalar>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    gains: &Gains<T>,
    coeffs: &LyapunovCoeffs<T>,
    state0: &ClosedLoopState<T>,
    t_end: T,
    dt: T,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(GeoError::InvalidParameter(format!(
            "dt must be positive, got {}",
            to_f64(dt)
        )));
    }
    if !(t_end > T::zero() && t_end.is_finite()) {
        return Err(GeoError::InvalidParameter(format!(
            "t_end must be positive, got {}",
            to_f64(t_end)
        )));
    }
    check_reduced(sys, &state0.u)?;
    check_reduced(sys, &state0.w)?;

    let k = sys.rank();
    let grid = time_grid(t_end, dt);
    let mut times = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::with_capacity(grid.len());

    let mut state = state0.clone();
    times.push(grid[0]);
    diagnostics.push(diagnostics_at(sys, morse, gains, coeffs, &state)?);
    states.push(state.clone());

    for w in grid.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let y = rk4_step(t, &state.pack(), h, |_, y| {
            let s = ClosedLoopState::unpack(y, &sys.topology, k)?;
            Ok::<_, GeoError>(closed_loop_rhs(sys, morse, gains, &s)?.pack())
        })?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(GeoError::NonFinite { time: to_f64(w[1]) });
        }
        state = ClosedLoopState::unpack(&y, &sys.topology, k)?;
        times.push(w[1]);
        diagnostics.push(diagnostics_at(sys, morse, gains, coeffs, &state)?);
        states.push(state.clone());
    }
    Ok(Trajectory {
        times,
        states,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;
    use nalgebra::DMatrix;

    fn robot_state(g: [f64; 3], u: [f64; 2], w: [f64; 2]) -> ClosedLoopState<f64> {
        ClosedLoopState::new(
            ChartPoint::from_slice(&g, systems::unicycle_topology()).unwrap(),
            DVector::from_column_slice(&u),
            DVector::from_column_slice(&w),
        )
    }

    #[test]
    fn forward_roll_coasts() {
        let sys = systems::unicycle::<f64>();
        let s = robot_state([0.2, 0.1, 0.7], [0.0, 1.0], [0.0, 0.0]);
        let acc = reduced_accel(&sys, &s.g, &s.u, &CotangentCoord::zeros(3)).unwrap();
        assert!(acc.amax() < 1e-15);
    }

    #[test]
    fn free_circle_motion_keeps_speed() {
        let sys = systems::circle_particle::<f64>(1.0);
        let g = sys
            .point(&[1.5 * 0.3f64.cos(), 1.5 * 0.3f64.sin()])
            .unwrap();
        let acc = reduced_accel(
            &sys,
            &g,
            &DVector::from_vec(vec![2.0]),
            &CotangentCoord::zeros(2),
        )
        .unwrap();
        assert!(acc[0].abs() < 1e-14);
    }

    #[test]
    fn reduced_accel_satisfies_projected_newton_equation() {
        // reconstruct ζ̇ = (D_ζB)u + Bu̇ and check P_D*(𝕀(ζ̇ + Γ(ζ,ζ))) = P_D*γ
        let sys = systems::unicycle::<f64>();
        let s = robot_state([0.4, -0.3, 1.1], [0.7, -1.3], [0.0, 0.0]);
        let gamma = CotangentCoord::from_slice(&[0.3, -2.0, 0.8]);
        let u_dot = reduced_accel(&sys, &s.g, &s.u, &gamma).unwrap();
        let frame = sys.frame(&s.g).unwrap();
        let zeta = &frame.basis * &s.u;
        let zeta_dot = sys.dist.basis_derivative(&s.g, &zeta) * &s.u + &frame.basis * &u_dot;
        let p = frame.projectors().p_dstar;
        let lhs = &p * (&frame.metric * zeta_dot);
        let rhs = &p * &gamma.0;
        assert!((lhs - rhs).amax() < 1e-8);
    }

    #[test]
    fn integral_rate_examples() {
        let sys = systems::unicycle::<f64>();
        let morse = systems::unicycle_morse::<f64>();
        let s = robot_state([0.0, 1.3, 0.0], [0.0, 0.0], [0.0, 0.0]);
        assert!(
            integral_error_rate(&sys, &morse, &s.g, &s.u, &s.w)
                .unwrap()
                .amax()
                < 1e-15
        );

        let s = robot_state([1.0, 0.0, 0.0], [0.0, 0.0], [0.0, 0.0]);
        let rate = integral_error_rate(&sys, &morse, &s.g, &s.u, &s.w).unwrap();
        // (BᵀB)⁻¹Bᵀ(1, 0, 0) with B(0) = [e_θ, e_x] is (0, 1)
        assert!((rate - DVector::from_vec(vec![0.0, 1.0])).amax() < 1e-15);

        let euc = systems::euclidean::<f64>(3);
        let target = ChartPoint::identity(systems::euclidean_topology(3));
        let m = systems::euclidean_morse(target);
        let g = euc.point(&[0.3, -1.0, 2.0]).unwrap();
        let rate = integral_error_rate(
            &euc,
            &m,
            &g,
            &DVector::from_vec(vec![1.0, 2.0, 3.0]),
            &DVector::zeros(3),
        )
        .unwrap();
        assert!((rate - g.coords()).amax() < 1e-15);
    }

    #[test]
    fn equilibria_have_zero_derivative() {
        let sys = systems::unicycle::<f64>();
        let morse = systems::unicycle_morse::<f64>();
        let gains = systems::unicycle_gains::<f64>();
        for th in [0.0, std::f64::consts::PI] {
            let d = closed_loop_rhs(
                &sys,
                &morse,
                &gains,
                &robot_state([0.0, 0.0, th], [0.0; 2], [0.0; 2]),
            )
            .unwrap();
            assert!(d.norm() < 1e-14, "θ = {th}");
        }
    }

    #[test]
    fn initial_acceleration_is_proportional_term() {
        let sys = systems::unicycle::<f64>();
        let morse = systems::unicycle_morse::<f64>();
        let gains = systems::unicycle_gains::<f64>();
        let s = robot_state([1.0, -0.1, 0.6], [0.0; 2], [0.0; 2]);
        let d = closed_loop_rhs(&sys, &morse, &gains, &s).unwrap();
        // hand evaluation: u̇ = −k_P (sinθ, x cosθ + y sinθ) for the orthonormal basis
        let th: f64 = 0.6;
        let expected =
            DVector::from_vec(vec![-20.0 * th.sin(), -20.0 * (th.cos() - 0.1 * th.sin())]);
        assert!((&d.u_dot - expected).amax() < 1e-13);
        assert!(d.g_dot.amax() == 0.0);
    }

    #[test]
    fn classical_pid_is_recovered_without_constraints() {
        let sys = systems::euclidean::<f64>(2);
        let target = sys.point(&[0.5, -1.0]).unwrap();
        let morse = systems::euclidean_morse(target.clone());
        let gains = Gains::new(3.0, 1.5, 0.4);
        let s = ClosedLoopState::new(
            sys.point(&[1.2, 0.3]).unwrap(),
            DVector::from_vec(vec![0.2, -0.7]),
            DVector::from_vec(vec![0.05, 0.1]),
        );
        let d = closed_loop_rhs(&sys, &morse, &gains, &s).unwrap();
        let e = s.g.coords() - target.coords();
        let expected_acc = -&e * gains.kp - &s.u * gains.kd - &s.w * gains.ki;
        assert!((&d.u_dot - expected_acc).amax() < 1e-12);
        assert!((&d.w_dot - e).amax() < 1e-12);
        assert!((&d.g_dot - &s.u).amax() < 1e-12);
    }

    #[test]
    fn lyapunov_examples() {
        let sys = systems::unicycle::<f64>();
        let morse = systems::unicycle_morse::<f64>();
        let gains = systems::unicycle_gains::<f64>();
        let coeffs = LyapunovCoeffs::design(&gains, 1.0);
        let e = robot_state([0.0; 3], [0.0; 2], [0.0; 2]);
        assert_eq!(lyapunov_w(&sys, &morse, &gains, &coeffs, &e).unwrap(), 0.0);
        let s = robot_state([1.0, -0.1, 0.6], [0.0; 2], [0.0; 2]);
        let w = lyapunov_w(&sys, &morse, &gains, &coeffs, &s).unwrap();
        assert!((w - 20.0 * morse.value(&s.g)).abs() < 1e-14);
    }

    #[test]
    fn zero_gain_run_is_stationary() {
        let sys = systems::unicycle::<f64>();
        let morse = systems::unicycle_morse::<f64>();
        let gains = Gains::new(0.0, 0.0, 0.0);
        let s0 = robot_state([1.0, -0.1, 0.6], [0.0; 2], [0.0; 2]);
        let traj = integrate(
            &sys,
            &morse,
            &gains,
            &LyapunovCoeffs::zero(),
            &s0,
            1.0,
            1e-2,
        )
        .unwrap();
        // ẇ = BᵀdV still accumulates but no force acts on the body
        assert_eq!(traj.final_state().g, s0.g);
        assert!(traj.final_state().u.amax() == 0.0);
        assert!(traj.convergence_time().is_none());
    }

    #[test]
    fn integrate_rejects_bad_steps() {
        let sys = systems::unicycle::<f64>();
        let morse = systems::unicycle_morse::<f64>();
        let gains = systems::unicycle_gains::<f64>();
        let s0 = robot_state([1.0, 0.0, 0.0], [0.0; 2], [0.0; 2]);
        let c = LyapunovCoeffs::zero();
        assert!(matches!(
            integrate(&sys, &morse, &gains, &c, &s0, 1.0, 0.0),
            Err(GeoError::InvalidParameter(_))
        ));
        assert!(matches!(
            integrate(&sys, &morse, &gains, &c, &s0, -1.0, 0.1),
            Err(GeoError::InvalidParameter(_))
        ));
    }

    #[test]
    fn blow_up_is_reported() {
        let sys = systems::euclidean::<f64>(1);
        let morse = systems::euclidean_morse(ChartPoint::identity(systems::euclidean_topology(1)));
        // negative stiffness with a huge step diverges
        let gains = Gains::new(-1e200, 0.0, 0.0);
        let s0 = ClosedLoopState::at_rest(sys.point(&[1.0]).unwrap(), 1);
        let err = integrate(
            &sys,
            &morse,
            &gains,
            &LyapunovCoeffs::zero(),
            &s0,
            10.0,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, GeoError::NonFinite { .. }));
    }

    #[test]
    fn kinetic_energy_conserved_without_force() {
        // the polar-like circle particle: constraint forces do no work
        let sys = systems::circle_particle::<f64>(2.0);
        let morse = systems::circle_particle_morse(1.5);
        let gains = Gains::new(0.0, 0.0, 0.0);
        let g0 = sys.point(&[1.5, 0.0]).unwrap();
        let s0 = ClosedLoopState::new(g0, DVector::from_vec(vec![2.0]), DVector::zeros(1));
        let traj = integrate(
            &sys,
            &morse,
            &gains,
            &LyapunovCoeffs::zero(),
            &s0,
            10.0,
            1e-3,
        )
        .unwrap();
        let energy = |s: &ClosedLoopState<f64>| {
            let f = sys.frame(&s.g).unwrap();
            0.5 * s.u.dot(&(&f.gram * &s.u))
        };
        let e0 = energy(&traj.states[0]);
        for s in &traj.states {
            assert!((energy(s) - e0).abs() < 1e-6);
        }
        let _ = DMatrix::<f64>::zeros(1, 1);
    }
}
