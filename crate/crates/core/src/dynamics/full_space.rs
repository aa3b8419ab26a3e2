//! Full-space formulation with the explicit constraint force.
//!
//! The state is `(g, ζ, ζ_I)` with `ζ, ζ_I ∈ ℝⁿ` and Newton's equation is
//! solved as `ζ̇ = 𝕀⁻¹(γ + γ_λ) − Γ(ζ, ζ)`. This needs an invertible metric and
//! lets the constraint drift, so it is kept only for cross-checking the
//! reduced integrator.

use nalgebra::{DMatrix, DVector};

use crate::constraint::{constraint_force_unchecked, nabla_projector};
use crate::controller::Gains;
use crate::error::{GeoError, Result};
use crate::geometry::{ChartPoint, CotangentCoord, TangentCoord};
use crate::morse::MorseSpec;
use crate::ode::{rk4_step, time_grid};
use crate::scalar::{lit, to_f64, Scalar};

use super::MechanicalSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct FullSpaceState<T: Scalar> {
    pub g: ChartPoint<T>,
    pub zeta: DVector<T>,
    pub zeta_i: DVector<T>,
}

impl<T: Scalar> FullSpaceState<T> {
    fn pack(&self) -> DVector<T> {
        let n = self.g.dim();
        let mut y = DVector::zeros(3 * n);
        y.rows_mut(0, n).copy_from(self.g.coords());
        y.rows_mut(n, n).copy_from(&self.zeta);
        y.rows_mut(2 * n, n).copy_from(&self.zeta_i);
        y
    }

    fn unpack(y: &DVector<T>, sys: &MechanicalSystem<T>) -> Result<Self> {
        let n = sys.dim();
        Ok(Self {
            g: ChartPoint::new(y.rows(0, n).into_owned(), sys.topology.clone())?,
            zeta: y.rows(n, n).into_owned(),
            zeta_i: y.rows(2 * n, n).into_owned(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullSpaceTrajectory<T: Scalar> {
    pub times: Vec<T>,
    pub states: Vec<FullSpaceState<T>>,
    /// `‖P_D⊥ ζ‖` per sample.
    pub constraint_residual: Vec<T>,
}

impl<T: Scalar> FullSpaceTrajectory<T> {
    pub fn max_constraint_residual(&self) -> T {
        self.constraint_residual
            .iter()
            .fold(T::zero(), |m, &r| m.max(r))
    }
}

fn metric_inverse<T: Scalar>(m: DMatrix<T>) -> Result<DMatrix<T>> {
    let eig = m.clone().symmetric_eigenvalues();
    let min = eig.min();
    if min <= lit::<T>(1e-12) * eig.max().max(T::one()) {
        return Err(GeoError::DegenerateMetric {
            min_eigenvalue: to_f64(min),
        });
    }
    m.try_inverse().ok_or(GeoError::DegenerateMetric {
        min_eigenvalue: to_f64(min),
    })
}

/// Chart acceleration `ζ̇` under `γ` plus the constraint force.
pub fn full_space_accel<T: Scalar>(
    sys: &MechanicalSystem<T>,
    g: &ChartPoint<T>,
    zeta: &DVector<T>,
    gamma_applied: &CotangentCoord<T>,
) -> Result<DVector<T>> {
    let inv = metric_inverse(sys.metric.eval(g))?;
    let tz = TangentCoord(zeta.clone());
    let lambda = constraint_force_unchecked(&sys.metric, &sys.dist, g, &tz, gamma_applied)?;
    let chr = sys.christoffel_at(g)?;
    Ok(inv * (&gamma_applied.0 + lambda.0) - chr.contract(zeta, zeta))
}

/// Chart rate of `ζ_I` from `𝕀∇_ζ ζ_I = P_D* dV − (∇_ζ P_D*⊥)𝕀ζ_I`.
pub fn full_space_integral_rate<T: Scalar>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    g: &ChartPoint<T>,
    zeta: &DVector<T>,
    zeta_i: &DVector<T>,
) -> Result<DVector<T>> {
    let m = sys.metric.eval(g);
    let frame = sys.frame(g)?;
    let p = frame.projectors();
    let nabla = nabla_projector(&sys.metric, &sys.dist, g, &TangentCoord(zeta.clone()))?;
    let rhs = &p.p_dstar * morse.differential(g).0 - nabla * (&m * zeta_i);
    let chr = sys.christoffel_at(g)?;
    Ok(metric_inverse(m)? * rhs - chr.contract(zeta, zeta_i))
}

/// The PID covector `−k_p P_D* dV − k_d 𝕀ζ − k_i 𝕀ζ_I` in full-space form.
pub fn full_space_pid_force<T: Scalar>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    gains: &Gains<T>,
    state: &FullSpaceState<T>,
) -> Result<CotangentCoord<T>> {
    let frame = sys.frame(&state.g)?;
    let p = frame.projectors();
    let dv = morse.differential(&state.g).0;
    Ok(CotangentCoord(
        -(&p.p_dstar * dv) * gains.kp
            - &frame.metric * (&state.zeta * gains.kd + &state.zeta_i * gains.ki),
    ))
}

/// RK4 integration of the full-space closed loop under an arbitrary force law.
pub fn integrate_full_space_with<T, F>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    force: F,
    state0: &FullSpaceState<T>,
    t_end: T,
    dt: T,
) -> Result<FullSpaceTrajectory<T>>
where
    T: Scalar,
    F: Fn(&FullSpaceState<T>) -> Result<CotangentCoord<T>>,
{
    if !(dt > T::zero()) || !(t_end > T::zero()) {
        return Err(GeoError::InvalidParameter(
            "dt and t_end must be positive".into(),
        ));
    }
    let n = sys.dim();
    for v in [&state0.zeta, &state0.zeta_i] {
        if v.len() != n {
            return Err(GeoError::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
    }
    let residual = |s: &FullSpaceState<T>| -> Result<T> {
        let p = sys.frame(&s.g)?.projectors();
        Ok((&p.p_d_perp * &s.zeta).norm())
    };

    let grid = time_grid(t_end, dt);
    let mut out = FullSpaceTrajectory {
        times: vec![grid[0]],
        states: vec![state0.clone()],
        constraint_residual: vec![residual(state0)?],
    };
    let mut state = state0.clone();
    for w in grid.windows(2) {
        let y = rk4_step(w[0], &state.pack(), w[1] - w[0], |_, y| {
            let s = FullSpaceState::unpack(y, sys)?;
            let gamma = force(&s)?;
            let mut d = DVector::zeros(3 * n);
            d.rows_mut(0, n).copy_from(&s.zeta);
            d.rows_mut(n, n)
                .copy_from(&full_space_accel(sys, &s.g, &s.zeta, &gamma)?);
            d.rows_mut(2 * n, n).copy_from(&full_space_integral_rate(
                sys, morse, &s.g, &s.zeta, &s.zeta_i,
            )?);
            Ok::<_, GeoError>(d)
        })?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(GeoError::NonFinite { time: to_f64(w[1]) });
        }
        state = FullSpaceState::unpack(&y, sys)?;
        out.times.push(w[1]);
        out.constraint_residual.push(residual(&state)?);
        out.states.push(state.clone());
    }
    Ok(out)
}

/// Full-space PID closed loop.
pub fn integrate_full_space<T: Scalar>(
    sys: &MechanicalSystem<T>,
    morse: &MorseSpec<T>,
    gains: &Gains<T>,
    state0: &FullSpaceState<T>,
    t_end: T,
    dt: T,
) -> Result<FullSpaceTrajectory<T>> {
    integrate_full_space_with(
        sys,
        morse,
        |s| full_space_pid_force(sys, morse, gains, s),
        state0,
        t_end,
        dt,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::LyapunovCoeffs;
    use crate::dynamics::{integrate, ClosedLoopState};
    use crate::systems;

    #[test]
    fn constant_force_matches_reduced_path() {
        let sys = systems::unicycle::<f64>();
        let morse = systems::unicycle_morse::<f64>();
        let g0 = sys.point(&[0.2, -0.4, 0.9]).unwrap();
        let u0 = DVector::from_vec(vec![0.3, 0.8]);
        let b0 = sys.dist.basis(&g0);
        // push along the second basis covector 𝕀B e₂ at the initial point
        let gamma = CotangentCoord(b0.column(1).into_owned());

        let full0 = FullSpaceState {
            g: g0.clone(),
            zeta: &b0 * &u0,
            zeta_i: DVector::zeros(3),
        };
        let full =
            integrate_full_space_with(&sys, &morse, |_| Ok(gamma.clone()), &full0, 1.0, 1e-4)
                .unwrap();

        let mut s = ClosedLoopState::new(g0, u0, DVector::zeros(2));
        let h = 1e-4;
        for _ in 0..10_000 {
            let k = |st: &ClosedLoopState<f64>| -> (DVector<f64>, DVector<f64>) {
                let a = super::super::reduced_accel(&sys, &st.g, &st.u, &gamma).unwrap();
                (sys.dist.basis(&st.g) * &st.u, a)
            };
            let step = |st: &ClosedLoopState<f64>, dg: &DVector<f64>, du: &DVector<f64>, c: f64| {
                ClosedLoopState::new(st.g.displaced(&(dg * c)), &st.u + du * c, st.w.clone())
            };
            let (g1, u1) = k(&s);
            let (g2, u2) = k(&step(&s, &g1, &u1, h / 2.0));
            let (g3, u3) = k(&step(&s, &g2, &u2, h / 2.0));
            let (g4, u4) = k(&step(&s, &g3, &u3, h));
            let dg = (g1 + g2 * 2.0 + g3 * 2.0 + g4) / 6.0;
            let du = (u1 + u2 * 2.0 + u3 * 2.0 + u4) / 6.0;
            s = step(&s, &dg, &du, h);
        }
        let last = full.states.last().unwrap();
        assert!(last.g.distance(&s.g) < 1e-6, "{:?} vs {:?}", last.g, s.g);
        assert!((&last.zeta - sys.dist.basis(&s.g) * &s.u).amax() < 1e-6);
    }

    #[test]
    fn full_space_pid_agrees_and_drifts_little() {
        let sys = systems::unicycle::<f64>();
        let morse = systems::unicycle_morse::<f64>();
        let gains = systems::unicycle_gains::<f64>();
        let g0 = systems::unicycle_initial::<f64>();
        let full0 = FullSpaceState {
            g: g0.clone(),
            zeta: DVector::zeros(3),
            zeta_i: DVector::zeros(3),
        };
        let full = integrate_full_space(&sys, &morse, &gains, &full0, 2.0, 1e-3).unwrap();
        assert!(full.max_constraint_residual() < 1e-6);

        let red = integrate(
            &sys,
            &morse,
            &gains,
            &LyapunovCoeffs::zero(),
            &ClosedLoopState::at_rest(g0, 2),
            2.0,
            1e-3,
        )
        .unwrap();
        let (a, b) = (full.states.last().unwrap(), red.final_state());
        assert!(a.g.distance(&b.g) < 1e-6);
        assert!((&a.zeta_i - sys.dist.basis(&b.g) * &b.w).amax() < 1e-6);
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let metric = crate::geometry::MetricField::constant(DMatrix::from_diagonal(
            &DVector::from_vec(vec![1.0, 0.0]),
        ));
        let dist = crate::constraint::DistributionField::constant(DMatrix::from_column_slice(
            2,
            1,
            &[1.0, 0.0],
        ));
        let sys =
            MechanicalSystem::new("flat", systems::euclidean_topology(2), metric, dist).unwrap();
        let g = sys.point(&[0.0, 0.0]).unwrap();
        let err =
            full_space_accel(&sys, &g, &DVector::zeros(2), &CotangentCoord::zeros(2)).unwrap_err();
        assert!(matches!(err, GeoError::DegenerateMetric { .. }));
    }
}
