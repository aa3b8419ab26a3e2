//! Constraint distributions, their projectors, and the constraint force.
//!
//! With a basis matrix `B(g)` whose columns span `D(g)` and the Gram matrix
//! `Bᵀ𝕀B`, the four projectors are
//!
//! ```text
//! P_D   = B (Bᵀ𝕀B)⁻¹ Bᵀ𝕀       P_D⊥  = Id − P_D      (on velocities)
//! P_D*  = 𝕀B (Bᵀ𝕀B)⁻¹ Bᵀ       P_D*⊥ = Id − P_D*     (on covectors)
//! ```
//!
//! None of them needs `𝕀` itself to be invertible, only its restriction to `D`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};
use crate::geometry::{
    christoffel, ChartPoint, CotangentCoord, MetricField, PointFn, TangentCoord, DEFAULT_FD_STEP,
};
use crate::scalar::{lit, to_f64, Scalar};

/// Relative tolerance for the `𝕀ζ ∈ D*` precondition.
pub const CONSTRAINT_TOL: f64 = 1e-6;

type DirectionalFn<T> = Arc<dyn Fn(&ChartPoint<T>, &DVector<T>) -> DMatrix<T> + Send + Sync>;

/// A constant-rank distribution given by a basis matrix field `g ↦ B(g)` (n × k).
#[derive(Clone)]
pub struct DistributionField<T: Scalar> {
    dim: usize,
    rank: usize,
    basis: PointFn<T, DMatrix<T>>,
    basis_derivative: Option<DirectionalFn<T>>,
}

impl<T: Scalar> fmt::Debug for DistributionField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistributionField")
            .field("dim", &self.dim)
            .field("rank", &self.rank)
            .field("analytic_derivative", &self.basis_derivative.is_some())
            .finish()
    }
}

impl<T: Scalar> DistributionField<T> {
    pub fn new(
        dim: usize,
        rank: usize,
        basis: impl Fn(&ChartPoint<T>) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            rank,
            basis: Arc::new(basis),
            basis_derivative: None,
        }
    }

    /// The whole tangent space, `B = Id`.
    pub fn full(dim: usize) -> Self {
        Self::constant(DMatrix::identity(dim, dim))
    }

    /// A distribution whose basis does not depend on the configuration.
    pub fn constant(basis: DMatrix<T>) -> Self {
        let (n, k) = basis.shape();
        Self::new(n, k, move |_| basis.clone())
            .with_basis_derivative(move |_, _| DMatrix::zeros(n, k))
    }

    /// Supplies the directional derivative `(D_X B)(g)` in closed form.
    pub fn with_basis_derivative(
        mut self,
        f: impl Fn(&ChartPoint<T>, &DVector<T>) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        self.basis_derivative = Some(Arc::new(f));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn basis(&self, g: &ChartPoint<T>) -> DMatrix<T> {
        (self.basis)(g)
    }

    /// Directional derivative of the basis matrix along `x`.
    pub fn basis_derivative(&self, g: &ChartPoint<T>, x: &DVector<T>) -> DMatrix<T> {
        if let Some(f) = &self.basis_derivative {
            return f(g, x);
        }
        directional_fd(g, x, lit(DEFAULT_FD_STEP), |p| self.basis(p))
            .unwrap_or_else(|| DMatrix::zeros(self.dim, self.rank))
    }
}

/// Central difference of a matrix field along `x`, or `None` when `x = 0`.
pub(crate) fn directional_fd<T: Scalar>(
    g: &ChartPoint<T>,
    x: &DVector<T>,
    h: T,
    f: impl Fn(&ChartPoint<T>) -> DMatrix<T>,
) -> Option<DMatrix<T>> {
    let norm = x.norm();
    if norm.is_zero() {
        return None;
    }
    let step = x * (h / norm);
    let plus = f(&g.displaced(&step));
    let minus = f(&g.displaced(&-&step));
    Some((plus - minus) * (norm / (h + h)))
}

/// Basis, metric and Gram data at one point, validated once and shared by the
/// projector, dynamics and Lyapunov computations.
#[derive(Debug, Clone)]
pub struct ConstraintFrame<T: Scalar> {
    pub basis: DMatrix<T>,
    pub metric: DMatrix<T>,
    pub gram: DMatrix<T>,
    pub gram_inv: DMatrix<T>,
}

impl<T: Scalar> ConstraintFrame<T> {
    pub fn at(
        metric: &MetricField<T>,
        dist: &DistributionField<T>,
        g: &ChartPoint<T>,
    ) -> Result<Self> {
        let n = metric.dim();
        if dist.dim() != n || g.dim() != n {
            return Err(GeoError::DimensionMismatch {
                expected: n,
                found: if dist.dim() != n { dist.dim() } else { g.dim() },
            });
        }
        let basis = dist.basis(g);
        if basis.nrows() != n || basis.ncols() != dist.rank() {
            return Err(GeoError::DegenerateConstraint(format!(
                "basis has shape {}x{}, expected {}x{}",
                basis.nrows(),
                basis.ncols(),
                n,
                dist.rank()
            )));
        }
        if !basis.iter().all(|x| x.is_finite()) {
            return Err(GeoError::DegenerateConstraint(
                "basis has non-finite entries".into(),
            ));
        }
        let sv = basis.clone().singular_values();
        let (smin, smax) = (sv.min(), sv.max());
        if smax.is_zero() || smin <= lit::<T>(1e-8) * smax {
            return Err(GeoError::DegenerateConstraint(format!(
                "basis rank deficient (σ_min {:e}, σ_max {:e})",
                to_f64(smin),
                to_f64(smax)
            )));
        }
        let metric_m = metric.eval(g);
        let gram = basis.transpose() * &metric_m * &basis;
        let eig = gram.clone().symmetric_eigenvalues();
        let (emin, emax) = (eig.min(), eig.max());
        if emin <= T::zero() || emax / emin >= lit(1e10) {
            return Err(GeoError::DegenerateConstraint(format!(
                "metric restricted to the distribution is not injective (Gram eigenvalues {:e}..{:e})",
                to_f64(emin),
                to_f64(emax)
            )));
        }
        let gram_inv = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| GeoError::DegenerateConstraint("Gram matrix not invertible".into()))?;
        Ok(Self {
            basis,
            metric: metric_m,
            gram,
            gram_inv,
        })
    }

    /// Reduced coordinates of the `D*`-component of a covector: `(Bᵀ𝕀B)⁻¹Bᵀγ`.
    pub fn reduce_covector(&self, gamma: &DVector<T>) -> DVector<T> {
        &self.gram_inv * (self.basis.transpose() * gamma)
    }

    pub fn projectors(&self) -> ProjectorSet<T> {
        let n = self.basis.nrows();
        let id = DMatrix::<T>::identity(n, n);
        let b_ginv = &self.basis * &self.gram_inv;
        let p_d = &b_ginv * self.basis.transpose() * &self.metric;
        let p_dstar = &self.metric * &b_ginv * self.basis.transpose();
        ProjectorSet {
            p_d_perp: &id - &p_d,
            p_dstar_perp: &id - &p_dstar,
            p_d,
            p_dstar,
        }
    }
}

/// The tangent projectors `P_D`, `P_D⊥` and cotangent projectors `P_D*`, `P_D*⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet<T: Scalar> {
    pub p_d: DMatrix<T>,
    pub p_d_perp: DMatrix<T>,
    pub p_dstar: DMatrix<T>,
    pub p_dstar_perp: DMatrix<T>,
}

pub fn projectors<T: Scalar>(
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    g: &ChartPoint<T>,
) -> Result<ProjectorSet<T>> {
    Ok(ConstraintFrame::at(metric, dist, g)?.projectors())
}

/// Covariant derivative `∇_X P_D*⊥` of the cotangent projector, viewed as an
/// endomorphism field of `T*G`.
///
/// In matrix form `(∇_X P) = ∂_X P − AᵀP + PAᵀ` with `A[i][m] = Γⁱₖₘ Xᵏ`; the
/// chart derivative `∂_X P` is a central difference with step `h`.
pub fn nabla_projector<T: Scalar>(
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    g: &ChartPoint<T>,
    x: &TangentCoord<T>,
) -> Result<DMatrix<T>> {
    nabla_projector_with_step(metric, dist, g, x, lit(DEFAULT_FD_STEP))
}

pub fn nabla_projector_with_step<T: Scalar>(
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    g: &ChartPoint<T>,
    x: &TangentCoord<T>,
    h: T,
) -> Result<DMatrix<T>> {
    let n = metric.dim();
    let here = projectors(metric, dist, g)?;
    if x.0.norm().is_zero() {
        return Ok(DMatrix::zeros(n, n));
    }

    let norm = x.0.norm();
    let step = &x.0 * (h / norm);
    let plus = projectors(metric, dist, &g.displaced(&step))?.p_dstar_perp;
    let minus = projectors(metric, dist, &g.displaced(&-&step))?.p_dstar_perp;
    let mut out = (plus - minus) * (norm / (h + h));

    let gamma = christoffel(metric, g, h)?;
    if !gamma.is_zero() {
        let a_t = gamma.along(&x.0).transpose();
        let p = &here.p_dstar_perp;
        out += p * &a_t - &a_t * p;
    }
    Ok(out)
}

/// Residual `‖P_D*⊥ 𝕀ζ‖` of the velocity constraint.
pub fn constraint_residual<T: Scalar>(frame: &ConstraintFrame<T>, zeta: &DVector<T>) -> T {
    let p = frame.projectors();
    (&p.p_dstar_perp * (&frame.metric * zeta)).norm()
}

/// The constraint force `γ_λ = −P_D*⊥ γ − (∇_ζ P_D*⊥) 𝕀 ζ`.
///
/// Requires `𝕀ζ ∈ D*` to relative tolerance [`CONSTRAINT_TOL`].
pub fn constraint_force<T: Scalar>(
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    g: &ChartPoint<T>,
    zeta: &TangentCoord<T>,
    gamma_applied: &CotangentCoord<T>,
) -> Result<CotangentCoord<T>> {
    let frame = ConstraintFrame::at(metric, dist, g)?;
    let p = frame.projectors();
    let momentum = &frame.metric * &zeta.0;
    let residual = (&p.p_dstar_perp * &momentum).norm();
    if residual > lit::<T>(CONSTRAINT_TOL) * (T::one() + momentum.norm()) {
        return Err(GeoError::ConstraintViolation {
            residual: to_f64(residual),
        });
    }
    let nabla = nabla_projector(metric, dist, g, zeta)?;
    Ok(CotangentCoord(
        -(&p.p_dstar_perp * &gamma_applied.0) - nabla * momentum,
    ))
}

/// [`constraint_force`] without the membership check, for integrator stages
/// where `ζ` is only approximately in `D`.
pub(crate) fn constraint_force_unchecked<T: Scalar>(
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    g: &ChartPoint<T>,
    zeta: &TangentCoord<T>,
    gamma_applied: &CotangentCoord<T>,
) -> Result<CotangentCoord<T>> {
    let frame = ConstraintFrame::at(metric, dist, g)?;
    let p = frame.projectors();
    let momentum = &frame.metric * &zeta.0;
    let nabla = nabla_projector(metric, dist, g, zeta)?;
    Ok(CotangentCoord(
        -(&p.p_dstar_perp * &gamma_applied.0) - nabla * momentum,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Topology;
    use crate::systems;
    use std::f64::consts::PI;

    fn robot_point(x: f64, y: f64, th: f64) -> ChartPoint<f64> {
        ChartPoint::from_slice(&[x, y, th], systems::unicycle_topology()).unwrap()
    }

    fn assert_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        assert!((a - b).amax() < tol, "{a} vs {b}");
    }

    #[test]
    fn robot_perp_projector_at_zero_and_quarter_turn() {
        let (metric, dist) = systems::unicycle_geometry::<f64>();
        let p = projectors(&metric, &dist, &robot_point(0.0, 0.0, 0.0)).unwrap();
        assert_close(
            &p.p_d_perp,
            &DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 0.0])),
            1e-14,
        );
        let p = projectors(&metric, &dist, &robot_point(0.0, 0.0, PI / 2.0)).unwrap();
        assert_close(
            &p.p_d_perp,
            &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0])),
            1e-14,
        );
    }

    #[test]
    fn unconstrained_projectors_are_trivial() {
        let metric = MetricField::<f64>::identity(3);
        let dist = DistributionField::full(3);
        let p = projectors(&metric, &dist, &robot_point(1.0, 2.0, 3.0)).unwrap();
        let id = DMatrix::identity(3, 3);
        assert_close(&p.p_d, &id, 1e-15);
        assert_close(&p.p_dstar, &id, 1e-15);
        assert!(p.p_d_perp.amax() < 1e-15 && p.p_dstar_perp.amax() < 1e-15);
    }

    #[test]
    fn rank_deficient_basis_is_rejected() {
        let metric = MetricField::<f64>::identity(3);
        let dist = DistributionField::new(3, 2, |_| {
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0])
        });
        assert!(matches!(
            projectors(&metric, &dist, &robot_point(0.0, 0.0, 0.0)),
            Err(GeoError::DegenerateConstraint(_))
        ));
    }

    #[test]
    fn degenerate_metric_injective_on_distribution_is_accepted() {
        // 𝕀 = diag(1, 0) is singular but injective on span{(1, 0)}.
        let topo: Arc<[Topology]> = Arc::from(vec![Topology::Linear, Topology::Linear]);
        let metric =
            MetricField::<f64>::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let g = ChartPoint::from_slice(&[0.0, 0.0], topo).unwrap();
        let ok = DistributionField::constant(DMatrix::from_row_slice(2, 1, &[1.0, 0.0]));
        let p = projectors(&metric, &ok, &g).unwrap();
        assert_close(&(&p.p_d * &p.p_d), &p.p_d, 1e-14);
        let bad = DistributionField::constant(DMatrix::from_row_slice(2, 1, &[0.0, 1.0]));
        assert!(projectors(&metric, &bad, &g).is_err());
    }

    #[test]
    fn nabla_projector_matches_hand_formula() {
        let (metric, dist) = systems::unicycle_geometry::<f64>();
        let th = PI / 4.0;
        let x = TangentCoord::from_slice(&[0.0, 0.0, 1.0]);
        let got = nabla_projector(&metric, &dist, &robot_point(0.0, 0.0, th), &x).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_close(&got, &expected, 1e-9);

        // finite difference of the closed-form P_D⊥(θ) = v vᵀ along θ
        let perp = |t: f64| {
            let v = DVector::from_vec(vec![t.sin(), -t.cos(), 0.0]);
            &v * v.transpose()
        };
        let h = 1e-6;
        let fd = (perp(th + h) - perp(th - h)) / (2.0 * h);
        assert_close(&got, &fd, 1e-8);
    }

    #[test]
    fn nabla_projector_trivial_cases() {
        let (metric, dist) = systems::unicycle_geometry::<f64>();
        let g = robot_point(0.5, 0.5, 1.0);
        assert_eq!(
            nabla_projector(&metric, &dist, &g, &TangentCoord::zeros(3)).unwrap(),
            DMatrix::zeros(3, 3)
        );

        let constant = DistributionField::constant(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        ));
        let x = TangentCoord::from_slice(&[0.3, -1.0, 2.0]);
        assert!(nabla_projector(&metric, &constant, &g, &x).unwrap().amax() < 1e-12);
    }

    #[test]
    fn centripetal_force_on_circle() {
        let (r, omega, m) = (1.5, 2.0, 1.0);
        let sys = systems::circle_particle::<f64>(m);
        let g = ChartPoint::from_slice(&[r, 0.0], sys.topology.clone()).unwrap();
        let zeta = TangentCoord::from_slice(&[0.0, r * omega]);
        let f =
            constraint_force(&sys.metric, &sys.dist, &g, &zeta, &CotangentCoord::zeros(2)).unwrap();
        assert!((f.0.norm() - m * r * omega * omega).abs() < 6e-6);
        // pointing towards the centre
        assert!(f.0[0] < 0.0);
    }

    #[test]
    fn zero_motion_zero_force() {
        let (metric, dist) = systems::unicycle_geometry::<f64>();
        let f = constraint_force(
            &metric,
            &dist,
            &robot_point(1.0, 2.0, 0.3),
            &TangentCoord::zeros(3),
            &CotangentCoord::zeros(3),
        )
        .unwrap();
        assert_eq!(f.0.norm(), 0.0);
    }

    #[test]
    fn robot_constraint_force_matches_flow_oracle() {
        let (metric, dist) = systems::unicycle_geometry::<f64>();
        let th = PI / 4.0;
        let zeta = DVector::from_vec(vec![th.cos(), th.sin(), 1.0]);
        let f = constraint_force(
            &metric,
            &dist,
            &robot_point(0.0, 0.0, th),
            &TangentCoord(zeta.clone()),
            &CotangentCoord::zeros(3),
        )
        .unwrap();
        // d/dt P_D⊥(θ(t)) ζ along the flow with θ̇ = 1, flat metric
        let perp = |t: f64| {
            let v = DVector::from_vec(vec![t.sin(), -t.cos(), 0.0]);
            &v * v.transpose()
        };
        let h = 1e-6;
        let oracle = -((perp(th + h) - perp(th - h)) / (2.0 * h)) * &zeta;
        assert!((&f.0 - &oracle).amax() < 1e-8);
        // closed form printed for the robot: (−2θ̇ẋ s c + θ̇ẏ(c²−s²), θ̇ẋ(c²−s²) + 2θ̇ẏ s c, 0)
        let (s, c) = th.sin_cos();
        let (xd, yd) = (zeta[0], zeta[1]);
        let closed = DVector::from_vec(vec![
            -2.0 * xd * s * c + yd * (c * c - s * s),
            xd * (c * c - s * s) + 2.0 * yd * s * c,
            0.0,
        ]);
        assert!((&f.0 - closed).amax() < 1e-8);
    }

    #[test]
    fn constraint_violation_is_reported() {
        let (metric, dist) = systems::unicycle_geometry::<f64>();
        let sideways = TangentCoord::from_slice(&[0.0, 1.0, 0.0]);
        let err = constraint_force(
            &metric,
            &dist,
            &robot_point(0.0, 0.0, 0.0),
            &sideways,
            &CotangentCoord::zeros(3),
        )
        .unwrap_err();
        match err {
            GeoError::ConstraintViolation { residual } => assert!((residual - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}
