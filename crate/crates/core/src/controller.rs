//! PID force law, gain certification and the classical Euclidean design.

use nalgebra::{DVector, Matrix3};

use crate::constraint::ConstraintFrame;
use crate::dynamics::{ClosedLoopState, MechanicalSystem};
use crate::error::{GeoError, Result};
use crate::geometry::{ChartPoint, CotangentCoord, TangentCoord};
use crate::morse::MorseSpec;
use crate::ode::{rk4_step, time_grid};
use crate::scalar::{lit, to_f64, Scalar};

/// Smallest eigenvalue accepted as positive definite.
pub const PD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains<T: Scalar> {
    pub kp: T,
    pub kd: T,
    pub ki: T,
}

impl<T: Scalar> Gains<T> {
    /// Any values are accepted; the certificate functions judge them.
    pub fn new(kp: T, kd: T, ki: T) -> Self {
        Self { kp, kd, ki }
    }

    pub fn is_positive(&self) -> bool {
        self.kp > T::zero() && self.kd > T::zero() && self.ki > T::zero()
    }
}

/// Cross-term weights of the Lyapunov function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCoeffs<T: Scalar> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub sigma: T,
}

impl<T: Scalar> LyapunovCoeffs<T> {
    /// `α = k_I/k_D²`, `β = k_I/k_D`, `γ = (k_I² + k_I k_P k_D)/k_D²`, `σ = 2κ k_I`.
    ///
    /// With `k_D = 0` every weight except `σ` is set to zero.
    pub fn design(gains: &Gains<T>, kappa: T) -> Self {
        let Gains { kp, kd, ki } = *gains;
        let sigma = (kappa + kappa) * ki;
        if kd.is_zero() {
            return Self {
                alpha: T::zero(),
                beta: T::zero(),
                gamma: T::zero(),
                sigma,
            };
        }
        let kd2 = kd * kd;
        Self {
            alpha: ki / kd2,
            beta: ki / kd,
            gamma: (ki * ki + ki * kp * kd) / kd2,
            sigma,
        }
    }

    pub fn zero() -> Self {
        Self {
            alpha: T::zero(),
            beta: T::zero(),
            gamma: T::zero(),
            sigma: T::zero(),
        }
    }
}

pub(crate) fn pid_force_in<T: Scalar>(
    frame: &ConstraintFrame<T>,
    morse: &MorseSpec<T>,
    gains: &Gains<T>,
    state: &ClosedLoopState<T>,
) -> DVector<T> {
    let p = frame.projectors();
    let dv = morse.differential(&state.g).0;
    let v = &state.u * gains.kd + &state.w * gains.ki;
    -(&p.p_dstar * dv) * gains.kp - &frame.metric * (&frame.basis * v)
}

/// `γ = −k_p P_D* dV − k_d 𝕀ζ_E − k_i 𝕀ζ_I` (regulation, so no feedforward).
pub fn pid_force<T: Scalar>(
    morse: &MorseSpec<T>,
    sys: &MechanicalSystem<T>,
    gains: &Gains<T>,
    state: &ClosedLoopState<T>,
) -> Result<CotangentCoord<T>> {
    let frame = sys.frame(&state.g)?;
    for v in [&state.u, &state.w] {
        if v.len() != sys.rank() {
            return Err(GeoError::DimensionMismatch {
                expected: sys.rank(),
                found: v.len(),
            });
        }
    }
    Ok(CotangentCoord(pid_force_in(&frame, morse, gains, state)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn from_margins<T: Scalar>(margins: &[T]) -> Self {
        if margins.iter().all(|&m| m > T::zero()) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// Slack of each gain inequality of the constrained stability theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricMargins<T: Scalar> {
    /// `k_D`
    pub kd: T,
    /// `k_I`
    pub ki_positive: T,
    /// `k_D³(1 − δ²)/μ − k_I`
    pub ki_upper: T,
    /// `k_P − max[2κk_D², (λk_I²/2k_D⁴)(1 + √(1 + (4k_D³/λk_I³)(k_I² + 4κ²k_D⁶)))]`
    pub kp: T,
}

impl<T: Scalar> GeometricMargins<T> {
    pub fn named(&self) -> [(&'static str, T); 4] {
        [
            ("kd > 0", self.kd),
            ("ki > 0", self.ki_positive),
            ("ki < kd^3 (1 - delta^2) / mu", self.ki_upper),
            ("kp > kp_bound", self.kp),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainCertificate<T: Scalar> {
    pub gains: Gains<T>,
    pub kappa: T,
    pub delta: T,
    pub lambda: T,
    pub mu: T,
    /// `k_D³(1 − δ²)/μ`
    pub ki_bound: T,
    /// The right-hand side of the `k_P` inequality (infinite if `k_D` or `k_I` vanish).
    pub kp_bound: T,
    pub margins: GeometricMargins<T>,
    pub verdict: Verdict,
}

impl<T: Scalar> GainCertificate<T> {
    /// Names of the violated inequalities.
    pub fn violations(&self) -> Vec<&'static str> {
        self.margins
            .named()
            .iter()
            .filter(|(_, m)| !(*m > T::zero()))
            .map(|(n, _)| *n)
            .collect()
    }
}

fn positive_param<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(GeoError::InvalidParameter(format!(
            "{name} must be positive, got {}",
            to_f64(v)
        )))
    }
}

/// Evaluates the gain inequalities of the constrained stability theorem.
pub fn certify_geometric<T: Scalar>(
    gains: &Gains<T>,
    lambda: T,
    mu: T,
    kappa: T,
) -> Result<GainCertificate<T>> {
    positive_param("lambda", lambda)?;
    positive_param("mu", mu)?;
    let upper = lit::<T>(2.0) / mu;
    if !(kappa > T::zero() && kappa < upper) {
        return Err(GeoError::InvalidParameter(format!(
            "kappa must lie in (0, {}), got {}",
            to_f64(upper),
            to_f64(kappa)
        )));
    }
    let Gains { kp, kd, ki } = *gains;
    let delta = kappa * mu - T::one();
    let kd3 = kd * kd * kd;
    let ki_bound = kd3 * (T::one() - delta * delta) / mu;

    let two: T = lit(2.0);
    let four: T = lit(4.0);
    let kp_bound = if kd > T::zero() && ki > T::zero() {
        let first = two * kappa * kd * kd;
        let kd4 = kd3 * kd;
        let kd6 = kd3 * kd3;
        let inner = T::one()
            + four * kd3 / (lambda * ki * ki * ki) * (ki * ki + four * kappa * kappa * kd6);
        let second = lambda * ki * ki / (two * kd4) * (T::one() + inner.sqrt());
        first.max(second)
    } else {
        lit(f64::INFINITY)
    };

    let margins = GeometricMargins {
        kd,
        ki_positive: ki,
        ki_upper: ki_bound - ki,
        kp: kp - kp_bound,
    };
    let verdict = Verdict::from_margins(&margins.named().map(|(_, m)| m));
    Ok(GainCertificate {
        gains: *gains,
        kappa,
        delta,
        lambda,
        mu,
        ki_bound,
        kp_bound,
        margins,
        verdict,
    })
}

/// Slack of the three classical conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuclideanMargins<T: Scalar> {
    /// `k_I`
    pub ki: T,
    /// `k_D³ − k_I/(1 − δ²)`
    pub kd: T,
    /// `k_P − max(2Kk_D², √((k_I³ + 4K²k_Ik_D⁶ + 4Kk_I²k_D³)/k_D⁵))`
    pub kp: T,
}

impl<T: Scalar> EuclideanMargins<T> {
    pub fn named(&self) -> [(&'static str, T); 3] {
        [
            ("ki > 0", self.ki),
            ("kd^3 > ki / (1 - delta^2)", self.kd),
            ("kp > kp_bound", self.kp),
        ]
    }
}

/// Lyapunov design for the unit-mass double integrator with integral action,
/// state `x = (e, ė, z)` and `W = ½xᵀPx`, `Ẇ = −½xᵀQx`.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanDesign<T: Scalar> {
    pub gains: Gains<T>,
    pub k: T,
    pub coeffs: LyapunovCoeffs<T>,
    pub p: Matrix3<T>,
    pub q: Matrix3<T>,
    pub p_min_eigenvalue: T,
    pub q_min_eigenvalue: T,
    pub margins: EuclideanMargins<T>,
    /// Verdict of the three gain conditions.
    pub verdict: Verdict,
}

impl<T: Scalar> EuclideanDesign<T> {
    pub fn p_positive_definite(&self) -> bool {
        self.p_min_eigenvalue > lit(PD_TOL)
    }

    pub fn q_positive_definite(&self) -> bool {
        self.q_min_eigenvalue > lit(PD_TOL)
    }

    /// `γ − β²`, which equals `k_I k_P / k_D` by construction.
    pub fn gamma_minus_beta_sq(&self) -> T {
        self.coeffs.gamma - self.coeffs.beta * self.coeffs.beta
    }

    /// Closed-loop matrix of `(e, ė, z)`.
    pub fn system_matrix(&self) -> Matrix3<T> {
        let Gains { kp, kd, ki } = self.gains;
        let (z, o) = (T::zero(), T::one());
        Matrix3::new(z, o, z, -kp, -kd, -ki, o, z, z)
    }

    pub fn lyapunov(&self, e: T, edot: T, z: T) -> T {
        let x = nalgebra::Vector3::new(e, edot, z);
        x.dot(&(self.p * x)) * lit(0.5)
    }
}

/// Assembles `P` and `Q` for the gains and `σ = 2Kk_I`.
pub fn euclidean_design<T: Scalar>(gains: &Gains<T>, k: T) -> Result<EuclideanDesign<T>> {
    if !(k > T::zero() && k < lit(2.0)) {
        return Err(GeoError::InvalidParameter(format!(
            "K must lie in (0, 2), got {}",
            to_f64(k)
        )));
    }
    if !gains.is_positive() {
        return Err(GeoError::InvalidParameter("gains must be positive".into()));
    }
    let Gains { kp, kd, ki } = *gains;
    let c = LyapunovCoeffs::design(gains, k);
    let LyapunovCoeffs {
        alpha,
        beta,
        gamma,
        sigma,
    } = c;
    let two: T = lit(2.0);
    let four: T = lit(4.0);

    let p = Matrix3::new(kp, alpha, sigma, alpha, T::one(), beta, sigma, beta, gamma);
    let q01 = kd * alpha - beta;
    let q02 = ki * alpha + kp * beta - gamma;
    let q12 = ki + beta * kd - sigma;
    let q = Matrix3::new(
        two * (kp * alpha - sigma),
        q01,
        q02,
        q01,
        two * (kd - alpha),
        q12,
        q02,
        q12,
        two * beta * ki,
    );

    let delta = k - T::one();
    let kd3 = kd * kd * kd;
    let kd5 = kd3 * kd * kd;
    let root =
        ((ki * ki * ki + four * k * k * ki * kd3 * kd3 + four * k * ki * ki * kd3) / kd5).sqrt();
    let margins = EuclideanMargins {
        ki,
        kd: kd3 - ki / (T::one() - delta * delta),
        kp: kp - (two * k * kd * kd).max(root),
    };
    let verdict = Verdict::from_margins(&margins.named().map(|(_, m)| m));
    Ok(EuclideanDesign {
        gains: *gains,
        k,
        coeffs: c,
        p_min_eigenvalue: p.symmetric_eigenvalues().min(),
        q_min_eigenvalue: q.symmetric_eigenvalues().min(),
        p,
        q,
        margins,
        verdict,
    })
}

/// Trajectory of `(e, ė, z)` for each coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanTrajectory<T: Scalar> {
    pub times: Vec<T>,
    pub e: Vec<DVector<T>>,
    pub edot: Vec<DVector<T>>,
    pub z: Vec<DVector<T>>,
}

/// Integrates `ë = D − k_P e − k_D ė − k_I z`, `ż = e` from `e(0) = x0`, at rest.
pub fn euclidean_simulate<T: Scalar>(
    gains: &Gains<T>,
    disturbance: &DVector<T>,
    x0: &DVector<T>,
    t_end: T,
    dt: T,
) -> Result<EuclideanTrajectory<T>> {
    let n = x0.len();
    if disturbance.len() != n {
        return Err(GeoError::DimensionMismatch {
            expected: n,
            found: disturbance.len(),
        });
    }
    if !(dt > T::zero()) || !(t_end > T::zero()) {
        return Err(GeoError::InvalidParameter(
            "dt and t_end must be positive".into(),
        ));
    }
    let Gains { kp, kd, ki } = *gains;
    let grid = time_grid(t_end, dt);
    let mut y = DVector::zeros(3 * n);
    y.rows_mut(0, n).copy_from(x0);

    let mut out = EuclideanTrajectory {
        times: Vec::with_capacity(grid.len()),
        e: Vec::with_capacity(grid.len()),
        edot: Vec::with_capacity(grid.len()),
        z: Vec::with_capacity(grid.len()),
    };
    let mut record = |t: T, y: &DVector<T>| {
        out.times.push(t);
        out.e.push(y.rows(0, n).into_owned());
        out.edot.push(y.rows(n, n).into_owned());
        out.z.push(y.rows(2 * n, n).into_owned());
    };
    record(grid[0], &y);
    for w in grid.windows(2) {
        y = rk4_step(w[0], &y, w[1] - w[0], |_, y| {
            let (e, v, z) = (y.rows(0, n), y.rows(n, n), y.rows(2 * n, n));
            let mut d = DVector::zeros(3 * n);
            d.rows_mut(0, n).copy_from(&v);
            d.rows_mut(n, n)
                .copy_from(&(disturbance - e * kp - v * kd - z * ki));
            d.rows_mut(2 * n, n).copy_from(&e);
            Ok::<_, GeoError>(d)
        })?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(GeoError::NonFinite { time: to_f64(w[1]) });
        }
        record(w[1], &y);
    }
    Ok(out)
}

/// Feedforward `F_r = ζ̇_r + 2Γ(g)(ζ_E, ζ_r) + Γ(g)(ζ_r, ζ_r)` for a reference
/// velocity `ζ_r` with rate `ζ̇_r`; valid where `Ad` is the identity.
pub fn feedforward_fr<T: Scalar>(
    sys: &MechanicalSystem<T>,
    g: &ChartPoint<T>,
    zeta_e: &TangentCoord<T>,
    zeta_r: &TangentCoord<T>,
    zeta_r_dot: &TangentCoord<T>,
) -> Result<TangentCoord<T>> {
    if !sys.is_abelian() {
        return Err(GeoError::Unsupported(format!(
            "feedforward on non-abelian system '{}'",
            sys.name
        )));
    }
    let n = sys.dim();
    for v in [&zeta_e.0, &zeta_r.0, &zeta_r_dot.0] {
        if v.len() != n {
            return Err(GeoError::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
    }
    if zeta_r.0.iter().all(|x| x.is_zero()) {
        return Ok(TangentCoord(zeta_r_dot.0.clone()));
    }
    let chr = sys.christoffel_at(g)?;
    let cross = chr.contract(&zeta_e.0, &zeta_r.0);
    Ok(TangentCoord(
        &zeta_r_dot.0 + &cross + &cross + chr.contract(&zeta_r.0, &zeta_r.0),
    ))
}
