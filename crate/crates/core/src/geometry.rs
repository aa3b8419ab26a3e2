//! Chart representation of product groups `ℝᵃ × (S¹)ᵇ`, metric fields, and the
//! Levi-Civita connection in coordinates.
//!
//! Every group handled here is abelian and represented in a single chart that is
//! global up to the `2π` wrap of angular coordinates. Left translation therefore
//! acts as the identity on velocity components, and a body velocity `g⁻¹ġ` is
//! simply the chart derivative `ġ`.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};
use crate::scalar::{lit, to_f64, two_pi, Scalar};

/// Central-difference step used by every finite-difference routine unless overridden.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Kind of a chart coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    Linear,
    Angular,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle<T: Scalar>(x: T) -> T {
    let tau = two_pi::<T>();
    let mut r = x % tau;
    if r < T::zero() {
        r += tau;
    }
    // `-ε % τ + τ` can round up to exactly τ
    if r >= tau {
        r = T::zero();
    }
    r
}

/// Signed difference `a - b` of two angles, mapped into `(-π, π]`.
pub fn angle_diff<T: Scalar>(a: T, b: T) -> T {
    let d = wrap_angle(a - b);
    if d > T::pi() {
        d - two_pi::<T>()
    } else {
        d
    }
}

/// A configuration in the chart. Angular components are kept in `[0, 2π)`.
#[derive(Clone, PartialEq)]
pub struct ChartPoint<T: Scalar> {
    coords: DVector<T>,
    topology: Arc<[Topology]>,
}

impl<T: Scalar> ChartPoint<T> {
    pub fn new(coords: DVector<T>, topology: impl Into<Arc<[Topology]>>) -> Result<Self> {
        let topology = topology.into();
        if coords.len() != topology.len() {
            return Err(GeoError::DimensionMismatch {
                expected: topology.len(),
                found: coords.len(),
            });
        }
        Ok(Self::wrapped(coords, topology))
    }

    pub fn from_slice(coords: &[T], topology: impl Into<Arc<[Topology]>>) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords), topology)
    }

    /// The group identity (all zeros).
    pub fn identity(topology: impl Into<Arc<[Topology]>>) -> Self {
        let topology = topology.into();
        Self {
            coords: DVector::zeros(topology.len()),
            topology,
        }
    }

    fn wrapped(mut coords: DVector<T>, topology: Arc<[Topology]>) -> Self {
        for (c, t) in coords.iter_mut().zip(topology.iter()) {
            if *t == Topology::Angular {
                *c = wrap_angle(*c);
            }
        }
        Self { coords, topology }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<T> {
        &self.coords
    }

    pub fn topology(&self) -> &Arc<[Topology]> {
        &self.topology
    }

    pub fn get(&self, i: usize) -> T {
        self.coords[i]
    }

    /// The point displaced by `delta` in chart coordinates (angles re-wrapped).
    pub fn displaced(&self, delta: &DVector<T>) -> Self {
        debug_assert_eq!(delta.len(), self.dim());
        Self::wrapped(&self.coords + delta, self.topology.clone())
    }

    /// The point displaced by `h` along a single chart axis.
    pub fn offset_axis(&self, axis: usize, h: T) -> Self {
        let mut coords = self.coords.clone();
        coords[axis] += h;
        Self::wrapped(coords, self.topology.clone())
    }

    /// Chart difference `self - other`, with angular components taken as the
    /// shortest signed arc.
    pub fn chart_difference(&self, other: &Self) -> DVector<T> {
        DVector::from_iterator(
            self.dim(),
            self.coords
                .iter()
                .zip(other.coords.iter())
                .zip(self.topology.iter())
                .map(|((&a, &b), t)| match t {
                    Topology::Linear => a - b,
                    Topology::Angular => angle_diff(a, b),
                }),
        )
    }

    /// Euclidean chart distance with angles compared mod `2π`.
    pub fn distance(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for ((&a, &b), t) in self
            .coords
            .iter()
            .zip(other.coords.iter())
            .zip(self.topology.iter())
        {
            let d = match t {
                Topology::Linear => a - b,
                Topology::Angular => angle_diff(a, b),
            };
            acc += d * d;
        }
        acc.sqrt()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(GeoError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if self.topology != other.topology {
            return Err(GeoError::TopologyMismatch);
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Debug for ChartPoint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coords.iter()).finish()
    }
}

macro_rules! coord_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<T: Scalar>(pub DVector<T>);

        impl<T: Scalar> $name<T> {
            pub fn zeros(n: usize) -> Self {
                Self(DVector::zeros(n))
            }

            pub fn from_slice(v: &[T]) -> Self {
                Self(DVector::from_column_slice(v))
            }

            pub fn into_inner(self) -> DVector<T> {
                self.0
            }
        }

        impl<T: Scalar> Deref for $name<T> {
            type Target = DVector<T>;

            fn deref(&self) -> &DVector<T> {
                &self.0
            }
        }

        impl<T: Scalar> From<DVector<T>> for $name<T> {
            fn from(v: DVector<T>) -> Self {
                Self(v)
            }
        }
    };
}

coord_newtype!(
    /// Velocity components in the chart (equivalently, in the Lie algebra).
    TangentCoord
);
coord_newtype!(
    /// Force covector components in the chart.
    CotangentCoord
);

pub(crate) type PointFn<T, R> = Arc<dyn Fn(&ChartPoint<T>) -> R + Send + Sync>;

/// Christoffel symbols `Γⁱⱼₖ` at a point, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTensor<T: Scalar> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> ChristoffelTensor<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n * n],
        }
    }

    /// Builds the tensor from `f(i, j, k) = Γⁱⱼₖ`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out.data[(i * n + j) * n + k] = f(i, j, k);
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// `Γ(v, w)ⁱ = Γⁱⱼₖ vʲ wᵏ`.
    pub fn contract(&self, v: &DVector<T>, w: &DVector<T>) -> DVector<T> {
        let n = self.n;
        DVector::from_fn(n, |i, _| {
            let mut acc = T::zero();
            for j in 0..n {
                if v[j].is_zero() {
                    continue;
                }
                for k in 0..n {
                    acc += self.get(i, j, k) * v[j] * w[k];
                }
            }
            acc
        })
    }

    /// The matrix `A` with `A[i][m] = Γⁱₖₘ Xᵏ`, i.e. the connection one-form
    /// evaluated on `X`.
    pub fn along(&self, x: &DVector<T>) -> DMatrix<T> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, m| {
            let mut acc = T::zero();
            for k in 0..n {
                acc += self.get(i, k, m) * x[k];
            }
            acc
        })
    }

    /// Largest `|Γⁱⱼₖ - Γⁱₖⱼ|`.
    pub fn asymmetry(&self) -> T {
        let n = self.n;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }
}

/// A (possibly degenerate) metric tensor field `g ↦ 𝕀(g)`.
#[derive(Clone)]
pub struct MetricField<T: Scalar> {
    dim: usize,
    eval: PointFn<T, DMatrix<T>>,
    christoffel: Option<PointFn<T, ChristoffelTensor<T>>>,
}

impl<T: Scalar> fmt::Debug for MetricField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("analytic_christoffel", &self.christoffel.is_some())
            .finish()
    }
}

impl<T: Scalar> MetricField<T> {
    pub fn new(
        dim: usize,
        eval: impl Fn(&ChartPoint<T>) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
            christoffel: None,
        }
    }

    /// A metric with constant chart components; its connection is flat.
    pub fn constant(matrix: DMatrix<T>) -> Self {
        let dim = matrix.nrows();
        Self::new(dim, move |_| matrix.clone())
            .with_christoffel(move |_| ChristoffelTensor::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(DMatrix::identity(dim, dim))
    }

    /// Supplies closed-form Christoffel symbols, bypassing finite differences.
    pub fn with_christoffel(
        mut self,
        f: impl Fn(&ChartPoint<T>) -> ChristoffelTensor<T> + Send + Sync + 'static,
    ) -> Self {
        self.christoffel = Some(Arc::new(f));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_christoffel(&self) -> bool {
        self.christoffel.is_some()
    }

    pub fn eval(&self, g: &ChartPoint<T>) -> DMatrix<T> {
        (self.eval)(g)
    }

    /// Checks symmetry (to `1e-12`) and positive semidefiniteness (eigenvalues
    /// `≥ -1e-10`) at `g`.
    pub fn validate_at(&self, g: &ChartPoint<T>) -> Result<()> {
        let m = self.eval(g);
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(GeoError::DimensionMismatch {
                expected: self.dim,
                found: m.nrows(),
            });
        }
        let asym = (&m - m.transpose()).amax();
        if asym > lit(1e-12) {
            return Err(GeoError::InvalidParameter(format!(
                "metric not symmetric (asymmetry {:e})",
                to_f64(asym)
            )));
        }
        let min = m.symmetric_eigenvalues().min();
        if min < lit(-1e-10) {
            return Err(GeoError::InvalidParameter(format!(
                "metric not positive semidefinite (eigenvalue {:e})",
                to_f64(min)
            )));
        }
        Ok(())
    }
}

fn check_dim<T: Scalar>(expected: usize, v: &DVector<T>) -> Result<()> {
    if v.len() != expected {
        return Err(GeoError::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// Group product: linear components add, angular components add mod `2π`.
pub fn group_compose<T: Scalar>(a: &ChartPoint<T>, b: &ChartPoint<T>) -> Result<ChartPoint<T>> {
    a.check_compatible(b)?;
    Ok(ChartPoint::wrapped(
        &a.coords + &b.coords,
        a.topology.clone(),
    ))
}

pub fn group_inverse<T: Scalar>(a: &ChartPoint<T>) -> ChartPoint<T> {
    ChartPoint::wrapped(-&a.coords, a.topology.clone())
}

/// Left-invariant tracking error `E = g_r⁻¹ ∘ g`.
pub fn tracking_error<T: Scalar>(g_r: &ChartPoint<T>, g: &ChartPoint<T>) -> Result<ChartPoint<T>> {
    group_compose(&group_inverse(g_r), g)
}

/// Christoffel symbols of the Levi-Civita connection at `g`.
///
/// Analytic symbols take precedence. Otherwise the metric derivatives are taken
/// by central differences with step `h`, which requires `𝕀(g)` to be invertible.
pub fn christoffel<T: Scalar>(
    metric: &MetricField<T>,
    g: &ChartPoint<T>,
    h: T,
) -> Result<ChristoffelTensor<T>> {
    check_dim(metric.dim, g.coords())?;
    if let Some(f) = &metric.christoffel {
        return Ok(f(g));
    }
    let n = metric.dim;
    let m = metric.eval(g);
    let eig = m.clone().symmetric_eigenvalues();
    let (min, max) = (eig.min(), eig.max());
    if min <= lit::<T>(1e-12) * max.max(T::one()) {
        return Err(GeoError::DegenerateMetric {
            min_eigenvalue: to_f64(min),
        });
    }
    let inv = m.try_inverse().ok_or(GeoError::DegenerateMetric {
        min_eigenvalue: to_f64(min),
    })?;

    // dg[l][(a, b)] = ∂_l g_ab
    let two_h = h + h;
    let dg: Vec<DMatrix<T>> = (0..n)
        .map(|l| (metric.eval(&g.offset_axis(l, h)) - metric.eval(&g.offset_axis(l, -h))) / two_h)
        .collect();

    let half: T = lit(0.5);
    Ok(ChristoffelTensor::from_fn(n, |i, j, k| {
        let mut acc = T::zero();
        for l in 0..n {
            acc += inv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
        }
        half * acc
    }))
}

/// Covariant acceleration `(∇_ζ ζ)ⁱ = ζ̇ⁱ + Γⁱⱼₖ ζʲ ζᵏ`.
pub fn covariant_accel<T: Scalar>(
    gamma: &ChristoffelTensor<T>,
    zeta: &TangentCoord<T>,
    zeta_dot: &TangentCoord<T>,
) -> TangentCoord<T> {
    TangentCoord(&zeta_dot.0 + gamma.contract(&zeta.0, &zeta.0))
}

/// `⟨v, w⟩ = vᵀ 𝕀(g) w`.
pub fn inner<T: Scalar>(
    metric: &MetricField<T>,
    g: &ChartPoint<T>,
    v: &TangentCoord<T>,
    w: &TangentCoord<T>,
) -> Result<T> {
    check_dim(metric.dim, &v.0)?;
    check_dim(metric.dim, &w.0)?;
    Ok(v.0.dot(&(metric.eval(g) * &w.0)))
}
