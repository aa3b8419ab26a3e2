//! Morse functions on a constrained system: projected differentials, the
//! D-critical set, D-Hessians and the `λ`, `μ` bounds used by gain certification.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::constraint::{ConstraintFrame, DistributionField};
use crate::error::{GeoError, Result};
use crate::geometry::{
    ChartPoint, CotangentCoord, MetricField, PointFn, Topology, DEFAULT_FD_STEP,
};
use crate::scalar::{lit, two_pi, Scalar};

/// Step for Hessians taken as second differences of the value alone.
const VALUE_HESSIAN_STEP: f64 = 1e-4;

/// Seeds per axis for the D-critical search (total capped at [`MAX_SEEDS`]).
pub const SEEDS_PER_AXIS: usize = 16;
pub const MAX_SEEDS: usize = 4096;
pub const NEWTON_MAX_ITER: usize = 100;
/// Critical points closer than this (chart distance, angles mod 2π) are merged.
pub const DEDUP_RADIUS: f64 = 1e-4;
/// Samples within this distance of the declared minimum are excluded from `λ`, `μ`.
pub const MINIMUM_EXCLUSION: f64 = 1e-6;

/// A scalar function `V` with its differential and declared global minimizer.
#[derive(Clone)]
pub struct MorseSpec<T: Scalar> {
    value: PointFn<T, T>,
    differential: Option<PointFn<T, DVector<T>>>,
    minimum: ChartPoint<T>,
}

impl<T: Scalar> fmt::Debug for MorseSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MorseSpec")
            .field("minimum", &self.minimum)
            .field("analytic_differential", &self.differential.is_some())
            .finish()
    }
}

impl<T: Scalar> MorseSpec<T> {
    pub fn new(
        value: impl Fn(&ChartPoint<T>) -> T + Send + Sync + 'static,
        minimum: ChartPoint<T>,
    ) -> Self {
        Self {
            value: Arc::new(value),
            differential: None,
            minimum,
        }
    }

    pub fn with_differential(
        mut self,
        f: impl Fn(&ChartPoint<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Self {
        self.differential = Some(Arc::new(f));
        self
    }

    pub fn minimum(&self) -> &ChartPoint<T> {
        &self.minimum
    }

    pub fn value(&self, g: &ChartPoint<T>) -> T {
        (self.value)(g)
    }

    pub fn differential(&self, g: &ChartPoint<T>) -> CotangentCoord<T> {
        if let Some(f) = &self.differential {
            return CotangentCoord(f(g));
        }
        let h: T = lit(DEFAULT_FD_STEP);
        CotangentCoord(DVector::from_fn(g.dim(), |i, _| {
            (self.value(&g.offset_axis(i, h)) - self.value(&g.offset_axis(i, -h))) / (h + h)
        }))
    }

    /// Chart Hessian by central differences, symmetrized.
    pub fn hessian(&self, g: &ChartPoint<T>) -> DMatrix<T> {
        let n = g.dim();
        let half: T = lit(0.5);
        let raw = if self.differential.is_some() {
            let h: T = lit(DEFAULT_FD_STEP);
            let mut m = DMatrix::zeros(n, n);
            for j in 0..n {
                let col = (self.differential(&g.offset_axis(j, h)).0
                    - self.differential(&g.offset_axis(j, -h)).0)
                    / (h + h);
                m.set_column(j, &col);
            }
            m
        } else {
            let h: T = lit(VALUE_HESSIAN_STEP);
            let f0 = self.value(g);
            let four_h2 = lit::<T>(4.0) * h * h;
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    let p = self.value(&g.offset_axis(i, h + h));
                    let m = self.value(&g.offset_axis(i, -(h + h)));
                    (p - f0 - f0 + m) / four_h2
                } else {
                    let pp = self.value(&g.offset_axis(i, h).offset_axis(j, h));
                    let pm = self.value(&g.offset_axis(i, h).offset_axis(j, -h));
                    let mp = self.value(&g.offset_axis(i, -h).offset_axis(j, h));
                    let mm = self.value(&g.offset_axis(i, -h).offset_axis(j, -h));
                    (pp - pm - mp + mm) / four_h2
                }
            })
        };
        (&raw + raw.transpose()) * half
    }

    /// The function `c·V` (with `c·dV`), same minimum.
    pub fn scaled(&self, c: T) -> Self {
        let value = self.value.clone();
        let differential = self.differential.clone();
        Self {
            value: Arc::new(move |g| c * value(g)),
            differential: differential
                .map(|d| Arc::new(move |g: &ChartPoint<T>| d(g) * c) as PointFn<T, DVector<T>>),
            minimum: self.minimum.clone(),
        }
    }
}

/// A box in the chart with a regular sampling grid.
///
/// Linear axes are sampled with both endpoints included; angular axes are
/// sampled on a half-open interval so that `0` and `2π` are not duplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingRegion<T: Scalar> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub topology: Arc<[Topology]>,
    pub samples_per_axis: usize,
}

impl<T: Scalar> SamplingRegion<T> {
    pub fn new(
        lower: Vec<T>,
        upper: Vec<T>,
        topology: Arc<[Topology]>,
        samples_per_axis: usize,
    ) -> Result<Self> {
        if lower.len() != topology.len() || upper.len() != topology.len() {
            return Err(GeoError::DimensionMismatch {
                expected: topology.len(),
                found: lower.len().min(upper.len()),
            });
        }
        let region = Self {
            lower,
            upper,
            topology,
            samples_per_axis,
        };
        if region.is_empty() {
            return Err(GeoError::EmptyRegion);
        }
        Ok(region)
    }

    /// Linear axes on `[-half_width, half_width]`, angular axes on `[0, 2π)`.
    pub fn centered(
        topology: Arc<[Topology]>,
        half_width: T,
        samples_per_axis: usize,
    ) -> Result<Self> {
        let (lower, upper) = topology
            .iter()
            .map(|t| match t {
                Topology::Linear => (-half_width, half_width),
                Topology::Angular => (T::zero(), two_pi::<T>()),
            })
            .unzip();
        Self::new(lower, upper, topology, samples_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.topology.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples_per_axis == 0
            || self
                .lower
                .iter()
                .zip(&self.upper)
                .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
    }

    fn axis_values(&self, axis: usize, count: usize) -> Vec<T> {
        let (lo, hi) = (self.lower[axis], self.upper[axis]);
        if count == 1 {
            return vec![(lo + hi) * lit(0.5)];
        }
        let denom = match self.topology[axis] {
            Topology::Linear => count - 1,
            Topology::Angular => count,
        };
        let step = (hi - lo) / lit(denom as f64);
        (0..count).map(|i| lo + step * lit(i as f64)).collect()
    }

    /// Grid points with `count` samples per axis, in lexicographic order.
    pub fn grid(&self, count: usize) -> Vec<ChartPoint<T>> {
        let n = self.dim();
        let axes: Vec<Vec<T>> = (0..n).map(|a| self.axis_values(a, count)).collect();
        let total = count.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                let mut c = DVector::zeros(n);
                for a in (0..n).rev() {
                    c[a] = axes[a][idx % count];
                    idx /= count;
                }
                ChartPoint::new(c, self.topology.clone()).expect("grid dimension")
            })
            .collect()
    }

    pub fn samples(&self) -> Vec<ChartPoint<T>> {
        self.grid(self.samples_per_axis)
    }

    /// Multi-start seeds: 16 per axis, reduced so the total stays within 4096.
    pub fn seeds(&self) -> Vec<ChartPoint<T>> {
        let n = self.dim() as u32;
        let mut per_axis = SEEDS_PER_AXIS;
        while per_axis > 1 && per_axis.pow(n) > MAX_SEEDS {
            per_axis -= 1;
        }
        self.grid(per_axis)
    }
}

/// `P_D* dV` at `g`.
pub fn projected_dv<T: Scalar>(
    morse: &MorseSpec<T>,
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    g: &ChartPoint<T>,
) -> Result<CotangentCoord<T>> {
    let frame = ConstraintFrame::at(metric, dist, g)?;
    Ok(CotangentCoord(
        frame.projectors().p_dstar * morse.differential(g).0,
    ))
}

/// Inertia of a symmetric matrix: counts of positive, negative and (near) zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HessianSignature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl HessianSignature {
    pub fn of<T: Scalar>(eigenvalues: &[T]) -> Self {
        let tol: T = lit(1e-6);
        let mut s = Self {
            positive: 0,
            negative: 0,
            zero: 0,
        };
        for &e in eigenvalues {
            if e > tol {
                s.positive += 1;
            } else if e < -tol {
                s.negative += 1;
            } else {
                s.zero += 1;
            }
        }
        s
    }

    pub fn is_positive_definite(&self) -> bool {
        self.negative == 0 && self.zero == 0
    }

    pub fn label(&self) -> &'static str {
        match (self.positive, self.negative, self.zero) {
            (_, 0, 0) => "minimum",
            (0, _, 0) => "maximum",
            (_, _, 0) => "saddle",
            _ => "degenerate",
        }
    }
}

/// Restricted Hessian `Bᵀ H(V) B` (k × k), symmetrized.
pub fn d_hessian<T: Scalar>(
    morse: &MorseSpec<T>,
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    g: &ChartPoint<T>,
) -> Result<DMatrix<T>> {
    let frame = ConstraintFrame::at(metric, dist, g)?;
    let restricted = frame.basis.transpose() * morse.hessian(g) * &frame.basis;
    Ok((&restricted + restricted.transpose()) * lit::<T>(0.5))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint<T: Scalar> {
    pub point: ChartPoint<T>,
    /// `‖P_D* dV‖` at the point.
    pub residual: T,
    pub hessian_eigenvalues: Vec<T>,
    pub signature: HessianSignature,
    /// Within the deduplication radius of the declared minimum.
    pub is_declared_minimum: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSearch<T: Scalar> {
    pub points: Vec<CriticalPoint<T>>,
    pub seeds: usize,
    /// Seeds whose Newton iteration did not reach the tolerance.
    pub dropped: usize,
}

fn reduced_residual<T: Scalar>(
    morse: &MorseSpec<T>,
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    g: &ChartPoint<T>,
) -> Result<(DVector<T>, T)> {
    let frame = ConstraintFrame::at(metric, dist, g)?;
    let dv = morse.differential(g).0;
    let reduced = frame.basis.transpose() * &dv;
    let full = (frame.projectors().p_dstar * dv).norm();
    Ok((reduced, full))
}

/// Damped Gauss-Newton on `Bᵀ dV = 0` with minimum-norm steps.
fn newton_from<T: Scalar>(
    morse: &MorseSpec<T>,
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    seed: ChartPoint<T>,
    tol: T,
) -> Option<(ChartPoint<T>, T)> {
    let h: T = lit(DEFAULT_FD_STEP);
    let n = seed.dim();
    let mut g = seed;
    let (mut r, mut res) = reduced_residual(morse, metric, dist, &g).ok()?;
    for _ in 0..=NEWTON_MAX_ITER {
        if res <= tol {
            return Some((g, res));
        }
        let mut jac = DMatrix::zeros(r.len(), n);
        for j in 0..n {
            let plus = reduced_residual(morse, metric, dist, &g.offset_axis(j, h))
                .ok()?
                .0;
            let minus = reduced_residual(morse, metric, dist, &g.offset_axis(j, -h))
                .ok()?
                .0;
            jac.set_column(j, &((plus - minus) / (h + h)));
        }
        let step = -jac.pseudo_inverse(lit(1e-12)).ok()? * &r;
        let mut scale = T::one();
        let mut accepted = None;
        for _ in 0..30 {
            let trial = g.displaced(&(&step * scale));
            if let Ok((tr, tres)) = reduced_residual(morse, metric, dist, &trial) {
                if tres < res {
                    accepted = Some((trial, tr, tres));
                    break;
                }
            }
            scale *= lit(0.5);
        }
        let (ng, nr, nres) = accepted?;
        g = ng;
        r = nr;
        res = nres;
    }
    None
}

/// Samples the D-critical set `{g : P_D* dV(g) = 0}` by multi-start Newton.
pub fn find_d_critical<T: Scalar>(
    morse: &MorseSpec<T>,
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    region: &SamplingRegion<T>,
    tol: T,
) -> Result<CriticalSearch<T>> {
    if region.is_empty() {
        return Err(GeoError::EmptyRegion);
    }
    let seeds = region.seeds();
    let solved: Vec<Option<(ChartPoint<T>, T)>> = seeds
        .par_iter()
        .map(|s| newton_from(morse, metric, dist, s.clone(), tol))
        .collect();

    let radius: T = lit(DEDUP_RADIUS);
    let mut kept: Vec<(ChartPoint<T>, T)> = Vec::new();
    let mut dropped = 0;
    for item in solved {
        match item {
            Some((p, res)) => {
                if !kept.iter().any(|(q, _)| q.distance(&p) < radius) {
                    kept.push((p, res));
                }
            }
            None => dropped += 1,
        }
    }

    let points = kept
        .into_par_iter()
        .map(|(point, _)| {
            let residual = projected_dv(morse, metric, dist, &point)?.0.norm();
            let h = d_hessian(morse, metric, dist, &point)?;
            let eig: Vec<T> = h.symmetric_eigenvalues().iter().copied().collect();
            Ok(CriticalPoint {
                is_declared_minimum: point.distance(morse.minimum()) < radius,
                signature: HessianSignature::of(&eig),
                hessian_eigenvalues: eig,
                residual,
                point,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // post-hoc check of the tolerance
    let points: Vec<_> = points.into_iter().filter(|p| p.residual <= tol).collect();
    Ok(CriticalSearch {
        points,
        seeds: seeds.len(),
        dropped,
    })
}

/// Sampled estimates of the bounds `λ` and `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMu<T: Scalar> {
    pub lambda: T,
    pub mu: T,
    pub sample_count: usize,
}

/// `λ ≈ max ‖P_D grad V‖²_𝕀 / (2V)` and `μ ≈ max λ_max(Gram⁻¹ · sym(BᵀHB))`
/// over the sampling grid, excluding a small ball around the minimum.
///
/// Points where the distribution degenerates are skipped.
pub fn estimate_lambda_mu<T: Scalar>(
    morse: &MorseSpec<T>,
    metric: &MetricField<T>,
    dist: &DistributionField<T>,
    region: &SamplingRegion<T>,
) -> Result<LambdaMu<T>> {
    if region.is_empty() {
        return Err(GeoError::EmptyRegion);
    }
    let exclusion: T = lit(MINIMUM_EXCLUSION);
    let samples: Vec<(T, T)> = region
        .samples()
        .par_iter()
        .filter(|g| g.distance(morse.minimum()) > exclusion)
        .filter_map(|g| {
            let v = morse.value(g);
            if v <= T::zero() {
                return None;
            }
            let frame = ConstraintFrame::at(metric, dist, g).ok()?;
            let reduced = frame.basis.transpose() * morse.differential(g).0;
            let lambda = reduced.dot(&(&frame.gram_inv * &reduced)) / (v + v);

            let restricted = frame.basis.transpose() * morse.hessian(g) * &frame.basis;
            let sym = (&restricted + restricted.transpose()) * lit::<T>(0.5);
            let chol = frame.gram.clone().cholesky()?;
            let l_inv = chol.l().try_inverse()?;
            let normalized = &l_inv * sym * l_inv.transpose();
            let normalized = (&normalized + normalized.transpose()) * lit::<T>(0.5);
            let mu = normalized.symmetric_eigenvalues().max();
            Some((lambda, mu))
        })
        .collect();
    if samples.is_empty() {
        return Err(GeoError::EmptyRegion);
    }
    let (lambda, mu) = samples
        .iter()
        .fold((T::zero(), T::zero()), |(l, m), &(a, b)| {
            (l.max(a), m.max(b))
        });
    Ok(LambdaMu {
        lambda,
        mu,
        sample_count: samples.len(),
    })
}
