//! Classical fixed-step Runge-Kutta.

use nalgebra::DVector;

use crate::scalar::{lit, Scalar};

/// One RK4 step of `ẏ = f(t, y)` from `(t, y)` with step `h`.
pub fn rk4_step<T, E, F>(t: T, y: &DVector<T>, h: T, mut f: F) -> Result<DVector<T>, E>
where
    T: Scalar,
    F: FnMut(T, &DVector<T>) -> Result<DVector<T>, E>,
{
    let half = h * lit(0.5);
    let k1 = f(t, y)?;
    let k2 = f(t + half, &(y + &k1 * half))?;
    let k3 = f(t + half, &(y + &k2 * half))?;
    let k4 = f(t + h, &(y + &k3 * h))?;
    let sixth = h / lit(6.0);
    Ok(y + (k1 + (k2 + k3) * lit::<T>(2.0) + k4) * sixth)
}

/// Step count and uniform time grid covering `[0, t_end]` with steps of at
/// most `dt`; the last step is shortened when `dt` does not divide `t_end`.
pub fn time_grid<T: Scalar>(t_end: T, dt: T) -> Vec<T> {
    let ratio = t_end / dt;
    let mut steps = ratio.floor();
    if ratio - steps > lit(1e-9) {
        steps += T::one();
    }
    let n = steps.to_usize().unwrap_or(0);
    (0..=n).map(|i| (dt * lit(i as f64)).min(t_end)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_is_fourth_order() {
        let run = |h: f64| {
            let mut y = DVector::from_vec(vec![1.0]);
            let grid = time_grid(1.0, h);
            for w in grid.windows(2) {
                y = rk4_step::<f64, (), _>(w[0], &y, w[1] - w[0], |_, y| Ok(y.clone())).unwrap();
            }
            (y[0] - 1f64.exp()).abs()
        };
        let order = (run(0.1) / run(0.05)).log2();
        assert!(order > 3.8, "observed order {order}");
    }

    #[test]
    fn grid_covers_horizon() {
        let g = time_grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(time_grid(30.0, 1e-3).len(), 30_001);
    }
}
