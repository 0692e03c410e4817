use crate::{Error, Result};

/// A state that can be advanced by a scaled rate of the same shape.
pub trait OdeState: Copy {
    /// `self + h · rate`
    fn add_scaled(&self, rate: &Self, h: f64) -> Self;
    fn is_finite(&self) -> bool;
}

impl OdeState for f64 {
    fn add_scaled(&self, rate: &f64, h: f64) -> f64 {
        self + h * rate
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl<const N: usize> OdeState for [f64; N] {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        let mut out = *self;
        for (o, r) in out.iter_mut().zip(rate) {
            *o += h * r;
        }
        out
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

/// One classical fourth-order Runge-Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<S, F>(derivative: F, state: &S, t: f64, dt: f64) -> Result<S>
where
    S: OdeState,
    F: Fn(f64, &S) -> S,
{
    if !(dt > 0.0) {
        return Err(Error::Domain("time step must be positive"));
    }
    let half = 0.5 * dt;
    let k1 = derivative(t, state);
    let k2 = derivative(t + half, &state.add_scaled(&k1, half));
    let k3 = derivative(t + half, &state.add_scaled(&k2, half));
    let k4 = derivative(t + dt, &state.add_scaled(&k3, dt));
    let next = state
        .add_scaled(&k1, dt / 6.0)
        .add_scaled(&k2, dt / 3.0)
        .add_scaled(&k3, dt / 3.0)
        .add_scaled(&k4, dt / 6.0);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite { t: t + dt, partial: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_leaves_state_unchanged() {
        let x = [1.5, -2.0, 3.25];
        assert_eq!(rk4_step(|_, _: &[f64; 3]| [0.0; 3], &x, 0.0, 0.1).unwrap(), x);
    }

    #[test]
    fn exponential_decay_single_step() {
        // RK4 on ẋ = -x gives 1 - h + h²/2 - h³/6 + h⁴/24.
        let h: f64 = 0.1;
        let want = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        let got = rk4_step(|_, x: &f64| -x, &1.0, 0.0, h).unwrap();
        assert!((got - want).abs() < 1e-16);
        assert!((got - 0.904_837_5).abs() < 1e-9);
    }

    #[test]
    fn time_dependent_rate_is_integrated_exactly_for_cubics() {
        // ẋ = 3t², x(0) = 0 → x(h) = h³, exact for RK4 (Simpson's rule).
        let got = rk4_step(|t, _: &f64| 3.0 * t * t, &0.0, 0.0, 0.5).unwrap();
        assert!((got - 0.125).abs() < 1e-16);
    }

    #[test]
    fn blow_up_is_reported() {
        let r = rk4_step(|_, x: &f64| x * x * 1e300, &1e10, 0.0, 1.0);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
        assert!(rk4_step(|_, x: &f64| *x, &1.0, 0.0, 0.0).is_err());
    }
}
