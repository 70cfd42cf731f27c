//! Moderate-deviation schedules `u_ε = a·ε^δ` over a decreasing list of
//! noise levels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<T> {
    /// Noise levels, strictly decreasing.
    pub eps_list: Vec<T>,
    pub a: T,
    pub delta: T,
    /// Smoothness exponent of the model, used for the upper zone edge.
    pub lambda: T,
}

/// One reason a schedule leaves the moderate-deviation zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleViolation<T> {
    /// The offending noise level, when the problem is tied to one.
    pub epsilon: Option<T>,
    pub message: String,
}

impl<T: Real> fmt::Display for ScheduleViolation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.epsilon {
            Some(e) => write!(f, "eps = {e}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl<T: Real> Default for Schedule<T> {
    /// `λ = 1, δ = 0.8, a = 1, ε ∈ {0.05, 0.02, 0.01, 0.005}`.
    fn default() -> Self {
        Self {
            eps_list: [0.05, 0.02, 0.01, 0.005].map(T::lit).to_vec(),
            a: T::one(),
            delta: T::lit(0.8),
            lambda: T::one(),
        }
    }
}

impl<T: Real> Schedule<T> {
    pub fn new(eps_list: Vec<T>, a: T, delta: T, lambda: T) -> Self {
        Self { eps_list, a, delta, lambda }
    }

    pub fn u_eps(&self, epsilon: T) -> T {
        self.a * epsilon.powf(self.delta)
    }

    /// `ε⁻¹ u_ε`, which must grow as ε shrinks.
    pub fn signal_to_noise(&self, epsilon: T) -> T {
        self.u_eps(epsilon) / epsilon
    }

    /// `ε⁻² u_ε^{2+λ}`, which must shrink as ε shrinks.
    pub fn remainder_scale(&self, epsilon: T) -> T {
        self.u_eps(epsilon).powf(T::lit(2.0) + self.lambda) / (epsilon * epsilon)
    }

    /// Checks `2/(2+λ) < δ < 1` and that both zone quantities move the
    /// right way along the list.
    pub fn validate(&self) -> Result<(), Vec<ScheduleViolation<T>>> {
        let mut out = Vec::new();
        let mut global = |msg: String| out.push(ScheduleViolation { epsilon: None, message: msg });
        if !(self.lambda > T::zero() && self.lambda <= T::one()) {
            global(format!("lambda = {} must lie in (0, 1]", self.lambda));
        }
        if !(self.a > T::zero()) || !self.a.is_finite() {
            global(format!("a = {} must be positive", self.a));
        }
        let lower = T::lit(2.0) / (T::lit(2.0) + self.lambda);
        if !(self.delta > lower) {
            global(format!("delta = {} must exceed 2/(2+lambda) = {lower}", self.delta));
        }
        if !(self.delta < T::one()) {
            global(format!("delta = {} must be below 1", self.delta));
        }
        for &e in &self.eps_list {
            if !(e > T::zero()) || !e.is_finite() {
                out.push(ScheduleViolation { epsilon: Some(e), message: "noise level must be positive".into() });
            }
        }
        for w in self.eps_list.windows(2) {
            let (prev, e) = (w[0], w[1]);
            if !(e < prev) {
                out.push(ScheduleViolation { epsilon: Some(e), message: format!("not below previous {prev}") });
                continue;
            }
            if !(self.signal_to_noise(e) > self.signal_to_noise(prev)) {
                out.push(ScheduleViolation { epsilon: Some(e), message: "eps^-1 u_eps does not increase".into() });
            }
            if !(self.remainder_scale(e) < self.remainder_scale(prev)) {
                out.push(ScheduleViolation {
                    epsilon: Some(e),
                    message: "eps^-2 u_eps^(2+lambda) does not decrease".into(),
                });
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

/// Free-function form of [`Schedule::validate`].
pub fn validate_schedule<T: Real>(s: &Schedule<T>) -> Result<(), Vec<ScheduleViolation<T>>> {
    s.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(delta: f64, lambda: f64) -> Schedule<f64> {
        Schedule { delta, lambda, ..Schedule::default() }
    }

    #[test]
    fn default_is_valid() {
        assert!(Schedule::<f64>::default().validate().is_ok());
    }

    #[test]
    fn delta_too_small() {
        let errs = with(0.5, 1.0).validate().unwrap_err();
        assert!(errs.iter().any(|v| v.epsilon.is_none() && v.message.contains("2/(2+lambda)")));
        // every step also breaks monotonicity of the remainder
        assert!(errs.iter().any(|v| v.epsilon == Some(0.02)));
    }

    #[test]
    fn lower_edge_at_half_lambda() {
        assert!(with(0.79, 0.5).validate().is_err());
        assert!(with(0.81, 0.5).validate().is_ok());
    }

    #[test]
    fn delta_one_is_outside() {
        let errs = with(1.0, 1.0).validate().unwrap_err();
        assert!(errs.iter().any(|v| v.message.contains("below 1")));
    }

    #[test]
    fn unsorted_list_names_the_level() {
        let s = Schedule { eps_list: vec![0.01, 0.02], ..Schedule::default() };
        let errs = s.validate().unwrap_err();
        assert_eq!(errs[0].epsilon, Some(0.02));
    }

    #[test]
    fn accepts_exactly_the_open_zone() {
        for li in 1..=10 {
            let lambda = li as f64 / 10.0;
            let edge = 2.0 / (2.0 + lambda);
            for di in 0..=100 {
                let delta = di as f64 / 100.0;
                let inside = delta > edge && delta < 1.0;
                assert_eq!(with(delta, lambda).validate().is_ok(), inside, "lambda {lambda} delta {delta}");
            }
        }
    }
}
