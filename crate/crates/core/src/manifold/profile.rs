use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generating function `F(t) = 1 + h(shift + t)` of a surface of revolution over
/// `t ∈ [-1, 1]`, where `h(u) = amplitude · exp(1 - ε²/(ε² - u²))` on `|u| < ε`
/// and zero elsewhere. `h(0) = amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub shift: f64,
    pub epsilon: f64,
    pub amplitude: f64,
}

impl BumpProfile {
    pub fn new(shift: f64, epsilon: f64, amplitude: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.25) {
            return Err(Error::InvalidParameter(format!(
                "bump epsilon = {epsilon} must satisfy 0 < epsilon < 1/4"
            )));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bump amplitude = {amplitude} must be finite and >= 0 (profiles with F < 1 are unsupported)"
            )));
        }
        let limit = 1.0 - 2.0 * epsilon;
        if !(shift.abs() < limit) {
            return Err(Error::InvalidParameter(format!(
                "bump shift s = {shift} must lie in (-1 + 2*epsilon, 1 - 2*epsilon) = ({:.6}, {:.6})",
                -limit, limit
            )));
        }
        Ok(BumpProfile {
            shift,
            epsilon,
            amplitude,
        })
    }

    /// `F ≡ 1`: the flat cylinder.
    pub fn flat() -> Self {
        BumpProfile {
            shift: 0.0,
            epsilon: 0.2,
            amplitude: 0.0,
        }
    }

    pub fn is_flat(&self) -> bool {
        self.amplitude == 0.0
    }

    /// Same bump, different shift.
    pub fn with_shift(&self, shift: f64) -> Result<Self> {
        BumpProfile::new(shift, self.epsilon, self.amplitude)
    }

    /// `(h, h', h'')` at `u`.
    pub fn bump_jet(&self, u: f64) -> (f64, f64, f64) {
        let e2 = self.epsilon * self.epsilon;
        let q = e2 - u * u;
        if self.amplitude == 0.0 || q <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let h = self.amplitude * (1.0 - e2 / q).exp();
        if h == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let q2 = q * q;
        let d1 = -2.0 * e2 * u * h / q2;
        let d2 = -2.0 * e2 * (h / q2 + u * d1 / q2 + 4.0 * u * u * h / (q2 * q));
        (h, d1, d2)
    }

    pub fn bump(&self, u: f64) -> f64 {
        self.bump_jet(u).0
    }

    /// `F(t)`.
    pub fn value(&self, t: f64) -> f64 {
        1.0 + self.bump(self.shift + t)
    }

    /// `(F, F', F'')` at `t`.
    pub fn jet(&self, t: f64) -> (f64, f64, f64) {
        let (h, d1, d2) = self.bump_jet(self.shift + t);
        (1.0 + h, d1, d2)
    }

    /// Closed support of the bump in the `t` variable, clipped to `[-1, 1]`.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.is_flat() {
            return None;
        }
        let lo = (-self.shift - self.epsilon).max(-1.0);
        let hi = (-self.shift + self.epsilon).min(1.0);
        (lo < hi).then_some((lo, hi))
    }

    pub fn max_value(&self) -> f64 {
        1.0 + self.amplitude
    }
}
