use serde::{Deserialize, Serialize};

use crate::scalar::{normalize_angle, Real};

/// Planar pose `(x, y, theta)`; theta is kept in (-pi, pi].
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    /// `self ∘ other`: `other` expressed in the frame of `self`, mapped to the world.
    pub fn compose(&self, other: &Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)
    }

    /// `self⁻¹ ∘ other`: pose of `other` in the frame of `self`.
    pub fn between(&self, other: &Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Self::new(c * dx + s * dy, -s * dx + c * dy, other.theta - self.theta)
    }

    pub fn translation_norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Self) -> T {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.theta]
    }

    /// Additive update with angle renormalisation.
    pub fn oplus(&self, delta: &[T; 3]) -> Self {
        Self::new(self.x + delta[0], self.y + delta[1], self.theta + delta[2])
    }

    pub fn cast<U: Real>(&self) -> Pose2<U> {
        Pose2::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.theta.as_f64()),
        )
    }
}
