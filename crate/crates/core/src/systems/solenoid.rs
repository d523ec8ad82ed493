use std::collections::BTreeMap;

use super::{cos2pi_diff, sin2pi_diff, wrap, wrap_centered, Condition, DynamicalSystem, Topology};
use crate::error::{LabError, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Smale solenoid `(θ, z) ↦ (2θ mod 1, λz + a·e(θ))` on the solid torus,
/// `e(θ) = (cos 2πθ, sin 2πθ)`.
#[derive(Clone, Copy, Debug)]
pub struct Solenoid<T> {
    a: T,
    lambda: T,
}

pub const SOLENOID_MAX_LAMBDA: f64 = 0.2;

impl<T: Real> Solenoid<T> {
    pub fn new(a: f64, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= SOLENOID_MAX_LAMBDA) {
            return Err(LabError::Domain(format!("solenoid needs 0 < lambda <= {SOLENOID_MAX_LAMBDA}")));
        }
        if a <= 0.0 || !a.is_finite() {
            return Err(LabError::Domain("solenoid needs a > 0".into()));
        }
        Ok(Solenoid { a: T::of(a), lambda: T::of(lambda) })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Radius `a/(1−λ)` of the absorbing disc.
    pub fn radius(&self) -> T {
        self.a / (T::one() - self.lambda)
    }

    fn nearest_branch(&self, x: &[T]) -> (T, Vec<T>) {
        let half = x[0] * T::of(0.5);
        let mut best: Option<(T, Vec<T>)> = None;
        for cand in [half, half + T::of(0.5)] {
            let (c, s) = self.e(cand);
            let w = [x[1] - self.a * c, x[2] - self.a * s];
            let d = (w[0] * w[0] + w[1] * w[1]).sqrt();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, vec![wrap(cand), w[0] / self.lambda, w[1] / self.lambda]));
            }
        }
        best.unwrap()
    }

    fn e(&self, theta: T) -> (T, T) {
        let (s, c) = (T::TAU() * theta).sin_cos();
        (c, s)
    }
}

impl<T: Real> DynamicalSystem<T> for Solenoid<T> {
    fn name(&self) -> &'static str {
        "solenoid"
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn unstable_dim(&self) -> usize {
        1
    }
    fn topology(&self) -> Topology {
        Topology::SolidTorus
    }
    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("a".to_string(), self.a.to64()), ("lambda".to_string(), self.lambda.to64())])
    }
    fn condition(&self) -> Condition {
        Condition::Pinched
    }
    fn known_rates(&self) -> Option<Vec<(f64, f64)>> {
        let l = 2f64.ln();
        Some(vec![(l, l)])
    }
    fn step(&self, x: &[T]) -> Vec<T> {
        let (c, s) = self.e(x[0]);
        vec![wrap(x[0] + x[0]), self.lambda * x[1] + self.a * c, self.lambda * x[2] + self.a * s]
    }

    /// Chooses the preimage angle (θ/2 or θ/2 + 1/2) whose fibre disc contains `z`.
    fn inverse_step(&self, x: &[T]) -> Result<Vec<T>> {
        let (d, p) = self.nearest_branch(x);
        let limit = self.lambda * self.radius() * T::of(1.0 + 1e-9);
        if d > limit {
            return Err(LabError::Branch(format!(
                "fibre offset {:e} exceeds {:e} at theta = {}",
                d.to64(),
                limit.to64(),
                x[0].to64()
            )));
        }
        Ok(p)
    }

    /// Nearest branch, with the fibre coordinate pulled back into the
    /// absorbing disc. Backward iteration multiplies fibre round-off by 1/λ
    /// per step, so after a dozen steps the strict inverse loses the branch;
    /// displacements along the θ-direction depend only on the angles, which
    /// halving keeps exact.
    fn inverse_step_shadow(&self, x: &[T]) -> Result<Vec<T>> {
        let (_, mut p) = self.nearest_branch(x);
        let r = (p[1] * p[1] + p[2] * p[2]).sqrt();
        let cap = self.radius();
        if r > cap {
            p[1] = p[1] * cap / r;
            p[2] = p[2] * cap / r;
        }
        Ok(p)
    }
    fn jacobian(&self, x: &[T]) -> Mat<T> {
        let (s, c) = (T::TAU() * x[0]).sin_cos();
        let k = T::TAU() * self.a;
        let z = T::zero();
        Mat::from_rows(&[
            vec![T::of(2.0), z, z],
            vec![-k * s, self.lambda, z],
            vec![k * c, z, self.lambda],
        ])
    }
    fn step_delta(&self, x: &[T], d: &[T]) -> Vec<T> {
        vec![
            d[0] + d[0],
            self.lambda * d[1] + self.a * cos2pi_diff(x[0], d[0]),
            self.lambda * d[2] + self.a * sin2pi_diff(x[0], d[0]),
        ]
    }
    fn translate(&self, x: &[T], d: &[T]) -> Vec<T> {
        vec![wrap(x[0] + d[0]), x[1] + d[1], x[2] + d[2]]
    }
    fn difference(&self, x: &[T], y: &[T]) -> Vec<T> {
        vec![wrap_centered(y[0] - x[0]), y[1] - x[1], y[2] - x[2]]
    }
    /// The θ-line; unstable leaves are graphs over it.
    fn fixed_frame(&self) -> Option<Vec<Vec<T>>> {
        Some(vec![vec![T::one(), T::zero(), T::zero()]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_example() {
        let s = Solenoid::<f64>::new(0.5, 0.1).unwrap();
        assert_eq!(s.step(&[0.0, 0.0, 0.0]), vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn branch_error_off_attractor() {
        let s = Solenoid::<f64>::new(0.5, 0.1).unwrap();
        assert!(matches!(s.inverse_step(&[0.3, 0.0, 0.0]), Err(LabError::Branch(_))));
    }

    #[test]
    fn parameters_validated() {
        assert!(Solenoid::<f64>::new(0.5, 0.3).is_err());
        assert!(Solenoid::<f64>::new(0.0, 0.1).is_err());
    }
}
