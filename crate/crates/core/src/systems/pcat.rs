use std::collections::BTreeMap;

use super::{sin2pi_diff, wrap, wrap_centered, Condition, DynamicalSystem, Topology};
use crate::error::{LabError, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Perturbed cat map `x ↦ Ax + η (sin 2πx₂, 0)/(2π) mod 1`.
#[derive(Clone, Copy, Debug)]
pub struct PCat<T> {
    eta: T,
}

pub const PCAT_MAX_ETA: f64 = 0.05;

impl<T: Real> PCat<T> {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=PCAT_MAX_ETA).contains(&eta) {
            return Err(LabError::Domain(format!("pcat needs 0 <= eta <= {PCAT_MAX_ETA}, got {eta}")));
        }
        Ok(PCat { eta: T::of(eta) })
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    /// `f` on the covering plane.
    fn lift(&self, x: &[T]) -> [T; 2] {
        let s = (T::TAU() * x[1]).sin() / T::TAU();
        [x[0] + x[0] + x[1] + self.eta * s, x[0] + x[1]]
    }
}

impl<T: Real> DynamicalSystem<T> for PCat<T> {
    fn name(&self) -> &'static str {
        "pcat"
    }
    fn ambient_dim(&self) -> usize {
        2
    }
    fn unstable_dim(&self) -> usize {
        1
    }
    fn topology(&self) -> Topology {
        Topology::Torus2
    }
    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("eta".to_string(), self.eta.to64())])
    }
    fn condition(&self) -> Condition {
        Condition::Pinched
    }
    fn known_rates(&self) -> Option<Vec<(f64, f64)>> {
        None
    }
    fn step(&self, x: &[T]) -> Vec<T> {
        let y = self.lift(x);
        vec![wrap(y[0]), wrap(y[1])]
    }

    /// Newton on the covering plane from `A⁻¹y`.
    fn inverse_step(&self, y: &[T]) -> Result<Vec<T>> {
        let mut x = [y[0] - y[1], y[1] + y[1] - y[0]];
        let tiny = T::epsilon() * T::of(8.0);
        for _ in 0..50 {
            let fx = self.lift(&x);
            let r = [fx[0] - y[0], fx[1] - y[1]];
            let c = T::one() + self.eta * (T::TAU() * x[1]).cos();
            // J = [[2, c], [1, 1]], det = 2 − c
            let det = T::of(2.0) - c;
            let dx0 = (r[0] - c * r[1]) / det;
            let dx1 = (T::of(2.0) * r[1] - r[0]) / det;
            x = [x[0] - dx0, x[1] - dx1];
            if dx0.abs().max(dx1.abs()) <= tiny {
                return Ok(vec![wrap(x[0]), wrap(x[1])]);
            }
        }
        let fx = self.lift(&x);
        let res = (fx[0] - y[0]).abs().max((fx[1] - y[1]).abs());
        if res.to64() <= 1e-12 {
            Ok(vec![wrap(x[0]), wrap(x[1])])
        } else {
            Err(LabError::Orbit(format!("pcat inverse did not converge at {:?}", [y[0].to64(), y[1].to64()])))
        }
    }
    fn jacobian(&self, x: &[T]) -> Mat<T> {
        let c = T::one() + self.eta * (T::TAU() * x[1]).cos();
        Mat::from_rows(&[vec![T::of(2.0), c], vec![T::one(), T::one()]])
    }
    fn step_delta(&self, x: &[T], d: &[T]) -> Vec<T> {
        let ds = sin2pi_diff(x[1], d[1]) / T::TAU();
        vec![d[0] + d[0] + d[1] + self.eta * ds, d[0] + d[1]]
    }
    fn translate(&self, x: &[T], d: &[T]) -> Vec<T> {
        vec![wrap(x[0] + d[0]), wrap(x[1] + d[1])]
    }
    fn difference(&self, x: &[T], y: &[T]) -> Vec<T> {
        vec![wrap_centered(y[0] - x[0]), wrap_centered(y[1] - x[1])]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_solves_forward_equation() {
        let s = PCat::<f64>::new(0.05).unwrap();
        for i in 0..50 {
            let y = [0.02 * i as f64, (0.37 * i as f64).fract()];
            let x = s.inverse_step(&y).unwrap();
            assert!(s.distance(&s.step(&x), &y) <= 1e-10);
        }
    }

    #[test]
    fn eta_is_validated() {
        assert!(PCat::<f64>::new(0.06).is_err());
        assert!(PCat::<f64>::new(-0.01).is_err());
    }
}
