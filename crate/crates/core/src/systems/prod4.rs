use std::collections::BTreeMap;

use super::{cat_lambda, cat_unstable, wrap, wrap_centered, sin2pi_diff, Condition, DynamicalSystem, Topology};
use crate::error::Result;
use crate::linalg::Mat;
use crate::scalar::Real;

/// `(x, y) ↦ (Ax, A²y + η k(x) v) mod 1` on T⁴, with `k(x) = sin(2πx₁)/(2π)`
/// and `v` the unit unstable eigenvector of `A`.
///
/// The coupling only pushes along `v`, so unstable leaves stay flat planes
/// spanned by `(v, 0)` and `(0, v)`; `E2 = (0, v)` and the fast leaves are
/// straight lines. `η = 0` gives the block-diagonal linear map.
#[derive(Clone, Copy, Debug)]
pub struct Prod4<T> {
    eta: T,
}

impl<T: Real> Prod4<T> {
    pub fn new(eta: f64) -> Self {
        Prod4 { eta: T::of(eta) }
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    fn k(x1: T) -> T {
        (T::TAU() * x1).sin() / T::TAU()
    }
}

const A2: [[f64; 2]; 2] = [[5.0, 3.0], [3.0, 2.0]];
const A2_INV: [[f64; 2]; 2] = [[2.0, -3.0], [-3.0, 5.0]];

fn mat2<T: Real>(m: &[[f64; 2]; 2], a: T, b: T) -> [T; 2] {
    [T::of(m[0][0]) * a + T::of(m[0][1]) * b, T::of(m[1][0]) * a + T::of(m[1][1]) * b]
}

impl<T: Real> DynamicalSystem<T> for Prod4<T> {
    fn name(&self) -> &'static str {
        "prod4"
    }
    fn ambient_dim(&self) -> usize {
        4
    }
    fn unstable_dim(&self) -> usize {
        2
    }
    fn topology(&self) -> Topology {
        Topology::Torus4
    }
    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("eta".to_string(), self.eta.to64())])
    }
    fn condition(&self) -> Condition {
        Condition::Lupc
    }
    fn known_rates(&self) -> Option<Vec<(f64, f64)>> {
        if self.eta == T::zero() {
            let l = cat_lambda::<f64>().ln();
            Some(vec![(l, l), (2.0 * l, 2.0 * l)])
        } else {
            None
        }
    }
    fn step(&self, x: &[T]) -> Vec<T> {
        let v = cat_unstable::<T>();
        let k = self.eta * Self::k(x[0]);
        let y = mat2(&A2, x[2], x[3]);
        vec![
            wrap(x[0] + x[0] + x[1]),
            wrap(x[0] + x[1]),
            wrap(y[0] + k * v[0]),
            wrap(y[1] + k * v[1]),
        ]
    }
    fn inverse_step(&self, x: &[T]) -> Result<Vec<T>> {
        let p = [wrap(x[0] - x[1]), wrap(x[1] + x[1] - x[0])];
        let v = cat_unstable::<T>();
        let k = self.eta * Self::k(p[0]);
        let y = mat2(&A2_INV, x[2] - k * v[0], x[3] - k * v[1]);
        Ok(vec![p[0], p[1], wrap(y[0]), wrap(y[1])])
    }
    fn jacobian(&self, x: &[T]) -> Mat<T> {
        let v = cat_unstable::<T>();
        let g = self.eta * (T::TAU() * x[0]).cos();
        let z = T::zero();
        let f = T::of;
        Mat::from_rows(&[
            vec![f(2.0), f(1.0), z, z],
            vec![f(1.0), f(1.0), z, z],
            vec![g * v[0], z, f(5.0), f(3.0)],
            vec![g * v[1], z, f(3.0), f(2.0)],
        ])
    }
    fn step_delta(&self, x: &[T], d: &[T]) -> Vec<T> {
        let v = cat_unstable::<T>();
        let dk = self.eta * sin2pi_diff(x[0], d[0]) / T::TAU();
        let y = mat2(&A2, d[2], d[3]);
        vec![d[0] + d[0] + d[1], d[0] + d[1], y[0] + dk * v[0], y[1] + dk * v[1]]
    }
    fn translate(&self, x: &[T], d: &[T]) -> Vec<T> {
        x.iter().zip(d).map(|(&a, &b)| wrap(a + b)).collect()
    }
    fn difference(&self, x: &[T], y: &[T]) -> Vec<T> {
        x.iter().zip(y).map(|(&a, &b)| wrap_centered(b - a)).collect()
    }
    /// Slow block first, then fast block.
    fn fixed_frame(&self) -> Option<Vec<Vec<T>>> {
        let v = cat_unstable::<T>();
        let z = T::zero();
        Some(vec![vec![v[0], v[1], z, z], vec![z, z, v[0], v[1]]])
    }
    fn flat_leaves(&self) -> bool {
        true
    }
    fn split_dims(&self) -> Option<(usize, usize)> {
        Some((1, 1))
    }
}
