use std::collections::BTreeMap;

use super::{cat_lambda, cat_unstable, wrap, wrap_centered, Condition, DynamicalSystem, Topology};
use crate::error::Result;
use crate::linalg::Mat;
use crate::scalar::Real;

/// Arnold's cat map `x ↦ Ax mod 1`, `A = [[2,1],[1,1]]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Cat;

impl<T: Real> DynamicalSystem<T> for Cat {
    fn name(&self) -> &'static str {
        "cat"
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
        BTreeMap::new()
    }
    fn condition(&self) -> Condition {
        Condition::Pinched
    }
    fn known_rates(&self) -> Option<Vec<(f64, f64)>> {
        let l = cat_lambda::<f64>().ln();
        Some(vec![(l, l)])
    }
    fn step(&self, x: &[T]) -> Vec<T> {
        vec![wrap(x[0] + x[0] + x[1]), wrap(x[0] + x[1])]
    }
    fn inverse_step(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(vec![wrap(x[0] - x[1]), wrap(x[1] + x[1] - x[0])])
    }
    fn jacobian(&self, _x: &[T]) -> Mat<T> {
        Mat::from_f64_rows(&[&[2.0, 1.0], &[1.0, 1.0]])
    }
    fn step_delta(&self, _x: &[T], d: &[T]) -> Vec<T> {
        vec![d[0] + d[0] + d[1], d[0] + d[1]]
    }
    fn translate(&self, x: &[T], d: &[T]) -> Vec<T> {
        vec![wrap(x[0] + d[0]), wrap(x[1] + d[1])]
    }
    fn difference(&self, x: &[T], y: &[T]) -> Vec<T> {
        vec![wrap_centered(y[0] - x[0]), wrap_centered(y[1] - x[1])]
    }
    fn fixed_frame(&self) -> Option<Vec<Vec<T>>> {
        Some(vec![cat_unstable()])
    }
    fn flat_leaves(&self) -> bool {
        true
    }
}
