use std::collections::BTreeMap;

use super::{Condition, DynamicalSystem, Topology};
use crate::error::{LabError, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// The iterate `f^k` of a system, used as the unit step.
#[derive(Clone, Debug)]
pub struct Blocked<S> {
    inner: S,
    k: usize,
}

impl<S> Blocked<S> {
    pub fn new(inner: S, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(LabError::Domain("block exponent must be at least 1".into()));
        }
        Ok(Blocked { inner, k })
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl<T: Real, S: DynamicalSystem<T>> DynamicalSystem<T> for Blocked<S> {
    fn name(&self) -> &'static str {
        self.inner.name()
    }
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }
    fn unstable_dim(&self) -> usize {
        self.inner.unstable_dim()
    }
    fn topology(&self) -> Topology {
        self.inner.topology()
    }
    fn params(&self) -> BTreeMap<String, f64> {
        self.inner.params()
    }
    fn condition(&self) -> Condition {
        self.inner.condition()
    }
    fn known_rates(&self) -> Option<Vec<(f64, f64)>> {
        let k = self.k as f64;
        self.inner.known_rates().map(|r| r.into_iter().map(|(a, b)| (a * k, b * k)).collect())
    }
    fn step(&self, x: &[T]) -> Vec<T> {
        let mut p = x.to_vec();
        for _ in 0..self.k {
            p = self.inner.step(&p);
        }
        p
    }
    fn inverse_step(&self, x: &[T]) -> Result<Vec<T>> {
        let mut p = x.to_vec();
        for _ in 0..self.k {
            p = self.inner.inverse_step(&p)?;
        }
        Ok(p)
    }
    fn inverse_step_shadow(&self, x: &[T]) -> Result<Vec<T>> {
        let mut p = x.to_vec();
        for _ in 0..self.k {
            p = self.inner.inverse_step_shadow(&p)?;
        }
        Ok(p)
    }
    fn jacobian(&self, x: &[T]) -> Mat<T> {
        let mut p = x.to_vec();
        let mut m = Mat::identity(self.ambient_dim());
        for _ in 0..self.k {
            m = self.inner.jacobian(&p).matmul(&m);
            p = self.inner.step(&p);
        }
        m
    }
    fn step_delta(&self, x: &[T], d: &[T]) -> Vec<T> {
        let mut p = x.to_vec();
        let mut e = d.to_vec();
        for _ in 0..self.k {
            e = self.inner.step_delta(&p, &e);
            p = self.inner.step(&p);
        }
        e
    }
    fn translate(&self, x: &[T], d: &[T]) -> Vec<T> {
        self.inner.translate(x, d)
    }
    fn difference(&self, x: &[T], y: &[T]) -> Vec<T> {
        self.inner.difference(x, y)
    }
    fn fixed_frame(&self) -> Option<Vec<Vec<T>>> {
        self.inner.fixed_frame()
    }
    fn flat_leaves(&self) -> bool {
        self.inner.flat_leaves()
    }
    fn split_dims(&self) -> Option<(usize, usize)> {
        self.inner.split_dims()
    }
    fn is_linear(&self) -> bool {
        self.inner.is_linear()
    }
    fn block(&self) -> usize {
        self.k * self.inner.block()
    }
}
