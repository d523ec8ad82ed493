//! Hyperbolic toy systems behind one map interface, plus samplers for the
//! basic set.

mod blocked;
mod cat;
mod pcat;
mod prod4;
mod sample;
mod solenoid;

use std::collections::BTreeMap;

pub use blocked::Blocked;
pub use cat::Cat;
pub use pcat::PCat;
pub use prod4::Prod4;
pub use sample::{invariance_defect, sample_lambda, LambdaSample, NeighborGrid, Provenance};
pub use solenoid::Solenoid;

use rand::Rng;

use crate::error::{LabError, Result};
use crate::linalg::{Mat, Subspace};
use crate::rng;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Torus2,
    Torus4,
    SolidTorus,
}

/// Which condition a system is built to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// Pinched unstable spectrum.
    Pinched,
    /// Pinched slow bundle inside a dominated unstable splitting.
    Lupc,
}

/// A discrete-time hyperbolic map.
///
/// Points are stored reduced into the fundamental domain; displacements live
/// on the covering space and are never reduced.
pub trait DynamicalSystem<T: Real>: Send + Sync {
    fn name(&self) -> &'static str;
    fn ambient_dim(&self) -> usize;
    fn unstable_dim(&self) -> usize;
    fn topology(&self) -> Topology;
    fn params(&self) -> BTreeMap<String, f64>;
    fn condition(&self) -> Condition;

    /// Per-step `(alpha, beta)` for each unstable block of a linear system.
    fn known_rates(&self) -> Option<Vec<(f64, f64)>>;

    fn step(&self, x: &[T]) -> Vec<T>;
    fn inverse_step(&self, x: &[T]) -> Result<Vec<T>>;

    /// Preimage used when building long backward orbits. Systems whose strict
    /// inverse amplifies round-off out of the domain override this with a
    /// branch choice that always succeeds.
    fn inverse_step_shadow(&self, x: &[T]) -> Result<Vec<T>> {
        self.inverse_step(x)
    }

    fn jacobian(&self, x: &[T]) -> Mat<T>;

    /// `f(x + d) − f(x)` on the covering space, accurate relative to `|d|`.
    fn step_delta(&self, x: &[T], d: &[T]) -> Vec<T>;

    /// `x + d` reduced into the fundamental domain.
    fn translate(&self, x: &[T], d: &[T]) -> Vec<T>;

    /// Shortest lift of `y − x`.
    fn difference(&self, x: &[T], y: &[T]) -> Vec<T>;

    fn distance(&self, x: &[T], y: &[T]) -> T {
        crate::linalg::norm(&self.difference(x, y))
    }

    /// Constant chart frame, when the unstable bundle (or the chosen chart
    /// direction) does not depend on the point.
    fn fixed_frame(&self) -> Option<Vec<Vec<T>>> {
        None
    }

    /// True when local unstable leaves are affine: `W^u_loc(x) = x + E^u`.
    fn flat_leaves(&self) -> bool {
        false
    }

    /// `(dim E1, dim E2)` for systems with a dominated unstable splitting.
    fn split_dims(&self) -> Option<(usize, usize)> {
        None
    }

    fn is_linear(&self) -> bool {
        self.known_rates().is_some() && self.flat_leaves()
    }

    /// Number of base-map steps per step.
    fn block(&self) -> usize {
        1
    }

    fn label(&self) -> String {
        let mut s = self.name().to_string();
        let p = self.params();
        if !p.is_empty() {
            let inner: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v}")).collect();
            s = format!("{s}({})", inner.join(","));
        }
        if self.block() > 1 {
            s = format!("{s}^{}", self.block());
        }
        s
    }
}

impl<T: Real, S: DynamicalSystem<T> + ?Sized> DynamicalSystem<T> for Box<S> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }
    fn unstable_dim(&self) -> usize {
        (**self).unstable_dim()
    }
    fn topology(&self) -> Topology {
        (**self).topology()
    }
    fn params(&self) -> BTreeMap<String, f64> {
        (**self).params()
    }
    fn condition(&self) -> Condition {
        (**self).condition()
    }
    fn known_rates(&self) -> Option<Vec<(f64, f64)>> {
        (**self).known_rates()
    }
    fn step(&self, x: &[T]) -> Vec<T> {
        (**self).step(x)
    }
    fn inverse_step(&self, x: &[T]) -> Result<Vec<T>> {
        (**self).inverse_step(x)
    }
    fn inverse_step_shadow(&self, x: &[T]) -> Result<Vec<T>> {
        (**self).inverse_step_shadow(x)
    }
    fn jacobian(&self, x: &[T]) -> Mat<T> {
        (**self).jacobian(x)
    }
    fn step_delta(&self, x: &[T], d: &[T]) -> Vec<T> {
        (**self).step_delta(x, d)
    }
    fn translate(&self, x: &[T], d: &[T]) -> Vec<T> {
        (**self).translate(x, d)
    }
    fn difference(&self, x: &[T], y: &[T]) -> Vec<T> {
        (**self).difference(x, y)
    }
    fn fixed_frame(&self) -> Option<Vec<Vec<T>>> {
        (**self).fixed_frame()
    }
    fn flat_leaves(&self) -> bool {
        (**self).flat_leaves()
    }
    fn split_dims(&self) -> Option<(usize, usize)> {
        (**self).split_dims()
    }
    fn is_linear(&self) -> bool {
        (**self).is_linear()
    }
    fn block(&self) -> usize {
        (**self).block()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// Reduce into `[0, 1)`.
#[inline]
pub(crate) fn wrap<T: Real>(v: T) -> T {
    let r = v - v.floor();
    if r >= T::one() {
        T::zero()
    } else {
        r
    }
}

/// Reduce into `[−1/2, 1/2)`.
#[inline]
pub(crate) fn wrap_centered<T: Real>(v: T) -> T {
    let h = T::of(0.5);
    wrap(v + h) - h
}

/// `sin(2π(t + h)) − sin(2πt)` without cancellation for small `h`.
#[inline]
pub(crate) fn sin2pi_diff<T: Real>(t: T, h: T) -> T {
    let two_pi = T::TAU();
    T::of(2.0) * (two_pi * (t + h * T::of(0.5))).cos() * (T::PI() * h).sin()
}

/// `cos(2π(t + h)) − cos(2πt)` without cancellation for small `h`.
#[inline]
pub(crate) fn cos2pi_diff<T: Real>(t: T, h: T) -> T {
    let two_pi = T::TAU();
    -T::of(2.0) * (two_pi * (t + h * T::of(0.5))).sin() * (T::PI() * h).sin()
}

/// Leading eigenvalue `(3 + √5)/2` of the cat matrix.
pub fn cat_lambda<T: Real>() -> T {
    (T::of(3.0) + T::of(5.0).sqrt()) / T::of(2.0)
}

/// Unit unstable eigenvector of `[[2,1],[1,1]]`.
pub fn cat_unstable<T: Real>() -> Vec<T> {
    let t = cat_lambda::<T>() - T::of(2.0);
    let n = (T::one() + t * t).sqrt();
    vec![T::one() / n, t / n]
}

/// Unit stable eigenvector of `[[2,1],[1,1]]`.
pub fn cat_stable<T: Real>() -> Vec<T> {
    let u = cat_unstable::<T>();
    vec![-u[1], u[0]]
}

pub(crate) fn random_frame<T: Real>(n: usize, k: usize, tag: u64) -> Vec<Vec<T>> {
    let mut r = rng::keyed(0, rng::label::FRAME, tag);
    (0..k).map(|_| (0..n).map(|_| T::of(r.gen_range(-1.0..1.0))).collect()).collect()
}

/// Backward orbit `[f^{-n}x, …, f^{-1}x, x]`.
pub fn backward_orbit<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    x: &[T],
    n: usize,
) -> Result<Vec<Vec<T>>> {
    let mut pts = vec![x.to_vec()];
    for _ in 0..n {
        let p = system.inverse_step_shadow(pts.last().unwrap())?;
        pts.push(p);
    }
    pts.reverse();
    Ok(pts)
}

/// Unstable subspace at `x`: a fixed random frame pushed forward `warmup`
/// steps from `f^{-warmup}(x)` with re-orthonormalization after every step.
pub fn unstable_direction<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    x: &[T],
    warmup: usize,
) -> Result<Subspace<T>> {
    if warmup == 0 {
        return Err(LabError::Domain("warmup must be at least 1".into()));
    }
    let orbit = backward_orbit(system, x, warmup)?;
    let n = system.ambient_dim();
    let mut frame = Subspace::span(&random_frame(n, system.unstable_dim(), 1))?;
    for p in &orbit[..warmup] {
        frame = frame.push(&system.jacobian(p))?;
    }
    Ok(frame)
}

/// Stable subspace at `x`, by pushing a random frame backward from `f^{warmup}(x)`.
pub fn stable_direction<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    x: &[T],
    warmup: usize,
) -> Result<Subspace<T>> {
    if warmup == 0 {
        return Err(LabError::Domain("warmup must be at least 1".into()));
    }
    let n = system.ambient_dim();
    let mut orbit = vec![x.to_vec()];
    for _ in 0..warmup {
        let p = system.step(orbit.last().unwrap());
        orbit.push(p);
    }
    let mut frame = Subspace::span(&random_frame(n, n - system.unstable_dim(), 2))?;
    for p in orbit[..warmup].iter().rev() {
        frame = frame.push(&system.jacobian(p).inverse()?)?;
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cocycle, subspace_angle};
    use crate::scalar::Dd;
    use rand::Rng;

    fn attractor_point<T: Real>(s: &dyn DynamicalSystem<T>, i: usize) -> Vec<T> {
        sample::sample_lambda(s, 64, 11).unwrap().points[i % 64].clone()
    }

    fn zoo() -> Vec<Box<dyn DynamicalSystem<f64>>> {
        vec![
            Box::new(Cat),
            Box::new(PCat::new(0.03).unwrap()),
            Box::new(Solenoid::new(0.5, 0.1).unwrap()),
            Box::new(Prod4::new(0.0)),
            Box::new(Prod4::new(0.02)),
        ]
    }

    fn random_point(s: &dyn DynamicalSystem<f64>, r: &mut impl Rng) -> Vec<f64> {
        match s.topology() {
            Topology::SolidTorus => {
                let rad = 0.5 / 0.9 * r.gen_range(0.0f64..1.0).sqrt();
                let phi: f64 = r.gen_range(0.0..std::f64::consts::TAU);
                vec![r.gen_range(0.0..1.0), rad * phi.cos(), rad * phi.sin()]
            }
            _ => (0..s.ambient_dim()).map(|_| r.gen_range(0.0..1.0)).collect(),
        }
    }

    #[test]
    fn inverse_round_trip_all_systems() {
        let mut r = rng::keyed(1, 0, 0);
        for s in zoo() {
            for _ in 0..1000 {
                let x = random_point(s.as_ref(), &mut r);
                let back = s.inverse_step(&s.step(&x)).unwrap();
                assert!(s.distance(&x, &back) < 1e-10, "{} {:?} {:?}", s.label(), x, back);
            }
        }
    }

    #[test]
    fn cocycle_examples() {
        let x = [0.37, 0.81];
        let c = cocycle(&Cat, &x, 3).unwrap();
        assert_eq!(c.value, Mat::from_f64_rows(&[&[13.0, 8.0], &[8.0, 5.0]]));
        for s in zoo() {
            let x = vec![0.25; s.ambient_dim()];
            let c = cocycle(s.as_ref(), &x, 0).unwrap();
            assert_eq!(c.value, Mat::identity(s.ambient_dim()));
        }
    }

    #[test]
    fn pcat_five_step_rates() {
        // independent product of the closed-form Jacobians
        let eta = 0.03f64;
        let mut x = [0.2f64, 0.7];
        let mut m = [[1.0f64, 0.0], [0.0, 1.0]];
        for _ in 0..5 {
            let j = [[2.0, 1.0 + eta * (std::f64::consts::TAU * x[1]).cos()], [1.0, 1.0]];
            m = [
                [j[0][0] * m[0][0] + j[0][1] * m[1][0], j[0][0] * m[0][1] + j[0][1] * m[1][1]],
                [j[1][0] * m[0][0] + j[1][1] * m[1][0], j[1][0] * m[0][1] + j[1][1] * m[1][1]],
            ];
            let s = (std::f64::consts::TAU * x[1]).sin() / std::f64::consts::TAU;
            x = [(2.0 * x[0] + x[1] + eta * s).rem_euclid(1.0), (x[0] + x[1]).rem_euclid(1.0)];
        }
        let c = cocycle(&PCat::new(0.03).unwrap(), &[0.2, 0.7], 5).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.value[(i, j)] - m[i][j]).abs() < 1e-9 * m[i][j].abs().max(1.0));
            }
        }
        let l = cat_lambda::<f64>().ln();
        assert!((c.log_norm / 5.0 - l).abs() <= 0.2);
        // area preservation makes the conorm of the full product the reciprocal rate
        assert!((c.log_conorm / 5.0 + l).abs() <= 0.2);
    }

    #[test]
    fn cocycle_inverse_identity_extended_precision() {
        let systems: Vec<Box<dyn DynamicalSystem<Dd>>> = vec![
            Box::new(Cat),
            Box::new(PCat::new(0.03).unwrap()),
            Box::new(Solenoid::new(0.5, 0.1).unwrap()),
            Box::new(Prod4::new(0.02)),
        ];
        for s in systems {
            let x: Vec<Dd> = match s.topology() {
                Topology::SolidTorus => attractor_point(s.as_ref(), 5),
                _ => (0..s.ambient_dim()).map(|i| Dd::of(0.1 + 0.17 * i as f64)).collect(),
            };
            for n in [1i64, 7, 20] {
                let fwd = cocycle(s.as_ref(), &x, n).unwrap();
                let mut y = x.clone();
                for _ in 0..n {
                    y = s.step(&y);
                }
                let bwd = cocycle(s.as_ref(), &y, -n).unwrap();
                let prod = bwd.value.matmul(&fwd.value);
                let err = prod.minus(&Mat::identity(s.ambient_dim())).max_abs().to64();
                // the solenoid's 20-step product has condition number ~1e26
                let cond = (fwd.value.norm2() * bwd.value.norm2()).to64();
                assert!(err < 1e-8f64.max(64.0 * 1e-32 * cond), "{} n={n} err={err}", s.label());
            }
        }
    }

    #[test]
    fn cocycle_inverse_identity_f64_relative() {
        // in f64 the product is exact up to cond(A)·eps
        for s in zoo() {
            let mut x = vec![0.31; s.ambient_dim()];
            if s.topology() == Topology::SolidTorus {
                x = attractor_point(s.as_ref(), 3);
            }
            for n in [1i64, 5, 10, 20] {
                let fwd = cocycle(s.as_ref(), &x, n).unwrap();
                let mut y = x.clone();
                for _ in 0..n {
                    y = s.step(&y);
                }
                let bwd = cocycle(s.as_ref(), &y, -n).unwrap();
                let err = bwd.value.matmul(&fwd.value).minus(&Mat::identity(s.ambient_dim())).max_abs();
                let cond = fwd.value.norm2() * bwd.value.norm2();
                assert!(err <= 1e-8f64.max(64.0 * f64::EPSILON * cond), "{} n={n}", s.label());
            }
        }
    }

    #[test]
    fn unstable_direction_examples() {
        let e = unstable_direction(&Cat, &[0.3, 0.4], 30).unwrap();
        let truth = Subspace::span(&[cat_unstable::<f64>()]).unwrap();
        assert!(subspace_angle(&e, &truth).unwrap() < 1e-10);

        let p = Prod4::new(0.0);
        let e = unstable_direction(&p, &[0.1, 0.2, 0.3, 0.4], 40).unwrap();
        let u = cat_unstable::<f64>();
        let truth = Subspace::span(&[vec![u[0], u[1], 0.0, 0.0], vec![0.0, 0.0, u[0], u[1]]]).unwrap();
        assert!(subspace_angle(&e, &truth).unwrap() < 1e-9);

        let pc = PCat::new(0.03).unwrap();
        let x = [0.2, 0.7];
        let e40 = unstable_direction(&pc, &x, 40).unwrap();
        let e80 = unstable_direction(&pc, &x, 80).unwrap();
        let cat_e = Subspace::span(&[cat_unstable::<f64>()]).unwrap();
        assert!(subspace_angle(&e40, &cat_e).unwrap() < 0.1);
        assert!(subspace_angle(&e40, &e80).unwrap() < 1e-8);
    }

    #[test]
    fn unstable_bundle_is_invariant() {
        let mut r = rng::keyed(2, 0, 0);
        for s in zoo() {
            for _ in 0..20 {
                let x = match s.topology() {
                    Topology::SolidTorus => attractor_point(s.as_ref(), r.gen_range(0..64)),
                    _ => random_point(s.as_ref(), &mut r),
                };
                let e = unstable_direction(s.as_ref(), &x, 40).unwrap();
                let pushed = e.push(&s.jacobian(&x)).unwrap();
                let next = unstable_direction(s.as_ref(), &s.step(&x), 40).unwrap();
                assert!(subspace_angle(&pushed, &next).unwrap() < 1e-8, "{}", s.label());
            }
        }
    }

    #[test]
    fn cat_expansion_exact_on_eigendirection() {
        let v = cat_unstable::<f64>();
        let lam = cat_lambda::<f64>();
        let mut w = v.clone();
        for n in 1..=20 {
            w = Cat.jacobian(&[0.0, 0.0]).mul_vec(&w);
            let rel = (crate::linalg::norm(&w) / lam.powi(n) - 1.0).abs();
            assert!(rel < 1e-14 * n as f64);
        }
    }

    #[test]
    fn step_delta_matches_direct_difference() {
        let mut r = rng::keyed(3, 0, 0);
        for s in zoo() {
            for _ in 0..100 {
                let mut x = random_point(s.as_ref(), &mut r);
                if s.topology() == Topology::SolidTorus {
                    x = s.step(&x);
                }
                let d: Vec<f64> = (0..s.ambient_dim()).map(|_| r.gen_range(-1e-3..1e-3)).collect();
                let fd = s.step_delta(&x, &d);
                let direct = s.difference(&s.step(&x), &s.step(&s.translate(&x, &d)));
                for (a, b) in fd.iter().zip(&direct) {
                    assert!((a - b).abs() < 1e-12, "{}", s.label());
                }
            }
        }
    }
}
