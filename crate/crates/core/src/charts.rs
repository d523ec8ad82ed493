//! Unstable charts along an orbit window.
//!
//! The local unstable leaf through `x` is parametrized as a graph over the
//! chart frame `E_x`: `Φ_x(u)` is the leaf point whose displacement `D`
//! from `x` satisfies `E_xᵀ D = u`. Leaves are realized by pushing a flat
//! piece forward from `leaf_depth` steps in the past, so the same leaf
//! parameter serves every chart of the window and `f̂`, `f̂⁻¹` reduce to
//! moving along one pushed displacement.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::linalg::{norm, Mat, Subspace};
use crate::scalar::Real;
use crate::systems::{backward_orbit, random_frame, DynamicalSystem, LambdaSample, NeighborGrid, Topology};

/// Chart radius `ε₀`.
pub const EPS0: f64 = 0.2;
/// Domain of the chart maps, `ε₁`.
pub const EPS1: f64 = 0.1;
/// Working radius `ε₂` for linearization probes.
pub const EPS2: f64 = 0.05;

/// Steps after which a pushed flat piece agrees with the unstable leaf to
/// working precision. Zero for systems with affine leaves.
pub fn leaf_depth<T: Real, S: DynamicalSystem<T> + ?Sized>(system: &S) -> usize {
    if system.flat_leaves() {
        return 0;
    }
    let base = (-T::epsilon().to64().log10() * 1.25).ceil() as usize;
    base.div_ceil(system.block())
}

/// Orbit segment `x_{-back} … x_{fwd}` with unstable frames, leaf tangents and
/// the chart-map derivatives `df̂_{x_i}(0)`.
#[derive(Clone, Debug)]
pub struct OrbitWindow<T> {
    points: Vec<Vec<T>>,
    frames: Vec<Mat<T>>,
    tangents: Vec<Mat<T>>,
    factors: Vec<Mat<T>>,
    origin: usize,
    first: usize,
    depth: usize,
}

impl<T: Real> OrbitWindow<T> {
    pub fn new<S: DynamicalSystem<T> + ?Sized>(system: &S, x: &[T], back: usize, fwd: usize) -> Result<Self> {
        let n = system.ambient_dim();
        if x.len() != n {
            return Err(LabError::Dimension(format!("point of length {} for ambient dim {n}", x.len())));
        }
        let d = system.unstable_dim();
        let depth = leaf_depth(system);
        let prefix = back + 2 * depth;
        let mut points = backward_orbit(system, x, prefix)?;
        for _ in 0..fwd {
            let p = system.step(points.last().unwrap());
            points.push(p);
        }
        let len = points.len();
        let fixed = match system.fixed_frame() {
            Some(f) => Some(Subspace::span(&f)?.matrix()),
            None => None,
        };
        let mut frame = match &fixed {
            Some(m) => m.clone(),
            None => Subspace::span(&random_frame::<T>(n, d, 1))?.matrix(),
        };
        let mut tangent = frame.clone();
        let mut frames = Vec::with_capacity(len);
        let mut tangents = Vec::with_capacity(len);
        let mut factors = Vec::with_capacity(len.saturating_sub(1));
        frames.push(frame.clone());
        tangents.push(tangent.clone());
        for k in 0..len - 1 {
            let jac = system.jacobian(&points[k]);
            let pushed = jac.matmul(&tangent);
            let next_frame = match &fixed {
                Some(m) => m.clone(),
                None => Subspace::span(&jac.matmul(&frame).columns())?.matrix(),
            };
            let a = next_frame.transpose().matmul(&pushed);
            tangent = pushed.matmul(&a.inverse()?);
            frame = next_frame;
            factors.push(a);
            frames.push(frame.clone());
            tangents.push(tangent.clone());
        }
        Ok(OrbitWindow { points, frames, tangents, factors, origin: prefix, first: 2 * depth, depth })
    }

    pub fn back(&self) -> usize {
        self.origin - self.first
    }

    pub fn fwd(&self) -> usize {
        self.points.len() - 1 - self.origin
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn unstable_dim(&self) -> usize {
        self.frames[0].cols()
    }

    fn slot(&self, i: isize) -> Result<usize> {
        let v = self.origin as isize + i;
        if v < self.first as isize || v >= self.points.len() as isize {
            return Err(LabError::Orbit(format!(
                "index {i} outside window [-{}, {}]",
                self.back(),
                self.fwd()
            )));
        }
        Ok(v as usize)
    }

    pub fn point(&self, i: isize) -> Result<&[T]> {
        Ok(&self.points[self.slot(i)?])
    }

    /// Orthonormal chart frame at `x_i` as an n × d matrix.
    pub fn frame_matrix(&self, i: isize) -> Result<&Mat<T>> {
        Ok(&self.frames[self.slot(i)?])
    }

    pub fn frame(&self, i: isize) -> Result<Subspace<T>> {
        Subspace::span(&self.frame_matrix(i)?.columns())
    }

    /// Leaf tangent `dΦ_{x_i}(0)`, normalized so that `Eᵀ T = I`.
    pub fn tangent(&self, i: isize) -> Result<&Mat<T>> {
        Ok(&self.tangents[self.slot(i)?])
    }

    /// `df̂_{x_i}(0)` in chart coordinates.
    pub fn factor(&self, i: isize) -> Result<&Mat<T>> {
        let v = self.slot(i)?;
        self.factors.get(v).ok_or_else(|| LabError::Orbit(format!("no forward step from index {i}")))
    }

    /// `df̂^{j−i}_{x_i}(0)`, inverted when `j < i`.
    pub fn transfer(&self, i: isize, j: isize) -> Result<Mat<T>> {
        if j < i {
            return self.transfer(j, i)?.inverse();
        }
        let (a, b) = (self.slot(i)?, self.slot(j)?);
        let mut m = Mat::identity(self.unstable_dim());
        for f in &self.factors[a..b] {
            m = f.matmul(&m);
        }
        Ok(m)
    }

    /// Chart constant `C`: largest `‖dΦ_{x_i}(0)‖` over the window.
    pub fn chart_constant(&self) -> T {
        self.tangents[self.first..].iter().map(|t| t.norm2()).fold(T::one(), |a, b| a.max(b))
    }

    /// Push the leaf point with parameter `s` at slot `a` forward to slot `b`,
    /// calling `visit(slot, displacement, tangent)` at every slot from `a`;
    /// `visit` returning false stops early. Returns the last slot reached.
    fn push<S: DynamicalSystem<T> + ?Sized>(
        &self,
        system: &S,
        a: usize,
        s: &[T],
        b: usize,
        with_tangent: bool,
        visit: &mut dyn FnMut(usize, &[T], Option<&Mat<T>>) -> bool,
    ) -> usize {
        let mut disp = self.tangents[a].mul_vec(s);
        let mut tan = with_tangent.then(|| self.tangents[a].clone());
        if !visit(a, &disp, tan.as_ref()) {
            return a;
        }
        for k in a..b {
            if let Some(m) = tan.as_mut() {
                let p = system.translate(&self.points[k], &disp);
                *m = system.jacobian(&p).matmul(m);
            }
            disp = system.step_delta(&self.points[k], &disp);
            if !visit(k + 1, &disp, tan.as_ref()) {
                return k + 1;
            }
        }
        b
    }

    /// Leaf parameter at slot `a` of the point with chart coordinate `u` at slot `b`.
    fn solve<S: DynamicalSystem<T> + ?Sized>(&self, system: &S, a: usize, b: usize, u: &[T]) -> Result<Vec<T>> {
        let d = self.unstable_dim();
        let un = norm(u);
        if un == T::zero() {
            return Ok(vec![T::zero(); d]);
        }
        let mut chord = Mat::identity(d);
        for f in &self.factors[a..b] {
            chord = f.matmul(&chord);
        }
        let mut s = chord.solve(u)?;
        let tol = T::of(4.0) * T::epsilon() * un;
        let eb = self.frames[b].transpose();
        let mut prev = T::infinity();
        for _ in 0..50 {
            let mut disp = Vec::new();
            let mut tan = None;
            self.push(system, a, &s, b, true, &mut |k, dv, tv| {
                if k == b {
                    disp = dv.to_vec();
                    tan = tv.cloned();
                }
                true
            });
            let g: Vec<T> = eb.mul_vec(&disp).iter().zip(u).map(|(&p, &q)| p - q).collect();
            let gn = norm(&g);
            if gn <= tol || (gn >= prev * T::of(0.5) && gn <= T::of(1e3) * T::epsilon() * un) {
                return Ok(s);
            }
            prev = gn;
            let jac = eb.matmul(&tan.unwrap());
            let step = jac.solve(&g)?;
            for (si, di) in s.iter_mut().zip(&step) {
                *si = *si - *di;
            }
        }
        Err(LabError::Orbit(format!("leaf solve did not converge for |u| = {:e}", un.to64())))
    }
}

/// Chart `Φ_x` at one point of a shared orbit window.
#[derive(Clone, Debug)]
pub struct UnstableChart<T> {
    window: Arc<OrbitWindow<T>>,
    index: isize,
    pub radius: f64,
}

impl<T: Real> UnstableChart<T> {
    /// Chart at `x` whose window supports `back` pullbacks and `fwd` forward steps.
    pub fn new<S: DynamicalSystem<T> + ?Sized>(system: &S, x: &[T], back: usize, fwd: usize) -> Result<Self> {
        Ok(UnstableChart { window: Arc::new(OrbitWindow::new(system, x, back, fwd)?), index: 0, radius: EPS0 })
    }

    /// Chart at `f^q(x)` sharing this chart's window.
    pub fn shifted(&self, q: isize) -> Result<Self> {
        let i = self.index + q;
        self.window.slot(i)?;
        Ok(UnstableChart { window: self.window.clone(), index: i, radius: self.radius })
    }

    pub fn window(&self) -> &OrbitWindow<T> {
        &self.window
    }

    pub fn index(&self) -> isize {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.window.unstable_dim()
    }

    pub fn base(&self) -> &[T] {
        self.window.point(self.index).unwrap()
    }

    pub fn frame(&self) -> Subspace<T> {
        self.window.frame(self.index).unwrap()
    }

    pub fn frame_matrix(&self) -> &Mat<T> {
        self.window.frame_matrix(self.index).unwrap()
    }

    pub fn tangent(&self) -> &Mat<T> {
        self.window.tangent(self.index).unwrap()
    }

    pub fn constant(&self) -> T {
        self.window.chart_constant()
    }

    /// `df̂^{q}_x(0)`, negative `q` for the inverse.
    pub fn transfer(&self, q: isize) -> Result<Mat<T>> {
        self.window.transfer(self.index, self.index + q)
    }

    /// Pullbacks still available from this chart.
    pub fn back(&self) -> usize {
        (self.window.back() as isize + self.index) as usize
    }

    pub fn fwd(&self) -> usize {
        (self.window.fwd() as isize - self.index) as usize
    }

    fn slot_of(&self, q: isize) -> Result<usize> {
        self.window.slot(self.index + q)
    }

    fn leaf_start(&self, q: isize) -> Result<usize> {
        let lo = self.slot_of(q.min(0))?;
        Ok(lo - self.window.depth)
    }
}

/// Leaf point through `u` followed along the window: `coords[j]` are the chart
/// coordinates at `f^{j-q}(x)` for `j = 0, 1, …`, where `q` is the pullback depth.
#[derive(Clone, Debug)]
pub struct LeafChain<T> {
    pub coords: Vec<Vec<T>>,
    pub pulled: usize,
}

impl<T: Real> LeafChain<T> {
    /// `f̂_x^{-q}(u)`.
    pub fn origin(&self) -> &[T] {
        &self.coords[0]
    }

    /// Chart coordinates at `f^j(x)` (`j` relative to the pullback base).
    pub fn at(&self, j: usize) -> Option<&[T]> {
        self.coords.get(j).map(|v| v.as_slice())
    }
}

/// Follows the leaf point with chart coordinate `u` at `x`: pulled back `q`
/// steps, then forward to at most `q + fwd`. Stops early once `stop(j, coords)`
/// returns true for an index past the pullback.
pub fn leaf_chain<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    q: usize,
    fwd: usize,
    stop: &mut dyn FnMut(usize, &[T]) -> bool,
) -> Result<LeafChain<T>> {
    let w = &chart.window;
    let target = chart.slot_of(0)?;
    let lo = chart.slot_of(-(q as isize))?;
    let hi = chart.slot_of(fwd as isize)?;
    let a = chart.leaf_start(-(q as isize))?;
    let s = w.solve(system, a, target, u)?;
    let mut coords = Vec::with_capacity(hi - lo + 1);
    w.push(system, a, &s, hi, false, &mut |k, dv, _| {
        if k < lo {
            return true;
        }
        let c = w.frames[k].tmul_vec(dv);
        let j = k - lo;
        let halt = k > target && stop(j, &c);
        coords.push(c);
        !halt
    });
    Ok(LeafChain { coords, pulled: q })
}

fn check_radius<T: Real>(u: &[T], limit: f64) -> Result<()> {
    let n = norm(u).to64();
    if n > limit * (1.0 + 1e-12) {
        return Err(LabError::Radius { norm: n, limit });
    }
    Ok(())
}

/// Displacement `Φ_x(u) − x` on the covering space.
pub fn phi_displacement<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
) -> Result<Vec<T>> {
    let w = &chart.window;
    let b = chart.slot_of(0)?;
    let a = chart.leaf_start(0)?;
    let s = w.solve(system, a, b, u)?;
    let mut out = Vec::new();
    w.push(system, a, &s, b, false, &mut |k, dv, _| {
        if k == b {
            out = dv.to_vec();
        }
        true
    });
    Ok(out)
}

/// `Φ_x(u)`.
pub fn phi<T: Real, S: DynamicalSystem<T> + ?Sized>(system: &S, chart: &UnstableChart<T>, u: &[T]) -> Result<Vec<T>> {
    let d = phi_displacement(system, chart, u)?;
    Ok(system.translate(chart.base(), &d))
}

/// `f̂_x(u)`, coordinates of `f(Φ_x(u))` in the chart at `f(x)`.
pub fn hat_f<T: Real, S: DynamicalSystem<T> + ?Sized>(system: &S, chart: &UnstableChart<T>, u: &[T]) -> Result<Vec<T>> {
    check_radius(u, EPS1)?;
    let c = leaf_chain(system, chart, u, 0, 1, &mut |_, _| false)?;
    Ok(c.coords[1].clone())
}

/// `f̂^p_x(u)` without a radius check.
pub fn hat_f_iter<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    p: usize,
) -> Result<Vec<T>> {
    let c = leaf_chain(system, chart, u, 0, p, &mut |_, _| false)?;
    Ok(c.coords[p].clone())
}

/// `f̂_x^{-p}(u)`.
pub fn hat_f_pullback<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    p: usize,
) -> Result<Vec<T>> {
    check_radius(u, EPS1)?;
    pullback(system, chart, u, p)
}

/// `f̂_x^{-p}(u)` without a radius check.
pub fn pullback<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    p: usize,
) -> Result<Vec<T>> {
    let c = leaf_chain(system, chart, u, p, 0, &mut |_, _| false)?;
    Ok(c.coords[0].clone())
}

/// Derivative of `f̂^{q}` at the chart point `w` of `x` (negative `q` for
/// the inverse), by pushing tangents along the leaf.
pub fn d_hat_f_iter<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    w: &[T],
    q: isize,
) -> Result<Mat<T>> {
    let win = &chart.window;
    let b = chart.slot_of(0)?;
    let c = chart.slot_of(q)?;
    let a = chart.leaf_start(q)?;
    let s = win.solve(system, a, b, w)?;
    let (mut tb, mut tc) = (None, None);
    win.push(system, a, &s, b.max(c), true, &mut |k, _, tv| {
        if k == b {
            tb = tv.cloned();
        }
        if k == c {
            tc = tv.cloned();
        }
        true
    });
    let pb = win.frames[b].transpose().matmul(&tb.unwrap());
    let pc = win.frames[c].transpose().matmul(&tc.unwrap());
    Ok(pc.matmul(&pb.inverse()?))
}

/// `df̂_x(w)`.
pub fn d_hat_f<T: Real, S: DynamicalSystem<T> + ?Sized>(system: &S, chart: &UnstableChart<T>, w: &[T]) -> Result<Mat<T>> {
    d_hat_f_iter(system, chart, w, 1)
}

/// Ambient distance between `f(Φ_x(u))`, evaluated directly, and
/// `Φ_{f(x)}(f̂_x(u))`.
pub fn projection_error<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
) -> Result<T> {
    let direct = system.step(&phi(system, chart, u)?);
    let next = chart.shifted(1)?;
    let image = phi(system, &next, &hat_f_iter(system, chart, u, 1)?)?;
    Ok(system.distance(&direct, &image))
}

/// Points of the basic set on the leaf through a chart center, in chart
/// coordinates.
#[derive(Clone, Debug)]
pub struct LocalTrace<T> {
    pub eps: f64,
    pub coords: Vec<Vec<T>>,
}

impl<T> LocalTrace<T> {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// A basic-set sample prepared for trace queries.
#[derive(Clone, Debug)]
pub struct LambdaIndex<T> {
    pub sample: LambdaSample<T>,
    grid: Option<NeighborGrid>,
}

impl<T: Real> LambdaIndex<T> {
    pub fn new(sample: LambdaSample<T>, topology: Topology) -> Self {
        let grid = (!sample.is_full()).then(|| sample.grid(topology));
        LambdaIndex { sample, grid }
    }

    pub fn resolution(&self) -> f64 {
        self.sample.resolution
    }
}

/// Tensor lattice of spacing `h` on the cube `[-r, r]^d`, faces included.
pub fn chart_lattice<T: Real>(r: f64, h: f64, d: usize) -> Vec<Vec<T>> {
    chart_lattice_with(r, h, d, &[])
}

/// [`chart_lattice`] with the extra axis values `±f` for each `f` in `faces`
/// below `r`.
pub fn chart_lattice_with<T: Real>(r: f64, h: f64, d: usize, faces: &[f64]) -> Vec<Vec<T>> {
    let k = (r / h * (1.0 + 1e-12)).floor() as i64;
    let mut axis: Vec<f64> = (-k..=k).map(|j| j as f64 * h).collect();
    if (k as f64) * h < r * (1.0 - 1e-12) {
        axis.insert(0, -r);
        axis.push(r);
    }
    for &f in faces {
        if f > 0.0 && f <= r * (1.0 + 1e-12) {
            axis.push(f.min(r));
            axis.push(-f.min(r));
        }
    }
    axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    axis.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * r);
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &a in &axis {
                let mut q: Vec<T> = p.clone();
                q.push(T::of(a));
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// `Λ̂^u_x(eps)`. When the basic set is the whole manifold every leaf point
/// belongs to it, and the trace is the chart lattice at the sample
/// resolution. Otherwise sample points near the leaf are projected onto it
/// and kept when their transverse offset is within the sample's `trace_tol`.
pub fn local_trace<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    lambda: &LambdaIndex<T>,
    eps: f64,
) -> Result<LocalTrace<T>> {
    trace_where(system, chart, lambda, eps, &|u: &[T]| norm(u).to64() <= eps * (1.0 + 1e-12))
}

/// Trace over the cube `‖u‖_∞ ≤ r`, filtered by `keep`.
pub fn trace_where<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    lambda: &LambdaIndex<T>,
    r: f64,
    keep: &dyn Fn(&[T]) -> bool,
) -> Result<LocalTrace<T>> {
    trace_with_faces(system, chart, lambda, r, &[], keep)
}

/// [`trace_where`] whose lattice (full basic sets only) also carries the
/// axis values `±f` for `f` in `faces`.
pub fn trace_with_faces<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    lambda: &LambdaIndex<T>,
    r: f64,
    faces: &[f64],
    keep: &dyn Fn(&[T]) -> bool,
) -> Result<LocalTrace<T>> {
    if r > chart.radius * (1.0 + 1e-12) {
        return Err(LabError::Radius { norm: r, limit: chart.radius });
    }
    let d = chart.dim();
    let coords = match &lambda.grid {
        None => chart_lattice_with::<T>(r, lambda.sample.resolution, d, faces).into_iter().filter(|u| keep(u)).collect(),
        Some(grid) => {
            let x = chart.base();
            let reach = r * (d as f64).sqrt() * chart.constant().to64() + lambda.sample.trace_tol;
            let e = chart.frame_matrix();
            let tol = T::of(lambda.sample.trace_tol);
            let mut out = Vec::new();
            for i in grid.within(&crate::linalg::to_f64(x), reach) {
                let diff = system.difference(x, &lambda.sample.points[i]);
                let u = e.tmul_vec(&diff);
                if u.iter().any(|c| c.abs().to64() > r) || !keep(&u) {
                    continue;
                }
                let on_leaf = phi_displacement(system, chart, &u)?;
                let off: Vec<T> = diff.iter().zip(&on_leaf).map(|(&p, &q)| p - q).collect();
                if norm(&off) <= tol {
                    out.push(u);
                }
            }
            out
        }
    };
    Ok(LocalTrace { eps: r, coords })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{cat_lambda, sample_lambda, Blocked, Cat, PCat, Prod4, Solenoid};
    use crate::{Dd, Float};

    fn v1(x: f64) -> Vec<f64> {
        vec![x]
    }

    #[test]
    fn cat_chart_is_linear() {
        let c = UnstableChart::new(&Cat, &[0.3, 0.4], 12, 12).unwrap();
        let l = cat_lambda::<f64>();
        for u in [0.05, -0.1, 0.01] {
            let y = hat_f(&Cat, &c, &v1(u)).unwrap();
            assert!((y[0] - l * u).abs() < 1e-15);
            let z = pullback(&Cat, &c, &v1(u), 7).unwrap();
            assert!((z[0] - u / l.powi(7)).abs() < 1e-15 * u.abs());
        }
        assert_eq!(hat_f(&Cat, &c, &v1(0.0)).unwrap(), vec![0.0]);
        assert!((c.constant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn radius_errors() {
        let c = UnstableChart::new(&Cat, &[0.3, 0.4], 2, 2).unwrap();
        assert!(matches!(hat_f(&Cat, &c, &v1(0.2)), Err(LabError::Radius { .. })));
        assert!(matches!(hat_f_pullback(&Cat, &c, &v1(-0.2), 1), Err(LabError::Radius { .. })));
    }

    #[test]
    fn pcat_chart_matches_ambient_map() {
        let s = PCat::new(0.03).unwrap();
        let c = UnstableChart::new(&s, &[0.2, 0.7], 4, 4).unwrap();
        let l = cat_lambda::<f64>();
        let u = v1(0.01);
        let y = hat_f(&s, &c, &u).unwrap();
        assert!((y[0].abs() / (l * 0.01) - 1.0).abs() <= 0.1);
        // independent route: map the ambient point, project with the frame at f(x)
        let p = phi(&s, &c, &u).unwrap();
        let fp = s.step(&p);
        let next = c.shifted(1).unwrap();
        let diff = s.difference(next.base(), &fp);
        let proj = next.frame_matrix().tmul_vec(&diff);
        assert!((proj[0] - y[0]).abs() < 1e-14);
        assert!(projection_error(&s, &c, &u).unwrap() < 1e-6 * 0.01);
    }

    #[test]
    fn pullback_round_trip_and_contraction() {
        let s = PCat::new(0.03).unwrap();
        let c = UnstableChart::new(&s, &[0.61, 0.13], 10, 0).unwrap();
        for u in [0.08, -0.05, 0.003] {
            for p in 1..=10 {
                let v = hat_f_pullback(&s, &c, &v1(u), p).unwrap();
                assert!(v[0].abs() < u.abs());
                let back = hat_f_iter(&s, &c.shifted(-(p as isize)).unwrap(), &v, p).unwrap();
                assert!((back[0] - u).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pullback_norms_within_rate_chain() {
        let s = PCat::new(0.03).unwrap();
        let c = UnstableChart::new(&s, &[0.61, 0.13], 8, 0).unwrap();
        let u = v1(0.05);
        let chain = leaf_chain(&s, &c, &u, 8, 0, &mut |_, _| false).unwrap();
        for j in 0..8 {
            let here = c.shifted(j as isize - 8).unwrap();
            let a = here.window().factor(here.index()).unwrap()[(0, 0)].abs();
            // |f̂(v) − f̂(0)| between the conorm and norm of df̂ with a D·|v| margin
            let dfv = d_hat_f(&s, &here, &chain.coords[j]).unwrap()[(0, 0)].abs();
            let (lo, hi) = (a.min(dfv) * 0.98, a.max(dfv) * 1.02);
            let ratio = chain.coords[j + 1][0].abs() / chain.coords[j][0].abs();
            assert!(ratio >= lo && ratio <= hi, "{ratio} {lo} {hi}");
        }
    }

    #[test]
    fn chart_equivariance_one_dimensional() {
        let systems: Vec<Box<dyn DynamicalSystem<f64>>> =
            vec![Box::new(Cat), Box::new(PCat::new(0.05).unwrap()), Box::new(Solenoid::new(0.5, 0.1).unwrap())];
        for s in systems {
            let x = sample_lambda(s.as_ref(), 16, 3).unwrap().points[5].clone();
            let c = UnstableChart::new(s.as_ref(), &x, 2, 2).unwrap();
            for u in [0.02, -0.07] {
                let lhs = s.step(&phi(s.as_ref(), &c, &v1(u)).unwrap());
                let rhs = phi(s.as_ref(), &c.shifted(1).unwrap(), &hat_f(s.as_ref(), &c, &v1(u)).unwrap()).unwrap();
                assert!(s.distance(&lhs, &rhs) < 1e-8, "{}", s.label());
            }
        }
    }

    #[test]
    fn chart_constant_bounded() {
        let systems: Vec<Box<dyn DynamicalSystem<f64>>> = vec![
            Box::new(Cat),
            Box::new(PCat::new(0.05).unwrap()),
            Box::new(Solenoid::new(0.5, 0.1).unwrap()),
            Box::new(Prod4::new(0.0)),
            Box::new(Prod4::new(0.02)),
        ];
        for s in systems {
            let x = sample_lambda(s.as_ref(), 16, 3).unwrap().points[7].clone();
            let c = UnstableChart::new(s.as_ref(), &x, 4, 4).unwrap();
            let k = c.constant();
            assert!((1.0..=2.0).contains(&k), "{} C={k}", s.label());
        }
    }

    #[test]
    fn solenoid_chart_doubles_angle() {
        let s = Solenoid::<f64>::new(0.5, 0.1).unwrap();
        let x = sample_lambda(&s, 8, 1).unwrap().points[3].clone();
        let c = UnstableChart::new(&s, &x, 12, 12).unwrap();
        let y = hat_f_iter(&s, &c, &v1(0.01), 5).unwrap();
        assert!((y[0] - 0.32).abs() < 1e-15);
        let z = pullback(&s, &c, &v1(0.08), 12).unwrap();
        assert!((z[0] - 0.08 / 4096.0).abs() < 1e-18);
        assert!(c.transfer(3).unwrap()[(0, 0)] == 8.0);
    }

    #[test]
    fn extended_precision_pullback() {
        let s = Blocked::new(PCat::<Dd>::new(0.03).unwrap(), 5).unwrap();
        let x = [Dd::of(0.2), Dd::of(0.7)];
        let c = UnstableChart::new(&s, &x, 6, 0).unwrap();
        let u = [Dd::of(0.02)];
        let v = pullback(&s, &c, &u, 6).unwrap();
        let back = hat_f_iter(&s, &c.shifted(-6).unwrap(), &v, 6).unwrap();
        assert!((back[0] - u[0]).abs().to64() < 1e-28);
    }

    #[test]
    fn lattice_trace_on_cat() {
        let sample = sample_lambda::<f64, _>(&Cat, 10_000, 0).unwrap();
        let idx = LambdaIndex::new(sample, Topology::Torus2);
        let c = UnstableChart::new(&Cat, &[0.3, 0.4], 0, 0).unwrap();
        let t = local_trace(&Cat, &c, &idx, 0.1).unwrap();
        assert_eq!(t.len(), 21);
        assert!(t.coords.iter().any(|u| u[0] == 0.0));
        assert!(t.coords.iter().all(|u| u[0].abs() <= 0.1));
        let dense = LambdaIndex::new(sample_lambda::<f64, _>(&Cat, 40_000, 0).unwrap(), Topology::Torus2);
        assert_eq!(local_trace(&Cat, &c, &dense, 0.1).unwrap().len(), 41);
        let tiny = local_trace(&Cat, &c, &idx, 0.001).unwrap();
        assert!(tiny.coords.iter().any(|u| u[0] == 0.0));
    }

    #[test]
    fn lattice_includes_faces() {
        let l = chart_lattice::<f64>(0.1, 0.03, 2);
        assert_eq!(l.len(), 81);
        assert!(l.iter().any(|u| u[0] == 0.1 && u[1] == -0.1));
        let f = chart_lattice_with::<f64>(0.1, 0.03, 1, &[0.05, 0.06, 0.2]);
        assert_eq!(f.len(), 11);
        assert!(f.iter().any(|u| u[0] == -0.05));
    }

    #[test]
    fn solenoid_proximity_trace() {
        let s = Solenoid::<f64>::new(0.5, 0.1).unwrap();
        let sample = sample_lambda(&s, 50_000, 2).unwrap();
        let x = sample.points[100].clone();
        let idx = LambdaIndex::new(sample, Topology::SolidTorus);
        let c = UnstableChart::new(&s, &x, 0, 0).unwrap();
        let t = local_trace(&s, &c, &idx, 0.1).unwrap();
        assert!(t.coords.iter().any(|u| u[0].abs() < 1e-15));
        assert!(t.len() > 1);
        assert!(t.coords.iter().all(|u| u[0].abs() <= 0.1));
    }
}
