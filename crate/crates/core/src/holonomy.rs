//! Local stable holonomies between unstable charts.

use crate::charts::{phi, UnstableChart};
use crate::error::{LabError, Result};
use crate::linalg::{norm, scale, Mat};
use crate::scalar::Real;
use crate::systems::{backward_orbit, stable_direction, DynamicalSystem};

pub const HOLONOMY_TOL: f64 = 1e-6;
pub const DEFAULT_HORIZON: usize = 25;

/// Stable holonomy from the leaf of `source` to the leaf of `target`.
#[derive(Clone, Debug)]
pub struct HolonomyMap<T> {
    pub source: UnstableChart<T>,
    pub target: UnstableChart<T>,
    pub horizon: usize,
    pub tol: f64,
    /// Largest forward distance at the horizon over all applications so far.
    pub residual: f64,
}

impl<T: Real> HolonomyMap<T> {
    pub fn new(source: UnstableChart<T>, target: UnstableChart<T>, horizon: usize) -> Self {
        HolonomyMap { source, target, horizon, tol: HOLONOMY_TOL, residual: 0.0 }
    }

    pub fn apply<S: DynamicalSystem<T> + ?Sized>(&mut self, system: &S, u: &[T]) -> Result<Vec<T>> {
        let (w, r) = holonomy_with(system, &self.source, &self.target, u, self.horizon, self.tol)?;
        self.residual = self.residual.max(r);
        Ok(w)
    }
}

/// `Ĥ^s_{x,y}(u)` with the default tolerance.
pub fn stable_holonomy<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart_x: &UnstableChart<T>,
    chart_y: &UnstableChart<T>,
    u: &[T],
    horizon: usize,
) -> Result<Vec<T>> {
    Ok(holonomy_with(system, chart_x, chart_y, u, horizon, HOLONOMY_TOL)?.0)
}

/// Image and residual. Linear systems (flat leaves, stable bundle orthogonal
/// to the unstable one) use the closed form `w = Eᵀ(Φ_x(u) − y)`; otherwise
/// `w` is found by Newton continuation on the unstable part of
/// `fʰΦ_y(w) − fʰΦ_x(u)` for `h = 1..horizon`.
pub fn holonomy_with<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart_x: &UnstableChart<T>,
    chart_y: &UnstableChart<T>,
    u: &[T],
    horizon: usize,
    tol: f64,
) -> Result<(Vec<T>, f64)> {
    if chart_y.fwd() < horizon {
        return Err(LabError::Domain(format!("target chart supports {} forward steps, need {horizon}", chart_y.fwd())));
    }
    let p0 = phi(system, chart_x, u)?;
    let e0 = chart_y.frame_matrix();
    let mut w = e0.tmul_vec(&system.difference(chart_y.base(), &p0));
    let residual = if system.is_linear() {
        linear_residual(system, chart_y, &p0, &w, horizon)?
    } else {
        let mut orbit = vec![p0.clone()];
        for _ in 0..horizon {
            let next = system.step(orbit.last().unwrap());
            orbit.push(next);
        }
        // offsets are carried along the orbit of `p0` with `step_delta`, so
        // round-off stays relative to the offset rather than to the points
        let offset = |w: &[T], h: usize, jac: bool| -> Result<(Vec<T>, Option<Mat<T>>)> {
            let mut d = system.difference(&p0, &phi(system, chart_y, w)?);
            let mut m = jac.then(|| chart_y.tangent().clone());
            for k in 0..h {
                if let Some(mm) = m.as_mut() {
                    let base = system.translate(&orbit[k], &d);
                    *mm = system.jacobian(&base).matmul(mm);
                }
                d = system.step_delta(&orbit[k], &d);
            }
            Ok((d, m))
        };
        let eps = T::epsilon();
        for h in 1..=horizon {
            let eh = chart_y.shifted(h as isize)?.frame_matrix().clone();
            for _ in 0..12 {
                let (d, m) = offset(&w, h, true)?;
                let e = eh.tmul_vec(&d);
                let dw = eh.transpose().matmul(&m.unwrap()).solve(&e)?;
                for (a, b) in w.iter_mut().zip(&dw) {
                    *a = *a - *b;
                }
                let scale_w = norm(&w).max(T::of(1e-300));
                if norm(&dw) <= T::of(8.0) * eps * scale_w {
                    break;
                }
            }
            let nw = norm(&w).to64();
            if !(nw <= chart_y.radius) {
                return Err(LabError::Radius { norm: nw, limit: chart_y.radius });
            }
        }
        norm(&offset(&w, horizon, false)?.0).to64()
    };
    if !(residual <= tol) {
        return Err(LabError::Holonomy { residual, tol });
    }
    Ok((w, residual))
}

/// Forward growth of the stable offset between `p` and `Φ_y(w)`, with the
/// unstable round-off projected out after every step.
fn linear_residual<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart_y: &UnstableChart<T>,
    p: &[T],
    w: &[T],
    horizon: usize,
) -> Result<f64> {
    let q = phi(system, chart_y, w)?;
    let mut d = system.difference(p, &q);
    let mut base = p.to_vec();
    for h in 0..=horizon {
        let e = chart_y.shifted(h as isize)?.frame_matrix().clone();
        let c = e.tmul_vec(&d);
        let back = e.mul_vec(&c);
        for (a, b) in d.iter_mut().zip(&back) {
            *a = *a - *b;
        }
        if h < horizon {
            d = system.step_delta(&base, &d);
            base = system.step(&base);
        }
    }
    Ok(norm(&d).to64())
}

/// A point on `W^s(x)` at distance about `dist` from `x`: `f^{-n}` of a
/// stable-direction offset of `fⁿ(x)`, rescaled once so the distance comes
/// out right.
pub fn stable_partner<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    x: &[T],
    dist: f64,
    n: usize,
) -> Result<Vec<T>> {
    let mut xn = x.to_vec();
    for _ in 0..n {
        xn = system.step(&xn);
    }
    let es = stable_direction(system, &xn, 30)?.basis()[0].clone();
    let partner = |c: f64| -> Result<Vec<T>> {
        let yn = system.translate(&xn, &scale(&es, T::of(c)));
        Ok(backward_orbit(system, &yn, n)?.swap_remove(0))
    };
    let contraction = cocycle_stretch(system, x, &es, n)?;
    let mut c = dist * contraction;
    let y = partner(c)?;
    let got = system.distance(x, &y).to64();
    if got > 0.0 {
        c *= dist / got;
    }
    partner(c)
}

/// `1/‖Df^{-n}(fⁿx)·e‖`, the factor by which the offset `e` at `fⁿx` shrinks
/// when pulled back to `x`.
fn cocycle_stretch<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    x: &[T],
    e: &[T],
    n: usize,
) -> Result<f64> {
    let mut pts = vec![x.to_vec()];
    for _ in 0..n {
        let p = system.step(pts.last().unwrap());
        pts.push(p);
    }
    let mut v = e.to_vec();
    for p in pts[..n].iter().rev() {
        v = system.jacobian(p).solve(&v)?;
    }
    Ok(1.0 / norm(&v).to64())
}

/// Columns `H(u_j)` for a list of source vectors.
pub fn transport_basis<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart_x: &UnstableChart<T>,
    chart_y: &UnstableChart<T>,
    vectors: &[Vec<T>],
    horizon: usize,
) -> Result<Mat<T>> {
    let cols: Vec<Vec<T>> =
        vectors.iter().map(|u| stable_holonomy(system, chart_x, chart_y, u, horizon)).collect::<Result<_>>()?;
    Ok(Mat::from_cols(&cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sub;
    use crate::systems::{cat_stable, Cat, PCat, Prod4};
    use crate::{Dd, Float};

    #[test]
    fn cat_holonomy_is_identity() {
        let x = vec![0.3, 0.4];
        let es = cat_stable::<f64>();
        let y = Cat.translate(&x, &scale(&es, 0.01));
        let cx = UnstableChart::new(&Cat, &x, 0, 30).unwrap();
        let cy = UnstableChart::new(&Cat, &y, 0, 30).unwrap();
        for u in [0.0, 0.03, -0.05] {
            let (w, r) = holonomy_with(&Cat, &cx, &cy, &[u], 25, HOLONOMY_TOL).unwrap();
            assert!((w[0] - u).abs() < 1e-15, "{w:?}");
            assert!(r < 1e-10);
        }
    }

    #[test]
    fn prod4_linear_identity() {
        let s = Prod4::<f64>::new(0.0);
        let x = vec![0.1, 0.2, 0.3, 0.4];
        let es = stable_direction(&s, &x, 30).unwrap();
        let off = es.embed(&[0.004, -0.003]);
        let y = s.translate(&x, &off);
        let cx = UnstableChart::new(&s, &x, 0, 30).unwrap();
        let cy = UnstableChart::new(&s, &y, 0, 30).unwrap();
        let u = vec![0.02, -0.01];
        let w = stable_holonomy(&s, &cx, &cy, &u, 25).unwrap();
        assert!(norm(&sub(&w, &u)) < 1e-12);
    }

    #[test]
    fn pcat_forward_matching() {
        let s = PCat::<Dd>::new(0.03).unwrap();
        let x = vec![Dd::of(0.27), Dd::of(0.61)];
        let y = stable_partner(&s, &x, 1e-3, 20).unwrap();
        assert!((s.distance(&x, &y).to64() / 1e-3 - 1.0).abs() < 0.05);
        let cx = UnstableChart::new(&s, &x, 0, 30).unwrap();
        let cy = UnstableChart::new(&s, &y, 0, 30).unwrap();
        let w0 = stable_holonomy(&s, &cx, &cy, &[Dd::of(0.0)], 25).unwrap();
        assert!(w0[0].abs().to64() < 1e-8, "{w0:?}");
        for u in [0.04, -0.03, 0.01] {
            let u = [Dd::of(u)];
            let (w, r) = holonomy_with(&s, &cx, &cy, &u, 25, HOLONOMY_TOL).unwrap();
            assert!(r <= 1e-6);
            let ratio = (w[0] / u[0]).to64();
            assert!((0.8..=1.25).contains(&ratio), "{ratio}");
            // independent re-simulation of both orbits
            let mut p = phi(&s, &cx, &u).unwrap();
            let mut q = phi(&s, &cy, &w).unwrap();
            for _ in 0..25 {
                p = s.step(&p);
                q = s.step(&q);
            }
            assert!(s.distance(&p, &q).to64() < 1e-6);
        }
    }

    #[test]
    fn pcat_double_precision_floor() {
        // in f64 the absolute round-off of the points, amplified by λ^h,
        // caps the usable horizon near 20
        let s = PCat::<f64>::new(0.03).unwrap();
        let x = vec![0.27, 0.61];
        let y = stable_partner(&s, &x, 1e-3, 20).unwrap();
        let cx = UnstableChart::new(&s, &x, 0, 30).unwrap();
        let cy = UnstableChart::new(&s, &y, 0, 30).unwrap();
        let (_, r) = holonomy_with(&s, &cx, &cy, &[0.03], 18, HOLONOMY_TOL).unwrap();
        assert!(r < 1e-7);
    }

    #[test]
    fn linear_composition() {
        let x = vec![0.3, 0.4];
        let es = cat_stable::<f64>();
        let y = Cat.translate(&x, &scale(&es, 0.01));
        let z = Cat.translate(&x, &scale(&es, -0.02));
        let c: Vec<_> = [&x, &y, &z].iter().map(|p| UnstableChart::new(&Cat, p, 0, 30).unwrap()).collect();
        let u = [0.037];
        let via = stable_holonomy(&Cat, &c[1], &c[2], &stable_holonomy(&Cat, &c[0], &c[1], &u, 25).unwrap(), 25).unwrap();
        let direct = stable_holonomy(&Cat, &c[0], &c[2], &u, 25).unwrap();
        assert!((via[0] - direct[0]).abs() < 1e-16);
    }

    #[test]
    fn residual_error_when_not_stable_related() {
        let s = PCat::<f64>::new(0.03).unwrap();
        let cx = UnstableChart::new(&s, &[0.27, 0.61], 0, 30).unwrap();
        let cy = UnstableChart::new(&s, &[0.7, 0.1], 0, 30).unwrap();
        assert!(stable_holonomy(&s, &cx, &cy, &[0.01], 25).is_err());
    }
}
