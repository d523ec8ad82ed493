//! Iterative linearization of the chart maps along unstable leaves.
//!
//! `F⁽ᵖ⁾_x(u) = df̂ᵖ_{f^{-p}x}(0) · f̂_x^{-p}(u)` converges geometrically to a
//! conjugacy between `f̂` and its derivative at 0. Everything here works in
//! chart coordinates of an [`UnstableChart`].

use rand::Rng;

use crate::charts::{
    d_hat_f, d_hat_f_iter, hat_f_iter, leaf_chain, phi, pullback, UnstableChart, EPS2,
};
use crate::error::{LabError, Result};
use crate::linalg::{linear_fit, norm, sub, Mat};
use crate::rng;
use crate::scalar::Real;
use crate::systems::DynamicalSystem;

/// Constants behind the geometric convergence rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinchConstants {
    /// Chart constant.
    pub c: f64,
    /// Lower rate per base step (the pinching margin `min 2α_x − β_x`).
    pub alpha: f64,
    /// Upper rate per base step.
    pub beta: f64,
    /// Block exponent.
    pub k: usize,
    /// `8C³ e^{−αk/2}`
    pub gamma: f64,
    /// Taylor constant of the blocked chart maps, when measured.
    pub d: f64,
}

impl PinchConstants {
    pub fn new(c: f64, alpha: f64, beta: f64, k: usize, d: f64) -> Result<Self> {
        if !(alpha > 0.0) || alpha > beta + 1e-12 {
            return Err(LabError::PinchViolation(format!("need 0 < alpha <= beta, got {alpha} and {beta}")));
        }
        if k == 0 || c < 1.0 || d < 0.0 {
            return Err(LabError::Domain(format!("invalid constants C={c}, k={k}, D={d}")));
        }
        let gamma = gamma_for(c, alpha, k);
        Ok(PinchConstants { c, alpha, beta, k, gamma, d })
    }

    /// Errors unless `γ < 1`.
    pub fn require_contraction(&self) -> Result<()> {
        if self.gamma >= 1.0 {
            return Err(LabError::PinchViolation(format!("gamma = {} for block exponent {}", self.gamma, self.k)));
        }
        Ok(())
    }

    /// `10 D / (1 − γ)`
    pub fn c1(&self) -> f64 {
        10.0 * self.d / (1.0 - self.gamma)
    }
}

pub fn gamma_for(c: f64, alpha: f64, k: usize) -> f64 {
    8.0 * c.powi(3) * (-alpha * k as f64 / 2.0).exp()
}

/// Smallest block exponent with `8C³ e^{−αk/2} < 0.9`.
pub fn default_block(c: f64, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0) {
        return Err(LabError::PinchViolation(format!("alpha = {alpha}")));
    }
    let k = (2.0 * (8.0 * c.powi(3) / 0.9).ln() / alpha).floor().max(0.0) as usize + 1;
    Ok((k.saturating_sub(2)..=k + 1).find(|&k| k >= 1 && gamma_for(c, alpha, k) < 0.9).unwrap_or(k))
}

/// Seeded probes, uniform in the ball of radius `r` in `R^d`.
pub fn random_probes<T: Real>(d: usize, count: usize, r: f64, seed: u64, center_ix: u64) -> Vec<Vec<T>> {
    let mut g = rng::keyed(seed, rng::label::PROBES, center_ix);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| g.gen_range(-1.0..1.0)).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n <= 1.0 && n > 1e-3 {
                break v.iter().map(|&a| T::of(a * r)).collect();
            }
        })
        .collect()
}

/// `max ‖f̂_x(v) − f̂_x(u) − df̂_x(u)(v−u)‖ / ‖v−u‖²` over seeded pairs in
/// `E^u(x; eps1)` with `‖v − u‖ ≥ eps1/8`. The derivative is exact (pushed
/// along the leaf) rather than a finite difference.
pub fn estimate_taylor_d<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    charts: &[UnstableChart<T>],
    eps1: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (ix, chart) in charts.iter().enumerate() {
        let d = chart.dim();
        let mut g = rng::keyed(seed, rng::label::PAIRS, ix as u64);
        for _ in 0..pairs {
            let (u, v) = loop {
                let u: Vec<f64> = (0..d).map(|_| g.gen_range(-eps1..eps1)).collect();
                let v: Vec<f64> = (0..d).map(|_| g.gen_range(-eps1..eps1)).collect();
                let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nd = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if nu <= eps1 && nv <= eps1 && nd >= eps1 / 8.0 {
                    break (u, v);
                }
            };
            let u: Vec<T> = u.iter().map(|&a| T::of(a)).collect();
            let v: Vec<T> = v.iter().map(|&a| T::of(a)).collect();
            let fu = hat_f_iter(system, chart, &u, 1)?;
            let fv = hat_f_iter(system, chart, &v, 1)?;
            let du = d_hat_f(system, chart, &u)?;
            let dv = sub(&v, &u);
            let lin = du.mul_vec(&dv);
            let r: Vec<T> = fv.iter().zip(&fu).zip(&lin).map(|((&a, &b), &c)| a - b - c).collect();
            let nd = norm(&dv);
            worst = worst.max((norm(&r) / (nd * nd)).to64());
        }
    }
    Ok(worst)
}

fn check_radius<T: Real>(u: &[T], limit: f64) -> Result<()> {
    let n = norm(u).to64();
    if n > limit * (1.0 + 1e-12) {
        return Err(LabError::Radius { norm: n, limit });
    }
    Ok(())
}

/// `F⁽ᵖ⁾_x(u)` without range checks.
pub fn f_p_raw<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    p: usize,
) -> Result<Vec<T>> {
    let v = pullback(system, chart, u, p)?;
    let i = chart.index();
    Ok(chart.window().transfer(i - p as isize, i)?.mul_vec(&v))
}

/// `F⁽ᵖ⁾_x(u) = df̂ᵖ_{f^{-p}x}(0) · f̂_x^{-p}(u)`, with `‖u‖ ≤ ε₂`.
pub fn f_p<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    p: usize,
) -> Result<Vec<T>> {
    check_radius(u, EPS2)?;
    let out = f_p_raw(system, chart, u, p)?;
    let n = norm(&out).to64();
    if n > 2.0 * EPS2 {
        return Err(LabError::PinchViolation(format!("|F_{p}(u)| = {n:e} exceeds 2 eps2")));
    }
    Ok(out)
}

/// `F⁽ᵖ⁾_x(u)` for `p = 1..=order`, all read off one pullback chain.
pub fn f_p_ladder<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    order: usize,
) -> Result<Vec<Vec<T>>> {
    check_radius(u, EPS2)?;
    let out = f_p_ladder_raw(system, chart, u, order)?;
    for (p, v) in out.iter().enumerate() {
        let n = norm(v).to64();
        if n > 2.0 * EPS2 {
            return Err(LabError::PinchViolation(format!("|F_{}(u)| = {n:e} exceeds 2 eps2", p + 1)));
        }
    }
    Ok(out)
}

fn f_p_ladder_raw<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    order: usize,
) -> Result<Vec<Vec<T>>> {
    let chain = leaf_chain(system, chart, u, order, 0, &mut |_, _| false)?;
    let i = chart.index();
    (1..=order)
        .map(|p| Ok(chart.window().transfer(i - p as isize, i)?.mul_vec(&chain.coords[order - p])))
        .collect()
}

/// [`conjugacy_residual`] with `q = 1` for `p = 1..=order`.
pub fn conjugacy_ladder<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    order: usize,
) -> Result<Vec<T>> {
    check_radius(u, EPS2)?;
    let back = chart.transfer(-1)?;
    let here = f_p_ladder_raw(system, chart, u, order)?;
    let earlier = chart.shifted(-1)?;
    let there = f_p_ladder_raw(system, &earlier, &pullback(system, chart, u, 1)?, order)?;
    Ok(here.iter().zip(&there).map(|(a, b)| norm(&sub(&back.mul_vec(a), b))).collect())
}

/// `‖df̂_x^{-q}(0)·F⁽ᵖ⁾_x(u) − F⁽ᵖ⁾_{f^{-q}x}(f̂_x^{-q}(u))‖`
pub fn conjugacy_residual<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    p: usize,
    q: usize,
) -> Result<T> {
    check_radius(u, EPS2)?;
    let lhs = chart.transfer(-(q as isize))?.mul_vec(&f_p_raw(system, chart, u, p)?);
    let earlier = chart.shifted(-(q as isize))?;
    let rhs = f_p_raw(system, &earlier, &pullback(system, chart, u, q)?, p)?;
    Ok(norm(&sub(&lhs, &rhs)))
}

/// `L⁽ᵖ⁾_{x,ξ} = df̂ᵖ_{f^{-p}x}(f̂^{-p}_x(ξ)) · df̂_x^{-p}(0)`, with `‖ξ‖ ≤ ε₂/2`.
pub fn l_operator<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    xi: &[T],
    p: usize,
) -> Result<Mat<T>> {
    check_radius(xi, EPS2 / 2.0)?;
    l_operator_raw(system, chart, xi, p)
}

fn l_operator_raw<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    xi: &[T],
    p: usize,
) -> Result<Mat<T>> {
    let w = pullback(system, chart, xi, p)?;
    let earlier = chart.shifted(-(p as isize))?;
    let j = d_hat_f_iter(system, &earlier, &w, p as isize)?;
    Ok(j.matmul(&chart.transfer(-(p as isize))?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lemma33a {
    /// `‖df̂ᵖ_z(0)v − f̂ᵖ_z(v)‖`
    pub lhs: f64,
    /// `‖f̂ᵖ_z(v)‖²`
    pub rhs_base: f64,
    /// `‖df̂ᵖ_z(0)v‖`
    pub linear_norm: f64,
    /// `‖f̂ᵖ_z(v)‖`
    pub image_norm: f64,
}

impl Lemma33a {
    /// `‖df̂ᵖ(0)v‖ ≤ 2‖f̂ᵖ(v)‖`
    pub fn comparable(&self) -> bool {
        self.linear_norm <= 2.0 * self.image_norm
    }
}

pub fn lemma33a_check<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart_z: &UnstableChart<T>,
    v: &[T],
    p: usize,
) -> Result<Lemma33a> {
    let img = hat_f_iter(system, chart_z, v, p)?;
    let image_norm = norm(&img).to64();
    if image_norm > EPS2 * (1.0 + 1e-12) {
        return Err(LabError::Radius { norm: image_norm, limit: EPS2 });
    }
    let lin = chart_z.transfer(p as isize)?.mul_vec(v);
    Ok(Lemma33a {
        lhs: norm(&sub(&lin, &img)).to64(),
        rhs_base: image_norm * image_norm,
        linear_norm: norm(&lin).to64(),
        image_norm,
    })
}

/// [`lemma33a_check`] over probes `v` chosen so that `f̂ᵖ_z(v) = t·dir` for each
/// target norm `t`. Returns the records and the log-log slope of `lhs`
/// against `‖f̂ᵖ_z(v)‖`.
pub fn lemma33a_ladder<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart_z: &UnstableChart<T>,
    dir: &[T],
    p: usize,
    targets: &[f64],
) -> Result<(Vec<Lemma33a>, f64)> {
    let unit: Vec<T> = dir.iter().map(|&a| a / norm(dir)).collect();
    let ahead = chart_z.shifted(p as isize)?;
    let mut rows = Vec::with_capacity(targets.len());
    for &t in targets {
        let w: Vec<T> = unit.iter().map(|&a| a * T::of(t)).collect();
        let v = pullback(system, &ahead, &w, p)?;
        rows.push(lemma33a_check(system, chart_z, &v, p)?);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.image_norm.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.lhs.ln()).collect();
    let (_, slope) = linear_fit(&xs, &ys);
    Ok((rows, slope))
}

/// `(‖F⁽ᵖ⁾(a) − F⁽ᵖ⁾(b) − (a − b)‖, ‖a−b‖² + ‖b‖‖a−b‖)`
pub fn near_isometry<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    a: &[T],
    b: &[T],
    p: usize,
) -> Result<(f64, f64)> {
    let fa = f_p(system, chart, a, p)?;
    let fb = f_p(system, chart, b, p)?;
    let dab = sub(a, b);
    let lhs = norm(&sub(&sub(&fa, &fb), &dab)).to64();
    let nd = norm(&dab).to64();
    Ok((lhs, nd * nd + norm(b).to64() * nd))
}

/// `‖df̂_x(0)·F⁽ᵖ⁾_x(u) − F⁽ᵖ⁾_{f(x)}(f̂_x(u))‖`
pub fn corollary32_residual<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    u: &[T],
    p: usize,
) -> Result<T> {
    let lhs = chart.transfer(1)?.mul_vec(&f_p_raw(system, chart, u, p)?);
    let next = chart.shifted(1)?;
    let image = hat_f_iter(system, chart, u, 1)?;
    check_radius(&image, EPS2)?;
    let rhs = f_p_raw(system, &next, &image, p)?;
    Ok(norm(&sub(&lhs, &rhs)))
}

/// Residual of the chart-transfer identity
/// `F_x(u) = dG_y^x(η) · L_{y,η}(F_y(G_x^y(u)) − F_y(η))` for `y = Φ_x(ξ)`,
/// `η = G_x^y(0)`, with `dG` by central differences of step `h`.
/// `chart_y` must be a chart at `Φ_x(ξ)` with at least `p` pullbacks.
#[allow(clippy::too_many_arguments)]
pub fn chart_transfer_residual<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart_x: &UnstableChart<T>,
    chart_y: &UnstableChart<T>,
    u: &[T],
    p: usize,
    h: f64,
) -> Result<T> {
    // G_a^b(w) = coordinates of Φ_a(w) in the chart at b
    let g = |from: &UnstableChart<T>, to: &UnstableChart<T>, w: &[T]| -> Result<Vec<T>> {
        let q = phi(system, from, w)?;
        let diff = system.difference(to.base(), &q);
        Ok(to.frame_matrix().tmul_vec(&diff))
    };
    let zero = vec![T::zero(); chart_x.dim()];
    let eta = g(chart_x, chart_y, &zero)?;
    let v = g(chart_x, chart_y, u)?;
    let lhs = f_p_raw(system, chart_x, u, p)?;
    let fy_v = f_p_raw(system, chart_y, &v, p)?;
    let fy_eta = f_p_raw(system, chart_y, &eta, p)?;
    let l = l_operator_raw(system, chart_y, &eta, p)?;
    let inner = l.mul_vec(&sub(&fy_v, &fy_eta));
    let d = chart_x.dim();
    let mut dg = Mat::zeros(d, d);
    let hh = T::of(h);
    for j in 0..d {
        let mut plus = eta.clone();
        let mut minus = eta.clone();
        plus[j] = plus[j] + hh;
        minus[j] = minus[j] - hh;
        let gp = g(chart_y, chart_x, &plus)?;
        let gm = g(chart_y, chart_x, &minus)?;
        for i in 0..d {
            dg[(i, j)] = (gp[i] - gm[i]) / (hh + hh);
        }
    }
    Ok(norm(&sub(&lhs, &dg.mul_vec(&inner))))
}

/// Order-p approximants over a probe set with their Cauchy increments.
#[derive(Clone, Debug)]
pub struct LinearizationState<T> {
    pub chart: UnstableChart<T>,
    pub order: usize,
    pub probes: Vec<Vec<T>>,
    /// `values[i][p-1] = F⁽ᵖ⁾(probes[i])` for `p = 1..=order`.
    pub values: Vec<Vec<Vec<T>>>,
    /// `increments[i][p-1] = ‖F⁽ᵖ⁺¹⁾ − F⁽ᵖ⁾‖` for `p = 1..order`.
    pub increments: Vec<Vec<f64>>,
    pub fit: Option<RateFit>,
}

/// `‖increment_p‖ ≈ C·γᵖ·‖u‖²`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub gamma_hat: f64,
    pub c_hat: f64,
    /// Points used by the fit.
    pub used: usize,
    /// Points dropped as below the round-off floor.
    pub dropped: usize,
}

pub fn linearization_state<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    probes: &[Vec<T>],
    order: usize,
) -> Result<LinearizationState<T>> {
    let mut values = Vec::with_capacity(probes.len());
    let mut increments = Vec::with_capacity(probes.len());
    for u in probes {
        let vals = f_p_ladder(system, chart, u, order)?;
        let inc: Vec<f64> = vals.windows(2).map(|w| norm(&sub(&w[1], &w[0])).to64()).collect();
        values.push(vals);
        increments.push(inc);
    }
    let norms: Vec<f64> = probes.iter().map(|u| norm(u).to64()).collect();
    let fit = fit_rate::<T>(&increments, &norms, 3);
    Ok(LinearizationState { chart: chart.clone(), order, probes: probes.to_vec(), values, increments, fit })
}

/// Least squares on `ln(increment/‖u‖²)` against `p` for `p ≥ p_min`,
/// pooled over probes. Increments at the round-off floor of `T` are dropped.
pub fn fit_rate<T: Real>(increments: &[Vec<f64>], norms: &[f64], p_min: usize) -> Option<RateFit> {
    let floor = 64.0 * T::epsilon().to64();
    let (mut ps, mut ys) = (Vec::new(), Vec::new());
    let mut dropped = 0;
    for (inc, &un) in increments.iter().zip(norms) {
        for (j, &v) in inc.iter().enumerate() {
            let p = j + 1;
            if p < p_min {
                continue;
            }
            if v <= floor * un || un == 0.0 {
                dropped += 1;
                continue;
            }
            ps.push(p as f64);
            ys.push((v / (un * un)).ln());
        }
    }
    let distinct = {
        let mut q = ps.clone();
        q.dedup();
        q.len()
    };
    if distinct < 2 {
        return None;
    }
    let (a, b) = linear_fit(&ps, &ys);
    Some(RateFit { gamma_hat: b.exp(), c_hat: a.exp(), used: ps.len(), dropped })
}

/// Per probe, `sup_p increment_p / (γ̂ᵖ ‖u‖²)` over `p ≥ p_min`, skipping
/// floor-level increments.
pub fn cauchy_constants<T: Real>(increments: &[Vec<f64>], norms: &[f64], gamma: f64, p_min: usize) -> Vec<f64> {
    let floor = 64.0 * T::epsilon().to64();
    increments
        .iter()
        .zip(norms)
        .map(|(inc, &un)| {
            inc.iter()
                .enumerate()
                .filter(|&(j, &v)| j + 1 >= p_min && v > floor * un)
                .map(|(j, &v)| v / (gamma.powi(j as i32 + 1) * un * un))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Spread `max / min` of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let pos: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    if pos.is_empty() {
        return 1.0;
    }
    pos.iter().cloned().fold(0.0, f64::max) / pos.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `‖df̂(0)‖` bounds over a window: `(min conorm, max norm)` of the factors
/// from `-back` to `fwd − 1`.
pub fn factor_bounds<T: Real>(chart: &UnstableChart<T>) -> Result<(f64, f64)> {
    let w = chart.window();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in -(w.back() as isize)..(w.fwd() as isize) {
        let a = w.factor(i)?;
        lo = lo.min(a.sigma_min().to64());
        hi = hi.max(a.norm2().to64());
    }
    Ok((lo, hi))
}
