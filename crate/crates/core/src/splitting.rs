//! Dominated splittings `E^u = E1 ⊕ E2` of the unstable bundle, finite-time
//! spectra, the adapted norm `‖u‖′ = max(‖u₁‖, ‖u₂‖)` and the slow-bundle
//! versions of the Bowen-ball and linearization estimates.
//!
//! Everything is expressed in chart coordinates, where the derivative cocycle
//! is the sequence of factors `df̂(0)` of an orbit window.

use rand::Rng;
use rayon::prelude::*;

use crate::bowen::{diameter, diameter_by, pick_centers, BowenCandidates};
use crate::charts::{d_hat_f, hat_f_iter, phi, pullback, trace_with_faces, LambdaIndex, UnstableChart, EPS0, EPS1, EPS2};
use crate::error::{LabError, Result};
use crate::holonomy::stable_holonomy;
use crate::linalg::{norm, scale, sub, Mat, Subspace};
use crate::linearization::{fit_rate, RateFit};
use crate::rng;
use crate::scalar::Real;
use crate::systems::{random_frame, Condition, DynamicalSystem};

/// Length of the windows used for finite-time rates.
pub const RATE_WINDOW: usize = 10;
/// Slack between measured rates and the constants `λ₁`, `μ₂`.
pub const RATE_SLACK: f64 = 0.05;
/// Relative size below which an `E1` component counts as round-off.
pub const OMEGA_FLOOR: f64 = 1e-12;

/// Splitting along an orbit window, with finite-time rates at the center.
#[derive(Clone, Debug)]
pub struct SplittingEstimate<T> {
    pub chart: UnstableChart<T>,
    pub horizon: usize,
    pub dims: (usize, usize),
    /// Slow bundle at the center.
    pub e1: Subspace<T>,
    /// Fast bundle at the center; `None` when the unstable bundle does not split.
    pub e2: Option<Subspace<T>>,
    /// `[α̂₁, β̂₁]` per step.
    pub rates1: (f64, f64),
    /// `[α̂₂, β̂₂]` per step.
    pub rates2: Option<(f64, f64)>,
    /// Smallest angle between `E1` and `E2` along the stored path.
    pub angle_floor: f64,
    lo: isize,
    e1_path: Vec<Subspace<T>>,
    e2_path: Vec<Option<Subspace<T>>>,
}

impl<T: Real> SplittingEstimate<T> {
    /// Chart offsets `[lo, hi]` at which the splitting is stored.
    pub fn range(&self) -> (isize, isize) {
        (self.lo, self.lo + self.e1_path.len() as isize - 1)
    }

    fn slot(&self, i: isize) -> Result<usize> {
        let (lo, hi) = self.range();
        if i < lo || i > hi {
            return Err(LabError::Domain(format!("offset {i} outside the splitting range [{lo}, {hi}]")));
        }
        Ok((i - lo) as usize)
    }

    pub fn e1_at(&self, i: isize) -> Result<&Subspace<T>> {
        Ok(&self.e1_path[self.slot(i)?])
    }

    pub fn e2_at(&self, i: isize) -> Result<Option<&Subspace<T>>> {
        Ok(self.e2_path[self.slot(i)?].as_ref())
    }

    /// Adapted-norm context at `f^i(x)`.
    pub fn prime_at(&self, i: isize) -> Result<PrimeNormContext<T>> {
        PrimeNormContext::new(self.e1_at(i)?, self.e2_at(i)?)
    }

    pub fn prime(&self) -> PrimeNormContext<T> {
        self.prime_at(0).unwrap()
    }

    /// `β̂₁ < α̂₂`; vacuous without a fast bundle.
    pub fn dominated(&self) -> bool {
        self.rates2.is_none_or(|(a2, _)| self.rates1.1 < a2)
    }

    /// Errors with the rate gap when domination fails.
    pub fn require_domination(&self) -> Result<()> {
        match self.rates2 {
            Some((a2, _)) if self.rates1.1 >= a2 => Err(LabError::NoDomination { beta1: self.rates1.1, alpha2: a2 }),
            _ => Ok(()),
        }
    }

    /// `α̂₂ − β̂₁`.
    pub fn domination_margin(&self) -> Option<f64> {
        self.rates2.map(|(a2, _)| a2 - self.rates1.1)
    }

    /// Largest angle between `df̂(0)·E1` and `E1` at the next point.
    pub fn invariance_defect(&self) -> Result<f64> {
        let (lo, hi) = self.range();
        let mut worst = 0.0f64;
        for i in lo..hi {
            let a = self.factor(i)?;
            let pushed = self.e1_at(i)?.push(&a)?;
            worst = worst.max(crate::linalg::subspace_angle(&pushed, self.e1_at(i + 1)?)?.to64());
        }
        Ok(worst)
    }

    fn factor(&self, i: isize) -> Result<Mat<T>> {
        Ok(self.chart.window().factor(self.chart.index() + i)?.clone())
    }
}

/// Finite-time rates of the cocycle on a moving subspace: windows of length
/// `w` starting at each of `starts`.
fn window_rates<T: Real>(
    starts: &[isize],
    w: usize,
    sub_at: &dyn Fn(isize) -> Result<Mat<T>>,
    factor: &dyn Fn(isize) -> Result<Mat<T>>,
) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &j in starts {
        let mut m = sub_at(j)?;
        for k in 0..w as isize {
            m = factor(j + k)?.matmul(&m);
        }
        let sv = m.singular_values();
        lo = lo.min(sv.last().unwrap().to64().ln() / w as f64);
        hi = hi.max(sv[0].to64().ln() / w as f64);
    }
    Ok((lo, hi))
}

/// `E2` by pushing a random frame forward from the start of the window, `E1`
/// by pushing one backward from its end, each re-orthonormalized after every
/// step. The chart needs `horizon` pullbacks and `2·horizon` forward steps;
/// the splitting is stored wherever both sweeps have run at least `horizon`
/// steps. Rates come from windows of length 10 over `[horizon/2, horizon]`.
pub fn estimate_splitting<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    horizon: usize,
) -> Result<SplittingEstimate<T>> {
    if horizon < 10 {
        return Err(LabError::Domain(format!("horizon {horizon} below 10")));
    }
    let back = chart.back();
    let fwd = chart.fwd();
    if back < horizon || fwd < 2 * horizon {
        return Err(LabError::Domain(format!(
            "chart reach ({back} back, {fwd} forward) too short for horizon {horizon}"
        )));
    }
    let d = chart.dim();
    let (d1, d2) = system.split_dims().unwrap_or((d, 0));
    let h = horizon as isize;
    let (lo, hi) = (h - back as isize, fwd as isize - h);
    let base = chart.index();
    let win = chart.window();
    let factor = |i: isize| -> Result<Mat<T>> { Ok(win.factor(base + i)?.clone()) };

    let n = (hi - lo + 1) as usize;
    let mut e2_path: Vec<Option<Subspace<T>>> = vec![None; n];
    if d2 > 0 {
        let mut q = Subspace::span(&random_frame::<T>(d, d2, 11))?;
        for i in -(back as isize)..=hi {
            if i >= lo {
                e2_path[(i - lo) as usize] = Some(q.clone());
            }
            if i < hi {
                q = q.push(&factor(i)?)?;
            }
        }
    }
    let mut e1_path: Vec<Subspace<T>> = Vec::with_capacity(n);
    if d2 > 0 {
        let mut q = Subspace::span(&random_frame::<T>(d, d1, 12))?;
        let mut rev = Vec::with_capacity(n);
        for i in (lo..=fwd as isize).rev() {
            if i <= hi {
                rev.push(q.clone());
            }
            if i > lo {
                q = q.push(&factor(i - 1)?.inverse()?)?;
            }
        }
        rev.reverse();
        e1_path = rev;
    } else {
        let all: Vec<usize> = (0..d).collect();
        e1_path.resize(n, Subspace::coordinate(d, &all));
    }

    let w = RATE_WINDOW.min(horizon / 2).max(1);
    let mut starts: Vec<isize> = ((h / 2)..=(h - w as isize)).collect();
    if starts.is_empty() {
        starts.push(h - w as isize);
    }
    let at = |path: &Vec<Subspace<T>>, j: isize| path[(j - lo) as usize].matrix();
    let rates1 = window_rates(&starts, w, &|j| Ok(at(&e1_path, j)), &factor)?;
    let rates2 = if d2 > 0 {
        let e2: Vec<Subspace<T>> = e2_path.iter().map(|s| s.clone().unwrap()).collect();
        Some(window_rates(&starts, w, &|j| Ok(at(&e2, j)), &factor)?)
    } else {
        None
    };
    let mut angle_floor = std::f64::consts::FRAC_PI_2;
    for (a, b) in e1_path.iter().zip(&e2_path) {
        if let Some(b) = b {
            angle_floor = angle_floor.min(min_angle(a, b));
        }
    }
    Ok(SplittingEstimate {
        chart: chart.clone(),
        horizon,
        dims: (d1, d2),
        e1: e1_path[(-lo) as usize].clone(),
        e2: e2_path[(-lo) as usize].clone(),
        rates1,
        rates2,
        angle_floor,
        lo,
        e1_path,
        e2_path,
    })
}

/// Smallest principal angle between two subspaces.
pub fn min_angle<T: Real>(a: &Subspace<T>, b: &Subspace<T>) -> f64 {
    let c = a.matrix().transpose().matmul(&b.matrix()).norm2().to64().min(1.0);
    let s = {
        let am = a.matrix();
        let bm = b.matrix();
        let r = bm.minus(&am.matmul(&am.transpose().matmul(&bm)));
        r.sigma_min().to64()
    };
    s.atan2(c)
}

/// Oblique projectors of the splitting and the norm `‖u‖′`.
#[derive(Clone, Debug)]
pub struct PrimeNormContext<T> {
    /// Onto `E1` along `E2`.
    pub p1: Mat<T>,
    /// Onto `E2` along `E1`.
    pub p2: Mat<T>,
    /// Smallest angle between the bundles.
    pub angle: f64,
}

impl<T: Real> PrimeNormContext<T> {
    pub fn new(e1: &Subspace<T>, e2: Option<&Subspace<T>>) -> Result<Self> {
        let d = e1.ambient_dim();
        let Some(e2) = e2 else {
            return Ok(PrimeNormContext { p1: Mat::identity(d), p2: Mat::zeros(d, d), angle: std::f64::consts::FRAC_PI_2 });
        };
        if e1.rank() + e2.rank() != d {
            return Err(LabError::Dimension(format!("ranks {} + {} != {d}", e1.rank(), e2.rank())));
        }
        let mut cols = e1.basis().to_vec();
        cols.extend(e2.basis().iter().cloned());
        let b = Mat::from_cols(&cols);
        let binv = b.inverse()?;
        let mut keep1 = Mat::zeros(d, d);
        for i in 0..e1.rank() {
            keep1[(i, i)] = T::one();
        }
        let p1 = b.matmul(&keep1).matmul(&binv);
        let p2 = Mat::identity(d).minus(&p1);
        Ok(PrimeNormContext { p1, p2, angle: min_angle(e1, e2) })
    }

    pub fn split(&self, u: &[T]) -> (Vec<T>, Vec<T>) {
        (self.p1.mul_vec(u), self.p2.mul_vec(u))
    }

    /// `‖u‖′ = max(‖u₁‖, ‖u₂‖)`
    pub fn norm(&self, u: &[T]) -> f64 {
        let (a, b) = self.split(u);
        norm(&a).to64().max(norm(&b).to64())
    }

    pub fn dist(&self, a: &[T], b: &[T]) -> f64 {
        self.norm(&sub(a, b))
    }

    /// `(lower, upper)` with `lower·‖u‖ ≤ ‖u‖′ ≤ upper·‖u‖`: `½` and `1/sin θ`.
    pub fn equivalence(&self) -> (f64, f64) {
        (0.5, 1.0 / self.angle.sin())
    }
}

/// Chart and splitting at `x` with room for `extra_back` further pullbacks.
pub fn split_chart<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    x: &[T],
    horizon: usize,
    extra_back: usize,
) -> Result<SplittingEstimate<T>> {
    let chart = UnstableChart::new(system, x, horizon + extra_back, 2 * horizon)?;
    estimate_splitting(system, &chart, horizon)
}

/// Splittings at seeded centers, in center order.
pub fn splittings_at_centers<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    lambda: &LambdaIndex<T>,
    horizon: usize,
    extra_back: usize,
    centers: usize,
    seed: u64,
) -> Result<Vec<SplittingEstimate<T>>> {
    let ix = pick_centers(lambda.sample.len(), centers, seed)?;
    ix.par_iter().map(|&i| split_chart(system, &lambda.sample.points[i], horizon, extra_back)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRow {
    pub center_ix: usize,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// `2α̂ − β̂`
    pub pinch_margin: f64,
    pub pass: bool,
}

/// Finite-time rates of the slow bundle (the whole unstable bundle when it
/// does not split) at seeded centers, judged against `2α̂ − β̂ ≥ alpha`.
pub fn pinching_report<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    lambda: &LambdaIndex<T>,
    horizon: usize,
    centers: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<SpectrumRow>> {
    let splits = splittings_at_centers(system, lambda, horizon, 0, centers, seed)?;
    Ok(spectrum_rows(&splits, alpha))
}

pub fn spectrum_rows<T: Real>(splits: &[SplittingEstimate<T>], alpha: f64) -> Vec<SpectrumRow> {
    splits
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (a, b) = s.rates1;
            let m = 2.0 * a - b;
            SpectrumRow { center_ix: i, alpha_hat: a, beta_hat: b, pinch_margin: m, pass: m >= alpha - 1e-12 }
        })
        .collect()
}

fn require_explicit_fast_leaves<T: Real, S: DynamicalSystem<T> + ?Sized>(system: &S) -> Result<()> {
    if system.split_dims().is_none() || !system.flat_leaves() || system.fixed_frame().is_none() {
        return Err(LabError::Bracket(format!("{} has no explicit fast leaves", system.label())));
    }
    Ok(())
}

/// `π^{u,1}` in chart coordinates: the `E1` component of the point where the
/// fast leaf through `u` meets the slow leaf of the center. On the shipped
/// split systems the fast leaves are straight lines parallel to `E2` in the
/// chart, so this is the oblique projection onto `E1` along `E2`.
pub fn project_u1<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    split: &SplittingEstimate<T>,
    u: &[T],
) -> Result<Vec<T>> {
    require_explicit_fast_leaves(system)?;
    let n = norm(u).to64();
    if n > EPS2 * (1.0 + 1e-12) {
        return Err(LabError::Radius { norm: n, limit: EPS2 });
    }
    let out = split.prime().p1.mul_vec(u);
    let m = norm(&out).to64();
    if m > EPS1 {
        return Err(LabError::Bracket(format!("|u1| = {m:e} beyond eps1")));
    }
    Ok(out)
}

/// `B̌^{u,1}_p(y, ε)` with the two diameters it is compared through.
#[derive(Clone, Debug)]
pub struct B1Set<T> {
    pub p: usize,
    pub eps: f64,
    /// `E1` components of the members of `B̂_p ∩ Λ̂`.
    pub members: Vec<Vec<T>>,
    pub diam_prime_b1: f64,
    /// `diam′(B̂_p(y,ε) ∩ Λ̂_y(ε))`
    pub diam_prime_full: f64,
}

impl<T> B1Set<T> {
    /// `diam′(B̌) ≤ diam′(B̂ ∩ Λ̂)`
    pub fn ineq52(&self) -> bool {
        self.diam_prime_b1 <= self.diam_prime_full * (1.0 + 1e-9) + 1e-300
    }

    /// `diam′(B̂ ∩ Λ̂) ≤ diam′(B̌)`
    pub fn ineq53(&self) -> bool {
        self.diam_prime_full <= self.diam_prime_b1 * (1.0 + 1e-9) + 1e-300
    }
}

/// Candidates at the center of `split` under the adapted norms along its
/// orbit: `max(‖v‖, ‖v₁‖) ≤ ε` at the center and `‖f̂ʲ(v)‖′ ≤ ε` after.
pub fn b1_candidates<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    split: &SplittingEstimate<T>,
    lambda: &LambdaIndex<T>,
    eps: f64,
    p_max: usize,
) -> Result<BowenCandidates<T>> {
    let ctx: Vec<PrimeNormContext<T>> = (0..=p_max as isize).map(|j| split.prime_at(j)).collect::<Result<_>>()?;
    let norm_at = |j: usize, v: &[T]| -> f64 {
        if j == 0 {
            norm(v).to64().max(norm(&ctx[0].p1.mul_vec(v)).to64())
        } else {
            ctx[j].norm(v)
        }
    };
    let cube = (2.0 * eps).min(EPS0);
    BowenCandidates::build_with(system, &split.chart, lambda, p_max, eps, cube, &[eps], &norm_at)
}

pub fn b1_set<T: Real>(cands: &BowenCandidates<T>, split: &SplittingEstimate<T>, p: usize, eps: f64) -> B1Set<T> {
    let ctx = split.prime();
    let full: Vec<Vec<T>> = cands.members(p, eps).into_iter().map(|i| cands.points[i].clone()).collect();
    let members: Vec<Vec<T>> = full.iter().map(|v| ctx.p1.mul_vec(v)).collect();
    let diam_prime_full = diameter_by(&full, &|a, b| ctx.dist(a, b));
    let diam_prime_b1 = diameter_by(&members, &|a, b| norm(&sub(a, b)).to64());
    B1Set { p, eps, members, diam_prime_b1, diam_prime_full }
}

/// `B̌^{u,1}_p(y, ε)` at the center of `split`.
pub fn check_b1_set<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    split: &SplittingEstimate<T>,
    lambda: &LambdaIndex<T>,
    p: usize,
    eps: f64,
) -> Result<B1Set<T>> {
    Ok(b1_set(&b1_candidates(system, split, lambda, eps, p)?, split, p, eps))
}

#[derive(Clone, Debug)]
pub struct OmegaReport {
    /// `min` over centers of `max ‖u₁‖` over the trace.
    pub omega: f64,
    /// Per center; `None` when the trace was empty.
    pub per_center: Vec<Option<f64>>,
    pub excluded: usize,
    /// `ω̂ = 0`: some trace lies inside the fast bundle.
    pub violation: bool,
}

/// `ω̂_ε` over at least ten centers.
pub fn omega_eps<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    lambda: &LambdaIndex<T>,
    splits: &[SplittingEstimate<T>],
    eps: f64,
) -> Result<OmegaReport> {
    if splits.len() < 10 {
        return Err(LabError::Domain(format!("need at least 10 centers, got {}", splits.len())));
    }
    let tol = eps * (1.0 + 1e-12);
    let traces: Vec<Vec<Vec<T>>> = splits
        .par_iter()
        .map(|s| {
            Ok(trace_with_faces(system, &s.chart, lambda, eps, &[eps], &|u: &[T]| norm(u).to64() <= tol)?.coords)
        })
        .collect::<Result<_>>()?;
    let ctx: Vec<PrimeNormContext<T>> = splits.iter().map(|s| s.prime()).collect();
    Ok(omega_from_traces(&traces, &ctx))
}

pub fn omega_from_traces<T: Real>(traces: &[Vec<Vec<T>>], ctx: &[PrimeNormContext<T>]) -> OmegaReport {
    let per_center: Vec<Option<f64>> = traces
        .iter()
        .zip(ctx)
        .map(|(t, c)| {
            (!t.is_empty()).then(|| {
                t.iter()
                    .map(|u| {
                        let m = norm(&c.p1.mul_vec(u)).to64();
                        if m <= OMEGA_FLOOR * norm(u).to64() { 0.0 } else { m }
                    })
                    .fold(0.0, f64::max)
            })
        })
        .collect();
    let excluded = per_center.iter().filter(|v| v.is_none()).count();
    let omega = per_center.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let omega = if omega.is_finite() { omega } else { 0.0 };
    OmegaReport { omega, per_center, excluded, violation: omega <= 0.0 }
}

/// Least `p ≥ 1` with `(mu2/lambda1)^p ≥ eps/omega`.
pub fn p_eps(eps: f64, omega: f64, mu2: f64, lambda1: f64) -> Result<usize> {
    if !(lambda1 > 0.0) || !(mu2 > lambda1) {
        return Err(LabError::Domination(format!("need mu2 > lambda1 > 0, got {mu2} and {lambda1}")));
    }
    if !(omega > 0.0) || !(eps > 0.0) {
        return Err(LabError::Domain(format!("need eps, omega > 0, got {eps} and {omega}")));
    }
    let q = mu2 / lambda1;
    let target = eps / omega;
    let mut p = ((target.ln() / q.ln()) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    while q.powi(p as i32) < target * (1.0 - 1e-12) {
        p += 1;
    }
    while p > 1 && q.powi(p as i32 - 1) >= target * (1.0 - 1e-12) {
        p -= 1;
    }
    Ok(p)
}

/// `(λ₁, μ₂) = (e^{β̂₁}(1 + slack), e^{α̂₂}(1 − slack))` from the worst rates
/// over a set of splittings.
pub fn domination_constants<T: Real>(splits: &[SplittingEstimate<T>]) -> Result<(f64, f64)> {
    let beta1 = splits.iter().map(|s| s.rates1.1).fold(f64::NEG_INFINITY, f64::max);
    let alpha2 = splits
        .iter()
        .map(|s| s.rates2.map(|r| r.0).ok_or_else(|| LabError::Domination("unstable bundle does not split".into())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok((beta1.exp() * (1.0 + RATE_SLACK), alpha2.exp() * (1.0 - RATE_SLACK)))
}

/// `F⁽ᵖ⁾` on the slow bundle: `E1`-restricted cocycle applied to the `E1`
/// component of `f̂^{-p}(u₁)`. Fast leaves are invariant, so this component
/// is that of the pulled-back slow-leaf point with `E1` coordinate `u₁`.
pub fn linearize_e1<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    split: &SplittingEstimate<T>,
    u1: &[T],
    p: usize,
) -> Result<Vec<T>> {
    require_explicit_fast_leaves(system)?;
    let n = norm(u1).to64();
    if n > EPS2 * (1.0 + 1e-12) {
        return Err(LabError::Radius { norm: n, limit: EPS2 });
    }
    let off = norm(&split.prime().p2.mul_vec(u1)).to64();
    if off > 1e-9 * n.max(1e-300) {
        return Err(LabError::Domain(format!("vector leaves E1 by {off:e}")));
    }
    let chart = &split.chart;
    let v = pullback(system, chart, u1, p)?;
    let v1 = split.prime_at(-(p as isize))?.p1.mul_vec(&v);
    let i = chart.index();
    Ok(chart.window().transfer(i - p as isize, i)?.mul_vec(&v1))
}

/// Cauchy increments `‖F⁽ᵖ⁺¹⁾ − F⁽ᵖ⁾‖` on `E1`, `p = 1..order`, per probe,
/// with the pooled rate fit over `p ≥ 3`.
pub fn e1_increments<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    split: &SplittingEstimate<T>,
    probes: &[Vec<T>],
    order: usize,
) -> Result<(Vec<Vec<f64>>, Option<RateFit>)> {
    let inc: Vec<Vec<f64>> = probes
        .iter()
        .map(|u| {
            let vals: Vec<Vec<T>> = (1..=order).map(|p| linearize_e1(system, split, u, p)).collect::<Result<_>>()?;
            Ok(vals.windows(2).map(|w| norm(&sub(&w[1], &w[0])).to64()).collect())
        })
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = probes.iter().map(|u| norm(u).to64()).collect();
    let fit = fit_rate::<T>(&inc, &norms, 3);
    Ok((inc, fit))
}

/// Taylor constant of the slow map `u₁ ↦ P₁ f̂(u₁)` on `E1`, over seeded
/// pairs along `E1` at each split with `|s − t| ≥ eps1/8`.
pub fn e1_taylor_d<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    splits: &[SplittingEstimate<T>],
    eps1: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    require_explicit_fast_leaves(system)?;
    let mut worst = 0.0f64;
    for (ix, split) in splits.iter().enumerate() {
        let e1 = split.e1.basis()[0].clone();
        let p1 = split.prime_at(1)?.p1;
        let mut g = rng::keyed(seed, rng::label::PAIRS, ix as u64);
        for _ in 0..pairs {
            let (s, t) = loop {
                let (s, t) = (g.gen_range(-eps1..eps1), g.gen_range(-eps1..eps1));
                if (s - t).abs() >= eps1 / 8.0 {
                    break (s, t);
                }
            };
            let (u, v) = (scale(&e1, T::of(s)), scale(&e1, T::of(t)));
            let fu = hat_f_iter(system, &split.chart, &u, 1)?;
            let fv = hat_f_iter(system, &split.chart, &v, 1)?;
            let dv = sub(&v, &u);
            let lin = d_hat_f(system, &split.chart, &u)?.mul_vec(&dv);
            let r: Vec<T> = fv.iter().zip(&fu).zip(&lin).map(|((&a, &b), &c)| a - b - c).collect();
            let nd = norm(&dv);
            worst = worst.max((norm(&p1.mul_vec(&r)) / (nd * nd)).to64());
        }
    }
    Ok(worst)
}

/// Largest ambient distance between `π_x(ξ)` and `π_y(H(ξ))` over the trace
/// `Λ̂^u_x(eps)`, where `H` is the stable holonomy from `x` to `y`.
pub fn lemma62_gap<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    split_x: &SplittingEstimate<T>,
    split_y: &SplittingEstimate<T>,
    lambda: &LambdaIndex<T>,
    eps: f64,
    horizon: usize,
) -> Result<f64> {
    require_explicit_fast_leaves(system)?;
    let tol = eps * (1.0 + 1e-12);
    let trace = trace_with_faces(system, &split_x.chart, lambda, eps, &[eps], &|u: &[T]| norm(u).to64() <= tol)?;
    let (px, py) = (split_x.prime().p1, split_y.prime().p1);
    let mut worst = 0.0f64;
    for xi in &trace.coords {
        let eta = stable_holonomy(system, &split_x.chart, &split_y.chart, xi, horizon)?;
        let a = phi(system, &split_x.chart, &px.mul_vec(xi))?;
        let b = phi(system, &split_y.chart, &py.mul_vec(&eta))?;
        worst = worst.max(system.distance(&a, &b).to64());
    }
    Ok(worst)
}

/// True when the system is built for the (LUPC) analysis.
pub fn is_lupc<T: Real, S: DynamicalSystem<T> + ?Sized>(system: &S) -> bool {
    system.condition() == Condition::Lupc && system.split_dims().is_some()
}

/// Euclidean diameter of `E1` vectors, for reports.
pub fn e1_diameter<T: Real>(members: &[Vec<T>]) -> f64 {
    diameter(members)
}
