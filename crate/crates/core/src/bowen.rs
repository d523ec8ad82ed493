//! Bowen balls on local unstable leaves, ℓ-diameters and the
//! regular-distortion estimators.
//!
//! A ball `B̂^u_p(z, ε)` is cut out of a fixed candidate set: the basic-set
//! traces at `f^q(z)`, `q = 0..p_max`, pulled back to `z`. Every radius and
//! every `p` is compared on the same candidates, so inclusions between balls
//! hold exactly and ratios are sample-consistent.

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;

use crate::charts::{leaf_chain, trace_with_faces, LambdaIndex, UnstableChart, EPS1, EPS2};
use crate::error::{LabError, Result};
use crate::holonomy::stable_holonomy;
use crate::linalg::{dot, gram_volume, norm, sub, Mat};
use crate::linearization::f_p;
use crate::rng;
use crate::scalar::Real;
use crate::systems::DynamicalSystem;

/// Norm of a chart vector at `f^j(z)`.
pub type NormAt<'a, T> = dyn Fn(usize, &[T]) -> f64 + Sync + 'a;

/// Pulled-back traces around one center with their forward norms.
#[derive(Clone, Debug)]
pub struct BowenCandidates<T> {
    pub chart: UnstableChart<T>,
    pub p_max: usize,
    /// Chart coordinates at the center.
    pub points: Vec<Vec<T>>,
    /// `norms[i][j]` is the norm of `f̂^j(points[i])`, infinite once the
    /// orbit has left every ball of interest.
    pub norms: Vec<Vec<f64>>,
}

impl<T: Real> BowenCandidates<T> {
    /// Euclidean candidates for balls of radius up to `limit`, with `faces`
    /// added to full-basic-set lattices. `p_max` is the chart's forward reach.
    pub fn build<S: DynamicalSystem<T> + ?Sized>(
        system: &S,
        chart: &UnstableChart<T>,
        lambda: &LambdaIndex<T>,
        limit: f64,
        faces: &[f64],
    ) -> Result<Self> {
        Self::build_with(system, chart, lambda, chart.fwd(), limit, limit, faces, &|_, u: &[T]| norm(u).to64())
    }

    /// Candidates for `p ≤ p_max` from traces over the cube of half-width
    /// `cube`, with norms measured by `norm_at`; orbits are followed until the
    /// norm exceeds `limit`.
    #[allow(clippy::too_many_arguments)]
    pub fn build_with<S: DynamicalSystem<T> + ?Sized>(
        system: &S,
        chart: &UnstableChart<T>,
        lambda: &LambdaIndex<T>,
        p_max: usize,
        limit: f64,
        cube: f64,
        faces: &[f64],
        norm_at: &NormAt<'_, T>,
    ) -> Result<Self> {
        if !(limit > 0.0) || limit > EPS1 * (1.0 + 1e-12) {
            return Err(LabError::Domain(format!("Bowen radius {limit} outside (0, {EPS1}]")));
        }
        if p_max > chart.fwd() {
            return Err(LabError::Domain(format!("p_max = {p_max} beyond the chart's forward reach {}", chart.fwd())));
        }
        let bound = limit * (1.0 + 1e-9);
        let mut points = Vec::new();
        let mut norms = Vec::new();
        for q in 0..=p_max {
            let cq = chart.shifted(q as isize)?;
            let trace = trace_with_faces(system, &cq, lambda, cube, faces, &|_| true)?;
            for w in &trace.coords {
                if q > 0 && w.iter().all(|c| *c == T::zero()) {
                    continue;
                }
                let chain = leaf_chain(system, &cq, w, q, p_max - q, &mut |j, c| norm_at(j, c) > bound)?;
                let mut row = vec![f64::INFINITY; p_max + 1];
                for (j, c) in chain.coords.iter().enumerate() {
                    row[j] = norm_at(j, c);
                }
                if row[0] <= bound {
                    points.push(chain.coords[0].clone());
                    norms.push(row);
                }
            }
        }
        Ok(BowenCandidates { chart: chart.clone(), p_max, points, norms })
    }

    /// Indices of `B(p, eps)`: candidates with norm at most `eps` at every
    /// `j ≤ p`.
    pub fn members(&self, p: usize, eps: f64) -> Vec<usize> {
        assert!(p <= self.p_max, "p = {p} beyond p_max = {}", self.p_max);
        let tol = eps * (1.0 + 1e-12);
        (0..self.points.len()).filter(|&i| self.norms[i][..=p].iter().all(|&n| n <= tol)).collect()
    }

    pub fn ball(&self, p: usize, eps: f64) -> BowenSample<T> {
        let ix = self.members(p, eps);
        let members: Vec<Vec<T>> = ix.iter().map(|&i| self.points[i].clone()).collect();
        let diam = diameter(&members);
        let ell = members.iter().map(|u| norm(u).to64()).fold(0.0, f64::max);
        BowenSample { center: self.chart.base().to_vec(), p, eps, members, diam, ell, diam_prime: None }
    }
}

/// A sampled Bowen ball at one center.
#[derive(Clone, Debug)]
pub struct BowenSample<T> {
    pub center: Vec<T>,
    pub p: usize,
    pub eps: f64,
    pub members: Vec<Vec<T>>,
    /// Largest pairwise distance of members.
    pub diam: f64,
    /// `ℓ`, the largest member norm.
    pub ell: f64,
    /// Diameter in the adapted norm, filled in for split systems.
    pub diam_prime: Option<f64>,
}

impl<T> BowenSample<T> {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Largest pairwise Euclidean distance.
pub fn diameter<T: Real>(points: &[Vec<T>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    if points[0].len() == 1 {
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| {
            let v = u[0].to64();
            (lo.min(v), hi.max(v))
        });
        return hi - lo;
    }
    diameter_by(points, &|a, b| norm(&sub(a, b)).to64())
}

/// Largest pairwise distance under `dist`, a metric induced by a norm. In
/// one and two dimensions only extreme points of the hull are compared.
pub fn diameter_by<T>(points: &[Vec<T>], dist: &(dyn Fn(&[T], &[T]) -> f64 + Sync)) -> f64
where
    T: Real,
{
    if points.len() < 2 {
        return 0.0;
    }
    let hull;
    let pts: &[Vec<T>] = match points[0].len() {
        1 | 2 => {
            hull = extreme_points(points);
            &hull
        }
        _ => points,
    };
    (0..pts.len())
        .into_par_iter()
        .map(|i| pts[i + 1..].iter().map(|b| dist(&pts[i], b)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// Vertices of the convex hull of a planar or linear point set.
fn extreme_points<T: Real>(points: &[Vec<T>]) -> Vec<Vec<T>> {
    let key = |u: &Vec<T>| (u[0].to64(), u.get(1).map_or(0.0, |c| c.to64()));
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| key(&points[a]).partial_cmp(&key(&points[b])).unwrap_or(std::cmp::Ordering::Equal));
    if points[0].len() == 1 {
        return vec![points[order[0]].clone(), points[order[order.len() - 1]].clone()];
    }
    let cross = |o: usize, a: usize, b: usize| {
        let (o, a, b) = (key(&points[o]), key(&points[a]), key(&points[b]));
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * order.len());
    for pass in 0..2 {
        let start = hull.len();
        let seq: Box<dyn Iterator<Item = &usize>> =
            if pass == 0 { Box::new(order.iter()) } else { Box::new(order.iter().rev()) };
        for &i in seq {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0.0 {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull.sort_unstable();
    hull.dedup();
    hull.into_iter().map(|i| points[i].clone()).collect()
}

/// `B̂^u_p(z, eps)` over the candidates of `chart`, whose forward reach fixes
/// `p_max`.
pub fn bowen_ball<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    lambda: &LambdaIndex<T>,
    p: usize,
    eps: f64,
) -> Result<BowenSample<T>> {
    if p > chart.fwd() {
        return Err(LabError::Domain(format!("p = {p} beyond the chart's forward reach {}", chart.fwd())));
    }
    Ok(BowenCandidates::build(system, chart, lambda, eps, &[eps])?.ball(p, eps))
}

/// Seeded choice of `count` distinct sample indices.
pub fn pick_centers(len: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 || count > len {
        return Err(LabError::Domain(format!("cannot pick {count} centers from {len} points")));
    }
    let mut g = rng::keyed(seed, rng::label::CENTERS, 0);
    Ok(sample_indices(&mut g, len, count).into_vec())
}

/// One `(center, p)` cell of a distortion table.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortionRow {
    pub center_ix: usize,
    pub p: usize,
    pub eps: f64,
    pub delta: f64,
    pub diam_eps: f64,
    pub diam_delta: f64,
    /// `None` when the δ-ball is degenerate.
    pub ratio: Option<f64>,
    pub ell_eps: f64,
    pub ell_delta: f64,
}

impl DistortionRow {
    pub fn defined(&self) -> bool {
        self.ratio.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct DistortionReport {
    pub r_hat: f64,
    /// Largest defined ratio per center, in center order.
    pub per_center_max: Vec<f64>,
    /// Fraction of defined cells.
    pub coverage: f64,
    pub rows: Vec<DistortionRow>,
}

impl DistortionReport {
    /// Largest defined ratio over `p ∈ [lo, hi]`.
    pub fn max_over(&self, lo: usize, hi: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.p >= lo && r.p <= hi)
            .filter_map(|r| r.ratio)
            .fold(0.0, f64::max)
    }
}

fn check_radii(delta: f64, eps: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= eps && eps <= EPS1 * (1.0 + 1e-12)) {
        return Err(LabError::Domain(format!("need 0 < delta <= eps <= {EPS1}, got {delta}, {eps}")));
    }
    Ok(())
}

/// Candidates at each of `count` seeded centers, in center order.
pub fn center_candidates<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    lambda: &LambdaIndex<T>,
    limit: f64,
    faces: &[f64],
    p_max: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<BowenCandidates<T>>> {
    let ix = pick_centers(lambda.sample.len(), count, seed)?;
    ix.par_iter()
        .map(|&i| {
            let chart = UnstableChart::new(system, &lambda.sample.points[i], 0, p_max)?;
            BowenCandidates::build(system, &chart, lambda, limit, faces)
        })
        .collect()
}

/// `diam B(p, eps) / diam B(p, delta)` for `p = 0..p_max` at seeded centers.
#[allow(clippy::too_many_arguments)]
pub fn distortion_r<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    lambda: &LambdaIndex<T>,
    delta: f64,
    eps: f64,
    p_max: usize,
    centers: usize,
    seed: u64,
) -> Result<DistortionReport> {
    check_radii(delta, eps)?;
    let cands = center_candidates(system, lambda, eps, &[delta, eps], p_max, centers, seed)?;
    Ok(distortion_from(&cands, delta, eps))
}

/// Distortion table over prebuilt candidates.
pub fn distortion_from<T: Real>(cands: &[BowenCandidates<T>], delta: f64, eps: f64) -> DistortionReport {
    let mut rows = Vec::new();
    let mut per_center_max = Vec::with_capacity(cands.len());
    for (ci, c) in cands.iter().enumerate() {
        let mut best = 0.0f64;
        for p in 0..=c.p_max {
            let be = c.ball(p, eps);
            let bd = c.ball(p, delta);
            let ratio = (bd.diam > 0.0).then(|| be.diam / bd.diam);
            if let Some(r) = ratio {
                best = best.max(r);
            }
            rows.push(DistortionRow {
                center_ix: ci,
                p,
                eps,
                delta,
                diam_eps: be.diam,
                diam_delta: bd.diam,
                ratio,
                ell_eps: be.ell,
                ell_delta: bd.ell,
            });
        }
        per_center_max.push(best);
    }
    let defined = rows.iter().filter(|r| r.defined()).count();
    let coverage = if rows.is_empty() { 0.0 } else { defined as f64 / rows.len() as f64 };
    let r_hat = rows.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
    DistortionReport { r_hat, per_center_max, coverage, rows }
}

/// `eps·k/n` for `k = 1..=n`.
pub fn delta_grid(eps: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| eps * k as f64 / n as f64).collect()
}

#[derive(Clone, Debug)]
pub struct ShrinkReport {
    pub delta: f64,
    /// No grid value met the target; `delta` is the smallest grid value.
    pub warn: bool,
    /// `(δ, max ratio diam B(p,δ)/diam B(p,ε))` per grid value.
    pub ratios: Vec<(f64, f64)>,
}

/// Largest grid `δ` with `diam B(p,δ) ≤ rho · diam B(p,eps)` over all sampled
/// `(z, p)` with a nondegenerate ε-ball.
#[allow(clippy::too_many_arguments)]
pub fn shrink_delta<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    lambda: &LambdaIndex<T>,
    eps: f64,
    rho: f64,
    grid: &[f64],
    p_max: usize,
    centers: usize,
    seed: u64,
) -> Result<ShrinkReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(LabError::Domain(format!("rho = {rho} outside (0, 1)")));
    }
    if grid.is_empty() {
        return Err(LabError::Domain("empty delta grid".into()));
    }
    for &d in grid {
        check_radii(d, eps)?;
    }
    let mut faces = grid.to_vec();
    faces.push(eps);
    let cands = center_candidates(system, lambda, eps, &faces, p_max, centers, seed)?;
    Ok(shrink_from(&cands, eps, rho, grid))
}

pub fn shrink_from<T: Real>(cands: &[BowenCandidates<T>], eps: f64, rho: f64, grid: &[f64]) -> ShrinkReport {
    let mut ratios = Vec::with_capacity(grid.len());
    for &d in grid {
        let mut worst = 0.0f64;
        for c in cands {
            for p in 0..=c.p_max {
                let de = c.ball(p, eps).diam;
                if de > 0.0 {
                    worst = worst.max(c.ball(p, d).diam / de);
                }
            }
        }
        ratios.push((d, worst));
    }
    let ok = ratios.iter().filter(|(_, r)| *r <= rho * (1.0 + 1e-9)).map(|(d, _)| *d).fold(None, |a: Option<f64>, d| {
        Some(a.map_or(d, |a| a.max(d)))
    });
    match ok {
        Some(delta) => ShrinkReport { delta, warn: false, ratios },
        None => {
            let delta = grid.iter().cloned().fold(f64::INFINITY, f64::min);
            ShrinkReport { delta, warn: true, ratios }
        }
    }
}

/// Numerical span of the linearized trace `F(Λ̂^u_x(δ))`.
#[derive(Clone, Debug)]
pub struct SpanEstimate<T> {
    pub chart: UnstableChart<T>,
    pub delta: f64,
    pub dim: usize,
    /// Linearized trace vectors spanning the estimate, greedily chosen for
    /// volume.
    pub basis: Vec<Vec<T>>,
    /// Trace points whose images form `basis`.
    pub sources: Vec<Vec<T>>,
    pub volume: f64,
    /// Singular values of the image matrix, decreasing.
    pub sigma: Vec<f64>,
}

/// Applies `F⁽ᵖ⁾` (`p = p_cap`) to the trace `Λ̂^u_x(delta)` and returns its
/// numerical rank (`σ > 1e-8 σ_max`) with a greedy maximal-volume basis.
pub fn span_estimate<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    lambda: &LambdaIndex<T>,
    delta: f64,
    p_cap: usize,
) -> Result<SpanEstimate<T>> {
    if !(delta > 0.0 && delta <= EPS2 * (1.0 + 1e-12)) {
        return Err(LabError::Domain(format!("delta = {delta} outside (0, {EPS2}]")));
    }
    let tol = delta * (1.0 + 1e-12);
    let trace = trace_with_faces(system, chart, lambda, delta, &[delta], &|u: &[T]| norm(u).to64() <= tol)?;
    if trace.is_empty() {
        return Err(LabError::Domain("empty trace".into()));
    }
    let mut sources = Vec::new();
    let mut images = Vec::new();
    for u in &trace.coords {
        let v = f_p(system, chart, u, p_cap)?;
        if norm(&v) > T::zero() {
            sources.push(u.clone());
            images.push(v);
        }
    }
    let d = chart.dim();
    let mut gram = Mat::<T>::zeros(d, d);
    for v in &images {
        for i in 0..d {
            for j in 0..d {
                gram[(i, j)] = gram[(i, j)] + v[i] * v[j];
            }
        }
    }
    let sigma: Vec<f64> = gram.singular_values().iter().map(|s| s.to64().max(0.0).sqrt()).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let dim = sigma.iter().filter(|&&s| s > 1e-8 * smax).count();
    if dim == 0 {
        return Err(LabError::Domain("linearized trace is degenerate".into()));
    }
    let picks = greedy_basis(&images, dim);
    let basis: Vec<Vec<T>> = picks.iter().map(|&i| images[i].clone()).collect();
    let volume = gram_volume(&basis)?.to64();
    Ok(SpanEstimate {
        chart: chart.clone(),
        delta,
        dim,
        sources: picks.iter().map(|&i| sources[i].clone()).collect(),
        basis,
        volume,
        sigma,
    })
}

/// Indices of `m` vectors, each the one with the largest component
/// orthogonal to those already chosen.
pub fn greedy_basis<T: Real>(vectors: &[Vec<T>], m: usize) -> Vec<usize> {
    let mut q: Vec<Vec<T>> = Vec::new();
    let mut picks = Vec::new();
    for _ in 0..m {
        let mut best: Option<(usize, T, Vec<T>)> = None;
        for (i, v) in vectors.iter().enumerate() {
            if picks.contains(&i) {
                continue;
            }
            let mut r = v.clone();
            for _ in 0..2 {
                for e in &q {
                    let c = dot(e, &r);
                    for (a, b) in r.iter_mut().zip(e) {
                        *a = *a - c * *b;
                    }
                }
            }
            let n = norm(&r);
            if best.as_ref().is_none_or(|(_, bn, _)| n > *bn) {
                best = Some((i, n, r));
            }
        }
        match best {
            Some((i, n, r)) if n > T::zero() => {
                picks.push(i);
                q.push(r.iter().map(|&a| a / n).collect());
            }
            _ => break,
        }
    }
    picks
}

/// Span dimension over a decreasing sweep of radii.
#[derive(Clone, Debug)]
pub struct Stabilization {
    pub dims: Vec<(f64, usize)>,
    /// Largest swept radius from which the dimension no longer changes, or
    /// `None` when the two smallest radii disagree.
    pub radius: Option<f64>,
}

pub fn stabilization_radius<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    lambda: &LambdaIndex<T>,
    deltas: &[f64],
    p_cap: usize,
) -> Result<Stabilization> {
    let mut ds = deltas.to_vec();
    ds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let dims: Vec<(f64, usize)> =
        ds.iter().map(|&d| Ok((d, span_estimate(system, chart, lambda, d, p_cap)?.dim))).collect::<Result<_>>()?;
    let radius = match dims.len() {
        0 => None,
        1 => Some(dims[0].0),
        n if dims[n - 1].1 != dims[n - 2].1 => None,
        n => {
            let last = dims[n - 1].1;
            let mut r = dims[n - 1].0;
            for &(d, m) in dims.iter().rev() {
                if m != last {
                    break;
                }
                r = d;
            }
            Some(r)
        }
    };
    Ok(Stabilization { dims, radius })
}

#[derive(Clone, Debug)]
pub struct Sublemma45 {
    pub m: usize,
    /// Volume of the basis at the center.
    pub volume: f64,
    /// Largest norm of the operator sending the transported basis to an
    /// orthonormal one, over the center and its neighbors.
    pub b: f64,
    /// The bound on `b` implied by volume `≥ Δ/2` and norms `≤ 2‖u_j‖`.
    pub b_apriori: f64,
    pub d_bound: f64,
    pub d_apriori: f64,
    /// Largest `ℓ(ε)/ℓ(δ)` over neighbors and `p ≤ p_max`.
    pub empirical_max: f64,
    /// Neighbors where the transported basis lost half its volume or a
    /// vector changed norm by more than a factor 2.
    pub outside_neighborhood: usize,
    pub holds: bool,
}

/// Checks `ℓ(Λ̃(ε) ∩ B̃_p(ε)) ≤ D ℓ(Λ̃(δ) ∩ B̃_p(δ))` with `D = m ε b` at the
/// center and at stable-related neighbors. Neighbor charts need `p_max` and
/// `p_cap` pullbacks and `horizon` forward steps.
#[allow(clippy::too_many_arguments)]
pub fn sublemma45_bound<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart_x: &UnstableChart<T>,
    neighbors: &[UnstableChart<T>],
    lambda: &LambdaIndex<T>,
    delta: f64,
    eps: f64,
    p_max: usize,
    p_cap: usize,
    horizon: usize,
) -> Result<Sublemma45> {
    if !(delta > 0.0 && delta <= eps && eps <= EPS2 / 2.0 * (1.0 + 1e-12)) {
        return Err(LabError::Domain(format!("need 0 < delta <= eps <= {}, got {delta}, {eps}", EPS2 / 2.0)));
    }
    let span = span_estimate(system, chart_x, lambda, delta / 2.0, p_cap)?;
    let m = span.dim;
    if !(span.volume > 0.0) {
        return Err(LabError::Domain("degenerate basis volume".into()));
    }
    let base_norms: Vec<f64> = span.basis.iter().map(|u| norm(u).to64()).collect();
    let mut all = vec![chart_x.clone()];
    all.extend(neighbors.iter().cloned());
    let per: Vec<(f64, bool, f64)> = all
        .par_iter()
        .enumerate()
        .map(|(k, cy)| {
            let cols: Vec<Vec<T>> = if k == 0 {
                span.basis.clone()
            } else {
                span.sources
                    .iter()
                    .map(|t| f_p(system, cy, &stable_holonomy(system, chart_x, cy, t, horizon)?, p_cap))
                    .collect::<Result<_>>()?
            };
            let vol = gram_volume(&cols)?.to64();
            let inside = vol >= span.volume / 2.0
                && cols.iter().zip(&base_norms).all(|(c, &n0)| {
                    let n = norm(c).to64();
                    n >= n0 / 2.0 && n <= 2.0 * n0
                });
            let smin = Mat::from_cols(&cols).sigma_min().to64();
            let ratio = ell_ratio(system, cy, lambda, delta, eps, p_max, p_cap)?;
            Ok((1.0 / smin, inside, ratio))
        })
        .collect::<Result<_>>()?;
    let b = per.iter().map(|t| t.0).fold(0.0, f64::max);
    let empirical_max = per.iter().map(|t| t.2).fold(0.0, f64::max);
    let outside_neighborhood = per.iter().filter(|t| !t.1).count();
    let sum_sq: f64 = base_norms.iter().map(|n| n * n).sum();
    let b_apriori = (2.0 * sum_sq.sqrt()).powi(m as i32 - 1) / (span.volume / 2.0);
    let d_bound = m as f64 * eps * b;
    Ok(Sublemma45 {
        m,
        volume: span.volume,
        b,
        b_apriori,
        d_bound,
        d_apriori: m as f64 * eps * b_apriori,
        empirical_max,
        outside_neighborhood,
        holds: empirical_max <= d_bound * (1.0 + 1e-9),
    })
}

/// `max_p ℓ(Λ̃_z(ε) ∩ B̃_p(z,ε)) / ℓ(Λ̃_z(δ) ∩ B̃_p(z,δ))` with `z = f^{-p}(y)`.
///
/// By the conjugacy `df̂ᵖ_z(0)∘F_z = F_y∘f̂ᵖ_z`, the set at `z` is the
/// linear pullback of `{F_y(w) : w ∈ Λ̂^u_y, ‖F_y(w)‖ ≤ r}`.
fn ell_ratio<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart_y: &UnstableChart<T>,
    lambda: &LambdaIndex<T>,
    delta: f64,
    eps: f64,
    p_max: usize,
    p_cap: usize,
) -> Result<f64> {
    let r = (2.0 * eps).min(EPS2);
    let tol = r * (1.0 + 1e-12);
    let trace = trace_with_faces(system, chart_y, lambda, r, &[delta, eps], &|u: &[T]| norm(u).to64() <= tol)?;
    let images: Vec<Vec<T>> = trace.coords.iter().map(|w| f_p(system, chart_y, w, p_cap)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for p in 0..=p_max {
        let back = chart_y.transfer(-(p as isize))?;
        let ell = |rad: f64| {
            images
                .iter()
                .filter(|v| norm(v).to64() <= rad * (1.0 + 1e-12))
                .map(|v| norm(&back.mul_vec(v)).to64())
                .fold(0.0, f64::max)
        };
        let (le, ld) = (ell(eps), ell(delta));
        if ld > 0.0 {
            worst = worst.max(le / ld);
        }
    }
    Ok(worst)
}

/// Violations of the two inclusions relating the nonlinear ball `B̂` and the
/// linearized ball `B̃` under `F_z`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sandwich {
    pub outer_checked: usize,
    pub outer_violations: usize,
    pub inner_checked: usize,
    pub inner_violations: usize,
}

impl Sandwich {
    pub fn holds(&self) -> bool {
        self.outer_violations == 0 && self.inner_violations == 0
    }
}

/// `Λ̃(ε/2) ∩ B̃_p(ε/2) ⊂ F(Λ̂(ε) ∩ B̂_p(ε)) ⊂ Λ̃(2ε) ∩ B̃_p(2ε)` on the
/// candidates at `chart`, which needs `p_cap` pullbacks and `p` forward steps.
pub fn sandwich_check<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    chart: &UnstableChart<T>,
    lambda: &LambdaIndex<T>,
    p: usize,
    eps: f64,
    p_cap: usize,
) -> Result<Sandwich> {
    if !(eps > 0.0 && eps <= EPS2 * (1.0 + 1e-12)) {
        return Err(LabError::Domain(format!("eps = {eps} outside (0, {EPS2}]")));
    }
    let cands = BowenCandidates::build(system, chart, lambda, eps, &[eps, eps / 2.0])?;
    let fwd = chart.transfer(p as isize)?;
    let tol = 1.0 + 1e-9;
    let member: Vec<bool> = {
        let mut v = vec![false; cands.points.len()];
        for i in cands.members(p, eps) {
            v[i] = true;
        }
        v
    };
    let mut out = Sandwich::default();
    for (i, u) in cands.points.iter().enumerate() {
        let v = f_p(system, chart, u, p_cap)?;
        let nv = norm(&v).to64();
        let nf = norm(&fwd.mul_vec(&v)).to64();
        if member[i] {
            out.outer_checked += 1;
            if nv > 2.0 * eps * tol || nf > 2.0 * eps * tol {
                out.outer_violations += 1;
            }
        }
        if nv <= eps / 2.0 && nf <= eps / 2.0 {
            out.inner_checked += 1;
            if !member[i] {
                out.inner_violations += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{cat_lambda, sample_lambda, Cat, PCat, Prod4, Solenoid, Topology};

    fn cat_index(budget: usize) -> LambdaIndex<f64> {
        LambdaIndex::new(sample_lambda(&Cat, budget, 0).unwrap(), Topology::Torus2)
    }

    #[test]
    fn hull_diameter_matches_pairwise() {
        let mut rng = crate::rng::keyed(11, 0, 0);
        for n in [2usize, 3, 10, 200] {
            let pts: Vec<Vec<f64>> =
                (0..n).map(|_| vec![rand::Rng::gen_range(&mut rng, -1.0..1.0), rand::Rng::gen_range(&mut rng, -0.2..0.2)]).collect();
            let maxnorm = |a: &[f64], b: &[f64]| (a[0] - b[0]).abs().max(3.0 * (a[1] - b[1]).abs());
            for d in [&maxnorm as &(dyn Fn(&[f64], &[f64]) -> f64 + Sync), &|a: &[f64], b: &[f64]| norm(&sub(a, b))] {
                let brute = pts.iter().flat_map(|a| pts.iter().map(move |b| d(a, b))).fold(0.0, f64::max);
                assert!((diameter_by(&pts, d) - brute).abs() <= 1e-15, "n = {n}");
            }
        }
        let same = vec![vec![0.5, 0.5]; 4];
        assert_eq!(diameter(&same), 0.0);
    }

    #[test]
    fn cat_ball_matches_closed_form() {
        let idx = cat_index(1_000_000);
        let chart = UnstableChart::new(&Cat, &[0.3, 0.4], 0, 10).unwrap();
        let c = BowenCandidates::build(&Cat, &chart, &idx, 0.1, &[0.1]).unwrap();
        let l = cat_lambda::<f64>();
        for p in 0..=10 {
            let b = c.ball(p, 0.1);
            let ell = 0.1 * l.powi(-(p as i32));
            assert!((b.ell / ell - 1.0).abs() < 1e-9, "p={p}");
            assert!((b.diam / (2.0 * ell) - 1.0).abs() < 1e-9);
        }
        assert!((c.ball(5, 0.1).ell - 8.13e-4).abs() < 1e-6);
    }

    #[test]
    fn p_zero_is_the_trace() {
        let idx = cat_index(10_000);
        let chart = UnstableChart::new(&Cat, &[0.3, 0.4], 0, 3).unwrap();
        let b = bowen_ball(&Cat, &chart, &idx, 0, 0.1).unwrap();
        assert!((b.diam - 0.2).abs() < 1e-12);
        assert!(b.members.iter().all(|u| u[0].abs() <= 0.1 + 1e-15));
    }

    #[test]
    fn membership_monotone() {
        let s = PCat::<f64>::new(0.03).unwrap();
        let idx = LambdaIndex::new(sample_lambda(&s, 40_000, 1).unwrap(), Topology::Torus2);
        let chart = UnstableChart::new(&s, &[0.61, 0.13], 0, 8).unwrap();
        let c = BowenCandidates::build(&s, &chart, &idx, 0.1, &[0.05, 0.1]).unwrap();
        for p in 0..8 {
            let a = c.members(p + 1, 0.1);
            let b = c.members(p, 0.1);
            assert!(a.iter().all(|i| b.contains(i)));
            assert!(c.ball(p, 0.05).diam <= c.ball(p, 0.1).diam);
        }
    }

    #[test]
    fn cat_distortion_is_eps_over_delta() {
        let idx = cat_index(1_000_000);
        let r = distortion_r(&Cat, &idx, 0.01, 0.1, 10, 4, 7).unwrap();
        assert_eq!(r.coverage, 1.0);
        assert!((r.r_hat / 10.0 - 1.0).abs() < 1e-9);
        let same = distortion_r(&Cat, &idx, 0.1, 0.1, 4, 2, 7).unwrap();
        assert_eq!(same.r_hat, 1.0);
    }

    #[test]
    fn cat_shrink_delta() {
        let idx = cat_index(1_000_000);
        let s = shrink_delta(&Cat, &idx, 0.1, 0.5, &delta_grid(0.1, 20), 6, 2, 3).unwrap();
        assert!(!s.warn);
        assert!((s.delta - 0.05).abs() < 1e-15);
        let near_one = shrink_delta(&Cat, &idx, 0.1, 0.99, &delta_grid(0.1, 20), 6, 2, 3).unwrap();
        assert!((near_one.delta - 0.095).abs() < 1e-12);
    }

    #[test]
    fn span_dimensions() {
        let idx = cat_index(40_000);
        let chart = UnstableChart::new(&Cat, &[0.3, 0.4], 6, 0).unwrap();
        let sp = span_estimate(&Cat, &chart, &idx, 0.05, 6).unwrap();
        assert_eq!(sp.dim, 1);
        assert!(sp.volume > 0.0);

        let s = Prod4::<f64>::new(0.0);
        let idx4 = LambdaIndex::new(sample_lambda(&s, 1_000_000, 0).unwrap(), Topology::Torus4);
        let c4 = UnstableChart::new(&s, &[0.1, 0.2, 0.3, 0.4], 6, 0).unwrap();
        let st = stabilization_radius(&s, &c4, &idx4, &[0.05, 0.025, 0.0125], 6).unwrap();
        assert!(st.dims.iter().all(|&(_, m)| m == 2));
        assert_eq!(st.radius, Some(0.05));
    }

    #[test]
    fn greedy_basis_prefers_volume() {
        let v = vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 0.5]];
        assert_eq!(greedy_basis(&v, 2), vec![0, 2]);
    }

    #[test]
    fn cat_sublemma_closed_form() {
        let idx = cat_index(1_000_000);
        let x = [0.3, 0.4];
        let chart = UnstableChart::new(&Cat, &x, 10, 25).unwrap();
        let es = crate::systems::cat_stable::<f64>();
        let ys: Vec<UnstableChart<f64>> = [0.002, -0.003]
            .iter()
            .map(|&d| {
                let y = Cat.translate(&x, &crate::linalg::scale(&es, d));
                UnstableChart::new(&Cat, &y, 10, 25).unwrap()
            })
            .collect();
        let r = sublemma45_bound(&Cat, &chart, &ys, &idx, 0.005, 0.02, 10, 10, 25).unwrap();
        assert_eq!(r.m, 1);
        // b = 1/|u1| with |u1| = delta/2
        assert!((r.b - 2.0 / 0.005).abs() < 1e-6);
        assert!((r.empirical_max - 4.0).abs() < 1e-9);
        assert!(r.holds);
        let same = sublemma45_bound(&Cat, &chart, &ys, &idx, 0.02, 0.02, 10, 10, 25).unwrap();
        assert!((same.empirical_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sandwich_on_pcat() {
        let s = PCat::<f64>::new(0.03).unwrap();
        let idx = LambdaIndex::new(sample_lambda(&s, 250_000, 1).unwrap(), Topology::Torus2);
        let chart = UnstableChart::new(&s, &[0.61, 0.13], 12, 6).unwrap();
        for p in [0, 3, 6] {
            let w = sandwich_check(&s, &chart, &idx, p, 0.05, 12).unwrap();
            assert!(w.holds(), "{w:?}");
            assert!(w.inner_checked > 0 && w.outer_checked > 0);
        }
    }

    #[test]
    fn solenoid_ball_halves() {
        let s = Solenoid::<f64>::new(0.5, 0.1).unwrap();
        let sample = sample_lambda(&s, 100_000, 2).unwrap();
        let x = sample.points[500].clone();
        let idx = LambdaIndex::new(sample, Topology::SolidTorus);
        let chart = UnstableChart::new(&s, &x, 0, 4).unwrap();
        let c = BowenCandidates::build(&s, &chart, &idx, 0.1, &[]).unwrap();
        let (b0, b3) = (c.ball(0, 0.1), c.ball(3, 0.1));
        assert!(!b3.is_empty());
        assert!(b3.ell <= 0.1 / 8.0 + 1e-12);
        assert!(b0.ell > 4.0 * b3.ell);
    }
}
