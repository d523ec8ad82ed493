use rand::Rng;

use super::{DynamicalSystem, Topology};
use crate::error::{LabError, Result};
use crate::linalg::to_f64;
use crate::rng;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    DenseGrid,
    AttractorOrbit,
}

/// Finite approximation of the basic set.
#[derive(Clone, Debug)]
pub struct LambdaSample<T> {
    pub points: Vec<Vec<T>>,
    pub provenance: Provenance,
    pub hausdorff_tol: f64,
    /// Typical spacing of sample points along an unstable leaf.
    pub resolution: f64,
    /// Allowed transverse offset when intersecting the sample with a leaf.
    pub trace_tol: f64,
}

impl<T: Real> LambdaSample<T> {
    /// True when the basic set is the whole manifold.
    pub fn is_full(&self) -> bool {
        self.provenance == Provenance::DenseGrid
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn grid(&self, topology: Topology) -> NeighborGrid {
        let pts: Vec<Vec<f64>> = self.points.iter().map(|p| to_f64(p)).collect();
        NeighborGrid::new(pts, topology)
    }
}

/// Torus systems: a randomly shifted lattice with `round(budget^{1/n})`
/// points per axis. Solenoid: `budget` iterates of a seeded orbit after
/// 1000 transient steps.
pub fn sample_lambda<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    budget: usize,
    seed: u64,
) -> Result<LambdaSample<T>> {
    if budget == 0 {
        return Err(LabError::Domain("budget must be at least 1".into()));
    }
    let mut r = rng::keyed(seed, rng::label::SAMPLE, 0);
    let n = system.ambient_dim();
    match system.topology() {
        Topology::Torus2 | Topology::Torus4 => {
            let per = ((budget as f64).powf(1.0 / n as f64).round() as usize).max(1);
            let h = 1.0 / per as f64;
            let shift: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..h)).collect();
            let total = per.pow(n as u32);
            let mut points = Vec::with_capacity(total);
            for idx in 0..total {
                let mut rem = idx;
                let mut p = Vec::with_capacity(n);
                for s in &shift {
                    p.push(T::of(s + (rem % per) as f64 * h));
                    rem /= per;
                }
                points.push(p);
            }
            let covering = h * (n as f64).sqrt() / 2.0;
            Ok(LambdaSample {
                points,
                provenance: Provenance::DenseGrid,
                hausdorff_tol: covering.max(1e-3) * (1.0 + 1e-9),
                resolution: h,
                trace_tol: 1e-6,
            })
        }
        Topology::SolidTorus => {
            // The angle is carried as a window on a random bit stream, so the
            // orbit is that of a point with infinitely many random binary
            // digits; naive doubling in floating point runs out of digits and
            // collapses onto the fixed point after ~53 steps.
            let k = system.block();
            let mut window: u128 = r.gen();
            let advance = |w: &mut u128, r: &mut rand_chacha::ChaCha8Rng| {
                for _ in 0..k {
                    *w = (*w << 1) | (r.gen::<bool>() as u128);
                }
            };
            let angle = |w: u128| -> T {
                let hi = (w >> 75) as f64 * 2f64.powi(-53);
                let lo = ((w >> 22) & ((1u128 << 53) - 1)) as f64 * 2f64.powi(-106);
                T::of(hi) + T::of(lo)
            };
            let mut p = vec![T::zero(); n];
            p[0] = angle(window);
            for _ in 0..1000 {
                p = system.step(&p);
                advance(&mut window, &mut r);
                p[0] = angle(window);
            }
            let mut points = Vec::with_capacity(budget);
            for _ in 0..budget {
                points.push(p.clone());
                p = system.step(&p);
                advance(&mut window, &mut r);
                p[0] = angle(window);
            }
            let zmax = points
                .iter()
                .map(|q| q[1..].iter().map(|v| v.to64() * v.to64()).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let thickness = 2.0 * zmax;
            let trace_tol = 1e-3 * thickness;
            // strands thinner than trace_tol are depth d with contraction^d · thickness <= tol;
            // a fraction 2^{-d} of the orbit lands on the leaf through a given point
            let contraction = system.params().get("lambda").copied().unwrap_or(0.1).powi(system.block() as i32);
            let depth = ((trace_tol / thickness).ln() / contraction.ln()).ceil().max(0.0);
            let resolution = 2f64.powf(depth * system.block() as f64) / budget as f64;
            Ok(LambdaSample {
                points,
                provenance: Provenance::AttractorOrbit,
                hausdorff_tol: 1e-3,
                resolution,
                trace_tol,
            })
        }
    }
}

/// Bucket grid for radius queries on the torus or the solid torus.
#[derive(Clone, Debug)]
pub struct NeighborGrid {
    points: Vec<Vec<f64>>,
    periodic: Vec<bool>,
    lo: Vec<f64>,
    width: Vec<f64>,
    cells: Vec<usize>,
    start: Vec<usize>,
    order: Vec<u32>,
}

impl NeighborGrid {
    pub fn new(points: Vec<Vec<f64>>, topology: Topology) -> Self {
        let n = points.first().map_or(1, |p| p.len());
        let periodic: Vec<bool> = match topology {
            Topology::SolidTorus => (0..n).map(|i| i == 0).collect(),
            _ => vec![true; n],
        };
        let per = (((points.len() as f64) / 4.0).powf(1.0 / n as f64).floor() as usize).clamp(1, 4096);
        let mut lo = vec![0.0; n];
        let mut width = vec![1.0 / per as f64; n];
        for d in 0..n {
            if !periodic[d] {
                let mn = points.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
                let mx = points.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
                lo[d] = mn;
                width[d] = ((mx - mn) / per as f64).max(1e-12);
            }
        }
        let cells = vec![per; n];
        let total: usize = cells.iter().product();
        let mut key: Vec<(usize, u32)> = Vec::with_capacity(points.len());
        let mut g = NeighborGrid { points: vec![], periodic, lo, width, cells, start: vec![], order: vec![] };
        for (i, p) in points.iter().enumerate() {
            let c: Vec<usize> = (0..n).map(|d| g.cell_of(d, p[d])).collect();
            key.push((g.flat(&c), i as u32));
        }
        key.sort_unstable();
        let mut start = vec![0usize; total + 1];
        for &(c, _) in &key {
            start[c + 1] += 1;
        }
        for c in 0..total {
            start[c + 1] += start[c];
        }
        g.order = key.into_iter().map(|(_, i)| i).collect();
        g.start = start;
        g.points = points;
        g
    }

    fn cell_of(&self, d: usize, v: f64) -> usize {
        let c = ((v - self.lo[d]) / self.width[d]).floor();
        let m = self.cells[d] as f64;
        if self.periodic[d] {
            c.rem_euclid(m) as usize
        } else {
            c.clamp(0.0, m - 1.0) as usize
        }
    }

    fn flat(&self, c: &[usize]) -> usize {
        c.iter().zip(&self.cells).rev().fold(0, |acc, (&ci, &m)| acc * m + ci)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.periodic)
            .map(|((x, y), &per)| {
                let mut d = (x - y).abs();
                if per {
                    d = d.min(1.0 - d);
                }
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Indices of all points within `r` of `q`, ascending.
    pub fn within(&self, q: &[f64], r: f64) -> Vec<usize> {
        let n = q.len();
        let mut ranges: Vec<Vec<usize>> = Vec::with_capacity(n);
        for d in 0..n {
            let m = self.cells[d] as i64;
            let a = ((q[d] - r - self.lo[d]) / self.width[d]).floor() as i64;
            let b = ((q[d] + r - self.lo[d]) / self.width[d]).floor() as i64;
            let idx: Vec<usize> = if self.periodic[d] {
                if b - a + 1 >= m {
                    (0..m as usize).collect()
                } else {
                    (a..=b).map(|c| c.rem_euclid(m) as usize).collect()
                }
            } else {
                (a.max(0)..=b.min(m - 1)).map(|c| c as usize).collect()
            };
            if idx.is_empty() {
                return vec![];
            }
            ranges.push(idx);
        }
        let mut out = Vec::new();
        let mut cur = vec![0usize; n];
        loop {
            let c: Vec<usize> = (0..n).map(|d| ranges[d][cur[d]]).collect();
            let f = self.flat(&c);
            for &i in &self.order[self.start[f]..self.start[f + 1]] {
                if self.dist(q, &self.points[i as usize]) <= r {
                    out.push(i as usize);
                }
            }
            let mut d = 0;
            loop {
                if d == n {
                    out.sort_unstable();
                    return out;
                }
                cur[d] += 1;
                if cur[d] < ranges[d].len() {
                    break;
                }
                cur[d] = 0;
                d += 1;
            }
        }
    }

    /// Nearest sample point and its distance.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut r = self.width.iter().cloned().fold(f64::INFINITY, f64::min);
        loop {
            let hits = self.within(q, r);
            if let Some(best) = hits
                .iter()
                .map(|&i| (i, self.dist(q, &self.points[i])))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            {
                return Some(best);
            }
            r *= 2.0;
        }
    }
}

/// One-sided Hausdorff distance from `f^steps(sample)` to the sample,
/// over an evenly spaced subset of at most `max_points` points.
pub fn invariance_defect<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    sample: &LambdaSample<T>,
    steps: usize,
    max_points: usize,
) -> f64 {
    let grid = sample.grid(system.topology());
    let stride = (sample.len() / max_points.max(1)).max(1);
    let mut worst: f64 = 0.0;
    for p in sample.points.iter().step_by(stride) {
        let mut q = p.clone();
        for _ in 0..steps {
            q = system.step(&q);
        }
        if let Some((_, d)) = grid.nearest(&to_f64(&q)) {
            worst = worst.max(d);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{Cat, PCat, Prod4, Solenoid};

    #[test]
    fn grid_budget_four() {
        let s = sample_lambda::<f64, _>(&Cat, 4, 0).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.points.iter().all(|p| p.iter().all(|&v| (0.0..1.0).contains(&v))));
        assert_eq!(s.provenance, Provenance::DenseGrid);
    }

    #[test]
    fn solenoid_sample_in_absorbing_disc() {
        let sol = Solenoid::<f64>::new(0.5, 0.1).unwrap();
        let s = sample_lambda(&sol, 100, 3).unwrap();
        assert_eq!(s.len(), 100);
        let r = 0.5 / 0.9;
        assert!(s.points.iter().all(|p| (p[1] * p[1] + p[2] * p[2]).sqrt() <= r * (1.0 + 1e-12)));
        assert_eq!(s.provenance, Provenance::AttractorOrbit);
    }

    #[test]
    fn sample_deterministic() {
        let a = sample_lambda::<f64, _>(&Cat, 100, 9).unwrap();
        let b = sample_lambda::<f64, _>(&Cat, 100, 9).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn forward_images_stay_near_sample() {
        let s = sample_lambda::<f64, _>(&Cat, 1_000_000, 1).unwrap();
        assert!(invariance_defect(&Cat, &s, 10, 2000) <= s.hausdorff_tol);
        let p = PCat::<f64>::new(0.03).unwrap();
        let s = sample_lambda(&p, 1_000_000, 1).unwrap();
        assert!(invariance_defect(&p, &s, 10, 2000) <= s.hausdorff_tol);
        let sol = Solenoid::<f64>::new(0.5, 0.1).unwrap();
        let s = sample_lambda(&sol, 200_000, 1).unwrap();
        assert!(invariance_defect(&sol, &s, 10, 2000) <= s.hausdorff_tol);
        let q = Prod4::<f64>::new(0.02);
        let s = sample_lambda(&q, 20_000, 1).unwrap();
        assert!(invariance_defect(&q, &s, 10, 500) <= s.hausdorff_tol);
    }

    #[test]
    fn neighbor_queries_match_brute_force() {
        let s = sample_lambda::<f64, _>(&Cat, 2500, 4).unwrap();
        let g = s.grid(Topology::Torus2);
        let q = [0.99, 0.01];
        let hits = g.within(&q, 0.05);
        // both sides agree away from the boundary of the ball
        let near = |i: usize| (Cat.distance(&q, &s.points[i]) - 0.05).abs() < 1e-12;
        let brute: Vec<usize> =
            (0..s.len()).filter(|&i| Cat.distance(&q, &s.points[i]) <= 0.05).collect();
        let a: Vec<usize> = hits.iter().copied().filter(|&i| !near(i)).collect();
        let b: Vec<usize> = brute.iter().copied().filter(|&i| !near(i)).collect();
        assert_eq!(a, b);
        let (i, d) = g.nearest(&q).unwrap();
        let bd = s.points.iter().map(|p| Cat.distance(&q, p)).fold(f64::INFINITY, f64::min);
        assert!((d - bd).abs() < 1e-15);
        assert!((Cat.distance(&q, &s.points[i]) - bd).abs() < 1e-15);
    }
}
