//! Small dense linear algebra: matrices, orthonormal frames, principal
//! angles, parallelepiped volumes and Jacobian cocycles.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use crate::error::{LabError, Result};
use crate::scalar::Real;
use crate::systems::DynamicalSystem;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    let scale = a.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s = a.iter().fold(T::zero(), |s, &x| {
        let y = x / scale;
        s + y * y
    });
    scale * s.sqrt()
}

pub fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<T: Real>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

/// `y += s * x`
pub fn axpy<T: Real>(s: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + s * xi;
    }
}

pub fn to_f64<T: Real>(a: &[T]) -> Vec<f64> {
    a.iter().map(|x| x.to64()).collect()
}

pub fn from_f64<T: Real>(a: &[f64]) -> Vec<T> {
    a.iter().map(|&x| T::of(x)).collect()
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[T]> = self.data.chunks(self.cols.max(1)).collect();
        write!(f, "{rows:?}")
    }
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        assert!(rows.iter().all(|v| v.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.concat() }
    }

    pub fn from_f64_rows(rows: &[&[f64]]) -> Self {
        let rows: Vec<Vec<T>> = rows.iter().map(|r| from_f64(r)).collect();
        Self::from_rows(&rows)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<T>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, |v| v.len());
        let mut m = Self::zeros(r, c);
        for (j, v) in cols.iter().enumerate() {
            assert_eq!(v.len(), r, "ragged columns");
            for (i, &x) in v.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[T]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, b: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, b.rows, "matmul shape mismatch");
        let mut c = Self::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..b.cols {
                    c[(i, j)] = c[(i, j)] + a * b[(k, j)];
                }
            }
        }
        c
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows).map(|i| dot(&self.data[i * self.cols..(i + 1) * self.cols], v)).collect()
    }

    /// `selfᵀ v`
    pub fn tmul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "tmul_vec shape mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o = *o + self[(i, j)] * vi;
            }
        }
        out
    }

    pub fn scaled(&self, s: T) -> Mat<T> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn plus(&self, b: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (b.rows, b.cols));
        Mat { rows: self.rows, cols: self.cols, data: add(&self.data, &b.data) }
    }

    pub fn minus(&self, b: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (b.rows, b.cols));
        Mat { rows: self.rows, cols: self.cols, data: sub(&self.data, &b.data) }
    }

    pub fn frobenius(&self) -> T {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Singular values in decreasing order (one-sided Jacobi).
    pub fn singular_values(&self) -> Vec<T> {
        let a = if self.rows >= self.cols { self.clone() } else { self.transpose() };
        let n = a.cols;
        let mut cols = a.columns();
        let eps = T::epsilon();
        for _sweep in 0..60 {
            let mut rotated = false;
            for i in 0..n {
                for j in i + 1..n {
                    let alpha = dot(&cols[i], &cols[i]);
                    let beta = dot(&cols[j], &cols[j]);
                    let gamma = dot(&cols[i], &cols[j]);
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (gamma + gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    let (ci, cj) = (cols[i].clone(), cols[j].clone());
                    for k in 0..ci.len() {
                        cols[i][k] = c * ci[k] - s * cj[k];
                        cols[j][k] = s * ci[k] + c * cj[k];
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut s: Vec<T> = cols.iter().map(|c| norm(c)).collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        s
    }

    /// Operator 2-norm.
    pub fn norm2(&self) -> T {
        if self.rows == 0 || self.cols == 0 {
            return T::zero();
        }
        self.singular_values()[0]
    }

    /// Smallest singular value (conorm for square matrices).
    pub fn sigma_min(&self) -> T {
        self.singular_values().last().copied().unwrap_or(T::zero())
    }

    /// LU with partial pivoting; `None` if singular.
    fn lu(&self) -> Option<(Mat<T>, Vec<usize>, bool)> {
        assert!(self.is_square(), "lu of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut odd = false;
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, T::zero()), |best, c| if c.1 > best.1 { c } else { best });
            if pv == T::zero() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = tmp;
                }
                perm.swap(k, p);
                odd = !odd;
            }
            for i in k + 1..n {
                let l = a[(i, k)] / a[(k, k)];
                a[(i, k)] = l;
                for j in k + 1..n {
                    a[(i, j)] = a[(i, j)] - l * a[(k, j)];
                }
            }
        }
        Some((a, perm, odd))
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let (lu, perm, _) =
            self.lu().ok_or_else(|| LabError::Domain("singular matrix in solve".into()))?;
        let n = self.rows;
        let mut y: Vec<T> = perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - lu[(i, k)] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] = y[i] - lu[(i, k)] * y[k];
            }
            y[i] = y[i] / lu[(i, i)];
        }
        Ok(y)
    }

    pub fn inverse(&self) -> Result<Mat<T>> {
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            inv.set_col(j, &self.solve(&e)?);
        }
        Ok(inv)
    }

    pub fn det(&self) -> T {
        match self.lu() {
            None => T::zero(),
            Some((lu, _, odd)) => {
                let d = (0..self.rows).fold(T::one(), |d, i| d * lu[(i, i)]);
                if odd {
                    -d
                } else {
                    d
                }
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| U::of(x.to64())).collect() }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, b: &Mat<T>) -> Mat<T> {
        self.matmul(b)
    }
}

/// Orthonormalization tolerance relative to the input vector norm.
pub const MGS_TOL: f64 = 1e-12;

/// Two-pass modified Gram–Schmidt. Returns the orthonormal vectors and the
/// upper-triangular factor, or a domain error on numerical rank deficiency.
pub fn mgs<T: Real>(vectors: &[Vec<T>]) -> Result<(Vec<Vec<T>>, Mat<T>)> {
    let k = vectors.len();
    let mut q: Vec<Vec<T>> = Vec::with_capacity(k);
    let mut r = Mat::zeros(k, k);
    for (j, v) in vectors.iter().enumerate() {
        let n0 = norm(v);
        let mut w = v.clone();
        for _pass in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &w);
                r[(i, j)] = r[(i, j)] + c;
                axpy(-c, qi, &mut w);
            }
        }
        let nw = norm(&w);
        if n0 == T::zero() || nw <= T::of(MGS_TOL) * n0 {
            return Err(LabError::Domain(format!("vector {j} is numerically dependent")));
        }
        r[(j, j)] = nw;
        q.push(scale(&w, T::one() / nw));
    }
    Ok((q, r))
}

/// Subspace of R^n held by an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<T> {
    ambient_dim: usize,
    basis: Vec<Vec<T>>,
}

impl<T: Real> Subspace<T> {
    /// Span of the given vectors (orthonormalized).
    pub fn span(vectors: &[Vec<T>]) -> Result<Self> {
        let n = vectors.first().map(|v| v.len()).ok_or_else(|| LabError::Domain("empty span".into()))?;
        if vectors.iter().any(|v| v.len() != n) {
            return Err(LabError::Dimension("vectors of different lengths".into()));
        }
        if vectors.len() > n {
            return Err(LabError::Dimension(format!("{} vectors in R^{n}", vectors.len())));
        }
        let (q, _) = mgs(vectors)?;
        Ok(Subspace { ambient_dim: n, basis: q })
    }

    pub fn coordinate(n: usize, axes: &[usize]) -> Self {
        let basis = axes
            .iter()
            .map(|&a| {
                let mut e = vec![T::zero(); n];
                e[a] = T::one();
                e
            })
            .collect();
        Subspace { ambient_dim: n, basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    /// n × rank matrix of basis columns.
    pub fn matrix(&self) -> Mat<T> {
        Mat::from_cols(&self.basis)
    }

    /// Orthogonal projection coordinates `Bᵀ v`.
    pub fn coords(&self, v: &[T]) -> Vec<T> {
        self.basis.iter().map(|b| dot(b, v)).collect()
    }

    /// `B c`
    pub fn embed(&self, c: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.ambient_dim];
        for (b, &ci) in self.basis.iter().zip(c) {
            axpy(ci, b, &mut out);
        }
        out
    }

    /// Image under a linear map, re-orthonormalized.
    pub fn push(&self, a: &Mat<T>) -> Result<Self> {
        let imgs: Vec<Vec<T>> = self.basis.iter().map(|b| a.mul_vec(b)).collect();
        Subspace::span(&imgs)
    }

    /// Largest deviation from orthonormality of the stored basis.
    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }

    pub fn cast<U: Real>(&self) -> Subspace<U> {
        Subspace { ambient_dim: self.ambient_dim, basis: self.basis.iter().map(|b| from_f64(&to_f64(b))).collect() }
    }
}

/// Largest principal angle between two subspaces of equal rank.
///
/// Computed as `atan2(‖(I − AAᵀ)B‖₂, σ_min(AᵀB))`, which keeps full relative
/// accuracy for tiny angles where the arccos of a cosine near one does not.
pub fn subspace_angle<T: Real>(a: &Subspace<T>, b: &Subspace<T>) -> Result<T> {
    if a.ambient_dim != b.ambient_dim {
        return Err(LabError::Dimension(format!(
            "ambient dimensions {} and {}",
            a.ambient_dim, b.ambient_dim
        )));
    }
    if a.rank() != b.rank() {
        return Err(LabError::Dimension(format!("ranks {} and {}", a.rank(), b.rank())));
    }
    let am = a.matrix();
    let bm = b.matrix();
    let atb = am.transpose().matmul(&bm);
    let cos_min = atb.sigma_min().min(T::one()).max(-T::one());
    let resid = bm.minus(&am.matmul(&atb));
    let sin_max = resid.norm2().min(T::one());
    Ok(sin_max.atan2(cos_min))
}

/// m-dimensional volume of the parallelepiped spanned by the vectors.
pub fn gram_volume<T: Real>(vectors: &[Vec<T>]) -> Result<T> {
    let n = vectors.first().map(|v| v.len()).ok_or_else(|| LabError::Domain("no vectors".into()))?;
    if vectors.iter().any(|v| v.len() != n) {
        return Err(LabError::Dimension("vectors of different lengths".into()));
    }
    if vectors.len() > n {
        return Ok(T::zero());
    }
    let mut q: Vec<Vec<T>> = Vec::new();
    let mut vol = T::one();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for qi in &q {
                let c = dot(qi, &w);
                axpy(-c, qi, &mut w);
            }
        }
        let nw = norm(&w);
        if nw == T::zero() {
            return Ok(T::zero());
        }
        vol = vol * nw;
        q.push(scale(&w, T::one() / nw));
    }
    Ok(vol)
}

/// Ordered product of square factors, first factor applied first.
#[derive(Clone, Debug)]
pub struct CocycleProduct<T> {
    pub factors: Vec<Mat<T>>,
    pub value: Mat<T>,
    pub log_norm: T,
    pub log_conorm: T,
}

impl<T: Real> CocycleProduct<T> {
    pub fn identity(n: usize) -> Self {
        CocycleProduct { factors: vec![], value: Mat::identity(n), log_norm: T::zero(), log_conorm: T::zero() }
    }

    /// `value = factors[n-1] · … · factors[0]`.
    pub fn from_factors(factors: Vec<Mat<T>>) -> Result<Self> {
        let n = factors.first().map(|f| f.rows()).ok_or_else(|| LabError::Domain("no factors".into()))?;
        if factors.iter().any(|f| f.rows() != n || f.cols() != n) {
            return Err(LabError::Dimension("cocycle factors must be square of equal size".into()));
        }
        let mut value = Mat::identity(n);
        for f in &factors {
            value = f.matmul(&value);
        }
        // The inverse is assembled from per-factor inverses so its norm keeps
        // relative accuracy even when `value` is badly conditioned.
        let mut inv = Mat::identity(n);
        let mut singular = false;
        for f in &factors {
            match f.inverse() {
                Ok(fi) => inv = inv.matmul(&fi),
                Err(_) => singular = true,
            }
        }
        let log_norm = value.norm2().ln();
        let log_conorm = if singular { T::neg_infinity() } else { -inv.norm2().ln() };
        Ok(CocycleProduct { factors, value, log_norm, log_conorm })
    }
}

/// Jacobian cocycle of `system` along the orbit of `x`: for `n > 0` the product
/// `Df(f^{n-1}x)···Df(x)`, for `n < 0` the derivative of `f^{n}` at `x`
/// assembled from inverse Jacobians along the backward orbit.
pub fn cocycle<T: Real, S: DynamicalSystem<T> + ?Sized>(
    system: &S,
    x: &[T],
    n: i64,
) -> Result<CocycleProduct<T>> {
    let d = system.ambient_dim();
    if x.len() != d {
        return Err(LabError::Dimension(format!("point of length {} for ambient dim {d}", x.len())));
    }
    if n == 0 {
        return Ok(CocycleProduct::identity(d));
    }
    let mut factors = Vec::with_capacity(n.unsigned_abs() as usize);
    let mut p = x.to_vec();
    if n > 0 {
        for _ in 0..n {
            factors.push(system.jacobian(&p));
            p = system.step(&p);
        }
    } else {
        for _ in 0..(-n) {
            p = system.inverse_step_shadow(&p)?;
            factors.push(system.jacobian(&p).inverse()?);
        }
    }
    CocycleProduct::from_factors(factors)
}

/// Ordinary least squares fit `y ≈ a + b t`; returns `(a, b)`.
pub fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|v| (v - mt) * (v - mt)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mt, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dd;
    use num_traits::Float;
    use proptest::prelude::*;

    fn line(v: &[f64]) -> Subspace<f64> {
        Subspace::span(&[v.to_vec()]).unwrap()
    }

    #[test]
    fn angle_examples() {
        let e1 = line(&[1.0, 0.0]);
        let e2 = line(&[0.0, 1.0]);
        let d = line(&[1.0, 1.0]);
        assert_eq!(subspace_angle(&e1, &e1).unwrap(), 0.0);
        assert!((subspace_angle(&e1, &e2).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((subspace_angle(&e1, &d).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn angle_rank_mismatch() {
        let a = Subspace::<f64>::coordinate(3, &[0]);
        let b = Subspace::<f64>::coordinate(3, &[0, 1]);
        assert!(matches!(subspace_angle(&a, &b), Err(LabError::Dimension(_))));
    }

    #[test]
    fn tiny_angles_keep_relative_accuracy() {
        let a = line(&[1.0, 0.0]);
        let b = line(&[1.0, 1e-13]);
        let th = subspace_angle(&a, &b).unwrap();
        assert!((th - 1e-13).abs() < 1e-26);
    }

    #[test]
    fn volume_examples() {
        let v = |a: &[f64]| a.to_vec();
        assert_eq!(gram_volume(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap(), 1.0);
        assert_eq!(gram_volume(&[v(&[1.0, 0.0]), v(&[1.0, 0.0])]).unwrap(), 0.0);
        assert_eq!(gram_volume(&[v(&[2.0, 0.0]), v(&[0.0, 3.0])]).unwrap(), 6.0);
        assert!(matches!(gram_volume::<f64>(&[]), Err(LabError::Domain(_))));
    }

    #[test]
    fn singular_values_of_known_matrix() {
        let a = Mat::<f64>::from_f64_rows(&[&[3.0, 0.0], &[4.0, 5.0]]);
        let s = a.singular_values();
        // eigenvalues of AᵀA = [[25,20],[20,25]] are 45 and 5
        assert!((s[0] - 45f64.sqrt()).abs() < 1e-14);
        assert!((s[1] - 5f64.sqrt()).abs() < 1e-14);
        assert!((a.det() - 15.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_and_solve() {
        let a = Mat::<f64>::from_f64_rows(&[&[2.0, 1.0], &[1.0, 1.0]]);
        let ai = a.inverse().unwrap();
        assert_eq!(ai, Mat::from_f64_rows(&[&[1.0, -1.0], &[-1.0, 2.0]]));
        let s = Mat::<f64>::from_f64_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(s.inverse().is_err());
    }

    #[test]
    fn cocycle_product_conorm_below_norm() {
        let a = Mat::<Dd>::from_f64_rows(&[&[2.0, 1.0], &[1.0, 1.0]]);
        let c = CocycleProduct::from_factors(vec![a.clone(), a.clone(), a]).unwrap();
        let lam = (Dd::of(3.0) + Dd::of(5.0).sqrt()) / Dd::of(2.0);
        assert!(((c.log_norm - Dd::of(3.0) * lam.ln()).abs()).hi() < 1e-28);
        assert!(((c.log_conorm + Dd::of(3.0) * lam.ln()).abs()).hi() < 1e-28);
        assert!(c.log_conorm <= c.log_norm);
    }

    #[test]
    fn mgs_rejects_dependent() {
        assert!(mgs(&[vec![1.0, 2.0], vec![2.0, 4.0]]).is_err());
        let (q, r) = mgs(&[vec![3.0, 4.0], vec![1.0, 0.0]]).unwrap();
        assert!((r[(0, 0)] - 5.0).abs() < 1e-15);
        assert!(dot(&q[0], &q[1]).abs() < 1e-15);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 3)
    }

    proptest! {
        #[test]
        fn volume_permutation_invariant(a in vec3(), b in vec3(), c in vec3()) {
            let v1 = gram_volume(&[a.clone(), b.clone(), c.clone()]).unwrap();
            let v2 = gram_volume(&[c.clone(), a.clone(), b.clone()]).unwrap();
            let v3 = gram_volume(&[b, a, c]).unwrap();
            let s = 1e-9 * (1.0 + v1);
            prop_assert!((v1 - v2).abs() <= s && (v1 - v3).abs() <= s);
        }

        #[test]
        fn volume_scales_linearly_along_orthogonal_direction(a in vec3(), s in 0.01f64..100.0) {
            // make b orthogonal to a
            let e = vec![0.3, -0.2, 0.9];
            let mut b = e.clone();
            let na = dot(&a, &a);
            prop_assume!(na > 1e-6);
            axpy(-dot(&a, &e) / na, &a, &mut b);
            prop_assume!(norm(&b) > 1e-6);
            let v1 = gram_volume(&[a.clone(), b.clone()]).unwrap();
            let v2 = gram_volume(&[a.clone(), scale(&b, s)]).unwrap();
            prop_assert!((v2 - s * v1).abs() <= 1e-9 * (1.0 + s * v1));
            prop_assert!((v1 - norm(&a) * norm(&b)).abs() <= 1e-9 * (1.0 + v1));
        }

        #[test]
        fn angle_symmetric_and_bounded(a in vec3(), b in vec3(), c in vec3(), d in vec3()) {
            let p = Subspace::span(&[a, b]);
            let q = Subspace::span(&[c, d]);
            if let (Ok(p), Ok(q)) = (p, q) {
                let t1 = subspace_angle(&p, &q).unwrap();
                let t2 = subspace_angle(&q, &p).unwrap();
                prop_assert!((t1 - t2).abs() < 1e-9);
                prop_assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&t1));
                prop_assert!(p.orthonormality_defect() < 1e-12);
            }
        }
    }
}
