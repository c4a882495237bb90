//! Dense complex linear algebra: row-major matrices, LU with partial
//! pivoting, Householder least squares, and randomized condition
//! estimation. Matrix sizes in this solver stay below a few thousand,
//! so straightforward cache-aware loops are sufficient.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    nrows: usize,
    ncols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CMat { nrows, ncols, data: vec![C64::new(0.0, 0.0); nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = C64::new(1.0, 0.0);
        }
        a
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut a = CMat::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                a[(i, j)] = f(i, j);
            }
        }
        a
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        let n = self.ncols;
        let (lo, hi) = (i.min(j), i.max(j));
        let (a, b) = self.data.split_at_mut(hi * n);
        a[lo * n..lo * n + n].swap_with_slice(&mut b[..n]);
    }

    pub fn scale(&mut self, s: C64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// self += s * other
    pub fn add_scaled(&mut self, s: C64, other: &CMat) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * *b;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        for i in 0..self.nrows {
            let row = self.row(i);
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x.iter()) {
                acc += *a * *b;
            }
            y[i] = acc;
        }
        y
    }

    /// y = A^H x (conjugate transpose apply).
    pub fn matvec_adjoint(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for i in 0..self.nrows {
            let row = self.row(i);
            let xi = x[i];
            for (j, a) in row.iter().enumerate() {
                y[j] += a.conj() * xi;
            }
        }
        y
    }

    /// Matrix product self * other, ikj loop order over row slices.
    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.ncols, other.nrows);
        let mut out = CMat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            let arow = self.row(i);
            // Split borrows: write into a temporary row accumulator.
            let orow = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
            for (kk, &aik) in arow.iter().enumerate() {
                if aik.norm_sqr() == 0.0 {
                    continue;
                }
                let brow = other.row(kk);
                for (o, &b) in orow.iter_mut().zip(brow.iter()) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Copies a block of `other` into self at offset (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, other: &CMat) {
        assert!(r0 + other.nrows <= self.nrows && c0 + other.ncols <= self.ncols);
        for i in 0..other.nrows {
            let dst = &mut self.data[(r0 + i) * self.ncols + c0..(r0 + i) * self.ncols + c0 + other.ncols];
            dst.copy_from_slice(other.row(i));
        }
    }

    /// self += s * other placed at offset (r0, c0).
    pub fn add_block_scaled(&mut self, r0: usize, c0: usize, s: C64, other: &CMat) {
        assert!(r0 + other.nrows <= self.nrows && c0 + other.ncols <= self.ncols);
        for i in 0..other.nrows {
            let dst = &mut self.data[(r0 + i) * self.ncols + c0..(r0 + i) * self.ncols + c0 + other.ncols];
            for (d, &v) in dst.iter_mut().zip(other.row(i)) {
                *d += s * v;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.ncols + j]
    }
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// LU factorization with partial pivoting, A = P L U.
pub struct LuFactor {
    lu: CMat,
    piv: Vec<usize>,
}

impl LuFactor {
    pub fn factor(a: &CMat) -> Result<Self> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let mut lu = a.clone();
        let mut piv = Vec::with_capacity(n);
        for kcol in 0..n {
            // Pivot search in column kcol.
            let mut pmax = 0.0;
            let mut prow = kcol;
            for i in kcol..n {
                let v = lu[(i, kcol)].norm_sqr();
                if v > pmax {
                    pmax = v;
                    prow = i;
                }
            }
            if pmax == 0.0 {
                return Err(Error::SingularMatrix { pivot: kcol });
            }
            piv.push(prow);
            lu.swap_rows(kcol, prow);
            let pivval = lu[(kcol, kcol)];
            let inv = C64::new(1.0, 0.0) / pivval;
            for i in kcol + 1..n {
                let l = lu[(i, kcol)] * inv;
                lu[(i, kcol)] = l;
                if l.norm_sqr() == 0.0 {
                    continue;
                }
                let (top, bottom) = lu.data.split_at_mut(i * n);
                let urow = &top[kcol * n + kcol + 1..kcol * n + n];
                let irow = &mut bottom[kcol + 1..n];
                for (x, &u) in irow.iter_mut().zip(urow.iter()) {
                    *x -= l * u;
                }
            }
        }
        Ok(LuFactor { lu, piv })
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.lu.nrows;
        assert_eq!(b.len(), n);
        for (k, &p) in self.piv.iter().enumerate() {
            b.swap(k, p);
        }
        // Forward substitution, L has unit diagonal.
        for i in 1..n {
            let row = self.lu.row(i);
            let mut acc = b[i];
            for j in 0..i {
                acc -= row[j] * b[j];
            }
            b[i] = acc;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= row[j] * b[j];
            }
            b[i] = acc / row[i];
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves A^H y = b using the factorization of A.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.nrows;
        let mut y = b.to_vec();
        // A^H = (P L U)^H = U^H L^H P^T; solve U^H w = b (forward), then
        // L^H v = w (backward), then undo pivoting.
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.lu[(j, i)].conj() * y[j];
            }
            y[i] = acc / self.lu[(i, i)].conj();
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= self.lu[(j, i)].conj() * y[j];
            }
            y[i] = acc;
        }
        for (k, &p) in self.piv.iter().enumerate().rev() {
            y.swap(k, p);
        }
        y
    }

    /// One step of iterative refinement for A x = b.
    pub fn refine(&self, a: &CMat, b: &[C64], x: &mut [C64]) -> f64 {
        let ax = a.matvec(x);
        let r = vec_sub(b, &ax);
        let rnorm = vec_norm(&r);
        let dx = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        rnorm
    }
}

/// Largest singular value estimate by power iteration on A^H A.
pub fn sigma_max_est(a: &CMat, iters: usize, seed: u64) -> f64 {
    let n = a.ncols();
    let mut x = pseudo_random_vec(n, seed);
    let mut smax = 0.0;
    for _ in 0..iters {
        let xn = vec_norm(&x);
        if xn == 0.0 {
            return 0.0;
        }
        for v in &mut x {
            *v /= xn;
        }
        let y = a.matvec(&x);
        smax = vec_norm(&y);
        x = a.matvec_adjoint(&y);
    }
    smax
}

/// Smallest singular value estimate by power iteration on (A^H A)^{-1}.
pub fn sigma_min_est(lu: &LuFactor, n: usize, iters: usize, seed: u64) -> f64 {
    let mut x = pseudo_random_vec(n, seed);
    let mut gain = 0.0;
    for _ in 0..iters {
        let xn = vec_norm(&x);
        for v in &mut x {
            *v /= xn;
        }
        let y = lu.solve(&x);
        let z = lu.solve_adjoint(&y);
        gain = vec_norm(&z).sqrt();
        x = z;
    }
    if gain == 0.0 {
        0.0
    } else {
        1.0 / gain
    }
}

fn pseudo_random_vec(n: usize, seed: u64) -> Vec<C64> {
    // Small deterministic generator; quality is irrelevant for power iteration.
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..n).map(|_| C64::new(next(), next())).collect()
}

/// Householder QR least-squares solve for overdetermined complex systems.
/// Returns x minimizing ||A x - b||_2. A is consumed as a working copy.
pub fn lstsq(a: &CMat, b: &[C64]) -> Result<Vec<C64>> {
    let (m, n) = (a.nrows, a.ncols);
    assert!(m >= n);
    assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut y = b.to_vec();
    for kcol in 0..n {
        // Householder vector for column kcol.
        let mut alpha = 0.0;
        for i in kcol..m {
            alpha += r[(i, kcol)].norm_sqr();
        }
        let alpha = alpha.sqrt();
        if alpha == 0.0 {
            return Err(Error::SingularMatrix { pivot: kcol });
        }
        let akk = r[(kcol, kcol)];
        let phase = if akk.norm() > 0.0 { akk / akk.norm() } else { C64::new(1.0, 0.0) };
        let vk = akk + phase * alpha;
        let mut v = vec![C64::new(0.0, 0.0); m - kcol];
        v[0] = vk;
        for i in kcol + 1..m {
            v[i - kcol] = r[(i, kcol)];
        }
        let vnorm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // Apply H = I - 2 v v^H / |v|^2 to R and y.
        for col in kcol..n {
            let mut dot = C64::new(0.0, 0.0);
            for i in kcol..m {
                dot += v[i - kcol].conj() * r[(i, col)];
            }
            let f = dot * 2.0 / vnorm2;
            for i in kcol..m {
                let d = f * v[i - kcol];
                r[(i, col)] -= d;
            }
        }
        let mut dot = C64::new(0.0, 0.0);
        for i in kcol..m {
            dot += v[i - kcol].conj() * y[i];
        }
        let f = dot * 2.0 / vnorm2;
        for i in kcol..m {
            y[i] -= f * v[i - kcol];
        }
    }
    // Back substitution on the n x n upper triangle.
    let mut x = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn lu_solves_random_system() {
        let n = 40;
        let a = CMat::from_fn(n, n, |i, j| {
            let x = ((i * 31 + j * 17) % 101) as f64 / 101.0 - 0.5;
            let y = ((i * 13 + j * 41) % 97) as f64 / 97.0 - 0.5;
            c(x + if i == j { 3.0 } else { 0.0 }, y)
        });
        let xtrue: Vec<C64> = (0..n).map(|i| c(i as f64 * 0.1, -(i as f64) * 0.05)).collect();
        let b = a.matvec(&xtrue);
        let lu = LuFactor::factor(&a).unwrap();
        let x = lu.solve(&b);
        let err: f64 = x.iter().zip(&xtrue).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "err = {err}");
    }

    #[test]
    fn adjoint_solve_consistent() {
        let n = 25;
        let a = CMat::from_fn(n, n, |i, j| {
            c(((i + 2 * j) % 7) as f64 - 3.0 + if i == j { 8.0 } else { 0.0 }, ((i * j) % 5) as f64 - 2.0)
        });
        let lu = LuFactor::factor(&a).unwrap();
        let b: Vec<C64> = (0..n).map(|i| c(1.0 / (i + 1) as f64, 0.3)).collect();
        let y = lu.solve_adjoint(&b);
        let ahy = a.matvec_adjoint(&y);
        let err: f64 = ahy.iter().zip(&b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-11, "err = {err}");
    }

    #[test]
    fn singular_matrix_detected() {
        let mut a = CMat::zeros(3, 3);
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(1.0, 0.0);
        // Row 2 left zero.
        assert!(LuFactor::factor(&a).is_err());
    }

    #[test]
    fn condition_estimates_bracket_diagonal_matrix() {
        let n = 30;
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = c(1.0 + i as f64, 0.0);
        }
        let smax = sigma_max_est(&a, 60, 7);
        let lu = LuFactor::factor(&a).unwrap();
        let smin = sigma_min_est(&lu, n, 30, 11);
        // Power iteration is an estimator; a few percent suffices for
        // conditioning diagnostics.
        assert!((smax - n as f64).abs() / (n as f64) < 0.05, "smax = {smax}");
        assert!((smin - 1.0).abs() < 1e-6, "smin = {smin}");
    }

    #[test]
    fn lstsq_recovers_polynomial_fit() {
        // Overdetermined Vandermonde fit of data that is exactly cubic.
        let xs: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let coef = [c(0.3, 0.1), c(-1.0, 0.2), c(2.0, -0.4), c(0.7, 0.0)];
        let a = CMat::from_fn(12, 4, |i, j| c(xs[i].powi(j as i32), 0.0));
        let b: Vec<C64> = xs
            .iter()
            .map(|&x| coef.iter().enumerate().map(|(j, &cj)| cj * x.powi(j as i32)).sum())
            .collect();
        let sol = lstsq(&a, &b).unwrap();
        for (s, t) in sol.iter().zip(coef.iter()) {
            assert!((s - t).norm() < 1e-11);
        }
    }

    #[test]
    fn matmul_identity() {
        let a = CMat::from_fn(7, 5, |i, j| c(i as f64 - j as f64, (i * j) as f64 * 0.1));
        let id = CMat::identity(5);
        let prod = a.matmul(&id);
        assert_eq!(prod, a);
    }
}
