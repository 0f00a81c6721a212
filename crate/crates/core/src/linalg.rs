//! Small dense helpers on top of nalgebra plus a banded LU used by the time stepper.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Frobenius-norm relative asymmetry `|M - M^T| / max(|M|, tiny)`.
pub fn asymmetry(m: &Mat) -> f64 {
    let d = (m - m.transpose()).norm();
    let s = m.norm();
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

pub fn is_symmetric(m: &Mat, rel_tol: f64) -> bool {
    m.is_square() && asymmetry(m) <= rel_tol
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let s = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m)[0]
}

pub fn max_eig(m: &Mat) -> f64 {
    *sym_eigenvalues(m).last().unwrap()
}

/// Numerical rank from singular values, relative threshold `tol * max(sv) * max(dim)`.
pub fn rank(m: &Mat) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let thr = smax * f64::EPSILON * (m.nrows().max(m.ncols()) as f64) * 10.0;
    sv.iter().filter(|&&s| s > thr).count()
}

/// `S^{-1/2}` for symmetric positive definite `S`.
pub fn inv_sqrt_spd(s: &Mat) -> Result<Mat> {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Precondition("matrix is not positive definite".into()));
    }
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Stack two blocks vertically.
pub fn vstack(top: &Mat, bottom: &Mat) -> Mat {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = Mat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Column-major band storage with `kl` extra rows on top so the same buffer can
/// hold the LU factors (fill-in from row pivoting widens the upper band to `kl + ku`).
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ldab, ab: vec![0.0; ldab * n] }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i <= j + self.kl && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    /// `self + s * other` (same band structure).
    pub fn axpy(&self, s: f64, other: &BandMatrix) -> BandMatrix {
        assert_eq!((self.n, self.kl, self.ku), (other.n, other.kl, other.ku));
        let mut out = self.clone();
        for (o, v) in out.ab.iter_mut().zip(&other.ab) {
            *o += s * v;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        let kv = self.kl + self.ku;
        for (j, &xj) in x.iter().enumerate().take(self.n) {
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let start = j * self.ldab + kv + lo - j;
            let col = &self.ab[start..=start + hi - lo];
            for (yi, a) in y[lo..=hi].iter_mut().zip(col) {
                *yi += a * xj;
            }
        }
    }

    pub fn to_dense(&self) -> Mat {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// LU factorisation with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        let mut max_pivot = 0.0f64;
        let mut min_pivot = f64::INFINITY;
        // Entry (i, j) of the working matrix, valid for j - kv <= i <= j + kl.
        let at = |ab: &Vec<f64>, ldab: usize, i: usize, j: usize| ab[j * ldab + (kv + i - j)];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = 0.0;
            for r in 0..=km {
                let v = at(&self.ab, self.ldab, j + r, j).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[j] = j + p;
            if best == 0.0 {
                return Err(Error::Numerical(format!(
                    "band LU: zero pivot in column {j} of {n}"
                )));
            }
            max_pivot = max_pivot.max(best);
            min_pivot = min_pivot.min(best);
            ju = ju.max((j + self.ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let a = self.idx_lu(j, c);
                    let b = self.idx_lu(j + p, c);
                    self.ab.swap(a, b);
                }
            }
            let d = at(&self.ab, self.ldab, j, j);
            for i in j + 1..=j + km {
                let k = self.idx_lu(i, j);
                self.ab[k] /= d;
            }
            for c in j + 1..=ju {
                let t = at(&self.ab, self.ldab, j, c);
                if t != 0.0 {
                    for i in j + 1..=j + km {
                        let l = at(&self.ab, self.ldab, i, j);
                        let k = self.idx_lu(i, c);
                        self.ab[k] -= l * t;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv, pivot_ratio: min_pivot / max_pivot })
    }

    #[inline]
    fn idx_lu(&self, i: usize, j: usize) -> usize {
        j * self.ldab + (self.kl + self.ku + i - j)
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
    /// Smallest over largest pivot magnitude; a cheap conditioning diagnostic.
    pub pivot_ratio: f64,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        let kv = m.kl + m.ku;
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let km = m.kl.min(n - 1 - j);
                let start = m.idx_lu(j + 1, j);
                let col = &m.ab[start..start + km];
                for (bi, l) in b[j + 1..=j + km].iter_mut().zip(col) {
                    *bi -= l * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= m.ab[m.idx_lu(j, j)];
            let bj = b[j];
            if bj != 0.0 {
                let lo = j.saturating_sub(kv);
                let start = m.idx_lu(lo, j);
                let col = &m.ab[start..start + (j - lo)];
                for (bi, u) in b[lo..j].iter_mut().zip(col) {
                    *bi -= u * bj;
                }
            }
        }
    }
}
