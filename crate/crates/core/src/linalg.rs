//! Tridiagonal linear algebra: a pivoted complex LU solver and implicit-shift
//! QL eigensolvers for real symmetric and complex symmetric matrices.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Complex tridiagonal matrix stored by diagonals.
///
/// Row `i` reads `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<Complex64>, diag: Vec<Complex64>, upper: Vec<Complex64>) -> Self {
        assert_eq!(lower.len() + 1, diag.len());
        assert_eq!(upper.len() + 1, diag.len());
        Self { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].norm();
                if i > 0 {
                    s += self.lower[i - 1].norm();
                }
                if i + 1 < n {
                    s += self.upper[i].norm();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Factorize with partial pivoting.
    pub fn factor(&self) -> Result<TridiagonalLu> {
        TridiagonalLu::new(self)
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self.factor()?.solve(b))
    }
}

/// LU factorization of a tridiagonal matrix with row interchanges, in the
/// layout of LAPACK's `gttrf`: `u0` is the pivot diagonal, `u1` and `u2` the
/// first and second superdiagonals of `U`, `mult` the multipliers and `swap`
/// the interchange flags.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    u0: Vec<Complex64>,
    u1: Vec<Complex64>,
    u2: Vec<Complex64>,
    mult: Vec<Complex64>,
    swap: Vec<bool>,
}

impl TridiagonalLu {
    fn new(a: &Tridiagonal) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::Size("empty tridiagonal system".into()));
        }
        let mut d = a.diag.clone();
        let mut du = a.upper.clone();
        let dl = a.lower.clone();
        let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut mult = vec![Complex64::new(0.0, 0.0); n - 1];
        let mut swap = vec![false; n - 1];
        for k in 0..n.saturating_sub(1) {
            if d[k].norm() >= dl[k].norm() {
                if d[k].norm() == 0.0 {
                    return Err(Error::Singular(k));
                }
                let m = dl[k] / d[k];
                mult[k] = m;
                d[k + 1] -= m * du[k];
            } else {
                let m = d[k] / dl[k];
                mult[k] = m;
                swap[k] = true;
                d[k] = dl[k];
                let temp = d[k + 1];
                d[k + 1] = du[k] - m * temp;
                if k + 2 < n {
                    du2[k] = du[k + 1];
                    du[k + 1] = -m * du2[k];
                }
                du[k] = temp;
            }
        }
        if d[n - 1].norm() == 0.0 {
            return Err(Error::Singular(n - 1));
        }
        Ok(Self {
            u0: d,
            u1: du,
            u2: du2,
            mult,
            swap,
        })
    }

    pub fn len(&self) -> usize {
        self.u0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u0.is_empty()
    }

    /// Solve `A x = b` with the stored factors.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n - 1 {
            if self.swap[k] {
                x.swap(k, k + 1);
            }
            let xk = x[k];
            x[k + 1] -= self.mult[k] * xk;
        }
        x[n - 1] /= self.u0[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.u1[n - 2] * x[n - 1]) / self.u0[n - 2];
        }
        for k in (0..n.saturating_sub(2)).rev() {
            x[k] = (x[k] - self.u1[k] * x[k + 1] - self.u2[k] * x[k + 2]) / self.u0[k];
        }
        x
    }

    /// Reciprocal pivot growth `max|A| / max|U|`-style indicator: the ratio of
    /// the largest to the smallest pivot magnitude.
    pub fn pivot_spread(&self) -> f64 {
        let max = self.u0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let min = self.u0.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Eigen-decomposition of a real symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Eigenvectors, vector `k` stored contiguously at `[k n, (k + 1) n)`.
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

const MAX_QL_SWEEPS: usize = 60;

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix with
/// diagonal `diag` and off-diagonal `off` (`off[i]` couples `i` and `i+1`).
/// Eigenvectors are accumulated when `vectors` is true.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64], vectors: bool) -> Result<SymmetricEigen> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::Size("empty matrix".into()));
    }
    assert_eq!(off.len() + 1, n);
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = if vectors {
        let mut z = vec![0.0; n * n];
        for k in 0..n {
            z[k * n + k] = 1.0;
        }
        z
    } else {
        Vec::new()
    };
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(Error::Internal(format!("QL iteration did not converge for eigenvalue {l}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if vectors {
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zj = &mut hi[..n];
                    for k in 0..n {
                        let fz = zj[k];
                        zj[k] = s * zi[k] + c * fz;
                        zi[k] = c * zi[k] - s * fz;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors_sorted = if vectors {
        let mut out = Vec::with_capacity(n * n);
        for &k in &order {
            out.extend_from_slice(&z[k * n..(k + 1) * n]);
        }
        out
    } else {
        Vec::new()
    };
    Ok(SymmetricEigen {
        values,
        vectors: vectors_sorted,
        n,
    })
}

/// Eigen-decomposition of a complex symmetric (not Hermitian) tridiagonal
/// matrix. Eigenvectors are normalized in the bilinear sense `vᵀv = 1`.
#[derive(Debug, Clone)]
pub struct ComplexSymmetricEigen {
    /// Eigenvalues sorted by real part.
    pub values: Vec<Complex64>,
    pub vectors: Vec<Complex64>,
    pub n: usize,
}

impl ComplexSymmetricEigen {
    pub fn vector(&self, k: usize) -> &[Complex64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

/// Complex-orthogonal implicit QL iteration for a complex symmetric
/// tridiagonal matrix.
pub fn complex_symmetric_tridiagonal_eigen(diag: &[Complex64], off: &[Complex64]) -> Result<ComplexSymmetricEigen> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::Size("empty matrix".into()));
    }
    assert_eq!(off.len() + 1, n);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(zero);
    let mut z = vec![zero; n * n];
    for k in 0..n {
        z[k * n + k] = one;
    }
    let csqrt_sum = |a: Complex64, b: Complex64| (a * a + b * b).sqrt();
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].norm() + d[m + 1].norm();
                if e[m].norm() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > 4 * MAX_QL_SWEEPS {
                return Err(Error::Internal(format!(
                    "complex QL iteration did not converge for eigenvalue {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (e[l] * 2.0);
            let mut r = csqrt_sum(g, one);
            let denom = if (g + r).norm() >= (g - r).norm() { g + r } else { g - r };
            // Exceptional shift after many sweeps breaks rare cycles.
            let shift_scale = if sweeps % 20 == 0 { 1.5 } else { 1.0 };
            g = d[m] - d[l] + e[l] * shift_scale / denom;
            let (mut s, mut c, mut p) = (one, one, zero);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = csqrt_sum(f, g);
                e[i + 1] = r;
                if r.norm() == 0.0 {
                    d[i + 1] -= p;
                    e[m] = zero;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + c * b * 2.0;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (lo, hi) = z.split_at_mut((i + 1) * n);
                let zi = &mut lo[i * n..];
                let zj = &mut hi[..n];
                for k in 0..n {
                    let fz = zj[k];
                    zj[k] = s * zi[k] + c * fz;
                    zi[k] = c * zi[k] - s * fz;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = zero;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].re.total_cmp(&d[b].re).then(a.cmp(&b)));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        let v = &z[k * n..(k + 1) * n];
        let norm = v.iter().map(|x| x * x).sum::<Complex64>().sqrt();
        vectors.extend(v.iter().map(|x| x / norm));
    }
    Ok(ComplexSymmetricEigen { values, vectors, n })
}
