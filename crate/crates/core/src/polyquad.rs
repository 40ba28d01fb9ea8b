//! Jacobi polynomials with `β = 0`, integrated Jacobi polynomials, and
//! collapsed-coordinate (Duffy) quadrature on the reference simplices.
//!
//! The reference triangle has vertices `(-1,0), (1,0), (0,1)` (area 1); the
//! reference tetrahedron has vertices `(-1,0,0), (1,0,0), (0,1,0), (0,0,1)`
//! (volume 1/3).
//!
//! All recurrences are written against the [`Ring`] trait so the same code
//! evaluates plain values and forward-mode derivative jets, and so the
//! homogenized ("scaled") forms `b^n p_n(a/b)` can be evaluated as
//! polynomials in `(a, b)` without ever forming the quotient.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{HdgError, Result};

const DOMAIN_SLACK: f64 = 1e-12;

/// Minimal commutative ring interface shared by `f64` and derivative jets.
pub trait Ring:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
}

impl Ring for f64 {
    fn constant(c: f64) -> Self {
        c
    }
}

/// A Jacobi family `p_n^{(α,0)}`, `0 <= n <= max_degree`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JacobiFamily {
    pub alpha: usize,
    pub max_degree: usize,
}

impl JacobiFamily {
    pub fn new(alpha: usize, max_degree: usize) -> Self {
        Self { alpha, max_degree }
    }

    /// All values `p_0(x), ..., p_max(x)`.
    pub fn eval_all(&self, x: f64) -> Result<Vec<f64>> {
        check_domain(x)?;
        Ok(scaled_jacobi_all(self.max_degree, self.alpha, x, 1.0))
    }

    /// All values `p̂_0(x), ..., p̂_max(x)`.
    pub fn eval_integrated_all(&self, x: f64) -> Result<Vec<f64>> {
        check_domain(x)?;
        let mut v = scaled_integrated_jacobi_all(self.max_degree, self.alpha, x, 1.0);
        if x == -1.0 {
            v.iter_mut().skip(1).for_each(|q| *q = 0.0);
        }
        Ok(v)
    }
}

fn check_domain(x: f64) -> Result<()> {
    if x.is_nan() || x.abs() > 1.0 + DOMAIN_SLACK {
        return Err(HdgError::Domain { x });
    }
    Ok(())
}

/// `p_n^α(x)` by the three-term recurrence.
pub fn jacobi_eval(n: usize, alpha: usize, x: f64) -> Result<f64> {
    check_domain(x)?;
    Ok(scaled_jacobi_all(n, alpha, x, 1.0)[n])
}

/// `p̂_n^α(x) = ∫_{-1}^x p_{n-1}^α`, with `p̂_0 = 1`.
pub fn integrated_jacobi_eval(n: usize, alpha: usize, x: f64) -> Result<f64> {
    if n >= 1 && x == -1.0 {
        return Ok(0.0);
    }
    check_domain(x)?;
    Ok(scaled_integrated_jacobi_all(n, alpha, x, 1.0)[n])
}

/// Homogenized Jacobi values `P_n(a, b) = b^n p_n^α(a/b)` for `n = 0..=nmax`.
///
/// Each `P_n` is a homogeneous polynomial of degree `n` in `(a, b)`, so this
/// is well defined at `b = 0`.
pub fn scaled_jacobi_all<T: Ring>(nmax: usize, alpha: usize, a: T, b: T) -> Vec<T> {
    let al = alpha as f64;
    let mut p = Vec::with_capacity(nmax + 1);
    p.push(T::constant(1.0));
    if nmax >= 1 {
        p.push((a * (al + 2.0) + b * al) * 0.5);
    }
    let b2 = b * b;
    for n in 2..=nmax {
        let nf = n as f64;
        let s = 2.0 * nf + al;
        let c0 = 2.0 * nf * (nf + al) * (s - 2.0);
        let c1 = (s - 1.0) * s * (s - 2.0);
        let c2 = (s - 1.0) * al * al;
        let c3 = 2.0 * (nf + al - 1.0) * (nf - 1.0) * s;
        let next = ((a * c1 + b * c2) * p[n - 1] - b2 * p[n - 2] * c3) * (1.0 / c0);
        p.push(next);
    }
    p
}

/// Homogenized integrated Jacobi values `P̂_n(a, b) = b^n p̂_n^α(a/b)`,
/// `n = 0..=nmax`, with `P̂_0 = 1` and `P̂_1 = a + b`.
///
/// For `n >= 2` the closed form
/// `p̂_n = A_n p_n + B_n p_{n-1} + C_n p_{n-2}` is used, with
/// `A_n = 2(n+α)/((2n+α-1)(2n+α))`, `B_n = 2α/((2n+α-2)(2n+α))`,
/// `C_n = -2(n-1)/((2n+α-1)(2n+α-2))`.
pub fn scaled_integrated_jacobi_all<T: Ring>(nmax: usize, alpha: usize, a: T, b: T) -> Vec<T> {
    let p = scaled_jacobi_all(nmax, alpha, a, b);
    let al = alpha as f64;
    let mut q = Vec::with_capacity(nmax + 1);
    q.push(T::constant(1.0));
    if nmax >= 1 {
        q.push(a + b);
    }
    let b2 = b * b;
    for n in 2..=nmax {
        let nf = n as f64;
        let s = 2.0 * nf + al;
        let an = 2.0 * (nf + al) / ((s - 1.0) * s);
        let bn = 2.0 * al / ((s - 2.0) * s);
        let cn = -2.0 * (nf - 1.0) / ((s - 1.0) * (s - 2.0));
        q.push(p[n] * an + b * p[n - 1] * bn + b2 * p[n - 2] * cn);
    }
    q
}

/// A quadrature rule on a reference cell of dimension `D`.
#[derive(Debug, Clone)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64; D]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Gauss–Jacobi nodes and weights for the weight `(1-x)^α` on `[-1, 1]`
/// (Golub–Welsch).
pub fn gauss_jacobi(npoints: usize, alpha: usize) -> (Vec<f64>, Vec<f64>) {
    if npoints == 0 {
        return (vec![], vec![]);
    }
    let al = alpha as f64;
    let be = 0.0;
    let mut jm = DMatrix::<f64>::zeros(npoints, npoints);
    for i in 0..npoints {
        let n = i as f64;
        let s = 2.0 * n + al + be;
        jm[(i, i)] = if i == 0 {
            (be - al) / (al + be + 2.0)
        } else {
            (be * be - al * al) / (s * (s + 2.0))
        };
        if i + 1 < npoints {
            let m = n + 1.0;
            let t = 2.0 * m + al + be;
            let num = 4.0 * m * (m + al) * (m + be) * (m + al + be);
            let den = t * t * (t + 1.0) * (t - 1.0);
            let off = (num / den).sqrt();
            jm[(i, i + 1)] = off;
            jm[(i + 1, i)] = off;
        }
    }
    let mu0 = 2f64.powi(alpha as i32 + 1) / (al + 1.0);
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..npoints)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss–Legendre rule on `[-1, 1]` exact for polynomials of degree `degree`.
pub fn interval_rule(degree: usize) -> QuadratureRule<1> {
    let n = degree / 2 + 1;
    let (x, w) = gauss_jacobi(n, 0);
    QuadratureRule {
        points: x.into_iter().map(|x| [x]).collect(),
        weights: w,
        exactness_degree: 2 * n - 1,
    }
}

/// Collapsed-coordinate rule on the reference triangle, exact to `degree`.
pub fn triangle_rule(degree: usize) -> QuadratureRule<2> {
    let n = degree / 2 + 1;
    let (xs, wx) = gauss_jacobi(n, 0);
    let (ts, wt) = gauss_jacobi(n, 1);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (x, wxi) in xs.iter().zip(&wx) {
        for (t, wti) in ts.iter().zip(&wt) {
            let y = 0.5 * (1.0 + t);
            points.push([x * (1.0 - y), y]);
            weights.push(wxi * wti * 0.25);
        }
    }
    QuadratureRule { points, weights, exactness_degree: 2 * n - 1 }
}

/// Collapsed-coordinate rule on the reference tetrahedron, exact to `degree`.
pub fn tetrahedron_rule(degree: usize) -> QuadratureRule<3> {
    let n = degree / 2 + 1;
    let (xs, wx) = gauss_jacobi(n, 0);
    let (ys, wy) = gauss_jacobi(n, 1);
    let (zs, wz) = gauss_jacobi(n, 2);
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for (x, wxi) in xs.iter().zip(&wx) {
        for (ty, wyi) in ys.iter().zip(&wy) {
            let y = 0.5 * (1.0 + ty);
            for (tz, wzi) in zs.iter().zip(&wz) {
                let z = 0.5 * (1.0 + tz);
                points.push([x * (1.0 - y) * (1.0 - z), y * (1.0 - z), z]);
                weights.push(wxi * wyi * wzi * 0.25 * 0.125);
            }
        }
    }
    QuadratureRule { points, weights, exactness_degree: 2 * n - 1 }
}

/// Quadrature on the reference simplex of dimension `D` (2 or 3).
pub fn simplex_quadrature<const D: usize>(degree: usize) -> Result<QuadratureRule<D>> {
    let pts_w: (Vec<Vec<f64>>, Vec<f64>, usize) = match D {
        2 => {
            let r = triangle_rule(degree);
            (r.points.iter().map(|p| p.to_vec()).collect(), r.weights, r.exactness_degree)
        }
        3 => {
            let r = tetrahedron_rule(degree);
            (r.points.iter().map(|p| p.to_vec()).collect(), r.weights, r.exactness_degree)
        }
        d => return Err(HdgError::UnsupportedDimension(d)),
    };
    Ok(convert_rule(pts_w))
}

/// Quadrature on the reference facet of dimension `D` (1: `[-1,1]`, 2: the
/// reference triangle).
pub fn facet_quadrature<const D: usize>(degree: usize) -> Result<QuadratureRule<D>> {
    let pts_w: (Vec<Vec<f64>>, Vec<f64>, usize) = match D {
        1 => {
            let r = interval_rule(degree);
            (r.points.iter().map(|p| p.to_vec()).collect(), r.weights, r.exactness_degree)
        }
        2 => {
            let r = triangle_rule(degree);
            (r.points.iter().map(|p| p.to_vec()).collect(), r.weights, r.exactness_degree)
        }
        d => return Err(HdgError::UnsupportedDimension(d)),
    };
    Ok(convert_rule(pts_w))
}

fn convert_rule<const D: usize>((pts, weights, exactness_degree): (Vec<Vec<f64>>, Vec<f64>, usize)) -> QuadratureRule<D> {
    let points = pts
        .into_iter()
        .map(|p| {
            let mut a = [0.0; D];
            a.copy_from_slice(&p);
            a
        })
        .collect();
    QuadratureRule { points, weights, exactness_degree }
}

/// Legendre values `P_0(s), ..., P_n(s)` (no domain check; used on facets).
pub fn legendre_all(n: usize, s: f64) -> Vec<f64> {
    scaled_jacobi_all(n, 0, s, 1.0)
}
