//! Forward-mode derivative jets used to evaluate curls and divergences of
//! the closed-form shape functions exactly.

use std::ops::{Add, Mul, Neg, Sub};

use crate::polyquad::Ring;

/// Value and gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet1<const D: usize> {
    pub v: f64,
    pub g: [f64; D],
}

/// Value, gradient and Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2<const D: usize> {
    pub v: f64,
    pub g: [f64; D],
    pub h: [[f64; D]; D],
}

impl<const D: usize> Jet1<D> {
    pub fn constant(c: f64) -> Self {
        Self { v: c, g: [0.0; D] }
    }

    /// An affine function `c + Σ g_i x_i` evaluated at a point.
    pub fn affine(v: f64, g: [f64; D]) -> Self {
        Self { v, g }
    }
}

impl<const D: usize> Jet2<D> {
    pub fn constant(c: f64) -> Self {
        Self { v: c, g: [0.0; D], h: [[0.0; D]; D] }
    }

    pub fn affine(v: f64, g: [f64; D]) -> Self {
        Self { v, g, h: [[0.0; D]; D] }
    }

    /// `∂_i` of this jet, one derivative order lower.
    pub fn partial(&self, i: usize) -> Jet1<D> {
        let mut g = [0.0; D];
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = self.h[i][j];
        }
        Jet1 { v: self.g[i], g }
    }

    pub fn grad(&self) -> [Jet1<D>; D] {
        std::array::from_fn(|i| self.partial(i))
    }

    pub fn to_jet1(&self) -> Jet1<D> {
        Jet1 { v: self.v, g: self.g }
    }
}

impl<const D: usize> Add for Jet1<D> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, g: std::array::from_fn(|i| self.g[i] + o.g[i]) }
    }
}

impl<const D: usize> Sub for Jet1<D> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, g: std::array::from_fn(|i| self.g[i] - o.g[i]) }
    }
}

impl<const D: usize> Mul for Jet1<D> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self { v: self.v * o.v, g: std::array::from_fn(|i| self.g[i] * o.v + self.v * o.g[i]) }
    }
}

impl<const D: usize> Mul<f64> for Jet1<D> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self { v: self.v * c, g: self.g.map(|x| x * c) }
    }
}

impl<const D: usize> Neg for Jet1<D> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const D: usize> Ring for Jet1<D> {
    fn constant(c: f64) -> Self {
        Jet1::constant(c)
    }
}

impl<const D: usize> Add for Jet2<D> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            g: std::array::from_fn(|i| self.g[i] + o.g[i]),
            h: std::array::from_fn(|i| std::array::from_fn(|j| self.h[i][j] + o.h[i][j])),
        }
    }
}

impl<const D: usize> Sub for Jet2<D> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            g: std::array::from_fn(|i| self.g[i] - o.g[i]),
            h: std::array::from_fn(|i| std::array::from_fn(|j| self.h[i][j] - o.h[i][j])),
        }
    }
}

impl<const D: usize> Mul for Jet2<D> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            g: std::array::from_fn(|i| self.g[i] * o.v + self.v * o.g[i]),
            h: std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    self.h[i][j] * o.v + self.g[i] * o.g[j] + self.g[j] * o.g[i] + self.v * o.h[i][j]
                })
            }),
        }
    }
}

impl<const D: usize> Mul<f64> for Jet2<D> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self { v: self.v * c, g: self.g.map(|x| x * c), h: self.h.map(|r| r.map(|x| x * c)) }
    }
}

impl<const D: usize> Neg for Jet2<D> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const D: usize> Ring for Jet2<D> {
    fn constant(c: f64) -> Self {
        Jet2::constant(c)
    }
}

/// A vector field evaluated with its Jacobian: component `c` is `f[c]`.
pub type VecJet<const D: usize> = [Jet1<D>; D];

pub fn vj_value<const D: usize>(f: &VecJet<D>) -> [f64; D] {
    f.map(|c| c.v)
}

/// Jacobian `J[c][i] = ∂_i f_c`.
pub fn vj_jacobian<const D: usize>(f: &VecJet<D>) -> [[f64; D]; D] {
    f.map(|c| c.g)
}

pub fn vj_div<const D: usize>(f: &VecJet<D>) -> f64 {
    (0..D).map(|i| f[i].g[i]).sum()
}

pub fn vj_scale<const D: usize>(f: VecJet<D>, s: Jet1<D>) -> VecJet<D> {
    f.map(|c| c * s)
}

pub fn vj_add<const D: usize>(a: VecJet<D>, b: VecJet<D>) -> VecJet<D> {
    std::array::from_fn(|i| a[i] + b[i])
}

pub fn vj_sub<const D: usize>(a: VecJet<D>, b: VecJet<D>) -> VecJet<D> {
    std::array::from_fn(|i| a[i] - b[i])
}

/// 2D scalar curl `(∂_y ψ, −∂_x ψ)`.
pub fn curl2(psi: &Jet2<2>) -> VecJet<2> {
    [psi.partial(1), -psi.partial(0)]
}

/// 3D curl of a vector potential given componentwise with second derivatives.
pub fn curl3(a: &[Jet2<3>; 3]) -> VecJet<3> {
    [
        a[2].partial(1) - a[1].partial(2),
        a[0].partial(2) - a[2].partial(0),
        a[1].partial(0) - a[0].partial(1),
    ]
}

pub fn cross3(a: &VecJet<3>, b: &VecJet<3>) -> VecJet<3> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_second_order() {
        // f = x² y at (2, 3)
        let x = Jet2::<2>::affine(2.0, [1.0, 0.0]);
        let y = Jet2::<2>::affine(3.0, [0.0, 1.0]);
        let f = x * x * y;
        assert_eq!(f.v, 12.0);
        assert_eq!(f.g, [12.0, 4.0]);
        assert_eq!(f.h, [[6.0, 4.0], [4.0, 0.0]]);
    }

    #[test]
    fn curl_is_divergence_free() {
        let x = Jet2::<2>::affine(0.3, [1.0, 0.0]);
        let y = Jet2::<2>::affine(-0.7, [0.0, 1.0]);
        let psi = x * x * x * y + y * y * x * 2.0;
        assert!(vj_div(&curl2(&psi)).abs() < 1e-15);
        let z = Jet2::<3>::affine(0.2, [0.0, 0.0, 1.0]);
        let x3 = Jet2::<3>::affine(0.3, [1.0, 0.0, 0.0]);
        let y3 = Jet2::<3>::affine(0.1, [0.0, 1.0, 0.0]);
        let a = [x3 * y3 * z, z * z * x3, y3 * y3 * y3 + x3];
        assert!(vj_div(&curl3(&a)).abs() < 1e-15);
    }
}
