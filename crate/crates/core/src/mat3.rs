//! Small dense 3×3 matrices over any [`Scalar`].
//!
//! Deformation gradients and material isomorphisms live here. Entries are
//! stored row-major; the flattened index of `(i, j)` is `3 * i + j`.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::dual::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3<S = f64>(pub [[S; 3]; 3]);

/// Flattened row-major index of entry `(i, j)`.
#[inline]
pub const fn flat(i: usize, j: usize) -> usize {
    3 * i + j
}

impl<S: Scalar> Mat3<S> {
    pub fn zeros() -> Self {
        Mat3([[S::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::scaled_identity(S::one())
    }

    pub fn scaled_identity(s: S) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.0[i][i] = s;
        }
        m
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn from_row_major(v: &[S; 9]) -> Self {
        Self::from_fn(|i, j| v[flat(i, j)])
    }

    pub fn to_row_major(&self) -> [S; 9] {
        let mut out = [S::zero(); 9];
        for i in 0..3 {
            for j in 0..3 {
                out[flat(i, j)] = self.0[i][j];
            }
        }
        out
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.0[i][j]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn scale(&self, s: S) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn trace(&self) -> S {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> S {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Frobenius inner product `Σ a_ij b_ij`.
    pub fn dot(&self, other: &Self) -> S {
        let mut acc = S::zero();
        for i in 0..3 {
            for j in 0..3 {
                acc += self.0[i][j] * other.0[i][j];
            }
        }
        acc
    }

    /// `tr(AᵀA)`.
    pub fn norm_sq(&self) -> S {
        self.dot(self)
    }

    /// Inverse by cofactors; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.value() == 0.0 || !d.value().is_finite() {
            return None;
        }
        let m = &self.0;
        let cof = |a: usize, b: usize, c: usize, e: usize| m[a][b] * m[c][e] - m[a][e] * m[c][b];
        let adj = Mat3([
            [cof(1, 1, 2, 2), -cof(0, 1, 2, 2), cof(0, 1, 1, 2)],
            [-cof(1, 0, 2, 2), cof(0, 0, 2, 2), -cof(0, 0, 1, 2)],
            [cof(1, 0, 2, 1), -cof(0, 0, 2, 1), cof(0, 0, 1, 1)],
        ]);
        Some(adj.scale(S::one() / d))
    }

    /// Largest absolute entry of the real part.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|v| v.value().abs())
            .fold(0.0, f64::max)
    }

    /// Matrix exponential by scaling and squaring of a truncated Taylor series.
    pub fn expm(&self) -> Self {
        // 1-norm of the real part drives the number of squarings.
        let norm = (0..3)
            .map(|j| (0..3).map(|i| self.0[i][j].value().abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut squarings = 0;
        let mut scaled_norm = norm;
        while scaled_norm > 0.25 {
            scaled_norm *= 0.5;
            squarings += 1;
        }
        let a = self.scale(S::from_f64(0.5f64.powi(squarings)));
        let mut term = Self::identity();
        let mut sum = Self::identity();
        for k in 1..=18 {
            term = (term * a).scale(S::from_f64(1.0 / k as f64));
            sum = sum + term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }
}

impl Mat3<f64> {
    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Lifts a real matrix to any scalar type as constants.
    pub fn lift<S: Scalar>(&self) -> Mat3<S> {
        Mat3::from_fn(|i, j| S::from_f64(self.0[i][j]))
    }

    pub fn to_nalgebra(&self) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::from_fn(|i, j| self.0[i][j])
    }

    pub fn from_nalgebra(m: &nalgebra::Matrix3<f64>) -> Self {
        Mat3::from_fn(|i, j| m[(i, j)])
    }

    pub fn skew_part(&self) -> Self {
        Mat3::from_fn(|i, j| 0.5 * (self.0[i][j] - self.0[j][i]))
    }

    pub fn sym_part(&self) -> Self {
        Mat3::from_fn(|i, j| 0.5 * (self.0[i][j] + self.0[j][i]))
    }
}

impl<S: Scalar> Add for Mat3<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Mat3::from_fn(|i, j| self.0[i][j] + rhs.0[i][j])
    }
}

impl<S: Scalar> Sub for Mat3<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Mat3::from_fn(|i, j| self.0[i][j] - rhs.0[i][j])
    }
}

impl<S: Scalar> Mul for Mat3<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Mat3::from_fn(|i, j| {
            self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j] + self.0[i][2] * rhs.0[2][j]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> Mat3 {
        Mat3([[1.2, 0.3, -0.1], [0.0, 0.9, 0.4], [0.2, -0.5, 1.1]])
    }

    #[test]
    fn inverse_round_trip() {
        let a = sample();
        let prod = a * a.inverse().unwrap();
        assert!((prod - Mat3::identity()).max_abs() < 1e-14);
        assert!(Mat3::<f64>::zeros().inverse().is_none());
    }

    #[test]
    fn det_matches_nalgebra() {
        let a = sample();
        assert_relative_eq!(a.det(), a.to_nalgebra().determinant(), max_relative = 1e-14);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let w = 0.8;
        let gen = Mat3([[0.0, -w, 0.0], [w, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let r = gen.expm();
        assert_relative_eq!(r.get(0, 0), w.cos(), epsilon = 1e-14);
        assert_relative_eq!(r.get(1, 0), w.sin(), epsilon = 1e-14);
        assert_relative_eq!(r.det(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn expm_det_is_exp_trace() {
        let a = sample().scale(2.5);
        assert_relative_eq!(a.expm().det(), a.trace().exp(), max_relative = 1e-12);
        let back = a.expm() * a.scale(-1.0).expm();
        assert!((back - Mat3::identity()).max_abs() < 1e-12);
    }
}
