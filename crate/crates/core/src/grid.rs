//! Points of the body-time manifold and sampling grids over them.

use serde::{Deserialize, Serialize};

/// A point-instant `(t, X)` in body coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyPoint {
    pub t: f64,
    pub x: [f64; 3],
}

impl BodyPoint {
    pub fn new(t: f64, x: [f64; 3]) -> Self {
        BodyPoint { t, x }
    }

    /// Coordinates `(t, x¹, x², x³)`.
    pub fn coords(&self) -> [f64; 4] {
        [self.t, self.x[0], self.x[1], self.x[2]]
    }

    pub fn from_coords(c: [f64; 4]) -> Self {
        BodyPoint {
            t: c[0],
            x: [c[1], c[2], c[3]],
        }
    }

    pub fn distance(&self, other: &BodyPoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords().iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// `n` evenly spaced values from `range[0]` to `range[1]`; a single value is `range[0]`.
pub fn linspace(range: [f64; 2], n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![range[0]],
        _ => (0..n)
            .map(|k| range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Ordered set of grid points; the leading axis varies slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: Vec<BodyPoint>,
    /// Extent along each varied axis, slowest first.
    pub shape: Vec<usize>,
}

impl Grid {
    /// `(t, x¹)` grid with `x²`, `x³` pinned, row-major in `t`.
    pub fn t_x1(t: [f64; 2], nt: usize, x1: [f64; 2], nx1: usize, x2: f64, x3: f64) -> Self {
        let ts = linspace(t, nt);
        let xs = linspace(x1, nx1);
        let points = ts
            .iter()
            .flat_map(|&tv| xs.iter().map(move |&xv| BodyPoint::new(tv, [xv, x2, x3])))
            .collect();
        Grid {
            points,
            shape: vec![nt, nx1],
        }
    }

    /// Full `(t, x¹, x², x³)` tensor grid, row-major.
    pub fn full(t: ([f64; 2], usize), x: [([f64; 2], usize); 3]) -> Self {
        let ts = linspace(t.0, t.1);
        let axes: Vec<Vec<f64>> = x.iter().map(|&(r, n)| linspace(r, n)).collect();
        let mut points = Vec::new();
        for &tv in &ts {
            for &a in &axes[0] {
                for &b in &axes[1] {
                    for &c in &axes[2] {
                        points.push(BodyPoint::new(tv, [a, b, c]));
                    }
                }
            }
        }
        Grid {
            points,
            shape: vec![t.1, x[0].1, x[1].1, x[2].1],
        }
    }

    pub fn from_points(points: Vec<BodyPoint>) -> Self {
        let n = points.len();
        Grid {
            points,
            shape: vec![n],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
