//! Quadrature grids on the unit sphere S^n (n = 1, 2).
//!
//! n = 1: uniform nodes on the circle (the trapezoidal rule is spectrally
//! accurate for periodic integrands). n = 2: Gauss–Legendre nodes in
//! cos θ × uniform longitudes, `resolution × 2·resolution` points, with the
//! weights rescaled so they sum to exactly 4π.

use nalgebra::DVector;

use crate::{Error, Result};

/// Quadrature nodes and weights on S^n.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    n: usize,
    resolution: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    params: Vec<[f64; 2]>,
}

impl SphereGrid {
    /// Hypersurface dimension n.
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn ambient_dim(&self) -> usize {
        self.n + 1
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> DVector<f64> {
        let d = self.ambient_dim();
        DVector::from_column_slice(&self.nodes[i * d..(i + 1) * d])
    }

    /// All nodes as a flat `len * (n+1)` buffer.
    pub fn nodes_flat(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Chart parameters of node `i`: `[θ]` for n = 1, `[θ, φ]` for n = 2.
    pub fn params(&self, i: usize) -> [f64; 2] {
        self.params[i]
    }

    /// Index of the antipodal node, when the grid is antipodally symmetric
    /// (always true for n = 2; true for even resolutions for n = 1).
    pub fn antipode(&self, i: usize) -> Option<usize> {
        match self.n {
            1 => {
                if self.resolution % 2 == 0 {
                    Some((i + self.resolution / 2) % self.resolution)
                } else {
                    None
                }
            }
            _ => {
                let phi_count = 2 * self.resolution;
                let (row, col) = (i / phi_count, i % phi_count);
                Some((self.resolution - 1 - row) * phi_count + (col + self.resolution) % phi_count)
            }
        }
    }
}

/// Build a quadrature grid on S^n.
///
/// n = 1 gives `resolution` uniform circle nodes; n = 2 gives
/// `resolution` Gauss–Legendre colatitudes × `2·resolution` longitudes.
pub fn make_grid(n: usize, resolution: usize) -> Result<SphereGrid> {
    if resolution < 8 {
        return Err(Error::ResolutionTooSmall {
            resolution,
            min: 8,
        });
    }
    match n {
        1 => {
            let count = resolution;
            let mut nodes = Vec::with_capacity(2 * count);
            let mut params = Vec::with_capacity(count);
            let w = 2.0 * std::f64::consts::PI / count as f64;
            for k in 0..count {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                nodes.push(theta.cos());
                nodes.push(theta.sin());
                params.push([theta, 0.0]);
            }
            let mut weights = vec![w; count];
            normalize_weights(&mut weights, 2.0 * std::f64::consts::PI);
            Ok(SphereGrid {
                n,
                resolution,
                nodes,
                weights,
                params,
            })
        }
        2 => {
            let (ts, tws) = gauss_legendre(resolution);
            let phi_count = 2 * resolution;
            let phi_w = std::f64::consts::PI / resolution as f64;
            let mut nodes = Vec::with_capacity(3 * resolution * phi_count);
            let mut weights = Vec::with_capacity(resolution * phi_count);
            let mut params = Vec::with_capacity(resolution * phi_count);
            for (t, tw) in ts.iter().zip(&tws) {
                let theta = t.acos();
                let sin_theta = (1.0 - t * t).sqrt();
                for j in 0..phi_count {
                    let phi = 2.0 * std::f64::consts::PI * j as f64 / phi_count as f64;
                    nodes.push(sin_theta * phi.cos());
                    nodes.push(sin_theta * phi.sin());
                    nodes.push(*t);
                    weights.push(tw * phi_w);
                    params.push([theta, phi]);
                }
            }
            normalize_weights(&mut weights, 4.0 * std::f64::consts::PI);
            Ok(SphereGrid {
                n,
                resolution,
                nodes,
                weights,
                params,
            })
        }
        _ => Err(Error::UnsupportedDimension { n }),
    }
}

fn normalize_weights(weights: &mut [f64], target: f64) {
    let sum: f64 = weights.iter().sum();
    let scale = target / sum;
    for w in weights {
        *w *= scale;
    }
}

/// Gauss–Legendre nodes (descending order flipped to ascending) and weights
/// on [−1, 1], by Newton iteration on the three-term recurrence. Node pairs
/// are symmetrized so the grid is exactly antipodal.
pub(crate) fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p, d) = legendre_with_derivative(m, x);
                dp = d;
                x -= p / d;
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let t = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -t;
        nodes[j] = t;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..m {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
        p_prev = p;
        p = next;
    }
    let dp = m as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}
