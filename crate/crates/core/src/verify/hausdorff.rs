//! Symmetric Hausdorff distance between dense point clouds.
//!
//! Nearest-neighbor queries go through a uniform spatial hash; the ring
//! search stops as soon as no unvisited cell can hold a closer point, so
//! queries are exact.

use rayon::prelude::*;
use std::collections::HashMap;

pub(crate) struct HashGrid<'a> {
    points: &'a [f64],
    dim: usize,
    cell: f64,
    map: HashMap<[i32; 3], Vec<u32>>,
}

impl<'a> HashGrid<'a> {
    pub fn build(points: &'a [f64], dim: usize, cell: f64) -> Self {
        let cell = if cell > 0.0 { cell } else { 1.0 };
        let mut map: HashMap<[i32; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.chunks_exact(dim).enumerate() {
            map.entry(cell_of(p, dim, cell)).or_default().push(i as u32);
        }
        HashGrid {
            points,
            dim,
            cell,
            map,
        }
    }

    /// Exact distance from `q` to the nearest stored point.
    pub fn nearest_distance(&self, q: &[f64]) -> f64 {
        let d = self.dim;
        let home = cell_of(q, d, self.cell);
        let mut best = f64::INFINITY;
        let mut ring = 0i32;
        // A point in a cell at Chebyshev ring k is at least (k−1)·cell away,
        // so the scan stops once `best` beats the next ring's floor.
        while !(ring > 1 && best <= (ring - 1) as f64 * self.cell) {
            let mut dist2_best = best * best;
            self.for_ring(home, ring, |key| {
                if let Some(indices) = self.map.get(&key) {
                    for &i in indices {
                        let p = &self.points[i as usize * d..(i as usize + 1) * d];
                        let mut s = 0.0;
                        for k in 0..d {
                            let diff = p[k] - q[k];
                            s += diff * diff;
                        }
                        dist2_best = dist2_best.min(s);
                    }
                }
            });
            best = dist2_best.sqrt();
            ring += 1;
            if ring > 4096 {
                // Far-apart clouds: ring scanning degenerates, fall back to
                // the direct scan which is exact.
                return self
                    .points
                    .chunks_exact(d)
                    .map(|p| {
                        q.iter()
                            .zip(p)
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
            }
        }
        best
    }

    fn for_ring(&self, home: [i32; 3], ring: i32, mut f: impl FnMut([i32; 3])) {
        if self.dim == 2 {
            if ring == 0 {
                f(home);
                return;
            }
            for di in -ring..=ring {
                f([home[0] + di, home[1] - ring, 0]);
                f([home[0] + di, home[1] + ring, 0]);
            }
            for dj in (-ring + 1)..ring {
                f([home[0] - ring, home[1] + dj, 0]);
                f([home[0] + ring, home[1] + dj, 0]);
            }
        } else {
            if ring == 0 {
                f(home);
                return;
            }
            for di in -ring..=ring {
                for dj in -ring..=ring {
                    f([home[0] + di, home[1] + dj, home[2] - ring]);
                    f([home[0] + di, home[1] + dj, home[2] + ring]);
                }
            }
            for dl in (-ring + 1)..ring {
                for di in -ring..=ring {
                    f([home[0] + di, home[1] - ring, home[2] + dl]);
                    f([home[0] + di, home[1] + ring, home[2] + dl]);
                }
                for dj in (-ring + 1)..ring {
                    f([home[0] - ring, home[1] + dj, home[2] + dl]);
                    f([home[0] + ring, home[1] + dj, home[2] + dl]);
                }
            }
        }
    }
}

fn cell_of(p: &[f64], dim: usize, cell: f64) -> [i32; 3] {
    let mut key = [0i32; 3];
    for k in 0..dim {
        key[k] = (p[k] / cell).floor() as i32;
    }
    key
}

/// max over `a` of the distance to the nearest point of `grid`.
pub(crate) fn directed_hausdorff(a: &[f64], dim: usize, grid: &HashGrid) -> f64 {
    a.par_chunks_exact(dim)
        .map(|q| grid.nearest_distance(q))
        .reduce(|| 0.0, f64::max)
}

/// Symmetric Hausdorff distance; `cell` should be on the order of the cloud
/// spacing.
pub(crate) fn symmetric_hausdorff(a: &[f64], b: &[f64], dim: usize, cell: f64) -> f64 {
    let grid_b = HashGrid::build(b, dim, cell);
    let grid_a = HashGrid::build(a, dim, cell);
    directed_hausdorff(a, dim, &grid_b).max(directed_hausdorff(b, dim, &grid_a))
}
