//! Dual Minkowski norm evaluation.
//!
//! γ*(x) = sup_{|ν|=1} ⟨x, ν⟩ / γ(ν). The objective is 0-homogeneous, so its
//! spherical Hessian at a unit ν is the tangential restriction of the ambient
//! Hessian, which makes projected Newton ascent cheap. The supremum can be
//! multimodal for perturbed anisotropies, so every evaluation seeds from a
//! dense fixed direction table and polishes the best seeds.

use rayon::prelude::*;

use super::families::{dot, norm};
use super::{tangent_basis, AnisotropySpec, DualGradient};
use crate::surface::make_grid;
use nalgebra::DVector;

/// Seed directions per hypersurface dimension: 48×96 = 4608 for n = 2,
/// 1024 for n = 1.
const SEED_RES_N2: usize = 48;
const SEED_RES_N1: usize = 1024;

const NEWTON_MAX_ITER: usize = 50;
const TOP_SEEDS: usize = 8;

/// Precomputed seed table: unit directions ν_i, the scaled points
/// z_i = ν_i / γ(ν_i) (so ⟨x, z_i⟩ is a lower bound for γ*(x)), γ(ν_i),
/// and the antipode index of each node.
#[derive(Debug, Clone)]
pub(crate) struct DualTable {
    pub dim: usize,
    pub count: usize,
    pub dirs: Vec<f64>,
    pub zs: Vec<f64>,
    pub gammas: Vec<f64>,
    pub antipode: Vec<usize>,
}

impl DualTable {
    pub fn build(spec: &AnisotropySpec) -> Self {
        let n = spec.dimension();
        let res = if n == 1 { SEED_RES_N1 } else { SEED_RES_N2 };
        let grid = make_grid(n, res).expect("internal seed grid");
        let dim = n + 1;
        let count = grid.len();
        let dirs = grid.nodes_flat().to_vec();
        let mut zs = vec![0.0; count * dim];
        let mut gammas = vec![0.0; count];
        for i in 0..count {
            let d = &dirs[i * dim..(i + 1) * dim];
            let g = spec.gamma_kernel(d);
            gammas[i] = g;
            for k in 0..dim {
                zs[i * dim + k] = d[k] / g;
            }
        }
        let antipode = (0..count)
            .map(|i| grid.antipode(i).expect("seed grids are antipodal"))
            .collect();
        DualTable {
            dim,
            count,
            dirs,
            zs,
            gammas,
            antipode,
        }
    }
}

#[inline]
fn normalize(v: &mut [f64]) {
    let r = norm(v);
    for x in v.iter_mut() {
        *x /= r;
    }
}

#[inline]
fn objective(spec: &AnisotropySpec, x: &[f64], nu: &[f64]) -> f64 {
    dot(x, nu) / spec.gamma_kernel(nu)
}

/// Projected Newton ascent of ⟨x, ν⟩/γ(ν) on the sphere from `seed`.
/// Returns the refined value and direction; the value never falls below the
/// seed value.
pub(crate) fn polish(spec: &AnisotropySpec, x: &[f64], seed: &[f64]) -> (f64, [f64; 3]) {
    let d = x.len();
    let k = d - 1;
    let mut nu = [0.0f64; 3];
    nu[..d].copy_from_slice(seed);
    normalize(&mut nu[..d]);
    let grad_tol = 1e-12 * norm(x).max(1.0);
    let mut f = objective(spec, x, &nu[..d]);

    let mut grad_gamma = [0.0f64; 3];
    let mut hess_gamma = [0.0f64; 9];
    for _ in 0..NEWTON_MAX_ITER {
        let gamma = spec.gamma_kernel(&nu[..d]);
        spec.gamma_grad_kernel(&nu[..d], &mut grad_gamma);
        let p = dot(x, &nu[..d]);
        // Ambient gradient of the 0-homogeneous objective.
        let mut grad_amb = [0.0f64; 3];
        for i in 0..d {
            grad_amb[i] = x[i] / gamma - p * grad_gamma[i] / (gamma * gamma);
        }
        let basis = tangent_basis(&nu[..d]);
        let mut g = [0.0f64; 2];
        for a in 0..k {
            g[a] = dot(&grad_amb[..d], &basis[a][..d]);
        }
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if gn <= grad_tol {
            break;
        }
        spec.gamma_hess_kernel(&nu[..d], &mut hess_gamma);
        // H_f = −(x∇γᵀ + ∇γxᵀ)/γ² − p∇²γ/γ² + 2p∇γ∇γᵀ/γ³, projected.
        let g2 = gamma * gamma;
        let g3 = g2 * gamma;
        let mut h = [[0.0f64; 2]; 2];
        for a in 0..k {
            for b in a..k {
                let (ta, tb) = (&basis[a], &basis[b]);
                let mut v = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let hf = -(x[i] * grad_gamma[j] + grad_gamma[i] * x[j]) / g2
                            - p * hess_gamma[i * d + j] / g2
                            + 2.0 * p * grad_gamma[i] * grad_gamma[j] / g3;
                        v += ta[i] * hf * tb[j];
                    }
                }
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        // Newton step toward a maximum when the tangential Hessian is
        // negative definite; scaled gradient ascent otherwise.
        let mut step = [0.0f64; 2];
        let newton_ok = if k == 1 {
            if h[0][0] < 0.0 {
                step[0] = -g[0] / h[0][0];
                true
            } else {
                false
            }
        } else {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if h[0][0] < 0.0 && det > 0.0 {
                step[0] = -(h[1][1] * g[0] - h[0][1] * g[1]) / det;
                step[1] = -(-h[1][0] * g[0] + h[0][0] * g[1]) / det;
                true
            } else {
                false
            }
        };
        if !newton_ok {
            let scale = 0.3 / gn;
            for a in 0..k {
                step[a] = g[a] * scale;
            }
        }
        // Backtracking on the sphere.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let mut cand = [0.0f64; 3];
            for i in 0..d {
                cand[i] = nu[i] + lambda * (step[0] * basis[0][i] + step[1] * basis[1][i]);
            }
            normalize(&mut cand[..d]);
            let fc = objective(spec, x, &cand[..d]);
            if fc > f {
                nu = cand;
                f = fc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (f, nu)
}

/// Indices of the `TOP_SEEDS` largest values of ⟨x, z_i⟩, plus the scan
/// maximum itself (a certified lower bound for γ*).
fn scan_seeds(table: &DualTable, x: &[f64]) -> ([usize; TOP_SEEDS], f64) {
    let mut idx = [usize::MAX; TOP_SEEDS];
    let mut val = [f64::NEG_INFINITY; TOP_SEEDS];
    let d = table.dim;
    for (i, z) in table.zs.chunks_exact(d).enumerate() {
        let v = dot(x, z);
        if v > val[TOP_SEEDS - 1] {
            let mut slot = TOP_SEEDS - 1;
            while slot > 0 && val[slot - 1] < v {
                val[slot] = val[slot - 1];
                idx[slot] = idx[slot - 1];
                slot -= 1;
            }
            val[slot] = v;
            idx[slot] = i;
        }
    }
    (idx, val[0])
}

pub(crate) fn dual_norm_value(spec: &AnisotropySpec, x: &[f64]) -> f64 {
    if norm(x) == 0.0 {
        return 0.0;
    }
    let table = spec.dual_table();
    let (seeds, scan_best) = scan_seeds(table, x);
    let d = table.dim;
    let mut best = scan_best;
    for &i in &seeds {
        if i == usize::MAX {
            continue;
        }
        let (f, _) = polish(spec, x, &table.dirs[i * d..(i + 1) * d]);
        best = best.max(f);
    }
    best
}

pub(crate) fn dual_norm_gradient(spec: &AnisotropySpec, x: &[f64]) -> DualGradient {
    let table = spec.dual_table();
    let (seeds, _) = scan_seeds(table, x);
    let d = table.dim;
    let mut refined: Vec<(f64, [f64; 3])> = Vec::with_capacity(TOP_SEEDS);
    for &i in &seeds {
        if i == usize::MAX {
            continue;
        }
        refined.push(polish(spec, x, &table.dirs[i * d..(i + 1) * d]));
    }
    refined.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (best_value, best_dir) = refined[0];
    let mut multiplicity = false;
    for (value, dir) in refined.iter().skip(1) {
        let cosine = dot(&best_dir[..d], &dir[..d]).clamp(-1.0, 1.0);
        if cosine.acos() > 1e-3 && *value >= best_value * (1.0 - 1e-9) {
            multiplicity = true;
            break;
        }
    }
    let gamma = spec.gamma_kernel(&best_dir[..d]);
    let direction = DVector::from_column_slice(&best_dir[..d]);
    DualGradient {
        gradient: &direction / gamma,
        direction,
        multiplicity,
    }
}

/// Full-accuracy batch evaluation of γ*(X_p − x0) for a flat position buffer.
pub(crate) fn dual_norm_batch(spec: &AnisotropySpec, positions: &[f64], x0: &[f64]) -> Vec<f64> {
    let d = spec.ambient_dim();
    positions
        .par_chunks_exact(d)
        .map(|pos| {
            let mut diff = [0.0f64; 3];
            for i in 0..d {
                diff[i] = pos[i] - x0[i];
            }
            spec.dual_norm_slice(&diff[..d])
        })
        .collect()
}

/// Warm-started batch evaluator for the radius descent loop: each node keeps
/// its previous maximizing direction as the Newton seed, so iterations after
/// the first cost a couple of Newton steps per node.
pub(crate) struct WarmDual<'a> {
    spec: &'a AnisotropySpec,
    cache: Vec<[f64; 3]>,
    initialized: bool,
}

impl<'a> WarmDual<'a> {
    pub fn new(spec: &'a AnisotropySpec, node_count: usize) -> Self {
        WarmDual {
            spec,
            cache: vec![[0.0; 3]; node_count],
            initialized: false,
        }
    }

    /// Maximizing direction cached for node `i` (valid after `eval_all`).
    pub fn direction(&self, i: usize) -> [f64; 3] {
        self.cache[i]
    }

    /// Evaluate γ*(X_p − x0) for all nodes into `out`.
    pub fn eval_all(&mut self, positions: &[f64], x0: &[f64], out: &mut [f64]) {
        let d = self.spec.ambient_dim();
        let spec = self.spec;
        if !self.initialized {
            let table = spec.dual_table();
            positions
                .par_chunks_exact(d)
                .zip(self.cache.par_iter_mut())
                .zip(out.par_iter_mut())
                .for_each(|((pos, cache), value)| {
                    let mut diff = [0.0f64; 3];
                    for i in 0..d {
                        diff[i] = pos[i] - x0[i];
                    }
                    let (seeds, scan_best) = scan_seeds(table, &diff[..d]);
                    let mut best = scan_best;
                    let mut best_dir = [0.0f64; 3];
                    best_dir[..d].copy_from_slice(&table.dirs[seeds[0] * d..seeds[0] * d + d]);
                    for &i in &seeds {
                        if i == usize::MAX {
                            continue;
                        }
                        let (f, nu) = polish(spec, &diff[..d], &table.dirs[i * d..(i + 1) * d]);
                        if f >= best {
                            best = f;
                            best_dir = nu;
                        }
                    }
                    *cache = best_dir;
                    *value = best;
                });
            self.initialized = true;
            return;
        }
        positions
            .par_chunks_exact(d)
            .zip(self.cache.par_iter_mut())
            .zip(out.par_iter_mut())
            .for_each(|((pos, cache), value)| {
                let mut diff = [0.0f64; 3];
                for i in 0..d {
                    diff[i] = pos[i] - x0[i];
                }
                let (f, nu) = polish(spec, &diff[..d], &cache[..d]);
                *cache = nu;
                *value = f;
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::AnisotropySpec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::{DMatrix, DVector, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag411() -> AnisotropySpec {
        AnisotropySpec::ellipsoid(2, DMatrix::from_diagonal(&dvector![4.0, 1.0, 1.0])).unwrap()
    }

    /// Derivative-free brute-force oracle: dense grid max of ⟨x,ν⟩/γ(ν)
    /// followed by compass refinement on γ values only. Independent of the
    /// Newton path it checks.
    fn brute_dual(spec: &AnisotropySpec, x: &[f64], res: usize) -> f64 {
        let grid = make_grid(spec.dimension(), res).unwrap();
        let d = spec.ambient_dim();
        let mut best = f64::NEG_INFINITY;
        let mut best_dir = [0.0f64; 3];
        for node in grid.nodes_flat().chunks_exact(d) {
            let v = dot(x, node) / spec.gamma_kernel(node);
            if v > best {
                best = v;
                best_dir[..d].copy_from_slice(node);
            }
        }
        let mut step = std::f64::consts::PI / res as f64;
        while step > 1e-9 {
            let basis = tangent_basis(&best_dir[..d]);
            let mut improved = false;
            for a in 0..spec.dimension() {
                for sign in [-1.0, 1.0] {
                    let mut cand = best_dir;
                    for i in 0..d {
                        cand[i] += sign * step * basis[a][i];
                    }
                    normalize(&mut cand[..d]);
                    let v = dot(x, &cand[..d]) / spec.gamma_kernel(&cand[..d]);
                    if v > best {
                        best = v;
                        best_dir = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }

    #[test]
    fn dual_norm_examples() {
        let iso = AnisotropySpec::isotropic(2).unwrap();
        assert_eq!(iso.dual_norm(&dvector![0.0, 0.0, 0.0]), 0.0);
        assert_relative_eq!(
            iso.dual_norm(&dvector![3.0, 4.0, 0.0]),
            5.0,
            max_relative = 1e-10
        );

        let ell = diag411();
        assert_relative_eq!(
            ell.dual_norm(&dvector![2.0, 0.0, 0.0]),
            1.0,
            max_relative = 1e-8
        );
    }

    #[test]
    fn dual_norm_matches_ellipsoid_closed_form() {
        let ell = diag411();
        let q_inv = DMatrix::from_diagonal(&dvector![0.25, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0f64));
            if x.norm() < 1e-3 {
                continue;
            }
            let closed = x.dot(&(&q_inv * &x)).sqrt();
            assert_relative_eq!(ell.dual_norm(&x), closed, max_relative = 1e-9);
        }
    }

    #[test]
    fn dual_norm_matches_brute_force() {
        let specs = [
            AnisotropySpec::smoothed_lp(2, 4.0, 0.05).unwrap(),
            AnisotropySpec::harmonic(2, 1.0, 0.12, 2, 0).unwrap(),
            AnisotropySpec::harmonic(1, 1.0, 0.15, 3, 0).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for spec in &specs {
            let d = spec.ambient_dim();
            for _ in 0..10 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
                if norm(&x) < 1e-3 {
                    continue;
                }
                let res = if spec.dimension() == 1 { 4096 } else { 128 };
                let oracle = brute_dual(spec, &x, res);
                let got = spec.dual_norm(&DVector::from_column_slice(&x));
                assert_relative_eq!(got, oracle, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn gradient_examples_and_euler_identity() {
        let iso = AnisotropySpec::isotropic(2).unwrap();
        let g = iso.dual_norm_gradient(&dvector![0.0, 0.0, 2.0]).unwrap();
        assert_relative_eq!(g.gradient, dvector![0.0, 0.0, 1.0], max_relative = 1e-10);
        assert!(!g.multiplicity);

        let specs = [
            diag411(),
            AnisotropySpec::smoothed_lp(2, 4.0, 0.05).unwrap(),
            AnisotropySpec::harmonic(2, 1.0, 0.1, 2, 1).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for spec in &specs {
            for _ in 0..20 {
                let x = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0f64));
                if x.norm() < 0.1 {
                    continue;
                }
                let grad = spec.dual_norm_gradient(&x).unwrap();
                // Euler identity for the 1-homogeneous γ*.
                assert_relative_eq!(
                    grad.gradient.dot(&x),
                    spec.dual_norm(&x),
                    max_relative = 1e-8
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ell = diag411();
        let x = dvector![1.0, 0.4, -0.3];
        let grad = ell.dual_norm_gradient(&x).unwrap().gradient;
        let h = 1e-6;
        for j in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (ell.dual_norm(&xp) - ell.dual_norm(&xm)) / (2.0 * h);
            assert_relative_eq!(grad[j], fd, max_relative = 1e-5, epsilon = 1e-8);
        }
    }

    #[test]
    fn fenchel_gap_examples() {
        let iso = AnisotropySpec::isotropic(2).unwrap();
        assert_abs_diff_eq!(
            iso.fenchel_gap(&dvector![1.0, 0.0, 0.0], &dvector![0.0, 1.0, 0.0])
                .unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(iso
            .fenchel_gap(&dvector![1.0, 0.0, 0.0], &dvector![0.0, 0.0, 0.0])
            .is_err());

        // Equality at the Wulff contact: x = ξ(ν), y = ν.
        let specs = [
            diag411(),
            AnisotropySpec::smoothed_lp(2, 4.0, 0.05).unwrap(),
            AnisotropySpec::harmonic(2, 1.0, 0.1, 2, 0).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for spec in &specs {
            for _ in 0..50 {
                let mut nu = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0f64));
                if nu.norm() < 1e-2 {
                    continue;
                }
                nu /= nu.norm();
                let xi = spec.wulff_point(&nu).unwrap();
                let gap = spec.fenchel_gap(&xi, &nu).unwrap();
                assert!(gap.abs() <= 1e-8, "gap {gap} at wulff contact");
                // Wulff consistency: γ*(ξ(ν)) = 1.
                assert_relative_eq!(spec.dual_norm(&xi), 1.0, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn warm_batch_agrees_with_safe_batch() {
        let spec = AnisotropySpec::harmonic(2, 1.0, 0.1, 2, 0).unwrap();
        let grid = make_grid(2, 16).unwrap();
        let positions: Vec<f64> = grid
            .nodes_flat()
            .chunks_exact(3)
            .flat_map(|u| [1.3 * u[0] + 0.2, 0.9 * u[1], 1.1 * u[2] - 0.1])
            .collect();
        let x0 = [0.05, -0.02, 0.01];
        let safe = dual_norm_batch(&spec, &positions, &x0);
        let mut warm = WarmDual::new(&spec, grid.len());
        let mut out = vec![0.0; grid.len()];
        warm.eval_all(&positions, &x0, &mut out);
        for (a, b) in safe.iter().zip(&out) {
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
        // Move the base point slightly and compare the warm path again.
        let x1 = [0.0, 0.03, -0.02];
        warm.eval_all(&positions, &x1, &mut out);
        let safe1 = dual_norm_batch(&spec, &positions, &x1);
        for (a, b) in safe1.iter().zip(&out) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }
}
