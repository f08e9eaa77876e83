//! Analytic value / gradient / Hessian kernels for the 1-homogeneous
//! extension of each anisotropy family.
//!
//! The kernels operate on plain slices with caller-provided output buffers so
//! the dual-norm Newton loop and per-node surface sampling stay allocation
//! free. Public wrappers in the parent module add domain checks and
//! `nalgebra` types.

use super::{AnisotropyFamily, AnisotropySpec};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl AnisotropySpec {
    /// γ(x) for x ≠ 0 (1-homogeneous extension).
    pub(crate) fn gamma_kernel(&self, x: &[f64]) -> f64 {
        match &self.family {
            AnisotropyFamily::Isotropic => norm(x),
            AnisotropyFamily::Ellipsoid { q } => {
                let mut s = 0.0;
                for i in 0..x.len() {
                    for j in 0..x.len() {
                        s += q[(i, j)] * x[i] * x[j];
                    }
                }
                s.sqrt()
            }
            AnisotropyFamily::SmoothedLp {
                exponent,
                regularizer,
            } => {
                let c = regularizer * regularizer / x.len() as f64;
                let r2 = dot(x, x);
                let mut f = 0.0;
                for &xi in x {
                    f += (xi * xi + c * r2).powf(exponent / 2.0);
                }
                f.powf(1.0 / exponent)
            }
            AnisotropyFamily::HarmonicPerturbation {
                base_radius,
                amplitude,
                ..
            } => {
                let poly = self.harmonic.as_ref().expect("prepared harmonic");
                let rho = norm(x);
                let s = 1 - poly.degree() as i32;
                base_radius * rho + amplitude * poly.eval(x) * rho.powi(s)
            }
        }
    }

    /// ∇γ(x) into `out` (0-homogeneous; equals the Wulff point ξ at unit x).
    pub(crate) fn gamma_grad_kernel(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match &self.family {
            AnisotropyFamily::Isotropic => {
                let r = norm(x);
                for i in 0..d {
                    out[i] = x[i] / r;
                }
            }
            AnisotropyFamily::Ellipsoid { q } => {
                let mut v = 0.0;
                for i in 0..d {
                    out[i] = 0.0;
                    for j in 0..d {
                        out[i] += q[(i, j)] * x[j];
                    }
                    v += out[i] * x[i];
                }
                let v = v.sqrt();
                for o in out[..d].iter_mut() {
                    *o /= v;
                }
            }
            AnisotropyFamily::SmoothedLp {
                exponent,
                regularizer,
            } => {
                let m = *exponent;
                let c = regularizer * regularizer / d as f64;
                let r2 = dot(x, x);
                let mut f = 0.0;
                let mut t_sum = 0.0;
                let mut t = [0.0f64; 3];
                for i in 0..d {
                    let u = x[i] * x[i] + c * r2;
                    t[i] = u.powf(m / 2.0 - 1.0);
                    t_sum += t[i];
                    f += u * t[i];
                }
                let gamma = f.powf(1.0 / m);
                // ∇γ = (γ / (m F)) ∇F with ∇F_j = m x_j (t_j + c T).
                let scale = gamma / f;
                for i in 0..d {
                    out[i] = scale * x[i] * (t[i] + c * t_sum);
                }
            }
            AnisotropyFamily::HarmonicPerturbation {
                base_radius,
                amplitude,
                ..
            } => {
                let poly = self.harmonic.as_ref().expect("prepared harmonic");
                let rho2 = dot(x, x);
                let rho = rho2.sqrt();
                let s = 1 - poly.degree() as i32;
                let p = poly.eval(x);
                poly.gradient(x, out);
                let rho_s = rho.powi(s);
                let rho_s2 = rho.powi(s - 2);
                for i in 0..d {
                    out[i] = base_radius * x[i] / rho
                        + amplitude * (rho_s * out[i] + s as f64 * p * rho_s2 * x[i]);
                }
            }
        }
    }

    /// ∇²γ(x) into `out` (row-major d×d; (−1)-homogeneous; annihilates x).
    pub(crate) fn gamma_hess_kernel(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match &self.family {
            AnisotropyFamily::Isotropic => {
                let r2 = dot(x, x);
                let r = r2.sqrt();
                for i in 0..d {
                    for j in 0..d {
                        let id = if i == j { 1.0 } else { 0.0 };
                        out[i * d + j] = (id - x[i] * x[j] / r2) / r;
                    }
                }
            }
            AnisotropyFamily::Ellipsoid { q } => {
                let mut qx = [0.0f64; 3];
                let mut v = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        qx[i] += q[(i, j)] * x[j];
                    }
                    v += qx[i] * x[i];
                }
                let g = v.sqrt();
                let g3 = g * v;
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = q[(i, j)] / g - qx[i] * qx[j] / g3;
                    }
                }
            }
            AnisotropyFamily::SmoothedLp {
                exponent,
                regularizer,
            } => {
                let m = *exponent;
                let c = regularizer * regularizer / d as f64;
                let r2 = dot(x, x);
                let mut f = 0.0;
                let mut t_sum = 0.0;
                let mut s_sum = 0.0;
                let mut t = [0.0f64; 3];
                let mut sv = [0.0f64; 3];
                for i in 0..d {
                    let u = x[i] * x[i] + c * r2;
                    sv[i] = u.powf(m / 2.0 - 2.0);
                    t[i] = sv[i] * u;
                    t_sum += t[i];
                    s_sum += sv[i];
                    f += u * t[i];
                }
                let gamma = f.powf(1.0 / m);
                let mut grad_f = [0.0f64; 3];
                for i in 0..d {
                    grad_f[i] = m * x[i] * (t[i] + c * t_sum);
                }
                // ∇²F then chain rule through γ = F^{1/m}.
                let a = gamma / (m * f);
                let b = (1.0 / m) * (1.0 / m - 1.0) * gamma / (f * f);
                for j in 0..d {
                    for k in 0..d {
                        let id = if j == k { 1.0 } else { 0.0 };
                        let mut hf = id * (t[j] + c * t_sum);
                        hf += (m - 2.0)
                            * x[j]
                            * (sv[j] * (x[j] * id + c * x[k])
                                + c * (sv[k] * x[k] + c * x[k] * s_sum));
                        hf *= m;
                        out[j * d + k] = a * hf + b * grad_f[j] * grad_f[k];
                    }
                }
            }
            AnisotropyFamily::HarmonicPerturbation {
                base_radius,
                amplitude,
                ..
            } => {
                let poly = self.harmonic.as_ref().expect("prepared harmonic");
                let rho2 = dot(x, x);
                let rho = rho2.sqrt();
                let s = (1 - poly.degree() as i32) as f64;
                let p = poly.eval(x);
                let mut grad_p = [0.0f64; 3];
                poly.gradient(x, &mut grad_p);
                poly.hessian(x, out);
                let rho_s = rho.powi(1 - poly.degree() as i32);
                let rho_s2 = rho_s / rho2;
                let rho_s4 = rho_s2 / rho2;
                for i in 0..d {
                    for j in 0..d {
                        let id = if i == j { 1.0 } else { 0.0 };
                        let base = base_radius * (id / rho - x[i] * x[j] / (rho2 * rho));
                        let pert = rho_s * out[i * d + j]
                            + s * rho_s2 * (grad_p[i] * x[j] + x[i] * grad_p[j])
                            + s * p * rho_s2 * id
                            + s * (s - 2.0) * p * rho_s4 * x[i] * x[j];
                        out[i * d + j] = base + amplitude * pert;
                    }
                }
            }
        }
    }
}
