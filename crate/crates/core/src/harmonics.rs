//! Real spherical harmonics in Cartesian polynomial form.
//!
//! A degree-`l` harmonic is represented as the homogeneous polynomial
//! `P(x) = r^l Y(x/r)`, so that on the unit sphere `Y = P` and ambient first
//! and second derivatives of `Y`-based quantities reduce to exact polynomial
//! derivatives. Normalization is L²(S^n)-orthonormal; on the circle the
//! harmonics are `cos(kθ)/√π` and `sin(kθ)/√π` (constant `1/√(2π)`).

use crate::{Error, Result};

/// Largest supported harmonic degree. Coefficients are exact in f64 well past
/// this, but the bundled families never need more.
pub const MAX_DEGREE: u32 = 8;

#[derive(Debug, Clone, Copy)]
struct Term {
    coeff: f64,
    powers: [u8; 3],
}

/// Homogeneous polynomial in 2 or 3 variables.
#[derive(Debug, Clone)]
pub struct HomogeneousPoly {
    dim: usize,
    degree: u32,
    terms: Vec<Term>,
}

impl HomogeneousPoly {
    fn constant(dim: usize, value: f64) -> Self {
        HomogeneousPoly {
            dim,
            degree: 0,
            terms: vec![Term {
                coeff: value,
                powers: [0, 0, 0],
            }],
        }
    }

    fn from_terms(dim: usize, degree: u32, raw: Vec<(f64, [u8; 3])>) -> Self {
        let mut poly = HomogeneousPoly {
            dim,
            degree,
            terms: raw
                .into_iter()
                .map(|(coeff, powers)| Term { coeff, powers })
                .collect(),
        };
        poly.combine();
        poly
    }

    /// Merge like monomials and drop zero coefficients.
    fn combine(&mut self) {
        self.terms
            .sort_by_key(|t| (t.powers[0], t.powers[1], t.powers[2]));
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            match merged.last_mut() {
                Some(last) if last.powers == term.powers => last.coeff += term.coeff,
                _ => merged.push(*term),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        self.terms = merged;
    }

    fn mul(&self, other: &HomogeneousPoly) -> HomogeneousPoly {
        let mut raw = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                raw.push((
                    a.coeff * b.coeff,
                    [
                        a.powers[0] + b.powers[0],
                        a.powers[1] + b.powers[1],
                        a.powers[2] + b.powers[2],
                    ],
                ));
            }
        }
        HomogeneousPoly::from_terms(self.dim, self.degree + other.degree, raw)
    }

    fn scale(&mut self, factor: f64) {
        for t in &mut self.terms {
            t.coeff *= factor;
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for t in &self.terms {
            let mut v = t.coeff;
            for (i, &p) in t.powers[..self.dim].iter().enumerate() {
                v *= x[i].powi(p as i32);
            }
            sum += v;
        }
        sum
    }

    /// Gradient into `out[..dim]`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[..self.dim].fill(0.0);
        for t in &self.terms {
            for j in 0..self.dim {
                let pj = t.powers[j];
                if pj == 0 {
                    continue;
                }
                let mut v = t.coeff * pj as f64;
                for (i, &p) in t.powers[..self.dim].iter().enumerate() {
                    let q = if i == j { p - 1 } else { p };
                    v *= x[i].powi(q as i32);
                }
                out[j] += v;
            }
        }
    }

    /// Hessian, row-major `dim × dim`, into `out[..dim*dim]`.
    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out[..d * d].fill(0.0);
        for t in &self.terms {
            for j in 0..d {
                for k in j..d {
                    let (pj, pk) = (t.powers[j], t.powers[k]);
                    let factor = if j == k {
                        pj as f64 * (pj as f64 - 1.0)
                    } else {
                        pj as f64 * pk as f64
                    };
                    if factor == 0.0 {
                        continue;
                    }
                    let mut v = t.coeff * factor;
                    for (i, &p) in t.powers[..d].iter().enumerate() {
                        let mut q = p;
                        if i == j {
                            q -= 1;
                        }
                        if i == k {
                            q -= 1;
                        }
                        v *= x[i].powi(q as i32);
                    }
                    out[j * d + k] += v;
                    if j != k {
                        out[k * d + j] += v;
                    }
                }
            }
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v *= (n - i) as f64 / (i + 1) as f64;
    }
    v
}

fn falling_factorial(n: u32, k: u32) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v *= (n - i) as f64;
    }
    v
}

/// `Re[(x+iy)^m]` (for `cosine = true`) or `Im[(x+iy)^m]` as a polynomial.
fn sector_poly(dim: usize, m: u32, cosine: bool) -> HomogeneousPoly {
    if m == 0 {
        return HomogeneousPoly::constant(dim, if cosine { 1.0 } else { 0.0 });
    }
    let mut raw = Vec::new();
    for j in 0..=m {
        let is_even = j % 2 == 0;
        if cosine != is_even {
            continue;
        }
        let sign = match j % 4 {
            0 | 1 => 1.0,
            _ => -1.0,
        };
        raw.push((sign * binomial(m, j), [(m - j) as u8, j as u8, 0]));
    }
    HomogeneousPoly::from_terms(dim, m, raw)
}

/// `(x² + y² + z²)^k` expanded multinomially.
fn radius_power(dim: usize, k: u32) -> HomogeneousPoly {
    let mut poly = HomogeneousPoly::constant(dim, 1.0);
    let quad = if dim == 2 {
        HomogeneousPoly::from_terms(dim, 2, vec![(1.0, [2, 0, 0]), (1.0, [0, 2, 0])])
    } else {
        HomogeneousPoly::from_terms(
            dim,
            2,
            vec![(1.0, [2, 0, 0]), (1.0, [0, 2, 0]), (1.0, [0, 0, 2])],
        )
    };
    for _ in 0..k {
        poly = poly.mul(&quad);
    }
    poly
}

/// L²-orthonormal real spherical harmonic of `degree` and `order` on the unit
/// sphere of `R^ambient_dim`, returned as the homogeneous polynomial `r^l Y`.
///
/// `ambient_dim = 2`: frequency-`degree` circle harmonic, cosine branch for
/// `order >= 0` and sine branch for `order < 0`.
/// `ambient_dim = 3`: standard real spherical harmonic `Y_{l,m}`, cosine
/// branch for `m = order >= 0`, sine branch for `order < 0`.
pub fn real_spherical_harmonic(
    ambient_dim: usize,
    degree: u32,
    order: i32,
) -> Result<HomogeneousPoly> {
    if degree > MAX_DEGREE {
        return Err(Error::invalid(
            "degree",
            format!("harmonic degree {degree} exceeds the supported maximum {MAX_DEGREE}"),
        ));
    }
    match ambient_dim {
        2 => {
            let k = degree;
            if k == 0 {
                return Ok(HomogeneousPoly::constant(
                    2,
                    1.0 / (2.0 * std::f64::consts::PI).sqrt(),
                ));
            }
            let mut poly = sector_poly(2, k, order >= 0);
            poly.scale(1.0 / std::f64::consts::PI.sqrt());
            Ok(poly)
        }
        3 => {
            let l = degree;
            let m = order.unsigned_abs();
            if m > l {
                return Err(Error::invalid(
                    "order",
                    format!("|order| = {m} exceeds degree {l}"),
                ));
            }
            // r^{l-m} P_l^m(z/r) / (1-(z/r)²)^{m/2} as a polynomial in z, r².
            let mut legendre_raw = Vec::new();
            for k in 0..=(l - m) / 2 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let coeff = sign / 2f64.powi(l as i32)
                    * binomial(l, k)
                    * binomial(2 * (l - k), l)
                    * falling_factorial(l - 2 * k, m);
                legendre_raw.push((coeff, k));
            }
            let mut poly = HomogeneousPoly::constant(3, 0.0);
            poly.degree = l;
            poly.terms.clear();
            let sector = sector_poly(3, m, order >= 0);
            for (coeff, k) in legendre_raw {
                let mut part = radius_power(3, k);
                let z_power = HomogeneousPoly::from_terms(
                    3,
                    l - m - 2 * k,
                    vec![(coeff, [0, 0, (l - m - 2 * k) as u8])],
                );
                part = part.mul(&z_power).mul(&sector);
                poly.terms.extend(part.terms);
            }
            poly.combine();
            let norm = if m == 0 {
                ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt()
            } else {
                ((2 * l + 1) as f64 / (2.0 * std::f64::consts::PI)
                    * (falling_factorial(l + m, 2 * m)).recip())
                .sqrt()
            };
            poly.scale(norm);
            Ok(poly)
        }
        d => Err(Error::UnsupportedDimension { n: d.saturating_sub(1) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn y20_matches_closed_form() {
        let y = real_spherical_harmonic(3, 2, 0).unwrap();
        // (1/4)√(5/π) (3z² - 1) on the unit sphere.
        let norm = 0.25 * (5.0 / std::f64::consts::PI).sqrt();
        for &(theta, phi) in &[(0.3f64, 1.1f64), (1.2, -0.4), (2.0, 3.0), (2.9, 5.5)] {
            let x = [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ];
            let expected = norm * (3.0 * theta.cos().powi(2) - 1.0);
            assert_relative_eq!(y.eval(&x), expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn y22_matches_closed_form() {
        let y = real_spherical_harmonic(3, 2, 2).unwrap();
        let norm = 0.25 * (15.0 / std::f64::consts::PI).sqrt();
        let (theta, phi) = (0.9f64, 0.7f64);
        let x = [
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        ];
        let expected = norm * theta.sin().powi(2) * (2.0 * phi).cos();
        assert_relative_eq!(y.eval(&x), expected, max_relative = 1e-13);
    }

    #[test]
    fn circle_harmonics_are_trig() {
        let c3 = real_spherical_harmonic(2, 3, 0).unwrap();
        let s3 = real_spherical_harmonic(2, 3, -1).unwrap();
        let scale = 1.0 / std::f64::consts::PI.sqrt();
        for &theta in &[0.0f64, 0.4, 1.3, 2.8, 4.4, 6.0] {
            let x = [theta.cos(), theta.sin()];
            assert_relative_eq!(c3.eval(&x), scale * (3.0 * theta).cos(), epsilon = 1e-13);
            assert_relative_eq!(s3.eval(&x), scale * (3.0 * theta).sin(), epsilon = 1e-13);
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let y = real_spherical_harmonic(3, 4, 3).unwrap();
        let x = [0.6, -0.3, 0.9];
        let h = 1e-5;
        let mut grad = [0.0; 3];
        y.gradient(&x, &mut grad);
        let mut hess = [0.0; 9];
        y.hessian(&x, &mut hess);
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (y.eval(&xp) - y.eval(&xm)) / (2.0 * h);
            assert_relative_eq!(grad[j], fd, max_relative = 1e-8, epsilon = 1e-10);
            let mut gp = [0.0; 3];
            let mut gm = [0.0; 3];
            y.gradient(&xp, &mut gp);
            y.gradient(&xm, &mut gm);
            for k in 0..3 {
                let fd2 = (gp[k] - gm[k]) / (2.0 * h);
                assert_relative_eq!(hess[j * 3 + k], fd2, max_relative = 1e-7, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_order() {
        assert!(real_spherical_harmonic(3, 2, 3).is_err());
        assert!(real_spherical_harmonic(3, 9, 0).is_err());
    }
}
