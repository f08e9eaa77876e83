//! Anisotropy functions on the unit sphere and their derived objects.
//!
//! An [`AnisotropySpec`] is a smooth positive function `γ` on `S^n`
//! (n ∈ {1, 2}), extended 1-homogeneously to the ambient space. The module
//! evaluates γ and its exact ambient derivatives, the tangential operator
//! `A_γ(ν)` (the ambient Hessian of the extension restricted to `ν^⊥`,
//! which equals `Hess_{S^n} γ + γ I`), the Wulff map `ξ(ν) = ∇γ(ν)`, the
//! dual Minkowski norm `γ*(x) = sup_ν ⟨x, ν⟩ / γ(ν)` with its gradient,
//! Fenchel gaps, and the minimum tangential eigenvalue `λ`.

mod dual;
pub(crate) mod families;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::harmonics::{real_spherical_harmonic, HomogeneousPoly};
use crate::surface::SphereGrid;
use crate::{Error, Result};

use dual::DualTable;
use families::{dot, norm};

pub(crate) use dual::{dual_norm_batch, WarmDual};

/// Unit-direction tolerance for operations that require `|ν| = 1`.
const UNIT_TOL: f64 = 1e-10;

/// Analytic anisotropy families.
#[derive(Debug, Clone)]
pub enum AnisotropyFamily {
    /// γ ≡ 1 on the sphere; the extension is the Euclidean norm.
    Isotropic,
    /// γ(x) = √(xᵀQx) for a symmetric positive-definite `Q`.
    Ellipsoid { q: DMatrix<f64> },
    /// Smoothed ℓ^m gauge: γ(x) = (Σᵢ (xᵢ² + δ²|x|²/(n+1))^{m/2})^{1/m}.
    ///
    /// The regularizer δ keeps γ smooth where a coordinate vanishes; the
    /// pure ℓ^m gauge is not.
    SmoothedLp { exponent: f64, regularizer: f64 },
    /// γ(ν) = base_radius + amplitude · Y_{degree,order}(ν) with a real
    /// orthonormal spherical harmonic Y.
    HarmonicPerturbation {
        base_radius: f64,
        amplitude: f64,
        degree: u32,
        order: i32,
    },
}

/// A smooth positive anisotropy on `S^n` with exact ambient derivatives.
///
/// JSON schema (strict; unknown fields are rejected):
/// ```json
/// {"family": "isotropic", "n": 2}
/// {"family": "ellipsoid", "n": 2, "q": [[4,0,0],[0,1,0],[0,0,1]]}
/// {"family": "smoothed_lp", "n": 2, "exponent": 4.0, "regularizer": 0.05}
/// {"family": "harmonic", "n": 2, "base_radius": 1.0, "amplitude": 0.1,
///  "degree": 2, "order": 0}
/// ```
/// `regularizer` defaults to 0.05 when omitted.
#[derive(Debug, Clone)]
pub struct AnisotropySpec {
    n: usize,
    family: AnisotropyFamily,
    harmonic: Option<HomogeneousPoly>,
    dual_table: OnceLock<DualTable>,
}

impl AnisotropySpec {
    /// γ ≡ 1 (the Euclidean case).
    pub fn isotropic(n: usize) -> Result<Self> {
        Self::new(n, AnisotropyFamily::Isotropic)
    }

    /// γ(x) = √(xᵀQx); `q` must be symmetric positive-definite of size
    /// (n+1)×(n+1).
    pub fn ellipsoid(n: usize, q: DMatrix<f64>) -> Result<Self> {
        Self::new(n, AnisotropyFamily::Ellipsoid { q })
    }

    /// Smoothed ℓ^`exponent` gauge with regularizer δ = `regularizer`.
    pub fn smoothed_lp(n: usize, exponent: f64, regularizer: f64) -> Result<Self> {
        Self::new(
            n,
            AnisotropyFamily::SmoothedLp {
                exponent,
                regularizer,
            },
        )
    }

    /// base_radius + amplitude · Y_{degree,order}.
    pub fn harmonic(
        n: usize,
        base_radius: f64,
        amplitude: f64,
        degree: u32,
        order: i32,
    ) -> Result<Self> {
        Self::new(
            n,
            AnisotropyFamily::HarmonicPerturbation {
                base_radius,
                amplitude,
                degree,
                order,
            },
        )
    }

    pub fn new(n: usize, family: AnisotropyFamily) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::UnsupportedDimension { n });
        }
        let dim = n + 1;
        let harmonic = match &family {
            AnisotropyFamily::Ellipsoid { q } => {
                if q.nrows() != dim || q.ncols() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: q.nrows(),
                    });
                }
                let defect = (q - q.transpose()).norm();
                if defect > 1e-12 * q.norm().max(1.0) {
                    return Err(Error::invalid("q", "matrix is not symmetric"));
                }
                if q.clone().cholesky().is_none() {
                    return Err(Error::invalid("q", "matrix is not positive-definite"));
                }
                None
            }
            AnisotropyFamily::SmoothedLp {
                exponent,
                regularizer,
            } => {
                if *exponent < 2.0 || !exponent.is_finite() {
                    return Err(Error::invalid("exponent", "must be a real >= 2"));
                }
                if *regularizer <= 0.0 || !regularizer.is_finite() {
                    return Err(Error::invalid("regularizer", "must be positive"));
                }
                None
            }
            AnisotropyFamily::HarmonicPerturbation {
                base_radius,
                amplitude,
                degree,
                order,
            } => {
                if *base_radius <= 0.0 || !base_radius.is_finite() {
                    return Err(Error::invalid("base_radius", "must be positive"));
                }
                if !amplitude.is_finite() {
                    return Err(Error::invalid("amplitude", "must be finite"));
                }
                Some(real_spherical_harmonic(dim, *degree, *order)?)
            }
            AnisotropyFamily::Isotropic => None,
        };
        let spec = AnisotropySpec {
            n,
            family,
            harmonic,
            dual_table: OnceLock::new(),
        };
        spec.check_positive()?;
        Ok(spec)
    }

    /// Sampled positivity check (dense directional sweep); γ must be > 0 on
    /// the whole sphere for the spec to be admissible at all.
    fn check_positive(&self) -> Result<()> {
        for nu in probe_directions(self.n) {
            let g = self.gamma_kernel(&nu);
            if !(g > 0.0) {
                return Err(Error::invalid(
                    "family",
                    format!("gamma is non-positive ({g:.3e}) at direction {nu:?}"),
                ));
            }
        }
        Ok(())
    }

    /// Hypersurface dimension n.
    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Ambient dimension n + 1.
    pub fn ambient_dim(&self) -> usize {
        self.n + 1
    }

    pub fn family(&self) -> &AnisotropyFamily {
        &self.family
    }

    /// The 1-homogeneous extension γ(x) = |x| γ(x/|x|).
    pub fn gamma_value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        if norm(x.as_slice()) == 0.0 {
            return Err(Error::ZeroVector { op: "gamma_value" });
        }
        Ok(self.gamma_kernel(x.as_slice()))
    }

    /// Ambient gradient ∇γ(x) of the extension (0-homogeneous).
    pub fn gamma_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        if norm(x.as_slice()) == 0.0 {
            return Err(Error::ZeroVector {
                op: "gamma_gradient",
            });
        }
        let mut out = vec![0.0; x.len()];
        self.gamma_grad_kernel(x.as_slice(), &mut out);
        Ok(DVector::from_vec(out))
    }

    /// Ambient Hessian ∇²γ(x) of the extension ((−1)-homogeneous).
    pub fn gamma_hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x.len())?;
        if norm(x.as_slice()) == 0.0 {
            return Err(Error::ZeroVector { op: "gamma_hessian" });
        }
        let d = x.len();
        let mut out = vec![0.0; d * d];
        self.gamma_hess_kernel(x.as_slice(), &mut out);
        Ok(DMatrix::from_row_slice(d, d, &out))
    }

    /// The operator A_γ(ν) on ν^⊥ in a stated orthonormal basis.
    pub fn a_gamma(&self, nu: &DVector<f64>) -> Result<TangentOperator> {
        self.check_dim(nu.len())?;
        check_unit(nu.as_slice())?;
        let d = nu.len();
        let mut hess = [0.0f64; 9];
        self.gamma_hess_kernel(nu.as_slice(), &mut hess);
        let basis = tangent_basis(nu.as_slice());
        let k = self.n;
        let mut matrix = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                let mut v = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        v += basis[a][i] * hess[i * d + j] * basis[b][j];
                    }
                }
                matrix[(a, b)] = v;
            }
        }
        Ok(TangentOperator {
            base_direction: nu.clone(),
            basis: basis
                .iter()
                .map(|t| DVector::from_column_slice(&t[..d]))
                .collect(),
            matrix,
        })
    }

    /// Minimum tangential eigenvalue of A_γ over the grid nodes, with the
    /// minimizing direction. A positive value certifies sampled convexity; a
    /// non-positive one is returned as a witness rather than an error.
    pub fn check_convexity(&self, grid: &SphereGrid) -> ConvexityCheck {
        assert_eq!(grid.dimension(), self.n, "grid/spec dimension mismatch");
        let mut min_eigenvalue = f64::INFINITY;
        let mut witness_index = 0;
        for (i, node) in grid.nodes_flat().chunks_exact(self.n + 1).enumerate() {
            let v = self.min_tangential_eig(node);
            if v < min_eigenvalue {
                min_eigenvalue = v;
                witness_index = i;
            }
        }
        ConvexityCheck {
            min_eigenvalue,
            witness: grid.node(witness_index),
            witness_index,
        }
    }

    /// Wulff point ξ(ν) = γ(ν)ν + ∇_{S^n}γ(ν), computed as the ambient
    /// gradient of the extension at unit ν (Euler identity).
    pub fn wulff_point(&self, nu: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(nu.len())?;
        check_unit(nu.as_slice())?;
        let mut out = vec![0.0; nu.len()];
        self.gamma_grad_kernel(nu.as_slice(), &mut out);
        Ok(DVector::from_vec(out))
    }

    /// Dual Minkowski norm γ*(x) = sup_{|ν|=1} ⟨x, ν⟩ / γ(ν).
    ///
    /// Dense seeding over a fixed direction table followed by projected
    /// Newton ascent from the best seeds. γ*(0) = 0.
    pub fn dual_norm(&self, x: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.ambient_dim(), "dual_norm dimension mismatch");
        self.dual_norm_slice(x.as_slice())
    }

    pub(crate) fn dual_norm_slice(&self, x: &[f64]) -> f64 {
        dual::dual_norm_value(self, x)
    }

    /// Maximizing direction ν* of the dual norm and the gradient
    /// ∇γ*(x) = ν*/γ(ν*), with a flag for numerically non-unique maximizers.
    pub fn dual_norm_gradient(&self, x: &DVector<f64>) -> Result<DualGradient> {
        self.check_dim(x.len())?;
        if norm(x.as_slice()) == 0.0 {
            return Err(Error::ZeroVector {
                op: "dual_norm_gradient",
            });
        }
        Ok(dual::dual_norm_gradient(self, x.as_slice()))
    }

    /// Fenchel gap γ*(x)·γ(y) − ⟨x, y⟩ ≥ 0, zero exactly when y points along
    /// the normal of the Wulff shape at x/γ*(x).
    pub fn fenchel_gap(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        self.check_dim(y.len())?;
        if norm(y.as_slice()) == 0.0 {
            return Err(Error::ZeroVector { op: "fenchel_gap" });
        }
        let gamma_y = self.gamma_kernel(y.as_slice());
        Ok(self.dual_norm_slice(x.as_slice()) * gamma_y - dot(x.as_slice(), y.as_slice()))
    }

    /// λ = min over ν and unit u ⊥ ν of ⟨A_γ(ν)u, u⟩: grid sweep plus local
    /// compass refinement around the discrete minimizer.
    ///
    /// Rejects anisotropies whose sampled convexity check fails.
    pub fn lambda_min(&self, grid: &SphereGrid) -> Result<f64> {
        let check = self.check_convexity(grid);
        if check.min_eigenvalue <= 0.0 {
            return Err(Error::NotConvex {
                min_eigenvalue: check.min_eigenvalue,
                witness: check.witness.as_slice().to_vec(),
            });
        }
        let d = self.ambient_dim();
        let mut nu = check.witness.as_slice().to_vec();
        let mut best = check.min_eigenvalue;
        let mut step = std::f64::consts::PI / grid.resolution() as f64;
        while step > 1e-7 {
            let basis = tangent_basis(&nu);
            let mut improved = false;
            let candidates: Vec<[f64; 3]> = if self.n == 1 {
                vec![basis[0], [-basis[0][0], -basis[0][1], 0.0]]
            } else {
                (0..8)
                    .map(|k| {
                        let ang = k as f64 * std::f64::consts::FRAC_PI_4;
                        let (s, c) = ang.sin_cos();
                        let mut dir = [0.0; 3];
                        for i in 0..d {
                            dir[i] = c * basis[0][i] + s * basis[1][i];
                        }
                        dir
                    })
                    .collect()
            };
            for dir in candidates {
                let mut cand = [0.0f64; 3];
                for i in 0..d {
                    cand[i] = nu[i] + step * dir[i];
                }
                let len = norm(&cand[..d]);
                for c in cand[..d].iter_mut() {
                    *c /= len;
                }
                let v = self.min_tangential_eig(&cand[..d]);
                if v < best {
                    best = v;
                    nu.copy_from_slice(&cand[..d]);
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Ok(best)
    }

    /// Smallest eigenvalue of A_γ(ν) restricted to ν^⊥.
    pub(crate) fn min_tangential_eig(&self, nu: &[f64]) -> f64 {
        let d = nu.len();
        let mut hess = [0.0f64; 9];
        self.gamma_hess_kernel(nu, &mut hess);
        let basis = tangent_basis(nu);
        let quad = |a: &[f64; 3], b: &[f64; 3]| {
            let mut v = 0.0;
            for i in 0..d {
                for j in 0..d {
                    v += a[i] * hess[i * d + j] * b[j];
                }
            }
            v
        };
        if self.n == 1 {
            quad(&basis[0], &basis[0])
        } else {
            let a = quad(&basis[0], &basis[0]);
            let b = quad(&basis[0], &basis[1]);
            let c = quad(&basis[1], &basis[1]);
            0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
        }
    }

    pub(crate) fn dual_table(&self) -> &DualTable {
        self.dual_table.get_or_init(|| DualTable::build(self))
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: len,
            });
        }
        Ok(())
    }
}

/// A linear operator on the tangent plane ν^⊥, stored in a stated
/// orthonormal basis of ν^⊥.
///
/// `A_γ` and the shape operator are symmetric in such a basis; the
/// anisotropic shape operator `S_γ = A_γ ∘ S` generally is not (it is
/// similar to the symmetric `A_γ^{1/2} S A_γ^{1/2}`, so its spectrum is
/// still real).
#[derive(Debug, Clone)]
pub struct TangentOperator {
    /// The direction ν whose orthogonal complement carries the operator.
    pub base_direction: DVector<f64>,
    /// Orthonormal basis of ν^⊥ (n vectors).
    pub basis: Vec<DVector<f64>>,
    /// Operator matrix in that basis.
    pub matrix: DMatrix<f64>,
}

impl TangentOperator {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// ‖M − Mᵀ‖ / ‖M‖ (0 for exactly symmetric matrices).
    pub fn symmetry_defect(&self) -> f64 {
        let m = &self.matrix;
        let defect = (m - m.transpose()).norm();
        let scale = m.norm();
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_eigenvalue(&self) -> f64 {
        match self.matrix.nrows() {
            1 => self.matrix[(0, 0)],
            2 => {
                let a = self.matrix[(0, 0)];
                let b = 0.5 * (self.matrix[(0, 1)] + self.matrix[(1, 0)]);
                let c = self.matrix[(1, 1)];
                0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
            }
            _ => unreachable!("tangent operators are 1x1 or 2x2"),
        }
    }
}

/// Result of the sampled convexity sweep.
#[derive(Debug, Clone)]
pub struct ConvexityCheck {
    /// Minimum over grid nodes of the smallest tangential eigenvalue of A_γ.
    pub min_eigenvalue: f64,
    /// Direction attaining the minimum.
    pub witness: DVector<f64>,
    /// Grid index of the witness.
    pub witness_index: usize,
}

/// Maximizing direction and gradient of the dual norm at a point.
#[derive(Debug, Clone)]
pub struct DualGradient {
    /// The maximizing direction ν* (unit normal of the Wulff shape at
    /// x/γ*(x)).
    pub direction: DVector<f64>,
    /// ∇γ*(x) = ν*/γ(ν*).
    pub gradient: DVector<f64>,
    /// True when a second, angularly distinct local maximizer attains the
    /// supremum within 1e-9 relative.
    pub multiplicity: bool,
}

fn check_unit(nu: &[f64]) -> Result<()> {
    let r = norm(nu);
    if (r - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit { norm: r });
    }
    Ok(())
}

/// Deterministic orthonormal basis of ν^⊥ (1 vector for ambient R², 2 for
/// R³). Vectors are padded to length 3; only the first `dim` entries are
/// meaningful.
pub(crate) fn tangent_basis(nu: &[f64]) -> [[f64; 3]; 2] {
    let d = nu.len();
    if d == 2 {
        [[-nu[1], nu[0], 0.0], [0.0, 0.0, 0.0]]
    } else {
        let mut axis = 0;
        for k in 1..3 {
            if nu[k].abs() < nu[axis].abs() {
                axis = k;
            }
        }
        let mut t1 = [0.0f64; 3];
        t1[axis] = 1.0;
        let proj = nu[axis];
        for i in 0..3 {
            t1[i] -= proj * nu[i];
        }
        let len = norm(&t1);
        for t in &mut t1 {
            *t /= len;
        }
        let t2 = [
            nu[1] * t1[2] - nu[2] * t1[1],
            nu[2] * t1[0] - nu[0] * t1[2],
            nu[0] * t1[1] - nu[1] * t1[0],
        ];
        [t1, t2]
    }
}

/// Dense direction sample used for construction-time positivity probing.
fn probe_directions(n: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    if n == 1 {
        for k in 0..720 {
            let th = 2.0 * std::f64::consts::PI * k as f64 / 720.0;
            dirs.push(vec![th.cos(), th.sin()]);
        }
    } else {
        for i in 0..48 {
            let th = std::f64::consts::PI * (i as f64 + 0.5) / 48.0;
            for j in 0..96 {
                let ph = 2.0 * std::f64::consts::PI * j as f64 / 96.0;
                dirs.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            }
        }
    }
    dirs
}

// --- JSON schema (strict) ---------------------------------------------------

impl Serialize for AnisotropySpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AnisotropySpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        AnisotropySpec::from_json_value(&value).map_err(serde::de::Error::custom)
    }
}

impl AnisotropySpec {
    pub fn to_json_value(&self) -> serde_json::Value {
        use serde_json::{json, Value};
        let mut obj = match &self.family {
            AnisotropyFamily::Isotropic => json!({ "family": "isotropic" }),
            AnisotropyFamily::Ellipsoid { q } => {
                let rows: Vec<Vec<f64>> = (0..q.nrows())
                    .map(|i| (0..q.ncols()).map(|j| q[(i, j)]).collect())
                    .collect();
                json!({ "family": "ellipsoid", "q": rows })
            }
            AnisotropyFamily::SmoothedLp {
                exponent,
                regularizer,
            } => json!({
                "family": "smoothed_lp",
                "exponent": exponent,
                "regularizer": regularizer,
            }),
            AnisotropyFamily::HarmonicPerturbation {
                base_radius,
                amplitude,
                degree,
                order,
            } => json!({
                "family": "harmonic",
                "base_radius": base_radius,
                "amplitude": amplitude,
                "degree": degree,
                "order": order,
            }),
        };
        obj.as_object_mut()
            .expect("object")
            .insert("n".into(), Value::from(self.n as u64));
        obj
    }

    pub fn from_json_value(value: &serde_json::Value) -> std::result::Result<Self, String> {
        let obj = value
            .as_object()
            .ok_or_else(|| "anisotropy must be a JSON object".to_string())?;
        let family = obj
            .get("family")
            .and_then(|v| v.as_str())
            .ok_or_else(|| "missing string field `family`".to_string())?;
        let n = obj
            .get("n")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| "missing integer field `n`".to_string())? as usize;
        let allowed: &[&str] = match family {
            "isotropic" => &["family", "n"],
            "ellipsoid" => &["family", "n", "q"],
            "smoothed_lp" => &["family", "n", "exponent", "regularizer"],
            "harmonic" => &["family", "n", "base_radius", "amplitude", "degree", "order"],
            other => return Err(format!("unknown anisotropy family `{other}`")),
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(format!("unknown field `{key}` for family `{family}`"));
            }
        }
        let get_f64 = |key: &str| -> std::result::Result<f64, String> {
            obj.get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| format!("missing numeric field `{key}`"))
        };
        let spec = match family {
            "isotropic" => AnisotropySpec::isotropic(n),
            "ellipsoid" => {
                let rows = obj
                    .get("q")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| "missing matrix field `q`".to_string())?;
                let dim = n + 1;
                if rows.len() != dim {
                    return Err(format!("`q` must have {dim} rows"));
                }
                let mut data = Vec::with_capacity(dim * dim);
                for row in rows {
                    let row = row
                        .as_array()
                        .ok_or_else(|| "rows of `q` must be arrays".to_string())?;
                    if row.len() != dim {
                        return Err(format!("`q` must have {dim} columns"));
                    }
                    for v in row {
                        data.push(v.as_f64().ok_or_else(|| "non-numeric entry in `q`".to_string())?);
                    }
                }
                AnisotropySpec::ellipsoid(n, DMatrix::from_row_slice(dim, dim, &data))
            }
            "smoothed_lp" => {
                let exponent = get_f64("exponent")?;
                let regularizer = match obj.get("regularizer") {
                    Some(v) => v
                        .as_f64()
                        .ok_or_else(|| "non-numeric `regularizer`".to_string())?,
                    None => 0.05,
                };
                AnisotropySpec::smoothed_lp(n, exponent, regularizer)
            }
            "harmonic" => {
                let degree = obj
                    .get("degree")
                    .and_then(|v| v.as_u64())
                    .ok_or_else(|| "missing integer field `degree`".to_string())?
                    as u32;
                let order = obj
                    .get("order")
                    .and_then(|v| v.as_i64())
                    .ok_or_else(|| "missing integer field `order`".to_string())?
                    as i32;
                AnisotropySpec::harmonic(n, get_f64("base_radius")?, get_f64("amplitude")?, degree, order)
            }
            _ => unreachable!(),
        };
        spec.map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::{dmatrix, dvector};

    use crate::surface::make_grid;

    fn diag411() -> AnisotropySpec {
        AnisotropySpec::ellipsoid(2, DMatrix::from_diagonal(&dvector![4.0, 1.0, 1.0])).unwrap()
    }

    #[test]
    fn gamma_value_examples() {
        let iso = AnisotropySpec::isotropic(2).unwrap();
        assert_abs_diff_eq!(
            iso.gamma_value(&dvector![3.0, 4.0, 0.0]).unwrap(),
            5.0,
            epsilon = 1e-14
        );
        let ell = diag411();
        assert_abs_diff_eq!(
            ell.gamma_value(&dvector![1.0, 0.0, 0.0]).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        assert!(iso.gamma_value(&dvector![0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn gamma_is_one_homogeneous() {
        for spec in [
            AnisotropySpec::smoothed_lp(2, 4.0, 0.05).unwrap(),
            AnisotropySpec::harmonic(2, 1.0, 0.1, 2, 1).unwrap(),
        ] {
            let x = dvector![0.3, -0.7, 0.61];
            let g1 = spec.gamma_value(&x).unwrap();
            let g2 = spec.gamma_value(&(2.0 * &x)).unwrap();
            assert_relative_eq!(g2 / g1, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn a_gamma_examples() {
        let iso = AnisotropySpec::isotropic(2).unwrap();
        let op = iso.a_gamma(&dvector![0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(op.matrix[(0, 0)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(op.matrix[(1, 1)], 1.0, max_relative = 1e-12);
        assert_abs_diff_eq!(op.matrix[(0, 1)], 0.0, epsilon = 1e-12);

        let ell = diag411();
        let op = ell.a_gamma(&dvector![1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(op.matrix[(0, 0)], 0.5, max_relative = 1e-12);
        assert_relative_eq!(op.matrix[(1, 1)], 0.5, max_relative = 1e-12);
        assert_abs_diff_eq!(op.matrix[(0, 1)], 0.0, epsilon = 1e-12);

        // Zero-amplitude harmonic perturbation is the constant base_radius.
        let flat = AnisotropySpec::harmonic(2, 1.7, 0.0, 2, 0).unwrap();
        let op = flat.a_gamma(&dvector![0.6, 0.8, 0.0]).unwrap();
        assert_relative_eq!(op.matrix[(0, 0)], 1.7, max_relative = 1e-12);
        assert_relative_eq!(op.matrix[(1, 1)], 1.7, max_relative = 1e-12);
        assert!(op.symmetry_defect() <= 1e-12);
    }

    #[test]
    fn a_gamma_matches_finite_difference_hessian_restriction() {
        // Independent oracle: central finite differences of γ restricted to
        // the tangent plane at e₁.
        let ell = diag411();
        let nu = dvector![1.0, 0.0, 0.0];
        let h = 1e-5;
        let gamma = |x: &DVector<f64>| ell.gamma_value(x).unwrap();
        let mut fd = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let mut xpp = nu.clone();
                let mut xpm = nu.clone();
                let mut xmp = nu.clone();
                let mut xmm = nu.clone();
                xpp[i] += h;
                xpp[j] += h;
                xpm[i] += h;
                xpm[j] -= h;
                xmp[i] -= h;
                xmp[j] += h;
                xmm[i] -= h;
                xmm[j] -= h;
                fd[(i, j)] = (gamma(&xpp) - gamma(&xpm) - gamma(&xmp) + gamma(&xmm)) / (4.0 * h * h);
            }
        }
        let op = ell.a_gamma(&nu).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let mut v = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        v += op.basis[a][i] * fd[(i, j)] * op.basis[b][j];
                    }
                }
                assert_relative_eq!(op.matrix[(a, b)], v, max_relative = 1e-5, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn a_gamma_agrees_with_intrinsic_sphere_hessian() {
        // A_γ[t,t] = d²/ds² γ(geodesic toward t)(0) + γ(ν): intrinsic
        // finite differences along great circles for Isotropic + Ellipsoid.
        for spec in [AnisotropySpec::isotropic(2).unwrap(), diag411()] {
            let nu = dvector![0.48, -0.6, 0.64];
            let nu = &nu / nu.norm();
            let op = spec.a_gamma(&nu).unwrap();
            let h = 1e-4;
            for (a, b, coeff) in [(0, 0, 1.0), (1, 1, 1.0)] {
                let t = &op.basis[a] * coeff;
                let geo = |s: f64| {
                    let p = nu.clone() * s.cos() + &t * s.sin();
                    spec.gamma_value(&p).unwrap()
                };
                let fd2 = (geo(h) - 2.0 * geo(0.0) + geo(-h)) / (h * h);
                let intrinsic = fd2 + spec.gamma_value(&nu.clone()).unwrap();
                assert_relative_eq!(op.matrix[(a, b)], intrinsic, max_relative = 1e-5, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn convexity_examples() {
        let grid = make_grid(2, 32).unwrap();
        let iso = AnisotropySpec::isotropic(2).unwrap();
        let check = iso.check_convexity(&grid);
        assert_relative_eq!(check.min_eigenvalue, 1.0, max_relative = 1e-12);

        let ell = diag411();
        assert!(ell.check_convexity(&grid).min_eigenvalue > 0.0);

        // Large harmonic amplitude breaks convexity; located by bisection.
        let mut lo = 0.0f64;
        let mut hi = 1.2f64;
        assert!(
            AnisotropySpec::harmonic(2, 1.0, hi, 2, 0)
                .unwrap()
                .check_convexity(&grid)
                .min_eigenvalue
                <= 0.0
        );
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            let check = AnisotropySpec::harmonic(2, 1.0, mid, 2, 0)
                .unwrap()
                .check_convexity(&grid);
            if check.min_eigenvalue > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let failing = AnisotropySpec::harmonic(2, 1.0, hi, 2, 0).unwrap();
        let check = failing.check_convexity(&grid);
        assert!(check.min_eigenvalue <= 0.0);
        assert_relative_eq!(check.witness.norm(), 1.0, max_relative = 1e-12);
        assert!(failing.lambda_min(&grid).is_err());
    }

    #[test]
    fn wulff_point_examples() {
        let iso = AnisotropySpec::isotropic(2).unwrap();
        let nu = dvector![0.0, 0.6, 0.8];
        assert_relative_eq!(iso.wulff_point(&nu).unwrap(), nu, max_relative = 1e-14);

        let ell = diag411();
        let xi = ell.wulff_point(&dvector![1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(xi, dvector![2.0, 0.0, 0.0], max_relative = 1e-14);

        assert!(iso.wulff_point(&dvector![1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn lambda_min_examples() {
        let grid = make_grid(2, 32).unwrap();
        let iso = AnisotropySpec::isotropic(2).unwrap();
        assert_relative_eq!(iso.lambda_min(&grid).unwrap(), 1.0, max_relative = 1e-10);

        // Dense-sweep oracle: 10x finer grid, no refinement.
        let ell = diag411();
        let lambda = ell.lambda_min(&grid).unwrap();
        assert!(lambda > 0.0 && lambda < 1.0);
        let dense = make_grid(2, 320).unwrap();
        let sweep = ell.check_convexity(&dense).min_eigenvalue;
        assert_relative_eq!(lambda, sweep, max_relative = 1e-4);

        // Continuity to the constant case.
        for amp in [1e-3, 1e-5] {
            let spec = AnisotropySpec::harmonic(2, 1.3, amp, 2, 0).unwrap();
            let lam = spec.lambda_min(&grid).unwrap();
            assert_relative_eq!(lam, 1.3, max_relative = 20.0 * amp);
        }
    }

    #[test]
    fn spec_json_round_trip_is_strict() {
        let spec = diag411();
        let text = serde_json::to_string(&spec).unwrap();
        let back: AnisotropySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);

        let bad = r#"{"family":"isotropic","n":2,"extra":1}"#;
        assert!(serde_json::from_str::<AnisotropySpec>(bad).is_err());
        let bad_family = r#"{"family":"crystal","n":2}"#;
        assert!(serde_json::from_str::<AnisotropySpec>(bad_family).is_err());
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(AnisotropySpec::isotropic(3).is_err());
        assert!(AnisotropySpec::ellipsoid(2, dmatrix![1.0, 0.0; 0.0, 1.0]).is_err());
        assert!(
            AnisotropySpec::ellipsoid(2, DMatrix::from_diagonal(&dvector![1.0, -1.0, 1.0]))
                .is_err()
        );
        assert!(AnisotropySpec::smoothed_lp(2, 1.5, 0.05).is_err());
        assert!(AnisotropySpec::harmonic(2, 1.0, 5.0, 2, 0).is_err()); // γ ≤ 0 somewhere
    }
}
