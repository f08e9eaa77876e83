//! Verification quantities for a (γ, Σ) pair: the Hsiung–Minkowski residual,
//! curvature–radius products with their ≥ 1 margins, the pinching quantity,
//! radius and mean-curvature deviation norms, the §-exponents, Hausdorff
//! distances to rescaled Wulff shapes, and full machine-readable reports.

mod hausdorff;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::anisotropy::{dual_norm_batch, AnisotropySpec};
use crate::radius::{extrinsic_radius_with, RadiusOptions, RadiusSolution};
use crate::surface::{make_grid, sample_positions, sample_surface, SampledSurface, SurfaceSpec};
use crate::{Error, Result};

/// Hard invariant thresholds used by report gating (also serialized with
/// every report).
pub const HK_MARGIN: f64 = 1e-6;
pub const PINCHING_FLOOR: f64 = 1e-8;
pub const HM_THRESHOLD: f64 = 1e-4;

/// Resampling factor for Hausdorff distances inside reports.
pub const HAUSDORFF_REFINEMENT: usize = 4;

/// |(1/F(Σ)) ∫ (γ(N) + H_γ ⟨X − x₀, N⟩)|: the residual of the integral
/// identity that vanishes for every closed hypersurface.
pub fn hsiung_minkowski_residual(s: &SampledSurface, x0: &DVector<f64>) -> f64 {
    let d = s.ambient_dim();
    let positions = s.positions_flat();
    let normals = s.normals_flat();
    let mut sum = 0.0;
    let mut energy = 0.0;
    for i in 0..s.len() {
        let mut inner = 0.0;
        for k in 0..d {
            inner += (positions[i * d + k] - x0[k]) * normals[i * d + k];
        }
        let w = s.area_weights()[i];
        sum += (s.gamma_n_values()[i] + s.h_gamma_values()[i] * inner) * w;
        energy += s.gamma_n_values()[i] * w;
    }
    (sum / energy).abs()
}

/// The two curvature–radius products of the main inequality.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HkProducts {
    /// ‖H_γ‖₂ · ‖γ*(X − X₀)‖₂ (≥ 1, equality on Wulff shapes).
    pub l2: f64,
    /// ‖H_γ‖_∞ · R̄_ext (≥ 1, equality on Wulff shapes).
    pub inf: f64,
}

pub fn hk_products(
    s: &SampledSurface,
    gamma: &AnisotropySpec,
    sol: &RadiusSolution,
) -> HkProducts {
    let values = dual_norm_batch(gamma, s.positions_flat(), sol.center.as_slice());
    hk_products_from(s, &values, sol)
}

fn hk_products_from(s: &SampledSurface, dual_values: &[f64], sol: &RadiusSolution) -> HkProducts {
    let h2 = s.lp_norm(s.h_gamma_values(), 2.0).expect("p = 2");
    let hinf = s.lp_norm(s.h_gamma_values(), f64::INFINITY).expect("p = inf");
    let v2 = s.lp_norm(dual_values, 2.0).expect("p = 2");
    HkProducts {
        l2: h2 * v2,
        inf: hinf * sol.radius,
    }
}

/// Smallest ε with ‖H_γ‖_p · ‖γ*(X − X₀)‖₂ ≤ 1 + ε; requires p > 2.
pub fn pinching_epsilon(
    s: &SampledSurface,
    gamma: &AnisotropySpec,
    sol: &RadiusSolution,
    p: f64,
) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::BadExponent {
            message: format!("pinching requires p > 2, got {p}"),
        });
    }
    let values = dual_norm_batch(gamma, s.positions_flat(), sol.center.as_slice());
    pinching_from(s, &values, p)
}

fn pinching_from(s: &SampledSurface, dual_values: &[f64], p: f64) -> Result<f64> {
    let hp = s.lp_norm(s.h_gamma_values(), p)?;
    let v2 = s.lp_norm(dual_values, 2.0)?;
    Ok(hp * v2 - 1.0)
}

/// Nondimensional radius deviation ‖H_γ‖₂ · ‖γ*(X − X₀) − 1/‖H_γ‖₂‖_∞.
pub fn radius_deviation(s: &SampledSurface, gamma: &AnisotropySpec, sol: &RadiusSolution) -> f64 {
    let values = dual_norm_batch(gamma, s.positions_flat(), sol.center.as_slice());
    radius_deviation_from(s, &values)
}

fn radius_deviation_from(s: &SampledSurface, dual_values: &[f64]) -> f64 {
    let h2 = s.lp_norm(s.h_gamma_values(), 2.0).expect("p = 2");
    let target = 1.0 / h2;
    let max_dev = dual_values
        .iter()
        .map(|v| (v - target).abs())
        .fold(0.0f64, f64::max);
    h2 * max_dev
}

/// Mean-curvature deviation ‖H_γ − ‖H_γ‖₂‖_r / ‖H_γ‖₂ (the statement's
/// form); see [`mc_deviation_abs`] for the |H_γ| variant used in the proof.
pub fn mc_deviation(s: &SampledSurface, r: f64) -> Result<f64> {
    mc_deviation_impl(s, r, false)
}

/// ‖|H_γ| − ‖H_γ‖₂‖_r / ‖H_γ‖₂.
pub fn mc_deviation_abs(s: &SampledSurface, r: f64) -> Result<f64> {
    mc_deviation_impl(s, r, true)
}

fn mc_deviation_impl(s: &SampledSurface, r: f64, absolute: bool) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::BadExponent {
            message: format!("mc_deviation requires r >= 1, got {r}"),
        });
    }
    let h2 = s.lp_norm(s.h_gamma_values(), 2.0)?;
    let centered: Vec<f64> = s
        .h_gamma_values()
        .iter()
        .map(|h| if absolute { h.abs() - h2 } else { h - h2 })
        .collect();
    Ok(s.lp_norm(&centered, r)? / h2)
}

/// Exponents of the iteration argument: β = nq/(2(q−n)) and α = 1/(2(1+β));
/// requires q > n.
pub fn exponents(n: usize, q: f64) -> Result<ExponentPair> {
    if !(q > n as f64) {
        return Err(Error::BadExponent {
            message: format!("exponents require q > n, got q = {q}, n = {n}"),
        });
    }
    let beta = n as f64 * q / (2.0 * (q - n as f64));
    Ok(ExponentPair {
        beta,
        alpha: 1.0 / (2.0 * (1.0 + beta)),
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExponentPair {
    pub beta: f64,
    pub alpha: f64,
}

/// Hausdorff distance between the sampled surface and `scale·W_γ + center`,
/// both as dense point clouds, with the sampling spacing it is accurate to.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HausdorffEstimate {
    pub distance: f64,
    /// Largest parametric-neighbor spacing among the two clouds; the
    /// distance is accurate to O(spacing).
    pub spacing: f64,
}

pub fn hausdorff_distance(
    s: &SampledSurface,
    gamma: &AnisotropySpec,
    scale: f64,
    center: &DVector<f64>,
) -> Result<HausdorffEstimate> {
    if !(scale > 0.0) {
        return Err(Error::invalid("scale", "must be positive"));
    }
    let grid = make_grid(s.dimension(), s.resolution())?;
    let wulff = SurfaceSpec::wulff_shape(s.dimension(), scale, center.clone())?;
    let (wulff_points, wulff_spacing) = sample_positions(&wulff, gamma, &grid)?;
    let spacing = s.spacing().max(wulff_spacing);
    let distance = hausdorff::symmetric_hausdorff(
        s.positions_flat(),
        &wulff_points,
        s.ambient_dim(),
        spacing,
    );
    Ok(HausdorffEstimate { distance, spacing })
}

/// Per-r mean-curvature deviation entry of a report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McDeviation {
    pub r: f64,
    /// ‖H_γ − ‖H_γ‖₂‖_r / ‖H_γ‖₂.
    pub value: f64,
    /// ‖|H_γ| − ‖H_γ‖₂‖_r / ‖H_γ‖₂ (the proof manipulates this variant;
    /// both are reported so the statement/proof discrepancy stays visible).
    pub value_abs: f64,
}

/// Threshold metadata serialized with every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToleranceMeta {
    pub hk_margin: f64,
    pub pinching_floor: f64,
    pub hm_threshold: f64,
    pub radius_objective_tolerance: f64,
    pub dual_seed_nodes: usize,
}

/// All scalar diagnostics for one (γ, Σ) pair at one resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub n: usize,
    pub resolution: usize,
    pub p: f64,
    pub q: f64,
    pub surface_energy: f64,
    pub lambda_min: f64,
    pub extrinsic_radius: f64,
    pub center: Vec<f64>,
    pub radius_iterations: usize,
    pub radius_converged: bool,
    pub norm_h_gamma_l2: f64,
    pub norm_h_gamma_p: f64,
    pub norm_h_gamma_inf: f64,
    pub hm_residual: f64,
    pub hk_product_l2: f64,
    pub hk_product_inf: f64,
    pub pinching_epsilon: f64,
    pub radius_deviation: f64,
    pub mc_deviation: Vec<McDeviation>,
    /// F(Σ)^{1/n} · ‖S_γ‖_q (the quantity bounded by A in the stability
    /// hypothesis).
    pub sg_bound: f64,
    pub sg_bound_limit: Option<f64>,
    pub sg_bound_exceeded: Option<bool>,
    pub beta: f64,
    pub alpha: f64,
    pub hausdorff: f64,
    pub hausdorff_spacing: f64,
    pub hausdorff_refinement: usize,
    pub tolerances: ToleranceMeta,
}

/// One failed hard invariant, in expected/actual form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantViolation {
    pub name: String,
    pub expected: String,
    pub actual: String,
}

impl VerificationReport {
    /// Hard invariants: the ≥ 1 product margins, the pinching floor, and the
    /// Hsiung–Minkowski threshold.
    pub fn hard_violations(&self) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        let mut check = |name: &str, ok: bool, expected: String, actual: String| {
            if !ok {
                out.push(InvariantViolation {
                    name: name.to_string(),
                    expected,
                    actual,
                });
            }
        };
        check(
            "hk_product_l2",
            self.hk_product_l2 >= 1.0 - HK_MARGIN,
            format!(">= {}", 1.0 - HK_MARGIN),
            format!("{:.12e}", self.hk_product_l2),
        );
        check(
            "hk_product_inf",
            self.hk_product_inf >= 1.0 - HK_MARGIN,
            format!(">= {}", 1.0 - HK_MARGIN),
            format!("{:.12e}", self.hk_product_inf),
        );
        check(
            "pinching_epsilon",
            self.pinching_epsilon >= -PINCHING_FLOOR,
            format!(">= -{PINCHING_FLOOR}"),
            format!("{:.12e}", self.pinching_epsilon),
        );
        check(
            "hm_residual",
            self.hm_residual <= HM_THRESHOLD,
            format!("<= {HM_THRESHOLD}"),
            format!("{:.12e}", self.hm_residual),
        );
        out
    }
}

/// Parameters of a full verification run.
#[derive(Debug, Clone)]
pub struct ReportParams {
    /// Pinching exponent, > 2.
    pub p: f64,
    /// Shape-operator integrability exponent, > n.
    pub q: f64,
    /// Deviation exponents, each in [1, p).
    pub r_values: Vec<f64>,
    pub resolution: usize,
    /// Optional bound A for the hypothesis flag F^{1/n}‖S_γ‖_q ≤ A.
    pub sg_limit: Option<f64>,
    /// Seed for the radius solver restarts.
    pub seed: u64,
}

/// Run the whole verification pipeline for one (γ, Σ) pair: sample, solve
/// the extrinsic radius, and compute every report quantity. Deterministic:
/// identical inputs produce byte-identical serialized reports.
pub fn full_report(
    gamma: &AnisotropySpec,
    surface: &SurfaceSpec,
    params: &ReportParams,
) -> Result<VerificationReport> {
    let n = gamma.dimension();
    if surface.dimension() != n {
        return Err(Error::DimensionMismatch {
            expected: gamma.ambient_dim(),
            got: surface.ambient_dim(),
        });
    }
    if !(params.p > 2.0) {
        return Err(Error::BadExponent {
            message: format!("p must exceed 2, got {}", params.p),
        });
    }
    if !(params.q > n as f64) {
        return Err(Error::BadExponent {
            message: format!("q must exceed n = {n}, got {}", params.q),
        });
    }
    for &r in &params.r_values {
        if !(1.0 <= r && r < params.p) {
            return Err(Error::BadExponent {
                message: format!("r values must lie in [1, p); got r = {r}, p = {}", params.p),
            });
        }
    }

    let grid = make_grid(n, params.resolution)?;
    let convexity = gamma.check_convexity(&grid);
    if convexity.min_eigenvalue <= 0.0 {
        return Err(Error::NotConvex {
            min_eigenvalue: convexity.min_eigenvalue,
            witness: convexity.witness.as_slice().to_vec(),
        });
    }
    let lambda = gamma.lambda_min(&grid)?;
    let s = sample_surface(surface, gamma, &grid)?;
    let sol = extrinsic_radius_with(
        &s,
        gamma,
        &RadiusOptions {
            seed: params.seed,
            ..RadiusOptions::default()
        },
    )?;
    let dual_values = dual_norm_batch(gamma, s.positions_flat(), sol.center.as_slice());

    let h2 = s.lp_norm(s.h_gamma_values(), 2.0)?;
    let hp = s.lp_norm(s.h_gamma_values(), params.p)?;
    let hinf = s.lp_norm(s.h_gamma_values(), f64::INFINITY)?;
    let products = hk_products_from(&s, &dual_values, &sol);
    let epsilon = pinching_from(&s, &dual_values, params.p)?;
    let rdev = radius_deviation_from(&s, &dual_values);
    let mut mc = Vec::with_capacity(params.r_values.len());
    for &r in &params.r_values {
        mc.push(McDeviation {
            r,
            value: mc_deviation(&s, r)?,
            value_abs: mc_deviation_abs(&s, r)?,
        });
    }
    let energy = s.surface_energy();
    let sg_q = s.lp_norm(s.s_gamma_frobenius_values(), params.q)?;
    let sg_bound = energy.powf(1.0 / n as f64) * sg_q;
    let exps = exponents(n, params.q)?;

    // Hausdorff versus the rescaled Wulff shape at refined resolution.
    let fine = make_grid(n, HAUSDORFF_REFINEMENT * params.resolution)?;
    let (sigma_points, sigma_spacing) = sample_positions(surface, gamma, &fine)?;
    let wulff = SurfaceSpec::wulff_shape(n, 1.0 / h2, sol.center.clone())?;
    let (wulff_points, wulff_spacing) = sample_positions(&wulff, gamma, &fine)?;
    let spacing = sigma_spacing.max(wulff_spacing);
    let hd = hausdorff::symmetric_hausdorff(&sigma_points, &wulff_points, n + 1, spacing);

    Ok(VerificationReport {
        schema_version: 1,
        n,
        resolution: params.resolution,
        p: params.p,
        q: params.q,
        surface_energy: energy,
        lambda_min: lambda,
        extrinsic_radius: sol.radius,
        center: sol.center.as_slice().to_vec(),
        radius_iterations: sol.iterations,
        radius_converged: sol.converged,
        norm_h_gamma_l2: h2,
        norm_h_gamma_p: hp,
        norm_h_gamma_inf: hinf,
        hm_residual: hsiung_minkowski_residual(&s, &sol.center),
        hk_product_l2: products.l2,
        hk_product_inf: products.inf,
        pinching_epsilon: epsilon,
        radius_deviation: rdev,
        mc_deviation: mc,
        sg_bound,
        sg_bound_limit: params.sg_limit,
        sg_bound_exceeded: params.sg_limit.map(|a| sg_bound > a),
        beta: exps.beta,
        alpha: exps.alpha,
        hausdorff: hd,
        hausdorff_spacing: spacing,
        hausdorff_refinement: HAUSDORFF_REFINEMENT,
        tolerances: ToleranceMeta {
            hk_margin: HK_MARGIN,
            pinching_floor: PINCHING_FLOOR,
            hm_threshold: HM_THRESHOLD,
            radius_objective_tolerance: RadiusOptions::default().objective_tolerance,
            dual_seed_nodes: gamma_dual_seed_count(gamma),
        },
    })
}

fn gamma_dual_seed_count(gamma: &AnisotropySpec) -> usize {
    gamma.dual_table().count
}
