//! Boundary fields and the fixed-point equations they must satisfy.
//!
//! A translation-invariant boundary field `h` is compatible with the kernels
//! when, at every vertex, tracing the successors out of
//! `K* (1 ⊗ h ⊗ ... ⊗ h) K` gives back `h`. Tooth vertices and spine vertices
//! each impose one such equation; a usable field must solve both.

use serde::{Deserialize, Serialize};

use crate::algebra::{
    c, diag2, identity2, max_abs, sandwich, sigma_z, site_trace, LocalOperator, SiteMatrix, C64, EIGEN_TOL,
    HERMITIAN_TOL,
};
use crate::config::Limits;
use crate::error::{Error, Result};
use crate::graph::{self, Vertex};
use crate::kernels::{kernel_l1, kernel_l2, layer_kernel, ModelParams};

/// Absolute tolerance for accepting a residual as zero.
pub const ADMISSIBLE_TOL: f64 = 1e-10;

/// Agreement required between the matrix route and the closed form of each
/// fixed-point map, relative to the size of the map value.
const CLOSED_FORM_TOL: f64 = 1e-12;

fn site_defect(m: &SiteMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

fn check_hermitian(h: &SiteMatrix) -> Result<()> {
    let d = site_defect(h);
    if d > HERMITIAN_TOL {
        return Err(Error::NonHermitian(d));
    }
    Ok(())
}

fn site_positive(m: &SiteMatrix, tol: f64) -> Result<bool> {
    LocalOperator::site(Vertex::ROOT, m).is_positive(tol)
}

/// Boundary matrix `h` (the same at every vertex) and the weight `ω0` of the
/// initial functional `ρ0(a) = Tr(ω0 a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryField {
    pub h: SiteMatrix,
    pub omega0: SiteMatrix,
}

impl BoundaryField {
    pub fn new(h: SiteMatrix, omega0: SiteMatrix) -> Result<Self> {
        check_hermitian(&h)?;
        check_hermitian(&omega0)?;
        if !site_positive(&h, EIGEN_TOL)? {
            return Err(Error::OutOfRange("boundary matrix is not positive semidefinite".into()));
        }
        let low = LocalOperator::site(Vertex::ROOT, &omega0).eigenvalues(HERMITIAN_TOL)?[0];
        if low <= 0.0 {
            return Err(Error::OutOfRange("initial weight is not positive definite".into()));
        }
        Ok(Self { h, omega0 })
    }

    /// `h = (1/τ1) 1`, `ω0 = τ1 1`.
    pub fn disordered(params: &ModelParams) -> Self {
        Self { h: identity2() * c(params.alpha), omega0: identity2() * c(params.tau1) }
    }

    /// Keeps `ω0 = τ1 1` but uses an arbitrary boundary matrix.
    pub fn with_h(params: &ModelParams, h: SiteMatrix) -> Result<Self> {
        Self::new(h, identity2() * c(params.tau1))
    }

    pub fn rho0(&self, a: &SiteMatrix) -> C64 {
        site_trace(&(self.omega0 * a))
    }

    /// `ρ0(h)`, which must equal one.
    pub fn normalization(&self) -> C64 {
        self.rho0(&self.h)
    }
}

/// Value of the tooth fixed-point map, computed on explicit `4 x 4` matrices.
pub fn l1_map(h: &SiteMatrix, beta: f64) -> Result<SiteMatrix> {
    check_hermitian(h)?;
    let v = Vertex::new(0, 1);
    let k = kernel_l1(beta, v);
    let input = LocalOperator::site(v, &identity2()).tensor(&LocalOperator::site(Vertex::new(0, 2), h))?;
    let out = sandwich(&k, &input)?.partial_trace_onto(&[v])?;
    Ok(out.as_site_matrix().expect("single site"))
}

/// `(Tr h - sin 2β Tr σz h) e11 + (Tr h + sin 2β Tr σz h) e22`.
pub fn l1_map_closed(h: &SiteMatrix, beta: f64) -> SiteMatrix {
    let t = site_trace(h);
    let s = site_trace(&(sigma_z() * h));
    let sin2 = c((2.0 * beta).sin());
    SiteMatrix::new(t - sin2 * s, C64::default(), C64::default(), t + sin2 * s)
}

/// Value of the spine fixed-point map, computed on explicit `8 x 8` matrices.
pub fn l2_map(h: &SiteMatrix, params: &ModelParams) -> Result<SiteMatrix> {
    check_hermitian(h)?;
    let v = Vertex::ROOT;
    let k = kernel_l2(params, v)?;
    let input = LocalOperator::product(&[(v, identity2()), (Vertex::new(1, 0), *h), (Vertex::new(0, 1), *h)])?;
    let out = sandwich(&k, &input)?.partial_trace_onto(&[v])?;
    Ok(out.as_site_matrix().expect("single site"))
}

/// `(τ1 Tr(h)^2 + τ2 Tr(σz h)^2) 1 + τ3 Tr(h) Tr(σz h) σz`.
pub fn l2_map_closed(h: &SiteMatrix, params: &ModelParams) -> SiteMatrix {
    let t = site_trace(h);
    let s = site_trace(&(sigma_z() * h));
    identity2() * (t * t * params.tau1 + s * s * params.tau2) + sigma_z() * (t * s * params.tau3)
}

fn cross_check(matrix: &SiteMatrix, closed: &SiteMatrix, what: &'static str) -> Result<()> {
    let deviation = max_abs(&(matrix - closed));
    if deviation > CLOSED_FORM_TOL * max_abs(closed).max(1.0) {
        return Err(Error::RouteMismatch { what, deviation });
    }
    Ok(())
}

/// Tooth map value minus `h`.
pub fn residual_l1(h: &SiteMatrix, beta: f64) -> Result<SiteMatrix> {
    let value = l1_map(h, beta)?;
    cross_check(&value, &l1_map_closed(h, beta), "tooth fixed-point map")?;
    Ok(value - h)
}

/// Spine map value minus `h`.
pub fn residual_l2(h: &SiteMatrix, params: &ModelParams) -> Result<SiteMatrix> {
    let value = l2_map(h, params)?;
    cross_check(&value, &l2_map_closed(h, params), "spine fixed-point map")?;
    Ok(value - h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchTag {
    /// `Tr(σz h) = 0`, which forces `h = (1/τ1) 1`.
    Disordered,
    /// `Tr(h) = 1/τ3` with `Tr(σz h) != 0`; solves the spine equation only
    /// when it exists.
    OrderedCandidate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolutionBranch {
    pub tag: BranchTag,
    pub h: SiteMatrix,
    pub satisfies_l1: bool,
    pub satisfies_l2: bool,
    pub positive: bool,
    /// Larger of the two residual max-norms, divided by the largest entry of
    /// `h` (the equations are homogeneous, so an absolute cut would accept
    /// anything once `h` is tiny).
    pub residual_norm: f64,
}

impl SolutionBranch {
    pub fn admissible(&self) -> bool {
        self.satisfies_l1 && self.satisfies_l2 && self.positive
    }

    fn evaluate(tag: BranchTag, h: SiteMatrix, params: &ModelParams) -> Result<Self> {
        let scale = max_abs(&h);
        let r1 = max_abs(&residual_l1(&h, params.beta)?) / scale;
        let r2 = max_abs(&residual_l2(&h, params)?) / scale;
        Ok(Self {
            tag,
            h,
            satisfies_l1: r1 <= ADMISSIBLE_TOL,
            satisfies_l2: r2 <= ADMISSIBLE_TOL,
            positive: site_positive(&h, EIGEN_TOL)?,
            residual_norm: r1.max(r2),
        })
    }
}

/// All nonzero diagonal solutions of the spine system, each tested against
/// both equations and positivity.
///
/// `h = 0` solves both equations but cannot be normalized by `ρ0`, so it is
/// not reported. When `τ2 = 0` or `τ3 = 0` only the disordered branch exists.
pub fn enumerate_branches(params: &ModelParams) -> Result<Vec<SolutionBranch>> {
    let mut out = vec![SolutionBranch::evaluate(BranchTag::Disordered, identity2() * c(params.alpha), params)?];
    if params.tau2 > 0.0 && params.tau3 > 0.0 {
        let t = 1.0 / params.tau3;
        let s2 = (t - params.tau1 * t * t) / params.tau2;
        // s2 == 0 reproduces the disordered field
        if s2 > 1e-15 * t * t {
            let s = s2.sqrt();
            for sign in [1.0, -1.0] {
                let h = diag2(t + sign * s, t - sign * s);
                out.push(SolutionBranch::evaluate(BranchTag::OrderedCandidate, h, params)?);
            }
        }
    }
    Ok(out)
}

/// Damped normalized iteration of the spine map, for cross-checking the
/// algebraic branches.
///
/// The map is homogeneous of degree two, so a fixed point `h = λu` with
/// `Tr(u) = 1` makes `u` an invariant direction. The direction is iterated
/// and `λ = 1 / Tr(T(u))` recovered at the end.
pub fn iterate_spine_fixed_point(
    params: &ModelParams,
    start: &SiteMatrix,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SiteMatrix> {
    let normalize = |m: SiteMatrix| -> Result<SiteMatrix> {
        let t = site_trace(&m);
        if t.norm() == 0.0 {
            return Err(Error::OutOfRange("iterate has zero trace".into()));
        }
        Ok(m / t)
    };
    let mut u = normalize(*start)?;
    for _ in 0..max_iter {
        let next = normalize(l2_map(&u, params)?)?;
        let step = max_abs(&(next - u));
        u = u * c(1.0 - damping) + next * c(damping);
        if step < tol {
            let scale = site_trace(&l2_map(&u, params)?);
            return Ok(u / scale);
        }
    }
    Err(Error::NoConvergence(max_iter))
}

/// Branch table for one `(β, J)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub beta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub tooth_degenerate: bool,
    pub branches: Vec<BranchRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub tag: BranchTag,
    /// `[h11, h12, h21, h22]`, real parts.
    pub h: [f64; 4],
    pub satisfies_l1: bool,
    pub satisfies_l2: bool,
    pub positive: bool,
    pub admissible: bool,
    pub residual_norm: f64,
}

impl From<&SolutionBranch> for BranchRecord {
    fn from(b: &SolutionBranch) -> Self {
        Self {
            tag: b.tag,
            h: [b.h[(0, 0)].re, b.h[(0, 1)].re, b.h[(1, 0)].re, b.h[(1, 1)].re],
            satisfies_l1: b.satisfies_l1,
            satisfies_l2: b.satisfies_l2,
            positive: b.positive,
            admissible: b.admissible(),
            residual_norm: b.residual_norm,
        }
    }
}

pub fn branch_report(params: &ModelParams) -> Result<BranchReport> {
    let branches = enumerate_branches(params)?;
    Ok(BranchReport {
        beta: params.beta,
        j: params.j,
        tooth_degenerate: params.tooth_degenerate(),
        branches: branches.iter().map(BranchRecord::from).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCheck {
    pub n: usize,
    /// Max-norm gap relative to the largest entry of `h_n`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    /// `|ρ0(h) - 1|`.
    pub normalization_residual: f64,
    pub layers: Vec<LayerCheck>,
    /// First level whose layer identity fails, if any.
    pub failed_at: Option<usize>,
    pub passed: bool,
}

/// Checks `ρ0(h) = 1` and `E[n,n+1](h_{n+1}) = h_n` for `n = 0..=n_max`,
/// with `h_n` the product of `h` over level `n` and the layer transition
/// expectation built from the full layer kernel.
pub fn check_layer_compatibility(
    params: &ModelParams,
    field: &BoundaryField,
    n_max: usize,
    limits: &Limits,
) -> Result<CompatibilityReport> {
    let normalization_residual = (field.normalization() - c(1.0)).norm();
    let mut layers = Vec::with_capacity(n_max + 1);
    let mut failed_at = None;
    for n in 0..=n_max {
        let k = layer_kernel(n, params, limits)?;
        let lower = graph::level(n).vertices;
        let upper = graph::level(n + 1).vertices;
        let factors: Vec<_> = lower
            .iter()
            .map(|v| (*v, identity2()))
            .chain(upper.iter().map(|v| (*v, field.h)))
            .collect();
        let input = LocalOperator::product(&factors)?;
        let mapped = sandwich(&k, &input)?.partial_trace_onto(&lower)?;
        let target_factors: Vec<_> = lower.iter().map(|v| (*v, field.h)).collect();
        let target = LocalOperator::product(&target_factors)?;
        let residual = mapped.max_abs_diff(&target)? / max_abs(target.matrix());
        if residual > ADMISSIBLE_TOL && failed_at.is_none() {
            failed_at = Some(n);
        }
        layers.push(LayerCheck { n, residual });
    }
    let passed = failed_at.is_none() && normalization_residual <= ADMISSIBLE_TOL;
    Ok(CompatibilityReport { normalization_residual, layers, failed_at, passed })
}
