//! Evaluation of the Markov chain state on local observables.
//!
//! The iterative route sweeps levels from the boundary down to the root,
//! applying at each vertex `x` the map
//! `E_x(b) = Tr_{S(x)}(K_x* b K_x)`. For product observables the running
//! operator stays a product of single-site matrices, so each step touches at
//! most three sites. The product route instead forms
//! `α^n Tr(a Π K[i,i+1] K[i,i+1]*)` densely on the whole volume and only
//! applies to the disordered field.

use serde::{Deserialize, Serialize};

use crate::algebra::{
    c, identity2, mul_embedded_right, sandwich, sigma_z, site_sqrt, trace_of_product, Dense, LocalOperator,
    SiteMatrix, C64,
};
use crate::boundary::BoundaryField;
use crate::config::Limits;
use crate::error::{Error, Result};
use crate::graph::{self, Vertex};
use crate::kernels::{kernel_l1, kernel_l2, layer_kernel, ModelParams};

/// Tolerance on `|x - y| / (1 + |x|)` when comparing evaluation routes.
pub const ROUTE_AGREEMENT_TOL: f64 = 1e-10;

/// Defects below this are treated as exactly zero when fitting decay rates.
pub const ZERO_DEFECT: f64 = 1e-14;

/// Tolerance for matching a fitted decay rate against a closed form.
pub const RATE_MATCH_TOL: f64 = 1e-8;

/// A finite tensor product of single-site factors, identity elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservableRepr", into = "ObservableRepr")]
pub struct Observable {
    factors: Vec<(Vertex, SiteMatrix)>,
}

impl Observable {
    pub fn new(factors: Vec<(Vertex, SiteMatrix)>) -> Result<Self> {
        for (i, (v, _)) in factors.iter().enumerate() {
            if factors[..i].iter().any(|(w, _)| w == v) {
                return Err(Error::SupportCollision(*v));
            }
        }
        Ok(Self { factors })
    }

    pub fn identity() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn single(v: Vertex, m: SiteMatrix) -> Self {
        Self { factors: vec![(v, m)] }
    }

    pub fn factors(&self) -> &[(Vertex, SiteMatrix)] {
        &self.factors
    }

    pub fn factor(&self, v: Vertex) -> Option<&SiteMatrix> {
        self.factors.iter().find(|(w, _)| *w == v).map(|(_, m)| m)
    }

    /// Deepest level touched by a factor (0 for the identity).
    pub fn depth(&self) -> usize {
        self.factors.iter().map(|(v, _)| v.level()).max().unwrap_or(0)
    }

    /// `a* a`, again a product.
    pub fn gram(&self) -> Self {
        Self { factors: self.factors.iter().map(|(v, m)| (*v, m.adjoint() * m)).collect() }
    }

    /// Shift every factor `n` steps along the spine.
    pub fn translated(&self, n: usize) -> Self {
        Self { factors: self.factors.iter().map(|(v, m)| (graph::translate(*v, n), *m)).collect() }
    }

    /// Dense form on `support`, which must contain every factor's site.
    pub fn to_operator(&self, support: &[Vertex]) -> Result<LocalOperator> {
        let factors: Vec<_> = support.iter().map(|v| (*v, self.factor(*v).copied().unwrap_or_else(identity2))).collect();
        if let Some((v, _)) = self.factors.iter().find(|(v, _)| !support.contains(v)) {
            return Err(Error::NotInSupport(*v));
        }
        LocalOperator::product(&factors)
    }

    /// The factors sitting in `support`.
    pub fn restricted_to(&self, support: &[Vertex]) -> Self {
        Self { factors: self.factors.iter().filter(|(v, _)| support.contains(v)).copied().collect() }
    }

    fn check_within(&self, n: usize) -> Result<()> {
        if self.depth() > n {
            return Err(Error::SupportOutsideVolume(n));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ObservableRepr {
    factors: Vec<FactorRepr>,
}

#[derive(Serialize, Deserialize)]
struct FactorRepr {
    site: Vertex,
    op: OpRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OpRepr {
    Named(String),
    Explicit { re: Vec<f64>, im: Vec<f64> },
}

impl TryFrom<ObservableRepr> for Observable {
    type Error = Error;

    fn try_from(r: ObservableRepr) -> Result<Self> {
        let mut factors = Vec::with_capacity(r.factors.len());
        for f in r.factors {
            let m = match f.op {
                OpRepr::Named(name) => match name.as_str() {
                    "id" => identity2(),
                    "sz" => sigma_z(),
                    other => return Err(Error::InvalidObservable(format!("unknown operator name {other:?}"))),
                },
                OpRepr::Explicit { re, im } => {
                    if re.len() != 4 || im.len() != 4 {
                        return Err(Error::InvalidObservable("explicit factors need 4 real and 4 imaginary entries".into()));
                    }
                    SiteMatrix::new(
                        C64::new(re[0], im[0]),
                        C64::new(re[1], im[1]),
                        C64::new(re[2], im[2]),
                        C64::new(re[3], im[3]),
                    )
                }
            };
            factors.push((f.site, m));
        }
        Observable::new(factors)
    }
}

impl From<Observable> for ObservableRepr {
    fn from(o: Observable) -> Self {
        let factors = o
            .factors
            .into_iter()
            .map(|(site, m)| {
                let op = if m == identity2() {
                    OpRepr::Named("id".into())
                } else if m == sigma_z() {
                    OpRepr::Named("sz".into())
                } else {
                    // row-major
                    let entries = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
                    OpRepr::Explicit { re: entries.iter().map(|z| z.re).collect(), im: entries.iter().map(|z| z.im).collect() }
                };
                FactorRepr { site, op }
            })
            .collect();
        Self { factors }
    }
}

/// Spine and tooth kernels as matrices, relabelled per vertex on demand.
struct VertexMaps {
    spine: Dense,
    tooth: Dense,
}

impl VertexMaps {
    fn new(params: &ModelParams) -> Result<Self> {
        Ok(Self {
            spine: kernel_l2(params, Vertex::ROOT)?.into_matrix(),
            tooth: kernel_l1(params.beta, Vertex::new(0, 1)).into_matrix(),
        })
    }

    /// `E_x(a_x ⊗ b_{S(x)})` for single-site inputs.
    fn apply(&self, x: Vertex, a_x: &SiteMatrix, succ: &[(Vertex, SiteMatrix)]) -> Result<SiteMatrix> {
        let mut support = vec![x];
        support.extend(succ.iter().map(|(v, _)| *v));
        let kernel = if x.is_spine() { &self.spine } else { &self.tooth };
        let k = LocalOperator::new(support, kernel.clone())?;
        let mut factors = vec![(x, *a_x)];
        factors.extend_from_slice(succ);
        let input = LocalOperator::product(&factors)?;
        let out = sandwich(&k, &input)?.partial_trace_onto(&[x])?;
        Ok(out.as_site_matrix().expect("single site"))
    }
}

/// `φ_n(a)` by backward sweep of the localized transition expectations.
pub fn evaluate_iterative(
    a: &Observable,
    n: usize,
    params: &ModelParams,
    field: &BoundaryField,
    limits: &Limits,
) -> Result<C64> {
    limits.check_level(n)?;
    a.check_within(n)?;
    let maps = VertexMaps::new(params)?;
    let root_h = site_sqrt(&field.h)?;
    let boundary = root_h * root_h;

    // vertex (m - l, l) sits at index l of level m
    let mut incoming: Vec<SiteMatrix> = vec![boundary; n + 2];
    for m in (0..=n).rev() {
        let mut current = Vec::with_capacity(m + 1);
        for x in graph::level(m).iter() {
            let a_x = a.factor(*x).copied().unwrap_or_else(identity2);
            let succ: Vec<_> = graph::successors(*x).into_iter().map(|y| (y, incoming[y.l])).collect();
            current.push(maps.apply(*x, &a_x, &succ)?);
        }
        incoming = current;
    }
    Ok(field.rho0(&incoming[0]))
}

/// `α^n Π_{i<n} K[i,i+1] K[i,i+1]*` on the volume of level `n`, reusable
/// across observables.
pub struct ProductFormula {
    n: usize,
    support: Vec<Vertex>,
    weight: Dense,
}

impl ProductFormula {
    pub fn new(n: usize, params: &ModelParams, limits: &Limits) -> Result<Self> {
        let support = graph::volume(n);
        limits.check_dense(support.len())?;
        // the exponent of α counts the non-spine vertices of the last level
        debug_assert_eq!(graph::level(n).len() - 1, n);
        let dim = 1usize << support.len();
        let mut weight = Dense::identity(dim, dim);
        for i in 0..n {
            let k = layer_kernel(i, params, limits)?;
            let kk = k.mul(&k.adjoint())?;
            weight = mul_embedded_right(&weight, &support, &kk)?;
        }
        weight *= c(params.alpha.powi(n as i32));
        Ok(Self { n, support, weight })
    }

    pub fn evaluate(&self, a: &Observable) -> Result<C64> {
        a.check_within(self.n)?;
        let dense = a.to_operator(&self.support)?;
        Ok(trace_of_product(dense.matrix(), &self.weight))
    }

    pub fn evaluate_operator(&self, a: &LocalOperator) -> Result<C64> {
        let dense = a.embed(&self.support).map_err(|_| Error::SupportOutsideVolume(self.n))?;
        Ok(trace_of_product(dense.matrix(), &self.weight))
    }
}

/// `φ(a)` from the closed product formula (disordered field only).
pub fn evaluate_product(a: &Observable, n: usize, params: &ModelParams, limits: &Limits) -> Result<C64> {
    a.check_within(n)?;
    ProductFormula::new(n, params, limits)?.evaluate(a)
}

/// `|φ_{n+1}(a) - φ_n(a)|`.
pub fn check_compatibility(
    a: &Observable,
    n: usize,
    params: &ModelParams,
    field: &BoundaryField,
    limits: &Limits,
) -> Result<f64> {
    let outer = evaluate_iterative(a, n + 1, params, field, limits)?;
    let inner = evaluate_iterative(a, n, params, field, limits)?;
    Ok((outer - inner).norm())
}

fn route_gap(x: C64, y: C64) -> f64 {
    (x - y).norm() / (1.0 + x.norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub value_iterative: C64,
    pub value_product: C64,
    pub value_oracle: Option<C64>,
    pub volume_n: usize,
    /// Largest `|x - y| / (1 + |x|)` over the pairs of routes evaluated.
    pub max_cross_residual: f64,
}

impl EvalReport {
    pub fn routes_agree(&self) -> bool {
        self.max_cross_residual <= ROUTE_AGREEMENT_TOL
    }
}

/// Evaluates `a` in the disordered chain by every available route.
pub fn evaluate_all(
    a: &Observable,
    n: usize,
    params: &ModelParams,
    with_oracle: bool,
    limits: &Limits,
) -> Result<EvalReport> {
    let field = BoundaryField::disordered(params);
    let value_iterative = evaluate_iterative(a, n, params, &field, limits)?;
    let value_product = evaluate_product(a, n, params, limits)?;
    let value_oracle = if with_oracle {
        let op = a.to_operator(&graph::volume(n))?;
        Some(crate::oracle::brute_force_phi(&op, n, params, &field, limits)?)
    } else {
        None
    };
    let mut max_cross_residual = route_gap(value_iterative, value_product);
    if let Some(o) = value_oracle {
        max_cross_residual = max_cross_residual.max(route_gap(value_iterative, o)).max(route_gap(value_product, o));
    }
    Ok(EvalReport { value_iterative, value_product, value_oracle, volume_n: n, max_cross_residual })
}

/// `φ(a0 at u · b0 at v)` in the disordered chain.
pub fn two_point(
    a0: &SiteMatrix,
    b0: &SiteMatrix,
    u: Vertex,
    v: Vertex,
    params: &ModelParams,
    limits: &Limits,
) -> Result<C64> {
    if u == v {
        return Err(Error::InvalidObservable("two-point sites must differ".into()));
    }
    let obs = Observable::new(vec![(u, *a0), (v, *b0)])?;
    let n = u.level().max(v.level());
    evaluate_iterative(&obs, n, params, &BoundaryField::disordered(params), limits)
}

/// Which closed-form rate a fitted decay rate agrees with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMatch {
    /// `τ3 / (4 τ1)`.
    Paper,
    /// `τ3 / (2 τ1)`.
    Direct,
    Both,
    Neither,
    /// All defects vanish; no rate can be fitted.
    Undefined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub d: usize,
    pub correlation: C64,
    pub defect: f64,
    /// `defect(d + 1) / defect(d)`; absent on the last row or for zero defects.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub beta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    /// `φ(a0)` at the root.
    pub magnetization: C64,
    pub rows: Vec<CorrelationRow>,
    /// Mean of the ratios for `d >= 2`.
    pub lambda_star: Option<f64>,
    /// `max - min` of the ratios for `d >= 2`.
    pub ratio_spread: f64,
    pub rate_paper: f64,
    pub rate_direct: f64,
    pub matched: RateMatch,
    /// `λ* < 1`, or all defects zero.
    pub clustering: bool,
}

/// Spine correlation decay `|φ(σz(0,0) σz(d,0)) - φ(σz)^2|` for
/// `d = 1..=d_max` and its consecutive ratios.
pub fn clustering_report(params: &ModelParams, d_max: usize, limits: &Limits) -> Result<ClusteringReport> {
    clustering_report_for(params, &sigma_z(), d_max, limits)
}

/// As [`clustering_report`] with `a0` at `(0,0)` and `(d,0)` in place of
/// `σz`.
pub fn clustering_report_for(
    params: &ModelParams,
    a0: &SiteMatrix,
    d_max: usize,
    limits: &Limits,
) -> Result<ClusteringReport> {
    if d_max < 3 {
        return Err(Error::Config(format!("d_max must be at least 3, got {d_max}")));
    }
    limits.check_level(d_max)?;
    let field = BoundaryField::disordered(params);
    let z = *a0;
    let magnetization = evaluate_iterative(&Observable::single(Vertex::ROOT, z), 0, params, &field, limits)?;

    let mut rows = Vec::with_capacity(d_max);
    for d in 1..=d_max {
        let far = Vertex::new(d, 0);
        let corr = two_point(&z, &z, Vertex::ROOT, far, params, limits)?;
        let far_mag = evaluate_iterative(&Observable::single(far, z), d, params, &field, limits)?;
        let defect = (corr - magnetization * far_mag).norm();
        rows.push(CorrelationRow { d, correlation: corr, defect, ratio: None });
    }
    let all_zero = rows.iter().all(|r| r.defect < ZERO_DEFECT);
    for i in 0..rows.len() - 1 {
        if rows[i].defect >= ZERO_DEFECT {
            rows[i].ratio = Some(rows[i + 1].defect / rows[i].defect);
        }
    }

    let tail: Vec<f64> = rows.iter().filter(|r| r.d >= 2).filter_map(|r| r.ratio).collect();
    let (lambda_star, ratio_spread) = if all_zero || tail.is_empty() {
        (None, 0.0)
    } else {
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - tail.iter().cloned().fold(f64::INFINITY, f64::min);
        (Some(mean), spread)
    };

    let matched = match lambda_star {
        None => RateMatch::Undefined,
        Some(l) => {
            let paper = (l - params.rate_paper).abs() <= RATE_MATCH_TOL;
            let direct = (l - params.rate_direct).abs() <= RATE_MATCH_TOL;
            match (paper, direct) {
                (true, true) => RateMatch::Both,
                (true, false) => RateMatch::Paper,
                (false, true) => RateMatch::Direct,
                (false, false) => RateMatch::Neither,
            }
        }
    };
    Ok(ClusteringReport {
        beta: params.beta,
        j: params.j,
        magnetization,
        rows,
        lambda_star,
        ratio_spread,
        rate_paper: params.rate_paper,
        rate_direct: params.rate_direct,
        matched,
        clustering: lambda_star.is_none_or(|l| l < 1.0),
    })
}

/// `φ(σz(k,0) σz(k,l))` for `l = 1..=l_max`.
pub fn tooth_correlations(params: &ModelParams, k: usize, l_max: usize, limits: &Limits) -> Result<Vec<C64>> {
    let z = sigma_z();
    (1..=l_max)
        .map(|l| two_point(&z, &z, Vertex::new(k, 0), Vertex::new(k, l), params, limits))
        .collect()
}
