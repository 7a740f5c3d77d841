//! Dense operators on qubit sites of the comb.
//!
//! A [`LocalOperator`] is a `2^s x 2^s` complex matrix together with the
//! ordered list of the `s` sites it acts on. The first site in the support is
//! the most significant tensor factor (Kronecker order), so `tensor(a, b)`
//! is literally `kron(a, b)`.
//!
//! All traces here are normalized: the trace of a `d x d` block is divided
//! by `d`, so the identity has trace one on any number of sites and a
//! partial trace contributes a factor `1/2` per traced site. The raw matrix
//! trace is available as [`LocalOperator::raw_trace`] for debugging.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Vertex;

pub type C64 = Complex64;

/// Dense complex matrix.
pub type Dense = DMatrix<C64>;

/// A single-site `2 x 2` operator.
pub type SiteMatrix = Matrix2<C64>;

/// Entrywise tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalue tolerance for positivity checks.
pub const EIGEN_TOL: f64 = 1e-10;

pub const fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity2() -> SiteMatrix {
    SiteMatrix::identity()
}

pub fn sigma_z() -> SiteMatrix {
    SiteMatrix::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

pub fn sigma_x() -> SiteMatrix {
    SiteMatrix::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

pub fn diag2(a: f64, b: f64) -> SiteMatrix {
    SiteMatrix::new(c(a), c(0.0), c(0.0), c(b))
}

/// Normalized trace of a single-site matrix, `(m11 + m22) / 2`.
pub fn site_trace(m: &SiteMatrix) -> C64 {
    (m[(0, 0)] + m[(1, 1)]) * 0.5
}

/// Largest entrywise modulus.
pub fn max_abs<R: nalgebra::Dim, Cc: nalgebra::Dim, S>(m: &nalgebra::Matrix<C64, R, Cc, S>) -> f64
where
    S: nalgebra::RawStorage<C64, R, Cc>,
{
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from the adjoint.
pub fn hermitian_defect(m: &Dense) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Dense, tol: f64) -> Result<Vec<f64>> {
    let defect = hermitian_defect(m);
    if defect > tol {
        return Err(Error::NonHermitian(defect));
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues
/// below zero by less than the eigenvalue tolerance are clamped.
pub fn psd_sqrt(m: &Dense) -> Result<Dense> {
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::NonHermitian(defect));
    }
    let eig = SymmetricEigen::new(m.clone());
    if let Some(&low) = eig.eigenvalues.iter().find(|&&x| x < -EIGEN_TOL) {
        return Err(Error::OutOfRange(format!("matrix is not positive (eigenvalue {low:e})")));
    }
    let roots = eig.eigenvalues.map(|x| c(x.max(0.0).sqrt()));
    let q = &eig.eigenvectors;
    Ok(q * Dense::from_diagonal(&roots) * q.adjoint())
}

pub fn site_sqrt(m: &SiteMatrix) -> Result<SiteMatrix> {
    let root = psd_sqrt(&Dense::from_column_slice(2, 2, m.as_slice()))?;
    Ok(SiteMatrix::from_column_slice(root.as_slice()))
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(m: &Dense) -> Dense {
    let n = m.nrows();
    let norm1 = (0..n)
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m / c(2f64.powi(squarings as i32));

    let mut sum = Dense::identity(n, n);
    let mut term = Dense::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled / c(k as f64);
        sum += &term;
        if max_abs(&term) < f64::EPSILON * 1e-3 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Bit-level view of how a sub-support sits inside a larger support.
///
/// Site `j` of the sub-support occupies bit `sub_shift[j]` of the small index
/// and bit `shift[j]` of the big index.
#[derive(Clone, Debug)]
struct SiteMap {
    shift: Vec<usize>,
    sub_shift: Vec<usize>,
    mask: usize,
}

impl SiteMap {
    fn new(sub: &[Vertex], full: &[Vertex]) -> Result<Self> {
        let big = full.len();
        let small = sub.len();
        let mut shift = Vec::with_capacity(small);
        for v in sub {
            let pos = full.iter().position(|x| x == v).ok_or(Error::NotInSupport(*v))?;
            shift.push(big - 1 - pos);
        }
        let sub_shift = (0..small).map(|j| small - 1 - j).collect();
        let mask = shift.iter().fold(0, |acc, s| acc | (1 << s));
        Ok(Self { shift, sub_shift, mask })
    }

    #[inline]
    fn extract(&self, big: usize) -> usize {
        self.shift
            .iter()
            .zip(&self.sub_shift)
            .fold(0, |acc, (&s, &t)| acc | (((big >> s) & 1) << t))
    }

    #[inline]
    fn deposit(&self, small: usize) -> usize {
        self.shift
            .iter()
            .zip(&self.sub_shift)
            .fold(0, |acc, (&s, &t)| acc | (((small >> t) & 1) << s))
    }
}

fn check_distinct(support: &[Vertex]) -> Result<()> {
    for (i, v) in support.iter().enumerate() {
        if support[..i].contains(v) {
            return Err(Error::SupportCollision(*v));
        }
    }
    Ok(())
}

/// A dense operator on an ordered list of distinct qubit sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct LocalOperator {
    support: Vec<Vertex>,
    entries: Dense,
}

impl LocalOperator {
    pub fn new(support: Vec<Vertex>, entries: Dense) -> Result<Self> {
        check_distinct(&support)?;
        let dim = 1usize << support.len();
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::DimensionMismatch { sites: support.len(), found: entries.nrows() });
        }
        Ok(Self { support, entries })
    }

    pub fn identity(support: Vec<Vertex>) -> Result<Self> {
        let dim = 1usize << support.len();
        Self::new(support, Dense::identity(dim, dim))
    }

    pub fn site(v: Vertex, m: &SiteMatrix) -> Self {
        Self { support: vec![v], entries: Dense::from_column_slice(2, 2, m.as_slice()) }
    }

    /// Tensor product of single-site factors, in the given order.
    pub fn product(factors: &[(Vertex, SiteMatrix)]) -> Result<Self> {
        let mut out = Self { support: Vec::new(), entries: Dense::identity(1, 1) };
        for (v, m) in factors {
            out = out.tensor(&Self::site(*v, m))?;
        }
        Ok(out)
    }

    pub fn support(&self) -> &[Vertex] {
        &self.support
    }

    pub fn matrix(&self) -> &Dense {
        &self.entries
    }

    pub fn into_matrix(self) -> Dense {
        self.entries
    }

    pub fn num_sites(&self) -> usize {
        self.support.len()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { support: self.support.clone(), entries: self.entries.adjoint() }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { support: self.support.clone(), entries: &self.entries * z }
    }

    /// Product `self * other` on a common support (orders reconciled).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let other = other.aligned_to(&self.support)?;
        Ok(Self { support: self.support.clone(), entries: &self.entries * &other.entries })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let other = other.aligned_to(&self.support)?;
        Ok(Self { support: self.support.clone(), entries: &self.entries + &other.entries })
    }

    /// Largest entrywise difference on a common support.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let other = other.aligned_to(&self.support)?;
        Ok(max_abs(&(&self.entries - &other.entries)))
    }

    fn aligned_to(&self, support: &[Vertex]) -> Result<std::borrow::Cow<'_, Self>> {
        if self.support == support {
            return Ok(std::borrow::Cow::Borrowed(self));
        }
        if self.support.len() != support.len() {
            return Err(Error::SupportMismatch { expected: support.len(), found: self.support.len() });
        }
        Ok(std::borrow::Cow::Owned(self.embed(support)?))
    }

    /// Kronecker product; the result's support lists `self`'s sites first.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if let Some(v) = other.support.iter().find(|v| self.support.contains(v)) {
            return Err(Error::SupportCollision(*v));
        }
        let mut support = self.support.clone();
        support.extend_from_slice(&other.support);
        Ok(Self { support, entries: self.entries.kronecker(&other.entries) })
    }

    /// Pads with identities on the missing sites and permutes the tensor
    /// factors into `target` order.
    pub fn embed(&self, target: &[Vertex]) -> Result<Self> {
        check_distinct(target)?;
        let map = SiteMap::new(&self.support, target)?;
        let big = 1usize << target.len();
        let small = self.dim();
        let mut out = Dense::zeros(big, big);
        for col in 0..big {
            let j_small = map.extract(col);
            let rest = col & !map.mask;
            for i_small in 0..small {
                let z = self.entries[(i_small, j_small)];
                if z != C64::default() {
                    out[(rest | map.deposit(i_small), col)] = z;
                }
            }
        }
        Ok(Self { support: target.to_vec(), entries: out })
    }

    pub fn raw_trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn normalized_trace(&self) -> C64 {
        self.entries.trace() / c(self.dim() as f64)
    }

    /// Normalized partial trace over every site not in `keep`; the result is
    /// supported on `keep`, in that order.
    pub fn partial_trace_onto(&self, keep: &[Vertex]) -> Result<Self> {
        check_distinct(keep)?;
        let kept = SiteMap::new(keep, &self.support)?;
        let traced_sites: Vec<Vertex> =
            self.support.iter().filter(|v| !keep.contains(v)).copied().collect();
        let traced = SiteMap::new(&traced_sites, &self.support)?;
        let dk = 1usize << keep.len();
        let dt = 1usize << traced_sites.len();
        let mut out = Dense::zeros(dk, dk);
        for j in 0..dk {
            let jb = kept.deposit(j);
            for i in 0..dk {
                let ib = kept.deposit(i);
                let mut acc = C64::default();
                for r in 0..dt {
                    let rb = traced.deposit(r);
                    acc += self.entries[(ib | rb, jb | rb)];
                }
                out[(i, j)] = acc / c(dt as f64);
            }
        }
        Ok(Self { support: keep.to_vec(), entries: out })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermitian_defect(&self.entries) <= tol
    }

    pub fn eigenvalues(&self, tol: f64) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.entries, tol)
    }

    /// True iff every eigenvalue is at least `-tol`. Errors on non-Hermitian
    /// input.
    pub fn is_positive(&self, tol: f64) -> Result<bool> {
        let vals = self.eigenvalues(HERMITIAN_TOL.max(tol))?;
        Ok(vals.first().is_none_or(|&low| low >= -tol))
    }

    pub fn as_site_matrix(&self) -> Option<SiteMatrix> {
        (self.num_sites() == 1).then(|| SiteMatrix::from_column_slice(self.entries.as_slice()))
    }
}

/// `k* a k`. Supports must hold the same sites; `a` is permuted into `k`'s
/// order when they differ only in order.
pub fn sandwich(k: &LocalOperator, a: &LocalOperator) -> Result<LocalOperator> {
    let same_sites = k.support.len() == a.support.len() && a.support.iter().all(|v| k.support.contains(v));
    if !same_sites {
        return Err(Error::SupportMismatch { expected: k.support.len(), found: a.support.len() });
    }
    let a = a.aligned_to(&k.support)?;
    let entries = k.entries.adjoint() * &a.entries * &k.entries;
    Ok(LocalOperator { support: k.support.clone(), entries })
}

pub fn tensor(a: &LocalOperator, b: &LocalOperator) -> Result<LocalOperator> {
    a.tensor(b)
}

pub fn embed(a: &LocalOperator, target: &[Vertex]) -> Result<LocalOperator> {
    a.embed(target)
}

pub fn normalized_trace(a: &LocalOperator) -> C64 {
    a.normalized_trace()
}

pub fn partial_trace_onto(a: &LocalOperator, keep: &[Vertex]) -> Result<LocalOperator> {
    a.partial_trace_onto(keep)
}

pub fn is_positive(a: &LocalOperator, tol: f64) -> Result<bool> {
    a.is_positive(tol)
}

/// `m * embed(k, target)` without materializing the embedding.
pub fn mul_embedded_right(m: &Dense, target: &[Vertex], k: &LocalOperator) -> Result<Dense> {
    let map = SiteMap::new(&k.support, target)?;
    let dim = 1usize << target.len();
    if m.ncols() != dim {
        return Err(Error::DimensionMismatch { sites: target.len(), found: m.ncols() });
    }
    let mut out = Dense::zeros(m.nrows(), dim);
    for col in 0..dim {
        let j_small = map.extract(col);
        let rest = col & !map.mask;
        for i_small in 0..k.dim() {
            let z = k.entries[(i_small, j_small)];
            if z != C64::default() {
                let src = rest | map.deposit(i_small);
                out.column_mut(col).axpy(z, &m.column(src), c(1.0));
            }
        }
    }
    Ok(out)
}

/// `embed(k, target) * m` without materializing the embedding.
pub fn mul_embedded_left(target: &[Vertex], k: &LocalOperator, m: &Dense) -> Result<Dense> {
    // (E m) = (m* E*)*
    let prod = mul_embedded_right(&m.adjoint(), target, &k.adjoint())?;
    Ok(prod.adjoint())
}

/// Normalized `tr(a b)` for square matrices of equal size.
pub fn trace_of_product(a: &Dense, b: &Dense) -> C64 {
    let n = a.nrows();
    let mut acc = C64::default();
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc / c(n as f64)
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    support: Vec<Vertex>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<LocalOperator> for OperatorRepr {
    fn from(op: LocalOperator) -> Self {
        let n = op.dim();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(op.entries[(i, j)].re);
                im.push(op.entries[(i, j)].im);
            }
        }
        Self { support: op.support, re, im }
    }
}

impl TryFrom<OperatorRepr> for LocalOperator {
    type Error = Error;

    fn try_from(r: OperatorRepr) -> Result<Self> {
        let n = 1usize << r.support.len();
        if r.re.len() != n * n || r.im.len() != n * n {
            return Err(Error::DimensionMismatch { sites: r.support.len(), found: r.re.len() });
        }
        let entries = Dense::from_fn(n, n, |i, j| C64::new(r.re[i * n + j], r.im[i * n + j]));
        LocalOperator::new(r.support, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(k: usize, l: usize) -> Vertex {
        Vertex::new(k, l)
    }

    fn op(site: Vertex, m: SiteMatrix) -> LocalOperator {
        LocalOperator::site(site, &m)
    }

    #[test]
    fn tensor_examples() {
        let id = op(v(0, 0), identity2()).tensor(&op(v(1, 0), identity2())).unwrap();
        assert_eq!(id.matrix(), &Dense::identity(4, 4));
        let zz = op(v(0, 0), sigma_z()).tensor(&op(v(1, 0), sigma_z())).unwrap();
        let expected = Dense::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.), c(-1.), c(-1.), c(1.)]));
        assert_eq!(zz.matrix(), &expected);
    }

    #[test]
    fn tensor_rejects_overlap() {
        let a = op(v(0, 0), sigma_z());
        assert!(matches!(a.tensor(&a), Err(Error::SupportCollision(_))));
    }

    #[test]
    fn tensor_associates_up_to_order() {
        let a = op(v(0, 0), sigma_x());
        let b = op(v(1, 0), diag2(2.0, 3.0));
        let cc = op(v(0, 1), SiteMatrix::new(c(1.), C64::new(0., 1.), C64::new(0., -1.), c(4.)));
        let left = a.tensor(&b).unwrap().tensor(&cc).unwrap();
        let right = a.tensor(&b.tensor(&cc).unwrap()).unwrap();
        assert_eq!(left, right);
        let swapped = cc.tensor(&a).unwrap().tensor(&b).unwrap();
        assert_abs_diff_eq!(swapped.embed(left.support()).unwrap().max_abs_diff(&left).unwrap(), 0.0);
    }

    #[test]
    fn embed_examples() {
        let e = op(v(0, 0), sigma_z()).embed(&[v(0, 0), v(1, 0)]).unwrap();
        let expected = op(v(0, 0), sigma_z()).tensor(&op(v(1, 0), identity2())).unwrap();
        assert_eq!(e, expected);
        let a = op(v(2, 0), sigma_x());
        assert_eq!(a.embed(a.support()).unwrap(), a);
        assert!(a.embed(&[v(0, 0)]).is_err());
    }

    #[test]
    fn embed_preserves_normalized_trace_on_random_two_site() {
        // direct 4x4 computation versus the embedded 8x8 one
        let entries = Dense::from_fn(4, 4, |i, j| C64::new((i * 4 + j) as f64 * 0.37 - 1.0, (i as f64) - 0.5 * j as f64));
        let a = LocalOperator::new(vec![v(1, 0), v(0, 1)], entries.clone()).unwrap();
        let direct = (entries[(0, 0)] + entries[(1, 1)] + entries[(2, 2)] + entries[(3, 3)]) / 4.0;
        let big = a.embed(&[v(0, 1), v(0, 0), v(1, 0)]).unwrap();
        assert_abs_diff_eq!(big.normalized_trace().re, direct.re, epsilon = 1e-14);
        assert_abs_diff_eq!(big.normalized_trace().im, direct.im, epsilon = 1e-14);
    }

    #[test]
    fn normalized_trace_examples() {
        assert_eq!(op(v(0, 0), diag2(3.0, 1.0)).normalized_trace(), c(2.0));
        assert_eq!(op(v(0, 0), sigma_z()).normalized_trace(), c(0.0));
        let zz = op(v(0, 0), sigma_z()).tensor(&op(v(1, 0), sigma_z())).unwrap();
        assert_eq!(zz.normalized_trace(), c(0.0));
        for s in 0..5 {
            let sites: Vec<_> = (0..s).map(|k| v(k, 0)).collect();
            assert_eq!(LocalOperator::identity(sites).unwrap().normalized_trace(), c(1.0));
        }
    }

    #[test]
    fn partial_trace_examples() {
        let alpha = 0.7;
        let a = op(v(0, 0), identity2()).tensor(&op(v(1, 0), identity2() * c(alpha))).unwrap();
        let kept = a.partial_trace_onto(&[v(0, 0)]).unwrap();
        assert_abs_diff_eq!(kept.max_abs_diff(&op(v(0, 0), identity2() * c(alpha))).unwrap(), 0.0, epsilon = 1e-15);

        let zz = op(v(0, 0), sigma_z()).tensor(&op(v(1, 0), sigma_z())).unwrap();
        assert_eq!(max_abs(zz.partial_trace_onto(&[v(0, 0)]).unwrap().matrix()), 0.0);

        assert!(zz.partial_trace_onto(&[v(3, 0)]).is_err());
    }

    #[test]
    fn partial_trace_of_product_and_reordering() {
        let x = op(v(0, 0), SiteMatrix::new(c(1.), c(2.), c(3.), c(4.)));
        let y = op(v(1, 0), diag2(5.0, 1.0)).tensor(&op(v(0, 1), sigma_x() + identity2())).unwrap();
        let xy = x.tensor(&y).unwrap();
        let kept = xy.partial_trace_onto(&[v(0, 0)]).unwrap();
        assert_abs_diff_eq!(kept.max_abs_diff(&x.scale(y.normalized_trace())).unwrap(), 0.0, epsilon = 1e-14);

        // keep in reversed order
        let rev = xy.partial_trace_onto(&[v(0, 1), v(0, 0)]).unwrap();
        let expected = op(v(0, 1), sigma_x() + identity2()).tensor(&x).unwrap().scale(c(3.0));
        assert_abs_diff_eq!(rev.max_abs_diff(&expected).unwrap(), 0.0, epsilon = 1e-14);

        // successive partial traces equal tracing the union
        let two_step = xy.partial_trace_onto(&[v(0, 0), v(1, 0)]).unwrap().partial_trace_onto(&[v(0, 0)]).unwrap();
        assert_abs_diff_eq!(two_step.max_abs_diff(&kept).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sandwich_examples() {
        let a = op(v(0, 0), SiteMatrix::new(c(1.), c(2.), c(3.), c(4.)));
        let id = op(v(0, 0), identity2());
        assert_eq!(sandwich(&id, &a).unwrap(), a);
        let k = op(v(0, 0), SiteMatrix::new(c(1.), C64::new(0., 2.), c(3.), c(4.)));
        assert_eq!(sandwich(&k, &id).unwrap(), k.adjoint().mul(&k).unwrap());
        let out = sandwich(&op(v(0, 0), sigma_z()), &op(v(0, 0), sigma_x())).unwrap();
        assert_eq!(out.as_site_matrix().unwrap(), -sigma_x());
        assert!(sandwich(&op(v(1, 0), sigma_z()), &a).is_err());
    }

    #[test]
    fn positivity_examples() {
        assert!(op(v(0, 0), identity2() * c(0.3)).is_positive(EIGEN_TOL).unwrap());
        assert!(!op(v(0, 0), sigma_z()).is_positive(EIGEN_TOL).unwrap());
        let r = 1.0 / (12.0 * 2f64.sqrt());
        assert!(op(v(0, 0), diag2(1.0 / 12.0 + r, 1.0 / 12.0 - r)).is_positive(EIGEN_TOL).unwrap());
        let skew = op(v(0, 0), SiteMatrix::new(c(1.), c(1.), c(0.), c(1.)));
        assert!(matches!(skew.is_positive(EIGEN_TOL), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn expm_matches_scalar_projection_formula() {
        // exp(t P) = 1 + (e^t - 1) P for a projection P
        let p = (Dense::identity(4, 4) + op(v(0, 0), sigma_z()).tensor(&op(v(1, 0), sigma_z())).unwrap().into_matrix()) * c(0.5);
        for t in [0.0, 0.3, 2.0, 8.0] {
            let e = expm(&(&p * c(t)));
            let expected = Dense::identity(4, 4) + &p * c(t.exp() - 1.0);
            assert!(max_abs(&(e - &expected)) <= 1e-13 * t.exp().max(1.0));
        }
    }

    #[test]
    fn site_sqrt_squares_back() {
        let h = SiteMatrix::new(c(2.0), C64::new(0.5, 0.25), C64::new(0.5, -0.25), c(1.0));
        let r = site_sqrt(&h).unwrap();
        assert!(max_abs(&(r * r - h)) < 1e-13);
        assert!(site_sqrt(&sigma_z()).is_err());
    }

    #[test]
    fn embedded_multiplication_matches_dense() {
        let target = vec![v(0, 0), v(1, 0), v(0, 1)];
        let k = LocalOperator::new(
            vec![v(0, 1), v(0, 0)],
            Dense::from_fn(4, 4, |i, j| C64::new(i as f64 + 0.1 * j as f64, (i * j) as f64 * 0.3)),
        )
        .unwrap();
        let m = Dense::from_fn(8, 8, |i, j| C64::new((i + 2 * j) as f64 * 0.1, (i as f64) - (j as f64)));
        let big = k.embed(&target).unwrap().into_matrix();
        assert!(max_abs(&(mul_embedded_right(&m, &target, &k).unwrap() - &m * &big)) < 1e-12);
        assert!(max_abs(&(mul_embedded_left(&target, &k, &m).unwrap() - &big * &m)) < 1e-12);
    }

    #[test]
    fn json_shape() {
        let a = op(v(1, 2), SiteMatrix::new(c(1.), C64::new(0., 2.), c(3.), c(4.)));
        let s = serde_json::to_value(&a).unwrap();
        assert_eq!(s["support"], serde_json::json!([[1, 2]]));
        assert_eq!(s["re"], serde_json::json!([1.0, 0.0, 3.0, 4.0]));
        assert_eq!(s["im"], serde_json::json!([0.0, 2.0, 0.0, 0.0]));
        let back: LocalOperator = serde_json::from_value(s).unwrap();
        assert_eq!(back, a);
        let bad = serde_json::json!({"support": [[0, 0], [0, 0]], "re": vec![0.0; 16], "im": vec![0.0; 16]});
        assert!(serde_json::from_value::<LocalOperator>(bad).is_err());
    }
}
