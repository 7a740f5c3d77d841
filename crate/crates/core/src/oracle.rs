//! Reference evaluation straight from the definition of the chain.
//!
//! `φ_n(a) = ρ0(E_0 ∘ E_1 ∘ … ∘ E_n(h^{1/2} a h^{1/2}))` where each
//! `E_k(X) = Tr_{W_{k+1}}(K[k,k+1]* X K[k,k+1])` acts on the whole volume.
//! The operator on `Λ_{k+1}` is split into blocks `X_pr` indexed by basis
//! states of the outermost level, so that
//! `E_k(X) = 2^{-m} Σ_{p,q,r} K_pq* X_pr K_rq`
//! with `K_pq` the blocks of the layer kernel. Only `Λ_k` ever needs to be
//! dense, never `Λ_{k+1}`; blocks that vanish identically are skipped.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{c, max_abs, mul_embedded_left, mul_embedded_right, sandwich, site_sqrt, Dense, LocalOperator, C64};
use crate::battery::random_product_on;
use crate::boundary::BoundaryField;
use crate::config::Limits;
use crate::error::{Error, Result};
use crate::graph::{self, Vertex};
use crate::kernels::{layer_kernel, vertex_kernel, ModelParams};

/// Operator on `Λ_{k+1}`, either dense or as `a ⊗ g` with `g` on the
/// outermost level.
enum Outer {
    Factored { a: Dense, g: Dense },
    Full(Dense),
}

impl Outer {
    fn block(&self, p: usize, r: usize, m: usize) -> Option<Dense> {
        match self {
            Outer::Factored { a, g } => {
                let z = g[(p, r)];
                (z != C64::default()).then(|| a * z)
            }
            Outer::Full(x) => {
                let d = x.nrows() / m;
                let b = Dense::from_fn(d, d, |i, j| x[(i * m + p, j * m + r)]);
                b.iter().any(|z| *z != C64::default()).then_some(b)
            }
        }
    }
}

/// One application of `E_k`, returning a dense operator on `Λ_k`.
fn apply_layer(x: &Outer, k: usize, params: &ModelParams, limits: &Limits) -> Result<Dense> {
    let inner = graph::level(k).vertices;
    let outer = graph::level(k + 1).vertices;
    let mut order = inner.clone();
    order.extend_from_slice(&outer);
    let kernel = layer_kernel(k, params, limits)?.embed(&order)?;
    let m = 1usize << outer.len();
    let dk = 1usize << inner.len();
    let kmat = kernel.matrix();

    let blocks: Vec<Option<LocalOperator>> = (0..m * m)
        .map(|idx| {
            let (p, q) = (idx / m, idx % m);
            let b = Dense::from_fn(dk, dk, |i, j| kmat[(i * m + p, j * m + q)]);
            if b.iter().all(|z| *z == C64::default()) {
                Ok(None)
            } else {
                LocalOperator::new(inner.clone(), b).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let kb = |p: usize, q: usize| blocks[p * m + q].as_ref();

    let target = graph::volume(k);
    limits.check_dense(target.len())?;
    let dim = 1usize << target.len();
    let xb: Vec<Option<Dense>> = (0..m * m).map(|idx| x.block(idx / m, idx % m, m)).collect();

    let mut out = Dense::zeros(dim, dim);
    for q in 0..m {
        for r in 0..m {
            let Some(k_rq) = kb(r, q) else { continue };
            let mut left: Option<Dense> = None;
            for p in 0..m {
                let (Some(k_pq), Some(x_pr)) = (kb(p, q), xb[p * m + r].as_ref()) else { continue };
                let term = mul_embedded_left(&target, &k_pq.adjoint(), x_pr)?;
                left = Some(match left {
                    None => term,
                    Some(acc) => acc + term,
                });
            }
            if let Some(t) = left {
                out += mul_embedded_right(&t, &target, k_rq)?;
            }
        }
    }
    out /= c(m as f64);
    Ok(out)
}

/// `φ_n(a)` for `a` supported in `Λ_n`, by composing the global transition
/// expectations level by level.
pub fn brute_force_phi(
    a: &LocalOperator,
    n: usize,
    params: &ModelParams,
    field: &BoundaryField,
    limits: &Limits,
) -> Result<C64> {
    let sites = graph::volume_size(n + 1);
    if sites > limits.max_oracle_sites {
        return Err(Error::OracleVolumeTooLarge { sites, cap: limits.max_oracle_sites });
    }
    let volume = graph::volume(n);
    limits.check_dense(volume.len())?;
    let a = a.embed(&volume).map_err(|_| Error::SupportOutsideVolume(n))?;

    // h^{1/2} a h^{1/2} with h^{1/2} = ⊗ sqrt(h) on level n + 1
    let root_h = site_sqrt(&field.h)?;
    let boundary = graph::level(n + 1)
        .iter()
        .map(|v| LocalOperator::site(*v, &root_h))
        .try_fold(None::<LocalOperator>, |acc, s| -> Result<_> {
            Ok(Some(match acc {
                None => s,
                Some(acc) => acc.tensor(&s)?,
            }))
        })?
        .expect("levels are non-empty");
    let g = boundary.matrix() * boundary.matrix();

    let mut current = apply_layer(&Outer::Factored { a: a.into_matrix(), g }, n, params, limits)?;
    for k in (0..n).rev() {
        current = apply_layer(&Outer::Full(current), k, params, limits)?;
    }
    let root = LocalOperator::new(vec![Vertex::ROOT], current)?.as_site_matrix().expect("single site");
    Ok(field.rho0(&root))
}

/// Largest entrywise gap between the layer transition expectation computed
/// densely and as a tensor product of per-vertex maps, over `samples` random
/// product observables on levels `n` and `n + 1`.
pub fn verify_localization(n: usize, params: &ModelParams, samples: usize, seed: u64, limits: &Limits) -> Result<f64> {
    if n > 2 {
        return Err(Error::Config(format!("localization check supports levels up to 2, got {n}")));
    }
    let kernel = layer_kernel(n, params, limits)?;
    let inner = graph::level(n).vertices;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let obs = random_product_on(&mut rng, &graph::layer_sites(n), false);
        let dense = sandwich(&kernel, &obs.to_operator(kernel.support())?)?.partial_trace_onto(&inner)?;

        let mut local: Option<LocalOperator> = None;
        for x in &inner {
            let kx = vertex_kernel(params, *x)?;
            let piece = sandwich(&kx, &obs.restricted_to(kx.support()).to_operator(kx.support())?)?.partial_trace_onto(&[*x])?;
            local = Some(match local {
                None => piece,
                Some(acc) => acc.tensor(&piece)?,
            });
        }
        let local = local.expect("levels are non-empty");
        worst = worst.max(max_abs(&(dense.matrix() - local.embed(&inner)?.matrix())));
    }
    Ok(worst)
}
