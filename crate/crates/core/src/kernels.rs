//! Interaction kernels of the two Ising-type models on the comb.
//!
//! Tooth edges `(v, v + e2)` carry the two-site kernel
//! `cos(β) 1⊗1 - sin(β) σz⊗σz`. Each spine vertex couples to both of its
//! successors and the successors couple to each other with strength `J`,
//! giving the three-site kernel
//! `exp(β H[v,v+e1]) exp(β H[v,v+e2]) exp(Jβ H[v+e1,v+e2])` with
//! `H[x,y] = (1 + σz(x)σz(y)) / 2`, which expands to
//! `A 1 + B σzσz1 + B σz1σz + C 1σzσz`.

use serde::{Deserialize, Serialize};

use crate::algebra::{c, expm, identity2, max_abs, sigma_z, Dense, LocalOperator};
use crate::config::Limits;
use crate::error::{Error, Result};
use crate::graph::{self, Vertex};

/// Relative tolerance for agreement between the independent construction
/// routes of the coefficients and kernels.
pub const ROUTE_TOL: f64 = 1e-12;

/// Inverse temperature, coupling and every derived coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub theta: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "K3")]
    pub k3: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "R3")]
    pub r3: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    /// `1 / tau1`, the scale of the disordered boundary field.
    pub alpha: f64,
    /// `tau3 / (4 tau1)`.
    pub rate_paper: f64,
    /// `tau3 / (2 tau1)`.
    pub rate_direct: f64,
    /// `-sin(2β)`, the per-edge decay factor of `σz` correlations up a tooth.
    pub tooth_rate: f64,
}

/// `(tau1, tau2, tau3)` from the closed forms in `θ = e^{2β}`.
pub fn tau_closed_forms(beta: f64, j: f64) -> (f64, f64, f64) {
    let theta = (2.0 * beta).exp();
    let theta_j = theta.powf(j);
    let tau1 = 0.25 * (theta_j * (theta * theta + 1.0) + 2.0 * theta);
    let tau2 = 0.25 * (theta_j * (theta * theta + 1.0) - 2.0 * theta);
    let tau3 = 0.5 * theta_j * (theta * theta - 1.0);
    (tau1, tau2, tau3)
}

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0)
}

/// Derives every coefficient from `(β, J)`. The `τ`s are computed from
/// `A, B, C` and checked against their closed forms.
pub fn model_params(beta: f64, j: f64) -> Result<ModelParams> {
    if !(beta.is_finite() && j.is_finite()) || beta < 0.0 || j < 0.0 {
        return Err(Error::OutOfRange(format!("beta = {beta}, J = {j}")));
    }
    let eb = beta.exp();
    let ejb = (j * beta).exp();
    let k0 = 0.5 * (eb + 1.0);
    let k3 = 0.5 * (eb - 1.0);
    let r0 = 0.5 * (ejb + 1.0);
    let r3 = 0.5 * (ejb - 1.0);

    let a = k0 * k0 * r0 + k3 * k3 * r3;
    let b = k0 * k3 * (r0 + r3);
    let cc = k0 * k0 * r3 + k3 * k3 * r0;

    let tau1 = a * a + 2.0 * b * b + cc * cc;
    let tau2 = 2.0 * (a * cc + b * b);
    let tau3 = 4.0 * b * (a + cc);

    let (t1, t2, t3) = tau_closed_forms(beta, j);
    let deviation = [(tau1, t1), (tau2, t2), (tau3, t3)]
        .iter()
        .map(|&(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max);
    if !(rel_close(tau1, t1, ROUTE_TOL) && rel_close(tau2, t2, ROUTE_TOL) && rel_close(tau3, t3, ROUTE_TOL)) {
        return Err(Error::RouteMismatch { what: "tau coefficients", deviation });
    }

    Ok(ModelParams {
        beta,
        j,
        theta: (2.0 * beta).exp(),
        k0,
        k3,
        r0,
        r3,
        a,
        b,
        c: cc,
        tau1,
        tau2,
        tau3,
        alpha: 1.0 / tau1,
        rate_paper: tau3 / (4.0 * tau1),
        rate_direct: tau3 / (2.0 * tau1),
        tooth_rate: -(2.0 * beta).sin(),
    })
}

impl ModelParams {
    /// Parameters at a given `θ = e^{2β}`.
    pub fn from_theta(theta: f64, j: f64) -> Result<Self> {
        if theta.is_nan() || theta <= 0.0 {
            return Err(Error::OutOfRange(format!("theta = {theta}")));
        }
        model_params(0.5 * theta.ln(), j)
    }

    /// `sin(2β) = ±1`: the tooth fixed-point system no longer pins
    /// `h11 = h22` (at `-1`) or the tooth kernel is singular (at `+1`).
    pub fn tooth_degenerate(&self) -> bool {
        ((2.0 * self.beta).sin().abs() - 1.0).abs() < 1e-12
    }

    pub const CSV_HEADER: [&'static str; 16] = [
        "beta", "J", "theta", "K0", "K3", "R0", "R3", "A", "B", "C", "tau1", "tau2", "tau3", "alpha", "rate_paper",
        "rate_direct",
    ];

    pub fn csv_values(&self) -> [f64; 16] {
        [
            self.beta,
            self.j,
            self.theta,
            self.k0,
            self.k3,
            self.r0,
            self.r3,
            self.a,
            self.b,
            self.c,
            self.tau1,
            self.tau2,
            self.tau3,
            self.alpha,
            self.rate_paper,
            self.rate_direct,
        ]
    }
}

fn tooth_tip(v: Vertex) -> Vertex {
    Vertex::new(v.k, v.l + 1)
}

fn spine_support(v: Vertex) -> Vec<Vertex> {
    vec![v, Vertex::new(v.k + 1, v.l), tooth_tip(v)]
}

fn zz(sites: &[Vertex], x: usize, y: usize) -> Dense {
    let factors: Vec<_> = sites
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, if i == x || i == y { sigma_z() } else { identity2() }))
        .collect();
    LocalOperator::product(&factors).expect("distinct sites").into_matrix()
}

/// Tooth kernel on `(v, v + e2)`.
pub fn kernel_l1(beta: f64, v: Vertex) -> LocalOperator {
    let sites = vec![v, tooth_tip(v)];
    let m = Dense::identity(4, 4) * c(beta.cos()) - zz(&sites, 0, 1) * c(beta.sin());
    LocalOperator::new(sites, m).expect("two distinct sites")
}

/// Spine kernel on `(v, v + e1, v + e2)` from matrix exponentials of the
/// edge projections.
pub fn kernel_l2_exponential(params: &ModelParams, v: Vertex) -> LocalOperator {
    let sites = spine_support(v);
    let id = Dense::identity(8, 8);
    let proj = |x, y| (&id + zz(&sites, x, y)) * c(0.5);
    let k1 = expm(&(proj(0, 1) * c(params.beta)));
    let k2 = expm(&(proj(0, 2) * c(params.beta)));
    let l = expm(&(proj(1, 2) * c(params.j * params.beta)));
    LocalOperator::new(sites, k1 * k2 * l).expect("three distinct sites")
}

/// Spine kernel on `(v, v + e1, v + e2)` from the `A, B, C` expansion.
pub fn kernel_l2_closed(params: &ModelParams, v: Vertex) -> LocalOperator {
    let sites = spine_support(v);
    let m = Dense::identity(8, 8) * c(params.a)
        + (zz(&sites, 0, 1) + zz(&sites, 0, 2)) * c(params.b)
        + zz(&sites, 1, 2) * c(params.c);
    LocalOperator::new(sites, m).expect("three distinct sites")
}

/// Spine kernel, built by both routes; errors if they disagree.
pub fn kernel_l2(params: &ModelParams, v: Vertex) -> Result<LocalOperator> {
    let closed = kernel_l2_closed(params, v);
    let expo = kernel_l2_exponential(params, v);
    let deviation = max_abs(&(closed.matrix() - expo.matrix()));
    let scale = max_abs(closed.matrix()).max(1.0);
    if deviation > ROUTE_TOL * scale {
        return Err(Error::RouteMismatch { what: "spine kernel", deviation });
    }
    Ok(closed)
}

/// The kernel attached to `v` and its successors, by vertex class.
pub fn vertex_kernel(params: &ModelParams, v: Vertex) -> Result<LocalOperator> {
    if v.is_spine() {
        kernel_l2(params, v)
    } else {
        Ok(kernel_l1(params.beta, v))
    }
}

/// `K[n,n+1]`: tensor product over level `n` (in level order) of each
/// vertex's kernel. Support: `x, S(x)` blocks concatenated.
pub fn layer_kernel(n: usize, params: &ModelParams, limits: &Limits) -> Result<LocalOperator> {
    limits.check_dense(2 * n + 3)?;
    let mut out: Option<LocalOperator> = None;
    for x in graph::level(n).iter() {
        let k = vertex_kernel(params, *x)?;
        out = Some(match out {
            None => k,
            Some(acc) => acc.tensor(&k)?,
        });
    }
    Ok(out.expect("levels are non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{sandwich, C64};
    use approx::assert_relative_eq;

    fn theta_beta(theta: f64) -> f64 {
        0.5 * theta.ln()
    }

    #[test]
    fn params_at_beta_zero() {
        let p = model_params(0.0, 1.7).unwrap();
        assert_eq!((p.a, p.b, p.c), (1.0, 0.0, 0.0));
        assert_eq!((p.tau1, p.tau2, p.tau3, p.alpha), (1.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn params_at_theta_two() {
        let p = model_params(theta_beta(2.0), 1.0).unwrap();
        let r2 = 2f64.sqrt();
        assert_relative_eq!(p.a, 5.0 * r2 / 4.0, max_relative = 1e-14);
        assert_relative_eq!(p.b, r2 / 4.0, max_relative = 1e-14);
        assert_relative_eq!(p.c, r2 / 4.0, max_relative = 1e-14);
        assert_relative_eq!(p.tau1, 3.5, max_relative = 1e-14);
        assert_relative_eq!(p.tau2, 1.5, max_relative = 1e-14);
        assert_relative_eq!(p.tau3, 3.0, max_relative = 1e-14);
        assert_relative_eq!(p.alpha, 2.0 / 7.0, max_relative = 1e-14);
        assert_relative_eq!(p.rate_paper, 3.0 / 14.0, max_relative = 1e-14);
        assert_relative_eq!(p.rate_direct, 3.0 / 7.0, max_relative = 1e-14);
    }

    #[test]
    fn params_at_theta_three() {
        let p = model_params(theta_beta(3.0), 1.0).unwrap();
        assert_relative_eq!(p.tau1, 9.0, max_relative = 1e-14);
        assert_relative_eq!(p.tau2, 6.0, max_relative = 1e-14);
        assert_relative_eq!(p.tau3, 12.0, max_relative = 1e-14);
    }

    #[test]
    fn params_reject_negative() {
        assert!(matches!(model_params(-0.1, 1.0), Err(Error::OutOfRange(_))));
        assert!(matches!(model_params(0.1, -1.0), Err(Error::OutOfRange(_))));
        assert!(model_params(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn coefficient_identities_on_grid() {
        for bi in 1..=20 {
            for ji in 1..=16 {
                let (beta, j) = (bi as f64 * 0.1, ji as f64 * 0.25);
                let p = model_params(beta, j).unwrap();
                assert_relative_eq!(p.b - p.c, 0.5 * (beta.exp() - (j * beta).exp()), epsilon = 1e-12 * p.a);
                // the single-exponential forms of A, B, C
                let a = 0.25 * (((j + 2.0) * beta).exp() + (j * beta).exp() + 2.0 * beta.exp());
                let b = 0.25 * (j * beta).exp() * ((2.0 * beta).exp() - 1.0);
                let cc = 0.25 * (((j + 2.0) * beta).exp() + (j * beta).exp() - 2.0 * beta.exp());
                assert_relative_eq!(p.a, a, max_relative = 1e-13);
                assert_relative_eq!(p.b, b, max_relative = 1e-13);
                assert_relative_eq!(p.c, cc, max_relative = 1e-13);
                assert!(p.tau1 > 0.0);
                assert!((0.0..=0.5).contains(&p.rate_paper));
                assert!((0.0..1.0).contains(&p.rate_direct));
            }
        }
        assert_eq!(model_params(0.3, 1.0).unwrap().b, model_params(0.3, 1.0).unwrap().c);
    }

    #[test]
    fn tooth_kernel_examples() {
        let v = Vertex::new(0, 1);
        assert_eq!(kernel_l1(0.0, v).matrix(), &Dense::identity(4, 4));
        let k = kernel_l1(std::f64::consts::FRAC_PI_4, v);
        let r2 = 2f64.sqrt();
        for (i, want) in [0.0, r2, r2, 0.0].into_iter().enumerate() {
            assert!((k.matrix()[(i, i)] - c(want)).norm() < 1e-15);
        }
        for beta in [0.1, 0.7, 1.3, 2.0] {
            let k = kernel_l1(beta, v);
            let sq = k.matrix() * k.matrix();
            let expected = Dense::identity(4, 4) - zz(k.support(), 0, 1) * c((2.0 * beta).sin());
            assert!(max_abs(&(sq - expected)) < 1e-14);
            let kk = sandwich(&k, &LocalOperator::identity(k.support().to_vec()).unwrap()).unwrap();
            let reduced = kk.partial_trace_onto(&[v]).unwrap();
            assert!(max_abs(&(reduced.matrix() - Dense::identity(2, 2))) < 1e-12);
        }
    }

    #[test]
    fn spine_kernel_examples() {
        let v = Vertex::ROOT;
        let zero = model_params(0.0, 1.0).unwrap();
        assert_eq!(kernel_l2(&zero, v).unwrap().matrix(), &Dense::identity(8, 8));

        let p = model_params(theta_beta(2.0), 1.0).unwrap();
        let k = kernel_l2(&p, v).unwrap();
        let r2 = 2f64.sqrt();
        assert!((k.matrix()[(0, 0)] - c(2.0 * r2)).norm() < 1e-13);
        assert!((k.matrix()[(0, 0)] - c((3.0 * p.beta).exp())).norm() < 1e-13);
        // off-diagonal entries vanish
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_eq!(k.matrix()[(i, j)], C64::default());
                }
            }
        }
        let kk = sandwich(&k, &LocalOperator::identity(k.support().to_vec()).unwrap()).unwrap();
        let reduced = kk.partial_trace_onto(&[v]).unwrap();
        assert!(max_abs(&(reduced.matrix() - Dense::identity(2, 2) * c(p.tau1))) < 1e-12);
    }

    #[test]
    fn spine_kernel_routes_agree_on_grid() {
        for bi in 1..=20 {
            for ji in 1..=16 {
                let p = model_params(bi as f64 * 0.1, ji as f64 * 0.25).unwrap();
                let v = Vertex::new(2, 0);
                let closed = kernel_l2_closed(&p, v);
                let expo = kernel_l2_exponential(&p, v);
                let scale = max_abs(closed.matrix());
                assert!(max_abs(&(closed.matrix() - expo.matrix())) <= 1e-12 * scale);
                assert!(closed.is_positive(1e-10).unwrap());
            }
        }
    }

    #[test]
    fn kernels_commute_with_global_sigma_z() {
        let p = model_params(0.8, 2.0).unwrap();
        for k in [kernel_l2(&p, Vertex::ROOT).unwrap(), kernel_l1(0.8, Vertex::new(1, 1))] {
            let zs: Vec<_> = k.support().iter().map(|s| (*s, sigma_z())).collect();
            let z = LocalOperator::product(&zs).unwrap();
            let lhs = z.mul(&k).unwrap();
            let rhs = k.mul(&z).unwrap();
            assert_eq!(lhs.max_abs_diff(&rhs).unwrap(), 0.0);
        }
    }

    #[test]
    fn layer_kernel_examples() {
        let p = model_params(theta_beta(2.0), 1.0).unwrap();
        let limits = Limits::default();
        let k0 = layer_kernel(0, &p, &limits).unwrap();
        assert_eq!(k0, kernel_l2(&p, Vertex::ROOT).unwrap());
        assert_eq!(k0.support(), &[Vertex::new(0, 0), Vertex::new(1, 0), Vertex::new(0, 1)]);

        let zero = model_params(0.0, 3.0).unwrap();
        let id = layer_kernel(1, &zero, &limits).unwrap();
        assert_eq!(id.num_sites(), 5);
        assert_eq!(id.matrix(), &Dense::identity(32, 32));

        let k1 = layer_kernel(1, &p, &limits).unwrap();
        let expected = kernel_l2(&p, Vertex::new(1, 0)).unwrap().tensor(&kernel_l1(p.beta, Vertex::new(0, 1))).unwrap();
        assert_eq!(k1, expected);
        assert_eq!(
            k1.support(),
            &[Vertex::new(1, 0), Vertex::new(2, 0), Vertex::new(1, 1), Vertex::new(0, 1), Vertex::new(0, 2)]
        );

        let tight = Limits { max_dense_sites: 6, ..Limits::default() };
        assert!(matches!(layer_kernel(2, &p, &tight), Err(Error::VolumeTooLarge { .. })));
    }

    #[test]
    fn params_json_and_csv() {
        let p = model_params(0.5, 2.0).unwrap();
        let js = serde_json::to_value(p).unwrap();
        assert_eq!(js["J"], 2.0);
        assert!(js.get("tau3").is_some() && js.get("rate_direct").is_some());
        assert_eq!(p.csv_values().len(), ModelParams::CSV_HEADER.len());
    }
}
