//! The explicit constant chain behind the entropy--entropy-dissipation
//! estimate, finite-dimensional inequality (FDI) evaluation, and the closed
//! forms available for the built-in enzyme and cyclic templates.
//!
//! The chain takes an entropy bound `K`, a positive equilibrium and the
//! network data, and produces `K_tilde, K1, beta_1..4, K3, H_i, K2, lambda_1`
//! and finally `lambda = 1/2 min(lambda_1, K2 H1 / K1)`, where `H1` is either
//! a closed form (templates) or a sampled upper bound on the FDI infimum.
//!
//! Two index-heavy formulas (`beta_2` and `H_i`) are evaluated exactly as
//! printed in their source, including the `(N - i)` exponent and the product
//! over `l = 1..N-i`; the intended index convention for general species
//! orderings is ambiguous there, which is documented rather than resolved.

pub mod templates;

use crate::entropy::phi;
use crate::equilibrium::{find_boundary_equilibria, SolveOptions};
use crate::linalg;
use crate::network::{ConservationStructure, MassVector, Network};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstantsError {
    #[error("nonpositive input: {what}")]
    NonpositiveInput { what: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mu component {index} is {value}, below -1")]
    MuOutOfRange { index: usize, value: f64 },
    #[error("alpha must be >= 1, got {alpha}")]
    AlphaOutOfRange { alpha: f64 },
    #[error("the network has {count} boundary equilibria; the finite-dimensional inequality constant is not positive there")]
    BoundaryEquilibriaPresent { count: usize },
    #[error("H1 missing from the report; run estimate or a closed form first")]
    MissingH1,
    #[error("boundary equilibria search failed: {0}")]
    Equilibrium(#[from] crate::equilibrium::EquilibriumError),
}

/// Configuration entering the chain: the set-splitting threshold L and the
/// Poincare / logarithmic-Sobolev constants of the domain.
///
/// Defaults are the conventional unit-interval Neumann values `C_P = pi^2`
/// and `C_LSI = pi^2 / 2`; they are configuration, not derived quantities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChainConfig {
    pub l_threshold: f64,
    pub c_poincare: f64,
    pub c_lsi: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            l_threshold: 1.0,
            c_poincare: std::f64::consts::PI.powi(2),
            c_lsi: std::f64::consts::PI.powi(2) / 2.0,
        }
    }
}

/// How the H1 value in a report was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum H1Source {
    ClosedForm,
    Estimated,
    TimeDependent,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct H1Value {
    pub value: f64,
    pub source: H1Source,
}

/// One self-documenting formula string per constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Formula {
    pub constant: String,
    pub formula: String,
}

/// The full constant chain. `h1` and `lambda` are filled in separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub k: f64,
    pub k_tilde: f64,
    pub k1: f64,
    pub beta: [f64; 4],
    pub l: f64,
    pub k3: f64,
    pub h_script: Vec<f64>,
    pub h_script_max: f64,
    pub k2: f64,
    pub lambda1: f64,
    pub h1: Option<H1Value>,
    pub lambda: Option<f64>,
    pub config: ChainConfig,
    pub formulas: Vec<Formula>,
}

/// Evaluates the chain (everything except H1) for a positive equilibrium and
/// an entropy bound `K >= E(c_bar | c_inf)`.
pub fn chain_constants(
    net: &Network,
    c_inf: &[f64],
    k_entropy: f64,
    config: &ChainConfig,
) -> Result<ConstantsReport, ConstantsError> {
    let n = net.n_species();
    if c_inf.len() != n {
        return Err(ConstantsError::DimensionMismatch {
            expected: n,
            got: c_inf.len(),
        });
    }
    for (label, value) in [
        ("K", k_entropy),
        ("L", config.l_threshold),
        ("C_P", config.c_poincare),
        ("C_LSI", config.c_lsi),
    ] {
        if !(value > 0.0) {
            return Err(ConstantsError::NonpositiveInput {
                what: format!("{label} = {value}"),
            });
        }
    }
    if let Some((i, &v)) = c_inf.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(ConstantsError::NonpositiveInput {
            what: format!("c_inf[{i}] = {v}"),
        });
    }

    let l = config.l_threshold;
    let n_f = n as f64;
    let n_reactions = net.reactions().len() as f64;
    let c_sum: f64 = c_inf.iter().sum();
    let k_tilde = 2.0 * (k_entropy + c_sum);
    let sqrt_kt = k_tilde.sqrt();

    let k1 = c_inf
        .iter()
        .map(|&ci| ci * phi(k_tilde / ci))
        .fold(f64::NEG_INFINITY, f64::max);

    let monomial_inf = |y: usize| net.monomial(y, c_inf);
    let beta1 = 0.5
        * net
            .reactions()
            .iter()
            .map(|r| r.rate * monomial_inf(r.reactant))
            .fold(f64::INFINITY, f64::min);

    // beta_2 = 2 beta_1 N |R| max over complexes y and species pairs (i, j) of
    //   [c_i^(y_i - 1) prod_{l=1..N-i} c_i^(y_l)]^-1
    //   (sqrt(Kt)^(y_i) + L y_j (sqrt(Kt)+L)^(y_j - 1))^(N-i)
    //   y_i (sqrt(Kt)+L)^(y_i - 1)
    let mut beta2_max = 0.0f64;
    for y in 0..net.n_complexes() {
        let yv = net.complex_f64(y);
        for i in 1..=n {
            let yi = yv[i - 1];
            if yi == 0.0 {
                continue;
            }
            let ci = c_inf[i - 1];
            let mut denom = ci.powf(yi - 1.0);
            for ell in 1..=(n - i) {
                denom *= ci.powf(yv[ell - 1]);
            }
            for j in 1..=n {
                let yj = yv[j - 1];
                let bracket = sqrt_kt.powf(yi) + l * yj * (sqrt_kt + l).powf(yj - 1.0);
                let term = bracket.powi((n - i) as i32) * yi * (sqrt_kt + l).powf(yi - 1.0) / denom;
                beta2_max = beta2_max.max(term);
            }
        }
    }
    let beta2 = 2.0 * beta1 * n_f * n_reactions * beta2_max;

    let d_min = net
        .diffusion()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let beta3 = config.c_poincare * d_min;

    let beta4_denom = net
        .reactions()
        .iter()
        .map(|r| {
            let yr: f64 = net.complex_f64(r.reactant).iter().sum();
            let yp: f64 = net.complex_f64(r.product).iter().sum();
            2.0 * (k_tilde.powf(yr) / monomial_inf(r.reactant)
                + k_tilde.powf(yp) / monomial_inf(r.product))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let beta4 = n_f * beta3 * l * l / beta4_denom;

    let gamma = 0.5 * (beta3 / beta2).min(1.0);
    let k3 = (2.0 * d_min).min((gamma * beta1).min(beta4));

    // H_i = 2 max over complexes y and species j of
    //   y_i (sqrt(Kt)(1+sqrt(c_i)))^(y_i - 1) / c_i^(y_i + 1)
    //   [ sqrt(Kt/c_j)^(y_j) + (y_j sqrt(Kt)/c_j)(sqrt(Kt)(1+sqrt(c_i))/c_i)^(y_j - 1) ]^(N-i)
    let mut h_script = vec![0.0f64; n];
    for i in 1..=n {
        let ci = c_inf[i - 1];
        let base_i = sqrt_kt * (1.0 + ci.sqrt());
        let mut best = 0.0f64;
        for y in 0..net.n_complexes() {
            let yv = net.complex_f64(y);
            let yi = yv[i - 1];
            if yi == 0.0 {
                continue;
            }
            let lead = yi * base_i.powf(yi - 1.0) / ci.powf(yi + 1.0);
            for j in 1..=n {
                let yj = yv[j - 1];
                let cj = c_inf[j - 1];
                let bracket = (k_tilde / cj).sqrt().powf(yj)
                    + (yj * sqrt_kt / cj) * (base_i / ci).powf(yj - 1.0);
                best = best.max(lead * bracket.powi((n - i) as i32));
            }
        }
        h_script[i - 1] = 2.0 * best;
    }
    let h_script_max = h_script.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let theta = 0.5f64.min(config.c_poincare / (n_f * n_reactions * h_script_max));
    let k2 = 0.5 * k3 * theta;

    let lambda1 = config.c_lsi * d_min;

    let formulas = vec![
        Formula {
            constant: "k_tilde".into(),
            formula: "K_tilde = 2 (K + sum_i c_inf_i)".into(),
        },
        Formula {
            constant: "k1".into(),
            formula: "K1 = max_i c_inf_i Phi(K_tilde / c_inf_i), Phi(z) = (z ln z - z + 1)/(sqrt(z)-1)^2".into(),
        },
        Formula {
            constant: "beta1".into(),
            formula: "beta1 = 1/2 min_r k_r c_inf^{y_r}".into(),
        },
        Formula {
            constant: "beta2".into(),
            formula: "beta2 = 2 beta1 N |R| max_{y,i,j} [c_i^{y_i-1} prod_{l=1..N-i} c_i^{y_l}]^{-1} (sqrt(Kt)^{y_i} + L y_j (sqrt(Kt)+L)^{y_j-1})^{N-i} y_i (sqrt(Kt)+L)^{y_i-1}".into(),
        },
        Formula {
            constant: "beta3".into(),
            formula: "beta3 = C_P min_i d_i".into(),
        },
        Formula {
            constant: "beta4".into(),
            formula: "beta4 = N beta3 L^2 [max_r 2 (Kt^{|y_r|}/c_inf^{y_r} + Kt^{|y_r'|}/c_inf^{y_r'})]^{-1}".into(),
        },
        Formula {
            constant: "k3".into(),
            formula: "K3 = min(2 min_j d_j, min(gamma beta1, beta4)), gamma = 1/2 min(1, beta3/beta2)".into(),
        },
        Formula {
            constant: "h_script".into(),
            formula: "H_i = 2 max_{y,j} y_i (sqrt(Kt)(1+sqrt(c_i)))^{y_i-1} c_i^{-(y_i+1)} [sqrt(Kt/c_j)^{y_j} + (y_j sqrt(Kt)/c_j)(sqrt(Kt)(1+sqrt(c_i))/c_i)^{y_j-1}]^{N-i}".into(),
        },
        Formula {
            constant: "k2".into(),
            formula: "K2 = 1/2 K3 min(1/2, C_P (N |R| max_i H_i)^{-1})".into(),
        },
        Formula {
            constant: "lambda1".into(),
            formula: "lambda1 = C_LSI min_i d_i".into(),
        },
        Formula {
            constant: "lambda".into(),
            formula: "lambda = 1/2 min(lambda1, K2 H1 / K1)".into(),
        },
    ];

    Ok(ConstantsReport {
        k: k_entropy,
        k_tilde,
        k1,
        beta: [beta1, beta2, beta3, beta4],
        l,
        k3,
        h_script,
        h_script_max,
        k2,
        lambda1,
        h1: None,
        lambda: None,
        config: *config,
        formulas,
    })
}

/// Scans L over a log grid and returns the configuration maximizing K3.
pub fn scan_l_threshold(
    net: &Network,
    c_inf: &[f64],
    k_entropy: f64,
    config: &ChainConfig,
    grid_points: usize,
) -> Result<ConstantsReport, ConstantsError> {
    let lo = 1e-2f64.ln();
    let hi = 1e2f64.ln();
    let points = grid_points.max(2);
    let mut best: Option<ConstantsReport> = None;
    for idx in 0..points {
        let l = (lo + (hi - lo) * idx as f64 / (points - 1) as f64).exp();
        let cfg = ChainConfig {
            l_threshold: l,
            ..*config
        };
        let report = chain_constants(net, c_inf, k_entropy, &cfg)?;
        if best.as_ref().is_none_or(|b| report.k3 > b.k3) {
            best = Some(report);
        }
    }
    Ok(best.expect("grid nonempty"))
}

/// `lambda = 1/2 min(lambda1, K2 H1 / K1)`.
pub fn lambda_rate(report: &ConstantsReport) -> Result<f64, ConstantsError> {
    let h1 = report.h1.ok_or(ConstantsError::MissingH1)?;
    Ok(0.5 * report.lambda1.min(report.k2 * h1.value / report.k1))
}

/// One point of the finite-dimensional inequality in the variables
/// `c_bar = c_inf (1 + mu)^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdiPoint {
    pub mu: Vec<f64>,
    /// `|Q (c_inf (mu^2 + 2 mu))|_inf`
    pub constraint_residual: f64,
    /// `sum_r [(1+mu)^{y_r} - (1+mu)^{y_r'}]^2`
    pub lhs: f64,
    /// `sum_i mu_i^2`
    pub rhs_base: f64,
}

/// Evaluates lhs, rhs and the mass-constraint residual at `mu`.
pub fn fdi_evaluate(
    net: &Network,
    cs: &ConservationStructure,
    c_inf: &[f64],
    mu: &[f64],
) -> Result<FdiPoint, ConstantsError> {
    let n = net.n_species();
    if mu.len() != n || c_inf.len() != n {
        return Err(ConstantsError::DimensionMismatch {
            expected: n,
            got: mu.len(),
        });
    }
    if let Some((i, &v)) = mu.iter().enumerate().find(|(_, v)| **v < -1.0) {
        return Err(ConstantsError::MuOutOfRange { index: i, value: v });
    }
    let lhs = fdi_lhs(net, mu);
    let rhs_base = mu.iter().map(|v| v * v).sum();
    let defect: Vec<f64> = mu
        .iter()
        .zip(c_inf)
        .map(|(m, ci)| ci * (m * m + 2.0 * m))
        .collect();
    let constraint_residual = cs
        .q_f64()
        .iter()
        .map(|row| linalg::dot(row, &defect).abs())
        .fold(0.0, f64::max);
    Ok(FdiPoint {
        mu: mu.to_vec(),
        constraint_residual,
        lhs,
        rhs_base,
    })
}

fn one_plus_mu_pow(y: &[f64], mu: &[f64]) -> f64 {
    let mut acc = 1.0;
    for (yi, m) in y.iter().zip(mu) {
        if *yi == 0.0 {
            continue;
        }
        let base = 1.0 + m;
        acc *= if *yi == 1.0 { base } else { base.powf(*yi) };
    }
    acc
}

fn fdi_lhs(net: &Network, mu: &[f64]) -> f64 {
    net.reactions()
        .iter()
        .map(|r| {
            let a = one_plus_mu_pow(net.complex_f64(r.reactant), mu);
            let b = one_plus_mu_pow(net.complex_f64(r.product), mu);
            (a - b) * (a - b)
        })
        .sum()
}

/// d/dmu_i of (1+mu)^y: `y_i (1+mu)^{y - e_i}`, finite at mu_i = -1.
fn one_plus_mu_pow_grad(y: &[f64], mu: &[f64], i: usize) -> f64 {
    if y[i] == 0.0 {
        return 0.0;
    }
    let mut acc = y[i];
    for (l, (yl, m)) in y.iter().zip(mu).enumerate() {
        let e = if l == i { yl - 1.0 } else { *yl };
        if e == 0.0 {
            continue;
        }
        let base = 1.0 + m;
        acc *= if e == 1.0 { base } else { base.powf(e) };
    }
    acc
}

fn fdi_lhs_gradient(net: &Network, mu: &[f64]) -> Vec<f64> {
    let n = mu.len();
    let mut grad = vec![0.0; n];
    for r in net.reactions() {
        let yr = net.complex_f64(r.reactant);
        let yp = net.complex_f64(r.product);
        let a = one_plus_mu_pow(yr, mu);
        let b = one_plus_mu_pow(yp, mu);
        let diff = 2.0 * (a - b);
        if diff == 0.0 {
            continue;
        }
        for i in 0..n {
            grad[i] += diff * (one_plus_mu_pow_grad(yr, mu, i) - one_plus_mu_pow_grad(yp, mu, i));
        }
    }
    grad
}

/// Directional floor of the FDI ratio at mu = 0: twice the smallest
/// eigenvalue of `sum_r (y_r - y_r')(y_r - y_r')^T` restricted to the
/// constraint tangent space `ker(Q diag(c_inf))`.
pub fn fdi_linearized_floor(net: &Network, cs: &ConservationStructure, c_inf: &[f64]) -> f64 {
    let n = net.n_species();
    let mut a = vec![vec![0.0; n]; n];
    for r in net.reactions() {
        let yr = net.complex_f64(r.reactant);
        let yp = net.complex_f64(r.product);
        let w: Vec<f64> = (0..n).map(|i| yr[i] - yp[i]).collect();
        for i in 0..n {
            for j in 0..n {
                a[i][j] += w[i] * w[j];
            }
        }
    }
    let q = cs.q_f64();
    let basis = if q.is_empty() {
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect()
    } else {
        let rows: Vec<Vec<f64>> = q
            .iter()
            .map(|row| row.iter().zip(c_inf).map(|(a, c)| a * c).collect())
            .collect();
        linalg::null_space(&rows, 1e-12)
    };
    if basis.is_empty() {
        return f64::INFINITY;
    }
    // Restricted matrix B A B^T in the orthonormal basis.
    let k = basis.len();
    let mut restricted = vec![vec![0.0; k]; k];
    for p in 0..k {
        let av: Vec<f64> = (0..n).map(|i| linalg::dot(&a[i], &basis[p])).collect();
        for (pq, bq) in basis.iter().enumerate() {
            restricted[p][pq] = linalg::dot(&av, bq);
        }
    }
    2.0 * linalg::sym_eigenvalues(&restricted)[0]
}

/// FDI objective with the near-zero substitution: for |mu|^2 below the
/// cutoff the linearized quotient `2 sum_r [(y_r - y_r') . mu]^2 / |mu|^2`
/// replaces the raw 0/0 ratio.
pub fn fdi_ratio(net: &Network, cs: &ConservationStructure, c_inf: &[f64], mu: &[f64]) -> f64 {
    let rhs_base: f64 = mu.iter().map(|v| v * v).sum();
    if rhs_base < 1e-16 {
        if rhs_base == 0.0 {
            return fdi_linearized_floor(net, cs, c_inf);
        }
        let n = mu.len();
        let mut num = 0.0;
        for r in net.reactions() {
            let yr = net.complex_f64(r.reactant);
            let yp = net.complex_f64(r.product);
            let dot: f64 = (0..n).map(|i| (yr[i] - yp[i]) * mu[i]).sum();
            num += dot * dot;
        }
        return 2.0 * num / rhs_base;
    }
    fdi_lhs(net, mu) / rhs_base
}

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("projection Newton did not reach tolerance (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("projected point leaves mu >= -1")]
    OutOfRange,
    #[error("singular projection system")]
    Singular,
}

const PROJECTION_TOL: f64 = 1e-13;

/// Projects `mu0` onto the constraint manifold `Q c_inf (mu^2 + 2 mu) = 0`
/// by Newton in the coefficients of `Delta = Q^T gamma`.
pub fn project_mu(q: &[Vec<f64>], c_inf: &[f64], mu0: &[f64]) -> Result<Vec<f64>, ProjectionError> {
    let m = q.len();
    if m == 0 {
        return Ok(mu0.to_vec());
    }
    let n = mu0.len();
    let mut gamma = vec![0.0; m];
    let scale = 1.0 + c_inf.iter().fold(0.0f64, |a, v| a.max(*v));
    let mut residual = f64::INFINITY;
    for _ in 0..80 {
        let mu: Vec<f64> = (0..n)
            .map(|i| mu0[i] + q.iter().zip(&gamma).map(|(row, g)| row[i] * g).sum::<f64>())
            .collect();
        let defect: Vec<f64> = mu
            .iter()
            .zip(c_inf)
            .map(|(mi, ci)| ci * (mi * mi + 2.0 * mi))
            .collect();
        let g: Vec<f64> = q.iter().map(|row| linalg::dot(row, &defect)).collect();
        residual = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if residual <= PROJECTION_TOL * scale {
            return if mu.iter().all(|v| *v >= -1.0) {
                Ok(mu)
            } else {
                Err(ProjectionError::OutOfRange)
            };
        }
        // Jacobian: Q diag(2 c_inf (1 + mu)) Q^T.
        let mut jac = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in 0..m {
                jac[a][b] = (0..n)
                    .map(|i| q[a][i] * 2.0 * c_inf[i] * (1.0 + mu[i]) * q[b][i])
                    .sum();
            }
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(step) = linalg::solve(&jac, &rhs) else {
            return Err(ProjectionError::Singular);
        };
        // Damped update to stay inside mu >= -1 where possible.
        let mut t = 1.0;
        for _ in 0..40 {
            let trial: Vec<f64> = gamma.iter().zip(&step).map(|(g, d)| g + t * d).collect();
            let mu_t: Vec<f64> = (0..n)
                .map(|i| mu0[i] + q.iter().zip(&trial).map(|(row, g)| row[i] * g).sum::<f64>())
                .collect();
            let defect_t: Vec<f64> = mu_t
                .iter()
                .zip(c_inf)
                .map(|(mi, ci)| ci * (mi * mi + 2.0 * mi))
                .collect();
            let res_t = q
                .iter()
                .map(|row| linalg::dot(row, &defect_t).abs())
                .fold(0.0f64, f64::max);
            if res_t < residual {
                gamma = trial;
                break;
            }
            t *= 0.5;
        }
    }
    Err(ProjectionError::NoConvergence { residual })
}

/// Multi-start budget for [`estimate_h1`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct H1Budget {
    pub starts: usize,
    pub descent_steps: usize,
}

impl Default for H1Budget {
    fn default() -> Self {
        H1Budget {
            starts: 256,
            descent_steps: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct H1Estimate {
    /// Best (smallest) constrained ratio found: an upper bound on the true
    /// infimum, not the infimum itself.
    pub value: f64,
    pub minimizer_mu: Vec<f64>,
    pub minimizer_cbar: Vec<f64>,
    pub starts_attempted: usize,
    pub projection_failures: usize,
}

/// Estimates the FDI constant by multi-start projected descent over
/// `Sigma_{K,M} = {c_bar in [0, K_tilde]^N : Q c_bar = M}` in the `mu`
/// parameterization. Requires the network to have no boundary equilibria.
pub fn estimate_h1(
    net: &Network,
    cs: &ConservationStructure,
    c_inf: &[f64],
    k_entropy: f64,
    mass: &MassVector,
    budget: &H1Budget,
    seed: u64,
) -> Result<H1Estimate, ConstantsError> {
    let boundary = find_boundary_equilibria(
        net,
        cs,
        mass,
        &SolveOptions {
            seed,
            ..SolveOptions::default()
        },
    )?;
    if !boundary.equilibria.is_empty() {
        return Err(ConstantsError::BoundaryEquilibriaPresent {
            count: boundary.equilibria.len(),
        });
    }

    let n = net.n_species();
    let k_tilde = 2.0 * (k_entropy + c_inf.iter().sum::<f64>());
    let mu_max: Vec<f64> = c_inf.iter().map(|ci| (k_tilde / ci).sqrt() - 1.0).collect();
    let q = cs.q_f64();

    // Latin hypercube over [-1, mu_max]^N: per-dimension stratified samples
    // with seeded stratum permutations.
    let starts = budget.starts.max(1);
    let mut strata: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let mut order: Vec<usize> = (0..starts).collect();
        for i in (1..starts).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        strata.push(order);
    }
    let jitter: Vec<Vec<f64>> = (0..starts)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();

    let in_box = |mu: &[f64]| -> bool {
        mu.iter()
            .zip(&mu_max)
            .all(|(v, hi)| *v >= -1.0 && *v <= *hi + 1e-12)
    };

    let run_start = |start: usize| -> (Option<(f64, Vec<f64>)>, bool) {
        let mu0: Vec<f64> = (0..n)
            .map(|i| {
                let u = (strata[i][start] as f64 + jitter[start][i]) / starts as f64;
                -1.0 + u * (mu_max[i] + 1.0)
            })
            .collect();
        let Ok(mut mu) = project_mu(&q, c_inf, &mu0) else {
            return (None, true);
        };
        if !in_box(&mu) {
            return (None, true);
        }
        let mut best_val = fdi_ratio(net, cs, c_inf, &mu);
        let mut best_mu = mu.clone();
        let mut step = 0.1;
        for _ in 0..budget.descent_steps {
            let f0 = fdi_ratio(net, cs, c_inf, &mu);
            let rhs_base: f64 = mu.iter().map(|v| v * v).sum();
            if rhs_base < 1e-16 {
                break; // inside the linearized cap region, gradient unusable
            }
            let lhs = fdi_lhs(net, &mu);
            let glhs = fdi_lhs_gradient(net, &mu);
            let mut grad: Vec<f64> = (0..n)
                .map(|i| (glhs[i] * rhs_base - lhs * 2.0 * mu[i]) / (rhs_base * rhs_base))
                .collect();
            // Project the gradient onto the constraint tangent space.
            if !q.is_empty() {
                let a: Vec<Vec<f64>> = q
                    .iter()
                    .map(|row| {
                        row.iter()
                            .zip(c_inf)
                            .zip(&mu)
                            .map(|((qv, ci), mi)| qv * ci * (1.0 + mi))
                            .collect()
                    })
                    .collect();
                let m = a.len();
                let mut gram = vec![vec![0.0; m]; m];
                let mut rhs = vec![0.0; m];
                for p in 0..m {
                    rhs[p] = linalg::dot(&a[p], &grad);
                    for pq in 0..m {
                        gram[p][pq] = linalg::dot(&a[p], &a[pq]);
                    }
                }
                if let Some(coef) = linalg::solve(&gram, &rhs) {
                    for i in 0..n {
                        let corr: f64 = (0..m).map(|p| coef[p] * a[p][i]).sum();
                        grad[i] -= corr;
                    }
                }
            }
            let gnorm = linalg::norm(&grad);
            if gnorm < 1e-14 * (1.0 + f0.abs()) {
                break;
            }
            let mut improved = false;
            for _ in 0..30 {
                let trial0: Vec<f64> = mu
                    .iter()
                    .zip(&grad)
                    .map(|(m, g)| m - step * g / gnorm)
                    .collect();
                if let Ok(trial) = project_mu(&q, c_inf, &trial0) {
                    if in_box(&trial) {
                        let ft = fdi_ratio(net, cs, c_inf, &trial);
                        if ft < f0 {
                            mu = trial;
                            if ft < best_val {
                                best_val = ft;
                                best_mu = mu.clone();
                            }
                            improved = true;
                            step *= 1.5;
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            if !improved || step < 1e-14 {
                break;
            }
        }
        (Some((best_val, best_mu)), false)
    };

    type StartOutcome = (Option<(f64, Vec<f64>)>, bool);
    let results: Vec<StartOutcome> = (0..starts).into_par_iter().map(run_start).collect();

    let projection_failures = results.iter().filter(|(_, failed)| *failed).count();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (result, _) in results {
        if let Some((val, mu)) = result {
            if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
                best = Some((val, mu));
            }
        }
    }
    let (value, minimizer_mu) = best.ok_or(ConstantsError::NonpositiveInput {
        what: format!("all {starts} starts failed projection; constraint manifold not reached"),
    })?;
    let minimizer_cbar: Vec<f64> = minimizer_mu
        .iter()
        .zip(c_inf)
        .map(|(m, ci)| ci * (1.0 + m) * (1.0 + m))
        .collect();
    Ok(H1Estimate {
        value,
        minimizer_mu,
        minimizer_cbar,
        starts_attempted: starts,
        projection_failures,
    })
}

/// Closed-form FDI constant for the reversible enzyme template.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnzymeH1 {
    pub nu1: f64,
    pub nu2: f64,
    pub h1: f64,
}

/// `H1 = min(1/18, nu1/9, nu2/9)` with
/// `nu1 = (sqrt(1 + c1/(2 c3)) - 1)^2 (sqrt(1 + (c3+c4)/c2) - 1)^{-2}` and
/// `nu2` the same with species 2 and 4 swapped. `c_inf` is in template order
/// (common species, first partner, intermediate, second partner).
pub fn enzyme_h1(c_inf: &[f64]) -> Result<EnzymeH1, ConstantsError> {
    if c_inf.len() != 4 {
        return Err(ConstantsError::DimensionMismatch {
            expected: 4,
            got: c_inf.len(),
        });
    }
    if let Some((i, &v)) = c_inf.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(ConstantsError::NonpositiveInput {
            what: format!("c_inf[{i}] = {v}"),
        });
    }
    let (c1, c2, c3, c4) = (c_inf[0], c_inf[1], c_inf[2], c_inf[3]);
    let top = ((1.0 + c1 / (2.0 * c3)).sqrt() - 1.0).powi(2);
    let nu1 = top / ((1.0 + (c3 + c4) / c2).sqrt() - 1.0).powi(2);
    let nu2 = top / ((1.0 + (c3 + c2) / c4).sqrt() - 1.0).powi(2);
    Ok(EnzymeH1 {
        nu1,
        nu2,
        h1: (1.0f64 / 18.0).min(nu1 / 9.0).min(nu2 / 9.0),
    })
}

/// `b_max` and the elementary-inequality constant for the cyclic template:
/// `b_max = -1 + sqrt(1 + ((alpha+1) c1 + c3)/c2)` and
/// `rho = min(1/4, 1/(4 (alpha+1) max(1, b_max)^{2 alpha}))`.
pub fn cyclic_rho(alpha: f64, c_inf: &[f64]) -> Result<(f64, f64), ConstantsError> {
    if alpha < 1.0 {
        return Err(ConstantsError::AlphaOutOfRange { alpha });
    }
    if c_inf.len() != 3 {
        return Err(ConstantsError::DimensionMismatch {
            expected: 3,
            got: c_inf.len(),
        });
    }
    if let Some((i, &v)) = c_inf.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(ConstantsError::NonpositiveInput {
            what: format!("c_inf[{i}] = {v}"),
        });
    }
    let b_max = -1.0 + (1.0 + ((alpha + 1.0) * c_inf[0] + c_inf[2]) / c_inf[1]).sqrt();
    let rho = 0.25f64.min(1.0 / (4.0 * (alpha + 1.0) * b_max.max(1.0).powf(2.0 * alpha)));
    Ok((b_max, rho))
}

/// Algebraic-in-time floor on the second species average:
/// `h(t) = [1/inv_bound + alpha (alpha+1) k3 t]^{-1/alpha}`,
/// where `inv_bound = ||1/c_{2,0}^alpha||_inf`.
pub fn cyclic_lower_bound_h(t: f64, alpha: f64, k3: f64, inv_bound: f64) -> f64 {
    (1.0 / inv_bound + alpha * (alpha + 1.0) * k3 * t).powf(-1.0 / alpha)
}

/// Time-dependent FDI coefficient for the cyclic template:
/// `H1(t) = rho min(1, (h(t)/c2_inf)^alpha)`; its integral diverges
/// logarithmically, which is what the time-dependent convergence argument
/// needs.
pub fn cyclic_h1_of_t(
    t: f64,
    alpha: f64,
    k3: f64,
    c_inf: &[f64],
    inv_bound: f64,
) -> Result<f64, ConstantsError> {
    if !(inv_bound > 0.0) || !inv_bound.is_finite() {
        return Err(ConstantsError::NonpositiveInput {
            what: format!("inv_bound = {inv_bound}"),
        });
    }
    let (_, rho) = cyclic_rho(alpha, c_inf)?;
    let h = cyclic_lower_bound_h(t, alpha, k3, inv_bound);
    Ok(rho * (h / c_inf[1]).powf(alpha).min(1.0))
}
