//! Equilibria of mass-action networks: balance checks, the positive complex
//! balanced equilibrium on a mass-compatibility class, boundary equilibria.
//!
//! The positive equilibrium is found in two stages. Stage one runs a damped
//! Gauss-Newton iteration in log coordinates on the per-complex balance
//! residuals, producing a reference complex balanced state `c*`. Stage two
//! exploits the toric structure of the balanced set (`log c - log c*` lies in
//! the kernel of the Wegscheider matrix): it solves
//! `Q exp(log c* + Q^T gamma) = M` for `gamma`, which is the gradient system
//! of a strictly convex function, so Newton with backtracking converges to
//! the unique root.

use crate::linalg;
use crate::network::{ConservationStructure, MassVector, Network};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("iteration cap reached; best relative residual {best_residual:.3e}")]
    NonConvergence { best_residual: f64 },
    #[error("no positive complex balanced state found (best balance residual {residual:.3e}); the network does not appear to be complex balanced")]
    NotComplexBalanced { residual: f64 },
    #[error("support enumeration limited to 20 species, network has {n_species}")]
    SupportLimitExceeded { n_species: usize },
    #[error("mass vector component {index} is {value}; the solver requires M > 0")]
    NonpositiveMass { index: usize, value: f64 },
    #[error("mass vector was built against a different conservation matrix")]
    MassReferenceMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Solver knobs. Tolerances are relative.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iterations: 200,
            seed: 42,
        }
    }
}

const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 40;
/// Log-coordinate box |u_i| <= 60 keeps concentrations inside ~[1e-26, 1e26].
const LOG_CLAMP: f64 = 60.0;

/// Per-complex inflow/outflow balance at a state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexBalance {
    pub complex: usize,
    pub outflow: f64,
    pub inflow: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalanceReport {
    pub per_complex: Vec<ComplexBalance>,
    /// max_y |outflow - inflow|
    pub max_residual: f64,
    /// max residual divided by the largest flow through any complex (or 1).
    pub relative_residual: f64,
    pub balanced: bool,
    pub tol: f64,
}

/// Evaluates total outflow and inflow for every complex at state `c`.
pub fn is_complex_balanced(net: &Network, c: &[f64], tol: f64) -> BalanceReport {
    let mut outflow = vec![0.0; net.n_complexes()];
    let mut inflow = vec![0.0; net.n_complexes()];
    for r in net.reactions() {
        let flux = r.rate * net.monomial(r.reactant, c);
        outflow[r.reactant] += flux;
        inflow[r.product] += flux;
    }
    let per_complex: Vec<ComplexBalance> = (0..net.n_complexes())
        .map(|y| ComplexBalance {
            complex: y,
            outflow: outflow[y],
            inflow: inflow[y],
            residual: (outflow[y] - inflow[y]).abs(),
        })
        .collect();
    let max_residual = per_complex.iter().fold(0.0f64, |a, b| a.max(b.residual));
    let scale = per_complex
        .iter()
        .fold(0.0f64, |a, b| a.max(b.outflow).max(b.inflow))
        .max(1e-300);
    let relative_residual = if scale > 1.0 {
        max_residual / scale
    } else {
        max_residual
    };
    BalanceReport {
        per_complex,
        max_residual,
        relative_residual,
        balanced: relative_residual <= tol,
        tol,
    }
}

/// Flux balance of one reversible complex pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairBalance {
    pub reactant_complex: usize,
    pub product_complex: usize,
    pub forward_flux: f64,
    pub backward_flux: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetailedBalanceReport {
    pub pairs: Vec<PairBalance>,
    /// Indices of reactions without a reverse partner.
    pub unpaired: Vec<usize>,
    pub relative_residual: f64,
    pub balanced: bool,
    pub tol: f64,
}

/// Detailed balance: every reaction has a reverse and each pair's fluxes agree.
pub fn is_detailed_balanced(net: &Network, c: &[f64], tol: f64) -> DetailedBalanceReport {
    let mut unpaired = Vec::new();
    let mut seen_pairs: Vec<(usize, usize)> = Vec::new();
    let mut pairs = Vec::new();
    for (idx, r) in net.reactions().iter().enumerate() {
        let has_reverse = net
            .reactions()
            .iter()
            .any(|s| s.reactant == r.product && s.product == r.reactant);
        if !has_reverse {
            unpaired.push(idx);
            continue;
        }
        let key = (r.reactant.min(r.product), r.reactant.max(r.product));
        if seen_pairs.contains(&key) {
            continue;
        }
        seen_pairs.push(key);
        let (a, b) = key;
        let forward: f64 = net
            .reactions()
            .iter()
            .filter(|s| s.reactant == a && s.product == b)
            .map(|s| s.rate * net.monomial(a, c))
            .sum();
        let backward: f64 = net
            .reactions()
            .iter()
            .filter(|s| s.reactant == b && s.product == a)
            .map(|s| s.rate * net.monomial(b, c))
            .sum();
        pairs.push(PairBalance {
            reactant_complex: a,
            product_complex: b,
            forward_flux: forward,
            backward_flux: backward,
            residual: (forward - backward).abs(),
        });
    }
    let max_residual = pairs.iter().fold(0.0f64, |a, p| a.max(p.residual));
    let scale = pairs
        .iter()
        .fold(0.0f64, |a, p| a.max(p.forward_flux).max(p.backward_flux))
        .max(1e-300);
    let relative_residual = if scale > 1.0 {
        max_residual / scale
    } else {
        max_residual
    };
    DetailedBalanceReport {
        balanced: unpaired.is_empty() && relative_residual <= tol,
        pairs,
        unpaired,
        relative_residual,
        tol,
    }
}

/// The unique positive complex balanced equilibrium on a mass class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub c_infty: Vec<f64>,
    pub residual_complex_balance: f64,
    pub residual_mass: f64,
    pub is_detailed_balanced: bool,
    pub newton_iterations: usize,
}

pub fn solve_complex_balanced(
    net: &Network,
    cs: &ConservationStructure,
    mass: &MassVector,
    opts: &SolveOptions,
) -> Result<EquilibriumResult, EquilibriumError> {
    let m = cs.codim();
    if mass.values.len() != m {
        return Err(EquilibriumError::DimensionMismatch {
            expected: m,
            got: mass.values.len(),
        });
    }
    if mass.q_ref != cs.q_ref() {
        return Err(EquilibriumError::MassReferenceMismatch);
    }
    for (i, &v) in mass.values.iter().enumerate() {
        if !(v > 0.0) {
            return Err(EquilibriumError::NonpositiveMass { index: i, value: v });
        }
    }

    let mut iterations = 0usize;
    let u_star = find_balanced_reference(net, opts, &mut iterations)?;

    let q = cs.q_f64();
    let gamma = if m == 0 {
        Vec::new()
    } else {
        match_mass(&u_star, &q, &mass.values, opts, &mut iterations)?
    };

    let n = net.n_species();
    let c_infty: Vec<f64> = (0..n)
        .map(|i| {
            let shift: f64 = q.iter().zip(&gamma).map(|(row, g)| row[i] * g).sum();
            (u_star[i] + shift).exp()
        })
        .collect();

    let balance = is_complex_balanced(net, &c_infty, opts.tol);
    let residual_mass = mass_residual(&q, &c_infty, &mass.values);
    if balance.relative_residual > opts.tol || residual_mass > opts.tol {
        return Err(EquilibriumError::NonConvergence {
            best_residual: balance.relative_residual.max(residual_mass),
        });
    }
    let detailed = is_detailed_balanced(net, &c_infty, opts.tol.max(1e-8));
    Ok(EquilibriumResult {
        c_infty,
        residual_complex_balance: balance.relative_residual,
        residual_mass,
        is_detailed_balanced: detailed.balanced,
        newton_iterations: iterations,
    })
}

/// |Q c - M|_inf / (1 + |M|_inf)
fn mass_residual(q: &[Vec<f64>], c: &[f64], mass: &[f64]) -> f64 {
    let m_inf = mass.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for (row, target) in q.iter().zip(mass) {
        let got: f64 = row.iter().zip(c).map(|(a, b)| a * b).sum();
        worst = worst.max((got - target).abs());
    }
    worst / (1.0 + m_inf)
}

/// Stage one: damped Gauss-Newton in log coordinates from several starts.
fn find_balanced_reference(
    net: &Network,
    opts: &SolveOptions,
    iterations: &mut usize,
) -> Result<Vec<f64>, EquilibriumError> {
    let n = net.n_species();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_residual = f64::INFINITY;
    for start in 0..6 {
        let u0: Vec<f64> = if start == 0 {
            vec![0.0; n]
        } else {
            (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()
        };
        match balance_newton(net, u0, opts, iterations) {
            Ok(u) => return Ok(u),
            Err(res) => best_residual = best_residual.min(res),
        }
    }
    Err(EquilibriumError::NotComplexBalanced {
        residual: best_residual,
    })
}

/// One Gauss-Newton run; returns the final log-state or the best residual.
fn balance_newton(
    net: &Network,
    mut u: Vec<f64>,
    opts: &SolveOptions,
    iterations: &mut usize,
) -> Result<Vec<f64>, f64> {
    let n = net.n_species();
    let mut best = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let c: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        let report = is_complex_balanced(net, &c, opts.tol);
        best = best.min(report.relative_residual);
        if report.relative_residual <= opts.tol {
            return Ok(u);
        }
        *iterations += 1;

        let (g, jac) = balance_residual_jacobian(net, &u);
        // Normal equations with a small Levenberg shift for the toric
        // directions along which the residual is flat.
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtg = vec![0.0; n];
        for (row, gval) in jac.iter().zip(&g) {
            for i in 0..n {
                jtg[i] += row[i] * gval;
                for j in 0..n {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let trace: f64 = (0..n).map(|i| jtj[i][i]).sum();
        let shift = 1e-12 * (trace / n as f64).max(1.0);
        for (i, row) in jtj.iter_mut().enumerate() {
            row[i] += shift;
        }
        let rhs: Vec<f64> = jtg.iter().map(|v| -v).collect();
        let Some(step) = linalg::solve(&jtj, &rhs) else {
            return Err(best);
        };

        let phi0: f64 = g.iter().map(|v| v * v).sum();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = u
                .iter()
                .zip(&step)
                .map(|(ui, di)| (ui + t * di).clamp(-LOG_CLAMP, LOG_CLAMP))
                .collect();
            let (gt, _) = balance_residual_jacobian(net, &trial);
            let phi: f64 = gt.iter().map(|v| v * v).sum();
            if phi < phi0 {
                u = trial;
                accepted = true;
                break;
            }
            t *= BACKTRACK_FACTOR;
        }
        if !accepted {
            return Err(best);
        }
    }
    Err(best)
}

/// Residual g_y = outflow_y - inflow_y and its Jacobian w.r.t. log c.
fn balance_residual_jacobian(net: &Network, u: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = net.n_species();
    let nc = net.n_complexes();
    let c: Vec<f64> = u.iter().map(|x| x.exp()).collect();
    let mut g = vec![0.0; nc];
    let mut jac = vec![vec![0.0; n]; nc];
    for r in net.reactions() {
        let flux = r.rate * net.monomial(r.reactant, &c);
        g[r.reactant] += flux;
        g[r.product] -= flux;
        let y = net.complex_f64(r.reactant);
        for i in 0..n {
            if y[i] != 0.0 {
                jac[r.reactant][i] += flux * y[i];
                jac[r.product][i] -= flux * y[i];
            }
        }
    }
    (g, jac)
}

/// Stage two: Newton on the strictly convex mass-matching problem.
fn match_mass(
    u_star: &[f64],
    q: &[Vec<f64>],
    mass: &[f64],
    opts: &SolveOptions,
    iterations: &mut usize,
) -> Result<Vec<f64>, EquilibriumError> {
    let m = q.len();
    let n = u_star.len();
    let mut gamma = vec![0.0; m];
    let m_inf = mass.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let state = |gamma: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let shift: f64 = q.iter().zip(gamma).map(|(row, g)| row[i] * g).sum();
                (u_star[i] + shift).clamp(-LOG_CLAMP, LOG_CLAMP).exp()
            })
            .collect()
    };
    // Objective whose gradient is Q c(gamma) - M.
    let objective = |gamma: &[f64]| -> f64 {
        let c = state(gamma);
        let total: f64 = c.iter().sum();
        let linear: f64 = mass.iter().zip(gamma).map(|(mv, g)| mv * g).sum();
        total - linear
    };

    let mut best = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let c = state(&gamma);
        let grad: Vec<f64> = q
            .iter()
            .zip(mass)
            .map(|(row, target)| row.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() - target)
            .collect();
        let res = grad.iter().fold(0.0f64, |a, v| a.max(v.abs())) / (1.0 + m_inf);
        best = best.min(res);
        if res <= opts.tol {
            return Ok(gamma);
        }
        *iterations += 1;

        // Hessian Q diag(c) Q^T is positive definite.
        let mut hess = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in 0..m {
                hess[a][b] = (0..n).map(|i| q[a][i] * c[i] * q[b][i]).sum();
            }
        }
        let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        let Some(step) = linalg::solve(&hess, &rhs) else {
            return Err(EquilibriumError::NonConvergence {
                best_residual: best,
            });
        };

        let phi0 = objective(&gamma);
        let slope: f64 = grad.iter().zip(&step).map(|(g, d)| g * d).sum();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = gamma.iter().zip(&step).map(|(g, d)| g + t * d).collect();
            if objective(&trial) <= phi0 + 1e-4 * t * slope {
                gamma = trial;
                accepted = true;
                break;
            }
            t *= BACKTRACK_FACTOR;
        }
        if !accepted {
            return Err(EquilibriumError::NonConvergence {
                best_residual: best,
            });
        }
    }
    Err(EquilibriumError::NonConvergence {
        best_residual: best,
    })
}

/// A complex balanced equilibrium with at least one zero component.
///
/// `support` lists the species with strictly positive values; every species
/// outside the support is exactly zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryEquilibrium {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
    pub residual_complex_balance: f64,
    pub residual_mass: f64,
    /// True when the solution manifold for this support is positive
    /// dimensional; the reported point is then one sample of a continuum.
    pub may_be_continuum: bool,
}

/// Result of exhaustive support enumeration.
///
/// Isolated boundary equilibria are found per support; continua are reported
/// by a single sample per support and flagged, so the list is a finite sample
/// rather than a complete description in that case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundarySearch {
    pub equilibria: Vec<BoundaryEquilibrium>,
    pub supports_examined: usize,
    pub note: String,
}

pub fn find_boundary_equilibria(
    net: &Network,
    cs: &ConservationStructure,
    mass: &MassVector,
    opts: &SolveOptions,
) -> Result<BoundarySearch, EquilibriumError> {
    let n = net.n_species();
    if n > 20 {
        return Err(EquilibriumError::SupportLimitExceeded { n_species: n });
    }
    if mass.values.len() != cs.codim() {
        return Err(EquilibriumError::DimensionMismatch {
            expected: cs.codim(),
            got: mass.values.len(),
        });
    }
    if mass.q_ref != cs.q_ref() {
        return Err(EquilibriumError::MassReferenceMismatch);
    }
    let q = cs.q_f64();
    let mut found: Vec<BoundaryEquilibrium> = Vec::new();
    let mut keys: Vec<Vec<u64>> = Vec::new();
    let mut supports_examined = 0usize;

    for bits in 0u32..(1u32 << n) - 1 {
        let support: Vec<usize> = (0..n).filter(|i| bits & (1 << i) != 0).collect();
        supports_examined += 1;
        if support.is_empty() {
            // c = 0 satisfies all balances; admissible only for M = 0.
            let res = mass_residual(&q, &vec![0.0; n], &mass.values);
            if res <= opts.tol {
                push_unique(
                    &mut found,
                    &mut keys,
                    BoundaryEquilibrium {
                        support: vec![],
                        values: vec![0.0; n],
                        residual_complex_balance: 0.0,
                        residual_mass: res,
                        may_be_continuum: false,
                    },
                );
            }
            continue;
        }
        if !support_feasible(net, bits) {
            continue;
        }
        if let Some(eq) = solve_on_support(net, &q, &mass.values, &support, opts) {
            push_unique(&mut found, &mut keys, eq);
        }
    }

    Ok(BoundarySearch {
        equilibria: found,
        supports_examined,
        note: "per-support sampling; continua of boundary equilibria are represented by single flagged samples".to_string(),
    })
}

fn push_unique(
    found: &mut Vec<BoundaryEquilibrium>,
    keys: &mut Vec<Vec<u64>>,
    eq: BoundaryEquilibrium,
) {
    let key: Vec<u64> = eq
        .values
        .iter()
        .map(|v| {
            let rounded = (v / (1.0 + v.abs()) * 1e8).round();
            rounded.to_bits()
        })
        .collect();
    if !keys.contains(&key) {
        keys.push(key);
        found.push(eq);
    }
}

/// A support is structurally feasible only if, over the reactions whose
/// reactant monomial survives on it, every complex has inflow iff it has
/// outflow: a positive one-sided sum can never balance zero.
fn support_feasible(net: &Network, support_bits: u32) -> bool {
    let active = |complex: usize| -> bool {
        net.complex_f64(complex)
            .iter()
            .enumerate()
            .all(|(i, y)| *y == 0.0 || support_bits & (1 << i) != 0)
    };
    let nc = net.n_complexes();
    let mut has_out = vec![false; nc];
    let mut has_in = vec![false; nc];
    for r in net.reactions() {
        if active(r.reactant) {
            has_out[r.reactant] = true;
            has_in[r.product] = true;
        }
    }
    (0..nc).all(|y| has_out[y] == has_in[y])
}

/// Restricted two-stage solve: balance over surviving reactions plus mass
/// constraints, in log coordinates of the supported species.
fn solve_on_support(
    net: &Network,
    q: &[Vec<f64>],
    mass: &[f64],
    support: &[usize],
    opts: &SolveOptions,
) -> Option<BoundaryEquilibrium> {
    let k = support.len();
    let n = net.n_species();
    let support_bits: u32 = support.iter().map(|&i| 1u32 << i).sum();
    let active: Vec<usize> = net
        .reactions()
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            net.complex_f64(r.reactant)
                .iter()
                .enumerate()
                .all(|(i, y)| *y == 0.0 || support_bits & (1 << i) != 0)
        })
        .map(|(idx, _)| idx)
        .collect();

    let assemble = |u: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        for (slot, &i) in support.iter().enumerate() {
            c[i] = u[slot].clamp(-LOG_CLAMP, LOG_CLAMP).exp();
        }
        c
    };

    // Residuals: per-complex net flux over active reactions, then mass rows.
    let residual = |u: &[f64]| -> Vec<f64> {
        let c = assemble(u);
        let mut g = vec![0.0; net.n_complexes()];
        for &ri in &active {
            let r = &net.reactions()[ri];
            let flux = r.rate * net.monomial(r.reactant, &c);
            g[r.reactant] += flux;
            g[r.product] -= flux;
        }
        for (row, target) in q.iter().zip(mass) {
            let got: f64 = row.iter().zip(&c).map(|(a, b)| a * b).sum();
            g.push(got - target);
        }
        g
    };
    let jacobian = |u: &[f64]| -> Vec<Vec<f64>> {
        let c = assemble(u);
        let rows = net.n_complexes() + q.len();
        let mut jac = vec![vec![0.0; k]; rows];
        for &ri in &active {
            let r = &net.reactions()[ri];
            let flux = r.rate * net.monomial(r.reactant, &c);
            let y = net.complex_f64(r.reactant);
            for (slot, &i) in support.iter().enumerate() {
                if y[i] != 0.0 {
                    jac[r.reactant][slot] += flux * y[i];
                    jac[r.product][slot] -= flux * y[i];
                }
            }
        }
        for (row_idx, row) in q.iter().enumerate() {
            for (slot, &i) in support.iter().enumerate() {
                jac[net.n_complexes() + row_idx][slot] = row[i] * c[i];
            }
        }
        jac
    };

    let scale = mass.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ support_bits as u64);
    for start in 0..4 {
        let u0: Vec<f64> = if start == 0 {
            vec![(scale / k as f64).max(1e-6).ln(); k]
        } else {
            (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect()
        };
        if let Some(u) = least_squares_newton(&residual, &jacobian, u0, opts, scale) {
            let c = assemble(&u);
            let balance = is_complex_balanced(net, &c, opts.tol);
            let res_mass = mass_residual(q, &c, mass);
            if balance.relative_residual <= opts.tol && res_mass <= opts.tol {
                let jac = jacobian(&u);
                let rank = numeric_rank(&jac);
                return Some(BoundaryEquilibrium {
                    support: support.to_vec(),
                    values: c,
                    residual_complex_balance: balance.relative_residual,
                    residual_mass: res_mass,
                    may_be_continuum: rank < k,
                });
            }
        }
    }
    None
}

fn least_squares_newton(
    residual: &dyn Fn(&[f64]) -> Vec<f64>,
    jacobian: &dyn Fn(&[f64]) -> Vec<Vec<f64>>,
    mut u: Vec<f64>,
    opts: &SolveOptions,
    scale: f64,
) -> Option<Vec<f64>> {
    let k = u.len();
    for _ in 0..opts.max_iterations {
        let g = residual(&u);
        let gnorm = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gnorm <= opts.tol * scale {
            return Some(u);
        }
        let jac = jacobian(&u);
        let mut jtj = vec![vec![0.0; k]; k];
        let mut jtg = vec![0.0; k];
        for (row, gval) in jac.iter().zip(&g) {
            for i in 0..k {
                jtg[i] += row[i] * gval;
                for j in 0..k {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let trace: f64 = (0..k).map(|i| jtj[i][i]).sum();
        let shift = 1e-12 * (trace / k as f64).max(1.0);
        for (i, row) in jtj.iter_mut().enumerate() {
            row[i] += shift;
        }
        let rhs: Vec<f64> = jtg.iter().map(|v| -v).collect();
        let step = linalg::solve(&jtj, &rhs)?;
        let phi0: f64 = g.iter().map(|v| v * v).sum();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = u
                .iter()
                .zip(&step)
                .map(|(ui, di)| (ui + t * di).clamp(-LOG_CLAMP, LOG_CLAMP))
                .collect();
            let gt = residual(&trial);
            let phi: f64 = gt.iter().map(|v| v * v).sum();
            if phi < phi0 {
                u = trial;
                accepted = true;
                break;
            }
            t *= BACKTRACK_FACTOR;
        }
        if !accepted {
            return None;
        }
    }
    None
}

/// Numerical rank via row echelon with a relative threshold.
fn numeric_rank(mat: &[Vec<f64>]) -> usize {
    if mat.is_empty() {
        return 0;
    }
    let cols = mat[0].len();
    let scale = mat
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1.0);
    let mut m: Vec<Vec<f64>> = mat.to_vec();
    let n_rows = m.len();
    let mut rank = 0;
    for col in 0..cols {
        if rank == n_rows {
            break;
        }
        let (best, val) = (rank..n_rows)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if val <= 1e-8 * scale {
            continue;
        }
        m.swap(rank, best);
        for r in 0..n_rows {
            if r != rank && m[r][col] != 0.0 {
                let f = m[r][col] / m[rank][col];
                for c in col..cols {
                    m[r][c] -= f * m[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{conservation_structure, mass_vector, parse_network};
    use approx::assert_relative_eq;

    const ENZYME_DOC: &str = "\
species: S1, S2, S3, S4
diffusion: S1=1.0, S2=1.0, S3=1.0, S4=1.0
reaction: S1 + S2 -> S3 @ 1.0
reaction: S3 -> S1 + S2 @ 1.0
reaction: S3 -> S1 + S4 @ 1.0
reaction: S1 + S4 -> S3 @ 1.0
";

    const CYCLIC_DOC: &str = "\
species: S1, S2, S3
diffusion: S1=1.0, S2=1.0, S3=1.0
reaction: S1 -> S2 + S3 @ 1.0
reaction: S2 + S3 -> 2 S2 @ 1.0
reaction: 2 S2 -> S1 @ 1.0
";

    const PAIR_DOC: &str = "\
species: S1, S2
diffusion: S1=1.0, S2=1.0
reaction: S1 -> S2 @ 1.0
reaction: S2 -> S1 @ 1.0
";

    #[test]
    fn enzyme_unit_state_balances() {
        let net = parse_network(ENZYME_DOC).unwrap();
        let report = is_complex_balanced(&net, &[1.0, 1.0, 1.0, 1.0], 1e-10);
        assert!(report.balanced);
        // Complex S3 collects k1 c1 c2 + k4 c1 c4 = 2 inflow and k2 + k3 = 2 outflow.
        let s3 = &report.per_complex[1];
        assert_relative_eq!(s3.outflow, 2.0);
        assert_relative_eq!(s3.inflow, 2.0);
    }

    #[test]
    fn cyclic_unit_state_balances() {
        let net = parse_network(CYCLIC_DOC).unwrap();
        let report = is_complex_balanced(&net, &[1.0, 1.0, 1.0], 1e-10);
        assert!(report.balanced);
        for cb in &report.per_complex {
            assert_relative_eq!(cb.outflow, 1.0);
            assert_relative_eq!(cb.inflow, 1.0);
        }
    }

    #[test]
    fn cyclic_boundary_state_balances() {
        let net = parse_network(CYCLIC_DOC).unwrap();
        // Every monomial containing S1 or S2 vanishes at (0, 0, M).
        let report = is_complex_balanced(&net, &[0.0, 0.0, 4.0], 1e-10);
        assert!(report.balanced);
        for cb in &report.per_complex {
            assert_eq!(cb.outflow, 0.0);
            assert_eq!(cb.inflow, 0.0);
        }
    }

    #[test]
    fn detailed_balance_classification() {
        let net = parse_network(ENZYME_DOC).unwrap();
        assert!(is_detailed_balanced(&net, &[1.0; 4], 1e-10).balanced);

        let net = parse_network(CYCLIC_DOC).unwrap();
        let report = is_detailed_balanced(&net, &[1.0; 3], 1e-10);
        assert!(!report.balanced);
        assert_eq!(report.unpaired.len(), 3);

        let net = parse_network(PAIR_DOC).unwrap();
        assert!(is_detailed_balanced(&net, &[2.0, 2.0], 1e-10).balanced);
    }

    #[test]
    fn detailed_balance_implies_complex_balance() {
        let net = parse_network(ENZYME_DOC).unwrap();
        for c in [[1.0, 1.0, 1.0, 1.0], [2.0, 0.5, 1.0, 0.5]] {
            let det = is_detailed_balanced(&net, &c, 1e-10);
            if det.balanced {
                assert!(is_complex_balanced(&net, &c, 1e-9).balanced);
            }
        }
    }

    #[test]
    fn enzyme_equilibrium_for_reference_masses() {
        let net = parse_network(ENZYME_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = mass_vector(&cs, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let eq = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        for v in &eq.c_infty {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-10);
        }
        assert!(eq.is_detailed_balanced);
        assert!(eq.residual_mass <= 1e-10);
    }

    #[test]
    fn cyclic_equilibrium_mass_four() {
        let net = parse_network(CYCLIC_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![4.0],
            q_ref: cs.q_ref(),
        };
        let eq = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        for v in &eq.c_infty {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn scaled_enzyme_matches_newton_oracle() {
        // Independent oracle: bisection on the reduced equilibrium equation
        // c2 -> (M13 - M234 + 2 c2) c2 - (M234 - 2 c2) = 0, then
        // c1 = M13 - c3, c3 = M234 - 2 c2, c4 = c2.
        let lambda = 4.0;
        let (m13, m234) = (2.0 * lambda, 3.0 * lambda);
        let f = |c2: f64| (m13 - m234 + 2.0 * c2) * c2 - (m234 - 2.0 * c2);
        let (mut lo, mut hi) = (0.0, m234 / 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let c2 = 0.5 * (lo + hi);
        let expect = [m13 - (m234 - 2.0 * c2), c2, m234 - 2.0 * c2, c2];

        let net = parse_network(ENZYME_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![m13, m234],
            q_ref: cs.q_ref(),
        };
        let eq = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        for (got, want) in eq.c_infty.iter().zip(&expect) {
            assert_relative_eq!(*got, *want, epsilon = 1e-9);
        }
    }

    #[test]
    fn solver_is_insensitive_to_initialization() {
        let net = parse_network(CYCLIC_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![7.3],
            q_ref: cs.q_ref(),
        };
        let mut results = Vec::new();
        for seed in [1, 99, 12345] {
            let opts = SolveOptions {
                seed,
                ..SolveOptions::default()
            };
            results.push(solve_complex_balanced(&net, &cs, &mass, &opts).unwrap());
        }
        for r in &results[1..] {
            for (a, b) in r.c_infty.iter().zip(&results[0].c_infty) {
                assert_relative_eq!(*a, *b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn nonpositive_mass_is_rejected() {
        let net = parse_network(ENZYME_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![0.0, 3.0],
            q_ref: cs.q_ref(),
        };
        let err = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default());
        assert!(matches!(err, Err(EquilibriumError::NonpositiveMass { .. })));
    }

    #[test]
    fn equilibrium_rates_vanish() {
        let net = parse_network(CYCLIC_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![11.0],
            q_ref: cs.q_ref(),
        };
        let eq = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        let rates = net.reaction_rates(&eq.c_infty).unwrap();
        let scale = eq.c_infty.iter().fold(1.0f64, |a, v| a.max(*v));
        for v in rates {
            assert!(v.abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn cyclic_boundary_equilibrium_found() {
        let net = parse_network(CYCLIC_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![4.0],
            q_ref: cs.q_ref(),
        };
        let search = find_boundary_equilibria(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        assert_eq!(search.equilibria.len(), 1);
        let eq = &search.equilibria[0];
        assert_eq!(eq.support, vec![2]);
        assert_relative_eq!(eq.values[2], 4.0, epsilon = 1e-9);
        assert_eq!(eq.values[0], 0.0);
        assert_eq!(eq.values[1], 0.0);
    }

    #[test]
    fn enzyme_has_no_boundary_equilibria() {
        let net = parse_network(ENZYME_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![2.0, 3.0],
            q_ref: cs.q_ref(),
        };
        let search = find_boundary_equilibria(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        assert!(search.equilibria.is_empty());
    }

    #[test]
    fn irreversible_single_reaction_is_not_complex_balanced() {
        // S1 -> S2 without a reverse has no positive balanced state; the
        // boundary state (0, M) is the only equilibrium.
        let doc = "\
species: S1, S2
diffusion: S1=1.0, S2=1.0
reaction: S1 -> S2 @ 1.0
";
        let net = parse_network(doc).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![3.0],
            q_ref: cs.q_ref(),
        };
        let err = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default());
        assert!(matches!(
            err,
            Err(EquilibriumError::NotComplexBalanced { .. })
        ));

        let search = find_boundary_equilibria(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        assert_eq!(search.equilibria.len(), 1);
        assert_eq!(search.equilibria[0].support, vec![1]);
        assert_relative_eq!(search.equilibria[0].values[1], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn generic_rates_on_deficient_network_are_refused() {
        // 2A <-> A+B <-> 2B plus A <-> B: with a generic rate on the first
        // edge the balance equations force B = 2A and B = A simultaneously,
        // so no positive complex balanced state exists. The relative
        // residual still drains toward zero along c -> 0, so the refusal may
        // surface as either error variant; what matters is that no positive
        // state is certified.
        let doc = "\
species: A, B
diffusion: A=1.0, B=1.0
reaction: 2 A -> A + B @ 2.0
reaction: A + B -> 2 A @ 1.0
reaction: A + B -> 2 B @ 1.0
reaction: 2 B -> A + B @ 1.0
reaction: A -> B @ 1.0
reaction: B -> A @ 1.0
";
        let net = parse_network(doc).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![3.0],
            q_ref: cs.q_ref(),
        };
        let err = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default());
        assert!(matches!(
            err,
            Err(EquilibriumError::NotComplexBalanced { .. })
                | Err(EquilibriumError::NonConvergence { .. })
        ));

        // Unit rates make the same shape complex balanced, with (1, 1) the
        // balanced state; the solve must then succeed.
        let doc_unit = doc.replace("@ 2.0", "@ 1.0");
        let net = parse_network(&doc_unit).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![2.0],
            q_ref: cs.q_ref(),
        };
        let eq = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        assert_relative_eq!(eq.c_infty[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(eq.c_infty[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn wide_rate_scales_still_converge() {
        let doc = "\
species: S1, S2, S3, S4
diffusion: S1=1.0, S2=1.0, S3=1.0, S4=1.0
reaction: 1 S1 + 1 S2 -> 1 S3 @ 1e4
reaction: S3 -> S1 + S2 @ 1e-3
reaction: S3 -> S1 + S4 @ 5e-2
reaction: S1 + S4 -> S3 @ 2e3
";
        let net = parse_network(doc).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![2.0, 3.0],
            q_ref: cs.q_ref(),
        };
        let eq = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        assert!(eq.residual_complex_balance <= 1e-10);
        assert!(eq.residual_mass <= 1e-10);
        let rates = net.reaction_rates(&eq.c_infty).unwrap();
        let scale = eq.c_infty.iter().fold(1.0f64, |a, v| a.max(*v)) * 1e4;
        for v in rates {
            assert!(v.abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn cyclic_general_rates_match_reduced_equation() {
        // For the cycle S1 -> aS2+S3 -> (a+1)S2 -> S1 the vanishing of
        // R1 = -k1 c1 + k3 c2^(a+1) and R3 = k1 c1 - k2 c2^a c3 forces
        // c1 = (k3/k1) c2^(a+1) and c3 = (k3/k2) c2, so c2 solves the
        // scalar reduced equation
        // (a+1)(k3/k1) c2^(a+1) + (k3/k2) c2 + c2 = M. Bisection on the
        // reduced equation is the independent oracle.
        let doc = "\
species: S1, S2, S3
diffusion: S1=1.0, S2=1.0, S3=1.0
reaction: S1 -> 2 S2 + 1 S3 @ 2.0
reaction: 2 S2 + 1 S3 -> 3 S2 @ 0.5
reaction: 3 S2 -> S1 @ 1.5
";
        let (alpha, k1, k2, k3) = (2.0f64, 2.0, 0.5, 1.5);
        let m = 7.0;
        let reduced =
            |c2: f64| (alpha + 1.0) * (k3 / k1) * c2.powf(alpha + 1.0) + (k3 / k2) * c2 + c2 - m;
        let (mut lo, mut hi) = (0.0f64, m);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if reduced(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let c2 = 0.5 * (lo + hi);
        let expect = [(k3 / k1) * c2.powf(alpha + 1.0), c2, (k3 / k2) * c2];

        let net = parse_network(doc).unwrap();
        let cs = conservation_structure(&net);
        assert_eq!(cs.q_matrix().to_strings(), vec![vec!["3", "1", "1"]]);
        let mass = MassVector {
            values: vec![m],
            q_ref: cs.q_ref(),
        };
        let eq = solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        for (got, want) in eq.c_infty.iter().zip(&expect) {
            assert_relative_eq!(*got, *want, max_relative = 1e-9);
        }
    }

    #[test]
    fn support_enumeration_is_capped_at_twenty_species() {
        // A chain of reversible conversions S1 <-> S2 <-> ... <-> S21.
        let n = 21;
        let species: Vec<String> = (1..=n).map(|i| format!("S{i}")).collect();
        let complexes: Vec<Vec<crate::ratmat::Rat>> = (0..n)
            .map(|i| {
                let mut y = vec![crate::ratmat::Rat::from_integer(0.into()); n];
                y[i] = crate::ratmat::Rat::from_integer(1.into());
                y
            })
            .collect();
        let mut reactions = Vec::new();
        for i in 0..n - 1 {
            reactions.push(crate::network::Reaction {
                reactant: i,
                product: i + 1,
                rate: 1.0,
            });
            reactions.push(crate::network::Reaction {
                reactant: i + 1,
                product: i,
                rate: 1.0,
            });
        }
        let net =
            crate::network::Network::new(species, complexes, reactions, vec![1.0; n]).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![1.0],
            q_ref: cs.q_ref(),
        };
        let err = find_boundary_equilibria(&net, &cs, &mass, &SolveOptions::default());
        assert!(matches!(
            err,
            Err(EquilibriumError::SupportLimitExceeded { n_species: 21 })
        ));
    }

    #[test]
    fn mass_vector_reference_is_checked() {
        let net = parse_network(ENZYME_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![2.0, 3.0],
            q_ref: "stale".into(),
        };
        assert!(matches!(
            solve_complex_balanced(&net, &cs, &mass, &SolveOptions::default()),
            Err(EquilibriumError::MassReferenceMismatch)
        ));
    }

    #[test]
    fn reversible_pair_has_no_boundary_equilibria() {
        let net = parse_network(PAIR_DOC).unwrap();
        let cs = conservation_structure(&net);
        let mass = MassVector {
            values: vec![2.0],
            q_ref: cs.q_ref(),
        };
        let search = find_boundary_equilibria(&net, &cs, &mass, &SolveOptions::default()).unwrap();
        assert!(search.equilibria.is_empty());
    }
}
