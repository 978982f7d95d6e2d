//! IMEX finite-volume solver for the reaction-diffusion system on [0, 1]
//! with no-flux boundaries.
//!
//! Each step solves the per-species implicit diffusion system (tridiagonal,
//! reflective end cells) and then applies the explicit, optionally
//! epsilon-truncated reaction `R(c) / (1 + eps |R(c)|)`. The truncation
//! rescales the whole reaction vector pointwise, so conservation laws
//! survive it exactly.

mod expr;
mod tridiag;

pub use expr::{ExprError, Expression};

use crate::entropy::{entropy_dissipation, relative_entropy, EntropyError, SpatialField};
use crate::network::{ConservationStructure, Network, NetworkError};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("blow-up at t = {time}: max value {max_value:.3e} exceeds the overflow guard")]
    BlowUp { time: f64, max_value: f64 },
    #[error("tridiagonal solve failed for species {species} at t = {time}")]
    LinearSolveFailure { species: usize, time: f64 },
    #[error("bad solver configuration: {0}")]
    BadConfig(String),
    #[error("initial-data expression: {0}")]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("decay-rate window holds {samples} samples; at least 10 are required")]
    WindowTooNarrow { samples: usize },
    #[error("entropy not strictly positive on the fit window (E = {value:.3e} at t = {time})")]
    EntropyNotPositive { time: f64, value: f64 },
}

/// Per-species initial data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum InitialData {
    Constant(f64),
    /// Expression in `x`, evaluated at cell midpoints.
    Expression(String),
    /// Explicit per-cell profile; length must equal `n_x`.
    Profile(Vec<f64>),
}

/// Solver configuration. `dt = None` derives the step from a spectral
/// estimate of the reaction Jacobian at the initial data (factor `safety`),
/// re-checked every 100 steps with a warning on violation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_x: usize,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub epsilon: f64,
    pub initial: Vec<InitialData>,
    pub output_stride: usize,
    pub safety: f64,
}

impl SolverConfig {
    pub fn new(t_end: f64, initial: Vec<InitialData>) -> Self {
        SolverConfig {
            n_x: 256,
            dt: None,
            t_end,
            epsilon: 0.0,
            initial,
            output_stride: 10,
            safety: 0.9,
        }
    }
}

const OVERFLOW_GUARD: f64 = 1e12;
const CLIP_FLOOR: f64 = -1e-13;
const JACOBIAN_RECHECK_STRIDE: usize = 100;

/// Time series of diagnostics recorded every `output_stride` steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSeries {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub dissipation: Vec<f64>,
    /// `Q c_bar(t)` per record.
    pub masses: Vec<Vec<f64>>,
    pub averages: Vec<Vec<f64>>,
    pub minima: Vec<Vec<f64>>,
    /// `||c_i - c_inf_i||_L1` per record, for per-species decay fits.
    pub l1_distances: Vec<Vec<f64>>,
    /// Largest |R_i| over cells at the record step.
    pub max_reaction: Vec<f64>,
    /// Largest tridiagonal solve residual at the record step.
    pub linear_residual: Vec<f64>,
    pub c_inf: Vec<f64>,
    pub dt: f64,
    pub n_x: usize,
    pub steps: usize,
    pub clip_events: u64,
    pub clipped_mass: f64,
    pub min_before_clip: f64,
    pub stability_warnings: Vec<String>,
    #[serde(skip)]
    pub final_field: Option<SpatialField>,
}

/// Runs the IMEX scheme and records diagnostics against the equilibrium
/// `c_inf` (used for the entropy and dissipation functionals).
pub fn simulate(
    net: &Network,
    cs: &ConservationStructure,
    c_inf: &[f64],
    cfg: &SolverConfig,
) -> Result<SimulationSeries, SolverError> {
    let n = net.n_species();
    if cfg.initial.len() != n {
        return Err(SolverError::BadConfig(format!(
            "{} initial-data entries for {} species",
            cfg.initial.len(),
            n
        )));
    }
    if cfg.n_x == 0 || !(cfg.t_end > 0.0) || cfg.epsilon < 0.0 || !(cfg.safety > 0.0) {
        return Err(SolverError::BadConfig(
            "need n_x >= 1, t_end > 0, epsilon >= 0, safety > 0".into(),
        ));
    }
    let n_x = cfg.n_x;
    let h = 1.0 / n_x as f64;

    // Assemble and validate initial data.
    let mut values = Array2::zeros((n, n_x));
    for (i, init) in cfg.initial.iter().enumerate() {
        match init {
            InitialData::Constant(v) => values.row_mut(i).fill(*v),
            InitialData::Expression(text) => {
                let expr = Expression::parse(text)?;
                for j in 0..n_x {
                    values[(i, j)] = expr.eval((j as f64 + 0.5) * h);
                }
            }
            InitialData::Profile(profile) => {
                if profile.len() != n_x {
                    return Err(SolverError::BadConfig(format!(
                        "profile for species {i} has {} cells, grid has {n_x}",
                        profile.len()
                    )));
                }
                for (j, v) in profile.iter().enumerate() {
                    values[(i, j)] = *v;
                }
            }
        }
    }
    let field = SpatialField::new(values)?;
    let mut state: Vec<Vec<f64>> = (0..n).map(|i| field.values().row(i).to_vec()).collect();

    let mut warnings = Vec::new();
    let mut lipschitz = reaction_lipschitz(net, &state);
    let dt = match cfg.dt {
        Some(dt) if dt > 0.0 => {
            if lipschitz > 0.0 && dt > cfg.safety / lipschitz {
                warnings.push(format!(
                    "dt = {dt:.3e} exceeds the stability estimate {:.3e} at t = 0",
                    cfg.safety / lipschitz
                ));
            }
            dt
        }
        Some(bad) => {
            return Err(SolverError::BadConfig(format!(
                "dt = {bad} must be positive"
            )))
        }
        None => {
            let est = if lipschitz > 0.0 {
                cfg.safety / lipschitz
            } else {
                cfg.t_end / 100.0
            };
            est.min(cfg.t_end)
        }
    };
    let steps = (cfg.t_end / dt).ceil() as usize;
    let stride = cfg.output_stride.max(1);

    let q = cs.q_f64();
    let mut series = SimulationSeries {
        times: Vec::new(),
        entropy: Vec::new(),
        dissipation: Vec::new(),
        masses: Vec::new(),
        averages: Vec::new(),
        minima: Vec::new(),
        l1_distances: Vec::new(),
        max_reaction: Vec::new(),
        linear_residual: Vec::new(),
        c_inf: c_inf.to_vec(),
        dt,
        n_x,
        steps,
        clip_events: 0,
        clipped_mass: 0.0,
        min_before_clip: f64::INFINITY,
        stability_warnings: Vec::new(),
        final_field: None,
    };

    let mu: Vec<f64> = net.diffusion().iter().map(|d| d * dt / (h * h)).collect();
    let mut scratch = Vec::new();
    let mut rates = vec![0.0; n];
    let mut cell = vec![0.0; n];
    let mut pre_diffusion: Vec<f64> = Vec::new();

    record(net, &q, c_inf, &state, 0.0, 0.0, &mut series)?;

    for step in 0..steps {
        let t_next = (step + 1) as f64 * dt;

        // Implicit diffusion, one tridiagonal solve per species.
        let mut linear_residual = 0.0f64;
        let record_this = (step + 1) % stride == 0 || step + 1 == steps;
        for i in 0..n {
            if record_this {
                pre_diffusion.clear();
                pre_diffusion.extend_from_slice(&state[i]);
            }
            if tridiag::solve_neumann_diffusion(mu[i], &mut state[i], &mut scratch).is_err() {
                return Err(SolverError::LinearSolveFailure {
                    species: i,
                    time: t_next,
                });
            }
            if record_this {
                let mut applied = vec![0.0; n_x];
                tridiag::apply_neumann_diffusion(mu[i], &state[i], &mut applied);
                for (a, b) in applied.iter().zip(&pre_diffusion) {
                    linear_residual = linear_residual.max((a - b).abs());
                }
            }
        }

        // Explicit, optionally truncated reaction.
        let mut max_reaction = 0.0f64;
        for j in 0..n_x {
            for i in 0..n {
                cell[i] = state[i][j];
            }
            net_rates(net, &cell, &mut rates);
            let magnitude: f64 = rates.iter().map(|v| v.abs()).sum();
            max_reaction = max_reaction.max(rates.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            let damping = if cfg.epsilon > 0.0 {
                1.0 / (1.0 + cfg.epsilon * magnitude)
            } else {
                1.0
            };
            for i in 0..n {
                let mut v = state[i][j] + dt * damping * rates[i];
                if v < 0.0 {
                    series.min_before_clip = series.min_before_clip.min(v);
                    series.clip_events += 1;
                    series.clipped_mass += -v * h;
                    v = 0.0;
                }
                state[i][j] = v;
            }
        }

        // Guards and periodic stability re-estimation. Non-finite values
        // count as blow-up so NaN cannot slip past the max fold.
        let max_value = state
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0f64, |a, v| {
                if v.is_finite() {
                    a.max(*v)
                } else {
                    f64::INFINITY
                }
            });
        if max_value > OVERFLOW_GUARD {
            return Err(SolverError::BlowUp {
                time: t_next,
                max_value,
            });
        }
        if (step + 1) % JACOBIAN_RECHECK_STRIDE == 0 {
            lipschitz = reaction_lipschitz(net, &state);
            if lipschitz > 0.0 && dt > cfg.safety / lipschitz && warnings.len() < 16 {
                warnings.push(format!(
                    "dt = {dt:.3e} exceeds the stability estimate {:.3e} at t = {t_next:.3}",
                    cfg.safety / lipschitz
                ));
            }
        }

        if record_this {
            record(net, &q, c_inf, &state, t_next, max_reaction, &mut series)?;
            let last = series.linear_residual.len() - 1;
            series.linear_residual[last] = linear_residual;
        }
    }

    if series.min_before_clip < CLIP_FLOOR {
        warnings.push(format!(
            "negative excursion {:.3e} beyond the clip floor {CLIP_FLOOR:.0e}",
            series.min_before_clip
        ));
    }
    series.stability_warnings = warnings;
    let mut final_values = Array2::zeros((n, n_x));
    for i in 0..n {
        for j in 0..n_x {
            final_values[(i, j)] = state[i][j];
        }
    }
    series.final_field = Some(SpatialField::new(final_values)?);
    Ok(series)
}

fn net_rates(net: &Network, c: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in net.reactions() {
        let flux = r.rate * net.monomial(r.reactant, c);
        let yr = net.complex_f64(r.reactant);
        let yp = net.complex_f64(r.product);
        for i in 0..out.len() {
            out[i] += flux * (yp[i] - yr[i]);
        }
    }
}

/// Infinity-norm estimate of the reaction Jacobian over all cells.
fn reaction_lipschitz(net: &Network, state: &[Vec<f64>]) -> f64 {
    let n = state.len();
    let n_x = state[0].len();
    let mut worst = 0.0f64;
    let mut cell = vec![0.0; n];
    // Sampling every cell is cheap relative to the tridiagonal solves.
    for j in 0..n_x {
        for i in 0..n {
            cell[i] = state[i][j];
        }
        let jac = net.reaction_jacobian(&cell);
        for row in &jac {
            worst = worst.max(row.iter().map(|v| v.abs()).sum());
        }
    }
    worst
}

#[allow(clippy::too_many_arguments)]
fn record(
    net: &Network,
    q: &[Vec<f64>],
    c_inf: &[f64],
    state: &[Vec<f64>],
    t: f64,
    max_reaction: f64,
    series: &mut SimulationSeries,
) -> Result<(), SolverError> {
    let n = state.len();
    let n_x = state[0].len();
    let mut values = Array2::zeros((n, n_x));
    for i in 0..n {
        for j in 0..n_x {
            values[(i, j)] = state[i][j];
        }
    }
    let field = SpatialField::new(values)?;
    let averages = field.averages();
    series.times.push(t);
    series.entropy.push(relative_entropy(&field, c_inf)?);
    series
        .dissipation
        .push(entropy_dissipation(net, &field, c_inf)?.total);
    series.masses.push(
        q.iter()
            .map(|row| row.iter().zip(&averages).map(|(a, b)| a * b).sum())
            .collect(),
    );
    series.minima.push(field.minima());
    series.l1_distances.push(field.l1_distances(c_inf));
    series.averages.push(averages);
    series.max_reaction.push(max_reaction);
    series.linear_residual.push(0.0);
    Ok(())
}

/// Least-squares exponential decay rates over a time window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    /// `-slope` of `ln E(t)` over the window.
    pub lambda_emp: f64,
    /// Per-species rates of `ln ||c_i - c_inf_i||_L1`; `None` where the
    /// distance hits zero inside the window.
    pub per_species: Vec<Option<f64>>,
    pub samples: usize,
    pub window: (f64, f64),
}

pub fn fit_decay_rate(
    series: &SimulationSeries,
    window: (f64, f64),
) -> Result<DecayFit, SolverError> {
    let idx: Vec<usize> = series
        .times
        .iter()
        .enumerate()
        .filter(|(_, t)| **t >= window.0 && **t <= window.1)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 10 {
        return Err(SolverError::WindowTooNarrow { samples: idx.len() });
    }
    const FLOOR: f64 = 1e-250;
    for &i in &idx {
        if !(series.entropy[i] > FLOOR) {
            return Err(SolverError::EntropyNotPositive {
                time: series.times[i],
                value: series.entropy[i],
            });
        }
    }
    let slope = |points: &[(f64, f64)]| -> f64 {
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|(x, _)| x).sum();
        let sy: f64 = points.iter().map(|(_, y)| y).sum();
        let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    let e_points: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| (series.times[i], series.entropy[i].ln()))
        .collect();
    let lambda_emp = -slope(&e_points);

    let n = series.c_inf.len();
    let per_species = (0..n)
        .map(|s| {
            let pts: Vec<(f64, f64)> = idx
                .iter()
                .filter(|&&i| series.l1_distances[i][s] > FLOOR)
                .map(|&i| (series.times[i], series.l1_distances[i][s].ln()))
                .collect();
            if pts.len() == idx.len() {
                Some(-slope(&pts))
            } else {
                None
            }
        })
        .collect();

    Ok(DecayFit {
        lambda_emp,
        per_species,
        samples: idx.len(),
        window,
    })
}

/// Worst signed defect of the integrated entropy law over all recorded pairs
/// `s < t`: `max [E(t) + int_s^t D - E(s)]`, computed via the running
/// minimum of `F(t) = E(t) + int_0^t D` (trapezoid quadrature).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakLawReport {
    pub worst_violation: f64,
    pub at_s: f64,
    pub at_t: f64,
    /// Leading records skipped because E or D was not finite there (initial
    /// layers with zero cells produce infinite dissipation quadrature).
    pub skipped_records: usize,
}

pub fn check_weak_entropy_law(series: &SimulationSeries) -> WeakLawReport {
    let n = series.times.len();
    let first_finite = (0..n)
        .find(|&i| series.entropy[i].is_finite() && series.dissipation[i].is_finite())
        .unwrap_or(n);
    let mut worst = f64::NEG_INFINITY;
    let (mut at_s, mut at_t) = (f64::NAN, f64::NAN);
    let mut cumulative = 0.0;
    // Strict pairs s < t: the minimum tracks records before the current one,
    // so the worst defect is genuinely signed (negative when the law holds
    // with slack everywhere).
    let mut min_f = f64::INFINITY;
    let mut min_time = f64::NAN;
    let mut prev: Option<(f64, f64)> = None; // (time, D)
    for i in first_finite..n {
        let (t, d) = (series.times[i], series.dissipation[i]);
        if !series.entropy[i].is_finite() || !d.is_finite() {
            continue;
        }
        if let Some((tp, dp)) = prev {
            cumulative += 0.5 * (d + dp) * (t - tp);
        }
        let f = series.entropy[i] + cumulative;
        if prev.is_some() && f - min_f > worst {
            worst = f - min_f;
            at_s = min_time;
            at_t = t;
        }
        if f < min_f {
            min_f = f;
            min_time = t;
        }
        prev = Some((t, d));
    }
    WeakLawReport {
        worst_violation: if worst.is_finite() { worst } else { 0.0 },
        at_s,
        at_t,
        skipped_records: first_finite,
    }
}

/// Series CSV with the fixed header `t,E,D,mass_*,avg_*,min_*`.
pub fn series_to_csv(series: &SimulationSeries) -> String {
    use std::fmt::Write;
    let n = series.c_inf.len();
    let m = series.masses.first().map(|v| v.len()).unwrap_or(0);
    let mut out = String::from("t,E,D");
    for k in 0..m {
        write!(out, ",mass_{}", k + 1).unwrap();
    }
    for i in 0..n {
        write!(out, ",avg_{}", i + 1).unwrap();
    }
    for i in 0..n {
        write!(out, ",min_{}", i + 1).unwrap();
    }
    out.push('\n');
    for rec in 0..series.times.len() {
        write!(
            out,
            "{},{},{}",
            series.times[rec], series.entropy[rec], series.dissipation[rec]
        )
        .unwrap();
        for v in &series.masses[rec] {
            write!(out, ",{v}").unwrap();
        }
        for v in &series.averages[rec] {
            write!(out, ",{v}").unwrap();
        }
        for v in &series.minima[rec] {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}
