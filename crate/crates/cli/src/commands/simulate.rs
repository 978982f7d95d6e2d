//! `simulate`: run the IMEX solver, write the diagnostic series and final
//! snapshot, fit the empirical decay rate and check the integrated entropy
//! law; optionally verify the cyclic-template lower bound.

use crate::common::{load_network, CliError, OutputWriter};
use crn_entropy::constants::templates::{detect_cyclic, detect_enzyme};
use crn_entropy::constants::{
    chain_constants, cyclic_lower_bound_h, enzyme_h1, lambda_rate, ChainConfig, H1Source, H1Value,
};
use crn_entropy::entropy::field_to_csv;
use crn_entropy::equilibrium::{find_boundary_equilibria, solve_complex_balanced, SolveOptions};
use crn_entropy::network::mass_vector;
use crn_entropy::pdesolver::{
    check_weak_entropy_law, fit_decay_rate, series_to_csv, simulate, DecayFit, Expression,
    InitialData, SimulationSeries, SolverConfig, SolverError, WeakLawReport,
};
use serde::Serialize;
use serde_json::json;

pub struct Request<'a> {
    pub out_dir: &'a str,
    pub network_path: &'a str,
    pub initial: Option<&'a [String]>,
    pub initial_profile: Option<&'a str>,
    pub n_x: usize,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub epsilon: f64,
    pub stride: usize,
    pub window: Option<(f64, f64)>,
    pub check_lower_bound: bool,
    pub seed: u64,
}

#[derive(Serialize)]
struct LowerBoundCheck {
    alpha: f64,
    k3_rate: f64,
    inv_bound: f64,
    records_checked: usize,
    worst_margin: f64,
    pass: bool,
}

/// Pointwise check of the trajectory estimate `D(t) >= lambda(t) E(t)` with
/// `lambda(t) = 1/2 min(lambda1, K2 H1(t) / K1)`.
#[derive(Serialize)]
struct ModifiedEedCheck {
    k_entropy: f64,
    records_checked: usize,
    /// min over records of D - lambda(t) E.
    worst_margin: f64,
    /// min over records of D / (lambda(t) E), where defined.
    min_ratio: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct SimulationSummary {
    mass: Vec<f64>,
    c_inf: Vec<f64>,
    entropy_initial: f64,
    entropy_final: f64,
    mass_drift: f64,
    lambda_emp: Option<f64>,
    lambda_theory: Option<f64>,
    decay_fit: Option<DecayFit>,
    weak_law: WeakLawReport,
    clip_events: u64,
    clipped_mass: f64,
    stability_warnings: Vec<String>,
    lower_bound: Option<LowerBoundCheck>,
    modified_eed: Option<ModifiedEedCheck>,
}

impl From<SolverError> for CliError {
    fn from(err: SolverError) -> Self {
        match err {
            SolverError::BlowUp { .. } => CliError::BlowUp(err.to_string()),
            SolverError::LinearSolveFailure { .. } => CliError::Solver(err.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub fn run(req: Request<'_>) -> Result<(), CliError> {
    let loaded = load_network(req.network_path)?;
    let net = &loaded.network;
    let cs = &loaded.conservation;

    // Initial data determines the mass class; averages come from the same
    // quadrature the solver uses.
    let (initial, n_x) = match (req.initial, req.initial_profile) {
        (Some(texts), None) => {
            if texts.len() != net.n_species() {
                return Err(CliError::Validation(format!(
                    "--initial needs {} entries (one per species), got {}",
                    net.n_species(),
                    texts.len()
                )));
            }
            let data = texts
                .iter()
                .map(|text| InitialData::Expression(text.clone()))
                .collect();
            (data, req.n_x)
        }
        (None, Some(path)) => read_profile(path, net.n_species())?,
        _ => {
            return Err(CliError::Validation(
                "exactly one of --initial or --initial-profile is required".into(),
            ))
        }
    };
    let averages = initial_averages(&initial, n_x)?;
    let mass = mass_vector(cs, &averages).map_err(CliError::from)?;
    if let Some((i, v)) = mass.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(CliError::Validation(format!(
            "initial data yields mass component {} = {v}; M must be positive",
            i + 1
        )));
    }

    let opts = SolveOptions {
        seed: req.seed,
        ..SolveOptions::default()
    };
    let equilibrium = solve_complex_balanced(net, cs, &mass, &opts)?;
    let c_inf = equilibrium.c_infty.clone();

    let cfg = SolverConfig {
        n_x,
        dt: req.dt,
        t_end: req.t_end,
        epsilon: req.epsilon,
        initial,
        output_stride: req.stride,
        safety: 0.9,
    };
    let series = simulate(net, cs, &c_inf, &cfg)?;

    // Default fit window: from the start to the last record where the
    // entropy is still meaningfully above the floating-point floor.
    let window = req.window.unwrap_or_else(|| {
        let e0 = series.entropy.first().copied().unwrap_or(0.0);
        let cut = series
            .times
            .iter()
            .zip(&series.entropy)
            .take_while(|(_, e)| **e > 1e-13 * e0.max(1e-300))
            .map(|(t, _)| *t)
            .last()
            .unwrap_or(req.t_end);
        (0.0, cut)
    });
    let decay_fit = fit_decay_rate(&series, window).ok();
    let weak_law = check_weak_entropy_law(&series);
    let lambda_theory = theoretical_lambda(&loaded, &mass, &c_inf, &series, req.seed);
    let (lower_bound, modified_eed) = if req.check_lower_bound {
        let bound = lower_bound_check(net, &series, &cfg)?;
        let eed = modified_eed_check(net, &series, &bound)?;
        (Some(bound), Some(eed))
    } else {
        (None, None)
    };

    let mass_drift = mass_drift(&series);
    let summary = SimulationSummary {
        mass: mass.values.clone(),
        c_inf,
        entropy_initial: series.entropy.first().copied().unwrap_or(f64::NAN),
        entropy_final: series.entropy.last().copied().unwrap_or(f64::NAN),
        mass_drift,
        lambda_emp: decay_fit.as_ref().map(|f| f.lambda_emp),
        lambda_theory,
        decay_fit,
        weak_law,
        clip_events: series.clip_events,
        clipped_mass: series.clipped_mass,
        stability_warnings: series.stability_warnings.clone(),
        lower_bound,
        modified_eed,
    };

    match (summary.lambda_emp, summary.lambda_theory) {
        (Some(emp), Some(theory)) => println!(
            "lambda_emp = {emp:.6e} vs theoretical lambda = {theory:.6e} ({})",
            if emp >= theory {
                "emp >= theory"
            } else {
                "emp BELOW theory"
            }
        ),
        (Some(emp), None) => println!("lambda_emp = {emp:.6e}, theoretical lambda n/a"),
        _ => println!("decay fit unavailable on the requested window"),
    }
    if let Some(check) = &summary.lower_bound {
        println!(
            "lower bound check: {} ({} records, worst margin {:.3e})",
            if check.pass { "PASS" } else { "FAIL" },
            check.records_checked,
            check.worst_margin
        );
    }
    if let Some(check) = &summary.modified_eed {
        println!(
            "time-dependent dissipation check: {} ({} records, worst margin {:.3e})",
            if check.pass { "PASS" } else { "FAIL" },
            check.records_checked,
            check.worst_margin
        );
    }
    println!(
        "entropy {:.6e} -> {:.6e}, mass drift {:.3e}, weak-law violation {:.3e}",
        summary.entropy_initial,
        summary.entropy_final,
        summary.mass_drift,
        summary.weak_law.worst_violation
    );

    let mut writer = OutputWriter::new(req.out_dir)?;
    writer.write("series.csv", &series_to_csv(&series))?;
    if let Some(field) = &series.final_field {
        writer.write("snapshot.csv", &field_to_csv(field))?;
    }
    writer.write_json("summary.json", &summary)?;
    writer.finish(
        "simulate",
        &loaded.hash,
        json!({
            "network": req.network_path,
            "initial": req.initial,
            "initial_profile": req.initial_profile,
            "nx": req.n_x,
            "dt": req.dt,
            "t_end": req.t_end,
            "epsilon": req.epsilon,
            "stride": req.stride,
            "window": req.window.map(|w| vec![w.0, w.1]),
            "check_lower_bound": req.check_lower_bound,
            "seed": req.seed,
        }),
    )
}

/// Reads a snapshot CSV (`x,c_1..c_N`) into per-species profiles; the grid
/// size is the row count.
fn read_profile(path: &str, n_species: usize) -> Result<(Vec<InitialData>, usize), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read `{path}`: {e}")))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Validation(format!("`{path}` is empty")))?;
    let columns = header.split(',').count();
    if columns != n_species + 1 {
        return Err(CliError::Validation(format!(
            "`{path}` has {columns} columns, expected x plus {n_species} species"
        )));
    }
    let mut profiles: Vec<Vec<f64>> = vec![Vec::new(); n_species];
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(CliError::Validation(format!(
                "`{path}` row {} has {} fields, expected {columns}",
                row + 2,
                fields.len()
            )));
        }
        for (i, field) in fields[1..].iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Validation(format!(
                    "`{path}` row {}: invalid number `{field}`",
                    row + 2
                ))
            })?;
            profiles[i].push(v);
        }
    }
    let n_x = profiles[0].len();
    if n_x == 0 {
        return Err(CliError::Validation(format!("`{path}` has no data rows")));
    }
    Ok((
        profiles.into_iter().map(InitialData::Profile).collect(),
        n_x,
    ))
}

fn initial_averages(initial: &[InitialData], n_x: usize) -> Result<Vec<f64>, CliError> {
    let h = 1.0 / n_x as f64;
    initial
        .iter()
        .map(|init| match init {
            InitialData::Constant(v) => Ok(*v),
            InitialData::Expression(text) => {
                let expr = Expression::parse(text)
                    .map_err(|e| CliError::Validation(format!("initial data: {e}")))?;
                Ok((0..n_x)
                    .map(|j| expr.eval((j as f64 + 0.5) * h))
                    .sum::<f64>()
                    * h)
            }
            InitialData::Profile(values) => Ok(values.iter().sum::<f64>() * h),
        })
        .collect()
}

/// Chain rate with K = E(c0 | c_inf) and the closed-form enzyme H1 when the
/// template matches; None for non-template networks or boundary equilibria.
fn theoretical_lambda(
    loaded: &crate::common::LoadedNetwork,
    mass: &crn_entropy::network::MassVector,
    c_inf: &[f64],
    series: &SimulationSeries,
    seed: u64,
) -> Option<f64> {
    let net = &loaded.network;
    let template = detect_enzyme(net)?;
    let opts = SolveOptions {
        seed,
        ..SolveOptions::default()
    };
    let boundary = find_boundary_equilibria(net, &loaded.conservation, mass, &opts).ok()?;
    if !boundary.equilibria.is_empty() {
        return None;
    }
    let k_entropy = series.entropy.first().copied()?.max(1e-12);
    let mut chain = chain_constants(net, c_inf, k_entropy, &ChainConfig::default()).ok()?;
    let closed = enzyme_h1(&template.to_role_order(c_inf)).ok()?;
    chain.h1 = Some(H1Value {
        value: closed.h1,
        source: H1Source::ClosedForm,
    });
    lambda_rate(&chain).ok()
}

fn lower_bound_check(
    net: &crn_entropy::network::Network,
    series: &SimulationSeries,
    cfg: &SolverConfig,
) -> Result<LowerBoundCheck, CliError> {
    let Some(template) = detect_cyclic(net) else {
        return Err(CliError::Validation(
            "--check-lower-bound requires the cyclic template".into(),
        ));
    };
    // inv_bound = sup 1/c_{2,0}^alpha from the realized initial data.
    let idx = template.roles[1];
    let min0 = initial_minimum(&cfg.initial[idx], cfg.n_x)?;
    if !(min0 > 0.0) {
        return Err(CliError::Validation(
            "the cycled species initial data must be bounded away from zero for the lower-bound check"
                .into(),
        ));
    }
    let inv_bound = min0.powf(-template.alpha);
    let k3_rate = template.rates[2];
    let mut worst_margin = f64::INFINITY;
    for (t, avg) in series.times.iter().zip(&series.averages) {
        let bound = cyclic_lower_bound_h(*t, template.alpha, k3_rate, inv_bound);
        worst_margin = worst_margin.min(avg[idx] - bound);
    }
    Ok(LowerBoundCheck {
        alpha: template.alpha,
        k3_rate,
        inv_bound,
        records_checked: series.times.len(),
        worst_margin,
        pass: worst_margin >= -1e-9,
    })
}

/// Verifies `D(t) >= lambda(t) E(t)` with the chain constants evaluated at
/// `K = E(0)` and the time-dependent FDI coefficient of the cyclic template.
fn modified_eed_check(
    net: &crn_entropy::network::Network,
    series: &SimulationSeries,
    bound: &LowerBoundCheck,
) -> Result<ModifiedEedCheck, CliError> {
    let Some(template) = detect_cyclic(net) else {
        return Err(CliError::Validation(
            "the time-dependent dissipation check requires the cyclic template".into(),
        ));
    };
    let k_entropy = series
        .entropy
        .first()
        .copied()
        .unwrap_or(f64::NAN)
        .max(1e-12);
    let chain = chain_constants(net, &series.c_inf, k_entropy, &ChainConfig::default())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let roles_c_inf = template.to_role_order(&series.c_inf);
    let mut worst_margin = f64::INFINITY;
    let mut min_ratio: Option<f64> = None;
    let mut records = 0usize;
    for ((t, e), d) in series
        .times
        .iter()
        .zip(&series.entropy)
        .zip(&series.dissipation)
    {
        if !e.is_finite() || !d.is_finite() {
            continue;
        }
        let h1_t = crn_entropy::constants::cyclic_h1_of_t(
            *t,
            template.alpha,
            bound.k3_rate,
            &roles_c_inf,
            bound.inv_bound,
        )
        .map_err(|err| CliError::Validation(err.to_string()))?;
        let lambda_t = 0.5 * chain.lambda1.min(chain.k2 * h1_t / chain.k1);
        records += 1;
        worst_margin = worst_margin.min(d - lambda_t * e);
        if lambda_t * e > 0.0 {
            let ratio = d / (lambda_t * e);
            min_ratio = Some(min_ratio.map_or(ratio, |m: f64| m.min(ratio)));
        }
    }
    Ok(ModifiedEedCheck {
        k_entropy,
        records_checked: records,
        worst_margin,
        min_ratio,
        pass: worst_margin >= -1e-15,
    })
}

fn initial_minimum(init: &InitialData, n_x: usize) -> Result<f64, CliError> {
    let h = 1.0 / n_x as f64;
    Ok(match init {
        InitialData::Constant(v) => *v,
        InitialData::Expression(text) => {
            let expr = Expression::parse(text)
                .map_err(|e| CliError::Validation(format!("initial data: {e}")))?;
            (0..n_x)
                .map(|j| expr.eval((j as f64 + 0.5) * h))
                .fold(f64::INFINITY, f64::min)
        }
        InitialData::Profile(values) => values.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

fn mass_drift(series: &SimulationSeries) -> f64 {
    let Some(first) = series.masses.first() else {
        return 0.0;
    };
    let m_inf = first.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for rec in &series.masses {
        for (a, b) in rec.iter().zip(first) {
            worst = worst.max((a - b).abs());
        }
    }
    worst / (1.0 + m_inf)
}
