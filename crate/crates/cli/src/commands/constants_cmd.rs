//! `constants`: the full constant chain, H1 (closed form, estimate, or the
//! time-dependent coefficient) and the resulting decay rate.

use crate::common::{load_network, resolve_mass, CliError, OutputWriter};
use crn_entropy::constants::templates::{detect_cyclic, detect_enzyme};
use crn_entropy::constants::{
    chain_constants, cyclic_h1_of_t, cyclic_lower_bound_h, cyclic_rho, enzyme_h1, estimate_h1,
    lambda_rate, scan_l_threshold, ChainConfig, ConstantsError, ConstantsReport, H1Budget,
    H1Estimate, H1Source, H1Value,
};
use crn_entropy::equilibrium::{find_boundary_equilibria, solve_complex_balanced, SolveOptions};
use serde::Serialize;
use serde_json::json;

pub struct Request<'a> {
    pub out_dir: &'a str,
    pub network_path: &'a str,
    pub mass: Option<&'a [f64]>,
    pub initial: Option<&'a [f64]>,
    pub k_entropy: f64,
    pub scan_l: bool,
    pub time_dependent: bool,
    pub times: &'a [f64],
    pub inv_bound: f64,
    pub starts: usize,
    pub descent_steps: usize,
    pub seed: u64,
    pub format: &'a str,
}

#[derive(Serialize)]
struct H1TableRow {
    t: f64,
    h_lower_bound: f64,
    h1_t: f64,
    lambda_t: f64,
}

#[derive(Serialize)]
struct TimeDependentBlock {
    alpha: f64,
    k3_rate: f64,
    inv_bound: f64,
    b_max: f64,
    rho: f64,
    table: Vec<H1TableRow>,
}

#[derive(Serialize)]
struct ConstantsCmdReport {
    mass: Vec<f64>,
    c_inf: Vec<f64>,
    boundary_equilibria: usize,
    chain: ConstantsReport,
    lambda: Option<f64>,
    h1_estimate: Option<H1Estimate>,
    time_dependent: Option<TimeDependentBlock>,
}

impl From<ConstantsError> for CliError {
    fn from(err: ConstantsError) -> Self {
        match err {
            ConstantsError::BoundaryEquilibriaPresent { .. } => {
                CliError::BoundaryEquilibria(err.to_string())
            }
            ConstantsError::Equilibrium(inner) => CliError::from(inner),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

pub fn run(req: Request<'_>) -> Result<(), CliError> {
    let loaded = load_network(req.network_path)?;
    let net = &loaded.network;
    let cs = &loaded.conservation;
    let mass = resolve_mass(&loaded, req.mass, req.initial)?;
    let opts = SolveOptions {
        seed: req.seed,
        ..SolveOptions::default()
    };
    let equilibrium = solve_complex_balanced(net, cs, &mass, &opts)?;
    let c_inf = equilibrium.c_infty.clone();
    let boundary = find_boundary_equilibria(net, cs, &mass, &opts)?;

    if !boundary.equilibria.is_empty() && !req.time_dependent {
        return Err(CliError::BoundaryEquilibria(format!(
            "network has {} boundary equilibria on this mass class (e.g. support {:?}); \
             a time-uniform FDI constant does not exist, rerun with --time-dependent",
            boundary.equilibria.len(),
            boundary.equilibria[0].support
        )));
    }

    let config = ChainConfig::default();
    let mut chain = if req.scan_l {
        scan_l_threshold(net, &c_inf, req.k_entropy, &config, 81)?
    } else {
        chain_constants(net, &c_inf, req.k_entropy, &config)?
    };

    let mut h1_estimate = None;
    let mut time_dependent = None;

    if req.time_dependent {
        let Some(template) = detect_cyclic(net) else {
            return Err(CliError::Validation(
                "--time-dependent requires the cyclic template A -> aB + C -> (a+1)B -> A; \
                 the network does not match it"
                    .into(),
            ));
        };
        let roles_c_inf = template.to_role_order(&c_inf);
        let (b_max, rho) = cyclic_rho(template.alpha, &roles_c_inf)?;
        let k3_rate = template.rates[2];
        let mut table = Vec::new();
        for &t in req.times {
            let h1_t = cyclic_h1_of_t(t, template.alpha, k3_rate, &roles_c_inf, req.inv_bound)?;
            table.push(H1TableRow {
                t,
                h_lower_bound: cyclic_lower_bound_h(t, template.alpha, k3_rate, req.inv_bound),
                h1_t,
                lambda_t: 0.5 * chain.lambda1.min(chain.k2 * h1_t / chain.k1),
            });
        }
        // Report the t = 0 coefficient in the chain slot; lambda stays per-time.
        chain.h1 = Some(H1Value {
            value: cyclic_h1_of_t(0.0, template.alpha, k3_rate, &roles_c_inf, req.inv_bound)?,
            source: H1Source::TimeDependent,
        });
        time_dependent = Some(TimeDependentBlock {
            alpha: template.alpha,
            k3_rate,
            inv_bound: req.inv_bound,
            b_max,
            rho,
            table,
        });
    } else if let Some(template) = detect_enzyme(net) {
        let closed = enzyme_h1(&template.to_role_order(&c_inf))?;
        chain.h1 = Some(H1Value {
            value: closed.h1,
            source: H1Source::ClosedForm,
        });
    } else {
        let estimate = estimate_h1(
            net,
            cs,
            &c_inf,
            req.k_entropy,
            &mass,
            &H1Budget {
                starts: req.starts,
                descent_steps: req.descent_steps,
            },
            req.seed,
        )?;
        chain.h1 = Some(H1Value {
            value: estimate.value,
            source: H1Source::Estimated,
        });
        h1_estimate = Some(estimate);
    }

    let lambda = lambda_rate(&chain).ok();
    chain.lambda = lambda;

    match (&chain.h1, lambda) {
        (Some(h1), Some(l)) => println!(
            "H1 = {:.8e} ({:?}), lambda = {:.8e}, lambda1 = {:.6e}, K1 = {:.6e}, K2 = {:.6e}",
            h1.value, h1.source, l, chain.lambda1, chain.k1, chain.k2
        ),
        _ => println!("chain evaluated without a scalar H1"),
    }

    let report = ConstantsCmdReport {
        mass: mass.values.clone(),
        c_inf,
        boundary_equilibria: boundary.equilibria.len(),
        chain,
        lambda,
        h1_estimate,
        time_dependent,
    };
    let mut writer = OutputWriter::new(req.out_dir)?;
    writer.write_json("constants.json", &report)?;
    if req.format == "csv" {
        if let Some(block) = &report.time_dependent {
            let mut csv = String::from("t,h_lower_bound,h1_t,lambda_t\n");
            for row in &block.table {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    row.t, row.h_lower_bound, row.h1_t, row.lambda_t
                ));
            }
            writer.write("h1_table.csv", &csv)?;
        }
    }
    writer.finish(
        "constants",
        &loaded.hash,
        json!({
            "network": req.network_path,
            "mass": mass.values,
            "K": req.k_entropy,
            "scan_l": req.scan_l,
            "time_dependent": req.time_dependent,
            "times": req.times,
            "inv_bound": req.inv_bound,
            "starts": req.starts,
            "descent_steps": req.descent_steps,
            "seed": req.seed,
        }),
    )
}
