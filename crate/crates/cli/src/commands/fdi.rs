//! `fdi`: projected constrained sampling of the finite-dimensional
//! inequality, reporting the minimum ratio and any violations of the
//! reference H1 (closed form where a template matches).

use crate::common::{load_network, resolve_mass, CliError, OutputWriter};
use crn_entropy::constants::templates::detect_enzyme;
use crn_entropy::constants::{enzyme_h1, fdi_evaluate, fdi_ratio, project_mu};
use crn_entropy::equilibrium::{solve_complex_balanced, SolveOptions};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

#[derive(Serialize)]
struct FdiReport {
    samples_requested: usize,
    samples_projected: usize,
    projection_failures: usize,
    min_ratio: f64,
    min_ratio_mu: Vec<f64>,
    h1_reference: Option<f64>,
    violations: usize,
    max_constraint_residual: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    out_dir: &str,
    network_path: &str,
    mass: Option<&[f64]>,
    initial: Option<&[f64]>,
    k_entropy: f64,
    samples: usize,
    seed: u64,
    format: &str,
) -> Result<(), CliError> {
    let loaded = load_network(network_path)?;
    let net = &loaded.network;
    let cs = &loaded.conservation;
    let mass = resolve_mass(&loaded, mass, initial)?;
    let opts = SolveOptions {
        seed,
        ..SolveOptions::default()
    };
    let equilibrium = solve_complex_balanced(net, cs, &mass, &opts)?;
    let c_inf = equilibrium.c_infty;

    let h1_reference = detect_enzyme(net)
        .map(|t| enzyme_h1(&t.to_role_order(&c_inf)))
        .transpose()
        .map_err(|e| CliError::Validation(e.to_string()))?
        .map(|r| r.h1);

    let n = net.n_species();
    let k_tilde = 2.0 * (k_entropy + c_inf.iter().sum::<f64>());
    let mu_max: Vec<f64> = c_inf.iter().map(|ci| (k_tilde / ci).sqrt() - 1.0).collect();
    let q = cs.q_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut projected = 0usize;
    let mut failures = 0usize;
    let mut violations = 0usize;
    let mut min_ratio = f64::INFINITY;
    let mut min_mu = vec![0.0; n];
    let mut max_residual = 0.0f64;
    let mut rows = Vec::new();

    while projected < samples {
        let mu0: Vec<f64> = (0..n).map(|i| rng.gen_range(-1.0..mu_max[i])).collect();
        let Ok(mu) = project_mu(&q, &c_inf, &mu0) else {
            failures += 1;
            if failures > samples * 20 {
                return Err(CliError::Solver(
                    "projection onto the constraint manifold keeps failing".into(),
                ));
            }
            continue;
        };
        if mu.iter().zip(&mu_max).any(|(v, hi)| *v > hi + 1e-9) {
            failures += 1;
            continue;
        }
        projected += 1;
        let point =
            fdi_evaluate(net, cs, &c_inf, &mu).map_err(|e| CliError::Validation(e.to_string()))?;
        max_residual = max_residual.max(point.constraint_residual);
        if point.rhs_base < 1e-16 {
            continue; // equilibrium point, ratio handled by the linearized cap
        }
        let ratio = fdi_ratio(net, cs, &c_inf, &mu);
        if ratio < min_ratio {
            min_ratio = ratio;
            min_mu = mu.clone();
        }
        if let Some(h1) = h1_reference {
            if point.lhs < h1 * point.rhs_base * (1.0 - 1e-10) {
                violations += 1;
            }
        }
        if format == "csv" && rows.len() < 10_000 {
            rows.push(format!("{},{},{}", ratio, point.lhs, point.rhs_base));
        }
    }

    println!(
        "{projected} projected samples, min ratio {min_ratio:.6e}, reference H1 {:?}, {violations} violations, worst constraint residual {max_residual:.2e}",
        h1_reference
    );

    let report = FdiReport {
        samples_requested: samples,
        samples_projected: projected,
        projection_failures: failures,
        min_ratio,
        min_ratio_mu: min_mu,
        h1_reference,
        violations,
        max_constraint_residual: max_residual,
    };
    let mut writer = OutputWriter::new(out_dir)?;
    writer.write_json("fdi.json", &report)?;
    if format == "csv" {
        let mut csv = String::from("ratio,lhs,rhs_base\n");
        for row in rows {
            csv.push_str(&row);
            csv.push('\n');
        }
        writer.write("fdi_samples.csv", &csv)?;
    }
    writer.finish(
        "fdi",
        &loaded.hash,
        json!({
            "network": network_path,
            "mass": mass.values,
            "K": k_entropy,
            "samples": samples,
            "seed": seed,
        }),
    )
}
