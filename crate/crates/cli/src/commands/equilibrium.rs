//! `equilibrium`: the positive complex balanced equilibrium plus the
//! boundary-equilibria sample for the requested mass class.

use crate::common::{load_network, resolve_mass, CliError, OutputWriter};
use crn_entropy::equilibrium::{
    find_boundary_equilibria, solve_complex_balanced, BoundarySearch, EquilibriumResult,
    SolveOptions,
};
use serde::Serialize;
use serde_json::json;

#[derive(Serialize)]
struct EquilibriumReport {
    mass: Vec<f64>,
    equilibrium: EquilibriumResult,
    boundary: BoundarySearch,
}

pub fn run(
    out_dir: &str,
    network_path: &str,
    mass: Option<&[f64]>,
    initial: Option<&[f64]>,
    seed: u64,
) -> Result<(), CliError> {
    let loaded = load_network(network_path)?;
    let mass = resolve_mass(&loaded, mass, initial)?;
    let opts = SolveOptions {
        seed,
        ..SolveOptions::default()
    };
    let equilibrium = solve_complex_balanced(&loaded.network, &loaded.conservation, &mass, &opts)?;
    let boundary = find_boundary_equilibria(&loaded.network, &loaded.conservation, &mass, &opts)?;

    println!(
        "c_inf = [{}], balance residual {:.2e}, mass residual {:.2e}, {} boundary equilibria",
        equilibrium
            .c_infty
            .iter()
            .map(|v| format!("{v:.12}"))
            .collect::<Vec<_>>()
            .join(", "),
        equilibrium.residual_complex_balance,
        equilibrium.residual_mass,
        boundary.equilibria.len()
    );

    let report = EquilibriumReport {
        mass: mass.values.clone(),
        equilibrium,
        boundary,
    };
    let mut writer = OutputWriter::new(out_dir)?;
    writer.write_json("equilibrium.json", &report)?;
    writer.finish(
        "equilibrium",
        &loaded.hash,
        json!({ "network": network_path, "mass": mass.values, "seed": seed }),
    )
}
