//! `analyze`: validation plus the conservation report.

use crate::common::{load_network, CliError, OutputWriter};
use serde::Serialize;
use serde_json::json;

#[derive(Serialize)]
struct AnalysisReport {
    species: Vec<String>,
    n_species: usize,
    n_complexes: usize,
    n_reactions: usize,
    complexes: Vec<String>,
    reactions: Vec<ReactionLine>,
    wegscheider: Vec<Vec<String>>,
    q_matrix: Vec<Vec<String>>,
    codim: usize,
}

#[derive(Serialize)]
struct ReactionLine {
    reactant: String,
    product: String,
    rate: f64,
}

pub fn run(out_dir: &str, network_path: &str, format: &str) -> Result<(), CliError> {
    let loaded = load_network(network_path)?;
    let net = &loaded.network;
    let cs = &loaded.conservation;

    let report = AnalysisReport {
        species: net.species().to_vec(),
        n_species: net.n_species(),
        n_complexes: net.n_complexes(),
        n_reactions: net.reactions().len(),
        complexes: (0..net.n_complexes())
            .map(|i| net.complex_display(i))
            .collect(),
        reactions: net
            .reactions()
            .iter()
            .map(|r| ReactionLine {
                reactant: net.complex_display(r.reactant),
                product: net.complex_display(r.product),
                rate: r.rate,
            })
            .collect(),
        wegscheider: cs.wegscheider().to_strings(),
        q_matrix: cs.q_matrix().to_strings(),
        codim: cs.codim(),
    };

    println!(
        "{}: {} species, {} complexes, {} reactions, {} conservation laws",
        network_path, report.n_species, report.n_complexes, report.n_reactions, report.codim
    );
    for row in &report.q_matrix {
        println!("  Q row: [{}]", row.join(", "));
    }

    let mut writer = OutputWriter::new(out_dir)?;
    writer.write_json("analysis.json", &report)?;
    if format == "csv" {
        let mut csv = String::from("matrix,row,entries\n");
        for (i, row) in report.wegscheider.iter().enumerate() {
            csv.push_str(&format!("W,{},{}\n", i, row.join(";")));
        }
        for (i, row) in report.q_matrix.iter().enumerate() {
            csv.push_str(&format!("Q,{},{}\n", i, row.join(";")));
        }
        writer.write("conservation.csv", &csv)?;
    }
    writer.finish(
        "analyze",
        &loaded.hash,
        json!({ "network": network_path, "format": format }),
    )
}
