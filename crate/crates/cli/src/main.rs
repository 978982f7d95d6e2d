//! Command-line front end: network analysis, equilibria, the constant
//! chain, FDI sampling and reaction-diffusion simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(v > 0.0)` also rejects NaN

mod commands;
mod common;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "crn-entropy",
    version,
    about = "Reaction-network entropy toolkit"
)]
struct Cli {
    /// Seed for all randomized procedures (sampling, multi-start descent).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: String,
    /// Report format; `csv` additionally writes tabular reports as CSV.
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a network document and report its conservation structure.
    Analyze { network: String },
    /// Compute the positive complex balanced equilibrium and boundary equilibria.
    Equilibrium {
        network: String,
        #[command(flatten)]
        mass: MassArgs,
    },
    /// Evaluate the entropy--entropy-dissipation constant chain and H1.
    Constants {
        network: String,
        #[command(flatten)]
        mass: MassArgs,
        /// Entropy bound K (must dominate E(c_bar | c_inf) for intended states).
        #[arg(long = "K", default_value_t = 1.0)]
        k: f64,
        /// Scan the threshold L over a log grid, maximizing K3.
        #[arg(long)]
        scan_l: bool,
        /// Use the time-dependent FDI coefficient (boundary-equilibria networks).
        #[arg(long)]
        time_dependent: bool,
        /// Times for the H1(t) table.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,1,10,100")]
        times: Vec<f64>,
        /// Sup-norm bound of 1/c_{2,0}^alpha for the time-dependent coefficient.
        #[arg(long, default_value_t = 1.0)]
        inv_bound: f64,
        /// Multi-start budget for the H1 estimate.
        #[arg(long, default_value_t = 256)]
        starts: usize,
        #[arg(long, default_value_t = 500)]
        descent_steps: usize,
    },
    /// Sample projected constrained points of the finite-dimensional inequality.
    Fdi {
        network: String,
        #[command(flatten)]
        mass: MassArgs,
        #[arg(long = "K", default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Run the 1-D reaction-diffusion solver and report decay diagnostics.
    Simulate {
        network: String,
        /// Per-species initial data: constants or expressions in x, `;`-separated.
        #[arg(
            long,
            value_delimiter = ';',
            required_unless_present = "initial_profile"
        )]
        initial: Option<Vec<String>>,
        /// Initial data from a snapshot CSV (`x,c_1..c_N`); overrides --nx.
        #[arg(long, conflicts_with = "initial")]
        initial_profile: Option<String>,
        #[arg(long, default_value_t = 256)]
        nx: usize,
        /// Time step; omitted = derived from the reaction Jacobian.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        /// Reaction truncation parameter (0 = pure mass action).
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Record diagnostics every this many steps.
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// Fit window for the empirical decay rate, as `start,end`.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<f64>>,
        /// Check the cyclic-template lower bound on the second species average.
        #[arg(long)]
        check_lower_bound: bool,
    },
}

/// Either an explicit mass vector or initial averages it is derived from.
#[derive(Args)]
struct MassArgs {
    /// Mass vector M (one value per conservation law).
    #[arg(long, num_args = 1.., conflicts_with = "initial")]
    mass: Option<Vec<f64>>,
    /// Initial average concentrations (one value per species); M = Q c0.
    #[arg(long, num_args = 1..)]
    initial: Option<Vec<f64>>,
}

fn main() {
    let cli = Cli::parse();
    common::init_thread_pool();
    let outcome = match &cli.command {
        Command::Analyze { network } => commands::analyze::run(&cli.out_dir, network, &cli.format),
        Command::Equilibrium { network, mass } => commands::equilibrium::run(
            &cli.out_dir,
            network,
            mass.mass.as_deref(),
            mass.initial.as_deref(),
            cli.seed,
        ),
        Command::Constants {
            network,
            mass,
            k,
            scan_l,
            time_dependent,
            times,
            inv_bound,
            starts,
            descent_steps,
        } => commands::constants_cmd::run(commands::constants_cmd::Request {
            out_dir: &cli.out_dir,
            network_path: network,
            mass: mass.mass.as_deref(),
            initial: mass.initial.as_deref(),
            k_entropy: *k,
            scan_l: *scan_l,
            time_dependent: *time_dependent,
            times,
            inv_bound: *inv_bound,
            starts: *starts,
            descent_steps: *descent_steps,
            seed: cli.seed,
            format: &cli.format,
        }),
        Command::Fdi {
            network,
            mass,
            k,
            samples,
        } => commands::fdi::run(
            &cli.out_dir,
            network,
            mass.mass.as_deref(),
            mass.initial.as_deref(),
            *k,
            *samples,
            cli.seed,
            &cli.format,
        ),
        Command::Simulate {
            network,
            initial,
            initial_profile,
            nx,
            dt,
            t_end,
            epsilon,
            stride,
            window,
            check_lower_bound,
        } => commands::simulate::run(commands::simulate::Request {
            out_dir: &cli.out_dir,
            network_path: network,
            initial: initial.as_deref(),
            initial_profile: initial_profile.as_deref(),
            n_x: *nx,
            dt: *dt,
            t_end: *t_end,
            epsilon: *epsilon,
            stride: *stride,
            window: match window.as_deref() {
                None => None,
                Some([a, b]) => Some((*a, *b)),
                Some(_) => {
                    eprintln!("error: --window needs exactly `start,end`");
                    std::process::exit(2);
                }
            },
            check_lower_bound: *check_lower_bound,
            seed: cli.seed,
        }),
    };
    if let Err(err) = outcome {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
