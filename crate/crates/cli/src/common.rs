//! Shared CLI plumbing: errors with exit codes, manifests, file output.

use crn_entropy::equilibrium::EquilibriumError;
use crn_entropy::network::{conservation_structure, mass_vector, parse_network};
use crn_entropy::network::{ConservationStructure, MassVector, Network, NetworkError};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::time::SystemTime;

/// Exit codes: 1 parse/input, 2 validation/usage, 3 solver nonconvergence,
/// 4 boundary equilibria without --time-dependent, 5 blow-up.
pub enum CliError {
    Parse(String),
    Validation(String),
    Solver(String),
    BoundaryEquilibria(String),
    BlowUp(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::BoundaryEquilibria(_) => 4,
            CliError::BlowUp(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Parse(m)
            | CliError::Validation(m)
            | CliError::Solver(m)
            | CliError::BoundaryEquilibria(m)
            | CliError::BlowUp(m) => m,
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(err: NetworkError) -> Self {
        match err {
            NetworkError::Syntax { .. } => CliError::Parse(err.to_string()),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

impl From<EquilibriumError> for CliError {
    fn from(err: EquilibriumError) -> Self {
        match err {
            EquilibriumError::NonConvergence { .. }
            | EquilibriumError::NotComplexBalanced { .. } => CliError::Solver(err.to_string()),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

/// Caps rayon's global pool from CRN_ENTROPY_THREADS when set.
pub fn init_thread_pool() {
    if let Ok(value) = std::env::var("CRN_ENTROPY_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

pub struct LoadedNetwork {
    pub network: Network,
    pub conservation: ConservationStructure,
    pub hash: String,
}

pub fn load_network(path: &str) -> Result<LoadedNetwork, CliError> {
    let document = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read `{path}`: {e}")))?;
    let network = parse_network(&document)?;
    let conservation = conservation_structure(&network);
    let hash = content_hash(document.as_bytes());
    Ok(LoadedNetwork {
        network,
        conservation,
        hash,
    })
}

/// SHA-256 over the git-blob-style preimage `blob <len>\0<bytes>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    format!("sha256:{:x}", hasher.finalize())
}

/// Resolves the mass vector from --mass or --initial, requiring M > 0.
pub fn resolve_mass(
    loaded: &LoadedNetwork,
    mass: Option<&[f64]>,
    initial: Option<&[f64]>,
) -> Result<MassVector, CliError> {
    let cs = &loaded.conservation;
    let vector = match (mass, initial) {
        (Some(values), None) => {
            if values.len() != cs.codim() {
                return Err(CliError::Validation(format!(
                    "--mass needs {} values (one per conservation law), got {}",
                    cs.codim(),
                    values.len()
                )));
            }
            MassVector {
                values: values.to_vec(),
                q_ref: cs.q_ref(),
            }
        }
        (None, Some(averages)) => mass_vector(cs, averages).map_err(CliError::from)?,
        (None, None) => {
            return Err(CliError::Validation(
                "one of --mass or --initial is required".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    if let Some((i, v)) = vector.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(CliError::Validation(format!(
            "mass component {} is {v}; M must be componentwise positive",
            i + 1
        )));
    }
    Ok(vector)
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub network_document_hash: String,
    pub config: serde_json::Value,
    pub toolkit_version: String,
    pub started_at_unix_ms: u128,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

pub struct OutputWriter {
    dir: PathBuf,
    outputs: Vec<String>,
    started: std::time::Instant,
    started_at: SystemTime,
}

impl OutputWriter {
    pub fn new(out_dir: &str) -> Result<Self, CliError> {
        let dir = PathBuf::from(out_dir);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Parse(format!("cannot create out dir `{out_dir}`: {e}")))?;
        Ok(OutputWriter {
            dir,
            outputs: Vec::new(),
            started: std::time::Instant::now(),
            started_at: SystemTime::now(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Parse(format!("cannot write `{}`: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Parse(format!("serialization failure: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json` listing every artifact produced, including
    /// the manifest itself.
    pub fn finish(
        mut self,
        command: &str,
        hash: &str,
        config: serde_json::Value,
    ) -> Result<(), CliError> {
        let mut outputs = self.outputs.clone();
        outputs.push("manifest.json".to_string());
        let manifest = RunManifest {
            command: command.to_string(),
            network_document_hash: hash.to_string(),
            config,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at_unix_ms: self
                .started_at
                .duration_since(SystemTime::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            outputs,
        };
        self.write_json("manifest.json", &manifest)
    }
}
