//! Shared fixtures and sampling helpers for integration tests.
#![allow(dead_code)] // each test binary uses a subset

use crn_entropy::entropy::SpatialField;
use crn_entropy::linalg;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ENZYME_DOC: &str = "\
species: S1, S2, S3, S4
diffusion: S1=1.0, S2=1.0, S3=1.0, S4=1.0
reaction: 1 S1 + 1 S2 -> 1 S3 @ 1.0
reaction: S3 -> S1 + S2 @ 1.0
reaction: S3 -> S1 + S4 @ 1.0
reaction: S1 + S4 -> S3 @ 1.0
";

pub const CYCLIC_DOC: &str = "\
species: S1, S2, S3
diffusion: S1=1.0, S2=1.0, S3=1.0
reaction: S1 -> 1 S2 + 1 S3 @ 1.0
reaction: 1 S2 + 1 S3 -> 2 S2 @ 1.0
reaction: 2 S2 -> S1 @ 1.0
";

/// Smooth strictly positive field from a short cosine series.
pub fn random_positive_field(rng: &mut ChaCha8Rng, n_species: usize, n_x: usize) -> SpatialField {
    let mut values = Array2::zeros((n_species, n_x));
    for i in 0..n_species {
        let base: f64 = rng.gen_range(0.2..3.0);
        let modes: Vec<(f64, f64)> = (1..6)
            .map(|k| (rng.gen_range(-0.5..0.5) / k as f64, k as f64))
            .collect();
        for j in 0..n_x {
            let x = (j as f64 + 0.5) / n_x as f64;
            let mut g = 0.0;
            for (a, k) in &modes {
                g += a * (std::f64::consts::PI * k * x).cos();
            }
            values[(i, j)] = base * g.exp();
        }
    }
    SpatialField::new(values).unwrap()
}

/// Shifts each species by a constant so averages satisfy `Q a = M`; `None`
/// when the shift drives a cell negative.
pub fn project_to_mass(field: &SpatialField, q: &[Vec<f64>], mass: &[f64]) -> Option<SpatialField> {
    let averages = field.averages();
    let m = q.len();
    let mut gram = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for a in 0..m {
        rhs[a] = mass[a] - linalg::dot(&q[a], &averages);
        for b in 0..m {
            gram[a][b] = linalg::dot(&q[a], &q[b]);
        }
    }
    let coeff = linalg::solve(&gram, &rhs)?;
    let n = field.n_species();
    let shift: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|a| coeff[a] * q[a][i]).sum())
        .collect();
    let mut values = field.values().clone();
    for ((i, _), v) in values.indexed_iter_mut() {
        *v += shift[i];
    }
    if values.iter().any(|v| *v < 0.0) {
        return None;
    }
    SpatialField::new(values).ok()
}
