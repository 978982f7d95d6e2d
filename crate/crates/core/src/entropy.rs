//! Relative entropy, entropy dissipation and related kernels on 1-D fields.
//!
//! Fields live on a uniform grid of the unit interval (midpoint quadrature,
//! |Omega| = 1). Face gradients use reflective ghost cells, matching the
//! no-flux boundary condition of the flow; the face value of a concentration
//! in the Fisher-information quotient is its logarithmic mean across the
//! face, which makes the semi-discrete entropy balance of the solver exact
//! for the diffusion part.

use crate::network::{ConservationStructure, MassVector, Network};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("negative value {value} in field at species {species}, cell {cell}")]
    NegativeField {
        species: usize,
        cell: usize,
        value: f64,
    },
    #[error("reference component {index} is {value}; must be strictly positive")]
    NonpositiveReference { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(
        "mass constraint violated: |Q c_bar - M|_inf = {residual:.3e} exceeds tolerance {tol:.1e}"
    )]
    MassConstraint { residual: f64, tol: f64 },
}

/// Nonnegative concentrations of N species on a uniform 1-D grid over `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    values: Array2<f64>,
    h: f64,
}

impl SpatialField {
    /// `values[(i, j)]` is species `i` in cell `j`; cells have width `1/n_x`.
    pub fn new(values: Array2<f64>) -> Result<Self, EntropyError> {
        let n_x = values.ncols();
        assert!(n_x > 0, "empty grid");
        for ((i, j), v) in values.indexed_iter() {
            if *v < 0.0 {
                return Err(EntropyError::NegativeField {
                    species: i,
                    cell: j,
                    value: *v,
                });
            }
        }
        Ok(SpatialField {
            h: 1.0 / n_x as f64,
            values,
        })
    }

    pub fn constant(c: &[f64], n_x: usize) -> Result<Self, EntropyError> {
        let mut values = Array2::zeros((c.len(), n_x));
        for (i, &v) in c.iter().enumerate() {
            values.row_mut(i).fill(v);
        }
        SpatialField::new(values)
    }

    pub fn n_species(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cells(&self) -> usize {
        self.values.ncols()
    }

    pub fn cell_width(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Midpoint-rule averages, `c_bar_i = h * sum_j values[i][j]`.
    pub fn averages(&self) -> Vec<f64> {
        self.values
            .rows()
            .into_iter()
            .map(|row| row.sum() * self.h)
            .collect()
    }

    pub fn minima(&self) -> Vec<f64> {
        self.values
            .rows()
            .into_iter()
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }

    /// `sum_j h |c_i(x_j) - reference_i|` per species.
    pub fn l1_distances(&self, reference: &[f64]) -> Vec<f64> {
        self.values
            .rows()
            .into_iter()
            .zip(reference)
            .map(|(row, r)| row.iter().map(|v| (v - r).abs()).sum::<f64>() * self.h)
            .collect()
    }
}

/// `Psi(x, y) = x log(x/y) - x + y`, the Bregman kernel of `x log x`.
///
/// Conventions: `0 log 0 = 0` so `Psi(0, y) = y`, and `Psi(x, 0) = +inf` for
/// `x > 0`. Panics on negative arguments.
pub fn psi(x: f64, y: f64) -> f64 {
    assert!(x >= 0.0 && y >= 0.0, "psi needs nonnegative arguments");
    if x == 0.0 {
        return y;
    }
    if y == 0.0 {
        return f64::INFINITY;
    }
    x * (x / y).ln() - x + y
}

/// `Phi(z) = (z log z - z + 1) / (sqrt(z) - 1)^2`, extended by continuity to
/// `Phi(0) = 1`, `Phi(1) = 2`; monotone increasing on [0, inf).
///
/// Near z = 1 the quotient is 0/0; a three-term expansion around 1 is used
/// for |z - 1| < 1e-4.
pub fn phi(z: f64) -> f64 {
    assert!(z >= 0.0, "phi needs a nonnegative argument");
    if z == 0.0 {
        return 1.0;
    }
    let w = z - 1.0;
    if w.abs() < 1e-4 {
        return 2.0 + w / 3.0 - w * w / 8.0;
    }
    (z * z.ln() - z + 1.0) / (z.sqrt() - 1.0).powi(2)
}

/// `sum_i int Psi(c_i, ref_i) dx` by midpoint quadrature.
///
/// The reference must be strictly positive; use
/// [`relative_entropy_to_average`] for the spatial part `E(c | c_bar)`.
pub fn relative_entropy(field: &SpatialField, reference: &[f64]) -> Result<f64, EntropyError> {
    if reference.len() != field.n_species() {
        return Err(EntropyError::DimensionMismatch {
            expected: field.n_species(),
            got: reference.len(),
        });
    }
    if let Some((i, &v)) = reference.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(EntropyError::NonpositiveReference { index: i, value: v });
    }
    let mut total = 0.0;
    for (row, &r) in field.values.rows().into_iter().zip(reference) {
        for &v in row {
            total += psi(v, r);
        }
    }
    Ok(total * field.h)
}

/// Spatial part `E(c | c_bar)`; a species vanishing identically contributes 0.
pub fn relative_entropy_to_average(field: &SpatialField) -> f64 {
    let averages = field.averages();
    let mut total = 0.0;
    for (row, &avg) in field.values.rows().into_iter().zip(&averages) {
        if avg == 0.0 {
            continue; // row is identically zero
        }
        for &v in row {
            total += psi(v, avg);
        }
    }
    total * field.h
}

/// Entropy dissipation split into Fisher-information and reaction parts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DissipationSplit {
    pub diffusion: f64,
    pub reaction: f64,
    pub total: f64,
}

/// `D(c) = sum_i d_i int |grad c_i|^2 / c_i + sum_r k_r c_inf^{y_r}
/// int Psi(c^{y_r}/c_inf^{y_r}; c^{y_r'}/c_inf^{y_r'})`.
///
/// A zero cell makes individual terms +inf, which is reported as infinite
/// dissipation rather than an error.
pub fn entropy_dissipation(
    net: &Network,
    field: &SpatialField,
    c_inf: &[f64],
) -> Result<DissipationSplit, EntropyError> {
    if c_inf.len() != field.n_species() || net.n_species() != field.n_species() {
        return Err(EntropyError::DimensionMismatch {
            expected: net.n_species(),
            got: field.n_species(),
        });
    }
    if let Some((i, &v)) = c_inf.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(EntropyError::NonpositiveReference { index: i, value: v });
    }
    let h = field.h;
    let n_x = field.n_cells();

    // Fisher information: interior faces only; reflective ghosts make the
    // boundary face gradients vanish.
    let mut diffusion = 0.0;
    for (i, row) in field.values.rows().into_iter().enumerate() {
        let d = net.diffusion()[i];
        let mut acc = 0.0;
        for j in 0..n_x.saturating_sub(1) {
            let (a, b) = (row[j], row[j + 1]);
            let diff = b - a;
            if diff == 0.0 {
                continue;
            }
            let face = log_mean(a, b);
            if face == 0.0 {
                acc = f64::INFINITY;
                break;
            }
            acc += diff * diff / face;
        }
        diffusion += d * acc / h; // sum_faces h * (diff/h)^2 / face
    }

    let mut reaction = 0.0;
    let monomials_inf: Vec<f64> = (0..net.n_complexes())
        .map(|y| net.monomial(y, c_inf))
        .collect();
    let mut c_cell = vec![0.0; field.n_species()];
    for j in 0..n_x {
        for i in 0..field.n_species() {
            c_cell[i] = field.values[(i, j)];
        }
        for r in net.reactions() {
            let xr = net.monomial(r.reactant, &c_cell) / monomials_inf[r.reactant];
            let xp = net.monomial(r.product, &c_cell) / monomials_inf[r.product];
            reaction += r.rate * monomials_inf[r.reactant] * psi(xr, xp) * h;
        }
    }

    Ok(DissipationSplit {
        diffusion,
        reaction,
        total: diffusion + reaction,
    })
}

/// Logarithmic mean; equals the common value on the diagonal and 0 when
/// either argument is 0.
fn log_mean(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let d = b - a;
    if d.abs() <= 1e-8 * a.max(b) {
        0.5 * (a + b)
    } else {
        d / (b / a).ln()
    }
}

/// Entropy accounting for one field: total, additive split, dissipation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyReport {
    pub total: f64,
    pub spatial_part: f64,
    pub average_part: f64,
    pub dissipation: DissipationSplit,
}

pub fn entropy_report(
    net: &Network,
    field: &SpatialField,
    c_inf: &[f64],
) -> Result<EntropyReport, EntropyError> {
    let total = relative_entropy(field, c_inf)?;
    let spatial_part = relative_entropy_to_average(field);
    let avg_field = SpatialField::constant(&field.averages(), 1)?;
    let average_part = relative_entropy(&avg_field, c_inf)?;
    let dissipation = entropy_dissipation(net, field, c_inf)?;
    Ok(EntropyReport {
        total,
        spatial_part,
        average_part,
        dissipation,
    })
}

/// Csiszar-Kullback-Pinsker check for one field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CkpReport {
    /// min_i 1 / (2 (c_bar_i + 2 c_inf_i))
    pub constant: f64,
    pub entropy: f64,
    pub l1_norms: Vec<f64>,
    /// `entropy / sum_i ||c_i - c_inf_i||_1^2`; `None` at the equilibrium.
    pub empirical_ratio: Option<f64>,
    pub holds: bool,
}

/// Verifies `E(c|c_inf) >= C sum_i ||c_i - c_inf_i||_1^2` with the
/// per-species Csiszar-Kullback constant `1/(2(c_bar_i + 2 c_inf_i))`
/// aggregated by min over species. Requires `Q c_bar = M` up to `mass_tol`.
pub fn ckp_bound(
    cs: &ConservationStructure,
    field: &SpatialField,
    c_inf: &[f64],
    mass: &MassVector,
    mass_tol: f64,
) -> Result<CkpReport, EntropyError> {
    let averages = field.averages();
    let m_inf = mass.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let got = cs.q_matrix().mul_vec_f64(&averages);
    let residual = got
        .iter()
        .zip(&mass.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
        / (1.0 + m_inf);
    if residual > mass_tol {
        return Err(EntropyError::MassConstraint {
            residual,
            tol: mass_tol,
        });
    }

    let entropy = relative_entropy(field, c_inf)?;
    let l1_norms = field.l1_distances(c_inf);
    let constant = averages
        .iter()
        .zip(c_inf)
        .map(|(cb, ci)| 1.0 / (2.0 * (cb + 2.0 * ci)))
        .fold(f64::INFINITY, f64::min);
    let l1_sq_sum: f64 = l1_norms.iter().map(|v| v * v).sum();
    let empirical_ratio = if l1_sq_sum > 0.0 {
        Some(entropy / l1_sq_sum)
    } else {
        None
    };
    Ok(CkpReport {
        constant,
        entropy,
        l1_norms,
        empirical_ratio,
        holds: entropy + 1e-15 >= constant * l1_sq_sum,
    })
}

/// Writes a field as CSV rows `x, c_1, ..., c_N`.
pub fn field_to_csv(field: &SpatialField) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    write!(out, "x").unwrap();
    for i in 0..field.n_species() {
        write!(out, ",c_{}", i + 1).unwrap();
    }
    out.push('\n');
    for j in 0..field.n_cells() {
        write!(out, "{}", (j as f64 + 0.5) * field.h).unwrap();
        for i in 0..field.n_species() {
            write!(out, ",{}", field.values[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::SpatialField;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    /// Smooth strictly positive field from a short cosine series.
    pub fn random_positive_field(
        rng: &mut ChaCha8Rng,
        n_species: usize,
        n_x: usize,
    ) -> SpatialField {
        let mut values = ndarray::Array2::zeros((n_species, n_x));
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

    /// Shifts each species by a constant so the averages satisfy `Q a = M`;
    /// `None` if the shift drives some cell negative.
    pub fn project_to_mass(
        field: &SpatialField,
        q: &[Vec<f64>],
        mass: &[f64],
    ) -> Option<SpatialField> {
        let averages = field.averages();
        let m = q.len();
        let mut gram = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for a in 0..m {
            rhs[a] = mass[a] - crate::linalg::dot(&q[a], &averages);
            for b in 0..m {
                gram[a][b] = crate::linalg::dot(&q[a], &q[b]);
            }
        }
        let coeff = crate::linalg::solve(&gram, &rhs)?;
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
}
