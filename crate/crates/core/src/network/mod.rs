//! Mass-action reaction networks: species, complexes, reactions, diffusion.
//!
//! A network is the quadruple of species, stoichiometric complexes, reactions
//! with positive rate constants, and per-species diffusion coefficients. Three
//! structural conditions are enforced at construction:
//!
//! 1. every species occurs with coefficient >= 1 in at least one complex,
//! 2. no reaction maps a complex to itself,
//! 3. every complex is reactant or product of at least one reaction.

mod conservation;
mod parse;

#[cfg(test)]
pub(crate) mod testdocs {
    pub const ENZYME_DOC: &str = "\
# reversible enzyme reaction
species: S1, S2, S3, S4
diffusion: S1=1.0, S2=1.0, S3=1.0, S4=1.0
reaction: 1 S1 + 1 S2 -> 1 S3 @ 1.0
reaction: S3 -> S1 + S2 @ 1.0
reaction: S3 -> S1 + S4 @ 1.0
reaction: S1 + S4 -> S3 @ 1.0
";

    pub const CYCLIC_DOC: &str = "\
# cyclic network, alpha = 1
species: S1, S2, S3
diffusion: S1=1.0, S2=1.0, S3=1.0
reaction: S1 -> 1 S2 + 1 S3 @ 1.0
reaction: 1 S2 + 1 S3 -> 2 S2 @ 1.0
reaction: 2 S2 -> S1 @ 1.0
";

    pub const PAIR_DOC: &str = "\
species: S1, S2
diffusion: S1=1.0, S2=1.0
reaction: S1 -> S2 @ 1.0
reaction: S2 -> S1 @ 1.0
";
}

pub use conservation::{conservation_structure, mass_vector, ConservationStructure, MassVector};
pub use parse::parse_network;

use crate::ratmat::{rat_to_f64, rat_to_string, Rat};
use num::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("condition (1) violated: species `{species}` does not appear with coefficient >= 1 in any complex")]
    SpeciesNotCovered { species: String },
    #[error("condition (2) violated: trivial reaction `{complex}` -> `{complex}`")]
    TrivialReaction { complex: String },
    #[error("condition (3) violated: complex `{complex}` is neither reactant nor product of any reaction")]
    UnusedComplex { complex: String },
    #[error(
        "rate constant of reaction {index} is {value}; rate constants must be strictly positive"
    )]
    NonpositiveRate { index: usize, value: f64 },
    #[error("diffusion coefficient of species `{species}` is {value}; diffusion coefficients must be strictly positive")]
    NonpositiveDiffusion { species: String, value: f64 },
    #[error(
        "stoichiometric coefficient {value} for species `{species}` is not in {{0}} U [1, inf)"
    )]
    InvalidCoefficient { species: String, value: String },
    #[error("complex {index} has no species")]
    EmptyComplex { index: usize },
    #[error("negative concentration {value} for species index {index}")]
    NegativeConcentration { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A reaction `reactant -> product` between complex indices, at rate `rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reaction {
    pub reactant: usize,
    pub product: usize,
    pub rate: f64,
}

/// Validated reaction network. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    species: Vec<String>,
    complexes: Vec<Vec<Rat>>,
    complexes_f64: Vec<Vec<f64>>,
    reactions: Vec<Reaction>,
    diffusion: Vec<f64>,
}

impl Network {
    pub fn new(
        species: Vec<String>,
        complexes: Vec<Vec<Rat>>,
        reactions: Vec<Reaction>,
        diffusion: Vec<f64>,
    ) -> Result<Self, NetworkError> {
        let n = species.len();
        for (idx, y) in complexes.iter().enumerate() {
            if y.len() != n {
                return Err(NetworkError::DimensionMismatch {
                    expected: n,
                    got: y.len(),
                });
            }
            for (i, c) in y.iter().enumerate() {
                if c.is_negative() || (!c.is_zero() && c < &Rat::one()) {
                    return Err(NetworkError::InvalidCoefficient {
                        species: species[i].clone(),
                        value: rat_to_string(c),
                    });
                }
            }
            if y.iter().all(|c| c.is_zero()) {
                return Err(NetworkError::EmptyComplex { index: idx });
            }
        }
        if diffusion.len() != n {
            return Err(NetworkError::DimensionMismatch {
                expected: n,
                got: diffusion.len(),
            });
        }

        let complexes_f64: Vec<Vec<f64>> = complexes
            .iter()
            .map(|y| y.iter().map(rat_to_f64).collect())
            .collect();
        let net = Network {
            species,
            complexes,
            complexes_f64,
            reactions,
            diffusion,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<(), NetworkError> {
        // Condition (2) first: a trivial reaction is the most local defect.
        for r in &self.reactions {
            if r.reactant == r.product || self.complexes[r.reactant] == self.complexes[r.product] {
                return Err(NetworkError::TrivialReaction {
                    complex: self.complex_display(r.reactant),
                });
            }
        }
        // Condition (1): species coverage.
        for (i, name) in self.species.iter().enumerate() {
            let covered = self.complexes.iter().any(|y| y[i] >= Rat::one());
            if !covered {
                return Err(NetworkError::SpeciesNotCovered {
                    species: name.clone(),
                });
            }
        }
        // Condition (3): every complex used.
        for (ci, _) in self.complexes.iter().enumerate() {
            let used = self
                .reactions
                .iter()
                .any(|r| r.reactant == ci || r.product == ci);
            if !used {
                return Err(NetworkError::UnusedComplex {
                    complex: self.complex_display(ci),
                });
            }
        }
        for (idx, r) in self.reactions.iter().enumerate() {
            if !(r.rate > 0.0) {
                return Err(NetworkError::NonpositiveRate {
                    index: idx,
                    value: r.rate,
                });
            }
        }
        for (i, &d) in self.diffusion.iter().enumerate() {
            if !(d > 0.0) {
                return Err(NetworkError::NonpositiveDiffusion {
                    species: self.species[i].clone(),
                    value: d,
                });
            }
        }
        Ok(())
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn n_complexes(&self) -> usize {
        self.complexes.len()
    }

    pub fn complexes(&self) -> &[Vec<Rat>] {
        &self.complexes
    }

    pub fn complex_f64(&self, idx: usize) -> &[f64] {
        &self.complexes_f64[idx]
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    /// Human-readable form of a complex, e.g. `1 S1 + 2 S2`.
    pub fn complex_display(&self, idx: usize) -> String {
        let y = &self.complexes[idx];
        let mut parts = Vec::new();
        for (i, c) in y.iter().enumerate() {
            if !c.is_zero() {
                parts.push(format!("{} {}", rat_to_string(c), self.species[i]));
            }
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ")
        }
    }

    /// `c^y` with the convention `0^0 = 1`, so species absent from a complex
    /// do not zero the monomial.
    pub fn monomial(&self, complex: usize, c: &[f64]) -> f64 {
        let mut acc = 1.0;
        for (ci, yi) in c.iter().zip(&self.complexes_f64[complex]) {
            if *yi == 0.0 {
                continue;
            }
            acc *= if *yi == 1.0 {
                *ci
            } else if yi.fract() == 0.0 && *yi <= 63.0 {
                ci.powi(*yi as i32)
            } else {
                ci.powf(*yi)
            };
        }
        acc
    }

    /// Mass-action net rate vector `R(c) = sum_r k_r c^{y_r} (y_r' - y_r)`.
    pub fn reaction_rates(&self, c: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if c.len() != self.n_species() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.n_species(),
                got: c.len(),
            });
        }
        if let Some((i, &v)) = c.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(NetworkError::NegativeConcentration { index: i, value: v });
        }
        Ok(self.reaction_rates_unchecked(c))
    }

    /// Same as [`Network::reaction_rates`] without the nonnegativity check;
    /// used in solver inner loops where the state is maintained nonnegative.
    pub fn reaction_rates_unchecked(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_species()];
        for r in &self.reactions {
            let flux = r.rate * self.monomial(r.reactant, c);
            let yr = &self.complexes_f64[r.reactant];
            let yp = &self.complexes_f64[r.product];
            for i in 0..out.len() {
                out[i] += flux * (yp[i] - yr[i]);
            }
        }
        out
    }

    /// Jacobian dR/dc at a nonnegative state; `d(c^y)/dc_i = y_i c^{y - e_i}`.
    pub fn reaction_jacobian(&self, c: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n_species();
        let mut jac = vec![vec![0.0; n]; n];
        for r in &self.reactions {
            let yr = &self.complexes_f64[r.reactant];
            let yp = &self.complexes_f64[r.product];
            for j in 0..n {
                if yr[j] == 0.0 {
                    continue;
                }
                let dflux = r.rate * yr[j] * self.monomial_minus_one(r.reactant, c, j);
                for i in 0..n {
                    jac[i][j] += dflux * (yp[i] - yr[i]);
                }
            }
        }
        jac
    }

    /// `c^{y - e_j}` with the 0^0 convention, finite for c_j = 0 when y_j >= 1.
    fn monomial_minus_one(&self, complex: usize, c: &[f64], j: usize) -> f64 {
        let mut acc = 1.0;
        for (i, (ci, yi)) in c.iter().zip(&self.complexes_f64[complex]).enumerate() {
            let e = if i == j { yi - 1.0 } else { *yi };
            if e == 0.0 {
                continue;
            }
            acc *= if e == 1.0 {
                *ci
            } else if e.fract() == 0.0 && e > 0.0 && e <= 63.0 {
                ci.powi(e as i32)
            } else {
                ci.powf(e)
            };
        }
        acc
    }

    /// Canonical text form; `parse_network(serialize(net))` reproduces `net`.
    pub fn serialize(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "species: {}", self.species.join(", ")).unwrap();
        let diff: Vec<String> = self
            .species
            .iter()
            .zip(&self.diffusion)
            .map(|(s, d)| format!("{}={}", s, fmt_f64(*d)))
            .collect();
        writeln!(out, "diffusion: {}", diff.join(", ")).unwrap();
        for r in &self.reactions {
            writeln!(
                out,
                "reaction: {} -> {} @ {}",
                self.complex_display(r.reactant),
                self.complex_display(r.product),
                fmt_f64(r.rate)
            )
            .unwrap();
        }
        out
    }
}

/// Round-trippable float formatting for the text format.
fn fmt_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn ri(n: i64) -> Rat {
        Rat::from_integer(BigInt::from(n))
    }

    pub(crate) fn enzyme_network() -> Network {
        // S1+S2 <-> S3 <-> S1+S4, all rates 1.
        Network::new(
            vec!["S1".into(), "S2".into(), "S3".into(), "S4".into()],
            vec![
                vec![ri(1), ri(1), ri(0), ri(0)],
                vec![ri(0), ri(0), ri(1), ri(0)],
                vec![ri(1), ri(0), ri(0), ri(1)],
            ],
            vec![
                Reaction {
                    reactant: 0,
                    product: 1,
                    rate: 1.0,
                },
                Reaction {
                    reactant: 1,
                    product: 0,
                    rate: 1.0,
                },
                Reaction {
                    reactant: 1,
                    product: 2,
                    rate: 1.0,
                },
                Reaction {
                    reactant: 2,
                    product: 1,
                    rate: 1.0,
                },
            ],
            vec![1.0; 4],
        )
        .unwrap()
    }

    #[test]
    fn enzyme_rates_vanish_at_unit_state() {
        let net = enzyme_network();
        let r = net.reaction_rates(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        for v in r {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn cyclic_rates_vanish_at_unit_state() {
        use crate::network::parse_network;
        let net = parse_network(crate::network::testdocs::CYCLIC_DOC).unwrap();
        let r = net.reaction_rates(&[1.0, 1.0, 1.0]).unwrap();
        for v in r {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn condition_violations_are_reported() {
        let err = Network::new(
            vec!["S1".into(), "S2".into()],
            vec![vec![ri(1), ri(0)], vec![ri(0), ri(1)]],
            vec![Reaction {
                reactant: 0,
                product: 0,
                rate: 1.0,
            }],
            vec![1.0, 1.0],
        )
        .unwrap_err();
        assert!(err.to_string().contains("condition (2)"));

        let err = Network::new(
            vec!["S1".into(), "S2".into()],
            vec![vec![ri(1), ri(0)], vec![ri(1), ri(0)]],
            vec![Reaction {
                reactant: 0,
                product: 1,
                rate: 1.0,
            }],
            vec![1.0, 1.0],
        )
        .unwrap_err();
        assert!(err.to_string().contains("condition (2)"));
    }

    #[test]
    fn zero_to_zero_power_convention() {
        let net = enzyme_network();
        // Complex S3 = (0,0,1,0): monomial at c with c3=2 must be 2 even if others are 0.
        assert_eq!(net.monomial(1, &[0.0, 0.0, 2.0, 0.0]), 2.0);
    }

    #[test]
    fn negative_concentration_rejected() {
        let net = enzyme_network();
        assert!(net.reaction_rates(&[1.0, -0.5, 1.0, 1.0]).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let net = enzyme_network();
        let c = [1.3, 0.7, 2.1, 0.4];
        let jac = net.reaction_jacobian(&c);
        let h = 1e-6;
        for j in 0..4 {
            let mut cp = c;
            cp[j] += h;
            let rp = net.reaction_rates(&cp).unwrap();
            let r0 = net.reaction_rates(&c).unwrap();
            for i in 0..4 {
                let fd = (rp[i] - r0[i]) / h;
                assert!((jac[i][j] - fd).abs() < 1e-5, "entry ({i},{j})");
            }
        }
    }
}
