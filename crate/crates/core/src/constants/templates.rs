//! Structural recognition of the two built-in network templates.
//!
//! Recognition is by stoichiometric shape, never by species names: the
//! enzyme template is `A + B <-> C <-> A + D` (closed-form FDI constant),
//! the cyclic template is `A -> alpha B + C -> (alpha+1) B -> A` with
//! `alpha >= 1` (boundary equilibrium, time-dependent FDI coefficient).

use crate::network::Network;
use num::{One, Zero};
use serde::{Deserialize, Serialize};

/// Species roles of a recognized enzyme network, as indices into the
/// network's species order: `[common, first partner, intermediate,
/// second partner]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnzymeTemplate {
    pub roles: [usize; 4],
}

impl EnzymeTemplate {
    /// Reorders a species-indexed vector into template role order.
    pub fn to_role_order(&self, values: &[f64]) -> [f64; 4] {
        [
            values[self.roles[0]],
            values[self.roles[1]],
            values[self.roles[2]],
            values[self.roles[3]],
        ]
    }
}

/// Species roles and parameters of a recognized cyclic network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclicTemplate {
    /// `[source, cycled, carrier]`: the single species A, the species B
    /// appearing as alpha B + C and (alpha+1) B, and the species C.
    pub roles: [usize; 3],
    pub alpha: f64,
    /// Rates `[k1, k2, k3]` of A -> alpha B + C, alpha B + C -> (alpha+1) B,
    /// (alpha+1) B -> A.
    pub rates: [f64; 3],
}

impl CyclicTemplate {
    pub fn to_role_order(&self, values: &[f64]) -> [f64; 3] {
        [
            values[self.roles[0]],
            values[self.roles[1]],
            values[self.roles[2]],
        ]
    }
}

/// Complex as a set of (species, coefficient-1.0?) pairs helper.
fn unit_pair(net: &Network, complex: usize) -> Option<Vec<usize>> {
    let y = &net.complexes()[complex];
    let mut members = Vec::new();
    for (i, c) in y.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        if !c.is_one() {
            return None;
        }
        members.push(i);
    }
    Some(members)
}

/// Recognizes `A + B <-> C <-> A + D` with all four directed reactions
/// present exactly once and arbitrary positive rates.
pub fn detect_enzyme(net: &Network) -> Option<EnzymeTemplate> {
    if net.n_species() != 4 || net.n_complexes() != 3 || net.reactions().len() != 4 {
        return None;
    }
    // Classify complexes: one singleton, two distinct unit pairs.
    let mut singleton = None;
    let mut pairs = Vec::new();
    for idx in 0..3 {
        let members = unit_pair(net, idx)?;
        match members.len() {
            1 => {
                if singleton.replace((idx, members[0])).is_some() {
                    return None;
                }
            }
            2 => pairs.push((idx, members)),
            _ => return None,
        }
    }
    let (mid_complex, mid_species) = singleton?;
    if pairs.len() != 2 {
        return None;
    }
    let (outer_a, members_a) = (pairs[0].0, &pairs[0].1);
    let (outer_b, members_b) = (pairs[1].0, &pairs[1].1);
    let common: Vec<usize> = members_a
        .iter()
        .copied()
        .filter(|i| members_b.contains(i))
        .collect();
    if common.len() != 1 {
        return None;
    }
    let common = common[0];
    if common == mid_species {
        return None;
    }
    let partner_a = *members_a.iter().find(|&&i| i != common)?;
    let partner_b = *members_b.iter().find(|&&i| i != common)?;
    if partner_a == mid_species || partner_b == mid_species {
        return None;
    }

    // Exactly the four directed edges outer_a <-> mid <-> outer_b.
    let mut need = [
        (outer_a, mid_complex),
        (mid_complex, outer_a),
        (mid_complex, outer_b),
        (outer_b, mid_complex),
    ];
    need.sort_unstable();
    let mut have: Vec<(usize, usize)> = net
        .reactions()
        .iter()
        .map(|r| (r.reactant, r.product))
        .collect();
    have.sort_unstable();
    if have != need {
        return None;
    }

    Some(EnzymeTemplate {
        roles: [common, partner_a, mid_species, partner_b],
    })
}

/// Recognizes `A -> alpha B + C -> (alpha+1) B -> A`, returning roles,
/// `alpha` and the cycle rates.
pub fn detect_cyclic(net: &Network) -> Option<CyclicTemplate> {
    if net.n_species() != 3 || net.n_complexes() != 3 || net.reactions().len() != 3 {
        return None;
    }
    // Find the two single-species complexes: A (coefficient 1) and
    // (alpha+1) B (coefficient >= 2).
    let mut source = None; // (complex, species)
    let mut sink = None; // (complex, species, alpha+1)
    let mut middle = None; // (complex, members)
    for idx in 0..3 {
        let y = &net.complexes()[idx];
        let nonzero: Vec<usize> = (0..3).filter(|&i| !y[i].is_zero()).collect();
        match nonzero.len() {
            1 => {
                let i = nonzero[0];
                if y[i].is_one() {
                    if source.replace((idx, i)).is_some() {
                        return None;
                    }
                } else {
                    let coeff = crate::ratmat::rat_to_f64(&y[i]);
                    if coeff < 2.0 {
                        return None;
                    }
                    if sink.replace((idx, i, coeff)).is_some() {
                        return None;
                    }
                }
            }
            2 => {
                if middle.replace((idx, nonzero)).is_some() {
                    return None;
                }
            }
            _ => return None,
        }
    }
    let (complex_a, species_a) = source?;
    let (complex_ab, species_b, alpha_plus_one) = sink?;
    let (complex_m, members) = middle?;
    let alpha = alpha_plus_one - 1.0;
    if alpha < 1.0 {
        return None;
    }
    if !members.contains(&species_b) || members.contains(&species_a) {
        return None;
    }
    let species_c = *members.iter().find(|&&i| i != species_b)?;
    // Middle complex must be alpha B + 1 C.
    let y_m = &net.complexes()[complex_m];
    if crate::ratmat::rat_to_f64(&y_m[species_b]) != alpha || !y_m[species_c].is_one() {
        return None;
    }

    // The cycle A -> middle -> sink -> A, each edge once.
    let find_rate = |from: usize, to: usize| -> Option<f64> {
        let mut rates = net
            .reactions()
            .iter()
            .filter(|r| r.reactant == from && r.product == to)
            .map(|r| r.rate);
        let rate = rates.next()?;
        if rates.next().is_some() {
            return None;
        }
        Some(rate)
    };
    let k1 = find_rate(complex_a, complex_m)?;
    let k2 = find_rate(complex_m, complex_ab)?;
    let k3 = find_rate(complex_ab, complex_a)?;

    Some(CyclicTemplate {
        roles: [species_a, species_b, species_c],
        alpha,
        rates: [k1, k2, k3],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;
    use crate::network::testdocs::{CYCLIC_DOC, ENZYME_DOC, PAIR_DOC};

    #[test]
    fn detects_enzyme_shape() {
        let net = parse_network(ENZYME_DOC).unwrap();
        let t = detect_enzyme(&net).unwrap();
        assert_eq!(t.roles, [0, 1, 2, 3]);
        assert!(detect_cyclic(&net).is_none());
    }

    #[test]
    fn detects_enzyme_under_relabeling() {
        // Same shape with scrambled species declaration order and names.
        let doc = "\
species: E, P, X, S
diffusion: E=1.0, P=2.0, X=3.0, S=4.0
reaction: X + S -> E @ 2.0
reaction: E -> X + S @ 0.5
reaction: E -> X + P @ 1.5
reaction: X + P -> E @ 3.0
";
        let net = parse_network(doc).unwrap();
        let t = detect_enzyme(&net).unwrap();
        // Common species is X (index 2), intermediate is E (index 0).
        assert_eq!(t.roles[0], 2);
        assert_eq!(t.roles[2], 0);
        let reordered = t.to_role_order(&[10.0, 20.0, 30.0, 40.0]);
        assert_eq!(reordered[0], 30.0);
        assert_eq!(reordered[2], 10.0);
    }

    #[test]
    fn detects_cyclic_shape() {
        let net = parse_network(CYCLIC_DOC).unwrap();
        let t = detect_cyclic(&net).unwrap();
        assert_eq!(t.roles, [0, 1, 2]);
        assert_eq!(t.alpha, 1.0);
        assert_eq!(t.rates, [1.0, 1.0, 1.0]);
        assert!(detect_enzyme(&net).is_none());
    }

    #[test]
    fn detects_cyclic_alpha_two_relabeled() {
        let doc = "\
species: C, B, A
diffusion: C=1.0, B=1.0, A=1.0
reaction: A -> 2 B + C @ 0.7
reaction: 2 B + C -> 3 B @ 1.3
reaction: 3 B -> A @ 2.1
";
        let net = parse_network(doc).unwrap();
        let t = detect_cyclic(&net).unwrap();
        assert_eq!(t.alpha, 2.0);
        assert_eq!(t.roles, [2, 1, 0]);
        assert_eq!(t.rates, [0.7, 1.3, 2.1]);
    }

    #[test]
    fn rejects_other_networks() {
        let net = parse_network(PAIR_DOC).unwrap();
        assert!(detect_enzyme(&net).is_none());
        assert!(detect_cyclic(&net).is_none());
    }

    #[test]
    fn rejects_enzyme_with_missing_reverse() {
        let doc = "\
species: S1, S2, S3, S4
diffusion: S1=1.0, S2=1.0, S3=1.0, S4=1.0
reaction: S1 + S2 -> S3 @ 1.0
reaction: S3 -> S1 + S2 @ 1.0
reaction: S3 -> S1 + S4 @ 1.0
reaction: S3 -> S1 + S4 @ 1.0
";
        let net = parse_network(doc).unwrap();
        assert!(detect_enzyme(&net).is_none());
    }
}
