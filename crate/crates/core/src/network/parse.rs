//! Line-oriented text format for network descriptions.
//!
//! ```text
//! # reversible enzyme reaction
//! species: S1, S2, S3, S4
//! diffusion: S1=1.0, S2=1.0, S3=1.0, S4=1.0
//! reaction: 1 S1 + 1 S2 -> 1 S3 @ 1.0
//! reaction: S3 -> S1 + S2 @ 1.0
//! ```
//!
//! Coefficients are optional (default 1) and parsed as exact decimals; `@`
//! introduces the rate constant; `#` starts a comment.

use super::{Network, NetworkError, Reaction};
use crate::ratmat::{rat_from_decimal, Rat};
use num::Zero;

pub fn parse_network(text: &str) -> Result<Network, NetworkError> {
    let mut species: Option<Vec<String>> = None;
    let mut diffusion: Option<Vec<f64>> = None;
    let mut complexes: Vec<Vec<Rat>> = Vec::new();
    let mut reactions: Vec<Reaction> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_number = lineno + 1;
        let line = match raw.find('#') {
            Some(idx) => &raw[..idx],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let (key, rest, rest_col) = split_directive(line, line_number)?;
        match key {
            "species" => {
                if species.is_some() {
                    return Err(syntax(line_number, 1, "duplicate `species:` line"));
                }
                let names = parse_species_list(rest, line_number, rest_col)?;
                species = Some(names);
            }
            "diffusion" => {
                let names = species
                    .as_ref()
                    .ok_or_else(|| syntax(line_number, 1, "`diffusion:` before `species:`"))?;
                if diffusion.is_some() {
                    return Err(syntax(line_number, 1, "duplicate `diffusion:` line"));
                }
                diffusion = Some(parse_diffusion(rest, names, line_number, rest_col)?);
            }
            "reaction" => {
                let names = species
                    .as_ref()
                    .ok_or_else(|| syntax(line_number, 1, "`reaction:` before `species:`"))?;
                let (lhs, rhs, rate) = parse_reaction(rest, names, line_number, rest_col)?;
                let reactant = intern_complex(&mut complexes, lhs);
                let product = intern_complex(&mut complexes, rhs);
                reactions.push(Reaction {
                    reactant,
                    product,
                    rate,
                });
            }
            other => {
                return Err(syntax(
                    line_number,
                    1,
                    &format!("unknown directive `{other}:`"),
                ));
            }
        }
    }

    let species = species.ok_or_else(|| syntax(0, 0, "missing `species:` line"))?;
    let diffusion = diffusion.ok_or_else(|| syntax(0, 0, "missing `diffusion:` line"))?;
    if reactions.is_empty() {
        return Err(syntax(0, 0, "no `reaction:` lines"));
    }
    Network::new(species, complexes, reactions, diffusion)
}

fn syntax(line: usize, col: usize, msg: &str) -> NetworkError {
    NetworkError::Syntax {
        line,
        col,
        msg: msg.to_string(),
    }
}

/// Splits `key: rest`, returning the 1-based column where `rest` starts.
fn split_directive(line: &str, lineno: usize) -> Result<(&str, &str, usize), NetworkError> {
    let colon = line
        .find(':')
        .ok_or_else(|| syntax(lineno, 1, "expected `key: value`"))?;
    let key = line[..colon].trim();
    Ok((key, &line[colon + 1..], colon + 2))
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_species_list(rest: &str, lineno: usize, col0: usize) -> Result<Vec<String>, NetworkError> {
    let mut names = Vec::new();
    for part in rest.split(',') {
        let name = part.trim();
        if !is_ident(name) {
            return Err(syntax(
                lineno,
                col0 + offset_of(rest, part),
                &format!("invalid species name `{name}`"),
            ));
        }
        if names.iter().any(|n| n == name) {
            return Err(syntax(
                lineno,
                col0 + offset_of(rest, part),
                &format!("duplicate species `{name}`"),
            ));
        }
        names.push(name.to_string());
    }
    Ok(names)
}

fn parse_diffusion(
    rest: &str,
    species: &[String],
    lineno: usize,
    col0: usize,
) -> Result<Vec<f64>, NetworkError> {
    let mut values: Vec<Option<f64>> = vec![None; species.len()];
    for part in rest.split(',') {
        let col = col0 + offset_of(rest, part);
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| syntax(lineno, col, "expected `name=value`"))?;
        let name = name.trim();
        let idx = species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| syntax(lineno, col, &format!("unknown species `{name}`")))?;
        if values[idx].is_some() {
            return Err(syntax(
                lineno,
                col,
                &format!("duplicate diffusion for `{name}`"),
            ));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| syntax(lineno, col, &format!("invalid number `{}`", value.trim())))?;
        values[idx] = Some(v);
    }
    for (i, v) in values.iter().enumerate() {
        if v.is_none() {
            return Err(syntax(
                lineno,
                col0,
                &format!("missing diffusion coefficient for `{}`", species[i]),
            ));
        }
    }
    Ok(values.into_iter().map(|v| v.unwrap()).collect())
}

type ReactionParts = (Vec<Rat>, Vec<Rat>, f64);

fn parse_reaction(
    rest: &str,
    species: &[String],
    lineno: usize,
    col0: usize,
) -> Result<ReactionParts, NetworkError> {
    let (sides, rate_text) = rest
        .split_once('@')
        .ok_or_else(|| syntax(lineno, col0, "missing `@ rate`"))?;
    let rate: f64 = rate_text.trim().parse().map_err(|_| {
        syntax(
            lineno,
            col0 + offset_of(rest, rate_text),
            &format!("invalid rate constant `{}`", rate_text.trim()),
        )
    })?;
    let (lhs, rhs) = sides
        .split_once("->")
        .ok_or_else(|| syntax(lineno, col0, "missing `->`"))?;
    let lhs_vec = parse_side(lhs, species, lineno, col0 + offset_of(rest, lhs))?;
    let rhs_vec = parse_side(rhs, species, lineno, col0 + offset_of(rest, rhs))?;
    Ok((lhs_vec, rhs_vec, rate))
}

fn parse_side(
    side: &str,
    species: &[String],
    lineno: usize,
    col0: usize,
) -> Result<Vec<Rat>, NetworkError> {
    let mut vec = vec![Rat::zero(); species.len()];
    if side.trim().is_empty() {
        return Err(syntax(lineno, col0, "empty reaction side"));
    }
    for term in side.split('+') {
        let col = col0 + offset_of(side, term);
        let tokens: Vec<&str> = term.split_whitespace().collect();
        let (coeff, name) = match tokens.as_slice() {
            [name] => (Rat::from_integer(1.into()), *name),
            [coeff, name] => {
                let c = rat_from_decimal(coeff).ok_or_else(|| {
                    syntax(lineno, col, &format!("invalid coefficient `{coeff}`"))
                })?;
                (c, *name)
            }
            _ => {
                return Err(syntax(
                    lineno,
                    col,
                    &format!("expected `[coeff] species`, got `{}`", term.trim()),
                ))
            }
        };
        let idx = species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| syntax(lineno, col, &format!("unknown species `{name}`")))?;
        vec[idx] += coeff;
    }
    Ok(vec)
}

/// Complexes are deduplicated by exact stoichiometric equality, in order of
/// first appearance.
fn intern_complex(complexes: &mut Vec<Vec<Rat>>, y: Vec<Rat>) -> usize {
    match complexes.iter().position(|c| c == &y) {
        Some(idx) => idx,
        None => {
            complexes.push(y);
            complexes.len() - 1
        }
    }
}

/// Byte offset of a sub-slice within its parent, as a 1-based column shift.
fn offset_of(parent: &str, sub: &str) -> usize {
    let p = parent.as_ptr() as usize;
    let s = sub.as_ptr() as usize;
    s.saturating_sub(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::testdocs::{CYCLIC_DOC, ENZYME_DOC};

    #[test]
    fn parses_enzyme_document() {
        let net = parse_network(ENZYME_DOC).unwrap();
        assert_eq!(net.n_species(), 4);
        assert_eq!(net.n_complexes(), 3);
        assert_eq!(net.reactions().len(), 4);
        assert_eq!(net.species(), ["S1", "S2", "S3", "S4"]);
    }

    #[test]
    fn parses_cyclic_document() {
        let net = parse_network(CYCLIC_DOC).unwrap();
        assert_eq!(net.n_species(), 3);
        assert_eq!(net.n_complexes(), 3);
        assert_eq!(net.reactions().len(), 3);
    }

    #[test]
    fn trivial_reaction_names_condition_2() {
        let doc = "\
species: S1, S2
diffusion: S1=1.0, S2=1.0
reaction: S1 -> S1 @ 1.0
";
        let err = parse_network(doc).unwrap_err();
        assert!(err.to_string().contains("condition (2)"), "{err}");
    }

    #[test]
    fn syntax_error_carries_position() {
        let doc = "species: S1, S2\ndiffusion: S1=1.0, S2=1.0\nreaction: S1 -> S2\n";
        match parse_network(doc).unwrap_err() {
            NetworkError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn nonpositive_rate_rejected() {
        let doc = "\
species: S1, S2
diffusion: S1=1.0, S2=1.0
reaction: S1 -> S2 @ 0.0
reaction: S2 -> S1 @ 1.0
";
        let err = parse_network(doc).unwrap_err();
        assert!(matches!(err, NetworkError::NonpositiveRate { .. }));
    }

    #[test]
    fn fractional_coefficient_below_one_rejected() {
        let doc = "\
species: S1, S2
diffusion: S1=1.0, S2=1.0
reaction: 0.5 S1 -> S2 @ 1.0
reaction: S2 -> S1 @ 1.0
";
        let err = parse_network(doc).unwrap_err();
        assert!(matches!(err, NetworkError::InvalidCoefficient { .. }));
    }

    #[test]
    fn serialize_round_trip() {
        for doc in [ENZYME_DOC, CYCLIC_DOC] {
            let net = parse_network(doc).unwrap();
            let text = net.serialize();
            let reparsed = parse_network(&text).unwrap();
            assert_eq!(net, reparsed);
        }
    }

    #[test]
    fn repeated_species_in_side_accumulates() {
        let doc = "\
species: S1, S2
diffusion: S1=1.0, S2=1.0
reaction: S1 + S1 -> S2 @ 1.0
reaction: S2 -> 2 S1 @ 1.0
";
        let net = parse_network(doc).unwrap();
        assert_eq!(net.n_complexes(), 2);
        assert_eq!(net.complex_f64(0), &[2.0, 0.0]);
    }
}
