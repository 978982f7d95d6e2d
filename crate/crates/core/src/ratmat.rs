//! Exact rational vectors and matrices.
//!
//! Conservation laws are kernel vectors of the Wegscheider matrix and must be
//! computed without rounding, so stoichiometric data is kept as arbitrary
//! precision rationals. The kernel basis returned by [`RatMat::kernel_basis`]
//! is canonical: the row space is brought to reduced echelon form and every
//! row is scaled to a primitive integer vector whose first nonzero entry is
//! positive, so a given matrix always produces the same basis.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

pub type Rat = BigRational;

/// Parses an unsigned decimal literal ("2", "1.5", "0.25") into an exact rational.
pub fn rat_from_decimal(text: &str) -> Option<Rat> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if !digits_ok(int_part) || !digits_ok(frac_part) {
        return None;
    }
    let mut num: BigInt = if int_part.is_empty() {
        BigInt::zero()
    } else {
        int_part.parse().ok()?
    };
    let mut den = BigInt::one();
    for c in frac_part.chars() {
        num = num * 10 + (c as u8 - b'0');
        den *= 10;
    }
    Some(Rat::new(num, den))
}

/// Renders a rational as `p` or `p/q` (canonical reduced form).
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses the output of [`rat_to_string`].
pub fn rat_from_string(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Rat::new(n, d))
            }
        }
        None => {
            let n: BigInt = s.parse().ok()?;
            Some(Rat::from_integer(n))
        }
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    // BigRational has no lossless to_f64 for huge values; entries here stay small.
    let n = r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let d = r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    n / d
}

/// Dense matrix of exact rationals, stored row major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatMat {
    rows: Vec<Vec<Rat>>,
    cols: usize,
}

impl RatMat {
    pub fn new(rows: Vec<Vec<Rat>>, cols: usize) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        RatMat { rows, cols }
    }

    pub fn zero(n_rows: usize, n_cols: usize) -> Self {
        RatMat {
            rows: vec![vec![Rat::zero(); n_cols]; n_rows],
            cols: n_cols,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[Vec<Rat>] {
        &self.rows
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rat {
        &self.rows[i][j]
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(rat_to_f64).collect())
            .collect()
    }

    /// Reduces `self` to reduced row echelon form in place and returns the rank.
    pub fn rref(&mut self) -> usize {
        let n_rows = self.rows.len();
        let n_cols = self.cols;
        let mut pivot_row = 0;
        for col in 0..n_cols {
            if pivot_row == n_rows {
                break;
            }
            let Some(src) = (pivot_row..n_rows).find(|&r| !self.rows[r][col].is_zero()) else {
                continue;
            };
            self.rows.swap(pivot_row, src);
            let inv = self.rows[pivot_row][col].clone();
            for x in &mut self.rows[pivot_row] {
                *x = &*x / &inv;
            }
            for r in 0..n_rows {
                if r != pivot_row && !self.rows[r][col].is_zero() {
                    let factor = self.rows[r][col].clone();
                    for c in 0..n_cols {
                        let sub = &factor * &self.rows[pivot_row][c];
                        self.rows[r][c] = &self.rows[r][c] - sub;
                    }
                }
            }
            pivot_row += 1;
        }
        pivot_row
    }

    pub fn rank(&self) -> usize {
        self.clone().rref()
    }

    /// Canonical basis of the right kernel `{x : A x = 0}`, returned as rows.
    ///
    /// The basis spans the kernel exactly; rows are in reduced echelon form,
    /// scaled to primitive integer vectors with positive leading entry.
    pub fn kernel_basis(&self) -> RatMat {
        let mut echelon = self.clone();
        let rank = echelon.rref();
        let n_cols = self.cols;

        // Pivot columns of the echelon form, in order.
        let mut pivot_cols = Vec::with_capacity(rank);
        for row in echelon.rows.iter().take(rank) {
            let col = row.iter().position(|x| !x.is_zero()).expect("rank row");
            pivot_cols.push(col);
        }
        let is_pivot = {
            let mut v = vec![false; n_cols];
            for &c in &pivot_cols {
                v[c] = true;
            }
            v
        };

        let mut basis = Vec::new();
        for free in (0..n_cols).filter(|&c| !is_pivot[c]) {
            let mut v = vec![Rat::zero(); n_cols];
            v[free] = Rat::one();
            for (i, &p) in pivot_cols.iter().enumerate() {
                v[p] = -echelon.rows[i][free].clone();
            }
            basis.push(v);
        }

        let mut kernel = RatMat::new(basis, n_cols);
        kernel.rref();
        kernel.normalize_rows();
        kernel
    }

    /// Scales every row to a primitive integer vector (content 1) whose first
    /// nonzero entry is positive.
    pub fn normalize_rows(&mut self) {
        for row in &mut self.rows {
            let mut lcm = BigInt::one();
            for x in row.iter() {
                lcm = num::integer::lcm(lcm, x.denom().clone());
            }
            let mut gcd = BigInt::zero();
            for x in row.iter() {
                let scaled = x.numer() * (&lcm / x.denom());
                gcd = num::integer::gcd(gcd, scaled);
            }
            if gcd.is_zero() {
                continue;
            }
            let first_sign_neg = row
                .iter()
                .find(|x| !x.is_zero())
                .map(|x| x.is_negative())
                .unwrap_or(false);
            let scale = if first_sign_neg {
                Rat::new(-lcm, gcd)
            } else {
                Rat::new(lcm, gcd)
            };
            for x in row.iter_mut() {
                *x = &*x * &scale;
            }
        }
    }

    /// `self * other^T`, used for the `Q W^T = 0` exactness check.
    pub fn mul_transpose(&self, other: &RatMat) -> RatMat {
        assert_eq!(self.cols, other.cols, "dimension mismatch");
        let mut out = RatMat::zero(self.n_rows(), other.n_rows());
        for (i, a) in self.rows.iter().enumerate() {
            for (j, b) in other.rows.iter().enumerate() {
                let mut acc = Rat::zero();
                for (x, y) in a.iter().zip(b) {
                    if !x.is_zero() && !y.is_zero() {
                        acc += x * y;
                    }
                }
                out.rows[i][j] = acc;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|x| x.is_zero()))
    }

    /// Matrix-vector product in f64.
    pub fn mul_vec_f64(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "dimension mismatch");
        self.rows
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| rat_to_f64(a) * b).sum())
            .collect()
    }

    /// Serializes as nested `p/q` strings.
    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(rat_to_string).collect())
            .collect()
    }

    pub fn from_strings(rows: &[Vec<String>]) -> Option<RatMat> {
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            if r.len() != cols {
                return None;
            }
            let mut row = Vec::with_capacity(cols);
            for s in r {
                row.push(rat_from_string(s)?);
            }
            out.push(row);
        }
        Some(RatMat::new(out, cols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    fn ri(n: i64) -> Rat {
        Rat::from_integer(BigInt::from(n))
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(rat_from_decimal("1.5").unwrap(), r(3, 2));
        assert_eq!(rat_from_decimal("2").unwrap(), ri(2));
        assert_eq!(rat_from_decimal("0.25").unwrap(), r(1, 4));
        assert_eq!(rat_from_decimal("0.1").unwrap(), r(1, 10));
        assert!(rat_from_decimal("").is_none());
        assert!(rat_from_decimal("1.5.2").is_none());
        assert!(rat_from_decimal("-1").is_none());
    }

    #[test]
    fn string_round_trip() {
        for v in [r(3, 2), ri(-7), r(-5, 3), Rat::zero()] {
            assert_eq!(rat_from_string(&rat_to_string(&v)).unwrap(), v);
        }
    }

    #[test]
    fn kernel_of_enzyme_wegscheider() {
        // Rows y_r' - y_r of the four enzyme reactions.
        let w = RatMat::new(
            vec![
                vec![ri(-1), ri(-1), ri(1), ri(0)],
                vec![ri(1), ri(1), ri(-1), ri(0)],
                vec![ri(1), ri(0), ri(-1), ri(1)],
                vec![ri(-1), ri(0), ri(1), ri(-1)],
            ],
            4,
        );
        let q = w.kernel_basis();
        assert_eq!(q.n_rows(), 2);
        assert_eq!(
            q.rows(),
            &[
                vec![ri(1), ri(0), ri(1), ri(0)],
                vec![ri(0), ri(1), ri(1), ri(1)],
            ]
        );
        assert!(q.mul_transpose(&w).is_zero());
    }

    #[test]
    fn kernel_primitive_scaling() {
        // Single conservation law 2x1 + x2 + x3 = 0 kernel side.
        let w = RatMat::new(
            vec![
                vec![ri(-1), ri(1), ri(1)],
                vec![ri(0), ri(1), ri(-1)],
                vec![ri(1), ri(-2), ri(0)],
            ],
            3,
        );
        let q = w.kernel_basis();
        assert_eq!(q.rows(), &[vec![ri(2), ri(1), ri(1)]]);
    }

    #[test]
    fn full_rank_matrix_has_empty_kernel() {
        let w = RatMat::new(vec![vec![ri(1), ri(0)], vec![ri(1), ri(1)]], 2);
        assert_eq!(w.kernel_basis().n_rows(), 0);
        assert_eq!(w.rank(), 2);
    }
}
