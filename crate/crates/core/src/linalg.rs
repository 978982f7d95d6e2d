//! Small dense f64 helpers: LU solves, null spaces, and a Jacobi eigensolver.
//!
//! Problem sizes here are tiny (species counts), so plain O(n^3) routines are
//! the right tool; no external linear algebra backend is involved.

/// Solves `a x = b` by LU with partial pivoting. Returns `None` when the
/// matrix is numerically singular.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|r| r.len() == n), "shape");
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x: Vec<f64> = b.to_vec();
    for col in 0..n {
        let (pivot, pval) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|u, v| u.1.total_cmp(&v.1))?;
        if pval <= f64::MIN_POSITIVE * 16.0 {
            return None;
        }
        m.swap(col, pivot);
        x.swap(col, pivot);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= m[col][col];
        for r in 0..col {
            x[r] -= m[r][col] * x[col];
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Orthonormal basis of `{x : a x = 0}` via row echelon + free variables +
/// modified Gram-Schmidt. `tol` is relative to the largest entry of `a`.
pub fn null_space(a: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    if a.is_empty() {
        return Vec::new();
    }
    let n_cols = a[0].len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let n_rows = m.len();
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..n_cols {
        if row == n_rows {
            break;
        }
        let (best, best_val) = (row..n_rows)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|u, v| u.1.total_cmp(&v.1))
            .unwrap();
        if best_val <= tol * scale {
            continue;
        }
        m.swap(row, best);
        let inv = 1.0 / m[row][col];
        for c in 0..n_cols {
            m[row][c] *= inv;
        }
        for r in 0..n_rows {
            if r != row && m[r][col] != 0.0 {
                let f = m[r][col];
                for c in 0..n_cols {
                    m[r][c] -= f * m[row][c];
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; n_cols];
        for &c in &pivot_cols {
            v[c] = true;
        }
        v
    };
    let mut basis = Vec::new();
    for free in (0..n_cols).filter(|&c| !is_pivot[c]) {
        let mut v = vec![0.0; n_cols];
        v[free] = 1.0;
        for (i, &p) in pivot_cols.iter().enumerate() {
            v[p] = -m[i][free];
        }
        basis.push(v);
    }
    orthonormalize(&mut basis);
    basis
}

/// Modified Gram-Schmidt in place; drops vectors that collapse numerically.
pub fn orthonormalize(vecs: &mut Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vecs.len());
    for v in vecs.iter() {
        let mut w = v.clone();
        for u in &out {
            let d = dot(&w, u);
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= d * ui;
            }
        }
        let n = norm(&w);
        if n > 1e-12 {
            for wi in &mut w {
                *wi /= n;
            }
            out.push(w);
        }
    }
    *vecs = out;
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&m)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|r| r.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}
