//! Thomas algorithm for the implicit diffusion step.

/// Solves the tridiagonal system `(I - mu L) x = rhs` in place, where `L` is
/// the Neumann Laplacian stencil with reflective end cells and
/// `mu = d dt / h^2`. The matrix is strictly diagonally dominant (the row
/// sums of off-diagonal magnitudes are `diag - 1`), so no pivoting is needed.
pub fn solve_neumann_diffusion(mu: f64, rhs: &mut [f64], scratch: &mut Vec<f64>) -> Result<(), ()> {
    let n = rhs.len();
    if n == 1 || mu == 0.0 {
        return Ok(()); // L is zero on a single cell
    }
    scratch.clear();
    scratch.resize(n, 0.0);
    let upper = -mu;
    let diag = |j: usize| -> f64 {
        if j == 0 || j == n - 1 {
            1.0 + mu
        } else {
            1.0 + 2.0 * mu
        }
    };
    // Forward sweep.
    let mut denom = diag(0);
    if denom.abs() < 1e-300 {
        return Err(());
    }
    scratch[0] = upper / denom;
    rhs[0] /= denom;
    for j in 1..n {
        denom = diag(j) - (-mu) * scratch[j - 1];
        if denom.abs() < 1e-300 {
            return Err(());
        }
        scratch[j] = upper / denom;
        rhs[j] = (rhs[j] - (-mu) * rhs[j - 1]) / denom;
    }
    // Back substitution.
    for j in (0..n - 1).rev() {
        rhs[j] -= scratch[j] * rhs[j + 1];
    }
    Ok(())
}

/// `(I - mu L) x` for the same stencil; used for solve-residual diagnostics.
pub fn apply_neumann_diffusion(mu: f64, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    if n == 1 {
        out[0] = x[0];
        return;
    }
    for j in 0..n {
        let left = if j == 0 { x[0] } else { x[j - 1] };
        let right = if j == n - 1 { x[n - 1] } else { x[j + 1] };
        out[j] = x[j] - mu * (left - 2.0 * x[j] + right);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_then_apply_is_identity() {
        let mu = 3.7;
        let original: Vec<f64> = (0..17).map(|j| 1.0 + (j as f64 * 0.3).sin()).collect();
        let mut rhs = original.clone();
        let mut scratch = Vec::new();
        solve_neumann_diffusion(mu, &mut rhs, &mut scratch).unwrap();
        let mut back = vec![0.0; rhs.len()];
        apply_neumann_diffusion(mu, &rhs, &mut back);
        for (a, b) in back.iter().zip(&original) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_sum_is_conserved() {
        // Neumann columns sum to one, so the implicit step conserves mass.
        let mu = 12.0;
        let mut rhs: Vec<f64> = (0..64).map(|j| (j as f64 * 0.8).cos().abs()).collect();
        let before: f64 = rhs.iter().sum();
        let mut scratch = Vec::new();
        solve_neumann_diffusion(mu, &mut rhs, &mut scratch).unwrap();
        let after: f64 = rhs.iter().sum();
        assert!((before - after).abs() < 1e-10 * before.abs());
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let mut rhs = vec![2.5; 33];
        let mut scratch = Vec::new();
        solve_neumann_diffusion(7.0, &mut rhs, &mut scratch).unwrap();
        for v in rhs {
            assert!((v - 2.5).abs() < 1e-13);
        }
    }

    #[test]
    fn single_cell_passthrough() {
        let mut rhs = vec![4.0];
        let mut scratch = Vec::new();
        solve_neumann_diffusion(5.0, &mut rhs, &mut scratch).unwrap();
        assert_eq!(rhs[0], 4.0);
    }
}
