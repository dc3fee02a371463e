//! Correlation-matrix repair and factorization.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default eigenvalue floor used by the sampler.
pub const PD_EPS: f64 = 1e-6;

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn check_correlation_shape(corr: &DMatrix<f64>) -> Result<()> {
    if !corr.is_square() || corr.nrows() == 0 {
        return Err(Error::InvalidProfile(format!(
            "correlation matrix must be square and non-empty, got {}x{}",
            corr.nrows(),
            corr.ncols()
        )));
    }
    let k = corr.nrows();
    for i in 0..k {
        if (corr[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProfile(format!(
                "diagonal entry {i} is {}, expected 1",
                corr[(i, i)]
            )));
        }
        for j in 0..i {
            let (a, b) = (corr[(i, j)], corr[(j, i)]);
            if !a.is_finite() || (a - b).abs() > 1e-12 {
                return Err(Error::InvalidProfile(format!(
                    "correlation matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Nearest positive-definite correlation matrix by eigenvalue clipping.
///
/// Eigenvalues below `eps` are raised to `eps`, the result is rescaled to a
/// unit diagonal, and, if rescaling pushed the smallest eigenvalue back under
/// `eps`, the matrix is shrunk toward the identity just far enough. Inputs
/// whose smallest eigenvalue is already at least `eps` come back unchanged.
pub fn nearest_pd(corr: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::NotRepairable(format!(
            "eps {eps} must lie in (0, 1)"
        )));
    }
    check_correlation_shape(corr)?;
    let k = corr.nrows();

    let eig = SymmetricEigen::new(corr.clone());
    if eig.eigenvalues.iter().all(|&l| l >= eps) {
        return Ok(corr.clone());
    }
    let clipped = eig.eigenvalues.map(|l| l.max(eps));
    let mut m = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize(&mut m);

    let scale: Vec<f64> = (0..k).map(|i| m[(i, i)].sqrt().recip()).collect();
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] *= scale[i] * scale[j];
        }
        m[(i, i)] = 1.0;
    }
    symmetrize(&mut m);

    // Shrinking toward I moves every eigenvalue linearly toward 1 and keeps
    // the diagonal at 1. Target a little above eps to absorb rounding.
    let target = 2.0 * eps;
    for _ in 0..8 {
        let lmin = min_eigenvalue(&m);
        if lmin >= eps {
            return Ok(m);
        }
        let alpha = ((target - lmin) / (1.0 - lmin)).clamp(0.0, 1.0);
        m *= 1.0 - alpha;
        for i in 0..k {
            m[(i, i)] = 1.0;
        }
    }
    if min_eigenvalue(&m) >= eps {
        Ok(m)
    } else {
        Err(Error::NotRepairable(format!(
            "smallest eigenvalue stayed below {eps}"
        )))
    }
}

/// Lower-triangular Cholesky factor.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Cholesky::new(m.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::NotRepairable("matrix is not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_a_fixed_point() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(nearest_pd(&id, PD_EPS).unwrap(), id);
    }

    #[test]
    fn strong_but_valid_correlation_is_untouched() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.999, 0.999, 1.0]);
        assert_eq!(nearest_pd(&m, PD_EPS).unwrap(), m);
    }

    #[test]
    fn inconsistent_triple_is_repaired() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0]);
        assert!(min_eigenvalue(&m) < 0.0);
        let fixed = nearest_pd(&m, PD_EPS).unwrap();
        assert!(min_eigenvalue(&fixed) >= PD_EPS);
        for i in 0..3 {
            assert_eq!(fixed[(i, i)], 1.0);
        }
        assert!(cholesky_lower(&fixed).is_ok());
        // The repair keeps the sign pattern of the input.
        assert!(fixed[(0, 1)] > 0.0 && fixed[(1, 2)] < 0.0);
    }

    #[test]
    fn rejects_malformed_input() {
        let non_unit = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(nearest_pd(&non_unit, PD_EPS).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert!(nearest_pd(&asym, PD_EPS).is_err());
        assert!(nearest_pd(&DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky_lower(&m), Err(Error::NotRepairable(_))));
    }
}
