//! Small dense helpers shared by the numerical modules.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::analysis::C64;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `max |(U U*)_{ij} − δ_{ij}|`.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let g = m * m.adjoint();
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn ensure_unitary(m: &CMatrix, tol: f64, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Structural(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let d = unitarity_defect(m);
    if d.is_finite() && d <= tol {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{what} is not unitary: max |UU* - I| = {d:e} exceeds {tol:e}"
        )))
    }
}

/// Haar-distributed element of U(n): QR of a complex Ginibre matrix with the R-diagonal phases removed.
pub fn random_haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Largest entrywise modulus of `a − b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn operator_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Eigenvalues of a small square matrix through the complex Schur form.
pub fn eigenvalues_small(m: &CMatrix) -> Result<Vec<C64>> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    m.clone()
        .try_schur(1e-15, 10_000)
        .map(|s| s.eigenvalues().map(|e| e.iter().copied().collect::<Vec<_>>()))
        .flatten()
        .or_else(|| {
            m.clone()
                .schur()
                .eigenvalues()
                .map(|e| e.iter().copied().collect())
        })
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))
}

pub fn to_faer(m: &CMatrix) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular values in decreasing order; faer handles the large pairing sections.
pub fn singular_values(m: &faer::Mat<C64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = m
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_samples_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let u = random_haar(n, &mut rng);
            assert!(unitarity_defect(&u) < 1e-13);
        }
    }

    #[test]
    fn eigenvalues_of_swap() {
        let swap = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let mut e: Vec<f64> = eigenvalues_small(&swap).unwrap().iter().map(|z| z.re).collect();
        e.sort_by(f64::total_cmp);
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_unitary_is_rejected() {
        let m = CMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(matches!(ensure_unitary(&m, 1e-10, "m"), Err(Error::Validation(_))));
        let r = CMatrix::zeros(2, 3);
        assert!(matches!(ensure_unitary(&r, 1e-10, "m"), Err(Error::Structural(_))));
    }
}
