//! Spectra of the extensions. An eigenfunction is `a_k·e^{iλ(θ−t_{k−1})}` on piece `k`; the
//! boundary relation `L = B·R` turns this into `det(I − B·Diag(e^{iλℓ_k})) = 0`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::analysis::{ExponentialAtom, Partition, PiecewiseFunction, C64};
use crate::error::{Error, Result};
use crate::linalg::{c, eigenvalues_small, CMatrix};
use crate::vonneumann::{BoundaryMatrix, Extension};

/// Roots closer than this are reported as one eigenvalue with multiplicity.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Largest accepted `|det(I − B·E(λ))|` at a reported root.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Bisection stops once the bracket is this narrow.
pub const BISECTION_WIDTH: f64 = 1e-11;
/// Grid points per `4π` of spectral parameter in the counting scan.
pub const SCAN_POINTS_PER_4PI: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub value: f64,
    pub multiplicity: usize,
    /// `|det(I − B·E(λ))|` for analytic spectra, `|Im μ|` for finite-difference ones.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub window: (f64, f64),
    pub eigenvalues: Vec<Eigenvalue>,
}

impl Spectrum {
    /// Eigenvalues repeated according to multiplicity.
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .flat_map(|e| std::iter::repeat(e.value).take(e.multiplicity))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Spectrum reflected through the origin, for comparisons under `B ↦ B*`.
    pub fn reflected(&self) -> Spectrum {
        let mut eigenvalues: Vec<_> = self
            .eigenvalues
            .iter()
            .map(|e| Eigenvalue { value: -e.value, ..*e })
            .collect();
        eigenvalues.reverse();
        Spectrum { window: (-self.window.1, -self.window.0), eigenvalues }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub eigenvalue: f64,
    /// `a_k`, the value of the eigenfunction at the left end of piece `k`.
    pub coefficients: Vec<C64>,
    pub function: PiecewiseFunction,
}

fn check_inputs(b: &BoundaryMatrix, partition: &Partition, window: (f64, f64)) -> Result<()> {
    if b.size() != partition.pieces() {
        return Err(Error::Structural(format!(
            "boundary matrix is {}x{} but the partition has {} pieces",
            b.size(),
            b.size(),
            partition.pieces()
        )));
    }
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::Validation(format!("invalid window [{lo}, {hi}]")));
    }
    Ok(())
}

/// `I − B·Diag(e^{iλℓ_k})`.
pub fn characteristic_matrix(b: &BoundaryMatrix, lengths: &[f64], lambda: f64) -> CMatrix {
    let n = lengths.len();
    let e = DVector::from_iterator(n, lengths.iter().map(|&l| c(0.0, lambda * l).exp()));
    CMatrix::identity(n, n) - b.matrix() * CMatrix::from_diagonal(&e)
}

pub fn characteristic_residual(b: &BoundaryMatrix, lengths: &[f64], lambda: f64) -> f64 {
    characteristic_matrix(b, lengths, lambda).determinant().norm()
}

/// Roots of the characteristic equation in `window`.
///
/// Equal piece lengths use the closed form `λ = (2πm − φ_j)/ℓ` from the eigenphases
/// `e^{iφ_j}` of `B`; other partitions go through [`eigenphases_counting`].
pub fn eigenphases(b: &BoundaryMatrix, partition: &Partition, window: (f64, f64)) -> Result<Spectrum> {
    check_inputs(b, partition, window)?;
    if !partition.is_uniform(1e-14) {
        return eigenphases_counting(b, partition, window);
    }
    let ell = partition.length(0);
    let (lo, hi) = window;
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    let mut roots = Vec::new();
    for z in eigenvalues_small(b.matrix())? {
        let phi = z.arg();
        let m_lo = ((lo * ell + phi) / (2.0 * PI)).floor() as i64 - 1;
        let m_hi = ((hi * ell + phi) / (2.0 * PI)).ceil() as i64 + 1;
        for m in m_lo..=m_hi {
            let lambda = (2.0 * PI * m as f64 - phi) / ell;
            if lambda >= lo - slack && lambda <= hi + slack {
                roots.push((lambda, 1));
            }
        }
    }
    finish(b, &partition.lengths(), window, roots)
}

/// Root finding through the eigenvalue counting function
/// `N(λ) = (λ·Σℓ + arg det B − Σ_j p_j(λ)) / 2π`, where `p_j ∈ [0, 2π)` are the
/// eigenphases of `B·E(λ)`. `N` is a right-continuous step function that jumps by the
/// multiplicity at every eigenvalue, so a grid scan plus bisection isolates every root.
pub fn eigenphases_counting(b: &BoundaryMatrix, partition: &Partition, window: (f64, f64)) -> Result<Spectrum> {
    check_inputs(b, partition, window)?;
    let lengths = partition.lengths();
    let total: f64 = lengths.iter().sum();
    let arg_det = b.matrix().determinant().arg();
    let raw = |lambda: f64| -> Result<f64> {
        let e = DVector::from_iterator(lengths.len(), lengths.iter().map(|&l| c(0.0, lambda * l).exp()));
        let m = b.matrix() * CMatrix::from_diagonal(&e);
        let phases: f64 = eigenvalues_small(&m)?
            .iter()
            .map(|z| z.arg().rem_euclid(2.0 * PI))
            .sum();
        Ok((lambda * total + arg_det - phases) / (2.0 * PI))
    };

    let (lo, hi) = window;
    let start = lo - 1e-9;
    let step = 4.0 * PI / SCAN_POINTS_PER_4PI as f64;
    let steps = ((hi - start) / step).ceil().max(1.0) as usize;
    let mut roots = Vec::new();
    let mut a = start;
    let mut na = raw(a)?;
    for s in 1..=steps {
        let bnd = if s == steps { hi } else { start + s as f64 * step };
        let nb = raw(bnd)?;
        bisect(&raw, a, bnd, na, nb, &mut roots)?;
        a = bnd;
        na = nb;
    }
    finish(b, &lengths, window, roots)
}

fn bisect<F>(raw: &F, a: f64, b: f64, na: f64, nb: f64, out: &mut Vec<(f64, usize)>) -> Result<()>
where
    F: Fn(f64) -> Result<f64>,
{
    let count = (nb - na).round();
    if count < 0.0 {
        return Err(Error::Numerical(format!(
            "eigenvalue count decreased on ({a}, {b}]"
        )));
    }
    if count == 0.0 {
        return Ok(());
    }
    if b - a <= BISECTION_WIDTH {
        out.push((0.5 * (a + b), count as usize));
        return Ok(());
    }
    let mid = 0.5 * (a + b);
    let nm = raw(mid)?;
    bisect(raw, a, mid, na, nm, out)?;
    bisect(raw, mid, b, nm, nb, out)
}

/// Sorts, clusters and attaches residuals.
fn finish(b: &BoundaryMatrix, lengths: &[f64], window: (f64, f64), mut roots: Vec<(f64, usize)>) -> Result<Spectrum> {
    roots.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut clustered: Vec<(f64, usize, f64)> = Vec::new();
    for (v, m) in roots {
        match clustered.last_mut() {
            Some(last) if (v - last.2) <= CLUSTER_TOL => {
                last.0 = (last.0 * last.1 as f64 + v * m as f64) / (last.1 + m) as f64;
                last.1 += m;
                last.2 = v;
            }
            _ => clustered.push((v, m, v)),
        }
    }
    let eigenvalues = clustered
        .into_iter()
        .map(|(value, multiplicity, _)| {
            let residual = characteristic_residual(b, lengths, value);
            if residual > RESIDUAL_TOL {
                return Err(Error::Numerical(format!(
                    "characteristic residual {residual:e} at λ = {value}"
                )));
            }
            Ok(Eigenvalue { value, multiplicity, residual })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum { window, eigenvalues })
}

/// Normalized eigenfunctions for every eigenvalue in `window`, sorted by eigenvalue.
///
/// Within a degenerate eigenvalue the basis is made canonical by projecting the standard
/// basis vectors onto the null space in order.
pub fn eigenbasis(b: &BoundaryMatrix, partition: &Arc<Partition>, window: (f64, f64)) -> Result<Vec<EigenPair>> {
    let spectrum = eigenphases(b, partition, window)?;
    eigenbasis_for(b, partition, &spectrum)
}

/// As [`eigenbasis`] for an already computed spectrum.
pub fn eigenbasis_for(b: &BoundaryMatrix, partition: &Arc<Partition>, spectrum: &Spectrum) -> Result<Vec<EigenPair>> {
    let lengths = partition.lengths();
    let n = lengths.len();
    let w = DVector::from_iterator(n, lengths.iter().map(|&l| c(l, 0.0)));
    let winner = |x: &DVector<C64>, y: &DVector<C64>| -> C64 {
        x.iter().zip(y.iter()).zip(w.iter()).map(|((a, b), l)| a.conj() * b * l).sum()
    };
    let mut pairs = Vec::with_capacity(spectrum.count());
    for ev in &spectrum.eigenvalues {
        let lambda = ev.value;
        let k = characteristic_matrix(b, &lengths, lambda);
        let svd = k.clone().svd(false, true);
        let v_t = svd.v_t.as_ref().expect("requested V");
        let smax = svd.singular_values.max();
        let thr = crate::vonneumann::RANK_TOL * smax.max(1.0);
        let null: Vec<DVector<C64>> = (0..n)
            .filter(|&i| svd.singular_values[i] <= thr)
            .map(|i| v_t.row(i).adjoint())
            .collect();
        if null.len() != ev.multiplicity {
            return Err(Error::Numerical(format!(
                "λ = {lambda}: null space has dimension {} but multiplicity is {}",
                null.len(),
                ev.multiplicity
            )));
        }
        // Weighted-orthogonal projector onto the null space.
        let nm = DMatrix::from_columns(&null);
        let gram = DMatrix::from_fn(null.len(), null.len(), |i, j| winner(&null[i], &null[j]));
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Numerical(format!("λ = {lambda}: degenerate null basis")))?;
        let mut chosen: Vec<DVector<C64>> = Vec::new();
        for e in 0..n {
            if chosen.len() == null.len() {
                break;
            }
            let mut unit = DVector::zeros(n);
            unit[e] = c(1.0, 0.0);
            let coeffs = DVector::from_iterator(null.len(), null.iter().map(|v| winner(v, &unit)));
            let mut x = &nm * (&gram_inv * coeffs);
            for q in &chosen {
                let p = winner(q, &x);
                x -= q * p;
            }
            let norm = winner(&x, &x).re.sqrt();
            if norm < 1e-6 {
                continue;
            }
            x /= c(norm, 0.0);
            chosen.push(x);
        }
        for mut a in chosen {
            let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if let Some(first) = a.iter().find(|z| z.norm() > 1e-8 * scale).copied() {
                a *= first.conj() / first.norm();
            }
            let defect = (&k * &a).norm();
            if defect > RESIDUAL_TOL {
                return Err(Error::Numerical(format!(
                    "eigenvector residual {defect:e} at λ = {lambda}"
                )));
            }
            let atoms = (0..n)
                .filter(|&j| a[j].norm() > 0.0)
                .map(|j| {
                    let t = partition.endpoints()[j];
                    ExponentialAtom::new(j, a[j] * c(0.0, -lambda * t).exp(), c(0.0, lambda))
                })
                .collect();
            pairs.push(EigenPair {
                eigenvalue: lambda,
                coefficients: a.iter().copied().collect(),
                function: PiecewiseFunction::from_atoms(partition.clone(), atoms)?,
            });
        }
    }
    Ok(pairs)
}

/// Finite-difference spectrum of an extension; see [`fd_spectrum_for`].
pub fn fd_spectrum(ext: &Extension, n: usize, window: (f64, f64)) -> Result<Spectrum> {
    fd_spectrum_for(ext.boundary(), ext.partition(), n, window)
}

/// Eigenvalues of the upwind discretization `(1/i)(v_j − v_{j−1})/h = μ·v_j` with `n`
/// unknowns in total. The left value of each piece is eliminated through `L = B·R`.
///
/// The scheme is dissipative: resolved modes carry `Im μ ≈ −λ²h/2`, spurious ones
/// `Im μ ≈ −2/h`. Modes with `|Im μ| ≥ 1/h` are dropped, `Re μ` is reported and `|Im μ|`
/// is stored as the residual.
pub fn fd_spectrum_for(b: &BoundaryMatrix, partition: &Partition, n: usize, window: (f64, f64)) -> Result<Spectrum> {
    check_inputs(b, partition, window)?;
    let pieces = partition.pieces();
    if n < 64 || n < 2 * pieces {
        return Err(Error::Validation(format!("grid size {n} is too small")));
    }
    let cells = allocate_cells(partition, n);
    let offsets: Vec<usize> = cells
        .iter()
        .scan(0, |acc, &m| {
            let o = *acc;
            *acc += m;
            Some(o)
        })
        .collect();
    let h: Vec<f64> = (0..pieces).map(|k| partition.length(k) / cells[k] as f64).collect();
    let mut a = faer::Mat::<C64>::zeros(n, n);
    for k in 0..pieces {
        // 1/(i h) = −i/h
        let d = c(0.0, -1.0 / h[k]);
        for j in 0..cells[k] {
            let row = offsets[k] + j;
            a[(row, row)] += d;
            if j > 0 {
                a[(row, row - 1)] -= d;
            } else {
                for l in 0..pieces {
                    let last = offsets[l] + cells[l] - 1;
                    a[(row, last)] -= d * b.matrix()[(k, l)];
                }
            }
        }
    }
    let mu = a
        .eigenvalues()
        .map_err(|e| Error::Numerical(format!("finite-difference eigensolver failed: {e:?}")))?;
    let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
    let (lo, hi) = window;
    let mut eigenvalues: Vec<Eigenvalue> = mu
        .into_iter()
        .filter(|z| z.im.abs() < 1.0 / hmin && z.re >= lo && z.re <= hi)
        .map(|z| Eigenvalue { value: z.re, multiplicity: 1, residual: z.im.abs() })
        .collect();
    eigenvalues.sort_by(|x, y| x.value.total_cmp(&y.value));
    Ok(Spectrum { window, eigenvalues })
}

/// Cells per piece proportional to length, largest remainders first, at least two each.
fn allocate_cells(partition: &Partition, n: usize) -> Vec<usize> {
    let pieces = partition.pieces();
    let exact: Vec<f64> = (0..pieces).map(|k| partition.length(k) * n as f64).collect();
    let mut cells: Vec<usize> = exact.iter().map(|x| (x.floor() as usize).max(2)).collect();
    let mut order: Vec<usize> = (0..pieces).collect();
    order.sort_by(|&i, &j| (exact[j] - exact[j].floor()).total_cmp(&(exact[i] - exact[i].floor())));
    let mut total: usize = cells.iter().sum();
    let mut idx = 0;
    while total < n {
        cells[order[idx % pieces]] += 1;
        total += 1;
        idx += 1;
    }
    while total > n {
        let k = (0..pieces).max_by_key(|&k| cells[k]).unwrap();
        cells[k] -= 1;
        total -= 1;
    }
    cells
}

/// Largest distance from an analytic eigenvalue to its matching finite-difference ones.
///
/// Each analytic eigenvalue of multiplicity `m` is matched with the `m` nearest
/// finite-difference values; an analytic eigenvalue with too few candidates counts as infinite error.
pub fn max_fd_error(analytic: &Spectrum, fd: &Spectrum) -> f64 {
    let fdv: Vec<f64> = fd.eigenvalues.iter().map(|e| e.value).collect();
    let mut worst = 0.0f64;
    for ev in &analytic.eigenvalues {
        let mut d: Vec<f64> = fdv.iter().map(|x| (x - ev.value).abs()).collect();
        d.sort_by(f64::total_cmp);
        if d.len() < ev.multiplicity {
            return f64::INFINITY;
        }
        worst = worst.max(d[ev.multiplicity - 1]);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::inner_product;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two() -> Arc<Partition> {
        Arc::new(Partition::two_piece())
    }

    #[test]
    fn swap_spectrum_is_2pi_z() {
        let s = eigenphases(&BoundaryMatrix::swap(), &two(), (-10.0, 10.0)).unwrap();
        let v = s.values();
        let expect: Vec<f64> = (-1..=1).map(|k| 2.0 * PI * k as f64).collect();
        assert_eq!(v.len(), expect.len());
        for (a, b) in v.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(eigenphases(&BoundaryMatrix::swap(), &two(), (2.0, 4.0)).unwrap().is_empty());
    }

    #[test]
    fn identity_spectrum_is_doubled_4pi_z() {
        let s = eigenphases(&BoundaryMatrix::identity(2), &two(), (-13.0, 13.0)).unwrap();
        let got: Vec<(f64, usize)> = s.eigenvalues.iter().map(|e| (e.value, e.multiplicity)).collect();
        assert_eq!(got.len(), 3);
        for ((v, m), k) in got.iter().zip(-1..=1) {
            assert!((v - 4.0 * PI * k as f64).abs() < 1e-12);
            assert_eq!(*m, 2);
        }
    }

    #[test]
    fn counting_agrees_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let b = BoundaryMatrix::random(2, &mut rng);
            let w = (-20.0, 25.0);
            let closed = eigenphases(&b, &two(), w).unwrap();
            let counted = eigenphases_counting(&b, &two(), w).unwrap();
            assert_eq!(closed.count(), counted.count());
            for (x, y) in closed.values().iter().zip(counted.values()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        for b in [BoundaryMatrix::swap(), BoundaryMatrix::identity(2)] {
            let closed = eigenphases(&b, &two(), (-30.0, 30.0)).unwrap();
            let counted = eigenphases_counting(&b, &two(), (-30.0, 30.0)).unwrap();
            assert_eq!(closed.eigenvalues.len(), counted.eigenvalues.len());
            for (x, y) in closed.eigenvalues.iter().zip(&counted.eigenvalues) {
                assert_eq!(x.multiplicity, y.multiplicity);
                assert!((x.value - y.value).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn uneven_partition_roots_have_small_residual() {
        let p = Partition::new(vec![0.0, 0.3, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = BoundaryMatrix::random(2, &mut rng);
        let s = eigenphases(&b, &p, (-40.0, 40.0)).unwrap();
        // Weyl count: about Σℓ·|window|/2π eigenvalues.
        assert!((s.count() as f64 - 80.0 / (2.0 * PI)).abs() <= 2.0);
        assert!(s.eigenvalues.iter().all(|e| e.residual < 1e-9));
    }

    #[test]
    fn eigenbasis_examples() {
        let p = two();
        let basis = eigenbasis(&BoundaryMatrix::swap(), &p, (-0.5, 7.0)).unwrap();
        assert_eq!(basis.len(), 2);
        let zero = &basis[0];
        for t in [0.1, 0.4, 0.6, 0.9] {
            assert!((zero.function.eval(t).unwrap() - c(1.0, 0.0)).norm() < 1e-12);
            let expect = c(0.0, 2.0 * PI * t).exp();
            assert!((basis[1].function.eval(t).unwrap() - expect).norm() < 1e-12);
        }

        let id = eigenbasis(&BoundaryMatrix::identity(2), &p, (-0.5, 0.5)).unwrap();
        assert_eq!(id.len(), 2);
        assert!((id[0].coefficients[0] - c(2f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!(id[0].coefficients[1].norm() < 1e-12);
        assert!((id[1].coefficients[1] - c(2f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eigenfunctions_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = Arc::new(Partition::new(vec![0.0, 0.25, 0.6, 1.0]).unwrap());
        let b = BoundaryMatrix::random(3, &mut rng);
        let basis = eigenbasis(&b, &p, (-15.0, 15.0)).unwrap();
        for i in 0..basis.len() {
            for j in 0..=i {
                let g = inner_product(&basis[i].function, &basis[j].function).unwrap();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g - target).norm() < 1e-9, "{i} {j} {g}");
            }
        }
    }

    #[test]
    fn adjoint_reflects_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = Partition::new(vec![0.0, 0.4, 1.0]).unwrap();
        for _ in 0..3 {
            let b = BoundaryMatrix::random(2, &mut rng);
            let s = eigenphases(&b, &p, (-20.0, 20.0)).unwrap();
            let r = eigenphases(&b.adjoint(), &p, (-20.0, 20.0)).unwrap().reflected();
            assert_eq!(s.count(), r.count());
            for (x, y) in s.values().iter().zip(r.values()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fd_identity_cluster_and_convergence() {
        let p = Partition::two_piece();
        let id = BoundaryMatrix::identity(2);
        let fd = fd_spectrum_for(&id, &p, 256, (-1.0, 1.0)).unwrap();
        assert_eq!(fd.eigenvalues.len(), 2);
        let analytic = eigenphases(&BoundaryMatrix::swap(), &p, (-15.0, 15.0)).unwrap();
        let e128 = max_fd_error(&analytic, &fd_spectrum_for(&BoundaryMatrix::swap(), &p, 128, (-16.0, 16.0)).unwrap());
        let e256 = max_fd_error(&analytic, &fd_spectrum_for(&BoundaryMatrix::swap(), &p, 256, (-16.0, 16.0)).unwrap());
        assert!(e256 <= e128);
        assert!(e256 < 2.0 * PI * 0.02);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = Partition::two_piece();
        assert!(matches!(
            eigenphases(&BoundaryMatrix::identity(3), &p, (0.0, 1.0)),
            Err(Error::Structural(_))
        ));
        assert!(matches!(
            eigenphases(&BoundaryMatrix::swap(), &p, (1.0, 0.0)),
            Err(Error::Validation(_))
        ));
        assert!(fd_spectrum_for(&BoundaryMatrix::swap(), &p, 32, (0.0, 1.0)).is_err());
    }
}
