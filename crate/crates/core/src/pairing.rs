//! Index pairing of unitary loops with the extensions: the Fredholm index of the
//! compression of `M_u` to the nonnegative spectral subspace of `T_B`, computed on
//! finite spectral sections with plateau detection over a schedule of cutoffs.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{exp_integral, inner_product, ExponentialAtom, Partition, PiecewiseFunction, C64};
use crate::error::{Error, Result};
use crate::linalg::{c, singular_values, CMatrix};
use crate::spectral::{eigenbasis, EigenPair};
use crate::vonneumann::BoundaryMatrix;

/// Grid used by [`winding`].
pub const WINDING_GRID: usize = 4096;
/// Smallest admissible `|u(θ)|` on the winding grid.
pub const INVERTIBILITY_MARGIN: f64 = 0.1;
/// Wedge components must agree at the base point to this tolerance.
pub const BASEPOINT_TOL: f64 = 1e-12;

/// `u(θ) = Σ c_m e^{2πimθ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    terms: Vec<(i64, C64)>,
}

impl FourierSeries {
    pub fn new(mut terms: Vec<(i64, C64)>) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(i64, C64)> = Vec::with_capacity(terms.len());
        for (m, z) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == m => last.1 += z,
                _ => merged.push((m, z)),
            }
        }
        merged.retain(|t| t.1 != c(0.0, 0.0));
        Self { terms: merged }
    }

    /// `z ↦ z^n`, i.e. `e^{2πinθ}`.
    pub fn monomial(n: i64) -> Self {
        Self::new(vec![(n, c(1.0, 0.0))])
    }

    pub fn constant(z: C64) -> Self {
        Self::new(vec![(0, z)])
    }

    pub fn terms(&self) -> &[(i64, C64)] {
        &self.terms
    }

    /// `max |m|`.
    pub fn bandwidth(&self) -> i64 {
        self.terms.iter().map(|t| t.0.abs()).max().unwrap_or(0)
    }

    pub fn eval(&self, theta: f64) -> C64 {
        self.terms
            .iter()
            .map(|&(m, z)| z * c(0.0, 2.0 * PI * m as f64 * theta).exp())
            .sum()
    }

    pub fn multiply(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(m, a) in &self.terms {
            for &(k, b) in &other.terms {
                terms.push((m + k, a * b));
            }
        }
        Self::new(terms)
    }

    /// The loop as a single segment on `[0, 1]`.
    pub fn to_segmented(&self) -> SegmentedLoop {
        SegmentedLoop {
            segments: vec![LoopSegment {
                start: 0.0,
                end: 1.0,
                terms: self
                    .terms
                    .iter()
                    .map(|&(m, z)| (z, 2.0 * PI * m as f64))
                    .collect(),
            }],
        }
    }
}

/// `θ ↦ Σ c·e^{iωθ}` on `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSegment {
    pub start: f64,
    pub end: f64,
    pub terms: Vec<(C64, f64)>,
}

impl LoopSegment {
    pub fn eval(&self, theta: f64) -> C64 {
        self.terms.iter().map(|&(z, w)| z * c(0.0, w * theta).exp()).sum()
    }

    pub fn derivative(&self, theta: f64) -> C64 {
        self.terms
            .iter()
            .map(|&(z, w)| z * c(0.0, w) * c(0.0, w * theta).exp())
            .sum()
    }
}

/// A function on `[0, 1]` that is a trigonometric sum on each of finitely many segments.
/// Pullbacks of wedge loops along the pinch map are of this form.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedLoop {
    segments: Vec<LoopSegment>,
}

impl SegmentedLoop {
    pub fn new(segments: Vec<LoopSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Validation("a segmented loop needs at least one segment".into()));
        }
        let mut t = 0.0;
        for s in &segments {
            if s.start != t || s.end <= s.start {
                return Err(Error::Validation(format!(
                    "segments must tile [0,1] in order; found [{}, {}] after {t}",
                    s.start, s.end
                )));
            }
            t = s.end;
        }
        if t != 1.0 {
            return Err(Error::Validation("segments must end at 1".into()));
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[LoopSegment] {
        &self.segments
    }

    fn segment_at(&self, theta: f64) -> &LoopSegment {
        self.segments
            .iter()
            .find(|s| theta < s.end)
            .unwrap_or_else(|| self.segments.last().unwrap())
    }

    /// Value; segment boundaries are read from the segment on their right.
    pub fn eval(&self, theta: f64) -> C64 {
        self.segment_at(theta).eval(theta)
    }

    /// One-sided derivative from the segment containing `theta`.
    pub fn derivative(&self, theta: f64) -> C64 {
        self.segment_at(theta).derivative(theta)
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| LoopSegment {
                    start: s.start,
                    end: s.end,
                    terms: s.terms.iter().map(|&(z, w)| (z.conj(), -w)).collect(),
                })
                .collect(),
        }
    }

    /// `max |ω|` over all terms.
    pub fn max_frequency(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.terms.iter().map(|t| t.1.abs()))
            .fold(0.0, f64::max)
    }

    /// `sup |u′|`, sampled on `per_segment` points of every segment.
    pub fn sup_derivative(&self, per_segment: usize) -> f64 {
        let mut worst = 0.0f64;
        for s in &self.segments {
            for j in 0..=per_segment {
                let t = s.start + (s.end - s.start) * j as f64 / per_segment as f64;
                worst = worst.max(s.derivative(t).norm());
            }
        }
        worst
    }

    /// `u·f`; every piece of `f` must lie inside a single segment.
    pub fn multiply(&self, f: &PiecewiseFunction) -> Result<PiecewiseFunction> {
        let p = f.partition();
        let mut atoms = Vec::new();
        for a in f.atoms() {
            let (lo, hi) = p.bounds(a.piece);
            let seg = self
                .segments
                .iter()
                .find(|s| s.start <= lo && hi <= s.end)
                .ok_or_else(|| {
                    Error::Structural(format!(
                        "piece [{lo}, {hi}] straddles a segment boundary of the loop"
                    ))
                })?;
            for &(z, w) in &seg.terms {
                atoms.push(ExponentialAtom::new(a.piece, a.coefficient * z, a.exponent + c(0.0, w)));
            }
        }
        Ok(PiecewiseFunction::from_atoms(p.clone(), atoms)?.simplified())
    }
}

/// A loop on the circle, a pair of loops on `S¹ ∨ S¹`, or an already pulled back loop.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitaryLoop {
    Circle(FourierSeries),
    Wedge(FourierSeries, FourierSeries),
    Segmented(SegmentedLoop),
}

impl UnitaryLoop {
    pub fn monomial(n: i64) -> Self {
        UnitaryLoop::Circle(FourierSeries::monomial(n))
    }

    /// `(z^{n₁}, z^{n₂})` on the wedge.
    pub fn wedge_monomials(n1: i64, n2: i64) -> Self {
        UnitaryLoop::Wedge(FourierSeries::monomial(n1), FourierSeries::monomial(n2))
    }

    /// The loop as a function on `[0, 1]`; wedge pairs have to be pulled back first.
    pub fn as_segmented(&self) -> Result<SegmentedLoop> {
        match self {
            UnitaryLoop::Circle(f) => Ok(f.to_segmented()),
            UnitaryLoop::Segmented(s) => Ok(s.clone()),
            UnitaryLoop::Wedge(..) => Err(Error::Validation(
                "wedge loops must be pulled back along the pinch map before pairing".into(),
            )),
        }
    }
}

/// `(1/2π)·Σ Δarg u` over a 4096-point grid of each circle.
pub fn winding(lp: &UnitaryLoop) -> Result<i64> {
    let top = match lp {
        UnitaryLoop::Circle(f) => 2.0 * PI * f.bandwidth() as f64,
        UnitaryLoop::Wedge(f, g) => 2.0 * PI * f.bandwidth().max(g.bandwidth()) as f64,
        UnitaryLoop::Segmented(s) => s.max_frequency(),
    };
    // A single term could alias into a small step, so refuse loops the grid cannot resolve.
    if top / WINDING_GRID as f64 >= PI {
        return Err(Error::IllConditionedLoop(format!(
            "frequency {top:.1} is not resolved by a {WINDING_GRID}-point grid"
        )));
    }
    match lp {
        UnitaryLoop::Circle(f) => winding_of(|t| f.eval(t)),
        UnitaryLoop::Wedge(f, g) => Ok(winding_of(|t| f.eval(t))? + winding_of(|t| g.eval(t))?),
        UnitaryLoop::Segmented(s) => winding_of(|t| s.eval(t)),
    }
}

fn winding_of<F: Fn(f64) -> C64>(u: F) -> Result<i64> {
    let mut prev = u(0.0);
    let mut total = 0.0;
    for j in 1..=WINDING_GRID {
        let z = u(j as f64 / WINDING_GRID as f64);
        if z.norm() <= INVERTIBILITY_MARGIN || prev.norm() <= INVERTIBILITY_MARGIN {
            return Err(Error::IllConditionedLoop(format!(
                "|u| drops to {:.3e}, below the margin {INVERTIBILITY_MARGIN}",
                z.norm().min(prev.norm())
            )));
        }
        let step = (z / prev).arg();
        if step.abs() >= PI * (1.0 - 1e-12) {
            return Err(Error::IllConditionedLoop(format!(
                "argument step {step:.3} on the grid is not resolved; increase the grid or lower the bandwidth"
            )));
        }
        total += step;
        prev = z;
    }
    let w = total / (2.0 * PI);
    let r = w.round();
    if (w - r).abs() >= 0.01 {
        return Err(Error::IllConditionedLoop(format!("winding {w} is not close to an integer")));
    }
    Ok(r as i64)
}

/// `u∘p` for the pinch `p: [0,1] → S¹∨S¹`, `θ ↦ (2θ)₁` on `[0,½]` and `(2θ−1)₂` on `[½,1]`.
///
/// The result is kept exactly as two trigonometric segments; a global Fourier
/// re-expansion would converge only slowly because `u∘p` is kinked at the seams.
pub fn pullback_loop(lp: &UnitaryLoop) -> Result<UnitaryLoop> {
    let UnitaryLoop::Wedge(f, g) = lp else {
        return Err(Error::Validation("pullback along the pinch needs a wedge loop".into()));
    };
    let gap = (f.eval(0.0) - g.eval(0.0)).norm();
    if gap > BASEPOINT_TOL {
        return Err(Error::Validation(format!(
            "wedge components differ by {gap:e} at the base point"
        )));
    }
    // u₁(2θ) = Σ c_m e^{4πimθ};  u₂(2θ−1) = Σ d_m e^{4πimθ}e^{−2πim} = Σ d_m e^{4πimθ}.
    let seg = |s: &FourierSeries, start, end| LoopSegment {
        start,
        end,
        terms: s.terms().iter().map(|&(m, z)| (z, 4.0 * PI * m as f64)).collect(),
    };
    Ok(UnitaryLoop::Segmented(SegmentedLoop::new(vec![seg(f, 0.0, 0.5), seg(g, 0.5, 1.0)])?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingOptions {
    /// Increasing spectral cutoffs `Λ`.
    pub cutoffs: Vec<f64>,
    /// A singular value counts as zero when it is below `kernel_threshold·min|u|`.
    pub kernel_threshold: f64,
    /// Extra rows beyond `Λ`; `None` picks `max(16π, ω_max + 8π)`.
    pub margin: Option<f64>,
    /// Number of trailing cutoffs that must agree.
    pub plateau: usize,
    /// Trailing cutoffs must also separate null from regular singular values by this ratio.
    pub min_separation: f64,
}

impl Default for PairingOptions {
    fn default() -> Self {
        Self {
            cutoffs: vec![32.0 * PI, 64.0 * PI, 128.0 * PI, 256.0 * PI],
            kernel_threshold: 0.5,
            margin: None,
            plateau: 3,
            min_separation: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauEntry {
    pub cutoff: f64,
    pub kernel: usize,
    pub cokernel: usize,
    pub index: i64,
    /// Largest relative singular value counted as zero (0 if none), over both compressions.
    pub largest_null: f64,
    /// Smallest relative singular value counted as nonzero (1 if none), over both compressions.
    pub smallest_regular: f64,
    /// Index recounted with the threshold moved to `τ/2` and `(1+τ)/2`.
    pub index_band: (i64, i64),
}

impl PlateauEntry {
    /// `smallest_regular / largest_null`; infinite when nothing was counted as null.
    pub fn separation(&self) -> f64 {
        if self.largest_null == 0.0 {
            f64::INFINITY
        } else {
            self.smallest_regular / self.largest_null
        }
    }

    /// Whether the index survives moving the threshold across the band around it.
    pub fn threshold_robust(&self) -> bool {
        self.index_band == (self.index, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingResult {
    pub index: i64,
    pub plateau: Vec<PlateauEntry>,
    pub stable: bool,
    /// Whether `M_u` maps `dom(T_B)` into itself (`u` takes matching values where `B` couples traces).
    pub compatible: bool,
}

/// `⟨[u], [T_B]⟩` as the index of `P·M_u·P` on `P = 1_{[0,∞)}(T_B)`.
///
/// For each cutoff `Λ` the compression is sampled on eigenfunctions with `0 ≤ λ ≤ Λ` and
/// tested against those with `0 ≤ λ ≤ Λ + margin`; the cokernel comes from the same
/// section for `ū`. Zero modes belong to the positive subspace.
///
/// When `u` does not preserve `dom(T_B)` (see [`PairingResult::compatible`]) the compression
/// has a piecewise continuous symbol. Its null singular values then decay only like a small
/// power of the cutoff, and the regular ones sink slowly toward a floor that vanishes as `B`
/// approaches a diagonal matrix. The kernel threshold is therefore relative to `min|u|` and
/// coarse. A plateau only counts as stable when null and regular values stay well separated,
/// or when the index does not move as the threshold sweeps the band around it: isolated
/// nonzero singular values show up in both `u` and `ū` and cancel.
pub fn pair(lp: &UnitaryLoop, b: &BoundaryMatrix, partition: &Arc<Partition>, opts: &PairingOptions) -> Result<PairingResult> {
    if opts.cutoffs.is_empty() || opts.cutoffs.windows(2).any(|w| w[1] <= w[0]) || opts.cutoffs[0] <= 0.0 {
        return Err(Error::Validation("cutoffs must be positive and strictly increasing".into()));
    }
    if !(opts.kernel_threshold > 0.0 && opts.kernel_threshold < 1.0) {
        return Err(Error::Validation("kernel threshold must lie in (0, 1)".into()));
    }
    let u = lp.as_segmented()?;
    winding(&UnitaryLoop::Segmented(u.clone()))?;
    let margin = opts.margin.unwrap_or_else(|| (16.0 * PI).max(u.max_frequency() + 8.0 * PI));
    let lmax = *opts.cutoffs.last().unwrap();
    let basis = eigenbasis(b, partition, (0.0, lmax + margin))?;
    let mu = section(&basis, &u)?;
    let mubar = section(&basis, &u.conj())?;
    // Essential singular values of the compression fill [min|u|, max|u|].
    let scale = min_modulus(&u);

    let mut plateau = Vec::with_capacity(opts.cutoffs.len());
    for &cutoff in &opts.cutoffs {
        let cols = basis.iter().take_while(|p| p.eigenvalue <= cutoff).count();
        let rows = basis.iter().take_while(|p| p.eigenvalue <= cutoff + margin).count();
        let sa = relative_singular_values(&mu, rows, cols, scale)?;
        let sb = relative_singular_values(&mubar, rows, cols, scale)?;
        let tau = opts.kernel_threshold;
        let index_at = |t: f64| kernel_dim(&sa, cols, t).0 as i64 - kernel_dim(&sb, cols, t).0 as i64;
        let (kernel, null_a, reg_a) = kernel_dim(&sa, cols, tau);
        let (cokernel, null_b, reg_b) = kernel_dim(&sb, cols, tau);
        plateau.push(PlateauEntry {
            cutoff,
            kernel,
            cokernel,
            index: kernel as i64 - cokernel as i64,
            largest_null: null_a.max(null_b),
            smallest_regular: reg_a.min(reg_b),
            index_band: (index_at(0.5 * tau), index_at(0.5 * (1.0 + tau))),
        });
    }
    let k = opts.plateau.max(1).min(plateau.len());
    let tail = &plateau[plateau.len() - k..];
    let stable = plateau.len() >= opts.plateau
        && tail
            .iter()
            .all(|e| e.index == tail[0].index && (e.separation() >= opts.min_separation || e.threshold_robust()));
    Ok(PairingResult {
        index: plateau.last().unwrap().index,
        plateau,
        stable,
        compatible: preserves_domain(&u, b, partition),
    })
}

/// `⟨ψ_i, u·ψ_j⟩` for all pairs of basis functions.
fn section(basis: &[EigenPair], u: &SegmentedLoop) -> Result<faer::Mat<C64>> {
    let n = basis.len();
    let mut out = faer::Mat::<C64>::zeros(n, n);
    let Some(first) = basis.first() else {
        return Ok(out);
    };
    let partition = first.function.partition().clone();
    // Integration cells: intersections of pieces with loop segments.
    let mut cells = Vec::new();
    for k in 0..partition.pieces() {
        let (a, b) = partition.bounds(k);
        for s in u.segments() {
            let lo = a.max(s.start);
            let hi = b.min(s.end);
            if hi > lo {
                cells.push((k, lo, hi, s));
            }
        }
    }
    // Atom coefficient of ψ on a piece: a_k·e^{−iλt_{k−1}}.
    let coeff = |p: &EigenPair, k: usize| -> C64 {
        p.function
            .atoms()
            .iter()
            .find(|a| a.piece == k)
            .map(|a| a.coefficient)
            .unwrap_or(c(0.0, 0.0))
    };
    let coeffs: Vec<Vec<C64>> = basis
        .iter()
        .map(|p| (0..partition.pieces()).map(|k| coeff(p, k)).collect())
        .collect();
    for i in 0..n {
        for j in 0..n {
            let mut acc = c(0.0, 0.0);
            let dl = basis[j].eigenvalue - basis[i].eigenvalue;
            for &(k, lo, hi, seg) in &cells {
                let w = coeffs[i][k].conj() * coeffs[j][k];
                if w == c(0.0, 0.0) {
                    continue;
                }
                for &(z, omega) in &seg.terms {
                    acc += w * z * exp_integral(c(0.0, dl + omega), lo, hi);
                }
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// `min |u|` on a grid of [`WINDING_GRID`] points per segment.
pub fn min_modulus(u: &SegmentedLoop) -> f64 {
    u.segments()
        .iter()
        .flat_map(|s| {
            (0..=WINDING_GRID).map(move |i| {
                let t = s.start + (s.end - s.start) * i as f64 / WINDING_GRID as f64;
                s.eval(t).norm()
            })
        })
        .fold(f64::INFINITY, f64::min)
}

/// Singular values of the leading `rows × cols` block, divided by `scale`.
fn relative_singular_values(m: &faer::Mat<C64>, rows: usize, cols: usize, scale: f64) -> Result<Vec<f64>> {
    if cols == 0 {
        return Ok(Vec::new());
    }
    let block = m.as_ref().submatrix(0, 0, rows, cols).to_owned();
    Ok(singular_values(&block)?.iter().map(|x| x / scale).collect())
}

/// Returns (dim ker, largest value counted as zero, smallest counted as nonzero).
fn kernel_dim(rel: &[f64], cols: usize, threshold: f64) -> (usize, f64, f64) {
    let null = rel.iter().filter(|&&x| x < threshold).count() + cols.saturating_sub(rel.len());
    let largest_null = rel.iter().copied().filter(|&x| x < threshold).fold(0.0, f64::max);
    let smallest_regular = rel.iter().copied().filter(|&x| x >= threshold).fold(f64::INFINITY, f64::min);
    let smallest_regular = if smallest_regular.is_finite() { smallest_regular } else { 1.0 };
    (null, largest_null, smallest_regular)
}

/// `diag(u(t_{k−1}⁺))·B = B·diag(u(t_k⁻))`, the condition for `M_u` to preserve `L = B·R`.
pub fn preserves_domain(u: &SegmentedLoop, b: &BoundaryMatrix, partition: &Partition) -> bool {
    let n = partition.pieces();
    let left: Vec<C64> = (0..n).map(|k| value_from(u, partition.bounds(k).0, true)).collect();
    let right: Vec<C64> = (0..n).map(|k| value_from(u, partition.bounds(k).1, false)).collect();
    let m = b.matrix();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((left[i] * m[(i, j)] - m[(i, j)] * right[j]).norm());
        }
    }
    worst < 1e-9
}

/// One-sided value at `theta`: from the right when `from_right`, else from the left.
fn value_from(u: &SegmentedLoop, theta: f64, from_right: bool) -> C64 {
    let seg = u
        .segments()
        .iter()
        .find(|s| if from_right { s.start <= theta && theta < s.end } else { s.start < theta && theta <= s.end })
        .unwrap_or_else(|| if from_right { u.segments().last().unwrap() } else { &u.segments()[0] });
    seg.eval(theta)
}

/// `max ‖[M_f, T_B]ψ‖/‖ψ‖` over `samples` random combinations of eigenfunctions in `[−Λ, Λ]`.
///
/// `f` must map `dom(T_B)` into itself. The commutator is formed literally as
/// `f·(T_Bψ) − T_B(f·ψ)` on the exact atom representation.
pub fn commutator_norm_estimate(
    f: &SegmentedLoop,
    b: &BoundaryMatrix,
    partition: &Arc<Partition>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !preserves_domain(f, b, partition) {
        return Err(Error::Validation(
            "multiplication by f does not preserve the domain of the extension".into(),
        ));
    }
    let basis = eigenbasis(b, partition, (-40.0, 40.0))?;
    if basis.is_empty() {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let count = rng.gen_range(1..=6usize).min(basis.len());
        let mut psi = PiecewiseFunction::zero(partition.clone());
        let mut t_psi = PiecewiseFunction::zero(partition.clone());
        for _ in 0..count {
            let p = &basis[rng.gen_range(0..basis.len())];
            let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            psi = psi.add(&p.function.scaled(z))?;
            t_psi = t_psi.add(&p.function.scaled(z * p.eigenvalue))?;
        }
        let norm = psi.norm();
        if norm < 1e-12 {
            continue;
        }
        let lhs = f.multiply(&t_psi)?;
        let rhs = f.multiply(&psi)?.dirac();
        let comm = lhs.add(&rhs.scaled(c(-1.0, 0.0)))?;
        let q = inner_product(&comm, &comm)?.re.max(0.0).sqrt() / norm;
        worst = worst.max(q);
    }
    Ok(worst)
}

/// Compressed matrix of `M_u` on a spectral window, for inspection and tests.
pub fn compression_matrix(lp: &UnitaryLoop, b: &BoundaryMatrix, partition: &Arc<Partition>, window: (f64, f64)) -> Result<(Vec<f64>, CMatrix)> {
    let u = lp.as_segmented()?;
    let basis = eigenbasis(b, partition, window)?;
    let m = section(&basis, &u)?;
    let n = basis.len();
    Ok((
        basis.iter().map(|p| p.eigenvalue).collect(),
        CMatrix::from_fn(n, n, |i, j| m[(i, j)]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> Arc<Partition> {
        Arc::new(Partition::two_piece())
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding(&UnitaryLoop::monomial(1)).unwrap(), 1);
        assert_eq!(winding(&UnitaryLoop::Circle(FourierSeries::constant(c(1.0, 0.0)))).unwrap(), 0);
        let p = FourierSeries::new(vec![(3, c(2.0, 0.0)), (4, c(1.0, 0.0))]);
        assert_eq!(winding(&UnitaryLoop::Circle(p)).unwrap(), 3);
        let bad = FourierSeries::new(vec![(0, c(1.0, 0.0)), (1, c(1.0, 0.0))]);
        assert!(matches!(winding(&UnitaryLoop::Circle(bad)), Err(Error::IllConditionedLoop(_))));
        let fast = FourierSeries::monomial(3000);
        assert!(matches!(winding(&UnitaryLoop::Circle(fast)), Err(Error::IllConditionedLoop(_))));
    }

    #[test]
    fn pullback_examples() {
        let w = pullback_loop(&UnitaryLoop::wedge_monomials(2, -3)).unwrap();
        assert_eq!(winding(&w).unwrap(), -1);
        let w = pullback_loop(&UnitaryLoop::wedge_monomials(1, -1)).unwrap();
        assert_eq!(winding(&w).unwrap(), 0);
        let one = pullback_loop(&UnitaryLoop::wedge_monomials(0, 0)).unwrap();
        let s = one.as_segmented().unwrap();
        for t in [0.0, 0.3, 0.5, 0.8, 1.0] {
            assert!((s.eval(t) - c(1.0, 0.0)).norm() < 1e-15);
        }
        let bad = UnitaryLoop::Wedge(FourierSeries::monomial(1), FourierSeries::constant(c(-1.0, 0.0)));
        assert!(matches!(pullback_loop(&bad), Err(Error::Validation(_))));
        // u∘p reproduces u₁(2θ), u₂(2θ−1) pointwise.
        let f = FourierSeries::new(vec![(1, c(0.5, 0.0)), (-2, c(0.5, 0.0))]);
        let g = FourierSeries::new(vec![(3, c(1.0, 0.0))]);
        let s = pullback_loop(&UnitaryLoop::Wedge(f.clone(), g.clone())).unwrap().as_segmented().unwrap();
        for t in [0.05, 0.2, 0.45, 0.55, 0.7, 0.95] {
            let expect = if t < 0.5 { f.eval(2.0 * t) } else { g.eval(2.0 * t - 1.0) };
            assert!((s.eval(t) - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn swap_pairings() {
        let opts = PairingOptions::default();
        let r = pair(&UnitaryLoop::monomial(1), &BoundaryMatrix::swap(), &two(), &opts).unwrap();
        assert_eq!(r.index, -1);
        assert!(r.stable && r.compatible);
        let one = UnitaryLoop::Circle(FourierSeries::constant(c(1.0, 0.0)));
        let r = pair(&one, &BoundaryMatrix::swap(), &two(), &opts).unwrap();
        assert_eq!(r.index, 0);
    }

    #[test]
    fn compression_of_z_on_the_hardy_basis_is_a_shift() {
        // For swap the nonnegative eigenfunctions are e^{2πikθ}, k ≥ 0, and M_z shifts k by one.
        let (vals, m) = compression_matrix(&UnitaryLoop::monomial(1), &BoundaryMatrix::swap(), &two(), (0.0, 20.0 * PI)).unwrap();
        for (i, v) in vals.iter().enumerate() {
            assert!((v - 2.0 * PI * i as f64).abs() < 1e-9);
        }
        for i in 0..vals.len() {
            for j in 0..vals.len() {
                let target = if i == j + 1 { 1.0 } else { 0.0 };
                assert!((m[(i, j)] - target).norm() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn commutator_examples() {
        let p = two();
        let b = BoundaryMatrix::swap();
        let sin = FourierSeries::new(vec![(1, c(0.0, -0.5)), (-1, c(0.0, 0.5))]).to_segmented();
        let est = commutator_norm_estimate(&sin, &b, &p, 40, 1).unwrap();
        assert!(est > 0.0 && est <= 2.0 * PI + 1e-6);
        let konst = FourierSeries::constant(c(0.7, 0.2)).to_segmented();
        assert!(commutator_norm_estimate(&konst, &b, &p, 10, 1).unwrap() < 1e-9);
        let e2 = FourierSeries::monomial(2).to_segmented();
        let est = commutator_norm_estimate(&e2, &BoundaryMatrix::identity(2), &p, 40, 2).unwrap();
        assert!(est <= 4.0 * PI + 1e-6);
        // e^{2πiθ} changes sign across ½, so it breaks the identity extension's domain.
        let z = FourierSeries::monomial(1).to_segmented();
        assert!(commutator_norm_estimate(&z, &BoundaryMatrix::identity(2), &p, 4, 1).is_err());
    }

    #[test]
    fn wedge_loops_preserve_every_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = pullback_loop(&UnitaryLoop::wedge_monomials(1, 2)).unwrap().as_segmented().unwrap();
        for _ in 0..5 {
            assert!(preserves_domain(&u, &BoundaryMatrix::random(2, &mut rng), &Partition::two_piece()));
        }
    }
}
