//! Deficiency spaces of the minimal operator `T = (1/i)d/dθ` (domain functions vanish at
//! the constrained knots) and the von Neumann parameterization of its self-adjoint
//! extensions by unitaries between the deficiency spaces.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{boundary_values, inner_product, ExponentialAtom, Partition, PiecewiseFunction, C64};
use crate::error::{Error, Result};
use crate::linalg::{c, ensure_unitary, random_haar, CMatrix};

/// Tolerance for accepting an extension unitary.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance for accepting a boundary matrix.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Relative singular value cut-off for numerical rank.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    partition: Arc<Partition>,
    knot_constraints: Vec<usize>,
    effective: Arc<Partition>,
}

impl OperatorSpec {
    /// `knot_constraints` are indices into the partition endpoints.
    ///
    /// Interior knots that are left free impose nothing, so the pieces on either side are
    /// merged. Both ends must be constrained, otherwise `T` is not symmetric.
    pub fn new(partition: Partition, mut knot_constraints: Vec<usize>) -> Result<Self> {
        let n = partition.pieces();
        knot_constraints.sort_unstable();
        knot_constraints.dedup();
        if let Some(&k) = knot_constraints.iter().find(|&&k| k > n) {
            return Err(Error::Validation(format!(
                "knot index {k} is not an endpoint of a partition with {n} pieces"
            )));
        }
        if knot_constraints.first() != Some(&0) || knot_constraints.last() != Some(&n) {
            return Err(Error::Validation(
                "both 0 and 1 must be constrained knots for the operator to be symmetric".into(),
            ));
        }
        let effective = if knot_constraints.len() == n + 1 {
            partition.clone()
        } else {
            Partition::new(
                knot_constraints
                    .iter()
                    .map(|&k| partition.endpoints()[k])
                    .collect(),
            )?
        };
        Ok(Self {
            partition: Arc::new(partition),
            knot_constraints,
            effective: Arc::new(effective),
        })
    }

    /// Every endpoint constrained.
    pub fn all_knots(partition: Partition) -> Self {
        let knots = (0..=partition.pieces()).collect();
        Self::new(partition, knots).expect("all knots constrained is always valid")
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn knot_constraints(&self) -> &[usize] {
        &self.knot_constraints
    }

    /// Partition generated by the constrained knots only; all Hilbert-space work happens here.
    pub fn effective_partition(&self) -> &Arc<Partition> {
        &self.effective
    }

    pub fn deficiency_index(&self) -> usize {
        self.effective.pieces()
    }
}

impl Default for OperatorSpec {
    fn default() -> Self {
        Self::all_knots(Partition::two_piece())
    }
}

/// `Plus` is `Ker(T* − i)`, spanned by `e^{−θ}` per piece; `Minus` is `Ker(T* + i)`, spanned by `e^{θ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeficiencySign {
    Plus,
    Minus,
}

impl DeficiencySign {
    /// Exponent `μ` of the solutions `e^{μθ}` of `(1/i)f′ = ±i f`.
    pub fn exponent(self) -> f64 {
        match self {
            DeficiencySign::Plus => -1.0,
            DeficiencySign::Minus => 1.0,
        }
    }

    /// The eigenvalue `±i` of `T*` on this space.
    pub fn eigenvalue(self) -> C64 {
        match self {
            DeficiencySign::Plus => c(0.0, 1.0),
            DeficiencySign::Minus => c(0.0, -1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeficiencySpace {
    pub sign: DeficiencySign,
    /// One element per piece, ordered by piece.
    pub basis: Vec<PiecewiseFunction>,
    /// Real positive normalizing constants `c_k` of `c_k·e^{∓θ}`.
    pub coefficients: Vec<f64>,
}

impl DeficiencySpace {
    pub fn index(&self) -> usize {
        self.basis.len()
    }

    pub fn gram(&self) -> Result<CMatrix> {
        let n = self.index();
        let mut g = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = inner_product(&self.basis[i], &self.basis[j])?;
            }
        }
        Ok(g)
    }

    /// `max |G − I|`.
    pub fn gram_residual(&self) -> Result<f64> {
        let g = self.gram()?;
        let n = self.index();
        Ok((0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).norm())
            .fold(0.0, f64::max))
    }

    /// Linear combination of the basis.
    pub fn combine(&self, coeffs: &[C64]) -> Result<PiecewiseFunction> {
        if coeffs.len() != self.index() {
            return Err(Error::Structural(format!(
                "{} coefficients for a {}-dimensional deficiency space",
                coeffs.len(),
                self.index()
            )));
        }
        let partition = self.basis[0].partition().clone();
        let terms: Vec<_> = coeffs.iter().copied().zip(self.basis.iter()).collect();
        PiecewiseFunction::linear_combination(partition, &terms)
    }
}

/// Normalized solutions `c_k·e^{∓θ}`, one per piece of the effective partition.
pub fn compute_deficiency(spec: &OperatorSpec, sign: DeficiencySign) -> DeficiencySpace {
    let p = spec.effective_partition();
    let mu = sign.exponent();
    let mut basis = Vec::with_capacity(p.pieces());
    let mut coefficients = Vec::with_capacity(p.pieces());
    for k in 0..p.pieces() {
        let (a, b) = p.bounds(k);
        // ∫_a^b e^{2μθ} dθ
        let mass = ((2.0 * mu * b).exp() - (2.0 * mu * a).exp()) / (2.0 * mu);
        let ck = mass.recip().sqrt();
        coefficients.push(ck);
        basis.push(
            PiecewiseFunction::from_atoms(
                p.clone(),
                vec![ExponentialAtom::new(k, c(ck, 0.0), c(mu, 0.0))],
            )
            .expect("piece index in range"),
        );
    }
    DeficiencySpace { sign, basis, coefficients }
}

/// Unitary map `Ker(T*−i) → Ker(T*+i)` written in the ordered deficiency bases.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionUnitary {
    matrix: CMatrix,
}

impl ExtensionUnitary {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        ensure_unitary(&matrix, UNITARY_TOL, "extension unitary")?;
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: CMatrix::identity(n, n) }
    }

    /// `((0,1),(1,0))`.
    pub fn swap() -> Self {
        Self { matrix: swap_matrix() }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self { matrix: random_haar(n, rng) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

fn swap_matrix() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

/// Unitary `B` with `L = B·R` for every function in the extension's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMatrix {
    matrix: CMatrix,
}

impl BoundaryMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        ensure_unitary(&matrix, BOUNDARY_TOL, "boundary matrix")?;
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: CMatrix::identity(n, n) }
    }

    pub fn swap() -> Self {
        Self { matrix: swap_matrix() }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self { matrix: random_haar(n, rng) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }
}

/// `ξ + η + u(η)` kept in decomposed form.
#[derive(Debug, Clone)]
pub struct DomainVector {
    pub xi: PiecewiseFunction,
    /// Coordinates of `η` in the plus basis.
    pub eta: Vec<C64>,
    pub function: PiecewiseFunction,
}

#[derive(Debug, Clone)]
pub struct Extension {
    spec: OperatorSpec,
    unitary: ExtensionUnitary,
    plus: DeficiencySpace,
    minus: DeficiencySpace,
    boundary: BoundaryMatrix,
}

pub fn build_extension(spec: &OperatorSpec, u: &ExtensionUnitary) -> Result<Extension> {
    let n = spec.deficiency_index();
    if u.size() != n {
        return Err(Error::Structural(format!(
            "extension unitary is {}x{} but the deficiency indices are ({n},{n})",
            u.size(),
            u.size()
        )));
    }
    ensure_unitary(u.matrix(), UNITARY_TOL, "extension unitary")?;
    let plus = compute_deficiency(spec, DeficiencySign::Plus);
    let minus = compute_deficiency(spec, DeficiencySign::Minus);
    let boundary = trace_boundary_matrix(&plus, &minus, u)?;
    Ok(Extension {
        spec: spec.clone(),
        unitary: u.clone(),
        plus,
        minus,
        boundary,
    })
}

/// `B = (L₊ + L₋u)(R₊ + R₋u)⁻¹` from the diagonal trace matrices of the two bases.
fn trace_boundary_matrix(
    plus: &DeficiencySpace,
    minus: &DeficiencySpace,
    u: &ExtensionUnitary,
) -> Result<BoundaryMatrix> {
    let n = plus.index();
    let traces = |s: &DeficiencySpace| {
        let (l, r): (Vec<_>, Vec<_>) = s
            .basis
            .iter()
            .enumerate()
            .map(|(k, f)| (f.left_trace(k), f.right_trace(k)))
            .unzip();
        (
            CMatrix::from_diagonal(&nalgebra::DVector::from_vec(l)),
            CMatrix::from_diagonal(&nalgebra::DVector::from_vec(r)),
        )
    };
    let (lp, rp) = traces(plus);
    let (lm, rm) = traces(minus);
    let num = &lp + &lm * u.matrix();
    let den = &rp + &rm * u.matrix();
    let inv = den
        .try_inverse()
        .ok_or_else(|| Error::Numerical("right trace matrix is singular".into()))?;
    let b = num * inv;
    debug_assert_eq!(b.nrows(), n);
    BoundaryMatrix::new(b).map_err(|e| Error::Numerical(format!("derived boundary matrix: {e}")))
}

impl Extension {
    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn unitary(&self) -> &ExtensionUnitary {
        &self.unitary
    }

    pub fn boundary(&self) -> &BoundaryMatrix {
        &self.boundary
    }

    pub fn plus(&self) -> &DeficiencySpace {
        &self.plus
    }

    pub fn minus(&self) -> &DeficiencySpace {
        &self.minus
    }

    pub fn partition(&self) -> &Arc<Partition> {
        self.spec.effective_partition()
    }

    /// `η + u(η)` for `η` with plus-basis coordinates `eta`.
    pub fn deficiency_part(&self, eta: &[C64]) -> Result<PiecewiseFunction> {
        let ua = self.rotate(eta)?;
        self.plus.combine(eta)?.add(&self.minus.combine(&ua)?)
    }

    fn rotate(&self, eta: &[C64]) -> Result<Vec<C64>> {
        if eta.len() != self.unitary.size() {
            return Err(Error::Structural(format!(
                "{} deficiency coordinates for index {}",
                eta.len(),
                self.unitary.size()
            )));
        }
        let a = nalgebra::DVector::from_column_slice(eta);
        Ok((self.unitary.matrix() * a).iter().copied().collect())
    }

    /// Assembles `ξ + η + u(η)`; `ξ` must vanish at every knot.
    pub fn domain_vector(&self, xi: PiecewiseFunction, eta: &[C64]) -> Result<DomainVector> {
        check_in_minimal_domain(&xi)?;
        let function = xi.add(&self.deficiency_part(eta)?)?;
        Ok(DomainVector { xi, eta: eta.to_vec(), function })
    }

    /// `T_u(ξ + η + uη) = Tξ + iη − i·u(η)`.
    pub fn apply(&self, v: &DomainVector) -> Result<PiecewiseFunction> {
        let ua = self.rotate(&v.eta)?;
        let eta = self.plus.combine(&v.eta)?.scaled(c(0.0, 1.0));
        let ueta = self.minus.combine(&ua)?.scaled(c(0.0, -1.0));
        v.xi.dirac().add(&eta)?.add(&ueta)
    }

    /// A random domain vector: bump atoms for `ξ` and Gaussian deficiency coordinates.
    pub fn random_domain_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> DomainVector {
        let xi = random_minimal_vector(self.partition(), rng);
        let eta: Vec<C64> = (0..self.unitary.size()).map(|_| random_c64(rng)).collect();
        self.domain_vector(xi, &eta).expect("bumps vanish at the knots")
    }

    /// `|⟨T_u f, g⟩ − ⟨f, T_u g⟩|`.
    pub fn symmetry_defect(&self, f: &DomainVector, g: &DomainVector) -> Result<f64> {
        let lhs = inner_product(&self.apply(f)?, &g.function)?;
        let rhs = inner_product(&f.function, &self.apply(g)?)?;
        Ok((lhs - rhs).norm())
    }
}

pub(crate) fn random_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// `coefficient·(e^{iω(θ−a)} − 1)` on `piece`, `ω = 2πm/ℓ`; vanishes at both ends of the piece.
pub fn bump(partition: &Arc<Partition>, piece: usize, m: i32, coefficient: C64) -> Result<PiecewiseFunction> {
    let (a, _) = partition.bounds(piece);
    let omega = 2.0 * std::f64::consts::PI * m as f64 / partition.length(piece);
    PiecewiseFunction::from_atoms(
        partition.clone(),
        vec![
            ExponentialAtom::new(piece, coefficient * c(0.0, -omega * a).exp(), c(0.0, omega)),
            ExponentialAtom::new(piece, -coefficient, c(0.0, 0.0)),
        ],
    )
}

/// Random element of `dom(T)` built from bumps with `m ∈ {−2,…,3}\{0}`.
pub fn random_minimal_vector<R: Rng + ?Sized>(partition: &Arc<Partition>, rng: &mut R) -> PiecewiseFunction {
    let mut f = PiecewiseFunction::zero(partition.clone());
    for k in 0..partition.pieces() {
        for m in [-2, -1, 1, 2, 3] {
            f = f
                .add(&bump(partition, k, m, random_c64(rng)).expect("valid piece"))
                .expect("same partition");
        }
    }
    f
}

fn check_in_minimal_domain(xi: &PiecewiseFunction) -> Result<()> {
    let scale = 1.0 + xi.atoms().iter().map(|a| a.coefficient.norm()).sum::<f64>();
    let (l, r) = boundary_values(xi);
    let worst = l.iter().chain(&r).map(|z| z.norm()).fold(0.0, f64::max);
    if worst > 1e-9 * scale {
        return Err(Error::Validation(format!(
            "core vector does not vanish at the knots (|trace| = {worst:e})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct NumericBoundary {
    pub matrix: BoundaryMatrix,
    /// `‖B·R − L‖_F / ‖L‖_F` over the sample.
    pub residual: f64,
    pub samples: usize,
    pub attempts: usize,
}

/// Fits `L = B·R` by least squares over `2n + 2` sampled domain vectors.
pub fn boundary_matrix_numeric(ext: &Extension, seed: u64) -> Result<NumericBoundary> {
    let n = ext.unitary.size();
    let samples = 2 * n + 2;
    const ATTEMPTS: usize = 5;
    for attempt in 0..ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let mut lm = CMatrix::zeros(n, samples);
        let mut rm = CMatrix::zeros(n, samples);
        for s in 0..samples {
            let v = ext.random_domain_vector(&mut rng);
            let (l, r) = boundary_values(&v.function);
            for k in 0..n {
                lm[(k, s)] = l[k];
                rm[(k, s)] = r[k];
            }
        }
        let svd = rm.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOL * smax).count();
        if rank < n {
            continue;
        }
        let pinv = svd
            .pseudo_inverse(RANK_TOL * smax)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let b = &lm * pinv;
        let residual = (&b * &rm - &lm).norm() / lm.norm().max(f64::MIN_POSITIVE);
        let matrix = BoundaryMatrix::new(b)
            .map_err(|e| Error::Numerical(format!("fitted boundary matrix: {e}")))?;
        return Ok(NumericBoundary { matrix, residual, samples, attempts: attempt + 1 });
    }
    Err(Error::Numerical(format!(
        "right traces stayed rank deficient after {ATTEMPTS} attempts"
    )))
}

/// The explicit U(2) formula for the two-piece partition `{0, ½, 1}`:
/// `B = (1/(1+(α+δ)√e+Δe))·((α+(1+Δ)√e+δe, β(1−e)), (γ(1−e), δ+(1+Δ)√e+αe))`.
pub fn boundary_matrix_closed_form(u: &ExtensionUnitary) -> Result<BoundaryMatrix> {
    if u.size() != 2 {
        return Err(Error::Structural(format!(
            "closed form needs a 2x2 unitary, got {}x{}",
            u.size(),
            u.size()
        )));
    }
    let m = u.matrix();
    let (alpha, beta, gamma, delta) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let det = alpha * delta - beta * gamma;
    let e = std::f64::consts::E;
    let se = e.sqrt();
    let denom = 1.0 + (alpha + delta) * se + det * e;
    if denom.norm() <= 1e-12 {
        return Err(Error::SingularParameterization(denom.norm()));
    }
    let one = c(1.0, 0.0);
    let b = DMatrix::from_row_slice(
        2,
        2,
        &[
            alpha + (one + det) * se + delta * e,
            beta * (1.0 - e),
            gamma * (1.0 - e),
            delta + (one + det) * se + alpha * e,
        ],
    ) / denom;
    BoundaryMatrix::new(b)
}

/// Rank of the trace vectors `(L, R) ∈ ℂ^{2n}` of random `ξ + η₊ + η₋ ∈ dom(T*)`.
pub fn adjoint_trace_rank(spec: &OperatorSpec, samples: usize, seed: u64) -> Result<usize> {
    let plus = compute_deficiency(spec, DeficiencySign::Plus);
    let minus = compute_deficiency(spec, DeficiencySign::Minus);
    let n = plus.index();
    let p = spec.effective_partition();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traces = CMatrix::zeros(2 * n, samples);
    for s in 0..samples {
        let a: Vec<C64> = (0..n).map(|_| random_c64(&mut rng)).collect();
        let b: Vec<C64> = (0..n).map(|_| random_c64(&mut rng)).collect();
        let f = random_minimal_vector(p, &mut rng)
            .add(&plus.combine(&a)?)?
            .add(&minus.combine(&b)?)?;
        let (l, r) = boundary_values(&f);
        for k in 0..n {
            traces[(k, s)] = l[k];
            traces[(n + k, s)] = r[k];
        }
    }
    let sv = traces.singular_values();
    let smax = sv.max();
    Ok(sv.iter().filter(|&&s| s > RANK_TOL * smax).count())
}
