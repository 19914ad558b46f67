//! Hilbert-space arithmetic on `L²[0,1]` for finite sums of exponential atoms
//! `θ ↦ c·e^{μθ}` supported on the pieces of a partition of the unit interval.
//!
//! Inner products are evaluated in closed form. Gauss-Legendre quadrature is
//! kept as a fallback for functions that are only available through samples.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Global default for complex comparisons.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Below this modulus of `conj(μ₁)+μ₂` the exponential integral switches to its Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-8;

/// Gauss-Legendre nodes per piece used by the quadrature fallback.
pub const QUADRATURE_NODES: usize = 64;

/// Strictly increasing knots `0 = t₀ < t₁ < … < t_n = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    endpoints: Vec<f64>,
}

impl Partition {
    pub fn new(endpoints: Vec<f64>) -> Result<Self> {
        if endpoints.len() < 2 {
            return Err(Error::Validation(format!(
                "a partition needs at least two endpoints, got {}",
                endpoints.len()
            )));
        }
        if endpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::Validation("partition endpoints must be finite".into()));
        }
        if endpoints[0] != 0.0 || *endpoints.last().unwrap() != 1.0 {
            return Err(Error::Validation(format!(
                "partition must span [0,1], got [{}, {}]",
                endpoints[0],
                endpoints.last().unwrap()
            )));
        }
        if let Some(w) = endpoints.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "partition endpoints must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { endpoints })
    }

    /// `{0, 1/2, 1}`.
    pub fn two_piece() -> Self {
        Self { endpoints: vec![0.0, 0.5, 1.0] }
    }

    /// `{0, 1}`.
    pub fn single() -> Self {
        Self { endpoints: vec![0.0, 1.0] }
    }

    /// Number of pieces `n`.
    pub fn pieces(&self) -> usize {
        self.endpoints.len() - 1
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    /// `(t_{k}, t_{k+1})` for the zero-based piece `k`.
    pub fn bounds(&self, piece: usize) -> (f64, f64) {
        (self.endpoints[piece], self.endpoints[piece + 1])
    }

    pub fn length(&self, piece: usize) -> f64 {
        let (a, b) = self.bounds(piece);
        b - a
    }

    pub fn lengths(&self) -> Vec<f64> {
        (0..self.pieces()).map(|k| self.length(k)).collect()
    }

    /// Piece containing `theta`; knots belong to the piece on their right, except `1`.
    pub fn locate(&self, theta: f64) -> Option<usize> {
        if !(0.0..=1.0).contains(&theta) {
            return None;
        }
        let n = self.pieces();
        Some(
            self.endpoints[1..n]
                .iter()
                .take_while(|&&t| t <= theta)
                .count(),
        )
    }

    /// True when all pieces have the same length to `tol`.
    pub fn is_uniform(&self, tol: f64) -> bool {
        let l0 = self.length(0);
        (1..self.pieces()).all(|k| (self.length(k) - l0).abs() <= tol)
    }
}

impl Default for Partition {
    fn default() -> Self {
        Self::two_piece()
    }
}

/// `θ ↦ coefficient·e^{exponent·θ}` on one piece, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialAtom {
    pub piece: usize,
    pub coefficient: C64,
    pub exponent: C64,
}

impl ExponentialAtom {
    pub fn new(piece: usize, coefficient: C64, exponent: C64) -> Self {
        Self { piece, coefficient, exponent }
    }

    /// Value of the analytic expression, ignoring the support.
    pub fn eval_unrestricted(&self, theta: f64) -> C64 {
        self.coefficient * (self.exponent * theta).exp()
    }
}

/// A finite linear combination of exponential atoms over a shared partition.
#[derive(Debug, Clone)]
pub struct PiecewiseFunction {
    partition: Arc<Partition>,
    atoms: Vec<ExponentialAtom>,
}

impl PiecewiseFunction {
    pub fn zero(partition: Arc<Partition>) -> Self {
        Self { partition, atoms: Vec::new() }
    }

    pub fn from_atoms(partition: Arc<Partition>, atoms: Vec<ExponentialAtom>) -> Result<Self> {
        if let Some(a) = atoms.iter().find(|a| a.piece >= partition.pieces()) {
            return Err(Error::Structural(format!(
                "atom on piece {} but the partition has {} pieces",
                a.piece,
                partition.pieces()
            )));
        }
        Ok(Self { partition, atoms })
    }

    /// The constant `c` on every piece.
    pub fn constant(partition: Arc<Partition>, c: C64) -> Self {
        let atoms = (0..partition.pieces())
            .map(|k| ExponentialAtom::new(k, c, C64::new(0.0, 0.0)))
            .collect();
        Self { partition, atoms }
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn atoms(&self) -> &[ExponentialAtom] {
        &self.atoms
    }

    fn check_same_partition(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.partition, &other.partition) || self.partition == other.partition {
            Ok(())
        } else {
            Err(Error::Structural(format!(
                "functions live on different partitions {:?} and {:?}",
                self.partition.endpoints(),
                other.partition.endpoints()
            )))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_partition(other)?;
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        Ok(Self { partition: self.partition.clone(), atoms }.simplified())
    }

    pub fn scaled(&self, c: C64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| ExponentialAtom { coefficient: a.coefficient * c, ..*a })
            .collect();
        Self { partition: self.partition.clone(), atoms }
    }

    /// `Σ cᵢ·fᵢ`; all terms must share `partition`.
    pub fn linear_combination(
        partition: Arc<Partition>,
        terms: &[(C64, &PiecewiseFunction)],
    ) -> Result<Self> {
        let mut out = Self::zero(partition);
        for (c, f) in terms {
            out.check_same_partition(f)?;
            out.atoms.extend(
                f.atoms
                    .iter()
                    .map(|a| ExponentialAtom { coefficient: a.coefficient * c, ..*a }),
            );
        }
        Ok(out.simplified())
    }

    /// Merges atoms that share a piece and an exponent, dropping exact zeros.
    pub fn simplified(mut self) -> Self {
        let mut merged: Vec<ExponentialAtom> = Vec::with_capacity(self.atoms.len());
        for a in self.atoms.drain(..) {
            match merged
                .iter_mut()
                .find(|m| m.piece == a.piece && m.exponent == a.exponent)
            {
                Some(m) => m.coefficient += a.coefficient,
                None => merged.push(a),
            }
        }
        merged.retain(|a| a.coefficient != C64::new(0.0, 0.0));
        merged.sort_by_key(|a| a.piece);
        self.atoms = merged;
        self
    }

    fn eval_on_piece(&self, piece: usize, theta: f64) -> C64 {
        self.atoms
            .iter()
            .filter(|a| a.piece == piece)
            .map(|a| a.eval_unrestricted(theta))
            .sum()
    }

    /// Point value; knots are read from the piece on their right (left at `θ = 1`).
    pub fn eval(&self, theta: f64) -> Option<C64> {
        self.partition
            .locate(theta)
            .map(|k| self.eval_on_piece(k, theta))
    }

    /// Limit from the right at the left end of `piece`.
    pub fn left_trace(&self, piece: usize) -> C64 {
        let (a, _) = self.partition.bounds(piece);
        self.eval_on_piece(piece, a)
    }

    /// Limit from the left at the right end of `piece`.
    pub fn right_trace(&self, piece: usize) -> C64 {
        let (_, b) = self.partition.bounds(piece);
        self.eval_on_piece(piece, b)
    }

    /// Piecewise derivative.
    pub fn derivative(&self) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| ExponentialAtom { coefficient: a.coefficient * a.exponent, ..*a })
            .collect();
        Self { partition: self.partition.clone(), atoms }.simplified()
    }

    /// `(1/i)·d/dθ` applied piecewise.
    pub fn dirac(&self) -> Self {
        self.derivative().scaled(C64::new(0.0, -1.0))
    }

    /// Pointwise product; the result has one atom per pair of atoms on the same piece.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same_partition(other)?;
        let mut atoms = Vec::with_capacity(self.atoms.len() * other.atoms.len());
        for a in &self.atoms {
            for b in other.atoms.iter().filter(|b| b.piece == a.piece) {
                atoms.push(ExponentialAtom::new(
                    a.piece,
                    a.coefficient * b.coefficient,
                    a.exponent + b.exponent,
                ));
            }
        }
        Ok(Self { partition: self.partition.clone(), atoms }.simplified())
    }

    pub fn norm(&self) -> f64 {
        inner_product(self, self)
            .map(|z| z.re.max(0.0).sqrt())
            .unwrap_or(0.0)
    }
}

/// `expm1` for complex arguments, accurate near zero.
fn expm1(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let em1 = z.re.exp_m1();
    let half = (0.5 * z.im).sin();
    C64::new(em1 * c - 2.0 * half * half, z.re.exp() * s)
}

/// `∫_a^b e^{νθ} dθ`.
pub fn exp_integral(nu: C64, a: f64, b: f64) -> C64 {
    let len = b - a;
    let z = nu * len;
    let ratio = if nu.norm() < SERIES_THRESHOLD {
        // (e^z - 1)/z = 1 + z/2 + z²/6 + z³/24
        C64::new(1.0, 0.0) + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    } else {
        expm1(z) / z
    };
    (nu * a).exp() * len * ratio
}

/// `∫₀¹ conj(f)·g dθ`, in closed form.
pub fn inner_product(f: &PiecewiseFunction, g: &PiecewiseFunction) -> Result<C64> {
    f.check_same_partition(g)?;
    let mut acc = C64::new(0.0, 0.0);
    for a in &f.atoms {
        let (lo, hi) = f.partition.bounds(a.piece);
        for b in g.atoms.iter().filter(|b| b.piece == a.piece) {
            let nu = a.exponent.conj() + b.exponent;
            acc += a.coefficient.conj() * b.coefficient * exp_integral(nu, lo, hi);
        }
    }
    Ok(acc)
}

/// One-sided traces `(L, R)` with `L_k = f(t_{k-1}⁺)` and `R_k = f(t_k⁻)`.
pub fn boundary_values(f: &PiecewiseFunction) -> (Vec<C64>, Vec<C64>) {
    let n = f.partition.pieces();
    let left = (0..n).map(|k| f.left_trace(k)).collect();
    let right = (0..n).map(|k| f.right_trace(k)).collect();
    (left, right)
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes from Newton iteration on `P_n` started at the Chebyshev-like guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> C64>(&self, a: f64, b: f64, f: F) -> C64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(mid + half * x) * w)
            .sum::<C64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// `∫₀¹ conj(f)·g` for sampled functions: Gauss-Legendre with [`QUADRATURE_NODES`] nodes per piece.
pub fn inner_product_sampled<F, G>(partition: &Partition, f: F, g: G) -> C64
where
    F: Fn(usize, f64) -> C64,
    G: Fn(usize, f64) -> C64,
{
    let rule = GaussLegendre::new(QUADRATURE_NODES);
    (0..partition.pieces())
        .map(|k| {
            let (a, b) = partition.bounds(k);
            rule.integrate(a, b, |t| f(k, t).conj() * g(k, t))
        })
        .sum()
}

/// The quadrature route applied to two atom sums, for cross-checking [`inner_product`].
pub fn inner_product_quadrature(f: &PiecewiseFunction, g: &PiecewiseFunction) -> Result<C64> {
    f.check_same_partition(g)?;
    Ok(inner_product_sampled(
        &f.partition,
        |k, t| f.eval_on_piece(k, t),
        |k, t| g.eval_on_piece(k, t),
    ))
}
