//! Integer K-homology calculus for circles, closed surfaces and the spaces
//! obtained from them by wedging, disjoint union and gluing along a circle.
//!
//! A K-homology class of a complex of dimension at most two is stored through
//! its integral Chern character: even classes as `H₀ ⊕ H₂` coordinates, odd
//! classes as `H₁` coordinates. Continuous maps act by integer matrices.
//!
//! Bases:
//! - `H₀`: one generator per connected component (the base point of each).
//! - `H₁(Σ_g)`: `a₁, b₁, …, a_g, b_g`. A circle has the single class `[S¹]`.
//! - `H₂`: fundamental classes, one per surface summand.
//! - `Σ_{g₁} ∪_{S¹} Σ_{g₂}` glues `a₁` of the first surface to `a₁` of the
//!   second, so its `H₁` basis is the first surface's basis followed by the
//!   second's with `a₁` dropped.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type IntMatrix = DMatrix<i64>;

/// Largest genus swept by [`verify_identities`].
pub const MAX_GENUS: u32 = 6;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SurfaceSpace {
    Point,
    Circle,
    Surface(u32),
    Wedge(Box<SurfaceSpace>, Box<SurfaceSpace>),
    Disjoint(Box<SurfaceSpace>, Box<SurfaceSpace>),
    /// Two surfaces glued along a non-separating circle; both genera are at least 1.
    CircleUnion(u32, u32),
}

impl SurfaceSpace {
    pub fn surface(g: u32) -> Self {
        SurfaceSpace::Surface(g)
    }

    pub fn wedge(left: SurfaceSpace, right: SurfaceSpace) -> Result<Self> {
        check_operand(&left, "wedge")?;
        check_operand(&right, "wedge")?;
        Ok(SurfaceSpace::Wedge(Box::new(left), Box::new(right)))
    }

    pub fn disjoint(left: SurfaceSpace, right: SurfaceSpace) -> Result<Self> {
        check_operand(&left, "disjoint union")?;
        check_operand(&right, "disjoint union")?;
        Ok(SurfaceSpace::Disjoint(Box::new(left), Box::new(right)))
    }

    /// `Σ_{g₁} ∪_{S¹} Σ_{g₂}`. A sphere has no non-retractable circle.
    pub fn circle_union(g1: u32, g2: u32) -> Result<Self> {
        if g1 == 0 || g2 == 0 {
            return Err(Error::Validation(format!(
                "circle union needs a non-retractable circle on both surfaces, got genera ({g1}, {g2})"
            )));
        }
        Ok(SurfaceSpace::CircleUnion(g1, g2))
    }

    /// Ranks of `H₀`, `H₁`, `H₂`.
    pub fn ranks(&self) -> [usize; 3] {
        match self {
            SurfaceSpace::Point => [1, 0, 0],
            SurfaceSpace::Circle => [1, 1, 0],
            SurfaceSpace::Surface(g) => [1, 2 * *g as usize, 1],
            SurfaceSpace::Wedge(l, r) => {
                let (a, b) = (l.ranks(), r.ranks());
                [1, a[1] + b[1], a[2] + b[2]]
            }
            SurfaceSpace::Disjoint(l, r) => {
                let (a, b) = (l.ranks(), r.ranks());
                [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
            }
            SurfaceSpace::CircleUnion(g1, g2) => [1, 2 * (*g1 + *g2) as usize - 1, 2],
        }
    }

    /// Rank of the even part `H₀ ⊕ H₂`.
    pub fn even_rank(&self) -> usize {
        let r = self.ranks();
        r[0] + r[2]
    }

    pub fn odd_rank(&self) -> usize {
        self.ranks()[1]
    }

    /// Euler characteristic from the Betti numbers.
    pub fn euler_characteristic(&self) -> i64 {
        let r = self.ranks();
        r[0] as i64 - r[1] as i64 + r[2] as i64
    }

    pub fn is_connected(&self) -> bool {
        self.ranks()[0] == 1
    }
}

impl std::fmt::Display for SurfaceSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SurfaceSpace::Point => write!(f, "pt"),
            SurfaceSpace::Circle => write!(f, "S1"),
            SurfaceSpace::Surface(g) => write!(f, "Sigma_{g}"),
            SurfaceSpace::Wedge(l, r) => write!(f, "({l} v {r})"),
            SurfaceSpace::Disjoint(l, r) => write!(f, "({l} + {r})"),
            SurfaceSpace::CircleUnion(a, b) => write!(f, "(Sigma_{a} u_S1 Sigma_{b})"),
        }
    }
}

fn check_operand(space: &SurfaceSpace, what: &str) -> Result<()> {
    match space {
        SurfaceSpace::Circle | SurfaceSpace::Surface(_) => Ok(()),
        other => Err(Error::Validation(format!(
            "{what} operands must be circles or surfaces, got {other}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    /// `K₀`, coordinates in `H₀ ⊕ H₂`.
    Even,
    /// `K₁`, coordinates in `H₁`.
    Odd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KClassVector {
    space: SurfaceSpace,
    parity: Parity,
    coords: Vec<i64>,
}

impl KClassVector {
    pub fn new(space: SurfaceSpace, parity: Parity, coords: Vec<i64>) -> Result<Self> {
        let expected = match parity {
            Parity::Even => space.even_rank(),
            Parity::Odd => space.odd_rank(),
        };
        if coords.len() != expected {
            return Err(Error::Structural(format!(
                "{parity:?} class on {space} needs {expected} coordinates, got {}",
                coords.len()
            )));
        }
        Ok(Self {
            space,
            parity,
            coords,
        })
    }

    pub fn even(space: SurfaceSpace, h0: &[i64], h2: &[i64]) -> Result<Self> {
        let r = space.ranks();
        if h0.len() != r[0] || h2.len() != r[2] {
            return Err(Error::Structural(format!(
                "even class on {space} needs ({}, {}) coordinates, got ({}, {})",
                r[0],
                r[2],
                h0.len(),
                h2.len()
            )));
        }
        Self::new(space, Parity::Even, [h0, h2].concat())
    }

    pub fn odd(space: SurfaceSpace, h1: &[i64]) -> Result<Self> {
        Self::new(space, Parity::Odd, h1.to_vec())
    }

    pub fn zero(space: SurfaceSpace, parity: Parity) -> Self {
        let n = match parity {
            Parity::Even => space.even_rank(),
            Parity::Odd => space.odd_rank(),
        };
        Self {
            space,
            parity,
            coords: vec![0; n],
        }
    }

    pub fn space(&self) -> &SurfaceSpace {
        &self.space
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn h0(&self) -> &[i64] {
        match self.parity {
            Parity::Even => &self.coords[..self.space.ranks()[0]],
            Parity::Odd => &[],
        }
    }

    pub fn h1(&self) -> &[i64] {
        match self.parity {
            Parity::Even => &[],
            Parity::Odd => &self.coords,
        }
    }

    pub fn h2(&self) -> &[i64] {
        match self.parity {
            Parity::Even => &self.coords[self.space.ranks()[0]..],
            Parity::Odd => &[],
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::Structural(format!(
                "classes live on different spaces: {} and {}",
                self.space, other.space
            )));
        }
        if self.parity != other.parity {
            return Err(Error::Parity(format!(
                "cannot combine {:?} and {:?} classes",
                self.parity, other.parity
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            coords,
            ..self.clone()
        })
    }

    pub fn scaled(&self, k: i64) -> Self {
        Self {
            coords: self.coords.iter().map(|a| k * a).collect(),
            ..self.clone()
        }
    }

    /// `self + k·other`.
    pub fn add_scaled(&self, k: i64, other: &Self) -> Result<Self> {
        self.add(&other.scaled(k))
    }

    /// The pair `(x₁, x₂)` as a class on the disjoint union.
    pub fn pair(x1: &Self, x2: &Self) -> Result<Self> {
        if x1.parity != x2.parity {
            return Err(Error::Parity(
                "pair components must have the same parity".into(),
            ));
        }
        let space = SurfaceSpace::disjoint(x1.space.clone(), x2.space.clone())?;
        match x1.parity {
            Parity::Even => Self::even(
                space,
                &[x1.h0(), x2.h0()].concat(),
                &[x1.h2(), x2.h2()].concat(),
            ),
            Parity::Odd => Self::odd(space, &[x1.h1(), x2.h1()].concat()),
        }
    }
}

/// `ch[∂̄_g] = (1 − g)·[1] + [Σ_g]`.
pub fn chern_dolbeault(g: u32) -> KClassVector {
    KClassVector {
        space: SurfaceSpace::Surface(g),
        parity: Parity::Even,
        coords: vec![1 - g as i64, 1],
    }
}

/// The Dirac class `[D] ∈ K₁(S¹)`, whose odd Chern character is `−[S¹]`.
pub fn dirac_class() -> KClassVector {
    KClassVector {
        space: SurfaceSpace::Circle,
        parity: Parity::Odd,
        coords: vec![-1],
    }
}

/// The class whose Chern character is the fundamental class: `[S¹]_K = −[D]`
/// on the circle and `[Σ_g]_K` with coordinates `(0, 1)` on a surface.
pub fn fundamental_k_class(space: &SurfaceSpace) -> Result<KClassVector> {
    match space {
        SurfaceSpace::Circle => KClassVector::odd(SurfaceSpace::Circle, &[1]),
        SurfaceSpace::Surface(g) => KClassVector::even(SurfaceSpace::Surface(*g), &[0], &[1]),
        SurfaceSpace::Point => Err(Error::Parity(
            "a point has no fundamental class in positive degree".into(),
        )),
        other => Err(Error::Validation(format!(
            "fundamental class only defined for a circle or a closed surface, got {other}"
        ))),
    }
}

/// `ι_*[1]` for the base point of a connected space, or of its first component.
pub fn basepoint_class(space: &SurfaceSpace) -> KClassVector {
    let mut coords = vec![0; space.even_rank()];
    coords[0] = 1;
    KClassVector {
        space: space.clone(),
        parity: Parity::Even,
        coords,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapKind {
    Identity,
    /// `M₁ ⊔ M₂ → M₁ ∨ M₂`.
    JDisjointToWedge,
    /// `Σ_{g₁} ⊔ Σ_{g₂} → Σ_{g₁} ∪_{S¹} Σ_{g₂}`.
    JDisjointToUnion,
    /// `M₁ # M₂ → M₁ ∨ M₂`, contracting the gluing circle.
    PPinchConnectedSum,
    /// `Σ_{g₁} ♮ Σ_{g₂} → Σ_{g₁} ∪_{S¹} Σ_{g₂}`.
    PPinchNaturalSum,
    /// `M₁ ∨ M₂ → M₁`, sending `M₂` to the base point.
    QCrunch,
    /// Constant map to a point.
    Q0Constant,
    /// Inclusion of the base point.
    IotaBasepoint,
    /// Degree-one map `Σ_{g₁+g₂} → Σ_{g₁}` collapsing the last `g₂` handles.
    Collapse,
    Composite(Vec<MapKind>),
}

/// A continuous map with its induced matrices on `H₀`, `H₁`, `H₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalMap {
    kind: MapKind,
    source: SurfaceSpace,
    target: SurfaceSpace,
    h: [IntMatrix; 3],
}

impl CanonicalMap {
    fn build(kind: MapKind, source: SurfaceSpace, target: SurfaceSpace, h: [IntMatrix; 3]) -> Self {
        let (s, t) = (source.ranks(), target.ranks());
        for d in 0..3 {
            debug_assert_eq!(h[d].shape(), (t[d], s[d]), "H{d} matrix of {kind:?}");
        }
        Self {
            kind,
            source,
            target,
            h,
        }
    }

    pub fn identity(space: &SurfaceSpace) -> Self {
        let r = space.ranks();
        Self::build(
            MapKind::Identity,
            space.clone(),
            space.clone(),
            r.map(|n| IntMatrix::identity(n, n)),
        )
    }

    pub fn j_disjoint_to_wedge(left: &SurfaceSpace, right: &SurfaceSpace) -> Result<Self> {
        let source = SurfaceSpace::disjoint(left.clone(), right.clone())?;
        let target = SurfaceSpace::wedge(left.clone(), right.clone())?;
        let r = source.ranks();
        Ok(Self::build(
            MapKind::JDisjointToWedge,
            source,
            target,
            [
                IntMatrix::from_element(1, 2, 1),
                IntMatrix::identity(r[1], r[1]),
                IntMatrix::identity(r[2], r[2]),
            ],
        ))
    }

    pub fn j_disjoint_to_union(g1: u32, g2: u32) -> Result<Self> {
        let target = SurfaceSpace::circle_union(g1, g2)?;
        let source = SurfaceSpace::disjoint(SurfaceSpace::Surface(g1), SurfaceSpace::Surface(g2))?;
        let (n1, n2) = (2 * g1 as usize, 2 * g2 as usize);
        // The second surface's a₁ becomes the first surface's a₁; its other generators shift down by one.
        let mut h1 = IntMatrix::zeros(n1 + n2 - 1, n1 + n2);
        for i in 0..n1 {
            h1[(i, i)] = 1;
        }
        h1[(0, n1)] = 1;
        for i in 1..n2 {
            h1[(n1 + i - 1, n1 + i)] = 1;
        }
        Ok(Self::build(
            MapKind::JDisjointToUnion,
            source,
            target,
            [
                IntMatrix::from_element(1, 2, 1),
                h1,
                IntMatrix::identity(2, 2),
            ],
        ))
    }

    /// Pinch from `M₁ # M₂`: `S¹ # S¹ ≅ S¹` for two circles, `Σ_{g₁+g₂}` for two surfaces.
    pub fn p_pinch_connected_sum(left: &SurfaceSpace, right: &SurfaceSpace) -> Result<Self> {
        let target = SurfaceSpace::wedge(left.clone(), right.clone())?;
        let (source, h1, h2) = match (left, right) {
            (SurfaceSpace::Circle, SurfaceSpace::Circle) => (
                SurfaceSpace::Circle,
                IntMatrix::from_element(2, 1, 1),
                IntMatrix::zeros(0, 0),
            ),
            (SurfaceSpace::Surface(g1), SurfaceSpace::Surface(g2)) => {
                let n = 2 * (g1 + g2) as usize;
                (
                    SurfaceSpace::Surface(g1 + g2),
                    IntMatrix::identity(n, n),
                    IntMatrix::from_element(2, 1, 1),
                )
            }
            _ => {
                return Err(Error::Validation(format!(
                    "connected sum needs two circles or two surfaces, got {left} and {right}"
                )))
            }
        };
        Ok(Self::build(
            MapKind::PPinchConnectedSum,
            source,
            target,
            [IntMatrix::identity(1, 1), h1, h2],
        ))
    }

    /// Pinch from `Σ_{g₁} ♮ Σ_{g₂} ≅ Σ_{g₁+g₂−1}`.
    ///
    /// The source basis starts with the handle `(C, δ)`, where `C` is the gluing
    /// circle and `δ` crosses it once on each side; then come the remaining
    /// handles of the first surface and of the second.
    pub fn p_pinch_natural_sum(g1: u32, g2: u32) -> Result<Self> {
        let target = SurfaceSpace::circle_union(g1, g2)?;
        let source = SurfaceSpace::Surface(g1 + g2 - 1);
        let (n1, n2) = (2 * g1 as usize, 2 * g2 as usize);
        let mut h1 = IntMatrix::zeros(n1 + n2 - 1, n1 + n2 - 2);
        // C ↦ a₁; δ ↦ b₁ + b₁'.
        h1[(0, 0)] = 1;
        h1[(1, 1)] = 1;
        h1[(n1, 1)] = 1;
        for i in 2..n1 {
            h1[(i, i)] = 1;
        }
        for i in 2..n2 {
            h1[(n1 + i - 1, n1 + i - 2)] = 1;
        }
        Ok(Self::build(
            MapKind::PPinchNaturalSum,
            source,
            target,
            [
                IntMatrix::identity(1, 1),
                h1,
                IntMatrix::from_element(2, 1, 1),
            ],
        ))
    }

    /// `id ∨ x₀ : M₁ ∨ M₂ → M₁`.
    pub fn q_crunch(left: &SurfaceSpace, right: &SurfaceSpace) -> Result<Self> {
        let source = SurfaceSpace::wedge(left.clone(), right.clone())?;
        let (l, s) = (left.ranks(), source.ranks());
        let keep = |d: usize| IntMatrix::from_fn(l[d], s[d], |i, j| (i == j) as i64);
        Ok(Self::build(
            MapKind::QCrunch,
            source,
            left.clone(),
            [keep(0), keep(1), keep(2)],
        ))
    }

    pub fn q0_constant(space: &SurfaceSpace) -> Self {
        let r = space.ranks();
        Self::build(
            MapKind::Q0Constant,
            space.clone(),
            SurfaceSpace::Point,
            [
                IntMatrix::from_element(1, r[0], 1),
                IntMatrix::zeros(0, r[1]),
                IntMatrix::zeros(0, r[2]),
            ],
        )
    }

    pub fn iota_basepoint(space: &SurfaceSpace) -> Self {
        let r = space.ranks();
        Self::build(
            MapKind::IotaBasepoint,
            SurfaceSpace::Point,
            space.clone(),
            [
                IntMatrix::from_fn(r[0], 1, |i, _| (i == 0) as i64),
                IntMatrix::zeros(r[1], 0),
                IntMatrix::zeros(r[2], 0),
            ],
        )
    }

    pub fn collapse(g1: u32, g2: u32) -> Self {
        let n1 = 2 * g1 as usize;
        let n = n1 + 2 * g2 as usize;
        Self::build(
            MapKind::Collapse,
            SurfaceSpace::Surface(g1 + g2),
            SurfaceSpace::Surface(g1),
            [
                IntMatrix::identity(1, 1),
                IntMatrix::from_fn(n1, n, |i, j| (i == j) as i64),
                IntMatrix::identity(1, 1),
            ],
        )
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &CanonicalMap) -> Result<Self> {
        if inner.target != self.source {
            return Err(Error::Structural(format!(
                "cannot compose: inner map lands in {}, outer map starts at {}",
                inner.target, self.source
            )));
        }
        let mut kinds = match &inner.kind {
            MapKind::Composite(k) => k.clone(),
            k => vec![k.clone()],
        };
        match &self.kind {
            MapKind::Composite(k) => kinds.extend(k.iter().cloned()),
            k => kinds.push(k.clone()),
        }
        Ok(Self::build(
            MapKind::Composite(kinds),
            inner.source.clone(),
            self.target.clone(),
            [0, 1, 2].map(|d| &self.h[d] * &inner.h[d]),
        ))
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn source(&self) -> &SurfaceSpace {
        &self.source
    }

    pub fn target(&self) -> &SurfaceSpace {
        &self.target
    }

    /// Induced matrix on `H_d`, `d ∈ {0, 1, 2}`.
    pub fn homology(&self, degree: usize) -> &IntMatrix {
        &self.h[degree]
    }

    /// Maps of connected spaces that send base point to base point fix `[1]`.
    pub fn is_pointed(&self) -> bool {
        self.h[0].nrows() >= 1 && self.h[0].ncols() >= 1 && self.h[0][(0, 0)] == 1
    }

    /// Same induced matrices, regardless of how the maps were built.
    pub fn same_action(&self, other: &CanonicalMap) -> bool {
        self.source == other.source && self.target == other.target && self.h == other.h
    }
}

/// `f_* x`, degree by degree.
pub fn pushforward(map: &CanonicalMap, x: &KClassVector) -> Result<KClassVector> {
    if x.space != map.source {
        return Err(Error::Structural(format!(
            "class lives on {}, map starts at {}",
            x.space, map.source
        )));
    }
    let apply = |m: &IntMatrix, v: &[i64]| -> Vec<i64> {
        (m * nalgebra::DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    };
    match x.parity {
        Parity::Even => KClassVector::even(
            map.target.clone(),
            &apply(&map.h[0], x.h0()),
            &apply(&map.h[2], x.h2()),
        ),
        Parity::Odd => KClassVector::odd(map.target.clone(), &apply(&map.h[1], x.h1())),
    }
}

fn euler(g: u32) -> i64 {
    2 - 2 * g as i64
}

/// One evaluated identity; `expect_equal` is false for claims that must fail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub g1: u32,
    pub g2: u32,
    pub lhs: Vec<i64>,
    pub rhs: Vec<i64>,
    pub expect_equal: bool,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        (self.lhs == self.rhs) == self.expect_equal
    }
}

impl std::fmt::Display for IdentityCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rel = if self.expect_equal { "==" } else { "!=" };
        write!(
            f,
            "{} (g1={}, g2={}): {:?} {rel} {:?} [{}]",
            self.name,
            self.g1,
            self.g2,
            self.lhs,
            self.rhs,
            if self.passed() { "ok" } else { "MISMATCH" }
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct KsumReport {
    pub checks: Vec<IdentityCheck>,
}

impl KsumReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(IdentityCheck::passed)
    }

    pub fn failures(&self) -> Vec<&IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }

    /// Distinct `(g₁, g₂)` pairs that were evaluated.
    pub fn genus_pairs(&self) -> usize {
        let mut pairs: Vec<_> = self.checks.iter().map(|c| (c.g1, c.g2)).collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs.len()
    }

    fn push(&mut self, name: &'static str, g: (u32, u32), lhs: &KClassVector, rhs: &KClassVector) {
        // Coordinates alone could coincide on different spaces; an empty side marks that.
        let rhs = if lhs.space == rhs.space && lhs.parity == rhs.parity {
            rhs.coords.clone()
        } else {
            Vec::new()
        };
        self.push_raw(name, g, lhs.coords.clone(), rhs, true);
    }

    fn push_raw(&mut self, name: &'static str, g: (u32, u32), lhs: Vec<i64>, rhs: Vec<i64>, eq: bool) {
        self.checks.push(IdentityCheck {
            name,
            g1: g.0,
            g2: g.1,
            lhs,
            rhs,
            expect_equal: eq,
        });
    }
}

/// Evaluates the addition identities over `0 ≤ g₁, g₂ ≤ MAX_GENUS`.
///
/// Identities involving `Σ_{g₁} ∪_{S¹} Σ_{g₂}` need a non-retractable circle on
/// each surface and are evaluated for `g₁, g₂ ≥ 1`.
pub fn verify_identities() -> Result<KsumReport> {
    verify_identities_up_to(MAX_GENUS)
}

pub fn verify_identities_up_to(max_genus: u32) -> Result<KsumReport> {
    let mut report = KsumReport::default();

    // j_*([D], [D]) = p_*[D] in K₁(S¹ ∨ S¹).
    let circle = SurfaceSpace::Circle;
    let j = CanonicalMap::j_disjoint_to_wedge(&circle, &circle)?;
    let p = CanonicalMap::p_pinch_connected_sum(&circle, &circle)?;
    let d = dirac_class();
    report.push(
        "dirac-wedge-addition",
        (0, 0),
        &pushforward(&j, &KClassVector::pair(&d, &d)?)?,
        &pushforward(&p, &d)?,
    );

    for g1 in 0..=max_genus {
        for g2 in 0..=max_genus {
            check_pair(&mut report, g1, g2)?;
        }
    }
    Ok(report)
}

fn check_pair(report: &mut KsumReport, g1: u32, g2: u32) -> Result<()> {
    let g = (g1, g2);
    let (s1, s2) = (SurfaceSpace::Surface(g1), SurfaceSpace::Surface(g2));
    let wedge = SurfaceSpace::wedge(s1.clone(), s2.clone())?;
    let dol1 = chern_dolbeault(g1);
    let dol2 = chern_dolbeault(g2);
    let dol_sum = chern_dolbeault(g1 + g2);
    let pt1 = basepoint_class(&s1);
    let pt_w = basepoint_class(&wedge);

    // [Σ_g]_K = [∂̄_g] + (g − 1)·ι[1].
    report.push(
        "fundamental-vs-dolbeault",
        g,
        &fundamental_k_class(&s1)?,
        &dol1.add_scaled(g1 as i64 - 1, &pt1)?,
    );

    // q₀_*[∂̄_g] = (1 − g)·[1].
    let q0 = CanonicalMap::q0_constant(&s1);
    report.push(
        "point-collapse-index",
        g,
        &pushforward(&q0, &dol1)?,
        &basepoint_class(&SurfaceSpace::Point).scaled(1 - g1 as i64),
    );

    // ι[1], [∂̄_{g₁}], [∂̄_{g₂}] form a basis of K₀(Σ_{g₁} ∨ Σ_{g₂}).
    let jw = CanonicalMap::j_disjoint_to_wedge(&s1, &s2)?;
    let zero1 = KClassVector::zero(s1.clone(), Parity::Even);
    let zero2 = KClassVector::zero(s2.clone(), Parity::Even);
    let in_wedge_1 = pushforward(&jw, &KClassVector::pair(&dol1, &zero2)?)?;
    let in_wedge_2 = pushforward(&jw, &KClassVector::pair(&zero1, &dol2)?)?;
    let basis = IntMatrix::from_columns(&[
        nalgebra::DVector::from_column_slice(pt_w.coords()),
        nalgebra::DVector::from_column_slice(in_wedge_1.coords()),
        nalgebra::DVector::from_column_slice(in_wedge_2.coords()),
    ]);
    report.push_raw("wedge-basis-unimodular", g, vec![det3(&basis).abs()], vec![1], true);

    // q_*[∂̄_{g₁}] = [∂̄_{g₁}], q_*[∂̄_{g₂}] = (1 − g₂)·ι[1].
    let q = CanonicalMap::q_crunch(&s1, &s2)?;
    report.push("crunch-first-summand", g, &pushforward(&q, &in_wedge_1)?, &dol1);
    report.push(
        "crunch-second-summand",
        g,
        &pushforward(&q, &in_wedge_2)?,
        &pt1.scaled(1 - g2 as i64),
    );

    // p_*[∂̄_{g₁+g₂}] = [∂̄_{g₁}] + [∂̄_{g₂}] − ι[1].
    let p = CanonicalMap::p_pinch_connected_sum(&s1, &s2)?;
    report.push(
        "pinch-dolbeault",
        g,
        &pushforward(&p, &dol_sum)?,
        &in_wedge_1.add(&in_wedge_2)?.add_scaled(-1, &pt_w)?,
    );

    // (q∘p)_*[∂̄_{g₁+g₂}] = [∂̄_{g₁}] − g₂·ι[1], and q∘p acts as the collapse map.
    let qp = q.compose(&p)?;
    report.push(
        "composite-dolbeault",
        g,
        &pushforward(&qp, &dol_sum)?,
        &dol1.add_scaled(-(g2 as i64), &pt1)?,
    );
    report.push(
        "composite-functoriality",
        g,
        &pushforward(&qp, &dol_sum)?,
        &pushforward(&q, &pushforward(&p, &dol_sum)?)?,
    );
    let collapse = CanonicalMap::collapse(g1, g2);
    report.push_raw(
        "composite-is-collapse",
        g,
        vec![qp.same_action(&collapse) as i64],
        vec![1],
        true,
    );

    // The corrected class does not change under f ↦ f # y₀.
    report.push(
        "corrected-class-well-defined",
        g,
        &pushforward(&qp, &dol_sum)?.add_scaled((g1 + g2) as i64 - 1, &pt1)?,
        &dol1.add_scaled(g1 as i64 - 1, &pt1)?,
    );

    // Fundamental classes are compatible under j and p for the connected sum...
    let fund1 = fundamental_k_class(&s1)?;
    let fund2 = fundamental_k_class(&s2)?;
    let fund_sum = fundamental_k_class(&SurfaceSpace::Surface(g1 + g2))?;
    let j_fund = pushforward(&jw, &KClassVector::pair(&fund1, &fund2)?)?;
    report.push(
        "connected-sum-fundamental",
        g,
        &j_fund,
        &pushforward(&p, &fund_sum)?,
    );
    // ...but Euler characteristics are not: they differ by 2 in H₀.
    let chi_pair = KClassVector::pair(
        &pt1.scaled(euler(g1)),
        &basepoint_class(&s2).scaled(euler(g2)),
    )?;
    let chi_sum = basepoint_class(&SurfaceSpace::Surface(g1 + g2)).scaled(euler(g1 + g2));
    report.push_raw(
        "connected-sum-euler-mismatch",
        g,
        pushforward(&jw, &chi_pair)?.h0().to_vec(),
        pushforward(&p, &chi_sum)?.h0().to_vec(),
        false,
    );

    // Sum through #: the corrected classes add.
    report.push(
        "connected-sum-corrected-additive",
        g,
        &pushforward(&p, &dol_sum)?.add_scaled((g1 + g2) as i64 - 1, &pt_w)?,
        &in_wedge_1
            .add_scaled(g1 as i64 - 1, &pt_w)?
            .add(&in_wedge_2.add_scaled(g2 as i64 - 1, &pt_w)?)?,
    );

    if g1 + g2 >= 1 {
        let natural_genus = g1 + g2 - 1;
        report.push_raw(
            "natural-sum-euler",
            g,
            vec![euler(natural_genus)],
            vec![euler(g1) + euler(g2)],
            true,
        );
    }

    if g1 >= 1 && g2 >= 1 {
        let natural_genus = g1 + g2 - 1;
        let ju = CanonicalMap::j_disjoint_to_union(g1, g2)?;
        let pu = CanonicalMap::p_pinch_natural_sum(g1, g2)?;
        report.push(
            "natural-sum-dolbeault-addition",
            g,
            &pushforward(&ju, &KClassVector::pair(&dol1, &dol2)?)?,
            &pushforward(&pu, &chern_dolbeault(natural_genus))?,
        );
        report.push(
            "natural-sum-fundamental",
            g,
            &pushforward(&ju, &KClassVector::pair(&fund1, &fund2)?)?,
            &pushforward(&pu, &fundamental_k_class(&SurfaceSpace::Surface(natural_genus))?)?,
        );
        // Sum through ♮: the base-point corrections match as integers.
        report.push_raw(
            "natural-sum-corrections",
            g,
            vec![1 - natural_genus as i64],
            vec![(1 - g1 as i64) + (1 - g2 as i64)],
            true,
        );
        // Both sum descriptions give the same fundamental class in H₂.
        report.push_raw(
            "sums-agree-in-h2",
            g,
            pushforward(&p, &fund_sum)?.h2().to_vec(),
            pushforward(&pu, &fundamental_k_class(&SurfaceSpace::Surface(natural_genus))?)?
                .h2()
                .to_vec(),
            true,
        );
    }
    Ok(())
}

fn det3(m: &IntMatrix) -> i64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dolbeault_examples() {
        assert_eq!(chern_dolbeault(0).coords(), &[1, 1]);
        assert_eq!(chern_dolbeault(1).coords(), &[0, 1]);
        assert_eq!(chern_dolbeault(3).coords(), &[-2, 1]);
    }

    #[test]
    fn fundamental_classes() {
        let c = fundamental_k_class(&SurfaceSpace::Circle).unwrap();
        assert_eq!(c.h1(), &[1]);
        assert_eq!(dirac_class().scaled(-1), c);

        let s2 = SurfaceSpace::Surface(2);
        let lhs = chern_dolbeault(2).add_scaled(1, &basepoint_class(&s2)).unwrap();
        assert_eq!(fundamental_k_class(&s2).unwrap(), lhs);
        assert_eq!(lhs.coords(), &[0, 1]);

        let s0 = SurfaceSpace::Surface(0);
        let lhs = chern_dolbeault(0).add_scaled(-1, &basepoint_class(&s0)).unwrap();
        assert_eq!(fundamental_k_class(&s0).unwrap(), lhs);

        assert!(matches!(
            fundamental_k_class(&SurfaceSpace::Point),
            Err(Error::Parity(_))
        ));
    }

    #[test]
    fn pushforward_examples() {
        for g in 0..=6 {
            let s = SurfaceSpace::Surface(g);
            let x = pushforward(&CanonicalMap::q0_constant(&s), &chern_dolbeault(g)).unwrap();
            assert_eq!(x.coords(), &[1 - g as i64]);
        }
        let (s1, s2) = (SurfaceSpace::Surface(2), SurfaceSpace::Surface(3));
        let q = CanonicalMap::q_crunch(&s1, &s2).unwrap();
        let j = CanonicalMap::j_disjoint_to_wedge(&s1, &s2).unwrap();
        let comp = KClassVector::pair(&KClassVector::zero(s1.clone(), Parity::Even), &chern_dolbeault(3)).unwrap();
        let x = pushforward(&q, &pushforward(&j, &comp).unwrap()).unwrap();
        assert_eq!(x.coords(), &[-2, 0]);

        let p = CanonicalMap::p_pinch_connected_sum(&s1, &s2).unwrap();
        let x = pushforward(&p, &chern_dolbeault(5)).unwrap();
        // [∂̄₂] + [∂̄₃] − ι[1] = (−1 − 2 − 1, 1, 1)
        assert_eq!(x.coords(), &[-4, 1, 1]);
    }

    #[test]
    fn mismatched_space_is_structural() {
        let q0 = CanonicalMap::q0_constant(&SurfaceSpace::Surface(1));
        assert!(matches!(
            pushforward(&q0, &chern_dolbeault(2)),
            Err(Error::Structural(_))
        ));
        let a = CanonicalMap::identity(&SurfaceSpace::Circle);
        assert!(matches!(a.compose(&q0), Err(Error::Structural(_))));
    }

    #[test]
    fn invalid_spaces() {
        assert!(SurfaceSpace::circle_union(0, 2).is_err());
        assert!(SurfaceSpace::wedge(SurfaceSpace::Point, SurfaceSpace::Circle).is_err());
        assert!(CanonicalMap::p_pinch_connected_sum(&SurfaceSpace::Circle, &SurfaceSpace::Surface(1)).is_err());
    }

    #[test]
    fn euler_characteristics_from_ranks() {
        for g1 in 1..=4 {
            for g2 in 1..=4 {
                assert_eq!(SurfaceSpace::Surface(g1).euler_characteristic(), euler(g1));
                // χ(A ∪_C B) = χ(A) + χ(B) − χ(S¹)
                assert_eq!(
                    SurfaceSpace::CircleUnion(g1, g2).euler_characteristic(),
                    euler(g1) + euler(g2)
                );
            }
        }
    }

    #[test]
    fn identity_and_pointed_maps() {
        let w = SurfaceSpace::wedge(SurfaceSpace::Surface(2), SurfaceSpace::Circle).unwrap();
        let id = CanonicalMap::identity(&w);
        let x = KClassVector::even(w.clone(), &[3], &[7]).unwrap();
        assert_eq!(pushforward(&id, &x).unwrap(), x);
        for m in [
            CanonicalMap::q_crunch(&SurfaceSpace::Surface(2), &SurfaceSpace::Circle).unwrap(),
            CanonicalMap::p_pinch_natural_sum(2, 3).unwrap(),
            CanonicalMap::collapse(1, 4),
        ] {
            assert!(m.is_pointed());
        }
    }

    #[test]
    fn natural_sum_h1_is_injective_with_cokernel_one() {
        // H₁(Σ♮) → H₁(union) must be injective; its image misses exactly one direction.
        let pu = CanonicalMap::p_pinch_natural_sum(2, 3).unwrap();
        let h1 = pu.homology(1).map(|v| v as f64);
        let rank = h1.rank(1e-9);
        assert_eq!(rank, h1.ncols());
        assert_eq!(h1.nrows() - rank, 1);
    }

    #[test]
    fn full_grid_passes() {
        let report = verify_identities().unwrap();
        for c in report.failures() {
            eprintln!("{c}");
        }
        assert!(report.passed());
        assert_eq!(report.genus_pairs(), 49);
        let ineq = report
            .checks
            .iter()
            .find(|c| c.name == "connected-sum-euler-mismatch" && c.g1 == 1 && c.g2 == 1)
            .unwrap();
        assert_eq!((ineq.lhs.as_slice(), ineq.rhs.as_slice()), (&[0][..], &[-2][..]));
    }
}
