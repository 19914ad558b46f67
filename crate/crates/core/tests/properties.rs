use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use extlab::analysis::{inner_product_quadrature, GaussLegendre};
use extlab::ksum::{
    basepoint_class, chern_dolbeault, pushforward, CanonicalMap, KClassVector, Parity,
    SurfaceSpace,
};
use extlab::linalg::{c, eigenvalues_small, max_abs_diff, operator_norm, unitarity_defect};
use extlab::pairing::{pair, pullback_loop, winding, FourierSeries, PairingOptions, UnitaryLoop};
use extlab::spectral::{eigenbasis, eigenphases};
use extlab::vonneumann::{build_extension, BoundaryMatrix, ExtensionUnitary, OperatorSpec};
use extlab::{inner_product, ExponentialAtom, Partition, PiecewiseFunction, C64};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_c64(r: &mut ChaCha8Rng, scale: f64) -> C64 {
    c(r.gen_range(-scale..scale), r.gen_range(-scale..scale))
}

fn random_function(partition: &Arc<Partition>, atoms: usize, r: &mut ChaCha8Rng) -> PiecewiseFunction {
    let atoms = (0..atoms)
        .map(|_| {
            ExponentialAtom::new(
                r.gen_range(0..partition.pieces()),
                random_c64(r, 1.0),
                random_c64(r, 7.0),
            )
        })
        .collect();
    PiecewiseFunction::from_atoms(partition.clone(), atoms).unwrap()
}

fn uneven_partition(r: &mut ChaCha8Rng) -> Arc<Partition> {
    let a = r.gen_range(0.1..0.45);
    let b = r.gen_range(0.55..0.9);
    Arc::new(Partition::new(vec![0.0, a, b, 1.0]).unwrap())
}

/// `J_k(x)` from its power series; fine for `|x| ≤ 1`.
fn bessel_j(k: i64, x: f64) -> f64 {
    let n = k.unsigned_abs();
    let mut term = (0.5 * x).powi(n as i32) / (1..=n).map(|i| i as f64).product::<f64>();
    let mut sum = term;
    for m in 1..30u64 {
        term *= -(0.25 * x * x) / (m as f64 * (m + n) as f64);
        sum += term;
    }
    if k < 0 && n % 2 == 1 {
        -sum
    } else {
        sum
    }
}

/// `e^{iε·sin 2πθ} = Σ_k J_k(ε)·e^{2πikθ}`.
fn jacobi_anger(eps: f64) -> FourierSeries {
    FourierSeries::new((-14..=14).map(|k| (k, c(bessel_j(k, eps), 0.0))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_sesquilinear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let mut r = rng(seed);
        let p = uneven_partition(&mut r);
        let (f, g, h) = (random_function(&p, 5, &mut r), random_function(&p, 5, &mut r), random_function(&p, 5, &mut r));
        let alpha = c(a, b);
        let lhs = inner_product(&f.scaled(alpha).add(&g).unwrap(), &h).unwrap();
        let rhs = alpha.conj() * inner_product(&f, &h).unwrap() + inner_product(&g, &h).unwrap();
        let scale = 1.0 + lhs.norm();
        prop_assert!((lhs - rhs).norm() < 1e-12 * scale, "{lhs} vs {rhs}");
        let swapped = inner_product(&h, &f).unwrap().conj();
        prop_assert!((swapped - inner_product(&f, &h).unwrap()).norm() < 1e-12 * scale);
    }

    #[test]
    fn closed_form_matches_quadrature(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = uneven_partition(&mut r);
        let mk = |r: &mut ChaCha8Rng| {
            let atoms = (0..3)
                .map(|_| {
                    let mu = loop {
                        let z = random_c64(r, 10.0);
                        if z.norm() <= 10.0 { break z; }
                    };
                    ExponentialAtom::new(r.gen_range(0..3), random_c64(r, 1.0), mu)
                })
                .collect();
            PiecewiseFunction::from_atoms(p.clone(), atoms).unwrap()
        };
        let (f, g) = (mk(&mut r), mk(&mut r));
        let closed = inner_product(&f, &g).unwrap();
        let quad = inner_product_quadrature(&f, &g).unwrap();
        // Exponents up to |μ| = 10 reach e^20, so the bound is taken relative to the value.
        prop_assert!((closed - quad).norm() < 1e-10 * closed.norm().max(1.0), "{closed} vs {quad}");
    }

    #[test]
    fn inner_product_is_positive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = uneven_partition(&mut r);
        let f = random_function(&p, 5, &mut r);
        let ff = inner_product(&f, &f).unwrap();
        prop_assert!(ff.im.abs() < 1e-12 * (1.0 + ff.re));
        // Distinct exponents on a piece are linearly independent, so the norm cannot vanish.
        let gl = GaussLegendre::new(64);
        let sampled: f64 = (0..3)
            .map(|k| {
                let (a, b) = p.bounds(k);
                gl.integrate(a, b, |t| {
                    let v: C64 = f.atoms().iter().filter(|x| x.piece == k).map(|x| x.eval_unrestricted(t)).sum();
                    c(v.norm_sqr(), 0.0)
                })
                .re
            })
            .sum();
        prop_assert!(ff.re > 0.0);
        prop_assert!((ff.re - sampled).abs() < 1e-10 * (1.0 + sampled));
        prop_assert_eq!(inner_product(&PiecewiseFunction::zero(p.clone()), &PiecewiseFunction::zero(p)).unwrap(), c(0.0, 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn boundary_matrices_are_unitary_and_symmetric(seed in any::<u64>(), uneven in any::<bool>()) {
        let mut r = rng(seed);
        let spec = if uneven {
            OperatorSpec::all_knots(Partition::new(vec![0.0, 0.2, 0.55, 1.0]).unwrap())
        } else {
            OperatorSpec::default()
        };
        let n = spec.deficiency_index();
        let u = ExtensionUnitary::random(n, &mut r);
        let ext = build_extension(&spec, &u).unwrap();
        prop_assert!(unitarity_defect(ext.boundary().matrix()) < 1e-9);
        for _ in 0..5 {
            let f = ext.random_domain_vector(&mut r);
            let g = ext.random_domain_vector(&mut r);
            prop_assert!(ext.symmetry_defect(&f, &g).unwrap() < 1e-9);
        }
    }

    #[test]
    fn distinct_unitaries_give_distinct_boundaries(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = OperatorSpec::default();
        let u1 = ExtensionUnitary::random(2, &mut r);
        let u2 = ExtensionUnitary::random(2, &mut r);
        prop_assume!(operator_norm(&(u1.matrix() - u2.matrix())) > 1e-6);
        let b1 = build_extension(&spec, &u1).unwrap();
        let b2 = build_extension(&spec, &u2).unwrap();
        prop_assert!(max_abs_diff(b1.boundary().matrix(), b2.boundary().matrix()) > 1e-9);
    }

    #[test]
    fn eigenphases_follow_boundary_eigenvalues(seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = BoundaryMatrix::random(2, &mut r);
        let window = (-30.0, 30.0);
        let spec = eigenphases(&b, &Partition::two_piece(), window).unwrap();
        // λ ≡ −2φ (mod 4π) for each eigenvalue e^{iφ} of B.
        let mut expected = Vec::new();
        for z in eigenvalues_small(b.matrix()).unwrap() {
            let base = -2.0 * z.arg();
            for m in -4..=4 {
                let lam = base + 4.0 * PI * m as f64;
                if lam >= window.0 && lam <= window.1 { expected.push(lam); }
            }
        }
        expected.sort_by(f64::total_cmp);
        let got = spec.values();
        prop_assert_eq!(got.len(), expected.len());
        for (a, e) in got.iter().zip(&expected) {
            prop_assert!((a - e).abs() < 1e-9, "{a} vs {e}");
        }
    }

    #[test]
    fn adjoint_reflects_spectrum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = uneven_partition(&mut r);
        let b = BoundaryMatrix::random(3, &mut r);
        let s = eigenphases(&b, &p, (-25.0, 25.0)).unwrap();
        let t = eigenphases(&b.adjoint(), &p, (-25.0, 25.0)).unwrap().reflected();
        prop_assert_eq!(s.count(), t.count());
        for (x, y) in s.values().iter().zip(t.values()) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn eigenfunctions_are_orthonormal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = uneven_partition(&mut r);
        let b = BoundaryMatrix::random(3, &mut r);
        let basis = eigenbasis(&b, &p, (-20.0, 20.0)).unwrap();
        for (i, x) in basis.iter().enumerate() {
            for y in &basis[i..] {
                let ip = inner_product(&x.function, &y.function).unwrap();
                let target = if std::ptr::eq(x, y) { 1.0 } else { 0.0 };
                prop_assert!((ip - c(target, 0.0)).norm() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pairing_is_minus_winding_on_fourier_loops(seed in any::<u64>(), n in -3i64..=3) {
        let mut r = rng(seed);
        // z^n·(1 + small polynomial): |u| ≥ 0.2 everywhere, so the winding is n.
        let mut terms = vec![(n, c(1.0, 0.0))];
        let mut budget = 0.8;
        for k in [-2i64, -1, 1, 2] {
            let z = random_c64(&mut r, 1.0);
            let z = z * (r.gen_range(0.0..budget) / z.norm().max(1e-12));
            budget -= z.norm();
            terms.push((n + k, z));
        }
        let lp = UnitaryLoop::Circle(FourierSeries::new(terms));
        prop_assert_eq!(winding(&lp).unwrap(), n);
        let res = pair(&lp, &BoundaryMatrix::swap(), &Arc::new(Partition::two_piece()), &PairingOptions::default()).unwrap();
        prop_assert!(res.stable && res.compatible);
        prop_assert_eq!(res.index, -n);
    }

    #[test]
    fn homotopy_and_addition_on_wedge_loops(seed in any::<u64>(), n1 in -2i64..=2, n2 in -2i64..=2, eps in 0.0..0.3f64) {
        let mut r = rng(seed);
        let b = BoundaryMatrix::random(2, &mut r);
        let p = Arc::new(Partition::two_piece());
        let bump = jacobi_anger(eps);
        let plain = pullback_loop(&UnitaryLoop::wedge_monomials(n1, n2)).unwrap();
        let deformed = pullback_loop(&UnitaryLoop::Wedge(
            FourierSeries::monomial(n1).multiply(&bump),
            FourierSeries::monomial(n2).multiply(&bump),
        )).unwrap();
        let opts = PairingOptions::default();
        let a = pair(&plain, &b, &p, &opts).unwrap();
        let d = pair(&deformed, &b, &p, &opts).unwrap();
        prop_assert!(a.stable && d.stable);
        prop_assert_eq!(a.index, -(n1 + n2));
        prop_assert_eq!(d.index, a.index);
        // Every cutoff after a run of three agreeing ones agrees too.
        for res in [&a, &d] {
            let idx: Vec<i64> = res.plateau.iter().map(|e| e.index).collect();
            if let Some(start) = (0..idx.len().saturating_sub(2)).find(|&i| idx[i] == idx[i + 1] && idx[i] == idx[i + 2]) {
                prop_assert!(idx[start..].iter().all(|&v| v == idx[start]), "{idx:?}");
            }
        }
    }

    #[test]
    fn homotopy_on_circle_loops_with_swap(n in -3i64..=3, eps in 0.0..0.3f64) {
        let p = Arc::new(Partition::two_piece());
        let lp = UnitaryLoop::Circle(FourierSeries::monomial(n).multiply(&jacobi_anger(eps)));
        let res = pair(&lp, &BoundaryMatrix::swap(), &p, &PairingOptions::default()).unwrap();
        prop_assert!(res.stable);
        prop_assert_eq!(res.index, -n);
    }
}

fn even_class(space: &SurfaceSpace, r: &mut ChaCha8Rng) -> KClassVector {
    let coords = (0..space.even_rank()).map(|_| r.gen_range(-20..=20)).collect();
    KClassVector::new(space.clone(), Parity::Even, coords).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ksum_functoriality(g1 in 0u32..=6, g2 in 0u32..=6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let (s1, s2) = (SurfaceSpace::Surface(g1), SurfaceSpace::Surface(g2));
        let q = CanonicalMap::q_crunch(&s1, &s2).unwrap();
        let p = CanonicalMap::p_pinch_connected_sum(&s1, &s2).unwrap();
        let qp = q.compose(&p).unwrap();
        prop_assert!(qp.same_action(&CanonicalMap::collapse(g1, g2)));
        let x = even_class(&SurfaceSpace::Surface(g1 + g2), &mut r);
        prop_assert_eq!(pushforward(&qp, &x).unwrap(), pushforward(&q, &pushforward(&p, &x).unwrap()).unwrap());
        let expected = chern_dolbeault(g1).add_scaled(-(g2 as i64), &basepoint_class(&s1)).unwrap();
        prop_assert_eq!(pushforward(&qp, &chern_dolbeault(g1 + g2)).unwrap(), expected);
    }

    #[test]
    fn ksum_identity_and_pointed_maps(g1 in 1u32..=6, g2 in 1u32..=6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let (s1, s2) = (SurfaceSpace::Surface(g1), SurfaceSpace::Surface(g2));
        let union = SurfaceSpace::circle_union(g1, g2).unwrap();
        let wedge = SurfaceSpace::wedge(s1.clone(), s2.clone()).unwrap();
        for space in [&s1, &union, &wedge] {
            let x = even_class(space, &mut r);
            prop_assert_eq!(pushforward(&CanonicalMap::identity(space), &x).unwrap(), x);
        }
        let pointed = [
            CanonicalMap::q_crunch(&s1, &s2).unwrap(),
            CanonicalMap::p_pinch_connected_sum(&s1, &s2).unwrap(),
            CanonicalMap::p_pinch_natural_sum(g1, g2).unwrap(),
            CanonicalMap::collapse(g1, g2),
            CanonicalMap::q0_constant(&s1),
            CanonicalMap::iota_basepoint(&union),
        ];
        for m in &pointed {
            let pt = basepoint_class(m.source());
            prop_assert_eq!(pushforward(m, &pt).unwrap(), basepoint_class(m.target()));
        }
    }
}
