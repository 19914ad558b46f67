use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use extlab::ksum::{
    chern_dolbeault, fundamental_k_class, pushforward, verify_identities_up_to, CanonicalMap,
    KClassVector, SurfaceSpace,
};
use extlab::linalg::{c, max_abs_diff};
use extlab::pairing::{
    commutator_norm_estimate, pair, pullback_loop, winding, FourierSeries, PairingResult,
    UnitaryLoop,
};
use extlab::spectral::eigenphases;
use extlab::vonneumann::{
    boundary_matrix_closed_form, boundary_matrix_numeric, build_extension, compute_deficiency,
    DeficiencySign,
};
use extlab::{Error, Partition, Result, C64};

use crate::config::{pairing_partition, ExperimentConfig, ExtensionSource, LabeledExtension, LoopSpec};
use crate::report::{fmt, round, spectrum_svg, Csv, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass,
    PropertyFailure,
    Unstable,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::PropertyFailure => 1,
            Status::Unstable => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    ThmMain,
    AdditionDirac,
    Ksum,
    Commutator,
}

pub struct Context {
    pub config: ExperimentConfig,
    /// From `--seed`, else the config.
    pub seed: Option<u64>,
    /// From `EXTLAB_TOL`, else the config.
    pub tolerance: Option<f64>,
    pub pool: rayon::ThreadPool,
    pub svg: bool,
}

pub struct Outcome {
    pub report: Report,
    pub status: Status,
    pub seed: u64,
    pub tolerance: Option<f64>,
}

impl Context {
    fn seed_or(&self, default: u64) -> u64 {
        self.seed.unwrap_or(default)
    }

    fn tol_or(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    /// Runs `f` over `items` on the pool; results come back in input order.
    fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(usize, &T) -> Result<R> + Sync) -> Result<Vec<R>> {
        self.pool
            .install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect::<Vec<_>>())
            .into_iter()
            .collect()
    }
}

fn anchors() -> Vec<ExtensionSource> {
    vec![ExtensionSource::Anchor("swap".into()), ExtensionSource::Anchor("identity".into())]
}

pub fn deficiency(ctx: &Context) -> Result<Outcome> {
    let tol = ctx.tol_or(1e-10);
    let seed = ctx.seed_or(0);
    let spec = ctx.config.operator_spec()?;
    let plus = compute_deficiency(&spec, DeficiencySign::Plus);
    let minus = compute_deficiency(&spec, DeficiencySign::Minus);
    let rp = plus.gram_residual()?;
    let rm = minus.gram_residual()?;

    let basis = |space: &extlab::vonneumann::DeficiencySpace| -> Value {
        let p = spec.effective_partition();
        space
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, &cst)| {
                let (a, b) = p.bounds(k);
                json!({"piece": [round(a), round(b)], "coefficient": round(cst), "exponent": space.sign.exponent()})
            })
            .collect()
    };
    let mut r = Report::new("deficiency");
    r.set("indices", json!([plus.index(), minus.index()]));
    // Normalizer of e^θ on the first piece; √(2/(e−1)) for the two-piece operator.
    r.set("omega0", round(minus.coefficients[0]));
    r.set("plus_basis", basis(&plus));
    r.set("minus_basis", basis(&minus));
    r.set("gram_residual", json!({"plus": round(rp), "minus": round(rm)}));
    let status = if rp.max(rm) <= tol { Status::Pass } else { Status::PropertyFailure };
    Ok(Outcome { report: r, status, seed, tolerance: Some(tol) })
}

pub fn boundary_matrix(ctx: &Context) -> Result<Outcome> {
    let tol = ctx.tol_or(1e-8);
    let seed = ctx.seed_or(0);
    let spec = ctx.config.operator_spec()?;
    let n = spec.deficiency_index();
    let exts = ctx.config.extensions_or(&anchors(), seed, n)?;
    let two_piece = **spec.effective_partition() == Partition::two_piece();

    let results = ctx.map(&exts, |i, e| {
        let ext = build_extension(&spec, &e.unitary)?;
        let numeric = boundary_matrix_numeric(&ext, seed.wrapping_add(i as u64))?;
        let closed = if two_piece { Some(boundary_matrix_closed_form(&e.unitary)?) } else { None };
        Ok((numeric, closed))
    })?;

    let mut table = Csv::new("boundary_matrix", &["extension", "source", "row", "col", "re", "im"]);
    let mut summary = Vec::new();
    let mut status = Status::Pass;
    for (e, (numeric, closed)) in exts.iter().zip(&results) {
        let mut sources = vec![("numeric", numeric.matrix.matrix())];
        if let Some(cl) = closed {
            sources.push(("closed", cl.matrix()));
        }
        for (name, m) in sources {
            for i in 0..n {
                for j in 0..n {
                    table.push(vec![
                        e.label.clone(),
                        name.into(),
                        i.to_string(),
                        j.to_string(),
                        fmt(m[(i, j)].re),
                        fmt(m[(i, j)].im),
                    ]);
                }
            }
        }
        let diff = closed.as_ref().map(|cl| max_abs_diff(numeric.matrix.matrix(), cl.matrix()));
        if diff.is_some_and(|d| d > tol) {
            status = Status::PropertyFailure;
        }
        summary.push(json!({
            "extension": e.label,
            "fit_residual": round(numeric.residual),
            "max_abs_diff": diff.map(round),
        }));
    }
    let mut r = Report::new("boundary-matrix");
    r.set("extensions", Value::Array(summary));
    r.tables.push(table);
    Ok(Outcome { report: r, status, seed, tolerance: Some(tol) })
}

pub fn spectrum(ctx: &Context) -> Result<Outcome> {
    let tol = ctx.tol_or(1e-9);
    let seed = ctx.seed_or(0);
    let spec = ctx.config.operator_spec()?;
    let window = ctx.config.window()?;
    let exts = ctx.config.extensions_or(&anchors(), seed, spec.deficiency_index())?;
    let spectra = ctx.map(&exts, |_, e| {
        let ext = build_extension(&spec, &e.unitary)?;
        eigenphases(ext.boundary(), ext.partition(), window)
    })?;

    let mut table = Csv::new("spectrum", &["extension", "lambda", "multiplicity", "residual"]);
    let mut summary = Vec::new();
    let mut status = Status::Pass;
    for (e, s) in exts.iter().zip(&spectra) {
        let worst = s.eigenvalues.iter().map(|v| v.residual).fold(0.0, f64::max);
        if worst > tol {
            status = Status::Unstable;
        }
        for v in &s.eigenvalues {
            table.push(vec![e.label.clone(), fmt(v.value), v.multiplicity.to_string(), fmt(v.residual)]);
        }
        summary.push(json!({
            "extension": e.label,
            "eigenvalues": s.count(),
            "distinct": s.eigenvalues.len(),
            "max_residual": round(worst),
        }));
    }
    let mut r = Report::new("spectrum");
    r.set("window", json!([round(window.0), round(window.1)]));
    r.set("extensions", Value::Array(summary));
    if exts.iter().any(|e| e.label == "identity") {
        r.set(
            "note",
            json!("the identity extension has spectrum 4πℤ with multiplicity 2: the swap spectrum \
                   2πℤ scaled by 2 and doubled, which represents the same K-homology class"),
        );
    }
    if ctx.svg {
        let rows: Vec<(String, Vec<(f64, usize)>)> = exts
            .iter()
            .zip(&spectra)
            .take(4)
            .map(|(e, s)| (e.label.clone(), s.eigenvalues.iter().map(|v| (v.value, v.multiplicity)).collect()))
            .collect();
        r.svg = Some(("spectrum.svg".into(), spectrum_svg(window, &rows)));
    }
    r.tables.push(table);
    Ok(Outcome { report: r, status, seed, tolerance: Some(tol) })
}

struct PairRow {
    loop_label: String,
    ext: LabeledExtension,
    winding: i64,
    result: PairingResult,
}

fn pair_sweep(ctx: &Context, exts: &[LabeledExtension], loops: &[LoopSpec]) -> Result<Vec<PairRow>> {
    let spec = ctx.config.operator_spec()?;
    let partition = pairing_partition(&spec);
    let opts = ctx.config.schedule.options();
    let tasks: Vec<(&LabeledExtension, &LoopSpec)> =
        exts.iter().flat_map(|e| loops.iter().map(move |l| (e, l))).collect();
    ctx.map(&tasks, |_, (e, l)| {
        let b = build_extension(&spec, &e.unitary)?.boundary().clone();
        let lp = match l.to_loop() {
            w @ UnitaryLoop::Wedge(..) => pullback_loop(&w)?,
            lp => lp,
        };
        let wn = winding(&lp)?;
        let result = pair(&lp, &b, &partition, &opts)?;
        Ok(PairRow { loop_label: l.label(), ext: (*e).clone(), winding: wn, result })
    })
}

fn pair_table(rows: &[PairRow]) -> Csv {
    let mut t = Csv::new(
        "pairing",
        &["loop", "extension", "b_seed", "index", "winding", "plateau", "stable", "compatible"],
    );
    for r in rows {
        let plateau: Vec<String> = r.result.plateau.iter().map(|e| e.index.to_string()).collect();
        t.push(vec![
            r.loop_label.clone(),
            r.ext.label.clone(),
            r.ext.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.result.index.to_string(),
            r.winding.to_string(),
            plateau.join(";"),
            r.result.stable.to_string(),
            r.result.compatible.to_string(),
        ]);
    }
    t
}

fn monomials() -> Vec<LoopSpec> {
    (-3..=3).map(LoopSpec::Monomial).collect()
}

pub fn pair_cmd(ctx: &Context) -> Result<Outcome> {
    let seed = ctx.seed_or(0);
    let spec = ctx.config.operator_spec()?;
    let exts = ctx
        .config
        .extensions_or(&[ExtensionSource::Anchor("swap".into())], seed, spec.deficiency_index())?;
    let loops = ctx.config.loops_or(monomials());
    let rows = pair_sweep(ctx, &exts, &loops)?;
    let unstable = rows.iter().filter(|r| !r.result.stable).count();
    let mut r = Report::new("pair");
    r.set("pairings", json!(rows.len()));
    r.set("unstable", json!(unstable));
    r.tables.push(pair_table(&rows));
    let status = if unstable > 0 { Status::Unstable } else { Status::Pass };
    Ok(Outcome { report: r, status, seed, tolerance: ctx.tolerance })
}

pub fn verify(ctx: &Context, suite: Suite) -> Result<Outcome> {
    match suite {
        Suite::ThmMain => verify_pairing(ctx, "thm-main", 4, 20, monomials()),
        Suite::AdditionDirac => {
            let wedges = (-2..=2).flat_map(|a| (-2..=2).map(move |b| LoopSpec::Wedge([a, b]))).collect();
            verify_pairing(ctx, "addition-dirac", 5, 5, wedges)
        }
        Suite::Ksum => verify_ksum(ctx),
        Suite::Commutator => verify_commutator(ctx),
    }
}

/// Every stable pairing must equal minus the winding number.
fn verify_pairing(ctx: &Context, name: &str, default_seed: u64, count: usize, loops: Vec<LoopSpec>) -> Result<Outcome> {
    let seed = ctx.seed_or(default_seed);
    let spec = ctx.config.operator_spec()?;
    let exts = ctx.config.extensions_or(
        &[ExtensionSource::Random { count, seed: None }],
        seed,
        spec.deficiency_index(),
    )?;
    let loops = ctx.config.loops_or(loops);
    let rows = pair_sweep(ctx, &exts, &loops)?;
    let failures: Vec<&PairRow> = rows
        .iter()
        .filter(|r| r.result.stable && r.result.index != -r.winding)
        .collect();
    let unstable: Vec<&PairRow> = rows.iter().filter(|r| !r.result.stable).collect();
    let describe = |rs: &[&PairRow]| -> Value {
        rs.iter()
            .map(|r| json!({"loop": r.loop_label, "extension": r.ext.label, "index": r.result.index, "winding": r.winding}))
            .collect()
    };
    let mut r = Report::new(&format!("verify {name}"));
    r.set("property", json!("index = -winding"));
    r.set("pairings", json!(rows.len()));
    r.set("passed", json!(rows.len() - failures.len() - unstable.len()));
    r.set("failures", describe(&failures));
    r.set("unstable", describe(&unstable));
    r.tables.push(pair_table(&rows));
    let status = if !failures.is_empty() {
        Status::PropertyFailure
    } else if !unstable.is_empty() {
        Status::Unstable
    } else {
        Status::Pass
    };
    Ok(Outcome { report: r, status, seed, tolerance: ctx.tolerance })
}

fn ints(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn verify_ksum(ctx: &Context) -> Result<Outcome> {
    let report = verify_identities_up_to(ctx.config.max_genus)?;
    let mut t = Csv::new("identities", &["name", "g1", "g2", "lhs", "rhs", "expect_equal", "passed"]);
    for ch in &report.checks {
        t.push(vec![
            ch.name.to_string(),
            ch.g1.to_string(),
            ch.g2.to_string(),
            ints(&ch.lhs),
            ints(&ch.rhs),
            ch.expect_equal.to_string(),
            ch.passed().to_string(),
        ]);
    }
    let failures: Vec<String> = report.failures().iter().map(|c| c.to_string()).collect();
    let mut r = Report::new("verify ksum");
    r.set("max_genus", json!(ctx.config.max_genus));
    r.set("genus_pairs", json!(report.genus_pairs()));
    r.set("checks", json!(report.checks.len()));
    r.set("failures", json!(failures));
    r.tables.push(t);
    let status = if report.passed() { Status::Pass } else { Status::PropertyFailure };
    Ok(Outcome { report: r, status, seed: ctx.seed_or(0), tolerance: ctx.tolerance })
}

/// A trigonometric polynomial of bandwidth 3 with `f(0) = z0`.
fn random_series(rng: &mut ChaCha8Rng, z0: C64) -> FourierSeries {
    let mut terms: Vec<(i64, C64)> = (-3i64..=3)
        .filter(|&m| m != 0)
        .map(|m| (m, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (1 + m.abs()) as f64))
        .collect();
    let partial: C64 = terms.iter().map(|t| t.1).sum();
    terms.push((0, z0 - partial));
    FourierSeries::new(terms)
}

/// `‖[f, T_B]‖ ≤ sup|f′|` on wedge pullbacks with a common base point.
fn verify_commutator(ctx: &Context) -> Result<Outcome> {
    let tol = ctx.tol_or(1e-6);
    let seed = ctx.seed_or(7);
    let spec = ctx.config.operator_spec()?;
    let count = ctx.config.test_functions;
    let mut default = anchors();
    default.push(ExtensionSource::Random { count: count.saturating_sub(2), seed: None });
    let exts = ctx.config.extensions_or(&default, seed, spec.deficiency_index())?;
    if exts.is_empty() {
        return Err(Error::Validation("commutator suite needs at least one extension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut functions = Vec::with_capacity(count);
    for i in 0..count {
        let z0 = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let f1 = random_series(&mut rng, z0);
        let f2 = random_series(&mut rng, z0);
        functions.push((i, f1, f2, &exts[i % exts.len()]));
    }
    let partition = spec.effective_partition().clone();
    let rows = ctx.map(&functions, |_, (i, f1, f2, e)| {
        let UnitaryLoop::Segmented(f) = pullback_loop(&UnitaryLoop::Wedge(f1.clone(), f2.clone()))? else {
            return Err(Error::Structural("pullback did not produce a segmented loop".into()));
        };
        let b = build_extension(&spec, &e.unitary)?.boundary().clone();
        let estimate = commutator_norm_estimate(&f, &b, &partition, 40, seed.wrapping_add(*i as u64))?;
        Ok((estimate, f.sup_derivative(4096)))
    })?;
    let mut t = Csv::new("commutator", &["function", "extension", "estimate", "bound", "passed"]);
    let mut failures = 0;
    for ((i, _, _, e), (est, bound)) in functions.iter().zip(&rows) {
        let ok = *est <= bound + tol;
        failures += usize::from(!ok);
        t.push(vec![i.to_string(), e.label.clone(), fmt(*est), fmt(*bound), ok.to_string()]);
    }
    let mut r = Report::new("verify commutator");
    r.set("property", json!("commutator estimate <= sup|f'| + tolerance"));
    r.set("functions", json!(count));
    r.set("failures", json!(failures));
    r.tables.push(t);
    let status = if failures == 0 { Status::Pass } else { Status::PropertyFailure };
    Ok(Outcome { report: r, status, seed, tolerance: Some(tol) })
}

/// Chern characters of the sum classes for every genus pair.
pub fn ksum(ctx: &Context) -> Result<Outcome> {
    let max = ctx.config.max_genus;
    let mut t = Csv::new("ksum", &["g1", "g2", "space", "class", "h0", "h1", "h2"]);
    let mut push = |g1: u32, g2: u32, class: &str, x: &KClassVector| {
        t.push(vec![
            g1.to_string(),
            g2.to_string(),
            x.space().to_string(),
            class.into(),
            ints(x.h0()),
            ints(x.h1()),
            ints(x.h2()),
        ]);
    };
    for g1 in 0..=max {
        for g2 in 0..=max {
            let (s1, s2) = (SurfaceSpace::surface(g1), SurfaceSpace::surface(g2));
            let p = CanonicalMap::p_pinch_connected_sum(&s1, &s2)?;
            let j = CanonicalMap::j_disjoint_to_wedge(&s1, &s2)?;
            push(g1, g2, "p*[dbar]", &pushforward(&p, &chern_dolbeault(g1 + g2))?);
            let sum = KClassVector::pair(&chern_dolbeault(g1), &chern_dolbeault(g2))?;
            push(g1, g2, "j*([dbar]+[dbar])", &pushforward(&j, &sum)?);
            let sigma = fundamental_k_class(p.source())?;
            push(g1, g2, "p*[fundamental]", &pushforward(&p, &sigma)?);
            let sum = KClassVector::pair(&fundamental_k_class(&s1)?, &fundamental_k_class(&s2)?)?;
            push(g1, g2, "j*([fundamental]+[fundamental])", &pushforward(&j, &sum)?);
        }
    }
    let mut r = Report::new("ksum");
    r.set("max_genus", json!(max));
    r.set("rows", json!(t.len()));
    r.tables.push(t);
    Ok(Outcome { report: r, status: Status::Pass, seed: ctx.seed_or(0), tolerance: ctx.tolerance })
}
