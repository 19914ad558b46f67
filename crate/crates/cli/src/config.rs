//! Experiment configuration: a single JSON document, every field optional.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use extlab::linalg::{c, CMatrix};
use extlab::pairing::{FourierSeries, PairingOptions, UnitaryLoop};
use extlab::vonneumann::{ExtensionUnitary, OperatorSpec};
use extlab::{Error, Partition, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Partition endpoints, `0 = t₀ < … < t_n = 1`.
    pub partition: Vec<f64>,
    /// Indices of constrained knots; all endpoints when absent.
    pub knots: Option<Vec<usize>>,
    /// Extension unitaries. Empty means the command's default set.
    pub extensions: Vec<ExtensionSource>,
    /// Loops to pair. Empty means the command's default set.
    pub loops: Vec<LoopSpec>,
    pub window: [f64; 2],
    pub schedule: Schedule,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub max_genus: u32,
    /// Number of random test functions for the commutator suite.
    pub test_functions: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            partition: vec![0.0, 0.5, 1.0],
            knots: None,
            extensions: Vec::new(),
            loops: Vec::new(),
            window: [-30.0, 30.0],
            schedule: Schedule::default(),
            tolerance: None,
            seed: None,
            max_genus: 6,
            test_functions: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ExtensionSource {
    /// `"swap"` or `"identity"`.
    Anchor(String),
    /// Row-major `[[ [re, im], … ], … ]`.
    Matrix(Vec<Vec<[f64; 2]>>),
    Random {
        count: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LoopSpec {
    Monomial(i64),
    /// `(z^{n₁}, z^{n₂})` on the wedge, pulled back along the pinch map.
    Wedge([i64; 2]),
    /// Terms `[k, re, im]`.
    Fourier(Vec<(i64, f64, f64)>),
    WedgeFourier(Vec<(i64, f64, f64)>, Vec<(i64, f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    /// Spectral cutoffs in units of π.
    pub cutoffs_over_pi: Vec<f64>,
    pub kernel_threshold: f64,
    pub plateau: usize,
    pub min_separation: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        let d = PairingOptions::default();
        Self {
            cutoffs_over_pi: d.cutoffs.iter().map(|x| x / std::f64::consts::PI).collect(),
            kernel_threshold: d.kernel_threshold,
            plateau: d.plateau,
            min_separation: d.min_separation,
        }
    }
}

impl Schedule {
    pub fn options(&self) -> PairingOptions {
        PairingOptions {
            cutoffs: self.cutoffs_over_pi.iter().map(|x| x * std::f64::consts::PI).collect(),
            kernel_threshold: self.kernel_threshold,
            margin: None,
            plateau: self.plateau,
            min_separation: self.min_separation,
        }
    }
}

/// A resolved extension with a stable label for reports.
#[derive(Debug, Clone)]
pub struct LabeledExtension {
    pub label: String,
    /// Seed of the random draw, if any.
    pub seed: Option<u64>,
    pub unitary: ExtensionUnitary,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("invalid config {}: {e}", path.display())))
    }

    /// Canonical JSON of the fully defaulted config; the hash is taken over these bytes.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn operator_spec(&self) -> Result<OperatorSpec> {
        let partition = Partition::new(self.partition.clone())?;
        match &self.knots {
            Some(k) => OperatorSpec::new(partition, k.clone()),
            None => Ok(OperatorSpec::all_knots(partition)),
        }
    }

    pub fn window(&self) -> Result<(f64, f64)> {
        let [a, b] = self.window;
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::Validation(format!("window [{a}, {b}] is not an interval")));
        }
        Ok((a, b))
    }

    /// Extensions in config order, falling back to `default` when none are configured.
    pub fn extensions_or(&self, default: &[ExtensionSource], seed: u64, n: usize) -> Result<Vec<LabeledExtension>> {
        let sources = if self.extensions.is_empty() { default } else { &self.extensions };
        let mut out = Vec::new();
        for src in sources {
            match src {
                ExtensionSource::Anchor(name) => {
                    let unitary = match name.as_str() {
                        "swap" if n == 2 => ExtensionUnitary::swap(),
                        "identity" => ExtensionUnitary::identity(n),
                        _ => {
                            return Err(Error::Validation(format!(
                                "unknown anchor {name:?} for deficiency index {n}"
                            )))
                        }
                    };
                    out.push(LabeledExtension { label: name.clone(), seed: None, unitary });
                }
                ExtensionSource::Matrix(rows) => {
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(Error::Validation(format!("extension matrix must be {n}×{n}")));
                    }
                    let m = CMatrix::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1]));
                    let label = format!("matrix{}", out.len());
                    out.push(LabeledExtension { label, seed: None, unitary: ExtensionUnitary::new(m)? });
                }
                ExtensionSource::Random { count, seed: s } => {
                    let s = s.unwrap_or(seed);
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    for i in 0..*count {
                        out.push(LabeledExtension {
                            label: format!("random{s}-{i:02}"),
                            seed: Some(s),
                            unitary: ExtensionUnitary::random(n, &mut rng),
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn loops_or(&self, default: Vec<LoopSpec>) -> Vec<LoopSpec> {
        if self.loops.is_empty() {
            default
        } else {
            self.loops.clone()
        }
    }
}

fn series(terms: &[(i64, f64, f64)]) -> FourierSeries {
    FourierSeries::new(terms.iter().map(|&(k, re, im)| (k, c(re, im))).collect())
}

impl LoopSpec {
    pub fn label(&self) -> String {
        match self {
            LoopSpec::Monomial(n) => format!("z^{n}"),
            LoopSpec::Wedge([a, b]) => format!("z^{a}∨z^{b}"),
            LoopSpec::Fourier(t) => format!("fourier[{}]", t.len()),
            LoopSpec::WedgeFourier(f, g) => format!("wedge-fourier[{}∨{}]", f.len(), g.len()),
        }
    }

    pub fn to_loop(&self) -> UnitaryLoop {
        match self {
            LoopSpec::Monomial(n) => UnitaryLoop::monomial(*n),
            LoopSpec::Wedge([a, b]) => UnitaryLoop::wedge_monomials(*a, *b),
            LoopSpec::Fourier(t) => UnitaryLoop::Circle(series(t)),
            LoopSpec::WedgeFourier(f, g) => UnitaryLoop::Wedge(series(f), series(g)),
        }
    }
}

/// Partition used for pairing: the effective one of the operator.
pub fn pairing_partition(spec: &OperatorSpec) -> Arc<Partition> {
    spec.effective_partition().clone()
}
