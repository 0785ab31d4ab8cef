//! Simple, noisy and ordinary Kriging on top of a [`KernelSpec`].

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::additive::ComponentIntegrals;
use crate::error::{check_dim, Error, Result};
use crate::kernels::{cross_cov, gram_matrix, Design, KernelSpec};
use crate::linalg::CholeskyFactor;

/// Default relative eigenvalue threshold for rank-deficiency detection.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Null-vector entries below this magnitude are not considered implicated.
const SUPPORT_TOL: f64 = 1e-8;

/// Trend of the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TrendMode {
    /// Known constant mean.
    Simple { mu: f64 },
    /// Unknown constant mean, estimated by generalized least squares.
    Ordinary,
}

impl TrendMode {
    pub fn simple(mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("simple trend mean must be finite"));
        }
        Ok(TrendMode::Simple { mu })
    }
}

/// Outcome of [`detect_rank_deficiency`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub deficient: bool,
    /// Unit-norm eigenvectors of the noise-free Gram with (relatively) null eigenvalue.
    pub null_vectors: Vec<Vec<f64>>,
    /// Per null vector, the rows with a non-negligible coefficient.
    pub implicated_points: Vec<Vec<usize>>,
    /// Rows whose joint removal restores a full-rank Gram matrix.
    pub removable: Vec<usize>,
}

impl RankReport {
    /// Human-readable linear relations, e.g. `-0.5·x1 + 0.5·x2 + 0.5·x3 - 0.5·x4 = 0`.
    pub fn relations(&self) -> Vec<String> {
        self.null_vectors
            .iter()
            .zip(&self.implicated_points)
            .map(|(v, idx)| {
                let scale = idx.iter().map(|&i| v[i].abs()).fold(0.0, f64::max);
                let mut s = String::new();
                for (k, &i) in idx.iter().enumerate() {
                    let c = v[i] / scale;
                    let sign = if c < 0.0 { "-" } else if k > 0 { "+" } else { "" };
                    if k > 0 {
                        s.push(' ');
                    }
                    s.push_str(&format!("{sign}{:.4}·Z(x{})", c.abs(), i + 1));
                }
                s.push_str(" = 0");
                s
            })
            .collect()
    }
}

/// Find the null directions of the noise-free Gram matrix.
///
/// An eigenvector is reported when its eigenvalue is at most `tol` times the
/// largest eigenvalue.
pub fn detect_rank_deficiency(spec: &KernelSpec, design: &Design, tol: f64) -> Result<RankReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid("rank tolerance must be positive"));
    }
    let k = gram_matrix(spec, design, false)?;
    let n = k.nrows();
    if n == 0 {
        return Ok(RankReport {
            deficient: false,
            null_vectors: vec![],
            implicated_points: vec![],
            removable: vec![],
        });
    }
    let eig = SymmetricEigen::new(k);
    let lambda_max = eig.eigenvalues.max();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut null_vectors = Vec::new();
    for &j in &order {
        if eig.eigenvalues[j] > tol * lambda_max {
            break;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        // First implicated coefficient is negative, matching the usual way of
        // writing the relation.
        if let Some(first) = v.iter().find(|c| c.abs() > SUPPORT_TOL) {
            if *first > 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
        }
        null_vectors.push(v);
    }
    let implicated_points = null_vectors
        .iter()
        .map(|v| {
            (0..n)
                .filter(|&i| v[i].abs() > SUPPORT_TOL)
                .collect::<Vec<_>>()
        })
        .collect();
    let removable = removable_rows(&null_vectors, n);
    Ok(RankReport {
        deficient: !null_vectors.is_empty(),
        null_vectors,
        implicated_points,
        removable,
    })
}

/// Pick one row per null vector such that the selected rows of the null-space
/// basis form an invertible square block. Deleting those rows leaves no
/// nonzero null vector supported on the remaining rows.
fn removable_rows(null_vectors: &[Vec<f64>], n: usize) -> Vec<usize> {
    let k = null_vectors.len();
    if k == 0 {
        return vec![];
    }
    // basis: n × k, eliminated column by column with row pivoting.
    let mut basis = DMatrix::from_fn(n, k, |i, j| null_vectors[j][i]);
    let mut chosen = Vec::with_capacity(k);
    for col in 0..k {
        let mut pivot = None;
        let mut best = 0.0;
        for row in 0..n {
            if chosen.contains(&row) {
                continue;
            }
            let a = basis[(row, col)].abs();
            // later rows win near-ties so the last listed point is proposed
            if a >= best - 1e-12 && a > SUPPORT_TOL {
                best = a.max(best);
                pivot = Some(row);
            }
        }
        let Some(p) = pivot else { break };
        chosen.push(p);
        for c in col + 1..k {
            let factor = basis[(p, c)] / basis[(p, col)];
            for r in 0..n {
                basis[(r, c)] -= factor * basis[(r, col)];
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// A Kriging model conditioned on observations.
///
/// Immutable after construction; prediction only reads it.
#[derive(Debug, Clone)]
pub struct GpModel {
    spec: KernelSpec,
    design: Design,
    observations: DVector<f64>,
    trend: TrendMode,
    factor: CholeskyFactor,
    dual_weights: DVector<f64>,
    trend_estimate: f64,
    /// `K⁻¹1` and `1ᵀK⁻¹1`, only for ordinary trend.
    ones: Option<(DVector<f64>, f64)>,
    noise_matrix: bool,
    pub(crate) integrals: Vec<OnceLock<ComponentIntegrals>>,
}

/// Condition a GP on observations `F` at the design sites.
///
/// With zero noise and an additive kernel the design is first audited for the
/// algebraic rank deficiency of additive kernels; a deficient design is
/// refused with the report attached.
pub fn fit(spec: &KernelSpec, design: &Design, f: &[f64], trend: TrendMode) -> Result<GpModel> {
    check_inputs(spec, design, f)?;
    if spec.noise() == 0.0 && spec.is_additive() {
        let report = detect_rank_deficiency(spec, design, DEFAULT_RANK_TOL)?;
        if report.deficient {
            return Err(Error::SingularDesign(Box::new(report)));
        }
    }
    let gram = gram_matrix(spec, design, true)?;
    GpModel::from_gram(spec, design, f, trend, gram, false)
}

/// Condition on `Z(X) + ε = F` with a general Gaussian noise covariance `noise`
/// (the scalar noise of `spec` is ignored).
pub fn fit_with_noise_matrix(
    spec: &KernelSpec,
    design: &Design,
    f: &[f64],
    trend: TrendMode,
    noise: &DMatrix<f64>,
) -> Result<GpModel> {
    check_inputs(spec, design, f)?;
    let n = design.n();
    if noise.nrows() != n || noise.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: noise.nrows(),
        });
    }
    let gram = gram_matrix(spec, design, false)? + noise;
    GpModel::from_gram(spec, design, f, trend, gram, true)
}

fn check_inputs(spec: &KernelSpec, design: &Design, f: &[f64]) -> Result<()> {
    check_dim(spec.dim(), design.dim())?;
    if design.is_empty() {
        return Err(Error::invalid("cannot fit on an empty design"));
    }
    check_dim(design.n(), f.len())?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("observations must be finite"));
    }
    Ok(())
}

impl GpModel {
    fn from_gram(
        spec: &KernelSpec,
        design: &Design,
        f: &[f64],
        trend: TrendMode,
        gram: DMatrix<f64>,
        noise_matrix: bool,
    ) -> Result<Self> {
        if let TrendMode::Simple { mu } = trend {
            if !mu.is_finite() {
                return Err(Error::invalid("simple trend mean must be finite"));
            }
        }
        let n = design.n();
        let factor = CholeskyFactor::new(gram)?;
        let obs = DVector::from_column_slice(f);
        let (trend_estimate, ones) = match trend {
            TrendMode::Simple { mu } => (mu, None),
            TrendMode::Ordinary => {
                let u = factor.solve(&DVector::from_element(n, 1.0));
                let denom = u.sum();
                if !(denom.is_finite() && denom > 0.0) {
                    return Err(Error::Numerical("degenerate GLS trend estimate".into()));
                }
                (u.dot(&obs) / denom, Some((u, denom)))
            }
        };
        let centered = obs.add_scalar(-trend_estimate);
        let dual_weights = factor.solve(&centered);
        Ok(GpModel {
            spec: spec.clone(),
            design: design.clone(),
            observations: obs,
            trend,
            factor,
            dual_weights,
            trend_estimate,
            ones,
            noise_matrix,
            integrals: (0..spec.dim()).map(|_| OnceLock::new()).collect(),
        })
    }

    /// Unconditioned model (no observations) with a known mean.
    pub fn prior(spec: &KernelSpec, mu: f64) -> Result<Self> {
        let design = Design::empty(spec.dim())?;
        Self::from_gram(
            spec,
            &design,
            &[],
            TrendMode::simple(mu)?,
            DMatrix::zeros(0, 0),
            false,
        )
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.observations
    }

    pub fn trend(&self) -> TrendMode {
        self.trend
    }

    /// Trend value: `mu` for simple Kriging, the GLS estimate for ordinary Kriging.
    pub fn trend_estimate(&self) -> f64 {
        self.trend_estimate
    }

    pub fn dual_weights(&self) -> &DVector<f64> {
        &self.dual_weights
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        let k = cross_cov(&self.spec, &self.design, x)?;
        Ok(self.trend_estimate + k.dot(&self.dual_weights))
    }

    /// Prediction variance of the latent process (observation noise excluded).
    pub fn predict_var(&self, x: &[f64]) -> Result<f64> {
        let k = cross_cov(&self.spec, &self.design, x)?;
        let prior = self.spec.eval_unchecked(x, x);
        self.variance_from_cross_cov(prior, &k)
    }

    /// Mean and variance in one pass.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let k = cross_cov(&self.spec, &self.design, x)?;
        let prior = self.spec.eval_unchecked(x, x);
        let mean = self.trend_estimate + k.dot(&self.dual_weights);
        Ok((mean, self.variance_from_cross_cov(prior, &k)?))
    }

    pub(crate) fn variance_from_cross_cov(&self, prior: f64, k: &DVector<f64>) -> Result<f64> {
        let mut v = prior - self.factor.quad_form(k);
        if let Some((u, denom)) = &self.ones {
            let r = 1.0 - u.dot(k);
            v += r * r / denom;
        }
        clamp_variance(v, prior)
    }

    /// Serializable form; the factorization is recomputed on load.
    pub fn to_document(&self) -> Result<ModelDocument> {
        if self.noise_matrix {
            return Err(Error::invalid(
                "models with a general noise matrix are not serializable",
            ));
        }
        Ok(ModelDocument {
            spec: self.spec.clone(),
            design: self.design.to_rows(),
            observations: self.observations.iter().copied().collect(),
            trend: self.trend,
            trend_estimate: self.trend_estimate,
        })
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let design = Design::from_rows(&doc.design)?;
        let model = fit(&doc.spec, &design, &doc.observations, doc.trend)?;
        Ok(model)
    }
}

/// Clamp small negative variances produced by round-off. Anything below
/// `-1e-9` (relative to the prior variance when that exceeds 1) is a logic error.
pub(crate) fn clamp_variance(v: f64, prior: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -1e-9 * prior.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!("negative prediction variance {v:e}")))
    }
}

/// JSON representation of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub spec: KernelSpec,
    pub design: Vec<Vec<f64>>,
    pub observations: Vec<f64>,
    pub trend: TrendMode,
    pub trend_estimate: f64,
}
