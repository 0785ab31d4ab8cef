//! Univariate covariance functions and their separable (product) and additive
//! (sum) compositions over `[0,1]^d`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

const SQRT_5: f64 = 2.236_067_977_499_79;

/// Univariate stationary kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `σ² exp(-(x-y)²/θ²)`. Note the absence of the factor 2 in the denominator.
    SquaredExponential,
    /// Matérn with smoothness 5/2, `σ²(1 + √5 r/θ + 5r²/(3θ²)) exp(-√5 r/θ)`.
    Matern52,
}

impl KernelFamily {
    /// Unit-variance correlation at lag `r = |x - y|`.
    #[inline]
    pub(crate) fn correlation(self, r: f64, theta: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => {
                let s = r / theta;
                (-s * s).exp()
            }
            KernelFamily::Matern52 => {
                let s = SQRT_5 * r.abs() / theta;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::SquaredExponential => write!(f, "se"),
            KernelFamily::Matern52 => write!(f, "matern52"),
        }
    }
}

/// How the univariate factors are combined across dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    /// `σ² ∏ kᵢ(xᵢ, yᵢ)`
    Separable,
    /// `∑ σᵢ² kᵢ(xᵢ, yᵢ)`
    Additive,
}

/// Declarative description of a covariance function.
///
/// For [`Structure::Separable`] the process variance lives in `variances[0]`
/// and the remaining entries are 1. For [`Structure::Additive`] each
/// dimension carries its own variance `σᵢ²`. The noise variance `τ²` is not
/// part of [`eval_kernel`]; it only enters the Gram matrix on request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec", into = "RawKernelSpec")]
pub struct KernelSpec {
    family: KernelFamily,
    structure: Structure,
    ranges: Vec<f64>,
    variances: Vec<f64>,
    noise: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernelSpec {
    family: KernelFamily,
    structure: Structure,
    ranges: Vec<f64>,
    variances: Vec<f64>,
    noise: f64,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.family, raw.structure, raw.ranges, raw.variances, raw.noise)
    }
}

impl From<KernelSpec> for RawKernelSpec {
    fn from(spec: KernelSpec) -> Self {
        RawKernelSpec {
            family: spec.family,
            structure: spec.structure,
            ranges: spec.ranges,
            variances: spec.variances,
            noise: spec.noise,
        }
    }
}

fn positive_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite() && *v > 0.0)
}

impl KernelSpec {
    pub fn new(
        family: KernelFamily,
        structure: Structure,
        ranges: Vec<f64>,
        variances: Vec<f64>,
        noise: f64,
    ) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::invalid("kernel needs at least one dimension"));
        }
        check_dim(ranges.len(), variances.len())?;
        if !positive_finite(&ranges) {
            return Err(Error::invalid("ranges must be finite and positive"));
        }
        if !positive_finite(&variances) {
            return Err(Error::invalid("variances must be finite and positive"));
        }
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::invalid("noise must be finite and nonnegative"));
        }
        if structure == Structure::Separable && variances[1..].iter().any(|&v| v != 1.0) {
            return Err(Error::invalid(
                "separable kernels carry a single variance in variances[0]; other entries must be 1",
            ));
        }
        Ok(KernelSpec {
            family,
            structure,
            ranges,
            variances,
            noise,
        })
    }

    /// Additive kernel with explicit per-dimension variances.
    pub fn additive(
        family: KernelFamily,
        ranges: Vec<f64>,
        variances: Vec<f64>,
        noise: f64,
    ) -> Result<Self> {
        Self::new(family, Structure::Additive, ranges, variances, noise)
    }

    /// Additive kernel with the total variance split evenly over `d` dimensions.
    pub fn additive_isotropic(
        family: KernelFamily,
        d: usize,
        theta: f64,
        total_variance: f64,
        noise: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("kernel needs at least one dimension"));
        }
        Self::additive(
            family,
            vec![theta; d],
            vec![total_variance / d as f64; d],
            noise,
        )
    }

    pub fn separable(
        family: KernelFamily,
        ranges: Vec<f64>,
        variance: f64,
        noise: f64,
    ) -> Result<Self> {
        let d = ranges.len();
        let mut variances = vec![1.0; d.max(1)];
        variances[0] = variance;
        Self::new(family, Structure::Separable, ranges, variances, noise)
    }

    pub fn separable_isotropic(
        family: KernelFamily,
        d: usize,
        theta: f64,
        variance: f64,
        noise: f64,
    ) -> Result<Self> {
        Self::separable(family, vec![theta; d], variance, noise)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn is_additive(&self) -> bool {
        self.structure == Structure::Additive
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Prior variance `K(x, x)` excluding noise.
    pub fn total_variance(&self) -> f64 {
        match self.structure {
            Structure::Additive => self.variances.iter().sum(),
            Structure::Separable => self.variances[0],
        }
    }

    /// Variance attached to dimension `dim` in an additive kernel.
    pub fn dim_variance(&self, dim: usize) -> f64 {
        match self.structure {
            Structure::Additive => self.variances[dim],
            Structure::Separable => self.variances[0],
        }
    }

    pub fn with_noise(&self, noise: f64) -> Result<Self> {
        Self::new(
            self.family,
            self.structure,
            self.ranges.clone(),
            self.variances.clone(),
            noise,
        )
    }

    /// Univariate covariance of dimension `dim`, `Kᵢ(a, b)`.
    #[inline]
    pub(crate) fn component(&self, dim: usize, a: f64, b: f64) -> f64 {
        self.dim_variance(dim) * self.family.correlation(a - b, self.ranges[dim])
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.structure {
            Structure::Additive => (0..x.len()).map(|i| self.component(i, x[i], y[i])).sum(),
            Structure::Separable => {
                let mut prod = self.variances[0];
                for i in 0..x.len() {
                    prod *= self.family.correlation(x[i] - y[i], self.ranges[i]);
                }
                prod
            }
        }
    }
}

/// Evaluate a univariate kernel.
pub fn eval_univariate(
    family: KernelFamily,
    x: f64,
    y: f64,
    theta: f64,
    sigma2: f64,
) -> Result<f64> {
    if !(x.is_finite() && y.is_finite() && theta.is_finite() && sigma2.is_finite()) {
        return Err(Error::invalid("kernel arguments must be finite"));
    }
    if theta <= 0.0 || sigma2 <= 0.0 {
        return Err(Error::invalid("theta and sigma2 must be positive"));
    }
    Ok(sigma2 * family.correlation(x - y, theta))
}

/// Evaluate the multivariate kernel `K(x, y)` (noise excluded).
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(spec.dim(), x.len())?;
    check_dim(spec.dim(), y.len())?;
    Ok(spec.eval_unchecked(x, y))
}

/// Input sites, one row per point, all coordinates in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Design {
    /// Build a design from rows, rejecting out-of-range coordinates and duplicate rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::invalid("design has no rows; use Design::empty"))?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            check_dim(d, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), d, data)
    }

    /// Build a design from row-major data.
    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("design dimension must be positive"));
        }
        check_dim(n * d, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "design coordinate {v} outside [0,1]"
            )));
        }
        let design = Design { n, d, data };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| design.cmp_rows(a, b));
        for w in order.windows(2) {
            if design.cmp_rows(w[0], w[1]) == Ordering::Equal {
                return Err(Error::invalid(format!(
                    "duplicate design rows {} and {}",
                    w[0].min(w[1]),
                    w[0].max(w[1])
                )));
            }
        }
        Ok(design)
    }

    pub fn empty(d: usize) -> Result<Self> {
        Self::from_flat(0, d, Vec::new())
    }

    fn cmp_rows(&self, a: usize, b: usize) -> Ordering {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Copy of the design without the listed rows.
    pub fn without_rows(&self, drop: &[usize]) -> Design {
        let data = (0..self.n)
            .filter(|i| !drop.contains(i))
            .flat_map(|i| self.row(i).iter().copied())
            .collect::<Vec<_>>();
        Design {
            n: data.len() / self.d,
            d: self.d,
            data,
        }
    }
}

/// Gram matrix `K_ij = K(x_i, x_j)`, plus `τ² I` when `include_noise` is set.
pub fn gram_matrix(spec: &KernelSpec, design: &Design, include_noise: bool) -> Result<DMatrix<f64>> {
    check_dim(spec.dim(), design.dim())?;
    let n = design.n();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = design.row(i);
        for j in 0..i {
            let v = spec.eval_unchecked(xi, design.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] = spec.total_variance() + if include_noise { spec.noise() } else { 0.0 };
    }
    Ok(k)
}

/// Gram matrix of a single additive component, built from one coordinate column.
pub fn component_gram(spec: &KernelSpec, design: &Design, dim: usize) -> Result<DMatrix<f64>> {
    check_dim(spec.dim(), design.dim())?;
    if dim >= spec.dim() {
        return Err(Error::invalid(format!("dimension index {dim} out of range")));
    }
    let col = design.column(dim);
    let n = col.len();
    Ok(DMatrix::from_fn(n, n, |i, j| spec.component(dim, col[i], col[j])))
}

/// Cross-covariance vector `k(x) = (K(x, x⁽¹⁾), …, K(x, x⁽ⁿ⁾))`, noise excluded.
pub fn cross_cov(spec: &KernelSpec, design: &Design, x: &[f64]) -> Result<DVector<f64>> {
    check_dim(spec.dim(), design.dim())?;
    check_dim(spec.dim(), x.len())?;
    Ok(DVector::from_iterator(
        design.n(),
        design.rows().map(|r| spec.eval_unchecked(x, r)),
    ))
}

/// Cross-covariance of one additive component, `kᵢ(xᵢ)`.
pub(crate) fn component_cross_cov(
    spec: &KernelSpec,
    design: &Design,
    dim: usize,
    xi: f64,
) -> DVector<f64> {
    DVector::from_iterator(
        design.n(),
        design.rows().map(|r| spec.component(dim, xi, r[dim])),
    )
}
