//! Benchmark functions, predictivity criteria and experiment runners
//! comparing additive and separable Kriging emulators.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::additive::{centered_submodel, SubmodelCurve};
use crate::doe::{derive_seed, latin_hypercube, rng_from_seed, uniform, RNG_ALGORITHM};
use crate::error::{check_dim, Error, Result};
use crate::fit::{mle_fit, FitConfig};
use crate::kernels::{cross_cov, gram_matrix, Design, KernelFamily, KernelSpec, Structure};
use crate::kriging::{fit, fit_with_noise_matrix, GpModel, TrendMode};

/// Coefficients of the Sobol g-function `g(x) = ∏ (|4xₖ - 2| + aₖ)/(1 + aₖ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GFunctionSpec {
    a: Vec<f64>,
}

impl GFunctionSpec {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::invalid("g-function needs at least one coefficient"));
        }
        if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("g-function coefficients must be positive"));
        }
        Ok(GFunctionSpec { a })
    }

    /// All coefficients equal to `a`.
    pub fn uniform(d: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; d])
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("input {x} outside [0,1]")));
    }
    Ok(())
}

pub fn g_function(spec: &GFunctionSpec, x: &[f64]) -> Result<f64> {
    check_dim(spec.dim(), x.len())?;
    let mut g = 1.0;
    for (&xk, &ak) in x.iter().zip(&spec.a) {
        check_unit(xk)?;
        g *= ((4.0 * xk - 2.0).abs() + ak) / (1.0 + ak);
    }
    Ok(g)
}

fn partial_variance(a: f64) -> f64 {
    1.0 / (3.0 * (1.0 + a) * (1.0 + a))
}

/// First-order Sobol index of input `i`.
pub fn sobol_index(spec: &GFunctionSpec, i: usize) -> Result<f64> {
    if i >= spec.dim() {
        return Err(Error::invalid(format!("index {i} out of range")));
    }
    let total = spec
        .a
        .iter()
        .map(|&a| (1.0 + partial_variance(a)).ln())
        .sum::<f64>()
        .exp_m1();
    Ok(partial_variance(spec.a[i]) / total)
}

/// `d·u / ((1+u)^d - 1)`, the sum of first-order indices when all coefficients share `u`.
fn additive_share(d: usize, u: f64) -> f64 {
    d as f64 * u / (d as f64 * u.ln_1p()).exp_m1()
}

/// Common coefficient `a₁` for which the first-order indices of the
/// `d`-dimensional g-function sum to `target`.
pub fn solve_a1(d: usize, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target {target} must lie in (0,1)")));
    }
    if d < 2 {
        // a single input always carries all the variance
        return Err(Error::UnattainableTarget(target));
    }
    let mut lo = 1e-16;
    let mut hi = 1.0;
    while additive_share(d, hi) > target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::UnattainableTarget(target));
        }
    }
    if additive_share(d, lo) < target {
        return Err(Error::UnattainableTarget(target));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if additive_share(d, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    let a1 = (1.0 / (3.0 * u)).sqrt() - 1.0;
    if a1 <= 0.0 {
        return Err(Error::UnattainableTarget(target));
    }
    Ok(a1)
}

/// Centered main effect `E[g | xᵢ] - E[g] = (|4xᵢ - 2| + aᵢ)/(1 + aᵢ) - 1`.
pub fn g_main_effect(spec: &GFunctionSpec, i: usize, xi: f64) -> Result<f64> {
    if i >= spec.dim() {
        return Err(Error::invalid(format!("index {i} out of range")));
    }
    check_unit(xi)?;
    let a = spec.a[i];
    Ok(((4.0 * xi - 2.0).abs() + a) / (1.0 + a) - 1.0)
}

/// Proportion of prior variance removed by conditioning on the design:
/// `1 - ∑ v(tᵢ) / ∑ K(tᵢ, tᵢ)` over the test points.
pub fn p_criterion(spec: &KernelSpec, design: &Design, test: &Design) -> Result<f64> {
    check_dim(spec.dim(), test.dim())?;
    let model = fit(spec, design, &vec![0.0; design.n()], TrendMode::Simple { mu: 0.0 })?;
    let sums = test
        .as_flat()
        .par_chunks(test.dim())
        .map(|t| Ok((model.predict_var(t)?, spec.total_variance())))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (post, prior) = sums
        .iter()
        .fold((0.0, 0.0), |acc, (v, k)| (acc.0 + v, acc.1 + k));
    Ok((1.0 - post / prior).clamp(0.0, 1.0))
}

/// Predictivity coefficient `1 - ∑(yᵢ - ŷᵢ)² / ∑(yᵢ - ȳ)²` over the same test points.
pub fn q2(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_dim(y.len(), y_hat.len())?;
    if y.len() < 2 {
        return Err(Error::invalid("Q2 needs at least two test values"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let denom: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::invalid("Q2 undefined for constant test outputs"));
    }
    let num: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - num / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    PCollapse,
    AddVsSep,
    GFunQ2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    /// Separable ("usual") Kriging model.
    #[serde(rename = "UKM")]
    Ukm,
    /// Additive Kriging model.
    #[serde(rename = "AKM")]
    Akm,
    /// Additive-part emulator.
    #[serde(rename = "mA")]
    MA,
    /// Separable-part emulator.
    #[serde(rename = "mS")]
    MS,
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelTag::Ukm => "UKM",
            ModelTag::Akm => "AKM",
            ModelTag::MA => "mA",
            ModelTag::MS => "mS",
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::PCollapse => "PCollapse",
            Experiment::AddVsSep => "AddVsSep",
            Experiment::GFunQ2 => "GFunQ2",
        })
    }
}

/// One row of an experiment's output.
///
/// `parameter` holds θ for `PCollapse`, the fitted θ for `GFunQ2` and NaN for
/// `AddVsSep`. A failed fit is recorded with a NaN criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: Experiment,
    pub d: usize,
    pub replicate: usize,
    pub parameter: f64,
    pub model_tag: ModelTag,
    pub criterion: f64,
    pub seed: u64,
}

impl ExperimentRecord {
    pub fn failed(&self) -> bool {
        self.criterion.is_nan()
    }
}

/// Range parameter choice for the P-collapse experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta {
    Fixed(f64),
    /// `θ = √d`
    SqrtD,
}

impl Theta {
    pub fn value(self, d: usize) -> f64 {
        match self {
            Theta::Fixed(t) => t,
            Theta::SqrtD => (d as f64).sqrt(),
        }
    }
}

impl FromStr for Theta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("sqrt(d)") || s.eq_ignore_ascii_case("sqrtd") {
            return Ok(Theta::SqrtD);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::invalid(format!("bad theta '{s}' (number or sqrt(d))")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid("theta must be positive"));
        }
        Ok(Theta::Fixed(v))
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta::Fixed(t) => write!(f, "{t}"),
            Theta::SqrtD => f.write_str("sqrt(d)"),
        }
    }
}

/// Design size per input dimension.
pub const POINTS_PER_DIM: usize = 10;

fn draw_designs(d: usize, n_t: usize, seed: u64) -> Result<(Design, Design)> {
    let mut rng = rng_from_seed(seed);
    let design = latin_hypercube(POINTS_PER_DIM * d, d, &mut rng)?;
    let test = uniform(n_t, d, &mut rng)?;
    Ok((design, test))
}

/// Explained variance `P` of an isotropic separable SE process for each `(d, θ)` cell.
pub fn run_p_collapse(d_grid: &[usize], theta_grid: &[Theta], n_t: usize, seed: u64) -> Result<Vec<ExperimentRecord>> {
    let cells: Vec<(usize, usize)> = (0..d_grid.len())
        .flat_map(|a| (0..theta_grid.len()).map(move |b| (a, b)))
        .collect();
    cells
        .par_iter()
        .map(|&(di, ti)| {
            let d = d_grid[di];
            let theta = theta_grid[ti].value(d);
            let cell_seed = derive_seed(seed, &[d as u64]);
            let (design, test) = draw_designs(d, n_t, cell_seed)?;
            let spec = KernelSpec::separable_isotropic(KernelFamily::SquaredExponential, d, theta, 1.0, 0.0)?;
            Ok(ExperimentRecord {
                experiment: Experiment::PCollapse,
                d,
                replicate: 0,
                parameter: theta,
                model_tag: ModelTag::Ukm,
                criterion: p_criterion(&spec, &design, &test)?,
                seed: cell_seed,
            })
        })
        .collect()
}

/// `K_A(x,y) = (1/d) ∑ exp(-(xᵢ-yᵢ)²/0.5²)` and `K_S(x,y) = ∏ exp(-(xᵢ-yᵢ)²/0.5²)`.
pub fn add_sep_kernels(d: usize) -> Result<(KernelSpec, KernelSpec)> {
    Ok((
        KernelSpec::additive_isotropic(KernelFamily::SquaredExponential, d, 0.5, 1.0, 0.0)?,
        KernelSpec::separable_isotropic(KernelFamily::SquaredExponential, d, 0.5, 1.0, 0.0)?,
    ))
}

/// Closed-form predictivity of `m_A` and `m_S` for `Y = Y_A + Y_S` observed at `design`.
///
/// `m_•(t) = k_•(t)ᵀ(K_A + K_S)⁻¹Y(X)`, and
/// `E[(Y(t) - m_•(t))²] = K_A(t,t) + K_S(t,t) - 2 k_Yᵀ G⁻¹ k_• + k_•ᵀ G⁻¹ k_•`
/// with `G = K_A + K_S` and `k_Y = k_A + k_S`.
pub fn add_sep_predictivity(d: usize, design: &Design, test: &Design) -> Result<(f64, f64)> {
    let (k_a, k_s) = add_sep_kernels(d)?;
    let noise = gram_matrix(&k_s, design, false)?;
    // m_A is the additive model with observation-noise covariance K_S.
    let model = fit_with_noise_matrix(&k_a, design, &vec![0.0; design.n()], TrendMode::Simple { mu: 0.0 }, &noise)?;
    let factor = model.factor();
    let terms = test
        .as_flat()
        .par_chunks(d)
        .map(|t| -> Result<(f64, f64, f64)> {
            let a = cross_cov(&k_a, design, t)?;
            let s = cross_cov(&k_s, design, t)?;
            let prior = k_a.total_variance() + k_s.total_variance();
            let ga = factor.solve(&a);
            let gs = factor.solve(&s);
            let y: DVector<f64> = &a + &s;
            let err_a = prior - 2.0 * y.dot(&ga) + a.dot(&ga);
            let err_s = prior - 2.0 * y.dot(&gs) + s.dot(&gs);
            Ok((err_a, err_s, prior))
        })
        .collect::<Result<Vec<_>>>()?;
    let (ea, es, var) = terms
        .iter()
        .fold((0.0, 0.0, 0.0), |acc, t| (acc.0 + t.0, acc.1 + t.1, acc.2 + t.2));
    Ok((1.0 - ea / var, 1.0 - es / var))
}

pub fn run_add_vs_sep(d_grid: &[usize], n_t: usize, seed: u64) -> Result<Vec<ExperimentRecord>> {
    let per_d = d_grid
        .par_iter()
        .map(|&d| {
            let cell_seed = derive_seed(seed, &[d as u64]);
            let (design, test) = draw_designs(d, n_t, cell_seed)?;
            let (pa, ps) = add_sep_predictivity(d, &design, &test)?;
            let rec = |tag, criterion| ExperimentRecord {
                experiment: Experiment::AddVsSep,
                d,
                replicate: 0,
                parameter: f64::NAN,
                model_tag: tag,
                criterion,
                seed: cell_seed,
            };
            Ok(vec![rec(ModelTag::MA, pa), rec(ModelTag::MS, ps)])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_d.into_iter().flatten().collect())
}

/// Sum of first-order indices imposed on the g-function benchmark.
pub const GFUN_ADDITIVE_SHARE: f64 = 0.75;

/// Settings of the g-function benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GFunOptions {
    pub fit: FitConfig,
    pub family: KernelFamily,
}

impl Default for GFunOptions {
    fn default() -> Self {
        GFunOptions {
            fit: FitConfig::default(),
            family: KernelFamily::Matern52,
        }
    }
}

/// Everything produced for one `(d, replicate)` cell of the g-function benchmark.
#[derive(Debug)]
pub struct GFunReplicate {
    pub g: GFunctionSpec,
    pub design: Design,
    pub test: Design,
    pub ukm: Result<GpModel>,
    pub akm: Result<GpModel>,
    pub records: Vec<ExperimentRecord>,
}

/// Fit an ordinary Kriging model with noise by maximum likelihood and condition it.
pub fn fit_emulator(
    family: KernelFamily,
    structure: Structure,
    design: &Design,
    y: &[f64],
    cfg: &FitConfig,
) -> Result<GpModel> {
    let outcome = mle_fit(family, structure, design, y, TrendMode::Ordinary, cfg)?;
    fit(&outcome.spec, design, y, TrendMode::Ordinary)
}

pub fn gfun_replicate(d: usize, replicate: usize, n_t: usize, seed: u64, opts: &GFunOptions) -> Result<GFunReplicate> {
    let a1 = solve_a1(d, GFUN_ADDITIVE_SHARE)?;
    let g = GFunctionSpec::uniform(d, a1)?;
    let cell_seed = derive_seed(seed, &[d as u64, replicate as u64]);
    let (design, test) = draw_designs(d, n_t, cell_seed)?;
    let y: Vec<f64> = design.rows().map(|x| g_function(&g, x)).collect::<Result<_>>()?;
    let y_test: Vec<f64> = test.rows().map(|x| g_function(&g, x)).collect::<Result<_>>()?;
    let cfg = FitConfig {
        seed: derive_seed(cell_seed, &[1]),
        ..opts.fit.clone()
    };

    let mut fitted = [Structure::Separable, Structure::Additive]
        .par_iter()
        .map(|&structure| fit_emulator(opts.family, structure, &design, &y, &cfg))
        .collect::<Vec<_>>()
        .into_iter();
    let ukm = fitted.next().expect("two fits");
    let akm = fitted.next().expect("two fits");

    let score = |model: &Result<GpModel>| -> (f64, f64) {
        let Ok(model) = model else {
            return (f64::NAN, f64::NAN);
        };
        let preds: Result<Vec<f64>> = test.rows().map(|x| model.predict_mean(x)).collect();
        let q = preds.and_then(|p| q2(&y_test, &p)).unwrap_or(f64::NAN);
        (model.spec().ranges()[0], q)
    };
    let records = [(ModelTag::Ukm, &ukm), (ModelTag::Akm, &akm)]
        .into_iter()
        .map(|(tag, model)| {
            let (theta, criterion) = score(model);
            ExperimentRecord {
                experiment: Experiment::GFunQ2,
                d,
                replicate,
                parameter: theta,
                model_tag: tag,
                criterion,
                seed: cell_seed,
            }
        })
        .collect();
    Ok(GFunReplicate {
        g,
        design,
        test,
        ukm,
        akm,
        records,
    })
}

/// Q² of separable (UKM) and additive (AKM) Matérn 5/2 ordinary Kriging models
/// fitted by maximum likelihood on the g-function.
pub fn run_gfun_benchmark(
    d_grid: &[usize],
    replicates: usize,
    n_t: usize,
    seed: u64,
    opts: &GFunOptions,
) -> Result<Vec<ExperimentRecord>> {
    let cells: Vec<(usize, usize)> = d_grid
        .iter()
        .flat_map(|&d| (0..replicates).map(move |r| (d, r)))
        .collect();
    let per_cell = cells
        .par_iter()
        .map(|&(d, r)| gfun_replicate(d, r, n_t, seed, opts).map(|rep| rep.records))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["experiment", "d", "replicate", "parameter", "model_tag", "criterion", "seed"])?;
    }
    w.flush()?;
    Ok(())
}

/// Reproducibility metadata written next to experiment outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub experiment: Experiment,
    pub seed: u64,
    pub d_grid: Vec<usize>,
    pub theta_grid: Vec<String>,
    pub n_t: usize,
    pub replicates: usize,
    pub library_version: String,
    pub rng: String,
    pub p_convention: String,
}

impl ExperimentMetadata {
    pub fn new(experiment: Experiment, seed: u64, d_grid: &[usize], n_t: usize, replicates: usize) -> Self {
        ExperimentMetadata {
            experiment,
            seed,
            d_grid: d_grid.to_vec(),
            theta_grid: vec![],
            n_t,
            replicates,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_ALGORITHM.to_string(),
            p_convention: "P = 1 - sum(conditional variance)/sum(prior variance); 1 = known a.s., 0 = no reduction"
                .to_string(),
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

/// `(min, q1, median, q3, max)` with linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Option<[f64; 5]> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some([v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]])
}

/// `d,theta,P` averaged over replicates and seeds.
pub fn write_fig3_table<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut keys: Vec<(usize, u64)> = records
        .iter()
        .filter(|r| r.experiment == Experiment::PCollapse)
        .map(|r| (r.d, r.parameter.to_bits()))
        .collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1))));
    keys.dedup();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "theta", "P"])?;
    for (d, bits) in keys {
        let p = mean(
            records
                .iter()
                .filter(|r| r.experiment == Experiment::PCollapse && r.d == d && r.parameter.to_bits() == bits)
                .map(|r| r.criterion),
        );
        w.write_record(&[d.to_string(), f64::from_bits(bits).to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `d,P_mA,P_mS`
pub fn write_fig4_table<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut ds: Vec<usize> = records
        .iter()
        .filter(|r| r.experiment == Experiment::AddVsSep)
        .map(|r| r.d)
        .collect();
    ds.sort_unstable();
    ds.dedup();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "P_mA", "P_mS"])?;
    for d in ds {
        let avg = |tag| {
            mean(
                records
                    .iter()
                    .filter(|r| r.experiment == Experiment::AddVsSep && r.d == d && r.model_tag == tag)
                    .map(|r| r.criterion),
            )
        };
        w.write_record(&[d.to_string(), avg(ModelTag::MA).to_string(), avg(ModelTag::MS).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `d,model,min,q1,median,q3,max` of Q² (failed fits excluded).
pub fn write_fig5_table<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut keys: Vec<(usize, String)> = records
        .iter()
        .filter(|r| r.experiment == Experiment::GFunQ2)
        .map(|r| (r.d, r.model_tag.to_string()))
        .collect();
    keys.sort();
    keys.dedup();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "model", "min", "q1", "median", "q3", "max"])?;
    for (d, tag) in keys {
        let values: Vec<f64> = records
            .iter()
            .filter(|r| r.experiment == Experiment::GFunQ2 && r.d == d && r.model_tag.to_string() == tag)
            .map(|r| r.criterion)
            .collect();
        let Some(q) = quartiles(&values) else { continue };
        let mut row = vec![d.to_string(), tag];
        row.extend(q.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Centered submodel of an additive model next to the analytic g-function main effect:
/// `x,mean,variance,analytic`.
pub fn main_effect_table(model: &GpModel, g: &GFunctionSpec, dim: usize, grid: &[f64]) -> Result<(SubmodelCurve, Vec<f64>)> {
    let curve = centered_submodel(model, dim, grid)?;
    let analytic = grid
        .iter()
        .map(|&x| g_main_effect(g, dim, x))
        .collect::<Result<Vec<_>>>()?;
    Ok((curve, analytic))
}

pub fn write_fig6_table<W: Write>(curve: &SubmodelCurve, analytic: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "mean", "variance", "analytic"])?;
    for (k, a) in analytic.iter().enumerate().take(curve.grid.len()) {
        w.write_record(&[
            curve.grid[k].to_string(),
            curve.mean[k].to_string(),
            curve.variance[k].to_string(),
            a.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
