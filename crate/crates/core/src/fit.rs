//! Maximum-likelihood estimation of kernel hyperparameters `(θ, σ², τ²)`.
//!
//! The negative log-likelihood is minimized over log-transformed parameters
//! by a multi-start Nelder–Mead search. Starts are drawn log-uniformly inside
//! the bounds from a seeded ChaCha8 stream, run in parallel, and merged by
//! best objective with the lowest start index winning ties.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doe::rng_from_seed;
use crate::error::{check_dim, Error, Result};
use crate::kernels::{gram_matrix, Design, KernelFamily, KernelSpec, Structure};
use crate::kriging::TrendMode;
use crate::linalg::CholeskyFactor;
use crate::optim::{nelder_mead, NelderMeadOptions, TraceEntry};

/// Parameters closer than this (in log space) to a bound count as "on" it.
const BOUND_SLACK: f64 = 1e-3;

/// `(lower, upper)` search interval of one hyperparameter. Equal ends fix the value.
pub type Interval = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitBounds {
    pub range: Interval,
    /// Total variance in isotropic mode, per-dimension variance otherwise.
    pub variance: Interval,
    pub noise: Interval,
}

impl Default for FitBounds {
    fn default() -> Self {
        FitBounds {
            range: (1e-2, 1e2),
            variance: (1e-4, 1e4),
            noise: (1e-8, 1e1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub n_starts: usize,
    pub bounds: FitBounds,
    pub max_evals: usize,
    pub seed: u64,
    /// One range and one variance shared by all dimensions.
    pub isotropic: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_starts: 5,
            bounds: FitBounds::default(),
            max_evals: 2000,
            seed: 0,
            isotropic: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.max_evals == 0 {
            return Err(Error::invalid("n_starts and max_evals must be positive"));
        }
        let b = &self.bounds;
        for (name, (lo, hi)) in [("range", b.range), ("variance", b.variance)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                return Err(Error::invalid(format!(
                    "{name} bounds need 0 < lower < upper, got ({lo}, {hi})"
                )));
            }
        }
        let (lo, hi) = b.noise;
        let fixed = lo == hi && lo >= 0.0;
        if !(lo.is_finite() && hi.is_finite()) || !(fixed || (lo > 0.0 && lo < hi)) {
            return Err(Error::invalid(format!(
                "noise bounds need 0 < lower < upper, or lower = upper to fix it; got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Gaussian log-density of the observations under `spec`:
/// `-½ Fᶜᵀ K⁻¹ Fᶜ - ½ log det K - (n/2) log 2π`, with `K` noise-augmented and
/// `Fᶜ` the trend-centered observations (GLS trend profiled out for ordinary Kriging).
pub fn log_likelihood(spec: &KernelSpec, design: &Design, f: &[f64], trend: TrendMode) -> Result<f64> {
    check_dim(spec.dim(), design.dim())?;
    check_dim(design.n(), f.len())?;
    let factor = CholeskyFactor::new(gram_matrix(spec, design, true)?)?;
    Ok(log_likelihood_with(&factor, f, trend))
}

fn log_likelihood_with(factor: &CholeskyFactor, f: &[f64], trend: TrendMode) -> f64 {
    let n = f.len();
    let obs = DVector::from_column_slice(f);
    let mu = match trend {
        TrendMode::Simple { mu } => mu,
        TrendMode::Ordinary => {
            let u = factor.solve(&DVector::from_element(n, 1.0));
            u.dot(&obs) / u.sum()
        }
    };
    let centered = obs.add_scalar(-mu);
    -0.5 * factor.quad_form(&centered) - 0.5 * factor.log_det() - 0.5 * n as f64 * (2.0 * PI).ln()
}

/// Maps between a [`KernelSpec`] and the free log-parameters.
#[derive(Debug, Clone)]
struct Parameterization {
    family: KernelFamily,
    structure: Structure,
    d: usize,
    isotropic: bool,
    bounds: FitBounds,
}

impl Parameterization {
    fn n_ranges(&self) -> usize {
        if self.isotropic { 1 } else { self.d }
    }

    fn n_variances(&self) -> usize {
        if self.isotropic || self.structure == Structure::Separable { 1 } else { self.d }
    }

    fn noise_is_free(&self) -> bool {
        self.bounds.noise.0 != self.bounds.noise.1
    }

    fn log_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut push = |count: usize, (a, b): Interval| {
            for _ in 0..count {
                lo.push(a.ln());
                hi.push(b.ln());
            }
        };
        push(self.n_ranges(), self.bounds.range);
        push(self.n_variances(), self.bounds.variance);
        if self.noise_is_free() {
            push(1, self.bounds.noise);
        }
        (lo, hi)
    }

    fn decode(&self, p: &[f64]) -> Result<KernelSpec> {
        let nr = self.n_ranges();
        let nv = self.n_variances();
        let ranges: Vec<f64> = (0..self.d).map(|i| p[if self.isotropic { 0 } else { i }].exp()).collect();
        let noise = if self.noise_is_free() { p[nr + nv].exp() } else { self.bounds.noise.0 };
        match self.structure {
            Structure::Separable => KernelSpec::separable(self.family, ranges, p[nr].exp(), noise),
            Structure::Additive => {
                let variances = if self.isotropic {
                    vec![p[nr].exp() / self.d as f64; self.d]
                } else {
                    (0..self.d).map(|i| p[nr + i].exp()).collect()
                };
                KernelSpec::additive(self.family, ranges, variances, noise)
            }
        }
    }

    fn encode(&self, spec: &KernelSpec) -> Result<Vec<f64>> {
        if spec.dim() != self.d || spec.structure() != self.structure || spec.family() != self.family {
            return Err(Error::invalid("start spec does not match the fitted kernel"));
        }
        let mut p = Vec::new();
        if self.isotropic {
            let r = spec.ranges();
            p.push((r.iter().map(|v| v.ln()).sum::<f64>() / r.len() as f64).clamp(-700.0, 700.0));
            p.push(spec.total_variance().ln());
        } else {
            p.extend(spec.ranges().iter().map(|v| v.ln()));
            match self.structure {
                Structure::Separable => p.push(spec.total_variance().ln()),
                Structure::Additive => p.extend(spec.variances().iter().map(|v| v.ln())),
            }
        }
        if self.noise_is_free() {
            p.push(spec.noise().max(self.bounds.noise.0).ln());
        }
        let (lo, hi) = self.log_bounds();
        Ok(p.iter().enumerate().map(|(i, v)| v.clamp(lo[i], hi[i])).collect())
    }
}

/// Result of one local search.
#[derive(Debug, Clone)]
pub struct StartRecord {
    pub start: KernelSpec,
    pub start_log_likelihood: f64,
    pub log_likelihood: f64,
    pub evals: usize,
    /// Best log-likelihood after each iteration (nondecreasing).
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub spec: KernelSpec,
    pub log_likelihood: f64,
    /// Some range or variance estimate sits on its search bound, so the data do
    /// not identify it.
    pub degenerate: bool,
    pub best_start: usize,
    pub starts: Vec<StartRecord>,
}

impl FitOutcome {
    /// CSV of every start's trace: `start,iteration,objective,p0,p1,…` where
    /// the parameters are the optimizer's log-parameters.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let width = self
            .starts
            .iter()
            .flat_map(|s| s.trace.first())
            .map(|t| t.x.len())
            .max()
            .unwrap_or(0);
        let mut header = vec!["start".to_string(), "iteration".into(), "objective".into()];
        header.extend((0..width).map(|i| format!("p{i}")));
        w.write_record(&header)?;
        for (s, rec) in self.starts.iter().enumerate() {
            for t in &rec.trace {
                let mut row = vec![s.to_string(), t.iteration.to_string(), t.value.to_string()];
                row.extend(t.x.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Multi-start maximum-likelihood fit.
pub fn mle_fit(
    family: KernelFamily,
    structure: Structure,
    design: &Design,
    f: &[f64],
    trend: TrendMode,
    cfg: &FitConfig,
) -> Result<FitOutcome> {
    mle_fit_with_starts(family, structure, design, f, trend, cfg, &[])
}

/// As [`mle_fit`], with extra start points appended after the random ones.
pub fn mle_fit_with_starts(
    family: KernelFamily,
    structure: Structure,
    design: &Design,
    f: &[f64],
    trend: TrendMode,
    cfg: &FitConfig,
    extra_starts: &[KernelSpec],
) -> Result<FitOutcome> {
    cfg.validate()?;
    check_dim(design.n(), f.len())?;
    if design.n() < 3 {
        return Err(Error::Underdetermined(format!(
            "maximum likelihood needs at least 3 observations, got {}",
            design.n()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("observations must be finite"));
    }
    let param = Parameterization {
        family,
        structure,
        d: design.dim(),
        isotropic: cfg.isotropic,
        bounds: cfg.bounds.clone(),
    };
    let (lo, hi) = param.log_bounds();

    let mut rng = rng_from_seed(cfg.seed);
    let mut starts: Vec<Vec<f64>> = (0..cfg.n_starts)
        .map(|_| lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..=*b)).collect())
        .collect();
    for spec in extra_starts {
        starts.push(param.encode(spec)?);
    }

    let objective = |p: &[f64]| -> f64 {
        let Ok(spec) = param.decode(p) else {
            return f64::INFINITY;
        };
        let Ok(gram) = gram_matrix(&spec, design, true) else {
            return f64::INFINITY;
        };
        match CholeskyFactor::new(gram) {
            Ok(factor) => -log_likelihood_with(&factor, f, trend),
            Err(_) => f64::INFINITY,
        }
    };
    let opts = NelderMeadOptions {
        max_evals: cfg.max_evals,
        ..Default::default()
    };

    let results: Vec<(Vec<f64>, StartRecord)> = starts
        .par_iter()
        .map(|x0| {
            let start_value = objective(x0);
            let m = nelder_mead(objective, x0, &lo, &hi, &opts);
            let trace = m
                .trace
                .into_iter()
                .map(|t| TraceEntry { value: -t.value, ..t })
                .collect();
            let record = StartRecord {
                start: param.decode(x0).expect("start inside bounds"),
                start_log_likelihood: -start_value,
                log_likelihood: -m.value,
                evals: m.evals,
                trace,
            };
            (m.x, record)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, (_, rec)) in results.iter().enumerate() {
        if !rec.log_likelihood.is_finite() {
            continue;
        }
        if best.is_none_or(|b| rec.log_likelihood > results[b].1.log_likelihood) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| {
        Error::FitFailure("covariance factorization failed at every start".into())
    })?;
    let x = &results[best].0;
    let spec = param.decode(x)?;
    let nr = param.n_ranges();
    let nv = param.n_variances();
    let degenerate = (0..nr + nv).any(|i| x[i] - lo[i] < BOUND_SLACK || hi[i] - x[i] < BOUND_SLACK);
    Ok(FitOutcome {
        spec,
        log_likelihood: results[best].1.log_likelihood,
        degenerate,
        best_start: best,
        starts: results.into_iter().map(|(_, r)| r).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::{generate, DoeConfig};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn single_standard_normal() {
        let spec = KernelSpec::additive_isotropic(KernelFamily::SquaredExponential, 2, 0.5, 1.0, 0.0).unwrap();
        let design = Design::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let ll = log_likelihood(&spec, &design, &[0.0], TrendMode::Simple { mu: 0.0 }).unwrap();
        assert_abs_diff_eq!(ll, -0.918_938_533_204_672_7, epsilon = 1e-12);
    }

    #[test]
    fn two_independent_points() {
        let spec = KernelSpec::separable(KernelFamily::SquaredExponential, vec![0.01, 0.01], 1.0, 0.0).unwrap();
        let design = Design::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let ll = log_likelihood(&spec, &design, &[0.0, 0.0], TrendMode::Simple { mu: 0.0 }).unwrap();
        assert_abs_diff_eq!(ll, -(2.0 * PI).ln(), epsilon = 1e-6);
    }

    #[test]
    fn matches_dense_computation() {
        let design = generate(&DoeConfig::lhs(10, 2, 3)).unwrap();
        let f: Vec<f64> = design.rows().map(|r| (3.0 * r[0]).sin() + r[1] * r[1]).collect();
        let spec = KernelSpec::additive(KernelFamily::Matern52, vec![0.4, 0.7], vec![0.8, 0.5], 1e-3).unwrap();
        for trend in [TrendMode::Simple { mu: 0.2 }, TrendMode::Ordinary] {
            let ll = log_likelihood(&spec, &design, &f, trend).unwrap();
            // LU-based oracle
            let k = DMatrix::from_fn(10, 10, |i, j| {
                crate::kernels::eval_kernel(&spec, design.row(i), design.row(j)).unwrap()
                    + if i == j { 1e-3 } else { 0.0 }
            });
            let lu = k.clone().lu();
            let fv = DVector::from_vec(f.clone());
            let ones = DVector::from_element(10, 1.0);
            let mu = match trend {
                TrendMode::Simple { mu } => mu,
                TrendMode::Ordinary => {
                    let u = lu.solve(&ones).unwrap();
                    u.dot(&fv) / u.dot(&ones)
                }
            };
            let c = fv.add_scalar(-mu);
            let quad = c.dot(&lu.solve(&c).unwrap());
            let want = -0.5 * quad - 0.5 * lu.determinant().ln() - 5.0 * (2.0 * PI).ln();
            assert_abs_diff_eq!(ll, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn too_few_observations() {
        let design = Design::from_rows(&[vec![0.1], vec![0.9]]).unwrap();
        let err = mle_fit(
            KernelFamily::Matern52,
            Structure::Additive,
            &design,
            &[0.0, 1.0],
            TrendMode::Ordinary,
            &FitConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Underdetermined(_)));
    }

    #[test]
    fn config_validation() {
        let mut cfg = FitConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.bounds.range = (1.0, 0.5);
        assert!(cfg.validate().is_err());
        cfg = FitConfig::default();
        cfg.bounds.noise = (0.0, 1.0);
        assert!(cfg.validate().is_err());
        cfg.bounds.noise = (0.0, 0.0);
        assert!(cfg.validate().is_ok());
        let json = r#"{"n_starts": 2, "seed": 9}"#;
        let parsed: FitConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.n_starts, 2);
        assert_eq!(parsed.max_evals, 2000);
        assert!(serde_json::from_str::<FitConfig>(r#"{"bogus": 1}"#).is_err());
    }

    fn smooth_data(n: usize, seed: u64) -> (Design, Vec<f64>) {
        let design = generate(&DoeConfig::lhs(n, 2, seed)).unwrap();
        let f = design.rows().map(|r| (4.0 * r[0]).sin() + 0.5 * (3.0 * r[1]).cos()).collect();
        (design, f)
    }

    #[test]
    fn deterministic_given_seed() {
        let (design, f) = smooth_data(15, 4);
        let cfg = FitConfig { seed: 11, n_starts: 3, ..Default::default() };
        let a = mle_fit(KernelFamily::Matern52, Structure::Additive, &design, &f, TrendMode::Ordinary, &cfg).unwrap();
        let b = mle_fit(KernelFamily::Matern52, Structure::Additive, &design, &f, TrendMode::Ordinary, &cfg).unwrap();
        assert_eq!(a.spec, b.spec);
        assert_eq!(a.log_likelihood.to_bits(), b.log_likelihood.to_bits());
    }

    #[test]
    fn dominates_every_start_and_traces_are_monotone() {
        let (design, f) = smooth_data(15, 5);
        let cfg = FitConfig { seed: 1, n_starts: 4, ..Default::default() };
        let out = mle_fit(KernelFamily::SquaredExponential, Structure::Separable, &design, &f, TrendMode::Ordinary, &cfg)
            .unwrap();
        assert_eq!(out.starts.len(), 4);
        for s in &out.starts {
            assert!(out.log_likelihood >= s.start_log_likelihood);
            assert!(s.trace.windows(2).all(|w| w[1].value >= w[0].value));
        }
        let direct = log_likelihood(&out.spec, &design, &f, TrendMode::Ordinary).unwrap();
        assert_abs_diff_eq!(direct, out.log_likelihood, epsilon = 1e-9);
        let mut buf = Vec::new();
        out.write_trace_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("start,iteration,objective,p0,p1,p2\n"));
    }

    #[test]
    fn constant_data_is_flagged_degenerate() {
        let design = generate(&DoeConfig::lhs(12, 2, 8)).unwrap();
        let f = vec![2.5; 12];
        let cfg = FitConfig { seed: 3, ..Default::default() };
        let out = mle_fit(KernelFamily::Matern52, Structure::Additive, &design, &f, TrendMode::Ordinary, &cfg).unwrap();
        assert!(out.degenerate);
        assert!(out.spec.noise() <= 10.0 * cfg.bounds.noise.0, "noise {}", out.spec.noise());
    }

    #[test]
    fn fixed_noise_and_anisotropic_layout() {
        let (design, f) = smooth_data(12, 6);
        let cfg = FitConfig {
            isotropic: false,
            n_starts: 2,
            bounds: FitBounds { noise: (0.0, 0.0), ..Default::default() },
            ..Default::default()
        };
        let out = mle_fit(KernelFamily::Matern52, Structure::Additive, &design, &f, TrendMode::Ordinary, &cfg).unwrap();
        assert_eq!(out.spec.noise(), 0.0);
        assert_eq!(out.starts[0].trace[0].x.len(), 4);
    }

    #[test]
    fn scale_equivariance() {
        let (design, mut f) = smooth_data(20, 9);
        // deterministic jitter so that τ² is identified away from its bound
        f.iter_mut().enumerate().for_each(|(i, v)| *v += 0.05 * (37.0 * i as f64).sin());
        let cfg = FitConfig { seed: 2, ..Default::default() };
        let fit = |data: &[f64]| {
            mle_fit(KernelFamily::Matern52, Structure::Additive, &design, data, TrendMode::Ordinary, &cfg).unwrap()
        };
        let base = fit(&f);
        let c = 3.0;
        let scaled: Vec<f64> = f.iter().map(|v| c * v).collect();
        let big = fit(&scaled);
        let rel = |a: f64, b: f64| (a / b - 1.0).abs();
        assert!(rel(big.spec.total_variance(), c * c * base.spec.total_variance()) < 0.05);
        assert!(rel(big.spec.ranges()[0], base.spec.ranges()[0]) < 0.05);
        assert!(base.spec.noise() > 1e-6);
        assert!(rel(big.spec.noise(), c * c * base.spec.noise()) < 0.05);
    }
}
