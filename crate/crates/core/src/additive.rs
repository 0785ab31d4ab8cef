//! Per-dimension submodels of an additive-kernel model and their centered
//! main effects.
//!
//! For an additive kernel `K = ∑ Kᵢ` the Kriging mean splits as
//! `m(x) = trend + ∑ mᵢ(xᵢ)` with `mᵢ(xᵢ) = kᵢ(xᵢ)ᵀα`. The submodels are
//! only defined up to a constant, so the centered versions
//! `m̃ᵢ = mᵢ - ∫mᵢ` and the variance `ṽᵢ` of `Zᵢ(xᵢ) - ∫Zᵢ` given the data
//! are also provided. All integrals over `[0,1]` use the 64-point
//! Gauss–Legendre rule.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernels::component_cross_cov;
use crate::kriging::{clamp_variance, GpModel};
use crate::quadrature::GaussLegendre;

/// Default number of equispaced grid points for exported curves.
pub const DEFAULT_GRID_POINTS: usize = 101;

/// Integrals of dimension `i` that do not depend on the evaluation point.
#[derive(Debug, Clone)]
pub(crate) struct ComponentIntegrals {
    /// `K⁻¹ ∫kᵢ(s) ds`
    solved_mean_cov: DVector<f64>,
    /// `∫mᵢ(s) ds`
    mean_integral: f64,
    /// `∬Kᵢ(s,t) ds dt`
    prior_double: f64,
    /// `∬kᵢ(t)ᵀK⁻¹kᵢ(s) ds dt`
    posterior_double: f64,
}

/// One dimension's main effect on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmodelCurve {
    pub dim: usize,
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub centered: bool,
}

impl SubmodelCurve {
    /// CSV with a `#` header recording centering and grid size, then
    /// `dim,x,mean,variance` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# centered={},grid={}", self.centered, self.grid.len())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dim", "x", "mean", "variance"])?;
        for k in 0..self.grid.len() {
            w.write_record(&[
                self.dim.to_string(),
                self.grid[k].to_string(),
                self.mean[k].to_string(),
                self.variance[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `m` equispaced points on `[0,1]`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    match m {
        0 => vec![],
        1 => vec![0.5],
        _ => (0..m).map(|k| k as f64 / (m - 1) as f64).collect(),
    }
}

fn check_component(model: &GpModel, dim: usize) -> Result<()> {
    if !model.spec().is_additive() {
        return Err(Error::UnsupportedStructure);
    }
    if dim >= model.dim() {
        return Err(Error::invalid(format!(
            "dimension index {dim} out of range for d = {}",
            model.dim()
        )));
    }
    Ok(())
}

fn check_coordinate(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("coordinate {x} outside [0,1]")));
    }
    Ok(())
}

/// `mᵢ(xᵢ) = kᵢ(xᵢ)ᵀα`. The trend belongs to the global model and is excluded.
pub fn submodel_mean(model: &GpModel, dim: usize, xi: f64) -> Result<f64> {
    check_component(model, dim)?;
    let k = component_cross_cov(model.spec(), model.design(), dim, xi);
    Ok(k.dot(model.dual_weights()))
}

/// `vᵢ(xᵢ) = Kᵢ(xᵢ,xᵢ) - kᵢ(xᵢ)ᵀK⁻¹kᵢ(xᵢ)`, where the other dimensions act as
/// observation noise.
pub fn submodel_var(model: &GpModel, dim: usize, xi: f64) -> Result<f64> {
    check_component(model, dim)?;
    let prior = model.spec().dim_variance(dim);
    let k = component_cross_cov(model.spec(), model.design(), dim, xi);
    clamp_variance(prior - model.factor().quad_form(&k), prior)
}

fn integrals(model: &GpModel, dim: usize) -> &ComponentIntegrals {
    model.integrals[dim].get_or_init(|| {
        let q = GaussLegendre::standard();
        let spec = model.spec();
        let design = model.design();
        let mut mean_cov = DVector::zeros(design.n());
        for (&s, &w) in q.nodes().iter().zip(q.weights()) {
            mean_cov.axpy(w, &component_cross_cov(spec, design, dim, s), 1.0);
        }
        let solved = model.factor().solve(&mean_cov);
        ComponentIntegrals {
            mean_integral: mean_cov.dot(model.dual_weights()),
            prior_double: q.integrate_2d(|s, t| spec.component(dim, s, t)),
            posterior_double: mean_cov.dot(&solved),
            solved_mean_cov: solved,
        }
    })
}

/// `∫₀¹ mᵢ(s) ds`
pub fn submodel_mean_integral(model: &GpModel, dim: usize) -> Result<f64> {
    check_component(model, dim)?;
    Ok(integrals(model, dim).mean_integral)
}

/// `m̃ᵢ(xᵢ) = mᵢ(xᵢ) - ∫mᵢ`
pub fn centered_mean(model: &GpModel, dim: usize, xi: f64) -> Result<f64> {
    Ok(submodel_mean(model, dim, xi)? - submodel_mean_integral(model, dim)?)
}

/// Conditional variance of `Zᵢ(xᵢ) - ∫Zᵢ(s) ds`:
///
/// `vᵢ(xᵢ) - 2∫Kᵢ(xᵢ,s)ds + 2∫kᵢ(xᵢ)ᵀK⁻¹kᵢ(s)ds + ∬Kᵢ - ∬kᵢᵀK⁻¹kᵢ`.
pub fn centered_var(model: &GpModel, dim: usize, xi: f64) -> Result<f64> {
    check_component(model, dim)?;
    let spec = model.spec();
    let prior = spec.dim_variance(dim);
    let cache = integrals(model, dim);
    let k = component_cross_cov(spec, model.design(), dim, xi);
    let v = prior - model.factor().quad_form(&k);
    let prior_single = GaussLegendre::standard().integrate(|s| spec.component(dim, xi, s));
    let posterior_single = k.dot(&cache.solved_mean_cov);
    let total = v - 2.0 * prior_single + 2.0 * posterior_single + cache.prior_double
        - cache.posterior_double;
    clamp_variance(total, prior)
}

/// Submodel of dimension `dim` on `grid`, centered (`m̃ᵢ`, `ṽᵢ`).
pub fn centered_submodel(model: &GpModel, dim: usize, grid: &[f64]) -> Result<SubmodelCurve> {
    check_component(model, dim)?;
    let mut mean = Vec::with_capacity(grid.len());
    let mut variance = Vec::with_capacity(grid.len());
    for &x in grid {
        check_coordinate(x)?;
        mean.push(centered_mean(model, dim, x)?);
        variance.push(centered_var(model, dim, x)?);
    }
    Ok(SubmodelCurve {
        dim,
        grid: grid.to_vec(),
        mean,
        variance,
        centered: true,
    })
}

/// Uncentered submodel of dimension `dim` on `grid` (`mᵢ`, `vᵢ`).
pub fn raw_submodel(model: &GpModel, dim: usize, grid: &[f64]) -> Result<SubmodelCurve> {
    check_component(model, dim)?;
    let mut mean = Vec::with_capacity(grid.len());
    let mut variance = Vec::with_capacity(grid.len());
    for &x in grid {
        check_coordinate(x)?;
        mean.push(submodel_mean(model, dim, x)?);
        variance.push(submodel_var(model, dim, x)?);
    }
    Ok(SubmodelCurve {
        dim,
        grid: grid.to_vec(),
        mean,
        variance,
        centered: false,
    })
}
