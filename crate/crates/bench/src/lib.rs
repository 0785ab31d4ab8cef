//! Benchmark fixtures shared by the criterion targets.

use addgp::{fit, g_function, DoeConfig, GFunctionSpec, GpModel, KernelFamily, KernelSpec, TrendMode};

/// Additive Matérn 5/2 model on a `10·d` Latin hypercube of the g-function.
pub fn gfun_model(d: usize, seed: u64) -> GpModel {
    let design = addgp::doe::generate(&DoeConfig::lhs(10 * d, d, seed)).expect("design");
    let g = GFunctionSpec::uniform(d, 1.0).expect("coefficients");
    let y: Vec<f64> = design.rows().map(|x| g_function(&g, x).expect("in range")).collect();
    let spec = KernelSpec::additive_isotropic(KernelFamily::Matern52, d, 0.5, 1.0, 1e-4).expect("spec");
    fit(&spec, &design, &y, TrendMode::Ordinary).expect("fit")
}
