//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process exits non-zero if any check fails.
//!
//! Monte-Carlo oracles sample Gaussian vectors through a symmetric
//! eigendecomposition and condition with an LU solve, so they share no
//! linear algebra with the library's Cholesky path.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use addgp::additive::{centered_submodel, raw_submodel, submodel_mean, uniform_grid};
use addgp::bench::{
    add_sep_kernels, add_sep_predictivity, fit_emulator, g_main_effect, run_add_vs_sep, run_gfun_benchmark,
    run_p_collapse, sobol_index, solve_a1, GFunOptions, GFunctionSpec, ModelTag, Theta, GFUN_ADDITIVE_SHARE,
};
use addgp::doe::{derive_seed, latin_hypercube, rng_from_seed, uniform};
use addgp::{
    detect_rank_deficiency, eval_kernel, fit, g_function, gram_matrix, mle_fit, Design, DoeConfig, DoeKind,
    FitConfig, KernelFamily, KernelSpec, Structure, TrendMode,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = (bool, String);
type Check = (&'static str, Duration, fn() -> Outcome);

const SE: KernelFamily = KernelFamily::SquaredExponential;

fn main() -> ExitCode {
    let checks: [Check; 11] = [
        ("1 rectangle fourth corner", secs(1), rectangle_fourth_corner),
        ("2 additive path identity", secs(1), additive_path_identity),
        ("3 mean decomposition", secs(5), mean_decomposition),
        ("4 centered variance vs Monte Carlo", secs(120), centered_variance_mc),
        ("5 g-function Sobol indices", secs(60), sobol_targets),
        ("6 explained variance collapse", secs(120), p_collapse_trend),
        ("7 additive vs separable emulators", secs(180), add_vs_sep_trend),
        ("8 g-function Q2 ordering", secs(600), gfun_q2_ordering),
        ("9 centered main effect recovery", secs(300), main_effect_recovery),
        ("10 MLE range recovery", secs(120), mle_recovery),
        ("11 rank audit", secs(1), rank_audit),
    ];
    let mut failures = 0;
    for (name, limit, check) in checks {
        let start = Instant::now();
        let (ok, detail) = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = ok && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.2}s / limit {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws `N(0, cov)` vectors via `V·diag(√λ₊)`.
struct GaussianSampler {
    root: DMatrix<f64>,
}

impl GaussianSampler {
    fn new(cov: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(cov);
        let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        GaussianSampler {
            root: eig.eigenvectors * scale,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(self.root.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.root * z
    }
}

fn cov_between(spec: &KernelSpec, a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| eval_kernel(spec, &a[i], &b[j]).unwrap())
}

fn random_additive_se(rng: &mut ChaCha8Rng, d: usize) -> KernelSpec {
    let ranges = (0..d).map(|_| uniform_in(rng, 0.2, 1.0)).collect();
    let variances = (0..d).map(|_| uniform_in(rng, 0.5, 2.0)).collect();
    KernelSpec::additive(SE, ranges, variances, 0.0).unwrap()
}

fn rectangle_fourth_corner() -> Outcome {
    let mut rng = rng_from_seed(101);
    let (mut worst_v, mut worst_m) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let (a1, b1) = (uniform_in(&mut rng, 0.0, 0.45), uniform_in(&mut rng, 0.55, 1.0));
        let (a2, b2) = (uniform_in(&mut rng, 0.0, 0.45), uniform_in(&mut rng, 0.55, 1.0));
        let spec = random_additive_se(&mut rng, 2);
        let design = Design::from_rows(&[vec![a1, a2], vec![b1, a2], vec![a1, b2]]).unwrap();
        let f: Vec<f64> = (0..3).map(|_| uniform_in(&mut rng, -2.0, 2.0)).collect();
        let model = fit(&spec, &design, &f, TrendMode::Simple { mu: 0.0 }).unwrap();
        let (m, v) = model.predict(&[b1, b2]).unwrap();
        worst_v = worst_v.max(v);
        worst_m = worst_m.max((m - (f[1] + f[2] - f[0])).abs());
    }
    (
        worst_v <= 1e-8 && worst_m <= 1e-6,
        format!("max v = {worst_v:.2e}, max |m - (m2+m3-m1)| = {worst_m:.2e}"),
    )
}

fn additive_path_identity() -> Outcome {
    let mut rng = rng_from_seed(102);
    let mut worst = 0.0f64;
    let w = DVector::from_vec(vec![1.0, -1.0, -1.0, 1.0]);
    for _ in 0..100 {
        let spec = random_additive_se(&mut rng, 2);
        let (x1, x2) = (rng.random::<f64>(), rng.random::<f64>());
        let pts = [vec![x1, x2], vec![x1, 0.0], vec![0.0, x2], vec![0.0, 0.0]];
        let c = cov_between(&spec, &pts, &pts);
        worst = worst.max((w.transpose() * c * &w)[(0, 0)]);
    }
    (worst <= 1e-10, format!("max variance = {worst:.2e}"))
}

fn mean_decomposition() -> Outcome {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for d in [2usize, 5] {
        let mut rng = rng_from_seed(derive_seed(103, &[d as u64]));
        let design = latin_hypercube(10 * d, d, &mut rng).unwrap();
        let y: Vec<f64> = design
            .rows()
            .map(|x| x.iter().enumerate().map(|(i, v)| (3.0 * v + i as f64).sin()).sum::<f64>() + 0.1 * x[0] * x[1])
            .collect();
        let cfg = FitConfig { seed: 7, ..Default::default() };
        let outcome = mle_fit(SE, Structure::Additive, &design, &y, TrendMode::Ordinary, &cfg).unwrap();
        let model = fit(&outcome.spec, &design, &y, TrendMode::Ordinary).unwrap();
        let test = uniform(100, d, &mut rng).unwrap();
        let mut err = 0.0f64;
        for x in test.rows() {
            let parts: f64 = (0..d).map(|i| submodel_mean(&model, i, x[i]).unwrap()).sum();
            err = err.max((parts + model.trend_estimate() - model.predict_mean(x).unwrap()).abs());
        }
        detail.push(format!("d={d}: {err:.2e} (tau2={:.1e})", outcome.spec.noise()));
        worst = worst.max(err);
    }
    (worst <= 1e-8, format!("max |sum m_i + trend - m| {}", detail.join(", ")))
}

fn fig2_toy() -> (KernelSpec, Design, Vec<f64>) {
    let spec = KernelSpec::additive(SE, vec![0.6, 0.6], vec![1.0, 1.0], 0.0).unwrap();
    let design = Design::from_rows(&[
        vec![0.2, 0.2],
        vec![0.8, 0.2],
        vec![0.2, 0.8],
        vec![0.5, 0.45],
        vec![0.9, 0.6],
    ])
    .unwrap();
    (spec, design, vec![1.0, -0.5, 0.8, 0.2, -1.0])
}

fn centered_variance_mc() -> Outcome {
    let (spec, design, f) = fig2_toy();
    let model = fit(&spec, &design, &f, TrendMode::Simple { mu: 0.0 }).unwrap();
    let grid = uniform_grid(101);
    let centered = centered_submodel(&model, 0, &grid).unwrap();
    let raw = raw_submodel(&model, 0, &grid).unwrap();

    // Joint law of (Z₁ on the grid, Z on the design), conditioned by Matheron's update.
    let comp = KernelSpec::additive(SE, vec![0.6], vec![1.0], 0.0).unwrap();
    let grid_pts: Vec<Vec<f64>> = grid.iter().map(|&g| vec![g]).collect();
    let design_pts = design.to_rows();
    let design_x1: Vec<Vec<f64>> = design_pts.iter().map(|x| vec![x[0]]).collect();
    let (m, n) = (grid_pts.len(), design_pts.len());
    let mut joint = DMatrix::zeros(m + n, m + n);
    joint.view_mut((0, 0), (m, m)).copy_from(&cov_between(&comp, &grid_pts, &grid_pts));
    let cross = cov_between(&comp, &grid_pts, &design_x1);
    joint.view_mut((0, m), (m, n)).copy_from(&cross);
    joint.view_mut((m, 0), (n, m)).copy_from(&cross.transpose());
    joint.view_mut((m, m), (n, n)).copy_from(&cov_between(&spec, &design_pts, &design_pts));
    let weights = cov_between(&spec, &design_pts, &design_pts)
        .lu()
        .solve(&cross.transpose())
        .unwrap()
        .transpose();
    let fv = DVector::from_vec(f);
    let sampler = GaussianSampler::new(joint);
    let mut rng = rng_from_seed(104);

    let probes: Vec<usize> = (0..=10).map(|k| 10 * k).collect();
    let paths = 100_000;
    let mut sum = vec![0.0; probes.len()];
    let mut sum2 = vec![0.0; probes.len()];
    let mut sum4 = vec![0.0; probes.len()];
    for _ in 0..paths {
        let z = sampler.sample(&mut rng);
        let resid = &fv - z.rows(m, n);
        let path = z.rows(0, m) + &weights * resid;
        let integral = (0..m)
            .map(|k| if k == 0 || k == m - 1 { 0.5 * path[k] } else { path[k] })
            .sum::<f64>()
            / (m - 1) as f64;
        for (j, &k) in probes.iter().enumerate() {
            let c = path[k] - integral;
            sum[j] += c;
            sum2[j] += c * c;
            sum4[j] += c.powi(4);
        }
    }
    let np = paths as f64;
    let mut worst_z = 0.0f64;
    for (j, &k) in probes.iter().enumerate() {
        let mean = sum[j] / np;
        let var = sum2[j] / np - mean * mean;
        let se = ((sum4[j] / np - (sum2[j] / np).powi(2)) / np).sqrt();
        let z = (centered.variance[k] - var).abs() / se;
        worst_z = worst_z.max(z);
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (avg_c, avg_r) = (avg(&centered.variance), avg(&raw.variance));
    (
        worst_z <= 3.0 && avg_c <= avg_r + 1e-8,
        format!("max |v~1 - MC| = {worst_z:.2} SE; grid mean v~1 = {avg_c:.4} vs v1 = {avg_r:.4}"),
    )
}

fn sobol_targets() -> Outcome {
    let mut ok = true;
    let mut a1s = Vec::new();
    let mut worst_sum = 0.0f64;
    for d in [5usize, 10, 20, 30] {
        let a1 = solve_a1(d, GFUN_ADDITIVE_SHARE).unwrap();
        let g = GFunctionSpec::uniform(d, a1).unwrap();
        let total: f64 = (0..d).map(|i| sobol_index(&g, i).unwrap()).sum();
        worst_sum = worst_sum.max((total - GFUN_ADDITIVE_SHARE).abs());
        a1s.push(a1);
    }
    ok &= worst_sum <= 1e-10;
    ok &= a1s.windows(2).all(|w| w[1] > w[0]);

    // Pick-freeze first-order estimates in 100 batches of 10⁴.
    let g = GFunctionSpec::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let mut rng = rng_from_seed(105);
    let (batches, per_batch) = (100, 10_000);
    let mut estimates: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(batches)).collect();
    for _ in 0..batches {
        let mut acc = [[0.0f64; 4]; 4]; // Σy, Σy², Σy', Σyy' per index
        for _ in 0..per_batch {
            let x: [f64; 4] = std::array::from_fn(|_| rng.random());
            let x2: [f64; 4] = std::array::from_fn(|_| rng.random());
            let y = g_function(&g, &x).unwrap();
            for (i, a) in acc.iter_mut().enumerate() {
                let mut mixed = x2;
                mixed[i] = x[i];
                let yp = g_function(&g, &mixed).unwrap();
                a[0] += y;
                a[1] += y * y;
                a[2] += yp;
                a[3] += y * yp;
            }
        }
        let nb = per_batch as f64;
        for (i, a) in acc.iter().enumerate() {
            let var = a[1] / nb - (a[0] / nb).powi(2);
            estimates[i].push((a[3] / nb - a[0] / nb * a[2] / nb) / var);
        }
    }
    let mut worst_z = 0.0f64;
    for (i, est) in estimates.iter().enumerate() {
        let mean = est.iter().sum::<f64>() / batches as f64;
        let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (batches - 1) as f64).sqrt();
        let se = sd / (batches as f64).sqrt();
        worst_z = worst_z.max((mean - sobol_index(&g, i).unwrap()).abs() / se);
    }
    ok &= worst_z <= 3.0;
    (
        ok,
        format!(
            "max |sum S - 0.75| = {worst_sum:.1e}; a1(d=5,10,20,30) = {}; pick-freeze max dev {worst_z:.2} SE",
            a1s.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn p_collapse_trend() -> Outcome {
    let d_grid = [2usize, 5, 10, 15];
    let mut ok = true;
    let mut rows = Vec::new();
    for seed in 1..=5u64 {
        let recs = run_p_collapse(&d_grid, &[Theta::Fixed(0.5), Theta::SqrtD], 2000, seed).unwrap();
        let at = |d: usize, theta: f64| {
            recs.iter()
                .find(|r| r.d == d && r.parameter == theta)
                .map(|r| r.criterion)
                .unwrap()
        };
        let half: Vec<f64> = d_grid.iter().map(|&d| at(d, 0.5)).collect();
        let wide15 = at(15, 15f64.sqrt());
        ok &= half.windows(2).all(|w| w[1] < w[0]);
        ok &= wide15 > half[3];
        rows.push(format!(
            "seed {seed}: P(0.5) = [{}], P(sqrt d, 15) = {wide15:.3}",
            half.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(" ")
        ));
    }
    (ok, rows.join("; "))
}

fn add_vs_sep_trend() -> Outcome {
    let d_grid = [2usize, 3, 5, 10, 15];
    let recs = run_add_vs_sep(&d_grid, 2000, 7).unwrap();
    let at = |d: usize, tag: ModelTag| recs.iter().find(|r| r.d == d && r.model_tag == tag).unwrap().criterion;
    let mut ok = true;
    // m_A absorbs part of Y_S through k_Sᵀ(K_A+K_S)⁻¹k_A while the design is dense,
    // so the half-variance ceiling is checked where the comparison is made.
    for d in [10, 15] {
        ok &= at(d, ModelTag::MA) > at(d, ModelTag::MS);
        ok &= at(d, ModelTag::MA) <= 0.55;
    }

    // Monte-Carlo cross-check at d = 3 on 200 test points.
    let d = 3usize;
    let mut rng = rng_from_seed(107);
    let design = latin_hypercube(10 * d, d, &mut rng).unwrap();
    let test = uniform(200, d, &mut rng).unwrap();
    let (pa, ps) = add_sep_predictivity(d, &design, &test).unwrap();
    let (k_a, k_s) = add_sep_kernels(d).unwrap();
    let pts: Vec<Vec<f64>> = design.to_rows().into_iter().chain(test.to_rows()).collect();
    let (n, nt) = (design.n(), test.n());
    let sample_a = GaussianSampler::new(cov_between(&k_a, &pts, &pts));
    let sample_s = GaussianSampler::new(cov_between(&k_s, &pts, &pts));
    let g = gram_matrix(&k_a, &design, false).unwrap() + gram_matrix(&k_s, &design, false).unwrap();
    let lu = g.lu();
    let xs = design.to_rows();
    let ts = test.to_rows();
    let w_a = lu.solve(&cov_between(&k_a, &xs, &ts)).unwrap().transpose();
    let w_s = lu.solve(&cov_between(&k_s, &xs, &ts)).unwrap().transpose();
    let paths = 500;
    let mut err_a = Vec::with_capacity(paths);
    let mut err_s = Vec::with_capacity(paths);
    for _ in 0..paths {
        let y = sample_a.sample(&mut rng) + sample_s.sample(&mut rng);
        let (yx, yt) = (y.rows(0, n).into_owned(), y.rows(n, nt).into_owned());
        err_a.push((&yt - &w_a * &yx).norm_squared() / (2.0 * nt as f64));
        err_s.push((&yt - &w_s * &yx).norm_squared() / (2.0 * nt as f64));
    }
    let zscore = |errs: &[f64], p: f64| {
        let mean = errs.iter().sum::<f64>() / paths as f64;
        let sd = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (paths - 1) as f64).sqrt();
        ((1.0 - mean) - p).abs() / (sd / (paths as f64).sqrt())
    };
    let (za, zs) = (zscore(&err_a, pa), zscore(&err_s, ps));
    ok &= za <= 3.0 && zs <= 3.0;
    (
        ok,
        format!(
            "d = {d_grid:?}: P(mA) = [{}], P(mS) = [{}]; MC at d=3: {za:.2} / {zs:.2} SE",
            d_grid.iter().map(|&d| format!("{:.3}", at(d, ModelTag::MA))).collect::<Vec<_>>().join(" "),
            d_grid.iter().map(|&d| format!("{:.3}", at(d, ModelTag::MS))).collect::<Vec<_>>().join(" "),
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn gfun_q2_ordering() -> Outcome {
    let recs = run_gfun_benchmark(&[5], 10, 1000, 1, &GFunOptions::default()).unwrap();
    let q = |tag: ModelTag| -> Vec<f64> {
        recs.iter()
            .filter(|r| r.model_tag == tag && !r.failed())
            .map(|r| r.criterion)
            .collect()
    };
    let (akm, ukm) = (q(ModelTag::Akm), q(ModelTag::Ukm));
    let failed = recs.iter().filter(|r| r.failed()).count();
    let (ma, mu) = (median(akm.clone()), median(ukm.clone()));
    let above = akm.iter().filter(|&&v| v > 0.5).count();
    let max_q = akm.iter().chain(&ukm).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    (
        ma > mu,
        format!(
            "median Q2 AKM = {ma:.3}, UKM = {mu:.3}; AKM > 0.5 in {above}/10; max Q2 = {max_q:.3}; failed fits = {failed}"
        ),
    )
}

fn main_effect_recovery() -> Outcome {
    let d = 10;
    let a1 = solve_a1(d, GFUN_ADDITIVE_SHARE).unwrap();
    let g = GFunctionSpec::uniform(d, a1).unwrap();
    let grid = uniform_grid(11);
    let opts = GFunOptions::default();
    let results: Vec<(bool, f64)> = (0..10u64)
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(109, &[r]));
            let design = latin_hypercube(10 * d, d, &mut rng).unwrap();
            let y: Vec<f64> = design.rows().map(|x| g_function(&g, x).unwrap()).collect();
            let cfg = FitConfig { seed: derive_seed(109, &[r, 1]), ..opts.fit.clone() };
            let Ok(model) = fit_emulator(opts.family, Structure::Additive, &design, &y, &cfg) else {
                return (false, f64::INFINITY);
            };
            let curve = centered_submodel(&model, 0, &grid).unwrap();
            let worst = grid
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let err = (curve.mean[k] - g_main_effect(&g, 0, x).unwrap()).abs();
                    err / (3.0 * curve.variance[k].sqrt())
                })
                .fold(0.0, f64::max);
            (worst <= 1.0, worst)
        })
        .collect();
    let good = results.iter().filter(|r| r.0).count();
    (
        good >= 9,
        format!(
            "{good}/10 replicates within 3 sd; worst |error|/(3 sd) per replicate = [{}]",
            results.iter().map(|r| format!("{:.2}", r.1)).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn mle_recovery() -> Outcome {
    let truth = KernelSpec::additive(SE, vec![0.5, 0.5], vec![0.5, 0.5], 1e-4).unwrap();
    let mut thetas = Vec::new();
    for r in 0..10u64 {
        let mut rng = rng_from_seed(derive_seed(110, &[r]));
        let design = latin_hypercube(40, 2, &mut rng).unwrap();
        let cov = gram_matrix(&truth, &design, true).unwrap();
        let f = GaussianSampler::new(cov).sample(&mut rng);
        let cfg = FitConfig { seed: derive_seed(110, &[r, 1]), ..Default::default() };
        let theta = mle_fit(SE, Structure::Additive, &design, f.as_slice(), TrendMode::Simple { mu: 0.0 }, &cfg)
            .map(|o| o.spec.ranges()[0])
            .unwrap_or(f64::NAN);
        thetas.push(theta);
    }
    let good = thetas.iter().filter(|&&t| (0.25..=1.0).contains(&t)).count();
    (
        good >= 8,
        format!(
            "{good}/10 within a factor 2 of 0.5; theta = [{}]",
            thetas.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn rank_audit() -> Outcome {
    let spec = KernelSpec::additive(SE, vec![0.6, 0.6], vec![1.0, 1.0], 0.0).unwrap();
    let fixed = |kind, n| addgp::doe::generate(&DoeConfig { n, d: 2, seed: 0, kind }).unwrap();
    let left = detect_rank_deficiency(&spec, &fixed(DoeKind::Fig1Left, 4), 1e-8).unwrap();
    let right = detect_rank_deficiency(&spec, &fixed(DoeKind::Fig1Right, 6), 1e-8).unwrap();

    let mut ok = left.deficient && left.null_vectors.len() == 1 && left.implicated_points[0] == vec![0, 1, 2, 3];
    if let Some(v) = left.null_vectors.first() {
        let reference = [-0.5, 0.5, 0.5, -0.5];
        ok &= v.iter().zip(reference).all(|(a, b)| (a - b).abs() < 1e-6);
    }
    ok &= right.deficient && right.null_vectors.len() == 1 && right.implicated_points[0] == (0..6).collect::<Vec<_>>();

    let lhs_spec = KernelSpec::additive(SE, vec![0.3, 0.3], vec![1.0, 1.0], 0.0).unwrap();
    let full_rank = (0..20u64)
        .filter(|&s| {
            let design = addgp::doe::generate(&DoeConfig::lhs(10, 2, s)).unwrap();
            !detect_rank_deficiency(&lhs_spec, &design, 1e-8).unwrap().deficient
        })
        .count();
    ok &= full_rank == 20;
    (
        ok,
        format!(
            "left: {}; right support {:?}; {full_rank}/20 LHS designs full rank",
            left.relations().join(" | "),
            right.implicated_points.first()
        ),
    )
}
