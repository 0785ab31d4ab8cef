//! Box-constrained Nelder–Mead simplex minimization.

/// One accepted iteration: the best point of the simplex after the step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below `f_tol·(1 + |f_best|)`.
    pub f_tol: f64,
    /// ... and the simplex diameter falls below `x_tol`.
    pub x_tol: f64,
    pub initial_step: f64,
    /// Rebuild the simplex around the best point after convergence, at most this many times.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 2000,
            f_tol: 1e-12,
            x_tol: 1e-8,
            initial_step: 0.5,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub trace: Vec<TraceEntry>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Objective<'a, F> {
    f: F,
    lower: &'a [f64],
    upper: &'a [f64],
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Objective<'_, F> {
    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimize `f` over the box `[lower, upper]` starting from `x0`.
///
/// Trial points are projected onto the box. Non-finite objective values are
/// treated as `+∞`. Panics if the bounds are inconsistent with `x0`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &NelderMeadOptions,
) -> Minimum {
    let dim = x0.len();
    assert!(lower.len() == dim && upper.len() == dim, "bound length mismatch");
    assert!(
        lower.iter().zip(upper).all(|(l, u)| l <= u),
        "lower bound above upper bound"
    );
    let mut obj = Objective { f, lower, upper, evals: 0 };
    let mut best = x0.to_vec();
    obj.project(&mut best);
    let mut best_value = obj.eval(&best);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        value: best_value,
        x: best.clone(),
    }];
    if dim == 0 {
        return Minimum { x: best, value: best_value, evals: obj.evals, trace };
    }

    let mut step = opts.initial_step;
    let mut iteration = 0;
    for _ in 0..=opts.restarts {
        let before = best_value;
        let (x, v) = run_simplex(&mut obj, &best, best_value, step, opts, &mut iteration, &mut trace);
        if v <= best_value {
            best = x;
            best_value = v;
        }
        if obj.evals >= opts.max_evals || before - best_value <= opts.f_tol * (1.0 + best_value.abs()) {
            break;
        }
        step *= 0.5;
    }
    if trace.last().is_some_and(|t| best_value < t.value) {
        trace.push(TraceEntry { iteration, value: best_value, x: best.clone() });
    }
    Minimum {
        x: best,
        value: best_value,
        evals: obj.evals,
        trace,
    }
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    obj: &mut Objective<'_, F>,
    start: &[f64],
    start_value: f64,
    step: f64,
    opts: &NelderMeadOptions,
    iteration: &mut usize,
    trace: &mut Vec<TraceEntry>,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut values = vec![start_value];
    for i in 0..dim {
        let mut p = start.to_vec();
        let width = obj.upper[i] - obj.lower[i];
        let h = if width > 0.0 { step.min(0.5 * width) } else { 0.0 };
        p[i] = if p[i] + h <= obj.upper[i] { p[i] + h } else { p[i] - h };
        obj.project(&mut p);
        values.push(obj.eval(&p));
        simplex.push(p);
    }
    let mut order: Vec<usize> = (0..=dim).collect();

    while obj.evals < opts.max_evals {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (lo, hi, second) = (order[0], order[dim], order[dim - 1]);

        let spread = values[hi] - values[lo];
        let diameter = simplex
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[lo])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= opts.f_tol * (1.0 + values[lo].abs()) && diameter <= opts.x_tol)
            || diameter == 0.0
        {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &j in &order[..dim] {
            for (c, v) in centroid.iter_mut().zip(&simplex[j]) {
                *c += v / dim as f64;
            }
        }
        let toward = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, x)| c + t * (c - x))
                .collect()
        };

        let mut xr = toward(REFLECT, &simplex[hi]);
        obj.project(&mut xr);
        let fr = obj.eval(&xr);
        if fr < values[lo] {
            let mut xe = toward(EXPAND, &simplex[hi]);
            obj.project(&mut xe);
            let fe = obj.eval(&xe);
            if fe < fr {
                simplex[hi] = xe;
                values[hi] = fe;
            } else {
                simplex[hi] = xr;
                values[hi] = fr;
            }
        } else if fr < values[second] {
            simplex[hi] = xr;
            values[hi] = fr;
        } else {
            let (mut xc, outside) = if fr < values[hi] {
                (toward(CONTRACT, &simplex[hi]), true)
            } else {
                (toward(-CONTRACT, &simplex[hi]), false)
            };
            obj.project(&mut xc);
            let fc = obj.eval(&xc);
            let accept = if outside { fc <= fr } else { fc < values[hi] };
            if accept {
                simplex[hi] = xc;
                values[hi] = fc;
            } else {
                let best = simplex[lo].clone();
                for &j in &order[1..] {
                    let mut p: Vec<f64> = best
                        .iter()
                        .zip(&simplex[j])
                        .map(|(b, x)| b + SHRINK * (x - b))
                        .collect();
                    obj.project(&mut p);
                    values[j] = obj.eval(&p);
                    simplex[j] = p;
                }
            }
        }

        *iteration += 1;
        let (b, &v) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty simplex");
        let last = trace.last().map_or(f64::INFINITY, |t| t.value);
        if v < last {
            trace.push(TraceEntry { iteration: *iteration, value: v, x: simplex[b].clone() });
        } else if let Some(t) = trace.last().cloned() {
            trace.push(TraceEntry { iteration: *iteration, ..t });
        }
    }
    let (b, &v) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty simplex");
    (simplex[b].clone(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let opts = NelderMeadOptions { max_evals: 5000, ..Default::default() };
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
        assert!(m.value < 1e-8);
        assert!(m.evals <= 5000 + 10);
    }

    #[test]
    fn respects_bounds() {
        let m = nelder_mead(
            |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &[-1.0, -1.0],
            &[1.0, 1.0],
            &NelderMeadOptions::default(),
        );
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] + 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn trace_is_monotone_and_infinite_values_are_survivable() {
        let f = |x: &[f64]| if x[0] > 2.0 { f64::NAN } else { (x[0] - 1.5).powi(2) + x[1].abs() };
        let m = nelder_mead(f, &[-3.0, 2.0], &[-10.0, -10.0], &[10.0, 10.0], &NelderMeadOptions::default());
        assert!(m.trace.windows(2).all(|w| w[1].value <= w[0].value));
        assert!(m.value < 1e-6);
        assert_eq!(m.trace.last().unwrap().value, m.value);
    }

    #[test]
    fn evaluation_budget_is_honoured() {
        let opts = NelderMeadOptions { max_evals: 30, ..Default::default() };
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts);
        // one iteration may overshoot by at most dim + 1 shrink evaluations
        assert!(m.evals <= 30 + 3);
    }
}
