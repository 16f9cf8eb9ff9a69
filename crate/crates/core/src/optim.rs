//! Derivative-free Nelder–Mead minimization.
//!
//! Standard coefficients (reflection 1, expansion 2, contraction ½, shrink ½).
//! Termination is by simplex diameter, the largest distance between any two
//! vertices, or by an iteration cap.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    pub diameter_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iterations: 2000, diameter_tolerance: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in simplex.iter().enumerate() {
        for b in &simplex[i + 1..] {
            let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            worst = worst.max(d);
        }
    }
    worst
}

/// NaN objective values are treated as +∞.
fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `f` from an axis-aligned simplex `x0 + step_i e_i`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], steps: &[f64], opts: NelderMeadOptions) -> Minimum {
    let n = x0.len();
    assert_eq!(steps.len(), n, "one step per coordinate");
    if n == 0 {
        return Minimum { x: Vec::new(), value: eval(&f, x0), iterations: 0, converged: true };
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(&f, v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // order best → worst, ties resolved by insertion order
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if diameter(&simplex) < opts.diameter_tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

        let reflected = along(-1.0);
        let fr = eval(&f, &reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(&f, &expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = along(-0.5);
            let fc = eval(&f, &c);
            (c, fc)
        } else {
            let c = along(0.5);
            let fc = eval(&f, &c);
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let (best, rest) = simplex.split_at_mut(1);
            for (x, b) in rest[i - 1].iter_mut().zip(&best[0]) {
                *x = b + 0.5 * (*x - b);
            }
            values[i] = eval(&f, &simplex[i]);
        }
    }
    Minimum { x: simplex[0].clone(), value: values[0], iterations, converged }
}
