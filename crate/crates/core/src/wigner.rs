//! Wigner function of a single-mode state on a rectangular phase-space grid.
//!
//! Convention: ℏ = 1, `[x, p] = i`, `α = (x + ip)/√2`, so `∬W dx dp = 1` and
//! `|W| ≤ 1/π`. Values come from the displaced-parity formula
//! `W(α) = (1/π) Σ_n (−1)^n |⟨n|D(−α)|ψ⟩|²`.
//!
//! The displacement splits as `D(−α) ∝ e^{−ipx̂} e^{ixp̂}`. Both factors are
//! applied through one eigendecomposition of the truncated `x̂`, since
//! `p̂ = R x̂ R†` with `R = diag(iⁿ)`. The global phase drops out of `|·|²`.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};

const INPUT_NORM_TOL: f64 = 1e-8;

/// Population of the top working level above which the grid is flagged.
pub const EDGE_OCCUPANCY_WARN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    /// `values[(i, j)] = W(x_i, p_j)`.
    pub values: DMatrix<f64>,
    /// Largest population left in the top working level over the grid.
    pub edge_occupancy: f64,
}

impl WignerGrid {
    /// Trapezoidal estimate of `∬W dx dp`.
    pub fn integral(&self) -> f64 {
        let wx = trapezoid_weights(&self.x_axis);
        let wp = trapezoid_weights(&self.p_axis);
        let mut total = 0.0;
        for (i, a) in wx.iter().enumerate() {
            for (j, b) in wp.iter().enumerate() {
                total += a * b * self.values[(i, j)];
            }
        }
        total
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes rows of `x, p, W`, x outermost.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::invalid("csv", e.to_string());
        w.write_record(["x", "p", "W"]).map_err(err)?;
        for (i, x) in self.x_axis.iter().enumerate() {
            for (j, p) in self.p_axis.iter().enumerate() {
                w.write_record([format!("{x:.12e}"), format!("{p:.12e}"), format!("{:.12e}", self.values[(i, j)])])
                    .map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::invalid("csv", e.to_string()))
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (axis[i] - axis[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

fn check_state(q: &[C64]) -> Result<()> {
    let norm = q.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if q.is_empty() || (norm - 1.0).abs() > INPUT_NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::invalid(name, "axis is empty"));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(name, "axis has non-finite entries"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(name, "axis must be strictly increasing"));
    }
    Ok(())
}

/// Truncation used for the displacement, from the highest occupied level and
/// the largest `|α|` on the grid.
pub fn working_dim(len: usize, max_alpha: f64) -> usize {
    let reach = ((len.saturating_sub(1)) as f64).sqrt() + max_alpha;
    let d = (reach * reach + 6.0 * reach + 10.0).ceil() as usize;
    d.max(len)
}

/// Eigenvectors and eigenvalues of the truncated `x̂ = (a + a†)/√2`.
fn position_eigen(dim: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut x = DMatrix::<f64>::zeros(dim, dim);
    for n in 1..dim {
        let v = (n as f64 / 2.0).sqrt();
        x[(n - 1, n)] = v;
        x[(n, n - 1)] = v;
    }
    let eig = SymmetricEigen::new(x);
    (eig.eigenvectors, eig.eigenvalues)
}

/// `iⁿ`.
fn i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Real matrix times complex vector.
fn real_mul(m: &DMatrix<f64>, v: &DVector<C64>) -> DVector<C64> {
    let re = m * v.map(|c| c.re);
    let im = m * v.map(|c| c.im);
    DVector::from_fn(v.len(), |i, _| C64::new(re[i], im[i]))
}

fn real_tr_mul(m: &DMatrix<f64>, v: &DVector<C64>) -> DVector<C64> {
    let re = m.tr_mul(&v.map(|c| c.re));
    let im = m.tr_mul(&v.map(|c| c.im));
    DVector::from_fn(v.len(), |i, _| C64::new(re[i], im[i]))
}

/// Wigner function of `Σ q_n|n⟩` on the grid `x_axis × p_axis`.
///
/// Logs a warning when the working truncation is reached by more than
/// [`EDGE_OCCUPANCY_WARN`]; the value is kept on the result.
pub fn wigner_function(q: &[C64], x_axis: &[f64], p_axis: &[f64]) -> Result<WignerGrid> {
    check_state(q)?;
    check_axis("x_axis", x_axis)?;
    check_axis("p_axis", p_axis)?;

    let max_abs = |a: &[f64]| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_alpha = (max_abs(x_axis).powi(2) + max_abs(p_axis).powi(2)).sqrt() / 2f64.sqrt();
    let dim = working_dim(q.len(), max_alpha);
    let (v, lambda) = position_eigen(dim);

    let mut psi = DVector::<C64>::zeros(dim);
    for (n, c) in q.iter().enumerate() {
        psi[n] = *c;
    }
    // R†ψ, so that e^{ixp̂}ψ = R V e^{ixΛ} Vᵀ R†ψ
    let rotated = DVector::from_fn(dim, |n, _| i_pow(n).conj() * psi[n]);
    let base = real_tr_mul(&v, &rotated);

    let columns: Vec<(Vec<f64>, f64)> = x_axis
        .par_iter()
        .map(|&x| {
            let shifted = DVector::from_fn(dim, |k, _| C64::from_polar(1.0, x * lambda[k]) * base[k]);
            let chi = real_mul(&v, &shifted);
            let chi = DVector::from_fn(dim, |n, _| i_pow(n) * chi[n]);
            let c = real_tr_mul(&v, &chi);
            let mut col = Vec::with_capacity(p_axis.len());
            let mut edge: f64 = 0.0;
            for &p in p_axis {
                let w = DVector::from_fn(dim, |k, _| C64::from_polar(1.0, -p * lambda[k]) * c[k]);
                let amp = real_mul(&v, &w);
                let parity: f64 =
                    amp.iter().enumerate().map(|(n, a)| if n % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() }).sum();
                edge = edge.max(amp[dim - 1].norm_sqr());
                col.push(parity / PI);
            }
            (col, edge)
        })
        .collect();

    let edge_occupancy = columns.iter().fold(0.0f64, |m, (_, e)| m.max(*e));
    if edge_occupancy > EDGE_OCCUPANCY_WARN {
        warn!("wigner: working truncation {dim} reached with occupancy {edge_occupancy:.3e}");
    }
    let values = DMatrix::from_fn(x_axis.len(), p_axis.len(), |i, j| columns[i].0[j]);
    Ok(WignerGrid { x_axis: x_axis.to_vec(), p_axis: p_axis.to_vec(), values, edge_occupancy })
}

/// Hermite functions `ψ_0..ψ_{len−1}` at `x`.
pub fn hermite_functions(x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if len > 1 {
        out.push(2f64.sqrt() * x * out[0]);
    }
    for n in 1..len.saturating_sub(1) {
        let next = (2.0 / (n + 1) as f64).sqrt() * x * out[n] - (n as f64 / (n + 1) as f64).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// `|ψ(x)|²` for position (`momentum = false`) or momentum amplitudes, where
/// the momentum wavefunction carries `(−i)ⁿ`.
fn density(q: &[C64], x: f64, momentum: bool) -> f64 {
    let h = hermite_functions(x, q.len());
    let amp: C64 = q
        .iter()
        .zip(&h)
        .enumerate()
        .map(|(n, (c, hn))| if momentum { c * i_pow(n).conj() * hn } else { c * hn })
        .sum();
    amp.norm_sqr()
}

/// Probability outside `±3σ` of a Gaussian, the tolerated uncovered mass.
pub const MAX_UNCOVERED_MASS: f64 = 2.7e-3;

/// Quadrature mass of the position or momentum density over `axis`.
fn covered_mass(q: &[C64], axis: &[f64], momentum: bool) -> f64 {
    let w = trapezoid_weights(axis);
    axis.iter().zip(&w).map(|(&x, wi)| wi * density(q, x, momentum)).sum()
}

/// Largest absolute differences between the grid marginals `∫W dp`, `∫W dx`
/// and the Hermite-expansion densities of `q`.
pub fn marginal_check(g: &WignerGrid, q: &[C64]) -> Result<(f64, f64)> {
    check_state(q)?;
    for (name, axis, momentum) in [("x", &g.x_axis, false), ("p", &g.p_axis, true)] {
        let outside = 1.0 - covered_mass(q, axis, momentum);
        if outside > MAX_UNCOVERED_MASS {
            return Err(Error::UndersizedGrid(format!("{name} axis leaves probability {outside:.3e} uncovered")));
        }
    }
    let wx = trapezoid_weights(&g.x_axis);
    let wp = trapezoid_weights(&g.p_axis);

    let mut err_x: f64 = 0.0;
    for (i, &x) in g.x_axis.iter().enumerate() {
        let marginal: f64 = wp.iter().enumerate().map(|(j, w)| w * g.values[(i, j)]).sum();
        err_x = err_x.max((marginal - density(q, x, false)).abs());
    }
    let mut err_p: f64 = 0.0;
    for (j, &p) in g.p_axis.iter().enumerate() {
        let marginal: f64 = wx.iter().enumerate().map(|(i, w)| w * g.values[(i, j)]).sum();
        err_p = err_p.max((marginal - density(q, p, true)).abs());
    }
    Ok((err_x, err_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fock(n: usize) -> Vec<C64> {
        let mut q = vec![C64::new(0.0, 0.0); n + 1];
        q[n] = C64::new(1.0, 0.0);
        q
    }

    fn laguerre(n: usize, x: f64) -> f64 {
        let (mut a, mut b) = (1.0, 1.0 - x);
        if n == 0 {
            return a;
        }
        for k in 1..n {
            let c = ((2 * k + 1) as f64 - x) * b / (k + 1) as f64 - k as f64 * a / (k + 1) as f64;
            a = b;
            b = c;
        }
        b
    }

    fn fock_wigner(n: usize, x: f64, p: f64) -> f64 {
        let r2 = x * x + p * p;
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign / PI * laguerre(n, 2.0 * r2) * (-r2).exp()
    }

    fn uniform(n: usize) -> Vec<C64> {
        vec![C64::new(1.0 / ((n + 1) as f64).sqrt(), 0.0); n + 1]
    }

    #[test]
    fn origin_values() {
        let axis = [0.0];
        let vac = wigner_function(&fock(0), &axis, &axis).unwrap();
        assert_abs_diff_eq!(vac.values[(0, 0)], 1.0 / PI, epsilon = 1e-8);
        let one = wigner_function(&fock(1), &axis, &axis).unwrap();
        assert_abs_diff_eq!(one.values[(0, 0)], -1.0 / PI, epsilon = 1e-8);
    }

    #[test]
    fn fock_states_match_laguerre_form() {
        let axis = linspace(-4.0, 4.0, 17);
        for n in [0, 1, 3, 6] {
            let g = wigner_function(&fock(n), &axis, &axis).unwrap();
            for (i, &x) in axis.iter().enumerate() {
                for (j, &p) in axis.iter().enumerate() {
                    assert_abs_diff_eq!(g.values[(i, j)], fock_wigner(n, x, p), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn displaced_vacuum_is_shifted_gaussian() {
        let alpha = C64::new(1.0, -0.5);
        let q = crate::states::coherent_amplitudes(alpha, 40);
        let (x0, p0) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        let axis = linspace(-3.0, 3.0, 13);
        let g = wigner_function(&q, &axis, &axis).unwrap();
        for (i, &x) in axis.iter().enumerate() {
            for (j, &p) in axis.iter().enumerate() {
                let exact = (-(x - x0).powi(2) - (p - p0).powi(2)).exp() / PI;
                assert_abs_diff_eq!(g.values[(i, j)], exact, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn normalization_and_bound() {
        let axis = linspace(-6.0, 6.0, 201);
        let g = wigner_function(&uniform(10), &axis, &axis).unwrap();
        assert_abs_diff_eq!(g.integral(), 1.0, epsilon = 1e-3);
        assert!(g.max_abs() <= 1.0 / PI + 1e-9);
        assert!(g.edge_occupancy < EDGE_OCCUPANCY_WARN);
    }

    #[test]
    fn marginals() {
        let axis = linspace(-6.0, 6.0, 201);
        let g = wigner_function(&fock(0), &axis, &axis).unwrap();
        let (ex, ep) = marginal_check(&g, &fock(0)).unwrap();
        assert!(ex < 1e-6 && ep < 1e-6, "{ex} {ep}");

        let g = wigner_function(&fock(3), &axis, &axis).unwrap();
        let (ex, ep) = marginal_check(&g, &fock(3)).unwrap();
        assert!(ex < 1e-5 && ep < 1e-5, "{ex} {ep}");

        let q = uniform(10);
        let g = wigner_function(&q, &axis, &axis).unwrap();
        let (ex, ep) = marginal_check(&g, &q).unwrap();
        assert!(ex < 1e-4 && ep < 1e-4, "{ex} {ep}");
    }

    #[test]
    fn vacuum_marginal_against_gaussian() {
        for x in [-2.0, 0.0, 0.7] {
            assert_abs_diff_eq!(density(&fock(0), x, false), (-x * x).exp() / PI.sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn undersized_grid_is_rejected() {
        let axis = linspace(-1.0, 1.0, 21);
        let g = wigner_function(&fock(0), &axis, &axis).unwrap();
        assert!(matches!(marginal_check(&g, &fock(0)), Err(Error::UndersizedGrid(_))));
    }

    #[test]
    fn rotation_covariance() {
        let q: Vec<C64> =
            [0.5, 0.3, -0.4, 0.6, 0.2].iter().enumerate().map(|(n, &a)| C64::from_polar(a, 0.3 * n as f64)).collect();
        let norm = q.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let q: Vec<C64> = q.iter().map(|c| c / norm).collect();
        for phi in [PI / 2.0, 0.7] {
            let rotated: Vec<C64> = q.iter().enumerate().map(|(n, c)| c * C64::from_polar(1.0, phi * n as f64)).collect();
            for (x, p) in [(0.3, -1.1), (1.5, 0.2), (-0.8, -0.6)] {
                let lhs = wigner_function(&rotated, &[x], &[p]).unwrap().values[(0, 0)];
                // W'(α) = W(α e^{−iφ})
                let (c, s) = (phi.cos(), phi.sin());
                let (xr, pr) = (c * x + s * p, -s * x + c * p);
                let rhs = wigner_function(&q, &[xr], &[pr]).unwrap().values[(0, 0)];
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn quarter_turn_permutes_grid() {
        let q = uniform(4);
        let rotated: Vec<C64> = q.iter().enumerate().map(|(n, c)| c * i_pow(n)).collect();
        let axis = linspace(-3.0, 3.0, 31);
        let a = wigner_function(&q, &axis, &axis).unwrap();
        let b = wigner_function(&rotated, &axis, &axis).unwrap();
        let n = axis.len();
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!(b.values[(i, j)], a.values[(j, n - 1 - i)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let q = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        assert!(matches!(wigner_function(&q, &[0.0], &[0.0]), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let xs = linspace(-12.0, 12.0, 2401);
        let w = trapezoid_weights(&xs);
        let table: Vec<Vec<f64>> = xs.iter().map(|&x| hermite_functions(x, 8)).collect();
        for m in 0..8 {
            for n in 0..8 {
                let s: f64 = table.iter().zip(&w).map(|(h, wi)| wi * h[m] * h[n]).sum();
                assert_abs_diff_eq!(s, if m == n { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let g = wigner_function(&fock(0), &[-1.0, 1.0], &[0.0]).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,p,W");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("-1.000000000000e0,0.000000000000e0,"));
    }
}
