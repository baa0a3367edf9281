//! Uniform grid on `(0, L)` and the flux-form difference operators.
//!
//! Nodes are `x_i = i h`, `i = 0..=n`; fluxes live at midpoints `x_{i+1/2}`,
//! indexed `0..n`. Nodal vectors include both boundary nodes, which stay zero.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub length: f64,
    pub n_cells: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(length: f64, n_cells: usize) -> Self {
        Grid {
            length,
            n_cells,
            h: length / n_cells as f64,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|i| i as f64 * self.h).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_cells)
            .map(|i| (i as f64 + 0.5) * self.h)
            .collect()
    }

    /// Midpoint gradients `(u_{i+1} - u_i) / h`.
    pub fn gradient_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.n_nodes());
        for (g, w) in out.iter_mut().zip(u.windows(2)) {
            *g = (w[1] - w[0]) / self.h;
        }
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_cells];
        self.gradient_into(u, &mut g);
        g
    }

    /// Discrete divergence of a midpoint flux at interior nodes; boundary entries are zero.
    pub fn divergence_into(&self, flux: &[f64], out: &mut [f64]) {
        let n = self.n_cells;
        out[0] = 0.0;
        out[n] = 0.0;
        for i in 1..n {
            out[i] = (flux[i] - flux[i - 1]) / self.h;
        }
    }

    /// `div(coeff ∇u)` by the flux-form three-point stencil.
    pub fn apply_div_grad(&self, u: &[f64], coeff: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        self.apply_div_grad_into(u, coeff, &mut out);
        out
    }

    pub fn apply_div_grad_into(&self, u: &[f64], coeff: &[f64], out: &mut [f64]) {
        let n = self.n_cells;
        let h2 = self.h * self.h;
        out[0] = 0.0;
        out[n] = 0.0;
        for i in 1..n {
            out[i] = (coeff[i] * (u[i + 1] - u[i]) - coeff[i - 1] * (u[i] - u[i - 1])) / h2;
        }
    }

    /// Trapezoid rule for a nodal integrand.
    pub fn integrate_nodal(&self, values: impl Iterator<Item = f64>) -> f64 {
        let n = self.n_cells;
        let mut sum = 0.0;
        for (i, v) in values.enumerate() {
            sum += if i == 0 || i == n { 0.5 * v } else { v };
        }
        sum * self.h
    }

    /// Midpoint rule for an integrand sampled at flux midpoints.
    pub fn integrate_midpoint(&self, values: impl Iterator<Item = f64>) -> f64 {
        values.sum::<f64>() * self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_in_zero_out() {
        let g = Grid::new(1.0, 16);
        let out = g.apply_div_grad(&[0.0; 17], &[2.0; 16]);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clamped_ramp_by_hand() {
        // u = x on interior nodes, clamped to 0 at x = L
        let g = Grid::new(1.0, 16);
        let mut u: Vec<f64> = g.nodes();
        u[16] = 0.0;
        let out = g.apply_div_grad(&u, &[1.0; 16]);
        let h = g.h;
        for i in 1..16 {
            let hand = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
            assert!((out[i] - hand).abs() < 1e-9);
        }
        // linear interior: second difference vanishes except next to the clamp
        assert!(out[1..15].iter().all(|v| v.abs() < 1e-9));
        assert!((out[15] - (0.0 - 2.0 * 15.0 * h + 14.0 * h) / (h * h)).abs() < 1e-9);
    }

    #[test]
    fn laplacian_second_order() {
        let mut errs = Vec::new();
        for &n in &[32usize, 64, 128, 256] {
            let g = Grid::new(2.0, n);
            let u: Vec<f64> = g.nodes().iter().map(|x| (PI * x / 2.0).sin()).collect();
            let out = g.apply_div_grad(&u, &vec![1.0; n]);
            let k2 = (PI / 2.0).powi(2);
            let err = (1..n)
                .map(|i| (out[i] + k2 * u[i]).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.95, "order {order}");
        }
    }

    #[test]
    fn quadrature_rules() {
        let g = Grid::new(1.0, 100);
        let s = g.integrate_nodal(g.nodes().iter().map(|x| (PI * x).sin().powi(2)));
        assert!((s - 0.5).abs() < 1e-12);
        let m = g.integrate_midpoint(g.midpoints().iter().map(|x| x * x));
        assert!((m - 1.0 / 3.0).abs() < 1e-4);
    }
}
