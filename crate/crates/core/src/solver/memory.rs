//! Evaluators for the hereditary term `∫_0^t f(t-s) div(a ∇u(s)) ds`.
//!
//! Both evaluators apply the trapezoid rule on the step grid, with weights
//! `dt/2` at the two ends and `dt` elsewhere. Since the divergence is linear
//! they accumulate the weighted gradient sum at midpoints and take a single
//! divergence at the end.

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, PronyMode};

/// History-dependent scalars at the current step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MemoryFunctionals {
    /// `∫_0^t f(t-s) ∫ a |∇u(t) - ∇u(s)|² dx ds`
    pub f_circ: f64,
    /// `-∫_0^t f'(t-s) ∫ a |∇u(t) - ∇u(s)|² dx ds`
    pub mu: f64,
    /// `∫_0^t ψ(s) ds` with `ψ(s) = ∫ a |∇u(t) - ∇u(s)|² dx`
    pub psi_integral: f64,
}

fn trapezoid_weight(m: usize, n: usize, dt: f64) -> f64 {
    if n == 0 {
        0.0
    } else if m == 0 || m == n {
        0.5 * dt
    } else {
        dt
    }
}

/// Stores every midpoint gradient and sums over the full history.
#[derive(Debug, Clone)]
pub struct DirectHistory {
    kernel: Kernel,
    dt: f64,
    n_cells: usize,
    a_mid: Vec<f64>,
    grads: Vec<f64>,
    f_lag: Vec<f64>,
    fp_lag: Vec<f64>,
}

impl DirectHistory {
    pub fn new(kernel: Kernel, dt: f64, a_mid: Vec<f64>) -> Self {
        DirectHistory {
            kernel,
            dt,
            n_cells: a_mid.len(),
            a_mid,
            grads: Vec::new(),
            f_lag: Vec::new(),
            fp_lag: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len() / self.n_cells.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn push(&mut self, grad: &[f64]) -> Result<()> {
        debug_assert_eq!(grad.len(), self.n_cells);
        self.grads.extend_from_slice(grad);
        let k = self.f_lag.len();
        let t = k as f64 * self.dt;
        self.f_lag.push(self.kernel.f(t)?);
        // f'(0) may be singular; lag 0 never contributes to the functionals
        self.fp_lag
            .push(if k == 0 { 0.0 } else { self.kernel.f_prime(t)? });
        Ok(())
    }

    fn grad(&self, m: usize) -> &[f64] {
        &self.grads[m * self.n_cells..(m + 1) * self.n_cells]
    }

    /// `Σ_m w_m f(t_n - t_m) ∇u^m` at the latest step.
    pub fn flux_sum_into(&self, out: &mut [f64]) {
        out.fill(0.0);
        let n = self.len() - 1;
        for m in 0..=n {
            let c = trapezoid_weight(m, n, self.dt) * self.f_lag[n - m];
            if c == 0.0 {
                continue;
            }
            for (o, g) in out.iter_mut().zip(self.grad(m)) {
                *o += c * g;
            }
        }
    }

    pub fn functionals(&self, h: f64) -> MemoryFunctionals {
        let n = self.len() - 1;
        let current = self.grad(n);
        let mut out = MemoryFunctionals::default();
        for m in 0..n {
            let w = trapezoid_weight(m, n, self.dt);
            let psi = h * current
                .iter()
                .zip(self.grad(m))
                .zip(&self.a_mid)
                .map(|((gn, gm), a)| a * (gn - gm) * (gn - gm))
                .sum::<f64>();
            out.f_circ += w * self.f_lag[n - m] * psi;
            out.mu -= w * self.fp_lag[n - m] * psi;
            out.psi_integral += w * psi;
        }
        out
    }
}

#[derive(Debug, Clone)]
struct ModeState {
    amplitude: f64,
    rate: f64,
    decay: f64,
    /// `Σ_{m≤n} w̃_m e^{-rate (t_n - t_m)} ∇u^m` with `w̃_0 = dt/2`, `w̃_m = dt` otherwise.
    flux: Vec<f64>,
    weight: f64,
    square: f64,
}

impl ModeState {
    fn new(mode: PronyMode, dt: f64, n_cells: usize) -> Self {
        ModeState {
            amplitude: mode.amplitude,
            rate: mode.rate,
            decay: (-mode.rate * dt).exp(),
            flux: vec![0.0; n_cells],
            weight: 0.0,
            square: 0.0,
        }
    }

    fn push(&mut self, grad: &[f64], q: f64, w: f64) {
        for (j, g) in self.flux.iter_mut().zip(grad) {
            *j = self.decay * *j + w * g;
        }
        self.weight = self.decay * self.weight + w;
        self.square = self.decay * self.square + w * q;
    }

    /// `Σ_m w_m e^{-rate (t_n - t_m)} ∫ a |∇u^n - ∇u^m|²` from the accumulators.
    fn discrepancy(&self, grad: &[f64], a_mid: &[f64], q: f64, dt: f64, h: f64) -> f64 {
        let half = 0.5 * dt;
        let cross = h * self
            .flux
            .iter()
            .zip(grad)
            .zip(a_mid)
            .map(|((j, g), a)| a * g * (j - half * g))
            .sum::<f64>();
        let weight = self.weight - half;
        let square = self.square - half * q;
        (q * weight - 2.0 * cross + square).max(0.0)
    }
}

/// Recursive accumulators for a sum-of-exponentials kernel; the cost per
/// step does not grow with the history.
#[derive(Debug, Clone)]
pub struct PronyHistory {
    dt: f64,
    h: f64,
    a_mid: Vec<f64>,
    modes: Vec<ModeState>,
    /// Rate-zero accumulator used for `∫ψ`.
    plain: ModeState,
    current: Vec<f64>,
    current_square: f64,
    len: usize,
}

impl PronyHistory {
    pub fn new(modes: &[PronyMode], dt: f64, h: f64, a_mid: Vec<f64>) -> Self {
        let n = a_mid.len();
        PronyHistory {
            dt,
            h,
            modes: modes.iter().map(|&m| ModeState::new(m, dt, n)).collect(),
            plain: ModeState::new(
                PronyMode {
                    amplitude: 1.0,
                    rate: 0.0,
                },
                dt,
                n,
            ),
            current: vec![0.0; n],
            current_square: 0.0,
            a_mid,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, grad: &[f64]) {
        let q = self.h
            * grad
                .iter()
                .zip(&self.a_mid)
                .map(|(g, a)| a * g * g)
                .sum::<f64>();
        let w = if self.len == 0 {
            0.5 * self.dt
        } else {
            self.dt
        };
        for mode in &mut self.modes {
            mode.push(grad, q, w);
        }
        self.plain.push(grad, q, w);
        self.current.copy_from_slice(grad);
        self.current_square = q;
        self.len += 1;
    }

    pub fn flux_sum_into(&self, out: &mut [f64]) {
        out.fill(0.0);
        if self.len <= 1 {
            return;
        }
        let half = 0.5 * self.dt;
        for mode in &self.modes {
            for ((o, j), g) in out.iter_mut().zip(&mode.flux).zip(&self.current) {
                *o += mode.amplitude * (j - half * g);
            }
        }
    }

    pub fn functionals(&self) -> MemoryFunctionals {
        if self.len <= 1 {
            return MemoryFunctionals::default();
        }
        let (g, a, q) = (&self.current, &self.a_mid, self.current_square);
        let mut out = MemoryFunctionals::default();
        for mode in &self.modes {
            let d = mode.discrepancy(g, a, q, self.dt, self.h);
            out.f_circ += mode.amplitude * d;
            out.mu += mode.amplitude * mode.rate * d;
        }
        out.psi_integral = self.plain.discrepancy(g, a, q, self.dt, self.h);
        out
    }
}

/// The stored history behind the memory term.
#[derive(Debug, Clone)]
pub enum MemoryHistory {
    /// No kernel: the memory term vanishes.
    Off {
        len: usize,
    },
    Direct(DirectHistory),
    Prony(PronyHistory),
}

impl MemoryHistory {
    pub fn len(&self) -> usize {
        match self {
            MemoryHistory::Off { len } => *len,
            MemoryHistory::Direct(d) => d.len(),
            MemoryHistory::Prony(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, grad: &[f64]) -> Result<()> {
        match self {
            MemoryHistory::Off { len } => *len += 1,
            MemoryHistory::Direct(d) => d.push(grad)?,
            MemoryHistory::Prony(p) => p.push(grad),
        }
        Ok(())
    }

    pub fn flux_sum_into(&self, out: &mut [f64]) {
        match self {
            MemoryHistory::Off { .. } => out.fill(0.0),
            MemoryHistory::Direct(d) => d.flux_sum_into(out),
            MemoryHistory::Prony(p) => p.flux_sum_into(out),
        }
    }

    /// The nodal memory vector `Σ_m w_m f(t_n - t_m) div(a ∇u^m)` at step `t_index`.
    ///
    /// `flux` is scratch space of one entry per cell.
    pub fn memory_into(
        &self,
        t_index: usize,
        grid: &Grid,
        a_mid: &[f64],
        flux: &mut [f64],
        out: &mut [f64],
    ) -> Result<()> {
        if self.len() != t_index + 1 {
            return Err(Error::HistoryMismatch {
                expected: t_index + 1,
                found: self.len(),
            });
        }
        self.flux_sum_into(flux);
        for (f, a) in flux.iter_mut().zip(a_mid) {
            *f *= a;
        }
        grid.divergence_into(flux, out);
        Ok(())
    }

    pub fn functionals(&self, grid: &Grid) -> MemoryFunctionals {
        match self {
            MemoryHistory::Off { .. } => MemoryFunctionals::default(),
            MemoryHistory::Direct(d) => d.functionals(grid.h),
            MemoryHistory::Prony(p) => p.functionals(),
        }
    }
}
