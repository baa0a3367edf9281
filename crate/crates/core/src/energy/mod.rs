//! Energy functionals of the discrete solution, the potential-well gate, and
//! the runtime diagnostics built on them.
//!
//! Nodal integrands (velocity, displacement, source) use the trapezoid rule
//! and gradient integrands use the midpoint rule, matching the stencil.

mod checks;
mod gate;

pub use checks::{
    jensen_bound_check, lambda_monitor, max_abs_residual, monotonicity_check, mu_check,
    potential_well_check, smoothed_derivative, window_average, JensenReport, LambdaMonitorReport,
    MonotonicityReport, MuCheckReport, PotentialWellReport,
};
pub use gate::{
    admissible_scale, gate_from_values, sobolev_bp_bound, tilde_c, wellposedness_gate,
    WellPosednessReport,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::solver::config::Discretization;
use crate::solver::memory::MemoryFunctionals;

/// Per-sample quantities that are not part of the CSV contract.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleExtras {
    pub step: usize,
    /// `‖∇u‖²`
    pub grad_sq: f64,
    /// `∫ a |∇u|²`
    pub a_grad_sq: f64,
    pub psi_integral: f64,
    /// Right side of the energy identity, `-μ/2 - f(t)/2 ∫a|∇u|² - ∫ b h(u_t) u_t`.
    pub dissipation_rhs: f64,
    pub kernel_value: f64,
    /// `(E^{n+1} - E^{n-1}) / 2dt`; NaN where a neighbour is missing.
    pub centered_rate: f64,
}

/// One recorded row of the energy trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    /// Energy without the source contribution.
    #[serde(rename = "bbE")]
    pub aux_energy: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub f_circ_grad: f64,
    pub mu: f64,
    pub dissipation_residual: f64,
    /// `∫ u_t u`
    #[serde(rename = "F3")]
    pub f3: f64,
    pub source_term: f64,
    pub l2_u: f64,
    pub l2_ut: f64,
    #[serde(skip)]
    pub extra: SampleExtras,
}

impl EnergySample {
    pub const CSV_COLUMNS: [&'static str; 11] = [
        "t",
        "E",
        "bbE",
        "Lambda",
        "f_circ_grad",
        "mu",
        "dissipation_residual",
        "F3",
        "source_term",
        "l2_u",
        "l2_ut",
    ];

    pub fn csv_values(&self) -> [f64; 11] {
        [
            self.t,
            self.energy,
            self.aux_energy,
            self.lambda,
            self.f_circ_grad,
            self.mu,
            self.dissipation_residual,
            self.f3,
            self.source_term,
            self.l2_u,
            self.l2_ut,
        ]
    }
}

/// Evaluates every functional at step `step` from the nodal displacement
/// and velocity, the midpoint gradient and the history functionals.
pub fn measure(
    disc: &Discretization,
    step: usize,
    u: &[f64],
    v: &[f64],
    grad: &[f64],
    memory: MemoryFunctionals,
) -> Result<EnergySample> {
    let grid = &disc.grid;
    let t = step as f64 * disc.dt;
    let kinetic = 0.5 * grid.integrate_nodal(v.iter().map(|x| x * x));
    let elastic =
        0.5 * grid.integrate_midpoint(grad.iter().zip(&disc.stiffness).map(|(g, a)| a * g * g));
    let a_grad_sq =
        grid.integrate_midpoint(grad.iter().zip(&disc.memory_coef).map(|(g, a)| a * g * g));
    let grad_sq = grid.integrate_midpoint(grad.iter().map(|g| g * g));
    let (mass, kernel_value) = match &disc.kernel {
        Some(k) => (k.mass_until(t)?, k.f(t)?),
        None => (0.0, 0.0),
    };
    let p = disc.p;
    let source_term = grid.integrate_nodal(
        u.iter()
            .zip(&disc.source_coef)
            .map(|(x, k)| k * x.abs().powf(p)),
    ) / p;
    let aux_energy = kinetic + elastic - 0.5 * mass * a_grad_sq + 0.5 * memory.f_circ;
    let energy = aux_energy - source_term;
    let ell = disc.ell()?;
    let damping_work = grid.integrate_nodal(
        v.iter()
            .zip(&disc.damping_coef)
            .map(|(x, b)| b * disc.damping.h(*x) * x),
    );
    let dissipation_rhs = -0.5 * memory.mu - 0.5 * kernel_value * a_grad_sq - damping_work;
    Ok(EnergySample {
        t,
        energy,
        aux_energy,
        lambda: (ell * grad_sq + memory.f_circ).max(0.0).sqrt(),
        f_circ_grad: memory.f_circ,
        mu: memory.mu,
        dissipation_residual: f64::NAN,
        f3: grid.integrate_nodal(u.iter().zip(v).map(|(a, b)| a * b)),
        source_term,
        l2_u: grid.integrate_nodal(u.iter().map(|x| x * x)).sqrt(),
        l2_ut: (2.0 * kinetic).sqrt(),
        extra: SampleExtras {
            step,
            grad_sq,
            a_grad_sq,
            psi_integral: memory.psi_integral,
            dissipation_rhs,
            kernel_value,
            centered_rate: f64::NAN,
        },
    })
}

/// Where and why a run stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUp {
    pub t_index: usize,
    pub t: f64,
    pub max_abs_u: f64,
}

/// The recorded output of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub samples: Vec<EnergySample>,
    pub gate: WellPosednessReport,
    pub dt: f64,
    pub record_stride: usize,
    pub steps_completed: usize,
    pub blow_up: Option<BlowUp>,
    pub p: f64,
    pub q: f64,
}

impl EnergyTrace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    pub fn initial_energy(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.energy)
    }
}
