//! Finite-difference leapfrog solver.
//!
//! With `R^n = div(A∇u^n) - M^n + k|u^n|^{p-2}u^n` the update is
//!
//! ```text
//! u^{n+1} - 2u^n + u^{n-1} = dt² (R^n - b h(v^n)),   v^n = (u^{n+1} - u^{n-1}) / 2dt
//! ```
//!
//! which gives `v^n + (dt b / 2) h(v^n) = (u^n - u^{n-1})/dt + (dt/2) R^n`, a
//! monotone scalar equation per node. The memory term `M^n` is explicit.

pub mod config;
pub mod damping;
pub mod grid;
pub mod memory;

pub use config::{
    CflReport, CoefficientField, ConvStrategy, Discretization, InitialData, ProblemConfig,
};
pub use damping::{solve_damping_pointwise, DampingSpec};
pub use grid::Grid;
pub use memory::{DirectHistory, MemoryFunctionals, MemoryHistory, PronyHistory};

use crate::energy::{self, BlowUp, EnergySample, EnergyTrace};
use crate::error::{Error, Result};

const BLOW_UP_LEVEL: f64 = 1e100;

/// Solution, velocity and history at step `t_index`.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t_index: usize,
    pub u: Vec<f64>,
    pub u_prev: Vec<f64>,
    /// Velocity at `t_index`; the initial velocity until the step is solved.
    pub v: Vec<f64>,
    pub grad: Vec<f64>,
    pub memory_term: Vec<f64>,
    pub history: MemoryHistory,
}

pub struct Simulation {
    disc: Discretization,
    state: SimulationState,
    u_next: Vec<f64>,
    force: Vec<f64>,
    flux: Vec<f64>,
    solved: bool,
}

impl Simulation {
    pub fn new(disc: Discretization, u0: Vec<f64>, v0: Vec<f64>) -> Result<Simulation> {
        let n = disc.grid.n_nodes();
        if u0.len() != n || v0.len() != n {
            return Err(Error::Config(format!(
                "initial data must have {n} nodal values"
            )));
        }
        let history = match (&disc.kernel, disc.strategy) {
            (None, _) => MemoryHistory::Off { len: 0 },
            (Some(k), ConvStrategy::Direct) => MemoryHistory::Direct(DirectHistory::new(
                k.clone(),
                disc.dt,
                disc.memory_coef.clone(),
            )),
            (Some(k), ConvStrategy::Prony) => {
                let modes = k.prony_modes().ok_or_else(|| {
                    Error::UnsupportedStrategy(format!(
                        "no exponential modes for a {:?} kernel",
                        k.family()
                    ))
                })?;
                MemoryHistory::Prony(PronyHistory::new(
                    &modes,
                    disc.dt,
                    disc.grid.h,
                    disc.memory_coef.clone(),
                ))
            }
        };
        let grad = disc.grid.gradient(&u0);
        let mut state = SimulationState {
            t_index: 0,
            u_prev: u0.clone(),
            u: u0,
            v: v0,
            grad,
            memory_term: vec![0.0; n],
            history,
        };
        state.u[0] = 0.0;
        state.u[n - 1] = 0.0;
        state.history.push(&state.grad)?;
        let mut sim = Simulation {
            u_next: vec![0.0; n],
            force: vec![0.0; n],
            flux: vec![0.0; disc.grid.n_cells],
            disc,
            state,
            solved: false,
        };
        sim.refresh_memory()?;
        Ok(sim)
    }

    pub fn from_config(config: &ProblemConfig) -> Result<Simulation> {
        let disc = config.discretize()?;
        let u0 = config.initial_u.sample(&disc.grid, "initial_u")?;
        let v0 = config.initial_v.sample(&disc.grid, "initial_v")?;
        Simulation::new(disc, u0, v0)
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn time(&self) -> f64 {
        self.state.t_index as f64 * self.disc.dt
    }

    fn refresh_memory(&mut self) -> Result<()> {
        let s = &mut self.state;
        s.history.memory_into(
            s.t_index,
            &self.disc.grid,
            &self.disc.memory_coef,
            &mut self.flux,
            &mut s.memory_term,
        )
    }

    /// Solves for the velocity at the current step and the next displacement.
    /// Idempotent until [`Simulation::commit`].
    pub fn solve_velocity(&mut self) {
        if self.solved {
            return;
        }
        let d = &self.disc;
        let s = &mut self.state;
        let n = d.grid.n_cells;
        let dt = d.dt;
        d.grid
            .apply_div_grad_into(&s.u, &d.stiffness, &mut self.force);
        for i in 1..n {
            let u = s.u[i];
            self.force[i] += d.source_coef[i] * u.abs().powf(d.p - 2.0) * u - s.memory_term[i];
        }
        self.u_next[0] = 0.0;
        self.u_next[n] = 0.0;
        if s.t_index == 0 {
            for i in 1..n {
                let v = s.v[i];
                let accel = self.force[i] - d.damping_coef[i] * d.damping.h(v);
                self.u_next[i] = s.u[i] + dt * v + 0.5 * dt * dt * accel;
            }
        } else {
            for i in 1..n {
                let r = (s.u[i] - s.u_prev[i]) / dt + 0.5 * dt * self.force[i];
                let v = solve_damping_pointwise(r, 0.5 * dt * d.damping_coef[i], &d.damping);
                s.v[i] = v;
                self.u_next[i] = s.u_prev[i] + 2.0 * dt * v;
            }
        }
        s.v[0] = 0.0;
        s.v[n] = 0.0;
        self.solved = true;
    }

    /// The energy functionals at the current step; solves the velocity first if needed.
    pub fn measure(&mut self) -> Result<EnergySample> {
        self.solve_velocity();
        let s = &self.state;
        let mem = s.history.functionals(&self.disc.grid);
        energy::measure(&self.disc, s.t_index, &s.u, &s.v, &s.grad, mem)
    }

    /// Advances to the next step. Returns the blow-up record instead of
    /// advancing when the new displacement is not finite or exceeds `1e100`.
    pub fn commit(&mut self) -> Result<Option<BlowUp>> {
        self.solve_velocity();
        let max_abs_u = self.u_next.iter().fold(0.0f64, |m, x| {
            if x.is_finite() {
                m.max(x.abs())
            } else {
                f64::INFINITY
            }
        });
        if !(max_abs_u <= BLOW_UP_LEVEL) || self.state.v.iter().any(|x| !x.is_finite()) {
            let t_index = self.state.t_index + 1;
            return Ok(Some(BlowUp {
                t_index,
                t: t_index as f64 * self.disc.dt,
                max_abs_u,
            }));
        }
        let s = &mut self.state;
        std::mem::swap(&mut s.u_prev, &mut s.u);
        std::mem::swap(&mut s.u, &mut self.u_next);
        s.t_index += 1;
        self.disc.grid.gradient_into(&s.u, &mut s.grad);
        s.history.push(&s.grad)?;
        self.solved = false;
        self.refresh_memory()?;
        Ok(None)
    }

    pub fn step(&mut self) -> Result<Option<BlowUp>> {
        self.commit()
    }
}

fn needs_energy(n: usize, stride: usize) -> bool {
    n.is_multiple_of(stride)
        || (n + 1).is_multiple_of(stride)
        || (n >= 1 && (n - 1).is_multiple_of(stride))
}

/// Runs a configuration from `t = 0` to `t_end`, recording every `record_stride` steps.
///
/// The gate is evaluated and stored but not enforced. The dissipation residual
/// at a recorded step uses the energies one step before and after it, so it
/// does not depend on the stride.
pub fn run(config: &ProblemConfig) -> Result<EnergyTrace> {
    let cfl = config.cfl_check()?;
    if !cfl.pass {
        return Err(Error::Cfl {
            dt: cfl.dt,
            max_dt: cfl.max_dt,
            h: cfl.h,
            mu0: cfl.mu0,
        });
    }
    let mut sim = Simulation::from_config(config)?;
    let gate =
        energy::wellposedness_gate(&sim.disc, config.gate_relax, &sim.state.u, &sim.state.v)?;
    let stride = config.record_stride;
    let steps = sim.disc.steps;
    let dt = sim.disc.dt;
    let mut samples: Vec<EnergySample> = Vec::with_capacity(steps / stride + 1);
    // last evaluated (step, E) and a recorded sample still waiting for E^{n+1}
    let mut last: Option<(usize, f64)> = None;
    let mut pending: Option<(usize, f64)> = None;
    let mut blow_up = None;
    for n in 0..=steps {
        if needs_energy(n, stride) {
            let sample = sim.measure()?;
            if !(sample.energy.is_finite() && sample.aux_energy.is_finite()) {
                // |u|^p overflowed before u itself left the finite range
                let s = &sim.state;
                blow_up = Some(BlowUp {
                    t_index: s.t_index,
                    t: sim.time(),
                    max_abs_u: s.u.iter().fold(0.0f64, |m, x| m.max(x.abs())),
                });
                break;
            }
            if let Some((idx, e_minus)) = pending.take() {
                let rec = &mut samples[idx];
                if rec.extra.step + 1 == n {
                    let rate = (sample.energy - e_minus) / (2.0 * dt);
                    rec.extra.centered_rate = rate;
                    rec.dissipation_residual = rate - rec.extra.dissipation_rhs;
                }
            }
            if n % stride == 0 {
                if let Some((m, e)) = last {
                    if m + 1 == n {
                        pending = Some((samples.len(), e));
                    }
                }
                samples.push(sample);
            }
            last = Some((n, sample.energy));
        }
        if n == steps {
            break;
        }
        if let Some(b) = sim.commit()? {
            blow_up = Some(b);
            break;
        }
    }
    Ok(EnergyTrace {
        samples,
        gate,
        dt,
        record_stride: stride,
        steps_completed: sim.state.t_index,
        blow_up,
        p: config.p,
        q: config.damping.q,
    })
}
