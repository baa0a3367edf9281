//! The three worked examples: exponential, stretched-exponential and
//! power-law kernels on the unit interval.

use serde::{Deserialize, Serialize};

use crate::decay::{DecayOptions, EnvelopeTemplate};
use crate::energy::{admissible_scale, WellPosednessReport};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelSpec};
use crate::solver::{CoefficientField, ConvStrategy, DampingSpec, InitialData, ProblemConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub id: u8,
    pub name: String,
    pub config: ProblemConfig,
}

fn default_q(id: u8) -> f64 {
    if id == 3 {
        2.0
    } else {
        1.0
    }
}

/// Configuration of example `id` before the amplitude is gated.
///
/// The exponential kernel runs the recursive evaluator on 400 cells; the other
/// two need the full history and use 100 cells to keep the run short. The
/// power-law run goes to `t = 200`: on `[75, 150]` its tail is too short in
/// `ln t` to separate polynomial from exponential decay.
pub fn preset(id: u8, q: Option<f64>) -> Result<Preset> {
    let (name, kernel, n_cells, strategy, t_end) = match id {
        1 => (
            "shifted-exponential kernel",
            KernelSpec::shifted_exponential(0.1, 1.0),
            400,
            ConvStrategy::Prony,
            150.0,
        ),
        2 => (
            "stretched-exponential kernel",
            KernelSpec::stretched_exponential(0.2, 0.5),
            100,
            ConvStrategy::Direct,
            150.0,
        ),
        3 => (
            "power-law kernel",
            KernelSpec::power_law(0.05, 2.0),
            100,
            ConvStrategy::Direct,
            200.0,
        ),
        _ => {
            return Err(Error::Config(format!(
                "unknown example {id}; expected 1, 2 or 3"
            )))
        }
    };
    let q = q.unwrap_or_else(|| default_q(id));
    let length = 1.0;
    let h = length / n_cells as f64;
    Ok(Preset {
        id,
        name: name.to_string(),
        config: ProblemConfig {
            length,
            n_cells,
            dt: 0.9 * h,
            t_end,
            stiffness: CoefficientField::constant(1.0),
            memory_coef: CoefficientField::constant(1.0),
            damping_coef: CoefficientField::constant(1.0),
            source_coef: CoefficientField::constant(0.01),
            p: 3.0,
            damping: DampingSpec { q, scale: 1.0 },
            kernel: Some(kernel),
            initial_u: InitialData::Sine {
                amplitude: 1.0,
                mode: 1,
            },
            initial_v: InitialData::Zero,
            conv_strategy: strategy,
            record_stride: 10,
            gate_relax: 1.0,
        },
    })
}

/// Scales the initial data of `config` down until the gate admits it.
pub fn gate_initial_data(config: &mut ProblemConfig) -> Result<(f64, WellPosednessReport)> {
    let (scale, report) = admissible_scale(config)?;
    config.initial_u = config.initial_u.scaled(scale);
    config.initial_v = config.initial_v.scaled(scale);
    Ok((scale, report))
}

/// Envelopes the examples claim for this kernel and damping exponent.
///
/// Every run is checked against `(1+t)^{-2/(q+1)}`. The exponential kernel
/// adds `e^{-ct}` for `q = 1` and `t^{-2/(q-1)}` otherwise, the stretched
/// kernel adds `c exp(-c t^β)` together with the implicit `G₁` envelope. The
/// implicit `G₂` envelope is only reported.
pub fn decay_options(kernel: Option<&KernelSpec>, q: f64) -> Result<DecayOptions> {
    let mut options = DecayOptions::new(q);
    let Some(spec) = kernel else {
        return Ok(options);
    };
    let kernel = Kernel::new(spec.clone())?;
    let convexity = kernel.canonical_convexity();
    use crate::kernel::KernelFamily::*;
    match kernel.family() {
        ShiftedExponential if q == 1.0 => options.envelopes.push(EnvelopeTemplate::Exponential),
        ShiftedExponential => options.envelopes.push(EnvelopeTemplate::Polynomial {
            exponent: 2.0 / (q - 1.0),
        }),
        StretchedExponential if q == 1.0 => {
            options
                .envelopes
                .push(EnvelopeTemplate::StretchedExponential {
                    exponent: spec.beta,
                });
            if let Some(cx) = convexity {
                options
                    .envelopes
                    .push(EnvelopeTemplate::G1Implicit { convexity: cx });
            }
        }
        _ => {}
    }
    if q > 1.0 {
        if let Some(cx) = convexity {
            options
                .reported
                .push(EnvelopeTemplate::G2Implicit { convexity: cx, q });
        }
    }
    Ok(options)
}
