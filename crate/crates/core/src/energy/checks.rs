use serde::{Deserialize, Serialize};

use super::{gate, EnergyTrace};
use crate::kernel::ConvexityData;

const WINDOW: usize = 5;

fn window(k: usize, n: usize) -> std::ops::Range<usize> {
    let half = WINDOW / 2;
    let lo = k.saturating_sub(half);
    let hi = (k + half + 1).min(n);
    lo..hi
}

/// Least-squares slope over a centred window of five samples (shrunk at the ends).
pub fn smoothed_derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|k| {
            let r = window(k, n);
            let m = r.len() as f64;
            if m < 2.0 {
                return f64::NAN;
            }
            let tm = t[r.clone()].iter().sum::<f64>() / m;
            let ym = y[r.clone()].iter().sum::<f64>() / m;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for i in r {
                sxy += (t[i] - tm) * (y[i] - ym);
                sxx += (t[i] - tm) * (t[i] - tm);
            }
            sxy / sxx
        })
        .collect()
}

/// Centred five-sample moving average (shrunk at the ends).
pub fn window_average(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|k| {
            let r = window(k, n);
            let m = r.len() as f64;
            y[r].iter().sum::<f64>() / m
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Largest increase of the smoothed energy between consecutive samples.
    pub max_rise: f64,
    pub at: f64,
    /// Largest increase of the raw energy, for reference.
    pub max_raw_rise: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks that the smoothed energy never rises by more than `rel_tol · E(0)`.
pub fn monotonicity_check(trace: &EnergyTrace, rel_tol: f64) -> MonotonicityReport {
    let e = trace.energies();
    let smooth = window_average(&e);
    let tolerance = rel_tol * trace.initial_energy().abs();
    let mut max_rise = f64::NEG_INFINITY;
    let mut at = 0.0;
    let mut max_raw_rise = f64::NEG_INFINITY;
    for k in 1..e.len() {
        let rise = smooth[k] - smooth[k - 1];
        if rise > max_rise {
            max_rise = rise;
            at = trace.samples[k].t;
        }
        max_raw_rise = max_raw_rise.max(e[k] - e[k - 1]);
    }
    MonotonicityReport {
        max_rise,
        at,
        max_raw_rise,
        tolerance,
        pass: e.iter().all(|x| x.is_finite()) && !(max_rise > tolerance),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaMonitorReport {
    pub max_lambda: f64,
    pub lambda1: Option<f64>,
    pub max_ratio: f64,
    /// Only gate-passing runs are held to the bound.
    pub asserted: bool,
    pub source_free: bool,
    pub pass: bool,
}

pub fn lambda_monitor(trace: &EnergyTrace) -> LambdaMonitorReport {
    let max_lambda = trace.samples.iter().map(|s| s.lambda).fold(0.0, f64::max);
    let lambda1 = trace.gate.lambda1;
    let max_ratio = lambda1.map_or(0.0, |l1| max_lambda / l1);
    let asserted = trace.gate.verdict;
    LambdaMonitorReport {
        max_lambda,
        lambda1,
        max_ratio,
        asserted,
        source_free: trace.gate.source_free,
        pass: !asserted || max_ratio < 1.0,
    }
}

/// The lower energy bound and the two source-term bounds at every sample.
///
/// Violations are reported as the largest excess over the bound (≤ 0 means satisfied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialWellReport {
    pub lower_excess: f64,
    pub lower_tolerance: f64,
    /// Largest `Λ(t)` seen, used in place of the unknown uniform bound.
    pub lambda2_observed: f64,
    pub tilde_c_gate: Option<f64>,
    pub tilde_c_observed: Option<f64>,
    pub source_excess: f64,
    pub aux_excess: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn potential_well_check(trace: &EnergyTrace, rel_tol: f64) -> PotentialWellReport {
    let g = &trace.gate;
    let e0 = trace.initial_energy();
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    let lower_tolerance = 1e-10 * scale;
    let tolerance = rel_tol * scale;
    let lower_excess = trace
        .samples
        .iter()
        .map(|s| 0.5 * g.ell * s.extra.grad_sq - s.aux_energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let lambda2_observed = trace
        .samples
        .iter()
        .map(|s| s.lambda)
        .fold(g.lambda0, f64::max);
    let tilde_c_observed = if g.source_free {
        Some(0.0)
    } else if g.ell > 0.0 {
        let kb = g.k_sup * g.b_p_bound * g.ell.powf(-0.5 * g.p);
        gate::tilde_c(kb, lambda2_observed, g.p)
    } else {
        None
    };
    let (source_excess, aux_excess) = match tilde_c_observed {
        Some(c) => (
            trace
                .samples
                .iter()
                .map(|s| s.source_term - c * s.energy)
                .fold(f64::NEG_INFINITY, f64::max),
            trace
                .samples
                .iter()
                .map(|s| s.aux_energy - (1.0 + c) * e0)
                .fold(f64::NEG_INFINITY, f64::max),
        ),
        None => (f64::INFINITY, f64::INFINITY),
    };
    PotentialWellReport {
        lower_excess,
        lower_tolerance,
        lambda2_observed,
        tilde_c_gate: g.tilde_c,
        tilde_c_observed,
        source_excess,
        aux_excess,
        tolerance,
        pass: lower_excess <= lower_tolerance
            && source_excess <= tolerance
            && aux_excess <= tolerance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuCheckReport {
    pub checked: usize,
    pub violations: usize,
    pub fraction: f64,
    pub worst_excess: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `μ ≤ -2 E'` with both sides passed through the same five-sample window.
///
/// The inequality holds pointwise in time, so it survives any averaging with
/// nonnegative weights; comparing an averaged derivative against a pointwise
/// `μ` would not.
pub fn mu_check(trace: &EnergyTrace, rel_tol: f64, required_fraction: f64) -> MuCheckReport {
    let t = trace.times();
    let e = trace.energies();
    let slope = smoothed_derivative(&t, &e);
    let mu: Vec<f64> = trace.samples.iter().map(|s| s.mu).collect();
    let mu_avg = window_average(&mu);
    let tolerance = rel_tol * trace.initial_energy().abs();
    let mut checked = 0;
    let mut violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for k in 0..t.len() {
        if !slope[k].is_finite() {
            continue;
        }
        checked += 1;
        let excess = mu_avg[k] + 2.0 * slope[k];
        worst_excess = worst_excess.max(excess);
        if excess > tolerance {
            violations += 1;
        }
    }
    let fraction = if checked == 0 {
        0.0
    } else {
        (checked - violations) as f64 / checked as f64
    };
    MuCheckReport {
        checked,
        violations,
        fraction,
        worst_excess,
        tolerance,
        pass: checked > 0 && fraction >= required_fraction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub checked: usize,
    pub holds: usize,
    pub skipped_small: usize,
    pub saturated: usize,
    pub fraction: f64,
    /// Largest `lhs / rhs - 1` among checked samples.
    pub worst_relative_excess: f64,
    pub pass: bool,
}

/// `(f∘∇u) ≤ (1/γ) G⁻¹(γ μ / ξ)` for `q = 1` and
/// `(f∘∇u) ≤ (t/γ) G⁻¹(γ μ / (t ξ))` for `q > 1`, where `γ` normalises `∫ψ`.
pub fn jensen_bound_check(
    trace: &EnergyTrace,
    cx: &ConvexityData,
    q: f64,
    required_fraction: f64,
) -> JensenReport {
    const SLACK: f64 = 1e-6;
    let mut r = JensenReport {
        checked: 0,
        holds: 0,
        skipped_small: 0,
        saturated: 0,
        fraction: 0.0,
        worst_relative_excess: f64::NEG_INFINITY,
        pass: false,
    };
    for s in &trace.samples {
        let psi = s.extra.psi_integral;
        if !(psi >= 1e-14) || s.t <= 0.0 {
            r.skipped_small += 1;
            continue;
        }
        let xi = cx.xi.value(s.t);
        let (gamma, outer) = if q == 1.0 {
            (1.0 / psi, 1.0)
        } else {
            (s.t / psi, s.t)
        };
        let arg = gamma * s.mu / (outer * xi);
        let inv = cx.g_inverse(arg);
        if inv.saturated {
            r.saturated += 1;
            continue;
        }
        let rhs = outer / gamma * inv.value;
        r.checked += 1;
        if s.f_circ_grad <= rhs * (1.0 + SLACK) {
            r.holds += 1;
        }
        if rhs > 0.0 {
            r.worst_relative_excess = r.worst_relative_excess.max(s.f_circ_grad / rhs - 1.0);
        }
    }
    r.fraction = if r.checked == 0 {
        0.0
    } else {
        r.holds as f64 / r.checked as f64
    };
    r.pass = r.checked > 0 && r.fraction >= required_fraction;
    r
}

/// Largest finite `|dissipation_residual|` over the trace.
pub fn max_abs_residual(trace: &EnergyTrace) -> f64 {
    trace
        .samples
        .iter()
        .map(|s| s.dissipation_residual)
        .filter(|r| r.is_finite())
        .fold(0.0, |a, r| a.max(r.abs()))
}
