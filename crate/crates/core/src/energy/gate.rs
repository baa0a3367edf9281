use serde::{Deserialize, Serialize};

use super::measure;
use crate::error::{Error, Result};
use crate::solver::config::{Discretization, ProblemConfig};
use crate::solver::memory::MemoryFunctionals;

/// Admission test for the small-data regime of the decay theorem.
///
/// `None` in `lambda1`, `e1` and `x41_threshold` stands for `+∞` (no source term).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellPosednessReport {
    pub ell: f64,
    #[serde(rename = "B_p_bound")]
    pub b_p_bound: f64,
    #[serde(rename = "K")]
    pub k_sup: f64,
    pub p: f64,
    #[serde(rename = "Lambda1")]
    pub lambda1: Option<f64>,
    #[serde(rename = "E1")]
    pub e1: Option<f64>,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "Lambda0")]
    pub lambda0: f64,
    pub x41_threshold: Option<f64>,
    /// Evaluated with `Λ(0)` in place of the bound on `Λ(t)`.
    #[serde(rename = "tilde_C")]
    pub tilde_c: Option<f64>,
    pub relax: f64,
    pub source_free: bool,
    pub verdict: bool,
    pub reasons: Vec<String>,
}

/// Upper bound `L (L/2)^{r/2}` for the embedding constant of `H¹₀(0, L)` in `L^r`,
/// from `‖w‖²_∞ ≤ (L/2)‖w'‖²` and `‖w‖_r^r ≤ L ‖w‖^r_∞`.
pub fn sobolev_bp_bound(length: f64, r: f64) -> Result<f64> {
    if !(r >= 2.0) {
        return Err(Error::Domain(format!(
            "embedding exponent must be at least 2, got {r}"
        )));
    }
    if !(length > 0.0) {
        return Err(Error::Domain(format!(
            "length must be positive, got {length}"
        )));
    }
    Ok(length * (0.5 * length).powf(0.5 * r))
}

/// `C̃ = 2KBΛ^{p-2} / (p - 2KBΛ^{p-2})`, `None` once the denominator is not positive.
pub fn tilde_c(kb: f64, lambda: f64, p: f64) -> Option<f64> {
    let x = 2.0 * kb * lambda.powf(p - 2.0);
    (p - x > 0.0).then(|| x / (p - x))
}

pub fn gate_from_values(
    ell: f64,
    b_p: f64,
    k_sup: f64,
    p: f64,
    e0: f64,
    lambda0: f64,
    relax: f64,
) -> WellPosednessReport {
    let mut reasons = Vec::new();
    let mut report = WellPosednessReport {
        ell,
        b_p_bound: b_p,
        k_sup,
        p,
        lambda1: None,
        e1: None,
        e0,
        lambda0,
        x41_threshold: None,
        tilde_c: Some(0.0),
        relax,
        source_free: k_sup == 0.0,
        verdict: false,
        reasons: Vec::new(),
    };
    if !(ell > 0.0) {
        reasons.push(format!("ell = {ell} is not positive"));
        report.tilde_c = None;
        report.reasons = reasons;
        return report;
    }
    if k_sup == 0.0 {
        report.verdict = true;
        return report;
    }
    let b = b_p * ell.powf(-0.5 * p);
    let kb = k_sup * b;
    let lambda1 = (1.0 / kb).powf(1.0 / (p - 2.0));
    let e1 = (0.5 - 1.0 / p) * lambda1 * lambda1;
    report.lambda1 = Some(lambda1);
    report.e1 = Some(e1);
    report.tilde_c = tilde_c(kb, lambda0, p);
    match report.tilde_c {
        Some(c) => {
            let well = (ell / (8.0 * k_sup * b_p)).powf(2.0 / (p - 2.0)) * ell / (2.0 * (1.0 + c));
            report.x41_threshold = Some(e1.min(well));
        }
        None => reasons.push("source constant undefined: 2KB Lambda(0)^(p-2) >= p".into()),
    }
    if !(e0 < relax * e1) {
        reasons.push(format!("E(0) = {e0} is not below E1 = {e1}"));
    }
    if !(lambda0 < relax * lambda1) {
        reasons.push(format!(
            "Lambda(0) = {lambda0} is not below Lambda1 = {lambda1}"
        ));
    }
    if let Some(x) = report.x41_threshold {
        if !(e0 < relax * x) {
            reasons.push(format!("E(0) = {e0} is not below the decay threshold {x}"));
        }
    }
    report.verdict = reasons.is_empty();
    report.reasons = reasons;
    report
}

/// Evaluates the gate at the initial state.
pub fn wellposedness_gate(
    disc: &Discretization,
    relax: f64,
    u0: &[f64],
    v0: &[f64],
) -> Result<WellPosednessReport> {
    let grad = disc.grid.gradient(u0);
    let sample = measure(disc, 0, u0, v0, &grad, MemoryFunctionals::default())?;
    Ok(gate_from_values(
        disc.ell()?,
        sobolev_bp_bound(disc.grid.length, disc.p)?,
        disc.k_sup(),
        disc.p,
        sample.energy,
        sample.lambda,
        relax,
    ))
}

/// Largest factor in `(0, 1]` for the initial data that passes the gate,
/// found by bisection; 1 when the data already pass.
pub fn admissible_scale(config: &ProblemConfig) -> Result<(f64, WellPosednessReport)> {
    let disc = config.discretize()?;
    let gate_at = |s: f64| -> Result<WellPosednessReport> {
        let u0 = config.initial_u.scaled(s).sample(&disc.grid, "initial_u")?;
        let v0 = config.initial_v.scaled(s).sample(&disc.grid, "initial_v")?;
        wellposedness_gate(&disc, config.gate_relax, &u0, &v0)
    };
    let full = gate_at(1.0)?;
    if full.verdict {
        return Ok((1.0, full));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gate_at(mid)?.verdict {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(Error::Config(format!(
            "no initial amplitude passes the well-posedness gate: {}",
            full.reasons.join("; ")
        )));
    }
    Ok((lo, gate_at(lo)?))
}
