//! Decay-rate fitting and envelope verification for energy traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{ConvexityData, DecayEnvelope, EnvelopeModel};

pub const ENERGY_FLOOR: f64 = 1e-300;
pub const MIN_TAIL_SAMPLES: usize = 8;
pub const AMBIGUITY_MARGIN: f64 = 0.005;
pub const ENVELOPE_SLACK: f64 = 0.05;

fn floored(e: f64) -> f64 {
    if e > ENERGY_FLOOR {
        e
    } else {
        ENERGY_FLOOR
    }
}

/// Ordinary least squares `y ≈ intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` when `y` is constant and the coefficient is undefined.
    pub r2: Option<f64>,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - xm) * (a - xm);
        sxy += (a - xm) * (b - ym);
        syy += (b - ym) * (b - ym);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - slope * xm;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r2 = (syy > 1e-28 * (1.0 + ym * ym) * n).then(|| (1.0 - ss_res / syy).clamp(0.0, 1.0));
    LinearFit {
        slope,
        intercept,
        r2,
    }
}

/// `E ≈ c1 e^{-c2 t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub c1: f64,
    pub c2: f64,
    pub r2: Option<f64>,
}

/// `E ≈ c (1+t)^{-alpha}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFit {
    pub c: f64,
    pub alpha: f64,
    pub r2: Option<f64>,
}

/// `E ≈ c exp(-rate t^{beta_s})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedFit {
    pub c: f64,
    pub rate: f64,
    pub beta_s: f64,
    pub r2: Option<f64>,
}

/// Index of the first sample of the last `fraction` of the trace.
pub fn tail_start_index(n: usize, fraction: f64) -> usize {
    let keep = ((n as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    n - keep.min(n)
}

fn tail<'a>(t: &'a [f64], e: &'a [f64], fraction: f64) -> Result<(&'a [f64], &'a [f64])> {
    if t.len() != e.len() {
        return Err(Error::InsufficientData(format!(
            "{} times but {} energies",
            t.len(),
            e.len()
        )));
    }
    let start = tail_start_index(t.len(), fraction);
    let (t, e) = (&t[start..], &e[start..]);
    if t.len() < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in the tail window, need at least {MIN_TAIL_SAMPLES}",
            t.len()
        )));
    }
    Ok((t, e))
}

fn log_energy(e: &[f64]) -> Vec<f64> {
    e.iter().map(|&x| floored(x).ln()).collect()
}

pub fn fit_exponential(t: &[f64], e: &[f64], tail_fraction: f64) -> Result<ExponentialFit> {
    let (t, e) = tail(t, e, tail_fraction)?;
    let fit = least_squares(t, &log_energy(e));
    Ok(ExponentialFit {
        c1: fit.intercept.exp(),
        c2: -fit.slope,
        r2: fit.r2,
    })
}

pub fn fit_polynomial(t: &[f64], e: &[f64], tail_fraction: f64) -> Result<PolynomialFit> {
    let (t, e) = tail(t, e, tail_fraction)?;
    let x: Vec<f64> = t.iter().map(|s| s.ln_1p()).collect();
    let fit = least_squares(&x, &log_energy(e));
    Ok(PolynomialFit {
        c: fit.intercept.exp(),
        alpha: -fit.slope,
        r2: fit.r2,
    })
}

/// Searches the stretching exponent on `[0.05, 1]` for the best `R²`.
pub fn fit_stretched(t: &[f64], e: &[f64], tail_fraction: f64) -> Result<StretchedFit> {
    let (t, e) = tail(t, e, tail_fraction)?;
    let y = log_energy(e);
    let fit_at = |b: f64| {
        let x: Vec<f64> = t.iter().map(|s| s.max(0.0).powf(b)).collect();
        least_squares(&x, &y)
    };
    let score = |b: f64| fit_at(b).r2.unwrap_or(-1.0);
    let mut best = 1.0;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..=95 {
        let b = 0.05 + 0.01 * i as f64;
        let s = score(b);
        if s > best_score {
            best_score = s;
            best = b;
        }
    }
    // golden-section refinement around the best grid point
    let (mut lo, mut hi) = ((best - 0.01f64).max(0.05), (best + 0.01f64).min(1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if score(a) >= score(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = 0.5 * (lo + hi);
    if score(mid) > best_score {
        best = mid;
    }
    let fit = fit_at(best);
    Ok(StretchedFit {
        c: fit.intercept.exp(),
        rate: -fit.slope,
        beta_s: best,
        r2: fit.r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectedModel {
    Exponential,
    Polynomial,
    Ambiguous,
}

/// Higher `R²` wins; differences below [`AMBIGUITY_MARGIN`] are not decided.
pub fn select_model(exp: &ExponentialFit, poly: &PolynomialFit) -> SelectedModel {
    match (exp.r2, poly.r2) {
        (Some(a), Some(b)) if (a - b).abs() >= AMBIGUITY_MARGIN => {
            if a > b {
                SelectedModel::Exponential
            } else {
                SelectedModel::Polynomial
            }
        }
        _ => SelectedModel::Ambiguous,
    }
}

/// Shape of an envelope whose free constants are fitted to a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum EnvelopeTemplate {
    Exponential,
    StretchedExponential { exponent: f64 },
    Polynomial { exponent: f64 },
    G1Implicit { convexity: ConvexityData },
    G2Implicit { convexity: ConvexityData, q: f64 },
}

impl EnvelopeTemplate {
    pub fn name(&self) -> String {
        match self {
            EnvelopeTemplate::Exponential => "exponential".into(),
            EnvelopeTemplate::StretchedExponential { exponent } => {
                format!("stretched-exponential(beta={exponent})")
            }
            EnvelopeTemplate::Polynomial { exponent } => {
                format!("polynomial(exponent={exponent:.6})")
            }
            EnvelopeTemplate::G1Implicit { .. } => "G1-implicit".into(),
            EnvelopeTemplate::G2Implicit { .. } => "G2-implicit".into(),
        }
    }
}

/// Smallest amplitude for which `amplitude · shape(t) ≥ E(t)` on the samples.
fn smallest_amplitude(t: &[f64], e: &[f64], shape: impl Fn(f64) -> f64) -> f64 {
    t.iter()
        .zip(e)
        .map(|(&s, &x)| x / shape(s))
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max)
}

/// Fits the free constants of `template` on `(t, e)`: rates by least squares
/// in the linearising coordinates, then the smallest amplitude (or the
/// tightest implicit constant) that bounds every sample from above.
pub fn fit_envelope(
    template: &EnvelopeTemplate,
    t: &[f64],
    e: &[f64],
    e0: f64,
) -> Result<DecayEnvelope> {
    if t.len() < 2 {
        return Err(Error::InsufficientData(
            "envelope fit needs at least two samples".into(),
        ));
    }
    let y = log_energy(e);
    let model = match template {
        EnvelopeTemplate::Exponential => {
            let rate = -least_squares(t, &y).slope;
            let amplitude = smallest_amplitude(t, e, |s| (-rate * s).exp());
            EnvelopeModel::Exponential { amplitude, rate }
        }
        EnvelopeTemplate::StretchedExponential { exponent } => {
            let x: Vec<f64> = t.iter().map(|s| s.max(0.0).powf(*exponent)).collect();
            let rate = -least_squares(&x, &y).slope;
            let amplitude =
                smallest_amplitude(t, e, |s| (-rate * s.max(0.0).powf(*exponent)).exp());
            EnvelopeModel::StretchedExponential {
                amplitude,
                rate,
                exponent: *exponent,
            }
        }
        EnvelopeTemplate::Polynomial { exponent } => {
            let amplitude = smallest_amplitude(t, e, |s| (1.0 + s).powf(-exponent));
            EnvelopeModel::Polynomial {
                amplitude,
                exponent: *exponent,
            }
        }
        EnvelopeTemplate::G1Implicit { convexity } => {
            // ε₁ keeps ε₁E inside the domain of G₁; k₁ is the largest slope
            // with G₁(ε₁E(t)) ≥ k₁ ∫_{t₀}^t ξ on the fit samples
            let e_max = e.iter().copied().fold(0.0, f64::max);
            let eps1 = convexity.f0 / e_max;
            let t0 = 0.0;
            let mut k1 = f64::INFINITY;
            for (&s, &x) in t.iter().zip(e) {
                let span = convexity.xi.integral(t0, s);
                if span <= 0.0 {
                    continue;
                }
                let arg = (eps1 * x).clamp(convexity.g1_floor(), convexity.f0);
                k1 = k1.min(convexity.g1(arg)? / span);
            }
            if !k1.is_finite() {
                return Err(Error::InsufficientData(
                    "no sample beyond the envelope anchor".into(),
                ));
            }
            EnvelopeModel::G1Implicit {
                convexity: *convexity,
                eps1,
                k1,
                t0,
            }
        }
        EnvelopeTemplate::G2Implicit { convexity, q } => {
            // t G₂⁻¹(k₂/(t X)) ≥ (E/E(0))^{(q+1)/2}  ⟺  k₂ ≥ t X G₂(w/t)
            let eps1 = 1.0;
            let t0 = 0.0;
            let mut k2: f64 = 0.0;
            for (&s, &x) in t.iter().zip(e) {
                if s <= t0 {
                    continue;
                }
                let w = (x.max(0.0) / e0).powf(0.5 * (q + 1.0));
                k2 = k2.max(s * convexity.xi.integral(t0, s) * convexity.g2(eps1, w / s));
            }
            EnvelopeModel::G2Implicit {
                convexity: *convexity,
                q: *q,
                e0,
                eps1,
                k2,
                t0,
            }
        }
    };
    Ok(DecayEnvelope::new(template.name(), model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeVerdict {
    pub name: String,
    pub envelope: DecayEnvelope,
    pub sup_ratio: f64,
    /// Samples where the envelope is undefined or saturated.
    pub excluded: usize,
    pub checked: usize,
    pub pass: bool,
}

/// `sup E / envelope` over the samples; passes at most `1 + 5%`.
pub fn envelope_check(t: &[f64], e: &[f64], envelope: &DecayEnvelope) -> EnvelopeVerdict {
    let mut sup_ratio: f64 = 0.0;
    let mut excluded = 0;
    let mut checked = 0;
    for (&s, &x) in t.iter().zip(e) {
        match envelope.evaluate(s) {
            Some(v) => {
                sup_ratio = sup_ratio.max(x / v);
                checked += 1;
            }
            None => excluded += 1,
        }
    }
    EnvelopeVerdict {
        name: envelope.name.clone(),
        envelope: envelope.clone(),
        sup_ratio,
        excluded,
        checked,
        pass: checked > 0 && sup_ratio <= 1.0 + ENVELOPE_SLACK,
    }
}

/// Partial integrals of `E^{(q+1)/2}` at `T/4`, `T/2`, `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralCheck {
    pub horizons: [f64; 3],
    pub partial_integrals: [f64; 3],
    pub increments: [f64; 2],
    /// `(I(T) - I(T/2)) / (I(T/2) - I(T/4))`; `None` when the first increment is zero.
    pub increment_ratio: Option<f64>,
    pub decreasing: bool,
}

/// Trapezoid integral of the sampled `y` over `[from, to]`, interpolating linearly at the ends.
fn trapezoid_between(t: &[f64], y: &[f64], from: f64, to: f64) -> f64 {
    let at = |x: f64| -> f64 {
        let k = t.partition_point(|&s| s < x).clamp(1, t.len() - 1);
        let (a, b) = (t[k - 1], t[k]);
        y[k - 1] + (y[k] - y[k - 1]) * (x - a) / (b - a)
    };
    let mut sum = 0.0;
    let mut prev = (from, at(from));
    for k in 0..t.len() {
        if t[k] <= from {
            continue;
        }
        if t[k] >= to {
            break;
        }
        sum += 0.5 * (t[k] - prev.0) * (prev.1 + y[k]);
        prev = (t[k], y[k]);
    }
    sum + 0.5 * (to - prev.0) * (prev.1 + at(to))
}

pub fn integral_decay_check(t: &[f64], e: &[f64], q: f64) -> IntegralCheck {
    let big_t = t.last().copied().unwrap_or(0.0);
    let horizons = [0.25 * big_t, 0.5 * big_t, big_t];
    if t.len() < 2 || big_t <= t[0] {
        return IntegralCheck {
            horizons,
            partial_integrals: [0.0; 3],
            increments: [0.0; 2],
            increment_ratio: None,
            decreasing: false,
        };
    }
    let y: Vec<f64> = e.iter().map(|x| x.max(0.0).powf(0.5 * (q + 1.0))).collect();
    let head = trapezoid_between(t, &y, t[0], horizons[0]);
    // increments are integrated directly so they keep full relative precision
    let increments = [
        trapezoid_between(t, &y, horizons[0], horizons[1]),
        trapezoid_between(t, &y, horizons[1], horizons[2]),
    ];
    let partial_integrals = [
        head,
        head + increments[0],
        head + increments[0] + increments[1],
    ];
    let increment_ratio = (increments[0] > 0.0).then(|| increments[1] / increments[0]);
    IntegralCheck {
        horizons,
        partial_integrals,
        increments,
        increment_ratio,
        decreasing: increment_ratio.is_some_and(|r| r < 1.0),
    }
}

/// Options for [`analyze`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub tail_fraction: f64,
    pub q: f64,
    pub envelopes: Vec<EnvelopeTemplate>,
    /// Fitted and checked like `envelopes` but not part of the overall verdict.
    #[serde(default)]
    pub reported: Vec<EnvelopeTemplate>,
}

impl DecayOptions {
    pub fn new(q: f64) -> Self {
        DecayOptions {
            tail_fraction: 0.5,
            q,
            envelopes: vec![EnvelopeTemplate::Polynomial {
                exponent: 2.0 / (q + 1.0),
            }],
            reported: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFitReport {
    pub tail_start: f64,
    pub tail_fraction: f64,
    pub q: f64,
    pub exp_fit: ExponentialFit,
    pub poly_fit: PolynomialFit,
    pub stretched_fit: Option<StretchedFit>,
    pub selected_model: SelectedModel,
    /// Envelopes are fitted on the first half of the tail window and checked on the second.
    pub fit_window: [f64; 2],
    pub check_window: [f64; 2],
    pub envelope_verdicts: Vec<EnvelopeVerdict>,
    pub reported_envelopes: Vec<EnvelopeVerdict>,
    pub integral_check: IntegralCheck,
}

pub fn analyze(t: &[f64], e: &[f64], options: &DecayOptions) -> Result<DecayFitReport> {
    let exp_fit = fit_exponential(t, e, options.tail_fraction)?;
    let poly_fit = fit_polynomial(t, e, options.tail_fraction)?;
    let stretched_fit = fit_stretched(t, e, options.tail_fraction).ok();
    let start = tail_start_index(t.len(), options.tail_fraction);
    let mid = start + (t.len() - start) / 2;
    let (tf, ef) = (&t[start..mid], &e[start..mid]);
    let (tc, ec) = (&t[mid..], &e[mid..]);
    let e0 = e.first().copied().unwrap_or(0.0);
    let verdicts = |templates: &[EnvelopeTemplate]| {
        templates
            .iter()
            .map(|tpl| Ok(envelope_check(tc, ec, &fit_envelope(tpl, tf, ef, e0)?)))
            .collect::<Result<Vec<_>>>()
    };
    let envelope_verdicts = verdicts(&options.envelopes)?;
    let reported_envelopes = verdicts(&options.reported)?;
    Ok(DecayFitReport {
        tail_start: t[start],
        tail_fraction: options.tail_fraction,
        q: options.q,
        selected_model: select_model(&exp_fit, &poly_fit),
        exp_fit,
        poly_fit,
        stretched_fit,
        fit_window: [tf[0], tf[tf.len() - 1]],
        check_window: [tc[0], tc[tc.len() - 1]],
        envelope_verdicts,
        reported_envelopes,
        integral_check: integral_decay_check(t, e, options.q),
    })
}

fn fmt_r2(r2: Option<f64>) -> String {
    r2.map_or_else(|| "undefined".to_string(), |r| format!("{r:.6}"))
}

impl DecayFitReport {
    pub fn all_envelopes_pass(&self) -> bool {
        self.envelope_verdicts.iter().all(|v| v.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "tail window   t >= {:.4} (last {:.0}% of samples)\n",
            self.tail_start,
            100.0 * self.tail_fraction
        ));
        s.push_str(&format!(
            "exponential   c1 = {:.6e}  c2 = {:.6e}  R2 = {}\n",
            self.exp_fit.c1,
            self.exp_fit.c2,
            fmt_r2(self.exp_fit.r2)
        ));
        s.push_str(&format!(
            "polynomial    c  = {:.6e}  alpha = {:.6}  R2 = {}\n",
            self.poly_fit.c,
            self.poly_fit.alpha,
            fmt_r2(self.poly_fit.r2)
        ));
        if let Some(f) = &self.stretched_fit {
            s.push_str(&format!(
                "stretched     c  = {:.6e}  rate = {:.6e}  beta_s = {:.4}  R2 = {}\n",
                f.c,
                f.rate,
                f.beta_s,
                fmt_r2(f.r2)
            ));
        }
        s.push_str(&format!("selected      {:?}\n", self.selected_model));
        s.push_str(&format!(
            "{:<36} {:>12} {:>8}\n",
            "envelope", "sup ratio", "verdict"
        ));
        for v in &self.envelope_verdicts {
            s.push_str(&format!(
                "{:<36} {:>12.6} {:>8}\n",
                v.name,
                v.sup_ratio,
                if v.pass { "pass" } else { "FAIL" }
            ));
        }
        for v in &self.reported_envelopes {
            s.push_str(&format!(
                "{:<36} {:>12.6} {:>8}\n",
                format!("{} (reported)", v.name),
                v.sup_ratio,
                if v.pass { "below" } else { "above" }
            ));
        }
        let ic = &self.integral_check;
        s.push_str(&format!(
            "integral of E^((q+1)/2): I(T/4) = {:.6e}  I(T/2) = {:.6e}  I(T) = {:.6e}  ratio = {}\n",
            ic.partial_integrals[0],
            ic.partial_integrals[1],
            ic.partial_integrals[2],
            ic.increment_ratio.map_or("undefined".into(), |r| format!("{r:.4e}"))
        ));
        s
    }
}
