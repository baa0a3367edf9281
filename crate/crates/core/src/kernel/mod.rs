//! Relaxation kernels and the analytic objects derived from them.
//!
//! A [`KernelSpec`] is the serialisable description; [`Kernel`] is the
//! validated, evaluable form. Every family provides `f`, `f'` and the tail
//! integral `F(t) = ∫_t^∞ f` in closed form (tabulated kernels use monotone
//! cubic interpolation with an exponential continuation).

mod convexity;
mod envelope;
mod table;

pub use convexity::{
    ConvexMap, ConvexityData, ConvexityInequalityReport, ConvexityReport, InverseValue, Xi,
};
pub use envelope::{
    predicted_envelope, DecayEnvelope, EnvelopeConstants, EnvelopeKind, EnvelopeModel,
};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};
use table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `α e^{-β(1+t)}`
    ShiftedExponential,
    /// `α exp(-t^β)`, `0 < β < 1`
    StretchedExponential,
    /// `α (1+t)^{-β}`
    PowerLaw,
    /// Nonuniform samples `(t, f(t))`.
    Tabulated,
}

/// Serialised kernel description: `{"family", "alpha", "beta", "samples"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 2]>>,
}

impl KernelSpec {
    pub fn shifted_exponential(alpha: f64, beta: f64) -> Self {
        Self::closed(KernelFamily::ShiftedExponential, alpha, beta)
    }

    pub fn stretched_exponential(alpha: f64, beta: f64) -> Self {
        Self::closed(KernelFamily::StretchedExponential, alpha, beta)
    }

    pub fn power_law(alpha: f64, beta: f64) -> Self {
        Self::closed(KernelFamily::PowerLaw, alpha, beta)
    }

    pub fn tabulated(samples: Vec<[f64; 2]>) -> Self {
        KernelSpec {
            family: KernelFamily::Tabulated,
            alpha: 0.0,
            beta: 0.0,
            samples: Some(samples),
        }
    }

    fn closed(family: KernelFamily, alpha: f64, beta: f64) -> Self {
        KernelSpec {
            family,
            alpha,
            beta,
            samples: None,
        }
    }
}

/// One term `amplitude · e^{-rate t}` of a sum-of-exponentials kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PronyMode {
    pub amplitude: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    ShiftedExponential { alpha: f64, beta: f64 },
    StretchedExponential { alpha: f64, beta: f64 },
    PowerLaw { alpha: f64, beta: f64 },
    Tabulated(Table),
}

/// A validated relaxation kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    spec: KernelSpec,
    repr: Repr,
}

fn check_t(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "kernel evaluated at t = {t}; t must be finite and nonnegative"
        )))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )))
    }
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Kernel> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidKernel(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        let repr = match spec.family {
            KernelFamily::Tabulated => {
                let samples = spec.samples.as_deref().ok_or_else(|| {
                    Error::InvalidKernel("tabulated kernel requires samples".into())
                })?;
                Repr::Tabulated(Table::new(samples)?)
            }
            family => {
                positive("alpha", spec.alpha)?;
                positive("beta", spec.beta)?;
                let (alpha, beta) = (spec.alpha, spec.beta);
                match family {
                    KernelFamily::ShiftedExponential => Repr::ShiftedExponential { alpha, beta },
                    KernelFamily::StretchedExponential => {
                        if beta >= 1.0 {
                            return Err(Error::InvalidKernel(format!(
                                "stretched-exponential kernel needs beta in (0, 1), got {beta}"
                            )));
                        }
                        Repr::StretchedExponential { alpha, beta }
                    }
                    KernelFamily::PowerLaw => Repr::PowerLaw { alpha, beta },
                    KernelFamily::Tabulated => unreachable!(),
                }
            }
        };
        Ok(Kernel { spec, repr })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn family(&self) -> KernelFamily {
        self.spec.family
    }

    /// `f(t)`.
    pub fn f(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(match &self.repr {
            Repr::ShiftedExponential { alpha, beta } => alpha * (-beta * (1.0 + t)).exp(),
            Repr::StretchedExponential { alpha, beta } => alpha * (-t.powf(*beta)).exp(),
            Repr::PowerLaw { alpha, beta } => alpha * (1.0 + t).powf(-beta),
            Repr::Tabulated(tab) => tab.value(t),
        })
    }

    /// `f'(t)`. The stretched exponential has an infinite slope at the origin.
    pub fn f_prime(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(match &self.repr {
            Repr::ShiftedExponential { alpha, beta } => -beta * alpha * (-beta * (1.0 + t)).exp(),
            Repr::StretchedExponential { alpha, beta } => {
                if t == 0.0 {
                    return Err(Error::SingularDerivative { t });
                }
                -alpha * beta * t.powf(beta - 1.0) * (-t.powf(*beta)).exp()
            }
            Repr::PowerLaw { alpha, beta } => -alpha * beta * (1.0 + t).powf(-beta - 1.0),
            Repr::Tabulated(tab) => tab.derivative(t),
        })
    }

    /// Tail integral `F(t) = ∫_t^∞ f(s) ds`.
    pub fn tail(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(match &self.repr {
            Repr::ShiftedExponential { alpha, beta } => alpha * (-beta * (1.0 + t)).exp() / beta,
            Repr::StretchedExponential { alpha, beta } => {
                // ∫_t^∞ α e^{-s^β} ds = (α/β) Γ(1/β, t^β)
                let a = 1.0 / beta;
                let upper = if t == 0.0 {
                    1.0
                } else {
                    gamma_ur(a, t.powf(*beta))
                };
                alpha / beta * gamma(a) * upper
            }
            Repr::PowerLaw { alpha, beta } => {
                if *beta <= 1.0 {
                    return Err(Error::NonIntegrableTail(format!(
                        "power-law kernel with beta = {beta} <= 1 has infinite mass"
                    )));
                }
                alpha * (1.0 + t).powf(1.0 - beta) / (beta - 1.0)
            }
            Repr::Tabulated(tab) => tab.tail_integral(t),
        })
    }

    pub fn f0(&self) -> f64 {
        self.f(0.0).expect("t = 0 is in the domain")
    }

    /// `∫_0^∞ f`.
    pub fn total_mass(&self) -> Result<f64> {
        self.tail(0.0)
    }

    /// `∫_0^t f = F(0) - F(t)`.
    pub fn mass_until(&self, t: f64) -> Result<f64> {
        Ok(self.total_mass()? - self.tail(t)?)
    }

    /// `K_δ(s) = -f'(s)/f(s) + δ`.
    pub fn k_delta(&self, delta: f64, s: f64) -> Result<f64> {
        check_delta(delta)?;
        check_t(s)?;
        match &self.repr {
            Repr::ShiftedExponential { beta, .. } => return Ok(beta + delta),
            Repr::PowerLaw { beta, .. } => return Ok(beta / (1.0 + s) + delta),
            _ => {}
        }
        let f = self.f(s)?;
        if f <= 0.0 {
            return Err(Error::VanishingKernel { s });
        }
        Ok(-self.f_prime(s)? / f + delta)
    }

    /// `M(δ) = ∫_0^∞ f(s)/K_δ(s) ds`, by adaptive quadrature with an analytic
    /// tail where the family admits one.
    pub fn m_delta(&self, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        let tol = Tolerance::rel(1e-11);
        // f/K = f² / (δ f - f'), which stays finite where f vanishes.
        let integrand = |s: f64| -> f64 {
            let f = self.f(s).unwrap_or(0.0);
            if f == 0.0 {
                return 0.0;
            }
            let fp = self.f_prime(s).unwrap_or(f64::NEG_INFINITY);
            let denom = delta * f - fp;
            if denom.is_infinite() {
                0.0
            } else {
                f * f / denom
            }
        };
        match &self.repr {
            Repr::ShiftedExponential { beta, .. } => {
                let cut = 10.0 / beta;
                let head = integrate(integrand, 0.0, cut, tol)?.value;
                Ok(head + self.tail(cut)? / (beta + delta))
            }
            Repr::Tabulated(tab) => {
                let cut = tab.last_time();
                let head = integrate(integrand, 0.0, cut, tol)?.value;
                let tail = match tab.tail_rate() {
                    Some(r) => self.tail(cut)? / (r + delta),
                    None => 0.0,
                };
                Ok(head + tail)
            }
            Repr::PowerLaw { beta, .. } if *beta <= 1.0 => Err(Error::NonIntegrableTail(format!(
                "power-law kernel with beta = {beta} <= 1 has infinite mass"
            ))),
            _ => {
                let head = integrate(integrand, 0.0, 1.0, tol)?.value;
                let tail = integrate_to_infinity(integrand, 1.0, tol)?.value;
                Ok(head + tail)
            }
        }
    }

    /// Sum-of-exponentials form of the kernel, when it has one.
    pub fn prony_modes(&self) -> Option<Vec<PronyMode>> {
        match &self.repr {
            Repr::ShiftedExponential { alpha, beta } => Some(vec![PronyMode {
                amplitude: alpha * (-beta).exp(),
                rate: *beta,
            }]),
            _ => None,
        }
    }

    /// Convexity data under which the family satisfies the `f' ≤ -ξ G(f)`
    /// inequality: `ξ ≡ β, G(t) = t` (shifted exponential), `ξ ≡ 1` with the
    /// logarithmic map (stretched exponential), `ξ ≡ 1, G(t) = t^{(β+1)/β}`
    /// (power law). Tabulated kernels have no canonical choice.
    pub fn canonical_convexity(&self) -> Option<ConvexityData> {
        let f0 = self.f0();
        match &self.repr {
            Repr::ShiftedExponential { beta, .. } => Some(ConvexityData::new(
                Xi::Constant { value: *beta },
                ConvexMap::Linear { scale: 1.0 },
                f0,
            )),
            Repr::StretchedExponential { alpha, beta } => Some(ConvexityData::new(
                Xi::Constant { value: 1.0 },
                ConvexMap::StretchedLog {
                    alpha: *alpha,
                    beta: *beta,
                },
                f0,
            )),
            Repr::PowerLaw { beta, .. } => Some(ConvexityData::new(
                Xi::Constant { value: 1.0 },
                ConvexMap::Power {
                    exponent: (beta + 1.0) / beta,
                    scale: 1.0,
                },
                f0,
            )),
            Repr::Tabulated(_) => None,
        }
    }

    /// Checks the monotonicity and sign conditions on a geometric grid up to `t_max`.
    pub fn validate_monotone(&self, t_max: f64, points: usize) -> MonotoneCheck {
        let mut worst_increase = 0.0f64;
        let mut min_value = f64::INFINITY;
        let mut prev = self.f0();
        for i in 1..=points {
            let t = t_max * ((i as f64 / points as f64) * 30.0).exp_m1() / 30f64.exp_m1();
            let v = self.f(t).unwrap_or(f64::NAN);
            min_value = min_value.min(v);
            worst_increase = worst_increase.max(v - prev);
            prev = v;
        }
        MonotoneCheck {
            f0: self.f0(),
            min_value,
            worst_increase,
            pass: self.f0() > 0.0 && min_value >= 0.0 && worst_increase <= 1e-12,
        }
    }

    /// `ℓ = λ₀ - ‖a‖_∞ ∫_0^∞ f`; the sign is left for the caller to judge.
    pub fn ell(&self, a_sup: f64, lambda0: f64) -> Result<f64> {
        compute_ell(self, a_sup, lambda0)
    }

    pub fn analyze(&self, deltas: &[f64], tail_times: &[f64]) -> Result<KernelAnalysis> {
        let total_mass = self.total_mass()?;
        let tail_table = tail_times
            .iter()
            .map(|&t| Ok([t, self.tail(t)?]))
            .collect::<Result<Vec<_>>>()?;
        let m_table = deltas
            .iter()
            .map(|&d| Ok([d, self.m_delta(d)?]))
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelAnalysis {
            f0: self.f0(),
            total_mass,
            tail_table,
            m_table,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub f0: f64,
    pub min_value: f64,
    pub worst_increase: f64,
    pub pass: bool,
}

/// Sampled kernel-derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAnalysis {
    pub f0: f64,
    pub total_mass: f64,
    /// `[t, F(t)]` pairs.
    pub tail_table: Vec<[f64; 2]>,
    /// `[δ, M(δ)]` pairs.
    pub m_table: Vec<[f64; 2]>,
}

pub fn compute_ell(kernel: &Kernel, a_sup: f64, lambda0: f64) -> Result<f64> {
    if !(lambda0 > 0.0) {
        return Err(Error::Domain(format!(
            "lambda0 must be positive, got {lambda0}"
        )));
    }
    if a_sup == 0.0 {
        return Ok(lambda0);
    }
    Ok(lambda0 - a_sup * kernel.total_mass()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    fn families() -> Vec<Kernel> {
        vec![
            Kernel::new(KernelSpec::shifted_exponential(0.1, 1.0)).unwrap(),
            Kernel::new(KernelSpec::stretched_exponential(0.2, 0.5)).unwrap(),
            Kernel::new(KernelSpec::power_law(0.05, 2.0)).unwrap(),
        ]
    }

    #[test]
    fn closed_form_values() {
        let se = Kernel::new(KernelSpec::shifted_exponential(0.1, 1.0)).unwrap();
        assert!(close(se.f(0.0).unwrap(), 0.1 * (-1f64).exp(), 1e-15));
        assert!(close(
            se.f_prime(0.0).unwrap(),
            -0.036_787_944_117_144_23,
            1e-12
        ));
        assert!(close(
            se.tail(0.0).unwrap(),
            0.036_787_944_117_144_23,
            1e-12
        ));

        let pl = Kernel::new(KernelSpec::power_law(0.05, 2.0)).unwrap();
        assert_eq!(pl.f(0.0).unwrap(), 0.05);
        assert!(close(pl.f_prime(0.0).unwrap(), -0.1, 1e-15));
        assert!(close(pl.tail(0.0).unwrap(), 0.05, 1e-15));

        let st = Kernel::new(KernelSpec::stretched_exponential(0.2, 0.5)).unwrap();
        assert!(close(st.f(4.0).unwrap(), 0.2 * (-2f64).exp(), 1e-15));
        assert!(close(st.f(4.0).unwrap(), 0.027_067_056_647_322_54, 1e-12));
    }

    #[test]
    fn domain_errors() {
        let st = Kernel::new(KernelSpec::stretched_exponential(0.2, 0.5)).unwrap();
        assert!(matches!(st.f(-1.0), Err(Error::Domain(_))));
        assert!(matches!(
            st.f_prime(0.0),
            Err(Error::SingularDerivative { .. })
        ));
        let pl = Kernel::new(KernelSpec::power_law(0.05, 0.5)).unwrap();
        assert!(matches!(pl.tail(0.0), Err(Error::NonIntegrableTail(_))));
        assert!(matches!(pl.m_delta(0.1), Err(Error::NonIntegrableTail(_))));
        assert!(Kernel::new(KernelSpec::stretched_exponential(0.2, 1.5)).is_err());
        assert!(Kernel::new(KernelSpec::shifted_exponential(-1.0, 1.0)).is_err());
        let se = Kernel::new(KernelSpec::shifted_exponential(0.1, 1.0)).unwrap();
        assert!(matches!(se.k_delta(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(se.m_delta(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_matches_central_differences() {
        for k in families() {
            for &t in &[0.3, 1.0, 2.5, 7.0, 20.0] {
                let h = 1e-5 * (1.0 + t);
                let fd = (k.f(t + h).unwrap() - k.f(t - h).unwrap()) / (2.0 * h);
                let an = k.f_prime(t).unwrap();
                assert!(
                    close(an, fd, 1e-6),
                    "{:?} t = {t}: {an} vs {fd}",
                    k.family()
                );
                assert!(an <= 0.0);
            }
        }
    }

    #[test]
    fn tail_derivative_is_minus_f() {
        for k in families() {
            for &t in &[0.2, 1.0, 3.0, 10.0] {
                let h = 1e-4;
                let fd = (k.tail(t + h).unwrap() - k.tail(t - h).unwrap()) / (2.0 * h);
                assert!(
                    close(-fd, k.f(t).unwrap(), 1e-8),
                    "{:?} t = {t}",
                    k.family()
                );
            }
            assert!(k.tail(5000.0).unwrap() < 1e-3 * k.total_mass().unwrap());
        }
    }

    #[test]
    fn stretched_mass_matches_gamma() {
        // α Γ(1 + 1/β) = 0.2 · Γ(3) = 0.4
        let st = Kernel::new(KernelSpec::stretched_exponential(0.2, 0.5)).unwrap();
        assert!(close(st.total_mass().unwrap(), 0.4, 1e-12));
    }

    #[test]
    fn ell_examples() {
        let se = Kernel::new(KernelSpec::shifted_exponential(0.1, 1.0)).unwrap();
        assert!(close(
            se.ell(1.0, 1.0).unwrap(),
            1.0 - 0.1 * (-1f64).exp(),
            1e-14
        ));
        assert!(close(
            se.ell(1.0, 1.0).unwrap(),
            0.963_212_055_882_855_8,
            1e-14
        ));
        assert_eq!(se.ell(0.0, 1.3).unwrap(), 1.3);
        let pl = Kernel::new(KernelSpec::power_law(0.05, 2.0)).unwrap();
        assert!(close(pl.ell(2.0, 1.0).unwrap(), 0.9, 1e-14));
        assert!(compute_ell(&pl, 1.0, 0.0).is_err());
    }

    #[test]
    fn k_delta_examples() {
        let se = Kernel::new(KernelSpec::shifted_exponential(3.0, 1.0)).unwrap();
        for &s in &[0.0, 1.0, 17.0] {
            assert!(close(se.k_delta(0.1, s).unwrap(), 1.1, 1e-14));
        }
        let pl = Kernel::new(KernelSpec::power_law(0.05, 2.0)).unwrap();
        assert!(close(pl.k_delta(0.1, 0.0).unwrap(), 2.1, 1e-14));
        assert!(close(pl.k_delta(0.1, 9.0).unwrap(), 0.3, 1e-14));
        for k in families() {
            for &s in &[0.5, 2.0, 40.0] {
                assert!(k.k_delta(0.01, s).unwrap() >= 0.01);
            }
        }
    }

    #[test]
    fn m_delta_closed_forms() {
        let se = Kernel::new(KernelSpec::shifted_exponential(0.1, 1.0)).unwrap();
        let mass = 0.1 * (-1f64).exp();
        for &d in &[0.1, 0.01] {
            assert!(close(se.m_delta(d).unwrap(), mass / (1.0 + d), 1e-8));
        }
        assert!(close(
            se.m_delta(0.1).unwrap(),
            0.033_443_585_561_040_2,
            1e-8
        ));
        // power law β = 2: M(δ) = (α/2) ln((2 + δ)/δ)
        let pl = Kernel::new(KernelSpec::power_law(0.05, 2.0)).unwrap();
        for &d in &[0.5f64, 0.1, 1e-3] {
            let exact = 0.025 * ((2.0 + d) / d).ln();
            assert!(close(pl.m_delta(d).unwrap(), exact, 1e-8), "delta = {d}");
        }
        assert!(pl.m_delta(0.5).unwrap() <= 0.05 / 0.5);
    }

    #[test]
    fn delta_m_delta_vanishes() {
        for k in families() {
            let vals: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
                .iter()
                .map(|&d| d * k.m_delta(d).unwrap())
                .collect();
            assert!(
                vals.windows(2).all(|w| w[1] < w[0]),
                "{:?}: {vals:?}",
                k.family()
            );
            let bound = k.total_mass().unwrap();
            assert!(vals.iter().all(|&v| v <= bound));
        }
    }

    #[test]
    fn tabulated_kernel_round_trip() {
        let samples: Vec<[f64; 2]> = (0..=60)
            .map(|i| {
                let t = (i as f64 * 0.1).powi(2);
                [t, 0.3 * (-0.7 * t).exp()]
            })
            .collect();
        let k = Kernel::new(KernelSpec::tabulated(samples)).unwrap();
        assert!(close(k.total_mass().unwrap(), 0.3 / 0.7, 1e-4));
        assert!(close(k.m_delta(0.1).unwrap(), 0.3 / 0.7 / 0.8, 1e-3));
        assert!(k.validate_monotone(100.0, 500).pass);
        let json = serde_json::to_string(k.spec()).unwrap();
        assert!(json.contains("\"family\":\"tabulated\""));
    }

    #[test]
    fn spec_json_shape() {
        let spec: KernelSpec =
            serde_json::from_str(r#"{"family": "power-law", "alpha": 0.05, "beta": 2}"#).unwrap();
        assert_eq!(spec, KernelSpec::power_law(0.05, 2.0));
        let back = serde_json::to_value(&spec).unwrap();
        assert_eq!(back["family"], "power-law");
        assert!(back.get("samples").is_none());
    }

    #[test]
    fn prony_modes_reproduce_kernel() {
        let se = Kernel::new(KernelSpec::shifted_exponential(0.1, 0.7)).unwrap();
        let modes = se.prony_modes().unwrap();
        for &t in &[0.0, 0.4, 5.0] {
            let sum: f64 = modes
                .iter()
                .map(|m| m.amplitude * (-m.rate * t).exp())
                .sum();
            assert!(close(sum, se.f(t).unwrap(), 1e-14));
        }
        assert!(Kernel::new(KernelSpec::power_law(0.05, 2.0))
            .unwrap()
            .prony_modes()
            .is_none());
    }
}
