//! Decay envelopes: upper-bounding curves for the energy with free constants.

use serde::{Deserialize, Serialize};

use super::ConvexityData;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum EnvelopeModel {
    /// `amplitude · e^{-rate t}`
    Exponential { amplitude: f64, rate: f64 },
    /// `amplitude · exp(-rate t^exponent)`
    StretchedExponential {
        amplitude: f64,
        rate: f64,
        exponent: f64,
    },
    /// `amplitude · (1+t)^{-exponent}`
    Polynomial { amplitude: f64, exponent: f64 },
    /// `(1/ε₁) G₁⁻¹(k₁ ∫_{t₀}^t ξ)`
    #[serde(rename = "G1-implicit")]
    G1Implicit {
        convexity: ConvexityData,
        eps1: f64,
        k1: f64,
        t0: f64,
    },
    /// `E(0) {t G₂⁻¹(k₂ / (t ∫_{t₀}^t ξ))}^{2/(q+1)}`
    #[serde(rename = "G2-implicit")]
    G2Implicit {
        convexity: ConvexityData,
        q: f64,
        e0: f64,
        eps1: f64,
        k2: f64,
        t0: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub name: String,
    #[serde(flatten)]
    pub model: EnvelopeModel,
}

impl DecayEnvelope {
    pub fn new(name: impl Into<String>, model: EnvelopeModel) -> Self {
        DecayEnvelope {
            name: name.into(),
            model,
        }
    }

    /// Envelope value at `t`; `None` where it is undefined or saturated.
    pub fn evaluate(&self, t: f64) -> Option<f64> {
        let v = match self.model {
            EnvelopeModel::Exponential { amplitude, rate } => amplitude * (-rate * t).exp(),
            EnvelopeModel::StretchedExponential {
                amplitude,
                rate,
                exponent,
            } => amplitude * (-rate * t.max(0.0).powf(exponent)).exp(),
            EnvelopeModel::Polynomial {
                amplitude,
                exponent,
            } => amplitude * (1.0 + t).powf(-exponent),
            EnvelopeModel::G1Implicit {
                convexity,
                eps1,
                k1,
                t0,
            } => {
                let y = k1 * convexity.xi.integral(t0, t.max(t0));
                let inv = convexity.g1_inverse(y).ok()?;
                if inv.saturated {
                    return None;
                }
                inv.value / eps1
            }
            EnvelopeModel::G2Implicit {
                convexity,
                q,
                e0,
                eps1,
                k2,
                t0,
            } => {
                if t <= t0 {
                    return None;
                }
                let z = k2 / (t * convexity.xi.integral(t0, t));
                let inv = convexity.g2_inverse(eps1, z);
                if inv.saturated {
                    return None;
                }
                e0 * (t * inv.value).powf(2.0 / (q + 1.0))
            }
        };
        (v.is_finite() && v > 0.0).then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeKind {
    /// `C E(0) (1+t)^{-2/(q+1)}`, valid without any convexity condition on the kernel.
    Polynomial,
    /// The `G₁` (q = 1) or `G₂` (q > 1) envelope, which needs convexity data.
    Convexity,
}

/// Free constants of the envelopes; none of them is derived, all are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub c: f64,
    pub e0: f64,
    pub eps1: f64,
    pub k1: f64,
    pub k2: f64,
    pub t0: f64,
}

impl Default for EnvelopeConstants {
    fn default() -> Self {
        EnvelopeConstants {
            c: 1.0,
            e0: 1.0,
            eps1: 1.0,
            k1: 1.0,
            k2: 1.0,
            t0: 0.0,
        }
    }
}

pub fn predicted_envelope(
    convexity: Option<&ConvexityData>,
    q: f64,
    kind: EnvelopeKind,
    k: EnvelopeConstants,
) -> Result<DecayEnvelope> {
    if !(q >= 1.0) {
        return Err(Error::Domain(format!(
            "damping exponent q must be >= 1, got {q}"
        )));
    }
    match kind {
        EnvelopeKind::Polynomial => Ok(DecayEnvelope::new(
            "polynomial",
            EnvelopeModel::Polynomial {
                amplitude: k.c * k.e0,
                exponent: 2.0 / (q + 1.0),
            },
        )),
        EnvelopeKind::Convexity => {
            let convexity = *convexity
                .ok_or_else(|| Error::Domain("the convexity envelope needs (xi, G) data".into()))?;
            if q == 1.0 {
                Ok(DecayEnvelope::new(
                    "G1-implicit",
                    EnvelopeModel::G1Implicit {
                        convexity,
                        eps1: k.eps1,
                        k1: k.k1,
                        t0: k.t0,
                    },
                ))
            } else {
                Ok(DecayEnvelope::new(
                    "G2-implicit",
                    EnvelopeModel::G2Implicit {
                        convexity,
                        q,
                        e0: k.e0,
                        eps1: k.eps1,
                        k2: k.k2,
                        t0: k.t0,
                    },
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ConvexMap, Kernel, KernelSpec, Xi};

    #[test]
    fn linear_g1_envelope_is_exponential() {
        let beta = 0.8;
        let k = Kernel::new(KernelSpec::shifted_exponential(0.1, beta)).unwrap();
        let cx = k.canonical_convexity().unwrap();
        let consts = EnvelopeConstants {
            eps1: 0.5,
            k1: 0.3,
            t0: 1.0,
            ..Default::default()
        };
        let env = predicted_envelope(Some(&cx), 1.0, EnvelopeKind::Convexity, consts).unwrap();
        for &t in &[2.0, 5.0, 20.0] {
            let ratio = env.evaluate(t + 1.0).unwrap() / env.evaluate(t).unwrap();
            assert!((ratio - (-0.3 * beta).exp()).abs() < 1e-10);
        }
        assert!((env.evaluate(1.0).unwrap() - k.f0() / 0.5).abs() < 1e-15);
    }

    #[test]
    fn theorem_envelope_exponent() {
        let env = predicted_envelope(
            None,
            2.0,
            EnvelopeKind::Polynomial,
            EnvelopeConstants {
                c: 3.0,
                e0: 2.0,
                ..Default::default()
            },
        )
        .unwrap();
        match env.model {
            EnvelopeModel::Polynomial {
                amplitude,
                exponent,
            } => {
                assert_eq!(amplitude, 6.0);
                assert!((exponent - 2.0 / 3.0).abs() < 1e-15);
            }
            _ => panic!("wrong model"),
        }
        assert!(predicted_envelope(
            None,
            0.5,
            EnvelopeKind::Polynomial,
            EnvelopeConstants::default()
        )
        .is_err());
        assert!(predicted_envelope(
            None,
            1.0,
            EnvelopeKind::Convexity,
            EnvelopeConstants::default()
        )
        .is_err());
    }

    #[test]
    fn stretched_g1_envelope_shape() {
        // E ≤ (1/ε₁) G₁⁻¹(k₁ t) and G₁(t) ≤ (ln(α/t))^{1/β} give
        // G₁⁻¹(y) ≤ α exp(-y^β)
        let (alpha, beta) = (0.2, 0.5);
        let cx = ConvexityData::new(
            Xi::Constant { value: 1.0 },
            ConvexMap::StretchedLog { alpha, beta },
            alpha,
        );
        let env = predicted_envelope(
            Some(&cx),
            1.0,
            EnvelopeKind::Convexity,
            EnvelopeConstants::default(),
        )
        .unwrap();
        for &t in &[1.0, 10.0, 100.0] {
            let v = env.evaluate(t).unwrap();
            assert!(v <= alpha * (-t.powf(beta)).exp() * (1.0 + 1e-9), "t = {t}");
        }
    }

    #[test]
    fn g2_envelope_decreases_for_linear_g() {
        let cx = ConvexityData::new(
            Xi::Constant { value: 1.0 },
            ConvexMap::Linear { scale: 1.0 },
            0.03,
        );
        let env = predicted_envelope(
            Some(&cx),
            2.0,
            EnvelopeKind::Convexity,
            EnvelopeConstants {
                t0: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(env.evaluate(1.0).is_none());
        let a = env.evaluate(3.0).unwrap();
        let b = env.evaluate(9.0).unwrap();
        // E(0) (k₂/(t - t₀))^{2/3}
        assert!((a - 0.5f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!(b < a);
    }
}
