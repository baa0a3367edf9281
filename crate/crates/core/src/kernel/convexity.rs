//! Convexity data `(ξ, G)` with `f' ≤ -ξ G(f)`, the quadratic extension of `G`
//! past `f(0)`, and the maps `G₁(t) = ∫_t^{f(0)} ds / (s G'(s))`,
//! `G₂(t) = t G'(ε₁ t)` together with their inverses.

use serde::{Deserialize, Serialize};

use super::Kernel;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Relative floor below which `G₁` is not evaluated (`t_floor = FLOOR · f(0)`).
pub const G1_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Xi {
    Constant { value: f64 },
}

impl Xi {
    pub fn value(&self, _t: f64) -> f64 {
        match *self {
            Xi::Constant { value } => value,
        }
    }

    /// `∫_{from}^{to} ξ`.
    pub fn integral(&self, from: f64, to: f64) -> f64 {
        match *self {
            Xi::Constant { value } => value * (to - from),
        }
    }
}

/// Closed-form convex maps on `[0, f(0)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexMap {
    /// `scale · t`
    Linear { scale: f64 },
    /// `scale · t^exponent`
    Power { exponent: f64, scale: f64 },
    /// `β t / (ln(α/t))^{1/β - 1}`, the map matching `α exp(-t^β)`.
    StretchedLog { alpha: f64, beta: f64 },
}

impl ConvexMap {
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            ConvexMap::Linear { scale } => scale * t,
            ConvexMap::Power { exponent, scale } => scale * t.powf(exponent),
            ConvexMap::StretchedLog { alpha, beta } => {
                let l = (alpha / t).ln();
                beta * t * l.powf(1.0 - 1.0 / beta)
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            ConvexMap::Linear { scale } => scale,
            ConvexMap::Power { exponent, scale } => {
                if t <= 0.0 {
                    if exponent > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    scale * exponent * t.powf(exponent - 1.0)
                }
            }
            ConvexMap::StretchedLog { alpha, beta } => {
                if t <= 0.0 {
                    return 0.0;
                }
                let l = (alpha / t).ln();
                (beta * l + 1.0 - beta) / l.powf(1.0 / beta)
            }
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match *self {
            ConvexMap::Linear { .. } => 0.0,
            ConvexMap::Power { exponent, scale } => {
                scale * exponent * (exponent - 1.0) * t.powf(exponent - 2.0)
            }
            ConvexMap::StretchedLog { alpha, beta } => {
                let l = (alpha / t).ln();
                (1.0 - beta) * (l + 1.0 / beta) / (t * l.powf(1.0 / beta + 1.0))
            }
        }
    }
}

/// Result of an inversion that may run off the representable range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseValue {
    pub value: f64,
    pub saturated: bool,
}

impl InverseValue {
    fn exact(value: f64) -> Self {
        InverseValue {
            value,
            saturated: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityData {
    pub xi: Xi,
    pub g: ConvexMap,
    /// `f(0)`, the right end of the natural domain of `G`.
    pub f0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub min_g_prime: f64,
    pub min_g_second: f64,
    /// `(g₀, g₁, g₂)`; absent when `G` is singular at `f(0)`.
    pub extension_coeffs: Option<[f64; 3]>,
    /// Largest mismatch of value and first two derivatives across `f(0)`.
    pub extension_mismatch: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityInequalityReport {
    /// `max_t f'(t) + ξ(t) G(f(t))`; nonpositive when the inequality holds.
    pub max_violation: f64,
    pub at: f64,
    pub points: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl ConvexityData {
    pub fn new(xi: Xi, g: ConvexMap, f0: f64) -> Self {
        ConvexityData { xi, g, f0 }
    }

    /// `(g₀, g₁, g₂) = (G, G', G'')` at `f(0)`, when finite.
    pub fn extension_coeffs(&self) -> Option<[f64; 3]> {
        let c = [
            self.g.value(self.f0),
            self.g.derivative(self.f0),
            self.g.second_derivative(self.f0),
        ];
        c.iter().all(|v| v.is_finite()).then_some(c)
    }

    /// The quadratic continuation of `G` beyond `f(0)`.
    pub fn extend(&self, t: f64) -> f64 {
        let Some([g0, g1, g2]) = self.extension_coeffs() else {
            return f64::NAN;
        };
        let f0 = self.f0;
        (g0 - g1 * f0 + 0.5 * g2 * f0 * f0) + (g1 - g2 * f0) * t + 0.5 * g2 * t * t
    }

    fn extend_prime(&self, t: f64) -> f64 {
        let Some([_, g1, g2]) = self.extension_coeffs() else {
            return f64::NAN;
        };
        g1 + g2 * (t - self.f0)
    }

    /// `G` on `[0, ∞)`, extended past `f(0)`.
    pub fn g(&self, t: f64) -> f64 {
        if t <= self.f0 {
            self.g.value(t)
        } else {
            self.extend(t)
        }
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        if t <= self.f0 {
            self.g.derivative(t)
        } else {
            self.extend_prime(t)
        }
    }

    /// `G⁻¹(y)` on the extended map.
    pub fn g_inverse(&self, y: f64) -> InverseValue {
        if !(y > 0.0) {
            return InverseValue::exact(0.0);
        }
        let top = self.g.value(self.f0);
        let (lo, hi) = if y <= top || !top.is_finite() {
            (0.0, self.f0)
        } else {
            if self.extension_coeffs().is_none() {
                return InverseValue {
                    value: self.f0,
                    saturated: true,
                };
            }
            let mut hi = 2.0 * self.f0;
            let mut n = 0;
            while self.g(hi) < y {
                hi *= 2.0;
                n += 1;
                if n > 2000 || !hi.is_finite() {
                    return InverseValue {
                        value: hi,
                        saturated: true,
                    };
                }
            }
            (self.f0, hi)
        };
        InverseValue::exact(bisect_increasing(|t| self.g(t), y, lo, hi))
    }

    pub fn validate(&self) -> ConvexityReport {
        let mut min_g_prime = f64::INFINITY;
        let mut min_g_second = f64::INFINITY;
        let n = 400;
        for i in 0..=n {
            // geometric grid in (0, f(0)]
            let t = self.f0 * 10f64.powf(-12.0 * (1.0 - i as f64 / n as f64));
            let (d1, d2) = (self.g.derivative(t), self.g.second_derivative(t));
            if d1.is_finite() {
                min_g_prime = min_g_prime.min(d1);
            }
            if d2.is_finite() {
                min_g_second = min_g_second.min(d2);
            }
        }
        let coeffs = self.extension_coeffs();
        let mismatch = coeffs.map(|[g0, g1, g2]| {
            let f0 = self.f0;
            let v = (self.extend(f0) - g0).abs();
            let d = (self.extend_prime(f0) - g1).abs();
            // second derivative of the quadratic is g₂ identically
            v.max(d).max((g2 - self.g.second_derivative(f0)).abs())
        });
        let pass = min_g_prime > 0.0
            && min_g_second >= 0.0
            && self.g.value(0.0) == 0.0
            && mismatch.is_none_or(|m| m <= 1e-12 * (1.0 + coeffs.unwrap()[0].abs()));
        ConvexityReport {
            min_g_prime,
            min_g_second,
            extension_coeffs: coeffs,
            extension_mismatch: mismatch,
            pass,
        }
    }

    /// Pointwise check of `f'(t) ≤ -ξ(t) G(f(t))` on `grid` (all points must be positive).
    pub fn check_inequality(
        &self,
        kernel: &Kernel,
        grid: &[f64],
        tolerance: f64,
    ) -> Result<ConvexityInequalityReport> {
        let mut max_violation = f64::NEG_INFINITY;
        let mut at = f64::NAN;
        for &t in grid {
            if !(t > 0.0) {
                return Err(Error::Domain(format!(
                    "grid points must be positive, got {t}"
                )));
            }
            let v = kernel.f_prime(t)? + self.xi.value(t) * self.g(kernel.f(t)?);
            if v > max_violation || at.is_nan() {
                max_violation = v;
                at = t;
            }
        }
        Ok(ConvexityInequalityReport {
            max_violation,
            at,
            points: grid.len(),
            tolerance,
            pass: max_violation <= tolerance,
        })
    }

    fn g1_integrand(&self) -> impl Fn(f64) -> f64 + '_ {
        // substitution s = e^σ: ds / (s G'(s)) = dσ / G'(e^σ)
        move |sigma: f64| {
            let d = self.g.derivative(sigma.exp());
            if d.is_infinite() {
                0.0
            } else {
                1.0 / d
            }
        }
    }

    fn g1_between(&self, lo: f64, hi: f64) -> Result<f64> {
        Ok(integrate(self.g1_integrand(), lo, hi, Tolerance::rel(1e-13))?.value)
    }

    /// `G₁(t) = ∫_t^{f(0)} ds / (s G'(s))` for `t ∈ (0, f(0)]`.
    pub fn g1(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= self.f0) {
            return Err(Error::Domain(format!(
                "G1 needs t in (0, {}], got {t}",
                self.f0
            )));
        }
        self.g1_between(t.ln(), self.f0.ln())
    }

    pub fn g1_floor(&self) -> f64 {
        G1_FLOOR * self.f0
    }

    /// `G₁⁻¹(y)`; saturates at the floor `1e-14 f(0)` when `y` exceeds `G₁(floor)`.
    pub fn g1_inverse(&self, y: f64) -> Result<InverseValue> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("G1 inverse needs y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(InverseValue::exact(self.f0));
        }
        let top = self.f0.ln();
        let floor = self.g1_floor().ln();
        let at_floor = self.g1_between(floor, top)?;
        if y > at_floor {
            return Ok(InverseValue {
                value: self.g1_floor(),
                saturated: true,
            });
        }
        // φ(σ) = G₁(e^σ) - y is decreasing; φ(lo) ≥ 0 ≥ φ(hi).
        let (mut lo, mut hi) = (floor, top);
        let (mut sigma, mut phi) = (top, -y);
        let integrand = self.g1_integrand();
        for _ in 0..200 {
            if phi.abs() <= 1e-13 * (1.0 + y) {
                break;
            }
            if phi > 0.0 {
                lo = sigma;
            } else {
                hi = sigma;
            }
            let slope = -integrand(sigma);
            let mut next = if slope < 0.0 {
                sigma - phi / slope
            } else {
                f64::NAN
            };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == sigma || hi - lo <= 1e-15 * top.abs().max(1.0) {
                break;
            }
            // G₁(e^{next}) = G₁(e^σ) + ∫_{next}^{σ}
            phi += self.g1_between(next, sigma)?;
            sigma = next;
        }
        Ok(InverseValue::exact(sigma.exp()))
    }

    /// `G₂(t) = t G'(ε₁ t)` with `G` extended past `f(0)`.
    pub fn g2(&self, eps1: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        t * self.g_prime(eps1 * t)
    }

    pub fn g2_inverse(&self, eps1: f64, y: f64) -> InverseValue {
        if !(y > 0.0) {
            return InverseValue::exact(0.0);
        }
        let mut hi = 1.0;
        let mut n = 0;
        while self.g2(eps1, hi) < y {
            hi *= 2.0;
            n += 1;
            if n > 2000 || !hi.is_finite() || self.g2(eps1, hi).is_nan() {
                return InverseValue {
                    value: hi,
                    saturated: true,
                };
            }
        }
        InverseValue::exact(bisect_increasing(|t| self.g2(eps1, t), y, 0.0, hi))
    }
}

/// Bisection for `g(t) = y` with `g` increasing on `[lo, hi]`, run to the last bit.
fn bisect_increasing<F: Fn(f64) -> f64>(g: F, y: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (g(hi) - y).abs() <= (g(lo) - y).abs() {
        hi
    } else {
        lo
    }
}
