use serde::{Deserialize, Serialize};

/// Nonlinear damping `h(s) = scale · s |s|^{q-1}` for `|s| ≤ 1`, `scale · s` beyond.
///
/// Both branches meet at `|s| = 1`, `h` is nondecreasing with `h(s) s ≥ 0`,
/// and the growth conditions hold with `c₁ = c₂ = c₃ = c₄ = scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingSpec {
    pub q: f64,
    pub scale: f64,
}

impl DampingSpec {
    pub fn linear(scale: f64) -> Self {
        DampingSpec { q: 1.0, scale }
    }

    pub fn h(&self, s: f64) -> f64 {
        let a = s.abs();
        if a > 1.0 {
            self.scale * s
        } else if self.q == 2.0 {
            self.scale * s * a
        } else {
            self.scale * s * a.powf(self.q - 1.0)
        }
    }

    pub fn h_prime(&self, s: f64) -> f64 {
        let a = s.abs();
        if a > 1.0 {
            self.scale
        } else if self.q == 2.0 {
            2.0 * self.scale * a
        } else {
            self.scale * self.q * a.powf(self.q - 1.0)
        }
    }
}

/// Solves `v + c h(v) = r` for `c ≥ 0`.
///
/// The left side is strictly increasing, so the root is unique and lies
/// between 0 and `r`. Newton steps are kept inside the bracket and replaced by
/// bisection when they leave it or stall.
pub fn solve_damping_pointwise(r: f64, c: f64, damping: &DampingSpec) -> f64 {
    if c == 0.0 || r == 0.0 {
        return r;
    }
    if damping.q == 1.0 {
        return r / (1.0 + c * damping.scale);
    }
    let g = |v: f64| v + c * damping.h(v) - r;
    let (mut lo, mut hi) = if r > 0.0 { (0.0, r) } else { (r, 0.0) };
    // linear-branch guess, exact whenever the root has |v| > 1
    let mut v = r / (1.0 + c * damping.scale);
    if !(v > lo && v < hi) {
        v = 0.5 * (lo + hi);
    }
    let tol = 1e-13 * (1.0 + r.abs());
    for _ in 0..200 {
        let gv = g(v);
        if gv.abs() <= tol {
            break;
        }
        if gv > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let slope = 1.0 + c * damping.h_prime(v);
        let mut next = v - gv / slope;
        if !(next > lo && next < hi) || (next - v).abs() > 0.5 * (hi - lo) {
            next = 0.5 * (lo + hi);
        }
        if next == v {
            break;
        }
        v = next;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_case() {
        let d = DampingSpec::linear(2.0);
        assert_eq!(solve_damping_pointwise(3.0, 0.5, &d), 1.5);
        assert_eq!(
            solve_damping_pointwise(3.0, 0.0, &DampingSpec { q: 2.0, scale: 1.0 }),
            3.0
        );
    }

    #[test]
    fn quadratic_branch() {
        let d = DampingSpec { q: 2.0, scale: 1.0 };
        let v = solve_damping_pointwise(1.5, 1.0, &d);
        let exact = (-1.0 + 7f64.sqrt()) / 2.0;
        assert!((v - exact).abs() < 1e-14);
        assert!((v - 0.822_875_655_532_295).abs() < 1e-12);
        assert!((solve_damping_pointwise(-1.5, 1.0, &d) + exact).abs() < 1e-14);
    }

    #[test]
    fn h_satisfies_growth_conditions() {
        for &q in &[1.0, 1.5, 2.0, 3.0] {
            let d = DampingSpec { q, scale: 0.7 };
            for i in -300..=300 {
                let s = i as f64 / 100.0;
                let h = d.h(s);
                assert!(h * s >= 0.0);
                let a = s.abs();
                if a > 1.0 {
                    assert!((h.abs() - 0.7 * a).abs() < 1e-12);
                } else {
                    assert!(h.abs() >= 0.7 * a.powf(q) - 1e-15);
                    assert!(h.abs() <= 0.7 * a.powf(1.0 / q) + 1e-15);
                }
            }
        }
    }
}
