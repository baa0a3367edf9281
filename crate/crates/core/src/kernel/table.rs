//! Tabulated kernels: monotone piecewise-cubic Hermite interpolation with an
//! exponential tail continued from the last two samples.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Table {
    ts: Vec<f64>,
    fs: Vec<f64>,
    slopes: Vec<f64>,
    /// Decay rate of the exponential continuation; `None` when the table ends at zero.
    tail_rate: Option<f64>,
    /// ∫ over each interval `[t_k, t_{k+1}]`, suffix-summed: `suffix[k] = ∫_{t_k}^{t_last} f`.
    suffix: Vec<f64>,
}

impl Table {
    pub(crate) fn new(samples: &[[f64; 2]]) -> Result<Table> {
        if samples.len() < 2 {
            return Err(Error::InvalidKernel(
                "a tabulated kernel needs at least two samples".into(),
            ));
        }
        let ts: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let fs: Vec<f64> = samples.iter().map(|s| s[1]).collect();
        if ts.iter().chain(fs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("samples must be finite".into()));
        }
        if ts[0] != 0.0 {
            return Err(Error::InvalidKernel(format!(
                "first sample must be at t = 0, got {}",
                ts[0]
            )));
        }
        if fs[0] <= 0.0 {
            return Err(Error::InvalidKernel("f(0) must be positive".into()));
        }
        for k in 0..ts.len() - 1 {
            if ts[k + 1] <= ts[k] {
                return Err(Error::InvalidKernel(format!(
                    "sample times must increase strictly (index {})",
                    k + 1
                )));
            }
            if fs[k + 1] > fs[k] + 1e-12 {
                return Err(Error::InvalidKernel(format!(
                    "kernel must be nonincreasing: f({}) = {} > f({}) = {}",
                    ts[k + 1],
                    fs[k + 1],
                    ts[k],
                    fs[k]
                )));
            }
            if fs[k + 1] < 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "kernel must be nonnegative (index {})",
                    k + 1
                )));
            }
        }
        // Clamp round-off level increases so the interpolant stays monotone.
        let mut fs = fs;
        for k in 1..fs.len() {
            fs[k] = fs[k].min(fs[k - 1]);
        }

        let n = ts.len();
        let last = fs[n - 1];
        let tail_rate = if last == 0.0 {
            None
        } else {
            let prev = fs[n - 2];
            if prev <= last {
                return Err(Error::NonIntegrableTail(
                    "the last two samples are equal, so the exponential continuation does not decay".into(),
                ));
            }
            Some((prev / last).ln() / (ts[n - 1] - ts[n - 2]))
        };

        let slopes = pchip_slopes(&ts, &fs, tail_rate.map(|r| -r * last));
        let mut suffix = vec![0.0; n];
        for k in (0..n - 1).rev() {
            let h = ts[k + 1] - ts[k];
            let seg = h * (fs[k] + fs[k + 1]) / 2.0 + h * h * (slopes[k] - slopes[k + 1]) / 12.0;
            suffix[k] = suffix[k + 1] + seg;
        }
        Ok(Table {
            ts,
            fs,
            slopes,
            tail_rate,
            suffix,
        })
    }

    pub(crate) fn last_time(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub(crate) fn tail_rate(&self) -> Option<f64> {
        self.tail_rate
    }

    fn locate(&self, t: f64) -> usize {
        // index k with t_k <= t < t_{k+1}
        self.ts
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(self.ts.len() - 2)
    }

    fn hermite(&self, k: usize, t: f64) -> (f64, f64) {
        let h = self.ts[k + 1] - self.ts[k];
        let s = (t - self.ts[k]) / h;
        let (y0, y1, d0, d1) = (
            self.fs[k],
            self.fs[k + 1],
            self.slopes[k],
            self.slopes[k + 1],
        );
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * s * (s - 1.0);
        let dh10 = (1.0 - s) * (1.0 - 3.0 * s);
        let dh01 = -dh00;
        let dh11 = s * (3.0 * s - 2.0);
        let deriv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        (value, deriv)
    }

    pub(crate) fn value(&self, t: f64) -> f64 {
        let last = self.last_time();
        if t >= last {
            return match self.tail_rate {
                Some(r) => self.fs[self.fs.len() - 1] * (-r * (t - last)).exp(),
                None => 0.0,
            };
        }
        self.hermite(self.locate(t), t).0.max(0.0)
    }

    pub(crate) fn derivative(&self, t: f64) -> f64 {
        let last = self.last_time();
        if t >= last {
            return match self.tail_rate {
                Some(r) => -r * self.value(t),
                None => 0.0,
            };
        }
        self.hermite(self.locate(t), t).1.min(0.0)
    }

    /// ∫_t^∞ f.
    pub(crate) fn tail_integral(&self, t: f64) -> f64 {
        let last = self.last_time();
        let beyond = |from: f64| match self.tail_rate {
            Some(r) => self.value(from) / r,
            None => 0.0,
        };
        if t >= last {
            return beyond(t);
        }
        let k = self.locate(t);
        // partial segment [t, t_{k+1}]: the interpolant is cubic, so 3-point Gauss is exact
        let (a, b) = (t, self.ts[k + 1]);
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let x = (0.6f64).sqrt();
        let partial = r
            * (5.0 * self.hermite(k, c - r * x).0
                + 8.0 * self.hermite(k, c).0
                + 5.0 * self.hermite(k, c + r * x).0)
            / 9.0;
        partial + self.suffix[k + 1] + beyond(last)
    }
}

/// Fritsch–Carlson style slopes (the scheme used by SciPy's `PchipInterpolator`),
/// with the final slope optionally pinned to match the exponential continuation.
fn pchip_slopes(ts: &[f64], fs: &[f64], last_slope: Option<f64>) -> Vec<f64> {
    let n = ts.len();
    let h: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (fs[k + 1] - fs[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
    } else {
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] <= 0.0 {
                d[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }
    if let Some(s) = last_slope {
        d[n - 1] = s;
    }
    d
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}
