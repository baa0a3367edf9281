use serde::{Deserialize, Serialize};

use super::damping::DampingSpec;
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelSpec};

/// A coefficient function on `[0, L]`, either a named preset or samples on the
/// positions the coefficient is used at (midpoints for `A` and `a`, nodes for
/// `b` and `k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum CoefficientField {
    Constant {
        value: f64,
    },
    /// `base + height · exp(-((x - center)/width)²)`
    Bump {
        base: f64,
        height: f64,
        center: f64,
        width: f64,
    },
    /// Linear from `left` at `x = 0` to `right` at `x = L`.
    Ramp {
        left: f64,
        right: f64,
    },
    Sampled {
        values: Vec<f64>,
    },
}

impl CoefficientField {
    pub fn constant(value: f64) -> Self {
        CoefficientField::Constant { value }
    }

    pub fn sample(&self, positions: &[f64], length: f64, name: &str) -> Result<Vec<f64>> {
        let values: Vec<f64> = match self {
            CoefficientField::Constant { value } => vec![*value; positions.len()],
            CoefficientField::Bump {
                base,
                height,
                center,
                width,
            } => positions
                .iter()
                .map(|x| base + height * (-((x - center) / width).powi(2)).exp())
                .collect(),
            CoefficientField::Ramp { left, right } => positions
                .iter()
                .map(|x| left + (right - left) * x / length)
                .collect(),
            CoefficientField::Sampled { values } => {
                if values.len() != positions.len() {
                    return Err(Error::Config(format!(
                        "{name}: expected {} samples, found {}",
                        positions.len(),
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "{name}: non-finite coefficient value {v}"
            )));
        }
        Ok(values)
    }
}

/// Initial displacement or velocity; boundary values are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    Zero,
    /// `amplitude · sin(mode π x / L)`
    Sine {
        amplitude: f64,
        mode: u32,
    },
    /// Nodal values including both boundary nodes.
    Sampled {
        values: Vec<f64>,
    },
}

impl InitialData {
    pub fn sample(&self, grid: &Grid, name: &str) -> Result<Vec<f64>> {
        let n = grid.n_nodes();
        let mut values = match self {
            InitialData::Zero => vec![0.0; n],
            InitialData::Sine { amplitude, mode } => grid
                .nodes()
                .iter()
                .map(|x| amplitude * (*mode as f64 * std::f64::consts::PI * x / grid.length).sin())
                .collect(),
            InitialData::Sampled { values } => {
                if values.len() != n {
                    return Err(Error::Config(format!(
                        "{name}: expected {n} nodal samples, found {}",
                        values.len()
                    )));
                }
                if values[0].abs() > 1e-12 || values[n - 1].abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "{name}: initial data must vanish at the boundary"
                    )));
                }
                values.clone()
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("{name}: non-finite initial data")));
        }
        values[0] = 0.0;
        values[n - 1] = 0.0;
        Ok(values)
    }

    /// The same data multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> InitialData {
        match self {
            InitialData::Zero => InitialData::Zero,
            InitialData::Sine { amplitude, mode } => InitialData::Sine {
                amplitude: amplitude * factor,
                mode: *mode,
            },
            InitialData::Sampled { values } => InitialData::Sampled {
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvStrategy {
    /// Trapezoidal sum over the stored gradient history.
    #[default]
    Direct,
    /// Recursive per-mode accumulators for sum-of-exponentials kernels.
    #[serde(alias = "prony-recursive")]
    Prony,
}

fn one() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    /// Domain `(0, L)`.
    pub length: f64,
    pub n_cells: usize,
    pub dt: f64,
    pub t_end: f64,
    #[serde(rename = "A_field")]
    pub stiffness: CoefficientField,
    #[serde(rename = "a_field")]
    pub memory_coef: CoefficientField,
    #[serde(rename = "b_field")]
    pub damping_coef: CoefficientField,
    #[serde(rename = "k_field")]
    pub source_coef: CoefficientField,
    /// Source exponent `p > 2`.
    pub p: f64,
    pub damping: DampingSpec,
    /// `None` switches the memory term off (`f ≡ 0`).
    pub kernel: Option<KernelSpec>,
    pub initial_u: InitialData,
    pub initial_v: InitialData,
    #[serde(default)]
    pub conv_strategy: ConvStrategy,
    #[serde(default = "one")]
    pub record_stride: usize,
    /// Multiplies the admission thresholds of the well-posedness gate.
    #[serde(default = "one_f64")]
    pub gate_relax: f64,
}

/// Stability bound for the explicit scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CflReport {
    pub h: f64,
    pub mu0: f64,
    pub max_dt: f64,
    pub dt: f64,
    pub pass: bool,
}

/// A configuration resolved onto its grid.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid,
    /// `A` at midpoints.
    pub stiffness: Vec<f64>,
    /// `a` at midpoints.
    pub memory_coef: Vec<f64>,
    /// `b` at nodes.
    pub damping_coef: Vec<f64>,
    /// `k` at nodes.
    pub source_coef: Vec<f64>,
    pub kernel: Option<Kernel>,
    pub damping: DampingSpec,
    pub p: f64,
    pub dt: f64,
    pub steps: usize,
    pub strategy: ConvStrategy,
}

impl Discretization {
    pub fn lambda0(&self) -> f64 {
        self.stiffness.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mu0(&self) -> f64 {
        self.stiffness
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn a_sup(&self) -> f64 {
        self.memory_coef.iter().copied().fold(0.0, f64::max)
    }

    pub fn k_sup(&self) -> f64 {
        self.source_coef.iter().copied().fold(0.0, f64::max)
    }

    /// `ℓ = λ₀ - ‖a‖_∞ ∫f`.
    pub fn ell(&self) -> Result<f64> {
        match &self.kernel {
            Some(k) => k.ell(self.a_sup(), self.lambda0()),
            None => Ok(self.lambda0()),
        }
    }

    /// `a` at nodes, averaged from the neighbouring midpoints.
    pub fn memory_coef_at_nodes(&self) -> Vec<f64> {
        let n = self.grid.n_cells;
        (0..=n)
            .map(|i| {
                if i == 0 {
                    self.memory_coef[0]
                } else if i == n {
                    self.memory_coef[n - 1]
                } else {
                    0.5 * (self.memory_coef[i - 1] + self.memory_coef[i])
                }
            })
            .collect()
    }
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<ProblemConfig> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.length, self.n_cells)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn check_shape(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::Config(format!(
                "length must be positive, got {}",
                self.length
            )));
        }
        if self.n_cells < 16 {
            return Err(Error::Config(format!(
                "n_cells must be at least 16, got {}",
                self.n_cells
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        if !(self.damping.q >= 1.0) || !(self.damping.scale > 0.0) {
            return Err(Error::Config(format!(
                "damping needs q >= 1 and scale > 0, got q = {}, scale = {}",
                self.damping.q, self.damping.scale
            )));
        }
        Ok(())
    }

    pub fn discretize(&self) -> Result<Discretization> {
        self.check_shape()?;
        let grid = self.grid();
        let mids = grid.midpoints();
        let nodes = grid.nodes();
        let kernel = self.kernel.clone().map(Kernel::new).transpose()?;
        if self.conv_strategy == ConvStrategy::Prony
            && kernel.as_ref().is_some_and(|k| k.prony_modes().is_none())
        {
            return Err(Error::UnsupportedStrategy(format!(
                "the prony evaluator needs a sum-of-exponentials kernel, got {:?}",
                kernel.unwrap().family()
            )));
        }
        Ok(Discretization {
            grid,
            stiffness: self.stiffness.sample(&mids, self.length, "A_field")?,
            memory_coef: self.memory_coef.sample(&mids, self.length, "a_field")?,
            damping_coef: self.damping_coef.sample(&nodes, self.length, "b_field")?,
            source_coef: self.source_coef.sample(&nodes, self.length, "k_field")?,
            kernel,
            damping: self.damping,
            p: self.p,
            dt: self.dt,
            steps: self.steps(),
            strategy: self.conv_strategy,
        })
    }

    /// `dt ≤ 0.9 h / √μ₀`.
    pub fn cfl_check(&self) -> Result<CflReport> {
        self.check_shape()?;
        let grid = self.grid();
        let stiffness = self
            .stiffness
            .sample(&grid.midpoints(), self.length, "A_field")?;
        let mu0 = stiffness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(mu0 > 0.0) {
            return Err(Error::Config("A_field must be positive".into()));
        }
        let max_dt = 0.9 * grid.h / mu0.sqrt();
        Ok(CflReport {
            h: grid.h,
            mu0,
            max_dt,
            dt: self.dt,
            pass: self.dt <= max_dt,
        })
    }

    /// Lists every violated modelling hypothesis; an empty list means all hold.
    pub fn assumption_violations(&self) -> Result<Vec<String>> {
        let d = self.discretize()?;
        let mut out = Vec::new();
        let lambda0 = d.lambda0();
        if !(lambda0 > 0.0) {
            out.push(format!("stiffness: A must be positive, min A = {lambda0}"));
        }
        let a_nodes = d.memory_coef_at_nodes();
        if let Some(v) = d.memory_coef.iter().find(|&&v| v < 0.0) {
            out.push(format!("coefficients: a must be nonnegative, found {v}"));
        }
        if let Some(v) = d.damping_coef.iter().find(|&&v| v < 0.0) {
            out.push(format!("coefficients: b must be nonnegative, found {v}"));
        }
        let kappa = a_nodes
            .iter()
            .zip(&d.damping_coef)
            .map(|(a, b)| a + b)
            .fold(f64::INFINITY, f64::min);
        if !(kappa > 0.0) {
            out.push(format!(
                "coefficients: a + b must be bounded below by a positive constant, min = {kappa}"
            ));
        }
        let n = d.grid.n_cells;
        if !(d.memory_coef[0] > 0.0 || d.memory_coef[n - 1] > 0.0) {
            out.push("coefficients: a must not vanish identically near the boundary".into());
        }
        if let Some(v) = d.source_coef.iter().find(|&&v| v < 0.0) {
            out.push(format!("k must be nonnegative, found {v}"));
        }
        if !(self.p > 2.0) {
            out.push(format!(
                "source exponent must satisfy p > 2, got {}",
                self.p
            ));
        }
        if let Some(k) = &d.kernel {
            let mono = k.validate_monotone(self.t_end.max(1.0) * 10.0, 2000);
            if !mono.pass {
                out.push(format!(
                    "kernel: not positive and nonincreasing ({mono:?})"
                ));
            }
            match d.ell() {
                Ok(ell) if ell > 0.0 => {}
                Ok(ell) => out.push(format!(
                    "kernel: ell = lambda0 - |a|_inf int f must be positive, got {ell}"
                )),
                Err(e) => out.push(format!("kernel: {e}")),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn basic(n_cells: usize) -> ProblemConfig {
        ProblemConfig {
            length: 1.0,
            n_cells,
            dt: 0.5 / n_cells as f64,
            t_end: 1.0,
            stiffness: CoefficientField::constant(1.0),
            memory_coef: CoefficientField::constant(1.0),
            damping_coef: CoefficientField::constant(1.0),
            source_coef: CoefficientField::constant(0.01),
            p: 3.0,
            damping: DampingSpec::linear(1.0),
            kernel: Some(KernelSpec::shifted_exponential(0.1, 1.0)),
            initial_u: InitialData::Sine {
                amplitude: 1.0,
                mode: 1,
            },
            initial_v: InitialData::Zero,
            conv_strategy: ConvStrategy::Direct,
            record_stride: 1,
            gate_relax: 1.0,
        }
    }

    #[test]
    fn cfl_formula() {
        let mut c = basic(100);
        let r = c.cfl_check().unwrap();
        assert!((r.max_dt - 0.009).abs() < 1e-15 && r.pass);
        c.stiffness = CoefficientField::constant(4.0);
        c.dt = 0.005;
        let r = c.cfl_check().unwrap();
        assert!((r.max_dt - 0.0045).abs() < 1e-15);
        assert!(!r.pass);
    }

    #[test]
    fn json_round_trip_and_field_names() {
        let c = basic(32);
        let text = c.to_json();
        assert!(text.contains("\"A_field\"") && text.contains("\"k_field\""));
        assert_eq!(ProblemConfig::from_json(&text).unwrap(), c);
        let err =
            ProblemConfig::from_json("{\n  \"length\": 1.0,\n  \"n_cells\": \"x\"\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn assumption_violations_are_listed() {
        assert!(basic(32).assumption_violations().unwrap().is_empty());
        let mut c = basic(32);
        c.memory_coef = CoefficientField::constant(0.0);
        c.damping_coef = CoefficientField::constant(0.0);
        c.p = 2.0;
        let v = c.assumption_violations().unwrap();
        assert!(v.iter().any(|s| s.contains("a + b")));
        assert!(v.iter().any(|s| s.contains("p > 2")));
        let mut c = basic(32);
        c.memory_coef = CoefficientField::constant(40.0);
        assert!(c
            .assumption_violations()
            .unwrap()
            .iter()
            .any(|s| s.starts_with("kernel")));
    }

    #[test]
    fn sampled_fields_must_match_grid() {
        let mut c = basic(16);
        c.damping_coef = CoefficientField::Sampled {
            values: vec![1.0; 16],
        };
        assert!(matches!(c.discretize(), Err(Error::Config(_))));
        c.damping_coef = CoefficientField::Sampled {
            values: vec![1.0; 17],
        };
        assert!(c.discretize().is_ok());
    }

    #[test]
    fn prony_rejects_non_exponential_kernels() {
        let mut c = basic(16);
        c.conv_strategy = ConvStrategy::Prony;
        c.kernel = Some(KernelSpec::power_law(0.05, 2.0));
        assert!(matches!(c.discretize(), Err(Error::UnsupportedStrategy(_))));
    }
}
