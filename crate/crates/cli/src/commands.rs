use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use viscomem::decay::{self, DecayOptions};
use viscomem::energy::{
    self, JensenReport, LambdaMonitorReport, MonotonicityReport, MuCheckReport, PotentialWellReport,
};
use viscomem::kernel::{
    ConvexityData, ConvexityInequalityReport, ConvexityReport, Kernel, KernelAnalysis, KernelSpec,
    MonotoneCheck,
};
use viscomem::presets;
use viscomem::solver::{self, ProblemConfig};
use viscomem::trace_io::{read_trace_csv, write_trace_csv};
use viscomem::{DecayFitReport, EnergyTrace};

use crate::output::{check_target, Staged};
use crate::{FitArgs, KernelArgs, Overrides, ReproduceArgs, RunArgs, Status};

const SCHEMA_VERSION: u32 = 1;
const TAIL_TIMES: [f64; 8] = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
const DEFAULT_DELTAS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Describes how an output directory was produced.
#[derive(Debug, Serialize)]
struct RunManifest {
    schema_version: u32,
    tool_version: &'static str,
    command: &'static str,
    config_path: Option<PathBuf>,
    output_dir: PathBuf,
    preset: Option<String>,
    record_stride: Option<usize>,
    /// Runs are bit-reproducible; there is no seed.
    deterministic: bool,
    overrides: Option<Overrides>,
    /// Factor applied to the initial data so that the gate admits it.
    initial_data_scale: Option<f64>,
    files: Vec<&'static str>,
}

impl RunManifest {
    fn new(command: &'static str, output_dir: &Path) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config_path: None,
            output_dir: output_dir.to_path_buf(),
            preset: None,
            record_stride: None,
            deterministic: true,
            overrides: None,
            initial_data_scale: None,
            files: Vec::new(),
        }
    }
}

#[derive(Debug, Serialize)]
struct KernelReport {
    kernel: KernelSpec,
    lambda0: f64,
    a_sup: f64,
    ell: f64,
    #[serde(flatten)]
    analysis: KernelAnalysis,
    monotonicity: MonotoneCheck,
    convexity: Option<ConvexityData>,
    convexity_check: Option<ConvexityReport>,
    convexity_inequality: Option<ConvexityInequalityReport>,
}

impl KernelReport {
    fn build(spec: &KernelSpec, lambda0: f64, a_sup: f64, deltas: &[f64]) -> Result<KernelReport> {
        let kernel = Kernel::new(spec.clone())?;
        let analysis = kernel.analyze(deltas, &TAIL_TIMES)?;
        let convexity = kernel.canonical_convexity();
        let grid: Vec<f64> = (1..=400).map(|i| 0.25 * i as f64).collect();
        let convexity_inequality = match &convexity {
            Some(cx) => Some(cx.check_inequality(&kernel, &grid, 1e-10)?),
            None => None,
        };
        Ok(KernelReport {
            kernel: spec.clone(),
            lambda0,
            a_sup,
            ell: kernel.ell(a_sup, lambda0)?,
            analysis,
            monotonicity: kernel.validate_monotone(TAIL_TIMES[TAIL_TIMES.len() - 1], 400),
            convexity_check: convexity.as_ref().map(|cx| cx.validate()),
            convexity,
            convexity_inequality,
        })
    }

    fn summary(&self) -> String {
        let mut s = String::new();
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        let _ = writeln!(
            s,
            "kernel        {:?} alpha = {} beta = {}",
            self.kernel.family, self.kernel.alpha, self.kernel.beta
        );
        let _ = writeln!(s, "f(0)          {:.9e}", self.analysis.f0);
        let _ = writeln!(s, "mass          {:.9e}", self.analysis.total_mass);
        let _ = writeln!(
            s,
            "ell           {:.9e}  (lambda0 = {}, sup a = {})",
            self.ell, self.lambda0, self.a_sup
        );
        if self.ell <= 0.0 {
            let _ = writeln!(
                s,
                "warning       ell is not positive; the memory overwhelms the stiffness"
            );
        }
        for [d, m] in &self.analysis.m_table {
            let _ = writeln!(s, "M({d:e})  {m:.9e}  delta M = {:.6e}", d * m);
        }
        let _ = writeln!(s, "monotone      {}", verdict(self.monotonicity.pass));
        match (&self.convexity, &self.convexity_inequality) {
            (Some(cx), Some(ineq)) => {
                let _ = writeln!(s, "convex map    {:?}, xi = {:?}", cx.g, cx.xi);
                let _ = writeln!(
                    s,
                    "convexity     {} (max f' + xi G(f) = {:.3e})",
                    verdict(ineq.pass),
                    ineq.max_violation
                );
            }
            _ => {
                let _ = writeln!(s, "convexity     no closed-form map for this family");
            }
        }
        s
    }
}

/// Energy diagnostics of a finished run.
#[derive(Debug, Serialize)]
struct Diagnostics {
    monotonicity: MonotonicityReport,
    lambda_monitor: LambdaMonitorReport,
    potential_well: PotentialWellReport,
    mu_check: MuCheckReport,
    jensen: Option<JensenReport>,
    max_abs_residual: f64,
}

impl Diagnostics {
    fn of(trace: &EnergyTrace, kernel: Option<&KernelSpec>) -> Result<Diagnostics> {
        let jensen = match kernel {
            Some(spec) => Kernel::new(spec.clone())?
                .canonical_convexity()
                .map(|cx| energy::jensen_bound_check(trace, &cx, trace.q, 0.99)),
            None => None,
        };
        Ok(Diagnostics {
            monotonicity: energy::monotonicity_check(trace, 1e-6),
            lambda_monitor: energy::lambda_monitor(trace),
            potential_well: energy::potential_well_check(trace, 1e-6),
            mu_check: energy::mu_check(trace, 1e-6, 0.99),
            jensen,
            max_abs_residual: energy::max_abs_residual(trace),
        })
    }

    fn summary(&self) -> String {
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "monotone energy     {}  (max smoothed rise {:.3e})",
            verdict(self.monotonicity.pass),
            self.monotonicity.max_rise
        );
        let _ = writeln!(
            s,
            "Lambda < Lambda1    {}  (max ratio {:.4})",
            verdict(self.lambda_monitor.pass),
            self.lambda_monitor.max_ratio
        );
        let _ = writeln!(
            s,
            "potential well      {}",
            verdict(self.potential_well.pass)
        );
        let _ = writeln!(
            s,
            "mu <= -2 dE/dt      {}  ({:.2}% of samples)",
            verdict(self.mu_check.pass),
            100.0 * self.mu_check.fraction
        );
        if let Some(j) = &self.jensen {
            let _ = writeln!(
                s,
                "Jensen bound        {}  ({:.2}% of {} samples)",
                verdict(j.pass),
                100.0 * j.fraction,
                j.checked
            );
        }
        let _ = writeln!(s, "max |residual|      {:.3e}", self.max_abs_residual);
        s
    }
}

fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display()))
}

fn load_config(path: &Path) -> Result<ProblemConfig> {
    let text = read_text(path, "config file")?;
    ProblemConfig::from_json(&text).with_context(|| format!("in {}", path.display()))
}

/// Rejects a configuration the scheme cannot run, and unless forced one that
/// violates the standing assumptions.
fn validate(config: &ProblemConfig, force: bool) -> Result<()> {
    let violations = config.assumption_violations()?;
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("assumption violated: {v}");
        }
        if !force {
            bail!(
                "{} assumption(s) violated; pass --force to run anyway",
                violations.len()
            );
        }
    }
    let cfl = config.cfl_check()?;
    if !cfl.pass {
        bail!(
            "CFL check failed: dt = {} exceeds max dt = {} (0.9 h / sqrt(mu0) with h = {}, mu0 = {})",
            cfl.dt,
            cfl.max_dt,
            cfl.h,
            cfl.mu0
        );
    }
    Ok(())
}

fn write_trace(out: &Staged, trace: &EnergyTrace) -> Result<()> {
    let mut w = out.writer("trace.csv")?;
    write_trace_csv(&mut w, &trace.samples)?;
    use std::io::Write;
    w.flush()?;
    Ok(())
}

/// Writes everything a simulation produces; returns the file names.
fn write_run(
    out: &Staged,
    config: &ProblemConfig,
    trace: &EnergyTrace,
) -> Result<Vec<&'static str>> {
    out.write_json("config.json", config)?;
    write_trace(out, trace)?;
    out.write_json("gate.json", &trace.gate)?;
    let kernel_report = match &config.kernel {
        Some(spec) => {
            let disc = config.discretize()?;
            Some(KernelReport::build(
                spec,
                disc.lambda0(),
                disc.a_sup(),
                &DEFAULT_DELTAS,
            )?)
        }
        None => None,
    };
    out.write_json("kernel_analysis.json", &kernel_report)?;
    out.write_json(
        "diagnostics.json",
        &Diagnostics::of(trace, config.kernel.as_ref())?,
    )?;
    Ok(vec![
        "config.json",
        "trace.csv",
        "gate.json",
        "kernel_analysis.json",
        "diagnostics.json",
    ])
}

fn run_summary(trace: &EnergyTrace) -> String {
    let mut s = String::new();
    let g = &trace.gate;
    let _ = writeln!(
        s,
        "gate          {}{}",
        if g.verdict { "pass" } else { "fail" },
        if g.reasons.is_empty() {
            String::new()
        } else {
            format!(" ({})", g.reasons.join("; "))
        }
    );
    let _ = writeln!(s, "steps         {}", trace.steps_completed);
    if let (Some(first), Some(last)) = (trace.samples.first(), trace.samples.last()) {
        let _ = writeln!(
            s,
            "energy        E({:.4}) = {:.6e}  E({:.4}) = {:.6e}",
            first.t, first.energy, last.t, last.energy
        );
    }
    if let Some(b) = &trace.blow_up {
        let _ = writeln!(
            s,
            "BLOW-UP       at step {} (t = {}), max |u| = {:e}",
            b.t_index, b.t, b.max_abs_u
        );
    }
    s
}

pub fn run(args: &RunArgs) -> Result<Status> {
    let mut config = load_config(&args.config)?;
    args.overrides.apply(&mut config);
    validate(&config, args.force)?;
    check_target(&args.out)?;
    let trace = solver::run(&config)?;

    let out = Staged::new(&args.out)?;
    let mut manifest = RunManifest::new("run", &args.out);
    manifest.config_path = Some(args.config.clone());
    manifest.record_stride = Some(config.record_stride);
    manifest.overrides = Some(args.overrides.clone());
    manifest.files = write_run(&out, &config, &trace)?;
    manifest.files.insert(0, "manifest.json");
    out.write_json("manifest.json", &manifest)?;
    let dir = out.commit()?;

    print!("{}", run_summary(&trace));
    println!("output        {}", dir.display());
    Ok(if trace.blow_up.is_some() {
        Status::BlowUp
    } else {
        Status::Ok
    })
}

pub fn analyze_kernel(args: &KernelArgs) -> Result<Status> {
    let text = read_text(&args.config, "kernel file")?;
    let (spec, lambda0, a_sup) = match serde_json::from_str::<KernelSpec>(&text) {
        Ok(spec) => (spec, args.lambda0.unwrap_or(1.0), args.a_sup.unwrap_or(1.0)),
        Err(kernel_err) => {
            let config = ProblemConfig::from_json(&text).map_err(|_| {
                anyhow!(
                    "{} is neither a kernel specification ({kernel_err}) nor a problem configuration",
                    args.config.display()
                )
            })?;
            let spec = config
                .kernel
                .clone()
                .with_context(|| format!("{} has no kernel", args.config.display()))?;
            let disc = config.discretize()?;
            (
                spec,
                args.lambda0.unwrap_or(disc.lambda0()),
                args.a_sup.unwrap_or(disc.a_sup()),
            )
        }
    };
    check_target(&args.out)?;
    let report = KernelReport::build(&spec, lambda0, a_sup, &args.deltas)?;

    let out = Staged::new(&args.out)?;
    let mut manifest = RunManifest::new("analyze-kernel", &args.out);
    manifest.config_path = Some(args.config.clone());
    manifest.files = vec!["manifest.json", "config.json", "kernel_analysis.json"];
    out.write_json("manifest.json", &manifest)?;
    out.write_json("config.json", &spec)?;
    out.write_json("kernel_analysis.json", &report)?;
    let dir = out.commit()?;

    print!("{}", report.summary());
    println!("output        {}", dir.display());
    Ok(Status::Ok)
}

pub fn fit(args: &FitArgs) -> Result<Status> {
    let file = fs::File::open(&args.trace)
        .with_context(|| format!("cannot read trace {}", args.trace.display()))?;
    let samples = read_trace_csv(file).with_context(|| format!("in {}", args.trace.display()))?;
    let mut options = match &args.config {
        Some(path) => presets::decay_options(load_config(path)?.kernel.as_ref(), args.q)?,
        None => DecayOptions::new(args.q),
    };
    options.tail_fraction = args.tail_fraction;
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let e: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    check_target(&args.out)?;
    let report = decay::analyze(&t, &e, &options)?;

    let out = Staged::new(&args.out)?;
    let mut manifest = RunManifest::new("fit", &args.out);
    manifest.config_path = args.config.clone();
    manifest.files = vec!["manifest.json", "config.json", "decay_report.json"];
    out.write_json("manifest.json", &manifest)?;
    out.write_json("config.json", &options)?;
    out.write_json("decay_report.json", &report)?;
    let dir = out.commit()?;

    print!("{}", report.summary());
    println!("output        {}", dir.display());
    Ok(Status::Ok)
}

struct Reproduction {
    text: String,
    status: Status,
}

fn reproduce_one(id: u8, out_dir: &Path, overrides: &Overrides) -> Result<Reproduction> {
    let preset = presets::preset(id, overrides.q)?;
    let mut config = preset.config;
    overrides.apply(&mut config);
    validate(&config, false)?;
    check_target(out_dir)?;
    let (scale, _) = presets::gate_initial_data(&mut config)?;
    let trace = solver::run(&config)?;
    let mut text = format!("example {id}: {}, q = {}\n", preset.name, config.damping.q);
    let _ = writeln!(text, "initial scale {scale}");
    text.push_str(&run_summary(&trace));

    let out = Staged::new(out_dir)?;
    let mut manifest = RunManifest::new("reproduce", out_dir);
    manifest.preset = Some(format!("example-{id}"));
    manifest.record_stride = Some(config.record_stride);
    manifest.overrides = Some(overrides.clone());
    manifest.initial_data_scale = Some(scale);
    manifest.files = write_run(&out, &config, &trace)?;
    manifest.files.insert(0, "manifest.json");

    let status = if trace.blow_up.is_some() {
        Status::BlowUp
    } else {
        let options = presets::decay_options(config.kernel.as_ref(), config.damping.q)?;
        let report: DecayFitReport = decay::analyze(&trace.times(), &trace.energies(), &options)?;
        out.write_json("decay_report.json", &report)?;
        manifest.files.push("decay_report.json");
        text.push_str(&Diagnostics::of(&trace, config.kernel.as_ref())?.summary());
        text.push_str(&report.summary());
        if report.all_envelopes_pass() {
            Status::Ok
        } else {
            Status::ChecksFailed
        }
    };
    out.write_json("manifest.json", &manifest)?;
    let dir = out.commit()?;
    let _ = writeln!(
        text,
        "verdict       {}",
        match status {
            Status::Ok => "all envelope checks pass",
            Status::ChecksFailed => "an envelope check FAILED",
            Status::BlowUp => "the run blew up",
        }
    );
    let _ = writeln!(text, "output        {}", dir.display());
    Ok(Reproduction { text, status })
}

pub fn reproduce(args: &ReproduceArgs) -> Result<Status> {
    if !args.sweep {
        let [id] = args.ids[..] else {
            bail!("reproduce takes one example id (1, 2 or 3); use --sweep for several");
        };
        let r = reproduce_one(id, &args.out, &args.overrides)?;
        print!("{}", r.text);
        return Ok(r.status);
    }
    let ids = if args.ids.is_empty() {
        vec![1, 2, 3]
    } else {
        args.ids.clone()
    };
    check_target(&args.out)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let results: Vec<(u8, Result<Reproduction>)> = thread::scope(|scope| {
        let handles: Vec<_> = ids
            .iter()
            .map(|&id| {
                let dir = args.out.join(format!("example-{id}"));
                let overrides = &args.overrides;
                (id, scope.spawn(move || reproduce_one(id, &dir, overrides)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(id, h)| {
                (
                    id,
                    h.join().unwrap_or_else(|_| Err(anyhow!("worker panicked"))),
                )
            })
            .collect()
    });
    let mut worst = Status::Ok;
    let mut failed = false;
    for (id, r) in results {
        match r {
            Ok(r) => {
                println!("{}", r.text);
                worst = worst.max(r.status);
            }
            Err(e) => {
                eprintln!("error: example {id}: {e:#}");
                failed = true;
            }
        }
    }
    if failed {
        bail!("at least one example failed to run");
    }
    Ok(worst)
}
