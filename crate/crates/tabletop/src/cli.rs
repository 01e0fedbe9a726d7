//! Command-line front end.
//!
//! Exit codes: 0 reversible (or residuals within tolerance), 1 not
//! reversible, 2 undetermined, 3 prior lost rank along a trajectory,
//! 64 usage or schema error, 65 invalid input values, 66 unreadable file,
//! 74 output error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channelcore::{Dilation, NumericPolicy};
use crate::collision::{sample_steps, sequential_reverse_steps, CollisionSpec, SequentialRun, StepSampler, XiPrimePolicy};
use crate::error::{Error, Result};
use crate::examples::{self, ExampleInstance, NamedExample};
use crate::feasibility::Verdict;
use crate::matrixkit::{identity, kron, serde_cmat, ComplexMatrix, HermMatrix};
use crate::petz_ttr::{bayes_residual, check_exact, product_preservation_check, ExactTTRReport, TTRInstance};
use crate::ttr_approx::{approx_report, log_grid, loglog_fit, ApproxReport, HamiltonianDilation, ScalingFit, FLOOR_MISMATCH};

/// Environment variable naming a JSON policy file used as the default.
pub const POLICY_ENV: &str = "TABLETOP_POLICY";

pub const EXIT_TTR: i32 = 0;
pub const EXIT_NOT_TTR: i32 = 1;
pub const EXIT_UNDETERMINED: i32 = 2;
pub const EXIT_RANK_LOSS: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(name = "tabletop", version, about = "Petz recovery and tabletop time-reversal checks")]
pub struct Cli {
    /// JSON file with numeric tolerances (overrides $TABLETOP_POLICY).
    #[arg(long, global = true)]
    pub policy: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact reversibility: compare maps, or search for a reverse ancilla.
    CheckExact {
        spec: PathBuf,
        /// Equality tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Evolution time for Hamiltonian specs.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Short-time conditions and mismatch scaling for Hamiltonian specs.
    Approx {
        spec: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        order: u8,
        #[arg(long, default_value_t = 1e-3)]
        dt_min: f64,
        #[arg(long, default_value_t = 1e-1)]
        dt_max: f64,
        #[arg(long, default_value_t = 12)]
        points: usize,
        /// CSV with columns dt, mismatch.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sequential reversal of a collision model.
    Collision {
        spec: PathBuf,
        /// Total evolution time.
        #[arg(long = "T", default_value_t = 1.0)]
        t_total: f64,
        /// Step count, or a comma-separated sweep.
        #[arg(long = "N", value_delimiter = ',', default_value = "16")]
        n_steps: Vec<usize>,
        #[arg(long, value_enum, default_value_t = XiPolicyArg::Constant)]
        xi_policy: XiPolicyArg,
        #[arg(long, value_enum, default_value_t = SamplerArg::Fixed)]
        sampler: SamplerArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV with columns step, dt, per_step_gap, cumulative_gap, min_eig_prior.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print a built-in example, or its spec file with --emit-spec.
    Example {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(examples::NAMES))]
        name: String,
        #[arg(long)]
        emit_spec: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum XiPolicyArg {
    Constant,
    Solve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Fixed,
    Exponential,
}

/// Complex matrix as nested rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat(#[serde(with = "serde_cmat")] pub ComplexMatrix);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_tot: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_s: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_e: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_i: Option<Mat>,
    #[serde(default = "unit_coupling")]
    pub g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_rate: Option<f64>,
}

fn unit_coupling() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub dim_s: usize,
    pub dim_e: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSection>,
    pub xi: Mat,
    pub gamma: Mat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_prime: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<NumericPolicy>,
}

fn herm(name: &str, m: &Mat, dim: usize) -> Result<HermMatrix> {
    if m.0.nrows() != dim || m.0.ncols() != dim {
        return Err(Error::Domain(format!("{name} must be {dim}x{dim}, got {}x{}", m.0.nrows(), m.0.ncols())));
    }
    HermMatrix::new(m.0.clone()).map_err(|e| Error::Domain(format!("{name}: {e}")))
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SpecFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        match (&spec.unitary, &spec.hamiltonian) {
            (Some(_), Some(_)) => return Err(Error::Schema("give exactly one of `unitary` and `hamiltonian`, not both".into())),
            (None, None) => return Err(Error::Schema("one of `unitary` or `hamiltonian` is required".into())),
            _ => {}
        }
        if let Some(h) = &spec.hamiltonian {
            let split = [&h.h_s, &h.h_e, &h.h_i].iter().filter(|x| x.is_some()).count();
            match (h.h_tot.is_some(), split) {
                (true, 0) | (false, 3) => {}
                (true, _) => return Err(Error::Schema("hamiltonian: give `h_tot` or the split `h_s`, `h_e`, `h_i`, not both".into())),
                (false, _) => return Err(Error::Schema("hamiltonian: the split form needs all of `h_s`, `h_e`, `h_i`".into())),
            }
        }
        if spec.dim_s == 0 || spec.dim_e == 0 {
            return Err(Error::Schema("dimensions must be positive".into()));
        }
        Ok(spec)
    }

    pub fn xi(&self) -> Result<HermMatrix> {
        herm("xi", &self.xi, self.dim_e)
    }

    pub fn gamma(&self) -> Result<HermMatrix> {
        herm("gamma", &self.gamma, self.dim_s)
    }

    pub fn xi_prime(&self) -> Result<Option<HermMatrix>> {
        self.xi_prime.as_ref().map(|m| herm("xi_prime", m, self.dim_e)).transpose()
    }

    fn section(&self) -> Result<&HamiltonianSection> {
        self.hamiltonian
            .as_ref()
            .ok_or_else(|| Error::Domain("this command needs a `hamiltonian` section".into()))
    }

    pub fn h_tot(&self) -> Result<HermMatrix> {
        let h = self.section()?;
        let d = self.dim_s * self.dim_e;
        match &h.h_tot {
            Some(m) => herm("h_tot", m, d),
            None => {
                let hs = herm("h_s", h.h_s.as_ref().expect("validated"), self.dim_s)?;
                let he = herm("h_e", h.h_e.as_ref().expect("validated"), self.dim_e)?;
                let hi = herm("h_i", h.h_i.as_ref().expect("validated"), d)?;
                Ok(HermMatrix::symmetrized(
                    kron(&hs, &identity(self.dim_e)) + kron(&identity(self.dim_s), &he) + hi.as_matrix(),
                ))
            }
        }
    }

    pub fn hamiltonian_dilation(&self) -> Result<HamiltonianDilation> {
        HamiltonianDilation::new(self.dim_s, self.dim_e, self.h_tot()?, self.xi()?, self.section()?.g)
    }

    pub fn collision_spec(&self) -> Result<CollisionSpec> {
        let h = self.section()?;
        let (Some(hs), Some(he), Some(hi)) = (&h.h_s, &h.h_e, &h.h_i) else {
            return Err(Error::Domain("collision needs the split `h_s`, `h_e`, `h_i` form".into()));
        };
        let rate = h
            .gamma_rate
            .ok_or_else(|| Error::Domain("collision needs `hamiltonian.gamma_rate`".into()))?;
        CollisionSpec::new(
            self.dim_s,
            self.dim_e,
            herm("h_s", hs, self.dim_s)?,
            herm("h_e", he, self.dim_e)?,
            herm("h_i", hi, self.dim_s * self.dim_e)?,
            self.xi()?,
            h.g,
            rate,
        )
    }

    pub fn dilation(&self, dt: Option<f64>) -> Result<Dilation> {
        match &self.unitary {
            Some(u) => {
                let d = self.dim_s * self.dim_e;
                if u.0.nrows() != d || u.0.ncols() != d {
                    return Err(Error::Domain(format!("unitary must be {d}x{d}")));
                }
                Dilation::new(self.dim_s, self.dim_e, u.0.clone(), self.xi()?)
            }
            None => {
                let dt = dt
                    .or(self.dt)
                    .ok_or_else(|| Error::Domain("a hamiltonian spec needs `dt` (in the file or via --dt)".into()))?;
                self.hamiltonian_dilation()?.dilation(dt)
            }
        }
    }

    /// Spec file reproducing a built-in example.
    pub fn from_example(ex: &NamedExample) -> SpecFile {
        let xi_prime = ex.expected.xi_prime.as_ref().map(|m| Mat(m.as_matrix().clone()));
        match &ex.instance {
            ExampleInstance::Exact(inst) => SpecFile {
                dim_s: inst.dilation.dim_s,
                dim_e: inst.dilation.dim_e,
                unitary: Some(Mat(inst.dilation.u.clone())),
                hamiltonian: None,
                xi: Mat(inst.dilation.xi.as_matrix().clone()),
                gamma: Mat(inst.gamma.as_matrix().clone()),
                xi_prime,
                dt: None,
                policy: None,
            },
            ExampleInstance::Hamiltonian { dilation, gamma } => SpecFile {
                dim_s: dilation.dim_s,
                dim_e: dilation.dim_e,
                unitary: None,
                hamiltonian: Some(HamiltonianSection {
                    h_tot: Some(Mat(dilation.h_tot.as_matrix().clone())),
                    h_s: None,
                    h_e: None,
                    h_i: None,
                    g: dilation.g,
                    gamma_rate: None,
                }),
                xi: Mat(dilation.xi.as_matrix().clone()),
                gamma: Mat(gamma.as_matrix().clone()),
                xi_prime,
                dt: None,
                policy: None,
            },
            ExampleInstance::Collision { spec, gamma0 } => SpecFile {
                dim_s: spec.dim_s,
                dim_e: spec.dim_e,
                unitary: None,
                hamiltonian: Some(HamiltonianSection {
                    h_tot: None,
                    h_s: Some(Mat(spec.h_s.as_matrix().clone())),
                    h_e: Some(Mat(spec.h_e.as_matrix().clone())),
                    h_i: Some(Mat(spec.h_i.as_matrix().clone())),
                    g: spec.g,
                    gamma_rate: Some(spec.gamma_rate),
                }),
                xi: Mat(spec.xi.as_matrix().clone()),
                gamma: Mat(gamma0.as_matrix().clone()),
                xi_prime,
                dt: None,
                policy: None,
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a [String],
    policy: NumericPolicy,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<&'a SpecFile>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
    result: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ExactResult {
    verdict: Verdict,
    exact: ExactTTRReport,
    product_preservation: bool,
    product_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bayes_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ApproxResult {
    within_tolerance: bool,
    #[serde(flatten)]
    report: ApproxReport,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SweepFit {
    Fitted(ScalingFit),
    Floor { max_total_gap: f64 },
}

#[derive(Debug, Serialize)]
struct CollisionResult {
    t_total: f64,
    xi_policy: XiPolicyArg,
    sampler: &'static str,
    seed: u64,
    runs: Vec<SequentialRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_fit: Option<SweepFit>,
}

#[derive(Debug, Serialize)]
struct ExampleSummary {
    name: String,
    expected_xi_prime: Option<HermMatrix>,
    expected_ttr: Option<bool>,
    expected_product_preserving: Option<bool>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Schema(_) => EXIT_USAGE,
            Error::RankLoss { .. } => EXIT_RANK_LOSS,
            _ => EXIT_DATA,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_fail(code: i32, path: &Path, e: std::io::Error) -> Failure {
    Failure { code, message: format!("{}: {e}", path.display()) }
}

fn read_spec(path: &Path) -> std::result::Result<SpecFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_fail(EXIT_NO_INPUT, path, e))?;
    SpecFile::parse(&text).map_err(|e| Failure { code: EXIT_USAGE, message: format!("{}: {e}", path.display()) })
}

fn read_policy(path: &Path) -> std::result::Result<NumericPolicy, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_fail(EXIT_NO_INPUT, path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure { code: EXIT_USAGE, message: format!("{}: schema error: {e}", path.display()) })
}

/// Defaults, then $TABLETOP_POLICY, then --policy, then the spec's own block.
fn resolve_policy(flag: Option<&Path>, spec: Option<&SpecFile>) -> std::result::Result<NumericPolicy, Failure> {
    let mut pol = match flag {
        Some(p) => read_policy(p)?,
        None => match std::env::var_os(POLICY_ENV) {
            Some(p) if !p.is_empty() => read_policy(Path::new(&p))?,
            _ => NumericPolicy::default(),
        },
    };
    if let Some(p) = spec.and_then(|s| s.policy) {
        pol = p;
    }
    pol.validate()?;
    Ok(pol)
}

fn write_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_fail(EXIT_IO, path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn collision_csv(runs: &[SequentialRun], sweep: bool) -> String {
    let mut s = String::new();
    if sweep {
        s.push_str("n_steps,");
    }
    s.push_str("step,dt,per_step_gap,cumulative_gap,min_eig_prior\n");
    for run in runs {
        for i in 0..run.n_steps {
            if sweep {
                s.push_str(&format!("{},", run.n_steps));
            }
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                run.dts[i],
                run.per_step_gaps[i],
                run.cumulative_gaps[i],
                run.min_eig_prior[i]
            ));
        }
    }
    s
}

struct Output {
    report: String,
    code: i32,
    diagnostics: Vec<String>,
}

fn execute(cli: &Cli, argv: &[String]) -> std::result::Result<Output, Failure> {
    let started = Instant::now();
    let timing = |t: Instant| if cli.timing { Some(t.elapsed().as_secs_f64()) } else { None };
    match &cli.command {
        Command::CheckExact { spec: path, tol, dt } => {
            let spec = read_spec(path)?;
            let mut pol = resolve_policy(cli.policy.as_deref(), Some(&spec))?;
            if let Some(t) = tol {
                pol.equality_tol = *t;
                pol.validate()?;
            }
            let dil = spec.dilation(*dt)?;
            let inst = TTRInstance::new(dil, spec.gamma()?, spec.xi_prime()?, pol)?;
            let exact = check_exact(&inst)?;
            let pp = product_preservation_check(&inst.dilation, &inst.gamma, &pol)?;
            let bayes = match &exact.witness_xi_prime {
                Some(w) => Some(bayes_residual(&inst.with_xi_prime(w.clone())?)?),
                None => None,
            };
            let verdict = exact.feasible;
            let code = match verdict {
                Verdict::Feasible => EXIT_TTR,
                Verdict::Infeasible => EXIT_NOT_TTR,
                Verdict::Undetermined => EXIT_UNDETERMINED,
            };
            let result = ExactResult {
                verdict,
                exact,
                product_preservation: pp.preserved,
                product_residual: pp.residual,
                bayes_residual: bayes,
            };
            let report = Report { tool: "tabletop", version: env!("CARGO_PKG_VERSION"), command: argv, policy: pol, spec: Some(&spec), warnings: vec![], result, wall_time_s: timing(started) };
            Ok(Output { report: to_json(&report), code, diagnostics: vec![] })
        }
        Command::Approx { spec: path, order, dt_min, dt_max, points, csv } => {
            let spec = read_spec(path)?;
            let pol = resolve_policy(cli.policy.as_deref(), Some(&spec))?;
            if *points < 6 {
                return Err(Error::Fit(format!("slope fits need at least 6 grid points, got {points}")).into());
            }
            let hd = spec.hamiltonian_dilation()?;
            let gamma = spec.gamma()?;
            gamma.validate_density("gamma", 1e-10, pol.rank_tol)?;
            let xi_prime = spec.xi_prime()?.unwrap_or_else(|| hd.xi.clone());
            let grid = log_grid(*dt_min, *dt_max, *points)?;
            let rep = approx_report(&hd, &gamma, &xi_prime, *order, &grid, &pol)?;
            let ok = rep.residual_terms.iter().all(|r| r.value <= pol.equality_tol);
            if let Some(p) = csv {
                let mut s = String::from("dt,mismatch\n");
                for (dt, m) in rep.dt_grid.iter().zip(&rep.mismatches) {
                    s.push_str(&format!("{dt},{m}\n"));
                }
                write_file(p, &s)?;
            }
            let report = Report {
                tool: "tabletop",
                version: env!("CARGO_PKG_VERSION"),
                command: argv,
                policy: pol,
                spec: Some(&spec),
                warnings: vec![],
                result: ApproxResult { within_tolerance: ok, report: rep },
                wall_time_s: timing(started),
            };
            Ok(Output { report: to_json(&report), code: if ok { EXIT_TTR } else { EXIT_NOT_TTR }, diagnostics: vec![] })
        }
        Command::Collision { spec: path, t_total, n_steps, xi_policy, sampler, seed, csv } => {
            let spec = read_spec(path)?;
            let pol = resolve_policy(cli.policy.as_deref(), Some(&spec))?;
            let cs = spec.collision_spec()?;
            let gamma0 = spec.gamma()?;
            gamma0.validate_density("gamma", 1e-10, pol.rank_tol)?;
            if n_steps.is_empty() || n_steps.contains(&0) {
                return Err(Error::Domain("--N values must be positive".into()).into());
            }
            let policy = match xi_policy {
                XiPolicyArg::Constant => XiPrimePolicy::Constant(spec.xi_prime()?.unwrap_or_else(|| cs.xi.clone())),
                XiPolicyArg::Solve => XiPrimePolicy::SolvePerStep,
            };
            let smp = match sampler {
                SamplerArg::Fixed => StepSampler::Fixed,
                SamplerArg::Exponential => StepSampler::Exponential,
            };
            let runs: Vec<SequentialRun> = n_steps
                .par_iter()
                .map(|&n| {
                    let mut rng = crate::random::rng(*seed);
                    let dts = sample_steps(smp, *t_total, n, &mut rng)?;
                    sequential_reverse_steps(&cs, &gamma0, &policy, &dts, &pol)
                })
                .collect::<Result<Vec<_>>>()?;
            let sweep = n_steps.len() > 1;
            let sweep_fit = if sweep {
                let top = runs.iter().map(|r| r.total_gap).fold(0.0, f64::max);
                if top <= FLOOR_MISMATCH {
                    Some(SweepFit::Floor { max_total_gap: top })
                } else {
                    let pts: Vec<(f64, f64)> = runs.iter().map(|r| (r.n_steps as f64, r.total_gap)).collect();
                    loglog_fit(&pts, 3).ok().map(SweepFit::Fitted)
                }
            } else {
                None
            };
            if let Some(p) = csv {
                write_file(p, &collision_csv(&runs, sweep))?;
            }
            let warnings = cs.warnings();
            let report = Report {
                tool: "tabletop",
                version: env!("CARGO_PKG_VERSION"),
                command: argv,
                policy: pol,
                spec: Some(&spec),
                warnings: warnings.clone(),
                result: CollisionResult {
                    t_total: *t_total,
                    xi_policy: *xi_policy,
                    sampler: match smp {
                        StepSampler::Fixed => "fixed",
                        StepSampler::Exponential => "exponential",
                    },
                    seed: *seed,
                    runs,
                    sweep_fit,
                },
                wall_time_s: timing(started),
            };
            Ok(Output { report: to_json(&report), code: EXIT_TTR, diagnostics: warnings })
        }
        Command::Example { name, emit_spec } => {
            let ex = examples::by_name(name)?;
            let report = if *emit_spec {
                to_json(&SpecFile::from_example(&ex))
            } else {
                to_json(&ExampleSummary {
                    name: ex.name.clone(),
                    expected_xi_prime: ex.expected.xi_prime.clone(),
                    expected_ttr: ex.expected.ttr,
                    expected_product_preserving: ex.expected.product_preserving,
                })
            };
            Ok(Output { report, code: EXIT_TTR, diagnostics: vec![] })
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, &argv) {
        Ok(out) => {
            for d in &out.diagnostics {
                let _ = writeln!(stderr, "warning: {d}");
            }
            let written = match &cli.out {
                Some(p) => write_file(p, &out.report),
                None => stdout.write_all(out.report.as_bytes()).map_err(|e| Failure { code: EXIT_IO, message: e.to_string() }),
            };
            match written {
                Ok(()) => out.code,
                Err(f) => {
                    let _ = writeln!(stderr, "error: {}", f.message);
                    f.code
                }
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
