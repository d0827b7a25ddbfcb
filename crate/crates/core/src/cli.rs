//! Command-line front end.
//!
//! ```text
//! ltvpass [--system FILE] [--storage FILE] [--interval a:b] [--grid N]
//!         [--tol-psd X] [--tol-rank X] [--tol-diss X] [--seed S]
//!         [--out-dir DIR] [--format json|csv] <simulate|audit|nsd|avstor|corpus>
//! ```
//!
//! `--system` and `--storage` accept a path or `corpus:NAME` for a shipped
//! corpus entry; with `--system corpus:NAME` the entry's storage candidate is
//! used unless `--storage` is given. The report goes to standard output in
//! the chosen format; `--out-dir` additionally receives the JSON report and
//! the plot-ready CSV files.
//!
//! Exit codes: 0 pass, 1 usage or parse error, 2 necessary condition
//! failed, 3 dissipation violated or available storage unbounded,
//! 4 inconclusive.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::avstor::{
    minimality_audit, polarization_recover, quadratic_identity_audit, AvstorEstimate, AvstorSampler, HorizonPolicy,
    IdentityAudit, MinimalityAudit, Polarization,
};
use crate::corpus;
use crate::loewner::StorageCandidate;
use crate::matfun::Expr;
use crate::nsd::{nsd_constant, nsd_flow, nsd_unitary, NsdResult};
use crate::odeflow::{solve_inhomogeneous, LtvSystem, PiecewiseConstantInput};
use crate::report::{to_json, MatrixJson};
use crate::storage::{
    adversarial_kernel_trial, dissipation_check, exit_code, pointwise_supply_check, storage_regularity_audit,
    AdversarialReport, DissipationReport, PointwiseSupplyReport, RegularityAudit, TrialSpec, Verdict, DEFAULT_SEED,
};
use crate::sysfile::{load_storage, load_system, vector, Scenario, StorageDefinition, SystemDefinition};
use crate::{CVec, Error, Interval, Result, TimeGrid, Tolerances, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "ltvpass", version, about = "Passivity analysis for linear time-varying systems")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// System file, or `corpus:NAME`.
    #[arg(long, global = true)]
    pub system: Option<String>,
    /// Storage candidate file, or `corpus:NAME`.
    #[arg(long, global = true)]
    pub storage: Option<String>,
    /// Working interval `a:b`, inside the system's interval.
    #[arg(long, global = true, value_parser = parse_interval, allow_hyphen_values = true)]
    pub interval: Option<Interval>,
    /// Number of uniform grid cells.
    #[arg(long, global = true, default_value_t = 200)]
    pub grid: usize,
    #[arg(long = "tol-psd", global = true)]
    pub tol_psd: Option<f64>,
    #[arg(long = "tol-rank", global = true)]
    pub tol_rank: Option<f64>,
    #[arg(long = "tol-diss", global = true)]
    pub tol_diss: Option<f64>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV with the supply integral.
    Simulate(SimulateArgs),
    /// Necessary-condition audit, dissipation trials and pointwise certificate.
    Audit(AuditArgs),
    /// Rank profile and null space decomposition of the storage candidate.
    Nsd(NsdArgs),
    /// Finite-horizon estimates of the available storage.
    Avstor(AvstorArgs),
    /// List the shipped corpus or export its files.
    Corpus(CorpusArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Initial state, comma separated (entries like `1`, `-0.5`, `2i`).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Constant input value, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub input: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long = "input-cells", default_value_t = 8)]
    pub input_cells: usize,
    /// Largest exponent `k` of the adversarial scan `λ = −10^k`.
    #[arg(long = "max-power", default_value_t = 12)]
    pub max_power: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NsdMethod {
    Constant,
    Flow,
    Unitary,
}

#[derive(Args, Debug)]
pub struct NsdArgs {
    /// Anchor of the fundamental solution.
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, value_enum, default_value_t = NsdMethod::Flow)]
    pub method: NsdMethod,
}

#[derive(Args, Debug)]
pub struct AvstorArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// Initial state to probe; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Vec<String>,
    #[arg(long = "initial-horizon", default_value_t = 1.0)]
    pub initial_horizon: f64,
    #[arg(long = "initial-cells", default_value_t = 16)]
    pub initial_cells: usize,
    #[arg(long = "max-horizon", default_value_t = 16.0)]
    pub max_horizon: f64,
    #[arg(long = "max-cells", default_value_t = 256)]
    pub max_cells: usize,
    #[arg(long = "eps-conv", default_value_t = 1e-3)]
    pub eps_conv: f64,
    /// Recover the matrix of the estimated quadratic form.
    #[arg(long)]
    pub polarize: bool,
    /// Number of random probes for the quadratic-identity audit (0 skips it).
    #[arg(long = "identity-probes", default_value_t = 0)]
    pub identity_probes: usize,
    #[arg(long = "identity-tol", default_value_t = 0.05)]
    pub identity_tol: f64,
    /// Number of probes for the comparison against `--storage` (0 skips it).
    #[arg(long = "minimality-probes", default_value_t = 0)]
    pub minimality_probes: usize,
    #[arg(long = "minimality-tol", default_value_t = 0.02)]
    pub minimality_tol: f64,
}

#[derive(Args, Debug)]
pub struct CorpusArgs {
    /// Write the corpus files into this directory.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

fn parse_interval(s: &str) -> std::result::Result<Interval, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `a:b`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("bad interval start `{a}`: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("bad interval end `{b}`: {e}"))?;
    Interval::new(a, b).map_err(|e| e.to_string())
}

/// Parses a comma separated list of constant expressions.
pub fn parse_vector(s: &str, dim: usize, what: &str) -> Result<CVec> {
    let items: Vec<C64> = s
        .split(',')
        .map(|p| Expr::parse(p.trim()).map(|e| e.eval(0.0)).map_err(Error::from))
        .collect::<Result<_>>()?;
    if items.len() != dim {
        return Err(Error::InvalidArgument(format!("{what} has {} entries, expected {dim}", items.len())));
    }
    Ok(CVec::from_vec(items))
}

/// Resolved inputs shared by the subcommands.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub system_source: String,
    pub storage_source: Option<String>,
    pub definition: SystemDefinition,
    pub storage: Option<StorageDefinition>,
    pub system: LtvSystem,
    pub q: Option<StorageCandidate>,
    pub interval: Interval,
    pub grid: TimeGrid,
    pub tolerances: Tolerances,
    pub seed: u64,
}

fn resolve_system(src: &str) -> Result<(SystemDefinition, Option<StorageDefinition>)> {
    match src.strip_prefix("corpus:") {
        Some(name) => {
            let e = corpus::entry(name)?;
            Ok((e.load_system()?, e.load_storage()?))
        }
        None => Ok((load_system(Path::new(src))?, None)),
    }
}

fn resolve_storage(src: &str) -> Result<StorageDefinition> {
    match src.strip_prefix("corpus:") {
        Some(name) => corpus::storage(name),
        None => load_storage(Path::new(src)),
    }
}

impl AnalysisConfig {
    pub fn from_args(g: &GlobalArgs) -> Result<Self> {
        let system_source = g
            .system
            .clone()
            .ok_or_else(|| Error::InvalidArgument("--system is required".into()))?;
        let (definition, corpus_storage) = resolve_system(&system_source)?;
        let (storage, storage_source) = match &g.storage {
            Some(s) => (Some(resolve_storage(s)?), Some(s.clone())),
            None => (corpus_storage, None),
        };
        let storage_source = storage_source.or_else(|| storage.as_ref().map(|_| format!("{system_source} (bundled)")));
        let full = definition.system.interval();
        let interval = g.interval.unwrap_or(full);
        if !full.contains_interval(&interval) {
            return Err(Error::InvalidArgument(format!(
                "--interval [{}, {}] is not inside the system interval [{}, {}]",
                interval.start, interval.end, full.start, full.end
            )));
        }
        let system = if interval == full { definition.system.clone() } else { definition.system.restrict(interval)? };
        let q = match &storage {
            Some(s) => {
                let pw = if interval == full { s.q.clone() } else { s.q.restrict(interval)? };
                Some(StorageCandidate::from_piecewise(pw)?)
            }
            None => None,
        };
        if g.grid == 0 {
            return Err(Error::InvalidArgument("--grid must be positive".into()));
        }
        let mut tolerances = Tolerances::default();
        if let Some(v) = g.tol_psd {
            tolerances.psd_rel = v;
        }
        if let Some(v) = g.tol_rank {
            tolerances.rank_rel = Some(v);
        }
        if let Some(v) = g.tol_diss {
            tolerances.diss_rel = v;
        }
        Ok(AnalysisConfig {
            system_source,
            storage_source,
            grid: TimeGrid::uniform(interval, g.grid),
            definition,
            storage,
            system,
            q,
            interval,
            tolerances,
            seed: g.seed,
        })
    }

    fn scenario(&self) -> &Scenario {
        &self.definition.scenario
    }

    fn require_q(&self) -> Result<&StorageCandidate> {
        self.q
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("a storage candidate is required (--storage)".into()))
    }

    fn t0(&self, flag: Option<f64>) -> Result<f64> {
        if let Some(t0) = flag {
            self.interval.check(t0)?;
            return Ok(t0);
        }
        Ok(self
            .scenario()
            .t0
            .filter(|&t| self.interval.contains(t))
            .unwrap_or(self.interval.start))
    }
}

/// Output of one subcommand.
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

fn write_outputs(dir: Option<&Path>, files: &[(&str, &str)]) -> Result<Vec<String>> {
    let Some(dir) = dir else {
        return Ok(Vec::new());
    };
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (name, text) in files {
        fs::write(dir.join(name), text)?;
        names.push(name.to_string());
    }
    Ok(names)
}

fn csv_string<F>(header: &[&str], fill: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[derive(Serialize)]
struct SimulateReport {
    command: &'static str,
    system: String,
    interval: Interval,
    t0: f64,
    x0: MatrixJson,
    input: MatrixJson,
    nodes: usize,
    final_state: MatrixJson,
    total_supply: f64,
    storage_start: Option<f64>,
    storage_end: Option<f64>,
    storage_nonincreasing: Option<bool>,
    files: Vec<String>,
}

fn as_column(v: &CVec) -> MatrixJson {
    MatrixJson::from(&crate::CMat::from_column_slice(v.len(), 1, v.as_slice()))
}

fn cmd_simulate(cfg: &AnalysisConfig, args: &SimulateArgs, g: &GlobalArgs) -> Result<Outcome> {
    let sys = &cfg.system;
    let t0 = cfg.t0(args.t0)?;
    let x0 = match (&args.x0, &cfg.scenario().x0) {
        (Some(s), _) => parse_vector(s, sys.n(), "--x0")?,
        (None, Some(v)) => vector(v),
        (None, None) => CVec::zeros(sys.n()),
    };
    let input = match (&args.input, &cfg.scenario().input) {
        (Some(s), _) => parse_vector(s, sys.m(), "--input")?,
        (None, Some(v)) => vector(v),
        (None, None) => CVec::zeros(sys.m()),
    };
    let span = Interval::new(t0, cfg.interval.end)?;
    let cells = g.grid.max(1);
    let u = PiecewiseConstantInput::uniform(span, vec![input.clone(); cells])?;
    let traj = solve_inhomogeneous(sys, t0, &x0, &u, span, &cfg.tolerances)?;
    let energy: Option<Vec<f64>> = match &cfg.q {
        Some(q) => Some(
            traj.grid
                .iter()
                .zip(&traj.x)
                .map(|(&t, x)| q.value(t, x))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let mut extra = Vec::new();
    if let Some(e) = &energy {
        extra.push(("storage", e.clone()));
    }
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, &extra)?;
    let csv_text = String::from_utf8(buf).expect("CSV output is UTF-8");
    let supply = traj.cumulative_supply();
    let mut report = SimulateReport {
        command: "simulate",
        system: cfg.system_source.clone(),
        interval: span,
        t0,
        x0: as_column(&x0),
        input: as_column(&input),
        nodes: traj.grid.len(),
        final_state: as_column(traj.x.last().expect("nonempty trajectory")),
        total_supply: *supply.last().unwrap_or(&0.0),
        storage_start: energy.as_ref().map(|e| e[0]),
        storage_end: energy.as_ref().map(|e| *e.last().unwrap()),
        storage_nonincreasing: energy.as_ref().map(|e| {
            e.windows(2)
                .all(|w| w[1] <= w[0] + cfg.tolerances.diss(w[0]))
        }),
        files: Vec::new(),
    };
    if g.out_dir.is_some() {
        report.files = vec!["simulate.json".into(), "trajectory.csv".into()];
    }
    let json = to_json(&report)?;
    write_outputs(g.out_dir.as_deref(), &[("simulate.json", &json), ("trajectory.csv", &csv_text)])?;
    Ok(Outcome {
        code: exit_code::PASS,
        stdout: if g.format == Format::Json { json } else { csv_text },
    })
}

#[derive(Serialize)]
struct AuditReport {
    command: &'static str,
    system: String,
    storage: Option<String>,
    seed: u64,
    verdict: String,
    exit_code: i32,
    regularity: RegularityAudit,
    #[serde(skip_serializing_if = "Option::is_none")]
    adversarial: Option<AdversarialReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dissipation: Option<DissipationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pointwise: Option<PointwiseSupplyReport>,
    tolerances: Tolerances,
}

fn cmd_audit(cfg: &AnalysisConfig, args: &AuditArgs, g: &GlobalArgs) -> Result<Outcome> {
    let q = cfg.require_q()?;
    let tol = &cfg.tolerances;
    let regularity = storage_regularity_audit(q, &cfg.system, &cfg.grid, tol)?;
    let mut report = AuditReport {
        command: "audit",
        system: cfg.system_source.clone(),
        storage: cfg.storage_source.clone(),
        seed: cfg.seed,
        verdict: String::new(),
        exit_code: exit_code::PASS,
        regularity,
        adversarial: None,
        dissipation: None,
        pointwise: None,
        tolerances: tol.clone(),
    };
    if !report.regularity.passed {
        report.exit_code = exit_code::NECESSARY_CONDITION_FAILED;
        report.verdict = format!(
            "necessary condition failed: {}",
            report.regularity.first_failure.clone().unwrap_or_default()
        );
        if let Some(w) = report.regularity.kernel.as_ref().and_then(|k| k.witnesses.first()) {
            report.adversarial = Some(adversarial_kernel_trial(&cfg.system, q, w, args.max_power, tol)?);
        }
    } else {
        let spec = TrialSpec {
            trials: args.trials,
            seed: cfg.seed,
            input_cells: args.input_cells,
            ..TrialSpec::default()
        };
        let diss = dissipation_check(&cfg.system, q, &spec, &cfg.grid, tol)?;
        let pw = pointwise_supply_check(&cfg.system, q, &cfg.grid, tol)?;
        (report.exit_code, report.verdict) = match (diss.verdict, pw.verdict) {
            (Verdict::Violated, _) => (exit_code::DISSIPATION_VIOLATED, "dissipation inequality violated".into()),
            (_, Verdict::Holds) => (exit_code::PASS, "storage function: pointwise certificate holds".into()),
            (Verdict::Inconclusive, _) => (exit_code::INCONCLUSIVE, "dissipation trials inconclusive".into()),
            _ => (
                exit_code::INCONCLUSIVE,
                "no violation found, but the sufficient pointwise certificate does not hold".into(),
            ),
        };
        report.dissipation = Some(diss);
        report.pointwise = Some(pw);
    }
    let json = to_json(&report)?;
    let trials_csv = csv_string(
        &["id", "t0", "t1", "lhs", "rhs", "slack", "tolerance", "crosses_breakpoint", "violated"],
        |w| {
            if let Some(d) = &report.dissipation {
                for r in &d.trials {
                    w.write_record([
                        r.id.to_string(),
                        r.t0.to_string(),
                        r.t1.to_string(),
                        r.lhs.to_string(),
                        r.rhs.to_string(),
                        r.slack.to_string(),
                        r.tolerance.to_string(),
                        r.crosses_breakpoint.to_string(),
                        r.violated.to_string(),
                    ])?;
                }
            }
            Ok(())
        },
    )?;
    write_outputs(g.out_dir.as_deref(), &[("audit.json", &json), ("trials.csv", &trials_csv)])?;
    Ok(Outcome {
        code: report.exit_code,
        stdout: if g.format == Format::Json { json } else { trials_csv },
    })
}

fn cmd_nsd(cfg: &AnalysisConfig, args: &NsdArgs, g: &GlobalArgs) -> Result<Outcome> {
    let q = cfg.require_q()?;
    let t0 = cfg.t0(args.t0)?;
    let tol = &cfg.tolerances;
    let result: NsdResult = match args.method {
        NsdMethod::Constant => nsd_constant(q, &cfg.grid, tol)?,
        NsdMethod::Flow => nsd_flow(&cfg.system.a, q, t0, &cfg.grid, tol)?,
        NsdMethod::Unitary => nsd_unitary(&cfg.system.a, q, t0, &cfg.grid, tol)?,
    };
    let manifest = match g.out_dir.as_deref() {
        Some(dir) => {
            result.export(dir)?;
            serde_json::from_str::<serde_json::Value>(&fs::read_to_string(dir.join("nsd.json"))?)?
        }
        None => serde_json::to_value(result.manifest())?,
    };
    let code = if result.is_valid() { exit_code::PASS } else { exit_code::NECESSARY_CONDITION_FAILED };
    let stdout = match g.format {
        Format::Json => to_json(&manifest)?,
        Format::Csv => csv_string(&["time", "left_rank", "point_rank", "right_rank", "at_breakpoint", "lo", "hi"], |w| {
            for d in &result.rank_profile.drops {
                w.write_record([
                    d.time.to_string(),
                    d.left_rank.to_string(),
                    d.point_rank.to_string(),
                    d.right_rank.to_string(),
                    d.at_breakpoint.to_string(),
                    d.bracket.0.to_string(),
                    d.bracket.1.to_string(),
                ])?;
            }
            Ok(())
        })?,
    };
    Ok(Outcome { code, stdout })
}

#[derive(Serialize)]
struct AvstorReport {
    command: &'static str,
    system: String,
    t0: f64,
    policy: HorizonPolicy,
    unbounded: bool,
    estimates: Vec<AvstorEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    polarization: Option<Polarization>,
    #[serde(skip_serializing_if = "Option::is_none")]
    identity_audit: Option<IdentityAudit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    minimality: Option<MinimalityAudit>,
}

fn cmd_avstor(cfg: &AnalysisConfig, args: &AvstorArgs, g: &GlobalArgs) -> Result<Outcome> {
    let sys = &cfg.system;
    let t0 = cfg.t0(args.t0)?;
    let n = sys.n();
    let probes: Vec<CVec> = if !args.x0.is_empty() {
        args.x0.iter().map(|s| parse_vector(s, n, "--x0")).collect::<Result<_>>()?
    } else if !cfg.scenario().probes.is_empty() {
        cfg.scenario().probes.iter().map(|p| vector(p)).collect()
    } else if let Some(x) = &cfg.scenario().x0 {
        vec![vector(x)]
    } else {
        let mut e = CVec::zeros(n);
        e[0] = C64::new(1.0, 0.0);
        vec![e]
    };
    let policy = HorizonPolicy {
        initial_horizon: args.initial_horizon,
        initial_cells: args.initial_cells,
        max_horizon: args.max_horizon,
        max_cells: args.max_cells,
        eps_conv: args.eps_conv,
    };
    let sampler = AvstorSampler::new(sys, t0, policy.clone(), cfg.tolerances.clone());
    let estimates: Vec<AvstorEstimate> = probes.iter().map(|x| sampler.estimate(x)).collect::<Result<_>>()?;
    let unbounded = estimates.iter().any(|e| e.unbounded);
    let mut report = AvstorReport {
        command: "avstor",
        system: cfg.system_source.clone(),
        t0,
        policy,
        unbounded,
        estimates,
        polarization: None,
        identity_audit: None,
        minimality: None,
    };
    if !unbounded {
        if args.polarize {
            let pol = polarization_recover(&sampler, args.identity_tol)?;
            let qa = MatrixJson::from(&pol.q);
            for e in &mut report.estimates {
                e.q_a = Some(qa.clone());
            }
            report.polarization = Some(pol);
        }
        if args.identity_probes > 0 {
            report.identity_audit = Some(quadratic_identity_audit(&sampler, args.identity_probes, args.identity_tol, cfg.seed)?);
        }
        if args.minimality_probes > 0 {
            let q = cfg.require_q()?;
            report.minimality = Some(minimality_audit(&sampler, t0, q, args.minimality_probes, args.minimality_tol, cfg.seed)?);
        }
    }
    let json = to_json(&report)?;
    let table = csv_string(
        &["probe", "stage", "action", "horizon", "cells", "value", "raw_value", "warm_started", "min_eig", "max_eig", "condition"],
        |w| {
            for (p, e) in report.estimates.iter().enumerate() {
                for (k, s) in e.stages.iter().enumerate() {
                    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    w.write_record([
                        p.to_string(),
                        k.to_string(),
                        format!("{:?}", s.action).to_lowercase(),
                        s.horizon.to_string(),
                        s.cells.to_string(),
                        opt(s.value),
                        opt(s.raw_value),
                        s.warm_started.to_string(),
                        s.min_eig.to_string(),
                        s.max_eig.to_string(),
                        s.condition.to_string(),
                    ])?;
                }
            }
            Ok(())
        },
    )?;
    write_outputs(g.out_dir.as_deref(), &[("avstor.json", &json), ("horizons.csv", &table)])?;
    let code = if unbounded { exit_code::DISSIPATION_VIOLATED } else { exit_code::PASS };
    Ok(Outcome {
        code,
        stdout: if g.format == Format::Json { json } else { table },
    })
}

#[derive(Serialize)]
struct CorpusListing {
    name: &'static str,
    system_file: &'static str,
    storage_file: Option<&'static str>,
}

fn cmd_corpus(args: &CorpusArgs, g: &GlobalArgs) -> Result<Outcome> {
    if let Some(dir) = &args.export {
        corpus::write_to(dir)?;
    }
    let list: Vec<CorpusListing> = corpus::ENTRIES
        .iter()
        .map(|e| CorpusListing {
            name: e.name,
            system_file: e.system_file,
            storage_file: e.storage_file,
        })
        .collect();
    let stdout = match g.format {
        Format::Json => to_json(&list)?,
        Format::Csv => csv_string(&["name", "system_file", "storage_file"], |w| {
            for e in &list {
                w.write_record([e.name, e.system_file, e.storage_file.unwrap_or("")])?;
            }
            Ok(())
        })?,
    };
    Ok(Outcome {
        code: exit_code::PASS,
        stdout,
    })
}

/// Dispatches a parsed command line.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    if let Command::Corpus(a) = &cli.command {
        return cmd_corpus(a, &cli.global);
    }
    let cfg = AnalysisConfig::from_args(&cli.global)?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&cfg, a, &cli.global),
        Command::Audit(a) => cmd_audit(&cfg, a, &cli.global),
        Command::Nsd(a) => cmd_nsd(&cfg, a, &cli.global),
        Command::Avstor(a) => cmd_avstor(&cfg, a, &cli.global),
        Command::Corpus(_) => unreachable!("handled above"),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit_code::ERROR } else { exit_code::PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.stdout.as_bytes());
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::NotStorage { .. } | Error::NonMonotoneRank { .. } | Error::ChainViolation { .. } | Error::NotAuc(_) => {
                    exit_code::NECESSARY_CONDITION_FAILED
                }
                _ => exit_code::ERROR,
            }
        }
    }
}

