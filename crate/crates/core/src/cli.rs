//! Command-line front end: `simulate`, `select`, `bench` and `oracle`.
//!
//! Every command writes its files through a temporary file in the output
//! directory followed by a rename, so an interrupted run never leaves a
//! truncated output behind. Exit codes: 0 success, 2 input error,
//! 3 equilibrium diagnostic failed (outputs still written), 4 numerical
//! failure on the final estimate.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{jackknife_se_for, g0_common_location, EstimatorConfig, InnerMatrix, JackknifeObjective, Penalty, PenaltyScale, Pilot};
use crate::harness::{
    brute_force_optimum, location_oracle_mask, location_structural_optimum, run_figure1, run_table1, run_table3,
    Experiment, ExperimentPlan, MAX_ENUMERATION,
};
use crate::mask::ComponentMask;
use crate::model::{
    simulate_common_location, simulate_exchangeable, simulate_ordinal, thresholds_from_controls, CommonLocation,
    CommonLocationSpec, Dataset, ExchangeablePairs, ExchangeableSpec, OrdinalProbit, OrdinalProbitSpec,
    SubLikelihoodFamily,
};
use crate::rng::{stream, Stream};
use crate::sampler::{
    control_chart, run_chain, selection_report, CacheStats, ControlChart, FrequencyWindow, SamplerConfig,
    SelectedModel, SelectionReport,
};
use crate::stability::{lambda_preset, stability_select, StabilityConfig, StabilityReport};

/// Version of the `report.json` layout written by `select`.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DIAGNOSTIC: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "clsel", version, about = "Sub-likelihood selection for composite likelihood estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset and write data.csv with its manifest.
    Simulate(SimulateArgs),
    /// Run CLS1 or CLS2 on a dataset and write report.json and trace.csv.
    Select(SelectArgs),
    /// Run a Monte Carlo plan and write summary.csv, meta.json and timing.json.
    Bench(BenchArgs),
    /// Exact objectives for the common-location model.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CommonLocation,
    Exchangeable,
    Ordinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Cls1,
    Cls2,
}

/// Parses a kebab-case value through the type's serde representation.
fn kebab<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn gamma_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `g1,g2`, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flat TOML spec with keys model, n, d, d_star, rho, mu, theta, gamma, case_fraction, seed.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub d_star: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Threshold pair `g1,g2` shared by every ordinal variable.
    #[arg(long, value_parser = gamma_pair, allow_hyphen_values = true)]
    pub gamma: Option<(f64, f64)>,
    #[arg(long)]
    pub case_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Keys accepted in a simulation spec file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSpecFile {
    model: Option<ModelKind>,
    n: Option<usize>,
    d: Option<usize>,
    d_star: Option<usize>,
    rho: Option<f64>,
    mu: Option<f64>,
    theta: Option<f64>,
    gamma: Option<Vec<(f64, f64)>>,
    case_fraction: Option<f64>,
    seed: Option<u64>,
}

/// Simulation settings with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedSimulation {
    pub model: ModelKind,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_star: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case_fraction: Option<f64>,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidConfig(format!("missing required key `{key}`")))
}

impl SimulateArgs {
    fn resolve(&self) -> Result<ResolvedSimulation> {
        let file: SimSpecFile = match &self.spec {
            Some(p) => toml::from_str(&std::fs::read_to_string(p)?)
                .map_err(|e| Error::InvalidConfig(format!("spec {}: {e}", p.display())))?,
            None => SimSpecFile::default(),
        };
        let model = required(self.model.or(file.model), "model")?;
        let n = required(self.n.or(file.n), "n")?;
        let d = required(self.d.or(file.d), "d")?;
        let seed = self.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let rho = self.rho.or(file.rho).unwrap_or(0.0);
        if n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        let mut r = ResolvedSimulation {
            model,
            n,
            d,
            seed,
            rho,
            d_star: None,
            mu: None,
            theta: None,
            gamma: None,
            case_fraction: None,
        };
        match model {
            ModelKind::CommonLocation => {
                r.d_star = Some(self.d_star.or(file.d_star).unwrap_or((0.8 * d as f64).round() as usize));
                r.mu = Some(self.mu.or(file.mu).unwrap_or(0.0));
            }
            ModelKind::Exchangeable => {}
            ModelKind::Ordinal => {
                r.theta = Some(self.theta.or(file.theta).unwrap_or(0.0));
                let gamma = match (self.gamma, file.gamma) {
                    (Some(g), _) => vec![g; d],
                    (None, Some(gs)) if gs.len() == 1 => vec![gs[0]; d],
                    (None, Some(gs)) => gs,
                    (None, None) => vec![(-0.5, 0.5); d],
                };
                r.gamma = Some(gamma);
                r.case_fraction = Some(self.case_fraction.or(file.case_fraction).unwrap_or(0.2));
            }
        }
        Ok(r)
    }
}

/// Exchangeable latent correlation used by the ordinal simulator.
fn exchangeable_matrix(d: usize, rho: f64) -> Result<DMatrix<f64>> {
    let lower = if d >= 2 { -1.0 / (d as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(rho.is_finite() && rho > lower && rho < 1.0) {
        return Err(Error::domain("rho", rho, format!("({lower}, 1)")));
    }
    Ok(DMatrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { rho }))
}

pub fn simulate(r: &ResolvedSimulation) -> Result<Dataset> {
    match r.model {
        ModelKind::CommonLocation => {
            let spec = CommonLocationSpec::new(r.d, r.d_star.unwrap_or(0), r.rho, r.mu.unwrap_or(0.0))?;
            simulate_common_location(&spec, r.n, r.seed)
        }
        ModelKind::Exchangeable => simulate_exchangeable(&ExchangeableSpec::new(r.d, r.rho)?, r.n, r.seed),
        ModelKind::Ordinal => {
            let spec = OrdinalProbitSpec {
                d: r.d,
                theta: r.theta.unwrap_or(0.0),
                thresholds: r.gamma.clone().unwrap_or_default(),
                case_fraction: r.case_fraction.unwrap_or(0.2),
            };
            spec.validate()?;
            simulate_ordinal(&spec, r.n, r.seed, &exchangeable_matrix(r.d, r.rho)?)
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long, value_enum, default_value = "cls1")]
    pub algorithm: Algorithm,
    /// Temperature τ [default: d].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Sweeps T [default: 10d].
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Burn-in N [default: T/2].
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Frequency threshold ξ of the CLS1 rule [default: 0.7].
    #[arg(long)]
    pub xi: Option<f64>,
    /// Control-chart constant b [default: √10].
    #[arg(long)]
    pub b: Option<f64>,
    /// Active components in the random starting mask [default: 5].
    #[arg(long)]
    pub init_active: Option<usize>,
    /// Explicit starting mask as a 0/1 string.
    #[arg(long)]
    pub init_mask: Option<ComponentMask>,
    #[arg(long, value_parser = kebab::<FrequencyWindow>)]
    pub window: Option<FrequencyWindow>,
    /// Nominal per-comparison error rate α of CLS2 [default: 0.1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Penalty λ of CLS2 [default: 1].
    #[arg(long, conflicts_with = "lambda_preset")]
    pub lambda: Option<f64>,
    /// Penalty preset: aic, bic or hqc.
    #[arg(long)]
    pub lambda_preset: Option<String>,
    #[arg(long, value_parser = kebab::<PenaltyScale>)]
    pub penalty_scale: Option<PenaltyScale>,
    /// Observations deleted per jackknife group inside the objective [default: 1].
    #[arg(long)]
    pub delete_k: Option<usize>,
    /// Group size of the jackknife standard error of the final estimate.
    #[arg(long, default_value_t = 10)]
    pub se_delete: usize,
    #[arg(long, value_parser = kebab::<InnerMatrix>)]
    pub inner: Option<InnerMatrix>,
    #[arg(long, value_parser = kebab::<Pilot>)]
    pub pilot: Option<Pilot>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Fully resolved settings of a `select` run.
#[derive(Debug, Clone, Serialize)]
pub struct SelectConfig {
    pub model: ModelKind,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub estimator: EstimatorConfig,
    pub stability: Option<StabilityConfig>,
    pub se_delete: usize,
}

impl SelectArgs {
    fn resolve(&self, data: &Dataset, m: usize) -> Result<SelectConfig> {
        let mut s = SamplerConfig::defaults_for(data.d());
        if let Some(t) = self.sweeps {
            s = s.with_sweeps(t);
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { s.$f = v; } )* };
        }
        set!(tau, burn_in, xi, b, init_active, window);
        s.init_mask = self.init_mask.clone();
        s.validate(m)?;
        let mut e = EstimatorConfig::default();
        if let Some(k) = self.delete_k {
            e.delete_k = k;
        }
        if let Some(v) = self.inner {
            e.inner = v;
        }
        if let Some(v) = self.pilot {
            e.pilot = v;
        }
        e.validate(data.n())?;
        let stability = match self.algorithm {
            Algorithm::Cls1 => None,
            Algorithm::Cls2 => {
                let mut st = StabilityConfig::default();
                if let Some(a) = self.alpha {
                    st.alpha = a;
                }
                if let Some(name) = &self.lambda_preset {
                    st.lambda = lambda_preset(name, data.n())
                        .ok_or_else(|| Error::InvalidConfig(format!("unknown lambda preset {name:?}; use aic, bic or hqc")))?;
                }
                if let Some(l) = self.lambda {
                    st.lambda = l;
                }
                if let Some(p) = self.penalty_scale {
                    st.penalty_scale = p;
                }
                st.validate()?;
                Some(st)
            }
        };
        if self.se_delete == 0 {
            return Err(Error::InvalidConfig("se_delete must be at least 1".into()));
        }
        Ok(SelectConfig {
            model: self.model,
            algorithm: self.algorithm,
            seed: self.seed,
            sampler: s,
            estimator: e,
            stability,
            se_delete: self.se_delete,
        })
    }
}

/// Estimate on the finally selected mask.
#[derive(Debug, Clone, Serialize)]
pub struct FinalEstimate {
    pub mask: ComponentMask,
    pub size: usize,
    pub theta: Option<Vec<f64>>,
    /// Delete-`se_delete` jackknife standard error per parameter.
    pub jackknife_se: Option<Vec<f64>>,
    pub se_delete: usize,
    pub warning: Option<String>,
}

/// Rule-dependent part of the report.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum SelectionSection {
    Cls1 {
        #[serde(flatten)]
        report: SelectionReport,
        estimate: FinalEstimate,
    },
    Cls2 {
        #[serde(flatten)]
        report: StabilityReport,
        penalty: Penalty,
        estimate: FinalEstimate,
    },
}

impl SelectionSection {
    pub fn estimate(&self) -> &FinalEstimate {
        match self {
            SelectionSection::Cls1 { estimate, .. } | SelectionSection::Cls2 { estimate, .. } => estimate,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub sweeps: usize,
    pub burn_in: usize,
    pub mean_size: f64,
    pub cache: CacheStats,
    pub control_chart: Option<ControlChart>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectReport {
    pub schema_version: u32,
    pub model: ModelKind,
    pub family: &'static str,
    pub n: usize,
    pub d: usize,
    pub components: usize,
    pub seed: u64,
    pub data_fingerprint: String,
    pub sampler: SamplerConfig,
    pub estimator: EstimatorConfig,
    /// Thresholds estimated from the controls (ordinal model only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<(f64, f64)>>,
    pub chain: ChainSummary,
    pub selection: SelectionSection,
}

impl SelectReport {
    /// Exit code implied by the report.
    pub fn exit_code(&self) -> i32 {
        let est = self.selection.estimate();
        if est.theta.is_none() || est.jackknife_se.is_none() {
            EXIT_NUMERICAL
        } else if self.chain.control_chart.as_ref().is_some_and(|c| !c.equilibrium) {
            EXIT_DIAGNOSTIC
        } else {
            EXIT_OK
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_fingerprint: Option<String>,
    pub outputs: Vec<String>,
}

impl<C: Serialize> Manifest<C> {
    fn new(command: &'static str, seed: u64, config: C, data_fingerprint: Option<String>, outputs: &[&str]) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            data_fingerprint,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Writes `path` through a temporary sibling and a rename.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn family_for(model: ModelKind, data: &Dataset) -> Result<(Box<dyn SubLikelihoodFamily>, Option<Vec<(f64, f64)>>)> {
    Ok(match model {
        ModelKind::CommonLocation => (Box::new(CommonLocation::new(data.d())), None),
        ModelKind::Exchangeable => (Box::new(ExchangeablePairs::new(data.d())), None),
        ModelKind::Ordinal => {
            let g = thresholds_from_controls(data)?;
            (Box::new(OrdinalProbit::new(g.clone())?), Some(g))
        }
    })
}

fn final_estimate(obj: &JackknifeObjective<'_>, sel: &SelectedModel, cfg: &SelectConfig) -> FinalEstimate {
    let mut warning = sel.warning.clone();
    let jackknife_se = match &sel.theta {
        Some(_) => match jackknife_se_for(obj, &sel.mask, cfg.se_delete, &mut stream(cfg.seed, 1, Stream::Groups)) {
            Ok(se) => Some(se),
            Err(e) => {
                warning.get_or_insert(format!("standard error: {e}"));
                None
            }
        },
        None => None,
    };
    FinalEstimate {
        mask: sel.mask.clone(),
        size: sel.size,
        theta: sel.theta.clone(),
        jackknife_se,
        se_delete: cfg.se_delete,
        warning,
    }
}

/// Runs the selection and builds the report together with the chain trace.
pub fn select(data: &Dataset, args: &SelectArgs) -> Result<(SelectReport, crate::sampler::ChainTrace)> {
    let (family, thresholds) = family_for(args.model, data)?;
    family.validate(data)?;
    let m = family.n_components();
    let cfg = args.resolve(data, m)?;
    let penalty = match &cfg.stability {
        Some(st) => Penalty::new(st.lambda, st.penalty_scale)?,
        None => Penalty::none(),
    };
    let obj = JackknifeObjective::new(
        family.as_ref(),
        data,
        cfg.estimator.clone(),
        penalty,
        &mut stream(cfg.seed, 0, Stream::Groups),
    )?;
    // One chain stream for both rules: with λ = 0 the two runs share a trace.
    let trace = run_chain(&obj, &cfg.sampler, &mut stream(cfg.seed, 0, Stream::Chain))?;
    let selection = match &cfg.stability {
        None => {
            let report = selection_report(&trace, &obj, &cfg.sampler)?;
            let estimate = final_estimate(&obj, &report.min_rule, &cfg);
            SelectionSection::Cls1 { report, estimate }
        }
        Some(st) => {
            let report = stability_select(&trace, &obj, st, cfg.sampler.window, None)?;
            let estimate = final_estimate(&obj, &report.stable, &cfg);
            SelectionSection::Cls2 {
                report,
                penalty,
                estimate,
            }
        }
    };
    let chain = ChainSummary {
        sweeps: trace.len(),
        burn_in: trace.burn_in,
        mean_size: trace.mean_size(cfg.sampler.window),
        cache: trace.cache.clone(),
        control_chart: control_chart(&trace.totals(), cfg.sampler.b, cfg.sampler.burn_in),
    };
    let report = SelectReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model: cfg.model,
        family: family.name(),
        n: data.n(),
        d: data.d(),
        components: m,
        seed: cfg.seed,
        data_fingerprint: data.fingerprint(),
        sampler: cfg.sampler,
        estimator: cfg.estimator,
        thresholds,
        chain,
        selection,
    };
    Ok((report, trace))
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Flat TOML experiment plan.
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Worker threads [default: available cores].
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct BenchMeta<'a> {
    plan: &'a ExperimentPlan,
    cells: Vec<BenchCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    figure1: Option<Figure1Meta>,
}

#[derive(Debug, Serialize)]
struct BenchCell {
    n: usize,
    d: usize,
    d_star: usize,
    rho: f64,
    components: usize,
    sampler: SamplerConfig,
}

#[derive(Debug, Serialize)]
struct Figure1Meta {
    oracle: ComponentMask,
    oracle_g0: f64,
    share_hamming_within_3: f64,
    share_g0_within_10pct: f64,
}

#[derive(Debug, Serialize)]
struct Timing {
    elapsed_seconds: f64,
    jobs: usize,
}

fn bench(args: &BenchArgs) -> Result<()> {
    let plan = ExperimentPlan::from_path(&args.plan)?;
    std::fs::create_dir_all(&args.out)?;
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Error::InvalidConfig("jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let out = &args.out;
    let mut outputs = vec!["summary.csv"];
    let figure1 = pool.install(|| -> Result<Option<Figure1Meta>> {
        match plan.experiment {
            Experiment::Table1 | Experiment::Table3 => {
                let s = if plan.experiment == Experiment::Table1 {
                    run_table1(&plan, args.seed)?
                } else {
                    run_table3(&plan, args.seed)?
                };
                write_atomic(&out.join("summary.csv"), |w| s.write_csv(w))?;
                Ok(None)
            }
            Experiment::Figure1 => {
                let o = run_figure1(&plan, args.seed)?;
                write_atomic(&out.join("summary.csv"), |w| {
                    let mut c = csv::Writer::from_writer(w);
                    c.write_record(["run", "final_mask", "final_hamming", "g0"])?;
                    for (r, run) in o.runs.iter().enumerate() {
                        c.write_record([
                            (r + 1).to_string(),
                            run.final_mask.bitstring(),
                            run.final_hamming.to_string(),
                            crate::sampler::fmt_f64(run.g0),
                        ])?;
                    }
                    c.flush()?;
                    Ok(())
                })?;
                let names = ["trace_objective.csv", "trace_frequencies.csv", "trace_stable.csv", "trace_hamming.csv"];
                let mut bufs: [Vec<u8>; 4] = Default::default();
                {
                    let [a, b, c, d] = &mut bufs;
                    o.write_series(a, b, c, d)?;
                }
                for (name, buf) in names.iter().zip(&bufs) {
                    write_atomic(&out.join(name), |w| Ok(w.write_all(buf)?))?;
                }
                outputs.extend(names);
                Ok(Some(Figure1Meta {
                    share_hamming_within_3: o.share_within(3),
                    share_g0_within_10pct: o.share_g0_within(0.1),
                    oracle: o.oracle,
                    oracle_g0: o.oracle_g0,
                }))
            }
        }
    })?;
    let cells = plan
        .cells()
        .iter()
        .map(|c| BenchCell {
            n: c.n,
            d: c.d,
            d_star: c.d_star,
            rho: c.rho,
            components: plan.components(c),
            sampler: plan.sampler_for(c),
        })
        .collect();
    outputs.extend(["meta.json", "timing.json"]);
    let meta = Manifest::new(
        "bench",
        args.seed,
        BenchMeta {
            plan: &plan,
            cells,
            figure1,
        },
        None,
        &outputs,
    );
    write_json(&out.join("meta.json"), &meta)?;
    write_json(
        &out.join("timing.json"),
        &Timing {
            elapsed_seconds: start.elapsed().as_secs_f64(),
            jobs,
        },
    )
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(subcommand)]
    pub query: OracleQuery,
}

#[derive(Debug, Subcommand)]
pub enum OracleQuery {
    /// Exact log-variance objective of a mask, or the structural optimum when no mask is given.
    G0 {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        d_star: usize,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long)]
        mask: Option<ComponentMask>,
    },
    /// Exhaustive minimisation of the exact objective over all non-empty masks.
    Brute {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        d_star: usize,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
    },
}

#[derive(Debug, Serialize)]
struct OracleOutput {
    mask: ComponentMask,
    g0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    uncorrelated: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    correlated: Option<usize>,
}

fn oracle(q: &OracleQuery) -> Result<OracleOutput> {
    match *q {
        OracleQuery::G0 { d, d_star, rho, ref mask } => {
            CommonLocationSpec::new(d, d_star, rho, 0.0)?;
            match mask {
                Some(m) => {
                    if m.len() != d {
                        return Err(Error::LengthMismatch { left: m.len(), right: d });
                    }
                    Ok(OracleOutput {
                        g0: g0_common_location(m, rho, d_star)?,
                        mask: m.clone(),
                        uncorrelated: None,
                        correlated: None,
                    })
                }
                None => {
                    let (u, c, g0) = location_structural_optimum(d, d_star, rho);
                    Ok(OracleOutput {
                        mask: location_oracle_mask(d, d_star, u, c),
                        g0,
                        uncorrelated: Some(u),
                        correlated: Some(c),
                    })
                }
            }
        }
        OracleQuery::Brute { d, d_star, rho } => {
            CommonLocationSpec::new(d, d_star, rho, 0.0)?;
            if d > MAX_ENUMERATION {
                return Err(Error::Guard {
                    what: "d",
                    value: d,
                    limit: MAX_ENUMERATION,
                });
            }
            let (mask, g0) = brute_force_optimum(|m| g0_common_location(m, rho, d_star).unwrap_or(f64::INFINITY), d)?;
            Ok(OracleOutput {
                mask,
                g0,
                uncorrelated: None,
                correlated: None,
            })
        }
    }
}

/// Exit code for an error escaping a command.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NumericalDomain(_)
        | Error::NonConvergence { .. }
        | Error::Singular(_)
        | Error::DegenerateState
        | Error::NoValidState
        | Error::DegenerateMask => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(args) => {
            let resolved = args.resolve()?;
            let data = simulate(&resolved)?;
            std::fs::create_dir_all(&args.out)?;
            write_atomic(&args.out.join("data.csv"), |w| data.write_csv(w))?;
            let manifest = Manifest::new(
                "simulate",
                resolved.seed,
                &resolved,
                Some(data.fingerprint()),
                &["data.csv", "manifest.json"],
            );
            write_json(&args.out.join("manifest.json"), &manifest)?;
            Ok(EXIT_OK)
        }
        Command::Select(args) => {
            let data = Dataset::from_path(&args.data)?;
            let (report, trace) = select(&data, &args)?;
            std::fs::create_dir_all(&args.out)?;
            write_atomic(&args.out.join("trace.csv"), |w| trace.write_csv(w))?;
            write_json(&args.out.join("report.json"), &report)?;
            let manifest = Manifest::new(
                "select",
                report.seed,
                serde_json::json!({
                    "data": args.data.display().to_string(),
                    "model": report.model,
                    "algorithm": args.algorithm,
                    "sampler": report.sampler,
                    "estimator": report.estimator,
                    "stability": match &report.selection {
                        SelectionSection::Cls2 { report: s, penalty, .. } => serde_json::json!({
                            "alpha": s.alpha, "lambda": s.lambda, "penalty_scale": penalty.scale,
                        }),
                        SelectionSection::Cls1 { .. } => serde_json::Value::Null,
                    },
                    "se_delete": args.se_delete,
                }),
                Some(report.data_fingerprint.clone()),
                &["report.json", "trace.csv", "manifest.json"],
            );
            write_json(&args.out.join("manifest.json"), &manifest)?;
            let code = report.exit_code();
            if let Some(w) = &report.selection.estimate().warning {
                eprintln!("warning: {w}");
            }
            if code == EXIT_DIAGNOSTIC {
                eprintln!("warning: control chart does not indicate equilibrium");
            }
            Ok(code)
        }
        Command::Bench(args) => {
            bench(&args)?;
            Ok(EXIT_OK)
        }
        Command::Oracle(args) => {
            let o = oracle(&args.query)?;
            println!("{}", serde_json::to_string_pretty(&o)?);
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args`, runs the command and maps errors to exit codes.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
