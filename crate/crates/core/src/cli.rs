//! Job configuration and subcommand dispatch.
//!
//! A job is one TOML document. Example:
//!
//! ```toml
//! [lattice]
//! n_slices = 3
//! epsilon = 1.0
//! u_min = -2.0
//! u_max = 2.0
//! n_points = 9
//!
//! [potential]
//! coefficients = [0.0, 0.0, 0.0, 0.0, 0.05]
//!
//! [initial]
//! family = "gaussian"
//! center = 0.0
//! width = 0.7
//!
//! [run]
//! histories = 1000000
//! seed = 1
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eps::{simulate_cancellation, simulate_chain, simulate_product, ChainSpec, DEFAULT_V};
use crate::error::{invalid, Error, Result};
use crate::io::{self, Metadata, ResultTable};
use crate::kernels::KernelSpec;
use crate::lattice::{InitialState, LatticeSpec, UniformGrid};
use crate::oracle::{compare, feynman_amplitude, schrodinger_reference, transfer_with_tables, CompareReport};
use crate::potential::{Potential, PotentialSchedule};
use crate::rng::with_workers;
use crate::sampler::{estimate_cost, run_prepared, Prepared, RunConfig, SamplingStrategy};

/// Caps the number of worker threads.
pub const THREADS_ENV: &str = "EPSMC_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    DemoEps,
    Sample,
    Oracle,
    Amplitude,
    Reference,
    Compare,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::DemoEps => "demo-eps",
            Subcommand::Sample => "sample",
            Subcommand::Oracle => "oracle",
            Subcommand::Amplitude => "amplitude",
            Subcommand::Reference => "reference",
            Subcommand::Compare => "compare",
        }
    }

    fn stem(self) -> &'static str {
        match self {
            Subcommand::DemoEps => "demo_eps",
            other => other.name(),
        }
    }
}

/// Polynomial coefficients `[c0, c1, ...]` in nondimensional units, either
/// shared by every slice or listed per slice.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_slice: Option<Vec<Vec<f64>>>,
}

impl PotentialConfig {
    pub fn schedule(&self, n_slices: usize) -> Result<PotentialSchedule> {
        match (&self.coefficients, &self.per_slice) {
            (Some(c), None) => Ok(Potential::new(c.clone())?.into()),
            (None, Some(list)) => {
                if list.len() != n_slices {
                    return Err(invalid(format!(
                        "potential.per_slice has {} entries, lattice has n_slices = {n_slices}",
                        list.len()
                    )));
                }
                let slices = list.iter().map(|c| Potential::new(c.clone())).collect::<Result<Vec<_>>>()?;
                PotentialSchedule::per_slice(slices)
            }
            _ => Err(Error::Config("potential needs exactly one of `coefficients` or `per_slice`".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub histories: u64,
    pub seed: u64,
    pub v: f64,
    pub strategy: SamplingStrategy,
}

impl Default for RunParams {
    fn default() -> Self {
        Self { histories: 1_000_000, seed: 0, v: DEFAULT_V, strategy: SamplingStrategy::Uniform }
    }
}

/// Crank-Nicolson settings. The reference grid subdivides each lattice cell
/// `refine` times and extends `pad` units beyond each end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceParams {
    pub steps_per_unit: usize,
    pub refine: usize,
    pub pad: f64,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self { steps_per_unit: 400, refine: 4, pad: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoParams {
    pub k: f64,
    pub w: f64,
    pub v: f64,
    pub chain: Vec<f64>,
    pub histories: u64,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self { k: 0.6, w: 0.4, v: DEFAULT_V, chain: vec![0.9, -0.5, 0.7], histories: 1_000_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareParams {
    pub inputs: Vec<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DumpParams {
    pub kernels: bool,
    pub wigner: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Subcommand>,
    /// Output directory; not echoed, so reruns elsewhere stay identical.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub run: RunParams,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub reference: ReferenceParams,
    #[serde(default)]
    pub demo: DemoParams,
    #[serde(default)]
    pub compare: CompareParams,
    #[serde(default)]
    pub dump: DumpParams,
}

pub fn parse_config(text: &str) -> Result<JobConfig> {
    let cfg: JobConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate_common()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<JobConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl JobConfig {
    fn validate_common(&self) -> Result<()> {
        if self.run.histories == 0 {
            return Err(invalid("histories must be >= 1"));
        }
        if !(self.run.v > 0.0 && self.run.v < 1.0) {
            return Err(invalid(format!("run.v = {} must lie in (0, 1)", self.run.v)));
        }
        if let Some(l) = &self.lattice {
            l.validate()?;
            if let Some(p) = &self.potential {
                p.schedule(l.n_slices)?;
            }
        }
        self.kernel.validate()?;
        if self.reference.steps_per_unit == 0 || self.reference.refine == 0 {
            return Err(invalid("reference.steps_per_unit and reference.refine must be >= 1"));
        }
        if !(self.reference.pad >= 0.0) {
            return Err(invalid("reference.pad must be >= 0"));
        }
        Ok(())
    }

    /// Full validation for `sub`, run before any compute.
    pub fn validate_for(&self, sub: Subcommand) -> Result<()> {
        self.validate_common()?;
        match sub {
            Subcommand::DemoEps => {
                let d = &self.demo;
                if d.histories == 0 {
                    return Err(invalid("histories must be >= 1"));
                }
                ChainSpec::new(vec![d.k], d.w, d.v)?;
                ChainSpec::new(vec![d.k], -d.w, d.v)?;
                ChainSpec::new(d.chain.clone(), d.w, d.v)?;
                Ok(())
            }
            Subcommand::Compare => Ok(()),
            _ => {
                for (name, missing) in [
                    ("lattice", self.lattice.is_none()),
                    ("potential", self.potential.is_none()),
                    ("initial", self.initial.is_none()),
                ] {
                    if missing {
                        return Err(Error::Config(format!("missing required section `{name}`")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let lattice = self.lattice.clone().ok_or_else(|| Error::Config("missing required section `lattice`".into()))?;
        let potential = self
            .potential
            .as_ref()
            .ok_or_else(|| Error::Config("missing required section `potential`".into()))?
            .schedule(lattice.n_slices)?;
        let initial = self.initial.clone().ok_or_else(|| Error::Config("missing required section `initial`".into()))?;
        Ok(RunConfig {
            histories: self.run.histories,
            seed: self.run.seed,
            v: self.run.v,
            strategy: self.run.strategy,
            lattice,
            potential,
            kernel: self.kernel.clone(),
            initial,
        })
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub workers: Option<usize>,
    /// Extra result files for `compare`.
    pub inputs: Vec<PathBuf>,
}

/// Worker cap from [`THREADS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(invalid(format!("{THREADS_ENV} = {s:?} must be a positive integer"))),
        },
    }
}

#[derive(Clone, Debug, Default)]
pub struct JobOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn run_job(config: &JobConfig, sub: Subcommand, opts: &RunOptions) -> Result<JobOutput> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        config.run.seed = seed;
    }
    config.subcommand = Some(sub);
    if !opts.inputs.is_empty() {
        config.compare.inputs = opts.inputs.clone();
    }
    config.validate_for(sub)?;
    let out = opts.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let echo = serde_json::to_value(&config)?;
    with_workers(opts.workers, || match sub {
        Subcommand::DemoEps => demo_eps(&config, &out, echo),
        Subcommand::Sample => sample(&config, &out, echo, opts.force),
        Subcommand::Oracle => oracle(&config, &out, echo),
        Subcommand::Amplitude => amplitude(&config, &out, echo),
        Subcommand::Reference => reference(&config, &out, echo),
        Subcommand::Compare => {
            let (report, text) = emit_report(&config.compare.inputs)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("compare.json");
            let mut body = serde_json::to_string_pretty(&report)?;
            body.push('\n');
            std::fs::write(&path, body)?;
            Ok(JobOutput { files: vec![path], summary: text })
        }
    })
}

fn demo_eps(config: &JobConfig, out: &Path, echo: serde_json::Value) -> Result<JobOutput> {
    let d = &config.demo;
    let seed = config.run.seed;
    let product = simulate_product(d.k, d.w, d.v, d.histories, seed)?;
    let chain_spec = ChainSpec::new(d.chain.clone(), d.w, d.v)?;
    let chain = simulate_chain(&chain_spec, d.histories, seed.wrapping_add(1))?;
    let cancel = simulate_cancellation(d.k, d.w, d.v, d.histories, seed.wrapping_add(2))?;
    let chain_exact = chain_spec.expected_excess();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "product      k w = {:.6}  estimate {:.6} +- {:.6}",
        d.k * d.w,
        product.value,
        product.std_error
    );
    let _ = writeln!(
        summary,
        "chain        exact {:.6}  estimate {:.6} +- {:.6}",
        chain_exact, chain.value, chain.std_error
    );
    let _ = writeln!(
        summary,
        "cancellation exact 0         estimate {:.6} +- {:.6}",
        cancel.total.value, cancel.total.std_error
    );
    let mut meta = Metadata::new(Subcommand::DemoEps.name(), echo);
    meta.seed = Some(seed);
    meta.histories = Some(d.histories);
    meta.diagnostics = serde_json::json!({
        "product": { "expected": d.k * d.w, "estimate": product },
        "chain": { "expected": chain_exact, "estimate": chain },
        "cancellation": { "expected": 0.0, "estimate": cancel },
    });
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("{}.json", Subcommand::DemoEps.stem()));
    io::write_metadata(&path, &meta)?;
    Ok(JobOutput { files: vec![path], summary })
}

fn sample(config: &JobConfig, out: &Path, echo: serde_json::Value, force: bool) -> Result<JobOutput> {
    let prepared = Prepared::new(config.run_config()?)?;
    let cost = estimate_cost(&prepared);
    if !cost.feasible {
        if force {
            log::warn!("predicted relative standard error {:.3e}; running anyway", cost.predicted_rel_se);
        } else {
            return Err(Error::Infeasible { predicted: cost.predicted_rel_se });
        }
    }
    let result = run_prepared(&prepared);
    log::info!("sampled {} histories in {:.2} s", result.histories, result.diagnostics.wall_clock_s);
    let table = ResultTable {
        bin_center: result.bin_centers.clone(),
        h0: result.h0.clone(),
        h1: result.h1.clone(),
        q_hat: result.q_hat.clone(),
        stderr: result.stderr.clone(),
    };
    let mut meta = Metadata::new(Subcommand::Sample.name(), echo);
    meta.seed = Some(result.seed);
    meta.histories = Some(result.histories);
    meta.n_scale = Some(result.n_scale);
    meta.diagnostics = serde_json::json!({ "run": result.diagnostics, "cost": cost });
    let mut files = dumps(config, &prepared, out)?;
    let path = io::write_result(out, Subcommand::Sample.stem(), &table, &meta)?;
    let summary = format!(
        "sum Q_hat = {:.6}  N_scale = {:.4e}  predicted rel. s.e. = {:.3e}\n",
        result.q_hat.iter().sum::<f64>(),
        result.n_scale,
        cost.predicted_rel_se
    );
    files.push(path);
    Ok(JobOutput { files, summary })
}

fn dumps(config: &JobConfig, prepared: &Prepared, out: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    if config.dump.kernels || config.dump.wigner {
        std::fs::create_dir_all(out)?;
    }
    let cfg = &prepared.config;
    if config.dump.kernels {
        let path = out.join("kernels.csv");
        io::write_kernel_dump(&path, &cfg.lattice, &cfg.potential, &cfg.kernel)?;
        files.push(path);
    }
    if config.dump.wigner {
        let path = out.join("wigner.csv");
        io::write_wigner_dump(&path, &cfg.lattice, &prepared.wigner)?;
        files.push(path);
    }
    Ok(files)
}

fn oracle(config: &JobConfig, out: &Path, echo: serde_json::Value) -> Result<JobOutput> {
    let prepared = Prepared::new(config.run_config()?)?;
    let sum = transfer_with_tables(&prepared.tables, &prepared.wigner)?;
    let table = ResultTable::deterministic(prepared.config.lattice.grid().points(), sum.q.clone());
    let mut meta = Metadata::new(Subcommand::Oracle.name(), echo);
    meta.diagnostics = serde_json::json!({
        "total": sum.total(),
        "lost_mass": sum.lost_mass,
        "max_row_leakage": prepared.tables.max_leakage(),
        "wigner_mass": prepared.wigner.mass,
    });
    let mut files = dumps(config, &prepared, out)?;
    files.push(io::write_result(out, Subcommand::Oracle.stem(), &table, &meta)?);
    let summary = format!("sum Q = {:.9}  lost mass = {:.3e}\n", sum.total(), sum.lost_mass);
    Ok(JobOutput { files, summary })
}

fn amplitude(config: &JobConfig, out: &Path, echo: serde_json::Value) -> Result<JobOutput> {
    let rc = config.run_config()?;
    let grid = rc.lattice.grid();
    let psi0 = rc.initial.sample(&grid)?;
    let amp = feynman_amplitude(&rc.lattice, &rc.potential, &psi0)?;
    let table = ResultTable::deterministic(grid.points(), amp.bin_probabilities(grid.spacing));
    let mut meta = Metadata::new(Subcommand::Amplitude.name(), echo);
    meta.diagnostics = serde_json::json!({ "norm": amp.norm });
    let path = io::write_result(out, Subcommand::Amplitude.stem(), &table, &meta)?;
    Ok(JobOutput { files: vec![path], summary: format!("norm = {:.9}\n", amp.norm) })
}

/// Crank-Nicolson density on the lattice bins after `n_slices` time units.
pub fn reference_bins(
    lattice: &LatticeSpec,
    schedule: &PotentialSchedule,
    initial: &InitialState,
    params: &ReferenceParams,
) -> Result<(Vec<f64>, f64)> {
    let refine = params.refine;
    if matches!(initial, InitialState::File { .. }) && (refine != 1 || params.pad != 0.0) {
        return Err(invalid("a psi0 file fixes the grid; use reference.refine = 1 and reference.pad = 0"));
    }
    let du = lattice.spacing();
    let h = du / refine as f64;
    let pad_cells = (params.pad / h).ceil() as usize;
    let fine = UniformGrid {
        start: lattice.u_min - pad_cells as f64 * h,
        spacing: h,
        len: (lattice.n_points - 1) * refine + 1 + 2 * pad_cells,
    };
    let psi0 = initial.sample(&fine)?;
    let t = lattice.n_slices as f64;
    let steps = (params.steps_per_unit as f64 * t).ceil() as usize;
    let r = schrodinger_reference(&psi0, schedule, t, steps, &fine)?;
    let density = r.density();
    let bins = (0..lattice.n_points).map(|i| density[pad_cells + i * refine] * du).collect();
    Ok((bins, r.norm))
}

fn reference(config: &JobConfig, out: &Path, echo: serde_json::Value) -> Result<JobOutput> {
    let rc = config.run_config()?;
    let (bins, norm) = reference_bins(&rc.lattice, &rc.potential, &rc.initial, &config.reference)?;
    let table = ResultTable::deterministic(rc.lattice.grid().points(), bins);
    let mut meta = Metadata::new(Subcommand::Reference.name(), echo);
    meta.diagnostics = serde_json::json!({ "norm": norm });
    let path = io::write_result(out, Subcommand::Reference.stem(), &table, &meta)?;
    Ok(JobOutput { files: vec![path], summary: format!("norm = {norm:.12}\n") })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileSummary {
    pub path: PathBuf,
    pub source: Option<String>,
    pub bins: usize,
    /// Sum of the per-bin values.
    pub total: f64,
    /// Standard error of the sum, when the file is stochastic.
    pub total_stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub a: PathBuf,
    pub b: PathBuf,
    pub report: CompareReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub files: Vec<FileSummary>,
    pub pairs: Vec<PairReport>,
}

/// Normalization sums per file and L2/max/z statistics per pair.
pub fn emit_report(paths: &[PathBuf]) -> Result<(Report, String)> {
    if paths.is_empty() {
        return Err(Error::Config("compare needs at least one result file".into()));
    }
    let tables = paths.iter().map(|p| io::read_result(p)).collect::<Result<Vec<_>>>()?;
    let mut files = Vec::new();
    for (p, t) in paths.iter().zip(&tables) {
        let source = io::read_metadata(&io::sidecar_path(p)).ok().map(|m| m.source);
        let total_stderr = t.is_stochastic().then(|| t.stderr.iter().map(|s| s * s).sum::<f64>().sqrt());
        files.push(FileSummary { path: p.clone(), source, bins: t.len(), total: t.q_hat.iter().sum(), total_stderr });
    }
    let mut pairs = Vec::new();
    for i in 0..tables.len() {
        for j in i + 1..tables.len() {
            let (a, b) = (&tables[i], &tables[j]);
            check_binning(a, b)?;
            let se: Option<Vec<f64>> = (a.is_stochastic() || b.is_stochastic())
                .then(|| a.stderr.iter().zip(&b.stderr).map(|(x, y)| x.hypot(*y)).collect());
            let report = compare(&a.q_hat, &b.q_hat, se.as_deref())?;
            pairs.push(PairReport { a: paths[i].clone(), b: paths[j].clone(), report });
        }
    }
    let report = Report { files, pairs };
    let text = report_text(&report);
    Ok((report, text))
}

fn check_binning(a: &ResultTable, b: &ResultTable) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::BinningMismatch(format!("{} bins vs {} bins", a.len(), b.len())));
    }
    for (i, (x, y)) in a.bin_center.iter().zip(&b.bin_center).enumerate() {
        if (x - y).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(Error::BinningMismatch(format!("bin {i} centered at {x} vs {y}")));
        }
    }
    Ok(())
}

fn report_text(r: &Report) -> String {
    let mut s = String::new();
    for f in &r.files {
        let src = f.source.as_deref().unwrap_or("?");
        let _ = write!(s, "{} [{src}]: {} bins, sum = {:.6}", f.path.display(), f.bins, f.total);
        if let Some(se) = f.total_stderr {
            let _ = write!(s, " +- {se:.6}");
        }
        s.push('\n');
    }
    for p in &r.pairs {
        let c = &p.report;
        let _ = write!(s, "{} vs {}: L2 = {:.3e}, max = {:.3e}", p.a.display(), p.b.display(), c.l2, c.max_abs);
        if let Some(f) = c.within_4 {
            let _ = write!(s, ", |z| <= 4 in {:.1}% of bins", 100.0 * f);
        }
        s.push('\n');
    }
    s
}
