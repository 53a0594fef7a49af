//! Sweep definitions, execution and result tables.
//!
//! A run visits every sweep point, builds the scenario, designs the RIS
//! phases for each protocol and records one row per (point, protocol,
//! design). Rows are ordered by sweep index and do not depend on the number
//! of worker threads.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{PhaseConfig, SystemModel};
use crate::detequiv::{net_sum_rate_det, sinr_det, sinr_det_de, sinr_det_noris, sinr_det_perfect, DetEquiv};
use crate::error::{Error, Result};
use crate::estimation::{rate_subphases, training_subphases, Protocol};
use crate::montecarlo::{ergodic_sinr_mc, net_sum_rate_from_mc, validate_covariance, McConfig};
use crate::optimize::{ga_icsi_per_realization, pga_optimize, GaOptions, PgaOptions, PgaResult};
use crate::precoding::loss_factor;
use crate::rng::{sample_seed, stream, StreamTag};
use crate::scenario::{
    build_scenario, FigureId, Geometry, GeometrySpec, Overrides, PropagationModel, ScenarioFile, ScenarioTemplate,
    SystemConfig,
};

pub const DEFAULT_MC_SAMPLES: usize = 2000;
pub const DEFAULT_GA_REALIZATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PMax,
    N,
    M,
    K,
    L,
}

impl SweepAxis {
    fn is_integer(self) -> bool {
        self != SweepAxis::PMax
    }

    fn apply(self, config: &mut SystemConfig, value: f64) {
        match self {
            SweepAxis::PMax => config.p_max = value,
            SweepAxis::N => config.set_elements(value as usize),
            SweepAxis::M => config.m = value as usize,
            SweepAxis::K => config.k = value as usize,
            SweepAxis::L => config.l = value as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisDesign {
    /// One uniformly random phase vector drawn from the experiment seed.
    Random,
    /// Gradient ascent on the deterministic net sum-rate.
    ScsiPga,
    /// Genetic search on instantaneous estimates, redone per realization.
    IcsiGa,
    /// The same system with the RISs removed.
    None,
}

impl RisDesign {
    fn supports(self, protocol: Protocol) -> bool {
        self != RisDesign::IcsiGa || protocol == Protocol::Dft
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    SinrDet,
    SinrMc,
    NetrateDet,
    NetrateMc,
    NetrateInst,
    Overhead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidArgument(format!("unknown output format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![
        OutputKind::SinrDet,
        OutputKind::SinrMc,
        OutputKind::NetrateDet,
        OutputKind::NetrateMc,
        OutputKind::NetrateInst,
        OutputKind::Overhead,
    ]
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

fn default_ga_realizations() -> usize {
    DEFAULT_GA_REALIZATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    #[serde(default)]
    pub scenario: ScenarioFile,
    pub sweep: Sweep,
    pub protocols: Vec<Protocol>,
    pub designs: Vec<RisDesign>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default)]
    pub seed: u64,
    /// Monte-Carlo samples per row; zero evaluates deterministic outputs only.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub pga: PgaOptions,
    #[serde(default)]
    pub ga: GaOptions,
    #[serde(default = "default_ga_realizations")]
    pub ga_realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

impl Experiment {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn preset(figure: FigureId) -> Self {
        let p_values: Vec<f64> = (1..=10).map(|i| 2.0 * i as f64).collect();
        let base = |name: &str, sweep: Sweep, protocols: Vec<Protocol>, designs: Vec<RisDesign>| Experiment {
            name: name.to_string(),
            scenario: ScenarioFile::default(),
            sweep,
            protocols,
            designs,
            outputs: default_outputs(),
            seed: 0,
            mc_samples: DEFAULT_MC_SAMPLES,
            pga: PgaOptions::default(),
            ga: GaOptions::default(),
            ga_realizations: DEFAULT_GA_REALIZATIONS,
            output: None,
        };
        match figure {
            FigureId::Fig2 => base(
                "fig2",
                Sweep {
                    axis: SweepAxis::PMax,
                    values: p_values,
                },
                Protocol::ALL.to_vec(),
                vec![RisDesign::Random, RisDesign::ScsiPga],
            ),
            FigureId::Fig3 => base(
                "fig3",
                Sweep {
                    axis: SweepAxis::PMax,
                    values: p_values,
                },
                Protocol::ALL.to_vec(),
                vec![RisDesign::Random, RisDesign::ScsiPga, RisDesign::None],
            ),
            FigureId::Fig4 => {
                let mut e = base(
                    "fig4",
                    Sweep {
                        axis: SweepAxis::N,
                        values: vec![20.0, 60.0, 80.0, 100.0, 160.0, 240.0, 320.0],
                    },
                    vec![Protocol::Dft, Protocol::De],
                    vec![RisDesign::ScsiPga, RisDesign::IcsiGa],
                );
                e.scenario.p_max_w = Some(ScenarioTemplate::figure(FigureId::Fig4).config.p_max);
                e.outputs = vec![OutputKind::NetrateDet, OutputKind::NetrateInst, OutputKind::Overhead];
                e
            }
        }
    }

    pub fn apply_overrides(&mut self, overrides: &Overrides) {
        self.scenario.apply_overrides(overrides);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.sweep.values.is_empty() {
            return bad("sweep needs at least one value".into());
        }
        for &v in &self.sweep.values {
            if !v.is_finite() || v < 0.0 || (self.sweep.axis.is_integer() && v.fract() != 0.0) {
                return bad(format!("invalid value {v} for sweep axis {:?}", self.sweep.axis));
            }
        }
        if self.sweep.axis == SweepAxis::N && (self.scenario.n1.is_some() || self.scenario.n2.is_some()) {
            return bad("an N sweep chooses N1 x N2 itself; drop `n1`/`n2` from the scenario".into());
        }
        if self.protocols.is_empty() {
            return bad("protocol list is empty".into());
        }
        if self.designs.is_empty() {
            return bad("design list is empty".into());
        }
        if !self.protocols.iter().any(|&p| self.designs.iter().any(|d| d.supports(p))) {
            return bad("no supported protocol/design combination (icsi_ga needs the dft protocol)".into());
        }
        self.pga.validate()?;
        self.ga.validate()?;
        self.scenario.to_template()?;
        Ok(())
    }

    fn wants(&self, o: OutputKind) -> bool {
        self.outputs.contains(&o)
    }
}

/// One result row. Field order is the column order of the emitted tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub point_index: usize,
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub protocol: Protocol,
    pub design: RisDesign,
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub p_max_w: f64,
    pub sigma2_w: f64,
    pub rho_p: f64,
    pub tau_s_symbols: f64,
    pub tau_c_symbols: f64,
    pub seed: u64,
    pub mc_samples: usize,
    /// Sub-phases charged in the rates.
    pub subphases: f64,
    /// Sub-phases actually transmitted in simulation.
    pub subphases_int: usize,
    pub overhead_symbols: Option<f64>,
    pub training_symbols: Option<f64>,
    pub loss_factor: Option<f64>,
    /// User-averaged SINRs.
    pub sinr_det: Option<f64>,
    pub sinr_mc: Option<f64>,
    /// User-averaged jackknife standard error of the Monte-Carlo SINRs.
    pub sinr_mc_stderr: Option<f64>,
    pub netrate_det_bps_hz: Option<f64>,
    pub netrate_mc_bps_hz: Option<f64>,
    pub netrate_inst_bps_hz: Option<f64>,
    pub pga_iterations: Option<usize>,
    pub status: String,
}

pub const COLUMNS: [&str; 30] = [
    "experiment",
    "point_index",
    "sweep_axis",
    "sweep_value",
    "protocol",
    "design",
    "m",
    "n",
    "l",
    "k",
    "p_max_w",
    "sigma2_w",
    "rho_p",
    "tau_s_symbols",
    "tau_c_symbols",
    "seed",
    "mc_samples",
    "subphases",
    "subphases_int",
    "overhead_symbols",
    "training_symbols",
    "loss_factor",
    "sinr_det",
    "sinr_mc",
    "sinr_mc_stderr",
    "netrate_det_bps_hz",
    "netrate_mc_bps_hz",
    "netrate_inst_bps_hz",
    "pga_iterations",
    "status",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn find(&self, point_index: usize, protocol: Protocol, design: RisDesign) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.point_index == point_index && r.protocol == protocol && r.design == design)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.status != "ok")
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn template_without_ris(template: &ScenarioTemplate) -> ScenarioTemplate {
    let mut t = template.clone();
    t.config.l = 0;
    if let GeometrySpec::Explicit(g) = &mut t.geometry {
        g.ris_positions.clear();
        g.ris_normals.clear();
    }
    t
}

/// Random design phases: a fixed stream, so points with the same `NL` share
/// the draw and longer vectors extend shorter ones.
pub fn random_design_phase(seed: u64, len: usize) -> PhaseConfig {
    PhaseConfig::random(len, &mut stream(seed, StreamTag::RandomPhases))
}

struct PointContext<'a> {
    exp: &'a Experiment,
    index: usize,
    value: f64,
    template: ScenarioTemplate,
    mc_seed: u64,
}

impl PointContext<'_> {
    fn skeleton(&self, protocol: Protocol, design: RisDesign) -> ResultRow {
        let cfg = &self.template.config;
        let l = if design == RisDesign::None { 0 } else { cfg.l };
        let mut c = cfg.clone();
        c.l = l;
        ResultRow {
            experiment: self.exp.name.clone(),
            point_index: self.index,
            sweep_axis: self.exp.sweep.axis,
            sweep_value: self.value,
            protocol,
            design,
            m: cfg.m,
            n: cfg.n(),
            l,
            k: cfg.k,
            p_max_w: cfg.p_max,
            sigma2_w: cfg.sigma2,
            rho_p: cfg.training_snr(),
            tau_s_symbols: cfg.training_length(),
            tau_c_symbols: cfg.tau_c,
            seed: self.exp.seed,
            mc_samples: self.exp.mc_samples,
            subphases: rate_subphases(&c, protocol),
            subphases_int: training_subphases(&c, protocol),
            overhead_symbols: None,
            training_symbols: None,
            loss_factor: None,
            sinr_det: None,
            sinr_mc: None,
            sinr_mc_stderr: None,
            netrate_det_bps_hz: None,
            netrate_mc_bps_hz: None,
            netrate_inst_bps_hz: None,
            pga_iterations: None,
            status: "ok".into(),
        }
    }

    fn evaluate_phase(&self, row: &mut ResultRow, model: &SystemModel, phase: &PhaseConfig) -> Result<()> {
        let exp = self.exp;
        let protocol = row.protocol;
        if exp.wants(OutputKind::SinrDet) {
            row.sinr_det = Some(mean(&sinr_det(model, phase, protocol)?));
        }
        if exp.wants(OutputKind::NetrateDet) {
            row.netrate_det_bps_hz = Some(net_sum_rate_det(model, phase, protocol)?);
        }
        if exp.mc_samples > 0 && (exp.wants(OutputKind::SinrMc) || exp.wants(OutputKind::NetrateMc)) {
            let mc = McConfig {
                n_samples: exp.mc_samples,
                seed: self.mc_seed,
                protocol,
            };
            let r = ergodic_sinr_mc(model, phase, &mc)?;
            if exp.wants(OutputKind::SinrMc) {
                row.sinr_mc = Some(mean(&r.gamma));
                row.sinr_mc_stderr = (r.n_samples > 2).then(|| mean(&r.stderr));
            }
            if exp.wants(OutputKind::NetrateMc) {
                row.netrate_mc_bps_hz = Some(net_sum_rate_from_mc(model, protocol, &r.gamma)?);
            }
        }
        Ok(())
    }

    fn fill(
        &self,
        row: &mut ResultRow,
        model: &SystemModel,
        pga: &mut Option<std::result::Result<PgaResult, String>>,
    ) -> Result<()> {
        let exp = self.exp;
        let cfg = model.scenario().config();
        let protocol = row.protocol;
        if exp.wants(OutputKind::Overhead) {
            row.overhead_symbols = Some(row.subphases * cfg.training_length());
            row.training_symbols = Some(row.subphases_int as f64 * cfg.training_length());
        }
        row.loss_factor = Some(loss_factor(cfg, row.subphases)?);
        match row.design {
            RisDesign::Random => {
                let phase = random_design_phase(exp.seed, model.phase_len());
                self.evaluate_phase(row, model, &phase)
            }
            RisDesign::ScsiPga => {
                let cached =
                    pga.get_or_insert_with(|| pga_optimize(model, protocol, &exp.pga).map_err(|e| e.to_string()));
                match cached {
                    Ok(result) => {
                        row.pga_iterations = Some(result.iterations());
                        self.evaluate_phase(row, model, &result.phase)
                    }
                    Err(msg) => {
                        row.status = format!("error: {msg}");
                        Ok(())
                    }
                }
            }
            RisDesign::None => {
                let scenario = template_without_ris(&self.template).build()?;
                let bare = SystemModel::new(&scenario);
                self.evaluate_phase(row, &bare, &PhaseConfig::ones(0))
            }
            RisDesign::IcsiGa => {
                if exp.mc_samples > 0 && exp.ga_realizations > 0 && exp.wants(OutputKind::NetrateInst) {
                    let rates = ga_icsi_per_realization(model, protocol, exp.ga_realizations, self.mc_seed, &exp.ga)?;
                    row.netrate_inst_bps_hz = Some(mean(&rates));
                }
                Ok(())
            }
        }
    }

    fn run(&self) -> Vec<ResultRow> {
        let exp = self.exp;
        let combos: Vec<(Protocol, RisDesign)> = exp
            .protocols
            .iter()
            .flat_map(|&p| exp.designs.iter().filter(move |d| d.supports(p)).map(move |&d| (p, d)))
            .collect();
        let scenario = match self.template.build() {
            Ok(s) => s,
            Err(e) => {
                return combos
                    .into_iter()
                    .map(|(p, d)| {
                        let mut row = self.skeleton(p, d);
                        row.status = format!("error: {e}");
                        row
                    })
                    .collect();
            }
        };
        let model = SystemModel::new(&scenario);
        let mut rows = Vec::with_capacity(combos.len());
        for &protocol in &exp.protocols {
            let mut pga = None;
            for &design in exp.designs.iter().filter(|d| d.supports(protocol)) {
                let mut row = self.skeleton(protocol, design);
                if let Err(e) = self.fill(&mut row, &model, &mut pga) {
                    row.status = format!("error: {e}");
                }
                rows.push(row);
            }
        }
        rows
    }
}

/// Runs every sweep point. Configuration problems of a single point become
/// that point's row status; only an invalid experiment is an error.
pub fn run_experiment(exp: &Experiment) -> Result<ResultTable> {
    exp.validate()?;
    let base = exp.scenario.to_template()?;
    let rows: Vec<Vec<ResultRow>> = exp
        .sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            let mut template = base.clone();
            exp.sweep.axis.apply(&mut template.config, value);
            PointContext {
                exp,
                index,
                value,
                template,
                mc_seed: sample_seed(exp.seed, index as u64),
            }
            .run()
        })
        .collect();
    Ok(ResultTable {
        rows: rows.into_iter().flatten().collect(),
    })
}

pub fn write_results<W: Write>(table: &ResultTable, format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(COLUMNS)?;
            for row in &table.rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, table)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn emit_results(table: &ResultTable, format: OutputFormat, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_results(table, format, file)
}

pub fn read_results(text: &str, format: OutputFormat) -> Result<ResultTable> {
    match format {
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
            Ok(ResultTable { rows })
        }
        OutputFormat::Json => Ok(serde_json::from_str(text)?),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn toy_config(m: usize, n1: usize, n2: usize, l: usize, k: usize) -> SystemConfig {
    SystemConfig {
        m,
        k,
        l,
        n1,
        n2,
        ..Default::default()
    }
}

fn local_config(m: usize, n1: usize, n2: usize, l: usize, k: usize) -> SystemConfig {
    SystemConfig {
        p_max: 1e-3,
        propagation: PropagationModel {
            c0_db: 0.0,
            ..Default::default()
        },
        ..toy_config(m, n1, n2, l, k)
    }
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x / y - 1.0).abs()).fold(0.0, f64::max)
}

/// Invariant checks at toy dimensions. Output is deterministic for a seed.
pub fn selftest(seed: u64) -> Result<SelftestReport> {
    let mut checks = Vec::new();
    let mut check = |name, passed, detail: String| checks.push(Check { name, passed, detail });

    let cov = build_scenario(toy_config(4, 1, 2, 1, 2), Geometry::arcs(1, 2, &Default::default()))?;
    let cov_model = SystemModel::new(&cov);
    let cov_phase = random_design_phase(seed, cov_model.phase_len());
    for (name, protocol) in [("covariance_dft", Protocol::Dft), ("covariance_de", Protocol::De)] {
        let mc = McConfig {
            n_samples: 20_000,
            seed,
            protocol,
        };
        let r = validate_covariance(&cov_model, &cov_phase, &mc)?;
        let (dev, orth) = (r.max_deviation(), r.max_orthogonality());
        check(name, dev < 0.05 && orth < 0.05, format!("deviation={dev:.4} orthogonality={orth:.4}"));
    }

    let mut worst = 0.0f64;
    for i in 0..5 {
        let cfg = SystemConfig {
            rho_p: Some(1e12),
            ..local_config(4, 2, 2, 2, 3)
        };
        let s = build_scenario(cfg, Geometry::scattered(2, 3, sample_seed(seed, i)))?;
        let model = SystemModel::new(&s);
        let phase = random_design_phase(sample_seed(seed, i), model.phase_len());
        let perfect = sinr_det_perfect(&model, &phase)?;
        for p in [Protocol::Dft, Protocol::De] {
            worst = worst.max(max_rel(&sinr_det(&model, &phase, p)?, &perfect));
        }
    }
    check("limit_perfect_csi", worst < 1e-6, format!("max_rel={worst:.3e}"));

    let mut worst = 0.0f64;
    for i in 0..5 {
        let s = build_scenario(local_config(6, 1, 1, 0, 4), Geometry::scattered(0, 4, sample_seed(seed, i)))?;
        let model = SystemModel::new(&s);
        let a = sinr_det_de(&model, &PhaseConfig::ones(0))?;
        worst = worst.max(max_rel(&a, &sinr_det_noris(&s)));
    }
    check("limit_no_ris", worst < 1e-12, format!("max_rel={worst:.3e}"));

    let low = SystemConfig {
        p_max: 0.1,
        ..toy_config(8, 2, 2, 2, 3)
    };
    let s = build_scenario(low, Geometry::arcs(2, 3, &Default::default()))?;
    let model = SystemModel::new(&s);
    let phase = random_design_phase(seed, model.phase_len());
    let mut worst = 0.0f64;
    for protocol in [Protocol::Dft, Protocol::De] {
        let mc = McConfig {
            n_samples: 4000,
            seed,
            protocol,
        };
        let r = ergodic_sinr_mc(&model, &phase, &mc)?;
        worst = worst.max(max_rel(&r.gamma, &sinr_det(&model, &phase, protocol)?));
        let again = ergodic_sinr_mc(&model, &phase, &mc)?;
        if again != r {
            worst = f64::INFINITY;
        }
    }
    check("mc_consistency", worst < 0.05, format!("max_rel={worst:.4}"));

    let s = build_scenario(toy_config(8, 2, 2, 2, 3), Geometry::arcs(2, 3, &Default::default()))?;
    let model = SystemModel::new(&s);
    let phase = random_design_phase(seed, model.phase_len());
    let g: Vec<Vec<f64>> = [Protocol::Perfect, Protocol::Dft, Protocol::De]
        .iter()
        .map(|&p| sinr_det(&model, &phase, p))
        .collect::<Result<_>>()?;
    let ordered = (0..model.k()).all(|k| g[0][k] >= g[1][k] && g[1][k] >= g[2][k]);
    check("sinr_ordering", ordered, format!("mean perfect={:.4} dft={:.4} de={:.4}", mean(&g[0]), mean(&g[1]), mean(&g[2])));

    let cfg = s.config();
    let dft = DetEquiv::new(&model, Protocol::Dft)?;
    let want = (cfg.n() * cfg.l) as f64 / cfg.m as f64 + 1.0;
    let exact = dft.subphases() == want && rate_subphases(cfg, Protocol::De) == 1.0;
    check(
        "overhead",
        exact,
        format!("dft={} de={}", want * cfg.training_length(), cfg.training_length()),
    );

    let opts = PgaOptions {
        max_iters: 50,
        ..Default::default()
    };
    let r = pga_optimize(&model, Protocol::De, &opts)?;
    let monotone = r.trace.windows(2).all(|w| w[1].objective >= w[0].objective);
    check(
        "pga_monotone",
        monotone,
        format!("iterations={} objective={:.6}", r.iterations(), r.objective),
    );

    Ok(SelftestReport { checks })
}
