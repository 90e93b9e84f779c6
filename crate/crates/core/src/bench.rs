//! Benchmark harness: runs layer suites under every variant, checks each
//! output against the reference convolution and builds comparison tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{expected_counts, model_layers, ConvProgram, ConvSpec, KernelError, LayerSpec, Model, Variant};
use crate::machine::SimError;
use crate::mem::{CacheConfig, MainMemoryConfig};
use crate::pipeline::{Pipeline, RunStats, SimConfig};

const TRACE_FLUSH_CYCLES: u64 = 1 << 14;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{job}: simulation failed: {source}")]
    Sim { job: String, source: SimError },
    #[error(
        "{job}: output[{index}] = {got:#010x} but the reference convolution gives {expected:#010x}"
    )]
    OracleMismatch {
        job: String,
        index: usize,
        expected: u32,
        got: u32,
    },
    #[error("{job}: retired {got} instructions, the kernel template predicts {expected}")]
    CountMismatch { job: String, expected: u64, got: u64 },
    #[error("report I/O: {0}")]
    Io(#[from] io::Error),
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    #[default]
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(BenchError::Config(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSelection {
    pub model: Model,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub models: Vec<ModelSelection>,
    /// Extra layers run as a suite named `custom`.
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub l1i: CacheConfig,
    #[serde(default)]
    pub l1d: CacheConfig,
    #[serde(default)]
    pub memory: MainMemoryConfig,
    #[serde(default = "default_clock")]
    pub clock_hz: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: u64,
    #[serde(default)]
    pub trace: bool,
    #[serde(default)]
    pub output: OutputConfig,
}

fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn default_clock() -> f64 {
    1e9
}

fn default_seed() -> u64 {
    2024
}

fn default_max_cycles() -> u64 {
    1 << 36
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variants: all_variants(),
            models: Vec::new(),
            layers: Vec::new(),
            l1i: CacheConfig::default(),
            l1d: CacheConfig::default(),
            memory: MainMemoryConfig::default(),
            clock_hz: default_clock(),
            seed: default_seed(),
            max_cycles: default_max_cycles(),
            trace: false,
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            l1i: self.l1i,
            l1d: self.l1d,
            memory: self.memory,
            max_cycles: self.max_cycles,
            trace: self.trace,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let err = |m: String| Err(BenchError::Config(m));
        if self.variants.is_empty() {
            return err("at least one variant is required".into());
        }
        if self.variants.iter().collect::<BTreeSet<_>>().len() != self.variants.len() {
            return err("variants are listed more than once".into());
        }
        if self.models.is_empty() && self.layers.is_empty() {
            return err("no layers to run: give `models` or `layers`".into());
        }
        for sel in &self.models {
            if !(sel.scale > 0.0 && sel.scale <= 1.0) {
                return err(format!("scale {} for {} is outside (0, 1]", sel.scale, sel.model));
            }
        }
        for layer in &self.layers {
            layer.spec.validate()?;
            if layer.groups == 0 {
                return err(format!("layer {} has zero groups", layer.name));
            }
        }
        for (name, c) in [("l1i", &self.l1i), ("l1d", &self.l1d)] {
            c.validate().map_err(|e| BenchError::Config(format!("{name}: {e}")))?;
        }
        self.memory
            .validate()
            .map_err(|e| BenchError::Config(format!("memory: {e}")))?;
        if !(self.clock_hz > 0.0) {
            return err("clock_hz must be positive".into());
        }
        if self.max_cycles == 0 {
            return err("max_cycles must be positive".into());
        }
        Ok(())
    }

    /// The suites this configuration runs, in report order.
    pub fn suites(&self) -> Result<Vec<Suite>, BenchError> {
        let mut suites = Vec::new();
        for sel in &self.models {
            suites.push(Suite {
                name: sel.model.title().to_string(),
                scale: sel.scale,
                layers: model_layers(sel.model, sel.scale)?,
            });
        }
        if !self.layers.is_empty() {
            suites.push(Suite {
                name: "custom".into(),
                scale: 1.0,
                layers: self.layers.clone(),
            });
        }
        Ok(suites)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub name: String,
    pub scale: f64,
    pub layers: Vec<LayerSpec>,
}

/// Headline numbers for one variant, as in the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cycles: u64,
    pub seconds: f64,
    pub ic: u64,
    pub ipc: f64,
    pub mem_type: u64,
    pub l1i_accesses: u64,
    pub l1d_accesses: u64,
    pub l1_overall: u64,
}

impl Metrics {
    pub fn from_stats(s: &RunStats, clock_hz: f64) -> Self {
        Metrics {
            cycles: s.cycles,
            seconds: s.cycles as f64 / clock_hz,
            ic: s.retired,
            ipc: s.ipc(),
            mem_type: s.mem_type_retired,
            l1i_accesses: s.l1i.accesses,
            l1d_accesses: s.l1d.accesses,
            l1_overall: s.l1_overall(),
        }
    }
}

/// Lower-is-better improvement in percent.
pub fn reduction(reference: f64, new: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        (reference - new) / reference * 100.0
    }
}

/// Higher-is-better improvement in percent, used for IPC.
pub fn gain(reference: f64, new: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        (new - reference) / reference * 100.0
    }
}

/// Percent improvement of `variant` over `over`. Positive is better in
/// every column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    pub variant: Variant,
    pub over: Variant,
    pub runtime: f64,
    pub ic: f64,
    pub ipc: f64,
    pub mem_type: f64,
    pub l1i_accesses: f64,
    pub l1d_accesses: f64,
    pub l1_overall: f64,
}

impl Enhancement {
    pub fn between(variant: Variant, new: &Metrics, over: Variant, reference: &Metrics) -> Self {
        let r = |a: u64, b: u64| reduction(a as f64, b as f64);
        Enhancement {
            variant,
            over,
            runtime: r(reference.cycles, new.cycles),
            ic: r(reference.ic, new.ic),
            ipc: gain(reference.ipc, new.ipc),
            mem_type: r(reference.mem_type, new.mem_type),
            l1i_accesses: r(reference.l1i_accesses, new.l1i_accesses),
            l1d_accesses: r(reference.l1d_accesses, new.l1d_accesses),
            l1_overall: r(reference.l1_overall, new.l1_overall),
        }
    }

    pub fn cells(&self) -> [(&'static str, f64); 7] {
        [
            ("runtime", self.runtime),
            ("ic", self.ic),
            ("ipc", self.ipc),
            ("mem_type", self.mem_type),
            ("l1i_accesses", self.l1i_accesses),
            ("l1d_accesses", self.l1d_accesses),
            ("l1_overall", self.l1_overall),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: Variant,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub name: String,
    pub spec: ConvSpec,
    pub groups: u32,
    pub macs: u64,
    pub results: Vec<VariantResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantTotals {
    pub variant: Variant,
    pub metrics: Metrics,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub scale: f64,
    pub layers: Vec<LayerReport>,
    pub totals: Vec<VariantTotals>,
    pub enhancement: Vec<Enhancement>,
}

impl SuiteReport {
    pub fn totals_for(&self, v: Variant) -> Option<&VariantTotals> {
        self.totals.iter().find(|t| t.variant == v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub clock_hz: f64,
    pub seed: u64,
    pub variants: Vec<Variant>,
    pub suites: Vec<SuiteReport>,
    /// Mean of the per-suite enhancement cells; empty for a single suite.
    pub overall: Vec<Enhancement>,
}

/// Reference/new pairs compared in every table.
fn comparisons(variants: &[Variant]) -> Vec<(Variant, Variant)> {
    let mut pairs = Vec::new();
    for over in [Variant::RV64F, Variant::Baseline] {
        for v in Variant::ALL {
            if v > over && variants.contains(&v) && variants.contains(&over) {
                pairs.push((v, over));
            }
        }
    }
    pairs
}

fn enhancement_rows(totals: &[VariantTotals], variants: &[Variant]) -> Vec<Enhancement> {
    comparisons(variants)
        .into_iter()
        .filter_map(|(v, over)| {
            let new = totals.iter().find(|t| t.variant == v)?;
            let reference = totals.iter().find(|t| t.variant == over)?;
            Some(Enhancement::between(v, &new.metrics, over, &reference.metrics))
        })
        .collect()
}

fn mean_enhancement(rows: &[&Enhancement]) -> Enhancement {
    let n = rows.len() as f64;
    let avg = |f: fn(&Enhancement) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    Enhancement {
        variant: rows[0].variant,
        over: rows[0].over,
        runtime: avg(|e| e.runtime),
        ic: avg(|e| e.ic),
        ipc: avg(|e| e.ipc),
        mem_type: avg(|e| e.mem_type),
        l1i_accesses: avg(|e| e.l1i_accesses),
        l1d_accesses: avg(|e| e.l1d_accesses),
        l1_overall: avg(|e| e.l1_overall),
    }
}

/// Simulate one program, checking values and counts.
fn run_job(
    job: &str,
    program: &ConvProgram,
    sim: &SimConfig,
    trace: &mut Option<&mut dyn io::Write>,
) -> Result<RunStats, BenchError> {
    let sim_err = |source| BenchError::Sim {
        job: job.to_string(),
        source,
    };
    let mut pipe = Pipeline::new(&program.image, &program.data(), sim).map_err(sim_err)?;
    if let Some(w) = trace.as_deref_mut() {
        writeln!(w, "# {job}")?;
    }
    while !pipe.state().halted {
        let ev = pipe.step().map_err(sim_err)?;
        if let Some(w) = trace.as_deref_mut() {
            if ev.cycle % TRACE_FLUSH_CYCLES == 0 || pipe.state().halted {
                for line in pipe.take_trace() {
                    writeln!(w, "{line}")?;
                }
            }
        }
    }
    let got = pipe
        .memory()
        .read_f32_slice(program.binding.output, program.spec.output_len())
        .map_err(|source| sim_err(SimError::Memory { pc: 0, source }))?;
    let expected = program.reference();
    if let Some(index) = (0..expected.len()).find(|&i| got[i] != expected[i]) {
        return Err(BenchError::OracleMismatch {
            job: job.to_string(),
            index,
            expected: expected[index],
            got: got[index],
        });
    }
    let stats = pipe.stats();
    let predicted = expected_counts(program.variant, &program.spec);
    if stats.retired_by_mnemonic != predicted.per_mnemonic {
        return Err(BenchError::CountMismatch {
            job: job.to_string(),
            expected: predicted.ic,
            got: stats.retired,
        });
    }
    Ok(stats)
}

/// Run every suite under every variant. Each (layer, group) gets its own
/// tensors, shared by all variants, and every run must reproduce the
/// reference output bit for bit.
pub fn run_benchmark(config: &RunConfig) -> Result<Report, BenchError> {
    run_benchmark_traced(config, None)
}

/// [`run_benchmark`] with per-cycle trace lines written to `trace` when the
/// configuration enables tracing.
pub fn run_benchmark_traced(
    config: &RunConfig,
    mut trace: Option<&mut dyn io::Write>,
) -> Result<Report, BenchError> {
    config.validate()?;
    let suites = config.suites()?;
    let sim = config.sim_config();
    if !sim.trace {
        trace = None;
    }

    let mut reports = Vec::new();
    for (si, suite) in suites.iter().enumerate() {
        let mut layers = Vec::new();
        for (li, layer) in suite.layers.iter().enumerate() {
            let mut results: Vec<VariantResult> = config
                .variants
                .iter()
                .map(|&variant| VariantResult {
                    variant,
                    stats: RunStats::default(),
                })
                .collect();
            for g in 0..layer.groups {
                let stream = ((si as u64) << 40) | ((li as u64) << 20) | g as u64;
                for r in results.iter_mut() {
                    let program = ConvProgram::random(r.variant, &layer.spec, config.seed, stream)?;
                    let job = format!("{}/{}[{g}]/{}", suite.name, layer.name, r.variant);
                    let stats = run_job(&job, &program, &sim, &mut trace)?;
                    r.stats.accumulate(&stats);
                }
            }
            layers.push(LayerReport {
                name: layer.name.clone(),
                spec: layer.spec,
                groups: layer.groups,
                macs: layer.macs(),
                results,
            });
        }
        let totals: Vec<VariantTotals> = config
            .variants
            .iter()
            .map(|&variant| {
                let mut stats = RunStats::default();
                for l in &layers {
                    if let Some(r) = l.results.iter().find(|r| r.variant == variant) {
                        stats.accumulate(&r.stats);
                    }
                }
                VariantTotals {
                    variant,
                    metrics: Metrics::from_stats(&stats, config.clock_hz),
                    stats,
                }
            })
            .collect();
        let enhancement = enhancement_rows(&totals, &config.variants);
        reports.push(SuiteReport {
            name: suite.name.clone(),
            scale: suite.scale,
            layers,
            totals,
            enhancement,
        });
    }

    let mut overall = Vec::new();
    if reports.len() > 1 {
        for (v, over) in comparisons(&config.variants) {
            let rows: Vec<&Enhancement> = reports
                .iter()
                .flat_map(|s| s.enhancement.iter())
                .filter(|e| e.variant == v && e.over == over)
                .collect();
            if !rows.is_empty() {
                overall.push(mean_enhancement(&rows));
            }
        }
    }
    Ok(Report {
        clock_hz: config.clock_hz,
        seed: config.seed,
        variants: config.variants.clone(),
        suites: reports,
        overall,
    })
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn pct(x: f64) -> String {
    format!("{x:.2} %")
}

fn enhancement_row(out: &mut String, e: &Enhancement) {
    let _ = writeln!(
        out,
        "| {} over {} | {} | {} | {} | {} | {} | {} | {} | {} |",
        e.variant,
        e.over,
        pct(e.runtime),
        pct(e.runtime),
        pct(e.ic),
        pct(e.ipc),
        pct(e.mem_type),
        pct(e.l1i_accesses),
        pct(e.l1d_accesses),
        pct(e.l1_overall),
    );
}

const TABLE_HEAD: &str = "| | runtime (cycles) | runtime (s) | IC | IPC | memtype instructions | L1I accesses | L1D accesses | L1 overall access |\n|---|---:|---:|---:|---:|---:|---:|---:|---:|\n";

impl Report {
    pub fn to_json(&self) -> Result<String, BenchError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# Performance comparison\n\nClock {} GHz, seed {}.\n",
            self.clock_hz / 1e9,
            self.seed
        );
        for s in &self.suites {
            let _ = writeln!(out, "## {} (scale {})\n", s.name, s.scale);
            out.push_str(TABLE_HEAD);
            for t in &s.totals {
                let m = &t.metrics;
                let _ = writeln!(
                    out,
                    "| {} | {} | {:.6} | {} | {:.3} | {} | {} | {} | {} |",
                    t.variant,
                    thousands(m.cycles),
                    m.seconds,
                    thousands(m.ic),
                    m.ipc,
                    thousands(m.mem_type),
                    thousands(m.l1i_accesses),
                    thousands(m.l1d_accesses),
                    thousands(m.l1_overall),
                );
            }
            for e in &s.enhancement {
                enhancement_row(&mut out, e);
            }
            let _ = writeln!(out, "\n### {} per layer (cycles)\n", s.name);
            let _ = write!(out, "| layer | groups | geometry | MACs |");
            for v in &self.variants {
                let _ = write!(out, " {v} |");
            }
            out.push_str("\n|---|---:|---|---:|");
            for _ in &self.variants {
                out.push_str("---:|");
            }
            out.push('\n');
            for l in &s.layers {
                let _ = write!(out, "| {} | {} | {} | {} |", l.name, l.groups, l.spec, thousands(l.macs));
                for r in &l.results {
                    let _ = write!(out, " {} |", thousands(r.stats.cycles));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        if !self.overall.is_empty() {
            out.push_str("## Overall (mean of suite enhancements)\n\n");
            out.push_str(TABLE_HEAD);
            for e in &self.overall {
                enhancement_row(&mut out, e);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("suite,layer,variant,metric,value\n");
        let mut row = |suite: &str, layer: &str, variant: &str, metric: &str, value: String| {
            let _ = writeln!(out, "{suite},{layer},{variant},{metric},{value}");
        };
        for s in &self.suites {
            for l in &s.layers {
                for r in &l.results {
                    let m = Metrics::from_stats(&r.stats, self.clock_hz);
                    metric_rows(&m, |k, v| row(&s.name, &l.name, r.variant.as_str(), k, v));
                }
            }
            for t in &s.totals {
                metric_rows(&t.metrics, |k, v| row(&s.name, "total", t.variant.as_str(), k, v));
            }
            for e in &s.enhancement {
                let who = format!("{} over {}", e.variant, e.over);
                for (k, v) in e.cells() {
                    row(&s.name, "enhancement", &who, k, format!("{v:.6}"));
                }
            }
        }
        for e in &self.overall {
            let who = format!("{} over {}", e.variant, e.over);
            for (k, v) in e.cells() {
                row("overall", "enhancement", &who, k, format!("{v:.6}"));
            }
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, BenchError> {
        Ok(match format {
            ReportFormat::Json => self.to_json()?,
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Markdown => self.to_markdown(),
        })
    }

    /// Every IPC in the report, per layer and per suite.
    pub fn all_ipcs(&self) -> Vec<(String, u64, u64, f64)> {
        let mut out = Vec::new();
        for s in &self.suites {
            for l in &s.layers {
                for r in &l.results {
                    let label = format!("{}/{}/{}", s.name, l.name, r.variant);
                    out.push((label, r.stats.retired, r.stats.cycles, r.stats.ipc()));
                }
            }
            for t in &s.totals {
                let label = format!("{}/total/{}", s.name, t.variant);
                out.push((label, t.metrics.ic, t.metrics.cycles, t.metrics.ipc));
            }
        }
        out
    }
}

fn metric_rows(m: &Metrics, mut emit: impl FnMut(&str, String)) {
    emit("cycles", m.cycles.to_string());
    emit("seconds", format!("{:.9}", m.seconds));
    emit("ic", m.ic.to_string());
    emit("ipc", format!("{:.9}", m.ipc));
    emit("mem_type", m.mem_type.to_string());
    emit("l1i_accesses", m.l1i_accesses.to_string());
    emit("l1d_accesses", m.l1d_accesses.to_string());
    emit("l1_overall", m.l1_overall.to_string());
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> RunConfig {
        RunConfig {
            layers: vec![
                LayerSpec {
                    name: "a".into(),
                    spec: ConvSpec::new(2, 2, 5, 5, 3, 3, 1),
                    groups: 1,
                },
                LayerSpec {
                    name: "dw".into(),
                    spec: ConvSpec::new(1, 1, 6, 6, 3, 3, 2),
                    groups: 3,
                },
            ],
            ..RunConfig::default()
        }
    }

    #[test]
    fn enhancement_formula() {
        assert!((reduction(0.066, 0.032) - 51.515).abs() < 1e-3);
        assert_eq!(reduction(5.0, 5.0), 0.0);
        assert!((gain(0.666, 0.847) - 27.18).abs() < 1e-2);
    }

    #[test]
    fn empty_layer_list_is_a_config_error() {
        let cfg = RunConfig::default();
        assert!(matches!(run_benchmark(&cfg), Err(BenchError::Config(_))));
        let cfg = RunConfig {
            variants: vec![],
            ..tiny_config()
        };
        assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"layerz": []}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"models": [{"model": "lenet"}]}"#).unwrap();
        assert_eq!(cfg.models[0].scale, 1.0);
        assert_eq!(cfg.variants.len(), 3);
    }

    #[test]
    fn tiny_suite_report() {
        let report = run_benchmark(&tiny_config()).unwrap();
        let s = &report.suites[0];
        assert_eq!(s.layers.len(), 2);
        assert_eq!(s.enhancement.len(), 3);
        let f = s.totals_for(Variant::RV64F).unwrap().metrics;
        let r = s.totals_for(Variant::RV64R).unwrap().metrics;
        assert!(r.cycles < f.cycles);
        assert!(r.mem_type < f.mem_type);
        let self_cmp = Enhancement::between(Variant::RV64R, &r, Variant::RV64R, &r);
        assert!(self_cmp.cells().iter().all(|&(_, v)| v == 0.0));
        assert!(report.overall.is_empty());

        let again = run_benchmark(&tiny_config()).unwrap();
        assert_eq!(report.to_json().unwrap(), again.to_json().unwrap());
        let json = report.to_json().unwrap();
        assert_eq!(Report::from_json(&json).unwrap().to_json().unwrap(), json);
        let csv = report.to_csv();
        assert!(csv.lines().all(|l| l.split(',').count() == 5));
        let md = report.to_markdown();
        assert!(md.contains("| RV64R over RV64F |"));
    }
}
