//! Experiment harness.
//!
//! Each experiment is a pure function of an [`ExperimentConfig`] and returns
//! plotting-ready tables. Rows come out in a fixed order (pool, then
//! configuration, then scheme) no matter how the work was scheduled.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{empirical_ci, margin_of_error, required_sample_size, sampled_means};
use crate::population::{
    generate_synthetic, load_pool_file, pool_summary, true_means, RegionPool, SyntheticSpec,
};
use crate::samplers::{ranking_accuracy, Scheme};
use crate::seed::{derive_seed, Purpose};
use crate::subsampling::{
    candidate_means, generate_candidates, select_from_means, SelectionCriterion,
};

pub const TOOL_NAME: &str = "regionsel";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PoolSource {
    /// CSV pool file; relative paths resolve against the config file's directory.
    Csv { path: PathBuf },
    Synthetic {
        #[serde(flatten)]
        spec: SyntheticSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Srs,
    Rss,
}

fn default_pools() -> Vec<PoolSource> {
    vec![PoolSource::Synthetic {
        spec: SyntheticSpec::default_suite(),
    }]
}
fn default_sample_size() -> usize {
    30
}
fn default_trials() -> usize {
    1_000
}
fn default_rss_cycles() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_schemes() -> Vec<SchemeKind> {
    vec![SchemeKind::Srs, SchemeKind::Rss]
}
fn default_train() -> Vec<usize> {
    vec![0, 1, 2]
}
fn default_level() -> f64 {
    0.95
}
fn default_bins() -> usize {
    20
}

/// JSON experiment description. Only `master_seed` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_pools")]
    pub pools: Vec<PoolSource>,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeKind>,
    /// Cycle counts compared in the interval experiment; the first is used
    /// wherever a single ranked set scheme is needed.
    #[serde(default = "default_rss_cycles")]
    pub rss_cycles: Vec<usize>,
    /// Ranks ranked-set units and drives baseline-only selection.
    #[serde(default)]
    pub baseline_config: usize,
    /// Configuration the sampled means are evaluated on; defaults to the last one.
    #[serde(default)]
    pub target_config: Option<usize>,
    #[serde(default = "default_train")]
    pub train_configs: Vec<usize>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn new(master_seed: u64) -> Self {
        Self {
            pools: default_pools(),
            sample_size: default_sample_size(),
            trials: default_trials(),
            schemes: default_schemes(),
            rss_cycles: default_rss_cycles(),
            baseline_config: 0,
            target_config: None,
            train_configs: default_train(),
            level: default_level(),
            histogram_bins: default_bins(),
            master_seed,
        }
    }

    /// SHA-256 of the config's JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    fn rss_scheme(&self, cycles: usize) -> Result<Scheme> {
        if cycles == 0 || !self.sample_size.is_multiple_of(cycles) {
            return Err(Error::invalid(format!(
                "sample size {} is not a multiple of rss cycle count {cycles}",
                self.sample_size
            )));
        }
        Ok(Scheme::Rss {
            cycles,
            set_size: self.sample_size / cycles,
            ranking_config: self.baseline_config,
        })
    }

    fn scheme(&self, kind: SchemeKind) -> Result<Scheme> {
        match kind {
            SchemeKind::Srs => Ok(Scheme::Srs {
                n: self.sample_size,
            }),
            SchemeKind::Rss => self.rss_scheme(*self.rss_cycles.first().unwrap_or(&1)),
        }
    }

    fn target(&self, pool: &RegionPool) -> usize {
        self.target_config.unwrap_or(pool.config_count() - 1)
    }

    fn validate_for(&self, pool: &RegionPool) -> Result<()> {
        pool.check_config(self.baseline_config)?;
        pool.check_config(self.target(pool))?;
        for &c in &self.train_configs {
            pool.check_config(c)?;
        }
        if self.train_configs.is_empty() {
            return Err(Error::invalid("train_configs must not be empty"));
        }
        if self.trials == 0 || self.sample_size == 0 {
            return Err(Error::invalid("trials and sample_size must be positive"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid("level must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// A loaded pool plus where it came from.
#[derive(Debug, Clone)]
pub struct LoadedPool {
    pub pool: RegionPool,
    pub origin: String,
}

/// Loads every pool named in `cfg`. Synthetic pool `i` is generated with
/// `derive_seed(master_seed, Purpose::Population, i)`.
pub fn load_pools(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Vec<LoadedPool>> {
    if cfg.pools.is_empty() {
        return Err(Error::invalid("config lists no pools"));
    }
    cfg.pools
        .iter()
        .enumerate()
        .map(|(i, src)| match src {
            PoolSource::Csv { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                Ok(LoadedPool {
                    pool: load_pool_file(&full)?,
                    origin: format!("csv:{}", path.display()),
                })
            }
            PoolSource::Synthetic { spec } => {
                let seed = derive_seed(cfg.master_seed, Purpose::Population, i as u64);
                Ok(LoadedPool {
                    pool: generate_synthetic(spec, seed)?,
                    origin: format!("synthetic:seed={seed}"),
                })
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}
impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text(String::new()), Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// CSV with LF endings; `header_lines` are emitted first as `# ` comments.
    pub fn to_csv(&self, header_lines: &[String]) -> Result<String> {
        let mut out = String::new();
        for line in header_lines {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(ToString::to_string))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        out.push_str(&String::from_utf8(bytes).expect("utf-8"));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolProvenance {
    pub app_label: String,
    pub origin: String,
    pub regions: usize,
    pub configs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub pools: Vec<PoolProvenance>,
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("tool={} version={}", self.tool, self.version),
            format!("experiment={}", self.experiment),
            format!("master_seed={}", self.master_seed),
            format!("config_sha256={}", self.config_sha256),
        ];
        for p in &self.pools {
            lines.push(format!(
                "pool={} origin={} regions={} configs={}",
                p.app_label, p.origin, p.regions, p.configs
            ));
        }
        lines.extend(self.notes.iter().map(|n| format!("note={n}")));
        lines
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub provenance: Provenance,
    pub tables: Vec<Table>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// `(file name, contents)` for every table plus the combined JSON report.
    pub fn files(&self) -> Result<Vec<(String, String)>> {
        let header = self.provenance.header_lines();
        let mut files = Vec::new();
        for t in &self.tables {
            files.push((format!("{}.csv", t.name), t.to_csv(&header)?));
        }
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        files.push((format!("{}.json", self.provenance.experiment), json));
        Ok(files)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    /// Standard deviation against mean, per pool and configuration.
    Fig1,
    /// Distributions of sampled means.
    Fig6,
    /// Analytical and empirical interval widths.
    Fig7,
    /// Ranking accuracy of ranked set sampling across configurations.
    Fig8,
    /// Single draw against repeated subsampling.
    Fig10,
    /// Selection criteria compared on held-out configurations.
    Fig12,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::Fig1,
        ExperimentName::Fig6,
        ExperimentName::Fig7,
        ExperimentName::Fig8,
        ExperimentName::Fig10,
        ExperimentName::Fig12,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Fig1 => "fig1",
            ExperimentName::Fig6 => "fig6",
            ExperimentName::Fig7 => "fig7",
            ExperimentName::Fig8 => "fig8",
            ExperimentName::Fig10 => "fig10",
            ExperimentName::Fig12 => "fig12",
        }
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown experiment `{s}` (expected fig1, fig6, fig7, fig8, fig10 or fig12)"
                ))
            })
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Loads the pools and runs one experiment.
pub fn run_experiment(
    name: ExperimentName,
    cfg: &ExperimentConfig,
    base_dir: &Path,
) -> Result<ExperimentOutput> {
    let pools = load_pools(cfg, base_dir)?;
    run_on_pools(name, cfg, &pools)
}

pub fn run_on_pools(
    name: ExperimentName,
    cfg: &ExperimentConfig,
    pools: &[LoadedPool],
) -> Result<ExperimentOutput> {
    let plain: Vec<RegionPool> = pools.iter().map(|p| p.pool.clone()).collect();
    if name != ExperimentName::Fig1 {
        for p in &plain {
            cfg.validate_for(p)?;
        }
    }
    let tables = match name {
        ExperimentName::Fig1 => vec![exp_std_vs_mean(&plain)],
        ExperimentName::Fig6 => exp_sampling_distribution(cfg, &plain)?,
        ExperimentName::Fig7 => vec![exp_ci_comparison(cfg, &plain)?],
        ExperimentName::Fig8 => vec![exp_ranking_accuracy(cfg, &plain)?],
        ExperimentName::Fig10 => vec![exp_error_comparison(cfg, &plain)?],
        ExperimentName::Fig12 => vec![exp_criteria_comparison(cfg, &plain)?],
    };
    let mut notes = Vec::new();
    if pools.iter().any(|p| p.origin.starts_with("synthetic")) {
        notes.push("synthetic pools stand in for measured simulator configurations".to_owned());
    }
    Ok(ExperimentOutput {
        provenance: Provenance {
            tool: TOOL_NAME.to_owned(),
            version: TOOL_VERSION.to_owned(),
            experiment: name.as_str().to_owned(),
            master_seed: cfg.master_seed,
            config_sha256: cfg.digest(),
            pools: pools
                .iter()
                .map(|p| PoolProvenance {
                    app_label: p.pool.app_label().to_owned(),
                    origin: p.origin.clone(),
                    regions: p.pool.region_count(),
                    configs: p.pool.config_count(),
                })
                .collect(),
            notes,
        },
        tables,
    })
}

fn app(pool: &RegionPool) -> Cell {
    Cell::Text(pool.app_label().to_owned())
}

/// `(app, config, label, mean, std, relative_std)` for every pool and configuration.
pub fn exp_std_vs_mean(pools: &[RegionPool]) -> Table {
    let mut t = Table::new(
        "fig1_std_vs_mean",
        &["app", "config", "label", "mean", "std", "relative_std"],
    );
    for pool in pools {
        for s in pool_summary(pool).configs {
            t.push(vec![
                app(pool),
                s.config.into(),
                s.label.clone().into(),
                s.true_mean.into(),
                s.true_std.into(),
                s.true_std.map(|sd| sd / s.true_mean).into(),
            ]);
        }
    }
    t
}

fn interval_seed(cfg: &ExperimentConfig, pool_index: usize) -> u64 {
    derive_seed(cfg.master_seed, Purpose::Interval, pool_index as u64)
}

fn scheme_label(kind: SchemeKind) -> &'static str {
    match kind {
        SchemeKind::Srs => "srs",
        SchemeKind::Rss => "rss",
    }
}

/// Sampled means at the target configuration (ranked set units ranked on the
/// baseline configuration), plus a shared-range histogram per pool.
pub fn exp_sampling_distribution(
    cfg: &ExperimentConfig,
    pools: &[RegionPool],
) -> Result<Vec<Table>> {
    let mut means_t = Table::new("fig6_sampled_means", &["app", "scheme", "trial", "mean"]);
    let mut hist_t = Table::new(
        "fig6_histogram",
        &["app", "scheme", "bin", "lower", "upper", "count"],
    );
    let bins = cfg.histogram_bins.max(1);
    for (p, pool) in pools.iter().enumerate() {
        let target = cfg.target(pool);
        let mut per_scheme = Vec::new();
        for &kind in &cfg.schemes {
            let scheme = cfg.scheme(kind)?;
            let means = sampled_means(pool, &scheme, target, cfg.trials, interval_seed(cfg, p))?;
            per_scheme.push((kind, means));
        }
        let lo = per_scheme
            .iter()
            .flat_map(|(_, m)| m.iter().copied())
            .fold(f64::INFINITY, f64::min);
        let hi = per_scheme
            .iter()
            .flat_map(|(_, m)| m.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        for (kind, means) in &per_scheme {
            for (trial, &m) in means.iter().enumerate() {
                means_t.push(vec![
                    app(pool),
                    scheme_label(*kind).into(),
                    trial.into(),
                    m.into(),
                ]);
            }
            let mut counts = vec![0usize; bins];
            for &m in means {
                let b = if width > 0.0 {
                    (((m - lo) / width) as usize).min(bins - 1)
                } else {
                    0
                };
                counts[b] += 1;
            }
            for (b, &count) in counts.iter().enumerate() {
                let lower = lo + width * b as f64;
                let upper = if b + 1 == bins {
                    hi
                } else {
                    lo + width * (b + 1) as f64
                };
                hist_t.push(vec![
                    app(pool),
                    scheme_label(*kind).into(),
                    b.into(),
                    lower.into(),
                    upper.into(),
                    count.into(),
                ]);
            }
        }
    }
    Ok(vec![means_t, hist_t])
}

/// Relative interval half-widths at the target configuration:
/// `srs-analytical`, `srs-empirical`, then `rss-m<M>` for each configured cycle count.
pub fn exp_ci_comparison(cfg: &ExperimentConfig, pools: &[RegionPool]) -> Result<Table> {
    let mut t = Table::new(
        "fig7_ci_comparison",
        &[
            "app",
            "config",
            "scheme",
            "half_width",
            "relative_half_width",
        ],
    );
    for (p, pool) in pools.iter().enumerate() {
        let target = cfg.target(pool);
        let summary = &pool_summary(pool).configs[target];
        let std = summary.true_std.unwrap_or(0.0);
        let analytical = margin_of_error(std, cfg.sample_size, cfg.level)?;
        t.push(vec![
            app(pool),
            target.into(),
            "srs-analytical".into(),
            analytical.into(),
            (analytical / summary.true_mean).into(),
        ]);
        let seed = interval_seed(cfg, p);
        let srs = empirical_ci(
            pool,
            &Scheme::Srs { n: cfg.sample_size },
            target,
            cfg.trials,
            cfg.level,
            seed,
        )?;
        t.push(vec![
            app(pool),
            target.into(),
            "srs-empirical".into(),
            srs.half_width.into(),
            srs.relative_half_width.into(),
        ]);
        for &m in &cfg.rss_cycles {
            let ci = empirical_ci(
                pool,
                &cfg.rss_scheme(m)?,
                target,
                cfg.trials,
                cfg.level,
                seed,
            )?;
            t.push(vec![
                app(pool),
                target.into(),
                format!("rss-m{m}").into(),
                ci.half_width.into(),
                ci.relative_half_width.into(),
            ]);
        }
    }
    Ok(t)
}

/// True within-set rank of every selected unit, for one `M = 1, K = n` ranked
/// set draw ranked on the baseline configuration, under every configuration.
pub fn exp_ranking_accuracy(cfg: &ExperimentConfig, pools: &[RegionPool]) -> Result<Table> {
    let mut t = Table::new(
        "fig8_ranking_accuracy",
        &["app", "eval_config", "set", "position", "true_rank"],
    );
    for (p, pool) in pools.iter().enumerate() {
        let scheme = cfg.rss_scheme(1)?;
        let seed = derive_seed(interval_seed(cfg, p), Purpose::Trial, 0);
        let draw = scheme.draw(pool, seed)?;
        for c in 0..pool.config_count() {
            for point in ranking_accuracy(&draw, pool, c)? {
                t.push(vec![
                    app(pool),
                    c.into(),
                    point.set.into(),
                    point.position.into(),
                    point.true_rank.into(),
                ]);
            }
        }
    }
    Ok(t)
}

fn candidate_seed(cfg: &ExperimentConfig, kind: SchemeKind, pool_index: usize) -> u64 {
    let purpose = match kind {
        SchemeKind::Srs => Purpose::SrsCandidates,
        SchemeKind::Rss => Purpose::RssCandidates,
    };
    derive_seed(cfg.master_seed, purpose, pool_index as u64)
}

/// Per-scheme candidate mean vectors for one pool, in `cfg.schemes` order.
fn candidate_mean_sets(
    cfg: &ExperimentConfig,
    pool: &RegionPool,
    pool_index: usize,
) -> Result<Vec<(SchemeKind, Vec<Vec<f64>>)>> {
    cfg.schemes
        .iter()
        .map(|&kind| {
            let set = generate_candidates(
                pool,
                &cfg.scheme(kind)?,
                cfg.trials,
                candidate_seed(cfg, kind, pool_index),
            )?;
            Ok((kind, candidate_means(pool, &set)))
        })
        .collect()
}

/// Relative error per configuration for a single draw (`<scheme>-once`,
/// candidate 0) and for the baseline-mean winner (`<scheme>-repeated`).
pub fn exp_error_comparison(cfg: &ExperimentConfig, pools: &[RegionPool]) -> Result<Table> {
    let mut t = Table::new(
        "fig10_error_comparison",
        &["app", "config", "role", "scheme", "relative_error"],
    );
    for (p, pool) in pools.iter().enumerate() {
        let truth = true_means(pool);
        let sets = candidate_mean_sets(cfg, pool, p)?;
        let criterion = SelectionCriterion::BaselineMean {
            baseline_config: cfg.baseline_config,
        };
        let mut variants = Vec::new();
        for (kind, means) in &sets {
            let winner = select_from_means(&truth, means, &criterion)?.winner_index;
            variants.push((format!("{}-once", scheme_label(*kind)), &means[0]));
            variants.push((format!("{}-repeated", scheme_label(*kind)), &means[winner]));
        }
        for c in 0..pool.config_count() {
            let role = if c == cfg.baseline_config {
                "train"
            } else {
                "test"
            };
            for (label, m) in &variants {
                let err = crate::estimators::relative_error(m[c], truth[c])?;
                t.push(vec![
                    app(pool),
                    c.into(),
                    role.into(),
                    label.clone().into(),
                    err.into(),
                ]);
            }
        }
    }
    Ok(t)
}

/// Held-out relative errors (configurations outside `train_configs`) of the
/// winners under each criterion and scheme. The baseline criterion selects on
/// `baseline_config` alone; correlation is skipped with fewer than two
/// training configurations. Pools with no held-out configuration add no rows.
pub fn exp_criteria_comparison(cfg: &ExperimentConfig, pools: &[RegionPool]) -> Result<Table> {
    let mut t = Table::new(
        "fig12_criteria_comparison",
        &[
            "app",
            "test_config",
            "criterion",
            "scheme",
            "relative_error",
        ],
    );
    for (p, pool) in pools.iter().enumerate() {
        let tests: Vec<usize> = (0..pool.config_count())
            .filter(|c| !cfg.train_configs.contains(c))
            .collect();
        if tests.is_empty() {
            continue;
        }
        let truth = true_means(pool);
        let sets = candidate_mean_sets(cfg, pool, p)?;
        let mut criteria = vec![
            SelectionCriterion::BaselineMean {
                baseline_config: cfg.baseline_config,
            },
            SelectionCriterion::ChebyshevRelative {
                training_configs: cfg.train_configs.clone(),
            },
        ];
        if cfg.train_configs.len() >= 2 {
            criteria.push(SelectionCriterion::CorrelationMax {
                training_configs: cfg.train_configs.clone(),
            });
        }
        for &c in &tests {
            for criterion in &criteria {
                for (kind, means) in &sets {
                    let winner = select_from_means(&truth, means, criterion)?.winner_index;
                    let err = crate::estimators::relative_error(means[winner][c], truth[c])?;
                    t.push(vec![
                        app(pool),
                        c.into(),
                        criterion.name().into(),
                        scheme_label(*kind).into(),
                        err.into(),
                    ]);
                }
            }
        }
    }
    Ok(t)
}

/// Per-configuration summary with the sample size needed for a target
/// relative margin of error.
pub fn summary_table(pool: &RegionPool, target_relative_me: f64, level: f64) -> Result<Table> {
    let mut t = Table::new(
        "summary",
        &[
            "config",
            "label",
            "regions",
            "mean",
            "std",
            "relative_std",
            "required_n",
        ],
    );
    for s in pool_summary(pool).configs {
        let rel = s.true_std.map(|sd| sd / s.true_mean);
        let required = match rel {
            Some(r) => Cell::Int(required_sample_size(r, target_relative_me, level)? as i64),
            None => Cell::Text(String::new()),
        };
        t.push(vec![
            s.config.into(),
            s.label.clone().into(),
            s.count.into(),
            s.true_mean.into(),
            s.true_std.into(),
            rel.into(),
            required,
        ]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(seed: u64) -> ExperimentConfig {
        let spec = SyntheticSpec {
            region_count: 400,
            ..SyntheticSpec::default_suite()
        };
        ExperimentConfig {
            pools: vec![PoolSource::Synthetic { spec }],
            sample_size: 12,
            trials: 200,
            rss_cycles: vec![1, 2, 3],
            ..ExperimentConfig::new(seed)
        }
    }

    fn col(t: &Table, name: &str) -> Vec<f64> {
        let i = t.column_index(name).unwrap();
        t.rows
            .iter()
            .map(|r| match &r[i] {
                Cell::Float(v) => *v,
                Cell::Int(v) => *v as f64,
                Cell::Text(s) => panic!("text cell {s}"),
            })
            .collect()
    }

    fn constant_pool(c: usize) -> RegionPool {
        let labels = (0..c).map(|i| format!("c{i}")).collect();
        RegionPool::new("flat", labels, vec![vec![1.5; c]; 200]).unwrap()
    }

    #[test]
    fn config_defaults_from_json() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"master_seed": 4}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::new(4));
        assert!(
            serde_json::from_str::<ExperimentConfig>(r#"{"master_seed": 4, "bogus": 1}"#).is_err()
        );
        assert!(serde_json::from_str::<ExperimentConfig>("{}").is_err());
        let with_csv: ExperimentConfig = serde_json::from_str(
            r#"{"master_seed": 1, "pools": [{"source": "csv", "path": "a.csv"}]}"#,
        )
        .unwrap();
        assert_eq!(
            with_csv.pools,
            vec![PoolSource::Csv {
                path: "a.csv".into()
            }]
        );
    }

    #[test]
    fn fig1_rows() {
        let pool = RegionPool::new(
            "two",
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        )
        .unwrap();
        let t = exp_std_vs_mean(&[pool, constant_pool(1)]);
        assert_eq!(col(&t, "mean"), vec![2.0, 3.0, 1.5]);
        let std = col(&t, "std");
        assert!((std[0] - 2f64.sqrt()).abs() < 1e-15 && (std[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(std[2], 0.0);
    }

    #[test]
    fn fig1_slope_recovers_generator() {
        let spec = SyntheticSpec {
            region_count: 10_000,
            ..SyntheticSpec::default_suite()
        };
        let pool = generate_synthetic(&spec, 21).unwrap();
        let t = exp_std_vs_mean(&[pool]);
        let (x, y) = (col(&t, "mean"), col(&t, "std"));
        let (mx, my) = (crate::stats::mean(&x), crate::stats::mean(&y));
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        assert!((slope - 0.3).abs() < 0.03, "slope {slope}");
    }

    #[test]
    fn degenerate_pool_gives_zero_widths_and_errors() {
        let cfg = ExperimentConfig {
            sample_size: 6,
            trials: 100,
            ..ExperimentConfig::new(3)
        };
        let pools = vec![LoadedPool {
            pool: constant_pool(4),
            origin: "test".into(),
        }];
        let fig7 = run_on_pools(ExperimentName::Fig7, &cfg, &pools).unwrap();
        assert!(col(&fig7.tables[0], "relative_half_width")
            .iter()
            .all(|&w| w == 0.0));
        let fig10 = run_on_pools(ExperimentName::Fig10, &cfg, &pools).unwrap();
        assert!(col(&fig10.tables[0], "relative_error")
            .iter()
            .all(|&e| e == 0.0));
        let fig6 = run_on_pools(ExperimentName::Fig6, &cfg, &pools).unwrap();
        let means = col(fig6.table("fig6_sampled_means").unwrap(), "mean");
        assert!(means.iter().all(|&m| m == 1.5));
    }

    #[test]
    fn single_config_pool_has_no_criteria_rows() {
        let cfg = ExperimentConfig {
            sample_size: 4,
            trials: 10,
            train_configs: vec![0],
            ..ExperimentConfig::new(3)
        };
        let t = exp_criteria_comparison(&cfg, &[constant_pool(1)]).unwrap();
        assert!(t.rows.is_empty());
    }

    #[test]
    fn repeated_never_worse_than_once_on_baseline() {
        let cfg = small_cfg(8);
        let out = run_experiment(ExperimentName::Fig10, &cfg, Path::new(".")).unwrap();
        let t = &out.tables[0];
        let err = col(t, "relative_error");
        // rows: config-major, schemes ordered srs-once, srs-repeated, rss-once, rss-repeated
        assert!(err[1] <= err[0]);
        assert!(err[3] <= err[2]);
    }

    #[test]
    fn chebyshev_on_one_config_matches_baseline_column() {
        let cfg = ExperimentConfig {
            train_configs: vec![0],
            ..small_cfg(5)
        };
        let t = run_experiment(ExperimentName::Fig12, &cfg, Path::new("."))
            .unwrap()
            .tables
            .remove(0);
        let crit = t.column_index("criterion").unwrap();
        let err = col(&t, "relative_error");
        let pick = |name: &str| -> Vec<f64> {
            t.rows
                .iter()
                .zip(&err)
                .filter(|(r, _)| r[crit] == Cell::from(name))
                .map(|(_, e)| *e)
                .collect()
        };
        assert!(!pick("baseline").is_empty());
        assert_eq!(pick("baseline"), pick("chebyshev"));
        assert!(pick("correlation").is_empty());
    }

    #[test]
    fn rss_iqr_is_tighter_than_srs() {
        let cfg = ExperimentConfig {
            trials: 1_000,
            pools: vec![PoolSource::Synthetic {
                spec: SyntheticSpec::default_suite(),
            }],
            sample_size: 30,
            ..ExperimentConfig::new(17)
        };
        let out = run_experiment(ExperimentName::Fig6, &cfg, Path::new(".")).unwrap();
        let t = out.table("fig6_sampled_means").unwrap();
        let scheme = t.column_index("scheme").unwrap();
        let means = col(t, "mean");
        let iqr = |name: &str| {
            let mut v: Vec<f64> = t
                .rows
                .iter()
                .zip(&means)
                .filter(|(r, _)| r[scheme] == Cell::from(name))
                .map(|(_, m)| *m)
                .collect();
            v.sort_by(f64::total_cmp);
            crate::stats::percentile_sorted(&v, 0.75) - crate::stats::percentile_sorted(&v, 0.25)
        };
        assert!(
            iqr("rss") < iqr("srs"),
            "rss {} srs {}",
            iqr("rss"),
            iqr("srs")
        );
        let hist = out.table("fig6_histogram").unwrap();
        assert_eq!(col(hist, "count").iter().sum::<f64>(), 2_000.0);
    }

    #[test]
    fn fig8_identity_on_ranking_config() {
        let out = run_experiment(ExperimentName::Fig8, &small_cfg(2), Path::new(".")).unwrap();
        let t = &out.tables[0];
        let (cfgc, pos, rank) = (
            col(t, "eval_config"),
            col(t, "position"),
            col(t, "true_rank"),
        );
        for i in 0..t.rows.len() {
            if cfgc[i] == 0.0 {
                assert_eq!(pos[i], rank[i]);
            }
        }
        assert_eq!(t.rows.len(), 7 * 12);
    }

    #[test]
    fn outputs_carry_provenance_and_are_reproducible() {
        let cfg = small_cfg(99);
        let a = run_experiment(ExperimentName::Fig7, &cfg, Path::new(".")).unwrap();
        let b = run_experiment(ExperimentName::Fig7, &cfg, Path::new(".")).unwrap();
        assert_eq!(a.files().unwrap(), b.files().unwrap());
        let (name, csv) = &a.files().unwrap()[0];
        assert_eq!(name, "fig7_ci_comparison.csv");
        assert!(csv.starts_with("# tool=regionsel"));
        assert!(csv.contains("# master_seed=99\n"));
        assert!(csv.contains(&format!("# config_sha256={}", cfg.digest())));
        assert!(csv.contains("note=synthetic pools"));
    }

    #[test]
    fn infeasible_settings_are_reported() {
        let cfg = ExperimentConfig {
            sample_size: 10,
            rss_cycles: vec![3],
            ..small_cfg(1)
        };
        assert!(run_experiment(ExperimentName::Fig7, &cfg, Path::new(".")).is_err());
        let cfg = ExperimentConfig {
            target_config: Some(9),
            ..small_cfg(1)
        };
        assert!(run_experiment(ExperimentName::Fig6, &cfg, Path::new(".")).is_err());
        assert!("fig2".parse::<ExperimentName>().is_err());
        assert_eq!(
            "fig12".parse::<ExperimentName>().unwrap(),
            ExperimentName::Fig12
        );
    }

    #[test]
    fn summary_required_n() {
        let pool =
            RegionPool::new("p", vec!["a".into()], vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let t = summary_table(&pool, 0.03, 0.95).unwrap();
        // rel std 0.5 -> ceil((1.959964 * 0.5 / 0.03)^2) = ceil(1067.03) = 1068
        assert_eq!(t.rows[0][6], Cell::Int(1068));
    }
}
