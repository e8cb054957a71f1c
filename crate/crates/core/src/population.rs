//! Region pools: the measured (or synthetic) population that sampling draws from.
//!
//! A pool is an `R x C` matrix of CPI values, one row per simulation region and
//! one column per simulator configuration. Every region covers the same number
//! of instructions, so the whole-application CPI of a configuration is the
//! arithmetic mean of its column.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::stats;

pub const DEFAULT_INSTRUCTIONS_PER_REGION: u64 = 1_000_000;
pub const DEFAULT_FLOOR_FRACTION: f64 = 0.05;

/// Immutable after construction; share freely between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPool {
    app_label: String,
    config_labels: Vec<String>,
    region_ids: Vec<String>,
    /// Row-major, `region_count * config_count`.
    values: Vec<f64>,
    instructions_per_region: u64,
}

impl RegionPool {
    /// Builds a pool from per-region rows. Region ids default to `r0, r1, ...`.
    pub fn new(
        app_label: impl Into<String>,
        config_labels: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        Self::with_region_ids(app_label, config_labels, ids, rows)
    }

    pub fn with_region_ids(
        app_label: impl Into<String>,
        config_labels: Vec<String>,
        region_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let cols = config_labels.len();
        if cols == 0 {
            return Err(Error::invalid("a pool needs at least one configuration"));
        }
        if rows.is_empty() {
            return Err(Error::invalid("a pool needs at least one region"));
        }
        if region_ids.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} region ids for {} rows",
                region_ids.len(),
                rows.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::invalid(format!(
                    "region {r} has {} values, expected {cols}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(format!(
                        "region {r}, configuration {c}: CPI must be finite and positive, got {v}"
                    )));
                }
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            app_label: app_label.into(),
            config_labels,
            region_ids,
            values,
            instructions_per_region: DEFAULT_INSTRUCTIONS_PER_REGION,
        })
    }

    pub fn with_instructions_per_region(mut self, instructions: u64) -> Result<Self> {
        if instructions == 0 {
            return Err(Error::invalid("instructions per region must be positive"));
        }
        self.instructions_per_region = instructions;
        Ok(self)
    }

    pub fn app_label(&self) -> &str {
        &self.app_label
    }

    pub fn config_labels(&self) -> &[String] {
        &self.config_labels
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn region_count(&self) -> usize {
        self.region_ids.len()
    }

    pub fn config_count(&self) -> usize {
        self.config_labels.len()
    }

    pub fn instructions_per_region(&self) -> u64 {
        self.instructions_per_region
    }

    #[inline]
    pub fn value(&self, region: usize, config: usize) -> f64 {
        self.values[region * self.config_count() + config]
    }

    pub fn row(&self, region: usize) -> &[f64] {
        let c = self.config_count();
        &self.values[region * c..(region + 1) * c]
    }

    pub fn column(&self, config: usize) -> Vec<f64> {
        (0..self.region_count())
            .map(|r| self.value(r, config))
            .collect()
    }

    pub fn check_config(&self, config: usize) -> Result<()> {
        if config < self.config_count() {
            Ok(())
        } else {
            Err(Error::ConfigOutOfRange {
                index: config,
                count: self.config_count(),
            })
        }
    }

    /// Mean CPI over `regions` for one configuration.
    pub fn subset_mean(&self, regions: &[usize], config: usize) -> f64 {
        regions.iter().map(|&r| self.value(r, config)).sum::<f64>() / regions.len() as f64
    }

    /// Every value multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolFormat {
    /// `region_id,<config labels...>` header followed by one row per region.
    #[default]
    Csv,
}

/// Reads a pool. Row order defines the region index; lines starting with `#` are ignored.
pub fn load_pool<R: Read>(source: R, format: PoolFormat, app_label: &str) -> Result<RegionPool> {
    match format {
        PoolFormat::Csv => read_csv(source, app_label),
    }
}

/// Loads a CSV pool; the file stem becomes the application label.
pub fn load_pool_file(path: &Path) -> Result<RegionPool> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pool".to_owned());
    let file = File::open(path)?;
    load_pool(BufReader::new(file), PoolFormat::Csv, &label)
}

fn read_csv<R: Read>(source: R, app_label: &str) -> Result<RegionPool> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "empty input; expected header `region_id,<config labels>`".into(),
            })
        }
    };
    let hline = header.position().map_or(1, |p| p.line());
    if header.get(0) != Some("region_id") {
        return Err(Error::Parse {
            line: hline,
            column: 1,
            message: format!(
                "first header cell must be `region_id`, found `{}`",
                header.get(0).unwrap_or("")
            ),
        });
    }
    if header.len() < 2 {
        return Err(Error::Parse {
            line: hline,
            column: 2,
            message: "header names no configurations".into(),
        });
    }
    let config_labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if let Some(pos) = config_labels.iter().position(String::is_empty) {
        return Err(Error::Parse {
            line: hline,
            column: pos + 2,
            message: "empty configuration label".into(),
        });
    }

    let width = header.len();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            // blank line
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                column: rec.len().min(width) + 1,
                message: format!("ragged row: {} cells, header has {width}", rec.len()),
            });
        }
        let mut row = Vec::with_capacity(width - 1);
        for (i, cell) in rec.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: i + 1,
                message: format!("`{cell}` is not a decimal number"),
            })?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parse {
                    line,
                    column: i + 1,
                    message: format!("CPI must be finite and positive, got `{cell}`"),
                });
            }
            row.push(v);
        }
        ids.push(rec.get(0).unwrap_or_default().to_owned());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: hline + 1,
            column: 1,
            message: "no data rows".into(),
        });
    }
    RegionPool::with_region_ids(app_label, config_labels, ids, rows)
}

/// Writes a pool with LF line endings. Values use the shortest representation that
/// parses back to the identical `f64`, so a write/load round trip is bit-exact.
pub fn write_pool<W: Write>(pool: &RegionPool, sink: W, format: PoolFormat) -> Result<()> {
    match format {
        PoolFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(sink);
            let mut header = vec!["region_id".to_owned()];
            header.extend(pool.config_labels.iter().cloned());
            w.write_record(&header)?;
            for r in 0..pool.region_count() {
                let mut rec = vec![pool.region_ids[r].clone()];
                rec.extend(pool.row(r).iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: usize,
    pub label: String,
    pub true_mean: f64,
    /// Sample standard deviation over all regions; `None` when the pool has one region.
    pub true_std: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub app_label: String,
    pub configs: Vec<ConfigSummary>,
}

pub fn pool_summary(pool: &RegionPool) -> PopulationSummary {
    let configs = (0..pool.config_count())
        .map(|c| {
            let col = pool.column(c);
            ConfigSummary {
                config: c,
                label: pool.config_labels[c].clone(),
                true_mean: stats::mean(&col),
                true_std: stats::sample_std(&col),
                count: col.len(),
            }
        })
        .collect();
    PopulationSummary {
        app_label: pool.app_label.clone(),
        configs,
    }
}

pub fn true_mean(pool: &RegionPool, config: usize) -> Result<f64> {
    pool.check_config(config)?;
    Ok(stats::mean(&pool.column(config)))
}

pub fn true_means(pool: &RegionPool) -> Vec<f64> {
    (0..pool.config_count())
        .map(|c| stats::mean(&pool.column(c)))
        .collect()
}

fn default_app_label() -> String {
    "synthetic".to_owned()
}

fn default_floor_fraction() -> f64 {
    DEFAULT_FLOOR_FRACTION
}

fn default_instructions() -> u64 {
    DEFAULT_INSTRUCTIONS_PER_REGION
}

/// Generative model for a synthetic pool.
///
/// Configuration `c` has mean CPI `mu_c` and standard deviation
/// `sigma_c = std_slope * mu_c + std_intercept`. Region `i` shares one latent
/// standard normal `z_i` across configurations; `coupling[c]` sets how much of
/// the configuration's variation follows that latent, which controls how well
/// a ranking made under one configuration carries over to another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default = "default_app_label")]
    pub app_label: String,
    /// Defaults to `config0, config1, ...`.
    #[serde(default)]
    pub config_labels: Option<Vec<String>>,
    pub config_means: Vec<f64>,
    pub std_slope: f64,
    #[serde(default)]
    pub std_intercept: f64,
    pub coupling: Vec<f64>,
    pub region_count: usize,
    #[serde(default = "default_floor_fraction")]
    pub floor_fraction: f64,
    #[serde(default = "default_instructions")]
    pub instructions_per_region: u64,
}

impl SyntheticSpec {
    /// Seven configurations whose CPI falls geometrically from 1/1.52 to 1/2.56
    /// (a 1.68x performance spread), `sigma = 0.3 mu`, coupling 0.9, 2,000 regions.
    pub fn default_suite() -> Self {
        let (slow, fast): (f64, f64) = (1.0 / 1.52, 1.0 / 2.56);
        let means = (0..7)
            .map(|c| slow * (fast / slow).powf(c as f64 / 6.0))
            .collect();
        Self {
            app_label: default_app_label(),
            config_labels: None,
            config_means: means,
            std_slope: 0.3,
            std_intercept: 0.0,
            coupling: vec![0.9; 7],
            region_count: 2_000,
            floor_fraction: DEFAULT_FLOOR_FRACTION,
            instructions_per_region: DEFAULT_INSTRUCTIONS_PER_REGION,
        }
    }

    pub fn config_count(&self) -> usize {
        self.config_means.len()
    }

    pub fn config_std(&self, config: usize) -> f64 {
        self.std_slope * self.config_means[config] + self.std_intercept
    }

    pub fn labels(&self) -> Vec<String> {
        self.config_labels.clone().unwrap_or_else(|| {
            (0..self.config_count())
                .map(|c| format!("config{c}"))
                .collect()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.config_count();
        if c == 0 {
            return Err(Error::invalid(
                "synthetic spec needs at least one configuration",
            ));
        }
        if self.coupling.len() != c {
            return Err(Error::invalid(format!(
                "coupling has {} entries for {c} configurations",
                self.coupling.len()
            )));
        }
        if let Some(labels) = &self.config_labels {
            if labels.len() != c {
                return Err(Error::invalid(format!(
                    "{} configuration labels for {c} configurations",
                    labels.len()
                )));
            }
        }
        if self.region_count < 2 {
            return Err(Error::invalid("synthetic pools need at least 2 regions"));
        }
        if !(self.floor_fraction > 0.0 && self.floor_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "floor_fraction must lie in (0, 1), got {}",
                self.floor_fraction
            )));
        }
        if self.instructions_per_region == 0 {
            return Err(Error::invalid("instructions_per_region must be positive"));
        }
        for (i, &mu) in self.config_means.iter().enumerate() {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::invalid(format!(
                    "config {i}: mean must be positive, got {mu}"
                )));
            }
            let sigma = self.config_std(i);
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::invalid(format!(
                    "config {i}: std_slope * mean + std_intercept = {sigma} is negative"
                )));
            }
            let rho = self.coupling[i];
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::invalid(format!(
                    "config {i}: coupling {rho} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Draws a pool from `spec`.
///
/// For each region in order, one latent `z` and then one `eps` per configuration
/// are drawn from a single ChaCha8 stream seeded with `seed`:
/// `value = max(f mu, mu + sigma (rho z + sqrt(1 - rho^2) eps))`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<RegionPool> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let c = spec.config_count();
    let params: Vec<(f64, f64, f64, f64)> = (0..c)
        .map(|i| {
            let rho = spec.coupling[i];
            (
                spec.config_means[i],
                spec.config_std(i),
                rho,
                (1.0 - rho * rho).sqrt(),
            )
        })
        .collect();
    let mut rows = Vec::with_capacity(spec.region_count);
    for _ in 0..spec.region_count {
        let z: f64 = StandardNormal.sample(&mut rng);
        let row = params
            .iter()
            .map(|&(mu, sigma, rho, resid)| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let v = mu + sigma * (rho * z + resid * eps);
                v.max(spec.floor_fraction * mu)
            })
            .collect();
        rows.push(row);
    }
    RegionPool::new(spec.app_label.clone(), spec.labels(), rows)?
        .with_instructions_per_region(spec.instructions_per_region)
}
