//! Point estimates, analytical and empirical confidence intervals, and errors
//! against ground truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::population::{true_mean, RegionPool};
use crate::samplers::{SampleDraw, Scheme};
use crate::seed::{derive_seed, Purpose};
use crate::stats;

pub const DEFAULT_LEVEL: f64 = 0.95;

/// Fewer trials than this make the tail percentiles meaningless.
pub const MIN_EMPIRICAL_TRIALS: usize = 100;

/// Inverse of the standard normal CDF.
///
/// Wichura's algorithm AS 241 (PPND16): a rational approximation in
/// `q = p - 0.5` for the central region `|q| <= 0.425` and in
/// `r = sqrt(-ln(min(p, 1 - p)))` for the tails, with relative accuracy
/// about 1e-16.
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r
            + 67265.770_927_008_700)
            * r
            + 45921.953_931_549_871)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_6;
        let den = ((((((r * 5226.495_278_852_546 + 28729.085_735_721_943) * r
            + 39307.895_800_092_711)
            * r
            + 21213.794_301_586_596)
            * r
            + 5394.196_021_424_751_1)
            * r
            + 687.187_007_492_057_91)
            * r
            + 42.313_330_701_600_911)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_185) * r
            + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_6)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_6;
        let den = ((((((r * 1.050_750_071_644_416_8e-9 + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_07)
            * r
            + 0.689_767_334_985_100_0)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_123)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8;
        let den = ((((((r * 2.044_263_103_389_939_8e-15 + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_7e-5)
            * r
            + 7.868_691_311_456_132_6e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_81)
            * r
            + 0.599_832_206_555_887_94)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Which reference distribution supplies the critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMode {
    /// Standard normal `z_{alpha/2}`.
    #[default]
    Normal,
    /// Student-t with `n - 1` degrees of freedom.
    StudentT,
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "confidence level must lie in (0, 1), got {level}"
        )))
    }
}

/// Two-sided critical value for `level`; `n` is only used in Student-t mode.
pub fn critical_value(level: f64, mode: IntervalMode, n: usize) -> Result<f64> {
    check_level(level)?;
    let upper = 1.0 - (1.0 - level) / 2.0;
    match mode {
        IntervalMode::Normal => Ok(normal_quantile(upper)),
        IntervalMode::StudentT => {
            if n < 2 {
                return Err(Error::Degenerate("Student-t needs n >= 2".into()));
            }
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .map_err(|e| Error::invalid(e.to_string()))?;
            Ok(t.inverse_cdf(upper))
        }
    }
}

/// `z_{alpha/2} s / sqrt(n)`.
pub fn margin_of_error(std: f64, n: usize, level: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    Ok(critical_value(level, IntervalMode::Normal, n)? * std / (n as f64).sqrt())
}

/// Smallest `n` whose relative margin of error is at most `target_relative_me`,
/// given a relative standard deviation `s / mean`: `ceil((z s / (target mean))^2)`.
pub fn required_sample_size(relative_std: f64, target_relative_me: f64, level: f64) -> Result<u64> {
    if !(target_relative_me > 0.0 && target_relative_me.is_finite()) {
        return Err(Error::invalid(format!(
            "target relative margin of error must be positive, got {target_relative_me}"
        )));
    }
    if !(relative_std >= 0.0 && relative_std.is_finite()) {
        return Err(Error::invalid(format!(
            "relative std must be non-negative, got {relative_std}"
        )));
    }
    let z = critical_value(level, IntervalMode::Normal, 2)?;
    let n = (z * relative_std / target_relative_me).powi(2).ceil();
    Ok((n as u64).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub config: usize,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; absent when `n = 1`.
    pub std: Option<f64>,
    pub level: f64,
    pub mode: IntervalMode,
    /// Margin of error; absent when `n = 1`.
    pub half_width: Option<f64>,
    /// `half_width / mean`.
    pub relative_me: Option<f64>,
}

impl Estimate {
    pub fn lower(&self) -> Option<f64> {
        self.half_width.map(|h| self.mean - h)
    }

    pub fn upper(&self) -> Option<f64> {
        self.half_width.map(|h| self.mean + h)
    }

    pub fn contains(&self, value: f64) -> Option<bool> {
        Some(self.lower()? <= value && value <= self.upper()?)
    }
}

pub fn estimate_from_values(
    values: &[f64],
    config: usize,
    level: f64,
    mode: IntervalMode,
) -> Result<Estimate> {
    check_level(level)?;
    if values.is_empty() {
        return Err(Error::invalid("cannot estimate from an empty sample"));
    }
    let n = values.len();
    let mean = stats::mean(values);
    let std = stats::sample_std(values);
    let half_width = match std {
        Some(s) => Some(critical_value(level, mode, n)? * s / (n as f64).sqrt()),
        None => None,
    };
    Ok(Estimate {
        config,
        n,
        mean,
        std,
        level,
        mode,
        half_width,
        relative_me: half_width.map(|h| h / mean),
    })
}

/// Mean, sample std and normal-theory interval of the drawn regions at `config`.
pub fn point_estimate(
    pool: &RegionPool,
    draw: &SampleDraw,
    config: usize,
    level: f64,
) -> Result<Estimate> {
    point_estimate_with_mode(pool, draw, config, level, IntervalMode::Normal)
}

pub fn point_estimate_with_mode(
    pool: &RegionPool,
    draw: &SampleDraw,
    config: usize,
    level: f64,
    mode: IntervalMode,
) -> Result<Estimate> {
    pool.check_config(config)?;
    if let Some(&bad) = draw
        .region_indices
        .iter()
        .find(|&&r| r >= pool.region_count())
    {
        return Err(Error::invalid(format!(
            "draw references region {bad} but the pool has {}",
            pool.region_count()
        )));
    }
    let values: Vec<f64> = draw
        .region_indices
        .iter()
        .map(|&r| pool.value(r, config))
        .collect();
    estimate_from_values(&values, config, level, mode)
}

/// `|estimated - truth| / truth`.
pub fn relative_error(estimated_mean: f64, true_mean: f64) -> Result<f64> {
    if !(true_mean > 0.0 && true_mean.is_finite()) {
        return Err(Error::invalid(format!(
            "true mean must be positive, got {true_mean}"
        )));
    }
    Ok((estimated_mean - true_mean).abs() / true_mean)
}

/// Sampled mean at `config` for trials `0..trials`; trial `t` draws with
/// `derive_seed(master_seed, Purpose::Trial, t)`. Runs on the rayon pool;
/// the result is in trial order regardless of scheduling.
pub fn sampled_means(
    pool: &RegionPool,
    scheme: &Scheme,
    config: usize,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    pool.check_config(config)?;
    scheme.check(pool)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let draw = scheme.draw(pool, derive_seed(master_seed, Purpose::Trial, t))?;
            Ok(pool.subset_mean(&draw.region_indices, config))
        })
        .collect()
}

/// Central interval of repeated sampled means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCi {
    pub scheme: Scheme,
    pub config: usize,
    pub trials: usize,
    pub level: f64,
    /// Median of the sampled means.
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub half_width: f64,
    pub true_mean: f64,
    /// `half_width / true_mean`.
    pub relative_half_width: f64,
}

/// Equal-tailed interval `[p_{alpha/2}, p_{1-alpha/2}]` of `means`, using
/// linearly interpolated percentiles. Returns `(lower, center, upper)`.
pub fn central_interval(means: &[f64], level: f64) -> Result<(f64, f64, f64)> {
    check_level(level)?;
    if means.is_empty() {
        return Err(Error::invalid("no sampled means"));
    }
    let mut sorted = means.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok((
        stats::percentile_sorted(&sorted, alpha / 2.0),
        stats::percentile_sorted(&sorted, 0.5),
        stats::percentile_sorted(&sorted, 1.0 - alpha / 2.0),
    ))
}

pub fn empirical_ci(
    pool: &RegionPool,
    scheme: &Scheme,
    config: usize,
    trials: usize,
    level: f64,
    master_seed: u64,
) -> Result<EmpiricalCi> {
    check_level(level)?;
    if trials < MIN_EMPIRICAL_TRIALS {
        return Err(Error::invalid(format!(
            "empirical intervals need at least {MIN_EMPIRICAL_TRIALS} trials, got {trials}"
        )));
    }
    let means = sampled_means(pool, scheme, config, trials, master_seed)?;
    let truth = true_mean(pool, config)?;
    let (lower, center, upper) = central_interval(&means, level)?;
    let half_width = (upper - lower) / 2.0;
    Ok(EmpiricalCi {
        scheme: *scheme,
        config,
        trials,
        level,
        center,
        lower,
        upper,
        half_width,
        true_mean: truth,
        relative_half_width: half_width / truth,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per estimate: `config,n,mean,std,level,half_width,relative_me`.
pub fn estimates_to_csv(estimates: &[Estimate]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        "config",
        "n",
        "mean",
        "std",
        "level",
        "half_width",
        "relative_me",
    ])?;
    for e in estimates {
        w.write_record([
            e.config.to_string(),
            e.n.to_string(),
            e.mean.to_string(),
            opt(e.std),
            e.level.to_string(),
            opt(e.half_width),
            opt(e.relative_me),
        ])?;
    }
    csv_string(w)
}

/// One row per interval:
/// `scheme,config,trials,level,center,lower,upper,half_width,true_mean,relative_half_width`.
pub fn empirical_cis_to_csv(cis: &[EmpiricalCi]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        "scheme",
        "config",
        "trials",
        "level",
        "center",
        "lower",
        "upper",
        "half_width",
        "true_mean",
        "relative_half_width",
    ])?;
    for ci in cis {
        w.write_record([
            ci.scheme.describe(),
            ci.config.to_string(),
            ci.trials.to_string(),
            ci.level.to_string(),
            ci.center.to_string(),
            ci.lower.to_string(),
            ci.upper.to_string(),
            ci.half_width.to_string(),
            ci.true_mean.to_string(),
            ci.relative_half_width.to_string(),
        ])?;
    }
    csv_string(w)
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
