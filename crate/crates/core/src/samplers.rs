//! Simple random sampling and ranked set sampling of regions.
//!
//! Both schemes draw without replacement. Ranked set sampling draws all
//! `M K^2` units of its sets distinct from one another, so it needs
//! `M K^2 <= R`.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::RegionPool;
use crate::seed::{rng_from_seed, SampleRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrsSpec {
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RssSpec {
    /// Number of cycles (M).
    pub cycles: usize,
    /// Set size, and number of sets per cycle (K).
    pub set_size: usize,
    /// Configuration whose values order the units inside each set.
    pub ranking_config: usize,
    pub seed: u64,
}

impl RssSpec {
    pub fn sample_size(&self) -> usize {
        self.cycles * self.set_size
    }

    pub fn units_drawn(&self) -> usize {
        self.cycles * self.set_size * self.set_size
    }
}

/// One ranked set and the order statistic taken from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedSet {
    /// Region indices in draw order.
    pub members: Vec<usize>,
    /// 0-based ascending rank of the selected unit under the ranking configuration.
    pub selected_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum DrawScheme {
    Srs {
        #[serde(flatten)]
        spec: SrsSpec,
    },
    Rss {
        #[serde(flatten)]
        spec: RssSpec,
        sets: Vec<RankedSet>,
    },
}

/// A selection of regions plus the scheme that produced it. This is the
/// document handed to a simulation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDraw {
    #[serde(flatten)]
    pub scheme: DrawScheme,
    pub region_indices: Vec<usize>,
}

impl SampleDraw {
    pub fn len(&self) -> usize {
        self.region_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_indices.is_empty()
    }

    pub fn seed(&self) -> u64 {
        match &self.scheme {
            DrawScheme::Srs { spec } => spec.seed,
            DrawScheme::Rss { spec, .. } => spec.seed,
        }
    }
}

/// A sampling scheme without its seed; instantiated once per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scheme {
    Srs {
        n: usize,
    },
    Rss {
        cycles: usize,
        set_size: usize,
        ranking_config: usize,
    },
}

impl Scheme {
    pub fn sample_size(&self) -> usize {
        match *self {
            Scheme::Srs { n } => n,
            Scheme::Rss {
                cycles, set_size, ..
            } => cycles * set_size,
        }
    }

    /// Checks the scheme against a pool without drawing.
    pub fn check(&self, pool: &RegionPool) -> Result<()> {
        match *self {
            Scheme::Srs { n } => check_srs(pool.region_count(), n),
            Scheme::Rss {
                cycles,
                set_size,
                ranking_config,
            } => {
                pool.check_config(ranking_config)?;
                check_rss(pool.region_count(), cycles, set_size)
            }
        }
    }

    pub fn draw(&self, pool: &RegionPool, seed: u64) -> Result<SampleDraw> {
        match *self {
            Scheme::Srs { n } => draw_srs(pool, SrsSpec { n, seed }),
            Scheme::Rss {
                cycles,
                set_size,
                ranking_config,
            } => draw_rss(
                pool,
                RssSpec {
                    cycles,
                    set_size,
                    ranking_config,
                    seed,
                },
            ),
        }
    }

    /// Short human-readable tag, e.g. `srs(n=30)` or `rss(M=1,K=30,rank=0)`.
    pub fn describe(&self) -> String {
        match *self {
            Scheme::Srs { n } => format!("srs(n={n})"),
            Scheme::Rss {
                cycles,
                set_size,
                ranking_config,
            } => format!("rss(M={cycles},K={set_size},rank={ranking_config})"),
        }
    }
}

fn check_srs(regions: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Infeasible("sample size must be at least 1".into()));
    }
    if n > regions {
        return Err(Error::Infeasible(format!(
            "sample size {n} exceeds the pool's {regions} regions"
        )));
    }
    Ok(())
}

fn check_rss(regions: usize, cycles: usize, set_size: usize) -> Result<()> {
    if cycles == 0 || set_size == 0 {
        return Err(Error::Infeasible(
            "ranked set sampling needs at least one cycle and a set size of at least 1".into(),
        ));
    }
    let needed = cycles
        .checked_mul(set_size)
        .and_then(|v| v.checked_mul(set_size))
        .unwrap_or(usize::MAX);
    if needed > regions {
        let max_k = ((regions / cycles) as f64).sqrt().floor() as usize;
        return Err(Error::Infeasible(format!(
            "M={cycles}, K={set_size} needs M*K^2 = {needed} distinct regions but the pool has {regions}; \
             the largest feasible K for M={cycles} is {max_k}"
        )));
    }
    Ok(())
}

/// Partial Fisher-Yates: the first `k` entries of a shuffled `0..population`.
fn distinct_indices(rng: &mut SampleRng, population: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..population).collect();
    for i in 0..k {
        let j = rng.random_range(i..population);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// `n` distinct regions chosen uniformly without replacement.
pub fn draw_srs(pool: &RegionPool, spec: SrsSpec) -> Result<SampleDraw> {
    check_srs(pool.region_count(), spec.n)?;
    let mut rng = rng_from_seed(spec.seed);
    let region_indices = distinct_indices(&mut rng, pool.region_count(), spec.n);
    Ok(SampleDraw {
        scheme: DrawScheme::Srs { spec },
        region_indices,
    })
}

/// Draws the `M K` sets of `K` units each. All `M K^2` units are distinct; set
/// `s` holds draws `s K .. (s + 1) K`.
pub fn form_rss_sets(pool: &RegionPool, spec: &RssSpec) -> Result<Vec<Vec<usize>>> {
    check_rss(pool.region_count(), spec.cycles, spec.set_size)?;
    let mut rng = rng_from_seed(spec.seed);
    let units = distinct_indices(&mut rng, pool.region_count(), spec.units_drawn());
    Ok(units.chunks(spec.set_size).map(<[usize]>::to_vec).collect())
}

/// Ascending by value, ties to the smaller region index.
fn rank_order(a: (usize, f64), b: (usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Takes the `j`-th smallest unit (0-based) from set `m K + j` of every cycle `m`.
///
/// `sets` pairs each region index with its ranking value. No randomness is involved.
pub fn rss_select(spec: RssSpec, sets: &[Vec<(usize, f64)>]) -> Result<SampleDraw> {
    let k = spec.set_size;
    if k == 0 || sets.len() != spec.cycles * k {
        return Err(Error::invalid(format!(
            "expected {} sets for M={}, K={k}, got {}",
            spec.cycles * k,
            spec.cycles,
            sets.len()
        )));
    }
    let mut region_indices = Vec::with_capacity(sets.len());
    let mut ranked = Vec::with_capacity(sets.len());
    for (s, set) in sets.iter().enumerate() {
        if set.len() != k {
            return Err(Error::invalid(format!(
                "set {s} has {} units, expected K={k}",
                set.len()
            )));
        }
        if let Some(&(r, v)) = set.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "set {s}: ranking value for region {r} is not finite ({v})"
            )));
        }
        let position = s % k;
        let mut ordered = set.clone();
        ordered.sort_by(|&a, &b| rank_order(a, b));
        region_indices.push(ordered[position].0);
        ranked.push(RankedSet {
            members: set.iter().map(|&(r, _)| r).collect(),
            selected_rank: position,
        });
    }
    Ok(SampleDraw {
        scheme: DrawScheme::Rss { spec, sets: ranked },
        region_indices,
    })
}

/// Ranked set sample of size `M K`, ranked by the pool's values at `ranking_config`.
pub fn draw_rss(pool: &RegionPool, spec: RssSpec) -> Result<SampleDraw> {
    pool.check_config(spec.ranking_config)?;
    let sets = form_rss_sets(pool, &spec)?;
    let valued: Vec<Vec<(usize, f64)>> = sets
        .iter()
        .map(|set| {
            set.iter()
                .map(|&r| (r, pool.value(r, spec.ranking_config)))
                .collect()
        })
        .collect();
    rss_select(spec, &valued)
}

/// Where a selected unit lands when its set is re-ranked under another configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPoint {
    /// Index of the set within the draw.
    pub set: usize,
    /// Rank the unit was selected for (position within its cycle).
    pub position: usize,
    /// Rank of the same unit under the evaluation configuration.
    pub true_rank: usize,
}

pub fn ranking_accuracy(
    draw: &SampleDraw,
    pool: &RegionPool,
    eval_config: usize,
) -> Result<Vec<RankPoint>> {
    pool.check_config(eval_config)?;
    let DrawScheme::Rss { sets, .. } = &draw.scheme else {
        return Err(Error::invalid(
            "ranking accuracy needs a ranked set sampling draw",
        ));
    };
    sets.iter()
        .zip(&draw.region_indices)
        .enumerate()
        .map(|(s, (set, &chosen))| {
            if chosen >= pool.region_count()
                || set.members.iter().any(|&r| r >= pool.region_count())
            {
                return Err(Error::invalid(format!(
                    "set {s} references a region outside the pool"
                )));
            }
            let key = (chosen, pool.value(chosen, eval_config));
            let true_rank = set
                .members
                .iter()
                .filter(|&&r| rank_order((r, pool.value(r, eval_config)), key) == Ordering::Less)
                .count();
            Ok(RankPoint {
                set: s,
                position: set.selected_rank,
                true_rank,
            })
        })
        .collect()
}
