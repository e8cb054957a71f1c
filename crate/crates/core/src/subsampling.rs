//! Repeated subsampling: draw many candidate subsamples from an already
//! measured pool, keep the one whose per-configuration means sit closest to
//! the pool's ground truth, and report how well that choice carries over to
//! configurations that took no part in the selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::relative_error;
use crate::population::{true_means, RegionPool};
use crate::samplers::{SampleDraw, Scheme};
use crate::seed::{derive_seed, Purpose};
use crate::stats;

pub const DEFAULT_TRIALS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub scheme: Scheme,
    pub master_seed: u64,
    pub draws: Vec<SampleDraw>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// `trials` draws of `scheme`; draw `t` uses `derive_seed(master_seed, Purpose::Trial, t)`.
pub fn generate_candidates(
    pool: &RegionPool,
    scheme: &Scheme,
    trials: usize,
    master_seed: u64,
) -> Result<CandidateSet> {
    if trials == 0 {
        return Err(Error::invalid("at least one candidate trial is required"));
    }
    scheme.check(pool)?;
    let draws = (0..trials as u64)
        .into_par_iter()
        .map(|t| scheme.draw(pool, derive_seed(master_seed, Purpose::Trial, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSet {
        scheme: *scheme,
        master_seed,
        draws,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum SelectionCriterion {
    /// Minimise the relative error of one configuration's mean.
    BaselineMean { baseline_config: usize },
    /// Minimise the largest relative error over the training configurations.
    ChebyshevRelative { training_configs: Vec<usize> },
    /// Maximise the Pearson correlation between the subsample's and the pool's
    /// mean vectors over the training configurations.
    CorrelationMax { training_configs: Vec<usize> },
}

impl SelectionCriterion {
    pub fn training_configs(&self) -> Vec<usize> {
        match self {
            SelectionCriterion::BaselineMean { baseline_config } => vec![*baseline_config],
            SelectionCriterion::ChebyshevRelative { training_configs }
            | SelectionCriterion::CorrelationMax { training_configs } => training_configs.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectionCriterion::BaselineMean { .. } => "baseline",
            SelectionCriterion::ChebyshevRelative { .. } => "chebyshev",
            SelectionCriterion::CorrelationMax { .. } => "correlation",
        }
    }

    fn maximises(&self) -> bool {
        matches!(self, SelectionCriterion::CorrelationMax { .. })
    }

    pub fn validate(&self, config_count: usize) -> Result<()> {
        let train = self.training_configs();
        if train.is_empty() {
            return Err(Error::invalid(
                "criterion needs at least one training configuration",
            ));
        }
        for (i, &c) in train.iter().enumerate() {
            if c >= config_count {
                return Err(Error::ConfigOutOfRange {
                    index: c,
                    count: config_count,
                });
            }
            if train[..i].contains(&c) {
                return Err(Error::invalid(format!(
                    "training configuration {c} listed twice"
                )));
            }
        }
        if self.maximises() && train.len() < 2 {
            return Err(Error::invalid(
                "the correlation criterion needs at least two training configurations",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigError {
    pub config: usize,
    pub relative_error: f64,
}

/// Outcome of a selection over candidate mean vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub winner_index: usize,
    pub criterion_value: f64,
    pub training_errors: Vec<ConfigError>,
    /// Every configuration not used for training, in index order.
    pub test_errors: Vec<ConfigError>,
}

impl Selection {
    pub fn max_test_error(&self) -> Option<f64> {
        self.test_errors
            .iter()
            .map(|e| e.relative_error)
            .max_by(f64::total_cmp)
    }
}

/// Score of one candidate's mean vector (indexed by configuration) under `criterion`.
pub fn criterion_value(
    truth: &[f64],
    candidate: &[f64],
    criterion: &SelectionCriterion,
) -> Result<f64> {
    match criterion {
        SelectionCriterion::BaselineMean { baseline_config } => {
            relative_error(candidate[*baseline_config], truth[*baseline_config])
        }
        SelectionCriterion::ChebyshevRelative { training_configs } => {
            let mut worst = 0.0f64;
            for &c in training_configs {
                worst = worst.max(relative_error(candidate[c], truth[c])?);
            }
            Ok(worst)
        }
        SelectionCriterion::CorrelationMax { training_configs } => {
            let t: Vec<f64> = training_configs.iter().map(|&c| truth[c]).collect();
            let s: Vec<f64> = training_configs.iter().map(|&c| candidate[c]).collect();
            stats::pearson(&s, &t).ok_or_else(|| {
                Error::Degenerate(
                    "correlation undefined: a mean vector has zero variance over the training configurations"
                        .into(),
                )
            })
        }
    }
}

/// Picks the best candidate by `criterion`; ties go to the lowest index.
///
/// `candidates[i][c]` is candidate `i`'s mean at configuration `c`, and
/// `truth[c]` the ground-truth mean.
pub fn select_from_means(
    truth: &[f64],
    candidates: &[Vec<f64>],
    criterion: &SelectionCriterion,
) -> Result<Selection> {
    criterion.validate(truth.len())?;
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    if let Some(i) = candidates.iter().position(|c| c.len() != truth.len()) {
        return Err(Error::invalid(format!(
            "candidate {i} has {} means, expected {}",
            candidates[i].len(),
            truth.len()
        )));
    }
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|c| criterion_value(truth, c, criterion))
        .collect::<Result<_>>()?;

    let mut winner = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        let better = if criterion.maximises() {
            s > scores[winner]
        } else {
            s < scores[winner]
        };
        if better {
            winner = i;
        }
    }

    let train = criterion.training_configs();
    let errors = |configs: &mut dyn Iterator<Item = usize>| -> Result<Vec<ConfigError>> {
        configs
            .map(|c| {
                Ok(ConfigError {
                    config: c,
                    relative_error: relative_error(candidates[winner][c], truth[c])?,
                })
            })
            .collect()
    };
    let training_errors = errors(&mut train.iter().copied())?;
    let test_errors = errors(&mut (0..truth.len()).filter(|c| !train.contains(c)))?;
    Ok(Selection {
        winner_index: winner,
        criterion_value: scores[winner],
        training_errors,
        test_errors,
    })
}

/// The chosen subsample and how it fares; serialised as the hand-off document
/// naming which regions future studies should simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleReport {
    pub app_label: String,
    pub scheme: Scheme,
    pub master_seed: u64,
    pub candidates: usize,
    pub criterion: SelectionCriterion,
    pub winner_index: usize,
    pub criterion_value: f64,
    pub winning_draw: SampleDraw,
    /// Region ids of the winning draw, in draw order.
    pub region_ids: Vec<String>,
    pub config_labels: Vec<String>,
    pub training_errors: Vec<ConfigError>,
    pub test_errors: Vec<ConfigError>,
}

pub fn candidate_means(pool: &RegionPool, candidates: &CandidateSet) -> Vec<Vec<f64>> {
    candidates
        .draws
        .par_iter()
        .map(|d| {
            (0..pool.config_count())
                .map(|c| pool.subset_mean(&d.region_indices, c))
                .collect()
        })
        .collect()
}

pub fn select_subsample(
    pool: &RegionPool,
    candidates: &CandidateSet,
    criterion: &SelectionCriterion,
) -> Result<SubsampleReport> {
    criterion.validate(pool.config_count())?;
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    for (i, d) in candidates.draws.iter().enumerate() {
        if d.is_empty() || d.region_indices.iter().any(|&r| r >= pool.region_count()) {
            return Err(Error::invalid(format!(
                "candidate {i} is empty or references regions outside the pool"
            )));
        }
    }
    let truth = true_means(pool);
    let means = candidate_means(pool, candidates);
    let sel = select_from_means(&truth, &means, criterion)?;
    let winning_draw = candidates.draws[sel.winner_index].clone();
    let region_ids = winning_draw
        .region_indices
        .iter()
        .map(|&r| pool.region_ids()[r].clone())
        .collect();
    Ok(SubsampleReport {
        app_label: pool.app_label().to_owned(),
        scheme: candidates.scheme,
        master_seed: candidates.master_seed,
        candidates: candidates.len(),
        criterion: criterion.clone(),
        winner_index: sel.winner_index,
        criterion_value: sel.criterion_value,
        winning_draw,
        region_ids,
        config_labels: pool.config_labels().to_vec(),
        training_errors: sel.training_errors,
        test_errors: sel.test_errors,
    })
}

/// Relative error of the winning subsample's mean at each of `test_configs`.
pub fn evaluate_generalization(
    pool: &RegionPool,
    report: &SubsampleReport,
    test_configs: &[usize],
) -> Result<Vec<ConfigError>> {
    let regions = &report.winning_draw.region_indices;
    if regions.is_empty() || regions.iter().any(|&r| r >= pool.region_count()) {
        return Err(Error::invalid(
            "report's winning draw does not fit this pool",
        ));
    }
    test_configs
        .iter()
        .map(|&c| {
            pool.check_config(c)?;
            let truth = crate::population::true_mean(pool, c)?;
            Ok(ConfigError {
                config: c,
                relative_error: relative_error(pool.subset_mean(regions, c), truth)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{DrawScheme, SrsSpec};

    /// Candidate mean vectors with ground truth 1.0 everywhere, so each entry
    /// is `1 + signed relative error`.
    fn toy(errors: &[[f64; 7]]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let truth = vec![1.0; 7];
        let cands = errors
            .iter()
            .map(|row| row.iter().map(|e| 1.0 + e).collect())
            .collect();
        (truth, cands)
    }

    fn chebyshev(train: &[usize]) -> SelectionCriterion {
        SelectionCriterion::ChebyshevRelative {
            training_configs: train.to_vec(),
        }
    }

    #[test]
    fn chebyshev_walkthrough_picks_smallest_maximum() {
        // training max errors 8%, 7%, 4%
        let (truth, cands) = toy(&[
            [0.08, -0.02, 0.05, 0.09, -0.06, 0.04, 0.07],
            [-0.03, 0.07, -0.01, 0.02, 0.08, -0.05, 0.03],
            [0.04, -0.02, 0.03, 0.05, 0.02, -0.03, 0.01],
        ]);
        let sel = select_from_means(&truth, &cands, &chebyshev(&[0, 1, 2])).unwrap();
        assert_eq!(sel.winner_index, 2);
        assert!((sel.criterion_value - 0.04).abs() < 1e-12);
        assert_eq!(
            sel.test_errors.iter().map(|e| e.config).collect::<Vec<_>>(),
            vec![3, 4, 5, 6]
        );
        assert!((sel.max_test_error().unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_always_wins() {
        let (truth, cands) = toy(&[[0.1, 0.2, -0.1, 0.0, 0.3, 0.0, 0.05]]);
        for crit in [
            SelectionCriterion::BaselineMean { baseline_config: 0 },
            chebyshev(&[0, 1, 2]),
        ] {
            let sel = select_from_means(&truth, &cands, &crit).unwrap();
            assert_eq!(sel.winner_index, 0);
            assert!((sel.training_errors[0].relative_error - 0.1).abs() < 1e-12);
        }
        // correlation needs a non-flat truth
        let truth = vec![1.0, 2.0, 3.0];
        let cands = vec![vec![1.1, 1.9, 3.2]];
        let sel = select_from_means(
            &truth,
            &cands,
            &SelectionCriterion::CorrelationMax {
                training_configs: vec![0, 1, 2],
            },
        )
        .unwrap();
        assert_eq!(sel.winner_index, 0);
        assert!(sel.test_errors.is_empty());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let (truth, cands) = toy(&[
            [0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [-0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ]);
        let sel = select_from_means(
            &truth,
            &cands,
            &SelectionCriterion::BaselineMean { baseline_config: 0 },
        )
        .unwrap();
        assert_eq!(sel.winner_index, 1);
    }

    #[test]
    fn correlation_picks_best_aligned_vector() {
        let truth = vec![1.0, 2.0, 3.0, 4.0];
        let cands = vec![
            vec![3.0, 2.0, 1.0, 4.0],
            vec![1.1, 2.1, 2.9, 9.0],
            vec![1.5, 1.4, 3.0, 4.0],
        ];
        let crit = SelectionCriterion::CorrelationMax {
            training_configs: vec![0, 1, 2],
        };
        let sel = select_from_means(&truth, &cands, &crit).unwrap();
        assert_eq!(sel.winner_index, 1);
        assert!(sel.criterion_value > 0.99);
        assert_eq!(sel.test_errors.len(), 1);
    }

    #[test]
    fn correlation_degenerate_is_an_error() {
        let crit = SelectionCriterion::CorrelationMax {
            training_configs: vec![0, 1],
        };
        let flat_truth = select_from_means(&[1.0, 1.0], &[vec![1.0, 2.0]], &crit);
        assert!(matches!(flat_truth, Err(Error::Degenerate(_))));
        let flat_cand = select_from_means(&[1.0, 2.0], &[vec![1.0, 2.0], vec![3.0, 3.0]], &crit);
        assert!(matches!(flat_cand, Err(Error::Degenerate(_))));
        let one = SelectionCriterion::CorrelationMax {
            training_configs: vec![0],
        };
        assert!(select_from_means(&[1.0, 2.0], &[vec![1.0, 2.0]], &one).is_err());
    }

    #[test]
    fn invalid_criteria_and_inputs() {
        let truth = vec![1.0, 2.0];
        let cands = vec![vec![1.0, 2.0]];
        assert!(select_from_means(&truth, &cands, &chebyshev(&[])).is_err());
        assert!(select_from_means(&truth, &cands, &chebyshev(&[0, 0])).is_err());
        assert!(matches!(
            select_from_means(&truth, &cands, &chebyshev(&[2])),
            Err(Error::ConfigOutOfRange { .. })
        ));
        assert!(select_from_means(&truth, &[], &chebyshev(&[0])).is_err());
    }

    /// Exhaustive check: 4 regions, all 6 pairs as candidates.
    #[test]
    fn baseline_winner_is_closest_pair_by_enumeration() {
        let values = [1.0, 1.5, 2.5, 4.0];
        let pool = RegionPool::new(
            "four",
            vec!["c".into()],
            values.iter().map(|&v| vec![v]).collect(),
        )
        .unwrap();
        let truth = values.iter().sum::<f64>() / 4.0;
        let mut pairs = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                pairs.push(vec![a, b]);
            }
        }
        let draws = pairs
            .iter()
            .map(|p| SampleDraw {
                scheme: DrawScheme::Srs {
                    spec: SrsSpec { n: 2, seed: 0 },
                },
                region_indices: p.clone(),
            })
            .collect();
        let set = CandidateSet {
            scheme: Scheme::Srs { n: 2 },
            master_seed: 0,
            draws,
        };
        let report = select_subsample(
            &pool,
            &set,
            &SelectionCriterion::BaselineMean { baseline_config: 0 },
        )
        .unwrap();

        let best = pairs
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = ((values[a.1[0]] + values[a.1[1]]) / 2.0 - truth).abs();
                let db = ((values[b.1[0]] + values[b.1[1]]) / 2.0 - truth).abs();
                da.total_cmp(&db)
            })
            .unwrap()
            .0;
        assert_eq!(report.winner_index, best);
        // mean 2.25; complementary pairs (0,3) = 2.5 and (1,2) = 2.0 tie exactly at 0.25
        // (all values dyadic), so the lower candidate index wins
        assert_eq!(report.winning_draw.region_indices, vec![0, 3]);
        assert!(report.test_errors.is_empty());
    }

    #[test]
    fn candidates_are_deterministic_and_match_single_draws() {
        let rows = (0..50).map(|i| vec![1.0 + (i % 7) as f64]).collect();
        let pool = RegionPool::new("p", vec!["a".into()], rows).unwrap();
        let scheme = Scheme::Srs { n: 5 };
        let a = generate_candidates(&pool, &scheme, 20, 77).unwrap();
        let b = generate_candidates(&pool, &scheme, 20, 77).unwrap();
        assert_eq!(a, b);
        let one = generate_candidates(&pool, &scheme, 1, 77).unwrap();
        assert_eq!(
            one.draws[0],
            scheme
                .draw(&pool, derive_seed(77, Purpose::Trial, 0))
                .unwrap()
        );
        assert_eq!(one.draws[0], a.draws[0]);
        assert!(generate_candidates(&pool, &scheme, 0, 77).is_err());
        assert!(generate_candidates(&pool, &Scheme::Srs { n: 51 }, 3, 77).is_err());
    }

    #[test]
    fn zero_variance_test_config_has_zero_error() {
        let rows = (0..40).map(|i| vec![1.0 + i as f64, 3.0]).collect();
        let pool = RegionPool::new("p", vec!["a".into(), "b".into()], rows).unwrap();
        let set = generate_candidates(&pool, &Scheme::Srs { n: 4 }, 30, 1).unwrap();
        let report = select_subsample(
            &pool,
            &set,
            &SelectionCriterion::BaselineMean { baseline_config: 0 },
        )
        .unwrap();
        let errs = evaluate_generalization(&pool, &report, &[1]).unwrap();
        assert_eq!(errs[0].relative_error, 0.0);
        assert_eq!(report.test_errors, errs);
        assert!(evaluate_generalization(&pool, &report, &[2]).is_err());
    }
}
