use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{train, TrainOutcome};
use super::{HeadConfig, HeadError, TrainRecord, HIDDEN_WIDTHS};
use crate::real::Real;

/// Hyperparameter ranges for the cancer-head search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub hidden_widths: Vec<usize>,
    /// Log-uniform bounds.
    pub learning_rate: [f64; 2],
    /// Uniform bounds.
    pub momentum: [f64; 2],
    pub intermediate_sigmoid: Vec<bool>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            hidden_widths: HIDDEN_WIDTHS.iter().rev().copied().collect(),
            learning_rate: [1e-7, 1e-1],
            momentum: [0.1, 0.9],
            intermediate_sigmoid: vec![true, false],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), HeadError> {
        let bad = |m: &str| Err(HeadError::Config(format!("search space: {m}")));
        if self.hidden_widths.is_empty() || self.intermediate_sigmoid.is_empty() {
            return bad("hidden_widths and intermediate_sigmoid need at least one value");
        }
        let [lo, hi] = self.learning_rate;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("learning_rate bounds must satisfy 0 < low <= high");
        }
        let [lo, hi] = self.momentum;
        if !(0.0 <= lo && lo <= hi && hi < 1.0) {
            return bad("momentum bounds must satisfy 0 <= low <= high < 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub hidden_width: usize,
    pub base_learning_rate: f64,
    pub momentum: f64,
    pub intermediate_sigmoid: bool,
    pub val_auroc: Option<f64>,
    pub best_epoch: Option<usize>,
    /// Set when training failed, e.g. diverged.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome<T: Real = f64> {
    pub best_config: HeadConfig,
    pub best_trial: usize,
    pub trials: Vec<Trial>,
    pub best: TrainOutcome<T>,
}

/// The `n_trials` configurations a search with `seed` visits.
pub fn sample_configs(base: &HeadConfig, space: &SearchSpace, n_trials: usize, seed: u64) -> Result<Vec<HeadConfig>, HeadError> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ln_lo, ln_hi) = (space.learning_rate[0].ln(), space.learning_rate[1].ln());
    Ok((0..n_trials)
        .map(|_| {
            let hidden_width = space.hidden_widths[rng.random_range(0..space.hidden_widths.len())];
            let lr = if ln_lo == ln_hi { ln_lo } else { rng.random_range(ln_lo..ln_hi) };
            let [m_lo, m_hi] = space.momentum;
            let momentum = if m_lo == m_hi { m_lo } else { rng.random_range(m_lo..m_hi) };
            let intermediate_sigmoid = space.intermediate_sigmoid[rng.random_range(0..space.intermediate_sigmoid.len())];
            HeadConfig { hidden_width, base_learning_rate: lr.exp(), momentum, intermediate_sigmoid, ..base.clone() }
        })
        .collect())
}

/// Seeded random search; the best trial maximizes validation AUROC
/// (earliest wins ties). Every trial trains from `base.seed`.
pub fn tune<T: Real>(
    base: &HeadConfig,
    space: &SearchSpace,
    train_records: &[TrainRecord<T>],
    val_records: &[TrainRecord<T>],
    n_trials: usize,
    seed: u64,
) -> Result<TuneOutcome<T>, HeadError> {
    if n_trials == 0 {
        return Err(HeadError::NoTrials);
    }
    let configs = sample_configs(base, space, n_trials, seed)?;
    let mut trials = Vec::with_capacity(n_trials);
    let mut best: Option<(usize, f64, TrainOutcome<T>)> = None;
    for (i, config) in configs.iter().enumerate() {
        let mut row = Trial {
            trial: i,
            hidden_width: config.hidden_width,
            base_learning_rate: config.base_learning_rate,
            momentum: config.momentum,
            intermediate_sigmoid: config.intermediate_sigmoid,
            val_auroc: None,
            best_epoch: None,
            error: None,
        };
        match train(config, train_records, val_records) {
            Ok(outcome) => {
                row.val_auroc = outcome.best_val_auroc();
                row.best_epoch = Some(outcome.best_epoch);
                if let Some(a) = row.val_auroc {
                    if best.as_ref().is_none_or(|(_, b, _)| a > *b) {
                        best = Some((i, a, outcome));
                    }
                }
            }
            Err(e @ HeadError::Diverged { .. }) => row.error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
        trials.push(row);
    }
    let (best_trial, _, outcome) = best.ok_or(HeadError::NoValidTrial)?;
    Ok(TuneOutcome { best_config: configs[best_trial].clone(), best_trial, trials, best: outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::HeadVariant;
    use crate::lexicon::ConceptLogits;

    fn data(n: usize, shift: usize) -> Vec<TrainRecord> {
        (0..n)
            .map(|i| {
                let y = (i + shift) % 3 == 0;
                let noise = ((i * 37 + shift) % 11) as f64 / 5.0 - 1.0;
                let s = if y { 0.8 } else { -0.8 };
                TrainRecord::new(ConceptLogits::new([s + noise, noise, s - noise, 0.3 * noise, s]).unwrap(), vec![], y)
            })
            .collect()
    }

    fn base() -> HeadConfig {
        HeadConfig { variant: HeadVariant::Nonlinear, hidden_width: 64, epochs: 3, warmup_steps: 5, ..HeadConfig::default() }
    }

    fn small_space() -> SearchSpace {
        SearchSpace { hidden_widths: vec![64, 128], learning_rate: [1e-3, 1e-1], ..SearchSpace::default() }
    }

    #[test]
    fn samples_respect_space_and_seed() {
        let space = SearchSpace::default();
        let a = sample_configs(&base(), &space, 50, 1).unwrap();
        let b = sample_configs(&base(), &space, 50, 1).unwrap();
        let c = sample_configs(&base(), &space, 50, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for cfg in &a {
            assert!(HIDDEN_WIDTHS.contains(&cfg.hidden_width));
            assert!((1e-7..=1e-1).contains(&cfg.base_learning_rate));
            assert!((0.1..=0.9).contains(&cfg.momentum));
            assert_eq!(cfg.epochs, 3);
        }
    }

    #[test]
    fn single_trial_returns_its_config() {
        let out = tune(&base(), &small_space(), &data(60, 0), &data(30, 1), 1, 9).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best_config, sample_configs(&base(), &small_space(), 1, 9).unwrap()[0]);
    }

    #[test]
    fn deterministic_table_and_best_is_max() {
        let (tr, va) = (data(60, 0), data(30, 1));
        let a = tune(&base(), &small_space(), &tr, &va, 4, 5).unwrap();
        let b = tune(&base(), &small_space(), &tr, &va, 4, 5).unwrap();
        assert_eq!(a.trials, b.trials);
        let max = a.trials.iter().filter_map(|t| t.val_auroc).fold(f64::MIN, f64::max);
        assert_eq!(a.trials[a.best_trial].val_auroc, Some(max));
        assert!(matches!(tune(&base(), &small_space(), &tr, &va, 0, 5), Err(HeadError::NoTrials)));
    }
}
