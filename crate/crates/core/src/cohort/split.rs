use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cohort, CohortError};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(CohortError::Split(format!("unknown split {s:?}"))),
        }
    }
}

/// Assignment of case-control groups to splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub counts: [usize; 3],
    pub groups: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn split_of_group(&self, group_id: &str) -> Option<Split> {
        self.groups.get(group_id).copied()
    }

    /// Keeps only the women whose group belongs to `split`.
    pub fn restrict<T: Real>(&self, cohort: &Cohort<T>, split: Split) -> Result<Cohort<T>, CohortError> {
        let mut women = Vec::new();
        for w in &cohort.women {
            let s = self.split_of_group(&w.group_id).ok_or_else(|| {
                CohortError::Split(format!("group {} of woman {} has no split", w.group_id, w.woman_id))
            })?;
            if s == split {
                women.push(w.clone());
            }
        }
        Ok(Cohort::new(women))
    }
}

/// Largest-remainder apportionment of `n` items by `fractions`.
fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let quotas = fractions.map(|f| f * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    // larger remainder first, earlier split on ties
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Seeded shuffle of group ids cut into contiguous train/val/test slices.
pub fn split_groups(group_ids: &[String], fractions: [f64; 3], seed: u64) -> Result<SplitAssignment, CohortError> {
    if fractions.iter().any(|f| !(*f >= 0.0 && f.is_finite())) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CohortError::Split(format!("fractions {fractions:?} must be non-negative and sum to 1")));
    }
    let mut ids: Vec<String> = group_ids.to_vec();
    ids.sort();
    ids.dedup();
    let nonzero = fractions.iter().filter(|f| **f > 0.0).count();
    if ids.len() < nonzero {
        return Err(CohortError::Split(format!(
            "{} groups cannot fill {nonzero} non-empty splits",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let counts = apportion(ids.len(), &fractions);
    let mut groups = BTreeMap::new();
    let mut it = ids.into_iter();
    for (split, &n) in Split::ALL.iter().zip(&counts) {
        for id in it.by_ref().take(n) {
            groups.insert(id, *split);
        }
    }
    Ok(SplitAssignment { seed, fractions, counts, groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("G{i:04}")).collect()
    }

    #[test]
    fn ten_groups() {
        let s = split_groups(&ids(10), [0.7, 0.1, 0.2], 7).unwrap();
        assert_eq!(s.counts, [7, 1, 2]);
        assert_eq!(s.groups.len(), 10);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = split_groups(&ids(50), [0.7, 0.1, 0.2], 1).unwrap();
        let b = split_groups(&ids(50), [0.7, 0.1, 0.2], 1).unwrap();
        let c = split_groups(&ids(50), [0.7, 0.1, 0.2], 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.groups, c.groups);
    }

    #[test]
    fn too_few_groups() {
        assert!(split_groups(&ids(2), [0.7, 0.1, 0.2], 0).is_err());
        assert!(split_groups(&ids(2), [0.5, 0.0, 0.5], 0).is_ok());
        assert!(split_groups(&ids(5), [0.7, 0.1, 0.3], 0).is_err());
    }

    proptest! {
        #[test]
        fn sizes_within_one_group(n in 3usize..400, seed in any::<u64>()) {
            let f = [0.7, 0.1, 0.2];
            let s = split_groups(&ids(n), f, seed).unwrap();
            prop_assert_eq!(s.counts.iter().sum::<usize>(), n);
            for (c, fr) in s.counts.iter().zip(f) {
                prop_assert!((*c as f64 - fr * n as f64).abs() <= 1.0);
            }
            for split in Split::ALL {
                let realized = s.groups.values().filter(|v| **v == split).count();
                prop_assert_eq!(realized, s.counts[split as usize]);
            }
        }
    }
}
