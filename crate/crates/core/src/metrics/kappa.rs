use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::real::Real;

/// Square contingency table: rater A on rows, rater B on columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u64>>", into = "Vec<Vec<u64>>")]
pub struct AgreementTable {
    k: usize,
    counts: Vec<u64>,
}

impl AgreementTable {
    pub fn zeros(k: usize) -> Self {
        AgreementTable { k, counts: vec![0; k * k] }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(MetricsError::NotSquare);
        }
        Ok(AgreementTable { k, counts: rows.into_iter().flatten().collect() })
    }

    pub fn categories(&self) -> usize {
        self.k
    }

    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.counts[a * self.k + b]
    }

    pub fn add(&mut self, a: usize, b: usize) {
        self.counts[a * self.k + b] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k).map(<[u64]>::to_vec).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.k).all(|a| (0..self.k).all(|b| a == b || self.get(a, b) == 0))
    }
}

impl TryFrom<Vec<Vec<u64>>> for AgreementTable {
    type Error = MetricsError;

    fn try_from(rows: Vec<Vec<u64>>) -> Result<Self, Self::Error> {
        AgreementTable::from_rows(rows)
    }
}

impl From<AgreementTable> for Vec<Vec<u64>> {
    fn from(t: AgreementTable) -> Self {
        t.rows()
    }
}

/// Cohen's kappa, `(p_o - p_e) / (1 - p_e)`.
///
/// Evaluated as `(N * trace - S) / (N^2 - S)` with `S = sum_k row_k * col_k`
/// in integer arithmetic, so only the final division rounds.
pub fn cohens_kappa<T: Real>(table: &AgreementTable) -> Result<T, MetricsError> {
    let total = u128::from(table.total());
    if total == 0 {
        return Err(MetricsError::EmptyTable);
    }
    let k = table.k;
    let trace: u128 = (0..k).map(|i| u128::from(table.get(i, i))).sum();
    let chance: u128 = (0..k)
        .map(|i| {
            let row: u128 = (0..k).map(|j| u128::from(table.get(i, j))).sum();
            let col: u128 = (0..k).map(|j| u128::from(table.get(j, i))).sum();
            row * col
        })
        .sum();
    let denom = total * total - chance;
    if denom == 0 {
        return Err(MetricsError::KappaUndefined);
    }
    let numer = (total * trace) as i128 - chance as i128;
    Ok(T::lit(numer as f64) / T::lit(denom as f64))
}
