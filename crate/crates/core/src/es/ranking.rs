use std::cmp::Ordering;

use super::EsError;

/// A sampled batch together with its improvement ranking.
///
/// `ranking[0]` is the index of the best candidate. Ranking is by improvement
/// descending, ties broken by objective descending, then by batch index.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedBatch {
    solutions: Vec<Vec<f64>>,
    ranking: Vec<usize>,
    num_improved: usize,
}

impl RankedBatch {
    /// Ranks `solutions` by their improvement values.
    ///
    /// `-inf` improvements are allowed (they mark failed evaluations and rank
    /// last); NaN or `+inf` is rejected.
    pub fn new(
        solutions: Vec<Vec<f64>>,
        improvements: &[f64],
        objectives: &[f64],
    ) -> Result<Self, EsError> {
        let len = solutions.len();
        for actual in [improvements.len(), objectives.len()] {
            if actual != len {
                return Err(EsError::BatchSize {
                    expected: len,
                    actual,
                });
            }
        }
        if let Some(index) = improvements
            .iter()
            .position(|d| d.is_nan() || *d == f64::INFINITY)
        {
            return Err(EsError::InvalidRanking { index });
        }
        let mut ranking: Vec<usize> = (0..len).collect();
        // Stable sort keeps the batch-index order for full ties.
        ranking.sort_by(|&a, &b| {
            improvements[b]
                .partial_cmp(&improvements[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| objectives[b].total_cmp(&objectives[a]))
        });
        let num_improved = improvements.iter().filter(|d| **d > 0.0).count();
        Ok(RankedBatch {
            solutions,
            ranking,
            num_improved,
        })
    }

    /// Builds a batch from an explicit ranking permutation.
    pub fn from_ranking(
        solutions: Vec<Vec<f64>>,
        ranking: Vec<usize>,
        num_improved: usize,
    ) -> Result<Self, EsError> {
        let len = solutions.len();
        if ranking.len() != len {
            return Err(EsError::BatchSize {
                expected: len,
                actual: ranking.len(),
            });
        }
        let mut seen = vec![false; len];
        for (pos, &i) in ranking.iter().enumerate() {
            if i >= len || std::mem::replace(&mut seen[i], true) {
                return Err(EsError::InvalidRanking { index: pos });
            }
        }
        Ok(RankedBatch {
            solutions,
            ranking,
            num_improved: num_improved.min(len),
        })
    }

    pub fn solutions(&self) -> &[Vec<f64>] {
        &self.solutions
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    /// Number of candidates with strictly positive improvement.
    pub fn num_improved(&self) -> usize {
        self.num_improved
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Solutions in rank order, best first.
    pub fn ranked(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.ranking.iter().map(move |&i| self.solutions[i].as_slice())
    }

    pub(crate) fn check_shape(&self, lambda: usize, n: usize) -> Result<(), EsError> {
        if self.solutions.len() != lambda {
            return Err(EsError::BatchSize {
                expected: lambda,
                actual: self.solutions.len(),
            });
        }
        for s in &self.solutions {
            if s.len() != n {
                return Err(EsError::Dimension {
                    expected: n,
                    actual: s.len(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sols(k: usize) -> Vec<Vec<f64>> {
        (0..k).map(|i| vec![i as f64]).collect()
    }

    #[test]
    fn ranks_descending_with_tie_breaks() {
        let b = RankedBatch::new(sols(5), &[1.0, 3.0, 1.0, 1.0, -2.0], &[0.0, 0.0, 5.0, 0.0, 9.0])
            .unwrap();
        // 1 has the largest Δ; among the Δ = 1 ties, index 2 has larger f,
        // then 0 and 3 keep batch order.
        assert_eq!(b.ranking(), &[1, 2, 0, 3, 4]);
        assert_eq!(b.num_improved(), 4);
    }

    #[test]
    fn negative_infinity_ranks_last_nan_rejected() {
        let b = RankedBatch::new(sols(3), &[f64::NEG_INFINITY, -5.0, 0.0], &[1.0, 1.0, 1.0])
            .unwrap();
        assert_eq!(b.ranking(), &[2, 1, 0]);
        assert_eq!(b.num_improved(), 0);
        assert_eq!(
            RankedBatch::new(sols(2), &[0.0, f64::NAN], &[0.0, 0.0]),
            Err(EsError::InvalidRanking { index: 1 })
        );
    }

    #[test]
    fn from_ranking_rejects_non_permutations() {
        assert!(RankedBatch::from_ranking(sols(3), vec![0, 0, 1], 0).is_err());
        assert!(RankedBatch::from_ranking(sols(3), vec![0, 1], 0).is_err());
        assert!(RankedBatch::from_ranking(sols(3), vec![2, 0, 1], 1).is_ok());
    }

    proptest! {
        #[test]
        fn ranking_is_a_permutation(deltas in proptest::collection::vec(-1e3f64..1e3, 1..64)) {
            let n = deltas.len();
            let objectives: Vec<f64> = deltas.iter().map(|d| d * 0.5).collect();
            let b = RankedBatch::new(sols(n), &deltas, &objectives).unwrap();
            let mut sorted = b.ranking().to_vec();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            for w in b.ranking().windows(2) {
                prop_assert!(deltas[w[0]] >= deltas[w[1]]);
            }
        }
    }
}
