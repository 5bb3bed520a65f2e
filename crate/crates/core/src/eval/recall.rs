//! Recall@N, AR@1 and AR@1%.

use serde::Serialize;

use super::index::RetrievalResult;

/// Database entries that make up "1%": `max(1, round(0.01·M))`.
pub fn one_percent_cutoff(database_size: usize) -> usize {
    ((0.01 * database_size as f64).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallCurve {
    pub threshold_m: f64,
    pub database_size: usize,
    /// `recall[n - 1]` is recall@n, as a fraction.
    pub recall: Vec<f64>,
    pub cutoff: usize,
    pub ar1: f64,
    pub ar1_percent: f64,
    /// Queries with at least one database frame within the threshold.
    pub evaluated: usize,
    /// Queries without any true match in the database; excluded from the ratios.
    pub skipped: usize,
}

/// Recall curve up to `max_n` (extended to the 1% cutoff if that is larger).
///
/// Results must carry at least that many neighbours, otherwise the tail of the
/// curve undercounts.
pub fn recall_at_n(results: &[RetrievalResult], threshold_m: f64, database_size: usize, max_n: usize) -> RecallCurve {
    let cutoff = one_percent_cutoff(database_size);
    let n_max = max_n.max(cutoff).max(1);
    let eligible: Vec<&RetrievalResult> = results.iter().filter(|r| r.has_true_match(threshold_m)).collect();
    let mut hits = vec![0usize; n_max];
    for r in &eligible {
        if let Some(first) = r.neighbors.iter().take(n_max).position(|nb| nb.geo_m <= threshold_m) {
            for h in &mut hits[first..] {
                *h += 1;
            }
        }
    }
    let frac = |h: usize| {
        if eligible.is_empty() {
            0.0
        } else {
            h as f64 / eligible.len() as f64
        }
    };
    let recall: Vec<f64> = hits.into_iter().map(frac).collect();
    RecallCurve {
        threshold_m,
        database_size,
        ar1: recall[0],
        ar1_percent: recall[cutoff - 1],
        recall,
        cutoff,
        evaluated: eligible.len(),
        skipped: results.len() - eligible.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::index::Neighbor;

    fn result(geo: &[f64]) -> RetrievalResult {
        RetrievalResult {
            query_id: 0,
            neighbors: geo
                .iter()
                .enumerate()
                .map(|(i, &g)| Neighbor {
                    id: i,
                    distance: i as f64,
                    geo_m: g,
                })
                .collect(),
            nearest_geo_m: geo.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    #[test]
    fn cutoff_rounding() {
        assert_eq!(one_percent_cutoff(1), 1);
        assert_eq!(one_percent_cutoff(100), 1);
        assert_eq!(one_percent_cutoff(149), 1);
        assert_eq!(one_percent_cutoff(150), 2);
        assert_eq!(one_percent_cutoff(3000), 30);
    }

    #[test]
    fn success_at_rank_two_only() {
        let c = recall_at_n(&[result(&[20.0, 1.0, 30.0])], 5.0, 3, 3);
        assert_eq!(c.recall, vec![0.0, 1.0, 1.0]);
        assert_eq!((c.ar1, c.ar1_percent), (0.0, 0.0));
    }

    #[test]
    fn all_first_hits_give_full_recall() {
        let rs = vec![result(&[0.5, 40.0]), result(&[2.0, 9.0])];
        let c = recall_at_n(&rs, 5.0, 100, 2);
        assert_eq!(c.ar1, 1.0);
        assert_eq!(c.ar1_percent, c.ar1);
    }

    #[test]
    fn queries_without_true_match_are_skipped() {
        let rs = vec![result(&[0.5]), result(&[50.0])];
        let c = recall_at_n(&rs, 5.0, 1, 1);
        assert_eq!((c.evaluated, c.skipped, c.ar1), (1, 1, 1.0));
        let none = recall_at_n(&rs[1..], 5.0, 1, 1);
        assert_eq!(none.ar1, 0.0);
    }
}
