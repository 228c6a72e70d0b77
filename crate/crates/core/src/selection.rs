//! Univariate marker ranking by Uno's concordance and top-k selection.

use rayon::prelude::*;

use crate::concordance::WeightedConcordance;
use crate::data::{KaplanMeierCurve, SurvivalDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedMarker {
    pub index: usize,
    /// Uno's C of the raw feature, before any folding.
    pub concordance: f64,
    /// Ranking score: `concordance`, or `max(c, 1 - c)` when folded.
    pub score: f64,
}

/// Features ordered by non-increasing score; equal scores keep index order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerRanking {
    pub entries: Vec<RankedMarker>,
    pub folded: bool,
}

impl MarkerRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Zero-based position of feature `index` in the ranking.
    pub fn position(&self, index: usize) -> Option<usize> {
        self.entries.iter().position(|e| e.index == index)
    }
}

/// Scores every feature of `data` with Uno's C under `g_curve`.
///
/// With `fold`, negatively associated markers rank as high as positively
/// associated ones.
pub fn rank_markers(
    data: &SurvivalDataset,
    g_curve: &KaplanMeierCurve,
    fold: bool,
) -> Result<MarkerRanking> {
    let scorer = WeightedConcordance::uno(data.outcomes(), g_curve)?;
    let concordances = data
        .columns()
        .par_iter()
        .map(|column| scorer.evaluate(column))
        .collect::<Result<Vec<f64>>>()?;
    let mut entries: Vec<RankedMarker> = concordances
        .into_iter()
        .enumerate()
        .map(|(index, c)| RankedMarker {
            index,
            concordance: c,
            score: if fold { c.max(1.0 - c) } else { c },
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    Ok(MarkerRanking {
        entries,
        folded: fold,
    })
}

/// Indices of the first `p_star` ranked features.
pub fn select_top(ranking: &MarkerRanking, p_star: usize) -> Result<Vec<usize>> {
    if p_star == 0 || p_star > ranking.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot select {p_star} of {} markers",
            ranking.len()
        )));
    }
    Ok(ranking.entries[..p_star].iter().map(|e| e.index).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{censoring_km, SurvivalObservation};

    fn data(columns: Vec<Vec<f64>>) -> SurvivalDataset {
        let n = columns[0].len();
        let outcomes = (0..n)
            .map(|i| SurvivalObservation::new(i as f64 + 1.0, i % 3 != 1).unwrap())
            .collect();
        let names = (0..columns.len()).map(|l| format!("f{l}")).collect();
        SurvivalDataset::new(outcomes, columns, names).unwrap()
    }

    #[test]
    fn negative_time_marker_scores_one() {
        let n = 12;
        let outcomes: Vec<_> = (1..=n)
            .map(|i| SurvivalObservation::new(i as f64, true).unwrap())
            .collect();
        let minus_t: Vec<f64> = outcomes.iter().map(|o| -o.time).collect();
        let d = SurvivalDataset::new(outcomes, vec![minus_t], vec!["m".into()]).unwrap();
        let g = censoring_km(d.outcomes()).unwrap();
        let r = rank_markers(&d, &g, false).unwrap();
        assert_eq!(r.entries[0].score, 1.0);
    }

    #[test]
    fn folding_promotes_negative_markers() {
        let n = 15;
        let good: Vec<f64> = (0..n).map(|i| -(i as f64)).collect();
        let bad: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let noise: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64).collect();
        let d = data(vec![noise, bad, good]);
        let g = censoring_km(d.outcomes()).unwrap();
        let raw = rank_markers(&d, &g, false).unwrap();
        assert_eq!(raw.entries[0].index, 2);
        assert_eq!(raw.entries[2].index, 1);
        let folded = rank_markers(&d, &g, true).unwrap();
        assert_eq!(select_top(&folded, 2).unwrap(), vec![1, 2]);
        assert!(folded.entries.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn select_top_bounds() {
        let d = data(vec![vec![1.0, 2.0, 3.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]]);
        let g = censoring_km(d.outcomes()).unwrap();
        let r = rank_markers(&d, &g, true).unwrap();
        assert_eq!(select_top(&r, 2).unwrap().len(), 2);
        assert_eq!(select_top(&r, 1).unwrap(), vec![r.entries[0].index]);
        assert!(select_top(&r, 3).is_err());
        assert!(select_top(&r, 0).is_err());
    }
}
