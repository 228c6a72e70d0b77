//! Concordance estimators and the smoothed concordance risk.
//!
//! Convention throughout: larger `eta` means higher risk, so a pair `(i, k)`
//! with `T̃_i < T̃_k` and `Δ_i = 1` is concordant when `eta_i > eta_k`.
//! Ties in `eta` count as discordant (strict inequality).

use crate::data::{KaplanMeierCurve, SurvivalObservation};
use crate::error::{Error, Result};

/// Bandwidth of the sigmoid that replaces the pair indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParam(f64);

impl SmoothingParam {
    pub const DEFAULT: f64 = 0.1;

    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self(sigma))
        } else {
            Err(Error::InvalidParameter(format!(
                "smoothing parameter sigma must be positive and finite, got {sigma}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for SmoothingParam {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

fn check_eta(n: usize, eta: &[f64]) -> Result<()> {
    if eta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: eta.len(),
        });
    }
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("marker values must be finite".into()));
    }
    Ok(())
}

/// Inverse squared censoring survival for events, 0 for censored rows and for
/// rows where the censoring curve has dropped to 0.
fn ipcw_factors(outcomes: &[SurvivalObservation], g_curve: &KaplanMeierCurve) -> Vec<f64> {
    outcomes
        .iter()
        .map(|o| {
            if !o.event {
                return 0.0;
            }
            let g = g_curve.evaluate(o.time);
            if g > 0.0 {
                1.0 / (g * g)
            } else {
                0.0
            }
        })
        .collect()
}

/// Fenwick tree over marker ranks, counting inserted observations.
struct RankCounter {
    tree: Vec<u64>,
}

impl RankCounter {
    fn new(size: usize) -> Self {
        Self {
            tree: vec![0; size + 1],
        }
    }

    fn insert(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks strictly below `rank`.
    fn count_below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut total = 0;
        while i > 0 {
            total += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        total
    }
}

/// Outcome-dependent part of a weighted concordance estimator, reusable across
/// many marker vectors (e.g. one per candidate feature).
///
/// Estimates `Σ_{i,k} c_i I(T̃_i < T̃_k) I(η_i > η_k) / Σ_{i,k} c_i I(T̃_i < T̃_k)`
/// in `O(n log n)` per marker vector.
#[derive(Debug, Clone)]
pub struct WeightedConcordance {
    /// Indices sorted by decreasing time.
    order: Vec<usize>,
    /// Boundaries of equal-time groups within `order`.
    groups: Vec<(usize, usize)>,
    factors: Vec<f64>,
    denominator: f64,
}

impl WeightedConcordance {
    pub fn harrell(outcomes: &[SurvivalObservation]) -> Result<Self> {
        let factors = outcomes
            .iter()
            .map(|o| if o.event { 1.0 } else { 0.0 })
            .collect();
        Self::with_factors(outcomes, factors)
    }

    pub fn uno(outcomes: &[SurvivalObservation], g_curve: &KaplanMeierCurve) -> Result<Self> {
        Self::with_factors(outcomes, ipcw_factors(outcomes, g_curve))
    }

    fn with_factors(outcomes: &[SurvivalObservation], factors: Vec<f64>) -> Result<Self> {
        let n = outcomes.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| outcomes[b].time.total_cmp(&outcomes[a].time));
        let mut groups = Vec::new();
        let mut start = 0;
        while start < n {
            let t = outcomes[order[start]].time;
            let mut end = start;
            while end < n && outcomes[order[end]].time == t {
                end += 1;
            }
            groups.push((start, end));
            start = end;
        }
        // observations with strictly larger time are exactly those in earlier groups
        let mut denominator = 0.0;
        for &(s, e) in &groups {
            for &i in &order[s..e] {
                denominator += factors[i] * s as f64;
            }
        }
        if denominator <= 0.0 {
            return Err(Error::NoUsablePairs);
        }
        Ok(Self {
            order,
            groups,
            factors,
            denominator,
        })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn evaluate(&self, eta: &[f64]) -> Result<f64> {
        let n = self.n();
        check_eta(n, eta)?;
        // dense ranks of eta, ties share a rank
        let mut by_eta: Vec<usize> = (0..n).collect();
        by_eta.sort_by(|&a, &b| eta[a].total_cmp(&eta[b]));
        let mut rank = vec![0usize; n];
        let mut r = 0;
        for w in 0..n {
            if w > 0 && eta[by_eta[w]] != eta[by_eta[w - 1]] {
                r += 1;
            }
            rank[by_eta[w]] = r;
        }

        let mut counter = RankCounter::new(r + 1);
        let mut numerator = 0.0;
        for &(s, e) in &self.groups {
            for &i in &self.order[s..e] {
                if self.factors[i] > 0.0 {
                    numerator += self.factors[i] * counter.count_below(rank[i]) as f64;
                }
            }
            for &i in &self.order[s..e] {
                counter.insert(rank[i]);
            }
        }
        Ok(numerator / self.denominator)
    }
}

/// Harrell's concordance estimator.
pub fn harrell_c(outcomes: &[SurvivalObservation], eta: &[f64]) -> Result<f64> {
    check_eta(outcomes.len(), eta)?;
    WeightedConcordance::harrell(outcomes)?.evaluate(eta)
}

/// Uno's IPCW concordance estimator with censoring curve `g_curve`
/// (fitted on the learning sample).
pub fn uno_c(
    outcomes: &[SurvivalObservation],
    eta: &[f64],
    g_curve: &KaplanMeierCurve,
) -> Result<f64> {
    check_eta(outcomes.len(), eta)?;
    WeightedConcordance::uno(outcomes, g_curve)?.evaluate(eta)
}

/// Normalized IPCW pair weights
/// `w_ik = Δ_i G(T̃_i)^-2 I(T̃_i < T̃_k) / Σ Δ_i G(T̃_i)^-2 I(T̃_i < T̃_k)`.
///
/// Every row of the matrix is a single value on the set `{k : T̃_k > T̃_i}`,
/// so the matrix is held as per-row weights over a time-sorted index; the
/// double sums stream over it without materializing `n × n` entries.
#[derive(Debug, Clone)]
pub struct PairWeights {
    times: Vec<f64>,
    /// Weight of each pair in row `i`, by original index.
    row_weight: Vec<f64>,
    /// Indices sorted by increasing time.
    order: Vec<usize>,
    /// For sorted position `a`, the first sorted position with strictly larger time.
    later_start: Vec<usize>,
    sorted_weight: Vec<f64>,
    /// Sorted positions whose rows carry positive weight.
    active: Vec<usize>,
    total: f64,
    pairs: usize,
}

impl PairWeights {
    pub fn new(outcomes: &[SurvivalObservation], g_curve: &KaplanMeierCurve) -> Result<Self> {
        let n = outcomes.len();
        let factors = ipcw_factors(outcomes, g_curve);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| outcomes[a].time.total_cmp(&outcomes[b].time));

        let mut later_start = vec![n; n];
        let mut a = 0;
        while a < n {
            let t = outcomes[order[a]].time;
            let mut end = a;
            while end < n && outcomes[order[end]].time == t {
                end += 1;
            }
            later_start[a..end].fill(end);
            a = end;
        }

        let mut normalizer = 0.0;
        let mut pairs = 0;
        for a in 0..n {
            let count = n - later_start[a];
            let c = factors[order[a]];
            if c > 0.0 && count > 0 {
                normalizer += c * count as f64;
                pairs += count;
            }
        }
        if normalizer <= 0.0 {
            return Err(Error::NoUsablePairs);
        }

        let mut row_weight = vec![0.0; n];
        let mut sorted_weight = vec![0.0; n];
        let mut active = Vec::new();
        let mut total = 0.0;
        for a in 0..n {
            let count = n - later_start[a];
            let c = factors[order[a]];
            if c > 0.0 && count > 0 {
                let w = c / normalizer;
                row_weight[order[a]] = w;
                sorted_weight[a] = w;
                active.push(a);
                total += w * count as f64;
            }
        }
        Ok(Self {
            times: outcomes.iter().map(|o| o.time).collect(),
            row_weight,
            order,
            later_start,
            sorted_weight,
            active,
            total,
            pairs,
        })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    /// Entry `w_ik`.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        if self.times[i] < self.times[k] {
            self.row_weight[i]
        } else {
            0.0
        }
    }

    /// Sum of all entries; 1 up to rounding.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of pairs with positive weight.
    pub fn n_pairs(&self) -> usize {
        self.pairs
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|k| self.get(i, k)).collect())
            .collect()
    }

    fn sorted_eta(&self, eta: &[f64]) -> Vec<f64> {
        assert_eq!(
            eta.len(),
            self.n(),
            "marker length must match the weight matrix"
        );
        self.order.iter().map(|&i| eta[i]).collect()
    }

    /// Smoothed risk `-Σ w_ik K(η_i - η_k)`.
    pub fn smoothed_risk(&self, eta: &[f64], sigma: SmoothingParam) -> f64 {
        let es = self.sorted_eta(eta);
        let inv_sigma = 1.0 / sigma.get();
        let mut risk = 0.0;
        for &a in &self.active {
            let ea = es[a];
            let mut row = 0.0;
            for &eb in &es[self.later_start[a]..] {
                row += sigmoid_parts((ea - eb) * inv_sigma).0;
            }
            risk -= self.sorted_weight[a] * row;
        }
        risk
    }

    /// Smoothed risk and its negative gradient, written into `negative_gradient`.
    pub fn smoothed_risk_and_gradient(
        &self,
        eta: &[f64],
        sigma: SmoothingParam,
        negative_gradient: &mut [f64],
    ) -> f64 {
        let n = self.n();
        assert_eq!(negative_gradient.len(), n, "gradient buffer length");
        let es = self.sorted_eta(eta);
        let inv_sigma = 1.0 / sigma.get();
        let mut sorted_grad = vec![0.0; n];
        let mut risk = 0.0;
        for &a in &self.active {
            let ea = es[a];
            let w = self.sorted_weight[a];
            let scale = w * inv_sigma;
            let start = self.later_start[a];
            let mut row_value = 0.0;
            let mut row_slope = 0.0;
            for (eb, gb) in es[start..].iter().zip(&mut sorted_grad[start..]) {
                let (s, slope) = sigmoid_parts((ea - eb) * inv_sigma);
                row_value += s;
                row_slope += slope;
                *gb -= scale * slope;
            }
            risk -= w * row_value;
            sorted_grad[a] += scale * row_slope;
        }
        for (a, &i) in self.order.iter().enumerate() {
            negative_gradient[i] = sorted_grad[a];
        }
        risk
    }
}

/// Beyond this magnitude of `u / σ` the sigmoid is replaced by its limit.
const SATURATION: f64 = 700.0;

/// `(K(d), K(d)(1 - K(d)))` for the logistic sigmoid `K(d) = 1 / (1 + e^{-d})`.
#[inline]
fn sigmoid_parts(d: f64) -> (f64, f64) {
    if d > SATURATION {
        return (1.0, 0.0);
    }
    if d < -SATURATION {
        return (0.0, 0.0);
    }
    let e = (-d.abs()).exp();
    let inv = 1.0 / (1.0 + e);
    let s = if d >= 0.0 { inv } else { e * inv };
    (s, e * inv * inv)
}

/// IPCW pair weights; see [`PairWeights`].
pub fn pair_weights(
    outcomes: &[SurvivalObservation],
    g_curve: &KaplanMeierCurve,
) -> Result<PairWeights> {
    PairWeights::new(outcomes, g_curve)
}

/// `-Σ_{i,k} w_ik / (1 + exp((η_k - η_i) / σ))`, in `[-1, 0]`.
pub fn smoothed_c_risk(weights: &PairWeights, eta: &[f64], sigma: SmoothingParam) -> f64 {
    weights.smoothed_risk(eta, sigma)
}

/// Negative gradient of [`smoothed_c_risk`] with respect to `eta`.
///
/// Each observation collects both of its pair roles: as the earlier time `i`
/// it gains `w_ik K'`, as the later time `k` it loses `w_jk K'`.
pub fn smoothed_c_gradient(weights: &PairWeights, eta: &[f64], sigma: SmoothingParam) -> Vec<f64> {
    let mut grad = vec![0.0; weights.n()];
    weights.smoothed_risk_and_gradient(eta, sigma, &mut grad);
    grad
}
