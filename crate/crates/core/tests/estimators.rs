//! Concordance estimators and censoring curves against direct enumeration.

use cindex_core::concordance::{pair_weights, smoothed_c_gradient, smoothed_c_risk};
use cindex_core::{censoring_km, harrell_c, uno_c, Error, SmoothingParam, SurvivalObservation};
use proptest::prelude::*;

/// Product-limit censoring survival at `t`; censorings at time `s` see every
/// observation with a later time plus the censorings tied at `s`.
fn reference_g(times: &[f64], events: &[bool], t: f64) -> f64 {
    let mut jumps: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(&s, &e)| !e && s <= t)
        .map(|(&s, _)| s)
        .collect();
    jumps.sort_by(f64::total_cmp);
    jumps.dedup();
    jumps
        .iter()
        .map(|&s| {
            let censored = times
                .iter()
                .zip(events)
                .filter(|(&x, &e)| x == s && !e)
                .count();
            let later = times.iter().filter(|&&x| x > s).count();
            1.0 - censored as f64 / (later + censored) as f64
        })
        .product()
}

/// Ordinary event-time Kaplan-Meier at `t` (censored at `s` stay at risk at `s`).
fn reference_event_km(times: &[f64], events: &[bool], t: f64) -> f64 {
    let mut s = 1.0;
    for (&x, _) in times.iter().zip(events).filter(|(&x, &e)| e && x <= t) {
        let at_risk = times.iter().filter(|&&y| y >= x).count();
        s *= 1.0 - 1.0 / at_risk as f64;
    }
    s
}

fn brute_force(
    times: &[f64],
    events: &[bool],
    eta: &[f64],
    weight: impl Fn(usize) -> f64,
) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..times.len() {
        if !events[i] {
            continue;
        }
        for k in 0..times.len() {
            if times[i] < times[k] {
                let w = weight(i);
                den += w;
                if eta[i] > eta[k] {
                    num += w;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

fn outcomes(times: &[f64], events: &[bool]) -> Vec<SurvivalObservation> {
    times
        .iter()
        .zip(events)
        .map(|(&t, &e)| SurvivalObservation::new(t, e).unwrap())
        .collect()
}

/// Integer-valued times (ties likely), events and markers.
fn sample(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec((1u32..12).prop_map(f64::from), n),
            prop::collection::vec(prop::bool::weighted(0.7), n),
            prop::collection::vec((-4i32..=4).prop_map(f64::from), n),
        )
    })
}

fn distinct_times(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            Just((1..=n).map(|t| t as f64).collect::<Vec<_>>()).prop_shuffle(),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #[test]
    fn harrell_matches_pair_enumeration((times, events, eta) in sample(25)) {
        let expected = brute_force(&times, &events, &eta, |_| 1.0);
        match harrell_c(&outcomes(&times, &events), &eta) {
            Ok(c) => prop_assert!((c - expected.unwrap()).abs() < 1e-12),
            Err(e) => {
                prop_assert!(matches!(e, Error::NoUsablePairs));
                prop_assert!(expected.is_none());
            }
        }
    }

    #[test]
    fn uno_matches_weighted_enumeration((times, events, eta) in sample(25)) {
        let obs = outcomes(&times, &events);
        let g = censoring_km(&obs).unwrap();
        let expected = brute_force(&times, &events, &eta, |i| {
            let gi = reference_g(&times, &events, times[i]);
            if gi > 0.0 { gi.powi(-2) } else { 0.0 }
        });
        match uno_c(&obs, &eta, &g) {
            Ok(c) => {
                let want = expected.unwrap();
                prop_assert!((c - want).abs() < 1e-12, "{} vs {}", c, want);
                prop_assert!((0.0..=1.0).contains(&c));
            }
            Err(e) => {
                prop_assert!(matches!(e, Error::NoUsablePairs));
                prop_assert!(expected.is_none());
            }
        }
    }

    #[test]
    fn censoring_curve_matches_reference((times, events, _) in sample(20)) {
        let g = censoring_km(&outcomes(&times, &events)).unwrap();
        for t in 0..=13 {
            let t = t as f64 + 0.5 * (t % 2) as f64;
            prop_assert!((g.evaluate(t) - reference_g(&times, &events, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn flipped_censoring_curve_is_event_km((times, events) in distinct_times(10)) {
        let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
        let g = censoring_km(&outcomes(&times, &flipped)).unwrap();
        for step in 0..=24 {
            let t = step as f64 * 0.5;
            prop_assert!((g.evaluate(t) - reference_event_km(&times, &events, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn censoring_curve_is_non_increasing((times, events, _) in sample(40)) {
        let g = censoring_km(&outcomes(&times, &events)).unwrap();
        let mut last = 1.0;
        for step in 0..=300 {
            let v = g.evaluate(step as f64 * 0.05);
            prop_assert!(v <= last && v >= 0.0);
            last = v;
        }
    }

    #[test]
    fn gradient_matches_central_differences(
        (times, events) in distinct_times(30),
        seed in prop::collection::vec(-1.0f64..1.0, 30),
        sigma in 0.05f64..1.0,
    ) {
        let obs = outcomes(&times, &events);
        let g = censoring_km(&obs).unwrap();
        let Ok(w) = pair_weights(&obs, &g) else { return Ok(()) };
        let eta = &seed[..obs.len()];
        let sigma = SmoothingParam::new(sigma).unwrap();
        let grad = smoothed_c_gradient(&w, eta, sigma);
        prop_assert!(grad.iter().sum::<f64>().abs() < 1e-10);
        let h = 1e-6;
        let mut probe = eta.to_vec();
        for i in 0..eta.len() {
            probe[i] = eta[i] + h;
            let up = smoothed_c_risk(&w, &probe, sigma);
            probe[i] = eta[i] - h;
            let down = smoothed_c_risk(&w, &probe, sigma);
            probe[i] = eta[i];
            let fd = (up - down) / (2.0 * h);
            prop_assert!((-grad[i] - fd).abs() <= 1e-6 * fd.abs().max(1e-3));
        }
        let risk = smoothed_c_risk(&w, eta, sigma);
        prop_assert!((-1.0..=0.0).contains(&risk));
    }

    #[test]
    fn dense_weights_follow_definition((times, events, _) in sample(15)) {
        let obs = outcomes(&times, &events);
        let g = censoring_km(&obs).unwrap();
        let Ok(w) = pair_weights(&obs, &g) else { return Ok(()) };
        let dense = w.to_dense();
        let raw = |i: usize, k: usize| {
            let gi = reference_g(&times, &events, times[i]);
            if events[i] && times[i] < times[k] && gi > 0.0 { gi.powi(-2) } else { 0.0 }
        };
        let total: f64 = (0..obs.len()).flat_map(|i| (0..obs.len()).map(move |k| (i, k))).map(|(i, k)| raw(i, k)).sum();
        for (i, row) in dense.iter().enumerate() {
            for (k, &value) in row.iter().enumerate() {
                prop_assert!((value - raw(i, k) / total).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn estimators_ignore_monotone_transforms((times, events, eta) in sample(30)) {
        let obs = outcomes(&times, &events);
        let g = censoring_km(&obs).unwrap();
        let (Ok(h), Ok(u)) = (harrell_c(&obs, &eta), uno_c(&obs, &eta, &g)) else { return Ok(()) };
        for f in [f64::exp, |x: f64| x * x * x, |x: f64| 0.5 * x - 3.0] {
            let moved: Vec<f64> = eta.iter().map(|&x| f(x)).collect();
            prop_assert_eq!(harrell_c(&obs, &moved).unwrap(), h);
            prop_assert_eq!(uno_c(&obs, &moved, &g).unwrap(), u);
        }
    }
}

#[test]
fn uno_hand_example_with_censored_middle_time() {
    // times (1, 2, 3, 4), events (1, 0, 1, 1): G = 1 before 2, then 2/3.
    let obs = outcomes(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true]);
    let g = censoring_km(&obs).unwrap();
    assert!((g.evaluate(1.9) - 1.0).abs() < 1e-15);
    assert!((g.evaluate(2.0) - 2.0 / 3.0).abs() < 1e-15);
    // pairs (1,2) (1,3) (1,4) weight 1, pair (3,4) weight 9/4; eta (1,2,3,4) is fully discordant
    let eta = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(uno_c(&obs, &eta, &g).unwrap(), 0.0);
    // eta (4, 1, 3, 2): pairs (1,2) (1,3) (1,4) (3,4) all concordant
    let eta = [4.0, 1.0, 3.0, 2.0];
    assert_eq!(uno_c(&obs, &eta, &g).unwrap(), 1.0);
    // eta (4, 1, 2, 3): only pair (3,4) discordant, weight 9/4 of 21/4
    let eta = [4.0, 1.0, 2.0, 3.0];
    assert!((uno_c(&obs, &eta, &g).unwrap() - 12.0 / 21.0).abs() < 1e-15);
}
