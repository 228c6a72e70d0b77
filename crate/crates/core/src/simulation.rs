//! Synthetic survival data: equicorrelated Gaussian markers, log-logistic AFT
//! event times and independent exponential censoring calibrated to a target
//! censoring rate.
//!
//! Random streams under a dataset seed: the shared factor, the logistic noise
//! and the censoring draws each have their own stream, and every marker column
//! has its own stream. Outcomes therefore depend only on the first four
//! columns, and any subset of columns can be regenerated on its own.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};

use crate::data::{SurvivalDataset, SurvivalObservation};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

const FACTOR_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const CENSOR_STREAM: u64 = 2;
const COLUMN_STREAM_BASE: u64 = 16;
const PILOT_TAG: u64 = 0x70_69_6c_6f_74;

/// Size of the pilot sample used to calibrate the censoring scale.
pub const PILOT_SIZE: usize = 100_000;

/// Generated log-times are clamped to this magnitude so that times stay
/// positive and finite in double precision; clamping keeps the time ordering.
pub const LOG_TIME_LIMIT: f64 = 700.0;

/// Number of markers that drive the outcome.
pub const INFORMATIVE: usize = 4;

/// `intercept + Σ slope_l x_l` over the first four markers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AftCoefficients {
    pub intercept: f64,
    pub slopes: [f64; INFORMATIVE],
}

impl AftCoefficients {
    fn eval(&self, markers: &[Vec<f64>], i: usize) -> f64 {
        self.intercept
            + self
                .slopes
                .iter()
                .zip(markers)
                .map(|(b, col)| b * col[i])
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    /// Location of log T.
    pub mu: AftCoefficients,
    /// Log of the scale of log T.
    pub phi: AftCoefficients,
    pub target_censoring: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 100,
            p: 1000,
            rho: 0.5,
            mu: AftCoefficients {
                intercept: 1.5,
                slopes: [1.5, 1.0, -1.0, -1.5],
            },
            phi: AftCoefficients {
                intercept: -1.0,
                slopes: [2.0, -2.0, 1.0, -1.0],
            },
            target_censoring: 0.5,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter(
                "sample size must be positive".into(),
            ));
        }
        if self.p < INFORMATIVE {
            return Err(Error::InvalidParameter(format!(
                "need at least {INFORMATIVE} markers, got {}",
                self.p
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!(
                "correlation must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !(self.target_censoring > 0.0 && self.target_censoring < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target censoring rate must lie in (0, 1), got {}",
                self.target_censoring
            )));
        }
        Ok(())
    }
}

/// A simulated dataset with its latent true marker.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub dataset: SurvivalDataset,
    /// `η_μ(x_i)`, the location of log T; larger means longer survival.
    pub eta_mu: Vec<f64>,
    /// Mean of the exponential censoring distribution.
    pub censoring_mean: f64,
    pub realized_censoring: f64,
}

impl GeneratedData {
    /// `-η_μ`, oriented for the concordance estimators.
    pub fn true_risk_score(&self) -> Vec<f64> {
        self.eta_mu.iter().map(|e| -e).collect()
    }
}

/// `n × p` equicorrelated standard normal markers, column-major.
pub fn sample_markers(n: usize, p: usize, rho: f64, seed: u64) -> Vec<Vec<f64>> {
    let columns: Vec<usize> = (0..p).collect();
    sample_marker_columns(n, rho, seed, &columns)
}

/// The listed columns (zero-based) of the marker matrix for `seed`, each
/// `x_l = √ρ z_0 + √(1-ρ) z_l`.
pub fn sample_marker_columns(n: usize, rho: f64, seed: u64, columns: &[usize]) -> Vec<Vec<f64>> {
    let mut factor_rng = stream(seed, FACTOR_STREAM);
    let factor: Vec<f64> = (0..n)
        .map(|_| StandardNormal.sample(&mut factor_rng))
        .collect();
    let shared = rho.sqrt();
    let own = (1.0 - rho).sqrt();
    columns
        .iter()
        .map(|&l| {
            let mut rng = stream(seed, COLUMN_STREAM_BASE + l as u64);
            factor
                .iter()
                .map(|z0| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    shared * z0 + own * z
                })
                .collect()
        })
        .collect()
}

/// True location `η_μ` for each row; `markers` holds at least the first four columns.
pub fn eta_mu(markers: &[Vec<f64>], config: &SimulationConfig) -> Vec<f64> {
    let n = markers.first().map_or(0, Vec::len);
    (0..n).map(|i| config.mu.eval(markers, i)).collect()
}

/// Log-logistic AFT event times `T = exp(η_μ + exp(η_φ) W)`, `W` standard logistic.
pub fn sample_survival(markers: &[Vec<f64>], config: &SimulationConfig, seed: u64) -> Vec<f64> {
    assert!(
        markers.len() >= INFORMATIVE,
        "need the four informative markers"
    );
    let n = markers[0].len();
    let mut rng = stream(seed, NOISE_STREAM);
    (0..n)
        .map(|i| {
            let u: f64 = rng.sample(Open01);
            let w = (u / (1.0 - u)).ln();
            let log_t = config.mu.eval(markers, i) + config.phi.eval(markers, i).exp() * w;
            log_t.clamp(-LOG_TIME_LIMIT, LOG_TIME_LIMIT).exp()
        })
        .collect()
}

fn unit_exponentials(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, CENSOR_STREAM);
    (0..n)
        .map(|_| {
            let e: f64 = Exp1.sample(&mut rng);
            e.max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Mean `θ` of the exponential censoring distribution that yields the
/// configured censoring rate, found by bisection on `log θ` over a pilot
/// sample of [`PILOT_SIZE`] draws.
pub fn calibrate_censoring(config: &SimulationConfig) -> Result<f64> {
    config.validate()?;
    let pilot_seed = derive_seed(config.seed, PILOT_TAG);
    let informative: Vec<usize> = (0..INFORMATIVE).collect();
    let markers = sample_marker_columns(PILOT_SIZE, config.rho, pilot_seed, &informative);
    let times = sample_survival(&markers, config, pilot_seed);
    let exps = unit_exponentials(PILOT_SIZE, pilot_seed);
    // censored iff θ E < T iff log θ < log T - log E
    let mut thresholds: Vec<f64> = times
        .iter()
        .zip(&exps)
        .map(|(t, e)| t.ln() - e.ln())
        .collect();
    thresholds.sort_by(f64::total_cmp);
    let rate = |log_theta: f64| {
        let uncensored = thresholds.partition_point(|&q| q <= log_theta);
        1.0 - uncensored as f64 / thresholds.len() as f64
    };

    let target = config.target_censoring;
    let mut lo = thresholds[0] - 1.0;
    let mut hi = thresholds[thresholds.len() - 1] + 1.0;
    if !(rate(lo) >= target && rate(hi) <= target) {
        return Err(Error::Calibration(format!(
            "target rate {target} not bracketed by [{}, {}]",
            rate(hi),
            rate(lo)
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let r = rate(mid);
        if (r - target).abs() <= 1e-3 {
            break;
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let achieved = rate(mid);
    if (achieved - target).abs() > 0.01 {
        return Err(Error::Calibration(format!(
            "pilot censoring rate {achieved:.4} misses target {target}"
        )));
    }
    Ok(mid.exp())
}

/// Realized censoring rate of a pilot-sized sample at censoring mean `theta`.
pub fn pilot_censoring_rate(config: &SimulationConfig, theta: f64, seed: u64) -> f64 {
    let informative: Vec<usize> = (0..INFORMATIVE).collect();
    let markers = sample_marker_columns(PILOT_SIZE, config.rho, seed, &informative);
    let times = sample_survival(&markers, config, seed);
    let exps = unit_exponentials(PILOT_SIZE, seed);
    let censored = times
        .iter()
        .zip(&exps)
        .filter(|(t, e)| theta * **e < **t)
        .count();
    censored as f64 / PILOT_SIZE as f64
}

/// Dataset with marker columns `columns` (zero-based, named `x{l+1}`) using
/// censoring mean `theta`. Outcomes always come from the first four markers.
pub fn generate_columns(
    config: &SimulationConfig,
    theta: f64,
    columns: &[usize],
) -> Result<GeneratedData> {
    config.validate()?;
    if theta.is_nan() || theta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "censoring mean must be positive, got {theta}"
        )));
    }
    if let Some(&bad) = columns.iter().find(|&&l| l >= config.p) {
        return Err(Error::InvalidParameter(format!(
            "column {bad} out of range for p = {}",
            config.p
        )));
    }
    let informative: Vec<usize> = (0..INFORMATIVE).collect();
    let drivers = sample_marker_columns(config.n, config.rho, config.seed, &informative);
    let times = sample_survival(&drivers, config, config.seed);
    let exps = unit_exponentials(config.n, config.seed);
    let eta = eta_mu(&drivers, config);

    let outcomes: Vec<SurvivalObservation> = times
        .iter()
        .zip(&exps)
        .map(|(&t, &e)| {
            let c = theta * e;
            SurvivalObservation {
                time: t.min(c),
                event: t <= c,
            }
        })
        .collect();
    let censored = outcomes.iter().filter(|o| !o.event).count();

    let mut markers = Vec::with_capacity(columns.len());
    let extra: Vec<usize> = columns
        .iter()
        .copied()
        .filter(|&l| l >= INFORMATIVE)
        .collect();
    let mut extra_cols =
        sample_marker_columns(config.n, config.rho, config.seed, &extra).into_iter();
    for &l in columns {
        if l < INFORMATIVE {
            markers.push(drivers[l].clone());
        } else {
            markers.push(extra_cols.next().expect("one generated column per request"));
        }
    }
    let names = columns.iter().map(|l| format!("x{}", l + 1)).collect();
    Ok(GeneratedData {
        dataset: SurvivalDataset::new(outcomes, markers, names)?,
        eta_mu: eta,
        censoring_mean: theta,
        realized_censoring: censored as f64 / config.n as f64,
    })
}

/// Full dataset with censoring mean `theta`.
pub fn generate_with_censoring_mean(
    config: &SimulationConfig,
    theta: f64,
) -> Result<GeneratedData> {
    let columns: Vec<usize> = (0..config.p).collect();
    generate_columns(config, theta, &columns)
}

/// Calibrates censoring for `config` and generates the full dataset.
pub fn generate_dataset(config: &SimulationConfig) -> Result<GeneratedData> {
    let theta = calibrate_censoring(config)?;
    generate_with_censoring_mean(config, theta)
}
