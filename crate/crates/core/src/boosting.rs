//! Component-wise gradient boosting of the smoothed concordance index with
//! simple linear base-learners.
//!
//! Each iteration evaluates the negative gradient `U` of the smoothed risk at
//! the current marker, fits `U` by least squares through the origin on every
//! centered covariate, and moves the single best-fitting coefficient by a
//! fraction `step_length` of its slope.
//!
//! The boosted marker follows the survival orientation: larger values mean
//! longer survival. The risk that is minimized is the smoothed concordance
//! risk of `-eta`, so coefficients carry the same signs as effects on the
//! (log) survival time.

use std::io::{BufRead, Write};

use crate::concordance::{PairWeights, SmoothingParam};
use crate::data::{censoring_km, SurvivalDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub m_stop: usize,
    pub step_length: f64,
    pub sigma: SmoothingParam,
}

impl BoostConfig {
    pub const DEFAULT_M_STOP: usize = 10_000;
    pub const DEFAULT_STEP_LENGTH: f64 = 0.1;

    pub fn new(m_stop: usize, step_length: f64, sigma: f64) -> Result<Self> {
        let config = Self {
            m_stop,
            step_length,
            sigma: SmoothingParam::new(sigma)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_stop < 1 {
            return Err(Error::InvalidParameter("m_stop must be at least 1".into()));
        }
        if !(self.step_length > 0.0 && self.step_length < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step length must lie in (0, 1), got {}",
                self.step_length
            )));
        }
        SmoothingParam::new(self.sigma.get())?;
        Ok(())
    }
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            m_stop: Self::DEFAULT_M_STOP,
            step_length: Self::DEFAULT_STEP_LENGTH,
            sigma: SmoothingParam::default(),
        }
    }
}

/// Least-squares fit of `u` on one centered covariate, no intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseLearnerFit {
    pub slope: f64,
    pub rss: f64,
}

/// `slope = <u, x> / <x, x>`; `None` for a zero covariate (no defined slope).
pub fn base_learner_fit(u: &[f64], x_centered: &[f64]) -> Option<BaseLearnerFit> {
    assert_eq!(u.len(), x_centered.len(), "base-learner input lengths");
    let xx: f64 = x_centered.iter().map(|x| x * x).sum();
    if xx <= 0.0 {
        return None;
    }
    let ux: f64 = u.iter().zip(x_centered).map(|(u, x)| u * x).sum();
    let slope = ux / xx;
    let rss = u
        .iter()
        .zip(x_centered)
        .map(|(u, x)| {
            let r = u - slope * x;
            r * r
        })
        .sum();
    Some(BaseLearnerFit { slope, rss })
}

/// Linear marker `eta = Σ β_l (x_l - mean_l)`; larger means longer survival.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMarkerModel {
    feature_names: Vec<String>,
    feature_means: Vec<f64>,
    coefficients: Vec<f64>,
}

impl LinearMarkerModel {
    pub fn new(
        feature_names: Vec<String>,
        feature_means: Vec<f64>,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        let p = feature_names.len();
        for len in [feature_means.len(), coefficients.len()] {
            if len != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: len,
                });
            }
        }
        if feature_means
            .iter()
            .chain(&coefficients)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidData("model parameters must be finite".into()));
        }
        Ok(Self {
            feature_names,
            feature_means,
            coefficients,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_means(&self) -> &[f64] {
        &self.feature_means
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|f| f == name)
            .map(|l| self.coefficients[l])
    }

    /// Marker values for covariate columns given in training order.
    pub fn predict(&self, columns: &[Vec<f64>]) -> Result<Vec<f64>> {
        if columns.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                found: columns.len(),
            });
        }
        let n = columns.first().map_or(0, Vec::len);
        let mut eta = vec![0.0; n];
        for ((column, &beta), &mean) in columns
            .iter()
            .zip(&self.coefficients)
            .zip(&self.feature_means)
        {
            if column.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: column.len(),
                });
            }
            if beta == 0.0 {
                continue;
            }
            for (e, x) in eta.iter_mut().zip(column) {
                *e += beta * (x - mean);
            }
        }
        Ok(eta)
    }

    /// Marker values for a dataset, matching columns by feature name.
    pub fn predict_dataset(&self, data: &SurvivalDataset) -> Result<Vec<f64>> {
        let columns = self
            .feature_names
            .iter()
            .map(|name| {
                data.feature_index(name)
                    .map(|l| data.column(l).to_vec())
                    .ok_or_else(|| {
                        Error::InvalidData(format!("feature '{name}' missing from dataset"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        if columns.is_empty() {
            return Ok(vec![0.0; data.n()]);
        }
        self.predict(&columns)
    }

    /// `-predict_dataset`: the risk-oriented score the concordance estimators expect.
    pub fn risk_score(&self, data: &SurvivalDataset) -> Result<Vec<f64>> {
        Ok(self
            .predict_dataset(data)?
            .into_iter()
            .map(|e| -e)
            .collect())
    }

    /// Writes the model as plain text: optional `key=value` config lines, then
    /// one tab-separated `name, mean, coefficient` line per feature.
    pub fn write_to<W: Write>(&self, mut out: W, config: Option<&BoostConfig>) -> Result<()> {
        let io = |source| Error::Io {
            path: "<model output>".into(),
            source,
        };
        writeln!(
            out,
            "# linear marker model (larger marker = longer survival)"
        )
        .map_err(io)?;
        if let Some(c) = config {
            writeln!(out, "m_stop={}", c.m_stop).map_err(io)?;
            writeln!(out, "step_length={}", c.step_length).map_err(io)?;
            writeln!(out, "sigma={}", c.sigma.get()).map_err(io)?;
        }
        writeln!(out, "feature\tmean\tcoefficient").map_err(io)?;
        for ((name, mean), beta) in self
            .feature_names
            .iter()
            .zip(&self.feature_means)
            .zip(&self.coefficients)
        {
            if name.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidData(format!(
                    "feature name {name:?} cannot be serialized"
                )));
            }
            writeln!(out, "{name}\t{mean}\t{beta}").map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<(Self, Option<BoostConfig>)> {
        let mut m_stop = None;
        let mut step_length = None;
        let mut sigma = None;
        let mut in_table = false;
        let mut names = Vec::new();
        let mut means = Vec::new();
        let mut coefs = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let row = idx + 1;
            let line = line.map_err(|source| Error::Io {
                path: "<model input>".into(),
                source,
            })?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                row,
                column: String::new(),
                message,
            };
            if !in_table {
                if line == "feature\tmean\tcoefficient" {
                    in_table = true;
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=value, got '{line}'")))?;
                let num = || {
                    value
                        .parse::<f64>()
                        .map_err(|_| bad(format!("bad value '{value}'")))
                };
                match key {
                    "m_stop" => {
                        m_stop = Some(
                            value
                                .parse::<usize>()
                                .map_err(|_| bad(format!("bad m_stop '{value}'")))?,
                        )
                    }
                    "step_length" => step_length = Some(num()?),
                    "sigma" => sigma = Some(num()?),
                    other => return Err(bad(format!("unknown key '{other}'"))),
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(format!(
                    "expected 3 tab-separated fields, got {}",
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("bad number '{s}'")))
            };
            names.push(fields[0].to_string());
            means.push(parse(fields[1])?);
            coefs.push(parse(fields[2])?);
        }
        if !in_table {
            return Err(Error::InvalidData("model file has no feature table".into()));
        }
        let config = match (m_stop, step_length, sigma) {
            (Some(m), Some(sl), Some(s)) => Some(BoostConfig::new(m, sl, s)?),
            (None, None, None) => None,
            _ => {
                return Err(Error::InvalidData(
                    "incomplete config block in model file".into(),
                ))
            }
        };
        Ok((Self::new(names, means, coefs)?, config))
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostTrace {
    /// Smoothed risk before the first update and after every iteration.
    pub risk_path: Vec<f64>,
    /// Component chosen in each iteration.
    pub selected: Vec<usize>,
}

/// Stateful boosting run; [`fit`] drives it for `m_stop` iterations.
#[derive(Debug, Clone)]
pub struct Booster {
    config: BoostConfig,
    weights: PairWeights,
    feature_names: Vec<String>,
    means: Vec<f64>,
    /// Centered covariates; `None` for constant columns.
    centered: Vec<Option<Vec<f64>>>,
    coefficients: Vec<f64>,
    /// Current `-eta`.
    risk_score: Vec<f64>,
    gradient: Vec<f64>,
    negative_gradient: Vec<f64>,
    risk_path: Vec<f64>,
    selected: Vec<usize>,
}

impl Booster {
    /// Prepares a run: centers covariates and builds the pair weights from the
    /// censoring curve of `data` itself.
    pub fn new(data: &SurvivalDataset, config: BoostConfig) -> Result<Self> {
        config.validate()?;
        if data.p() == 0 {
            return Err(Error::InvalidData("dataset has no covariates".into()));
        }
        let g_curve = censoring_km(data.outcomes())?;
        let weights = PairWeights::new(data.outcomes(), &g_curve)?;
        Self::with_weights(data, config, weights)
    }

    /// As [`Booster::new`] with precomputed pair weights for `data`'s outcomes.
    pub fn with_weights(
        data: &SurvivalDataset,
        config: BoostConfig,
        weights: PairWeights,
    ) -> Result<Self> {
        config.validate()?;
        if weights.n() != data.n() {
            return Err(Error::DimensionMismatch {
                expected: data.n(),
                found: weights.n(),
            });
        }
        let n = data.n();
        let mut means = Vec::with_capacity(data.p());
        let mut centered = Vec::with_capacity(data.p());
        for column in data.columns() {
            let mean = column.iter().sum::<f64>() / n as f64;
            means.push(mean);
            if column.iter().all(|&x| x == column[0]) {
                centered.push(None);
            } else {
                centered.push(Some(column.iter().map(|x| x - mean).collect()));
            }
        }
        if centered.iter().all(Option::is_none) {
            return Err(Error::AllCovariatesConstant);
        }
        Ok(Self {
            config,
            weights,
            feature_names: data.feature_names().to_vec(),
            means,
            centered,
            coefficients: vec![0.0; data.p()],
            risk_score: vec![0.0; n],
            gradient: vec![0.0; n],
            negative_gradient: vec![0.0; n],
            risk_path: Vec::with_capacity(config.m_stop + 1),
            selected: Vec::with_capacity(config.m_stop),
        })
    }

    pub fn iteration(&self) -> usize {
        self.selected.len()
    }

    pub fn config(&self) -> &BoostConfig {
        &self.config
    }

    /// Current marker on the learning sample.
    pub fn eta(&self) -> Vec<f64> {
        self.risk_score.iter().map(|r| -r).collect()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// One boosting iteration; returns the selected component.
    pub fn step(&mut self) -> usize {
        let risk = self.weights.smoothed_risk_and_gradient(
            &self.risk_score,
            self.config.sigma,
            &mut self.gradient,
        );
        self.risk_path.push(risk);
        // negative gradient with respect to eta = -(negative gradient w.r.t. -eta)
        for (u, g) in self.negative_gradient.iter_mut().zip(&self.gradient) {
            *u = -g;
        }

        let mut best: Option<(usize, BaseLearnerFit)> = None;
        for (l, column) in self.centered.iter().enumerate() {
            let Some(x) = column else { continue };
            let Some(fit) = base_learner_fit(&self.negative_gradient, x) else {
                continue;
            };
            if best.is_none_or(|(_, b)| fit.rss < b.rss) {
                best = Some((l, fit));
            }
        }
        let (l, fit) = best.expect("at least one non-constant covariate");
        let delta = self.config.step_length * fit.slope;
        self.coefficients[l] += delta;
        let x = self.centered[l]
            .as_ref()
            .expect("selected column is usable");
        for (r, xi) in self.risk_score.iter_mut().zip(x) {
            *r -= delta * xi;
        }
        self.selected.push(l);
        l
    }

    /// Smoothed risk of the current marker.
    pub fn current_risk(&self) -> f64 {
        self.weights
            .smoothed_risk(&self.risk_score, self.config.sigma)
    }

    pub fn model(&self) -> LinearMarkerModel {
        LinearMarkerModel {
            feature_names: self.feature_names.clone(),
            feature_means: self.means.clone(),
            coefficients: self.coefficients.clone(),
        }
    }

    pub fn finish(mut self) -> (LinearMarkerModel, BoostTrace) {
        self.risk_path.push(self.current_risk());
        let model = self.model();
        (
            model,
            BoostTrace {
                risk_path: self.risk_path,
                selected: self.selected,
            },
        )
    }
}

/// Runs `config.m_stop` boosting iterations on `data`.
pub fn fit(data: &SurvivalDataset, config: BoostConfig) -> Result<(LinearMarkerModel, BoostTrace)> {
    let mut booster = Booster::new(data, config)?;
    for _ in 0..config.m_stop {
        booster.step();
    }
    Ok(booster.finish())
}
