//! Evaluation protocol and study runner.
//!
//! The simulation study runs, per replicate, the full three-step pipeline on
//! freshly simulated data:
//!
//! 1. a selection sample (`n_selection` rows, all `p` markers) ranks the
//!    markers by folded Uno's C and keeps the top `p*`;
//! 2. a training sample of size `n` fits the boosted marker on those `p*`;
//! 3. a test sample of size `n_test` is scored with Uno's C, using the
//!    censoring curve of the training sample.
//!
//! Every replicate draws all three samples anew from seeds derived from the
//! master seed and the replicate index, so cells that share a replicate index
//! also share random numbers (paired comparisons across `σ`, `n`, `p*`).
//! Censoring scales are calibrated once per censoring level.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::boosting::{fit, BoostConfig, LinearMarkerModel};
use crate::concordance::{harrell_c, uno_c};
use crate::data::{censoring_km, SurvivalDataset, SurvivalObservation};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use crate::selection::{rank_markers, select_top};
use crate::simulation::{calibrate_censoring, generate_columns, SimulationConfig, INFORMATIVE};
use crate::stats::Summary;

const SELECTION_TAG: u64 = 1;
const TRAIN_TAG: u64 = 2;
const TEST_TAG: u64 = 3;

/// Learning/test partition stratified by the event indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub learning: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Randomly assigns `round(fraction · size)` observations of each stratum
/// (events, censored) to the learning sample and the rest to the test sample.
///
/// A stratum without observations is skipped, so an all-event sample falls
/// back to a plain random split.
pub fn stratified_split(
    outcomes: &[SurvivalObservation],
    fraction: f64,
    seed: u64,
) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "learning fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = stream(seed, 0);
    let mut learning = Vec::new();
    let mut test = Vec::new();
    for event in [true, false] {
        let mut stratum: Vec<usize> = outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| o.event == event)
            .map(|(i, _)| i)
            .collect();
        stratum.shuffle(&mut rng);
        let take = (fraction * stratum.len() as f64).round() as usize;
        learning.extend_from_slice(&stratum[..take]);
        test.extend_from_slice(&stratum[take..]);
    }
    if learning.is_empty() || test.is_empty() {
        return Err(Error::InvalidData(format!(
            "cannot split {} observations into non-empty learning and test samples",
            outcomes.len()
        )));
    }
    learning.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        learning,
        test,
        seed,
    })
}

/// Test-sample concordance of a marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub uno: f64,
    pub harrell: f64,
}

/// Scores risk-oriented predictions for the test sample. The censoring curve
/// is estimated from the learning outcomes only.
pub fn evaluate_external(
    test_risk: &[f64],
    learning: &[SurvivalObservation],
    test: &[SurvivalObservation],
) -> Result<Evaluation> {
    let g_curve = censoring_km(learning)?;
    Ok(Evaluation {
        uno: uno_c(test, test_risk, &g_curve)?,
        harrell: harrell_c(test, test_risk)?,
    })
}

/// [`evaluate_external`] for a fitted model.
pub fn evaluate_model(
    model: &LinearMarkerModel,
    learning: &SurvivalDataset,
    test: &SurvivalDataset,
) -> Result<Evaluation> {
    let risk = model.risk_score(test)?;
    evaluate_external(&risk, learning.outcomes(), test.outcomes())
}

/// One setting of the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyCell {
    pub n_train: usize,
    pub p_star: usize,
    pub censoring: f64,
    pub sigma: f64,
}

impl StudyCell {
    pub fn new(n_train: usize, p_star: usize, censoring: f64, sigma: f64) -> Self {
        Self {
            n_train,
            p_star,
            censoring,
            sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub cells: Vec<StudyCell>,
    pub replicates: usize,
    pub m_stop: usize,
    pub step_length: f64,
    pub p: usize,
    pub rho: f64,
    pub n_selection: usize,
    pub n_test: usize,
    pub fold: bool,
    pub seed: u64,
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            cells: vec![StudyCell::new(100, 5, 0.5, 0.1)],
            replicates: 100,
            m_stop: BoostConfig::DEFAULT_M_STOP,
            step_length: BoostConfig::DEFAULT_STEP_LENGTH,
            p: 1000,
            rho: 0.5,
            n_selection: 1000,
            n_test: 1000,
            fold: true,
            seed: 1,
            workers: None,
        }
    }
}

/// The `(n, p*, censoring)` settings of the published results table.
pub fn published_settings() -> Vec<(usize, usize, f64)> {
    vec![
        (100, 5, 0.5),
        (100, 10, 0.5),
        (100, 30, 0.5),
        (100, 5, 0.3),
        (100, 5, 0.7),
        (50, 5, 0.5),
        (200, 5, 0.5),
        (500, 5, 0.5),
    ]
}

/// Smoothing parameters of the sensitivity grid.
pub const SIGMA_GRID: [f64; 5] = [0.5, 0.25, 0.1, 0.075, 0.05];

impl StudyConfig {
    /// Every published setting at `σ = 0.1`.
    pub fn table1_grid() -> Vec<StudyCell> {
        published_settings()
            .into_iter()
            .map(|(n, p, c)| StudyCell::new(n, p, c, 0.1))
            .collect()
    }

    /// Every published setting crossed with [`SIGMA_GRID`].
    pub fn table2_grid() -> Vec<StudyCell> {
        published_settings()
            .into_iter()
            .flat_map(|(n, p, c)| SIGMA_GRID.map(|s| StudyCell::new(n, p, c, s)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidParameter("study grid is empty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter(
                "need at least one replicate".into(),
            ));
        }
        if self.n_selection < 2 || self.n_test < 2 {
            return Err(Error::InvalidParameter(
                "selection and test samples need at least two observations".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter(
                "worker count must be positive".into(),
            ));
        }
        for cell in &self.cells {
            BoostConfig::new(self.m_stop, self.step_length, cell.sigma)?;
            if cell.p_star == 0 || cell.p_star > self.p {
                return Err(Error::InvalidParameter(format!(
                    "p* = {} must lie in 1..={}",
                    cell.p_star, self.p
                )));
            }
            if cell.n_train < 2 {
                return Err(Error::InvalidParameter(
                    "training size must be at least 2".into(),
                ));
            }
            self.simulation(cell.censoring, cell.n_train, 0)
                .validate()?;
        }
        Ok(())
    }

    fn simulation(&self, censoring: f64, n: usize, seed: u64) -> SimulationConfig {
        SimulationConfig {
            n,
            p: self.p,
            rho: self.rho,
            target_censoring: censoring,
            seed,
            ..SimulationConfig::default()
        }
    }
}

/// Outcome of one replicate of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub cell: usize,
    pub replicate: usize,
    /// Uno's C of the boosted marker on the test sample.
    pub boosted_uno: f64,
    /// Uno's C of the true location `η_μ` on the test sample.
    pub true_uno: f64,
    /// Uno's C of the boosted marker on its own training sample.
    pub train_uno: f64,
    /// Selected markers (zero-based), best first.
    pub selected: Vec<usize>,
    /// Boosted coefficients aligned with `selected`.
    pub coefficients: Vec<f64>,
}

impl ReplicateResult {
    pub fn informative_selected(&self) -> bool {
        (0..INFORMATIVE).all(|l| self.selected.contains(&l))
    }

    pub fn coefficient_of(&self, marker: usize) -> Option<f64> {
        self.selected
            .iter()
            .position(|&l| l == marker)
            .map(|pos| self.coefficients[pos])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: StudyCell,
    pub boosted: Summary,
    pub truth: Summary,
    pub train: Summary,
    /// Share of replicates whose selection contains all informative markers.
    pub selection_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub config: StudyConfig,
    /// Ordered by cell, then replicate.
    pub replicates: Vec<ReplicateResult>,
    pub summaries: Vec<CellSummary>,
}

impl StudyResult {
    fn new(config: StudyConfig, mut replicates: Vec<ReplicateResult>) -> Self {
        replicates.sort_by_key(|r| (r.cell, r.replicate));
        let summaries = config
            .cells
            .iter()
            .enumerate()
            .map(|(c, &cell)| {
                let rows: Vec<&ReplicateResult> =
                    replicates.iter().filter(|r| r.cell == c).collect();
                let col = |f: fn(&ReplicateResult) -> f64| {
                    let v: Vec<f64> = rows.iter().map(|r| f(r)).collect();
                    Summary::of(&v).expect("every cell has replicates")
                };
                CellSummary {
                    cell,
                    boosted: col(|r| r.boosted_uno),
                    truth: col(|r| r.true_uno),
                    train: col(|r| r.train_uno),
                    selection_rate: rows.iter().filter(|r| r.informative_selected()).count() as f64
                        / rows.len() as f64,
                }
            })
            .collect();
        Self {
            config,
            replicates,
            summaries,
        }
    }

    pub fn cell_replicates(&self, cell: usize) -> impl Iterator<Item = &ReplicateResult> {
        self.replicates.iter().filter(move |r| r.cell == cell)
    }

    /// Per-replicate rows as CSV.
    pub fn write_replicates_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::InvalidData(format!("csv output: {e}"));
        w.write_record([
            "cell",
            "replicate",
            "n",
            "p_star",
            "censoring",
            "sigma",
            "boosted_uno",
            "true_uno",
            "train_uno",
            "informative_selected",
            "selected",
            "coefficients",
        ])
        .map_err(to_err)?;
        for r in &self.replicates {
            let cell = self.config.cells[r.cell];
            let joined = |v: Vec<String>| v.join(";");
            w.write_record([
                r.cell.to_string(),
                r.replicate.to_string(),
                cell.n_train.to_string(),
                cell.p_star.to_string(),
                cell.censoring.to_string(),
                cell.sigma.to_string(),
                r.boosted_uno.to_string(),
                r.true_uno.to_string(),
                r.train_uno.to_string(),
                u8::from(r.informative_selected()).to_string(),
                joined(r.selected.iter().map(|l| format!("x{}", l + 1)).collect()),
                joined(r.coefficients.iter().map(f64::to_string).collect()),
            ])
            .map_err(to_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv output>".into(),
            source,
        })
    }

    /// Per-cell medians and quartiles as CSV.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::InvalidData(format!("csv output: {e}"));
        w.write_record([
            "n",
            "p_star",
            "censoring",
            "sigma",
            "boosted_median",
            "boosted_q1",
            "boosted_q3",
            "boosted_iqr",
            "true_median",
            "train_median",
            "selection_rate",
            "replicates",
        ])
        .map_err(to_err)?;
        for s in &self.summaries {
            w.write_record([
                s.cell.n_train.to_string(),
                s.cell.p_star.to_string(),
                s.cell.censoring.to_string(),
                s.cell.sigma.to_string(),
                s.boosted.median.to_string(),
                s.boosted.q1.to_string(),
                s.boosted.q3.to_string(),
                s.boosted.iqr().to_string(),
                s.truth.median.to_string(),
                s.train.median.to_string(),
                s.selection_rate.to_string(),
                self.config.replicates.to_string(),
            ])
            .map_err(to_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv output>".into(),
            source,
        })
    }

    /// Fixed-width table: median (IQR) of the boosted test C next to the true C.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str("    n  p*  cens.  sigma  C-index boosting  true C-index  selection\n");
        for s in &self.summaries {
            out.push_str(&format!(
                "{:>5} {:>3} {:>5.0}% {:>6} {:>9.3} ({:.2}) {:>13.3} {:>10.3}\n",
                s.cell.n_train,
                s.cell.p_star,
                s.cell.censoring * 100.0,
                s.cell.sigma,
                s.boosted.median,
                s.boosted.iqr(),
                s.truth.median,
                s.selection_rate,
            ));
        }
        out
    }
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs every cell of `config` for `config.replicates` replicates.
pub fn run_simulation_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    // one censoring scale per level, keyed by the bit pattern of the rate
    let mut scales = BTreeMap::new();
    for cell in &config.cells {
        let key = cell.censoring.to_bits();
        if let std::collections::btree_map::Entry::Vacant(e) = scales.entry(key) {
            let sim = config.simulation(cell.censoring, config.n_selection, config.seed);
            e.insert(calibrate_censoring(&sim)?);
        }
    }

    let results = with_workers(config.workers, || {
        (0..config.replicates)
            .into_par_iter()
            .map(|b| run_replicate(config, &scales, b))
            .collect::<Result<Vec<Vec<ReplicateResult>>>>()
    })??;
    Ok(StudyResult::new(
        config.clone(),
        results.into_iter().flatten().collect(),
    ))
}

fn run_replicate(
    config: &StudyConfig,
    scales: &BTreeMap<u64, f64>,
    replicate: usize,
) -> Result<Vec<ReplicateResult>> {
    let rep_seed = derive_seed(config.seed, replicate as u64);
    let mut rankings: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let mut out = Vec::with_capacity(config.cells.len());
    for (c, cell) in config.cells.iter().enumerate() {
        let key = cell.censoring.to_bits();
        let theta = scales[&key];
        if let std::collections::btree_map::Entry::Vacant(slot) = rankings.entry(key) {
            let sim = config.simulation(
                cell.censoring,
                config.n_selection,
                derive_seed(rep_seed, SELECTION_TAG),
            );
            let all: Vec<usize> = (0..config.p).collect();
            let sample = generate_columns(&sim, theta, &all)?;
            let g_curve = censoring_km(sample.dataset.outcomes())?;
            let ranking = rank_markers(&sample.dataset, &g_curve, config.fold)?;
            slot.insert(ranking.entries.iter().map(|e| e.index).collect());
        }
        let order = &rankings[&key];
        let selected = order[..cell.p_star].to_vec();

        let train_sim = config.simulation(
            cell.censoring,
            cell.n_train,
            derive_seed(rep_seed, TRAIN_TAG),
        );
        let test_sim = config.simulation(
            cell.censoring,
            config.n_test,
            derive_seed(rep_seed, TEST_TAG),
        );
        let train = generate_columns(&train_sim, theta, &selected)?;
        let test = generate_columns(&test_sim, theta, &selected)?;

        let boost = BoostConfig::new(config.m_stop, config.step_length, cell.sigma)?;
        let (model, _) = fit(&train.dataset, boost)?;
        // censoring curve from the training sample only
        let g_train = censoring_km(train.dataset.outcomes())?;
        let test_risk = model.risk_score(&test.dataset)?;
        let train_risk = model.risk_score(&train.dataset)?;
        out.push(ReplicateResult {
            cell: c,
            replicate,
            boosted_uno: uno_c(test.dataset.outcomes(), &test_risk, &g_train)?,
            true_uno: uno_c(test.dataset.outcomes(), &test.true_risk_score(), &g_train)?,
            train_uno: uno_c(train.dataset.outcomes(), &train_risk, &g_train)?,
            selected,
            coefficients: model.coefficients().to_vec(),
        });
    }
    Ok(out)
}

/// Repeated stratified learning/test subsampling of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsamplingConfig {
    pub replicates: usize,
    pub fraction: f64,
    /// Pre-select this many markers on each learning sample; `None` keeps all.
    pub p_star: Option<usize>,
    pub fold: bool,
    pub boost: BoostConfig,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Default for SubsamplingConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            fraction: 2.0 / 3.0,
            p_star: None,
            fold: true,
            boost: BoostConfig::default(),
            seed: 1,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleResult {
    pub replicate: usize,
    pub test: Evaluation,
    pub train_uno: f64,
    pub selected: Vec<usize>,
    pub coefficients: Vec<f64>,
}

pub fn run_subsampling_study(
    data: &SurvivalDataset,
    config: &SubsamplingConfig,
) -> Result<Vec<SubsampleResult>> {
    config.boost.validate()?;
    if config.replicates == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replicate".into(),
        ));
    }
    if let Some(k) = config.p_star {
        if k == 0 || k > data.p() {
            return Err(Error::InvalidParameter(format!(
                "p* = {k} must lie in 1..={}",
                data.p()
            )));
        }
    }
    with_workers(config.workers, || {
        (0..config.replicates)
            .into_par_iter()
            .map(|b| {
                let plan = stratified_split(
                    data.outcomes(),
                    config.fraction,
                    derive_seed(config.seed, b as u64),
                )?;
                let learn = data.subset_rows(&plan.learning);
                let test = data.subset_rows(&plan.test);
                let g_learn = censoring_km(learn.outcomes())?;
                let selected = match config.p_star {
                    Some(k) => select_top(&rank_markers(&learn, &g_learn, config.fold)?, k)?,
                    None => (0..data.p()).collect(),
                };
                let learn = learn.select_features(&selected);
                let (model, _) = fit(&learn, config.boost)?;
                let evaluation = evaluate_model(&model, &learn, &test)?;
                let train_uno = uno_c(learn.outcomes(), &model.risk_score(&learn)?, &g_learn)?;
                Ok(SubsampleResult {
                    replicate: b,
                    test: evaluation,
                    train_uno,
                    selected,
                    coefficients: model.coefficients().to_vec(),
                })
            })
            .collect()
    })?
}
