//! Right-censored survival data, CSV ingestion and the censoring Kaplan-Meier curve.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// One observed follow-up: time `T̃ = min(T, T_cens)` and event indicator `Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalObservation {
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
}

impl SurvivalObservation {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::InvalidData(format!(
                "observed time must be positive and finite, got {time}"
            )));
        }
        Ok(Self { time, event })
    }
}

/// Outcomes plus a dense covariate matrix, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    outcomes: Vec<SurvivalObservation>,
    columns: Vec<Vec<f64>>,
    feature_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(
        outcomes: Vec<SurvivalObservation>,
        columns: Vec<Vec<f64>>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = outcomes.len();
        if columns.len() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                found: columns.len(),
            });
        }
        for column in &columns {
            if column.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: column.len(),
                });
            }
            if column.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("covariates must be finite".into()));
            }
        }
        for obs in &outcomes {
            SurvivalObservation::new(obs.time, obs.event)?;
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidData(format!(
                    "duplicate feature name '{name}'"
                )));
            }
        }
        Ok(Self {
            outcomes,
            columns,
            feature_names,
        })
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn outcomes(&self) -> &[SurvivalObservation] {
        &self.outcomes
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, l: usize) -> &[f64] {
        &self.columns[l]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    pub fn event_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.event).count()
    }

    pub fn censoring_rate(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        1.0 - self.event_count() as f64 / self.n() as f64
    }

    /// Rows `rows` (in the given order), all features.
    pub fn subset_rows(&self, rows: &[usize]) -> SurvivalDataset {
        SurvivalDataset {
            outcomes: rows.iter().map(|&i| self.outcomes[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// All rows, features `features` (in the given order).
    pub fn select_features(&self, features: &[usize]) -> SurvivalDataset {
        SurvivalDataset {
            outcomes: self.outcomes.clone(),
            columns: features.iter().map(|&l| self.columns[l].clone()).collect(),
            feature_names: features
                .iter()
                .map(|&l| self.feature_names[l].clone())
                .collect(),
        }
    }
}

/// Which CSV columns hold the outcome and which the covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub time: String,
    pub event: String,
    /// `None` means every remaining column is a covariate.
    pub covariates: Option<Vec<String>>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            time: "time".into(),
            event: "event".into(),
            covariates: None,
        }
    }
}

/// Reads a comma-separated file with a header row. Rows keep file order;
/// row numbers in errors count data rows from 1.
pub fn load_dataset(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(file, spec)
}

pub fn read_dataset<R: std::io::Read>(reader: R, spec: &ColumnSpec) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::InvalidData(format!("cannot read header row: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("column '{name}' not found in header")))
    };
    let time_col = find(&spec.time)?;
    let event_col = find(&spec.event)?;
    let covariate_cols: Vec<usize> = match &spec.covariates {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&c| c != time_col && c != event_col)
            .collect(),
    };
    if covariate_cols.is_empty() {
        return Err(Error::InvalidData("no covariate columns".into()));
    }

    let mut outcomes = Vec::new();
    let mut columns = vec![Vec::new(); covariate_cols.len()];
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let parse = |c: usize| -> Result<f64> {
            cell(c).parse::<f64>().map_err(|_| Error::Parse {
                row,
                column: headers[c].clone(),
                message: format!("cannot parse '{}' as a number", cell(c)),
            })
        };
        let time = parse(time_col)?;
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::Parse {
                row,
                column: headers[time_col].clone(),
                message: format!("time must be positive, got {}", cell(time_col)),
            });
        }
        let event = match parse(event_col)? {
            1.0 => true,
            0.0 => false,
            _ => {
                return Err(Error::Parse {
                    row,
                    column: headers[event_col].clone(),
                    message: format!("event must be 0 or 1, got '{}'", cell(event_col)),
                })
            }
        };
        outcomes.push(SurvivalObservation { time, event });
        for (slot, &c) in columns.iter_mut().zip(&covariate_cols) {
            let v = parse(c)?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[c].clone(),
                    message: "covariate must be finite".into(),
                });
            }
            slot.push(v);
        }
    }
    let names = covariate_cols.iter().map(|&c| headers[c].clone()).collect();
    SurvivalDataset::new(outcomes, columns, names)
}

/// Right-continuous step function starting at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierCurve {
    jump_times: Vec<f64>,
    values: Vec<f64>,
}

impl KaplanMeierCurve {
    pub fn from_steps(jump_times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: jump_times.len(),
                found: values.len(),
            });
        }
        let increasing = jump_times.windows(2).all(|w| w[0] < w[1]);
        let non_increasing = values.windows(2).all(|w| w[0] >= w[1]);
        let in_range = values.iter().all(|v| (0.0..=1.0).contains(v));
        if !(increasing && non_increasing && in_range) {
            return Err(Error::InvalidData(
                "step function must have increasing jumps and non-increasing values in [0, 1]"
                    .into(),
            ));
        }
        Ok(Self { jump_times, values })
    }

    /// The constant-1 curve.
    pub fn constant() -> Self {
        Self {
            jump_times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `t`; takes the post-jump value at a jump time.
    pub fn evaluate(&self, t: f64) -> f64 {
        let passed = self.jump_times.partition_point(|&s| s <= t);
        if passed == 0 {
            1.0
        } else {
            self.values[passed - 1]
        }
    }
}

/// Kaplan-Meier estimate of the censoring survival function `G(t) = P(T_cens > t)`.
///
/// Censorings (`event == false`) are the jumps. When an event and a censoring
/// share a time, the event leaves the risk set first.
pub fn censoring_km(outcomes: &[SurvivalObservation]) -> Result<KaplanMeierCurve> {
    if outcomes.is_empty() {
        return Err(Error::InvalidData("empty dataset".into()));
    }
    let mut sorted: Vec<SurvivalObservation> = outcomes.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut jump_times = Vec::new();
    let mut values = Vec::new();
    let mut survival = 1.0;
    let mut at_risk = sorted.len();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].time;
        let mut events = 0;
        let mut censored = 0;
        while i < sorted.len() && sorted[i].time == t {
            if sorted[i].event {
                events += 1;
            } else {
                censored += 1;
            }
            i += 1;
        }
        if censored > 0 {
            let risk_set = at_risk - events;
            survival *= 1.0 - censored as f64 / risk_set as f64;
            jump_times.push(t);
            values.push(survival);
        }
        at_risk -= events + censored;
    }
    Ok(KaplanMeierCurve { jump_times, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(pairs: &[(f64, bool)]) -> Vec<SurvivalObservation> {
        pairs
            .iter()
            .map(|&(t, e)| SurvivalObservation::new(t, e).unwrap())
            .collect()
    }

    #[test]
    fn loads_small_file() {
        let csv = "time,event,x1\n1,1,0.5\n2,0,-0.1\n3,1,2.0\n";
        let data = read_dataset(csv.as_bytes(), &ColumnSpec::default()).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.p(), 1);
        assert_eq!(data.column(0), &[0.5, -0.1, 2.0]);
        assert_eq!(
            data.outcomes()[1],
            SurvivalObservation {
                time: 2.0,
                event: false
            }
        );
        assert_eq!(data.feature_names(), &["x1".to_string()]);
    }

    #[test]
    fn rejects_negative_time_with_row() {
        let csv = "time,event,x1\n1,1,0.5\n-1,0,-0.1\n";
        let err = read_dataset(csv.as_bytes(), &ColumnSpec::default()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "time");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_event_value() {
        let csv = "time,event,x1\n1,2,0.5\n";
        let err = read_dataset(csv.as_bytes(), &ColumnSpec::default()).unwrap_err();
        assert!(err.to_string().contains("'2'"), "{err}");
    }

    #[test]
    fn rejects_unparsable_cell_and_missing_covariates() {
        let csv = "time,event,x1\n1,1,abc\n";
        let err = read_dataset(csv.as_bytes(), &ColumnSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, ref column, .. } if column == "x1"));

        let csv = "time,event\n1,1\n";
        assert!(read_dataset(csv.as_bytes(), &ColumnSpec::default()).is_err());
    }

    #[test]
    fn explicit_covariate_columns_and_custom_names() {
        let csv = "id,t,d,a,b\n7,1,1,0.1,9\n8,2,0,0.2,8\n";
        let spec = ColumnSpec {
            time: "t".into(),
            event: "d".into(),
            covariates: Some(vec!["b".into(), "a".into()]),
        };
        let data = read_dataset(csv.as_bytes(), &spec).unwrap();
        assert_eq!(data.feature_names(), &["b".to_string(), "a".to_string()]);
        assert_eq!(data.column(0), &[9.0, 8.0]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_dataset("/nonexistent/definitely.csv", &ColumnSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn dataset_validates_shape_and_names() {
        let o = obs(&[(1.0, true), (2.0, false)]);
        assert!(SurvivalDataset::new(o.clone(), vec![vec![1.0]], vec!["a".into()]).is_err());
        assert!(SurvivalDataset::new(
            o.clone(),
            vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            vec!["a".into(), "a".into()]
        )
        .is_err());
        let d = SurvivalDataset::new(o, vec![vec![1.0, 2.0]], vec!["a".into()]).unwrap();
        assert_eq!(d.event_count(), 1);
        assert_eq!(d.subset_rows(&[1]).column(0), &[2.0]);
    }

    #[test]
    fn all_events_gives_constant_curve() {
        let g = censoring_km(&obs(&[(1.0, true), (2.0, true), (5.0, true)])).unwrap();
        assert!(g.jump_times().is_empty());
        for t in [0.1, 1.0, 3.0, 100.0] {
            assert_eq!(g.evaluate(t), 1.0);
        }
    }

    #[test]
    fn single_censoring_jump() {
        let g = censoring_km(&obs(&[(1.0, true), (2.0, false), (3.0, true)])).unwrap();
        assert_eq!(g.jump_times(), &[2.0]);
        assert_eq!(g.evaluate(1.99), 1.0);
        assert_eq!(g.evaluate(2.0), 0.5);
        assert_eq!(g.evaluate(50.0), 0.5);
    }

    #[test]
    fn events_leave_risk_set_before_tied_censoring() {
        // risk set at t=1 for the censoring excludes the simultaneous event
        let g = censoring_km(&obs(&[(1.0, true), (1.0, false)])).unwrap();
        assert_eq!(g.evaluate(1.0), 0.0);

        let g = censoring_km(&obs(&[(1.0, true), (1.0, false), (2.0, true)])).unwrap();
        assert_eq!(g.evaluate(1.0), 0.5);
    }

    #[test]
    fn empty_outcomes_rejected() {
        assert!(censoring_km(&[]).is_err());
    }

    #[test]
    fn step_function_validation() {
        assert!(KaplanMeierCurve::from_steps(vec![1.0, 2.0], vec![0.5, 0.7]).is_err());
        assert!(KaplanMeierCurve::from_steps(vec![2.0, 1.0], vec![0.7, 0.5]).is_err());
        let g = KaplanMeierCurve::from_steps(vec![1.0, 2.0], vec![0.7, 0.5]).unwrap();
        assert_eq!(g.evaluate(0.5), 1.0);
        assert_eq!(g.evaluate(1.5), 0.7);
        assert_eq!(KaplanMeierCurve::constant().evaluate(3.0), 1.0);
    }
}
