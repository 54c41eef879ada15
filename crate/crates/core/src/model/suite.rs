//! Per-interval model comparison with and without the DIFFER columns.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureGroup, SampleSplit};
use crate::geo::TimeInterval;
use crate::model::{evaluate, ModelKind, ModelParams, Regressor};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    WithDiffer,
    WithoutDiffer,
}

impl Setting {
    pub const ALL: [Setting; 2] = [Setting::WithDiffer, Setting::WithoutDiffer];

    pub fn name(self) -> &'static str {
        match self {
            Setting::WithDiffer => "with_differ",
            Setting::WithoutDiffer => "without_differ",
        }
    }

    pub fn apply(self, data: &Dataset) -> Dataset {
        match self {
            Setting::WithDiffer => data.clone(),
            Setting::WithoutDiffer => data.without_groups(&[FeatureGroup::Differ]),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown setting `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub interval: TimeInterval,
    pub setting: Setting,
    pub columns: Vec<String>,
    pub n_train: usize,
    pub model: Regressor,
}

/// Seeds of the stochastic models for one interval. Both settings share
/// them so the comparison isolates the columns.
fn interval_params(params: &ModelParams, t: TimeInterval) -> ModelParams {
    let ti = t.index() as u64;
    let mut p = params.clone();
    p.forest.seed = seed::derive(params.forest.seed, &[ti]);
    p.boosted.seed = seed::derive(params.boosted.seed, &[ti]);
    p
}

/// Fits every model kind per interval and setting. Intervals without
/// training rows are skipped.
pub fn train_suite(train: &Dataset, kinds: &[ModelKind], params: &ModelParams) -> Result<Vec<TrainedModel>> {
    let mut out = Vec::new();
    for t in TimeInterval::ALL {
        let sub = train.interval(t);
        if sub.is_empty() {
            continue;
        }
        let p = interval_params(params, t);
        for setting in Setting::ALL {
            let data = setting.apply(&sub);
            for &kind in kinds {
                out.push(TrainedModel {
                    interval: t,
                    setting,
                    columns: data.x.names().to_vec(),
                    n_train: data.len(),
                    model: Regressor::fit(kind, &data.x, &data.y, &p)?,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub interval: TimeInterval,
    pub model: ModelKind,
    pub setting: Setting,
    pub n_train: usize,
    pub n_test: usize,
    pub mae: f64,
    pub rmse: f64,
}

/// Scores trained models on the test rows of their interval.
pub fn score_models(models: &[TrainedModel], test: &Dataset) -> Result<Vec<EvalRow>> {
    let mut out = Vec::with_capacity(models.len());
    for m in models {
        let sub = m.setting.apply(&test.interval(m.interval));
        if sub.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if sub.x.names() != m.columns.as_slice() {
            return Err(Error::DimensionMismatch("test columns differ from training columns".into()));
        }
        let r = evaluate(&m.model.predict(&sub.x)?, &sub.y)?;
        out.push(EvalRow {
            interval: m.interval,
            model: m.model.kind(),
            setting: m.setting,
            n_train: m.n_train,
            n_test: sub.len(),
            mae: r.mae,
            rmse: r.rmse,
        });
    }
    Ok(out)
}

pub fn evaluate_suite(split: &SampleSplit<Dataset>, kinds: &[ModelKind], params: &ModelParams) -> Result<Vec<EvalRow>> {
    score_models(&train_suite(&split.train, kinds, params)?, &split.test)
}

/// Test MAE over all intervals' rows for one model and setting.
pub fn pooled_mae(rows: &[EvalRow], model: ModelKind, setting: Setting) -> Option<f64> {
    let (sum, n) = rows
        .iter()
        .filter(|r| r.model == model && r.setting == setting)
        .fold((0.0, 0usize), |(s, n), r| (s + r.mae * r.n_test as f64, n + r.n_test));
    (n > 0).then(|| sum / n as f64)
}

const HEADER: [&str; 7] = ["interval", "model", "setting", "n_train", "n_test", "mae", "rmse"];

pub fn write_eval_csv<W: Write>(rows: &[EvalRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for r in rows {
        out.write_record([
            r.interval.to_string(),
            r.model.to_string(),
            r.setting.to_string(),
            r.n_train.to_string(),
            r.n_test.to_string(),
            r.mae.to_string(),
            r.rmse.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_eval_csv<R: Read>(r: R) -> Result<Vec<EvalRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(HEADER) {
        return Err(Error::FileFormat(format!("evaluation header must be {}", HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::FileFormat(format!("evaluation row {}: bad {what}", i + 1));
        rows.push(EvalRow {
            interval: rec[0].parse().map_err(|_| bad("interval"))?,
            model: rec[1].parse().map_err(|_| bad("model"))?,
            setting: rec[2].parse().map_err(|_| bad("setting"))?,
            n_train: rec[3].parse().map_err(|_| bad("n_train"))?,
            n_test: rec[4].parse().map_err(|_| bad("n_test"))?,
            mae: rec[5].parse().map_err(|_| bad("mae"))?,
            rmse: rec[6].parse().map_err(|_| bad("rmse"))?,
        });
    }
    Ok(rows)
}
