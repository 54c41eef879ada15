//! Feature-group ablation: per interval, k-fold forests with and without
//! each group, compared with a paired t-test on the per-fold MAE.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureGroup};
use crate::geo::{CellId, TimeInterval};
use crate::model::{evaluate, kfold_split, paired_t_test, Alternative, Fold, ForestParams, RandomForest};
use crate::seed;

/// Which error difference counts as evidence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Removing the group increases the error.
    #[default]
    WoGreater,
    /// The full model has the larger error.
    AllGreater,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::WoGreater => "wo_greater",
            Direction::AllGreater => "all_greater",
        }
    }

    /// Alternative for `paired_t_test(mae_without, mae_all, _)`.
    pub fn alternative(self) -> Alternative {
        match self {
            Direction::WoGreater => Alternative::AGreater,
            Direction::AllGreater => Alternative::BGreater,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wo_greater" => Ok(Direction::WoGreater),
            "all_greater" => Ok(Direction::AllGreater),
            _ => Err(Error::InvalidParams(format!("unknown direction `{s}`"))),
        }
    }
}

/// Unit the cross-validation folds are drawn over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Folds {
    /// Individual samples.
    Rows,
    /// Whole cells: every month of a cell lands in the same fold.
    #[default]
    Cells,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationParams {
    pub k: usize,
    pub seed: u64,
    pub direction: Direction,
    pub folds: Folds,
    pub forest: ForestParams,
}

impl Default for AblationParams {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            direction: Direction::WoGreater,
            folds: Folds::default(),
            forest: ForestParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub interval: TimeInterval,
    pub group: FeatureGroup,
    pub mae_all: f64,
    pub mae_without: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub fold_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub direction: Direction,
    pub rows: Vec<AblationRow>,
}

const HEADER: [&str; 8] =
    ["interval", "group", "mae_all", "mae_without", "t_stat", "p_value", "fold_count", "direction"];

impl AblationReport {
    pub fn p_value(&self, interval: TimeInterval, group: FeatureGroup) -> Option<f64> {
        self.rows.iter().find(|r| r.interval == interval && r.group == group).map(|r| r.p_value)
    }

    /// Interval × group table of p-values, absent cells as `None`.
    pub fn grid(&self) -> BTreeMap<TimeInterval, [Option<f64>; 5]> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            let slot = FeatureGroup::ALL.iter().position(|g| *g == r.group).expect("known group");
            out.entry(r.interval).or_insert([None; 5])[slot] = Some(r.p_value);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.interval.to_string(),
                r.group.to_string(),
                r.mae_all.to_string(),
                r.mae_without.to_string(),
                r.t_stat.to_string(),
                r.p_value.to_string(),
                r.fold_count.to_string(),
                self.direction.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        if rdr.headers()?.iter().ne(HEADER) {
            return Err(Error::FileFormat(format!("ablation header must be {}", HEADER.join(","))));
        }
        let mut rows = Vec::new();
        let mut direction = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::FileFormat(format!("ablation row {}: bad {what}", i + 1));
            let num = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(what));
            let d: Direction = rec[7].parse().map_err(|_| bad("direction"))?;
            if direction.is_some_and(|prev| prev != d) {
                return Err(bad("direction (mixed)"));
            }
            direction = Some(d);
            rows.push(AblationRow {
                interval: rec[0].parse().map_err(|_| bad("interval"))?,
                group: rec[1].parse().map_err(|_| bad("group"))?,
                mae_all: num(2, "mae_all")?,
                mae_without: num(3, "mae_without")?,
                t_stat: num(4, "t_stat")?,
                p_value: num(5, "p_value")?,
                fold_count: rec[6].parse().map_err(|_| bad("fold_count"))?,
            });
        }
        Ok(Self { direction: direction.unwrap_or_default(), rows })
    }

    /// Writes the p-value grid: one row per interval, one column per group.
    pub fn write_pvalue_grid<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(std::iter::once("interval").chain(FeatureGroup::ALL.iter().map(|g| g.name())))?;
        for (t, ps) in self.grid() {
            let mut rec = vec![t.to_string()];
            rec.extend(ps.iter().map(|p| p.map(|v| v.to_string()).unwrap_or_default()));
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn parse_groups<S: AsRef<str>>(names: &[S]) -> Result<Vec<FeatureGroup>> {
    names.iter().map(|s| s.as_ref().parse()).collect()
}

/// k folds over rows, or over the distinct cells of `data` with each row
/// following its cell.
pub fn make_folds(data: &Dataset, k: usize, unit: Folds, seed: u64) -> Result<Vec<Fold>> {
    if unit == Folds::Rows {
        return kfold_split(data.len(), k, seed);
    }
    let cells: Vec<CellId> = data.keys.iter().map(|key| key.cell).collect::<BTreeSet<_>>().into_iter().collect();
    let cell_folds = kfold_split(cells.len(), k, seed)?;
    let mut fold_of = BTreeMap::new();
    for (f, fold) in cell_folds.iter().enumerate() {
        fold_of.extend(fold.valid.iter().map(|&c| (cells[c], f)));
    }
    let mut folds = vec![Fold { train: Vec::new(), valid: Vec::new() }; cell_folds.len()];
    for (i, key) in data.keys.iter().enumerate() {
        let home = fold_of[&key.cell];
        for (f, fold) in folds.iter_mut().enumerate() {
            if f == home {
                fold.valid.push(i)
            } else {
                fold.train.push(i)
            }
        }
    }
    Ok(folds)
}

/// Runs the ablation on `data` (normally the training months only).
///
/// Within an interval every fold fits one forest on all columns and one per
/// group with that group's columns removed, all with the same forest seed,
/// and scores them on the held-out fold. Intervals without rows are skipped.
pub fn run_ablation(data: &Dataset, groups: &[FeatureGroup], params: &AblationParams) -> Result<AblationReport> {
    let mut rows = Vec::new();
    for t in TimeInterval::ALL {
        let sub = data.interval(t);
        if sub.is_empty() {
            continue;
        }
        let ti = t.index() as u64;
        let folds = make_folds(&sub, params.k, params.folds, seed::derive(params.seed, &[ti]))?;
        let mut mae_all = Vec::with_capacity(folds.len());
        let mut mae_wo = vec![Vec::with_capacity(folds.len()); groups.len()];
        for (f, fold) in folds.iter().enumerate() {
            let train = sub.select(&fold.train);
            let valid = sub.select(&fold.valid);
            let forest = ForestParams { seed: seed::derive(params.seed, &[ti, f as u64, 1]), ..params.forest.clone() };
            let score = |tr: &Dataset, va: &Dataset| -> Result<f64> {
                let m = RandomForest::fit(&tr.x, &tr.y, &forest)?;
                Ok(evaluate(&m.predict(&va.x)?, &va.y)?.mae)
            };
            mae_all.push(score(&train, &valid)?);
            for (g, out) in groups.iter().zip(mae_wo.iter_mut()) {
                out.push(score(&train.without_groups(&[*g]), &valid.without_groups(&[*g]))?);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        for (g, wo) in groups.iter().zip(&mae_wo) {
            let test = paired_t_test(wo, &mae_all, params.direction.alternative())?;
            rows.push(AblationRow {
                interval: t,
                group: *g,
                mae_all: mean(&mae_all),
                mae_without: mean(wo),
                t_stat: test.t,
                p_value: test.p,
                fold_count: folds.len(),
            });
        }
    }
    Ok(AblationReport { direction: params.direction, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_names_round_trip() {
        for d in [Direction::WoGreater, Direction::AllGreater] {
            assert_eq!(d.name().parse::<Direction>().unwrap(), d);
        }
        assert!("sideways".parse::<Direction>().is_err());
    }

    #[test]
    fn parse_groups_rejects_unknown() {
        assert_eq!(parse_groups(&["DIFFER", "poi"]).unwrap(), vec![FeatureGroup::Differ, FeatureGroup::Poi]);
        assert!(matches!(parse_groups(&["Weather"]), Err(Error::UnknownGroup(_))));
    }

    #[test]
    fn cell_folds_keep_cells_together() {
        use crate::features::RowKey;
        use crate::geo::MonthId;
        use crate::model::Matrix;
        let keys: Vec<RowKey> = (0..60)
            .map(|i| RowKey {
                cell: CellId::new(i % 12, 0),
                month: MonthId::new(2018, 1 + i / 12).unwrap(),
                interval: TimeInterval::Night,
            })
            .collect();
        let x = Matrix::column_vector("a", &vec![0.0; 60]).unwrap();
        let data = Dataset::new(keys, x, vec![0.0; 60]).unwrap();
        let folds = make_folds(&data, 4, Folds::Cells, 7).unwrap();
        assert_eq!(folds.len(), 4);
        let mut seen = vec![0; 60];
        for fold in &folds {
            assert_eq!(fold.train.len() + fold.valid.len(), 60);
            let held: BTreeSet<CellId> = fold.valid.iter().map(|&i| data.keys[i].cell).collect();
            assert_eq!(fold.valid.len(), held.len() * 5);
            assert!(fold.train.iter().all(|&i| !held.contains(&data.keys[i].cell)));
            fold.valid.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(make_folds(&data, 4, Folds::Rows, 7).unwrap(), kfold_split(60, 4, 7).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let report = AblationReport {
            direction: Direction::AllGreater,
            rows: vec![AblationRow {
                interval: TimeInterval::Night,
                group: FeatureGroup::Differ,
                mae_all: 1.25,
                mae_without: 1.5,
                t_stat: 2.0,
                p_value: 0.037,
                fold_count: 10,
            }],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(AblationReport::read_csv(buf.as_slice()).unwrap(), report);
    }
}
