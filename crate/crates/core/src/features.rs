//! Historical, neighbourhood and POI features, sample assembly and the
//! month-based train/test split.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CellId, GridSpec, MonthId, TimeInterval};
use crate::graph::{build_graphs, NodeFlows};
use crate::info::shannon_entropy;
use crate::ingest::{CellCounts, OdAggregate, Venue};
use crate::model::Matrix;
use crate::risk::{build_risk_table, differ_features, DifferFeatures, RiskTable};

/// Feature groups used by the ablation protocol. Column names carry the
/// group's prefix, e.g. `differ.risk_ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    #[serde(alias = "historical")]
    Historical,
    #[serde(alias = "movement")]
    Movement,
    #[serde(alias = "neighbourhood")]
    Neighbourhood,
    #[serde(rename = "POI", alias = "poi")]
    Poi,
    #[serde(rename = "DIFFER", alias = "differ")]
    Differ,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::Historical,
        FeatureGroup::Movement,
        FeatureGroup::Neighbourhood,
        FeatureGroup::Poi,
        FeatureGroup::Differ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Historical => "Historical",
            FeatureGroup::Movement => "Movement",
            FeatureGroup::Neighbourhood => "Neighbourhood",
            FeatureGroup::Poi => "POI",
            FeatureGroup::Differ => "DIFFER",
        }
    }

    pub fn prefix(self) -> &'static str {
        match self {
            FeatureGroup::Historical => "historical.",
            FeatureGroup::Movement => "movement.",
            FeatureGroup::Neighbourhood => "neighbourhood.",
            FeatureGroup::Poi => "poi.",
            FeatureGroup::Differ => "differ.",
        }
    }

    pub fn owns(self, column: &str) -> bool {
        column.starts_with(self.prefix())
    }

    pub fn of_column(column: &str) -> Option<FeatureGroup> {
        FeatureGroup::ALL.into_iter().find(|g| g.owns(column))
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownGroup(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiProfile {
    pub poi_density: u32,
    pub category_distribution: Vec<f64>,
    pub venue_entropy: f64,
}

/// Sorted distinct venue categories.
pub fn category_vocab(venues: &[Venue]) -> Vec<String> {
    venues.iter().map(|v| v.category.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

fn profile_from_counts(counts: &[u32]) -> PoiProfile {
    let density: u32 = counts.iter().sum();
    let category_distribution = if density == 0 {
        vec![0.0; counts.len()]
    } else {
        counts.iter().map(|&c| c as f64 / density as f64).collect()
    };
    PoiProfile {
        poi_density: density,
        venue_entropy: shannon_entropy(counts.iter().map(|&c| c as f64)),
        category_distribution,
    }
}

/// POI profile of one cell. Categories missing from `vocab` are ignored.
pub fn poi_profile(venues: &[Venue], grid: &GridSpec, vocab: &[String], v: CellId) -> PoiProfile {
    let mut counts = vec![0u32; vocab.len()];
    for venue in venues {
        if grid.cell_of(venue.loc).ok() == Some(v) {
            if let Ok(k) = vocab.binary_search(&venue.category) {
                counts[k] += 1;
            }
        }
    }
    profile_from_counts(&counts)
}

/// Per-cell category counts for every cell holding at least one venue.
pub struct PoiIndex {
    vocab: Vec<String>,
    counts: HashMap<CellId, Vec<u32>>,
}

impl PoiIndex {
    pub fn new(venues: &[Venue], grid: &GridSpec) -> Self {
        let vocab = category_vocab(venues);
        let mut counts: HashMap<CellId, Vec<u32>> = HashMap::new();
        for venue in venues {
            let Ok(cell) = grid.cell_of(venue.loc) else { continue };
            let k = vocab.binary_search(&venue.category).expect("vocab built from venues");
            counts.entry(cell).or_insert_with(|| vec![0; vocab.len()])[k] += 1;
        }
        Self { vocab, counts }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn profile(&self, v: CellId) -> PoiProfile {
        match self.counts.get(&v) {
            Some(c) => profile_from_counts(c),
            None => profile_from_counts(&vec![0; self.vocab.len()]),
        }
    }
}

/// Training-window crime history per `(cell, interval)`.
pub struct CrimeHistory {
    train: BTreeSet<MonthId>,
    sums: HashMap<(CellId, TimeInterval), u64>,
    cc: CellCounts,
}

impl CrimeHistory {
    pub fn new(cc: &CellCounts, train_months: &[MonthId]) -> Result<Self> {
        if train_months.is_empty() {
            return Err(Error::EmptyTraining);
        }
        let train: BTreeSet<MonthId> = train_months.iter().copied().collect();
        let mut sums = HashMap::new();
        for (k, n) in cc.iter() {
            if train.contains(&k.month) {
                *sums.entry((k.cell, k.interval)).or_default() += n;
            }
        }
        Ok(Self { train, sums, cc: cc.clone() })
    }

    /// Mean monthly crime count at `(v, t)` over the training months, leaving
    /// out `m` when it is itself a training month.
    pub fn crime_density(&self, v: CellId, m: MonthId, t: TimeInterval) -> f64 {
        let total = self.sums.get(&(v, t)).copied().unwrap_or(0);
        if self.train.contains(&m) {
            let months = self.train.len() - 1;
            if months == 0 {
                return 0.0;
            }
            (total - self.cc.get(v, m, t)) as f64 / months as f64
        } else {
            total as f64 / self.train.len() as f64
        }
    }

    /// Mean crime density over the Moore neighbourhood of `v`.
    pub fn neighbour_crime(&self, v: CellId, m: MonthId, t: TimeInterval, grid: &GridSpec) -> f64 {
        let nb = grid.neighbors8(v);
        if nb.is_empty() {
            return 0.0;
        }
        nb.iter().map(|&u| self.crime_density(u, m, t)).sum::<f64>() / nb.len() as f64
    }
}

pub fn crime_density(cc: &CellCounts, v: CellId, m: MonthId, t: TimeInterval, train_months: &[MonthId]) -> Result<f64> {
    Ok(CrimeHistory::new(cc, train_months)?.crime_density(v, m, t))
}

pub fn neighbour_crime(
    cc: &CellCounts,
    v: CellId,
    m: MonthId,
    t: TimeInterval,
    grid: &GridSpec,
    train_months: &[MonthId],
) -> Result<f64> {
    Ok(CrimeHistory::new(cc, train_months)?.neighbour_crime(v, m, t, grid))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub cell: CellId,
    pub month: MonthId,
    pub interval: TimeInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub cell: CellId,
    pub month: MonthId,
    pub interval: TimeInterval,
    pub crime_density: f64,
    pub neighbour_crime: f64,
    pub movement: NodeFlows,
    pub poi: PoiProfile,
    pub differ: DifferFeatures,
    pub target: u64,
}

impl FeatureRow {
    pub fn key(&self) -> RowKey {
        RowKey { cell: self.cell, month: self.month, interval: self.interval }
    }

    /// Feature values in the column order of [`feature_names`].
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.crime_density,
            self.neighbour_crime,
            self.movement.incoming as f64,
            self.movement.outgoing as f64,
            self.movement.stationary as f64,
            self.movement.diversity,
            self.poi.poi_density as f64,
            self.poi.venue_entropy,
        ];
        v.extend_from_slice(&self.poi.category_distribution);
        v.extend_from_slice(&[
            self.differ.risk_mean,
            self.differ.risk_median,
            self.differ.risk_count as f64,
            self.differ.risk_ratio,
            self.differ.self_risk,
        ]);
        v
    }
}

pub fn feature_names(vocab: &[String]) -> Vec<String> {
    let mut names: Vec<String> = [
        "historical.crime_density",
        "neighbourhood.neighbour_crime",
        "movement.incoming",
        "movement.outgoing",
        "movement.stationary",
        "movement.diversity",
        "poi.density",
        "poi.entropy",
    ]
    .map(String::from)
    .to_vec();
    names.extend(vocab.iter().map(|c| format!("poi.category.{c}")));
    names.extend(
        ["differ.risk_mean", "differ.risk_median", "differ.risk_count", "differ.risk_ratio", "differ.self_risk"]
            .map(String::from),
    );
    names
}

/// Which risk table the DIFFER features of a row read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMode {
    /// Every row reads the table fitted on all training months.
    Frozen,
    /// A training-month row reads a table refitted without its own month,
    /// so its target never enters its own risk factors. Other rows read the
    /// frozen table.
    #[default]
    LeaveMonthOut,
}

#[derive(Debug, Clone)]
pub struct AssembleOptions {
    pub train_months: Vec<MonthId>,
    /// Inclusive lower bound on a node's total movement in its bucket.
    pub min_moves: u64,
    pub risk_mode: RiskMode,
}

impl AssembleOptions {
    pub fn new(train_months: Vec<MonthId>) -> Self {
        Self { train_months, min_moves: 10, risk_mode: RiskMode::default() }
    }
}

/// Builds one row per `(cell, month, interval)` node whose total movement
/// reaches `min_moves`. Rows come out ordered by month, interval, cell.
pub fn assemble_dataset(
    cc: &CellCounts,
    od: &OdAggregate,
    venues: &[Venue],
    rt: &RiskTable,
    grid: &GridSpec,
    opts: &AssembleOptions,
) -> Result<Vec<FeatureRow>> {
    let history = CrimeHistory::new(cc, &opts.train_months)?;
    let poi = PoiIndex::new(venues, grid);
    let graphs = build_graphs(od);
    let held_out: BTreeMap<MonthId, RiskTable> = match opts.risk_mode {
        RiskMode::Frozen => BTreeMap::new(),
        RiskMode::LeaveMonthOut => {
            let months: BTreeSet<MonthId> = opts.train_months.iter().copied().collect();
            months
                .iter()
                .map(|&m| {
                    let rest: Vec<MonthId> = months.iter().copied().filter(|&x| x != m).collect();
                    let table = if rest.is_empty() {
                        RiskTable::from_counts(Default::default(), Vec::new())
                    } else {
                        build_risk_table(cc, od, &rest)?
                    };
                    Ok((m, table))
                })
                .collect::<Result<_>>()?
        }
    };
    let rows = graphs
        .par_iter()
        .map(|(&(month, interval), graph)| {
            let rt = held_out.get(&month).unwrap_or(rt);
            graph
                .nodes()
                .iter()
                .filter_map(|&v| {
                    let movement = graph.node_flows(v);
                    if movement.total() < opts.min_moves {
                        return None;
                    }
                    Some(FeatureRow {
                        cell: v,
                        month,
                        interval,
                        crime_density: history.crime_density(v, month, interval),
                        neighbour_crime: history.neighbour_crime(v, month, interval, grid),
                        movement,
                        poi: poi.profile(v),
                        differ: differ_features(rt, graph, v),
                        target: cc.get(v, month, interval),
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Debug, Clone)]
pub struct SampleSplit<T> {
    pub train: T,
    pub test: T,
}

fn check_disjoint(train: &[MonthId], test: &[MonthId]) -> Result<(BTreeSet<MonthId>, BTreeSet<MonthId>)> {
    let tr: BTreeSet<MonthId> = train.iter().copied().collect();
    let te: BTreeSet<MonthId> = test.iter().copied().collect();
    if let Some(m) = tr.intersection(&te).next() {
        return Err(Error::OverlappingSplit(m.to_string()));
    }
    Ok((tr, te))
}

/// Partitions rows by month; rows whose month is in neither list are dropped.
pub fn split_by_month(
    rows: Vec<FeatureRow>,
    train: &[MonthId],
    test: &[MonthId],
) -> Result<SampleSplit<Vec<FeatureRow>>> {
    let (tr, te) = check_disjoint(train, test)?;
    let mut split = SampleSplit { train: Vec::new(), test: Vec::new() };
    for r in rows {
        if tr.contains(&r.month) {
            split.train.push(r);
        } else if te.contains(&r.month) {
            split.test.push(r);
        }
    }
    Ok(split)
}

/// Feature table: row keys, the named feature matrix and integer targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub keys: Vec<RowKey>,
    pub x: Matrix,
    pub y: Vec<f64>,
}

const KEY_COLUMNS: [&str; 5] = ["row", "col", "month", "interval", "target"];

impl Dataset {
    pub fn new(keys: Vec<RowKey>, x: Matrix, y: Vec<f64>) -> Result<Self> {
        if keys.len() != x.n_rows() || y.len() != x.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} keys, {} rows, {} targets",
                keys.len(),
                x.n_rows(),
                y.len()
            )));
        }
        Ok(Self { keys, x, y })
    }

    pub fn from_rows(rows: &[FeatureRow], vocab: &[String]) -> Result<Self> {
        let names = feature_names(vocab);
        let mut data = Vec::with_capacity(rows.len() * names.len());
        for r in rows {
            let v = r.values();
            if v.len() != names.len() {
                return Err(Error::DimensionMismatch(format!(
                    "row has {} values for {} columns",
                    v.len(),
                    names.len()
                )));
            }
            data.extend(v);
        }
        let x = Matrix::new(names, rows.len(), data)?;
        Self::new(rows.iter().map(FeatureRow::key).collect(), x, rows.iter().map(|r| r.target as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            keys: idx.iter().map(|&i| self.keys[i]).collect(),
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn filter<F: Fn(&RowKey) -> bool>(&self, keep: F) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.keys[i])).collect();
        self.select(&idx)
    }

    pub fn interval(&self, t: TimeInterval) -> Dataset {
        self.filter(|k| k.interval == t)
    }

    /// The same rows without the columns of `groups`.
    pub fn without_groups(&self, groups: &[FeatureGroup]) -> Dataset {
        Dataset {
            keys: self.keys.clone(),
            x: self.x.filter_columns(|name| !groups.iter().any(|g| g.owns(name))),
            y: self.y.clone(),
        }
    }

    pub fn split_by_month(&self, train: &[MonthId], test: &[MonthId]) -> Result<SampleSplit<Dataset>> {
        let (tr, te) = check_disjoint(train, test)?;
        Ok(SampleSplit { train: self.filter(|k| tr.contains(&k.month)), test: self.filter(|k| te.contains(&k.month)) })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(KEY_COLUMNS.iter().copied().chain(self.x.names().iter().map(String::as_str)))?;
        let mut record = Vec::with_capacity(KEY_COLUMNS.len() + self.x.n_cols());
        for (i, k) in self.keys.iter().enumerate() {
            record.clear();
            record.push(k.cell.row.to_string());
            record.push(k.cell.col.to_string());
            record.push(k.month.to_string());
            record.push(k.interval.to_string());
            record.push(self.y[i].to_string());
            record.extend(self.x.row(i).iter().map(f64::to_string));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < KEY_COLUMNS.len() || header.iter().zip(KEY_COLUMNS).any(|(h, k)| h != k) {
            return Err(Error::FileFormat(format!("feature table header must start with {}", KEY_COLUMNS.join(","))));
        }
        let names: Vec<String> = header.iter().skip(KEY_COLUMNS.len()).map(str::to_owned).collect();
        let (mut keys, mut y, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::FileFormat(format!("feature table row {}: bad {what}", i + 1));
            if rec.len() != header.len() {
                return Err(bad("field count"));
            }
            let cell = CellId::new(rec[0].parse().map_err(|_| bad("row"))?, rec[1].parse().map_err(|_| bad("col"))?);
            let month = rec[2].parse().map_err(|_| bad("month"))?;
            let interval = rec[3].parse().map_err(|_| bad("interval"))?;
            keys.push(RowKey { cell, month, interval });
            y.push(rec[4].parse::<f64>().map_err(|_| bad("target"))?);
            for f in rec.iter().skip(KEY_COLUMNS.len()) {
                data.push(f.parse::<f64>().map_err(|_| bad("feature value"))?);
            }
        }
        let x = Matrix::new(names, keys.len(), data)?;
        Dataset::new(keys, x, y)
    }

    /// Row counts per interval.
    pub fn interval_sizes(&self) -> BTreeMap<TimeInterval, usize> {
        let mut out = BTreeMap::new();
        for k in &self.keys {
            *out.entry(k.interval).or_default() += 1;
        }
        out
    }
}
