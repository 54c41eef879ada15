//! Region risk factor and the directed-graph flow features derived from it.
//!
//! The risk of a cell in an interval is its training-period crime count
//! divided by its training-period arrival check-ins (incoming plus
//! stationary). Cells without arrivals have no fitted risk and read as 0,
//! which is also how cells first seen in test months are treated.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CellId, MonthId, TimeInterval};
use crate::graph::MobilityGraph;
use crate::ingest::{CellCounts, OdAggregate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRisk {
    pub crimes: u64,
    pub arrivals: u64,
}

impl CellRisk {
    pub fn rr(&self) -> f64 {
        self.crimes as f64 / self.arrivals as f64
    }
}

#[derive(Debug, Default)]
struct IntervalRisk {
    cells: BTreeMap<CellId, CellRisk>,
    mean_rr: f64,
    // Exact Σ rr, built lazily for comparisons that fall inside float noise.
    exact_sum: OnceLock<BigRational>,
}

impl Clone for IntervalRisk {
    fn clone(&self) -> Self {
        Self { cells: self.cells.clone(), mean_rr: self.mean_rr, exact_sum: OnceLock::new() }
    }
}

impl IntervalRisk {
    fn new(cells: BTreeMap<CellId, CellRisk>) -> Self {
        let mean_rr =
            if cells.is_empty() { 0.0 } else { cells.values().map(CellRisk::rr).sum::<f64>() / cells.len() as f64 };
        Self { cells, mean_rr, exact_sum: OnceLock::new() }
    }

    fn exact_sum(&self) -> &BigRational {
        self.exact_sum.get_or_init(|| {
            self.cells
                .values()
                .map(|c| BigRational::new(BigInt::from(c.crimes), BigInt::from(c.arrivals)))
                .fold(BigRational::from_integer(BigInt::from(0)), |acc, r| acc + r)
        })
    }

    fn above_mean(&self, cell: CellId) -> bool {
        let Some(c) = self.cells.get(&cell) else { return false };
        let r = c.rr();
        let m = self.mean_rr;
        if (r - m).abs() > 1e-9 * r.max(m) {
            return r > m;
        }
        if r == 0.0 {
            return false;
        }
        let n = BigInt::from(self.cells.len());
        let lhs = BigRational::new(BigInt::from(c.crimes) * n, BigInt::from(c.arrivals));
        &lhs > self.exact_sum()
    }
}

/// Fitted region risk per interval, frozen after fitting.
#[derive(Debug, Clone)]
pub struct RiskTable {
    intervals: [IntervalRisk; 5],
    fitted_months: Vec<MonthId>,
}

impl RiskTable {
    pub fn from_counts(per_interval: [BTreeMap<CellId, CellRisk>; 5], fitted_months: Vec<MonthId>) -> Self {
        Self { intervals: per_interval.map(IntervalRisk::new), fitted_months }
    }

    pub fn fitted_months(&self) -> &[MonthId] {
        &self.fitted_months
    }

    /// Risk of `cell`, 0 when the cell was not fitted.
    pub fn rr(&self, t: TimeInterval, cell: CellId) -> f64 {
        self.intervals[t.index()].cells.get(&cell).map_or(0.0, CellRisk::rr)
    }

    pub fn cell(&self, t: TimeInterval, cell: CellId) -> Option<CellRisk> {
        self.intervals[t.index()].cells.get(&cell).copied()
    }

    /// Mean risk over fitted cells of the interval.
    pub fn mean_rr(&self, t: TimeInterval) -> f64 {
        self.intervals[t.index()].mean_rr
    }

    /// Whether `cell`'s risk exceeds the interval mean, compared exactly.
    pub fn is_above_mean(&self, t: TimeInterval, cell: CellId) -> bool {
        self.intervals[t.index()].above_mean(cell)
    }

    pub fn cells(&self, t: TimeInterval) -> impl Iterator<Item = (CellId, CellRisk)> + '_ {
        self.intervals[t.index()].cells.iter().map(|(&c, &r)| (c, r))
    }

    pub fn len(&self, t: TimeInterval) -> usize {
        self.intervals[t.index()].cells.len()
    }

    /// Writes `interval,row,col,rr` for every fitted cell.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["interval", "row", "col", "rr"])?;
        for t in TimeInterval::ALL {
            for (c, r) in self.cells(t) {
                out.write_record([t.to_string(), c.row.to_string(), c.col.to_string(), r.rr().to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Fits the risk table on `train_months`, pooling crimes and arrivals over
/// those months per `(cell, interval)`.
pub fn build_risk_table(cc: &CellCounts, od: &OdAggregate, train_months: &[MonthId]) -> Result<RiskTable> {
    if train_months.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let months: BTreeSet<MonthId> = train_months.iter().copied().collect();
    let mut per_interval: [BTreeMap<CellId, CellRisk>; 5] = Default::default();
    for (k, w) in od.iter() {
        if months.contains(&k.month) {
            per_interval[k.interval.index()].entry(k.dest).or_insert(CellRisk { crimes: 0, arrivals: 0 }).arrivals += w;
        }
    }
    for (k, n) in cc.iter() {
        if months.contains(&k.month) {
            if let Some(c) = per_interval[k.interval.index()].get_mut(&k.cell) {
                c.crimes += n;
            }
        }
    }
    Ok(RiskTable::from_counts(per_interval, months.into_iter().collect()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DifferFeatures {
    pub risk_mean: f64,
    pub risk_median: f64,
    pub risk_count: u32,
    pub risk_ratio: f64,
    pub self_risk: f64,
}

pub(crate) fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    match n {
        0 => 0.0,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

/// DIFFER features of `v` in `graph`, read against the frozen risk table for
/// the graph's interval.
pub fn differ_features(rt: &RiskTable, graph: &MobilityGraph, v: CellId) -> DifferFeatures {
    let t = graph.interval();
    let origins = graph.origins_of(v);
    let self_risk = rt.rr(t, v);
    if origins.is_empty() {
        return DifferFeatures { self_risk, ..Default::default() };
    }
    let mut risks: Vec<f64> = origins.iter().map(|&r| rt.rr(t, r)).collect();
    risks.sort_by(f64::total_cmp);
    let risk_count = origins.iter().filter(|&&r| rt.is_above_mean(t, r)).count() as u32;
    DifferFeatures {
        risk_mean: risks.iter().sum::<f64>() / risks.len() as f64,
        risk_median: median(&risks),
        risk_count,
        risk_ratio: risk_count as f64 / origins.len() as f64,
        self_risk,
    }
}
