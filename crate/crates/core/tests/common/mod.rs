//! Brute-force reference computations shared by integration tests.
//!
//! Everything here recomputes from the raw edge and crime lists with exact
//! rational arithmetic, without going through the crate's graph or risk
//! types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskflow_core::geo::{CellId, GridSpec, MonthId, TimeInterval};
use riskflow_core::graph::build_graph;
use riskflow_core::ingest::{CellCounts, OdAggregate, OdKey};
use riskflow_core::risk::{build_risk_table, differ_features, DifferFeatures, RiskTable};

pub struct Instance {
    pub grid: GridSpec,
    pub months: Vec<MonthId>,
    pub train: Vec<MonthId>,
    pub edges: Vec<(OdKey, u64)>,
    pub crimes: Vec<(CellId, MonthId, TimeInterval, u64)>,
}

impl Instance {
    pub fn od(&self) -> OdAggregate {
        let mut od = OdAggregate::default();
        for &(k, w) in &self.edges {
            od.add(k, w);
        }
        od
    }

    pub fn counts(&self) -> CellCounts {
        let mut cc = CellCounts::default();
        for &(c, m, t, n) in &self.crimes {
            cc.add(c, m, t, n);
        }
        cc
    }

    pub fn scaled(&self, k: u64) -> Instance {
        Instance {
            grid: self.grid.clone(),
            months: self.months.clone(),
            train: self.train.clone(),
            edges: self.edges.clone(),
            crimes: self.crimes.iter().map(|&(c, m, t, n)| (c, m, t, n * k)).collect(),
        }
    }
}

/// A grid of at most 6×6 cells, three months (two for training) and at most
/// 30 weighted edges, with edges concentrated on few cells so that origins
/// overlap and ties against the mean occur.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(1..=6);
    let cols = rng.random_range(1..=6);
    let grid = GridSpec::with_dimensions(41.8, -87.7, rows, cols, 400.0).unwrap();
    let months: Vec<MonthId> = (1..=3).map(|k| MonthId::new(2018, k).unwrap()).collect();
    let train = months[..2].to_vec();
    let cell = |rng: &mut ChaCha8Rng| CellId::new(rng.random_range(0..rows), rng.random_range(0..cols));
    let intervals = [TimeInterval::Morning, TimeInterval::Night];
    let n_edges = rng.random_range(0..=30);
    let edges = (0..n_edges)
        .map(|_| {
            let key = OdKey {
                month: months[rng.random_range(0..3)],
                interval: intervals[rng.random_range(0..2)],
                origin: cell(&mut rng),
                dest: cell(&mut rng),
            };
            (key, rng.random_range(1..=8))
        })
        .collect();
    let n_crimes = rng.random_range(0..=40);
    let crimes = (0..n_crimes)
        .map(|_| {
            (cell(&mut rng), months[rng.random_range(0..3)], intervals[rng.random_range(0..2)], rng.random_range(1..=5))
        })
        .collect();
    Instance { grid, months, train, edges, crimes }
}

fn q(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact risk factor per interval for every cell with training arrivals.
pub fn brute_risk(inst: &Instance) -> BTreeMap<(TimeInterval, CellId), BigRational> {
    let mut arrivals: BTreeMap<(TimeInterval, CellId), u64> = BTreeMap::new();
    for (k, w) in &inst.edges {
        if inst.train.contains(&k.month) {
            *arrivals.entry((k.interval, k.dest)).or_default() += w;
        }
    }
    arrivals
        .into_iter()
        .map(|((t, v), a)| {
            let crimes: u64 = inst
                .crimes
                .iter()
                .filter(|(c, m, ti, _)| *c == v && *ti == t && inst.train.contains(m))
                .map(|x| x.3)
                .sum();
            ((t, v), BigRational::new(BigInt::from(crimes), BigInt::from(a)))
        })
        .collect()
}

pub struct BruteDiffer {
    pub origins: usize,
    pub risk_mean: BigRational,
    pub risk_median: BigRational,
    pub risk_count: u32,
    pub self_risk: BigRational,
}

pub fn brute_differ(
    inst: &Instance,
    risk: &BTreeMap<(TimeInterval, CellId), BigRational>,
    m: MonthId,
    t: TimeInterval,
    v: CellId,
) -> BruteDiffer {
    let rr = |c: CellId| risk.get(&(t, c)).cloned().unwrap_or_else(|| q(0));
    let fitted: Vec<&BigRational> = risk.iter().filter(|((ti, _), _)| *ti == t).map(|(_, r)| r).collect();
    let mean =
        if fitted.is_empty() { q(0) } else { fitted.iter().fold(q(0), |acc, r| acc + *r) / q(fitted.len() as u64) };
    let origins: BTreeSet<CellId> = inst
        .edges
        .iter()
        .filter(|(k, _)| k.month == m && k.interval == t && k.dest == v && k.origin != v)
        .map(|(k, _)| k.origin)
        .collect();
    let mut risks: Vec<BigRational> = origins.iter().map(|&u| rr(u)).collect();
    risks.sort();
    let n = risks.len();
    let (risk_mean, risk_median) = if n == 0 {
        (q(0), q(0))
    } else {
        let mean = risks.iter().fold(q(0), |acc, r| acc + r) / q(n as u64);
        let med = if n % 2 == 1 { risks[n / 2].clone() } else { (&risks[n / 2 - 1] + &risks[n / 2]) / q(2) };
        (mean, med)
    };
    let risk_count = origins.iter().filter(|&&u| risk.get(&(t, u)).is_some_and(|r| *r > mean)).count() as u32;
    BruteDiffer { origins: n, risk_mean, risk_median, risk_count, self_risk: rr(v) }
}

fn to_f64(r: &BigRational) -> f64 {
    let n: f64 = r.numer().to_string().parse().unwrap();
    let d: f64 = r.denom().to_string().parse().unwrap();
    n / d
}

fn close(got: f64, want: &BigRational) -> bool {
    let w = to_f64(want);
    (got - w).abs() <= 1e-12 * w.abs().max(1.0)
}

/// Every `(month, interval, node)` of the instance with its fitted table and
/// DIFFER features, as computed by the crate.
pub fn crate_features(inst: &Instance) -> (RiskTable, Vec<(MonthId, TimeInterval, CellId, DifferFeatures)>) {
    let od = inst.od();
    let rt = build_risk_table(&inst.counts(), &od, &inst.train).unwrap();
    let mut out = Vec::new();
    for &m in &inst.months {
        for t in TimeInterval::ALL {
            let g = build_graph(&od, m, t);
            for &v in g.nodes() {
                out.push((m, t, v, differ_features(&rt, &g, v)));
            }
        }
    }
    (rt, out)
}

/// Compares the crate against the brute-force recomputation. Returns the
/// number of values checked.
pub fn check_against_oracle(inst: &Instance) -> Result<usize, String> {
    let risk = brute_risk(inst);
    let (rt, feats) = crate_features(inst);
    let mut checked = 0;
    for t in TimeInterval::ALL {
        for (c, r) in rt.cells(t) {
            let want = risk.get(&(t, c)).ok_or(format!("unexpected fitted cell {c:?} in {t}"))?;
            if BigRational::new(BigInt::from(r.crimes), BigInt::from(r.arrivals)) != *want {
                return Err(format!("risk factor of {c:?} in {t}: {}/{} vs {want}", r.crimes, r.arrivals));
            }
            checked += 1;
        }
        if rt.len(t) != risk.keys().filter(|(ti, _)| *ti == t).count() {
            return Err(format!("fitted cell count differs in {t}"));
        }
    }
    for (m, t, v, f) in feats {
        let b = brute_differ(inst, &risk, m, t, v);
        let ctx = format!("{m} {t} {v:?}");
        if f.risk_count != b.risk_count {
            return Err(format!("{ctx}: risk_count {} vs {}", f.risk_count, b.risk_count));
        }
        let ratio = if b.origins == 0 { q(0) } else { q(b.risk_count as u64) / q(b.origins as u64) };
        for (name, got, want) in [
            ("risk_mean", f.risk_mean, &b.risk_mean),
            ("risk_median", f.risk_median, &b.risk_median),
            ("risk_ratio", f.risk_ratio, &ratio),
            ("self_risk", f.self_risk, &b.self_risk),
        ] {
            if !close(got, want) {
                return Err(format!("{ctx}: {name} {got} vs {want}"));
            }
        }
        checked += 5;
    }
    Ok(checked)
}

/// Formula invariants on one instance: ratio bounds, count bounds and
/// invariance of count and ratio under scaling every crime count by `k`.
pub fn check_invariants(inst: &Instance, k: u64) -> Result<(), String> {
    let (_, feats) = crate_features(inst);
    let (_, scaled) = crate_features(&inst.scaled(k));
    let od = inst.od();
    for ((m, t, v, f), (_, _, _, g)) in feats.iter().zip(&scaled) {
        let origins = build_graph(&od, *m, *t).origins_of(*v).len() as u32;
        if !(0.0..=1.0).contains(&f.risk_ratio) {
            return Err(format!("risk_ratio {} out of [0, 1]", f.risk_ratio));
        }
        if f.risk_count > origins {
            return Err(format!("risk_count {} exceeds |R| = {origins}", f.risk_count));
        }
        if f.risk_count != g.risk_count || f.risk_ratio != g.risk_ratio {
            return Err(format!("scaling crimes by {k} changed count/ratio at {m} {t} {v:?}"));
        }
    }
    Ok(())
}
