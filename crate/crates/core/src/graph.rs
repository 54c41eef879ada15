//! Directed weighted mobility graphs, one per `(month, interval)` bucket.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geo::{CellId, MonthId, TimeInterval};
use crate::info::shannon_entropy;
use crate::ingest::OdAggregate;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeFlows {
    /// Arrivals from other cells.
    pub incoming: u64,
    /// Departures to other cells.
    pub outgoing: u64,
    /// Self-loop weight.
    pub stationary: u64,
    /// Entropy (nats) of arrival weights over origins, self included.
    pub diversity: f64,
}

impl NodeFlows {
    pub fn arrivals(&self) -> u64 {
        self.incoming + self.stationary
    }

    pub fn total(&self) -> u64 {
        self.incoming + self.outgoing + self.stationary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityGraph {
    month: MonthId,
    interval: TimeInterval,
    nodes: BTreeSet<CellId>,
    edges: BTreeMap<(CellId, CellId), u64>,
    inbound: BTreeMap<CellId, Vec<(CellId, u64)>>,
    outbound: BTreeMap<CellId, Vec<(CellId, u64)>>,
}

impl MobilityGraph {
    pub fn from_edges<I>(month: MonthId, interval: TimeInterval, edges: I) -> Self
    where
        I: IntoIterator<Item = ((CellId, CellId), u64)>,
    {
        let mut g = Self {
            month,
            interval,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
            inbound: BTreeMap::new(),
            outbound: BTreeMap::new(),
        };
        for ((o, d), w) in edges {
            if w > 0 {
                *g.edges.entry((o, d)).or_default() += w;
            }
        }
        for (&(o, d), &w) in &g.edges {
            g.nodes.insert(o);
            g.nodes.insert(d);
            g.inbound.entry(d).or_default().push((o, w));
            g.outbound.entry(o).or_default().push((d, w));
        }
        g
    }

    pub fn month(&self) -> MonthId {
        self.month
    }

    pub fn interval(&self) -> TimeInterval {
        self.interval
    }

    pub fn nodes(&self) -> &BTreeSet<CellId> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<(CellId, CellId), u64> {
        &self.edges
    }

    pub fn weight(&self, origin: CellId, dest: CellId) -> u64 {
        self.edges.get(&(origin, dest)).copied().unwrap_or(0)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Arrival edges `(origin, weight)` into `v`, self-loop included.
    pub fn in_edges(&self, v: CellId) -> &[(CellId, u64)] {
        self.inbound.get(&v).map_or(&[], Vec::as_slice)
    }

    pub fn out_edges(&self, v: CellId) -> &[(CellId, u64)] {
        self.outbound.get(&v).map_or(&[], Vec::as_slice)
    }

    pub fn node_flows(&self, v: CellId) -> NodeFlows {
        let mut flows = NodeFlows::default();
        for &(u, w) in self.in_edges(v) {
            if u == v {
                flows.stationary = w;
            } else {
                flows.incoming += w;
            }
        }
        flows.outgoing = self.out_edges(v).iter().filter(|(d, _)| *d != v).map(|&(_, w)| w).sum();
        flows.diversity = shannon_entropy(self.in_edges(v).iter().map(|&(_, w)| w as f64));
        flows
    }

    /// Cells with at least one movement into `v`, excluding `v` itself.
    pub fn origins_of(&self, v: CellId) -> BTreeSet<CellId> {
        self.in_edges(v).iter().map(|&(u, _)| u).filter(|&u| u != v).collect()
    }

    /// Writes the edge list as `origin_row,origin_col,dest_row,dest_col,weight`.
    pub fn write_edge_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["origin_row", "origin_col", "dest_row", "dest_col", "weight"])?;
        for (&(o, d), &wt) in &self.edges {
            out.write_record([
                o.row.to_string(),
                o.col.to_string(),
                d.row.to_string(),
                d.col.to_string(),
                wt.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn build_graph(od: &OdAggregate, month: MonthId, interval: TimeInterval) -> MobilityGraph {
    MobilityGraph::from_edges(month, interval, od.bucket(month, interval).map(|(k, w)| ((k.origin, k.dest), w)))
}

/// One graph per `(month, interval)` bucket present in `od`.
pub fn build_graphs(od: &OdAggregate) -> BTreeMap<(MonthId, TimeInterval), MobilityGraph> {
    od.buckets().into_iter().map(|(m, t)| ((m, t), build_graph(od, m, t))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::OdKey;
    use proptest::prelude::*;

    const A: CellId = CellId::new(0, 0);
    const B: CellId = CellId::new(0, 1);
    const C: CellId = CellId::new(1, 0);
    const D: CellId = CellId::new(1, 1);

    fn month(m: u32) -> MonthId {
        MonthId::new(2018, m).unwrap()
    }

    fn graph(edges: &[(CellId, CellId, u64)]) -> MobilityGraph {
        MobilityGraph::from_edges(month(3), TimeInterval::Morning, edges.iter().map(|&(o, d, w)| ((o, d), w)))
    }

    #[test]
    fn build_filters_by_bucket() {
        let mut od = OdAggregate::default();
        let t = TimeInterval::Morning;
        od.add(OdKey { month: month(3), interval: t, origin: A, dest: B }, 7);
        od.add(OdKey { month: month(4), interval: t, origin: A, dest: B }, 9);
        let g = build_graph(&od, month(3), t);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.weight(A, B), 7);
        assert!(build_graph(&od, month(5), t).is_empty());

        let mut od = OdAggregate::default();
        od.add(OdKey { month: month(3), interval: t, origin: A, dest: A }, 5);
        let g = build_graph(&od, month(3), t);
        assert_eq!(g.nodes().len(), 1);
        assert_eq!(g.weight(A, A), 5);
    }

    #[test]
    fn flows_two_equal_origins() {
        let g = graph(&[(A, B, 10), (C, B, 10)]);
        let f = g.node_flows(B);
        assert_eq!((f.incoming, f.outgoing, f.stationary), (20, 0, 0));
        assert!((f.diversity - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn flows_self_loop_only() {
        let f = graph(&[(B, B, 5)]).node_flows(B);
        assert_eq!((f.incoming, f.outgoing, f.stationary), (0, 0, 5));
        assert_eq!(f.diversity, 0.0);
    }

    #[test]
    fn flows_three_origins() {
        let f = graph(&[(A, B, 10), (C, B, 10), (D, B, 20)]).node_flows(B);
        assert!((f.diversity - 1.5 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(graph(&[]).node_flows(B), NodeFlows::default());
    }

    #[test]
    fn origins_exclude_self() {
        let g = graph(&[(A, B, 3), (B, B, 9)]);
        assert_eq!(g.origins_of(B), BTreeSet::from([A]));
        assert!(g.origins_of(A).is_empty());
        let g = graph(&[(A, D, 1), (B, D, 1), (C, D, 2)]);
        assert_eq!(g.origins_of(D).len(), 3);
    }

    fn arb_edges() -> impl Strategy<Value = Vec<(u32, u32, u64)>> {
        prop::collection::vec((0u32..9, 0u32..9, 1u64..50), 0..30)
    }

    proptest! {
        #[test]
        fn flow_identities(edges in arb_edges()) {
            let cell = |i: u32| CellId::new(i / 3, i % 3);
            let g = MobilityGraph::from_edges(month(1), TimeInterval::Night, edges.iter().map(|&(o, d, w)| ((cell(o), cell(d)), w)));
            let total = g.total_weight();
            let (mut inc, mut out, mut stat) = (0, 0, 0);
            for &v in g.nodes() {
                let f = g.node_flows(v);
                inc += f.incoming;
                out += f.outgoing;
                stat += f.stationary;
                let k = g.in_edges(v).len();
                prop_assert!(f.diversity >= 0.0);
                prop_assert!(f.diversity <= (k.max(1) as f64).ln() + 1e-12);
                prop_assert!(!g.origins_of(v).contains(&v));
            }
            prop_assert_eq!(inc + stat, total);
            prop_assert_eq!(out + stat, total);
        }

        #[test]
        fn bucket_partition(edges in prop::collection::vec((0u32..4, 0u32..4, 1u32..4, 0usize..5, 1u64..20), 0..40)) {
            let mut od = OdAggregate::default();
            for &(o, d, m, t, w) in &edges {
                od.add(OdKey { month: month(m), interval: TimeInterval::ALL[t], origin: CellId::new(0, o), dest: CellId::new(0, d) }, w);
            }
            let sum: u64 = build_graphs(&od).values().map(MobilityGraph::total_weight).sum();
            prop_assert_eq!(sum, od.total());
        }
    }
}
