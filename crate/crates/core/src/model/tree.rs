//! Variance-reduction regression trees over pre-binned features.
//!
//! Every feature is discretized once per training matrix: when a column has
//! at most `max_bins` distinct values each value gets its own bin and the
//! candidate thresholds are the midpoints between consecutive values, which
//! makes the split search exact. Wider columns fall back to quantile cuts.
//! Splits minimize the summed squared deviation of the two children.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::Matrix;

pub const DEFAULT_MAX_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    cuts: Vec<Vec<f64>>,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + 0.5 * (hi - lo);
    if mid >= hi {
        lo
    } else {
        mid
    }
}

impl FeatureBins {
    pub fn fit(x: &Matrix, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, u16::MAX as usize);
        let n = x.n_rows();
        let cuts = (0..x.n_cols())
            .map(|j| {
                let mut col: Vec<f64> = x.column(j).collect();
                col.sort_by(f64::total_cmp);
                let mut distinct: Vec<(f64, usize)> = Vec::new();
                for v in col {
                    match distinct.last_mut() {
                        Some((last, count)) if *last == v => *count += 1,
                        _ => distinct.push((v, 1)),
                    }
                }
                if distinct.len() <= max_bins {
                    return distinct.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
                }
                let mut cuts = Vec::with_capacity(max_bins - 1);
                let mut cum = 0usize;
                let mut q = 1usize;
                for i in 0..distinct.len() - 1 {
                    cum += distinct[i].1;
                    if cum * max_bins >= q * n {
                        cuts.push(midpoint(distinct[i].0, distinct[i + 1].0));
                        while q * n <= cum * max_bins {
                            q += 1;
                        }
                    }
                }
                cuts
            })
            .collect();
        Self { cuts }
    }

    pub fn n_features(&self) -> usize {
        self.cuts.len()
    }

    pub fn n_bins(&self, j: usize) -> usize {
        self.cuts[j].len() + 1
    }

    /// Bin of `v` in feature `j`; `bin(v) <= b` exactly when `v <= threshold(j, b)`.
    pub fn bin(&self, j: usize, v: f64) -> u16 {
        self.cuts[j].partition_point(|&c| c < v) as u16
    }

    pub fn threshold(&self, j: usize, b: usize) -> f64 {
        self.cuts[j][b]
    }

    pub fn bin_matrix(&self, x: &Matrix) -> BinnedMatrix {
        let n = x.n_rows();
        let p = x.n_cols();
        let mut bins = vec![0u16; n * p];
        for j in 0..p {
            for (i, v) in x.column(j).enumerate() {
                bins[j * n + i] = self.bin(j, v);
            }
        }
        BinnedMatrix { n_rows: n, bins }
    }
}

/// Column-major bin indices.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    bins: Vec<u16>,
}

impl BinnedMatrix {
    fn column(&self, j: usize) -> &[u16] {
        &self.bins[j * self.n_rows..(j + 1) * self.n_rows]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    k = if row[feature as usize] <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], k: usize) -> usize {
            match nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// `(feature, threshold)` of the root, if it splits.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            Node::Split { feature, threshold, .. } => Some((*feature as usize, *threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per node; values at or above the candidate count try
    /// all of them.
    pub mtry: usize,
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    bin: usize,
}

struct Builder<'a, R> {
    binned: &'a BinnedMatrix,
    bins: &'a FeatureBins,
    y: &'a [f64],
    candidates: &'a [usize],
    params: TreeParams,
    rng: Option<&'a mut R>,
    nodes: Vec<Node>,
    positions: Vec<usize>,
    counts: Vec<u32>,
    sums: Vec<f64>,
    pairs: Vec<(u16, f64)>,
    buf: Vec<usize>,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&mut self, slot: usize, value: f64) {
        self.nodes[slot] = Node::Leaf { value };
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let n = idx.len();
        let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for &i in idx.iter() {
            let v = self.y[i];
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let value = sum / n as f64;
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf.max(1) || lo == hi {
            self.leaf(slot, value);
            return slot as u32;
        }
        let sse: f64 = idx.iter().map(|&i| (self.y[i] - value).powi(2)).sum();

        let k = self.candidates.len();
        let mtry = self.params.mtry.min(k);
        self.positions.clear();
        self.positions.extend(0..k);
        if mtry < k {
            let rng = self.rng.as_deref_mut().expect("feature subsampling needs an rng");
            for i in 0..mtry {
                let r = rng.random_range(i..k);
                self.positions.swap(i, r);
            }
        }
        let mut best: Option<SplitChoice> = None;
        let floor = sse * 1e-12;
        for s in 0..mtry {
            let feature = self.candidates[self.positions[s]];
            if let Some((gain, bin)) = self.best_bin(feature, idx, sum) {
                if gain > floor && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(SplitChoice { gain, feature, bin });
                }
            }
        }
        let Some(best) = best else {
            self.leaf(slot, value);
            return slot as u32;
        };

        let col = self.binned.column(best.feature);
        self.buf.clear();
        self.buf.extend(idx.iter().copied().filter(|&i| col[i] as usize <= best.bin));
        let n_left = self.buf.len();
        self.buf.extend(idx.iter().copied().filter(|&i| col[i] as usize > best.bin));
        idx.copy_from_slice(&self.buf);
        let (left_idx, right_idx) = idx.split_at_mut(n_left);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: best.feature as u32,
            threshold: self.bins.threshold(best.feature, best.bin),
            left,
            right,
        };
        slot as u32
    }

    /// Best split of feature `j` as `(gain, last left bin)`.
    fn best_bin(&mut self, j: usize, idx: &[usize], sum: f64) -> Option<(f64, usize)> {
        let nb = self.bins.n_bins(j);
        if nb < 2 {
            return None;
        }
        let col = self.binned.column(j);
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let parent = sum * sum / n as f64;
        let mut best: Option<(f64, usize)> = None;
        let consider = |cl: usize, sl: f64, b: usize, best: &mut Option<(f64, usize)>| -> bool {
            let cr = n - cl;
            if cl < min_leaf {
                return true;
            }
            if cr < min_leaf {
                return false;
            }
            let sr = sum - sl;
            let gain = sl * sl / cl as f64 + sr * sr / cr as f64 - parent;
            if best.is_none_or(|(g, _)| gain > g) {
                *best = Some((gain, b));
            }
            true
        };
        if nb <= 2 * n {
            self.counts.clear();
            self.counts.resize(nb, 0);
            self.sums.clear();
            self.sums.resize(nb, 0.0);
            for &i in idx {
                let b = col[i] as usize;
                self.counts[b] += 1;
                self.sums[b] += self.y[i];
            }
            let (mut cl, mut sl) = (0usize, 0.0);
            for b in 0..nb - 1 {
                if self.counts[b] == 0 {
                    continue;
                }
                cl += self.counts[b] as usize;
                sl += self.sums[b];
                if cl == n || !consider(cl, sl, b, &mut best) {
                    break;
                }
            }
        } else {
            self.pairs.clear();
            self.pairs.extend(idx.iter().map(|&i| (col[i], self.y[i])));
            self.pairs.sort_by_key(|p| p.0);
            let (mut cl, mut sl) = (0usize, 0.0);
            let mut k = 0;
            while k < n {
                let b = self.pairs[k].0;
                while k < n && self.pairs[k].0 == b {
                    sl += self.pairs[k].1;
                    cl += 1;
                    k += 1;
                }
                if cl == n || !consider(cl, sl, b as usize, &mut best) {
                    break;
                }
            }
        }
        best
    }
}

/// Grows one tree on the rows listed in `sample` (repeats allowed).
///
/// `candidates` lists the columns eligible for splitting. When
/// `params.mtry` is below their count, each node draws its subset from `rng`.
pub fn grow<R: Rng>(
    binned: &BinnedMatrix,
    bins: &FeatureBins,
    y: &[f64],
    mut sample: Vec<usize>,
    candidates: &[usize],
    params: TreeParams,
    rng: Option<&mut R>,
) -> RegressionTree {
    if sample.is_empty() {
        return RegressionTree { nodes: vec![Node::Leaf { value: 0.0 }] };
    }
    let mut b = Builder {
        binned,
        bins,
        y,
        candidates,
        params,
        rng,
        nodes: Vec::new(),
        positions: Vec::new(),
        counts: Vec::new(),
        sums: Vec::new(),
        pairs: Vec::new(),
        buf: Vec::with_capacity(sample.len()),
    };
    b.build(&mut sample, 0);
    RegressionTree { nodes: b.nodes }
}

/// Columns with more than one distinct value.
pub fn splittable_columns(bins: &FeatureBins) -> Vec<usize> {
    (0..bins.n_features()).filter(|&j| bins.n_bins(j) > 1).collect()
}

/// Stable ordering of rows by feature values, then target. Fitting on the
/// permuted rows makes a model independent of the caller's row order.
pub fn canonical_order(x: &Matrix, y: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..x.n_rows()).collect();
    perm.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y[a].total_cmp(&y[b]))
    });
    perm
}
