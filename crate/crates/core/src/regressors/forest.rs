//! Random forest regression: bootstrap-aggregated CART trees grown with
//! greedy variance-reduction splits over all features.

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{Params, Reader};
use crate::error::{Error, Result};
use crate::rng;

pub const HYPERPARAMETERS: &[&str] = &["n_trees", "min_samples_leaf", "bootstrap", "max_depth"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            min_samples_leaf: 1,
            bootstrap: true,
            max_depth: None,
        }
    }
}

impl ForestParams {
    pub fn from_params(params: &Params) -> Result<Self> {
        let r = Reader::new("rfr", params, HYPERPARAMETERS)?;
        let d = ForestParams::default();
        let p = ForestParams {
            n_trees: r.usize("n_trees", d.n_trees)?,
            min_samples_leaf: r.usize("min_samples_leaf", d.min_samples_leaf)?,
            bootstrap: r.bool("bootstrap", d.bootstrap)?,
            max_depth: match r.raw("max_depth") {
                None => None,
                Some(v) if v.as_str() == Some("none") => None,
                Some(_) => Some(r.usize("max_depth", 0)?),
            },
        };
        if p.n_trees == 0 || p.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument("rfr n_trees and min_samples_leaf must be >= 1".into()));
        }
        Ok(p)
    }
}

/// One regression tree as parallel node arrays; `feature < 0` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    feature: Vec<i32>,
    threshold: Vec<f64>,
    left: Vec<u32>,
    right: Vec<u32>,
    value: Vec<f64>,
}

impl Tree {
    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return self.value[node];
            }
            node = if row[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        let n = self.feature.len();
        let lens = [self.threshold.len(), self.left.len(), self.right.len(), self.value.len()];
        if n == 0 || lens.iter().any(|&l| l != n) {
            return Err(Error::Format("tree arrays have inconsistent lengths".into()));
        }
        for i in 0..n {
            let f = self.feature[i];
            if f >= 0 {
                let (l, r) = (self.left[i] as usize, self.right[i] as usize);
                // children are always created after their parent
                if f as usize >= n_features || l <= i || r <= i || l >= n || r >= n {
                    return Err(Error::Format(format!("tree node {i} is malformed")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], params: &ForestParams, seed: u64) -> Result<Forest> {
        let n = x.nrows();
        if n == 0 || y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::rng(rng::derive(seed, t as u64));
                let weights = if params.bootstrap {
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[r.random_range(0..n)] += 1.0;
                    }
                    w
                } else {
                    vec![1.0; n]
                };
                grow_tree(x, y, &weights, params)
            })
            .collect();
        Ok(Forest {
            params: params.clone(),
            n_features: x.ncols(),
            trees,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Format("forest has no trees".into()));
        }
        self.trees.iter().try_for_each(|t| t.validate(self.n_features))
    }
}

struct Builder<'a> {
    cols: Vec<&'a [f64]>,
    y: &'a [f64],
    w: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
    /// Per feature, the node's rows sorted by that feature; every node owns
    /// the same `[start, end)` range in all of them.
    sorted: Vec<Vec<usize>>,
    goes_left: Vec<bool>,
    scratch: Vec<usize>,
    tree: Tree,
}

struct Split {
    feature: usize,
    threshold: f64,
    n_left: usize,
}

fn grow_tree(x: &DMatrix<f64>, y: &[f64], weights: &[f64], params: &ForestParams) -> Tree {
    let cols: Vec<&[f64]> = (0..x.ncols())
        .map(|j| &x.as_slice()[j * x.nrows()..(j + 1) * x.nrows()])
        .collect();
    let rows: Vec<usize> = (0..y.len()).filter(|&i| weights[i] > 0.0).collect();
    let sorted = cols
        .iter()
        .map(|col| {
            let mut r = rows.clone();
            r.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            r
        })
        .collect();
    let mut b = Builder {
        cols,
        y,
        w: weights,
        min_leaf: params.min_samples_leaf,
        max_depth: params.max_depth.unwrap_or(usize::MAX),
        sorted,
        goes_left: vec![false; y.len()],
        scratch: Vec::with_capacity(rows.len()),
        tree: Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
        },
    };
    if b.cols.is_empty() {
        let (s, w) = rows.iter().fold((0.0, 0.0), |(s, w), &i| (s + weights[i] * y[i], w + weights[i]));
        b.tree.push_leaf(s / w);
        return b.tree;
    }
    b.build(0, rows.len(), 0);
    b.tree
}

impl Builder<'_> {
    /// Grow the subtree for rows `[start, end)` and return its node index.
    fn build(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let rows = &self.sorted[0][start..end];
        let first_y = self.y[rows[0]];
        let pure = rows.iter().all(|&r| self.y[r] == first_y);
        let leaf_value = || {
            if pure {
                // exact value so memorized targets are reproduced bit for bit
                first_y
            } else {
                let (s, w) = rows.iter().fold((0.0, 0.0), |(s, w), &r| (s + self.w[r] * self.y[r], w + self.w[r]));
                s / w
            }
        };
        if pure || depth >= self.max_depth || end - start < 2 * self.min_leaf {
            let v = leaf_value();
            return self.tree.push_leaf(v);
        }
        let Some(split) = self.best_split(start, end) else {
            let v = leaf_value();
            return self.tree.push_leaf(v);
        };
        let node = self.tree.push_leaf(0.0);
        self.partition(start, end, &split);
        let mid = start + split.n_left;
        let left = self.build(start, mid, depth + 1);
        let right = self.build(mid, end, depth + 1);
        self.tree.feature[node] = split.feature as i32;
        self.tree.threshold[node] = split.threshold;
        self.tree.left[node] = left as u32;
        self.tree.right[node] = right as u32;
        node
    }

    /// Maximize `S_L²/W_L + S_R²/W_R` (equivalent to minimizing the weighted
    /// child variance). Strict improvement keeps the lowest feature and then
    /// the lowest threshold on ties.
    fn best_split(&self, start: usize, end: usize) -> Option<Split> {
        let n = end - start;
        let (total_s, total_w) = self.sorted[0][start..end]
            .iter()
            .fold((0.0, 0.0), |(s, w), &r| (s + self.w[r] * self.y[r], w + self.w[r]));
        let mut best: Option<(f64, Split)> = None;
        for (f, col) in self.cols.iter().enumerate() {
            let rows = &self.sorted[f][start..end];
            if col[rows[0]] == col[rows[n - 1]] {
                continue;
            }
            let (mut sl, mut wl) = (0.0, 0.0);
            for p in 0..n - 1 {
                let r = rows[p];
                sl += self.w[r] * self.y[r];
                wl += self.w[r];
                let n_left = p + 1;
                if n_left < self.min_leaf {
                    continue;
                }
                if n - n_left < self.min_leaf {
                    break;
                }
                let (a, b) = (col[r], col[rows[p + 1]]);
                if a == b {
                    continue;
                }
                let (sr, wr) = (total_s - sl, total_w - wl);
                let score = sl * sl / wl + sr * sr / wr;
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    let mid = a + (b - a) * 0.5;
                    let threshold = if mid >= b || mid < a { a } else { mid };
                    best = Some((score, Split { feature: f, threshold, n_left }));
                }
            }
        }
        best.map(|(_, s)| s)
    }

    /// Stable-partition every feature's row list by the chosen split.
    fn partition(&mut self, start: usize, end: usize, split: &Split) {
        let col = self.cols[split.feature];
        for &r in &self.sorted[split.feature][start..end] {
            self.goes_left[r] = col[r] <= split.threshold;
        }
        for f in 0..self.sorted.len() {
            let rows = &mut self.sorted[f][start..end];
            self.scratch.clear();
            let mut k = 0;
            for i in 0..rows.len() {
                let r = rows[i];
                if self.goes_left[r] {
                    rows[k] = r;
                    k += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            debug_assert_eq!(k, split.n_left);
            rows[k..].copy_from_slice(&self.scratch);
        }
    }
}
