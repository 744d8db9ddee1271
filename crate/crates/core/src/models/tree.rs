//! Multi-output regression trees.
//!
//! A split minimizes the summed squared error of the two children, totalled
//! over every output dimension. Candidate thresholds are midpoints between
//! consecutive distinct values of a feature; features and thresholds are
//! scanned in ascending order and a candidate replaces the incumbent only on
//! a strict improvement, so ties resolve to the lowest feature index and
//! then the lowest threshold, independent of scan implementation details.
//!
//! Rows carry integer weights (bootstrap multiplicities); rows with weight
//! zero are ignored entirely. Training walks presorted per-feature index
//! arrays and partitions them stably level by level, giving
//! `O(features * rows)` work per depth level rather than a sort per node.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Matrix;

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// Every feature (classic bagged regression trees).
    All,
    /// `ceil(sqrt(d))` features drawn per node.
    Sqrt,
    /// A fixed number of features drawn per node.
    Fixed(usize),
}

impl MaxFeatures {
    /// Number of features considered per node for `d` total features.
    pub fn count(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::Fixed(m) => m.min(d),
        }
        .max(1)
    }
}

/// Growth limits for a single tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Maximum number of split levels above a leaf.
    pub max_depth: usize,
    /// Minimum weighted sample count in each child.
    pub min_samples_leaf: u64,
    pub max_features: MaxFeatures,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.max_depth > 64 {
            return Err(Error::InvalidConfig(format!(
                "tree depth {} outside 1..=64",
                self.max_depth
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if let MaxFeatures::Fixed(0) = self.max_features {
            return Err(Error::InvalidConfig(
                "max_features must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A fitted tree in compact form.
///
/// `nodes[i] = (feature, threshold, left, right)`. Interior nodes have
/// `feature >= 0` and route `x[feature] <= threshold` to `left`. Leaves have
/// `feature == -1` and store the index of their value vector in `left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    nodes: Vec<(i32, f64, u32, u32)>,
    leaf_values: Vec<Vec<f64>>,
}

impl TreeModel {
    /// Output dimensionality.
    pub fn n_outputs(&self) -> usize {
        self.leaf_values.first().map_or(0, Vec::len)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_values.len()
    }

    /// The root's `(feature, threshold)` split, or `None` when the root is
    /// a leaf. Lets harnesses compare the first greedy decision against an
    /// exhaustive-search oracle.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        let (feature, threshold, _, _) = self.nodes[0];
        (feature >= 0).then_some((feature as usize, threshold))
    }

    /// The leaf value vector for a feature row.
    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        let mut i = 0usize;
        loop {
            let (feature, threshold, left, right) = self.nodes[i];
            if feature < 0 {
                return &self.leaf_values[left as usize];
            }
            i = if row[feature as usize] <= threshold {
                left as usize
            } else {
                right as usize
            };
        }
    }

    /// Adds this tree's prediction for `row` into `acc`.
    pub fn accumulate_row(&self, row: &[f64], acc: &mut [f64]) {
        for (a, v) in acc.iter_mut().zip(self.predict_row(row)) {
            *a += v;
        }
    }
}

/// Per-feature row orderings, computed once and shared by every tree of a
/// forest. Ties order by row index so the ordering is total.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    per_feature: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &Matrix) -> Self {
        let per_feature = (0..x.cols)
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.rows as u32).collect();
                idx.sort_unstable_by(|&a, &b| {
                    x.row(a as usize)[f]
                        .total_cmp(&x.row(b as usize)[f])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { per_feature }
    }
}

/// Fits one tree on the weighted rows.
///
/// `rng` drives per-node feature subsampling (unused when `max_features`
/// covers every feature, but always consumed in the same node order so
/// results are reproducible).
///
/// Errors: [`Error::ShapeMismatch`] on inconsistent dimensions,
/// [`Error::EmptyInput`] when no row has positive weight.
pub fn fit_tree<R: Rng>(
    x: &Matrix,
    y: &Matrix,
    weights: &[u32],
    config: &TreeConfig,
    sorted: &SortedColumns,
    rng: &mut R,
) -> Result<TreeModel> {
    config.validate()?;
    if y.rows != x.rows {
        return Err(Error::ShapeMismatch {
            context: "tree targets",
            expected: x.rows,
            got: y.rows,
        });
    }
    if weights.len() != x.rows {
        return Err(Error::ShapeMismatch {
            context: "tree row weights",
            expected: x.rows,
            got: weights.len(),
        });
    }
    if x.cols == 0 {
        return Err(Error::EmptyInput("tree features"));
    }
    let cols: Vec<Vec<u32>> = sorted
        .per_feature
        .iter()
        .map(|idx| {
            idx.iter()
                .copied()
                .filter(|&r| weights[r as usize] > 0)
                .collect()
        })
        .collect();
    if cols.first().is_none_or(Vec::is_empty) {
        return Err(Error::EmptyInput("tree rows with positive weight"));
    }
    let n_active = cols[0].len();
    let mut builder = Builder {
        x,
        y,
        weights,
        config,
        rng,
        cols,
        goes_left: vec![false; x.rows],
        scratch: Vec::with_capacity(n_active),
        suml: vec![0.0; y.cols],
        nodes: Vec::new(),
        leaf_values: Vec::new(),
    };
    builder.build(0, n_active, 0);
    Ok(TreeModel {
        nodes: builder.nodes,
        leaf_values: builder.leaf_values,
    })
}

struct Builder<'a, R: Rng> {
    x: &'a Matrix,
    y: &'a Matrix,
    weights: &'a [u32],
    config: &'a TreeConfig,
    rng: &'a mut R,
    /// Per feature: active row ids sorted by that feature, partitioned so
    /// every tree node owns one contiguous range in every array.
    cols: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    suml: Vec<f64>,
    nodes: Vec<(i32, f64, u32, u32)>,
    leaf_values: Vec<Vec<f64>>,
}

impl<R: Rng> Builder<'_, R> {
    /// Builds the subtree over range `[start, end)` and returns its node id.
    fn build(&mut self, start: usize, end: usize, depth: usize) -> u32 {
        let k = self.y.cols;
        let mut weight = 0u64;
        let mut sums = vec![0.0; k];
        let mut sq = vec![0.0; k];
        for &r in &self.cols[0][start..end] {
            let wt = f64::from(self.weights[r as usize]);
            weight += u64::from(self.weights[r as usize]);
            for (j, v) in self.y.row(r as usize).iter().enumerate() {
                sums[j] += wt * v;
                sq[j] += wt * v * v;
            }
        }
        let w_total = weight as f64;
        let sse: f64 = sums
            .iter()
            .zip(&sq)
            .map(|(s, q)| q - s * s / w_total)
            .sum();
        let unsplittable = depth >= self.config.max_depth
            || weight < 2 * self.config.min_samples_leaf
            || sse <= 1e-12 * (1.0 + w_total);
        let split = if unsplittable {
            None
        } else {
            self.find_best_split(start, end, w_total, &sums)
        };
        let Some((feature, threshold)) = split else {
            let value = sums.iter().map(|s| s / w_total).collect();
            let leaf_id = self.leaf_values.len() as u32;
            self.leaf_values.push(value);
            let node_id = self.nodes.len() as u32;
            self.nodes.push((-1, 0.0, leaf_id, 0));
            return node_id;
        };
        let n_left = self.partition(start, end, feature, threshold);
        debug_assert!(n_left > 0 && start + n_left < end, "split separates rows");
        let node_id = self.nodes.len() as u32;
        self.nodes.push((0, 0.0, 0, 0));
        let left = self.build(start, start + n_left, depth + 1);
        let right = self.build(start + n_left, end, depth + 1);
        self.nodes[node_id as usize] = (feature as i32, threshold, left, right);
        node_id
    }

    /// Best `(feature, threshold)` over the node's candidate features, or
    /// `None` when no candidate satisfies the leaf-size constraint.
    fn find_best_split(
        &mut self,
        start: usize,
        end: usize,
        w_total: f64,
        sums: &[f64],
    ) -> Option<(usize, f64)> {
        let d = self.x.cols;
        let m = self.config.max_features.count(d);
        let selected: Vec<usize> = if m >= d {
            (0..d).collect()
        } else {
            let mut s = rand::seq::index::sample(self.rng, d, m).into_vec();
            s.sort_unstable();
            s
        };
        let min_w = self.config.min_samples_leaf as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for f in selected {
            let found = scan_feature(
                self.x,
                self.y,
                self.weights,
                &self.cols[f][start..end],
                f,
                w_total,
                sums,
                min_w,
                &mut self.suml,
            );
            if let Some((proxy, threshold)) = found {
                if best.is_none_or(|(bp, _, _)| proxy > bp) {
                    best = Some((proxy, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    /// Stably partitions every feature range by the chosen split; returns the
    /// number of rows routed left.
    fn partition(&mut self, start: usize, end: usize, feature: usize, threshold: f64) -> usize {
        let x = self.x;
        for &r in &self.cols[feature][start..end] {
            self.goes_left[r as usize] = x.row(r as usize)[feature] <= threshold;
        }
        let goes_left = &self.goes_left;
        let scratch = &mut self.scratch;
        let mut n_left = 0;
        for col in &mut self.cols {
            let seg = &mut col[start..end];
            scratch.clear();
            scratch.extend(seg.iter().copied().filter(|&r| goes_left[r as usize]));
            n_left = scratch.len();
            scratch.extend(seg.iter().copied().filter(|&r| !goes_left[r as usize]));
            seg.copy_from_slice(scratch);
        }
        n_left
    }
}

/// Scans one feature's sorted rows with weighted prefix sums. Returns the
/// best `(gain proxy, threshold)`, where the proxy is
/// `sum_k (S_L^2 / W_L + S_R^2 / W_R)` — maximizing it minimizes the summed
/// children SSE. Strict `>` keeps the lowest qualifying threshold on ties.
#[allow(clippy::too_many_arguments)]
fn scan_feature(
    x: &Matrix,
    y: &Matrix,
    weights: &[u32],
    rows: &[u32],
    feature: usize,
    w_total: f64,
    sums: &[f64],
    min_w: f64,
    suml: &mut [f64],
) -> Option<(f64, f64)> {
    suml.fill(0.0);
    let mut wl = 0.0f64;
    let mut prev = f64::NAN;
    let mut best: Option<(f64, f64)> = None;
    for &r in rows {
        let v = x.row(r as usize)[feature];
        if wl > 0.0 && v > prev {
            let wr = w_total - wl;
            if wl >= min_w && wr >= min_w {
                let mut proxy = 0.0;
                for (sl, st) in suml.iter().zip(sums) {
                    let sr = st - sl;
                    proxy += sl * sl / wl + sr * sr / wr;
                }
                // Midpoint, nudged down to the lower value if rounding lands
                // it on the upper one (so `<=` always separates the groups).
                let mut threshold = 0.5 * (prev + v);
                if threshold >= v {
                    threshold = prev;
                }
                if best.is_none_or(|(bp, _)| proxy > bp) {
                    best = Some((proxy, threshold));
                }
            }
        }
        let wt = f64::from(weights[r as usize]);
        wl += wt;
        for (s, t) in suml.iter_mut().zip(y.row(r as usize)) {
            *s += wt * t;
        }
        prev = v;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fit(x: &Matrix, y: &Matrix, w: &[u32], config: &TreeConfig, seed: u64) -> TreeModel {
        let sorted = SortedColumns::new(x);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fit_tree(x, y, w, config, &sorted, &mut rng).unwrap()
    }

    #[test]
    fn hand_built_walk() {
        // x <= 0.5 -> [1, 10]; else x <= 1.5 -> [2, 20] else [3, 30].
        let tree = TreeModel {
            nodes: vec![
                (0, 0.5, 1, 2),
                (-1, 0.0, 0, 0),
                (0, 1.5, 3, 4),
                (-1, 0.0, 1, 0),
                (-1, 0.0, 2, 0),
            ],
            leaf_values: vec![vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]],
        };
        assert_eq!(tree.predict_row(&[0.0]), &[1.0, 10.0]);
        assert_eq!(tree.predict_row(&[0.5]), &[1.0, 10.0]);
        assert_eq!(tree.predict_row(&[1.0]), &[2.0, 20.0]);
        assert_eq!(tree.predict_row(&[9.0]), &[3.0, 30.0]);
        assert_eq!(tree.n_outputs(), 2);
    }

    #[test]
    fn single_split_on_obvious_step() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = Matrix::from_rows(vec![vec![5.0], vec![5.0], vec![9.0], vec![9.0]]);
        let tree = fit(&x, &y, &[1, 1, 1, 1], &TreeConfig::default(), 0);
        assert_eq!(tree.predict_row(&[0.5]), &[5.0]);
        assert_eq!(tree.predict_row(&[2.5]), &[9.0]);
        // Root threshold is the midpoint of the step.
        assert_eq!(tree.nodes[0].0, 0);
        assert_eq!(tree.nodes[0].1, 1.5);
    }

    #[test]
    fn pure_targets_make_a_single_leaf() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]);
        let y = Matrix::from_rows(vec![vec![4.0, -1.0]; 3]);
        let tree = fit(&x, &y, &[1, 1, 1], &TreeConfig::default(), 0);
        assert_eq!(tree.n_nodes(), 1);
        assert_eq!(tree.predict_row(&[1.0]), &[4.0, -1.0]);
    }

    #[test]
    fn distinct_rows_are_memorized_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 64;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let x = Matrix::from_rows(rows);
        let y = Matrix::from_rows((0..n).map(|i| vec![i as f64, -(i as f64)]).collect());
        let config = TreeConfig {
            max_depth: 64,
            ..TreeConfig::default()
        };
        let tree = fit(&x, &y, &vec![1; n], &config, 0);
        assert_eq!(tree.n_leaves(), n);
        for i in 0..n {
            assert_eq!(tree.predict_row(x.row(i)), y.row(i), "row {i}");
        }
    }

    #[test]
    fn min_samples_leaf_is_weighted() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let config = TreeConfig {
            min_samples_leaf: 2,
            ..TreeConfig::default()
        };
        let tree = fit(&x, &y, &[1, 1, 1, 1], &config, 0);
        // Only the middle candidate satisfies two samples per side.
        assert_eq!(tree.nodes[0].1, 1.5);
        for (feature, _, _, _) in &tree.nodes[1..] {
            assert_eq!(*feature, -1, "children cannot split further");
        }
        // A weight-2 row counts as two samples.
        let tree = fit(&x, &y, &[2, 0, 1, 1], &config, 0);
        assert!(tree.n_nodes() > 1, "weighted counts allow the split");
    }

    #[test]
    fn zero_weight_rows_are_invisible() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![50.0]]);
        let y = Matrix::from_rows(vec![vec![1.0], vec![1.0], vec![1.0], vec![1000.0]]);
        let tree = fit(&x, &y, &[1, 1, 1, 0], &TreeConfig::default(), 0);
        // The outlier row has weight zero, so the tree never sees it.
        assert_eq!(tree.n_nodes(), 1);
        assert_eq!(tree.predict_row(&[50.0]), &[1.0]);
    }

    #[test]
    fn no_weighted_rows_is_an_error() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0]]);
        let y = Matrix::from_rows(vec![vec![0.0], vec![1.0]]);
        let sorted = SortedColumns::new(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = fit_tree(&x, &y, &[0, 0], &TreeConfig::default(), &sorted, &mut rng).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn duplicating_rows_equals_integer_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let x_rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| rng.random::<f64>()).collect())
            .collect();
        // Targets on a dyadic lattice keep every weighted sum exact, so
        // `w·y` and `y + y` agree bitwise and mathematically tied split
        // candidates resolve identically in both runs.
        let lattice = |z: f64| (z * 16.0).round() / 16.0;
        let y_rows: Vec<Vec<f64>> = x_rows
            .iter()
            .map(|r| vec![lattice(r[0] * 2.0 + r[1]), lattice(r[0] - r[1])])
            .collect();
        let w: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();

        let mut dup_x = Vec::new();
        let mut dup_y = Vec::new();
        for i in 0..n {
            for _ in 0..w[i] {
                dup_x.push(x_rows[i].clone());
                dup_y.push(y_rows[i].clone());
            }
        }
        let weighted = fit(
            &Matrix::from_rows(x_rows),
            &Matrix::from_rows(y_rows),
            &w,
            &TreeConfig::default(),
            0,
        );
        let duplicated = fit(
            &Matrix::from_rows(dup_x.clone()),
            &Matrix::from_rows(dup_y),
            &vec![1; dup_x.len()],
            &TreeConfig::default(),
            0,
        );
        for probe in 0..40 {
            let row = vec![probe as f64 / 40.0, (40 - probe) as f64 / 40.0];
            let a = weighted.predict_row(&row);
            let b = duplicated.predict_row(&row);
            for (va, vb) in a.iter().zip(b) {
                assert!((va - vb).abs() < 1e-9, "probe {probe}: {va} vs {vb}");
            }
        }
    }

    // ------------------------------------------------------------------
    // Exhaustive oracle: brute-force best split and recursive tree on tiny
    // instances, compared against the scanning implementation.
    // ------------------------------------------------------------------

    fn oracle_best_split(
        x: &Matrix,
        y: &Matrix,
        w: &[u32],
        rows: &[u32],
        min_w: f64,
    ) -> Option<(usize, f64)> {
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..x.cols {
            let mut vals: Vec<f64> = rows.iter().map(|&r| x.row(r as usize)[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for pair in vals.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let mut threshold = 0.5 * (a + b);
                if threshold >= b {
                    threshold = a;
                }
                let mut wl = 0.0;
                let mut wr = 0.0;
                let mut suml = vec![0.0; y.cols];
                let mut sumr = vec![0.0; y.cols];
                for &r in rows {
                    let wt = f64::from(w[r as usize]);
                    if x.row(r as usize)[f] <= threshold {
                        wl += wt;
                        for (s, v) in suml.iter_mut().zip(y.row(r as usize)) {
                            *s += wt * v;
                        }
                    } else {
                        wr += wt;
                        for (s, v) in sumr.iter_mut().zip(y.row(r as usize)) {
                            *s += wt * v;
                        }
                    }
                }
                if wl < min_w || wr < min_w {
                    continue;
                }
                let proxy: f64 = suml
                    .iter()
                    .zip(&sumr)
                    .map(|(sl, sr)| sl * sl / wl + sr * sr / wr)
                    .sum();
                if best.is_none_or(|(bp, _, _)| proxy > bp) {
                    best = Some((proxy, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    /// Total children SSE of a candidate split, brute force.
    fn oracle_split_sse(x: &Matrix, y: &Matrix, w: &[u32], rows: &[u32], f: usize, t: f64) -> f64 {
        let mut sse = 0.0;
        for side in [true, false] {
            let members: Vec<u32> = rows
                .iter()
                .copied()
                .filter(|&r| (x.row(r as usize)[f] <= t) == side)
                .collect();
            let wt: f64 = members.iter().map(|&r| f64::from(w[r as usize])).sum();
            if wt == 0.0 {
                continue;
            }
            for k in 0..y.cols {
                let sum: f64 = members
                    .iter()
                    .map(|&r| f64::from(w[r as usize]) * y.row(r as usize)[k])
                    .sum();
                let mean = sum / wt;
                sse += members
                    .iter()
                    .map(|&r| {
                        let v = y.row(r as usize)[k];
                        f64::from(w[r as usize]) * (v - mean) * (v - mean)
                    })
                    .sum::<f64>();
            }
        }
        sse
    }

    struct OracleTree {
        nodes: Vec<(i32, f64, u32, u32)>,
        leaf_values: Vec<Vec<f64>>,
    }

    fn oracle_build(
        x: &Matrix,
        y: &Matrix,
        w: &[u32],
        rows: &[u32],
        depth: usize,
        config: &TreeConfig,
        out: &mut OracleTree,
    ) -> u32 {
        let w_total: f64 = rows.iter().map(|&r| f64::from(w[r as usize])).sum();
        let mut sse = 0.0;
        let mut means = vec![0.0; y.cols];
        for k in 0..y.cols {
            let sum: f64 = rows
                .iter()
                .map(|&r| f64::from(w[r as usize]) * y.row(r as usize)[k])
                .sum();
            means[k] = sum / w_total;
            sse += rows
                .iter()
                .map(|&r| {
                    let v = y.row(r as usize)[k] - means[k];
                    f64::from(w[r as usize]) * v * v
                })
                .sum::<f64>();
        }
        let unsplittable = depth >= config.max_depth
            || (w_total as u64) < 2 * config.min_samples_leaf
            || sse <= 1e-12 * (1.0 + w_total);
        let split = if unsplittable {
            None
        } else {
            oracle_best_split(x, y, w, rows, config.min_samples_leaf as f64)
        };
        let Some((f, t)) = split else {
            let leaf_id = out.leaf_values.len() as u32;
            out.leaf_values.push(means);
            let node_id = out.nodes.len() as u32;
            out.nodes.push((-1, 0.0, leaf_id, 0));
            return node_id;
        };
        let left_rows: Vec<u32> = rows
            .iter()
            .copied()
            .filter(|&r| x.row(r as usize)[f] <= t)
            .collect();
        let right_rows: Vec<u32> = rows
            .iter()
            .copied()
            .filter(|&r| x.row(r as usize)[f] > t)
            .collect();
        let node_id = out.nodes.len() as u32;
        out.nodes.push((0, 0.0, 0, 0));
        let li = oracle_build(x, y, w, &left_rows, depth + 1, config, out);
        let ri = oracle_build(x, y, w, &right_rows, depth + 1, config, out);
        out.nodes[node_id as usize] = (f as i32, t, li, ri);
        node_id
    }

    fn assert_same_shape(impl_tree: &TreeModel, oracle: &OracleTree, instance: u64) {
        assert_eq!(
            impl_tree.nodes.len(),
            oracle.nodes.len(),
            "instance {instance}: node count"
        );
        for (i, (a, b)) in impl_tree.nodes.iter().zip(&oracle.nodes).enumerate() {
            assert_eq!(a.0, b.0, "instance {instance}, node {i}: feature");
            assert_eq!(a.1, b.1, "instance {instance}, node {i}: threshold");
            assert_eq!((a.2, a.3), (b.2, b.3), "instance {instance}, node {i}: links");
        }
        for (i, (a, b)) in impl_tree
            .leaf_values
            .iter()
            .zip(&oracle.leaf_values)
            .enumerate()
        {
            for (va, vb) in a.iter().zip(b) {
                assert!(
                    (va - vb).abs() <= 1e-9 * (1.0 + vb.abs()),
                    "instance {instance}, leaf {i}: {va} vs {vb}"
                );
            }
        }
    }

    #[test]
    fn oracle_agreement_on_random_instances() {
        for instance in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + instance);
            let n = rng.random_range(3..=8);
            let d = 2;
            let k = 2;
            // Values from small lattices exercise duplicate handling, and
            // integer targets keep every weighted sum exact in f64 so both
            // implementations resolve proxy ties identically.
            let x = Matrix::from_rows(
                (0..n)
                    .map(|_| (0..d).map(|_| rng.random_range(0..5) as f64).collect())
                    .collect(),
            );
            let y = Matrix::from_rows(
                (0..n)
                    .map(|_| (0..k).map(|_| rng.random_range(0..7) as f64).collect())
                    .collect(),
            );
            let weights: Vec<u32> = if instance % 2 == 0 {
                vec![1; n]
            } else {
                (0..n).map(|_| rng.random_range(0..3)).collect()
            };
            if weights.iter().map(|&w| u64::from(w)).sum::<u64>() < 2 {
                continue;
            }
            let config = TreeConfig {
                max_depth: 2,
                min_samples_leaf: if instance % 3 == 0 { 2 } else { 1 },
                max_features: MaxFeatures::All,
            };
            let sorted = SortedColumns::new(&x);
            let mut tree_rng = ChaCha8Rng::seed_from_u64(0);
            let impl_tree = fit_tree(&x, &y, &weights, &config, &sorted, &mut tree_rng).unwrap();

            let rows: Vec<u32> = (0..n as u32).filter(|&r| weights[r as usize] > 0).collect();
            let mut oracle = OracleTree {
                nodes: Vec::new(),
                leaf_values: Vec::new(),
            };
            oracle_build(&x, &y, &weights, &rows, 0, &config, &mut oracle);
            assert_same_shape(&impl_tree, &oracle, instance);

            // The chosen root split really is SSE-minimal among all
            // candidates the oracle enumerates.
            if impl_tree.nodes[0].0 >= 0 {
                let (f, t, _, _) = impl_tree.nodes[0];
                let chosen = oracle_split_sse(&x, &y, &weights, &rows, f as usize, t);
                for g in 0..d {
                    let mut vals: Vec<f64> =
                        rows.iter().map(|&r| x.row(r as usize)[g]).collect();
                    vals.sort_by(f64::total_cmp);
                    vals.dedup();
                    for pair in vals.windows(2) {
                        let mut cand = 0.5 * (pair[0] + pair[1]);
                        if cand >= pair[1] {
                            cand = pair[0];
                        }
                        let min_w = config.min_samples_leaf as f64;
                        let wl: f64 = rows
                            .iter()
                            .filter(|&&r| x.row(r as usize)[g] <= cand)
                            .map(|&r| f64::from(weights[r as usize]))
                            .sum();
                        let wr: f64 = rows
                            .iter()
                            .map(|&r| f64::from(weights[r as usize]))
                            .sum::<f64>()
                            - wl;
                        if wl < min_w || wr < min_w {
                            continue;
                        }
                        let sse = oracle_split_sse(&x, &y, &weights, &rows, g, cand);
                        assert!(
                            chosen <= sse + 1e-9,
                            "instance {instance}: candidate ({g}, {cand}) beats chosen ({f}, {t}): {sse} < {chosen}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn feature_subsampling_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let x = Matrix::from_rows(
            (0..n)
                .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
                .collect(),
        );
        let y = Matrix::from_rows(
            (0..n)
                .map(|i| vec![x.row(i)[0] + 2.0 * x.row(i)[3]])
                .collect(),
        );
        let config = TreeConfig {
            max_features: MaxFeatures::Sqrt,
            ..TreeConfig::default()
        };
        let a = fit(&x, &y, &vec![1; n], &config, 42);
        let b = fit(&x, &y, &vec![1; n], &config, 42);
        assert_eq!(a, b);
        assert_eq!(MaxFeatures::Sqrt.count(6), 3);
        assert_eq!(MaxFeatures::Fixed(10).count(6), 6);
        assert_eq!(MaxFeatures::All.count(6), 6);
    }
}
