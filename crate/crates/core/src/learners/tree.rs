//! CART decision trees: Gini impurity, midpoint thresholds, and deterministic
//! tie-breaking (earlier feature, then lower threshold, wins).

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_trainable, Classifier, Learner};
use crate::dataset::Dataset;
use crate::rng::rng_from;
use crate::schema::FeatureSchema;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features drawn per split; `None` tries them all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: None, min_samples_split: 2, max_features: None }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::Validation("tree depth must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Validation("min_samples_split must be >= 2".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::Validation("max_features must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { counts: Vec<u32> },
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
}

struct Pending {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
}

fn gini_sum_sq(counts: &[u32]) -> f64 {
    counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum()
}

impl DecisionTree {
    /// Grows a tree over the rows listed in `rows` (repeats allowed, as in
    /// bootstrap samples).
    pub fn fit<R: Rng + ?Sized>(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        rows: Vec<usize>,
        n_classes: usize,
        params: &TreeParams,
        rng: &mut R,
    ) -> Self {
        let mut nodes = vec![Node::Leaf { counts: vec![] }];
        let mut stack = vec![Pending { node: 0, rows, depth: 0 }];
        let n_features = x.ncols();
        while let Some(Pending { node, rows, depth }) = stack.pop() {
            let mut counts = vec![0u32; n_classes];
            for &r in &rows {
                counts[y[r]] += 1;
            }
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
            if pure || depth_capped || rows.len() < params.min_samples_split {
                nodes[node] = Node::Leaf { counts };
                continue;
            }
            let candidates: Vec<usize> = match params.max_features {
                Some(m) if m < n_features => {
                    let mut f = sample(rng, n_features, m).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => (0..n_features).collect(),
            };
            let mut best = best_split(x, y, &rows, &counts, &candidates);
            if best.is_none() && candidates.len() < n_features {
                let all: Vec<usize> = (0..n_features).collect();
                best = best_split(x, y, &rows, &counts, &all);
            }
            let Some((feature, threshold)) = best else {
                nodes[node] = Node::Leaf { counts };
                continue;
            };
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| x[[r, feature]] <= threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf { counts: vec![] });
            let right = nodes.len();
            nodes.push(Node::Leaf { counts: vec![] });
            nodes[node] = Node::Split { feature, threshold, left, right };
            // Right first so the left subtree is finished first; node order
            // does not affect predictions.
            stack.push(Pending { node: right, rows: right_rows, depth: depth + 1 });
            stack.push(Pending { node: left, rows: left_rows, depth: depth + 1 });
        }
        DecisionTree { nodes, n_classes }
    }

    /// Builds a tree from explicit nodes; node 0 is the root.
    pub fn from_nodes(nodes: Vec<Node>, n_classes: usize) -> Result<Self> {
        let t = DecisionTree { nodes, n_classes };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Validation("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { counts } => {
                    if counts.len() != self.n_classes || counts.iter().all(|&c| c == 0) {
                        return Err(Error::Validation(format!("leaf {i} has invalid counts")));
                    }
                }
                Node::Split { threshold, left, right, .. } => {
                    if *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(Error::Validation(format!("split {i} has invalid children")));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::Validation(format!("split {i} has a non-finite threshold")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Index of the leaf `x` falls into.
    pub fn leaf_index(&self, x: ArrayView1<'_, f64>) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Indices of all leaves, in node order.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| matches!(self.nodes[i], Node::Leaf { .. })).collect()
    }

    pub fn leaf_counts(&self, leaf: usize) -> &[u32] {
        match &self.nodes[leaf] {
            Node::Leaf { counts } => counts,
            Node::Split { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    /// Class frequencies of the leaf `x` reaches.
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let counts = self.leaf_counts(self.leaf_index(x));
        let total: u32 = counts.iter().sum();
        counts.iter().map(|&c| f64::from(c) / f64::from(total)).collect()
    }

    /// Majority class of the leaf `x` reaches (lowest id on ties).
    pub fn vote(&self, x: ArrayView1<'_, f64>) -> usize {
        let counts = self.leaf_counts(self.leaf_index(x));
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        best
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Best (feature, threshold) by weighted Gini, or `None` when every
/// candidate feature is constant over `rows`.
fn best_split(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    rows: &[usize],
    parent: &[u32],
    features: &[usize],
) -> Option<(usize, f64)> {
    let n = rows.len() as f64;
    let parent_sq = gini_sum_sq(parent);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    let mut left = vec![0u32; parent.len()];
    for &f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (x[[r, f]], y[r])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0);
        let mut left_sq = 0.0;
        let mut right_sq = parent_sq;
        for j in 0..pairs.len() - 1 {
            let c = pairs[j].1;
            let lc = f64::from(left[c]);
            let rc = f64::from(parent[c] - left[c]);
            left_sq += 2.0 * lc + 1.0;
            right_sq -= 2.0 * rc - 1.0;
            left[c] += 1;
            if pairs[j].0 == pairs[j + 1].0 {
                continue;
            }
            let nl = (j + 1) as f64;
            let nr = n - nl;
            // Weighted Gini = 1 − (Σl²/nl + Σr²/nr)/n; minimise via the sum.
            let impurity = 1.0 - (left_sq / nl + right_sq / nr) / n;
            if best.is_none_or(|(b, _, _)| impurity < b) {
                let threshold = 0.5 * (pairs[j].0 + pairs[j + 1].0);
                // Midpoint of adjacent floats can round onto the upper value.
                let threshold = if threshold >= pairs[j + 1].0 { pairs[j].0 } else { threshold };
                best = Some((impurity, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[derive(Debug, Clone)]
pub struct TreeLearner {
    params: TreeParams,
}

impl TreeLearner {
    pub fn new(params: TreeParams) -> Result<Self> {
        params.validate()?;
        Ok(TreeLearner { params })
    }
}

#[derive(Debug, Clone)]
pub struct TreeClassifier {
    schema: FeatureSchema,
    tree: DecisionTree,
}

impl TreeClassifier {
    pub fn tree(&self) -> &DecisionTree {
        &self.tree
    }
}

impl Classifier for TreeClassifier {
    fn kind(&self) -> &'static str {
        "decision_tree"
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn n_classes(&self) -> usize {
        self.tree.n_classes
    }

    fn scores_unchecked(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        self.tree.scores(x)
    }

    fn state(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(&self.tree)?)
    }
}

impl Learner for TreeLearner {
    fn kind(&self) -> &'static str {
        "decision_tree"
    }

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Classifier>> {
        check_trainable(train)?;
        let y: Vec<usize> = train.labels().iter().map(|c| c.0).collect();
        let tree = DecisionTree::fit(
            train.features(),
            &y,
            (0..train.len()).collect(),
            train.n_classes(),
            &self.params,
            &mut rng_from(seed),
        );
        Ok(Box::new(TreeClassifier { schema: train.schema().clone(), tree }))
    }

    fn load(&self, schema: FeatureSchema, n_classes: usize, state: &serde_json::Value) -> Result<Box<dyn Classifier>> {
        let tree: DecisionTree = serde_json::from_value(state.clone())?;
        if tree.n_classes != n_classes {
            return Err(Error::Serialization("tree class count does not match".into()));
        }
        tree.validate().map_err(|e| Error::Serialization(e.to_string()))?;
        check_features(&tree, schema.len())?;
        Ok(Box::new(TreeClassifier { schema, tree }))
    }
}

pub(crate) fn check_features(tree: &DecisionTree, n_features: usize) -> Result<()> {
    let bad = tree.nodes.iter().any(|n| matches!(n, Node::Split { feature, .. } if *feature >= n_features));
    if bad {
        return Err(Error::Serialization("tree splits on a feature outside its schema".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn xor_needs_zero_gain_split_and_is_learned() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let t = DecisionTree::fit(x.view(), &y, (0..4).collect(), 2, &TreeParams::default(), &mut rng_from(0));
        for (i, row) in x.outer_iter().enumerate() {
            assert_eq!(t.vote(row), y[i]);
        }
    }

    #[test]
    fn depth_cap_is_honoured() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0, 1, 0, 1];
        let params = TreeParams { max_depth: Some(1), ..TreeParams::default() };
        let t = DecisionTree::fit(x.view(), &y, (0..4).collect(), 2, &params, &mut rng_from(0));
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn midpoint_threshold() {
        let x = array![[1.0], [3.0]];
        let t = DecisionTree::fit(x.view(), &[0, 1], vec![0, 1], 2, &TreeParams::default(), &mut rng_from(0));
        match &t.nodes()[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 2.0),
            n => panic!("expected split, got {n:?}"),
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(TreeLearner::new(TreeParams { max_depth: Some(0), ..TreeParams::default() }).is_err());
        assert!(TreeLearner::new(TreeParams { min_samples_split: 1, ..TreeParams::default() }).is_err());
    }
}
