//! Variance-reduction regression trees over dense feature rows.
//!
//! Used directly by the CART and random-forest surrogates, and as the weak
//! learner of the gradient-boosted ranker (which rewrites leaf values).

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Number of features considered per split; `None` uses all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: TreeParams,
    n_features: usize,
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Fits on the rows listed in `samples` (repeats allowed, as in bootstrap samples).
    /// `rng` is only consulted when feature subsampling is enabled.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        samples: &[usize],
        params: TreeParams,
        rng: Option<&mut Rng>,
    ) -> Self {
        assert!(!samples.is_empty(), "cannot fit a tree on zero samples");
        let n_features = x.first().map_or(0, Vec::len);
        let mut b = Builder {
            x,
            y,
            params,
            n_features,
            nodes: Vec::new(),
        };
        let mut idx = samples.to_vec();
        b.grow(&mut idx, 0, rng);
        RegressionTree { nodes: b.nodes }
    }

    /// Single-leaf tree.
    pub fn constant(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf node reached by `row`.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Overwrites the value of leaf `node`.
    pub fn set_leaf(&mut self, node: usize, value: f64) {
        if let Node::Leaf { value: v } = &mut self.nodes[node] {
            *v = value;
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
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

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, mut rng: Option<&mut Rng>) -> usize {
        let id = self.nodes.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf { value: mean });

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let min_leaf = self.params.min_leaf.max(1);
        if !depth_ok || idx.len() < 2 * min_leaf || self.n_features == 0 {
            return id;
        }
        let first = self.y[idx[0]];
        if idx.iter().all(|&i| self.y[i] == first) {
            return id;
        }

        let features: Vec<usize> = match (self.params.max_features, rng.as_deref_mut()) {
            (Some(m), Some(r)) if m < self.n_features => {
                let mut f = sample(r, self.n_features, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..self.n_features).collect(),
        };

        let Some((feature, threshold)) = self.best_split(idx, &features, min_leaf) else {
            return id;
        };
        let mut split = 0;
        for k in 0..idx.len() {
            if self.x[idx[k]][feature] <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng.as_deref_mut());
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Best (feature, threshold) by squared-error reduction; first wins on ties.
    fn best_split(&self, idx: &[usize], features: &[usize], min_leaf: usize) -> Option<(usize, f64)> {
        let n = idx.len();
        let total_sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total_sum * total_sum / n as f64;
        let mut best: Option<(usize, f64)> = None;
        let mut best_gain = 1e-12 * parent_sse.abs().max(1e-300);
        let mut order = idx.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for k in 0..n - 1 {
                let yk = self.y[order[k]];
                left_sum += yk;
                left_sq += yk * yk;
                let nl = k + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let here = self.x[order[k]][f];
                let next = self.x[order[k + 1]][f];
                if here == next {
                    continue;
                }
                let right_sum = total_sum - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / nl as f64)
                    + (right_sq - right_sum * right_sum / nr as f64);
                let gain = parent_sse - sse;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some((f, here + (next - here) / 2.0));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memorizes_distinct_rows_with_unit_leaves() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = vec![3.0, -1.0, 7.5, 2.0];
        let params = TreeParams {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
        };
        let t = RegressionTree::fit(&x, &y, &[0, 1, 2, 3], params, None);
        for (row, target) in x.iter().zip(&y) {
            assert_eq!(t.predict(row), *target);
        }
        assert_eq!(t.leaf_count(), 4);
    }

    #[test]
    fn depth_limit_is_respected() {
        let x: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..32).map(|i| (i * i) as f64).collect();
        let samples: Vec<usize> = (0..32).collect();
        let params = TreeParams {
            max_depth: Some(2),
            min_leaf: 1,
            max_features: None,
        };
        let t = RegressionTree::fit(&x, &y, &samples, params, None);
        assert!(t.depth() <= 2);
        assert!(t.leaf_count() <= 4);
    }

    #[test]
    fn leaf_values_can_be_rewritten() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![0.0, 1.0];
        let params = TreeParams {
            min_leaf: 1,
            ..Default::default()
        };
        let mut t = RegressionTree::fit(&x, &y, &[0, 1], params, None);
        let leaf = t.leaf_of(&[1.0]);
        t.set_leaf(leaf, 42.0);
        assert_eq!(t.predict(&[1.0]), 42.0);
        assert_eq!(t.predict(&[0.0]), 0.0);
    }
}
